//! Property tests for the expression layer: the print/parse fixed point and
//! agreement of symbolic derivatives with central differences.

use evolop::expr::{BinOp, Expr, Func, Var};
use evolop::parse_expr;
use proptest::prelude::*;

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        (-9.75f64..9.75).prop_map(|v| Expr::Num((v * 16.0).round() / 16.0)),
        Just(Expr::Pi),
        Just(Expr::Var(Var::T)),
        Just(Expr::Var(Var::X1)),
        Just(Expr::Var(Var::X2)),
    ]
}

fn arb_expr() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(5, 64, 3, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone(), prop_oneof![
                Just(BinOp::Add),
                Just(BinOp::Sub),
                Just(BinOp::Mul),
                Just(BinOp::Div),
            ])
                .prop_map(|(a, b, op)| Expr::bin(op, a, b)),
            // powers with small literal exponents keep evaluation sane
            (inner.clone(), -3i32..4).prop_map(|(a, n)| Expr::bin(
                BinOp::Pow,
                a,
                Expr::Num(n as f64)
            )),
            (inner.clone(), prop_oneof![
                Just(Func::Sin),
                Just(Func::Cos),
                Just(Func::Exp),
                Just(Func::Log),
                Just(Func::Sqrt),
                Just(Func::Tanh),
                Just(Func::Abs),
                Just(Func::Sign),
            ])
                .prop_map(|(a, f)| Expr::fun(f, a)),
            inner.prop_map(Expr::neg),
        ]
    })
}

proptest! {
    /// parse(print(e)) == e for parser-reachable trees. Random trees are
    /// pushed through one parse first so both sides live in the parser's
    /// canonical form (negated literals are folded).
    #[test]
    fn print_parse_fixed_point(e in arb_expr()) {
        let canonical = match parse_expr(&e.to_string()) {
            Ok(c) => c,
            Err(err) => panic!("printed form `{}` does not re-parse: {err}", e),
        };
        let printed = canonical.to_string();
        let reparsed = parse_expr(&printed)
            .unwrap_or_else(|err| panic!("`{printed}` does not re-parse: {err}"));
        prop_assert_eq!(&reparsed, &canonical, "via `{}`", printed);
    }

    /// simplification preserves values wherever the original evaluates
    #[test]
    fn simplify_preserves_values(e in arb_expr(), t in -2.0f64..2.0, x in -2.0f64..2.0) {
        let s = e.simplify();
        if let Ok(v) = e.eval(t, &[x, 0.3]) {
            if let Ok(vs) = s.eval(t, &[x, 0.3]) {
                prop_assert!(
                    (v - vs).abs() <= 1e-9 * (1.0 + v.abs()),
                    "{} vs simplified {}: {v} != {vs}", e, s
                );
            }
        }
    }

    /// symbolic derivatives match central differences at points where the
    /// expression is smooth and well-scaled
    #[test]
    fn derivative_matches_central_difference(e in arb_expr(), t in 0.1f64..1.9, x in 0.1f64..1.9) {
        let h = 1e-5;
        for var in [Var::T, Var::X1] {
            let d = e.differentiate(var);
            let (tp, tm, xp, xm) = match var {
                Var::T => (t + h, t - h, x, x),
                _ => (t, t, x + h, x - h),
            };
            let evals = (
                e.eval(tp, &[xp, 0.7]),
                e.eval(tm, &[xm, 0.7]),
                e.eval(t, &[x, 0.7]),
                d.eval(t, &[x, 0.7]),
            );
            if let (Ok(fp), Ok(fm), Ok(f0), Ok(sym)) = evals {
                // skip ill-scaled regions where the quotient is dominated
                // by curvature or cancellation (abs/sign kinks, huge values)
                let curvature = (fp - 2.0 * f0 + fm).abs() / (h * h);
                if fp.abs().max(fm.abs()).max(sym.abs()) < 1e6 && curvature < 1e4 {
                    let fd = (fp - fm) / (2.0 * h);
                    prop_assert!(
                        (sym - fd).abs() <= 1e-5 * (1.0 + sym.abs()) + 1e-9 * curvature,
                        "{} d/d{:?} at (t={t}, x={x}): sym {sym} vs fd {fd}", e, var
                    );
                }
            }
        }
    }

    /// evaluation never silently returns a non-finite number
    #[test]
    fn eval_is_total_or_errors(e in arb_expr(), t in -3.0f64..3.0, x in -3.0f64..3.0) {
        if let Ok(v) = e.eval(t, &[x, -x]) {
            prop_assert!(v.is_finite());
        }
    }
}
