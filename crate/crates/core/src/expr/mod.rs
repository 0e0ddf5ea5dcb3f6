//! Expression trees over the variables `t`, `x1`, `x2`.
//!
//! Coefficients, drifts and auxiliary functions enter the crate as closed-form
//! expressions. The AST supports the binary operators `+ - * / ^`, unary
//! negation, the constant `pi` and the functions
//! `sin cos exp log sqrt tanh abs sign`. Evaluation is total on its domain:
//! `log`/`sqrt` outside their domain, division by zero and non-finite results
//! are reported as errors, never returned as silent NaN.
//!
//! `sign` is the derivative carrier for `abs`, with the fixed convention
//! `sign(0) = 0`.

mod compile;
mod diff;
mod parse;

pub use compile::CompiledExpr;
pub use parse::parse_expr;

use crate::error::EvalError;
use std::fmt;

/// Variables an expression may reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    T,
    X1,
    X2,
}

impl Var {
    pub fn name(self) -> &'static str {
        match self {
            Var::T => "t",
            Var::X1 => "x1",
            Var::X2 => "x2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Tanh,
    Abs,
    Sign,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Tanh => "tanh",
            Func::Abs => "abs",
            Func::Sign => "sign",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "tanh" => Func::Tanh,
            "abs" => Func::Abs,
            "sign" => Func::Sign,
            _ => return None,
        })
    }
}

/// Abstract syntax tree of a scalar expression.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Pi,
    Var(Var),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Fun(Func, Box<Expr>),
}

/// `base^expo` with integral literal exponents routed through `powi` so that
/// tree evaluation and compiled evaluation agree bit for bit.
#[inline]
pub(crate) fn pow_eval(base: f64, expo: f64) -> f64 {
    if expo.fract() == 0.0 && expo.abs() <= i32::MAX as f64 {
        base.powi(expo as i32)
    } else {
        base.powf(expo)
    }
}

#[inline]
pub(crate) fn apply_fun(f: Func, v: f64) -> Result<f64, EvalError> {
    Ok(match f {
        Func::Sin => v.sin(),
        Func::Cos => v.cos(),
        Func::Exp => v.exp(),
        Func::Log => {
            if v <= 0.0 {
                return Err(EvalError::LogDomain { arg: v });
            }
            v.ln()
        }
        Func::Sqrt => {
            if v < 0.0 {
                return Err(EvalError::SqrtDomain { arg: v });
            }
            v.sqrt()
        }
        Func::Tanh => v.tanh(),
        Func::Abs => v.abs(),
        Func::Sign => {
            if v > 0.0 {
                1.0
            } else if v < 0.0 {
                -1.0
            } else {
                0.0
            }
        }
    })
}

impl Expr {
    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    pub fn var(v: Var) -> Expr {
        Expr::Var(v)
    }

    pub fn bin(op: BinOp, a: Expr, b: Expr) -> Expr {
        Expr::Bin(op, Box::new(a), Box::new(b))
    }

    pub fn fun(f: Func, a: Expr) -> Expr {
        Expr::Fun(f, Box::new(a))
    }

    pub fn neg(a: Expr) -> Expr {
        Expr::Neg(Box::new(a))
    }

    /// Evaluate at time `t` and spatial point `x` (`x.len()` is 1 or 2).
    pub fn eval(&self, t: f64, x: &[f64]) -> Result<f64, EvalError> {
        let v = match self {
            Expr::Num(v) => *v,
            Expr::Pi => std::f64::consts::PI,
            Expr::Var(Var::T) => t,
            Expr::Var(Var::X1) => *x.first().ok_or(EvalError::MissingVar { name: "x1" })?,
            Expr::Var(Var::X2) => *x.get(1).ok_or(EvalError::MissingVar { name: "x2" })?,
            Expr::Neg(a) => -a.eval(t, x)?,
            Expr::Bin(op, a, b) => {
                let av = a.eval(t, x)?;
                let bv = b.eval(t, x)?;
                match op {
                    BinOp::Add => av + bv,
                    BinOp::Sub => av - bv,
                    BinOp::Mul => av * bv,
                    BinOp::Div => {
                        if bv == 0.0 {
                            return Err(EvalError::DivByZero);
                        }
                        av / bv
                    }
                    BinOp::Pow => pow_eval(av, bv),
                }
            }
            Expr::Fun(f, a) => apply_fun(*f, a.eval(t, x)?)?,
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite)
        }
    }

    /// Symbolic partial derivative with respect to `var`, lightly simplified.
    pub fn differentiate(&self, var: Var) -> Expr {
        diff::differentiate(self, var)
    }

    /// Constant-fold and drop algebraic no-ops.
    pub fn simplify(&self) -> Expr {
        diff::simplify(self)
    }

    /// Compile to a postfix program for fast repeated evaluation.
    pub fn compile(&self) -> CompiledExpr {
        compile::compile(self)
    }

    /// True if the expression mentions `var`.
    pub fn depends_on(&self, var: Var) -> bool {
        match self {
            Expr::Num(_) | Expr::Pi => false,
            Expr::Var(v) => *v == var,
            Expr::Neg(a) | Expr::Fun(_, a) => a.depends_on(var),
            Expr::Bin(_, a, b) => a.depends_on(var) || b.depends_on(var),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
            Expr::Bin(BinOp::Mul | BinOp::Div, ..) => 2,
            Expr::Neg(_) => 3,
            Expr::Bin(BinOp::Pow, ..) => 4,
            _ => 5,
        }
    }
}

// Precedence-aware printing; `parse(print(e)) == e` for every AST produced by
// the parser or the differentiator.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn wrap(f: &mut fmt::Formatter<'_>, e: &Expr, need: bool) -> fmt::Result {
            if need {
                write!(f, "(")?;
                write!(f, "{e}")?;
                write!(f, ")")
            } else {
                write!(f, "{e}")
            }
        }
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Pi => write!(f, "pi"),
            Expr::Var(v) => write!(f, "{}", v.name()),
            Expr::Neg(a) => {
                write!(f, "-")?;
                // unary minus binds tighter than * but looser than ^
                wrap(f, a, a.precedence() < 3)
            }
            Expr::Bin(op, a, b) => {
                let (sym, prec) = match op {
                    BinOp::Add => ("+", 1),
                    BinOp::Sub => ("-", 1),
                    BinOp::Mul => ("*", 2),
                    BinOp::Div => ("/", 2),
                    BinOp::Pow => ("^", 4),
                };
                match op {
                    BinOp::Pow => {
                        // right-associative; a leading unary minus in the
                        // exponent re-parses without parentheses, but a
                        // sign-negative literal base must keep its parens
                        let neg_literal = matches!(**a, Expr::Num(v) if v.is_sign_negative());
                        wrap(f, a, a.precedence() <= 4 || neg_literal)?;
                        write!(f, "{sym}")?;
                        wrap(f, b, b.precedence() < 3)
                    }
                    _ => {
                        wrap(f, a, a.precedence() < prec)?;
                        write!(f, "{sym}")?;
                        wrap(f, b, b.precedence() <= prec)
                    }
                }
            }
            Expr::Fun(fun, a) => write!(f, "{}({a})", fun.name()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Expr {
        parse_expr(s).unwrap()
    }

    #[test]
    fn cubic_drift_hand_value() {
        // -x1^3*(1+0.5*sin(2*pi*t)) at (t=0.25, x1=2): -8 * 1.5 = -12
        let e = p("-x1^3*(1+0.5*sin(2*pi*t))");
        let v = e.eval(0.25, &[2.0]).unwrap();
        assert!((v - (-12.0)).abs() < 1e-12, "got {v}");
    }

    #[test]
    fn identity_expr() {
        let e = p("x1");
        assert_eq!(e, Expr::Var(Var::X1));
        assert_eq!(e.eval(0.0, &[3.5]).unwrap(), 3.5);
    }

    #[test]
    fn pow_binds_tighter_than_unary_minus() {
        assert_eq!(p("-2^2").eval(0.0, &[0.0]).unwrap(), -4.0);
        assert_eq!(p("(-2)^2").eval(0.0, &[0.0]).unwrap(), 4.0);
        assert_eq!(p("2^-2").eval(0.0, &[0.0]).unwrap(), 0.25);
    }

    #[test]
    fn pow_right_associative() {
        // 2^3^2 = 2^9 = 512
        assert_eq!(p("2^3^2").eval(0.0, &[0.0]).unwrap(), 512.0);
    }

    #[test]
    fn domain_errors_are_reported() {
        assert!(matches!(
            p("log(x1)").eval(0.0, &[-1.0]),
            Err(EvalError::LogDomain { .. })
        ));
        assert!(matches!(
            p("sqrt(x1)").eval(0.0, &[-1.0]),
            Err(EvalError::SqrtDomain { .. })
        ));
        assert!(matches!(
            p("1/x1").eval(0.0, &[0.0]),
            Err(EvalError::DivByZero)
        ));
        // overflow surfaces as a non-finite report, not NaN
        assert!(matches!(
            p("exp(x1^2)").eval(0.0, &[1e6]),
            Err(EvalError::NonFinite)
        ));
    }

    #[test]
    fn print_parse_fixed_point_on_samples() {
        for s in [
            "-x1^3*(1+0.5*sin(2*pi*t))",
            "x1^2-2*x1/(t+3)",
            "sin(2*pi*t)*cos(x1)^2",
            "exp(-x1^2)*tanh(x2)",
            "1e-3*x1+2.5E+2",
            "-(x1+t)^-2",
            "abs(x1)-sign(x1)*sqrt(abs(x1))",
        ] {
            let e = p(s);
            let printed = e.to_string();
            let e2 = parse_expr(&printed)
                .unwrap_or_else(|err| panic!("reparse of `{printed}` failed: {err}"));
            assert_eq!(e, e2, "round trip of `{s}` via `{printed}`");
        }
    }
}
