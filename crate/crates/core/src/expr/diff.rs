//! Symbolic differentiation and light simplification.

use super::{BinOp, Expr, Func, Var};

pub fn differentiate(e: &Expr, var: Var) -> Expr {
    simplify(&d(e, var))
}

fn d(e: &Expr, var: Var) -> Expr {
    match e {
        Expr::Num(_) | Expr::Pi => Expr::Num(0.0),
        Expr::Var(v) => Expr::Num(if *v == var { 1.0 } else { 0.0 }),
        Expr::Neg(a) => Expr::neg(d(a, var)),
        Expr::Bin(BinOp::Add, a, b) => Expr::bin(BinOp::Add, d(a, var), d(b, var)),
        Expr::Bin(BinOp::Sub, a, b) => Expr::bin(BinOp::Sub, d(a, var), d(b, var)),
        Expr::Bin(BinOp::Mul, a, b) => Expr::bin(
            BinOp::Add,
            Expr::bin(BinOp::Mul, d(a, var), (**b).clone()),
            Expr::bin(BinOp::Mul, (**a).clone(), d(b, var)),
        ),
        Expr::Bin(BinOp::Div, a, b) => Expr::bin(
            BinOp::Div,
            Expr::bin(
                BinOp::Sub,
                Expr::bin(BinOp::Mul, d(a, var), (**b).clone()),
                Expr::bin(BinOp::Mul, (**a).clone(), d(b, var)),
            ),
            Expr::bin(BinOp::Pow, (**b).clone(), Expr::Num(2.0)),
        ),
        Expr::Bin(BinOp::Pow, a, b) => {
            if !b.depends_on(var) {
                // d(u^c) = c*u^(c-1)*u'
                let cm1 = Expr::bin(BinOp::Sub, (**b).clone(), Expr::Num(1.0));
                Expr::bin(
                    BinOp::Mul,
                    Expr::bin(
                        BinOp::Mul,
                        (**b).clone(),
                        Expr::bin(BinOp::Pow, (**a).clone(), cm1),
                    ),
                    d(a, var),
                )
            } else {
                // u^v = exp(v*log u): d = u^v*(v'*log u + v*u'/u)
                Expr::bin(
                    BinOp::Mul,
                    (*e).clone(),
                    Expr::bin(
                        BinOp::Add,
                        Expr::bin(
                            BinOp::Mul,
                            d(b, var),
                            Expr::fun(Func::Log, (**a).clone()),
                        ),
                        Expr::bin(
                            BinOp::Div,
                            Expr::bin(BinOp::Mul, (**b).clone(), d(a, var)),
                            (**a).clone(),
                        ),
                    ),
                )
            }
        }
        Expr::Fun(f, a) => {
            let inner = d(a, var);
            let outer = match f {
                Func::Sin => Expr::fun(Func::Cos, (**a).clone()),
                Func::Cos => Expr::neg(Expr::fun(Func::Sin, (**a).clone())),
                Func::Exp => Expr::fun(Func::Exp, (**a).clone()),
                Func::Log => Expr::bin(BinOp::Div, Expr::Num(1.0), (**a).clone()),
                Func::Sqrt => Expr::bin(
                    BinOp::Div,
                    Expr::Num(0.5),
                    Expr::fun(Func::Sqrt, (**a).clone()),
                ),
                Func::Tanh => Expr::bin(
                    BinOp::Sub,
                    Expr::Num(1.0),
                    Expr::bin(
                        BinOp::Pow,
                        Expr::fun(Func::Tanh, (**a).clone()),
                        Expr::Num(2.0),
                    ),
                ),
                // abs'(0) := 0 by the sign(0) = 0 convention
                Func::Abs => Expr::fun(Func::Sign, (**a).clone()),
                Func::Sign => Expr::Num(0.0),
            };
            Expr::bin(BinOp::Mul, outer, inner)
        }
    }
}

/// Constant folding plus removal of `+0`, `*1`, `*0`, `^1`, `^0`, `--`.
/// Folding only collapses finite results so domain errors stay observable.
pub fn simplify(e: &Expr) -> Expr {
    match e {
        Expr::Num(_) | Expr::Pi | Expr::Var(_) => e.clone(),
        Expr::Neg(a) => {
            let a = simplify(a);
            match a {
                Expr::Num(v) => Expr::Num(-v),
                Expr::Neg(inner) => *inner,
                other => Expr::neg(other),
            }
        }
        Expr::Fun(f, a) => {
            let a = simplify(a);
            if let Expr::Num(v) = a {
                if let Ok(r) = super::apply_fun(*f, v) {
                    if r.is_finite() {
                        return Expr::Num(r);
                    }
                }
            }
            Expr::fun(*f, a)
        }
        Expr::Bin(op, a, b) => {
            let a = simplify(a);
            let b = simplify(b);
            if let (Expr::Num(x), Expr::Num(y)) = (&a, &b) {
                let folded = match op {
                    BinOp::Add => Some(x + y),
                    BinOp::Sub => Some(x - y),
                    BinOp::Mul => Some(x * y),
                    BinOp::Div => {
                        if *y != 0.0 {
                            Some(x / y)
                        } else {
                            None
                        }
                    }
                    BinOp::Pow => Some(super::pow_eval(*x, *y)),
                };
                if let Some(v) = folded {
                    if v.is_finite() {
                        return Expr::Num(v);
                    }
                }
            }
            match (op, &a, &b) {
                (BinOp::Add, Expr::Num(z), _) if *z == 0.0 => b,
                (BinOp::Add, _, Expr::Num(z)) if *z == 0.0 => a,
                (BinOp::Sub, _, Expr::Num(z)) if *z == 0.0 => a,
                (BinOp::Sub, Expr::Num(z), _) if *z == 0.0 => simplify(&Expr::neg(b)),
                (BinOp::Mul, Expr::Num(z), _) | (BinOp::Mul, _, Expr::Num(z)) if *z == 0.0 => {
                    Expr::Num(0.0)
                }
                (BinOp::Mul, Expr::Num(one), _) if *one == 1.0 => b,
                (BinOp::Mul, _, Expr::Num(one)) if *one == 1.0 => a,
                (BinOp::Div, _, Expr::Num(one)) if *one == 1.0 => a,
                (BinOp::Div, Expr::Num(z), _) if *z == 0.0 => Expr::Num(0.0),
                (BinOp::Pow, _, Expr::Num(one)) if *one == 1.0 => a,
                (BinOp::Pow, _, Expr::Num(z)) if *z == 0.0 => Expr::Num(1.0),
                _ => Expr::bin(*op, a, b),
            }
        }
    }
}
