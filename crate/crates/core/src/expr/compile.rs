//! Postfix compilation of expression trees for hot loops (path simulation,
//! generator assembly). Compiled evaluation reproduces tree evaluation bit
//! for bit: both route integral literal exponents through `powi` and share
//! the function table.

use super::{apply_fun, pow_eval, BinOp, Expr, Func, Var};
use crate::error::EvalError;

#[derive(Debug, Clone)]
enum Instr {
    Num(f64),
    T,
    X1,
    X2,
    Neg,
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    PowI(i32),
    Fun(Func),
}

/// A flattened expression program.
#[derive(Debug, Clone)]
pub struct CompiledExpr {
    prog: Vec<Instr>,
    max_stack: usize,
}

pub fn compile(e: &Expr) -> CompiledExpr {
    let mut prog = Vec::new();
    emit(e, &mut prog);
    // stack depth bound: count pushes minus pops along the program
    let mut depth = 0usize;
    let mut max = 0usize;
    for i in &prog {
        match i {
            Instr::Num(_) | Instr::T | Instr::X1 | Instr::X2 => depth += 1,
            Instr::Add | Instr::Sub | Instr::Mul | Instr::Div | Instr::Pow => depth -= 1,
            _ => {}
        }
        max = max.max(depth);
    }
    CompiledExpr { prog, max_stack: max }
}

fn emit(e: &Expr, prog: &mut Vec<Instr>) {
    match e {
        Expr::Num(v) => prog.push(Instr::Num(*v)),
        Expr::Pi => prog.push(Instr::Num(std::f64::consts::PI)),
        Expr::Var(Var::T) => prog.push(Instr::T),
        Expr::Var(Var::X1) => prog.push(Instr::X1),
        Expr::Var(Var::X2) => prog.push(Instr::X2),
        Expr::Neg(a) => {
            emit(a, prog);
            prog.push(Instr::Neg);
        }
        Expr::Bin(BinOp::Pow, a, b) => {
            emit(a, prog);
            match **b {
                Expr::Num(v) if v.fract() == 0.0 && v.abs() <= i32::MAX as f64 => {
                    prog.push(Instr::PowI(v as i32));
                }
                _ => {
                    emit(b, prog);
                    prog.push(Instr::Pow);
                }
            }
        }
        Expr::Bin(op, a, b) => {
            emit(a, prog);
            emit(b, prog);
            prog.push(match op {
                BinOp::Add => Instr::Add,
                BinOp::Sub => Instr::Sub,
                BinOp::Mul => Instr::Mul,
                BinOp::Div => Instr::Div,
                BinOp::Pow => unreachable!(),
            });
        }
        Expr::Fun(f, a) => {
            emit(a, prog);
            prog.push(Instr::Fun(*f));
        }
    }
}

impl CompiledExpr {
    /// Evaluate with an explicit scratch stack (reused across calls).
    pub fn eval_with(&self, t: f64, x1: f64, x2: f64, stack: &mut Vec<f64>) -> Result<f64, EvalError> {
        stack.clear();
        stack.reserve(self.max_stack);
        for instr in &self.prog {
            match instr {
                Instr::Num(v) => stack.push(*v),
                Instr::T => stack.push(t),
                Instr::X1 => stack.push(x1),
                Instr::X2 => stack.push(x2),
                Instr::Neg => {
                    let a = stack.last_mut().unwrap();
                    *a = -*a;
                }
                Instr::Add => {
                    let b = stack.pop().unwrap();
                    *stack.last_mut().unwrap() += b;
                }
                Instr::Sub => {
                    let b = stack.pop().unwrap();
                    *stack.last_mut().unwrap() -= b;
                }
                Instr::Mul => {
                    let b = stack.pop().unwrap();
                    *stack.last_mut().unwrap() *= b;
                }
                Instr::Div => {
                    let b = stack.pop().unwrap();
                    if b == 0.0 {
                        return Err(EvalError::DivByZero);
                    }
                    *stack.last_mut().unwrap() /= b;
                }
                Instr::Pow => {
                    let b = stack.pop().unwrap();
                    let a = stack.last_mut().unwrap();
                    *a = pow_eval(*a, b);
                }
                Instr::PowI(n) => {
                    let a = stack.last_mut().unwrap();
                    *a = a.powi(*n);
                }
                Instr::Fun(f) => {
                    let a = stack.last_mut().unwrap();
                    *a = apply_fun(*f, *a)?;
                }
            }
        }
        let v = stack.pop().unwrap();
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite)
        }
    }

    pub fn eval(&self, t: f64, x: &[f64]) -> Result<f64, EvalError> {
        let mut stack = Vec::with_capacity(self.max_stack);
        self.eval_with(t, x[0], x.get(1).copied().unwrap_or(0.0), &mut stack)
    }
}
