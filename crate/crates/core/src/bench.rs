//! Built-in benchmark problems and test-function batteries.
//!
//! Two one-dimensional benchmarks drive most diagnostics:
//! - `ou`: unit diffusion with drift `-x + cos(2πt)` — Gaussian kernels,
//!   explicit moments, not tight over the whole space;
//! - `cubic`: unit diffusion with drift `-x³(1 + 0.5 sin(2πt))` — strongly
//!   confining, the compact-regime fixture.

use crate::error::Result;
use crate::expr::parse_expr;
use crate::field::{CoefficientField, TestFunction};
use crate::grid::Grid;
use crate::ou::OuParams;

pub fn ou_field() -> CoefficientField {
    CoefficientField::from_strings(1, 1.0, &[vec!["1".into()]], &["-x1+cos(2*pi*t)".into()])
        .expect("builtin benchmark")
}

pub fn cubic_field() -> CoefficientField {
    CoefficientField::from_strings(
        1,
        1.0,
        &[vec!["1".into()]],
        &["-x1^3*(1+0.5*sin(2*pi*t))".into()],
    )
    .expect("builtin benchmark")
}

pub fn ou_params() -> OuParams {
    OuParams::new(
        parse_expr("-1").unwrap(),
        parse_expr("cos(2*pi*t)").unwrap(),
        parse_expr("1").unwrap(),
        1.0,
    )
    .expect("builtin benchmark")
}

pub fn autonomous_ou_params() -> OuParams {
    OuParams::new(
        parse_expr("-1").unwrap(),
        parse_expr("0").unwrap(),
        parse_expr("1").unwrap(),
        1.0,
    )
    .expect("builtin benchmark")
}

/// Polynomial smoothstep: 0 below 0, 1 above 1, C¹ in between.
pub fn smoothstep(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        u * u * (3.0 - 2.0 * u)
    }
}

/// Smoothed indicator of the centered ball of radius `rho`: equals 1 on the
/// ball, falls to 0 by `rho + 1`.
pub fn smoothed_indicator(grid: &Grid, rho: f64) -> TestFunction {
    let values: Vec<f64> = (0..grid.n_nodes())
        .map(|i| smoothstep(rho + 1.0 - grid.norm(i)))
        .collect();
    let mut tf = TestFunction::nodes(&format!("ind{rho}"), grid, values);
    tf.compact_support = true;
    tf
}

/// The standard diagnostic battery `{1, x, x², sin x, smoothed indicator}`.
pub fn standard_battery(grid: &Grid) -> Vec<TestFunction> {
    vec![
        TestFunction::closed("one", parse_expr("1").unwrap()),
        TestFunction::closed("x", parse_expr("x1").unwrap()),
        TestFunction::closed("x^2", parse_expr("x1^2").unwrap()),
        TestFunction::closed("sin", parse_expr("sin(x1)").unwrap()),
        smoothed_indicator(grid, 1.0),
    ]
}

/// Smooth battery with numerical support inside `|x| <= R/2`; `alpha`
/// controls the Gaussian envelope `exp(-alpha x²)`.
pub fn compact_battery(alpha: f64) -> Result<Vec<TestFunction>> {
    let mk = |name: &str, src: String| -> Result<TestFunction> {
        let mut tf = TestFunction::closed(name, parse_expr(&src)?);
        tf.compact_support = true;
        Ok(tf)
    };
    Ok(vec![
        mk("gauss", format!("exp(-{alpha}*x1^2)"))?,
        mk("xgauss", format!("x1*exp(-{alpha}*x1^2)"))?,
        mk("singauss", format!("sin(3*x1)*exp(-{alpha}*x1^2)"))?,
    ])
}
