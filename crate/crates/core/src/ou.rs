//! Exact reference solutions for one-dimensional operators of the form
//! `A(t)φ = q(t) φ'' + (a(t) x + f(t)) φ'` with time-periodic coefficients.
//!
//! With `U(r,s) = exp(∫_s^r a(u) du)`, the transition measure of the
//! propagator started at `x` is Gaussian with
//!
//! ```text
//! mean(t,s,x) = U(t,s) x + ∫_s^t f(r) U(r,s) dr
//! var(t,s)    = 2 ∫_s^t q(r) U(r,s)² dr
//! ```
//!
//! and when the period mean of `a` is negative there is a unique periodic
//! family of Gaussian measures whose phase-`s` member has
//! `mean = ∫_s^∞ f U(r,s) dr` and `var = 2 ∫_s^∞ q U(r,s)² dr`; the tails
//! sum to closed geometric form over periods.

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::quad::{gauss_hermite, gaussian_expectation, rk4_doubling};
use std::sync::OnceLock;

/// Coefficients of a time-dependent Ornstein–Uhlenbeck operator (d = 1).
#[derive(Debug, Clone)]
pub struct OuParams {
    pub a: Expr,
    pub f: Expr,
    pub q: Expr,
    pub period: f64,
}

const ODE_TOL: f64 = 1e-12;

fn gh_table() -> &'static (Vec<f64>, Vec<f64>) {
    static TABLE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    TABLE.get_or_init(|| gauss_hermite(96))
}

impl OuParams {
    pub fn new(a: Expr, f: Expr, q: Expr, period: f64) -> Result<Self> {
        if period <= 0.0 {
            return Err(Error::InvalidArgument("period must be positive".into()));
        }
        let p = OuParams { a, f, q, period };
        for k in 0..64 {
            let t = period * k as f64 / 64.0;
            let qv = p.q.eval(t, &[0.0]).map_err(|e| Error::eval_at(t, &[0.0], e))?;
            if qv <= 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "q(t) must be positive; q({t}) = {qv}"
                )));
            }
        }
        Ok(p)
    }

    /// Period mean of the linear drift rate `a`.
    pub fn mean_a(&self) -> Result<f64> {
        let a = &self.a;
        let rhs = move |r: f64, _y: &[f64; 1]| -> Result<[f64; 1]> {
            Ok([a.eval(r, &[0.0]).map_err(|e| Error::eval_at(r, &[0.0], e))?])
        };
        let y = rk4_doubling(&rhs, 0.0, self.period, [0.0], ODE_TOL, 64)?;
        Ok(y[0] / self.period)
    }

    /// Mean and variance of the transition measure started at `x` at time `s`
    /// and observed at time `t ≥ s`.
    pub fn exact_moments(&self, s: f64, t: f64, x: f64) -> Result<(f64, f64)> {
        if t < s {
            return Err(Error::InvalidArgument(format!(
                "requires s <= t, got s={s}, t={t}"
            )));
        }
        if t == s {
            return Ok((x, 0.0));
        }
        let (u, m, v) = self.integrate_interval(s, t)?;
        Ok((u * x + m, v))
    }

    /// `(U(t,s), ∫_s^t f U dr, 2 ∫_s^t q U² dr)` by RK4 with step doubling.
    fn integrate_interval(&self, s: f64, t: f64) -> Result<(f64, f64, f64)> {
        let (a, f, q) = (&self.a, &self.f, &self.q);
        let rhs = move |r: f64, y: &[f64; 3]| -> Result<[f64; 3]> {
            let map = |e: crate::error::EvalError| Error::eval_at(r, &[0.0], e);
            let av = a.eval(r, &[0.0]).map_err(map)?;
            let fv = f.eval(r, &[0.0]).map_err(map)?;
            let qv = q.eval(r, &[0.0]).map_err(map)?;
            let u = y[0].exp();
            Ok([av, fv * u, 2.0 * qv * u * u])
        };
        let n0 = (((t - s) * 256.0).ceil() as usize).clamp(32, 1 << 14);
        let y = rk4_doubling(&rhs, s, t, [0.0, 0.0, 0.0], ODE_TOL, n0)?;
        Ok((y[0].exp(), y[1], y[2]))
    }

    /// `G(t,s)φ(x)` through the Gaussian representation.
    pub fn expectation(
        &self,
        s: f64,
        t: f64,
        x: f64,
        phi: &dyn Fn(f64) -> Result<f64>,
    ) -> Result<f64> {
        let (mean, var) = self.exact_moments(s, t, x)?;
        let (nodes, weights) = gh_table();
        gaussian_expectation(phi, mean, var, nodes, weights)
    }

    /// Mean and variance of the phase-`s` member of the periodic family of
    /// measures. Requires the period mean of `a` to be negative.
    pub fn exact_measure(&self, s: f64) -> Result<(f64, f64)> {
        let abar = self.mean_a()?;
        if abar >= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "periodic measure requires negative period mean of a, got {abar}"
            )));
        }
        let (u_t, m_t, v_t) = self.integrate_interval(s, s + self.period)?;
        // Σ_k U_T^k m_T and Σ_k U_T^{2k} v_T collapse the infinite tail.
        let mean = m_t / (1.0 - u_t);
        let var = v_t / (1.0 - u_t * u_t);
        Ok((mean, var))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expr;

    fn benchmark_ou() -> OuParams {
        OuParams::new(
            parse_expr("-1").unwrap(),
            parse_expr("cos(2*pi*t)").unwrap(),
            parse_expr("1").unwrap(),
            1.0,
        )
        .unwrap()
    }

    fn autonomous_ou() -> OuParams {
        OuParams::new(
            parse_expr("-1").unwrap(),
            parse_expr("0").unwrap(),
            parse_expr("1").unwrap(),
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn autonomous_moments_closed_form() {
        let p = autonomous_ou();
        let (m, v) = p.exact_moments(0.0, 1.0, 1.0).unwrap();
        assert!((m - (-1.0f64).exp()).abs() < 1e-10, "mean {m}");
        assert!((v - (1.0 - (-2.0f64).exp())).abs() < 1e-10, "var {v}");
    }

    #[test]
    fn periodic_forcing_mean_from_zero() {
        // ∫_0^1 cos(2πr) e^{-r} dr = (1 - e^{-1})/(1 + 4π²)
        let p = benchmark_ou();
        let (m, v) = p.exact_moments(0.0, 1.0, 0.0).unwrap();
        let pi2 = 4.0 * std::f64::consts::PI * std::f64::consts::PI;
        let expect = (1.0 - (-1.0f64).exp()) / (1.0 + pi2);
        assert!((m - expect).abs() < 1e-10, "mean {m} vs {expect}");
        assert!((expect - 0.015616).abs() < 1e-5);
        assert!((v - (1.0 - (-2.0f64).exp())).abs() < 1e-10);
    }

    #[test]
    fn degenerate_interval() {
        let p = benchmark_ou();
        assert_eq!(p.exact_moments(0.5, 0.5, 2.25).unwrap(), (2.25, 0.0));
    }

    #[test]
    fn periodic_measure_closed_form() {
        let p = benchmark_ou();
        let (m, v) = p.exact_measure(0.0).unwrap();
        let pi2 = 4.0 * std::f64::consts::PI * std::f64::consts::PI;
        // Re e^{2πis}/(1-2πi) at s=0 is 1/(1+4π²)
        assert!((m - 1.0 / (1.0 + pi2)).abs() < 1e-9, "mean {m}");
        assert!((v - 1.0).abs() < 1e-9, "var {v}");
    }

    #[test]
    fn autonomous_measure_is_stationary_variance() {
        let p = autonomous_ou();
        let (m, v) = p.exact_measure(0.3).unwrap();
        assert!(m.abs() < 1e-10);
        assert!((v - 1.0).abs() < 1e-9);
    }

    #[test]
    fn measure_is_periodic_in_phase() {
        let p = benchmark_ou();
        let (m0, v0) = p.exact_measure(0.35).unwrap();
        let (m1, v1) = p.exact_measure(1.35).unwrap();
        assert!((m0 - m1).abs() < 1e-10);
        assert!((v0 - v1).abs() < 1e-10);
    }

    #[test]
    fn measure_consistency_identity() {
        // c_s = U(t,s) c_t + m(t,s) and σ²_s = U(t,s)² σ²_t + v(t,s)
        let p = benchmark_ou();
        let (s, t) = (0.125, 0.875);
        let (cs, vs) = p.exact_measure(s).unwrap();
        let (ct, vt) = p.exact_measure(t).unwrap();
        let (u, m, v) = p.integrate_interval(s, t).unwrap();
        assert!((cs - (u * ct + m)).abs() < 1e-8, "mean identity");
        assert!((vs - (u * u * vt + v)).abs() < 1e-8, "variance identity");
    }

    #[test]
    fn nonnegative_mean_drift_rejected() {
        let p = OuParams::new(
            parse_expr("sin(2*pi*t)").unwrap(),
            parse_expr("0").unwrap(),
            parse_expr("1").unwrap(),
            1.0,
        )
        .unwrap();
        assert!(p.exact_measure(0.0).is_err());
    }

    #[test]
    fn expectation_of_sin_matches_analytic() {
        let p = autonomous_ou();
        let got = p.expectation(0.0, 1.0, 1.0, &|y| Ok(y.sin())).unwrap();
        let (m, v) = p.exact_moments(0.0, 1.0, 1.0).unwrap();
        let expect = m.sin() * (-v / 2.0).exp();
        assert!((got - expect).abs() < 1e-10);
    }
}
