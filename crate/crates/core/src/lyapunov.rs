//! Lyapunov-type confinement diagnostics.
//!
//! All checkers here are falsifiers with margins, not proofs: they sample
//! `t` over one period and `x` over geometric radial ladders, report the
//! sampled supremum of the defining inequality together with its witness,
//! and accept or reject on that evidence.

use crate::error::{Error, Result};
use crate::evolution::FactorChain;
use crate::expr::Expr;
use crate::field::CoefficientField;
use crate::grid::Grid;
use crate::quad::rk4_doubling;
use serde::Serialize;
use std::sync::Arc;

/// The comparison nonlinearity `g(s) = c s^gamma`, optionally shifted.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GFunction {
    pub c: f64,
    pub gamma: f64,
}

impl GFunction {
    pub fn eval(&self, s: f64) -> f64 {
        self.c * s.powf(self.gamma)
    }

    /// `1/g` integrable at infinity iff gamma > 1 for the power family.
    pub fn tail_integrable(&self) -> bool {
        self.gamma > 1.0
    }
}

/// Auxiliary function W: closed form, or `log|x|` outside a radius with a
/// C² polynomial blend to a constant inside (the tail form used with the
/// logarithmic drift condition).
#[derive(Debug, Clone)]
pub enum WFunction {
    Closed(Expr),
    TailLog { r0: f64 },
}

impl WFunction {
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        match self {
            WFunction::Closed(e) => e.eval(0.0, x).map_err(|err| Error::eval_at(0.0, x, err)),
            WFunction::TailLog { r0 } => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                let r = r2.sqrt();
                if r >= *r0 {
                    Ok(r.ln())
                } else {
                    // q(v) = log r0 - 5/12 + 0.75 v² - v³/3, v = (r/r0)²
                    let v = r2 / (r0 * r0);
                    Ok(r0.ln() - 5.0 / 12.0 + 0.75 * v * v - v * v * v / 3.0)
                }
            }
        }
    }

    pub fn values_on(&self, grid: &Grid, dim: usize) -> Result<Vec<f64>> {
        (0..grid.n_nodes())
            .map(|i| {
                let p = grid.point(i);
                self.eval(&p[..dim])
            })
            .collect()
    }

    /// `A(t)W(x)` with exact derivatives of W.
    pub fn apply_operator(&self, field: &CoefficientField, t: f64, x: &[f64]) -> Result<f64> {
        match self {
            WFunction::Closed(e) => field.apply_operator(e, t, x),
            WFunction::TailLog { r0 } => {
                let q = field.q_diag(t, x)?;
                let b = field.b_vec(t, x)?;
                let r2: f64 = x.iter().map(|v| v * v).sum();
                if r2.sqrt() >= *r0 {
                    // W = log r: ∇W = x/r², D²W = (I r² - 2xx^T)/r⁴
                    let mut acc = 0.0;
                    for k in 0..field.dim {
                        acc += q[k] * (1.0 / r2 - 2.0 * x[k] * x[k] / (r2 * r2));
                        acc += b[k] * x[k] / r2;
                    }
                    Ok(acc)
                } else {
                    let r02 = r0 * r0;
                    let v = r2 / r02;
                    let qp = 1.5 * v - v * v;
                    let qpp = 1.5 - 2.0 * v;
                    let mut acc = 0.0;
                    for k in 0..field.dim {
                        let dk = 2.0 * x[k] / r02;
                        acc += q[k] * (qpp * dk * dk + qp * 2.0 / r02);
                        acc += b[k] * qp * dk;
                    }
                    Ok(acc)
                }
            }
        }
    }
}

/// The Lyapunov data bundle for the checkers.
#[derive(Debug, Clone)]
pub struct LyapunovData {
    pub w: WFunction,
    pub g: GFunction,
    /// radius beyond which tail conditions are asserted
    pub r0: f64,
    /// drift bound for the basic confinement hypothesis
    pub lambda: f64,
    /// dissipativity constants: A(s)W <= a - cc W
    pub a: f64,
    pub cc: f64,
}

/// Sampling geometry: one period of `t`, geometric radial ladders in `x`.
#[derive(Debug, Clone, Serialize)]
pub struct SampleSpec {
    pub t_points: usize,
    pub r_min: f64,
    pub r_max: f64,
    pub r_points: usize,
    /// directions per ladder radius in two dimensions
    pub angles: usize,
    pub include_origin: bool,
}

impl SampleSpec {
    pub fn new(r_min: f64, r_max: f64) -> SampleSpec {
        SampleSpec {
            t_points: 64,
            r_min,
            r_max,
            r_points: 96,
            angles: 16,
            include_origin: true,
        }
    }

    /// Tail sampling for conditions asserted on `|x| >= r0` only.
    pub fn tail(r0: f64, r_max: f64) -> SampleSpec {
        SampleSpec {
            include_origin: false,
            ..SampleSpec::new(r0, r_max)
        }
    }

    fn radii(&self) -> Vec<f64> {
        let lo = self.r_min.max(1e-8);
        let ratio = (self.r_max / lo).powf(1.0 / (self.r_points.max(2) - 1) as f64);
        (0..self.r_points).map(|k| lo * ratio.powi(k as i32)).collect()
    }

    pub fn points(&self, dim: usize) -> Vec<Vec<f64>> {
        let mut out = Vec::new();
        if self.include_origin {
            out.push(vec![0.0; dim]);
        }
        for r in self.radii() {
            match dim {
                1 => {
                    out.push(vec![r]);
                    out.push(vec![-r]);
                }
                _ => {
                    for k in 0..self.angles {
                        let th = 2.0 * std::f64::consts::PI * k as f64 / self.angles as f64;
                        out.push(vec![r * th.cos(), r * th.sin()]);
                    }
                }
            }
        }
        out
    }

    pub fn times(&self, period: f64) -> Vec<f64> {
        (0..self.t_points)
            .map(|k| period * k as f64 / self.t_points as f64)
            .collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Witness {
    pub t: f64,
    pub x: Vec<f64>,
}

/// Margin report of a sampled inequality `margin(t,x) <= 0`.
#[derive(Debug, Clone, Serialize)]
pub struct MarginReport {
    pub condition: String,
    pub accepted: bool,
    /// sampled sup of the margin
    pub sup_margin: f64,
    pub witness: Witness,
    pub samples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_star: Option<f64>,
    /// implied bound `min W + a/c` where applicable
    #[serde(skip_serializing_if = "Option::is_none")]
    pub implied_measure_bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub implied_gw_slack: Option<f64>,
}

/// Deterministic max-with-witness sweep; ties broken by lexicographic (t,x).
fn sweep_sup(
    field: &CoefficientField,
    spec: &SampleSpec,
    mut f: impl FnMut(f64, &[f64]) -> Result<f64>,
) -> Result<(f64, Witness, usize)> {
    let mut sup = f64::NEG_INFINITY;
    let mut witness = Witness { t: 0.0, x: vec![0.0; field.dim] };
    let mut count = 0usize;
    for t in spec.times(field.period) {
        for x in spec.points(field.dim) {
            let v = f(t, &x)?;
            count += 1;
            if v > sup {
                sup = v;
                witness = Witness { t, x: x.clone() };
            }
        }
    }
    Ok((sup, witness, count))
}

/// Hypothesis-style drift bound: `sup (A(s)W - λW) < 0`, strict to the
/// documented margin. Also scans for the smallest integer λ that would be
/// accepted on the same samples.
pub fn check_drift_bound(
    field: &CoefficientField,
    l: &LyapunovData,
    spec: &SampleSpec,
) -> Result<MarginReport> {
    let mut vals: Vec<(f64, Vec<f64>, f64, f64)> = Vec::new(); // (t, x, AW, W)
    for t in spec.times(field.period) {
        for x in spec.points(field.dim) {
            let aw = l.w.apply_operator(field, t, &x)?;
            let w = l.w.eval(&x)?;
            vals.push((t, x, aw, w));
        }
    }
    let w_scale = vals.iter().map(|v| v.3.abs()).fold(0.0f64, f64::max);
    let strict = -1e-9 * (1.0 + w_scale);
    let sup_for = |lam: f64| -> (f64, usize) {
        let mut sup = f64::NEG_INFINITY;
        let mut arg = 0usize;
        for (i, (_, _, aw, w)) in vals.iter().enumerate() {
            let m = aw - lam * w;
            if m > sup {
                sup = m;
                arg = i;
            }
        }
        (sup, arg)
    };
    let (sup, arg) = sup_for(l.lambda);
    let lambda_star = (0..=64)
        .map(|k| k as f64)
        .find(|&lam| sup_for(lam).0 < strict);
    Ok(MarginReport {
        condition: format!("sup(A(s)W - {} W) < 0", l.lambda),
        accepted: sup < strict,
        sup_margin: sup,
        witness: Witness {
            t: vals[arg].0,
            x: vals[arg].1.clone(),
        },
        samples: vals.len(),
        lambda_star,
        implied_measure_bound: None,
        implied_gw_slack: None,
    })
}

/// Dissipativity: `sup (A(s)W - a + c W) <= 0`; emits the implied bounds
/// `W + a/c` and `min W + a/c` used by the measure checks.
pub fn check_dissipativity(
    field: &CoefficientField,
    l: &LyapunovData,
    spec: &SampleSpec,
) -> Result<MarginReport> {
    let mut min_w = f64::INFINITY;
    let (sup, witness, samples) = sweep_sup(field, spec, |t, x| {
        let aw = l.w.apply_operator(field, t, x)?;
        let w = l.w.eval(x)?;
        min_w = min_w.min(w);
        Ok(aw - l.a + l.cc * w)
    })?;
    Ok(MarginReport {
        condition: format!("sup(A(s)W - {} + {} W) <= 0", l.a, l.cc),
        accepted: sup <= 1e-12 * (1.0 + sup.abs()),
        sup_margin: sup,
        witness,
        samples,
        lambda_star: None,
        implied_measure_bound: Some(min_w + l.a / l.cc),
        implied_gw_slack: Some(l.a / l.cc),
    })
}

/// Superlinear tail condition: `A(s)W + g(W) <= 0` for `|x| in [r0, r_max]`.
/// Rejected before sampling when `1/g` is not integrable (gamma <= 1).
pub fn check_superlinear(
    field: &CoefficientField,
    l: &LyapunovData,
    spec: &SampleSpec,
) -> Result<MarginReport> {
    if !l.g.tail_integrable() {
        return Ok(MarginReport {
            condition: format!(
                "A(s)W + {}*W^{} <= 0 on |x| >= {} (rejected: 1/g not integrable)",
                l.g.c, l.g.gamma, l.r0
            ),
            accepted: false,
            sup_margin: f64::INFINITY,
            witness: Witness { t: 0.0, x: vec![0.0; field.dim] },
            samples: 0,
            lambda_star: None,
            implied_measure_bound: None,
            implied_gw_slack: None,
        });
    }
    let tail = SampleSpec::tail(l.r0, spec.r_max);
    let (sup, witness, samples) = sweep_sup(field, &tail, |t, x| {
        let aw = l.w.apply_operator(field, t, x)?;
        let w = l.w.eval(x)?;
        Ok(aw + l.g.eval(w))
    })?;
    Ok(MarginReport {
        condition: format!(
            "A(s)W + {}*W^{} <= 0 on |x| >= {}",
            l.g.c, l.g.gamma, l.r0
        ),
        accepted: sup <= 1e-12 * (1.0 + sup.abs()),
        sup_margin: sup,
        witness,
        samples,
        lambda_star: None,
        implied_measure_bound: None,
        implied_gw_slack: None,
    })
}

/// Logarithmic drift condition:
/// `Tr Q + <b,x> - (2/|x|²)<Qx,x> <= -c |x|² (log|x|)^gamma` for `|x| >= r0`.
pub fn check_log_drift(
    field: &CoefficientField,
    c: f64,
    gamma: f64,
    r0: f64,
    spec: &SampleSpec,
) -> Result<MarginReport> {
    if gamma <= 1.0 {
        return Err(Error::InvalidArgument("log-drift condition needs gamma > 1".into()));
    }
    if r0 <= 1.0 {
        return Err(Error::InvalidArgument("log-drift condition needs r0 > 1".into()));
    }
    let tail = SampleSpec::tail(r0, spec.r_max);
    let (sup, witness, samples) = sweep_sup(field, &tail, |t, x| {
        let q = field.q_matrix(t, x)?;
        let b = field.b_vec(t, x)?;
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let mut tr = 0.0;
        let mut qxx = 0.0;
        let mut bx = 0.0;
        for k in 0..field.dim {
            tr += q[k][k];
            bx += b[k] * x[k];
            for j in 0..field.dim {
                qxx += q[k][j] * x[k] * x[j];
            }
        }
        let lhs = tr + bx - 2.0 * qxx / r2;
        let rhs = -c * r2 * r2.sqrt().ln().powf(gamma);
        Ok(lhs - rhs)
    })?;
    Ok(MarginReport {
        condition: format!("Tr Q + <b,x> - 2<Qx,x>/|x|^2 <= -{c} |x|^2 (log|x|)^{gamma} on |x| >= {r0}"),
        accepted: sup <= 1e-12 * (1.0 + sup.abs()),
        sup_margin: sup,
        witness,
        samples,
        lambda_star: None,
        implied_measure_bound: None,
        implied_gw_slack: None,
    })
}

/// Solution record for the comparison problem `ζ' = -c ζ^gamma, ζ(0) = ζ0`.
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonSolution {
    pub c: f64,
    pub gamma: f64,
    pub zeta0: f64,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl ComparisonSolution {
    /// Closed form `[ζ0^{1-γ} + c(γ-1)s]^{-1/(γ-1)}`.
    pub fn closed_form(&self, s: f64) -> f64 {
        closed_form_zeta(self.zeta0, self.c, self.gamma, s)
    }

    /// Initial-condition-independent bound `C(δ) = [c(γ-1)δ]^{-1/(γ-1)}`.
    pub fn c_delta(&self, delta: f64) -> f64 {
        c_delta(self.c, self.gamma, delta)
    }
}

pub fn closed_form_zeta(zeta0: f64, c: f64, gamma: f64, s: f64) -> f64 {
    (zeta0.powf(1.0 - gamma) + c * (gamma - 1.0) * s).powf(-1.0 / (gamma - 1.0))
}

pub fn c_delta(c: f64, gamma: f64, delta: f64) -> f64 {
    (c * (gamma - 1.0) * delta).powf(-1.0 / (gamma - 1.0))
}

/// Fourth-order integration of the comparison problem with dense output at
/// `dt`-spaced sample times.
pub fn solve_comparison(
    zeta0: f64,
    c: f64,
    gamma: f64,
    horizon: f64,
    dt: f64,
) -> Result<ComparisonSolution> {
    if zeta0 <= 0.0 {
        return Err(Error::InvalidArgument("zeta0 must be positive".into()));
    }
    if gamma <= 1.0 {
        return Err(Error::InvalidArgument(
            "comparison bound needs gamma > 1 (1/g integrable at infinity)".into(),
        ));
    }
    if dt <= 0.0 || horizon < 0.0 {
        return Err(Error::InvalidArgument("need dt > 0 and horizon >= 0".into()));
    }
    let rhs = move |_s: f64, y: &[f64; 1]| -> Result<[f64; 1]> {
        Ok([-c * y[0].max(0.0).powf(gamma)])
    };
    let n = (horizon / dt).round().max(0.0) as usize;
    let mut times = Vec::with_capacity(n + 1);
    let mut values = Vec::with_capacity(n + 1);
    times.push(0.0);
    values.push(zeta0);
    let mut y = [zeta0];
    for k in 0..n {
        let (a, b) = (k as f64 * dt, (k + 1) as f64 * dt);
        y = rk4_doubling(&rhs, a, b, y, 1e-10, 8)?;
        times.push(b);
        values.push(y[0]);
    }
    Ok(ComparisonSolution {
        c,
        gamma,
        zeta0,
        times,
        values,
    })
}

/// Report of the two integral inequalities behind the comparison argument.
#[derive(Debug, Clone, Serialize)]
pub struct SupersolutionReport {
    /// min over nodes of LHS - RHS for the propagated-difference inequality
    pub maggv_margin: f64,
    pub maggv_holds: bool,
    /// min over nodes of RHS - LHS for the beta inequality (shifted g)
    pub beta_margin: f64,
    pub beta_holds: bool,
    /// constant subtracted from g so the tail condition holds on the whole
    /// sampled box, as the comparison argument requires
    pub g_shift: f64,
    pub tol: f64,
    pub nodes_checked: usize,
    pub quad_points: usize,
}

/// Check, on core nodes with trapezoidal quadrature in σ:
///
/// ```text
/// G(t,s)W - G(t,r)W >= -∫_r^s G(t,σ)(A(σ)W) dσ - tol
/// β(b) - β(a)      <= -∫_a^b g~(β(σ)) dσ + tol,   β(σ) = G(t,t-σ)W
/// ```
///
/// with `a = t-s`, `b = t-r` and `g~ = g - C` where `C` is the sampled sup
/// of `A(σ)W + g(W)` over the box (zero when the tail condition already
/// holds everywhere).
pub fn supersolution_check(
    chain: &Arc<FactorChain>,
    r: f64,
    s: f64,
    t: f64,
    l: &LyapunovData,
    n_quad: usize,
) -> Result<SupersolutionReport> {
    if !(r <= s && s <= t) {
        return Err(Error::TimeGrid(format!("need r <= s <= t, got {r}, {s}, {t}")));
    }
    let grid = &chain.grid;
    let field = &chain.field;
    let w_nodes = l.w.values_on(grid, field.dim)?;
    let w_scale = w_nodes.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    let tol = 1e-3 * (1.0 + w_scale);
    let core = grid.core_indices(0.5);

    let k_r = chain.step_index(r);
    let k_s = chain.step_index(s);
    let k_t = chain.step_index(t);
    let steps_rs = k_s - k_r;
    if steps_rs == 0 {
        // degenerate window: both inequalities hold with equality
        return Ok(SupersolutionReport {
            maggv_margin: 0.0,
            maggv_holds: true,
            beta_margin: 0.0,
            beta_holds: true,
            g_shift: 0.0,
            tol,
            nodes_checked: core.len(),
            quad_points: 0,
        });
    }
    let n_quad = n_quad.clamp(2, steps_rs).min(256);
    // quadrature steps snapped to the time grid
    let quad_ks: Vec<usize> = (0..=n_quad)
        .map(|j| k_r + (j * steps_rs + n_quad / 2) / n_quad)
        .map(|k| k.min(k_s))
        .collect();

    let aw_at = |k: usize| -> Result<Vec<f64>> {
        let sigma = chain.time_of(k);
        (0..grid.n_nodes())
            .map(|i| {
                if grid.is_boundary(i) {
                    Ok(0.0)
                } else {
                    let p = grid.point(i);
                    l.w.apply_operator(field, sigma, &p[..field.dim])
                }
            })
            .collect()
    };

    // G(t,σ)(A(σ)W) and β(σ) = G(t,t-σ)W at the quadrature times
    let mut g_aw: Vec<Vec<f64>> = Vec::with_capacity(quad_ks.len());
    let mut g_shift = 0.0f64;
    for &k in &quad_ks {
        let aw = aw_at(k)?;
        for i in grid.interior_indices() {
            g_shift = g_shift.max(aw[i] + l.g.eval(w_nodes[i]));
        }
        g_aw.push(chain.run(k, k_t, &aw)?);
    }
    let beta: Vec<Vec<f64>> = quad_ks
        .iter()
        .map(|&k| chain.run(k, k_t, &w_nodes))
        .collect::<Result<_>>()?;

    let gw_s = chain.run(k_s, k_t, &w_nodes)?; // G(t,s)W = β(t-s)
    let gw_r = chain.run(k_r, k_t, &w_nodes)?; // G(t,r)W = β(t-r)

    let mut maggv_margin = f64::INFINITY;
    let mut beta_margin = f64::INFINITY;
    let h_sigma: Vec<f64> = quad_ks.iter().map(|&k| chain.time_of(k)).collect();
    for &i in &core {
        let lhs = gw_s[i] - gw_r[i];
        let integrand: Vec<f64> = g_aw.iter().map(|v| v[i]).collect();
        let rhs = -irregular_trapezoid(&h_sigma, &integrand);
        maggv_margin = maggv_margin.min(lhs - rhs);

        // β runs against reversed sigma: σ' = t - σ
        let beta_vals: Vec<f64> = beta.iter().map(|v| v[i]).collect();
        let g_beta: Vec<f64> = beta_vals.iter().map(|&bv| l.g.eval(bv.max(0.0)) - g_shift).collect();
        // ∫_a^b g~(β(σ'))dσ' = ∫ over σ in [r,s] of g~(G(t,σ)W) dσ
        let integral = irregular_trapezoid(&h_sigma, &g_beta);
        let lhs_beta = gw_r[i] - gw_s[i]; // β(b) - β(a)
        beta_margin = beta_margin.min(-integral - lhs_beta);
    }
    Ok(SupersolutionReport {
        maggv_margin,
        maggv_holds: maggv_margin >= -tol,
        beta_margin,
        beta_holds: beta_margin >= -tol,
        g_shift,
        tol,
        nodes_checked: core.len(),
        quad_points: quad_ks.len(),
    })
}

fn irregular_trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    let mut acc = 0.0;
    for k in 1..xs.len() {
        acc += 0.5 * (ys[k] + ys[k - 1]) * (xs[k] - xs[k - 1]);
    }
    acc
}

/// Uniform-bound check: `sup over core of G(t, t-δ)W <= C(δ) (1 + slack)`.
#[derive(Debug, Clone, Serialize)]
pub struct UniformBoundReport {
    pub delta: f64,
    pub c_delta: f64,
    pub sup_gw: f64,
    pub holds: bool,
}

pub fn uniform_bound_check(
    chain: &Arc<FactorChain>,
    l: &LyapunovData,
    delta: f64,
    slack: f64,
) -> Result<UniformBoundReport> {
    let grid = &chain.grid;
    let w_nodes = l.w.values_on(grid, chain.field.dim)?;
    // land the window on [t-δ, t] with t a whole period
    let t = chain.field.period * (delta / chain.field.period).ceil().max(1.0);
    let gw = chain.propagator(t - delta, t)?.apply(&w_nodes)?;
    let sup = grid
        .core_indices(0.5)
        .iter()
        .map(|&i| gw[i])
        .fold(f64::NEG_INFINITY, f64::max);
    let cd = c_delta(l.g.c, l.g.gamma, delta);
    Ok(UniformBoundReport {
        delta,
        c_delta: cd,
        sup_gw: sup,
        holds: sup <= cd * (1.0 + slack),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expr;

    fn ou_field() -> CoefficientField {
        CoefficientField::from_strings(1, 1.0, &[vec!["1".into()]], &["-x1+cos(2*pi*t)".into()])
            .unwrap()
    }

    fn cubic_field() -> CoefficientField {
        CoefficientField::from_strings(
            1,
            1.0,
            &[vec!["1".into()]],
            &["-x1^3*(1+0.5*sin(2*pi*t))".into()],
        )
        .unwrap()
    }

    fn lyap(w: WFunction, lambda: f64, a: f64, cc: f64) -> LyapunovData {
        LyapunovData {
            w,
            g: GFunction { c: 1.0, gamma: 2.0 },
            r0: 2.0,
            lambda,
            a,
            cc,
        }
    }

    #[test]
    fn drift_bound_rejects_w_vanishing_at_origin() {
        // W = x²: AW - λW = 2 at x = 0 for every λ, so no λ can be accepted.
        // For λ = 0 the sampled sup of 2 + 2x cos(2πt) - 2x² sits near
        // x = 1/2, t = 0 with value 2.5.
        let f = ou_field();
        let l = lyap(WFunction::Closed(parse_expr("x1^2").unwrap()), 0.0, 0.0, 1.0);
        let spec = SampleSpec::new(0.05, 20.0);
        let rep = check_drift_bound(&f, &l, &spec).unwrap();
        assert!(!rep.accepted);
        assert!(rep.sup_margin >= 2.0 && rep.sup_margin <= 2.5 + 1e-9, "sup {}", rep.sup_margin);
        assert!(
            (rep.witness.x[0] - 0.5).abs() < 0.2,
            "witness {:?}",
            rep.witness
        );
        assert_eq!(rep.lambda_star, None);
    }

    #[test]
    fn drift_bound_accepts_shifted_quadratic() {
        let f = ou_field();
        let l = lyap(WFunction::Closed(parse_expr("1+x1^2").unwrap()), 3.0, 0.0, 1.0);
        let spec = SampleSpec::new(0.05, 20.0);
        let rep = check_drift_bound(&f, &l, &spec).unwrap();
        assert!(rep.accepted, "sup {}", rep.sup_margin);
        // smallest integer λ with a strictly negative sup on these samples
        assert_eq!(rep.lambda_star, Some(3.0));
    }

    #[test]
    fn dissipativity_on_ou_benchmark() {
        // AW = 2 + 2x(-x + cos 2πt) <= 3 - x² = a - c W
        let f = ou_field();
        let l = lyap(WFunction::Closed(parse_expr("x1^2").unwrap()), 0.0, 3.0, 1.0);
        let spec = SampleSpec::new(0.05, 20.0);
        let rep = check_dissipativity(&f, &l, &spec).unwrap();
        assert!(rep.accepted, "sup {}", rep.sup_margin);
        assert!((rep.implied_gw_slack.unwrap() - 3.0).abs() < 1e-12);

        // a = 2, c = 1 emits the bound min W + a/c = 2
        let l2 = lyap(WFunction::Closed(parse_expr("x1^2").unwrap()), 0.0, 2.0, 1.0);
        let rep2 = check_dissipativity(&f, &l2, &spec).unwrap();
        assert!((rep2.implied_measure_bound.unwrap() - 2.0).abs() < 1e-9);

        // a = 0 fails: the margin 2 + 2x cos(2πt) - x² peaks at x = cos(2πt)
        let l3 = lyap(WFunction::Closed(parse_expr("x1^2").unwrap()), 0.0, 0.0, 1.0);
        let rep3 = check_dissipativity(&f, &l3, &spec).unwrap();
        assert!(!rep3.accepted);
        assert!((rep3.sup_margin - 3.0).abs() < 0.01, "sup {}", rep3.sup_margin);
        assert!((rep3.witness.x[0].abs() - 1.0).abs() < 0.2, "witness {:?}", rep3.witness);
    }

    #[test]
    fn superlinear_accepts_cubic_rejects_ou() {
        let spec = SampleSpec::new(0.05, 16.0);
        let l = lyap(WFunction::TailLog { r0: 2.0 }, 0.0, 0.0, 1.0);
        let rep = check_superlinear(&cubic_field(), &l, &spec).unwrap();
        assert!(rep.accepted, "cubic sup {}", rep.sup_margin);

        let rep_ou = check_superlinear(&ou_field(), &l, &spec).unwrap();
        assert!(!rep_ou.accepted);
        // witness sits at the far end of the ladder
        assert!(rep_ou.witness.x[0].abs() > 8.0, "witness {:?}", rep_ou.witness);
    }

    #[test]
    fn superlinear_margin_hand_value_at_x2() {
        // cubic benchmark, W = log|x| tail: AW = -1/x² - x²(1+0.5 sin 2πt);
        // at (t=0, x=2): -1/4 - 4 = -4.25, g(W) = (log 2)², margin -3.7695...
        let f = cubic_field();
        let l = lyap(WFunction::TailLog { r0: 2.0 }, 0.0, 0.0, 1.0);
        let aw = l.w.apply_operator(&f, 0.0, &[2.0]).unwrap();
        assert!((aw - (-4.25)).abs() < 1e-12, "AW {aw}");
        let margin = aw + l.g.eval(l.w.eval(&[2.0]).unwrap());
        let expect = -4.25 + 2.0f64.ln().powi(2);
        assert!((margin - expect).abs() < 1e-12);
        assert!((expect + 3.769547).abs() < 1e-6);
    }

    #[test]
    fn superlinear_rejects_nonintegrable_gamma_without_sampling() {
        let mut l = lyap(WFunction::TailLog { r0: 2.0 }, 0.0, 0.0, 1.0);
        l.g = GFunction { c: 1.0, gamma: 1.0 };
        let rep = check_superlinear(&cubic_field(), &l, &SampleSpec::new(0.05, 16.0)).unwrap();
        assert!(!rep.accepted);
        assert_eq!(rep.samples, 0);
    }

    #[test]
    fn log_drift_hand_value_and_dichotomy() {
        let spec = SampleSpec::new(0.05, 16.0);
        let rep = check_log_drift(&cubic_field(), 1.0, 2.0, 2.0, &spec).unwrap();
        assert!(rep.accepted, "sup {}", rep.sup_margin);
        // hand value at (t=0, x=2): LHS = 1 - 16 - 2 = -17, RHS = -4 (ln 2)²
        let f = cubic_field();
        let q = f.q_matrix(0.0, &[2.0]).unwrap();
        let b = f.b_vec(0.0, &[2.0]).unwrap();
        let lhs = q[0][0] + b[0] * 2.0 - 2.0 * q[0][0] * 4.0 / 4.0;
        assert!((lhs - (-17.0)).abs() < 1e-12);
        let margin = lhs + 4.0 * 2.0f64.ln().powi(2);
        assert!((margin + 15.0781879).abs() < 1e-6, "margin {margin}");

        let rep_ou = check_log_drift(&ou_field(), 1.0, 2.0, 2.0, &spec).unwrap();
        assert!(!rep_ou.accepted);
    }

    #[test]
    fn log_drift_overflow_is_an_error_not_a_verdict() {
        let f = CoefficientField::from_strings(
            1,
            1.0,
            &[vec!["1".into()]],
            &["-x1*exp(x1^2)".into()],
        )
        .unwrap();
        let spec = SampleSpec::new(0.05, 64.0);
        assert!(check_log_drift(&f, 1.0, 2.0, 2.0, &spec).is_err());
    }

    #[test]
    fn comparison_solution_closed_form() {
        let sol = solve_comparison(100.0, 1.0, 2.0, 1.0, 0.01).unwrap();
        let at_half = sol.values[50];
        assert!((at_half - 100.0 / 51.0).abs() < 1e-6 * (100.0 / 51.0), "{at_half}");
        assert!((sol.c_delta(0.5) - 2.0).abs() < 1e-12);
        assert_eq!(sol.values[0], 100.0);
        // strictly decreasing positive values
        for w in sol.values.windows(2) {
            assert!(w[1] > 0.0 && w[1] < w[0]);
        }
        // relative agreement with the closed form at all sample times
        for (t, v) in sol.times.iter().zip(&sol.values) {
            let cf = sol.closed_form(*t);
            assert!((v - cf).abs() <= 1e-6 * cf.abs(), "t={t}: {v} vs {cf}");
        }
    }

    #[test]
    fn c_delta_dominates_all_initial_conditions() {
        for zeta0 in [10.0, 100.0, 1e6] {
            let sol = solve_comparison(zeta0, 1.0, 2.0, 0.5, 0.005).unwrap();
            let end = *sol.values.last().unwrap();
            assert!(end <= 2.0 + 1e-9, "zeta0={zeta0}: {end}");
        }
        let sol = solve_comparison(2.0, 1.0, 2.0, 0.0, 0.01).unwrap();
        assert_eq!(*sol.values.last().unwrap(), 2.0);
    }

    #[test]
    fn nonpositive_initial_value_rejected() {
        assert!(solve_comparison(0.0, 1.0, 2.0, 1.0, 0.01).is_err());
        assert!(solve_comparison(-3.0, 1.0, 2.0, 1.0, 0.01).is_err());
    }

    #[test]
    fn supersolution_on_an_empty_window_holds_with_equality() {
        use crate::evolution::FactorChain;
        use std::sync::Arc;
        let f = Arc::new(cubic_field());
        let g = Arc::new(crate::grid::Grid::new(1, 3.0, 0.1).unwrap());
        let chain = FactorChain::new(f, g, 0.01, 1.0).unwrap();
        let l = lyap(WFunction::TailLog { r0: 2.0 }, 0.0, 0.0, 1.0);
        let rep = supersolution_check(&chain, 0.5, 0.5, 1.0, &l, 32).unwrap();
        assert_eq!(rep.maggv_margin, 0.0);
        assert_eq!(rep.beta_margin, 0.0);
        assert!(rep.maggv_holds && rep.beta_holds);
        assert_eq!(rep.quad_points, 0);
    }
}
