//! Transition rows, tightness diagnostics, periodic families of measures,
//! and weighted p-norms.
//!
//! The invariance convention pairs the later measure with the propagated
//! function: `<w_t, G(t,s)φ> = <w_s, φ>`. Discretely the family therefore
//! propagates by transposed factors from later to earlier phase, and the
//! one-period fixed point is the left Perron vector of the period map.

use crate::error::{Error, Result};
use crate::evolution::{FactorChain, Propagator};
use crate::field::TestFunction;
use crate::grid::Grid;
use serde::Serialize;
use std::sync::Arc;

/// One discrete transition measure: nonnegative node weights plus the mass
/// absorbed at the truncated boundary.
#[derive(Debug, Clone)]
pub struct TransitionRow {
    pub grid_id: u64,
    pub base_index: usize,
    pub weights: Vec<f64>,
    /// escaped mass, in [0, 1]; weights + defect sum to one
    pub defect: f64,
}

impl TransitionRow {
    pub fn new(grid: &Grid, base_index: usize, raw: Vec<f64>) -> TransitionRow {
        let mut weights = raw;
        for w in &mut weights {
            debug_assert!(*w >= -1e-12, "kernel weight {w} below clamp tolerance");
            if *w < 0.0 {
                *w = 0.0;
            }
        }
        let sum: f64 = weights.iter().sum();
        let defect = (1.0 - sum).clamp(0.0, 1.0);
        TransitionRow {
            grid_id: grid.id,
            base_index,
            weights,
            defect,
        }
    }

    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Mass inside the centered ball of radius `rho`.
    pub fn mass_within(&self, grid: &Grid, rho: f64) -> f64 {
        self.weights
            .iter()
            .enumerate()
            .filter(|(j, _)| grid.norm(*j) <= rho + 1e-12)
            .map(|(_, w)| w)
            .sum()
    }

    /// Weighted mean and variance of the first coordinate.
    pub fn moments(&self, grid: &Grid) -> (f64, f64) {
        let mass = self.mass().max(1e-300);
        let mean: f64 = self
            .weights
            .iter()
            .enumerate()
            .map(|(j, w)| w * grid.point(j)[0])
            .sum::<f64>()
            / mass;
        let var: f64 = self
            .weights
            .iter()
            .enumerate()
            .map(|(j, w)| {
                let d = grid.point(j)[0] - mean;
                w * d * d
            })
            .sum::<f64>()
            / mass;
        (mean, var)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TightnessReport {
    pub eps: f64,
    /// smallest grid radius holding mass >= 1-eps for every core base point
    pub rho: f64,
    /// per-base-point profile (base coordinate norm, required radius)
    pub profile: Vec<(f64, f64)>,
    pub worst_defect: f64,
}

/// Smallest radius `rho` with `p_{t,s,x}(B(0,rho)) >= 1 - eps` for every
/// base point in the core. Escaped mass counts against tightness.
pub fn tightness_radius(prop: &Propagator, eps: f64) -> Result<TightnessReport> {
    if !(0.0 < eps && eps < 1.0) {
        return Err(Error::InvalidArgument("eps must lie in (0,1)".into()));
    }
    let grid = prop.grid();
    let rows = prop.dense_kernel()?;
    let core = grid.core_indices(0.5);
    // node visit order by distance from the origin
    let mut order: Vec<usize> = (0..grid.n_nodes()).collect();
    order.sort_by(|&a, &b| grid.norm(a).total_cmp(&grid.norm(b)));
    let mut profile = Vec::with_capacity(core.len());
    let mut rho = 0.0f64;
    let mut worst_defect = 0.0f64;
    for &i in &core {
        let row = &rows[i];
        worst_defect = worst_defect.max(row.defect);
        if row.mass() < 1.0 - eps {
            return Err(Error::NotResolvable { floor: row.defect });
        }
        let mut acc = 0.0;
        let mut rho_x = 0.0;
        for &j in &order {
            acc += row.weights[j];
            rho_x = grid.norm(j);
            if acc >= 1.0 - eps {
                break;
            }
        }
        rho = rho.max(rho_x);
        profile.push((grid.norm(i), rho_x));
    }
    Ok(TightnessReport {
        eps,
        rho,
        profile,
        worst_defect,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TightnessSweepReport {
    pub eps: f64,
    pub rho_at: Vec<(f64, f64)>,
    /// rho(eps, t) <= rho(eps, r) + 2h for all t >= r in the sweep
    pub holds: bool,
}

/// Once tight, always tight: sweep increasing observation times from a
/// common start and compare radii against the first.
pub fn tightness_monotone_check(
    chain: &Arc<FactorChain>,
    s: f64,
    times: &[f64],
    eps: f64,
) -> Result<TightnessSweepReport> {
    if times.len() < 2 {
        return Err(Error::InvalidArgument("sweep needs at least two times".into()));
    }
    let mut rho_at = Vec::new();
    for &t in times {
        let prop = chain.propagator(s, t)?;
        let rep = tightness_radius(&prop, eps)?;
        rho_at.push((t, rep.rho));
    }
    let base = rho_at[0].1;
    let h = chain.grid.spacing;
    let holds = rho_at.iter().all(|&(_, r)| r <= base + 2.0 * h + 1e-12);
    Ok(TightnessSweepReport { eps, rho_at, holds })
}

/// One phase of the periodic family: a probability vector on the grid.
#[derive(Debug, Clone)]
pub struct PhaseMeasure {
    pub phase: f64,
    pub weights: Vec<f64>,
    /// mass lost by the transposed step from the next anchor (before
    /// renormalization)
    pub renorm_defect: f64,
}

/// Phase-indexed probability weights realizing the periodic family.
#[derive(Debug, Clone)]
pub struct EvolutionMeasureFamily {
    pub grid_id: u64,
    pub period: f64,
    pub lambda1: f64,
    pub phases: Vec<PhaseMeasure>,
    /// max total-variation gap between walked-down measures and direct
    /// eigensolves at the spot-check phases
    pub spot_check_max_tv: f64,
    pub spot_check_ok: bool,
}

fn normalize_prob(w: &mut [f64]) -> f64 {
    for v in w.iter_mut() {
        if *v < 0.0 {
            debug_assert!(*v > -1e-12);
            *v = 0.0;
        }
    }
    let sum: f64 = w.iter().sum();
    if sum > 0.0 {
        for v in w.iter_mut() {
            *v /= sum;
        }
    }
    sum
}

fn tv_distance(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// Left Perron vector of the one-period map starting at step `k0`, by power
/// iteration on the transposed chain. Returns `(weights, lambda1)`.
pub fn left_perron(
    chain: &Arc<FactorChain>,
    k0: usize,
    start: Option<Vec<f64>>,
) -> Result<(Vec<f64>, f64)> {
    let n = chain.grid.n_nodes();
    let spp = chain.steps_per_period;
    let mut w = start.unwrap_or_else(|| {
        let mut v = vec![0.0; n];
        for i in chain.grid.interior_indices() {
            v[i] = 1.0;
        }
        v
    });
    normalize_prob(&mut w);
    for _ in 0..2000 {
        let mut next = chain.run_transposed(k0, k0 + spp, &w)?;
        let lambda = normalize_prob(&mut next);
        let dist = tv_distance(&next, &w);
        w = next;
        if dist <= 1e-14 {
            return Ok((w, lambda));
        }
    }
    Err(Error::DegenerateGap { gap: 0.0 })
}

/// Build the periodic family on `m` phase anchors per period.
pub fn periodic_measures(chain: &Arc<FactorChain>, m: usize) -> Result<EvolutionMeasureFamily> {
    let spp = chain.steps_per_period;
    if m == 0 || spp % m != 0 {
        return Err(Error::TimeGrid(format!(
            "phase count {m} must divide the {spp} steps per period"
        )));
    }
    let stride = spp / m;
    let (w0, lambda1) = left_perron(chain, 0, None)?;
    // a simple leading multiplier is assumed: a second start must land on
    // the same fixed point, otherwise the family is refused
    {
        let n = chain.grid.n_nodes();
        let mut alt = vec![0.0; n];
        for (i, v) in alt.iter_mut().enumerate() {
            if !chain.grid.is_boundary(i) {
                let u = chain.grid.norm(i) / chain.grid.radius;
                *v = 1.0 + 0.9 * (3.1 * u).sin();
            }
        }
        let (w_alt, _) = left_perron(chain, 0, Some(alt))?;
        let gap = tv_distance(&w0, &w_alt);
        if gap > 1e-8 {
            return Err(Error::DegenerateGap { gap });
        }
    }
    let mut phases: Vec<PhaseMeasure> = Vec::with_capacity(m);
    phases.push(PhaseMeasure {
        phase: 0.0,
        weights: w0.clone(),
        renorm_defect: 0.0,
    });
    // walk down from the period end: w_{s-Δ} = normalize(K(s, s-Δ)^T w_s)
    let mut current = w0;
    for j in (1..m).rev() {
        let k_lo = j * stride;
        let k_hi = (j + 1) * stride;
        let mut w = chain.run_transposed(k_lo, k_hi, &current)?;
        let sum = normalize_prob(&mut w);
        phases.insert(
            1,
            PhaseMeasure {
                phase: chain.time_of(k_lo),
                weights: w.clone(),
                renorm_defect: 1.0 - sum,
            },
        );
        current = w;
    }
    phases.sort_by(|a, b| a.phase.total_cmp(&b.phase));
    // defect attribution for phase 0: close the loop over [0, stride]
    {
        let mut w = chain.run_transposed(0, stride, &phases[1].weights.clone())?;
        let sum = normalize_prob(&mut w);
        phases[0].renorm_defect = 1.0 - sum;
    }

    // spot-check two anchors against direct eigensolves
    let spots = [m / 2, m - 1];
    let mut max_tv = 0.0f64;
    for &j in &spots {
        if j == 0 || j >= m {
            continue;
        }
        let (direct, _) = left_perron(chain, j * stride, None)?;
        max_tv = max_tv.max(tv_distance(&direct, &phases[j].weights));
    }
    Ok(EvolutionMeasureFamily {
        grid_id: chain.grid.id,
        period: chain.field.period,
        lambda1,
        phases,
        spot_check_max_tv: max_tv,
        spot_check_ok: max_tv <= 1e-6,
    })
}

impl EvolutionMeasureFamily {
    /// Phase anchor holding time `s` reduced modulo the period.
    pub fn phase_at(&self, s: f64) -> Result<&PhaseMeasure> {
        let m = self.phases.len() as f64;
        let frac = (s / self.period).rem_euclid(1.0);
        let jf = frac * m;
        let j = jf.round();
        if (jf - j).abs() > 1e-9 {
            return Err(Error::TimeGrid(format!(
                "time {s} does not sit on a phase anchor"
            )));
        }
        Ok(&self.phases[(j as usize) % self.phases.len()])
    }

    /// Weighted mean and variance of the first coordinate at a phase.
    pub fn moments(&self, grid: &Grid, phase_idx: usize) -> (f64, f64) {
        let w = &self.phases[phase_idx].weights;
        let mean: f64 = w.iter().enumerate().map(|(j, v)| v * grid.point(j)[0]).sum();
        let var: f64 = w
            .iter()
            .enumerate()
            .map(|(j, v)| {
                let d = grid.point(j)[0] - mean;
                v * d * d
            })
            .sum();
        (mean, var)
    }

    /// `<w_s, φ>`.
    pub fn mean_of(&self, s: f64, phi: &[f64]) -> Result<f64> {
        let pm = self.phase_at(s)?;
        Ok(pm.weights.iter().zip(phi).map(|(w, p)| w * p).sum())
    }

    /// Weighted `L^p` norm `(Σ w |φ|^p)^{1/p}` at a phase.
    pub fn lp_norm(&self, s: f64, phi: &[f64], p: f64) -> Result<f64> {
        if p < 1.0 {
            return Err(Error::InvalidArgument("p must be >= 1".into()));
        }
        let pm = self.phase_at(s)?;
        Ok(pm
            .weights
            .iter()
            .zip(phi)
            .map(|(w, v)| w * v.abs().powf(p))
            .sum::<f64>()
            .powf(1.0 / p))
    }

    /// Total renormalization defect over one period.
    pub fn total_defect(&self) -> f64 {
        self.phases.iter().map(|p| p.renorm_defect).sum()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InvarianceReport {
    pub per_function: Vec<(String, f64)>,
    pub max_residual: f64,
}

/// `max over battery of |<w_t, G(t,s)φ> - <w_s, φ>|`.
pub fn invariance_residual(
    family: &EvolutionMeasureFamily,
    chain: &Arc<FactorChain>,
    s: f64,
    t: f64,
    battery: &[TestFunction],
) -> Result<InvarianceReport> {
    if family.grid_id != chain.grid.id {
        return Err(Error::GridMismatch("family built on a different grid".into()));
    }
    let prop = chain.propagator(s, t)?;
    let w_t = family.phase_at(t)?;
    let w_s = family.phase_at(s)?;
    let mut per = Vec::new();
    let mut max_res = 0.0f64;
    for phi in battery {
        let v = phi.values_on(&chain.grid, s)?;
        let gv = prop.apply(&v)?;
        let lhs: f64 = w_t.weights.iter().zip(&gv).map(|(w, g)| w * g).sum();
        let rhs: f64 = w_s.weights.iter().zip(&v).map(|(w, g)| w * g).sum();
        let res = (lhs - rhs).abs();
        max_res = max_res.max(res);
        per.push((phi.name.clone(), res));
    }
    Ok(InvarianceReport {
        per_function: per,
        max_residual: max_res,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct MeanBoundReport {
    pub bound: f64,
    /// max over phases of <w_s, W>
    pub worst_phase_mean: f64,
    pub phase_means_ok: bool,
    /// max over core nodes of G(t,s)W - W
    pub worst_gw_excess: f64,
    pub gw_ok: bool,
}

/// Dissipativity consequences: `<w_s, W> <= min W + a/c + tol` at every
/// phase, and `G(t,s)W <= W + a/c + tol` on core nodes.
pub fn lyapunov_mean_bound(
    family: &EvolutionMeasureFamily,
    chain: &Arc<FactorChain>,
    w_nodes: &[f64],
    a: f64,
    c: f64,
    window: f64,
    tol: f64,
) -> Result<MeanBoundReport> {
    let grid = &chain.grid;
    let min_w = w_nodes
        .iter()
        .enumerate()
        .filter(|(i, _)| !grid.is_boundary(*i))
        .map(|(_, v)| *v)
        .fold(f64::INFINITY, f64::min);
    let bound = min_w + a / c;
    let mut worst_mean = f64::NEG_INFINITY;
    for (j, pm) in family.phases.iter().enumerate() {
        let _ = j;
        let mean: f64 = pm.weights.iter().zip(w_nodes).map(|(w, v)| w * v).sum();
        worst_mean = worst_mean.max(mean);
    }
    let prop = chain.propagator(0.0, window)?;
    let gw = prop.apply(w_nodes)?;
    let mut worst_excess = f64::NEG_INFINITY;
    for i in grid.core_indices(0.5) {
        worst_excess = worst_excess.max(gw[i] - w_nodes[i]);
    }
    Ok(MeanBoundReport {
        bound,
        worst_phase_mean: worst_mean,
        phase_means_ok: worst_mean <= bound + tol,
        worst_gw_excess: worst_excess,
        gw_ok: worst_excess <= a / c + tol,
    })
}
