//! Period maps, leading Floquet data, spectral projections, decay-rate fits
//! and the kernel-operator compactness probe.

use crate::error::{Error, Result};
use crate::evolution::{FactorChain, DENSE_KERNEL_LIMIT};
use crate::field::TestFunction;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;
use std::sync::Arc;

/// Leading Floquet data of a period map.
#[derive(Debug, Clone, Serialize)]
pub struct SpectralReport {
    pub phase: f64,
    pub period: f64,
    /// leading multiplier (real, positive)
    pub lambda1: f64,
    /// modulus of the second multiplier
    pub lambda2_mod: f64,
    /// gap ratio |λ₂|/λ₁
    pub gap_ratio: f64,
    /// continuous-time rate log(gap_ratio)/T
    pub omega0: f64,
    #[serde(skip)]
    pub psi1: Vec<f64>,
    /// left eigenvector, normalized to a probability vector
    #[serde(skip)]
    pub left: Vec<f64>,
    pub residual1: f64,
    pub residual2: f64,
    pub degenerate: bool,
    pub method: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigenMethod {
    /// full eigensolve (node count <= 400)
    Dense,
    /// power iteration with rank-one deflation
    Power,
}

/// Assemble `V(s) = G(s+T, s)` densely by propagating coordinate vectors.
pub fn assemble_period_map(chain: &Arc<FactorChain>, s: f64) -> Result<DMatrix<f64>> {
    let n = chain.grid.n_nodes();
    if n > DENSE_KERNEL_LIMIT {
        return Err(Error::InvalidArgument(format!(
            "dense period map refused for {n} > {DENSE_KERNEL_LIMIT} nodes; use the matrix-free chain"
        )));
    }
    let k0 = chain.step_index(s);
    let spp = chain.steps_per_period;
    let cols: Result<Vec<Vec<f64>>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            chain.run(k0, k0 + spp, &e)
        })
        .collect();
    let cols = cols?;
    Ok(DMatrix::from_fn(n, n, |i, j| cols[j][i]))
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, &x| m.max(x.abs()))
}

fn normalize_sup(v: &mut [f64]) {
    let s = sup_norm(v);
    if s > 0.0 {
        for x in v.iter_mut() {
            *x /= s;
        }
    }
}

struct PowerOutcome {
    lambda: f64,
    vector: Vec<f64>,
    residual: f64,
}

/// Power iteration for the dominant eigenpair of `op`.
fn power_iterate(
    op: &dyn Fn(&[f64]) -> Vec<f64>,
    n: usize,
    start: Option<Vec<f64>>,
    max_iters: usize,
) -> PowerOutcome {
    let mut y = start.unwrap_or_else(|| vec![1.0; n]);
    normalize_sup(&mut y);
    let mut lambda = 0.0;
    let mut residual = f64::INFINITY;
    for _ in 0..max_iters {
        let vy = op(&y);
        let num: f64 = y.iter().zip(&vy).map(|(a, b)| a * b).sum();
        let den: f64 = y.iter().map(|a| a * a).sum();
        lambda = num / den.max(1e-300);
        residual = y
            .iter()
            .zip(&vy)
            .fold(0.0f64, |m, (a, b)| m.max((b - lambda * a).abs()));
        let mut next = vy;
        normalize_sup(&mut next);
        y = next;
        if residual <= 1e-13 {
            break;
        }
    }
    PowerOutcome {
        lambda,
        vector: y,
        residual,
    }
}

/// Extract leading Floquet data from a dense period map.
pub fn floquet_data(
    v: &DMatrix<f64>,
    period: f64,
    phase: f64,
    method: EigenMethod,
) -> Result<SpectralReport> {
    let n = v.nrows();
    if method == EigenMethod::Dense && n > 400 {
        return Err(Error::InvalidArgument(format!(
            "dense eigensolve refused for {n} > 400 nodes"
        )));
    }
    let apply = |y: &[f64]| -> Vec<f64> {
        let x = nalgebra::DVector::from_column_slice(y);
        (v * x).data.into()
    };
    let apply_t = |y: &[f64]| -> Vec<f64> {
        let x = nalgebra::DVector::from_column_slice(y);
        (v.transpose() * x).data.into()
    };
    // Perron pair via power iteration (both methods report eigenvectors
    // from the same well-conditioned route)
    let right = power_iterate(&apply, n, None, 5000);
    let left = power_iterate(&apply_t, n, None, 5000);
    let lambda1 = right.lambda;
    let residual1 = right.residual.max(left.residual);

    let (lambda2_mod, residual2, method_name) = match method {
        EigenMethod::Dense => {
            let eigs = v.clone().complex_eigenvalues();
            let mut mods: Vec<f64> = eigs.iter().map(|z| z.norm()).collect();
            mods.sort_by(|a, b| b.total_cmp(a));
            (mods.get(1).copied().unwrap_or(0.0), 0.0, "dense".to_string())
        }
        EigenMethod::Power => {
            // deflate the Perron pair and iterate again
            let psi = right.vector.clone();
            let w = left.vector.clone();
            let wpsi: f64 = w.iter().zip(&psi).map(|(a, b)| a * b).sum();
            let deflated = move |y: &[f64]| -> Vec<f64> {
                let vy = apply(y);
                let wy: f64 = w.iter().zip(y).map(|(a, b)| a * b).sum();
                let coef = lambda1 * wy / wpsi;
                vy.iter().zip(&psi).map(|(a, p)| a - coef * p).collect()
            };
            // Smooth deterministic start with both odd and even content:
            // rough starts live in modes the full-period map annihilates to
            // underflow, which would collapse the iteration onto null(V₁).
            let mut start = vec![0.0; n];
            for (i, s) in start.iter_mut().enumerate() {
                let u = 2.0 * i as f64 / (n - 1).max(1) as f64 - 1.0;
                *s = u + 0.25 * (3.0 * u).cos();
            }
            // remove the Perron component from the start
            let w0: f64 = left.vector.iter().zip(&start).map(|(a, b)| a * b).sum();
            for (s, p) in start.iter_mut().zip(&right.vector) {
                *s -= w0 / wpsi * p;
            }
            let second = power_iterate(&deflated, n, Some(start), 10_000);
            if second.residual <= 1e-9 {
                (second.lambda.abs(), second.residual, "power-deflation".to_string())
            } else {
                // complex pair: measure the modulus from the norm growth of
                // the deflated iteration
                let mut y = second.vector;
                let mut acc = 0.0f64;
                let m = 64;
                for _ in 0..m {
                    let next = deflated(&y);
                    acc += (sup_norm(&next) / sup_norm(&y).max(1e-300)).ln();
                    y = next;
                    normalize_sup(&mut y);
                }
                (
                    (acc / m as f64).exp(),
                    second.residual,
                    "power-deflation(modulus)".to_string(),
                )
            }
        }
    };

    let gap_ratio = lambda2_mod / lambda1;
    let degenerate = !(lambda1 > 0.0) || gap_ratio >= 1.0 - 1e-8 || residual1 > 1e-8;
    let mut left_prob = left.vector.clone();
    let total: f64 = left_prob.iter().sum();
    if total != 0.0 {
        for x in left_prob.iter_mut() {
            *x /= total;
        }
    }
    // positive right eigenvector, sup-normalized with positive sign
    let mut psi1 = right.vector;
    if psi1.iter().sum::<f64>() < 0.0 {
        for x in psi1.iter_mut() {
            *x = -*x;
        }
    }
    Ok(SpectralReport {
        phase,
        period,
        lambda1,
        lambda2_mod,
        gap_ratio,
        omega0: if degenerate { 0.0 } else { gap_ratio.ln() / period },
        psi1,
        left: left_prob,
        residual1,
        residual2,
        degenerate,
        method: method_name,
    })
}

/// Rank-one spectral projections `Pφ = <w, φ> ψ₁` (with `<w, ψ₁> = 1`) and
/// `Q = I - P`.
pub struct Projections {
    pub psi1: Vec<f64>,
    pub w: Vec<f64>,
}

pub fn projections(report: &SpectralReport) -> Result<Projections> {
    if report.degenerate {
        return Err(Error::DegenerateGap {
            gap: 1.0 - report.gap_ratio,
        });
    }
    let wpsi: f64 = report.left.iter().zip(&report.psi1).map(|(a, b)| a * b).sum();
    let w: Vec<f64> = report.left.iter().map(|v| v / wpsi).collect();
    Ok(Projections {
        psi1: report.psi1.clone(),
        w,
    })
}

impl Projections {
    pub fn apply_p(&self, phi: &[f64]) -> Vec<f64> {
        let c: f64 = self.w.iter().zip(phi).map(|(a, b)| a * b).sum();
        self.psi1.iter().map(|p| c * p).collect()
    }

    pub fn apply_q(&self, phi: &[f64]) -> Vec<f64> {
        let p = self.apply_p(phi);
        phi.iter().zip(&p).map(|(a, b)| a - b).collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayFit {
    pub tag: String,
    pub rate: f64,
    pub intercept: f64,
    pub r2: f64,
    pub window: (usize, usize),
    pub points: usize,
    pub reliable: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayReport {
    pub omega0: f64,
    pub fits: Vec<DecayFit>,
    /// per tag: (k, e_k) curves for export
    pub curves: Vec<(String, Vec<(usize, f64)>)>,
}

/// Leakage-normalized decay errors along period multiples and their
/// log-linear fits in sup and weighted `L^p` norms.
///
/// `e_k(sup) = sup over core |G(s+kT,s)φ / G(s+kT,s)1 - m_sφ|` and
/// `e_k(p)` is the weighted p-norm of the same deflated error.
pub fn decay_fit(
    chain: &Arc<FactorChain>,
    s: f64,
    battery: &[TestFunction],
    k_max: usize,
    p_list: &[f64],
    spectral: &SpectralReport,
) -> Result<DecayReport> {
    if spectral.degenerate {
        return Err(Error::DegenerateGap {
            gap: 1.0 - spectral.gap_ratio,
        });
    }
    let grid = &chain.grid;
    let n = grid.n_nodes();
    let core = grid.core_indices(0.5);
    let k0 = chain.step_index(s);
    let spp = chain.steps_per_period;
    let weights = &spectral.left;

    // V^k 1 along the sweep
    let mut ones = vec![0.0; n];
    for i in grid.interior_indices() {
        ones[i] = 1.0;
    }
    let mut fits = Vec::new();
    let mut curves = Vec::new();
    for phi in battery {
        let phi_vals = phi.values_on(grid, s)?;
        let m_s: f64 = weights.iter().zip(&phi_vals).map(|(w, p)| w * p).sum();
        let mut u = phi_vals.clone();
        let mut denom = ones.clone();
        let mut sup_curve = Vec::with_capacity(k_max);
        let mut err_nodes: Vec<Vec<f64>> = Vec::with_capacity(k_max);
        for k in 1..=k_max {
            u = chain.run(k0 + (k - 1) * spp, k0 + k * spp, &u)?;
            denom = chain.run(k0 + (k - 1) * spp, k0 + k * spp, &denom)?;
            let mut err = vec![0.0; n];
            let mut sup = 0.0f64;
            for &i in &core {
                let d = denom[i].max(1e-300);
                err[i] = u[i] / d - m_s;
                sup = sup.max(err[i].abs());
            }
            sup_curve.push((k, sup));
            err_nodes.push(err);
        }
        fits.push(fit_curve(&format!("{}|sup", phi.name), &sup_curve, spectral.period));
        curves.push((format!("{}|sup", phi.name), sup_curve));
        for &p in p_list {
            let curve: Vec<(usize, f64)> = err_nodes
                .iter()
                .enumerate()
                .map(|(idx, err)| {
                    let v: f64 = weights
                        .iter()
                        .zip(err)
                        .map(|(w, e)| w * e.abs().powf(p))
                        .sum::<f64>()
                        .powf(1.0 / p);
                    (idx + 1, v)
                })
                .collect();
            fits.push(fit_curve(&format!("{}|L{}", phi.name, p), &curve, spectral.period));
            curves.push((format!("{}|L{}", phi.name, p), curve));
        }
    }
    Ok(DecayReport {
        omega0: spectral.omega0,
        fits,
        curves,
    })
}

/// Least squares of `log e_k` against `kT` on the window `e_k ∈ [1e-10, 1e-3]`.
fn fit_curve(tag: &str, curve: &[(usize, f64)], period: f64) -> DecayFit {
    let pts: Vec<(f64, f64)> = curve
        .iter()
        .filter(|(_, e)| (1e-10..=1e-3).contains(e))
        .map(|(k, e)| (*k as f64 * period, e.ln()))
        .collect();
    let window = (
        curve
            .iter()
            .find(|(_, e)| (1e-10..=1e-3).contains(e))
            .map(|(k, _)| *k)
            .unwrap_or(0),
        curve
            .iter()
            .rev()
            .find(|(_, e)| (1e-10..=1e-3).contains(e))
            .map(|(k, _)| *k)
            .unwrap_or(0),
    );
    if pts.len() < 2 {
        return DecayFit {
            tag: tag.to_string(),
            rate: f64::NAN,
            intercept: f64::NAN,
            r2: 0.0,
            window,
            points: pts.len(),
            reliable: false,
        };
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    let ybar = sy / n;
    let ss_tot: f64 = pts.iter().map(|p| (p.1 - ybar).powi(2)).sum();
    let ss_res: f64 = pts
        .iter()
        .map(|p| (p.1 - slope * p.0 - intercept).powi(2))
        .sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    DecayFit {
        tag: tag.to_string(),
        rate: slope,
        intercept,
        r2,
        window,
        points: pts.len(),
        reliable: pts.len() >= 4 && r2 >= 0.99,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CompactnessReport {
    pub p: f64,
    pub n: usize,
    /// smallest k (1-based) with σ_k/σ_1 <= 1e-6 (p = 2), or the ε-net size
    pub k_star: Option<usize>,
    /// leading normalized singular values (p = 2 only)
    pub sigma_head: Vec<f64>,
    pub method: String,
}

/// Compactness signature of the kernel operator on the Lebesgue-discretized
/// `L^p` space: fast singular-value decay (p = 2, exact) or a small greedy
/// column ε-net (other p).
pub fn lp_compactness_probe(
    chain: &Arc<FactorChain>,
    s: f64,
    t: f64,
    p: f64,
) -> Result<CompactnessReport> {
    let prop = chain.propagator(s, t)?;
    let rows = prop.dense_kernel()?;
    let n = chain.grid.n_nodes();
    if (p - 2.0).abs() < 1e-12 {
        let k = DMatrix::from_fn(n, n, |i, j| rows[i].weights[j]);
        let svd = k.svd(false, false);
        let mut sigma: Vec<f64> = svd.singular_values.iter().copied().collect();
        sigma.sort_by(|a, b| b.total_cmp(a));
        let s1 = sigma[0].max(1e-300);
        let k_star = sigma.iter().position(|&sv| sv / s1 <= 1e-6).map(|i| i + 1);
        let sigma_head: Vec<f64> = sigma.iter().take(48).map(|&sv| sv / s1).collect();
        Ok(CompactnessReport {
            p,
            n,
            k_star,
            sigma_head,
            method: "svd".into(),
        })
    } else {
        // greedy ε-net over kernel columns in the ℓ^p metric
        let cols: Vec<Vec<f64>> = (0..n)
            .map(|j| (0..n).map(|i| rows[i].weights[j]).collect())
            .collect();
        let norm_p = |v: &[f64]| -> f64 {
            v.iter().map(|x| x.abs().powf(p)).sum::<f64>().powf(1.0 / p)
        };
        let max_norm = cols.iter().map(|c| norm_p(c)).fold(0.0f64, f64::max);
        let eps = 1e-6 * max_norm.max(1e-300);
        let mut centers: Vec<usize> = Vec::new();
        for j in 0..n {
            let covered = centers.iter().any(|&c| {
                let d: f64 = cols[j]
                    .iter()
                    .zip(&cols[c])
                    .map(|(a, b)| (a - b).abs().powf(p))
                    .sum::<f64>()
                    .powf(1.0 / p);
                d <= eps
            });
            if !covered {
                centers.push(j);
            }
        }
        Ok(CompactnessReport {
            p,
            n,
            k_star: Some(centers.len()),
            sigma_head: Vec::new(),
            method: "eps-net".into(),
        })
    }
}
