//! Independent stochastic oracle for the propagator.
//!
//! Euler–Maruyama paths of `dZ = b̂ dτ + sqrt(2 Q̂) dB` over `[s, t]` with the
//! time-reversed coefficient schedule `b̂(τ,·) = b(s+t-τ,·)`,
//! `Q̂(τ,·) = Q(s+t-τ,·)`, started at `Z_s = x`. The reversed schedule is the
//! representation matching the forward-in-time problem solved by the PDE
//! path; it is gated by the exact Ornstein–Uhlenbeck agreement tests before
//! anything else relies on it.
//!
//! Streams are keyed by `(seed, pair index)` so serial and parallel runs
//! produce bit-identical endpoints; antithetic partners reuse the stream of
//! their pair with negated increments.

use crate::error::{Error, Result};
use crate::field::CoefficientField;
use crate::grid::Grid;
use crate::measures::TransitionRow;
use crate::quad::pairwise_sum;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

const EXPLOSION_BOUND: f64 = 1e8;

/// A Monte Carlo estimate with its sampling metadata.
#[derive(Debug, Clone, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
    pub seed: u64,
    pub em_dt: f64,
    pub explosion_fraction: f64,
    /// set when the explosion fraction exceeds 1e-4
    pub flagged: bool,
}

/// Simulated endpoints; an estimate factory over test functions.
#[derive(Debug, Clone)]
pub struct McSampler {
    pub dim: usize,
    pub endpoints: Vec<[f64; 2]>,
    pub exploded: Vec<bool>,
    pub n: usize,
    pub seed: u64,
    pub em_dt: f64,
}

fn pair_rng(seed: u64, pair: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&pair.to_le_bytes());
    key[16] = 0x5e;
    ChaCha8Rng::from_seed(key)
}

/// Run `n` Euler–Maruyama paths from `x` over `[s, t]`.
pub fn simulate(
    field: &CoefficientField,
    s: f64,
    t: f64,
    x: &[f64],
    n: usize,
    em_dt: f64,
    seed: u64,
) -> Result<McSampler> {
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one path".into()));
    }
    if em_dt <= 0.0 {
        return Err(Error::InvalidArgument("em_dt must be positive".into()));
    }
    let span = t - s;
    let steps_f = span / em_dt;
    if span < 0.0 || (steps_f - steps_f.round()).abs() > 1e-9 * steps_f.max(1.0) {
        return Err(Error::TimeGrid(format!("em_dt = {em_dt} must divide t - s = {span}")));
    }
    let steps = steps_f.round() as usize;
    let dim = field.dim;
    let x0 = [x[0], x.get(1).copied().unwrap_or(0.0)];

    let b_c: Vec<_> = field.b.iter().map(|e| e.compile()).collect();
    let q_c: Vec<_> = (0..dim).map(|k| field.q[k][k].compile()).collect();
    let sqrt_dt = em_dt.sqrt();

    let mut endpoints = vec![[0.0; 2]; n];
    let mut exploded = vec![false; n];
    const BLOCK: usize = 4096;
    endpoints
        .par_chunks_mut(BLOCK)
        .zip(exploded.par_chunks_mut(BLOCK))
        .enumerate()
        .for_each(|(block, (ends, boom))| {
            let mut stack = Vec::new();
            let mut incr = vec![[0.0f64; 2]; steps];
            for local in 0..ends.len() {
                let path = block * BLOCK + local;
                let pair = (path / 2) as u64;
                let sign = if path % 2 == 0 { 1.0 } else { -1.0 };
                // regenerate the pair's stream for each member
                let mut rng = pair_rng(seed, pair);
                for inc in incr.iter_mut() {
                    for d in inc.iter_mut().take(dim) {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        *d = z;
                    }
                }
                let mut z = x0;
                let mut blew = false;
                for (k, inc) in incr.iter().enumerate() {
                    // reversed schedule: coefficients at s + t - τ_k
                    let tau = s + k as f64 * em_dt;
                    let tc = s + t - tau;
                    let mut ok = true;
                    for d in 0..dim {
                        let bv = match b_c[d].eval_with(tc, z[0], z[1], &mut stack) {
                            Ok(v) => v,
                            Err(_) => {
                                ok = false;
                                break;
                            }
                        };
                        let qv = match q_c[d].eval_with(tc, z[0], z[1], &mut stack) {
                            Ok(v) => v,
                            Err(_) => {
                                ok = false;
                                break;
                            }
                        };
                        z[d] += bv * em_dt + (2.0 * qv).max(0.0).sqrt() * sqrt_dt * sign * inc[d];
                    }
                    if !ok || z[..dim].iter().any(|v| v.abs() > EXPLOSION_BOUND) {
                        blew = true;
                        break;
                    }
                }
                ends[local] = z;
                boom[local] = blew;
            }
        });
    Ok(McSampler {
        dim,
        endpoints,
        exploded,
        n,
        seed,
        em_dt,
    })
}

impl McSampler {
    pub fn explosion_fraction(&self) -> f64 {
        self.exploded.iter().filter(|&&b| b).count() as f64 / self.n as f64
    }

    /// Estimate `E φ(Z_t)` over the non-exploded endpoints.
    pub fn estimate(&self, phi: &dyn Fn(&[f64]) -> f64) -> McEstimate {
        let values: Vec<f64> = self
            .endpoints
            .iter()
            .zip(&self.exploded)
            .filter(|(_, &boom)| !boom)
            .map(|(z, _)| phi(&z[..self.dim]))
            .collect();
        let n_valid = values.len().max(1);
        let mean = pairwise_sum(&values) / n_valid as f64;
        let sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
        let var = if n_valid > 1 {
            pairwise_sum(&sq) / (n_valid - 1) as f64
        } else {
            0.0
        };
        let frac = self.explosion_fraction();
        McEstimate {
            mean,
            stderr: (var / n_valid as f64).sqrt(),
            n: self.n,
            seed: self.seed,
            em_dt: self.em_dt,
            explosion_fraction: frac,
            flagged: frac > 1e-4,
        }
    }

    /// Histogram of endpoints on a grid: an empirical transition row. Mass
    /// outside the box (and exploded paths) counts as defect.
    pub fn empirical_kernel(&self, grid: &Grid, base_index: usize) -> TransitionRow {
        let mut weights = vec![0.0; grid.n_nodes()];
        let wi = 1.0 / self.n as f64;
        for (z, &boom) in self.endpoints.iter().zip(&self.exploded) {
            if boom {
                continue;
            }
            if let Some(j) = grid.node_near(&z[..self.dim]) {
                weights[j] += wi;
            }
        }
        TransitionRow::new(grid, base_index, weights)
    }
}

/// Endpoint histogram oracle in one call.
pub fn empirical_kernel(
    field: &CoefficientField,
    s: f64,
    t: f64,
    x: &[f64],
    n: usize,
    em_dt: f64,
    seed: u64,
    grid: &Grid,
) -> Result<TransitionRow> {
    let sampler = simulate(field, s, t, x, n, em_dt, seed)?;
    let base = grid.node_near(x).unwrap_or(0);
    Ok(sampler.empirical_kernel(grid, base))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ou_field() -> CoefficientField {
        CoefficientField::from_strings(1, 1.0, &[vec!["1".into()]], &["-x1+cos(2*pi*t)".into()])
            .unwrap()
    }

    #[test]
    fn frozen_coefficients_give_deterministic_endpoint() {
        let f = CoefficientField::from_strings(1, 1.0, &[vec!["0".into()]], &["0".into()]).unwrap();
        let sampler = simulate(&f, 0.0, 1.0, &[1.5], 8, 0.25, 7).unwrap();
        let est = sampler.estimate(&|z| z[0]);
        assert_eq!(est.mean, 1.5);
        assert_eq!(est.stderr, 0.0);
        assert!(!est.flagged);
    }

    #[test]
    fn reproducible_bit_for_bit() {
        let f = ou_field();
        let a = simulate(&f, 0.0, 1.0, &[0.0], 2000, 0.01, 42).unwrap();
        let b = simulate(&f, 0.0, 1.0, &[0.0], 2000, 0.01, 42).unwrap();
        for (x, y) in a.endpoints.iter().zip(&b.endpoints) {
            assert_eq!(x[0].to_bits(), y[0].to_bits());
        }
        let ea = a.estimate(&|z| z[0].sin());
        let eb = b.estimate(&|z| z[0].sin());
        assert_eq!(ea.mean.to_bits(), eb.mean.to_bits());
        let c = simulate(&f, 0.0, 1.0, &[0.0], 2000, 0.01, 43).unwrap();
        assert_ne!(
            a.estimate(&|z| z[0]).mean.to_bits(),
            c.estimate(&|z| z[0]).mean.to_bits()
        );
    }

    #[test]
    fn ou_mean_within_three_stderr() {
        let f = ou_field();
        let sampler = simulate(&f, 0.0, 1.0, &[0.0], 200_000, 1e-2, 1234).unwrap();
        let est = sampler.estimate(&|z| z[0]);
        let pi2 = 4.0 * std::f64::consts::PI * std::f64::consts::PI;
        let exact = (1.0 - (-1.0f64).exp()) / (1.0 + pi2);
        assert!(
            (est.mean - exact).abs() <= 3.0 * est.stderr + 2e-3,
            "mean {} vs {exact} (stderr {})",
            est.mean,
            est.stderr
        );
    }

    #[test]
    fn single_path_histogram_is_a_point_mass() {
        let f = ou_field();
        let g = Grid::new(1, 4.0, 0.5).unwrap();
        let row = empirical_kernel(&f, 0.0, 0.5, &[0.0], 1, 0.01, 5, &g).unwrap();
        let total: f64 = row.weights.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert_eq!(row.weights.iter().filter(|&&w| w > 0.0).count(), 1);
    }

    #[test]
    fn explosion_accounting() {
        // strongly repelling drift blows up quickly and is reported
        let f = CoefficientField::from_strings(1, 1.0, &[vec!["1".into()]], &["x1^9".into()])
            .unwrap();
        let sampler = simulate(&f, 0.0, 1.0, &[3.0], 64, 1e-3, 9).unwrap();
        assert!(sampler.explosion_fraction() > 0.5);
        assert!(sampler.estimate(&|z| z[0]).flagged);
    }
}
