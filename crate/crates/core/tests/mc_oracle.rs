//! Monte Carlo oracle properties: weak first-order consistency against the
//! exact moments, endpoint-histogram cross-checks, and the Gaussian-moment
//! identities.

use evolop::bench;
use evolop::evolution::FactorChain;
use evolop::grid::Grid;
use evolop::measures::tightness_radius;
use evolop::montecarlo::{empirical_kernel, simulate};
use std::sync::Arc;

#[test]
fn weak_order_one_against_exact_moments() {
    let field = bench::ou_field();
    let params = bench::ou_params();
    let (em, ev) = params.exact_moments(0.0, 1.0, 0.0).unwrap();
    let exact_x2 = em * em + ev;
    let mut errs = Vec::new();
    for em_dt in [0.1, 0.025] {
        let s = simulate(&field, 0.0, 1.0, &[0.0], 400_000, em_dt, 2024).unwrap();
        let est = s.estimate(&|z| z[0] * z[0]);
        errs.push(((est.mean - exact_x2).abs(), est.stderr));
    }
    // the bias must dominate the noise for the slope to mean anything
    assert!(errs[0].0 > 10.0 * errs[0].1, "bias {} vs stderr {}", errs[0].0, errs[0].1);
    let slope = (errs[0].0 / errs[1].0).ln() / 4.0f64.ln();
    assert!(
        (0.7..=1.3).contains(&slope),
        "weak-order slope {slope} outside [0.7, 1.3]: errors {errs:?}"
    );
}

#[test]
fn second_moment_matches_gaussian_identity() {
    let field = bench::ou_field();
    let params = bench::ou_params();
    let s = simulate(&field, 0.0, 1.0, &[0.0], 200_000, 1e-3, 99).unwrap();
    let est = s.estimate(&|z| z[0] * z[0]);
    let (em, ev) = params.exact_moments(0.0, 1.0, 0.0).unwrap();
    let exact = em * em + ev;
    assert!(
        (est.mean - exact).abs() <= 3.0 * est.stderr + 2e-3,
        "x² estimate {} vs {exact} (stderr {})",
        est.mean,
        est.stderr
    );
}

#[test]
fn histogram_tail_mass_matches_pde_radius() {
    let field = Arc::new(bench::cubic_field());
    let grid = Arc::new(Grid::new(1, 4.0, 0.05).unwrap());
    let chain = FactorChain::new(field.clone(), grid.clone(), 1e-3, 1.0).unwrap();
    let prop = chain.propagator(0.0, 1.0).unwrap();
    let rad = tightness_radius(&prop, 0.01).unwrap();
    let n = 100_000;
    let row = empirical_kernel(&field, 0.0, 1.0, &[0.5], n, 2e-3, 7, &grid).unwrap();
    let tail = 1.0 - row.mass_within(&grid, rad.rho);
    let binom_stderr = (0.01f64 * 0.99 / n as f64).sqrt();
    assert!(
        tail <= 0.01 + 3.0 * binom_stderr + grid.spacing,
        "tail {tail} vs eps 0.01"
    );
}

#[test]
fn histogram_moments_match_closed_form() {
    let field = bench::ou_field();
    let params = bench::ou_params();
    let grid = Grid::new(1, 8.0, 0.05).unwrap();
    let row = empirical_kernel(&field, 0.0, 1.0, &[0.0], 200_000, 1e-3, 31, &grid).unwrap();
    let (mean, var) = row.moments(&grid);
    let (em, ev) = params.exact_moments(0.0, 1.0, 0.0).unwrap();
    // binning adds O(h²/12) to the variance
    assert!((mean - em).abs() <= 3e-3, "mean {mean} vs {em}");
    assert!((var - ev).abs() <= 3e-3 + grid.spacing * grid.spacing / 12.0, "var {var} vs {ev}");
}
