//! Small numerical kernels: RK4 integration with step-doubling control,
//! Gauss–Hermite quadrature, and deterministic pairwise summation.

use crate::error::{Error, Result};
use nalgebra::DMatrix;

/// Integrate `y' = f(r, y)` from `a` to `b` with classical RK4 on `n` steps.
pub fn rk4_fixed<const K: usize>(
    f: &dyn Fn(f64, &[f64; K]) -> Result<[f64; K]>,
    a: f64,
    b: f64,
    y0: [f64; K],
    n: usize,
) -> Result<[f64; K]> {
    let h = (b - a) / n as f64;
    let mut y = y0;
    let mut r = a;
    for _ in 0..n {
        y = rk4_step(f, r, &y, h)?;
        r += h;
    }
    Ok(y)
}

fn rk4_step<const K: usize>(
    f: &dyn Fn(f64, &[f64; K]) -> Result<[f64; K]>,
    r: f64,
    y: &[f64; K],
    h: f64,
) -> Result<[f64; K]> {
    let k1 = f(r, y)?;
    let mut y2 = *y;
    for i in 0..K {
        y2[i] += 0.5 * h * k1[i];
    }
    let k2 = f(r + 0.5 * h, &y2)?;
    let mut y3 = *y;
    for i in 0..K {
        y3[i] += 0.5 * h * k2[i];
    }
    let k3 = f(r + 0.5 * h, &y3)?;
    let mut y4 = *y;
    for i in 0..K {
        y4[i] += h * k3[i];
    }
    let k4 = f(r + h, &y4)?;
    let mut out = *y;
    for i in 0..K {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    Ok(out)
}

/// RK4 with step doubling until two consecutive refinements agree to
/// `tol` relatively, starting from `n0` steps. Errors out instead of
/// returning an unconverged value.
pub fn rk4_doubling<const K: usize>(
    f: &dyn Fn(f64, &[f64; K]) -> Result<[f64; K]>,
    a: f64,
    b: f64,
    y0: [f64; K],
    tol: f64,
    n0: usize,
) -> Result<[f64; K]> {
    if a == b {
        return Ok(y0);
    }
    let mut n = n0.max(8);
    let mut prev = rk4_fixed(f, a, b, y0, n)?;
    for _ in 0..16 {
        n *= 2;
        let cur = rk4_fixed(f, a, b, y0, n)?;
        let mut ok = true;
        for i in 0..K {
            if (cur[i] - prev[i]).abs() > tol * (1.0 + cur[i].abs()) {
                ok = false;
                break;
            }
        }
        if ok {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(Error::Quadrature(format!(
        "RK4 step doubling did not reach tol={tol:.1e} on [{a}, {b}]"
    )))
}

/// Gauss–Hermite nodes and weights for `∫ f(u) e^{-u²} du` (Golub–Welsch).
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let beta = (k as f64 / 2.0).sqrt();
        jac[(k - 1, k)] = beta;
        jac[(k, k - 1)] = beta;
    }
    let eig = nalgebra::SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let node = eig.eigenvalues[i];
            let v0 = eig.eigenvectors[(0, i)];
            (node, std::f64::consts::PI.sqrt() * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// `E f(mean + sqrt(var) Z)` for standard normal `Z`, by Gauss–Hermite.
pub fn gaussian_expectation(
    f: &dyn Fn(f64) -> Result<f64>,
    mean: f64,
    var: f64,
    nodes: &[f64],
    weights: &[f64],
) -> Result<f64> {
    if var == 0.0 {
        return f(mean);
    }
    let sigma = var.sqrt();
    let mut acc = 0.0;
    for (u, w) in nodes.iter().zip(weights) {
        acc += w * f(mean + sigma * std::f64::consts::SQRT_2 * u)?;
    }
    Ok(acc / std::f64::consts::PI.sqrt())
}

/// Deterministic pairwise summation (recursive halving); independent of any
/// parallel scheduling that produced the slice.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}

/// Trapezoid rule over uniformly spaced samples with spacing `h`.
pub fn trapezoid(values: &[f64], h: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let inner: f64 = values[1..values.len() - 1].iter().sum();
    h * (0.5 * values[0] + inner + 0.5 * values[values.len() - 1])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rk4_exponential() {
        let f = |_r: f64, y: &[f64; 1]| -> Result<[f64; 1]> { Ok([-y[0]]) };
        let y = rk4_doubling(&f, 0.0, 1.0, [1.0], 1e-12, 32).unwrap();
        assert!((y[0] - (-1.0f64).exp()).abs() < 1e-11);
    }

    #[test]
    fn gauss_hermite_moments() {
        let (nodes, weights) = gauss_hermite(48);
        // ∫ e^{-u²} du = √π, ∫ u² e^{-u²} du = √π/2
        let total: f64 = weights.iter().sum();
        assert!((total - std::f64::consts::PI.sqrt()).abs() < 1e-12);
        let second: f64 = nodes.iter().zip(&weights).map(|(u, w)| u * u * w).sum();
        assert!((second - std::f64::consts::PI.sqrt() / 2.0).abs() < 1e-11);
    }

    #[test]
    fn gaussian_expectation_of_sin() {
        // E sin(m + σZ) = sin(m) e^{-σ²/2}
        let (nodes, weights) = gauss_hermite(64);
        let f = |y: f64| -> Result<f64> { Ok(y.sin()) };
        let got = gaussian_expectation(&f, 0.7, 0.8, &nodes, &weights).unwrap();
        let expect = 0.7f64.sin() * (-0.4f64).exp();
        assert!((got - expect).abs() < 1e-12);
    }

    #[test]
    fn pairwise_matches_naive_on_smooth_data() {
        let xs: Vec<f64> = (0..1001).map(|i| (i as f64 * 0.37).sin()).collect();
        let naive: f64 = xs.iter().sum();
        assert!((pairwise_sum(&xs) - naive).abs() < 1e-9);
    }
}
