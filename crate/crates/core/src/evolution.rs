//! Discretization of `A(t)` on truncated boxes and the discrete propagator.
//!
//! Space: second derivatives by central differences; first derivatives by
//! central differences where the cell Péclet number allows it
//! (`|b| h < 2 q`, which keeps the off-diagonal entries nonnegative) and by
//! first-order upwinding against the drift sign otherwise. Either way the
//! generator has nonnegative off-diagonals and exactly zero interior row
//! sums before boundary truncation (M-matrix structure).
//!
//! Time: theta scheme
//! `(I - theta dt L(t_{k+1})) u^{k+1} = (I + (1-theta) dt L(t_k)) u^k`
//! with homogeneous Dirichlet truncation. For `theta = 1` the step matrix is
//! an M-matrix, so positivity and the sup-norm contraction hold to rounding.
//!
//! Step factors are keyed by step index modulo the period, so propagators
//! over congruent windows reuse identical factors and the composition law
//! `G(t,s) = G(t,r)G(r,s)` holds exactly in floating point.

use crate::error::{Error, Result};
use crate::field::{CoefficientField, TestFunction};
use crate::grid::Grid;
use crate::measures::TransitionRow;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// One row of the sparse generator: diagonal plus (column, value) pairs.
#[derive(Debug, Clone, Default)]
pub struct GenRow {
    pub diag: f64,
    pub off: Vec<(usize, f64)>,
}

/// Sparse generator L(t) over all nodes; boundary rows are empty.
#[derive(Debug, Clone)]
pub struct SparseGenerator {
    pub grid_id: u64,
    pub t: f64,
    pub rows: Vec<GenRow>,
}

impl SparseGenerator {
    /// Row sum including off-diagonal entries (zero on interior rows).
    pub fn row_sum(&self, i: usize) -> f64 {
        self.rows[i].diag + self.rows[i].off.iter().map(|(_, v)| v).sum::<f64>()
    }
}

/// Assemble the discrete generator at time `t`.
pub fn assemble_generator(field: &CoefficientField, grid: &Grid, t: f64) -> Result<SparseGenerator> {
    let n = grid.n_nodes();
    let h = grid.spacing;
    let mut rows = vec![GenRow::default(); n];
    let strides = [1usize, grid.n_axis];
    for idx in 0..n {
        if grid.is_boundary(idx) {
            continue;
        }
        let x = grid.point(idx);
        let q = field.q_diag(t, &x[..field.dim])?;
        let b = field.b_vec(t, &x[..field.dim])?;
        let row = &mut rows[idx];
        for axis in 0..field.dim {
            let (qk, bk) = (q[axis], b[axis]);
            let stride = strides[axis];
            let (left, right) = if bk.abs() * h < 2.0 * qk {
                // central difference: off-diagonals stay positive
                (qk / (h * h) - bk / (2.0 * h), qk / (h * h) + bk / (2.0 * h))
            } else if bk > 0.0 {
                (qk / (h * h), qk / (h * h) + bk / h)
            } else {
                (qk / (h * h) - bk / h, qk / (h * h))
            };
            row.off.push((idx - stride, left));
            row.off.push((idx + stride, right));
            row.diag -= left + right;
        }
    }
    Ok(SparseGenerator {
        grid_id: grid.id,
        t,
        rows,
    })
}

/// Compressed sparse rows over interior unknowns.
#[derive(Debug, Clone)]
struct Csr {
    indptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl Csr {
    fn matvec(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..out.len() {
            let mut acc = 0.0;
            for k in self.indptr[i]..self.indptr[i + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            out[i] = acc;
        }
    }

    fn transpose(&self, n: usize) -> Csr {
        let mut counts = vec![0usize; n];
        for &c in &self.cols {
            counts[c] += 1;
        }
        let mut indptr = vec![0usize; n + 1];
        for i in 0..n {
            indptr[i + 1] = indptr[i] + counts[i];
        }
        let mut cols = vec![0usize; self.cols.len()];
        let mut vals = vec![0.0; self.vals.len()];
        let mut next = indptr.clone();
        for i in 0..n {
            for k in self.indptr[i]..self.indptr[i + 1] {
                let c = self.cols[k];
                cols[next[c]] = i;
                vals[next[c]] = self.vals[k];
                next[c] += 1;
            }
        }
        Csr { indptr, cols, vals }
    }

    /// Gauss–Seidel solve; the step matrices are strictly diagonally
    /// dominant M-matrices, so plain sweeps converge.
    fn gauss_seidel(&self, rhs: &[f64], x: &mut [f64], step: usize) -> Result<()> {
        let n = rhs.len();
        for _ in 0..20_000 {
            let mut delta: f64 = 0.0;
            let mut scale: f64 = 1.0;
            for i in 0..n {
                let mut acc = rhs[i];
                let mut diag = 0.0;
                for k in self.indptr[i]..self.indptr[i + 1] {
                    let c = self.cols[k];
                    if c == i {
                        diag = self.vals[k];
                    } else {
                        acc -= self.vals[k] * x[c];
                    }
                }
                let newv = acc / diag;
                delta = delta.max((newv - x[i]).abs());
                scale = scale.max(newv.abs());
                x[i] = newv;
            }
            if delta <= 1e-13 * scale {
                return Ok(());
            }
        }
        Err(Error::SolveFailure {
            step,
            msg: "Gauss-Seidel did not converge".into(),
        })
    }
}

/// Tridiagonal storage: lo[i] = A[i][i-1], di[i], up[i] = A[i][i+1].
#[derive(Debug, Clone)]
struct Tridiag {
    lo: Vec<f64>,
    di: Vec<f64>,
    up: Vec<f64>,
}

impl Tridiag {
    fn solve(&self, rhs: &mut [f64], scratch: &mut Vec<f64>) {
        let m = rhs.len();
        scratch.clear();
        scratch.resize(m, 0.0);
        let cp = scratch;
        let mut beta = self.di[0];
        rhs[0] /= beta;
        for i in 1..m {
            cp[i] = self.up[i - 1] / beta;
            beta = self.di[i] - self.lo[i] * cp[i];
            rhs[i] = (rhs[i] - self.lo[i] * rhs[i - 1]) / beta;
        }
        for i in (0..m - 1).rev() {
            rhs[i] -= cp[i + 1] * rhs[i + 1];
        }
    }

    /// Solve with the transposed matrix (bands swapped with an index shift).
    fn solve_transposed(&self, rhs: &mut [f64], scratch: &mut Vec<f64>) {
        let m = rhs.len();
        // A^T[i][i-1] = up[i-1], A^T[i][i+1] = lo[i+1]
        scratch.clear();
        scratch.resize(m, 0.0);
        let cp = scratch;
        let mut beta = self.di[0];
        rhs[0] /= beta;
        for i in 1..m {
            cp[i] = self.lo[i] / beta;
            beta = self.di[i] - self.up[i - 1] * cp[i];
            rhs[i] = (rhs[i] - self.up[i - 1] * rhs[i - 1]) / beta;
        }
        for i in (0..m - 1).rev() {
            rhs[i] -= cp[i + 1] * rhs[i + 1];
        }
    }

    fn matvec(&self, x: &[f64], out: &mut [f64]) {
        let m = x.len();
        for i in 0..m {
            let mut acc = self.di[i] * x[i];
            if i > 0 {
                acc += self.lo[i] * x[i - 1];
            }
            if i + 1 < m {
                acc += self.up[i] * x[i + 1];
            }
            out[i] = acc;
        }
    }

    fn matvec_transposed(&self, x: &[f64], out: &mut [f64]) {
        let m = x.len();
        for i in 0..m {
            let mut acc = self.di[i] * x[i];
            if i > 0 {
                acc += self.up[i - 1] * x[i - 1];
            }
            if i + 1 < m {
                acc += self.lo[i + 1] * x[i + 1];
            }
            out[i] = acc;
        }
    }
}

#[derive(Debug, Clone)]
enum StepMatrix {
    Tri(Tridiag),
    Sparse { a: Csr, at: Csr },
}

/// One time-step factor `u -> A^{-1} B u` on interior unknowns.
#[derive(Debug)]
struct StepFactor {
    a: StepMatrix,
    b: Option<StepMatrix>,
}

/// Workspace reused across steps.
#[derive(Default)]
struct Scratch {
    cp: Vec<f64>,
    tmp: Vec<f64>,
}

impl StepFactor {
    fn apply(&self, u: &mut Vec<f64>, scratch: &mut Scratch, step: usize) -> Result<()> {
        if let Some(b) = &self.b {
            match b {
                StepMatrix::Tri(t) => {
                    scratch.tmp.clear();
                    scratch.tmp.resize(u.len(), 0.0);
                    t.matvec(u, &mut scratch.tmp);
                    std::mem::swap(u, &mut scratch.tmp);
                }
                StepMatrix::Sparse { a, .. } => {
                    scratch.tmp.clear();
                    scratch.tmp.resize(u.len(), 0.0);
                    a.matvec(u, &mut scratch.tmp);
                    std::mem::swap(u, &mut scratch.tmp);
                }
            }
        }
        match &self.a {
            StepMatrix::Tri(t) => t.solve(u, &mut scratch.cp),
            StepMatrix::Sparse { a, .. } => {
                scratch.tmp.clear();
                scratch.tmp.extend_from_slice(u);
                a.gauss_seidel(&scratch.tmp, u, step)?;
            }
        }
        Ok(())
    }

    fn apply_transposed(&self, u: &mut Vec<f64>, scratch: &mut Scratch, step: usize) -> Result<()> {
        match &self.a {
            StepMatrix::Tri(t) => t.solve_transposed(u, &mut scratch.cp),
            StepMatrix::Sparse { at, .. } => {
                scratch.tmp.clear();
                scratch.tmp.extend_from_slice(u);
                at.gauss_seidel(&scratch.tmp, u, step)?;
            }
        }
        if let Some(b) = &self.b {
            match b {
                StepMatrix::Tri(t) => {
                    scratch.tmp.clear();
                    scratch.tmp.resize(u.len(), 0.0);
                    t.matvec_transposed(u, &mut scratch.tmp);
                    std::mem::swap(u, &mut scratch.tmp);
                }
                StepMatrix::Sparse { at, .. } => {
                    scratch.tmp.clear();
                    scratch.tmp.resize(u.len(), 0.0);
                    at.matvec(u, &mut scratch.tmp);
                    std::mem::swap(u, &mut scratch.tmp);
                }
            }
        }
        Ok(())
    }
}

/// Shared assembly of one-step factors for a (field, grid, dt, theta) tuple.
pub struct FactorChain {
    pub field: Arc<CoefficientField>,
    pub grid: Arc<Grid>,
    pub dt: f64,
    pub theta: f64,
    pub steps_per_period: usize,
    interior: Vec<usize>,
    /// interior position of each node, n for boundary nodes
    interior_pos: Vec<usize>,
    cache: Mutex<HashMap<usize, Arc<StepFactor>>>,
}

impl FactorChain {
    pub fn new(field: Arc<CoefficientField>, grid: Arc<Grid>, dt: f64, theta: f64) -> Result<Arc<Self>> {
        if dt <= 0.0 {
            return Err(Error::InvalidArgument("dt must be positive".into()));
        }
        if !(theta == 1.0 || theta == 0.5) {
            return Err(Error::InvalidArgument("theta must be 1 (implicit Euler) or 0.5 (Crank-Nicolson)".into()));
        }
        let spp_f = field.period / dt;
        if (spp_f - spp_f.round()).abs() > 1e-9 * spp_f.max(1.0) {
            return Err(Error::TimeGrid(format!(
                "dt = {dt} must divide the period {} exactly",
                field.period
            )));
        }
        let interior = grid.interior_indices();
        let mut interior_pos = vec![grid.n_nodes(); grid.n_nodes()];
        for (p, &idx) in interior.iter().enumerate() {
            interior_pos[idx] = p;
        }
        Ok(Arc::new(FactorChain {
            field,
            grid,
            dt,
            theta,
            steps_per_period: spp_f.round() as usize,
            interior,
            interior_pos,
            cache: Mutex::new(HashMap::new()),
        }))
    }

    pub fn positivity_guaranteed(&self) -> bool {
        self.theta == 1.0
    }

    /// Snap a time to the step grid.
    pub fn step_index(&self, time: f64) -> usize {
        (time / self.dt).round().max(0.0) as usize
    }

    pub fn time_of(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    fn interior_matrix(&self, gen: &SparseGenerator, scale: f64, shift: f64) -> StepMatrix {
        // matrix = shift*I + scale*L restricted to interior unknowns
        let m = self.interior.len();
        if self.grid.dim == 1 {
            let mut tri = Tridiag {
                lo: vec![0.0; m],
                di: vec![0.0; m],
                up: vec![0.0; m],
            };
            for (p, &idx) in self.interior.iter().enumerate() {
                let row = &gen.rows[idx];
                tri.di[p] = shift + scale * row.diag;
                for &(col, v) in &row.off {
                    let cp = self.interior_pos[col];
                    if cp < m {
                        if cp + 1 == p {
                            tri.lo[p] = scale * v;
                        } else if cp == p + 1 {
                            tri.up[p] = scale * v;
                        }
                    }
                }
            }
            StepMatrix::Tri(tri)
        } else {
            let mut indptr = vec![0usize; m + 1];
            let mut cols = Vec::new();
            let mut vals = Vec::new();
            for (p, &idx) in self.interior.iter().enumerate() {
                let row = &gen.rows[idx];
                let mut entries: Vec<(usize, f64)> = vec![(p, shift + scale * row.diag)];
                for &(col, v) in &row.off {
                    let cp = self.interior_pos[col];
                    if cp < m {
                        entries.push((cp, scale * v));
                    }
                }
                entries.sort_by_key(|e| e.0);
                for (c, v) in entries {
                    cols.push(c);
                    vals.push(v);
                }
                indptr[p + 1] = cols.len();
            }
            let a = Csr { indptr, cols, vals };
            let at = a.transpose(m);
            StepMatrix::Sparse { a, at }
        }
    }

    /// Factor for step `k -> k+1`, cached by phase.
    fn factor(&self, k: usize) -> Result<Arc<StepFactor>> {
        let phase = k % self.steps_per_period;
        if let Some(f) = self.cache.lock().unwrap().get(&phase) {
            return Ok(f.clone());
        }
        let t_next = ((phase + 1) % self.steps_per_period) as f64 * self.dt;
        let t_now = phase as f64 * self.dt;
        let gen_next = assemble_generator(&self.field, &self.grid, t_next)?;
        let a = self.interior_matrix(&gen_next, -self.theta * self.dt, 1.0);
        let b = if self.theta < 1.0 {
            let gen_now = assemble_generator(&self.field, &self.grid, t_now)?;
            Some(self.interior_matrix(&gen_now, (1.0 - self.theta) * self.dt, 1.0))
        } else {
            None
        };
        let f = Arc::new(StepFactor { a, b });
        self.cache
            .lock()
            .unwrap()
            .entry(phase)
            .or_insert_with(|| f.clone());
        Ok(f)
    }

    fn gather_interior(&self, full: &[f64]) -> Vec<f64> {
        self.interior.iter().map(|&i| full[i]).collect()
    }

    fn scatter_interior(&self, int: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.grid.n_nodes()];
        for (p, &idx) in self.interior.iter().enumerate() {
            full[idx] = int[p];
        }
        full
    }

    /// Run the chain forward over steps `k_start..k_end` on full node values.
    pub fn run(&self, k_start: usize, k_end: usize, phi: &[f64]) -> Result<Vec<f64>> {
        let mut u = self.gather_interior(phi);
        let mut scratch = Scratch::default();
        for k in k_start..k_end {
            self.factor(k)?.apply(&mut u, &mut scratch, k)?;
        }
        Ok(self.scatter_interior(&u))
    }

    /// Apply the transposed chain (measure propagation, kernel rows).
    pub fn run_transposed(&self, k_start: usize, k_end: usize, v: &[f64]) -> Result<Vec<f64>> {
        let mut u = self.gather_interior(v);
        let mut scratch = Scratch::default();
        for k in (k_start..k_end).rev() {
            self.factor(k)?.apply_transposed(&mut u, &mut scratch, k)?;
        }
        Ok(self.scatter_interior(&u))
    }

    /// Build a propagator handle for the window `[s, t]`.
    pub fn propagator(self: &Arc<Self>, s: f64, t: f64) -> Result<Propagator> {
        let k_start = self.step_index(s);
        let span = (t - s) / self.dt;
        if (span - span.round()).abs() > 1e-9 * span.abs().max(1.0) || span < 0.0 {
            return Err(Error::TimeGrid(format!(
                "dt = {} must divide t - s = {}",
                self.dt,
                t - s
            )));
        }
        Ok(Propagator {
            chain: self.clone(),
            k_start,
            k_end: k_start + span.round() as usize,
            kernel: OnceLock::new(),
        })
    }
}

/// Discrete realization of the two-parameter propagator on a window.
pub struct Propagator {
    pub chain: Arc<FactorChain>,
    pub k_start: usize,
    pub k_end: usize,
    kernel: OnceLock<Arc<Vec<TransitionRow>>>,
}

/// Dense kernels are materialized only below this node count.
pub const DENSE_KERNEL_LIMIT: usize = 2000;

impl Propagator {
    pub fn s(&self) -> f64 {
        self.chain.time_of(self.k_start)
    }

    pub fn t(&self) -> f64 {
        self.chain.time_of(self.k_end)
    }

    pub fn grid(&self) -> &Grid {
        &self.chain.grid
    }

    pub fn apply(&self, phi: &[f64]) -> Result<Vec<f64>> {
        self.chain.run(self.k_start, self.k_end, phi)
    }

    pub fn apply_transposed(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.chain.run_transposed(self.k_start, self.k_end, v)
    }

    /// Row `i` of the transition kernel: the transposed chain applied to the
    /// `i`-th coordinate vector, in reverse step order.
    pub fn kernel_row(&self, i: usize) -> Result<TransitionRow> {
        let n = self.grid().n_nodes();
        if i >= n {
            return Err(Error::InvalidArgument(format!(
                "node index {i} out of range ({n} nodes)"
            )));
        }
        if let Some(rows) = self.kernel.get() {
            return Ok(rows[i].clone());
        }
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        let w = self.apply_transposed(&e)?;
        Ok(TransitionRow::new(self.grid(), i, w))
    }

    /// All kernel rows (dense), cached. Fails above `DENSE_KERNEL_LIMIT`.
    pub fn dense_kernel(&self) -> Result<Arc<Vec<TransitionRow>>> {
        if let Some(rows) = self.kernel.get() {
            return Ok(rows.clone());
        }
        let n = self.grid().n_nodes();
        if n > DENSE_KERNEL_LIMIT {
            return Err(Error::InvalidArgument(format!(
                "dense kernel materialization refused for {n} > {DENSE_KERNEL_LIMIT} nodes"
            )));
        }
        let rows: Result<Vec<TransitionRow>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut e = vec![0.0; n];
                e[i] = 1.0;
                let w = self.apply_transposed(&e)?;
                Ok(TransitionRow::new(self.grid(), i, w))
            })
            .collect();
        let rows = Arc::new(rows?);
        let _ = self.kernel.set(rows.clone());
        Ok(self.kernel.get().unwrap().clone())
    }
}

/// Result of a single propagation with scheme metadata.
#[derive(Debug, Clone, Serialize)]
pub struct PropagateResult {
    pub values: Vec<f64>,
    pub positivity_guaranteed: bool,
    pub sup_in: f64,
    pub sup_out: f64,
}

/// One-call propagation of a test function.
pub fn propagate(
    chain: &Arc<FactorChain>,
    s: f64,
    t: f64,
    phi: &TestFunction,
) -> Result<PropagateResult> {
    let prop = chain.propagator(s, t)?;
    let phi_vals = phi.values_on(&chain.grid, s)?;
    let values = prop.apply(&phi_vals)?;
    let sup = |v: &[f64]| v.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    Ok(PropagateResult {
        sup_in: sup(&phi_vals),
        sup_out: sup(&values),
        values,
        positivity_guaranteed: chain.positivity_guaranteed(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualReport {
    pub max_residual: f64,
    pub per_function: Vec<(String, f64)>,
}

/// `max |G(t,s)φ - G(t,r)[G(r,s)φ]|` over a battery; the factor chains are
/// identical so this checks exact composition.
pub fn chapman_kolmogorov_check(
    chain: &Arc<FactorChain>,
    s: f64,
    r: f64,
    t: f64,
    battery: &[TestFunction],
) -> Result<ResidualReport> {
    if !(s <= r && r <= t) {
        return Err(Error::TimeGrid(format!("need s <= r <= t, got {s}, {r}, {t}")));
    }
    let full = chain.propagator(s, t)?;
    let first = chain.propagator(s, r)?;
    let second = chain.propagator(r, t)?;
    let mut per = Vec::new();
    let mut max_res = 0.0f64;
    for phi in battery {
        let v = phi.values_on(&chain.grid, s)?;
        let direct = full.apply(&v)?;
        let composed = second.apply(&first.apply(&v)?)?;
        let res = direct
            .iter()
            .zip(&composed)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        max_res = max_res.max(res);
        per.push((phi.name.clone(), res));
    }
    Ok(ResidualReport {
        max_residual: max_res,
        per_function: per,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ExpandingReport {
    pub radii: Vec<f64>,
    /// sup over the common core of u_{2R} - u_R (successive pairs)
    pub increments: Vec<f64>,
    /// most negative value of u_{2R} - u_R seen on the core
    pub worst_monotonicity: f64,
    pub monotone: bool,
    pub increments_decreasing: bool,
}

/// Expanding-box study: propagate the same nonnegative datum on nested boxes
/// and check pointwise monotonicity plus Cauchy decrease of the increments.
pub fn expanding_domain_study(
    field: &Arc<CoefficientField>,
    s: f64,
    t: f64,
    dt: f64,
    theta: f64,
    spacing: f64,
    radii: &[f64],
    phi_on: &dyn Fn(&Grid) -> Result<Vec<f64>>,
) -> Result<ExpandingReport> {
    if radii.len() < 2 {
        return Err(Error::InvalidArgument("need at least two radii".into()));
    }
    let mut grids = Vec::new();
    let mut sols = Vec::new();
    for &r in radii {
        let grid = Arc::new(Grid::new(field.dim, r, spacing)?);
        let phi = phi_on(&grid)?;
        if phi.iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidArgument("expanding-domain study requires phi >= 0".into()));
        }
        let chain = FactorChain::new(field.clone(), grid.clone(), dt, theta)?;
        let u = chain.propagator(s, t)?.apply(&phi)?;
        grids.push(grid);
        sols.push(u);
    }
    for w in grids.windows(2) {
        if !w[0].nested_in(&w[1]) {
            return Err(Error::GridMismatch("radii must produce nested grids".into()));
        }
    }
    let core: Vec<usize> = grids[0].core_indices(0.5);
    let mut increments = Vec::new();
    let mut worst = 0.0f64;
    for k in 0..grids.len() - 1 {
        let (ga, gb) = (&grids[k], &grids[k + 1]);
        let (ua, ub) = (&sols[k], &sols[k + 1]);
        let mut inc = 0.0f64;
        for &i in &core {
            let p = ga.point(i);
            let j = gb.node_near(&p[..field.dim]).expect("nested grids share core nodes");
            let d = ub[j] - ua[i];
            inc = inc.max(d.abs());
            worst = worst.min(d);
        }
        increments.push(inc);
    }
    let monotone = worst >= -1e-12;
    let decreasing = increments.windows(2).all(|w| w[1] < w[0] + 1e-15);
    Ok(ExpandingReport {
        radii: radii.to_vec(),
        increments,
        worst_monotonicity: worst,
        monotone,
        increments_decreasing: decreasing,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DerivativeRelationReport {
    pub per_function: Vec<(String, f64)>,
    pub max_residual: f64,
}

/// Check `D_s G(t,s)φ = -G(t,s) A(s)φ` by a central difference in `s` with
/// step `dt`, on core nodes, for smooth compactly supported `φ` given in
/// closed form.
pub fn derivative_relation_check(
    chain: &Arc<FactorChain>,
    s: f64,
    t: f64,
    battery: &[TestFunction],
) -> Result<DerivativeRelationReport> {
    let grid = &chain.grid;
    let delta = chain.dt;
    let core = grid.core_indices(0.5);
    let mut per = Vec::new();
    let mut max_res = 0.0f64;
    for phi in battery {
        let e = match &phi.kind {
            crate::field::TestFunctionKind::Closed(e) => e,
            _ => {
                return Err(Error::InvalidArgument(
                    "derivative relation check needs closed-form test functions".into(),
                ))
            }
        };
        let vals = phi.values_on(grid, s)?;
        let scale = vals.iter().fold(0.0f64, |m, &v| m.max(v.abs())).max(1e-300);
        for i in 0..grid.n_nodes() {
            if grid.norm(i) > grid.radius / 2.0 + 1e-12 && vals[i].abs() > 1e-10 * scale {
                return Err(Error::SupportViolation(format!(
                    "`{}` is {:.3e} at |x| = {:.3}",
                    phi.name,
                    vals[i],
                    grid.norm(i)
                )));
            }
        }
        let op = crate::field::OperatorApplied::new(&chain.field, e);
        let a_phi: Vec<f64> = (0..grid.n_nodes())
            .map(|i| {
                if grid.is_boundary(i) {
                    Ok(0.0)
                } else {
                    let p = grid.point(i);
                    op.eval(s, &p[..chain.field.dim])
                }
            })
            .collect::<Result<_>>()?;
        let u_plus = chain.propagator(s + delta, t)?.apply(&vals)?;
        let u_minus = chain.propagator(s - delta, t)?.apply(&vals)?;
        let g_aphi = chain.propagator(s, t)?.apply(&a_phi)?;
        let mut res = 0.0f64;
        for &i in &core {
            let ds = (u_plus[i] - u_minus[i]) / (2.0 * delta);
            res = res.max((ds + g_aphi[i]).abs());
        }
        max_res = max_res.max(res);
        per.push((phi.name.clone(), res));
    }
    Ok(DerivativeRelationReport {
        per_function: per,
        max_residual: max_res,
    })
}
