//! Time-periodic coefficient fields `(Q, b)` and test functions.

use crate::error::{Error, Result};
use crate::expr::{CompiledExpr, Expr, Var};
use crate::grid::Grid;
use serde::Serialize;
use std::sync::OnceLock;

/// The data of the elliptic operator
/// `A(t)φ = Tr(Q(t,x) D²φ) + <b(t,x), ∇φ>`
/// with `T`-periodic coefficients given in closed form.
///
/// In two dimensions `Q` must be diagonal; this keeps the discrete generator
/// an M-matrix (see the evolution module).
#[derive(Debug, Clone)]
pub struct CoefficientField {
    pub dim: usize,
    pub period: f64,
    pub q: Vec<Vec<Expr>>,
    pub b: Vec<Expr>,
    q_c: Vec<Vec<CompiledExpr>>,
    b_c: Vec<CompiledExpr>,
    eta0: OnceLock<f64>,
}

/// Outcome of sampling-based validation of a field.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub accepted: bool,
    /// smallest sampled eigenvalue of Q
    pub eta0: f64,
    /// max over samples of |e(t+T,x) - e(t,x)| / (1 + |e(t,x)|)
    pub max_periodicity_violation: f64,
    pub eval_errors: Vec<String>,
    /// witness of the rejection, if any
    pub witness: Option<RejectionWitness>,
    pub samples: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RejectionWitness {
    pub t: f64,
    pub x: Vec<f64>,
    pub reason: String,
}

fn is_zero_expr(e: &Expr) -> bool {
    matches!(e.simplify(), Expr::Num(v) if v == 0.0)
}

impl CoefficientField {
    pub fn new(dim: usize, period: f64, q: Vec<Vec<Expr>>, b: Vec<Expr>) -> Result<Self> {
        if !(dim == 1 || dim == 2) {
            return Err(Error::Field(format!("dimension must be 1 or 2, got {dim}")));
        }
        if period <= 0.0 {
            return Err(Error::Field("period must be positive".into()));
        }
        if q.len() != dim || q.iter().any(|row| row.len() != dim) {
            return Err(Error::Field(format!("Q must be a {dim}x{dim} matrix of expressions")));
        }
        if b.len() != dim {
            return Err(Error::Field(format!("b must have {dim} components")));
        }
        if dim == 2 && (!is_zero_expr(&q[0][1]) || !is_zero_expr(&q[1][0])) {
            return Err(Error::Field(
                "in two dimensions the off-diagonal entries of Q must be the zero expression".into(),
            ));
        }
        if dim == 1 {
            for e in q.iter().flatten().chain(b.iter()) {
                if e.depends_on(Var::X2) {
                    return Err(Error::Field(
                        "one-dimensional field must not reference x2".into(),
                    ));
                }
            }
        }
        let q_c = q
            .iter()
            .map(|row| row.iter().map(|e| e.compile()).collect())
            .collect();
        let b_c = b.iter().map(|e| e.compile()).collect();
        Ok(CoefficientField {
            dim,
            period,
            q,
            b,
            q_c,
            b_c,
            eta0: OnceLock::new(),
        })
    }

    /// Parse all entries from strings.
    pub fn from_strings(dim: usize, period: f64, q: &[Vec<String>], b: &[String]) -> Result<Self> {
        let q_parsed: Vec<Vec<Expr>> = q
            .iter()
            .map(|row| row.iter().map(|s| crate::expr::parse_expr(s)).collect::<std::result::Result<_, _>>())
            .collect::<std::result::Result<_, _>>()?;
        let b_parsed: Vec<Expr> = b
            .iter()
            .map(|s| crate::expr::parse_expr(s))
            .collect::<std::result::Result<_, _>>()?;
        CoefficientField::new(dim, period, q_parsed, b_parsed)
    }

    /// Sampled ellipticity floor, available after successful validation.
    pub fn eta0(&self) -> Option<f64> {
        self.eta0.get().copied()
    }

    /// Diagonal of Q at `(t, x)`.
    pub fn q_diag(&self, t: f64, x: &[f64]) -> Result<[f64; 2]> {
        let mut out = [0.0; 2];
        let mut stack = Vec::new();
        for k in 0..self.dim {
            out[k] = self.q_c[k][k]
                .eval_with(t, x[0], x.get(1).copied().unwrap_or(0.0), &mut stack)
                .map_err(|e| Error::eval_at(t, x, e))?;
        }
        Ok(out)
    }

    /// Drift vector at `(t, x)`.
    pub fn b_vec(&self, t: f64, x: &[f64]) -> Result<[f64; 2]> {
        let mut out = [0.0; 2];
        let mut stack = Vec::new();
        for k in 0..self.dim {
            out[k] = self.b_c[k]
                .eval_with(t, x[0], x.get(1).copied().unwrap_or(0.0), &mut stack)
                .map_err(|e| Error::eval_at(t, x, e))?;
        }
        Ok(out)
    }

    /// Full Q matrix at `(t, x)` (off-diagonals are zero for d = 2).
    pub fn q_matrix(&self, t: f64, x: &[f64]) -> Result<[[f64; 2]; 2]> {
        let mut out = [[0.0; 2]; 2];
        let mut stack = Vec::new();
        for i in 0..self.dim {
            for j in 0..self.dim {
                out[i][j] = self.q_c[i][j]
                    .eval_with(t, x[0], x.get(1).copied().unwrap_or(0.0), &mut stack)
                    .map_err(|e| Error::eval_at(t, x, e))?;
            }
        }
        Ok(out)
    }

    /// `A(t)f(x)` with symbolic derivatives of `f`.
    pub fn apply_operator(&self, f: &Expr, t: f64, x: &[f64]) -> Result<f64> {
        OperatorApplied::new(self, f).eval(t, x)
    }

    /// Sampling-based validation: symmetry/ellipticity of Q and
    /// T-periodicity of all entries. Fills the ellipticity floor on success.
    pub fn validate(&self, sample_radius: f64, n_samples: usize) -> Result<ValidationReport> {
        if sample_radius <= 0.0 {
            return Err(Error::InvalidArgument("sample_radius must be positive".into()));
        }
        let n = n_samples.max(3);
        let mut xs: Vec<Vec<f64>> = Vec::new();
        let axis: Vec<f64> = (0..n)
            .map(|i| -sample_radius + 2.0 * sample_radius * i as f64 / (n - 1) as f64)
            .collect();
        match self.dim {
            1 => {
                for &v in &axis {
                    xs.push(vec![v]);
                }
                xs.push(vec![0.0]);
            }
            _ => {
                let stride = (n / 16).max(1);
                for (i, &v1) in axis.iter().enumerate() {
                    for (j, &v2) in axis.iter().enumerate() {
                        if i % stride == 0 && j % stride == 0 {
                            xs.push(vec![v1, v2]);
                        }
                    }
                }
                xs.push(vec![0.0, 0.0]);
            }
        }
        let times: Vec<f64> = (0..64).map(|k| self.period * k as f64 / 64.0).collect();

        let mut eta0 = f64::INFINITY;
        let mut max_viol: f64 = 0.0;
        let mut witness: Option<RejectionWitness> = None;
        let mut errors = Vec::new();
        let mut samples = 0usize;

        let entries: Vec<&Expr> = self.q.iter().flatten().chain(self.b.iter()).collect();
        for &t in &times {
            for x in &xs {
                samples += 1;
                match self.q_matrix(t, x) {
                    Ok(qm) => {
                        let asym = (qm[0][1] - qm[1][0]).abs();
                        if self.dim == 2 && asym > 1e-12 {
                            witness.get_or_insert(RejectionWitness {
                                t,
                                x: x.clone(),
                                reason: format!("Q asymmetry {asym:.3e}"),
                            });
                        }
                        let lam_min = match self.dim {
                            1 => qm[0][0],
                            _ => qm[0][0].min(qm[1][1]),
                        };
                        if lam_min < eta0 {
                            eta0 = lam_min;
                            if lam_min <= 0.0 && witness.is_none() {
                                witness = Some(RejectionWitness {
                                    t,
                                    x: x.clone(),
                                    reason: format!("smallest eigenvalue of Q is {lam_min}"),
                                });
                            }
                        }
                    }
                    Err(e) => errors.push(e.to_string()),
                }
                for e in &entries {
                    let now = e.eval(t, x);
                    let shifted = e.eval(t + self.period, x);
                    match (now, shifted) {
                        (Ok(v0), Ok(v1)) => {
                            let viol = (v1 - v0).abs() / (1.0 + v0.abs());
                            if viol > max_viol {
                                max_viol = viol;
                                if viol > 1e-12 && witness.is_none() {
                                    witness = Some(RejectionWitness {
                                        t,
                                        x: x.clone(),
                                        reason: format!("periodicity violation {viol:.3e}"),
                                    });
                                }
                            }
                        }
                        (Err(err), _) | (_, Err(err)) => {
                            if errors.len() < 8 {
                                errors.push(format!("at (t={t}, x={x:?}): {err}"));
                            }
                        }
                    }
                }
            }
        }

        if !eta0.is_finite() {
            eta0 = 0.0;
        }
        let accepted = eta0 > 0.0 && max_viol <= 1e-12 && errors.is_empty();
        if accepted {
            let _ = self.eta0.set(eta0);
        }
        Ok(ValidationReport {
            accepted,
            eta0,
            max_periodicity_violation: max_viol,
            eval_errors: errors,
            witness,
            samples,
        })
    }
}

/// `A(t)f` with the symbolic derivatives of `f` precomputed, for sweeps.
pub struct OperatorApplied {
    dim: usize,
    q_c: Vec<CompiledExpr>,
    b_c: Vec<CompiledExpr>,
    grad: Vec<CompiledExpr>,
    hess_diag: Vec<CompiledExpr>,
}

impl OperatorApplied {
    pub fn new(field: &CoefficientField, f: &Expr) -> OperatorApplied {
        let vars = [Var::X1, Var::X2];
        let grad_sym: Vec<Expr> = (0..field.dim).map(|k| f.differentiate(vars[k])).collect();
        let hess_sym: Vec<Expr> = (0..field.dim)
            .map(|k| grad_sym[k].differentiate(vars[k]))
            .collect();
        OperatorApplied {
            dim: field.dim,
            q_c: (0..field.dim).map(|k| field.q[k][k].compile()).collect(),
            b_c: field.b.iter().map(|e| e.compile()).collect(),
            grad: grad_sym.iter().map(|e| e.compile()).collect(),
            hess_diag: hess_sym.iter().map(|e| e.compile()).collect(),
        }
    }

    pub fn eval(&self, t: f64, x: &[f64]) -> Result<f64> {
        let x2 = x.get(1).copied().unwrap_or(0.0);
        let mut stack = Vec::new();
        let mut acc = 0.0;
        for k in 0..self.dim {
            let qk = self.q_c[k]
                .eval_with(t, x[0], x2, &mut stack)
                .map_err(|e| Error::eval_at(t, x, e))?;
            let hk = self.hess_diag[k]
                .eval_with(t, x[0], x2, &mut stack)
                .map_err(|e| Error::eval_at(t, x, e))?;
            let bk = self.b_c[k]
                .eval_with(t, x[0], x2, &mut stack)
                .map_err(|e| Error::eval_at(t, x, e))?;
            let gk = self.grad[k]
                .eval_with(t, x[0], x2, &mut stack)
                .map_err(|e| Error::eval_at(t, x, e))?;
            acc += qk * hk + bk * gk;
        }
        Ok(acc)
    }
}

/// A test function: either closed form or node values bound to a grid.
#[derive(Debug, Clone)]
pub struct TestFunction {
    pub name: String,
    pub kind: TestFunctionKind,
    pub bounded: bool,
    pub compact_support: bool,
}

#[derive(Debug, Clone)]
pub enum TestFunctionKind {
    Closed(Expr),
    /// node values always carry the identity of their grid
    Nodes { grid_id: u64, values: Vec<f64> },
}

impl TestFunction {
    pub fn closed(name: &str, e: Expr) -> TestFunction {
        TestFunction {
            name: name.into(),
            kind: TestFunctionKind::Closed(e),
            bounded: true,
            compact_support: false,
        }
    }

    pub fn nodes(name: &str, grid: &Grid, values: Vec<f64>) -> TestFunction {
        assert_eq!(values.len(), grid.n_nodes());
        TestFunction {
            name: name.into(),
            kind: TestFunctionKind::Nodes {
                grid_id: grid.id,
                values,
            },
            bounded: true,
            compact_support: false,
        }
    }

    /// Node values on `grid`, evaluating closed forms at time `t`.
    pub fn values_on(&self, grid: &Grid, t: f64) -> Result<Vec<f64>> {
        match &self.kind {
            TestFunctionKind::Closed(e) => {
                let c = e.compile();
                let mut stack = Vec::new();
                (0..grid.n_nodes())
                    .map(|i| {
                        let p = grid.point(i);
                        c.eval_with(t, p[0], p[1], &mut stack)
                            .map_err(|err| Error::eval_at(t, &p, err))
                    })
                    .collect()
            }
            TestFunctionKind::Nodes { grid_id, values } => {
                if *grid_id != grid.id {
                    return Err(Error::GridMismatch(format!(
                        "test function `{}` carries node values of a different grid",
                        self.name
                    )));
                }
                Ok(values.clone())
            }
        }
    }

    /// Pointwise evaluation; node-value functions use nearest-node lookup
    /// on their own grid and are zero outside the box.
    pub fn eval_at(&self, grid: &Grid, t: f64, x: &[f64]) -> Result<f64> {
        match &self.kind {
            TestFunctionKind::Closed(e) => e.eval(t, x).map_err(|err| Error::eval_at(t, x, err)),
            TestFunctionKind::Nodes { grid_id, values } => {
                if *grid_id != grid.id {
                    return Err(Error::GridMismatch("node values bound to a different grid".into()));
                }
                Ok(grid.node_near(x).map(|i| values[i]).unwrap_or(0.0))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expr;

    fn ou_field() -> CoefficientField {
        CoefficientField::from_strings(
            1,
            1.0,
            &[vec!["1".into()]],
            &["-x1+cos(2*pi*t)".into()],
        )
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

    #[test]
    fn ou_benchmark_validates_with_unit_floor() {
        let f = ou_field();
        let r = f.validate(10.0, 41).unwrap();
        assert!(r.accepted, "{r:?}");
        assert!((r.eta0 - 1.0).abs() < 1e-12);
        assert!(r.max_periodicity_violation <= 1e-12);
        assert_eq!(f.eta0(), Some(1.0));
    }

    #[test]
    fn cubic_benchmark_validates_with_unit_floor() {
        let r = cubic_field().validate(10.0, 41).unwrap();
        assert!(r.accepted);
        assert!((r.eta0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_diffusion_rejected_with_witness() {
        let f = CoefficientField::from_strings(1, 1.0, &[vec!["t".into()]], &["0".into()]).unwrap();
        let r = f.validate(2.0, 9).unwrap();
        assert!(!r.accepted);
        assert_eq!(r.eta0, 0.0);
        assert!(r.witness.is_some());
    }

    #[test]
    fn aperiodic_coefficient_rejected() {
        let f =
            CoefficientField::from_strings(1, 1.0, &[vec!["1".into()]], &["-x1*(1+0.1*t)".into()])
                .unwrap();
        let r = f.validate(2.0, 9).unwrap();
        assert!(!r.accepted);
        assert!(r.max_periodicity_violation > 1e-6);
    }

    #[test]
    fn cross_diffusion_rejected_in_2d() {
        let q = vec![
            vec!["1".to_string(), "0.1".to_string()],
            vec!["0.1".to_string(), "1".to_string()],
        ];
        let b = vec!["-x1".to_string(), "-x2".to_string()];
        assert!(CoefficientField::from_strings(2, 1.0, &q, &b).is_err());
    }

    #[test]
    fn apply_operator_hand_values() {
        // OU: A(x²) = 2 + (-3+1)·6 = -10 at t=0, x=3
        let f = ou_field();
        let phi = parse_expr("x1^2").unwrap();
        let v = f.apply_operator(&phi, 0.0, &[3.0]).unwrap();
        assert!((v - (-10.0)).abs() < 1e-12, "got {v}");

        // constants are annihilated
        let c = parse_expr("7").unwrap();
        assert_eq!(f.apply_operator(&c, 0.3, &[1.7]).unwrap(), 0.0);

        // cubic with log: -1/16 - 16 at t=0, x=4
        let g = cubic_field();
        let lg = parse_expr("log(x1)").unwrap();
        let v = g.apply_operator(&lg, 0.0, &[4.0]).unwrap();
        assert!((v - (-16.0625)).abs() < 1e-10, "got {v}");
    }

    #[test]
    fn constant_spd_diffusion_floor_is_smallest_entry() {
        let q = vec![
            vec!["2".to_string(), "0".to_string()],
            vec!["0".to_string(), "0.5".to_string()],
        ];
        let b = vec!["-x1".to_string(), "-x2".to_string()];
        let f = CoefficientField::from_strings(2, 1.0, &q, &b).unwrap();
        let r = f.validate(3.0, 17).unwrap();
        assert!(r.accepted);
        assert!((r.eta0 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn node_values_carry_grid_identity() {
        let g = Grid::new(1, 2.0, 0.5).unwrap();
        let other = Grid::new(1, 4.0, 0.5).unwrap();
        let tf = TestFunction::nodes("ind", &g, vec![1.0; g.n_nodes()]);
        assert!(tf.values_on(&g, 0.0).is_ok());
        assert!(tf.values_on(&other, 0.0).is_err());
    }
}
