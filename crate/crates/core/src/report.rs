//! Run reports and CSV export helpers.

use crate::grid::Grid;
use crate::measures::{EvolutionMeasureFamily, TransitionRow};
use serde::{Deserialize, Serialize};

/// One tested number: value, the tolerance it was tested against, verdict.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckLine {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckLine {
    /// `|value| <= tol`
    pub fn abs_le(name: &str, value: f64, tol: f64) -> CheckLine {
        CheckLine {
            name: name.into(),
            value,
            tolerance: tol,
            pass: value.abs() <= tol,
        }
    }

    /// `value <= tol`
    pub fn le(name: &str, value: f64, tol: f64) -> CheckLine {
        CheckLine {
            name: name.into(),
            value,
            tolerance: tol,
            pass: value <= tol,
        }
    }

    /// boolean expectation; tolerance recorded as 0
    pub fn expect(name: &str, got: bool, want: bool) -> CheckLine {
        CheckLine {
            name: name.into(),
            value: if got { 1.0 } else { 0.0 },
            tolerance: if want { 1.0 } else { 0.0 },
            pass: got == want,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Pass,
    Fail,
    /// diagnostic output with no enforced expectation
    Info,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub verdict: Verdict,
    pub checks: Vec<CheckLine>,
    /// free-form experiment payload (margins, spectra, curves, ...)
    pub details: serde_json::Value,
}

impl ExperimentReport {
    pub fn new(name: &str, checks: Vec<CheckLine>, details: serde_json::Value) -> Self {
        let verdict = if checks.is_empty() {
            Verdict::Info
        } else if checks.iter().all(|c| c.pass) {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        ExperimentReport {
            name: name.into(),
            verdict,
            checks,
            details,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Provenance {
    pub version: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub config: serde_json::Value,
    pub experiments: Vec<ExperimentReport>,
    pub provenance: Provenance,
}

impl RunReport {
    pub fn all_passed(&self) -> bool {
        self.experiments.iter().all(|e| e.verdict != Verdict::Fail)
    }

    /// The reproducible payload: everything except wall-clock provenance.
    pub fn stable_json(&self) -> String {
        serde_json::to_string_pretty(&serde_json::json!({
            "config": self.config,
            "experiments": self.experiments,
        }))
        .expect("report serialization")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization")
    }
}

fn fmt_f(v: f64) -> String {
    format!("{v:.17e}")
}

/// Kernel matrix rows to CSV, row-major, node coordinates in the header.
pub fn kernel_to_csv(grid: &Grid, rows: &[TransitionRow]) -> String {
    let mut out = String::new();
    let coords: Vec<String> = (0..grid.n_nodes())
        .map(|j| {
            let p = grid.point(j);
            if grid.dim == 1 {
                format!("y={}", p[0])
            } else {
                format!("y=({},{})", p[0], p[1])
            }
        })
        .collect();
    out.push_str("base,defect,");
    out.push_str(&coords.join(","));
    out.push('\n');
    for row in rows {
        let p = grid.point(row.base_index);
        out.push_str(&format!("{},{}", p[0], fmt_f(row.defect)));
        for w in &row.weights {
            out.push(',');
            out.push_str(&fmt_f(*w));
        }
        out.push('\n');
    }
    out
}

/// Node values to CSV with coordinates.
pub fn values_to_csv(grid: &Grid, columns: &[(&str, &[f64])]) -> String {
    let mut out = String::from("x");
    if grid.dim == 2 {
        out.push_str(",y");
    }
    for (name, _) in columns {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for i in 0..grid.n_nodes() {
        let p = grid.point(i);
        out.push_str(&p[0].to_string());
        if grid.dim == 2 {
            out.push(',');
            out.push_str(&p[1].to_string());
        }
        for (_, vals) in columns {
            out.push(',');
            out.push_str(&fmt_f(vals[i]));
        }
        out.push('\n');
    }
    out
}

/// Measure family to CSV: phase, node coordinate, weight, density.
pub fn measures_to_csv(grid: &Grid, family: &EvolutionMeasureFamily) -> String {
    let vol = grid.cell_volume();
    let mut out = String::from("phase,x,weight,density\n");
    for pm in &family.phases {
        for (j, w) in pm.weights.iter().enumerate() {
            let p = grid.point(j);
            out.push_str(&format!("{},{},{},{}\n", pm.phase, p[0], fmt_f(*w), fmt_f(w / vol)));
        }
    }
    out
}

/// Decay curves `(k, e_k)` per tag.
pub fn curves_to_csv(curves: &[(String, Vec<(usize, f64)>)]) -> String {
    let mut out = String::from("tag,k,e_k\n");
    for (tag, curve) in curves {
        for (k, e) in curve {
            out.push_str(&format!("{tag},{k},{}\n", fmt_f(*e)));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_aggregation() {
        let rep = ExperimentReport::new(
            "x",
            vec![
                CheckLine::abs_le("a", 0.5, 1.0),
                CheckLine::le("b", -2.0, 0.0),
            ],
            serde_json::json!({}),
        );
        assert_eq!(rep.verdict, Verdict::Pass);
        let rep = ExperimentReport::new(
            "x",
            vec![CheckLine::abs_le("a", 2.0, 1.0)],
            serde_json::json!({}),
        );
        assert_eq!(rep.verdict, Verdict::Fail);
        let rep = ExperimentReport::new("x", vec![], serde_json::json!({}));
        assert_eq!(rep.verdict, Verdict::Info);
    }

    #[test]
    fn csv_exports_have_headers() {
        let grid = Grid::new(1, 1.0, 0.5).unwrap();
        let vals = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let csv = values_to_csv(&grid, &[("u", &vals)]);
        assert!(csv.starts_with("x,u\n"));
        assert_eq!(csv.lines().count(), 6);
    }
}
