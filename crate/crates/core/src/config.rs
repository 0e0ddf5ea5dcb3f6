//! Experiment configuration (JSON).

use crate::error::{Error, Result};
use crate::expr::parse_expr;
use crate::field::CoefficientField;
use crate::lyapunov::{GFunction, LyapunovData, WFunction};
use crate::ou::OuParams;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub field: FieldConfig,
    pub numerics: NumericsConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lyapunov: Option<LyapunovConfig>,
    /// exact reference coefficients when the field is of the linear-drift
    /// form q(t)φ'' + (a(t)x + f(t))φ'
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ou_reference: Option<OuRefConfig>,
    #[serde(default)]
    pub experiments: Experiments,
    #[serde(default = "default_out")]
    pub output_dir: String,
}

fn default_out() -> String {
    "out".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldConfig {
    pub dimension: usize,
    pub period: f64,
    pub q: Vec<Vec<String>>,
    pub b: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NumericsConfig {
    pub radius: f64,
    pub spacing: f64,
    pub dt: f64,
    #[serde(default = "default_theta")]
    pub theta: f64,
}

fn default_theta() -> f64 {
    1.0
}

/// W is either a closed-form expression or the blended logarithmic tail.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WSpec {
    Closed(String),
    TailLog { tail_log_r0: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LyapunovConfig {
    pub w: WSpec,
    pub g_c: f64,
    pub g_gamma: f64,
    pub r0: f64,
    #[serde(default)]
    pub lambda: f64,
    pub a: f64,
    pub c: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OuRefConfig {
    pub a: String,
    pub f: String,
    pub q: String,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Experiments {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validate: Option<ValidateExp>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lyapunov: Option<LyapunovExp>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solve: Option<SolveExp>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelExp>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tightness: Option<TightnessExp>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measures: Option<MeasuresExp>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumExp>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay: Option<DecayExp>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc: Option<McExp>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidateExp {
    #[serde(default = "default_nsamples")]
    pub n_samples: usize,
}

fn default_nsamples() -> usize {
    41
}

/// Expected verdicts for the Lyapunov checks (accept by default).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LyapunovExp {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect_drift: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect_dissipativity: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect_superlinear: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect_log_drift: Option<bool>,
    /// run the propagated-inequality and uniform-bound checks
    #[serde(default)]
    pub supersolution: bool,
    #[serde(default = "default_delta")]
    pub delta: f64,
}

fn default_delta() -> f64 {
    0.5
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveExp {
    #[serde(default)]
    pub s: f64,
    pub t: f64,
    /// sup-core agreement tolerance against the exact reference
    #[serde(default = "default_agree_tol")]
    pub ou_tol: f64,
}

fn default_agree_tol() -> f64 {
    5e-3
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelExp {
    #[serde(default)]
    pub s: f64,
    pub t: f64,
    #[serde(default)]
    pub base_points: Vec<f64>,
    #[serde(default)]
    pub export_csv: bool,
    /// tolerance for kernel mean/variance against the exact reference
    #[serde(default = "default_agree_tol")]
    pub moment_tol: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TightnessExp {
    #[serde(default)]
    pub s: f64,
    pub t: f64,
    pub eps: f64,
    /// sweep of later observation times for the monotone check
    #[serde(default)]
    pub sweep_times: Vec<f64>,
    /// run the same radius at doubled truncation and compare
    #[serde(default)]
    pub doubling_check: bool,
    /// None: report only; Some(true/false): enforce the dichotomy verdict
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect_tight: Option<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeasuresExp {
    #[serde(default = "default_phases")]
    pub phases: usize,
    /// invariance windows t-s as multiples of the period
    #[serde(default = "default_windows")]
    pub windows: Vec<f64>,
    #[serde(default = "default_inv_tol")]
    pub invariance_tol: f64,
    /// number of seeded power-iteration restarts for the uniqueness probe
    #[serde(default = "default_restarts")]
    pub uniqueness_restarts: usize,
    #[serde(default)]
    pub export_csv: bool,
}

fn default_phases() -> usize {
    8
}

fn default_windows() -> Vec<f64> {
    vec![0.25, 0.5, 1.0, 2.0]
}

fn default_inv_tol() -> f64 {
    1e-6
}

fn default_restarts() -> usize {
    5
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumExp {
    #[serde(default)]
    pub phase: f64,
    /// second phase for the phase-independence check
    #[serde(default = "default_phase2")]
    pub phase2: f64,
    #[serde(default)]
    pub doubling_check: bool,
    /// run the kernel-operator compactness probe at these p
    #[serde(default)]
    pub probe_p: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe_t: Option<f64>,
}

fn default_phase2() -> f64 {
    0.5
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecayExp {
    #[serde(default = "default_kmax")]
    pub k_max: usize,
    #[serde(default = "default_plist")]
    pub p_list: Vec<f64>,
    #[serde(default = "default_rate_tol")]
    pub rate_tol: f64,
}

fn default_kmax() -> usize {
    12
}

fn default_plist() -> Vec<f64> {
    vec![2.0, 4.0]
}

fn default_rate_tol() -> f64 {
    0.10
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McExp {
    #[serde(default)]
    pub s: f64,
    pub t: f64,
    #[serde(default)]
    pub x: f64,
    pub n: usize,
    pub em_dt: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_seed() -> u64 {
    1234
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<ExperimentConfig> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate_schema()?;
        Ok(cfg)
    }

    pub fn from_path(path: &std::path::Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path)?;
        ExperimentConfig::from_json(&text)
    }

    /// Structural checks beyond shape: expressions parse, dt divides T,
    /// spacing divides radius.
    pub fn validate_schema(&self) -> Result<()> {
        for (label, src) in self.expression_sources() {
            parse_expr(&src).map_err(|e| Error::Config(format!("{label}: {e}")))?;
        }
        let spp = self.field.period / self.numerics.dt;
        if (spp - spp.round()).abs() > 1e-9 * spp.max(1.0) {
            return Err(Error::Config(format!(
                "dt = {} must divide the period {}",
                self.numerics.dt, self.field.period
            )));
        }
        let m = self.numerics.radius / self.numerics.spacing;
        if (m - m.round()).abs() > 1e-9 * m.max(1.0) {
            return Err(Error::Config(format!(
                "spacing {} must divide radius {}",
                self.numerics.spacing, self.numerics.radius
            )));
        }
        if !(self.numerics.theta == 1.0 || self.numerics.theta == 0.5) {
            return Err(Error::Config("theta must be 1 or 0.5".into()));
        }
        Ok(())
    }

    fn expression_sources(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for (i, row) in self.field.q.iter().enumerate() {
            for (j, e) in row.iter().enumerate() {
                out.push((format!("field.q[{i}][{j}]"), e.clone()));
            }
        }
        for (i, e) in self.field.b.iter().enumerate() {
            out.push((format!("field.b[{i}]"), e.clone()));
        }
        if let Some(l) = &self.lyapunov {
            if let WSpec::Closed(src) = &l.w {
                out.push(("lyapunov.w".into(), src.clone()));
            }
        }
        if let Some(o) = &self.ou_reference {
            out.push(("ou_reference.a".into(), o.a.clone()));
            out.push(("ou_reference.f".into(), o.f.clone()));
            out.push(("ou_reference.q".into(), o.q.clone()));
        }
        out
    }

    pub fn build_field(&self) -> Result<CoefficientField> {
        CoefficientField::from_strings(
            self.field.dimension,
            self.field.period,
            &self.field.q,
            &self.field.b,
        )
    }

    pub fn build_lyapunov(&self) -> Result<Option<LyapunovData>> {
        let Some(l) = &self.lyapunov else {
            return Ok(None);
        };
        let w = match &l.w {
            WSpec::Closed(src) => WFunction::Closed(parse_expr(src)?),
            WSpec::TailLog { tail_log_r0 } => WFunction::TailLog { r0: *tail_log_r0 },
        };
        Ok(Some(LyapunovData {
            w,
            g: GFunction {
                c: l.g_c,
                gamma: l.g_gamma,
            },
            r0: l.r0,
            lambda: l.lambda,
            a: l.a,
            cc: l.c,
        }))
    }

    pub fn build_ou_reference(&self) -> Result<Option<OuParams>> {
        let Some(o) = &self.ou_reference else {
            return Ok(None);
        };
        Ok(Some(OuParams::new(
            parse_expr(&o.a)?,
            parse_expr(&o.f)?,
            parse_expr(&o.q)?,
            self.field.period,
        )?))
    }

    /// Halve the spacing and quarter the time step `k` times.
    pub fn refine(&mut self, k: u32) {
        for _ in 0..k {
            self.numerics.spacing /= 2.0;
            self.numerics.dt /= 4.0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_parses() {
        let text = r#"{
            "name": "mini",
            "field": {"dimension": 1, "period": 1.0, "q": [["1"]], "b": ["-x1"]},
            "numerics": {"radius": 4.0, "spacing": 0.1, "dt": 0.01}
        }"#;
        let cfg = ExperimentConfig::from_json(text).unwrap();
        assert_eq!(cfg.numerics.theta, 1.0);
        assert!(cfg.build_field().is_ok());
    }

    #[test]
    fn unparseable_drift_is_a_config_error_with_offset() {
        let text = r#"{
            "name": "bad",
            "field": {"dimension": 1, "period": 1.0, "q": [["1"]], "b": ["log("]},
            "numerics": {"radius": 4.0, "spacing": 0.1, "dt": 0.01}
        }"#;
        match ExperimentConfig::from_json(text) {
            Err(Error::Config(msg)) => assert!(msg.contains("offset 4"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn misaligned_dt_rejected() {
        let text = r#"{
            "name": "bad",
            "field": {"dimension": 1, "period": 1.0, "q": [["1"]], "b": ["-x1"]},
            "numerics": {"radius": 4.0, "spacing": 0.1, "dt": 0.3}
        }"#;
        assert!(ExperimentConfig::from_json(text).is_err());
    }

    #[test]
    fn refine_halves_h_quarters_dt() {
        let text = r#"{
            "name": "mini",
            "field": {"dimension": 1, "period": 1.0, "q": [["1"]], "b": ["-x1"]},
            "numerics": {"radius": 4.0, "spacing": 0.1, "dt": 0.01}
        }"#;
        let mut cfg = ExperimentConfig::from_json(text).unwrap();
        cfg.refine(1);
        assert!((cfg.numerics.spacing - 0.05).abs() < 1e-12);
        assert!((cfg.numerics.dt - 0.0025).abs() < 1e-12);
    }
}
