//! Experiment orchestration: builds the discretization from a config, runs
//! the requested experiments, writes report.json, CSV data and SVG plots.

use crate::bench;
use crate::config::{ExperimentConfig, Experiments};
use crate::error::{Error, Result};
use crate::evolution::{self, FactorChain};
use crate::expr::parse_expr;
use crate::field::TestFunction;
use crate::grid::Grid;
use crate::lyapunov::{self, SampleSpec};
use crate::measures::{self, left_perron, periodic_measures};
use crate::montecarlo;
use crate::ou::OuParams;
use crate::report::{CheckLine, ExperimentReport, Provenance, RunReport, Verdict};
use crate::spectral::{self, EigenMethod};
use crate::svg;
use serde_json::json;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Validate,
    Lyapunov,
    Solve,
    Kernel,
    Tightness,
    Measures,
    Spectrum,
    Decay,
    Mc,
    All,
}

impl Subcommand {
    pub fn parse(s: &str) -> Option<Subcommand> {
        Some(match s {
            "validate" => Subcommand::Validate,
            "lyapunov" => Subcommand::Lyapunov,
            "solve" => Subcommand::Solve,
            "kernel" => Subcommand::Kernel,
            "tightness" => Subcommand::Tightness,
            "measures" => Subcommand::Measures,
            "spectrum" => Subcommand::Spectrum,
            "decay" => Subcommand::Decay,
            "mc" => Subcommand::Mc,
            "all" => Subcommand::All,
            _ => return None,
        })
    }
}

/// Runtime overrides from the command line.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub refine: u32,
    pub parallel: bool,
}

struct Ctx {
    cfg: ExperimentConfig,
    field: Arc<crate::field::CoefficientField>,
    grid: Arc<Grid>,
    chain: Arc<FactorChain>,
    ou_ref: Option<OuParams>,
    lyap: Option<crate::lyapunov::LyapunovData>,
    out_dir: PathBuf,
    seed_override: Option<u64>,
}

impl Ctx {
    fn new(mut cfg: ExperimentConfig, over: &Overrides) -> Result<Ctx> {
        cfg.refine(over.refine);
        let field = Arc::new(cfg.build_field()?);
        let grid = Arc::new(Grid::new(
            field.dim,
            cfg.numerics.radius,
            cfg.numerics.spacing,
        )?);
        let chain = FactorChain::new(field.clone(), grid.clone(), cfg.numerics.dt, cfg.numerics.theta)?;
        let ou_ref = cfg.build_ou_reference()?;
        let lyap = cfg.build_lyapunov()?;
        let out_dir = over
            .out_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from(&cfg.output_dir));
        Ok(Ctx {
            cfg,
            field,
            grid,
            chain,
            ou_ref,
            lyap,
            out_dir,
            seed_override: over.seed,
        })
    }

    fn write(&self, rel: &str, content: &str) -> Result<()> {
        let path = self.out_dir.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(path, content)?;
        Ok(())
    }

    /// Build a chain for the same field on a doubled box.
    fn doubled_chain(&self) -> Result<Arc<FactorChain>> {
        let grid = Arc::new(Grid::new(
            self.field.dim,
            2.0 * self.grid.radius,
            self.grid.spacing,
        )?);
        FactorChain::new(self.field.clone(), grid, self.chain.dt, self.chain.theta)
    }
}

/// Run a subcommand against a config. Writes artifacts under the output
/// directory and returns the full report.
pub fn run(cfg: ExperimentConfig, sub: Subcommand, over: &Overrides) -> Result<RunReport> {
    let started = Instant::now();
    let ctx = Ctx::new(cfg, over)?;
    let config_echo = serde_json::to_value(&ctx.cfg).map_err(|e| Error::Config(e.to_string()))?;

    let wanted: Vec<Subcommand> = match sub {
        Subcommand::All => vec![
            Subcommand::Validate,
            Subcommand::Lyapunov,
            Subcommand::Solve,
            Subcommand::Kernel,
            Subcommand::Tightness,
            Subcommand::Measures,
            Subcommand::Spectrum,
            Subcommand::Decay,
            Subcommand::Mc,
        ],
        one => vec![one],
    };

    let mut experiments = Vec::new();
    for w in wanted {
        if let Some(rep) = run_one(&ctx, w)? {
            experiments.push(rep);
        }
    }
    if experiments.is_empty() {
        return Err(Error::Config(format!(
            "config `{}` does not enable the requested experiment",
            ctx.cfg.name
        )));
    }

    let report = RunReport {
        config: config_echo,
        experiments,
        provenance: Provenance {
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: ctx.seed_override.or(ctx.cfg.experiments.mc.as_ref().map(|m| m.seed)),
            wall_time_s: started.elapsed().as_secs_f64(),
        },
    };
    ctx.write("report.json", &report.to_json())?;
    Ok(report)
}

fn run_one(ctx: &Ctx, sub: Subcommand) -> Result<Option<ExperimentReport>> {
    let e: &Experiments = &ctx.cfg.experiments;
    Ok(match sub {
        Subcommand::Validate => e.validate.as_ref().map(|x| exp_validate(ctx, x)).transpose()?,
        Subcommand::Lyapunov => e.lyapunov.as_ref().map(|x| exp_lyapunov(ctx, x)).transpose()?,
        Subcommand::Solve => e.solve.as_ref().map(|x| exp_solve(ctx, x)).transpose()?,
        Subcommand::Kernel => e.kernel.as_ref().map(|x| exp_kernel(ctx, x)).transpose()?,
        Subcommand::Tightness => e.tightness.as_ref().map(|x| exp_tightness(ctx, x)).transpose()?,
        Subcommand::Measures => e.measures.as_ref().map(|x| exp_measures(ctx, x)).transpose()?,
        Subcommand::Spectrum => e.spectrum.as_ref().map(|x| exp_spectrum(ctx, x)).transpose()?,
        Subcommand::Decay => e.decay.as_ref().map(|x| exp_decay(ctx, x)).transpose()?,
        Subcommand::Mc => e.mc.as_ref().map(|x| exp_mc(ctx, x)).transpose()?,
        Subcommand::All => unreachable!("expanded by caller"),
    })
}

fn exp_validate(ctx: &Ctx, x: &crate::config::ValidateExp) -> Result<ExperimentReport> {
    let rep = ctx.field.validate(ctx.grid.radius, x.n_samples)?;
    let checks = vec![
        CheckLine::expect("field accepted", rep.accepted, true),
        CheckLine::le("eta0 positive (value is -eta0)", -rep.eta0, 0.0),
        CheckLine::le("periodicity violation", rep.max_periodicity_violation, 1e-12),
    ];
    Ok(ExperimentReport::new(
        "validate",
        checks,
        serde_json::to_value(&rep).unwrap(),
    ))
}

fn exp_lyapunov(ctx: &Ctx, x: &crate::config::LyapunovExp) -> Result<ExperimentReport> {
    let l = ctx
        .lyap
        .clone()
        .ok_or_else(|| Error::Config("lyapunov experiment needs a lyapunov block".into()))?;
    let spec = SampleSpec::new(ctx.grid.spacing, 4.0 * ctx.grid.radius);
    let mut checks = Vec::new();
    let mut details = serde_json::Map::new();

    let drift = lyapunov::check_drift_bound(&ctx.field, &l, &spec)?;
    if let Some(want) = x.expect_drift {
        checks.push(CheckLine::expect("drift bound verdict", drift.accepted, want));
    }
    details.insert("drift".into(), serde_json::to_value(&drift).unwrap());

    let diss = lyapunov::check_dissipativity(&ctx.field, &l, &spec)?;
    if let Some(want) = x.expect_dissipativity {
        checks.push(CheckLine::expect("dissipativity verdict", diss.accepted, want));
    }
    details.insert("dissipativity".into(), serde_json::to_value(&diss).unwrap());

    let sup = lyapunov::check_superlinear(&ctx.field, &l, &spec)?;
    if let Some(want) = x.expect_superlinear {
        checks.push(CheckLine::expect("superlinear verdict", sup.accepted, want));
    }
    details.insert("superlinear".into(), serde_json::to_value(&sup).unwrap());

    let logd = lyapunov::check_log_drift(&ctx.field, l.g.c, l.g.gamma, l.r0, &spec)?;
    if let Some(want) = x.expect_log_drift {
        checks.push(CheckLine::expect("log-drift verdict", logd.accepted, want));
    }
    details.insert("log_drift".into(), serde_json::to_value(&logd).unwrap());

    // comparison problem: integrator against the closed form
    if l.g.gamma > 1.0 {
        let sol = lyapunov::solve_comparison(100.0, l.g.c, l.g.gamma, 1.0, 0.01)?;
        let worst_rel = sol
            .times
            .iter()
            .zip(&sol.values)
            .map(|(t, v)| ((v - sol.closed_form(*t)) / sol.closed_form(*t)).abs())
            .fold(0.0f64, f64::max);
        checks.push(CheckLine::le("comparison ODE vs closed form (rel)", worst_rel, 1e-6));
        details.insert("comparison".into(), serde_json::to_value(&sol).unwrap());
    }

    if x.supersolution {
        let t = ctx.field.period;
        let rep = lyapunov::supersolution_check(&ctx.chain, 0.0, t / 2.0, t, &l, 64)?;
        checks.push(CheckLine::expect("propagated-difference inequality", rep.maggv_holds, true));
        checks.push(CheckLine::expect("comparison (beta) inequality", rep.beta_holds, true));
        details.insert("supersolution".into(), serde_json::to_value(&rep).unwrap());

        // the initial-condition-free bound applies in the accepted
        // superlinear regime only
        if sup.accepted && l.g.gamma > 1.0 {
            let ub = lyapunov::uniform_bound_check(&ctx.chain, &l, x.delta, 0.05)?;
            checks.push(CheckLine::expect("uniform bound sup G(t,t-δ)W <= C(δ)+5%", ub.holds, true));
            details.insert("uniform_bound".into(), serde_json::to_value(&ub).unwrap());
        }
    }
    Ok(ExperimentReport::new("lyapunov", checks, details.into()))
}

fn exp_solve(ctx: &Ctx, x: &crate::config::SolveExp) -> Result<ExperimentReport> {
    let battery = bench::standard_battery(&ctx.grid);
    let mut checks = Vec::new();
    let mut details = serde_json::Map::new();
    let core = ctx.grid.core_indices(0.5);
    let guaranteed = ctx.chain.positivity_guaranteed();
    let mut flags = Vec::new();
    let mut csv_cols: Vec<(String, Vec<f64>)> = Vec::new();
    for phi in &battery {
        let res = evolution::propagate(&ctx.chain, x.s, x.t, phi)?;
        let contraction = CheckLine::le(
            &format!("contraction sup|G phi|-sup|phi| ({})", phi.name),
            res.sup_out - res.sup_in,
            1e-12,
        );
        let vals = phi.values_on(&ctx.grid, x.s)?;
        let positivity = if vals.iter().all(|&v| v >= 0.0) {
            let min = res.values.iter().fold(f64::INFINITY, |m, &v| m.min(v));
            Some(CheckLine::le(
                &format!("positivity (-min) ({})", phi.name),
                -min,
                1e-12,
            ))
        } else {
            None
        };
        // theta = 0.5 carries no positivity/contraction guarantee: the
        // values are reported as flags, not enforced
        if guaranteed {
            checks.push(contraction);
            checks.extend(positivity);
        } else {
            flags.push(contraction);
            flags.extend(positivity);
        }
        // exact-agreement applies to the smooth closed-form members; the
        // smoothed indicator's kink smears at grid scale by construction
        let smooth = matches!(phi.kind, crate::field::TestFunctionKind::Closed(_));
        if let (Some(ou), true) = (&ctx.ou_ref, smooth) {
            let mut err = 0.0f64;
            for &i in &core {
                let p = ctx.grid.point(i);
                let exact = ou.expectation(x.s, x.t, p[0], &|y| phi.eval_at(&ctx.grid, x.s, &[y]))?;
                err = err.max((res.values[i] - exact).abs());
            }
            checks.push(CheckLine::le(
                &format!("sup-core |PDE - exact| ({})", phi.name),
                err,
                x.ou_tol,
            ));
        }
        csv_cols.push((phi.name.clone(), res.values));
    }
    let cols: Vec<(&str, &[f64])> = csv_cols
        .iter()
        .map(|(n, v)| (n.as_str(), v.as_slice()))
        .collect();
    ctx.write("solve.csv", &crate::report::values_to_csv(&ctx.grid, &cols))?;
    details.insert("battery".into(), json!(battery.iter().map(|b| b.name.clone()).collect::<Vec<_>>()));
    details.insert("positivity_guaranteed".into(), json!(guaranteed));
    if !flags.is_empty() {
        details.insert(
            "unguaranteed_markov_flags".into(),
            serde_json::to_value(&flags).unwrap(),
        );
    }
    Ok(ExperimentReport::new("solve", checks, details.into()))
}

fn exp_kernel(ctx: &Ctx, x: &crate::config::KernelExp) -> Result<ExperimentReport> {
    let prop = ctx.chain.propagator(x.s, x.t)?;
    let mut checks = Vec::new();
    let mut details = serde_json::Map::new();
    let bases: Vec<usize> = if x.base_points.is_empty() {
        vec![ctx.grid.node_near(&[0.0, 0.0]).unwrap()]
    } else {
        x.base_points
            .iter()
            .map(|&b| {
                ctx.grid
                    .node_near(&[b, 0.0])
                    .ok_or_else(|| Error::InvalidArgument(format!("base point {b} outside the box")))
            })
            .collect::<Result<_>>()?
    };
    let mut rows = Vec::new();
    for &i in &bases {
        let row = prop.kernel_row(i)?;
        let sum = row.mass();
        checks.push(CheckLine::le(
            &format!("row mass at x={} (<= 1)", ctx.grid.point(i)[0]),
            sum,
            1.0 + 1e-12,
        ));
        checks.push(CheckLine::le(
            "negative weight floor",
            -row.weights.iter().fold(0.0f64, |m, &w| m.min(w)),
            0.0,
        ));
        if let Some(ou) = &ctx.ou_ref {
            let (mean, var) = row.moments(&ctx.grid);
            let (em, ev) = ou.exact_moments(x.s, x.t, ctx.grid.point(i)[0])?;
            checks.push(CheckLine::abs_le(
                &format!("kernel mean error at x={}", ctx.grid.point(i)[0]),
                mean - em,
                x.moment_tol,
            ));
            checks.push(CheckLine::abs_le(
                &format!("kernel variance error at x={}", ctx.grid.point(i)[0]),
                var - ev,
                x.moment_tol,
            ));
        }
        rows.push(row);
    }
    if x.export_csv {
        ctx.write("kernel.csv", &crate::report::kernel_to_csv(&ctx.grid, &rows))?;
    }
    details.insert(
        "defects".into(),
        json!(rows.iter().map(|r| r.defect).collect::<Vec<_>>()),
    );
    Ok(ExperimentReport::new("kernel", checks, details.into()))
}

fn exp_tightness(ctx: &Ctx, x: &crate::config::TightnessExp) -> Result<ExperimentReport> {
    let prop = ctx.chain.propagator(x.s, x.t)?;
    let rep = measures::tightness_radius(&prop, x.eps)?;
    let mut checks = Vec::new();
    let mut details = serde_json::Map::new();
    details.insert("radius".into(), serde_json::to_value(&rep).unwrap());

    let mut tight = true;
    if x.doubling_check {
        let big = ctx.doubled_chain()?;
        let rep2 = measures::tightness_radius(&big.propagator(x.s, x.t)?, x.eps)?;
        let drift = (rep2.rho - rep.rho).abs();
        tight = drift <= 2.0 * ctx.grid.spacing;
        details.insert(
            "doubling".into(),
            json!({"rho": rep.rho, "rho_doubled": rep2.rho, "drift": drift, "stable": tight}),
        );
        if let Some(want) = x.expect_tight {
            checks.push(CheckLine::expect("tightness radius stable under doubling", tight, want));
        }
    }
    if !x.sweep_times.is_empty() {
        let mut times = vec![x.t];
        times.extend_from_slice(&x.sweep_times);
        let sweep = measures::tightness_monotone_check(&ctx.chain, x.s, &times, x.eps)?;
        // binding only in the tight regime
        if x.expect_tight == Some(true) {
            checks.push(CheckLine::expect("radius monotone along later times", sweep.holds, true));
        }
        details.insert("sweep".into(), serde_json::to_value(&sweep).unwrap());
    }
    details.insert("verdict".into(), json!(if tight { "TIGHT" } else { "NON-TIGHT" }));

    // profile plot: required radius against base point
    let series = svg::Series {
        name: format!("rho(eps={}) per base point", x.eps),
        points: rep.profile.iter().map(|&(b, r)| (b, r)).collect(),
    };
    ctx.write(
        "tightness_profile.svg",
        &svg::line_plot("tightness profile", "|x| of base point", "radius", &[series], false),
    )?;
    Ok(ExperimentReport::new("tightness", checks, details.into()))
}

fn exp_measures(ctx: &Ctx, x: &crate::config::MeasuresExp) -> Result<ExperimentReport> {
    let fam = periodic_measures(&ctx.chain, x.phases)?;
    let battery = bench::standard_battery(&ctx.grid);
    let mut checks = Vec::new();
    let mut details = serde_json::Map::new();

    checks.push(CheckLine::le(
        "spot-check TV vs direct eigensolve",
        fam.spot_check_max_tv,
        1e-6,
    ));
    let period = ctx.field.period;
    for &w in &x.windows {
        let (s, t) = (0.0, w * period);
        let rep = measures::invariance_residual(&fam, &ctx.chain, s, t, &battery)?;
        checks.push(CheckLine::le(
            &format!("invariance residual (t-s = {w}T)"),
            rep.max_residual,
            x.invariance_tol,
        ));
    }

    // uniqueness probe: seeded positive restarts converge to the same vector
    let mut worst_tv = 0.0f64;
    for k in 0..x.uniqueness_restarts {
        let n = ctx.grid.n_nodes();
        let mut start = vec![0.0; n];
        let mut state = 0x9e3779b97f4a7c15u64.wrapping_mul(k as u64 + 1);
        for (i, v) in start.iter_mut().enumerate() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            if !ctx.grid.is_boundary(i) {
                *v = 0.05 + ((state >> 33) as f64 / (1u64 << 31) as f64);
            }
        }
        let (w, _) = left_perron(&ctx.chain, 0, Some(start))?;
        let tv: f64 = 0.5
            * w.iter()
                .zip(&fam.phases[0].weights)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>();
        worst_tv = worst_tv.max(tv);
    }
    checks.push(CheckLine::le(
        &format!("uniqueness probe TV over {} restarts", x.uniqueness_restarts),
        worst_tv,
        1e-8,
    ));

    if let Some(ou) = &ctx.ou_ref {
        let (mean, var) = fam.moments(&ctx.grid, 0);
        let (em, ev) = ou.exact_measure(0.0)?;
        checks.push(CheckLine::abs_le("phase-0 mean error", mean - em, 5e-3));
        checks.push(CheckLine::abs_le("phase-0 variance error", var - ev, 5e-3));
    }

    if let Some(l) = &ctx.lyap {
        let w_nodes = l.w.values_on(&ctx.grid, ctx.field.dim)?;
        let mb = measures::lyapunov_mean_bound(
            &fam,
            &ctx.chain,
            &w_nodes,
            l.a,
            l.cc,
            period,
            1e-3 * (1.0 + l.a / l.cc),
        )?;
        checks.push(CheckLine::expect("measure mean of W <= min W + a/c", mb.phase_means_ok, true));
        checks.push(CheckLine::expect("G(t,s)W <= W + a/c on core", mb.gw_ok, true));
        details.insert("mean_bound".into(), serde_json::to_value(&mb).unwrap());
    }

    // L^p contraction across the battery (a markovian-structure property,
    // only enforced when the scheme guarantees it)
    let prop_half = ctx.chain.propagator(0.0, period / 2.0)?;
    let mut worst_gap = f64::NEG_INFINITY;
    for phi in &battery {
        let v = phi.values_on(&ctx.grid, 0.0)?;
        let gv = prop_half.apply(&v)?;
        for p in [1.0, 2.0, 4.0] {
            let before = fam.lp_norm(0.0, &v, p)?;
            let after = fam.lp_norm(period / 2.0, &gv, p)?;
            worst_gap = worst_gap.max(after - before);
        }
    }
    let lp_line = CheckLine::le("L^p contraction excess", worst_gap, 1e-6);
    if ctx.chain.positivity_guaranteed() {
        checks.push(lp_line);
    } else {
        details.insert("lp_contraction_flag".into(), serde_json::to_value(&lp_line).unwrap());
    }

    details.insert("lambda1".into(), json!(fam.lambda1));
    details.insert("total_defect".into(), json!(fam.total_defect()));
    details.insert(
        "phase0_moments".into(),
        json!(fam.moments(&ctx.grid, 0)),
    );
    if x.export_csv {
        ctx.write("measures.csv", &crate::report::measures_to_csv(&ctx.grid, &fam))?;
    }
    let series: Vec<svg::Series> = fam
        .phases
        .iter()
        .map(|pm| svg::Series {
            name: format!("phase {}", pm.phase),
            points: pm
                .weights
                .iter()
                .enumerate()
                .map(|(j, w)| (ctx.grid.point(j)[0], w / ctx.grid.cell_volume()))
                .collect(),
        })
        .collect();
    ctx.write(
        "measure_density.svg",
        &svg::line_plot("measure densities", "x", "density", &series, false),
    )?;
    Ok(ExperimentReport::new("measures", checks, details.into()))
}

fn exp_spectrum(ctx: &Ctx, x: &crate::config::SpectrumExp) -> Result<ExperimentReport> {
    let mut checks = Vec::new();
    let mut details = serde_json::Map::new();
    let period = ctx.field.period;
    let v1 = spectral::assemble_period_map(&ctx.chain, x.phase)?;
    let method = if ctx.grid.n_nodes() <= 400 {
        EigenMethod::Dense
    } else {
        EigenMethod::Power
    };
    let rep1 = spectral::floquet_data(&v1, period, x.phase, method)?;
    checks.push(CheckLine::le("lambda1 <= 1", rep1.lambda1, 1.0 + 1e-12));
    checks.push(CheckLine::le("eigen residual", rep1.residual1, 1e-8));
    details.insert("report".into(), serde_json::to_value(&rep1).unwrap());

    // cross-method agreement
    let rep_p = spectral::floquet_data(&v1, period, x.phase, EigenMethod::Power)?;
    checks.push(CheckLine::abs_le(
        "dense vs power lambda1 (rel)",
        (rep_p.lambda1 - rep1.lambda1) / rep1.lambda1,
        1e-8,
    ));
    if !rep1.degenerate {
        checks.push(CheckLine::abs_le(
            "dense vs power |lambda2| (rel)",
            (rep_p.lambda2_mod - rep1.lambda2_mod) / rep1.lambda2_mod.max(1e-300),
            1e-8,
        ));
    }

    // phase independence of the nonzero spectrum
    let v2 = spectral::assemble_period_map(&ctx.chain, x.phase2)?;
    let rep2 = spectral::floquet_data(&v2, period, x.phase2, method)?;
    checks.push(CheckLine::abs_le(
        "lambda1 phase independence (rel)",
        (rep2.lambda1 - rep1.lambda1) / rep1.lambda1,
        1e-8,
    ));
    checks.push(CheckLine::abs_le(
        "|lambda2| phase independence (rel)",
        (rep2.lambda2_mod - rep1.lambda2_mod) / rep1.lambda2_mod.max(1e-300),
        1e-8,
    ));

    // projection identities on the battery
    if !rep1.degenerate {
        let proj = spectral::projections(&rep1)?;
        let battery = bench::standard_battery(&ctx.grid);
        let mut worst = 0.0f64;
        for phi in &battery {
            let y = phi.values_on(&ctx.grid, x.phase)?;
            let py = proj.apply_p(&y);
            let ppy = proj.apply_p(&py);
            for (a, b) in py.iter().zip(&ppy) {
                worst = worst.max((a - b).abs());
            }
            let vy: Vec<f64> = {
                let xv = nalgebra::DVector::from_column_slice(&y);
                (&v1 * xv).data.into()
            };
            let pvy = proj.apply_p(&vy);
            let vpy: Vec<f64> = {
                let xv = nalgebra::DVector::from_column_slice(&py);
                (&v1 * xv).data.into()
            };
            for (a, b) in pvy.iter().zip(&vpy) {
                worst = worst.max((a - b).abs());
            }
        }
        checks.push(CheckLine::le("projection identities (P²=P, PV=VP)", worst, 1e-8));
    }

    if x.doubling_check {
        let big = ctx.doubled_chain()?;
        if big.grid.n_nodes() <= 2000 {
            let vbig = spectral::assemble_period_map(&big, x.phase)?;
            let repb = spectral::floquet_data(&vbig, period, x.phase, EigenMethod::Power)?;
            let rel1 = ((repb.lambda1 - rep1.lambda1) / rep1.lambda1).abs();
            let rel2 = ((repb.lambda2_mod - rep1.lambda2_mod) / rep1.lambda2_mod.max(1e-300)).abs();
            details.insert(
                "doubling".into(),
                json!({
                    "lambda1_rel_change": rel1,
                    "lambda2_rel_change": rel2,
                    "stabilized": rel1 <= 1e-3 && rel2 <= 1e-3,
                }),
            );
        }
    }

    for &p in &x.probe_p {
        let t = x.probe_t.unwrap_or(x.phase + period);
        let probe = spectral::lp_compactness_probe(&ctx.chain, x.phase, t, p)?;
        details.insert(
            format!("compactness_probe_p{p}"),
            serde_json::to_value(&probe).unwrap(),
        );
    }
    Ok(ExperimentReport::new("spectrum", checks, details.into()))
}

fn exp_decay(ctx: &Ctx, x: &crate::config::DecayExp) -> Result<ExperimentReport> {
    let period = ctx.field.period;
    let v = spectral::assemble_period_map(&ctx.chain, 0.0)?;
    let method = if ctx.grid.n_nodes() <= 400 {
        EigenMethod::Dense
    } else {
        EigenMethod::Power
    };
    let srep = spectral::floquet_data(&v, period, 0.0, method)?;
    if srep.degenerate {
        return Err(Error::DegenerateGap {
            gap: 1.0 - srep.gap_ratio,
        });
    }
    let battery = vec![
        TestFunction::closed("sin", parse_expr("sin(x1)").unwrap()),
        TestFunction::closed("one", parse_expr("1").unwrap()),
    ];
    let rep = spectral::decay_fit(&ctx.chain, 0.0, &battery, x.k_max, &x.p_list, &srep)?;
    let mut checks = Vec::new();
    for f in &rep.fits {
        if f.tag.starts_with("one|") {
            continue;
        }
        if !f.rate.is_nan() {
            checks.push(CheckLine::abs_le(
                &format!("{} rate vs omega0 (rel)", f.tag),
                (f.rate - rep.omega0) / rep.omega0.abs(),
                x.rate_tol,
            ));
            checks.push(CheckLine::expect(&format!("{} fit reliable", f.tag), f.reliable, true));
        }
    }
    // the projection-invariant datum has no decaying component
    for (tag, curve) in &rep.curves {
        if tag == "one|sup" {
            let worst = curve.iter().fold(0.0f64, |m, &(_, e)| m.max(e));
            checks.push(CheckLine::le("e_k for phi = 1", worst, 1e-8));
        }
    }
    // no fitted rate decays faster than the gap allows
    let min_rate = rep
        .fits
        .iter()
        .filter(|f| !f.rate.is_nan() && !f.tag.starts_with("one|"))
        .map(|f| f.rate)
        .fold(f64::INFINITY, f64::min);
    checks.push(CheckLine::le(
        "fastest fitted rate above omega0 - 10% (value is omega0-rate)",
        rep.omega0 - min_rate,
        x.rate_tol * rep.omega0.abs(),
    ));

    ctx.write("decay_curves.csv", &crate::report::curves_to_csv(&rep.curves))?;
    let series: Vec<svg::Series> = rep
        .curves
        .iter()
        .map(|(tag, curve)| svg::Series {
            name: tag.clone(),
            points: curve.iter().map(|&(k, e)| (k as f64 * period, e)).collect(),
        })
        .collect();
    ctx.write(
        "decay.svg",
        &svg::line_plot("decay of G(s+kT,s)phi - m_s phi", "t - s", "error", &series, true),
    )?;
    Ok(ExperimentReport::new(
        "decay",
        checks,
        serde_json::to_value(&rep).unwrap(),
    ))
}

fn exp_mc(ctx: &Ctx, x: &crate::config::McExp) -> Result<ExperimentReport> {
    let seed = ctx.seed_override.unwrap_or(x.seed);
    let sampler = montecarlo::simulate(&ctx.field, x.s, x.t, &[x.x, 0.0], x.n, x.em_dt, seed)?;
    let mut checks = Vec::new();
    let mut details = serde_json::Map::new();
    details.insert("explosion_fraction".into(), json!(sampler.explosion_fraction()));

    let phis: Vec<(&str, Box<dyn Fn(&[f64]) -> f64>)> = vec![
        ("one", Box::new(|_z: &[f64]| 1.0)),
        ("x", Box::new(|z: &[f64]| z[0])),
        ("x^2", Box::new(|z: &[f64]| z[0] * z[0])),
        ("sin", Box::new(|z: &[f64]| z[0].sin())),
    ];
    for (name, phi) in &phis {
        let est = sampler.estimate(phi.as_ref());
        if let Some(ou) = &ctx.ou_ref {
            let exact = ou.expectation(x.s, x.t, x.x, &|y| Ok(phi(&[y])))?;
            checks.push(CheckLine::abs_le(
                &format!("|MC - exact| ({name})"),
                est.mean - exact,
                3.0 * est.stderr + 2e-3,
            ));
        }
        details.insert(format!("estimate_{name}"), serde_json::to_value(&est).unwrap());
    }
    checks.push(CheckLine::le(
        "explosion fraction",
        sampler.explosion_fraction(),
        1e-4,
    ));

    // PDE cross-check of the endpoint histogram tail
    let prop = ctx.chain.propagator(x.s, x.t)?;
    if let Some(i0) = ctx.grid.node_near(&[x.x, 0.0]) {
        let pde_row = prop.kernel_row(i0)?;
        let mc_row = sampler.empirical_kernel(&ctx.grid, i0);
        if let Ok(rad) = measures::tightness_radius(&prop, 0.01) {
            let tail_mc = 1.0 - mc_row.mass_within(&ctx.grid, rad.rho);
            let binom = (0.01f64 * 0.99 / x.n as f64).sqrt();
            checks.push(CheckLine::le(
                "MC tail mass at PDE rho(0.01)",
                tail_mc,
                0.01 + 3.0 * binom + ctx.grid.spacing,
            ));
        }
        let (m_pde, v_pde) = pde_row.moments(&ctx.grid);
        let (m_mc, v_mc) = mc_row.moments(&ctx.grid);
        details.insert(
            "kernel_cross_check".into(),
            json!({"pde_mean": m_pde, "mc_mean": m_mc, "pde_var": v_pde, "mc_var": v_mc}),
        );
    }
    Ok(ExperimentReport::new("mc", checks, details.into()))
}

/// Entry point shared by the CLI and the C API: load config from path,
/// run, map outcomes to the exit-code contract (0 pass, 2 config, 3
/// numeric/check failure).
pub fn run_path(config: &Path, sub: &str, over: &Overrides) -> (i32, Option<RunReport>, String) {
    let Some(sub) = Subcommand::parse(sub) else {
        return (2, None, format!("unknown subcommand `{sub}`"));
    };
    let cfg = match ExperimentConfig::from_path(config) {
        Ok(c) => c,
        Err(e) => return (2, None, format!("configuration error: {e}")),
    };
    match run(cfg, sub, over) {
        Ok(rep) => {
            if rep.all_passed() {
                (0, Some(rep), String::new())
            } else {
                let failed: Vec<String> = rep
                    .experiments
                    .iter()
                    .filter(|e| e.verdict == Verdict::Fail)
                    .flat_map(|e| {
                        e.checks
                            .iter()
                            .filter(|c| !c.pass)
                            .map(move |c| format!("{}: {} = {:.6e} (tol {:.3e})", e.name, c.name, c.value, c.tolerance))
                    })
                    .collect();
                (3, Some(rep), format!("checks failed:\n{}", failed.join("\n")))
            }
        }
        Err(e @ Error::Config(_)) | Err(e @ Error::Parse(_)) => (2, None, e.to_string()),
        Err(e) => (3, None, format!("numerical failure: {e}")),
    }
}
