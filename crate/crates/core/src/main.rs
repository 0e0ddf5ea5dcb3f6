//! Command-line front end.
//!
//! ```text
//! evolop <validate|lyapunov|solve|kernel|tightness|measures|spectrum|decay|mc|all>
//!        --config PATH [--out DIR] [--seed N] [--refine K] [--parallel]
//! ```
//!
//! Exit codes: 0 all enabled checks pass, 2 configuration error,
//! 3 numerical failure or failed check.

use clap::{Parser, Subcommand as ClapSub};
use evolop::config::ExperimentConfig;
use evolop::report::Verdict;
use evolop::runner::{run_path, Overrides, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "evolop",
    about = "Numerical laboratory for periodic parabolic evolution operators",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Parser)]
struct CommonArgs {
    /// experiment configuration (JSON)
    #[arg(long)]
    config: PathBuf,
    /// output directory override
    #[arg(long)]
    out: Option<PathBuf>,
    /// Monte Carlo seed override
    #[arg(long)]
    seed: Option<u64>,
    /// halve the spacing and quarter the time step this many times
    #[arg(long, default_value_t = 0)]
    refine: u32,
    /// run independent experiments in parallel with isolated output dirs
    #[arg(long, default_value_t = false)]
    parallel: bool,
}

#[derive(ClapSub)]
enum Command {
    /// Validate the coefficient field (symmetry, ellipticity, periodicity)
    Validate(CommonArgs),
    /// Lyapunov confinement checks, comparison problem, supersolution
    Lyapunov(CommonArgs),
    /// Propagate the diagnostic battery; compare with exact references
    Solve(CommonArgs),
    /// Transition-kernel rows and their statistics
    Kernel(CommonArgs),
    /// Tightness radii, sweeps and truncation-doubling stability
    Tightness(CommonArgs),
    /// Periodic family of measures, invariance, uniqueness probe
    Measures(CommonArgs),
    /// Period-map Floquet data, projections, compactness probe
    Spectrum(CommonArgs),
    /// Decay-rate fits in sup and weighted p-norms
    Decay(CommonArgs),
    /// Monte Carlo oracle runs
    Mc(CommonArgs),
    /// Every experiment enabled in the config
    All(CommonArgs),
}

impl Command {
    fn split(&self) -> (&'static str, &CommonArgs) {
        match self {
            Command::Validate(a) => ("validate", a),
            Command::Lyapunov(a) => ("lyapunov", a),
            Command::Solve(a) => ("solve", a),
            Command::Kernel(a) => ("kernel", a),
            Command::Tightness(a) => ("tightness", a),
            Command::Measures(a) => ("measures", a),
            Command::Spectrum(a) => ("spectrum", a),
            Command::Decay(a) => ("decay", a),
            Command::Mc(a) => ("mc", a),
            Command::All(a) => ("all", a),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (sub, args) = cli.command.split();
    let over = Overrides {
        out_dir: args.out.clone(),
        seed: args.seed,
        refine: args.refine,
        parallel: args.parallel,
    };

    if args.parallel && sub == "all" {
        return run_parallel(&args.config, &over);
    }

    let (code, report, msg) = run_path(&args.config, sub, &over);
    if let Some(rep) = &report {
        print_summary(rep);
    }
    if !msg.is_empty() {
        eprintln!("{msg}");
    }
    ExitCode::from(code as u8)
}

fn print_summary(rep: &evolop::report::RunReport) {
    for e in &rep.experiments {
        let tag = match e.verdict {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Info => "INFO",
        };
        println!("[{tag}] {}", e.name);
        for c in &e.checks {
            println!(
                "    {} {}: {:.6e} (tol {:.3e})",
                if c.pass { "ok " } else { "BAD" },
                c.name,
                c.value,
                c.tolerance
            );
        }
    }
}

/// `--parallel all`: run the enabled experiments concurrently, each in its
/// own output subdirectory, then merge the reports.
fn run_parallel(config: &PathBuf, over: &Overrides) -> ExitCode {
    use rayon::prelude::*;
    let cfg = match ExperimentConfig::from_path(config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("configuration error: {e}");
            return ExitCode::from(2);
        }
    };
    let subs = [
        "validate",
        "lyapunov",
        "solve",
        "kernel",
        "tightness",
        "measures",
        "spectrum",
        "decay",
        "mc",
    ];
    let enabled: Vec<&str> = subs
        .iter()
        .copied()
        .filter(|s| {
            let e = &cfg.experiments;
            match *s {
                "validate" => e.validate.is_some(),
                "lyapunov" => e.lyapunov.is_some(),
                "solve" => e.solve.is_some(),
                "kernel" => e.kernel.is_some(),
                "tightness" => e.tightness.is_some(),
                "measures" => e.measures.is_some(),
                "spectrum" => e.spectrum.is_some(),
                "decay" => e.decay.is_some(),
                "mc" => e.mc.is_some(),
                _ => false,
            }
        })
        .collect();
    let base = over
        .out_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from(&cfg.output_dir));
    let results: Vec<(String, i32)> = enabled
        .par_iter()
        .map(|s| {
            let mut o = over.clone();
            o.out_dir = Some(base.join(s));
            let (code, rep, msg) = run_path(config, s, &o);
            if let Some(rep) = &rep {
                print_summary(rep);
            }
            if !msg.is_empty() {
                eprintln!("{msg}");
            }
            (s.to_string(), code)
        })
        .collect();
    let worst = results.iter().map(|(_, c)| *c).max().unwrap_or(0);
    let _ = Subcommand::parse("all");
    ExitCode::from(worst as u8)
}
