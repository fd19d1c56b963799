//! Command-line driver: run experiments, extrapolate maximal solutions,
//! compare ordered runs, fit growth exponents, demonstrate the delayed
//! branches, and verify the operator estimates the solver relies on.
//!
//! Exit codes: 0 when the command ran and every check it performed passed,
//! 1 when a check failed or a run broke down numerically, 2 for malformed
//! configuration.

use std::fs;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use pparab::grid::write_state;
use pparab::harness::{
    compare_runs, fit_growth_exponent, nonuniqueness_demo, read_csv, run_experiment, write_csv,
    ExperimentSpec, GridConfig, NormColumn,
};
use pparab::kernel::{bessel_kernel, kernel_lower_profile};
use pparab::operators::{
    verify_operator_bounds, verify_weight_sandwich, SandwichParams, WeightParams,
};
use pparab::potentials::critical_exponents;
use pparab::solver::{maximal_solution, LadderReport, Trajectory};

#[derive(Parser)]
#[command(
    name = "pparab",
    version,
    about = "Spectral toolbox for a sublinear pseudoparabolic equation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and optionally persist its diagnostics.
    Solve(RunArgs),
    /// Run the regularization ladder from zero data and extrapolate the
    /// maximal solution (the experiment's [initial] section is ignored).
    Maximal(RunArgs),
    /// Check order preservation between two runs differing only in data.
    Compare {
        /// Experiment with the larger initial data.
        #[arg(long)]
        hi: PathBuf,
        /// Experiment with the smaller initial data.
        #[arg(long)]
        lo: PathBuf,
    },
    /// Fit the growth exponent of a fresh or previously persisted run.
    GrowthFit(GrowthFitArgs),
    /// Construct the delayed solution family and report its defects.
    Nonuniqueness(NonUniquenessArgs),
    /// Verify resolvent/Green bounds and the weight sandwich.
    VerifyOperators {
        #[arg(long)]
        config: PathBuf,
    },
    /// Tabulate the kernel profile against its exponential lower bound.
    KernelTable(KernelTableArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment description (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Write the diagnostic rows to this CSV file.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Overwrite existing output files.
    #[arg(long)]
    force: bool,
    /// Dump the final state (binary) to this file.
    #[arg(long)]
    dump_final: Option<PathBuf>,
}

#[derive(Args)]
struct GrowthFitArgs {
    /// Experiment description (TOML); supplies the window, the data growth
    /// exponent and the critical exponents.
    #[arg(long)]
    config: PathBuf,
    /// Fit previously persisted diagnostics instead of re-running.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Which norm column to fit.
    #[arg(long, value_enum, default_value_t = ColumnArg::Sup)]
    column: ColumnArg,
}

#[derive(Args)]
struct NonUniquenessArgs {
    /// Experiment description (TOML); the grid, potential, solver and t_end
    /// are used (initial data plays no role: the family grows from zero).
    #[arg(long)]
    config: PathBuf,
    /// Ignition times, comma separated (e.g. 0,0.5,1).
    #[arg(long, value_delimiter = ',', required = true)]
    kappas: Vec<f64>,
}

#[derive(Args)]
struct KernelTableArgs {
    #[arg(long, default_value_t = 1)]
    dim: u32,
    #[arg(long, default_value_t = 10.0)]
    r_max: f64,
    #[arg(long, default_value_t = 200)]
    points: usize,
    /// Write the table here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    force: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ColumnArg {
    Sup,
    Weighted,
}

impl From<ColumnArg> for NormColumn {
    fn from(c: ColumnArg) -> NormColumn {
        match c {
            ColumnArg::Sup => NormColumn::Sup,
            ColumnArg::Weighted => NormColumn::Weighted,
        }
    }
}

/// Configuration of `verify-operators`.
#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct OpsConfig {
    grid: GridConfig,
    #[serde(default)]
    weight: WeightParams,
    #[serde(default = "default_theta")]
    theta: f64,
    #[serde(default = "default_trials")]
    trials: usize,
    /// Optional two-sided weight comparison.
    sandwich: Option<SandwichParams>,
}

fn default_theta() -> f64 {
    0.5
}

fn default_trials() -> usize {
    25
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err:#}");
            let config = err
                .downcast_ref::<pparab::Error>()
                .map(pparab::Error::is_config)
                .unwrap_or(false);
            ExitCode::from(if config { 2 } else { 1 })
        }
    }
}

fn dispatch(command: Command) -> anyhow::Result<bool> {
    match command {
        Command::Solve(args) => cmd_run(&args, false),
        Command::Maximal(args) => cmd_run(&args, true),
        Command::Compare { hi, lo } => cmd_compare(&hi, &lo),
        Command::GrowthFit(args) => cmd_growth_fit(&args),
        Command::Nonuniqueness(args) => cmd_nonuniqueness(&args),
        Command::VerifyOperators { config } => cmd_verify_operators(&config),
        Command::KernelTable(args) => cmd_kernel_table(&args),
    }
}

fn load_spec(path: &Path) -> anyhow::Result<ExperimentSpec> {
    if !path.exists() {
        anyhow::bail!(pparab::Error::Config(format!(
            "config file {} not found",
            path.display()
        )));
    }
    Ok(ExperimentSpec::from_toml_file(path)?)
}

fn cmd_run(args: &RunArgs, maximal: bool) -> anyhow::Result<bool> {
    let spec = load_spec(&args.config)?;
    let (traj, ladder, gap): (Trajectory, LadderReport, Option<f64>) = if maximal {
        let grid = spec.grid.build()?;
        let cfg = spec.effective_config();
        let out = maximal_solution(&grid, &spec.potential, &cfg, spec.t_end)
            .with_context(|| format!("maximal run '{}' failed", spec.name))?;
        (out.trajectory, out.ladder, Some(out.last_gap))
    } else {
        let art = run_experiment(&spec).with_context(|| format!("run '{}' failed", spec.name))?;
        (art.trajectory, art.ladder, None)
    };

    println!(
        "run '{}': {} stored rows up to t = {}",
        spec.name,
        traj.len(),
        traj.final_time()
    );
    if let Some(last) = traj.diagnostics.last() {
        println!(
            "  final sup = {:.6e}, weighted = {:.6e}",
            last.sup_norm, last.weighted_norm
        );
    }
    if !ladder.levels.is_empty() {
        println!(
            "  ladder {:?}: max ordering violation {:.3e} (tol {:.3e})",
            ladder.levels, ladder.max_violation, ladder.tol
        );
    }
    if let Some(gap) = gap {
        println!("  gap between the last two levels: {gap:.3e}");
    }
    let worst = |f: fn(&pparab::solver::DiagRow) -> f64| {
        traj.diagnostics
            .iter()
            .map(f)
            .filter(|v| v.is_finite())
            .fold(0.0f64, f64::max)
    };
    println!(
        "  worst mild defect {:.3e}, worst tilted defect {:.3e}",
        worst(|r| r.mild_residual),
        worst(|r| r.s_mild_residual)
    );

    if let Some(out) = &args.output {
        write_csv(out, &traj.diagnostics, args.force)?;
        println!("  wrote {}", out.display());
    }
    if let Some(dump) = &args.dump_final {
        if dump.exists() && !args.force {
            anyhow::bail!(pparab::Error::Config(format!(
                "state file {} already exists (use --force)",
                dump.display()
            )));
        }
        let mut w = BufWriter::new(File::create(dump)?);
        write_state(&mut w, traj.final_state(), traj.final_time())?;
        println!("  dumped final state to {}", dump.display());
    }
    Ok(true)
}

fn cmd_compare(hi: &Path, lo: &Path) -> anyhow::Result<bool> {
    let spec_hi = load_spec(hi)?;
    let spec_lo = load_spec(lo)?;
    let report = compare_runs(&spec_hi, &spec_lo)?;
    println!(
        "order preservation over {} rows: worst violation {:.3e} (tol {:.3e}) -> {}",
        report.rows,
        report.max_violation,
        report.tol,
        if report.holds { "PASS" } else { "FAIL" }
    );
    Ok(report.holds)
}

fn cmd_growth_fit(args: &GrowthFitArgs) -> anyhow::Result<bool> {
    let spec = load_spec(&args.config)?;
    let rows = match &args.csv {
        Some(path) => read_csv(path)?,
        None => run_experiment(&spec)?.trajectory.diagnostics,
    };
    let crit = critical_exponents(
        spec.solver.p,
        spec.potential.sigma,
        spec.potential.effective_time_power(),
    )?;
    let fit = fit_growth_exponent(
        &rows,
        args.column.into(),
        spec.fit_window_or_default(),
        spec.initial.growth_exponent(),
        crit,
    )?;
    println!(
        "growth fit for '{}' ({} samples in [{}, {}]):",
        spec.name,
        fit.samples,
        spec.fit_window_or_default()[0],
        spec.fit_window_or_default()[1]
    );
    println!(
        "  slope = {:.4} (predicted {:.4}, {} regime), r^2 = {:.6}",
        fit.slope, fit.predicted_slope, fit.regime, fit.r_squared
    );
    println!(
        "  critical exponent a_c = {:.4}, data exponent a = {:.4}",
        crit.a_crit,
        spec.initial.growth_exponent()
    );
    Ok(true)
}

fn cmd_nonuniqueness(args: &NonUniquenessArgs) -> anyhow::Result<bool> {
    let spec = load_spec(&args.config)?;
    let grid = spec.grid.build()?;
    let cfg = spec.effective_config();
    let report = nonuniqueness_demo(&grid, &spec.potential, &cfg, &args.kappas, spec.t_end)?;
    println!(
        "delayed family via the {:?} construction, t_end = {}",
        report.path, report.t_end
    );
    println!(
        "  {:>8}  {:>13}  {:>13}  {:>13}",
        "kappa", "mild defect", "tilted defect", "final sup"
    );
    for row in &report.rows {
        println!(
            "  {:>8.4}  {:>13.6e}  {:>13.6e}  {:>13.6e}",
            row.kappa, row.mild_residual, row.s_mild_residual, row.final_sup
        );
    }
    println!(
        "  min pairwise gap at t_end: {:.6e}",
        report.min_pairwise_gap
    );
    Ok(report.rows.len() < 2 || report.min_pairwise_gap > 0.0)
}

fn cmd_verify_operators(config: &Path) -> anyhow::Result<bool> {
    if !config.exists() {
        anyhow::bail!(pparab::Error::Config(format!(
            "config file {} not found",
            config.display()
        )));
    }
    let text = fs::read_to_string(config)?;
    let ops: OpsConfig = toml::from_str(&text)
        .map_err(|e| pparab::Error::Config(format!("bad verify-operators TOML: {e}")))?;
    let grid = ops.grid.build()?;

    let report = verify_operator_bounds(&grid, ops.weight, ops.theta, ops.trials)?;
    let status = |ok: bool| if ok { "PASS" } else { "FAIL" };
    println!(
        "operator bounds (R = {}, a = {}, theta = {}, {} trials):",
        ops.weight.r_scale,
        ops.weight.exponent,
        ops.theta,
        report.trials.len()
    );
    println!(
        "  resolvent: worst ratio {:.9} vs bound {:.9}",
        report.worst_bessel, report.theta_inv
    );
    println!(
        "  Green:     worst beta-relative ratio {:.9} vs bound 1",
        report.worst_green
    );
    println!("  -> {}", status(report.holds));
    let mut all = report.holds;

    if let Some(params) = ops.sandwich {
        let s = verify_weight_sandwich(&grid, params)?;
        println!(
            "weight sandwich (rho = {}, d = {}, eps = {}, theta = {}):",
            params.rho, params.d, params.eps, params.theta
        );
        println!(
            "  pointwise: lower violation {:.3e}, upper violation {:.3e}",
            s.lower_violation, s.upper_violation
        );
        println!(
            "  Green drift: upper rate {:.4} violation {:.3e}, lower rate {:.4} violation {:.3e}",
            s.k_upper, s.green_upper_violation, s.k_lower, s.green_lower_violation
        );
        println!("  -> {}", status(s.holds));
        all &= s.holds;
    }
    Ok(all)
}

fn cmd_kernel_table(args: &KernelTableArgs) -> anyhow::Result<bool> {
    if args.points < 2 {
        anyhow::bail!(pparab::Error::Config(
            "kernel table needs at least 2 points".into()
        ));
    }
    // Negated so NaN fails too.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(args.r_max > 0.0) {
        anyhow::bail!(pparab::Error::Config(format!(
            "r_max must be positive, got {}",
            args.r_max
        )));
    }
    let mut out = String::from("r,kernel,lower_bound,ratio\n");
    for i in 1..=args.points {
        let r = args.r_max * i as f64 / args.points as f64;
        let kernel = bessel_kernel(args.dim, 1.0, r)?;
        let lower = kernel_lower_profile(args.dim, r)? * (-r).exp();
        out.push_str(&format!(
            "{:.6e},{:.12e},{:.12e},{:.6e}\n",
            r,
            kernel,
            lower,
            kernel / lower
        ));
    }
    match &args.output {
        Some(path) => {
            if path.exists() && !args.force {
                anyhow::bail!(pparab::Error::Config(format!(
                    "output file {} already exists (use --force)",
                    path.display()
                )));
            }
            fs::write(path, out)?;
            println!("wrote {}", path.display());
        }
        None => print!("{out}"),
    }
    Ok(true)
}
