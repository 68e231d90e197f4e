//! Command-line front end: subcommand dispatch and exit codes.
//!
//! Exit status is 0 on success, 1 for invalid input or a failed condition
//! check, and 2 for numerical failure (blowup, fixed-point nonconvergence).

pub mod config;
pub mod io;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::coefficients::checks::{
    growth_check, lipschitz_probe_g, modulus_bound_check, osgood_report,
};
use crate::error::{Error, Result};
use crate::measure::{
    invariance_test, krylov_bogoliubov, run_ensemble, tightness_diagnostic, ReportRow, DEFAULT_BATCHES,
};
use crate::noise::RngStream;
use crate::solver::contraction::find_t1;
use crate::solver::picard::picard_run;
use crate::solver::{simulate, Mode, SolverConfig};
use crate::spectral::{assemble_operator, log_grid, OperatorDescriptor, SpectralOperator, DEFAULT_N_MODES};
pub use config::{load_config, parse_config, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

/// Sample sizes of the condition checks.
const MODULUS_PAIRS: usize = 100_000;
const PROBE_SAMPLES: usize = 2_000;
const DECAY_CHECK_POINTS: usize = 500;

#[derive(Debug, Parser)]
#[command(name = "nsfde", version, about = "Neutral stochastic delay equations: simulation and invariant measures")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate one trajectory and write its snapshots as JSONL.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "traj.jsonl")]
        out: PathBuf,
        /// Also dump the final window as CSV.
        #[arg(long)]
        segment_out: Option<PathBuf>,
    },
    /// Run the Picard iteration on one noise path and write `iter, sup_diff`.
    Picard {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        iters: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "picard.csv")]
        out: PathBuf,
    },
    /// Build an occupation measure from an ensemble of trajectories.
    EstimateMeasure {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        trajectories: Option<usize>,
        #[arg(long)]
        burn_in: Option<f64>,
        #[arg(long)]
        thin: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "measure.jsonl")]
        out: PathBuf,
    },
    /// Evolve draws from a stored measure and compare before and after.
    InvarianceTest {
        #[arg(long)]
        measure: PathBuf,
        #[arg(long)]
        t: Option<f64>,
        #[arg(long)]
        draws: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "report.csv")]
        out: PathBuf,
    },
    /// Tail probabilities of the window norm over an ensemble.
    Tightness {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated radii.
        #[arg(long = "R", value_delimiter = ',')]
        r: Option<Vec<f64>>,
        #[arg(long)]
        trajectories: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "tight.csv")]
        out: PathBuf,
    },
    /// Numerical checks of the structural conditions, as CSV.
    CheckConditions {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "conditions.csv")]
        out: PathBuf,
    },
    /// Contraction horizon T1 with gamma(T1) and cond2(T1).
    T1 {
        #[arg(long = "Mg")]
        mg: f64,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        alpha: f64,
        /// Defaults to the decay constant of the configured (or default) operator.
        #[arg(long = "C1ma")]
        c1ma: Option<f64>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Load a configuration, print the resolved form and the condition report.
    Validate {
        #[arg(long)]
        config: PathBuf,
        /// Where to write the resolved configuration.
        #[arg(long)]
        resolved: Option<PathBuf>,
    },
}

/// Parses arguments, runs the command and returns the exit status.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_INVALID
    }
}

/// `<out>.resolved.toml` next to the main output.
fn resolved_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".resolved.toml");
    out.with_file_name(name)
}

fn write_resolved(cfg: &RunConfig, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, cfg.resolved_toml()?)?;
    Ok(())
}

fn load_with_seed(path: &Path, seed: Option<u64>) -> Result<RunConfig> {
    let mut file = config::parse_config(&std::fs::read_to_string(path).map_err(|e| {
        Error::Config(format!("cannot read {}: {e}", path.display()))
    })?)?
    .resolved;
    if seed.is_some() {
        file.seed = seed;
    }
    config::resolve(file)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PicardRow {
    pub iter: usize,
    pub sup_diff: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionRow {
    pub condition: String,
    pub estimate: f64,
    pub threshold: f64,
    pub verdict: bool,
}

fn run(command: Command) -> Result<i32> {
    match command {
        Command::Simulate { config, seed, out, segment_out } => {
            let cfg = load_with_seed(&config, seed)?;
            write_resolved(&cfg, &resolved_path(&out))?;
            let model = cfg.model()?;
            let initial = cfg.initial_segment(&model)?;
            let mut rng = RngStream::new(cfg.seed, 0);
            let traj = match cfg.solver.mode {
                Mode::Direct => simulate(&initial, &model, &cfg.solver, &mut rng)?,
                Mode::Picard => picard_run(&initial, &model, &cfg.solver, &mut rng)?
                    .pop()
                    .map(|it| it.trajectory)
                    .ok_or_else(|| Error::Internal("no Picard iterates".into()))?,
            };
            io::write_trajectory(&out, &traj, cfg.h, cfg.solver.dt, cfg.solver.store_stride)?;
            if let Some(path) = segment_out {
                traj.final_segment.write_csv(std::fs::File::create(path)?)?;
            }
            println!("wrote {} snapshots to {}", traj.len(), out.display());
            Ok(EXIT_OK)
        }
        Command::Picard { config, iters, seed, out } => {
            let mut cfg = load_with_seed(&config, seed)?;
            if let Some(k) = iters {
                cfg.solver.picard_iters = k;
                cfg.resolved.solver.picard_iters = k;
            }
            write_resolved(&cfg, &resolved_path(&out))?;
            let model = cfg.model()?;
            let initial = cfg.initial_segment(&model)?;
            let its = picard_run(&initial, &model, &cfg.solver, &mut RngStream::new(cfg.seed, 0))?;
            let rows: Vec<PicardRow> = its.iter().map(|it| PicardRow { iter: it.iter, sup_diff: it.sup_diff }).collect();
            for r in &rows {
                match r.sup_diff {
                    Some(d) => println!("iter {:2}  sup_diff {d:.6e}", r.iter),
                    None => println!("iter {:2}", r.iter),
                }
            }
            io::write_csv(&out, "nsfde-picard", &rows)?;
            Ok(EXIT_OK)
        }
        Command::EstimateMeasure { config, trajectories, burn_in, thin, seed, out } => {
            let mut file = load_with_seed(&config, seed)?.resolved;
            if trajectories.is_some() {
                file.measure.trajectories = trajectories;
            }
            if burn_in.is_some() {
                file.measure.burn_in = burn_in;
            }
            if thin.is_some() {
                file.measure.thin = thin;
            }
            let cfg = config::resolve(file)?;
            if !(cfg.measure.burn_in < cfg.solver.t_end) {
                return Err(Error::Config(format!(
                    "measure.burn_in = {} must be below solver.t_end = {}",
                    cfg.measure.burn_in, cfg.solver.t_end
                )));
            }
            write_resolved(&cfg, &resolved_path(&out))?;
            let model = cfg.model()?;
            let initial = cfg.initial_segment(&model)?;
            let run_cfg = SolverConfig {
                checkpoint_stride: cfg.measure.thin * cfg.solver.store_stride,
                checkpoint_after: cfg.measure.burn_in,
                ..cfg.solver.clone()
            };
            let trajs = run_ensemble(&initial, &model, &run_cfg, cfg.seed, 0, cfg.measure.trajectories)?;
            let mu = krylov_bogoliubov(&trajs, cfg.measure.burn_in, cfg.measure.thin, &cfg.observables())?;
            for s in mu.summaries(DEFAULT_BATCHES) {
                println!(
                    "{:>12}  mean {:+.6e} (se {:.2e})  var {:.6e} (se {:.2e})",
                    s.name, s.mean, s.se_mean, s.variance, s.se_variance
                );
            }
            io::write_measure(&out, &mu, &cfg.resolved_toml()?)?;
            println!("{} samples, {} windows -> {}", mu.len(), mu.segments.len(), out.display());
            Ok(EXIT_OK)
        }
        Command::InvarianceTest { measure, t, draws, seed, out } => {
            let (mu, text) = io::read_measure(&measure)?;
            let cfg = parse_config(&text)?;
            let model = cfg.model()?;
            let t = t.unwrap_or(cfg.measure.invariance_t);
            let draws = draws.unwrap_or(cfg.measure.draws);
            let first_stream = mu.meta.sources.len() as u64;
            let report = invariance_test(
                &mu,
                &model,
                &cfg.solver,
                t,
                &mu.observables,
                draws,
                seed.unwrap_or(cfg.seed),
                first_stream,
            )?;
            for c in &report.comparisons {
                println!(
                    "{:>12}  diff {:+.3e} (se {:.2e})  KS {:.4} / {:.4}  {}",
                    c.observable,
                    c.difference,
                    c.pooled_se,
                    c.ks,
                    c.ks_critical,
                    if c.ks_pass() { "pass" } else { "FAIL" }
                );
            }
            io::write_report(&out, &report.rows())?;
            Ok(if report.all_ks_pass() { EXIT_OK } else { EXIT_INVALID })
        }
        Command::Tightness { config, r, trajectories, seed, out } => {
            let mut file = load_with_seed(&config, seed)?.resolved;
            if r.is_some() {
                file.measure.r_grid = r;
            }
            if trajectories.is_some() {
                file.measure.trajectories = trajectories;
            }
            let cfg = config::resolve(file)?;
            write_resolved(&cfg, &resolved_path(&out))?;
            let model = cfg.model()?;
            let initial = cfg.initial_segment(&model)?;
            let trajs = run_ensemble(&initial, &model, &cfg.solver, cfg.seed, 0, cfg.measure.trajectories)?;
            let rep = tightness_diagnostic(&trajs, &cfg.measure.r_grid)?;
            let n = rep.n_trajectories as f64;
            let rows: Vec<ReportRow> = rep
                .r_grid
                .iter()
                .zip(&rep.estimates)
                .map(|(radius, p)| ReportRow {
                    statistic: format!("sup_t P(seg_norm > {radius})"),
                    estimate: *p,
                    stderr: (p * (1.0 - p) / n).sqrt(),
                    threshold: TIGHTNESS_LEVEL,
                    verdict: *p < TIGHTNESS_LEVEL,
                })
                .collect();
            for row in &rows {
                println!("{:>28}  {:.4}", row.statistic, row.estimate);
            }
            io::write_report(&out, &rows)?;
            Ok(EXIT_OK)
        }
        Command::CheckConditions { config, out } => {
            let cfg = load_config(&config)?;
            write_resolved(&cfg, &resolved_path(&out))?;
            let rows = check_conditions(&cfg)?;
            print_conditions(&rows);
            io::write_csv(&out, "nsfde-conditions", &rows)?;
            Ok(if rows.iter().all(|r| r.verdict) { EXIT_OK } else { EXIT_INVALID })
        }
        Command::T1 { mg, p, alpha, c1ma, config } => {
            let c1ma = match c1ma {
                Some(c) => c,
                None => {
                    let op = match config {
                        Some(path) => load_config(&path)?.model()?.op,
                        None => assemble_operator(&OperatorDescriptor::laplacian(1.0), DEFAULT_N_MODES)?,
                    };
                    decay_constant(&op, 1.0 - alpha)
                }
            };
            let sol = find_t1(mg, p, alpha, c1ma).map_err(|e| match e {
                Error::Domain(msg) => Error::Config(msg),
                other => other,
            })?;
            println!("T1 = {:.15e}", sol.t1);
            println!("gamma = {:.15e}", sol.gamma);
            println!("cond2 = {:.15e}", sol.cond2);
            println!("C1ma = {c1ma:.15e}");
            if sol.capped {
                println!("note: both conditions still hold at the search cap");
            }
            Ok(EXIT_OK)
        }
        Command::Validate { config, resolved } => {
            let cfg = load_config(&config)?;
            let dump = cfg.resolved_toml()?;
            match resolved {
                Some(path) => write_resolved(&cfg, &path)?,
                None => println!("{dump}"),
            }
            let rows = check_conditions(&cfg)?;
            print_conditions(&rows);
            Ok(if rows.iter().all(|r| r.verdict) { EXIT_OK } else { EXIT_INVALID })
        }
    }
}

/// Exceedance level used as the verdict threshold of tightness reports.
pub const TIGHTNESS_LEVEL: f64 = 0.05;

fn decay_constant(op: &SpectralOperator, alpha: f64) -> f64 {
    op.lemma22_constants(alpha).c_alpha
}

fn print_conditions(rows: &[ConditionRow]) {
    for r in rows {
        println!(
            "{:<24} {:>14.6e} {:>14.6e}  {}",
            r.condition,
            r.estimate,
            r.threshold,
            if r.verdict { "pass" } else { "FAIL" }
        );
    }
}

/// Spectrum, decay bound, growth, modulus, Osgood, neutral-term and
/// initial-data checks for a configuration, plus the contraction horizon.
pub fn check_conditions(cfg: &RunConfig) -> Result<Vec<ConditionRow>> {
    let model = cfg.model()?;
    let (op, cs) = (&model.op, &model.coeffs);
    let mut rows = Vec::new();
    let mut push = |condition: &str, estimate: f64, threshold: f64, verdict: bool| {
        rows.push(ConditionRow { condition: condition.into(), estimate, threshold, verdict });
    };
    let mu = op.eigenvalues();
    push("H1.delta_below_mu1", op.delta(), mu[0], op.delta() > 0.0 && op.delta() < mu[0]);
    push(
        "H1.spectrum_increasing",
        mu.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min),
        0.0,
        mu.windows(2).all(|w| w[1] > w[0]),
    );
    for (label, a) in [("decay_alpha", cs.alpha), ("decay_1_minus_alpha", 1.0 - cs.alpha)] {
        let c = decay_constant(op, a);
        let worst = log_grid(3.3e-6, 77.0, DECAY_CHECK_POINTS)
            .into_iter()
            .map(|t| op.frac_semigroup_norm(a, t).map(|n| n / (c * t.powf(-a) * (-op.delta() * t).exp())))
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        push(&format!("H1.{label}"), worst, 1.0, worst <= 1.0 + 1e-12);
    }

    let mut rng = RngStream::new(cfg.seed, u64::MAX);
    let dt = cfg.solver.dt;
    let growth = growth_check(cs, &model.noise, &model.grid, cfg.h, dt, PROBE_SAMPLES, &mut rng)?;
    push("H2.growth", growth.estimate, growth.threshold, growth.pass);
    for (label, s) in [("H2.modulus_f", &cs.f), ("H2.modulus_sigma", &cs.sigma)] {
        let m = modulus_bound_check(s, &cs.modulus, cs.p, MODULUS_PAIRS, &mut rng);
        push(label, m.max_ratio, 1.0, m.violations == 0);
    }
    let osgood = osgood_report(&cs.modulus)?;
    let incr: Vec<f64> = osgood.values.windows(2).map(|w| w[1] - w[0]).collect();
    push("H2.osgood", incr[incr.len() - 1] / incr[0], 0.5, osgood.certified);

    push("H3.Mg_below_one", cs.lipschitz_mg, 1.0, cs.lipschitz_mg < 1.0);
    push("H3.corollary_2Mg2", 2.0 * cs.lipschitz_mg.powi(2), 1.0, 2.0 * cs.lipschitz_mg.powi(2) < 1.0);
    let probe = lipschitz_probe_g(cs, op, &model.grid, cfg.h, dt, PROBE_SAMPLES, &mut rng)?;
    push("H3.lipschitz_g", probe.estimate, probe.threshold, probe.pass);

    let initial = cfg.initial_segment(&model)?;
    let sup = initial.sup_norm();
    push("H4.initial_window", sup, f64::INFINITY, sup.is_finite());

    let t1 = find_t1(cs.lipschitz_mg, cs.p, cs.alpha, decay_constant(op, 1.0 - cs.alpha))?;
    push("T1.gamma", t1.gamma, 1.0, t1.gamma < 1.0);
    push("T1.cond2", t1.cond2, 1.0, t1.cond2 < 1.0);
    Ok(rows)
}
