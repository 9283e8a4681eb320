use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use viscowave_core::analysis::{classify_with, detect_blowup, fit_decay, initial_measures};
use viscowave_core::functionals::{blowup_parameters, EnergyLedger, LedgerRecord};
use viscowave_core::integrator::{run, Model, Termination};
use viscowave_core::kernels::check_hypotheses;
use viscowave_core::report::simulate;
use viscowave_core::Error;

use crate::config::RunConfig;
use crate::output::{canonical_json, read_series, write_series};

pub const EXIT_OK: i32 = 0;
pub const EXIT_BLOWUP: i32 = 2;
pub const EXIT_KERNEL_INVALID: i32 = 3;
pub const EXIT_CONFIG: i32 = 4;
pub const EXIT_NUMERIC: i32 = 5;
pub const EXIT_FIT: i32 = 6;

#[derive(Debug, Parser)]
#[command(
    name = "viscowave",
    version,
    about = "Viscoelastic Kirchhoff wave simulations and analyses"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a simulation; writes series.csv and report.json.
    Simulate(Common),
    /// Classify the initial data (stable set, unstable, indeterminate).
    Classify(Common),
    /// Fit the energy decay of a series (or of a fresh run).
    DecayFit(Common),
    /// Blow-up summary of a series (or of a fresh run).
    Blowup(Common),
    /// Check the kernel hypotheses; exit 3 if they fail.
    ValidateKernel(Common),
    /// Simulate several configs in parallel, one subdirectory of --out each.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML run configuration
    pub config: PathBuf,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides the config's seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Existing series.csv to analyse instead of running the simulation
    #[arg(long)]
    pub series: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(required = true)]
    pub configs: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to the available parallelism
    #[arg(long)]
    pub jobs: Option<usize>,
}

/// A failed command: exit code and message for stderr.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Numeric(_) => EXIT_NUMERIC,
            Error::Fit(_) => EXIT_FIT,
            _ => EXIT_CONFIG,
        };
        Self::new(code, e.to_string())
    }
}

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::new(EXIT_CONFIG, format!("{}: {e}", path.display()))
}

pub fn execute(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Classify(a) => cmd_classify(&a),
        Command::DecayFit(a) => cmd_decay_fit(&a),
        Command::Blowup(a) => cmd_blowup(&a),
        Command::ValidateKernel(a) => cmd_validate_kernel(&a),
        Command::Sweep(a) => cmd_sweep(&a),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn load(args: &Common) -> Result<RunConfig, Failure> {
    let mut cfg = RunConfig::load(&args.config).map_err(|e| Failure::new(EXIT_CONFIG, e.0))?;
    if let Some(seed) = args.seed {
        cfg.analysis.seed = seed;
    }
    Ok(cfg)
}

fn write_file(dir: &Path, name: &str, contents: &[u8]) -> Result<PathBuf, Failure> {
    std::fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| io_failure(&path, e))?;
    Ok(path)
}

fn json<T: Serialize>(value: &T) -> Result<String, Failure> {
    canonical_json(value)
        .map_err(|e| Failure::new(EXIT_NUMERIC, format!("serialization failed: {e}")))
}

/// Prints `value` as canonical JSON and, with `--out`, also writes it to `name`.
fn emit<T: Serialize>(args: &Common, name: &str, value: &T) -> Result<(), Failure> {
    let text = json(value)?;
    print!("{text}");
    if let Some(dir) = &args.out {
        write_file(dir, name, text.as_bytes())?;
    }
    Ok(())
}

fn termination_code(t: Termination) -> i32 {
    match t {
        Termination::Horizon => EXIT_OK,
        Termination::BlowupThreshold => EXIT_BLOWUP,
        Termination::NumericFailure => EXIT_NUMERIC,
    }
}

fn simulate_into(cfg: &RunConfig, out: &Path) -> Result<i32, Failure> {
    let (report, _) = simulate(&cfg.problem, &cfg.analysis)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    let mut series = Vec::new();
    write_series(&mut series, &report.ledger).map_err(|e| io_failure(out, e))?;
    write_file(out, "series.csv", &series)?;
    write_file(out, "report.json", json(&report)?.as_bytes())?;
    if let Some(msg) = &report.failure {
        eprintln!("numeric failure: {msg}");
    }
    println!(
        "{:?} at t = {} after {} steps; verdict {:?}",
        report.termination, report.t_end, report.step_count, report.classification.verdict
    );
    Ok(termination_code(report.termination))
}

fn cmd_simulate(args: &Common) -> Result<i32, Failure> {
    let cfg = load(args)?;
    let out = args.out.clone().unwrap_or_else(|| PathBuf::from("."));
    simulate_into(&cfg, &out)
}

fn cmd_classify(args: &Common) -> Result<i32, Failure> {
    let cfg = load(args)?;
    let model = Model::new(cfg.problem.clone())?;
    let c = classify_with(&model, &cfg.analysis)?;
    emit(args, "classification.json", &c)?;
    Ok(EXIT_OK)
}

/// The series named by `--series`, or a fresh run of the config. For a series
/// the termination is inferred: non-finite values mean a numeric failure and an
/// early end means the blow-up threshold was crossed.
fn ledger_for(args: &Common, cfg: &RunConfig) -> Result<(EnergyLedger, Termination, f64), Failure> {
    match &args.series {
        Some(path) => {
            let ledger = read_series(path).map_err(|e| Failure::new(EXIT_CONFIG, e))?;
            let p = &cfg.problem;
            let last = ledger.records.last().cloned().unwrap_or_default();
            let finite = ledger
                .records
                .iter()
                .all(|r| r.e.is_finite() && r.grad_sq.is_finite());
            // the last stride-aligned step; a series ending earlier stopped before the horizon
            let n = p.n_steps();
            let expected = (n - n % p.output_stride.max(1)) as f64 * p.dt;
            let termination = if !finite {
                Termination::NumericFailure
            } else if last.grad_sq >= p.blowup_threshold || last.t < expected - 0.5 * p.dt {
                Termination::BlowupThreshold
            } else {
                Termination::Horizon
            };
            Ok((ledger, termination, last.t))
        }
        None => {
            let out = run(&cfg.problem)?;
            Ok((out.ledger, out.termination, out.t_end))
        }
    }
}

fn cmd_decay_fit(args: &Common) -> Result<i32, Failure> {
    let cfg = load(args)?;
    cfg.problem.validate()?;
    let (ledger, _, t_end) = ledger_for(args, &cfg)?;
    let fit = fit_decay(
        &ledger.times(),
        &ledger.column(|r| r.e),
        &cfg.problem.rate(),
        cfg.analysis.t0_fraction * t_end,
    )?;
    emit(args, "decay_fit.json", &fit)?;
    Ok(EXIT_OK)
}

fn cmd_blowup(args: &Common) -> Result<i32, Failure> {
    let cfg = load(args)?;
    let model = Model::new(cfg.problem.clone())?;
    let (mut ledger, termination, t_end) = ledger_for(args, &cfg)?;
    // a CSV lacks the L² and boundary terms the blow-up parameters need
    let initial = LedgerRecord::from_measures(&cfg.problem, &initial_measures(&model)?);
    if let Some(first) = ledger.records.first_mut() {
        first.u_sq = initial.u_sq;
        first.u_bdry_sq = initial.u_bdry_sq;
        first.uv_inertia = initial.uv_inertia;
    }
    let params = match ledger.records.first() {
        Some(first) => blowup_parameters(&cfg.problem, first),
        None => return Err(Failure::new(EXIT_CONFIG, "empty series")),
    };
    let summary = detect_blowup(&ledger, &cfg.problem, termination, t_end, &params)?;
    emit(args, "blowup.json", &summary)?;
    Ok(EXIT_OK)
}

fn cmd_validate_kernel(args: &Common) -> Result<i32, Failure> {
    let cfg = load(args)?;
    let p = &cfg.problem;
    let report = check_hypotheses(&p.kernel, &p.rate(), p.a, &cfg.kernel_grid)?;
    emit(args, "kernel_report.json", &report)?;
    Ok(if report.admissible() {
        EXIT_OK
    } else {
        EXIT_KERNEL_INVALID
    })
}

fn cmd_sweep(args: &SweepArgs) -> Result<i32, Failure> {
    let jobs = args
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .clamp(1, args.configs.len());
    let mut dirs: Vec<PathBuf> = Vec::new();
    for c in &args.configs {
        let stem = c
            .file_stem()
            .map_or("run".into(), |s| s.to_string_lossy().into_owned());
        let mut dir = args.out.join(&stem);
        let mut k = 1;
        while dirs.contains(&dir) {
            k += 1;
            dir = args.out.join(format!("{stem}-{k}"));
        }
        dirs.push(dir);
    }
    let next = AtomicUsize::new(0);
    let codes = Mutex::new(vec![EXIT_OK; args.configs.len()]);
    std::thread::scope(|s| {
        for _ in 0..jobs {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= args.configs.len() {
                    break;
                }
                let common = Common {
                    config: args.configs[i].clone(),
                    out: None,
                    seed: args.seed,
                    series: None,
                };
                let code = match load(&common).and_then(|cfg| simulate_into(&cfg, &dirs[i])) {
                    Ok(c) => c,
                    Err(f) => {
                        eprintln!("{}: {}", args.configs[i].display(), f.message);
                        f.code
                    }
                };
                codes.lock().unwrap()[i] = code;
            });
        }
    });
    let codes = codes.into_inner().unwrap();
    for (c, code) in args.configs.iter().zip(&codes) {
        println!("{}: exit {code}", c.display());
    }
    Ok(codes.into_iter().max().unwrap_or(EXIT_OK))
}
