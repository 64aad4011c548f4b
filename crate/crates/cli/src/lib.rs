//! Command-line front end for the `fracton` engine.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use fracton::ansatz::{exact_parameters, ExactKind};
use fracton::bits::Bits;
use fracton::config::{Direction, RunConfig};
use fracton::diagnostics::{integrated_time, split_rhat, v_score};
use fracton::exact_solver::verify_stabilizer_state;
use fracton::lattice::{build_model, Family};
use fracton::optimizer::{IterationRecord, TrainStatus, TrainingHistory};
use fracton::stabilizer::{build_hamiltonian, ground_state_degeneracy, time_connected_elements};
use fracton::sweep::{detect_hysteresis, read_records, run_sweep, run_training, Axis, Hysteresis, SweepPlan, SweepRecord};

/// Default output root when `--output` is not given.
pub const OUTPUT_ENV: &str = "FRACTON_OUTPUT";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] fracton::Error),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("training diverged: {0}")]
    Diverged(String),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 1 failed check, 2 validation, 3 divergence, 4 IO.
    pub fn exit_code(&self) -> i32 {
        use fracton::Error as E;
        match self {
            CliError::Verification(_) => 1,
            CliError::Diverged(_) => 3,
            CliError::Usage(_) => 2,
            CliError::Io(_) => 4,
            CliError::Core(e) => match e {
                E::Equivalence(_) => 1,
                E::DivergedGradient { .. } => 3,
                E::Io(_) | E::Csv(_) | E::Format(_) | E::Json(_) => 4,
                _ => 2,
            },
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "fracton", version, about = "Neural-network variational Monte Carlo for 3D fracton codes")]
pub struct Cli {
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a closed-form ground state over the full Hilbert space.
    VerifyExact {
        family: Family,
        kind: ExactKind,
        #[arg(num_args = 3, value_names = ["LX", "LY", "LZ"])]
        dims: Vec<usize>,
    },
    /// Print the default run configuration for a lattice.
    Config {
        family: Family,
        #[arg(num_args = 3, value_names = ["LX", "LY", "LZ"])]
        dims: Vec<usize>,
        #[arg(long, value_enum, default_value_t = Dir::RightLeft)]
        direction: Dir,
    },
    /// Train at a single field from a run configuration.
    Train {
        config: PathBuf,
        #[command(flatten)]
        out: OutputArgs,
        /// Start from these parameters instead of a random initialization.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        quiet: bool,
    },
    /// Run one sweep plan, or a left-right and right-left pair followed by the hysteresis report.
    Sweep {
        #[arg(num_args = 1..=2, required = true)]
        plans: Vec<PathBuf>,
        #[command(flatten)]
        out: OutputArgs,
        #[arg(long)]
        quiet: bool,
    },
    /// Hysteresis report from two stored sweep result tables.
    Hysteresis { left_right: PathBuf, right_left: PathBuf },
    /// Time fast against reference connected elements.
    BenchOperators(BenchArgs),
    /// Ground-state degeneracy from the GF(2) rank of the generators.
    Gsd {
        family: Family,
        #[arg(num_args = 3, value_names = ["LX", "LY", "LZ"])]
        dims: Vec<usize>,
    },
    /// Recompute summary diagnostics from a stored training history.
    Diagnose {
        history: PathBuf,
        /// Trailing iterations to summarize.
        #[arg(long, default_value_t = 100)]
        window: usize,
        /// Qubit count for the V-score.
        #[arg(long)]
        n_qubits: Option<usize>,
        #[arg(long, default_value_t = 0.0)]
        offset: f64,
    },
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output directory (defaults to $FRACTON_OUTPUT, then ./runs).
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    pub family: Family,
    #[arg(long, value_delimiter = ',', default_value = "2,4,6,8")]
    pub sizes: Vec<usize>,
    #[arg(long, default_value_t = 2048)]
    pub samples: usize,
    #[arg(long, default_value_t = 0.5)]
    pub field: f64,
    #[arg(long, value_enum, default_value_t = AxisArg::X)]
    pub axis: AxisArg,
    #[arg(long, default_value_t = 3)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Dir {
    LeftRight,
    RightLeft,
}

impl From<Dir> for Direction {
    fn from(d: Dir) -> Self {
        match d {
            Dir::LeftRight => Direction::LeftRight,
            Dir::RightLeft => Direction::RightLeft,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum AxisArg {
    X,
    Y,
    Z,
}

impl From<AxisArg> for Axis {
    fn from(a: AxisArg) -> Self {
        match a {
            AxisArg::X => Axis::X,
            AxisArg::Y => Axis::Y,
            AxisArg::Z => Axis::Z,
        }
    }
}

fn dims3(d: &[usize]) -> [usize; 3] {
    [d[0], d[1], d[2]]
}

pub fn output_root(flag: Option<&Path>) -> PathBuf {
    match flag {
        Some(p) => p.to_path_buf(),
        None => std::env::var_os(OUTPUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs")),
    }
}

/// Runs a parsed command; text for stdout is returned rather than printed.
pub fn run(cli: &Cli) -> CliResult<String> {
    if cli.threads > 0 {
        // A second call in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global();
    }
    match &cli.command {
        Command::VerifyExact { family, kind, dims } => verify_exact(*family, *kind, dims3(dims)),
        Command::Config { family, dims, direction } => {
            Ok(RunConfig::defaults(*family, dims3(dims), (*direction).into())?.to_toml()?)
        }
        Command::Train { config, out, checkpoint, quiet } => train(config, out.output.as_deref(), checkpoint.as_deref(), *quiet),
        Command::Sweep { plans, out, quiet } => sweep(plans, out.output.as_deref(), *quiet),
        Command::Hysteresis { left_right, right_left } => {
            let h = detect_hysteresis(&read_records(left_right)?, &read_records(right_left)?)?;
            Ok(hysteresis_report(&h))
        }
        Command::BenchOperators(args) => bench_operators(args),
        Command::Gsd { family, dims } => {
            let model = build_model(*family, dims3(dims))?;
            let k = ground_state_degeneracy(&model);
            Ok(format!("{family} {:?}: qubits={} log2_gsd={k} gsd={}\n", model.dims, model.n_qubits, 1u128 << k))
        }
        Command::Diagnose { history, window, n_qubits, offset } => diagnose(history, *window, *n_qubits, *offset),
    }
}

pub fn verify_exact(family: Family, kind: ExactKind, dims: [usize; 3]) -> CliResult<String> {
    let model = build_model(family, dims)?;
    let (ansatz, params) = exact_parameters(&model, kind)?;
    let r = verify_stabilizer_state(&model, &ansatz, &params.values)?;
    let verdict = if r.passed() { "PASS" } else { "FAIL" };
    let text = format!(
        "{verdict} {family} {kind:?} {dims:?}: states={} violations={} E={:.12} Var={:.3e} generators={} nonzero_params={}\n",
        r.states,
        r.violations,
        r.energy,
        r.variance,
        r.n_generators,
        params.count_nonzero()
    );
    if r.passed() {
        Ok(text)
    } else {
        Err(CliError::Verification(text))
    }
}

fn progress(quiet: bool) -> impl Fn(&IterationRecord) + Sync {
    move |r: &IterationRecord| {
        if !quiet && r.iteration % 50 == 0 {
            eprintln!("iter {:5} E={:.8} var={:.3e} acc={:.3}", r.iteration, r.energy, r.variance, r.acceptance);
        }
    }
}

pub fn train(config: &Path, output: Option<&Path>, checkpoint: Option<&Path>, quiet: bool) -> CliResult<String> {
    let run = RunConfig::load(config)?;
    run.validate()?;
    let dir = match (output, &run.output) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(p)) => p.clone(),
        (None, None) => output_root(None).join(config.file_stem().unwrap_or_default()),
    };
    let obs = progress(quiet);
    let outcome = run_training(&run, Some(&dir), checkpoint, Some(&obs))?;
    let r = &outcome.record;
    let text = format!(
        "{}: iterations={} energy_per_spin={:.10} ± {:.2e} variance={:.3e} magnetization={:.6} v_score={:.3e}\n",
        dir.display(),
        r.iterations,
        r.energy_per_spin,
        r.energy_err,
        r.variance,
        r.magnetization,
        r.v_score
    );
    match outcome.status {
        TrainStatus::Completed => Ok(text),
        TrainStatus::Diverged { iteration } => Err(CliError::Diverged(format!("iteration {iteration}; {text}"))),
    }
}

pub fn sweep(plans: &[PathBuf], output: Option<&Path>, quiet: bool) -> CliResult<String> {
    let root = output_root(output);
    let obs = progress(quiet);
    let mut text = String::new();
    let mut results: Vec<(Direction, Vec<SweepRecord>)> = Vec::new();
    for path in plans {
        let plan = SweepPlan::load(path)?;
        let recs = run_sweep(&plan, Some(&root), Some(&obs))?;
        let _ = writeln!(text, "{}: {} points -> {}", plan.id, recs.len(), root.join(&plan.id).join("results.csv").display());
        for r in &recs {
            let _ = writeln!(
                text,
                "  h={:.4} e={:.8} m={:.5} iters={}{}",
                r.h,
                r.energy_per_spin,
                r.magnetization,
                r.iterations,
                if r.diverged { " diverged" } else { "" }
            );
        }
        results.push((plan.direction, recs));
    }
    if results.len() == 2 {
        let lr = results.iter().find(|(d, _)| *d == Direction::LeftRight);
        let rl = results.iter().find(|(d, _)| *d == Direction::RightLeft);
        let (Some(lr), Some(rl)) = (lr, rl) else {
            return Err(CliError::Usage("a plan pair needs one left_right and one right_left plan".into()));
        };
        let report = match detect_hysteresis(&lr.1, &rl.1) {
            Ok(h) => hysteresis_report(&h),
            Err(e @ fracton::Error::NoJumpDetected { .. }) => format!("{e}\n"),
            Err(e) => return Err(e.into()),
        };
        std::fs::write(root.join("hysteresis.txt"), &report)?;
        text.push_str(&report);
    }
    let failed = results.iter().flat_map(|(_, r)| r).filter(|r| r.diverged).count();
    if failed > 0 {
        return Err(CliError::Diverged(format!("{failed} sweep points diverged\n{text}")));
    }
    Ok(text)
}

pub fn hysteresis_report(h: &Hysteresis) -> String {
    format!(
        "h_crit={:.4}\nh_energy={:.4}\nh_magnetization={:.4}\njump_lr={:.4}\njump_rl={:.4}\njump_size_lr={:.4}\njump_size_rl={:.4}\nwidth={:.4}\n",
        h.h_crit, h.h_energy, h.h_magnetization, h.jump_lr, h.jump_rl, h.jump_size_lr, h.jump_size_rl, h.width
    )
}

pub fn bench_operators(a: &BenchArgs) -> CliResult<String> {
    let axis: Axis = a.axis.into();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["family", "l", "n_qubits", "n_samples", "mean_count", "fast_ns", "reference_ns", "speedup"])
        .map_err(fracton::Error::from)?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    for &l in &a.sizes {
        let model = build_model(a.family, [l; 3])?;
        let h = build_hamiltonian(&model, axis.field(a.field));
        let configs: Vec<Bits> = (0..a.samples).map(|_| Bits::random(model.n_qubits, &mut rng)).collect();
        let t = time_connected_elements(&h, &configs, a.reps)?;
        w.serialize((
            a.family.to_string(),
            l,
            t.n_qubits,
            t.n_samples,
            t.mean_count,
            t.fast_ns,
            t.reference_ns,
            t.speedup(),
        ))
        .map_err(fracton::Error::from)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
    let text = String::from_utf8_lossy(&bytes).into_owned();
    match &a.csv {
        Some(p) => {
            std::fs::write(p, &text)?;
            Ok(text)
        }
        None => Ok(text),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HistorySummary {
    pub iterations: usize,
    pub window: usize,
    pub final_energy: f64,
    pub mean_energy: f64,
    pub energy_sem: f64,
    pub mean_variance: f64,
    pub trace_tau: f64,
    pub trace_rhat: f64,
    pub acceptance: f64,
    pub rhat: f64,
    pub tau: f64,
    pub v_score: Option<f64>,
}

/// Statistics of the energy trace over the trailing `window` iterations; the trace
/// autocorrelation inflates the standard error and split-R̂ flags drift within the window.
pub fn summarize_history(h: &TrainingHistory, window: usize, n_qubits: Option<usize>, offset: f64) -> CliResult<HistorySummary> {
    let recs = &h.records;
    if recs.is_empty() {
        return Err(CliError::Usage("history is empty".into()));
    }
    let k = window.clamp(1, recs.len());
    let tail = &recs[recs.len() - k..];
    let e: Vec<f64> = tail.iter().map(|r| r.energy).collect();
    let mean = |f: &dyn Fn(&IterationRecord) -> f64| tail.iter().map(f).sum::<f64>() / k as f64;
    let me = mean(&|r| r.energy);
    let mv = mean(&|r| r.variance);
    let tau = if k >= 4 { integrated_time(&e) } else { 1.0 };
    let var_e = e.iter().map(|x| (x - me).powi(2)).sum::<f64>() / (k.max(2) - 1) as f64;
    let rhat = if k >= 4 { split_rhat(&[e.clone()]).value } else { f64::NAN };
    Ok(HistorySummary {
        iterations: recs.len(),
        window: k,
        final_energy: recs[recs.len() - 1].energy,
        mean_energy: me,
        energy_sem: (var_e * tau / k as f64).sqrt(),
        mean_variance: mv,
        trace_tau: tau,
        trace_rhat: rhat,
        acceptance: mean(&|r| r.acceptance),
        rhat: mean(&|r| r.rhat),
        tau: mean(&|r| r.tau),
        v_score: n_qubits.and_then(|n| v_score(me, mv, n, offset).ok()),
    })
}

pub fn diagnose(path: &Path, window: usize, n_qubits: Option<usize>, offset: f64) -> CliResult<String> {
    let s = summarize_history(&TrainingHistory::read_csv(path)?, window, n_qubits, offset)?;
    let mut t = String::new();
    let _ = writeln!(t, "iterations={}", s.iterations);
    let _ = writeln!(t, "window={}", s.window);
    let _ = writeln!(t, "final_energy={:.12}", s.final_energy);
    let _ = writeln!(t, "mean_energy={:.12}", s.mean_energy);
    let _ = writeln!(t, "energy_sem={:.3e}", s.energy_sem);
    let _ = writeln!(t, "mean_variance={:.6e}", s.mean_variance);
    let _ = writeln!(t, "trace_tau_int={:.3}", s.trace_tau);
    let _ = writeln!(t, "trace_split_rhat={:.4}", s.trace_rhat);
    let _ = writeln!(t, "acceptance={:.4}", s.acceptance);
    let _ = writeln!(t, "chain_rhat={:.4}", s.rhat);
    let _ = writeln!(t, "chain_tau={:.4}", s.tau);
    if let Some(v) = s.v_score {
        let _ = writeln!(t, "v_score={v:.6e}");
    }
    Ok(t)
}
