//! Transfer-learning field sweeps, observables and hysteresis analysis.

use std::path::{Path, PathBuf};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::ansatz::checkpoint::{Checkpoint, CheckpointHeader};
use crate::ansatz::{init_random, Ansatz};
use crate::bits::Bits;
use crate::config::{Direction, RunConfig};
use crate::error::{Error, Result};
use crate::exact_solver::OracleCache;
use crate::lattice::LatticeModel;
use crate::optimizer::{
    CheckpointPolicy, Estimation, FullSpace, IterationRecord, LocalEstimator, Observer, SrConfig, TrainStatus, Trainer,
    TrainingHistory,
};
use crate::sampler::{ChainEnsemble, MoveSet, Sampler};
use crate::stabilizer::{build_hamiltonian, Part, PauliHamiltonian, PauliTerm};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    /// Axis of the largest field component; x on ties and at zero field.
    pub fn dominant(field: [f64; 3]) -> Axis {
        let mut best = Axis::X;
        for a in [Axis::Y, Axis::Z] {
            if field[a.index()].abs() > field[best.index()].abs() {
                best = a;
            }
        }
        best
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn field(self, h: f64) -> [f64; 3] {
        let mut f = [0.0; 3];
        f[self.index()] = h;
        f
    }
}

/// `(1/N) Σ_i σ^a_i`.
pub fn magnetization_operator(n: usize, axis: Axis) -> PauliHamiltonian {
    let c = C64::new(1.0 / n as f64, 0.0);
    let terms = (0..n)
        .map(|i| {
            let one = Bits::from_indices(n, &[i]);
            let (x, z) = match axis {
                Axis::X => (one, Bits::zeros(n)),
                Axis::Y => (one.clone(), one),
                Axis::Z => (Bits::zeros(n), one),
            };
            PauliTerm { coefficient: c, x_mask: x, z_mask: z, part: Part::Field }
        })
        .collect();
    PauliHamiltonian::new(n, terms)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPlan {
    pub id: String,
    /// Base configuration; its `field` is replaced at every point.
    pub run: RunConfig,
    pub axis: Axis,
    pub direction: Direction,
    pub fields: Vec<f64>,
    #[serde(default = "default_max_step")]
    pub max_step: f64,
    /// Iterations at transferred points; the first point uses `run.sr.n_iter`.
    #[serde(default)]
    pub transfer_iterations: Option<usize>,
    #[serde(default = "default_retries")]
    pub retries: usize,
    /// Cold-start checkpoint for the first point.
    #[serde(default)]
    pub initial_checkpoint: Option<PathBuf>,
}

fn default_max_step() -> f64 {
    0.1
}

fn default_retries() -> usize {
    1
}

impl SweepPlan {
    pub fn validate(&self) -> Result<()> {
        self.run.validate()?;
        if self.fields.is_empty() {
            return Err(Error::InvalidPlan("no field values".into()));
        }
        for w in self.fields.windows(2) {
            let d = w[1] - w[0];
            let ok = match self.direction {
                Direction::LeftRight => d > 0.0,
                Direction::RightLeft => d < 0.0,
            };
            if !ok {
                return Err(Error::InvalidPlan(format!("fields not monotone for {:?} at {} -> {}", self.direction, w[0], w[1])));
            }
            if d.abs() > self.max_step + 1e-9 {
                return Err(Error::InvalidPlan(format!("step {} -> {} exceeds {}", w[0], w[1], self.max_step)));
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }
}

/// Uniform grid from `a` to `b` (inclusive) in `step`s, rounded to 1e-9.
pub fn grid(a: f64, b: f64, step: f64) -> Vec<f64> {
    let n = ((b - a) / step).abs().round() as usize;
    let s = if b >= a { step.abs() } else { -step.abs() };
    (0..=n).map(|k| ((a + s * k as f64) * 1e9).round() / 1e9).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observables {
    pub energy: f64,
    pub energy_err: f64,
    pub variance: f64,
    pub magnetization: f64,
    pub magnetization_err: f64,
    /// Expectations of the x-generator, z-generator and field parts of `H`.
    pub parts: [f64; 3],
    pub parts_err: [f64; 3],
}

/// Energy, swept-axis magnetization and Hamiltonian-part expectations.
///
/// With `ensemble = None` everything is summed exactly; otherwise `n_expect` samples are drawn
/// and errors come from per-chain means.
pub fn estimate_observables(
    ansatz: &Ansatz,
    params: &[C64],
    h: &PauliHamiltonian,
    axis: Axis,
    sampling: Option<(&Sampler<'_>, &mut ChainEnsemble, &crate::sampler::SampleConfig)>,
) -> Result<Observables> {
    let n = h.n_qubits();
    let m_op = magnetization_operator(n, axis);
    match sampling {
        None => {
            let space = FullSpace::new(n, None)?;
            let (logs, table) = space.log_table(ansatz, params);
            let w = space.weights(&logs);
            let e = space.local_parts(h, &logs, &table);
            let m = space.local_parts(&m_op, &logs, &table);
            let mut parts = [0.0; 3];
            let mut mag = 0.0;
            let live: Vec<usize> = (0..w.len()).filter(|&i| w[i] > 0.0).collect();
            for &i in &live {
                for k in 0..3 {
                    parts[k] += w[i] * e[i][k].re;
                }
                mag += w[i] * (m[i][0] + m[i][1] + m[i][2]).re;
            }
            let energy = parts.iter().sum::<f64>();
            let variance = live.iter().map(|&i| w[i] * ((e[i][0] + e[i][1] + e[i][2]).re - energy).powi(2)).sum();
            Ok(Observables {
                energy,
                energy_err: 0.0,
                variance,
                magnetization: mag,
                magnetization_err: 0.0,
                parts,
                parts_err: [0.0; 3],
            })
        }
        Some((sampler, ens, cfg)) => {
            let set = sampler.sample(params, ens, cfg)?;
            let e = LocalEstimator::new(h, ansatz).batch_parts(ansatz, params, &set.states)?;
            let m = LocalEstimator::new(&m_op, ansatz).batch_parts(ansatz, params, &set.states)?;
            let series = |f: &dyn Fn(usize) -> f64| -> Vec<f64> { (0..set.states.len()).map(f).collect() };
            let total = series(&|i| (e[i][0] + e[i][1] + e[i][2]).re);
            let (energy, energy_err) = chain_mean(&total, set.per_chain);
            let variance = total.iter().map(|x| (x - energy).powi(2)).sum::<f64>() / total.len() as f64;
            let (magnetization, magnetization_err) = chain_mean(&series(&|i| (m[i][0] + m[i][1] + m[i][2]).re), set.per_chain);
            let mut parts = [0.0; 3];
            let mut parts_err = [0.0; 3];
            for k in 0..3 {
                (parts[k], parts_err[k]) = chain_mean(&series(&|i| e[i][k].re), set.per_chain);
            }
            Ok(Observables { energy, energy_err, variance, magnetization, magnetization_err, parts, parts_err })
        }
    }
}

/// Mean and standard error with one block per chain.
pub fn chain_mean(values: &[f64], per_chain: usize) -> (f64, f64) {
    let means: Vec<f64> = values.chunks(per_chain).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect();
    let k = means.len() as f64;
    let mean = means.iter().sum::<f64>() / k;
    if means.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub h: f64,
    pub energy_per_spin: f64,
    pub energy_err: f64,
    pub variance: f64,
    pub magnetization: f64,
    pub magnetization_err: f64,
    /// x-generator part divided by the number of x-generators.
    pub x_part_per_generator: f64,
    pub z_part_per_generator: f64,
    pub field_part_per_spin: f64,
    pub acceptance: f64,
    pub rhat: f64,
    pub tau: f64,
    pub v_score: f64,
    pub iterations: usize,
    pub diverged: bool,
    pub params_in: String,
    pub params_out: String,
    pub checkpoint: String,
}

impl SweepRecord {
    fn from_observables(h: f64, model: &LatticeModel, o: &Observables) -> Self {
        let n = model.n_qubits as f64;
        SweepRecord {
            h,
            energy_per_spin: o.energy / n,
            energy_err: o.energy_err / n,
            variance: o.variance,
            magnetization: o.magnetization,
            magnetization_err: o.magnetization_err,
            x_part_per_generator: o.parts[0] / model.x_stabilizers.len() as f64,
            z_part_per_generator: o.parts[1] / model.z_stabilizers.len() as f64,
            field_part_per_spin: o.parts[2] / n,
            acceptance: f64::NAN,
            rhat: f64::NAN,
            tau: f64::NAN,
            v_score: f64::NAN,
            iterations: 0,
            diverged: false,
            params_in: String::new(),
            params_out: String::new(),
            checkpoint: String::new(),
        }
    }
}

pub fn write_records(path: &Path, records: &[SweepRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records(path: &Path) -> Result<Vec<SweepRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<Vec<SweepRecord>, _>>()?)
}

/// Diagnostics averaged over the trailing iterations of a history.
fn tail_mean(records: &[IterationRecord], f: impl Fn(&IterationRecord) -> f64) -> f64 {
    let k = records.len().min(20);
    if k == 0 {
        return f64::NAN;
    }
    records[records.len() - k..].iter().map(f).sum::<f64>() / k as f64
}

fn point_dir(root: &Path, id: &str, h: f64) -> PathBuf {
    root.join(id).join(format!("h-{h:.4}"))
}

struct Point<'a> {
    run: &'a RunConfig,
    model: &'a LatticeModel,
    ansatz: &'a Ansatz,
    moves: &'a MoveSet,
    field: [f64; 3],
    axis: Axis,
    h: f64,
    sr: SrConfig,
    dir: Option<PathBuf>,
    retries: usize,
    chain_seed: u64,
}

struct PointResult {
    record: SweepRecord,
    history: TrainingHistory,
    status: TrainStatus,
}

/// Trains one point, then evaluates observables; on success `params`/`ensemble` are advanced.
fn train_point(
    pt: &Point<'_>,
    params: &mut Vec<C64>,
    ensemble: &mut Option<ChainEnsemble>,
    observer: Option<Observer<'_>>,
) -> Result<PointResult> {
    let run = pt.run;
    let h = build_hamiltonian(pt.model, pt.field);
    let estimation = match &run.sampling {
        None => Estimation::FullSummation,
        Some(s) => Estimation::Sampled {
            config: s.training(),
            n_chains: s.n_chains,
            rule: run.update_rule.clone(),
            moves: pt.moves.clone(),
        },
    };
    let header = CheckpointHeader {
        architecture: run.architecture.clone(),
        family: pt.model.family,
        dims: pt.model.dims,
        seed: run.seed,
        iteration: 0,
        field: pt.field,
    };
    let trainer = Trainer {
        model: pt.model,
        hamiltonian: &h,
        ansatz: pt.ansatz,
        estimation,
        sr: pt.sr.clone(),
        checkpoints: pt.dir.as_ref().map(|d| CheckpointPolicy { dir: d.clone(), every: run.checkpoint_every, header: header.clone() }),
        observer,
        stop: None,
    };
    let params_in = OracleCache::params_hash(params);
    let mut attempt = 0;
    let (result, diverged) = loop {
        let res = trainer.train(params.clone(), ensemble.clone(), pt.chain_seed)?;
        match res.status {
            TrainStatus::Completed => break (res, false),
            TrainStatus::Diverged { .. } if attempt < pt.retries => attempt += 1,
            TrainStatus::Diverged { .. } => break (res, true),
        }
    };
    let iterations = result.history.len();
    if !diverged {
        *params = result.params.clone();
        *ensemble = result.ensemble.clone();
    }
    if let (Some(s), None) = (&run.sampling, ensemble.as_ref()) {
        *ensemble = Some(ChainEnsemble::new(s.n_chains, pt.model.n_qubits, pt.chain_seed));
    }
    let obs = match (&run.sampling, ensemble.as_mut()) {
        (Some(s), Some(ens)) => {
            let sampler = Sampler::new(pt.ansatz, pt.moves, run.update_rule.clone())?;
            estimate_observables(pt.ansatz, params, &h, pt.axis, Some((&sampler, ens, &s.expectation())))?
        }
        _ => estimate_observables(pt.ansatz, params, &h, pt.axis, None)?,
    };
    let mut rec = SweepRecord::from_observables(pt.h, pt.model, &obs);
    let hist = &result.history.records;
    rec.acceptance = tail_mean(hist, |r| r.acceptance);
    rec.rhat = tail_mean(hist, |r| r.rhat);
    rec.tau = tail_mean(hist, |r| r.tau);
    rec.v_score = crate::diagnostics::v_score(obs.energy, obs.variance, pt.model.n_qubits, 0.0).unwrap_or(f64::NAN);
    rec.iterations = iterations;
    rec.diverged = diverged;
    rec.params_in = params_in;
    rec.params_out = OracleCache::params_hash(params);
    if let Some(d) = &pt.dir {
        std::fs::create_dir_all(d)?;
        let mut header = header;
        header.iteration = iterations;
        Checkpoint { header, values: params.clone() }.save(&d.join("params.ckpt"))?;
        if let Some(e) = ensemble.as_ref() {
            e.save(&d.join("chains.bin"))?;
        }
        result.history.write_csv(&d.join("history.csv"))?;
        rec.checkpoint = d.display().to_string();
    }
    Ok(PointResult { record: rec, history: result.history, status: result.status })
}

fn initial_params(run: &RunConfig, ansatz: &Ansatz, checkpoint: Option<&Path>) -> Result<Vec<C64>> {
    match checkpoint {
        Some(p) => {
            let ck = Checkpoint::load(p)?;
            if ck.values.len() != ansatz.n_params() {
                return Err(Error::InvalidConfig("initial checkpoint does not match the architecture".into()));
            }
            Ok(ck.values)
        }
        None => Ok(init_random(ansatz.n_params(), run.seed, run.init_std)),
    }
}

/// Trains at every field value in order, carrying parameters and chain states forward.
///
/// Diverged points are retried from the last good parameters with a fresh warmup; if every
/// retry fails the record is marked and the sweep continues from the last good state.
pub fn run_sweep(plan: &SweepPlan, out: Option<&Path>, observer: Option<Observer<'_>>) -> Result<Vec<SweepRecord>> {
    plan.validate()?;
    let run = &plan.run;
    let model = run.model.build()?;
    let ansatz = Ansatz::new(&model, run.architecture.clone())?;
    let mut params = initial_params(run, &ansatz, plan.initial_checkpoint.as_deref())?;
    let moves = MoveSet::from_model(&model);
    let mut ensemble: Option<ChainEnsemble> = None;
    let mut records = Vec::with_capacity(plan.fields.len());
    if let Some(root) = out {
        std::fs::create_dir_all(root.join(&plan.id))?;
        std::fs::write(root.join(&plan.id).join("plan.toml"), plan.to_toml()?)?;
    }

    for (k, &hval) in plan.fields.iter().enumerate() {
        let mut sr = run.sr.clone();
        if k > 0 {
            if let Some(t) = plan.transfer_iterations {
                sr.n_iter = t;
            }
        }
        let pt = Point {
            run,
            model: &model,
            ansatz: &ansatz,
            moves: &moves,
            field: plan.axis.field(hval),
            axis: plan.axis,
            h: hval,
            sr,
            dir: out.map(|root| point_dir(root, &plan.id, hval)),
            retries: plan.retries,
            chain_seed: run.seed.wrapping_add(k as u64),
        };
        records.push(train_point(&pt, &mut params, &mut ensemble, observer)?.record);
        if let Some(root) = out {
            write_records(&root.join(&plan.id).join("results.csv"), &records)?;
        }
    }
    Ok(records)
}

pub struct RunOutcome {
    pub record: SweepRecord,
    pub history: TrainingHistory,
    pub status: TrainStatus,
    pub params: Vec<C64>,
}

/// Single training run at `run.field`; observables are reported along the dominant field axis.
///
/// With an output directory it writes `config.toml`, `params.ckpt`, `chains.bin`,
/// `history.csv` and a one-row `summary.csv`.
pub fn run_training(
    run: &RunConfig,
    out: Option<&Path>,
    initial_checkpoint: Option<&Path>,
    observer: Option<Observer<'_>>,
) -> Result<RunOutcome> {
    run.validate()?;
    let model = run.model.build()?;
    let ansatz = Ansatz::new(&model, run.architecture.clone())?;
    let mut params = initial_params(run, &ansatz, initial_checkpoint)?;
    let moves = MoveSet::from_model(&model);
    let axis = Axis::dominant(run.field);
    if let Some(d) = out {
        std::fs::create_dir_all(d)?;
        std::fs::write(d.join("config.toml"), run.to_toml()?)?;
    }
    let pt = Point {
        run,
        model: &model,
        ansatz: &ansatz,
        moves: &moves,
        field: run.field,
        axis,
        h: run.field[axis.index()],
        sr: run.sr.clone(),
        dir: out.map(Path::to_path_buf),
        retries: 0,
        chain_seed: run.seed,
    };
    let mut ensemble = None;
    let res = train_point(&pt, &mut params, &mut ensemble, observer)?;
    if let Some(d) = out {
        write_records(&d.join("summary.csv"), std::slice::from_ref(&res.record))?;
    }
    Ok(RunOutcome { record: res.record, history: res.history, status: res.status, params })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hysteresis {
    pub h_crit: f64,
    /// Crossing of the two energy branches, or the jump midpoint if they never cross.
    pub h_energy: f64,
    pub h_magnetization: f64,
    pub jump_lr: f64,
    pub jump_rl: f64,
    pub jump_size_lr: f64,
    pub jump_size_rl: f64,
    pub width: f64,
}

pub const JUMP_THRESHOLD: f64 = 0.1;

fn sorted(records: &[SweepRecord]) -> Vec<&SweepRecord> {
    let mut v: Vec<&SweepRecord> = records.iter().collect();
    v.sort_by(|a, b| a.h.total_cmp(&b.h));
    v
}

/// Location (midpoint of the pair) and size of the largest consecutive magnetization change.
fn jump(records: &[&SweepRecord]) -> (f64, f64) {
    records
        .windows(2)
        .map(|w| ((w[0].h + w[1].h) / 2.0, (w[1].magnetization - w[0].magnetization).abs()))
        .fold((f64::NAN, 0.0), |best, c| if c.1 > best.1 { c } else { best })
}

fn interp(records: &[&SweepRecord], h: f64) -> f64 {
    let i = records.partition_point(|r| r.h < h);
    if i == 0 {
        return records[0].energy_per_spin;
    }
    if i == records.len() {
        return records[i - 1].energy_per_spin;
    }
    let (a, b) = (records[i - 1], records[i]);
    if b.h == h {
        return b.energy_per_spin;
    }
    a.energy_per_spin + (b.energy_per_spin - a.energy_per_spin) * (h - a.h) / (b.h - a.h)
}

/// `h_crit` as the mean of the energy-crossing field and the midpoint of the two jumps.
pub fn detect_hysteresis(lr: &[SweepRecord], rl: &[SweepRecord]) -> Result<Hysteresis> {
    let (lr, rl) = (sorted(lr), sorted(rl));
    if lr.len() < 2 || rl.len() < 2 {
        return Err(Error::InvalidPlan("each branch needs at least two points".into()));
    }
    let (jump_lr, size_lr) = jump(&lr);
    let (jump_rl, size_rl) = jump(&rl);
    if size_lr < JUMP_THRESHOLD || size_rl < JUMP_THRESHOLD {
        return Err(Error::NoJumpDetected { threshold: JUMP_THRESHOLD });
    }
    let h_magnetization = (jump_lr + jump_rl) / 2.0;
    let lo = lr[0].h.max(rl[0].h);
    let hi = lr[lr.len() - 1].h.min(rl[rl.len() - 1].h);
    let mut hs: Vec<f64> = lr.iter().chain(&rl).map(|r| r.h).filter(|&h| h >= lo && h <= hi).collect();
    hs.sort_by(f64::total_cmp);
    hs.dedup();
    let d: Vec<f64> = hs.iter().map(|&h| interp(&lr, h) - interp(&rl, h)).collect();
    let nonzero: Vec<usize> = (0..hs.len()).filter(|&i| d[i] != 0.0).collect();
    let mut crossings = Vec::new();
    for w in nonzero.windows(2) {
        let (i, j) = (w[0], w[1]);
        if (d[i] < 0.0) == (d[j] < 0.0) {
            continue;
        }
        crossings.push(if j == i + 1 {
            hs[i] + (hs[j] - hs[i]) * d[i] / (d[i] - d[j])
        } else {
            (hs[i + 1] + hs[j - 1]) / 2.0
        });
    }
    let h_energy = crossings
        .iter()
        .copied()
        .min_by(|a, b| (a - h_magnetization).abs().total_cmp(&(b - h_magnetization).abs()))
        .unwrap_or(h_magnetization);
    Ok(Hysteresis {
        h_crit: (h_energy + h_magnetization) / 2.0,
        h_energy,
        h_magnetization,
        jump_lr,
        jump_rl,
        jump_size_lr: size_lr,
        jump_size_rl: size_rl,
        width: (jump_lr - jump_rl).abs(),
    })
}
