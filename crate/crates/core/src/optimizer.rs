//! Stochastic reconfiguration: local estimators, forces, QGT solves and the training loop.

use std::path::PathBuf;

use matrixmultiply::dgemm;
use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ansatz::checkpoint::{Checkpoint, CheckpointHeader};
use crate::ansatz::{is_zero_amplitude, Ansatz, EvalState, FlipPlan};
use crate::bits::{self, Bits};
use crate::diagnostics;
use crate::error::{Error, Result};
use crate::exact_solver::{spins_of, SUMMATION_LIMIT};
use crate::lattice::LatticeModel;
use crate::sampler::{ChainEnsemble, MoveSet, SampleConfig, SampleSet, Sampler, UpdateRule};
use crate::stabilizer::PauliHamiltonian;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Off-diagonal terms of a Pauli operator compiled into flip plans for one ansatz.
pub struct LocalEstimator<'a> {
    h: &'a PauliHamiltonian,
    plans: Vec<FlipPlan>,
}

impl<'a> LocalEstimator<'a> {
    pub fn new(h: &'a PauliHamiltonian, ansatz: &Ansatz) -> Self {
        let n = h.n_qubits();
        let plans = (0..h.n_offdiagonal())
            .map(|k| ansatz.flip_plan(&Bits::from_words(n, h.offdiagonal_mask(k)).ones()))
            .collect();
        LocalEstimator { h, plans }
    }

    /// `E_loc(σ)` split by Hamiltonian part.
    pub fn parts(&self, ansatz: &Ansatz, params: &[C64], st: &EvalState, ws: &mut crate::ansatz::Workspace) -> Result<[C64; 3]> {
        if is_zero_amplitude(st.log_psi) {
            return Err(Error::DerivativeAtZeroAmplitude);
        }
        let s = Bits::from_spins(&st.spins);
        let sw = s.words();
        let mut parts = self.h.diagonal_parts(sw);
        for (k, plan) in self.plans.iter().enumerate() {
            let r = ansatz.log_ratio(params, st, plan, ws);
            if is_zero_amplitude(r) {
                continue;
            }
            parts[self.h.offdiagonal_part(k).index()] += self.h.offdiagonal_element(k, sw) * r.exp();
        }
        Ok(parts)
    }

    pub fn value(&self, ansatz: &Ansatz, params: &[C64], st: &EvalState, ws: &mut crate::ansatz::Workspace) -> Result<C64> {
        let p = self.parts(ansatz, params, st, ws)?;
        Ok(p[0] + p[1] + p[2])
    }

    pub fn batch_parts(&self, ansatz: &Ansatz, params: &[C64], states: &[EvalState]) -> Result<Vec<[C64; 3]>> {
        states
            .par_iter()
            .map_init(|| ansatz.workspace(), |ws, st| self.parts(ansatz, params, st, ws))
            .collect()
    }
}

/// `E_loc(σ_i) = Σ_η ⟨σ_i|H|η⟩ ψ(η)/ψ(σ_i)` for every sample.
pub fn local_estimators(h: &PauliHamiltonian, ansatz: &Ansatz, params: &[C64], states: &[EvalState]) -> Result<Vec<C64>> {
    let est = LocalEstimator::new(h, ansatz);
    Ok(est.batch_parts(ansatz, params, states)?.into_iter().map(|p| p[0] + p[1] + p[2]).collect())
}

/// Row-major matrix of log-derivatives, one row per sample.
pub fn log_derivative_matrix(ansatz: &Ansatz, params: &[C64], states: &[EvalState]) -> Result<Vec<C64>> {
    let p = ansatz.n_params();
    let mut out = vec![ZERO; states.len() * p];
    out.par_chunks_mut(p.max(1))
        .zip(states.par_iter())
        .try_for_each(|(row, st)| ansatz.log_derivs_state(params, st, row))?;
    Ok(out)
}

/// Weighted means of the rows of `o` (`n × p`, row-major).
pub fn weighted_mean_rows(o: &[C64], weights: &[f64], p: usize) -> Vec<C64> {
    let mut m = vec![ZERO; p];
    for (row, &w) in o.chunks(p).zip(weights) {
        for (mj, oj) in m.iter_mut().zip(row) {
            *mj += w * oj;
        }
    }
    m
}

/// `f_j = ⟨O_j* E⟩ − ⟨O_j*⟩⟨E⟩` with normalized weights.
pub fn forces(e_loc: &[C64], o: &[C64], weights: &[f64], p: usize) -> Vec<C64> {
    let e_mean: C64 = e_loc.iter().zip(weights).map(|(e, w)| w * e).sum();
    let mut f = vec![ZERO; p];
    let mut o_mean = vec![ZERO; p];
    for ((row, e), &w) in o.chunks(p).zip(e_loc).zip(weights) {
        let we = w * e;
        for j in 0..p {
            let c = row[j].conj();
            f[j] += c * we;
            o_mean[j] += w * c;
        }
    }
    for j in 0..p {
        f[j] -= o_mean[j] * e_mean;
    }
    f
}

/// Uniform-weight forces for a sample set.
pub fn sample_forces(e_loc: &[C64], o: &[C64], p: usize) -> Vec<C64> {
    let w = vec![1.0 / e_loc.len() as f64; e_loc.len()];
    forces(e_loc, o, &w, p)
}

/// Gradient of the energy in the realified parameters `(Re θ, Im θ)` of a holomorphic ansatz.
pub fn energy_gradient_real(f: &[C64]) -> Vec<f64> {
    f.iter().map(|x| 2.0 * x.re).chain(f.iter().map(|x| 2.0 * x.im)).collect()
}

/// Centered derivative matrix `Ō_ij = √w_i (O_ij − ⟨O_j⟩)`.
pub fn centered(o: &[C64], weights: &[f64], p: usize) -> Vec<C64> {
    let mean = weighted_mean_rows(o, weights, p);
    let mut out = Vec::with_capacity(o.len());
    for (row, &w) in o.chunks(p).zip(weights) {
        let s = w.sqrt();
        out.extend(row.iter().zip(&mean).map(|(x, m)| s * (x - m)));
    }
    out
}

const GEMM_BLOCK: usize = 64;

/// `C(p×p) += Xᵀ Y` for row-major `X`, `Y` of shape `n × p`, restricted to a column block pair.
fn gemm_tn(n: usize, p: usize, x: &[f64], y: &[f64], c: &mut [f64], rows: (usize, usize), cols: (usize, usize)) {
    let (r0, r1) = rows;
    let (c0, c1) = cols;
    unsafe {
        dgemm(
            r1 - r0,
            n,
            c1 - c0,
            1.0,
            x.as_ptr().add(r0),
            1,
            p as isize,
            y.as_ptr().add(c0),
            p as isize,
            1,
            1.0,
            c.as_mut_ptr().add(r0 * p + c0),
            p as isize,
            1,
        );
    }
}

/// Accumulates `S += Ō†Ō` for a block of rows. The symmetric real part is built from
/// upper-triangular GEMM blocks and the antisymmetric imaginary part from one `AᵀB`.
pub fn accumulate_qgt(obar: &[C64], p: usize, s: &mut [C64]) {
    let n = obar.len() / p;
    if n == 0 {
        return;
    }
    let mut ab = vec![0.0f64; 2 * n * p];
    let (a, b) = ab.split_at_mut(n * p);
    for (k, x) in obar.iter().enumerate() {
        a[k] = x.re;
        b[k] = x.im;
    }
    let (a, b) = (&ab[..n * p], &ab[n * p..]);
    let mut re = vec![0.0f64; p * p];
    let blocks: Vec<(usize, usize)> = (0..p).step_by(GEMM_BLOCK).map(|s| (s, (s + GEMM_BLOCK).min(p))).collect();
    for (i, &bi) in blocks.iter().enumerate() {
        for &bj in &blocks[i..] {
            gemm_tn(2 * n, p, &ab, &ab, &mut re, bi, bj);
        }
    }
    let mut im = vec![0.0f64; p * p];
    gemm_tn(n, p, a, b, &mut im, (0, p), (0, p));
    let block_of = |k: usize| k / GEMM_BLOCK;
    for i in 0..p {
        for j in 0..p {
            let r = if block_of(i) <= block_of(j) { re[i * p + j] } else { re[j * p + i] };
            s[i * p + j] += C64::new(r, im[i * p + j] - im[j * p + i]);
        }
    }
}

pub fn qgt_dense(obar: &[C64], p: usize) -> Vec<C64> {
    let mut s = vec![ZERO; p * p];
    accumulate_qgt(obar, p, &mut s);
    s
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Solver {
    /// Matrix-free CG; `max_iter = 0` means the number of parameters.
    ConjugateGradient { max_iter: usize, tol: f64 },
    DirectPseudoInverse,
}

impl Default for Solver {
    fn default() -> Self {
        Solver::ConjugateGradient { max_iter: 0, tol: 1e-6 }
    }
}

/// Solves `(S + εI) x = f` with `S` given densely (row-major `p × p`).
pub fn solve_dense(s: &[C64], f: &[C64], eps: f64) -> Vec<C64> {
    let p = f.len();
    let mut m = DMatrix::<C64>::from_row_slice(p, p, s);
    for i in 0..p {
        m[(i, i)] += eps;
    }
    let rhs = DVector::<C64>::from_column_slice(f);
    if let Some(ch) = Cholesky::new(m.clone()) {
        let x = ch.solve(&rhs);
        if x.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
            return x.iter().copied().collect();
        }
    }
    let eig = SymmetricEigen::new(m);
    let max = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let cut = max * 1e-12;
    let u = &eig.eigenvectors;
    let coeff = u.adjoint() * rhs;
    let mut x = DVector::<C64>::zeros(p);
    for k in 0..p {
        let l = eig.eigenvalues[k];
        if l.abs() > cut {
            x += u.column(k) * (coeff[k] / l);
        }
    }
    x.iter().copied().collect()
}

/// CG on `(Ō†Ō + εI) x = f`, applying `S` as `Ō†(Ō v)`.
pub fn solve_cg(obar: &[C64], p: usize, f: &[C64], eps: f64, x0: Option<&[C64]>, max_iter: usize, tol: f64) -> Result<Vec<C64>> {
    let n = obar.len() / p;
    let apply = |v: &[C64], out: &mut [C64]| {
        let u: Vec<C64> = obar.par_chunks(p).map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect();
        out.iter_mut().for_each(|o| *o = ZERO);
        for r in 0..n {
            let ur = u[r];
            let row = &obar[r * p..(r + 1) * p];
            for j in 0..p {
                out[j] += row[j].conj() * ur;
            }
        }
        for j in 0..p {
            out[j] += eps * v[j];
        }
    };
    let dot = |a: &[C64], b: &[C64]| -> C64 { a.iter().zip(b).map(|(x, y)| x.conj() * y).sum() };
    let fnorm = dot(f, f).re.sqrt();
    let mut x: Vec<C64> = x0.map(|v| v.to_vec()).unwrap_or_else(|| vec![ZERO; p]);
    if fnorm == 0.0 {
        return Ok(vec![ZERO; p]);
    }
    let mut ax = vec![ZERO; p];
    apply(&x, &mut ax);
    let mut r: Vec<C64> = f.iter().zip(&ax).map(|(a, b)| a - b).collect();
    let mut d = r.clone();
    let mut rr = dot(&r, &r).re;
    let mut ad = vec![ZERO; p];
    let max_iter = if max_iter == 0 { p } else { max_iter };
    for _ in 0..max_iter {
        if rr.sqrt() <= tol * fnorm {
            return Ok(x);
        }
        apply(&d, &mut ad);
        let alpha = rr / dot(&d, &ad).re;
        for j in 0..p {
            x[j] += alpha * d[j];
            r[j] -= alpha * ad[j];
        }
        let rr_new = dot(&r, &r).re;
        let beta = rr_new / rr;
        rr = rr_new;
        for j in 0..p {
            d[j] = r[j] + beta * d[j];
        }
    }
    if rr.sqrt() <= tol * fnorm {
        Ok(x)
    } else {
        Err(Error::CgNoConvergence { iterations: max_iter, residual: rr.sqrt() / fnorm })
    }
}

/// Update direction `(S + εI)⁻¹ f` from the centered derivative matrix.
pub fn qgt_solve(obar: &[C64], p: usize, f: &[C64], eps: f64, solver: Solver) -> Result<Vec<C64>> {
    match solver {
        Solver::DirectPseudoInverse => Ok(solve_dense(&qgt_dense(obar, p), f, eps)),
        Solver::ConjugateGradient { max_iter, tol } => solve_cg(obar, p, f, eps, None, max_iter, tol),
    }
}

/// Holds `start` for `warmup` iterations, then interpolates geometrically to `end` at `n_iter − 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub start: f64,
    pub end: f64,
}

impl Schedule {
    pub fn constant(v: f64) -> Self {
        Schedule { start: v, end: v }
    }

    pub fn value(&self, it: usize, n_iter: usize, warmup: usize) -> f64 {
        if it <= warmup || n_iter <= warmup + 1 || self.start == self.end {
            return self.start;
        }
        let t = ((it - warmup) as f64 / (n_iter - 1 - warmup) as f64).min(1.0);
        if self.start > 0.0 && self.end > 0.0 {
            self.start * (self.end / self.start).powf(t)
        } else {
            self.start + (self.end - self.start) * t
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SrConfig {
    pub n_iter: usize,
    pub learning_rate: Schedule,
    pub diag_shift: Schedule,
    pub warmup: usize,
    pub solver: Solver,
    pub grad_clip: f64,
}

impl Default for SrConfig {
    fn default() -> Self {
        SrConfig {
            n_iter: 1200,
            learning_rate: Schedule { start: 1e-2, end: 1e-3 },
            diag_shift: Schedule { start: 1e-4, end: 1e-5 },
            warmup: 300,
            solver: Solver::default(),
            grad_clip: 1e3,
        }
    }
}

impl SrConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_iter == 0 {
            return Err(Error::InvalidConfig("n_iter must be positive".into()));
        }
        let s = [self.learning_rate.start, self.learning_rate.end];
        if s.iter().any(|&g| !(g > 0.0)) {
            return Err(Error::InvalidConfig("learning rate must be positive".into()));
        }
        if [self.diag_shift.start, self.diag_shift.end].iter().any(|&e| !(e >= 0.0)) {
            return Err(Error::InvalidConfig("diagonal shift must be non-negative".into()));
        }
        Ok(())
    }
}

/// One row of the training history.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub energy: f64,
    pub energy_imag: f64,
    pub variance: f64,
    pub acceptance: f64,
    pub rhat: f64,
    pub tau: f64,
    pub v_score: f64,
    pub grad_norm: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingHistory {
    pub records: Vec<IterationRecord>,
}

impl TrainingHistory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn energies(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.energy).collect()
    }

    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for r in &self.records {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &std::path::Path) -> Result<Self> {
        let mut rd = csv::Reader::from_path(path)?;
        let records = rd.deserialize().collect::<std::result::Result<Vec<IterationRecord>, _>>()?;
        Ok(TrainingHistory { records })
    }
}

/// Exact-enumeration estimator with optional orbit reduction under a permutation group.
pub struct FullSpace {
    pub n: usize,
    pub reps: Vec<u64>,
    pub multiplicity: Vec<f64>,
    rep_of: Vec<u32>,
}

impl FullSpace {
    pub fn new(n: usize, group: Option<&[Vec<usize>]>) -> Result<Self> {
        if n > SUMMATION_LIMIT {
            return Err(Error::TooLarge { n, limit: SUMMATION_LIMIT });
        }
        let dim = 1usize << n;
        let Some(perms) = group.filter(|g| g.len() > 1) else {
            return Ok(FullSpace {
                n,
                reps: (0..dim as u64).collect(),
                multiplicity: vec![1.0; dim],
                rep_of: (0..dim as u32).collect(),
            });
        };
        let mut rep_of = vec![u32::MAX; dim];
        let mut reps = Vec::new();
        let mut multiplicity = Vec::new();
        for x in 0..dim as u64 {
            if rep_of[x as usize] != u32::MAX {
                continue;
            }
            let id = reps.len() as u32;
            let mut count = 0.0;
            for p in perms {
                let y = bits::permute_u64(x, p) as usize;
                if rep_of[y] == u32::MAX {
                    rep_of[y] = id;
                    count += 1.0;
                }
            }
            reps.push(x);
            multiplicity.push(count);
        }
        Ok(FullSpace { n, reps, multiplicity, rep_of })
    }

    pub fn log_table(&self, ansatz: &Ansatz, params: &[C64]) -> (Vec<C64>, Vec<C64>) {
        let n = self.n;
        let rep_logs: Vec<C64> = self
            .reps
            .par_iter()
            .map_init(|| vec![0i8; n], |buf, &x| {
                spins_of(x, n, buf);
                ansatz.log_psi(params, buf)
            })
            .collect();
        let table = self.rep_of.iter().map(|&r| rep_logs[r as usize]).collect();
        (rep_logs, table)
    }

    /// Normalized Born weights of the representatives (orbit multiplicity included).
    pub fn weights(&self, rep_logs: &[C64]) -> Vec<f64> {
        let max = rep_logs.iter().filter(|l| !is_zero_amplitude(**l)).map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = rep_logs
            .iter()
            .zip(&self.multiplicity)
            .map(|(l, m)| if is_zero_amplitude(*l) { 0.0 } else { m * (2.0 * (l.re - max)).exp() })
            .collect();
        let z: f64 = w.iter().sum();
        w.into_iter().map(|x| x / z).collect()
    }

    /// Local estimator parts of `h` at each representative.
    pub fn local_parts(&self, h: &PauliHamiltonian, rep_logs: &[C64], table: &[C64]) -> Vec<[C64; 3]> {
        let nt = h.n_offdiagonal();
        let masks: Vec<u64> = (0..nt).map(|k| h.offdiagonal_mask(k)[0]).collect();
        self.reps
            .par_iter()
            .zip(rep_logs.par_iter())
            .map(|(&x, &l)| {
                if is_zero_amplitude(l) {
                    return [ZERO; 3];
                }
                let s = [x];
                let mut parts = h.diagonal_parts(&s);
                for k in 0..nt {
                    let le = table[(x ^ masks[k]) as usize];
                    if !is_zero_amplitude(le) {
                        parts[h.offdiagonal_part(k).index()] += h.offdiagonal_element(k, &s) * (le - l).exp();
                    }
                }
                parts
            })
            .collect()
    }

    fn derivs_block(&self, ansatz: &Ansatz, params: &[C64], idx: &[usize]) -> Result<Vec<C64>> {
        let p = ansatz.n_params();
        let n = self.n;
        let mut out = vec![ZERO; idx.len() * p];
        out.par_chunks_mut(p)
            .zip(idx.par_iter())
            .try_for_each_init(|| vec![0i8; n], |buf, (row, &r)| {
                spins_of(self.reps[r], n, buf);
                ansatz.log_derivs(params, buf, row)
            })?;
        Ok(out)
    }
}

/// Exact energy statistics plus the SR ingredients of one iteration.
pub struct ExactStep {
    pub energy: C64,
    pub variance: f64,
    pub parts: [C64; 3],
    pub forces: Vec<C64>,
    pub qgt: Option<Vec<C64>>,
}

const BLOCK: usize = 8192;
const STORE_LIMIT: usize = 1 << 25;
/// Probability mass left out of the force and QGT sums.
pub const PRUNE_WEIGHT: f64 = 1e-12;

/// States carrying all but `PRUNE_WEIGHT` of the total probability, in index order.
fn significant(w: &[f64], live: &[usize]) -> Vec<usize> {
    let mut order = live.to_vec();
    order.sort_by(|&a, &b| w[a].total_cmp(&w[b]));
    let mut tail = 0.0;
    let mut cut = 0;
    for (k, &i) in order.iter().enumerate() {
        tail += w[i];
        if tail > PRUNE_WEIGHT {
            cut = k;
            break;
        }
    }
    let mut kept = order.split_off(cut);
    kept.sort_unstable();
    kept
}

/// Exact `E`, `Var`, forces and (optionally) the dense QGT by enumeration.
pub fn exact_step(space: &FullSpace, h: &PauliHamiltonian, ansatz: &Ansatz, params: &[C64], with_qgt: bool) -> Result<ExactStep> {
    let p = ansatz.n_params();
    let (rep_logs, table) = space.log_table(ansatz, params);
    let w = space.weights(&rep_logs);
    let parts = space.local_parts(h, &rep_logs, &table);
    let eloc: Vec<C64> = parts.iter().map(|q| q[0] + q[1] + q[2]).collect();
    let live: Vec<usize> = (0..w.len()).filter(|&i| w[i] > 0.0).collect();
    let energy: C64 = live.iter().map(|&i| w[i] * eloc[i]).sum();
    let mut epart = [ZERO; 3];
    for &i in &live {
        for k in 0..3 {
            epart[k] += w[i] * parts[i][k];
        }
    }
    let variance: f64 = live.iter().map(|&i| w[i] * (eloc[i] - energy).norm_sqr()).sum();

    let live = significant(&w, &live);
    let keep = live.len() * p <= STORE_LIMIT;
    let mut stored: Vec<Vec<C64>> = Vec::new();
    let mut f = vec![ZERO; p];
    let mut o_mean = vec![ZERO; p];
    for chunk in live.chunks(BLOCK) {
        let o = space.derivs_block(ansatz, params, chunk)?;
        for (row, &i) in o.chunks(p).zip(chunk) {
            let we = w[i] * eloc[i];
            for j in 0..p {
                let c = row[j].conj();
                f[j] += c * we;
                o_mean[j] += w[i] * c;
            }
        }
        if keep && with_qgt {
            stored.push(o);
        }
    }
    for j in 0..p {
        f[j] -= o_mean[j] * energy;
    }
    let qgt = if with_qgt {
        let mut s = vec![ZERO; p * p];
        let mean: Vec<C64> = o_mean.iter().map(|m| m.conj()).collect();
        for (b, chunk) in live.chunks(BLOCK).enumerate() {
            let o = if keep { std::mem::take(&mut stored[b]) } else { space.derivs_block(ansatz, params, chunk)? };
            let mut ob = Vec::with_capacity(o.len());
            for (row, &i) in o.chunks(p).zip(chunk) {
                let sw = w[i].sqrt();
                ob.extend(row.iter().zip(&mean).map(|(x, m)| sw * (x - m)));
            }
            accumulate_qgt(&ob, p, &mut s);
        }
        Some(s)
    } else {
        None
    };
    Ok(ExactStep { energy, variance, parts: epart, forces: f, qgt })
}

/// How the expectation values are estimated during training.
#[derive(Clone, Debug)]
pub enum Estimation {
    FullSummation,
    Sampled { config: SampleConfig, n_chains: usize, rule: UpdateRule, moves: MoveSet },
}

#[derive(Clone, Debug)]
pub struct CheckpointPolicy {
    pub dir: PathBuf,
    pub every: usize,
    pub header: CheckpointHeader,
}

#[derive(Clone, Debug, PartialEq)]
pub enum TrainStatus {
    Completed,
    Diverged { iteration: usize },
}

#[derive(Clone, Debug)]
pub struct TrainResult {
    pub params: Vec<C64>,
    pub ensemble: Option<ChainEnsemble>,
    pub history: TrainingHistory,
    pub status: TrainStatus,
}

pub type Observer<'a> = &'a (dyn Fn(&IterationRecord) + Sync);
/// Ends training early, before the update, when it returns true for the current record.
pub type StopRule<'a> = &'a (dyn Fn(&IterationRecord) -> bool + Sync);

pub struct Trainer<'a> {
    pub model: &'a LatticeModel,
    pub hamiltonian: &'a PauliHamiltonian,
    pub ansatz: &'a Ansatz,
    pub estimation: Estimation,
    pub sr: SrConfig,
    pub checkpoints: Option<CheckpointPolicy>,
    pub observer: Option<Observer<'a>>,
    pub stop: Option<StopRule<'a>>,
}

impl<'a> Trainer<'a> {
    /// Runs `sr.n_iter` SR iterations. Non-finite parameters stop the run and return the
    /// last finite parameters with `TrainStatus::Diverged`.
    pub fn train(&self, params0: Vec<C64>, ensemble0: Option<ChainEnsemble>, chain_seed: u64) -> Result<TrainResult> {
        self.sr.validate()?;
        let p = self.ansatz.n_params();
        if params0.len() != p {
            return Err(Error::InvalidConfig(format!("expected {p} parameters, got {}", params0.len())));
        }
        let mut params = params0;
        let mut history = TrainingHistory::default();
        let mut status = TrainStatus::Completed;
        let mut prev_dir: Option<Vec<C64>> = None;

        let space = match self.estimation {
            Estimation::FullSummation => {
                let group = self.ansatz.is_symmetric().then_some(self.model.translations.as_slice());
                Some(FullSpace::new(self.model.n_qubits, group)?)
            }
            _ => None,
        };
        let mut ensemble = match &self.estimation {
            Estimation::Sampled { n_chains, .. } => {
                Some(ensemble0.unwrap_or_else(|| ChainEnsemble::new(*n_chains, self.model.n_qubits, chain_seed)))
            }
            Estimation::FullSummation => ensemble0,
        };
        let sampler = match &self.estimation {
            Estimation::Sampled { rule, moves, .. } => Some(Sampler::new(self.ansatz, moves, rule.clone())?),
            _ => None,
        };
        let est = LocalEstimator::new(self.hamiltonian, self.ansatz);

        for it in 0..self.sr.n_iter {
            let lr = self.sr.learning_rate.value(it, self.sr.n_iter, self.sr.warmup);
            let eps = self.sr.diag_shift.value(it, self.sr.n_iter, self.sr.warmup);
            let (energy, variance, mut f, rec_extra, dir) = match (&space, &sampler, &self.estimation) {
                (Some(space), _, _) => {
                    let step = exact_step(space, self.hamiltonian, self.ansatz, &params, true)?;
                    let mut f = step.forces;
                    clip(&mut f, self.sr.grad_clip);
                    let dir = solve_dense(step.qgt.as_ref().unwrap(), &f, eps);
                    (step.energy, step.variance, f, (f64::NAN, f64::NAN, f64::NAN), dir)
                }
                (None, Some(sampler), Estimation::Sampled { config, .. }) => {
                    let ens = ensemble.as_mut().expect("sampled mode has chains");
                    let set = sampler.sample(&params, ens, config)?;
                    let e = local_estimators_set(&est, self.ansatz, &params, &set)?;
                    let o = log_derivative_matrix(self.ansatz, &params, &set.states)?;
                    let n = e.len();
                    let w = vec![1.0 / n as f64; n];
                    let mut f = forces(&e, &o, &w, p);
                    clip(&mut f, self.sr.grad_clip);
                    let obar = centered(&o, &w, p);
                    let dir = match self.sr.solver {
                        Solver::DirectPseudoInverse => solve_dense(&qgt_dense(&obar, p), &f, eps),
                        Solver::ConjugateGradient { max_iter, tol } => {
                            match solve_cg(&obar, p, &f, eps, prev_dir.as_deref(), max_iter, tol) {
                                Ok(x) => x,
                                Err(Error::CgNoConvergence { .. }) => solve_dense(&qgt_dense(&obar, p), &f, eps),
                                Err(err) => return Err(err),
                            }
                        }
                    };
                    let mean: C64 = e.iter().sum::<C64>() / n as f64;
                    let var = e.iter().map(|x| (x - mean).norm_sqr()).sum::<f64>() / n as f64;
                    let re: Vec<f64> = e.iter().map(|x| x.re).collect();
                    let series = set.per_chain_series(&re);
                    let rhat = if set.per_chain >= 4 { diagnostics::split_rhat(&series).value } else { f64::NAN };
                    let tau = if set.per_chain >= 16 { diagnostics::autocorrelation_time(&series) } else { f64::NAN };
                    (mean, var, f, (set.acceptance(), rhat, tau), dir)
                }
                _ => unreachable!("estimation mode and engine agree"),
            };
            let grad_norm = f.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            f.clear();
            let record = IterationRecord {
                iteration: it,
                energy: energy.re,
                energy_imag: energy.im,
                variance,
                acceptance: rec_extra.0,
                rhat: rec_extra.1,
                tau: rec_extra.2,
                v_score: diagnostics::v_score(energy.re, variance, self.model.n_qubits, 0.0).unwrap_or(f64::NAN),
                grad_norm,
            };
            if let Some(obs) = self.observer {
                obs(&record);
            }
            let stop = self.stop.is_some_and(|f| f(&record));
            history.records.push(record);
            if stop && energy.re.is_finite() {
                break;
            }

            let next: Vec<C64> = params.iter().zip(&dir).map(|(t, d)| t - lr * d).collect();
            if next.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) || !energy.re.is_finite() {
                status = TrainStatus::Diverged { iteration: it };
                break;
            }
            params = next;
            prev_dir = Some(dir);
            if let Some(cp) = &self.checkpoints {
                if cp.every > 0 && (it + 1) % cp.every == 0 {
                    self.write_checkpoint(cp, &params, ensemble.as_ref(), it + 1)?;
                }
            }
        }
        if let (TrainStatus::Diverged { iteration }, Some(cp)) = (&status, &self.checkpoints) {
            self.write_checkpoint(cp, &params, ensemble.as_ref(), *iteration)?;
        }
        Ok(TrainResult { params, ensemble, history, status })
    }

    fn write_checkpoint(&self, cp: &CheckpointPolicy, params: &[C64], ens: Option<&ChainEnsemble>, iteration: usize) -> Result<()> {
        std::fs::create_dir_all(&cp.dir)?;
        let mut header = cp.header.clone();
        header.iteration = iteration;
        Checkpoint { header, values: params.to_vec() }.save(&cp.dir.join("params.ckpt"))?;
        if let Some(e) = ens {
            e.save(&cp.dir.join("chains.bin"))?;
        }
        Ok(())
    }
}

fn clip(f: &mut [C64], max_norm: f64) {
    let norm = f.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    if norm > max_norm && norm.is_finite() {
        let s = max_norm / norm;
        f.iter_mut().for_each(|x| *x *= s);
    }
}

pub fn local_estimators_set(est: &LocalEstimator<'_>, ansatz: &Ansatz, params: &[C64], set: &SampleSet) -> Result<Vec<C64>> {
    Ok(est.batch_parts(ansatz, params, &set.states)?.into_iter().map(|p| p[0] + p[1] + p[2]).collect())
}
