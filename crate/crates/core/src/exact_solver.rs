//! Full-Hilbert-space reference computations for small systems.
//!
//! Basis states are enumerated as integers with bit `i` holding spin `i` (set = down).

use std::path::PathBuf;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::ansatz::{is_zero_amplitude, Ansatz};
use crate::error::{Error, Result};
use crate::lattice::LatticeModel;
use crate::stabilizer::{build_hamiltonian, PauliHamiltonian};

pub const SUMMATION_LIMIT: usize = 24;
pub const DENSE_LIMIT: usize = 10;
pub const BORN_LIMIT: usize = 20;
pub const DEGENERACY_TOL: f64 = 1e-8;

pub fn spins_of(x: u64, n: usize, out: &mut [i8]) {
    for (i, o) in out.iter_mut().enumerate().take(n) {
        *o = if (x >> i) & 1 == 1 { -1 } else { 1 };
    }
}

fn limit(n: usize, lim: usize) -> Result<()> {
    if n > lim {
        Err(Error::TooLarge { n, limit: lim })
    } else {
        Ok(())
    }
}

/// `log ψ` for every basis state.
pub fn log_psi_table(ansatz: &Ansatz, params: &[C64]) -> Result<Vec<C64>> {
    let n = ansatz.n_qubits();
    limit(n, SUMMATION_LIMIT)?;
    if params.iter().any(|p| !p.re.is_finite() || !p.im.is_finite()) {
        return Err(Error::NonFiniteResult);
    }
    Ok((0..1u64 << n)
        .into_par_iter()
        .map_init(|| vec![0i8; n], |buf, x| {
            spins_of(x, n, buf);
            ansatz.log_psi(params, buf)
        })
        .collect())
}

/// Born probabilities `|ψ|²/Σ|ψ|²` from a log table.
pub fn born_from_logs(logs: &[C64]) -> Vec<f64> {
    let max = logs.iter().filter(|l| !is_zero_amplitude(**l)).map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> =
        logs.iter().map(|l| if is_zero_amplitude(*l) { 0.0 } else { (2.0 * (l.re - max)).exp() }).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

pub fn exact_born_distribution(ansatz: &Ansatz, params: &[C64]) -> Result<Vec<f64>> {
    limit(ansatz.n_qubits(), BORN_LIMIT)?;
    Ok(born_from_logs(&log_psi_table(ansatz, params)?))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Expectation {
    pub energy: C64,
    pub variance: f64,
    /// Contributions of x-generators, z-generators and field terms.
    pub parts: [C64; 3],
}

/// Local estimators `E_loc(σ)` (and per-part splits) from a log table.
pub fn local_energies_table(h: &PauliHamiltonian, logs: &[C64]) -> Vec<(C64, [C64; 3])> {
    let nt = h.n_offdiagonal();
    let masks: Vec<u64> = (0..nt).map(|k| h.offdiagonal_mask(k)[0]).collect();
    (0..logs.len() as u64)
        .into_par_iter()
        .map(|x| {
            let l = logs[x as usize];
            let zero = C64::new(0.0, 0.0);
            if is_zero_amplitude(l) {
                return (zero, [zero; 3]);
            }
            let s = [x];
            let mut parts = h.diagonal_parts(&s);
            for k in 0..nt {
                let le = logs[(x ^ masks[k]) as usize];
                if is_zero_amplitude(le) {
                    continue;
                }
                parts[h.offdiagonal_part(k).index()] += h.offdiagonal_element(k, &s) * (le - l).exp();
            }
            (parts[0] + parts[1] + parts[2], parts)
        })
        .collect()
}

pub fn expectation_from_table(h: &PauliHamiltonian, logs: &[C64]) -> Expectation {
    let p = born_from_logs(logs);
    let el = local_energies_table(h, logs);
    let mut e = C64::new(0.0, 0.0);
    let mut parts = [C64::new(0.0, 0.0); 3];
    for (pi, (v, pa)) in p.iter().zip(&el) {
        if *pi == 0.0 {
            continue;
        }
        e += pi * v;
        for k in 0..3 {
            parts[k] += pi * pa[k];
        }
    }
    let mut var = 0.0;
    for (pi, (v, _)) in p.iter().zip(&el) {
        if *pi > 0.0 {
            var += pi * (v - e).norm_sqr();
        }
    }
    Expectation { energy: e, variance: var, parts }
}

/// Exact `⟨H⟩` and `Var H` of the ansatz state by summing over all basis states.
pub fn full_summation_expectation(h: &PauliHamiltonian, ansatz: &Ansatz, params: &[C64]) -> Result<Expectation> {
    limit(h.n_qubits(), SUMMATION_LIMIT)?;
    let logs = log_psi_table(ansatz, params)?;
    Ok(expectation_from_table(h, &logs))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExactReport {
    pub states: u64,
    /// Basis states where a zero/nonzero or x-flip condition fails.
    pub violations: u64,
    pub energy: f64,
    pub energy_imag: f64,
    pub variance: f64,
    pub n_generators: usize,
}

impl ExactReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
            && (self.energy + self.n_generators as f64).abs() < 1e-9
            && self.energy_imag.abs() < 1e-9
            && self.variance < 1e-12
    }
}

/// Checks every stabilizer condition on every basis state: `ψ = 0` exactly on odd z-parity,
/// `ψ(σ) = ψ(x-flipped σ)` otherwise; also returns `⟨H⟩` and `Var H` at zero field.
pub fn verify_stabilizer_state(model: &LatticeModel, ansatz: &Ansatz, params: &[C64]) -> Result<ExactReport> {
    let n = model.n_qubits;
    limit(n, SUMMATION_LIMIT)?;
    let mask = |s: &Vec<usize>| s.iter().fold(0u64, |m, &i| m | 1 << i);
    let zm: Vec<u64> = model.z_stabilizer_supports().iter().map(mask).collect();
    let xm: Vec<u64> = model.x_stabilizer_supports().iter().map(mask).collect();
    let logs = log_psi_table(ansatz, params)?;
    let violations = (0..logs.len() as u64)
        .into_par_iter()
        .filter(|&x| {
            let l = logs[x as usize];
            let odd = zm.iter().any(|m| (x & m).count_ones() % 2 == 1);
            if odd || is_zero_amplitude(l) {
                return odd != is_zero_amplitude(l);
            }
            xm.iter().any(|m| {
                let l2 = logs[(x ^ m) as usize];
                is_zero_amplitude(l2) || ((l2 - l).exp() - 1.0).norm() > 1e-10
            })
        })
        .count() as u64;
    let ex = expectation_from_table(&build_hamiltonian(model, [0.0; 3]), &logs);
    Ok(ExactReport {
        states: logs.len() as u64,
        violations,
        energy: ex.energy.re,
        energy_imag: ex.energy.im,
        variance: ex.variance,
        n_generators: model.n_generators(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseSpectrumResult {
    pub ground_energy: f64,
    /// Eigenvalues within `DEGENERACY_TOL` of the minimum (dense path only).
    pub ground_degeneracy: Option<usize>,
    pub ground_vector: Option<Vec<C64>>,
    pub method: SolverMethod,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolverMethod {
    Dense,
    Lanczos,
}

/// `y = H x` on the full basis.
pub fn apply_hamiltonian(h: &PauliHamiltonian, x: &[C64], y: &mut [C64]) {
    let nt = h.n_offdiagonal();
    let masks: Vec<u64> = (0..nt).map(|k| h.offdiagonal_mask(k)[0]).collect();
    y.par_iter_mut().enumerate().for_each(|(s, out)| {
        let sw = [s as u64];
        let mut acc = h.diagonal(&sw) * x[s];
        for k in 0..nt {
            acc += h.offdiagonal_element(k, &sw) * x[s ^ masks[k] as usize];
        }
        *out = acc;
    });
}

pub fn dense_matrix(h: &PauliHamiltonian) -> Result<DMatrix<C64>> {
    let n = h.n_qubits();
    limit(n, DENSE_LIMIT.max(12))?;
    let dim = 1usize << n;
    let mut m = DMatrix::<C64>::zeros(dim, dim);
    let nt = h.n_offdiagonal();
    for s in 0..dim {
        let sw = [s as u64];
        m[(s, s)] += h.diagonal(&sw);
        for k in 0..nt {
            let e = s ^ h.offdiagonal_mask(k)[0] as usize;
            m[(s, e)] += h.offdiagonal_element(k, &sw);
        }
    }
    Ok(m)
}

/// Ground energy: dense diagonalization for `n ≤ 10`, Lanczos (tolerance 1e-8) up to 24.
pub fn exact_ground_energy(h: &PauliHamiltonian) -> Result<DenseSpectrumResult> {
    let n = h.n_qubits();
    if n <= DENSE_LIMIT {
        let m = dense_matrix(h)?;
        let eig = SymmetricEigen::new(m);
        let (imin, &e0) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty spectrum");
        let deg = eig.eigenvalues.iter().filter(|&&e| (e - e0).abs() < DEGENERACY_TOL).count();
        let v = eig.eigenvectors.column(imin).iter().copied().collect();
        return Ok(DenseSpectrumResult {
            ground_energy: e0,
            ground_degeneracy: Some(deg),
            ground_vector: Some(v),
            method: SolverMethod::Dense,
        });
    }
    limit(n, SUMMATION_LIMIT)?;
    let e0 = lanczos_ground(h, 1e-8, 600, 0x5eed)?;
    Ok(DenseSpectrumResult { ground_energy: e0, ground_degeneracy: None, ground_vector: None, method: SolverMethod::Lanczos })
}

/// Three-vector Lanczos for the lowest eigenvalue.
pub fn lanczos_ground(h: &PauliHamiltonian, tol: f64, max_iter: usize, seed: u64) -> Result<f64> {
    let dim = 1usize << h.n_qubits();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<C64> = (0..dim)
        .map(|_| C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
        .collect();
    normalize(&mut v);
    let mut v_prev = vec![C64::new(0.0, 0.0); dim];
    let mut w = vec![C64::new(0.0, 0.0); dim];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut last = f64::INFINITY;
    for it in 0..max_iter.min(dim) {
        apply_hamiltonian(h, &v, &mut w);
        let a: f64 = v.iter().zip(&w).map(|(x, y)| (x.conj() * y).re).sum();
        let b_prev = betas.last().copied().unwrap_or(0.0);
        for i in 0..dim {
            w[i] -= a * v[i] + b_prev * v_prev[i];
        }
        alphas.push(a);
        let b = w.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        let k = alphas.len();
        let mut t = DMatrix::<f64>::zeros(k, k);
        for i in 0..k {
            t[(i, i)] = alphas[i];
            if i + 1 < k {
                t[(i, i + 1)] = betas[i];
                t[(i + 1, i)] = betas[i];
            }
        }
        let eig = SymmetricEigen::new(t);
        let (imin, &e) =
            eig.eigenvalues.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).expect("non-empty");
        let resid = b * eig.eigenvectors[(k - 1, imin)].abs();
        if resid < tol || b < 1e-12 || ((last - e).abs() < 1e-13 && it > 20) {
            return Ok(e);
        }
        last = e;
        betas.push(b);
        std::mem::swap(&mut v_prev, &mut v);
        for i in 0..dim {
            v[i] = w[i] / b;
        }
    }
    Err(Error::ConvergenceFailure { iterations: max_iter })
}

fn normalize(v: &mut [C64]) {
    let n = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= n);
}

/// Disk cache for oracle values, keyed by a SHA-256 of a caller-provided description.
#[derive(Clone, Debug)]
pub struct OracleCache {
    dir: PathBuf,
}

impl OracleCache {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(OracleCache { dir })
    }

    pub fn key(parts: &[&str]) -> String {
        let mut hasher = Sha256::new();
        for p in parts {
            hasher.update(p.as_bytes());
            hasher.update([0u8]);
        }
        hex::encode(hasher.finalize())
    }

    pub fn params_hash(params: &[C64]) -> String {
        let mut hasher = Sha256::new();
        for p in params {
            hasher.update(p.re.to_le_bytes());
            hasher.update(p.im.to_le_bytes());
        }
        hex::encode(hasher.finalize())
    }

    pub fn get_or_compute<F>(&self, parts: &[&str], compute: F) -> Result<Vec<f64>>
    where
        F: FnOnce() -> Result<Vec<f64>>,
    {
        let path = self.dir.join(format!("{}.json", OracleCache::key(parts)));
        if let Ok(text) = std::fs::read_to_string(&path) {
            if let Ok(v) = serde_json::from_str::<Vec<f64>>(&text) {
                return Ok(v);
            }
        }
        let v = compute()?;
        std::fs::write(&path, serde_json::to_string(&v)?)?;
        Ok(v)
    }

    /// Cached ground energy of `h`, keyed by its term manifest.
    pub fn ground_energy(&self, h: &PauliHamiltonian) -> Result<f64> {
        let manifest = h.text_manifest();
        let v = self.get_or_compute(&["ground_energy", &manifest], || Ok(vec![exact_ground_energy(h)?.ground_energy]))?;
        Ok(v[0])
    }
}
