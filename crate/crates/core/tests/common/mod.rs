#![allow(dead_code)]

use fracton::ansatz::{is_zero_amplitude, Alpha, Ansatz, Architecture, CorrelatorSet};
use fracton::bits::Bits;
use fracton::exact_solver::spins_of;
use fracton::lattice::LatticeModel;
use num_complex::Complex64 as C64;
use rand::Rng;

pub fn quarter() -> Alpha {
    Alpha::new(1, 4)
}

/// The architectures compared in the 4×2×2 benchmark.
pub fn benchmark_architectures() -> Vec<(&'static str, Architecture)> {
    vec![
        ("rbm", Architecture::Rbm { hidden: 4 }),
        ("ffnn", Architecture::Ffnn { widths: vec![8, 8] }),
        ("symmetric_rbm", Architecture::SymmetricRbm { alpha: quarter() }),
        ("symmetric_ffnn", Architecture::SymmetricFfnn { features: 4, width: 4 }),
        ("symmetric_crbm", Architecture::SymmetricCrbm { alpha: quarter(), correlators: CorrelatorSet::ALL }),
    ]
}

pub fn random_spins<R: Rng>(n: usize, rng: &mut R) -> Vec<i8> {
    (0..n).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect()
}

pub fn random_params<R: Rng>(p: usize, scale: f64, rng: &mut R) -> Vec<C64> {
    (0..p).map(|_| C64::new(scale * (rng.random::<f64>() - 0.5), scale * (rng.random::<f64>() - 0.5))).collect()
}

/// Relative error of the analytic log-derivatives against central differences along the real
/// and imaginary direction of every parameter.
pub fn derivative_fd_error(a: &Ansatz, params: &[C64], spins: &[i8]) -> f64 {
    let h = 1e-6;
    let mut o = vec![C64::new(0.0, 0.0); a.n_params()];
    a.log_derivs(params, spins, &mut o).unwrap();
    let mut num = 0.0;
    let mut den = 0.0;
    let mut q = params.to_vec();
    for j in 0..params.len() {
        for dir in [C64::new(1.0, 0.0), C64::new(0.0, 1.0)] {
            q[j] = params[j] + dir * h;
            let up = a.log_psi(&q, spins);
            q[j] = params[j] - dir * h;
            let dn = a.log_psi(&q, spins);
            q[j] = params[j];
            let fd = (up - dn) / (2.0 * h);
            let an = o[j] * dir;
            num += (fd - an).norm_sqr();
            den += an.norm_sqr();
        }
    }
    (num / den).sqrt()
}

/// Counts basis states violating a stabilizer condition of an exact ansatz state.
///
/// z-type: `ψ(σ) = 0` whenever some z-support has odd parity.
/// x-type: `ψ(σ ⊕ S) = ψ(σ)` for every x-support `S`.
pub fn stabilizer_violations(model: &LatticeModel, a: &Ansatz, params: &[C64], states: impl Iterator<Item = u64>) -> usize {
    let n = model.n_qubits;
    let zmasks: Vec<u64> = model.z_stabilizer_supports().iter().map(|s| mask(s)).collect();
    let xmasks: Vec<u64> = model.x_stabilizer_supports().iter().map(|s| mask(s)).collect();
    let mut buf = vec![0i8; n];
    let log = |x: u64, buf: &mut Vec<i8>| {
        spins_of(x, n, buf);
        a.log_psi(params, buf)
    };
    let mut bad = 0;
    for x in states {
        let l = log(x, &mut buf);
        let odd = zmasks.iter().any(|m| (x & m).count_ones() % 2 == 1);
        if odd != is_zero_amplitude(l) {
            bad += 1;
            continue;
        }
        if odd {
            continue;
        }
        for m in &xmasks {
            let l2 = log(x ^ m, &mut buf);
            if is_zero_amplitude(l2) || ((l2 - l).exp() - 1.0).norm() > 1e-10 {
                bad += 1;
                break;
            }
        }
    }
    bad
}

pub fn mask(s: &[usize]) -> u64 {
    s.iter().fold(0u64, |m, &i| m | 1 << i)
}

pub fn bits_of(x: u64, n: usize) -> Bits {
    Bits::from_u64(n, x)
}

/// Basis index of a spin configuration (bit `i` set when spin `i` is down).
pub fn index_of(spins: &[i8]) -> usize {
    spins.iter().enumerate().fold(0, |x, (i, &s)| if s < 0 { x | 1 << i } else { x })
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}
