mod common;

use common::*;
use fracton::ansatz::{exact_parameters, Ansatz, Architecture, CorrelatorSet, EvalState, ExactKind};
use fracton::exact_solver::{dense_matrix, full_summation_expectation, log_psi_table, spins_of};
use fracton::lattice::{build_model, Family};
use fracton::optimizer::*;
use fracton::sampler::{ChainEnsemble, MoveSet, SampleConfig, Sampler, UpdateRule};
use fracton::stabilizer::build_hamiltonian;
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn all_states(a: &Ansatz, p: &[C64]) -> Vec<EvalState> {
    let n = a.n_qubits();
    (0..1u64 << n)
        .map(|x| {
            let mut s = vec![0i8; n];
            spins_of(x, n, &mut s);
            a.eval_state(p, s)
        })
        .collect()
}

#[test]
fn local_estimators_match_dense_oracle() {
    let m = build_model(Family::Checkerboard, [2, 2, 2]).unwrap();
    let h = build_hamiltonian(&m, [0.3, 0.5, 0.2]);
    let a = Ansatz::new(&m, Architecture::SymmetricCrbm { alpha: quarter(), correlators: CorrelatorSet::ALL }).unwrap();
    let p = random_params(a.n_params(), 0.5, &mut ChaCha8Rng::seed_from_u64(1));
    let states = all_states(&a, &p);
    let e = local_estimators(&h, &a, &p, &states).unwrap();
    let psi: Vec<C64> = log_psi_table(&a, &p).unwrap().iter().map(|l| l.exp()).collect();
    let hpsi = dense_matrix(&h).unwrap() * nalgebra::DVector::from_column_slice(&psi);
    for x in 0..psi.len() {
        let want = hpsi[x] / psi[x];
        assert!((e[x] - want).norm() <= 1e-12 * want.norm().max(1.0), "{x}: {} vs {want}", e[x]);
    }
}

#[test]
fn local_estimators_of_zero_parameters() {
    let m = build_model(Family::Checkerboard, [2, 2, 2]).unwrap();
    let h = build_hamiltonian(&m, [0.0; 3]);
    let a = Ansatz::new(&m, Architecture::Rbm { hidden: 2 }).unwrap();
    let p = vec![C64::new(0.0, 0.0); a.n_params()];
    let states = all_states(&a, &p);
    let e = local_estimators(&h, &a, &p, &states).unwrap();
    let n_a = m.x_stabilizers.len() as f64;
    for (st, el) in states.iter().zip(&e) {
        let parity: f64 = m.z_stabilizer_supports().iter().map(|s| s.iter().map(|&i| st.spins[i] as f64).product::<f64>()).sum();
        assert!((el - C64::new(-n_a - parity, 0.0)).norm() < 1e-12);
    }
}

#[test]
fn exact_eigenstate_is_stationary() {
    let m = build_model(Family::Checkerboard, [4, 2, 2]).unwrap();
    let h = build_hamiltonian(&m, [0.0; 3]);
    let (a, p) = exact_parameters(&m, ExactKind::Crbm).unwrap();
    let mut sampler_states = Vec::new();
    let sampler = Sampler::new(&a, &MoveSet::from_model(&m), UpdateRule::default()).unwrap();
    let mut ens = ChainEnsemble::new(8, m.n_qubits, 1);
    let set = sampler.sample(&p.values, &mut ens, &SampleConfig { n_samples: 256, n_updates: 4, n_therm: 4 }).unwrap();
    sampler_states.extend(set.states);
    let e = local_estimators(&h, &a, &p.values, &sampler_states).unwrap();
    assert!(e.iter().all(|x| (x + 16.0).norm() < 1e-12));
    let o = log_derivative_matrix(&a, &p.values, &sampler_states).unwrap();
    let f = sample_forces(&e, &o, a.n_params());
    assert!(f.iter().all(|x| x.norm() < 1e-12));

    let trainer = Trainer {
        model: &m,
        hamiltonian: &h,
        ansatz: &a,
        estimation: Estimation::FullSummation,
        sr: SrConfig { n_iter: 3, ..SrConfig::default() },
        checkpoints: None,
        observer: None,
        stop: None,
    };
    let r = trainer.train(p.values.clone(), None, 0).unwrap();
    let drift: f64 = r.params.iter().zip(&p.values).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
    assert!(drift < 1e-8, "{drift}");
    assert!(r.history.records.iter().all(|x| (x.energy + 16.0).abs() < 1e-12 && x.variance < 1e-12));
}

#[test]
fn exact_forces_match_energy_finite_differences() {
    let m = build_model(Family::Checkerboard, [2, 2, 2]).unwrap();
    let h = build_hamiltonian(&m, [0.4, 0.0, 0.3]);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for arch in [Architecture::Rbm { hidden: 3 }, Architecture::SymmetricCrbm { alpha: quarter(), correlators: CorrelatorSet::ALL }] {
        let a = Ansatz::new(&m, arch).unwrap();
        let p = random_params(a.n_params(), 0.4, &mut rng);
        let space = FullSpace::new(m.n_qubits, None).unwrap();
        let step = exact_step(&space, &h, &a, &p, false).unwrap();
        let grad = energy_gradient_real(&step.forces);
        let np = a.n_params();
        let eps = 1e-5;
        let energy = |q: &[C64]| full_summation_expectation(&h, &a, q).unwrap().energy.re;
        let mut num = 0.0;
        let mut den = 0.0;
        for j in 0..2 * np {
            let dir = if j < np { C64::new(eps, 0.0) } else { C64::new(0.0, eps) };
            let mut q = p.clone();
            q[j % np] += dir;
            let up = energy(&q);
            q[j % np] -= 2.0 * dir;
            let dn = energy(&q);
            let fd = (up - dn) / (2.0 * eps);
            num += (fd - grad[j]).powi(2);
            den += grad[j].powi(2);
        }
        assert!((num / den).sqrt() < 1e-5, "{}", (num / den).sqrt());
    }
}

#[test]
fn orbit_reduction_preserves_exact_statistics() {
    let m = build_model(Family::Checkerboard, [4, 2, 2]).unwrap();
    let h = build_hamiltonian(&m, [0.3, 0.0, 0.0]);
    let a = Ansatz::new(&m, Architecture::SymmetricRbm { alpha: quarter() }).unwrap();
    let p = random_params(a.n_params(), 0.3, &mut ChaCha8Rng::seed_from_u64(2));
    let full = exact_step(&FullSpace::new(16, None).unwrap(), &h, &a, &p, true).unwrap();
    let red = exact_step(&FullSpace::new(16, Some(&m.translations)).unwrap(), &h, &a, &p, true).unwrap();
    assert!((full.energy - red.energy).norm() < 1e-10);
    assert!((full.variance - red.variance).abs() < 1e-10);
    for (x, y) in full.forces.iter().zip(&red.forces) {
        assert!((x - y).norm() < 1e-10);
    }
    for (x, y) in full.qgt.unwrap().iter().zip(&red.qgt.unwrap()) {
        assert!((x - y).norm() < 1e-10);
    }
}

#[test]
fn sampled_forces_approach_exact_forces() {
    let m = build_model(Family::Checkerboard, [2, 2, 2]).unwrap();
    let h = build_hamiltonian(&m, [0.5, 0.0, 0.0]);
    let a = Ansatz::new(&m, Architecture::Rbm { hidden: 2 }).unwrap();
    let np = a.n_params();
    let p = random_params(np, 0.4, &mut ChaCha8Rng::seed_from_u64(3));
    let exact = exact_step(&FullSpace::new(8, None).unwrap(), &h, &a, &p, false).unwrap();
    let sampler = Sampler::new(&a, &MoveSet::from_model(&m), UpdateRule::default()).unwrap();
    let mut gaps = Vec::new();
    for n in [10_000, 1_000_000] {
        let n_chains = 100;
        let mut ens = ChainEnsemble::new(n_chains, 8, 5);
        let set = sampler.sample(&p, &mut ens, &SampleConfig { n_samples: n, n_updates: 8, n_therm: 10 }).unwrap();
        let e = local_estimators(&h, &a, &p, &set.states).unwrap();
        let o = log_derivative_matrix(&a, &p, &set.states).unwrap();
        let f = sample_forces(&e, &o, np);
        // standard errors from per-chain force estimates
        let per = set.per_chain;
        let chain_f: Vec<Vec<C64>> =
            (0..n_chains).map(|c| sample_forces(&e[c * per..(c + 1) * per], &o[c * per * np..(c + 1) * per * np], np)).collect();
        let mut worst: f64 = 0.0;
        for j in 0..np {
            let mean: C64 = chain_f.iter().map(|v| v[j]).sum::<C64>() / n_chains as f64;
            let var = chain_f.iter().map(|v| (v[j] - mean).norm_sqr()).sum::<f64>() / (n_chains - 1) as f64;
            let se = (var / n_chains as f64).sqrt();
            worst = worst.max((f[j] - exact.forces[j]).norm() / se);
        }
        assert!(worst < 5.0, "n={n}: gap of {worst} standard errors");
        gaps.push(f.iter().zip(&exact.forces).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max));
    }
    assert!(gaps[1] < gaps[0] / 3.0, "{gaps:?}");
    assert!(gaps[1] < 1e-2, "{gaps:?}");
}

#[test]
fn cg_matches_dense_solution() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (n, p) = (120, 50);
    let obar = random_params(n * p, 1.0, &mut rng);
    let f = random_params(p, 1.0, &mut rng);
    let direct = qgt_solve(&obar, p, &f, 1e-3, Solver::DirectPseudoInverse).unwrap();
    let cg = solve_cg(&obar, p, &f, 1e-3, None, 500, 1e-13).unwrap();
    let err = direct.iter().zip(&cg).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    assert!(err < 1e-8, "{err}");
    // ill-conditioned and capped iterations report non-convergence
    assert!(matches!(solve_cg(&obar, p, &f, 0.0, None, 2, 1e-12), Err(fracton::Error::CgNoConvergence { .. })));
}

#[test]
fn qgt_is_hermitian_positive_semidefinite() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (n, p) = (30, 70);
    let obar = random_params(n * p, 1.0, &mut rng);
    let s = qgt_dense(&obar, p);
    for i in 0..p {
        for j in 0..p {
            assert!((s[i * p + j] - s[j * p + i].conj()).norm() < 1e-12);
            let direct: C64 = (0..n).map(|r| obar[r * p + i].conj() * obar[r * p + j]).sum();
            assert!((s[i * p + j] - direct).norm() < 1e-10);
        }
    }
    for _ in 0..20 {
        let v = random_params(p, 1.0, &mut rng);
        let q: C64 = (0..p).flat_map(|i| (0..p).map(move |j| (i, j))).map(|(i, j)| v[i].conj() * s[i * p + j] * v[j]).sum();
        assert!(q.re >= -1e-12 && q.im.abs() < 1e-9);
    }
}

#[test]
fn small_steps_decrease_exact_energy() {
    let m = build_model(Family::Checkerboard, [2, 2, 2]).unwrap();
    let h = build_hamiltonian(&m, [0.5, 0.0, 0.0]);
    let a = Ansatz::new(&m, Architecture::Rbm { hidden: 4 }).unwrap();
    let trainer = Trainer {
        model: &m,
        hamiltonian: &h,
        ansatz: &a,
        estimation: Estimation::FullSummation,
        sr: SrConfig { n_iter: 50, learning_rate: Schedule::constant(1e-3), ..SrConfig::default() },
        checkpoints: None,
        observer: None,
        stop: None,
    };
    let p0 = random_params(a.n_params(), 0.2, &mut ChaCha8Rng::seed_from_u64(9));
    let r = trainer.train(p0, None, 0).unwrap();
    let e = r.history.energies();
    assert_eq!(e.len(), 50);
    assert!(e.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    assert!(e[49] < e[0]);
}

#[test]
fn sampled_training_writes_history_and_checkpoints() {
    let m = build_model(Family::Checkerboard, [4, 2, 2]).unwrap();
    let h = build_hamiltonian(&m, [0.0; 3]);
    let a = Ansatz::new(&m, Architecture::SymmetricCrbm { alpha: quarter(), correlators: CorrelatorSet::ALL }).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let header = fracton::ansatz::checkpoint::CheckpointHeader {
        architecture: a.architecture.clone(),
        family: m.family,
        dims: m.dims,
        seed: 1,
        iteration: 0,
        field: [0.0; 3],
    };
    let trainer = Trainer {
        model: &m,
        hamiltonian: &h,
        ansatz: &a,
        estimation: Estimation::Sampled {
            config: SampleConfig { n_samples: 512, n_updates: 4, n_therm: 2 },
            n_chains: 32,
            rule: UpdateRule::default(),
            moves: MoveSet::from_model(&m),
        },
        sr: SrConfig { n_iter: 20, ..SrConfig::default() },
        checkpoints: Some(CheckpointPolicy { dir: dir.path().to_path_buf(), every: 10, header }),
        observer: None,
        stop: None,
    };
    let p0 = fracton::ansatz::init_random(a.n_params(), 1, 0.01);
    let r = trainer.train(p0.clone(), None, 1).unwrap();
    assert_eq!(r.status, TrainStatus::Completed);
    assert_eq!(r.history.len(), 20);
    assert!(r.history.records.iter().all(|x| x.energy.is_finite() && x.acceptance > 0.0 && x.rhat.is_finite()));
    assert!(r.history.records[19].energy < r.history.records[0].energy);
    let ck = fracton::ansatz::checkpoint::Checkpoint::load(&dir.path().join("params.ckpt")).unwrap();
    assert_eq!(ck.header.iteration, 20);
    assert_eq!(ck.values, r.params);
    assert!(dir.path().join("chains.bin").exists());
    let path = dir.path().join("history.csv");
    r.history.write_csv(&path).unwrap();
    let back = TrainingHistory::read_csv(&path).unwrap();
    assert_eq!(back.len(), 20);
    assert_eq!(back.records[3].energy, r.history.records[3].energy);

    let again = trainer.train(p0, None, 1).unwrap();
    assert_eq!(again.params, r.params);
}

#[test]
fn invalid_configs_rejected() {
    let m = build_model(Family::Checkerboard, [2, 2, 2]).unwrap();
    let h = build_hamiltonian(&m, [0.0; 3]);
    let a = Ansatz::new(&m, Architecture::Rbm { hidden: 1 }).unwrap();
    let mut sr = SrConfig::default();
    sr.learning_rate.start = 0.0;
    let t = Trainer { model: &m, hamiltonian: &h, ansatz: &a, estimation: Estimation::FullSummation, sr, checkpoints: None, observer: None, stop: None };
    assert!(t.train(vec![C64::new(0.0, 0.0); a.n_params()], None, 0).is_err());
    let t = Trainer { sr: SrConfig::default(), ..t };
    assert!(t.train(vec![C64::new(0.0, 0.0); 3], None, 0).is_err());
}
