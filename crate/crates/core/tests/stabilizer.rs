use std::collections::HashSet;

use fracton::bits::Bits;
use fracton::lattice::{build_model, Family, LatticeModel};
use fracton::stabilizer::{
    build_hamiltonian, canonicalize, connected_elements, connected_elements_reference, gf2_rank,
    ground_state_degeneracy, supports_commute, symplectic_rows, verify_commutation, PauliHamiltonian,
};
use fracton::Error;
use num_complex::Complex64 as C64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Span of the rows enumerated explicitly; its size is 2^rank.
fn span_rank(rows: &[Bits]) -> usize {
    let mut span: HashSet<Bits> = HashSet::new();
    span.insert(Bits::zeros(rows[0].len()));
    for r in rows {
        if span.contains(r) {
            continue;
        }
        let shifted: Vec<Bits> = span.iter().map(|s| s.xor(r)).collect();
        span.extend(shifted);
    }
    span.len().trailing_zeros() as usize
}

#[test]
fn generators_commute() {
    for (f, d) in [
        (Family::Checkerboard, [4, 2, 2]),
        (Family::Checkerboard, [4, 4, 4]),
        (Family::XCube, [2, 2, 2]),
        (Family::XCube, [3, 3, 3]),
        (Family::Haah, [2, 2, 2]),
        (Family::Haah, [3, 3, 3]),
        (Family::Haah, [4, 4, 4]),
    ] {
        assert!(verify_commutation(&build_model(f, d).unwrap()), "{f} {d:?}");
    }
}

#[test]
fn corrupted_support_breaks_commutation() {
    let m = build_model(Family::Checkerboard, [4, 2, 2]).unwrap();
    let mut xs = m.x_stabilizer_supports().to_vec();
    xs[0].pop();
    assert!(!supports_commute(&xs, m.z_stabilizer_supports(), m.n_qubits));
}

#[test]
fn degeneracy_matches_span_oracle() {
    for (f, d) in [(Family::Checkerboard, [2, 2, 2]), (Family::XCube, [2, 2, 2]), (Family::Haah, [2, 2, 2])] {
        let m = build_model(f, d).unwrap();
        let rows = symplectic_rows(&m);
        assert_eq!(gf2_rank(&rows), span_rank(&rows), "{f}");
    }
    assert_eq!(ground_state_degeneracy(&build_model(Family::Checkerboard, [2, 2, 2]).unwrap()), 6);
    assert_eq!(ground_state_degeneracy(&build_model(Family::XCube, [2, 2, 2]).unwrap()), 9);
    let k = ground_state_degeneracy(&build_model(Family::Haah, [2, 2, 2]).unwrap());
    assert!((2..=6).contains(&k), "{k}");
}

#[test]
fn degeneracy_formulas_at_larger_sizes() {
    for l in [4usize, 6] {
        let m = build_model(Family::Checkerboard, [l; 3]).unwrap();
        assert_eq!(ground_state_degeneracy(&m), 6 * l - 6);
    }
    for l in [3usize, 4] {
        let m = build_model(Family::XCube, [l; 3]).unwrap();
        assert_eq!(ground_state_degeneracy(&m), 6 * l - 3);
    }
    for l in [3usize, 4, 5] {
        let k = ground_state_degeneracy(&build_model(Family::Haah, [l; 3]).unwrap());
        assert!(k >= 2 && k <= 4 * l - 2, "L={l} k={k}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn rank_invariant_under_permutation_and_duplicates(seed in 0u64..1000, dup in 0usize..16) {
        let m = build_model(Family::Checkerboard, [4, 2, 2]).unwrap();
        let rows = symplectic_rows(&m);
        let r0 = gf2_rank(&rows);
        let mut shuffled = rows.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        use rand::seq::SliceRandom;
        shuffled.shuffle(&mut rng);
        shuffled.push(rows[dup % rows.len()].clone());
        prop_assert_eq!(gf2_rank(&shuffled), r0);
    }
}

#[test]
fn term_counts() {
    let m = build_model(Family::Checkerboard, [4, 2, 2]).unwrap();
    let h = build_hamiltonian(&m, [0.0; 3]);
    assert_eq!(h.terms().len(), 16);
    assert!(h.terms().iter().all(|t| t.support().len() == 8));
    let m = build_model(Family::Checkerboard, [4, 4, 4]).unwrap();
    let h = build_hamiltonian(&m, [0.3, 0.0, 0.0]);
    let field = h.terms().iter().filter(|t| t.support().len() == 1).count();
    assert_eq!(field, 64);
    assert_eq!(h.terms().len() - field, 64);
}

fn random_configs(n: usize, k: usize, seed: u64) -> Vec<Bits> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..k).map(|_| Bits::random(n, &mut rng)).collect()
}

#[test]
fn connected_counts() {
    let m = build_model(Family::Checkerboard, [4, 4, 4]).unwrap();
    let h = build_hamiltonian(&m, [0.4, 0.0, 0.0]);
    let b = connected_elements(&h, &random_configs(64, 5, 1)).unwrap();
    for i in 0..5 {
        assert_eq!(b.count(i), 1 + 32 + 64);
    }
    for (f, d) in [(Family::Checkerboard, [4, 2, 2]), (Family::XCube, [2, 2, 2]), (Family::Haah, [3, 3, 3])] {
        let m = build_model(f, d).unwrap();
        let h = build_hamiltonian(&m, [0.0; 3]);
        let b = connected_elements(&h, &random_configs(m.n_qubits, 3, 2)).unwrap();
        assert_eq!(b.count(0), 1 + m.x_stabilizer_supports().len());
    }
}

#[test]
fn all_up_diagonal() {
    let m = build_model(Family::Checkerboard, [2, 2, 2]).unwrap();
    let h = build_hamiltonian(&m, [0.0; 3]);
    let b = connected_elements(&h, &[Bits::zeros(8)]).unwrap();
    assert_eq!(b.elements(0)[0], (Bits::zeros(8), C64::new(-4.0, 0.0)));
}

#[test]
fn bad_length_rejected() {
    let m = build_model(Family::Checkerboard, [2, 2, 2]).unwrap();
    let h = build_hamiltonian(&m, [0.0; 3]);
    assert!(matches!(connected_elements(&h, &[Bits::zeros(9)]), Err(Error::BadConfigLength { .. })));
    assert!(matches!(connected_elements_reference(&h, &[Bits::zeros(7)]), Err(Error::BadConfigLength { .. })));
}

fn assert_equivalent(model: &LatticeModel, field: [f64; 3], n_configs: usize) {
    let h = build_hamiltonian(model, field);
    let configs = random_configs(model.n_qubits, n_configs, 9);
    let fast = connected_elements(&h, &configs).unwrap();
    let reference = connected_elements_reference(&h, &configs).unwrap();
    for i in 0..n_configs {
        assert_eq!(fast.canonical(i), reference.canonical(i), "config {i}");
    }
}

#[test]
fn fast_matches_reference() {
    assert_equivalent(&build_model(Family::Checkerboard, [4, 4, 4]).unwrap(), [0.3, 0.0, 0.0], 100);
    assert_equivalent(&build_model(Family::XCube, [2, 2, 2]).unwrap(), [0.0, 0.0, 0.2], 100);
    assert_equivalent(&build_model(Family::Haah, [2, 2, 2]).unwrap(), [0.1, 0.1, 0.1], 100);
    assert_equivalent(&build_model(Family::Checkerboard, [2, 2, 2]).unwrap(), [0.1, 0.2, 0.3], 50);
}

fn hermiticity_defect(h: &PauliHamiltonian) -> f64 {
    let n = h.n_qubits();
    let mut worst: f64 = 0.0;
    for x in 0..1u64 << n {
        let s = Bits::from_u64(n, x);
        let row = canonicalize(connected_elements(h, &[s.clone()]).unwrap().elements(0));
        for (eta, m) in row {
            let back = canonicalize(connected_elements(h, &[eta]).unwrap().elements(0));
            let mt = back.iter().find(|(e, _)| *e == s).map(|(_, v)| *v).unwrap_or_default();
            worst = worst.max((mt - m.conj()).norm());
        }
    }
    worst
}

#[test]
fn hermitian_on_full_space() {
    let m = build_model(Family::Checkerboard, [4, 2, 2]).unwrap();
    assert_eq!(hermiticity_defect(&build_hamiltonian(&m, [0.3, 0.2, 0.1])), 0.0);
    let m = build_model(Family::Checkerboard, [2, 2, 2]).unwrap();
    assert_eq!(hermiticity_defect(&build_hamiltonian(&m, [0.0, 0.7, 0.0])), 0.0);
}

#[test]
fn real_elements_without_y_field() {
    let m = build_model(Family::Haah, [2, 2, 2]).unwrap();
    let h = build_hamiltonian(&m, [0.3, 0.0, 0.4]);
    assert!(h.is_real());
    let b = connected_elements(&h, &random_configs(16, 20, 3)).unwrap();
    assert!(b.mels.iter().all(|m| m.im == 0.0));
    assert!(!build_hamiltonian(&m, [0.0, 0.1, 0.0]).is_real());
}

#[test]
fn manifest_is_stable() {
    let m = build_model(Family::Checkerboard, [4, 2, 2]).unwrap();
    let h = build_hamiltonian(&m, [0.25, 0.0, 0.0]);
    let text = h.text_manifest();
    let back = PauliHamiltonian::from_manifest(&text).unwrap();
    assert_eq!(back.text_manifest(), text);
    assert!(text.starts_with("n_qubits 16\nterms 32\n"));
}
