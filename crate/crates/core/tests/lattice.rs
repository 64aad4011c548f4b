use std::collections::HashSet;

use fracton::lattice::{
    build_model, correlator_supports, symmetric_crbm_param_count, translation_group, Family, LatticeModel, SupportKind,
};

fn models() -> Vec<LatticeModel> {
    vec![
        build_model(Family::Checkerboard, [2, 2, 2]).unwrap(),
        build_model(Family::Checkerboard, [4, 2, 2]).unwrap(),
        build_model(Family::Checkerboard, [4, 4, 4]).unwrap(),
        build_model(Family::XCube, [2, 2, 2]).unwrap(),
        build_model(Family::XCube, [3, 3, 3]).unwrap(),
        build_model(Family::XCube, [2, 3, 4]).unwrap(),
        build_model(Family::Haah, [2, 2, 2]).unwrap(),
        build_model(Family::Haah, [3, 3, 3]).unwrap(),
        build_model(Family::Haah, [4, 4, 4]).unwrap(),
    ]
}

fn as_set(s: &[usize]) -> Vec<usize> {
    let mut v = s.to_vec();
    v.sort_unstable();
    v
}

#[test]
fn checkerboard_counts() {
    let m = build_model(Family::Checkerboard, [4, 2, 2]).unwrap();
    assert_eq!(m.n_qubits, 16);
    assert_eq!(m.x_stabilizer_supports().len(), 8);
    assert_eq!(m.z_stabilizer_supports().len(), 8);

    let m = build_model(Family::Checkerboard, [2, 2, 2]).unwrap();
    assert_eq!(m.n_qubits, 8);
    for s in m.x_stabilizer_supports().iter().chain(m.z_stabilizer_supports()) {
        assert_eq!(as_set(s), (0..8).collect::<Vec<_>>());
    }

    let m = build_model(Family::Checkerboard, [4, 4, 4]).unwrap();
    let c = correlator_supports(&m);
    assert_eq!(c.bonds.len(), 192);
    assert_eq!(c.cubes.len(), 32);
    assert_eq!(c.loops.iter().map(|l| l.len()).sum::<usize>(), 48);
    assert!(m.x_stabilizer_supports().iter().all(|s| s.len() == 8));
}

#[test]
fn xcube_counts_by_enumeration() {
    let m = build_model(Family::XCube, [2, 2, 2]).unwrap();
    assert_eq!(m.n_qubits, 24);
    assert_eq!(m.x_stabilizer_supports().len(), 8);
    assert_eq!(m.z_stabilizer_supports().len(), 24);
    assert!(m.x_stabilizer_supports().iter().all(|s| as_set(s).len() == 12 && s.len() == 12));
    assert!(m.z_stabilizer_supports().iter().all(|s| s.len() == 4));
    // every link lies on 4 cubes and on 4 crosses (2 endpoints × 2 planes containing it)
    let mut cube_inc = vec![0; 24];
    let mut cross_inc = vec![0; 24];
    for s in m.x_stabilizer_supports() {
        s.iter().for_each(|&q| cube_inc[q] += 1);
    }
    for s in m.z_stabilizer_supports() {
        s.iter().for_each(|&q| cross_inc[q] += 1);
    }
    assert!(cube_inc.iter().all(|&c| c == 4));
    assert!(cross_inc.iter().all(|&c| c == 4));
}

#[test]
fn haah_supports_have_eight_qubits_from_both_sublattices() {
    for l in 2..5 {
        let m = build_model(Family::Haah, [l; 3]).unwrap();
        let nv = l * l * l;
        for s in m.x_stabilizer_supports().iter().chain(m.z_stabilizer_supports()) {
            assert_eq!(as_set(s).len(), 8);
            let sigma = s.iter().filter(|&&q| q < nv).count();
            assert_eq!(sigma, 4);
        }
    }
}

#[test]
fn group_sizes() {
    assert_eq!(translation_group(&build_model(Family::Checkerboard, [4, 2, 2]).unwrap()).len(), 2);
    let m = build_model(Family::Checkerboard, [8, 8, 8]).unwrap();
    assert_eq!(m.group_order(), 64);
    assert_eq!(m.basis_size(), 8);
    assert_eq!(build_model(Family::XCube, [3, 3, 3]).unwrap().group_order(), 27);
    assert_eq!(build_model(Family::Haah, [4, 4, 4]).unwrap().group_order(), 64);
}

#[test]
fn translations_are_a_group_of_bijections() {
    for m in models() {
        let set: HashSet<Vec<usize>> = m.translations.iter().cloned().collect();
        assert_eq!(set.len(), m.translations.len());
        assert_eq!(m.translations[0], (0..m.n_qubits).collect::<Vec<_>>());
        for p in &m.translations {
            let mut seen = vec![false; m.n_qubits];
            p.iter().for_each(|&i| seen[i] = true);
            assert!(seen.iter().all(|&s| s));
        }
        for p in &m.translations {
            for q in &m.translations {
                let comp: Vec<usize> = (0..m.n_qubits).map(|i| p[q[i]]).collect();
                assert!(set.contains(&comp));
            }
        }
    }
}

#[test]
fn supports_are_covariant_and_structural_permutation_matches() {
    let kinds = [
        SupportKind::Bond,
        SupportKind::XStabilizer,
        SupportKind::ZStabilizer,
        SupportKind::Loop(0),
        SupportKind::Loop(1),
        SupportKind::Loop(2),
    ];
    for m in models() {
        for kind in kinds {
            let sets = m.supports(kind);
            let family: HashSet<Vec<usize>> = sets.iter().map(|s| as_set(s)).collect();
            for g in 0..m.group_order() {
                let pi = &m.translations[g];
                let img = m.support_permutation(kind, g);
                for (i, s) in sets.iter().enumerate() {
                    let mapped = as_set(&s.iter().map(|&q| pi[q]).collect::<Vec<_>>());
                    assert!(family.contains(&mapped));
                    assert_eq!(mapped, as_set(&sets[img[i]]), "{:?} {kind:?}", m.family);
                }
                let mut sorted = img.clone();
                sorted.sort_unstable();
                assert_eq!(sorted, (0..sets.len()).collect::<Vec<_>>());
            }
        }
    }
}

#[test]
fn checkerboard_self_dual_supports() {
    for dims in [[2, 2, 2], [4, 2, 2], [4, 4, 4]] {
        let m = build_model(Family::Checkerboard, dims).unwrap();
        let xs: HashSet<Vec<usize>> = m.x_stabilizer_supports().iter().map(|s| as_set(s)).collect();
        let zs: HashSet<Vec<usize>> = m.z_stabilizer_supports().iter().map(|s| as_set(s)).collect();
        assert_eq!(xs, zs);
    }
}

#[test]
fn loops_wind_the_torus() {
    let m = build_model(Family::Checkerboard, [4, 2, 2]).unwrap();
    assert_eq!(m.loop_supports(0).len(), 4);
    assert!(m.loop_supports(0).iter().all(|l| l.len() == 4));
    assert!(m.loop_supports(1).iter().all(|l| l.len() == 2));
    let m = build_model(Family::Checkerboard, [4, 4, 4]).unwrap();
    assert!(m.loop_supports(0).iter().all(|l| l.len() == 4));
}

#[test]
fn parameter_count_formula() {
    assert_eq!(symmetric_crbm_param_count(8, 2), 5195);
    assert_eq!(symmetric_crbm_param_count(4, 2), 731);
    assert_eq!(symmetric_crbm_param_count(6, 2), 2279);
}

#[test]
fn description_golden() {
    let m = build_model(Family::Checkerboard, [2, 2, 2]).unwrap();
    let golden = include_str!("golden/checkerboard_2x2x2.txt");
    assert_eq!(m.describe(), golden);
}
