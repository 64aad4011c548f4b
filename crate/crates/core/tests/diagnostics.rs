use fracton::diagnostics::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn normal_chains(n_chains: usize, n: usize, offset: impl Fn(usize) -> f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = Normal::new(0.0, 1.0).unwrap();
    (0..n_chains).map(|c| (0..n).map(|_| offset(c) + d.sample(&mut rng)).collect()).collect()
}

fn ar1(n: usize, rho: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = Normal::new(0.0, 1.0).unwrap();
    let mut x = 0.0;
    (0..n).map(|_| { x = rho * x + d.sample(&mut rng); x }).collect()
}

#[test]
fn rhat_of_iid_chains_is_near_one() {
    let r = split_rhat(&normal_chains(64, 1000, |_| 0.0, 1));
    assert!(!r.degenerate);
    assert!(r.value < 1.02 && r.value > 0.98, "{}", r.value);
}

#[test]
fn rhat_detects_separated_chains() {
    let r = split_rhat(&normal_chains(8, 200, |c| if c < 4 { 0.0 } else { 10.0 }, 2));
    assert!(r.value > 1.1 * 3.0, "{}", r.value);
}

#[test]
fn rhat_of_constant_series() {
    let r = split_rhat(&vec![vec![2.5; 10]; 4]);
    assert!(r.degenerate);
    assert_eq!(r.value, 1.0);
}

#[test]
fn rhat_affine_invariance_and_rank_variant() {
    let chains = normal_chains(6, 101, |c| 0.2 * c as f64, 3);
    let r = split_rhat(&chains).value;
    let t: Vec<Vec<f64>> = chains.iter().map(|c| c.iter().map(|x| -3.0 * x + 7.0).collect()).collect();
    assert!((split_rhat(&t).value - r).abs() < 1e-12);
    let ranked = try_split_rhat(&chains, true).unwrap();
    assert!(ranked.value > 1.0 && (ranked.value - r).abs() < 0.1);
    assert!(try_split_rhat(&[vec![1.0, 2.0, 3.0]], false).is_err());
    assert!(try_split_rhat(&[vec![1.0; 6], vec![1.0; 5]], false).is_err());
}

#[test]
fn autocorrelation_of_iid_is_zero() {
    let tau = autocorrelation_time(&normal_chains(4, 10_000, |_| 0.0, 4));
    assert!(tau.abs() < 0.05, "{tau}");
}

#[test]
fn autocorrelation_of_ar1_matches_closed_form() {
    let rho = 0.9;
    let chains: Vec<Vec<f64>> = (0..8).map(|s| ar1(20_000, rho, 10 + s)).collect();
    let raw = integrated_autocorrelation_time(&chains).unwrap();
    let closed = (1.0 + rho) / (1.0 - rho);
    assert!((raw - closed).abs() / closed < 0.1, "{raw}");
    let tau = autocorrelation_time(&chains);
    assert!((tau - rho / (1.0 - rho)).abs() / (rho / (1.0 - rho)) < 0.1, "{tau}");
}

#[test]
fn alternating_series_floors_at_zero() {
    let alt: Vec<f64> = (0..1000).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
    assert_eq!(autocorrelation_time(&[alt]), 0.0);
}

#[test]
fn v_score_values() {
    assert_eq!(v_score(-3.0, 0.0, 10, 0.0).unwrap(), 0.0);
    assert!((v_score(-64.0, 1.0, 64, 0.0).unwrap() - 1.0 / 64.0).abs() < 1e-15);
    let a = v_score(-5.0, 2.0, 16, 0.0).unwrap();
    let b = v_score(-5.0 * 3.0, 2.0 * 9.0, 16, 0.0).unwrap();
    assert!((a - b).abs() < 1e-15);
    assert!(v_score(1.0, 1.0, 4, 1.0).is_err());
}

#[test]
fn acceptance_pooling() {
    assert_eq!(acceptance_rate(&[1, 2, 3], &[2, 4, 6]), 0.5);
    assert!(acceptance_rate(&[0], &[0]).is_nan());
}
