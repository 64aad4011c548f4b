//! Markov-chain and variational-quality diagnostics.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Sokal window constant.
pub const SOKAL_C: f64 = 5.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rhat {
    pub value: f64,
    /// Set when the within-chain variance vanished; `value` is then 1.
    pub degenerate: bool,
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|a| (a - m) * (a - m)).sum::<f64>() / (n - 1.0);
    (m, v)
}

fn check_rect(series: &[Vec<f64>], min: usize) -> Result<usize> {
    let n = series.first().map_or(0, |c| c.len());
    if series.is_empty() || series.iter().any(|c| c.len() != n) {
        return Err(Error::InvalidConfig("chain series must be rectangular and non-empty".into()));
    }
    if n < min {
        return Err(Error::InvalidConfig(format!("need at least {min} steps per chain, got {n}")));
    }
    Ok(n)
}

/// Plain split-R̂ over the `2·n_chains` half-chains. Odd lengths drop the last step.
pub fn split_rhat(series: &[Vec<f64>]) -> Rhat {
    try_split_rhat(series, false).unwrap_or(Rhat { value: f64::NAN, degenerate: false })
}

pub fn try_split_rhat(series: &[Vec<f64>], rank_normalize: bool) -> Result<Rhat> {
    let n = check_rect(series, 4)?;
    let half = n / 2;
    let mut halves: Vec<Vec<f64>> = Vec::with_capacity(2 * series.len());
    for c in series {
        halves.push(c[..half].to_vec());
        halves.push(c[half..2 * half].to_vec());
    }
    if rank_normalize {
        halves = rank_normal(&halves);
    }
    let stats: Vec<(f64, f64)> = halves.iter().map(|h| mean_var(h)).collect();
    let w = stats.iter().map(|s| s.1).sum::<f64>() / stats.len() as f64;
    let means: Vec<f64> = stats.iter().map(|s| s.0).collect();
    let b = half as f64 * mean_var(&means).1;
    if !(w > 0.0) {
        return Ok(Rhat { value: 1.0, degenerate: true });
    }
    let nh = half as f64;
    let value = (((nh - 1.0) / nh * w + b / nh) / w).sqrt();
    Ok(Rhat { value, degenerate: false })
}

/// Replaces pooled values by normal scores of their (average) ranks.
fn rank_normal(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut pooled: Vec<(f64, usize)> = chains.iter().flatten().copied().zip(0..).collect();
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0));
    let s = pooled.len();
    let mut ranks = vec![0.0; s];
    let mut i = 0;
    while i < s {
        let mut j = i;
        while j + 1 < s && pooled[j + 1].0 == pooled[i].0 {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            ranks[pooled[k].1] = r;
        }
        i = j + 1;
    }
    let normal = Normal::standard();
    let z: Vec<f64> = ranks.iter().map(|r| normal.inverse_cdf((r - 0.375) / (s as f64 + 0.25))).collect();
    let len = chains[0].len();
    z.chunks(len).map(|c| c.to_vec()).collect()
}

/// Integrated autocorrelation time `1 + 2 Σ ρ_k` of one series, Sokal-windowed.
pub fn integrated_time(x: &[f64]) -> f64 {
    let n = x.len();
    let (m, _) = mean_var(x);
    let c0 = x.iter().map(|a| (a - m) * (a - m)).sum::<f64>() / n as f64;
    if !(c0 > 0.0) {
        return 1.0;
    }
    let mut tau = 1.0;
    for k in 1..n {
        let ck = (0..n - k).map(|i| (x[i] - m) * (x[i + k] - m)).sum::<f64>() / n as f64;
        tau += 2.0 * ck / c0;
        if k as f64 >= SOKAL_C * tau {
            break;
        }
    }
    tau
}

/// Chain-averaged integrated time, before normalization.
pub fn integrated_autocorrelation_time(series: &[Vec<f64>]) -> Result<f64> {
    check_rect(series, 16)?;
    Ok(series.iter().map(|c| integrated_time(c)).sum::<f64>() / series.len() as f64)
}

/// Autocorrelation time per recorded sample, `max(0, (τ_int − 1)/2)`, so independent samples give 0.
pub fn autocorrelation_time(series: &[Vec<f64>]) -> f64 {
    match integrated_autocorrelation_time(series) {
        Ok(t) => ((t - 1.0) / 2.0).max(0.0),
        Err(_) => f64::NAN,
    }
}

/// `N·Var/(E − offset)²`.
pub fn v_score(energy: f64, variance: f64, n: usize, offset: f64) -> Result<f64> {
    let d = energy - offset;
    if d == 0.0 {
        return Err(Error::InvalidConfig("v-score undefined at E = offset".into()));
    }
    Ok(n as f64 * variance / (d * d))
}

/// Pooled acceptance ratio.
pub fn acceptance_rate(accepted: &[u64], proposed: &[u64]) -> f64 {
    let a: u64 = accepted.iter().sum();
    let p: u64 = proposed.iter().sum();
    if p == 0 {
        f64::NAN
    } else {
        a as f64 / p as f64
    }
}
