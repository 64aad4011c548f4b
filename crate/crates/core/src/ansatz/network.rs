//! Sparse shared-weight RBM over arbitrary multi-spin features.
//!
//! `log ψ(σ) = Σ_f a_{v(f)} F_f + Σ_u log cosh(b_u + Σ_{(f,p) ∈ u} θ_p F_f)` where each
//! feature `F_f` is the product of the spins in its index set. Parameter indices may be
//! shared between visible terms and connections, which is how translation symmetry is
//! imposed.

use num_complex::Complex64 as C64;

use super::{logcosh, tanh_stable, ZERO_LOG};
use crate::error::{Error, Result};

const NONE: u32 = u32::MAX;

#[derive(Clone, Debug)]
pub struct Network {
    n_sites: usize,
    n_params: usize,
    feat_sites: Vec<Vec<u32>>,
    feat_vis: Vec<u32>,
    unit_bias: Vec<u32>,
    unit_start: Vec<usize>,
    conn_feat: Vec<u32>,
    conn_param: Vec<u32>,
    fu_start: Vec<usize>,
    fu_unit: Vec<u32>,
    fu_param: Vec<u32>,
    site_feats: Vec<Vec<u32>>,
}

#[derive(Default)]
pub struct NetworkBuilder {
    n_sites: usize,
    n_params: usize,
    feats: Vec<Vec<u32>>,
    vis: Vec<u32>,
    units: Vec<(u32, Vec<(u32, u32)>)>,
}

impl NetworkBuilder {
    pub fn new(n_sites: usize) -> Self {
        NetworkBuilder { n_sites, ..Default::default() }
    }

    pub fn param(&mut self) -> u32 {
        self.n_params += 1;
        (self.n_params - 1) as u32
    }

    pub fn params(&mut self, k: usize) -> u32 {
        let first = self.n_params as u32;
        self.n_params += k;
        first
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    /// Adds a feature; returns its index.
    pub fn feature(&mut self, sites: &[usize], visible: Option<u32>) -> u32 {
        self.feats.push(sites.iter().map(|&s| s as u32).collect());
        self.vis.push(visible.unwrap_or(NONE));
        (self.feats.len() - 1) as u32
    }

    pub fn unit(&mut self, bias: Option<u32>, conns: Vec<(u32, u32)>) {
        self.units.push((bias.unwrap_or(NONE), conns));
    }

    pub fn build(self) -> Network {
        let nf = self.feats.len();
        let mut unit_start = vec![0];
        let mut conn_feat = Vec::new();
        let mut conn_param = Vec::new();
        let mut unit_bias = Vec::new();
        let mut per_feat: Vec<Vec<(u32, u32)>> = vec![Vec::new(); nf];
        for (u, (bias, conns)) in self.units.into_iter().enumerate() {
            unit_bias.push(bias);
            for (f, p) in conns {
                conn_feat.push(f);
                conn_param.push(p);
                per_feat[f as usize].push((u as u32, p));
            }
            unit_start.push(conn_feat.len());
        }
        let mut fu_start = vec![0];
        let mut fu_unit = Vec::new();
        let mut fu_param = Vec::new();
        for list in per_feat {
            for (u, p) in list {
                fu_unit.push(u);
                fu_param.push(p);
            }
            fu_start.push(fu_unit.len());
        }
        let mut site_feats = vec![Vec::new(); self.n_sites];
        for (f, s) in self.feats.iter().enumerate() {
            for &i in s {
                site_feats[i as usize].push(f as u32);
            }
        }
        Network {
            n_sites: self.n_sites,
            n_params: self.n_params,
            feat_sites: self.feats,
            feat_vis: self.vis,
            unit_bias,
            unit_start,
            conn_feat,
            conn_param,
            fu_start,
            fu_unit,
            fu_param,
            site_feats,
        }
    }
}

/// Cached pre-activations and log-cosh values for one configuration.
#[derive(Clone, Debug)]
pub struct NetCache {
    pub feats: Vec<i8>,
    theta: Vec<C64>,
    lc: Vec<C64>,
    zero: Vec<bool>,
    vis: C64,
    lc_sum: C64,
    n_zero: usize,
}

impl NetCache {
    pub fn log_psi(&self) -> C64 {
        if self.n_zero > 0 {
            C64::new(ZERO_LOG, 0.0)
        } else {
            self.vis + self.lc_sum
        }
    }
}

/// Per-chain workspace for proposals.
#[derive(Clone, Debug, Default)]
pub struct NetScratch {
    dtheta: Vec<C64>,
    mark: Vec<bool>,
    touched: Vec<u32>,
    new_lc: Vec<(C64, bool)>,
    new_vis: C64,
    new_lc_sum: C64,
    new_n_zero: usize,
}

impl Network {
    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn n_features(&self) -> usize {
        self.feat_sites.len()
    }

    pub fn n_units(&self) -> usize {
        self.unit_bias.len()
    }

    pub fn scratch(&self) -> NetScratch {
        NetScratch {
            dtheta: vec![C64::new(0.0, 0.0); self.n_units()],
            mark: vec![false; self.n_units()],
            ..Default::default()
        }
    }

    /// Features whose value changes when `sites` are flipped together.
    pub fn toggled_features(&self, sites: &[usize]) -> Vec<u32> {
        let mut count: std::collections::HashMap<u32, usize> = std::collections::HashMap::new();
        for &s in sites {
            for &f in &self.site_feats[s] {
                *count.entry(f).or_insert(0) += 1;
            }
        }
        let mut out: Vec<u32> = count.into_iter().filter(|&(_, c)| c % 2 == 1).map(|(f, _)| f).collect();
        out.sort_unstable();
        out
    }

    pub fn cache(&self, params: &[C64], spins: &[i8]) -> NetCache {
        let feats: Vec<i8> = self
            .feat_sites
            .iter()
            .map(|s| s.iter().fold(1i8, |acc, &i| acc * spins[i as usize]))
            .collect();
        let mut vis = C64::new(0.0, 0.0);
        for (f, &v) in self.feat_vis.iter().enumerate() {
            if v != NONE {
                vis += params[v as usize] * feats[f] as f64;
            }
        }
        let nu = self.n_units();
        let mut theta = Vec::with_capacity(nu);
        let mut lc = Vec::with_capacity(nu);
        let mut zero = Vec::with_capacity(nu);
        let mut lc_sum = C64::new(0.0, 0.0);
        let mut n_zero = 0;
        for u in 0..nu {
            let mut t = match self.unit_bias[u] {
                NONE => C64::new(0.0, 0.0),
                b => params[b as usize],
            };
            for k in self.unit_start[u]..self.unit_start[u + 1] {
                let w = params[self.conn_param[k] as usize];
                if feats[self.conn_feat[k] as usize] > 0 {
                    t += w;
                } else {
                    t -= w;
                }
            }
            let (v, z) = logcosh(t);
            if z {
                n_zero += 1;
            } else {
                lc_sum += v;
            }
            theta.push(t);
            lc.push(v);
            zero.push(z);
        }
        NetCache { feats, theta, lc, zero, vis, lc_sum, n_zero }
    }

    pub fn log_psi(&self, params: &[C64], spins: &[i8]) -> C64 {
        self.cache(params, spins).log_psi()
    }

    /// Log-amplitude after toggling `toggled`; leaves the proposal in `s` for `accept`.
    pub fn propose(&self, params: &[C64], c: &NetCache, toggled: &[u32], s: &mut NetScratch) -> C64 {
        let mut dvis = C64::new(0.0, 0.0);
        s.touched.clear();
        for &f in toggled {
            let f = f as usize;
            let m2 = -2.0 * c.feats[f] as f64;
            if self.feat_vis[f] != NONE {
                dvis += params[self.feat_vis[f] as usize] * m2;
            }
            for k in self.fu_start[f]..self.fu_start[f + 1] {
                let u = self.fu_unit[k];
                let w = params[self.fu_param[k] as usize] * m2;
                let ui = u as usize;
                if !s.mark[ui] {
                    s.mark[ui] = true;
                    s.touched.push(u);
                    s.dtheta[ui] = w;
                } else {
                    s.dtheta[ui] += w;
                }
            }
        }
        let mut lc_sum = c.lc_sum;
        let mut n_zero = c.n_zero;
        s.new_lc.clear();
        for &u in &s.touched {
            let u = u as usize;
            let (v, z) = logcosh(c.theta[u] + s.dtheta[u]);
            if c.zero[u] {
                n_zero -= 1;
            } else {
                lc_sum -= c.lc[u];
            }
            if z {
                n_zero += 1;
            } else {
                lc_sum += v;
            }
            s.new_lc.push((v, z));
        }
        s.new_vis = c.vis + dvis;
        s.new_lc_sum = lc_sum;
        s.new_n_zero = n_zero;
        if n_zero > 0 {
            C64::new(ZERO_LOG, 0.0)
        } else {
            s.new_vis + lc_sum
        }
    }

    /// Commits the last proposal made with `s`.
    pub fn accept(&self, c: &mut NetCache, toggled: &[u32], s: &mut NetScratch) {
        for &f in toggled {
            c.feats[f as usize] = -c.feats[f as usize];
        }
        for (k, &u) in s.touched.iter().enumerate() {
            let u = u as usize;
            c.theta[u] += s.dtheta[u];
            c.lc[u] = s.new_lc[k].0;
            c.zero[u] = s.new_lc[k].1;
        }
        c.vis = s.new_vis;
        c.lc_sum = s.new_lc_sum;
        c.n_zero = s.new_n_zero;
        self.reject(s);
    }

    pub fn reject(&self, s: &mut NetScratch) {
        for &u in &s.touched {
            s.mark[u as usize] = false;
        }
        s.touched.clear();
    }

    pub fn log_derivs(&self, c: &NetCache, out: &mut [C64]) -> Result<()> {
        if c.n_zero > 0 {
            return Err(Error::DerivativeAtZeroAmplitude);
        }
        out.iter_mut().for_each(|o| *o = C64::new(0.0, 0.0));
        for (f, &v) in self.feat_vis.iter().enumerate() {
            if v != NONE {
                out[v as usize] += c.feats[f] as f64;
            }
        }
        for u in 0..self.n_units() {
            let t = tanh_stable(c.theta[u]);
            if self.unit_bias[u] != NONE {
                out[self.unit_bias[u] as usize] += t;
            }
            for k in self.unit_start[u]..self.unit_start[u + 1] {
                let p = self.conn_param[k] as usize;
                if c.feats[self.conn_feat[k] as usize] > 0 {
                    out[p] += t;
                } else {
                    out[p] -= t;
                }
            }
        }
        Ok(())
    }
}
