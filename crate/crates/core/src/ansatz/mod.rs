//! Neural-network wave functions: plain and symmetric RBMs, the correlator-enhanced RBM,
//! dense baselines, and the closed-form stabilizer constructions.

pub mod checkpoint;
pub mod ffnn;
pub mod network;

use std::f64::consts::{FRAC_PI_4, LN_2};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Family, LatticeModel, SupportKind};
use ffnn::{Ffnn, SymmetricFfnn};
use network::{NetCache, NetScratch, Network, NetworkBuilder};

/// Real part used for `log ψ` of an exactly vanishing amplitude.
pub const ZERO_LOG: f64 = -1.0e6;

#[inline]
pub fn is_zero_amplitude(log_psi: C64) -> bool {
    log_psi.re <= 0.5 * ZERO_LOG
}

/// `log cosh z`, with a flag set when `cosh z` vanishes.
#[inline]
pub fn logcosh(z: C64) -> (C64, bool) {
    let s = if z.re >= 0.0 { z } else { -z };
    let r = 1.0 + (-2.0 * s).exp();
    if r.norm() < 1e-12 {
        return (C64::new(ZERO_LOG, 0.0), true);
    }
    (s + r.ln() - LN_2, false)
}

#[inline]
pub fn tanh_stable(z: C64) -> C64 {
    let (s, sign) = if z.re >= 0.0 { (z, 1.0) } else { (-z, -1.0) };
    let w = (-2.0 * s).exp();
    sign * (1.0 - w) / (1.0 + w)
}

/// Hidden-unit density `α = M/B` as a reduced fraction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Alpha {
    pub num: usize,
    pub den: usize,
}

impl Alpha {
    pub fn new(num: usize, den: usize) -> Self {
        Alpha { num, den }
    }

    pub fn filters(&self, basis: usize) -> Result<usize> {
        if self.den == 0 || (self.num * basis) % self.den != 0 || self.num == 0 {
            return Err(Error::InvalidConfig(format!("alpha {self} times B={basis} is not a positive integer")));
        }
        Ok(self.num * basis / self.den)
    }
}

impl fmt::Display for Alpha {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

impl FromStr for Alpha {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("bad alpha `{s}`"));
        match s.split_once('/') {
            Some((a, b)) => Ok(Alpha::new(a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?)),
            None => Ok(Alpha::new(s.trim().parse().map_err(|_| bad())?, 1)),
        }
    }
}

impl TryFrom<String> for Alpha {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Alpha> for String {
    fn from(a: Alpha) -> String {
        a.to_string()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrelatorSet {
    pub bonds: bool,
    pub cubes: bool,
    pub loops: bool,
}

impl CorrelatorSet {
    pub const ALL: CorrelatorSet = CorrelatorSet { bonds: true, cubes: true, loops: true };
    pub const CUBES: CorrelatorSet = CorrelatorSet { bonds: false, cubes: true, loops: false };
}

impl Default for CorrelatorSet {
    fn default() -> Self {
        CorrelatorSet::ALL
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Architecture {
    Rbm { hidden: usize },
    SymmetricRbm { alpha: Alpha },
    SymmetricCrbm {
        alpha: Alpha,
        #[serde(default)]
        correlators: CorrelatorSet,
    },
    Ffnn { widths: Vec<usize> },
    SymmetricFfnn { features: usize, width: usize },
    /// One hidden unit per stabilizer support (the closed-form RBM connectivity).
    LocalRbm,
    /// One hidden unit per z-type correlator.
    LocalCrbm,
}

impl Architecture {
    pub fn tag(&self) -> &'static str {
        match self {
            Architecture::Rbm { .. } => "rbm",
            Architecture::SymmetricRbm { .. } => "symmetric_rbm",
            Architecture::SymmetricCrbm { .. } => "symmetric_crbm",
            Architecture::Ffnn { .. } => "ffnn",
            Architecture::SymmetricFfnn { .. } => "symmetric_ffnn",
            Architecture::LocalRbm => "local_rbm",
            Architecture::LocalCrbm => "local_crbm",
        }
    }

    pub fn is_symmetric(&self) -> bool {
        matches!(
            self,
            Architecture::SymmetricRbm { .. } | Architecture::SymmetricCrbm { .. } | Architecture::SymmetricFfnn { .. }
        )
    }

    /// Every architecture here is holomorphic in its complex parameters.
    pub fn is_holomorphic(&self) -> bool {
        true
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamBlock {
    pub name: String,
    pub start: usize,
    pub len: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnsatzParameters {
    pub architecture: Architecture,
    pub values: Vec<C64>,
}

impl AnsatzParameters {
    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub fn count_nonzero(&self) -> usize {
        self.values.iter().filter(|v| v.norm() > 0.0).count()
    }
}

#[derive(Clone, Debug)]
enum Kind {
    Net(Network),
    Ffnn(Ffnn),
    SymFfnn(SymmetricFfnn),
}

#[derive(Clone, Debug)]
pub struct Ansatz {
    pub architecture: Architecture,
    n_qubits: usize,
    kind: Kind,
    layout: Vec<ParamBlock>,
}

/// A set of sites flipped together, with the network features it toggles.
#[derive(Clone, Debug)]
pub struct FlipPlan {
    pub sites: Vec<usize>,
    toggled: Vec<u32>,
}

/// Configuration plus cached evaluation data for one Markov chain.
#[derive(Clone, Debug)]
pub struct EvalState {
    pub spins: Vec<i8>,
    pub log_psi: C64,
    cache: Option<NetCache>,
}

#[derive(Clone, Debug)]
pub struct Workspace {
    net: Option<NetScratch>,
    buf: Vec<i8>,
}

struct Layout(Vec<ParamBlock>);

impl Layout {
    fn add(&mut self, b: &mut NetworkBuilder, name: impl Into<String>, len: usize) -> u32 {
        let start = b.params(len);
        self.0.push(ParamBlock { name: name.into(), start: start as usize, len });
        start
    }
}

const AXES: [&str; 3] = ["x", "y", "z"];

impl Ansatz {
    pub fn new(model: &LatticeModel, architecture: Architecture) -> Result<Self> {
        let n = model.n_qubits;
        let mut layout = Layout(Vec::new());
        let kind = match &architecture {
            Architecture::Rbm { hidden } => {
                let mut b = NetworkBuilder::new(n);
                let a = layout.add(&mut b, "a", n);
                let bias = layout.add(&mut b, "b", *hidden);
                let w = layout.add(&mut b, "W", hidden * n);
                let feats: Vec<u32> = (0..n).map(|i| b.feature(&[i], Some(a + i as u32))).collect();
                for j in 0..*hidden {
                    let conns = (0..n).map(|i| (feats[i], w + (j * n + i) as u32)).collect();
                    b.unit(Some(bias + j as u32), conns);
                }
                Kind::Net(b.build())
            }
            Architecture::SymmetricRbm { alpha } => {
                Kind::Net(symmetric_network(model, *alpha, None, &mut layout)?)
            }
            Architecture::SymmetricCrbm { alpha, correlators } => {
                Kind::Net(symmetric_network(model, *alpha, Some(*correlators), &mut layout)?)
            }
            Architecture::Ffnn { widths } => {
                let f = Ffnn::new(n, widths);
                layout.0.push(ParamBlock { name: "layers".into(), start: 0, len: f.n_params() });
                Kind::Ffnn(f)
            }
            Architecture::SymmetricFfnn { features, width } => {
                let f = SymmetricFfnn::new(model.translations.clone(), *features, *width);
                layout.0.push(ParamBlock { name: "layers".into(), start: 0, len: f.n_params() });
                Kind::SymFfnn(f)
            }
            Architecture::LocalRbm => {
                let mut b = NetworkBuilder::new(n);
                for (k, s) in local_rbm_units(model).iter().enumerate() {
                    let bias = layout.add(&mut b, format!("b[{k}]"), 1);
                    let w = layout.add(&mut b, format!("W[{k}]"), s.len());
                    let conns = s
                        .iter()
                        .enumerate()
                        .map(|(i, &site)| (b.feature(&[site], None), w + i as u32))
                        .collect();
                    b.unit(Some(bias), conns);
                }
                Kind::Net(b.build())
            }
            Architecture::LocalCrbm => {
                let mut b = NetworkBuilder::new(n);
                for (k, s) in model.z_stabilizer_supports().iter().enumerate() {
                    let bias = layout.add(&mut b, format!("b[{k}]"), 1);
                    let w = layout.add(&mut b, format!("W[{k}]"), 1);
                    let f = b.feature(s, None);
                    b.unit(Some(bias), vec![(f, w)]);
                }
                Kind::Net(b.build())
            }
        };
        Ok(Ansatz { architecture, n_qubits: n, kind, layout: layout.0 })
    }

    pub fn n_params(&self) -> usize {
        match &self.kind {
            Kind::Net(n) => n.n_params(),
            Kind::Ffnn(f) => f.n_params(),
            Kind::SymFfnn(f) => f.n_params(),
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn layout(&self) -> &[ParamBlock] {
        &self.layout
    }

    pub fn block(&self, name: &str) -> Option<&ParamBlock> {
        self.layout.iter().find(|b| b.name == name)
    }

    pub fn is_symmetric(&self) -> bool {
        self.architecture.is_symmetric()
    }

    pub fn network(&self) -> Option<&Network> {
        match &self.kind {
            Kind::Net(n) => Some(n),
            _ => None,
        }
    }

    fn check(&self, params: &[C64], spins: &[i8]) -> Result<()> {
        if spins.len() != self.n_qubits {
            return Err(Error::BadConfigLength { got: spins.len(), expected: self.n_qubits });
        }
        if params.len() != self.n_params() {
            return Err(Error::InvalidConfig(format!(
                "parameter vector has length {}, expected {}",
                params.len(),
                self.n_params()
            )));
        }
        if params.iter().any(|p| !p.re.is_finite() || !p.im.is_finite()) {
            return Err(Error::NonFiniteResult);
        }
        Ok(())
    }

    /// Validated `log ψ(σ)`; exact zeros come back as `ZERO_LOG`.
    pub fn try_log_psi(&self, params: &[C64], spins: &[i8]) -> Result<C64> {
        self.check(params, spins)?;
        let l = self.log_psi(params, spins);
        if !l.re.is_finite() || !l.im.is_finite() {
            return Err(Error::NonFiniteResult);
        }
        Ok(l)
    }

    pub fn log_psi(&self, params: &[C64], spins: &[i8]) -> C64 {
        match &self.kind {
            Kind::Net(n) => n.log_psi(params, spins),
            Kind::Ffnn(f) => f.log_psi(params, spins),
            Kind::SymFfnn(f) => f.log_psi(params, spins),
        }
    }

    /// `O_j(σ) = ∂ log ψ / ∂θ_j`, ordered like the parameter vector.
    pub fn log_derivs(&self, params: &[C64], spins: &[i8], out: &mut [C64]) -> Result<()> {
        self.check(params, spins)?;
        match &self.kind {
            Kind::Net(n) => n.log_derivs(&n.cache(params, spins), out),
            Kind::Ffnn(f) => f.log_derivs(params, spins, out),
            Kind::SymFfnn(f) => f.log_derivs(params, spins, out),
        }
    }

    pub fn flip_plan(&self, sites: &[usize]) -> FlipPlan {
        let toggled = match &self.kind {
            Kind::Net(n) => n.toggled_features(sites),
            _ => Vec::new(),
        };
        FlipPlan { sites: sites.to_vec(), toggled }
    }

    pub fn workspace(&self) -> Workspace {
        Workspace {
            net: match &self.kind {
                Kind::Net(n) => Some(n.scratch()),
                _ => None,
            },
            buf: vec![0; self.n_qubits],
        }
    }

    pub fn eval_state(&self, params: &[C64], spins: Vec<i8>) -> EvalState {
        match &self.kind {
            Kind::Net(n) => {
                let c = n.cache(params, &spins);
                EvalState { log_psi: c.log_psi(), spins, cache: Some(c) }
            }
            _ => EvalState { log_psi: self.log_psi(params, &spins), spins, cache: None },
        }
    }

    /// Recomputes cached data from scratch (limits drift of incremental sums).
    pub fn refresh(&self, params: &[C64], st: &mut EvalState) {
        let spins = std::mem::take(&mut st.spins);
        *st = self.eval_state(params, spins);
    }

    /// `log ψ` of the configuration with `plan` applied; pair with `accept` or `reject`.
    pub fn propose(&self, params: &[C64], st: &EvalState, plan: &FlipPlan, ws: &mut Workspace) -> C64 {
        match (&self.kind, &st.cache, &mut ws.net) {
            (Kind::Net(n), Some(c), Some(s)) => n.propose(params, c, &plan.toggled, s),
            _ => {
                ws.buf.copy_from_slice(&st.spins);
                for &i in &plan.sites {
                    ws.buf[i] = -ws.buf[i];
                }
                self.log_psi(params, &ws.buf)
            }
        }
    }

    pub fn accept(&self, st: &mut EvalState, plan: &FlipPlan, ws: &mut Workspace, new_log: C64) {
        for &i in &plan.sites {
            st.spins[i] = -st.spins[i];
        }
        if let (Kind::Net(n), Some(c), Some(s)) = (&self.kind, &mut st.cache, &mut ws.net) {
            n.accept(c, &plan.toggled, s);
        }
        st.log_psi = new_log;
    }

    pub fn reject(&self, ws: &mut Workspace) {
        if let (Kind::Net(n), Some(s)) = (&self.kind, &mut ws.net) {
            n.reject(s);
        }
    }

    /// `log ψ(η) − log ψ(σ)` for `η = σ` with `plan` flipped, leaving `st` untouched.
    pub fn log_ratio(&self, params: &[C64], st: &EvalState, plan: &FlipPlan, ws: &mut Workspace) -> C64 {
        let l = self.propose(params, st, plan, ws);
        self.reject(ws);
        if is_zero_amplitude(l) {
            C64::new(ZERO_LOG, 0.0)
        } else {
            l - st.log_psi
        }
    }

    pub fn log_derivs_state(&self, params: &[C64], st: &EvalState, out: &mut [C64]) -> Result<()> {
        match (&self.kind, &st.cache) {
            (Kind::Net(n), Some(c)) => n.log_derivs(c, out),
            _ => self.log_derivs(params, &st.spins, out),
        }
    }
}

fn symmetric_network(
    model: &LatticeModel,
    alpha: Alpha,
    correlators: Option<CorrelatorSet>,
    layout: &mut Layout,
) -> Result<Network> {
    let n = model.n_qubits;
    let n_filters = alpha.filters(model.basis_size())?;
    let ng = model.group_order();
    let mut b = NetworkBuilder::new(n);
    let cs = correlators.unwrap_or(CorrelatorSet { bonds: false, cubes: false, loops: false });

    let a = layout.add(&mut b, "a", 1);
    let a_bond = cs.bonds.then(|| layout.add(&mut b, "a_bond", 1));
    let a_cube = cs.cubes.then(|| layout.add(&mut b, "a_cube", 1));
    let loop_kinds = [SupportKind::Loop(0), SupportKind::Loop(1), SupportKind::Loop(2)];
    let (a_loop, b_loop, wp_loop) = if cs.loops {
        let al: Vec<u32> = (0..3).map(|m| layout.add(&mut b, format!("a_loop_{}", AXES[m]), 1)).collect();
        let bl: Vec<u32> = (0..3).map(|m| layout.add(&mut b, format!("b_loop_{}", AXES[m]), 1)).collect();
        let wl: Vec<u32> = (0..3)
            .map(|m| layout.add(&mut b, format!("Wp_loop_{}", AXES[m]), model.loops[m].len()))
            .collect();
        (al, bl, wl)
    } else {
        (Vec::new(), Vec::new(), Vec::new())
    };

    // (kind, feature indices, block name)
    let mut groups: Vec<(SupportKind, Vec<u32>, String)> = Vec::new();
    let spins: Vec<u32> = (0..n).map(|i| b.feature(&[i], Some(a))).collect();
    groups.push((SupportKind::Site, spins, "W".into()));
    if let Some(ab) = a_bond {
        let f = model.bonds.iter().map(|s| b.feature(s, Some(ab))).collect();
        groups.push((SupportKind::Bond, f, "W_bond".into()));
    }
    if let Some(ac) = a_cube {
        let f = model.z_stabilizer_supports().iter().map(|s| b.feature(s, Some(ac))).collect();
        groups.push((SupportKind::ZStabilizer, f, "W_cube".into()));
    }
    let mut loop_feats: Vec<Vec<u32>> = Vec::new();
    if cs.loops {
        for m in 0..3 {
            let f: Vec<u32> = model.loops[m].sets.iter().map(|s| b.feature(s, Some(a_loop[m]))).collect();
            loop_feats.push(f.clone());
            groups.push((loop_kinds[m], f, format!("W_loop_{}", AXES[m])));
        }
    }
    let perms: Vec<Vec<Vec<usize>>> = groups
        .iter()
        .map(|(k, _, _)| (0..ng).map(|g| model.support_permutation(*k, g)).collect())
        .collect();

    for j in 0..n_filters {
        let bias = layout.add(&mut b, format!("b[{j}]"), 1);
        let starts: Vec<u32> = groups
            .iter()
            .map(|(_, f, name)| layout.add(&mut b, format!("{name}[{j}]"), f.len()))
            .collect();
        for g in 0..ng {
            let mut conns = Vec::new();
            for (gi, (_, feats, _)) in groups.iter().enumerate() {
                let perm = &perms[gi][g];
                for i in 0..feats.len() {
                    conns.push((feats[perm[i]], starts[gi] + i as u32));
                }
            }
            b.unit(Some(bias), conns);
        }
    }
    if cs.loops {
        for m in 0..3 {
            let perm_idx = groups.iter().position(|(k, _, _)| *k == loop_kinds[m]).unwrap();
            for g in 0..ng {
                let perm = &perms[perm_idx][g];
                let conns =
                    (0..loop_feats[m].len()).map(|i| (loop_feats[m][perm[i]], wp_loop[m] + i as u32)).collect();
                b.unit(Some(b_loop[m]), conns);
            }
        }
    }
    Ok(b.build())
}

/// Hidden-unit supports of the closed-form RBM.
fn local_rbm_units(model: &LatticeModel) -> Vec<Vec<usize>> {
    match model.family {
        Family::Checkerboard => {
            let mut u = model.x_stabilizer_supports().to_vec();
            u.extend(model.z_stabilizer_supports().iter().cloned());
            u
        }
        Family::XCube => model.z_stabilizer_supports().to_vec(),
        Family::Haah => model.z_stabilizer_supports().iter().flat_map(|s| [s.clone(), s.clone()]).collect(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExactKind {
    Rbm,
    Crbm,
}

impl FromStr for ExactKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rbm" => Ok(ExactKind::Rbm),
            "crbm" => Ok(ExactKind::Crbm),
            _ => Err(Error::UnsupportedCombination(s.to_string())),
        }
    }
}

/// Closed-form ground-state parameters.
///
/// RBM: hidden units on generator supports with `b = 0`, `W = iπ/4`.
/// cRBM: one unit per z-type correlator with `b = iπ/4`, `W = −iπ/4`.
pub fn exact_parameters(model: &LatticeModel, kind: ExactKind) -> Result<(Ansatz, AnsatzParameters)> {
    let arch = match kind {
        ExactKind::Rbm => Architecture::LocalRbm,
        ExactKind::Crbm => Architecture::LocalCrbm,
    };
    let ansatz = Ansatz::new(model, arch.clone())?;
    let mut values = vec![C64::new(0.0, 0.0); ansatz.n_params()];
    for blk in ansatz.layout() {
        let v = match (kind, blk.name.starts_with('b')) {
            (ExactKind::Rbm, true) => C64::new(0.0, 0.0),
            (ExactKind::Rbm, false) => C64::new(0.0, FRAC_PI_4),
            (ExactKind::Crbm, true) => C64::new(0.0, FRAC_PI_4),
            (ExactKind::Crbm, false) => C64::new(0.0, -FRAC_PI_4),
        };
        values[blk.start..blk.start + blk.len].iter_mut().for_each(|x| *x = v);
    }
    Ok((ansatz, AnsatzParameters { architecture: arch, values }))
}

/// Exact construction for an arbitrary architecture name; only the two local ones exist.
pub fn exact_parameters_for(model: &LatticeModel, architecture: &Architecture) -> Result<(Ansatz, AnsatzParameters)> {
    match architecture {
        Architecture::LocalRbm => exact_parameters(model, ExactKind::Rbm),
        Architecture::LocalCrbm => exact_parameters(model, ExactKind::Crbm),
        other => Err(Error::UnsupportedCombination(other.tag().to_string())),
    }
}

/// I.i.d. Gaussian real and imaginary parts with standard deviation `sigma_std`.
pub fn init_random(n_params: usize, seed: u64, sigma_std: f64) -> Vec<C64> {
    if sigma_std == 0.0 {
        return vec![C64::new(0.0, 0.0); n_params];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma_std).expect("finite standard deviation");
    (0..n_params)
        .map(|_| {
            let re = normal.sample(&mut rng);
            let im = normal.sample(&mut rng);
            C64::new(re, im)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logcosh_matches_naive() {
        for z in [C64::new(0.3, -0.2), C64::new(-2.0, 1.0), C64::new(0.0, 0.7)] {
            let (v, zero) = logcosh(z);
            assert!(!zero);
            assert!((v - z.cosh().ln()).norm() < 1e-12);
        }
        let (v, _) = logcosh(C64::new(800.0, 0.1));
        assert!(v.re.is_finite());
    }

    #[test]
    fn logcosh_flags_zero() {
        assert!(logcosh(C64::new(0.0, std::f64::consts::FRAC_PI_2)).1);
    }

    #[test]
    fn alpha_parse() {
        let a: Alpha = "1/4".parse().unwrap();
        assert_eq!(a.filters(8).unwrap(), 2);
        assert!(a.filters(3).is_err());
        assert_eq!(a.to_string(), "1/4");
    }

    #[test]
    fn init_is_deterministic() {
        assert_eq!(init_random(10, 3, 0.01), init_random(10, 3, 0.01));
        assert!(init_random(5, 3, 0.0).iter().all(|v| v.norm() == 0.0));
    }
}
