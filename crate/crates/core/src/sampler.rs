//! Metropolis–Hastings sampling of `|ψ|²` over independent chains.
//!
//! Moves: single-spin flips, flips of an x-type generator support ("cube" moves), and
//! flips of a winding line along x, y or z. All proposals are symmetric.

use std::io::Read;
use std::path::Path;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ansatz::{is_zero_amplitude, Ansatz, EvalState, FlipPlan, Workspace};
use crate::bits::Bits;
use crate::error::{Error, Result};
use crate::lattice::LatticeModel;

pub const N_MOVE_TYPES: usize = 5;
const START_RETRIES: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MoveType {
    Single = 0,
    Cube = 1,
    LoopX = 2,
    LoopY = 3,
    LoopZ = 4,
}

impl MoveType {
    pub const ALL: [MoveType; 5] = [MoveType::Single, MoveType::Cube, MoveType::LoopX, MoveType::LoopY, MoveType::LoopZ];
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UpdateRule {
    pub p_single: f64,
    pub p_cube: f64,
    pub p_loop: [f64; 3],
}

impl Default for UpdateRule {
    fn default() -> Self {
        UpdateRule { p_single: 0.51, p_cube: 0.25, p_loop: [0.08; 3] }
    }
}

impl UpdateRule {
    pub fn single_flip_only() -> Self {
        UpdateRule { p_single: 1.0, p_cube: 0.0, p_loop: [0.0; 3] }
    }

    pub fn probabilities(&self) -> [f64; 5] {
        [self.p_single, self.p_cube, self.p_loop[0], self.p_loop[1], self.p_loop[2]]
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.probabilities();
        if p.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(Error::InvalidConfig("move probabilities must be non-negative".into()));
        }
        if (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig("move probabilities must sum to 1".into()));
        }
        if self.p_single <= 0.0 {
            return Err(Error::InvalidConfig("single-spin flips need positive probability".into()));
        }
        Ok(())
    }
}

/// Index sets available to each non-local move type.
#[derive(Clone, Debug)]
pub struct MoveSet {
    pub n_sites: usize,
    pub cubes: Vec<Vec<usize>>,
    pub loops: [Vec<Vec<usize>>; 3],
}

impl MoveSet {
    pub fn from_model(model: &LatticeModel) -> Self {
        MoveSet {
            n_sites: model.n_qubits,
            cubes: model.x_stabilizer_supports().to_vec(),
            loops: std::array::from_fn(|mu| model.loop_supports(mu).to_vec()),
        }
    }
}

/// Flip plans compiled against one ansatz.
pub struct CompiledMoves {
    classes: [Vec<FlipPlan>; 5],
}

impl CompiledMoves {
    pub fn new(ansatz: &Ansatz, moves: &MoveSet) -> Self {
        let singles = (0..moves.n_sites).map(|i| ansatz.flip_plan(&[i])).collect();
        let cubes = moves.cubes.iter().map(|s| ansatz.flip_plan(s)).collect();
        let [lx, ly, lz] = &moves.loops;
        let comp = |v: &Vec<Vec<usize>>| v.iter().map(|s| ansatz.flip_plan(s)).collect::<Vec<_>>();
        CompiledMoves { classes: [singles, cubes, comp(lx), comp(ly), comp(lz)] }
    }

    pub fn class(&self, t: MoveType) -> &[FlipPlan] {
        &self.classes[t as usize]
    }
}

pub fn draw_move_type<R: Rng + ?Sized>(rule: &UpdateRule, rng: &mut R) -> MoveType {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (t, p) in MoveType::ALL.iter().zip(rule.probabilities()) {
        acc += p;
        if u < acc {
            return *t;
        }
    }
    MoveType::Single
}

/// Draws a move type per `rule` and a uniform member of that class.
pub fn propose<'m, R: Rng + ?Sized>(rule: &UpdateRule, moves: &'m CompiledMoves, rng: &mut R) -> (MoveType, &'m FlipPlan) {
    let t = draw_move_type(rule, rng);
    let class = moves.class(t);
    (t, &class[rng.random_range(0..class.len())])
}

#[derive(Clone, Debug)]
pub struct Chain {
    pub spins: Vec<i8>,
    pub rng: ChaCha8Rng,
    pub accepted: [u64; N_MOVE_TYPES],
    pub proposed: [u64; N_MOVE_TYPES],
}

#[derive(Clone, Debug)]
pub struct ChainEnsemble {
    pub seed: u64,
    pub chains: Vec<Chain>,
}

impl ChainEnsemble {
    /// All chains start all-up; chain `c` uses stream `c` of the master seed.
    pub fn new(n_chains: usize, n_sites: usize, seed: u64) -> Self {
        let chains = (0..n_chains)
            .map(|c| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(c as u64);
                Chain { spins: vec![1; n_sites], rng, accepted: [0; 5], proposed: [0; 5] }
            })
            .collect();
        ChainEnsemble { seed, chains }
    }

    pub fn n_chains(&self) -> usize {
        self.chains.len()
    }

    pub fn totals(&self) -> ([u64; 5], [u64; 5]) {
        let mut a = [0; 5];
        let mut p = [0; 5];
        for c in &self.chains {
            for k in 0..5 {
                a[k] += c.accepted[k];
                p[k] += c.proposed[k];
            }
        }
        (a, p)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let n = self.chains.first().map_or(0, |c| c.spins.len());
        let mut out = Vec::new();
        out.extend_from_slice(b"FNQSCHNS");
        out.extend_from_slice(&1u32.to_le_bytes());
        out.extend_from_slice(&(self.chains.len() as u64).to_le_bytes());
        out.extend_from_slice(&(n as u64).to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        for c in &self.chains {
            for w in Bits::from_spins(&c.spins).words() {
                out.extend_from_slice(&w.to_le_bytes());
            }
            out.extend_from_slice(&c.rng.get_seed());
            out.extend_from_slice(&c.rng.get_stream().to_le_bytes());
            out.extend_from_slice(&c.rng.get_word_pos().to_le_bytes());
            for k in 0..5 {
                out.extend_from_slice(&c.accepted[k].to_le_bytes());
                out.extend_from_slice(&c.proposed[k].to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(mut b: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Format(format!("chain snapshot: {m}"));
        let mut magic = [0u8; 8];
        b.read_exact(&mut magic)?;
        if &magic != b"FNQSCHNS" {
            return Err(bad("bad magic"));
        }
        let mut u4 = [0u8; 4];
        b.read_exact(&mut u4)?;
        if u32::from_le_bytes(u4) != 1 {
            return Err(bad("unsupported version"));
        }
        let rd = |b: &mut &[u8]| -> Result<u64> {
            let mut x = [0u8; 8];
            b.read_exact(&mut x)?;
            Ok(u64::from_le_bytes(x))
        };
        let nc = rd(&mut b)? as usize;
        let n = rd(&mut b)? as usize;
        let seed = rd(&mut b)?;
        let nw = crate::bits::n_words(n);
        let mut chains = Vec::with_capacity(nc);
        for _ in 0..nc {
            let words: Vec<u64> = (0..nw).map(|_| rd(&mut b)).collect::<Result<_>>()?;
            let spins = Bits::from_words(n, &words).to_spins();
            let mut s = [0u8; 32];
            b.read_exact(&mut s)?;
            let stream = rd(&mut b)?;
            let mut wp = [0u8; 16];
            b.read_exact(&mut wp)?;
            let mut rng = ChaCha8Rng::from_seed(s);
            rng.set_stream(stream);
            rng.set_word_pos(u128::from_le_bytes(wp));
            let mut accepted = [0; 5];
            let mut proposed = [0; 5];
            for k in 0..5 {
                accepted[k] = rd(&mut b)?;
                proposed[k] = rd(&mut b)?;
            }
            chains.push(Chain { spins, rng, accepted, proposed });
        }
        if !b.is_empty() {
            return Err(bad("trailing bytes"));
        }
        Ok(ChainEnsemble { seed, chains })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        ChainEnsemble::from_bytes(&std::fs::read(path)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleConfig {
    pub n_samples: usize,
    /// Metropolis steps between recorded samples.
    pub n_updates: usize,
    /// Samples discarded per chain before recording.
    pub n_therm: usize,
}

/// Recorded states, chain-major: sample `t` of chain `c` sits at `c * per_chain + t`.
#[derive(Clone, Debug)]
pub struct SampleSet {
    pub states: Vec<EvalState>,
    pub n_chains: usize,
    pub per_chain: usize,
    pub accepted: [u64; 5],
    pub proposed: [u64; 5],
}

impl SampleSet {
    pub fn acceptance(&self) -> f64 {
        let a: u64 = self.accepted.iter().sum();
        let p: u64 = self.proposed.iter().sum();
        if p == 0 {
            0.0
        } else {
            a as f64 / p as f64
        }
    }

    pub fn acceptance_by_move(&self) -> [f64; 5] {
        std::array::from_fn(|k| {
            if self.proposed[k] == 0 {
                f64::NAN
            } else {
                self.accepted[k] as f64 / self.proposed[k] as f64
            }
        })
    }

    /// Reshape a per-sample scalar into per-chain series.
    pub fn per_chain_series(&self, values: &[f64]) -> Vec<Vec<f64>> {
        values.chunks(self.per_chain).map(|c| c.to_vec()).collect()
    }
}

pub struct Sampler<'a> {
    pub ansatz: &'a Ansatz,
    pub rule: UpdateRule,
    pub moves: CompiledMoves,
}

impl<'a> Sampler<'a> {
    pub fn new(ansatz: &'a Ansatz, moves: &MoveSet, rule: UpdateRule) -> Result<Self> {
        rule.validate()?;
        let compiled = CompiledMoves::new(ansatz, moves);
        for t in MoveType::ALL {
            if rule.probabilities()[t as usize] > 0.0 && compiled.class(t).is_empty() {
                return Err(Error::InvalidConfig(format!("move class {t:?} is empty")));
            }
        }
        Ok(Sampler { ansatz, rule, moves: compiled })
    }

    /// One proposal and accept/reject for a single chain.
    pub fn metropolis_step<R: Rng + ?Sized>(
        &self,
        params: &[C64],
        st: &mut EvalState,
        rng: &mut R,
        ws: &mut Workspace,
        accepted: &mut [u64; 5],
        proposed: &mut [u64; 5],
    ) -> bool {
        let (t, plan) = propose(&self.rule, &self.moves, rng);
        proposed[t as usize] += 1;
        let new = self.ansatz.propose(params, st, plan, ws);
        if is_zero_amplitude(new) {
            self.ansatz.reject(ws);
            return false;
        }
        let d = 2.0 * (new.re - st.log_psi.re);
        if d >= 0.0 || rng.random::<f64>() < d.exp() {
            self.ansatz.accept(st, plan, ws, new);
            accepted[t as usize] += 1;
            true
        } else {
            self.ansatz.reject(ws);
            false
        }
    }

    /// Evaluates the chain state, perturbing zero-amplitude starts by single flips.
    fn start_state(&self, params: &[C64], chain: &mut Chain) -> Result<EvalState> {
        let mut st = self.ansatz.eval_state(params, chain.spins.clone());
        let n = chain.spins.len();
        let mut tries = 0;
        while is_zero_amplitude(st.log_psi) {
            if tries == START_RETRIES {
                return Err(Error::NoValidStart(START_RETRIES));
            }
            let i = chain.rng.random_range(0..n);
            st.spins[i] = -st.spins[i];
            self.ansatz.refresh(params, &mut st);
            tries += 1;
        }
        Ok(st)
    }

    pub fn sample(&self, params: &[C64], ens: &mut ChainEnsemble, cfg: &SampleConfig) -> Result<SampleSet> {
        let nc = ens.n_chains();
        if nc == 0 || cfg.n_samples % nc != 0 || cfg.n_samples == 0 {
            return Err(Error::InvalidConfig(format!(
                "n_samples {} must be a positive multiple of n_chains {nc}",
                cfg.n_samples
            )));
        }
        let per_chain = cfg.n_samples / nc;
        let before = ens.totals();
        let results: Vec<Result<Vec<EvalState>>> = ens
            .chains
            .par_iter_mut()
            .map(|chain| {
                let mut ws = self.ansatz.workspace();
                let mut st = self.start_state(params, chain)?;
                let mut rng = chain.rng.clone();
                let (mut acc, mut prop) = (chain.accepted, chain.proposed);
                for _ in 0..cfg.n_therm * cfg.n_updates {
                    self.metropolis_step(params, &mut st, &mut rng, &mut ws, &mut acc, &mut prop);
                }
                let mut out = Vec::with_capacity(per_chain);
                for _ in 0..per_chain {
                    for _ in 0..cfg.n_updates {
                        self.metropolis_step(params, &mut st, &mut rng, &mut ws, &mut acc, &mut prop);
                    }
                    self.ansatz.refresh(params, &mut st);
                    out.push(st.clone());
                }
                chain.spins = st.spins.clone();
                chain.rng = rng;
                chain.accepted = acc;
                chain.proposed = prop;
                Ok(out)
            })
            .collect();
        let mut states = Vec::with_capacity(cfg.n_samples);
        for r in results {
            states.extend(r?);
        }
        let after = ens.totals();
        Ok(SampleSet {
            states,
            n_chains: nc,
            per_chain,
            accepted: std::array::from_fn(|k| after.0[k] - before.0[k]),
            proposed: std::array::from_fn(|k| after.1[k] - before.1[k]),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_validation() {
        assert!(UpdateRule::default().validate().is_ok());
        let mut r = UpdateRule::default();
        r.p_single = 0.0;
        r.p_cube = 0.76;
        assert!(r.validate().is_err());
        r.p_cube = 0.4;
        r.p_single = 0.26;
        assert!(r.validate().is_err());
    }

    #[test]
    fn snapshot_roundtrip() {
        let mut e = ChainEnsemble::new(3, 70, 11);
        e.chains[1].spins[69] = -1;
        let _: u64 = e.chains[2].rng.random();
        e.chains[0].accepted[3] = 5;
        let back = ChainEnsemble::from_bytes(&e.to_bytes()).unwrap();
        assert_eq!(back.chains[1].spins, e.chains[1].spins);
        assert_eq!(back.chains[2].rng, e.chains[2].rng);
        assert_eq!(back.chains[0].accepted, e.chains[0].accepted);
    }
}
