//! Periodic cubic lattices for the checkerboard, X-cube and Haah codes.
//!
//! Index conventions (fixed, used by every stored file):
//! - vertex `v = x + Lx*(y + Ly*z)`, x fastest;
//! - checkerboard: one qubit per vertex, `q = v`;
//! - X-cube: one qubit per link, `q = v + Nv*mu` for the link from `v` to `v + e_mu`;
//! - Haah: two qubits per vertex, `q = v + Nv*s` with `s = 0` (σ) and `s = 1` (μ).
//!
//! Haah corner table, for the cube with lower corner `v`:
//!
//! | label | offset  |
//! |-------|---------|
//! | i     | (0,0,0) |
//! | j     | (1,0,0) |
//! | k     | (0,1,0) |
//! | m     | (0,0,1) |
//! | l     | (1,1,0) |
//! | n     | (0,1,1) |
//! | p     | (1,0,1) |
//! | q     | (1,1,1) |
//!
//! z-type generator: μ_j μ_k σ_l μ_m σ_n σ_p σ_q μ_q;
//! x-type generator: σ_i μ_i μ_j μ_k σ_l μ_m σ_n σ_p.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Checkerboard,
    XCube,
    Haah,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Family::Checkerboard => "checkerboard",
            Family::XCube => "xcube",
            Family::Haah => "haah",
        };
        f.write_str(s)
    }
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "checkerboard" | "cb" => Ok(Family::Checkerboard),
            "xcube" => Ok(Family::XCube),
            "haah" => Ok(Family::Haah),
            _ => Err(Error::InvalidConfig(format!("unknown model family `{s}`"))),
        }
    }
}

/// Which family of index sets a feature or move refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SupportKind {
    Site,
    Bond,
    XStabilizer,
    ZStabilizer,
    Loop(usize),
}

/// Index sets plus the structural anchor `(vertex, stratum)` of each set.
#[derive(Clone, Debug)]
pub struct SupportFamily {
    pub sets: Vec<Vec<usize>>,
    anchors: Vec<(usize, usize)>,
    lookup: HashMap<(usize, usize), usize>,
}

impl SupportFamily {
    fn new(items: Vec<((usize, usize), Vec<usize>)>) -> Self {
        let mut sets = Vec::with_capacity(items.len());
        let mut anchors = Vec::with_capacity(items.len());
        let mut lookup = HashMap::new();
        for (i, (a, s)) in items.into_iter().enumerate() {
            lookup.insert(a, i);
            anchors.push(a);
            sets.push(s);
        }
        SupportFamily { sets, anchors, lookup }
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct LatticeModel {
    pub family: Family,
    pub dims: [usize; 3],
    pub n_qubits: usize,
    pub x_stabilizers: SupportFamily,
    pub z_stabilizers: SupportFamily,
    /// Bond `b = q + n_qubits*nu` joins `q` and its neighbor along `nu` in the same stratum.
    pub bonds: Vec<[usize; 2]>,
    pub loops: [SupportFamily; 3],
    pub translations: Vec<Vec<usize>>,
    shifts: Vec<[usize; 3]>,
}

/// Bonds, z-type correlators and non-contractible loops.
#[derive(Clone, Debug)]
pub struct CorrelatorSupports {
    pub bonds: Vec<Vec<usize>>,
    pub cubes: Vec<Vec<usize>>,
    pub loops: [Vec<Vec<usize>>; 3],
}

const HAAH_Z: [((usize, usize, usize), usize); 8] = [
    ((1, 0, 0), 1),
    ((0, 1, 0), 1),
    ((1, 1, 0), 0),
    ((0, 0, 1), 1),
    ((0, 1, 1), 0),
    ((1, 0, 1), 0),
    ((1, 1, 1), 0),
    ((1, 1, 1), 1),
];

const HAAH_X: [((usize, usize, usize), usize); 8] = [
    ((0, 0, 0), 0),
    ((0, 0, 0), 1),
    ((1, 0, 0), 1),
    ((0, 1, 0), 1),
    ((1, 1, 0), 0),
    ((0, 0, 1), 1),
    ((0, 1, 1), 0),
    ((1, 0, 1), 0),
];

impl LatticeModel {
    pub fn new(family: Family, dims: [usize; 3]) -> Result<Self> {
        validate_dims(family, dims)?;
        let g = Geometry { dims };
        let nv = g.n_vertices();
        let n_strata = match family {
            Family::Checkerboard => 1,
            Family::XCube => 3,
            Family::Haah => 2,
        };
        let n_qubits = nv * n_strata;
        let q = |v: usize, s: usize| v + nv * s;

        let (x_items, z_items) = match family {
            Family::Checkerboard => {
                let mut items = Vec::new();
                for v in 0..nv {
                    let c = g.coords(v);
                    if (c[0] + c[1] + c[2]) % 2 == 0 {
                        let mut s = Vec::with_capacity(8);
                        for dz in 0..2 {
                            for dy in 0..2 {
                                for dx in 0..2 {
                                    s.push(g.shift(v, [dx, dy, dz]));
                                }
                            }
                        }
                        items.push(((v, 0), s));
                    }
                }
                (items.clone(), items)
            }
            Family::XCube => {
                let mut cubes = Vec::new();
                for v in 0..nv {
                    let mut s = Vec::with_capacity(12);
                    for mu in 0..3 {
                        let (a, b) = others(mu);
                        for (da, db) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                            let mut d = [0; 3];
                            d[a] = da;
                            d[b] = db;
                            s.push(q(g.shift(v, d), mu));
                        }
                    }
                    cubes.push(((v, 0), s));
                }
                let mut crosses = Vec::new();
                for mu in 0..3 {
                    for v in 0..nv {
                        let mut s = Vec::with_capacity(4);
                        for nu in 0..3 {
                            if nu == mu {
                                continue;
                            }
                            s.push(q(v, nu));
                            s.push(q(g.step(v, nu, -1), nu));
                        }
                        crosses.push(((v, mu), s));
                    }
                }
                (cubes, crosses)
            }
            Family::Haah => {
                let build = |table: &[((usize, usize, usize), usize); 8]| {
                    (0..nv)
                        .map(|v| {
                            let s = table
                                .iter()
                                .map(|&((dx, dy, dz), st)| q(g.shift(v, [dx, dy, dz]), st))
                                .collect();
                            ((v, 0), s)
                        })
                        .collect::<Vec<_>>()
                };
                (build(&HAAH_X), build(&HAAH_Z))
            }
        };

        let mut bonds = vec![[0usize; 2]; 3 * n_qubits];
        for nu in 0..3 {
            for s in 0..n_strata {
                for v in 0..nv {
                    bonds[q(v, s) + n_qubits * nu] = [q(v, s), q(g.step(v, nu, 1), s)];
                }
            }
        }

        let loops = std::array::from_fn(|mu| {
            let mut items = Vec::new();
            for v in 0..nv {
                if g.coords(v)[mu] != 0 {
                    continue;
                }
                let line: Vec<usize> = (0..dims[mu]).map(|k| g.step(v, mu, k as isize)).collect();
                let set = match family {
                    Family::Checkerboard => line,
                    Family::XCube => line.iter().map(|&w| q(w, mu)).collect(),
                    Family::Haah => line
                        .iter()
                        .map(|&w| q(w, 0))
                        .chain(line.iter().map(|&w| q(w, 1)))
                        .collect(),
                };
                items.push(((v, 0), set));
            }
            SupportFamily::new(items)
        });

        let step = if family == Family::Checkerboard { 2 } else { 1 };
        let mut shifts = Vec::new();
        for tz in (0..dims[2]).step_by(step) {
            for ty in (0..dims[1]).step_by(step) {
                for tx in (0..dims[0]).step_by(step) {
                    shifts.push([tx, ty, tz]);
                }
            }
        }
        let translations = shifts
            .iter()
            .map(|&t| {
                (0..n_qubits)
                    .map(|qi| {
                        let (v, s) = (qi % nv, qi / nv);
                        q(g.shift(v, t), s)
                    })
                    .collect()
            })
            .collect();

        Ok(LatticeModel {
            family,
            dims,
            n_qubits,
            x_stabilizers: SupportFamily::new(x_items),
            z_stabilizers: SupportFamily::new(z_items),
            bonds,
            loops,
            translations,
            shifts,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn geometry(&self) -> Geometry {
        Geometry { dims: self.dims }
    }

    pub fn x_stabilizer_supports(&self) -> &[Vec<usize>] {
        &self.x_stabilizers.sets
    }

    pub fn z_stabilizer_supports(&self) -> &[Vec<usize>] {
        &self.z_stabilizers.sets
    }

    pub fn loop_supports(&self, mu: usize) -> &[Vec<usize>] {
        &self.loops[mu].sets
    }

    pub fn n_generators(&self) -> usize {
        self.x_stabilizers.len() + self.z_stabilizers.len()
    }

    pub fn group_order(&self) -> usize {
        self.translations.len()
    }

    /// Number of basis qubits `B = n_qubits / |G|`.
    pub fn basis_size(&self) -> usize {
        self.n_qubits / self.group_order()
    }

    pub fn correlator_supports(&self) -> CorrelatorSupports {
        CorrelatorSupports {
            bonds: self.bonds.iter().map(|b| b.to_vec()).collect(),
            cubes: self.z_stabilizers.sets.clone(),
            loops: std::array::from_fn(|mu| self.loops[mu].sets.clone()),
        }
    }

    pub fn supports(&self, kind: SupportKind) -> Vec<Vec<usize>> {
        match kind {
            SupportKind::Site => (0..self.n_qubits).map(|i| vec![i]).collect(),
            SupportKind::Bond => self.bonds.iter().map(|b| b.to_vec()).collect(),
            SupportKind::XStabilizer => self.x_stabilizers.sets.clone(),
            SupportKind::ZStabilizer => self.z_stabilizers.sets.clone(),
            SupportKind::Loop(mu) => self.loops[mu].sets.clone(),
        }
    }

    /// Image indices of every set of `kind` under translation `g`, derived from anchors.
    pub fn support_permutation(&self, kind: SupportKind, g: usize) -> Vec<usize> {
        let geo = self.geometry();
        let t = self.shifts[g];
        let pi = &self.translations[g];
        let via = |fam: &SupportFamily, project: Option<usize>| -> Vec<usize> {
            fam.anchors
                .iter()
                .map(|&(v, s)| {
                    let mut w = geo.shift(v, t);
                    if let Some(mu) = project {
                        let c = geo.coords(w);
                        w = geo.step(w, mu, -(c[mu] as isize));
                    }
                    fam.lookup[&(w, s)]
                })
                .collect()
        };
        match kind {
            SupportKind::Site => pi.clone(),
            SupportKind::Bond => {
                let n = self.n_qubits;
                (0..3 * n).map(|b| pi[b % n] + n * (b / n)).collect()
            }
            SupportKind::XStabilizer => via(&self.x_stabilizers, None),
            SupportKind::ZStabilizer => via(&self.z_stabilizers, None),
            SupportKind::Loop(mu) => via(&self.loops[mu], Some(mu)),
        }
    }

    /// Structured text export: header, supports and permutations, one item per line.
    pub fn describe(&self) -> String {
        let mut out = String::new();
        let list = |v: &[usize]| v.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" ");
        out.push_str(&format!("family {}\n", self.family));
        out.push_str(&format!("dims {} {} {}\n", self.dims[0], self.dims[1], self.dims[2]));
        out.push_str(&format!("n_qubits {}\n", self.n_qubits));
        out.push_str(&format!("x_stabilizers {}\n", self.x_stabilizers.len()));
        for s in &self.x_stabilizers.sets {
            out.push_str(&format!("  {}\n", list(s)));
        }
        out.push_str(&format!("z_stabilizers {}\n", self.z_stabilizers.len()));
        for s in &self.z_stabilizers.sets {
            out.push_str(&format!("  {}\n", list(s)));
        }
        out.push_str(&format!("bonds {}\n", self.bonds.len()));
        for b in &self.bonds {
            out.push_str(&format!("  {} {}\n", b[0], b[1]));
        }
        for (mu, name) in ["x", "y", "z"].iter().enumerate() {
            out.push_str(&format!("loops_{name} {}\n", self.loops[mu].len()));
            for s in &self.loops[mu].sets {
                out.push_str(&format!("  {}\n", list(s)));
            }
        }
        out.push_str(&format!("translations {}\n", self.translations.len()));
        for p in &self.translations {
            out.push_str(&format!("  {}\n", list(p)));
        }
        out
    }
}

pub fn build_model(family: Family, dims: [usize; 3]) -> Result<LatticeModel> {
    LatticeModel::new(family, dims)
}

pub fn translation_group(model: &LatticeModel) -> &[Vec<usize>] {
    &model.translations
}

pub fn correlator_supports(model: &LatticeModel) -> CorrelatorSupports {
    model.correlator_supports()
}

fn validate_dims(family: Family, dims: [usize; 3]) -> Result<()> {
    let err = |reason: &str| Error::InvalidDims {
        family: family.to_string(),
        dims,
        reason: reason.to_string(),
    };
    if dims.iter().any(|&d| d < 2) {
        return Err(err("every dimension must be at least 2"));
    }
    if dims.iter().product::<usize>() > 1 << 20 {
        return Err(err("lattice too large"));
    }
    match family {
        Family::Checkerboard if dims.iter().any(|d| d % 2 != 0) => {
            Err(err("checkerboard coloring needs even dimensions"))
        }
        Family::Haah if !(dims[0] == dims[1] && dims[1] == dims[2]) => {
            Err(err("Haah lattices must be cubic"))
        }
        _ => Ok(()),
    }
}

fn others(mu: usize) -> (usize, usize) {
    match mu {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Geometry {
    pub dims: [usize; 3],
}

impl Geometry {
    pub fn n_vertices(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn index(&self, c: [usize; 3]) -> usize {
        c[0] + self.dims[0] * (c[1] + self.dims[1] * c[2])
    }

    pub fn coords(&self, v: usize) -> [usize; 3] {
        let x = v % self.dims[0];
        let y = (v / self.dims[0]) % self.dims[1];
        let z = v / (self.dims[0] * self.dims[1]);
        [x, y, z]
    }

    pub fn shift(&self, v: usize, d: [usize; 3]) -> usize {
        let c = self.coords(v);
        self.index(std::array::from_fn(|a| (c[a] + d[a]) % self.dims[a]))
    }

    pub fn step(&self, v: usize, mu: usize, k: isize) -> usize {
        let mut c = self.coords(v);
        let l = self.dims[mu] as isize;
        c[mu] = ((c[mu] as isize + k).rem_euclid(l)) as usize;
        self.index(c)
    }
}

/// Closed-form size of the symmetric cRBM on an `L×L×L` checkerboard lattice.
pub fn symmetric_crbm_param_count(l: usize, alpha_times_b: usize) -> usize {
    let l2 = l * l;
    let l3 = l2 * l;
    9 + 3 * l2 + alpha_times_b * (1 + 3 * l2 + (9 * l3) / 2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkerboard_sizes() {
        let m = LatticeModel::new(Family::Checkerboard, [4, 2, 2]).unwrap();
        assert_eq!(m.n_qubits, 16);
        assert_eq!(m.x_stabilizers.len(), 8);
        assert_eq!(m.z_stabilizers.len(), 8);
        assert_eq!(m.group_order(), 2);
        assert_eq!(m.basis_size(), 8);
        assert!(m.loops[0].sets.iter().all(|l| l.len() == 4));
    }

    #[test]
    fn rejects_odd_checkerboard() {
        assert!(matches!(
            LatticeModel::new(Family::Checkerboard, [3, 2, 2]),
            Err(Error::InvalidDims { .. })
        ));
        assert!(LatticeModel::new(Family::Haah, [2, 2, 3]).is_err());
        assert!(LatticeModel::new(Family::XCube, [1, 2, 2]).is_err());
        assert!(LatticeModel::new(Family::XCube, [2, 3, 4]).is_ok());
    }

    #[test]
    fn family_parse() {
        assert_eq!("X-Cube".parse::<Family>().unwrap(), Family::XCube);
        assert!("toric".parse::<Family>().is_err());
    }

    #[test]
    fn count_formula() {
        assert_eq!(symmetric_crbm_param_count(8, 2), 5195);
    }
}
