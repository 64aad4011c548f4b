//! Pauli-string Hamiltonians, connected elements, commutation checks and GF(2) rank.
//!
//! Matrix-element convention: `σʸ|↑⟩ = i|↓⟩`, so for a term with masks `(x, z)`
//! and `η = σ ⊕ x`, `⟨σ|P|η⟩ = (−i)^{|x∧z|} (−1)^{|σ∧z|}`. For a single σʸ this
//! equals `−i·σ` in terms of the bra spin, i.e. `i·η` in terms of the ket spin.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::rc::Rc;

use num_complex::Complex64 as C64;

use crate::bits::{self, Bits};
use crate::error::{Error, Result};
use crate::lattice::LatticeModel;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Part {
    XGenerators,
    ZGenerators,
    Field,
}

impl Part {
    pub const ALL: [Part; 3] = [Part::XGenerators, Part::ZGenerators, Part::Field];

    pub fn index(self) -> usize {
        self as usize
    }

    fn tag(self) -> &'static str {
        match self {
            Part::XGenerators => "xgen",
            Part::ZGenerators => "zgen",
            Part::Field => "field",
        }
    }

    fn from_tag(s: &str) -> Option<Part> {
        Part::ALL.into_iter().find(|p| p.tag() == s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PauliTerm {
    pub coefficient: C64,
    pub x_mask: Bits,
    pub z_mask: Bits,
    pub part: Part,
}

impl PauliTerm {
    pub fn is_diagonal(&self) -> bool {
        self.x_mask.is_empty()
    }

    /// `coefficient · (−i)^{n_y}`.
    pub fn prefactor(&self) -> C64 {
        let ny = self.x_mask.and_count(&self.z_mask);
        let phase = match ny % 4 {
            0 => C64::new(1.0, 0.0),
            1 => C64::new(0.0, -1.0),
            2 => C64::new(-1.0, 0.0),
            _ => C64::new(0.0, 1.0),
        };
        self.coefficient * phase
    }

    pub fn support(&self) -> Vec<usize> {
        let mut s = self.x_mask.ones();
        s.extend(self.z_mask.ones());
        s.sort_unstable();
        s.dedup();
        s
    }
}

#[derive(Clone, Debug)]
struct FastTerm {
    prefactor: C64,
    part: Part,
    x: Vec<u64>,
    z: Vec<u64>,
}

#[derive(Clone, Debug)]
pub struct PauliHamiltonian {
    n_qubits: usize,
    terms: Vec<PauliTerm>,
    diag: Vec<FastTerm>,
    offdiag: Vec<FastTerm>,
    offdiag_index: Vec<usize>,
}

/// Connected configurations and matrix elements for a batch of inputs, stored flat.
#[derive(Clone, Debug, Default)]
pub struct ConnectedBatch {
    pub n_qubits: usize,
    pub offsets: Vec<usize>,
    pub etas: Vec<u64>,
    pub mels: Vec<C64>,
}

impl ConnectedBatch {
    fn new(n_qubits: usize) -> Self {
        ConnectedBatch { n_qubits, offsets: vec![0], etas: Vec::new(), mels: Vec::new() }
    }

    pub fn n_configs(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn count(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    pub fn elements(&self, i: usize) -> Vec<(Bits, C64)> {
        let nw = bits::n_words(self.n_qubits);
        (self.offsets[i]..self.offsets[i + 1])
            .map(|k| (Bits::from_words(self.n_qubits, &self.etas[k * nw..(k + 1) * nw]), self.mels[k]))
            .collect()
    }

    /// Sorted by η, duplicates summed in emission order, entries below 1e-14 dropped.
    pub fn canonical(&self, i: usize) -> Vec<(Bits, C64)> {
        canonicalize(self.elements(i))
    }
}

pub fn canonicalize(mut v: Vec<(Bits, C64)>) -> Vec<(Bits, C64)> {
    v.sort_by(|a, b| a.0.cmp(&b.0));
    let mut out: Vec<(Bits, C64)> = Vec::with_capacity(v.len());
    for (eta, m) in v {
        match out.last_mut() {
            Some((e, acc)) if *e == eta => *acc += m,
            _ => out.push((eta, m)),
        }
    }
    out.retain(|(_, m)| m.norm() >= 1e-14);
    out
}

impl PauliHamiltonian {
    pub fn new(n_qubits: usize, terms: Vec<PauliTerm>) -> Self {
        let fast = |t: &PauliTerm| FastTerm {
            prefactor: t.prefactor(),
            part: t.part,
            x: t.x_mask.words().to_vec(),
            z: t.z_mask.words().to_vec(),
        };
        let mut diag = Vec::new();
        let mut offdiag = Vec::new();
        let mut offdiag_index = Vec::new();
        for (i, t) in terms.iter().enumerate() {
            if t.is_diagonal() {
                diag.push(fast(t));
            } else {
                offdiag.push(fast(t));
                offdiag_index.push(i);
            }
        }
        PauliHamiltonian { n_qubits, terms, diag, offdiag, offdiag_index }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn terms(&self) -> &[PauliTerm] {
        &self.terms
    }

    pub fn n_offdiagonal(&self) -> usize {
        self.offdiag.len()
    }

    /// Term indices (into `terms()`) of the off-diagonal terms, in emission order.
    pub fn offdiagonal_terms(&self) -> &[usize] {
        &self.offdiag_index
    }

    pub fn is_real(&self) -> bool {
        self.terms.iter().all(|t| t.prefactor().im == 0.0)
    }

    /// Fused diagonal element `⟨σ|H|σ⟩` over all diagonal terms.
    #[inline]
    pub fn diagonal(&self, sigma: &[u64]) -> C64 {
        let mut d = C64::new(0.0, 0.0);
        for t in &self.diag {
            if bits::and_parity(sigma, &t.z) {
                d -= t.prefactor;
            } else {
                d += t.prefactor;
            }
        }
        d
    }

    /// Diagonal element split by Hamiltonian part.
    pub fn diagonal_parts(&self, sigma: &[u64]) -> [C64; 3] {
        let mut d = [C64::new(0.0, 0.0); 3];
        for t in &self.diag {
            let v = if bits::and_parity(sigma, &t.z) { -t.prefactor } else { t.prefactor };
            d[t.part.index()] += v;
        }
        d
    }

    pub fn offdiagonal_part(&self, k: usize) -> Part {
        self.offdiag[k].part
    }

    /// `⟨σ|T_k|σ ⊕ x_k⟩` for the k-th off-diagonal term.
    #[inline]
    pub fn offdiagonal_element(&self, k: usize, sigma: &[u64]) -> C64 {
        let t = &self.offdiag[k];
        if bits::and_parity(sigma, &t.z) {
            -t.prefactor
        } else {
            t.prefactor
        }
    }

    pub fn offdiagonal_mask(&self, k: usize) -> &[u64] {
        &self.offdiag[k].x
    }

    /// Diagonal first, then off-diagonal terms in Hamiltonian order; nothing merged.
    pub fn connected_elements(&self, configs: &[Bits]) -> Result<ConnectedBatch> {
        let nw = bits::n_words(self.n_qubits);
        let mut out = ConnectedBatch::new(self.n_qubits);
        out.etas.reserve(configs.len() * (1 + self.offdiag.len()) * nw);
        for c in configs {
            self.check(c)?;
            let s = c.words();
            out.etas.extend_from_slice(s);
            out.mels.push(self.diagonal(s));
            for (k, t) in self.offdiag.iter().enumerate() {
                out.etas.extend(s.iter().zip(&t.x).map(|(a, b)| a ^ b));
                out.mels.push(self.offdiagonal_element(k, s));
            }
            out.offsets.push(out.mels.len());
        }
        Ok(out)
    }

    fn check(&self, c: &Bits) -> Result<()> {
        if c.len() != self.n_qubits {
            return Err(Error::BadConfigLength { got: c.len(), expected: self.n_qubits });
        }
        Ok(())
    }

    /// Text manifest: one term per line, masks as hex.
    pub fn text_manifest(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "n_qubits {}", self.n_qubits);
        let _ = writeln!(s, "terms {}", self.terms.len());
        for t in &self.terms {
            let _ = writeln!(
                s,
                "{} {:e} {:e} {} {}",
                t.part.tag(),
                t.coefficient.re,
                t.coefficient.im,
                t.x_mask.to_hex(),
                t.z_mask.to_hex()
            );
        }
        s
    }

    pub fn from_manifest(text: &str) -> Result<Self> {
        let bad = |m: &str| Error::Format(format!("hamiltonian manifest: {m}"));
        let mut lines = text.lines();
        let n: usize = lines
            .next()
            .and_then(|l| l.strip_prefix("n_qubits "))
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| bad("missing n_qubits"))?;
        let count: usize = lines
            .next()
            .and_then(|l| l.strip_prefix("terms "))
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| bad("missing terms"))?;
        let mut terms = Vec::with_capacity(count);
        for line in lines.take(count) {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 5 {
                return Err(bad("malformed term line"));
            }
            let part = Part::from_tag(f[0]).ok_or_else(|| bad("unknown part"))?;
            let re: f64 = f[1].parse().map_err(|_| bad("coefficient"))?;
            let im: f64 = f[2].parse().map_err(|_| bad("coefficient"))?;
            let x = Bits::from_hex(n, f[3]).ok_or_else(|| bad("x mask"))?;
            let z = Bits::from_hex(n, f[4]).ok_or_else(|| bad("z mask"))?;
            terms.push(PauliTerm { coefficient: C64::new(re, im), x_mask: x, z_mask: z, part });
        }
        if terms.len() != count {
            return Err(bad("truncated term list"));
        }
        Ok(PauliHamiltonian::new(n, terms))
    }
}

/// `H = −Σ A − Σ B − Σ_i (hx σˣ_i + hy σʸ_i + hz σᶻ_i)`; zero field terms omitted.
pub fn build_hamiltonian(model: &LatticeModel, field: [f64; 3]) -> PauliHamiltonian {
    let n = model.n_qubits;
    let mut terms = Vec::new();
    let minus_one = C64::new(-1.0, 0.0);
    for s in model.x_stabilizer_supports() {
        terms.push(PauliTerm {
            coefficient: minus_one,
            x_mask: Bits::from_indices(n, s),
            z_mask: Bits::zeros(n),
            part: Part::XGenerators,
        });
    }
    for s in model.z_stabilizer_supports() {
        terms.push(PauliTerm {
            coefficient: minus_one,
            x_mask: Bits::zeros(n),
            z_mask: Bits::from_indices(n, s),
            part: Part::ZGenerators,
        });
    }
    for (axis, &h) in field.iter().enumerate() {
        if h == 0.0 {
            continue;
        }
        for i in 0..n {
            let single = Bits::from_indices(n, &[i]);
            let (x, z) = match axis {
                0 => (single, Bits::zeros(n)),
                1 => (single.clone(), single),
                _ => (Bits::zeros(n), single),
            };
            terms.push(PauliTerm { coefficient: C64::new(-h, 0.0), x_mask: x, z_mask: z, part: Part::Field });
        }
    }
    PauliHamiltonian::new(n, terms)
}

enum LocalMatrix {
    Dense { dim: usize, data: Vec<C64> },
    Sparse { rows: Vec<Vec<(usize, C64)>> },
}

struct LocalOp {
    support: Vec<usize>,
    matrix: Rc<LocalMatrix>,
}

const PAULI_I: [[C64; 2]; 2] = [[C64::new(1.0, 0.0), C64::new(0.0, 0.0)], [C64::new(0.0, 0.0), C64::new(1.0, 0.0)]];
const PAULI_X: [[C64; 2]; 2] = [[C64::new(0.0, 0.0), C64::new(1.0, 0.0)], [C64::new(1.0, 0.0), C64::new(0.0, 0.0)]];
const PAULI_Y: [[C64; 2]; 2] = [[C64::new(0.0, 0.0), C64::new(0.0, -1.0)], [C64::new(0.0, 1.0), C64::new(0.0, 0.0)]];
const PAULI_Z: [[C64; 2]; 2] = [[C64::new(1.0, 0.0), C64::new(0.0, 0.0)], [C64::new(0.0, 0.0), C64::new(-1.0, 0.0)]];

fn local_entry(letters: &[u8], r: usize, c: usize) -> C64 {
    let mut v = C64::new(1.0, 0.0);
    for (j, &l) in letters.iter().enumerate() {
        let m = match l {
            b'X' => &PAULI_X,
            b'Y' => &PAULI_Y,
            b'Z' => &PAULI_Z,
            _ => &PAULI_I,
        };
        v *= m[(r >> j) & 1][(c >> j) & 1];
        if v == C64::new(0.0, 0.0) {
            break;
        }
    }
    v
}

/// Baseline: every term becomes an explicit local matrix (Kronecker product of 2×2
/// Pauli matrices times the coefficient) applied independently, with no fusion.
pub struct ReferenceOperator {
    n_qubits: usize,
    ops: Vec<LocalOp>,
    coeffs: Vec<C64>,
}

const DENSE_LIMIT: usize = 10;

impl ReferenceOperator {
    pub fn new(h: &PauliHamiltonian) -> Self {
        let mut cache: HashMap<Vec<u8>, Rc<LocalMatrix>> = HashMap::new();
        let mut ops = Vec::new();
        let mut coeffs = Vec::new();
        for t in h.terms() {
            let support = t.support();
            let letters: Vec<u8> = support
                .iter()
                .map(|&q| match (t.x_mask.get(q), t.z_mask.get(q)) {
                    (true, true) => b'Y',
                    (true, false) => b'X',
                    (false, true) => b'Z',
                    _ => b'I',
                })
                .collect();
            let matrix = cache
                .entry(letters.clone())
                .or_insert_with(|| {
                    let k = letters.len();
                    let dim = 1usize << k;
                    if k <= DENSE_LIMIT {
                        let mut data = vec![C64::new(0.0, 0.0); dim * dim];
                        for r in 0..dim {
                            for c in 0..dim {
                                data[r * dim + c] = local_entry(&letters, r, c);
                            }
                        }
                        Rc::new(LocalMatrix::Dense { dim, data })
                    } else {
                        let rows = (0..dim)
                            .map(|r| {
                                let mut row = Vec::new();
                                for c in 0..dim {
                                    let v = local_entry(&letters, r, c);
                                    if v != C64::new(0.0, 0.0) {
                                        row.push((c, v));
                                    }
                                }
                                row
                            })
                            .collect();
                        Rc::new(LocalMatrix::Sparse { rows })
                    }
                })
                .clone();
            ops.push(LocalOp { support, matrix });
            coeffs.push(t.coefficient);
        }
        ReferenceOperator { n_qubits: h.n_qubits(), ops, coeffs }
    }

    pub fn connected_elements(&self, configs: &[Bits]) -> Result<ConnectedBatch> {
        let mut out = ConnectedBatch::new(self.n_qubits);
        for c in configs {
            if c.len() != self.n_qubits {
                return Err(Error::BadConfigLength { got: c.len(), expected: self.n_qubits });
            }
            for (op, &coeff) in self.ops.iter().zip(&self.coeffs) {
                let mut r = 0usize;
                for (j, &q) in op.support.iter().enumerate() {
                    if c.get(q) {
                        r |= 1 << j;
                    }
                }
                let mut emit = |col: usize, v: C64| {
                    let mut eta = c.clone();
                    for (j, &q) in op.support.iter().enumerate() {
                        eta.set(q, (col >> j) & 1 == 1);
                    }
                    out.etas.extend_from_slice(eta.words());
                    out.mels.push(v * coeff);
                };
                match op.matrix.as_ref() {
                    LocalMatrix::Dense { dim, data } => {
                        for col in 0..*dim {
                            let v = data[r * dim + col];
                            if v != C64::new(0.0, 0.0) {
                                emit(col, v);
                            }
                        }
                    }
                    LocalMatrix::Sparse { rows } => {
                        for &(col, v) in &rows[r] {
                            emit(col, v);
                        }
                    }
                }
            }
            out.offsets.push(out.mels.len());
        }
        Ok(out)
    }
}

pub fn connected_elements(h: &PauliHamiltonian, configs: &[Bits]) -> Result<ConnectedBatch> {
    h.connected_elements(configs)
}

pub fn connected_elements_reference(h: &PauliHamiltonian, configs: &[Bits]) -> Result<ConnectedBatch> {
    ReferenceOperator::new(h).connected_elements(configs)
}

/// Fails with `Equivalence` at the first configuration whose canonical fast and
/// reference element lists differ.
pub fn check_equivalence(h: &PauliHamiltonian, configs: &[Bits]) -> Result<()> {
    let fast = h.connected_elements(configs)?;
    let reference = connected_elements_reference(h, configs)?;
    for i in 0..configs.len() {
        if fast.canonical(i) != reference.canonical(i) {
            return Err(Error::Equivalence(format!("configuration {}", configs[i].to_hex())));
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct OperatorTiming {
    pub n_qubits: usize,
    pub n_samples: usize,
    /// Mean number of connected elements per configuration (fast path, before canonicalization).
    pub mean_count: f64,
    pub fast_ns: f64,
    pub reference_ns: f64,
}

impl OperatorTiming {
    pub fn speedup(&self) -> f64 {
        self.reference_ns / self.fast_ns
    }
}

/// Best-of-`reps` wall time of one batch through each path, after an equivalence check.
pub fn time_connected_elements(h: &PauliHamiltonian, configs: &[Bits], reps: usize) -> Result<OperatorTiming> {
    check_equivalence(h, configs)?;
    let reference = ReferenceOperator::new(h);
    let best = |f: &dyn Fn() -> Result<ConnectedBatch>| -> Result<f64> {
        let mut t = f64::INFINITY;
        for _ in 0..reps.max(1) {
            let start = std::time::Instant::now();
            std::hint::black_box(f()?);
            t = t.min(start.elapsed().as_nanos() as f64);
        }
        Ok(t)
    };
    let fast_ns = best(&|| h.connected_elements(configs))?;
    let reference_ns = best(&|| reference.connected_elements(configs))?;
    let batch = h.connected_elements(configs)?;
    Ok(OperatorTiming {
        n_qubits: h.n_qubits(),
        n_samples: configs.len(),
        mean_count: batch.mels.len() as f64 / configs.len().max(1) as f64,
        fast_ns,
        reference_ns,
    })
}

/// True iff every x-type support overlaps every z-type support on an even number of sites.
pub fn supports_commute(x_supports: &[Vec<usize>], z_supports: &[Vec<usize>], n: usize) -> bool {
    let zs: Vec<Bits> = z_supports.iter().map(|s| Bits::from_indices(n, s)).collect();
    x_supports.iter().all(|s| {
        let x = Bits::from_indices(n, s);
        zs.iter().all(|z| !x.and_parity(z))
    })
}

pub fn verify_commutation(model: &LatticeModel) -> bool {
    supports_commute(model.x_stabilizer_supports(), model.z_stabilizer_supports(), model.n_qubits)
}

/// Rank over GF(2) of bit rows (each row a bitset of equal length).
pub fn gf2_rank(rows: &[Bits]) -> usize {
    let mut m: Vec<Vec<u64>> = rows.iter().map(|r| r.words().to_vec()).collect();
    let ncols = rows.first().map_or(0, |r| r.len());
    let mut rank = 0;
    for col in 0..ncols {
        let (w, b) = (col >> 6, 1u64 << (col & 63));
        let Some(p) = (rank..m.len()).find(|&i| m[i][w] & b != 0) else {
            continue;
        };
        m.swap(rank, p);
        let pivot = m[rank].clone();
        for (i, row) in m.iter_mut().enumerate() {
            if i != rank && row[w] & b != 0 {
                for (x, y) in row.iter_mut().zip(&pivot) {
                    *x ^= y;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Symplectic rows `(x | z)` of all generators.
pub fn symplectic_rows(model: &LatticeModel) -> Vec<Bits> {
    let n = model.n_qubits;
    let mut rows = Vec::new();
    for s in model.x_stabilizer_supports() {
        rows.push(Bits::from_indices(2 * n, s));
    }
    for s in model.z_stabilizer_supports() {
        let shifted: Vec<usize> = s.iter().map(|&q| q + n).collect();
        rows.push(Bits::from_indices(2 * n, &shifted));
    }
    rows
}

/// Exponent `k` with GSD = 2^k.
pub fn ground_state_degeneracy(model: &LatticeModel) -> usize {
    model.n_qubits - gf2_rank(&symplectic_rows(model))
}
