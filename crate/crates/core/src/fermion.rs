//! Second-quantized operators and their on-site matrices.
//!
//! A site carries four states ordered `|0⟩, |↑⟩, |↓⟩, |↑↓⟩` with
//! `|↑↓⟩ = a†↑ a†↓ |0⟩`. Globally, modes are ordered by chain position and then
//! spin (↑ before ↓). Jordan-Wigner strings therefore become the on-site parity
//! `P = diag(1, -1, -1, 1)` on every chain position before an operator's site,
//! and the ↑-occupation sign of a ↓ operator lives inside its local matrix.

use std::collections::BTreeMap;
use std::fmt;

use crate::lattice::{Lattice, LatticeError};
use crate::numerics::DenseTensor;

/// Coefficients below this magnitude are dropped.
pub const COEFF_TOL: f64 = 1e-14;

/// Local Hilbert-space dimension.
pub const D: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Spin {
    Up,
    Down,
}

impl Spin {
    pub fn flip(self) -> Spin {
        match self {
            Spin::Up => Spin::Down,
            Spin::Down => Spin::Up,
        }
    }

    pub const BOTH: [Spin; 2] = [Spin::Up, Spin::Down];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LadderOp {
    pub site: usize,
    pub spin: Spin,
    pub dagger: bool,
}

impl LadderOp {
    pub fn create(site: usize, spin: Spin) -> Self {
        Self { site, spin, dagger: true }
    }

    pub fn annihilate(site: usize, spin: Spin) -> Self {
        Self { site, spin, dagger: false }
    }
}

impl fmt::Display for LadderOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self.spin {
            Spin::Up => "↑",
            Spin::Down => "↓",
        };
        if self.dagger {
            write!(f, "a†{}{s}", self.site)
        } else {
            write!(f, "a{}{s}", self.site)
        }
    }
}

/// `n = a† a` on one mode.
pub fn number(site: usize, spin: Spin) -> [LadderOp; 2] {
    [LadderOp::create(site, spin), LadderOp::annihilate(site, spin)]
}

/// A coefficient times an ordered product of ladder operators.
#[derive(Debug, Clone, PartialEq)]
pub struct FermionTerm {
    pub coeff: f64,
    pub ops: Vec<LadderOp>,
}

impl FermionTerm {
    pub fn new(coeff: f64, ops: Vec<LadderOp>) -> Self {
        Self { coeff, ops }
    }
}

/// A sum of [`FermionTerm`]s on a lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct SopOperator {
    lattice: Lattice,
    terms: Vec<FermionTerm>,
}

impl SopOperator {
    pub fn new(lattice: Lattice) -> Self {
        Self {
            lattice,
            terms: Vec::new(),
        }
    }

    pub fn from_terms(lattice: Lattice, terms: Vec<FermionTerm>) -> Result<Self, LatticeError> {
        for t in &terms {
            for op in &t.ops {
                lattice.check_site(op.site)?;
            }
        }
        Ok(Self { lattice, terms })
    }

    /// Appends a term. Panics if an operator lies outside the lattice.
    pub fn push(&mut self, coeff: f64, ops: impl Into<Vec<LadderOp>>) {
        let ops = ops.into();
        for op in &ops {
            if let Err(e) = self.lattice.check_site(op.site) {
                panic!("{e}");
            }
        }
        self.terms.push(FermionTerm { coeff, ops });
    }

    pub fn extend(&mut self, other: &SopOperator) {
        self.terms.extend(other.terms.iter().cloned());
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn n_sites(&self) -> usize {
        self.lattice.n_sites()
    }

    pub fn terms(&self) -> &[FermionTerm] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.terms.iter_mut().for_each(|t| t.coeff *= factor);
        out
    }

    /// Sorts every term into chain order, reduces repeated modes and merges
    /// duplicates. The represented operator is unchanged.
    pub fn canonicalize(&self) -> Self {
        self.canonicalize_with(false)
    }

    /// Like [`canonicalize`](Self::canonicalize), additionally rewriting
    /// `a a†` on one mode as `1 - a† a`.
    pub fn normal_ordered(&self) -> Self {
        self.canonicalize_with(true)
    }

    fn canonicalize_with(&self, normal_order: bool) -> Self {
        let mut merged: BTreeMap<Vec<LadderOp>, f64> = BTreeMap::new();
        for t in &self.terms {
            for (c, ops) in canonical_words(&self.lattice, t, normal_order) {
                *merged.entry(ops).or_insert(0.0) += c;
            }
        }
        // Keep the output in chain order: sort keys by their positions.
        let mut terms: Vec<FermionTerm> = merged
            .into_iter()
            .filter(|(_, c)| c.abs() >= COEFF_TOL)
            .map(|(ops, coeff)| FermionTerm { coeff, ops })
            .collect();
        let lat = &self.lattice;
        terms.sort_by(|a, b| {
            let ka: Vec<_> = a.ops.iter().map(|o| (lat.position(o.site), o.spin, !o.dagger)).collect();
            let kb: Vec<_> = b.ops.iter().map(|o| (lat.position(o.site), o.spin, !o.dagger)).collect();
            ka.cmp(&kb)
        });
        Self {
            lattice: self.lattice.clone(),
            terms,
        }
    }
}

/// Rewrites one term as a short sum of canonical words.
fn canonical_words(lat: &Lattice, term: &FermionTerm, normal_order: bool) -> Vec<(f64, Vec<LadderOp>)> {
    if term.coeff.abs() < COEFF_TOL {
        return vec![];
    }
    let mode = |o: &LadderOp| (lat.position(o.site), o.spin);
    // Stable insertion sort; each exchange of distinct modes costs a sign.
    let mut ops = term.ops.clone();
    let mut sign = 1.0;
    for i in 1..ops.len() {
        let mut j = i;
        while j > 0 && mode(&ops[j - 1]) > mode(&ops[j]) {
            ops.swap(j - 1, j);
            sign = -sign;
            j -= 1;
        }
    }
    // Collapse each run of one mode: a†a† = aa = 0, and an alternating word
    // reduces to its first and last letters (a†aa† = a†, aa†a = a, ...).
    let mut reduced: Vec<LadderOp> = Vec::with_capacity(ops.len());
    let mut i = 0;
    while i < ops.len() {
        let mut j = i + 1;
        while j < ops.len() && mode(&ops[j]) == mode(&ops[i]) {
            if ops[j].dagger == ops[j - 1].dagger {
                return vec![];
            }
            j += 1;
        }
        reduced.push(ops[i]);
        if j - i >= 2 {
            let first = ops[i];
            let last = ops[j - 1];
            if first.dagger != last.dagger {
                reduced.push(last);
            }
        }
        i = j;
    }
    let coeff = sign * term.coeff;
    if !normal_order {
        return vec![(coeff, reduced)];
    }
    // Expand every `a a†` pair into `1 - a† a`.
    let mut words: Vec<(f64, Vec<LadderOp>)> = vec![(coeff, vec![])];
    let mut k = 0;
    while k < reduced.len() {
        let op = reduced[k];
        let pair = k + 1 < reduced.len() && !op.dagger && mode(&reduced[k + 1]) == mode(&op);
        if pair {
            let mut next = Vec::with_capacity(words.len() * 2);
            for (c, w) in words {
                next.push((c, w.clone()));
                let mut wn = w;
                wn.extend([reduced[k + 1], op]);
                next.push((-c, wn));
            }
            words = next;
            k += 2;
        } else {
            words.iter_mut().for_each(|(_, w)| w.push(op));
            k += 1;
        }
    }
    words
}

/// Elementary on-site operator kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocalKind {
    Create,
    Annihilate,
    Number,
}

pub type Mat4 = [[f64; D]; D];

/// A 4x4 on-site matrix, indexed `[out][in]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalOp {
    pub matrix: Mat4,
    /// True iff the operator changes the site's fermion parity.
    pub parity_odd: bool,
}

const ZERO4: Mat4 = [[0.0; D]; D];

impl LocalOp {
    pub fn identity() -> Self {
        let mut m = ZERO4;
        for (k, row) in m.iter_mut().enumerate() {
            row[k] = 1.0;
        }
        Self { matrix: m, parity_odd: false }
    }

    pub fn parity() -> Self {
        let mut m = ZERO4;
        for (k, s) in [1.0, -1.0, -1.0, 1.0].into_iter().enumerate() {
            m[k][k] = s;
        }
        Self { matrix: m, parity_odd: false }
    }

    /// `self * other`, i.e. `other` acts first.
    pub fn mul(&self, other: &LocalOp) -> LocalOp {
        LocalOp {
            matrix: mat4_mul(&self.matrix, &other.matrix),
            parity_odd: self.parity_odd != other.parity_odd,
        }
    }

    pub fn transpose(&self) -> LocalOp {
        let mut m = ZERO4;
        for (i, row) in self.matrix.iter().enumerate() {
            for (j, &x) in row.iter().enumerate() {
                m[j][i] = x;
            }
        }
        LocalOp { matrix: m, parity_odd: self.parity_odd }
    }

    pub fn is_identity(&self) -> bool {
        self.matrix == LocalOp::identity().matrix
    }
}

pub fn mat4_mul(a: &Mat4, b: &Mat4) -> Mat4 {
    let mut c = ZERO4;
    for i in 0..D {
        for k in 0..D {
            let aik = a[i][k];
            if aik != 0.0 {
                for j in 0..D {
                    c[i][j] += aik * b[k][j];
                }
            }
        }
    }
    c
}

pub fn local_matrix(kind: LocalKind, spin: Spin) -> LocalOp {
    let mut m = ZERO4;
    let create = match spin {
        // a†↑: |0⟩→|↑⟩, |↓⟩→|↑↓⟩
        Spin::Up => [(1, 0, 1.0), (3, 2, 1.0)],
        // a†↓: |0⟩→|↓⟩, |↑⟩→ a†↓a†↑|0⟩ = -|↑↓⟩
        Spin::Down => [(2, 0, 1.0), (3, 1, -1.0)],
    };
    match kind {
        LocalKind::Create => {
            for (o, i, v) in create {
                m[o][i] = v;
            }
        }
        LocalKind::Annihilate => {
            for (o, i, v) in create {
                m[i][o] = v;
            }
        }
        LocalKind::Number => {
            let occ = match spin {
                Spin::Up => [1, 3],
                Spin::Down => [2, 3],
            };
            for k in occ {
                m[k][k] = 1.0;
            }
        }
    }
    LocalOp {
        matrix: m,
        parity_odd: kind != LocalKind::Number,
    }
}

fn ladder_local(op: &LadderOp) -> LocalOp {
    let kind = if op.dagger { LocalKind::Create } else { LocalKind::Annihilate };
    local_matrix(kind, op.spin)
}

/// Per-chain-position factors whose tensor product (identity elsewhere) is the
/// operator product of `term.ops`, without the coefficient.
///
/// Each ladder operator contributes `P` on every earlier chain position; the
/// strings are composed in operator order so overlapping ones cancel.
pub fn term_to_site_factors(ops: &[LadderOp], lattice: &Lattice) -> BTreeMap<usize, LocalOp> {
    let mut factors: BTreeMap<usize, LocalOp> = BTreeMap::new();
    let parity = LocalOp::parity();
    // Operators act right to left, so compose the rightmost first.
    for op in ops.iter().rev() {
        let p = lattice.position(op.site);
        let local = ladder_local(op);
        for q in 0..=p {
            let f = if q == p { &local } else { &parity };
            let cur = factors.entry(q).or_insert_with(LocalOp::identity);
            *cur = f.mul(cur);
        }
    }
    factors.retain(|_, f| !f.is_identity());
    factors
}

/// Dense matrix of `op` on the full `4^N` Fock space, chain position 0 being
/// the most significant digit. Intended for small chains.
pub fn dense_operator(op: &SopOperator) -> DenseTensor {
    let n = op.n_sites();
    let dim = D.pow(n as u32);
    let mut out = DenseTensor::zeros(vec![dim, dim]);
    let id = LocalOp::identity();
    for t in op.terms() {
        let f = term_to_site_factors(&t.ops, op.lattice());
        let mats: Vec<Mat4> = (0..n).map(|q| f.get(&q).unwrap_or(&id).matrix).collect();
        add_kron(&mut out, &mats, t.coeff);
    }
    out
}

/// `out += coeff * (m[0] ⊗ m[1] ⊗ ...)`, exploiting sparsity of the factors.
pub fn add_kron(out: &mut DenseTensor, mats: &[Mat4], coeff: f64) {
    let dim = out.shape()[0];
    let nz: Vec<Vec<(usize, usize, f64)>> = mats
        .iter()
        .map(|m| {
            let mut v = vec![];
            for (o, row) in m.iter().enumerate() {
                for (i, &x) in row.iter().enumerate() {
                    if x != 0.0 {
                        v.push((o, i, x));
                    }
                }
            }
            v
        })
        .collect();
    let data = out.data_mut();
    let mut stack: Vec<(usize, usize, usize, f64)> = vec![(0, 0, 0, coeff)];
    while let Some((depth, row, col, val)) = stack.pop() {
        if depth == nz.len() {
            data[row * dim + col] += val;
            continue;
        }
        for &(o, i, x) in &nz[depth] {
            stack.push((depth + 1, row * D + o, col * D + i, val * x));
        }
    }
}
