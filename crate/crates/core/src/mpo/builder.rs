//! Sum-of-products to MPO compilation by bipartite-graph vertex covers.
//!
//! Each term is first written as a coefficient times one local matrix per
//! chain site. The sweep then goes left to right. At site `p` every surviving
//! term is an edge between a left vertex (incoming bond operator, local
//! operator at `p`) and a right vertex (the string of local operators on the
//! remaining sites). A minimum vertex cover of that graph chooses the outgoing
//! bond operators: a covered left vertex becomes a bond operator as is, a
//! covered right vertex gets a complementary operator, the weighted sum of
//! all left vertices it connects to that are not covered themselves.
//!
//! Before the graph is built, left vertices with proportional coefficient rows
//! and right vertices with proportional coefficient columns are merged. A plain
//! cover counts the nonzero pattern only; merging lets factorizable blocks such
//! as `(1 + B n_i)(1 + A n_j)` cost one bond instead of two.

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use crate::fermion::{term_to_site_factors, LocalOp, Mat4, SopOperator, COEFF_TOL, D};
use crate::lattice::Lattice;
use crate::mpo::graph::{hopcroft_karp, min_vertex_cover, BipartiteGraph, GraphError};
use crate::numerics::DenseTensor;

/// Index into [`SymbolicMpo::ops`]; 0 is the identity.
pub type OpId = u32;

/// Relative tolerance for treating two coefficient vectors as proportional.
const PROPORTIONAL_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MpoError {
    #[error("operator is defined on {op} sites but the lattice has {lattice}")]
    SiteMismatch { op: usize, lattice: usize },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// How an outgoing bond operator was chosen at its cut.
#[derive(Debug, Clone, PartialEq)]
pub enum BondOp {
    /// A covered group of left vertices `(incoming bond, local op)`.
    Left(Vec<(usize, OpId)>),
    /// Complementary operator of a covered group of right-operator strings.
    Right(Vec<Vec<OpId>>),
}

/// Transfer table of one site: `entries[(in, out)]` is a sum of
/// `factor * ops[op]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteTable {
    pub rows: usize,
    pub cols: usize,
    pub entries: BTreeMap<(usize, usize), Vec<(OpId, f64)>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymbolicMpo {
    /// Distinct local matrices, each scaled so its first nonzero entry is 1.
    pub ops: Vec<LocalOp>,
    pub sites: Vec<SiteTable>,
    /// Operator labels of the bond after each site.
    pub bonds: Vec<Vec<BondOp>>,
}

/// Dense realization: `tensors[p]` has shape `(v_{p-1}, 4, 4, v_p)` indexed
/// `[left, out, in, right]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericMpo {
    tensors: Vec<DenseTensor>,
}

/// Output of [`build_mpo`].
#[derive(Debug, Clone)]
pub struct BuiltMpo {
    pub symbolic: SymbolicMpo,
    pub numeric: NumericMpo,
    /// Bond dimension at each of the `N - 1` internal cuts.
    pub bond_profile: Vec<usize>,
}

struct OpRegistry {
    ops: Vec<LocalOp>,
    lookup: HashMap<Vec<u64>, OpId>,
}

impl OpRegistry {
    fn new() -> Self {
        let mut r = Self {
            ops: Vec::new(),
            lookup: HashMap::new(),
        };
        r.intern(&LocalOp::identity());
        r
    }

    /// Id of `op` up to scale, and the scale.
    fn intern(&mut self, op: &LocalOp) -> (OpId, f64) {
        let scale = op
            .matrix
            .iter()
            .flatten()
            .copied()
            .find(|x| *x != 0.0)
            .unwrap_or(1.0);
        let mut m = op.matrix;
        for x in m.iter_mut().flatten() {
            *x /= scale;
            if *x == 0.0 {
                *x = 0.0; // drop the sign of -0.0
            }
        }
        let key: Vec<u64> = m.iter().flatten().map(|x| x.to_bits()).collect();
        let id = *self.lookup.entry(key).or_insert_with(|| {
            self.ops.push(LocalOp {
                matrix: m,
                parity_odd: op.parity_odd,
            });
            (self.ops.len() - 1) as OpId
        });
        (id, scale)
    }
}

/// A term during the sweep: incoming bond index, local operators on the
/// sites not yet absorbed, and its weight.
#[derive(Debug, Clone)]
struct Pending {
    bond: usize,
    ops: Vec<OpId>,
    weight: f64,
}

/// Groups the rows of a sparse matrix into classes of proportional rows.
/// Returns, per row, `(class, scale)` with `row = scale * class_row`, and the
/// class representative rows (normalized so the first entry is 1).
fn proportional_classes(rows: &[Vec<(usize, f64)>]) -> (Vec<(usize, f64)>, Vec<Vec<(usize, f64)>>) {
    let mut classes: Vec<Vec<(usize, f64)>> = Vec::new();
    // Rows with the same support are the only candidates for proportionality.
    let mut by_support: HashMap<Vec<usize>, Vec<usize>> = HashMap::new();
    let mut out = Vec::with_capacity(rows.len());
    for row in rows {
        let lead = row[0].1;
        let normalized: Vec<(usize, f64)> = row.iter().map(|&(c, w)| (c, w / lead)).collect();
        let support: Vec<usize> = row.iter().map(|e| e.0).collect();
        let cands = by_support.entry(support).or_default();
        let found = cands.iter().copied().find(|&k| {
            classes[k].iter().zip(&normalized).all(|(a, b)| {
                (a.1 - b.1).abs() <= PROPORTIONAL_TOL * a.1.abs().max(b.1.abs())
            })
        });
        let k = match found {
            Some(k) => k,
            None => {
                classes.push(normalized);
                cands.push(classes.len() - 1);
                classes.len() - 1
            }
        };
        out.push((k, lead));
    }
    (out, classes)
}

/// Compiles `op` into an MPO on the chain defined by `lattice`.
pub fn build_mpo(op: &SopOperator, lattice: &Lattice) -> Result<BuiltMpo, MpoError> {
    let n = lattice.n_sites();
    if op.n_sites() != n {
        return Err(MpoError::SiteMismatch {
            op: op.n_sites(),
            lattice: n,
        });
    }
    let mut reg = OpRegistry::new();
    let mut pending: Vec<Pending> = Vec::new();
    for t in op.terms() {
        if t.coeff.abs() < COEFF_TOL {
            continue;
        }
        let factors = term_to_site_factors(&t.ops, lattice);
        let mut weight = t.coeff;
        let mut ops = vec![0 as OpId; n];
        for (q, f) in factors {
            let (id, s) = reg.intern(&f);
            ops[q] = id;
            weight *= s;
        }
        pending.push(Pending { bond: 0, ops, weight });
    }

    let mut sites: Vec<SiteTable> = Vec::with_capacity(n);
    let mut bonds: Vec<Vec<BondOp>> = Vec::with_capacity(n);
    let mut in_dim = 1usize;

    for _ in 0..n {
        let mut table = SiteTable {
            rows: in_dim,
            cols: 0,
            entries: BTreeMap::new(),
        };
        // Coefficient matrix between left and right vertices.
        let mut gamma: BTreeMap<((usize, OpId), Vec<OpId>), f64> = BTreeMap::new();
        for t in pending.drain(..) {
            *gamma.entry(((t.bond, t.ops[0]), t.ops[1..].to_vec())).or_insert(0.0) += t.weight;
        }
        gamma.retain(|_, w| w.abs() >= COEFF_TOL);
        if gamma.is_empty() {
            return Ok(zero_mpo(lattice, reg));
        }

        let mut left_keys: Vec<(usize, OpId)> = gamma.keys().map(|k| k.0).collect();
        left_keys.dedup();
        let mut right_keys: Vec<Vec<OpId>> = gamma.keys().map(|k| k.1.clone()).collect();
        right_keys.sort();
        right_keys.dedup();
        let right_index: HashMap<&Vec<OpId>, usize> = right_keys.iter().enumerate().map(|(i, k)| (k, i)).collect();

        // Rows of gamma (BTreeMap order keeps each row's entries contiguous).
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); left_keys.len()];
        {
            let mut li = 0;
            let mut prev = None;
            for ((lk, rk), &w) in &gamma {
                if prev.is_some() && prev != Some(*lk) {
                    li += 1;
                }
                prev = Some(*lk);
                rows[li].push((right_index[rk], w));
            }
            for r in rows.iter_mut() {
                r.sort_by_key(|e| e.0);
            }
        }
        let (row_class, row_reps) = proportional_classes(&rows);
        // Columns of the row-reduced matrix.
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); right_keys.len()];
        for (g, rep) in row_reps.iter().enumerate() {
            for &(c, w) in rep {
                cols[c].push((g, w));
            }
        }
        let (col_class, col_reps) = proportional_classes(&cols);
        // Reduced matrix gamma''[g][h].
        let mut reduced: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (h, rep) in col_reps.iter().enumerate() {
            for &(g, w) in rep {
                reduced.insert((g, h), w);
            }
        }

        let graph = BipartiteGraph::new(row_reps.len(), col_reps.len(), reduced.iter().map(|(&(g, h), &w)| (g, h, w)));
        let matching = hopcroft_karp(&graph);
        let cover = min_vertex_cover(&graph, &matching)?;
        let mut row_covered = vec![false; row_reps.len()];
        for &g in &cover.left {
            row_covered[g] = true;
        }

        // Members of each class with their scales.
        let mut row_members: Vec<Vec<(usize, f64)>> = vec![Vec::new(); row_reps.len()];
        for (l, &(g, s)) in row_class.iter().enumerate() {
            row_members[g].push((l, s));
        }
        let mut col_members: Vec<Vec<(usize, f64)>> = vec![Vec::new(); col_reps.len()];
        for (r, &(h, s)) in col_class.iter().enumerate() {
            col_members[h].push((r, s));
        }

        let mut out_ops: Vec<BondOp> = Vec::new();
        let add_entry = |table: &mut SiteTable, l: usize, col: usize, w: f64| {
            let (bond, op_id) = left_keys[l];
            let e = table.entries.entry((bond, col)).or_default();
            match e.iter_mut().find(|x| x.0 == op_id) {
                Some(x) => x.1 += w,
                None => e.push((op_id, w)),
            }
        };

        // Covered left groups: bond operator = Σ_l s_l L_l, carrying
        // Σ_h gamma''[g,h] Σ_r b_r R_r to the right.
        for &g in &cover.left {
            let col = out_ops.len();
            for &(l, s) in &row_members[g] {
                add_entry(&mut table, l, col, s);
            }
            out_ops.push(BondOp::Left(row_members[g].iter().map(|&(l, _)| left_keys[l]).collect()));
            for h in 0..col_reps.len() {
                if let Some(&w) = reduced.get(&(g, h)) {
                    for &(r, b) in &col_members[h] {
                        pending.push(Pending {
                            bond: col,
                            ops: right_keys[r].clone(),
                            weight: w * b,
                        });
                    }
                }
            }
        }
        // Covered right groups: complementary operator over the uncovered
        // left groups, carrying Σ_r b_r R_r.
        for &h in &cover.right {
            let col = out_ops.len();
            for g in 0..row_reps.len() {
                if row_covered[g] {
                    continue;
                }
                if let Some(&w) = reduced.get(&(g, h)) {
                    for &(l, s) in &row_members[g] {
                        add_entry(&mut table, l, col, w * s);
                    }
                }
            }
            out_ops.push(BondOp::Right(col_members[h].iter().map(|&(r, _)| right_keys[r].clone()).collect()));
            for &(r, b) in &col_members[h] {
                pending.push(Pending {
                    bond: col,
                    ops: right_keys[r].clone(),
                    weight: b,
                });
            }
        }
        for e in table.entries.values_mut() {
            e.retain(|x| x.1 != 0.0);
        }
        table.entries.retain(|_, e| !e.is_empty());
        table.cols = out_ops.len();
        in_dim = out_ops.len();
        sites.push(table);
        bonds.push(out_ops);
    }

    // Every remaining term now has an empty operator string; fold its weight
    // into the last column.
    debug_assert_eq!(in_dim, 1);
    let mut last_weight: BTreeMap<usize, f64> = BTreeMap::new();
    for t in pending {
        *last_weight.entry(t.bond).or_insert(0.0) += t.weight;
    }
    let w = last_weight.get(&0).copied().unwrap_or(0.0);
    let last = sites.last_mut().expect("at least two sites");
    for e in last.entries.values_mut() {
        for x in e.iter_mut() {
            x.1 *= w;
        }
    }
    bonds.pop();

    let symbolic = SymbolicMpo { ops: reg.ops, sites, bonds };
    let numeric = NumericMpo::from_symbolic(&symbolic);
    let bond_profile = symbolic.bonds.iter().map(|b| b.len()).collect();
    Ok(BuiltMpo {
        symbolic,
        numeric,
        bond_profile,
    })
}

/// `0 · I` with every bond of dimension 1.
fn zero_mpo(lattice: &Lattice, reg: OpRegistry) -> BuiltMpo {
    let n = lattice.n_sites();
    let sites: Vec<SiteTable> = (0..n)
        .map(|p| SiteTable {
            rows: 1,
            cols: 1,
            entries: BTreeMap::from([((0, 0), vec![(0, if p == 0 { 0.0 } else { 1.0 })])]),
        })
        .collect();
    let bonds = vec![vec![BondOp::Left(vec![(0, 0)])]; n - 1];
    let symbolic = SymbolicMpo { ops: reg.ops, sites, bonds };
    let numeric = NumericMpo::from_symbolic(&symbolic);
    BuiltMpo {
        symbolic,
        numeric,
        bond_profile: vec![1; n - 1],
    }
}

impl SymbolicMpo {
    pub fn n_sites(&self) -> usize {
        self.sites.len()
    }
}

impl NumericMpo {
    pub fn from_symbolic(s: &SymbolicMpo) -> Self {
        let tensors = s
            .sites
            .iter()
            .map(|site| {
                let mut t = DenseTensor::zeros(vec![site.rows, D, D, site.cols]);
                for (&(a, b), terms) in &site.entries {
                    for &(id, f) in terms {
                        let m = &s.ops[id as usize].matrix;
                        for o in 0..D {
                            for i in 0..D {
                                if m[o][i] != 0.0 {
                                    let v = t.get(&[a, o, i, b]) + f * m[o][i];
                                    t.set(&[a, o, i, b], v);
                                }
                            }
                        }
                    }
                }
                t
            })
            .collect();
        Self { tensors }
    }

    pub fn from_tensors(tensors: Vec<DenseTensor>) -> Self {
        Self { tensors }
    }

    /// Identity operator with all bonds 1.
    pub fn identity(n: usize) -> Self {
        let t = DenseTensor::from_fn(vec![1, D, D, 1], |i| if i[1] == i[2] { 1.0 } else { 0.0 });
        Self { tensors: vec![t; n] }
    }

    pub fn n_sites(&self) -> usize {
        self.tensors.len()
    }

    pub fn tensors(&self) -> &[DenseTensor] {
        &self.tensors
    }

    pub fn site(&self, p: usize) -> &DenseTensor {
        &self.tensors[p]
    }

    /// Bond dimensions at the `N - 1` internal cuts.
    pub fn bond_dims(&self) -> Vec<usize> {
        self.tensors[..self.tensors.len().saturating_sub(1)]
            .iter()
            .map(|t| t.shape()[3])
            .collect()
    }

    /// Nonzero `(left, right)` blocks of site `p` as 4x4 matrices `[out][in]`.
    pub fn blocks(&self, p: usize) -> Vec<(usize, usize, Mat4)> {
        let t = &self.tensors[p];
        let (vl, vr) = (t.shape()[0], t.shape()[3]);
        let mut out = Vec::new();
        for a in 0..vl {
            for b in 0..vr {
                let mut m = [[0.0; D]; D];
                let mut nz = false;
                for (o, row) in m.iter_mut().enumerate() {
                    for (i, x) in row.iter_mut().enumerate() {
                        *x = t.get(&[a, o, i, b]);
                        nz |= *x != 0.0;
                    }
                }
                if nz {
                    out.push((a, b, m));
                }
            }
        }
        out
    }

    /// Full `4^N x 4^N` matrix, chain position 0 most significant.
    pub fn to_dense(&self) -> DenseTensor {
        // acc[(out, in), b] accumulated site by site.
        let mut acc = DenseTensor::from_fn(vec![1, 1, 1], |_| 1.0);
        for t in &self.tensors {
            let c = crate::numerics::contract(&acc, t, &[(2, 0)]).expect("bond extents agree");
            // c: (out, in, o, i, b) -> (out, o, in, i, b)
            let (dout, din) = (acc.shape()[0], acc.shape()[1]);
            let b = t.shape()[3];
            acc = c
                .permute(&[0, 2, 1, 3, 4])
                .expect("valid permutation")
                .reshape(vec![dout * D, din * D, b])
                .expect("sizes agree");
        }
        let dim = acc.shape()[0];
        acc.reshape(vec![dim, dim]).expect("square")
    }
}

/// Summary used by reports.
#[derive(Debug, Clone, PartialEq)]
pub struct MpoStats {
    pub max_bond: usize,
    pub bonds: Vec<usize>,
    /// Fraction of nonzero entries over all site tensors.
    pub nonzero_density: f64,
}

pub fn mpo_stats(mpo: &NumericMpo) -> MpoStats {
    let bonds = mpo.bond_dims();
    let (nz, total) = mpo.tensors().iter().fold((0usize, 0usize), |(nz, tot), t| {
        (nz + t.data().iter().filter(|x| **x != 0.0).count(), tot + t.len())
    });
    MpoStats {
        max_bond: bonds.iter().copied().max().unwrap_or(1),
        bonds,
        nonzero_density: if total == 0 { 0.0 } else { nz as f64 / total as f64 },
    }
}

/// Analytic bond-dimension bound for the Fermi-Hubbard MPO on `n` sites.
pub fn fh_bound(n: usize) -> f64 {
    let h = n as f64 / 2.0;
    2.0 * h * h + 3.0 * h + 4.0
}

/// Analytic bond-dimension bound for the transcorrelated Fermi-Hubbard MPO.
pub fn tc_bound(n: usize) -> f64 {
    let h = n as f64 / 2.0;
    4.0 * h * h + 3.0 * h + 2.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fermion::{dense_operator, number, LadderOp, Spin};
    use crate::hamiltonian::{assemble, hubbard, number_penalty, tc_hubbard, ModelParams};
    use crate::lattice::OrderingKind;
    use crate::mpo::oracle::{dense_unfolding_ranks, unfolding_ranks};
    use proptest::prelude::*;

    fn params(j: f64) -> ModelParams {
        ModelParams {
            t: 1.0,
            u: 4.0,
            j,
            n_alpha: 2,
            n_beta: 1,
            penalty_lambda: 3.0,
        }
    }

    fn max_diff(a: &DenseTensor, b: &DenseTensor) -> f64 {
        a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    fn check_exact(op: &SopOperator) {
        let built = build_mpo(op, op.lattice()).unwrap();
        let d = max_diff(&built.numeric.to_dense(), &dense_operator(op));
        assert!(d < 1e-10, "dense mismatch {d}");
    }

    fn small_lattices() -> Vec<Lattice> {
        vec![
            Lattice::chain(2).unwrap(),
            Lattice::chain(3).unwrap(),
            Lattice::new(2, 2, true, OrderingKind::Snake).unwrap(),
            Lattice::new(2, 2, false, OrderingKind::RowMajor).unwrap(),
        ]
    }

    #[test]
    fn single_on_site_term_has_unit_bonds() {
        let lat = Lattice::chain(4).unwrap();
        let mut op = SopOperator::new(lat.clone());
        op.push(0.7, number(0, Spin::Up));
        let b = build_mpo(&op, &lat).unwrap();
        assert_eq!(b.bond_profile, vec![1, 1, 1]);
        check_exact(&op);
    }

    #[test]
    fn empty_operator_is_zero_with_unit_bonds() {
        let lat = Lattice::chain(3).unwrap();
        let op = SopOperator::new(lat.clone());
        let b = build_mpo(&op, &lat).unwrap();
        assert_eq!(b.bond_profile, vec![1, 1]);
        assert!(b.numeric.to_dense().norm() == 0.0);
    }

    #[test]
    fn identity_mpo_stats() {
        let s = mpo_stats(&NumericMpo::identity(5));
        assert_eq!(s.max_bond, 1);
        assert_eq!(s.bonds, vec![1; 4]);
    }

    #[test]
    fn hamiltonians_are_exact() {
        for lat in small_lattices() {
            for j in [0.0, -0.1, 0.35] {
                check_exact(&hubbard(&lat, &params(j)));
                check_exact(&tc_hubbard(&lat, &params(j)));
                check_exact(&number_penalty(&lat, &params(j)));
                check_exact(&assemble(&lat, &params(j)));
            }
        }
    }

    #[test]
    fn bonds_match_dense_unfolding_on_four_sites() {
        for lat in small_lattices() {
            let op = assemble(&lat, &params(-0.1));
            let b = build_mpo(&op, &lat).unwrap();
            let want = dense_unfolding_ranks(&op).unwrap();
            assert_eq!(b.bond_profile, want);
            assert_eq!(unfolding_ranks(&op).unwrap(), want);
        }
    }

    #[test]
    fn rank_optimal_up_to_six_sites() {
        let lattices = [
            Lattice::chain(5).unwrap(),
            Lattice::chain(6).unwrap(),
            Lattice::new(2, 3, true, OrderingKind::Snake).unwrap(),
            Lattice::new(2, 3, false, OrderingKind::RowMajor).unwrap(),
        ];
        for lat in &lattices {
            for j in [0.0, -0.1, -0.3] {
                let p = params(j);
                for (name, op) in [
                    ("hubbard", hubbard(lat, &p)),
                    ("tc", tc_hubbard(lat, &p)),
                    ("penalty", number_penalty(lat, &p)),
                    ("assembled", assemble(lat, &p)),
                ] {
                    let b = build_mpo(&op, lat).unwrap();
                    let r = unfolding_ranks(&op).unwrap();
                    assert_eq!(b.bond_profile, r, "{name} J={j} on {}x{}", lat.lx(), lat.ly());
                }
            }
        }
    }

    #[test]
    fn deterministic() {
        let lat = Lattice::new(2, 3, true, OrderingKind::Snake).unwrap();
        let op = assemble(&lat, &params(-0.2));
        let a = build_mpo(&op, &lat).unwrap();
        let b = build_mpo(&op, &lat).unwrap();
        assert_eq!(a.symbolic, b.symbolic);
        assert_eq!(a.numeric, b.numeric);
    }

    #[test]
    fn analytic_bounds_hold() {
        let lat = Lattice::new(3, 3, true, OrderingKind::Snake).unwrap();
        let p = ModelParams::hubbard(1.0, 8.0, 4, 4).with_j(-0.1);
        let fh = mpo_stats(&build_mpo(&hubbard(&lat, &p), &lat).unwrap().numeric);
        let tc = mpo_stats(&build_mpo(&tc_hubbard(&lat, &p), &lat).unwrap().numeric);
        assert!(fh.max_bond as f64 <= fh_bound(9), "{}", fh.max_bond);
        assert!(tc.max_bond as f64 <= tc_bound(9), "{}", tc.max_bond);
        assert!(tc.max_bond <= 2 * fh.max_bond + 4, "{} vs {}", tc.max_bond, fh.max_bond);
    }

    fn arb_term(n: usize, even: bool) -> impl Strategy<Value = (f64, Vec<LadderOp>)> {
        let op = (0..n, any::<bool>(), any::<bool>()).prop_map(|(s, up, dg)| LadderOp {
            site: s,
            spin: if up { Spin::Up } else { Spin::Down },
            dagger: dg,
        });
        (-2.0f64..2.0, prop::collection::vec(op, 0..=4)).prop_map(move |(c, mut ops)| {
            if even && ops.len() % 2 == 1 {
                ops.pop();
            }
            (c, ops)
        })
    }

    fn build_op(lat: &Lattice, terms: Vec<(f64, Vec<LadderOp>)>) -> SopOperator {
        let mut op = SopOperator::new(lat.clone());
        for (c, ops) in terms {
            op.push(c, ops);
        }
        op.canonicalize()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]
        #[test]
        fn random_operators_are_exact(
            n in 2usize..=4,
            terms in prop::collection::vec(arb_term(4, false), 1..12),
        ) {
            let lat = Lattice::chain(n).unwrap();
            let terms = terms.into_iter().map(|(c, ops)| {
                (c, ops.into_iter().map(|mut o| { o.site %= n; o }).collect())
            }).collect();
            let op = build_op(&lat, terms);
            let b = build_mpo(&op, &lat).unwrap();
            prop_assert!(max_diff(&b.numeric.to_dense(), &dense_operator(&op)) < 1e-10);
        }

        // Arbitrary words can put linearly dependent factors on one site
        // (a a† next to 1 and a†a), where the cover counts the support of the
        // coefficient matrix and not its rank. Only the lower bound holds.
        #[test]
        fn random_even_operators_bound_the_rank(
            terms in prop::collection::vec(arb_term(5, true), 1..16),
        ) {
            let lat = Lattice::chain(5).unwrap();
            let op = build_op(&lat, terms);
            let b = build_mpo(&op, &lat).unwrap();
            let r = unfolding_ranks(&op).unwrap();
            for (bond, rank) in b.bond_profile.iter().zip(&r) {
                prop_assert!(bond >= rank, "{:?} vs {:?}", b.bond_profile, r);
            }
        }

        #[test]
        fn random_model_operators_are_rank_optimal(
            hops in prop::collection::vec((0usize..5, 0usize..5, -2.0f64..2.0), 0..8),
            onsite in prop::collection::vec(-2.0f64..2.0, 5),
            dressed in prop::collection::vec((0usize..5, 0usize..5, any::<bool>(), 0usize..2, -2.0f64..2.0), 0..8),
        ) {
            let lat = Lattice::chain(5).unwrap();
            let mut op = SopOperator::new(lat.clone());
            for &(i, j, c) in &hops {
                for s in [Spin::Up, Spin::Down] {
                    op.push(c, vec![LadderOp::create(i, s), LadderOp::annihilate(j, s)]);
                }
            }
            for (i, &u) in onsite.iter().enumerate() {
                let [a, b] = number(i, Spin::Up);
                let [c, d] = number(i, Spin::Down);
                op.push(u, vec![a, b, c, d]);
            }
            // Hops dressed by opposite-spin densities, as in the transcorrelated terms.
            for &(i, j, up, k, c) in &dressed {
                let (s, o) = if up { (Spin::Up, Spin::Down) } else { (Spin::Down, Spin::Up) };
                let mut w = vec![LadderOp::create(i, s), LadderOp::annihilate(j, s)];
                w.extend(number(j, o));
                if k == 1 {
                    w.extend(number(i, o));
                }
                op.push(c, w);
            }
            let op = op.canonicalize();
            let b = build_mpo(&op, &lat).unwrap();
            let r = unfolding_ranks(&op).unwrap();
            if op.is_empty() {
                prop_assert_eq!(b.bond_profile, vec![1; 4]);
            } else {
                prop_assert_eq!(b.bond_profile, r);
            }
        }
    }
}
