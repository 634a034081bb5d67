//! Optimal bond dimensions of an operator, computed without building an MPO.
//!
//! Across the cut after chain position `p`, a sum of products
//! `Σ_t c_t ⊗_q F_tq` unfolds to the matrix `M = U diag(c) Vᵀ`, where column
//! `t` of `U` (of `V`) is the vectorized product of the factors left (right)
//! of the cut. The minimal bond dimension at the cut is `rank(M)`.
//!
//! `M` itself has `16^(p+1)` rows, so the rank is taken through the Gram
//! matrices instead: `UᵀU` and `VᵀV` are products of 4x4 Frobenius inner
//! products, and `rank(M) = rank(Λ_U^½ Q_Uᵀ diag(c) Q_V Λ_V^½)` over the
//! nonzero eigenpairs `(Λ, Q)` of the two Gram matrices.

use crate::fermion::{term_to_site_factors, LocalOp, Mat4, SopOperator, COEFF_TOL, D};
use crate::numerics::{contract, svd, DenseTensor, NumericsError};

/// Relative threshold for eigenvalues and singular values treated as zero.
const ORACLE_RANK_TOL: f64 = 1e-10;

fn frobenius(a: &Mat4, b: &Mat4) -> f64 {
    let mut s = 0.0;
    for i in 0..D {
        for j in 0..D {
            s += a[i][j] * b[i][j];
        }
    }
    s
}

fn per_site_factors(op: &SopOperator) -> Vec<(f64, Vec<Mat4>)> {
    let n = op.n_sites();
    let id = LocalOp::identity().matrix;
    op.terms()
        .iter()
        .filter(|t| t.coeff.abs() >= COEFF_TOL)
        .map(|t| {
            let f = term_to_site_factors(&t.ops, op.lattice());
            (t.coeff, (0..n).map(|q| f.get(&q).map_or(id, |x| x.matrix)).collect())
        })
        .collect()
}

/// `(Λ^½ Qᵀ)` restricted to the numerically nonzero part of a Gram matrix.
fn gram_root(g: &DenseTensor) -> Result<DenseTensor, NumericsError> {
    let t = g.shape()[0];
    let m = g.as_mat()?;
    let dec = m
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| NumericsError::Eigen(format!("{e:?}")))?;
    let vals: Vec<f64> = dec.S().column_vector().iter().copied().collect();
    let top = vals.iter().copied().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..t).filter(|&k| vals[k] > ORACLE_RANK_TOL * top).collect();
    let q = dec.U();
    Ok(DenseTensor::from_fn(vec![keep.len(), t], |ix| {
        let k = keep[ix[0]];
        vals[k].sqrt() * q[(ix[1], k)]
    }))
}

/// Minimal bond dimension at each of the `N - 1` cuts of `op`.
pub fn unfolding_ranks(op: &SopOperator) -> Result<Vec<usize>, NumericsError> {
    let n = op.n_sites();
    let terms = per_site_factors(op);
    let t = terms.len();
    if t == 0 {
        return Ok(vec![0; n.saturating_sub(1)]);
    }
    // Per-site Gram factors g[q][s][u] = <F_sq, F_uq>.
    let site_gram: Vec<Vec<f64>> = (0..n)
        .map(|q| {
            let mut g = vec![0.0; t * t];
            for s in 0..t {
                for u in s..t {
                    let v = frobenius(&terms[s].1[q], &terms[u].1[q]);
                    g[s * t + u] = v;
                    g[u * t + s] = v;
                }
            }
            g
        })
        .collect();
    let mut ranks = Vec::with_capacity(n - 1);
    for p in 0..n - 1 {
        let mut gl = vec![1.0; t * t];
        let mut gr = vec![1.0; t * t];
        for (q, g) in site_gram.iter().enumerate() {
            let target = if q <= p { &mut gl } else { &mut gr };
            target.iter_mut().zip(g).for_each(|(a, b)| *a *= b);
        }
        let ru = gram_root(&DenseTensor::new(vec![t, t], gl)?)?;
        let rv = gram_root(&DenseTensor::new(vec![t, t], gr)?)?;
        // core = ru · diag(c) · rvᵀ
        let mut rv_scaled = rv.clone();
        let cols = rv_scaled.shape()[1];
        for (k, x) in rv_scaled.data_mut().iter_mut().enumerate() {
            *x *= terms[k % cols].0;
        }
        let core = contract(&ru, &rv_scaled, &[(1, 1)])?;
        ranks.push(rank_of(&core)?);
    }
    Ok(ranks)
}

fn rank_of(m: &DenseTensor) -> Result<usize, NumericsError> {
    if m.is_empty() {
        return Ok(0);
    }
    let s = svd(m)?.s;
    let top = s.first().copied().unwrap_or(0.0);
    Ok(s.iter().filter(|&&x| x > ORACLE_RANK_TOL * top).count())
}

/// Same ranks from the explicit `16^(p+1) x 16^(N-p-1)` unfolding of the dense
/// operator. Only practical for very short chains.
pub fn dense_unfolding_ranks(op: &SopOperator) -> Result<Vec<usize>, NumericsError> {
    let n = op.n_sites();
    let full = crate::fermion::dense_operator(op);
    // Interleave (out_q, in_q) per site: (o0..o_{n-1}, i0..i_{n-1}) -> (o0,i0,o1,i1,...)
    let shape = vec![D; 2 * n];
    let t = full.reshape(shape)?;
    let perm: Vec<usize> = (0..n).flat_map(|q| [q, n + q]).collect();
    let t = t.permute(&perm)?;
    (0..n - 1)
        .map(|p| {
            let rows = (D * D).pow(p as u32 + 1);
            let m = t.clone().reshape(vec![rows, t.len() / rows])?;
            rank_of(&m)
        })
        .collect()
}
