//! Dense real tensors and the small set of linear-algebra kernels the rest of
//! the crate is built on.
//!
//! Everything is stored row-major in `f64`. Complex numbers only show up as the
//! output of [`eig_general`], whose input is real but generally nonsymmetric.
//! Matrix products, the SVD and the nonsymmetric eigensolver are delegated to
//! `faer`; all calls run sequentially so results are bit-reproducible.

use faer::linalg::matmul::matmul;
use faer::{Accum, MatMut, MatRef, Par};
use thiserror::Error;

pub use faer::c64;

/// Relative threshold below which singular values count as numerical zeros.
pub const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite entries passed to {0}")]
    NonFinite(&'static str),
    #[error("eigensolver failure: {0}")]
    Eigen(String),
}

pub type Result<T> = std::result::Result<T, NumericsError>;

/// A dense, row-major tensor of `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl DenseTensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(NumericsError::Dimension(format!(
                "shape {shape:?} needs {expected} entries, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![0.0; n],
        }
    }

    pub fn from_fn(shape: Vec<usize>, mut f: impl FnMut(&[usize]) -> f64) -> Self {
        let n: usize = shape.iter().product();
        let mut data = Vec::with_capacity(n);
        let mut idx = vec![0usize; shape.len()];
        for _ in 0..n {
            data.push(f(&idx));
            for ax in (0..shape.len()).rev() {
                idx[ax] += 1;
                if idx[ax] < shape[ax] {
                    break;
                }
                idx[ax] = 0;
            }
        }
        Self { shape, data }
    }

    /// Rank-0 tensor holding a single value.
    pub fn scalar(value: f64) -> Self {
        Self {
            shape: vec![],
            data: vec![value],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(vec![n, n], |i| if i[0] == i[1] { 1.0 } else { 0.0 })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
    }

    fn strides(&self) -> Vec<usize> {
        strides_of(&self.shape)
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        let off: usize = index.iter().zip(self.strides()).map(|(i, s)| i * s).sum();
        self.data[off]
    }

    pub fn set(&mut self, index: &[usize], value: f64) {
        let off: usize = index.iter().zip(self.strides()).map(|(i, s)| i * s).sum();
        self.data[off] = value;
    }

    pub fn reshape(mut self, shape: Vec<usize>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != self.data.len() {
            return Err(NumericsError::Dimension(format!(
                "cannot reshape {:?} into {shape:?}",
                self.shape
            )));
        }
        self.shape = shape;
        Ok(self)
    }

    /// Reorders axes so that axis `k` of the result is axis `axes[k]` of `self`.
    pub fn permute(&self, axes: &[usize]) -> Result<Self> {
        let nd = self.ndim();
        let mut seen = vec![false; nd];
        if axes.len() != nd || axes.iter().any(|&a| a >= nd || std::mem::replace(&mut seen[a], true)) {
            return Err(NumericsError::Dimension(format!(
                "{axes:?} is not a permutation of {nd} axes"
            )));
        }
        if axes.iter().enumerate().all(|(k, &a)| k == a) {
            return Ok(self.clone());
        }
        let old_strides = self.strides();
        let new_shape: Vec<usize> = axes.iter().map(|&a| self.shape[a]).collect();
        let src_strides: Vec<usize> = axes.iter().map(|&a| old_strides[a]).collect();
        let n = self.data.len();
        let mut data = Vec::with_capacity(n);
        let mut idx = vec![0usize; nd];
        let mut off = 0usize;
        for _ in 0..n {
            data.push(self.data[off]);
            for ax in (0..nd).rev() {
                idx[ax] += 1;
                off += src_strides[ax];
                if idx[ax] < new_shape[ax] {
                    break;
                }
                off -= src_strides[ax] * new_shape[ax];
                idx[ax] = 0;
            }
        }
        Ok(Self {
            shape: new_shape,
            data,
        })
    }

    pub fn norm(&self) -> f64 {
        norm(&self.data)
    }

    pub fn scale(&mut self, factor: f64) {
        self.data.iter_mut().for_each(|x| *x *= factor);
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Views a rank-2 tensor as a matrix.
    pub fn as_mat(&self) -> Result<MatRef<'_, f64>> {
        if self.ndim() != 2 {
            return Err(NumericsError::Dimension(format!(
                "expected a matrix, got shape {:?}",
                self.shape
            )));
        }
        Ok(MatRef::from_row_major_slice(
            &self.data,
            self.shape[0],
            self.shape[1],
        ))
    }

    pub fn from_mat(m: MatRef<'_, f64>) -> Self {
        let (r, c) = (m.nrows(), m.ncols());
        let mut data = Vec::with_capacity(r * c);
        for i in 0..r {
            for j in 0..c {
                data.push(m[(i, j)]);
            }
        }
        Self {
            shape: vec![r, c],
            data,
        }
    }

    /// Matrix product of two rank-2 tensors.
    pub fn matmul(&self, other: &DenseTensor) -> Result<DenseTensor> {
        contract(self, other, &[(1, 0)])
    }

    pub fn transpose(&self) -> Result<DenseTensor> {
        if self.ndim() != 2 {
            return Err(NumericsError::Dimension("transpose needs a matrix".into()));
        }
        self.permute(&[1, 0])
    }
}

pub(crate) fn strides_of(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1usize; shape.len()];
    for k in (0..shape.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * shape[k + 1];
    }
    s
}

/// Row-major matrix view over a slice.
pub fn mat_ref(data: &[f64], rows: usize, cols: usize) -> MatRef<'_, f64> {
    MatRef::from_row_major_slice(data, rows, cols)
}

/// Mutable row-major matrix view over a slice.
pub fn mat_mut(data: &mut [f64], rows: usize, cols: usize) -> MatMut<'_, f64> {
    MatMut::from_row_major_slice_mut(data, rows, cols)
}

/// `out = lhs * rhs` (or `out += lhs * rhs` when `accumulate`).
pub fn gemm(out: MatMut<'_, f64>, lhs: MatRef<'_, f64>, rhs: MatRef<'_, f64>, accumulate: bool) {
    let accum = if accumulate { Accum::Add } else { Accum::Replace };
    matmul(out, accum, lhs, rhs, 1.0, Par::Seq);
}

/// Contracts `a` and `b` over the listed `(axis of a, axis of b)` pairs.
///
/// The result carries the free axes of `a` followed by the free axes of `b`,
/// each in their original order.
pub fn contract(a: &DenseTensor, b: &DenseTensor, pairs: &[(usize, usize)]) -> Result<DenseTensor> {
    let (na, nb) = (a.ndim(), b.ndim());
    let mut a_used = vec![false; na];
    let mut b_used = vec![false; nb];
    for &(ia, ib) in pairs {
        if ia >= na || ib >= nb {
            return Err(NumericsError::Dimension(format!(
                "axis pair ({ia},{ib}) out of range for ranks {na} and {nb}"
            )));
        }
        if a_used[ia] || b_used[ib] {
            return Err(NumericsError::Dimension(format!("axis pair ({ia},{ib}) repeats an axis")));
        }
        if a.shape[ia] != b.shape[ib] {
            return Err(NumericsError::Dimension(format!(
                "extent {} of axis {ia} does not match extent {} of axis {ib}",
                a.shape[ia], b.shape[ib]
            )));
        }
        a_used[ia] = true;
        b_used[ib] = true;
    }
    let a_free: Vec<usize> = (0..na).filter(|&k| !a_used[k]).collect();
    let b_free: Vec<usize> = (0..nb).filter(|&k| !b_used[k]).collect();

    let a_perm: Vec<usize> = a_free.iter().copied().chain(pairs.iter().map(|p| p.0)).collect();
    let b_perm: Vec<usize> = pairs.iter().map(|p| p.1).chain(b_free.iter().copied()).collect();
    let ap = a.permute(&a_perm)?;
    let bp = b.permute(&b_perm)?;

    let m: usize = a_free.iter().map(|&k| a.shape[k]).product();
    let k: usize = pairs.iter().map(|p| a.shape[p.0]).product();
    let n: usize = b_free.iter().map(|&k| b.shape[k]).product();

    let mut out = vec![0.0; m * n];
    if m > 0 && n > 0 {
        gemm(
            mat_mut(&mut out, m, n),
            mat_ref(&ap.data, m, k),
            mat_ref(&bp.data, k, n),
            false,
        );
    }
    let shape = a_free
        .iter()
        .map(|&k| a.shape[k])
        .chain(b_free.iter().map(|&k| b.shape[k]))
        .collect();
    DenseTensor::new(shape, out)
}

/// Thin singular value decomposition `A = U diag(S) Vt`.
#[derive(Clone, Debug)]
pub struct SvdResult {
    pub u: DenseTensor,
    pub s: Vec<f64>,
    pub vt: DenseTensor,
}

impl SvdResult {
    /// Number of singular values above `RANK_TOL * S[0]`.
    pub fn rank(&self) -> usize {
        numerical_rank(&self.s)
    }
}

pub fn numerical_rank(s: &[f64]) -> usize {
    match s.first() {
        Some(&s0) if s0 > 0.0 => s.iter().filter(|&&x| x > RANK_TOL * s0).count(),
        _ => 0,
    }
}

pub fn svd(a: &DenseTensor) -> Result<SvdResult> {
    let m = a.as_mat()?;
    if !a.is_finite() {
        return Err(NumericsError::NonFinite("svd"));
    }
    let (rows, cols) = (m.nrows(), m.ncols());
    let k = rows.min(cols);
    if k == 0 {
        return Ok(SvdResult {
            u: DenseTensor::zeros(vec![rows, 0]),
            s: vec![],
            vt: DenseTensor::zeros(vec![0, cols]),
        });
    }
    let dec = m
        .thin_svd()
        .map_err(|e| NumericsError::Eigen(format!("svd did not converge: {e:?}")))?;
    let u = DenseTensor::from_mat(dec.U());
    let s: Vec<f64> = dec.S().column_vector().iter().copied().collect();
    let vt = DenseTensor::from_mat(dec.V().transpose());
    Ok(SvdResult { u, s, vt })
}

/// Thin QR decomposition of a matrix, returned as `(Q, R)`.
pub fn qr(a: &DenseTensor) -> Result<(DenseTensor, DenseTensor)> {
    let m = a.as_mat()?;
    if !a.is_finite() {
        return Err(NumericsError::NonFinite("qr"));
    }
    let dec = m.qr();
    let q = DenseTensor::from_mat(dec.compute_thin_Q().as_ref());
    let r = DenseTensor::from_mat(dec.thin_R());
    Ok((q, r))
}

/// One right eigenpair of a real square matrix.
#[derive(Clone, Debug)]
pub struct EigenPair {
    pub value: c64,
    pub vector: Vec<c64>,
}

/// Maximum dimension accepted by [`eig_general_small`].
pub const SMALL_EIG_MAX_DIM: usize = 64;

/// Right eigenpairs of a small, generally nonsymmetric matrix, sorted by
/// ascending real part (then imaginary part).
pub fn eig_general_small(a: &DenseTensor) -> Result<Vec<EigenPair>> {
    let n = a.shape().first().copied().unwrap_or(0);
    if n > SMALL_EIG_MAX_DIM {
        return Err(NumericsError::Dimension(format!(
            "eig_general_small accepts dimension <= {SMALL_EIG_MAX_DIM}, got {n}"
        )));
    }
    eig_general(a)
}

/// Same as [`eig_general_small`] without the size limit.
pub fn eig_general(a: &DenseTensor) -> Result<Vec<EigenPair>> {
    let m = a.as_mat()?;
    let n = m.nrows();
    if m.ncols() != n {
        return Err(NumericsError::Dimension(format!(
            "eigendecomposition needs a square matrix, got {n}x{}",
            m.ncols()
        )));
    }
    if !a.is_finite() {
        return Err(NumericsError::NonFinite("eig_general"));
    }
    if n == 0 {
        return Ok(vec![]);
    }
    let dec = m
        .eigen()
        .map_err(|e| NumericsError::Eigen(format!("nonsymmetric eigensolver did not converge: {e:?}")))?;
    let values = dec.S().column_vector();
    let vectors = dec.U();
    let mut pairs: Vec<EigenPair> = (0..n)
        .map(|k| EigenPair {
            value: values[k],
            vector: (0..n).map(|i| vectors[(i, k)]).collect(),
        })
        .collect();
    pairs.sort_by(|x, y| {
        x.value
            .re
            .total_cmp(&y.value.re)
            .then(x.value.im.total_cmp(&y.value.im))
    });
    Ok(pairs)
}

/// Eigenvalues only, sorted by ascending real part.
pub fn eigenvalues_general(a: &DenseTensor) -> Result<Vec<c64>> {
    let m = a.as_mat()?;
    if m.nrows() != m.ncols() {
        return Err(NumericsError::Dimension("eigenvalues need a square matrix".into()));
    }
    if !a.is_finite() {
        return Err(NumericsError::NonFinite("eigenvalues_general"));
    }
    if m.nrows() == 0 {
        return Ok(vec![]);
    }
    let mut vals = m
        .eigenvalues()
        .map_err(|e| NumericsError::Eigen(format!("{e:?}")))?;
    vals.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
    Ok(vals)
}

/// Eigenvalues of a real symmetric matrix, ascending.
pub fn eigenvalues_symmetric(a: &DenseTensor) -> Result<Vec<f64>> {
    let m = a.as_mat()?;
    if m.nrows() != m.ncols() {
        return Err(NumericsError::Dimension("eigenvalues need a square matrix".into()));
    }
    if m.nrows() == 0 {
        return Ok(vec![]);
    }
    m.self_adjoint_eigenvalues(faer::Side::Lower)
        .map_err(|e| NumericsError::Eigen(format!("{e:?}")))
}

/// Modified Gram-Schmidt with one reorthogonalization pass.
///
/// Vectors whose norm after projection falls below `1e-12` are dropped.
pub fn qr_orthonormalize(vectors: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(vectors.len());
    for v in vectors {
        let mut w = v.clone();
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &w);
                axpy(-c, q, &mut w);
            }
        }
        let nrm = norm(&w);
        if nrm < 1e-12 {
            continue;
        }
        w.iter_mut().for_each(|x| *x /= nrm);
        basis.push(w);
    }
    basis
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(shape: Vec<usize>, rng: &mut ChaCha8Rng) -> DenseTensor {
        DenseTensor::from_fn(shape, |_| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn matrix_product_and_identity() {
        let a = DenseTensor::new(vec![2, 3], vec![1., 2., 3., 4., 5., 6.]).unwrap();
        let b = DenseTensor::new(vec![3, 2], vec![7., 8., 9., 10., 11., 12.]).unwrap();
        let c = contract(&a, &b, &[(1, 0)]).unwrap();
        assert_eq!(c.shape(), &[2, 2]);
        assert_eq!(c.data(), &[58., 64., 139., 154.]);

        let v = DenseTensor::new(vec![3], vec![0.5, -2.0, 7.0]).unwrap();
        let iv = contract(&DenseTensor::identity(3), &v, &[(1, 0)]).unwrap();
        assert_eq!(iv.data(), v.data());
    }

    #[test]
    fn contraction_matches_index_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = random(vec![2, 2, 2], &mut rng);
        // result[i, z] = sum_{j,k} t[i,j,k] t[j,k,z]
        let c = contract(&t, &t, &[(1, 0), (2, 1)]).unwrap();
        assert_eq!(c.shape(), &[2, 2]);
        for i in 0..2 {
            for z in 0..2 {
                let mut s = 0.0;
                for j in 0..2 {
                    for k in 0..2 {
                        s += t.get(&[i, j, k]) * t.get(&[j, k, z]);
                    }
                }
                assert!((c.get(&[i, z]) - s).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn contraction_rejects_mismatched_extents() {
        let a = DenseTensor::zeros(vec![2, 3]);
        let b = DenseTensor::zeros(vec![2, 2]);
        assert!(matches!(
            contract(&a, &b, &[(1, 0)]),
            Err(NumericsError::Dimension(_))
        ));
    }

    #[test]
    fn permute_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let t = random(vec![2, 3, 4], &mut rng);
        let p = t.permute(&[2, 0, 1]).unwrap();
        assert_eq!(p.shape(), &[4, 2, 3]);
        assert_eq!(p.get(&[3, 1, 2]), t.get(&[1, 2, 3]));
        let back = p.permute(&[1, 2, 0]).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn svd_small_cases() {
        let d = DenseTensor::new(vec![2, 2], vec![3., 0., 0., 1.]).unwrap();
        let r = svd(&d).unwrap();
        assert!((r.s[0] - 3.0).abs() < 1e-14 && (r.s[1] - 1.0).abs() < 1e-14);

        let z = DenseTensor::zeros(vec![3, 2]);
        let r = svd(&z).unwrap();
        assert!(r.s.iter().all(|&x| x == 0.0));
        assert_eq!(r.rank(), 0);

        let bad = DenseTensor::new(vec![1, 2], vec![f64::NAN, 1.0]).unwrap();
        assert!(matches!(svd(&bad), Err(NumericsError::NonFinite(_))));
    }

    #[test]
    fn svd_singular_values_square_to_gram_eigenvalues() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let a = random(vec![4, 3], &mut rng);
        let r = svd(&a).unwrap();
        let us = DenseTensor::from_fn(vec![4, 3], |i| r.u.get(i) * r.s[i[1]]);
        let rec = us.matmul(&r.vt).unwrap();
        let err: f64 = rec
            .data()
            .iter()
            .zip(a.data())
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(err <= 1e-10 * a.norm());

        // AᵀA eigenvalues, independent of the SVD path.
        let gram = a.transpose().unwrap().matmul(&a).unwrap();
        let mut ev = eigenvalues_symmetric(&gram).unwrap();
        ev.reverse();
        for (s, l) in r.s.iter().zip(ev) {
            assert!((s * s - l).abs() < 1e-12);
        }
    }

    #[test]
    fn eig_small_examples() {
        let d = DenseTensor::from_fn(vec![3, 3], |i| {
            if i[0] == i[1] {
                [2.0, -1.0, 5.0][i[0]]
            } else {
                0.0
            }
        });
        let vals: Vec<f64> = eig_general_small(&d).unwrap().iter().map(|p| p.value.re).collect();
        assert_eq!(vals, vec![-1.0, 2.0, 5.0]);

        let rot = DenseTensor::new(vec![2, 2], vec![0., 1., -1., 0.]).unwrap();
        let p = eig_general_small(&rot).unwrap();
        assert!(p[0].value.re.abs() < 1e-14 && p[1].value.re.abs() < 1e-14);
        let mut ims: Vec<f64> = p.iter().map(|x| x.value.im).collect();
        ims.sort_by(f64::total_cmp);
        assert!((ims[0] + 1.0).abs() < 1e-14 && (ims[1] - 1.0).abs() < 1e-14);

        // companion matrix of x^3 - 6x^2 + 11x - 6 = (x-1)(x-2)(x-3)
        let comp = DenseTensor::new(vec![3, 3], vec![6., -11., 6., 1., 0., 0., 0., 1., 0.]).unwrap();
        let p = eig_general_small(&comp).unwrap();
        for (pair, want) in p.iter().zip([1.0, 2.0, 3.0]) {
            assert!((pair.value.re - want).abs() < 1e-10 && pair.value.im.abs() < 1e-10);
        }
    }

    #[test]
    fn eig_rejects_large_input() {
        let a = DenseTensor::identity(65);
        assert!(matches!(eig_general_small(&a), Err(NumericsError::Dimension(_))));
    }

    #[test]
    fn orthonormalize_examples() {
        let q = qr_orthonormalize(&[vec![1.0, 0.0], vec![0.0, 2.0]]);
        assert_eq!(q, vec![vec![1.0, 0.0], vec![0.0, 1.0]]);

        let q = qr_orthonormalize(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        assert_eq!(q.len(), 1);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((q[0][0] - h).abs() < 1e-15 && (q[0][1] - h).abs() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let vs: Vec<Vec<f64>> = (0..3).map(|_| (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let q = qr_orthonormalize(&vs);
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot(&q[i], &q[j]) - want).abs() < 1e-12);
            }
        }
    }

    /// `det(M)` by cofactor expansion along the first row.
    fn laplace_det(m: &[Vec<c64>]) -> c64 {
        let n = m.len();
        if n == 0 {
            return c64::new(1.0, 0.0);
        }
        let mut total = c64::new(0.0, 0.0);
        for j in 0..n {
            let minor: Vec<Vec<c64>> = m[1..]
                .iter()
                .map(|row| row.iter().enumerate().filter(|&(k, _)| k != j).map(|(_, &x)| x).collect())
                .collect();
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            total += m[0][j] * laplace_det(&minor) * sign;
        }
        total
    }

    fn square_with_seed(n: usize, seed: u64) -> DenseTensor {
        random(vec![n, n], &mut ChaCha8Rng::seed_from_u64(seed))
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn contract_is_bilinear(
                (i, j, k) in (1usize..5, 1usize..5, 1usize..5),
                alpha in -3.0f64..3.0,
                seed in any::<u64>(),
            ) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let a = random(vec![i, j, k], &mut rng);
                let a2 = random(vec![i, j, k], &mut rng);
                let b = random(vec![k, j, 3], &mut rng);
                let pairs = [(1, 1), (2, 0)];
                let base = contract(&a, &b, &pairs).unwrap();

                let mut scaled = a.clone();
                scaled.scale(alpha);
                let lhs = contract(&scaled, &b, &pairs).unwrap();
                for (x, y) in lhs.data().iter().zip(base.data()) {
                    prop_assert!((x - alpha * y).abs() <= 1e-12 * (1.0 + y.abs()));
                }

                let sum = DenseTensor::new(
                    a.shape().to_vec(),
                    a.data().iter().zip(a2.data()).map(|(x, y)| x + y).collect(),
                ).unwrap();
                let lhs = contract(&sum, &b, &pairs).unwrap();
                let other = contract(&a2, &b, &pairs).unwrap();
                for ((x, y), z) in lhs.data().iter().zip(base.data()).zip(other.data()) {
                    prop_assert!((x - y - z).abs() <= 1e-12 * (1.0 + y.abs() + z.abs()));
                }
            }
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(200))]
            #[test]
            fn svd_reconstructs(rows in 1usize..=64, cols in 1usize..=64, seed in any::<u64>()) {
                let a = random(vec![rows, cols], &mut ChaCha8Rng::seed_from_u64(seed));
                let r = svd(&a).unwrap();
                let k = rows.min(cols);
                prop_assert_eq!(r.s.len(), k);
                prop_assert!(r.s.iter().all(|&x| x >= 0.0));
                prop_assert!(r.s.windows(2).all(|w| w[0] >= w[1]));
                let us = DenseTensor::from_fn(vec![rows, k], |ix| r.u.get(ix) * r.s[ix[1]]);
                let rec = us.matmul(&r.vt).unwrap();
                let err = rec.data().iter().zip(a.data()).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
                prop_assert!(err <= 1e-10 * a.norm(), "error {err}");
            }
        }

        proptest! {
            #[test]
            fn eig_matches_characteristic_polynomial(n in 1usize..=5, seed in any::<u64>()) {
                let a = square_with_seed(n, seed);
                let pairs = eig_general_small(&a).unwrap();
                prop_assert_eq!(pairs.len(), n);
                prop_assert!(pairs.windows(2).all(|w| w[0].value.re <= w[1].value.re));

                // det(zI - A) and Π(z - λ) agree at n + 1 distinct points, so
                // the eigenvalues are exactly the polynomial's roots.
                for p in 0..=n {
                    let z = c64::new(0.7 * p as f64 - 1.3, 0.4 + 0.3 * p as f64);
                    let m: Vec<Vec<c64>> = (0..n)
                        .map(|i| (0..n).map(|j| {
                            let d = if i == j { z } else { c64::new(0.0, 0.0) };
                            d - c64::new(a.get(&[i, j]), 0.0)
                        }).collect())
                        .collect();
                    let det = laplace_det(&m);
                    let prod = pairs.iter().fold(c64::new(1.0, 0.0), |acc, q| acc * (z - q.value));
                    prop_assert!((det - prod).norm() <= 1e-8 * (1.0 + det.norm()), "{det} vs {prod}");
                }

                let scale = a.norm();
                for q in &pairs {
                    let vn = q.vector.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
                    let mut res = 0.0;
                    for i in 0..n {
                        let av: c64 = (0..n).map(|j| q.vector[j] * a.get(&[i, j])).sum();
                        res += (av - q.value * q.vector[i]).norm_sqr();
                    }
                    prop_assert!(res.sqrt() <= 1e-9 * scale * vn);
                }
            }
        }
    }
}
