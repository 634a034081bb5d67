//! Matrix product states on the chain, their canonical forms and contractions
//! with matrix product operators.
//!
//! Site tensors have shape `(left bond, 4, right bond)`. Environments have
//! shape `(bra bond, mpo bond, ket bond)`.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::fermion::D;
use crate::lattice::Lattice;
use crate::mpo::NumericMpo;
use crate::numerics::{contract, gemm, mat_mut, mat_ref, qr, svd, DenseTensor, NumericsError};

#[derive(Debug, Error)]
pub enum MpsError {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("chain lengths differ: {0} and {1}")]
    Length(usize, usize),
    #[error("center {center} out of range for {n} sites")]
    Center { center: usize, n: usize },
    #[error("bad state file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, MpsError>;

#[derive(Debug, Clone, PartialEq)]
pub struct Mps {
    tensors: Vec<DenseTensor>,
    center: Option<usize>,
}

/// Entries of a freshly drawn tensor lie in `[-RANDOM_HALF_WIDTH, RANDOM_HALF_WIDTH]`.
const RANDOM_HALF_WIDTH: f64 = 0.5;

/// Random state with bonds `min(m, 4^k, 4^(N-k))`, right-canonical about
/// site 0 and normalized.
pub fn random_mps(lattice: &Lattice, m: usize, seed: u64) -> Mps {
    random_chain(lattice.n_sites(), m, seed)
}

pub fn random_chain(n: usize, m: usize, seed: u64) -> Mps {
    assert!(m >= 1, "bond dimension must be at least 1");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bonds = capped_bonds(n, m);
    let tensors = (0..n)
        .map(|k| {
            DenseTensor::from_fn(vec![bonds[k], D, bonds[k + 1]], |_| {
                rng.gen_range(-RANDOM_HALF_WIDTH..=RANDOM_HALF_WIDTH)
            })
        })
        .collect();
    let mut mps = Mps { tensors, center: None };
    mps = mps.canonicalize(0).expect("random tensors are finite");
    let nrm = mps.tensors[0].norm();
    mps.tensors[0].scale(1.0 / nrm);
    mps
}

/// Bond extents `0..=n` including the two boundary bonds of extent 1.
fn capped_bonds(n: usize, m: usize) -> Vec<usize> {
    (0..=n)
        .map(|k| {
            let edge = k.min(n - k).min(16) as u32;
            m.min(D.saturating_pow(edge))
        })
        .collect()
}

/// Product state from one local basis index per site.
pub fn product_state(occupations: &[usize]) -> Mps {
    let tensors = occupations
        .iter()
        .map(|&s| {
            assert!(s < D, "local state {s} out of range");
            DenseTensor::from_fn(vec![1, D, 1], |i| if i[1] == s { 1.0 } else { 0.0 })
        })
        .collect();
    Mps { tensors, center: None }
}

impl Mps {
    pub fn from_tensors(tensors: Vec<DenseTensor>) -> Result<Self> {
        if tensors.is_empty() {
            return Err(MpsError::Format("no sites".into()));
        }
        for (k, t) in tensors.iter().enumerate() {
            if t.ndim() != 3 || t.shape()[1] != D {
                return Err(NumericsError::Dimension(format!("site {k} has shape {:?}", t.shape())).into());
            }
            if k + 1 < tensors.len() && t.shape()[2] != tensors[k + 1].shape()[0] {
                return Err(NumericsError::Dimension(format!("bond after site {k} does not match")).into());
            }
        }
        if tensors[0].shape()[0] != 1 || tensors[tensors.len() - 1].shape()[2] != 1 {
            return Err(NumericsError::Dimension("boundary bonds must have extent 1".into()).into());
        }
        Ok(Self { tensors, center: None })
    }

    pub fn n_sites(&self) -> usize {
        self.tensors.len()
    }

    pub fn tensors(&self) -> &[DenseTensor] {
        &self.tensors
    }

    pub fn site(&self, k: usize) -> &DenseTensor {
        &self.tensors[k]
    }

    pub fn center(&self) -> Option<usize> {
        self.center
    }

    /// Extents of the `N - 1` internal bonds.
    pub fn bond_dims(&self) -> Vec<usize> {
        self.tensors[..self.tensors.len() - 1].iter().map(|t| t.shape()[2]).collect()
    }

    pub fn max_bond(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    /// Replaces sites `k` and `k + 1` and moves the center. Used by the
    /// sweep, which maintains the gauge itself.
    pub(crate) fn set_pair(&mut self, k: usize, a: DenseTensor, b: DenseTensor, center: usize) {
        self.tensors[k] = a;
        self.tensors[k + 1] = b;
        self.center = Some(center);
    }

    /// Same state, left-orthogonal before `center` and right-orthogonal after.
    pub fn canonicalize(&self, center: usize) -> Result<Mps> {
        let n = self.n_sites();
        if center >= n {
            return Err(MpsError::Center { center, n });
        }
        let mut t = self.tensors.clone();
        for k in 0..center {
            let (q, r) = left_qr(&t[k])?;
            t[k] = q;
            t[k + 1] = contract(&r, &t[k + 1], &[(1, 0)])?;
        }
        for k in (center + 1..n).rev() {
            let (l, q) = right_lq(&t[k])?;
            t[k] = q;
            t[k - 1] = contract(&t[k - 1], &l, &[(2, 0)])?;
        }
        Ok(Mps { tensors: t, center: Some(center) })
    }

    pub fn norm(&self) -> f64 {
        match self.center {
            Some(c) => self.tensors[c].norm(),
            None => overlap(self, self).expect("same chain").max(0.0).sqrt(),
        }
    }

    /// Dense vector of length `4^N`, chain position 0 most significant.
    pub fn to_dense(&self) -> DenseTensor {
        let mut acc = DenseTensor::from_fn(vec![1, 1], |_| 1.0);
        for t in &self.tensors {
            let c = contract(&acc, t, &[(1, 0)]).expect("bond extents agree");
            let (dim, r) = (acc.shape()[0] * D, t.shape()[2]);
            acc = c.reshape(vec![dim, r]).expect("sizes agree");
        }
        let dim = acc.shape()[0];
        acc.reshape(vec![dim]).expect("right boundary is 1")
    }

    /// Keeps at most `m` states per bond by SVD, sweeping right to left from
    /// the left-canonical form. The result is not renormalized.
    pub fn compress(&self, m: usize) -> Result<Mps> {
        let n = self.n_sites();
        let mut t = self.canonicalize(n - 1)?.tensors;
        for k in (1..n).rev() {
            let (dl, dr) = (t[k].shape()[0], t[k].shape()[2]);
            let f = svd(&t[k].clone().reshape(vec![dl, D * dr])?)?;
            let keep = m.min(f.s.len()).max(1);
            let vt = DenseTensor::from_fn(vec![keep, D * dr], |i| f.vt.get(&[i[0], i[1]]));
            let us = DenseTensor::from_fn(vec![dl, keep], |i| f.u.get(&[i[0], i[1]]) * f.s[i[1]]);
            t[k] = vt.reshape(vec![keep, D, dr])?;
            t[k - 1] = contract(&t[k - 1], &us, &[(2, 0)])?;
        }
        Ok(Mps { tensors: t, center: Some(0) })
    }

    /// Writes the state as: magic `TCMPS\0\0\0`, `u32` version, `u32` site
    /// count, `i64` center (-1 for none), then per site three `u64` extents
    /// followed by the row-major entries as `f64`. Everything little-endian.
    pub fn save(&self, mut w: impl Write) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(self.n_sites() as u32).to_le_bytes())?;
        w.write_all(&self.center.map_or(-1, |c| c as i64).to_le_bytes())?;
        for t in &self.tensors {
            for &e in t.shape() {
                w.write_all(&(e as u64).to_le_bytes())?;
            }
            for x in t.data() {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn load(mut r: impl Read) -> Result<Mps> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(MpsError::Format("missing magic".into()));
        }
        let version = u32::from_le_bytes(read_array(&mut r)?);
        if version != FORMAT_VERSION {
            return Err(MpsError::Format(format!("unsupported version {version}")));
        }
        let n = u32::from_le_bytes(read_array(&mut r)?) as usize;
        let center = i64::from_le_bytes(read_array(&mut r)?);
        let mut tensors = Vec::with_capacity(n);
        for _ in 0..n {
            let mut shape = Vec::with_capacity(3);
            for _ in 0..3 {
                shape.push(u64::from_le_bytes(read_array(&mut r)?) as usize);
            }
            let len: usize = shape.iter().product();
            let mut data = Vec::with_capacity(len);
            for _ in 0..len {
                data.push(f64::from_le_bytes(read_array(&mut r)?));
            }
            tensors.push(DenseTensor::new(shape, data)?);
        }
        let mut mps = Mps::from_tensors(tensors)?;
        mps.center = match center {
            -1 => None,
            c if c >= 0 && (c as usize) < n => Some(c as usize),
            c => return Err(MpsError::Format(format!("center {c} out of range"))),
        };
        Ok(mps)
    }
}

const MAGIC: &[u8; 8] = b"TCMPS\0\0\0";
const FORMAT_VERSION: u32 = 1;

fn read_array<const N: usize>(r: &mut impl Read) -> std::io::Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)?;
    Ok(b)
}

/// `A = Q R` with `Q` left-orthogonal, shaped `(Dl, 4, k)`.
pub(crate) fn left_qr(a: &DenseTensor) -> Result<(DenseTensor, DenseTensor)> {
    let (dl, dr) = (a.shape()[0], a.shape()[2]);
    let (q, r) = qr(&a.clone().reshape(vec![dl * D, dr])?)?;
    let k = q.shape()[1];
    Ok((q.reshape(vec![dl, D, k])?, r))
}

/// `A = L Q` with `Q` right-orthogonal, shaped `(k, 4, Dr)`.
pub(crate) fn right_lq(a: &DenseTensor) -> Result<(DenseTensor, DenseTensor)> {
    let (dl, dr) = (a.shape()[0], a.shape()[2]);
    let at = a.clone().reshape(vec![dl, D * dr])?.transpose()?;
    let (q, r) = qr(&at)?;
    let k = q.shape()[1];
    Ok((r.transpose()?, q.transpose()?.reshape(vec![k, D, dr])?))
}

/// Boundary environment, the scalar 1 with shape `(1, 1, 1)`.
pub fn boundary_env() -> DenseTensor {
    DenseTensor::from_fn(vec![1, 1, 1], |_| 1.0)
}

/// Extends a left environment `(a, w, a')` over one site:
/// `E'[b, v, b'] = Σ A[a, s, b] W[w, s, t, v] A[a', t, b'] E[a, w, a']`.
pub fn extend_left(env: &DenseTensor, a: &DenseTensor, w: &DenseTensor) -> Result<DenseTensor> {
    let (da, dw) = (env.shape()[0], env.shape()[1]);
    let (dk, dr) = (a.shape()[0], a.shape()[2]);
    let v = w.shape()[3];
    // T[(a, w), (t, b')] = E[(a, w), a'] A[a', (t, b')]
    let mut tmp = vec![0.0; da * dw * D * dr];
    gemm(
        mat_mut(&mut tmp, da * dw, D * dr),
        mat_ref(env.data(), da * dw, dk),
        mat_ref(a.data(), dk, D * dr),
        false,
    );
    let t = DenseTensor::new(vec![da, dw, D, dr], tmp)?;
    // U[a, b', s, v] = Σ_{w,t} T[a, w, t, b'] W[w, s, t, v]
    let u = contract(&t, w, &[(1, 0), (2, 2)])?;
    // E'[b, v, b'] = Σ_{a,s} A[a, s, b] U[a, b', s, v]
    let e = contract(a, &u, &[(0, 0), (1, 2)])?;
    debug_assert_eq!(e.shape(), &[dr, dr, v]);
    Ok(e.permute(&[0, 2, 1])?)
}

/// Extends a right environment `(b, v, b')` over one site to the left.
pub fn extend_right(env: &DenseTensor, a: &DenseTensor, w: &DenseTensor) -> Result<DenseTensor> {
    let dl = a.shape()[0];
    // T[a', t, b, v] = Σ_{b'} A[a', t, b'] R[b, v, b']
    let t = contract(a, env, &[(2, 2)])?;
    // U[a', b, w, s] = Σ_{t,v} T[a', t, b, v] W[w, s, t, v]
    let u = contract(&t, w, &[(1, 2), (3, 3)])?;
    // R'[a, w, a'] = Σ_{s,b} A[a, s, b] U[a', b, w, s]
    let r = contract(a, &u, &[(1, 3), (2, 1)])?;
    debug_assert_eq!(r.shape()[0], dl);
    Ok(r.permute(&[0, 2, 1])?)
}

/// `⟨ψ|O|ψ⟩ / ⟨ψ|ψ⟩` by full contraction, with the operator applied as is.
pub fn expectation(mps: &Mps, mpo: &NumericMpo) -> Result<f64> {
    if mps.n_sites() != mpo.n_sites() {
        return Err(NumericsError::Dimension(format!(
            "state has {} sites, operator has {}",
            mps.n_sites(),
            mpo.n_sites()
        ))
        .into());
    }
    let mut env = boundary_env();
    for (a, w) in mps.tensors.iter().zip(mpo.tensors()) {
        if a.shape()[0] != env.shape()[0] || w.shape()[0] != env.shape()[1] {
            return Err(NumericsError::Dimension("operator bond does not match".into()).into());
        }
        env = extend_left(&env, a, w)?;
    }
    let num = env.data()[0];
    Ok(num / overlap(mps, mps)?)
}

/// `⟨a|b⟩`.
pub fn overlap(a: &Mps, b: &Mps) -> Result<f64> {
    if a.n_sites() != b.n_sites() {
        return Err(MpsError::Length(a.n_sites(), b.n_sites()));
    }
    let mut e = DenseTensor::from_fn(vec![1, 1], |_| 1.0);
    for (x, y) in a.tensors.iter().zip(&b.tensors) {
        // E'[b, b'] = Σ X[a, s, b] E[a, a'] Y[a', s, b']
        let t = contract(&e, y, &[(1, 0)])?;
        e = contract(x, &t, &[(0, 0), (1, 1)])?;
    }
    Ok(e.data()[0])
}
