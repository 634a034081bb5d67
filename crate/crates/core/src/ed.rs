//! Exact diagonalization in a fixed `(N↑, N↓)` sector.
//!
//! Determinants are bitmasks over `2L` modes ordered as all ↑ modes by site
//! index, then all ↓ modes. A ladder operator on mode `m` picks up
//! `(-1)^(occupied modes below m)`. This ordering is deliberately independent
//! of the chain ordering used by the MPO code; [`fock_embedding`] relates the
//! two.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dmrg::davidson::{davidson, DavidsonConfig, DavidsonError};
use crate::fermion::{SopOperator, Spin};
use crate::lattice::Lattice;
use crate::numerics::{self, c64, DenseTensor, NumericsError};

#[derive(Debug, Error)]
pub enum EdError {
    #[error("filling ({n_alpha}, {n_beta}) impossible on {sites} sites")]
    Filling {
        sites: usize,
        n_alpha: usize,
        n_beta: usize,
    },
    #[error("operator acts on site {site} but the basis has {sites} sites")]
    SiteOutOfRange { site: usize, sites: usize },
    #[error("operator term {term} changes the particle numbers and leaves the sector")]
    SectorViolation { term: usize },
    #[error("vector length {got} does not match basis size {want}")]
    Length { got: usize, want: usize },
    #[error("sector dimension {dim} exceeds the limit {limit}")]
    TooLarge { dim: usize, limit: usize },
    #[error(transparent)]
    Solver(#[from] DavidsonError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Upper limit on the site count (↑ lookup table has `2^L` entries).
pub const MAX_SITES: usize = 24;

/// All determinants with `n_alpha` ↑ and `n_beta` ↓ electrons on `sites`
/// sites, ↑-string major and both strings in increasing bit order.
#[derive(Debug, Clone)]
pub struct DeterminantBasis {
    sites: usize,
    n_alpha: usize,
    n_beta: usize,
    up: Vec<u32>,
    down: Vec<u32>,
    up_index: Vec<u32>,
    down_index: Vec<u32>,
}

const NONE: u32 = u32::MAX;

fn strings(sites: usize, n: usize) -> (Vec<u32>, Vec<u32>) {
    let list: Vec<u32> = (0u32..(1u32 << sites)).filter(|b| b.count_ones() as usize == n).collect();
    let mut index = vec![NONE; 1usize << sites];
    for (k, &b) in list.iter().enumerate() {
        index[b as usize] = k as u32;
    }
    (list, index)
}

pub fn enumerate_sector(sites: usize, n_alpha: usize, n_beta: usize) -> Result<DeterminantBasis, EdError> {
    if n_alpha > sites || n_beta > sites || sites == 0 || sites > MAX_SITES {
        return Err(EdError::Filling { sites, n_alpha, n_beta });
    }
    let (up, up_index) = strings(sites, n_alpha);
    let (down, down_index) = strings(sites, n_beta);
    Ok(DeterminantBasis {
        sites,
        n_alpha,
        n_beta,
        up,
        down,
        up_index,
        down_index,
    })
}

impl DeterminantBasis {
    pub fn len(&self) -> usize {
        self.up.len() * self.down.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn filling(&self) -> (usize, usize) {
        (self.n_alpha, self.n_beta)
    }

    /// `(↑ string, ↓ string)` of state `k`.
    pub fn state(&self, k: usize) -> (u32, u32) {
        let nd = self.down.len();
        (self.up[k / nd], self.down[k % nd])
    }

    pub fn index(&self, up: u32, down: u32) -> Option<usize> {
        let iu = *self.up_index.get(up as usize)?;
        let id = *self.down_index.get(down as usize)?;
        (iu != NONE && id != NONE).then(|| iu as usize * self.down.len() + id as usize)
    }

    fn full_mask(&self, k: usize) -> u64 {
        let (u, d) = self.state(k);
        u as u64 | ((d as u64) << self.sites)
    }

    fn from_mask(&self, m: u64) -> Option<usize> {
        let lo = (1u64 << self.sites) - 1;
        self.index((m & lo) as u32, (m >> self.sites) as u32)
    }
}

/// One term compiled to mode indices, rightmost operator first.
#[derive(Debug, Clone)]
struct CompiledTerm {
    coeff: f64,
    ops: Vec<(u32, bool)>,
}

/// An operator prepared for repeated application in one sector.
#[derive(Debug, Clone)]
pub struct SectorOperator<'a> {
    basis: &'a DeterminantBasis,
    offdiag: Vec<CompiledTerm>,
    diagonal: Vec<f64>,
}

fn apply_word(ops: &[(u32, bool)], mut state: u64) -> Option<(u64, bool)> {
    let mut negative = false;
    for &(m, dagger) in ops {
        let bit = 1u64 << m;
        if (state & bit != 0) == dagger {
            return None;
        }
        if (state & (bit - 1)).count_ones() % 2 == 1 {
            negative = !negative;
        }
        state ^= bit;
    }
    Some((state, negative))
}

impl<'a> SectorOperator<'a> {
    pub fn new(op: &SopOperator, basis: &'a DeterminantBasis) -> Result<Self, EdError> {
        let l = basis.sites;
        let mut offdiag = Vec::new();
        let mut diag_terms = Vec::new();
        for (ti, t) in op.terms().iter().enumerate() {
            let mut ops = Vec::with_capacity(t.ops.len());
            let mut net = [0i64; 2];
            let mut per_mode: std::collections::BTreeMap<u32, i64> = Default::default();
            for o in t.ops.iter().rev() {
                if o.site >= l {
                    return Err(EdError::SiteOutOfRange { site: o.site, sites: l });
                }
                let m = match o.spin {
                    Spin::Up => o.site,
                    Spin::Down => l + o.site,
                } as u32;
                let d = if o.dagger { 1 } else { -1 };
                net[usize::from(o.spin == Spin::Down)] += d;
                *per_mode.entry(m).or_default() += d;
                ops.push((m, o.dagger));
            }
            if net != [0, 0] {
                return Err(EdError::SectorViolation { term: ti });
            }
            let c = CompiledTerm { coeff: t.coeff, ops };
            if per_mode.values().all(|&x| x == 0) {
                diag_terms.push(c);
            } else {
                offdiag.push(c);
            }
        }
        let diagonal = (0..basis.len())
            .map(|k| {
                let s = basis.full_mask(k);
                diag_terms
                    .iter()
                    .filter_map(|t| {
                        apply_word(&t.ops, s).map(|(out, neg)| {
                            debug_assert_eq!(out, s);
                            if neg {
                                -t.coeff
                            } else {
                                t.coeff
                            }
                        })
                    })
                    .sum()
            })
            .collect();
        Ok(Self {
            basis,
            offdiag,
            diagonal,
        })
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    /// `w = H v`.
    pub fn apply_into(&self, v: &[f64], w: &mut [f64]) {
        for ((wi, &vi), &d) in w.iter_mut().zip(v).zip(&self.diagonal) {
            *wi = d * vi;
        }
        for k in 0..self.basis.len() {
            let vk = v[k];
            if vk == 0.0 {
                continue;
            }
            let s = self.basis.full_mask(k);
            for t in &self.offdiag {
                if let Some((out, neg)) = apply_word(&t.ops, s) {
                    let j = self.basis.from_mask(out).expect("number-conserving term stays in sector");
                    let c = if neg { -t.coeff } else { t.coeff };
                    w[j] += c * vk;
                }
            }
        }
    }

    pub fn to_dense(&self) -> DenseTensor {
        let n = self.dim();
        let mut m = DenseTensor::zeros(vec![n, n]);
        let mut e = vec![0.0; n];
        let mut col = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            self.apply_into(&e, &mut col);
            e[j] = 0.0;
            for (i, &x) in col.iter().enumerate() {
                m.data_mut()[i * n + j] = x;
            }
        }
        m
    }
}

pub fn apply_operator(op: &SopOperator, basis: &DeterminantBasis, v: &[f64]) -> Result<Vec<f64>, EdError> {
    if v.len() != basis.len() {
        return Err(EdError::Length {
            got: v.len(),
            want: basis.len(),
        });
    }
    let h = SectorOperator::new(op, basis)?;
    let mut w = vec![0.0; v.len()];
    h.apply_into(v, &mut w);
    Ok(w)
}

/// Lowest-real-part eigenvalue and the final residual norm.
pub fn ground_energy(op: &SopOperator, basis: &DeterminantBasis, tol: f64) -> Result<(f64, f64), EdError> {
    let h = SectorOperator::new(op, basis)?;
    let n = h.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let guess: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect();
    let cfg = DavidsonConfig {
        tol,
        max_iter: 1000,
        ..DavidsonConfig::default()
    };
    let r = davidson(|x, y| h.apply_into(x, y), Some(h.diagonal()), &guess, &cfg)?;
    Ok((r.eigenvalue, r.residual))
}

/// Largest sector handled by [`spectrum_small`].
pub const SPECTRUM_MAX_DIM: usize = 300;

/// Every eigenvalue of the sector block, sorted by real part.
pub fn spectrum_small(op: &SopOperator, basis: &DeterminantBasis) -> Result<Vec<c64>, EdError> {
    if basis.len() > SPECTRUM_MAX_DIM {
        return Err(EdError::TooLarge {
            dim: basis.len(),
            limit: SPECTRUM_MAX_DIM,
        });
    }
    let h = SectorOperator::new(op, basis)?;
    Ok(numerics::eigenvalues_general(&h.to_dense())?)
}

/// For every determinant, its index in the `4^L` chain Fock space of
/// [`crate::fermion::dense_operator`] and the sign relating the two basis
/// conventions.
pub fn fock_embedding(basis: &DeterminantBasis, lattice: &Lattice) -> Vec<(usize, f64)> {
    let l = basis.sites;
    (0..basis.len())
        .map(|k| {
            let (u, d) = basis.state(k);
            // Occupied modes in determinant order, keyed by chain order.
            let mut keys: Vec<(usize, usize)> = Vec::new();
            for s in 0..l {
                if u >> s & 1 == 1 {
                    keys.push((lattice.position(s), 0));
                }
            }
            for s in 0..l {
                if d >> s & 1 == 1 {
                    keys.push((lattice.position(s), 1));
                }
            }
            let mut inversions = 0;
            for i in 0..keys.len() {
                for j in i + 1..keys.len() {
                    if keys[i] > keys[j] {
                        inversions += 1;
                    }
                }
            }
            let mut digits = vec![0usize; l];
            for &(p, sp) in &keys {
                digits[p] += if sp == 0 { 1 } else { 2 };
            }
            let idx = digits.iter().fold(0, |acc, &x| acc * 4 + x);
            (idx, if inversions % 2 == 0 { 1.0 } else { -1.0 })
        })
        .collect()
}
