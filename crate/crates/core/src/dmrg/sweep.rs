//! Two-site effective Hamiltonian and the sweep that optimizes one bond at a
//! time.

use std::cell::RefCell;

use crate::dmrg::davidson::{davidson, DavidsonConfig, DavidsonError};
use crate::fermion::{Mat4, D};
use crate::mpo::NumericMpo;
use crate::mps::{boundary_env, extend_left, extend_right, Mps, MpsError};
use crate::numerics::{axpy, gemm, mat_mut, mat_ref, svd, DenseTensor, NumericsError};

/// Singular values below `TRUNCATION_REL_TOL * S[0]` are always dropped.
pub const TRUNCATION_REL_TOL: f64 = 1e-12;

/// `H_eff` acting on two-site tensors `(Dl, 4, 4, Dr)`, built from a left
/// environment, two MPO sites and a right environment.
pub struct EffectiveHamiltonian<'a> {
    left: &'a DenseTensor,
    /// Right environment permuted to `(w, ket, bra)`.
    right_t: DenseTensor,
    right: &'a DenseTensor,
    w1: Vec<(usize, usize, Mat4)>,
    w2: Vec<(usize, usize, Mat4)>,
    /// Nonzero entries of the first site as `(row in X_a, row in Z, coeff)`,
    /// rows of length `4 Dr`.
    w1_entries: Vec<(usize, usize, f64)>,
    /// Second site as `(row in Z, row in Y_a, coeff)`, rows of length `Dr`.
    w2_entries: Vec<(usize, usize, f64)>,
    scratch: RefCell<Scratch>,
    dl: usize,
    dr: usize,
    wl: usize,
    wm: usize,
    wr: usize,
}

struct Scratch {
    xx: Vec<f64>,
    z: Vec<f64>,
    yy: Vec<f64>,
}

/// Operator on the two-site tensor at sites `(p, p + 1)`.
pub fn effective_matvec<'a>(
    left: &'a DenseTensor,
    mpo: &NumericMpo,
    p: usize,
    right: &'a DenseTensor,
) -> Result<EffectiveHamiltonian<'a>, NumericsError> {
    let (t1, t2) = (mpo.site(p), mpo.site(p + 1));
    let (dl, wl) = (left.shape()[0], left.shape()[1]);
    let (dr, wr) = (right.shape()[0], right.shape()[1]);
    let wm = t1.shape()[3];
    if left.shape()[2] != dl || right.shape()[2] != dr {
        return Err(NumericsError::Dimension("environments must be square in the state bond".into()));
    }
    if t1.shape()[0] != wl || t2.shape()[0] != wm || t2.shape()[3] != wr {
        return Err(NumericsError::Dimension(format!(
            "operator bonds ({}, {}, {}, {}) do not match environments ({wl}, {wr})",
            t1.shape()[0],
            wm,
            t2.shape()[0],
            t2.shape()[3]
        )));
    }
    let (w1, w2) = (mpo.blocks(p), mpo.blocks(p + 1));
    let mut w1_entries = Vec::new();
    for &(w, w1, ref m) in &w1 {
        for (o1, row) in m.iter().enumerate() {
            for (i1, &c) in row.iter().enumerate() {
                if c != 0.0 {
                    w1_entries.push((w * D + i1, w1 * D + o1, c));
                }
            }
        }
    }
    let mut w2_entries = Vec::new();
    for &(w1, w2, ref m) in &w2 {
        for o1 in 0..D {
            for (o2, row) in m.iter().enumerate() {
                for (i2, &c) in row.iter().enumerate() {
                    if c != 0.0 {
                        w2_entries.push(((w1 * D + o1) * D + i2, (o1 * D + o2) * wr + w2, c));
                    }
                }
            }
        }
    }
    let scratch = RefCell::new(Scratch {
        xx: vec![0.0; dl * wl * D * D * dr],
        z: vec![0.0; wm * D * D * dr],
        yy: vec![0.0; dl * D * D * wr * dr],
    });
    Ok(EffectiveHamiltonian {
        left,
        right_t: right.permute(&[1, 2, 0])?,
        right,
        w1,
        w2,
        w1_entries,
        w2_entries,
        scratch,
        dl,
        dr,
        wl,
        wm,
        wr,
    })
}

impl EffectiveHamiltonian<'_> {
    pub fn dim(&self) -> usize {
        self.dl * D * D * self.dr
    }

    pub fn shape(&self) -> [usize; 4] {
        [self.dl, D, D, self.dr]
    }

    /// `y = H_eff x`.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let (dl, dr, wl, wr) = (self.dl, self.dr, self.wl, self.wr);
        let dd = D * D;
        let mut scratch = self.scratch.borrow_mut();
        let Scratch { xx, z, yy } = &mut *scratch;
        // X[(a, w), (i1, i2, b')] = L[(a, w), a'] x[a', (i1, i2, b')]
        gemm(
            mat_mut(xx, dl * wl, dd * dr),
            mat_ref(self.left.data(), dl * wl, dl),
            mat_ref(x, dl, dd * dr),
            false,
        );
        // One row a at a time so the intermediate stays in cache:
        // Z[w1, o1, i2, b'] = Σ W1[w, o1, i1, w1] X[a, w, i1, i2, b']
        // Y[a, o1, o2, w2, b'] = Σ W2[w1, o2, i2, w2] Z[w1, o1, i2, b']
        let (xrow, yrow) = (wl * dd * dr, dd * wr * dr);
        let n1 = D * dr;
        for a in 0..dl {
            let xa = &xx[a * xrow..(a + 1) * xrow];
            z.fill(0.0);
            for &(src, dst, c) in &self.w1_entries {
                axpy(c, &xa[src * n1..(src + 1) * n1], &mut z[dst * n1..(dst + 1) * n1]);
            }
            let ya = &mut yy[a * yrow..(a + 1) * yrow];
            ya.fill(0.0);
            for &(src, dst, c) in &self.w2_entries {
                axpy(c, &z[src * dr..(src + 1) * dr], &mut ya[dst * dr..(dst + 1) * dr]);
            }
        }
        // y[(a, o1, o2), b] = Y[(a, o1, o2), (w2, b')] R[(w2, b'), b]
        gemm(
            mat_mut(y, dl * dd, dr),
            mat_ref(yy, dl * dd, wr * dr),
            mat_ref(self.right_t.data(), wr * dr, dr),
            false,
        );
    }

    /// Diagonal of `H_eff`, used by the preconditioner.
    pub fn diagonal(&self) -> Vec<f64> {
        let (dl, dr, wl, wm, wr) = (self.dl, self.dr, self.wl, self.wm, self.wr);
        // C[w, o1, o2, w2] = Σ_w1 W1[w, o1, o1, w1] W2[w1, o2, o2, w2]
        let mut by_w1: Vec<Vec<(usize, &Mat4)>> = vec![Vec::new(); wm];
        for (w1, w2, m) in &self.w2 {
            by_w1[*w1].push((*w2, m));
        }
        let mut c = vec![0.0; wl * D * D * wr];
        for (w, w1, m1) in &self.w1 {
            for &(w2, m2) in &by_w1[*w1] {
                for o1 in 0..D {
                    for o2 in 0..D {
                        c[((w * D + o1) * D + o2) * wr + w2] += m1[o1][o1] * m2[o2][o2];
                    }
                }
            }
        }
        let ld: Vec<f64> = (0..dl * wl).map(|k| self.left.get(&[k / wl, k % wl, k / wl])).collect();
        // Rd[w2, b] = R[b, w2, b]
        let rd: Vec<f64> = (0..wr * dr).map(|k| self.right.get(&[k % dr, k / dr, k % dr])).collect();
        // tmp[a, (o1, o2, w2)] = Σ_w Ld[a, w] C[w, (o1, o2, w2)]
        let mut tmp = vec![0.0; dl * D * D * wr];
        gemm(
            mat_mut(&mut tmp, dl, D * D * wr),
            mat_ref(&ld, dl, wl),
            mat_ref(&c, wl, D * D * wr),
            false,
        );
        let mut out = vec![0.0; self.dim()];
        gemm(
            mat_mut(&mut out, dl * D * D, dr),
            mat_ref(&tmp, dl * D * D, wr),
            mat_ref(&rd, wr, dr),
            false,
        );
        out
    }

    /// Explicit matrix, one column per unit vector. Small systems only.
    pub fn to_dense(&self) -> DenseTensor {
        let n = self.dim();
        let mut m = DenseTensor::zeros(vec![n, n]);
        let mut e = vec![0.0; n];
        let mut col = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            self.apply(&e, &mut col);
            e[j] = 0.0;
            for (i, &v) in col.iter().enumerate() {
                m.set(&[i, j], v);
            }
        }
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    LeftToRight,
    RightToLeft,
}

#[derive(Debug, Clone, Copy)]
pub struct SweepSettings {
    pub m: usize,
    pub davidson: DavidsonConfig,
}

/// What one half sweep did.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    /// Davidson eigenvalue at the last optimized pair.
    pub eigenvalue: f64,
    /// Sum over pairs of the discarded weight.
    pub discarded_weight: f64,
    pub max_bond: usize,
    /// Largest final Davidson residual over the pairs.
    pub max_residual: f64,
    /// Pairs where Davidson stopped at its iteration cap.
    pub unconverged_pairs: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum SweepError {
    #[error(transparent)]
    Mps(#[from] MpsError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("Davidson failed on sites ({site}, {}): {source}", site + 1)]
    Davidson {
        site: usize,
        #[source]
        source: DavidsonError,
    },
    #[error("sweep {0:?} needs the center at site {1}")]
    Center(Direction, usize),
}

/// Cached environments for one state and operator. `left[k]` covers sites
/// `0..k`, `right[k]` covers sites `k..N`.
pub struct Environments {
    left: Vec<Option<DenseTensor>>,
    right: Vec<Option<DenseTensor>>,
}

impl Environments {
    /// Environments for a state whose center is at `center`.
    pub fn new(state: &Mps, mpo: &NumericMpo) -> Result<Self, SweepError> {
        let n = state.n_sites();
        let c = state.center().ok_or(SweepError::Center(Direction::LeftToRight, 0))?;
        let mut left = vec![None; n + 1];
        let mut right = vec![None; n + 1];
        left[0] = Some(boundary_env());
        right[n] = Some(boundary_env());
        for k in 0..c {
            let e = extend_left(left[k].as_ref().expect("built in order"), state.site(k), mpo.site(k))?;
            left[k + 1] = Some(e);
        }
        for k in (c + 1..n).rev() {
            let e = extend_right(right[k + 1].as_ref().expect("built in order"), state.site(k), mpo.site(k))?;
            right[k] = Some(e);
        }
        Ok(Self { left, right })
    }
}

/// One pass over all neighbouring pairs. Left to right needs the center at
/// 0 and leaves it at `N - 1`; right to left the reverse.
pub fn two_site_sweep(
    state: &mut Mps,
    mpo: &NumericMpo,
    envs: &mut Environments,
    settings: &SweepSettings,
    direction: Direction,
) -> Result<SweepRecord, SweepError> {
    let n = state.n_sites();
    let start = match direction {
        Direction::LeftToRight => 0,
        Direction::RightToLeft => n - 1,
    };
    if state.center() != Some(start) {
        return Err(SweepError::Center(direction, start));
    }
    let pairs: Vec<usize> = match direction {
        Direction::LeftToRight => (0..n - 1).collect(),
        Direction::RightToLeft => (0..n - 1).rev().collect(),
    };
    let mut rec = SweepRecord {
        eigenvalue: f64::NAN,
        discarded_weight: 0.0,
        max_bond: 0,
        max_residual: 0.0,
        unconverged_pairs: 0,
    };
    for p in pairs {
        let (a, b) = (state.site(p), state.site(p + 1));
        let (dl, dr) = (a.shape()[0], b.shape()[2]);
        let theta = crate::numerics::contract(a, b, &[(2, 0)])?;
        let left = envs.left[p].as_ref().expect("left environment");
        let right = envs.right[p + 2].as_ref().expect("right environment");
        let heff = effective_matvec(left, mpo, p, right)?;
        let diag = heff.diagonal();
        let res = match davidson(|x, y| heff.apply(x, y), Some(&diag), theta.data(), &settings.davidson) {
            Ok(r) => r,
            Err(DavidsonError::NotConverged { best, .. }) => {
                rec.unconverged_pairs += 1;
                *best
            }
            Err(source) => return Err(SweepError::Davidson { site: p, source }),
        };
        rec.eigenvalue = res.eigenvalue;
        rec.max_residual = rec.max_residual.max(res.residual);

        let split = truncate_pair(&res.vector, dl, dr, settings.m)?;
        rec.discarded_weight += split.discarded;
        rec.max_bond = rec.max_bond.max(split.kept);
        match direction {
            Direction::LeftToRight => {
                let (u, sv) = (split.u, split.s_vt);
                let env = extend_left(left, &u, mpo.site(p))?;
                envs.left[p + 1] = Some(env);
                state.set_pair(p, u, sv, p + 1);
            }
            Direction::RightToLeft => {
                let (us, vt) = (split.u_s, split.vt);
                let env = extend_right(right, &vt, mpo.site(p + 1))?;
                envs.right[p + 1] = Some(env);
                state.set_pair(p, us, vt, p);
            }
        }
    }
    Ok(rec)
}

struct Split {
    u: DenseTensor,
    vt: DenseTensor,
    /// `U S` and `S Vt` with the kept singular values renormalized.
    u_s: DenseTensor,
    s_vt: DenseTensor,
    kept: usize,
    discarded: f64,
}

/// SVD of the two-site tensor keeping `min(m, #S > 1e-12 S[0])` states.
fn truncate_pair(theta: &[f64], dl: usize, dr: usize, m: usize) -> Result<Split, NumericsError> {
    let mat = DenseTensor::new(vec![dl * D, D * dr], theta.to_vec())?;
    let f = svd(&mat)?;
    let s0 = f.s.first().copied().unwrap_or(0.0);
    let significant = f.s.iter().filter(|&&x| x > TRUNCATION_REL_TOL * s0).count().max(1);
    let kept = significant.min(m).max(1);
    let total: f64 = f.s.iter().map(|x| x * x).sum();
    let kept_w: f64 = f.s[..kept].iter().map(|x| x * x).sum();
    let discarded = if total > 0.0 { ((total - kept_w) / total).max(0.0) } else { 0.0 };
    let scale = if kept_w > 0.0 { 1.0 / kept_w.sqrt() } else { 1.0 };
    let s: Vec<f64> = f.s[..kept].iter().map(|x| x * scale).collect();
    let u = DenseTensor::from_fn(vec![dl * D, kept], |i| f.u.get(&[i[0], i[1]]));
    let vt = DenseTensor::from_fn(vec![kept, D * dr], |i| f.vt.get(&[i[0], i[1]]));
    let u_s = DenseTensor::from_fn(vec![dl * D, kept], |i| u.get(i) * s[i[1]]);
    let s_vt = DenseTensor::from_fn(vec![kept, D * dr], |i| vt.get(i) * s[i[0]]);
    Ok(Split {
        u: u.reshape(vec![dl, D, kept])?,
        vt: vt.reshape(vec![kept, D, dr])?,
        u_s: u_s.reshape(vec![dl, D, kept])?,
        s_vt: s_vt.reshape(vec![kept, D, dr])?,
        kept,
        discarded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fermion::dense_operator;
    use crate::hamiltonian::{assemble, hubbard, tc_hubbard, ModelParams};
    use crate::lattice::Lattice;
    use crate::mpo::build_mpo;
    use crate::mps::{expectation, random_mps};
    use crate::numerics::{dot, eigenvalues_symmetric};
    use proptest::prelude::*;

    fn max_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    fn random_vec(n: usize, seed: u64) -> Vec<f64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn identity_with_trivial_environments() {
        let mpo = NumericMpo::identity(2);
        let (l, r) = (boundary_env(), boundary_env());
        let h = effective_matvec(&l, &mpo, 0, &r).unwrap();
        let x = random_vec(16, 1);
        let mut y = vec![0.0; 16];
        h.apply(&x, &mut y);
        assert_eq!(x, y);
        assert!(h.diagonal().iter().all(|&d| d == 1.0));
    }

    #[test]
    fn two_sites_equal_the_dense_operator() {
        let lat = Lattice::chain(2).unwrap();
        let p = ModelParams::hubbard(1.0, 8.0, 1, 1).with_j(-0.3);
        let op = assemble(&lat, &p);
        let mpo = build_mpo(&op, &lat).unwrap().numeric;
        let (l, r) = (boundary_env(), boundary_env());
        let h = effective_matvec(&l, &mpo, 0, &r).unwrap();
        let dense = dense_operator(&op);
        assert!(max_diff(h.to_dense().data(), dense.data()) < 1e-10);
        let d: Vec<f64> = (0..16).map(|i| dense.get(&[i, i])).collect();
        assert!(max_diff(&h.diagonal(), &d) < 1e-12);
    }

    /// `Pᵀ H P` with `P` the embedding of the two-site tensor at sites
    /// `(1, 2)` of a four-site state.
    #[test]
    fn matches_projected_dense_operator() {
        let lat = Lattice::chain(4).unwrap();
        let p = ModelParams::hubbard(1.0, 4.0, 2, 1).with_j(0.2);
        let op = tc_hubbard(&lat, &p);
        let mpo = build_mpo(&op, &lat).unwrap().numeric;
        let state = random_mps(&lat, 3, 7).canonicalize(1).unwrap();
        let envs = Environments::new(&state, &mpo).unwrap();
        let h = effective_matvec(envs.left[1].as_ref().unwrap(), &mpo, 1, envs.right[3].as_ref().unwrap()).unwrap();
        let n = h.dim();
        let (a0, a3) = (state.site(0), state.site(3));
        let [dl, _, _, dr] = h.shape();
        // Full vectors for each basis tensor of the two-site space.
        let embed = |x: &[f64]| -> Vec<f64> {
            let mut v = vec![0.0; 256];
            for s0 in 0..D {
                for s1 in 0..D {
                    for s2 in 0..D {
                        for s3 in 0..D {
                            let mut acc = 0.0;
                            for a in 0..dl {
                                for b in 0..dr {
                                    acc += a0.get(&[0, s0, a]) * x[((a * D + s1) * D + s2) * dr + b] * a3.get(&[b, s3, 0]);
                                }
                            }
                            v[((s0 * D + s1) * D + s2) * D + s3] = acc;
                        }
                    }
                }
            }
            v
        };
        let dense = dense_operator(&op);
        for seed in 0..3 {
            let x = random_vec(n, seed);
            let v = embed(&x);
            let hv = dense.matmul(&DenseTensor::new(vec![256, 1], v).unwrap()).unwrap();
            let mut y = vec![0.0; n];
            h.apply(&x, &mut y);
            for j in 0..n {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                let want = dot(&embed(&e), hv.data());
                assert!((y[j] - want).abs() < 1e-10, "{j}: {} vs {want}", y[j]);
            }
        }
        let hd = h.to_dense();
        let d: Vec<f64> = (0..n).map(|i| hd.get(&[i, i])).collect();
        assert!(max_diff(&h.diagonal(), &d) < 1e-12);
    }

    fn run_sweeps(lat: &Lattice, op: &crate::fermion::SopOperator, m: usize, sweeps: usize) -> (Mps, Vec<f64>) {
        let mpo = build_mpo(op, lat).unwrap().numeric;
        let mut state = random_mps(lat, m, 5);
        let mut envs = Environments::new(&state, &mpo).unwrap();
        let settings = SweepSettings { m, davidson: DavidsonConfig::default() };
        let mut energies = Vec::new();
        for _ in 0..sweeps {
            two_site_sweep(&mut state, &mpo, &mut envs, &settings, Direction::LeftToRight).unwrap();
            let rec = two_site_sweep(&mut state, &mpo, &mut envs, &settings, Direction::RightToLeft).unwrap();
            energies.push(rec.eigenvalue);
        }
        (state, energies)
    }

    #[test]
    fn free_fermions_reach_the_dense_ground_energy() {
        let lat = Lattice::new(2, 2, false, crate::lattice::OrderingKind::Snake).unwrap();
        let p = ModelParams::hubbard(1.0, 0.0, 1, 1);
        let op = hubbard(&lat, &p);
        let exact = eigenvalues_symmetric(&dense_operator(&op)).unwrap()[0];
        let (state, e) = run_sweeps(&lat, &op, 16, 3);
        assert!((e[2] - exact).abs() < 1e-8, "{} vs {exact}", e[2]);
        let mpo = build_mpo(&op, &lat).unwrap().numeric;
        assert!((expectation(&state, &mpo).unwrap() - exact).abs() < 1e-8);
    }

    #[test]
    fn identity_operator_gives_one() {
        let lat = Lattice::chain(4).unwrap();
        let mpo = NumericMpo::identity(4);
        let mut state = random_mps(&lat, 4, 2);
        let before = state.to_dense();
        let mut envs = Environments::new(&state, &mpo).unwrap();
        let settings = SweepSettings { m: 4, davidson: DavidsonConfig::default() };
        let rec = two_site_sweep(&mut state, &mpo, &mut envs, &settings, Direction::LeftToRight).unwrap();
        assert!((rec.eigenvalue - 1.0).abs() < 1e-12);
        assert!((expectation(&state, &mpo).unwrap() - 1.0).abs() < 1e-12);
        // Every vector is an eigenvector, so the state only changes gauge.
        let ov = dot(before.data(), state.to_dense().data()).abs();
        assert!((ov - 1.0).abs() < 1e-10, "{ov}");
    }

    #[test]
    fn hermitian_energies_do_not_increase() {
        let lat = Lattice::chain(6).unwrap();
        let p = ModelParams::hubbard(1.0, 4.0, 3, 3);
        let (_, e) = run_sweeps(&lat, &assemble(&lat, &p), 64, 4);
        for w in e.windows(2) {
            assert!(w[1] <= w[0] + 1e-10, "{:?}", e);
        }
    }

    #[test]
    fn wrong_center_is_rejected() {
        let lat = Lattice::chain(3).unwrap();
        let mpo = NumericMpo::identity(3);
        let mut state = random_mps(&lat, 2, 0);
        let mut envs = Environments::new(&state, &mpo).unwrap();
        let settings = SweepSettings { m: 2, davidson: DavidsonConfig::default() };
        let r = two_site_sweep(&mut state, &mpo, &mut envs, &settings, Direction::RightToLeft);
        assert!(matches!(r, Err(SweepError::Center(..))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(20))]
        #[test]
        fn matvec_is_linear(seed in any::<u64>(), alpha in -3.0f64..3.0) {
            let lat = Lattice::chain(4).unwrap();
            let p = ModelParams::hubbard(1.0, 2.0, 2, 2).with_j(-0.4);
            let mpo = build_mpo(&assemble(&lat, &p), &lat).unwrap().numeric;
            let state = random_mps(&lat, 5, seed).canonicalize(1).unwrap();
            let envs = Environments::new(&state, &mpo).unwrap();
            let h = effective_matvec(envs.left[1].as_ref().unwrap(), &mpo, 1, envs.right[3].as_ref().unwrap()).unwrap();
            let n = h.dim();
            let (x, z) = (random_vec(n, seed), random_vec(n, seed.wrapping_add(1)));
            let comb: Vec<f64> = x.iter().zip(&z).map(|(a, b)| alpha * a + b).collect();
            let (mut hx, mut hz, mut hc) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
            h.apply(&x, &mut hx);
            h.apply(&z, &mut hz);
            h.apply(&comb, &mut hc);
            let scale = hc.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            for i in 0..n {
                prop_assert!((hc[i] - (alpha * hx[i] + hz[i])).abs() < 1e-12 * scale);
            }
        }
    }
}
