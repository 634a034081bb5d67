//! Davidson iteration for the eigenvalue of smallest real part of a real,
//! possibly nonsymmetric, linear operator.
//!
//! The projected matrix `Vᵀ A V` is solved with the dense nonsymmetric
//! eigensolver. Complex Ritz values are ranked by their real part and only the
//! real part of the Ritz vector is kept.

use thiserror::Error;

use crate::numerics::{self, axpy, c64, dot, norm, DenseTensor, NumericsError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DavidsonConfig {
    /// Converged when `‖r‖ <= tol * max(1, |θ|)`.
    pub tol: f64,
    pub max_subspace: usize,
    /// Ritz vectors kept on restart.
    pub keep: usize,
    pub max_iter: usize,
}

impl Default for DavidsonConfig {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_subspace: 25,
            keep: 3,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DavidsonResult {
    pub eigenvalue: f64,
    pub vector: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Error)]
pub enum DavidsonError {
    #[error("initial guess is zero or has the wrong length")]
    BadGuess,
    #[error("no convergence after {iterations} iterations: residual {residual:.3e} at eigenvalue {}", best.eigenvalue)]
    NotConverged {
        iterations: usize,
        residual: f64,
        best: Box<DavidsonResult>,
    },
    #[error("non-finite value encountered in the Davidson iteration")]
    NonFinite,
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Floor on `|H_kk - θ|` in the diagonal preconditioner.
const PRECOND_FLOOR: f64 = 1e-8;

/// Lowest-real-part eigenpair of the operator applied by `matvec(x, y)`
/// (`y = A x`, `y` is overwritten).
///
/// `diag` enables the preconditioner `t_k = r_k / (A_kk - θ)`; without it the
/// raw residual is used as the correction.
pub fn davidson<F>(
    mut matvec: F,
    diag: Option<&[f64]>,
    guess: &[f64],
    cfg: &DavidsonConfig,
) -> Result<DavidsonResult, DavidsonError>
where
    F: FnMut(&[f64], &mut [f64]),
{
    let n = guess.len();
    if n == 0 || diag.is_some_and(|d| d.len() != n) {
        return Err(DavidsonError::BadGuess);
    }
    let g = norm(guess);
    if !(g > 0.0) || !g.is_finite() {
        return Err(DavidsonError::BadGuess);
    }
    let max_sub = cfg.max_subspace.clamp(2, numerics::SMALL_EIG_MAX_DIM).min(n.max(1));
    let keep = cfg.keep.clamp(1, max_sub.saturating_sub(1).max(1));

    let mut v: Vec<Vec<f64>> = vec![guess.iter().map(|x| x / g).collect()];
    let mut av: Vec<Vec<f64>> = Vec::new();
    // h[i][j] = v_i · A v_j
    let mut h: Vec<Vec<f64>> = Vec::new();
    let mut best: Option<DavidsonResult> = None;

    let mut iter = 0;
    loop {
        // Bring A·V and the projected matrix up to date with V.
        while av.len() < v.len() {
            let k = av.len();
            let mut y = vec![0.0; n];
            matvec(&v[k], &mut y);
            if !y.iter().all(|x| x.is_finite()) {
                return Err(DavidsonError::NonFinite);
            }
            for (i, row) in h.iter_mut().enumerate() {
                row.push(dot(&v[i], &y));
            }
            let new_row: Vec<f64> = (0..=k).map(|j| dot(&v[k], if j == k { &y } else { &av[j] })).collect();
            h.push(new_row);
            av.push(y);
        }
        let k = v.len();

        let hm = DenseTensor::from_fn(vec![k, k], |ix| h[ix[0]][ix[1]]);
        let pairs = numerics::eig_general_small(&hm)?;
        let theta = pairs[0].value.re;
        let y = lowest_ritz(&pairs, theta);
        let x = combine(&v, &y, n);
        let ax = combine(&av, &y, n);
        let mut r = ax.clone();
        axpy(-theta, &x, &mut r);
        let rn = norm(&r);
        if !theta.is_finite() || !rn.is_finite() {
            return Err(DavidsonError::NonFinite);
        }
        iter += 1;

        let better = best.as_ref().is_none_or(|b| rn < b.residual);
        // An exact eigenvector as guess would otherwise stop at once, possibly
        // on an excited state; insist on a second direction first.
        let converged = rn <= cfg.tol * theta.abs().max(1.0) && (k >= 2 || n == 1);
        if better || converged {
            best = Some(DavidsonResult {
                eigenvalue: theta,
                vector: x.clone(),
                residual: rn,
                iterations: iter,
            });
        }
        if converged {
            let mut out = best.take().expect("set above");
            out.eigenvalue = theta;
            out.vector = x;
            out.residual = rn;
            return Ok(out);
        }
        if iter >= cfg.max_iter || k >= n {
            let b = best.take().expect("at least one iterate");
            // A subspace spanning the whole space is exact up to rounding.
            if k >= n && b.residual <= 1e-8 * b.eigenvalue.abs().max(1.0) {
                return Ok(b);
            }
            return Err(DavidsonError::NotConverged {
                iterations: iter,
                residual: b.residual,
                best: Box::new(b),
            });
        }

        // Correction vector.
        let mut t = r.clone();
        if let Some(d) = diag {
            for (ti, &di) in t.iter_mut().zip(d) {
                let mut den = di - theta;
                if den.abs() < PRECOND_FLOOR {
                    den = PRECOND_FLOOR.copysign(den);
                }
                *ti /= den;
            }
        }

        if k >= max_sub {
            // Restart from the lowest Ritz vectors, expressed in the old basis.
            let mut ys: Vec<Vec<f64>> = Vec::new();
            for p in pairs.iter() {
                if ys.len() >= keep {
                    break;
                }
                ys.push(real_ritz(&p.vector));
                if p.value.im.abs() > 0.0 && ys.len() < keep {
                    ys.push(p.vector.iter().map(|z| z.im).collect());
                }
            }
            let ys = numerics::qr_orthonormalize(&ys);
            let nv: Vec<Vec<f64>> = ys.iter().map(|y| combine(&v, y, n)).collect();
            let nav: Vec<Vec<f64>> = ys.iter().map(|y| combine(&av, y, n)).collect();
            h = (0..ys.len())
                .map(|i| (0..ys.len()).map(|j| dot(&nv[i], &nav[j])).collect())
                .collect();
            v = nv;
            av = nav;
        }

        if let Some(q) = orthogonal_direction(&v, t).or_else(|| orthogonal_direction(&v, r)) {
            v.push(q);
        } else if let Some(q) = (0..n)
            .map(|i| {
                let mut e = vec![0.0; n];
                e[i] = 1.0;
                e
            })
            .find_map(|e| orthogonal_direction(&v, e))
        {
            // Stagnated: extend with a unit vector instead.
            v.push(q);
        }
    }
}

/// Ritz vector of the lowest Ritz value. When that value is degenerate the
/// first basis vector is projected onto the degenerate space, so a guess that
/// is already an eigenvector is kept.
fn lowest_ritz(pairs: &[numerics::EigenPair], theta: f64) -> Vec<f64> {
    let tol = DEGENERATE_TOL * theta.abs().max(1.0);
    let group: Vec<Vec<f64>> = pairs
        .iter()
        .take_while(|p| (p.value.re - theta).abs() <= tol)
        .filter(|p| p.value.im.abs() <= tol)
        .map(|p| real_ritz(&p.vector))
        .collect();
    if group.len() < 2 {
        return real_ritz(&pairs[0].vector);
    }
    let basis = numerics::qr_orthonormalize(&group);
    let mut y = vec![0.0; group[0].len()];
    for b in &basis {
        axpy(b[0], b, &mut y);
    }
    let ny = norm(&y);
    if ny < 1e-8 {
        return real_ritz(&pairs[0].vector);
    }
    y.iter_mut().for_each(|x| *x /= ny);
    y
}

/// Ritz values closer than this (relative) are treated as one.
const DEGENERATE_TOL: f64 = 1e-10;

/// Phase-fixes a complex eigenvector of the projected matrix so its largest
/// component is real and positive, and returns the real part.
fn real_ritz(z: &[c64]) -> Vec<f64> {
    let big = z
        .iter()
        .copied()
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .unwrap_or(c64::new(1.0, 0.0));
    let phase = if big.norm() > 0.0 { big.conj() / big.norm() } else { c64::new(1.0, 0.0) };
    z.iter().map(|&x| (x * phase).re).collect()
}

fn combine(basis: &[Vec<f64>], coeffs: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for (b, &c) in basis.iter().zip(coeffs) {
        if c != 0.0 {
            axpy(c, b, &mut out);
        }
    }
    out
}

/// Normalized component of `t` orthogonal to the orthonormal `basis`, if it
/// is not numerically contained in it.
fn orthogonal_direction(basis: &[Vec<f64>], mut t: Vec<f64>) -> Option<Vec<f64>> {
    let t0 = norm(&t);
    if !(t0 > 0.0) || !t0.is_finite() {
        return None;
    }
    t.iter_mut().for_each(|x| *x /= t0);
    for _ in 0..2 {
        for b in basis {
            let c = dot(b, &t);
            axpy(-c, b, &mut t);
        }
    }
    let tn = norm(&t);
    if tn < 1e-10 {
        return None;
    }
    t.iter_mut().for_each(|x| *x /= tn);
    Some(t)
}
