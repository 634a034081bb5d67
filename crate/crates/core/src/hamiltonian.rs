//! Fermi-Hubbard, transcorrelated Fermi-Hubbard and particle-number penalty
//! operators in real space.

use thiserror::Error;

use crate::fermion::{number, LadderOp, SopOperator, Spin};
use crate::lattice::Lattice;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("u must be >= 0, got {0}")]
    NegativeU(f64),
    #[error("penalty_lambda must be >= 0, got {0}")]
    NegativeLambda(f64),
    #[error("{field} = {value} exceeds the {sites} lattice sites")]
    Filling {
        field: &'static str,
        value: usize,
        sites: usize,
    },
    #[error("{0} must be finite")]
    NonFinite(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub t: f64,
    pub u: f64,
    /// Transcorrelation strength; dimensionless.
    pub j: f64,
    pub n_alpha: usize,
    pub n_beta: usize,
    pub penalty_lambda: f64,
}

impl ModelParams {
    /// Plain Hubbard parameters with the default penalty.
    pub fn hubbard(t: f64, u: f64, n_alpha: usize, n_beta: usize) -> Self {
        Self {
            t,
            u,
            j: 0.0,
            n_alpha,
            n_beta,
            penalty_lambda: default_penalty(t, u),
        }
    }

    pub fn with_j(mut self, j: f64) -> Self {
        self.j = j;
        self
    }

    pub fn validate(&self, lattice: &Lattice) -> Result<(), ModelError> {
        for (name, v) in [("t", self.t), ("u", self.u), ("j", self.j), ("penalty_lambda", self.penalty_lambda)] {
            if !v.is_finite() {
                return Err(ModelError::NonFinite(name));
            }
        }
        if self.u < 0.0 {
            return Err(ModelError::NegativeU(self.u));
        }
        if self.penalty_lambda < 0.0 {
            return Err(ModelError::NegativeLambda(self.penalty_lambda));
        }
        let sites = lattice.n_sites();
        for (field, value) in [("n_alpha", self.n_alpha), ("n_beta", self.n_beta)] {
            if value > sites {
                return Err(ModelError::Filling { field, value, sites });
            }
        }
        Ok(())
    }
}

/// `max(2U, 10t)`: large enough to lift every wrong-filling sector above the
/// target one for the couplings used here.
pub fn default_penalty(t: f64, u: f64) -> f64 {
    (2.0 * u).max(10.0 * t.abs())
}

fn hop(i: usize, j: usize, s: Spin) -> [LadderOp; 2] {
    [LadderOp::create(i, s), LadderOp::annihilate(j, s)]
}

fn raw_hubbard(lattice: &Lattice, p: &ModelParams) -> SopOperator {
    let mut h = SopOperator::new(lattice.clone());
    if p.t != 0.0 {
        for b in lattice.bonds() {
            for s in Spin::BOTH {
                h.push(-p.t, hop(b.a, b.b, s));
                h.push(-p.t, hop(b.b, b.a, s));
            }
        }
    }
    if p.u != 0.0 {
        for l in 0..lattice.n_sites() {
            let mut ops = number(l, Spin::Up).to_vec();
            ops.extend(number(l, Spin::Down));
            h.push(p.u, ops);
        }
    }
    h
}

/// `-t Σ_<ij>,σ (a†_iσ a_jσ + h.c.) + U Σ_l n_l↑ n_l↓`
pub fn hubbard(lattice: &Lattice, p: &ModelParams) -> SopOperator {
    raw_hubbard(lattice, p).canonicalize()
}

/// Similarity transform `e^{-τ} H e^{τ}` with `τ = J Σ_l n_l↑ n_l↓`, written
/// out in closed form. For every ordered neighbour pair `(i, j)` and spin σ the
/// hopping `a†_iσ a_jσ` gains the factor
/// `1 + (e^J - 1) n_jσ̄ + (e^-J - 1) n_iσ̄ - 2(cosh J - 1) n_iσ̄ n_jσ̄`.
pub fn tc_hubbard(lattice: &Lattice, p: &ModelParams) -> SopOperator {
    let mut h = raw_hubbard(lattice, p);
    if p.j != 0.0 && p.t != 0.0 {
        let c_j = -p.t * (p.j.exp() - 1.0);
        let c_i = -p.t * ((-p.j).exp() - 1.0);
        let c_ij = 2.0 * p.t * (p.j.cosh() - 1.0);
        for b in lattice.bonds() {
            for (i, j) in [(b.a, b.b), (b.b, b.a)] {
                for s in Spin::BOTH {
                    let base = hop(i, j, s);
                    let nj = number(j, s.flip());
                    let ni = number(i, s.flip());
                    h.push(c_j, [base.as_slice(), &nj].concat());
                    h.push(c_i, [base.as_slice(), &ni].concat());
                    h.push(c_ij, [base.as_slice(), &ni, &nj].concat());
                }
            }
        }
    }
    h.canonicalize()
}

/// `λ [(N↑ - N_α)² + (N↓ - N_β)²]`, expanded with `n² = n`.
pub fn number_penalty(lattice: &Lattice, p: &ModelParams) -> SopOperator {
    let mut h = SopOperator::new(lattice.clone());
    let lam = p.penalty_lambda;
    if lam == 0.0 {
        return h;
    }
    let n = lattice.n_sites();
    let mut constant = 0.0;
    for (s, target) in [(Spin::Up, p.n_alpha), (Spin::Down, p.n_beta)] {
        let target = target as f64;
        constant += lam * target * target;
        for i in 0..n {
            h.push(lam * (1.0 - 2.0 * target), number(i, s));
            for j in 0..n {
                if i != j {
                    h.push(lam, [number(i, s), number(j, s)].concat());
                }
            }
        }
    }
    h.push(constant, Vec::new());
    h.canonicalize()
}

/// Number operator `N_σ`.
pub fn total_number(lattice: &Lattice, spin: Spin) -> SopOperator {
    let mut h = SopOperator::new(lattice.clone());
    for i in 0..lattice.n_sites() {
        h.push(1.0, number(i, spin));
    }
    h
}

/// Transcorrelated Hamiltonian plus the number penalty.
pub fn assemble(lattice: &Lattice, p: &ModelParams) -> SopOperator {
    let mut h = tc_hubbard(lattice, p);
    h.extend(&number_penalty(lattice, p));
    h.canonicalize()
}
