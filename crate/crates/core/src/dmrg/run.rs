//! Full ground-state run: Hamiltonian, MPO, random start, sweeps until the
//! energy settles.

use thiserror::Error;

use crate::dmrg::davidson::DavidsonConfig;
use crate::dmrg::sweep::{two_site_sweep, Direction, Environments, SweepError, SweepSettings};
use crate::fermion::Spin;
use crate::hamiltonian::{assemble, tc_hubbard, total_number, ModelError, ModelParams};
use crate::lattice::Lattice;
use crate::mpo::{build_mpo, MpoError, NumericMpo};
use crate::mps::{expectation, random_mps, Mps, MpsError};

/// Largest allowed `|⟨N_σ⟩ - N_σ|` for a result to count as converged.
pub const FILLING_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DmrgConfig {
    /// Bond-dimension cap.
    pub m: usize,
    /// Full sweeps, each one pass left to right and one back.
    pub max_sweeps: usize,
    /// Stop once `|ΔE| <= energy_tol * |E|` between full sweeps.
    pub energy_tol: f64,
    pub davidson_tol: f64,
    pub davidson_max_subspace: usize,
    pub davidson_keep: usize,
    pub davidson_max_iter: usize,
    pub seed: u64,
}

impl Default for DmrgConfig {
    fn default() -> Self {
        let d = DavidsonConfig::default();
        Self {
            m: 100,
            max_sweeps: 20,
            energy_tol: 1e-8,
            davidson_tol: d.tol,
            davidson_max_subspace: d.max_subspace,
            davidson_keep: d.keep,
            davidson_max_iter: d.max_iter,
            seed: 0,
        }
    }
}

impl DmrgConfig {
    pub fn validate(&self) -> Result<(), DmrgError> {
        let bad = |what: &str| Err(DmrgError::Config(what.to_string()));
        if self.m == 0 {
            return bad("m must be >= 1");
        }
        if self.max_sweeps == 0 {
            return bad("max_sweeps must be >= 1");
        }
        if !(self.energy_tol > 0.0) || !(self.davidson_tol > 0.0) {
            return bad("tolerances must be > 0");
        }
        if self.davidson_max_subspace < 2 || self.davidson_keep == 0 || self.davidson_keep >= self.davidson_max_subspace {
            return bad("need 1 <= davidson_keep < davidson_max_subspace");
        }
        if self.davidson_max_iter == 0 {
            return bad("davidson_max_iter must be >= 1");
        }
        Ok(())
    }

    fn davidson(&self) -> DavidsonConfig {
        DavidsonConfig {
            tol: self.davidson_tol,
            max_subspace: self.davidson_max_subspace,
            keep: self.davidson_keep,
            max_iter: self.davidson_max_iter,
        }
    }
}

#[derive(Debug, Error)]
pub enum DmrgError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Mpo(#[from] MpoError),
    #[error(transparent)]
    Mps(#[from] MpsError),
    #[error(transparent)]
    Sweep(#[from] SweepError),
}

/// Observables after one full sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    /// 1-based.
    pub sweep: usize,
    /// `⟨ψ|H̄|ψ⟩` of the transcorrelated Hamiltonian without the penalty.
    pub energy_total: f64,
    pub energy_per_site: f64,
    /// Last Davidson eigenvalue of the penalized operator.
    pub eigenvalue: f64,
    pub max_bond: usize,
    /// Summed over both half sweeps.
    pub discarded_weight: f64,
    pub n_up: f64,
    pub n_down: f64,
    pub max_residual: f64,
    pub unconverged_pairs: usize,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub sweeps: Vec<SweepSummary>,
    pub energy_total: f64,
    pub energy_per_site: f64,
    /// Final bond extent at each cut.
    pub bond_dims: Vec<usize>,
    pub n_up: f64,
    pub n_down: f64,
    /// Energy settled and filling matches.
    pub converged: bool,
    pub energy_converged: bool,
    /// `max_σ |⟨N_σ⟩ - N_σ|`.
    pub filling_error: f64,
    /// Davidson eigenvalue at the final center.
    pub final_eigenvalue: f64,
    pub state: Mps,
}

impl RunResult {
    pub fn energy_trace(&self) -> Vec<f64> {
        self.sweeps.iter().map(|s| s.energy_per_site).collect()
    }
}

pub fn run_ground_state(lattice: &Lattice, params: &ModelParams, cfg: &DmrgConfig) -> Result<RunResult, DmrgError> {
    run_ground_state_with(lattice, params, cfg, |_| {})
}

/// Same as [`run_ground_state`], calling `on_sweep` after every full sweep.
pub fn run_ground_state_with(
    lattice: &Lattice,
    params: &ModelParams,
    cfg: &DmrgConfig,
    mut on_sweep: impl FnMut(&SweepSummary),
) -> Result<RunResult, DmrgError> {
    cfg.validate()?;
    params.validate(lattice)?;
    let n = lattice.n_sites();
    let full = build_mpo(&assemble(lattice, params), lattice)?.numeric;
    let tc = build_mpo(&tc_hubbard(lattice, params), lattice)?.numeric;
    let n_up_mpo = build_mpo(&total_number(lattice, Spin::Up), lattice)?.numeric;
    let n_down_mpo = build_mpo(&total_number(lattice, Spin::Down), lattice)?.numeric;

    let mut state = random_mps(lattice, cfg.m, cfg.seed);
    let mut envs = Environments::new(&state, &full)?;
    let settings = SweepSettings {
        m: cfg.m,
        davidson: cfg.davidson(),
    };
    let mut sweeps: Vec<SweepSummary> = Vec::new();
    let mut energy_converged = false;
    for sweep in 1..=cfg.max_sweeps {
        let a = two_site_sweep(&mut state, &full, &mut envs, &settings, Direction::LeftToRight)?;
        let b = two_site_sweep(&mut state, &full, &mut envs, &settings, Direction::RightToLeft)?;
        let e = expectation(&state, &tc)?;
        let summary = SweepSummary {
            sweep,
            energy_total: e,
            energy_per_site: e / n as f64,
            eigenvalue: b.eigenvalue,
            max_bond: state.max_bond(),
            discarded_weight: a.discarded_weight + b.discarded_weight,
            n_up: expectation(&state, &n_up_mpo)?,
            n_down: expectation(&state, &n_down_mpo)?,
            max_residual: a.max_residual.max(b.max_residual),
            unconverged_pairs: a.unconverged_pairs + b.unconverged_pairs,
        };
        on_sweep(&summary);
        let settled = sweeps
            .last()
            .is_some_and(|prev: &SweepSummary| (e - prev.energy_total).abs() <= cfg.energy_tol * e.abs());
        sweeps.push(summary);
        if settled {
            energy_converged = true;
            break;
        }
    }
    let last = sweeps.last().expect("at least one sweep").clone();
    let filling_error = (last.n_up - params.n_alpha as f64)
        .abs()
        .max((last.n_down - params.n_beta as f64).abs());
    Ok(RunResult {
        energy_total: last.energy_total,
        energy_per_site: last.energy_per_site,
        bond_dims: state.bond_dims(),
        n_up: last.n_up,
        n_down: last.n_down,
        converged: energy_converged && filling_error < FILLING_TOL,
        energy_converged,
        filling_error,
        final_eigenvalue: last.eigenvalue,
        sweeps,
        state,
    })
}

/// `⟨ψ|O|ψ⟩` for an operator given as an MPO; re-exported for reports.
pub fn measure(state: &Mps, mpo: &NumericMpo) -> Result<f64, DmrgError> {
    Ok(expectation(state, mpo)?)
}
