//! Two-site DMRG with a Davidson solver that tolerates nonsymmetric
//! effective Hamiltonians.

pub mod davidson;
pub mod run;
pub mod sweep;

pub use run::{run_ground_state, run_ground_state_with, DmrgConfig, DmrgError, RunResult, SweepSummary};
