//! Exact matrix product operators from sums of fermionic products.

pub mod builder;
pub mod graph;
pub mod oracle;

pub use builder::{build_mpo, fh_bound, mpo_stats, tc_bound, BuiltMpo, MpoError, MpoStats, NumericMpo, SymbolicMpo};
