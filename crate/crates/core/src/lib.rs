//! Ground states of the transcorrelated Fermi-Hubbard model.
//!
//! The pipeline is: build a [`lattice::Lattice`], write the Hamiltonian as a
//! sum of fermionic products ([`hamiltonian`]), compile it into a matrix
//! product operator ([`mpo`]), and optimize a matrix product state against it
//! with two-site DMRG ([`dmrg`]). [`ed`] diagonalizes small sectors exactly
//! and is used to check everything else.

pub mod numerics;
pub mod lattice;
pub mod fermion;
pub mod hamiltonian;
pub mod ed;
pub mod dmrg;
pub mod mpo;
pub mod mps;
