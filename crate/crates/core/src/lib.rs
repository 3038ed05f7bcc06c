//! Single-excitation cavity-QED models of molecular chains.
//!
//! The crate builds the Hamiltonians of the Jaynes–Cummings and
//! Tavis–Cummings families in the one-excitation manifold
//! `{|G,1⟩, |e_k,0⟩}`, adds transition dipole–dipole (Kasha–Frenkel)
//! couplings between neighboring emitters, diagonalizes the result and
//! classifies the polariton branches.
//!
//! Energies are in Hartree, lengths in bohr and dipoles in atomic units
//! unless a name says otherwise (`_ev`, `_angstrom`).

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod config;
pub mod disorder;
pub mod eig;
pub mod error;
pub mod geometry;
pub mod model;
pub mod output;
pub mod units;

pub use error::{Error, Result};
