//! Exact diagonalization for small lattices of multiple distinguishable
//! fermion species, restricted to fixed per-species particle-number sectors.
//!
//! The crate covers the full pipeline: model declaration ([`model`]), sector
//! basis enumeration ([`fock`]), sparse operator assembly ([`operators`]),
//! spectral time evolution and protocols ([`dynamics`]), mode-resolved
//! entanglement diagnostics ([`entanglement`]), microcanonical reference
//! ensembles ([`ensemble`]), and reproducible experiment drivers with a CLI
//! ([`experiments`]).

pub mod diagnostics;
pub mod dynamics;
pub mod ensemble;
pub mod entanglement;
pub mod experiments;
pub mod fock;
pub mod model;
pub mod operators;

pub use num_complex::Complex64;
