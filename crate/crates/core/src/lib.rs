//! Causal orders, categories of slices, and causal field theories over them.
//!
//! The crate is organised bottom-up:
//!
//! * [`order`] holds finite explicit orders and the implicit diamond lattice,
//!   together with domains of dependence, diamonds, regions and order morphisms.
//! * [`slices`] holds antichains, slice categories, Cauchy slices and foliations.
//! * [`process`] is the field category: quantum channels and stochastic maps
//!   represented as lazy kernel programs.
//! * [`field_theory`] checks functor, monoidality, environment, presheaf and
//!   reversal laws of a field theory.
//! * [`cca`] builds the partitioned causal cellular automaton on the diamond
//!   lattice, its reversal, lattice symmetries, and the Dirac scattering map.
//! * [`io`] reads and writes the JSON interchange formats.

pub mod cca;
pub mod field_theory;
pub mod io;
pub mod order;
pub mod process;
pub mod report;
pub mod slices;

pub use order::{CausalOrder, DiamondLattice, EventId, FiniteOrder, LatticePoint, Window};
pub use process::{Backend, ProcMorphism, ProcObject, ProcState};
pub use report::{Report, Violation};
pub use slices::Slice;

/// Tolerance used by validity predicates (unitarity, normalisation, law checks).
pub const VALIDITY_TOL: f64 = 1e-10;

/// Tolerance used when comparing against independent oracles.
pub const ORACLE_TOL: f64 = 1e-12;
