//! Simulation and exact finite-size analysis of the simple exclusion process on a segment
//! with open boundaries, together with the half-line and integer-line variants used to
//! study its mixing times.

pub mod engine;
pub mod exact;
pub mod harness;
pub mod lattice;
pub mod observables;
pub mod params;
pub mod seed;

pub use lattice::{Configuration, Dominance, HeightProfile, Label, MultiSpeciesConfiguration, SecondType, Topology};
pub use params::{BoundaryParams, Phase, PhaseDescriptor};
