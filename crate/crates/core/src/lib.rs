//! QUBO encodings of time-scheduled vehicle routing problems, with
//! exhaustive and annealing samplers and an independent route oracle.

pub mod generate;
pub mod hamiltonian;
pub mod instance;
pub mod qubo;
pub mod sampler;
pub mod route;
