//! Domains of attraction and transient-stability metrics for systems of two
//! inverter-based resources connected to an infinite bus.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, the command line
//! and parallel sweeps live in the `inverter-doa` crate.

#![no_std]

extern crate alloc;

pub mod dynamics;
pub mod equilibria;
pub mod error;
pub mod linalg;
pub mod manifold;
pub mod metrics;
pub mod network;
pub mod pipeline;

pub use dynamics::{
    integrate, integrate_with, Crossing, Direction, Event, IntegratorSettings, Method, Model,
    RhsMode, Run, State2, State4, Termination, Trajectory, VectorField,
};
pub use equilibria::{energy_function, find_equilibria, EnergyFunction, Equilibrium, EquilibriumKind};
pub use error::{Error, Result};
pub use manifold::{assemble_doa, detect_limit_cycle, trace_stable_manifolds, DoaBoundary, LimitCycle, ManifoldBranch};
pub use network::{
    apply_fault, derive_impedances, to_generalized, Combination, DerivedImpedances, FaultKind, FaultSpec,
    GeneralizedCoefficients, InverterConfig, InverterKind, NetworkParams, TwoInverterSystem,
};
