//! Time-periodic two-species competition with random (Laplacian) and
//! nonlocal (convolution) dispersal.
//!
//! The crate computes principal spectrum points of periodic linear problems,
//! semitrivial and coexistence periodic states, theoretical and empirical
//! spreading speeds, and checks the comparison and super-solution
//! constructions that underpin them on a truncated 1-D domain.

pub mod coefficients;
pub mod dispersal;
pub mod error;
pub mod export;
pub mod ode;
pub mod periodic_orbits;
pub mod semitrivial;
pub mod simulator;
pub mod spectrum;
pub mod spreading;
mod stepping;
pub mod verify;

pub use coefficients::{
    check_h0, check_h1, check_h2, check_lv_determinacy, compute_envelopes, Coef, CoefficientField,
    CoefficientSet, EnvelopeTable, HypothesisVerdict, PeriodicScalar, Profile, SpatialBump,
};
pub use dispersal::{Dispersal, Grid, Kernel, KernelShape};
pub use error::{Error, ErrorKind, Result};
pub use periodic_orbits::PeriodicOrbit;
pub use semitrivial::{PeriodicField, Species};
pub use simulator::{SchemeConfig, StepMode, SystemState};
pub use spreading::{SpeedEstimate, SpeedKind};
pub use spectrum::{LinearProblem, SpectrumResult};

