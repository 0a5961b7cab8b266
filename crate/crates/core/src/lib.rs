//! Classical harmonic-oscillator lattices with bounded pair interactions.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`]: sites, masses, force constants, pair potentials, assumption checks and mollification.
//! * [`phase_space`]: finite-support states, projections and the S/T splitting of equal-frequency blocks.
//! * [`dynamics`]: closed-form free flow, Strang splitting, an adaptive RK oracle and flow-comparison tools.
//! * [`observables`]: levees, resolvents, Poisson brackets, pullbacks and sampled sup-norms.
//! * [`dyson`]: interaction-picture propagation and its truncated Dyson series.
//! * [`thermo`]: Cauchy gaps along region nets and strong-continuity profiles.
//!
//! Heavy sampling loops run on rayon when the `parallel` feature is enabled.

pub mod dynamics;
pub mod dyson;
pub mod error;
pub mod jet;
pub mod model;
pub mod observables;
pub mod par;
pub mod phase_space;
pub mod quadrature;
pub mod thermo;

pub use error::{Error, Result};
pub use model::{LatticeModel, Pair, PairSet, PotentialSpec, Region, Site};
pub use phase_space::State;

/// Library version, embedded in experiment manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
