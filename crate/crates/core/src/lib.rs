//! Reduced-basis boundary method for steady drift-diffusion problems with
//! non-linear reactive boundary conditions, discretized by a Voronoi
//! finite-volume scheme with exponential-fitting fluxes.
//!
//! The pieces, bottom-up:
//!
//! - [`mesh`]: tensor-product channel grids, boundary tags, catalytic nodes.
//! - [`operator`]: the assembled and factorized transport operator.
//! - [`kinetics`]: boundary rate laws and stoichiometry.
//! - [`reduced`]: offline basis computation and the online collocation solve.
//! - [`reference`]: the fully coupled Newton solver used as oracle.
//! - [`scenario`]: configuration, timing, sweeps and CSV output.

pub mod error;
pub mod kinetics;
pub mod mesh;
pub mod operator;
pub mod reduced;
pub mod reference;
pub mod scenario;
pub mod settings;
pub mod sparse;

pub use error::{Error, Result};
pub use kinetics::{MassAction, RateLaw, ReactionModel};
pub use mesh::{BoundaryLayout, CatalyticIndex, CatalyticSpan, ChannelGrid, Region, Side};
pub use operator::{bernoulli, FluxBalance, TransportOperator, VelocityField};
pub use reduced::{BasisHeader, OfflineOptions, ReducedBasis, ReducedSolution};
pub use reference::{global_solve, GlobalSolution};
pub use scenario::{Mode, ScenarioConfig, SolveReport};
pub use settings::SolverSettings;
