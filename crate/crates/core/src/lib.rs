//! Absolutely continuous curves of measures on finite metric measure spaces.
//!
//! The crate builds finite metric measure spaces, solves quadratic optimal
//! transport exactly, and extracts the linear operators that drive a curve of
//! measures through the continuity equation `d/dt ∫f dμ_t = L_t(f)`. On top of
//! that it provides the Hopf-Lax semigroup, a discrete heat flow, displacement
//! interpolation on grids, plans on path space, and verifiers that check the
//! inequalities linking all of them numerically.
//!
//! Modules map onto the main objects:
//!
//! * [`space`]: spaces, probability measures and couplings, plus [`generate`].
//! * [`calculus`]: gradient moduli, seminorms, `D±f(∇g)` and dual norms.
//! * [`transport`]: exact W₂, optimal couplings and Kantorovich potentials.
//! * [`hopflax`]: the Hopf-Lax semigroup `Q_t`.
//! * [`curves`]: sampled curves, metric speed, continuity-equation operators.
//! * [`paths`]: plans on path space, liftings, plans representing gradients.
//! * [`heatflow`]: implicit Euler gradient flow of the Cheeger energy.
//! * [`geodesics`]: displacement interpolation and its potentials.
//! * [`report`] and [`suite`]: verification records and the built-in suites.

pub mod calculus;
pub mod config;
pub mod curves;
mod error;
pub mod generate;
pub mod geodesics;
pub mod heatflow;
pub mod hopflax;
mod linalg;
pub mod paths;
pub mod report;
pub mod space;
pub mod suite;
pub mod transport;

pub use calculus::{CalculusKind, Functional, GradField};
pub use config::Tolerances;
pub use curves::{CurveSample, OperatorSample};
pub use error::{Error, Result};
pub use generate::SpaceSpec;
pub use geodesics::GeodesicBundle;
pub use heatflow::HeatTrajectory;
pub use hopflax::HlTrajectory;
pub use paths::Plan;
pub use report::{Check, VerificationReport};
pub use space::{Coupling, ProbMeasure, Space};
pub use transport::{OtResult, Potential};
