//! Reaction–diffusion model of within-host HCV dynamics with a saturating
//! four-parameter incidence: thresholds, equilibria, linear stability,
//! a method-of-lines solver and Lyapunov diagnostics.

pub mod checks;
pub mod equilibria;
pub mod error;
pub mod lyapunov;
pub mod model;
pub mod monitors;
pub mod run;
pub mod scenario;
pub mod solver;
pub mod stability;
pub mod sweep;

pub use equilibria::{EquilibriumReport, InfectedEquilibrium};
pub use error::{Error, ErrorCategory, Result};
pub use model::{DerivedQuantities, InitialBounds, ModelParams, PointState};
pub use monitors::MonitorKind;
pub use run::{run_scenario, RunReport};
pub use scenario::{InitialCondition, Profile, Scenario};
pub use solver::{FieldState, Grid1D, SolverConfig, TimeStep, Trajectory};
pub use stability::{StabilityReport, Verdict};
