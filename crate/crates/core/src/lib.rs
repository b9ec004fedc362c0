//! Adaptive fuzzy backstepping control for pure-feedback systems with input
//! delay and full state constraints: plant models, fuzzy basis, controller
//! laws, closed-loop simulation and gain feasibility search.

pub mod controller;
pub mod error;
pub mod feasibility;
pub mod fls;
pub mod plant;
pub mod reference;
pub mod sim;

pub use controller::{AdaptiveState, ControlOutput, ControlPass, Controller, ControllerGains};
pub use error::{Error, Result};
pub use fls::{make_grid_basis, FuzzyBasis, Regressor};
pub use plant::{delay_depth, example_plant, null_plant, DelayLine, PlantModel};
pub use reference::ReferenceSignal;
pub use sim::{
    check_constraints, lyapunov_surrogate, simulate, ConstraintReport, SimConfig, Trajectory,
};
