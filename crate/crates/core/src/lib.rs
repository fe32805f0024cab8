//! Simulation and verification of weak and joint weak measurements with
//! finite-dimensional pointers.
//!
//! The pipeline is: build a [`Scenario`], evolve system and pointers exactly
//! under the impulsive coupling, post-select the system, then compare weak
//! values extracted from pointer statistics against the analytic oracle.

pub mod catalog;
pub mod error;
pub mod evolution;
pub mod harness;
pub mod pointer;
pub mod scenario;
pub mod tensor;
pub mod weak;

pub use error::{Result, Violation, ViolationKind, WeakError};
pub use evolution::{evolve_exact, post_select, CompositeState, PostSelectionResult};
pub use harness::{
    run_experiment, sweep_lambda, RunOptions, SampleSet, SweepResult, WeakValueReport,
};
pub use pointer::{FockPointerSpec, PointerSpec, SpinPointerSpec};
pub use scenario::{load_scenario, parse_scenario, scenario_to_json, Scenario};
pub use tensor::{FactorLayout, Operator, StateVector};
pub use weak::{
    analytic_weak_value, correlator_decomposition, extract_joint_fock, extract_joint_spin,
    pointer_shift_check, strong_position_estimate, symmetrized_joint_weak_value, CorrelatorTable,
};
