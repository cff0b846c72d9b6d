//! Transient impact of false-data-injection attacks on the governors and
//! exciters of power generation modules in an MVDC shipboard power system.
//!
//! The crate pairs closed-form rotor-speed / rotor-angle solutions
//! ([`analytic`]) with a nonlinear time-domain simulation ([`sim`]) and a
//! protection-relay model ([`protection`]), driven by declarative scenario
//! files ([`scenario`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod attack;
pub mod model;
pub mod protection;
pub mod quadrature;
pub mod scenario;
pub mod sim;

pub use analytic::{
    case_steady_state, dc_attack_increment, delta_omega_closed_form, lambda_coefficients, omega_from_vdc,
    theta_closed_form, LambdaCoefficients, TransientSolution,
};
pub use attack::{apply_fdia, corrupted_measurements, AttackSpec, AttackTarget, TimeVaryingTerm, Window};
pub use model::{electrical_power, validate_model, ConverterParams, GeneratorParams, Model, NetworkModel, SystemState};
pub use protection::{evaluate_relays, phase_portrait, rocof_estimate, RelayConfig, TripEvent};
pub use sim::{find_equilibrium, simulate, state_derivative, IntegratorConfig, TimeSeries};
