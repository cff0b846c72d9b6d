//! Fixed-step time-domain simulation of the full nonlinear model.

mod dynamics;
mod equilibrium;
mod fault;
mod series;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attack::{AttackError, AttackSpec};
use crate::model::{Model, ModelError, SystemState};

pub use dynamics::{state_derivative, Derived, Dynamics};
pub use equilibrium::{find_equilibrium, find_equilibrium_at, EQUILIBRIUM_TOL};
pub use fault::{inject_fault, FaultSpec, OperatingView};
pub use series::{column_name, fmt_f64, SeriesMeta, TimeSeries};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("V_DC = {v_dc} is not positive at t = {t} s")]
    NonpositiveVdc { t: f64, v_dc: f64 },
    #[error("non-finite state at t = {t} s")]
    NonfiniteState { t: f64 },
    #[error("state has {got} machines, model has {expected}")]
    Dimension { expected: usize, got: usize },
    #[error(transparent)]
    Attack(#[from] AttackError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("equilibrium search did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("invalid integrator configuration: {0}")]
    Config(String),
}

impl SimError {
    /// Timestamp of the failure, when the error is tied to one.
    pub fn time(&self) -> Option<f64> {
        match self {
            SimError::NonpositiveVdc { t, .. } | SimError::NonfiniteState { t } => Some(*t),
            SimError::Attack(AttackError::OverlappingAttacks { t, .. }) => Some(*t),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Rk4,
    Euler,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    #[serde(default)]
    pub method: Method,
    pub dt: f64,
    /// Absolute end time (s).
    pub t_end: f64,
    #[serde(default = "one")]
    pub record_every: usize,
}

fn one() -> usize {
    1
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            method: Method::Rk4,
            dt: 1e-4,
            t_end: 10.0,
            record_every: 1,
        }
    }
}

impl IntegratorConfig {
    pub fn rk4(dt: f64, t_end: f64) -> Self {
        Self {
            method: Method::Rk4,
            dt,
            t_end,
            record_every: 1,
        }
    }

    pub fn recording_every(mut self, k: usize) -> Self {
        self.record_every = k;
        self
    }

    pub fn validate(&self) -> Result<(), SimError> {
        match self.first_problem() {
            Some((_, message)) => Err(SimError::Config(message)),
            None => Ok(()),
        }
    }

    /// The first invalid field and a description of the problem.
    pub fn first_problem(&self) -> Option<(&'static str, String)> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Some(("dt", format!("dt = {} must be positive", self.dt)));
        }
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return Some(("t_end", format!("t_end = {} must be positive", self.t_end)));
        }
        if self.record_every == 0 {
            return Some(("record_every", "record_every must be at least 1".into()));
        }
        None
    }

    /// Steps from `t0` to `t_end`, rounding to the nearest whole step.
    pub fn steps_from(&self, t0: f64) -> usize {
        ((self.t_end - t0) / self.dt).round().max(0.0) as usize
    }
}

/// Integrates the model under `attacks` from `initial` to `integ.t_end`.
pub fn simulate(
    initial: &SystemState,
    model: &Model,
    attacks: &[AttackSpec],
    integ: &IntegratorConfig,
) -> Result<TimeSeries, SimError> {
    simulate_dynamics(initial, &Dynamics::new(model, attacks), integ)
}

/// [`simulate`] with faults and breaker state supplied through `dyns`.
pub fn simulate_dynamics(
    initial: &SystemState,
    dyns: &Dynamics<'_>,
    integ: &IntegratorConfig,
) -> Result<TimeSeries, SimError> {
    integ.validate()?;
    let model = dyns.model;
    if initial.machines.len() != model.machine_count() {
        return Err(SimError::Dimension {
            expected: model.machine_count(),
            got: initial.machines.len(),
        });
    }
    if !initial.is_finite() {
        return Err(SimError::NonfiniteState { t: initial.t });
    }

    let t0 = initial.t;
    let i_l = initial.i_l;
    let steps = integ.steps_from(t0);
    let dim = initial.dim();
    let mut series = TimeSeries::for_model(model);

    let mut x = initial.to_vector();
    let mut k1 = vec![0.0; dim];
    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let mut tmp = vec![0.0; dim];

    let rhs = |x: &[f64], t: f64, out: &mut [f64]| -> Result<Derived, SimError> {
        dyns.eval(&SystemState::from_vector(x, t, i_l), t, out)
    };

    for step in 0..=steps {
        let t = t0 + step as f64 * integ.dt;
        let derived = rhs(&x, t, &mut k1)?;
        if step % integ.record_every == 0 || step == steps {
            series.push(t, &x, &k1, &derived, model);
        }
        if step == steps {
            break;
        }
        let h = integ.dt;
        match integ.method {
            Method::Euler => {
                for j in 0..dim {
                    x[j] += h * k1[j];
                }
            }
            Method::Rk4 => {
                for j in 0..dim {
                    tmp[j] = x[j] + 0.5 * h * k1[j];
                }
                rhs(&tmp, t + 0.5 * h, &mut k2)?;
                for j in 0..dim {
                    tmp[j] = x[j] + 0.5 * h * k2[j];
                }
                rhs(&tmp, t + 0.5 * h, &mut k3)?;
                for j in 0..dim {
                    tmp[j] = x[j] + h * k3[j];
                }
                rhs(&tmp, t + h, &mut k4)?;
                for j in 0..dim {
                    x[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
                }
            }
        }
        let t_next = t0 + (step + 1) as f64 * integ.dt;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(SimError::NonfiniteState { t: t_next });
        }
        let v_dc = x[x.len() - 1];
        if !(v_dc > 0.0) {
            return Err(SimError::NonpositiveVdc { t: t_next, v_dc });
        }
    }
    Ok(series)
}
