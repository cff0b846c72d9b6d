//! Generalized false-data-injection model `x̂ = x + α·x + β(t) + γ` and its
//! application to the measurement channels consumed by the controllers.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::SystemState;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AttackError {
    #[error("attacks #{first} and #{second} both corrupt {target} of machine {machine} at t = {t}")]
    OverlappingAttacks {
        first: usize,
        second: usize,
        target: AttackTarget,
        machine: usize,
        t: f64,
    },
}

/// Measurement channel an attack corrupts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackTarget {
    /// Δω̂ consumed by swing damping and, with a shared sensor, the governor.
    RotorSpeedDeviation,
    /// P̂_e consumed by the swing update.
    ElectricalPower,
    /// v̂_bd consumed by the exciter and the converter power terms.
    BusVoltageD,
    /// v̂_bq consumed by the exciter and the converter power terms.
    BusVoltageQ,
}

impl fmt::Display for AttackTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            AttackTarget::RotorSpeedDeviation => "rotor_speed_deviation",
            AttackTarget::ElectricalPower => "electrical_power",
            AttackTarget::BusVoltageD => "bus_voltage_d",
            AttackTarget::BusVoltageQ => "bus_voltage_q",
        };
        f.write_str(s)
    }
}

/// Time-varying injection β, evaluated on the time elapsed since attack onset.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TimeVaryingTerm {
    #[default]
    Zero,
    Ramp {
        slope: f64,
    },
    Sinusoid {
        amplitude: f64,
        frequency: f64,
        phase: f64,
    },
}

impl TimeVaryingTerm {
    pub fn eval(&self, elapsed: f64) -> f64 {
        match *self {
            TimeVaryingTerm::Zero => 0.0,
            TimeVaryingTerm::Ramp { slope } => slope * elapsed,
            TimeVaryingTerm::Sinusoid {
                amplitude,
                frequency,
                phase,
            } => amplitude * (2.0 * PI * frequency * elapsed + phase).sin(),
        }
    }

    pub fn is_zero(&self) -> bool {
        match *self {
            TimeVaryingTerm::Zero => true,
            TimeVaryingTerm::Ramp { slope } => slope == 0.0,
            TimeVaryingTerm::Sinusoid { amplitude, .. } => amplitude == 0.0,
        }
    }

    /// The same waveform with every coefficient multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        match *self {
            TimeVaryingTerm::Zero => TimeVaryingTerm::Zero,
            TimeVaryingTerm::Ramp { slope } => TimeVaryingTerm::Ramp { slope: k * slope },
            TimeVaryingTerm::Sinusoid {
                amplitude,
                frequency,
                phase,
            } => TimeVaryingTerm::Sinusoid {
                amplitude: k * amplitude,
                frequency,
                phase,
            },
        }
    }
}

/// Half-open activity window `[start, end)`; `end` may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub start: f64,
    #[serde(default = "infinity")]
    pub end: f64,
}

fn infinity() -> f64 {
    f64::INFINITY
}

impl Window {
    pub fn new(start: f64, end: f64) -> Self {
        Self { start, end }
    }

    pub fn from(start: f64) -> Self {
        Self {
            start,
            end: f64::INFINITY,
        }
    }

    pub fn contains(&self, t: f64) -> bool {
        self.start <= t && t < self.end
    }

    pub fn overlaps(&self, other: &Window) -> bool {
        self.start < other.end && other.start < self.end
    }

    pub fn is_valid(&self) -> bool {
        self.start < self.end && !self.start.is_nan()
    }
}

/// One false-data injection on one measurement channel of one machine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackSpec {
    pub target: AttackTarget,
    pub machine: usize,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default)]
    pub gamma: f64,
    #[serde(default)]
    pub beta: TimeVaryingTerm,
    pub window: Window,
}

impl AttackSpec {
    pub fn new(target: AttackTarget, machine: usize, window: Window) -> Self {
        Self {
            target,
            machine,
            alpha: 0.0,
            gamma: 0.0,
            beta: TimeVaryingTerm::Zero,
            window,
        }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_beta(mut self, beta: TimeVaryingTerm) -> Self {
        self.beta = beta;
        self
    }

    /// Injected error χ(t) for a true value `x`, ignoring the window.
    pub fn injection(&self, x: f64, t: f64) -> f64 {
        self.alpha * x + self.beta.eval(t - self.window.start) + self.gamma
    }
}

/// Corrupted value of `true_value` at time `t`; identity outside the window.
pub fn apply_fdia(true_value: f64, spec: &AttackSpec, t: f64) -> f64 {
    if spec.window.contains(t) {
        true_value + spec.injection(true_value, t)
    } else {
        true_value
    }
}

/// Measurements of one machine as delivered to its controllers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub delta_omega: f64,
    pub p_e: f64,
    pub v_bd: f64,
    pub v_bq: f64,
}

impl Measurement {
    pub fn bus_voltage(&self) -> f64 {
        self.v_bd.hypot(self.v_bq)
    }
}

pub type MeasurementSet = Vec<Measurement>;

/// Rejects specs that corrupt the same channel over overlapping windows.
pub fn check_overlaps(attacks: &[AttackSpec]) -> Result<(), AttackError> {
    for (i, a) in attacks.iter().enumerate() {
        for (j, b) in attacks.iter().enumerate().skip(i + 1) {
            if a.target == b.target && a.machine == b.machine && a.window.overlaps(&b.window) {
                return Err(AttackError::OverlappingAttacks {
                    first: i,
                    second: j,
                    target: a.target,
                    machine: a.machine,
                    t: a.window.start.max(b.window.start),
                });
            }
        }
    }
    Ok(())
}

/// Applies every attack active at `t` to the true measurements.
///
/// `p_e` holds the true electrical power of each machine; the remaining
/// channels are read from `state`.
pub fn corrupted_measurements(
    state: &SystemState,
    p_e: &[f64],
    attacks: &[AttackSpec],
    t: f64,
) -> Result<MeasurementSet, AttackError> {
    let mut out: MeasurementSet = state
        .machines
        .iter()
        .zip(p_e)
        .map(|(m, &p)| Measurement {
            delta_omega: m.delta_omega,
            p_e: p,
            v_bd: m.v_bd,
            v_bq: m.v_bq,
        })
        .collect();
    let mut owner: Vec<[Option<usize>; 4]> = vec![[None; 4]; out.len()];

    for (k, spec) in attacks.iter().enumerate() {
        if !spec.window.contains(t) {
            continue;
        }
        let Some(meas) = out.get_mut(spec.machine) else {
            continue;
        };
        let slot = &mut owner[spec.machine][spec.target as usize];
        if let Some(first) = *slot {
            return Err(AttackError::OverlappingAttacks {
                first,
                second: k,
                target: spec.target,
                machine: spec.machine,
                t,
            });
        }
        *slot = Some(k);
        let channel = match spec.target {
            AttackTarget::RotorSpeedDeviation => &mut meas.delta_omega,
            AttackTarget::ElectricalPower => &mut meas.p_e,
            AttackTarget::BusVoltageD => &mut meas.v_bd,
            AttackTarget::BusVoltageQ => &mut meas.v_bq,
        };
        *channel = apply_fdia(*channel, spec, t);
    }
    Ok(out)
}
