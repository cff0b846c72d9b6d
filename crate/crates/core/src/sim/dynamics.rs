//! Right-hand side of the full nonlinear model.
//!
//! Physical equations (source and bus dynamics, network power flow) always
//! see true values. Corrupted measurements enter only the swing damping and
//! power terms, the governor (when the speed sensor is shared), the exciter
//! error and the converter power terms of the DC link.

use crate::attack::{corrupted_measurements, AttackSpec};
use crate::model::{electrical_power_with, Model, PeMode, PmMode, SystemState, MACHINE_STATE_LEN};

use super::fault::{inject_fault, FaultSpec};
use super::SimError;

/// Algebraic signals produced alongside the derivative.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Derived {
    /// True electrical power per machine.
    pub p_e: Vec<f64>,
    pub p_f: Vec<f64>,
    pub e_f: Vec<f64>,
    /// Effective DC load current after fault multipliers.
    pub i_l: f64,
}

/// Model plus everything that shapes it over time.
#[derive(Debug, Clone)]
pub struct Dynamics<'a> {
    pub model: &'a Model,
    pub attacks: &'a [AttackSpec],
    pub faults: &'a [FaultSpec],
    /// Machines isolated by an opened breaker.
    pub disconnected: Vec<bool>,
}

impl<'a> Dynamics<'a> {
    pub fn new(model: &'a Model, attacks: &'a [AttackSpec]) -> Self {
        Self {
            model,
            attacks,
            faults: &[],
            disconnected: vec![false; model.machine_count()],
        }
    }

    pub fn with_faults(mut self, faults: &'a [FaultSpec]) -> Self {
        self.faults = faults;
        self
    }

    /// Writes `dx/dt` for the packed state into `out`.
    pub fn eval(&self, s: &SystemState, t: f64, out: &mut [f64]) -> Result<Derived, SimError> {
        if !s.is_finite() {
            return Err(SimError::NonfiniteState { t });
        }
        if !(s.v_dc > 0.0) {
            return Err(SimError::NonpositiveVdc { t, v_dc: s.v_dc });
        }
        let model = self.model;
        let conv = &model.converter;
        let n = s.machines.len();
        if n != model.machine_count() {
            return Err(SimError::Dimension {
                expected: model.machine_count(),
                got: n,
            });
        }

        let view = inject_fault(model, self.faults, &self.disconnected, t);
        let p_e = match &model.options.pe_mode {
            PeMode::Network => electrical_power_with(&s.thetas(), &s.internal_voltages(), &view.g, &view.b)?,
            PeMode::Frozen { values } => values.clone(),
        };
        let meas = corrupted_measurements(s, &p_e, self.attacks, t)?;

        let i_od_ref = conv.kp_v * (conv.v_dc_ref - s.v_dc) + conv.ki_v * s.phi_v;
        let i_oq_ref = 0.0;

        let mut derived = Derived {
            p_e: p_e.clone(),
            p_f: Vec::with_capacity(n),
            e_f: Vec::with_capacity(n),
            i_l: s.i_l * view.load_multiplier,
        };
        let mut p_conv = 0.0;

        for (i, ((m, gen), y)) in s.machines.iter().zip(&model.generators).zip(&meas).enumerate() {
            let dx = &mut out[i * MACHINE_STATE_LEN..(i + 1) * MACHINE_STATE_LEN];
            let speed_for_governor = if model.options.shared_sensor {
                y.delta_omega
            } else {
                m.delta_omega
            };
            let v_b_meas = y.bus_voltage();
            let ctrl = crate::model::derived_inputs(m, gen, speed_for_governor, v_b_meas);
            derived.p_f.push(ctrl.p_f);
            derived.e_f.push(ctrl.e_f);

            let w = gen.omega_s + m.delta_omega;
            dx[0] = gen.phi() * m.delta_omega;
            dx[1] = gen.omega_s / (2.0 * gen.h) * (m.p_m - y.p_e - gen.d * y.delta_omega);
            dx[2] = -speed_for_governor;
            dx[3] = gen.v_b_ref - v_b_meas;
            dx[4] = match model.options.pm_mode {
                PmMode::Governor => (ctrl.p_f - m.p_m) / gen.t_m,
                PmMode::Fixed => 0.0,
            };
            dx[5] = (ctrl.e_f - m.v_int) / gen.t_v;

            if self.disconnected[i] {
                dx[6..].fill(0.0);
                continue;
            }

            dx[6] = (-conv.r_s * m.i_sd + w * conv.l_s * m.i_sq - m.v_bd + ctrl.v_sd) / conv.l_s;
            dx[7] = (-w * conv.l_s * m.i_sd - conv.r_s * m.i_sq - m.v_bq + ctrl.v_sq) / conv.l_s;
            dx[8] = (m.i_sd + w * conv.c_s * m.v_bq - m.i_od) / conv.c_s;
            dx[9] = (m.i_sq - w * conv.c_s * m.v_bd - m.i_oq) / conv.c_s;
            // Current-controller outputs (the converter-side voltage references).
            let u_d = conv.kpd_i * (i_od_ref - m.i_od) + conv.kid_i * m.phi_d;
            let u_q = conv.kpq_i * (i_oq_ref - m.i_oq) + conv.kiq_i * m.phi_q;
            dx[10] = (-conv.r_f * m.i_od + u_d) / conv.l_f;
            dx[11] = (-conv.r_f * m.i_oq + u_q) / conv.l_f;
            dx[12] = i_od_ref - m.i_od;
            dx[13] = i_oq_ref - m.i_oq;

            p_conv += 1.5 * (m.i_od * (y.v_bd - u_d) + m.i_oq * (y.v_bq - u_q));
        }

        let base = n * MACHINE_STATE_LEN;
        out[base] = conv.v_dc_ref - s.v_dc;
        out[base + 1] = (model.dc_units.power_scale() * p_conv - s.v_dc * derived.i_l) / (conv.c_dc * s.v_dc);
        Ok(derived)
    }
}

/// Time derivative of every integrated state component, returned in the
/// shape of a [`SystemState`] (its `t` and `i_l` fields are `1` and `0`).
pub fn state_derivative(
    state: &SystemState,
    model: &Model,
    attacks: &[AttackSpec],
    t: f64,
) -> Result<SystemState, SimError> {
    let mut out = vec![0.0; state.dim()];
    Dynamics::new(model, attacks).eval(state, t, &mut out)?;
    Ok(SystemState::from_vector(&out, 1.0, 0.0))
}
