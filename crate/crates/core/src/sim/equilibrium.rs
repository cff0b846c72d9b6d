//! Steady operating point of the unattacked model.

use nalgebra::{DMatrix, DVector};

use crate::model::{MachineState, Model, SystemState, MACHINE_STATE_LEN};

use super::{Dynamics, SimError};

/// Largest derivative component accepted at an equilibrium.
pub const EQUILIBRIUM_TOL: f64 = 1e-9;

const MAX_ITERATIONS: usize = 500;

/// Machine-state slots solved for by Newton; the mechanical slots
/// (`theta`, `delta_omega`, `x_gov`, `p_m`) follow in closed form.
const SOLVED_SLOTS: [usize; 10] = [3, 5, 6, 7, 8, 9, 10, 11, 12, 13];

/// Equilibrium with every rotor angle at zero and DC load current `i_l`.
pub fn find_equilibrium(model: &Model, i_l: f64) -> Result<SystemState, SimError> {
    find_equilibrium_at(model, i_l, &vec![0.0; model.machine_count()])
}

/// Equilibrium with the rotor angles held at `thetas`.
pub fn find_equilibrium_at(model: &Model, i_l: f64, thetas: &[f64]) -> Result<SystemState, SimError> {
    let n = model.machine_count();
    if thetas.len() != n {
        return Err(SimError::Dimension {
            expected: n,
            got: thetas.len(),
        });
    }
    let conv = &model.converter;
    let scale = model.dc_units.power_scale();
    let machines: Vec<MachineState> = model
        .generators
        .iter()
        .zip(thetas)
        .map(|(g, &theta)| {
            let i_od = i_l * conv.v_dc_ref / (1.5 * n as f64 * g.v_b_ref * scale);
            MachineState {
                theta,
                x_exc: g.v_b_ref / g.ki_exc,
                v_int: g.v_b_ref,
                i_sd: i_od,
                v_bd: g.v_b_ref,
                i_od,
                phi_d: conv.r_f * i_od / conv.kid_i,
                ..MachineState::default()
            }
        })
        .collect();
    let i_od0 = machines.first().map_or(0.0, |m| m.i_od);
    let mut state = SystemState {
        t: 0.0,
        machines,
        phi_v: i_od0 / conv.ki_v,
        v_dc: conv.v_dc_ref,
        i_l,
    };

    let dyns = Dynamics::new(model, &[]);
    let dim = state.dim();
    let unknowns = n * SOLVED_SLOTS.len() + 2;
    let index_of = |k: usize| -> usize {
        if k < n * SOLVED_SLOTS.len() {
            (k / SOLVED_SLOTS.len()) * MACHINE_STATE_LEN + SOLVED_SLOTS[k % SOLVED_SLOTS.len()]
        } else {
            n * MACHINE_STATE_LEN + (k - n * SOLVED_SLOTS.len())
        }
    };

    // Completes the mechanical slots from the electrical ones and returns the
    // full derivative.
    let residual = |x: &mut Vec<f64>| -> Result<Vec<f64>, SimError> {
        let mut s = SystemState::from_vector(x, 0.0, i_l);
        let mut out = vec![0.0; dim];
        let derived = dyns.eval(&s, 0.0, &mut out)?;
        for (i, (m, g)) in s.machines.iter_mut().zip(&model.generators).enumerate() {
            m.delta_omega = 0.0;
            m.p_m = derived.p_e[i];
            m.x_gov = m.p_m / g.ki_gov;
        }
        *x = s.to_vector();
        dyns.eval(&s, 0.0, &mut out)?;
        Ok(out)
    };
    let reduced = |full: &[f64]| -> DVector<f64> { DVector::from_fn(unknowns, |k, _| full[index_of(k)]) };
    let max_abs = |v: &[f64]| v.iter().fold(0.0_f64, |a, b| a.max(b.abs()));

    let mut x = state.to_vector();
    let mut f_full = residual(&mut x)?;
    let mut norm = max_abs(&f_full);
    let mut iterations = 0;
    while norm > 0.1 * EQUILIBRIUM_TOL && iterations < MAX_ITERATIONS {
        iterations += 1;
        let f = reduced(&f_full);
        let mut jac = DMatrix::zeros(unknowns, unknowns);
        for k in 0..unknowns {
            let j = index_of(k);
            let h = 1e-7 * x[j].abs().max(1.0);
            let mut xp = x.clone();
            xp[j] += h;
            let fp = reduced(&residual(&mut xp)?);
            jac.set_column(k, &((fp - &f) / h));
        }
        let Some(delta) = jac.lu().solve(&(-&f)) else {
            break;
        };
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let mut trial = x.clone();
            for k in 0..unknowns {
                trial[index_of(k)] += step * delta[k];
            }
            if let Ok(ft) = residual(&mut trial) {
                let nt = max_abs(&ft);
                if nt.is_finite() && nt < norm {
                    x = trial;
                    f_full = ft;
                    norm = nt;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if !(norm <= EQUILIBRIUM_TOL) {
        return Err(SimError::NoConvergence {
            iterations,
            residual: norm,
        });
    }
    state = SystemState::from_vector(&x, 0.0, i_l);
    Ok(state)
}
