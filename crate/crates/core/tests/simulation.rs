mod common;

use mvdc_fdia_core::analytic::{BusSnapshot, BusVoltageAttack};
use mvdc_fdia_core::sim::{simulate_dynamics, Dynamics, FaultSpec, SimError};
use mvdc_fdia_core::{
    dc_attack_increment, find_equilibrium, simulate, state_derivative, AttackSpec, AttackTarget, IntegratorConfig,
    Model, TimeVaryingTerm, Window,
};

use common::*;

#[test]
fn swing_derivative_from_power_mismatch() {
    let model = linear_benchmark();
    let mut s = start(&model, &[0.0]);
    s.machines[0].p_m = 0.9;
    let d = state_derivative(&s, &model, &[], 0.0).unwrap();
    assert!((d.machines[0].delta_omega - 0.1 / 6.0).abs() < 1e-12);
}

#[test]
fn speed_bias_derivative_at_equilibrium() {
    let model = Model::desk_default();
    let s = start(&model, &[]);
    let bias = [AttackSpec::new(AttackTarget::RotorSpeedDeviation, 0, Window::from(0.0)).with_gamma(0.01)];
    let d = state_derivative(&s, &model, &bias, 0.0).unwrap();
    assert!((d.machines[0].delta_omega + 0.01 / 3.0).abs() < 1e-9);
    assert!(d.machines[1].delta_omega.abs() < 1e-9);
}

#[test]
fn equilibrium_is_a_fixed_point_with_power_balance() {
    let model = Model::desk_default();
    let s = start(&model, &[]);
    let d = state_derivative(&s, &model, &[], 0.0).unwrap();
    assert!(d.to_vector().iter().all(|v| v.abs() <= 1e-9), "{:?}", d.to_vector());

    let series = simulate(&s, &model, &[], &IntegratorConfig::rk4(1e-3, 1e-3)).unwrap();
    for i in 0..2 {
        let p_m = series.machine_column("p_m", i).unwrap()[0];
        let p_e = series.machine_column("p_e", i).unwrap()[0];
        assert!((p_m - p_e).abs() <= 1e-8, "machine {i}: {p_m} vs {p_e}");
    }
}

#[test]
fn zero_load_equilibrium_is_symmetric() {
    let model = Model::desk_default();
    let s = find_equilibrium(&model, 0.0).unwrap();
    assert!(s.machines.iter().all(|m| m.delta_omega == 0.0));
    assert!((s.machines[0].theta - s.machines[1].theta).abs() < 1e-12);
}

#[test]
fn infeasible_load_does_not_converge() {
    let model = Model::desk_default();
    let err = find_equilibrium(&model, 50.0 * model.rated_load_current()).unwrap_err();
    assert!(matches!(err, SimError::NoConvergence { .. }), "{err}");
}

#[test]
fn nominal_run_stays_at_rest() {
    let model = Model::desk_default();
    let s = start(&model, &[]);
    let series = simulate(&s, &model, &[], &IntegratorConfig::rk4(1e-3, 10.0).recording_every(10)).unwrap();
    for i in 0..2 {
        let worst = series
            .machine_column("delta_omega", i)
            .unwrap()
            .iter()
            .fold(0.0_f64, |m, v| m.max(v.abs()));
        assert!(worst <= 1e-8, "machine {i}: {worst:e}");
    }
}

#[test]
fn heavy_load_step_dips_dc_voltage() {
    let model = Model::desk_default();
    let s = find_equilibrium(&model, 0.1).unwrap();
    let faults = [FaultSpec::load_step(Window::new(1.0, 1.2), 10.0)];
    let dyns = Dynamics::new(&model, &[]).with_faults(&faults);
    let series = simulate_dynamics(&s, &dyns, &IntegratorConfig::rk4(1e-4, 2.0).recording_every(10)).unwrap();
    let v = series.column("v_dc").unwrap();
    let v_ref = model.converter.v_dc_ref;
    let in_window: Vec<f64> = series
        .times
        .iter()
        .zip(v)
        .filter(|(t, _)| **t > 1.0 && **t < 1.2)
        .map(|(_, v)| *v)
        .collect();
    assert!(!in_window.is_empty());
    assert!(in_window.iter().all(|&x| x < v_ref));
    let before = series.times.iter().position(|&t| t >= 0.99).unwrap();
    assert!((v[before] - v_ref).abs() < 1e-9);
}

#[test]
fn attack_after_the_horizon_changes_nothing() {
    let model = Model::desk_default();
    let s = start(&model, &[0.01, 0.0]);
    let cfg = IntegratorConfig::rk4(1e-3, 3.0);
    let late = [AttackSpec::new(AttackTarget::RotorSpeedDeviation, 0, Window::from(5.0)).with_gamma(0.1)];
    let a = simulate(&s, &model, &[], &cfg).unwrap();
    let b = simulate(&s, &model, &late, &cfg).unwrap();
    assert_eq!(a.times, b.times);
    for name in a.names() {
        let (x, y) = (a.column(name).unwrap(), b.column(name).unwrap());
        assert!(
            x.iter().zip(y).all(|(p, q)| p.to_bits() == q.to_bits()),
            "{name} differs"
        );
    }
}

#[test]
fn simulation_is_deterministic() {
    let model = Model::desk_default();
    let s = start(&model, &[0.0, 0.0]);
    let attacks = [AttackSpec::new(AttackTarget::BusVoltageD, 1, Window::new(0.5, 2.0))
        .with_alpha(0.05)
        .with_beta(TimeVaryingTerm::Sinusoid {
            amplitude: 0.01,
            frequency: 3.0,
            phase: 0.0,
        })];
    let cfg = IntegratorConfig::rk4(1e-3, 3.0);
    let csv = || {
        let mut out = Vec::new();
        simulate(&s, &model, &attacks, &cfg)
            .unwrap()
            .write_csv(&mut out, "run")
            .unwrap();
        out
    };
    assert_eq!(csv(), csv());
}

#[test]
fn dc_increment_matches_attacked_derivative() {
    let model = Model::desk_default();
    let s = start(&model, &[]);
    let attacks = [
        AttackSpec::new(AttackTarget::BusVoltageD, 0, Window::from(0.0))
            .with_alpha(0.04)
            .with_gamma(0.02),
        AttackSpec::new(AttackTarget::BusVoltageQ, 1, Window::from(0.0))
            .with_gamma(-0.03)
            .with_beta(TimeVaryingTerm::Ramp { slope: 0.01 }),
    ];
    let t = 1.5;
    let clean = state_derivative(&s, &model, &[], t).unwrap();
    let attacked = state_derivative(&s, &model, &attacks, t).unwrap();
    let buses: Vec<BusSnapshot> = s
        .machines
        .iter()
        .map(|m| BusSnapshot {
            v_bd: m.v_bd,
            v_bq: m.v_bq,
            i_od: m.i_od,
            i_oq: m.i_oq,
        })
        .collect();
    let per_bus = BusVoltageAttack::from_specs(&attacks, 2, t);
    let predicted = dc_attack_increment(&buses, s.v_dc, &model.converter, &per_bus, t).unwrap();
    let observed = attacked.v_dc - clean.v_dc;
    assert!(predicted != 0.0);
    assert!(
        (observed - predicted).abs() <= 1e-12 * predicted.abs().max(1.0),
        "{observed:e} vs {predicted:e}"
    );
}

#[test]
fn step_halving_shows_fourth_order() {
    let model = Model::desk_default();
    let s = start(&model, &[0.01, -0.005]);
    let run = |k: usize| {
        let cfg = IntegratorConfig::rk4(4e-3 / k as f64, 1.0).recording_every(k);
        simulate(&s, &model, &[], &cfg)
            .unwrap()
            .machine_column("delta_omega", 0)
            .unwrap()
            .to_vec()
    };
    let (a, b, c) = (run(1), run(2), run(4));
    let ratio = max_abs_diff(&a, &b) / max_abs_diff(&b, &c);
    assert!(ratio >= 8.0, "ratio {ratio}");
}
