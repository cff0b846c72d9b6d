#![allow(dead_code)]

use std::path::PathBuf;

use mvdc_fdia_core::model::{ModelOptions, PeMode, PmMode};
use mvdc_fdia_core::sim::SeriesMeta;
use mvdc_fdia_core::{find_equilibrium, GeneratorParams, Model, NetworkModel, SystemState, TimeSeries};

/// Single machine with frozen electrical power and held mechanical power,
/// so the swing equation is exactly the linear first-order model.
pub fn linear_benchmark() -> Model {
    let mut m = Model::desk_default();
    m.generators = vec![GeneratorParams::desk_default(0)];
    m.network = NetworkModel {
        g: vec![vec![0.2]],
        b: vec![vec![-4.0]],
        v_mag: vec![1.0],
    };
    m.options = ModelOptions {
        pe_mode: PeMode::Frozen { values: vec![0.8] },
        pm_mode: PmMode::Fixed,
        shared_sensor: true,
    };
    m
}

/// Equilibrium of `model` at half rated load, with machine speeds offset by `dw0`.
pub fn start(model: &Model, dw0: &[f64]) -> SystemState {
    let mut s = find_equilibrium(model, 0.5 * model.rated_load_current()).expect("equilibrium");
    for (m, dw) in s.machines.iter_mut().zip(dw0) {
        m.delta_omega = *dw;
    }
    s
}

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(format!("{name}.scenario"))
}

/// One-machine series with frequency and DC voltage columns only.
pub fn synthetic_series(dt: f64, t_end: f64, freq: impl Fn(f64) -> f64, vdc: impl Fn(f64) -> f64) -> TimeSeries {
    let meta = SeriesMeta {
        machines: 1,
        f_nominal: vec![60.0],
        omega_s: vec![1.0],
        v_dc_ref: 1.0,
        dc_units: mvdc_fdia_core::model::DcUnits::PerUnit,
    };
    let mut s = TimeSeries::new(meta, &[("freq_hz_0", "Hz"), ("v_dc", "pu")]);
    let steps = (t_end / dt).round() as usize;
    for k in 0..=steps {
        let t = k as f64 * dt;
        s.push_row(t, &[freq(t), vdc(t)]);
    }
    s
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m: f64, (x, y)| m.max((x - y).abs()))
}
