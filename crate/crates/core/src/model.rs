//! Physical parameters, the Kron-reduced machine network and the dynamic
//! state vector shared by every other module.
//!
//! All AC-side quantities are per-unit on the machine base. DC-side
//! quantities (`V_DC`, `C_DC`, load current) are either per-unit or
//! physical, as declared by [`DcUnits`].

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("dimension mismatch: expected {expected} machines, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Synchronous machine, governor and exciter constants for one PGM.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorParams {
    pub index: usize,
    /// Inertia constant (s).
    pub h: f64,
    /// Damping constant (p.u.).
    pub d: f64,
    #[serde(default = "one")]
    pub omega_s: f64,
    #[serde(default = "sixty")]
    pub f_nominal: f64,
    pub kp_gov: f64,
    pub ki_gov: f64,
    pub kp_exc: f64,
    pub ki_exc: f64,
    #[serde(default = "one")]
    pub v_b_ref: f64,
    /// Prime-mover lag from fuel index to mechanical power (s).
    pub t_m: f64,
    /// Lag from field voltage to internal voltage magnitude (s).
    pub t_v: f64,
}

fn one() -> f64 {
    1.0
}

fn sixty() -> f64 {
    60.0
}

impl GeneratorParams {
    /// Angle-rate constant, `2π·f_nominal` in rad/s.
    pub fn phi(&self) -> f64 {
        2.0 * PI * self.f_nominal
    }

    /// Desk-scale default PGM.
    pub fn desk_default(index: usize) -> Self {
        Self {
            index,
            h: 3.0,
            d: 2.0,
            omega_s: 1.0,
            f_nominal: 60.0,
            kp_gov: 10.0,
            ki_gov: 2.0,
            kp_exc: 0.5,
            ki_exc: 2.0,
            v_b_ref: 1.0,
            t_m: 0.5,
            t_v: 0.3,
        }
    }
}

/// Kron-reduced equivalent network between machine internal buses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkModel {
    pub g: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub v_mag: Vec<f64>,
}

impl NetworkModel {
    pub fn len(&self) -> usize {
        self.v_mag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v_mag.is_empty()
    }

    pub fn desk_default() -> Self {
        Self {
            g: vec![vec![0.2, 0.8], vec![0.8, 0.2]],
            b: vec![vec![-4.0, 4.0], vec![4.0, -4.0]],
            v_mag: vec![1.0, 1.0],
        }
    }
}

/// How the DC-side quantities are expressed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "system")]
pub enum DcUnits {
    PerUnit,
    /// Volts, farads and amperes; converter power (p.u.) is scaled by `s_base` (VA).
    Physical {
        s_base: f64,
    },
}

impl DcUnits {
    /// Multiplier turning per-unit converter power into DC-side power.
    pub fn power_scale(&self) -> f64 {
        match self {
            DcUnits::PerUnit => 1.0,
            DcUnits::Physical { s_base } => *s_base,
        }
    }

    pub fn voltage_label(&self) -> &'static str {
        match self {
            DcUnits::PerUnit => "pu",
            DcUnits::Physical { .. } => "V",
        }
    }
}

impl fmt::Display for DcUnits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DcUnits::PerUnit => write!(f, "per_unit"),
            DcUnits::Physical { s_base } => write!(f, "physical(s_base={s_base})"),
        }
    }
}

/// Converter (2L-VSC), filter and DC-link constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConverterParams {
    pub r_s: f64,
    pub l_s: f64,
    pub c_s: f64,
    pub r_f: f64,
    pub l_f: f64,
    pub kpd_i: f64,
    pub kid_i: f64,
    pub kpq_i: f64,
    pub kiq_i: f64,
    pub kp_v: f64,
    pub ki_v: f64,
    pub c_dc: f64,
    pub s_c: f64,
    pub v_dc_ref: f64,
}

impl ConverterParams {
    pub fn desk_default() -> Self {
        Self {
            r_s: 0.5,
            l_s: 0.05,
            c_s: 0.05,
            r_f: 0.05,
            l_f: 0.05,
            kpd_i: 5.0,
            kid_i: 100.0,
            kpq_i: 5.0,
            kiq_i: 100.0,
            kp_v: 2.0,
            ki_v: 10.0,
            c_dc: 0.5,
            s_c: 1.0,
            v_dc_ref: 1.0,
        }
    }
}

/// Source of the electrical power seen by the swing equation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum PeMode {
    /// Kron-reduced network power flow.
    Network,
    /// Constant per-machine power, used for the linear benchmark.
    Frozen { values: Vec<f64> },
}

/// Source of the mechanical power seen by the swing equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PmMode {
    /// Governor PI plus first-order prime-mover lag.
    Governor,
    /// Mechanical power held at its initial value.
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelOptions {
    pub pe_mode: PeMode,
    pub pm_mode: PmMode,
    /// Governor and swing damping read the same (possibly corrupted) speed sensor.
    pub shared_sensor: bool,
}

impl Default for ModelOptions {
    fn default() -> Self {
        Self {
            pe_mode: PeMode::Network,
            pm_mode: PmMode::Governor,
            shared_sensor: true,
        }
    }
}

/// Complete immutable system description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub generators: Vec<GeneratorParams>,
    pub network: NetworkModel,
    pub converter: ConverterParams,
    pub dc_units: DcUnits,
    #[serde(default)]
    pub options: ModelOptions,
}

impl Model {
    /// Two identical PGMs on a symmetric network, everything per-unit.
    pub fn desk_default() -> Self {
        Self {
            generators: vec![GeneratorParams::desk_default(0), GeneratorParams::desk_default(1)],
            network: NetworkModel::desk_default(),
            converter: ConverterParams::desk_default(),
            dc_units: DcUnits::PerUnit,
            options: ModelOptions::default(),
        }
    }

    pub fn machine_count(&self) -> usize {
        self.generators.len()
    }

    /// Load current at which every converter runs at its rating.
    pub fn rated_load_current(&self) -> f64 {
        self.machine_count() as f64 * self.converter.s_c / self.converter.v_dc_ref
    }
}

/// Per-machine portion of [`SystemState`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MachineState {
    pub theta: f64,
    pub delta_omega: f64,
    pub x_gov: f64,
    pub x_exc: f64,
    pub p_m: f64,
    /// Internal voltage magnitude |V_i|, the lagged response to the field voltage E_f.
    pub v_int: f64,
    pub i_sd: f64,
    pub i_sq: f64,
    pub v_bd: f64,
    pub v_bq: f64,
    pub i_od: f64,
    pub i_oq: f64,
    pub phi_d: f64,
    pub phi_q: f64,
}

pub const MACHINE_STATE_LEN: usize = 14;

pub const MACHINE_FIELDS: [&str; MACHINE_STATE_LEN] = [
    "theta",
    "delta_omega",
    "x_gov",
    "x_exc",
    "p_m",
    "v_int",
    "i_sd",
    "i_sq",
    "v_bd",
    "v_bq",
    "i_od",
    "i_oq",
    "phi_d",
    "phi_q",
];

impl MachineState {
    pub fn to_array(&self) -> [f64; MACHINE_STATE_LEN] {
        [
            self.theta,
            self.delta_omega,
            self.x_gov,
            self.x_exc,
            self.p_m,
            self.v_int,
            self.i_sd,
            self.i_sq,
            self.v_bd,
            self.v_bq,
            self.i_od,
            self.i_oq,
            self.phi_d,
            self.phi_q,
        ]
    }

    pub fn from_slice(x: &[f64]) -> Self {
        Self {
            theta: x[0],
            delta_omega: x[1],
            x_gov: x[2],
            x_exc: x[3],
            p_m: x[4],
            v_int: x[5],
            i_sd: x[6],
            i_sq: x[7],
            v_bd: x[8],
            v_bq: x[9],
            i_od: x[10],
            i_oq: x[11],
            phi_d: x[12],
            phi_q: x[13],
        }
    }

    /// Measured bus voltage magnitude `√(v_bd² + v_bq²)`.
    pub fn bus_voltage(&self) -> f64 {
        self.v_bd.hypot(self.v_bq)
    }
}

/// Full dynamic state of the system at time `t`.
///
/// `i_l` is the exogenous DC load current; it is carried along but never
/// integrated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemState {
    pub t: f64,
    pub machines: Vec<MachineState>,
    pub phi_v: f64,
    pub v_dc: f64,
    pub i_l: f64,
}

impl SystemState {
    /// Number of integrated components.
    pub fn dim(&self) -> usize {
        self.machines.len() * MACHINE_STATE_LEN + 2
    }

    pub fn to_vector(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim());
        for m in &self.machines {
            out.extend_from_slice(&m.to_array());
        }
        out.push(self.phi_v);
        out.push(self.v_dc);
        out
    }

    /// Inverse of [`to_vector`](Self::to_vector); `t` and `i_l` are supplied separately.
    pub fn from_vector(x: &[f64], t: f64, i_l: f64) -> Self {
        let n = (x.len() - 2) / MACHINE_STATE_LEN;
        let machines = x[..n * MACHINE_STATE_LEN]
            .chunks_exact(MACHINE_STATE_LEN)
            .map(MachineState::from_slice)
            .collect();
        Self {
            t,
            machines,
            phi_v: x[n * MACHINE_STATE_LEN],
            v_dc: x[n * MACHINE_STATE_LEN + 1],
            i_l,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_vector().iter().all(|v| v.is_finite()) && self.t.is_finite() && self.i_l.is_finite()
    }

    pub fn thetas(&self) -> Vec<f64> {
        self.machines.iter().map(|m| m.theta).collect()
    }

    pub fn internal_voltages(&self) -> Vec<f64> {
        self.machines.iter().map(|m| m.v_int).collect()
    }
}

/// A violated model invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub location: String,
    pub rule: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.rule)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn contains(&self, rule: &str) -> bool {
        self.violations.iter().any(|v| v.rule.contains(rule))
    }

    fn push(&mut self, location: impl Into<String>, rule: impl Into<String>) {
        self.violations.push(Violation {
            location: location.into(),
            rule: rule.into(),
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Collects every violated invariant; an empty report means the model is usable.
pub fn validate_model(
    generators: &[GeneratorParams],
    network: &NetworkModel,
    converter: &ConverterParams,
) -> ValidationReport {
    let mut report = ValidationReport::default();

    if generators.is_empty() {
        report.push("generators", "at least one machine");
    }
    for (pos, g) in generators.iter().enumerate() {
        let at = format!("generator[{pos}]");
        if g.index != pos {
            report.push(&at, format!("index == position ({} != {pos})", g.index));
        }
        for (name, v) in [("H", g.h), ("D", g.d), ("T_m", g.t_m), ("T_v", g.t_v)] {
            if !(v > 0.0) {
                report.push(&at, format!("{name} > 0"));
            }
        }
        if g.f_nominal != 50.0 && g.f_nominal != 60.0 {
            report.push(&at, "f_nominal in {50, 60}");
        }
        if !(g.omega_s > 0.0) {
            report.push(&at, "omega_s > 0");
        }
        let all = [g.kp_gov, g.ki_gov, g.kp_exc, g.ki_exc, g.v_b_ref];
        if all.iter().any(|v| !v.is_finite()) {
            report.push(&at, "finite gains");
        }
    }

    let n = network.len();
    if n != generators.len() {
        report.push(
            "network",
            format!("machine count matches generators ({n} != {})", generators.len()),
        );
    }
    for (name, m) in [("G", &network.g), ("B", &network.b)] {
        if m.len() != n || m.iter().any(|row| row.len() != n) {
            report.push("network", format!("{name} is {n}x{n}"));
            continue;
        }
        for (i, row) in m.iter().enumerate() {
            for (k, v) in row.iter().enumerate().skip(i + 1) {
                if *v != m[k][i] {
                    report.push(
                        "network",
                        format!("{name} symmetric: {name}[{i}][{k}] == {name}[{k}][{i}]"),
                    );
                }
            }
        }
    }
    for (i, v) in network.v_mag.iter().enumerate() {
        if !(*v > 0.0) {
            report.push("network", format!("V_mag[{i}] > 0"));
        }
    }

    let c = converter;
    for (name, v) in [
        ("L_s", c.l_s),
        ("L_f", c.l_f),
        ("C_s", c.c_s),
        ("C_DC", c.c_dc),
        ("S_c", c.s_c),
        ("V_DC_ref", c.v_dc_ref),
    ] {
        if !(v > 0.0) {
            report.push("converter", format!("{name} > 0"));
        }
    }
    report
}

/// Electrical power injected by each machine into the Kron-reduced network.
pub fn electrical_power(theta: &[f64], net: &NetworkModel) -> Result<Vec<f64>, ModelError> {
    electrical_power_with(theta, &net.v_mag, &net.g, &net.b)
}

/// [`electrical_power`] with explicit voltage magnitudes and admittances.
pub fn electrical_power_with(
    theta: &[f64],
    v_mag: &[f64],
    g: &[Vec<f64>],
    b: &[Vec<f64>],
) -> Result<Vec<f64>, ModelError> {
    let n = v_mag.len();
    for got in [theta.len(), g.len(), b.len()] {
        if got != n {
            return Err(ModelError::DimensionMismatch { expected: n, got });
        }
    }
    Ok((0..n)
        .map(|i| {
            (0..n)
                .map(|k| {
                    let d = theta[i] - theta[k];
                    v_mag[i] * v_mag[k] * (g[i][k] * d.cos() + b[i][k] * d.sin())
                })
                .sum()
        })
        .collect())
}

/// Controller outputs computed algebraically from the state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedInputs {
    /// Governor fuel index.
    pub p_f: f64,
    /// Exciter field voltage.
    pub e_f: f64,
    pub v_sd: f64,
    pub v_sq: f64,
}

/// Governor and exciter PI outputs for one machine.
///
/// `speed_dev` and `bus_voltage` are the values the controllers see, which
/// may already be corrupted by an attack.
pub fn derived_inputs(
    machine: &MachineState,
    gen: &GeneratorParams,
    speed_dev: f64,
    bus_voltage: f64,
) -> DerivedInputs {
    let p_f = gen.kp_gov * (-speed_dev) + gen.ki_gov * machine.x_gov;
    let e_f = gen.kp_exc * (gen.v_b_ref - bus_voltage) + gen.ki_exc * machine.x_exc;
    DerivedInputs {
        p_f,
        e_f,
        v_sd: machine.v_int,
        v_sq: 0.0,
    }
}
