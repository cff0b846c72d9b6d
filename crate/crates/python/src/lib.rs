//! Python bindings for `mvdc-fdia-core`.

use std::collections::BTreeMap;
use std::path::PathBuf;

use pyo3::exceptions::{PyKeyError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use mvdc_fdia_core::analytic::{self, constant_pe, GovernorAttack, TransientSolution};
use mvdc_fdia_core::scenario::{self, RunOutcome};
use mvdc_fdia_core::{
    AttackSpec, AttackTarget, IntegratorConfig, Model as CoreModel, TimeSeries, TimeVaryingTerm, TripEvent, Window,
};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn parse_target(name: &str) -> PyResult<AttackTarget> {
    Ok(match name {
        "rotor_speed_deviation" => AttackTarget::RotorSpeedDeviation,
        "electrical_power" => AttackTarget::ElectricalPower,
        "bus_voltage_d" => AttackTarget::BusVoltageD,
        "bus_voltage_q" => AttackTarget::BusVoltageQ,
        other => return Err(value_err(format!("unknown attack target `{other}`"))),
    })
}

/// False-data injection `x̂ = x + αx + β(t − start) + γ` on one measurement.
#[pyclass(name = "Attack", module = "mvdc_fdia", from_py_object)]
#[derive(Clone)]
struct PyAttack {
    inner: AttackSpec,
}

#[pymethods]
impl PyAttack {
    /// `beta` is `None`, `("ramp", slope)` or `("sinusoid", amplitude, frequency_hz[, phase])`.
    #[new]
    #[pyo3(signature = (target, machine, start, end=f64::INFINITY, alpha=0.0, gamma=0.0, beta=None))]
    fn new(
        target: &str,
        machine: usize,
        start: f64,
        end: f64,
        alpha: f64,
        gamma: f64,
        beta: Option<(String, f64, Option<f64>, Option<f64>)>,
    ) -> PyResult<Self> {
        let window = Window::new(start, end);
        if !window.is_valid() {
            return Err(value_err(format!("invalid window [{start}, {end})")));
        }
        let beta = match beta {
            None => TimeVaryingTerm::Zero,
            Some((kind, a, b, c)) => match kind.as_str() {
                "ramp" => TimeVaryingTerm::Ramp { slope: a },
                "sinusoid" => TimeVaryingTerm::Sinusoid {
                    amplitude: a,
                    frequency: b.ok_or_else(|| value_err("sinusoid needs a frequency"))?,
                    phase: c.unwrap_or(0.0),
                },
                other => return Err(value_err(format!("unknown beta kind `{other}`"))),
            },
        };
        let inner = AttackSpec::new(parse_target(target)?, machine, window)
            .with_alpha(alpha)
            .with_gamma(gamma)
            .with_beta(beta);
        Ok(Self { inner })
    }

    /// Corrupted value of `x` at time `t`.
    fn apply(&self, x: f64, t: f64) -> f64 {
        mvdc_fdia_core::apply_fdia(x, &self.inner, t)
    }

    #[getter]
    fn target(&self) -> String {
        self.inner.target.to_string()
    }

    #[getter]
    fn machine(&self) -> usize {
        self.inner.machine
    }

    fn __repr__(&self) -> String {
        let a = &self.inner;
        format!(
            "Attack(target='{}', machine={}, start={}, end={}, alpha={}, gamma={})",
            a.target, a.machine, a.window.start, a.window.end, a.alpha, a.gamma
        )
    }
}

/// Recorded trajectories, column by column.
#[pyclass(name = "TimeSeries", module = "mvdc_fdia", frozen)]
struct PyTimeSeries {
    inner: TimeSeries,
}

#[pymethods]
impl PyTimeSeries {
    #[getter]
    fn times(&self) -> Vec<f64> {
        self.inner.times.clone()
    }

    #[getter]
    fn names(&self) -> Vec<String> {
        self.inner.names().to_vec()
    }

    fn column(&self, name: &str) -> PyResult<Vec<f64>> {
        self.inner
            .column(name)
            .map(<[f64]>::to_vec)
            .ok_or_else(|| PyKeyError::new_err(name.to_string()))
    }

    fn __getitem__(&self, name: &str) -> PyResult<Vec<f64>> {
        self.column(name)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// All columns, including `t`.
    fn to_dict(&self) -> BTreeMap<String, Vec<f64>> {
        let mut out: BTreeMap<String, Vec<f64>> = self
            .inner
            .names()
            .iter()
            .map(|n| (n.clone(), self.inner.column(n).unwrap().to_vec()))
            .collect();
        out.insert("t".into(), self.inner.times.clone());
        out
    }
}

fn trip_dict(e: &TripEvent) -> BTreeMap<&'static str, String> {
    BTreeMap::from([
        ("relay", e.relay.to_string()),
        ("target", e.target.to_string()),
        ("t_trip", e.t_trip.to_string()),
        ("value", e.value.to_string()),
        ("threshold", e.threshold.to_string()),
    ])
}

/// Result of running a scenario in memory.
#[pyclass(name = "RunResult", module = "mvdc_fdia", frozen)]
struct PyRunResult {
    inner: RunOutcome,
}

#[pymethods]
impl PyRunResult {
    #[getter]
    fn series(&self) -> PyTimeSeries {
        PyTimeSeries {
            inner: self.inner.series.clone(),
        }
    }

    /// Trip events as dicts of strings (`relay`, `target`, `t_trip`, `value`, `threshold`).
    #[getter]
    fn trips(&self) -> Vec<BTreeMap<&'static str, String>> {
        self.inner.trips.iter().map(trip_dict).collect()
    }

    #[getter]
    fn alarms(&self) -> Vec<BTreeMap<&'static str, String>> {
        self.inner.alarms.iter().map(trip_dict).collect()
    }

    /// `(t, rocof, dvdc_pct, inside)` per sample.
    #[getter]
    fn portrait(&self) -> Vec<(f64, f64, f64, bool)> {
        self.inner
            .portrait
            .iter()
            .map(|p| (p.t, p.rocof, p.dvdc_pct, p.inside))
            .collect()
    }

    #[getter]
    fn max_abs_delta_omega(&self) -> f64 {
        self.inner.summary.max_abs_delta_omega
    }

    #[getter]
    fn max_abs_dvdc(&self) -> f64 {
        self.inner.summary.max_abs_dvdc
    }

    #[getter]
    fn attack_success(&self) -> bool {
        self.inner.summary.attack_success
    }

    #[getter]
    fn inside_fraction(&self) -> f64 {
        self.inner.summary.inside_fraction
    }

    #[getter]
    fn breaker_openings(&self) -> Vec<(usize, f64)> {
        self.inner.summary.breaker_openings.clone()
    }
}

/// Multi-machine MVDC system parameters.
#[pyclass(name = "Model", module = "mvdc_fdia", from_py_object)]
#[derive(Clone)]
struct PyModel {
    inner: CoreModel,
}

#[pymethods]
impl PyModel {
    /// Two-machine reference system.
    #[staticmethod]
    fn desk_default() -> Self {
        Self {
            inner: CoreModel::desk_default(),
        }
    }

    #[getter]
    fn machine_count(&self) -> usize {
        self.inner.machine_count()
    }

    #[getter]
    fn rated_load_current(&self) -> f64 {
        self.inner.rated_load_current()
    }

    /// Equilibrium state vector at load current `i_l`.
    fn equilibrium(&self, i_l: f64) -> PyResult<Vec<f64>> {
        mvdc_fdia_core::find_equilibrium(&self.inner, i_l)
            .map(|s| s.to_vector())
            .map_err(runtime_err)
    }

    /// Simulates from the equilibrium at DC load current `i_l` (half the
    /// rated current when omitted), with optional per-machine speed offsets.
    #[allow(clippy::too_many_arguments)]
    #[pyo3(signature = (t_end, dt=1e-3, attacks=Vec::new(), i_l=None, delta_omega=Vec::new(), record_every=1))]
    fn simulate(
        &self,
        py: Python<'_>,
        t_end: f64,
        dt: f64,
        attacks: Vec<PyAttack>,
        i_l: Option<f64>,
        delta_omega: Vec<f64>,
        record_every: usize,
    ) -> PyResult<PyTimeSeries> {
        let model = &self.inner;
        let i_l = i_l.unwrap_or(0.5 * model.rated_load_current());
        let mut start = mvdc_fdia_core::find_equilibrium(model, i_l).map_err(runtime_err)?;
        for (m, dw) in start.machines.iter_mut().zip(&delta_omega) {
            m.delta_omega = *dw;
        }
        let attacks: Vec<AttackSpec> = attacks.into_iter().map(|a| a.inner).collect();
        let cfg = IntegratorConfig::rk4(dt, t_end).recording_every(record_every.max(1));
        let series = py
            .detach(|| mvdc_fdia_core::simulate(&start, model, &attacks, &cfg))
            .map_err(runtime_err)?;
        Ok(PyTimeSeries { inner: series })
    }

    /// Closed-form `(delta_omega, theta)` of one machine under the speed and
    /// power attacks active at `t_o`, with electrical power held at `p_e`.
    #[pyo3(signature = (machine, times, attacks=Vec::new(), dw0=0.0, th0=0.0, t_o=0.0, p_e=0.0))]
    #[allow(clippy::too_many_arguments)]
    fn closed_form(
        &self,
        machine: usize,
        times: Vec<f64>,
        attacks: Vec<PyAttack>,
        dw0: f64,
        th0: f64,
        t_o: f64,
        p_e: f64,
    ) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let gen = self
            .inner
            .generators
            .get(machine)
            .ok_or_else(|| value_err(format!("machine {machine} out of range")))?;
        let specs: Vec<AttackSpec> = attacks.into_iter().map(|a| a.inner).collect();
        let attack = GovernorAttack::from_specs(&specs, machine, t_o);
        let lc = analytic::lambda_coefficients(gen, &attack, Some(constant_pe(p_e)));
        let sol = TransientSolution::new(lc, t_o, dw0, th0, gen.phi()).map_err(value_err)?;
        let dw = times
            .iter()
            .map(|&t| sol.delta_omega(t))
            .collect::<Result<_, _>>()
            .map_err(value_err)?;
        let th = times
            .iter()
            .map(|&t| sol.theta(t))
            .collect::<Result<_, _>>()
            .map_err(value_err)?;
        Ok((dw, th))
    }

    /// Rotor-speed shift of `machine` implied by a DC-voltage deviation `dv`.
    fn omega_from_vdc(&self, machine: usize, dv: f64) -> PyResult<f64> {
        let gen = self
            .inner
            .generators
            .get(machine)
            .ok_or_else(|| value_err(format!("machine {machine} out of range")))?;
        analytic::omega_from_vdc(dv, &self.inner.converter, gen).map_err(value_err)
    }
}

/// A validated scenario document.
#[pyclass(name = "Scenario", module = "mvdc_fdia", frozen)]
struct PyScenario {
    inner: scenario::Scenario,
}

#[pymethods]
impl PyScenario {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        scenario::load_scenario(&path)
            .map(|inner| Self { inner })
            .map_err(value_err)
    }

    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        scenario::parse_scenario(text)
            .map(|inner| Self { inner })
            .map_err(value_err)
    }

    fn to_toml(&self) -> String {
        scenario::serialize_scenario(&self.inner)
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    #[getter]
    fn model(&self) -> PyModel {
        PyModel {
            inner: self.inner.model.clone(),
        }
    }

    /// Runs the scenario without writing files.
    fn execute(&self, py: Python<'_>) -> PyResult<PyRunResult> {
        py.detach(|| scenario::execute(&self.inner))
            .map(|inner| PyRunResult { inner })
            .map_err(runtime_err)
    }

    /// Runs the scenario and writes its artifacts; returns the written paths.
    fn run(&self, py: Python<'_>, out_dir: PathBuf) -> PyResult<Vec<PathBuf>> {
        py.detach(|| scenario::run(&self.inner, &out_dir))
            .map(|r| r.files)
            .map_err(runtime_err)
    }
}

#[pymodule]
fn mvdc_fdia(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyAttack>()?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyTimeSeries>()?;
    m.add_class::<PyRunResult>()?;
    m.add_class::<PyScenario>()?;
    m.add("__version__", scenario::TOOL_VERSION)?;
    Ok(())
}
