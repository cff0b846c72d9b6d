//! Executing a scenario and writing its artifacts.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::analytic::{constant_pe, lambda_coefficients, AnalyticError, GovernorAttack, TransientSolution};
use crate::attack::{AttackSpec, AttackTarget};
use crate::model::{DcUnits, Model, SystemState};
use crate::protection::{
    evaluate_alarms, evaluate_relays, phase_portrait, PortraitPoint, ProtectionError, RelayTarget, TripEvent,
};
use crate::sim::fmt_f64;
use crate::sim::{find_equilibrium, simulate_dynamics, Dynamics, SimError, TimeSeries};

use super::config::{InitialCondition, Scenario, ScenarioError};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("scenario `{scenario}`: {context}: {source}")]
    Numerical {
        scenario: String,
        context: &'static str,
        source: SimError,
    },
    #[error("scenario `{scenario}`: closed form: {source}")]
    Analytic { scenario: String, source: AnalyticError },
    #[error("scenario `{scenario}`: relays: {source}")]
    Protection { scenario: String, source: ProtectionError },
    #[error("writing {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl RunError {
    /// Process exit status: 1 for scenario and I/O problems, 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Numerical { .. } | RunError::Analytic { .. } => 2,
            RunError::Scenario(_) | RunError::Protection { .. } | RunError::Io { .. } => 1,
        }
    }
}

/// Headline numbers of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub max_abs_delta_omega: f64,
    /// `max |V_DC − V*| / V*`.
    pub max_abs_dvdc: f64,
    /// Largest signed `(V_DC − V*) / V*`.
    pub max_dvdc: f64,
    pub trip_count: usize,
    pub alarm_count: usize,
    pub attack_success: bool,
    /// Share of phase-portrait samples inside the relay rectangle.
    pub inside_fraction: f64,
    /// Machines isolated by breakers, with the opening time.
    pub breaker_openings: Vec<(usize, f64)>,
}

impl RunSummary {
    pub const HEADER: &'static str =
        "max_abs_delta_omega[pu],max_abs_dvdc[frac],max_dvdc[frac],trip_count,alarm_count,attack_success,inside_fraction";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            fmt_f64(self.max_abs_delta_omega),
            fmt_f64(self.max_abs_dvdc),
            fmt_f64(self.max_dvdc),
            self.trip_count,
            self.alarm_count,
            self.attack_success,
            fmt_f64(self.inside_fraction)
        )
    }
}

/// Closed-form rotor trajectories of one machine on the recorded time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MachineOverlay {
    pub machine: usize,
    pub delta_omega: Vec<f64>,
    pub theta: Vec<f64>,
}

/// Everything a run computes, before anything is written.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub series: TimeSeries,
    pub trips: Vec<TripEvent>,
    pub alarms: Vec<TripEvent>,
    pub portrait: Vec<PortraitPoint>,
    pub overlay: Option<Vec<MachineOverlay>>,
    pub summary: RunSummary,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub scenario: String,
    pub files: Vec<PathBuf>,
    pub summary: RunSummary,
}

fn numerical<'a>(s: &'a Scenario, context: &'static str) -> impl FnOnce(SimError) -> RunError + 'a {
    move |source| RunError::Numerical {
        scenario: s.name.clone(),
        context,
        source,
    }
}

/// Starting state of a scenario.
pub fn initial_state(s: &Scenario) -> Result<SystemState, RunError> {
    match &s.initial {
        InitialCondition::Equilibrium { load, delta_omega } => {
            let mut state = find_equilibrium(&s.model, *load).map_err(numerical(s, "equilibrium"))?;
            for (m, dw) in state.machines.iter_mut().zip(delta_omega) {
                m.delta_omega += dw;
            }
            Ok(state)
        }
        InitialCondition::Explicit { state } => Ok(state.clone()),
    }
}

/// Simulates the scenario, opening breakers on machine trips when enabled.
fn simulate_with_breakers(s: &Scenario, initial: &SystemState) -> Result<(TimeSeries, Vec<(usize, f64)>), RunError> {
    let mut dyns = Dynamics::new(&s.model, &s.attacks).with_faults(&s.faults);
    let mut series = simulate_dynamics(initial, &dyns, &s.integrator).map_err(numerical(s, "simulation"))?;
    let mut openings = Vec::new();
    if !s.relays.open_breaker {
        return Ok((series, openings));
    }
    let i_l = initial.i_l;
    loop {
        let trips = evaluate_relays(&series, &s.relays).map_err(|source| RunError::Protection {
            scenario: s.name.clone(),
            source,
        })?;
        let next = trips.iter().find_map(|e| match e.target {
            RelayTarget::Machine(i) if !dyns.disconnected[i] => Some((i, e.t_trip)),
            _ => None,
        });
        let Some((machine, t_open)) = next else {
            break;
        };
        let row = series
            .times
            .iter()
            .position(|&t| t == t_open)
            .expect("trip times are sample times");
        openings.push((machine, t_open));
        let mut head = series.truncated(row + 1);
        if row + 1 == series.len() {
            series = head;
            break;
        }
        let restart = head.state_at(row, i_l).expect("recorded state is complete");
        dyns.disconnected[machine] = true;
        let tail = simulate_dynamics(&restart, &dyns, &s.integrator).map_err(numerical(s, "simulation"))?;
        head.extend_from(&tail);
        series = head;
    }
    Ok((series, openings))
}

/// Piecewise closed-form Δω and θ for every machine, restarting at each
/// attack-window edge from the value the previous piece reached there.
pub fn analytic_overlay(
    model: &Model,
    attacks: &[AttackSpec],
    initial: &SystemState,
    times: &[f64],
) -> Result<Vec<MachineOverlay>, AnalyticError> {
    let mut out = vec![0.0; initial.dim()];
    let p_e = Dynamics::new(model, &[])
        .eval(initial, initial.t, &mut out)
        .map(|d| d.p_e)
        .unwrap_or_else(|_| vec![0.0; model.machine_count()]);
    let t_last = times.last().copied().unwrap_or(initial.t);

    let mut result = Vec::with_capacity(model.machine_count());
    for (i, gen) in model.generators.iter().enumerate() {
        let mut edges: Vec<f64> = attacks
            .iter()
            .filter(|a| {
                a.machine == i
                    && matches!(
                        a.target,
                        AttackTarget::RotorSpeedDeviation | AttackTarget::ElectricalPower
                    )
            })
            .flat_map(|a| [a.window.start, a.window.end])
            .filter(|&e| e > initial.t && e <= t_last)
            .collect();
        edges.sort_by(f64::total_cmp);
        edges.dedup();

        let piece = |t_o: f64, dw: f64, th: f64| -> Result<TransientSolution, AnalyticError> {
            let attack = GovernorAttack::from_specs(attacks, i, t_o);
            let lc = lambda_coefficients(gen, &attack, Some(constant_pe(p_e[i])));
            TransientSolution::new(lc, t_o, dw, th, gen.phi())
        };
        let m0 = &initial.machines[i];
        let mut sol = piece(initial.t, m0.delta_omega, m0.theta)?;
        let mut next_edge = 0;
        let mut overlay = MachineOverlay {
            machine: i,
            delta_omega: Vec::with_capacity(times.len()),
            theta: Vec::with_capacity(times.len()),
        };
        for &t in times {
            while next_edge < edges.len() && edges[next_edge] <= t {
                let e = edges[next_edge];
                let (dw, th) = (sol.delta_omega(e)?, sol.theta(e)?);
                sol = piece(e, dw, th)?;
                next_edge += 1;
            }
            overlay.delta_omega.push(sol.delta_omega(t)?);
            overlay.theta.push(sol.theta(t)?);
        }
        result.push(overlay);
    }
    Ok(result)
}

fn summarize(
    series: &TimeSeries,
    trips: &[TripEvent],
    alarms: &[TripEvent],
    portrait: &[PortraitPoint],
    openings: Vec<(usize, f64)>,
) -> RunSummary {
    let mut max_dw = 0.0_f64;
    for i in 0..series.meta.machines {
        if let Some(c) = series.machine_column("delta_omega", i) {
            max_dw = c.iter().fold(max_dw, |a, v| a.max(v.abs()));
        }
    }
    let v_ref = series.meta.v_dc_ref;
    let dv: Vec<f64> = series
        .column("v_dc")
        .map(|c| c.iter().map(|v| (v - v_ref) / v_ref).collect())
        .unwrap_or_default();
    let inside = portrait.iter().filter(|p| p.inside).count();
    RunSummary {
        max_abs_delta_omega: max_dw,
        max_abs_dvdc: dv.iter().fold(0.0, |a: f64, v| a.max(v.abs())),
        max_dvdc: dv.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        trip_count: trips.len(),
        alarm_count: alarms.len(),
        attack_success: !trips.is_empty(),
        inside_fraction: if portrait.is_empty() {
            1.0
        } else {
            inside as f64 / portrait.len() as f64
        },
        breaker_openings: openings,
    }
}

/// Runs the scenario in memory.
pub fn execute(s: &Scenario) -> Result<RunOutcome, RunError> {
    let initial = initial_state(s)?;
    let (series, openings) = simulate_with_breakers(s, &initial)?;
    let prot = |source| RunError::Protection {
        scenario: s.name.clone(),
        source,
    };
    let trips = evaluate_relays(&series, &s.relays).map_err(prot)?;
    let alarms = evaluate_alarms(&series, &s.relays).map_err(prot)?;
    let portrait = phase_portrait(&series, &s.relays).map_err(prot)?;
    let overlay = if s.outputs.analytic_overlay {
        Some(
            analytic_overlay(&s.model, &s.attacks, &initial, &series.times).map_err(|source| RunError::Analytic {
                scenario: s.name.clone(),
                source,
            })?,
        )
    } else {
        None
    };
    let summary = summarize(&series, &trips, &alarms, &portrait, openings);
    Ok(RunOutcome {
        series,
        trips,
        alarms,
        portrait,
        overlay,
        summary,
    })
}

/// Header comment carried by every emitted file.
pub fn header_comment(s: &Scenario) -> String {
    let units = match s.model.dc_units {
        DcUnits::PerUnit => "per_unit".to_string(),
        DcUnits::Physical { s_base } => format!("physical(s_base={s_base})"),
    };
    format!("mvdc-fdia {TOOL_VERSION} scenario={} dc_units={units}", s.name)
}

/// Writes `contents` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), RunError> {
    let io_err = |source| RunError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err)?;
    }
    let file_name = path
        .file_name()
        .map(|f| f.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = path.with_file_name(format!(".{file_name}.tmp{}", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map_err(io_err)
}

fn line(out: &mut Vec<u8>, text: &str) {
    out.extend_from_slice(text.as_bytes());
    out.push(b'\n');
}

pub fn trip_log_csv(header: &str, events: &[TripEvent]) -> Vec<u8> {
    let mut out = Vec::new();
    line(&mut out, &format!("# {header}"));
    line(&mut out, "relay,target,t_trip[s],value,threshold");
    for e in events {
        line(
            &mut out,
            &format!(
                "{},{},{},{},{}",
                e.relay,
                e.target,
                fmt_f64(e.t_trip),
                fmt_f64(e.value),
                fmt_f64(e.threshold)
            ),
        );
    }
    out
}

pub fn phase_portrait_csv(header: &str, points: &[PortraitPoint]) -> Vec<u8> {
    let mut out = Vec::new();
    line(&mut out, &format!("# {header}"));
    line(&mut out, "rocof[Hz/s],dvdc_pct[%],inside");
    for p in points {
        line(
            &mut out,
            &format!("{},{},{}", fmt_f64(p.rocof), fmt_f64(p.dvdc_pct), p.inside),
        );
    }
    out
}

/// Two-column `(θ, ω)` trace of one machine, in recording order.
pub fn omega_theta_portrait_csv(header: &str, series: &TimeSeries, machine: usize) -> Result<Vec<u8>, ProtectionError> {
    let col = |f: &str| {
        series
            .machine_column(f, machine)
            .ok_or_else(|| ProtectionError::MissingColumn(format!("{f}_{machine}")))
    };
    let theta = col("theta")?;
    let dw = col("delta_omega")?;
    let omega_s = series.meta.omega_s.get(machine).copied().unwrap_or(1.0);
    let mut out = Vec::new();
    line(&mut out, &format!("# {header}"));
    line(&mut out, "theta[rad],omega[pu]");
    for (th, d) in theta.iter().zip(dw) {
        line(&mut out, &format!("{},{}", fmt_f64(*th), fmt_f64(omega_s + d)));
    }
    Ok(out)
}

pub fn overlay_csv(header: &str, times: &[f64], overlay: &[MachineOverlay], series: Option<&TimeSeries>) -> Vec<u8> {
    let mut out = Vec::new();
    line(&mut out, &format!("# {header}"));
    let mut head = String::from("t[s]");
    for m in overlay {
        head.push_str(&format!(
            ",delta_omega_analytic_{0}[pu],theta_analytic_{0}[rad]",
            m.machine
        ));
        if series.is_some() {
            head.push_str(&format!(",delta_omega_sim_{0}[pu],theta_sim_{0}[rad]", m.machine));
        }
    }
    line(&mut out, &head);
    for (k, t) in times.iter().enumerate() {
        let mut row = fmt_f64(*t);
        for m in overlay {
            row.push(',');
            row.push_str(&fmt_f64(m.delta_omega[k]));
            row.push(',');
            row.push_str(&fmt_f64(m.theta[k]));
            if let Some(s) = series {
                let dw = s.machine_column("delta_omega", m.machine).map_or(f64::NAN, |c| c[k]);
                let th = s.machine_column("theta", m.machine).map_or(f64::NAN, |c| c[k]);
                row.push(',');
                row.push_str(&fmt_f64(dw));
                row.push(',');
                row.push_str(&fmt_f64(th));
            }
        }
        line(&mut out, &row);
    }
    out
}

fn summary_csv(header: &str, summary: &RunSummary) -> Vec<u8> {
    let mut out = Vec::new();
    line(&mut out, &format!("# {header}"));
    line(&mut out, RunSummary::HEADER);
    line(&mut out, &summary.csv_row());
    if !summary.breaker_openings.is_empty() {
        line(&mut out, "# breaker openings: machine,t[s]");
        for (m, t) in &summary.breaker_openings {
            line(&mut out, &format!("# {m},{}", fmt_f64(*t)));
        }
    }
    out
}

fn file_path(out_dir: &Path, s: &Scenario, kind: &str) -> PathBuf {
    out_dir.join(format!("{}_{kind}.csv", s.name))
}

/// Runs the scenario and writes every requested artifact into `out_dir`.
pub fn run(s: &Scenario, out_dir: &Path) -> Result<RunReport, RunError> {
    let outcome = execute(s)?;
    let header = header_comment(s);
    let mut files = Vec::new();
    let mut emit = |kind: &str, bytes: Vec<u8>| -> Result<(), RunError> {
        let path = file_path(out_dir, s, kind);
        write_atomic(&path, &bytes)?;
        files.push(path);
        Ok(())
    };

    if s.outputs.timeseries {
        let mut buf = Vec::new();
        outcome
            .series
            .write_csv(&mut buf, &header)
            .expect("writing to memory cannot fail");
        emit("timeseries", buf)?;
    }
    if s.outputs.phase_portrait {
        emit("phase_portrait", phase_portrait_csv(&header, &outcome.portrait))?;
    }
    if s.outputs.omega_theta_portrait {
        let bytes =
            omega_theta_portrait_csv(&header, &outcome.series, s.outputs.portrait_machine).map_err(|source| {
                RunError::Protection {
                    scenario: s.name.clone(),
                    source,
                }
            })?;
        emit("omega_theta", bytes)?;
    }
    if s.outputs.trip_log {
        emit("trips", trip_log_csv(&header, &outcome.trips))?;
        emit("alarms", trip_log_csv(&header, &outcome.alarms))?;
    }
    if let Some(overlay) = &outcome.overlay {
        emit(
            "analytic_overlay",
            overlay_csv(&header, &outcome.series.times, overlay, Some(&outcome.series)),
        )?;
    }
    emit("summary", summary_csv(&header, &outcome.summary))?;

    Ok(RunReport {
        scenario: s.name.clone(),
        files,
        summary: outcome.summary,
    })
}

/// Closed-form trajectories only, sampled on the integrator grid.
pub fn run_analytic(s: &Scenario, out_dir: &Path) -> Result<PathBuf, RunError> {
    let initial = initial_state(s)?;
    let step = s.integrator.dt * s.integrator.record_every as f64;
    let count = ((s.integrator.t_end - initial.t) / step).round().max(0.0) as usize;
    let times: Vec<f64> = (0..=count).map(|k| initial.t + k as f64 * step).collect();
    let overlay = analytic_overlay(&s.model, &s.attacks, &initial, &times).map_err(|source| RunError::Analytic {
        scenario: s.name.clone(),
        source,
    })?;
    let path = file_path(out_dir, s, "analytic");
    write_atomic(&path, &overlay_csv(&header_comment(s), &times, &overlay, None))?;
    Ok(path)
}
