//! Scenario documents: TOML parsing with aggregated, line-referenced
//! validation, and the inverse serializer.

use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use toml::Spanned;

use crate::attack::{check_overlaps, AttackSpec};
use crate::model::{
    validate_model, ConverterParams, DcUnits, GeneratorParams, Model, ModelOptions, NetworkModel, PeMode, SystemState,
};
use crate::protection::RelayConfig;
use crate::sim::{FaultSpec, IntegratorConfig};

/// How the run obtains its starting state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", deny_unknown_fields)]
pub enum InitialCondition {
    /// Solve for the operating point at DC load current `load`, then add the
    /// per-machine speed offsets in `delta_omega`.
    Equilibrium {
        load: f64,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        delta_omega: Vec<f64>,
    },
    Explicit {
        state: SystemState,
    },
}

/// Requested artifacts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default)]
    pub timeseries: bool,
    #[serde(default)]
    pub phase_portrait: bool,
    #[serde(default)]
    pub omega_theta_portrait: bool,
    #[serde(default)]
    pub trip_log: bool,
    #[serde(default)]
    pub analytic_overlay: bool,
    /// Machine drawn in the ω–θ portrait.
    #[serde(default)]
    pub portrait_machine: usize,
}

impl Outputs {
    pub fn all() -> Self {
        Self {
            timeseries: true,
            phase_portrait: true,
            omega_theta_portrait: true,
            trip_log: true,
            analytic_overlay: true,
            portrait_machine: 0,
        }
    }

    pub fn any(&self) -> bool {
        self.timeseries || self.phase_portrait || self.omega_theta_portrait || self.trip_log || self.analytic_overlay
    }
}

/// A validated experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub model: Model,
    pub initial: InitialCondition,
    pub attacks: Vec<AttackSpec>,
    pub faults: Vec<FaultSpec>,
    pub integrator: IntegratorConfig,
    pub relays: RelayConfig,
    pub outputs: Outputs,
}

/// One problem found in a scenario document.
#[derive(Debug, Clone, PartialEq)]
pub struct Issue {
    /// 1-based line, when the problem can be tied to one.
    pub line: Option<usize>,
    /// Dotted path of the offending field.
    pub field: String,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}: {}", self.field, self.message),
            None => write!(f, "{}: {}", self.field, self.message),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("parse error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Parse { line: Option<usize>, message: String },
    #[error("{}", render_issues(.0))]
    Validation(Vec<Issue>),
}

fn render_issues(issues: &[Issue]) -> String {
    let mut s = format!("{} validation error(s)", issues.len());
    for i in issues {
        s.push_str("\n  ");
        s.push_str(&i.to_string());
    }
    s
}

impl ScenarioError {
    pub fn issues(&self) -> &[Issue] {
        match self {
            ScenarioError::Validation(v) => v,
            ScenarioError::Parse { .. } => &[],
        }
    }

    /// Whether some issue names `field` (exactly or as a prefix of its path).
    pub fn mentions(&self, field: &str) -> bool {
        self.issues().iter().any(|i| i.field.starts_with(field))
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    generators: Option<Vec<Spanned<GeneratorParams>>>,
    network: Option<Spanned<NetworkModel>>,
    converter: Option<Spanned<ConverterParams>>,
    dc_units: Option<DcUnits>,
    #[serde(default)]
    options: ModelOptions,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: Option<String>,
    model: Option<Spanned<RawModel>>,
    initial: Option<Spanned<InitialCondition>>,
    #[serde(default)]
    attack: Vec<Spanned<AttackSpec>>,
    #[serde(default)]
    fault: Vec<Spanned<FaultSpec>>,
    integrator: Option<Spanned<IntegratorConfig>>,
    relays: Option<Spanned<RelayConfig>>,
    outputs: Option<Spanned<Outputs>>,
}

#[derive(Serialize)]
struct ScenarioDoc<'a> {
    name: &'a str,
    model: &'a Model,
    initial: &'a InitialCondition,
    integrator: &'a IntegratorConfig,
    relays: &'a RelayConfig,
    outputs: &'a Outputs,
    #[serde(skip_serializing_if = "<[_]>::is_empty")]
    attack: &'a [AttackSpec],
    #[serde(skip_serializing_if = "<[_]>::is_empty")]
    fault: &'a [FaultSpec],
}

struct Lines<'a> {
    text: &'a str,
}

impl Lines<'_> {
    fn of(&self, span: Range<usize>) -> Option<usize> {
        let end = span.start.min(self.text.len());
        Some(self.text[..end].bytes().filter(|&b| b == b'\n').count() + 1)
    }
}

struct Collector<'a> {
    lines: Lines<'a>,
    issues: Vec<Issue>,
}

impl Collector<'_> {
    fn push(&mut self, span: Option<Range<usize>>, field: impl Into<String>, message: impl Into<String>) {
        self.issues.push(Issue {
            line: span.and_then(|s| self.lines.of(s)),
            field: field.into(),
            message: message.into(),
        });
    }
}

/// Parses and validates a scenario document.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let raw: RawScenario = toml::from_str(text).map_err(|e| ScenarioError::Parse {
        line: e.span().and_then(|s| Lines { text }.of(s)),
        message: e.message().to_string(),
    })?;
    let mut c = Collector {
        lines: Lines { text },
        issues: Vec::new(),
    };

    let name = raw.name.unwrap_or_default();
    if name.trim().is_empty() {
        c.push(None, "name", "scenario name is required");
    }

    let model = build_model(raw.model, &mut c);
    let n = model.as_ref().map(|m| m.machine_count());

    let integrator = match raw.integrator {
        Some(sp) => {
            let span = sp.span();
            let integ = sp.into_inner();
            if let Some((field, message)) = integ.first_problem() {
                c.push(Some(span), format!("integrator.{field}"), message);
            }
            Some(integ)
        }
        None => {
            c.push(None, "integrator", "section is required");
            None
        }
    };
    let t_end = integrator.map(|i| i.t_end);

    let initial = match raw.initial {
        Some(sp) => {
            let span = sp.span();
            let init = sp.into_inner();
            check_initial(&init, n, span, &mut c);
            Some(init)
        }
        None => {
            c.push(None, "initial", "section is required");
            None
        }
    };

    let mut attacks = Vec::with_capacity(raw.attack.len());
    for (k, sp) in raw.attack.into_iter().enumerate() {
        let span = sp.span();
        let a = sp.into_inner();
        let field = format!("attack[{k}]");
        check_window_start(&field, a.window.start, a.window.end, t_end, span.clone(), &mut c);
        if let Some(n) = n {
            if a.machine >= n {
                c.push(
                    Some(span.clone()),
                    format!("{field}.machine"),
                    format!("machine {} does not exist (model has {n})", a.machine),
                );
            }
        }
        if !a.alpha.is_finite() || !a.gamma.is_finite() {
            c.push(Some(span), format!("{field}.alpha"), "coefficients must be finite");
        }
        attacks.push(a);
    }
    if let Err(e) = check_overlaps(&attacks) {
        c.push(None, "attack", e.to_string());
    }

    let mut faults = Vec::with_capacity(raw.fault.len());
    for (k, sp) in raw.fault.into_iter().enumerate() {
        let span = sp.span();
        let f = sp.into_inner();
        let field = format!("fault[{k}]");
        check_window_start(&field, f.window.start, f.window.end, t_end, span.clone(), &mut c);
        if !(f.load_multiplier >= 0.0) || !f.load_multiplier.is_finite() {
            c.push(
                Some(span.clone()),
                format!("{field}.load_multiplier"),
                "must be finite and non-negative",
            );
        }
        if !f.admittance_scale.is_finite() {
            c.push(
                Some(span.clone()),
                format!("{field}.admittance_scale"),
                "must be finite",
            );
        }
        if let Some(n) = n {
            if f.entries.iter().any(|e| e[0] >= n || e[1] >= n) {
                c.push(
                    Some(span),
                    format!("{field}.entries"),
                    format!("index out of range for {n} machines"),
                );
            }
        }
        faults.push(f);
    }

    let relays = match raw.relays {
        Some(sp) => {
            let span = sp.span();
            let r = sp.into_inner();
            if let Err(e) = r.validate() {
                c.push(Some(span), "relays", e.to_string());
            }
            r
        }
        None => RelayConfig::default(),
    };

    let outputs = match raw.outputs {
        Some(sp) => {
            let span = sp.span();
            let o = sp.into_inner();
            if !o.any() {
                c.push(Some(span.clone()), "outputs", "at least one output must be requested");
            }
            if let Some(n) = n {
                if o.portrait_machine >= n {
                    c.push(
                        Some(span),
                        "outputs.portrait_machine",
                        format!("machine {} does not exist", o.portrait_machine),
                    );
                }
            }
            Some(o)
        }
        None => {
            c.push(None, "outputs", "section is required");
            None
        }
    };

    match (c.issues.is_empty(), model, initial, integrator, outputs) {
        (true, Some(model), Some(initial), Some(integrator), Some(outputs)) => Ok(Scenario {
            name,
            model,
            initial,
            attacks,
            faults,
            integrator,
            relays,
            outputs,
        }),
        _ => Err(ScenarioError::Validation(c.issues)),
    }
}

fn build_model(raw: Option<Spanned<RawModel>>, c: &mut Collector<'_>) -> Option<Model> {
    let Some(sp) = raw else {
        c.push(None, "model", "section is required");
        return None;
    };
    let span = sp.span();
    let raw = sp.into_inner();
    let gens: Vec<GeneratorParams> = raw
        .generators
        .unwrap_or_default()
        .into_iter()
        .map(Spanned::into_inner)
        .collect();
    if gens.is_empty() {
        c.push(
            Some(span.clone()),
            "model.generators",
            "at least one generator is required",
        );
    }
    let network = match raw.network {
        Some(n) => Some(n.into_inner()),
        None => {
            c.push(Some(span.clone()), "model.network", "section is required");
            None
        }
    };
    let converter = match raw.converter {
        Some(v) => Some(v.into_inner()),
        None => {
            c.push(Some(span.clone()), "model.converter", "section is required");
            None
        }
    };
    if raw.dc_units.is_none() {
        c.push(
            Some(span.clone()),
            "model.dc_units",
            "the unit system for V_DC must be declared (per_unit or physical)",
        );
    }
    if let Some(DcUnits::Physical { s_base }) = raw.dc_units {
        if !(s_base > 0.0) || !s_base.is_finite() {
            c.push(Some(span.clone()), "model.dc_units.s_base", "must be positive");
        }
    }
    let (Some(network), Some(converter), Some(dc_units)) = (network, converter, raw.dc_units) else {
        return None;
    };
    if gens.is_empty() {
        return None;
    }
    let report = validate_model(&gens, &network, &converter);
    for v in &report.violations {
        c.push(Some(span.clone()), format!("model.{}", v.location), v.rule.clone());
    }
    if let PeMode::Frozen { values } = &raw.options.pe_mode {
        if values.len() != gens.len() {
            c.push(
                Some(span.clone()),
                "model.options.pe_mode.values",
                format!("expected {} values, got {}", gens.len(), values.len()),
            );
        }
    }
    Some(Model {
        generators: gens,
        network,
        converter,
        dc_units,
        options: raw.options,
    })
}

fn check_initial(init: &InitialCondition, n: Option<usize>, span: Range<usize>, c: &mut Collector<'_>) {
    match init {
        InitialCondition::Equilibrium { load, delta_omega } => {
            if !(*load >= 0.0) || !load.is_finite() {
                c.push(Some(span.clone()), "initial.load", "must be finite and non-negative");
            }
            if delta_omega.iter().any(|v| !v.is_finite()) {
                c.push(Some(span.clone()), "initial.delta_omega", "offsets must be finite");
            }
            if let Some(n) = n {
                if delta_omega.len() > n {
                    c.push(
                        Some(span),
                        "initial.delta_omega",
                        format!("{} offsets for {n} machines", delta_omega.len()),
                    );
                }
            }
        }
        InitialCondition::Explicit { state } => {
            if !state.is_finite() {
                c.push(Some(span.clone()), "initial.state", "state must be finite");
            }
            if !(state.v_dc > 0.0) {
                c.push(Some(span.clone()), "initial.state.v_dc", "must be positive");
            }
            if let Some(n) = n {
                if state.machines.len() != n {
                    c.push(
                        Some(span),
                        "initial.state.machines",
                        format!("{} machine states for {n} machines", state.machines.len()),
                    );
                }
            }
        }
    }
}

fn check_window_start(
    field: &str,
    start: f64,
    end: f64,
    t_end: Option<f64>,
    span: Range<usize>,
    c: &mut Collector<'_>,
) {
    if !start.is_finite() || start < 0.0 {
        c.push(
            Some(span.clone()),
            format!("{field}.window.start"),
            "must be finite and non-negative",
        );
    }
    if !(start < end) {
        c.push(
            Some(span.clone()),
            format!("{field}.window.start"),
            format!("start {start} must precede end {end}"),
        );
    }
    if let Some(t_end) = t_end {
        if start > t_end {
            c.push(
                Some(span),
                format!("{field}.window.start"),
                format!("start {start} is after the simulation end {t_end}"),
            );
        }
    }
}

/// Writes `s` in the format read by [`parse_scenario`].
pub fn serialize_scenario(s: &Scenario) -> String {
    let doc = ScenarioDoc {
        name: &s.name,
        model: &s.model,
        initial: &s.initial,
        integrator: &s.integrator,
        relays: &s.relays,
        outputs: &s.outputs,
        attack: &s.attacks,
        fault: &s.faults,
    };
    toml::to_string(&doc).expect("scenario values are always representable")
}
