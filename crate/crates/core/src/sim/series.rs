//! Sampled trajectories with named, unit-annotated columns.

use std::io::{self, Write};

use crate::model::{DcUnits, MachineState, Model, SystemState, MACHINE_FIELDS, MACHINE_STATE_LEN};

use super::Derived;

const MACHINE_UNITS: [&str; MACHINE_STATE_LEN] = [
    "rad", "pu", "pu*s", "pu*s", "pu", "pu", "pu", "pu", "pu", "pu", "pu", "pu", "pu*s", "pu*s",
];

const DERIVED_FIELDS: [(&str, &str); 5] = [
    ("p_e", "pu"),
    ("p_f", "pu"),
    ("e_f", "pu"),
    ("rocof", "Hz/s"),
    ("freq_hz", "Hz"),
];

/// Constants needed to interpret a series without the model at hand.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesMeta {
    pub machines: usize,
    pub f_nominal: Vec<f64>,
    pub omega_s: Vec<f64>,
    pub v_dc_ref: f64,
    pub dc_units: DcUnits,
}

/// Recorded trajectory: strictly increasing `times` and equal-length columns.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    names: Vec<String>,
    units: Vec<String>,
    columns: Vec<Vec<f64>>,
    pub meta: SeriesMeta,
}

pub fn column_name(field: &str, machine: usize) -> String {
    format!("{field}_{machine}")
}

impl TimeSeries {
    /// Empty series with caller-chosen columns, e.g. for synthetic relay tests.
    pub fn new(meta: SeriesMeta, columns: &[(&str, &str)]) -> Self {
        Self {
            times: Vec::new(),
            names: columns.iter().map(|c| c.0.to_string()).collect(),
            units: columns.iter().map(|c| c.1.to_string()).collect(),
            columns: vec![Vec::new(); columns.len()],
            meta,
        }
    }

    /// Empty series with the full simulation column layout for `model`.
    pub fn for_model(model: &Model) -> Self {
        let meta = SeriesMeta {
            machines: model.machine_count(),
            f_nominal: model.generators.iter().map(|g| g.f_nominal).collect(),
            omega_s: model.generators.iter().map(|g| g.omega_s).collect(),
            v_dc_ref: model.converter.v_dc_ref,
            dc_units: model.dc_units,
        };
        let mut names = Vec::new();
        let mut units = Vec::new();
        for i in 0..model.machine_count() {
            for (f, u) in MACHINE_FIELDS.iter().zip(MACHINE_UNITS) {
                names.push(column_name(f, i));
                units.push(u.to_string());
            }
            for (f, u) in DERIVED_FIELDS {
                names.push(column_name(f, i));
                units.push(u.to_string());
            }
        }
        let v = model.dc_units.voltage_label();
        let (phi_unit, i_unit) = match model.dc_units {
            DcUnits::PerUnit => ("pu*s", "pu"),
            DcUnits::Physical { .. } => ("V*s", "A"),
        };
        for (f, u) in [("phi_v", phi_unit), ("v_dc", v), ("i_l", i_unit)] {
            names.push(f.to_string());
            units.push(u.to_string());
        }
        let width = names.len();
        Self {
            times: Vec::new(),
            names,
            units,
            columns: vec![Vec::new(); width],
            meta,
        }
    }

    /// Appends one recorded sample from the packed state and its derivative.
    pub(crate) fn push(&mut self, t: f64, x: &[f64], dx: &[f64], derived: &Derived, model: &Model) {
        self.times.push(t);
        let mut col = 0;
        for (i, gen) in model.generators.iter().enumerate() {
            let base = i * MACHINE_STATE_LEN;
            for j in 0..MACHINE_STATE_LEN {
                self.columns[col].push(x[base + j]);
                col += 1;
            }
            let rocof = gen.f_nominal * dx[base + 1] / gen.omega_s;
            let freq = gen.f_nominal * (gen.omega_s + x[base + 1]) / gen.omega_s;
            for v in [derived.p_e[i], derived.p_f[i], derived.e_f[i], rocof, freq] {
                self.columns[col].push(v);
                col += 1;
            }
        }
        let tail = x.len() - 2;
        for v in [x[tail], x[tail + 1], derived.i_l] {
            self.columns[col].push(v);
            col += 1;
        }
    }

    /// Appends a row of values in column order.
    pub fn push_row(&mut self, t: f64, values: &[f64]) {
        assert_eq!(values.len(), self.columns.len(), "row width");
        self.times.push(t);
        for (c, v) in self.columns.iter_mut().zip(values) {
            c.push(*v);
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|k| self.columns[k].as_slice())
    }

    pub fn machine_column(&self, field: &str, machine: usize) -> Option<&[f64]> {
        self.column(&column_name(field, machine))
    }

    /// Rebuilds the dynamic state recorded at `row`; `i_l` is the undisturbed load.
    pub fn state_at(&self, row: usize, i_l: f64) -> Option<SystemState> {
        let mut machines = Vec::with_capacity(self.meta.machines);
        for i in 0..self.meta.machines {
            let mut vals = [0.0; MACHINE_STATE_LEN];
            for (j, f) in MACHINE_FIELDS.iter().enumerate() {
                vals[j] = *self.machine_column(f, i)?.get(row)?;
            }
            machines.push(MachineState::from_slice(&vals));
        }
        Some(SystemState {
            t: *self.times.get(row)?,
            machines,
            phi_v: *self.column("phi_v")?.get(row)?,
            v_dc: *self.column("v_dc")?.get(row)?,
            i_l,
        })
    }

    /// Rows `[0, end)`.
    pub fn truncated(&self, end: usize) -> Self {
        let mut out = self.clone();
        out.times.truncate(end);
        for c in &mut out.columns {
            c.truncate(end);
        }
        out
    }

    /// Appends `other`, skipping its rows at or before the current last time.
    pub fn extend_from(&mut self, other: &TimeSeries) {
        assert_eq!(self.names, other.names, "column layout");
        let last = self.times.last().copied().unwrap_or(f64::NEG_INFINITY);
        let start = other.times.iter().position(|&t| t > last).unwrap_or(other.len());
        self.times.extend_from_slice(&other.times[start..]);
        for (c, o) in self.columns.iter_mut().zip(&other.columns) {
            c.extend_from_slice(&o[start..]);
        }
    }

    /// Comma-separated output: `header_comment` (written as a `#` line when
    /// non-empty), a `name[unit]` header, then one row per sample with
    /// 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W, header_comment: &str) -> io::Result<()> {
        if !header_comment.is_empty() {
            writeln!(w, "# {header_comment}")?;
        }
        write!(w, "t[s]")?;
        for (n, u) in self.names.iter().zip(&self.units) {
            write!(w, ",{n}[{u}]")?;
        }
        writeln!(w)?;
        for (r, t) in self.times.iter().enumerate() {
            write!(w, "{}", fmt_f64(*t))?;
            for c in &self.columns {
                write!(w, ",{}", fmt_f64(c[r]))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Float formatting used in every emitted file.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}
