//! Frequency, ROCOF and DC-link voltage relays evaluated over a recorded
//! trajectory, plus the ROCOF versus DC-voltage phase portrait.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::TimeSeries;

/// Slack on the dwell comparison so that sample times produced by repeated
/// addition still trip on the intended sample.
const DWELL_SLACK: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtectionError {
    #[error("ROCOF estimate needs at least 2 samples, got {0}")]
    InsufficientSamples(usize),
    #[error("series has no column `{0}`")]
    MissingColumn(String),
    #[error("invalid relay configuration: {0}")]
    InvalidConfig(String),
}

fn default_freq_band() -> f64 {
    5.0
}
fn default_tight_band() -> f64 {
    0.5
}
fn default_rocof_limit() -> f64 {
    0.02
}
fn default_vdc_band() -> f64 {
    10.0
}
fn default_dwell() -> f64 {
    0.1
}
fn default_rocof_window() -> f64 {
    0.1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelayConfig {
    /// Trip band on frequency, percent of nominal.
    #[serde(default = "default_freq_band")]
    pub freq_band_pct: f64,
    /// Alarm band on frequency, percent of nominal.
    #[serde(default = "default_tight_band")]
    pub freq_tight_band_pct: f64,
    /// Hz/s.
    #[serde(default = "default_rocof_limit")]
    pub rocof_limit: f64,
    /// Percent of the DC voltage reference.
    #[serde(default = "default_vdc_band")]
    pub vdc_band_pct: f64,
    /// Seconds a violation must persist before the relay acts.
    #[serde(default = "default_dwell")]
    pub dwell: f64,
    /// Seconds of frequency history used by the ROCOF estimator.
    #[serde(default = "default_rocof_window")]
    pub rocof_window: f64,
    /// Disconnect a machine when one of its relays trips.
    #[serde(default)]
    pub open_breaker: bool,
}

impl Default for RelayConfig {
    fn default() -> Self {
        Self {
            freq_band_pct: default_freq_band(),
            freq_tight_band_pct: default_tight_band(),
            rocof_limit: default_rocof_limit(),
            vdc_band_pct: default_vdc_band(),
            dwell: default_dwell(),
            rocof_window: default_rocof_window(),
            open_breaker: false,
        }
    }
}

impl RelayConfig {
    pub fn validate(&self) -> Result<(), ProtectionError> {
        let bands = [
            ("freq_band_pct", self.freq_band_pct),
            ("freq_tight_band_pct", self.freq_tight_band_pct),
            ("rocof_limit", self.rocof_limit),
            ("vdc_band_pct", self.vdc_band_pct),
            ("rocof_window", self.rocof_window),
        ];
        for (name, v) in bands {
            if !(v > 0.0) || !v.is_finite() {
                return Err(ProtectionError::InvalidConfig(format!("{name} = {v} must be positive")));
            }
        }
        if !(self.dwell >= 0.0) || !self.dwell.is_finite() {
            return Err(ProtectionError::InvalidConfig(format!(
                "dwell = {} must be non-negative",
                self.dwell
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelayKind {
    OverFreq,
    UnderFreq,
    Rocof,
    OverVdc,
    UnderVdc,
    /// Frequency above the alarm band; reported but never trips.
    OverFreqAlarm,
    /// Frequency below the alarm band; reported but never trips.
    UnderFreqAlarm,
}

impl RelayKind {
    pub fn is_alarm(self) -> bool {
        matches!(self, RelayKind::OverFreqAlarm | RelayKind::UnderFreqAlarm)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RelayKind::OverFreq => "over_freq",
            RelayKind::UnderFreq => "under_freq",
            RelayKind::Rocof => "rocof",
            RelayKind::OverVdc => "over_vdc",
            RelayKind::UnderVdc => "under_vdc",
            RelayKind::OverFreqAlarm => "over_freq_alarm",
            RelayKind::UnderFreqAlarm => "under_freq_alarm",
        }
    }
}

impl fmt::Display for RelayKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RelayTarget {
    Machine(usize),
    DcBus,
}

impl fmt::Display for RelayTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RelayTarget::Machine(i) => write!(f, "machine_{i}"),
            RelayTarget::DcBus => f.write_str("dc_bus"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TripEvent {
    pub relay: RelayKind,
    pub target: RelayTarget,
    pub t_trip: f64,
    /// Measured value at the trip sample.
    pub value: f64,
    /// The band edge that was crossed.
    pub threshold: f64,
}

/// Least-squares slope of frequency against time, in Hz/s.
pub fn rocof_estimate(samples: &[(f64, f64)]) -> Result<f64, ProtectionError> {
    if samples.len() < 2 {
        return Err(ProtectionError::InsufficientSamples(samples.len()));
    }
    let n = samples.len() as f64;
    let t_mean = samples.iter().map(|s| s.0).sum::<f64>() / n;
    let f_mean = samples.iter().map(|s| s.1).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(t, f) in samples {
        let dt = t - t_mean;
        sxy += dt * (f - f_mean);
        sxx += dt * dt;
    }
    if sxx == 0.0 {
        return Err(ProtectionError::InsufficientSamples(1));
    }
    Ok(sxy / sxx)
}

/// ROCOF at every sample from the trailing `window` seconds of history.
///
/// Entries are `None` until at least two samples are available. Running
/// sums keep this linear in the series length.
pub fn rocof_series(times: &[f64], freq: &[f64], window: f64) -> Vec<Option<f64>> {
    let n = times.len().min(freq.len());
    let mut out = Vec::with_capacity(n);
    if n == 0 {
        return out;
    }
    let (t0, f0) = (times[0], freq[0]);
    let (mut st, mut sf, mut stt, mut stf) = (0.0, 0.0, 0.0, 0.0);
    let mut lo = 0;
    for k in 0..n {
        let (t, f) = (times[k] - t0, freq[k] - f0);
        st += t;
        sf += f;
        stt += t * t;
        stf += t * f;
        while times[k] - times[lo] > window * (1.0 + DWELL_SLACK) {
            let (t, f) = (times[lo] - t0, freq[lo] - f0);
            st -= t;
            sf -= f;
            stt -= t * t;
            stf -= t * f;
            lo += 1;
        }
        let m = (k + 1 - lo) as f64;
        if k == lo {
            out.push(None);
            continue;
        }
        let sxx = stt - st * st / m;
        let sxy = stf - st * sf / m;
        out.push(if sxx > 0.0 { Some(sxy / sxx) } else { None });
    }
    out
}

fn column<'a>(series: &'a TimeSeries, name: &str) -> Result<&'a [f64], ProtectionError> {
    series
        .column(name)
        .ok_or_else(|| ProtectionError::MissingColumn(name.to_string()))
}

/// First sample at which `violates` has held for at least `dwell` seconds.
fn first_trip(times: &[f64], dwell: f64, mut violates: impl FnMut(usize) -> bool) -> Option<usize> {
    let mut since: Option<f64> = None;
    for (k, &t) in times.iter().enumerate() {
        if violates(k) {
            let t_first = *since.get_or_insert(t);
            if t - t_first >= dwell - DWELL_SLACK * dwell.max(1.0) {
                return Some(k);
            }
        } else {
            since = None;
        }
    }
    None
}

struct Check<'a> {
    relay: RelayKind,
    target: RelayTarget,
    values: &'a [f64],
    threshold: f64,
    above: bool,
}

fn run_checks(times: &[f64], dwell: f64, checks: &[Check<'_>]) -> Vec<TripEvent> {
    let mut events: Vec<TripEvent> = checks
        .iter()
        .filter_map(|c| {
            let k = first_trip(times, dwell, |k| {
                let v = c.values[k];
                if c.above {
                    v > c.threshold
                } else {
                    v < c.threshold
                }
            })?;
            Some(TripEvent {
                relay: c.relay,
                target: c.target,
                t_trip: times[k],
                value: c.values[k],
                threshold: c.threshold,
            })
        })
        .collect();
    events.sort_by(|a, b| {
        a.t_trip
            .total_cmp(&b.t_trip)
            .then(a.target.cmp(&b.target))
            .then(a.relay.cmp(&b.relay))
    });
    events
}

fn machine_count(series: &TimeSeries) -> usize {
    series.meta.machines
}

fn frequency_checks<'a>(
    series: &'a TimeSeries,
    band_pct: f64,
    kinds: (RelayKind, RelayKind),
) -> Result<Vec<Check<'a>>, ProtectionError> {
    let mut checks = Vec::new();
    for i in 0..machine_count(series) {
        let f = column(series, &format!("freq_hz_{i}"))?;
        let f_nom = series.meta.f_nominal.get(i).copied().unwrap_or(60.0);
        let target = RelayTarget::Machine(i);
        checks.push(Check {
            relay: kinds.0,
            target,
            values: f,
            threshold: f_nom * (1.0 + band_pct / 100.0),
            above: true,
        });
        checks.push(Check {
            relay: kinds.1,
            target,
            values: f,
            threshold: f_nom * (1.0 - band_pct / 100.0),
            above: false,
        });
    }
    Ok(checks)
}

/// Per-machine ROCOF with missing estimates filled by zero.
fn machine_rocof(series: &TimeSeries, cfg: &RelayConfig) -> Result<Vec<Vec<f64>>, ProtectionError> {
    (0..machine_count(series))
        .map(|i| {
            let f = column(series, &format!("freq_hz_{i}"))?;
            Ok(rocof_series(&series.times, f, cfg.rocof_window)
                .into_iter()
                .map(|r| r.unwrap_or(0.0))
                .collect())
        })
        .collect()
}

/// Trip events from the frequency, ROCOF and DC-voltage relays, ordered by
/// trip time. Each relay acts at most once per target.
pub fn evaluate_relays(series: &TimeSeries, cfg: &RelayConfig) -> Result<Vec<TripEvent>, ProtectionError> {
    cfg.validate()?;
    let mut checks = frequency_checks(series, cfg.freq_band_pct, (RelayKind::OverFreq, RelayKind::UnderFreq))?;

    let rocof = machine_rocof(series, cfg)?;
    let neg_rocof: Vec<Vec<f64>> = rocof.iter().map(|r| r.iter().map(|v| -v).collect()).collect();
    let v_dc = column(series, "v_dc")?;
    let v_ref = series.meta.v_dc_ref;

    let mut events = run_checks(&series.times, cfg.dwell, &checks);
    checks.clear();
    for (i, (r, nr)) in rocof.iter().zip(&neg_rocof).enumerate() {
        // Rising and falling violations are one relay; whichever persists first trips.
        let up = run_checks(
            &series.times,
            cfg.dwell,
            &[Check {
                relay: RelayKind::Rocof,
                target: RelayTarget::Machine(i),
                values: r,
                threshold: cfg.rocof_limit,
                above: true,
            }],
        );
        let down = run_checks(
            &series.times,
            cfg.dwell,
            &[Check {
                relay: RelayKind::Rocof,
                target: RelayTarget::Machine(i),
                values: nr,
                threshold: cfg.rocof_limit,
                above: true,
            }],
        )
        .into_iter()
        .map(|mut e| {
            e.value = -e.value;
            e.threshold = -e.threshold;
            e
        });
        if let Some(e) = up.into_iter().chain(down).min_by(|a, b| a.t_trip.total_cmp(&b.t_trip)) {
            events.push(e);
        }
    }
    checks.push(Check {
        relay: RelayKind::OverVdc,
        target: RelayTarget::DcBus,
        values: v_dc,
        threshold: v_ref * (1.0 + cfg.vdc_band_pct / 100.0),
        above: true,
    });
    checks.push(Check {
        relay: RelayKind::UnderVdc,
        target: RelayTarget::DcBus,
        values: v_dc,
        threshold: v_ref * (1.0 - cfg.vdc_band_pct / 100.0),
        above: false,
    });
    events.extend(run_checks(&series.times, cfg.dwell, &checks));
    events.sort_by(|a, b| {
        a.t_trip
            .total_cmp(&b.t_trip)
            .then(a.target.cmp(&b.target))
            .then(a.relay.cmp(&b.relay))
    });
    Ok(events)
}

/// Excursions beyond the tight frequency alarm band. These never count as trips.
pub fn evaluate_alarms(series: &TimeSeries, cfg: &RelayConfig) -> Result<Vec<TripEvent>, ProtectionError> {
    cfg.validate()?;
    let checks = frequency_checks(
        series,
        cfg.freq_tight_band_pct,
        (RelayKind::OverFreqAlarm, RelayKind::UnderFreqAlarm),
    )?;
    Ok(run_checks(&series.times, cfg.dwell, &checks))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PortraitPoint {
    pub t: f64,
    /// Hz/s, from the machine with the largest magnitude at this sample.
    pub rocof: f64,
    /// DC-voltage deviation in percent of the reference.
    pub dvdc_pct: f64,
    pub inside: bool,
}

/// Whether a `(rocof, dvdc_pct)` sample lies inside the relay rectangle.
pub fn inside_band(rocof: f64, dvdc_pct: f64, cfg: &RelayConfig) -> bool {
    rocof.abs() <= cfg.rocof_limit && dvdc_pct.abs() <= cfg.vdc_band_pct
}

/// ROCOF against DC-voltage deviation at every recorded sample.
pub fn phase_portrait(series: &TimeSeries, cfg: &RelayConfig) -> Result<Vec<PortraitPoint>, ProtectionError> {
    cfg.validate()?;
    let rocof = machine_rocof(series, cfg)?;
    let v_dc = column(series, "v_dc")?;
    let v_ref = series.meta.v_dc_ref;
    Ok(series
        .times
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let r = rocof
                .iter()
                .map(|m| m[k])
                .fold(0.0_f64, |acc, v| if v.abs() > acc.abs() { v } else { acc });
            let dv = 100.0 * (v_dc[k] - v_ref) / v_ref;
            PortraitPoint {
                t,
                rocof: r,
                dvdc_pct: dv,
                inside: inside_band(r, dv, cfg),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DcUnits;
    use crate::sim::SeriesMeta;
    use proptest::prelude::*;

    fn meta(machines: usize) -> SeriesMeta {
        SeriesMeta {
            machines,
            f_nominal: vec![60.0; machines],
            omega_s: vec![1.0; machines],
            v_dc_ref: 1.0,
            dc_units: DcUnits::PerUnit,
        }
    }

    fn synthetic(dt: f64, steps: usize, freq: impl Fn(f64) -> f64, vdc: impl Fn(f64) -> f64) -> TimeSeries {
        let mut s = TimeSeries::new(meta(1), &[("freq_hz_0", "Hz"), ("v_dc", "pu")]);
        for k in 0..=steps {
            let t = k as f64 * dt;
            s.push_row(t, &[freq(t), vdc(t)]);
        }
        s
    }

    #[test]
    fn rocof_constant_is_zero() {
        let w: Vec<_> = (0..=100).map(|k| (k as f64 * 1e-3, 60.0)).collect();
        assert_eq!(rocof_estimate(&w).unwrap(), 0.0);
    }

    #[test]
    fn rocof_exact_ramp() {
        let w: Vec<_> = (0..=100)
            .map(|k| {
                let t = 3.0 + k as f64 * 1e-3;
                (t, 60.0 + 0.1 * t)
            })
            .collect();
        assert!((rocof_estimate(&w).unwrap() - 0.1).abs() <= 1e-12);
    }

    #[test]
    fn rocof_rejects_noise() {
        let w: Vec<_> = (0..100)
            .map(|k| {
                let t = k as f64 * 1e-3;
                let wiggle = if k % 2 == 0 { 1e-6 } else { -1e-6 };
                (t, 60.0 + 0.05 * t + wiggle)
            })
            .collect();
        assert!((rocof_estimate(&w).unwrap() - 0.05).abs() <= 1e-4);
    }

    #[test]
    fn rocof_needs_two_samples() {
        assert_eq!(
            rocof_estimate(&[(0.0, 60.0)]),
            Err(ProtectionError::InsufficientSamples(1))
        );
    }

    #[test]
    fn running_rocof_matches_direct_estimate() {
        let times: Vec<f64> = (0..2000).map(|k| k as f64 * 1e-3).collect();
        let freq: Vec<f64> = times.iter().map(|t| 60.0 + 0.3 * (2.0 * t).sin()).collect();
        let running = rocof_series(&times, &freq, 0.1);
        for k in [1, 50, 100, 101, 999, 1999] {
            let lo = times
                .iter()
                .position(|&t| times[k] - t <= 0.1 * (1.0 + DWELL_SLACK))
                .unwrap();
            let window: Vec<_> = (lo..=k).map(|j| (times[j], freq[j])).collect();
            let direct = rocof_estimate(&window).unwrap();
            assert!((running[k].unwrap() - direct).abs() < 1e-8, "k={k}");
        }
        assert_eq!(running[0], None);
    }

    #[test]
    fn steady_series_has_no_trips() {
        let s = synthetic(1e-3, 2000, |_| 60.0, |_| 1.0);
        let cfg = RelayConfig::default();
        assert!(evaluate_relays(&s, &cfg).unwrap().is_empty());
        assert!(phase_portrait(&s, &cfg).unwrap().iter().all(|p| p.inside));
    }

    #[test]
    fn held_overfrequency_trips_after_dwell() {
        let s = synthetic(1e-3, 1000, |_| 63.5, |_| 1.0);
        let events = evaluate_relays(&s, &RelayConfig::default()).unwrap();
        let over: Vec<_> = events.iter().filter(|e| e.relay == RelayKind::OverFreq).collect();
        assert_eq!(over.len(), 1);
        assert!((over[0].t_trip - 0.1).abs() < 1e-12);
        assert_eq!(over[0].target, RelayTarget::Machine(0));
        assert!((over[0].threshold - 63.0).abs() < 1e-12);
    }

    #[test]
    fn sustained_undervoltage_trips() {
        let s = synthetic(1e-3, 1000, |_| 60.0, |_| 0.85);
        let events = evaluate_relays(&s, &RelayConfig::default()).unwrap();
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].relay, RelayKind::UnderVdc);
        assert_eq!(events[0].target, RelayTarget::DcBus);
    }

    #[test]
    fn zero_dwell_trips_on_first_violation() {
        let s = synthetic(1e-2, 100, |t| if t >= 0.5 - 1e-12 { 57.0 - t } else { 60.0 }, |_| 1.0);
        let cfg = RelayConfig {
            dwell: 0.0,
            rocof_limit: 1e3,
            ..RelayConfig::default()
        };
        let events = evaluate_relays(&s, &cfg).unwrap();
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].relay, RelayKind::UnderFreq);
        assert_eq!(events[0].t_trip, s.times[50]);
    }

    #[test]
    fn short_violation_does_not_trip() {
        let s = synthetic(
            1e-3,
            1000,
            |t| if (0.2..0.25).contains(&t) { 64.0 } else { 60.0 },
            |_| 1.0,
        );
        let cfg = RelayConfig {
            rocof_limit: 1e6,
            ..RelayConfig::default()
        };
        assert!(evaluate_relays(&s, &cfg).unwrap().is_empty());
    }

    #[test]
    fn alarms_are_separate_from_trips() {
        let s = synthetic(1e-3, 1000, |_| 60.6, |_| 1.0);
        let cfg = RelayConfig::default();
        assert!(evaluate_relays(&s, &cfg).unwrap().is_empty());
        let alarms = evaluate_alarms(&s, &cfg).unwrap();
        assert_eq!(alarms.len(), 1);
        assert_eq!(alarms[0].relay, RelayKind::OverFreqAlarm);
    }

    #[test]
    fn portrait_classification_examples() {
        let cfg = RelayConfig::default();
        assert!(!inside_band(0.05, 0.0, &cfg));
        assert!(!inside_band(0.0, -12.0, &cfg));
        assert!(inside_band(0.01, 5.0, &cfg));
    }

    #[test]
    fn missing_column_is_reported() {
        let s = TimeSeries::new(meta(1), &[("freq_hz_0", "Hz")]);
        assert_eq!(
            evaluate_relays(&s, &RelayConfig::default()),
            Err(ProtectionError::MissingColumn("v_dc".into()))
        );
    }

    fn key(e: &TripEvent) -> (RelayKind, RelayTarget) {
        (e.relay, e.target)
    }

    proptest! {
        #[test]
        fn wider_bands_never_add_trips(
            amp in 0.0..6.0f64,
            rate in 0.0..0.2f64,
            vamp in 0.0..0.2f64,
            grow in 1.0..3.0f64,
            which in 0usize..4,
        ) {
            let s = synthetic(5e-3, 400, |t| 60.0 + amp * (3.0 * t).sin() + rate * t, |t| 1.0 - vamp * (2.0 * t).sin());
            let base = RelayConfig::default();
            let mut wide = base;
            match which {
                0 => wide.freq_band_pct *= grow,
                1 => wide.rocof_limit *= grow,
                2 => wide.vdc_band_pct *= grow,
                _ => wide.dwell *= grow,
            }
            let narrow_keys: Vec<_> = evaluate_relays(&s, &base).unwrap().iter().map(key).collect();
            for e in evaluate_relays(&s, &wide).unwrap() {
                prop_assert!(narrow_keys.contains(&key(&e)));
            }
        }

        #[test]
        fn portrait_classification_is_pointwise(seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            use rand::seq::SliceRandom;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let cfg = RelayConfig::default();
            let pts: Vec<(f64, f64)> = (0..50)
                .map(|_| (rng.random_range(-0.05..0.05), rng.random_range(-20.0..20.0)))
                .collect();
            let mut perm: Vec<usize> = (0..pts.len()).collect();
            perm.shuffle(&mut rng);
            let labels: Vec<bool> = pts.iter().map(|p| inside_band(p.0, p.1, &cfg)).collect();
            for (j, &k) in perm.iter().enumerate() {
                let p = pts[perm[j]];
                prop_assert_eq!(inside_band(p.0, p.1, &cfg), labels[k]);
            }
        }
    }
}
