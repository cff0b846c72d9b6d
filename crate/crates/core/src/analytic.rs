//! Closed-form rotor speed and angle under governor-side attacks, the
//! attacked DC-link increment, and the rotor-speed / DC-voltage relation.
//!
//! Per machine, with the attacked swing equation reduced to
//! `Δω̇ = (λ1 + λ2)·Δω + λ3 + λ4(t)`, the speed and angle are
//!
//! ```text
//! Δω(t) = Δω0·e^{λT} + ∫ λ4(τ)e^{λ(t−τ)}dτ + (λ3/λ)(e^{λT} − 1)
//! θ(t)  = θ0 + φ(Δω0·λ + λ3)/λ²·(e^{λT} − 1) − φλ3T/λ
//!            + (φ/λ)∫ λ4(τ)(e^{λ(t−τ)} − 1)dτ
//! ```
//!
//! with `λ = λ1 + λ2`, `T = t − t_o` and both integrals over `[t_o, t]`.
//! The convolution is evaluated from exact antiderivatives when λ4 is built
//! only from [`TimeVaryingTerm`]s, and by adaptive quadrature otherwise.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::attack::{AttackSpec, AttackTarget, TimeVaryingTerm};
use crate::model::{ConverterParams, GeneratorParams};
use crate::quadrature;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticError {
    #[error("λ1 + λ2 = 0: the closed form is singular")]
    DegenerateEigenvalue,
    #[error("amplification gives λ1 + λ2 = {0} ≥ 0: Δω diverges instead of settling")]
    UnstableAmplification(f64),
    #[error("V_DC = {0} must be positive")]
    NonpositiveVdc(f64),
    #[error("ΔV_DC = {dv} must exceed −V_DC* = {neg_ref}")]
    InvalidVoltage { dv: f64, neg_ref: f64 },
    #[error("t = {t} precedes t_o = {t_o}")]
    BeforeStart { t: f64, t_o: f64 },
    #[error("case {0:?} does not take a nonzero coefficient")]
    InvalidCase(SteadyCase),
}

/// Electrical power trajectory fed into λ4 when the power channel is amplified.
pub type PeTrajectory = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

pub fn constant_pe(p: f64) -> PeTrajectory {
    Arc::new(move |_| p)
}

/// `weight · β(t − onset)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForcingTerm {
    pub weight: f64,
    pub beta: TimeVaryingTerm,
    pub onset: f64,
}

#[derive(Clone)]
pub struct PowerForcing {
    pub weight: f64,
    pub trajectory: PeTrajectory,
}

impl fmt::Debug for PowerForcing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PowerForcing")
            .field("weight", &self.weight)
            .finish_non_exhaustive()
    }
}

/// The time-varying forcing λ4(t).
#[derive(Debug, Clone, Default)]
pub struct Lambda4 {
    pub terms: Vec<ForcingTerm>,
    pub power: Option<PowerForcing>,
}

impl Lambda4 {
    pub fn eval(&self, t: f64) -> f64 {
        let mut v: f64 = self.terms.iter().map(|k| k.weight * k.beta.eval(t - k.onset)).sum();
        if let Some(p) = &self.power {
            v += p.weight * (p.trajectory)(t);
        }
        v
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|k| k.weight == 0.0 || k.beta.is_zero())
            && self.power.as_ref().is_none_or(|p| p.weight == 0.0)
    }

    /// Whether exact antiderivatives cover every term.
    pub fn has_exact_form(&self) -> bool {
        self.power.as_ref().is_none_or(|p| p.weight == 0.0)
    }
}

#[derive(Debug, Clone)]
pub struct LambdaCoefficients {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub lambda4: Lambda4,
}

impl LambdaCoefficients {
    /// Unattacked coefficients with only λ1 set.
    pub fn nominal(lambda1: f64) -> Self {
        Self {
            lambda1,
            lambda2: 0.0,
            lambda3: 0.0,
            lambda4: Lambda4::default(),
        }
    }

    /// Closed-loop eigenvalue λ1 + λ2.
    pub fn eigenvalue(&self) -> f64 {
        self.lambda1 + self.lambda2
    }
}

/// Coefficients of the rotor-speed (subscript 1) and electrical-power
/// (subscript 2) injections acting on one machine.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GovernorAttack {
    pub alpha1: f64,
    pub beta1: TimeVaryingTerm,
    pub gamma1: f64,
    pub alpha2: f64,
    pub beta2: TimeVaryingTerm,
    pub gamma2: f64,
    /// Time origin of β1.
    pub onset1: f64,
    /// Time origin of β2.
    pub onset2: f64,
}

impl GovernorAttack {
    pub fn constant_bias(gamma1: f64) -> Self {
        Self {
            gamma1,
            ..Default::default()
        }
    }

    pub fn amplification(alpha1: f64) -> Self {
        Self {
            alpha1,
            ..Default::default()
        }
    }

    /// Collects the speed and power attacks on `machine` that are active at `t`.
    pub fn from_specs(specs: &[AttackSpec], machine: usize, t: f64) -> Self {
        let mut out = Self::default();
        for s in specs.iter().filter(|s| s.machine == machine && s.window.contains(t)) {
            match s.target {
                AttackTarget::RotorSpeedDeviation => {
                    out.alpha1 = s.alpha;
                    out.beta1 = s.beta;
                    out.gamma1 = s.gamma;
                    out.onset1 = s.window.start;
                }
                AttackTarget::ElectricalPower => {
                    out.alpha2 = s.alpha;
                    out.beta2 = s.beta;
                    out.gamma2 = s.gamma;
                    out.onset2 = s.window.start;
                }
                AttackTarget::BusVoltageD | AttackTarget::BusVoltageQ => {}
            }
        }
        out
    }
}

/// Builds λ1..λ4 for one machine. `pe` is only consulted when α2 ≠ 0.
pub fn lambda_coefficients(
    gen: &GeneratorParams,
    attack: &GovernorAttack,
    pe: Option<PeTrajectory>,
) -> LambdaCoefficients {
    let m = 2.0 * gen.h / gen.omega_s;
    let d = gen.d;
    let power = if attack.alpha2 != 0.0 {
        Some(PowerForcing {
            weight: -attack.alpha2 / m,
            trajectory: pe.unwrap_or_else(|| constant_pe(0.0)),
        })
    } else {
        None
    };
    LambdaCoefficients {
        lambda1: -d / m,
        lambda2: -d * attack.alpha1 / m,
        lambda3: -(d * attack.gamma1 + attack.gamma2) / m,
        lambda4: Lambda4 {
            terms: vec![
                ForcingTerm {
                    weight: -d / m,
                    beta: attack.beta1,
                    onset: attack.onset1,
                },
                ForcingTerm {
                    weight: -1.0 / m,
                    beta: attack.beta2,
                    onset: attack.onset2,
                },
            ],
            power,
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadPolicy {
    pub rel_tol: f64,
    /// Use quadrature even when exact antiderivatives exist.
    pub force_numeric: bool,
}

impl Default for QuadPolicy {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            force_numeric: false,
        }
    }
}

/// `(∫ λ4(τ)e^{λ(t−τ)}dτ, ∫ λ4(τ)dτ)` over `[t_o, t]`.
fn forcing_integrals(lc: &LambdaCoefficients, t_o: f64, t: f64, policy: QuadPolicy) -> (f64, f64) {
    let l4 = &lc.lambda4;
    if l4.is_zero() || t == t_o {
        return (0.0, 0.0);
    }
    let lam = lc.eigenvalue();
    if l4.has_exact_form() && !policy.force_numeric {
        let span = t - t_o;
        l4.terms
            .iter()
            .filter(|k| k.weight != 0.0)
            .map(|k| {
                let (c, p) = exact_term(k.beta, t_o - k.onset, lam, span);
                (k.weight * c, k.weight * p)
            })
            .fold((0.0, 0.0), |acc, x| (acc.0 + x.0, acc.1 + x.1))
    } else {
        let conv = quadrature::integrate(|tau| l4.eval(tau) * (lam * (t - tau)).exp(), t_o, t, policy.rel_tol);
        let plain = quadrature::integrate(|tau| l4.eval(tau), t_o, t, policy.rel_tol);
        (conv.value, plain.value)
    }
}

/// Exact `(∫_0^T β(u+c)e^{λ(T−u)}du, ∫_0^T β(u+c)du)`.
fn exact_term(beta: TimeVaryingTerm, c: f64, lam: f64, span: f64) -> (f64, f64) {
    let em1 = (lam * span).exp_m1();
    match beta {
        TimeVaryingTerm::Zero => (0.0, 0.0),
        TimeVaryingTerm::Ramp { slope } => {
            let ramp = -span / lam + em1 / (lam * lam);
            let step = em1 / lam;
            (slope * (ramp + c * step), slope * (0.5 * span * span + c * span))
        }
        TimeVaryingTerm::Sinusoid {
            amplitude,
            frequency,
            phase,
        } => {
            let w = 2.0 * PI * frequency;
            let p = phase + w * c;
            let end = w * span + p;
            let conv = (-lam * end.sin() - w * end.cos() + (lam * span).exp() * (lam * p.sin() + w * p.cos()))
                / (lam * lam + w * w);
            let plain = if w == 0.0 {
                p.sin() * span
            } else {
                (p.cos() - end.cos()) / w
            };
            (amplitude * conv, amplitude * plain)
        }
    }
}

fn check_args(lc: &LambdaCoefficients, t_o: f64, t: f64) -> Result<f64, AnalyticError> {
    let lam = lc.eigenvalue();
    if lam == 0.0 {
        return Err(AnalyticError::DegenerateEigenvalue);
    }
    if t < t_o {
        return Err(AnalyticError::BeforeStart { t, t_o });
    }
    Ok(lam)
}

/// Rotor-speed deviation at `t` from `Δω(t_o) = dw0`.
pub fn delta_omega_closed_form(lc: &LambdaCoefficients, t_o: f64, dw0: f64, t: f64) -> Result<f64, AnalyticError> {
    delta_omega_closed_form_with(lc, t_o, dw0, t, QuadPolicy::default())
}

pub fn delta_omega_closed_form_with(
    lc: &LambdaCoefficients,
    t_o: f64,
    dw0: f64,
    t: f64,
    policy: QuadPolicy,
) -> Result<f64, AnalyticError> {
    let lam = check_args(lc, t_o, t)?;
    let span = t - t_o;
    let em1 = (lam * span).exp_m1();
    let (conv, _) = forcing_integrals(lc, t_o, t, policy);
    Ok(dw0 * (lam * span).exp() + conv + lc.lambda3 / lam * em1)
}

/// Rotor angle at `t` from `θ(t_o) = th0`, `Δω(t_o) = dw0`.
pub fn theta_closed_form(
    lc: &LambdaCoefficients,
    t_o: f64,
    th0: f64,
    dw0: f64,
    phi: f64,
    t: f64,
) -> Result<f64, AnalyticError> {
    theta_closed_form_with(lc, t_o, th0, dw0, phi, t, QuadPolicy::default())
}

pub fn theta_closed_form_with(
    lc: &LambdaCoefficients,
    t_o: f64,
    th0: f64,
    dw0: f64,
    phi: f64,
    t: f64,
    policy: QuadPolicy,
) -> Result<f64, AnalyticError> {
    let lam = check_args(lc, t_o, t)?;
    let span = t - t_o;
    let em1 = (lam * span).exp_m1();
    let (conv, plain) = forcing_integrals(lc, t_o, t, policy);
    let l3 = lc.lambda3;
    Ok(th0 + phi * (dw0 * lam + l3) / (lam * lam) * em1 - phi * l3 * span / lam + phi / lam * (conv - plain))
}

/// A single-segment closed-form trajectory.
#[derive(Debug, Clone)]
pub struct TransientSolution {
    pub coefficients: LambdaCoefficients,
    pub t_o: f64,
    pub dw0: f64,
    pub th0: f64,
    pub phi: f64,
    pub policy: QuadPolicy,
    /// `None` when Δω has no constant limit.
    pub steady_state_delta_omega: Option<f64>,
    /// Secular drift of θ, `φ·Δω̄` (zero when there is no limit).
    pub steady_state_theta_rate: f64,
}

impl TransientSolution {
    pub fn new(
        coefficients: LambdaCoefficients,
        t_o: f64,
        dw0: f64,
        th0: f64,
        phi: f64,
    ) -> Result<Self, AnalyticError> {
        let lam = coefficients.eigenvalue();
        if lam == 0.0 {
            return Err(AnalyticError::DegenerateEigenvalue);
        }
        let steady = (lam < 0.0 && coefficients.lambda4.is_zero()).then(|| -coefficients.lambda3 / lam);
        Ok(Self {
            t_o,
            dw0,
            th0,
            phi,
            policy: QuadPolicy::default(),
            steady_state_delta_omega: steady,
            steady_state_theta_rate: phi * steady.unwrap_or(0.0),
            coefficients,
        })
    }

    pub fn delta_omega(&self, t: f64) -> Result<f64, AnalyticError> {
        delta_omega_closed_form_with(&self.coefficients, self.t_o, self.dw0, t, self.policy)
    }

    pub fn theta(&self, t: f64) -> Result<f64, AnalyticError> {
        theta_closed_form_with(
            &self.coefficients,
            self.t_o,
            self.th0,
            self.dw0,
            self.phi,
            t,
            self.policy,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SteadyCase {
    Nominal,
    ConstantBias,
    Amplification,
}

/// Long-run behavior of the rotor angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThetaBehavior {
    /// θ converges to a finite value.
    Limit(f64),
    /// θ approaches the line `intercept + rate·t`.
    Drift { rate: f64, intercept: f64 },
}

/// Steady state of the three governor case studies, from `t_o = 0`.
///
/// `coefficient` is γ1 for [`SteadyCase::ConstantBias`], α1 for
/// [`SteadyCase::Amplification`] and must be zero for
/// [`SteadyCase::Nominal`].
pub fn case_steady_state(
    case: SteadyCase,
    gen: &GeneratorParams,
    coefficient: f64,
    dw0: f64,
    th0: f64,
) -> Result<(f64, ThetaBehavior), AnalyticError> {
    let phi = gen.phi();
    let attack = match case {
        SteadyCase::Nominal if coefficient != 0.0 => return Err(AnalyticError::InvalidCase(case)),
        SteadyCase::Nominal => GovernorAttack::default(),
        SteadyCase::ConstantBias => GovernorAttack::constant_bias(coefficient),
        SteadyCase::Amplification => GovernorAttack::amplification(coefficient),
    };
    let lc = lambda_coefficients(gen, &attack, None);
    let lam = lc.eigenvalue();
    if lam >= 0.0 {
        return Err(AnalyticError::UnstableAmplification(lam));
    }
    let dw_ss = -lc.lambda3 / lam;
    let theta = if lc.lambda3 == 0.0 {
        ThetaBehavior::Limit(th0 - phi * dw0 / lam)
    } else {
        ThetaBehavior::Drift {
            rate: phi * dw_ss,
            intercept: th0 - phi * (dw0 * lam + lc.lambda3) / (lam * lam),
        }
    };
    Ok((dw_ss, theta))
}

/// Attack coefficients on one bus-voltage axis.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AxisAttack {
    pub alpha: f64,
    pub beta: TimeVaryingTerm,
    pub gamma: f64,
    pub onset: f64,
}

impl AxisAttack {
    fn injection(&self, v: f64, t: f64) -> f64 {
        self.alpha * v + self.beta.eval(t - self.onset) + self.gamma
    }

    pub fn negated(&self) -> Self {
        Self {
            alpha: -self.alpha,
            beta: self.beta.scaled(-1.0),
            gamma: -self.gamma,
            onset: self.onset,
        }
    }
}

/// d- and q-axis bus-voltage attack on one machine.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BusVoltageAttack {
    pub d: AxisAttack,
    pub q: AxisAttack,
}

impl BusVoltageAttack {
    /// Per-machine bus-voltage attacks active at `t`.
    pub fn from_specs(specs: &[AttackSpec], machines: usize, t: f64) -> Vec<Self> {
        let mut out = vec![Self::default(); machines];
        for s in specs.iter().filter(|s| s.window.contains(t) && s.machine < machines) {
            let axis = AxisAttack {
                alpha: s.alpha,
                beta: s.beta,
                gamma: s.gamma,
                onset: s.window.start,
            };
            match s.target {
                AttackTarget::BusVoltageD => out[s.machine].d = axis,
                AttackTarget::BusVoltageQ => out[s.machine].q = axis,
                _ => {}
            }
        }
        out
    }
}

/// Bus voltages and output currents of one converter.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BusSnapshot {
    pub v_bd: f64,
    pub v_bq: f64,
    pub i_od: f64,
    pub i_oq: f64,
}

/// Extra DC-link voltage rate `V̇_DC^A − V̇_DC` caused by corrupted bus-voltage
/// measurements entering the converter power terms.
pub fn dc_attack_increment(
    buses: &[BusSnapshot],
    v_dc: f64,
    conv: &ConverterParams,
    attacks: &[BusVoltageAttack],
    t: f64,
) -> Result<f64, AnalyticError> {
    if !(v_dc > 0.0) {
        return Err(AnalyticError::NonpositiveVdc(v_dc));
    }
    let sum: f64 = buses
        .iter()
        .zip(attacks)
        .map(|(b, a)| a.d.injection(b.v_bd, t) * b.i_od + a.q.injection(b.v_bq, t) * b.i_oq)
        .sum();
    Ok(3.0 / (2.0 * conv.c_dc * v_dc) * sum)
}

/// Rotor-speed deviation implied by a DC-link deviation `dv` under AC/DC power balance:
/// `Δω = C_DC·ω_s/(4·H·S_c)·((ΔV + V*)² − V*²)`.
pub fn omega_from_vdc(dv: f64, conv: &ConverterParams, gen: &GeneratorParams) -> Result<f64, AnalyticError> {
    let v_ref = conv.v_dc_ref;
    if !(dv > -v_ref) {
        return Err(AnalyticError::InvalidVoltage { dv, neg_ref: -v_ref });
    }
    let k = conv.c_dc * gen.omega_s / (4.0 * gen.h * conv.s_c);
    // (ΔV + V*)² − V*² factored to stay exact at ΔV = 0.
    Ok(k * dv * (dv + 2.0 * v_ref))
}
