//! Joint torque control laws sharing the sliding variable `S = ė + ηe`.
//!
//! * CTC: `τ = 𝒦S + Mζ̇ + Cζ + g` (no disturbance compensation)
//! * USDE-FG: `τ = 𝒦S + Mζ̇ + Cζ + g − d̂`
//! * USDE-AG: USDE-FG with the diagonal gain adapted online
//! * USDE-ST: `τ = T₁|S|^½ sign(S) − Σ + Mζ̇ + Cq̇ + g − d̂`, `Σ̇ = −T₂ sign(S)`
//!
//! with `e = q_des − q`, `ζ = q̇_des + ηe` and `ζ̇ = q̈_des + ηė`. None of the
//! laws uses an acceleration measurement or `M⁻¹`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dynamics::{DynamicsTerms, JointVec};
use crate::error::{check_finite, check_len, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Ctc,
    Fg,
    Ag,
    St,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Ctc, Variant::Fg, Variant::Ag, Variant::St];

    /// Short name used on the command line and in file names.
    pub fn name(self) -> &'static str {
        match self {
            Variant::Ctc => "ctc",
            Variant::Fg => "fg",
            Variant::Ag => "ag",
            Variant::St => "st",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Variant::Ctc => "CTC",
            Variant::Fg => "USDE-FG",
            Variant::Ag => "USDE-AG",
            Variant::St => "USDE-ST",
        }
    }

    pub fn uses_estimator(self) -> bool {
        self != Variant::Ctc
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s) || v.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                Error::invalid(
                    "controller",
                    format!("unknown variant `{s}`; expected one of ctc, fg, ag, st"),
                )
            })
    }
}

/// Desired joint motion at one instant.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub q: JointVec,
    pub qd: JointVec,
    pub qdd: JointVec,
}

/// Diagonal gains are stored as vectors of their diagonal entries.
#[derive(Clone, Debug, PartialEq)]
pub struct ControllerConfig {
    /// Sliding-surface slope η.
    pub eta: JointVec,
    /// Fixed feedback gain 𝒦 (CTC, FG; reference gain for the AG monitor).
    pub gain: JointVec,
    /// Lower bound and initial value of the adaptive gain.
    pub gain_lower: JointVec,
    /// Adaptation rate π.
    pub pi: JointVec,
    /// σ-modification leakage.
    pub sigma: JointVec,
    /// Super-twisting proportional gain T₁.
    pub t1: JointVec,
    /// Super-twisting integral gain T₂.
    pub t2: JointVec,
    /// Anti-windup bound on |Σ_i| (N·m); `f64::INFINITY` disables it.
    pub sigma_max: f64,
    /// Symmetric torque saturation per joint (N·m).
    pub tau_limits: JointVec,
    /// Drive the adaptive law with |S_i| instead of S_i. Experimental.
    pub abs_s: bool,
}

impl ControllerConfig {
    /// Gain set of the seven-joint experiment (k = 0.08 is the estimator's).
    pub fn seven_dof_reference() -> Self {
        let v = |x: [f64; 7]| JointVec::from_row_slice(&x);
        let gain = v([10.0, 10.0, 10.0, 10.0, 8.0, 8.0, 8.0]);
        Self {
            eta: JointVec::from_element(7, 10.0),
            gain_lower: gain.clone(),
            gain,
            pi: JointVec::from_element(7, 70.0),
            sigma: JointVec::from_element(7, 1.0),
            t1: v([4.0, 4.0, 4.0, 4.0, 2.0, 2.0, 2.0]),
            t2: v([12.0, 12.0, 12.0, 12.0, 4.0, 4.0, 4.0]),
            sigma_max: 50.0,
            tau_limits: v([87.0, 87.0, 87.0, 87.0, 12.0, 12.0, 12.0]),
            abs_s: false,
        }
    }

    /// Same gains as joints 1–4 of the seven-joint set, for an `n`-joint arm.
    pub fn uniform(n: usize) -> Self {
        Self {
            eta: JointVec::from_element(n, 10.0),
            gain: JointVec::from_element(n, 10.0),
            gain_lower: JointVec::from_element(n, 10.0),
            pi: JointVec::from_element(n, 70.0),
            sigma: JointVec::from_element(n, 1.0),
            t1: JointVec::from_element(n, 4.0),
            t2: JointVec::from_element(n, 12.0),
            sigma_max: 50.0,
            tau_limits: JointVec::from_element(n, f64::INFINITY),
            abs_s: false,
        }
    }

    pub fn validate(&self, dof: usize) -> Result<()> {
        let fields: [(&'static str, &JointVec, bool); 8] = [
            ("eta", &self.eta, true),
            ("gain", &self.gain, true),
            ("gain_lower", &self.gain_lower, true),
            ("pi", &self.pi, false),
            ("sigma", &self.sigma, false),
            ("t1", &self.t1, true),
            ("t2", &self.t2, true),
            ("tau_limits", &self.tau_limits, true),
        ];
        for (name, v, strict) in fields {
            check_len(name, dof, v.len())?;
            let ok = v
                .iter()
                .all(|&x| if strict { x > 0.0 } else { x >= 0.0 } && !x.is_nan());
            if !ok {
                let bound = if strict { "> 0" } else { ">= 0" };
                return Err(Error::invalid(
                    format!("controller.{name}"),
                    format!("every entry must be {bound}"),
                ));
            }
            if name != "tau_limits" {
                check_finite(name, v.iter())?;
            }
        }
        if self.gain_lower.iter().zip(self.gain.iter()).any(|(lo, k)| lo > k) {
            return Err(Error::invalid("controller.gain_lower", "must not exceed gain"));
        }
        if !(self.sigma_max > 0.0) {
            return Err(Error::invalid("controller.sigma_max", "must be > 0"));
        }
        Ok(())
    }
}

/// Per-loop mutable controller state.
#[derive(Clone, Debug, PartialEq)]
pub struct ControllerState {
    pub variant: Variant,
    /// Adaptive gains 𝒦̂ (meaningful for AG only).
    pub k_hat: JointVec,
    /// Super-twisting integrator Σ (meaningful for ST only).
    pub sigma: JointVec,
}

impl ControllerState {
    pub fn new(variant: Variant, cfg: &ControllerConfig) -> Self {
        let n = cfg.eta.len();
        Self {
            variant,
            k_hat: cfg.gain_lower.clone(),
            sigma: JointVec::zeros(n),
        }
    }
}

/// Commanded torque before and after saturation.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlOutput {
    pub tau_cmd: JointVec,
    pub tau: JointVec,
}

/// `sign(0) = 0`.
#[inline]
pub fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `S = ė + ηe`.
pub fn sliding_variable(e: &JointVec, ed: &JointVec, eta: &JointVec) -> Result<JointVec> {
    check_len("ed", e.len(), ed.len())?;
    check_len("eta", e.len(), eta.len())?;
    Ok(ed + eta.component_mul(e))
}

/// Tracking errors `e = q_des − q`, `ė = q̇_des − q̇` and `S`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrackingError {
    pub e: JointVec,
    pub ed: JointVec,
    pub s: JointVec,
}

impl TrackingError {
    pub fn new(q: &JointVec, qd: &JointVec, traj: &TrajectoryPoint, eta: &JointVec) -> Result<Self> {
        check_len("q", traj.q.len(), q.len())?;
        check_len("qd", traj.qd.len(), qd.len())?;
        let e = &traj.q - q;
        let ed = &traj.qd - qd;
        let s = sliding_variable(&e, &ed, eta)?;
        Ok(Self { e, ed, s })
    }
}

fn check_inputs(
    cfg: &ControllerConfig,
    terms: &DynamicsTerms,
    q: &JointVec,
    qd: &JointVec,
    d_hat: &JointVec,
) -> Result<()> {
    let n = cfg.eta.len();
    check_len("M", n, terms.mass.nrows())?;
    for (what, v) in [("q", q), ("qd", qd), ("d_hat", d_hat)] {
        check_len(what, n, v.len())?;
        check_finite(what, v.iter())?;
    }
    Ok(())
}

fn saturate(tau_cmd: JointVec, limits: &JointVec) -> ControlOutput {
    let tau = tau_cmd.zip_map(limits, |t, lim| t.clamp(-lim, lim));
    ControlOutput { tau_cmd, tau }
}

/// USDE-FG law with an arbitrary diagonal gain.
fn fg_law(
    gain: &JointVec,
    cfg: &ControllerConfig,
    terms: &DynamicsTerms,
    err: &TrackingError,
    traj: &TrajectoryPoint,
    d_hat: &JointVec,
) -> ControlOutput {
    let zeta = &traj.qd + cfg.eta.component_mul(&err.e);
    let zeta_dot = &traj.qdd + cfg.eta.component_mul(&err.ed);
    let tau = gain.component_mul(&err.s) + &terms.mass * zeta_dot + &terms.coriolis * zeta + &terms.gravity - d_hat;
    saturate(tau, &cfg.tau_limits)
}

/// USDE-FG. `terms` are the nominal `M`, `C`, `g` at the measured state.
pub fn control_fg(
    cfg: &ControllerConfig,
    terms: &DynamicsTerms,
    q: &JointVec,
    qd: &JointVec,
    traj: &TrajectoryPoint,
    d_hat: &JointVec,
) -> Result<ControlOutput> {
    check_inputs(cfg, terms, q, qd, d_hat)?;
    let err = TrackingError::new(q, qd, traj, &cfg.eta)?;
    Ok(fg_law(&cfg.gain, cfg, terms, &err, traj, d_hat))
}

/// Computed torque control: USDE-FG without disturbance compensation.
pub fn control_ctc(
    cfg: &ControllerConfig,
    terms: &DynamicsTerms,
    q: &JointVec,
    qd: &JointVec,
    traj: &TrajectoryPoint,
) -> Result<ControlOutput> {
    control_fg(cfg, terms, q, qd, traj, &JointVec::zeros(q.len()))
}

/// One forward-Euler step of `𝒦̂̇_i = π_i(S_i − σ_i 𝒦̂_i)`, active while
/// `𝒦̂_i` is at or above its lower bound and clamped to it otherwise.
pub fn adaptive_gain_step(state: &mut ControllerState, cfg: &ControllerConfig, s: &JointVec, dt: f64) -> Result<()> {
    if state.variant != Variant::Ag {
        return Err(Error::invalid(
            "variant",
            "adaptive gain step requires the AG controller",
        ));
    }
    if !(dt > 0.0) {
        return Err(Error::invalid("dt", "must be > 0"));
    }
    check_len("S", state.k_hat.len(), s.len())?;
    for i in 0..s.len() {
        let lower = cfg.gain_lower[i];
        let drive = if cfg.abs_s { s[i].abs() } else { s[i] };
        let k = state.k_hat[i];
        let next = if k >= lower {
            k + dt * cfg.pi[i] * (drive - cfg.sigma[i] * k)
        } else {
            k
        };
        state.k_hat[i] = next.max(lower);
    }
    Ok(())
}

/// USDE-AG: adapt the gain, then apply USDE-FG with `𝒦 = diag(𝒦̂)`.
#[allow(clippy::too_many_arguments)]
pub fn control_ag(
    state: &mut ControllerState,
    cfg: &ControllerConfig,
    terms: &DynamicsTerms,
    q: &JointVec,
    qd: &JointVec,
    traj: &TrajectoryPoint,
    d_hat: &JointVec,
    dt: f64,
) -> Result<ControlOutput> {
    check_inputs(cfg, terms, q, qd, d_hat)?;
    let err = TrackingError::new(q, qd, traj, &cfg.eta)?;
    adaptive_gain_step(state, cfg, &err.s, dt)?;
    Ok(fg_law(&state.k_hat, cfg, terms, &err, traj, d_hat))
}

/// USDE-ST. The integrator is advanced after the torque is formed and is
/// clamped to `±sigma_max`.
#[allow(clippy::too_many_arguments)]
pub fn control_st(
    state: &mut ControllerState,
    cfg: &ControllerConfig,
    terms: &DynamicsTerms,
    q: &JointVec,
    qd: &JointVec,
    traj: &TrajectoryPoint,
    d_hat: &JointVec,
    dt: f64,
) -> Result<ControlOutput> {
    if state.variant != Variant::St {
        return Err(Error::invalid(
            "variant",
            "super-twisting step requires the ST controller",
        ));
    }
    if !(dt > 0.0) {
        return Err(Error::invalid("dt", "must be > 0"));
    }
    check_inputs(cfg, terms, q, qd, d_hat)?;
    let err = TrackingError::new(q, qd, traj, &cfg.eta)?;
    let zeta_dot = &traj.qdd + cfg.eta.component_mul(&err.ed);
    let switching = err.s.map(|s| s.abs().sqrt() * sign(s));
    let tau = cfg.t1.component_mul(&switching) - &state.sigma
        + &terms.mass * zeta_dot
        + &terms.coriolis * qd
        + &terms.gravity
        - d_hat;
    for i in 0..err.s.len() {
        let next = state.sigma[i] - dt * cfg.t2[i] * sign(err.s[i]);
        state.sigma[i] = next.clamp(-cfg.sigma_max, cfg.sigma_max);
    }
    Ok(saturate(tau, &cfg.tau_limits))
}

/// Dispatches to the law selected by `state.variant`. CTC ignores `d_hat`.
#[allow(clippy::too_many_arguments)]
pub fn control_step(
    state: &mut ControllerState,
    cfg: &ControllerConfig,
    terms: &DynamicsTerms,
    q: &JointVec,
    qd: &JointVec,
    traj: &TrajectoryPoint,
    d_hat: &JointVec,
    dt: f64,
) -> Result<ControlOutput> {
    match state.variant {
        Variant::Ctc => control_ctc(cfg, terms, q, qd, traj),
        Variant::Fg => control_fg(cfg, terms, q, qd, traj, d_hat),
        Variant::Ag => control_ag(state, cfg, terms, q, qd, traj, d_hat, dt),
        Variant::St => control_st(state, cfg, terms, q, qd, traj, d_hat, dt),
    }
}
