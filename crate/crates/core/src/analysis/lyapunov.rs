//! Lyapunov monitors evaluated along simulated trajectories.
//!
//! * `V₁ = ½SᵀMS + ½d̃ᵀd̃`
//! * `V₂ = V₁ + ½Σᵢ (1/πᵢ)(𝒦ᵢ − 𝒦̂ᵢ)²`, with the fixed gain as reference
//! * `V₃ = Σᵢ XᵢᵀPᵢXᵢ + ½d̃ᵀd̃`, `Xᵢ = [|Sᵢ|^½ sign(Sᵢ), Σ'ᵢ]`, `Σ' = M⁻¹(Σ − d̃)`
//!
//! These are diagnostics. `Σ'` needs `M⁻¹`, which is fine here because the
//! monitor never feeds the controller.

use nalgebra::Matrix2;

use crate::analysis::certificate::p_matrix;
use crate::controllers::{sign, ControllerConfig, Variant};
use crate::dynamics::{JointMat, JointVec, ManipulatorModel};
use crate::error::{check_len, Error, Result};
use crate::simulation::{Trace, TraceRecord};

pub fn v1(mass: &JointMat, s: &JointVec, d_tilde: &JointVec) -> f64 {
    0.5 * s.dot(&(mass * s)) + 0.5 * d_tilde.norm_squared()
}

/// Adaptive-gain term `½Σᵢ (1/πᵢ)(k_refᵢ − k̂ᵢ)²`; joints with `πᵢ = 0` are
/// frozen and contribute nothing.
pub fn v_ag(k_hat: &JointVec, k_ref: &JointVec, pi: &JointVec) -> f64 {
    (0..k_hat.len())
        .filter(|&i| pi[i] > 0.0)
        .map(|i| 0.5 * (k_ref[i] - k_hat[i]).powi(2) / pi[i])
        .sum()
}

pub fn v2(mass: &JointMat, s: &JointVec, d_tilde: &JointVec, k_hat: &JointVec, k_ref: &JointVec, pi: &JointVec) -> f64 {
    v1(mass, s, d_tilde) + v_ag(k_hat, k_ref, pi)
}

/// Transformed integrator `Σ' = M⁻¹(Σ − d̃)`.
pub fn sigma_prime(mass: &JointMat, sigma: &JointVec, d_tilde: &JointVec) -> Result<JointVec> {
    let chol = mass.clone().cholesky().ok_or(Error::SingularInertia)?;
    Ok(chol.solve(&(sigma - d_tilde)))
}

/// `Xᵢ = [|Sᵢ|^½ sign(Sᵢ), Σ'ᵢ]`.
pub fn x_state(s: f64, sigma_prime: f64) -> [f64; 2] {
    [s.abs().sqrt() * sign(s), sigma_prime]
}

pub fn v_st_joint(x: [f64; 2], p: &Matrix2<f64>) -> f64 {
    let x = nalgebra::Vector2::new(x[0], x[1]);
    x.dot(&(p * x))
}

pub fn v3(
    mass: &JointMat,
    s: &JointVec,
    sigma: &JointVec,
    d_tilde: &JointVec,
    t1: &JointVec,
    t2: &JointVec,
) -> Result<f64> {
    let sp = sigma_prime(mass, sigma, d_tilde)?;
    let st: f64 = (0..s.len())
        .map(|i| v_st_joint(x_state(s[i], sp[i]), &p_matrix(t1[i], t2[i])))
        .sum();
    Ok(st + 0.5 * d_tilde.norm_squared())
}

/// The function matching the controller: `V₁` for CTC and USDE-FG, `V₂`
/// for USDE-AG and `V₃` for USDE-ST.
#[allow(clippy::too_many_arguments)]
pub fn for_variant(
    variant: Variant,
    cfg: &ControllerConfig,
    mass: &JointMat,
    s: &JointVec,
    d_tilde: &JointVec,
    k_hat: &JointVec,
    sigma: &JointVec,
) -> Result<f64> {
    match variant {
        Variant::Ctc | Variant::Fg => Ok(v1(mass, s, d_tilde)),
        Variant::Ag => Ok(v2(mass, s, d_tilde, k_hat, &cfg.gain, &cfg.pi)),
        Variant::St => v3(mass, s, sigma, d_tilde, &cfg.t1, &cfg.t2),
    }
}

/// `V₁` at a logged step, with `M` from the nominal model.
pub fn v1_at(record: &TraceRecord, nominal: &ManipulatorModel) -> Result<f64> {
    let mass = nominal.mass_matrix(&record.q)?;
    Ok(v1(&mass, &record.s, &record.d_tilde()))
}

/// Constants of `V̇₁ ≤ −α₁V₁ + β₁`:
/// `α₁ = min{γ₁/λmax(M), 1/k − 1/γ₁}`, `β₁ = (k/2)d₀²`, `γ₁ = λmin(𝒦)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayRate {
    pub alpha: f64,
    pub beta: f64,
}

pub fn v1_decay_rate(gain: &JointVec, k: f64, lambda_max_m: f64, d0: f64) -> Result<DecayRate> {
    if !(k > 0.0) || !(lambda_max_m > 0.0) || !(d0 >= 0.0) {
        return Err(Error::invalid("k, λmax(M), d0", "require k > 0, λmax(M) > 0, d0 >= 0"));
    }
    let gamma1 = gain.min();
    if !(gamma1 > 0.0) {
        return Err(Error::invalid("gain", "must be > 0"));
    }
    let alpha = (gamma1 / lambda_max_m).min(1.0 / k - 1.0 / gamma1);
    if !(alpha > 0.0) {
        return Err(Error::invalid("k", "α₁ > 0 requires k < λmin(𝒦)"));
    }
    Ok(DecayRate {
        alpha,
        beta: 0.5 * k * d0 * d0,
    })
}

/// Largest `‖ḋ‖` along a trace by forward differences of `d_true`,
/// ignoring steps that start inside `skip` (e.g. payload switch instants).
pub fn measured_d0(trace: &Trace, skip: &[(f64, f64)]) -> f64 {
    trace
        .records
        .windows(2)
        .filter(|w| !skip.iter().any(|&(a, b)| w[0].t >= a && w[0].t <= b))
        .map(|w| (&w[1].d_true - &w[0].d_true).norm() / (w[1].t - w[0].t))
        .fold(0.0, f64::max)
}

/// Outcome of checking `V̇ ≤ −αV + β + ε` at every interior step of a window.
#[derive(Clone, Debug, PartialEq)]
pub struct InequalityCheck {
    pub checked: usize,
    pub satisfied: usize,
    pub epsilon: f64,
    pub worst_excess: f64,
}

impl InequalityCheck {
    pub fn fraction(&self) -> f64 {
        if self.checked == 0 {
            1.0
        } else {
            self.satisfied as f64 / self.checked as f64
        }
    }
}

/// Checks the exponential-decay inequality with central differences of the
/// logged values. The slack is `ε = 1e-3·max|V|` over the window.
pub fn check_decay(times: &[f64], values: &[f64], rate: DecayRate, window: (f64, f64)) -> Result<InequalityCheck> {
    check_len("lyapunov values", times.len(), values.len())?;
    let idx: Vec<usize> = (1..times.len().saturating_sub(1))
        .filter(|&i| times[i] >= window.0 && times[i] <= window.1)
        .collect();
    if idx.is_empty() {
        return Err(Error::EmptyWindow {
            start: window.0,
            end: window.1,
        });
    }
    let epsilon = 1e-3 * idx.iter().map(|&i| values[i].abs()).fold(0.0, f64::max);
    let mut satisfied = 0;
    let mut worst_excess = f64::NEG_INFINITY;
    for &i in &idx {
        let vdot = (values[i + 1] - values[i - 1]) / (times[i + 1] - times[i - 1]);
        let excess = vdot - (-rate.alpha * values[i] + rate.beta + epsilon);
        worst_excess = worst_excess.max(excess);
        if excess <= 0.0 {
            satisfied += 1;
        }
    }
    Ok(InequalityCheck {
        checked: idx.len(),
        satisfied,
        epsilon,
        worst_excess,
    })
}
