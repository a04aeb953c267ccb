//! Unknown system dynamics estimator.
//!
//! With the generalized momentum `P = M q̇` and `H = −Cᵀ q̇ + g`, the
//! dynamics read `Ṗ + H = τ + d`. Filtering every term through
//! `k ẋ_f + x_f = x` removes the need for `Ṗ` (and hence `q̈`), giving
//!
//! ```text
//! d̂ = (P − P_f)/k + H_f − τ_f
//! ```
//!
//! which is `d` passed through the same first-order lag. Only the nominal
//! model is evaluated here; there is no inverse of `M` and no acceleration.

use serde::{Deserialize, Serialize};

use crate::dynamics::{DynamicsTerms, JointVec, ManipulatorModel};
use crate::error::{check_finite, check_len, Error, Result};

/// `P = M q̇` and `H = −Cᵀ q̇ + g`, recomputed at every sample.
#[derive(Clone, Debug, PartialEq)]
pub struct AuxiliaryVars {
    pub p: JointVec,
    pub h: JointVec,
}

pub fn compute_auxiliary(model: &ManipulatorModel, q: &JointVec, qd: &JointVec) -> Result<AuxiliaryVars> {
    let terms = model.terms(q, qd)?;
    Ok(auxiliary_from_terms(&terms, qd))
}

pub fn auxiliary_from_terms(terms: &DynamicsTerms, qd: &JointVec) -> AuxiliaryVars {
    AuxiliaryVars {
        p: &terms.mass * qd,
        h: terms.coriolis.tr_mul(qd) * -1.0 + &terms.gravity,
    }
}

/// How a sampled signal is assumed to evolve between two samples when it
/// drives the filters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputHold {
    /// Piecewise constant (the latest sample over the whole interval).
    Zoh,
    /// Piecewise linear between consecutive samples.
    #[default]
    Foh,
}

/// Filter memories and latest estimate of one estimator instance.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimatorState {
    k: f64,
    pub p_f: JointVec,
    pub h_f: JointVec,
    pub tau_f: JointVec,
    pub d_hat: JointVec,
    pub initialized: bool,
}

impl EstimatorState {
    /// Zero filter memories, filter constant `k` seconds.
    pub fn new(dof: usize, k: f64) -> Result<Self> {
        if !(k > 0.0) || !k.is_finite() {
            return Err(Error::invalid("k", "filter constant must be finite and > 0"));
        }
        Ok(Self {
            k,
            p_f: JointVec::zeros(dof),
            h_f: JointVec::zeros(dof),
            tau_f: JointVec::zeros(dof),
            d_hat: JointVec::zeros(dof),
            initialized: true,
        })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn dof(&self) -> usize {
        self.p_f.len()
    }

    fn decay(&self, dt: f64) -> Result<f64> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::invalid("dt", "must be finite and > 0"));
        }
        Ok((-dt / self.k).exp())
    }

    fn check_inputs(&self, inputs: &[(&'static str, &JointVec)]) -> Result<()> {
        for (what, v) in inputs {
            check_len(what, self.dof(), v.len())?;
            check_finite(what, v.iter())?;
        }
        Ok(())
    }

    /// Advances all three filters by `dt`, holding each input constant over
    /// the step: `x_f ← a x_f + (1 − a) x` with `a = exp(−dt/k)`.
    pub fn filter_step(&mut self, p: &JointVec, h: &JointVec, tau: &JointVec, dt: f64) -> Result<()> {
        self.check_inputs(&[("P", p), ("H", h), ("tau", tau)])?;
        let a = self.decay(dt)?;
        zoh(&mut self.p_f, p, a);
        zoh(&mut self.h_f, h, a);
        zoh(&mut self.tau_f, tau, a);
        Ok(())
    }

    /// Like [`filter_step`](Self::filter_step), but `P` and `H` ramp
    /// linearly from their previous to their current samples. The torque is
    /// the value actually held over the interval.
    pub fn filter_step_ramp(
        &mut self,
        prev: &AuxiliaryVars,
        next: &AuxiliaryVars,
        tau_held: &JointVec,
        dt: f64,
    ) -> Result<()> {
        self.check_inputs(&[
            ("P", &prev.p),
            ("P", &next.p),
            ("H", &prev.h),
            ("H", &next.h),
            ("tau", tau_held),
        ])?;
        let a = self.decay(dt)?;
        let ramp = 1.0 - self.k / dt * (1.0 - a);
        foh(&mut self.p_f, &prev.p, &next.p, a, ramp);
        foh(&mut self.h_f, &prev.h, &next.h, a, ramp);
        zoh(&mut self.tau_f, tau_held, a);
        Ok(())
    }

    /// `d̂ = (P − P_f)/k + H_f − τ_f`, stored in `d_hat`.
    pub fn usde_estimate(&mut self, p: &JointVec) -> Result<JointVec> {
        if !(self.k > 0.0) {
            return Err(Error::invalid("k", "filter constant must be > 0"));
        }
        self.check_inputs(&[("P", p)])?;
        let d_hat = (p - &self.p_f) / self.k + &self.h_f - &self.tau_f;
        check_finite("d_hat", d_hat.iter())?;
        self.d_hat = d_hat.clone();
        Ok(d_hat)
    }
}

fn zoh(filtered: &mut JointVec, input: &JointVec, a: f64) {
    filtered.zip_apply(input, |f, x| *f = a * *f + (1.0 - a) * x);
}

// Exact response of the lag to an input ramping from x0 to x1 over the step.
fn foh(filtered: &mut JointVec, x0: &JointVec, x1: &JointVec, a: f64, ramp: f64) {
    for i in 0..filtered.len() {
        filtered[i] = a * filtered[i] + (1.0 - a) * x0[i] + ramp * (x1[i] - x0[i]);
    }
}

/// The estimator as run inside a control loop: one call to
/// [`update`](Usde::update) per control period, followed by
/// [`hold_torque`](Usde::hold_torque) with the torque applied until the next
/// sample.
#[derive(Clone, Debug)]
pub struct Usde {
    state: EstimatorState,
    hold: InputHold,
    prev: Option<AuxiliaryVars>,
    tau_held: JointVec,
}

impl Usde {
    pub fn new(dof: usize, k: f64, hold: InputHold) -> Result<Self> {
        Ok(Self {
            state: EstimatorState::new(dof, k)?,
            hold,
            prev: None,
            tau_held: JointVec::zeros(dof),
        })
    }

    pub fn state(&self) -> &EstimatorState {
        &self.state
    }

    /// Filters over the interval since the previous sample (if any) and
    /// returns the new estimate. The first call sees zero memories.
    pub fn update(&mut self, aux: &AuxiliaryVars, dt: f64) -> Result<JointVec> {
        if let Some(prev) = &self.prev {
            match self.hold {
                InputHold::Zoh => self.state.filter_step(&aux.p, &aux.h, &self.tau_held, dt)?,
                InputHold::Foh => self.state.filter_step_ramp(prev, aux, &self.tau_held, dt)?,
            }
        }
        let d_hat = self.state.usde_estimate(&aux.p)?;
        self.prev = Some(aux.clone());
        Ok(d_hat)
    }

    pub fn hold_torque(&mut self, tau: &JointVec) {
        self.tau_held.copy_from(tau);
    }
}
