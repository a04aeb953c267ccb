//! Fixed-step closed-loop simulation.
//!
//! Each control period the controller reads `(q, q̇)`, updates the estimator
//! and computes a torque that is held constant while the true plant (true
//! model, payload when attached, friction, scheduled torques) is integrated
//! with RK4 over `physics_substeps` substeps.

use log::{debug, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::analysis::lyapunov;
use crate::controllers::{control_step, ControllerState, TrackingError, Variant};
use crate::dynamics::{JointVec, ManipulatorModel};
use crate::error::{Error, Result};
use crate::estimator::{auxiliary_from_terms, Usde};
use crate::scenario::{Disturbances, Scenario};

/// Joint speed above which a run is declared diverged (rad/s).
pub const DIVERGENCE_SPEED: f64 = 1e3;

/// One control step. `k_hat` is present for USDE-AG runs and `sigma` (the
/// integrator value used by that step's torque) for USDE-ST runs.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    pub t: f64,
    pub q: JointVec,
    pub qd: JointVec,
    pub q_des: JointVec,
    pub e: JointVec,
    pub s: JointVec,
    pub tau_cmd: JointVec,
    pub tau_applied: JointVec,
    pub d_hat: JointVec,
    pub d_true: JointVec,
    pub k_hat: Option<JointVec>,
    pub sigma: Option<JointVec>,
    pub v_lyap: f64,
}

impl TraceRecord {
    pub fn dof(&self) -> usize {
        self.q.len()
    }

    pub fn d_tilde(&self) -> JointVec {
        &self.d_true - &self.d_hat
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn dof(&self) -> Option<usize> {
        self.records.first().map(TraceRecord::dof)
    }

    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t).collect()
    }
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub variant: Variant,
    pub trace: Trace,
    /// Time at which the state stopped being finite or bounded.
    pub diverged_at: Option<f64>,
}

impl RunResult {
    pub fn diverged(&self) -> bool {
        self.diverged_at.is_some()
    }
}

/// The simulated plant: true model, the same model with the payload, and
/// the disturbance schedule.
#[derive(Clone, Debug)]
pub struct Plant {
    bare: ManipulatorModel,
    loaded: ManipulatorModel,
    disturbance: Disturbances,
}

impl Plant {
    pub fn new(scenario: &Scenario) -> Result<Self> {
        let bare = scenario.model_true.clone();
        let loaded = match &scenario.disturbance.payload {
            Some(p) => bare.with_point_mass(p.mass, p.offset)?,
            None => bare.clone(),
        };
        Ok(Self {
            bare,
            loaded,
            disturbance: scenario.disturbance.clone(),
        })
    }

    /// Model in effect over the control period starting at `t`.
    pub fn model_at(&self, t: f64, dt: f64) -> &ManipulatorModel {
        match &self.disturbance.payload {
            // Attachment is decided once per control period so that the
            // switch lands on a sample instant.
            Some(p) if p.attached(t + 1e-6 * dt) => &self.loaded,
            _ => &self.bare,
        }
    }

    /// Joint torque from friction and the time schedule.
    pub fn external_torque(&self, t: f64, qd: &JointVec) -> JointVec {
        self.disturbance.friction.torque(qd) + self.disturbance.scheduled_torque(t)
    }

    pub fn acceleration(
        &self,
        model: &ManipulatorModel,
        t: f64,
        q: &JointVec,
        qd: &JointVec,
        tau: &JointVec,
    ) -> Result<JointVec> {
        model.forward_dynamics(q, qd, tau, &self.external_torque(t, qd))
    }

    /// Advances `(q, q̇)` by `h` with classical RK4 under the held torque.
    pub fn rk4_step(
        &self,
        model: &ManipulatorModel,
        t: f64,
        h: f64,
        q: &mut JointVec,
        qd: &mut JointVec,
        tau: &JointVec,
    ) -> Result<()> {
        let a1 = self.acceleration(model, t, q, qd, tau)?;
        let (q2, v2) = (&*q + &*qd * (0.5 * h), &*qd + &a1 * (0.5 * h));
        let a2 = self.acceleration(model, t + 0.5 * h, &q2, &v2, tau)?;
        let (q3, v3) = (&*q + &v2 * (0.5 * h), &*qd + &a2 * (0.5 * h));
        let a3 = self.acceleration(model, t + 0.5 * h, &q3, &v3, tau)?;
        let (q4, v4) = (&*q + &v3 * h, &*qd + &a3 * h);
        let a4 = self.acceleration(model, t + h, &q4, &v4, tau)?;
        *q += (&*qd + &v2 * 2.0 + &v3 * 2.0 + &v4) * (h / 6.0);
        *qd += (a1 + a2 * 2.0 + a3 * 2.0 + a4) * (h / 6.0);
        Ok(())
    }
}

/// Lumped disturbance seen through the nominal model:
/// `d = M_nom q̈ + C_nom q̇ + g_nom − τ`.
pub fn true_lumped_disturbance(
    nominal: &ManipulatorModel,
    q: &JointVec,
    qd: &JointVec,
    qdd: &JointVec,
    tau: &JointVec,
) -> Result<JointVec> {
    Ok(nominal.inverse_dynamics(q, qd, qdd)? - tau)
}

fn finite_and_bounded(q: &JointVec, qd: &JointVec) -> bool {
    q.iter().all(|x| x.is_finite()) && qd.iter().all(|x| x.is_finite() && x.abs() < DIVERGENCE_SPEED)
}

/// Runs one controller on the scenario. A run that blows up is returned
/// with `diverged_at` set and the records logged so far.
pub fn run_scenario(scenario: &Scenario, variant: Variant) -> Result<RunResult> {
    scenario.validate()?;
    let n = scenario.dof();
    let cfg = &scenario.controller;
    let nominal = &scenario.model_nominal;
    let plant = Plant::new(scenario)?;
    let dt = scenario.control_dt;
    let substeps = scenario.physics_substeps;
    let h = dt / substeps as f64;
    let steps = scenario.steps();

    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let noise = if scenario.velocity_noise_std > 0.0 {
        Some(
            Normal::new(0.0, scenario.velocity_noise_std)
                .map_err(|e| Error::invalid("sim.velocity_noise_std", e.to_string()))?,
        )
    } else {
        None
    };

    let mut state = ControllerState::new(variant, cfg);
    let mut usde = Usde::new(n, scenario.filter_k, scenario.filter_hold)?;
    let start = scenario.trajectory.at(0.0)?;
    let mut q = scenario.initial_q.clone().unwrap_or(start.q);
    let mut qd = scenario.initial_qd.clone().unwrap_or_else(|| JointVec::zeros(n));

    let mut records = Vec::with_capacity(steps);
    let mut diverged_at = None;
    for k in 0..steps {
        let t = k as f64 * dt;
        let qd_meas = match &noise {
            Some(dist) => qd.map(|v| v + dist.sample(&mut rng)),
            None => qd.clone(),
        };
        let outcome = (|| -> Result<(TraceRecord, JointVec)> {
            let traj = scenario.trajectory.at(t.min(scenario.duration))?;
            let terms = nominal.terms(&q, &qd_meas)?;
            let d_hat = if variant.uses_estimator() {
                usde.update(&auxiliary_from_terms(&terms, &qd_meas), dt)?
            } else {
                JointVec::zeros(n)
            };
            let sigma_used = state.sigma.clone();
            let out = control_step(&mut state, cfg, &terms, &q, &qd_meas, &traj, &d_hat, dt)?;
            usde.hold_torque(&out.tau);

            // Logging only: plant acceleration, disturbance oracle and the
            // Lyapunov monitor. None of it feeds back into the controller.
            let model = plant.model_at(t, dt);
            let qdd = plant.acceleration(model, t, &q, &qd, &out.tau)?;
            let d_true = true_lumped_disturbance(nominal, &q, &qd, &qdd, &out.tau)?;
            let err = TrackingError::new(&q, &qd, &traj, &cfg.eta)?;
            let d_tilde = &d_true - &d_hat;
            let v_lyap = lyapunov::for_variant(variant, cfg, &terms.mass, &err.s, &d_tilde, &state.k_hat, &sigma_used)?;
            let record = TraceRecord {
                t,
                q: q.clone(),
                qd: qd.clone(),
                q_des: traj.q,
                e: err.e,
                s: err.s,
                tau_cmd: out.tau_cmd,
                tau_applied: out.tau.clone(),
                d_hat,
                d_true,
                k_hat: (variant == Variant::Ag).then(|| state.k_hat.clone()),
                sigma: (variant == Variant::St).then_some(sigma_used),
                v_lyap,
            };
            Ok((record, out.tau))
        })();
        let (record, tau) = match outcome {
            Ok(v) => v,
            Err(e @ (Error::NonFinite(_) | Error::SingularInertia)) => {
                warn!("{variant}: stopping at t = {t:.4} s: {e}");
                diverged_at = Some(t);
                break;
            }
            Err(e) => return Err(e),
        };
        records.push(record);
        if k + 1 == steps {
            break;
        }

        let model = plant.model_at(t, dt);
        let mut ok = true;
        for j in 0..substeps {
            if plant
                .rk4_step(model, t + j as f64 * h, h, &mut q, &mut qd, &tau)
                .is_err()
            {
                ok = false;
                break;
            }
        }
        if !ok || !finite_and_bounded(&q, &qd) {
            warn!("{variant}: state diverged near t = {:.4} s", t + dt);
            diverged_at = Some(t + dt);
            break;
        }
    }
    debug!("{variant}: {} records", records.len());
    Ok(RunResult {
        variant,
        trace: Trace { records },
        diverged_at,
    })
}

/// Runs several controllers on the same scenario using up to `jobs` worker
/// threads (`0` picks the default). Results come back in `variants` order
/// and do not depend on the schedule.
pub fn run_variants(scenario: &Scenario, variants: &[Variant], jobs: usize) -> Result<Vec<RunResult>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::invalid("jobs", e.to_string()))?;
    pool.install(|| variants.par_iter().map(|&v| run_scenario(scenario, v)).collect())
}
