//! Scenario description: plant and nominal models, gains, reference motion,
//! disturbance schedule and timing. Loaded from TOML with sections
//! `[model]`, `[controller]`, `[trajectory]`, `[disturbance]` and `[sim]`.

use std::path::Path;

use serde::Deserialize;

use crate::controllers::ControllerConfig;
use crate::dynamics::{JointVec, LinkParams, ManipulatorModel, ModelKind, STANDARD_GRAVITY};
use crate::error::{check_finite, check_len, Error, Result};
use crate::estimator::InputHold;
use crate::trajectory::Trajectory;

pub const PLANAR2DOF_TOML: &str = include_str!("../../../scenarios/planar2dof.toml");
pub const PAPER7DOF_TOML: &str = include_str!("../../../scenarios/paper7dof.toml");

/// Point mass rigidly added to the terminal link while attached.
#[derive(Clone, Debug, PartialEq)]
pub struct Payload {
    pub mass: f64,
    pub attach_time: f64,
    pub detach_time: f64,
    /// Position in the terminal link frame (m).
    pub offset: [f64; 3],
}

impl Payload {
    pub fn attached(&self, t: f64) -> bool {
        t >= self.attach_time && t < self.detach_time
    }
}

/// Joint friction of the true plant: `−B q̇ − F_c tanh(κ q̇)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Friction {
    pub viscous: JointVec,
    pub coulomb: JointVec,
    pub steepness: f64,
}

impl Friction {
    pub fn none(n: usize) -> Self {
        Self {
            viscous: JointVec::zeros(n),
            coulomb: JointVec::zeros(n),
            steepness: 100.0,
        }
    }

    pub fn torque(&self, qd: &JointVec) -> JointVec {
        JointVec::from_fn(qd.len(), |i, _| {
            -self.viscous[i] * qd[i] - self.coulomb[i] * (self.steepness * qd[i]).tanh()
        })
    }
}

/// `amplitude · sin(ω t + phase)` added at every joint.
#[derive(Clone, Debug, PartialEq)]
pub struct Sinusoid {
    pub amplitude: JointVec,
    pub omega: f64,
    pub phase: f64,
}

/// Constant torque applied over `[start, end)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExternalTorque {
    pub start: f64,
    pub end: f64,
    pub torque: JointVec,
}

/// Everything the nominal model does not know about, apart from parameter
/// mismatch (which lives in the true model).
#[derive(Clone, Debug, PartialEq)]
pub struct Disturbances {
    pub friction: Friction,
    pub constant: JointVec,
    pub sinusoid: Option<Sinusoid>,
    pub external: Vec<ExternalTorque>,
    pub payload: Option<Payload>,
}

impl Disturbances {
    pub fn none(n: usize) -> Self {
        Self {
            friction: Friction::none(n),
            constant: JointVec::zeros(n),
            sinusoid: None,
            external: Vec::new(),
            payload: None,
        }
    }

    /// Injected joint torque that depends on time only.
    pub fn scheduled_torque(&self, t: f64) -> JointVec {
        let mut d = self.constant.clone();
        if let Some(s) = &self.sinusoid {
            d += &s.amplitude * (s.omega * t + s.phase).sin();
        }
        for ext in &self.external {
            if t >= ext.start && t < ext.end {
                d += &ext.torque;
            }
        }
        d
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub model_nominal: ManipulatorModel,
    /// Plant without payload; the payload is attached at run time.
    pub model_true: ManipulatorModel,
    pub controller: ControllerConfig,
    /// Estimator filter constant k (s).
    pub filter_k: f64,
    pub filter_hold: InputHold,
    pub trajectory: Trajectory,
    pub phase_names: Vec<String>,
    pub disturbance: Disturbances,
    pub control_dt: f64,
    pub physics_substeps: usize,
    pub duration: f64,
    pub velocity_noise_std: f64,
    pub seed: u64,
    /// Initial plant state; defaults to the reference at t = 0, at rest.
    pub initial_q: Option<JointVec>,
    pub initial_qd: Option<JointVec>,
}

impl Scenario {
    /// A scenario with no disturbance, identical plant and nominal models and
    /// a reference held at `q0`.
    pub fn hold(model: ManipulatorModel, q0: JointVec, duration: f64) -> Result<Self> {
        let n = model.dof();
        let trajectory = Trajectory::hold(q0, duration)?;
        Ok(Self {
            name: "hold".into(),
            model_true: model.clone(),
            model_nominal: model,
            controller: ControllerConfig::uniform(n),
            filter_k: 0.08,
            filter_hold: InputHold::default(),
            trajectory,
            phase_names: vec!["hold".into()],
            disturbance: Disturbances::none(n),
            control_dt: 1e-3,
            physics_substeps: 10,
            duration,
            velocity_noise_std: 0.0,
            seed: 0,
            initial_q: None,
            initial_qd: None,
        })
    }

    pub fn planar2dof() -> Self {
        Self::from_toml_str(PLANAR2DOF_TOML).expect("bundled scenario is valid")
    }

    pub fn paper7dof() -> Self {
        Self::from_toml_str(PAPER7DOF_TOML).expect("bundled scenario is valid")
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Scenario(msg) => Error::Scenario(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ScenarioFile = toml::from_str(text).map_err(|e| Error::Scenario(e.to_string()))?;
        file.build().map_err(|e| match e {
            Error::Scenario(_) => e,
            other => Error::Scenario(other.to_string()),
        })
    }

    pub fn dof(&self) -> usize {
        self.model_nominal.dof()
    }

    /// Number of control steps, including the sample at `t = duration`.
    pub fn steps(&self) -> usize {
        (self.duration / self.control_dt).round() as usize + 1
    }

    /// Named phase intervals of the reference motion.
    pub fn phases(&self) -> Vec<(String, f64, f64)> {
        self.trajectory
            .phases()
            .into_iter()
            .enumerate()
            .map(|(i, (a, b))| {
                let name = self
                    .phase_names
                    .get(i)
                    .cloned()
                    .unwrap_or_else(|| format!("phase_{}", i + 1));
                (name, a, b)
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dof();
        check_len("model_true dof", n, self.model_true.dof())?;
        check_len("trajectory dof", n, self.trajectory.dof())?;
        self.controller.validate(n)?;
        if !(self.filter_k > 0.0) || !self.filter_k.is_finite() {
            return Err(Error::invalid("controller.k", "must be finite and > 0"));
        }
        if !(self.control_dt > 0.0) || !self.control_dt.is_finite() {
            return Err(Error::invalid("sim.control_dt", "must be finite and > 0"));
        }
        if self.physics_substeps == 0 {
            return Err(Error::invalid("sim.physics_substeps", "must be >= 1"));
        }
        if !(self.duration > 0.0) || !self.duration.is_finite() {
            return Err(Error::invalid("sim.duration", "must be finite and > 0"));
        }
        // A shorter run over a longer reference is allowed (truncated runs).
        if self.duration > self.trajectory.duration() + 1e-12 {
            return Err(Error::invalid("sim.duration", "exceeds the trajectory duration"));
        }
        if !(self.velocity_noise_std >= 0.0) || !self.velocity_noise_std.is_finite() {
            return Err(Error::invalid("sim.velocity_noise_std", "must be finite and >= 0"));
        }
        let d = &self.disturbance;
        for (name, v) in [
            ("disturbance.viscous", &d.friction.viscous),
            ("disturbance.coulomb", &d.friction.coulomb),
            ("disturbance.constant", &d.constant),
        ] {
            check_len("disturbance vector", n, v.len())
                .map_err(|_| Error::invalid(name, format!("expected {n} entries")))?;
            check_finite("disturbance vector", v.iter())?;
        }
        if !(d.friction.steepness > 0.0) {
            return Err(Error::invalid("disturbance.tanh_steepness", "must be > 0"));
        }
        if let Some(s) = &d.sinusoid {
            if s.amplitude.len() != n {
                return Err(Error::invalid(
                    "disturbance.sinusoid.amplitude",
                    format!("expected {n} entries"),
                ));
            }
            check_finite(
                "disturbance.sinusoid",
                s.amplitude.iter().chain([s.omega, s.phase].iter()),
            )?;
        }
        for (i, ext) in d.external.iter().enumerate() {
            if ext.torque.len() != n {
                return Err(Error::invalid(
                    format!("disturbance.external[{i}].torque"),
                    format!("expected {n} entries"),
                ));
            }
            if !(ext.start < ext.end) {
                return Err(Error::invalid(
                    format!("disturbance.external[{i}]"),
                    "start must precede end",
                ));
            }
        }
        if let Some(p) = &d.payload {
            if !(p.mass >= 0.0) || !p.mass.is_finite() {
                return Err(Error::invalid("disturbance.payload.mass", "must be finite and >= 0"));
            }
            if !(p.attach_time < p.detach_time) || p.attach_time < 0.0 {
                return Err(Error::invalid(
                    "disturbance.payload",
                    "requires 0 <= attach_time < detach_time",
                ));
            }
            self.model_true.with_point_mass(p.mass, p.offset)?;
        }
        for (name, v) in [("sim.initial_q", &self.initial_q), ("sim.initial_qd", &self.initial_qd)] {
            if let Some(v) = v {
                if v.len() != n {
                    return Err(Error::invalid(name, format!("expected {n} entries")));
                }
                check_finite("initial state", v.iter())?;
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// File schema

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum PerJoint {
    Scalar(f64),
    List(Vec<f64>),
}

impl PerJoint {
    fn expand(&self, field: &str, n: usize) -> Result<JointVec> {
        match self {
            PerJoint::Scalar(x) => Ok(JointVec::from_element(n, *x)),
            PerJoint::List(v) if v.len() == n => Ok(JointVec::from_row_slice(v)),
            PerJoint::List(v) => Err(Error::Scenario(format!(
                "{field}: expected {n} entries, got {}",
                v.len()
            ))),
        }
    }
}

fn expand_or(field: &str, value: &Option<PerJoint>, n: usize, default: f64) -> Result<JointVec> {
    value
        .as_ref()
        .map_or_else(|| Ok(JointVec::from_element(n, default)), |v| v.expand(field, n))
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum InertiaSpec {
    Scalar(f64),
    Diagonal([f64; 3]),
    Full([[f64; 3]; 3]),
}

impl InertiaSpec {
    fn matrix(&self) -> [[f64; 3]; 3] {
        let diag = |d: [f64; 3]| [[d[0], 0.0, 0.0], [0.0, d[1], 0.0], [0.0, 0.0, d[2]]];
        match *self {
            InertiaSpec::Scalar(x) => diag([x; 3]),
            InertiaSpec::Diagonal(d) => diag(d),
            InertiaSpec::Full(m) => m,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    #[serde(default)]
    name: Option<String>,
    model: ModelSection,
    #[serde(default)]
    controller: ControllerSection,
    trajectory: TrajectorySection,
    #[serde(default)]
    disturbance: DisturbanceSection,
    sim: SimSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelSection {
    kind: ModelKindName,
    /// Built-in link table; currently `franka_like`.
    preset: Option<String>,
    dof: Option<usize>,
    gravity: Option<[f64; 3]>,
    #[serde(default)]
    links: Vec<LinkSection>,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
enum ModelKindName {
    Planar2r,
    Chain,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinkSection {
    mass: f64,
    #[serde(default)]
    length: f64,
    com: [f64; 3],
    inertia: InertiaSpec,
    /// Modified DH placement `[alpha, a, d]`.
    dh: Option<[f64; 3]>,
    origin_xyz: Option<[f64; 3]>,
    /// Roll, pitch, yaw applied as `Rz(yaw) Ry(pitch) Rx(roll)`.
    origin_rpy: Option<[f64; 3]>,
    axis: Option<[f64; 3]>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ControllerSection {
    k: Option<f64>,
    filter_hold: Option<InputHold>,
    eta: Option<PerJoint>,
    gain: Option<PerJoint>,
    gain_lower: Option<PerJoint>,
    pi: Option<PerJoint>,
    sigma: Option<PerJoint>,
    t1: Option<PerJoint>,
    t2: Option<PerJoint>,
    sigma_max: Option<f64>,
    tau_limits: Option<PerJoint>,
    #[serde(default)]
    abs_s: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrajectorySection {
    waypoints: Vec<Vec<f64>>,
    times: Vec<f64>,
    #[serde(default)]
    phase_names: Vec<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct DisturbanceSection {
    viscous: Option<PerJoint>,
    coulomb: Option<PerJoint>,
    tanh_steepness: Option<f64>,
    constant: Option<PerJoint>,
    sinusoid: Option<SinusoidSection>,
    #[serde(default)]
    external: Vec<ExternalSection>,
    payload: Option<PayloadSection>,
    mismatch: Option<MismatchSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SinusoidSection {
    amplitude: PerJoint,
    omega: f64,
    #[serde(default)]
    phase: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExternalSection {
    start: f64,
    end: f64,
    torque: PerJoint,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PayloadSection {
    mass: f64,
    attach_time: f64,
    detach_time: f64,
    #[serde(default)]
    offset: [f64; 3],
}

/// Per-link multipliers turning the nominal parameters into the plant's.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MismatchSection {
    mass_scale: Option<PerJoint>,
    inertia_scale: Option<PerJoint>,
    com_scale: Option<PerJoint>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimSection {
    control_dt: Option<f64>,
    physics_substeps: Option<usize>,
    duration: f64,
    #[serde(default)]
    velocity_noise_std: f64,
    #[serde(default)]
    seed: u64,
    initial_q: Option<Vec<f64>>,
    initial_qd: Option<Vec<f64>>,
}

fn rpy_matrix([roll, pitch, yaw]: [f64; 3]) -> [[f64; 3]; 3] {
    let (sr, cr) = roll.sin_cos();
    let (sp, cp) = pitch.sin_cos();
    let (sy, cy) = yaw.sin_cos();
    [
        [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
        [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
        [-sp, cp * sr, cp * cr],
    ]
}

fn scenario_err(field: impl AsRef<str>, e: Error) -> Error {
    Error::Scenario(format!("{}: {e}", field.as_ref()))
}

impl ModelSection {
    fn build(&self) -> Result<ManipulatorModel> {
        let kind = match self.kind {
            ModelKindName::Planar2r => ModelKind::Planar2r,
            ModelKindName::Chain => ModelKind::Chain,
        };
        let mut links = match self.preset.as_deref() {
            None => Vec::new(),
            Some("franka_like") if matches!(kind, ModelKind::Chain) => ManipulatorModel::franka_like().links().to_vec(),
            Some(other) => {
                return Err(Error::Scenario(format!(
                    "model.preset: unknown preset `{other}` for this kind (expected franka_like with kind = \"chain\")"
                )))
            }
        };
        if self.preset.is_some() && !self.links.is_empty() {
            return Err(Error::Scenario(
                "model.links: give either a preset or a link table, not both".into(),
            ));
        }
        for (i, l) in self.links.iter().enumerate() {
            let field = |f: &str| format!("model.links[{i}].{f}");
            let inertia = l.inertia.matrix();
            let mut link = match (kind, l.dh) {
                (ModelKind::Planar2r, Some(_)) => {
                    return Err(Error::Scenario(format!("{}: not used by the planar arm", field("dh"))))
                }
                (_, Some([alpha, a, d])) => {
                    let mut link = LinkParams::modified_dh(alpha, a, d, l.mass, l.com, [0.0; 3]);
                    link.inertia = inertia;
                    link.length = if l.length > 0.0 { l.length } else { link.length };
                    link
                }
                (_, None) => {
                    let mut link = LinkParams::planar(l.mass, l.length, 0.0, 0.0);
                    link.com = l.com;
                    link.inertia = inertia;
                    link
                }
            };
            if kind == ModelKind::Chain {
                if l.dh.is_some() && (l.origin_xyz.is_some() || l.origin_rpy.is_some()) {
                    return Err(Error::Scenario(format!(
                        "{}: use either dh or origin_xyz/origin_rpy",
                        field("dh")
                    )));
                }
                if let Some(p) = l.origin_xyz {
                    link.origin_pos = p;
                }
                if let Some(r) = l.origin_rpy {
                    link.origin_rot = rpy_matrix(r);
                }
                if let Some(a) = l.axis {
                    link.axis = a;
                }
            } else if l.origin_xyz.is_some() || l.origin_rpy.is_some() || l.axis.is_some() {
                return Err(Error::Scenario(format!(
                    "{}: frame placement is not used by the planar arm",
                    field("origin_xyz")
                )));
            }
            links.push(link);
        }
        if let Some(dof) = self.dof {
            if dof != links.len() {
                return Err(Error::Scenario(format!(
                    "model.dof: {dof} does not match the {} links given",
                    links.len()
                )));
            }
        }
        let gravity = self.gravity.unwrap_or(match kind {
            ModelKind::Planar2r => [0.0, -STANDARD_GRAVITY, 0.0],
            ModelKind::Chain => [0.0, 0.0, -STANDARD_GRAVITY],
        });
        ManipulatorModel::new(kind, links, gravity).map_err(|e| scenario_err("model", e))
    }
}

impl MismatchSection {
    fn apply(&self, nominal: &ManipulatorModel) -> Result<ManipulatorModel> {
        let n = nominal.dof();
        let mass = expand_or("disturbance.mismatch.mass_scale", &self.mass_scale, n, 1.0)?;
        let inertia = expand_or("disturbance.mismatch.inertia_scale", &self.inertia_scale, n, 1.0)?;
        let com = expand_or("disturbance.mismatch.com_scale", &self.com_scale, n, 1.0)?;
        let links = nominal
            .links()
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let mut l = l.clone();
                l.mass *= mass[i];
                l.com = l.com.map(|c| c * com[i]);
                l.inertia = l.inertia.map(|row| row.map(|x| x * inertia[i]));
                l
            })
            .collect();
        ManipulatorModel::new(nominal.kind(), links, nominal.gravity_vector())
            .map_err(|e| scenario_err("disturbance.mismatch", e))
    }
}

impl ScenarioFile {
    fn build(self) -> Result<Scenario> {
        let model_nominal = self.model.build()?;
        let n = model_nominal.dof();

        let c = &self.controller;
        let gain = expand_or("controller.gain", &c.gain, n, 10.0)?;
        let controller = ControllerConfig {
            eta: expand_or("controller.eta", &c.eta, n, 10.0)?,
            gain_lower: match &c.gain_lower {
                Some(v) => v.expand("controller.gain_lower", n)?,
                None => gain.clone(),
            },
            gain,
            pi: expand_or("controller.pi", &c.pi, n, 70.0)?,
            sigma: expand_or("controller.sigma", &c.sigma, n, 1.0)?,
            t1: expand_or("controller.t1", &c.t1, n, 4.0)?,
            t2: expand_or("controller.t2", &c.t2, n, 12.0)?,
            sigma_max: c.sigma_max.unwrap_or(50.0),
            tau_limits: expand_or("controller.tau_limits", &c.tau_limits, n, f64::INFINITY)?,
            abs_s: c.abs_s,
        };

        let sim = &self.sim;
        let waypoints = self
            .trajectory
            .waypoints
            .iter()
            .map(|w| JointVec::from_row_slice(w))
            .collect();
        // A run may stop before the last waypoint; the reference still spans it.
        let span = self.trajectory.times.last().copied().unwrap_or(0.0).max(sim.duration);
        let trajectory = Trajectory::new(waypoints, self.trajectory.times.clone(), span)
            .map_err(|e| scenario_err("trajectory", e))?;

        let d = &self.disturbance;
        let disturbance = Disturbances {
            friction: Friction {
                viscous: expand_or("disturbance.viscous", &d.viscous, n, 0.0)?,
                coulomb: expand_or("disturbance.coulomb", &d.coulomb, n, 0.0)?,
                steepness: d.tanh_steepness.unwrap_or(100.0),
            },
            constant: expand_or("disturbance.constant", &d.constant, n, 0.0)?,
            sinusoid: match &d.sinusoid {
                Some(s) => Some(Sinusoid {
                    amplitude: s.amplitude.expand("disturbance.sinusoid.amplitude", n)?,
                    omega: s.omega,
                    phase: s.phase,
                }),
                None => None,
            },
            external: d
                .external
                .iter()
                .enumerate()
                .map(|(i, e)| {
                    Ok(ExternalTorque {
                        start: e.start,
                        end: e.end,
                        torque: e.torque.expand(&format!("disturbance.external[{i}].torque"), n)?,
                    })
                })
                .collect::<Result<_>>()?,
            payload: d.payload.as_ref().map(|p| Payload {
                mass: p.mass,
                attach_time: p.attach_time,
                detach_time: p.detach_time,
                offset: p.offset,
            }),
        };
        let model_true = match &d.mismatch {
            Some(m) => m.apply(&model_nominal)?,
            None => model_nominal.clone(),
        };

        let scenario = Scenario {
            name: self.name.unwrap_or_else(|| "scenario".into()),
            model_nominal,
            model_true,
            controller,
            filter_k: c.k.unwrap_or(0.08),
            filter_hold: c.filter_hold.unwrap_or_default(),
            trajectory,
            phase_names: self.trajectory.phase_names,
            disturbance,
            control_dt: sim.control_dt.unwrap_or(1e-3),
            physics_substeps: sim.physics_substeps.unwrap_or(10),
            duration: sim.duration,
            velocity_noise_std: sim.velocity_noise_std,
            seed: sim.seed,
            initial_q: sim.initial_q.as_ref().map(|v| JointVec::from_row_slice(v)),
            initial_qd: sim.initial_qd.as_ref().map(|v| JointVec::from_row_slice(v)),
        };
        scenario.validate().map_err(|e| Error::Scenario(e.to_string()))?;
        Ok(scenario)
    }
}
