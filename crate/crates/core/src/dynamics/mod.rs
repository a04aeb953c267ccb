//! Rigid-body dynamics `M(q) q̈ + C(q, q̇) q̇ + g(q) = τ + d` of revolute
//! serial manipulators.
//!
//! Two evaluators are provided: closed-form expressions for the planar
//! two-link arm and a recursive Newton-Euler chain for arbitrary revolute
//! arms. Both build `C` from Christoffel symbols, so `Ṁ − 2C` is
//! skew-symmetric by construction.

mod chain;
pub(crate) mod dual;
mod planar;

use nalgebra::{DMatrix, DVector, Matrix3};
use serde::{Deserialize, Serialize};

use crate::error::{check_finite, check_len, Error, Result};

/// Joint-space vector (`q`, `q̇`, `τ`, `d`, `S`, ...), one entry per joint.
pub type JointVec = DVector<f64>;
/// Joint-space matrix (`M`, `C`).
pub type JointMat = DMatrix<f64>;

pub const STANDARD_GRAVITY: f64 = 9.81;

const IDENTITY3: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

/// Inertial and kinematic description of one link and the joint driving it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkParams {
    /// kg
    pub mass: f64,
    /// Distance to the next joint along the link x axis (m). Used by the
    /// planar evaluator; informational for chains.
    pub length: f64,
    /// Centre of mass in the link frame (m).
    pub com: [f64; 3],
    /// Rotational inertia about the centre of mass, link frame (kg·m²).
    pub inertia: [[f64; 3]; 3],
    /// Joint frame position in the parent link frame (m).
    pub origin_pos: [f64; 3],
    /// Joint frame orientation in the parent link frame.
    pub origin_rot: [[f64; 3]; 3],
    /// Unit joint axis in the joint frame.
    pub axis: [f64; 3],
}

impl LinkParams {
    /// Link of a planar arm: COM on the link axis at `com_x`, inertia
    /// `inertia_zz` about the COM (perpendicular to the plane).
    pub fn planar(mass: f64, length: f64, com_x: f64, inertia_zz: f64) -> Self {
        Self {
            mass,
            length,
            com: [com_x, 0.0, 0.0],
            inertia: [[inertia_zz, 0.0, 0.0], [0.0, inertia_zz, 0.0], [0.0, 0.0, inertia_zz]],
            origin_pos: [0.0; 3],
            origin_rot: IDENTITY3,
            axis: [0.0, 0.0, 1.0],
        }
    }

    /// Link placed with modified Denavit-Hartenberg parameters
    /// (`α_{i-1}`, `a_{i-1}`, `d_i`), rotating about its local z axis.
    pub fn modified_dh(alpha: f64, a: f64, d: f64, mass: f64, com: [f64; 3], inertia_diag: [f64; 3]) -> Self {
        let (s, c) = alpha.sin_cos();
        Self {
            mass,
            length: a.hypot(d),
            com,
            inertia: [
                [inertia_diag[0], 0.0, 0.0],
                [0.0, inertia_diag[1], 0.0],
                [0.0, 0.0, inertia_diag[2]],
            ],
            origin_pos: [a, -d * s, d * c],
            origin_rot: [[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]],
            axis: [0.0, 0.0, 1.0],
        }
    }

    fn validate(&self, index: usize) -> Result<()> {
        let name = |field: &str| format!("links[{index}].{field}");
        let finite = [self.mass, self.length]
            .iter()
            .chain(self.com.iter())
            .chain(self.inertia.iter().flatten())
            .chain(self.origin_pos.iter())
            .chain(self.origin_rot.iter().flatten())
            .chain(self.axis.iter())
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::invalid(name("*"), "all parameters must be finite"));
        }
        if self.mass <= 0.0 {
            return Err(Error::invalid(name("mass"), "must be > 0"));
        }
        if self.length < 0.0 {
            return Err(Error::invalid(name("length"), "must be >= 0"));
        }
        let inertia = Matrix3::from_fn(|r, c| self.inertia[r][c]);
        if (inertia - inertia.transpose()).amax() > 1e-12 || inertia.cholesky().is_none() {
            return Err(Error::invalid(name("inertia"), "must be symmetric positive definite"));
        }
        let axis_norm = self.axis.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (axis_norm - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(name("axis"), "must be a unit vector"));
        }
        let rot = Matrix3::from_fn(|r, c| self.origin_rot[r][c]);
        if (rot.transpose() * rot - Matrix3::identity()).amax() > 1e-9 || rot.determinant() < 0.0 {
            return Err(Error::invalid(name("origin_rot"), "must be a rotation matrix"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Closed-form two-link arm in the x-y plane.
    Planar2r,
    /// Recursive Newton-Euler revolute chain.
    Chain,
}

/// `M`, `C` and `g` evaluated at one state.
#[derive(Clone, Debug)]
pub struct DynamicsTerms {
    pub mass: JointMat,
    pub coriolis: JointMat,
    pub gravity: JointVec,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ManipulatorModel {
    kind: ModelKind,
    links: Vec<LinkParams>,
    gravity: [f64; 3],
}

impl ManipulatorModel {
    pub fn new(kind: ModelKind, links: Vec<LinkParams>, gravity: [f64; 3]) -> Result<Self> {
        if links.is_empty() {
            return Err(Error::invalid("dof", "a model needs at least one link"));
        }
        for (i, link) in links.iter().enumerate() {
            link.validate(i)?;
        }
        check_finite("gravity", gravity.iter())?;
        if kind == ModelKind::Planar2r {
            check_len("planar arm links", 2, links.len())?;
            for (i, link) in links.iter().enumerate() {
                if link.com[1] != 0.0 {
                    return Err(Error::invalid(
                        format!("links[{i}].com"),
                        "the planar arm requires the centre of mass on the link axis",
                    ));
                }
            }
        }
        Ok(Self { kind, links, gravity })
    }

    /// Planar two-link arm with gravity along −y.
    pub fn planar_2r(link1: LinkParams, link2: LinkParams) -> Result<Self> {
        Self::new(ModelKind::Planar2r, vec![link1, link2], [0.0, -STANDARD_GRAVITY, 0.0])
    }

    /// Revolute chain with gravity along −z.
    pub fn chain(links: Vec<LinkParams>) -> Result<Self> {
        Self::new(ModelKind::Chain, links, [0.0, 0.0, -STANDARD_GRAVITY])
    }

    /// Seven-joint arm with Franka-Panda-like kinematics and plausible (not
    /// identified) inertial parameters. The last link includes a hand.
    pub fn franka_like() -> Self {
        use std::f64::consts::FRAC_PI_2 as H;
        type Row = (f64, f64, f64, f64, [f64; 3], [f64; 3]);
        #[rustfmt::skip]
        let table: [Row; 7] = [
            // alpha, a, d, mass, com, inertia diagonal
            (0.0, 0.0, 0.333, 4.97, [0.0039, 0.0021, -0.0476], [0.7034, 0.7066, 0.0091]),
            (-H, 0.0, 0.0, 0.65, [-0.0031, -0.0287, 0.0035], [0.0080, 0.0281, 0.0260]),
            (H, 0.0, 0.316, 3.23, [0.0276, 0.0393, -0.0665], [0.0372, 0.0361, 0.0108]),
            (H, 0.0825, 0.0, 3.59, [-0.0532, 0.1047, 0.0274], [0.0259, 0.0195, 0.0283]),
            (-H, -0.0825, 0.384, 1.23, [-0.0120, 0.0411, -0.0384], [0.0356, 0.0294, 0.0086]),
            (H, 0.0, 0.0, 1.67, [0.0601, -0.0141, -0.0105], [0.0020, 0.0043, 0.0054]),
            (H, 0.088, 0.0, 1.20, [0.0050, 0.0050, 0.0800], [0.0150, 0.0150, 0.0120]),
        ];
        let links = table
            .iter()
            .map(|&(alpha, a, d, m, com, inertia)| LinkParams::modified_dh(alpha, a, d, m, com, inertia))
            .collect();
        Self::chain(links).expect("built-in parameters are valid")
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn dof(&self) -> usize {
        self.links.len()
    }

    pub fn links(&self) -> &[LinkParams] {
        &self.links
    }

    pub fn gravity_vector(&self) -> [f64; 3] {
        self.gravity
    }

    pub fn with_gravity(mut self, gravity: [f64; 3]) -> Self {
        self.gravity = gravity;
        self
    }

    /// The same arm expressed as a Newton-Euler chain. Planar arms become a
    /// two-joint chain about z with the second joint at `(l1, 0, 0)`.
    pub fn to_chain(&self) -> Self {
        match self.kind {
            ModelKind::Chain => self.clone(),
            ModelKind::Planar2r => {
                let mut links = self.links.clone();
                for link in &mut links {
                    link.origin_pos = [0.0; 3];
                    link.origin_rot = IDENTITY3;
                    link.axis = [0.0, 0.0, 1.0];
                }
                links[1].origin_pos = [self.links[0].length, 0.0, 0.0];
                Self {
                    kind: ModelKind::Chain,
                    links,
                    gravity: self.gravity,
                }
            }
        }
    }

    /// Rigidly attaches a point mass at `point` (terminal link frame),
    /// updating that link's mass, centre of mass and inertia.
    pub fn with_point_mass(&self, mass: f64, point: [f64; 3]) -> Result<Self> {
        if !(mass >= 0.0) || !mass.is_finite() {
            return Err(Error::invalid("payload.mass", "must be finite and >= 0"));
        }
        check_finite("payload point", point.iter())?;
        if mass == 0.0 {
            return Ok(self.clone());
        }
        if self.kind == ModelKind::Planar2r && point[1] != 0.0 {
            return Err(Error::invalid(
                "payload.offset",
                "the planar arm requires the payload on the link axis",
            ));
        }
        let mut out = self.clone();
        let link = out.links.last_mut().expect("non-empty");
        let total = link.mass + mass;
        let com: [f64; 3] = std::array::from_fn(|i| (link.mass * link.com[i] + mass * point[i]) / total);
        let shift = |m: f64, p: [f64; 3]| -> Matrix3<f64> {
            let d = nalgebra::Vector3::from_fn(|i, _| p[i] - com[i]);
            (Matrix3::identity() * d.norm_squared() - d * d.transpose()) * m
        };
        let inertia = Matrix3::from_fn(|r, c| link.inertia[r][c]) + shift(link.mass, link.com) + shift(mass, point);
        link.mass = total;
        link.com = com;
        link.inertia = std::array::from_fn(|r| std::array::from_fn(|c| inertia[(r, c)]));
        Ok(out)
    }

    fn check_state(&self, what: &'static str, v: &JointVec) -> Result<()> {
        check_len(what, self.dof(), v.len())?;
        check_finite(what, v.iter())
    }

    /// Inertia matrix `M(q)`.
    pub fn mass_matrix(&self, q: &JointVec) -> Result<JointMat> {
        self.check_state("q", q)?;
        Ok(self.mass_matrix_unchecked(q))
    }

    fn mass_matrix_unchecked(&self, q: &JointVec) -> JointMat {
        let n = self.dof();
        match self.kind {
            ModelKind::Planar2r => {
                let m = planar::Planar2::new(&self.links, self.gravity).mass_matrix(q.as_slice());
                JointMat::from_fn(2, 2, |r, c| m[r][c])
            }
            ModelKind::Chain => {
                let m = chain::mass_matrix(&self.links, q.as_slice());
                // Exact symmetry; the two triangles agree only to round-off.
                JointMat::from_fn(n, n, |r, c| 0.5 * (m[r][c] + m[c][r]))
            }
        }
    }

    /// Coriolis/centrifugal matrix `C(q, q̇)` from Christoffel symbols.
    pub fn coriolis_matrix(&self, q: &JointVec, qd: &JointVec) -> Result<JointMat> {
        self.check_state("q", q)?;
        self.check_state("qd", qd)?;
        let n = self.dof();
        Ok(match self.kind {
            ModelKind::Planar2r => {
                let c = planar::Planar2::new(&self.links, self.gravity).coriolis_matrix(q.as_slice(), qd.as_slice());
                JointMat::from_fn(2, 2, |r, col| c[r][col])
            }
            ModelKind::Chain => {
                let dm = chain::mass_matrix_partials(&self.links, q.as_slice());
                let c = chain::christoffel_coriolis(&dm, qd.as_slice());
                JointMat::from_fn(n, n, |r, col| c[r][col])
            }
        })
    }

    /// Gravity torque `g(q)`.
    pub fn gravity(&self, q: &JointVec) -> Result<JointVec> {
        self.check_state("q", q)?;
        Ok(match self.kind {
            ModelKind::Planar2r => {
                JointVec::from_row_slice(&planar::Planar2::new(&self.links, self.gravity).gravity(q.as_slice()))
            }
            ModelKind::Chain => {
                let zero = vec![0.0; self.dof()];
                JointVec::from_vec(chain::inverse_dynamics(
                    &self.links,
                    Some(self.gravity),
                    q.as_slice(),
                    &zero,
                    &zero,
                ))
            }
        })
    }

    /// `C(q, q̇) q̇ + g(q)`. The chain evaluates this with a single
    /// Newton-Euler pass instead of forming `C`.
    pub fn bias(&self, q: &JointVec, qd: &JointVec) -> Result<JointVec> {
        self.check_state("q", q)?;
        self.check_state("qd", qd)?;
        match self.kind {
            ModelKind::Planar2r => Ok(self.coriolis_matrix(q, qd)? * qd + self.gravity(q)?),
            ModelKind::Chain => {
                let zero = vec![0.0; self.dof()];
                Ok(JointVec::from_vec(chain::inverse_dynamics(
                    &self.links,
                    Some(self.gravity),
                    q.as_slice(),
                    qd.as_slice(),
                    &zero,
                )))
            }
        }
    }

    /// `M q̈ + C q̇ + g`.
    pub fn inverse_dynamics(&self, q: &JointVec, qd: &JointVec, qdd: &JointVec) -> Result<JointVec> {
        self.check_state("qdd", qdd)?;
        match self.kind {
            ModelKind::Planar2r => Ok(self.mass_matrix(q)? * qdd + self.bias(q, qd)?),
            ModelKind::Chain => {
                self.check_state("q", q)?;
                self.check_state("qd", qd)?;
                Ok(JointVec::from_vec(chain::inverse_dynamics(
                    &self.links,
                    Some(self.gravity),
                    q.as_slice(),
                    qd.as_slice(),
                    qdd.as_slice(),
                )))
            }
        }
    }

    /// Plant acceleration `q̈ = M⁻¹(τ + d − C q̇ − g)`, solved by Cholesky.
    pub fn forward_dynamics(&self, q: &JointVec, qd: &JointVec, tau: &JointVec, d: &JointVec) -> Result<JointVec> {
        self.check_state("tau", tau)?;
        self.check_state("d", d)?;
        let bias = self.bias(q, qd)?;
        let mass = self.mass_matrix_unchecked(q);
        let rhs = tau + d - bias;
        let qdd = mass.cholesky().ok_or(Error::SingularInertia)?.solve(&rhs);
        check_finite("forward dynamics", qdd.iter())?;
        Ok(qdd)
    }

    /// `M`, `C`, `g` at one state.
    pub fn terms(&self, q: &JointVec, qd: &JointVec) -> Result<DynamicsTerms> {
        Ok(DynamicsTerms {
            mass: self.mass_matrix(q)?,
            coriolis: self.coriolis_matrix(q, qd)?,
            gravity: self.gravity(q)?,
        })
    }

    /// `½ q̇ᵀ M(q) q̇`.
    pub fn kinetic_energy(&self, q: &JointVec, qd: &JointVec) -> Result<f64> {
        let m = self.mass_matrix(q)?;
        self.check_state("qd", qd)?;
        Ok(0.5 * qd.dot(&(m * qd)))
    }
}
