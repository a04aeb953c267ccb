//! Closed-form dynamics of the planar two-link revolute arm.
//!
//! Angles are measured from the +x axis (joint 2 relative to link 1), the arm
//! moves in the x-y plane and each centre of mass lies on its link axis at
//! distance `com[0]` from the joint.

use super::LinkParams;

pub(crate) struct Planar2 {
    m1: f64,
    m2: f64,
    l1: f64,
    lc1: f64,
    lc2: f64,
    i1: f64,
    i2: f64,
    gx: f64,
    gy: f64,
}

impl Planar2 {
    pub fn new(links: &[LinkParams], gravity: [f64; 3]) -> Self {
        let (a, b) = (&links[0], &links[1]);
        Self {
            m1: a.mass,
            m2: b.mass,
            l1: a.length,
            lc1: a.com[0],
            lc2: b.com[0],
            i1: a.inertia[2][2],
            i2: b.inertia[2][2],
            gx: gravity[0],
            gy: gravity[1],
        }
    }

    pub fn mass_matrix(&self, q: &[f64]) -> [[f64; 2]; 2] {
        let c2 = q[1].cos();
        let Self {
            m1,
            m2,
            l1,
            lc1,
            lc2,
            i1,
            i2,
            ..
        } = *self;
        let m11 = m1 * lc1 * lc1 + m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * c2) + i1 + i2;
        let m12 = m2 * (lc2 * lc2 + l1 * lc2 * c2) + i2;
        let m22 = m2 * lc2 * lc2 + i2;
        [[m11, m12], [m12, m22]]
    }

    pub fn coriolis_matrix(&self, q: &[f64], qd: &[f64]) -> [[f64; 2]; 2] {
        let h = -self.m2 * self.l1 * self.lc2 * q[1].sin();
        [[h * qd[1], h * (qd[0] + qd[1])], [-h * qd[0], 0.0]]
    }

    pub fn gravity(&self, q: &[f64]) -> [f64; 2] {
        let (s1, c1) = q[0].sin_cos();
        let (s12, c12) = (q[0] + q[1]).sin_cos();
        let Self {
            m1,
            m2,
            l1,
            lc1,
            lc2,
            gx,
            gy,
            ..
        } = *self;
        // g = ∂V/∂q with V = -Σ m_i (gravity · p_ci)
        let g2 = -m2 * lc2 * (-gx * s12 + gy * c12);
        let g1 = -m1 * lc1 * (-gx * s1 + gy * c1) - m2 * l1 * (-gx * s1 + gy * c1) + g2;
        [g1, g2]
    }
}
