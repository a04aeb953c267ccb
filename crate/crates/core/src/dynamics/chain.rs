//! Recursive Newton-Euler evaluation of a revolute serial chain.
//!
//! Each link frame is obtained from its parent by a fixed transform (the
//! joint origin) followed by a rotation of `q_i` about the joint axis. All
//! quantities in the recursion are expressed in the local link frame.

use super::dual::{Dual, Real, M3, V3};
use super::LinkParams;

struct Kinematics<T> {
    /// Parent-from-link rotation of every link.
    rot: Vec<M3<T>>,
}

fn kinematics<T: Real>(links: &[LinkParams], q: &[T]) -> Kinematics<T> {
    let rot = links
        .iter()
        .zip(q)
        .map(|(link, &qi)| {
            let fixed = M3::<T>::from_f64(link.origin_rot);
            fixed.mul(&M3::axis_angle(&V3::from_f64(link.axis), qi))
        })
        .collect();
    Kinematics { rot }
}

/// Joint torques `M(q) qdd + C(q, qd) qd + g(q)`; gravity is skipped when
/// `gravity` is `None`.
pub(crate) fn inverse_dynamics<T: Real>(
    links: &[LinkParams],
    gravity: Option<[f64; 3]>,
    q: &[T],
    qd: &[T],
    qdd: &[T],
) -> Vec<T> {
    let kin = kinematics(links, q);
    inverse_dynamics_with(links, &kin, gravity, qd, qdd)
}

fn inverse_dynamics_with<T: Real>(
    links: &[LinkParams],
    kin: &Kinematics<T>,
    gravity: Option<[f64; 3]>,
    qd: &[T],
    qdd: &[T],
) -> Vec<T> {
    let n = links.len();
    let mut w_prev = V3::<T>::zero();
    let mut wd_prev = V3::<T>::zero();
    // A fictitious upward base acceleration accounts for gravity.
    let mut a_prev = match gravity {
        Some(g) => V3::from_f64(g.map(|v| -v)),
        None => V3::zero(),
    };

    let mut forces = Vec::with_capacity(n);
    let mut moments = Vec::with_capacity(n);

    for (i, link) in links.iter().enumerate() {
        let r = &kin.rot[i];
        let axis = V3::<T>::from_f64(link.axis);
        let p = V3::<T>::from_f64(link.origin_pos);
        let com = V3::<T>::from_f64(link.com);
        let inertia = M3::<T>::from_f64(link.inertia);

        let w_par = r.tr_mul_vec(&w_prev);
        let spin = axis.scale(qd[i]);
        let w = w_par + spin;
        let wd = r.tr_mul_vec(&wd_prev) + axis.scale(qdd[i]) + w_par.cross(&spin);
        let a = r.tr_mul_vec(&(a_prev + wd_prev.cross(&p) + w_prev.cross(&w_prev.cross(&p))));
        let ac = a + wd.cross(&com) + w.cross(&w.cross(&com));

        let f = ac.scale(T::from_f64(link.mass));
        let iw = inertia.mul_vec(&w);
        let m = inertia.mul_vec(&wd) + w.cross(&iw);
        forces.push(f);
        moments.push(m);

        w_prev = w;
        wd_prev = wd;
        a_prev = a;
    }

    let mut tau = vec![T::from_f64(0.0); n];
    let mut f_child = V3::<T>::zero();
    let mut n_child = V3::<T>::zero();
    for i in (0..n).rev() {
        let link = &links[i];
        let com = V3::<T>::from_f64(link.com);
        let (f_up, n_up) = if i + 1 < n {
            let child = &links[i + 1];
            let r = &kin.rot[i + 1];
            let fc = r.mul_vec(&f_child);
            let p = V3::<T>::from_f64(child.origin_pos);
            (fc, r.mul_vec(&n_child) + p.cross(&fc))
        } else {
            (V3::zero(), V3::zero())
        };
        let f = forces[i] + f_up;
        let m = moments[i] + n_up + com.cross(&forces[i]);
        tau[i] = m.dot(&V3::from_f64(link.axis));
        f_child = f;
        n_child = m;
    }
    tau
}

/// Joint-space inertia matrix, one Newton-Euler pass per column.
pub(crate) fn mass_matrix<T: Real>(links: &[LinkParams], q: &[T]) -> Vec<Vec<T>> {
    let n = links.len();
    let kin = kinematics(links, q);
    let zero = vec![T::from_f64(0.0); n];
    let mut cols = Vec::with_capacity(n);
    let mut unit = zero.clone();
    for j in 0..n {
        unit[j] = T::from_f64(1.0);
        cols.push(inverse_dynamics_with(links, &kin, None, &zero, &unit));
        unit[j] = T::from_f64(0.0);
    }
    // cols[j][i] = M_ij; return row-major
    (0..n).map(|i| (0..n).map(|j| cols[j][i]).collect()).collect()
}

/// `dm[k][i][j] = ∂M_ij / ∂q_k`, exact via dual numbers.
pub(crate) fn mass_matrix_partials(links: &[LinkParams], q: &[f64]) -> Vec<Vec<Vec<f64>>> {
    let n = links.len();
    (0..n)
        .map(|k| {
            let qk: Vec<Dual> = q
                .iter()
                .enumerate()
                .map(|(i, &v)| Dual::new(v, if i == k { 1.0 } else { 0.0 }))
                .collect();
            mass_matrix(links, &qk)
                .into_iter()
                .map(|row| row.into_iter().map(|d| d.eps).collect())
                .collect()
        })
        .collect()
}

/// Coriolis matrix from Christoffel symbols of the first kind,
/// `C_ij = Σ_k ½(∂_k M_ij + ∂_j M_ik − ∂_i M_jk) qd_k`.
pub(crate) fn christoffel_coriolis(dm: &[Vec<Vec<f64>>], qd: &[f64]) -> Vec<Vec<f64>> {
    let n = qd.len();
    let mut c = vec![vec![0.0; n]; n];
    for (i, row) in c.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = (0..n)
                .map(|k| 0.5 * (dm[k][i][j] + dm[j][i][k] - dm[i][j][k]) * qd[k])
                .sum();
        }
    }
    c
}
