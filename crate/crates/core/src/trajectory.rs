//! Joint-space reference built from quintic rest-to-rest segments.

use crate::controllers::TrajectoryPoint;
use crate::dynamics::JointVec;
use crate::error::{check_finite, check_len, Error, Result};

/// Piecewise quintic trajectory through `waypoints` reached at `times`.
/// Consecutive equal waypoints form a hold; the reference is held at the
/// first waypoint before `times[0]` and at the last one after the final time.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    waypoints: Vec<JointVec>,
    times: Vec<f64>,
    duration: f64,
}

/// Normalized quintic `s(u) = 10u³ − 15u⁴ + 6u⁵` and its first two
/// derivatives with respect to `u`.
fn quintic(u: f64) -> (f64, f64, f64) {
    let u2 = u * u;
    let u3 = u2 * u;
    (
        u3 * (10.0 - 15.0 * u + 6.0 * u2),
        30.0 * u2 * (1.0 - 2.0 * u + u2),
        60.0 * u * (1.0 - 3.0 * u + 2.0 * u2),
    )
}

impl Trajectory {
    pub fn new(waypoints: Vec<JointVec>, times: Vec<f64>, duration: f64) -> Result<Self> {
        if waypoints.is_empty() {
            return Err(Error::invalid(
                "trajectory.waypoints",
                "at least one waypoint is required",
            ));
        }
        check_len("trajectory.times", waypoints.len(), times.len())?;
        let n = waypoints[0].len();
        for w in &waypoints {
            check_len("trajectory.waypoints", n, w.len())?;
            check_finite("trajectory.waypoints", w.iter())?;
        }
        check_finite("trajectory.times", times.iter())?;
        if !(duration > 0.0) || !duration.is_finite() {
            return Err(Error::invalid("sim.duration", "must be finite and > 0"));
        }
        if times[0] < 0.0 || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid(
                "trajectory.times",
                "must start at >= 0 and increase strictly",
            ));
        }
        if *times.last().expect("non-empty") > duration {
            return Err(Error::invalid("trajectory.times", "must not exceed the duration"));
        }
        Ok(Self {
            waypoints,
            times,
            duration,
        })
    }

    /// A single hold at `q` for `duration` seconds.
    pub fn hold(q: JointVec, duration: f64) -> Result<Self> {
        Self::new(vec![q], vec![0.0], duration)
    }

    pub fn dof(&self) -> usize {
        self.waypoints[0].len()
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn waypoints(&self) -> &[JointVec] {
        &self.waypoints
    }

    /// Phase intervals: one per segment between waypoint times plus the
    /// tail after the last waypoint (when non-empty).
    pub fn phases(&self) -> Vec<(f64, f64)> {
        let mut bounds = self.times.clone();
        if self.duration > *bounds.last().expect("non-empty") {
            bounds.push(self.duration);
        }
        bounds.windows(2).map(|w| (w[0], w[1])).collect()
    }

    pub fn at(&self, t: f64) -> Result<TrajectoryPoint> {
        // Allow the final sample to overshoot by round-off.
        let tol = 1e-9 * self.duration.max(1.0);
        if !(t >= -tol && t <= self.duration + tol) {
            return Err(Error::TimeOutOfRange {
                t,
                duration: self.duration,
            });
        }
        let n = self.dof();
        let rest = |q: &JointVec| TrajectoryPoint {
            t,
            q: q.clone(),
            qd: JointVec::zeros(n),
            qdd: JointVec::zeros(n),
        };
        let last = self.times.len() - 1;
        if t <= self.times[0] {
            return Ok(rest(&self.waypoints[0]));
        }
        if t >= self.times[last] {
            return Ok(rest(&self.waypoints[last]));
        }
        let i = self.times.partition_point(|&ti| ti <= t) - 1;
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let span = t1 - t0;
        let (s, ds, dds) = quintic((t - t0) / span);
        let delta = &self.waypoints[i + 1] - &self.waypoints[i];
        Ok(TrajectoryPoint {
            t,
            q: &self.waypoints[i] + &delta * s,
            qd: &delta * (ds / span),
            qdd: &delta * (dds / (span * span)),
        })
    }
}
