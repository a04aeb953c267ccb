//! Super-twisting gain certificate and the finite-time bound, plus the
//! feasibility search for the adaptive-gain constants.

use nalgebra::{Matrix2, SymmetricEigen};

use crate::error::{Error, Result};

/// Eigenvalue threshold for positive definiteness.
pub const PD_THRESHOLD: f64 = 1e-9;

/// `P = ½[[4T₂ + T₁², −T₁], [−T₁, 2]]`.
pub fn p_matrix(t1: f64, t2: f64) -> Matrix2<f64> {
    Matrix2::new(4.0 * t2 + t1 * t1, -t1, -t1, 2.0) * 0.5
}

/// `Q = (T₁/2)[[2T₂ + T₁² − (4T₂/T₁ + T₁)δ₁ − 2δ₂, q₁₂], [q₁₂, 1]]` with
/// `q₁₂ = −(T₁ + 2δ₁ + 2δ₂/T₁)`.
pub fn q_matrix(t1: f64, t2: f64, delta1: f64, delta2: f64) -> Matrix2<f64> {
    let q11 = 2.0 * t2 + t1 * t1 - (4.0 * t2 / t1 + t1) * delta1 - 2.0 * delta2;
    let q12 = -(t1 + 2.0 * delta1 + 2.0 * delta2 / t1);
    Matrix2::new(q11, q12, q12, 1.0) * (0.5 * t1)
}

/// Eigenvalues of a symmetric 2×2 matrix, ascending.
pub fn eigenvalues(m: &Matrix2<f64>) -> [f64; 2] {
    let e = SymmetricEigen::new(*m).eigenvalues;
    [e[0].min(e[1]), e[0].max(e[1])]
}

#[derive(Clone, Debug, PartialEq)]
pub struct JointCertificate {
    pub t1: f64,
    pub t2: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub p: Matrix2<f64>,
    pub q: Matrix2<f64>,
    /// `γ = λmin(P)^½ λmin(Q) / λmax(P)`; only meaningful when `pd_ok`.
    pub gamma: f64,
    pub pd_ok: bool,
}

pub fn st_gain_certificate(t1: f64, t2: f64, delta1: f64, delta2: f64) -> Result<JointCertificate> {
    for (name, v) in [("t1", t1), ("t2", t2)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::invalid(name, "must be finite and > 0"));
        }
    }
    for (name, v) in [("delta1", delta1), ("delta2", delta2)] {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(Error::invalid(name, "must be finite and >= 0"));
        }
    }
    let p = p_matrix(t1, t2);
    let q = q_matrix(t1, t2, delta1, delta2);
    let [p_min, p_max] = eigenvalues(&p);
    let [q_min, _] = eigenvalues(&q);
    let pd_ok = p_min > PD_THRESHOLD && q_min > PD_THRESHOLD;
    Ok(JointCertificate {
        t1,
        t2,
        delta1,
        delta2,
        p,
        q,
        gamma: p_min.sqrt() * q_min / p_max,
        pd_ok,
    })
}

/// Certificates for every joint; all slices must have equal length.
pub fn certify_all(t1: &[f64], t2: &[f64], delta1: &[f64], delta2: &[f64]) -> Result<Vec<JointCertificate>> {
    let n = t1.len();
    if t2.len() != n || delta1.len() != n || delta2.len() != n {
        return Err(Error::invalid(
            "gains",
            "T1, T2, delta1 and delta2 need one entry per joint",
        ));
    }
    (0..n)
        .map(|i| st_gain_certificate(t1[i], t2[i], delta1[i], delta2[i]))
        .collect()
}

/// `α₃ = min{minᵢ γᵢ, √2/(2k)}`. Fails when any joint is uncertified.
pub fn alpha3(certs: &[JointCertificate], k: f64) -> Result<f64> {
    if !(k > 0.0) {
        return Err(Error::invalid("k", "must be > 0"));
    }
    if let Some(i) = certs.iter().position(|c| !c.pd_ok) {
        return Err(Error::invalid(format!("joint {}", i + 1), "gains fail the certificate"));
    }
    Ok(certs
        .iter()
        .map(|c| c.gamma)
        .fold(std::f64::consts::SQRT_2 / (2.0 * k), f64::min))
}

/// `β₃ = 1/(8k) + (k/2)d₀²`.
pub fn beta3(k: f64, d0: f64) -> f64 {
    1.0 / (8.0 * k) + 0.5 * k * d0 * d0
}

fn check_theta0(theta0: f64) -> Result<()> {
    if theta0 > 0.0 && theta0 < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid("theta0", "must lie in (0, 1)"))
    }
}

/// `t_f = 2 V₃(0)^½ / (θ₀ α₃)`.
pub fn finite_time_bound(v3_initial: f64, alpha3: f64, theta0: f64) -> Result<f64> {
    if !(v3_initial >= 0.0) || !v3_initial.is_finite() {
        return Err(Error::invalid("v3", "must be finite and >= 0"));
    }
    if !(alpha3 > 0.0) {
        return Err(Error::invalid("alpha3", "must be > 0 (gains fail the certificate)"));
    }
    check_theta0(theta0)?;
    Ok(2.0 * v3_initial.sqrt() / (theta0 * alpha3))
}

/// Level `V₃ ≤ (β₃ / ((1 − θ₀)α₃))²` reached by `t_f`.
pub fn residual_level(alpha3: f64, beta3: f64, theta0: f64) -> Result<f64> {
    check_theta0(theta0)?;
    if !(alpha3 > 0.0) {
        return Err(Error::invalid("alpha3", "must be > 0"));
    }
    Ok((beta3 / ((1.0 - theta0) * alpha3)).powi(2))
}

/// Bound on `|Sᵢ|` implied by a level `V₃ ≤ v`, using `XᵀPX ≥ λmin(P)|S|`.
pub fn sliding_band(level: f64, cert: &JointCertificate) -> f64 {
    level / eigenvalues(&cert.p)[0]
}

/// Result of the search for `(γ₂, γ₃, γ₄)` that make the adaptive-gain
/// decay rate positive.
#[derive(Clone, Debug, PartialEq)]
pub struct AgFeasibility {
    pub gamma2: f64,
    pub gamma3: f64,
    pub gamma4: f64,
    /// `min{(γ₁ − γ₂)/λmax(M), 1/k − 1/γ₁, minᵢ πᵢ𝓔ᵢ}`.
    pub alpha2: f64,
    pub feasible: bool,
}

/// `𝓔ᵢ = (2γ₄ − 1)σᵢ/γ₄ − 1/(πᵢγ₃) − 1/γ₂`.
pub fn ag_margin(pi: f64, sigma: f64, gamma2: f64, gamma3: f64, gamma4: f64) -> f64 {
    (2.0 * gamma4 - 1.0) * sigma / gamma4 - 1.0 / (pi * gamma3) - 1.0 / gamma2
}

/// Log-grid search maximizing `α₂`. Reports the best point found, with
/// `feasible = false` if no point gives `α₂ > 0`.
pub fn ag_feasibility(gamma1: f64, lambda_max_m: f64, k: f64, pi: &[f64], sigma: &[f64]) -> Result<AgFeasibility> {
    if !(gamma1 > 0.0 && lambda_max_m > 0.0 && k > 0.0) || pi.len() != sigma.len() || pi.is_empty() {
        return Err(Error::invalid(
            "ag_feasibility",
            "needs positive γ₁, λmax(M), k and matching π, σ",
        ));
    }
    if pi.iter().chain(sigma).any(|&x| !(x > 0.0)) {
        return Err(Error::invalid("pi, sigma", "must be > 0"));
    }
    let grid = |lo: f64, hi: f64, n: usize| -> Vec<f64> {
        (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
    };
    let filter_term = 1.0 / k - 1.0 / gamma1;
    let mut best = AgFeasibility {
        gamma2: f64::NAN,
        gamma3: f64::NAN,
        gamma4: f64::NAN,
        alpha2: f64::NEG_INFINITY,
        feasible: false,
    };
    for g2 in grid(gamma1 * 1e-3, gamma1 * 0.999, 60) {
        for g3 in grid(1e-3, 1e4, 40) {
            for g4 in grid(0.5, 1e4, 40) {
                let e = pi
                    .iter()
                    .zip(sigma)
                    .map(|(&p, &s)| p * ag_margin(p, s, g2, g3, g4))
                    .fold(f64::INFINITY, f64::min);
                let alpha2 = ((gamma1 - g2) / lambda_max_m).min(filter_term).min(e);
                if alpha2 > best.alpha2 {
                    best = AgFeasibility {
                        gamma2: g2,
                        gamma3: g3,
                        gamma4: g4,
                        alpha2,
                        feasible: alpha2 > 0.0,
                    };
                }
            }
        }
    }
    Ok(best)
}
