//! Tracking-error statistics of `‖e(t)‖₂`.

use crate::error::{Error, Result};
use crate::simulation::Trace;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stats {
    pub mean: f64,
    pub median: f64,
    pub rms: f64,
    pub max: f64,
    pub samples: usize,
}

impl Stats {
    pub fn from_values(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mid = sorted.len() / 2;
        let median = if sorted.len() % 2 == 0 {
            0.5 * (sorted[mid - 1] + sorted[mid])
        } else {
            sorted[mid]
        };
        Some(Self {
            mean: values.iter().sum::<f64>() / n,
            median,
            rms: (values.iter().map(|v| v * v).sum::<f64>() / n).sqrt(),
            max: sorted[sorted.len() - 1],
            samples: values.len(),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhaseStats {
    pub name: String,
    pub start: f64,
    pub end: f64,
    pub stats: Stats,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorMetrics {
    pub window: (f64, f64),
    pub overall: Stats,
    pub phases: Vec<PhaseStats>,
}

/// `‖e‖₂` of every record with `start ≤ t ≤ end`.
pub fn error_norms(trace: &Trace, window: (f64, f64)) -> Vec<f64> {
    trace
        .records
        .iter()
        .filter(|r| r.t >= window.0 && r.t <= window.1)
        .map(|r| r.e.norm())
        .collect()
}

pub fn window_stats(trace: &Trace, window: (f64, f64)) -> Result<Stats> {
    Stats::from_values(&error_norms(trace, window)).ok_or(Error::EmptyWindow {
        start: window.0,
        end: window.1,
    })
}

/// Statistics over `window` plus one entry per phase `(name, start, end)`,
/// each clipped to the window. Phases are half-open except the last, so
/// every sample is counted once. Phases with no samples are skipped.
pub fn compute_metrics(trace: &Trace, window: (f64, f64), phases: &[(String, f64, f64)]) -> Result<ErrorMetrics> {
    let overall = window_stats(trace, window)?;
    let last = phases.len().saturating_sub(1);
    let phases = phases
        .iter()
        .enumerate()
        .filter_map(|(i, (name, a, b))| {
            let (start, end) = (a.max(window.0), b.min(window.1));
            let values: Vec<f64> = trace
                .records
                .iter()
                .filter(|r| r.t >= start && (r.t < end || (i == last && r.t <= end)))
                .map(|r| r.e.norm())
                .collect();
            Stats::from_values(&values).map(|stats| PhaseStats {
                name: name.clone(),
                start: *a,
                end: *b,
                stats,
            })
        })
        .collect();
    Ok(ErrorMetrics {
        window,
        overall,
        phases,
    })
}

/// Chattering index: RMS over steps of `‖τ(t_k) − τ(t_{k−1})‖₂`.
pub fn chattering_index(trace: &Trace, window: (f64, f64)) -> Result<f64> {
    let diffs: Vec<f64> = trace
        .records
        .windows(2)
        .filter(|w| w[0].t >= window.0 && w[1].t <= window.1)
        .map(|w| (&w[1].tau_applied - &w[0].tau_applied).norm())
        .collect();
    Stats::from_values(&diffs).map(|s| s.rms).ok_or(Error::EmptyWindow {
        start: window.0,
        end: window.1,
    })
}
