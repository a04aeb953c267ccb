//! Side-by-side comparison of controllers on one scenario.

use std::fmt::Write as _;
use std::io::Write;

use crate::analysis::metrics::{chattering_index, compute_metrics, ErrorMetrics};
use crate::controllers::Variant;
use crate::error::Result;
use crate::scenario::Scenario;
use crate::simulation::{run_variants, RunResult};

/// Relative gap required between neighbours in an ordering check.
pub const ORDERING_GAP: f64 = 0.05;

#[derive(Clone, Debug, PartialEq)]
pub struct ControllerSummary {
    pub variant: Variant,
    /// `None` when the run diverged.
    pub metrics: Option<ErrorMetrics>,
    pub chattering: Option<f64>,
    pub diverged_at: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonReport {
    pub scenario: String,
    pub window: (f64, f64),
    pub summaries: Vec<ControllerSummary>,
}

impl ComparisonReport {
    pub fn from_runs(scenario: &Scenario, runs: &[RunResult], window: (f64, f64)) -> Result<Self> {
        let phases = scenario.phases();
        let summaries = runs
            .iter()
            .map(|run| {
                if run.diverged() {
                    return Ok(ControllerSummary {
                        variant: run.variant,
                        metrics: None,
                        chattering: None,
                        diverged_at: run.diverged_at,
                    });
                }
                Ok(ControllerSummary {
                    variant: run.variant,
                    metrics: Some(compute_metrics(&run.trace, window, &phases)?),
                    chattering: Some(chattering_index(&run.trace, window)?),
                    diverged_at: None,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            scenario: scenario.name.clone(),
            window,
            summaries,
        })
    }

    pub fn get(&self, variant: Variant) -> Option<&ControllerSummary> {
        self.summaries.iter().find(|s| s.variant == variant)
    }

    pub fn rms(&self, variant: Variant) -> Option<f64> {
        self.get(variant)?.metrics.as_ref().map(|m| m.overall.rms)
    }

    /// Converged controllers from most to least accurate (RMS ‖e‖).
    pub fn accuracy_ranking(&self) -> Vec<Variant> {
        self.ranking(|s| s.metrics.as_ref().map(|m| m.overall.rms))
    }

    /// Converged controllers from smoothest to most chattering torque.
    pub fn chattering_ranking(&self) -> Vec<Variant> {
        self.ranking(|s| s.chattering)
    }

    fn ranking(&self, key: impl Fn(&ControllerSummary) -> Option<f64>) -> Vec<Variant> {
        let mut v: Vec<(f64, Variant)> = self
            .summaries
            .iter()
            .filter_map(|s| key(s).map(|k| (k, s.variant)))
            .collect();
        v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        v.into_iter().map(|(_, var)| var).collect()
    }

    /// Whether RMS ‖e‖ strictly decreases along `order` with each step at
    /// least `gap` (relative to the larger value). `None` if any of them is
    /// missing or diverged.
    pub fn rms_decreasing(&self, order: &[Variant], gap: f64) -> Option<bool> {
        let values: Option<Vec<f64>> = order.iter().map(|&v| self.rms(v)).collect();
        let values = values?;
        Some(values.windows(2).all(|w| w[1] < w[0] * (1.0 - gap)))
    }

    pub fn write_metrics_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "controller",
            "scope",
            "start",
            "end",
            "mean",
            "median",
            "rms",
            "max",
            "samples",
            "chattering",
            "diverged_at",
        ])?;
        let f = |x: f64| format!("{x:.8e}");
        for s in &self.summaries {
            let name = s.variant.name();
            let div = s.diverged_at.map(f).unwrap_or_default();
            let Some(m) = &s.metrics else {
                w.write_record([
                    name,
                    "overall",
                    &f(self.window.0),
                    &f(self.window.1),
                    "",
                    "",
                    "",
                    "",
                    "0",
                    "",
                    &div,
                ])?;
                continue;
            };
            let chat = s.chattering.map(f).unwrap_or_default();
            let mut row = |scope: &str, a: f64, b: f64, st: &crate::analysis::Stats, chat: &str| {
                w.write_record([
                    name,
                    scope,
                    &f(a),
                    &f(b),
                    &f(st.mean),
                    &f(st.median),
                    &f(st.rms),
                    &f(st.max),
                    &st.samples.to_string(),
                    chat,
                    &div,
                ])
            };
            row("overall", self.window.0, self.window.1, &m.overall, &chat)?;
            for p in &m.phases {
                row(&p.name, p.start, p.end, &p.stats, "")?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_markdown(&self) -> String {
        let mut md = String::new();
        let _ = writeln!(md, "# Controller comparison: {}\n", self.scenario);
        let _ = writeln!(
            md,
            "Window: {:.3} s to {:.3} s. Statistics of the tracking-error norm ‖e‖ (rad).\n",
            self.window.0, self.window.1
        );
        let _ = writeln!(
            md,
            "| Controller | Mean | Median | RMS | Max | Chattering (RMS Δτ, N·m) |"
        );
        let _ = writeln!(md, "|---|---|---|---|---|---|");
        for s in &self.summaries {
            match (&s.metrics, s.chattering) {
                (Some(m), Some(c)) => {
                    let o = &m.overall;
                    let _ = writeln!(
                        md,
                        "| {} | {:.4e} | {:.4e} | {:.4e} | {:.4e} | {:.4e} |",
                        s.variant.label(),
                        o.mean,
                        o.median,
                        o.rms,
                        o.max,
                        c
                    );
                }
                _ => {
                    let _ = writeln!(
                        md,
                        "| {} | diverged at {:.3} s | | | | |",
                        s.variant.label(),
                        s.diverged_at.unwrap_or(f64::NAN)
                    );
                }
            }
        }

        let phase_names: Vec<String> = self
            .summaries
            .iter()
            .find_map(|s| s.metrics.as_ref())
            .map(|m| m.phases.iter().map(|p| p.name.clone()).collect())
            .unwrap_or_default();
        if !phase_names.is_empty() {
            let _ = writeln!(md, "\n## RMS ‖e‖ per phase\n");
            let _ = writeln!(md, "| Controller | {} |", phase_names.join(" | "));
            let _ = writeln!(md, "|---|{}", "---|".repeat(phase_names.len()));
            for s in &self.summaries {
                if let Some(m) = &s.metrics {
                    let cells: Vec<String> = m.phases.iter().map(|p| format!("{:.4e}", p.stats.rms)).collect();
                    let _ = writeln!(md, "| {} | {} |", s.variant.label(), cells.join(" | "));
                }
            }
        }

        let _ = writeln!(md, "\n## Ranking\n");
        let acc = self.accuracy_ranking();
        let chat = self.chattering_ranking();
        let _ = writeln!(
            md,
            "| Controller | Accuracy rank (1 = best) | Chattering rank (1 = smoothest) |"
        );
        let _ = writeln!(md, "|---|---|---|");
        for s in &self.summaries {
            let rank = |list: &[Variant]| {
                list.iter()
                    .position(|&v| v == s.variant)
                    .map_or("excluded".to_string(), |i| (i + 1).to_string())
            };
            let _ = writeln!(md, "| {} | {} | {} |", s.variant.label(), rank(&acc), rank(&chat));
        }

        let expected = [Variant::Ctc, Variant::Fg, Variant::Ag, Variant::St];
        let _ = writeln!(md, "\n## Ordering checks\n");
        match self.rms_decreasing(&expected, ORDERING_GAP) {
            Some(ok) => {
                let _ = writeln!(
                    md,
                    "- RMS ‖e‖: CTC > USDE-FG > USDE-AG > USDE-ST with ≥ {:.0}% gaps: **{}**",
                    ORDERING_GAP * 100.0,
                    if ok { "holds" } else { "does not hold" }
                );
                let st_top = chat.last() == Some(&Variant::St) && chat.len() == 4;
                let _ = writeln!(
                    md,
                    "- Chattering strictly largest for USDE-ST: **{}**",
                    if st_top { "holds" } else { "does not hold" }
                );
            }
            None => {
                let _ = writeln!(
                    md,
                    "- RMS ordering check skipped: needs all four controllers with converged runs."
                );
            }
        }
        md
    }
}

/// Runs `variants` on `scenario` in parallel and summarizes them.
pub fn compare_controllers(
    scenario: &Scenario,
    variants: &[Variant],
    window: (f64, f64),
    jobs: usize,
) -> Result<(ComparisonReport, Vec<RunResult>)> {
    let runs = run_variants(scenario, variants, jobs)?;
    let report = ComparisonReport::from_runs(scenario, &runs, window)?;
    Ok((report, runs))
}
