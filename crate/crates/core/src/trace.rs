//! CSV input and output for traces.
//!
//! Wide format: one row per control step, columns
//! `t, q_*, e_*, S_*, tau_*, d_hat_*, d_true_*, qd_*, q_des_*, tau_cmd_*`,
//! then `K_hat_*` (adaptive runs), `Sigma_*` (super-twisting runs) and
//! `V_lyap`. `tau_*` is the applied (saturated) torque.
//!
//! Long format: `t, series, joint, value`, for plotting tools.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::dynamics::JointVec;
use crate::error::{Error, Result};
use crate::simulation::{Trace, TraceRecord};

/// How floats are printed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FloatFormat {
    /// Scientific notation with this many significant digits.
    Significant(usize),
    /// Shortest representation that parses back to the same bits.
    RoundTrip,
}

impl Default for FloatFormat {
    fn default() -> Self {
        FloatFormat::Significant(9)
    }
}

impl FloatFormat {
    pub fn format(self, x: f64) -> String {
        match self {
            FloatFormat::Significant(digits) => format!("{:.*e}", digits.max(1) - 1, x),
            FloatFormat::RoundTrip => format!("{x:?}"),
        }
    }

    /// Value as it reads back after being written in this format.
    pub fn quantize(self, x: f64) -> f64 {
        self.format(x).parse().expect("formatted float parses")
    }
}

const GROUPS: [&str; 9] = ["q", "e", "S", "tau", "d_hat", "d_true", "qd", "q_des", "tau_cmd"];

fn groups(r: &TraceRecord) -> [&JointVec; 9] {
    [
        &r.q,
        &r.e,
        &r.s,
        &r.tau_applied,
        &r.d_hat,
        &r.d_true,
        &r.qd,
        &r.q_des,
        &r.tau_cmd,
    ]
}

pub fn header(dof: usize, k_hat: bool, sigma: bool) -> Vec<String> {
    let mut cols = vec!["t".to_string()];
    let mut push = |name: &str| cols.extend((1..=dof).map(|i| format!("{name}_{i}")));
    for g in GROUPS {
        push(g);
    }
    if k_hat {
        push("K_hat");
    }
    if sigma {
        push("Sigma");
    }
    cols.push("V_lyap".into());
    cols
}

fn layout(trace: &Trace) -> Result<(usize, bool, bool)> {
    let first = trace
        .records
        .first()
        .ok_or_else(|| Error::Trace("trace is empty".into()))?;
    let (n, k, s) = (first.dof(), first.k_hat.is_some(), first.sigma.is_some());
    for r in &trace.records {
        let lens_ok = groups(r).iter().all(|v| v.len() == n)
            && r.k_hat.as_ref().map_or(!k, |v| k && v.len() == n)
            && r.sigma.as_ref().map_or(!s, |v| s && v.len() == n);
        if !lens_ok {
            return Err(Error::Trace(format!("inconsistent record at t = {}", r.t)));
        }
    }
    Ok((n, k, s))
}

pub fn write_csv<W: Write>(trace: &Trace, writer: W, fmt: FloatFormat) -> Result<()> {
    let (n, k, s) = layout(trace)?;
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(header(n, k, s))?;
    let mut row = Vec::with_capacity(1 + 11 * n);
    for r in &trace.records {
        row.clear();
        row.push(fmt.format(r.t));
        for g in groups(r) {
            row.extend(g.iter().map(|&x| fmt.format(x)));
        }
        for v in [&r.k_hat, &r.sigma].into_iter().flatten() {
            row.extend(v.iter().map(|&x| fmt.format(x)));
        }
        row.push(fmt.format(r.v_lyap));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_path(trace: &Trace, path: impl AsRef<Path>, fmt: FloatFormat) -> Result<()> {
    write_csv(trace, BufWriter::new(File::create(path)?), fmt)
}

pub fn to_csv_string(trace: &Trace, fmt: FloatFormat) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(trace, &mut buf, fmt)?;
    String::from_utf8(buf).map_err(|e| Error::Trace(e.to_string()))
}

pub fn read_csv<R: Read>(reader: R) -> Result<Trace> {
    let mut rd = csv::Reader::from_reader(reader);
    let head: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    let n = head
        .iter()
        .filter(|h| h.starts_with("q_") && h[2..].parse::<usize>().is_ok())
        .count();
    let k = head.iter().any(|h| h.starts_with("K_hat_"));
    let s = head.iter().any(|h| h.starts_with("Sigma_"));
    if n == 0 || head != header(n, k, s) {
        return Err(Error::Trace("unrecognized header".into()));
    }
    let mut records = Vec::new();
    for (line, row) in rd.records().enumerate() {
        let row = row?;
        let vals = row
            .iter()
            .map(|x| x.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Trace(format!("row {}: {e}", line + 1)))?;
        let mut at = 1;
        let mut take = || {
            let v = JointVec::from_row_slice(&vals[at..at + n]);
            at += n;
            v
        };
        let [q, e, sv, tau_applied, d_hat, d_true, qd, q_des, tau_cmd] = std::array::from_fn(|_| take());
        let k_hat = k.then(&mut take);
        let sigma = s.then(&mut take);
        records.push(TraceRecord {
            t: vals[0],
            q,
            qd,
            q_des,
            e,
            s: sv,
            tau_cmd,
            tau_applied,
            d_hat,
            d_true,
            k_hat,
            sigma,
            v_lyap: vals[vals.len() - 1],
        });
    }
    Ok(Trace { records })
}

pub fn read_csv_path(path: impl AsRef<Path>) -> Result<Trace> {
    read_csv(File::open(path)?)
}

/// The trace as it reads back after a write in `fmt`.
pub fn quantized(trace: &Trace, fmt: FloatFormat) -> Trace {
    let qv = |v: &JointVec| v.map(|x| fmt.quantize(x));
    Trace {
        records: trace
            .records
            .iter()
            .map(|r| TraceRecord {
                t: fmt.quantize(r.t),
                q: qv(&r.q),
                qd: qv(&r.qd),
                q_des: qv(&r.q_des),
                e: qv(&r.e),
                s: qv(&r.s),
                tau_cmd: qv(&r.tau_cmd),
                tau_applied: qv(&r.tau_applied),
                d_hat: qv(&r.d_hat),
                d_true: qv(&r.d_true),
                k_hat: r.k_hat.as_ref().map(qv),
                sigma: r.sigma.as_ref().map(qv),
                v_lyap: fmt.quantize(r.v_lyap),
            })
            .collect(),
    }
}

/// Long format, keeping every `decimate`-th record (the last record is
/// always kept). `V_lyap` is written with joint `0`.
pub fn write_long_csv<W: Write>(trace: &Trace, writer: W, decimate: usize, fmt: FloatFormat) -> Result<()> {
    let step = decimate.max(1);
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["t", "series", "joint", "value"])?;
    let last = trace.len().saturating_sub(1);
    for (i, r) in trace.records.iter().enumerate() {
        if i % step != 0 && i != last {
            continue;
        }
        let t = fmt.format(r.t);
        let optional = [("K_hat", &r.k_hat), ("Sigma", &r.sigma)];
        let named = GROUPS
            .into_iter()
            .zip(groups(r))
            .chain(optional.into_iter().filter_map(|(n, v)| v.as_ref().map(|v| (n, v))));
        for (name, v) in named {
            for (j, x) in v.iter().enumerate() {
                w.write_record([t.as_str(), name, &(j + 1).to_string(), &fmt.format(*x)])?;
            }
        }
        w.write_record([t.as_str(), "V_lyap", "0", &fmt.format(r.v_lyap)])?;
    }
    w.flush()?;
    Ok(())
}
