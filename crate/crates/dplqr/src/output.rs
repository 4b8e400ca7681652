//! `trace.csv` and `summary.json` emission.

use std::io::{self, Write};
use std::path::{Path, PathBuf};

use dplqr_core::SimTrace;
use tempfile::NamedTempFile;

use crate::summary::Summary;

pub const TRACE_FILE: &str = "trace.csv";
pub const SUMMARY_FILE: &str = "summary.json";

/// Formats a real with 17 significant digits, enough to round-trip any `f64`.
pub fn format_real(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn trace_header(dim: usize) -> Vec<String> {
    let mut h = vec!["trial".to_owned(), "t".to_owned(), "agent".to_owned()];
    h.extend((1..=dim).map(|k| format!("x_{k}")));
    h.extend((1..=dim).map(|k| format!("eta_{k}")));
    h.extend(["gap_inf", "V_t", "eps_step", "eps_cum"].map(str::to_owned));
    h
}

/// Writes one row per `(trial, t, agent)`, trials in the given order and rows
/// time-ordered within each trial. Agents are 1-based.
///
/// `eps_step` at time `t` is the budget `ε/p(t)` spent by the release made
/// during step `t`; the final row of a trial has no release and reports 0.
/// `eps_cum` includes the current step.
pub fn write_trace<W: Write>(out: W, traces: &[SimTrace]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let dim = traces.first().map_or(0, SimTrace::dim);
    w.write_record(trace_header(dim))?;
    let mut record = Vec::with_capacity(3 + 2 * dim + 4);
    for trace in traces {
        let per_step = trace.ledger().per_step();
        let mut cum = 0.0;
        for t in 0..trace.len() {
            let eps = per_step.get(t).copied().unwrap_or(0.0);
            cum += eps;
            let v = trace.lyapunov()[t];
            for agent in 0..trace.num_agents() {
                record.clear();
                record.push(trace.trial().to_string());
                record.push(t.to_string());
                record.push((agent + 1).to_string());
                record.extend(trace.state(t, agent).iter().map(|&x| format_real(x)));
                record.extend(trace.noise(t, agent).iter().map(|&x| format_real(x)));
                record.push(format_real(trace.gap(t, agent)));
                record.push(format_real(v));
                record.push(format_real(eps));
                record.push(format_real(cum));
                w.write_record(&record)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes `contents` to `dir/name` through a temporary file in `dir` and an
/// atomic rename.
pub fn write_atomic(dir: &Path, name: &str, contents: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> io::Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let mut tmp = NamedTempFile::new_in(dir)?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file().set_permissions(std::fs::Permissions::from_mode(0o644))?;
    }
    {
        let mut buf = io::BufWriter::new(tmp.as_file_mut());
        contents(&mut buf)?;
        buf.flush()?;
    }
    tmp.as_file().sync_all()?;
    let target = dir.join(name);
    tmp.persist(&target).map_err(|e| e.error)?;
    Ok(target)
}

pub fn summary_json(summary: &Summary) -> String {
    let mut s = serde_json::to_string_pretty(summary).expect("summary serializes");
    s.push('\n');
    s
}

pub fn write_outputs(dir: &Path, summary: &Summary, traces: Option<&[SimTrace]>) -> io::Result<()> {
    if let Some(traces) = traces {
        write_atomic(dir, TRACE_FILE, |w| write_trace(w, traces).map_err(io::Error::other))?;
    }
    let json = summary_json(summary);
    write_atomic(dir, SUMMARY_FILE, |w| w.write_all(json.as_bytes()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reals_round_trip() {
        for x in [0.0, -0.0, 1.0, 1.0 / 3.0, 4783.5, 1e-300, -2.2250738585072014e-308, f64::MAX, 0.1 + 0.2] {
            let s = format_real(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
            let digits = s.split('e').next().unwrap().chars().filter(char::is_ascii_digit).count();
            assert!(digits >= 12, "{s}");
        }
    }

    #[test]
    fn header_order() {
        assert_eq!(
            trace_header(2),
            ["trial", "t", "agent", "x_1", "x_2", "eta_1", "eta_2", "gap_inf", "V_t", "eps_step", "eps_cum"]
        );
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        write_atomic(dir.path(), "a.txt", |w| w.write_all(b"one")).unwrap();
        write_atomic(dir.path(), "a.txt", |w| w.write_all(b"two")).unwrap();
        assert_eq!(std::fs::read_to_string(dir.path().join("a.txt")).unwrap(), "two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
