//! Per-iteration optimization records and their CSV serialization.
//!
//! Every optimization driver appends one [`IterationRecord`] per outer
//! iteration (plus the initial evaluation at `iter = 0`).  The CSV format is
//! RFC 4180: a fixed header, comma-separated fields, CRLF line endings, and
//! floats printed in shortest round-trip form so identical runs produce
//! byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::{Error, Result};

pub const CSV_HEADER: &str = "iter,objective,volume,volume_fraction,ell,gamma,newton_iters,wall_ms";

/// One outer-iteration snapshot of an optimization run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub objective: f64,
    pub volume: f64,
    /// `volume / Vol(D)` with `D` the full design domain.
    pub volume_fraction: f64,
    /// Lagrange multiplier of the volume constraint.
    pub ell: f64,
    /// Penalty factor of the volume constraint.
    pub gamma: f64,
    /// Newton iterations spent on state solves during this outer iteration.
    pub newton_iters: usize,
    /// Always written as 0: wall-clock time would break the byte-identical
    /// output contract, so it is not recorded.
    pub wall_ms: u64,
}

/// Append-only record of an optimization run, ordered by iteration.
#[derive(Debug, Clone, Default)]
pub struct History {
    pub rows: Vec<IterationRecord>,
}

impl History {
    pub fn new() -> Self {
        History { rows: Vec::new() }
    }

    /// Append a record; iterations must be strictly increasing from 0.
    pub fn push(&mut self, rec: IterationRecord) {
        debug_assert_eq!(
            rec.iter,
            self.rows.last().map_or(0, |r| r.iter + 1),
            "history iterations must increase by one from zero"
        );
        self.rows.push(rec);
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.rows.last()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Render as RFC 4180 CSV (CRLF after every line, header included).
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(CSV_HEADER);
        out.push_str("\r\n");
        for r in &self.rows {
            let _ = write!(
                out,
                "{},{:?},{:?},{:?},{:?},{:?},{},{}\r\n",
                r.iter,
                r.objective,
                r.volume,
                r.volume_fraction,
                r.ell,
                r.gamma,
                r.newton_iters,
                r.wall_ms
            );
        }
        out
    }
}

pub fn write_history_csv(history: &History, path: &Path) -> Result<()> {
    fs::write(path, history.to_csv())?;
    Ok(())
}

/// Parse a CSV produced by [`write_history_csv`]; validates the header and
/// the strictly-increasing iteration invariant.
pub fn read_history_csv(path: &Path) -> Result<History> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == CSV_HEADER => {}
        Some((_, h)) => {
            return Err(Error::config_at(1, format!("unexpected CSV header {h:?}")));
        }
        None => return Err(Error::config("empty history file")),
    }
    let mut history = History::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(Error::config_at(
                lineno,
                format!("expected 8 CSV fields, found {}", fields.len()),
            ));
        }
        let parse_f = |s: &str, name: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| Error::config_at(lineno, format!("bad {name} value {s:?}")))
        };
        let parse_u = |s: &str, name: &str| -> Result<usize> {
            s.parse::<usize>()
                .map_err(|_| Error::config_at(lineno, format!("bad {name} value {s:?}")))
        };
        let rec = IterationRecord {
            iter: parse_u(fields[0], "iter")?,
            objective: parse_f(fields[1], "objective")?,
            volume: parse_f(fields[2], "volume")?,
            volume_fraction: parse_f(fields[3], "volume_fraction")?,
            ell: parse_f(fields[4], "ell")?,
            gamma: parse_f(fields[5], "gamma")?,
            newton_iters: parse_u(fields[6], "newton_iters")?,
            wall_ms: fields[7]
                .parse::<u64>()
                .map_err(|_| Error::config_at(lineno, format!("bad wall_ms value {:?}", fields[7])))?,
        };
        if rec.iter != history.rows.last().map_or(0, |r| r.iter + 1) {
            return Err(Error::config_at(lineno, "iterations must increase by one from zero"));
        }
        history.rows.push(rec);
    }
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_row(iter: usize) -> IterationRecord {
        IterationRecord {
            iter,
            objective: 0.1 / (iter + 1) as f64,
            volume: 0.95,
            volume_fraction: 0.95,
            ell: 0.01,
            gamma: 0.02,
            newton_iters: 3,
            wall_ms: 0,
        }
    }

    #[test]
    fn empty_history_is_header_only() {
        let csv = History::new().to_csv();
        assert_eq!(csv, format!("{CSV_HEADER}\r\n"));
    }

    #[test]
    fn lines_end_with_crlf() {
        let mut h = History::new();
        h.push(sample_row(0));
        h.push(sample_row(1));
        let csv = h.to_csv();
        assert_eq!(csv.matches("\r\n").count(), 3);
        assert!(csv.ends_with("\r\n"));
        // No bare LF anywhere.
        assert_eq!(csv.matches('\n').count(), csv.matches("\r\n").count());
    }

    #[test]
    fn csv_round_trips_to_equal_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("history.csv");
        let mut h = History::new();
        h.push(IterationRecord {
            iter: 0,
            objective: 0.123456789123456789,
            volume: 2.0 / 3.0,
            volume_fraction: 1.0 / 3.0,
            ell: -0.01,
            gamma: 20.0,
            newton_iters: 7,
            wall_ms: 0,
        });
        h.push(sample_row(1));
        write_history_csv(&h, &path).unwrap();
        let back = read_history_csv(&path).unwrap();
        assert_eq!(back.rows, h.rows);
    }

    #[test]
    fn identical_histories_serialize_to_identical_bytes() {
        let mut a = History::new();
        let mut b = History::new();
        for i in 0..4 {
            a.push(sample_row(i));
            b.push(sample_row(i));
        }
        assert_eq!(a.to_csv().into_bytes(), b.to_csv().into_bytes());
    }

    #[test]
    fn reader_rejects_gapped_iterations() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        let body = format!("{CSV_HEADER}\r\n0,1.0,1.0,1.0,0.0,1.0,1,0\r\n2,1.0,1.0,1.0,0.0,1.0,1,0\r\n");
        std::fs::write(&path, body).unwrap();
        let err = read_history_csv(&path).unwrap_err();
        assert!(matches!(err, Error::Config { .. }));
    }

    #[test]
    fn reader_rejects_wrong_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad2.csv");
        std::fs::write(&path, "iter,objective\r\n").unwrap();
        assert!(read_history_csv(&path).is_err());
    }
}
