//! Append-only JSON-lines history of per-patient severity measurements.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("timestamp {ts} is not after the last session ({last}) of patient {patient_id:?}")]
    OutOfOrderTimestamp {
        patient_id: String,
        ts: i64,
        last: i64,
    },
    #[error("insufficient history for patient {patient_id:?}: {found} session(s), need {needed}")]
    InsufficientHistory {
        patient_id: String,
        found: usize,
        needed: usize,
    },
    #[error("severity {what} = {value} is outside [0, 100]")]
    InvalidSeverity { what: &'static str, value: f64 },
    #[error("{path} line {line}: {message}")]
    Corrupt {
        path: String,
        line: usize,
        message: String,
    },
    #[error("I/O failure on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub patient_id: String,
    /// Seconds since the Unix epoch, UTC.
    pub ts: i64,
    pub prolongation: f64,
    pub repetition: f64,
    pub report_path: String,
}

impl SessionRecord {
    fn validate(&self) -> Result<(), SessionError> {
        for (what, value) in [
            ("prolongation", self.prolongation),
            ("repetition", self.repetition),
        ] {
            if !(0.0..=100.0).contains(&value) {
                return Err(SessionError::InvalidSeverity { what, value });
            }
        }
        Ok(())
    }
}

/// A store file; one JSON object per line.
#[derive(Debug, Clone)]
pub struct SessionStore {
    path: PathBuf,
}

impl SessionStore {
    pub fn open(path: impl AsRef<Path>) -> Self {
        Self {
            path: path.as_ref().to_path_buf(),
        }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn io_err(&self, source: std::io::Error) -> SessionError {
        SessionError::Io {
            path: self.path.display().to_string(),
            source,
        }
    }

    /// Every complete record in file order. A missing file is an empty store.
    /// An unterminated final line is a torn write: it is skipped with a warning.
    pub fn records(&self) -> Result<Vec<SessionRecord>, SessionError> {
        let text = match std::fs::read_to_string(&self.path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(self.io_err(e)),
        };
        let complete = text.ends_with('\n');
        let lines: Vec<&str> = text.lines().collect();
        let mut out = Vec::with_capacity(lines.len());
        for (i, line) in lines.iter().enumerate() {
            let last = i + 1 == lines.len();
            if last && !complete {
                log::warn!(
                    "{}: ignoring truncated final line {}",
                    self.path.display(),
                    i + 1
                );
                break;
            }
            if line.trim().is_empty() {
                continue;
            }
            let record = serde_json::from_str(line).map_err(|e| SessionError::Corrupt {
                path: self.path.display().to_string(),
                line: i + 1,
                message: e.to_string(),
            })?;
            out.push(record);
        }
        Ok(out)
    }

    pub fn patient_records(&self, patient_id: &str) -> Result<Vec<SessionRecord>, SessionError> {
        Ok(self
            .records()?
            .into_iter()
            .filter(|r| r.patient_id == patient_id)
            .collect())
    }

    /// Appends one record; its timestamp must exceed the patient's latest.
    pub fn append(&self, record: &SessionRecord) -> Result<(), SessionError> {
        record.validate()?;
        if let Some(last) = self.patient_records(&record.patient_id)?.last() {
            if record.ts <= last.ts {
                return Err(SessionError::OutOfOrderTimestamp {
                    patient_id: record.patient_id.clone(),
                    ts: record.ts,
                    last: last.ts,
                });
            }
        }
        let mut line = serde_json::to_string(record).expect("record is serializable");
        line.push('\n');
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(|e| self.io_err(e))?;
        // Drop the fragment of a torn previous write so it never becomes a line of its own.
        let existing = std::fs::read(&self.path).map_err(|e| self.io_err(e))?;
        if !existing.is_empty() && !existing.ends_with(b"\n") {
            let keep = existing
                .iter()
                .rposition(|&b| b == b'\n')
                .map_or(0, |p| p + 1);
            log::warn!("{}: discarding truncated final line", self.path.display());
            file.set_len(keep as u64).map_err(|e| self.io_err(e))?;
        }
        file.write_all(line.as_bytes())
            .map_err(|e| self.io_err(e))?;
        file.sync_data().map_err(|e| self.io_err(e))
    }

    /// `(Ip, Cp, Ir, Cr)`: initial severities from the first session, current from the latest.
    pub fn improvement_inputs(
        &self,
        patient_id: &str,
    ) -> Result<(f64, f64, f64, f64), SessionError> {
        self.windowed_improvement_inputs(patient_id, 1)
    }

    /// Like [`improvement_inputs`](Self::improvement_inputs), with the current
    /// severities averaged over the last `window` sessions (never including the first).
    pub fn windowed_improvement_inputs(
        &self,
        patient_id: &str,
        window: usize,
    ) -> Result<(f64, f64, f64, f64), SessionError> {
        let records = self.patient_records(patient_id)?;
        if records.len() < 2 {
            return Err(SessionError::InsufficientHistory {
                patient_id: patient_id.to_string(),
                found: records.len(),
                needed: 2,
            });
        }
        let first = &records[0];
        let later = &records[1..];
        let recent = &later[later.len().saturating_sub(window.max(1))..];
        let k = recent.len() as f64;
        let cp = recent.iter().map(|r| r.prolongation).sum::<f64>() / k;
        let cr = recent.iter().map(|r| r.repetition).sum::<f64>() / k;
        Ok((first.prolongation, cp, first.repetition, cr))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(patient: &str, ts: i64, p: f64, r: f64) -> SessionRecord {
        SessionRecord {
            patient_id: patient.into(),
            ts,
            prolongation: p,
            repetition: r,
            report_path: format!("reports/{patient}_{ts}.json"),
        }
    }

    fn store() -> (tempfile::TempDir, SessionStore) {
        let dir = tempfile::tempdir().unwrap();
        let s = SessionStore::open(dir.path().join("sessions.jsonl"));
        (dir, s)
    }

    #[test]
    fn append_then_read_back() {
        let (_d, s) = store();
        let r = rec("p1", 10, 12.5, 40.0);
        s.append(&r).unwrap();
        assert_eq!(s.records().unwrap(), vec![r]);
        let line = std::fs::read_to_string(s.path()).unwrap();
        let v: serde_json::Value = serde_json::from_str(line.trim()).unwrap();
        for key in [
            "patient_id",
            "ts",
            "prolongation",
            "repetition",
            "report_path",
        ] {
            assert!(v.get(key).is_some(), "{key}");
        }
    }

    #[test]
    fn earlier_timestamp_is_rejected() {
        let (_d, s) = store();
        s.append(&rec("p1", 10, 1.0, 1.0)).unwrap();
        assert!(matches!(
            s.append(&rec("p1", 10, 1.0, 1.0)),
            Err(SessionError::OutOfOrderTimestamp { .. })
        ));
        assert!(matches!(
            s.append(&rec("p1", 5, 1.0, 1.0)),
            Err(SessionError::OutOfOrderTimestamp { .. })
        ));
        // Other patients have their own clocks.
        s.append(&rec("p2", 5, 1.0, 1.0)).unwrap();
        assert_eq!(s.records().unwrap().len(), 2);
    }

    #[test]
    fn thousand_appends_in_order() {
        let (_d, s) = store();
        for i in 0..1000 {
            s.append(&rec("p", i, (i % 101) as f64, 3.0)).unwrap();
        }
        let all = s.records().unwrap();
        assert_eq!(all.len(), 1000);
        assert!(all.iter().enumerate().all(|(i, r)| r.ts == i as i64));
    }

    #[test]
    fn first_and_last_sessions() {
        let (_d, s) = store();
        s.append(&rec("p", 1, 80.0, 60.0)).unwrap();
        assert!(matches!(
            s.improvement_inputs("p"),
            Err(SessionError::InsufficientHistory { found: 1, .. })
        ));
        s.append(&rec("p", 2, 20.0, 20.0)).unwrap();
        assert_eq!(s.improvement_inputs("p").unwrap(), (80.0, 20.0, 60.0, 20.0));
    }

    #[test]
    fn middle_sessions_do_not_matter() {
        let middles = [[1.0, 2.0, 3.0], [99.0, 0.0, 50.0]];
        let results: Vec<_> = middles
            .iter()
            .map(|m| {
                let (_d, s) = store();
                s.append(&rec("p", 0, 70.0, 30.0)).unwrap();
                for (i, v) in m.iter().enumerate() {
                    s.append(&rec("p", 1 + i as i64, *v, *v)).unwrap();
                }
                s.append(&rec("p", 10, 10.0, 5.0)).unwrap();
                s.improvement_inputs("p").unwrap()
            })
            .collect();
        assert_eq!(results[0], results[1]);
        assert_eq!(results[0], (70.0, 10.0, 30.0, 5.0));
    }

    #[test]
    fn windowed_average_of_recent_sessions() {
        let (_d, s) = store();
        for (ts, p) in [(0, 90.0), (1, 40.0), (2, 30.0), (3, 20.0)] {
            s.append(&rec("p", ts, p, p / 2.0)).unwrap();
        }
        assert_eq!(
            s.windowed_improvement_inputs("p", 2).unwrap(),
            (90.0, 25.0, 45.0, 12.5)
        );
        assert_eq!(s.windowed_improvement_inputs("p", 100).unwrap().1, 30.0);
    }

    #[test]
    fn truncated_final_line_is_skipped() {
        let (_d, s) = store();
        s.append(&rec("p", 1, 10.0, 10.0)).unwrap();
        let mut bytes = std::fs::read(s.path()).unwrap();
        bytes.extend_from_slice(br#"{"patient_id":"p","ts":2,"prolo"#);
        std::fs::write(s.path(), &bytes).unwrap();
        assert_eq!(s.records().unwrap().len(), 1);
        s.append(&rec("p", 3, 5.0, 5.0)).unwrap();
        let all = s.records().unwrap();
        assert_eq!(all.len(), 2);
        assert_eq!(all[1].ts, 3);
    }

    #[test]
    fn corrupt_complete_line_is_an_error() {
        let (_d, s) = store();
        std::fs::write(s.path(), "not json\n").unwrap();
        assert!(matches!(
            s.records(),
            Err(SessionError::Corrupt { line: 1, .. })
        ));
    }

    #[test]
    fn severities_are_range_checked() {
        let (_d, s) = store();
        assert!(matches!(
            s.append(&rec("p", 1, 101.0, 0.0)),
            Err(SessionError::InvalidSeverity { .. })
        ));
    }
}
