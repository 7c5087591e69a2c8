//! The append-only `.sessions.ndjson` log of completed sessions.
//!
//! One JSON object per line. Every record is encoded into a single buffer
//! and written with one `write_all` on a file opened in append mode, so
//! concurrent writers never interleave partial records.

use std::fs::OpenOptions;
use std::io::{self, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::executor::{Answer, Demographics, Session, SessionResult, SessionState};
use crate::model::CategoryResult;

pub const SESSION_LOG_EXTENSION: &str = ".sessions.ndjson";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogRecord {
    pub session: Session,
    pub result: SessionResult,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorruptRecord {
    /// 1-based line number in the log.
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LoadedLog {
    pub records: Vec<LogRecord>,
    pub corrupt: Vec<CorruptRecord>,
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("only completed sessions can be persisted")]
    NotCompleted,
    #[error("result belongs to session `{result}`, not `{session}`")]
    ResultMismatch { session: String, result: String },
    #[error("corrupt session record on line {line}: {message}")]
    Corrupt { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Serialize, Deserialize)]
struct WireRecord {
    session_id: String,
    test_id: String,
    demographics: Demographics,
    answers: Vec<WireAnswer>,
    results: Vec<WireResult>,
    started_at: DateTime<Utc>,
    completed_at: DateTime<Utc>,
}

#[derive(Serialize, Deserialize)]
struct WireAnswer {
    item_id: String,
    answer_index: usize,
    ts: DateTime<Utc>,
}

#[derive(Serialize, Deserialize)]
struct WireResult {
    category_id: String,
    raw_score: String,
    band_index: u32,
    interpretation: String,
}

/// Encodes one completed session as a newline-terminated log line.
pub fn persist_session(session: &Session, result: &SessionResult) -> Result<Vec<u8>, LogError> {
    let completed_at = match (session.state, session.completed_at) {
        (SessionState::Completed, Some(at)) => at,
        _ => return Err(LogError::NotCompleted),
    };
    if session.session_id != result.session_id {
        return Err(LogError::ResultMismatch {
            session: session.session_id.clone(),
            result: result.session_id.clone(),
        });
    }
    let wire = WireRecord {
        session_id: session.session_id.clone(),
        test_id: session.test_id.clone(),
        demographics: session.demographics.clone(),
        answers: session
            .answers
            .iter()
            .map(|a| WireAnswer {
                item_id: a.item_id.0.clone(),
                answer_index: a.answer_index,
                ts: a.ts,
            })
            .collect(),
        results: result
            .categories
            .iter()
            .map(|c| WireResult {
                category_id: c.category_id.0.clone(),
                raw_score: c.raw_score.to_string(),
                band_index: c.band_index,
                interpretation: c.interpretation.clone(),
            })
            .collect(),
        started_at: session.started_at,
        completed_at,
    };
    let mut line = serde_json::to_vec(&wire).expect("wire record always serializes");
    line.push(b'\n');
    Ok(line)
}

/// Appends one encoded record to the log at `path`, creating it if needed.
pub fn append_record(path: &Path, record: &[u8]) -> io::Result<()> {
    let mut file = OpenOptions::new().create(true).append(true).open(path)?;
    file.write_all(record)?;
    file.flush()
}

fn decode_line(line: &str) -> Result<LogRecord, String> {
    let w: WireRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let categories = w
        .results
        .into_iter()
        .map(|r| {
            let raw_score = Decimal::from_str(&r.raw_score)
                .map_err(|e| format!("raw_score `{}`: {e}", r.raw_score))?;
            Ok(CategoryResult {
                category_id: r.category_id.into(),
                raw_score,
                band_index: r.band_index,
                interpretation: r.interpretation,
            })
        })
        .collect::<Result<Vec<_>, String>>()?;
    let session = Session {
        session_id: w.session_id.clone(),
        test_id: w.test_id,
        demographics: w.demographics,
        answers: w
            .answers
            .into_iter()
            .map(|a| Answer {
                item_id: a.item_id.into(),
                answer_index: a.answer_index,
                ts: a.ts,
            })
            .collect(),
        state: SessionState::Completed,
        started_at: w.started_at,
        completed_at: Some(w.completed_at),
    };
    Ok(LogRecord {
        session,
        result: SessionResult {
            session_id: w.session_id,
            categories,
        },
    })
}

/// Decodes a session log. Blank lines are skipped. With `strict` the first
/// corrupt line aborts the load; otherwise corrupt lines are collected in
/// [`LoadedLog::corrupt`] and the rest is returned.
pub fn load_sessions(bytes: &[u8], strict: bool) -> Result<LoadedLog, LogError> {
    let mut out = LoadedLog::default();
    for (n, raw) in bytes.split(|&b| b == b'\n').enumerate() {
        let line = n + 1;
        let decoded = std::str::from_utf8(raw)
            .map_err(|e| e.to_string())
            .and_then(|s| {
                if s.trim().is_empty() {
                    Ok(None)
                } else {
                    decode_line(s).map(Some)
                }
            });
        match decoded {
            Ok(Some(record)) => out.records.push(record),
            Ok(None) => {}
            Err(message) if strict => return Err(LogError::Corrupt { line, message }),
            Err(message) => out.corrupt.push(CorruptRecord { line, message }),
        }
    }
    Ok(out)
}

/// Reads the log at `path`; a missing file is an empty log.
pub fn load_session_file(path: &Path, strict: bool) -> Result<LoadedLog, LogError> {
    match std::fs::read(path) {
        Ok(bytes) => load_sessions(&bytes, strict),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(LoadedLog::default()),
        Err(e) => Err(e.into()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::executor::{score_session, start_session_with, submit_answer_at};
    use crate::fixtures::yes_no_counting_test;
    use crate::model::DemographicValue;
    use chrono::TimeZone;

    fn completed(id: &str, picks: &[usize]) -> (Session, SessionResult) {
        let t = yes_no_counting_test();
        let demo: Demographics = [
            ("sex".to_owned(), DemographicValue::Text("M".into())),
            ("age".to_owned(), DemographicValue::Integer(51)),
        ]
        .into_iter()
        .collect();
        let at = Utc.with_ymd_and_hms(2024, 1, 2, 3, 4, 5).unwrap()
            + chrono::Duration::nanoseconds(123_456_789);
        let mut s = start_session_with(&t, demo, id, at).unwrap();
        for &p in picks {
            s = submit_answer_at(&s, &t, p, at + chrono::Duration::seconds(1)).unwrap();
        }
        let r = score_session(&s, &t).unwrap();
        (s, r)
    }

    #[test]
    fn persist_and_load_one() {
        let (s, r) = completed("a", &[0, 1, 0]);
        let line = persist_session(&s, &r).unwrap();
        assert_eq!(line.last(), Some(&b'\n'));
        assert_eq!(line.iter().filter(|&&b| b == b'\n').count(), 1);
        let loaded = load_sessions(&line, true).unwrap();
        assert_eq!(
            loaded.records,
            vec![LogRecord {
                session: s,
                result: r
            }]
        );
    }

    #[test]
    fn wire_keys() {
        let (s, r) = completed("a", &[0, 1, 0]);
        let v: serde_json::Value =
            serde_json::from_slice(&persist_session(&s, &r).unwrap()).unwrap();
        assert_eq!(v["results"][0]["raw_score"], "2");
        assert_eq!(v["demographics"]["age"], 51);
        assert_eq!(v["answers"][1]["answer_index"], 1);
        for key in ["session_id", "test_id", "started_at", "completed_at"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert!(v["answers"][0].get("ts").is_some());
    }

    #[test]
    fn empty_log() {
        assert_eq!(load_sessions(b"", true).unwrap(), LoadedLog::default());
    }

    #[test]
    fn corrupt_line_lenient_and_strict() {
        let (s1, r1) = completed("a", &[0, 0, 0]);
        let (s2, r2) = completed("b", &[1, 1, 1]);
        let mut log = persist_session(&s1, &r1).unwrap();
        log.extend_from_slice(b"{\"session_id\": \"trunc\n");
        log.extend(persist_session(&s2, &r2).unwrap());

        let loaded = load_sessions(&log, false).unwrap();
        assert_eq!(loaded.records.len(), 2);
        assert_eq!(loaded.corrupt.len(), 1);
        assert_eq!(loaded.corrupt[0].line, 2);

        match load_sessions(&log, true) {
            Err(LogError::Corrupt { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected corrupt error, got {other:?}"),
        }
    }

    #[test]
    fn incomplete_session_is_refused() {
        let (mut s, r) = completed("a", &[0, 0, 0]);
        s.answers.pop();
        s.state = SessionState::InProgress;
        s.completed_at = None;
        assert!(matches!(
            persist_session(&s, &r),
            Err(LogError::NotCompleted)
        ));
    }

    #[test]
    fn append_only_file() {
        let dir = std::env::temp_dir().join(format!("psytest-log-{}", uuid::Uuid::new_v4()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("t.sessions.ndjson");
        assert!(load_session_file(&path, true).unwrap().records.is_empty());
        let (s1, r1) = completed("a", &[0, 0, 0]);
        let (s2, r2) = completed("b", &[1, 0, 1]);
        append_record(&path, &persist_session(&s1, &r1).unwrap()).unwrap();
        let first = std::fs::read(&path).unwrap();
        append_record(&path, &persist_session(&s2, &r2).unwrap()).unwrap();
        let both = std::fs::read(&path).unwrap();
        assert!(both.starts_with(&first));
        let loaded = load_session_file(&path, true).unwrap();
        assert_eq!(loaded.records.len(), 2);
        assert_eq!(loaded.records[1].session.session_id, "b");
        std::fs::remove_dir_all(dir).unwrap();
    }
}
