//! JSON-lines notice log, one record per line.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use tsn_ids_core::notice::UnknownCode;
use tsn_ids_core::{Notice, NoticeCode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoticeRecord {
    /// Capture time of the triggering event.
    pub ts: f64,
    pub note: String,
    pub msg: String,
    pub stream_id: Option<String>,
    pub evidence: BTreeMap<String, String>,
    pub rule: String,
    #[serde(default)]
    pub repeats: u32,
    /// Wall-clock write time; absent in fixed-clock logs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logged_at: Option<f64>,
}

impl NoticeRecord {
    pub fn from_notice(n: &Notice) -> Self {
        NoticeRecord {
            ts: n.ts,
            note: n.code.note().to_string(),
            msg: n.message(),
            stream_id: n.stream_id.map(|s| s.to_string()),
            evidence: n
                .evidence
                .fields()
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect(),
            rule: n.rule.as_str().to_string(),
            repeats: n.repeats,
            logged_at: None,
        }
    }

    pub fn code(&self) -> Result<NoticeCode, UnknownCode> {
        self.note.parse()
    }

    /// Evidence keys are exactly one of the sets allowed for the code.
    pub fn is_schema_valid(&self) -> bool {
        let Ok(code) = self.code() else { return false };
        let keys: Vec<&str> = self.evidence.keys().map(String::as_str).collect();
        tsn_ids_core::Evidence::allowed_keys(code)
            .iter()
            .any(|allowed| {
                let mut a = allowed.to_vec();
                a.sort_unstable();
                a == keys
            })
    }
}

pub struct NoticeLog<W: Write> {
    out: W,
    fixed_clock: bool,
    written: u64,
}

impl NoticeLog<File> {
    pub fn create(path: impl AsRef<Path>, fixed_clock: bool) -> io::Result<Self> {
        Ok(NoticeLog::new(File::create(path)?, fixed_clock))
    }
}

impl<W: Write> NoticeLog<W> {
    pub fn new(out: W, fixed_clock: bool) -> Self {
        NoticeLog {
            out,
            fixed_clock,
            written: 0,
        }
    }

    /// Appends and flushes one line.
    pub fn emit(&mut self, notice: &Notice) -> io::Result<NoticeRecord> {
        let mut rec = NoticeRecord::from_notice(notice);
        if !self.fixed_clock {
            rec.logged_at = Some(
                SystemTime::now()
                    .duration_since(UNIX_EPOCH)
                    .map_or(0.0, |d| d.as_secs_f64()),
            );
        }
        let mut line = serde_json::to_vec(&rec).map_err(io::Error::other)?;
        line.push(b'\n');
        self.out.write_all(&line)?;
        self.out.flush()?;
        self.written += 1;
        Ok(rec)
    }

    pub fn written(&self) -> u64 {
        self.written
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LogReadError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {source}")]
    Malformed {
        line: usize,
        source: serde_json::Error,
    },
}

pub fn parse_log<R: BufRead>(r: R) -> Result<Vec<NoticeRecord>, LogReadError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|source| LogReadError::Malformed {
                line: i + 1,
                source,
            })?,
        );
    }
    Ok(out)
}

pub fn read_log(path: impl AsRef<Path>) -> Result<Vec<NoticeRecord>, LogReadError> {
    parse_log(BufReader::new(File::open(path)?))
}
