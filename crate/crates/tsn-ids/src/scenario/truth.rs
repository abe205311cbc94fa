//! Ground truth shipped next to every generated capture.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use tsn_ids_core::routes::RouteConfig;
use tsn_ids_core::DetectorConfig;

use crate::notice_log::NoticeRecord;

fn one() -> u32 {
    1
}

/// Describes notices a capture is expected to produce. A notice matches
/// when its note, stream (if given), time window and every evidence
/// predicate agree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectation {
    pub note: String,
    #[serde(default)]
    pub stream_id: Option<String>,
    pub from_s: f64,
    pub to_s: f64,
    /// Exact string matches on evidence fields.
    #[serde(default)]
    pub evidence: BTreeMap<String, String>,
    /// Matching notices that must be present.
    #[serde(default = "one")]
    pub min_count: u32,
    /// Matches are tolerated false positives rather than detections.
    #[serde(default)]
    pub known_benign: bool,
    #[serde(default)]
    pub label: String,
}

impl Expectation {
    pub fn matches(&self, rec: &NoticeRecord) -> bool {
        const SLACK: f64 = 1e-6;
        rec.note == self.note
            && self
                .stream_id
                .as_ref()
                .is_none_or(|s| rec.stream_id.as_ref() == Some(s))
            && rec.ts >= self.from_s - SLACK
            && rec.ts <= self.to_s + SLACK
            && self
                .evidence
                .iter()
                .all(|(k, v)| rec.evidence.get(k) == Some(v))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Truth {
    pub scenario: String,
    pub seed: u64,
    pub epoch_s: f64,
    pub duration_s: f64,
    pub frames: u64,
    pub detector_config: DetectorConfig,
    pub routes: RouteConfig,
    pub expectations: Vec<Expectation>,
}
