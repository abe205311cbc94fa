//! Compares a notice log against ground truth.
//!
//! Passing means every notice is explained by some expectation and every
//! expectation saw at least its `min_count` notices. Notices explained only
//! by `known_benign` expectations are counted separately.

use crate::notice_log::NoticeRecord;
use crate::scenario::Truth;

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ExpectationResult {
    pub index: usize,
    pub label: String,
    pub note: String,
    pub matched: u64,
    pub min_count: u32,
    pub satisfied: bool,
}

#[derive(Debug, Clone, Default, PartialEq, serde::Serialize)]
pub struct VerifyReport {
    pub notices: u64,
    pub expectations: Vec<ExpectationResult>,
    /// Notices no expectation accounts for.
    pub unexpected: Vec<NoticeRecord>,
    /// Notices accounted for only by known-benign expectations.
    pub known_benign: u64,
    /// Unknown note names in the ground truth.
    pub bad_truth: Vec<String>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.unexpected.is_empty()
            && self.bad_truth.is_empty()
            && self.expectations.iter().all(|e| e.satisfied)
    }

    pub fn missing(&self) -> impl Iterator<Item = &ExpectationResult> {
        self.expectations.iter().filter(|e| !e.satisfied)
    }
}

pub fn verify_records(records: &[NoticeRecord], truth: &Truth) -> VerifyReport {
    let mut matched = vec![0u64; truth.expectations.len()];
    let mut report = VerifyReport {
        notices: records.len() as u64,
        ..VerifyReport::default()
    };
    for e in &truth.expectations {
        if e.note.parse::<tsn_ids_core::NoticeCode>().is_err() {
            report.bad_truth.push(e.note.clone());
        }
    }
    for rec in records {
        let mut any = false;
        let mut only_benign = true;
        for (i, e) in truth.expectations.iter().enumerate() {
            if e.matches(rec) {
                matched[i] += 1;
                any = true;
                only_benign &= e.known_benign;
            }
        }
        if !any {
            report.unexpected.push(rec.clone());
        } else if only_benign {
            report.known_benign += 1;
        }
    }
    report.expectations = truth
        .expectations
        .iter()
        .zip(matched)
        .enumerate()
        .map(|(index, (e, m))| ExpectationResult {
            index,
            label: e.label.clone(),
            note: e.note.clone(),
            matched: m,
            min_count: e.min_count,
            satisfied: m >= u64::from(e.min_count),
        })
        .collect();
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::Expectation;
    use std::collections::BTreeMap;

    fn rec(note: &str, ts: f64) -> NoticeRecord {
        NoticeRecord {
            ts,
            note: note.into(),
            msg: String::new(),
            stream_id: Some("0200000000010001".into()),
            evidence: BTreeMap::from([("observed".into(), "7".into())]),
            rule: "A5".into(),
            repeats: 0,
            logged_at: None,
        }
    }

    fn truth(exps: Vec<Expectation>) -> Truth {
        Truth {
            scenario: "t".into(),
            seed: 0,
            epoch_s: 0.0,
            duration_s: 1.0,
            frames: 0,
            detector_config: Default::default(),
            routes: Default::default(),
            expectations: exps,
        }
    }

    fn exp(note: &str, from_s: f64, to_s: f64, known_benign: bool) -> Expectation {
        Expectation {
            note: note.into(),
            stream_id: None,
            from_s,
            to_s,
            evidence: BTreeMap::new(),
            min_count: 1,
            known_benign,
            label: String::new(),
        }
    }

    #[test]
    fn matching_and_missing() {
        let t = truth(vec![exp("N6.FRER.OutOfOrderFrames", 1.0, 2.0, false)]);
        assert!(verify_records(&[rec("N6.FRER.OutOfOrderFrames", 1.5)], &t).passed());
        let r = verify_records(&[], &t);
        assert!(!r.passed());
        assert_eq!(r.missing().count(), 1);
        let r = verify_records(&[rec("N6.FRER.OutOfOrderFrames", 2.5)], &t);
        assert_eq!(r.unexpected.len(), 1);
    }

    #[test]
    fn evidence_predicates() {
        let mut e = exp("N6.FRER.OutOfOrderFrames", 0.0, 9.0, false);
        e.evidence.insert("observed".into(), "8".into());
        let r = verify_records(&[rec("N6.FRER.OutOfOrderFrames", 1.0)], &truth(vec![e]));
        assert!(!r.passed());
    }

    #[test]
    fn known_benign_is_counted() {
        let mut e = exp("N6.FRER.OutOfOrderFrames", 0.0, 9.0, true);
        e.min_count = 0;
        let r = verify_records(&[rec("N6.FRER.OutOfOrderFrames", 1.0)], &truth(vec![e]));
        assert!(r.passed());
        assert_eq!(r.known_benign, 1);
    }

    #[test]
    fn unknown_note_in_truth_fails() {
        let r = verify_records(&[], &truth(vec![exp("N9.Bogus", 0.0, 1.0, false)]));
        assert_eq!(r.bad_truth, ["N9.Bogus"]);
        assert!(!r.passed());
    }
}
