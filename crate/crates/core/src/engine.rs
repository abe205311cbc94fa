//! Detection engine: per-frame rules for SRP and FRER traffic plus the
//! periodic sweep.
//!
//! | rule | trigger   | notices      |
//! |------|-----------|--------------|
//! | A1   | talker    | N1, N2       |
//! | A2   | talker    | N3           |
//! | A3   | talker    | N4           |
//! | A4   | sweep     | N5           |
//! | A5   | FRER      | N6, N7       |
//! | A6   | routes    | N7           |
//! | A7   | FRER      | N7 (rebase)  |
//! | A7   | sweep     | N8           |
//!
//! The `on_*` and [`DetectionEngine::periodic_sweep`] methods return every
//! notice a rule raised. [`DetectionEngine::handle`] is the driver used by
//! the pipeline: it runs due sweeps on the capture clock, dispatches the
//! frame and folds repeated notices.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::config::{ConfigError, DetectorConfig};
use crate::dedup::NoticeDeduper;
use crate::ledger::{Ledger, ListenerOutcome, ReservationStatus, UpsertOutcome};
use crate::notice::{Evidence, Notice, Rule};
use crate::recovery::{AcceptDecision, RecoveryState, RecoveryVariant};
use crate::stats::{RateWindow, RollingStats, Sample};
use crate::wire::{RTagFrame, SrpListenerResponse, SrpTalkerAdvertise, StreamId, TsnFrame};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Diagnostics {
    pub talker_frames: u64,
    pub listener_frames: u64,
    pub frer_frames: u64,
    pub orphan_responses: u64,
    pub unreserved_frames: u64,
    pub sweeps: u64,
    pub suppressed_notices: u64,
}

/// Per-stream recovery summary for state exports.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RecoverySummary {
    pub handle: StreamId,
    pub variant: RecoveryVariant,
    pub highest_seq: Option<u16>,
    pub seen_this_seq: u8,
    pub last_frame_at: Option<f64>,
    pub timed_out: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EngineSnapshot {
    pub ledger: Ledger,
    pub recovery: Vec<RecoverySummary>,
    pub rolling_mean: Option<Sample>,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone)]
pub struct DetectionEngine {
    config: DetectorConfig,
    ledger: Ledger,
    stats: RollingStats,
    rate: RateWindow,
    recovery: BTreeMap<StreamId, RecoveryState>,
    dedup: NoticeDeduper,
    next_sweep: Option<f64>,
    diag: Diagnostics,
}

impl DetectionEngine {
    pub fn new(config: DetectorConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        Ok(DetectionEngine {
            ledger: Ledger::new(),
            stats: RollingStats::new(config.rolling_window as usize),
            rate: RateWindow::new(
                config.request_rate_limit.count,
                config.request_rate_limit.window_s,
            ),
            recovery: BTreeMap::new(),
            dedup: NoticeDeduper::new(config.dedup_window_s),
            next_sweep: None,
            diag: Diagnostics::default(),
            config,
        })
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.config
    }

    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    pub fn recovery_state(&self, handle: &StreamId) -> Option<&RecoveryState> {
        self.recovery.get(handle)
    }

    pub fn diagnostics(&self) -> Diagnostics {
        Diagnostics {
            orphan_responses: u64::from(self.ledger.orphan_responses()),
            unreserved_frames: self.ledger.unreserved_frames(),
            suppressed_notices: self.dedup.suppressed_total(),
            ..self.diag
        }
    }

    pub fn snapshot(&self) -> EngineSnapshot {
        EngineSnapshot {
            ledger: self.ledger.clone(),
            recovery: self
                .recovery
                .iter()
                .map(|(handle, s)| RecoverySummary {
                    handle: *handle,
                    variant: s.variant(),
                    highest_seq: s.highest_seq(),
                    seen_this_seq: s.seen_this_seq(),
                    last_frame_at: s.last_frame_at(),
                    timed_out: s.timed_out(),
                })
                .collect(),
            rolling_mean: self.stats.mean(),
            diagnostics: self.diagnostics(),
        }
    }

    /// Runs due sweeps up to `now`, dispatches the frame, and returns the
    /// notices that survive deduplication.
    pub fn handle(&mut self, frame: &TsnFrame, now: f64) -> Vec<Notice> {
        let mut out = self.advance_clock(now);
        let raised = match frame {
            TsnFrame::SrpTalker(adv) => self.on_srp_talker(adv, now),
            TsnFrame::SrpListener(resp) => self.on_srp_listener(resp, now),
            TsnFrame::Frer(rtag) => self.on_frer_frame(rtag, now),
        };
        out.extend(raised.into_iter().filter_map(|n| self.dedup.admit(n)));
        out
    }

    /// Runs every sweep scheduled at or before `now`. Sweeps sit on a grid
    /// of `sweep_period_s` starting one period after the first event.
    pub fn advance_clock(&mut self, now: f64) -> Vec<Notice> {
        let period = self.config.sweep_period_s;
        let mut next = match self.next_sweep {
            Some(t) => t,
            None => {
                self.next_sweep = Some(now + period);
                return Vec::new();
            }
        };
        let mut out = Vec::new();
        if now - next > 2.0 * period {
            // long gap: one sweep at the last grid point is equivalent
            let skipped = ((now - next) / period) as u64;
            next += skipped as f64 * period;
        }
        while next <= now {
            let notices = self.periodic_sweep(next);
            out.extend(notices.into_iter().filter_map(|n| self.dedup.admit(n)));
            next += period;
        }
        self.next_sweep = Some(next);
        out
    }

    /// Final sweep at end of input.
    pub fn finish(&mut self, now: f64) -> Vec<Notice> {
        let mut out = self.advance_clock(now);
        let notices = self.periodic_sweep(now);
        out.extend(notices.into_iter().filter_map(|n| self.dedup.admit(n)));
        out
    }

    pub fn on_srp_talker(&mut self, adv: &SrpTalkerAdvertise, now: f64) -> Vec<Notice> {
        self.diag.talker_frames += 1;
        let cfg = &self.config;
        let stream = Some(adv.stream_id);
        let ts = adv.traffic_spec;
        let sample = Sample {
            bandwidth_bps: ts.bandwidth_bps(),
            frame_rate: ts.frame_rate(),
        };
        let mut out = Vec::new();

        // A1: absolute thresholds, then deviation from the rolling average
        if sample.bandwidth_bps > cfg.max_bandwidth_bps as f64
            || sample.frame_rate > cfg.max_frame_rate
        {
            out.push(Notice::new(
                Rule::A1,
                now,
                stream,
                Evidence::ExcessiveRequest {
                    bandwidth_bps: sample.bandwidth_bps,
                    max_bandwidth_bps: cfg.max_bandwidth_bps,
                    frame_rate: sample.frame_rate,
                    max_frame_rate: cfg.max_frame_rate,
                },
            ));
        }
        let report = self.stats.update(sample, cfg.min_samples);
        if report.exceeds(cfg.deviation_factor_k) {
            out.push(Notice::new(
                Rule::A1,
                now,
                stream,
                Evidence::DeviatingRequest {
                    bandwidth_ratio: report.bandwidth_ratio.unwrap_or(1.0),
                    rate_ratio: report.rate_ratio.unwrap_or(1.0),
                    mean_bandwidth_bps: report.mean_bandwidth_bps.unwrap_or(0.0),
                    mean_frame_rate: report.mean_frame_rate.unwrap_or(0.0),
                    factor: cfg.deviation_factor_k,
                },
            ));
        }

        // A2: request rate
        let count = self.rate.hit(now);
        if self.rate.exceeded(count) {
            out.push(Notice::new(
                Rule::A2,
                now,
                stream,
                Evidence::TooManyRequests {
                    count,
                    limit: self.rate.limit(),
                    window_s: cfg.request_rate_limit.window_s,
                },
            ));
        }

        // A3: changes to an accepted reservation
        if let UpsertOutcome::ModifiesExisting { previous } =
            self.ledger.upsert_reservation(adv, now)
        {
            out.push(Notice::new(
                Rule::A3,
                now,
                stream,
                Evidence::ChangingAllocation {
                    previous_bandwidth_bps: previous.bandwidth_bps(),
                    requested_bandwidth_bps: sample.bandwidth_bps,
                },
            ));
        }
        out
    }

    /// Updates the ledger only; acceptance is context for A3 and A4.
    pub fn on_srp_listener(&mut self, resp: &SrpListenerResponse, now: f64) -> Vec<Notice> {
        self.diag.listener_frames += 1;
        let _: ListenerOutcome = self.ledger.apply_listener_response(resp, now);
        Vec::new()
    }

    pub fn on_frer_frame(&mut self, rtag: &RTagFrame, now: f64) -> Vec<Notice> {
        self.diag.frer_frames += 1;
        let handle = rtag.stream_handle;
        let seq = rtag.sequence_number;
        let (stream, redundancy) = match self.ledger.record_data_frame(&handle, now) {
            Some(id) => (
                id,
                self.ledger
                    .get(&id)
                    .map_or(self.config.default_redundancy, |r| r.redundancy_degree),
            ),
            None => (handle, self.config.default_redundancy),
        };

        let state = match self.recovery.get_mut(&handle) {
            Some(s) => s,
            None => {
                let fresh = self
                    .config
                    .new_recovery_state()
                    .expect("validated at construction");
                self.recovery.entry(handle).or_insert(fresh)
            }
        };
        let outcome = state.accept(seq, now);
        let expected = outcome.previous_highest.map_or(seq, |h| h.wrapping_add(1));
        let out_of_order = Evidence::OutOfOrder {
            observed: seq,
            expected,
            decision: outcome.decision,
        };

        let mut out = Vec::new();
        match outcome.decision {
            AcceptDecision::Accept => {
                if let Some(revoked) = outcome.rebased_from {
                    if seq != revoked.wrapping_add(1) {
                        out.push(Notice::new(
                            Rule::A7,
                            now,
                            Some(stream),
                            Evidence::Rebased {
                                observed: seq,
                                revoked,
                            },
                        ));
                    }
                }
            }
            AcceptDecision::DiscardDuplicate => {
                if outcome.copies > redundancy {
                    out.push(Notice::new(Rule::A5, now, Some(stream), out_of_order));
                    out.push(Notice::new(
                        Rule::A5,
                        now,
                        Some(stream),
                        Evidence::ExcessiveCopies {
                            sequence: seq,
                            copies: outcome.copies,
                            redundancy,
                        },
                    ));
                }
            }
            AcceptDecision::DiscardStale | AcceptDecision::RogueOutOfRange => {
                out.push(Notice::new(Rule::A5, now, Some(stream), out_of_order));
            }
        }
        out
    }

    pub fn periodic_sweep(&mut self, now: f64) -> Vec<Notice> {
        self.diag.sweeps += 1;
        let mut out = Vec::new();

        let dangling_timeout = self.config.dangling_timeout_s;
        for r in self.ledger.entries_mut() {
            if r.status == ReservationStatus::Accepted
                && !r.dangling_reported
                && now - r.idle_since() > dangling_timeout
            {
                r.dangling_reported = true;
                out.push(Notice::new(
                    Rule::A4,
                    now,
                    Some(r.stream_id),
                    Evidence::Dangling,
                ));
            }
        }

        let timeout = self.config.recovery_timeout_s;
        for (handle, state) in self.recovery.iter_mut() {
            if let Some(ev) = state.check_timeout(now, timeout) {
                let stream = self
                    .ledger
                    .by_data_handle(handle)
                    .map_or(*handle, |r| r.stream_id);
                out.push(Notice::new(
                    Rule::A7,
                    now,
                    Some(stream),
                    Evidence::MemberSilent {
                        last_frame_at: ev.last_frame_at,
                        silent_s: now - ev.last_frame_at,
                        timeout_s: timeout,
                    },
                ));
            }
        }
        out
    }
}
