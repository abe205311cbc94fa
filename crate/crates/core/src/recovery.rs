//! Sequence recovery, mirroring what an FRER elimination point does with
//! the R-TAG sequence number.
//!
//! Distances are taken on the 16-bit circle: `d = seq - highest` read as a
//! signed value in `[-32768, 32767]`.
//!
//! - Match: `d > 0` accepts and advances, `d == 0` is a duplicate, `d < 0`
//!   is stale.
//! - Vector: `0 < d <= future_max` accepts and advances; `-H < d <= 0` is
//!   accepted only if that number has not been seen yet; anything else is
//!   rogue.
//!
//! Copies per sequence number are tracked inside the history window so the
//! caller can compare them against the stream's degree of redundancy.

use core::fmt;

pub const MAX_HISTORY: u16 = 1024;
pub const DEFAULT_HISTORY: u16 = 64;
pub const DEFAULT_FUTURE_MAX: u16 = 2048;

const SLOTS: usize = MAX_HISTORY as usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum RecoveryVariant {
    Match,
    #[default]
    Vector,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum AcceptDecision {
    Accept,
    DiscardDuplicate,
    DiscardStale,
    RogueOutOfRange,
}

impl fmt::Display for AcceptDecision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AcceptDecision::Accept => "accept",
            AcceptDecision::DiscardDuplicate => "duplicate",
            AcceptDecision::DiscardStale => "stale",
            AcceptDecision::RogueOutOfRange => "rogue",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RecoveryOutcome {
    pub decision: AcceptDecision,
    /// Copies of this sequence number seen so far, this frame included.
    /// Zero when the frame fell outside the tracked window.
    pub copies: u8,
    /// Highest accepted number before this frame, if any.
    pub previous_highest: Option<u16>,
    /// Set on the first frame after a recovery timeout; carries the
    /// sequence number that was revoked.
    pub rebased_from: Option<u16>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeoutEvent {
    pub last_frame_at: f64,
    pub detected_at: f64,
    pub revoked_seq: Option<u16>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RecoveryParamError {
    HistoryOutOfRange(u16),
    FutureOutOfRange(u16),
}

impl fmt::Display for RecoveryParamError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RecoveryParamError::HistoryOutOfRange(h) => {
                write!(f, "history length {h} not in 1..=1024")
            }
            RecoveryParamError::FutureOutOfRange(v) => {
                write!(f, "forward window {v} not in 1..=32767")
            }
        }
    }
}

impl core::error::Error for RecoveryParamError {}

/// Signed circular distance from `highest` to `seq`.
#[inline]
pub fn seq_delta(seq: u16, highest: u16) -> i32 {
    i32::from(seq.wrapping_sub(highest) as i16)
}

#[derive(Clone)]
pub struct RecoveryState {
    variant: RecoveryVariant,
    history_len: u16,
    future_max: u16,
    highest: Option<u16>,
    /// Copies per sequence number, slot `seq % 1024`.
    copies: [u8; SLOTS],
    last_frame_at: Option<f64>,
    timed_out: bool,
    revoked: Option<u16>,
}

impl fmt::Debug for RecoveryState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RecoveryState")
            .field("variant", &self.variant)
            .field("history_len", &self.history_len)
            .field("future_max", &self.future_max)
            .field("highest", &self.highest)
            .field("last_frame_at", &self.last_frame_at)
            .field("timed_out", &self.timed_out)
            .finish()
    }
}

impl RecoveryState {
    pub fn new(
        variant: RecoveryVariant,
        history_len: u16,
        future_max: u16,
    ) -> Result<Self, RecoveryParamError> {
        if history_len == 0 || history_len > MAX_HISTORY {
            return Err(RecoveryParamError::HistoryOutOfRange(history_len));
        }
        if future_max == 0 || future_max > i16::MAX as u16 {
            return Err(RecoveryParamError::FutureOutOfRange(future_max));
        }
        Ok(RecoveryState {
            variant,
            history_len,
            future_max,
            highest: None,
            copies: [0; SLOTS],
            last_frame_at: None,
            timed_out: false,
            revoked: None,
        })
    }

    pub fn with_defaults(variant: RecoveryVariant) -> Self {
        Self::new(variant, DEFAULT_HISTORY, DEFAULT_FUTURE_MAX).expect("defaults are in range")
    }

    pub fn variant(&self) -> RecoveryVariant {
        self.variant
    }

    pub fn highest_seq(&self) -> Option<u16> {
        self.highest
    }

    pub fn last_frame_at(&self) -> Option<f64> {
        self.last_frame_at
    }

    pub fn timed_out(&self) -> bool {
        self.timed_out
    }

    /// Copies seen of the current highest sequence number.
    pub fn seen_this_seq(&self) -> u8 {
        self.highest.map_or(0, |h| self.copies[slot(h)])
    }

    pub fn accept(&mut self, seq: u16, now: f64) -> RecoveryOutcome {
        self.last_frame_at = Some(now);
        let previous_highest = self.highest;
        let Some(highest) = self.highest else {
            self.reset_history();
            self.highest = Some(seq);
            self.copies[slot(seq)] = 1;
            self.timed_out = false;
            return RecoveryOutcome {
                decision: AcceptDecision::Accept,
                copies: 1,
                previous_highest,
                rebased_from: self.revoked.take(),
            };
        };

        let d = seq_delta(seq, highest);
        let (decision, copies) = match self.variant {
            RecoveryVariant::Match => match d {
                d if d > 0 => self.advance(highest, seq, d),
                0 => self.bump(seq),
                _ => (AcceptDecision::DiscardStale, 0),
            },
            RecoveryVariant::Vector => {
                if d > 0 && d <= i32::from(self.future_max) {
                    self.advance(highest, seq, d)
                } else if d <= 0 && d > -i32::from(self.history_len) {
                    if self.copies[slot(seq)] == 0 {
                        self.copies[slot(seq)] = 1;
                        (AcceptDecision::Accept, 1)
                    } else {
                        self.bump(seq)
                    }
                } else {
                    (AcceptDecision::RogueOutOfRange, 0)
                }
            }
        };
        if decision == AcceptDecision::Accept {
            self.timed_out = false;
        }
        RecoveryOutcome {
            decision,
            copies,
            previous_highest,
            rebased_from: None,
        }
    }

    /// Raises a timeout once per quiet period. The expected sequence number
    /// is revoked so the next frame re-bases the stream.
    pub fn check_timeout(&mut self, now: f64, timeout_s: f64) -> Option<TimeoutEvent> {
        let last = self.last_frame_at?;
        if self.timed_out || now - last <= timeout_s {
            return None;
        }
        self.timed_out = true;
        let revoked_seq = self.highest.take();
        if revoked_seq.is_some() {
            self.revoked = revoked_seq;
        }
        self.reset_history();
        Some(TimeoutEvent {
            last_frame_at: last,
            detected_at: now,
            revoked_seq,
        })
    }

    fn advance(&mut self, highest: u16, seq: u16, d: i32) -> (AcceptDecision, u8) {
        let clear = (d as usize).min(SLOTS);
        for k in 1..=clear {
            self.copies[slot(highest.wrapping_add(k as u16))] = 0;
        }
        self.highest = Some(seq);
        self.copies[slot(seq)] = 1;
        (AcceptDecision::Accept, 1)
    }

    fn bump(&mut self, seq: u16) -> (AcceptDecision, u8) {
        let c = &mut self.copies[slot(seq)];
        *c = c.saturating_add(1);
        (AcceptDecision::DiscardDuplicate, *c)
    }

    fn reset_history(&mut self) {
        self.copies = [0; SLOTS];
    }
}

#[inline]
fn slot(seq: u16) -> usize {
    usize::from(seq) % SLOTS
}

#[cfg(test)]
mod tests {
    use super::*;

    fn primed(variant: RecoveryVariant, highest: u16) -> RecoveryState {
        let mut s = RecoveryState::with_defaults(variant);
        assert_eq!(s.accept(highest, 0.0).decision, AcceptDecision::Accept);
        s
    }

    #[test]
    fn first_frame_initialises() {
        let mut s = RecoveryState::with_defaults(RecoveryVariant::Match);
        let o = s.accept(1234, 1.0);
        assert_eq!(o.decision, AcceptDecision::Accept);
        assert_eq!(o.previous_highest, None);
        assert_eq!(s.highest_seq(), Some(1234));
    }

    #[test]
    fn match_discards_older() {
        let mut s = primed(RecoveryVariant::Match, 5);
        assert_eq!(s.accept(4, 0.1).decision, AcceptDecision::DiscardStale);
        assert_eq!(s.accept(5, 0.1).decision, AcceptDecision::DiscardDuplicate);
        assert_eq!(s.accept(6, 0.1).decision, AcceptDecision::Accept);
    }

    #[test]
    fn match_wraps_around() {
        let mut s = primed(RecoveryVariant::Match, 65535);
        assert_eq!(s.accept(0, 0.1).decision, AcceptDecision::Accept);
        assert_eq!(s.highest_seq(), Some(0));
        assert_eq!(s.accept(65535, 0.2).decision, AcceptDecision::DiscardStale);
    }

    #[test]
    fn half_circle_counts_as_behind() {
        let mut s = primed(RecoveryVariant::Match, 0);
        assert_eq!(s.accept(32768, 0.1).decision, AcceptDecision::DiscardStale);
        assert_eq!(s.accept(32767, 0.1).decision, AcceptDecision::Accept);
    }

    #[test]
    fn vector_rejects_far_injection() {
        let mut s = primed(RecoveryVariant::Vector, 54972);
        let o = s.accept(7148, 0.1);
        assert_eq!(o.decision, AcceptDecision::RogueOutOfRange);
        assert_eq!(o.previous_highest, Some(54972));
        assert_eq!(s.highest_seq(), Some(54972));
    }

    #[test]
    fn vector_accepts_reordered_once() {
        let mut s = primed(RecoveryVariant::Vector, 100);
        assert_eq!(s.accept(103, 0.1).decision, AcceptDecision::Accept);
        assert_eq!(s.accept(101, 0.1).decision, AcceptDecision::Accept);
        assert_eq!(
            s.accept(101, 0.1).decision,
            AcceptDecision::DiscardDuplicate
        );
        assert_eq!(s.accept(102, 0.1).decision, AcceptDecision::Accept);
        // exactly H behind falls out of the window
        assert_eq!(
            s.accept(103 - 64, 0.1).decision,
            AcceptDecision::RogueOutOfRange
        );
        assert_eq!(s.accept(103 - 63, 0.1).decision, AcceptDecision::Accept);
        assert_eq!(s.accept(103 + 2048, 0.1).decision, AcceptDecision::Accept);
        assert_eq!(
            s.accept(103 + 2048 + 2049, 0.1).decision,
            AcceptDecision::RogueOutOfRange
        );
    }

    #[test]
    fn copies_are_counted_per_sequence() {
        let mut s = primed(RecoveryVariant::Vector, 100);
        assert_eq!(s.accept(100, 0.1).copies, 2);
        assert_eq!(s.accept(100, 0.1).copies, 3);
        assert_eq!(s.seen_this_seq(), 3);
        assert_eq!(s.accept(101, 0.1).copies, 1);
        assert_eq!(s.accept(100, 0.1).copies, 4);
        let mut m = primed(RecoveryVariant::Match, 100);
        for _ in 0..300 {
            m.accept(100, 0.1);
        }
        assert_eq!(m.seen_this_seq(), 255);
    }

    #[test]
    fn timeout_is_edge_triggered_and_rebases() {
        let mut s = RecoveryState::with_defaults(RecoveryVariant::Match);
        s.accept(500, 10.0);
        assert_eq!(s.check_timeout(11.0, 2.0), None);
        let ev = s.check_timeout(13.0, 2.0).expect("3 s > 2 s");
        assert_eq!(ev.revoked_seq, Some(500));
        assert_eq!(ev.last_frame_at, 10.0);
        assert!(s.timed_out());
        assert_eq!(s.check_timeout(14.0, 2.0), None);
        // any number is accepted after the revocation
        let o = s.accept(3, 14.5);
        assert_eq!(o.decision, AcceptDecision::Accept);
        assert_eq!(o.rebased_from, Some(500));
        assert!(!s.timed_out());
        assert_eq!(s.accept(4, 14.6).rebased_from, None);
    }

    #[test]
    fn timeout_state_machine_enumeration() {
        // (events, expected number of timeout events)
        // events: Some(t) = frame at t, None = check at next listed time
        let cases: &[(&[(bool, f64)], usize)] = &[
            (&[(true, 0.0), (false, 1.0), (false, 3.0), (false, 4.0)], 1),
            (&[(true, 0.0), (false, 3.0), (true, 3.5), (false, 6.0)], 2),
            (&[(true, 0.0), (true, 1.5), (false, 3.0), (false, 3.6)], 1),
            (&[(false, 5.0)], 0),
            (&[(true, 0.0), (false, 2.0)], 0),
        ];
        for (events, expected) in cases {
            let mut s = RecoveryState::with_defaults(RecoveryVariant::Vector);
            let mut fired = 0;
            for &(is_frame, t) in events.iter() {
                if is_frame {
                    s.accept(1, t);
                } else if s.check_timeout(t, 2.0).is_some() {
                    fired += 1;
                }
            }
            assert_eq!(fired, *expected, "{events:?}");
        }
    }

    #[test]
    fn parameter_bounds() {
        assert!(RecoveryState::new(RecoveryVariant::Vector, 0, 10).is_err());
        assert!(RecoveryState::new(RecoveryVariant::Vector, 1025, 10).is_err());
        assert!(RecoveryState::new(RecoveryVariant::Vector, 1024, 10).is_ok());
        assert!(RecoveryState::new(RecoveryVariant::Vector, 64, 0).is_err());
        assert!(RecoveryState::new(RecoveryVariant::Vector, 64, 32768).is_err());
    }
}
