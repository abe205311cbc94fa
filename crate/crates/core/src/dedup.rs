//! Folds bursts of the same notice.
//!
//! At most one notice per `(code, stream)` is let through per window. The
//! number of notices swallowed in a window is reported on the next notice
//! admitted for that key.

use alloc::collections::BTreeMap;

use crate::notice::{Notice, NoticeCode};
use crate::wire::StreamId;

type Key = (NoticeCode, Option<StreamId>);

#[derive(Debug, Clone, Copy)]
struct Slot {
    emitted_at: f64,
    suppressed: u32,
}

#[derive(Debug, Clone)]
pub struct NoticeDeduper {
    window_s: f64,
    slots: BTreeMap<Key, Slot>,
    suppressed_total: u64,
}

impl NoticeDeduper {
    pub fn new(window_s: f64) -> Self {
        NoticeDeduper {
            window_s,
            slots: BTreeMap::new(),
            suppressed_total: 0,
        }
    }

    pub fn admit(&mut self, mut notice: Notice) -> Option<Notice> {
        let key = (notice.code, notice.stream_id);
        if let Some(slot) = self.slots.get_mut(&key) {
            if notice.ts - slot.emitted_at < self.window_s {
                slot.suppressed = slot.suppressed.saturating_add(1);
                self.suppressed_total += 1;
                return None;
            }
            notice.repeats = slot.suppressed;
        }
        self.slots.insert(
            key,
            Slot {
                emitted_at: notice.ts,
                suppressed: 0,
            },
        );
        Some(notice)
    }

    pub fn suppressed_total(&self) -> u64 {
        self.suppressed_total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::notice::{Evidence, Rule};
    use crate::recovery::AcceptDecision;

    fn n6(ts: f64, observed: u16, stream: u16) -> Notice {
        Notice::new(
            Rule::A5,
            ts,
            Some(StreamId::new(Default::default(), stream)),
            Evidence::OutOfOrder {
                observed,
                expected: 1,
                decision: AcceptDecision::DiscardStale,
            },
        )
    }

    #[test]
    fn folds_within_window_and_counts() {
        let mut d = NoticeDeduper::new(1.0);
        assert!(d.admit(n6(0.0, 1, 1)).is_some());
        assert!(d.admit(n6(0.5, 2, 1)).is_none());
        assert!(d.admit(n6(0.99, 3, 1)).is_none());
        // other stream is independent
        assert!(d.admit(n6(0.5, 2, 2)).is_some());
        let next = d.admit(n6(1.0, 4, 1)).unwrap();
        assert_eq!(next.repeats, 2);
        assert_eq!(d.suppressed_total(), 2);
    }

    #[test]
    fn admitted_notices_are_a_window_apart() {
        let mut d = NoticeDeduper::new(1.0);
        let mut kept = alloc::vec::Vec::new();
        for i in 0..1000 {
            if let Some(n) = d.admit(n6(i as f64 * 0.01, i as u16, 1)) {
                kept.push(n.ts);
            }
        }
        assert_eq!(kept.len(), 10);
        assert!(kept.windows(2).all(|w| w[1] - w[0] >= 1.0 - 1e-9));
    }
}
