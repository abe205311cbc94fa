//! Stream reservation ledger.
//!
//! Reservations move `Requested -> Accepted | Failed` and never back. A
//! talker advertise for an accepted stream is reported as a modification
//! attempt and leaves the entry untouched; one for a still-pending stream is
//! a retry.

use alloc::collections::BTreeMap;

use crate::wire::{
    SrpListenerResponse, SrpTalkerAdvertise, StreamId, TalkerStatus, TrafficSpecification,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ReservationStatus {
    Requested,
    Accepted,
    Failed,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StreamReservation {
    pub stream_id: StreamId,
    /// Identity carried by the stream's FRER data frames.
    pub data_handle: StreamId,
    pub traffic_spec: TrafficSpecification,
    pub redundancy_degree: u8,
    pub status: ReservationStatus,
    pub registered_at: f64,
    pub accepted_at: Option<f64>,
    pub last_data_at: Option<f64>,
    pub request_count: u32,
    /// Last traffic spec someone tried to put on the accepted stream.
    pub rejected_change: Option<TrafficSpecification>,
    pub dangling_reported: bool,
}

impl StreamReservation {
    /// Start of the current idle period.
    pub fn idle_since(&self) -> f64 {
        self.last_data_at
            .or(self.accepted_at)
            .unwrap_or(self.registered_at)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UpsertOutcome {
    New,
    ModifiesExisting { previous: TrafficSpecification },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ListenerOutcome {
    Updated(ReservationStatus),
    Unchanged(ReservationStatus),
    Orphan,
}

#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Ledger {
    entries: BTreeMap<StreamId, StreamReservation>,
    by_handle: BTreeMap<StreamId, StreamId>,
    orphan_responses: u32,
    unreserved_frames: u64,
}

impl Ledger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, id: &StreamId) -> Option<&StreamReservation> {
        self.entries.get(id)
    }

    pub fn entries(&self) -> impl Iterator<Item = &StreamReservation> {
        self.entries.values()
    }

    pub fn entries_mut(&mut self) -> impl Iterator<Item = &mut StreamReservation> {
        self.entries.values_mut()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn orphan_responses(&self) -> u32 {
        self.orphan_responses
    }

    pub fn unreserved_frames(&self) -> u64 {
        self.unreserved_frames
    }

    /// Reservation whose data frames carry `handle`.
    pub fn by_data_handle(&self, handle: &StreamId) -> Option<&StreamReservation> {
        self.by_handle
            .get(handle)
            .and_then(|id| self.entries.get(id))
    }

    pub fn upsert_reservation(&mut self, adv: &SrpTalkerAdvertise, now: f64) -> UpsertOutcome {
        if let Some(entry) = self.entries.get_mut(&adv.stream_id) {
            entry.request_count = entry.request_count.saturating_add(1);
            match entry.status {
                ReservationStatus::Accepted => {
                    entry.rejected_change = Some(adv.traffic_spec);
                    return UpsertOutcome::ModifiesExisting {
                        previous: entry.traffic_spec,
                    };
                }
                ReservationStatus::Requested => {
                    // retry of a pending request
                    entry.traffic_spec = adv.traffic_spec;
                    entry.redundancy_degree = adv.requirements.num_seamless_trees.max(1);
                    self.reindex(adv);
                    return UpsertOutcome::New;
                }
                ReservationStatus::Failed => {}
            }
        }
        // fresh request, or a new attempt after a failed one
        let request_count = self
            .entries
            .get(&adv.stream_id)
            .map_or(1, |e| e.request_count);
        self.entries.insert(
            adv.stream_id,
            StreamReservation {
                stream_id: adv.stream_id,
                data_handle: adv.data_handle(),
                traffic_spec: adv.traffic_spec,
                redundancy_degree: adv.requirements.num_seamless_trees.max(1),
                status: ReservationStatus::Requested,
                registered_at: now,
                accepted_at: None,
                last_data_at: None,
                request_count,
                rejected_change: None,
                dangling_reported: false,
            },
        );
        self.reindex(adv);
        UpsertOutcome::New
    }

    fn reindex(&mut self, adv: &SrpTalkerAdvertise) {
        if let Some(entry) = self.entries.get_mut(&adv.stream_id) {
            let old = entry.data_handle;
            entry.data_handle = adv.data_handle();
            if old != entry.data_handle && self.by_handle.get(&old) == Some(&adv.stream_id) {
                self.by_handle.remove(&old);
            }
        }
        self.by_handle.insert(adv.data_handle(), adv.stream_id);
    }

    pub fn apply_listener_response(
        &mut self,
        resp: &SrpListenerResponse,
        now: f64,
    ) -> ListenerOutcome {
        let Some(entry) = self.entries.get_mut(&resp.stream_id) else {
            self.orphan_responses = self.orphan_responses.saturating_add(1);
            return ListenerOutcome::Orphan;
        };
        match (entry.status, resp.talker_status) {
            (ReservationStatus::Requested, TalkerStatus::Ready) => {
                entry.status = ReservationStatus::Accepted;
                entry.accepted_at = Some(now);
                ListenerOutcome::Updated(entry.status)
            }
            (ReservationStatus::Requested, TalkerStatus::Failed) => {
                entry.status = ReservationStatus::Failed;
                ListenerOutcome::Updated(entry.status)
            }
            (status, _) => ListenerOutcome::Unchanged(status),
        }
    }

    /// Marks activity on the reservation owning `handle`. Returns its
    /// stream id, or `None` (and counts the frame) if nothing is reserved.
    pub fn record_data_frame(&mut self, handle: &StreamId, now: f64) -> Option<StreamId> {
        let entry = self
            .by_handle
            .get(handle)
            .and_then(|id| self.entries.get_mut(id));
        match entry {
            Some(e) => {
                let t = now.max(e.registered_at);
                e.last_data_at = Some(e.last_data_at.map_or(t, |prev| prev.max(t)));
                e.dangling_reported = false;
                Some(e.stream_id)
            }
            None => {
                self.unreserved_frames = self.unreserved_frames.saturating_add(1);
                None
            }
        }
    }
}
