//! In-process publish/subscribe bus.
//!
//! Topics mirror the monitor's broker: one per TSN frame family plus a
//! notice topic flowing back toward the log. Each subscription owns a
//! bounded queue; a full queue blocks the publisher instead of dropping.
//! Delivery is FIFO per topic. Late subscribers see only later events.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, SyncSender};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use tsn_ids_core::{FrameKind, Notice, TsnFrame};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Topic {
    Frer,
    SrpTalker,
    SrpListener,
    Notice,
}

impl Topic {
    pub const ALL: [Topic; 4] = [
        Topic::Frer,
        Topic::SrpTalker,
        Topic::SrpListener,
        Topic::Notice,
    ];
    pub const FRAMES: [Topic; 3] = [Topic::Frer, Topic::SrpTalker, Topic::SrpListener];

    fn index(self) -> usize {
        self as usize
    }

    pub fn for_frame(frame: &TsnFrame) -> Topic {
        match frame.kind() {
            FrameKind::SrpTalker => Topic::SrpTalker,
            FrameKind::SrpListener => Topic::SrpListener,
            FrameKind::Frer | FrameKind::Other => Topic::Frer,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Frame(TsnFrame),
    Notice(Notice),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BusEvent {
    pub topic: Topic,
    /// Capture clock, seconds.
    pub timestamp: f64,
    pub payload: Payload,
}

impl BusEvent {
    pub fn frame(timestamp: f64, frame: TsnFrame) -> Self {
        BusEvent {
            topic: Topic::for_frame(&frame),
            timestamp,
            payload: Payload::Frame(frame),
        }
    }

    pub fn notice(notice: Notice) -> Self {
        BusEvent {
            topic: Topic::Notice,
            timestamp: notice.ts,
            payload: Payload::Notice(notice),
        }
    }

    pub fn is_well_formed(&self) -> bool {
        match &self.payload {
            Payload::Frame(f) => self.topic != Topic::Notice && Topic::for_frame(f) == self.topic,
            Payload::Notice(_) => self.topic == Topic::Notice,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BusError {
    #[error("bus closed")]
    BusClosed,
    #[error("payload does not belong on topic {0:?}")]
    TopicMismatch(Topic),
}

struct Inner {
    capacity: usize,
    closed: AtomicBool,
    topics: [Mutex<Vec<SyncSender<BusEvent>>>; 4],
}

#[derive(Clone)]
pub struct EventBus {
    inner: Arc<Inner>,
}

impl Default for EventBus {
    fn default() -> Self {
        Self::new(Self::DEFAULT_CAPACITY)
    }
}

impl EventBus {
    pub const DEFAULT_CAPACITY: usize = 1024;

    /// `capacity` is the queue depth of each subscription.
    pub fn new(capacity: usize) -> Self {
        EventBus {
            inner: Arc::new(Inner {
                capacity: capacity.max(1),
                closed: AtomicBool::new(false),
                topics: Default::default(),
            }),
        }
    }

    pub fn is_closed(&self) -> bool {
        self.inner.closed.load(Ordering::Acquire)
    }

    /// Delivers to every current subscriber of the event's topic, blocking
    /// while a subscriber's queue is full.
    pub fn publish(&self, event: BusEvent) -> Result<(), BusError> {
        if self.is_closed() {
            return Err(BusError::BusClosed);
        }
        if !event.is_well_formed() {
            return Err(BusError::TopicMismatch(event.topic));
        }
        // The topic lock is held across the sends so that concurrent
        // publishers cannot interleave differently for different subscribers.
        let mut subs = self.inner.topics[event.topic.index()]
            .lock()
            .expect("bus lock poisoned");
        let n = subs.len();
        if n == 0 {
            return Ok(());
        }
        let mut dead = Vec::new();
        for (i, tx) in subs.iter().enumerate().take(n - 1) {
            if tx.send(event.clone()).is_err() {
                dead.push(i);
            }
        }
        if subs[n - 1].send(event).is_err() {
            dead.push(n - 1);
        }
        for i in dead.into_iter().rev() {
            subs.remove(i);
        }
        Ok(())
    }

    pub fn subscribe(&self, topic: Topic) -> Result<Subscription, BusError> {
        self.subscribe_many(&[topic])
    }

    /// One queue fed by several topics; the handle observes them in the
    /// order they were published.
    pub fn subscribe_many(&self, topics: &[Topic]) -> Result<Subscription, BusError> {
        if self.is_closed() {
            return Err(BusError::BusClosed);
        }
        let (tx, rx) = mpsc::sync_channel(self.inner.capacity);
        for t in topics {
            self.inner.topics[t.index()]
                .lock()
                .expect("bus lock poisoned")
                .push(tx.clone());
        }
        Ok(Subscription { rx })
    }

    /// Stops accepting events. Subscribers drain what is queued, then end.
    pub fn close(&self) {
        self.inner.closed.store(true, Ordering::Release);
        for t in &self.inner.topics {
            t.lock().expect("bus lock poisoned").clear();
        }
    }
}

pub struct Subscription {
    rx: Receiver<BusEvent>,
}

impl Subscription {
    /// Blocks until the next event; `None` once the bus is closed and drained.
    pub fn recv(&self) -> Option<BusEvent> {
        self.rx.recv().ok()
    }

    pub fn try_recv(&self) -> Option<BusEvent> {
        self.rx.try_recv().ok()
    }

    pub fn recv_timeout(&self, timeout: Duration) -> Result<BusEvent, RecvTimeoutError> {
        self.rx.recv_timeout(timeout)
    }
}

impl Iterator for Subscription {
    type Item = BusEvent;
    fn next(&mut self) -> Option<BusEvent> {
        self.recv()
    }
}
