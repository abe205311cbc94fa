//! Detection core for IEEE 802.1 TSN traffic.
//!
//! Everything in this crate is pure computation over byte buffers and
//! in-memory state, so it builds without `std` (only `alloc` is needed).
//! IO, threading, capture files and the command line live in the
//! companion `tsn-ids` crate.
//!
//! - [`wire`]: SRP and FRER (R-TAG) frame codec
//! - [`recovery`]: match / vector sequence recovery
//! - [`ledger`]: stream reservation ledger
//! - [`stats`]: rolling averages and the request rate window
//! - [`engine`]: detection rules producing [`notice::Notice`]s
//! - [`routes`]: FRER member path intersection checks

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod config;
pub mod dedup;
pub mod engine;
pub mod ledger;
pub mod notice;
pub mod recovery;
pub mod routes;
pub mod stats;
pub mod wire;

pub use config::{ConfigError, DetectorConfig, RecoveryVariant};
pub use engine::{DetectionEngine, Diagnostics};
pub use notice::{Evidence, Notice, NoticeCode, Rule};
pub use recovery::{AcceptDecision, RecoveryOutcome, RecoveryState, TimeoutEvent};
pub use wire::{
    classify, classify_bytes, dissect, EtherFrame, FrameKind, MacAddr, RTagFrame,
    SrpListenerResponse, SrpMessage, SrpTalkerAdvertise, StreamId, TalkerStatus,
    TrafficSpecification, TsnFrame, UserToNetworkRequirements, WireError,
};
