//! Offline TSN intrusion detection: replays SRP and FRER captures through
//! the detection engine of [`tsn_ids_core`], logs notices as JSON lines and
//! generates labelled attack captures.
//!
//! - [`bus`]: in-process publish/subscribe
//! - [`pcap`]: capture file reading and writing
//! - [`replay`]: paced replay of a capture onto the bus
//! - [`notice_log`]: JSON-lines notice log
//! - [`monitor`]: the replay, detection and logging pipeline
//! - [`scenario`]: seeded capture generator with ground truth
//! - [`verify`]: notice log versus ground truth
//! - [`cli`]: the `tsn-ids` command line

pub mod bus;
pub mod cli;
pub mod monitor;
pub mod notice_log;
pub mod pcap;
pub mod replay;
pub mod scenario;
pub mod verify;

pub use tsn_ids_core as core;
