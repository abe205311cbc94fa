//! Seeded generation of benign and attack captures with ground truth.

use std::io;
use std::path::Path;

mod generate;
mod script;
mod truth;

pub use generate::{generate, write_corpus, Corpus, CorpusFiles};
pub use script::{
    is_out_of_order, shared_interior_links, AttackSpec, HubDelay, ScenarioScript, StreamSpec,
    Topology, ATTACKER_MAC, BULKY_TSPEC, DEFAULT_EPOCH_S, HOP_LATENCY_US, SRP_DST_MAC,
};
pub use truth::{Expectation, Truth};

use crate::pcap::PcapError;

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("invalid script: {0}")]
    InvalidScript(String),
    #[error("malformed script: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Pcap(#[from] PcapError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub fn load_script(path: impl AsRef<Path>) -> Result<ScenarioScript, ScenarioError> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn load_truth(path: impl AsRef<Path>) -> Result<Truth, ScenarioError> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}
