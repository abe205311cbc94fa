//! Scenario scripts: what the generator should put into a capture.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use tsn_ids_core::recovery::seq_delta;
use tsn_ids_core::{
    DetectorConfig, MacAddr, RecoveryVariant, Rule, StreamId, TrafficSpecification,
};

use super::ScenarioError;

pub const DEFAULT_EPOCH_S: f64 = 1_700_000_000.0;
pub const ATTACKER_MAC: MacAddr = MacAddr([0x02, 0, 0, 0, 0, 0x66]);
pub const SRP_DST_MAC: MacAddr = MacAddr([0x01, 0x80, 0xc2, 0, 0, 0x0e]);
/// Per-hop forwarding latency.
pub const HOP_LATENCY_US: u64 = 10;

/// A bulky request: 8000 intervals/s, 64 frames of 1500 bytes each.
pub const BULKY_TSPEC: TrafficSpecification = TrafficSpecification {
    interval_numerator: 1,
    interval_denominator: 8000,
    max_frames_per_interval: 64,
    max_frame_size: 1500,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Topology {
    pub nodes: Vec<String>,
    pub links: Vec<[String; 2]>,
}

impl Default for Topology {
    /// Two end points attached to a ring of three bridges.
    fn default() -> Self {
        let s = |v: &str| v.to_string();
        Topology {
            nodes: ["EP1", "TSN1", "TSN2", "TSN3", "EP2"].map(s).to_vec(),
            links: [
                ["EP1", "TSN3"],
                ["TSN3", "TSN1"],
                ["TSN1", "TSN2"],
                ["TSN2", "TSN3"],
                ["TSN2", "EP2"],
            ]
            .map(|l| l.map(s))
            .to_vec(),
        }
    }
}

impl Topology {
    pub fn has_link(&self, a: &str, b: &str) -> bool {
        self.links
            .iter()
            .any(|[x, y]| (x == a && y == b) || (x == b && y == a))
    }

    /// Locally administered MAC derived from the node's position.
    pub fn mac_of(&self, node: &str) -> Option<MacAddr> {
        let i = self.nodes.iter().position(|n| n == node)?;
        Some(MacAddr([0x02, 0, 0, 0, 0x01, (i + 1) as u8]))
    }
}

fn default_talker() -> String {
    "EP1".into()
}
fn default_listener() -> String {
    "EP2".into()
}
fn default_paths() -> Vec<Vec<String>> {
    vec![
        ["EP1", "TSN3", "TSN1", "TSN2", "EP2"]
            .map(String::from)
            .to_vec(),
        ["EP1", "TSN3", "TSN2", "EP2"].map(String::from).to_vec(),
    ]
}
fn default_rate() -> u32 {
    100
}
fn default_payload() -> u16 {
    128
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamSpec {
    pub unique_id: u16,
    #[serde(default = "default_talker")]
    pub talker: String,
    #[serde(default = "default_listener")]
    pub listener: String,
    /// Member paths, talker first. Every path carries one copy of each frame.
    #[serde(default = "default_paths")]
    pub paths: Vec<Vec<String>>,
    /// Frames per second.
    #[serde(default = "default_rate")]
    pub frame_rate: u32,
    /// Bytes after the FRER header.
    #[serde(default = "default_payload")]
    pub payload_len: u16,
    #[serde(default)]
    pub initial_seq: u16,
}

impl StreamSpec {
    pub fn benign(unique_id: u16) -> Self {
        StreamSpec {
            unique_id,
            talker: default_talker(),
            listener: default_listener(),
            paths: default_paths(),
            frame_rate: default_rate(),
            payload_len: default_payload(),
            initial_seq: 0,
        }
    }

    /// One frame per interval of `1/frame_rate` s, sized for the payload.
    pub fn traffic_spec(&self) -> TrafficSpecification {
        TrafficSpecification {
            interval_numerator: 1,
            interval_denominator: self.frame_rate,
            max_frames_per_interval: 1,
            max_frame_size: (self.payload_len + 22).max(64),
        }
    }

    pub fn dst_mac(&self) -> MacAddr {
        let [hi, lo] = self.unique_id.to_be_bytes();
        MacAddr([0x91, 0xe0, 0xf0, 0x00, hi, lo])
    }
}

fn default_streams() -> Vec<StreamSpec> {
    (1..=6).map(StreamSpec::benign).collect()
}
fn default_epoch() -> f64 {
    DEFAULT_EPOCH_S
}
fn default_count() -> u32 {
    50
}
fn default_spacing() -> f64 {
    0.01
}
fn default_suppress() -> f64 {
    4.0
}
fn default_hub_link() -> [String; 2] {
    ["TSN3".into(), "TSN1".into()]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum AttackSpec {
    /// Oversized reservation from a new talker.
    A1 {
        start_s: f64,
        #[serde(default)]
        traffic_spec: Option<TrafficSpecification>,
    },
    /// Flood of oversized reservations.
    A2 {
        start_s: f64,
        #[serde(default = "default_count")]
        count: u32,
        #[serde(default = "default_spacing")]
        spacing_s: f64,
        #[serde(default)]
        traffic_spec: Option<TrafficSpecification>,
    },
    /// Re-advertises an accepted stream with a different traffic spec.
    A3 {
        start_s: f64,
        #[serde(default)]
        target: usize,
        #[serde(default)]
        traffic_spec: Option<TrafficSpecification>,
    },
    /// Reserves a stream that never carries data.
    A4 { start_s: f64 },
    /// Injects an out-of-range sequence number, later a duplicate ahead of
    /// the legitimate copies.
    A5 {
        start_s: f64,
        #[serde(default)]
        target: usize,
        #[serde(default)]
        injected_seq: Option<u16>,
        /// Sequence number the target is due to send at `start_s`.
        #[serde(default)]
        expected_seq: Option<u16>,
        #[serde(default)]
        duplicate_at_s: Option<f64>,
    },
    /// Reroutes one member path over the other. Affects the route
    /// configuration only.
    A6 {
        #[serde(default)]
        target: usize,
    },
    /// Suppresses the target's member streams, then takes over with forged
    /// frames.
    A7 {
        start_s: f64,
        #[serde(default)]
        target: usize,
        #[serde(default = "default_suppress")]
        suppress_s: f64,
        #[serde(default)]
        forged_seq: Option<u16>,
    },
}

impl AttackSpec {
    pub fn rule(&self) -> Rule {
        match self {
            AttackSpec::A1 { .. } => Rule::A1,
            AttackSpec::A2 { .. } => Rule::A2,
            AttackSpec::A3 { .. } => Rule::A3,
            AttackSpec::A4 { .. } => Rule::A4,
            AttackSpec::A5 { .. } => Rule::A5,
            AttackSpec::A6 { .. } => Rule::A6,
            AttackSpec::A7 { .. } => Rule::A7,
        }
    }

    pub fn start_s(&self) -> f64 {
        match self {
            AttackSpec::A1 { start_s, .. }
            | AttackSpec::A2 { start_s, .. }
            | AttackSpec::A3 { start_s, .. }
            | AttackSpec::A4 { start_s }
            | AttackSpec::A5 { start_s, .. }
            | AttackSpec::A7 { start_s, .. } => *start_s,
            AttackSpec::A6 { .. } => 0.0,
        }
    }

    fn target(&self) -> Option<usize> {
        match self {
            AttackSpec::A3 { target, .. }
            | AttackSpec::A5 { target, .. }
            | AttackSpec::A6 { target }
            | AttackSpec::A7 { target, .. } => Some(*target),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HubDelay {
    pub delay_ms: f64,
    /// Member paths crossing this link are delayed.
    #[serde(default = "default_hub_link")]
    pub link: [String; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioScript {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub seed: u64,
    pub duration_s: f64,
    /// Capture time of the scenario start.
    #[serde(default = "default_epoch")]
    pub epoch_s: f64,
    #[serde(default)]
    pub topology: Topology,
    #[serde(default = "default_streams")]
    pub streams: Vec<StreamSpec>,
    #[serde(default)]
    pub attack: Option<AttackSpec>,
    #[serde(default)]
    pub hub_delay: Option<HubDelay>,
    /// Detector settings the ground truth is computed for.
    #[serde(default)]
    pub detector: DetectorConfig,
}

impl ScenarioScript {
    pub fn benign(seed: u64, duration_s: f64) -> Self {
        ScenarioScript {
            name: Some("benign".into()),
            seed,
            duration_s,
            epoch_s: DEFAULT_EPOCH_S,
            topology: Topology::default(),
            streams: default_streams(),
            attack: None,
            hub_delay: None,
            detector: DetectorConfig::default(),
        }
    }

    /// Default scenario for one attack.
    pub fn attack(rule: Rule, seed: u64) -> Self {
        let (duration_s, attack) = match rule {
            Rule::A1 => (
                5.0,
                AttackSpec::A1 {
                    start_s: 2.0,
                    traffic_spec: None,
                },
            ),
            Rule::A2 => (
                5.0,
                AttackSpec::A2 {
                    start_s: 2.0,
                    count: 50,
                    spacing_s: 0.01,
                    traffic_spec: None,
                },
            ),
            Rule::A3 => (
                5.0,
                AttackSpec::A3 {
                    start_s: 2.0,
                    target: 0,
                    traffic_spec: None,
                },
            ),
            Rule::A4 => (35.0, AttackSpec::A4 { start_s: 2.0 }),
            Rule::A5 => (
                6.0,
                AttackSpec::A5 {
                    start_s: 2.0,
                    target: 0,
                    injected_seq: None,
                    expected_seq: None,
                    duplicate_at_s: None,
                },
            ),
            Rule::A6 => (3.0, AttackSpec::A6 { target: 0 }),
            Rule::A7 => (
                8.0,
                AttackSpec::A7 {
                    start_s: 2.0,
                    target: 0,
                    suppress_s: 4.0,
                    forged_seq: None,
                },
            ),
        };
        ScenarioScript {
            name: Some(rule.as_str().to_ascii_lowercase()),
            attack: Some(attack),
            ..ScenarioScript::benign(seed, duration_s)
        }
    }

    /// Benign traffic where member paths through the hub link are delayed,
    /// checked with the match recovery function.
    pub fn hub_delay(delay_ms: f64, seed: u64) -> Self {
        let mut s = ScenarioScript::benign(seed, 10.0);
        s.name = Some("hub-delay".into());
        s.hub_delay = Some(HubDelay {
            delay_ms,
            link: default_hub_link(),
        });
        s.detector.recovery_variant = RecoveryVariant::Match;
        s
    }

    pub fn stream_id(&self, index: usize) -> StreamId {
        let s = &self.streams[index];
        StreamId::new(
            self.topology.mac_of(&s.talker).unwrap_or_default(),
            s.unique_id,
        )
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: String| Err(ScenarioError::InvalidScript(m));
        let cfg = &self.detector;
        if let Err(e) = cfg.validate() {
            return bad(format!("detector: {e}"));
        }
        if !(self.duration_s.is_finite() && self.duration_s > 0.0 && self.duration_s <= 3600.0) {
            return bad(format!(
                "duration_s must be in (0, 3600], got {}",
                self.duration_s
            ));
        }
        if !(self.epoch_s.is_finite() && self.epoch_s >= 0.0 && self.epoch_s < 4.0e9) {
            return bad(format!("epoch_s out of range: {}", self.epoch_s));
        }
        let nodes: BTreeSet<&str> = self.topology.nodes.iter().map(String::as_str).collect();
        if nodes.len() != self.topology.nodes.len() || nodes.len() > 250 {
            return bad("topology nodes must be unique (at most 250)".into());
        }
        for [a, b] in &self.topology.links {
            if !nodes.contains(a.as_str()) || !nodes.contains(b.as_str()) || a == b {
                return bad(format!("link {a}-{b} is not between two known nodes"));
            }
        }
        let mut uids = BTreeSet::new();
        for (i, s) in self.streams.iter().enumerate() {
            if !uids.insert(s.unique_id) {
                return bad(format!("stream {i}: duplicate unique_id {}", s.unique_id));
            }
            if !(1..=10_000).contains(&s.frame_rate) {
                return bad(format!("stream {i}: frame_rate must be in 1..=10000"));
            }
            if usize::from(s.payload_len) + 8 > 1500 {
                return bad(format!("stream {i}: payload_len too large"));
            }
            if s.paths.is_empty() || s.paths.len() > 8 {
                return bad(format!("stream {i}: needs 1 to 8 member paths"));
            }
            for (p, path) in s.paths.iter().enumerate() {
                if path.len() < 2 || path[0] != s.talker || path[path.len() - 1] != s.listener {
                    return bad(format!(
                        "stream {i} path {p}: must run from {} to {}",
                        s.talker, s.listener
                    ));
                }
                if let Some(w) = path
                    .windows(2)
                    .find(|w| !self.topology.has_link(&w[0], &w[1]))
                {
                    return bad(format!("stream {i} path {p}: no link {}-{}", w[0], w[1]));
                }
            }
        }
        if let Some(h) = &self.hub_delay {
            if !(h.delay_ms.is_finite() && h.delay_ms > 0.0 && h.delay_ms < 1000.0) {
                return bad(format!(
                    "hub delay must be in (0, 1000) ms, got {}",
                    h.delay_ms
                ));
            }
            if !self.topology.has_link(&h.link[0], &h.link[1]) {
                return bad(format!(
                    "hub link {}-{} is not in the topology",
                    h.link[0], h.link[1]
                ));
            }
        }
        if let Some(a) = &self.attack {
            if self.hub_delay.is_some() {
                return bad("hub_delay cannot be combined with an attack".into());
            }
            self.validate_attack(a)?;
        }
        Ok(())
    }

    fn validate_attack(&self, a: &AttackSpec) -> Result<(), ScenarioError> {
        let bad = |m: String| Err(ScenarioError::InvalidScript(m));
        let cfg = &self.detector;
        let start = a.start_s();
        if !(start.is_finite() && start >= 0.0 && start < self.duration_s) {
            return bad(format!(
                "attack start_s {start} must lie within the capture"
            ));
        }
        if let Some(t) = a.target() {
            if t >= self.streams.len() {
                return bad(format!("attack target {t} does not exist"));
            }
        }
        let bulky_ok = |ts: &Option<TrafficSpecification>| -> Result<(), ScenarioError> {
            let ts = ts.unwrap_or(BULKY_TSPEC);
            if ts.validate().is_err() {
                return bad("attack traffic_spec is invalid".into());
            }
            if ts.bandwidth_bps() <= cfg.max_bandwidth_bps as f64
                && ts.frame_rate() <= cfg.max_frame_rate
            {
                return bad("attack traffic_spec stays within the detector limits".into());
            }
            let n = self.streams.len().min(cfg.rolling_window as usize);
            if (n as u32) < cfg.min_samples {
                return bad(format!(
                    "need at least {} benign streams before a deviation is detectable",
                    cfg.min_samples
                ));
            }
            let mean_bw = self.streams[self.streams.len() - n..]
                .iter()
                .map(|s| s.traffic_spec().bandwidth_bps())
                .sum::<f64>()
                / n as f64;
            if ts.bandwidth_bps() <= cfg.deviation_factor_k * mean_bw {
                return bad("attack traffic_spec does not deviate from the benign average".into());
            }
            Ok(())
        };
        let first_data = 0.1 + 0.0007 * self.streams.len() as f64;
        match a {
            AttackSpec::A1 { traffic_spec, .. } | AttackSpec::A3 { traffic_spec, .. } => {
                bulky_ok(traffic_spec)?
            }
            AttackSpec::A2 {
                count,
                spacing_s,
                traffic_spec,
                ..
            } => {
                bulky_ok(traffic_spec)?;
                let rl = cfg.request_rate_limit;
                if !(spacing_s.is_finite() && *spacing_s > 0.0) {
                    return bad("spacing_s must be positive".into());
                }
                if *count <= rl.count || (rl.count as f64) * spacing_s >= rl.window_s {
                    return bad(format!(
                        "flood must exceed {} requests per {} s",
                        rl.count, rl.window_s
                    ));
                }
                if start + f64::from(*count) * spacing_s >= self.duration_s {
                    return bad("flood does not fit into the capture".into());
                }
            }
            AttackSpec::A4 { .. } => {
                let need = start + cfg.dangling_timeout_s + 2.0 * cfg.sweep_period_s;
                if self.duration_s < need {
                    return bad(format!(
                        "duration_s must be at least {need} for the dangling timeout to elapse"
                    ));
                }
            }
            AttackSpec::A5 {
                target,
                injected_seq,
                expected_seq,
                duplicate_at_s,
                ..
            } => {
                if start < first_data + 0.05 {
                    return bad(format!(
                        "A5 start_s must be after the streams start sending ({first_data} s)"
                    ));
                }
                if let (Some(inj), Some(exp)) = (injected_seq, expected_seq) {
                    let highest = exp.wrapping_sub(1);
                    if !is_out_of_order(cfg, *inj, highest) {
                        return bad(format!(
                            "injected sequence {inj} would be accepted by the {:?} recovery function (expected {exp})",
                            cfg.recovery_variant
                        ));
                    }
                }
                let dup = duplicate_at_s.unwrap_or(start + 1.5);
                if dup < start + cfg.dedup_window_s + 0.1 || dup >= self.duration_s - 0.05 {
                    return bad("duplicate_at_s must be at least one dedup window after start_s and inside the capture".into());
                }
                if self.streams[*target].paths.len() >= 255 {
                    return bad("too many member paths".into());
                }
            }
            AttackSpec::A6 { target } => {
                if self.streams[*target].paths.len() < 2 {
                    return bad("A6 target needs at least two member paths".into());
                }
            }
            AttackSpec::A7 {
                suppress_s, target, ..
            } => {
                if start < first_data + 0.05 {
                    return bad(format!(
                        "A7 start_s must be after the streams start sending ({first_data} s)"
                    ));
                }
                if *suppress_s <= cfg.recovery_timeout_s + cfg.sweep_period_s {
                    return bad(format!(
                        "suppress_s must exceed recovery_timeout_s + sweep_period_s ({}) to trigger a timeout",
                        cfg.recovery_timeout_s + cfg.sweep_period_s
                    ));
                }
                if start + suppress_s + 0.05 >= self.duration_s {
                    return bad("forged frames would start after the capture ends".into());
                }
                let _ = target;
            }
        }
        Ok(())
    }
}

/// Whether the detector flags `seq` with N6 when `highest` was accepted last.
pub fn is_out_of_order(cfg: &DetectorConfig, seq: u16, highest: u16) -> bool {
    let d = seq_delta(seq, highest);
    match cfg.recovery_variant {
        RecoveryVariant::Match => d < 0,
        RecoveryVariant::Vector => {
            d > i32::from(cfg.vector_future_max) || d <= -i32::from(cfg.vector_history)
        }
    }
}

/// Interior links shared by two paths, excluding links touching an end point.
pub fn shared_interior_links(a: &[String], b: &[String]) -> BTreeSet<(String, String)> {
    let ends: BTreeSet<&String> = [a.first(), a.last(), b.first(), b.last()]
        .into_iter()
        .flatten()
        .collect();
    let links = |p: &[String]| -> BTreeMap<(String, String), ()> {
        p.windows(2)
            .filter(|w| !ends.contains(&w[0]) && !ends.contains(&w[1]))
            .map(|w| {
                let (x, y) = if w[0] <= w[1] {
                    (&w[0], &w[1])
                } else {
                    (&w[1], &w[0])
                };
                ((x.clone(), y.clone()), ())
            })
            .collect()
    };
    let la = links(a);
    links(b)
        .into_keys()
        .filter(|k| la.contains_key(k))
        .collect()
}
