//! Turns a [`ScenarioScript`] into a capture plus ground truth.
//!
//! Time is kept in integer microseconds from the scenario start so that
//! the capture is bit-identical for a given script and seed.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tsn_ids_core::routes::{RouteConfig, StreamRoutes};
use tsn_ids_core::wire::{encode_rtag, encode_srp};
use tsn_ids_core::{
    MacAddr, NoticeCode, RTagFrame, SrpListenerResponse, SrpMessage, SrpTalkerAdvertise, StreamId,
    TalkerStatus, TrafficSpecification, UserToNetworkRequirements,
};

use super::script::{
    is_out_of_order, shared_interior_links, AttackSpec, ScenarioScript, ATTACKER_MAC, BULKY_TSPEC,
    HOP_LATENCY_US, SRP_DST_MAC,
};
use super::truth::{Expectation, Truth};
use super::ScenarioError;
use crate::pcap::{micros_to_secs, write_pcap, TimestampedFrame};
use tsn_ids_core::recovery::seq_delta;

/// Notices are matched within this much of the triggering frame.
const TOLERANCE_S: f64 = 0.001;
const ENCAPSULATED: u16 = 0x0800;

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub frames: Vec<TimestampedFrame>,
    pub truth: Truth,
}

#[derive(Debug, Clone, Copy)]
enum Tag {
    Control,
    Data { stream: usize, seq: u16 },
}

struct Event {
    t_us: u64,
    order: u64,
    tag: Tag,
    data: Vec<u8>,
}

#[derive(Default)]
struct Timeline {
    events: Vec<Event>,
}

impl Timeline {
    fn push(&mut self, t_us: u64, tag: Tag, data: Vec<u8>) {
        let order = self.events.len() as u64;
        self.events.push(Event {
            t_us,
            order,
            tag,
            data,
        });
    }
}

struct StreamPlan {
    id: StreamId,
    talker_mac: MacAddr,
    listener_mac: MacAddr,
    handle: StreamId,
    adv_us: u64,
    data_start_us: u64,
    rate: u64,
    initial_seq: u16,
    latency_us: Vec<u64>,
}

impl StreamPlan {
    fn send_us(&self, k: u64) -> u64 {
        self.data_start_us + k * 1_000_000 / self.rate
    }

    fn half_interval_us(&self) -> u64 {
        500_000 / self.rate
    }

    /// First frame index whose send time minus half an interval is at or
    /// after `t_us`.
    fn index_after(&self, t_us: u64) -> u64 {
        let mut k = 1;
        while self.send_us(k) < t_us + self.half_interval_us() {
            k += 1;
        }
        k
    }

    fn seq(&self, k: u64) -> u16 {
        self.initial_seq.wrapping_add(k as u16)
    }
}

fn us(s: f64) -> u64 {
    (s * 1e6).round() as u64
}

fn bytes(frame: Result<tsn_ids_core::EtherFrame, tsn_ids_core::WireError>) -> Vec<u8> {
    frame.expect("generator builds valid frames").to_bytes()
}

fn talker_frame(
    src: MacAddr,
    id: StreamId,
    ts: TrafficSpecification,
    trees: u8,
    dst: MacAddr,
) -> Vec<u8> {
    let adv = SrpTalkerAdvertise {
        stream_id: id,
        traffic_spec: ts,
        requirements: UserToNetworkRequirements {
            num_seamless_trees: trees,
            max_latency_us: 2000,
        },
        dst_mac_of_stream: dst,
    };
    bytes(encode_srp(&SrpMessage::Talker(adv), src, SRP_DST_MAC))
}

fn listener_frame(src: MacAddr, id: StreamId) -> Vec<u8> {
    let resp = SrpListenerResponse {
        stream_id: id,
        talker_status: TalkerStatus::Ready,
    };
    bytes(encode_srp(&SrpMessage::Listener(resp), src, SRP_DST_MAC))
}

fn data_frame(src: MacAddr, handle: StreamId, seq: u16, payload: Vec<u8>) -> Vec<u8> {
    bytes(encode_rtag(&RTagFrame {
        src_mac: src,
        stream_handle: handle,
        reserved: 0,
        sequence_number: seq,
        encapsulated_ethertype: ENCAPSULATED,
        payload,
    }))
}

fn attacker_dst(uid: u16) -> MacAddr {
    let [hi, lo] = uid.to_be_bytes();
    MacAddr([0x91, 0xe0, 0xf0, 0x66, hi, lo])
}

struct Builder<'a> {
    script: &'a ScenarioScript,
    epoch_us: u64,
    expectations: Vec<Expectation>,
}

impl Builder<'_> {
    fn abs(&self, t_us: u64) -> f64 {
        micros_to_secs(self.epoch_us + t_us)
    }

    fn expect(
        &mut self,
        code: NoticeCode,
        stream: Option<StreamId>,
        from_us: u64,
        to_s_extra: f64,
        label: &str,
    ) -> &mut Expectation {
        let from_s = self.abs(from_us);
        self.expectations.push(Expectation {
            note: code.note().into(),
            stream_id: stream.map(|s| s.to_string()),
            from_s,
            to_s: from_s + to_s_extra,
            evidence: BTreeMap::new(),
            min_count: 1,
            known_benign: false,
            label: label.into(),
        });
        self.expectations.last_mut().expect("just pushed")
    }
}

pub fn generate(script: &ScenarioScript) -> Result<Corpus, ScenarioError> {
    script.validate()?;
    let cfg = &script.detector;
    let mut rng = ChaCha8Rng::seed_from_u64(script.seed);
    let duration_us = us(script.duration_s);
    let mut b = Builder {
        script,
        epoch_us: us(script.epoch_s),
        expectations: Vec::new(),
    };
    let mut tl = Timeline::default();

    let hub_delay_us = script.hub_delay.as_ref().map(|h| us(h.delay_ms / 1e3));
    let mut plans: Vec<StreamPlan> = script
        .streams
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let talker_mac = script.topology.mac_of(&s.talker).expect("validated");
            StreamPlan {
                id: StreamId::new(talker_mac, s.unique_id),
                talker_mac,
                listener_mac: script.topology.mac_of(&s.listener).expect("validated"),
                handle: StreamId::new(s.dst_mac(), s.unique_id),
                adv_us: 1000 * i as u64,
                data_start_us: 100_000 + 700 * i as u64,
                rate: u64::from(s.frame_rate),
                initial_seq: s.initial_seq,
                latency_us: s
                    .paths
                    .iter()
                    .map(|p| {
                        let hub = script.hub_delay.as_ref().filter(|h| {
                            p.windows(2).any(|w| {
                                (w[0] == h.link[0] && w[1] == h.link[1])
                                    || (w[0] == h.link[1] && w[1] == h.link[0])
                            })
                        });
                        (p.len() as u64 - 1) * HOP_LATENCY_US + hub.and(hub_delay_us).unwrap_or(0)
                    })
                    .collect(),
            }
        })
        .collect();

    // Attack bookkeeping that shapes the benign traffic.
    let mut suppress_from: Option<(usize, u64)> = None;
    let mut routes = RouteConfig {
        streams: script
            .streams
            .iter()
            .zip(&plans)
            .map(|(s, p)| StreamRoutes {
                stream_id: p.id,
                paths: s.paths.clone(),
            })
            .collect(),
    };

    match script.attack.clone() {
        None => {}
        Some(AttackSpec::A1 {
            start_s,
            traffic_spec,
        }) => {
            let t = us(start_s);
            let id = StreamId::new(ATTACKER_MAC, 0x00A1);
            tl.push(
                t,
                Tag::Control,
                talker_frame(
                    ATTACKER_MAC,
                    id,
                    traffic_spec.unwrap_or(BULKY_TSPEC),
                    1,
                    attacker_dst(0xA1),
                ),
            );
            b.expect(
                NoticeCode::N1ExcessiveResourceRequest,
                Some(id),
                t,
                TOLERANCE_S,
                "oversized request",
            );
            b.expect(
                NoticeCode::N2DeviatingResourceRequest,
                Some(id),
                t,
                TOLERANCE_S,
                "deviating request",
            );
        }
        Some(AttackSpec::A2 {
            start_s,
            count,
            spacing_s,
            traffic_spec,
        }) => {
            let t0 = us(start_s);
            let step = us(spacing_s);
            for j in 0..count {
                let uid = 0x0200u16.wrapping_add(j as u16);
                let id = StreamId::new(ATTACKER_MAC, uid);
                let frame = talker_frame(
                    ATTACKER_MAC,
                    id,
                    traffic_spec.unwrap_or(BULKY_TSPEC),
                    1,
                    attacker_dst(uid),
                );
                tl.push(t0 + u64::from(j) * step, Tag::Control, frame);
            }
            let span = (f64::from(count) * spacing_s) + TOLERANCE_S;
            b.expect(
                NoticeCode::N3TooManyRequests,
                None,
                t0,
                span,
                "request flood",
            );
            b.expect(
                NoticeCode::N1ExcessiveResourceRequest,
                None,
                t0,
                span,
                "oversized flood requests",
            );
            b.expect(
                NoticeCode::N2DeviatingResourceRequest,
                None,
                t0,
                span,
                "deviating flood requests",
            );
        }
        Some(AttackSpec::A3 {
            start_s,
            target,
            traffic_spec,
        }) => {
            let t = us(start_s);
            let p = &plans[target];
            let frame = talker_frame(
                ATTACKER_MAC,
                p.id,
                traffic_spec.unwrap_or(BULKY_TSPEC),
                1,
                p.handle.mac_address,
            );
            let id = p.id;
            tl.push(t, Tag::Control, frame);
            b.expect(
                NoticeCode::N4ChangingExistingAllocation,
                Some(id),
                t,
                TOLERANCE_S,
                "change of accepted stream",
            );
            b.expect(
                NoticeCode::N1ExcessiveResourceRequest,
                Some(id),
                t,
                TOLERANCE_S,
                "oversized change",
            );
            b.expect(
                NoticeCode::N2DeviatingResourceRequest,
                Some(id),
                t,
                TOLERANCE_S,
                "deviating change",
            );
        }
        Some(AttackSpec::A4 { start_s }) => {
            let t = us(start_s);
            let id = StreamId::new(ATTACKER_MAC, 0x00A4);
            let ts = script
                .streams
                .first()
                .map_or(BULKY_TSPEC, |s| s.traffic_spec());
            tl.push(
                t,
                Tag::Control,
                talker_frame(ATTACKER_MAC, id, ts, 1, attacker_dst(0xA4)),
            );
            let listener = plans.first().map_or(ATTACKER_MAC, |p| p.listener_mac);
            tl.push(t + 500, Tag::Control, listener_frame(listener, id));
            let due = t + 500 + us(cfg.dangling_timeout_s);
            b.expect(
                NoticeCode::N5DanglingResources,
                Some(id),
                due,
                cfg.sweep_period_s + TOLERANCE_S,
                "idle reservation",
            );
        }
        Some(AttackSpec::A5 {
            start_s,
            target,
            injected_seq,
            expected_seq,
            duplicate_at_s,
        }) => {
            let k_inj = plans[target].index_after(us(start_s));
            if let Some(exp) = expected_seq {
                plans[target].initial_seq = exp.wrapping_sub(k_inj as u16);
            }
            let p = &plans[target];
            let expected = p.seq(k_inj);
            let highest = expected.wrapping_sub(1);
            let injected =
                injected_seq.unwrap_or_else(|| highest.wrapping_sub(rng.random_range(3000..30000)));
            if !is_out_of_order(cfg, injected, highest) {
                return Err(ScenarioError::InvalidScript(format!(
                    "injected sequence {injected} would be accepted by the {:?} recovery function (expected {expected})",
                    cfg.recovery_variant
                )));
            }
            let t_inj = p.send_us(k_inj) - p.half_interval_us();
            let payload_len = usize::from(script.streams[target].payload_len);
            let mut payload = vec![0u8; payload_len];
            rng.fill_bytes(&mut payload);
            let (id, handle) = (p.id, p.handle);
            tl.push(
                t_inj,
                Tag::Control,
                data_frame(ATTACKER_MAC, handle, injected, payload.clone()),
            );

            let k_dup = p.index_after(us(duplicate_at_s.unwrap_or(start_s + 1.5)));
            let dup_seq = p.seq(k_dup);
            let t_dup = p.send_us(k_dup) - p.half_interval_us();
            let t_legit = p.send_us(k_dup);
            tl.push(
                t_dup,
                Tag::Control,
                data_frame(ATTACKER_MAC, handle, dup_seq, payload),
            );

            b.expect(
                NoticeCode::N6OutOfOrderFrames,
                Some(id),
                t_inj,
                TOLERANCE_S,
                "injected sequence number",
            )
            .evidence
            .extend([
                ("observed".into(), injected.to_string()),
                ("expected".into(), expected.to_string()),
            ]);
            let span = TOLERANCE_S + (t_legit - t_dup) as f64 / 1e6;
            b.expect(
                NoticeCode::N7ExcessiveMemberStreams,
                Some(id),
                t_dup,
                span,
                "surplus copy",
            )
            .evidence
            .extend([
                ("kind".into(), "copies".into()),
                ("sequence".into(), dup_seq.to_string()),
            ]);
            b.expect(
                NoticeCode::N6OutOfOrderFrames,
                Some(id),
                t_dup,
                span,
                "surplus copy",
            )
            .evidence
            .extend([
                ("observed".into(), dup_seq.to_string()),
                ("decision".into(), "duplicate".into()),
            ]);
        }
        Some(AttackSpec::A6 { target }) => {
            let paths = &mut routes.streams[target].paths;
            paths[1] = paths[0].clone();
            let mut shared = std::collections::BTreeSet::new();
            for a in 0..paths.len() {
                for c in a + 1..paths.len() {
                    shared.extend(shared_interior_links(&paths[a], &paths[c]));
                }
            }
            let id = plans[target].id;
            for (x, y) in shared {
                b.expect(
                    NoticeCode::N7ExcessiveMemberStreams,
                    Some(id),
                    0,
                    TOLERANCE_S,
                    "intersecting member paths",
                )
                .evidence
                .extend([
                    ("kind".into(), "route".into()),
                    ("link".into(), format!("{x}-{y}")),
                ]);
            }
        }
        Some(AttackSpec::A7 {
            start_s,
            target,
            suppress_s,
            forged_seq,
        }) => {
            let p = &plans[target];
            let mut k_stop = 0;
            while p.send_us(k_stop) < us(start_s) {
                k_stop += 1;
            }
            let revoked = p.seq(k_stop - 1);
            let last_arrival =
                p.send_us(k_stop - 1) + p.latency_us.iter().copied().max().unwrap_or(0);
            let forged =
                forged_seq.unwrap_or_else(|| revoked.wrapping_add(rng.random_range(1000..30000)));
            if forged == revoked.wrapping_add(1) {
                return Err(ScenarioError::InvalidScript(format!(
                    "forged_seq {forged} continues the legitimate sequence and would not be detected"
                )));
            }
            let resume = us(start_s + suppress_s);
            let interval = 1_000_000 / p.rate;
            let payload_len = usize::from(script.streams[target].payload_len);
            let (id, handle) = (p.id, p.handle);
            let mut j = 0u64;
            while resume + j * interval < duration_us {
                let mut payload = vec![0u8; payload_len];
                rng.fill_bytes(&mut payload);
                let seq = forged.wrapping_add(j as u16);
                tl.push(
                    resume + j * interval + HOP_LATENCY_US,
                    Tag::Control,
                    data_frame(ATTACKER_MAC, handle, seq, payload),
                );
                j += 1;
            }
            suppress_from = Some((target, k_stop));
            let silent_due = last_arrival + us(cfg.recovery_timeout_s);
            b.expect(
                NoticeCode::N8TerminatedMemberStreams,
                Some(id),
                silent_due,
                cfg.sweep_period_s + TOLERANCE_S,
                "silenced member streams",
            );
            b.expect(
                NoticeCode::N7ExcessiveMemberStreams,
                Some(id),
                resume,
                TOLERANCE_S,
                "forged takeover",
            )
            .evidence
            .extend([
                ("kind".into(), "rebase".into()),
                ("observed".into(), forged.to_string()),
                ("revoked".into(), revoked.to_string()),
            ]);
        }
    }

    // Reservations and member streams.
    for (i, (s, p)) in script.streams.iter().zip(&plans).enumerate() {
        let trees = s.paths.len() as u8;
        tl.push(
            p.adv_us,
            Tag::Control,
            talker_frame(
                p.talker_mac,
                p.id,
                s.traffic_spec(),
                trees,
                p.handle.mac_address,
            ),
        );
        tl.push(
            p.adv_us + 500,
            Tag::Control,
            listener_frame(p.listener_mac, p.id),
        );
        let mut k = 0u64;
        loop {
            let t = p.send_us(k);
            if t >= duration_us || suppress_from.is_some_and(|(st, ks)| st == i && k >= ks) {
                break;
            }
            let mut payload = vec![0u8; usize::from(s.payload_len)];
            rng.fill_bytes(&mut payload);
            let seq = p.seq(k);
            let frame = data_frame(p.talker_mac, p.handle, seq, payload);
            for lat in &p.latency_us {
                tl.push(t + lat, Tag::Data { stream: i, seq }, frame.clone());
            }
            k += 1;
        }
    }

    tl.events.sort_by_key(|e| (e.t_us, e.order));

    if script.hub_delay.is_some() {
        hub_expectations(&mut b, &tl, &plans);
    }

    let frames: Vec<TimestampedFrame> = tl
        .events
        .into_iter()
        .map(|e| TimestampedFrame::from_micros(b.epoch_us + e.t_us, e.data))
        .collect();
    let truth = Truth {
        scenario: script.name.clone().unwrap_or_else(|| "scenario".into()),
        seed: script.seed,
        epoch_s: b.abs(0),
        duration_s: script.duration_s,
        frames: frames.len() as u64,
        detector_config: cfg.clone(),
        routes,
        expectations: b.expectations,
    };
    Ok(Corpus { frames, truth })
}

/// Late copies that arrive behind the recovery window are reported as out
/// of order although nobody tampered with them.
fn hub_expectations(b: &mut Builder<'_>, tl: &Timeline, plans: &[StreamPlan]) {
    let cfg = &b.script.detector;
    let mut highest: Vec<Option<u16>> = vec![None; plans.len()];
    let mut crossings: Vec<Option<(u64, u64, u32)>> = vec![None; plans.len()];
    for e in &tl.events {
        let Tag::Data { stream, seq } = e.tag else {
            continue;
        };
        match highest[stream] {
            None => highest[stream] = Some(seq),
            Some(h) if is_out_of_order(cfg, seq, h) => {
                let c = crossings[stream].get_or_insert((e.t_us, e.t_us, 0));
                c.1 = e.t_us;
                c.2 += 1;
            }
            Some(h) if seq_delta(seq, h) > 0 => highest[stream] = Some(seq),
            Some(_) => {}
        }
    }
    for (p, c) in plans.iter().zip(crossings) {
        if let Some((first, last, _)) = c {
            let span = (last - first) as f64 / 1e6 + TOLERANCE_S;
            let e = b.expect(
                NoticeCode::N6OutOfOrderFrames,
                Some(p.id),
                first,
                span,
                "member path delayed by hub",
            );
            e.known_benign = true;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusFiles {
    pub pcap: PathBuf,
    pub truth: PathBuf,
    pub routes: PathBuf,
}

/// Writes `<stem>.pcap`, `<stem>.truth.json` and `<stem>.routes.json`.
pub fn write_corpus(corpus: &Corpus, dir: &Path, stem: &str) -> Result<CorpusFiles, ScenarioError> {
    fs::create_dir_all(dir)?;
    let files = CorpusFiles {
        pcap: dir.join(format!("{stem}.pcap")),
        truth: dir.join(format!("{stem}.truth.json")),
        routes: dir.join(format!("{stem}.routes.json")),
    };
    write_pcap(&files.pcap, &corpus.frames)?;
    fs::write(
        &files.truth,
        serde_json::to_string_pretty(&corpus.truth)? + "\n",
    )?;
    fs::write(
        &files.routes,
        serde_json::to_string_pretty(&corpus.truth.routes)? + "\n",
    )?;
    Ok(files)
}
