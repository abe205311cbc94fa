//! Feeds captured frames onto the bus, optionally paced by capture time.

use std::time::{Duration, Instant};

use tsn_ids_core::{classify_bytes, dissect, EtherFrame, FrameKind};

use crate::bus::{BusError, BusEvent, EventBus};
use crate::pcap::TimestampedFrame;

#[derive(Debug, thiserror::Error)]
pub enum ReplayError {
    #[error("speed factor must be finite and >= 0, got {0}")]
    BadSpeed(f64),
    #[error(transparent)]
    Bus(#[from] BusError),
}

/// Latency from taking a frame off the input to handing it to the bus,
/// microseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, serde::Serialize)]
pub struct LagStats {
    pub samples: u64,
    pub median_us: f64,
    pub p99_us: f64,
    pub max_us: f64,
}

impl LagStats {
    fn from_nanos(mut v: Vec<u64>) -> Self {
        if v.is_empty() {
            return LagStats::default();
        }
        let n = v.len();
        let pick = |v: &mut Vec<u64>, q: f64| {
            let i = ((n as f64 - 1.0) * q).round() as usize;
            *v.select_nth_unstable(i).1 as f64 / 1e3
        };
        let median_us = pick(&mut v, 0.5);
        let p99_us = pick(&mut v, 0.99);
        let max_us = *v.iter().max().expect("non-empty") as f64 / 1e3;
        LagStats {
            samples: n as u64,
            median_us,
            p99_us,
            max_us,
        }
    }
}

/// `frames_in == frames_published + other_count + parse_errors`.
#[derive(Debug, Clone, Default, PartialEq, serde::Serialize)]
pub struct ReplayReport {
    pub frames_in: u64,
    pub frames_published: u64,
    /// Frames that are not SRP or FRER, including runts and non Ethernet II framing.
    pub other_count: u64,
    pub parse_errors: u64,
    /// Frames whose timestamp went backwards; replayed at the previous time.
    pub clock_regressions: u64,
    pub first_ts: Option<f64>,
    pub last_ts: Option<f64>,
    pub wall_s: f64,
    pub lag: LagStats,
}

impl ReplayReport {
    pub fn is_conserved(&self) -> bool {
        self.frames_in == self.frames_published + self.other_count + self.parse_errors
    }
}

/// Publishes every SRP/FRER frame in `frames` on `bus`.
///
/// `speed` scales capture time: 1.0 is real time, 2.0 twice as fast, and
/// 0.0 replays as fast as the consumers allow.
pub fn replay<I>(frames: I, bus: &EventBus, speed: f64) -> Result<ReplayReport, ReplayError>
where
    I: IntoIterator<Item = TimestampedFrame>,
{
    if !(speed.is_finite() && speed >= 0.0) {
        return Err(ReplayError::BadSpeed(speed));
    }
    let started = Instant::now();
    let mut report = ReplayReport::default();
    let mut lags = Vec::new();
    let mut clock: Option<f64> = None;

    for tf in frames {
        let taken = Instant::now();
        report.frames_in += 1;
        let ts = match clock {
            Some(prev) if tf.ts < prev => {
                report.clock_regressions += 1;
                prev
            }
            _ => tf.ts,
        };
        clock = Some(ts);
        report.first_ts.get_or_insert(ts);
        report.last_ts = Some(ts);

        if speed > 0.0 {
            let due = (ts - report.first_ts.unwrap_or(ts)) / speed;
            let elapsed = started.elapsed().as_secs_f64();
            if due > elapsed {
                std::thread::sleep(Duration::from_secs_f64(due - elapsed));
            }
        }

        if classify_bytes(&tf.data) == FrameKind::Other {
            report.other_count += 1;
            continue;
        }
        match EtherFrame::decode(&tf.data).and_then(|f| dissect(&f)) {
            Ok(Some(frame)) => {
                lags.push(taken.elapsed().as_nanos() as u64);
                bus.publish(BusEvent::frame(ts, frame))?;
                report.frames_published += 1;
            }
            Ok(None) => report.other_count += 1,
            Err(e) => {
                log::debug!("frame {} at {ts}: {e}", report.frames_in - 1);
                report.parse_errors += 1;
            }
        }
    }
    report.wall_s = started.elapsed().as_secs_f64();
    report.lag = LagStats::from_nanos(lags);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bus::{Payload, Topic};
    use tsn_ids_core::wire::encode_rtag;
    use tsn_ids_core::{MacAddr, RTagFrame, StreamId};

    fn rtag(seq: u16) -> Vec<u8> {
        encode_rtag(&RTagFrame {
            src_mac: MacAddr([2, 0, 0, 0, 0, 1]),
            stream_handle: StreamId::new(MacAddr([0x91, 0xe0, 0xf0, 0, 0xfe, 0]), 1),
            reserved: 0,
            sequence_number: seq,
            encapsulated_ethertype: 0x0800,
            payload: vec![0; 46],
        })
        .unwrap()
        .to_bytes()
    }

    #[test]
    fn counts_are_conserved() {
        let mut ipv4 = rtag(0);
        ipv4[12] = 0x08;
        ipv4[13] = 0x00;
        let mut truncated = rtag(1);
        truncated.truncate(17);
        let frames = vec![
            TimestampedFrame::new(1.0, rtag(0)),
            TimestampedFrame::new(1.1, ipv4),
            TimestampedFrame::new(1.2, truncated),
            TimestampedFrame::new(1.3, vec![0; 5]),
            TimestampedFrame::new(1.05, rtag(2)),
        ];
        let bus = EventBus::default();
        let sub = bus.subscribe(Topic::Frer).unwrap();
        let report = replay(frames, &bus, 0.0).unwrap();
        bus.close();
        assert_eq!(report.frames_in, 5);
        assert_eq!(report.frames_published, 2);
        assert_eq!(report.parse_errors, 1);
        assert_eq!(report.other_count, 2);
        assert_eq!(report.clock_regressions, 1);
        assert!(report.is_conserved());
        let ts: Vec<f64> = sub.map(|e| e.timestamp).collect();
        assert_eq!(ts, [1.0, 1.3]);
    }

    #[test]
    fn paced_replay_takes_scaled_time() {
        let frames: Vec<_> = (0..5)
            .map(|i| TimestampedFrame::new(10.0 + 0.05 * i as f64, rtag(i)))
            .collect();
        let bus = EventBus::default();
        let r = replay(frames, &bus, 2.0).unwrap();
        assert!(r.wall_s >= 0.095, "{}", r.wall_s);
        assert_eq!(r.frames_published, 5);
    }

    #[test]
    fn event_payload_matches_frame() {
        let bus = EventBus::default();
        let sub = bus.subscribe(Topic::Frer).unwrap();
        replay([TimestampedFrame::new(0.5, rtag(7))], &bus, 0.0).unwrap();
        match sub.try_recv().unwrap().payload {
            Payload::Frame(tsn_ids_core::TsnFrame::Frer(r)) => assert_eq!(r.sequence_number, 7),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_bad_speed() {
        let bus = EventBus::default();
        assert!(matches!(
            replay(Vec::new(), &bus, -1.0),
            Err(ReplayError::BadSpeed(_))
        ));
        assert!(matches!(
            replay(Vec::new(), &bus, f64::NAN),
            Err(ReplayError::BadSpeed(_))
        ));
    }
}
