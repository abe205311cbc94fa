//! The monitor pipeline: replay -> frame bus -> detection -> notice bus -> sink.
//!
//! Replay and detection each run on their own thread; the caller's thread
//! drains notices into the sink, so a slow log applies backpressure all the
//! way to the replay.

use std::collections::BTreeMap;
use std::io;
use std::thread;

use tsn_ids_core::engine::EngineSnapshot;
use tsn_ids_core::routes::{check_routes, RouteConfig, RouteError, SharedNode};
use tsn_ids_core::{ConfigError, DetectionEngine, DetectorConfig, Notice, NoticeCode};

use crate::bus::{BusError, BusEvent, EventBus, Payload, Topic};
use crate::pcap::TimestampedFrame;
use crate::replay::{replay, ReplayError, ReplayReport};

#[derive(Debug, Clone)]
pub struct MonitorOptions {
    pub config: DetectorConfig,
    pub speed: f64,
    pub routes: Option<RouteConfig>,
    pub bus_capacity: usize,
}

impl Default for MonitorOptions {
    fn default() -> Self {
        MonitorOptions {
            config: DetectorConfig::default(),
            speed: 0.0,
            routes: None,
            bus_capacity: EventBus::DEFAULT_CAPACITY,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum MonitorError {
    #[error("invalid detector configuration: {0}")]
    Config(#[from] ConfigError),
    #[error("invalid routes: {0}")]
    Routes(RouteError),
    #[error(transparent)]
    Replay(#[from] ReplayError),
    #[error(transparent)]
    Bus(#[from] BusError),
    #[error("notice sink: {0}")]
    Sink(#[from] io::Error),
}

#[derive(Debug, Clone)]
pub struct MonitorOutcome {
    pub report: ReplayReport,
    pub notices_by_code: BTreeMap<NoticeCode, u64>,
    pub notices_total: u64,
    pub shared_nodes: Vec<SharedNode>,
    pub snapshot: EngineSnapshot,
}

/// Runs the pipeline over `frames`, handing every notice to `sink` in
/// emission order.
pub fn run_pipeline<I, F>(
    frames: I,
    opts: &MonitorOptions,
    mut sink: F,
) -> Result<MonitorOutcome, MonitorError>
where
    I: IntoIterator<Item = TimestampedFrame>,
    I::IntoIter: Send,
    F: FnMut(&Notice) -> io::Result<()>,
{
    let mut engine = DetectionEngine::new(opts.config.clone())?;
    let mut shared_nodes = Vec::new();
    // stamped with the first capture timestamp once it is known
    let mut route_notices = match &opts.routes {
        Some(routes) => {
            let f = check_routes(routes, 0.0).map_err(MonitorError::Routes)?;
            shared_nodes = f.shared_nodes;
            f.notices
        }
        None => Vec::new(),
    };

    let frame_bus = EventBus::new(opts.bus_capacity);
    let notice_bus = EventBus::new(opts.bus_capacity);
    let frames_in = frame_bus.subscribe_many(&Topic::FRAMES)?;
    let notices_in = notice_bus.subscribe(Topic::Notice)?;
    let frames = frames.into_iter();
    let speed = opts.speed;

    let (report, engine, sink_result, by_code, total) = thread::scope(|s| {
        let replayer = s.spawn(move || {
            let r = replay(frames, &frame_bus, speed);
            frame_bus.close();
            r
        });

        let detector = s.spawn(move || {
            let publish = |n: Notice| notice_bus.publish(BusEvent::notice(n));
            let mut last_ts = None;
            let mut result: Result<(), BusError> = Ok(());
            for ev in frames_in {
                let Payload::Frame(frame) = ev.payload else {
                    continue;
                };
                if last_ts.is_none() {
                    for mut n in route_notices.drain(..) {
                        n.ts = ev.timestamp;
                        result = result.and(publish(n));
                    }
                }
                last_ts = Some(ev.timestamp);
                for n in engine.handle(&frame, ev.timestamp) {
                    result = result.and(publish(n));
                }
            }
            for n in route_notices.drain(..) {
                result = result.and(publish(n));
            }
            if let Some(ts) = last_ts {
                for n in engine.finish(ts) {
                    result = result.and(publish(n));
                }
            }
            notice_bus.close();
            result.map(|()| engine)
        });

        let mut by_code: BTreeMap<NoticeCode, u64> = BTreeMap::new();
        let mut total = 0u64;
        let mut sink_result = Ok(());
        for ev in notices_in {
            if let Payload::Notice(n) = ev.payload {
                *by_code.entry(n.code).or_default() += 1;
                total += 1;
                if sink_result.is_ok() {
                    sink_result = sink(&n);
                }
            }
        }
        let report = replayer.join().expect("replay thread panicked");
        let engine = detector.join().expect("detection thread panicked");
        (report, engine, sink_result, by_code, total)
    });

    let report = report?;
    let engine = engine?;
    sink_result?;
    Ok(MonitorOutcome {
        report,
        notices_by_code: by_code,
        notices_total: total,
        shared_nodes,
        snapshot: engine.snapshot(),
    })
}

/// Collects notices in memory.
pub fn run_collect<I>(
    frames: I,
    opts: &MonitorOptions,
) -> Result<(MonitorOutcome, Vec<Notice>), MonitorError>
where
    I: IntoIterator<Item = TimestampedFrame>,
    I::IntoIter: Send,
{
    let mut notices = Vec::new();
    let outcome = run_pipeline(frames, opts, |n| {
        notices.push(n.clone());
        Ok(())
    })?;
    Ok((outcome, notices))
}
