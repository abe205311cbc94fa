//! Static check of configured FRER member paths.
//!
//! Two member paths of one stream that traverse the same link lose their
//! redundancy there. Each such link yields one N7 notice. Links touching
//! the talker or listener are necessarily shared and are ignored. Nodes
//! shared by several paths are reported separately as warnings.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::notice::{Evidence, Notice, Rule};
use crate::wire::StreamId;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RouteConfig {
    pub streams: Vec<StreamRoutes>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StreamRoutes {
    pub stream_id: StreamId,
    pub paths: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RouteError {
    MalformedRoute {
        stream_id: StreamId,
        path: usize,
        reason: &'static str,
    },
}

impl fmt::Display for RouteError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RouteError::MalformedRoute {
                stream_id,
                path,
                reason,
            } => {
                write!(f, "stream {stream_id} path {path}: {reason}")
            }
        }
    }
}

impl core::error::Error for RouteError {}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SharedNode {
    pub stream_id: StreamId,
    pub node: String,
    pub paths: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RouteFindings {
    pub notices: Vec<Notice>,
    pub shared_nodes: Vec<SharedNode>,
}

fn link<'a>(a: &'a str, b: &'a str) -> (&'a str, &'a str) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Checks every stream's member paths. `ts` stamps the resulting notices.
pub fn check_routes(config: &RouteConfig, ts: f64) -> Result<RouteFindings, RouteError> {
    let mut findings = RouteFindings::default();
    for stream in &config.streams {
        for (i, path) in stream.paths.iter().enumerate() {
            if path.len() < 2 {
                return Err(RouteError::MalformedRoute {
                    stream_id: stream.stream_id,
                    path: i,
                    reason: "fewer than 2 nodes",
                });
            }
            if path.windows(2).any(|w| w[0] == w[1]) {
                return Err(RouteError::MalformedRoute {
                    stream_id: stream.stream_id,
                    path: i,
                    reason: "repeated consecutive node",
                });
            }
        }
        check_stream(stream, ts, &mut findings);
    }
    Ok(findings)
}

fn check_stream(stream: &StreamRoutes, ts: f64, findings: &mut RouteFindings) {
    let endpoints: BTreeSet<&str> = stream
        .paths
        .iter()
        .flat_map(|p| [p[0].as_str(), p[p.len() - 1].as_str()])
        .collect();

    let links: Vec<Vec<(&str, &str)>> = stream
        .paths
        .iter()
        .map(|p| {
            let mut seen = BTreeSet::new();
            p.windows(2)
                .map(|w| link(&w[0], &w[1]))
                .filter(|(a, b)| !endpoints.contains(a) && !endpoints.contains(b))
                .filter(|l| seen.insert(*l))
                .collect()
        })
        .collect();

    let mut reported = BTreeSet::new();
    for a in 0..links.len() {
        for b in a + 1..links.len() {
            for l in &links[a] {
                if links[b].contains(l) && reported.insert(*l) {
                    findings.notices.push(Notice::new(
                        Rule::A6,
                        ts,
                        Some(stream.stream_id),
                        Evidence::SharedLink {
                            from: l.0.into(),
                            to: l.1.into(),
                            path_a: a,
                            path_b: b,
                        },
                    ));
                }
            }
        }
    }

    let mut node_paths: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, p) in stream.paths.iter().enumerate() {
        let unique: BTreeSet<&str> = p
            .iter()
            .map(String::as_str)
            .filter(|n| !endpoints.contains(n))
            .collect();
        for n in unique {
            node_paths.entry(n).or_default().push(i);
        }
    }
    findings
        .shared_nodes
        .extend(
            node_paths
                .into_iter()
                .filter(|(_, p)| p.len() > 1)
                .map(|(node, paths)| SharedNode {
                    stream_id: stream.stream_id,
                    node: node.into(),
                    paths,
                }),
        );
}
