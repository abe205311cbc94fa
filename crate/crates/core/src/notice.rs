//! Notice catalog (N1-N8), the detection rules that raise them (A1-A7), and
//! the structured evidence attached to each notice.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::recovery::AcceptDecision;
use crate::wire::StreamId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NoticeCode {
    N1ExcessiveResourceRequest,
    N2DeviatingResourceRequest,
    N3TooManyRequests,
    N4ChangingExistingAllocation,
    N5DanglingResources,
    N6OutOfOrderFrames,
    N7ExcessiveMemberStreams,
    N8TerminatedMemberStreams,
}

impl NoticeCode {
    pub const ALL: [NoticeCode; 8] = [
        NoticeCode::N1ExcessiveResourceRequest,
        NoticeCode::N2DeviatingResourceRequest,
        NoticeCode::N3TooManyRequests,
        NoticeCode::N4ChangingExistingAllocation,
        NoticeCode::N5DanglingResources,
        NoticeCode::N6OutOfOrderFrames,
        NoticeCode::N7ExcessiveMemberStreams,
        NoticeCode::N8TerminatedMemberStreams,
    ];

    /// Full note name as written to the log, e.g. `N6.FRER.OutOfOrderFrames`.
    pub fn note(self) -> &'static str {
        match self {
            NoticeCode::N1ExcessiveResourceRequest => "N1.SRP.ExcessiveResourceRequest",
            NoticeCode::N2DeviatingResourceRequest => "N2.SRP.DeviatingResourceRequest",
            NoticeCode::N3TooManyRequests => "N3.SRP.TooManyRequests",
            NoticeCode::N4ChangingExistingAllocation => "N4.SRP.ChangingExistingAllocation",
            NoticeCode::N5DanglingResources => "N5.SRP.DanglingResources",
            NoticeCode::N6OutOfOrderFrames => "N6.FRER.OutOfOrderFrames",
            NoticeCode::N7ExcessiveMemberStreams => "N7.FRER.ExcessiveMemberStreams",
            NoticeCode::N8TerminatedMemberStreams => "N8.FRER.TerminatedMemberStreams",
        }
    }

    /// Raised only by the periodic sweep, never from a per-frame path.
    pub fn is_periodic(self) -> bool {
        matches!(
            self,
            NoticeCode::N5DanglingResources | NoticeCode::N8TerminatedMemberStreams
        )
    }

    /// `N1` .. `N8`.
    pub fn short(self) -> &'static str {
        &self.note()[..2]
    }
}

impl fmt::Display for NoticeCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.note())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownCode;

impl fmt::Display for UnknownCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("unknown notice code or rule")
    }
}

impl core::error::Error for UnknownCode {}

impl FromStr for NoticeCode {
    type Err = UnknownCode;

    /// Accepts either the full note name or the short `N<k>` form.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        NoticeCode::ALL
            .into_iter()
            .find(|c| c.note() == s || c.short() == s)
            .ok_or(UnknownCode)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Rule {
    A1,
    A2,
    A3,
    A4,
    A5,
    A6,
    A7,
}

impl Rule {
    pub const ALL: [Rule; 7] = [
        Rule::A1,
        Rule::A2,
        Rule::A3,
        Rule::A4,
        Rule::A5,
        Rule::A6,
        Rule::A7,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Rule::A1 => "A1",
            Rule::A2 => "A2",
            Rule::A3 => "A3",
            Rule::A4 => "A4",
            Rule::A5 => "A5",
            Rule::A6 => "A6",
            Rule::A7 => "A7",
        }
    }

    /// Notices each detection function may raise.
    pub fn notices(self) -> &'static [NoticeCode] {
        use NoticeCode::*;
        match self {
            Rule::A1 => &[N1ExcessiveResourceRequest, N2DeviatingResourceRequest],
            Rule::A2 => &[
                N1ExcessiveResourceRequest,
                N2DeviatingResourceRequest,
                N3TooManyRequests,
            ],
            Rule::A3 => &[
                N1ExcessiveResourceRequest,
                N2DeviatingResourceRequest,
                N4ChangingExistingAllocation,
            ],
            Rule::A4 => &[N5DanglingResources],
            Rule::A5 => &[N6OutOfOrderFrames, N7ExcessiveMemberStreams],
            Rule::A6 => &[N7ExcessiveMemberStreams],
            Rule::A7 => &[N7ExcessiveMemberStreams, N8TerminatedMemberStreams],
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Rule {
    type Err = UnknownCode;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Rule::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or(UnknownCode)
    }
}

/// Structured evidence. Each variant belongs to exactly one notice code and
/// has a fixed set of keys.
#[derive(Debug, Clone, PartialEq)]
pub enum Evidence {
    ExcessiveRequest {
        bandwidth_bps: f64,
        max_bandwidth_bps: u64,
        frame_rate: f64,
        max_frame_rate: f64,
    },
    DeviatingRequest {
        bandwidth_ratio: f64,
        rate_ratio: f64,
        mean_bandwidth_bps: f64,
        mean_frame_rate: f64,
        factor: f64,
    },
    TooManyRequests {
        count: u32,
        limit: u32,
        window_s: f64,
    },
    ChangingAllocation {
        previous_bandwidth_bps: f64,
        requested_bandwidth_bps: f64,
    },
    Dangling,
    OutOfOrder {
        observed: u16,
        expected: u16,
        decision: AcceptDecision,
    },
    ExcessiveCopies {
        sequence: u16,
        copies: u8,
        redundancy: u8,
    },
    Rebased {
        observed: u16,
        revoked: u16,
    },
    SharedLink {
        from: String,
        to: String,
        path_a: usize,
        path_b: usize,
    },
    MemberSilent {
        last_frame_at: f64,
        silent_s: f64,
        timeout_s: f64,
    },
}

impl Evidence {
    pub fn code(&self) -> NoticeCode {
        use NoticeCode::*;
        match self {
            Evidence::ExcessiveRequest { .. } => N1ExcessiveResourceRequest,
            Evidence::DeviatingRequest { .. } => N2DeviatingResourceRequest,
            Evidence::TooManyRequests { .. } => N3TooManyRequests,
            Evidence::ChangingAllocation { .. } => N4ChangingExistingAllocation,
            Evidence::Dangling => N5DanglingResources,
            Evidence::OutOfOrder { .. } => N6OutOfOrderFrames,
            Evidence::ExcessiveCopies { .. }
            | Evidence::Rebased { .. }
            | Evidence::SharedLink { .. } => N7ExcessiveMemberStreams,
            Evidence::MemberSilent { .. } => N8TerminatedMemberStreams,
        }
    }

    /// Flat key/value view used by the log.
    pub fn fields(&self) -> Vec<(&'static str, String)> {
        let s = |v: &dyn fmt::Display| v.to_string();
        match self {
            Evidence::ExcessiveRequest {
                bandwidth_bps,
                max_bandwidth_bps,
                frame_rate,
                max_frame_rate,
            } => vec![
                ("bandwidth_bps", s(bandwidth_bps)),
                ("max_bandwidth_bps", s(max_bandwidth_bps)),
                ("frame_rate", s(frame_rate)),
                ("max_frame_rate", s(max_frame_rate)),
            ],
            Evidence::DeviatingRequest {
                bandwidth_ratio,
                rate_ratio,
                mean_bandwidth_bps,
                mean_frame_rate,
                factor,
            } => {
                vec![
                    ("bandwidth_ratio", s(bandwidth_ratio)),
                    ("rate_ratio", s(rate_ratio)),
                    ("mean_bandwidth_bps", s(mean_bandwidth_bps)),
                    ("mean_frame_rate", s(mean_frame_rate)),
                    ("factor", s(factor)),
                ]
            }
            Evidence::TooManyRequests {
                count,
                limit,
                window_s,
            } => {
                vec![
                    ("count", s(count)),
                    ("limit", s(limit)),
                    ("window_s", s(window_s)),
                ]
            }
            Evidence::ChangingAllocation {
                previous_bandwidth_bps,
                requested_bandwidth_bps,
            } => vec![
                ("previous_bandwidth_bps", s(previous_bandwidth_bps)),
                ("requested_bandwidth_bps", s(requested_bandwidth_bps)),
            ],
            Evidence::Dangling => Vec::new(),
            Evidence::OutOfOrder {
                observed,
                expected,
                decision,
            } => {
                vec![
                    ("observed", s(observed)),
                    ("expected", s(expected)),
                    ("decision", s(decision)),
                ]
            }
            Evidence::ExcessiveCopies {
                sequence,
                copies,
                redundancy,
            } => vec![
                ("kind", "copies".into()),
                ("sequence", s(sequence)),
                ("copies", s(copies)),
                ("redundancy", s(redundancy)),
            ],
            Evidence::Rebased { observed, revoked } => {
                vec![
                    ("kind", "rebase".into()),
                    ("observed", s(observed)),
                    ("revoked", s(revoked)),
                ]
            }
            Evidence::SharedLink {
                from,
                to,
                path_a,
                path_b,
            } => vec![
                ("kind", "route".into()),
                ("link", format!("{from}-{to}")),
                ("path_a", s(path_a)),
                ("path_b", s(path_b)),
            ],
            Evidence::MemberSilent {
                last_frame_at,
                silent_s,
                timeout_s,
            } => vec![
                ("last_frame_at", s(last_frame_at)),
                ("silent_s", s(silent_s)),
                ("timeout_s", s(timeout_s)),
            ],
        }
    }

    /// Keys [`Evidence::fields`] may produce for a code.
    pub fn allowed_keys(code: NoticeCode) -> &'static [&'static [&'static str]] {
        use NoticeCode::*;
        match code {
            N1ExcessiveResourceRequest => &[&[
                "bandwidth_bps",
                "max_bandwidth_bps",
                "frame_rate",
                "max_frame_rate",
            ]],
            N2DeviatingResourceRequest => &[&[
                "bandwidth_ratio",
                "rate_ratio",
                "mean_bandwidth_bps",
                "mean_frame_rate",
                "factor",
            ]],
            N3TooManyRequests => &[&["count", "limit", "window_s"]],
            N4ChangingExistingAllocation => {
                &[&["previous_bandwidth_bps", "requested_bandwidth_bps"]]
            }
            N5DanglingResources => &[&[]],
            N6OutOfOrderFrames => &[&["observed", "expected", "decision"]],
            N7ExcessiveMemberStreams => &[
                &["kind", "sequence", "copies", "redundancy"],
                &["kind", "observed", "revoked"],
                &["kind", "link", "path_a", "path_b"],
            ],
            N8TerminatedMemberStreams => &[&["last_frame_at", "silent_s", "timeout_s"]],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Notice {
    pub code: NoticeCode,
    pub ts: f64,
    pub stream_id: Option<StreamId>,
    pub evidence: Evidence,
    pub rule: Rule,
    /// Identical notices folded into this one's predecessor window.
    pub repeats: u32,
}

impl Notice {
    pub fn new(rule: Rule, ts: f64, stream_id: Option<StreamId>, evidence: Evidence) -> Self {
        let code = evidence.code();
        debug_assert!(rule.notices().contains(&code), "{rule} cannot raise {code}");
        Notice {
            code,
            ts,
            stream_id,
            evidence,
            rule,
            repeats: 0,
        }
    }

    /// Code matches evidence, and the rule is allowed to raise the code.
    pub fn is_schema_valid(&self) -> bool {
        self.evidence.code() == self.code && self.rule.notices().contains(&self.code)
    }

    pub fn message(&self) -> String {
        let stream = self
            .stream_id
            .map(|s| format!("stream {s}"))
            .unwrap_or_else(|| "unknown stream".into());
        match &self.evidence {
            Evidence::ExcessiveRequest { bandwidth_bps, max_bandwidth_bps, frame_rate, max_frame_rate } => format!(
                "{stream} requests {bandwidth_bps} bit/s at {frame_rate} frames/s \
                 (limits {max_bandwidth_bps} bit/s, {max_frame_rate} frames/s)"
            ),
            Evidence::DeviatingRequest { bandwidth_ratio, rate_ratio, factor, .. } => format!(
                "{stream} request deviates from the rolling average \
                 (bandwidth x{bandwidth_ratio}, rate x{rate_ratio}, factor {factor})"
            ),
            Evidence::TooManyRequests { count, limit, window_s } => {
                format!("{count} SRP requests within {window_s} s (limit {limit})")
            }
            Evidence::ChangingAllocation { previous_bandwidth_bps, requested_bandwidth_bps } => format!(
                "attempt to change accepted {stream} from {previous_bandwidth_bps} to {requested_bandwidth_bps} bit/s"
            ),
            Evidence::Dangling => format!("accepted {stream} carries no data"),
            Evidence::OutOfOrder { observed, expected, decision } => format!(
                "out of order frame on {stream}: sequence number {observed}, expected {expected} ({decision})"
            ),
            Evidence::ExcessiveCopies { sequence, copies, redundancy } => format!(
                "{copies} copies of sequence number {sequence} on {stream}, degree of redundancy is {redundancy}"
            ),
            Evidence::Rebased { observed, revoked } => format!(
                "{stream} restarted at sequence number {observed} after recovery timeout (revoked {revoked})"
            ),
            Evidence::SharedLink { from, to, path_a, path_b } => {
                format!("member paths {path_a} and {path_b} of {stream} share link {from}-{to}")
            }
            Evidence::MemberSilent { silent_s, timeout_s, .. } => {
                format!("member streams of {stream} silent for {silent_s} s (timeout {timeout_s} s)")
            }
        }
    }
}
