//! SRP talker advertise / listener response layouts.
//!
//! Flattened fixed-width subset of the 802.1Qcc group headers. Trailing bytes
//! after the fixed layout are tolerated and reported in [`ParsedSrp`].

use alloc::vec::Vec;

use super::{
    be_u16, be_u32, mac_at, need, EtherFrame, MacAddr, StreamId, WireError, ETHERTYPE_SRP,
};

pub const MSG_TALKER_ADVERTISE: u8 = 1;
pub const MSG_LISTENER_RESPONSE: u8 = 2;

pub const TALKER_ADVERTISE_LEN: usize = 32;
pub const LISTENER_RESPONSE_LEN: usize = 10;

/// Smallest frame size a talker may declare.
pub const MIN_FRAME_SIZE: u16 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrafficSpecification {
    /// Interval length in seconds is `interval_numerator / interval_denominator`.
    pub interval_numerator: u32,
    pub interval_denominator: u32,
    pub max_frames_per_interval: u16,
    /// Bytes.
    pub max_frame_size: u16,
}

impl TrafficSpecification {
    pub fn validate(&self) -> Result<(), WireError> {
        if self.interval_denominator == 0 {
            return Err(WireError::InvalidModel("interval denominator is zero"));
        }
        if self.interval_numerator == 0 {
            return Err(WireError::InvalidModel("interval numerator is zero"));
        }
        if self.max_frames_per_interval == 0 {
            return Err(WireError::InvalidModel("zero frames per interval"));
        }
        if self.max_frame_size < MIN_FRAME_SIZE {
            return Err(WireError::InvalidModel("frame size below 64 bytes"));
        }
        Ok(())
    }

    /// Maximum frames per second.
    pub fn frame_rate(&self) -> f64 {
        f64::from(self.max_frames_per_interval) * f64::from(self.interval_denominator)
            / f64::from(self.interval_numerator)
    }

    pub fn bandwidth_bps(&self) -> f64 {
        self.frame_rate() * f64::from(self.max_frame_size) * 8.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct UserToNetworkRequirements {
    pub num_seamless_trees: u8,
    pub max_latency_us: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SrpTalkerAdvertise {
    pub stream_id: StreamId,
    pub traffic_spec: TrafficSpecification,
    pub requirements: UserToNetworkRequirements,
    pub dst_mac_of_stream: MacAddr,
}

impl SrpTalkerAdvertise {
    pub fn validate(&self) -> Result<(), WireError> {
        self.traffic_spec.validate()?;
        if self.requirements.num_seamless_trees == 0 {
            return Err(WireError::InvalidModel("num_seamless_trees is zero"));
        }
        Ok(())
    }

    /// Identity under which FRER data frames of this stream arrive:
    /// the stream's destination MAC plus its unique id.
    pub fn data_handle(&self) -> StreamId {
        StreamId::new(self.dst_mac_of_stream, self.stream_id.unique_id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum TalkerStatus {
    None = 0,
    Ready = 1,
    Failed = 2,
}

impl TryFrom<u8> for TalkerStatus {
    type Error = WireError;
    fn try_from(v: u8) -> Result<Self, WireError> {
        match v {
            0 => Ok(TalkerStatus::None),
            1 => Ok(TalkerStatus::Ready),
            2 => Ok(TalkerStatus::Failed),
            other => Err(WireError::BadEnum(other)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SrpListenerResponse {
    pub stream_id: StreamId,
    pub talker_status: TalkerStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SrpMessage {
    Talker(SrpTalkerAdvertise),
    Listener(SrpListenerResponse),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParsedSrp {
    pub message: SrpMessage,
    /// Bytes after the fixed layout that were not interpreted.
    pub trailing: usize,
}

fn stream_id_at(b: &[u8], at: usize) -> StreamId {
    let mut id = [0u8; 8];
    id.copy_from_slice(&b[at..at + 8]);
    StreamId::from_bytes(id)
}

pub fn parse_srp(payload: &[u8]) -> Result<ParsedSrp, WireError> {
    need(payload, 1)?;
    match payload[0] {
        MSG_TALKER_ADVERTISE => {
            need(payload, TALKER_ADVERTISE_LEN)?;
            let adv = SrpTalkerAdvertise {
                stream_id: stream_id_at(payload, 1),
                traffic_spec: TrafficSpecification {
                    interval_numerator: be_u32(payload, 9),
                    interval_denominator: be_u32(payload, 13),
                    max_frames_per_interval: be_u16(payload, 17),
                    max_frame_size: be_u16(payload, 19),
                },
                requirements: UserToNetworkRequirements {
                    num_seamless_trees: payload[21],
                    max_latency_us: be_u32(payload, 22),
                },
                dst_mac_of_stream: mac_at(payload, 26),
            };
            adv.validate()?;
            Ok(ParsedSrp {
                message: SrpMessage::Talker(adv),
                trailing: payload.len() - TALKER_ADVERTISE_LEN,
            })
        }
        MSG_LISTENER_RESPONSE => {
            need(payload, LISTENER_RESPONSE_LEN)?;
            let resp = SrpListenerResponse {
                stream_id: stream_id_at(payload, 1),
                talker_status: TalkerStatus::try_from(payload[9])?,
            };
            Ok(ParsedSrp {
                message: SrpMessage::Listener(resp),
                trailing: payload.len() - LISTENER_RESPONSE_LEN,
            })
        }
        other => Err(WireError::BadMessageType(other)),
    }
}

pub fn encode_srp_payload(msg: &SrpMessage) -> Result<Vec<u8>, WireError> {
    match msg {
        SrpMessage::Talker(adv) => {
            adv.validate()?;
            let mut p = Vec::with_capacity(TALKER_ADVERTISE_LEN);
            p.push(MSG_TALKER_ADVERTISE);
            p.extend_from_slice(&adv.stream_id.to_bytes());
            let ts = &adv.traffic_spec;
            p.extend_from_slice(&ts.interval_numerator.to_be_bytes());
            p.extend_from_slice(&ts.interval_denominator.to_be_bytes());
            p.extend_from_slice(&ts.max_frames_per_interval.to_be_bytes());
            p.extend_from_slice(&ts.max_frame_size.to_be_bytes());
            p.push(adv.requirements.num_seamless_trees);
            p.extend_from_slice(&adv.requirements.max_latency_us.to_be_bytes());
            p.extend_from_slice(&adv.dst_mac_of_stream.0);
            Ok(p)
        }
        SrpMessage::Listener(resp) => {
            let mut p = Vec::with_capacity(LISTENER_RESPONSE_LEN);
            p.push(MSG_LISTENER_RESPONSE);
            p.extend_from_slice(&resp.stream_id.to_bytes());
            p.push(resp.talker_status as u8);
            Ok(p)
        }
    }
}

pub fn encode_srp(msg: &SrpMessage, src: MacAddr, dst: MacAddr) -> Result<EtherFrame, WireError> {
    EtherFrame::new(dst, src, ETHERTYPE_SRP, encode_srp_payload(msg)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn talker() -> SrpTalkerAdvertise {
        SrpTalkerAdvertise {
            stream_id: StreamId::new(MacAddr([2, 0, 0, 0, 0, 1]), 7),
            traffic_spec: TrafficSpecification {
                interval_numerator: 1,
                interval_denominator: 8000,
                max_frames_per_interval: 1,
                max_frame_size: 128,
            },
            requirements: UserToNetworkRequirements {
                num_seamless_trees: 2,
                max_latency_us: 500,
            },
            dst_mac_of_stream: MacAddr([0x91, 0xe0, 0xf0, 0, 0xfe, 1]),
        }
    }

    #[test]
    fn talker_layout_is_bit_exact() {
        let p = encode_srp_payload(&SrpMessage::Talker(talker())).unwrap();
        let expected: [u8; 32] = [
            0x01, // talker advertise
            0x02, 0, 0, 0, 0, 0x01, 0x00, 0x07, // stream id
            0, 0, 0, 1, // interval numerator
            0, 0, 0x1f, 0x40, // interval denominator 8000
            0, 1, // frames per interval
            0, 0x80, // frame size 128
            2,    // seamless trees
            0, 0, 0x01, 0xf4, // latency 500 us
            0x91, 0xe0, 0xf0, 0, 0xfe, 1,
        ];
        assert_eq!(p, expected);
    }

    #[test]
    fn talker_traffic_spec_and_bandwidth() {
        let p = encode_srp_payload(&SrpMessage::Talker(talker())).unwrap();
        let parsed = parse_srp(&p).unwrap();
        let SrpMessage::Talker(adv) = parsed.message else {
            panic!("expected talker")
        };
        assert_eq!(adv.traffic_spec, talker().traffic_spec);
        // 1 frame x 128 B x 8 bit x 8000 intervals/s
        assert_eq!(adv.traffic_spec.bandwidth_bps(), 8_192_000.0);
        assert_eq!(adv.traffic_spec.frame_rate(), 8000.0);
        assert_eq!(adv.requirements.num_seamless_trees, 2);
        assert_eq!(parsed.trailing, 0);
    }

    #[test]
    fn listener_status_maps_directly() {
        let id = StreamId::new(MacAddr([2, 0, 0, 0, 0, 1]), 7);
        let mut p = vec![2];
        p.extend_from_slice(&id.to_bytes());
        p.push(1);
        let parsed = parse_srp(&p).unwrap();
        assert_eq!(
            parsed.message,
            SrpMessage::Listener(SrpListenerResponse {
                stream_id: id,
                talker_status: TalkerStatus::Ready
            })
        );
        p[9] = 3;
        assert_eq!(parse_srp(&p), Err(WireError::BadEnum(3)));
    }

    #[test]
    fn short_and_unknown_payloads() {
        assert!(matches!(
            parse_srp(&[1, 2, 3]),
            Err(WireError::TruncatedFrame { needed: 32, got: 3 })
        ));
        assert!(matches!(
            parse_srp(&[]),
            Err(WireError::TruncatedFrame { .. })
        ));
        assert_eq!(parse_srp(&[9; 40]), Err(WireError::BadMessageType(9)));
    }

    #[test]
    fn trailing_bytes_are_counted() {
        let mut p = encode_srp_payload(&SrpMessage::Talker(talker())).unwrap();
        p.extend_from_slice(&[0xaa; 5]);
        assert_eq!(parse_srp(&p).unwrap().trailing, 5);
    }

    #[test]
    fn invalid_models_are_rejected() {
        let mut adv = talker();
        adv.traffic_spec.interval_denominator = 0;
        assert!(matches!(
            encode_srp_payload(&SrpMessage::Talker(adv)),
            Err(WireError::InvalidModel(_))
        ));
        let mut adv = talker();
        adv.requirements.num_seamless_trees = 0;
        assert!(matches!(
            encode_srp_payload(&SrpMessage::Talker(adv)),
            Err(WireError::InvalidModel(_))
        ));
        let mut adv = talker();
        adv.traffic_spec.max_frame_size = 63;
        assert!(adv.validate().is_err());
    }
}
