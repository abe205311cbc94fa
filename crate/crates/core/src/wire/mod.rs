//! Byte-level codec for the TSN frames the monitor consumes.
//!
//! Two EtherTypes are recognised: `0x22EA` carries SRP talker advertisements
//! and listener responses, `0xF1C1` carries FRER data frames behind an R-TAG.
//! All multi-byte fields are big-endian. The exact layouts are documented in
//! `docs/wire-format.md`; the constants below are the normative offsets.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

mod rtag;
mod srp;

pub use rtag::{encode_rtag, parse_rtag, RTagFrame};
pub use srp::{
    encode_srp, parse_srp, ParsedSrp, SrpListenerResponse, SrpMessage, SrpTalkerAdvertise,
    TalkerStatus, TrafficSpecification, UserToNetworkRequirements,
};

pub const ETHERTYPE_SRP: u16 = 0x22EA;
pub const ETHERTYPE_RTAG: u16 = 0xF1C1;

pub const ETH_HEADER_LEN: usize = 14;
pub const MAX_PAYLOAD: usize = 1500;
/// Smallest value interpreted as an EtherType rather than an 802.3 length.
pub const MIN_ETHERTYPE: u16 = 0x0600;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WireError {
    TruncatedFrame {
        needed: usize,
        got: usize,
    },
    BadMessageType(u8),
    BadEnum(u8),
    /// Length/type field below 0x0600: an 802.3 length, not an EtherType.
    NotEthernetII(u16),
    OversizedPayload(usize),
    WrongEtherType(u16),
    InvalidModel(&'static str),
}

impl fmt::Display for WireError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WireError::TruncatedFrame { needed, got } => {
                write!(f, "truncated frame: need {needed} bytes, got {got}")
            }
            WireError::BadMessageType(t) => write!(f, "unknown SRP message type {t}"),
            WireError::BadEnum(v) => write!(f, "talker status {v} out of range"),
            WireError::NotEthernetII(v) => {
                write!(f, "length/type field {v:#06x} is not an EtherType")
            }
            WireError::OversizedPayload(n) => {
                write!(f, "payload of {n} bytes exceeds {MAX_PAYLOAD}")
            }
            WireError::WrongEtherType(t) => write!(f, "unexpected EtherType {t:#06x}"),
            WireError::InvalidModel(why) => write!(f, "invalid frame model: {why}"),
        }
    }
}

impl core::error::Error for WireError {}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(
    feature = "serde",
    serde(into = "alloc::string::String", try_from = "alloc::string::String")
)]
pub struct MacAddr(pub [u8; 6]);

impl MacAddr {
    pub const fn new(bytes: [u8; 6]) -> Self {
        MacAddr(bytes)
    }

    pub const fn octets(&self) -> [u8; 6] {
        self.0
    }
}

impl fmt::Display for MacAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let b = self.0;
        write!(
            f,
            "{:02x}:{:02x}:{:02x}:{:02x}:{:02x}:{:02x}",
            b[0], b[1], b[2], b[3], b[4], b[5]
        )
    }
}

impl fmt::Debug for MacAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseIdError;

impl fmt::Display for ParseIdError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("malformed identifier")
    }
}

impl core::error::Error for ParseIdError {}

fn hex_nibble(c: u8) -> Result<u8, ParseIdError> {
    match c {
        b'0'..=b'9' => Ok(c - b'0'),
        b'a'..=b'f' => Ok(c - b'a' + 10),
        b'A'..=b'F' => Ok(c - b'A' + 10),
        _ => Err(ParseIdError),
    }
}

/// Decodes exactly `out.len()` bytes from hex, skipping ':' and '-' separators.
fn decode_hex(s: &str, out: &mut [u8]) -> Result<(), ParseIdError> {
    let mut digits = s.bytes().filter(|c| *c != b':' && *c != b'-');
    for byte in out.iter_mut() {
        let hi = hex_nibble(digits.next().ok_or(ParseIdError)?)?;
        let lo = hex_nibble(digits.next().ok_or(ParseIdError)?)?;
        *byte = (hi << 4) | lo;
    }
    if digits.next().is_some() {
        return Err(ParseIdError);
    }
    Ok(())
}

impl FromStr for MacAddr {
    type Err = ParseIdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut b = [0u8; 6];
        decode_hex(s, &mut b)?;
        Ok(MacAddr(b))
    }
}

impl From<MacAddr> for alloc::string::String {
    fn from(m: MacAddr) -> Self {
        alloc::format!("{m}")
    }
}

impl TryFrom<alloc::string::String> for MacAddr {
    type Error = ParseIdError;
    fn try_from(s: alloc::string::String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

/// 8-byte stream identifier: a MAC address followed by a 16-bit unique id.
///
/// Ordering and equality are bytewise over the wire encoding. The textual
/// form is 16 lowercase hex digits.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(
    feature = "serde",
    serde(into = "alloc::string::String", try_from = "alloc::string::String")
)]
pub struct StreamId {
    pub mac_address: MacAddr,
    pub unique_id: u16,
}

impl StreamId {
    pub const WIRE_LEN: usize = 8;

    pub const fn new(mac_address: MacAddr, unique_id: u16) -> Self {
        StreamId {
            mac_address,
            unique_id,
        }
    }

    pub fn to_bytes(&self) -> [u8; 8] {
        let mut b = [0u8; 8];
        b[..6].copy_from_slice(&self.mac_address.0);
        b[6..].copy_from_slice(&self.unique_id.to_be_bytes());
        b
    }

    pub fn from_bytes(b: [u8; 8]) -> Self {
        let mut mac = [0u8; 6];
        mac.copy_from_slice(&b[..6]);
        StreamId {
            mac_address: MacAddr(mac),
            unique_id: u16::from_be_bytes([b[6], b[7]]),
        }
    }
}

impl fmt::Display for StreamId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.to_bytes() {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for StreamId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "StreamId({self})")
    }
}

impl FromStr for StreamId {
    type Err = ParseIdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut b = [0u8; 8];
        decode_hex(s, &mut b)?;
        Ok(StreamId::from_bytes(b))
    }
}

impl From<StreamId> for alloc::string::String {
    fn from(id: StreamId) -> Self {
        alloc::format!("{id}")
    }
}

impl TryFrom<alloc::string::String> for StreamId {
    type Error = ParseIdError;
    fn try_from(s: alloc::string::String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

/// An Ethernet II frame without FCS.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EtherFrame {
    pub dst_mac: MacAddr,
    pub src_mac: MacAddr,
    pub ethertype: u16,
    pub payload: Vec<u8>,
}

impl EtherFrame {
    pub fn new(
        dst_mac: MacAddr,
        src_mac: MacAddr,
        ethertype: u16,
        payload: Vec<u8>,
    ) -> Result<Self, WireError> {
        if ethertype < MIN_ETHERTYPE {
            return Err(WireError::NotEthernetII(ethertype));
        }
        if payload.len() > MAX_PAYLOAD {
            return Err(WireError::OversizedPayload(payload.len()));
        }
        Ok(EtherFrame {
            dst_mac,
            src_mac,
            ethertype,
            payload,
        })
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        if bytes.len() < ETH_HEADER_LEN {
            return Err(WireError::TruncatedFrame {
                needed: ETH_HEADER_LEN,
                got: bytes.len(),
            });
        }
        let mut dst = [0u8; 6];
        let mut src = [0u8; 6];
        dst.copy_from_slice(&bytes[0..6]);
        src.copy_from_slice(&bytes[6..12]);
        let ethertype = u16::from_be_bytes([bytes[12], bytes[13]]);
        EtherFrame::new(
            MacAddr(dst),
            MacAddr(src),
            ethertype,
            bytes[ETH_HEADER_LEN..].to_vec(),
        )
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(ETH_HEADER_LEN + self.payload.len());
        self.write_to(&mut out);
        out
    }

    pub fn write_to(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.dst_mac.0);
        out.extend_from_slice(&self.src_mac.0);
        out.extend_from_slice(&self.ethertype.to_be_bytes());
        out.extend_from_slice(&self.payload);
    }

    pub fn wire_len(&self) -> usize {
        ETH_HEADER_LEN + self.payload.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FrameKind {
    SrpTalker,
    SrpListener,
    Frer,
    Other,
}

fn kind_of(ethertype: u16, first_payload_byte: Option<u8>) -> FrameKind {
    match ethertype {
        // Anything on the SRP EtherType that is not a listener response goes
        // to the talker parser, which reports bad message types as errors.
        ETHERTYPE_SRP => match first_payload_byte {
            Some(srp::MSG_LISTENER_RESPONSE) => FrameKind::SrpListener,
            _ => FrameKind::SrpTalker,
        },
        ETHERTYPE_RTAG => FrameKind::Frer,
        _ => FrameKind::Other,
    }
}

/// Dispatches a frame by EtherType (and, for SRP, the message-type byte).
pub fn classify(frame: &EtherFrame) -> FrameKind {
    kind_of(frame.ethertype, frame.payload.first().copied())
}

/// Same as [`classify`] but over raw bytes; anything too short for an
/// Ethernet header is `Other`.
pub fn classify_bytes(bytes: &[u8]) -> FrameKind {
    if bytes.len() < ETH_HEADER_LEN {
        return FrameKind::Other;
    }
    kind_of(
        u16::from_be_bytes([bytes[12], bytes[13]]),
        bytes.get(ETH_HEADER_LEN).copied(),
    )
}

/// A decoded TSN frame model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TsnFrame {
    SrpTalker(SrpTalkerAdvertise),
    SrpListener(SrpListenerResponse),
    Frer(RTagFrame),
}

impl TsnFrame {
    pub fn kind(&self) -> FrameKind {
        match self {
            TsnFrame::SrpTalker(_) => FrameKind::SrpTalker,
            TsnFrame::SrpListener(_) => FrameKind::SrpListener,
            TsnFrame::Frer(_) => FrameKind::Frer,
        }
    }
}

/// Classifies and parses in one step. `Ok(None)` means the frame is not TSN
/// traffic this monitor understands.
pub fn dissect(frame: &EtherFrame) -> Result<Option<TsnFrame>, WireError> {
    match classify(frame) {
        FrameKind::SrpTalker | FrameKind::SrpListener => {
            let parsed = parse_srp(&frame.payload)?;
            Ok(Some(match parsed.message {
                SrpMessage::Talker(adv) => TsnFrame::SrpTalker(adv),
                SrpMessage::Listener(resp) => TsnFrame::SrpListener(resp),
            }))
        }
        FrameKind::Frer => parse_rtag(frame).map(|r| Some(TsnFrame::Frer(r))),
        FrameKind::Other => Ok(None),
    }
}

pub(crate) fn need(bytes: &[u8], n: usize) -> Result<(), WireError> {
    if bytes.len() < n {
        Err(WireError::TruncatedFrame {
            needed: n,
            got: bytes.len(),
        })
    } else {
        Ok(())
    }
}

pub(crate) fn be_u16(b: &[u8], at: usize) -> u16 {
    u16::from_be_bytes([b[at], b[at + 1]])
}

pub(crate) fn be_u32(b: &[u8], at: usize) -> u32 {
    u32::from_be_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

pub(crate) fn mac_at(b: &[u8], at: usize) -> MacAddr {
    let mut m = [0u8; 6];
    m.copy_from_slice(&b[at..at + 6]);
    MacAddr(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn frame(ethertype: u16, payload: Vec<u8>) -> EtherFrame {
        EtherFrame::new(MacAddr([1; 6]), MacAddr([2; 6]), ethertype, payload).unwrap()
    }

    #[test]
    fn classify_dispatches_on_ethertype() {
        assert_eq!(
            classify(&frame(0x22EA, vec![1, 0, 0])),
            FrameKind::SrpTalker
        );
        assert_eq!(
            classify(&frame(0x22EA, vec![2, 0, 0])),
            FrameKind::SrpListener
        );
        assert_eq!(classify(&frame(0xF1C1, vec![])), FrameKind::Frer);
        assert_eq!(classify(&frame(0x0800, vec![1])), FrameKind::Other);
    }

    #[test]
    fn classify_bytes_handles_runts() {
        assert_eq!(classify_bytes(&[]), FrameKind::Other);
        assert_eq!(classify_bytes(&[0xff; 13]), FrameKind::Other);
        let mut b = vec![0u8; 14];
        b[12] = 0xF1;
        b[13] = 0xC1;
        assert_eq!(classify_bytes(&b), FrameKind::Frer);
    }

    #[test]
    fn ether_frame_limits() {
        assert_eq!(
            EtherFrame::new(MacAddr::default(), MacAddr::default(), 0x05DC, vec![]),
            Err(WireError::NotEthernetII(0x05DC))
        );
        assert_eq!(
            EtherFrame::new(
                MacAddr::default(),
                MacAddr::default(),
                0x0800,
                vec![0; 1501]
            ),
            Err(WireError::OversizedPayload(1501))
        );
        assert!(matches!(
            EtherFrame::decode(&[0; 10]),
            Err(WireError::TruncatedFrame { .. })
        ));
        let f = frame(0x0800, vec![9, 8, 7]);
        assert_eq!(EtherFrame::decode(&f.to_bytes()).unwrap(), f);
    }

    #[test]
    fn stream_id_text_form() {
        let id = StreamId::new(MacAddr([0x91, 0xe0, 0xf0, 0, 0xfe, 0x01]), 0x0102);
        let s = alloc::format!("{id}");
        assert_eq!(s, "91e0f000fe010102");
        assert_eq!(s.parse::<StreamId>().unwrap(), id);
        assert!("91e0f000fe0101".parse::<StreamId>().is_err());
        assert!("zz".parse::<MacAddr>().is_err());
        assert_eq!(
            "02:00:00:00:00:01".parse::<MacAddr>().unwrap(),
            MacAddr([2, 0, 0, 0, 0, 1])
        );
    }

    #[test]
    fn stream_id_orders_bytewise() {
        let a = StreamId::new(MacAddr([0, 0, 0, 0, 0, 1]), 0xffff);
        let b = StreamId::new(MacAddr([0, 0, 0, 0, 0, 2]), 0);
        assert!(a < b);
        assert!(a.to_bytes() < b.to_bytes());
    }
}
