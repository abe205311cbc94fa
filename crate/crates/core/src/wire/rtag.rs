//! FRER data frames: R-TAG followed by the stream's unique id.
//!
//! ```text
//! 0      2          4                 6           8
//! +------+----------+-----------------+-----------+---------...
//! | rsvd | sequence | encap EtherType | unique id | data
//! +------+----------+-----------------+-----------+---------...
//! ```

use alloc::vec::Vec;

use super::{be_u16, need, EtherFrame, MacAddr, StreamId, WireError, ETHERTYPE_RTAG, MAX_PAYLOAD};

pub const RTAG_LEN: usize = 6;
/// R-TAG plus the 2-byte unique id that associates the frame with a stream.
pub const FRER_HEADER_LEN: usize = RTAG_LEN + 2;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RTagFrame {
    pub src_mac: MacAddr,
    /// Destination MAC of the frame plus the embedded unique id.
    pub stream_handle: StreamId,
    pub reserved: u16,
    pub sequence_number: u16,
    pub encapsulated_ethertype: u16,
    pub payload: Vec<u8>,
}

impl RTagFrame {
    pub fn payload_len(&self) -> u32 {
        self.payload.len() as u32
    }
}

pub fn parse_rtag(frame: &EtherFrame) -> Result<RTagFrame, WireError> {
    if frame.ethertype != ETHERTYPE_RTAG {
        return Err(WireError::WrongEtherType(frame.ethertype));
    }
    let p = &frame.payload;
    need(p, FRER_HEADER_LEN)?;
    Ok(RTagFrame {
        src_mac: frame.src_mac,
        stream_handle: StreamId::new(frame.dst_mac, be_u16(p, 6)),
        reserved: be_u16(p, 0),
        sequence_number: be_u16(p, 2),
        encapsulated_ethertype: be_u16(p, 4),
        payload: p[FRER_HEADER_LEN..].to_vec(),
    })
}

pub fn encode_rtag(rtag: &RTagFrame) -> Result<EtherFrame, WireError> {
    if rtag.payload.len() + FRER_HEADER_LEN > MAX_PAYLOAD {
        return Err(WireError::OversizedPayload(
            rtag.payload.len() + FRER_HEADER_LEN,
        ));
    }
    let mut p = Vec::with_capacity(FRER_HEADER_LEN + rtag.payload.len());
    p.extend_from_slice(&rtag.reserved.to_be_bytes());
    p.extend_from_slice(&rtag.sequence_number.to_be_bytes());
    p.extend_from_slice(&rtag.encapsulated_ethertype.to_be_bytes());
    p.extend_from_slice(&rtag.stream_handle.unique_id.to_be_bytes());
    p.extend_from_slice(&rtag.payload);
    EtherFrame::new(
        rtag.stream_handle.mac_address,
        rtag.src_mac,
        ETHERTYPE_RTAG,
        p,
    )
}
