//! Classic libpcap files with microsecond timestamps and Ethernet link type.
//!
//! See <https://wiki.wireshark.org/Development/LibpcapFileFormat>. Both
//! byte orders are read; files are always written little-endian.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use tsn_ids_core::{EtherFrame, WireError};

pub const MAGIC_MICROS: u32 = 0xA1B2_C3D4;
pub const LINKTYPE_ETHERNET: u32 = 1;
pub const DEFAULT_SNAPLEN: u32 = 65_535;
/// Upper bound on a single record, guards against garbage lengths.
const MAX_RECORD: u32 = 262_144;

#[derive(Debug, thiserror::Error)]
pub enum PcapError {
    #[error("bad pcap magic {0:#010x}")]
    BadMagic(u32),
    #[error("unsupported link type {0} (only Ethernet)")]
    UnsupportedLinkType(u32),
    #[error("truncated record at byte {offset}")]
    TruncatedRecord { offset: u64 },
    #[error("timestamps out of order at frame {index}")]
    OutOfOrder { index: usize },
    #[error("invalid timestamp {0}")]
    BadTimestamp(f64),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// A captured frame as raw Ethernet bytes plus its capture time.
#[derive(Debug, Clone, PartialEq)]
pub struct TimestampedFrame {
    /// Seconds since the epoch, microsecond resolution.
    pub ts: f64,
    pub data: Vec<u8>,
}

impl TimestampedFrame {
    pub fn new(ts: f64, data: Vec<u8>) -> Self {
        TimestampedFrame { ts, data }
    }

    pub fn from_frame(ts: f64, frame: &EtherFrame) -> Self {
        TimestampedFrame {
            ts,
            data: frame.to_bytes(),
        }
    }

    pub fn from_micros(micros: u64, data: Vec<u8>) -> Self {
        TimestampedFrame {
            ts: micros_to_secs(micros),
            data,
        }
    }

    pub fn frame(&self) -> Result<EtherFrame, WireError> {
        EtherFrame::decode(&self.data)
    }

    pub fn ts_micros(&self) -> Result<u64, PcapError> {
        secs_to_micros(self.ts)
    }
}

pub fn micros_to_secs(micros: u64) -> f64 {
    (micros / 1_000_000) as f64 + (micros % 1_000_000) as f64 / 1e6
}

pub fn secs_to_micros(ts: f64) -> Result<u64, PcapError> {
    if !(ts.is_finite() && ts >= 0.0 && ts < u32::MAX as f64) {
        return Err(PcapError::BadTimestamp(ts));
    }
    Ok((ts * 1e6).round() as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PcapHeader {
    pub swapped: bool,
    pub version_major: u16,
    pub version_minor: u16,
    pub snaplen: u32,
    pub linktype: u32,
}

pub struct PcapReader<R> {
    inner: R,
    header: PcapHeader,
    offset: u64,
}

/// Fills `buf` completely; `Ok(false)` on a clean EOF before the first byte.
fn read_full<R: Read>(r: &mut R, buf: &mut [u8], offset: u64) -> Result<bool, PcapError> {
    let mut got = 0;
    while got < buf.len() {
        match r.read(&mut buf[got..]) {
            Ok(0) if got == 0 => return Ok(false),
            Ok(0) => return Err(PcapError::TruncatedRecord { offset }),
            Ok(n) => got += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(true)
}

impl<R: Read> PcapReader<R> {
    pub fn new(mut inner: R) -> Result<Self, PcapError> {
        let mut h = [0u8; 24];
        if !read_full(&mut inner, &mut h, 0)? {
            return Err(PcapError::TruncatedRecord { offset: 0 });
        }
        let raw = u32::from_le_bytes([h[0], h[1], h[2], h[3]]);
        let swapped = match raw {
            MAGIC_MICROS => false,
            m if m.swap_bytes() == MAGIC_MICROS => true,
            other => return Err(PcapError::BadMagic(other)),
        };
        let u16_at = |i: usize| {
            let v = u16::from_le_bytes([h[i], h[i + 1]]);
            if swapped {
                v.swap_bytes()
            } else {
                v
            }
        };
        let u32_at = |i: usize| {
            let v = u32::from_le_bytes([h[i], h[i + 1], h[i + 2], h[i + 3]]);
            if swapped {
                v.swap_bytes()
            } else {
                v
            }
        };
        let header = PcapHeader {
            swapped,
            version_major: u16_at(4),
            version_minor: u16_at(6),
            snaplen: u32_at(16),
            linktype: u32_at(20),
        };
        if header.linktype != LINKTYPE_ETHERNET {
            return Err(PcapError::UnsupportedLinkType(header.linktype));
        }
        Ok(PcapReader {
            inner,
            header,
            offset: 24,
        })
    }

    pub fn header(&self) -> PcapHeader {
        self.header
    }

    fn field(&self, b: &[u8]) -> u32 {
        let v = u32::from_le_bytes([b[0], b[1], b[2], b[3]]);
        if self.header.swapped {
            v.swap_bytes()
        } else {
            v
        }
    }

    pub fn next_frame(&mut self) -> Result<Option<TimestampedFrame>, PcapError> {
        let mut rec = [0u8; 16];
        if !read_full(&mut self.inner, &mut rec, self.offset)? {
            return Ok(None);
        }
        let sec = self.field(&rec[0..4]);
        let usec = self.field(&rec[4..8]);
        let incl = self.field(&rec[8..12]);
        if incl > MAX_RECORD || usec >= 1_000_000 {
            return Err(PcapError::TruncatedRecord {
                offset: self.offset,
            });
        }
        let mut data = vec![0u8; incl as usize];
        if !read_full(&mut self.inner, &mut data, self.offset)? && incl > 0 {
            return Err(PcapError::TruncatedRecord {
                offset: self.offset,
            });
        }
        self.offset += 16 + u64::from(incl);
        Ok(Some(TimestampedFrame::from_micros(
            u64::from(sec) * 1_000_000 + u64::from(usec),
            data,
        )))
    }
}

impl<R: Read> Iterator for PcapReader<R> {
    type Item = Result<TimestampedFrame, PcapError>;
    fn next(&mut self) -> Option<Self::Item> {
        self.next_frame().transpose()
    }
}

pub fn open_pcap(path: impl AsRef<Path>) -> Result<PcapReader<BufReader<File>>, PcapError> {
    PcapReader::new(BufReader::new(File::open(path)?))
}

pub fn read_pcap(path: impl AsRef<Path>) -> Result<Vec<TimestampedFrame>, PcapError> {
    open_pcap(path)?.collect()
}

pub struct PcapWriter<W: Write> {
    inner: W,
    last_micros: Option<u64>,
    written: usize,
}

impl<W: Write> PcapWriter<W> {
    pub fn new(mut inner: W) -> Result<Self, PcapError> {
        let mut h = Vec::with_capacity(24);
        h.extend_from_slice(&MAGIC_MICROS.to_le_bytes());
        h.extend_from_slice(&2u16.to_le_bytes());
        h.extend_from_slice(&4u16.to_le_bytes());
        h.extend_from_slice(&0i32.to_le_bytes()); // thiszone
        h.extend_from_slice(&0u32.to_le_bytes()); // sigfigs
        h.extend_from_slice(&DEFAULT_SNAPLEN.max(MAX_RECORD).to_le_bytes());
        h.extend_from_slice(&LINKTYPE_ETHERNET.to_le_bytes());
        inner.write_all(&h)?;
        Ok(PcapWriter {
            inner,
            last_micros: None,
            written: 0,
        })
    }

    pub fn write_frame(&mut self, frame: &TimestampedFrame) -> Result<(), PcapError> {
        let micros = frame.ts_micros()?;
        if self.last_micros.is_some_and(|last| micros < last) {
            return Err(PcapError::OutOfOrder {
                index: self.written,
            });
        }
        let len = frame.data.len() as u32;
        let mut rec = [0u8; 16];
        rec[0..4].copy_from_slice(&((micros / 1_000_000) as u32).to_le_bytes());
        rec[4..8].copy_from_slice(&((micros % 1_000_000) as u32).to_le_bytes());
        rec[8..12].copy_from_slice(&len.to_le_bytes());
        rec[12..16].copy_from_slice(&len.to_le_bytes());
        self.inner.write_all(&rec)?;
        self.inner.write_all(&frame.data)?;
        self.last_micros = Some(micros);
        self.written += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W, PcapError> {
        self.inner.flush()?;
        Ok(self.inner)
    }
}

/// Writes `frames` to `path`. Ordering and timestamps are validated before
/// the file is created.
pub fn write_pcap(path: impl AsRef<Path>, frames: &[TimestampedFrame]) -> Result<(), PcapError> {
    let mut last = None;
    for (index, f) in frames.iter().enumerate() {
        let m = f.ts_micros()?;
        if last.is_some_and(|l| m < l) {
            return Err(PcapError::OutOfOrder { index });
        }
        last = Some(m);
    }
    let mut w = PcapWriter::new(BufWriter::new(File::create(path)?))?;
    for f in frames {
        w.write_frame(f)?;
    }
    w.finish()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn to_bytes(frames: &[TimestampedFrame]) -> Vec<u8> {
        let mut w = PcapWriter::new(Vec::new()).unwrap();
        for f in frames {
            w.write_frame(f).unwrap();
        }
        w.finish().unwrap()
    }

    #[test]
    fn empty_capture_is_header_only() {
        let bytes = to_bytes(&[]);
        assert_eq!(bytes.len(), 24);
        assert_eq!(&bytes[..4], &[0xD4, 0xC3, 0xB2, 0xA1]);
        assert_eq!(PcapReader::new(&bytes[..]).unwrap().count(), 0);
    }

    #[test]
    fn three_frames_round_trip() {
        let frames: Vec<_> = (0..3u64)
            .map(|i| {
                TimestampedFrame::from_micros(1_700_000_000_000_000 + i * 250, vec![i as u8; 60])
            })
            .collect();
        let bytes = to_bytes(&frames);
        let back: Vec<_> = PcapReader::new(&bytes[..])
            .unwrap()
            .collect::<Result<_, _>>()
            .unwrap();
        assert_eq!(back, frames);
        assert!(back.windows(2).all(|w| w[0].ts <= w[1].ts));
    }

    #[test]
    fn big_endian_files_are_read() {
        let mut b = Vec::new();
        b.extend_from_slice(&MAGIC_MICROS.to_be_bytes());
        b.extend_from_slice(&2u16.to_be_bytes());
        b.extend_from_slice(&4u16.to_be_bytes());
        b.extend_from_slice(&[0; 8]);
        b.extend_from_slice(&65535u32.to_be_bytes());
        b.extend_from_slice(&1u32.to_be_bytes());
        b.extend_from_slice(&10u32.to_be_bytes());
        b.extend_from_slice(&5u32.to_be_bytes());
        b.extend_from_slice(&3u32.to_be_bytes());
        b.extend_from_slice(&3u32.to_be_bytes());
        b.extend_from_slice(&[7, 8, 9]);
        let r = PcapReader::new(&b[..]).unwrap();
        assert!(r.header().swapped);
        let frames: Vec<_> = r.collect::<Result<_, _>>().unwrap();
        assert_eq!(
            frames,
            [TimestampedFrame::from_micros(10_000_005, vec![7, 8, 9])]
        );
    }

    #[test]
    fn rejects_bad_headers() {
        let mut bytes = to_bytes(&[]);
        bytes[20] = 101;
        assert!(matches!(
            PcapReader::new(&bytes[..]),
            Err(PcapError::UnsupportedLinkType(101))
        ));
        let mut bytes = to_bytes(&[]);
        bytes[0] = 0x4D;
        bytes[1] = 0x3C; // nanosecond magic
        assert!(matches!(
            PcapReader::new(&bytes[..]),
            Err(PcapError::BadMagic(_))
        ));
        assert!(matches!(
            PcapReader::new(&[0u8; 10][..]),
            Err(PcapError::TruncatedRecord { .. })
        ));
    }

    #[test]
    fn truncated_record_is_reported() {
        let bytes = to_bytes(&[TimestampedFrame::from_micros(1, vec![1; 40])]);
        for cut in [30, 50] {
            let mut r = PcapReader::new(&bytes[..cut]).unwrap();
            assert!(
                matches!(
                    r.next_frame(),
                    Err(PcapError::TruncatedRecord { offset: 24 })
                ),
                "cut {cut}"
            );
        }
    }

    #[test]
    fn out_of_order_is_rejected_before_writing() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.pcap");
        let frames = [
            TimestampedFrame::from_micros(10, vec![]),
            TimestampedFrame::from_micros(5, vec![]),
        ];
        assert!(matches!(
            write_pcap(&path, &frames),
            Err(PcapError::OutOfOrder { index: 1 })
        ));
        assert!(!path.exists());
    }

    #[test]
    fn timestamp_conversion_is_exact_at_microseconds() {
        for m in [
            0u64,
            1,
            999_999,
            1_000_000,
            1_700_000_000_123_456,
            4_000_000_000_999_999,
        ] {
            let ts = micros_to_secs(m);
            assert_eq!(secs_to_micros(ts).unwrap(), m);
        }
        assert!(secs_to_micros(-1.0).is_err());
        assert!(secs_to_micros(f64::NAN).is_err());
    }
}
