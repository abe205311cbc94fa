use proptest::prelude::*;
use tsn_ids::notice_log::{parse_log, NoticeLog, NoticeRecord};
use tsn_ids::pcap::{PcapReader, PcapWriter, TimestampedFrame};
use tsn_ids_core::{AcceptDecision, Evidence, MacAddr, Notice, Rule, StreamId};

fn frames() -> impl Strategy<Value = Vec<TimestampedFrame>> {
    proptest::collection::vec(
        (
            0u64..5_000_000,
            proptest::collection::vec(any::<u8>(), 0..200),
        ),
        0..40,
    )
    .prop_map(|v| {
        let mut t = 1_700_000_000_000_000u64;
        v.into_iter()
            .map(|(gap, data)| {
                t += gap;
                TimestampedFrame::from_micros(t, data)
            })
            .collect()
    })
}

fn evidence() -> impl Strategy<Value = (Rule, Evidence)> {
    prop_oneof![
        (1.0f64..1e12, 1.0f64..1e6).prop_map(|(bw, rate)| (
            Rule::A1,
            Evidence::ExcessiveRequest {
                bandwidth_bps: bw,
                max_bandwidth_bps: 1_000_000,
                frame_rate: rate,
                max_frame_rate: 8000.0
            }
        )),
        (any::<u32>()).prop_map(|count| (
            Rule::A2,
            Evidence::TooManyRequests {
                count,
                limit: 10,
                window_s: 1.0
            }
        )),
        Just((Rule::A4, Evidence::Dangling)),
        (any::<u16>(), any::<u16>()).prop_map(|(observed, expected)| (
            Rule::A5,
            Evidence::OutOfOrder {
                observed,
                expected,
                decision: AcceptDecision::RogueOutOfRange
            }
        )),
        (any::<u16>(), any::<u8>()).prop_map(|(sequence, copies)| (
            Rule::A5,
            Evidence::ExcessiveCopies {
                sequence,
                copies,
                redundancy: 2
            }
        )),
        (0.0f64..1e9).prop_map(|t| (
            Rule::A7,
            Evidence::MemberSilent {
                last_frame_at: t,
                silent_s: 2.5,
                timeout_s: 2.0
            }
        )),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn pcap_round_trips(frames in frames()) {
        let mut w = PcapWriter::new(Vec::new()).unwrap();
        for f in &frames {
            w.write_frame(f).unwrap();
        }
        let bytes = w.finish().unwrap();
        let back: Vec<_> = PcapReader::new(&bytes[..]).unwrap().collect::<Result<_, _>>().unwrap();
        prop_assert_eq!(back.len(), frames.len());
        for (a, b) in back.iter().zip(&frames) {
            prop_assert_eq!(&a.data, &b.data);
            prop_assert_eq!(a.ts_micros().unwrap(), b.ts_micros().unwrap());
        }
    }

    #[test]
    fn pcap_reader_survives_corruption(frames in frames(), flips in proptest::collection::vec((any::<usize>(), any::<u8>()), 0..6), cut in any::<usize>()) {
        let mut w = PcapWriter::new(Vec::new()).unwrap();
        for f in &frames {
            w.write_frame(f).unwrap();
        }
        let mut bytes = w.finish().unwrap();
        for (at, v) in flips {
            let n = bytes.len();
            bytes[at % n] ^= v;
        }
        bytes.truncate(cut % (bytes.len() + 1));
        if let Ok(r) = PcapReader::new(&bytes[..]) {
            // stops at the first error
            for item in r.take(1000) {
                if item.is_err() {
                    break;
                }
            }
        }
    }

    #[test]
    fn log_lines_parse_back(ts in 0.0f64..2e9, uid in any::<u16>(), (rule, evidence) in evidence()) {
        let n = Notice::new(rule, ts, Some(StreamId::new(MacAddr([2, 0, 0, 0, 0, 1]), uid)), evidence);
        let mut log = NoticeLog::new(Vec::new(), true);
        let rec = log.emit(&n).unwrap();
        let parsed = parse_log(&log.into_inner()[..]).unwrap();
        prop_assert_eq!(parsed.len(), 1);
        prop_assert_eq!(&parsed[0], &rec);
        prop_assert!(parsed[0].is_schema_valid());
        prop_assert_eq!(parsed[0].clone(), NoticeRecord::from_notice(&n));
    }
}

#[test]
fn malformed_log_line_reports_position() {
    let err = parse_log(&b"\n{\"bad\": 1}\n"[..]).unwrap_err();
    assert!(err.to_string().contains('2'), "{err}");
}
