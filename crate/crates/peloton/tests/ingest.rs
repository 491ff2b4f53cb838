use peloton::io::{format_split, read_events, write_events, IngestError, InputFormat};
use peloton_core::Event;
use proptest::prelude::*;

fn wide_header(splits: usize) -> String {
    let mut h = String::from("bib");
    for i in 0..splits {
        h.push_str(&format!(",cp{i}"));
    }
    h
}

#[test]
fn wide_row_with_twelve_splits_gives_twelve_events() {
    let splits: Vec<String> = (1..=12).map(|k| format_split(k * 1_200_000)).collect();
    let text = format!("{}\n101,{}\n", wide_header(12), splits.join(","));
    let got = read_events(text.as_bytes(), None).unwrap();
    assert_eq!(got.events.len(), 12);
    assert_eq!(got.control_points, 12);
    assert_eq!(got.events[11], Event::new(101, 11, 14_400_000));
}

#[test]
fn empty_split_cell_is_absent() {
    let text = format!("{}\n7,0:10:00,,0:30:00\n", wide_header(3));
    let got = read_events(text.as_bytes(), Some(InputFormat::Wide)).unwrap();
    assert_eq!(got.events, vec![Event::new(7, 0, 600_000), Event::new(7, 2, 1_800_000)]);
}

#[test]
fn equal_times_order_by_control_point_then_athlete() {
    let text = "athlete_id,control_point,time_ms\n9,1,500\n3,1,500\n5,0,500\n1,0,400\n";
    let got = read_events(text.as_bytes(), None).unwrap();
    let order: Vec<(u64, u32)> = got.events.iter().map(|e| (e.athlete.0, e.cp)).collect();
    assert_eq!(order, [(1, 0), (5, 0), (3, 1), (9, 1)]);
}

#[test]
fn malformed_rows_are_reported_with_line_numbers() {
    let text = "athlete_id,control_point,time_ms\n1,0,100\n2,zero,100\n3,0\n4,0,300\n";
    let got = read_events(text.as_bytes(), None).unwrap();
    assert_eq!(got.events.len(), 2);
    let lines: Vec<u64> = got.rejected.iter().map(|r| r.line).collect();
    assert_eq!(lines, [3, 4]);
    assert!(got.rejected[0].message.contains("control_point"));
}

#[test]
fn fully_rejected_file_is_an_error() {
    let text = format!("{}\n1,soon\n2,later\n", wide_header(1));
    match read_events(text.as_bytes(), None) {
        Err(IngestError::AllRejected { rows: 2, first }) => assert_eq!(first.line, 2),
        other => panic!("unexpected {other:?}"),
    }
    assert!(matches!(read_events("".as_bytes(), None), Err(IngestError::MissingHeader)));
    assert!(matches!(read_events("bib\n1\n".as_bytes(), Some(InputFormat::Wide)), Err(IngestError::NoControlPoints(_))));
}

#[test]
fn header_only_file_is_empty() {
    let got = read_events("athlete_id,control_point,time_ms\n".as_bytes(), None).unwrap();
    assert!(got.events.is_empty() && got.rejected.is_empty());
}

proptest! {
    #[test]
    fn long_layout_round_trips(raw in prop::collection::vec((0u64..500, 0u32..20, 0u64..10_000_000), 0..200)) {
        let mut events: Vec<Event> = raw.into_iter().map(|(a, cp, t)| Event::new(a, cp, t)).collect();
        peloton::sort_events(&mut events);
        let mut buf = Vec::new();
        write_events(&mut buf, &events).unwrap();
        let back = read_events(buf.as_slice(), None).unwrap();
        prop_assert_eq!(back.events, events);
    }

    #[test]
    fn splits_parse_what_they_format(ms in 0u64..100 * 3_600_000) {
        prop_assert_eq!(peloton::io::parse_split(&format_split(ms)), Ok(ms));
    }
}
