mod common;

use common::*;
use proptest::prelude::*;
use uxsim_study::{aggregate, export_rows, import_rows, AggregateRow, Aggregates, ExportFormat};

const TABLE_CSV: &str = include_str!("fixtures/agent_behavior.csv");

#[test]
fn table_fixture_ingests_exactly() {
    let rows = import_rows(TABLE_CSV.as_bytes(), ExportFormat::Csv).unwrap();
    assert_eq!(rows, table_rows());
    let total: usize = rows.iter().map(|r| r.total_actions).sum();
    assert_eq!(total, 286);
}

#[test]
fn sessions_reproduce_table_rows() {
    let expected = table_rows();
    let agg = aggregate(&run_of(&expected));
    assert_eq!(agg.rows, expected);
    let mean = agg.overall.total_actions.mean.unwrap();
    assert!((mean - 14.3).abs() < 1e-3, "{mean}");
    let genders = &agg.groups["Gender"];
    let tally: Vec<(&str, usize)> = genders.iter().map(|(k, v)| (k.as_str(), v.rows)).collect();
    assert_eq!(tally, [("Female", 6), ("Male", 6), ("Non-Binary", 8)]);
    let top = agg.rows.iter().max_by(|a, b| a.sus_score.partial_cmp(&b.sus_score).unwrap()).unwrap();
    assert_eq!((top.agent_id.as_str(), top.sus_score), ("20", Some(77.5)));
    assert_eq!(agg.groups["Shopping Frequency"]["Yearly"].rows, 3);
}

#[test]
fn table_round_trips_through_every_format() {
    let rows = table_rows();
    for fmt in [ExportFormat::Csv, ExportFormat::Xlsx, ExportFormat::Jsonl] {
        let bytes = export_rows(&rows, fmt).unwrap();
        assert_eq!(import_rows(&bytes, fmt).unwrap(), rows, "{fmt:?}");
    }
}

#[test]
fn csv_has_table_headers_and_plain_numbers() {
    let csv = String::from_utf8(export_rows(&table_rows(), ExportFormat::Csv).unwrap()).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "Agent ID,Gender,Shopping Freq.,Total Actions,Filter Clicks,SUS Score,Filter Satisfaction,Flagged"
    );
    assert_eq!(lines.next().unwrap(), "1,Male,Monthly,18,7,45.0,2,false");
    assert_eq!(lines.count(), 19);
}

#[test]
fn empty_exports_keep_headers() {
    let csv = export_rows(&[], ExportFormat::Csv).unwrap();
    assert_eq!(String::from_utf8(csv.clone()).unwrap().lines().count(), 1);
    assert!(import_rows(&csv, ExportFormat::Csv).unwrap().is_empty());
    let xlsx = export_rows(&[], ExportFormat::Xlsx).unwrap();
    assert!(import_rows(&xlsx, ExportFormat::Xlsx).unwrap().is_empty());
    assert!(export_rows(&[], ExportFormat::Jsonl).unwrap().is_empty());
}

#[test]
fn jsonl_has_one_line_per_session() {
    let rows = table_rows();
    let out = String::from_utf8(export_rows(&rows, ExportFormat::Jsonl).unwrap()).unwrap();
    assert_eq!(out.lines().count(), rows.len());
    let first: AggregateRow = serde_json::from_str(out.lines().next().unwrap()).unwrap();
    assert_eq!(first, rows[0]);
}

#[test]
fn format_names() {
    assert_eq!("xlsx".parse::<ExportFormat>().unwrap(), ExportFormat::Xlsx);
    assert_eq!("excel".parse::<ExportFormat>().unwrap(), ExportFormat::Xlsx);
    assert_eq!("CSV".parse::<ExportFormat>().unwrap(), ExportFormat::Csv);
    assert_eq!("ndjson".parse::<ExportFormat>().unwrap(), ExportFormat::Jsonl);
    assert!("pdf".parse::<ExportFormat>().is_err());
}

#[test]
fn unknown_demographics_and_missing_surveys() {
    let mut s = session_for(&table_rows()[0]);
    s.persona = uxsim_core::Persona::example();
    s.survey_answers.clear();
    let mut run = run_of(&[]);
    run.sessions = vec![s];
    let agg = aggregate(&run);
    assert!(agg.rows[0].flagged);
    assert_eq!(agg.rows[0].sus_score, None);
    assert_eq!(agg.overall.rows, 1);
    assert_eq!(agg.overall.flagged, 1);
    assert_eq!(agg.overall.total_actions.n, 0);
    assert_eq!(agg.overall.total_actions.mean, None);
}

#[test]
fn aggregates_json_round_trips() {
    let agg = Aggregates::from_rows(table_rows());
    let back: Aggregates = serde_json::from_str(&agg.to_json()).unwrap();
    assert_eq!(back, agg);
    assert!(agg.to_json().ends_with('\n'));
}

fn text() -> impl Strategy<Value = String> {
    prop_oneof![
        "[A-Za-z -]{0,12}",
        Just(String::new()),
        Just("  padded  ".to_string()),
        Just("comma, \"quoted\"\nline".to_string()),
        Just("Nicht-binär".to_string()),
        Just("007".to_string()),
        Just("12".to_string()),
    ]
}

fn row() -> impl Strategy<Value = AggregateRow> {
    (
        prop_oneof!["[0-9]{1,4}", text()],
        text(),
        text(),
        0usize..10_000,
        0usize..500,
        proptest::option::of((0u32..=40).prop_map(|r| r as f64 * 2.5)),
        proptest::option::of(-3i64..10),
        any::<bool>(),
    )
        .prop_map(|(agent_id, gender, shopping_frequency, total_actions, filter_clicks, sus_score, filter_satisfaction, flagged)| {
            AggregateRow { agent_id, gender, shopping_frequency, total_actions, filter_clicks, sus_score, filter_satisfaction, flagged }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn export_round_trips(rows in proptest::collection::vec(row(), 0..12)) {
        for fmt in [ExportFormat::Csv, ExportFormat::Xlsx, ExportFormat::Jsonl] {
            let bytes = export_rows(&rows, fmt).unwrap();
            prop_assert_eq!(&import_rows(&bytes, fmt).unwrap(), &rows, "{:?}", fmt);
        }
    }

    #[test]
    fn odd_float_scores_round_trip(x in -1e6f64..1e6) {
        let mut r = table_rows().remove(0);
        r.sus_score = Some(x);
        let rows = vec![r];
        for fmt in [ExportFormat::Csv, ExportFormat::Xlsx, ExportFormat::Jsonl] {
            let back = import_rows(&export_rows(&rows, fmt).unwrap(), fmt).unwrap();
            prop_assert_eq!(back[0].sus_score.map(f64::to_bits), Some(x.to_bits()), "{:?}", fmt);
        }
    }
}
