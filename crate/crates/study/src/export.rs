//! Tabular export and re-import of aggregate rows.

use std::io::Cursor;
use std::str::FromStr;

use calamine::{Data, Reader, Xlsx};
use rust_xlsxwriter::{Format, Workbook};
use serde::{Deserialize, Serialize};

use crate::aggregate::AggregateRow;
use crate::store::{from_jsonl, to_jsonl};
use crate::StudyError;

pub const HEADERS: [&str; 8] = [
    "Agent ID",
    "Gender",
    "Shopping Freq.",
    "Total Actions",
    "Filter Clicks",
    "SUS Score",
    "Filter Satisfaction",
    "Flagged",
];

const SHEET: &str = "Agent Behavior";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Csv,
    Xlsx,
    Jsonl,
}

impl ExportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ExportFormat::Csv => "csv",
            ExportFormat::Xlsx => "xlsx",
            ExportFormat::Jsonl => "jsonl",
        }
    }

    pub fn content_type(self) -> &'static str {
        match self {
            ExportFormat::Csv => "text/csv; charset=utf-8",
            ExportFormat::Xlsx => "application/vnd.openxmlformats-officedocument.spreadsheetml.sheet",
            ExportFormat::Jsonl => "application/x-ndjson",
        }
    }
}

impl FromStr for ExportFormat {
    type Err = StudyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(ExportFormat::Csv),
            "xlsx" | "excel" => Ok(ExportFormat::Xlsx),
            "jsonl" | "ndjson" => Ok(ExportFormat::Jsonl),
            other => Err(StudyError::Config(format!("unknown export format {other:?} (csv, xlsx or jsonl)"))),
        }
    }
}

/// Shortest text that parses back to the same value; one decimal when that suffices.
fn fmt_f64(x: f64) -> String {
    let short = format!("{x:.1}");
    if short.parse::<f64>().ok() == Some(x) {
        short
    } else {
        format!("{x}")
    }
}

fn import_err(m: impl std::fmt::Display) -> StudyError {
    StudyError::Import(m.to_string())
}

pub fn export_rows(rows: &[AggregateRow], format: ExportFormat) -> Result<Vec<u8>, StudyError> {
    match format {
        ExportFormat::Csv => to_csv(rows),
        ExportFormat::Xlsx => to_xlsx(rows),
        ExportFormat::Jsonl => Ok(to_jsonl(rows).into_bytes()),
    }
}

pub fn import_rows(bytes: &[u8], format: ExportFormat) -> Result<Vec<AggregateRow>, StudyError> {
    match format {
        ExportFormat::Csv => from_csv(bytes),
        ExportFormat::Xlsx => from_xlsx(bytes),
        ExportFormat::Jsonl => {
            let text = std::str::from_utf8(bytes).map_err(import_err)?;
            from_jsonl(text).map_err(import_err)
        }
    }
}

fn to_csv(rows: &[AggregateRow]) -> Result<Vec<u8>, StudyError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(HEADERS).map_err(import_err)?;
    for r in rows {
        w.write_record([
            r.agent_id.clone(),
            r.gender.clone(),
            r.shopping_frequency.clone(),
            r.total_actions.to_string(),
            r.filter_clicks.to_string(),
            r.sus_score.map(fmt_f64).unwrap_or_default(),
            r.filter_satisfaction.map(|v| v.to_string()).unwrap_or_default(),
            r.flagged.to_string(),
        ])
        .map_err(import_err)?;
    }
    w.into_inner().map_err(import_err)
}

fn norm_header(h: &str) -> String {
    h.trim().to_ascii_lowercase().chars().filter(|c| c.is_ascii_alphanumeric()).collect()
}

/// Column positions, found by header name.
struct Columns([Option<usize>; 8]);

impl Columns {
    fn find(headers: &[String]) -> Result<Self, StudyError> {
        let aliases: [&[&str]; 8] = [
            &["agentid", "agent"],
            &["gender"],
            &["shoppingfreq", "shoppingfrequency"],
            &["totalactions"],
            &["filterclicks"],
            &["susscore", "sus"],
            &["filtersatisfaction", "satisfaction"],
            &["flagged"],
        ];
        let normed: Vec<String> = headers.iter().map(|h| norm_header(h)).collect();
        let mut cols = [None; 8];
        for (i, names) in aliases.iter().enumerate() {
            cols[i] = normed.iter().position(|h| names.contains(&h.as_str()));
            if cols[i].is_none() && i < 5 {
                return Err(import_err(format!("missing column {:?}", HEADERS[i])));
            }
        }
        Ok(Self(cols))
    }
}

fn parse_row(cells: &[String], cols: &Columns, line: usize) -> Result<AggregateRow, StudyError> {
    let raw = |i: usize| cols.0[i].and_then(|c| cells.get(c)).map(String::as_str).unwrap_or("");
    let get = |i: usize| raw(i).trim();
    let bad = |col: usize, v: &str| import_err(format!("row {line}: bad {} {v:?}", HEADERS[col]));
    let count = |i: usize| get(i).parse::<usize>().map_err(|_| bad(i, get(i)));
    Ok(AggregateRow {
        agent_id: raw(0).to_string(),
        gender: raw(1).to_string(),
        shopping_frequency: raw(2).to_string(),
        total_actions: count(3)?,
        filter_clicks: count(4)?,
        sus_score: match get(5) {
            "" => None,
            v => Some(v.parse::<f64>().map_err(|_| bad(5, v))?),
        },
        filter_satisfaction: match get(6) {
            "" => None,
            v => Some(v.parse::<i64>().map_err(|_| bad(6, v))?),
        },
        flagged: match get(7).to_ascii_lowercase().as_str() {
            "" | "false" | "0" | "no" => false,
            "true" | "1" | "yes" => true,
            v => return Err(bad(7, v)),
        },
    })
}

fn from_csv(bytes: &[u8]) -> Result<Vec<AggregateRow>, StudyError> {
    let mut r = csv::ReaderBuilder::new().from_reader(bytes);
    let headers: Vec<String> = r.headers().map_err(import_err)?.iter().map(str::to_string).collect();
    let cols = Columns::find(&headers)?;
    r.records()
        .enumerate()
        .map(|(i, rec)| {
            let rec = rec.map_err(import_err)?;
            let cells: Vec<String> = rec.iter().map(str::to_string).collect();
            parse_row(&cells, &cols, i + 2)
        })
        .collect()
}

fn xlsx_err(e: rust_xlsxwriter::XlsxError) -> StudyError {
    StudyError::Io(format!("xlsx: {e}"))
}

fn to_xlsx(rows: &[AggregateRow]) -> Result<Vec<u8>, StudyError> {
    let mut book = Workbook::new();
    let sheet = book.add_worksheet();
    sheet.set_name(SHEET).map_err(xlsx_err)?;
    let bold = Format::new().set_bold();
    for (c, h) in HEADERS.iter().enumerate() {
        sheet.write_string_with_format(0, c as u16, *h, &bold).map_err(xlsx_err)?;
    }
    for (i, r) in rows.iter().enumerate() {
        let row = i as u32 + 1;
        // Plain integer ids go in as numbers so spreadsheets sort them numerically.
        match r.agent_id.parse::<u32>() {
            Ok(n) if n.to_string() == r.agent_id => sheet.write_number(row, 0, n as f64),
            _ => sheet.write_string(row, 0, &r.agent_id),
        }
        .map_err(xlsx_err)?;
        sheet.write_string(row, 1, &r.gender).map_err(xlsx_err)?;
        sheet.write_string(row, 2, &r.shopping_frequency).map_err(xlsx_err)?;
        sheet.write_number(row, 3, r.total_actions as f64).map_err(xlsx_err)?;
        sheet.write_number(row, 4, r.filter_clicks as f64).map_err(xlsx_err)?;
        if let Some(s) = r.sus_score {
            sheet.write_number(row, 5, s).map_err(xlsx_err)?;
        }
        if let Some(v) = r.filter_satisfaction {
            sheet.write_number(row, 6, v as f64).map_err(xlsx_err)?;
        }
        sheet.write_boolean(row, 7, r.flagged).map_err(xlsx_err)?;
    }
    book.save_to_buffer().map_err(xlsx_err)
}

fn cell_text(d: &Data) -> String {
    match d {
        Data::Empty => String::new(),
        Data::String(s) => s.clone(),
        Data::Float(f) if f.fract() == 0.0 && f.abs() < 9.0e15 => format!("{}", *f as i64),
        // Rust's float formatting is the shortest round-trip form.
        Data::Float(f) => format!("{f}"),
        Data::Int(i) => i.to_string(),
        Data::Bool(b) => b.to_string(),
        other => other.to_string(),
    }
}

fn from_xlsx(bytes: &[u8]) -> Result<Vec<AggregateRow>, StudyError> {
    let mut book: Xlsx<_> = calamine::open_workbook_from_rs(Cursor::new(bytes.to_vec())).map_err(import_err)?;
    let name = book.sheet_names().first().cloned().ok_or_else(|| import_err("workbook has no sheets"))?;
    let range = book.worksheet_range(&name).map_err(import_err)?;
    let mut rows = range.rows();
    let headers: Vec<String> = rows.next().ok_or_else(|| import_err("sheet is empty"))?.iter().map(cell_text).collect();
    let cols = Columns::find(&headers)?;
    rows.enumerate()
        .filter(|(_, cells)| cells.iter().any(|c| !matches!(c, Data::Empty)))
        .map(|(i, cells)| {
            let text: Vec<String> = cells.iter().map(cell_text).collect();
            parse_row(&text, &cols, i + 2)
        })
        .collect()
}
