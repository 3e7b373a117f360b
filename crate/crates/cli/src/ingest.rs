//! Delimited-text input: `id,x1,...,xk,score` or `id,dtr,score`.

use std::path::Path;

use cfair::{
    compute_dtr, normalize_coords, DtRVector, Geometry, Mode, NormOrder, ScoredDataset,
    SpatialPoint,
};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

/// Shape of the feature columns between `id` and `score`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    /// A single pre-normalized `dtr` column in `[0, 1]`.
    Dtr,
    /// `k` raw coordinate columns.
    Coordinates(usize),
}

impl Layout {
    pub fn width(self) -> usize {
        match self {
            Layout::Dtr => 1,
            Layout::Coordinates(k) => k,
        }
    }
}

#[derive(Debug, Clone)]
pub struct IngestOptions {
    /// Inferred from the header when absent: `dtr` or a reference point means
    /// distance-based, bare coordinates mean zone-based.
    pub mode: Option<Mode>,
    pub reference: Option<Vec<f64>>,
    pub p: NormOrder,
    pub delimiter: u8,
    pub skip_bad: bool,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            mode: None,
            reference: None,
            p: NormOrder::EUCLIDEAN,
            delimiter: b',',
            skip_bad: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rejected {
    pub line: u64,
    pub reason: String,
}

/// Parsed rows before any geometry is built.
#[derive(Debug, Clone)]
pub struct Table {
    pub columns: Vec<String>,
    pub layout: Layout,
    pub ids: Vec<String>,
    pub features: Vec<Vec<f64>>,
    pub scores: Option<Vec<f64>>,
    pub rejected: Vec<Rejected>,
    /// Hex SHA-256 of the raw input bytes.
    pub digest: String,
}

#[derive(Debug, Clone)]
pub struct Ingested {
    pub table: Table,
    pub dataset: ScoredDataset,
}

impl Ingested {
    pub fn ids(&self) -> &[String] {
        &self.table.ids
    }

    pub fn scores(&self) -> &[f64] {
        self.dataset.scores()
    }
}

pub fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn read_input(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| CliError::io(path, e))
}

fn parse_value(field: &str, column: &str) -> std::result::Result<f64, String> {
    let v: f64 = field
        .parse()
        .map_err(|_| format!("column '{column}': '{field}' is not a number"))?;
    if !v.is_finite() {
        return Err(format!("column '{column}': '{field}' is not finite"));
    }
    Ok(v)
}

fn header_layout(columns: &[String], with_score: bool) -> Result<(Layout, bool)> {
    let bad = |msg: &str| CliError::Data(format!("line 1: {msg}"));
    if columns.first().map(|c| c.eq_ignore_ascii_case("id")) != Some(true) {
        return Err(bad("first column must be 'id'"));
    }
    let has_score = columns.len() > 1 && columns.last().unwrap().eq_ignore_ascii_case("score");
    if with_score && !has_score {
        return Err(bad("last column must be 'score'"));
    }
    let features = &columns[1..columns.len() - usize::from(has_score)];
    if features.is_empty() {
        return Err(bad("no feature columns between 'id' and 'score'"));
    }
    let is_dtr = |c: &String| c.eq_ignore_ascii_case("dtr");
    if features.iter().any(is_dtr) {
        if features.len() != 1 {
            return Err(bad("a 'dtr' column cannot be mixed with coordinate columns"));
        }
        return Ok((Layout::Dtr, has_score));
    }
    Ok((Layout::Coordinates(features.len()), has_score))
}

/// Parses a delimited table. The score column is mandatory when `with_score`
/// and optional otherwise.
pub fn parse_table(bytes: &[u8], delimiter: u8, skip_bad: bool, with_score: bool) -> Result<Table> {
    if bytes.iter().all(u8::is_ascii_whitespace) {
        return Err(CliError::Data("input is empty".into()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let mut records = reader.records();

    let header = match records.next() {
        Some(Ok(h)) => h,
        Some(Err(e)) => return Err(CliError::Data(format!("line 1: {e}"))),
        None => return Err(CliError::Data("input is empty".into())),
    };
    let columns: Vec<String> = header.iter().map(str::to_string).collect();
    let (layout, has_score) = header_layout(&columns, with_score)?;
    let width = layout.width();

    let mut table = Table {
        columns: columns.clone(),
        layout,
        ids: Vec::new(),
        features: Vec::new(),
        scores: has_score.then(Vec::new),
        rejected: Vec::new(),
        digest: digest(bytes),
    };

    for record in records {
        let (line, parsed) = match record {
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                (line, Err(e.to_string()))
            }
            Ok(record) => {
                let line = record.position().map_or(0, |p| p.line());
                if record.len() == 1 && record[0].is_empty() {
                    continue;
                }
                (line, parse_row(&record, &columns, layout, has_score))
            }
        };
        match parsed {
            Ok((id, features, score)) => {
                table.ids.push(id);
                table.features.push(features);
                if let (Some(scores), Some(s)) = (table.scores.as_mut(), score) {
                    scores.push(s);
                }
            }
            Err(reason) if skip_bad => table.rejected.push(Rejected { line, reason }),
            Err(reason) => return Err(CliError::Row { line, reason }),
        }
    }
    debug_assert!(table.features.iter().all(|f| f.len() == width));
    Ok(table)
}

type Row = (String, Vec<f64>, Option<f64>);

fn parse_row(
    record: &csv::StringRecord,
    columns: &[String],
    layout: Layout,
    has_score: bool,
) -> std::result::Result<Row, String> {
    if record.len() != columns.len() {
        return Err(format!("expected {} fields, found {}", columns.len(), record.len()));
    }
    let id = record[0].to_string();
    if id.is_empty() {
        return Err("missing id".into());
    }
    let width = layout.width();
    let features = (1..=width)
        .map(|i| parse_value(&record[i], &columns[i]))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    if layout == Layout::Dtr && !(0.0..=1.0).contains(&features[0]) {
        return Err(format!("dtr {} outside [0, 1]", features[0]));
    }
    let score = if has_score {
        let s = parse_value(&record[width + 1], "score")?;
        if !(0.0..=1.0).contains(&s) {
            return Err(format!("score {s} outside [0, 1]"));
        }
        Some(s)
    } else {
        None
    };
    Ok((id, features, score))
}

/// Resolves the fairness setting implied by the header and flags.
pub fn resolve_mode(layout: Layout, options: &IngestOptions) -> Result<Mode> {
    let usage = |m: &str| Err(CliError::Usage(m.into()));
    match (layout, options.mode, &options.reference) {
        (Layout::Dtr, Some(Mode::Zone), _) => usage("zone mode needs coordinate columns, found 'dtr'"),
        (Layout::Dtr, _, Some(_)) => usage("--reference needs coordinate columns, found 'dtr'"),
        (Layout::Dtr, _, None) => Ok(Mode::Distance),
        (Layout::Coordinates(_), Some(Mode::Zone), Some(_)) => usage("--reference only applies in distance mode"),
        (Layout::Coordinates(_), Some(Mode::Distance), None) => {
            usage("distance mode over coordinates needs --reference")
        }
        (Layout::Coordinates(k), _, Some(r)) if r.len() != k => Err(CliError::Usage(format!(
            "--reference has {} coordinates, input has {k}",
            r.len()
        ))),
        (Layout::Coordinates(_), _, Some(_)) => Ok(Mode::Distance),
        (Layout::Coordinates(_), _, None) => Ok(Mode::Zone),
    }
}

fn points(rows: &[Vec<f64>]) -> Result<Vec<SpatialPoint>> {
    Ok(rows
        .iter()
        .map(|r| SpatialPoint::new(r.clone()))
        .collect::<cfair::Result<Vec<_>>>()?)
}

/// Builds the geometry for parsed rows: DtR values normalized by their
/// maximum, or coordinates mapped onto `[-1, 1]`.
pub fn geometry_for(table: &Table, options: &IngestOptions) -> Result<Geometry> {
    let mode = resolve_mode(table.layout, options)?;
    if table.ids.is_empty() {
        return Err(CliError::Data("no data rows".into()));
    }
    Ok(match (table.layout, mode) {
        (Layout::Dtr, _) => Geometry::Distance(DtRVector::from_normalized(
            table.features.iter().map(|f| f[0]).collect(),
            options.p,
        )?),
        (Layout::Coordinates(_), Mode::Distance) => {
            let reference = SpatialPoint::new(options.reference.clone().unwrap_or_default())?;
            Geometry::Distance(compute_dtr(&points(&table.features)?, &reference, options.p)?)
        }
        (Layout::Coordinates(_), Mode::Zone) => Geometry::Zone {
            points: normalize_coords(&points(&table.features)?)?,
            p: options.p,
        },
    })
}

pub fn ingest_bytes(bytes: &[u8], options: &IngestOptions) -> Result<Ingested> {
    let table = parse_table(bytes, options.delimiter, options.skip_bad, true)?;
    let geometry = geometry_for(&table, options)?;
    let scores = table.scores.clone().unwrap_or_default();
    let dataset = ScoredDataset::new(geometry, scores)?;
    Ok(Ingested { table, dataset })
}

pub fn ingest(path: &Path, options: &IngestOptions) -> Result<Ingested> {
    ingest_bytes(&read_input(path)?, options)
}
