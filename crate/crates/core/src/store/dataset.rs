//! Flat-file dataset import and canonical export.
//!
//! The canonical CSV layout is [`CSV_COLUMNS`]; JSON-lines exports carry the
//! same records in their nested serde form. Imports go through a
//! [`ColumnMapping`] so externally produced rating files (with their own
//! column names) can be ingested; invalid rows are collected as rejects
//! rather than aborting the import.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::record::{format_timestamp, DgEntry, RatingRecord};
use crate::dg::{compute_dg_score, DgScoresheet, DgWeights, ScoreBreakdown};
use crate::error::{Error, Result, ValidationError};
use crate::protocol::TestVariant;
use crate::scale::{validate_cmos, Score};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    Language,
    Variant,
    CampaignId,
    RaterId,
    PageIndex,
    UtteranceId,
    SystemId,
    SlotId,
    Score,
    Cmos,
    Mp,
    Sp,
    Us,
    Da,
    Sef,
    Ws,
    Liveliness,
    VoiceQuality,
    Rhythm,
    Revised,
    DgPerceptualMean,
    DgTotalPenalty,
    DgRaw,
    DgClamped,
    SubmittedAt,
}

impl Field {
    pub const ALL: [Field; 25] = [
        Field::Language,
        Field::Variant,
        Field::CampaignId,
        Field::RaterId,
        Field::PageIndex,
        Field::UtteranceId,
        Field::SystemId,
        Field::SlotId,
        Field::Score,
        Field::Cmos,
        Field::Mp,
        Field::Sp,
        Field::Us,
        Field::Da,
        Field::Sef,
        Field::Ws,
        Field::Liveliness,
        Field::VoiceQuality,
        Field::Rhythm,
        Field::Revised,
        Field::DgPerceptualMean,
        Field::DgTotalPenalty,
        Field::DgRaw,
        Field::DgClamped,
        Field::SubmittedAt,
    ];

    pub fn name(self) -> &'static str {
        CSV_COLUMNS[self as usize]
    }

    fn mandatory(self) -> bool {
        matches!(
            self,
            Field::Variant | Field::RaterId | Field::UtteranceId | Field::SystemId
        )
    }

    const SHEET: [Field; 9] = [
        Field::Mp,
        Field::Sp,
        Field::Us,
        Field::Da,
        Field::Sef,
        Field::Ws,
        Field::Liveliness,
        Field::VoiceQuality,
        Field::Rhythm,
    ];

    const BREAKDOWN: [Field; 4] = [
        Field::DgPerceptualMean,
        Field::DgTotalPenalty,
        Field::DgRaw,
        Field::DgClamped,
    ];
}

/// Canonical CSV header, in column order.
pub const CSV_COLUMNS: [&str; 25] = [
    "language",
    "variant",
    "campaign_id",
    "rater_id",
    "page_index",
    "utterance_id",
    "system_id",
    "slot_id",
    "score",
    "cmos",
    "mp",
    "sp",
    "us",
    "da",
    "sef",
    "ws",
    "liveliness",
    "voice_quality",
    "rhythm",
    "revised",
    "dg_perceptual_mean",
    "dg_total_penalty",
    "dg_raw",
    "dg_clamped",
    "submitted_at",
];

/// Where a record field comes from: a source column, or a constant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Source {
    Column(String),
    Const {
        #[serde(rename = "const")]
        value: String,
    },
}

fn default_strict() -> bool {
    true
}

/// Maps source columns onto [`RatingRecord`] fields.
///
/// Loaded from JSON such as
/// `{"columns": {"rater_id": "annotator", "variant": {"const": "MUSHRA"}},
///   "system_aliases": {"GT": "REF"}}`.
/// Unmapped optional fields are left empty; an unmapped `page_index` is
/// derived from the order in which each rater's utterances appear.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnMapping {
    pub columns: BTreeMap<Field, Source>,
    #[serde(default)]
    pub system_aliases: BTreeMap<String, String>,
    /// Weights for scoresheets imported without breakdown columns.
    #[serde(default)]
    pub dg_weights: DgWeights,
    /// Strict mappings require every named column to exist.
    #[serde(default = "default_strict")]
    pub strict: bool,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        Self::canonical()
    }
}

impl ColumnMapping {
    /// Identity mapping over the canonical columns; absent optional columns
    /// are tolerated.
    pub fn canonical() -> Self {
        ColumnMapping {
            columns: Field::ALL
                .iter()
                .map(|&f| (f, Source::Column(f.name().to_string())))
                .collect(),
            system_aliases: BTreeMap::new(),
            dg_weights: DgWeights::default(),
            strict: false,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mapping: ColumnMapping =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("mapping: {e}")))?;
        mapping.check_fields()?;
        Ok(mapping)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    fn is_canonical(&self) -> bool {
        *self == Self::canonical()
    }

    fn check_fields(&self) -> Result<()> {
        for f in Field::ALL.iter().filter(|f| f.mandatory()) {
            if !self.columns.contains_key(f) {
                return Err(Error::Config(format!("mandatory field {} is not mapped", f.name())));
            }
        }
        if !self.columns.contains_key(&Field::Score) && !self.columns.contains_key(&Field::Cmos) {
            return Err(Error::Config("one of score or cmos must be mapped".into()));
        }
        Ok(())
    }

    /// Binds each mapped field to a header position or constant.
    fn resolve(&self, header: &[String]) -> Result<Resolved> {
        self.check_fields()?;
        let index: HashMap<&str, usize> = header
            .iter()
            .enumerate()
            .map(|(i, h)| (h.as_str(), i))
            .collect();
        let mut bound = BTreeMap::new();
        for (&field, source) in &self.columns {
            match source {
                Source::Const { value } => {
                    bound.insert(field, Binding::Const(value.clone()));
                }
                Source::Column(name) => match index.get(name.as_str()) {
                    Some(&i) => {
                        bound.insert(field, Binding::Column(i));
                    }
                    None if self.strict || field.mandatory() => {
                        return Err(Error::Config(format!(
                            "column {name:?} (for {}) not found in header",
                            field.name()
                        )))
                    }
                    None => {}
                },
            }
        }
        if !bound.contains_key(&Field::Score) && !bound.contains_key(&Field::Cmos) {
            return Err(Error::Config("neither a score nor a cmos column is present".into()));
        }
        Ok(Resolved { bound })
    }
}

#[derive(Debug, Clone)]
enum Binding {
    Column(usize),
    Const(String),
}

struct Resolved {
    bound: BTreeMap<Field, Binding>,
}

impl Resolved {
    fn get<'a>(&'a self, row: &'a [String], field: Field) -> Option<&'a str> {
        let v = match self.bound.get(&field)? {
            Binding::Column(i) => row.get(*i)?.as_str(),
            Binding::Const(c) => c.as_str(),
        };
        let v = v.trim();
        (!v.is_empty()).then_some(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reject {
    /// 1-based line number in the source file (header is line 1 for CSV).
    pub line: usize,
    pub reason: String,
    pub raw: String,
}

#[derive(Debug, Clone, Default)]
pub struct ImportOutcome {
    pub records: Vec<RatingRecord>,
    pub rejects: Vec<Reject>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetFormat {
    Csv,
    JsonLines,
}

impl DatasetFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase) {
            Some(e) if e == "csv" => Ok(DatasetFormat::Csv),
            Some(e) if e == "jsonl" || e == "ndjson" || e == "json" => Ok(DatasetFormat::JsonLines),
            _ => Err(Error::Format(format!(
                "{}: expected a .csv or .jsonl file",
                path.display()
            ))),
        }
    }
}

pub fn import_dataset(path: impl AsRef<Path>, mapping: &ColumnMapping) -> Result<ImportOutcome> {
    let path = path.as_ref();
    let format = DatasetFormat::from_path(path)?;
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    import_reader(BufReader::new(file), format, mapping)
}

struct Parsed {
    record: RatingRecord,
    line: usize,
    raw: String,
    page_given: bool,
}

pub fn import_reader<R: Read>(
    reader: R,
    format: DatasetFormat,
    mapping: &ColumnMapping,
) -> Result<ImportOutcome> {
    let mut parsed = Vec::new();
    let mut rejects = Vec::new();
    match format {
        DatasetFormat::Csv => read_csv_rows(reader, mapping, &mut parsed, &mut rejects)?,
        DatasetFormat::JsonLines => read_jsonl_rows(reader, mapping, &mut parsed, &mut rejects)?,
    }
    Ok(finish(parsed, rejects))
}

fn read_csv_rows<R: Read>(
    reader: R,
    mapping: &ColumnMapping,
    parsed: &mut Vec<Parsed>,
    rejects: &mut Vec<Reject>,
) -> Result<()> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let resolved = mapping.resolve(&header)?;
    for (i, row) in rdr.records().enumerate() {
        let line = i + 2;
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                rejects.push(Reject {
                    line,
                    reason: format!("malformed row: {e}"),
                    raw: String::new(),
                });
                continue;
            }
        };
        let cells: Vec<String> = row.iter().map(str::to_string).collect();
        let raw = cells.join(",");
        if cells.len() != header.len() {
            rejects.push(Reject {
                line,
                reason: format!("expected {} fields, found {}", header.len(), cells.len()),
                raw,
            });
            continue;
        }
        match parse_row(&resolved, &cells, mapping) {
            Ok((record, page_given)) => parsed.push(Parsed {
                record,
                line,
                raw,
                page_given,
            }),
            Err(e) => rejects.push(Reject {
                line,
                reason: e.to_string(),
                raw,
            }),
        }
    }
    Ok(())
}

fn read_jsonl_rows<R: Read>(
    reader: R,
    mapping: &ColumnMapping,
    parsed: &mut Vec<Parsed>,
    rejects: &mut Vec<Reject>,
) -> Result<()> {
    mapping.check_fields()?;
    let direct = mapping.is_canonical();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = i + 1;
        let text = line.map_err(|e| Error::Format(format!("line {line_no}: {e}")))?;
        if text.trim().is_empty() {
            continue;
        }
        let reject = |reason: String| Reject {
            line: line_no,
            reason,
            raw: text.clone(),
        };
        let object: serde_json::Map<String, serde_json::Value> = match serde_json::from_str(&text) {
            Ok(o) => o,
            Err(e) => {
                rejects.push(reject(format!("malformed JSON: {e}")));
                continue;
            }
        };
        let result = if direct {
            parse_direct(&object)
        } else {
            let header: Vec<String> = object.keys().cloned().collect();
            let cells: Vec<String> = object.values().map(json_cell).collect();
            // per-row binding: a missing column rejects the row, not the import
            match mapping.resolve(&header) {
                Ok(resolved) => parse_row(&resolved, &cells, mapping).map_err(|e| e.to_string()),
                Err(e) => Err(e.to_string()),
            }
        };
        match result {
            Ok((record, page_given)) => parsed.push(Parsed {
                record,
                line: line_no,
                raw: text.clone(),
                page_given,
            }),
            Err(reason) => rejects.push(reject(reason)),
        }
    }
    Ok(())
}

fn json_cell(v: &serde_json::Value) -> String {
    match v {
        serde_json::Value::Null => String::new(),
        serde_json::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn parse_direct(
    object: &serde_json::Map<String, serde_json::Value>,
) -> std::result::Result<(RatingRecord, bool), String> {
    let page_given = object.contains_key("page_index");
    let mut value = serde_json::Value::Object(object.clone());
    if !page_given {
        value["page_index"] = 0.into();
    }
    let mut record: RatingRecord = serde_json::from_value(value).map_err(|e| e.to_string())?;
    if let Some(s) = record.score {
        record.score = Some(Score::quantized(s.value()).map_err(|e| e.to_string())?);
    }
    record.validate().map_err(|e| e.to_string())?;
    Ok((record, page_given))
}

fn parse_f64(field: Field, v: &str) -> std::result::Result<f64, ValidationError> {
    v.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| ValidationError::new(field.name(), format!("{v:?} is not a number")))
}

fn parse_count(field: Field, v: &str) -> std::result::Result<u32, ValidationError> {
    let x = parse_f64(field, v)?;
    if x < 0.0 || x.fract() != 0.0 || x > f64::from(u32::MAX) {
        return Err(ValidationError::new(
            field.name(),
            format!("count {v} must be a non-negative integer"),
        ));
    }
    Ok(x as u32)
}

fn parse_row(
    r: &Resolved,
    row: &[String],
    mapping: &ColumnMapping,
) -> std::result::Result<(RatingRecord, bool), ValidationError> {
    let required = |f: Field| {
        r.get(row, f)
            .ok_or_else(|| ValidationError::new(f.name(), "missing value"))
    };

    let variant_raw = required(Field::Variant)?;
    let variant = TestVariant::parse(variant_raw).ok_or_else(|| {
        ValidationError::new("variant", format!("unknown variant {variant_raw:?}"))
    })?;
    let system = required(Field::SystemId)?;
    let system_id = mapping
        .system_aliases
        .get(system)
        .cloned()
        .unwrap_or_else(|| system.to_string());

    let page_index = r
        .get(row, Field::PageIndex)
        .map(|v| {
            v.parse::<usize>().map_err(|_| {
                ValidationError::new("page_index", format!("{v:?} is not a page index"))
            })
        })
        .transpose()?;

    let score = r
        .get(row, Field::Score)
        .map(|v| parse_f64(Field::Score, v).and_then(Score::quantized))
        .transpose()?;
    let cmos = r
        .get(row, Field::Cmos)
        .map(|v| parse_f64(Field::Cmos, v).and_then(validate_cmos))
        .transpose()?;

    let sheet_present = Field::SHEET.iter().any(|&f| r.get(row, f).is_some());
    let dg = if sheet_present {
        let count = |f| required(f).and_then(|v| parse_count(f, v));
        let perceptual = |f: Field| {
            required(f)
                .and_then(|v| parse_f64(f, v))
                .and_then(|x| Score::checked(f.name(), x))
                .map(|s| crate::scale::quantize_tenth(s.value()))
        };
        let revised = match r.get(row, Field::Revised) {
            None => false,
            Some(v) => match v.to_ascii_lowercase().as_str() {
                "true" | "1" | "yes" => true,
                "false" | "0" | "no" => false,
                _ => return Err(ValidationError::new("revised", format!("{v:?} is not a boolean"))),
            },
        };
        let sheet = DgScoresheet {
            mp: count(Field::Mp)?,
            sp: count(Field::Sp)?,
            us: count(Field::Us)?,
            da: count(Field::Da)?,
            sef: count(Field::Sef)?,
            ws: count(Field::Ws)?,
            liveliness: perceptual(Field::Liveliness)?,
            voice_quality: perceptual(Field::VoiceQuality)?,
            rhythm: perceptual(Field::Rhythm)?,
            revised,
        };
        let given: Vec<Option<&str>> = Field::BREAKDOWN.iter().map(|&f| r.get(row, f)).collect();
        let breakdown = if given.iter().all(Option::is_some) {
            let v: Vec<f64> = Field::BREAKDOWN
                .iter()
                .zip(&given)
                .map(|(&f, g)| parse_f64(f, g.unwrap()))
                .collect::<std::result::Result<_, _>>()?;
            ScoreBreakdown {
                perceptual_mean: v[0],
                total_penalty: v[1],
                raw: v[2],
                clamped: v[3],
            }
        } else {
            compute_dg_score(&sheet, &mapping.dg_weights)?
        };
        Some(DgEntry { sheet, breakdown })
    } else {
        None
    };

    let submitted_at = r
        .get(row, Field::SubmittedAt)
        .map(|v| {
            DateTime::parse_from_rfc3339(v)
                .map(|t| t.with_timezone(&Utc))
                .map_err(|e| ValidationError::new("submitted_at", format!("{v:?}: {e}")))
        })
        .transpose()?;

    let record = RatingRecord {
        language: r.get(row, Field::Language).unwrap_or("").to_string(),
        variant,
        campaign_id: r.get(row, Field::CampaignId).unwrap_or("default").to_string(),
        rater_id: required(Field::RaterId)?.to_string(),
        page_index: page_index.unwrap_or(0),
        utterance_id: required(Field::UtteranceId)?.to_string(),
        system_id,
        slot_id: r.get(row, Field::SlotId).map(str::to_string),
        score,
        dg,
        cmos,
        submitted_at,
    };
    record.validate()?;
    Ok((record, page_index.is_some()))
}

fn finish(parsed: Vec<Parsed>, mut rejects: Vec<Reject>) -> ImportOutcome {
    // derived page indices: order of first appearance per (campaign, rater)
    let mut pages: HashMap<(String, String), HashMap<String, usize>> = HashMap::new();
    let mut seen = HashSet::new();
    let mut records = Vec::with_capacity(parsed.len());
    for mut p in parsed {
        if !p.page_given {
            let per_rater = pages
                .entry((p.record.campaign_id.clone(), p.record.rater_id.clone()))
                .or_default();
            let next = per_rater.len();
            p.record.page_index = *per_rater.entry(p.record.utterance_id.clone()).or_insert(next);
        }
        if !seen.insert(p.record.key()) {
            rejects.push(Reject {
                line: p.line,
                reason: "duplicate (campaign_id, rater_id, page_index, system_id)".into(),
                raw: p.raw,
            });
            continue;
        }
        records.push(p.record);
    }
    rejects.sort_by_key(|r| r.line);
    ImportOutcome { records, rejects }
}

pub fn write_rejects(path: impl AsRef<Path>, rejects: &[Reject]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["line", "reason", "raw"])?;
    for r in rejects {
        w.write_record([r.line.to_string(), r.reason.clone(), r.raw.clone()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn sorted(records: &[RatingRecord]) -> Vec<&RatingRecord> {
    let mut out: Vec<&RatingRecord> = records.iter().collect();
    out.sort_by(|a, b| {
        (&a.campaign_id, &a.rater_id, a.page_index, &a.slot_id, &a.system_id).cmp(&(
            &b.campaign_id,
            &b.rater_id,
            b.page_index,
            &b.slot_id,
            &b.system_id,
        ))
    });
    out
}

fn opt<T>(v: Option<T>, f: impl FnOnce(T) -> String) -> String {
    v.map(f).unwrap_or_default()
}

fn csv_row(r: &RatingRecord) -> Vec<String> {
    let sheet = r.dg.map(|d| d.sheet);
    let bd = r.dg.map(|d| d.breakdown);
    vec![
        r.language.clone(),
        r.variant.as_str().to_string(),
        r.campaign_id.clone(),
        r.rater_id.clone(),
        r.page_index.to_string(),
        r.utterance_id.clone(),
        r.system_id.clone(),
        r.slot_id.clone().unwrap_or_default(),
        opt(r.score, |s| format!("{:.1}", s.value())),
        opt(r.cmos, |c| format!("{:.1}", c.value())),
        opt(sheet, |s| s.mp.to_string()),
        opt(sheet, |s| s.sp.to_string()),
        opt(sheet, |s| s.us.to_string()),
        opt(sheet, |s| s.da.to_string()),
        opt(sheet, |s| s.sef.to_string()),
        opt(sheet, |s| s.ws.to_string()),
        opt(sheet, |s| format!("{:.1}", s.liveliness)),
        opt(sheet, |s| format!("{:.1}", s.voice_quality)),
        opt(sheet, |s| format!("{:.1}", s.rhythm)),
        opt(sheet, |s| s.revised.to_string()),
        opt(bd, |b| b.perceptual_mean.to_string()),
        opt(bd, |b| b.total_penalty.to_string()),
        opt(bd, |b| b.raw.to_string()),
        opt(bd, |b| b.clamped.to_string()),
        opt(r.submitted_at.as_ref(), format_timestamp),
    ]
}

/// Canonical CSV: fixed columns, records sorted by campaign, rater, page
/// and slot, scores at one decimal.
pub fn export_csv<W: Write>(records: &[RatingRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_COLUMNS)?;
    for r in sorted(records) {
        w.write_record(csv_row(r))?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}

pub fn export_jsonl<W: Write>(records: &[RatingRecord], writer: W) -> Result<()> {
    let mut w = BufWriter::new(writer);
    for r in sorted(records) {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(|e| Error::io("<jsonl>", e))?;
    }
    w.flush().map_err(|e| Error::io("<jsonl>", e))
}

/// Writes `<base>.csv` and `<base>.jsonl`; returns both paths.
pub fn export_dataset(records: &[RatingRecord], base: impl AsRef<Path>) -> Result<(PathBuf, PathBuf)> {
    let base = base.as_ref();
    if let Some(parent) = base.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let csv_path = base.with_extension("csv");
    let jsonl_path = base.with_extension("jsonl");
    let f = File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
    export_csv(records, f)?;
    let f = File::create(&jsonl_path).map_err(|e| Error::io(&jsonl_path, e))?;
    export_jsonl(records, f)?;
    Ok((csv_path, jsonl_path))
}
