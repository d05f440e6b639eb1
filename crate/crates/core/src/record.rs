//! Response records, divergence sets and evaluation runs.
//!
//! A record file is UTF-8 JSON Lines: one object per line with the fields
//! `question_id`, `variant_id`, `is_original`, `option_count`,
//! `correct_option`, `predicted_option`, `raw_response` and `soft_score`.
//! Option labels are either a single uppercase letter (`"A"` = 0) or a
//! zero-based integer index. Records are grouped into divergence sets by
//! `question_id`, keeping first-appearance order for sets and input order for
//! the records inside each set.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{CatError, Result};

/// Letter label for a zero-based option index, `None` past `Z`.
pub fn option_letter(index: usize) -> Option<char> {
    (index < 26).then(|| (b'A' + index as u8) as char)
}

/// Parses an option label given as a letter (`"C"`) or an integer (`2`, `"2"`).
pub fn parse_option_label(label: &str) -> Option<usize> {
    let label = label.trim();
    let mut chars = label.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) if c.is_ascii_uppercase() => Some((c as u8 - b'A') as usize),
        _ => label.parse::<usize>().ok(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnswerRecord {
    pub question_id: String,
    pub variant_id: String,
    pub is_original: bool,
    pub option_count: usize,
    pub correct_option: usize,
    /// `None` when the response could not be parsed; always scored incorrect.
    pub predicted_option: Option<usize>,
    pub raw_response: Option<String>,
    pub soft_score: Option<f64>,
}

impl AnswerRecord {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.option_count < 2 {
            return Err(format!("option_count {} < 2", self.option_count));
        }
        if self.correct_option >= self.option_count {
            return Err(format!(
                "correct_option {} out of range for {} options",
                self.correct_option, self.option_count
            ));
        }
        if let Some(p) = self.predicted_option {
            if p >= self.option_count {
                return Err(format!(
                    "predicted_option {p} out of range for {} options",
                    self.option_count
                ));
            }
        }
        if let Some(s) = self.soft_score {
            if !(0.0..=1.0).contains(&s) {
                return Err(format!("soft_score {s} outside [0, 1]"));
            }
        }
        Ok(())
    }

    pub fn is_correct(&self) -> bool {
        self.predicted_option == Some(self.correct_option)
    }
}

/// All variant responses for one question.
#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceSet {
    question_id: String,
    records: Vec<AnswerRecord>,
}

impl DivergenceSet {
    pub fn new(records: Vec<AnswerRecord>) -> Result<Self> {
        let first = records
            .first()
            .ok_or_else(|| CatError::EmptySet(String::new()))?;
        let question_id = first.question_id.clone();
        let mut variants = HashSet::new();
        let mut originals = 0;
        for (i, r) in records.iter().enumerate() {
            r.validate().map_err(|message| CatError::InvalidRecord {
                line: i + 1,
                message,
            })?;
            let field = if r.question_id != question_id {
                Some("question_id")
            } else if r.option_count != first.option_count {
                Some("option_count")
            } else if r.correct_option != first.correct_option {
                Some("correct_option")
            } else {
                None
            };
            if let Some(field) = field {
                return Err(CatError::InconsistentQuestion {
                    line: i + 1,
                    question_id,
                    field,
                });
            }
            if !variants.insert(r.variant_id.as_str()) {
                return Err(CatError::DuplicateVariant {
                    line: i + 1,
                    question_id,
                    variant_id: r.variant_id.clone(),
                });
            }
            originals += usize::from(r.is_original);
        }
        if originals > 1 {
            return Err(CatError::InvalidRecord {
                line: 0,
                message: format!("question {question_id:?} has {originals} original variants"),
            });
        }
        Ok(Self {
            question_id,
            records,
        })
    }

    pub fn question_id(&self) -> &str {
        &self.question_id
    }

    pub fn records(&self) -> &[AnswerRecord] {
        &self.records
    }

    /// Number of variants M.
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn option_count(&self) -> usize {
        self.records[0].option_count
    }

    pub fn correct_option(&self) -> usize {
        self.records[0].correct_option
    }

    /// Number of variants answered with the correct option.
    pub fn matches(&self) -> usize {
        self.records.iter().filter(|r| r.is_correct()).count()
    }

    /// The original question if flagged, else the first record.
    pub fn representative(&self) -> &AnswerRecord {
        self.records
            .iter()
            .find(|r| r.is_original)
            .unwrap_or(&self.records[0])
    }

    /// Vote count per option; missing predictions cast no vote.
    pub fn votes(&self) -> Vec<usize> {
        let mut votes = vec![0; self.option_count()];
        for p in self.records.iter().filter_map(|r| r.predicted_option) {
            votes[p] += 1;
        }
        votes
    }

    fn sort_records(&mut self) {
        self.records.sort_by(|a, b| a.variant_id.cmp(&b.variant_id));
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationRun {
    pub model_name: String,
    pub benchmark_name: String,
    sets: Vec<DivergenceSet>,
}

impl EvaluationRun {
    pub fn new(
        model_name: impl Into<String>,
        benchmark_name: impl Into<String>,
        sets: Vec<DivergenceSet>,
    ) -> Result<Self> {
        if sets.is_empty() {
            return Err(CatError::EmptyRun);
        }
        let mut seen = HashSet::new();
        for s in &sets {
            if !seen.insert(s.question_id()) {
                return Err(CatError::DuplicateQuestion(s.question_id.clone()));
            }
        }
        Ok(Self {
            model_name: model_name.into(),
            benchmark_name: benchmark_name.into(),
            sets,
        })
    }

    /// Groups loose records by `question_id` (first-appearance order).
    pub fn from_records(
        model_name: impl Into<String>,
        benchmark_name: impl Into<String>,
        records: impl IntoIterator<Item = AnswerRecord>,
    ) -> Result<Self> {
        let mut order: Vec<String> = Vec::new();
        let mut groups: HashMap<String, Vec<AnswerRecord>> = HashMap::new();
        for r in records {
            if !groups.contains_key(&r.question_id) {
                order.push(r.question_id.clone());
            }
            groups.entry(r.question_id.clone()).or_default().push(r);
        }
        let sets = order
            .into_iter()
            .map(|q| DivergenceSet::new(groups.remove(&q).unwrap_or_default()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(model_name, benchmark_name, sets)
    }

    pub fn sets(&self) -> &[DivergenceSet] {
        &self.sets
    }

    /// Number of questions N.
    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn uniform_m(&self) -> bool {
        let m = self.sets[0].len();
        self.sets.iter().all(|s| s.len() == m)
    }

    pub fn records(&self) -> impl Iterator<Item = &AnswerRecord> {
        self.sets.iter().flat_map(|s| s.records.iter())
    }

    /// Same run with sets ordered by question id and records by variant id.
    pub fn canonical(&self) -> Self {
        let mut run = self.clone();
        run.sets.sort_by(|a, b| a.question_id.cmp(&b.question_id));
        run.sets.iter_mut().for_each(DivergenceSet::sort_records);
        run
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationSummary {
    pub sets: usize,
    pub records: usize,
    /// Records with neither a prediction nor a soft score.
    pub failures: usize,
    /// M → number of sets with that many variants.
    pub m_histogram: BTreeMap<usize, usize>,
}

pub fn validate_run(run: &EvaluationRun) -> ValidationSummary {
    let mut summary = ValidationSummary {
        sets: run.len(),
        ..Default::default()
    };
    for set in run.sets() {
        summary.records += set.len();
        summary.failures += set
            .records()
            .iter()
            .filter(|r| r.predicted_option.is_none() && r.soft_score.is_none())
            .count();
        *summary.m_histogram.entry(set.len()).or_default() += 1;
    }
    summary
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineIssue {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct IngestReport {
    pub lines: usize,
    /// Malformed lines skipped in lenient mode.
    pub skipped: Vec<LineIssue>,
    /// Predictions that were present but unusable; kept as missing.
    pub prediction_warnings: Vec<LineIssue>,
}

#[derive(Debug, Clone)]
pub struct Ingested {
    pub run: EvaluationRun,
    pub report: IngestReport,
}

/// Reads a record file; the model name defaults to the file stem.
pub fn ingest_run(path: impl AsRef<Path>, strict: bool) -> Result<Ingested> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| CatError::io(path, e))?;
    let model = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    read_run(BufReader::new(file), model, "unknown", strict).map_err(|e| match e {
        CatError::Io { source, .. } => CatError::io(path, source),
        other => other,
    })
}

pub fn read_run(
    reader: impl BufRead,
    model_name: impl Into<String>,
    benchmark_name: impl Into<String>,
    strict: bool,
) -> Result<Ingested> {
    let mut report = IngestReport::default();
    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, Vec<AnswerRecord>> = HashMap::new();
    let mut seen: HashSet<(String, String)> = HashSet::new();

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| CatError::io("<input>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        report.lines += 1;
        let record = match parse_record_line(&line) {
            Ok((record, warning)) => {
                if let Some(message) = warning {
                    report.prediction_warnings.push(LineIssue {
                        line: line_no,
                        message,
                    });
                }
                record
            }
            Err(message) if strict => {
                return Err(CatError::MalformedLine {
                    line: line_no,
                    message,
                })
            }
            Err(message) => {
                report.skipped.push(LineIssue {
                    line: line_no,
                    message,
                });
                continue;
            }
        };

        if !seen.insert((record.question_id.clone(), record.variant_id.clone())) {
            return Err(CatError::DuplicateVariant {
                line: line_no,
                question_id: record.question_id,
                variant_id: record.variant_id,
            });
        }
        match groups.get_mut(&record.question_id) {
            Some(records) => {
                let head = &records[0];
                let field = if head.option_count != record.option_count {
                    Some("option_count")
                } else if head.correct_option != record.correct_option {
                    Some("correct_option")
                } else if record.is_original && records.iter().any(|r| r.is_original) {
                    Some("is_original")
                } else {
                    None
                };
                if let Some(field) = field {
                    return Err(CatError::InconsistentQuestion {
                        line: line_no,
                        question_id: record.question_id,
                        field,
                    });
                }
                records.push(record);
            }
            None => {
                order.push(record.question_id.clone());
                groups.insert(record.question_id.clone(), vec![record]);
            }
        }
    }

    let sets = order
        .into_iter()
        .map(|q| DivergenceSet::new(groups.remove(&q).unwrap_or_default()))
        .collect::<Result<Vec<_>>>()?;
    let run = EvaluationRun::new(model_name, benchmark_name, sets)?;
    Ok(Ingested { run, report })
}

fn label_from_value(value: &Value) -> Option<usize> {
    match value {
        Value::String(s) => parse_option_label(s),
        Value::Number(n) => n.as_u64().map(|n| n as usize),
        _ => None,
    }
}

fn required<'a>(obj: &'a Map<String, Value>, key: &str) -> std::result::Result<&'a Value, String> {
    match obj.get(key) {
        None | Some(Value::Null) => Err(format!("missing field {key:?}")),
        Some(v) => Ok(v),
    }
}

fn string_field(obj: &Map<String, Value>, key: &str) -> std::result::Result<String, String> {
    match required(obj, key)? {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        other => Err(format!("field {key:?} must be a string, got {other}")),
    }
}

/// Parses one record line. The second element carries a warning when a
/// prediction was present but unusable.
pub fn parse_record_line(
    line: &str,
) -> std::result::Result<(AnswerRecord, Option<String>), String> {
    let value: Value = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let obj = value
        .as_object()
        .ok_or_else(|| "record is not a JSON object".to_string())?;

    let question_id = string_field(obj, "question_id")?;
    let variant_id = string_field(obj, "variant_id")?;
    let is_original = match obj.get("is_original") {
        None | Some(Value::Null) => false,
        Some(Value::Bool(b)) => *b,
        Some(other) => return Err(format!("is_original must be boolean, got {other}")),
    };
    let option_count = required(obj, "option_count")?
        .as_u64()
        .ok_or_else(|| "option_count must be a non-negative integer".to_string())?
        as usize;
    let correct_raw = required(obj, "correct_option")?;
    let correct_option = label_from_value(correct_raw)
        .ok_or_else(|| format!("unparseable correct_option {correct_raw}"))?;

    let mut warning = None;
    let predicted_option = match obj.get("predicted_option") {
        None | Some(Value::Null) => None,
        Some(v) => match label_from_value(v).filter(|&p| p < option_count) {
            Some(p) => Some(p),
            None => {
                warning = Some(format!("unusable predicted_option {v}"));
                None
            }
        },
    };
    let raw_response = match obj.get("raw_response") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(other) => return Err(format!("raw_response must be a string, got {other}")),
    };
    let soft_score = match obj.get("soft_score") {
        None | Some(Value::Null) => None,
        Some(v) => Some(
            v.as_f64()
                .ok_or_else(|| format!("soft_score must be a number, got {v}"))?,
        ),
    };

    let record = AnswerRecord {
        question_id,
        variant_id,
        is_original,
        option_count,
        correct_option,
        predicted_option,
        raw_response,
        soft_score,
    };
    record.validate()?;
    Ok((record, warning))
}

#[derive(Serialize)]
#[serde(untagged)]
enum LabelOut {
    Letter(String),
    Index(usize),
}

impl LabelOut {
    fn new(index: usize, option_count: usize) -> Self {
        match option_letter(index) {
            Some(c) if option_count <= 26 => LabelOut::Letter(c.to_string()),
            _ => LabelOut::Index(index),
        }
    }
}

#[derive(Serialize)]
struct RecordOut<'a> {
    question_id: &'a str,
    variant_id: &'a str,
    is_original: bool,
    option_count: usize,
    correct_option: LabelOut,
    predicted_option: Option<LabelOut>,
    #[serde(skip_serializing_if = "Option::is_none")]
    raw_response: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    soft_score: Option<f64>,
}

pub fn record_to_line(r: &AnswerRecord) -> String {
    let out = RecordOut {
        question_id: &r.question_id,
        variant_id: &r.variant_id,
        is_original: r.is_original,
        option_count: r.option_count,
        correct_option: LabelOut::new(r.correct_option, r.option_count),
        predicted_option: r.predicted_option.map(|p| LabelOut::new(p, r.option_count)),
        raw_response: r.raw_response.as_deref(),
        soft_score: r.soft_score,
    };
    serde_json::to_string(&out).expect("record serialization is infallible")
}

pub fn write_records<'a>(
    records: impl IntoIterator<Item = &'a AnswerRecord>,
    mut out: impl Write,
) -> std::io::Result<()> {
    for r in records {
        writeln!(out, "{}", record_to_line(r))?;
    }
    Ok(())
}

/// Serializes a run in the record file format.
pub fn emit_run(run: &EvaluationRun) -> String {
    let mut buf = Vec::new();
    write_records(run.records(), &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}
