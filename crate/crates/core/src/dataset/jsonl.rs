use super::{Acceptable, Dataset, Example, Label, LoadError, Mode, Program};
use crate::minilang::NodeId;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::Arc;
use thiserror::Error;

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum LabelRecord {
    PointsTo {
        #[serde(rename = "self")]
        fresh: bool,
        accept: Vec<u32>,
    },
    Alloc {
        alloc: bool,
    },
}

#[derive(Serialize, Deserialize)]
struct Record {
    source: String,
    node: u32,
    calltrace: Vec<u32>,
    label: LabelRecord,
    mode: Mode,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("line {line}: {message}")]
    Json { line: usize, message: String },
    #[error("line {line}: {source}")]
    Program { line: usize, source: LoadError },
    #[error("line {line}: mode {found} differs from {expected}")]
    MixedModes { line: usize, expected: Mode, found: Mode },
    #[error("line {line}: no {mode} example at node {node} with that call trace")]
    UnknownExample { line: usize, mode: Mode, node: u32 },
    #[error("line {line}: label does not match the program trace")]
    LabelMismatch { line: usize },
    #[error("dataset file has no examples")]
    Empty,
}

fn label_record(l: &Label) -> LabelRecord {
    match l {
        Label::PointsTo { accept: Acceptable::Fresh, .. } => LabelRecord::PointsTo { fresh: true, accept: Vec::new() },
        Label::PointsTo { accept: Acceptable::Sites(s), .. } => {
            LabelRecord::PointsTo { fresh: false, accept: s.iter().map(|n| n.0).collect() }
        }
        Label::Alloc { is_alloc } => LabelRecord::Alloc { alloc: *is_alloc },
    }
}

fn label_matches(rec: &LabelRecord, l: &Label) -> bool {
    match (rec, l) {
        (LabelRecord::PointsTo { fresh: true, accept }, Label::PointsTo { accept: Acceptable::Fresh, .. }) => {
            accept.is_empty()
        }
        (LabelRecord::PointsTo { fresh: false, accept }, Label::PointsTo { accept: Acceptable::Sites(s), .. }) => {
            let mut a: Vec<NodeId> = accept.iter().map(|n| NodeId(*n)).collect();
            a.sort();
            a.dedup();
            &a == s
        }
        (LabelRecord::Alloc { alloc }, Label::Alloc { is_alloc }) => alloc == is_alloc,
        _ => false,
    }
}

/// One JSON object per line, in dataset order.
pub fn dataset_to_jsonl(d: &Dataset) -> String {
    let mut out = String::new();
    for e in d.examples() {
        let rec = Record {
            source: e.program.source.clone(),
            node: e.query.0,
            calltrace: e.call_trace.iter().map(|n| n.0).collect(),
            label: label_record(&e.label),
            mode: e.mode,
        };
        out.push_str(&serde_json::to_string(&rec).expect("records serialize"));
        out.push('\n');
    }
    out
}

/// Parses a dataset file, re-running every program and checking each label
/// against the recomputed trace. Blank lines are ignored.
pub fn dataset_from_jsonl(text: &str) -> Result<Dataset, DatasetError> {
    let mut programs: HashMap<String, (Arc<Program>, Vec<Example>)> = HashMap::new();
    let mut dataset: Option<Dataset> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(raw).map_err(|e| DatasetError::Json { line, message: e.to_string() })?;
        let d = dataset.get_or_insert_with(|| Dataset::new(rec.mode));
        if d.mode() != rec.mode {
            return Err(DatasetError::MixedModes { line, expected: d.mode(), found: rec.mode });
        }
        if !programs.contains_key(&rec.source) {
            let p = Program::from_source(&rec.source).map_err(|source| DatasetError::Program { line, source })?;
            let examples = super::extract_examples(&p, rec.mode);
            programs.insert(rec.source.clone(), (p, examples));
        }
        let (_, examples) = &programs[&rec.source];
        let trace: Vec<NodeId> = rec.calltrace.iter().map(|n| NodeId(*n)).collect();
        let ex = examples
            .iter()
            .find(|e| e.query.0 == rec.node && e.call_trace == trace)
            .ok_or(DatasetError::UnknownExample { line, mode: rec.mode, node: rec.node })?;
        if !label_matches(&rec.label, &ex.label) {
            return Err(DatasetError::LabelMismatch { line });
        }
        d.push(ex.clone());
    }
    dataset.ok_or(DatasetError::Empty)
}
