//! Labeled examples extracted from interpreter traces, the correctness
//! predicate, and dataset files.

mod check;
mod extract;
mod jsonl;

pub use check::{check_correct, cost, is_correct_on, r, run_on, Verdict};
pub use extract::{extract_examples, is_property_position};
pub use jsonl::{dataset_from_jsonl, dataset_to_jsonl, DatasetError};

use crate::dsl::Language;
use crate::minilang::{interpret, parse, Ast, InterpretFailure, NodeId, ObjectId, SyntaxError, Trace};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "pointsto-this")]
    PointsToThis,
    #[serde(rename = "pointsto-var")]
    PointsToVar,
    #[serde(rename = "alloc")]
    AllocSite,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::PointsToThis, Mode::PointsToVar, Mode::AllocSite];

    pub fn language(self) -> Language {
        match self {
            Mode::PointsToThis | Mode::PointsToVar => Language::PointsTo,
            Mode::AllocSite => Language::Alloc,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::PointsToThis => "pointsto-this",
            Mode::PointsToVar => "pointsto-var",
            Mode::AllocSite => "alloc",
        }
    }

    pub fn from_name(s: &str) -> Option<Mode> {
        Mode::ALL.into_iter().find(|m| m.name() == s)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error(transparent)]
    Runtime(#[from] InterpretFailure),
}

/// A parsed program with its execution trace.
#[derive(Debug)]
pub struct Program {
    pub source: String,
    pub ast: Ast,
    pub trace: Trace,
}

impl Program {
    pub fn from_source(source: &str) -> Result<Arc<Program>, LoadError> {
        let ast = parse(source)?;
        let trace = interpret(&ast)?;
        Ok(Arc::new(Program { source: source.to_string(), ast, trace }))
    }

    /// Program whose source is the canonical rendering of `ast`.
    pub fn from_ast(ast: Ast) -> Result<Arc<Program>, Box<InterpretFailure>> {
        let trace = interpret(&ast).map_err(Box::new)?;
        let source = crate::minilang::render(&ast);
        Ok(Arc::new(Program { source, ast, trace }))
    }
}

/// Acceptable answers of a points-to query.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Acceptable {
    /// The object was not read before: the query node itself is the answer.
    Fresh,
    /// Every node where the object was read strictly before the query.
    Sites(Vec<NodeId>),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Label {
    PointsTo { obj: ObjectId, accept: Acceptable },
    Alloc { is_alloc: bool },
}

impl Label {
    /// Label equality up to object identity.
    pub fn same_outcome(&self, other: &Label) -> bool {
        match (self, other) {
            (Label::PointsTo { accept: a, .. }, Label::PointsTo { accept: b, .. }) => a == b,
            (Label::Alloc { is_alloc: a }, Label::Alloc { is_alloc: b }) => a == b,
            _ => false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Example {
    pub program: Arc<Program>,
    pub query: NodeId,
    pub call_trace: Vec<NodeId>,
    pub label: Label,
    pub mode: Mode,
}

impl Example {
    pub fn key(&self) -> (&str, NodeId, &[NodeId]) {
        (&self.program.source, self.query, &self.call_trace)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DatasetInvalid {
    #[error("dataset is empty")]
    Empty,
    #[error("dataset mixes modes")]
    MixedModes,
}

/// Ordered examples of one mode without duplicate (source, node, trace) keys.
#[derive(Clone, Debug)]
pub struct Dataset {
    mode: Mode,
    examples: Vec<Example>,
    keys: HashSet<(String, NodeId, Vec<NodeId>)>,
}

impl Dataset {
    pub fn new(mode: Mode) -> Dataset {
        Dataset { mode, examples: Vec::new(), keys: HashSet::new() }
    }

    pub fn from_examples(mode: Mode, examples: impl IntoIterator<Item = Example>) -> Result<Dataset, DatasetInvalid> {
        let mut d = Dataset::new(mode);
        for e in examples {
            if e.mode != mode {
                return Err(DatasetInvalid::MixedModes);
            }
            d.push(e);
        }
        Ok(d)
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn contains(&self, source: &str, query: NodeId, call_trace: &[NodeId]) -> bool {
        self.keys.contains(&(source.to_string(), query, call_trace.to_vec()))
    }

    /// Adds the example unless its key is present; returns whether it was added.
    pub fn push(&mut self, e: Example) -> bool {
        assert_eq!(e.mode, self.mode, "example mode differs from dataset mode");
        let key = (e.program.source.clone(), e.query, e.call_trace.clone());
        if !self.keys.insert(key) {
            return false;
        }
        self.examples.push(e);
        true
    }

    /// Adds all examples of a program in extraction order.
    pub fn add_program(&mut self, program: &Arc<Program>) -> usize {
        extract_examples(program, self.mode).into_iter().filter(|e| self.push(e.clone())).count()
    }

    /// Distinct programs in order of first appearance.
    pub fn programs(&self) -> Vec<Arc<Program>> {
        let mut seen = HashSet::new();
        self.examples
            .iter()
            .filter(|e| seen.insert(e.program.source.as_str()))
            .map(|e| e.program.clone())
            .collect()
    }

    pub fn has_program(&self, source: &str) -> bool {
        self.examples.iter().any(|e| e.program.source == source)
    }

    /// Sub-dataset with the examples at the given indices.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut d = Dataset::new(self.mode);
        for i in indices {
            d.push(self.examples[*i].clone());
        }
        d
    }

    pub fn validate(&self) -> Result<(), DatasetInvalid> {
        if self.is_empty() {
            Err(DatasetInvalid::Empty)
        } else {
            Ok(())
        }
    }
}
