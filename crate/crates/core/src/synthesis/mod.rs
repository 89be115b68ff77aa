//! Decision-tree learner over the analysis DSL.
//!
//! [`synthesize`] grows a tree top-down: each node first looks for a single
//! action that is precise on its examples, then for the guard with the
//! highest information gain on the action's precision vector, and falls back
//! to a TOP leaf when no guard helps.

mod search;

use crate::dataset::{cost, r, Dataset, DatasetInvalid, Example};
use crate::dsl::{exec_guard, Action, Context, DslProgram, ExecState, Instr, Language, Write};
use search::{best_action, best_guard, Engine, Frontier};
use std::collections::HashMap;
use std::hash::Hash;
use thiserror::Error;

#[derive(Clone, Debug, PartialEq)]
pub struct CandidateSpace {
    pub language: Language,
    /// Maximum number of moves in an action.
    pub action_bound: usize,
    /// Maximum guard length; a guard is up to `guard_bound - 1` moves and one write.
    pub guard_bound: usize,
    pub value_top_k: usize,
    pub lambda: f64,
    pub ig_tolerance: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected key=value")]
    Syntax { line: usize },
    #[error("line {line}: unknown key {key}")]
    UnknownKey { line: usize, key: String },
    #[error("invalid value {value:?} for {key}")]
    BadValue { key: String, value: String },
}

impl CandidateSpace {
    pub fn new(language: Language) -> CandidateSpace {
        CandidateSpace { language, action_bound: 5, guard_bound: 6, value_top_k: 10, lambda: 0.01, ig_tolerance: 1e-12 }
    }

    /// Sets one parameter. Returns `Ok(false)` if the key is not a learning parameter.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool, ConfigError> {
        let bad = || ConfigError::BadValue { key: key.to_string(), value: value.to_string() };
        let positive = || value.parse::<usize>().ok().filter(|v| *v > 0).ok_or_else(bad);
        let non_negative = || value.parse::<f64>().ok().filter(|v| v.is_finite() && *v >= 0.0).ok_or_else(bad);
        match key {
            "action_bound" => self.action_bound = positive()?,
            "guard_bound" => self.guard_bound = positive()?,
            "value_top_k" => self.value_top_k = positive()?,
            "lambda" => self.lambda = non_negative()?,
            "ig_tolerance" => self.ig_tolerance = non_negative()?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    /// Applies a `key=value` file; blank lines and `#` comments are skipped.
    pub fn apply_config(&mut self, text: &str) -> Result<(), ConfigError> {
        for (line, key, value) in parse_config(text)? {
            if !self.set(&key, &value)? {
                return Err(ConfigError::UnknownKey { line, key });
            }
        }
        Ok(())
    }
}

/// Splits a `key=value` file into (line, key, value) triples.
pub fn parse_config(text: &str) -> Result<Vec<(usize, String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let l = raw.split('#').next().unwrap_or("").trim();
        if l.is_empty() {
            continue;
        }
        let (k, v) = l.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
        out.push((i + 1, k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("entropy of an empty vector")]
pub struct EmptyVector;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SynthError {
    #[error("invalid dataset: {0}")]
    InvalidDataset(#[from] DatasetInvalid),
    #[error("dataset mode {mode} does not match the candidate language")]
    LanguageMismatch { mode: crate::dataset::Mode },
}

fn imprecise(a: &Action, e: &Example) -> bool {
    r(e, &DslProgram::Leaf(a.clone())) == 1
}

fn guard_context(guard: &[Instr], e: &Example) -> Context {
    exec_guard(guard, &ExecState::new(&e.program.ast, e.query, &e.call_trace))
}

/// Shannon entropy in bits of the class distribution of `w`.
pub fn entropy<T: Eq + Hash>(w: &[T]) -> Result<f64, EmptyVector> {
    if w.is_empty() {
        return Err(EmptyVector);
    }
    let mut counts: HashMap<&T, usize> = HashMap::new();
    for x in w {
        *counts.entry(x).or_default() += 1;
    }
    let k = w.len() as f64;
    let mut c: Vec<usize> = counts.into_values().collect();
    c.sort_unstable();
    Ok(c.into_iter().map(|n| n as f64 / k).map(|p| -p * p.log2()).sum::<f64>() + 0.0)
}

/// Information gain of splitting `d` with `guard = expected` on the precision
/// vector of `a_best`.
pub fn info_gain(d: &Dataset, a_best: &Action, guard: &[Instr], expected: &Context) -> f64 {
    let w: Vec<bool> = d.examples().iter().map(|e| imprecise(a_best, e)).collect();
    let sides: Vec<bool> = d.examples().iter().map(|e| &guard_context(guard, e) == expected).collect();
    split_gain(&w, &sides)
}

fn split_gain(w: &[bool], sides: &[bool]) -> f64 {
    let Ok(h) = entropy(w) else { return 0.0 };
    let n = w.len() as f64;
    let part = |side: bool| {
        let v: Vec<bool> = w.iter().zip(sides).filter(|(_, s)| **s == side).map(|(x, _)| *x).collect();
        entropy(&v).map_or(0.0, |e| v.len() as f64 / n * e)
    };
    h - (part(true) + part(false))
}

fn write_weight(w: Write) -> u64 {
    match w {
        Write::WritePos | Write::WriteValue => 2,
        _ => 1,
    }
}

pub(crate) fn omega_instrs(instrs: &[Instr]) -> u64 {
    instrs
        .iter()
        .map(|i| match i {
            Instr::Move(_) => 1,
            Instr::Write(w) => write_weight(*w),
        })
        .sum()
}

fn omega_action(a: &Action) -> u64 {
    match a {
        Action::Moves(ms) => ms.len() as u64,
        Action::Alloc(_) => 1,
    }
}

/// Instruction count with WritePos and WriteValue counted twice.
pub fn omega(p: &DslProgram) -> f64 {
    fn go(p: &DslProgram) -> u64 {
        match p {
            DslProgram::Leaf(a) => omega_action(a),
            DslProgram::Branch { guard, then, otherwise, .. } => omega_instrs(guard) + go(then) + go(otherwise),
        }
    }
    go(p) as f64
}

pub fn cost_reg(d: &Dataset, pa: &DslProgram, lambda: f64) -> f64 {
    cost(d, pa) as f64 + lambda * omega(pa)
}

fn check_space(d: &Dataset, space: &CandidateSpace) -> Result<(), SynthError> {
    d.validate()?;
    if d.mode().language() != space.language {
        return Err(SynthError::LanguageMismatch { mode: d.mode() });
    }
    Ok(())
}

fn frontier_len(space: &CandidateSpace, with_actions: bool) -> usize {
    let guard_moves = space.guard_bound.saturating_sub(1);
    if with_actions && space.language == Language::PointsTo {
        space.action_bound.max(guard_moves)
    } else {
        guard_moves
    }
}

/// Action with the least regularized cost on `d`; ties go to the smaller
/// program, then to the lexicographically first one.
pub fn gen_action(d: &Dataset, space: &CandidateSpace) -> Action {
    let exs: Vec<&Example> = d.examples().iter().collect();
    let engine = Engine::new(&exs, space);
    let idx: Vec<usize> = (0..engine.len()).collect();
    let frontier = (space.language == Language::PointsTo).then(|| Frontier::new(&engine, idx.clone(), space.action_bound));
    best_action(frontier.as_ref(), &engine, &idx).0
}

/// Guard condition with the highest information gain on the precision vector
/// of `a_best`, or `None` when no candidate has positive gain.
pub fn gen_branch(a_best: &Action, d: &Dataset, space: &CandidateSpace) -> Option<(Vec<Instr>, Context)> {
    let exs: Vec<&Example> = d.examples().iter().collect();
    let engine = Engine::new(&exs, space);
    let idx: Vec<usize> = (0..engine.len()).collect();
    let r = engine.r_vector(&idx, a_best);
    let frontier = Frontier::new(&engine, idx, frontier_len(space, false));
    best_guard(&frontier, &r).map(|(g, v, _)| (g, v))
}

/// Learns a decision-tree program that is correct on every example of `d`.
pub fn synthesize(d: &Dataset, space: &CandidateSpace) -> Result<DslProgram, SynthError> {
    check_space(d, space)?;
    let exs: Vec<&Example> = d.examples().iter().collect();
    let engine = Engine::new(&exs, space);
    Ok(grow(&engine, (0..engine.len()).collect(), space))
}

fn grow(engine: &Engine<'_>, idx: Vec<usize>, space: &CandidateSpace) -> DslProgram {
    let frontier = Frontier::new(engine, idx.clone(), frontier_len(space, true));
    let (a_best, c) = best_action(Some(&frontier), engine, &idx);
    if c == 0 {
        return DslProgram::Leaf(a_best);
    }
    let r = engine.r_vector(&idx, &a_best);
    let Some((guard, expected, _)) = best_guard(&frontier, &r) else {
        return DslProgram::top(space.language);
    };
    drop(frontier);
    let (yes, no): (Vec<usize>, Vec<usize>) =
        idx.iter().partition(|&&i| guard_context(&guard, engine.example(i)) == expected);
    debug_assert!(!yes.is_empty() && !no.is_empty());
    let then = grow(engine, yes, space);
    let otherwise = grow(engine, no, space);
    DslProgram::branch(guard, expected, then, otherwise)
}

#[cfg(test)]
mod tests;
