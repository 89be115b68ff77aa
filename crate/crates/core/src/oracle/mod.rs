//! Counter-example search and the refinement loop.
//!
//! The guided oracle mutates the training programs at the positions the
//! candidate analysis reads, first with semantics-preserving (EMA) edits and
//! then with global jumps. A mutant is a counter-example when the analysis
//! answers differently on an equivalent program, or when it is unsound on the
//! mutant's interpreted ground truth.

mod mutate;

pub use mutate::{mutate_ema, mutate_gj, transport_table, Mutant, Mutation, MutationKind};

use crate::dataset::{check_correct, extract_examples, run_on, Dataset, Example, Program, Verdict};
use crate::dsl::{exec_guard, DslProgram, ExecState, LatticeResult};
use crate::minilang::{render, NodeId};
use crate::synthesis::{synthesize, CandidateSpace, SynthError};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::{HashMap, HashSet};
use std::sync::Arc;

/// Mutants evaluated together before the first hit in order is committed.
const CHUNK: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Violation {
    /// The analysis answers differently on a semantically equivalent program.
    Ema,
    /// The analysis is unsound on the mutant's ground truth.
    Dataset,
}

#[derive(Clone, Debug)]
pub struct CounterExampleReport {
    pub example: Example,
    pub violation: Violation,
    /// Candidate programs evaluated up to and including this one.
    pub candidates_tried: usize,
    pub mutation: Mutation,
}

/// Nodes inspected by `pa` on `ex`, in first-visit order.
pub fn read_positions(pa: &DslProgram, ex: &Example) -> Vec<NodeId> {
    run_on(pa, ex).read_set
}

struct Candidate {
    original: Arc<Program>,
    mutant: Mutant,
}

/// Checks one mutant; `Err(())` when it does not run.
fn evaluate(pa: &DslProgram, d: &Dataset, c: &Candidate) -> Result<Option<(Example, Violation)>, ()> {
    let prog = Program::from_ast(c.mutant.ast.clone()).map_err(|_| ())?;
    let examples = extract_examples(&prog, d.mode());
    if c.mutant.mutation.kind.is_ema() {
        let map = transport_table(&c.original.ast, &prog.ast);
        let moved = |n: NodeId| map.get(n.index()).copied().flatten();
        for eo in extract_examples(&c.original, d.mode()) {
            let Some(q) = moved(eo.query) else { continue };
            let Some(trace) = eo.call_trace.iter().map(|n| moved(*n)).collect::<Option<Vec<_>>>() else { continue };
            let Some(em) = examples.iter().find(|e| e.query == q && e.call_trace == trace) else { continue };
            let before = match run_on(pa, &eo).result {
                LatticeResult::Node(n) => moved(n).map(LatticeResult::Node),
                r => Some(r),
            };
            let after = run_on(pa, em).result;
            if before != Some(after) && check_correct(after, em) != Verdict::Precise {
                return Ok(Some((em.clone(), Violation::Ema)));
            }
        }
    }
    Ok(examples
        .into_iter()
        .find(|e| check_correct(run_on(pa, e).result, e) == Verdict::Unsound)
        .map(|e| (e, Violation::Dataset)))
}

/// Evaluates candidates in order, `CHUNK` at a time in parallel, keeping the
/// budget and the hits in sequential order.
struct Search<'a> {
    pa: &'a DslProgram,
    d: &'a Dataset,
    budget: usize,
    limit: usize,
    seen: HashSet<String>,
    pending: Vec<Candidate>,
    tried: usize,
    found: Vec<CounterExampleReport>,
}

impl<'a> Search<'a> {
    fn new(pa: &'a DslProgram, d: &'a Dataset, budget: usize, limit: usize) -> Search<'a> {
        let seen = d.programs().iter().map(|p| p.source.clone()).collect();
        Search { pa, d, budget, limit, seen, pending: Vec::new(), tried: 0, found: Vec::new() }
    }

    fn done(&self) -> bool {
        self.found.len() >= self.limit || self.tried >= self.budget
    }

    /// Queues a mutant unless an identical program was seen; returns whether it was new.
    fn offer(&mut self, original: &Arc<Program>, mutant: Mutant) -> bool {
        if self.done() || !self.seen.insert(render(&mutant.ast)) {
            return false;
        }
        self.pending.push(Candidate { original: original.clone(), mutant });
        if self.pending.len() == CHUNK || self.tried + self.pending.len() >= self.budget {
            self.flush();
        }
        true
    }

    fn flush(&mut self) {
        let batch = std::mem::take(&mut self.pending);
        let (pa, d) = (self.pa, self.d);
        let results: Vec<_> = batch.par_iter().map(|c| evaluate(pa, d, c)).collect();
        for (c, res) in batch.into_iter().zip(results) {
            if self.done() {
                break;
            }
            self.tried += 1;
            if let Ok(Some((example, violation))) = res {
                let mutation = c.mutant.mutation;
                self.found.push(CounterExampleReport { example, violation, candidates_tried: self.tried, mutation });
            }
        }
    }

    fn offer_site(&mut self, p: &Arc<Program>, site: NodeId) -> bool {
        let mut fresh = false;
        for m in mutate_ema(&p.ast, site).into_iter().chain(mutate_gj(&p.ast, site)) {
            fresh |= self.offer(p, m);
        }
        fresh
    }

    fn finish(mut self) -> Vec<CounterExampleReport> {
        self.flush();
        self.found
    }
}

/// Branch decisions taken by `pa` on `ex`, identifying the leaf that answers it.
fn leaf_path(pa: &DslProgram, ex: &Example) -> Vec<bool> {
    let state = ExecState::new(&ex.program.ast, ex.query, &ex.call_trace);
    let mut path = Vec::new();
    let mut cur = pa;
    while let DslProgram::Branch { guard, expected, then, otherwise } = cur {
        let taken = &exec_guard(guard, &state) == expected;
        path.push(taken);
        cur = if taken { then } else { otherwise };
    }
    path
}

/// Up to `limit` counter-examples in candidate order, within `budget` candidates.
///
/// Sites are the nodes `pa` reads on the examples of `d`: first on examples
/// whose leaf no other example reaches, then on the rest in dataset order.
/// All other nodes follow.
pub fn find_counterexamples(pa: &DslProgram, d: &Dataset, budget: usize, limit: usize) -> Vec<CounterExampleReport> {
    let programs = d.programs();
    let mut s = Search::new(pa, d, budget, limit);
    let index_of = |p: &Arc<Program>| programs.iter().position(|q| Arc::ptr_eq(q, p)).expect("example program is in D");
    let paths: Vec<Vec<bool>> = d.examples().iter().map(|e| leaf_path(pa, e)).collect();
    let mut support: HashMap<&[bool], usize> = HashMap::new();
    for p in &paths {
        *support.entry(p).or_default() += 1;
    }
    let mut order: Vec<usize> = (0..paths.len()).collect();
    order.sort_by_key(|&i| (support[paths[i].as_slice()] > 1, index_of(&d.examples()[i].program)));
    let mut read: Vec<HashSet<NodeId>> = vec![HashSet::new(); programs.len()];
    for i in order {
        let e = &d.examples()[i];
        let k = index_of(&e.program);
        for site in read_positions(pa, e) {
            if s.done() {
                return s.finish();
            }
            if read[k].insert(site) {
                s.offer_site(&programs[k], site);
            }
        }
    }
    for (p, have) in programs.iter().zip(&read) {
        for site in p.ast.tree_ids().filter(|n| !have.contains(n)) {
            if s.done() {
                return s.finish();
            }
            s.offer_site(p, site);
        }
    }
    s.finish()
}

/// First counter-example in candidate order, or `None` after `budget` candidates.
pub fn find_counterexample(pa: &DslProgram, d: &Dataset, budget: usize) -> Option<CounterExampleReport> {
    find_counterexamples(pa, d, budget, 1).pop()
}

/// Random-order baseline: takes the programs of `d` in a random order and
/// tries every mutant of each, site by site in a random order.
pub fn blackbox_counterexamples(
    pa: &DslProgram,
    d: &Dataset,
    budget: usize,
    limit: usize,
    seed: u64,
) -> Vec<CounterExampleReport> {
    let mut programs = d.programs();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    programs.shuffle(&mut rng);
    let mut s = Search::new(pa, d, budget, limit);
    for p in &programs {
        let mut sites: Vec<NodeId> = p.ast.tree_ids().collect();
        sites.shuffle(&mut rng);
        for site in sites {
            if s.done() {
                return s.finish();
            }
            s.offer_site(p, site);
            // Each site is judged on its own, as a blackbox would.
            s.flush();
        }
    }
    s.finish()
}

pub fn blackbox_counterexample(pa: &DslProgram, d: &Dataset, budget: usize, seed: u64) -> Option<CounterExampleReport> {
    blackbox_counterexamples(pa, d, budget, 1, seed).pop()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OracleKind {
    Guided,
    Blackbox { seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LoopConfig {
    pub max_iters: usize,
    pub budget: usize,
    /// Counter-examples added per iteration.
    pub batch: usize,
    pub oracle: OracleKind,
}

impl Default for LoopConfig {
    fn default() -> LoopConfig {
        LoopConfig { max_iters: 100, budget: 5000, batch: 1, oracle: OracleKind::Guided }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LogEntry {
    pub iter: usize,
    pub violation: Violation,
    #[serde(rename = "candidatesTried")]
    pub candidates_tried: usize,
    pub source: String,
}

#[derive(Clone, Debug)]
pub struct LoopOutcome {
    pub program: DslProgram,
    pub dataset: Dataset,
    /// False when `max_iters` refinements still left a counter-example.
    pub converged: bool,
    pub iterations: usize,
    pub log: Vec<LogEntry>,
}

pub fn render_log(log: &[LogEntry]) -> String {
    log.iter().map(|e| serde_json::to_string(e).expect("log entries serialize") + "\n").collect()
}

/// Alternates synthesis with counter-example search until the oracle finds
/// nothing or `max_iters` refinements were made.
pub fn learn_loop(d0: &Dataset, space: &CandidateSpace, cfg: &LoopConfig) -> Result<LoopOutcome, SynthError> {
    let mut d = d0.clone();
    let mut log = Vec::new();
    for iter in 0.. {
        let pa = synthesize(&d, space)?;
        if iter == cfg.max_iters {
            return Ok(LoopOutcome { program: pa, dataset: d, converged: false, iterations: iter, log });
        }
        let found = match cfg.oracle {
            OracleKind::Guided => find_counterexamples(&pa, &d, cfg.budget, cfg.batch.max(1)),
            OracleKind::Blackbox { seed } => {
                blackbox_counterexamples(&pa, &d, cfg.budget, cfg.batch.max(1), seed.wrapping_add(iter as u64))
            }
        };
        if found.is_empty() {
            return Ok(LoopOutcome { program: pa, dataset: d, converged: true, iterations: iter, log });
        }
        for c in found {
            log.push(LogEntry {
                iter,
                violation: c.violation,
                candidates_tried: c.candidates_tried,
                source: c.example.program.source.clone(),
            });
            d.push(c.example);
        }
    }
    unreachable!()
}

#[cfg(test)]
mod tests;
