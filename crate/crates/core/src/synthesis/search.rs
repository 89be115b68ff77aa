//! Enumerative search behind `gen_action` and `gen_branch`.
//!
//! Move sequences are explored breadth-first in lexicographic order. Each
//! sequence is represented by the vector of states it reaches on the examples
//! of the current split; a sequence whose vector was already produced by an
//! earlier one can never win a tie-break and is not extended.

use super::{omega_instrs, CandidateSpace};
use crate::dataset::{check_correct, Example, Verdict};
use crate::dsl::{step, write, Action, AllocOutcome, Context, Instr, Language, LatticeResult, Move, Pos, Token, Write};
use crate::minilang::{Ast, NodeId, NodeKind};
use rayon::prelude::*;
use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::sync::Arc;

const FAIL: u32 = u32::MAX;
const DEPTH_BITS: u32 = 6;
const NO_VALUE: u32 = u32::MAX;

const CODE_KIND: u64 = 1 << 40;
const CODE_STR: u64 = 2 << 40;

fn pack(node: NodeId, depth: usize) -> u32 {
    debug_assert!(depth < 1 << DEPTH_BITS && node.0 < 1 << (32 - DEPTH_BITS));
    (node.0 << DEPTH_BITS) | depth as u32
}

fn unpack(s: u32) -> (NodeId, usize) {
    (NodeId(s >> DEPTH_BITS), (s & ((1 << DEPTH_BITS) - 1)) as usize)
}

struct Ex<'a> {
    example: &'a Example,
    ast: &'a Ast,
    values: Arc<[u32]>,
}

/// Examples of a dataset with node values interned so that symbol order
/// equals string order.
pub(super) struct Engine<'a> {
    exs: Vec<Ex<'a>>,
    strings: Vec<String>,
    space: &'a CandidateSpace,
}

/// Observed guard context encoded as an order-preserving integer: 0 is the
/// empty context, otherwise the single token.
fn token_code(w: Write, ex: &Ex<'_>, state: u32) -> u64 {
    if state == FAIL {
        return 0;
    }
    let (n, depth) = unpack(state);
    if w == Write::WriteValue {
        return match ex.values[n.index()] {
            NO_VALUE => 1,
            sym => CODE_STR + u64::from(sym),
        };
    }
    match write(w, ex.ast, n, depth > 0) {
        Token::Num(v) => 1 + v,
        Token::Kind(k) => CODE_KIND + k as u64,
        Token::Str(_) => unreachable!("only WriteValue yields strings"),
    }
}

impl<'a> Engine<'a> {
    pub(super) fn new(examples: &[&'a Example], space: &'a CandidateSpace) -> Engine<'a> {
        let mut strings: Vec<String> = examples
            .iter()
            .flat_map(|e| {
                let ast = &e.program.ast;
                (0..ast.len() as u32).filter_map(|i| ast.value(NodeId(i)))
            })
            .collect::<HashSet<&str>>()
            .into_iter()
            .map(str::to_string)
            .collect();
        strings.sort();
        let sym: HashMap<&str, u32> = strings.iter().enumerate().map(|(i, s)| (s.as_str(), i as u32)).collect();
        let mut tables: HashMap<*const crate::dataset::Program, Arc<[u32]>> = HashMap::new();
        let exs = examples
            .iter()
            .map(|e| {
                let ast = &e.program.ast;
                let values = tables
                    .entry(Arc::as_ptr(&e.program))
                    .or_insert_with(|| {
                        (0..ast.len() as u32).map(|i| ast.value(NodeId(i)).map_or(NO_VALUE, |v| sym[&v])).collect()
                    })
                    .clone();
                Ex { example: e, ast, values }
            })
            .collect();
        Engine { exs, strings, space }
    }

    pub(super) fn len(&self) -> usize {
        self.exs.len()
    }

    pub(super) fn example(&self, i: usize) -> &'a Example {
        self.exs[i].example
    }

    fn decode(&self, code: u64) -> Context {
        match code {
            0 => Vec::new(),
            c if c >= CODE_STR => vec![Token::Str(self.strings[(c - CODE_STR) as usize].clone())],
            c if c >= CODE_KIND => vec![Token::Kind(NodeKind::ALL[(c - CODE_KIND) as usize])],
            c => vec![Token::Num(c - 1)],
        }
    }

    fn start(&self, idx: &[usize]) -> Vec<u32> {
        idx.iter()
            .map(|&i| {
                let e = self.exs[i].example;
                pack(e.query, e.call_trace.len())
            })
            .collect()
    }

    fn advance(&self, idx: &[usize], states: &[u32], m: Move) -> Vec<u32> {
        idx.iter()
            .zip(states)
            .map(|(&i, &s)| {
                if s == FAIL {
                    return FAIL;
                }
                let (n, depth) = unpack(s);
                let e = self.exs[i].example;
                match step(m, self.exs[i].ast, n, &e.call_trace[..depth]) {
                    (Pos::Node(next), d) => pack(next, d),
                    _ => FAIL,
                }
            })
            .collect()
    }

    fn precise(&self, i: usize, result: LatticeResult) -> bool {
        check_correct(result, self.exs[i].example) == Verdict::Precise
    }

    fn action_cost(&self, idx: &[usize], final_states: &[u32]) -> u64 {
        idx.iter()
            .zip(final_states)
            .filter(|(&i, &s)| s == FAIL || !self.precise(i, LatticeResult::Node(unpack(s).0)))
            .count() as u64
    }

    /// Per-example imprecision of `a` on the split.
    pub(super) fn r_vector(&self, idx: &[usize], a: &Action) -> Vec<bool> {
        match a {
            Action::Alloc(o) => {
                let res = match o {
                    AllocOutcome::NewAlloc => LatticeResult::NewAlloc,
                    AllocOutcome::NoAlloc => LatticeResult::NoAlloc,
                    AllocOutcome::Top => LatticeResult::Top,
                };
                idx.iter().map(|&i| !self.precise(i, res)).collect()
            }
            Action::Moves(ms) => {
                let mut s = self.start(idx);
                for m in ms {
                    s = self.advance(idx, &s, *m);
                }
                idx.iter().zip(&s).map(|(&i, &st)| st == FAIL || !self.precise(i, LatticeResult::Node(unpack(st).0))).collect()
            }
        }
    }
}

/// A move sequence together with the states it reaches.
struct Rep {
    seq: Vec<Move>,
    states: Arc<[u32]>,
}

/// Deduplicated move sequences up to a length, for one split.
pub(super) struct Frontier<'e, 'a> {
    engine: &'e Engine<'a>,
    idx: Vec<usize>,
    moves: &'static [Move],
    /// Stored levels; sequences of length `max_len` are generated on demand.
    levels: Vec<Vec<Rep>>,
    max_len: usize,
}

impl<'e, 'a> Frontier<'e, 'a> {
    pub(super) fn new(engine: &'e Engine<'a>, idx: Vec<usize>, max_len: usize) -> Self {
        let moves = engine.space.language.moves();
        let root = Rep { seq: Vec::new(), states: engine.start(&idx).into() };
        let mut seen: HashSet<Arc<[u32]>> = HashSet::new();
        seen.insert(root.states.clone());
        let mut levels = vec![vec![root]];
        for _ in 1..max_len {
            let prev = levels.last().expect("root level");
            let children: Vec<Vec<Vec<u32>>> = prev
                .par_iter()
                .map(|r| {
                    if r.states.iter().all(|s| *s == FAIL) {
                        return Vec::new();
                    }
                    moves.iter().map(|m| engine.advance(&idx, &r.states, *m)).collect()
                })
                .collect();
            let mut next = Vec::new();
            for (r, kids) in prev.iter().zip(children) {
                for (m, states) in moves.iter().zip(kids) {
                    let states: Arc<[u32]> = states.into();
                    if seen.insert(states.clone()) {
                        let mut seq = r.seq.clone();
                        seq.push(*m);
                        next.push(Rep { seq, states });
                    }
                }
            }
            levels.push(next);
        }
        Frontier { engine, idx, moves, levels, max_len }
    }

    /// Applies `f` to every representative of length at most `len` and to
    /// every one-move extension at the last level, keeping the least result.
    fn best<T, F>(&self, len: usize, f: F) -> Option<T>
    where
        T: Send + Ord,
        F: Fn(&[Move], &[u32]) -> Option<T> + Sync,
    {
        let reps: Vec<&Rep> = self.levels.iter().take(len + 1).flatten().collect();
        let stored = reps.par_iter().filter_map(|r| f(&r.seq, &r.states)).min();
        if len < self.max_len || self.max_len == 0 {
            return stored;
        }
        let last = self.levels[self.max_len - 1]
            .par_iter()
            .filter_map(|r| {
                if r.states.iter().all(|s| *s == FAIL) {
                    return None;
                }
                self.moves
                    .iter()
                    .filter_map(|m| {
                        let states = self.engine.advance(&self.idx, &r.states, *m);
                        let mut seq = r.seq.clone();
                        seq.push(*m);
                        f(&seq, &states)
                    })
                    .min()
            })
            .min();
        match (stored, last) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }
}

/// Total order used to pick actions: regularized cost, Ω, then the sequence.
#[derive(PartialEq, Eq, PartialOrd, Ord)]
struct ActionKey {
    cost: u64,
    omega: u64,
    action: Action,
}

pub(super) fn best_action(frontier: Option<&Frontier<'_, '_>>, engine: &Engine<'_>, idx: &[usize]) -> (Action, u64) {
    let space = engine.space;
    let key = |cost: u64, omega: u64, action: Action| {
        RegKey(cost as f64 + space.lambda * omega as f64, ActionKey { cost, omega, action })
    };
    match space.language {
        Language::Alloc => {
            let best = AllocOutcome::ALL
                .into_iter()
                .map(|o| {
                    let a = Action::Alloc(o);
                    let cost = engine.r_vector(idx, &a).iter().filter(|r| **r).count() as u64;
                    key(cost, 1, a)
                })
                .min()
                .expect("three outcomes");
            (best.1.action, best.1.cost)
        }
        Language::PointsTo => {
            let frontier = frontier.expect("points-to search needs a frontier");
            let best = frontier
                .best(space.action_bound, |seq, states| {
                    let cost = engine.action_cost(&frontier.idx, states);
                    Some(key(cost, seq.len() as u64, Action::Moves(seq.to_vec())))
                })
                .expect("the empty action is always enumerated");
            (best.1.action, best.1.cost)
        }
    }
}

/// Orders by a real-valued score first, then by the payload.
struct RegKey<K>(f64, K);

impl<K: Ord> PartialEq for RegKey<K> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<K: Ord> Eq for RegKey<K> {}
impl<K: Ord> PartialOrd for RegKey<K> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<K: Ord> Ord for RegKey<K> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then_with(|| self.1.cmp(&other.1))
    }
}

/// Binary entropy of a split side with `ones` imprecise examples out of `n`.
pub(super) fn entropy_counts(ones: u64, n: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let (a, b) = (ones.min(n - ones), ones.max(n - ones));
    let term = |c: u64| {
        if c == 0 {
            0.0
        } else {
            let p = c as f64 / n as f64;
            -p * p.log2()
        }
    };
    term(a) + term(b)
}

pub(super) fn info_gain_counts(n: u64, ones: u64, n_g: u64, ones_g: u64) -> f64 {
    let (n_o, ones_o) = (n - n_g, ones - ones_g);
    let side = |k: u64, o: u64| if k == 0 { 0.0 } else { k as f64 / n as f64 * entropy_counts(o, k) };
    entropy_counts(ones, n) - (side(n_g, ones_g) + side(n_o, ones_o))
}

#[derive(PartialEq, Eq, PartialOrd, Ord)]
struct GuardKey {
    omega: u64,
    guard: Vec<Instr>,
    code: u64,
}

/// Highest-gain guard and expected context with their gain.
pub(super) fn best_guard(frontier: &Frontier<'_, '_>, r: &[bool]) -> Option<(Vec<Instr>, Context, f64)> {
    let engine = frontier.engine;
    let space = engine.space;
    let n = r.len() as u64;
    let ones = r.iter().filter(|x| **x).count() as u64;
    let writes = space.language.writes();
    let k = space.value_top_k;
    let best = frontier.best(space.guard_bound.saturating_sub(1), |seq, states| {
        writes
            .iter()
            .filter_map(|&w| {
                let mut counts: HashMap<u64, (u64, u64)> = HashMap::new();
                for ((&i, &s), &ri) in frontier.idx.iter().zip(states).zip(r) {
                    let c = counts.entry(token_code(w, &engine.exs[i], s)).or_default();
                    c.0 += 1;
                    c.1 += u64::from(ri);
                }
                let mut values: Vec<(u64, (u64, u64))> = counts.into_iter().collect();
                values.sort_by(|a, b| b.1 .0.cmp(&a.1 .0).then(a.0.cmp(&b.0)));
                let mut guard: Vec<Instr> = seq.iter().map(|m| Instr::Move(*m)).collect();
                guard.push(Instr::Write(w));
                let omega = omega_instrs(&guard);
                values
                    .into_iter()
                    .take(k)
                    .map(|(code, (n_g, ones_g))| {
                        let ig = info_gain_counts(n, ones, n_g, ones_g);
                        RegKey(-ig, GuardKey { omega, guard: guard.clone(), code })
                    })
                    .min()
            })
            .min()
    })?;
    let ig = -best.0;
    (ig > space.ig_tolerance).then(|| (best.1.guard, engine.decode(best.1.code), ig))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Dataset, Mode, Program};
    use crate::dsl::{exec_guard, ExecState};

    #[test]
    fn encoded_contexts_match_guard_execution() {
        let mut d = Dataset::new(Mode::PointsToThis);
        for src in [
            "function f(v) { return this.n; }\nvar o = {n: \"x\", f: f};\no.f(1);\n[1, 2].filter(f, o);",
            "function g() { var z = this; return z; }\nvar w = new g();\nvar s = call(g, \"a\");",
        ] {
            d.add_program(&Program::from_source(src).unwrap());
        }
        let space = CandidateSpace::new(Language::PointsTo);
        let exs: Vec<&Example> = d.examples().iter().collect();
        let engine = Engine::new(&exs, &space);
        let idx: Vec<usize> = (0..engine.len()).collect();
        let frontier = Frontier::new(&engine, idx.clone(), 3);
        let mut checked = 0;
        for rep in frontier.levels.iter().flatten() {
            for &w in space.language.writes() {
                let mut guard: Vec<Instr> = rep.seq.iter().map(|m| Instr::Move(*m)).collect();
                guard.push(Instr::Write(w));
                for (k, &i) in idx.iter().enumerate() {
                    let e = engine.example(i);
                    let expected = exec_guard(&guard, &ExecState::new(&e.program.ast, e.query, &e.call_trace));
                    let code = token_code(w, &engine.exs[i], rep.states[k]);
                    assert_eq!(engine.decode(code), expected, "{guard:?}");
                    checked += 1;
                }
            }
        }
        assert!(checked > 500, "{checked}");
    }

    #[test]
    fn codes_preserve_context_order() {
        let ctxs: Vec<Context> = vec![
            vec![],
            vec![Token::Num(0)],
            vec![Token::Num(7)],
            vec![Token::Kind(NodeKind::Program)],
            vec![Token::Kind(NodeKind::Identifier)],
        ];
        assert!(ctxs.windows(2).all(|w| w[0] < w[1]));
        let codes = [0, 1, 8, CODE_KIND + NodeKind::Program as u64, CODE_KIND + NodeKind::Identifier as u64];
        assert!(codes.windows(2).all(|w| w[0] < w[1]));
    }
}
