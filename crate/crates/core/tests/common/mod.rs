#![allow(dead_code)]

use learnpa::dataset::{Dataset, Example, Mode, Program};
use learnpa::dsl::{exec_guard, Action, AllocOutcome, DslProgram, ExecState, Instr, Language};
use learnpa::minilang::NodeId;
use learnpa::oracle::{mutate_ema, mutate_gj};
use rand::seq::SliceRandom;
use rand::Rng;
use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;

pub fn corpus_dir(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus").join(name)
}

pub fn corpus_programs(name: &str) -> Vec<Arc<Program>> {
    learnpa::cli::corpus_files(&corpus_dir(name))
        .expect("bundled corpus")
        .iter()
        .map(|f| Program::from_source(&std::fs::read_to_string(f).unwrap()).unwrap())
        .collect()
}

/// Every example of the bundled corpora in `mode`.
pub fn example_pool(mode: Mode) -> Vec<Example> {
    let mut d = Dataset::new(mode);
    for name in ["filter", "alloc"] {
        for p in corpus_programs(name) {
            d.add_program(&p);
        }
    }
    d.examples().to_vec()
}

pub fn random_subset(rng: &mut impl Rng, mode: Mode, pool: &[Example], max: usize) -> Dataset {
    let n = rng.gen_range(1..=max.min(pool.len()));
    let picked: Vec<Example> = pool.choose_multiple(rng, n).cloned().collect();
    Dataset::from_examples(mode, picked).expect("distinct corpus examples")
}

pub fn random_action(rng: &mut impl Rng, lang: Language) -> Action {
    match lang {
        Language::PointsTo => {
            let n = rng.gen_range(0..=4);
            Action::Moves((0..n).map(|_| *lang.moves().choose(rng).unwrap()).collect())
        }
        Language::Alloc => Action::Alloc(*AllocOutcome::ALL.choose(rng).unwrap()),
    }
}

pub fn random_guard(rng: &mut impl Rng, lang: Language) -> Vec<Instr> {
    let mut g: Vec<Instr> = (0..rng.gen_range(0..=3)).map(|_| Instr::Move(*lang.moves().choose(rng).unwrap())).collect();
    g.push(Instr::Write(*lang.writes().choose(rng).unwrap()));
    g
}

/// A random program whose guard values are taken from `examples`, so that
/// both branches are usually reachable.
pub fn random_program(rng: &mut impl Rng, lang: Language, examples: &[Example], depth: usize) -> DslProgram {
    if depth == 0 || examples.is_empty() || rng.gen_bool(0.3) {
        return DslProgram::Leaf(random_action(rng, lang));
    }
    let guard = random_guard(rng, lang);
    let e = examples.choose(rng).unwrap();
    let expected = exec_guard(&guard, &ExecState::new(&e.program.ast, e.query, &e.call_trace));
    let then = random_program(rng, lang, examples, depth - 1);
    let otherwise = random_program(rng, lang, examples, depth - 1);
    DslProgram::branch(guard, expected, then, otherwise)
}

/// Applies one to three random EMA or GJ mutations.
pub fn random_mutant(rng: &mut impl Rng, p: &Arc<Program>) -> Arc<Program> {
    let mut cur = p.clone();
    for _ in 0..rng.gen_range(1..=3) {
        let site = NodeId(rng.gen_range(0..cur.ast.tree_len() as u32));
        let mut ms = mutate_ema(&cur.ast, site);
        ms.extend(mutate_gj(&cur.ast, site));
        if let Some(m) = ms.choose(rng) {
            if let Ok(next) = Program::from_ast(m.ast.clone()) {
                cur = next;
            }
        }
    }
    cur
}

/// `n` distinct mutants of `seeds` whose sources are not in `exclude`.
pub fn held_out_mutants(rng: &mut impl Rng, seeds: &[Arc<Program>], exclude: &HashSet<String>, n: usize) -> Vec<Arc<Program>> {
    let mut seen = exclude.clone();
    let mut out = Vec::new();
    let mut attempts = 0;
    while out.len() < n {
        attempts += 1;
        assert!(attempts < n * 100, "could not draw {n} distinct mutants");
        let seed = seeds.choose(rng).unwrap();
        let m = random_mutant(rng, seed);
        if seen.insert(m.source.clone()) {
            out.push(m);
        }
    }
    out
}
