use super::*;
use crate::dataset::{is_correct_on, Mode, Program};
use crate::dsl::{parse_program, render_program, Move};
use crate::minilang::NodeKind;

fn dataset(mode: Mode, sources: &[&str]) -> Dataset {
    let mut d = Dataset::new(mode);
    for s in sources {
        d.add_program(&Program::from_source(s).unwrap());
    }
    d
}

const ASSIGN: &str = "var b = {};\na = b;";
const ASSIGN_CE: &str = "var b = {};\nvar c = 1;\na = b;";

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-9
}

#[test]
fn entropy_values() {
    assert_eq!(entropy(&[0, 0, 1, 1]).unwrap(), 1.0);
    assert_eq!(entropy(&[0, 0, 0]).unwrap(), 0.0);
    assert!(close(entropy(&[0, 1, 1, 1]).unwrap(), 0.811_278_124_459_132_9));
    assert_eq!(entropy::<u8>(&[]), Err(EmptyVector));
}

#[test]
fn split_gain_values() {
    let w = [false, false, true, true];
    assert_eq!(split_gain(&w, &[true, true, false, false]), 1.0);
    assert_eq!(split_gain(&w, &[true; 4]), 0.0);
    let w = [false, true, true, true];
    assert!(close(split_gain(&w, &[true, false, false, false]), 0.811_278_124_459_132_9));
}

#[test]
fn count_based_gain_matches_reference() {
    for n in 1..12u64 {
        for ones in 0..=n {
            for n_g in 0..=n {
                for ones_g in ones.saturating_sub(n - n_g)..=ones.min(n_g) {
                    let w: Vec<bool> = (0..n).map(|i| i < ones_g || (i >= n_g && i < n_g + ones - ones_g)).collect();
                    let sides: Vec<bool> = (0..n).map(|i| i < n_g).collect();
                    let fast = search::info_gain_counts(n, ones, n_g, ones_g);
                    assert!(close(fast, split_gain(&w, &sides)), "{n} {ones} {n_g} {ones_g}");
                }
            }
        }
    }
}

#[test]
fn omega_values() {
    let lang = Language::PointsTo;
    assert_eq!(omega(&DslProgram::top(lang)), 1.0);
    assert_eq!(omega(&DslProgram::moves([Move::Up, Move::Right])), 2.0);
    let assign = parse_program("IF [WritePos Up WriteType] = [1 Assignment] THEN DO [Right] ELSE DO [Top]").unwrap();
    assert_eq!(omega(&assign), 6.0);
}

#[test]
fn cost_reg_values() {
    let d = dataset(Mode::PointsToVar, &[ASSIGN]);
    let overfit = DslProgram::moves([Move::Up, Move::Left, Move::DownFirst]);
    assert!(close(cost_reg(&d, &overfit, 0.01), 0.03));
    assert!(close(cost_reg(&d, &DslProgram::top(Language::PointsTo), 0.01), 2.01));
    assert_eq!(cost_reg(&d, &DslProgram::top(Language::PointsTo), 0.0), 2.0);
}

#[test]
fn config_parsing() {
    let mut s = CandidateSpace::new(Language::PointsTo);
    s.apply_config("# learning\naction_bound = 3\nlambda=0\n\nvalue_top_k=4 # fewer\n").unwrap();
    assert_eq!((s.action_bound, s.lambda, s.value_top_k, s.guard_bound), (3, 0.0, 4, 6));
    assert_eq!(s.apply_config("budget=3"), Err(ConfigError::UnknownKey { line: 1, key: "budget".into() }));
    assert!(matches!(s.apply_config("lambda=-1"), Err(ConfigError::BadValue { .. })));
    assert!(matches!(s.apply_config("guard_bound=0"), Err(ConfigError::BadValue { .. })));
    assert_eq!(s.apply_config("\nnonsense"), Err(ConfigError::Syntax { line: 2 }));
}

#[test]
fn right_sibling_action() {
    let d = dataset(Mode::PointsToVar, &["var x = {};\nvar y = {};\na = x;\nb = y;"]);
    let assigned: Vec<usize> = d
        .examples()
        .iter()
        .enumerate()
        .filter(|(_, e)| e.program.ast.child_index(e.query) == 0 && e.program.ast.kind(e.program.ast.parent(e.query).unwrap()) == NodeKind::Assignment)
        .map(|(i, _)| i)
        .collect();
    let sub = d.subset(&assigned);
    assert_eq!(sub.len(), 2);
    let a = gen_action(&sub, &CandidateSpace::new(Language::PointsTo));
    assert_eq!(a, Action::Moves(vec![Move::Right]));
    assert_eq!(cost(&sub, &DslProgram::Leaf(a)), 0);
}

#[test]
fn alloc_actions() {
    let d = dataset(Mode::AllocSite, &["var o = {};\nvar p = [];"]);
    assert!(d.examples().iter().all(|e| e.label == crate::dataset::Label::Alloc { is_alloc: true }));
    assert_eq!(gen_action(&d, &CandidateSpace::new(Language::Alloc)), Action::Alloc(crate::dsl::AllocOutcome::NewAlloc));
}

#[test]
fn assign_learns_an_overfit_program() {
    let d = dataset(Mode::PointsToVar, &[ASSIGN]);
    let p = synthesize(&d, &CandidateSpace::new(Language::PointsTo)).unwrap();
    assert_eq!(p, DslProgram::moves([Move::Up, Move::Left, Move::DownFirst]));
}

#[test]
fn assign_with_counterexample_separates_assignment() {
    let d = dataset(Mode::PointsToVar, &[ASSIGN, ASSIGN_CE]);
    let space = CandidateSpace::new(Language::PointsTo);
    let p = synthesize(&d, &space).unwrap();
    assert_eq!(cost(&d, &p), 0, "{}", render_program(&p));
    let ce = Program::from_source(ASSIGN_CE).unwrap();
    let a = ce.ast.tree_ids().find(|n| ce.ast.value(*n) == Some("a")).unwrap();
    let overfit = DslProgram::moves([Move::Up, Move::Left, Move::DownFirst]);
    assert_ne!(crate::dsl::exec_program(&overfit, &ce.ast, a, &[]).result, crate::dsl::exec_program(&p, &ce.ast, a, &[]).result);
    assert!(cost(&d, &overfit) > 0);
    let a_best = Action::Moves(vec![Move::Up, Move::Left, Move::DownFirst]);
    let (guard, value) = gen_branch(&a_best, &d, &space).unwrap();
    assert!(info_gain(&d, &a_best, &guard, &value) > 0.0);
}

#[test]
fn branch_none_cases() {
    let space = CandidateSpace::new(Language::PointsTo);
    let d = dataset(Mode::PointsToVar, &[ASSIGN]);
    assert_eq!(gen_branch(&Action::Moves(vec![Move::Up, Move::Left, Move::DownFirst]), &d, &space), None);
    let single = d.subset(&[0]);
    assert_eq!(gen_branch(&Action::Moves(vec![Move::Top]), &single, &space), None);
}

#[test]
fn indistinguishable_examples_fall_back_to_top() {
    let space = CandidateSpace { guard_bound: 1, action_bound: 1, ..CandidateSpace::new(Language::PointsTo) };
    let d = dataset(Mode::PointsToVar, &["var b = {};\nvar c = b;\nvar d = c;"]);
    let p = synthesize(&d, &space).unwrap();
    assert!(is_correct_on(&d, &p));
    assert!(p.leaves().contains(&&Action::Moves(vec![Move::Top])));
}

#[test]
fn invalid_inputs() {
    let space = CandidateSpace::new(Language::PointsTo);
    assert_eq!(synthesize(&Dataset::new(Mode::PointsToVar), &space), Err(SynthError::InvalidDataset(DatasetInvalid::Empty)));
    let d = dataset(Mode::AllocSite, &[ASSIGN]);
    assert_eq!(synthesize(&d, &space), Err(SynthError::LanguageMismatch { mode: Mode::AllocSite }));
}

fn all_move_seqs(moves: &[Move], bound: usize) -> Vec<Vec<Move>> {
    let mut out = vec![Vec::new()];
    let mut level = vec![Vec::new()];
    for _ in 0..bound {
        level = level
            .iter()
            .flat_map(|s: &Vec<Move>| {
                moves.iter().map(move |m| {
                    let mut t = s.clone();
                    t.push(*m);
                    t
                })
            })
            .collect();
        out.extend(level.iter().cloned());
    }
    out
}

fn naive_action(d: &Dataset, space: &CandidateSpace) -> (f64, Vec<Move>) {
    let mut best: Option<(f64, usize, Vec<Move>)> = None;
    for s in all_move_seqs(space.language.moves(), space.action_bound) {
        let p = DslProgram::moves(s.clone());
        let key = (cost_reg(d, &p, space.lambda), s.len(), s);
        if best.as_ref().is_none_or(|b| key.0 < b.0 || (key.0 == b.0 && (key.1, &key.2) < (b.1, &b.2))) {
            best = Some(key);
        }
    }
    let b = best.unwrap();
    (b.0, b.2)
}

fn naive_best_gain(a: &Action, d: &Dataset, space: &CandidateSpace) -> f64 {
    let mut best = 0.0f64;
    for s in all_move_seqs(space.language.moves(), space.guard_bound - 1) {
        for w in space.language.writes() {
            let mut guard: Vec<Instr> = s.iter().map(|m| Instr::Move(*m)).collect();
            guard.push(Instr::Write(*w));
            let mut counts: Vec<(Context, usize)> = Vec::new();
            for e in d.examples() {
                let c = guard_context(&guard, e);
                match counts.iter_mut().find(|x| x.0 == c) {
                    Some(x) => x.1 += 1,
                    None => counts.push((c, 1)),
                }
            }
            counts.sort_by(|x, y| y.1.cmp(&x.1).then(x.0.cmp(&y.0)));
            for (v, _) in counts.into_iter().take(space.value_top_k) {
                best = best.max(info_gain(d, a, &guard, &v));
            }
        }
    }
    best
}

const SMALL: &[&str] = &[
    ASSIGN,
    ASSIGN_CE,
    "var o = {k: {}};\nvar p = o.k;\nvar q = p;",
    "function f(x) { var y = x; return y; }\nvar a = {};\nvar b = f(a);",
    "var a = [];\nvar b = a;\nif (true) { b = {}; }\nvar c = b;",
];

#[test]
fn fast_action_search_matches_enumeration() {
    let space = CandidateSpace { action_bound: 3, ..CandidateSpace::new(Language::PointsTo) };
    for mask in 1..(1u32 << SMALL.len()) {
        let srcs: Vec<&str> = SMALL.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, s)| *s).collect();
        let d = dataset(Mode::PointsToVar, &srcs);
        let fast = gen_action(&d, &space);
        let (reg, seq) = naive_action(&d, &space);
        assert_eq!(fast, Action::Moves(seq), "mask {mask}");
        assert!(close(cost_reg(&d, &DslProgram::Leaf(fast), space.lambda), reg));
    }
}

#[test]
fn fast_guard_search_is_greedy_optimal() {
    let space = CandidateSpace { action_bound: 2, guard_bound: 3, ..CandidateSpace::new(Language::PointsTo) };
    for mask in 1..(1u32 << SMALL.len()) {
        let srcs: Vec<&str> = SMALL.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, s)| *s).collect();
        let d = dataset(Mode::PointsToVar, &srcs);
        for a in [gen_action(&d, &space), Action::Moves(vec![Move::Right]), Action::Moves(vec![])] {
            let naive = naive_best_gain(&a, &d, &space);
            match gen_branch(&a, &d, &space) {
                Some((g, v)) => assert!(close(info_gain(&d, &a, &g, &v), naive), "mask {mask}"),
                None => assert!(naive <= space.ig_tolerance, "mask {mask}"),
            }
        }
    }
}

#[test]
fn synthesis_is_correct_and_deterministic() {
    let space = CandidateSpace::new(Language::PointsTo);
    for mode in [Mode::PointsToVar, Mode::PointsToThis] {
        let d = dataset(
            mode,
            &[
                "function f(v) { return this; }\nvar o = {m: f};\no.m(1);\nf();\n[1].filter(f, o);",
                "function g() { var z = this; return z; }\nvar w = new g();\nvar q = {g: g};\nq.g();",
            ],
        );
        let p = synthesize(&d, &space).unwrap();
        assert!(is_correct_on(&d, &p));
        assert_eq!(render_program(&p), render_program(&synthesize(&d, &space).unwrap()));
    }
    let alloc = CandidateSpace::new(Language::Alloc);
    let d = dataset(Mode::AllocSite, &["var obj = {};\nvar obj2 = new Object(obj);\nvar obj3 = new Object({a: 1});"]);
    let p = synthesize(&d, &alloc).unwrap();
    assert!(is_correct_on(&d, &p));
}
