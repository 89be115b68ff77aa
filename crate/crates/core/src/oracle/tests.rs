use super::*;
use crate::dataset::Mode;
use crate::dsl::{parse_program, Language};
use crate::minilang::{parse, Distinguished};

fn dataset(mode: Mode, sources: &[&str]) -> Dataset {
    let mut d = Dataset::new(mode);
    for s in sources {
        d.add_program(&Program::from_source(s).unwrap());
    }
    d
}

const ASSIGN: &str = "var b = {};\na = b;";

fn overfit() -> DslProgram {
    parse_program("DO [Up Left DownFirst]").unwrap()
}

#[test]
fn read_positions_of_simple_programs() {
    let d = dataset(Mode::PointsToVar, &[ASSIGN]);
    let a = &d.examples()[1];
    assert_eq!(read_positions(&DslProgram::top(Language::PointsTo), a), vec![a.query]);
    let ast = &a.program.ast;
    let descr: Vec<String> = read_positions(&overfit(), a).iter().map(|n| ast.describe(*n)).collect();
    assert_eq!(descr, ["Identifier:a", "Assignment", "VarDeclaration:b", "ObjectExpression"]);
}

#[test]
fn overfit_is_refuted_quickly() {
    let d = dataset(Mode::PointsToVar, &[ASSIGN]);
    let c = find_counterexample(&overfit(), &d, 5000).expect("counter-example");
    assert!(c.candidates_tried <= 20, "{}", c.candidates_tried);
    assert!(!d.contains(&c.example.program.source, c.example.query, &c.example.call_trace));
    assert_eq!(check_correct(run_on(&overfit(), &c.example).result, &c.example), Verdict::Unsound);
}

#[test]
fn top_has_no_counterexample() {
    let d = dataset(Mode::PointsToVar, &[ASSIGN, "function f() { return this; }\nvar o = {m: f};\no.m();"]);
    assert!(find_counterexample(&DslProgram::top(Language::PointsTo), &d, 5000).is_none());
    assert!(blackbox_counterexample(&DslProgram::top(Language::PointsTo), &d, 300, 7).is_none());
    let d = dataset(Mode::AllocSite, &["var o = new Object({});"]);
    assert!(find_counterexample(&DslProgram::top(Language::Alloc), &d, 5000).is_none());
}

#[test]
fn budget_limits_the_search() {
    let d = dataset(Mode::PointsToVar, &["var x = {};\nvar y = x;\nvar z = y;"]);
    let pa = parse_program("DO [UpUntilFunc DownFirst DownFirst]").unwrap();
    let c = find_counterexample(&pa, &d, 5000).unwrap();
    assert!(c.candidates_tried > 1);
    assert!(find_counterexample(&pa, &d, 1).is_none());
    assert!(find_counterexample(&pa, &d, c.candidates_tried - 1).is_none());
    assert_eq!(find_counterexample(&pa, &d, c.candidates_tried).unwrap().candidates_tried, c.candidates_tried);
}

#[test]
fn blackbox_is_reproducible() {
    let d = dataset(Mode::PointsToVar, &[ASSIGN, "var x = {};\nvar y = x;\nvar z = y;"]);
    let a = blackbox_counterexample(&overfit(), &d, 5000, 3).unwrap();
    let b = blackbox_counterexample(&overfit(), &d, 5000, 3).unwrap();
    assert_eq!(a.candidates_tried, b.candidates_tried);
    assert_eq!(a.example.program.source, b.example.program.source);
}

#[test]
fn batched_search_keeps_order() {
    let d = dataset(Mode::PointsToVar, &[ASSIGN]);
    let all = find_counterexamples(&overfit(), &d, 5000, 3);
    assert_eq!(all.len(), 3);
    assert!(all.windows(2).all(|w| w[0].candidates_tried < w[1].candidates_tried));
    assert_eq!(all[0].candidates_tried, find_counterexample(&overfit(), &d, 5000).unwrap().candidates_tried);
}

#[test]
fn loop_on_assign_converges_to_a_correct_program() {
    let d = dataset(Mode::PointsToVar, &[ASSIGN]);
    let space = CandidateSpace::new(Language::PointsTo);
    let out = learn_loop(&d, &space, &LoopConfig { max_iters: 100, ..LoopConfig::default() }).unwrap();
    assert!(out.converged);
    assert_eq!(out.log.len(), out.dataset.len() - d.len());
    assert!(crate::dataset::is_correct_on(&out.dataset, &out.program));
    let line = render_log(&out.log[..1]);
    assert!(line.starts_with("{\"iter\":0,\"violation\":"), "{line}");
    assert!(line.contains("\"candidatesTried\":"));
}

#[test]
fn zero_iterations_returns_the_first_synthesis() {
    let d = dataset(Mode::PointsToVar, &[ASSIGN]);
    let space = CandidateSpace::new(Language::PointsTo);
    let out = learn_loop(&d, &space, &LoopConfig { max_iters: 0, ..LoopConfig::default() }).unwrap();
    assert!(!out.converged);
    assert_eq!(out.program, synthesize(&d, &space).unwrap());
    assert!(out.log.is_empty());
}

const EMA_PROGRAMS: &[&str] = &[
    ASSIGN,
    "function isBig(value) { return value >= this.length; }\nvar dat = [5, 3];\nvar a = dat.filter(isBig, 42);\nvar b = dat.filter(isBig, dat);",
    "function f(v) { var s = {}; return s; }\nvar o = {m: f};\nvar r = o.m(1);\nvar q = new Object(r);\nvar t = new Object({k: 1});",
    "var x = {};\ntry { var y = x; undefinedFn(y); } catch (e) { var z = y; }\nif (z == x) { w = z; }",
    "function g(a) { return this; }\nvar p = call(g, {});\nvar h = function k(n) { return n; };\nvar u = h(p);",
];

#[test]
fn ema_mutants_preserve_labels() {
    for src in EMA_PROGRAMS {
        let orig = Program::from_source(src).unwrap();
        for site in orig.ast.tree_ids() {
            for m in mutate_ema(&orig.ast, site) {
                let prog = Program::from_ast(m.ast.clone()).unwrap_or_else(|e| panic!("{e:?}\n{}", render(&m.ast)));
                let map = transport_table(&orig.ast, &prog.ast);
                for mode in Mode::ALL {
                    let mutated = extract_examples(&prog, mode);
                    for eo in extract_examples(&orig, mode) {
                        let q = map[eo.query.index()].unwrap();
                        let trace: Vec<NodeId> = eo.call_trace.iter().map(|n| map[n.index()].unwrap()).collect();
                        let em = mutated.iter().find(|e| e.query == q && e.call_trace == trace);
                        let em = em.unwrap_or_else(|| panic!("{mode} {} lost in\n{}", orig.ast.describe(eo.query), prog.source));
                        let same = match (&eo.label, &em.label) {
                            (
                                crate::dataset::Label::PointsTo { accept: crate::dataset::Acceptable::Sites(a), .. },
                                crate::dataset::Label::PointsTo { accept: crate::dataset::Acceptable::Sites(b), .. },
                            ) => a.iter().map(|n| map[n.index()].unwrap()).collect::<Vec<_>>() == *b,
                            (a, b) => a.same_outcome(b),
                        };
                        assert!(same, "{mode} {} {:?} vs {:?}\n{}", orig.ast.describe(eo.query), eo.label, em.label, prog.source);
                    }
                }
            }
        }
    }
}

#[test]
fn transport_maps_distinguished_nodes() {
    let t = parse(ASSIGN).unwrap();
    for m in mutate_ema(&t, NodeId(4)) {
        let map = transport_table(&t, &m.ast);
        for r in Distinguished::ALL {
            assert_eq!(map[t.distinguished(r).index()], Some(m.ast.distinguished(r)));
        }
    }
}
