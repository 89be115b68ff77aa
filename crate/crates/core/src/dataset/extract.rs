use super::{Acceptable, Example, Label, Mode, Program};
use crate::minilang::{Ast, NodeId, NodeKind, ObjectId, TraceEvent, ValueClass};
use std::collections::{HashMap, HashSet};
use std::sync::Arc;

/// Property name of a member expression or key of an object literal.
pub fn is_property_position(ast: &Ast, id: NodeId) -> bool {
    let Some(p) = ast.parent(id) else { return false };
    match ast.kind(p) {
        NodeKind::MemberExpression => ast.child_index(id) == 1,
        NodeKind::ObjectExpression => ast.child_index(id).is_multiple_of(2),
        _ => false,
    }
}

/// Nodes where `obj` has been read so far, in sorted order.
#[derive(Default)]
struct ReadHistory {
    sites: HashMap<ObjectId, Vec<NodeId>>,
}

impl ReadHistory {
    fn record(&mut self, obj: ObjectId, at: NodeId) {
        let v = self.sites.entry(obj).or_default();
        if let Err(i) = v.binary_search(&at) {
            v.insert(i, at);
        }
    }

    fn acceptable(&self, obj: ObjectId) -> Acceptable {
        match self.sites.get(&obj) {
            Some(v) if !v.is_empty() => Acceptable::Sites(v.clone()),
            _ => Acceptable::Fresh,
        }
    }
}

pub fn extract_examples(program: &Arc<Program>, mode: Mode) -> Vec<Example> {
    match mode {
        Mode::PointsToThis => points_to_this(program),
        Mode::PointsToVar => points_to_var(program),
        Mode::AllocSite => alloc_sites(program),
    }
}

fn example(program: &Arc<Program>, query: NodeId, call_trace: Vec<NodeId>, label: Label, mode: Mode) -> Example {
    Example { program: program.clone(), query, call_trace, label, mode }
}

fn points_to_this(program: &Arc<Program>) -> Vec<Example> {
    let mut history = ReadHistory::default();
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for e in &program.trace.events {
        if let TraceEvent::ThisRead { obj, at, call_trace } = e {
            if seen.insert((*at, call_trace.clone())) {
                let label = Label::PointsTo { obj: *obj, accept: history.acceptable(*obj) };
                out.push(example(program, *at, call_trace.clone(), label, Mode::PointsToThis));
            }
        }
        if let Some((obj, at)) = e.read() {
            history.record(obj, at);
        }
    }
    out
}

fn is_variable_occurrence(ast: &Ast, id: NodeId) -> bool {
    ast.kind(id) == NodeKind::Identifier && !ast.is_distinguished(id) && !is_property_position(ast, id)
}

fn points_to_var(program: &Arc<Program>) -> Vec<Example> {
    let ast = &program.ast;
    let mut history = ReadHistory::default();
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for e in &program.trace.events {
        if let TraceEvent::ObjectRead { obj, at } = e {
            if is_variable_occurrence(ast, *at) && seen.insert(*at) {
                let label = Label::PointsTo { obj: *obj, accept: history.acceptable(*obj) };
                out.push(example(program, *at, Vec::new(), label, Mode::PointsToVar));
            }
        }
        if let Some((obj, at)) = e.read() {
            history.record(obj, at);
        }
    }
    out
}

fn alloc_candidate(ast: &Ast, at: NodeId) -> bool {
    !ast.is_distinguished(at)
        && !matches!(ast.kind(at), NodeKind::ThisExpression | NodeKind::Argument)
        && !is_property_position(ast, at)
}

fn alloc_sites(program: &Arc<Program>) -> Vec<Example> {
    let ast = &program.ast;
    let trace = &program.trace;
    let mut frames: Vec<HashSet<ObjectId>> = vec![HashSet::new()];
    let mut first = HashSet::new();
    let mut out = Vec::new();
    for e in &trace.events {
        match e {
            TraceEvent::MethodEnter { .. } => frames.push(HashSet::new()),
            TraceEvent::MethodExit => {
                frames.pop();
            }
            TraceEvent::ObjectRead { obj, at } | TraceEvent::ParamRead { obj, at, .. } => {
                let frame = frames.last_mut().expect("global frame");
                if first.insert(*at) && alloc_candidate(ast, *at) && trace.class(*obj) == ValueClass::Object {
                    let label = Label::Alloc { is_alloc: !frame.contains(obj) };
                    out.push(example(program, *at, Vec::new(), label, Mode::AllocSite));
                }
                frame.insert(*obj);
            }
            TraceEvent::ThisRead { obj, .. } => {
                frames.last_mut().expect("global frame").insert(*obj);
            }
            TraceEvent::Alloc { .. } => {}
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn describe(e: &Example) -> String {
        let ast = &e.program.ast;
        let accept = match &e.label {
            Label::PointsTo { accept: Acceptable::Fresh, .. } => "SELF".to_string(),
            Label::PointsTo { accept: Acceptable::Sites(s), .. } => {
                s.iter().map(|n| ast.describe(*n)).collect::<Vec<_>>().join(",")
            }
            Label::Alloc { is_alloc } => is_alloc.to_string(),
        };
        format!("{} -> {}", ast.describe(e.query), accept)
    }

    #[test]
    fn assign_variable_points_to() {
        let p = Program::from_source("var b = {};\na = b;").unwrap();
        let ex: Vec<String> = extract_examples(&p, Mode::PointsToVar).iter().map(describe).collect();
        assert_eq!(ex, ["Identifier:b -> ObjectExpression", "Identifier:a -> ObjectExpression,Identifier:b"]);
    }

    #[test]
    fn empty_program_has_no_examples() {
        let p = Program::from_source("").unwrap();
        for m in Mode::ALL {
            assert!(extract_examples(&p, m).is_empty());
        }
    }

    #[test]
    fn object_constructor_alloc_labels() {
        let src = "var obj = {};\nvar obj2 = new Object(obj);\nvar obj3 = new Object({k: 1});";
        let p = Program::from_source(src).unwrap();
        let ex: Vec<String> = extract_examples(&p, Mode::AllocSite).iter().map(describe).collect();
        assert_eq!(
            ex,
            ["ObjectExpression -> true", "Identifier:obj -> false", "NewExpression -> false", "ObjectExpression -> true", "NewExpression -> false"]
        );
    }

    #[test]
    fn alloc_frames_are_per_call() {
        let src = "var o = {};\nfunction f() { var x = o; return o; }\nf();\nvar y = o;";
        let p = Program::from_source(src).unwrap();
        let ex: Vec<String> = extract_examples(&p, Mode::AllocSite).iter().map(describe).collect();
        assert_eq!(
            ex,
            [
                "FunctionDeclaration:f -> true",
                "ObjectExpression -> true",
                "Identifier:f -> false",
                "Identifier:o -> true",
                "Identifier:o -> false",
                "CallExpression -> false",
                "Identifier:o -> false",
            ]
        );
    }

    #[test]
    fn this_examples_global_and_boxed() {
        let src = "function isBig(value) {\n  return value >= this.length;\n}\nvar dat = [5, 3];\nvar a = dat.filter(isBig);\nvar b = dat.filter(isBig, 42);";
        let p = Program::from_source(src).unwrap();
        let ex = extract_examples(&p, Mode::PointsToThis);
        assert_eq!(ex.len(), 2);
        let Label::PointsTo { accept: Acceptable::Sites(s), .. } = &ex[0].label else { panic!() };
        assert!(s.contains(&p.ast.distinguished(crate::minilang::Distinguished::Global)));
        assert_eq!(ex[1].label, Label::PointsTo { obj: match &ex[1].label { Label::PointsTo { obj, .. } => *obj, _ => unreachable!() }, accept: Acceptable::Fresh });
    }

    #[test]
    fn acceptable_sites_precede_the_query() {
        let src = "var o = {a: {}};\nvar p = o.a;\nfunction g(x) { return this; }\nvar q = call(g, o, p);\nq = g(o);";
        let p = Program::from_source(src).unwrap();
        for mode in Mode::ALL {
            for e in extract_examples(&p, mode) {
                let Label::PointsTo { obj, accept: Acceptable::Sites(sites) } = &e.label else { continue };
                let idx = p
                    .trace
                    .events
                    .iter()
                    .position(|ev| match ev {
                        TraceEvent::ThisRead { at, call_trace, .. } => *at == e.query && *call_trace == e.call_trace,
                        TraceEvent::ObjectRead { at, .. } => *at == e.query && mode == Mode::PointsToVar,
                        _ => false,
                    })
                    .unwrap();
                for s in sites {
                    assert!(p.trace.events[..idx].iter().any(|ev| ev.read() == Some((*obj, *s))));
                }
            }
        }
    }
}
