//! Instrumented MiniJS interpreter. Every value lives in the heap under an
//! `ObjectId`; primitives get a fresh id each time they are produced, so
//! identity of ids is identity of runtime values as seen by the trace.

use super::ast::{Ast, Distinguished, NodeId, NodeKind};
use super::trace::{ObjectId, Trace, TraceEvent, ValueClass};
use std::cell::{Cell as StdCell, RefCell};
use std::collections::HashMap;
use std::rc::Rc;
use thiserror::Error;

#[derive(Clone, Debug)]
pub struct InterpConfig {
    pub max_call_depth: usize,
    pub max_steps: u64,
}

impl Default for InterpConfig {
    fn default() -> Self {
        InterpConfig { max_call_depth: 32, max_steps: 1_000_000 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("runtime error at node {node}: {message}")]
pub struct RuntimeError {
    pub node: NodeId,
    pub message: String,
}

/// A failed run: the error and the trace recorded up to the fault.
#[derive(Clone, Debug, Error)]
#[error("{error}")]
pub struct InterpretFailure {
    pub error: RuntimeError,
    pub trace: Trace,
}

pub const GLOBAL: ObjectId = ObjectId(0);
pub const UNDEFINED: ObjectId = ObjectId(1);
pub const NULL: ObjectId = ObjectId(2);

pub fn interpret(ast: &Ast) -> Result<Trace, InterpretFailure> {
    interpret_with(ast, &InterpConfig::default())
}

pub fn interpret_with(ast: &Ast, cfg: &InterpConfig) -> Result<Trace, InterpretFailure> {
    let mut it = Interp::new(ast, cfg);
    let result = it.run();
    let trace = Trace { events: it.events, classes: it.heap.iter().map(Cell::class).collect() };
    match result {
        Ok(()) => Ok(trace),
        Err(f) => Err(InterpretFailure { error: RuntimeError { node: f.node, message: f.message }, trace }),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Builtin {
    Object,
    Number,
    String,
    Boolean,
    Array,
    Call,
    Apply,
    Filter,
    Map,
    ForEach,
    Some,
    Every,
    Find,
    Slice,
    Push,
}

const GLOBAL_BUILTINS: &[(&str, Builtin)] = &[
    ("Object", Builtin::Object),
    ("Number", Builtin::Number),
    ("String", Builtin::String),
    ("Boolean", Builtin::Boolean),
    ("Array", Builtin::Array),
    ("call", Builtin::Call),
    ("apply", Builtin::Apply),
];

const ARRAY_METHODS: &[(&str, Builtin)] = &[
    ("filter", Builtin::Filter),
    ("map", Builtin::Map),
    ("forEach", Builtin::ForEach),
    ("some", Builtin::Some),
    ("every", Builtin::Every),
    ("find", Builtin::Find),
    ("slice", Builtin::Slice),
    ("push", Builtin::Push),
];

/// Names bound in the global scope before the program runs.
pub fn reserved_globals() -> impl Iterator<Item = &'static str> {
    ["global", "undefined"].into_iter().chain(GLOBAL_BUILTINS.iter().map(|(n, _)| *n))
}

type Env = Rc<RefCell<Scope>>;

struct Scope {
    vars: HashMap<Rc<str>, ObjectId>,
    parent: Option<Env>,
}

fn new_scope(parent: Option<Env>) -> Env {
    Rc::new(RefCell::new(Scope { vars: HashMap::new(), parent }))
}

enum ObjKind {
    Plain,
    Array(Vec<ObjectId>),
    Closure { func: NodeId, env: Env },
    Builtin(Builtin),
    Boxed(ObjectId),
}

struct Obj {
    props: Vec<(Rc<str>, ObjectId)>,
    kind: ObjKind,
}

enum Cell {
    Undefined,
    Null,
    Bool(bool),
    Num(f64),
    Str(Rc<str>),
    Obj(Obj),
}

impl Cell {
    fn class(&self) -> ValueClass {
        match self {
            Cell::Undefined => ValueClass::Undefined,
            Cell::Null => ValueClass::Null,
            Cell::Bool(_) | Cell::Num(_) | Cell::Str(_) => ValueClass::Primitive,
            Cell::Obj(_) => ValueClass::Object,
        }
    }
}

#[derive(Clone)]
struct Frame {
    this: ObjectId,
    env: Env,
    args: Rc<Vec<ObjectId>>,
    arguments: Rc<StdCell<Option<ObjectId>>>,
}

struct Fault {
    node: NodeId,
    message: String,
    fatal: bool,
}

type R<T> = Result<T, Fault>;

enum Flow {
    Normal,
    Return(ObjectId),
}

struct Interp<'a> {
    ast: &'a Ast,
    cfg: &'a InterpConfig,
    heap: Vec<Cell>,
    events: Vec<TraceEvent>,
    calls: Vec<NodeId>,
    steps: u64,
    global_env: Env,
    methods: HashMap<&'static str, ObjectId>,
}

fn fault<T>(node: NodeId, message: impl Into<String>) -> R<T> {
    Err(Fault { node, message: message.into(), fatal: false })
}

fn format_num(n: f64) -> String {
    if n.is_nan() {
        "NaN".to_string()
    } else if n.is_infinite() {
        if n > 0.0 { "Infinity" } else { "-Infinity" }.to_string()
    } else if n == n.trunc() && n.abs() < 1e21 {
        format!("{}", n as i64)
    } else {
        format!("{n}")
    }
}

impl<'a> Interp<'a> {
    fn new(ast: &'a Ast, cfg: &'a InterpConfig) -> Self {
        Interp {
            ast,
            cfg,
            heap: Vec::new(),
            events: Vec::new(),
            calls: Vec::new(),
            steps: 0,
            global_env: new_scope(None),
            methods: HashMap::new(),
        }
    }

    fn alloc(&mut self, cell: Cell, at: NodeId) -> ObjectId {
        let id = ObjectId(self.heap.len() as u32);
        self.heap.push(cell);
        self.events.push(TraceEvent::Alloc { obj: id, at });
        id
    }

    fn read(&mut self, obj: ObjectId, at: NodeId) {
        self.events.push(TraceEvent::ObjectRead { obj, at });
    }

    fn alloc_read(&mut self, cell: Cell, at: NodeId) -> ObjectId {
        let id = self.alloc(cell, at);
        self.read(id, at);
        id
    }

    fn obj(&mut self, kind: ObjKind) -> Cell {
        Cell::Obj(Obj { props: Vec::new(), kind })
    }

    fn step(&mut self, node: NodeId) -> R<()> {
        self.steps += 1;
        if self.steps > self.cfg.max_steps {
            return Err(Fault { node, message: "step budget exhausted".into(), fatal: true });
        }
        Ok(())
    }

    fn run(&mut self) -> R<()> {
        let ast = self.ast;
        let g_node = ast.distinguished(Distinguished::Global);
        let global = self.alloc_read(Cell::Obj(Obj { props: Vec::new(), kind: ObjKind::Plain }), g_node);
        let undef = self.alloc_read(Cell::Undefined, ast.distinguished(Distinguished::Undefined));
        let null = self.alloc_read(Cell::Null, ast.distinguished(Distinguished::Null));
        debug_assert_eq!((global, undef, null), (GLOBAL, UNDEFINED, NULL));
        self.read(GLOBAL, ast.distinguished(Distinguished::This));
        self.declare(&self.global_env.clone(), "global", GLOBAL);
        self.declare(&self.global_env.clone(), "undefined", UNDEFINED);
        for (name, b) in GLOBAL_BUILTINS {
            let cell = self.obj(ObjKind::Builtin(*b));
            let id = self.alloc(cell, g_node);
            self.declare(&self.global_env.clone(), name, id);
        }
        for (name, b) in ARRAY_METHODS {
            let cell = self.obj(ObjKind::Builtin(*b));
            let id = self.alloc(cell, g_node);
            self.methods.insert(name, id);
        }
        let frame = Frame {
            this: GLOBAL,
            env: self.global_env.clone(),
            args: Rc::new(Vec::new()),
            arguments: Rc::new(StdCell::new(None)),
        };
        let root = ast.root();
        self.hoist(root, &frame)?;
        let body = ast.children(root).to_vec();
        for s in body {
            if let Flow::Return(_) = self.exec(s, &frame)? {
                break;
            }
        }
        Ok(())
    }

    fn declare(&mut self, env: &Env, name: &str, value: ObjectId) {
        env.borrow_mut().vars.insert(Rc::from(name), value);
    }

    fn lookup(&self, env: &Env, name: &str) -> Option<ObjectId> {
        let mut cur = Some(env.clone());
        while let Some(e) = cur {
            if let Some(v) = e.borrow().vars.get(name) {
                return Some(*v);
            }
            cur = e.borrow().parent.clone();
        }
        None
    }

    fn assign_var(&mut self, env: &Env, name: &str, value: ObjectId) {
        let mut cur = Some(env.clone());
        while let Some(e) = cur {
            if let Some(slot) = e.borrow_mut().vars.get_mut(name) {
                *slot = value;
                return;
            }
            cur = e.borrow().parent.clone();
        }
        self.declare(&self.global_env.clone(), name, value);
    }

    /// Binds the `var` names of a function body (or the program) and creates
    /// the closures of its direct function declarations.
    fn hoist(&mut self, scope_node: NodeId, frame: &Frame) -> R<()> {
        let ast = self.ast;
        let mut stack: Vec<NodeId> = ast.children(scope_node).iter().rev().copied().collect();
        let mut names = Vec::new();
        while let Some(n) = stack.pop() {
            match ast.kind(n) {
                NodeKind::VarDeclaration | NodeKind::FunctionDeclaration => {
                    names.push(ast.value(n).unwrap_or_default().to_string());
                }
                _ => {}
            }
            if !ast.kind(n).is_function() {
                stack.extend(ast.children(n).iter().rev());
            }
        }
        for name in names {
            if !frame.env.borrow().vars.contains_key(name.as_str()) {
                self.declare(&frame.env, &name, UNDEFINED);
            }
        }
        let body = match ast.kind(scope_node) {
            NodeKind::Program => scope_node,
            _ => *ast.children(scope_node).last().expect("function body"),
        };
        for s in ast.children(body).to_vec() {
            if ast.kind(s) == NodeKind::FunctionDeclaration {
                self.define_function(s, frame);
            }
        }
        Ok(())
    }

    fn define_function(&mut self, decl: NodeId, frame: &Frame) -> ObjectId {
        let cell = self.obj(ObjKind::Closure { func: decl, env: frame.env.clone() });
        let id = self.alloc_read(cell, decl);
        let name = self.ast.value(decl).unwrap_or_default().to_string();
        self.declare(&frame.env, &name, id);
        id
    }

    fn exec_block(&mut self, block: NodeId, frame: &Frame) -> R<Flow> {
        for s in self.ast.children(block).to_vec() {
            if let Flow::Return(v) = self.exec(s, frame)? {
                return Ok(Flow::Return(v));
            }
        }
        Ok(Flow::Normal)
    }

    fn exec(&mut self, s: NodeId, frame: &Frame) -> R<Flow> {
        self.step(s)?;
        let ast = self.ast;
        let ch = ast.children(s);
        match ast.kind(s) {
            NodeKind::VarDeclaration => {
                if let Some(init) = ch.first() {
                    let v = self.eval(*init, frame)?;
                    let name = ast.value(s).unwrap_or_default();
                    self.assign_var(&frame.env, name, v);
                }
                Ok(Flow::Normal)
            }
            NodeKind::FunctionDeclaration => {
                let parent = ast.parent(s).expect("declaration has a parent");
                let direct = match ast.kind(parent) {
                    NodeKind::Program => true,
                    NodeKind::BlockStatement => {
                        ast.parent(parent).is_some_and(|gp| ast.kind(gp).is_function())
                    }
                    _ => false,
                };
                if !direct {
                    self.define_function(s, frame);
                }
                Ok(Flow::Normal)
            }
            NodeKind::Assignment => {
                self.assign(ch[0], ch[1], frame)?;
                Ok(Flow::Normal)
            }
            NodeKind::ExpressionStatement => {
                self.eval(ch[0], frame)?;
                Ok(Flow::Normal)
            }
            NodeKind::ReturnStatement => {
                let v = match ch.first() {
                    Some(e) => self.eval(*e, frame)?,
                    None => UNDEFINED,
                };
                Ok(Flow::Return(v))
            }
            NodeKind::IfStatement => {
                let t = self.eval(ch[0], frame)?;
                if self.truthy(t) {
                    self.exec_block(ch[1], frame)
                } else if let Some(alt) = ch.get(2) {
                    self.exec(*alt, frame)
                } else {
                    Ok(Flow::Normal)
                }
            }
            NodeKind::BlockStatement => self.exec_block(s, frame),
            NodeKind::TryStatement => {
                let depth = self.calls.len();
                match self.exec_block(ch[0], frame) {
                    Err(f) if !f.fatal => {
                        debug_assert_eq!(self.calls.len(), depth);
                        let clause = ast.children(ch[1]);
                        let param = clause[0];
                        let err = self.obj(ObjKind::Plain);
                        let e = self.alloc_read(err, param);
                        let env = new_scope(Some(frame.env.clone()));
                        self.declare(&env, ast.value(param).unwrap_or_default(), e);
                        let inner = Frame { env, ..frame.clone() };
                        self.exec_block(clause[1], &inner)
                    }
                    other => other,
                }
            }
            k => unreachable!("{k} is not a statement"),
        }
    }

    fn assign(&mut self, target: NodeId, value: NodeId, frame: &Frame) -> R<()> {
        let ast = self.ast;
        match ast.kind(target) {
            NodeKind::Identifier => {
                let v = self.eval(value, frame)?;
                self.assign_var(&frame.env, ast.value(target).unwrap_or_default(), v);
                self.read(v, target);
            }
            NodeKind::MemberExpression => {
                let ch = ast.children(target);
                let o = self.eval(ch[0], frame)?;
                let v = self.eval(value, frame)?;
                let prop = ast.value(ch[1]).unwrap_or_default();
                self.set_prop(o, prop, v, target)?;
                self.read(v, ch[1]);
            }
            k => unreachable!("assignment to {k}"),
        }
        Ok(())
    }

    fn set_prop(&mut self, o: ObjectId, prop: &str, v: ObjectId, at: NodeId) -> R<()> {
        match &mut self.heap[o.index()] {
            Cell::Undefined | Cell::Null => fault(at, format!("cannot set property {prop} of undefined or null")),
            Cell::Obj(obj) => {
                match obj.props.iter_mut().find(|(k, _)| &**k == prop) {
                    Some(slot) => slot.1 = v,
                    None => obj.props.push((Rc::from(prop), v)),
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    fn get_prop(&mut self, o: ObjectId, prop: &str, at: NodeId) -> R<ObjectId> {
        let found = match &self.heap[o.index()] {
            Cell::Undefined | Cell::Null => {
                return fault(at, format!("cannot read property {prop} of undefined or null"))
            }
            Cell::Str(s) if prop == "length" => Err(s.chars().count() as f64),
            Cell::Obj(obj) => match obj.props.iter().find(|(k, _)| &**k == prop) {
                Some((_, v)) => Ok(*v),
                None => match &obj.kind {
                    ObjKind::Array(items) if prop == "length" => Err(items.len() as f64),
                    ObjKind::Array(_) => Ok(self.methods.get(prop).copied().unwrap_or(UNDEFINED)),
                    _ => Ok(UNDEFINED),
                },
            },
            _ => Ok(UNDEFINED),
        };
        Ok(match found {
            Ok(v) => v,
            Err(n) => self.alloc(Cell::Num(n), at),
        })
    }

    fn truthy(&self, v: ObjectId) -> bool {
        match &self.heap[v.index()] {
            Cell::Undefined | Cell::Null => false,
            Cell::Bool(b) => *b,
            Cell::Num(n) => *n != 0.0 && !n.is_nan(),
            Cell::Str(s) => !s.is_empty(),
            Cell::Obj(_) => true,
        }
    }

    fn to_number(&self, v: ObjectId) -> f64 {
        match &self.heap[v.index()] {
            Cell::Undefined => f64::NAN,
            Cell::Null => 0.0,
            Cell::Bool(b) => f64::from(u8::from(*b)),
            Cell::Num(n) => *n,
            Cell::Str(s) => {
                let t = s.trim();
                if t.is_empty() {
                    0.0
                } else {
                    t.parse().unwrap_or(f64::NAN)
                }
            }
            Cell::Obj(o) => match o.kind {
                ObjKind::Boxed(p) => self.to_number(p),
                _ => f64::NAN,
            },
        }
    }

    fn to_string(&self, v: ObjectId) -> String {
        match &self.heap[v.index()] {
            Cell::Undefined => "undefined".into(),
            Cell::Null => "null".into(),
            Cell::Bool(b) => b.to_string(),
            Cell::Num(n) => format_num(*n),
            Cell::Str(s) => s.to_string(),
            Cell::Obj(o) => match &o.kind {
                ObjKind::Boxed(p) => self.to_string(*p),
                ObjKind::Array(items) => {
                    items.iter().map(|i| self.to_string(*i)).collect::<Vec<_>>().join(",")
                }
                ObjKind::Closure { .. } | ObjKind::Builtin(_) => "function".into(),
                ObjKind::Plain => "[object Object]".into(),
            },
        }
    }

    fn is_callable(&self, v: ObjectId) -> bool {
        matches!(&self.heap[v.index()], Cell::Obj(Obj { kind: ObjKind::Closure { .. } | ObjKind::Builtin(_), .. }))
    }

    fn strict_equal(&self, a: ObjectId, b: ObjectId) -> bool {
        match (&self.heap[a.index()], &self.heap[b.index()]) {
            (Cell::Undefined, Cell::Undefined) | (Cell::Null, Cell::Null) => true,
            (Cell::Bool(x), Cell::Bool(y)) => x == y,
            (Cell::Num(x), Cell::Num(y)) => x == y,
            (Cell::Str(x), Cell::Str(y)) => x == y,
            (Cell::Obj(_), Cell::Obj(_)) => a == b,
            _ => false,
        }
    }

    fn loose_equal(&self, a: ObjectId, b: ObjectId) -> bool {
        let nullish = |v: ObjectId| matches!(self.heap[v.index()], Cell::Undefined | Cell::Null);
        (nullish(a) && nullish(b)) || self.strict_equal(a, b)
    }

    fn eval(&mut self, e: NodeId, frame: &Frame) -> R<ObjectId> {
        self.step(e)?;
        let ast = self.ast;
        let ch = ast.children(e);
        match ast.kind(e) {
            NodeKind::Identifier => {
                let name = ast.value(e).unwrap_or_default();
                match self.lookup(&frame.env, name) {
                    Some(v) => {
                        self.read(v, e);
                        Ok(v)
                    }
                    None => fault(e, format!("{name} is not defined")),
                }
            }
            NodeKind::LiteralNumber => {
                let n = ast.value(e).unwrap_or_default().parse().unwrap_or(f64::NAN);
                Ok(self.alloc_read(Cell::Num(n), e))
            }
            NodeKind::LiteralString => {
                let s: Rc<str> = Rc::from(ast.value(e).unwrap_or_default());
                Ok(self.alloc_read(Cell::Str(s), e))
            }
            NodeKind::LiteralBoolean => {
                let b = ast.value(e) == Some("true");
                Ok(self.alloc_read(Cell::Bool(b), e))
            }
            NodeKind::LiteralNull => {
                self.read(NULL, e);
                Ok(NULL)
            }
            NodeKind::ThisExpression => {
                self.read(frame.this, e);
                Ok(frame.this)
            }
            NodeKind::Argument => {
                let obj = match frame.arguments.get() {
                    Some(o) => o,
                    None => {
                        let cell = self.obj(ObjKind::Array(frame.args.to_vec()));
                        let o = self.alloc(cell, e);
                        frame.arguments.set(Some(o));
                        o
                    }
                };
                self.read(obj, e);
                Ok(obj)
            }
            NodeKind::ObjectExpression => {
                let mut props: Vec<(Rc<str>, ObjectId)> = Vec::new();
                for pair in ch.chunks(2) {
                    let v = self.eval(pair[1], frame)?;
                    let key: Rc<str> = Rc::from(ast.value(pair[0]).unwrap_or_default());
                    match props.iter_mut().find(|(k, _)| *k == key) {
                        Some(slot) => slot.1 = v,
                        None => props.push((key, v)),
                    }
                }
                Ok(self.alloc_read(Cell::Obj(Obj { props, kind: ObjKind::Plain }), e))
            }
            NodeKind::ArrayExpression => {
                let mut items = Vec::with_capacity(ch.len());
                for c in ch {
                    items.push(self.eval(*c, frame)?);
                }
                let cell = self.obj(ObjKind::Array(items));
                Ok(self.alloc_read(cell, e))
            }
            NodeKind::FunctionExpression => {
                let env = match ast.value(e) {
                    Some(_) => new_scope(Some(frame.env.clone())),
                    None => frame.env.clone(),
                };
                let cell = self.obj(ObjKind::Closure { func: e, env: env.clone() });
                let id = self.alloc_read(cell, e);
                if let Some(name) = ast.value(e) {
                    self.declare(&env, name, id);
                }
                Ok(id)
            }
            NodeKind::MemberExpression => {
                let o = self.eval(ch[0], frame)?;
                let prop = ast.value(ch[1]).unwrap_or_default();
                let v = self.get_prop(o, prop, ch[1])?;
                self.read(v, ch[1]);
                Ok(v)
            }
            NodeKind::CallExpression => {
                let callee = ch[0];
                let (f, this) = if ast.kind(callee) == NodeKind::MemberExpression {
                    let mch = ast.children(callee);
                    let o = self.eval(mch[0], frame)?;
                    let prop = ast.value(mch[1]).unwrap_or_default();
                    let f = self.get_prop(o, prop, mch[1])?;
                    self.read(f, mch[1]);
                    (f, o)
                } else {
                    (self.eval(callee, frame)?, GLOBAL)
                };
                let mut args = Vec::with_capacity(ch.len() - 1);
                for a in &ch[1..] {
                    args.push(self.eval(*a, frame)?);
                }
                let r = self.invoke(f, this, args, e)?;
                self.read(r, e);
                Ok(r)
            }
            NodeKind::NewExpression => {
                let callee = ch[0];
                let f = match ast.kind(callee) {
                    NodeKind::Identifier => {
                        let name = ast.value(callee).unwrap_or_default();
                        match self.lookup(&frame.env, name) {
                            Some(v) => v,
                            None => return fault(callee, format!("{name} is not defined")),
                        }
                    }
                    NodeKind::MemberExpression => {
                        let mch = ast.children(callee);
                        let o = self.eval(mch[0], frame)?;
                        let prop = ast.value(mch[1]).unwrap_or_default();
                        self.get_prop(o, prop, mch[1])?
                    }
                    _ => self.eval(callee, frame)?,
                };
                let mut args = Vec::with_capacity(ch.len() - 1);
                for a in &ch[1..] {
                    args.push(self.eval(*a, frame)?);
                }
                let r = self.construct(f, args, e)?;
                self.read(r, e);
                Ok(r)
            }
            NodeKind::UnaryExpression => {
                let v = self.eval(ch[0], frame)?;
                let cell = match ast.value(e).unwrap_or_default() {
                    "!" => Cell::Bool(!self.truthy(v)),
                    "-" => Cell::Num(-self.to_number(v)),
                    _ => Cell::Str(Rc::from(self.type_of(v))),
                };
                Ok(self.alloc_read(cell, e))
            }
            NodeKind::BinaryExpression => {
                let op = ast.value(e).unwrap_or_default();
                let l = self.eval(ch[0], frame)?;
                if op == "||" || op == "&&" {
                    let short = self.truthy(l) == (op == "||");
                    let v = if short { l } else { self.eval(ch[1], frame)? };
                    self.read(v, e);
                    return Ok(v);
                }
                let r = self.eval(ch[1], frame)?;
                let cell = self.binary(op, l, r);
                Ok(self.alloc_read(cell, e))
            }
            k => unreachable!("{k} is not an expression"),
        }
    }

    fn type_of(&self, v: ObjectId) -> &'static str {
        match &self.heap[v.index()] {
            Cell::Undefined => "undefined",
            Cell::Null => "object",
            Cell::Bool(_) => "boolean",
            Cell::Num(_) => "number",
            Cell::Str(_) => "string",
            Cell::Obj(_) if self.is_callable(v) => "function",
            Cell::Obj(_) => "object",
        }
    }

    fn binary(&self, op: &str, l: ObjectId, r: ObjectId) -> Cell {
        let is_str = |v: ObjectId| matches!(self.heap[v.index()], Cell::Str(_));
        match op {
            "+" if is_str(l) || is_str(r) => {
                Cell::Str(Rc::from(format!("{}{}", self.to_string(l), self.to_string(r))))
            }
            "+" => Cell::Num(self.to_number(l) + self.to_number(r)),
            "-" => Cell::Num(self.to_number(l) - self.to_number(r)),
            "*" => Cell::Num(self.to_number(l) * self.to_number(r)),
            "/" => Cell::Num(self.to_number(l) / self.to_number(r)),
            "%" => Cell::Num(self.to_number(l) % self.to_number(r)),
            "==" => Cell::Bool(self.loose_equal(l, r)),
            "!=" => Cell::Bool(!self.loose_equal(l, r)),
            "===" => Cell::Bool(self.strict_equal(l, r)),
            "!==" => Cell::Bool(!self.strict_equal(l, r)),
            _ => {
                let ord = if is_str(l) && is_str(r) {
                    self.to_string(l).partial_cmp(&self.to_string(r))
                } else {
                    self.to_number(l).partial_cmp(&self.to_number(r))
                };
                let b = match (op, ord) {
                    (_, None) => false,
                    ("<", Some(o)) => o.is_lt(),
                    (">", Some(o)) => o.is_gt(),
                    ("<=", Some(o)) => o.is_le(),
                    (_, Some(o)) => o.is_ge(),
                };
                Cell::Bool(b)
            }
        }
    }

    /// `this` for builtins that take an explicit receiver.
    fn bind_this(&mut self, v: Option<ObjectId>, site: NodeId) -> ObjectId {
        match v.map(|v| (v, self.heap[v.index()].class())) {
            None | Some((_, ValueClass::Undefined | ValueClass::Null)) => GLOBAL,
            Some((v, ValueClass::Primitive)) => {
                let cell = self.obj(ObjKind::Boxed(v));
                self.alloc(cell, site)
            }
            Some((v, ValueClass::Object)) => v,
        }
    }

    fn construct(&mut self, f: ObjectId, args: Vec<ObjectId>, site: NodeId) -> R<ObjectId> {
        let kind = match &self.heap[f.index()] {
            Cell::Obj(Obj { kind: ObjKind::Closure { .. }, .. }) => None,
            Cell::Obj(Obj { kind: ObjKind::Builtin(b), .. }) => Some(*b),
            _ => return fault(site, "not a constructor"),
        };
        match kind {
            None => {
                let cell = self.obj(ObjKind::Plain);
                let obj = self.alloc(cell, site);
                let r = self.invoke(f, obj, args, site)?;
                Ok(if self.heap[r.index()].class() == ValueClass::Object { r } else { obj })
            }
            Some(Builtin::Object) => Ok(self.object_of(args.first().copied(), site)),
            Some(b @ (Builtin::Number | Builtin::String | Builtin::Boolean)) => {
                let prim = self.convert(b, args.first().copied(), site);
                let cell = self.obj(ObjKind::Boxed(prim));
                Ok(self.alloc(cell, site))
            }
            Some(Builtin::Array) => {
                let cell = self.obj(ObjKind::Array(args));
                Ok(self.alloc(cell, site))
            }
            Some(_) => fault(site, "not a constructor"),
        }
    }

    fn object_of(&mut self, v: Option<ObjectId>, site: NodeId) -> ObjectId {
        match v.map(|v| (v, self.heap[v.index()].class())) {
            Some((v, ValueClass::Object)) => v,
            Some((v, ValueClass::Primitive)) => {
                let cell = self.obj(ObjKind::Boxed(v));
                self.alloc(cell, site)
            }
            _ => {
                let cell = self.obj(ObjKind::Plain);
                self.alloc(cell, site)
            }
        }
    }

    fn convert(&mut self, b: Builtin, v: Option<ObjectId>, site: NodeId) -> ObjectId {
        let cell = match (b, v) {
            (Builtin::Number, None) => Cell::Num(0.0),
            (Builtin::Number, Some(v)) => Cell::Num(self.to_number(v)),
            (Builtin::String, None) => Cell::Str(Rc::from("")),
            (Builtin::String, Some(v)) => Cell::Str(Rc::from(self.to_string(v))),
            (_, v) => Cell::Bool(v.is_some_and(|v| self.truthy(v))),
        };
        self.alloc(cell, site)
    }

    fn array_items(&self, v: ObjectId) -> Option<Vec<ObjectId>> {
        match &self.heap[v.index()] {
            Cell::Obj(Obj { kind: ObjKind::Array(items), .. }) => Some(items.clone()),
            _ => None,
        }
    }

    fn invoke(&mut self, f: ObjectId, this: ObjectId, args: Vec<ObjectId>, site: NodeId) -> R<ObjectId> {
        let target = match &self.heap[f.index()] {
            Cell::Obj(Obj { kind: ObjKind::Closure { func, env }, .. }) => Ok((*func, env.clone())),
            Cell::Obj(Obj { kind: ObjKind::Builtin(b), .. }) => Err(*b),
            _ => return fault(site, "not a function"),
        };
        match target {
            Ok((func, env)) => self.call_closure(func, env, this, args, site),
            Err(b) => self.call_builtin(b, this, args, site),
        }
    }

    fn call_closure(&mut self, func: NodeId, env: Env, this: ObjectId, args: Vec<ObjectId>, site: NodeId) -> R<ObjectId> {
        if self.calls.len() >= self.cfg.max_call_depth {
            return Err(Fault { node: site, message: "maximum call depth exceeded".into(), fatal: true });
        }
        let ast = self.ast;
        self.calls.push(site);
        self.events.push(TraceEvent::MethodEnter { call_site: site });
        let scope = new_scope(Some(env));
        self.events.push(TraceEvent::ThisRead { obj: this, at: func, call_trace: self.calls.clone() });
        let frame = Frame {
            this,
            env: scope,
            args: Rc::new(args.clone()),
            arguments: Rc::new(StdCell::new(None)),
        };
        let ch = ast.children(func);
        let params = &ch[..ch.len() - 1];
        for (i, p) in params.iter().enumerate() {
            let v = args.get(i).copied().unwrap_or(UNDEFINED);
            self.declare(&frame.env, ast.value(*p).unwrap_or_default(), v);
            self.events.push(TraceEvent::ParamRead { obj: v, at: *p, call_trace: self.calls.clone() });
        }
        let result = self.hoist(func, &frame).and_then(|_| self.exec_block(ch[ch.len() - 1], &frame));
        self.events.push(TraceEvent::MethodExit);
        self.calls.pop();
        match result? {
            Flow::Return(v) => Ok(v),
            Flow::Normal => Ok(UNDEFINED),
        }
    }

    fn call_builtin(&mut self, b: Builtin, this: ObjectId, args: Vec<ObjectId>, site: NodeId) -> R<ObjectId> {
        let arg = |i: usize| args.get(i).copied();
        match b {
            Builtin::Object => Ok(self.object_of(arg(0), site)),
            Builtin::Number | Builtin::String | Builtin::Boolean => Ok(self.convert(b, arg(0), site)),
            Builtin::Array => {
                let cell = self.obj(ObjKind::Array(args));
                Ok(self.alloc(cell, site))
            }
            Builtin::Call => {
                let f = arg(0).unwrap_or(UNDEFINED);
                let t = self.bind_this(arg(1), site);
                let rest = args.get(2..).map(<[ObjectId]>::to_vec).unwrap_or_default();
                self.invoke(f, t, rest, site)
            }
            Builtin::Apply => {
                let f = arg(0).unwrap_or(UNDEFINED);
                let t = self.bind_this(arg(1), site);
                let rest = arg(2).and_then(|a| self.array_items(a)).unwrap_or_default();
                self.invoke(f, t, rest, site)
            }
            Builtin::Slice | Builtin::Push => {
                let Some(items) = self.array_items(this) else {
                    return fault(site, "receiver is not an array");
                };
                if b == Builtin::Push {
                    let mut items = items;
                    items.extend(args.iter().copied());
                    let len = items.len();
                    if let Cell::Obj(Obj { kind: ObjKind::Array(a), .. }) = &mut self.heap[this.index()] {
                        *a = items;
                    }
                    return Ok(self.alloc(Cell::Num(len as f64), site));
                }
                let len = items.len() as f64;
                let clamp = |x: f64| {
                    let x = if x < 0.0 { (len + x).max(0.0) } else { x.min(len) };
                    x as usize
                };
                let start = arg(0).map_or(0, |v| clamp(self.to_number(v).trunc()));
                let end = arg(1).map_or(items.len(), |v| clamp(self.to_number(v).trunc()));
                let part = if start < end { items[start..end].to_vec() } else { Vec::new() };
                let cell = self.obj(ObjKind::Array(part));
                Ok(self.alloc(cell, site))
            }
            Builtin::Filter | Builtin::Map | Builtin::ForEach | Builtin::Some | Builtin::Every | Builtin::Find => {
                let Some(items) = self.array_items(this) else {
                    return fault(site, "receiver is not an array");
                };
                let cb = arg(0).unwrap_or(UNDEFINED);
                if !self.is_callable(cb) {
                    return fault(site, "callback is not a function");
                }
                let mut out = Vec::new();
                for (i, item) in items.iter().enumerate() {
                    let t = self.bind_this(arg(1), site);
                    let idx = self.alloc(Cell::Num(i as f64), site);
                    let r = self.invoke(cb, t, vec![*item, idx, this], site)?;
                    let hit = self.truthy(r);
                    match b {
                        Builtin::Filter if hit => out.push(*item),
                        Builtin::Map => out.push(r),
                        Builtin::Some if hit => return Ok(self.alloc(Cell::Bool(true), site)),
                        Builtin::Every if !hit => return Ok(self.alloc(Cell::Bool(false), site)),
                        Builtin::Find if hit => return Ok(*item),
                        _ => {}
                    }
                }
                Ok(match b {
                    Builtin::Filter | Builtin::Map => {
                        let cell = self.obj(ObjKind::Array(out));
                        self.alloc(cell, site)
                    }
                    Builtin::Some => self.alloc(Cell::Bool(false), site),
                    Builtin::Every => self.alloc(Cell::Bool(true), site),
                    _ => UNDEFINED,
                })
            }
        }
    }
}
