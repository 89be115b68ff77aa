//! MiniJS: parser, canonical printer and instrumented interpreter.

mod ast;
mod interp;
mod parser;
mod render;
mod trace;

pub use ast::{Ast, Distinguished, Node, NodeId, NodeKind, SyntaxNode};
pub use interp::{
    interpret, interpret_with, reserved_globals, InterpConfig, InterpretFailure, RuntimeError, GLOBAL, NULL,
    UNDEFINED,
};
pub use parser::{parse, parse_syntax, SyntaxError, KEYWORDS};
pub use render::{render, render_node};
pub use trace::{ObjectId, Trace, TraceEvent, ValueClass};
