//! Tree-navigation analysis languages: instructions, decision-tree programs,
//! small-step execution and the `.dsl` text format.

mod exec;
mod instr;
mod program;

pub use exec::{exec_guard, exec_program, mv, step, wr, write, ExecState, Execution, Pos};
pub use instr::{Context, Instr, Language, Move, Token, Write};
pub use program::{
    parse_program, render_program, render_program_inline, Action, AllocOutcome, DslProgram, LatticeResult,
    ProgramSyntaxError,
};
