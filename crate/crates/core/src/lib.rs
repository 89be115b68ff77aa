//! Learning static analyses (points-to of `this`, variable points-to and
//! allocation sites) from examples over MiniJS programs.

pub mod minilang;
pub mod dsl;
pub mod dataset;
pub mod synthesis;
pub mod oracle;
pub mod cli;
