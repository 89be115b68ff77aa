use super::{Acceptable, Dataset, Example, Label};
use crate::dsl::{exec_program, DslProgram, Execution, LatticeResult};
use rayon::prelude::*;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Verdict {
    Precise,
    SoundApprox,
    Unsound,
}

pub fn run_on(pa: &DslProgram, ex: &Example) -> Execution {
    exec_program(pa, &ex.program.ast, ex.query, &ex.call_trace)
}

pub fn check_correct(result: LatticeResult, ex: &Example) -> Verdict {
    let precise = |ok: bool| if ok { Verdict::Precise } else { Verdict::Unsound };
    match (result, &ex.label) {
        (LatticeResult::Top, _) => Verdict::SoundApprox,
        (LatticeResult::Node(n), Label::PointsTo { accept, .. }) => precise(match accept {
            Acceptable::Fresh => n == ex.query,
            Acceptable::Sites(s) => n != ex.query && s.binary_search(&n).is_ok(),
        }),
        (LatticeResult::NewAlloc, Label::Alloc { is_alloc }) => precise(*is_alloc),
        (LatticeResult::NoAlloc, Label::Alloc { is_alloc }) => precise(!*is_alloc),
        _ => Verdict::Unsound,
    }
}

/// 0 when `pa` answers `ex` precisely, 1 otherwise.
pub fn r(ex: &Example, pa: &DslProgram) -> u32 {
    u32::from(check_correct(run_on(pa, ex).result, ex) != Verdict::Precise)
}

pub fn cost(d: &Dataset, pa: &DslProgram) -> u64 {
    d.examples().par_iter().map(|e| u64::from(r(e, pa))).sum()
}

pub fn is_correct_on(d: &Dataset, pa: &DslProgram) -> bool {
    d.examples().par_iter().all(|e| check_correct(run_on(pa, e).result, e) != Verdict::Unsound)
}
