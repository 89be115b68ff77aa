use super::instr::{Context, Instr, Move, Token, Write};
use super::program::{Action, AllocOutcome, DslProgram, LatticeResult};
use crate::minilang::{Ast, Distinguished, NodeId};

/// Current position of an execution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Pos {
    Node(NodeId),
    Bottom,
    Top,
}

#[derive(Clone, Debug)]
pub struct ExecState<'a> {
    pub tree: &'a Ast,
    pub pos: Pos,
    pub ctx: Context,
    /// Remaining call trace, most recent call site last.
    pub call_trace: &'a [NodeId],
}

impl<'a> ExecState<'a> {
    pub fn new(tree: &'a Ast, node: NodeId, call_trace: &'a [NodeId]) -> Self {
        ExecState { tree, pos: Pos::Node(node), ctx: Vec::new(), call_trace }
    }
}

/// Result of one move from `node` with `calls` as the remaining call trace.
/// Returns the new position and the length of the call trace kept.
pub fn step(m: Move, tree: &Ast, node: NodeId, calls: &[NodeId]) -> (Pos, usize) {
    let depth = calls.len();
    let to = |n: Option<NodeId>| n.map_or(Pos::Bottom, Pos::Node);
    let pos = match m {
        Move::Up => to(tree.parent(node)),
        Move::Left => to(tree.left_sibling(node)),
        Move::Right => to(tree.right_sibling(node)),
        Move::DownFirst => to(tree.children(node).first().copied()),
        Move::DownLast => to(tree.children(node).last().copied()),
        Move::Top => Pos::Top,
        Move::GoToGlobal => Pos::Node(tree.distinguished(Distinguished::Global)),
        Move::GoToUndef => Pos::Node(tree.distinguished(Distinguished::Undefined)),
        Move::GoToNull => Pos::Node(tree.distinguished(Distinguished::Null)),
        Move::GoToThis => Pos::Node(tree.distinguished(Distinguished::This)),
        Move::UpUntilFunc => {
            let mut cur = node;
            while let Some(p) = tree.parent(cur) {
                if tree.kind(p).is_function() {
                    break;
                }
                cur = p;
            }
            Pos::Node(cur)
        }
        Move::GoToCaller => match calls.last() {
            Some(site) => return (Pos::Node(*site), depth - 1),
            None => Pos::Bottom,
        },
        Move::PrevNodeValue => to(tree.prev_same_value(node)),
        Move::PrevNodeType => to(tree.prev_same_kind(node)),
    };
    (pos, depth)
}

/// Token written at `node`; `has_caller` is whether the call trace is nonempty.
pub fn write(w: Write, tree: &Ast, node: NodeId, has_caller: bool) -> Token {
    let bit = |b: bool| Token::Num(u64::from(b));
    match w {
        Write::WriteValue => match tree.value(node) {
            Some(v) => Token::Str(v.to_string()),
            None => Token::Num(0),
        },
        Write::WritePos => Token::Num(tree.child_index(node) as u64 + 1),
        Write::WriteType => Token::Kind(tree.kind(node)),
        Write::HasLeft => bit(tree.left_sibling(node).is_some()),
        Write::HasRight => bit(tree.right_sibling(node).is_some()),
        Write::HasChild => bit(!tree.children(node).is_empty()),
        Write::HasCaller => bit(has_caller),
        Write::HasPrevNodeValue => bit(tree.prev_same_value(node).is_some()),
    }
}

/// Nodes a write inspects besides the current one.
fn inspected(w: Write, tree: &Ast, node: NodeId) -> Option<NodeId> {
    match w {
        Write::WritePos => tree.parent(node),
        Write::HasLeft => tree.left_sibling(node),
        Write::HasRight => tree.right_sibling(node),
        Write::HasChild => tree.children(node).first().copied(),
        Write::HasPrevNodeValue => tree.prev_same_value(node),
        _ => None,
    }
}

pub fn mv<'a>(m: Move, s: &ExecState<'a>) -> ExecState<'a> {
    let Pos::Node(n) = s.pos else { return s.clone() };
    let (pos, depth) = step(m, s.tree, n, s.call_trace);
    ExecState { tree: s.tree, pos, ctx: s.ctx.clone(), call_trace: &s.call_trace[..depth] }
}

/// Token for `w` at the current position. Positions off the tree never reach
/// a write: the move that produced them ends the instruction sequence.
pub fn wr(w: Write, s: &ExecState<'_>) -> Token {
    match s.pos {
        Pos::Node(n) => write(w, s.tree, n, !s.call_trace.is_empty()),
        _ => Token::Num(0),
    }
}

#[derive(Default)]
struct Visits {
    order: Vec<NodeId>,
}

impl Visits {
    fn add(&mut self, n: NodeId) {
        if !self.order.contains(&n) {
            self.order.push(n);
        }
    }
}

fn run_guard(guard: &[Instr], tree: &Ast, node: NodeId, calls: &[NodeId], visits: &mut Visits) -> Context {
    let mut ctx = Vec::new();
    let (mut n, mut depth) = (node, calls.len());
    for i in guard {
        match *i {
            Instr::Write(w) => {
                if let Some(x) = inspected(w, tree, n) {
                    visits.add(x);
                }
                ctx.push(write(w, tree, n, depth > 0));
            }
            Instr::Move(m) => match step(m, tree, n, &calls[..depth]) {
                (Pos::Node(next), d) => {
                    n = next;
                    depth = d;
                    visits.add(n);
                }
                _ => break,
            },
        }
    }
    ctx
}

pub fn exec_guard(g: &[Instr], s: &ExecState<'_>) -> Context {
    let Pos::Node(n) = s.pos else { return Vec::new() };
    run_guard(g, s.tree, n, s.call_trace, &mut Visits::default())
}

/// Result of running a program together with the nodes it looked at.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Execution {
    pub result: LatticeResult,
    /// Visited or inspected nodes in first-visit order.
    pub read_set: Vec<NodeId>,
}

pub fn exec_program(p: &DslProgram, tree: &Ast, node: NodeId, call_trace: &[NodeId]) -> Execution {
    let mut visits = Visits::default();
    visits.add(node);
    let mut cur = p;
    let result = loop {
        match cur {
            DslProgram::Branch { guard, expected, then, otherwise } => {
                let ctx = run_guard(guard, tree, node, call_trace, &mut visits);
                cur = if &ctx == expected { then } else { otherwise };
            }
            DslProgram::Leaf(Action::Alloc(o)) => {
                break match o {
                    AllocOutcome::NewAlloc => LatticeResult::NewAlloc,
                    AllocOutcome::NoAlloc => LatticeResult::NoAlloc,
                    AllocOutcome::Top => LatticeResult::Top,
                }
            }
            DslProgram::Leaf(Action::Moves(ms)) => {
                let (mut n, mut depth) = (node, call_trace.len());
                let mut result = None;
                for m in ms {
                    match step(*m, tree, n, &call_trace[..depth]) {
                        (Pos::Node(next), d) => {
                            n = next;
                            depth = d;
                            visits.add(n);
                        }
                        (Pos::Top, _) => {
                            result = Some(LatticeResult::Top);
                            break;
                        }
                        (Pos::Bottom, _) => {
                            result = Some(LatticeResult::Bottom);
                            break;
                        }
                    }
                }
                break result.unwrap_or(LatticeResult::Node(n));
            }
        }
    };
    Execution { result, read_set: visits.order }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_program;
    use crate::minilang::{parse, NodeKind};

    fn assign_tree() -> Ast {
        parse("var b = {};\na = b;").unwrap()
    }

    const A: NodeId = NodeId(4);
    const B: NodeId = NodeId(5);

    #[test]
    fn moves_on_assign() {
        let t = assign_tree();
        let s = ExecState::new(&t, A, &[]);
        assert_eq!(mv(Move::Right, &s).pos, Pos::Node(B));
        assert_eq!(mv(Move::Top, &s).pos, Pos::Top);
        assert_eq!(mv(Move::Up, &ExecState::new(&t, t.root(), &[])).pos, Pos::Bottom);
        assert_eq!(mv(Move::GoToCaller, &s).pos, Pos::Bottom);
        assert_eq!(mv(Move::UpUntilFunc, &s).pos, Pos::Node(t.root()));
        assert_eq!(mv(Move::PrevNodeValue, &ExecState::new(&t, B, &[])).pos, Pos::Node(NodeId(1)));
    }

    #[test]
    fn writes_on_assign() {
        let t = assign_tree();
        let s = ExecState::new(&t, A, &[]);
        assert_eq!(wr(Write::WritePos, &s), Token::Num(1));
        assert_eq!(wr(Write::HasLeft, &s), Token::Num(0));
        assert_eq!(wr(Write::HasRight, &s), Token::Num(1));
        assert_eq!(wr(Write::WriteValue, &s), Token::Str("a".into()));
        assert_eq!(wr(Write::WriteValue, &ExecState::new(&t, NodeId(3), &[])), Token::Num(0));
        assert_eq!(wr(Write::WriteType, &ExecState::new(&t, NodeId(3), &[])), Token::Kind(NodeKind::Assignment));
    }

    #[test]
    fn guard_contexts() {
        let t = assign_tree();
        let s = ExecState::new(&t, A, &[]);
        let g = [Instr::Write(Write::WritePos), Instr::Move(Move::Up), Instr::Write(Write::WriteType)];
        assert_eq!(exec_guard(&g, &s), vec![Token::Num(1), Token::Kind(NodeKind::Assignment)]);
        assert_eq!(exec_guard(&[], &s), Vec::<Token>::new());
        let fall = [Instr::Move(Move::Up), Instr::Move(Move::Up), Instr::Move(Move::Up), Instr::Write(Write::WriteType)];
        assert_eq!(exec_guard(&fall, &s), Vec::<Token>::new());
        let partial = [Instr::Write(Write::WritePos), Instr::Move(Move::DownFirst), Instr::Write(Write::WriteType)];
        assert_eq!(exec_guard(&partial, &s), vec![Token::Num(1)]);
    }

    #[test]
    fn assign_rule() {
        let t = assign_tree();
        let p = parse_program("IF [WritePos Up WriteType] = [1 Assignment] THEN DO [Right] ELSE DO [Top]").unwrap();
        let at_a = exec_program(&p, &t, A, &[]);
        assert_eq!(at_a.result, LatticeResult::Node(B));
        assert_eq!(at_a.read_set, vec![A, NodeId(3), B]);
        assert_eq!(exec_program(&p, &t, B, &[]).result, LatticeResult::Top);
        assert_eq!(exec_program(&DslProgram::moves([]), &t, NodeId(2), &[]).result, LatticeResult::Node(NodeId(2)));
        let top = exec_program(&DslProgram::moves([Move::Top]), &t, A, &[]);
        assert_eq!(top.read_set, vec![A]);
    }

    #[test]
    fn caller_navigation() {
        let t = parse("function f(v) { return this; }\nvar d = [1];\nd.filter(f, 42);").unwrap();
        let call = t.tree_ids().filter(|i| t.kind(*i) == NodeKind::CallExpression).last().unwrap();
        let p = parse_program("DO [GoToCaller DownFirst Right Right]").unwrap();
        let r = exec_program(&p, &t, NodeId(1), &[call]);
        assert_eq!(t.kind(match r.result { LatticeResult::Node(n) => n, _ => panic!() }), NodeKind::LiteralNumber);
        let g = [Instr::Move(Move::GoToCaller), Instr::Write(Write::HasCaller)];
        assert_eq!(exec_guard(&g, &ExecState::new(&t, NodeId(1), &[call])), vec![Token::Num(0)]);
        assert_eq!(exec_guard(&g[1..], &ExecState::new(&t, NodeId(1), &[call])), vec![Token::Num(1)]);
    }
}
