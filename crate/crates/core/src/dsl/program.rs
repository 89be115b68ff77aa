use super::instr::{Context, Instr, Language, Move, Token};
use crate::minilang::{NodeId, NodeKind};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AllocOutcome {
    NewAlloc,
    NoAlloc,
    Top,
}

impl AllocOutcome {
    pub const ALL: [AllocOutcome; 3] = [AllocOutcome::NewAlloc, AllocOutcome::NoAlloc, AllocOutcome::Top];

    fn keyword(self) -> &'static str {
        match self {
            AllocOutcome::NewAlloc => "NEWALLOC",
            AllocOutcome::NoAlloc => "NOALLOC",
            AllocOutcome::Top => "TOP",
        }
    }
}

/// Leaf of a program: a move sequence (points-to) or a fixed outcome (alloc).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    Moves(Vec<Move>),
    Alloc(AllocOutcome),
}

impl Action {
    pub fn language(&self) -> Language {
        match self {
            Action::Moves(_) => Language::PointsTo,
            Action::Alloc(_) => Language::Alloc,
        }
    }

    /// The always-sound leaf of a language.
    pub fn top(lang: Language) -> Action {
        match lang {
            Language::PointsTo => Action::Moves(vec![Move::Top]),
            Language::Alloc => Action::Alloc(AllocOutcome::Top),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum DslProgram {
    Leaf(Action),
    Branch {
        guard: Vec<Instr>,
        expected: Context,
        then: Box<DslProgram>,
        otherwise: Box<DslProgram>,
    },
}

impl DslProgram {
    pub fn moves(moves: impl Into<Vec<Move>>) -> DslProgram {
        DslProgram::Leaf(Action::Moves(moves.into()))
    }

    pub fn top(lang: Language) -> DslProgram {
        DslProgram::Leaf(Action::top(lang))
    }

    pub fn branch(guard: Vec<Instr>, expected: Context, then: DslProgram, otherwise: DslProgram) -> DslProgram {
        DslProgram::Branch { guard, expected, then: Box::new(then), otherwise: Box::new(otherwise) }
    }

    /// Language of the leaves, `None` if they disagree.
    pub fn language(&self) -> Option<Language> {
        match self {
            DslProgram::Leaf(a) => Some(a.language()),
            DslProgram::Branch { then, otherwise, .. } => {
                let l = then.language()?;
                (otherwise.language()? == l).then_some(l)
            }
        }
    }

    /// Checks that every guard and leaf uses only instructions of `lang`.
    pub fn conforms_to(&self, lang: Language) -> bool {
        match self {
            DslProgram::Leaf(Action::Moves(ms)) => {
                lang == Language::PointsTo && ms.iter().all(|m| lang.allows(Instr::Move(*m)))
            }
            DslProgram::Leaf(Action::Alloc(_)) => lang == Language::Alloc,
            DslProgram::Branch { guard, then, otherwise, .. } => {
                guard.iter().all(|i| lang.allows(*i)) && then.conforms_to(lang) && otherwise.conforms_to(lang)
            }
        }
    }

    pub fn leaves(&self) -> Vec<&Action> {
        match self {
            DslProgram::Leaf(a) => vec![a],
            DslProgram::Branch { then, otherwise, .. } => {
                let mut v = then.leaves();
                v.extend(otherwise.leaves());
                v
            }
        }
    }
}

/// Analysis result lattice element.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LatticeResult {
    Node(NodeId),
    NewAlloc,
    NoAlloc,
    Top,
    Bottom,
}

impl LatticeResult {
    /// Partial order: Bottom below everything, Top above, the rest incomparable.
    pub fn leq(self, other: LatticeResult) -> bool {
        self == other || self == LatticeResult::Bottom || other == LatticeResult::Top
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("program syntax error at offset {offset}: {message}")]
pub struct ProgramSyntaxError {
    pub offset: usize,
    pub message: String,
}

pub fn render_program(p: &DslProgram) -> String {
    let mut out = String::new();
    render_into(p, 0, &mut out);
    out.push('\n');
    out
}

/// Single-line form, convenient for logs and assertions.
pub fn render_program_inline(p: &DslProgram) -> String {
    render_program(p).split_whitespace().collect::<Vec<_>>().join(" ")
}

fn list<T: std::fmt::Display>(items: &[T]) -> String {
    items.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" ")
}

fn render_into(p: &DslProgram, indent: usize, out: &mut String) {
    let pad = "  ".repeat(indent);
    match p {
        DslProgram::Leaf(Action::Moves(ms)) => {
            let _ = write!(out, "{pad}DO [{}]", list(ms));
        }
        DslProgram::Leaf(Action::Alloc(o)) => {
            let _ = write!(out, "{pad}{}", o.keyword());
        }
        DslProgram::Branch { guard, expected, then, otherwise } => {
            let _ = writeln!(out, "{pad}IF [{}] = [{}]", list(guard), list(expected));
            let _ = writeln!(out, "{pad}THEN");
            render_into(then, indent + 1, out);
            out.push('\n');
            let _ = writeln!(out, "{pad}ELSE");
            render_into(otherwise, indent + 1, out);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Lexeme {
    Word(String),
    Str(String),
    Num(u64),
    Open,
    Close,
    Eq,
}

fn lex(text: &str) -> Result<Vec<(usize, Lexeme)>, ProgramSyntaxError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let err = |offset, message: &str| ProgramSyntaxError { offset, message: message.to_string() };
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => i += 1,
            b'[' => {
                out.push((i, Lexeme::Open));
                i += 1;
            }
            b']' => {
                out.push((i, Lexeme::Close));
                i += 1;
            }
            b'=' => {
                out.push((i, Lexeme::Eq));
                i += 1;
            }
            b'"' => {
                let start = i;
                i += 1;
                while i < bytes.len() && bytes[i] != b'"' {
                    i += if bytes[i] == b'\\' { 2 } else { 1 };
                }
                if i >= bytes.len() {
                    return Err(err(start, "unterminated string"));
                }
                i += 1;
                let s: String = serde_json::from_str(&text[start..i]).map_err(|_| err(start, "bad string escape"))?;
                out.push((start, Lexeme::Str(s)));
            }
            b'0'..=b'9' => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                let n = text[start..i].parse().map_err(|_| err(start, "number out of range"))?;
                out.push((start, Lexeme::Num(n)));
            }
            c if c.is_ascii_alphabetic() => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_alphanumeric() {
                    i += 1;
                }
                out.push((start, Lexeme::Word(text[start..i].to_string())));
            }
            _ => return Err(err(i, "unexpected character")),
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Lexeme)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn err<T>(&self, message: impl Into<String>) -> Result<T, ProgramSyntaxError> {
        let offset = self.toks.get(self.pos).map_or(self.end, |t| t.0);
        Err(ProgramSyntaxError { offset, message: message.into() })
    }

    fn next(&mut self) -> Option<Lexeme> {
        let t = self.toks.get(self.pos).map(|t| t.1.clone());
        self.pos += 1;
        t
    }

    fn expect_word(&mut self, w: &str) -> Result<(), ProgramSyntaxError> {
        match self.toks.get(self.pos) {
            Some((_, Lexeme::Word(x))) if x == w => {
                self.pos += 1;
                Ok(())
            }
            _ => self.err(format!("expected {w}")),
        }
    }

    fn bracketed(&mut self) -> Result<Vec<(usize, Lexeme)>, ProgramSyntaxError> {
        if self.toks.get(self.pos).map(|t| &t.1) != Some(&Lexeme::Open) {
            return self.err("expected '['");
        }
        self.pos += 1;
        let mut items = Vec::new();
        loop {
            match self.toks.get(self.pos) {
                Some((_, Lexeme::Close)) => {
                    self.pos += 1;
                    return Ok(items);
                }
                Some((_, Lexeme::Open | Lexeme::Eq)) | None => return self.err("expected ']'"),
                Some(t) => {
                    items.push(t.clone());
                    self.pos += 1;
                }
            }
        }
    }

    fn program(&mut self) -> Result<DslProgram, ProgramSyntaxError> {
        let start = self.pos;
        match self.next() {
            Some(Lexeme::Word(w)) => match w.as_str() {
                "DO" => {
                    let mut moves = Vec::new();
                    for (off, l) in self.bracketed()? {
                        match l {
                            Lexeme::Word(w) if Move::from_name(&w).is_some() => moves.push(Move::from_name(&w).unwrap()),
                            _ => return Err(ProgramSyntaxError { offset: off, message: "expected a move".into() }),
                        }
                    }
                    Ok(DslProgram::moves(moves))
                }
                "NEWALLOC" => Ok(DslProgram::Leaf(Action::Alloc(AllocOutcome::NewAlloc))),
                "NOALLOC" => Ok(DslProgram::Leaf(Action::Alloc(AllocOutcome::NoAlloc))),
                "TOP" => Ok(DslProgram::Leaf(Action::Alloc(AllocOutcome::Top))),
                "IF" => {
                    let mut guard = Vec::new();
                    for (off, l) in self.bracketed()? {
                        match l {
                            Lexeme::Word(w) if Instr::from_name(&w).is_some() => guard.push(Instr::from_name(&w).unwrap()),
                            _ => return Err(ProgramSyntaxError { offset: off, message: "expected an instruction".into() }),
                        }
                    }
                    if !guard.iter().any(|i| matches!(i, Instr::Write(_))) {
                        return Err(ProgramSyntaxError {
                            offset: self.toks[start].0,
                            message: "guard must contain a write instruction".into(),
                        });
                    }
                    if self.next() != Some(Lexeme::Eq) {
                        self.pos -= 1;
                        return self.err("expected '='");
                    }
                    let mut expected = Vec::new();
                    for (off, l) in self.bracketed()? {
                        expected.push(match l {
                            Lexeme::Num(n) => Token::Num(n),
                            Lexeme::Str(s) => Token::Str(s),
                            Lexeme::Word(w) => match NodeKind::from_name(&w) {
                                Some(k) => Token::Kind(k),
                                None => {
                                    return Err(ProgramSyntaxError { offset: off, message: format!("unknown node kind {w}") })
                                }
                            },
                            _ => unreachable!(),
                        });
                    }
                    self.expect_word("THEN")?;
                    let then = self.program()?;
                    self.expect_word("ELSE")?;
                    let otherwise = self.program()?;
                    Ok(DslProgram::branch(guard, expected, then, otherwise))
                }
                _ => {
                    self.pos = start;
                    self.err(format!("unexpected {w}"))
                }
            },
            _ => {
                self.pos = start;
                self.err("expected a program")
            }
        }
    }
}

pub fn parse_program(text: &str) -> Result<DslProgram, ProgramSyntaxError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0, end: text.len() };
    let prog = p.program()?;
    if p.pos < p.toks.len() {
        return p.err("trailing input");
    }
    if prog.language().is_none() {
        return Err(ProgramSyntaxError { offset: 0, message: "program mixes points-to and alloc leaves".into() });
    }
    Ok(prog)
}
