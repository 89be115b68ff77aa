use crate::minilang::NodeKind;
use std::fmt;

macro_rules! named_enum {
    ($(#[$m:meta])* $name:ident { $($v:ident),* $(,)? }) => {
        $(#[$m])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum $name {
            $($v),*
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$v),*];

            pub fn name(self) -> &'static str {
                match self {
                    $($name::$v => stringify!($v)),*
                }
            }

            pub fn from_name(s: &str) -> Option<$name> {
                match s {
                    $(stringify!($v) => Some($name::$v),)*
                    _ => None,
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }
    };
}

named_enum!(
    /// Navigation instructions; declaration order is the tie-break order.
    Move {
        Up,
        Left,
        Right,
        DownFirst,
        DownLast,
        Top,
        GoToGlobal,
        GoToUndef,
        GoToNull,
        GoToThis,
        UpUntilFunc,
        GoToCaller,
        PrevNodeValue,
        PrevNodeType,
    }
);

named_enum!(
    /// Observation instructions that append one token to the context.
    Write {
        WriteValue,
        WritePos,
        WriteType,
        HasLeft,
        HasRight,
        HasChild,
        HasCaller,
        HasPrevNodeValue,
    }
);

/// Guard instruction. The derived order puts every Move before every Write.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Instr {
    Move(Move),
    Write(Write),
}

impl Instr {
    pub fn name(self) -> &'static str {
        match self {
            Instr::Move(m) => m.name(),
            Instr::Write(w) => w.name(),
        }
    }

    pub fn from_name(s: &str) -> Option<Instr> {
        Move::from_name(s).map(Instr::Move).or_else(|| Write::from_name(s).map(Instr::Write))
    }
}

impl fmt::Display for Instr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The two analysis languages: points-to and allocation-site.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Language {
    PointsTo,
    Alloc,
}

impl Language {
    pub fn moves(self) -> &'static [Move] {
        use Move::*;
        match self {
            Language::PointsTo => &[
                Up, Left, Right, DownFirst, DownLast, Top, GoToGlobal, GoToUndef, GoToNull, GoToThis, UpUntilFunc,
                GoToCaller,
            ],
            Language::Alloc => &[
                Up, Left, Right, DownFirst, DownLast, Top, GoToGlobal, GoToUndef, GoToNull, GoToThis, UpUntilFunc,
                PrevNodeValue, PrevNodeType,
            ],
        }
    }

    pub fn writes(self) -> &'static [Write] {
        use Write::*;
        match self {
            Language::PointsTo => &[WriteValue, WritePos, WriteType, HasLeft, HasRight, HasChild, HasCaller],
            Language::Alloc => &[WriteValue, WritePos, WriteType, HasLeft, HasRight, HasChild, HasPrevNodeValue],
        }
    }

    pub fn allows(self, i: Instr) -> bool {
        match i {
            Instr::Move(m) => self.moves().contains(&m),
            Instr::Write(w) => self.writes().contains(&w),
        }
    }
}

/// One context element: a node kind, a terminal string or a number.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Token {
    Num(u64),
    Kind(NodeKind),
    Str(String),
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Num(n) => write!(f, "{n}"),
            Token::Kind(k) => f.write_str(k.name()),
            Token::Str(s) => f.write_str(&serde_json::to_string(s).expect("strings serialize")),
        }
    }
}

pub type Context = Vec<Token>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moves_sort_before_writes() {
        assert!(Instr::Move(Move::PrevNodeType) < Instr::Write(Write::WriteValue));
        assert!(Move::Up < Move::GoToCaller);
        assert!(Write::WriteValue < Write::HasPrevNodeValue);
    }

    #[test]
    fn language_alphabets() {
        assert!(Language::PointsTo.allows(Instr::Move(Move::GoToCaller)));
        assert!(!Language::Alloc.allows(Instr::Move(Move::GoToCaller)));
        assert!(!Language::Alloc.allows(Instr::Write(Write::HasCaller)));
        assert!(Language::Alloc.allows(Instr::Write(Write::HasPrevNodeValue)));
        assert!(!Language::PointsTo.allows(Instr::Move(Move::PrevNodeValue)));
    }

    #[test]
    fn tokens_are_typed() {
        assert_ne!(Token::Num(1), Token::Str("1".into()));
        assert_eq!(Token::Str("a\"b".into()).to_string(), "\"a\\\"b\"");
    }
}
