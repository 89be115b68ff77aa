use super::ast::{Ast, NodeKind, SyntaxNode};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("syntax error at {line}:{column}: {message}")]
pub struct SyntaxError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

pub const KEYWORDS: &[&str] = &[
    "var", "function", "return", "if", "else", "try", "catch", "new", "this", "true", "false",
    "null", "typeof", "arguments",
];

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Num(String),
    Str(String),
    Punct(&'static str),
    Eof,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

const PUNCTS: &[&str] = &[
    "===", "!==", "==", "!=", "<=", ">=", "&&", "||", "{", "}", "(", ")", "[", "]", ";", ",", ".",
    ":", "=", "<", ">", "+", "-", "*", "/", "%", "!",
];

fn lex(src: &str) -> Result<Vec<Token>, SyntaxError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let err = |line, column, message: &str| SyntaxError { line, column, message: message.to_string() };
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'*') {
            let (sl, sc) = (line, col);
            i += 2;
            col += 2;
            loop {
                if i >= chars.len() {
                    return Err(err(sl, sc, "unterminated comment"));
                }
                if chars[i] == '*' && chars.get(i + 1) == Some(&'/') {
                    i += 2;
                    col += 2;
                    break;
                }
                if chars[i] == '\n' {
                    line += 1;
                    col = 1;
                } else {
                    col += 1;
                }
                i += 1;
            }
            continue;
        }
        let (tl, tc) = (line, col);
        if c.is_ascii_alphabetic() || c == '_' || c == '$' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '$') {
                i += 1;
            }
            col += i - start;
            out.push(Token { tok: Tok::Ident(chars[start..i].iter().collect()), line: tl, column: tc });
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_ascii_digit() {
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < chars.len() && (chars[i].is_ascii_alphabetic() || chars[i] == '_') {
                return Err(err(line, col + (i - start), "malformed number"));
            }
            col += i - start;
            out.push(Token { tok: Tok::Num(chars[start..i].iter().collect()), line: tl, column: tc });
            continue;
        }
        if c == '"' || c == '\'' {
            let quote = c;
            let mut s = String::new();
            i += 1;
            col += 1;
            loop {
                let Some(&d) = chars.get(i) else {
                    return Err(err(tl, tc, "unterminated string"));
                };
                if d == '\n' {
                    return Err(err(tl, tc, "unterminated string"));
                }
                i += 1;
                col += 1;
                if d == quote {
                    break;
                }
                if d == '\\' {
                    let Some(&e) = chars.get(i) else {
                        return Err(err(tl, tc, "unterminated string"));
                    };
                    i += 1;
                    col += 1;
                    s.push(match e {
                        'n' => '\n',
                        't' => '\t',
                        'r' => '\r',
                        '0' => '\0',
                        other => other,
                    });
                } else {
                    s.push(d);
                }
            }
            out.push(Token { tok: Tok::Str(s), line: tl, column: tc });
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 3)].iter().collect();
        match PUNCTS.iter().find(|p| rest.starts_with(**p)) {
            Some(p) => {
                i += p.len();
                col += p.len();
                out.push(Token { tok: Tok::Punct(p), line: tl, column: tc });
            }
            None => return Err(err(tl, tc, &format!("unexpected character {c:?}"))),
        }
    }
    out.push(Token { tok: Tok::Eof, line, column: col });
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

type PResult<T> = Result<T, SyntaxError>;

fn node(kind: NodeKind, value: Option<String>, children: Vec<SyntaxNode>) -> SyntaxNode {
    SyntaxNode::new(kind, value, children)
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn error<T>(&self, message: impl Into<String>) -> PResult<T> {
        let t = &self.toks[self.pos];
        Err(SyntaxError { line: t.line, column: t.column, message: message.into() })
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn is_keyword(&self, k: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == k)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &str) -> PResult<()> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            self.error(format!("expected '{p}', found {}", self.describe()))
        }
    }

    fn expect_keyword(&mut self, k: &str) -> PResult<()> {
        if self.is_keyword(k) {
            self.bump();
            Ok(())
        } else {
            self.error(format!("expected '{k}', found {}", self.describe()))
        }
    }

    fn describe(&self) -> String {
        match self.peek() {
            Tok::Ident(s) => format!("'{s}'"),
            Tok::Num(s) => format!("number {s}"),
            Tok::Str(s) => format!("string {s:?}"),
            Tok::Punct(p) => format!("'{p}'"),
            Tok::Eof => "end of input".to_string(),
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                self.bump();
                Ok(s)
            }
            _ => self.error(format!("expected identifier, found {}", self.describe())),
        }
    }

    fn program(&mut self) -> PResult<SyntaxNode> {
        let mut body = Vec::new();
        while *self.peek() != Tok::Eof {
            body.push(self.statement()?);
        }
        Ok(node(NodeKind::Program, None, body))
    }

    fn block(&mut self) -> PResult<SyntaxNode> {
        self.expect_punct("{")?;
        let mut body = Vec::new();
        while !self.is_punct("}") {
            if *self.peek() == Tok::Eof {
                return self.error("unterminated block");
            }
            body.push(self.statement()?);
        }
        self.bump();
        Ok(node(NodeKind::BlockStatement, None, body))
    }

    fn params(&mut self) -> PResult<Vec<SyntaxNode>> {
        self.expect_punct("(")?;
        let mut params = Vec::new();
        if !self.is_punct(")") {
            loop {
                params.push(node(NodeKind::Parameter, Some(self.ident()?), vec![]));
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        self.expect_punct(")")?;
        Ok(params)
    }

    fn statement(&mut self) -> PResult<SyntaxNode> {
        if self.is_punct("{") {
            return self.block();
        }
        if self.is_keyword("var") {
            self.bump();
            let name = self.ident()?;
            let mut children = Vec::new();
            if self.eat_punct("=") {
                children.push(self.expression()?);
            }
            self.expect_punct(";")?;
            return Ok(node(NodeKind::VarDeclaration, Some(name), children));
        }
        if self.is_keyword("function") {
            self.bump();
            let name = self.ident()?;
            let mut children = self.params()?;
            children.push(self.block()?);
            return Ok(node(NodeKind::FunctionDeclaration, Some(name), children));
        }
        if self.is_keyword("return") {
            self.bump();
            let mut children = Vec::new();
            if !self.is_punct(";") {
                children.push(self.expression()?);
            }
            self.expect_punct(";")?;
            return Ok(node(NodeKind::ReturnStatement, None, children));
        }
        if self.is_keyword("if") {
            return self.if_statement();
        }
        if self.is_keyword("try") {
            self.bump();
            let body = self.block()?;
            self.expect_keyword("catch")?;
            self.expect_punct("(")?;
            let name = self.ident()?;
            self.expect_punct(")")?;
            let handler = self.block()?;
            let clause = node(
                NodeKind::CatchClause,
                None,
                vec![node(NodeKind::Parameter, Some(name), vec![]), handler],
            );
            return Ok(node(NodeKind::TryStatement, None, vec![body, clause]));
        }
        let expr = self.expression()?;
        if self.eat_punct("=") {
            if !matches!(expr.kind, NodeKind::Identifier | NodeKind::MemberExpression) {
                return self.error("invalid assignment target");
            }
            let value = self.expression()?;
            self.expect_punct(";")?;
            return Ok(node(NodeKind::Assignment, None, vec![expr, value]));
        }
        self.expect_punct(";")?;
        Ok(node(NodeKind::ExpressionStatement, None, vec![expr]))
    }

    fn if_statement(&mut self) -> PResult<SyntaxNode> {
        self.expect_keyword("if")?;
        self.expect_punct("(")?;
        let test = self.expression()?;
        self.expect_punct(")")?;
        let mut children = vec![test, self.block()?];
        if self.is_keyword("else") {
            self.bump();
            if self.is_keyword("if") {
                children.push(self.if_statement()?);
            } else {
                children.push(self.block()?);
            }
        }
        Ok(node(NodeKind::IfStatement, None, children))
    }

    fn expression(&mut self) -> PResult<SyntaxNode> {
        self.binary(0)
    }

    fn binary(&mut self, level: usize) -> PResult<SyntaxNode> {
        const LEVELS: &[&[&str]] = &[
            &["||"],
            &["&&"],
            &["==", "!=", "===", "!=="],
            &["<", ">", "<=", ">="],
            &["+", "-"],
            &["*", "/", "%"],
        ];
        if level == LEVELS.len() {
            return self.unary();
        }
        let mut left = self.binary(level + 1)?;
        loop {
            let op = match self.peek() {
                Tok::Punct(p) if LEVELS[level].contains(p) => *p,
                _ => break,
            };
            self.bump();
            let right = self.binary(level + 1)?;
            left = node(NodeKind::BinaryExpression, Some(op.to_string()), vec![left, right]);
        }
        Ok(left)
    }

    fn unary(&mut self) -> PResult<SyntaxNode> {
        let op = match self.peek() {
            Tok::Punct("!") => "!",
            Tok::Punct("-") => "-",
            Tok::Ident(s) if s == "typeof" => "typeof",
            _ => return self.postfix(),
        };
        self.bump();
        let operand = self.unary()?;
        Ok(node(NodeKind::UnaryExpression, Some(op.to_string()), vec![operand]))
    }

    fn args(&mut self) -> PResult<Vec<SyntaxNode>> {
        self.expect_punct("(")?;
        let mut args = Vec::new();
        if !self.is_punct(")") {
            loop {
                args.push(self.expression()?);
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        self.expect_punct(")")?;
        Ok(args)
    }

    fn member_suffix(&mut self, object: SyntaxNode) -> PResult<SyntaxNode> {
        let prop = match self.bump() {
            Tok::Ident(s) => s,
            _ => return self.error("expected property name"),
        };
        Ok(node(
            NodeKind::MemberExpression,
            None,
            vec![object, node(NodeKind::Identifier, Some(prop), vec![])],
        ))
    }

    fn postfix(&mut self) -> PResult<SyntaxNode> {
        let mut expr = if self.is_keyword("new") {
            self.bump();
            let mut callee = self.primary()?;
            while self.eat_punct(".") {
                callee = self.member_suffix(callee)?;
            }
            let mut children = vec![callee];
            if self.is_punct("(") {
                children.extend(self.args()?);
            }
            node(NodeKind::NewExpression, None, children)
        } else {
            self.primary()?
        };
        loop {
            if self.eat_punct(".") {
                expr = self.member_suffix(expr)?;
            } else if self.is_punct("(") {
                let mut children = vec![expr];
                children.extend(self.args()?);
                expr = node(NodeKind::CallExpression, None, children);
            } else {
                return Ok(expr);
            }
        }
    }

    fn primary(&mut self) -> PResult<SyntaxNode> {
        match self.peek().clone() {
            Tok::Num(n) => {
                self.bump();
                Ok(node(NodeKind::LiteralNumber, Some(n), vec![]))
            }
            Tok::Str(s) => {
                self.bump();
                Ok(node(NodeKind::LiteralString, Some(s), vec![]))
            }
            Tok::Punct("(") => {
                self.bump();
                let e = self.expression()?;
                self.expect_punct(")")?;
                Ok(e)
            }
            Tok::Punct("{") => {
                self.bump();
                let mut children = Vec::new();
                if !self.is_punct("}") {
                    loop {
                        let key = match self.bump() {
                            Tok::Ident(s) => s,
                            _ => return self.error("expected property key"),
                        };
                        self.expect_punct(":")?;
                        children.push(node(NodeKind::Identifier, Some(key), vec![]));
                        children.push(self.expression()?);
                        if !self.eat_punct(",") {
                            break;
                        }
                    }
                }
                self.expect_punct("}")?;
                Ok(node(NodeKind::ObjectExpression, None, children))
            }
            Tok::Punct("[") => {
                self.bump();
                let mut children = Vec::new();
                if !self.is_punct("]") {
                    loop {
                        children.push(self.expression()?);
                        if !self.eat_punct(",") {
                            break;
                        }
                    }
                }
                self.expect_punct("]")?;
                Ok(node(NodeKind::ArrayExpression, None, children))
            }
            Tok::Ident(s) => match s.as_str() {
                "true" | "false" => {
                    self.bump();
                    Ok(node(NodeKind::LiteralBoolean, Some(s), vec![]))
                }
                "null" => {
                    self.bump();
                    Ok(node(NodeKind::LiteralNull, Some(s), vec![]))
                }
                "this" => {
                    self.bump();
                    Ok(node(NodeKind::ThisExpression, None, vec![]))
                }
                "arguments" => {
                    self.bump();
                    Ok(node(NodeKind::Argument, None, vec![]))
                }
                "function" => {
                    self.bump();
                    let name = match self.peek_at(0) {
                        Tok::Ident(_) => Some(self.ident()?),
                        _ => None,
                    };
                    let mut children = self.params()?;
                    children.push(self.block()?);
                    Ok(node(NodeKind::FunctionExpression, name, children))
                }
                _ => Ok(node(NodeKind::Identifier, Some(self.ident()?), vec![])),
            },
            _ => self.error(format!("unexpected {}", self.describe())),
        }
    }
}

pub fn parse_syntax(source: &str) -> Result<SyntaxNode, SyntaxError> {
    let toks = lex(source)?;
    let mut p = Parser { toks, pos: 0 };
    p.program()
}

pub fn parse(source: &str) -> Result<Ast, SyntaxError> {
    Ok(Ast::from_syntax(&parse_syntax(source)?))
}
