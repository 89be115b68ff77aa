use super::ast::{Ast, NodeId, NodeKind};

/// Canonical source text; `parse(render(ast))` reproduces `ast`.
pub fn render(ast: &Ast) -> String {
    let mut r = Renderer { ast, out: String::new() };
    let stmts = ast.children(ast.root());
    for (i, s) in stmts.iter().enumerate() {
        if i > 0 {
            r.out.push('\n');
        }
        r.statement(*s, 0);
    }
    r.out
}

/// Renders a single expression or statement subtree.
pub fn render_node(ast: &Ast, id: NodeId) -> String {
    let mut r = Renderer { ast, out: String::new() };
    if is_statement(ast.kind(id)) {
        r.statement(id, 0);
    } else {
        r.expr(id, 0, 0);
    }
    r.out
}

fn is_statement(kind: NodeKind) -> bool {
    use NodeKind::*;
    matches!(
        kind,
        VarDeclaration
            | Assignment
            | FunctionDeclaration
            | ReturnStatement
            | ExpressionStatement
            | IfStatement
            | TryStatement
            | BlockStatement
    )
}

fn binary_prec(op: &str) -> u8 {
    match op {
        "||" => 1,
        "&&" => 2,
        "==" | "!=" | "===" | "!==" => 3,
        "<" | ">" | "<=" | ">=" => 4,
        "+" | "-" => 5,
        _ => 6,
    }
}

struct Renderer<'a> {
    ast: &'a Ast,
    out: String,
}

impl Renderer<'_> {
    fn indent(&mut self, level: usize) {
        for _ in 0..level {
            self.out.push_str("  ");
        }
    }

    fn block(&mut self, id: NodeId, level: usize) {
        let stmts = self.ast.children(id);
        if stmts.is_empty() {
            self.out.push_str("{}");
            return;
        }
        self.out.push_str("{\n");
        for s in stmts {
            self.indent(level + 1);
            self.statement(*s, level + 1);
            self.out.push('\n');
        }
        self.indent(level);
        self.out.push('}');
    }

    fn params(&mut self, id: NodeId) {
        self.out.push('(');
        let params: Vec<NodeId> = self
            .ast
            .children(id)
            .iter()
            .copied()
            .filter(|c| self.ast.kind(*c) == NodeKind::Parameter)
            .collect();
        for (i, p) in params.iter().enumerate() {
            if i > 0 {
                self.out.push_str(", ");
            }
            self.out.push_str(self.ast.value(*p).unwrap_or_default());
        }
        self.out.push_str(") ");
    }

    fn function_body(&mut self, id: NodeId, level: usize) {
        let body = *self.ast.children(id).last().expect("function has a body");
        self.block(body, level);
    }

    fn statement(&mut self, id: NodeId, level: usize) {
        let ast = self.ast;
        let ch = ast.children(id);
        match ast.kind(id) {
            NodeKind::VarDeclaration => {
                self.out.push_str("var ");
                self.out.push_str(ast.value(id).unwrap_or_default());
                if let Some(init) = ch.first() {
                    self.out.push_str(" = ");
                    self.expr(*init, 1, level);
                }
                self.out.push(';');
            }
            NodeKind::Assignment => {
                self.statement_expr(ch[0], level);
                self.out.push_str(" = ");
                self.expr(ch[1], 1, level);
                self.out.push(';');
            }
            NodeKind::FunctionDeclaration => {
                self.out.push_str("function ");
                self.out.push_str(ast.value(id).unwrap_or_default());
                self.params(id);
                self.function_body(id, level);
            }
            NodeKind::ReturnStatement => {
                self.out.push_str("return");
                if let Some(e) = ch.first() {
                    self.out.push(' ');
                    self.expr(*e, 1, level);
                }
                self.out.push(';');
            }
            NodeKind::ExpressionStatement => {
                self.statement_expr(ch[0], level);
                self.out.push(';');
            }
            NodeKind::IfStatement => {
                self.out.push_str("if (");
                self.expr(ch[0], 1, level);
                self.out.push_str(") ");
                self.block(ch[1], level);
                if let Some(alt) = ch.get(2) {
                    self.out.push_str(" else ");
                    if ast.kind(*alt) == NodeKind::IfStatement {
                        self.statement(*alt, level);
                    } else {
                        self.block(*alt, level);
                    }
                }
            }
            NodeKind::TryStatement => {
                self.out.push_str("try ");
                self.block(ch[0], level);
                let clause = ast.children(ch[1]);
                self.out.push_str(" catch (");
                self.out.push_str(ast.value(clause[0]).unwrap_or_default());
                self.out.push_str(") ");
                self.block(clause[1], level);
            }
            NodeKind::BlockStatement => self.block(id, level),
            _ => {
                self.expr(id, 1, level);
                self.out.push(';');
            }
        }
    }

    /// Expression in statement position: a leading `{` or `function` would be
    /// read back as a block or declaration, so such expressions get parens.
    fn statement_expr(&mut self, id: NodeId, level: usize) {
        if self.starts_ambiguous(id) {
            self.out.push('(');
            self.expr(id, 0, level);
            self.out.push(')');
        } else {
            self.expr(id, 1, level);
        }
    }

    fn starts_ambiguous(&self, id: NodeId) -> bool {
        match self.ast.kind(id) {
            NodeKind::ObjectExpression | NodeKind::FunctionExpression => true,
            NodeKind::BinaryExpression | NodeKind::CallExpression | NodeKind::MemberExpression => {
                self.starts_ambiguous(self.ast.children(id)[0])
            }
            _ => false,
        }
    }

    fn prec(&self, id: NodeId) -> u8 {
        match self.ast.kind(id) {
            NodeKind::BinaryExpression => binary_prec(self.ast.value(id).unwrap_or_default()),
            NodeKind::UnaryExpression => 7,
            NodeKind::CallExpression | NodeKind::MemberExpression | NodeKind::NewExpression => 8,
            _ => 9,
        }
    }

    fn new_callee_plain(&self, id: NodeId) -> bool {
        match self.ast.kind(id) {
            NodeKind::MemberExpression => self.new_callee_plain(self.ast.children(id)[0]),
            NodeKind::CallExpression | NodeKind::NewExpression => false,
            _ => self.prec(id) == 9,
        }
    }

    fn args(&mut self, args: &[NodeId], level: usize) {
        self.out.push('(');
        for (i, a) in args.iter().enumerate() {
            if i > 0 {
                self.out.push_str(", ");
            }
            self.expr(*a, 1, level);
        }
        self.out.push(')');
    }

    fn expr(&mut self, id: NodeId, min_prec: u8, level: usize) {
        let ast = self.ast;
        if self.prec(id) < min_prec {
            self.out.push('(');
            self.expr(id, 0, level);
            self.out.push(')');
            return;
        }
        let ch = ast.children(id);
        match ast.kind(id) {
            NodeKind::Identifier | NodeKind::LiteralNumber | NodeKind::LiteralBoolean | NodeKind::LiteralNull => {
                self.out.push_str(ast.value(id).unwrap_or_default())
            }
            NodeKind::LiteralString => quote(ast.value(id).unwrap_or_default(), &mut self.out),
            NodeKind::ThisExpression => self.out.push_str("this"),
            NodeKind::Argument => self.out.push_str("arguments"),
            NodeKind::ObjectExpression => {
                if ch.is_empty() {
                    self.out.push_str("{}");
                    return;
                }
                self.out.push('{');
                for (i, pair) in ch.chunks(2).enumerate() {
                    if i > 0 {
                        self.out.push_str(", ");
                    }
                    self.out.push_str(ast.value(pair[0]).unwrap_or_default());
                    self.out.push_str(": ");
                    self.expr(pair[1], 1, level);
                }
                self.out.push('}');
            }
            NodeKind::ArrayExpression => {
                self.out.push('[');
                for (i, e) in ch.iter().enumerate() {
                    if i > 0 {
                        self.out.push_str(", ");
                    }
                    self.expr(*e, 1, level);
                }
                self.out.push(']');
            }
            NodeKind::FunctionExpression => {
                self.out.push_str("function");
                if let Some(name) = ast.value(id) {
                    self.out.push(' ');
                    self.out.push_str(name);
                }
                self.params(id);
                self.function_body(id, level);
            }
            NodeKind::NewExpression => {
                self.out.push_str("new ");
                if self.new_callee_plain(ch[0]) {
                    self.expr(ch[0], 8, level);
                } else {
                    self.out.push('(');
                    self.expr(ch[0], 0, level);
                    self.out.push(')');
                }
                self.args(&ch[1..], level);
            }
            NodeKind::CallExpression => {
                self.expr(ch[0], 8, level);
                self.args(&ch[1..], level);
            }
            NodeKind::MemberExpression => {
                self.expr(ch[0], 8, level);
                self.out.push('.');
                self.out.push_str(ast.value(ch[1]).unwrap_or_default());
            }
            NodeKind::UnaryExpression => {
                let op = ast.value(id).unwrap_or_default();
                self.out.push_str(op);
                if op == "typeof" {
                    self.out.push(' ');
                }
                self.expr(ch[0], 7, level);
            }
            NodeKind::BinaryExpression => {
                let op = ast.value(id).unwrap_or_default();
                let p = binary_prec(op);
                self.expr(ch[0], p, level);
                self.out.push(' ');
                self.out.push_str(op);
                self.out.push(' ');
                self.expr(ch[1], p + 1, level);
            }
            _ => unreachable!("statement kind {} in expression position", ast.kind(id)),
        }
    }
}

fn quote(s: &str, out: &mut String) {
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            '\0' => out.push_str("\\0"),
            c => out.push(c),
        }
    }
    out.push('"');
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minilang::parse;

    fn round_trip(src: &str) -> String {
        let ast = parse(src).unwrap();
        let text = render(&ast);
        assert_eq!(parse(&text).unwrap(), ast, "re-parse of {text:?}");
        text
    }

    #[test]
    fn simple_assignment() {
        assert_eq!(round_trip("a = b;"), "a = b;");
    }

    #[test]
    fn assign_text() {
        let text = round_trip("var b = {};\na = b;");
        assert!(text.find("var b").unwrap() < text.find("a = b").unwrap());
    }

    #[test]
    fn parenthesization() {
        assert_eq!(round_trip("x = (1 + 2) * 3;"), "x = (1 + 2) * 3;");
        assert_eq!(round_trip("x = 1 - (2 - 3);"), "x = 1 - (2 - 3);");
        assert_eq!(round_trip("x = - -y;"), "x = --y;");
        assert_eq!(round_trip("({}).x = 1;"), "({}.x) = 1;");
        assert_eq!(round_trip("(function () {})();"), "(function() {}());");
        assert_eq!(round_trip("x = new (f())();"), "x = new (f())();");
        assert_eq!(round_trip("x = new a.b(1).c;"), "x = new a.b(1).c;");
        assert_eq!(round_trip("x = typeof (a + b);"), "x = typeof (a + b);");
    }

    #[test]
    fn nested_blocks() {
        let src = "function f(a) {\n  if (a) {\n    return {k: \"q\\\"\"};\n  } else if (b) {\n    var c = [1, 2.5];\n  }\n  try {\n    g(arguments, this);\n  } catch (e) {}\n}";
        assert_eq!(round_trip(src), src);
    }
}
