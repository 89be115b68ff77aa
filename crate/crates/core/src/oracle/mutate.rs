use crate::dataset::is_property_position;
use crate::minilang::{reserved_globals, render_node, Ast, NodeId, NodeKind, SyntaxNode, KEYWORDS};
use std::collections::HashSet;
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MutationKind {
    AddDeadCode,
    RenameVariable,
    RenameUserFunction,
    AddSideEffectFreeExpr,
    AddMethodArgument,
    AddMethodParameter,
    ChangeConstant,
}

impl MutationKind {
    pub fn is_ema(self) -> bool {
        matches!(
            self,
            MutationKind::AddDeadCode
                | MutationKind::RenameVariable
                | MutationKind::RenameUserFunction
                | MutationKind::AddSideEffectFreeExpr
        )
    }
}

impl fmt::Display for MutationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mutation {
    pub kind: MutationKind,
    pub site: NodeId,
    /// Inserted code, replacement, or `old->new` for renames.
    pub payload: String,
}

/// A mutated program. Nodes copied from the original keep their old id as
/// origin, which is how query positions are transported.
#[derive(Clone, Debug)]
pub struct Mutant {
    pub mutation: Mutation,
    pub ast: Ast,
}

const MAX_SCOPE_VARS: usize = 4;

fn lit(kind: NodeKind, v: &str) -> SyntaxNode {
    SyntaxNode::leaf(kind, Some(v.to_string()))
}

fn num(v: &str) -> SyntaxNode {
    lit(NodeKind::LiteralNumber, v)
}

fn ident(v: &str) -> SyntaxNode {
    lit(NodeKind::Identifier, v)
}

fn var_decl(name: &str, init: SyntaxNode) -> SyntaxNode {
    SyntaxNode::new(NodeKind::VarDeclaration, Some(name.to_string()), vec![init])
}

fn dead(body: SyntaxNode) -> SyntaxNode {
    SyntaxNode::new(
        NodeKind::IfStatement,
        None,
        vec![lit(NodeKind::LiteralBoolean, "false"), SyntaxNode::new(NodeKind::BlockStatement, None, vec![body])],
    )
}

/// Applies `f` to the node that was `id` in the original tree.
fn edit(root: &mut SyntaxNode, id: NodeId, f: &mut dyn FnMut(&mut SyntaxNode)) -> bool {
    if root.origin == Some(id) {
        f(root);
        return true;
    }
    root.children.iter_mut().any(|c| edit(c, id, f))
}

fn edited(ast: &Ast, id: NodeId, mut f: impl FnMut(&mut SyntaxNode)) -> Ast {
    let mut root = ast.to_syntax();
    assert!(edit(&mut root, id, &mut f), "edit target exists");
    Ast::from_syntax(&root)
}

/// Generator of identifiers unused anywhere in a program.
struct FreshNames {
    used: HashSet<String>,
    next: usize,
}

impl FreshNames {
    fn new(ast: &Ast) -> FreshNames {
        let mut used: HashSet<String> = (0..ast.len() as u32).filter_map(|i| ast.value(NodeId(i))).map(str::to_string).collect();
        used.extend(KEYWORDS.iter().chain(["global", "undefined"].iter()).map(|s| s.to_string()));
        used.extend(reserved_globals().map(str::to_string));
        FreshNames { used, next: 0 }
    }

    fn fresh(&mut self) -> String {
        loop {
            let i = self.next;
            self.next += 1;
            let name = if i < 24 { ((b'c' + i as u8) as char).to_string() } else { format!("v{}", i - 24) };
            if self.used.insert(name.clone()) {
                return name;
            }
        }
    }
}

/// Nodes whose value is a binding name (declaration or variable reference).
fn is_name_node(ast: &Ast, id: NodeId) -> bool {
    match ast.kind(id) {
        NodeKind::Identifier => !ast.is_distinguished(id) && !is_property_position(ast, id),
        NodeKind::VarDeclaration | NodeKind::FunctionDeclaration | NodeKind::Parameter => true,
        NodeKind::FunctionExpression => ast.value(id).is_some(),
        _ => false,
    }
}

fn rename(ast: &Ast, renames: &[(String, String)]) -> Ast {
    fn go(n: &mut SyntaxNode, ast: &Ast, renames: &[(String, String)]) {
        if let (Some(id), Some(v)) = (n.origin, n.value.as_deref()) {
            if is_name_node(ast, id) {
                if let Some((_, new)) = renames.iter().find(|(old, _)| old == v) {
                    n.value = Some(new.clone());
                }
            }
        }
        n.children.iter_mut().for_each(|c| go(c, ast, renames));
    }
    let mut root = ast.to_syntax();
    go(&mut root, ast, renames);
    Ast::from_syntax(&root)
}

/// Names that may be renamed without changing behavior: not reserved and
/// never used as a property name (a global could be read back as one).
fn renamable_names(ast: &Ast) -> HashSet<&str> {
    let props: HashSet<&str> = ast
        .tree_ids()
        .filter(|&n| ast.kind(n) == NodeKind::Identifier && is_property_position(ast, n))
        .filter_map(|n| ast.value(n))
        .collect();
    let reserved: HashSet<&str> = reserved_globals().chain(["global", "undefined"]).collect();
    ast.tree_ids()
        .filter(|&n| is_name_node(ast, n))
        .filter_map(|n| ast.value(n))
        .filter(|v| !props.contains(v) && !reserved.contains(v))
        .collect()
}

fn function_names(ast: &Ast) -> Vec<(&str, NodeId)> {
    ast.tree_ids().filter(|&n| ast.kind(n).is_function()).filter_map(|n| ast.value(n).map(|v| (v, n))).collect()
}

fn params(ast: &Ast, func: NodeId) -> Vec<&str> {
    ast.children(func).iter().filter(|&&c| ast.kind(c) == NodeKind::Parameter).filter_map(|&c| ast.value(c)).collect()
}

/// Variables visible at `site`, nearest declarations first.
fn scope_vars(ast: &Ast, site: NodeId) -> Vec<String> {
    let mut chain = vec![ast.enclosing_function(site)];
    while let Some(Some(f)) = chain.last() {
        chain.push(ast.enclosing_function(*f));
    }
    let mut decls: Vec<NodeId> = ast
        .tree_ids()
        .filter(|&n| {
            let declares = match ast.kind(n) {
                NodeKind::VarDeclaration | NodeKind::FunctionDeclaration => true,
                NodeKind::Parameter => ast.parent(n).is_some_and(|p| ast.kind(p).is_function()),
                _ => false,
            };
            // A variable is not yet initialized inside its own declaration.
            let initialized = ast.kind(n) != NodeKind::VarDeclaration || !ast.subtree(n).contains(&site.0);
            declares && n <= site && initialized && chain.contains(&ast.enclosing_function(n))
        })
        .collect();
    decls.reverse();
    let mut seen = HashSet::new();
    decls
        .into_iter()
        .filter_map(|n| ast.value(n))
        .filter(|v| seen.insert(*v))
        .take(MAX_SCOPE_VARS)
        .map(str::to_string)
        .collect()
}

fn in_subtree(ast: &Ast, root: NodeId) -> impl Iterator<Item = NodeId> {
    ast.subtree(root).map(NodeId)
}

/// Semantics-preserving mutants around `site`.
pub fn mutate_ema(ast: &Ast, site: NodeId) -> Vec<Mutant> {
    let Some(stmt) = ast.enclosing_statement(site) else { return Vec::new() };
    let list = ast.parent(stmt).expect("statement has a parent");
    let at = ast.child_index(stmt);
    let mut out = Vec::new();
    let mut push = |kind, payload: String, ast: Ast| out.push(Mutant { mutation: Mutation { kind, site, payload }, ast });
    let insert = |at: usize, node: SyntaxNode| edited(ast, list, |n| n.children.insert(at, node.clone()));

    let copy = dead(ast.syntax_at(stmt).detached());
    let m = insert(at, copy);
    push(MutationKind::AddDeadCode, render_node(&m, m.children(list)[at]), m);
    let mut names = FreshNames::new(ast);
    let f = names.fresh();
    for v in scope_vars(ast, site) {
        let m = insert(at, dead(var_decl(&f, ident(&v))));
        push(MutationKind::AddDeadCode, render_node(&m, m.children(list)[at]), m);
    }

    let renamable = renamable_names(ast);
    let functions = function_names(ast);
    let mut mentioned: Vec<&str> = Vec::new();
    for n in in_subtree(ast, stmt) {
        if let Some(v) = ast.value(n).filter(|_| is_name_node(ast, n)) {
            if renamable.contains(v) && !mentioned.contains(&v) {
                mentioned.push(v);
            }
        }
    }
    for v in &mentioned {
        let decl = functions.iter().find(|(name, _)| name == v);
        let mut names = FreshNames::new(ast);
        let mut renames = vec![(v.to_string(), names.fresh())];
        let kind = match decl {
            Some((_, func)) => {
                for p in params(ast, *func).into_iter().filter(|p| renamable.contains(p)) {
                    if !renames.iter().any(|(o, _)| o == p) {
                        renames.push((p.to_string(), names.fresh()));
                    }
                }
                MutationKind::RenameUserFunction
            }
            None => MutationKind::RenameVariable,
        };
        let payload = renames.iter().map(|(o, n)| format!("{o}->{n}")).collect::<Vec<_>>().join(",");
        push(kind, payload, rename(ast, &renames));
    }

    let f = FreshNames::new(ast).fresh();
    for pos in [at, at + 1] {
        let m = insert(pos, var_decl(&f, num("1")));
        push(MutationKind::AddSideEffectFreeExpr, render_node(&m, m.children(list)[pos]), m);
    }
    out
}

fn constant_replacements(ast: &Ast, n: NodeId) -> Vec<SyntaxNode> {
    let v = ast.value(n).unwrap_or_default();
    match ast.kind(n) {
        NodeKind::LiteralNumber => {
            let mut out: Vec<SyntaxNode> = ["0", "1"].iter().filter(|c| **c != v).map(|c| num(c)).collect();
            out.push(SyntaxNode::new(NodeKind::UnaryExpression, Some("-".into()), vec![num("1")]));
            if v != "42" {
                out.push(num("42"));
            }
            if let Ok(x) = v.parse::<f64>() {
                let next = (x + 1.0).to_string();
                if !["0", "1", "42"].contains(&next.as_str()) {
                    out.push(num(&next));
                }
            }
            out
        }
        NodeKind::LiteralString => {
            let other = if v == "gj" { "gj2" } else { "gj" };
            [("", v.is_empty()), (other, false)]
                .iter()
                .filter(|(_, same)| !same)
                .map(|(s, _)| lit(NodeKind::LiteralString, s))
                .collect()
        }
        _ => Vec::new(),
    }
}

fn argument_pool(ast: &Ast, site: NodeId) -> Vec<SyntaxNode> {
    let mut pool: Vec<SyntaxNode> = scope_vars(ast, site).iter().map(|v| ident(v)).collect();
    pool.push(SyntaxNode::leaf(NodeKind::ThisExpression, None));
    pool.push(SyntaxNode::leaf(NodeKind::ObjectExpression, None));
    pool.push(num("42"));
    pool
}

/// Possibly semantics-changing mutants around `site`.
pub fn mutate_gj(ast: &Ast, site: NodeId) -> Vec<Mutant> {
    let Some(stmt) = ast.enclosing_statement(site) else { return Vec::new() };
    let mut out = Vec::new();
    let mut push = |kind, payload: String, ast: Ast| out.push(Mutant { mutation: Mutation { kind, site, payload }, ast });

    for n in in_subtree(ast, stmt) {
        for r in constant_replacements(ast, n) {
            let payload = format!("{}->{}", render_node(ast, n), render_node(&Ast::from_syntax(&r), NodeId(0)));
            push(MutationKind::ChangeConstant, payload, edited(ast, n, |x| *x = r.clone()));
        }
    }

    let pool = argument_pool(ast, site);
    for call in in_subtree(ast, stmt).filter(|&n| matches!(ast.kind(n), NodeKind::CallExpression | NodeKind::NewExpression)) {
        for arg in &pool {
            let text = render_node(&Ast::from_syntax(arg), NodeId(0));
            push(MutationKind::AddMethodArgument, format!("+{text}"), edited(ast, call, |x| x.children.push(arg.clone())));
        }
        for &a in &ast.children(call)[1..] {
            if !ast.kind(a).is_literal() {
                continue;
            }
            for arg in &pool {
                let text = render_node(&Ast::from_syntax(arg), NodeId(0));
                let payload = format!("{}->{text}", render_node(ast, a));
                push(MutationKind::AddMethodArgument, payload, edited(ast, a, |x| *x = arg.clone()));
            }
        }
    }

    let mut funcs: Vec<NodeId> = in_subtree(ast, stmt).filter(|&n| ast.kind(n).is_function()).collect();
    if let Some(f) = ast.enclosing_function(site) {
        if !funcs.contains(&f) {
            funcs.push(f);
        }
    }
    for f in funcs {
        let name = FreshNames::new(ast).fresh();
        let param = SyntaxNode::leaf(NodeKind::Parameter, Some(name.clone()));
        let m = edited(ast, f, |x| {
            let body = x.children.len() - 1;
            x.children.insert(body, param.clone());
        });
        push(MutationKind::AddMethodParameter, name, m);
    }
    out
}

/// Id of the node in `mutant` that was `old` in the original, if any.
pub fn transport_table(original: &Ast, mutant: &Ast) -> Vec<Option<NodeId>> {
    let mut map = vec![None; original.len()];
    for i in 0..mutant.tree_len() as u32 {
        if let Some(o) = mutant.origin(NodeId(i)) {
            map[o.index()] = Some(NodeId(i));
        }
    }
    for d in crate::minilang::Distinguished::ALL {
        map[original.distinguished(d).index()] = Some(mutant.distinguished(d));
    }
    map
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minilang::{parse, render};

    fn sources(ms: &[Mutant]) -> Vec<String> {
        ms.iter().map(|m| render(&m.ast)).collect()
    }

    #[test]
    fn ema_on_assignment() {
        let t = parse("var b = {};\na = b;").unwrap();
        let ms = mutate_ema(&t, NodeId(4));
        let srcs = sources(&ms);
        assert!(srcs.contains(&"var b = {};\nvar c = 1;\na = b;".to_string()), "{srcs:#?}");
        assert!(srcs.contains(&"var b = {};\nif (false) {\n  a = b;\n}\na = b;".to_string()));
        assert!(srcs.contains(&"var c = {};\na = c;".to_string()));
        assert!(srcs.contains(&"var b = {};\nc = b;".to_string()));
        assert!(ms.iter().all(|m| m.mutation.kind.is_ema()));
        assert!(mutate_ema(&t, t.distinguished(crate::minilang::Distinguished::Global)).is_empty());
        assert!(mutate_ema(&t, t.root()).is_empty());
    }

    #[test]
    fn rename_keeps_properties_and_reserved_names() {
        let t = parse("var o = {k: 1};\nvar k = o.k;\nvar x = Object(o);").unwrap();
        let site = t.tree_ids().find(|n| t.kind(*n) == NodeKind::CallExpression).unwrap();
        let srcs = sources(&mutate_ema(&t, site));
        assert!(srcs.contains(&"var c = {k: 1};\nvar k = c.k;\nvar x = Object(c);".to_string()), "{srcs:#?}");
        assert!(srcs.iter().all(|s| s.contains("Object(")));
        assert!(!srcs.iter().any(|s| s.contains("var c = c.k")));
    }

    #[test]
    fn function_rename_includes_parameters() {
        let t = parse("function f(v) { return v; }\nvar r = f(1);").unwrap();
        let site = t.tree_ids().find(|n| t.kind(*n) == NodeKind::CallExpression).unwrap();
        let ms = mutate_ema(&t, site);
        let m = ms.iter().find(|m| m.mutation.kind == MutationKind::RenameUserFunction).unwrap();
        assert_eq!(render(&m.ast), "function c(d) {\n  return d;\n}\nvar r = c(1);");
    }

    #[test]
    fn gj_on_filter_call() {
        let t = parse("function isBig(value) { return value >= this.length; }\nvar dat = [5, 3];\nvar a = dat.filter(isBig, 42);").unwrap();
        let site = t.tree_ids().find(|n| t.kind(*n) == NodeKind::CallExpression).unwrap();
        let srcs = sources(&mutate_gj(&t, site));
        for s in ["var a = dat.filter(isBig, dat);", "var a = dat.filter(isBig, 43);", "var a = dat.filter(isBig, -1);", "var a = dat.filter(isBig, 42, this);", "var a = dat.filter(isBig, {});"] {
            assert!(srcs.iter().any(|x| x.ends_with(s)), "{s} missing from {srcs:#?}");
        }
        let t = parse("var dat = [5, 3];\nvar a = dat.filter(isBig);\nfunction isBig(value) { return value; }").unwrap();
        let site = t.tree_ids().find(|n| t.kind(*n) == NodeKind::CallExpression).unwrap();
        let srcs = sources(&mutate_gj(&t, site));
        assert!(srcs.iter().any(|x| x.contains("dat.filter(isBig, 42)")));
    }

    #[test]
    fn add_parameter_to_enclosing_function() {
        let t = parse("function f(v) { return this; }").unwrap();
        let this = t.tree_ids().find(|n| t.kind(*n) == NodeKind::ThisExpression).unwrap();
        let ms = mutate_gj(&t, this);
        let m = ms.iter().find(|m| m.mutation.kind == MutationKind::AddMethodParameter).unwrap();
        assert_eq!(render(&m.ast), "function f(v, c) {\n  return this;\n}");
    }

    #[test]
    fn mutants_reparse_to_the_same_tree() {
        let src = "function f(v) { var s = \"x\"; return this; }\nvar o = {m: f};\no.m(1.5);\ntry { f(); } catch (e) { var z = e; }";
        let t = parse(src).unwrap();
        for site in t.tree_ids() {
            for m in mutate_ema(&t, site).into_iter().chain(mutate_gj(&t, site)) {
                let again = parse(&render(&m.ast)).unwrap();
                assert_eq!(again, m.ast, "{}", render(&m.ast));
            }
        }
    }

    #[test]
    fn transport_follows_inserted_statement() {
        let t = parse("var b = {};\na = b;").unwrap();
        let m = mutate_ema(&t, NodeId(4)).into_iter().find(|m| m.mutation.kind == MutationKind::AddSideEffectFreeExpr).unwrap();
        let map = transport_table(&t, &m.ast);
        assert_eq!(map[4], Some(NodeId(6)));
        assert_eq!(map[1], Some(NodeId(1)));
        assert_eq!(map[t.distinguished(crate::minilang::Distinguished::This).index()], Some(m.ast.distinguished(crate::minilang::Distinguished::This)));
    }
}
