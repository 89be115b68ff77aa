use std::collections::HashMap;
use std::fmt;

/// Pre-order node identifier. Tree nodes occupy `0..tree_len`, the four
/// distinguished nodes follow.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

macro_rules! node_kinds {
    ($($kind:ident),* $(,)?) => {
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum NodeKind {
            $($kind),*
        }

        impl NodeKind {
            pub const ALL: &'static [NodeKind] = &[$(NodeKind::$kind),*];

            pub fn name(self) -> &'static str {
                match self {
                    $(NodeKind::$kind => stringify!($kind)),*
                }
            }

            pub fn from_name(name: &str) -> Option<NodeKind> {
                match name {
                    $(stringify!($kind) => Some(NodeKind::$kind),)*
                    _ => None,
                }
            }
        }
    };
}

node_kinds!(
    Program,
    VarDeclaration,
    Assignment,
    Identifier,
    LiteralNumber,
    LiteralString,
    LiteralBoolean,
    LiteralNull,
    ObjectExpression,
    ArrayExpression,
    NewExpression,
    CallExpression,
    MemberExpression,
    FunctionDeclaration,
    FunctionExpression,
    Parameter,
    Argument,
    ReturnStatement,
    ExpressionStatement,
    IfStatement,
    TryStatement,
    CatchClause,
    ThisExpression,
    BlockStatement,
    UnaryExpression,
    BinaryExpression,
);

impl NodeKind {
    pub fn is_function(self) -> bool {
        matches!(self, NodeKind::FunctionDeclaration | NodeKind::FunctionExpression)
    }

    pub fn is_literal(self) -> bool {
        matches!(
            self,
            NodeKind::LiteralNumber
                | NodeKind::LiteralString
                | NodeKind::LiteralBoolean
                | NodeKind::LiteralNull
        )
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The synthetic targets of the `GoTo*` instructions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Distinguished {
    Global,
    Undefined,
    Null,
    This,
}

impl Distinguished {
    pub const ALL: [Distinguished; 4] = [
        Distinguished::Global,
        Distinguished::Undefined,
        Distinguished::Null,
        Distinguished::This,
    ];

    fn offset(self) -> usize {
        match self {
            Distinguished::Global => 0,
            Distinguished::Undefined => 1,
            Distinguished::Null => 2,
            Distinguished::This => 3,
        }
    }

    fn node(self) -> (NodeKind, Option<&'static str>) {
        match self {
            Distinguished::Global => (NodeKind::Identifier, Some("global")),
            Distinguished::Undefined => (NodeKind::Identifier, Some("undefined")),
            Distinguished::Null => (NodeKind::LiteralNull, Some("null")),
            Distinguished::This => (NodeKind::ThisExpression, None),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Node {
    pub kind: NodeKind,
    pub value: Option<String>,
    pub children: Vec<NodeId>,
    pub parent: Option<NodeId>,
}

/// Owned tree form used by the parser and by program mutations. `origin`
/// remembers the id a node had in the tree it was copied from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SyntaxNode {
    pub kind: NodeKind,
    pub value: Option<String>,
    pub children: Vec<SyntaxNode>,
    pub origin: Option<NodeId>,
}

impl SyntaxNode {
    pub fn new(kind: NodeKind, value: Option<String>, children: Vec<SyntaxNode>) -> SyntaxNode {
        SyntaxNode { kind, value, children, origin: None }
    }

    pub fn leaf(kind: NodeKind, value: Option<String>) -> SyntaxNode {
        SyntaxNode::new(kind, value, Vec::new())
    }

    pub fn size(&self) -> usize {
        1 + self.children.iter().map(SyntaxNode::size).sum::<usize>()
    }

    /// Drops origin information from the whole subtree.
    pub fn detached(mut self) -> SyntaxNode {
        fn clear(n: &mut SyntaxNode) {
            n.origin = None;
            n.children.iter_mut().for_each(clear);
        }
        clear(&mut self);
        self
    }
}

/// Immutable program tree with navigation tables precomputed for the DSL.
#[derive(Clone, Debug)]
pub struct Ast {
    nodes: Vec<Node>,
    tree_len: usize,
    origins: Vec<Option<NodeId>>,
    child_index: Vec<u32>,
    scope: Vec<Option<NodeId>>,
    prev_value: Vec<Option<NodeId>>,
    prev_kind: Vec<Option<NodeId>>,
}

impl PartialEq for Ast {
    fn eq(&self, other: &Ast) -> bool {
        self.nodes == other.nodes
    }
}

impl Eq for Ast {}

impl Ast {
    pub fn from_syntax(root: &SyntaxNode) -> Ast {
        let mut nodes = Vec::with_capacity(root.size() + 4);
        let mut origins = Vec::with_capacity(nodes.capacity());
        let mut child_index = Vec::with_capacity(nodes.capacity());
        flatten(root, None, 0, &mut nodes, &mut origins, &mut child_index);
        let tree_len = nodes.len();
        for d in Distinguished::ALL {
            let (kind, value) = d.node();
            nodes.push(Node { kind, value: value.map(str::to_string), children: Vec::new(), parent: None });
            origins.push(None);
            child_index.push(0);
        }
        let mut ast = Ast {
            nodes,
            tree_len,
            origins,
            child_index,
            scope: Vec::new(),
            prev_value: Vec::new(),
            prev_kind: Vec::new(),
        };
        ast.build_tables();
        ast
    }

    fn build_tables(&mut self) {
        let n = self.nodes.len();
        let mut scope = vec![None; n];
        for i in 1..self.tree_len {
            let parent = self.nodes[i].parent.expect("tree node has a parent");
            scope[i] = if self.nodes[parent.index()].kind.is_function() {
                Some(parent)
            } else {
                scope[parent.index()]
            };
        }
        let mut prev_value = vec![None; n];
        let mut prev_kind = vec![None; n];
        let mut last_value: HashMap<(Option<NodeId>, Option<&str>), NodeId> = HashMap::new();
        let mut last_kind: HashMap<(Option<NodeId>, NodeKind), NodeId> = HashMap::new();
        for i in 0..self.tree_len {
            let id = NodeId(i as u32);
            let node = &self.nodes[i];
            let vkey = (scope[i], node.value.as_deref());
            prev_value[i] = last_value.insert(vkey, id);
            prev_kind[i] = last_kind.insert((scope[i], node.kind), id);
        }
        self.scope = scope;
        self.prev_value = prev_value;
        self.prev_kind = prev_kind;
    }

    pub fn empty() -> Ast {
        Ast::from_syntax(&SyntaxNode::leaf(NodeKind::Program, None))
    }

    pub fn root(&self) -> NodeId {
        NodeId(0)
    }

    /// Number of node ids, including the distinguished nodes.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of nodes reachable from the root.
    pub fn tree_len(&self) -> usize {
        self.tree_len
    }

    pub fn contains(&self, id: NodeId) -> bool {
        id.index() < self.nodes.len()
    }

    pub fn tree_ids(&self) -> impl Iterator<Item = NodeId> {
        (0..self.tree_len as u32).map(NodeId)
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.index()]
    }

    pub fn kind(&self, id: NodeId) -> NodeKind {
        self.nodes[id.index()].kind
    }

    pub fn value(&self, id: NodeId) -> Option<&str> {
        self.nodes[id.index()].value.as_deref()
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        &self.nodes[id.index()].children
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.nodes[id.index()].parent
    }

    pub fn child(&self, id: NodeId, i: usize) -> Option<NodeId> {
        self.children(id).get(i).copied()
    }

    /// 0-based index among the parent's children (0 for parentless nodes).
    pub fn child_index(&self, id: NodeId) -> usize {
        self.child_index[id.index()] as usize
    }

    pub fn left_sibling(&self, id: NodeId) -> Option<NodeId> {
        let p = self.parent(id)?;
        let i = self.child_index(id);
        if i == 0 {
            None
        } else {
            Some(self.children(p)[i - 1])
        }
    }

    pub fn right_sibling(&self, id: NodeId) -> Option<NodeId> {
        let p = self.parent(id)?;
        self.children(p).get(self.child_index(id) + 1).copied()
    }

    pub fn distinguished(&self, d: Distinguished) -> NodeId {
        NodeId((self.tree_len + d.offset()) as u32)
    }

    pub fn distinguished_role(&self, id: NodeId) -> Option<Distinguished> {
        let i = id.index().checked_sub(self.tree_len)?;
        Distinguished::ALL.get(i).copied()
    }

    pub fn is_distinguished(&self, id: NodeId) -> bool {
        id.index() >= self.tree_len && id.index() < self.nodes.len()
    }

    /// Nearest strict ancestor that is a function, `None` for top-level code.
    pub fn enclosing_function(&self, id: NodeId) -> Option<NodeId> {
        self.scope[id.index()]
    }

    /// Largest earlier node with the same value in the same function scope.
    pub fn prev_same_value(&self, id: NodeId) -> Option<NodeId> {
        self.prev_value[id.index()]
    }

    /// Largest earlier node with the same kind in the same function scope.
    pub fn prev_same_kind(&self, id: NodeId) -> Option<NodeId> {
        self.prev_kind[id.index()]
    }

    /// Id of the corresponding node in the tree this one was derived from.
    pub fn origin(&self, id: NodeId) -> Option<NodeId> {
        self.origins[id.index()]
    }

    pub fn ancestors(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        std::iter::successors(self.parent(id), move |p| self.parent(*p))
    }

    /// Statement whose parent is a statement list (Program or block) and that
    /// contains `id`.
    pub fn enclosing_statement(&self, id: NodeId) -> Option<NodeId> {
        if self.is_distinguished(id) {
            return None;
        }
        let mut cur = id;
        loop {
            let p = self.parent(cur)?;
            if matches!(self.kind(p), NodeKind::Program | NodeKind::BlockStatement) {
                return Some(cur);
            }
            cur = p;
        }
    }

    /// Ids of the subtree rooted at `id` (a contiguous pre-order range).
    pub fn subtree(&self, id: NodeId) -> std::ops::Range<u32> {
        let mut end = id;
        while let Some(&last) = self.children(end).last() {
            end = last;
        }
        id.0..end.0 + 1
    }

    /// Owned copy whose nodes remember their ids here.
    pub fn to_syntax(&self) -> SyntaxNode {
        self.syntax_at(self.root())
    }

    pub fn syntax_at(&self, id: NodeId) -> SyntaxNode {
        let n = self.node(id);
        SyntaxNode {
            kind: n.kind,
            value: n.value.clone(),
            children: n.children.iter().map(|c| self.syntax_at(*c)).collect(),
            origin: Some(id),
        }
    }

    /// Short human-readable label such as `Identifier:b`.
    pub fn describe(&self, id: NodeId) -> String {
        match self.value(id) {
            Some(v) => format!("{}:{}", self.kind(id), v),
            None => self.kind(id).to_string(),
        }
    }
}

fn flatten(
    node: &SyntaxNode,
    parent: Option<NodeId>,
    index: usize,
    nodes: &mut Vec<Node>,
    origins: &mut Vec<Option<NodeId>>,
    child_index: &mut Vec<u32>,
) -> NodeId {
    let id = NodeId(nodes.len() as u32);
    nodes.push(Node { kind: node.kind, value: node.value.clone(), children: Vec::new(), parent });
    origins.push(node.origin);
    child_index.push(index as u32);
    let children: Vec<NodeId> = node
        .children
        .iter()
        .enumerate()
        .map(|(i, c)| flatten(c, Some(id), i, nodes, origins, child_index))
        .collect();
    nodes[id.index()].children = children;
    id
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assign_tree() -> Ast {
        use NodeKind::*;
        let s = |k, v: Option<&str>, c| SyntaxNode::new(k, v.map(str::to_string), c);
        Ast::from_syntax(&s(
            Program,
            None,
            vec![
                s(VarDeclaration, Some("b"), vec![s(ObjectExpression, None, vec![])]),
                s(
                    Assignment,
                    None,
                    vec![s(Identifier, Some("a"), vec![]), s(Identifier, Some("b"), vec![])],
                ),
            ],
        ))
    }

    #[test]
    fn preorder_ids_and_links() {
        let ast = assign_tree();
        assert_eq!(ast.tree_len(), 6);
        assert_eq!(ast.len(), 10);
        assert_eq!(ast.describe(NodeId(4)), "Identifier:a");
        assert_eq!(ast.parent(NodeId(5)), Some(NodeId(3)));
        assert_eq!(ast.right_sibling(NodeId(4)), Some(NodeId(5)));
        assert_eq!(ast.left_sibling(NodeId(4)), None);
        assert_eq!(ast.child_index(NodeId(5)), 1);
        assert_eq!(ast.subtree(NodeId(3)), 3..6);
        assert_eq!(ast.enclosing_statement(NodeId(5)), Some(NodeId(3)));
    }

    #[test]
    fn distinguished_nodes_are_detached() {
        let ast = assign_tree();
        let g = ast.distinguished(Distinguished::Global);
        assert_eq!(g, NodeId(6));
        assert_eq!(ast.parent(g), None);
        assert_eq!(ast.distinguished_role(NodeId(9)), Some(Distinguished::This));
        assert_eq!(ast.distinguished_role(NodeId(5)), None);
        assert_eq!(ast.children(ast.root()).len(), 2);
    }

    #[test]
    fn previous_value_in_scope() {
        let ast = assign_tree();
        assert_eq!(ast.prev_same_value(NodeId(5)), Some(NodeId(1)));
        assert_eq!(ast.prev_same_value(NodeId(4)), None);
        assert_eq!(ast.prev_same_kind(NodeId(5)), Some(NodeId(4)));
    }

    #[test]
    fn kind_names_round_trip() {
        for k in NodeKind::ALL {
            assert_eq!(NodeKind::from_name(k.name()), Some(*k));
        }
        assert_eq!(NodeKind::ALL.len(), 26);
    }
}
