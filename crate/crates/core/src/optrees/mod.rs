//! Operation trees over a leaf/operation alphabet and their bottom-up
//! evaluation with element provenance.

mod alphabet;
mod eval;
mod parse;

pub use alphabet::{
    AlphabetSpec, LeafSymbol, OpKind, OpSymbol, Symbol, MAX_LEAF_SIZE, REL_ANC, REL_EDGE, REL_LEFT,
    REL_LT,
};
pub(crate) use eval::combine;
pub use eval::CombineStep;
pub use eval::{evaluate, evaluate_marked, leaf_element, Provenance};
pub use parse::{parse_tree, write_tree};

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Node ids must fit below the 8 low bits reserved for local element indices.
pub const MAX_NODE_ID: u64 = (1 << 55) - 1;

#[derive(Debug)]
pub struct Node {
    id: u64,
    kind: NodeKind,
}

#[derive(Debug)]
pub enum NodeKind {
    Leaf(usize),
    Internal(usize, Vec<Arc<Node>>),
}

impl Node {
    pub fn leaf(id: u64, symbol: usize) -> Arc<Node> {
        Arc::new(Node {
            id,
            kind: NodeKind::Leaf(symbol),
        })
    }

    pub fn internal(id: u64, op: usize, children: Vec<Arc<Node>>) -> Arc<Node> {
        Arc::new(Node {
            id,
            kind: NodeKind::Internal(op, children),
        })
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn kind(&self) -> &NodeKind {
        &self.kind
    }

    pub fn children(&self) -> &[Arc<Node>] {
        match &self.kind {
            NodeKind::Leaf(_) => &[],
            NodeKind::Internal(_, c) => c,
        }
    }
}

// Deep chains would overflow the stack under the default recursive drop.
impl Drop for Node {
    fn drop(&mut self) {
        let NodeKind::Internal(_, children) = &mut self.kind else {
            return;
        };
        let mut stack = std::mem::take(children);
        while let Some(n) = stack.pop() {
            if let Ok(mut inner) = Arc::try_unwrap(n) {
                if let NodeKind::Internal(_, c) = &mut inner.kind {
                    stack.append(c);
                }
            }
        }
    }
}

/// An operation tree. Node ids are unique within the tree and double as the
/// high bits of the element ids the node introduces.
#[derive(Debug, Clone)]
pub struct OpTree {
    root: Arc<Node>,
    next_id: u64,
}

/// Root-to-node path of child indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Address(pub Vec<usize>);

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("/");
        }
        for i in &self.0 {
            write!(f, "/{i}")?;
        }
        Ok(())
    }
}

impl std::str::FromStr for Address {
    type Err = Error;

    fn from_str(s: &str) -> Result<Address> {
        let path = s.trim().trim_start_matches('/');
        if path.is_empty() {
            return Ok(Address::default());
        }
        path.split('/')
            .map(|p| {
                p.parse()
                    .map_err(|_| Error::domain(format!("bad address component {p:?}")))
            })
            .collect::<Result<Vec<_>>>()
            .map(Address)
    }
}

#[derive(Debug, Clone)]
/// Preorder flattening with parent links, for passes that need random access.
pub struct Flat {
    pub nodes: Vec<FlatNode>,
}

#[derive(Debug, Clone)]
pub struct FlatNode {
    pub node: Arc<Node>,
    pub parent: Option<usize>,
    /// Position among the parent's children.
    pub slot: usize,
    pub children: Vec<usize>,
    pub depth: usize,
}

impl Flat {
    pub fn address(&self, mut i: usize) -> Address {
        let mut path = Vec::new();
        while let Some(p) = self.nodes[i].parent {
            path.push(self.nodes[i].slot);
            i = p;
        }
        path.reverse();
        Address(path)
    }

    /// Indices in postorder (children before parents).
    pub fn postorder(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![(0usize, false)];
        while let Some((i, expanded)) = stack.pop() {
            if expanded || self.nodes[i].children.is_empty() {
                out.push(i);
            } else {
                stack.push((i, true));
                for &c in self.nodes[i].children.iter().rev() {
                    stack.push((c, false));
                }
            }
        }
        out
    }
}

impl OpTree {
    pub fn new(root: Arc<Node>) -> OpTree {
        let mut max = 0;
        let mut stack = vec![&root];
        while let Some(n) = stack.pop() {
            max = max.max(n.id);
            stack.extend(n.children());
        }
        OpTree {
            root,
            next_id: max + 1,
        }
    }

    pub(crate) fn with_next_id(root: Arc<Node>, next_id: u64) -> OpTree {
        OpTree { root, next_id }
    }

    pub fn root(&self) -> &Arc<Node> {
        &self.root
    }

    /// A fresh node id, larger than every id in the tree.
    pub fn next_id(&self) -> u64 {
        self.next_id
    }

    pub fn flatten(&self) -> Flat {
        let mut nodes: Vec<FlatNode> = Vec::new();
        let mut stack: Vec<(Arc<Node>, Option<usize>, usize, usize)> =
            vec![(self.root.clone(), None, 0, 0)];
        while let Some((node, parent, slot, depth)) = stack.pop() {
            let i = nodes.len();
            if let Some(p) = parent {
                nodes[p].children.push(i);
            }
            for (s, c) in node.children().iter().enumerate().rev() {
                stack.push((c.clone(), Some(i), s, depth + 1));
            }
            nodes.push(FlatNode {
                node,
                parent,
                slot,
                children: Vec::new(),
                depth,
            });
        }
        Flat { nodes }
    }

    pub fn node_count(&self) -> usize {
        self.fold_metrics().0
    }

    /// Edges on the longest root-to-leaf path.
    pub fn height(&self) -> usize {
        self.fold_metrics().1
    }

    pub fn max_degree(&self) -> usize {
        self.fold_metrics().2
    }

    pub fn leaf_count(&self) -> usize {
        self.fold_metrics().3
    }

    fn fold_metrics(&self) -> (usize, usize, usize, usize) {
        let (mut count, mut height, mut degree, mut leaves) = (0, 0, 0, 0);
        let mut stack = vec![(&self.root, 0usize)];
        while let Some((n, d)) = stack.pop() {
            count += 1;
            height = height.max(d);
            degree = degree.max(n.children().len());
            if n.children().is_empty() {
                leaves += 1;
            }
            stack.extend(n.children().iter().map(|c| (c, d + 1)));
        }
        (count, height, degree, leaves)
    }

    pub fn node_at(&self, at: &Address) -> Result<&Arc<Node>> {
        let mut n = &self.root;
        for (depth, &i) in at.0.iter().enumerate() {
            n = n.children().get(i).ok_or_else(|| {
                Error::domain(format!(
                    "address {at} invalid: node at depth {depth} has {} children",
                    n.children().len()
                ))
            })?;
        }
        Ok(n)
    }

    /// Replace the subtree at `at`. Spine nodes keep their ids; if the
    /// replacement's ids clash with the rest of the tree it is renumbered.
    pub fn subtree_replace(&self, at: &Address, replacement: &OpTree) -> Result<OpTree> {
        let target = self.node_at(at)?;
        let mut kept = std::collections::HashSet::new();
        let mut stack = vec![&self.root];
        while let Some(n) = stack.pop() {
            if Arc::ptr_eq(n, target) {
                continue;
            }
            kept.insert(n.id);
            stack.extend(n.children());
        }
        let mut next_id = self.next_id.max(replacement.next_id);
        let mut clash = false;
        let mut stack = vec![&replacement.root];
        while let Some(n) = stack.pop() {
            clash |= kept.contains(&n.id);
            stack.extend(n.children());
        }
        let new_sub = if clash {
            renumber(&replacement.root, &mut next_id)
        } else {
            replacement.root.clone()
        };
        let root = rebuild_spine(&self.root, &at.0, new_sub);
        Ok(OpTree::with_next_id(root, next_id))
    }

    /// Keep only the children of the node at `at` whose positions satisfy
    /// `keep`; spine ids are preserved.
    pub fn splice_children(&self, at: &Address, keep: impl Fn(usize) -> bool) -> Result<OpTree> {
        let target = self.node_at(at)?;
        let NodeKind::Internal(op, children) = target.kind() else {
            return Err(Error::domain(format!("node at {at} is a leaf")));
        };
        let kept: Vec<Arc<Node>> = children
            .iter()
            .enumerate()
            .filter(|(i, _)| keep(*i))
            .map(|(_, c)| c.clone())
            .collect();
        let replacement = Node::internal(target.id, *op, kept);
        let root = rebuild_spine(&self.root, &at.0, replacement);
        Ok(OpTree::with_next_id(root, self.next_id))
    }

    /// Check symbols and arities against `spec`.
    pub fn validate(&self, spec: &AlphabetSpec) -> Result<()> {
        let flat = self.flatten();
        let mut ids = std::collections::HashSet::new();
        for (i, f) in flat.nodes.iter().enumerate() {
            let at = || flat.address(i).to_string();
            if f.node.id > MAX_NODE_ID || !ids.insert(f.node.id) {
                return Err(Error::domain(format!(
                    "node id {} at {} is invalid or repeated",
                    f.node.id,
                    at()
                )));
            }
            match f.node.kind() {
                NodeKind::Leaf(s) if *s >= spec.leaves().len() => {
                    return Err(Error::domain(format!("unknown leaf symbol at {}", at())))
                }
                NodeKind::Internal(o, c) => {
                    let op = spec
                        .ops()
                        .get(*o)
                        .ok_or_else(|| Error::domain(format!("unknown op at {}", at())))?;
                    if !op.allows(c.len()) {
                        return Err(Error::domain(format!(
                            "{} at {} has {} children; allowed: {}",
                            op.name,
                            at(),
                            c.len(),
                            op.arity_description()
                        )));
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// Copy of `node` with fresh ids assigned in preorder.
pub(crate) fn renumber(node: &Arc<Node>, next_id: &mut u64) -> Arc<Node> {
    copy_with(node, &mut || {
        let id = *next_id;
        *next_id += 1;
        id
    })
}

fn copy_with(node: &Arc<Node>, fresh: &mut dyn FnMut() -> u64) -> Arc<Node> {
    // Iterative to survive deep chains: build ids in preorder, assemble in postorder.
    let mut ids = std::collections::HashMap::new();
    let mut order = Vec::new();
    let mut stack = vec![node];
    while let Some(n) = stack.pop() {
        ids.insert(Arc::as_ptr(n), fresh());
        order.push(n);
        stack.extend(n.children().iter().rev());
    }
    let mut built: std::collections::HashMap<*const Node, Arc<Node>> =
        std::collections::HashMap::new();
    for n in order.into_iter().rev() {
        let id = ids[&Arc::as_ptr(n)];
        let copy = match n.kind() {
            NodeKind::Leaf(s) => Node::leaf(id, *s),
            NodeKind::Internal(o, c) => Node::internal(
                id,
                *o,
                c.iter()
                    .map(|c| built.remove(&Arc::as_ptr(c)).expect("child built"))
                    .collect(),
            ),
        };
        built.insert(Arc::as_ptr(n), copy);
    }
    built.remove(&Arc::as_ptr(node)).expect("root built")
}

/// Rebuild the path from `root` along `path`, putting `replacement` at its end.
pub(crate) fn rebuild_spine(root: &Arc<Node>, path: &[usize], replacement: Arc<Node>) -> Arc<Node> {
    let mut spine = vec![root.clone()];
    for &i in path {
        let next = spine.last().unwrap().children()[i].clone();
        spine.push(next);
    }
    let mut current = replacement;
    for (depth, &i) in path.iter().enumerate().rev() {
        let parent = &spine[depth];
        let NodeKind::Internal(op, children) = parent.kind() else {
            unreachable!("path goes through internal nodes");
        };
        let mut children = children.clone();
        children[i] = current;
        current = Node::internal(parent.id, *op, children);
    }
    current
}
