//! Solution objects for both objectives and their exact evaluators.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::metric::Metric;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ObjectiveError {
    #[error("solution covers {found} points but the metric has {expected}")]
    SizeMismatch { expected: usize, found: usize },
    #[error("malformed tree: {0}")]
    MalformedTree(String),
    #[error("point {0} appears on more than one leaf")]
    DuplicateLeaf(usize),
    #[error("empty ladder: no order and no tail")]
    EmptyInput,
    #[error("invalid arrangement: {0}")]
    InvalidArrangement(String),
}

/// Bijection from points to line slots `1..=n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LinearArrangement {
    position: Vec<usize>,
}

impl LinearArrangement {
    pub fn identity(n: usize) -> Self {
        LinearArrangement { position: (1..=n).collect() }
    }

    /// `position[p]` is the 1-based slot of point `p`.
    pub fn from_positions(position: Vec<usize>) -> Result<Self, ObjectiveError> {
        let n = position.len();
        let mut used = vec![false; n + 1];
        for (p, &s) in position.iter().enumerate() {
            if s == 0 || s > n {
                return Err(ObjectiveError::InvalidArrangement(format!(
                    "point {p} mapped to slot {s} outside 1..={n}"
                )));
            }
            if std::mem::replace(&mut used[s], true) {
                return Err(ObjectiveError::InvalidArrangement(format!("slot {s} used twice")));
            }
        }
        Ok(LinearArrangement { position })
    }

    /// `order[s]` is the point placed at slot `s + 1`.
    pub fn from_order(order: &[usize]) -> Result<Self, ObjectiveError> {
        let n = order.len();
        let mut position = vec![0; n];
        for (s, &p) in order.iter().enumerate() {
            if p >= n {
                return Err(ObjectiveError::InvalidArrangement(format!("point {p} out of range for {n} slots")));
            }
            if position[p] != 0 {
                return Err(ObjectiveError::InvalidArrangement(format!("point {p} placed twice")));
            }
            position[p] = s + 1;
        }
        Ok(LinearArrangement { position })
    }

    pub fn len(&self) -> usize {
        self.position.len()
    }

    pub fn is_empty(&self) -> bool {
        self.position.is_empty()
    }

    pub fn position(&self, p: usize) -> usize {
        self.position[p]
    }

    pub fn positions(&self) -> &[usize] {
        &self.position
    }

    /// Points listed from slot 1 to slot n.
    pub fn order(&self) -> Vec<usize> {
        let mut order = vec![0; self.position.len()];
        for (p, &s) in self.position.iter().enumerate() {
            order[s - 1] = p;
        }
        order
    }

    pub fn reversed(&self) -> Self {
        let n = self.position.len();
        LinearArrangement { position: self.position.iter().map(|&s| n + 1 - s).collect() }
    }
}

impl fmt::Display for LinearArrangement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (t, s) in self.position.iter().enumerate() {
            if t > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

impl FromStr for LinearArrangement {
    type Err = ObjectiveError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let position = s
            .split_whitespace()
            .map(|tok| {
                tok.parse::<usize>().map_err(|_| ObjectiveError::InvalidArrangement(format!("bad slot {tok:?}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_positions(position)
    }
}

/// `Σ_{i<j} d(i,j)·|y_i − y_j|`.
pub fn evaluate_la(m: &Metric, y: &LinearArrangement) -> Result<f64, ObjectiveError> {
    if y.len() != m.n() {
        return Err(ObjectiveError::SizeMismatch { expected: m.n(), found: y.len() });
    }
    let pos = y.positions();
    let mut total = 0.0;
    for i in 0..m.n() {
        let row = m.row(i);
        let pi = pos[i] as f64;
        for j in (i + 1)..m.n() {
            total += row[j] * (pi - pos[j] as f64).abs();
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Node {
    Leaf(usize),
    Internal(usize, usize),
}

/// Rooted binary tree with one point per leaf.
///
/// Nodes live in an arena where every child index is smaller than its
/// parent's and the root is the last node, so a forward scan is a post-order.
#[derive(Debug, Clone)]
pub struct HcTree {
    nodes: Vec<Node>,
}

/// Structural equality: same shape, same child order, same leaf labels,
/// regardless of arena layout.
impl PartialEq for HcTree {
    fn eq(&self, other: &Self) -> bool {
        if self.nodes.len() != other.nodes.len() {
            return false;
        }
        let mut stack = vec![(self.root(), other.root())];
        while let Some((a, b)) = stack.pop() {
            match (self.nodes[a], other.nodes[b]) {
                (Node::Leaf(p), Node::Leaf(q)) if p == q => {}
                (Node::Internal(al, ar), Node::Internal(bl, br)) => {
                    stack.push((al, bl));
                    stack.push((ar, br));
                }
                _ => return false,
            }
        }
        true
    }
}

impl Eq for HcTree {}

impl HcTree {
    pub fn leaf(p: usize) -> Self {
        HcTree { nodes: vec![Node::Leaf(p)] }
    }

    pub fn join(left: HcTree, right: HcTree) -> Self {
        let offset = left.nodes.len();
        let mut nodes = left.nodes;
        nodes.reserve(right.nodes.len() + 1);
        nodes.extend(right.nodes.into_iter().map(|nd| match nd {
            Node::Leaf(p) => Node::Leaf(p),
            Node::Internal(l, r) => Node::Internal(l + offset, r + offset),
        }));
        let (lr, rr) = (offset - 1, nodes.len() - 1);
        nodes.push(Node::Internal(lr, rr));
        HcTree { nodes }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn root(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.len().div_ceil(2)
    }

    /// Leaves in left-to-right order.
    pub fn leaves(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.leaf_count());
        let mut stack = vec![self.root()];
        while let Some(v) = stack.pop() {
            match self.nodes[v] {
                Node::Leaf(p) => out.push(p),
                Node::Internal(l, r) => {
                    stack.push(r);
                    stack.push(l);
                }
            }
        }
        out
    }

    /// Checks that the leaves are exactly `0..n`.
    pub fn validate_for(&self, n: usize) -> Result<(), ObjectiveError> {
        let leaves = self.leaves();
        if leaves.len() != n {
            return Err(ObjectiveError::SizeMismatch { expected: n, found: leaves.len() });
        }
        let mut seen = vec![false; n];
        for p in leaves {
            if p >= n {
                return Err(ObjectiveError::MalformedTree(format!("leaf {p} out of range")));
            }
            if std::mem::replace(&mut seen[p], true) {
                return Err(ObjectiveError::DuplicateLeaf(p));
            }
        }
        Ok(())
    }

    /// Exchanges the children of internal node `v`; leaves are untouched.
    pub fn swap_children(&mut self, v: usize) {
        if let Node::Internal(l, r) = self.nodes[v] {
            self.nodes[v] = Node::Internal(r, l);
        }
    }

    /// Same shape with every leaf `p` renamed to `map[p]`.
    pub fn relabel(&self, map: &[usize]) -> HcTree {
        let nodes = self
            .nodes
            .iter()
            .map(|nd| match *nd {
                Node::Leaf(p) => Node::Leaf(map[p]),
                other => other,
            })
            .collect();
        HcTree { nodes }
    }

    /// Same tree with every node's children ordered by smallest leaf id.
    pub fn canonical(&self) -> HcTree {
        let mut min_leaf = vec![0usize; self.nodes.len()];
        let mut nodes = self.nodes.clone();
        for (v, nd) in self.nodes.iter().enumerate() {
            match *nd {
                Node::Leaf(p) => min_leaf[v] = p,
                Node::Internal(l, r) => {
                    min_leaf[v] = min_leaf[l].min(min_leaf[r]);
                    if min_leaf[r] < min_leaf[l] {
                        nodes[v] = Node::Internal(r, l);
                    }
                }
            }
        }
        HcTree { nodes }
    }

    /// Leaf lists of each subtree, indexed like `nodes()`.
    fn for_each_split(&self, mut visit: impl FnMut(&[usize], &[usize])) {
        let mut lists: Vec<Vec<usize>> = Vec::with_capacity(self.nodes.len());
        for nd in &self.nodes {
            let list = match *nd {
                Node::Leaf(p) => vec![p],
                Node::Internal(l, r) => {
                    let left = std::mem::take(&mut lists[l]);
                    let right = std::mem::take(&mut lists[r]);
                    visit(&left, &right);
                    let mut merged = left;
                    merged.extend(right);
                    merged
                }
            };
            lists.push(list);
        }
    }

    /// Flat `n × n` matrix of `|T_{i,j}|` (leaf count under the LCA).
    pub fn lca_size_matrix(&self, n: usize) -> Vec<u32> {
        let mut out = vec![0u32; n * n];
        self.for_each_split(|left, right| {
            let size = (left.len() + right.len()) as u32;
            for &a in left {
                for &b in right {
                    out[a * n + b] = size;
                    out[b * n + a] = size;
                }
            }
        });
        out
    }

    pub fn to_newick(&self) -> String {
        enum Step {
            Visit(usize),
            Emit(&'static str),
        }
        let mut out = String::new();
        let mut stack = vec![Step::Visit(self.root())];
        while let Some(step) = stack.pop() {
            match step {
                Step::Emit(s) => out.push_str(s),
                Step::Visit(v) => match self.nodes[v] {
                    Node::Leaf(p) => out.push_str(&p.to_string()),
                    Node::Internal(l, r) => {
                        stack.push(Step::Emit(")"));
                        stack.push(Step::Visit(r));
                        stack.push(Step::Emit(","));
                        stack.push(Step::Visit(l));
                        out.push('(');
                    }
                },
            }
        }
        out.push(';');
        out
    }
}

impl fmt::Display for HcTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_newick())
    }
}

impl FromStr for HcTree {
    type Err = ObjectiveError;

    /// Parses `((0,1),2);`-style text. The trailing `;` is optional.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let body = s.trim();
        let body = body.strip_suffix(';').unwrap_or(body).trim_end();
        let bad = |msg: &str| ObjectiveError::MalformedTree(msg.to_string());
        let mut nodes: Vec<Node> = Vec::new();
        // Each open parenthesis collects child node indices.
        let mut frames: Vec<Vec<usize>> = Vec::new();
        let mut finished: Option<usize> = None;
        let bytes = body.as_bytes();
        let mut i = 0;
        while i < bytes.len() {
            let c = bytes[i];
            if finished.is_some() && !c.is_ascii_whitespace() {
                return Err(bad("trailing characters after root"));
            }
            match c {
                b'(' => frames.push(Vec::new()),
                b',' => {
                    if frames.last().is_none_or(|f| f.is_empty()) {
                        return Err(bad("misplaced ','"));
                    }
                }
                b')' => {
                    let children = frames.pop().ok_or_else(|| bad("unbalanced ')'"))?;
                    if children.len() != 2 {
                        return Err(ObjectiveError::MalformedTree(format!(
                            "internal node with {} children",
                            children.len()
                        )));
                    }
                    nodes.push(Node::Internal(children[0], children[1]));
                    let v = nodes.len() - 1;
                    match frames.last_mut() {
                        Some(f) => f.push(v),
                        None => finished = Some(v),
                    }
                }
                c if c.is_ascii_digit() => {
                    let start = i;
                    while i + 1 < bytes.len() && bytes[i + 1].is_ascii_digit() {
                        i += 1;
                    }
                    let p: usize = body[start..=i].parse().map_err(|_| bad("leaf id overflow"))?;
                    nodes.push(Node::Leaf(p));
                    let v = nodes.len() - 1;
                    match frames.last_mut() {
                        Some(f) => f.push(v),
                        None => finished = Some(v),
                    }
                }
                c if c.is_ascii_whitespace() => {}
                other => {
                    return Err(ObjectiveError::MalformedTree(format!("unexpected character {:?}", other as char)))
                }
            }
            i += 1;
        }
        if !frames.is_empty() {
            return Err(bad("unbalanced '('"));
        }
        match finished {
            Some(v) if v + 1 == nodes.len() => Ok(HcTree { nodes }),
            _ => Err(bad("empty tree")),
        }
    }
}

/// `Σ_{i<j} d(i,j)·|T_{i,j}|`, accumulated once per internal node over the
/// pairs it separates.
pub fn evaluate_hc(m: &Metric, t: &HcTree) -> Result<f64, ObjectiveError> {
    t.validate_for(m.n())?;
    let mut total = 0.0;
    t.for_each_split(|left, right| {
        let size = (left.len() + right.len()) as f64;
        total += size * m.weight_between(left, right);
    });
    Ok(total)
}

/// Caterpillar peeling `order[0]`, then `order[1]`, ... . A `tail` takes the
/// slot of the deepest spine leaf; without one the last two points of `order`
/// share the bottom internal node.
pub fn ladder_tree(order: &[usize], tail: Option<HcTree>) -> Result<HcTree, ObjectiveError> {
    let mut seen = std::collections::HashSet::new();
    let tail_leaves = tail.as_ref().map(|t| t.leaves()).unwrap_or_default();
    for &p in order.iter().chain(&tail_leaves) {
        if !seen.insert(p) {
            return Err(ObjectiveError::DuplicateLeaf(p));
        }
    }
    let (base, rest) = match (tail, order.split_last()) {
        (Some(t), _) => (t, order),
        (None, Some((&last, rest))) => (HcTree::leaf(last), rest),
        (None, None) => return Err(ObjectiveError::EmptyInput),
    };
    let mut nodes = base.nodes;
    nodes.reserve(2 * rest.len());
    let mut spine = nodes.len() - 1;
    for &p in rest.iter().rev() {
        nodes.push(Node::Leaf(p));
        nodes.push(Node::Internal(nodes.len() - 1, spine));
        spine = nodes.len() - 1;
    }
    Ok(HcTree { nodes })
}
