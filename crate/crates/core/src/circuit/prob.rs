use std::fmt;

use fixedbitset::FixedBitSet;
use rayon::prelude::*;

use super::{Edge, Literal, NodeId};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Input(Literal),
    Sum {
        children: Vec<NodeId>,
        weights: Vec<f64>,
    },
    /// A product with no children is the constant 1.
    Product { children: Vec<NodeId> },
}

impl Node {
    pub fn children(&self) -> &[NodeId] {
        match self {
            Node::Input(_) => &[],
            Node::Sum { children, .. } | Node::Product { children } => children,
        }
    }

    pub fn is_input(&self) -> bool {
        matches!(self, Node::Input(_))
    }
}

/// A probabilistic circuit with boolean indicator inputs.
///
/// `root == None` is the empty circuit: every assignment has probability 0.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbCircuit {
    nodes: Vec<Node>,
    root: Option<NodeId>,
    /// One past the largest boolean variable referenced by an input node.
    num_vars: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ViolationKind {
    /// Sum children do not share one scope.
    NotSmooth,
    /// Two product children share a variable.
    NotDecomposable,
    WeightArity { children: usize, weights: usize },
    NegativeWeight { position: usize },
    NonFiniteWeight { position: usize },
    /// Inner node without children, i.e. a leaf that is not an input.
    Childless,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub node: NodeId,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ViolationKind::NotSmooth => write!(f, "node {}: sum is not smooth", self.node),
            ViolationKind::NotDecomposable => {
                write!(f, "node {}: product is not decomposable", self.node)
            }
            ViolationKind::WeightArity { children, weights } => write!(
                f,
                "node {}: {} children but {} weights",
                self.node, children, weights
            ),
            ViolationKind::NegativeWeight { position } => {
                write!(f, "node {}: negative weight at edge {}", self.node, position)
            }
            ViolationKind::NonFiniteWeight { position } => {
                write!(f, "node {}: non-finite weight at edge {}", self.node, position)
            }
            ViolationKind::Childless => write!(f, "node {}: inner node has no children", self.node),
        }
    }
}

impl ProbCircuit {
    /// Builds a circuit from an arena in which every child id is smaller than its parent id.
    pub fn new(nodes: Vec<Node>, root: NodeId) -> Result<Self> {
        if root >= nodes.len() {
            return Err(Error::Arena(format!(
                "root {} outside arena of {} nodes",
                root,
                nodes.len()
            )));
        }
        let mut num_vars = 0;
        for (id, node) in nodes.iter().enumerate() {
            if let Node::Input(lit) = node {
                num_vars = num_vars.max(lit.var + 1);
            }
            if let Some(&c) = node.children().iter().find(|&&c| c >= id) {
                return Err(Error::Arena(format!(
                    "node {} references child {} that is not declared before it",
                    id, c
                )));
            }
        }
        Ok(ProbCircuit {
            nodes,
            root: Some(root),
            num_vars,
        })
    }

    /// The circuit with probability 0 everywhere.
    pub fn empty() -> Self {
        ProbCircuit {
            nodes: Vec::new(),
            root: None,
            num_vars: 0,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.root.is_none()
    }

    pub fn root(&self) -> Option<NodeId> {
        self.root
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_edges(&self) -> usize {
        self.nodes.iter().map(|n| n.children().len()).sum()
    }

    /// Minimum assignment length accepted by the evaluators.
    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    /// All sum edges in (node id, child position) order.
    pub fn sum_edges(&self) -> Vec<Edge> {
        let mut edges = Vec::new();
        for (id, node) in self.nodes.iter().enumerate() {
            if let Node::Sum { children, .. } = node {
                edges.extend((0..children.len()).map(|p| (id, p)));
            }
        }
        edges
    }

    /// Parents of every node, each list in ascending order.
    pub fn parents(&self) -> Vec<Vec<NodeId>> {
        let mut parents = vec![Vec::new(); self.nodes.len()];
        for (id, node) in self.nodes.iter().enumerate() {
            for &c in node.children() {
                if parents[c].last() != Some(&id) {
                    parents[c].push(id);
                }
            }
        }
        parents
    }

    fn check_assignment(&self, x: &[bool]) -> Result<()> {
        if x.len() < self.num_vars {
            return Err(Error::Scope {
                var: self.num_vars - 1,
                len: x.len(),
            });
        }
        Ok(())
    }

    /// Structural problems that make the value of a node undefined.
    fn check_evaluable(&self) -> Result<()> {
        let bad: Vec<Violation> = self
            .nodes
            .iter()
            .enumerate()
            .flat_map(|(id, n)| weight_violations(id, n))
            .collect();
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidCircuit(bad))
        }
    }

    /// Log-probability of every node, written into `out`. Zero probability is `-inf`.
    pub fn node_log_values(&self, x: &[bool], out: &mut Vec<f64>) -> Result<()> {
        self.check_assignment(x)?;
        self.check_evaluable()?;
        self.node_log_values_unchecked(x, out);
        Ok(())
    }

    pub(crate) fn node_log_values_unchecked(&self, x: &[bool], out: &mut Vec<f64>) {
        out.clear();
        out.reserve(self.nodes.len());
        for node in &self.nodes {
            let v = match node {
                Node::Input(lit) => {
                    if lit.holds(x) {
                        0.0
                    } else {
                        f64::NEG_INFINITY
                    }
                }
                Node::Product { children } => children.iter().map(|&c| out[c]).sum(),
                Node::Sum { children, weights } => log_sum_exp(
                    children
                        .iter()
                        .zip(weights)
                        .map(|(&c, &w)| if w > 0.0 { w.ln() + out[c] } else { f64::NEG_INFINITY }),
                ),
            };
            out.push(v);
        }
    }

    pub fn log_evaluate(&self, x: &[bool]) -> Result<f64> {
        let Some(root) = self.root else {
            return Ok(f64::NEG_INFINITY);
        };
        let mut vals = Vec::new();
        self.node_log_values(x, &mut vals)?;
        Ok(vals[root])
    }

    /// p(x) in linear space.
    pub fn evaluate(&self, x: &[bool]) -> Result<f64> {
        self.log_evaluate(x).map(f64::exp)
    }

    /// Log-likelihood of each row, computed in parallel.
    pub fn log_likelihoods(&self, rows: &[Vec<bool>]) -> Result<Vec<f64>> {
        let Some(root) = self.root else {
            return Ok(vec![f64::NEG_INFINITY; rows.len()]);
        };
        self.check_evaluable()?;
        for x in rows {
            self.check_assignment(x)?;
        }
        Ok(rows
            .par_iter()
            .map_init(Vec::new, |buf, x| {
                self.node_log_values_unchecked(x, buf);
                buf[root]
            })
            .collect())
    }

    /// Scope of every node as a bitset over boolean variables.
    pub fn scopes(&self) -> Vec<FixedBitSet> {
        let mut scopes: Vec<FixedBitSet> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let mut s = FixedBitSet::with_capacity(self.num_vars);
            match node {
                Node::Input(lit) => s.insert(lit.var),
                _ => {
                    for &c in node.children() {
                        s.union_with(&scopes[c]);
                    }
                }
            }
            scopes.push(s);
        }
        scopes
    }

    /// The set of boolean variables `node` depends on, ascending.
    pub fn scope(&self, node: NodeId) -> Vec<usize> {
        // Only the sub-DAG below `node` matters, and it lies entirely in ids <= node.
        let mut scopes: Vec<FixedBitSet> = Vec::with_capacity(node + 1);
        for n in &self.nodes[..=node] {
            let mut s = FixedBitSet::with_capacity(self.num_vars);
            match n {
                Node::Input(lit) => s.insert(lit.var),
                _ => {
                    for &c in n.children() {
                        s.union_with(&scopes[c]);
                    }
                }
            }
            scopes.push(s);
        }
        scopes[node].ones().collect()
    }

    /// Every smoothness, decomposability, weight or arity violation. Acyclicity holds by construction.
    pub fn validate(&self) -> Vec<Violation> {
        let scopes = self.scopes();
        let mut out = Vec::new();
        for (id, node) in self.nodes.iter().enumerate() {
            match node {
                Node::Input(_) => {}
                Node::Sum { children, .. } => {
                    if children.is_empty() {
                        out.push(Violation {
                            node: id,
                            kind: ViolationKind::Childless,
                        });
                    }
                    out.extend(weight_violations(id, node));
                    if let Some((&first, rest)) = children.split_first() {
                        if rest.iter().any(|&c| scopes[c] != scopes[first]) {
                            out.push(Violation {
                                node: id,
                                kind: ViolationKind::NotSmooth,
                            });
                        }
                    }
                }
                Node::Product { children } => {
                    if children.is_empty() {
                        out.push(Violation {
                            node: id,
                            kind: ViolationKind::Childless,
                        });
                    }
                    let mut seen = FixedBitSet::with_capacity(self.num_vars);
                    let mut overlap = false;
                    for &c in children {
                        if !seen.is_disjoint(&scopes[c]) {
                            overlap = true;
                        }
                        seen.union_with(&scopes[c]);
                    }
                    if overlap {
                        out.push(Violation {
                            node: id,
                            kind: ViolationKind::NotDecomposable,
                        });
                    }
                }
            }
        }
        out
    }

    /// The same arena with the given edges removed and nothing else changed.
    /// Removing a product edge drops that factor.
    pub fn without_edges(&self, edges: &[Edge]) -> ProbCircuit {
        let mut nodes = self.nodes.clone();
        let mut by_node: Vec<Edge> = edges.to_vec();
        by_node.sort_unstable();
        by_node.dedup();
        // Remove from the back so child positions stay meaningful.
        for &(id, pos) in by_node.iter().rev() {
            match &mut nodes[id] {
                Node::Sum { children, weights } => {
                    if pos < children.len() {
                        children.remove(pos);
                        if pos < weights.len() {
                            weights.remove(pos);
                        }
                    }
                }
                Node::Product { children } => {
                    if pos < children.len() {
                        children.remove(pos);
                    }
                }
                Node::Input(_) => {}
            }
        }
        ProbCircuit {
            nodes,
            root: self.root,
            num_vars: self.num_vars,
        }
    }

    /// Structural cleanup: drops zero-weight sum edges and childless sums, deletes products
    /// with a deleted child (propagating upwards) and garbage-collects unreachable nodes.
    /// Relative node order is preserved. Never changes p(x).
    pub fn simplify(&self) -> ProbCircuit {
        let Some(root) = self.root else {
            return ProbCircuit::empty();
        };
        let n = self.nodes.len();
        let mut alive = vec![false; n];
        let mut kept: Vec<Node> = Vec::with_capacity(n);
        for (id, node) in self.nodes.iter().enumerate() {
            let node = match node {
                Node::Input(lit) => Node::Input(*lit),
                Node::Sum { children, weights } => {
                    let (c, w): (Vec<_>, Vec<_>) = children
                        .iter()
                        .zip(weights)
                        .filter(|(&c, &w)| alive[c] && w > 0.0)
                        .map(|(&c, &w)| (c, w))
                        .unzip();
                    Node::Sum {
                        children: c,
                        weights: w,
                    }
                }
                Node::Product { children } => Node::Product {
                    children: children.clone(),
                },
            };
            alive[id] = match &node {
                Node::Input(_) => true,
                Node::Sum { children, .. } => !children.is_empty(),
                Node::Product { children } => children.iter().all(|&c| alive[c]),
            };
            kept.push(node);
        }
        if !alive[root] {
            return ProbCircuit::empty();
        }

        let mut reachable = vec![false; n];
        reachable[root] = true;
        for id in (0..=root).rev() {
            if reachable[id] {
                for &c in kept[id].children() {
                    reachable[c] = true;
                }
            }
        }
        let mut remap = vec![usize::MAX; n];
        let mut nodes = Vec::new();
        for (id, node) in kept.into_iter().enumerate() {
            if !reachable[id] {
                continue;
            }
            remap[id] = nodes.len();
            nodes.push(match node {
                Node::Input(lit) => Node::Input(lit),
                Node::Sum { children, weights } => Node::Sum {
                    children: children.iter().map(|&c| remap[c]).collect(),
                    weights,
                },
                Node::Product { children } => Node::Product {
                    children: children.iter().map(|&c| remap[c]).collect(),
                },
            });
        }
        let num_vars = nodes
            .iter()
            .filter_map(|n| match n {
                Node::Input(l) => Some(l.var + 1),
                _ => None,
            })
            .max()
            .unwrap_or(0);
        ProbCircuit {
            root: Some(remap[root]),
            nodes,
            num_vars,
        }
    }
}

fn weight_violations(id: NodeId, node: &Node) -> Vec<Violation> {
    let mut out = Vec::new();
    if let Node::Sum { children, weights } = node {
        if children.len() != weights.len() {
            out.push(Violation {
                node: id,
                kind: ViolationKind::WeightArity {
                    children: children.len(),
                    weights: weights.len(),
                },
            });
        }
        for (position, &w) in weights.iter().enumerate() {
            if !w.is_finite() {
                out.push(Violation {
                    node: id,
                    kind: ViolationKind::NonFiniteWeight { position },
                });
            } else if w < 0.0 {
                out.push(Violation {
                    node: id,
                    kind: ViolationKind::NegativeWeight { position },
                });
            }
        }
    }
    out
}

pub(crate) fn log_sum_exp(terms: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = terms.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + terms.map(|t| (t - max).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lit(v: usize, pos: bool) -> Node {
        Node::Input(Literal { var: v, positive: pos })
    }

    #[test]
    fn single_input() {
        let pc = ProbCircuit::new(vec![lit(0, true)], 0).unwrap();
        assert_eq!(pc.evaluate(&[true]).unwrap(), 1.0);
        assert_eq!(pc.evaluate(&[false]).unwrap(), 0.0);
    }

    #[test]
    fn weighted_sum_of_literals() {
        let pc = ProbCircuit::new(
            vec![
                lit(0, true),
                lit(0, false),
                Node::Sum {
                    children: vec![0, 1],
                    weights: vec![0.3, 0.7],
                },
            ],
            2,
        )
        .unwrap();
        assert!((pc.evaluate(&[true]).unwrap() - 0.3).abs() < 1e-15);
        assert!((pc.evaluate(&[false]).unwrap() - 0.7).abs() < 1e-15);
    }

    #[test]
    fn short_assignment_is_a_scope_error() {
        let pc = ProbCircuit::new(vec![lit(3, true)], 0).unwrap();
        assert!(matches!(pc.evaluate(&[true, true]), Err(Error::Scope { .. })));
    }

    #[test]
    fn arity_mismatch_refuses_evaluation() {
        let pc = ProbCircuit::new(
            vec![
                lit(0, true),
                Node::Sum {
                    children: vec![0],
                    weights: vec![0.5, 0.5],
                },
            ],
            1,
        )
        .unwrap();
        assert!(matches!(pc.evaluate(&[true]), Err(Error::InvalidCircuit(_))));
    }

    #[test]
    fn forward_references_are_rejected() {
        let r = ProbCircuit::new(vec![Node::Product { children: vec![1] }, lit(0, true)], 0);
        assert!(matches!(r, Err(Error::Arena(_))));
    }

    #[test]
    fn smoothness_violation() {
        let pc = ProbCircuit::new(
            vec![
                lit(0, true),
                lit(1, true),
                Node::Sum {
                    children: vec![0, 1],
                    weights: vec![0.5, 0.5],
                },
            ],
            2,
        )
        .unwrap();
        assert_eq!(
            pc.validate(),
            vec![Violation {
                node: 2,
                kind: ViolationKind::NotSmooth
            }]
        );
    }

    #[test]
    fn decomposability_violation() {
        let pc = ProbCircuit::new(
            vec![lit(0, true), lit(0, false), Node::Product { children: vec![0, 1] }],
            2,
        )
        .unwrap();
        assert_eq!(
            pc.validate(),
            vec![Violation {
                node: 2,
                kind: ViolationKind::NotDecomposable
            }]
        );
    }

    #[test]
    fn scopes() {
        let pc = ProbCircuit::new(
            vec![lit(0, true), lit(1, true), Node::Product { children: vec![0, 1] }],
            2,
        )
        .unwrap();
        assert_eq!(pc.scope(0), vec![0]);
        assert_eq!(pc.scope(2), vec![0, 1]);
    }

    #[test]
    fn simplify_drops_childless_sum_and_its_parent_product() {
        // root = Sum(P1, P2); P1 = Product(A, S), S = Sum() ; P2 = Product(-A, B)
        let pc = ProbCircuit::new(
            vec![
                lit(0, true),
                lit(0, false),
                lit(1, true),
                Node::Sum {
                    children: vec![],
                    weights: vec![],
                },
                Node::Product { children: vec![0, 3] },
                Node::Product { children: vec![1, 2] },
                Node::Sum {
                    children: vec![4, 5],
                    weights: vec![0.5, 0.5],
                },
            ],
            6,
        )
        .unwrap();
        let s = pc.simplify();
        assert_eq!(s.len(), 4);
        assert!(s.validate().is_empty());
        assert_eq!(s.simplify(), s);
    }

    #[test]
    fn simplify_all_dead_is_empty() {
        let pc = ProbCircuit::new(
            vec![
                lit(0, true),
                Node::Sum {
                    children: vec![0],
                    weights: vec![0.0],
                },
            ],
            1,
        )
        .unwrap();
        let s = pc.simplify();
        assert!(s.is_empty());
        assert_eq!(s.evaluate(&[true]).unwrap(), 0.0);
    }

    #[test]
    fn childless_product_is_one() {
        let pc = ProbCircuit::new(vec![Node::Product { children: vec![] }], 0).unwrap();
        assert_eq!(pc.evaluate(&[]).unwrap(), 1.0);
        assert_eq!(pc.simplify().len(), 1);
    }
}
