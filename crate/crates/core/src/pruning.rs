//! Sum-edge pruning strategies: weight threshold, top-down probability and circuit flows.
//!
//! The rank-based strategies score every sum edge, sort ascending with ties broken by
//! (node id, child position), and remove the lowest `floor(fraction * edges)` edges.
//! Every strategy finishes with [`ProbCircuit::simplify`].

use std::fmt;

use rayon::prelude::*;

use crate::circuit::{Edge, Node, ProbCircuit};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    Threshold,
    TopDown,
    Flows,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Threshold, Method::TopDown, Method::Flows];

    pub fn name(self) -> &'static str {
        match self {
            Method::Threshold => "threshold",
            Method::TopDown => "topdown",
            Method::Flows => "flows",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "threshold" => Ok(Method::Threshold),
            "topdown" => Ok(Method::TopDown),
            "flows" => Ok(Method::Flows),
            _ => Err(Error::Param(format!("unknown pruning method `{}`", s))),
        }
    }
}

/// A pruning method together with its scalar parameter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PruneParams {
    Threshold { alpha: f64 },
    TopDown { fraction: f64 },
    Flows { fraction: f64 },
}

impl PruneParams {
    pub fn new(method: Method, value: f64) -> Result<Self> {
        let p = match method {
            Method::Threshold => PruneParams::Threshold { alpha: value },
            Method::TopDown => PruneParams::TopDown { fraction: value },
            Method::Flows => PruneParams::Flows { fraction: value },
        };
        p.check()?;
        Ok(p)
    }

    pub fn method(&self) -> Method {
        match self {
            PruneParams::Threshold { .. } => Method::Threshold,
            PruneParams::TopDown { .. } => Method::TopDown,
            PruneParams::Flows { .. } => Method::Flows,
        }
    }

    pub fn value(&self) -> f64 {
        match *self {
            PruneParams::Threshold { alpha } => alpha,
            PruneParams::TopDown { fraction } | PruneParams::Flows { fraction } => fraction,
        }
    }

    fn check(&self) -> Result<()> {
        match *self {
            PruneParams::Threshold { alpha } if !(alpha >= 0.0) => {
                Err(Error::Param(format!("alpha must be >= 0, got {}", alpha)))
            }
            PruneParams::TopDown { fraction } | PruneParams::Flows { fraction }
                if !(0.0..=1.0).contains(&fraction) =>
            {
                Err(Error::Param(format!("fraction must be in [0, 1], got {}", fraction)))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for PruneParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PruneParams::Threshold { alpha } => write!(f, "threshold alpha={}", alpha),
            PruneParams::TopDown { fraction } => write!(f, "topdown fraction={}", fraction),
            PruneParams::Flows { fraction } => write!(f, "flows fraction={}", fraction),
        }
    }
}

/// Applies `params`; `flow_rows` (one-hot rows) is required by the flows method only.
pub fn prune(pc: &ProbCircuit, params: &PruneParams, flow_rows: Option<&[Vec<bool>]>) -> Result<ProbCircuit> {
    params.check()?;
    match *params {
        PruneParams::Threshold { alpha } => Ok(prune_threshold(pc, alpha)),
        PruneParams::TopDown { fraction } => Ok(prune_top_down(pc, fraction)),
        PruneParams::Flows { fraction } => {
            let rows = flow_rows
                .ok_or_else(|| Error::Param("flows pruning needs a set of examples".into()))?;
            prune_flows(pc, rows, fraction)
        }
    }
}

/// Removes every sum edge with weight below `alpha`.
pub fn prune_threshold(pc: &ProbCircuit, alpha: f64) -> ProbCircuit {
    pc.without_edges(&threshold_edges(pc, alpha)).simplify()
}

pub(crate) fn threshold_edges(pc: &ProbCircuit, alpha: f64) -> Vec<Edge> {
    let mut edges = Vec::new();
    for (id, node) in pc.nodes().iter().enumerate() {
        if let Node::Sum { weights, .. } = node {
            edges.extend(
                weights
                    .iter()
                    .enumerate()
                    .filter(|(_, &w)| w < alpha)
                    .map(|(p, _)| (id, p)),
            );
        }
    }
    edges
}

pub fn prune_top_down(pc: &ProbCircuit, fraction: f64) -> ProbCircuit {
    EdgeRanking::new(top_down_scores(pc)).prune(pc, fraction)
}

pub fn prune_flows(pc: &ProbCircuit, rows: &[Vec<bool>], fraction: f64) -> Result<ProbCircuit> {
    Ok(EdgeRanking::new(flow_scores(pc, rows)?).prune(pc, fraction))
}

/// Sum edges sorted from least to most significant.
#[derive(Clone, Debug)]
pub struct EdgeRanking {
    order: Vec<(Edge, f64)>,
}

impl EdgeRanking {
    pub fn new(mut scored: Vec<(Edge, f64)>) -> Self {
        scored.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        EdgeRanking { order: scored }
    }

    pub fn edges(&self) -> &[(Edge, f64)] {
        &self.order
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Number of edges a given fraction removes.
    pub fn count(&self, fraction: f64) -> usize {
        let k = (fraction * self.order.len() as f64 + 1e-9).floor() as usize;
        k.min(self.order.len())
    }

    pub fn prune(&self, pc: &ProbCircuit, fraction: f64) -> ProbCircuit {
        self.prune_count(pc, self.count(fraction))
    }

    pub fn prune_count(&self, pc: &ProbCircuit, k: usize) -> ProbCircuit {
        let edges: Vec<Edge> = self.order[..k].iter().map(|(e, _)| *e).collect();
        pc.without_edges(&edges).simplify()
    }
}

/// Path mass each sum edge receives when unit mass flows down from the root, with sum
/// weights normalised per node for scoring.
pub fn top_down_scores(pc: &ProbCircuit) -> Vec<(Edge, f64)> {
    let Some(root) = pc.root() else {
        return Vec::new();
    };
    let mut mass = vec![0.0; pc.len()];
    mass[root] = 1.0;
    let mut scores = Vec::new();
    for id in (0..=root).rev() {
        let m = mass[id];
        match pc.node(id) {
            Node::Input(_) => {}
            Node::Product { children } => {
                for &c in children {
                    mass[c] += m;
                }
            }
            Node::Sum { children, weights } => {
                let total: f64 = weights.iter().sum();
                for (p, (&c, &w)) in children.iter().zip(weights).enumerate() {
                    let s = if total > 0.0 { m * w / total } else { 0.0 };
                    mass[c] += s;
                    scores.push(((id, p), s));
                }
            }
        }
    }
    scores
}

const FLOW_CHUNK: usize = 64;

/// Circuit flow of each sum edge summed over `rows`.
///
/// Per example, the root carries flow 1; a sum node with flow F sends
/// F * w_c * p_c(x) / p_n(x) along each child edge (nothing when p_n(x) = 0) and a
/// product node passes F to every child.
pub fn flow_scores(pc: &ProbCircuit, rows: &[Vec<bool>]) -> Result<Vec<(Edge, f64)>> {
    let edges = pc.sum_edges();
    let Some(root) = pc.root() else {
        return Ok(Vec::new());
    };
    // Validate once; the per-example passes then run unchecked.
    if let Some(x) = rows.first() {
        let mut buf = Vec::new();
        pc.node_log_values(x, &mut buf)?;
    }
    if let Some(short) = rows.iter().find(|x| x.len() < pc.num_vars()) {
        return Err(Error::Scope {
            var: pc.num_vars() - 1,
            len: short.len(),
        });
    }
    let mut offset = vec![0usize; pc.len()];
    let mut acc = 0;
    for (id, node) in pc.nodes().iter().enumerate() {
        offset[id] = acc;
        if let Node::Sum { children, .. } = node {
            acc += children.len();
        }
    }

    // Fixed-size chunks summed in order keep the result independent of scheduling.
    let partials: Vec<Vec<f64>> = rows
        .par_chunks(FLOW_CHUNK)
        .map(|chunk| {
            let mut total = vec![0.0; edges.len()];
            let mut logs = Vec::new();
            let mut flow = vec![0.0; pc.len()];
            for x in chunk {
                pc.node_log_values_unchecked(x, &mut logs);
                if logs[root] == f64::NEG_INFINITY {
                    continue;
                }
                flow.iter_mut().for_each(|f| *f = 0.0);
                flow[root] = 1.0;
                for id in (0..=root).rev() {
                    let f = flow[id];
                    if f == 0.0 {
                        continue;
                    }
                    match pc.node(id) {
                        Node::Input(_) => {}
                        Node::Product { children } => {
                            for &c in children {
                                flow[c] += f;
                            }
                        }
                        Node::Sum { children, weights } => {
                            let lp = logs[id];
                            if lp == f64::NEG_INFINITY {
                                continue;
                            }
                            for (p, (&c, &w)) in children.iter().zip(weights).enumerate() {
                                if w <= 0.0 || logs[c] == f64::NEG_INFINITY {
                                    continue;
                                }
                                let ef = f * (w.ln() + logs[c] - lp).exp();
                                total[offset[id] + p] += ef;
                                flow[c] += ef;
                            }
                        }
                    }
                }
            }
            total
        })
        .collect();
    let mut total = vec![0.0; edges.len()];
    for part in partials {
        for (t, p) in total.iter_mut().zip(part) {
            *t += p;
        }
    }
    Ok(edges.into_iter().zip(total).collect())
}
