use std::collections::HashMap;

use rayon::prelude::*;

use crate::circuit::{BitColumns, Node, ProbCircuit};
use crate::data::{Database, ExampleSet};
use crate::error::{Error, Result};
use crate::metrics::f1;
use crate::pruning::{flow_scores, prune_threshold, top_down_scores, EdgeRanking, Method, PruneParams};

const GRID: usize = 21;
const RESOLUTION: f64 = 1e-3;
const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Best pruned circuit found for one method.
#[derive(Clone, Debug)]
pub struct Step1 {
    pub circuit: ProbCircuit,
    pub params: PruneParams,
    pub f1: f64,
    /// Distinct parameter values evaluated.
    pub evaluations: usize,
}

#[derive(Clone, Debug)]
struct Candidate {
    x: f64,
    f1: f64,
    circuit: ProbCircuit,
}

impl Candidate {
    /// Higher f1 first, then smaller circuits, then smaller parameters.
    fn better_than(&self, other: &Candidate) -> bool {
        if self.f1 != other.f1 {
            return self.f1 > other.f1;
        }
        if self.circuit.len() != other.circuit.len() {
            return self.circuit.len() < other.circuit.len();
        }
        self.x < other.x
    }
}

/// Searches the method's parameter for the pruned circuit whose positive-probability
/// examples best match `target` in f1: a 21-point grid over the parameter range, then
/// golden-section refinement around the best grid point down to a 1e-3 bracket.
pub fn step1_search(pc: &ProbCircuit, db: &Database, target: &ExampleSet, method: Method) -> Result<Step1> {
    step1_search_cols(pc, &db.columns(), &db.rows(), target, method)
}

pub(crate) fn step1_search_cols(
    pc: &ProbCircuit,
    cols: &BitColumns,
    rows: &[Vec<bool>],
    target: &ExampleSet,
    method: Method,
) -> Result<Step1> {
    if target.universe() != cols.rows() {
        return Err(Error::Subset {
            expected: cols.rows(),
            got: target.universe(),
        });
    }
    if target.is_empty() {
        return Err(Error::EmptyTarget);
    }
    let ranking = match method {
        Method::Threshold => None,
        Method::TopDown => Some(EdgeRanking::new(top_down_scores(pc))),
        Method::Flows => {
            let flow_rows: Vec<Vec<bool>> = target.iter().map(|i| rows[i].clone()).collect();
            Some(EdgeRanking::new(flow_scores(pc, &flow_rows)?))
        }
    };
    let hi = match method {
        Method::Threshold => max_weight(pc),
        _ => 1.0,
    };
    let eval = |x: f64| -> Result<Candidate> {
        let circuit = match &ranking {
            None => prune_threshold(pc, x),
            Some(r) => r.prune(pc, x),
        };
        let covered = ExampleSet::from_bits(circuit.support(cols)?);
        Ok(Candidate {
            x,
            f1: f1(&covered, target),
            circuit,
        })
    };

    let grid: Vec<f64> = (0..GRID).map(|i| hi * i as f64 / (GRID - 1) as f64).collect();
    let evaluated: Vec<Candidate> = grid.par_iter().map(|&x| eval(x)).collect::<Result<_>>()?;
    let mut best_i = 0;
    for (i, c) in evaluated.iter().enumerate() {
        if c.better_than(&evaluated[best_i]) {
            best_i = i;
        }
    }
    let mut seen: HashMap<u64, Candidate> = evaluated.into_iter().map(|c| (c.x.to_bits(), c)).collect();
    let lookup = |x: f64, seen: &mut HashMap<u64, Candidate>| -> Result<Candidate> {
        if let Some(c) = seen.get(&x.to_bits()) {
            return Ok(c.clone());
        }
        let c = eval(x)?;
        seen.insert(x.to_bits(), c.clone());
        Ok(c)
    };

    let mut a = grid[best_i.saturating_sub(1)];
    let mut b = grid[(best_i + 1).min(GRID - 1)];
    if hi > 0.0 {
        let mut c = b - INV_PHI * (b - a);
        let mut d = a + INV_PHI * (b - a);
        let mut fc = lookup(c, &mut seen)?;
        let mut fd = lookup(d, &mut seen)?;
        while b - a > RESOLUTION {
            if fd.better_than(&fc) {
                a = c;
                c = d;
                fc = fd;
                d = a + INV_PHI * (b - a);
                fd = lookup(d, &mut seen)?;
            } else {
                b = d;
                d = c;
                fd = fc;
                c = b - INV_PHI * (b - a);
                fc = lookup(c, &mut seen)?;
            }
        }
    }

    let evaluations = seen.len();
    let mut all: Vec<Candidate> = seen.into_values().collect();
    all.sort_by(|p, q| p.x.total_cmp(&q.x));
    let mut best = all.swap_remove(0);
    for c in all {
        if c.better_than(&best) {
            best = c;
        }
    }
    log::info!(
        "step 1 ({}): parameter {} gives f1 {:.5} with {} nodes after {} evaluations",
        method.name(),
        best.x,
        best.f1,
        best.circuit.len(),
        evaluations
    );
    Ok(Step1 {
        params: PruneParams::new(method, best.x)?,
        circuit: best.circuit,
        f1: best.f1,
        evaluations,
    })
}

fn max_weight(pc: &ProbCircuit) -> f64 {
    pc.nodes()
        .iter()
        .filter_map(|n| match n {
            Node::Sum { weights, .. } => weights.iter().copied().reduce(f64::max),
            _ => None,
        })
        .fold(0.0, f64::max)
}
