use fixedbitset::FixedBitSet;

use crate::circuit::{support_values, BitColumns, ProbCircuit};
use crate::comprehensibility::{extract_cnf, incomprehensibility};
use crate::data::{Database, ExampleSet, Schema};
use crate::error::{Error, Result};

/// Removes input-node edges while the f1 of the covered set against `target` stays at
/// or above its starting value (strictly above with `strict`).
///
/// Inputs are visited in ascending node id and, for each, its parents in ascending id.
/// The bound is fixed before the first sweep; sweeps repeat until a sweep changes
/// neither the node count nor the edge count.
pub fn prune_input_nodes(pc: &ProbCircuit, db: &Database, target: &ExampleSet, strict: bool) -> Result<ProbCircuit> {
    prune_input_nodes_cols(pc, &db.columns(), target, strict, None)
}

/// Like [`prune_input_nodes`], but a removal is also rejected when the incomprehensibility
/// of the resulting theory would exceed that of the starting circuit. Like the f1 bound,
/// this bound is computed once. Theories that do not fit in `clause_budget` clauses count
/// as infinitely incomprehensible.
pub fn prune_input_nodes_guarded(
    pc: &ProbCircuit,
    db: &Database,
    target: &ExampleSet,
    strict: bool,
    clause_budget: usize,
) -> Result<ProbCircuit> {
    prune_input_nodes_cols(pc, &db.columns(), target, strict, Some((db.schema(), clause_budget)))
}

/// Incomprehensibility of the theory of `pc`, or infinity past the clause budget.
pub(crate) fn theory_incomprehensibility(pc: &ProbCircuit, schema: &Schema, budget: usize) -> Result<f64> {
    match pc.to_logic().and_then(|lc| extract_cnf(&lc, schema, budget)) {
        Ok(cnf) => Ok(incomprehensibility(&cnf)),
        Err(Error::ClauseBudget { .. }) => Ok(f64::INFINITY),
        Err(e) => Err(e),
    }
}

pub(crate) fn prune_input_nodes_cols(
    pc: &ProbCircuit,
    cols: &BitColumns,
    target: &ExampleSet,
    strict: bool,
    guard: Option<(&Schema, usize)>,
) -> Result<ProbCircuit> {
    if target.universe() != cols.rows() {
        return Err(Error::Subset {
            expected: cols.rows(),
            got: target.universe(),
        });
    }
    let Some(_) = pc.root() else {
        return Ok(pc.clone());
    };
    let target_bits = target.bits();
    let score = |covered: &FixedBitSet| -> f64 {
        let tp = covered.intersection_count(target_bits);
        let den = covered.count_ones(..) + target.len();
        if den == 0 {
            1.0
        } else {
            2.0 * tp as f64 / den as f64
        }
    };
    let lb = score(&pc.support(cols)?);
    let keep = |f: f64| if strict { f > lb } else { f >= lb };
    let ib = match guard {
        Some((schema, budget)) => theory_incomprehensibility(pc, schema, budget)?,
        None => f64::INFINITY,
    };
    let readable = |c: &ProbCircuit| -> Result<bool> {
        match guard {
            Some((schema, budget)) => Ok(theory_incomprehensibility(c, schema, budget)? <= ib),
            None => Ok(true),
        }
    };

    let mut work = pc.simplify();
    let mut sweeps = 0;
    while let Some(root) = work.root() {
        let size = (work.len(), work.num_edges());
        let parents = work.parents();
        let mut vals: Vec<FixedBitSet> = Vec::with_capacity(work.len());
        support_values(&work, cols, None, &mut vals, 0);
        let input_ids: Vec<usize> = (0..work.len()).filter(|&n| work.node(n).is_input()).collect();
        for n in input_ids {
            for &z in &parents[n] {
                // A parent may hold the same input more than once.
                while let Some(pos) = work.node(z).children().iter().position(|&c| c == n) {
                    let saved = vals.split_off(z);
                    support_values(&work, cols, Some((z, pos)), &mut vals, z);
                    let trial = match keep(score(&vals[root])) {
                        true => Some(work.without_edges(&[(z, pos)])),
                        false => None,
                    };
                    let trial = match trial {
                        Some(t) if readable(&t)? => Some(t),
                        _ => None,
                    };
                    if let Some(trial) = trial {
                        work = trial;
                    } else {
                        vals.truncate(z);
                        vals.extend(saved);
                        break;
                    }
                }
            }
        }
        work = work.simplify();
        sweeps += 1;
        if (work.len(), work.num_edges()) == size {
            break;
        }
    }
    log::info!(
        "step 2: {} -> {} nodes in {} sweeps (bound {:.5})",
        pc.len(),
        work.len(),
        sweeps,
        lb
    );
    Ok(work)
}
