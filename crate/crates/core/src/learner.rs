//! Mixture of fully factorised categoricals trained by EM, compiled to a smooth and
//! decomposable circuit over the one-hot variables.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::circuit::{log_sum_exp, read_pc, Literal, Node, NodeId, ProbCircuit};
use crate::data::{Example, Schema};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MixtureConfig {
    pub k: usize,
    pub iterations: usize,
    /// Laplace pseudo-count added to every value and every component.
    pub smoothing: f64,
    pub seed: u64,
}

impl Default for MixtureConfig {
    fn default() -> Self {
        MixtureConfig {
            k: 8,
            iterations: 50,
            smoothing: 1.0,
            seed: 0,
        }
    }
}

impl MixtureConfig {
    fn check(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Param("k must be at least 1".into()));
        }
        if self.iterations == 0 {
            return Err(Error::Param("EM needs at least one iteration".into()));
        }
        if !(self.smoothing > 0.0 && self.smoothing.is_finite()) {
            return Err(Error::Param(format!("smoothing must be positive, got {}", self.smoothing)));
        }
        Ok(())
    }
}

/// Trained mixture parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Mixture {
    /// Component priors.
    pub weights: Vec<f64>,
    /// `probs[c][var][value]`.
    pub probs: Vec<Vec<Vec<f64>>>,
    /// Penalised log-likelihood after initialisation and after every EM iteration.
    pub objective: Vec<f64>,
}

impl Mixture {
    pub fn log_likelihood(&self, example: &Example) -> f64 {
        log_sum_exp(
            self.weights
                .iter()
                .zip(&self.probs)
                .map(|(w, p)| w.ln() + component_log(p, example)),
        )
    }

    /// Root sum over one product per component; each product holds one sum per variable
    /// whose children are value products `x_j ∧ ¬x_l ∧ ...` with private input nodes.
    pub fn to_circuit(&self, schema: &Schema) -> ProbCircuit {
        let mut nodes: Vec<Node> = Vec::new();
        let push = |nodes: &mut Vec<Node>, n: Node| -> NodeId {
            nodes.push(n);
            nodes.len() - 1
        };
        let mut components = Vec::with_capacity(self.weights.len());
        for comp in &self.probs {
            let mut sums = Vec::with_capacity(schema.len());
            for (v, probs) in comp.iter().enumerate() {
                let card = schema.cardinality(v);
                let mut values = Vec::with_capacity(card);
                for j in 0..card {
                    let mut lits = Vec::with_capacity(card);
                    for l in 0..card {
                        let id = schema.bool_id(v, l);
                        let lit = if l == j { Literal::pos(id) } else { Literal::neg(id) };
                        lits.push(push(&mut nodes, Node::Input(lit)));
                    }
                    values.push(push(&mut nodes, Node::Product { children: lits }));
                }
                sums.push(push(
                    &mut nodes,
                    Node::Sum {
                        children: values,
                        weights: probs.clone(),
                    },
                ));
            }
            components.push(push(&mut nodes, Node::Product { children: sums }));
        }
        let root = push(
            &mut nodes,
            Node::Sum {
                children: components,
                weights: self.weights.clone(),
            },
        );
        ProbCircuit::new(nodes, root).expect("children are pushed before parents")
    }
}

fn component_log(probs: &[Vec<f64>], example: &Example) -> f64 {
    probs.iter().enumerate().map(|(v, p)| p[example.value(v)].ln()).sum()
}

/// Fits the mixture to `positives` by EM with Laplace smoothing (MAP estimation under a
/// symmetric Dirichlet prior), and compiles it to a circuit.
pub fn learn_mixture(positives: &[Example], schema: &Schema, cfg: &MixtureConfig) -> Result<ProbCircuit> {
    Ok(fit_mixture(positives, schema, cfg)?.to_circuit(schema))
}

pub fn fit_mixture(positives: &[Example], schema: &Schema, cfg: &MixtureConfig) -> Result<Mixture> {
    cfg.check()?;
    if positives.is_empty() {
        return Err(Error::Data("no positive examples to learn from".into()));
    }
    if let Some(bad) = positives.iter().find(|e| e.0.len() != schema.len()) {
        return Err(Error::SchemaMismatch(format!(
            "example has {} values, schema has {} variables",
            bad.0.len(),
            schema.len()
        )));
    }
    let mut distinct: Vec<&Example> = positives.iter().collect();
    distinct.sort();
    distinct.dedup();
    let k = if cfg.k > distinct.len() {
        log::warn!(
            "k = {} exceeds the {} distinct positives; using k = {}",
            cfg.k,
            distinct.len(),
            distinct.len()
        );
        distinct.len()
    } else {
        cfg.k
    };
    let alpha = cfg.smoothing;
    let n = positives.len();

    // k-modes style start: random distinct centres, hard assignment to the nearest one.
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let centres: Vec<&Example> = distinct.choose_multiple(&mut rng, k).copied().collect();
    let mut resp: Vec<Vec<f64>> = positives
        .iter()
        .map(|e| {
            let best = (0..k)
                .min_by_key(|&c| e.0.iter().zip(&centres[c].0).filter(|(a, b)| a != b).count())
                .unwrap();
            let mut r = vec![0.0; k];
            r[best] = 1.0;
            r
        })
        .collect();

    let mut model = m_step(positives, schema, &resp, alpha);
    model.objective.push(objective(&model, positives, alpha));
    for _ in 0..cfg.iterations {
        resp = positives
            .par_iter()
            .map(|e| {
                let logs: Vec<f64> = model
                    .weights
                    .iter()
                    .zip(&model.probs)
                    .map(|(w, p)| w.ln() + component_log(p, e))
                    .collect();
                let total = log_sum_exp(logs.iter().copied());
                logs.iter().map(|l| (l - total).exp()).collect()
            })
            .collect();
        let trace = std::mem::take(&mut model.objective);
        model = m_step(positives, schema, &resp, alpha);
        model.objective = trace;
        let obj = objective(&model, positives, alpha);
        let prev = *model.objective.last().unwrap();
        debug_assert!(
            obj >= prev - 1e-9 * prev.abs().max(1.0),
            "EM objective decreased from {} to {}",
            prev,
            obj
        );
        model.objective.push(obj);
    }
    log::debug!("EM on {} examples, k = {}: objective {:?}", n, k, model.objective.last());
    Ok(model)
}

fn m_step(positives: &[Example], schema: &Schema, resp: &[Vec<f64>], alpha: f64) -> Mixture {
    let k = resp[0].len();
    let n = positives.len() as f64;
    let mut mass = vec![0.0; k];
    let mut counts: Vec<Vec<Vec<f64>>> = (0..k)
        .map(|_| (0..schema.len()).map(|v| vec![0.0; schema.cardinality(v)]).collect())
        .collect();
    for (e, r) in positives.iter().zip(resp) {
        for c in 0..k {
            mass[c] += r[c];
            for (v, &val) in e.0.iter().enumerate() {
                counts[c][v][val] += r[c];
            }
        }
    }
    let weights = mass
        .iter()
        .map(|m| (m + alpha) / (n + k as f64 * alpha))
        .collect();
    let probs = counts
        .into_iter()
        .zip(&mass)
        .map(|(comp, m)| {
            comp.into_iter()
                .map(|vals| {
                    let den = m + alpha * vals.len() as f64;
                    vals.iter().map(|c| (c + alpha) / den).collect()
                })
                .collect()
        })
        .collect();
    Mixture {
        weights,
        probs,
        objective: Vec::new(),
    }
}

/// Log-likelihood plus the log of the Dirichlet prior matching the smoothing.
fn objective(model: &Mixture, positives: &[Example], alpha: f64) -> f64 {
    let ll: f64 = positives.iter().map(|e| model.log_likelihood(e)).sum();
    let prior_w: f64 = model.weights.iter().map(|w| w.ln()).sum();
    let prior_p: f64 = model
        .probs
        .iter()
        .flat_map(|c| c.iter().flat_map(|v| v.iter()))
        .map(|p| p.ln())
        .sum();
    ll + alpha * (prior_w + prior_p)
}

/// Reads a circuit file and rejects circuits that fail validation.
pub fn import_circuit(path: &Path) -> Result<ProbCircuit> {
    let pc = read_pc(path)?;
    let violations = pc.validate();
    if !violations.is_empty() {
        return Err(Error::InvalidCircuit(violations));
    }
    Ok(pc)
}
