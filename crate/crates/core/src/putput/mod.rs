//! The two-step extraction pipeline: pick a likelihood threshold, prune sum edges to
//! match the high-likelihood target (step 1), then prune input-node edges for a shorter
//! theory without losing f1 (step 2).

mod elbow;
mod inputs;
mod search;

pub use elbow::{elbow_from_values, elbow_threshold, elbow_threshold_log, likelihood_profile};
pub use inputs::{prune_input_nodes, prune_input_nodes_guarded};
pub use search::{step1_search, Step1};

use std::fmt::Write as _;
use std::path::Path;

use crate::circuit::{write_lc, write_pc, LogicCircuit, ProbCircuit};
use crate::comprehensibility::{
    emit_query, extract_cnf, incomprehensibility, write_cnf, Cnf, Dialect, DEFAULT_CLAUSE_BUDGET,
};
use crate::data::{compute_target_log, log_likelihoods, Database, ExampleSet};
use crate::error::{Error, Result};
use crate::learner::{learn_mixture, MixtureConfig};
use crate::metrics::{score, EvalReport};
use crate::pruning::{Method, PruneParams};

pub const SCHEMA_FILE: &str = "schema.txt";

/// How the likelihood threshold is chosen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ThresholdRule {
    /// Elbow over linear probabilities.
    Elbow { epsilon: f64 },
    /// Elbow over log-likelihoods, `epsilon` in nats.
    LogElbow { epsilon: f64 },
    /// A fixed `ln t`.
    Fixed { log_t: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct PutputConfig {
    pub mixture: MixtureConfig,
    pub threshold: ThresholdRule,
    pub method: Method,
    /// Keep a step-2 removal only when f1 strictly improves on the bound.
    pub strict: bool,
    /// Also reject step-2 removals that make the theory harder to read than the step-1 one.
    pub guard: bool,
    pub clause_budget: usize,
}

impl Default for PutputConfig {
    fn default() -> Self {
        PutputConfig {
            mixture: MixtureConfig::default(),
            threshold: ThresholdRule::Elbow { epsilon: 1e-5 },
            method: Method::Flows,
            strict: false,
            guard: true,
            clause_budget: DEFAULT_CLAUSE_BUDGET,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PutputResult {
    pub learned: ProbCircuit,
    /// `ln t` of the threshold defining the target.
    pub log_threshold: f64,
    pub target: ExampleSet,
    pub params: PruneParams,
    pub step1: ProbCircuit,
    pub step1_report: EvalReport,
    pub final_circuit: ProbCircuit,
    pub final_report: EvalReport,
    pub logic: LogicCircuit,
    pub cnf: Cnf,
    /// `None` when the step-1 theory is too large to put in CNF within the clause budget.
    pub step1_incomprehensibility: Option<f64>,
    pub final_incomprehensibility: f64,
}

/// Learns a circuit from `positives` and runs the rest of the pipeline on it.
pub fn run_pipeline(db: &Database, positives: &ExampleSet, cfg: &PutputConfig) -> Result<PutputResult> {
    if positives.universe() != db.len() {
        return Err(Error::Subset {
            expected: db.len(),
            got: positives.universe(),
        }
        .in_stage("learn"));
    }
    if positives.is_empty() {
        return Err(Error::Data("no positive examples".into()).in_stage("learn"));
    }
    let train: Vec<_> = db.subset(positives);
    let learned = learn_mixture(&train, db.schema(), &cfg.mixture).map_err(|e| e.in_stage("learn"))?;
    run_pipeline_on(learned, db, cfg)
}

/// Runs threshold selection, both pruning steps and theory extraction on a given circuit.
pub fn run_pipeline_on(learned: ProbCircuit, db: &Database, cfg: &PutputConfig) -> Result<PutputResult> {
    let log_threshold = match cfg.threshold {
        ThresholdRule::Elbow { epsilon } => elbow_threshold(&learned, db, epsilon).map(f64::ln),
        ThresholdRule::LogElbow { epsilon } => elbow_threshold_log(&learned, db, epsilon),
        ThresholdRule::Fixed { log_t } => Ok(log_t),
    }
    .map_err(|e| e.in_stage("elbow"))?;
    let target = compute_target_log(&learned, db, log_threshold).map_err(|e| e.in_stage("target"))?;
    log::info!("threshold ln t = {} selects {} of {} examples", log_threshold, target.len(), db.len());

    let cols = db.columns();
    let rows = db.rows();
    let s1 = search::step1_search_cols(&learned, &cols, &rows, &target, cfg.method)
        .map_err(|e| e.in_stage("step1"))?;
    let covered = |pc: &ProbCircuit| -> Result<ExampleSet> { Ok(ExampleSet::from_bits(pc.support(&cols)?)) };
    let step1_report = score(&covered(&s1.circuit)?, &target, db.len()).map_err(|e| e.in_stage("step1"))?;

    let guard = cfg.guard.then(|| (db.schema(), cfg.clause_budget));
    let final_circuit = inputs::prune_input_nodes_cols(&s1.circuit, &cols, &target, cfg.strict, guard)
        .map_err(|e| e.in_stage("step2"))?;
    let final_report = score(&covered(&final_circuit)?, &target, db.len()).map_err(|e| e.in_stage("step2"))?;

    let logic = final_circuit.to_logic().map_err(|e| e.in_stage("logic"))?;
    let cnf = extract_cnf(&logic, db.schema(), cfg.clause_budget).map_err(|e| e.in_stage("cnf"))?;
    let final_incomprehensibility = incomprehensibility(&cnf);
    let step1_incomprehensibility = match s1
        .circuit
        .to_logic()
        .and_then(|lc| extract_cnf(&lc, db.schema(), cfg.clause_budget))
    {
        Ok(c) => Some(incomprehensibility(&c)),
        Err(Error::ClauseBudget { .. }) => None,
        Err(e) => return Err(e.in_stage("cnf")),
    };

    Ok(PutputResult {
        learned,
        log_threshold,
        target,
        params: s1.params,
        step1: s1.circuit,
        step1_report,
        final_circuit,
        final_report,
        logic,
        cnf,
        step1_incomprehensibility,
        final_incomprehensibility,
    })
}

impl PutputResult {
    pub fn report(&self, db: &Database) -> String {
        let mut s = String::new();
        writeln!(s, "method: {}", self.params.method().name()).unwrap();
        writeln!(s, "parameter: {}", self.params.value()).unwrap();
        writeln!(s, "log_threshold: {}", self.log_threshold).unwrap();
        writeln!(s, "target: {}", self.target.len()).unwrap();
        writeln!(s, "examples: {}", db.len()).unwrap();
        writeln!(s, "nodes_learned: {}", self.learned.len()).unwrap();
        writeln!(s, "nodes_step1: {}", self.step1.len()).unwrap();
        writeln!(s, "nodes_final: {}", self.final_circuit.len()).unwrap();
        for (name, r) in [("step1", &self.step1_report), ("final", &self.final_report)] {
            for line in r.to_string().lines() {
                writeln!(s, "{}_{}", name, line).unwrap();
            }
        }
        match self.step1_incomprehensibility {
            Some(i) => writeln!(s, "incomprehensibility_step1: {:.5}", i).unwrap(),
            None => writeln!(s, "incomprehensibility_step1: over clause budget").unwrap(),
        }
        writeln!(s, "incomprehensibility_final: {:.5}", self.final_incomprehensibility).unwrap();
        writeln!(s, "clauses: {}", self.cnf.len()).unwrap();
        writeln!(s, "query: {}", emit_query(&self.cnf, db.schema(), Dialect::Human)).unwrap();
        writeln!(s, "sql: {}", emit_query(&self.cnf, db.schema(), Dialect::SqlWhere)).unwrap();
        s
    }

    /// Writes `step1.pc`, `final.pc`, `final.lc`, `theory.cnf`, `schema.txt` and `report.txt`.
    pub fn write_dir(&self, dir: &Path, db: &Database) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let files = [
            ("step1.pc", write_pc(&self.step1)),
            ("final.pc", write_pc(&self.final_circuit)),
            ("final.lc", write_lc(&self.logic)),
            ("theory.cnf", write_cnf(&self.cnf, db.schema(), SCHEMA_FILE)),
            (SCHEMA_FILE, db.schema().to_text()?),
            ("report.txt", self.report(db)),
        ];
        for (name, text) in files {
            let path = dir.join(name);
            std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

/// Log-likelihood of every example under `pc`, for profile dumps.
pub fn profile_values(pc: &ProbCircuit, db: &Database, log_space: bool) -> Result<Vec<f64>> {
    let lls = log_likelihoods(pc, db)?;
    Ok(if log_space {
        lls.into_iter().filter(|v| v.is_finite()).collect()
    } else {
        lls.into_iter().map(f64::exp).collect()
    })
}
