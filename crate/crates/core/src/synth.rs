//! Seeded synthetic catalogs with planted conjunctive concepts, used by the test suites
//! and the `synth` fixtures.

use std::collections::HashSet;

use rand::seq::index::sample;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{Database, Example, ExampleSet, Schema, Variable};
use crate::error::Result;

#[derive(Clone, Debug, PartialEq)]
pub struct PlantedConfig {
    pub num_vars: usize,
    /// Inclusive range of per-variable cardinalities.
    pub min_values: usize,
    pub max_values: usize,
    pub rows: usize,
    /// Number of `var = value` terms per concept.
    pub terms: usize,
    /// Number of concepts; more than one gives a disjunction.
    pub concepts: usize,
    /// Fraction of rows generated from a concept.
    pub planted_fraction: f64,
    /// Fraction of the concept's rows handed out as positives.
    pub positive_fraction: f64,
    pub seed: u64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        PlantedConfig {
            num_vars: 10,
            min_values: 3,
            max_values: 6,
            rows: 500,
            terms: 3,
            concepts: 1,
            planted_fraction: 0.1,
            positive_fraction: 0.5,
            seed: 0,
        }
    }
}

/// A generated catalog with its ground truth.
#[derive(Clone, Debug)]
pub struct Planted {
    pub db: Database,
    /// Each concept as a list of `(variable, value)` terms.
    pub concepts: Vec<Vec<(usize, usize)>>,
    /// Every row satisfying at least one concept.
    pub truth: ExampleSet,
    /// Rows sampled without replacement from `truth`.
    pub positives: ExampleSet,
}

impl Planted {
    pub fn satisfies(&self, example: &Example) -> bool {
        self.concepts
            .iter()
            .any(|c| c.iter().all(|&(v, val)| example.value(v) == val))
    }
}

pub fn planted(cfg: &PlantedConfig) -> Result<Planted> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let cards: Vec<usize> = (0..cfg.num_vars)
        .map(|_| rng.gen_range(cfg.min_values..=cfg.max_values))
        .collect();
    let schema = Schema::new(
        cards
            .iter()
            .enumerate()
            .map(|(i, &n)| Variable {
                name: format!("f{}", i),
                values: (0..n).map(|j| format!("{}{}", (b'a' + i as u8 % 26) as char, j)).collect(),
            })
            .collect(),
    )?;

    // Concepts use disjoint variables so a disjunction cannot collapse into one term set.
    let picked = sample(&mut rng, cfg.num_vars, (cfg.terms * cfg.concepts).min(cfg.num_vars)).into_vec();
    let concepts: Vec<Vec<(usize, usize)>> = picked
        .chunks(cfg.terms)
        .take(cfg.concepts)
        .map(|vars| {
            let mut c: Vec<(usize, usize)> = vars.iter().map(|&v| (v, rng.gen_range(0..cards[v]))).collect();
            c.sort_unstable();
            c
        })
        .collect();

    let planted_rows = (cfg.planted_fraction * cfg.rows as f64).round() as usize;
    let mut seen = HashSet::with_capacity(cfg.rows);
    let mut examples = Vec::with_capacity(cfg.rows);
    let mut attempts = 0usize;
    while examples.len() < cfg.rows {
        attempts += 1;
        assert!(attempts < 1000 * cfg.rows.max(1), "cannot draw enough distinct rows");
        let mut vals: Vec<usize> = cards.iter().map(|&n| rng.gen_range(0..n)).collect();
        if examples.len() < planted_rows {
            let c = &concepts[examples.len() % concepts.len()];
            for &(v, val) in c {
                vals[v] = val;
            }
        }
        let e = Example(vals);
        if seen.insert(e.clone()) {
            examples.push(e);
        }
    }
    // Planted rows should not sit in a block at the front of the catalog.
    for i in (1..examples.len()).rev() {
        let j = rng.gen_range(0..=i);
        examples.swap(i, j);
    }
    let (db, _) = Database::new(schema, examples)?;

    let mut out = Planted {
        db,
        concepts,
        truth: ExampleSet::new(0),
        positives: ExampleSet::new(0),
    };
    let truth_idx: Vec<usize> = (0..out.db.len())
        .filter(|&i| out.satisfies(&out.db.examples()[i]))
        .collect();
    let n_pos = ((cfg.positive_fraction * truth_idx.len() as f64).round() as usize).clamp(1, truth_idx.len());
    let mut pos: Vec<usize> = sample(&mut rng, truth_idx.len(), n_pos)
        .into_iter()
        .map(|i| truth_idx[i])
        .collect();
    pos.sort_unstable();
    out.truth = ExampleSet::from_indices(out.db.len(), truth_idx);
    out.positives = ExampleSet::from_indices(out.db.len(), pos);
    Ok(out)
}
