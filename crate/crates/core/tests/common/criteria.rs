//! One function per acceptance criterion. Each returns an [`Outcome`] instead of
//! panicking so the acceptance runner can report every criterion.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use putput::circuit::ProbCircuit;
use putput::comprehensibility::{incomprehensibility, Clause, Cnf};
use putput::data::{compute_target, Database, Example, ExampleSet, Schema, Variable};
use putput::learner::{learn_mixture, MixtureConfig};
use putput::metrics::score;
use putput::pruning::{prune, Method, PruneParams};
use putput::putput::{
    elbow_threshold, prune_input_nodes, run_pipeline, step1_search, PutputConfig, ThresholdRule,
};
use putput::synth::{planted, Planted, PlantedConfig};
use putput::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::*;

pub struct Outcome {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
    pub elapsed: Duration,
}

fn timed(name: &'static str, limit: Option<Duration>, f: impl FnOnce() -> (bool, String)) -> Outcome {
    let start = Instant::now();
    let (mut pass, mut detail) = f();
    let elapsed = start.elapsed();
    if let Some(limit) = limit {
        if elapsed > limit {
            pass = false;
            detail = format!("{} (over the {:?} limit)", detail, limit);
        }
    }
    Outcome {
        name,
        pass,
        detail,
        elapsed,
    }
}

/// Elbow tolerance for the 10-variable synthetic catalogs, whose likelihoods sit
/// around 1e-6 to 1e-4.
pub const SYNTH_EPSILON: f64 = 1e-7;

pub fn synth_config(seed: u64) -> PutputConfig {
    PutputConfig {
        mixture: MixtureConfig {
            seed,
            ..Default::default()
        },
        threshold: ThresholdRule::Elbow { epsilon: SYNTH_EPSILON },
        ..Default::default()
    }
}

pub fn lemma(count: usize) -> Outcome {
    timed("lemma", Some(Duration::from_secs(10)), || {
        let mut rng = ChaCha8Rng::seed_from_u64(0x1e33a);
        let mut exceptions = 0;
        let mut checked = 0;
        for _ in 0..count {
            let pc = random_circuit(&mut rng, 8);
            assert!(pc.validate().is_empty(), "generator produced an invalid circuit");
            let lc = pc.to_logic().unwrap();
            for x in assignments(8) {
                let p = pc.evaluate(&x).unwrap();
                if (p > 0.0) != lc.evaluate(&x).unwrap() || (naive_eval(&pc, &x) > 0.0) != naive_logic(&lc, &x) {
                    exceptions += 1;
                }
                checked += 1;
            }
        }
        (exceptions == 0, format!("{} circuits, {} assignments, {} exceptions", count, checked, exceptions))
    })
}

fn random_cnf(rng: &mut ChaCha8Rng, schema: &Schema) -> Cnf {
    let n = rng.gen_range(0..7);
    let clauses = (0..n)
        .map(|_| {
            let mut c = Clause::new();
            for v in 0..schema.len() {
                if rng.gen_bool(0.4) {
                    let card = schema.cardinality(v);
                    let vals: Vec<usize> = (0..card).filter(|_| rng.gen_bool(0.5)).collect();
                    c.insert(v, vals);
                }
            }
            c
        })
        .filter(|c| !c.is_empty())
        .collect();
    Cnf::new(schema, clauses).unwrap()
}

fn schema_of(cards: &[usize]) -> Schema {
    Schema::new(
        cards
            .iter()
            .enumerate()
            .map(|(i, &n)| Variable {
                name: format!("v{}", i),
                values: (0..n).map(|j| j.to_string()).collect(),
            })
            .collect(),
    )
    .unwrap()
}

pub fn metric_oracle() -> Outcome {
    timed("metric oracle", None, || {
        let schema = schema_of(&[2, 3, 4, 5, 3, 6]);
        let mut rng = ChaCha8Rng::seed_from_u64(0x0c1e);
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let cnf = random_cnf(&mut rng, &schema);
            let (fast, slow) = (incomprehensibility(&cnf), naive_incomprehensibility(&cnf));
            worst = worst.max((fast - slow).abs() / slow.abs().max(f64::MIN_POSITIVE));
        }
        let clause = |atoms: &[(usize, &[usize])]| {
            let mut c = Clause::new();
            for &(v, vals) in atoms {
                c.insert(v, vals.iter().copied());
            }
            c
        };
        // v1 has 3 values; a set of 1 gives -(1/3) log2(1/3).
        let h13 = (3f64).log2() / 3.0;
        // v3 has 5 values; a set of 2 gives -(2/5) log2(2/5).
        let h25 = -0.4 * 0.4f64.log2();
        let single = Cnf::new(&schema, vec![clause(&[(1, &[0])])]).unwrap();
        let shared = Cnf::new(&schema, vec![clause(&[(1, &[0])]), clause(&[(1, &[2]), (3, &[0, 1])])]).unwrap();
        let empty = Cnf::top(&schema);
        let hand = [
            ("single", incomprehensibility(&single), h13),
            ("factor-2", incomprehensibility(&shared), 2.0 * (h13 + h13 + h25)),
            ("empty", incomprehensibility(&empty), 0.0),
        ];
        let hand_ok = hand.iter().all(|(_, got, want)| got == want || (got - want).abs() <= 1e-15 * want.abs());
        let detail = format!(
            "100 random CNFs, worst relative error {:.1e}; hand cases {}",
            worst,
            hand.iter()
                .map(|(n, g, w)| format!("{}={}/{}", n, g, w))
                .collect::<Vec<_>>()
                .join(" ")
        );
        (worst <= 1e-9 && hand_ok, detail)
    })
}

pub const ABC_THEORY: &str =
    "(((-A∧-B)∨(A∧(-B∨B)))∧(C∨-C)) ∨ (-A∧((-B∧C)∨(-B∧-C)))";

/// All eight assignments of A, B, C as a database over three binary variables whose
/// first value is `1`, so boolean ids 0, 2, 4 are A, B, C. Returns the database and
/// each row's assignment to A, B, C.
pub fn abc_database() -> (Database, Vec<[bool; 3]>) {
    let var = |n: &str| Variable {
        name: n.into(),
        values: vec!["1".into(), "0".into()],
    };
    let schema = Schema::new(vec![var("A"), var("B"), var("C")]).unwrap();
    let rows: Vec<Example> = (0..8).map(|m| Example(vec![m & 1, m >> 1 & 1, m >> 2 & 1])).collect();
    let abc = rows.iter().map(|e| [e.0[0] == 0, e.0[1] == 0, e.0[2] == 0]).collect();
    (Database::new(schema, rows).unwrap().0, abc)
}

/// The example circuit moved onto the one-hot layout of [`abc_database`].
pub fn abc_one_hot() -> ProbCircuit {
    let f = abc_circuit();
    let nodes = f
        .nodes()
        .iter()
        .map(|n| match n {
            putput::circuit::Node::Input(l) => input(2 * l.var, l.positive),
            other => other.clone(),
        })
        .collect();
    ProbCircuit::new(nodes, f.root().unwrap()).unwrap()
}

pub fn abc_golden() -> Outcome {
    timed("abc golden", None, || {
        let pc = abc_circuit();
        let render = pc.to_logic().unwrap().render(abc);
        let strip = |s: &str| s.chars().filter(|c| !c.is_whitespace()).collect::<String>();
        let render_ok = pc.validate().is_empty() && strip(&render) == strip(ABC_THEORY);

        let pruned = prune(&pc, &PruneParams::Threshold { alpha: 0.1 }, None).unwrap();
        let (db, abc) = abc_database();
        let one_hot = abc_one_hot();
        let step1 = prune(&one_hot, &PruneParams::Threshold { alpha: 0.1 }, None).unwrap();
        let target = ExampleSet::from_bits(step1.support(&db.columns()).unwrap());
        let fin = prune_input_nodes(&step1, &db, &target, false).unwrap();
        let lc = fin.to_logic().unwrap();
        let rows = db.rows();
        let equivalent = rows
            .iter()
            .zip(&abc)
            .all(|(x, [a, b, _])| lc.evaluate(x).unwrap() == (!a && !b));
        let step1_ok = assignments(3).all(|x| (pruned.evaluate(&x).unwrap() > 0.0) == (!x[0] && !x[1]));
        (
            render_ok && equivalent && step1_ok,
            format!(
                "render {}; after threshold 0.1 and step 2: {} ({} -> {} nodes)",
                if render_ok { "matches known theory" } else { render.as_str() },
                if equivalent { "≡ -A∧-B" } else { "NOT ≡ -A∧-B" },
                step1.len(),
                fin.len()
            ),
        )
    })
}

/// Step-1 f1 of each method on one synthetic catalog.
fn step1_f1s(seed: u64) -> [f64; 3] {
    let p = planted(&PlantedConfig {
        seed,
        ..Default::default()
    })
    .unwrap();
    let cfg = synth_config(seed);
    let pc = learn_mixture(&p.db.subset(&p.positives), p.db.schema(), &cfg.mixture).unwrap();
    let t = elbow_threshold(&pc, &p.db, SYNTH_EPSILON).unwrap();
    let target = compute_target(&pc, &p.db, t).unwrap();
    Method::ALL.map(|m| step1_search(&pc, &p.db, &target, m).unwrap().f1)
}

pub fn experiment1(seeds: std::ops::Range<u64>) -> Outcome {
    timed("step-1 method ordering", Some(Duration::from_secs(120)), || {
        let n = (seeds.end - seeds.start) as f64;
        let all: Vec<[f64; 3]> = seeds.into_par_iter().map(step1_f1s).collect();
        let mean = |i: usize| all.iter().map(|f| f[i]).sum::<f64>() / n;
        let (thr, td, fl) = (mean(0), mean(1), mean(2));
        (
            fl >= td && td >= thr && fl >= 0.75,
            format!("mean step-1 f1: flows {:.3}, topdown {:.3}, threshold {:.3}", fl, td, thr),
        )
    })
}

pub struct Step2Record {
    pub seed: u64,
    pub drop: f64,
    pub lb: f64,
    pub f1: f64,
    pub before: Option<f64>,
    pub after: f64,
}

/// Pipeline outcomes per seed, with or without the step-2 readability guard.
pub fn step2_records(seeds: std::ops::Range<u64>, guard: bool) -> Vec<Step2Record> {
    seeds
        .into_par_iter()
        .map(|seed| {
            let p = planted(&PlantedConfig {
                seed,
                ..Default::default()
            })
            .unwrap();
            let cfg = PutputConfig {
                guard,
                ..synth_config(seed)
            };
            let r = run_pipeline(&p.db, &p.positives, &cfg).unwrap();
            Step2Record {
                seed,
                drop: 1.0 - r.final_circuit.len() as f64 / r.step1.len() as f64,
                lb: r.step1_report.f1,
                f1: r.final_report.f1,
                before: r.step1_incomprehensibility,
                after: r.final_incomprehensibility,
            }
        })
        .collect()
}

pub fn experiment2(seeds: std::ops::Range<u64>) -> Outcome {
    timed("step-2 size and readability", Some(Duration::from_secs(120)), || {
        let worse = |recs: &[Step2Record]| -> Vec<u64> {
            recs.iter()
                .filter(|r| r.after > r.before.unwrap_or(f64::INFINITY))
                .map(|r| r.seed)
                .collect()
        };
        // Reported only: the f1-only acceptance rule, without the guard.
        let unguarded = worse(&step2_records(seeds.clone(), false));
        let recs = step2_records(seeds, true);
        let n = recs.len() as f64;
        let drop = recs.iter().map(|r| r.drop).sum::<f64>() / n;
        let below_lb: Vec<u64> = recs.iter().filter(|r| r.f1 < r.lb).map(|r| r.seed).collect();
        let worse = worse(&recs);
        let over_budget = recs.iter().filter(|r| r.before.is_none()).count();
        let before = recs.iter().filter_map(|r| r.before).sum::<f64>();
        let after = recs.iter().filter(|r| r.before.is_some()).map(|r| r.after).sum::<f64>();
        (
            drop >= 0.4 && below_lb.is_empty() && worse.is_empty(),
            format!(
                "mean node drop {:.3}; f1 below lb on {:?}; incomprehensibility up on {:?}; total {:.1} -> {:.1}; {} step-1 theories over the clause budget; unguarded rule raises it on {:?}",
                drop, below_lb, worse, before, after, over_budget, unguarded
            ),
        )
    })
}

pub fn pruning_safety(count: usize) -> Outcome {
    timed("pruning safety", None, || {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5afe);
        let mut failures = Vec::new();
        let mut runs = 0;
        for i in 0..count {
            let vars = rng.gen_range(2..=8);
            let pc = random_circuit(&mut rng, vars);
            let xs: Vec<Vec<bool>> = assignments(vars).collect();
            let flow_rows: Vec<Vec<bool>> = xs.iter().filter(|_| rng.gen_bool(0.3)).cloned().collect();
            let max_w = pc
                .nodes()
                .iter()
                .filter_map(|n| match n {
                    putput::circuit::Node::Sum { weights, .. } => weights.iter().copied().reduce(f64::max),
                    _ => None,
                })
                .fold(0.0, f64::max);
            let mut params = Vec::new();
            for k in 0..=10 {
                let f = k as f64 / 10.0;
                params.push(PruneParams::Threshold { alpha: f * max_w * 1.01 });
                params.push(PruneParams::TopDown { fraction: f });
                params.push(PruneParams::Flows { fraction: f });
            }
            let base: Vec<f64> = xs.iter().map(|x| pc.evaluate(x).unwrap()).collect();
            for p in params {
                runs += 1;
                let pruned = prune(&pc, &p, Some(&flow_rows)).unwrap();
                let valid = pruned.is_empty() || pruned.validate().is_empty();
                let bounded = xs
                    .iter()
                    .zip(&base)
                    .all(|(x, &b)| pruned.evaluate(x).unwrap() <= b * (1.0 + 1e-12));
                if !valid || !bounded || pruned.len() > pc.len() {
                    failures.push(format!("circuit {} {}", i, p));
                }
            }
        }
        (
            failures.is_empty(),
            format!("{} circuits, {} prunings, {} failures {:?}", count, runs, failures.len(), failures.iter().take(3).collect::<Vec<_>>()),
        )
    })
}

/// A database of all value combinations of three 10-valued variables and a circuit that
/// gives row r exactly `weights[r]`.
pub fn profile_circuit(weights: &[f64]) -> (ProbCircuit, Database) {
    assert_eq!(weights.len(), 1000);
    let schema = schema_of(&[10, 10, 10]);
    let rows: Vec<Example> = (0..1000).map(|r| Example(vec![r / 100, r / 10 % 10, r % 10])).collect();
    let (db, _) = Database::new(schema, rows).unwrap();
    let mut nodes = Vec::new();
    for b in 0..30 {
        nodes.push(input(b, true));
        nodes.push(input(b, false));
    }
    let mut products = Vec::new();
    for e in db.examples() {
        // The value's positive literal and the negation of every other value in its block.
        let children: Vec<usize> = (0..30)
            .map(|b| if e.0[b / 10] == b % 10 { 2 * b } else { 2 * b + 1 })
            .collect();
        nodes.push(product(children));
        products.push(nodes.len() - 1);
    }
    nodes.push(sum(products, weights.to_vec()));
    let root = nodes.len() - 1;
    (ProbCircuit::new(nodes, root).unwrap(), db)
}

pub fn elbow() -> Outcome {
    timed("elbow", None, || {
        // Two cliffs: 50 rows at 1e-2, 100 at 2e-3, the rest at 1e-4.
        let mut rng = ChaCha8Rng::seed_from_u64(0xe1b0);
        let mut order: Vec<usize> = (0..1000).collect();
        for i in (1..1000).rev() {
            order.swap(i, rng.gen_range(0..=i));
        }
        let mut w = vec![1e-4; 1000];
        for &r in &order[..50] {
            w[r] = 1e-2;
        }
        for &r in &order[50..150] {
            w[r] = 2e-3;
        }
        let (pc, db) = profile_circuit(&w);
        let planted_set = ExampleSet::from_indices(1000, order[..50].iter().copied());
        let (two_cliff, t) = match elbow_threshold(&pc, &db, 1e-5) {
            Ok(t) => (compute_target(&pc, &db, t).unwrap() == planted_set, format!("{:.4}", t)),
            Err(e) => (false, e.to_string()),
        };
        let (upc, udb) = profile_circuit(&[1e-3; 1000]);
        let uniform = matches!(elbow_threshold(&upc, &udb, 1e-5), Err(Error::NoElbow { .. }));
        (
            two_cliff && uniform,
            format!(
                "two-cliff t = {} {} the planted 50; uniform {}",
                t,
                if two_cliff { "separates" } else { "does not separate" },
                if uniform { "errors with NoElbow" } else { "did not error" }
            ),
        )
    })
}

/// Runs `putput putput` on a planted catalog twice and compares the output directories.
pub fn determinism(bin: &Path, work: &Path) -> Outcome {
    timed("determinism", None, || {
        let p = planted(&PlantedConfig {
            seed: 21,
            ..Default::default()
        })
        .unwrap();
        write_fixture(work, &p.db, &p.positives);
        let run = |out: &str| {
            Command::new(bin)
                .args(["putput", "--csv"])
                .arg(work.join("db.csv"))
                .arg("--positives")
                .arg(work.join("positives.txt"))
                .args(["--seed", "21", "--epsilon", "1e-7", "--out"])
                .arg(work.join(out))
                .output()
                .unwrap()
        };
        let (a, b) = (run("a"), run("b"));
        if !a.status.success() || !b.status.success() {
            return (false, format!("run failed: {}", String::from_utf8_lossy(&a.stderr)));
        }
        let (da, db_) = (dir_bytes(&work.join("a")), dir_bytes(&work.join("b")));
        let same = da == db_ && a.stdout == b.stdout;
        (
            same && !da.is_empty(),
            format!("{} files, {}", da.len(), if same { "byte-identical" } else { "differ" }),
        )
    })
}

pub fn truth_f1(p: &Planted, cfg: &PutputConfig) -> f64 {
    let r = run_pipeline(&p.db, &p.positives, cfg).unwrap();
    score(&r.cnf.models(&p.db), &p.truth, p.db.len()).unwrap().f1
}

pub fn disjunctive(seeds: std::ops::Range<u64>) -> Outcome {
    timed("disjunctive recovery", None, || {
        let n = (seeds.end - seeds.start) as f64;
        let f1s: Vec<f64> = seeds
            .into_par_iter()
            .map(|seed| {
                let p = planted(&PlantedConfig {
                    seed,
                    concepts: 2,
                    ..Default::default()
                })
                .unwrap();
                truth_f1(&p, &synth_config(seed))
            })
            .collect();
        let mean = f1s.iter().sum::<f64>() / n;
        (
            mean >= 0.7,
            format!(
                "mean f1 of the single emitted theory vs ground truth {:.3} (per seed {:?})",
                mean,
                f1s.iter().map(|f| (f * 1000.0).round() / 1000.0).collect::<Vec<_>>()
            ),
        )
    })
}
