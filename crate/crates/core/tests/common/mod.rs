//! Shared fixtures and brute-force oracles for the integration tests. The oracles walk
//! the circuit as a tree, recursing from the root, and share no code with the library's
//! forward passes.

#![allow(dead_code)]

pub mod criteria;

use std::collections::BTreeSet;
use std::path::Path;

use putput::circuit::{Literal, LogicCircuit, Node, ProbCircuit, Unit};
use putput::comprehensibility::Cnf;
use putput::data::{Database, Example, Schema, Variable};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn input(var: usize, positive: bool) -> Node {
    Node::Input(Literal { var, positive })
}

pub fn sum(children: Vec<usize>, weights: Vec<f64>) -> Node {
    Node::Sum { children, weights }
}

pub fn product(children: Vec<usize>) -> Node {
    Node::Product { children }
}

/// The three-variable example circuit over A = 0, B = 1, C = 2.
/// Weights are arbitrary positive values.
pub fn abc_circuit() -> ProbCircuit {
    ProbCircuit::new(
        vec![
            input(0, false),                     // 0  -A
            input(1, false),                     // 1  -B
            product(vec![0, 1]),                 // 2  -A ∧ -B
            input(0, true),                      // 3  A
            input(1, true),                      // 4  B
            sum(vec![1, 4], vec![0.3, 0.7]),     // 5  -B ∨ B
            product(vec![3, 5]),                 // 6  A ∧ (-B ∨ B)
            sum(vec![2, 6], vec![0.95, 0.05]),   // 7
            input(2, true),                      // 8  C
            input(2, false),                     // 9  -C
            sum(vec![8, 9], vec![0.5, 0.5]),     // 10 C ∨ -C
            product(vec![7, 10]),                // 11
            product(vec![1, 8]),                 // 12 -B ∧ C
            product(vec![1, 9]),                 // 13 -B ∧ -C
            sum(vec![12, 13], vec![0.4, 0.6]),   // 14
            product(vec![0, 14]),                // 15
            sum(vec![11, 15], vec![0.6, 0.4]),   // 16 root
        ],
        16,
    )
    .unwrap()
}

pub fn abc(v: usize) -> String {
    ["A", "B", "C"][v].to_string()
}

/// Probability by recursion from the root, without memoisation.
pub fn naive_eval(pc: &ProbCircuit, x: &[bool]) -> f64 {
    fn go(pc: &ProbCircuit, n: usize, x: &[bool]) -> f64 {
        match pc.node(n) {
            Node::Input(l) => {
                if x[l.var] == l.positive {
                    1.0
                } else {
                    0.0
                }
            }
            Node::Product { children } => children.iter().map(|&c| go(pc, c, x)).product(),
            Node::Sum { children, weights } => children.iter().zip(weights).map(|(&c, w)| w * go(pc, c, x)).sum(),
        }
    }
    pc.root().map_or(0.0, |r| go(pc, r, x))
}

pub fn naive_logic(lc: &LogicCircuit, x: &[bool]) -> bool {
    fn go(lc: &LogicCircuit, n: usize, x: &[bool]) -> bool {
        match &lc.units()[n] {
            Unit::Input(l) => x[l.var] == l.positive,
            Unit::And(c) => c.iter().all(|&c| go(lc, c, x)),
            Unit::Or(c) => c.iter().any(|&c| go(lc, c, x)),
        }
    }
    lc.root().is_some_and(|r| go(lc, r, x))
}

pub fn assignments(n: usize) -> impl Iterator<Item = Vec<bool>> {
    (0..1u32 << n).map(move |m| (0..n).map(|i| m >> i & 1 == 1).collect())
}

/// Per-edge flow by pulling from parents: the flow into node m is the flow of each
/// product parent plus, for each sum parent z, F_z * w * p_m / p_z.
pub fn naive_flows(pc: &ProbCircuit, rows: &[Vec<bool>]) -> Vec<((usize, usize), f64)> {
    let n = pc.len();
    let mut total = vec![0.0; pc.sum_edges().len()];
    let Some(root) = pc.root() else {
        return Vec::new();
    };
    let sub = |id: usize| -> ProbCircuit { ProbCircuit::new(pc.nodes()[..=id].to_vec(), id).unwrap() };
    for x in rows {
        let p: Vec<f64> = (0..n).map(|i| naive_eval(&sub(i), x)).collect();
        if p[root] == 0.0 {
            continue;
        }
        fn inflow(pc: &ProbCircuit, m: usize, root: usize, p: &[f64]) -> f64 {
            if m == root {
                return 1.0;
            }
            let mut f = 0.0;
            for z in m + 1..pc.len() {
                match pc.node(z) {
                    Node::Product { children } => {
                        for &c in children {
                            if c == m {
                                f += inflow(pc, z, root, p);
                            }
                        }
                    }
                    Node::Sum { children, weights } => {
                        for (&c, &w) in children.iter().zip(weights) {
                            if c == m && p[z] > 0.0 {
                                f += inflow(pc, z, root, p) * w * p[m] / p[z];
                            }
                        }
                    }
                    Node::Input(_) => {}
                }
            }
            f
        }
        let mut k = 0;
        for (z, node) in pc.nodes().iter().enumerate() {
            if let Node::Sum { children, weights } = node {
                for (&c, &w) in children.iter().zip(weights) {
                    if p[z] > 0.0 {
                        total[k] += inflow(pc, z, root, &p) * w * p[c] / p[z];
                    }
                    k += 1;
                }
            }
        }
    }
    pc.sum_edges().into_iter().zip(total).collect()
}

/// A random smooth, decomposable circuit over `vars` boolean variables with strictly
/// positive weights. Sub-circuits over the same scope are sometimes shared.
pub fn random_circuit<R: Rng>(rng: &mut R, vars: usize) -> ProbCircuit {
    struct Builder {
        nodes: Vec<Node>,
        by_scope: Vec<(Vec<usize>, usize)>,
    }
    impl Builder {
        fn push(&mut self, n: Node) -> usize {
            self.nodes.push(n);
            self.nodes.len() - 1
        }
        fn build<R: Rng>(&mut self, rng: &mut R, scope: &[usize], depth: usize) -> usize {
            if let Some(&(_, id)) = self.by_scope.iter().find(|(s, _)| s == scope) {
                if rng.gen_bool(0.3) {
                    return id;
                }
            }
            let id = if scope.len() == 1 {
                let v = scope[0];
                match rng.gen_range(0..3) {
                    0 => self.push(input(v, rng.gen())),
                    _ => {
                        let a = self.push(input(v, true));
                        let b = self.push(input(v, false));
                        let (wa, wb) = (rng.gen_range(0.05..1.0), rng.gen_range(0.05..1.0));
                        self.push(sum(vec![a, b], vec![wa, wb]))
                    }
                }
            } else if depth == 0 || rng.gen_bool(0.6) {
                // Product over a random partition of the scope.
                let mut s = scope.to_vec();
                s.shuffle(rng);
                let parts = rng.gen_range(2..=s.len().min(3));
                let mut cuts: Vec<usize> = (1..s.len()).collect();
                cuts.shuffle(rng);
                let mut cuts: Vec<usize> = cuts[..parts - 1].to_vec();
                cuts.sort_unstable();
                let mut children = Vec::new();
                let mut start = 0;
                for end in cuts.into_iter().chain([s.len()]) {
                    let mut part = s[start..end].to_vec();
                    part.sort_unstable();
                    children.push(self.build(rng, &part, depth.saturating_sub(1)));
                    start = end;
                }
                self.push(product(children))
            } else {
                let k = rng.gen_range(2..=3);
                let children: Vec<usize> = (0..k).map(|_| self.build(rng, scope, depth - 1)).collect();
                let weights = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
                self.push(sum(children, weights))
            };
            self.by_scope.push((scope.to_vec(), id));
            id
        }
    }
    let mut b = Builder {
        nodes: Vec::new(),
        by_scope: Vec::new(),
    };
    let scope: Vec<usize> = (0..vars).collect();
    let root = b.build(rng, &scope, 4);
    ProbCircuit::new(b.nodes, root).unwrap()
}

/// Incomprehensibility by the definition: for each clause, its own entropy sum plus the
/// entropy sums of every other clause sharing a variable with it.
pub fn naive_incomprehensibility(cnf: &Cnf) -> f64 {
    let cards = cnf.cardinalities();
    let u = |i: usize| -> f64 {
        let c = &cnf.clauses()[i];
        let mut total = 0.0;
        for (v, vals) in c.atoms() {
            let q = vals.len() as f64 / cards[v] as f64;
            if q > 0.0 && q < 1.0 {
                total += -q * q.log2();
            }
        }
        total
    };
    let vars = |i: usize| -> BTreeSet<usize> { cnf.clauses()[i].atoms().map(|(v, _)| v).collect() };
    let mut total = 0.0;
    for i in 0..cnf.len() {
        total += u(i);
        for j in 0..cnf.len() {
            if i != j && !vars(i).is_disjoint(&vars(j)) {
                total += u(j);
            }
        }
    }
    total
}

/// A 50-row catalog with awkward values (spaces, quotes) for query rendering tests.
pub fn catalog50() -> Database {
    let var = |n: &str, vs: &[&str]| Variable {
        name: n.into(),
        values: vs.iter().map(|s| s.to_string()).collect(),
    };
    let schema = Schema::new(vec![
        var("genre", &["rock", "jazz", "hip hop", "metal"]),
        var("mood", &["calm", "sad", "wild"]),
        var("era", &["60s", "70s", "80s", "90s", "00s"]),
        var("artist's label", &["indie", "major"]),
    ])
    .unwrap();
    let mut rows = Vec::new();
    let mut seen = BTreeSet::new();
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    while rows.len() < 50 {
        let e = Example(vec![rng.gen_range(0..4), rng.gen_range(0..3), rng.gen_range(0..5), rng.gen_range(0..2)]);
        if seen.insert(e.clone()) {
            rows.push(e);
        }
    }
    Database::new(schema, rows).unwrap().0
}

/// Writes a database CSV and an index file of positives into `dir`.
pub fn write_fixture(dir: &Path, db: &Database, positives: &putput::data::ExampleSet) {
    std::fs::create_dir_all(dir).unwrap();
    std::fs::write(dir.join("db.csv"), db.to_csv().unwrap()).unwrap();
    std::fs::write(dir.join("positives.txt"), positives.to_index_text()).unwrap();
}

/// Every file in `dir` with its bytes, sorted by name.
pub fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    out.sort();
    out
}
