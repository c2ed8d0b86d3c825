//! Multi-valued CNF theories: extraction from logical circuits, the clause-graph
//! incomprehensibility score, query rendering and the `putput-cnf v1` text format.
//!
//! A clause is a disjunction of atoms `var ∈ S`; a CNF is a conjunction of clauses.
//! The empty CNF is ⊤ and a CNF holding the empty clause is ⊥.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use fixedbitset::FixedBitSet;

use crate::circuit::{LogicCircuit, Unit};
use crate::data::{Database, Example, ExampleSet, Schema};
use crate::error::{Error, Result};

pub const DEFAULT_CLAUSE_BUDGET: usize = 10_000;

pub const CNF_HEADER: &str = "putput-cnf v1";

/// Disjunction of `var ∈ values` atoms, at most one atom per variable.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Clause {
    atoms: BTreeMap<usize, Vec<usize>>,
}

impl Clause {
    pub fn new() -> Self {
        Clause::default()
    }

    /// Adds `var ∈ values`, merging by union with an existing atom on `var`.
    /// An empty value set is a false atom and is ignored.
    pub fn insert(&mut self, var: usize, values: impl IntoIterator<Item = usize>) {
        let mut vals: Vec<usize> = values.into_iter().collect();
        if vals.is_empty() {
            return;
        }
        let entry = self.atoms.entry(var).or_default();
        entry.append(&mut vals);
        entry.sort_unstable();
        entry.dedup();
    }

    pub fn atoms(&self) -> impl Iterator<Item = (usize, &[usize])> {
        self.atoms.iter().map(|(&v, s)| (v, s.as_slice()))
    }

    pub fn values(&self, var: usize) -> Option<&[usize]> {
        self.atoms.get(&var).map(|v| v.as_slice())
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    /// The empty clause, which no assignment satisfies.
    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    fn union(&self, other: &Clause) -> Clause {
        let mut c = self.clone();
        for (v, s) in other.atoms() {
            c.insert(v, s.iter().copied());
        }
        c
    }

    fn is_tautology(&self, cards: &[usize]) -> bool {
        self.atoms.iter().any(|(&v, s)| s.len() == cards[v])
    }

    /// Every model of `self` is a model of `other`.
    fn subsumes(&self, other: &Clause) -> bool {
        self.atoms.iter().all(|(v, s)| match other.atoms.get(v) {
            Some(t) => is_sorted_subset(s, t),
            None => false,
        })
    }

    pub fn satisfied_by(&self, example: &Example) -> bool {
        self.atoms
            .iter()
            .any(|(&v, s)| s.binary_search(&example.value(v)).is_ok())
    }
}

fn is_sorted_subset(a: &[usize], b: &[usize]) -> bool {
    let mut j = 0;
    for &x in a {
        while j < b.len() && b[j] < x {
            j += 1;
        }
        if j == b.len() || b[j] != x {
            return false;
        }
        j += 1;
    }
    true
}

fn intersect_sorted(a: &[usize], b: &[usize]) -> Vec<usize> {
    a.iter().filter(|x| b.binary_search(x).is_ok()).copied().collect()
}

/// Conjunction of clauses over a schema with the given variable cardinalities.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cnf {
    cards: Vec<usize>,
    clauses: Vec<Clause>,
}

impl Cnf {
    pub fn top(schema: &Schema) -> Self {
        Cnf {
            cards: cards(schema),
            clauses: Vec::new(),
        }
    }

    pub fn bottom(schema: &Schema) -> Self {
        Cnf {
            cards: cards(schema),
            clauses: vec![Clause::new()],
        }
    }

    /// Builds a CNF from raw clauses, checking them against the schema. Clauses are kept
    /// as given; use [`Cnf::normalized`] for the canonical form.
    pub fn new(schema: &Schema, clauses: Vec<Clause>) -> Result<Self> {
        let cards = cards(schema);
        for c in &clauses {
            for (v, s) in c.atoms() {
                if v >= cards.len() {
                    return Err(Error::Data(format!("clause refers to unknown variable {}", v)));
                }
                if let Some(&bad) = s.iter().find(|&&x| x >= cards[v]) {
                    return Err(Error::Data(format!(
                        "clause refers to value {} of variable `{}`, which has {} values",
                        bad,
                        schema.variable(v).name,
                        cards[v]
                    )));
                }
            }
        }
        Ok(Cnf { cards, clauses })
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn cardinalities(&self) -> &[usize] {
        &self.cards
    }

    pub fn len(&self) -> usize {
        self.clauses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clauses.is_empty()
    }

    pub fn is_top(&self) -> bool {
        self.clauses.is_empty()
    }

    pub fn is_bottom(&self) -> bool {
        self.clauses.iter().any(Clause::is_empty)
    }

    pub fn satisfied_by(&self, example: &Example) -> bool {
        self.clauses.iter().all(|c| c.satisfied_by(example))
    }

    pub fn models(&self, db: &Database) -> ExampleSet {
        ExampleSet::from_indices(
            db.len(),
            db.examples()
                .iter()
                .enumerate()
                .filter(|(_, e)| self.satisfied_by(e))
                .map(|(i, _)| i),
        )
    }

    /// Canonical equivalent form: tautologies and subsumed clauses dropped, unit
    /// clauses propagated into the other clauses, clauses sorted.
    pub fn normalized(&self) -> Cnf {
        Cnf {
            cards: self.cards.clone(),
            clauses: normalize(self.clauses.clone(), &self.cards),
        }
    }
}

fn cards(schema: &Schema) -> Vec<usize> {
    (0..schema.len()).map(|v| schema.cardinality(v)).collect()
}

fn normalize(mut clauses: Vec<Clause>, cards: &[usize]) -> Vec<Clause> {
    if clauses.iter().any(Clause::is_empty) {
        return vec![Clause::new()];
    }
    clauses.retain(|c| !c.is_tautology(cards));
    loop {
        // Units on the same variable intersect; every other atom on that variable
        // can be narrowed to the unit's values.
        let mut units: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for c in clauses.iter().filter(|c| c.len() == 1) {
            let (v, s) = c.atoms().next().unwrap();
            let merged = match units.get(&v) {
                Some(u) => intersect_sorted(u, s),
                None => s.to_vec(),
            };
            units.insert(v, merged);
        }
        let mut changed = false;
        let mut next = Vec::with_capacity(clauses.len());
        for (v, s) in &units {
            if s.is_empty() {
                return vec![Clause::new()];
            }
            let mut c = Clause::new();
            c.insert(*v, s.iter().copied());
            next.push(c);
        }
        for c in clauses.iter().filter(|c| c.len() != 1) {
            let mut out = Clause::new();
            for (v, s) in c.atoms() {
                match units.get(&v) {
                    Some(u) => {
                        let narrowed = intersect_sorted(s, u);
                        changed |= narrowed.len() != s.len();
                        out.insert(v, narrowed);
                    }
                    None => out.insert(v, s.iter().copied()),
                }
            }
            if out.is_empty() {
                return vec![Clause::new()];
            }
            if !out.is_tautology(cards) {
                next.push(out);
            }
        }
        clauses = remove_subsumed(next);
        if !changed {
            break;
        }
    }
    clauses
}

fn remove_subsumed(mut clauses: Vec<Clause>) -> Vec<Clause> {
    // Shorter clauses first, so a subsuming clause is always seen before its victims.
    clauses.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    clauses.dedup();
    let mut kept: Vec<Clause> = Vec::with_capacity(clauses.len());
    for c in clauses {
        if !kept.iter().any(|k| k.subsumes(&c)) {
            kept.push(c);
        }
    }
    kept.sort();
    kept
}

/// Converts a logical circuit over the schema's one-hot variables into a multi-valued CNF.
///
/// Fails with [`Error::ClauseBudget`] when distributing a disjunction would build more
/// than `budget` intermediate clauses.
pub fn extract_cnf(lc: &LogicCircuit, schema: &Schema, budget: usize) -> Result<Cnf> {
    let cards = cards(schema);
    let Some(root) = lc.root() else {
        return Ok(Cnf::bottom(schema));
    };
    if lc.num_vars() > schema.num_bool_vars() {
        return Err(Error::SchemaMismatch(format!(
            "circuit uses {} boolean variables, schema expands to {}",
            lc.num_vars(),
            schema.num_bool_vars()
        )));
    }
    let mut memo: Vec<Vec<Clause>> = Vec::with_capacity(lc.len());
    for unit in lc.units() {
        let clauses = match unit {
            Unit::Input(lit) => {
                let (v, i) = schema.decode(lit.var).expect("checked against num_bool_vars");
                let mut c = Clause::new();
                if lit.positive {
                    c.insert(v, [i]);
                } else {
                    c.insert(v, (0..cards[v]).filter(|&j| j != i));
                }
                normalize(vec![c], &cards)
            }
            Unit::And(children) => {
                let all = children.iter().flat_map(|&c| memo[c].iter().cloned()).collect();
                normalize(all, &cards)
            }
            Unit::Or(children) => {
                let mut acc = vec![Clause::new()];
                for &c in children {
                    let rhs = &memo[c];
                    if rhs.is_empty() {
                        acc = Vec::new();
                        break;
                    }
                    if acc.len().saturating_mul(rhs.len()) > budget {
                        return Err(Error::ClauseBudget { budget });
                    }
                    let mut prod = Vec::with_capacity(acc.len() * rhs.len());
                    for a in &acc {
                        for b in rhs {
                            prod.push(a.union(b));
                        }
                    }
                    acc = normalize(prod, &cards);
                }
                acc
            }
        };
        memo.push(clauses);
    }
    Ok(Cnf {
        cards,
        clauses: memo.swap_remove(root),
    })
}

/// `-(k/|X|) log2(k/|X|)` where `k` is the number of values the clause allows for `var`
/// (0 when `var` is absent).
pub fn clause_entropy(clause: &Clause, var: usize, cardinality: usize) -> f64 {
    let k = clause.values(var).map_or(0, |s| s.len());
    if k == 0 || k >= cardinality {
        return 0.0;
    }
    let q = k as f64 / cardinality as f64;
    -q * q.log2()
}

/// Sum of [`clause_entropy`] over every variable.
pub fn clause_incomprehensibility(clause: &Clause, cards: &[usize]) -> f64 {
    clause
        .atoms()
        .fold(0.0, |acc, (v, _)| acc + clause_entropy(clause, v, cards[v]))
}

/// Clauses are vertices; two distinct clauses are adjacent when they mention a common variable.
#[derive(Clone, Debug)]
pub struct ClauseGraph {
    adj: Vec<Vec<usize>>,
}

impl ClauseGraph {
    pub fn new(cnf: &Cnf) -> Self {
        let mut by_var: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, c) in cnf.clauses.iter().enumerate() {
            for (v, _) in c.atoms() {
                by_var.entry(v).or_default().push(i);
            }
        }
        let n = cnf.clauses.len();
        let mut adj = Vec::with_capacity(n);
        let mut seen = FixedBitSet::with_capacity(n);
        for (i, c) in cnf.clauses.iter().enumerate() {
            seen.clear();
            for (v, _) in c.atoms() {
                for &k in &by_var[&v] {
                    if k != i {
                        seen.insert(k);
                    }
                }
            }
            adj.push(seen.ones().collect());
        }
        ClauseGraph { adj }
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adj[i]
    }

    pub fn num_edges(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }
}

/// Each clause's own score plus the scores of all its neighbours in the clause graph.
pub fn incomprehensibility(cnf: &Cnf) -> f64 {
    let ups: Vec<f64> = cnf
        .clauses
        .iter()
        .map(|c| clause_incomprehensibility(c, &cnf.cards))
        .collect();
    let graph = ClauseGraph::new(cnf);
    ups.iter()
        .enumerate()
        .map(|(i, u)| u + graph.neighbors(i).iter().fold(0.0, |acc, &k| acc + ups[k]))
        .fold(0.0, |acc, x| acc + x)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dialect {
    Human,
    SqlWhere,
}

impl std::str::FromStr for Dialect {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "human" => Ok(Dialect::Human),
            "sql" | "sql-where" => Ok(Dialect::SqlWhere),
            _ => Err(Error::Param(format!("unknown dialect `{}`", s))),
        }
    }
}

/// Renders the theory as a query. Variables appear in schema order and values in
/// schema value order; within an atom the complement form is used when it is shorter.
pub fn emit_query(cnf: &Cnf, schema: &Schema, dialect: Dialect) -> String {
    let (t, f) = match dialect {
        Dialect::Human => ("TRUE", "FALSE"),
        Dialect::SqlWhere => ("1 = 1", "1 = 0"),
    };
    if cnf.is_bottom() {
        return f.to_string();
    }
    if cnf.is_top() {
        return t.to_string();
    }
    let many = cnf.clauses.len() > 1;
    let parts: Vec<String> = cnf
        .clauses
        .iter()
        .map(|c| {
            let atoms: Vec<String> = c.atoms().map(|(v, s)| atom(schema, v, s, dialect)).collect();
            if many && atoms.len() > 1 {
                format!("({})", atoms.join(" OR "))
            } else {
                atoms.join(" OR ")
            }
        })
        .collect();
    parts.join(" AND ")
}

fn atom(schema: &Schema, var: usize, set: &[usize], dialect: Dialect) -> String {
    let variable = schema.variable(var);
    let complement: Vec<usize> = (0..variable.values.len())
        .filter(|i| set.binary_search(i).is_err())
        .collect();
    let negated = complement.len() < set.len();
    let vals = if negated { &complement[..] } else { set };
    let names: Vec<&str> = vals.iter().map(|&i| variable.values[i].as_str()).collect();
    match dialect {
        Dialect::Human => {
            let name = &variable.name;
            match (negated, names.as_slice()) {
                (false, [one]) => format!("{} = {}", name, one),
                (true, [one]) => format!("{} != {}", name, one),
                (false, _) => format!("{} IN {{{}}}", name, names.join(", ")),
                (true, _) => format!("{} NOT IN {{{}}}", name, names.join(", ")),
            }
        }
        Dialect::SqlWhere => {
            let name = format!("\"{}\"", variable.name.replace('"', "\"\""));
            let lits: Vec<String> = names
                .iter()
                .map(|v| format!("'{}'", v.replace('\'', "''")))
                .collect();
            match (negated, lits.as_slice()) {
                (false, [one]) => format!("{} = {}", name, one),
                (true, [one]) => format!("{} <> {}", name, one),
                (false, _) => format!("{} IN ({})", name, lits.join(", ")),
                (true, _) => format!("{} NOT IN ({})", name, lits.join(", ")),
            }
        }
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        if matches!(ch, '\\' | ',' | '{' | '}' | '∈') {
            out.push('\\');
        }
        out.push(ch);
    }
    out
}

/// Text form: header, a `schema <file>` line, then one clause per line. The empty
/// clause is written as `false`.
pub fn write_cnf(cnf: &Cnf, schema: &Schema, schema_file: &str) -> String {
    let mut s = String::new();
    writeln!(s, "{}", CNF_HEADER).unwrap();
    writeln!(s, "schema {}", schema_file).unwrap();
    for c in &cnf.clauses {
        if c.is_empty() {
            s.push_str("false\n");
            continue;
        }
        let atoms: Vec<String> = c
            .atoms()
            .map(|(v, vals)| {
                let var = schema.variable(v);
                let vs: Vec<String> = vals.iter().map(|&i| escape(&var.values[i])).collect();
                format!("{}∈{{{}}}", escape(&var.name), vs.join(","))
            })
            .collect();
        writeln!(s, "{}", atoms.join(" | ")).unwrap();
    }
    s
}

/// Parses the text form against `schema`; returns the CNF and the referenced schema file.
pub fn parse_cnf(text: &str, origin: &str, schema: &Schema) -> Result<(Cnf, String)> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| {
        let l = l.trim();
        !l.is_empty() && !l.starts_with('#')
    });
    match lines.next() {
        Some((_, l)) if l.trim() == CNF_HEADER => {}
        Some((i, _)) => return Err(Error::parse(origin, i + 1, format!("expected header `{}`", CNF_HEADER))),
        None => return Err(Error::parse(origin, 1, format!("expected header `{}`", CNF_HEADER))),
    }
    let schema_file = match lines.next() {
        Some((_, l)) if l.trim().starts_with("schema ") => l.trim()["schema ".len()..].trim().to_string(),
        Some((i, _)) => return Err(Error::parse(origin, i + 1, "expected `schema <file>`")),
        None => return Err(Error::parse(origin, text.lines().count().max(1), "expected `schema <file>`")),
    };
    let mut clauses = Vec::new();
    for (i, line) in lines {
        let line = line.trim();
        if line == "false" {
            clauses.push(Clause::new());
            continue;
        }
        clauses.push(parse_clause(line, schema).map_err(|m| Error::parse(origin, i + 1, m))?);
    }
    Ok((Cnf::new(schema, clauses)?, schema_file))
}

/// Reads a CNF file together with the schema it names, resolved against the file's directory.
pub fn read_cnf(path: &Path) -> Result<(Cnf, Schema)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let origin = path.display().to_string();
    let schema_file = text
        .lines()
        .map(str::trim)
        .find_map(|l| l.strip_prefix("schema "))
        .ok_or_else(|| Error::parse(&origin, 1, "no `schema <file>` line"))?;
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let schema = Schema::read(&dir.join(schema_file.trim()))?;
    let (cnf, _) = parse_cnf(&text, &origin, &schema)?;
    Ok((cnf, schema))
}

fn parse_clause(line: &str, schema: &Schema) -> std::result::Result<Clause, String> {
    // Tokenise into unescaped text runs and structural characters.
    let mut clause = Clause::new();
    let mut chars = line.chars().peekable();
    loop {
        let name = read_text(&mut chars, &['∈']);
        if chars.next() != Some('∈') {
            return Err(format!("expected `∈` after `{}`", name.trim()));
        }
        let name = name.trim();
        let var = schema
            .find(name)
            .ok_or_else(|| format!("unknown variable `{}`", name))?;
        if chars.next() != Some('{') {
            return Err("expected `{`".into());
        }
        let mut vals = Vec::new();
        loop {
            let v = read_text(&mut chars, &[',', '}']);
            let idx = schema
                .value_index(var, &v)
                .ok_or_else(|| format!("unknown value `{}` for variable `{}`", v, name))?;
            vals.push(idx);
            match chars.next() {
                Some(',') => continue,
                Some('}') => break,
                _ => return Err("unterminated value set".into()),
            }
        }
        clause.insert(var, vals);
        while chars.peek() == Some(&' ') {
            chars.next();
        }
        match chars.next() {
            None => break,
            Some('|') => {}
            Some(c) => return Err(format!("unexpected `{}` between atoms", c)),
        }
    }
    Ok(clause)
}

fn read_text(chars: &mut std::iter::Peekable<std::str::Chars<'_>>, stops: &[char]) -> String {
    let mut s = String::new();
    while let Some(&c) = chars.peek() {
        if stops.contains(&c) {
            break;
        }
        chars.next();
        if c == '\\' {
            if let Some(e) = chars.next() {
                s.push(e);
            }
        } else {
            s.push(c);
        }
    }
    s
}
