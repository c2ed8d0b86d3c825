//! Catalog databases over multi-valued variables and their one-hot boolean expansion.
//!
//! Boolean variable ids are laid out in contiguous blocks, one block per variable in
//! schema order, with values in schema (first-seen) order inside a block.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use fixedbitset::FixedBitSet;

use crate::circuit::{BitColumns, ProbCircuit};
use crate::error::{Error, Result};

const WIDE_VARIABLE: usize = 256;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Variable {
    pub name: String,
    pub values: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Schema {
    variables: Vec<Variable>,
    offsets: Vec<usize>,
    lookup: Vec<HashMap<String, usize>>,
}

impl Schema {
    pub fn new(variables: Vec<Variable>) -> Result<Self> {
        let mut names = HashSet::new();
        let mut offsets = Vec::with_capacity(variables.len());
        let mut lookup = Vec::with_capacity(variables.len());
        let mut next = 0;
        for var in &variables {
            if !names.insert(var.name.as_str()) {
                return Err(Error::Data(format!("duplicate variable `{}`", var.name)));
            }
            if var.values.is_empty() {
                return Err(Error::Data(format!("variable `{}` has no values", var.name)));
            }
            if var.values.len() > WIDE_VARIABLE {
                log::warn!(
                    "variable `{}` has {} values; its one-hot block will be wide",
                    var.name,
                    var.values.len()
                );
            }
            let mut map = HashMap::with_capacity(var.values.len());
            for (i, v) in var.values.iter().enumerate() {
                if map.insert(v.clone(), i).is_some() {
                    return Err(Error::Data(format!(
                        "variable `{}` lists value `{}` twice",
                        var.name, v
                    )));
                }
            }
            offsets.push(next);
            next += var.values.len();
            lookup.push(map);
        }
        Ok(Schema {
            variables,
            offsets,
            lookup,
        })
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, var: usize) -> &Variable {
        &self.variables[var]
    }

    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn cardinality(&self, var: usize) -> usize {
        self.variables[var].values.len()
    }

    pub fn find(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    pub fn value_index(&self, var: usize, value: &str) -> Option<usize> {
        self.lookup[var].get(value).copied()
    }

    /// Size of the one-hot expansion.
    pub fn num_bool_vars(&self) -> usize {
        self.offsets
            .last()
            .map_or(0, |o| o + self.variables.last().unwrap().values.len())
    }

    pub fn bool_id(&self, var: usize, value: usize) -> usize {
        debug_assert!(value < self.cardinality(var));
        self.offsets[var] + value
    }

    /// Inverse of [`Schema::bool_id`].
    pub fn decode(&self, bool_id: usize) -> Option<(usize, usize)> {
        if bool_id >= self.num_bool_vars() {
            return None;
        }
        let var = self.offsets.partition_point(|&o| o <= bool_id) - 1;
        Some((var, bool_id - self.offsets[var]))
    }

    /// `name=value` label of a boolean variable.
    pub fn bool_name(&self, bool_id: usize) -> String {
        match self.decode(bool_id) {
            Some((v, i)) => format!("{}={}", self.variables[v].name, self.variables[v].values[i]),
            None => format!("x{}", bool_id),
        }
    }

    /// Sidecar text: one `<name>: <v1>|<v2>|...` line per variable.
    pub fn to_text(&self) -> Result<String> {
        let mut s = String::new();
        for var in &self.variables {
            if var.name.contains([':', '\n']) {
                return Err(Error::Data(format!(
                    "variable name `{}` cannot be written to a schema file",
                    var.name
                )));
            }
            if let Some(v) = var.values.iter().find(|v| v.contains(['|', '\n'])) {
                return Err(Error::Data(format!(
                    "value `{}` of `{}` cannot be written to a schema file",
                    v, var.name
                )));
            }
            s.push_str(&var.name);
            s.push_str(": ");
            s.push_str(&var.values.join("|"));
            s.push('\n');
        }
        Ok(s)
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut vars = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (name, values) = line
                .split_once(':')
                .ok_or_else(|| Error::parse(origin, i + 1, "expected `<name>: <v1>|<v2>|...`"))?;
            let values: Vec<String> = values.split('|').map(|v| v.trim().to_string()).collect();
            if values.iter().any(|v| v.is_empty()) {
                return Err(Error::parse(origin, i + 1, "empty value"));
            }
            vars.push(Variable {
                name: name.trim().to_string(),
                values,
            });
        }
        Schema::new(vars).map_err(|e| Error::parse(origin, 0, e.to_string()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Schema::parse(&text, &path.display().to_string())
    }
}

/// One value index per schema variable.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Example(pub Vec<usize>);

impl Example {
    pub fn value(&self, var: usize) -> usize {
        self.0[var]
    }
}

/// One-hot expansion of `example`.
pub fn binarize(example: &Example, schema: &Schema) -> Result<Vec<bool>> {
    if example.0.len() != schema.len() {
        return Err(Error::SchemaMismatch(format!(
            "example has {} values, schema has {} variables",
            example.0.len(),
            schema.len()
        )));
    }
    let mut bits = vec![false; schema.num_bool_vars()];
    for (var, &value) in example.0.iter().enumerate() {
        if value >= schema.cardinality(var) {
            return Err(Error::Data(format!(
                "unknown value index {} for variable `{}`",
                value,
                schema.variable(var).name
            )));
        }
        bits[schema.bool_id(var, value)] = true;
    }
    Ok(bits)
}

/// Inverse of [`binarize`]; fails unless every block has exactly one true bit.
pub fn unbinarize(bits: &[bool], schema: &Schema) -> Result<Example> {
    if bits.len() != schema.num_bool_vars() {
        return Err(Error::SchemaMismatch(format!(
            "vector of length {} for a schema expanding to {}",
            bits.len(),
            schema.num_bool_vars()
        )));
    }
    let mut values = Vec::with_capacity(schema.len());
    for var in 0..schema.len() {
        let block = &bits[schema.bool_id(var, 0)..schema.bool_id(var, 0) + schema.cardinality(var)];
        let mut ones = block.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i);
        match (ones.next(), ones.next()) {
            (Some(i), None) => values.push(i),
            _ => {
                return Err(Error::Data(format!(
                    "block of `{}` is not one-hot",
                    schema.variable(var).name
                )))
            }
        }
    }
    Ok(Example(values))
}

/// A set of unique examples conforming to a schema.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Database {
    schema: Schema,
    examples: Vec<Example>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub duplicates: usize,
}

impl Database {
    /// Builds a database, dropping repeated examples (first occurrence wins).
    pub fn new(schema: Schema, examples: Vec<Example>) -> Result<(Self, LoadReport)> {
        let mut seen = HashSet::with_capacity(examples.len());
        let mut unique = Vec::with_capacity(examples.len());
        let mut duplicates = 0;
        for e in examples {
            binarize(&e, &schema)?;
            if seen.insert(e.clone()) {
                unique.push(e);
            } else {
                duplicates += 1;
            }
        }
        if duplicates > 0 {
            log::warn!("dropped {} duplicate examples", duplicates);
        }
        Ok((
            Database {
                schema,
                examples: unique,
            },
            LoadReport { duplicates },
        ))
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn value_str(&self, row: usize, var: usize) -> &str {
        &self.schema.variable(var).values[self.examples[row].value(var)]
    }

    /// One-hot rows, one per example.
    pub fn rows(&self) -> Vec<Vec<bool>> {
        self.examples
            .iter()
            .map(|e| binarize(e, &self.schema).expect("database examples conform to schema"))
            .collect()
    }

    pub fn columns(&self) -> BitColumns {
        BitColumns::from_rows(&self.rows(), self.schema.num_bool_vars())
    }

    pub fn index_of(&self) -> HashMap<&Example, usize> {
        self.examples.iter().enumerate().map(|(i, e)| (e, i)).collect()
    }

    /// Restriction to the given rows, in row order.
    pub fn subset(&self, set: &ExampleSet) -> Vec<Example> {
        set.iter().map(|i| self.examples[i].clone()).collect()
    }

    /// Parses CSV text. With `schema == None` the schema is inferred as the distinct
    /// values of each column in first-seen order.
    pub fn from_csv_reader<R: std::io::Read>(
        reader: R,
        origin: &str,
        schema: Option<Schema>,
    ) -> Result<(Self, LoadReport)> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if let Some(s) = &schema {
            let names: Vec<&str> = s.variables().iter().map(|v| v.name.as_str()).collect();
            if names != header.iter().map(String::as_str).collect::<Vec<_>>() {
                return Err(Error::SchemaMismatch(format!(
                    "{}: header {:?} does not match schema variables {:?}",
                    origin, header, names
                )));
            }
        }
        let mut records = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row = i + 1;
            if rec.len() != header.len() {
                return Err(Error::Data(format!(
                    "{}: row {} has {} fields, header has {}",
                    origin,
                    row,
                    rec.len(),
                    header.len()
                )));
            }
            if let Some(col) = rec.iter().position(str::is_empty) {
                return Err(Error::Data(format!(
                    "{}: row {} column `{}` is empty",
                    origin, row, header[col]
                )));
            }
            records.push(rec.iter().map(str::to_string).collect::<Vec<String>>());
        }

        let schema = match schema {
            Some(s) => s,
            None => {
                let mut vars: Vec<Variable> = header
                    .iter()
                    .map(|n| Variable {
                        name: n.clone(),
                        values: Vec::new(),
                    })
                    .collect();
                let mut seen: Vec<HashSet<&str>> = vec![HashSet::new(); header.len()];
                for rec in &records {
                    for (c, v) in rec.iter().enumerate() {
                        if seen[c].insert(v) {
                            vars[c].values.push(v.clone());
                        }
                    }
                }
                Schema::new(vars)?
            }
        };
        let mut examples = Vec::with_capacity(records.len());
        for (i, rec) in records.iter().enumerate() {
            let mut values = Vec::with_capacity(rec.len());
            for (c, v) in rec.iter().enumerate() {
                values.push(schema.value_index(c, v).ok_or_else(|| {
                    Error::Data(format!(
                        "{}: row {} column `{}`: value `{}` is not in the schema",
                        origin,
                        i + 1,
                        header[c],
                        v
                    ))
                })?);
            }
            examples.push(Example(values));
        }
        Database::new(schema, examples)
    }

    pub fn load_csv(path: &Path, schema: Option<Schema>) -> Result<(Self, LoadReport)> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Database::from_csv_reader(f, &path.display().to_string(), schema)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(self.schema.variables().iter().map(|v| v.name.as_str()))?;
        for row in 0..self.len() {
            w.write_record((0..self.schema.len()).map(|v| self.value_str(row, v)))?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::Data(format!("csv writer: {}", e)))?;
        Ok(String::from_utf8(bytes).expect("csv output of utf-8 input is utf-8"))
    }

    /// Reads an example-set file: either newline-separated row indices or a CSV
    /// with the database header whose rows are looked up by value.
    pub fn read_example_set(&self, path: &Path) -> Result<ExampleSet> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.parse_example_set(&text, &path.display().to_string())
    }

    pub fn parse_example_set(&self, text: &str, origin: &str) -> Result<ExampleSet> {
        let mut set = ExampleSet::new(self.len());
        let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
        let is_index = first.trim().parse::<usize>().is_ok();
        if is_index || first.trim().is_empty() {
            for (i, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() {
                    continue;
                }
                let idx: usize = line
                    .parse()
                    .map_err(|_| Error::parse(origin, i + 1, format!("bad row index `{}`", line)))?;
                if idx >= self.len() {
                    return Err(Error::parse(
                        origin,
                        i + 1,
                        format!("row index {} outside database of {} examples", idx, self.len()),
                    ));
                }
                set.insert(idx);
            }
            return Ok(set);
        }
        let (sub, _) = Database::from_csv_reader(text.as_bytes(), origin, Some(self.schema.clone()))?;
        let index = self.index_of();
        for e in sub.examples() {
            let idx = index.get(e).ok_or_else(|| {
                Error::Data(format!("{}: example {:?} is not in the database", origin, e.0))
            })?;
            set.insert(*idx);
        }
        Ok(set)
    }
}

/// A subset of a database's rows.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ExampleSet(FixedBitSet);

impl ExampleSet {
    pub fn new(universe: usize) -> Self {
        ExampleSet(FixedBitSet::with_capacity(universe))
    }

    pub fn full(universe: usize) -> Self {
        let mut s = FixedBitSet::with_capacity(universe);
        s.insert_range(..);
        ExampleSet(s)
    }

    pub fn from_indices(universe: usize, indices: impl IntoIterator<Item = usize>) -> Self {
        let mut s = ExampleSet::new(universe);
        for i in indices {
            s.insert(i);
        }
        s
    }

    pub fn from_bits(bits: FixedBitSet) -> Self {
        ExampleSet(bits)
    }

    pub fn bits(&self) -> &FixedBitSet {
        &self.0
    }

    pub fn universe(&self) -> usize {
        self.0.len()
    }

    pub fn insert(&mut self, i: usize) {
        self.0.insert(i)
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.contains(i)
    }

    pub fn len(&self) -> usize {
        self.0.count_ones(..)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_clear()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.ones()
    }

    pub fn is_subset(&self, other: &ExampleSet) -> bool {
        self.0.is_subset(&other.0)
    }

    pub fn intersection_len(&self, other: &ExampleSet) -> usize {
        self.0.intersection_count(&other.0)
    }

    pub fn to_index_text(&self) -> String {
        self.iter().map(|i| format!("{}\n", i)).collect()
    }
}

/// Examples whose probability is at least `t`.
pub fn compute_target(pc: &ProbCircuit, db: &Database, t: f64) -> Result<ExampleSet> {
    compute_target_log(pc, db, t.ln())
}

/// Examples whose log-probability is at least `log_t`; `-inf` selects everything.
pub fn compute_target_log(pc: &ProbCircuit, db: &Database, log_t: f64) -> Result<ExampleSet> {
    let lls = log_likelihoods(pc, db)?;
    Ok(ExampleSet::from_indices(
        db.len(),
        lls.iter()
            .enumerate()
            .filter(|(_, &ll)| ll >= log_t)
            .map(|(i, _)| i),
    ))
}

/// Log-likelihood of every database example.
pub fn log_likelihoods(pc: &ProbCircuit, db: &Database) -> Result<Vec<f64>> {
    if pc.num_vars() > db.schema().num_bool_vars() {
        return Err(Error::SchemaMismatch(format!(
            "circuit references boolean variable {} but the schema expands to {}",
            pc.num_vars() - 1,
            db.schema().num_bool_vars()
        )));
    }
    pc.log_likelihoods(&db.rows())
}
