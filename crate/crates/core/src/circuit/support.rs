use fixedbitset::FixedBitSet;

use super::{Edge, Literal, LogicCircuit, Node, ProbCircuit, Unit};
use crate::error::{Error, Result};

/// Column-major bitsets of a batch of boolean rows: for each variable, the rows where it is true.
#[derive(Clone, Debug)]
pub struct BitColumns {
    rows: usize,
    pos: Vec<FixedBitSet>,
    neg: Vec<FixedBitSet>,
}

impl BitColumns {
    pub fn from_rows(rows: &[Vec<bool>], num_vars: usize) -> Self {
        let mut pos = vec![FixedBitSet::with_capacity(rows.len()); num_vars];
        for (r, x) in rows.iter().enumerate() {
            for (v, &b) in x.iter().enumerate().take(num_vars) {
                if b {
                    pos[v].insert(r);
                }
            }
        }
        let neg = pos
            .iter()
            .map(|p| {
                let mut n = p.clone();
                n.toggle_range(..);
                n
            })
            .collect();
        BitColumns {
            rows: rows.len(),
            pos,
            neg,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn num_vars(&self) -> usize {
        self.pos.len()
    }

    /// Rows where `lit` holds.
    pub fn literal(&self, lit: Literal) -> &FixedBitSet {
        if lit.positive {
            &self.pos[lit.var]
        } else {
            &self.neg[lit.var]
        }
    }

    fn check(&self, num_vars: usize) -> Result<()> {
        if num_vars > self.pos.len() {
            return Err(Error::Scope {
                var: num_vars - 1,
                len: self.pos.len(),
            });
        }
        Ok(())
    }

    pub(crate) fn empty_set(&self) -> FixedBitSet {
        FixedBitSet::with_capacity(self.rows)
    }

    pub(crate) fn full_set(&self) -> FixedBitSet {
        let mut s = FixedBitSet::with_capacity(self.rows);
        s.insert_range(..);
        s
    }
}

impl ProbCircuit {
    /// Rows with strictly positive probability, computed logically over bitsets.
    /// Zero-weight sum edges count as absent.
    pub fn support(&self, cols: &BitColumns) -> Result<FixedBitSet> {
        let Some(root) = self.root() else {
            return Ok(cols.empty_set());
        };
        cols.check(self.num_vars())?;
        let mut vals = Vec::with_capacity(self.len());
        support_values(self, cols, None, &mut vals, 0);
        Ok(vals.swap_remove(root))
    }
}

impl LogicCircuit {
    /// Rows that are models of the theory.
    pub fn models(&self, cols: &BitColumns) -> Result<FixedBitSet> {
        let Some(root) = self.root() else {
            return Ok(cols.empty_set());
        };
        cols.check(self.num_vars())?;
        let mut vals: Vec<FixedBitSet> = Vec::with_capacity(self.len());
        for unit in self.units() {
            let v = match unit {
                Unit::Input(lit) => cols.literal(*lit).clone(),
                Unit::And(c) => and_all(cols, c.iter().map(|&c| &vals[c])),
                Unit::Or(c) => or_all(cols, c.iter().map(|&c| &vals[c])),
            };
            vals.push(v);
        }
        Ok(vals.swap_remove(root))
    }
}

fn and_all<'a>(cols: &BitColumns, sets: impl Iterator<Item = &'a FixedBitSet>) -> FixedBitSet {
    let mut acc = cols.full_set();
    for s in sets {
        acc.intersect_with(s);
    }
    acc
}

fn or_all<'a>(cols: &BitColumns, sets: impl Iterator<Item = &'a FixedBitSet>) -> FixedBitSet {
    let mut acc = cols.empty_set();
    for s in sets {
        acc.union_with(s);
    }
    acc
}

/// Fills `vals[from..]` with per-node supports, optionally treating one edge as removed.
/// Entries below `from` must already hold the supports of the same circuit.
pub(crate) fn support_values(
    pc: &ProbCircuit,
    cols: &BitColumns,
    skip: Option<Edge>,
    vals: &mut Vec<FixedBitSet>,
    from: usize,
) {
    vals.truncate(from);
    for (id, node) in pc.nodes().iter().enumerate().skip(from) {
        let keep = |p: usize| skip != Some((id, p));
        let v = match node {
            Node::Input(lit) => cols.literal(*lit).clone(),
            Node::Product { children } => and_all(
                cols,
                children
                    .iter()
                    .enumerate()
                    .filter(|&(p, _)| keep(p))
                    .map(|(_, &c)| &vals[c]),
            ),
            Node::Sum { children, weights } => or_all(
                cols,
                children
                    .iter()
                    .zip(weights)
                    .enumerate()
                    .filter(|&(p, (_, &w))| keep(p) && w > 0.0)
                    .map(|(_, (&c, _))| &vals[c]),
            ),
        };
        vals.push(v);
    }
}
