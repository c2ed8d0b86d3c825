use super::{Literal, Node, NodeId, ProbCircuit};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Unit {
    Input(Literal),
    /// An AND with no children is true.
    And(Vec<NodeId>),
    /// An OR with no children is false.
    Or(Vec<NodeId>),
}

impl Unit {
    pub fn children(&self) -> &[NodeId] {
        match self {
            Unit::Input(_) => &[],
            Unit::And(c) | Unit::Or(c) => c,
        }
    }
}

/// A logical circuit. `root == None` is the constant false theory.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LogicCircuit {
    units: Vec<Unit>,
    root: Option<NodeId>,
    num_vars: usize,
}

impl LogicCircuit {
    pub fn new(units: Vec<Unit>, root: NodeId) -> Result<Self> {
        if root >= units.len() {
            return Err(Error::Arena(format!(
                "root {} outside arena of {} units",
                root,
                units.len()
            )));
        }
        let mut num_vars = 0;
        for (id, unit) in units.iter().enumerate() {
            if let Unit::Input(lit) = unit {
                num_vars = num_vars.max(lit.var + 1);
            }
            if let Some(&c) = unit.children().iter().find(|&&c| c >= id) {
                return Err(Error::Arena(format!(
                    "unit {} references child {} that is not declared before it",
                    id, c
                )));
            }
        }
        Ok(LogicCircuit {
            units,
            root: Some(root),
            num_vars,
        })
    }

    pub fn falsum() -> Self {
        LogicCircuit {
            units: Vec::new(),
            root: None,
            num_vars: 0,
        }
    }

    pub fn root(&self) -> Option<NodeId> {
        self.root
    }

    pub fn units(&self) -> &[Unit] {
        &self.units
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.root.is_none()
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn evaluate(&self, x: &[bool]) -> Result<bool> {
        let Some(root) = self.root else {
            return Ok(false);
        };
        if x.len() < self.num_vars {
            return Err(Error::Scope {
                var: self.num_vars - 1,
                len: x.len(),
            });
        }
        let mut out: Vec<bool> = Vec::with_capacity(self.units.len());
        for unit in &self.units {
            let v = match unit {
                Unit::Input(lit) => lit.holds(x),
                Unit::And(c) => c.iter().all(|&c| out[c]),
                Unit::Or(c) => c.iter().any(|&c| out[c]),
            };
            out.push(v);
        }
        Ok(out[root])
    }

    /// Renders the theory as a nested formula; inner units with more than one
    /// child are parenthesised, except at the root.
    pub fn render(&self, name: impl Fn(usize) -> String) -> String {
        let Some(root) = self.root else {
            return "⊥".to_string();
        };
        let mut text: Vec<String> = Vec::with_capacity(self.units.len());
        for unit in &self.units {
            let s = match unit {
                Unit::Input(lit) => {
                    if lit.positive {
                        name(lit.var)
                    } else {
                        format!("-{}", name(lit.var))
                    }
                }
                Unit::And(c) | Unit::Or(c) => {
                    let (op, unit_val) = if matches!(unit, Unit::And(_)) {
                        ("∧", "⊤")
                    } else {
                        ("∨", "⊥")
                    };
                    match c.len() {
                        0 => unit_val.to_string(),
                        1 => text[c[0]].clone(),
                        _ => {
                            let parts: Vec<&str> = c.iter().map(|&c| text[c].as_str()).collect();
                            format!("({})", parts.join(op))
                        }
                    }
                }
            };
            text.push(s);
        }
        let mut s = text.swap_remove(root);
        if matches!(&self.units[root], Unit::And(c) | Unit::Or(c) if c.len() > 1) {
            s = s[1..s.len() - 1].to_string();
        }
        s
    }
}

impl ProbCircuit {
    /// The logical circuit whose models are the positive-probability assignments:
    /// sums become ORs, products ANDs, weights are dropped. Requires every retained
    /// sum weight to be nonzero (call [`ProbCircuit::simplify`] first).
    pub fn to_logic(&self) -> Result<LogicCircuit> {
        let Some(root) = self.root() else {
            return Ok(LogicCircuit::falsum());
        };
        let mut units = Vec::with_capacity(self.len());
        for (id, node) in self.nodes().iter().enumerate() {
            units.push(match node {
                Node::Input(lit) => Unit::Input(*lit),
                Node::Product { children } => Unit::And(children.clone()),
                Node::Sum { children, weights } => {
                    if let Some(p) = weights.iter().position(|&w| !(w > 0.0)) {
                        return Err(Error::Arena(format!(
                            "sum node {} has non-positive weight at edge {}; simplify first",
                            id, p
                        )));
                    }
                    Unit::Or(children.clone())
                }
            });
        }
        LogicCircuit::new(units, root)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn negated_input() {
        let lc = LogicCircuit::new(vec![Unit::Input(Literal::neg(0))], 0).unwrap();
        assert!(lc.evaluate(&[false]).unwrap());
    }

    #[test]
    fn and_of_inputs() {
        let lc = LogicCircuit::new(
            vec![
                Unit::Input(Literal::pos(0)),
                Unit::Input(Literal::pos(1)),
                Unit::And(vec![0, 1]),
            ],
            2,
        )
        .unwrap();
        assert!(!lc.evaluate(&[true, false]).unwrap());
        assert!(lc.evaluate(&[true, true]).unwrap());
    }

    #[test]
    fn single_input_converts_to_single_unit() {
        let pc = ProbCircuit::new(vec![Node::Input(Literal::pos(2))], 0).unwrap();
        let lc = pc.to_logic().unwrap();
        assert_eq!(lc.units(), &[Unit::Input(Literal::pos(2))]);
    }

    #[test]
    fn render_constants() {
        assert_eq!(LogicCircuit::falsum().render(|v| v.to_string()), "⊥");
        let lc = LogicCircuit::new(vec![Unit::And(vec![])], 0).unwrap();
        assert_eq!(lc.render(|v| v.to_string()), "⊤");
    }
}
