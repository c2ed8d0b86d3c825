//! Probabilistic and logical circuits over boolean variables.
//!
//! Both circuit kinds live in an index arena where every child is declared
//! before its parent, so the arena order is a topological order and every
//! pass over the circuit is a plain forward (or backward) loop.

mod io;
mod logic;
mod prob;
mod support;

pub use io::{parse_lc, parse_pc, read_lc, read_pc, write_lc, write_pc};
pub use logic::{LogicCircuit, Unit};
pub use prob::{Node, ProbCircuit, Violation, ViolationKind};
pub use support::BitColumns;
pub(crate) use prob::log_sum_exp;
pub(crate) use support::support_values;

use std::fmt;

pub type NodeId = usize;

/// A sum edge or product edge, addressed by parent node and child position.
pub type Edge = (NodeId, usize);

/// A signed reference to a boolean variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal {
    pub var: usize,
    pub positive: bool,
}

impl Literal {
    pub fn pos(var: usize) -> Self {
        Literal {
            var,
            positive: true,
        }
    }

    pub fn neg(var: usize) -> Self {
        Literal {
            var,
            positive: false,
        }
    }

    pub fn negate(self) -> Self {
        Literal {
            positive: !self.positive,
            ..self
        }
    }

    /// The indicator f(x) of this literal; `x[var]` must exist.
    #[inline]
    pub fn holds(&self, x: &[bool]) -> bool {
        x[self.var] == self.positive
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.positive {
            write!(f, "x{}", self.var)
        } else {
            write!(f, "-x{}", self.var)
        }
    }
}
