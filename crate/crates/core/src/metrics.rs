use std::fmt;

use crate::data::ExampleSet;
use crate::error::{Error, Result};

/// Confusion counts of a predicted set against a target set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalReport {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Scores `predicted` against `target`, both subsets of a universe of `universe` examples.
///
/// When both sets are empty every score is 1; otherwise an empty denominator gives 0.
pub fn score(predicted: &ExampleSet, target: &ExampleSet, universe: usize) -> Result<EvalReport> {
    for s in [predicted, target] {
        if s.universe() != universe {
            return Err(Error::Subset {
                expected: universe,
                got: s.universe(),
            });
        }
    }
    let tp = predicted.intersection_len(target);
    let fp = predicted.len() - tp;
    let fn_ = target.len() - tp;
    let tn = universe - tp - fp - fn_;
    let vacuous = tp + fp + fn_ == 0;
    let ratio = |num: usize, den: usize| {
        if den > 0 {
            num as f64 / den as f64
        } else if vacuous {
            1.0
        } else {
            0.0
        }
    };
    Ok(EvalReport {
        tp,
        fp,
        fn_,
        tn,
        precision: ratio(tp, tp + fp),
        recall: ratio(tp, tp + fn_),
        f1: ratio(2 * tp, 2 * tp + fp + fn_),
    })
}

/// f1 alone, for inner search loops.
pub(crate) fn f1(predicted: &ExampleSet, target: &ExampleSet) -> f64 {
    let tp = predicted.intersection_len(target);
    let den = predicted.len() + target.len();
    if den == 0 {
        1.0
    } else {
        2.0 * tp as f64 / den as f64
    }
}

impl fmt::Display for EvalReport {
    /// Stable `key: value` block.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "tp: {}", self.tp)?;
        writeln!(f, "fp: {}", self.fp)?;
        writeln!(f, "fn: {}", self.fn_)?;
        writeln!(f, "tn: {}", self.tn)?;
        writeln!(f, "precision: {:.5}", self.precision)?;
        writeln!(f, "recall: {:.5}", self.recall)?;
        writeln!(f, "f1: {:.5}", self.f1)
    }
}
