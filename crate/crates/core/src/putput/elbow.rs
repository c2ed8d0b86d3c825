use crate::circuit::ProbCircuit;
use crate::data::{log_likelihoods, Database};
use crate::error::{Error, Result};

/// Fewest examples that must drop out of `f` within one window for a candidate to count
/// as a cliff rather than noise.
const MIN_DROP: usize = 4;

/// Threshold from the likelihood profile `f(x) = #{p > x}`, on the linear probability scale.
pub fn elbow_threshold(pc: &ProbCircuit, db: &Database, epsilon: f64) -> Result<f64> {
    let values: Vec<f64> = log_likelihoods(pc, db)?.into_iter().map(f64::exp).collect();
    elbow_from_values(&values, epsilon)
}

/// The same rule over log-likelihoods, with `epsilon` in nats. Returns `ln t`.
pub fn elbow_threshold_log(pc: &ProbCircuit, db: &Database, epsilon: f64) -> Result<f64> {
    let values: Vec<f64> = log_likelihoods(pc, db)?
        .into_iter()
        .filter(|v| v.is_finite())
        .collect();
    elbow_from_values(&values, epsilon)
}

/// `(x, f(x))` for every distinct value `x`, ascending.
pub fn likelihood_profile(values: &[f64]) -> Vec<(f64, usize)> {
    let sorted = sorted(values);
    let mut out: Vec<(f64, usize)> = Vec::new();
    for (i, &v) in sorted.iter().enumerate() {
        match out.last_mut() {
            Some(last) if last.0 == v => last.1 = sorted.len() - i - 1,
            _ => out.push((v, sorted.len() - i - 1)),
        }
    }
    out
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut s: Vec<f64> = values.iter().copied().filter(|v| !v.is_nan()).collect();
    s.sort_by(f64::total_cmp);
    s
}

/// Scans the distinct values `v` from the top down and returns a threshold just above
/// the first cliff: at least [`MIN_DROP`] values in `(v - ε, v]`, fewer than a quarter of
/// that in `(v, v + ε]`, and, when that window is not empty, the next window
/// `(v + ε, v + 2ε]` holding more than a quarter of it. The returned threshold is the
/// midpoint between `v` and the next distinct value, so the examples above the cliff are
/// exactly those with `p >= t`. The largest value is never a candidate.
pub fn elbow_from_values(values: &[f64], epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::Param(format!("epsilon must be positive, got {}", epsilon)));
    }
    let s = sorted(values);
    if s.is_empty() {
        return Err(Error::Data("no likelihood values to scan".into()));
    }
    // #{x in (a, b]}
    let count = |a: f64, b: f64| s.partition_point(|&x| x <= b) - s.partition_point(|&x| x <= a);
    let profile = likelihood_profile(&s);
    for w in profile.windows(2).rev() {
        let (v, next) = (w[0].0, w[1].0);
        let below = count(v - epsilon, v);
        if below < MIN_DROP {
            continue;
        }
        let above = count(v, v + epsilon);
        if 4 * above >= below {
            continue;
        }
        if above > 0 && 4 * count(v + epsilon, v + 2.0 * epsilon) <= above {
            continue;
        }
        return Ok(v + (next - v) / 2.0);
    }
    Err(Error::NoElbow { profile })
}
