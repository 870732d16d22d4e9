//! Truncated majorization orderings on real vectors: partial-sum
//! dominance up to a level l, the matching equality relation, and the
//! weak-majorization test used for membership in scaled permutation hulls.

use serde::Serialize;

use crate::error::{check_finite, invalid, Result};

/// Result of a truncated majorization comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MajorizationReport {
    /// Level the comparison was run at.
    pub l: usize,
    /// Whether every partial sum of x up to l is dominated by y's.
    pub holds: bool,
    /// Largest prefix k <= l on which the partial sums agree within
    /// tolerance (0 when they already differ at k = 1).
    pub equal_upto: usize,
    pub partial_sums_x: Vec<f64>,
    pub partial_sums_y: Vec<f64>,
}

fn sorted_descending(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    // Stable sort keyed on value only; equal entries keep input order.
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    s
}

fn partial_sums(v: &[f64]) -> Vec<f64> {
    v.iter()
        .scan(0.0, |acc, &x| {
            *acc += x;
            Some(*acc)
        })
        .collect()
}

fn validate_pair(x: &[f64], y: &[f64], l: usize) -> Result<()> {
    check_finite("x", x)?;
    check_finite("y", y)?;
    if x.is_empty() {
        return Err(invalid("majorization inputs must be non-empty"));
    }
    if x.len() != y.len() {
        return Err(invalid(format!(
            "majorization inputs must have equal length, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    if l == 0 || l > x.len() {
        return Err(invalid(format!("level {l} out of range 1..={}", x.len())));
    }
    Ok(())
}

/// Tests x <=_l y: for every k <= l the sum of the k largest entries of x
/// is at most the corresponding sum for y (within tol).
pub fn l_majorizes(x: &[f64], y: &[f64], l: usize, tol: f64) -> Result<MajorizationReport> {
    validate_pair(x, y, l)?;
    let sx = partial_sums(&sorted_descending(x));
    let sy = partial_sums(&sorted_descending(y));
    let holds = (0..l).all(|k| sx[k] <= sy[k] + tol);
    let mut equal_upto = 0;
    for k in 0..l {
        if (sx[k] - sy[k]).abs() <= tol {
            equal_upto = k + 1;
        } else {
            break;
        }
    }
    Ok(MajorizationReport { l, holds, equal_upto, partial_sums_x: sx, partial_sums_y: sy })
}

/// Tests the equality relation x =_l y: partial sums agree for every
/// k <= l.
pub fn asymp_l(x: &[f64], y: &[f64], l: usize, tol: f64) -> Result<bool> {
    Ok(l_majorizes(x, y, l, tol)?.equal_upto == l)
}

/// Membership test for the convex hull of {(delta_i z_pi(i))}: all sign
/// patterns delta in {0,1}^m and permutations pi. For non-negative x and z
/// this hull is exactly the set of vectors weakly majorized by z, so the
/// test reduces to partial-sum dominance of the descending rearrangements.
pub fn weak_hull_test(x: &[f64], z: &[f64], tol: f64) -> Result<bool> {
    check_finite("x", x)?;
    check_finite("z", z)?;
    if x.is_empty() || x.len() != z.len() {
        return Err(invalid("weak hull test needs non-empty inputs of equal length"));
    }
    if x.iter().chain(z.iter()).any(|&v| v < 0.0) {
        return Err(invalid("weak hull test requires non-negative entries"));
    }
    let sx = partial_sums(&sorted_descending(x));
    let sz = partial_sums(&sorted_descending(z));
    Ok((0..x.len()).all(|k| sx[k] <= sz[k] + tol))
}
