//! Singular value machinery: decompositions of small Jacobians with
//! reproducible frames, the area density, and the classification of
//! singular value vectors against the convexity region and its boundary.

mod jacobi;

use serde::{Deserialize, Serialize};

use crate::error::{check_finite, domain, invalid, Result};
use crate::mat::Mat;

/// Singular values below this are treated as rank-deficient directions.
pub const RANK_TOL: f64 = 1e-10;

/// Default tolerance for region classification.
pub const REGION_TOL: f64 = 1e-9;

/// Non-negative singular values sorted in descending order.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct SingularValueVector {
    values: Vec<f64>,
}

impl SingularValueVector {
    /// Accepts an already descending-sorted vector of non-negative values.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        check_finite("singular values", &values)?;
        if values.is_empty() {
            return Err(invalid("singular value vector must be non-empty"));
        }
        if values.iter().any(|&x| x < 0.0) {
            return Err(invalid("singular values must be non-negative"));
        }
        if values.windows(2).any(|w| w[0] < w[1]) {
            return Err(invalid("singular values must be sorted in descending order"));
        }
        Ok(SingularValueVector { values })
    }

    /// Sorts the input descending; entries must still be non-negative.
    pub fn from_unsorted(mut values: Vec<f64>) -> Result<Self> {
        check_finite("singular values", &values)?;
        values.sort_by(|a, b| b.partial_cmp(a).unwrap());
        Self::new(values)
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Largest singular value.
    pub fn top(&self) -> f64 {
        self.values[0]
    }
}

/// Orthonormal domain and target frames attached to a decomposition
/// J = sum_i lambda_i b_i a_i^T. Columns `i < rank` of `target` are the
/// images of the corresponding domain directions; the remaining columns
/// complete an orthonormal basis deterministically.
#[derive(Debug, Clone)]
pub struct SingularFrames {
    domain: Mat,
    target: Mat,
    rank: usize,
}

impl SingularFrames {
    pub fn domain(&self) -> &Mat {
        &self.domain
    }

    pub fn target(&self) -> &Mat {
        &self.target
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Rebuilds the matrix the frames were computed from.
    pub fn reconstruct(&self, lambda: &SingularValueVector) -> Mat {
        let n = self.target.rows();
        let m = self.domain.rows();
        let mut j = Mat::zeros(n, m);
        for (i, &l) in lambda.values().iter().enumerate() {
            if i >= m.min(n) {
                break;
            }
            for r in 0..n {
                for c in 0..m {
                    j[(r, c)] += l * self.target[(r, i)] * self.domain[(c, i)];
                }
            }
        }
        j
    }
}

/// Decomposition of an n x m Jacobian (any finite shape; the singular
/// value vector always has m entries, padded with zeros when n < m).
/// Returns descending singular values and reproducible frames.
pub fn singular_values(j: &Mat) -> Result<(SingularValueVector, SingularFrames)> {
    if !j.is_finite() {
        return Err(invalid("jacobian contains non-finite entries"));
    }
    let n = j.rows();
    let (eigs, a_frame) = jacobi::symmetric_eigen(&j.gram());
    let lambda: Vec<f64> = eigs.iter().map(|&e| e.max(0.0).sqrt()).collect();
    let mut rank = lambda.iter().filter(|&&l| l > RANK_TOL).count().min(n);

    let mut target = Mat::zeros(n, n);
    let mut filled = 0;
    for i in 0..rank {
        let mut b = j.apply(&a_frame.col(i));
        for x in &mut b {
            *x /= lambda[i];
        }
        // Directions whose singular value is pure Gram-matrix noise can
        // produce image vectors far from unit length or nearly dependent
        // on earlier columns. Truncate the reliable rank there; the
        // completion below fills the rest deterministically.
        let res = residual_norm(&target, filled, &mut b);
        if res < 0.25 {
            rank = i;
            break;
        }
        let res = residual_norm(&target, filled, &mut b);
        for x in b.iter_mut() {
            *x /= res;
        }
        target.set_col(filled, &b);
        filled += 1;
    }
    // Complete the target frame: repeatedly take the standard basis vector
    // with the largest residual after projecting out the accepted columns.
    // Ties break toward the lower index, so completion is deterministic.
    while filled < n {
        let mut best: Option<(f64, Vec<f64>)> = None;
        for k in 0..n {
            let mut cand = vec![0.0; n];
            cand[k] = 1.0;
            let res = residual_norm(&target, filled, &mut cand);
            if best.as_ref().map_or(true, |(b, _)| res > *b) {
                best = Some((res, cand));
            }
        }
        let (_, mut cand) = best.expect("target dimension is positive");
        orthonormalize_against(&target, filled, &mut cand);
        target.set_col(filled, &cand);
        filled += 1;
    }

    let sv = SingularValueVector::new(lambda)
        .expect("eigenvalues of a Gram matrix sort into a valid singular value vector");
    Ok((sv, SingularFrames { domain: a_frame, target, rank }))
}

/// Projects out the first `count` columns of `frame` (two passes), then
/// normalizes.
fn orthonormalize_against(frame: &Mat, count: usize, v: &mut [f64]) {
    for _ in 0..2 {
        for c in 0..count {
            let col = frame.col(c);
            let proj = crate::mat::dot(&col, v);
            for (x, y) in v.iter_mut().zip(&col) {
                *x -= proj * y;
            }
        }
    }
    let norm = crate::mat::norm2(v);
    debug_assert!(norm > 1e-8, "frame completion hit a degenerate candidate");
    for x in v.iter_mut() {
        *x /= norm;
    }
}

fn residual_norm(frame: &Mat, count: usize, v: &mut [f64]) -> f64 {
    for c in 0..count {
        let col = frame.col(c);
        let proj = crate::mat::dot(&col, v);
        for (x, y) in v.iter_mut().zip(&col) {
            *x -= proj * y;
        }
    }
    crate::mat::norm2(v)
}

/// Area density of a graph differential with the given singular values:
/// the product of sqrt(1 + lambda_i^2).
pub fn area_density(lambda: &SingularValueVector) -> f64 {
    area_density_at(lambda.values())
}

/// Same as [`area_density`] on a raw point. The expression is symmetric
/// and even in each coordinate, so evaluation does not require a sorted or
/// non-negative input (finite-difference stencils rely on that).
pub fn area_density_at(lambda: &[f64]) -> f64 {
    lambda.iter().map(|l| (1.0 + l * l).sqrt()).product()
}

/// The degenerate-Hessian indicator of the convexity region:
/// prod_i (1 - lambda_i^2) + sum_i lambda_i^2 prod_{j != i} (1 - lambda_j^2).
/// Positive on the region, zero on the relevant boundary strata.
pub fn psi(lambda: &SingularValueVector) -> f64 {
    psi_at(lambda.values())
}

/// [`psi`] on a raw point (symmetric and even in each coordinate).
pub fn psi_at(lambda: &[f64]) -> f64 {
    let full: f64 = lambda.iter().map(|l| 1.0 - l * l).product();
    let mut acc = full;
    for i in 0..lambda.len() {
        let li2 = lambda[i] * lambda[i];
        let mut partial = li2;
        for (j, l) in lambda.iter().enumerate() {
            if j != i {
                partial *= 1.0 - l * l;
            }
        }
        acc += partial;
    }
    acc
}

/// sum_i 1/(1 - x_i^2) over a tail of singular values, defined for entries
/// in [0, 1).
pub fn h_value(tail: &[f64]) -> Result<f64> {
    check_finite("h_value input", tail)?;
    for &x in tail {
        if x < 0.0 {
            return Err(domain(format!("h_value entry {x} is negative")));
        }
        if x >= 1.0 {
            return Err(domain(format!("h_value entry {x} is outside [0, 1)")));
        }
    }
    Ok(tail.iter().map(|x| 1.0 / (1.0 - x * x)).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegionStatus {
    Interior,
    Boundary,
    Exterior,
}

/// Which boundary stratum a boundary verdict sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryCase {
    /// lambda_1 = lambda_2 = 1.
    TwoOnes,
    /// lambda_1 > 1 with lambda_1 lambda_2 = 1.
    PairwiseProductOne,
    /// lambda_1 > 1 with 1/(1 - lambda_1^2) + H(tail) = m - 1.
    HEquality,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionVerdict {
    pub status: RegionStatus,
    pub boundary_case: Option<BoundaryCase>,
    pub psi: f64,
    /// 1/(1 - lambda_1^2) + H(lambda_2..lambda_m) when defined (lambda_1
    /// away from 1 and every tail entry below 1).
    pub h_lhs: Option<f64>,
}

/// Classifies a singular value vector against the convexity region using
/// the product form: interior needs every pairwise product below 1 and
/// psi positive; the closure relaxes both to non-strict.
pub fn classify_region(lambda: &SingularValueVector, tol: f64) -> RegionVerdict {
    let v = lambda.values();
    let m = v.len();
    let pmax = if m >= 2 { v[0] * v[1] } else { 0.0 };
    let psi = psi_at(v);
    let h_lhs = region_h_lhs(v);

    let interior = pmax < 1.0 - tol && psi > tol;
    let in_closure = pmax <= 1.0 + tol && psi >= -tol;
    let (status, boundary_case) = if interior {
        (RegionStatus::Interior, None)
    } else if in_closure {
        let case = if m >= 2 && (v[0] - 1.0).abs() <= tol && (v[1] - 1.0).abs() <= tol {
            BoundaryCase::TwoOnes
        } else if v[0] > 1.0 && (pmax - 1.0).abs() <= tol {
            BoundaryCase::PairwiseProductOne
        } else {
            BoundaryCase::HEquality
        };
        (RegionStatus::Boundary, Some(case))
    } else {
        (RegionStatus::Exterior, None)
    };
    RegionVerdict { status, boundary_case, psi, h_lhs }
}

fn region_h_lhs(v: &[f64]) -> Option<f64> {
    if v[0] == 1.0 || v[1..].iter().any(|&x| x >= 1.0) {
        return None;
    }
    let tail: f64 = v[1..].iter().map(|x| 1.0 / (1.0 - x * x)).sum();
    Some(1.0 / (1.0 - v[0] * v[0]) + tail)
}

/// Case-split classification of the region closure: membership holds iff
/// lambda_1 <= 1, or lambda_1 > 1 together with lambda_2 < 1,
/// lambda_1 lambda_2 <= 1 and 1/(1 - lambda_1^2) + H(tail) <= m - 1.
/// Must agree with [`classify_region`] away from the boundary band; the
/// agreement is exercised at scale in the acceptance suite.
pub fn classify_region_h(lambda: &SingularValueVector, tol: f64) -> RegionStatus {
    let v = lambda.values();
    let m = v.len();
    if m == 1 {
        return RegionStatus::Interior;
    }
    let l1 = v[0];
    let l2 = v[1];
    if l1 < 1.0 - tol {
        return RegionStatus::Interior;
    }
    if (l1 - 1.0).abs() <= tol {
        // Near the lambda_1 = 1 face membership is decided by the second
        // value alone (sorted input keeps l2 <= l1 <= 1 + tol).
        return if l2 < 1.0 - tol { RegionStatus::Interior } else { RegionStatus::Boundary };
    }
    // lambda_1 > 1 branch.
    if l2 >= 1.0 - tol {
        return RegionStatus::Exterior;
    }
    let pairwise = l1 * l2;
    let lhs = 1.0 / (1.0 - l1 * l1) + v[1..].iter().map(|x| 1.0 / (1.0 - x * x)).sum::<f64>();
    let bound = (m - 1) as f64;
    if pairwise > 1.0 + tol || lhs > bound + tol {
        return RegionStatus::Exterior;
    }
    if pairwise < 1.0 - tol && lhs < bound - tol {
        return RegionStatus::Interior;
    }
    RegionStatus::Boundary
}

/// The symmetric convex constraint families used for confinement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    /// lambda_1 <= 1.
    SupOne,
    /// sum_i lambda_i <= 2.
    SumLinear,
    /// sum_i lambda_i^2 <= 2.
    SumSquares,
    /// sum_i sqrt(1 + lambda_i^2) <= 2.
    SumSqrt,
}

impl ConstraintKind {
    pub fn all() -> [ConstraintKind; 4] {
        [
            ConstraintKind::SupOne,
            ConstraintKind::SumLinear,
            ConstraintKind::SumSquares,
            ConstraintKind::SumSqrt,
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            ConstraintKind::SupOne => "sup_one",
            ConstraintKind::SumLinear => "sum_linear",
            ConstraintKind::SumSquares => "sum_squares",
            ConstraintKind::SumSqrt => "sum_sqrt",
        }
    }
}

impl std::str::FromStr for ConstraintKind {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sup_one" => Ok(ConstraintKind::SupOne),
            "sum_linear" => Ok(ConstraintKind::SumLinear),
            "sum_squares" => Ok(ConstraintKind::SumSquares),
            "sum_sqrt" => Ok(ConstraintKind::SumSqrt),
            other => Err(invalid(format!(
                "unknown constraint set {other:?} (expected sup_one, sum_linear, sum_squares or sum_sqrt)"
            ))),
        }
    }
}

/// A constraint family together with its fixed threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSet {
    pub kind: ConstraintKind,
    pub threshold: f64,
}

impl ConstraintSet {
    pub fn new(kind: ConstraintKind) -> Self {
        let threshold = match kind {
            ConstraintKind::SupOne => 1.0,
            _ => 2.0,
        };
        ConstraintSet { kind, threshold }
    }

    /// The constrained quantity evaluated at lambda.
    pub fn value(&self, lambda: &SingularValueVector) -> f64 {
        let v = lambda.values();
        match self.kind {
            ConstraintKind::SupOne => v[0],
            ConstraintKind::SumLinear => v.iter().sum(),
            ConstraintKind::SumSquares => v.iter().map(|x| x * x).sum(),
            ConstraintKind::SumSqrt => v.iter().map(|x| (1.0 + x * x).sqrt()).sum(),
        }
    }

    /// value - threshold; non-positive means the vector is in the set.
    pub fn excess(&self, lambda: &SingularValueVector) -> f64 {
        self.value(lambda) - self.threshold
    }

    pub fn contains(&self, lambda: &SingularValueVector) -> bool {
        self.excess(lambda) <= 0.0
    }
}

/// Membership test for a constraint set.
pub fn in_constraint_set(lambda: &SingularValueVector, set: &ConstraintSet) -> bool {
    set.contains(lambda)
}
