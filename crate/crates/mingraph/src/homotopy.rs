//! Singular value traces along straight-line homotopies of Jacobians, the
//! majorization and confinement diagnostics on such traces, and the nested
//! openness-level classification.

use serde::Serialize;

use crate::error::{check_finite, invalid, Result};
use crate::graphgeom::{jacobian, GridMap};
use crate::majorization::l_majorizes;
use crate::mat::Mat;
use crate::svkit::{
    classify_region, singular_values, ConstraintSet, RegionStatus, SingularValueVector,
};
use crate::variation::VariationField;

/// Sampled singular value data along J(t) = (1 - t) J0 + t J1.
#[derive(Debug, Clone)]
pub struct HomotopyTrace {
    /// Simplex the trace was lifted from, when it came from grid maps.
    pub simplex: Option<usize>,
    ts: Vec<f64>,
    lambdas: Vec<SingularValueVector>,
    /// Straight line in t through the endpoint singular value vectors.
    mus: Vec<Vec<f64>>,
    /// F_k(t): partial frame pairings sum_{i<=k} <J(t) a_i, b_i> with the
    /// frames frozen at the middle sample.
    f_sums: Vec<Vec<f64>>,
    /// S_k(t): partial sums of the sorted singular values.
    s_sums: Vec<Vec<f64>>,
    frame_sample: usize,
    /// Unsorted analytic continuation of the two branches (m = 2 only),
    /// matched sample-to-sample by nearest pairing.
    branches: Option<Vec<[f64; 2]>>,
    j0: Mat,
    j1: Mat,
}

impl HomotopyTrace {
    /// Builds a trace directly from a pair of Jacobians.
    pub fn from_jacobians(j0: &Mat, j1: &Mat, ts: &[f64]) -> Result<Self> {
        if j0.rows() != j1.rows() || j0.cols() != j1.cols() {
            return Err(invalid("homotopy endpoints must have matching shapes"));
        }
        if !j0.is_finite() || !j1.is_finite() {
            return Err(invalid("homotopy endpoints contain non-finite entries"));
        }
        check_finite("homotopy parameters", ts)?;
        if ts.len() < 2 {
            return Err(invalid("a trace needs at least two samples"));
        }
        if ts.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("homotopy parameters must be strictly increasing"));
        }
        let m = j0.cols();

        let interp = |t: f64| -> Mat {
            let mut j = Mat::zeros(j0.rows(), j0.cols());
            for r in 0..j0.rows() {
                for c in 0..j0.cols() {
                    j[(r, c)] = (1.0 - t) * j0[(r, c)] + t * j1[(r, c)];
                }
            }
            j
        };

        let mut lambdas = Vec::with_capacity(ts.len());
        for &t in ts {
            lambdas.push(singular_values(&interp(t))?.0);
        }

        let (t_first, t_last) = (ts[0], ts[ts.len() - 1]);
        let span = t_last - t_first;
        let mus: Vec<Vec<f64>> = ts
            .iter()
            .map(|&t| {
                let w = (t - t_first) / span;
                lambdas[0]
                    .values()
                    .iter()
                    .zip(lambdas[ts.len() - 1].values())
                    .map(|(a, b)| (1.0 - w) * a + w * b)
                    .collect()
            })
            .collect();

        let frame_sample = ts.len() / 2;
        let (_, frames) = singular_values(&interp(ts[frame_sample]))?;
        let n = j0.rows();
        let f_sums: Vec<Vec<f64>> = ts
            .iter()
            .map(|&t| {
                let jt = interp(t);
                let mut sums = Vec::with_capacity(m);
                let mut acc = 0.0;
                for i in 0..m {
                    // Directions past the target dimension pair with a zero
                    // image; their pairing contributes nothing.
                    if i < n {
                        let ja = jt.apply(&frames.domain().col(i));
                        acc += crate::mat::dot(&ja, &frames.target().col(i));
                    }
                    sums.push(acc);
                }
                sums
            })
            .collect();

        let s_sums: Vec<Vec<f64>> = lambdas
            .iter()
            .map(|l| {
                l.values()
                    .iter()
                    .scan(0.0, |acc, &x| {
                        *acc += x;
                        Some(*acc)
                    })
                    .collect()
            })
            .collect();

        let branches = (m == 2 && j0.rows() >= 2).then(|| {
            // Continuation by linear extrapolation of each branch: a
            // crossing and a bounce give identical sorted values, but
            // only the crossing matches the extrapolated velocities.
            let mut out: Vec<[f64; 2]> = Vec::with_capacity(ts.len());
            for (k, l) in lambdas.iter().enumerate() {
                let v = l.values();
                let sorted = [v[0], v[1]];
                let pick = match out.len() {
                    0 => sorted,
                    len => {
                        let prev = out[len - 1];
                        let predicted = if len >= 2 {
                            let rate = (ts[k] - ts[k - 1]) / (ts[k - 1] - ts[k - 2]);
                            [
                                prev[0] + (prev[0] - out[len - 2][0]) * rate,
                                prev[1] + (prev[1] - out[len - 2][1]) * rate,
                            ]
                        } else {
                            prev
                        };
                        let keep = (sorted[0] - predicted[0]).abs()
                            + (sorted[1] - predicted[1]).abs();
                        let swap = (sorted[1] - predicted[0]).abs()
                            + (sorted[0] - predicted[1]).abs();
                        // Strict inequality: ties keep the sorted order.
                        if swap < keep {
                            [sorted[1], sorted[0]]
                        } else {
                            sorted
                        }
                    }
                };
                out.push(pick);
            }
            out
        });

        Ok(HomotopyTrace {
            simplex: None,
            ts: ts.to_vec(),
            lambdas,
            mus,
            f_sums,
            s_sums,
            frame_sample,
            branches,
            j0: j0.clone(),
            j1: j1.clone(),
        })
    }

    pub fn ts(&self) -> &[f64] {
        &self.ts
    }

    pub fn lambda(&self, sample: usize) -> &SingularValueVector {
        &self.lambdas[sample]
    }

    pub fn mu(&self, sample: usize) -> &[f64] {
        &self.mus[sample]
    }

    pub fn f_sums(&self, sample: usize) -> &[f64] {
        &self.f_sums[sample]
    }

    pub fn s_sums(&self, sample: usize) -> &[f64] {
        &self.s_sums[sample]
    }

    pub fn frame_sample(&self) -> usize {
        self.frame_sample
    }

    pub fn branches(&self) -> Option<&[[f64; 2]]> {
        self.branches.as_deref()
    }

    pub fn dim(&self) -> usize {
        self.j0.cols()
    }

    /// The interpolated differential (1 - t) J0 + t J1.
    pub fn jacobian_at(&self, t: f64) -> Mat {
        let mut j = Mat::zeros(self.j0.rows(), self.j0.cols());
        for r in 0..self.j0.rows() {
            for c in 0..self.j0.cols() {
                j[(r, c)] = (1.0 - t) * self.j0[(r, c)] + t * self.j1[(r, c)];
            }
        }
        j
    }
}

/// Trace of the differential homotopy on one simplex of a pair of maps
/// with matching domains and boundary values.
pub fn trace(f0: &GridMap, f1: &GridMap, simplex: usize, ts: &[f64]) -> Result<HomotopyTrace> {
    if !f0.same_domain(f1) {
        return Err(invalid("homotopy endpoints live on different grids"));
    }
    let gap = f0.boundary_sup_distance(f1);
    if gap > 1e-12 {
        return Err(invalid(format!(
            "boundary values differ by {gap:.3e}; homotopies require matching boundaries"
        )));
    }
    if simplex >= f0.domain().simplex_count() {
        return Err(invalid(format!(
            "simplex {simplex} out of range 0..{}",
            f0.domain().simplex_count()
        )));
    }
    let mut t = HomotopyTrace::from_jacobians(&jacobian(f0, simplex), &jacobian(f1, simplex), ts)?;
    t.simplex = Some(simplex);
    Ok(t)
}

/// Diagnostics for the partial-sum comparison along a trace window.
#[derive(Debug, Clone, Serialize)]
pub struct Prop1Report {
    /// min over interior samples and levels of (mu partial sum - lambda
    /// partial sum); majorization holds when this is >= -tol.
    pub min_majorization_slack: f64,
    pub majorization_holds: bool,
    /// Largest level at which the partial sums coincide at some interior
    /// sample (0 when none do).
    pub forced_level: usize,
    /// max |lambda_i - mu_i| over i <= forced_level across the window.
    pub linearity_residual: f64,
    /// Deviation of every F_k from the chord through its window endpoints.
    pub fk_linearity_residual: f64,
    /// max_k |F_k - S_k| at the frame sample.
    pub fk_equals_sk_at_frame_sample: f64,
    /// max over samples and levels of (F_k - S_k); should be <= tol.
    pub fk_below_sk_violation: f64,
    pub holds: bool,
}

/// Checks the partial-sum dominance structure on the sample window
/// [t1, t2]: lambda(t) is majorized by the chord mu(t) at every level,
/// F_k is linear, F_k <= S_k with equality at the frame sample, and
/// equality of partial sums at one interior sample forces the top block
/// of lambda to follow the chord across the window.
pub fn check_prop1(trace: &HomotopyTrace, t1: f64, t2: f64, tol: f64) -> Result<Prop1Report> {
    if !(t1 < t2) {
        return Err(invalid("window must satisfy t1 < t2"));
    }
    let ts = trace.ts();
    let lo = ts.iter().position(|&t| t >= t1 - 1e-15);
    let hi = ts.iter().rposition(|&t| t <= t2 + 1e-15);
    let (lo, hi) = match (lo, hi) {
        (Some(a), Some(b)) if b >= a + 2 => (a, b),
        _ => {
            return Err(invalid(
                "window must contain at least three samples (two endpoints and an interior point)",
            ))
        }
    };
    let m = trace.dim();

    // Window chord through the window endpoint singular values.
    let (wa, wb) = (ts[lo], ts[hi]);
    let la = trace.lambda(lo).values().to_vec();
    let lb = trace.lambda(hi).values().to_vec();
    let mu_at = |t: f64| -> Vec<f64> {
        let w = (t - wa) / (wb - wa);
        la.iter().zip(&lb).map(|(a, b)| (1.0 - w) * a + w * b).collect()
    };

    let mut min_slack = f64::INFINITY;
    let mut forced_level = 0usize;
    for s in lo + 1..hi {
        let mu = mu_at(ts[s]);
        let rep = l_majorizes(trace.lambda(s).values(), &mu, m, tol)?;
        for k in 0..m {
            min_slack = min_slack.min(rep.partial_sums_y[k] - rep.partial_sums_x[k]);
        }
        forced_level = forced_level.max(rep.equal_upto);
    }

    let mut linearity_residual = 0.0f64;
    if forced_level > 0 {
        for s in lo..=hi {
            let mu = mu_at(ts[s]);
            for i in 0..forced_level {
                linearity_residual =
                    linearity_residual.max((trace.lambda(s).values()[i] - mu[i]).abs());
            }
        }
    }

    // F_k checks against the chord of F itself (F is linear in t, so the
    // residual is measured against its own endpoints), plus domination by
    // S_k and equality at the frame sample.
    let mut fk_lin = 0.0f64;
    let mut fk_le = f64::NEG_INFINITY;
    for s in lo..=hi {
        let w = (ts[s] - wa) / (wb - wa);
        for k in 0..m {
            let chord = (1.0 - w) * trace.f_sums(lo)[k] + w * trace.f_sums(hi)[k];
            fk_lin = fk_lin.max((trace.f_sums(s)[k] - chord).abs());
            fk_le = fk_le.max(trace.f_sums(s)[k] - trace.s_sums(s)[k]);
        }
    }
    let fs = trace.frame_sample();
    let mut fk_eq = 0.0f64;
    if fs >= lo && fs <= hi {
        for k in 0..m {
            fk_eq = fk_eq.max((trace.f_sums(fs)[k] - trace.s_sums(fs)[k]).abs());
        }
    }

    let majorization_holds = min_slack >= -tol;
    let holds = majorization_holds
        && linearity_residual <= tol.max(1e-8)
        && fk_lin <= tol.max(1e-9)
        && fk_le <= tol
        && fk_eq <= tol.max(1e-10);
    Ok(Prop1Report {
        min_majorization_slack: min_slack,
        majorization_holds,
        forced_level,
        linearity_residual,
        fk_linearity_residual: fk_lin,
        fk_equals_sk_at_frame_sample: fk_eq,
        fk_below_sk_violation: fk_le,
        holds,
    })
}

/// What the endpoints are confined to in a confinement check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConfinementSet {
    /// One of the symmetric convex constraint families.
    Constraint(ConstraintSet),
    /// The closure of the convexity region itself.
    Region,
}

#[derive(Debug, Clone, Serialize)]
pub struct Prop2Report {
    /// Worst exterior excess over interior samples: max of (pairwise
    /// product - 1) and (-psi) clamped below at 0. Zero means every sample
    /// is in the closure.
    pub worst_exterior_excess: f64,
    pub confined: bool,
    /// Interior samples classified on the region boundary with a leading
    /// singular value above 1.
    pub supercritical_boundary_samples: usize,
    /// When such samples exist: max |lambda_i(t) - mu_i(t)| over the whole
    /// trace; the trace is forced onto the chord.
    pub boundary_linearity_residual: Option<f64>,
    /// max over samples with mu_1 > 1 > mu_2 of max(lambda_1 lambda_2,
    /// mu_1 mu_2); stays at most 1.
    pub pairwise_product_max: Option<f64>,
    pub holds: bool,
}

/// Confinement check: endpoints inside the given set imply every sampled
/// lambda(t) stays in the closure of the convexity region, boundary
/// contact with lambda_1 > 1 forces the whole trace onto the chord, and
/// whenever the chord straddles 1 the top pairwise products stay at
/// most 1.
pub fn check_prop2(
    trace: &HomotopyTrace,
    set: &ConfinementSet,
    tol: f64,
) -> Result<Prop2Report> {
    let last = trace.ts().len() - 1;
    for sample in [0, last] {
        let lambda = trace.lambda(sample);
        let ok = match set {
            ConfinementSet::Constraint(c) => c.excess(lambda) <= tol,
            ConfinementSet::Region => {
                classify_region(lambda, tol).status != RegionStatus::Exterior
            }
        };
        if !ok {
            return Err(invalid(format!(
                "endpoint sample {sample} is outside the declared confinement set"
            )));
        }
    }

    let m = trace.dim();
    let mut worst_excess = 0.0f64;
    let mut boundary_hits = 0usize;
    for s in 1..last {
        let verdict = classify_region(trace.lambda(s), tol);
        let v = trace.lambda(s).values();
        if m >= 2 {
            worst_excess = worst_excess.max(v[0] * v[1] - 1.0);
        }
        worst_excess = worst_excess.max(-verdict.psi);
        if verdict.status == RegionStatus::Boundary && v[0] > 1.0 + tol {
            boundary_hits += 1;
        }
    }
    let confined = worst_excess <= tol;

    let boundary_linearity_residual = (boundary_hits > 0).then(|| {
        let mut r = 0.0f64;
        for s in 0..=last {
            for i in 0..m {
                r = r.max((trace.lambda(s).values()[i] - trace.mu(s)[i]).abs());
            }
        }
        r
    });

    let mut pairwise_max: Option<f64> = None;
    if m >= 2 {
        for s in 0..=last {
            let mu = trace.mu(s);
            if mu[0] > 1.0 + tol && mu[1] < 1.0 - tol {
                let v = trace.lambda(s).values();
                let cand = (v[0] * v[1]).max(mu[0] * mu[1]);
                pairwise_max = Some(pairwise_max.map_or(cand, |p: f64| p.max(cand)));
            }
        }
    }

    let holds = confined
        && boundary_linearity_residual.map_or(true, |r| r <= 1e-8)
        && pairwise_max.map_or(true, |p| p <= 1.0 + tol);
    Ok(Prop2Report {
        worst_exterior_excess: worst_excess,
        confined,
        supercritical_boundary_samples: boundary_hits,
        boundary_linearity_residual,
        pairwise_product_max: pairwise_max,
        holds,
    })
}

/// Per-sample nested openness level along a trace: 1 when lambda(t) is
/// interior to the convexity region, otherwise the smallest k >= 2 with
/// lambda_k(t) < 1, and m + 1 when no singular value drops below 1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambdaClassification {
    pub levels: Vec<usize>,
}

pub fn classify_lambda(trace: &HomotopyTrace, tol: f64) -> LambdaClassification {
    let m = trace.dim();
    let levels = (0..trace.ts().len())
        .map(|s| {
            let lambda = trace.lambda(s);
            if classify_region(lambda, tol).status == RegionStatus::Interior {
                return 1;
            }
            for k in 2..=m {
                if lambda.values()[k - 1] < 1.0 - tol {
                    return k;
                }
            }
            m + 1
        })
        .collect();
    LambdaClassification { levels }
}

#[derive(Debug, Clone, Serialize)]
pub struct GradientVanishingReport {
    /// max over simplices of sum_{i,alpha} p_{i,alpha}^2 for the
    /// difference field at the homotopy midpoint map.
    pub max_p_square: f64,
    pub worst_simplex: usize,
    pub within_tol: bool,
}

/// Frame-invariant smallness certificate for the difference of two maps:
/// the Frobenius norm squared of the difference differential expressed in
/// the frames of the interpolated map at parameter `t`.
pub fn gradient_vanishing_diagnostic(
    f0: &GridMap,
    f1: &GridMap,
    t: f64,
    tol: f64,
) -> Result<GradientVanishingReport> {
    let v = VariationField::difference(f1, f0, 1e-12)?;
    let ft = f0.interpolate(f1, t)?;
    let mut max_p = 0.0f64;
    let mut worst = 0usize;
    for s in 0..ft.domain().simplex_count() {
        let p = crate::variation::p_matrix(&ft, &v, s)?;
        let sq: f64 = p.data().iter().map(|x| x * x).sum();
        if sq > max_p {
            max_p = sq;
            worst = s;
        }
    }
    Ok(GradientVanishingReport { max_p_square: max_p, worst_simplex: worst, within_tol: max_p <= tol })
}

/// CSV rendering of a trace: one row per sample with the singular values,
/// the chord, the partial frame pairings, the partial sums, and the
/// openness level.
pub fn trace_to_csv_string(trace: &HomotopyTrace, tol: f64) -> String {
    let m = trace.dim();
    let classes = classify_lambda(trace, tol);
    let mut header = vec!["t".to_string()];
    header.extend((1..=m).map(|i| format!("lambda_{i}")));
    header.extend((1..=m).map(|i| format!("mu_{i}")));
    header.extend((1..=m).map(|i| format!("F_{i}")));
    header.extend((1..=m).map(|i| format!("S_{i}")));
    header.push("lambda_class".to_string());

    let mut out = header.join(",");
    out.push('\n');
    for s in 0..trace.ts().len() {
        let mut fields = vec![trace.ts()[s].to_string()];
        fields.extend(trace.lambda(s).values().iter().map(|v| v.to_string()));
        fields.extend(trace.mu(s).iter().map(|v| v.to_string()));
        fields.extend(trace.f_sums(s).iter().map(|v| v.to_string()));
        fields.extend(trace.s_sums(s).iter().map(|v| v.to_string()));
        fields.push(classes.levels[s].to_string());
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}
