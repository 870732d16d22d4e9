//! End-to-end acceptance checks. Each test prints one `criterion N:
//! PASS/FAIL` line (run with `--nocapture` to see them) and asserts the
//! stated tolerances and runtime budgets.

use std::time::Instant;

use mingraph::graphgeom::io::{report_to_json_string, write_gridmap};
use mingraph::graphgeom::{area, singular_field, Domain, GridMap};
use mingraph::homotopy::{check_prop1, check_prop2, ConfinementSet, HomotopyTrace};
use mingraph::mat::Mat;
use mingraph::solver::boundary::{BoundaryData, ExplicitNode};
use mingraph::solver::experiment::{uniqueness_experiment, ExperimentParams, Verdict};
use mingraph::solver::{solve_dirichlet, Init, SolverConfig};
use mingraph::svkit::{
    area_density_at, classify_region, classify_region_h, psi_at, ConstraintKind, ConstraintSet,
    RegionStatus, SingularValueVector,
};
use mingraph::variation::{second_variation_terms, VariationField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

fn verdict_line(criterion: usize, ok: bool, detail: &str) {
    println!("criterion {criterion}: {} ({detail})", if ok { "PASS" } else { "FAIL" });
}

fn rand_mat(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Mat {
    let mut m = Mat::zeros(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            m[(r, c)] = rng.gen_range(-scale..scale);
        }
    }
    m
}

fn rot2(theta: f64) -> Mat {
    let mut r = Mat::zeros(2, 2);
    let (s, c) = theta.sin_cos();
    r[(0, 0)] = c;
    r[(0, 1)] = -s;
    r[(1, 0)] = s;
    r[(1, 1)] = c;
    r
}

fn diag2(a: f64, b: f64) -> Mat {
    let mut d = Mat::zeros(2, 2);
    d[(0, 0)] = a;
    d[(1, 1)] = b;
    d
}

/// Plain cyclic Jacobi eigenvalue iteration on a dense symmetric matrix,
/// kept separate from the library so the convexity check has an
/// independent spectral oracle.
fn min_eig_sym(mut a: Vec<Vec<f64>>) -> f64 {
    let n = a.len();
    for _ in 0..80 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in p + 1..n {
                off = off.max(a[p][q].abs());
            }
        }
        if off < 1e-14 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p][q];
                if apq == 0.0 {
                    continue;
                }
                let theta = 0.5 * (a[q][q] - a[p][p]) / apq;
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).fold(f64::INFINITY, f64::min)
}

#[test]
fn criterion_1_region_classifiers_agree() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let band = 1e-9;
    let mut checked = 0usize;
    let mut disagreements = 0usize;
    let mut round = 0usize;
    while checked < 100_000 {
        let m = [2usize, 3, 4][round % 3];
        round += 1;
        let raw: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..3.0)).collect();
        let lambda = SingularValueVector::from_unsorted(raw).unwrap();
        let v = lambda.values();
        // Skip the boundary band where the two formulations may round
        // their ties differently: values at 1, pairwise products at 1,
        // psi at 0 and the reciprocal-sum surface.
        if v.iter().any(|x| (x - 1.0).abs() < band) {
            continue;
        }
        let mut near = false;
        for a in 0..m {
            for b in a + 1..m {
                if (v[a] * v[b] - 1.0).abs() < band {
                    near = true;
                }
            }
        }
        if near || psi_at(v).abs() < band {
            continue;
        }
        if v[0] > 1.0 {
            let lhs: f64 = v.iter().map(|x| 1.0 / (1.0 - x * x)).sum();
            if (lhs - (m as f64 - 1.0)).abs() < band {
                continue;
            }
        }
        let product_form = classify_region(&lambda, 1e-12).status;
        let case_form = classify_region_h(&lambda, 1e-12);
        if product_form != case_form {
            disagreements += 1;
        }
        checked += 1;
    }
    let dt = start.elapsed().as_secs_f64();
    let ok = disagreements == 0 && dt < 5.0;
    verdict_line(1, ok, &format!("10^5 samples, m in {{2,3,4}}, {disagreements} disagreements, {dt:.2} s"));
    assert!(ok, "disagreements={disagreements}, dt={dt:.2}s");
}

#[test]
fn criterion_2_area_density_hessian_is_psd_inside_region() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let h = 1e-3;
    let mut min_eig = f64::INFINITY;
    let mut count = 0usize;
    let mut round = 0usize;
    while count < 10_000 {
        let m = [2usize, 3, 4][round % 3];
        round += 1;
        let raw: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..3.0)).collect();
        let lambda = SingularValueVector::from_unsorted(raw).unwrap();
        let v = lambda.values().to_vec();
        // Interior samples with enough margin that the finite-difference
        // truncation error cannot mask the sign of a true eigenvalue.
        let mut pmax = 0.0f64;
        for a in 0..m {
            for b in a + 1..m {
                pmax = pmax.max(v[a] * v[b]);
            }
        }
        let scale: f64 = v.iter().map(|x| 1.0 + x * x).product();
        if pmax > 0.98 || psi_at(&v) < 1e-2 * scale {
            continue;
        }
        let f0 = area_density_at(&v);
        let mut hess = vec![vec![0.0f64; m]; m];
        for a in 0..m {
            let mut xp = v.clone();
            let mut xm = v.clone();
            xp[a] += h;
            xm[a] -= h;
            hess[a][a] = (area_density_at(&xp) - 2.0 * f0 + area_density_at(&xm)) / (h * h);
            for b in a + 1..m {
                let mut xpp = v.clone();
                let mut xpm = v.clone();
                let mut xmp = v.clone();
                let mut xmm = v.clone();
                xpp[a] += h;
                xpp[b] += h;
                xpm[a] += h;
                xpm[b] -= h;
                xmp[a] -= h;
                xmp[b] += h;
                xmm[a] -= h;
                xmm[b] -= h;
                let d = (area_density_at(&xpp) - area_density_at(&xpm) - area_density_at(&xmp)
                    + area_density_at(&xmm))
                    / (4.0 * h * h);
                hess[a][b] = d;
                hess[b][a] = d;
            }
        }
        min_eig = min_eig.min(min_eig_sym(hess));
        count += 1;
    }
    let dt = start.elapsed().as_secs_f64();
    let ok = min_eig > -1e-8 && dt < 10.0;
    verdict_line(2, ok, &format!("10^4 interior points, min eigenvalue {min_eig:.3e}, {dt:.2} s"));
    assert!(ok, "min_eig={min_eig:.3e}, dt={dt:.2}s");
}

#[test]
fn criterion_3_majorization_along_linear_paths() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let ts = linspace(0.0, 1.0, 13); // 11 interior samples
    let mut worst_slack = f64::INFINITY;
    let mut worst_fk_linearity = 0.0f64;
    let mut worst_fk_violation = f64::NEG_INFINITY;
    let mut failures = 0usize;
    for pair in 0..10_000 {
        let m = if pair % 2 == 0 { 2 } else { 3 };
        let j0 = rand_mat(&mut rng, m, m, 2.0);
        let j1 = rand_mat(&mut rng, m, m, 2.0);
        let trace = HomotopyTrace::from_jacobians(&j0, &j1, &ts).unwrap();
        let rep = check_prop1(&trace, 0.0, 1.0, 1e-9).unwrap();
        worst_slack = worst_slack.min(rep.min_majorization_slack);
        worst_fk_linearity = worst_fk_linearity.max(rep.fk_linearity_residual);
        worst_fk_violation = worst_fk_violation.max(rep.fk_below_sk_violation);
        if !rep.holds {
            failures += 1;
        }
    }
    let dt = start.elapsed().as_secs_f64();
    let ok = failures == 0
        && worst_slack >= -1e-9
        && worst_fk_linearity < 1e-9
        && worst_fk_violation <= 1e-9
        && dt < 30.0;
    verdict_line(
        3,
        ok,
        &format!(
            "10^4 pairs, slack {worst_slack:.2e}, F_k linearity {worst_fk_linearity:.2e}, F_k - S_k max {worst_fk_violation:.2e}, {dt:.2} s"
        ),
    );
    assert!(ok, "failures={failures}, slack={worst_slack:.3e}, dt={dt:.2}s");
}

fn sample_in_set(rng: &mut ChaCha8Rng, set: &ConstraintSet) -> Mat {
    let hi = match set.kind {
        ConstraintKind::SupOne => 1.0,
        ConstraintKind::SumLinear => 2.0,
        ConstraintKind::SumSquares => 2.0f64.sqrt(),
        ConstraintKind::SumSqrt => 3.0f64.sqrt(),
    };
    loop {
        let raw: Vec<f64> = (0..2).map(|_| rng.gen_range(0.0..hi)).collect();
        let lambda = SingularValueVector::from_unsorted(raw).unwrap();
        if set.contains(&lambda) {
            let v = lambda.values();
            let u = rot2(rng.gen_range(0.0..std::f64::consts::TAU));
            let vt = rot2(rng.gen_range(0.0..std::f64::consts::TAU));
            return u.matmul(&diag2(v[0], v[1])).matmul(&vt);
        }
    }
}

#[test]
fn criterion_4_confinement_and_boundary_rigidity() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let ts = linspace(0.0, 1.0, 21);
    let mut violations = 0usize;

    for kind in ConstraintKind::all() {
        let set = ConstraintSet::new(kind);
        for _ in 0..1000 {
            let (j0, j1) = if kind == ConstraintKind::SumSqrt {
                // The sqrt family is measure zero for two or more
                // directions; its confinement content lives on scalar
                // factors, sampled here as 1x1 differentials.
                let mut a = Mat::zeros(1, 1);
                let mut b = Mat::zeros(1, 1);
                a[(0, 0)] = rng.gen_range(0.0..1.7);
                b[(0, 0)] = rng.gen_range(0.0..1.7);
                (a, b)
            } else {
                (sample_in_set(&mut rng, &set), sample_in_set(&mut rng, &set))
            };
            let trace = HomotopyTrace::from_jacobians(&j0, &j1, &ts).unwrap();
            let rep = check_prop2(&trace, &ConfinementSet::Constraint(set), 1e-8).unwrap();
            if !(rep.confined && rep.holds) {
                violations += 1;
            }
            for s in 1..ts.len() - 1 {
                if classify_region(trace.lambda(s), 1e-8).status == RegionStatus::Exterior {
                    violations += 1;
                }
            }
        }
    }

    // Shared-frame segments tangent to the region boundary from inside,
    // touching it at a sample with top value above 1: the trace must be
    // exactly the chord of its endpoints.
    let mut linearity = 0.0f64;
    let mut supercritical = 0usize;
    for k in 0..100 {
        let tstar = ts[[5usize, 10, 15][k % 3]];
        let a0: f64 = rng.gen_range(1.15..2.2);
        let a1 = (a0 + rng.gen_range(-0.4..0.4)).max(1.1);
        let astar = (1.0 - tstar) * a0 + tstar * a1;
        let bstar = 1.0 / astar;
        let bslope = -(a1 - a0) * bstar / astar;
        let b0 = bstar - bslope * tstar;
        let b1 = bstar + bslope * (1.0 - tstar);
        let u = rot2(rng.gen_range(0.0..std::f64::consts::TAU));
        let vt = rot2(rng.gen_range(0.0..std::f64::consts::TAU));
        let j0 = u.matmul(&diag2(a0, b0)).matmul(&vt);
        let j1 = u.matmul(&diag2(a1, b1)).matmul(&vt);
        let trace = HomotopyTrace::from_jacobians(&j0, &j1, &ts).unwrap();
        let rep = check_prop2(&trace, &ConfinementSet::Region, 1e-8).unwrap();
        supercritical += rep.supercritical_boundary_samples;
        if let Some(r) = rep.boundary_linearity_residual {
            linearity = linearity.max(r);
        }
        if !rep.holds {
            violations += 1;
        }
    }
    let dt = start.elapsed().as_secs_f64();
    let ok = violations == 0 && linearity < 1e-8 && supercritical >= 100;
    verdict_line(
        4,
        ok,
        &format!(
            "4 x 10^3 confined pairs, {violations} violations; 100 boundary tangencies, linearity {linearity:.2e}, {dt:.2} s"
        ),
    );
    assert!(ok, "violations={violations}, linearity={linearity:.3e}, supercritical={supercritical}");
}

/// Low-order trigonometric interior data: smooth, boundary compatible
/// with whatever the caller pins, entries bounded by 2 * amp * pi * 2.
fn trig_values(rng: &mut ChaCha8Rng, amp: f64) -> impl Fn(&[f64]) -> f64 {
    let a1 = rng.gen_range(-amp..amp);
    let a2 = rng.gen_range(-amp..amp);
    let k1: Vec<f64> = (0..2).map(|_| rng.gen_range(1..3) as f64).collect();
    let k2: Vec<f64> = (0..2).map(|_| rng.gen_range(1..3) as f64).collect();
    let p1 = rng.gen_range(0.0..std::f64::consts::TAU);
    let p2 = rng.gen_range(0.0..std::f64::consts::TAU);
    move |x: &[f64]| {
        let s1 = std::f64::consts::PI * (k1[0] * x[0] + k1[1] * x[1]) + p1;
        let s2 = std::f64::consts::PI * (k2[0] * x[0] + k2[1] * x[1]) + p2;
        a1 * s1.sin() + a2 * s2.sin()
    }
}

#[test]
fn criterion_5_second_variation_matches_difference_quotients() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut worst_rel = 0.0f64;
    let mut worst_term = f64::INFINITY;
    let mut failures = 0usize;
    let mut conditioned = 0usize;
    for &(res, n) in &[(9usize, 2usize), (9, 3), (17, 2), (17, 3)] {
        let domain = Domain::new(vec![1.0, 1.0], vec![res, res]).unwrap();
        for _ in 0..25 {
            let comps: Vec<_> = (0..n).map(|_| trig_values(&mut rng, 0.04)).collect();
            let f = GridMap::from_fn(domain.clone(), n, |x| {
                comps.iter().map(|c| c(x)).collect()
            })
            .unwrap();
            let vcomps: Vec<_> = (0..n).map(|_| trig_values(&mut rng, 0.15)).collect();
            let v = VariationField::from_fn(domain.clone(), n, |x| {
                vcomps.iter().map(|c| c(x)).collect()
            })
            .unwrap();
            let rep = second_variation_terms(&f, &v).unwrap();

            // Independent second difference of t -> area(f + tV).
            let h = 1e-4;
            let mut plus = f.values().to_vec();
            let mut minus = f.values().to_vec();
            for (i, &w) in v.map().values().iter().enumerate() {
                plus[i] += h * w;
                minus[i] -= h * w;
            }
            let a_plus = area(&GridMap::new(domain.clone(), n, plus).unwrap());
            let a_minus = area(&GridMap::new(domain.clone(), n, minus).unwrap());
            let fd = (a_plus - 2.0 * rep.a0 + a_minus) / (h * h);
            let rel = (rep.asecond_analytic - fd).abs() / rep.asecond_analytic.abs().max(1.0);
            worst_rel = worst_rel.max(rel);
            if rel >= 1e-5 {
                failures += 1;
            }

            // Term sign conditions: every simplex keeps pairwise products
            // of singular values at most 1.
            let cond = singular_field(&f).iter().all(|l| {
                let lv = l.values();
                lv.len() < 2 || lv[0] * lv[1] <= 1.0
            });
            if cond {
                conditioned += 1;
                let t_min = rep.term_i.min(rep.term_ii).min(rep.term_iii);
                worst_term = worst_term.min(t_min);
                if t_min < -1e-10 {
                    failures += 1;
                }
            }
        }
    }
    let dt = start.elapsed().as_secs_f64();
    let ok = failures == 0 && worst_rel < 1e-5 && conditioned == 100 && worst_term >= -1e-10 && dt < 60.0;
    verdict_line(
        5,
        ok,
        &format!(
            "100 fields, rel err {worst_rel:.2e}, min conditioned term {worst_term:.2e}, {dt:.2} s"
        ),
    );
    assert!(ok, "failures={failures}, rel={worst_rel:.3e}, term={worst_term:.3e}, dt={dt:.2}s");
}

/// Value of the scalar test boundary: a skew log-cosine profile whose
/// graph is genuinely curved.
fn scherk_value(x: &[f64]) -> f64 {
    let a = 2.0;
    (((a * (x[0] - 0.5)).cos()).ln() - ((a * (x[1] - 0.5)).cos()).ln()) / a
}

fn scherk_boundary(domain: &Domain) -> BoundaryData {
    let mut values = Vec::new();
    for node in 0..domain.node_count() {
        let multi = domain.node_multi(node);
        if domain.is_boundary_multi(&multi) {
            values.push(ExplicitNode {
                index: multi.clone(),
                value: vec![scherk_value(&domain.node_position(node))],
            });
        }
    }
    BoundaryData::Explicit { target_dim: 1, values }
}

/// Independent scalar minimal-graph solve: cyclic coordinate descent with
/// a per-node Newton step on the piecewise linear area of the same
/// triangulated grid (each cell split along the main diagonal).
fn scalar_coordinate_descent(res: usize, boundary: impl Fn(usize, usize) -> f64) -> Vec<Vec<f64>> {
    let h = 1.0 / (res - 1) as f64;
    let w = 0.5 * h * h;
    let mut u = vec![vec![0.0f64; res]; res];
    for ix in 0..res {
        for iy in 0..res {
            u[ix][iy] = boundary(ix, iy);
        }
    }
    // (cell, lower flag) pairs incident to a vertex role; lower triangle
    // covers {origin, +e0, +e0+e1}, upper covers {origin, +e1, +e0+e1}.
    let tri_grad = |u: &Vec<Vec<f64>>, cx: usize, cy: usize, lower: bool| -> (f64, f64) {
        let u00 = u[cx][cy];
        let u10 = u[cx + 1][cy];
        let u01 = u[cx][cy + 1];
        let u11 = u[cx + 1][cy + 1];
        if lower {
            ((u10 - u00) / h, (u11 - u10) / h)
        } else {
            ((u11 - u01) / h, (u01 - u00) / h)
        }
    };
    let incident = |ix: usize, iy: usize| -> Vec<(usize, usize, bool)> {
        let mut list = Vec::new();
        for &(cx, cy) in &[
            (ix.wrapping_sub(1), iy.wrapping_sub(1)),
            (ix.wrapping_sub(1), iy),
            (ix, iy.wrapping_sub(1)),
            (ix, iy),
        ] {
            if cx >= res - 1 || cy >= res - 1 {
                continue;
            }
            for lower in [true, false] {
                let verts: [(usize, usize); 3] = if lower {
                    [(cx, cy), (cx + 1, cy), (cx + 1, cy + 1)]
                } else {
                    [(cx, cy), (cx, cy + 1), (cx + 1, cy + 1)]
                };
                if verts.contains(&(ix, iy)) {
                    list.push((cx, cy, lower));
                }
            }
        }
        list
    };

    for _sweep in 0..20_000 {
        let mut max_move = 0.0f64;
        for ix in 1..res - 1 {
            for iy in 1..res - 1 {
                let inc = incident(ix, iy);
                let mut s = u[ix][iy];
                for _ in 0..4 {
                    let mut g = 0.0;
                    let mut hh = 0.0;
                    for &(cx, cy, lower) in &inc {
                        u[ix][iy] = s;
                        let (gx0, gy0) = tri_grad(&u, cx, cy, lower);
                        u[ix][iy] = s + 1.0;
                        let (gx1, gy1) = tri_grad(&u, cx, cy, lower);
                        let (dgx, dgy) = (gx1 - gx0, gy1 - gy0);
                        let q = (1.0 + gx0 * gx0 + gy0 * gy0).sqrt();
                        let slope = gx0 * dgx + gy0 * dgy;
                        g += w * slope / q;
                        hh += w * ((dgx * dgx + dgy * dgy) / q - slope * slope / (q * q * q));
                    }
                    let step = g / hh;
                    s -= step;
                    if step.abs() < 1e-15 {
                        break;
                    }
                }
                max_move = max_move.max((s - u[ix][iy]).abs());
                u[ix][iy] = s;
            }
        }
        if max_move < 1e-14 {
            break;
        }
    }
    u
}

#[test]
fn criterion_6_solver_reproduces_reference_solutions() {
    let start = Instant::now();
    // Affine boundary data extends to an affine minimal map.
    let domain = Domain::new(vec![1.0, 1.0], vec![33, 33]).unwrap();
    let matrix = vec![vec![0.6, -0.3], vec![0.2, 0.5]];
    let offset = vec![0.1, -0.2];
    let bdata = BoundaryData::Affine { matrix: matrix.clone(), offset: offset.clone() };
    let config = SolverConfig { grad_tol: 1e-11, ..SolverConfig::default() };
    let out = solve_dirichlet(
        &domain,
        &bdata,
        &Init::Seed { seed: 7, noise_amplitude: None },
        &config,
    )
    .expect("affine solve converges");
    let mut affine_sup = 0.0f64;
    for node in 0..domain.node_count() {
        let x = domain.node_position(node);
        let got = out.map.node_value(node);
        for c in 0..2 {
            let want = offset[c] + matrix[c][0] * x[0] + matrix[c][1] * x[1];
            affine_sup = affine_sup.max((got[c] - want).abs());
        }
    }

    // Scalar graph against an independent coordinate-descent solve of the
    // same discrete area.
    let res = 17;
    let sdomain = Domain::new(vec![1.0, 1.0], vec![res, res]).unwrap();
    let sboundary = scherk_boundary(&sdomain);
    let sout = solve_dirichlet(
        &sdomain,
        &sboundary,
        &Init::Seed { seed: 11, noise_amplitude: Some(0.05) },
        &config,
    )
    .expect("scalar solve converges");
    let href = scalar_coordinate_descent(res, |ix, iy| {
        scherk_value(&sdomain.node_position(sdomain.node_index(&[ix, iy])))
    });
    let mut scalar_sup = 0.0f64;
    for node in 0..sdomain.node_count() {
        let multi = sdomain.node_multi(node);
        scalar_sup = scalar_sup.max((sout.map.node_value(node)[0] - href[multi[0]][multi[1]]).abs());
    }

    let dt = start.elapsed().as_secs_f64();
    let ok = affine_sup < 1e-8 && scalar_sup < 1e-6;
    verdict_line(
        6,
        ok,
        &format!("affine sup err {affine_sup:.2e} at 33x33, scalar sup err {scalar_sup:.2e} vs coordinate descent, {dt:.2} s"),
    );
    assert!(ok, "affine={affine_sup:.3e}, scalar={scalar_sup:.3e}");
}

fn experiment_case(kind: ConstraintKind, amplitude: f64, seed: u64) -> (BoundaryData, ExperimentParams, SolverConfig) {
    let bdata = BoundaryData::Sinusoidal {
        amplitude,
        frequencies: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        phases: vec![0.0, 0.5],
    };
    let params = ExperimentParams::new(5, ConstraintSet::new(kind));
    let config = SolverConfig { grad_tol: 1e-11, seed, ..SolverConfig::default() };
    (bdata, params, config)
}

#[test]
fn criterion_7_uniqueness_experiments_under_constraint_audits() {
    let start = Instant::now();
    let domain = Domain::new(vec![1.0, 1.0], vec![33, 33]).unwrap();
    let cases = [
        (ConstraintKind::SupOne, 0.15, 41u64),
        (ConstraintKind::SumLinear, 0.22, 42),
        (ConstraintKind::SumSquares, 0.18, 43),
    ];
    let mut ok = true;
    let mut detail = String::new();
    for (kind, amplitude, seed) in cases {
        let (bdata, params, config) = experiment_case(kind, amplitude, seed);
        let out = uniqueness_experiment(&domain, &bdata, &params, &config, None)
            .expect("experiment runs");
        let rep = &out.report;
        let audits = rep.runs.iter().all(|r| r.audit_pass && r.converged);
        let second_diff = rep
            .pairs
            .iter()
            .map(|p| p.min_second_difference)
            .fold(f64::INFINITY, f64::min);
        let diag = rep.pairs.iter().map(|p| p.gradient_diagnostic).fold(0.0f64, f64::max);
        let case_ok = rep.verdict == Verdict::Unique
            && audits
            && rep.max_pairwise_distance < 1e-6
            && second_diff >= -1e-9
            && diag <= 1e-6;
        ok &= case_ok;
        detail.push_str(&format!(
            "{}: dist {:.1e}, area convexity {:.1e}, diagnostic {:.1e}; ",
            params.constraint.kind.name(),
            rep.max_pairwise_distance,
            second_diff,
            diag
        ));
    }
    let dt = start.elapsed().as_secs_f64();
    ok &= dt < 600.0;
    verdict_line(7, ok, &format!("{detail}{dt:.1} s"));
    assert!(ok, "{detail}dt={dt:.1}s");
}

#[test]
fn criterion_8_fixed_seeds_reproduce_outputs_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let mut ok = true;
    let mut detail = String::new();

    // Re-run the affine and scalar solves and compare the files they
    // would ship.
    let domain = Domain::new(vec![1.0, 1.0], vec![33, 33]).unwrap();
    let bdata = BoundaryData::Affine {
        matrix: vec![vec![0.6, -0.3], vec![0.2, 0.5]],
        offset: vec![0.1, -0.2],
    };
    let sdomain = Domain::new(vec![1.0, 1.0], vec![17, 17]).unwrap();
    let sboundary = scherk_boundary(&sdomain);
    let config = SolverConfig { grad_tol: 1e-11, ..SolverConfig::default() };
    for (name, dom, bd, seed, amp) in [
        ("affine", &domain, &bdata, 7u64, None),
        ("scalar", &sdomain, &sboundary, 11, Some(0.05)),
    ] {
        let mut files = Vec::new();
        for run in 0..2 {
            let out = solve_dirichlet(dom, bd, &Init::Seed { seed, noise_amplitude: amp }, &config)
                .expect("solve converges");
            let csv = dir.path().join(format!("{name}-{run}.csv"));
            write_gridmap(&out.map, &csv).unwrap();
            files.push(std::fs::read(&csv).unwrap());
        }
        let same = files[0] == files[1];
        ok &= same;
        detail.push_str(&format!("{name} solve bytes equal: {same}; "));
    }

    // Re-run one full experiment twice with fixed seeds, and once more on
    // a different worker count; reports and solution files must agree
    // byte for byte.
    let (ebdata, eparams, econfig) = experiment_case(ConstraintKind::SupOne, 0.15, 41);
    let mut reports = Vec::new();
    let mut solution_bytes = Vec::new();
    for (run, threads) in [(0usize, Some(2)), (1, Some(2)), (2, Some(1))] {
        let out = uniqueness_experiment(&domain, &ebdata, &eparams, &econfig, threads)
            .expect("experiment runs");
        let path = dir.path().join(format!("report-{run}.json"));
        std::fs::write(&path, report_to_json_string(&out.report).unwrap()).unwrap();
        reports.push(std::fs::read(&path).unwrap());
        let mut bytes = Vec::new();
        for (i, sol) in out.solutions.iter().enumerate() {
            let csv = dir.path().join(format!("solution-{run}-{i}.csv"));
            write_gridmap(sol, &csv).unwrap();
            bytes.push(std::fs::read(&csv).unwrap());
        }
        solution_bytes.push(bytes);
    }
    let reports_same = reports[0] == reports[1] && reports[0] == reports[2];
    let solutions_same =
        solution_bytes[0] == solution_bytes[1] && solution_bytes[0] == solution_bytes[2];
    ok &= reports_same && solutions_same;
    detail.push_str(&format!(
        "experiment reports equal: {reports_same}; solutions equal across reruns and worker counts: {solutions_same}"
    ));

    verdict_line(8, ok, &detail);
    assert!(ok, "{detail}");
}
