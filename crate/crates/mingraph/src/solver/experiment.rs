//! Uniqueness experiment: many independent solves of the same Dirichlet
//! problem, pairwise comparison, and constraint-set audits.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::graphgeom::{singular_field, Domain, GridMap};
use crate::homotopy::gradient_vanishing_diagnostic;
use crate::svkit::ConstraintSet;
use crate::variation::area_along;

use super::boundary::BoundaryData;
use super::{solve_dirichlet, Init, SolveError, SolveOutput, SolverConfig};

/// Singular values within this excess of the constraint threshold still
/// count as inside the set; covers eigensolver roundoff at the boundary.
pub const AUDIT_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct ExperimentParams {
    pub n_inits: usize,
    pub constraint: ConstraintSet,
    /// Uniform noise half-width around the affine extension; None means
    /// 0.25 times the boundary oscillation.
    pub noise_amplitude: Option<f64>,
    /// Two solutions closer than this in sup norm count as equal.
    pub uniqueness_tol: f64,
    /// Sample count for each pairwise area profile.
    pub homotopy_samples: usize,
    /// Explicit per-run seeds; None derives seed + run index from the
    /// solver config.
    pub run_seeds: Option<Vec<u64>>,
}

impl ExperimentParams {
    pub fn new(n_inits: usize, constraint: ConstraintSet) -> Self {
        ExperimentParams {
            n_inits,
            constraint,
            noise_amplitude: None,
            uniqueness_tol: 1e-6,
            homotopy_samples: 21,
            run_seeds: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_inits < 2 {
            return Err(invalid("experiment needs at least two initializations"));
        }
        if !(self.uniqueness_tol > 0.0 && self.uniqueness_tol.is_finite()) {
            return Err(invalid("uniqueness_tol must be positive and finite"));
        }
        if self.homotopy_samples < 3 {
            return Err(invalid("homotopy_samples must be at least 3"));
        }
        if let Some(seeds) = &self.run_seeds {
            if seeds.len() != self.n_inits {
                return Err(invalid(format!(
                    "run_seeds has {} entries for {} initializations",
                    seeds.len(),
                    self.n_inits
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct RunRecord {
    pub seed: u64,
    pub converged: bool,
    pub iterations: usize,
    pub initial_area: f64,
    pub final_area: f64,
    pub grad_sup: f64,
    /// Worst constraint excess over all simplices of the solution.
    pub audit_max_excess: f64,
    pub audit_pass: bool,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct PairRecord {
    pub first: usize,
    pub second: usize,
    pub sup_distance: f64,
    /// Area along the straight-line homotopy between the two solutions.
    pub areas: Vec<f64>,
    /// Smallest centered second difference of the area profile.
    pub min_second_difference: f64,
    /// Frame-invariant differential of the difference field at t = 1/2.
    pub gradient_diagnostic: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Unique,
    NotUnique,
    Undefined,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ExperimentReport {
    pub constraint: ConstraintSet,
    pub uniqueness_tol: f64,
    pub runs: Vec<RunRecord>,
    pub pairs: Vec<PairRecord>,
    pub max_pairwise_distance: f64,
    pub verdict: Verdict,
    pub verdict_reason: Option<String>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub report: ExperimentReport,
    pub solutions: Vec<GridMap>,
}

/// Worker count: explicit override, else available parallelism, capped by
/// the MINGRAPH_THREADS environment variable and the run count.
fn resolve_threads(requested: Option<usize>, n_runs: usize) -> usize {
    let base = requested.unwrap_or_else(|| {
        std::thread::available_parallelism().map(|p| p.get()).unwrap_or(1)
    });
    let cap = std::env::var("MINGRAPH_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&t| t >= 1)
        .unwrap_or(usize::MAX);
    base.min(cap).min(n_runs).max(1)
}

/// Runs the uniqueness experiment. Solves are distributed over worker
/// threads by run index; everything downstream of the solves is
/// aggregated single-threaded in index order, so the report does not
/// depend on the worker count.
pub fn uniqueness_experiment(
    domain: &Domain,
    bdata: &BoundaryData,
    params: &ExperimentParams,
    config: &SolverConfig,
    threads: Option<usize>,
) -> Result<ExperimentOutput> {
    params.validate()?;
    config.validate()?;
    bdata.validate(domain)?;

    let seeds: Vec<u64> = match &params.run_seeds {
        Some(s) => s.clone(),
        None => (0..params.n_inits)
            .map(|i| config.seed.wrapping_add(i as u64))
            .collect(),
    };
    let workers = resolve_threads(threads, params.n_inits);

    let slots: Vec<Mutex<Option<std::result::Result<SolveOutput, SolveError>>>> =
        (0..params.n_inits).map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= params.n_inits {
                    break;
                }
                let init = Init::Seed {
                    seed: seeds[i],
                    noise_amplitude: params.noise_amplitude,
                };
                let out = solve_dirichlet(domain, bdata, &init, config);
                *slots[i].lock().unwrap() = Some(out);
            });
        }
    });

    let mut runs = Vec::with_capacity(params.n_inits);
    let mut solutions = Vec::with_capacity(params.n_inits);
    let mut failed_runs = Vec::new();
    for (i, slot) in slots.into_iter().enumerate() {
        let result = slot.into_inner().unwrap().expect("every run index was claimed");
        let (out, converged) = match result {
            Ok(out) => (out, true),
            Err(SolveError::NonConvergence(out)) | Err(SolveError::Stall(out)) => {
                failed_runs.push(i);
                (*out, false)
            }
            Err(SolveError::Invalid(e)) => return Err(e),
        };
        let mut excess = f64::NEG_INFINITY;
        for lambda in singular_field(&out.map) {
            excess = excess.max(params.constraint.excess(&lambda));
        }
        runs.push(RunRecord {
            seed: seeds[i],
            converged,
            iterations: out.record.iterations,
            initial_area: out.record.initial_area,
            final_area: out.record.final_area,
            grad_sup: out.record.grad_sup,
            audit_max_excess: excess,
            audit_pass: excess <= AUDIT_TOL,
        });
        solutions.push(out.map);
    }

    let ts: Vec<f64> = (0..params.homotopy_samples)
        .map(|k| k as f64 / (params.homotopy_samples - 1) as f64)
        .collect();
    let mut pairs = Vec::new();
    let mut max_distance = 0.0f64;
    for i in 0..solutions.len() {
        for j in (i + 1)..solutions.len() {
            let sup = solutions[i].sup_distance(&solutions[j]);
            max_distance = max_distance.max(sup);
            let areas = area_along(&solutions[i], &solutions[j], &ts)?;
            let mut min_second = f64::INFINITY;
            for k in 1..areas.len() - 1 {
                min_second = min_second.min(areas[k + 1] - 2.0 * areas[k] + areas[k - 1]);
            }
            let diag =
                gradient_vanishing_diagnostic(&solutions[i], &solutions[j], 0.5, AUDIT_TOL)?;
            pairs.push(PairRecord {
                first: i,
                second: j,
                sup_distance: sup,
                areas,
                min_second_difference: min_second,
                gradient_diagnostic: diag.max_p_square,
            });
        }
    }

    let audits_pass = runs.iter().all(|r| r.audit_pass);
    let distances_pass = pairs.iter().all(|p| p.sup_distance < params.uniqueness_tol);
    let (verdict, reason) = if !failed_runs.is_empty() {
        let list = failed_runs
            .iter()
            .map(|i| i.to_string())
            .collect::<Vec<_>>()
            .join(", ");
        (Verdict::Undefined, Some(format!("runs [{list}] did not converge")))
    } else if audits_pass && distances_pass {
        (Verdict::Unique, None)
    } else {
        let mut why = Vec::new();
        if !distances_pass {
            why.push(format!(
                "max pairwise distance {max_distance:.3e} exceeds {:.1e}",
                params.uniqueness_tol
            ));
        }
        if !audits_pass {
            why.push("a solution leaves the constraint set".to_string());
        }
        (Verdict::NotUnique, Some(why.join("; ")))
    };

    Ok(ExperimentOutput {
        report: ExperimentReport {
            constraint: params.constraint,
            uniqueness_tol: params.uniqueness_tol,
            runs,
            pairs,
            max_pairwise_distance: max_distance,
            verdict,
            verdict_reason: reason,
        },
        solutions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::svkit::ConstraintKind;

    fn square(res: usize) -> Domain {
        Domain::new(vec![1.0, 1.0], vec![res, res]).unwrap()
    }

    fn small_affine() -> BoundaryData {
        BoundaryData::Affine {
            matrix: vec![vec![0.3, 0.1], vec![-0.1, 0.2]],
            offset: vec![0.0, 0.0],
        }
    }

    fn quick_config() -> SolverConfig {
        SolverConfig { grad_tol: 1e-10, ..SolverConfig::default() }
    }

    #[test]
    fn identical_seeds_give_zero_distance() {
        let mut params =
            ExperimentParams::new(2, ConstraintSet::new(ConstraintKind::SupOne));
        params.run_seeds = Some(vec![5, 5]);
        let out = uniqueness_experiment(
            &square(7),
            &small_affine(),
            &params,
            &quick_config(),
            Some(2),
        )
        .unwrap();
        assert_eq!(out.report.pairs.len(), 1);
        assert_eq!(out.report.pairs[0].sup_distance, 0.0);
        assert_eq!(out.report.verdict, Verdict::Unique);
    }

    #[test]
    fn distinct_seeds_converge_to_one_solution() {
        let params = ExperimentParams {
            noise_amplitude: Some(0.2),
            ..ExperimentParams::new(3, ConstraintSet::new(ConstraintKind::SupOne))
        };
        let out = uniqueness_experiment(
            &square(7),
            &small_affine(),
            &params,
            &quick_config(),
            None,
        )
        .unwrap();
        assert_eq!(out.report.verdict, Verdict::Unique);
        assert!(out.report.max_pairwise_distance < 1e-6);
        for run in &out.report.runs {
            assert!(run.converged);
            assert!(run.audit_pass, "excess {}", run.audit_max_excess);
        }
        for pair in &out.report.pairs {
            assert!(pair.min_second_difference >= -1e-9);
            assert!(pair.gradient_diagnostic <= 1e-9);
        }
    }

    #[test]
    fn report_is_independent_of_thread_count() {
        let mut params =
            ExperimentParams::new(3, ConstraintSet::new(ConstraintKind::SumSquares));
        params.noise_amplitude = Some(0.15);
        let one = uniqueness_experiment(
            &square(5),
            &small_affine(),
            &params,
            &quick_config(),
            Some(1),
        )
        .unwrap();
        let three = uniqueness_experiment(
            &square(5),
            &small_affine(),
            &params,
            &quick_config(),
            Some(3),
        )
        .unwrap();
        assert_eq!(one.report, three.report);
        for (a, b) in one.solutions.iter().zip(&three.solutions) {
            for (x, y) in a.values().iter().zip(b.values()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn non_convergent_run_marks_verdict_undefined() {
        let params = ExperimentParams {
            noise_amplitude: Some(0.3),
            ..ExperimentParams::new(2, ConstraintSet::new(ConstraintKind::SupOne))
        };
        let cfg = SolverConfig { max_iters: 1, grad_tol: 1e-14, ..SolverConfig::default() };
        let out = uniqueness_experiment(&square(7), &small_affine(), &params, &cfg, Some(1))
            .unwrap();
        assert_eq!(out.report.verdict, Verdict::Undefined);
        assert!(out.report.verdict_reason.as_deref().unwrap().contains("did not converge"));
        assert!(out.report.runs.iter().any(|r| !r.converged));
    }

    #[test]
    fn params_are_validated() {
        let c = ConstraintSet::new(ConstraintKind::SupOne);
        assert!(ExperimentParams::new(1, c).validate().is_err());
        let mut p = ExperimentParams::new(2, c);
        p.run_seeds = Some(vec![1]);
        assert!(p.validate().is_err());
        let mut p = ExperimentParams::new(2, c);
        p.homotopy_samples = 2;
        assert!(p.validate().is_err());
    }
}
