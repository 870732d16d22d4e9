//! Dirichlet solver: minimizes the discrete area functional over interior
//! node values with the boundary held fixed.

pub mod boundary;
pub mod experiment;

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::graphgeom::{area, area_and_gradient, Domain, GridMap};
use crate::mat::{dot, norm2};
use boundary::{affine_extension, BoundaryData};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Backtracking line-search parameters.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct LineSearchParams {
    /// Step shrink factor per backtrack, in (0, 1).
    pub shrink: f64,
    /// Sufficient-decrease constant, in (0, 0.5].
    pub sufficient_decrease: f64,
}

impl Default for LineSearchParams {
    fn default() -> Self {
        LineSearchParams { shrink: 0.5, sufficient_decrease: 1e-4 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Stop when the sup norm of the area gradient falls below this.
    pub grad_tol: f64,
    pub line_search: LineSearchParams,
    /// Quasi-Newton memory length; 0 disables acceleration.
    pub accel: usize,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iters: 20_000,
            grad_tol: 1e-8,
            line_search: LineSearchParams::default(),
            accel: 8,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(invalid("max_iters must be positive"));
        }
        if !(self.grad_tol > 0.0 && self.grad_tol.is_finite()) {
            return Err(invalid("grad_tol must be positive and finite"));
        }
        let ls = &self.line_search;
        if !(ls.shrink > 0.0 && ls.shrink < 1.0) {
            return Err(invalid("line-search shrink factor must lie in (0, 1)"));
        }
        if !(ls.sufficient_decrease > 0.0 && ls.sufficient_decrease <= 0.5) {
            return Err(invalid("sufficient-decrease constant must lie in (0, 0.5]"));
        }
        Ok(())
    }
}

/// Starting point for the descent.
#[derive(Debug, Clone)]
pub enum Init {
    /// Explicit map; must match the domain and the boundary data.
    Map(GridMap),
    /// Affine extension of the boundary plus seeded uniform noise on
    /// interior nodes. `noise_amplitude` defaults to 0.25 times the
    /// boundary oscillation.
    Seed { seed: u64, noise_amplitude: Option<f64> },
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ConvergenceRecord {
    pub iterations: usize,
    pub initial_area: f64,
    pub final_area: f64,
    pub grad_sup: f64,
    pub converged: bool,
    /// Line-search acceptances where the requested decrease fell below
    /// the floating-point resolution of the area value.
    pub weak_steps: usize,
}

#[derive(Debug, Clone)]
pub struct SolveOutput {
    pub map: GridMap,
    pub record: ConvergenceRecord,
}

#[derive(Debug, thiserror::Error)]
pub enum SolveError {
    #[error(transparent)]
    Invalid(#[from] Error),
    #[error("no convergence after {} iterations (gradient sup norm {:.3e})",
        .0.record.iterations, .0.record.grad_sup)]
    NonConvergence(Box<SolveOutput>),
    #[error("line search stalled at iteration {} (gradient sup norm {:.3e})",
        .0.record.iterations, .0.record.grad_sup)]
    Stall(Box<SolveOutput>),
}

/// Interior degrees of freedom of a map, in node order.
struct Dofs {
    nodes: Vec<usize>,
    n: usize,
}

impl Dofs {
    fn new(map: &GridMap) -> Self {
        let nodes = map
            .boundary_mask()
            .iter()
            .enumerate()
            .filter(|(_, &b)| !b)
            .map(|(i, _)| i)
            .collect();
        Dofs { nodes, n: map.target_dim() }
    }

    fn len(&self) -> usize {
        self.nodes.len() * self.n
    }

    fn pack(&self, full: &[f64]) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.len());
        for &node in &self.nodes {
            x.extend_from_slice(&full[node * self.n..(node + 1) * self.n]);
        }
        x
    }

    fn apply(&self, map: &mut GridMap, x: &[f64]) {
        let vals = map.values_mut();
        for (k, &node) in self.nodes.iter().enumerate() {
            vals[node * self.n..(node + 1) * self.n]
                .copy_from_slice(&x[k * self.n..(k + 1) * self.n]);
        }
    }
}

fn sup(x: &[f64]) -> f64 {
    x.iter().fold(0.0f64, |a, &v| a.max(v.abs()))
}

/// Builds the initial map for a solve: either the supplied map (checked
/// against the boundary) or the noised affine extension. Boundary node
/// values are overwritten with the exact BoundaryData values either way.
pub fn initial_map(
    domain: &Domain,
    bdata: &BoundaryData,
    init: &Init,
) -> Result<GridMap> {
    let bvals = bdata.boundary_values(domain)?;
    let n = bdata.target_dim();
    let mut map = match init {
        Init::Map(g) => {
            if g.domain() != domain {
                return Err(invalid("initial map is defined on a different domain"));
            }
            if g.target_dim() != n {
                return Err(invalid(format!(
                    "initial map has target dimension {}, boundary data has {n}",
                    g.target_dim()
                )));
            }
            let mut gap = 0.0f64;
            for (node, v) in &bvals {
                for c in 0..n {
                    gap = gap.max((g.node_value(*node)[c] - v[c]).abs());
                }
            }
            if gap > 1e-9 {
                return Err(invalid(format!(
                    "initial map disagrees with the boundary data (sup gap {gap:.3e})"
                )));
            }
            g.clone()
        }
        Init::Seed { seed, noise_amplitude } => {
            let mut g = affine_extension(domain, bdata)?;
            let amp = match noise_amplitude {
                Some(a) => *a,
                None => 0.25 * bdata.oscillation(domain)?,
            };
            if !(amp.is_finite() && amp >= 0.0) {
                return Err(invalid("noise amplitude must be finite and non-negative"));
            }
            if amp > 0.0 {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let mask = g.boundary_mask().to_vec();
                let vals = g.values_mut();
                for node in 0..mask.len() {
                    if mask[node] {
                        continue;
                    }
                    for c in 0..n {
                        vals[node * n + c] += rng.gen_range(-amp..=amp);
                    }
                }
            }
            g
        }
    };
    // Pin the boundary bit-exactly to the boundary data.
    let vals = map.values_mut();
    for (node, v) in &bvals {
        vals[node * n..(node + 1) * n].copy_from_slice(v);
    }
    Ok(map)
}

/// Two-loop recursion for the limited-memory quasi-Newton direction.
fn lbfgs_direction(g: &[f64], history: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    let gamma = history
        .back()
        .map(|(s, y, _)| dot(s, y) / dot(y, y))
        .unwrap_or(1.0);
    for qi in q.iter_mut() {
        *qi *= gamma;
    }
    for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    for qi in q.iter_mut() {
        *qi = -*qi;
    }
    q
}

/// Minimizes the area functional over interior node values. Accepted
/// steps never increase the area; the boundary rows of the output are
/// bit-equal to the boundary data.
pub fn solve_dirichlet(
    domain: &Domain,
    bdata: &BoundaryData,
    init: &Init,
    config: &SolverConfig,
) -> std::result::Result<SolveOutput, SolveError> {
    config.validate()?;
    let mut map = initial_map(domain, bdata, init)?;
    let dofs = Dofs::new(&map);

    let (mut f, grad_full) = area_and_gradient(&map);
    let initial_area = f;
    if !f.is_finite() {
        return Err(SolveError::Invalid(invalid("initial map has non-finite area")));
    }
    let mut g = dofs.pack(&grad_full);
    let mut x = dofs.pack(map.values());

    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut iterations = 0usize;
    let mut weak_steps = 0usize;
    let c = config.line_search.sufficient_decrease;
    let shrink = config.line_search.shrink;
    // Once the achievable Armijo decrease falls below the resolution of
    // f, f cannot certify progress any more; from there on the iterates
    // are polished by truncated Newton steps certified by a strict
    // decrease of the squared gradient norm (which stays fully
    // resolvable all the way down), guarded by area non-increase at
    // evaluation precision.
    let mut polishing = false;
    let mut trial = vec![0.0; x.len()];

    loop {
        let grad_sup = sup(&g);
        let record = |converged: bool, f: f64, weak_steps: usize| ConvergenceRecord {
            iterations,
            initial_area,
            final_area: f,
            grad_sup,
            converged,
            weak_steps,
        };
        if grad_sup <= config.grad_tol || dofs.len() == 0 {
            return Ok(SolveOutput { map, record: record(true, f, weak_steps) });
        }
        if iterations >= config.max_iters {
            return Err(SolveError::NonConvergence(Box::new(SolveOutput {
                map,
                record: record(false, f, weak_steps),
            })));
        }

        if !polishing {
            let mut d = lbfgs_direction(&g, &history);
            let mut gd = dot(&g, &d);
            if !(gd < 0.0) || !gd.is_finite() {
                history.clear();
                d = g.iter().map(|v| -v).collect();
                gd = -dot(&g, &g);
            }
            let floor = 64.0 * f64::EPSILON * (1.0 + f.abs());
            if c * gd.abs() < floor {
                polishing = true;
                continue;
            }

            let mut alpha = 1.0f64;
            let mut accepted = None;
            loop {
                let decrease = c * alpha * gd;
                if decrease.abs() < floor {
                    break;
                }
                for ((t, xi), di) in trial.iter_mut().zip(&x).zip(&d) {
                    *t = xi + alpha * di;
                }
                dofs.apply(&mut map, &trial);
                let f_trial = area(&map);
                if f_trial.is_finite() && f_trial <= f + decrease {
                    accepted = Some(f_trial);
                    break;
                }
                alpha *= shrink;
            }
            let f_new = match accepted {
                Some(v) => v,
                None => {
                    dofs.apply(&mut map, &x);
                    if history.is_empty() {
                        polishing = true;
                    } else {
                        // Possibly poisoned curvature history; rebuild.
                        history.clear();
                    }
                    continue;
                }
            };
            let g_new = dofs.pack(&area_and_gradient(&map).1);

            if config.accel > 0 {
                let s: Vec<f64> = trial.iter().zip(&x).map(|(t, xi)| t - xi).collect();
                let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
                let sy = dot(&s, &y);
                // Steps at roundoff scale produce y vectors dominated by
                // gradient evaluation noise; keep them out of the history.
                if sy > 1e-10 * norm2(&s) * norm2(&y) && sup(&s) > 1e-12 {
                    history.push_back((s, y, 1.0 / sy));
                    while history.len() > config.accel {
                        history.pop_front();
                    }
                }
            }

            x.copy_from_slice(&trial);
            f = f_new;
            g = g_new;
            iterations += 1;
            continue;
        }

        // Polish phase: approximate Newton direction from conjugate
        // gradients on H d = -g, with Hessian-vector products by forward
        // differences of the analytic gradient.
        let phi = dot(&g, &g);
        let x_scale = 1.0 + sup(&x);
        let hessvec = |v: &[f64], map: &mut GridMap, probe: &mut Vec<f64>| -> Vec<f64> {
            let vs = sup(v);
            if vs == 0.0 {
                return vec![0.0; v.len()];
            }
            let sigma = 1e-7 * x_scale / vs;
            for ((p, xi), vi) in probe.iter_mut().zip(&x).zip(v) {
                *p = xi + sigma * vi;
            }
            dofs.apply(map, probe);
            let gp = dofs.pack(&area_and_gradient(map).1);
            gp.iter().zip(&g).map(|(a, b)| (a - b) / sigma).collect()
        };

        let max_cg = dofs.len().min(300);
        let forcing = grad_sup.sqrt().min(0.5);
        let mut d = vec![0.0; x.len()];
        let mut r: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut p = r.clone();
        let mut rr = dot(&r, &r);
        let cg_tol = forcing * rr.sqrt();
        let mut probe = vec![0.0; x.len()];
        for i in 0..max_cg {
            let hp = hessvec(&p, &mut map, &mut probe);
            let php = dot(&p, &hp);
            if !(php > 1e-12 * dot(&p, &p)) || !php.is_finite() {
                if i == 0 {
                    d.copy_from_slice(&r);
                }
                break;
            }
            let a = rr / php;
            for (di, pi) in d.iter_mut().zip(&p) {
                *di += a * pi;
            }
            for (ri, hi) in r.iter_mut().zip(&hp) {
                *ri -= a * hi;
            }
            let rr_new = dot(&r, &r);
            if rr_new.sqrt() <= cg_tol {
                break;
            }
            let beta = rr_new / rr;
            rr = rr_new;
            for (pi, ri) in p.iter_mut().zip(&r) {
                *pi = ri + beta * *pi;
            }
        }
        if d.iter().all(|&v| v == 0.0) {
            d = g.iter().map(|v| -v).collect();
        }

        let mut steepest_tried = false;
        let (f_new, g_new) = 'polish: loop {
            let mut alpha = 1.0f64;
            while alpha >= 1e-20 {
                for ((t, xi), di) in trial.iter_mut().zip(&x).zip(&d) {
                    *t = xi + alpha * di;
                }
                dofs.apply(&mut map, &trial);
                let (f_trial, grad_full) = area_and_gradient(&map);
                let gt = dofs.pack(&grad_full);
                let phi_trial = dot(&gt, &gt);
                if f_trial.is_finite()
                    && f_trial <= f + 4.0 * f64::EPSILON * (1.0 + f.abs())
                    && phi_trial < phi
                    && trial != x
                {
                    break 'polish (f_trial, gt);
                }
                alpha *= shrink;
            }
            if !steepest_tried {
                steepest_tried = true;
                d = g.iter().map(|v| -v).collect();
                continue;
            }
            dofs.apply(&mut map, &x);
            return Err(SolveError::Stall(Box::new(SolveOutput {
                map,
                record: record(false, f, weak_steps),
            })));
        };

        weak_steps += 1;
        x.copy_from_slice(&trial);
        f = f_new;
        g = g_new;
        iterations += 1;
    }
}
