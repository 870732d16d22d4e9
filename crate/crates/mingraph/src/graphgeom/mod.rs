//! Grid-backed maps into R^n, per-simplex Jacobians and pullback metrics,
//! and the discrete area functional with its gradient.

mod domain;
pub mod io;

pub use domain::{Domain, DomainMeta, MAX_DIM};

use crate::error::{check_finite, invalid, Result};
use crate::mat::{cholesky_solve, CompensatedSum, Mat};
use crate::svkit::{singular_values, SingularValueVector};

/// A piecewise-linear map from a [`Domain`] grid into R^n. Values are
/// stored node-major: component c of node i sits at `values[i * n + c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMap {
    domain: Domain,
    target_dim: usize,
    values: Vec<f64>,
    boundary: Vec<bool>,
}

impl GridMap {
    pub fn new(domain: Domain, target_dim: usize, values: Vec<f64>) -> Result<Self> {
        if target_dim == 0 {
            return Err(invalid("target dimension must be positive"));
        }
        if values.len() != domain.node_count() * target_dim {
            return Err(invalid(format!(
                "expected {} values ({} nodes x {target_dim}), got {}",
                domain.node_count() * target_dim,
                domain.node_count(),
                values.len()
            )));
        }
        check_finite("grid values", &values)?;
        let boundary = (0..domain.node_count())
            .map(|i| domain.is_boundary_multi(&domain.node_multi(i)))
            .collect();
        Ok(GridMap { domain, target_dim, values, boundary })
    }

    pub fn constant(domain: Domain, value: &[f64]) -> Result<Self> {
        let n = value.len();
        let values = value.repeat(domain.node_count());
        GridMap::new(domain, n, values)
    }

    /// Builds a map by evaluating `f` at every node position (row-major
    /// node order).
    pub fn from_fn<F>(domain: Domain, target_dim: usize, mut f: F) -> Result<Self>
    where
        F: FnMut(&[f64]) -> Vec<f64>,
    {
        let mut values = Vec::with_capacity(domain.node_count() * target_dim);
        for i in 0..domain.node_count() {
            let out = f(&domain.node_position(i));
            if out.len() != target_dim {
                return Err(invalid("node function returned a wrong-sized value"));
            }
            values.extend_from_slice(&out);
        }
        GridMap::new(domain, target_dim, values)
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn target_dim(&self) -> usize {
        self.target_dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn node_value(&self, node: usize) -> &[f64] {
        &self.values[node * self.target_dim..(node + 1) * self.target_dim]
    }

    pub fn boundary_mask(&self) -> &[bool] {
        &self.boundary
    }

    pub fn same_domain(&self, other: &GridMap) -> bool {
        self.domain == other.domain && self.target_dim == other.target_dim
    }

    pub fn sup_distance(&self, other: &GridMap) -> f64 {
        debug_assert!(self.same_domain(other));
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn boundary_sup_distance(&self, other: &GridMap) -> f64 {
        debug_assert!(self.same_domain(other));
        let n = self.target_dim;
        let mut worst: f64 = 0.0;
        for (node, &is_b) in self.boundary.iter().enumerate() {
            if !is_b {
                continue;
            }
            for c in 0..n {
                let k = node * n + c;
                worst = worst.max((self.values[k] - other.values[k]).abs());
            }
        }
        worst
    }

    /// (1 - t) * self + t * other on every node. Caller guarantees matching
    /// domains.
    pub fn interpolate(&self, other: &GridMap, t: f64) -> Result<GridMap> {
        if !self.same_domain(other) {
            return Err(invalid("interpolation requires maps on the same domain"));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (1.0 - t) * a + t * b)
            .collect();
        GridMap::new(self.domain.clone(), self.target_dim, values)
    }
}

/// Pullback metric data of one simplex: g = I + J^T J and sqrt(det g).
#[derive(Debug, Clone)]
pub struct MetricSample {
    pub g: Mat,
    pub sqrt_det: f64,
}

/// Jacobian of the affine piece over simplex `s`: an n x m matrix whose
/// column along axis a is the divided difference of the vertex path edge
/// in that axis.
pub fn jacobian(f: &GridMap, s: usize) -> Mat {
    let d = f.domain();
    let (nodes, perm) = d.simplex_nodes(s);
    let n = f.target_dim();
    let mut j = Mat::zeros(n, d.dim());
    for (k, &axis) in perm.iter().enumerate() {
        let h = d.spacing(axis);
        let hi = f.node_value(nodes[k + 1]);
        let lo = f.node_value(nodes[k]);
        for c in 0..n {
            j[(c, axis)] = (hi[c] - lo[c]) / h;
        }
    }
    j
}

pub fn pullback_metric(j: &Mat) -> MetricSample {
    let mut g = j.gram();
    for i in 0..g.rows() {
        g[(i, i)] += 1.0;
    }
    let l = g.cholesky().expect("I + J^T J is positive definite");
    let sqrt_det = (0..l.rows()).map(|i| l[(i, i)]).product();
    MetricSample { g, sqrt_det }
}

/// Total area of the graph of f: sum over simplices of sqrt(det g) times
/// the simplex volume. Accumulated in simplex order with compensated
/// summation, so the result is reproducible bit-for-bit.
pub fn area(f: &GridMap) -> f64 {
    let vol = f.domain().simplex_volume();
    let mut acc = CompensatedSum::new();
    for s in 0..f.domain().simplex_count() {
        let j = jacobian(f, s);
        acc.add(pullback_metric(&j).sqrt_det * vol);
    }
    acc.value()
}

/// Gradient of [`area`] with respect to node values, with boundary node
/// entries zeroed (boundary values are Dirichlet data, not variables).
pub fn area_gradient(f: &GridMap) -> Vec<f64> {
    area_and_gradient(f).1
}

/// Computes the area and its gradient in one sweep.
pub fn area_and_gradient(f: &GridMap) -> (f64, Vec<f64>) {
    let d = f.domain();
    let n = f.target_dim();
    let m = d.dim();
    let vol = d.simplex_volume();
    let mut grad = vec![0.0; f.values().len()];
    let mut acc = CompensatedSum::new();

    for s in 0..d.simplex_count() {
        let (nodes, perm) = d.simplex_nodes(s);
        let j = jacobian(f, s);
        let MetricSample { g, sqrt_det } = pullback_metric(&j);
        acc.add(sqrt_det * vol);

        // d(area_s)/dJ = vol * sqrt_det * J g^{-1}; chain through the
        // divided differences onto the path vertices.
        let l = g.cholesky().expect("I + J^T J is positive definite");
        let jt = j.transpose();
        let mut jg = Mat::zeros(n, m);
        for c in 0..n {
            let solved = cholesky_solve(&l, &jt.col(c));
            for a in 0..m {
                jg[(c, a)] = solved[a];
            }
        }
        let w = vol * sqrt_det;
        for (k, &axis) in perm.iter().enumerate() {
            let h = d.spacing(axis);
            for c in 0..n {
                let contrib = w * jg[(c, axis)] / h;
                grad[nodes[k + 1] * n + c] += contrib;
                grad[nodes[k] * n + c] -= contrib;
            }
        }
    }

    for (node, &is_b) in f.boundary_mask().iter().enumerate() {
        if is_b {
            for c in 0..n {
                grad[node * n + c] = 0.0;
            }
        }
    }
    (acc.value(), grad)
}

/// Per-simplex singular values of the differential, in simplex order.
pub fn singular_field(f: &GridMap) -> Vec<SingularValueVector> {
    (0..f.domain().simplex_count())
        .map(|s| {
            singular_values(&jacobian(f, s))
                .expect("grid map jacobians are finite")
                .0
        })
        .collect()
}
