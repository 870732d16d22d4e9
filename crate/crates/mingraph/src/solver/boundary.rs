//! Dirichlet boundary data families and their extension to initial maps.

use crate::error::{check_finite, invalid, Result};
use crate::graphgeom::{Domain, GridMap};
use crate::mat::{spd_solve, Mat};

/// One explicitly specified boundary node value.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplicitNode {
    pub index: Vec<usize>,
    pub value: Vec<f64>,
}

/// Supported boundary data families.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryData {
    /// phi(x) = A x + c.
    Affine { matrix: Vec<Vec<f64>>, offset: Vec<f64> },
    /// Component c: amplitude * sin(pi * <frequencies_c, x> + phase_c).
    Sinusoidal { amplitude: f64, frequencies: Vec<Vec<f64>>, phases: Vec<f64> },
    /// Values given per boundary node; must cover every boundary node
    /// exactly once.
    Explicit { target_dim: usize, values: Vec<ExplicitNode> },
    /// Zero on the whole boundary.
    Zero { target_dim: usize },
}

impl BoundaryData {
    pub fn target_dim(&self) -> usize {
        match self {
            BoundaryData::Affine { matrix, .. } => matrix.len(),
            BoundaryData::Sinusoidal { frequencies, .. } => frequencies.len(),
            BoundaryData::Explicit { target_dim, .. } => *target_dim,
            BoundaryData::Zero { target_dim } => *target_dim,
        }
    }

    pub fn validate(&self, domain: &Domain) -> Result<()> {
        let m = domain.dim();
        match self {
            BoundaryData::Affine { matrix, offset } => {
                if matrix.is_empty() || offset.len() != matrix.len() {
                    return Err(invalid("affine boundary needs one offset per matrix row"));
                }
                for row in matrix {
                    if row.len() != m {
                        return Err(invalid(format!(
                            "affine boundary matrix rows must have {m} columns"
                        )));
                    }
                    check_finite("affine boundary matrix", row)?;
                }
                check_finite("affine boundary offset", offset)?;
            }
            BoundaryData::Sinusoidal { amplitude, frequencies, phases } => {
                if !amplitude.is_finite() {
                    return Err(invalid("sinusoidal amplitude must be finite"));
                }
                if frequencies.is_empty() {
                    return Err(invalid("sinusoidal boundary needs at least one component"));
                }
                for row in frequencies {
                    if row.len() != m {
                        return Err(invalid(format!(
                            "sinusoidal frequency rows must have {m} entries"
                        )));
                    }
                    check_finite("sinusoidal frequencies", row)?;
                }
                if phases.len() != frequencies.len() {
                    return Err(invalid("sinusoidal boundary needs one phase per component"));
                }
                check_finite("sinusoidal phases", phases)?;
            }
            BoundaryData::Explicit { target_dim, values } => {
                if *target_dim == 0 {
                    return Err(invalid("explicit boundary target_dim must be positive"));
                }
                let mut seen = std::collections::HashSet::new();
                for node in values {
                    if node.index.len() != m {
                        return Err(invalid("explicit boundary index arity mismatch"));
                    }
                    if node
                        .index
                        .iter()
                        .zip(domain.resolution())
                        .any(|(&i, &r)| i >= r)
                    {
                        return Err(invalid(format!(
                            "explicit boundary index {:?} out of range",
                            node.index
                        )));
                    }
                    if !domain.is_boundary_multi(&node.index) {
                        return Err(invalid(format!(
                            "explicit boundary index {:?} is an interior node",
                            node.index
                        )));
                    }
                    if node.value.len() != *target_dim {
                        return Err(invalid("explicit boundary value arity mismatch"));
                    }
                    check_finite("explicit boundary value", &node.value)?;
                    if !seen.insert(domain.node_index(&node.index)) {
                        return Err(invalid(format!(
                            "explicit boundary index {:?} given twice",
                            node.index
                        )));
                    }
                }
                let boundary_count = (0..domain.node_count())
                    .filter(|&i| domain.is_boundary_multi(&domain.node_multi(i)))
                    .count();
                if seen.len() != boundary_count {
                    return Err(invalid(format!(
                        "explicit boundary covers {} of {boundary_count} boundary nodes",
                        seen.len()
                    )));
                }
            }
            BoundaryData::Zero { target_dim } => {
                if *target_dim == 0 {
                    return Err(invalid("zero boundary target_dim must be positive"));
                }
            }
        }
        Ok(())
    }

    /// Values on boundary nodes, as (node index, value) pairs in node
    /// order.
    pub fn boundary_values(&self, domain: &Domain) -> Result<Vec<(usize, Vec<f64>)>> {
        self.validate(domain)?;
        let n = self.target_dim();
        let mut out = Vec::new();
        let explicit: Option<std::collections::HashMap<usize, &[f64]>> = match self {
            BoundaryData::Explicit { values, .. } => Some(
                values
                    .iter()
                    .map(|e| (domain.node_index(&e.index), e.value.as_slice()))
                    .collect(),
            ),
            _ => None,
        };
        for node in 0..domain.node_count() {
            let multi = domain.node_multi(node);
            if !domain.is_boundary_multi(&multi) {
                continue;
            }
            let x = domain.node_position(node);
            let value = match self {
                BoundaryData::Affine { matrix, offset } => (0..n)
                    .map(|c| {
                        offset[c]
                            + matrix[c].iter().zip(&x).map(|(a, xi)| a * xi).sum::<f64>()
                    })
                    .collect(),
                BoundaryData::Sinusoidal { amplitude, frequencies, phases } => (0..n)
                    .map(|c| {
                        let arg: f64 = frequencies[c]
                            .iter()
                            .zip(&x)
                            .map(|(k, xi)| k * xi)
                            .sum();
                        amplitude * (std::f64::consts::PI * arg + phases[c]).sin()
                    })
                    .collect(),
                BoundaryData::Explicit { .. } => explicit
                    .as_ref()
                    .unwrap()
                    .get(&node)
                    .expect("validation covered every boundary node")
                    .to_vec(),
                BoundaryData::Zero { .. } => vec![0.0; n],
            };
            out.push((node, value));
        }
        Ok(out)
    }

    /// Largest component-wise oscillation (max - min) over boundary nodes.
    pub fn oscillation(&self, domain: &Domain) -> Result<f64> {
        let values = self.boundary_values(domain)?;
        let n = self.target_dim();
        let mut osc = 0.0f64;
        for c in 0..n {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for (_, v) in &values {
                lo = lo.min(v[c]);
                hi = hi.max(v[c]);
            }
            osc = osc.max(hi - lo);
        }
        Ok(osc)
    }
}

/// Least-squares affine fit to the boundary values, evaluated on every
/// node. For affine boundary data this reproduces the exact affine
/// extension (up to solve roundoff); in general it is the natural
/// low-frequency seed for descent.
pub fn affine_extension(domain: &Domain, boundary: &BoundaryData) -> Result<GridMap> {
    let values = boundary.boundary_values(domain)?;
    let m = domain.dim();
    let n = boundary.target_dim();

    // Normal equations over [x, 1] features.
    let dim = m + 1;
    let mut ata = Mat::zeros(dim, dim);
    let mut atb = vec![vec![0.0; dim]; n];
    for (node, v) in &values {
        let mut feat = domain.node_position(*node);
        feat.push(1.0);
        for a in 0..dim {
            for b in 0..dim {
                ata[(a, b)] += feat[a] * feat[b];
            }
            for c in 0..n {
                atb[c][a] += feat[a] * v[c];
            }
        }
    }
    let mut coeffs = Vec::with_capacity(n);
    for c in 0..n {
        coeffs.push(spd_solve(&ata, &atb[c])?);
    }

    GridMap::from_fn(domain.clone(), n, |x| {
        coeffs
            .iter()
            .map(|co| {
                co[m] + co.iter().take(m).zip(x).map(|(a, xi)| a * xi).sum::<f64>()
            })
            .collect()
    })
}
