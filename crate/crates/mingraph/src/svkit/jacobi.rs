//! Cyclic Jacobi diagonalization for small symmetric matrices.
//!
//! The sweep order (p < q in row-major order) and the rotation formulas are
//! fixed, so for a given input the eigenpairs are bit-reproducible. That
//! property is load-bearing: downstream frames feed reports whose bytes are
//! compared across reruns.

use crate::mat::Mat;

const MAX_SWEEPS: usize = 64;

/// Returns (eigenvalues, eigenvectors-as-columns) with eigenvalues sorted
/// in descending order. Ties keep the pre-sort index order, and each
/// eigenvector is sign-normalized so its largest-magnitude entry is
/// positive.
pub(crate) fn symmetric_eigen(a: &Mat) -> (Vec<f64>, Mat) {
    assert_eq!(a.rows(), a.cols(), "eigen solve needs a square matrix");
    let n = a.rows();
    let mut a = a.clone();
    let mut v = Mat::identity(n);

    let scale: f64 = a.data().iter().map(|x| x * x).sum::<f64>().sqrt();
    let off_tol = if scale > 0.0 { scale * 1e-15 } else { 0.0 };

    for _ in 0..MAX_SWEEPS {
        let off: f64 = {
            let mut acc = 0.0;
            for p in 0..n {
                for q in p + 1..n {
                    acc += a[(p, q)] * a[(p, q)];
                }
            }
            acc.sqrt()
        };
        if off <= off_tol {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                // Large theta would overflow theta^2; fall back to the
                // first-order tangent.
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                    sign / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                let app = a[(p, p)];
                let aqq = a[(q, q)];
                a[(p, p)] = app - t * apq;
                a[(q, q)] = aqq + t * apq;
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    if k != p && k != q {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = c * akp - s * akq;
                        a[(p, k)] = a[(k, p)];
                        a[(k, q)] = s * akp + c * akq;
                        a[(q, k)] = a[(k, q)];
                    }
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let eigs: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eigs[j].partial_cmp(&eigs[i]).unwrap().then(i.cmp(&j)));

    let mut sorted_eigs = Vec::with_capacity(n);
    let mut sorted_vecs = Mat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        sorted_eigs.push(eigs[src]);
        let mut col = v.col(src);
        let mut imax = 0;
        for (k, x) in col.iter().enumerate() {
            if x.abs() > col[imax].abs() {
                imax = k;
            }
        }
        if col[imax] < 0.0 {
            for x in &mut col {
                *x = -*x;
            }
        }
        sorted_vecs.set_col(dst, &col);
    }
    (sorted_eigs, sorted_vecs)
}
