//! Singular values via Householder QR followed by one-sided Jacobi on the square factor.

use ndarray::{s, Array2, ArrayView2};

use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 60;

/// Upper-triangular `R` of `A = QR` (`A` is tall: rows >= cols).
fn householder_r(a: ArrayView2<f64>) -> Array2<f64> {
    let (m, n) = a.dim();
    let mut r = a.to_owned();
    let mut v = vec![0.0; m];
    for k in 0..n {
        let norm = r.slice(s![k.., k]).iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if r[[k, k]] > 0.0 { -norm } else { norm };
        for i in k..m {
            v[i] = r[[i, k]];
        }
        v[k] -= alpha;
        let vnorm2: f64 = v[k..m].iter().map(|x| x * x).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        for j in k..n {
            let dot: f64 = (k..m).map(|i| v[i] * r[[i, j]]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in k..m {
                r[[i, j]] -= f * v[i];
            }
        }
    }
    r.slice(s![..n, ..]).to_owned()
}

/// Singular values of `a`, sorted descending.
pub fn singular_values(a: ArrayView2<f64>) -> Result<Vec<f64>> {
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("matrix contains non-finite values"));
    }
    let a = if a.nrows() >= a.ncols() { a } else { a.reversed_axes() };
    let n = a.ncols();
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut w = householder_r(a);
    let tol = f64::EPSILON * n as f64;
    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for i in 0..n {
                    let (x, y) = (w[[i, p]], w[[i, q]]);
                    alpha += x * x;
                    beta += y * y;
                    gamma += x * y;
                }
                if gamma == 0.0 || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let sn = c * t;
                for i in 0..n {
                    let (x, y) = (w[[i, p]], w[[i, q]]);
                    w[[i, p]] = c * x - sn * y;
                    w[[i, q]] = sn * x + c * y;
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Numeric("Jacobi SVD did not converge".into()));
    }
    let mut sv: Vec<f64> = (0..n).map(|j| w.column(j).iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    Ok(sv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn diagonal_and_known_2x2() {
        let sv = singular_values(array![[3.0, 0.0], [0.0, -5.0], [0.0, 0.0]].view()).unwrap();
        assert!((sv[0] - 5.0).abs() < 1e-14 && (sv[1] - 3.0).abs() < 1e-14);
        // [[1,1],[0,1]]: golden-ratio singular values
        let sv = singular_values(array![[1.0, 1.0], [0.0, 1.0]].view()).unwrap();
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((sv[0] - phi).abs() < 1e-14 && (sv[1] - 1.0 / phi).abs() < 1e-14);
    }

    #[test]
    fn rank_one_outer_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = Array::from_shape_fn((300, 1), |_| rng.gen_range(-1.0..1.0));
        let v = Array::from_shape_fn((1, 64), |_| rng.gen_range(-1.0..1.0));
        let sv = singular_values(u.dot(&v).view()).unwrap();
        assert_eq!(sv.iter().filter(|&&s| s > 1e-10 * sv[0]).count(), 1);
    }

    #[test]
    fn identity_padded_in_time() {
        let mut a = Array2::<f64>::zeros((200, 64));
        a.slice_mut(s![50..114, ..]).assign(&Array2::eye(64));
        let sv = singular_values(a.view()).unwrap();
        assert!(sv.iter().all(|s| (s - 1.0).abs() < 1e-13));
    }

    #[test]
    fn wide_matrix_uses_transpose() {
        let a = array![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]];
        let b = singular_values(a.view()).unwrap();
        let c = singular_values(a.t()).unwrap();
        assert_eq!(b.len(), 2);
        assert!(b.iter().zip(&c).all(|(x, y)| (x - y).abs() < 1e-13));
    }
}
