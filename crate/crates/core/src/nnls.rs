//! Lawson–Hanson active-set solver for `min ‖Ax − b‖₂` subject to `x ≥ 0`.

use nalgebra::{DMatrix, DVector};

const SVD_EPS: f64 = 1e-14;

/// Returns the minimizer and the residual norm.
pub(crate) fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> (DVector<f64>, f64) {
    let n = a.ncols();
    let tol = 1e-12 * a.norm().max(1.0) * b.norm().max(1.0);
    let mut x = DVector::<f64>::zeros(n);
    let mut passive = vec![false; n];
    let max_outer = 3 * n + 10;
    for _ in 0..max_outer {
        let w = a.transpose() * (b - a * &x);
        let pick = (0..n)
            .filter(|&j| !passive[j])
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(t) = pick.filter(|&t| w[t] > tol) else {
            break;
        };
        passive[t] = true;
        // Inner loop keeps the passive solution feasible.
        for _ in 0..=n {
            let s = passive_solve(a, b, &passive);
            let bad: Vec<usize> = (0..n).filter(|&j| passive[j] && s[j] <= 0.0).collect();
            if bad.is_empty() {
                x = s;
                break;
            }
            let alpha = bad
                .iter()
                .map(|&j| x[j] / (x[j] - s[j]))
                .fold(f64::INFINITY, f64::min);
            x += (s - &x) * alpha;
            for j in 0..n {
                if passive[j] && x[j] <= tol {
                    passive[j] = false;
                    x[j] = 0.0;
                }
            }
        }
    }
    let residual = (a * &x - b).norm();
    (x, residual)
}

/// Unconstrained least squares over the passive columns; zero elsewhere.
fn passive_solve(a: &DMatrix<f64>, b: &DVector<f64>, passive: &[bool]) -> DVector<f64> {
    let cols: Vec<usize> = (0..passive.len()).filter(|&j| passive[j]).collect();
    let sub = a.select_columns(&cols);
    let z = sub
        .svd(true, true)
        .solve(b, SVD_EPS)
        .unwrap_or_else(|_| DVector::zeros(cols.len()));
    let mut out = DVector::zeros(passive.len());
    for (k, &j) in cols.iter().enumerate() {
        out[j] = z[k];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn recovers_nonnegative_solution() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![0.3, 0.7, 1.0]);
        let (x, r) = nnls(&a, &b);
        assert!(r < 1e-12);
        assert!((x[0] - 0.3).abs() < 1e-12 && (x[1] - 0.7).abs() < 1e-12);
    }

    #[test]
    fn clamps_negative_direction() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let b = DVector::from_vec(vec![-1.0, 2.0]);
        let (x, r) = nnls(&a, &b);
        assert_eq!(x[0], 0.0);
        assert!((x[1] - 2.0).abs() < 1e-12);
        assert!((r - 1.0).abs() < 1e-12);
    }

    proptest! {
        // Optimality: feasible, and the gradient has the right sign on
        // both the zero and the positive coordinates.
        #[test]
        fn kkt_conditions(vals in proptest::collection::vec(-1.0f64..1.0, 12), rhs in proptest::collection::vec(-1.0f64..1.0, 4)) {
            let a = DMatrix::from_row_slice(4, 3, &vals);
            let b = DVector::from_vec(rhs);
            let (x, _) = nnls(&a, &b);
            let g = a.transpose() * (&b - &a * &x);
            for j in 0..3 {
                prop_assert!(x[j] >= 0.0);
                if x[j] > 1e-9 {
                    prop_assert!(g[j].abs() < 1e-8);
                } else {
                    prop_assert!(g[j] < 1e-8);
                }
            }
        }
    }
}
