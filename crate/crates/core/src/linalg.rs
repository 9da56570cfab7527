//! Small dense linear algebra for the normal-equation solves used by the
//! least-squares fitters. Matrices here are tiny (a handful of columns), so a
//! plain Cholesky factorization with a relative pivot threshold is enough.

/// Cholesky factorization of a symmetric matrix stored row-major in `a`
/// (only the lower triangle is referenced). Overwrites `a` with the factor.
///
/// Returns `false` when a pivot falls below `rel_tol` times the matrix's
/// largest original diagonal entry, which signals linear dependence.
pub fn cholesky_in_place(a: &mut [f64], n: usize, rel_tol: f64) -> bool {
    debug_assert_eq!(a.len(), n * n);
    // Pivots are compared to their own column's original diagonal, so
    // columns of very different scales (a constant next to quartic terms)
    // are each judged on their own footing.
    let diag: Vec<f64> = (0..n)
        .map(|i| a[i * n + i].abs().max(f64::MIN_POSITIVE))
        .collect();
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !(d > rel_tol * diag[j]) {
            return false;
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
    }
    true
}

/// Solves L·Lᵀ·x = b given the factor from [`cholesky_in_place`];
/// the solution overwrites `b`.
pub fn cholesky_solve(l: &[f64], n: usize, b: &mut [f64]) {
    debug_assert_eq!(b.len(), n);
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

/// Solves min ‖X·w − y‖² + Σ_j ridge[j]·w_j² by normal equations.
///
/// `design` holds one observation per row (include a ones column for an
/// intercept; give it zero ridge to leave it unpenalized). Returns `None`
/// when the regularized system is linearly dependent.
pub fn least_squares(design: &[Vec<f64>], y: &[f64], ridge: &[f64]) -> Option<Vec<f64>> {
    let n = design.first()?.len();
    debug_assert_eq!(ridge.len(), n);
    debug_assert_eq!(design.len(), y.len());
    let mut gram = vec![0.0; n * n];
    let mut rhs = vec![0.0; n];
    for (row, &yi) in design.iter().zip(y) {
        for i in 0..n {
            for j in 0..=i {
                gram[i * n + j] += row[i] * row[j];
            }
            rhs[i] += row[i] * yi;
        }
    }
    for i in 0..n {
        gram[i * n + i] += ridge[i];
    }
    if !cholesky_in_place(&mut gram, n, 1e-12) {
        return None;
    }
    cholesky_solve(&gram, n, &mut rhs);
    Some(rhs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_exact_affine() {
        // y = 3x - 2 with intercept column first
        let design: Vec<Vec<f64>> = (0..5).map(|i| vec![1.0, i as f64]).collect();
        let y: Vec<f64> = (0..5).map(|i| 3.0 * i as f64 - 2.0).collect();
        let w = least_squares(&design, &y, &[0.0, 0.0]).unwrap();
        assert!((w[0] + 2.0).abs() < 1e-10);
        assert!((w[1] - 3.0).abs() < 1e-10);
    }

    #[test]
    fn detects_duplicate_columns() {
        let design: Vec<Vec<f64>> = (0..6)
            .map(|i| vec![1.0, i as f64, i as f64])
            .collect();
        let y: Vec<f64> = (0..6).map(|i| i as f64).collect();
        assert!(least_squares(&design, &y, &[0.0, 0.0, 0.0]).is_none());
        // ...but a ridge on the weights restores solvability
        assert!(least_squares(&design, &y, &[0.0, 1e-6, 1e-6]).is_some());
    }

    #[test]
    fn underdetermined_needs_ridge() {
        let design = vec![vec![1.0, 2.0, 4.0]];
        let y = vec![1.0];
        assert!(least_squares(&design, &y, &[0.0, 0.0, 0.0]).is_none());
        assert!(least_squares(&design, &y, &[1e-8, 1e-8, 1e-8]).is_some());
    }
}
