//! Tridiagonal systems.

/// Solves `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]` by the
/// Thomas algorithm. `lower[0]` and `upper[n-1]` are ignored.
///
/// No pivoting: callers pass diagonally dominant matrices.
pub fn solve(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    debug_assert!(lower.len() == n && upper.len() == n && rhs.len() == n);
    if n == 0 {
        return Vec::new();
    }
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = upper[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let denom = diag[i] - lower[i] * c[i - 1];
        c[i] = if i + 1 < n { upper[i] / denom } else { 0.0 };
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / denom;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    x
}

/// Max-norm of `A x - rhs` scaled by the max-norm of `rhs` (or 1).
pub fn relative_residual(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64], x: &[f64]) -> f64 {
    let n = diag.len();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let mut ax = diag[i] * x[i];
        if i > 0 {
            ax += lower[i] * x[i - 1];
        }
        if i + 1 < n {
            ax += upper[i] * x[i + 1];
        }
        worst = worst.max((ax - rhs[i]).abs());
    }
    let scale = rhs.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    worst / scale
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_dense_oracle() {
        let lower = [0.0, -1.0, -2.0, 0.5];
        let diag = [4.0, 5.0, 6.0, 3.0];
        let upper = [1.0, -1.0, 1.5, 0.0];
        let x_true = [1.0, -2.0, 0.5, 3.0];
        let rhs: Vec<f64> = (0..4)
            .map(|i| {
                let mut s = diag[i] * x_true[i];
                if i > 0 {
                    s += lower[i] * x_true[i - 1];
                }
                if i < 3 {
                    s += upper[i] * x_true[i + 1];
                }
                s
            })
            .collect();
        let x = solve(&lower, &diag, &upper, &rhs);
        for (a, b) in x.iter().zip(x_true) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(relative_residual(&lower, &diag, &upper, &rhs, &x) < 1e-15);
    }

    #[test]
    fn single_cell() {
        assert_eq!(solve(&[0.0], &[2.0], &[0.0], &[3.0]), vec![1.5]);
    }
}
