//! Orthonormal Jacobi polynomials and Gauss-type quadrature on [-1, 1].

use nalgebra::{DMatrix, SymmetricEigen};

fn gamma(x: f64) -> f64 {
    // Only integer and half-integer arguments occur here, so the product form is exact enough.
    let mut x = x;
    let mut acc = 1.0;
    while x > 1.5 {
        x -= 1.0;
        acc *= x;
    }
    if (x - 0.5).abs() < 1e-12 {
        acc * std::f64::consts::PI.sqrt()
    } else {
        acc
    }
}

/// Evaluates the normalized Jacobi polynomial P_n^{(alpha,beta)} at `x`.
///
/// Normalized so that the polynomials are orthonormal on [-1, 1] with weight
/// (1-x)^alpha (1+x)^beta.
pub fn jacobi_p(x: f64, alpha: f64, beta: f64, n: usize) -> f64 {
    let ab = alpha + beta;
    let gamma0 = 2f64.powf(ab + 1.0) / (ab + 1.0) * gamma(alpha + 1.0) * gamma(beta + 1.0)
        / gamma(ab + 1.0);
    let p0 = 1.0 / gamma0.sqrt();
    if n == 0 {
        return p0;
    }
    let gamma1 = (alpha + 1.0) * (beta + 1.0) / (ab + 3.0) * gamma0;
    let p1 = ((ab + 2.0) * x / 2.0 + (alpha - beta) / 2.0) / gamma1.sqrt();
    if n == 1 {
        return p1;
    }

    let mut a_old = 2.0 / (2.0 + ab) * ((alpha + 1.0) * (beta + 1.0) / (ab + 3.0)).sqrt();
    let (mut pm1, mut p) = (p0, p1);
    for i in 1..n {
        let i = i as f64;
        let h1 = 2.0 * i + ab;
        let a_new = 2.0 / (h1 + 2.0)
            * ((i + 1.0) * (i + 1.0 + ab) * (i + 1.0 + alpha) * (i + 1.0 + beta)
                / (h1 + 1.0)
                / (h1 + 3.0))
                .sqrt();
        let b_new = -(alpha * alpha - beta * beta) / h1 / (h1 + 2.0);
        let next = (-a_old * pm1 + (x - b_new) * p) / a_new;
        pm1 = p;
        p = next;
        a_old = a_new;
    }
    p
}

/// Derivative of [`jacobi_p`] with respect to `x`.
pub fn grad_jacobi_p(x: f64, alpha: f64, beta: f64, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        let nf = n as f64;
        (nf * (nf + alpha + beta + 1.0)).sqrt() * jacobi_p(x, alpha + 1.0, beta + 1.0, n - 1)
    }
}

/// Gauss-Jacobi quadrature with `n + 1` points: returns (points, weights).
pub fn jacobi_gq(alpha: f64, beta: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let ab = alpha + beta;
    if n == 0 {
        let total = 2f64.powf(ab + 1.0) / (ab + 1.0) * gamma(alpha + 1.0) * gamma(beta + 1.0)
            / gamma(ab + 1.0);
        return (vec![-(alpha - beta) / (ab + 2.0)], vec![total]);
    }
    // Golub-Welsch: eigenvalues of the symmetric Jacobi matrix.
    let m = n + 1;
    let mut jac = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        let h1 = 2.0 * i as f64 + ab;
        let diag = if h1.abs() < 1e-14 {
            0.0
        } else {
            -(alpha * alpha - beta * beta) / (h1 + 2.0) / h1
        };
        jac[(i, i)] = diag;
        if i + 1 < m {
            let k = (i + 1) as f64;
            let off = 2.0 / (h1 + 2.0)
                * (k * (k + ab) * (k + alpha) * (k + beta) / (h1 + 1.0) / (h1 + 3.0)).sqrt();
            jac[(i, i + 1)] = off;
            jac[(i + 1, i)] = off;
        }
    }
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..m)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            let w = v0 * v0 * 2f64.powf(ab + 1.0) / (ab + 1.0) * gamma(alpha + 1.0)
                * gamma(beta + 1.0)
                / gamma(ab + 1.0);
            (eig.eigenvalues[i], w)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Gauss-Lobatto-Jacobi points (N+1 of them, endpoints included).
pub fn jacobi_gl(alpha: f64, beta: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![-1.0, 1.0];
    }
    let (interior, _) = jacobi_gq(alpha + 1.0, beta + 1.0, n - 2);
    let mut x = Vec::with_capacity(n + 1);
    x.push(-1.0);
    x.extend(interior);
    x.push(1.0);
    x
}

/// 1D Vandermonde matrix of orthonormal Legendre polynomials.
pub fn vandermonde_1d(n: usize, x: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(x.len(), n + 1, |i, j| jacobi_p(x[i], 0.0, 0.0, j))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_is_orthonormal_under_gauss_rule() {
        let (x, w) = jacobi_gq(0.0, 0.0, 10);
        for i in 0..6 {
            for j in 0..6 {
                let ip: f64 = x
                    .iter()
                    .zip(&w)
                    .map(|(&xq, &wq)| wq * jacobi_p(xq, 0.0, 0.0, i) * jacobi_p(xq, 0.0, 0.0, j))
                    .sum();
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((ip - expected).abs() < 1e-13, "({i},{j}) -> {ip}");
            }
        }
    }

    #[test]
    fn weighted_orthonormality_for_jacobi_2_0() {
        // weight (1-x)^2: integrate with a plain Legendre rule of high order.
        let (x, w) = jacobi_gq(0.0, 0.0, 20);
        for i in 0..4 {
            let ip: f64 = x
                .iter()
                .zip(&w)
                .map(|(&xq, &wq)| wq * (1.0 - xq).powi(2) * jacobi_p(xq, 2.0, 0.0, i).powi(2))
                .sum();
            assert!((ip - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gauss_lobatto_points_are_symmetric_with_endpoints() {
        for n in 1..=8 {
            let x = jacobi_gl(0.0, 0.0, n);
            assert_eq!(x.len(), n + 1);
            assert_eq!(x[0], -1.0);
            assert_eq!(x[n], 1.0);
            for i in 0..=n {
                assert!((x[i] + x[n - i]).abs() < 1e-13);
            }
        }
        let x = jacobi_gl(0.0, 0.0, 2);
        assert!(x[1].abs() < 1e-14);
        let x = jacobi_gl(0.0, 0.0, 3);
        assert!((x[2] - (1.0f64 / 5.0).sqrt()).abs() < 1e-13);
    }

    #[test]
    fn gradient_matches_finite_difference() {
        for n in 0..6 {
            let x = 0.3;
            let h = 1e-6;
            let fd = (jacobi_p(x + h, 1.0, 0.0, n) - jacobi_p(x - h, 1.0, 0.0, n)) / (2.0 * h);
            assert!((fd - grad_jacobi_p(x, 1.0, 0.0, n)).abs() < 1e-7);
        }
    }
}
