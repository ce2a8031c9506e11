//! Orthonormal modal basis and warp-and-blend interpolation nodes on the
//! reference triangle with vertices (-1,-1), (1,-1), (-1,1).

use nalgebra::DMatrix;

use super::jacobi::{grad_jacobi_p, jacobi_gl, jacobi_p, vandermonde_1d};

/// Collapsed coordinates (a, b) of a point (r, s).
pub fn rs_to_ab(r: f64, s: f64) -> (f64, f64) {
    let a = if (s - 1.0).abs() > 1e-14 {
        2.0 * (1.0 + r) / (1.0 - s) - 1.0
    } else {
        -1.0
    };
    (a, s)
}

/// Orthonormal basis function (i, j) on the reference triangle, i + j <= N.
pub fn simplex_p(r: f64, s: f64, i: usize, j: usize) -> f64 {
    let (a, b) = rs_to_ab(r, s);
    let h1 = jacobi_p(a, 0.0, 0.0, i);
    let h2 = jacobi_p(b, 2.0 * i as f64 + 1.0, 0.0, j);
    std::f64::consts::SQRT_2 * h1 * h2 * (1.0 - b).powi(i as i32)
}

/// Gradient (d/dr, d/ds) of [`simplex_p`].
pub fn grad_simplex_p(r: f64, s: f64, i: usize, j: usize) -> (f64, f64) {
    let (a, b) = rs_to_ab(r, s);
    let ai = 2.0 * i as f64 + 1.0;
    let fa = jacobi_p(a, 0.0, 0.0, i);
    let dfa = grad_jacobi_p(a, 0.0, 0.0, i);
    let gb = jacobi_p(b, ai, 0.0, j);
    let dgb = grad_jacobi_p(b, ai, 0.0, j);

    let ipow = |x: f64, p: i32| if p < 0 { 0.0 } else { x.powi(p) };
    let i32_ = i as i32;

    let mut dr = dfa * gb;
    if i > 0 {
        dr *= ipow(0.5 * (1.0 - b), i32_ - 1);
    }

    let mut ds = dfa * (gb * (0.5 * (1.0 + a)));
    if i > 0 {
        ds *= ipow(0.5 * (1.0 - b), i32_ - 1);
    }
    let mut tmp = dgb * ipow(0.5 * (1.0 - b), i32_);
    if i > 0 {
        tmp -= 0.5 * i as f64 * gb * ipow(0.5 * (1.0 - b), i32_ - 1);
    }
    ds += fa * tmp;

    let scale = 2f64.powf(i as f64 + 0.5);
    (dr * scale, ds * scale)
}

/// Iterates the modal index pairs (i, j) with i + j <= n in the canonical order.
pub fn modal_indices(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..=n).flat_map(move |i| (0..=n - i).map(move |j| (i, j)))
}

pub fn vandermonde_2d(n: usize, r: &[f64], s: &[f64]) -> DMatrix<f64> {
    let modes: Vec<_> = modal_indices(n).collect();
    DMatrix::from_fn(r.len(), modes.len(), |row, col| {
        let (i, j) = modes[col];
        simplex_p(r[row], s[row], i, j)
    })
}

pub fn grad_vandermonde_2d(n: usize, r: &[f64], s: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
    let modes: Vec<_> = modal_indices(n).collect();
    let mut vr = DMatrix::zeros(r.len(), modes.len());
    let mut vs = DMatrix::zeros(r.len(), modes.len());
    for row in 0..r.len() {
        for (col, &(i, j)) in modes.iter().enumerate() {
            let (dr, ds) = grad_simplex_p(r[row], s[row], i, j);
            vr[(row, col)] = dr;
            vs[(row, col)] = ds;
        }
    }
    (vr, vs)
}

// Optimized blend exponents for the warp-and-blend construction, indexed by N.
const ALPHA_OPT: [f64; 15] = [
    0.0000, 0.0000, 1.4152, 0.1001, 0.2751, 0.9800, 1.0999, 1.2832, 1.3648, 1.4773, 1.4959,
    1.5743, 1.5770, 1.6223, 1.6258,
];

fn warp_factor(n: usize, rout: &[f64]) -> Vec<f64> {
    let lgl = jacobi_gl(0.0, 0.0, n);
    let req: Vec<f64> = (0..=n).map(|i| -1.0 + 2.0 * i as f64 / n as f64).collect();
    let veq = vandermonde_1d(n, &req);
    let veq_t_inv = veq
        .transpose()
        .try_inverse()
        .expect("equispaced 1D Vandermonde is invertible");

    rout.iter()
        .map(|&x| {
            let p = nalgebra::DVector::from_fn(n + 1, |i, _| jacobi_p(x, 0.0, 0.0, i));
            let l = &veq_t_inv * p;
            let mut warp: f64 = (0..=n).map(|i| l[i] * (lgl[i] - req[i])).sum();
            if x.abs() < 1.0 - 1e-10 {
                warp /= 1.0 - x * x;
            } else {
                warp = 0.0;
            }
            warp
        })
        .collect()
}

/// Warp-and-blend interpolation nodes on the reference triangle.
pub fn warp_blend_nodes(n: usize) -> (Vec<f64>, Vec<f64>) {
    let alpha = ALPHA_OPT.get(n).copied().unwrap_or(5.0 / 3.0);
    let np = (n + 1) * (n + 2) / 2;
    let mut l1 = Vec::with_capacity(np);
    let mut l2 = Vec::with_capacity(np);
    let mut l3 = Vec::with_capacity(np);
    for i in 0..=n {
        for j in 0..=n - i {
            let a = i as f64 / n as f64;
            let c = j as f64 / n as f64;
            l1.push(a);
            l3.push(c);
            l2.push(1.0 - a - c);
        }
    }
    let sqrt3 = 3f64.sqrt();
    let mut x: Vec<f64> = (0..np).map(|k| -l2[k] + l3[k]).collect();
    let mut y: Vec<f64> = (0..np).map(|k| (-l2[k] - l3[k] + 2.0 * l1[k]) / sqrt3).collect();

    let d1: Vec<f64> = (0..np).map(|k| l3[k] - l2[k]).collect();
    let d2: Vec<f64> = (0..np).map(|k| l1[k] - l3[k]).collect();
    let d3: Vec<f64> = (0..np).map(|k| l2[k] - l1[k]).collect();
    let w1 = warp_factor(n, &d1);
    let w2 = warp_factor(n, &d2);
    let w3 = warp_factor(n, &d3);

    let (c2, s2) = ((2.0 * std::f64::consts::PI / 3.0).cos(), (2.0 * std::f64::consts::PI / 3.0).sin());
    let (c3, s3) = ((4.0 * std::f64::consts::PI / 3.0).cos(), (4.0 * std::f64::consts::PI / 3.0).sin());
    for k in 0..np {
        let warp1 = 4.0 * l2[k] * l3[k] * w1[k] * (1.0 + (alpha * l1[k]).powi(2));
        let warp2 = 4.0 * l1[k] * l3[k] * w2[k] * (1.0 + (alpha * l2[k]).powi(2));
        let warp3 = 4.0 * l1[k] * l2[k] * w3[k] * (1.0 + (alpha * l3[k]).powi(2));
        x[k] += warp1 + c2 * warp2 + c3 * warp3;
        y[k] += s2 * warp2 + s3 * warp3;
    }

    // equilateral (x, y) -> reference (r, s)
    let mut r = Vec::with_capacity(np);
    let mut s = Vec::with_capacity(np);
    for k in 0..np {
        let b1 = (sqrt3 * y[k] + 1.0) / 3.0;
        let b2 = (-3.0 * x[k] - sqrt3 * y[k] + 2.0) / 6.0;
        let b3 = (3.0 * x[k] - sqrt3 * y[k] + 2.0) / 6.0;
        r.push(-b2 + b3 - b1);
        s.push(-b2 - b3 + b1);
    }
    (r, s)
}
