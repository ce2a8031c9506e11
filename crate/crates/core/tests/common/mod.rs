//! Independent reference implementation of the semi-discrete TE operator.
//!
//! Everything here is rebuilt from scratch in physical coordinates: a
//! Lagrange basis from monomials, Gauss rules from Newton iteration, edge
//! adjacency by vertex matching, and neighbor traces by evaluating the
//! neighbor polynomial at the physical quadrature point. Only the node
//! locations on the reference triangle are shared with the library.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, z);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, z);
        x[i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

fn legendre(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, dp)
}

/// Collapsed-coordinate rule on the reference triangle (-1,-1),(1,-1),(-1,1):
/// points (r, s) and weights summing to the area 2.
pub fn triangle_rule(n: usize) -> Vec<(f64, f64, f64)> {
    let (x, w) = gauss_legendre(n);
    let mut out = Vec::with_capacity(n * n);
    for (a, wa) in x.iter().zip(&w) {
        for (b, wb) in x.iter().zip(&w) {
            let r = 0.5 * (1.0 + a) * (1.0 - b) - 1.0;
            let s = *b;
            out.push((r, s, wa * wb * 0.5 * (1.0 - b)));
        }
    }
    out
}

pub fn monomials(order: usize) -> Vec<(i32, i32)> {
    let mut m = Vec::new();
    for total in 0..=order as i32 {
        for j in 0..=total {
            m.push((total - j, j));
        }
    }
    m
}

/// Lagrange basis on the reference triangle through the given nodes.
pub struct LagrangeBasis {
    pub order: usize,
    mono: Vec<(i32, i32)>,
    coef: DMatrix<f64>,
}

impl LagrangeBasis {
    pub fn new(order: usize, r: &[f64], s: &[f64]) -> Self {
        let mono = monomials(order);
        let v = DMatrix::from_fn(r.len(), mono.len(), |n, m| r[n].powi(mono[m].0) * s[n].powi(mono[m].1));
        let coef = v.try_inverse().expect("nodes must be unisolvent");
        Self { order, mono, coef }
    }

    pub fn len(&self) -> usize {
        self.mono.len()
    }

    pub fn values(&self, r: f64, s: f64) -> DVector<f64> {
        let p = DVector::from_iterator(self.mono.len(), self.mono.iter().map(|&(i, j)| r.powi(i) * s.powi(j)));
        self.coef.transpose() * p
    }

    /// (d/dr, d/ds) of every basis function.
    pub fn grads(&self, r: f64, s: f64) -> (DVector<f64>, DVector<f64>) {
        let pw = |x: f64, k: i32| if k <= 0 { 0.0 } else { k as f64 * x.powi(k - 1) };
        let pr = DVector::from_iterator(self.mono.len(), self.mono.iter().map(|&(i, j)| pw(r, i) * s.powi(j)));
        let ps = DVector::from_iterator(self.mono.len(), self.mono.iter().map(|&(i, j)| r.powi(i) * pw(s, j)));
        (self.coef.transpose() * pr, self.coef.transpose() * ps)
    }
}

/// Affine triangle in physical space.
#[derive(Clone, Copy, Debug)]
pub struct Tri {
    pub v: [[f64; 2]; 3],
}

impl Tri {
    pub fn jac(&self) -> [[f64; 2]; 2] {
        let [a, b, c] = self.v;
        [
            [0.5 * (b[0] - a[0]), 0.5 * (c[0] - a[0])],
            [0.5 * (b[1] - a[1]), 0.5 * (c[1] - a[1])],
        ]
    }

    pub fn det(&self) -> f64 {
        let j = self.jac();
        j[0][0] * j[1][1] - j[0][1] * j[1][0]
    }

    pub fn area(&self) -> f64 {
        2.0 * self.det()
    }

    pub fn to_physical(&self, r: f64, s: f64) -> [f64; 2] {
        let a = self.v[0];
        let j = self.jac();
        [
            a[0] + j[0][0] * (1.0 + r) + j[0][1] * (1.0 + s),
            a[1] + j[1][0] * (1.0 + r) + j[1][1] * (1.0 + s),
        ]
    }

    pub fn to_reference(&self, p: [f64; 2]) -> (f64, f64) {
        let a = self.v[0];
        let j = self.jac();
        let d = self.det();
        let (dx, dy) = (p[0] - a[0], p[1] - a[1]);
        let u = (j[1][1] * dx - j[0][1] * dy) / d;
        let w = (-j[1][0] * dx + j[0][0] * dy) / d;
        (u - 1.0, w - 1.0)
    }

    /// (r_x, r_y, s_x, s_y)
    pub fn inverse_metric(&self) -> (f64, f64, f64, f64) {
        let j = self.jac();
        let d = self.det();
        (j[1][1] / d, -j[0][1] / d, -j[1][0] / d, j[0][0] / d)
    }

    pub fn diameter(&self) -> f64 {
        let d = |p: [f64; 2], q: [f64; 2]| (p[0] - q[0]).hypot(p[1] - q[1]);
        d(self.v[0], self.v[1]).max(d(self.v[1], self.v[2])).max(d(self.v[2], self.v[0]))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Bc {
    Pec,
    Pmc,
    Sm,
}

pub struct OracleProblem {
    pub tris: Vec<Tri>,
    pub triangles: Vec<[usize; 3]>,
    /// row-major eps per element
    pub eps: Vec<[f64; 4]>,
    pub mu: Vec<f64>,
    pub alpha: f64,
    pub bc: Bc,
    pub basis: LagrangeBasis,
}

fn impedance(eps: &[f64; 4], mu: f64, n: [f64; 2]) -> f64 {
    let det = eps[0] * eps[3] - eps[1] * eps[2];
    let quad = n[0] * (eps[0] * n[0] + eps[1] * n[1]) + n[1] * (eps[2] * n[0] + eps[3] * n[1]);
    let eps_eff = det / quad;
    (mu / eps_eff).sqrt()
}

impl OracleProblem {
    fn eval(&self, k: usize, field: &[f64], p: [f64; 2]) -> f64 {
        let np = self.basis.len();
        let (r, s) = self.tris[k].to_reference(p);
        let phi = self.basis.values(r, s);
        (0..np).map(|i| phi[i] * field[k * np + i]).sum()
    }

    fn neighbor(&self, k: usize, e: usize) -> Option<usize> {
        let t = self.triangles[k];
        let (a, b) = (t[e], t[(e + 1) % 3]);
        (0..self.triangles.len()).find(|&j| {
            j != k && {
                let u = self.triangles[j];
                (0..3).any(|f| u[f] == b && u[(f + 1) % 3] == a)
            }
        })
    }

    /// Semi-discrete right-hand side (dEx/dt, dEy/dt, dHz/dt).
    pub fn rhs(&self, ex: &[f64], ey: &[f64], hz: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let np = self.basis.len();
        let nq = self.basis.order + 3;
        let vol_rule = triangle_rule(nq);
        let (gx, gw) = gauss_legendre(nq);
        let mut out = (vec![0.0; ex.len()], vec![0.0; ex.len()], vec![0.0; ex.len()]);

        for k in 0..self.tris.len() {
            let tri = self.tris[k];
            let det = tri.det();
            let (rx, ry, sx, sy) = tri.inverse_metric();
            let loc = |f: &[f64]| DVector::from_column_slice(&f[k * np..(k + 1) * np]);
            let (exk, eyk, hzk) = (loc(ex), loc(ey), loc(hz));

            let mut mass = DMatrix::zeros(np, np);
            let mut bx = DVector::zeros(np);
            let mut by = DVector::zeros(np);
            let mut bh = DVector::zeros(np);
            for &(r, s, w) in &vol_rule {
                let phi = self.basis.values(r, s);
                let (pr, ps) = self.basis.grads(r, s);
                let dx = &pr * rx + &ps * sx;
                let dy = &pr * ry + &ps * sy;
                let wj = w * det;
                mass += &phi * phi.transpose() * wj;
                let hz_x = dx.dot(&hzk);
                let hz_y = dy.dot(&hzk);
                let ex_y = dy.dot(&exk);
                let ey_x = dx.dot(&eyk);
                bx += &phi * (hz_y * wj);
                by += &phi * (-hz_x * wj);
                bh += &phi * ((ex_y - ey_x) * wj);
            }

            for e in 0..3 {
                let a = tri.v[e];
                let b = tri.v[(e + 1) % 3];
                let len = (b[0] - a[0]).hypot(b[1] - a[1]);
                let n = [(b[1] - a[1]) / len, -(b[0] - a[0]) / len];
                let zm = impedance(&self.eps[k], self.mu[k], n);
                let nb = self.neighbor(k, e);
                let zp = nb.map_or(zm, |j| impedance(&self.eps[j], self.mu[j], n));
                let (ym, yp) = (1.0 / zm, 1.0 / zp);
                for (t, w) in gx.iter().zip(&gw) {
                    let p = [
                        0.5 * (a[0] + b[0]) + 0.5 * t * (b[0] - a[0]),
                        0.5 * (a[1] + b[1]) + 0.5 * t * (b[1] - a[1]),
                    ];
                    let um = [self.eval(k, ex, p), self.eval(k, ey, p), self.eval(k, hz, p)];
                    let (up, alpha) = match nb {
                        Some(j) => ([self.eval(j, ex, p), self.eval(j, ey, p), self.eval(j, hz, p)], self.alpha),
                        None => match self.bc {
                            Bc::Pec => ([-um[0], -um[1], um[2]], self.alpha),
                            Bc::Pmc => ([um[0], um[1], -um[2]], self.alpha),
                            Bc::Sm => ([0.0; 3], 1.0),
                        },
                    };
                    let j = [um[0] - up[0], um[1] - up[1], um[2] - up[2]];
                    let ncj = n[0] * j[1] - n[1] * j[0];
                    let fe = (zp * j[2] - alpha * ncj) / (zp + zm);
                    let fx = -n[1] * fe;
                    let fy = n[0] * fe;
                    let fh = (yp * ncj - alpha * j[2]) / (yp + ym);
                    let (r, s) = tri.to_reference(p);
                    let phi = self.basis.values(r, s);
                    let ws = w * 0.5 * len;
                    bx += &phi * (fx * ws);
                    by += &phi * (fy * ws);
                    bh += &phi * (fh * ws);
                }
            }

            let lu = mass.lu();
            let (ax, ay, ah) = (lu.solve(&bx).unwrap(), lu.solve(&by).unwrap(), lu.solve(&bh).unwrap());
            let e = self.eps[k];
            let d = e[0] * e[3] - e[1] * e[2];
            let inv = [e[3] / d, -e[1] / d, -e[2] / d, e[0] / d];
            for i in 0..np {
                out.0[k * np + i] = inv[0] * ax[i] + inv[1] * ay[i];
                out.1[k * np + i] = inv[2] * ax[i] + inv[3] * ay[i];
                out.2[k * np + i] = ah[i] / self.mu[k];
            }
        }
        out
    }
}

/// (||u||_T^2, ||grad u||_T^2, [||u||_{f_e}^2 for each edge]) for the
/// polynomial with monomial coefficients `c` in reference coordinates.
pub fn polynomial_norms(tri: &Tri, order: usize, c: &[f64]) -> (f64, f64, [f64; 3]) {
    let mono = monomials(order);
    let val = |r: f64, s: f64| mono.iter().zip(c).map(|(&(i, j), ci)| ci * r.powi(i) * s.powi(j)).sum::<f64>();
    let pw = |x: f64, k: i32| if k <= 0 { 0.0 } else { k as f64 * x.powi(k - 1) };
    let (rx, ry, sx, sy) = tri.inverse_metric();
    let det = tri.det();
    let mut l2 = 0.0;
    let mut h1 = 0.0;
    for (r, s, w) in triangle_rule(order + 2) {
        let u = val(r, s);
        let ur: f64 = mono.iter().zip(c).map(|(&(i, j), ci)| ci * pw(r, i) * s.powi(j)).sum();
        let us: f64 = mono.iter().zip(c).map(|(&(i, j), ci)| ci * r.powi(i) * pw(s, j)).sum();
        let (ux, uy) = (ur * rx + us * sx, ur * ry + us * sy);
        l2 += w * det * u * u;
        h1 += w * det * (ux * ux + uy * uy);
    }
    let (gx, gw) = gauss_legendre(order + 2);
    let corners = [(-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0)];
    let mut faces = [0.0; 3];
    for e in 0..3 {
        let (a, b) = (corners[e], corners[(e + 1) % 3]);
        let pa = tri.to_physical(a.0, a.1);
        let pb = tri.to_physical(b.0, b.1);
        let len = (pb[0] - pa[0]).hypot(pb[1] - pa[1]);
        for (t, w) in gx.iter().zip(&gw) {
            let r = 0.5 * (a.0 + b.0) + 0.5 * t * (b.0 - a.0);
            let s = 0.5 * (a.1 + b.1) + 0.5 * t * (b.1 - a.1);
            let u = val(r, s);
            faces[e] += w * 0.5 * len * u * u;
        }
    }
    (l2, h1, faces)
}

pub mod setup {
    use super::*;
    use dgtd::dg_core::{BoundaryCondition, DgOperator, FieldState, FluxParams};
    use dgtd::materials::{MaterialMap, PermittivityTensor};
    use dgtd::mesh::Mesh2D;
    use dgtd::reference_element::ReferenceElement;
    use rand::Rng;

    pub fn random_spd(rng: &mut impl Rng) -> [f64; 4] {
        let (a, b, c) = (rng.gen_range(0.3..2.0), rng.gen_range(-1.0..1.0), rng.gen_range(0.3..2.0));
        // L L^T with L = [[a, 0], [b, c]]
        [a * a, a * b, a * b, b * b + c * c]
    }

    /// Two triangles splitting a randomly perturbed unit quadrilateral.
    pub fn random_pair(rng: &mut impl Rng) -> (Vec<[f64; 2]>, Vec<[usize; 3]>) {
        let mut jitter = |x: f64, y: f64| [x + rng.gen_range(-0.15..0.15), y + rng.gen_range(-0.15..0.15)];
        let v = vec![jitter(0.0, 0.0), jitter(1.0, 0.0), jitter(1.0, 1.0), jitter(0.0, 1.0)];
        (v, vec![[0, 1, 2], [0, 2, 3]])
    }

    pub fn to_bc(bc: Bc) -> BoundaryCondition {
        match bc {
            Bc::Pec => BoundaryCondition::Pec,
            Bc::Pmc => BoundaryCondition::Pmc,
            Bc::Sm => BoundaryCondition::SilverMuller,
        }
    }

    pub struct Pair {
        pub op: DgOperator,
        pub oracle: OracleProblem,
    }

    pub fn build(
        vertices: Vec<[f64; 2]>,
        triangles: Vec<[usize; 3]>,
        eps: Vec<[f64; 4]>,
        mu: Vec<f64>,
        order: usize,
        alpha: f64,
        bc: Bc,
    ) -> Pair {
        let re = ReferenceElement::new(order).unwrap();
        let basis = LagrangeBasis::new(order, re.r(), re.s());
        let tris = triangles
            .iter()
            .map(|t| Tri { v: [vertices[t[0]], vertices[t[1]], vertices[t[2]]] })
            .collect();
        let mesh = Mesh2D::new(vertices, triangles.clone()).unwrap();
        let tensors = eps
            .iter()
            .map(|e| PermittivityTensor::new(e[0], e[1], e[2], e[3]).unwrap())
            .collect();
        let mat = MaterialMap::new(tensors, mu.clone()).unwrap();
        let op = DgOperator::new(re, mesh, mat, FluxParams::new(alpha, to_bc(bc)).unwrap()).unwrap();
        Pair {
            op,
            oracle: OracleProblem { tris, triangles, eps, mu, alpha, bc, basis },
        }
    }

    pub fn random_state(op: &DgOperator, rng: &mut impl Rng) -> FieldState {
        let mut st = op.zero_state(0.0);
        for v in st.ex.iter_mut().chain(st.ey.iter_mut()).chain(st.hz.iter_mut()) {
            *v = rng.gen_range(-1.0..1.0);
        }
        st
    }

    pub fn max_abs(v: &[f64]) -> f64 {
        v.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
    }

    /// One random trial; returns the relative discrepancy of spatial_rhs.
    pub fn rhs_trial(rng: &mut impl Rng, order: usize, alpha: f64, bc: Bc) -> f64 {
        let (v, t) = random_pair(rng);
        let eps = vec![random_spd(rng), random_spd(rng)];
        let mu = vec![rng.gen_range(0.5..2.0), rng.gen_range(0.5..2.0)];
        let pair = build(v, t, eps, mu, order, alpha, bc);
        let st = random_state(&pair.op, rng);
        let lib = pair.op.spatial_rhs(&st);
        let (ox, oy, oh) = pair.oracle.rhs(&st.ex, &st.ey, &st.hz);
        let scale = max_abs(&ox).max(max_abs(&oy)).max(max_abs(&oh));
        max_diff(&lib.ex, &ox).max(max_diff(&lib.ey, &oy)).max(max_diff(&lib.hz, &oh)) / scale
    }
}
