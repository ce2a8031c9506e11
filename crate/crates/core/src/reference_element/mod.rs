//! Order-N nodal operators on the reference triangle.
//!
//! The reference triangle has vertices (-1,-1), (1,-1), (-1,1). Faces are
//! numbered counterclockwise: face 0 runs from vertex 0 to vertex 1 (s = -1),
//! face 1 from vertex 1 to vertex 2 (r + s = 0) and face 2 from vertex 2 back
//! to vertex 0 (r = -1). Face nodes are listed in that traversal direction,
//! so the two sides of a conforming interior edge see each other's face nodes
//! in reverse order.

pub mod jacobi;
pub mod simplex;

use nalgebra::{DMatrix, DVector};

use crate::error::{DgError, Result};
use simplex::{grad_vandermonde_2d, modal_indices, simplex_p, vandermonde_2d, warp_blend_nodes};

pub const MAX_ORDER: usize = 10;
pub const FACES: usize = 3;

const NODE_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct ReferenceElement {
    order: usize,
    r: Vec<f64>,
    s: Vec<f64>,
    vandermonde: DMatrix<f64>,
    inv_vandermonde: DMatrix<f64>,
    mass: DMatrix<f64>,
    diff_r: DMatrix<f64>,
    diff_s: DMatrix<f64>,
    face_nodes: [Vec<usize>; FACES],
    lift: DMatrix<f64>,
    face_mass_1d: DMatrix<f64>,
}

impl ReferenceElement {
    pub fn new(order: usize) -> Result<Self> {
        if order < 1 || order > MAX_ORDER {
            return Err(DgError::InvalidOrder {
                order,
                max: MAX_ORDER,
            });
        }
        let np = (order + 1) * (order + 2) / 2;
        let nfp = order + 1;
        let (r, s) = warp_blend_nodes(order);

        let v = vandermonde_2d(order, &r, &s);
        let inv_v = v
            .clone()
            .try_inverse()
            .ok_or_else(|| DgError::Numerical("singular 2D Vandermonde matrix".into()))?;
        let (vr, vs) = grad_vandermonde_2d(order, &r, &s);
        let diff_r = &vr * &inv_v;
        let diff_s = &vs * &inv_v;
        let vvt = &v * v.transpose();
        let mass = inv_v.transpose() * &inv_v;

        let face_nodes = find_face_nodes(&r, &s, nfp)?;

        let mut emat = DMatrix::zeros(np, FACES * nfp);
        let mut face_mass_1d = DMatrix::zeros(nfp, nfp);
        for (f, fmask) in face_nodes.iter().enumerate() {
            let t: Vec<f64> = fmask.iter().map(|&i| face_parameter(f, r[i], s[i])).collect();
            let v1 = jacobi::vandermonde_1d(order, &t);
            let m1 = (&v1 * v1.transpose())
                .try_inverse()
                .ok_or_else(|| DgError::Numerical("singular 1D Vandermonde matrix".into()))?;
            for (a, &vol) in fmask.iter().enumerate() {
                for b in 0..nfp {
                    emat[(vol, f * nfp + b)] = m1[(a, b)];
                }
            }
            if f == 0 {
                face_mass_1d = m1;
            }
        }
        let lift = &vvt * emat;

        Ok(Self {
            order,
            r,
            s,
            vandermonde: v,
            inv_vandermonde: inv_v,
            mass,
            diff_r,
            diff_s,
            face_nodes,
            lift,
            face_mass_1d,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Number of volume nodes, (N+1)(N+2)/2.
    pub fn np(&self) -> usize {
        self.r.len()
    }

    /// Number of nodes per face, N+1.
    pub fn nfp(&self) -> usize {
        self.order + 1
    }

    pub fn r(&self) -> &[f64] {
        &self.r
    }

    pub fn s(&self) -> &[f64] {
        &self.s
    }

    pub fn vandermonde(&self) -> &DMatrix<f64> {
        &self.vandermonde
    }

    pub fn mass(&self) -> &DMatrix<f64> {
        &self.mass
    }

    pub fn diff_r(&self) -> &DMatrix<f64> {
        &self.diff_r
    }

    pub fn diff_s(&self) -> &DMatrix<f64> {
        &self.diff_s
    }

    /// Volume node indices on each face, in counterclockwise traversal order.
    pub fn face_nodes(&self) -> &[Vec<usize>; FACES] {
        &self.face_nodes
    }

    /// Np x 3(N+1) operator taking face values (face-major) to the volume
    /// residual `M^{-1} E`, where `E` holds the 1D face mass blocks on [-1,1].
    pub fn lift(&self) -> &DMatrix<f64> {
        &self.lift
    }

    pub fn face_mass_1d(&self) -> &DMatrix<f64> {
        &self.face_mass_1d
    }

    /// 2-norm condition number of the generalized Vandermonde matrix.
    pub fn vandermonde_condition(&self) -> f64 {
        let sv = self.vandermonde.clone().singular_values();
        sv.max() / sv.min()
    }

    /// Values of all Lagrange basis functions at `(r, s)`.
    pub fn lagrange_at(&self, r: f64, s: f64) -> Result<DVector<f64>> {
        if !inside_reference(r, s) {
            return Err(DgError::Domain(format!(
                "point ({r}, {s}) lies outside the reference triangle"
            )));
        }
        let phi = DVector::from_iterator(
            self.np(),
            modal_indices(self.order).map(|(i, j)| simplex_p(r, s, i, j)),
        );
        Ok(self.inv_vandermonde.transpose() * phi)
    }

    /// Evaluates the degree-N interpolant of `nodal_values` at `(r, s)`.
    pub fn interpolate(&self, nodal_values: &[f64], r: f64, s: f64) -> Result<f64> {
        if nodal_values.len() != self.np() {
            return Err(DgError::Domain(format!(
                "expected {} nodal values, got {}",
                self.np(),
                nodal_values.len()
            )));
        }
        let l = self.lagrange_at(r, s)?;
        Ok(l.iter().zip(nodal_values).map(|(a, b)| a * b).sum())
    }
}

/// Builds the reference element of order `n`.
pub fn build_reference_element(n: usize) -> Result<ReferenceElement> {
    ReferenceElement::new(n)
}

pub fn inside_reference(r: f64, s: f64) -> bool {
    r >= -1.0 - NODE_TOL && s >= -1.0 - NODE_TOL && r + s <= NODE_TOL
}

// Position along face f in [-1, 1], increasing in the traversal direction.
fn face_parameter(face: usize, r: f64, s: f64) -> f64 {
    match face {
        0 => r,
        1 => s,
        _ => -s,
    }
}

fn find_face_nodes(r: &[f64], s: &[f64], nfp: usize) -> Result<[Vec<usize>; FACES]> {
    let on_face = |f: usize, i: usize| match f {
        0 => (s[i] + 1.0).abs() < NODE_TOL,
        1 => (r[i] + s[i]).abs() < NODE_TOL,
        _ => (r[i] + 1.0).abs() < NODE_TOL,
    };
    let mut faces: [Vec<usize>; FACES] = Default::default();
    for (f, nodes) in faces.iter_mut().enumerate() {
        *nodes = (0..r.len()).filter(|&i| on_face(f, i)).collect();
        nodes.sort_by(|&a, &b| face_parameter(f, r[a], s[a]).total_cmp(&face_parameter(f, r[b], s[b])));
        if nodes.len() != nfp {
            return Err(DgError::Numerical(format!(
                "face {f} carries {} nodes, expected {nfp}",
                nodes.len()
            )));
        }
    }
    Ok(faces)
}
