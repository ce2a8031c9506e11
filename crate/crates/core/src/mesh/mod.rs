//! Conforming triangular meshes: connectivity, outward normals, affine
//! geometric factors and shape-regularity statistics.

mod io;

pub use io::{load_mesh, load_mesh_with, parse_mesh, save_mesh, write_mesh};

use std::collections::HashMap;

use crate::error::{DgError, Result};

/// Label attached to a boundary edge. All shipped experiments use a single
/// label for the whole boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct BoundaryLabel(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Neighbor {
    Interior { element: usize, face: usize },
    Boundary(BoundaryLabel),
}

impl Neighbor {
    pub fn is_boundary(&self) -> bool {
        matches!(self, Neighbor::Boundary(_))
    }
}

/// Derivatives of the affine map from physical (x, y) to reference (r, s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometricFactors {
    pub rx: f64,
    pub ry: f64,
    pub sx: f64,
    pub sy: f64,
    /// Determinant of d(x,y)/d(r,s); equals area / 2.
    pub jacobian: f64,
}

/// What to do with triangles given in clockwise order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OrientationPolicy {
    #[default]
    Reject,
    Reorient,
}

/// Split direction of each square cell in [`structured_square_mesh_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Diagonal {
    /// Lower-left to upper-right.
    #[default]
    SouthWestNorthEast,
    /// Upper-left to lower-right.
    NorthWestSouthEast,
}

#[derive(Debug, Clone)]
pub struct Mesh2D {
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    neighbors: Vec<[Neighbor; 3]>,
    normals: Vec<[[f64; 2]; 3]>,
    edge_length: Vec<[f64; 3]>,
    area: Vec<f64>,
    geometry: Vec<GeometricFactors>,
    h: Vec<f64>,
    tau: Vec<f64>,
    interior_faces: Vec<(usize, usize)>,
    boundary_faces: Vec<(usize, usize)>,
}

impl Mesh2D {
    /// Validates the triangles (counterclockwise, non-degenerate, no
    /// duplicates) and builds the full connectivity.
    pub fn new(vertices: Vec<[f64; 2]>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        Self::with_policy(vertices, triangles, OrientationPolicy::Reject)
    }

    pub fn with_policy(
        vertices: Vec<[f64; 2]>,
        mut triangles: Vec<[usize; 3]>,
        policy: OrientationPolicy,
    ) -> Result<Self> {
        if triangles.is_empty() {
            return Err(DgError::Mesh("mesh has no triangles".into()));
        }
        for (k, tri) in triangles.iter_mut().enumerate() {
            for &v in tri.iter() {
                if v >= vertices.len() {
                    return Err(DgError::Mesh(format!(
                        "triangle {k} references vertex {v}, but only {} vertices exist",
                        vertices.len()
                    )));
                }
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(DgError::Mesh(format!("triangle {k} repeats a vertex: {tri:?}")));
            }
            let a = signed_area(&vertices, tri);
            if a == 0.0 || !a.is_finite() {
                return Err(DgError::Mesh(format!("triangle {k} is degenerate (zero area)")));
            }
            if a < 0.0 {
                match policy {
                    OrientationPolicy::Reject => {
                        return Err(DgError::Mesh(format!(
                            "triangle {k} {tri:?} is clockwise (signed area {a})"
                        )))
                    }
                    OrientationPolicy::Reorient => tri.swap(1, 2),
                }
            }
        }

        let mut seen: HashMap<[usize; 3], usize> = HashMap::new();
        for (k, tri) in triangles.iter().enumerate() {
            let mut key = *tri;
            key.sort_unstable();
            if let Some(prev) = seen.insert(key, k) {
                return Err(DgError::Mesh(format!(
                    "triangle {k} duplicates triangle {prev} (vertices {key:?})"
                )));
            }
        }

        build_connectivity(vertices, triangles)
    }

    pub fn num_elements(&self) -> usize {
        self.triangles.len()
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn neighbors(&self, k: usize) -> &[Neighbor; 3] {
        &self.neighbors[k]
    }

    /// Outward unit normal of face `f` of element `k`.
    pub fn normal(&self, k: usize, f: usize) -> [f64; 2] {
        self.normals[k][f]
    }

    pub fn edge_length(&self, k: usize, f: usize) -> f64 {
        self.edge_length[k][f]
    }

    pub fn area(&self, k: usize) -> f64 {
        self.area[k]
    }

    pub fn geometry(&self, k: usize) -> &GeometricFactors {
        &self.geometry[k]
    }

    /// Diameter (longest edge) of element `k`.
    pub fn h(&self, k: usize) -> f64 {
        self.h[k]
    }

    /// Inscribed-circle diameter of element `k`.
    pub fn tau(&self, k: usize) -> f64 {
        self.tau[k]
    }

    pub fn perimeter(&self, k: usize) -> f64 {
        self.edge_length[k].iter().sum()
    }

    pub fn h_min(&self) -> f64 {
        self.h.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn h_max(&self) -> f64 {
        self.h.iter().copied().fold(0.0, f64::max)
    }

    /// Largest h_k / tau_k over the mesh.
    pub fn shape_regularity(&self) -> f64 {
        self.h
            .iter()
            .zip(&self.tau)
            .map(|(h, t)| h / t)
            .fold(0.0, f64::max)
    }

    /// Interior edges, each listed once as (element, face) from one side.
    pub fn interior_faces(&self) -> &[(usize, usize)] {
        &self.interior_faces
    }

    /// Boundary edges as (element, face).
    pub fn boundary_faces(&self) -> &[(usize, usize)] {
        &self.boundary_faces
    }

    pub fn total_area(&self) -> f64 {
        self.area.iter().sum()
    }

    /// Maps reference coordinates (r, s) on element `k` to physical (x, y).
    pub fn map_to_physical(&self, k: usize, r: f64, s: f64) -> [f64; 2] {
        let [a, b, c] = self.triangles[k].map(|v| self.vertices[v]);
        let (l0, l1, l2) = (-(r + s) / 2.0, (1.0 + r) / 2.0, (1.0 + s) / 2.0);
        [
            l0 * a[0] + l1 * b[0] + l2 * c[0],
            l0 * a[1] + l1 * b[1] + l2 * c[1],
        ]
    }

    /// Overrides the label of one boundary face.
    pub fn set_boundary_label(&mut self, k: usize, f: usize, label: BoundaryLabel) -> Result<()> {
        match &mut self.neighbors[k][f] {
            Neighbor::Boundary(l) => {
                *l = label;
                Ok(())
            }
            Neighbor::Interior { .. } => Err(DgError::Mesh(format!(
                "face {f} of element {k} is not a boundary face"
            ))),
        }
    }
}

fn signed_area(vertices: &[[f64; 2]], tri: &[usize; 3]) -> f64 {
    let [a, b, c] = tri.map(|v| vertices[v]);
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

/// Computes neighbors, normals and geometric factors for counterclockwise
/// triangles. Face `f` of a triangle is the edge from its vertex `f` to vertex
/// `(f + 1) % 3`.
pub fn build_connectivity(vertices: Vec<[f64; 2]>, triangles: Vec<[usize; 3]>) -> Result<Mesh2D> {
    let k_count = triangles.len();
    let mut edge_owners: HashMap<(usize, usize), Vec<(usize, usize)>> = HashMap::new();
    for (k, tri) in triangles.iter().enumerate() {
        for f in 0..3 {
            let (a, b) = (tri[f], tri[(f + 1) % 3]);
            edge_owners.entry((a.min(b), a.max(b))).or_default().push((k, f));
        }
    }

    let mut neighbors = vec![[Neighbor::Boundary(BoundaryLabel::default()); 3]; k_count];
    let mut interior_faces = Vec::new();
    let mut boundary_faces = Vec::new();
    let mut keys: Vec<_> = edge_owners.keys().copied().collect();
    keys.sort_unstable();
    for key in keys {
        let owners = &edge_owners[&key];
        match owners.as_slice() {
            [_] => {}
            [(k1, f1), (k2, f2)] => {
                // conforming CCW neighbors traverse the shared edge in opposite directions
                if triangles[*k1][*f1] == triangles[*k2][*f2] {
                    return Err(DgError::Mesh(format!(
                        "edge {key:?} is traversed in the same direction by triangles {k1} and {k2} \
                         (overlapping or inconsistently oriented)"
                    )));
                }
                neighbors[*k1][*f1] = Neighbor::Interior {
                    element: *k2,
                    face: *f2,
                };
                neighbors[*k2][*f2] = Neighbor::Interior {
                    element: *k1,
                    face: *f1,
                };
            }
            many => {
                let tris: Vec<usize> = many.iter().map(|o| o.0).collect();
                return Err(DgError::Mesh(format!(
                    "non-manifold edge {key:?} shared by triangles {tris:?}"
                )));
            }
        }
    }
    for (k, nb) in neighbors.iter().enumerate() {
        for (f, n) in nb.iter().enumerate() {
            match n {
                Neighbor::Boundary(_) => boundary_faces.push((k, f)),
                Neighbor::Interior { element, .. } if *element > k => interior_faces.push((k, f)),
                Neighbor::Interior { .. } => {}
            }
        }
    }

    let mut normals = Vec::with_capacity(k_count);
    let mut edge_length = Vec::with_capacity(k_count);
    let mut area = Vec::with_capacity(k_count);
    let mut geometry = Vec::with_capacity(k_count);
    let mut h = Vec::with_capacity(k_count);
    let mut tau = Vec::with_capacity(k_count);
    for tri in &triangles {
        let p = tri.map(|v| vertices[v]);
        let mut nk = [[0.0; 2]; 3];
        let mut lk = [0.0; 3];
        for f in 0..3 {
            let (a, b) = (p[f], p[(f + 1) % 3]);
            let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
            let len = dx.hypot(dy);
            lk[f] = len;
            nk[f] = [dy / len, -dx / len];
        }
        let xr = 0.5 * (p[1][0] - p[0][0]);
        let xs = 0.5 * (p[2][0] - p[0][0]);
        let yr = 0.5 * (p[1][1] - p[0][1]);
        let ys = 0.5 * (p[2][1] - p[0][1]);
        let jac = xr * ys - xs * yr;
        let ar = signed_area(&vertices, tri);
        let per: f64 = lk.iter().sum();
        geometry.push(GeometricFactors {
            rx: ys / jac,
            ry: -xs / jac,
            sx: -yr / jac,
            sy: xr / jac,
            jacobian: jac,
        });
        h.push(lk.iter().copied().fold(0.0, f64::max));
        tau.push(4.0 * ar / per);
        area.push(ar);
        normals.push(nk);
        edge_length.push(lk);
    }

    Ok(Mesh2D {
        vertices,
        triangles,
        neighbors,
        normals,
        edge_length,
        area,
        geometry,
        h,
        tau,
        interior_faces,
        boundary_faces,
    })
}

/// Uniform grid of `n` x `n` squares on the rectangle, each split along the
/// lower-left to upper-right diagonal.
pub fn structured_square_mesh(n: usize, xmin: f64, xmax: f64, ymin: f64, ymax: f64) -> Result<Mesh2D> {
    structured_square_mesh_with(n, xmin, xmax, ymin, ymax, Diagonal::default())
}

pub fn structured_square_mesh_with(
    n: usize,
    xmin: f64,
    xmax: f64,
    ymin: f64,
    ymax: f64,
    diagonal: Diagonal,
) -> Result<Mesh2D> {
    if n == 0 {
        return Err(DgError::Domain("structured mesh needs at least one cell per side".into()));
    }
    if !(xmax > xmin) || !(ymax > ymin) {
        return Err(DgError::Domain(format!(
            "degenerate extents [{xmin}, {xmax}] x [{ymin}, {ymax}]"
        )));
    }
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        let y = ymin + (ymax - ymin) * j as f64 / n as f64;
        for i in 0..=n {
            let x = xmin + (xmax - xmin) * i as f64 / n as f64;
            vertices.push([x, y]);
        }
    }
    let idx = |i: usize, j: usize| j * (n + 1) + i;
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            match diagonal {
                Diagonal::SouthWestNorthEast => {
                    triangles.push([a, b, c]);
                    triangles.push([a, c, d]);
                }
                Diagonal::NorthWestSouthEast => {
                    triangles.push([a, b, d]);
                    triangles.push([b, c, d]);
                }
            }
        }
    }
    Mesh2D::new(vertices, triangles)
}
