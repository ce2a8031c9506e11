//! Piecewise-constant material data and the face impedances derived from it.

use std::path::Path;

use crate::error::{DgError, Result};
use crate::mesh::{Mesh2D, Neighbor};

/// Symmetric positive definite 2x2 permittivity tensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PermittivityTensor {
    pub xx: f64,
    pub xy: f64,
    pub yx: f64,
    pub yy: f64,
}

impl PermittivityTensor {
    pub fn new(xx: f64, xy: f64, yx: f64, yy: f64) -> Result<Self> {
        let t = Self { xx, xy, yx, yy };
        t.validate()?;
        Ok(t)
    }

    pub fn isotropic(eps: f64) -> Result<Self> {
        Self::new(eps, 0.0, 0.0, eps)
    }

    pub fn identity() -> Self {
        Self {
            xx: 1.0,
            xy: 0.0,
            yx: 0.0,
            yy: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let vals = [self.xx, self.xy, self.yx, self.yy];
        if !vals.iter().all(|v| v.is_finite()) {
            return Err(DgError::Material(format!("non-finite tensor entries {vals:?}")));
        }
        if self.xy != self.yx {
            return Err(DgError::Material(format!(
                "tensor is not symmetric: eps_xy = {} but eps_yx = {}",
                self.xy, self.yx
            )));
        }
        if !(self.xx > 0.0) || !(self.det() > 0.0) {
            return Err(DgError::Material(format!(
                "tensor [[{}, {}], [{}, {}]] is not positive definite",
                self.xx, self.xy, self.yx, self.yy
            )));
        }
        Ok(())
    }

    pub fn det(&self) -> f64 {
        self.xx * self.yy - self.xy * self.yx
    }

    /// n^T eps n.
    pub fn quadratic_form(&self, n: [f64; 2]) -> f64 {
        n[0] * (self.xx * n[0] + self.xy * n[1]) + n[1] * (self.yx * n[0] + self.yy * n[1])
    }

    /// Row-major inverse [a, b, c, d] of the tensor.
    pub fn inverse(&self) -> [f64; 4] {
        let d = self.det();
        [self.yy / d, -self.xy / d, -self.yx / d, self.xx / d]
    }

    /// Eigenvalues (smallest, largest).
    pub fn eigenvalues(&self) -> (f64, f64) {
        let mean = 0.5 * (self.xx + self.yy);
        let rad = (0.25 * (self.xx - self.yy).powi(2) + self.xy * self.yx).sqrt();
        (mean - rad, mean + rad)
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [
            self.xx * v[0] + self.xy * v[1],
            self.yx * v[0] + self.yy * v[1],
        ]
    }
}

fn check_normal(n: [f64; 2]) -> Result<()> {
    let norm = n[0].hypot(n[1]);
    if (norm - 1.0).abs() > 1e-10 {
        return Err(DgError::Domain(format!("normal {n:?} is not a unit vector")));
    }
    Ok(())
}

/// det(eps) / (n^T eps n).
pub fn effective_permittivity(eps: &PermittivityTensor, n: [f64; 2]) -> Result<f64> {
    eps.validate()?;
    check_normal(n)?;
    Ok(eps.det() / eps.quadratic_form(n))
}

/// Speed of a wave travelling along `n`: sqrt(n^T eps n / (mu det eps)).
pub fn wave_speed(eps: &PermittivityTensor, mu: f64, n: [f64; 2]) -> Result<f64> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(DgError::Material(format!("permeability {mu} must be positive")));
    }
    eps.validate()?;
    check_normal(n)?;
    Ok((eps.quadratic_form(n) / (mu * eps.det())).sqrt())
}

#[derive(Debug, Clone)]
pub struct MaterialMap {
    eps: Vec<PermittivityTensor>,
    mu: Vec<f64>,
    eps_inv: Vec<[f64; 4]>,
    eps_lower: f64,
    eps_upper: f64,
    mu_lower: f64,
    mu_upper: f64,
}

impl MaterialMap {
    pub fn new(eps: Vec<PermittivityTensor>, mu: Vec<f64>) -> Result<Self> {
        if eps.len() != mu.len() {
            return Err(DgError::Material(format!(
                "{} permittivity entries but {} permeability entries",
                eps.len(),
                mu.len()
            )));
        }
        if eps.is_empty() {
            return Err(DgError::Material("empty material map".into()));
        }
        for (k, (e, &m)) in eps.iter().zip(&mu).enumerate() {
            e.validate()
                .map_err(|err| DgError::Material(format!("element {k}: {err}")))?;
            if !(m > 0.0) || !m.is_finite() {
                return Err(DgError::Material(format!(
                    "element {k}: permeability {m} must be positive"
                )));
            }
        }
        let eps_inv = eps.iter().map(PermittivityTensor::inverse).collect();
        let (mut eps_lower, mut eps_upper) = (f64::INFINITY, 0.0f64);
        for e in &eps {
            let (lo, hi) = e.eigenvalues();
            eps_lower = eps_lower.min(lo);
            eps_upper = eps_upper.max(hi);
        }
        let mu_lower = mu.iter().copied().fold(f64::INFINITY, f64::min);
        let mu_upper = mu.iter().copied().fold(0.0, f64::max);
        Ok(Self {
            eps,
            mu,
            eps_inv,
            eps_lower,
            eps_upper,
            mu_lower,
            mu_upper,
        })
    }

    pub fn homogeneous(eps: PermittivityTensor, mu: f64, num_elements: usize) -> Result<Self> {
        Self::new(vec![eps; num_elements], vec![mu; num_elements])
    }

    /// Reads a per-element table with lines `k eps_xx eps_xy eps_yx eps_yy mu`.
    /// Every element must appear exactly once; `#` starts a comment.
    pub fn load_table(path: impl AsRef<Path>, num_elements: usize) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| DgError::io(path, e))?;
        let mut eps: Vec<Option<PermittivityTensor>> = vec![None; num_elements];
        let mut mu = vec![0.0; num_elements];
        let perr = |line: usize, msg: String| DgError::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        };
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 6 {
                return Err(perr(i + 1, format!("expected 6 fields, found {}", fields.len())));
            }
            let k: usize = fields[0]
                .parse()
                .map_err(|_| perr(i + 1, format!("bad element index `{}`", fields[0])))?;
            if k >= num_elements {
                return Err(perr(i + 1, format!("element {k} out of range (mesh has {num_elements})")));
            }
            let mut v = [0.0; 5];
            for (slot, f) in v.iter_mut().zip(&fields[1..]) {
                *slot = f.parse().map_err(|_| perr(i + 1, format!("cannot parse `{f}`")))?;
            }
            let t = PermittivityTensor::new(v[0], v[1], v[2], v[3])
                .map_err(|e| perr(i + 1, format!("element {k}: {e}")))?;
            if eps[k].replace(t).is_some() {
                return Err(perr(i + 1, format!("element {k} listed twice")));
            }
            mu[k] = v[4];
        }
        let eps = eps
            .into_iter()
            .enumerate()
            .map(|(k, e)| e.ok_or_else(|| DgError::Material(format!("element {k} missing from {}", path.display()))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(eps, mu)
    }

    pub fn num_elements(&self) -> usize {
        self.eps.len()
    }

    pub fn eps(&self, k: usize) -> &PermittivityTensor {
        &self.eps[k]
    }

    pub fn mu(&self, k: usize) -> f64 {
        self.mu[k]
    }

    /// Cached row-major inverse of the element permittivity.
    pub fn eps_inv(&self, k: usize) -> &[f64; 4] {
        &self.eps_inv[k]
    }

    pub fn eps_lower(&self) -> f64 {
        self.eps_lower
    }

    pub fn eps_upper(&self) -> f64 {
        self.eps_upper
    }

    pub fn mu_lower(&self) -> f64 {
        self.mu_lower
    }

    pub fn mu_upper(&self) -> f64 {
        self.mu_upper
    }

    /// Impedance mu * c of element `k` seen along `n`.
    pub fn impedance(&self, k: usize, n: [f64; 2]) -> f64 {
        let e = &self.eps[k];
        let c = (e.quadratic_form(n) / (self.mu[k] * e.det())).sqrt();
        self.mu[k] * c
    }
}

/// Impedances and conductances on one side of a face: `minus` is the local
/// element, `plus` the neighbor (or a copy of `minus` on the boundary).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceImpedance {
    pub z_minus: f64,
    pub z_plus: f64,
    pub y_minus: f64,
    pub y_plus: f64,
}

impl FaceImpedance {
    pub fn symmetric(z: f64) -> Self {
        Self {
            z_minus: z,
            z_plus: z,
            y_minus: 1.0 / z,
            y_plus: 1.0 / z,
        }
    }
}

/// Per element, per face impedance table.
#[derive(Debug, Clone)]
pub struct FaceImpedanceTable {
    faces: Vec<[FaceImpedance; 3]>,
}

impl FaceImpedanceTable {
    pub fn get(&self, k: usize, f: usize) -> &FaceImpedance {
        &self.faces[k][f]
    }

    pub fn z_min(&self) -> f64 {
        self.faces
            .iter()
            .flatten()
            .map(|fi| fi.z_minus)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn y_min(&self) -> f64 {
        self.faces
            .iter()
            .flatten()
            .map(|fi| fi.y_minus)
            .fold(f64::INFINITY, f64::min)
    }
}

pub fn face_impedances(materials: &MaterialMap, mesh: &Mesh2D) -> Result<FaceImpedanceTable> {
    if materials.num_elements() != mesh.num_elements() {
        return Err(DgError::Material(format!(
            "material map covers {} elements but the mesh has {}",
            materials.num_elements(),
            mesh.num_elements()
        )));
    }
    let faces = (0..mesh.num_elements())
        .map(|k| {
            std::array::from_fn(|f| {
                let n = mesh.normal(k, f);
                let z_minus = materials.impedance(k, n);
                let z_plus = match mesh.neighbors(k)[f] {
                    Neighbor::Interior { element, .. } => materials.impedance(element, n),
                    Neighbor::Boundary(_) => z_minus,
                };
                FaceImpedance {
                    z_minus,
                    z_plus,
                    y_minus: 1.0 / z_minus,
                    y_plus: 1.0 / z_plus,
                }
            })
        })
        .collect();
    Ok(FaceImpedanceTable { faces })
}
