//! Semi-discrete DG operator for the TE system
//!
//! ```text
//! eps dE/dt  = (dHz/dy, -dHz/dx) + lifted face flux
//! mu  dHz/dt = dEx/dy - dEy/dx   + lifted face flux
//! ```
//!
//! with the alpha-weighted impedance flux (alpha = 0 central, alpha = 1 upwind)
//! and PEC / PMC / Silver-Muller boundary ghost states.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{DgError, Result};
use crate::materials::{face_impedances, FaceImpedance, FaceImpedanceTable, MaterialMap};
use crate::mesh::{Mesh2D, Neighbor};
use crate::reference_element::{ReferenceElement, FACES};

/// Nodal values of the three TE field components at one point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TeValues {
    pub ex: f64,
    pub ey: f64,
    pub hz: f64,
}

impl TeValues {
    pub fn new(ex: f64, ey: f64, hz: f64) -> Self {
        Self { ex, ey, hz }
    }
}

impl std::ops::Sub for TeValues {
    type Output = TeValues;

    fn sub(self, o: TeValues) -> TeValues {
        TeValues::new(self.ex - o.ex, self.ey - o.ey, self.hz - o.hz)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryCondition {
    Pec,
    Pmc,
    SilverMuller,
}

impl BoundaryCondition {
    pub fn label(&self) -> &'static str {
        match self {
            BoundaryCondition::Pec => "pec",
            BoundaryCondition::Pmc => "pmc",
            BoundaryCondition::SilverMuller => "sm",
        }
    }
}

impl fmt::Display for BoundaryCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for BoundaryCondition {
    type Err = DgError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pec" => Ok(Self::Pec),
            "pmc" => Ok(Self::Pmc),
            "sm" | "silver-muller" | "silver_muller" | "silvermuller" => Ok(Self::SilverMuller),
            other => Err(DgError::Config(format!(
                "unknown boundary condition `{other}` (expected pec, pmc or sm)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxParams {
    alpha: f64,
    bc: BoundaryCondition,
}

impl FluxParams {
    pub fn new(alpha: f64, bc: BoundaryCondition) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(DgError::Config(format!("flux parameter alpha = {alpha} is outside [0, 1]")));
        }
        Ok(Self { alpha, bc })
    }

    pub fn central(bc: BoundaryCondition) -> Self {
        Self { alpha: 0.0, bc }
    }

    pub fn upwind(bc: BoundaryCondition) -> Self {
        Self { alpha: 1.0, bc }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn bc(&self) -> BoundaryCondition {
        self.bc
    }
}

/// Exterior trace on a boundary face and the flux parameter used there.
///
/// PEC mirrors E and keeps Hz, PMC keeps E and mirrors Hz, Silver-Muller uses
/// a zero exterior state (jumps equal the interior values) with alpha forced to 1.
pub fn boundary_ghost(bc: BoundaryCondition, alpha: f64, interior: TeValues) -> (TeValues, f64) {
    match bc {
        BoundaryCondition::Pec => (TeValues::new(-interior.ex, -interior.ey, interior.hz), alpha),
        BoundaryCondition::Pmc => (TeValues::new(interior.ex, interior.ey, -interior.hz), alpha),
        BoundaryCondition::SilverMuller => (TeValues::default(), 1.0),
    }
}

/// n . (F - F*) for the jumps `[q] = q^- - q^+`.
#[inline]
pub fn numerical_flux(jump: TeValues, n: [f64; 2], imp: &FaceImpedance, alpha: f64) -> TeValues {
    let (nx, ny) = (n[0], n[1]);
    let n_cross_e = nx * jump.ey - ny * jump.ex;
    let e_part = (imp.z_plus * jump.hz - alpha * n_cross_e) / (imp.z_plus + imp.z_minus);
    TeValues {
        ex: -ny * e_part,
        ey: nx * e_part,
        hz: (imp.y_plus * n_cross_e - alpha * jump.hz) / (imp.y_plus + imp.y_minus),
    }
}

/// Staggered solution: E at t = steps * dt, Hz at t = (steps + 1/2) * dt.
/// Arrays are element-major with `np` nodes per element.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub ex: Vec<f64>,
    pub ey: Vec<f64>,
    pub hz: Vec<f64>,
    np: usize,
    steps: usize,
    dt: f64,
}

impl FieldState {
    pub fn zeros(num_elements: usize, np: usize, dt: f64) -> Self {
        let n = num_elements * np;
        Self {
            ex: vec![0.0; n],
            ey: vec![0.0; n],
            hz: vec![0.0; n],
            np,
            steps: 0,
            dt,
        }
    }

    pub fn np(&self) -> usize {
        self.np
    }

    pub fn num_elements(&self) -> usize {
        self.ex.len() / self.np
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn time_e(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    pub fn time_h(&self) -> f64 {
        (self.steps as f64 + 0.5) * self.dt
    }

    pub(crate) fn advance(&mut self, dt: f64) {
        self.dt = dt;
        self.steps += 1;
    }

    pub fn is_finite(&self) -> bool {
        self.ex.iter().chain(&self.ey).chain(&self.hz).all(|v| v.is_finite())
    }

    /// a * self + b * other, keeping the time bookkeeping of `self`.
    pub fn linear_combination(&self, a: f64, other: &FieldState, b: f64) -> FieldState {
        let comb = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| a * p + b * q).collect();
        FieldState {
            ex: comb(&self.ex, &other.ex),
            ey: comb(&self.ey, &other.ey),
            hz: comb(&self.hz, &other.hz),
            ..*self
        }
    }

    pub fn element_ex(&self, k: usize) -> &[f64] {
        &self.ex[k * self.np..(k + 1) * self.np]
    }

    pub fn element_ey(&self, k: usize) -> &[f64] {
        &self.ey[k * self.np..(k + 1) * self.np]
    }

    pub fn element_hz(&self, k: usize) -> &[f64] {
        &self.hz[k * self.np..(k + 1) * self.np]
    }

    pub fn values_at(&self, k: usize, i: usize) -> TeValues {
        let g = k * self.np + i;
        TeValues::new(self.ex[g], self.ey[g], self.hz[g])
    }
}

/// Interior and exterior traces on one face, at its N+1 nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceTrace {
    pub interior: Vec<TeValues>,
    pub exterior: Vec<TeValues>,
    pub alpha_face: f64,
}

impl FaceTrace {
    pub fn jumps(&self) -> Vec<TeValues> {
        self.interior
            .iter()
            .zip(&self.exterior)
            .map(|(m, p)| *m - *p)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceData {
    pub faces: [FaceTrace; FACES],
}

/// Time derivative of every field component.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldRhs {
    pub ex: Vec<f64>,
    pub ey: Vec<f64>,
    pub hz: Vec<f64>,
}

// Row-major dense matrix used in the element kernels.
#[derive(Debug, Clone)]
struct Dense {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Dense {
    fn from_na(m: &nalgebra::DMatrix<f64>) -> Self {
        let (rows, cols) = m.shape();
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(m[(i, j)]);
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    fn mul_add(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        for (i, yi) in y.iter_mut().enumerate().take(self.rows) {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            *yi += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        }
    }

    #[inline]
    fn mul(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        self.mul_add(x, y);
    }
}

#[derive(Default)]
struct Scratch {
    dr: Vec<f64>,
    ds: Vec<f64>,
    dr2: Vec<f64>,
    ds2: Vec<f64>,
    acc_x: Vec<f64>,
    acc_y: Vec<f64>,
    flux_x: Vec<f64>,
    flux_y: Vec<f64>,
}

impl Scratch {
    fn new(np: usize, nfp: usize) -> Self {
        Self {
            dr: vec![0.0; np],
            ds: vec![0.0; np],
            dr2: vec![0.0; np],
            ds2: vec![0.0; np],
            acc_x: vec![0.0; np],
            acc_y: vec![0.0; np],
            flux_x: vec![0.0; FACES * nfp],
            flux_y: vec![0.0; FACES * nfp],
        }
    }
}

/// The assembled spatial operator: reference operators, mesh, materials,
/// face impedances, flux parameters and the precomputed neighbor node maps.
#[derive(Debug, Clone)]
pub struct DgOperator {
    reference: ReferenceElement,
    mesh: Mesh2D,
    materials: MaterialMap,
    impedances: FaceImpedanceTable,
    flux: FluxParams,
    // for each element face, the neighbor's volume node matching each local face node
    neighbor_nodes: Vec<[Vec<usize>; FACES]>,
    diff_r: Dense,
    diff_s: Dense,
    lift: Dense,
    mass: Dense,
}

impl DgOperator {
    pub fn new(
        reference: ReferenceElement,
        mesh: Mesh2D,
        materials: MaterialMap,
        flux: FluxParams,
    ) -> Result<Self> {
        let impedances = face_impedances(&materials, &mesh)?;
        let neighbor_nodes = match_face_nodes(&reference, &mesh)?;
        Ok(Self {
            diff_r: Dense::from_na(reference.diff_r()),
            diff_s: Dense::from_na(reference.diff_s()),
            lift: Dense::from_na(reference.lift()),
            mass: Dense::from_na(reference.mass()),
            reference,
            mesh,
            materials,
            impedances,
            flux,
            neighbor_nodes,
        })
    }

    pub fn reference(&self) -> &ReferenceElement {
        &self.reference
    }

    pub fn mesh(&self) -> &Mesh2D {
        &self.mesh
    }

    pub fn materials(&self) -> &MaterialMap {
        &self.materials
    }

    pub fn impedances(&self) -> &FaceImpedanceTable {
        &self.impedances
    }

    pub fn flux(&self) -> FluxParams {
        self.flux
    }

    /// Same discretization with different flux parameters.
    pub fn with_flux(&self, flux: FluxParams) -> Self {
        Self {
            flux,
            ..self.clone()
        }
    }

    pub fn np(&self) -> usize {
        self.reference.np()
    }

    pub fn num_elements(&self) -> usize {
        self.mesh.num_elements()
    }

    pub fn zero_state(&self, dt: f64) -> FieldState {
        FieldState::zeros(self.num_elements(), self.np(), dt)
    }

    /// Physical coordinates of every volume node, element-major.
    pub fn node_coordinates(&self) -> Vec<[f64; 2]> {
        let (r, s) = (self.reference.r(), self.reference.s());
        (0..self.num_elements())
            .flat_map(|k| (0..r.len()).map(move |i| self.mesh.map_to_physical(k, r[i], s[i])))
            .collect()
    }

    /// Volume node indices of the neighbor matching the local face nodes of
    /// face `f` of element `k`; empty on boundary faces.
    pub fn neighbor_nodes(&self, k: usize, f: usize) -> &[usize] {
        &self.neighbor_nodes[k][f]
    }

    #[inline]
    fn exterior(&self, state: &FieldState, k: usize, f: usize, a: usize, interior: TeValues) -> (TeValues, f64) {
        match self.mesh.neighbors(k)[f] {
            Neighbor::Interior { element, .. } => {
                (state.values_at(element, self.neighbor_nodes[k][f][a]), self.flux.alpha)
            }
            Neighbor::Boundary(_) => boundary_ghost(self.flux.bc, self.flux.alpha, interior),
        }
    }

    pub fn gather_traces(&self, state: &FieldState, k: usize) -> TraceData {
        let faces = std::array::from_fn(|f| {
            let fmask = &self.reference.face_nodes()[f];
            let mut interior = Vec::with_capacity(fmask.len());
            let mut exterior = Vec::with_capacity(fmask.len());
            let mut alpha_face = self.flux.alpha;
            for (a, &i) in fmask.iter().enumerate() {
                let minus = state.values_at(k, i);
                let (plus, af) = self.exterior(state, k, f, a, minus);
                interior.push(minus);
                exterior.push(plus);
                alpha_face = af;
            }
            FaceTrace {
                interior,
                exterior,
                alpha_face,
            }
        });
        TraceData { faces }
    }

    // Fills flux_x / flux_y (E fluxes) or flux_x (Hz flux), scaled by len/area.
    fn face_fluxes(&self, state: &FieldState, k: usize, want_e: bool, sc: &mut Scratch) {
        let nfp = self.reference.nfp();
        for f in 0..FACES {
            let n = self.mesh.normal(k, f);
            let imp = self.impedances.get(k, f);
            let scale = self.mesh.edge_length(k, f) / self.mesh.area(k);
            for (a, &i) in self.reference.face_nodes()[f].iter().enumerate() {
                let minus = state.values_at(k, i);
                let (plus, alpha_face) = self.exterior(state, k, f, a, minus);
                let flux = numerical_flux(minus - plus, n, imp, alpha_face);
                if want_e {
                    sc.flux_x[f * nfp + a] = scale * flux.ex;
                    sc.flux_y[f * nfp + a] = scale * flux.ey;
                } else {
                    sc.flux_x[f * nfp + a] = scale * flux.hz;
                }
            }
        }
    }

    fn element_rhs_e(&self, state: &FieldState, k: usize, out_ex: &mut [f64], out_ey: &mut [f64], sc: &mut Scratch) {
        let g = self.mesh.geometry(k);
        let hz = state.element_hz(k);
        self.diff_r.mul(hz, &mut sc.dr);
        self.diff_s.mul(hz, &mut sc.ds);
        for i in 0..hz.len() {
            let dx = g.rx * sc.dr[i] + g.sx * sc.ds[i];
            let dy = g.ry * sc.dr[i] + g.sy * sc.ds[i];
            sc.acc_x[i] = dy;
            sc.acc_y[i] = -dx;
        }
        self.face_fluxes(state, k, true, sc);
        self.lift.mul_add(&sc.flux_x, &mut sc.acc_x);
        self.lift.mul_add(&sc.flux_y, &mut sc.acc_y);
        let inv = self.materials.eps_inv(k);
        for i in 0..hz.len() {
            out_ex[i] = inv[0] * sc.acc_x[i] + inv[1] * sc.acc_y[i];
            out_ey[i] = inv[2] * sc.acc_x[i] + inv[3] * sc.acc_y[i];
        }
    }

    fn element_rhs_h(&self, state: &FieldState, k: usize, out_hz: &mut [f64], sc: &mut Scratch) {
        let g = self.mesh.geometry(k);
        let ex = state.element_ex(k);
        let ey = state.element_ey(k);
        self.diff_r.mul(ex, &mut sc.dr);
        self.diff_s.mul(ex, &mut sc.ds);
        self.diff_r.mul(ey, &mut sc.dr2);
        self.diff_s.mul(ey, &mut sc.ds2);
        for i in 0..ex.len() {
            let dex_dy = g.ry * sc.dr[i] + g.sy * sc.ds[i];
            let dey_dx = g.rx * sc.dr2[i] + g.sx * sc.ds2[i];
            sc.acc_x[i] = dex_dy - dey_dx;
        }
        self.face_fluxes(state, k, false, sc);
        self.lift.mul_add(&sc.flux_x, &mut sc.acc_x);
        let inv_mu = 1.0 / self.materials.mu(k);
        for (o, a) in out_hz.iter_mut().zip(&sc.acc_x) {
            *o = inv_mu * a;
        }
    }

    /// Time derivative of E for the current state (H at its half level, E at
    /// its integer level).
    pub fn rhs_e(&self, state: &FieldState, out_ex: &mut [f64], out_ey: &mut [f64]) {
        let np = self.np();
        let nfp = self.reference.nfp();
        out_ex
            .par_chunks_mut(np)
            .zip(out_ey.par_chunks_mut(np))
            .enumerate()
            .for_each_init(
                || Scratch::new(np, nfp),
                |sc, (k, (ox, oy))| self.element_rhs_e(state, k, ox, oy, sc),
            );
    }

    /// Time derivative of Hz for the current state.
    pub fn rhs_h(&self, state: &FieldState, out_hz: &mut [f64]) {
        let np = self.np();
        let nfp = self.reference.nfp();
        out_hz
            .par_chunks_mut(np)
            .enumerate()
            .for_each_init(
                || Scratch::new(np, nfp),
                |sc, (k, oh)| self.element_rhs_h(state, k, oh, sc),
            );
    }

    /// All three components of the semi-discrete right-hand side, evaluated
    /// on the same state.
    pub fn spatial_rhs(&self, state: &FieldState) -> FieldRhs {
        let n = state.ex.len();
        let mut rhs = FieldRhs {
            ex: vec![0.0; n],
            ey: vec![0.0; n],
            hz: vec![0.0; n],
        };
        self.rhs_e(state, &mut rhs.ex, &mut rhs.ey);
        self.rhs_h(state, &mut rhs.hz);
        rhs
    }

    /// Per-element contributions to sum_k (eps E, E)_k + (mu Hz, Hz)_k.
    pub fn element_energies(&self, state: &FieldState) -> Vec<f64> {
        let np = self.np();
        (0..self.num_elements())
            .into_par_iter()
            .map_init(
                || (vec![0.0; np], vec![0.0; np], vec![0.0; np]),
                |(mx, my, mh), k| {
                    let (ex, ey, hz) = (state.element_ex(k), state.element_ey(k), state.element_hz(k));
                    self.mass.mul(ex, mx);
                    self.mass.mul(ey, my);
                    self.mass.mul(hz, mh);
                    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
                    let (xx, xy, yy, hh) = (dot(ex, mx), dot(ex, my), dot(ey, my), dot(hz, mh));
                    let e = self.materials.eps(k);
                    let jac = self.mesh.geometry(k).jacobian;
                    jac * (e.xx * xx + (e.xy + e.yx) * xy + e.yy * yy + self.materials.mu(k) * hh)
                },
            )
            .collect()
    }
}

// Matches each local face node to the geometrically coincident node of the
// neighbor across a conforming interior edge.
fn match_face_nodes(reference: &ReferenceElement, mesh: &Mesh2D) -> Result<Vec<[Vec<usize>; FACES]>> {
    let (r, s) = (reference.r(), reference.s());
    let fnodes = reference.face_nodes();
    (0..mesh.num_elements())
        .map(|k| {
            let mut out: [Vec<usize>; FACES] = Default::default();
            for f in 0..FACES {
                let Neighbor::Interior { element, face } = mesh.neighbors(k)[f] else {
                    continue;
                };
                let tol = 1e-8 * mesh.edge_length(k, f);
                let mut map = Vec::with_capacity(fnodes[f].len());
                for &i in &fnodes[f] {
                    let p = mesh.map_to_physical(k, r[i], s[i]);
                    let hit = fnodes[face].iter().copied().find(|&j| {
                        let q = mesh.map_to_physical(element, r[j], s[j]);
                        (p[0] - q[0]).hypot(p[1] - q[1]) < tol
                    });
                    map.push(hit.ok_or_else(|| {
                        DgError::Mesh(format!(
                            "face node {i} of element {k} has no partner on element {element}"
                        ))
                    })?);
                }
                out[f] = map;
            }
            Ok(out)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::materials::PermittivityTensor;
    use crate::mesh::structured_square_mesh;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_imp() -> FaceImpedance {
        FaceImpedance::symmetric(1.0)
    }

    fn operator(n: usize, order: usize, flux: FluxParams) -> DgOperator {
        let mesh = structured_square_mesh(n, -1.0, 1.0, -1.0, 1.0).unwrap();
        let mat = MaterialMap::homogeneous(PermittivityTensor::new(5.0, 1.0, 1.0, 3.0).unwrap(), 1.0, mesh.num_elements()).unwrap();
        DgOperator::new(ReferenceElement::new(order).unwrap(), mesh, mat, flux).unwrap()
    }

    fn random_state(op: &DgOperator, rng: &mut ChaCha8Rng) -> FieldState {
        let mut s = op.zero_state(0.0);
        for v in s.ex.iter_mut().chain(s.ey.iter_mut()).chain(s.hz.iter_mut()) {
            *v = rng.gen_range(-1.0..1.0);
        }
        s
    }

    #[test]
    fn flux_examples() {
        let z = numerical_flux(TeValues::default(), [0.6, 0.8], &unit_imp(), 0.7);
        assert_eq!(z, TeValues::default());

        let f = numerical_flux(TeValues::new(0.0, 0.0, 2.0), [0.0, 1.0], &unit_imp(), 0.0);
        assert!((f.ex + 1.0).abs() < 1e-15 && f.ey.abs() < 1e-15 && f.hz.abs() < 1e-15);

        let f = numerical_flux(TeValues::new(0.0, 2.0, 0.0), [1.0, 0.0], &unit_imp(), 1.0);
        assert!(f.ex.abs() < 1e-15 && (f.ey + 1.0).abs() < 1e-15 && (f.hz - 1.0).abs() < 1e-15);
    }

    #[test]
    fn boundary_ghost_examples() {
        let (ext, a) = boundary_ghost(BoundaryCondition::Pec, 0.0, TeValues::new(0.5, 0.0, 2.0));
        let jump = TeValues::new(0.5, 0.0, 2.0) - ext;
        assert_eq!((jump.ex, jump.hz, a), (1.0, 0.0, 0.0));

        let int = TeValues::new(0.3, -0.2, 2.0);
        let (ext, _) = boundary_ghost(BoundaryCondition::Pmc, 1.0, int);
        assert_eq!(int - ext, TeValues::new(0.0, 0.0, 4.0));

        let int = TeValues::new(1.5, -2.5, 3.5);
        let (ext, a) = boundary_ghost(BoundaryCondition::SilverMuller, 0.0, int);
        assert_eq!(int - ext, int);
        assert_eq!(a, 1.0);
    }

    #[test]
    fn parse_boundary_conditions() {
        assert_eq!("PEC".parse::<BoundaryCondition>().unwrap(), BoundaryCondition::Pec);
        assert_eq!("silver-muller".parse::<BoundaryCondition>().unwrap(), BoundaryCondition::SilverMuller);
        assert!(matches!("dirichlet".parse::<BoundaryCondition>(), Err(DgError::Config(_))));
        assert!(FluxParams::new(1.5, BoundaryCondition::Pec).is_err());
    }

    #[test]
    fn continuous_field_has_zero_jumps() {
        let op = operator(3, 2, FluxParams::central(BoundaryCondition::Pec));
        let mut st = op.zero_state(0.0);
        for (g, p) in op.node_coordinates().iter().enumerate() {
            st.ex[g] = p[0] * p[1];
            st.ey[g] = 1.0 - p[0];
            st.hz[g] = p[1] * p[1];
        }
        for k in 0..op.num_elements() {
            let tr = op.gather_traces(&st, k);
            for f in 0..3 {
                if op.mesh().neighbors(k)[f].is_boundary() {
                    continue;
                }
                for j in tr.faces[f].jumps() {
                    assert!(j.ex.abs() < 1e-13 && j.ey.abs() < 1e-13 && j.hz.abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn piecewise_constant_jump_and_two_sided_antisymmetry() {
        let op = operator(2, 2, FluxParams::central(BoundaryCondition::Pec));
        let np = op.np();
        let mut st = op.zero_state(0.0);
        st.hz[..np].iter_mut().for_each(|v| *v = 1.0);
        st.hz[np..2 * np].iter_mut().for_each(|v| *v = 3.0);
        // elements 0 and 1 share the diagonal of the first cell (face 2 of element 0)
        let Neighbor::Interior { element, .. } = op.mesh().neighbors(0)[2] else { panic!() };
        assert_eq!(element, 1);
        for j in op.gather_traces(&st, 0).faces[2].jumps() {
            assert_eq!(j.hz, -2.0);
        }

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let st = random_state(&op, &mut rng);
        for &(k, f) in op.mesh().interior_faces() {
            let Neighbor::Interior { element, face } = op.mesh().neighbors(k)[f] else { unreachable!() };
            let ja = op.gather_traces(&st, k).faces[f].jumps();
            let jb = op.gather_traces(&st, element).faces[face].jumps();
            // neighbor face nodes run in the opposite direction
            for (a, b) in ja.iter().zip(jb.iter().rev()) {
                assert!((a.ex + b.ex).abs() < 1e-14 && (a.ey + b.ey).abs() < 1e-14 && (a.hz + b.hz).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn interior_traces_match_interpolation() {
        let op = operator(2, 3, FluxParams::central(BoundaryCondition::Pec));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let st = random_state(&op, &mut rng);
        let re = op.reference();
        for k in 0..op.num_elements() {
            let tr = op.gather_traces(&st, k);
            for f in 0..3 {
                for (a, &i) in re.face_nodes()[f].iter().enumerate() {
                    let v = re.interpolate(st.element_hz(k), re.r()[i], re.s()[i]).unwrap();
                    assert!((v - tr.faces[f].interior[a].hz).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn zero_and_constant_states() {
        let op = operator(3, 2, FluxParams::upwind(BoundaryCondition::Pec));
        let rhs = op.spatial_rhs(&op.zero_state(0.1));
        assert!(rhs.ex.iter().chain(&rhs.ey).chain(&rhs.hz).all(|v| *v == 0.0));

        let mut st = op.zero_state(0.1);
        st.hz.iter_mut().for_each(|v| *v = 1.0);
        let rhs = op.spatial_rhs(&st);
        // PEC leaves [Hz] = 0 on the boundary, so every element sees zero residual
        for v in rhs.ex.iter().chain(&rhs.ey).chain(&rhs.hz) {
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn linearity_and_affine_alpha_dependence() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for bc in [BoundaryCondition::Pec, BoundaryCondition::Pmc, BoundaryCondition::SilverMuller] {
            let op = operator(3, 2, FluxParams::new(0.4, bc).unwrap());
            let u = random_state(&op, &mut rng);
            let v = random_state(&op, &mut rng);
            let (a, b) = (0.7, -1.9);
            let lhs = op.spatial_rhs(&u.linear_combination(a, &v, b));
            let (ru, rv) = (op.spatial_rhs(&u), op.spatial_rhs(&v));
            for (i, l) in lhs.ex.iter().enumerate() {
                assert!((l - (a * ru.ex[i] + b * rv.ex[i])).abs() < 1e-12);
                assert!((lhs.hz[i] - (a * ru.hz[i] + b * rv.hz[i])).abs() < 1e-12);
            }

            let r0 = op.with_flux(FluxParams::new(0.0, bc).unwrap()).spatial_rhs(&u);
            let r1 = op.with_flux(FluxParams::new(1.0, bc).unwrap()).spatial_rhs(&u);
            let ra = op.spatial_rhs(&u);
            let w = 0.4;
            let mut max_dev: f64 = 0.0;
            for i in 0..ra.ex.len() {
                max_dev = max_dev
                    .max((ra.ex[i] - ((1.0 - w) * r0.ex[i] + w * r1.ex[i])).abs())
                    .max((ra.ey[i] - ((1.0 - w) * r0.ey[i] + w * r1.ey[i])).abs())
                    .max((ra.hz[i] - ((1.0 - w) * r0.hz[i] + w * r1.hz[i])).abs());
            }
            if bc == BoundaryCondition::SilverMuller {
                // boundary faces always use alpha = 1, interior faces stay affine
                assert!(max_dev < 1e-11);
            } else {
                assert!(max_dev < 1e-11, "{bc}: {max_dev}");
            }
        }
    }

    #[test]
    fn polynomial_fields_produce_no_interior_penalty() {
        // A continuous degree-N field has zero jumps, so the rhs on interior
        // elements is just the pointwise curl.
        let order = 3;
        let op = operator(4, order, FluxParams::new(0.5, BoundaryCondition::Pec).unwrap());
        let mut st = op.zero_state(0.0);
        let coords = op.node_coordinates();
        for (g, p) in coords.iter().enumerate() {
            let (x, y) = (p[0], p[1]);
            st.hz[g] = x * x * y - 0.5 * y * y * y;
            st.ex[g] = x * y * y;
            st.ey[g] = x * x * x - y;
        }
        let rhs = op.spatial_rhs(&st);
        let np = op.np();
        let e = PermittivityTensor::new(5.0, 1.0, 1.0, 3.0).unwrap();
        let inv = e.inverse();
        for k in 0..op.num_elements() {
            if (0..3).any(|f| op.mesh().neighbors(k)[f].is_boundary()) {
                continue;
            }
            for i in 0..np {
                let [x, y] = coords[k * np + i];
                let (dhdx, dhdy) = (2.0 * x * y, x * x - 1.5 * y * y);
                let (ax, ay) = (dhdy, -dhdx);
                let ex_t = inv[0] * ax + inv[1] * ay;
                let ey_t = inv[2] * ax + inv[3] * ay;
                let hz_t = 2.0 * x * y - 3.0 * x * x;
                assert!((rhs.ex[k * np + i] - ex_t).abs() < 1e-10);
                assert!((rhs.ey[k * np + i] - ey_t).abs() < 1e-10);
                assert!((rhs.hz[k * np + i] - hz_t).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn rotation_by_180_degrees_commutes_with_the_operator() {
        // Free space on the structured square mesh: rotating the domain by pi
        // maps the mesh onto itself and flips the sign of E.
        let mesh = structured_square_mesh(4, -1.0, 1.0, -1.0, 1.0).unwrap();
        let mat = MaterialMap::homogeneous(PermittivityTensor::identity(), 1.0, mesh.num_elements()).unwrap();
        for flux in [FluxParams::central(BoundaryCondition::Pec), FluxParams::new(0.6, BoundaryCondition::SilverMuller).unwrap()] {
            let op = DgOperator::new(ReferenceElement::new(2).unwrap(), mesh.clone(), mat.clone(), flux).unwrap();
            let coords = op.node_coordinates();
            let find = |p: [f64; 2]| {
                coords
                    .iter()
                    .enumerate()
                    .filter(|(_, q)| (q[0] - p[0]).hypot(q[1] - p[1]) < 1e-12)
                    .map(|(g, _)| g)
                    .collect::<Vec<_>>()
            };
            // map each node to the node (on the image element) at the rotated location
            let np = op.np();
            let mut image = vec![usize::MAX; coords.len()];
            for k in 0..op.num_elements() {
                let c = op.mesh().map_to_physical(k, -1.0 / 3.0, -1.0 / 3.0);
                let kc = (0..op.num_elements())
                    .find(|&j| {
                        let d = op.mesh().map_to_physical(j, -1.0 / 3.0, -1.0 / 3.0);
                        (d[0] + c[0]).hypot(d[1] + c[1]) < 1e-12
                    })
                    .unwrap();
                for i in 0..np {
                    let p = coords[k * np + i];
                    let g = find([-p[0], -p[1]]).into_iter().find(|g| g / np == kc).unwrap();
                    image[k * np + i] = g;
                }
            }
            let mut rng = ChaCha8Rng::seed_from_u64(23);
            let u = random_state(&op, &mut rng);
            let mut ru = op.zero_state(0.0);
            for g in 0..coords.len() {
                ru.ex[image[g]] = -u.ex[g];
                ru.ey[image[g]] = -u.ey[g];
                ru.hz[image[g]] = u.hz[g];
            }
            let a = op.spatial_rhs(&u);
            let b = op.spatial_rhs(&ru);
            for g in 0..coords.len() {
                assert!((b.ex[image[g]] + a.ex[g]).abs() < 1e-12);
                assert!((b.ey[image[g]] + a.ey[g]).abs() < 1e-12);
                assert!((b.hz[image[g]] - a.hz[g]).abs() < 1e-12);
            }
        }
    }
}
