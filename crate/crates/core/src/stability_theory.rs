//! Sufficient time-step bounds for the leap-frog DG scheme and the
//! polynomial trace / inverse constants they are built from.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::dg_core::{BoundaryCondition, DgOperator, FluxParams};
use crate::error::{DgError, Result};
use crate::mesh::Mesh2D;
use crate::reference_element::ReferenceElement;

/// Diameter of the reference triangle (-1,-1), (1,-1), (-1,1).
pub const REFERENCE_DIAMETER: f64 = 2.0 * std::f64::consts::SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Two,
    Three,
}

/// sqrt((N+1)(N+2)/2 |f|/|T|) in 2D, sqrt((N+1)(N+3)/3 |f|/|T|) in 3D.
pub fn trace_constant_exact(order: usize, face_measure: f64, cell_measure: f64, dim: Dimension) -> Result<f64> {
    if order == 0 || !(face_measure > 0.0) || !(cell_measure > 0.0) {
        return Err(DgError::Domain(format!(
            "trace constant needs N >= 1 and positive measures (N = {order}, |f| = {face_measure}, |T| = {cell_measure})"
        )));
    }
    let n = order as f64;
    let factor = match dim {
        Dimension::Two => (n + 1.0) * (n + 2.0) / 2.0,
        Dimension::Three => (n + 1.0) * (n + 3.0) / 3.0,
    };
    Ok((factor * face_measure / cell_measure).sqrt())
}

/// Smallest C_tau with ||u||_{dT}^2 <= C_tau^2 (N+1)(N+2) / h ||u||_T^2 on
/// every element, obtained by summing the exact edge estimates.
pub fn calibrate_c_tau(mesh: &Mesh2D) -> f64 {
    (0..mesh.num_elements())
        .map(|k| (mesh.h(k) * mesh.perimeter(k) / (2.0 * mesh.area(k))).sqrt())
        .fold(0.0, f64::max)
}

/// Largest generalized eigenvalue of (M + K) v = lambda M v on the reference
/// triangle for degree N, i.e. the sup of ||u||_{H1}^2 / ||u||^2.
pub fn h1_l2_ratio(reference: &ReferenceElement) -> Result<f64> {
    let m = reference.mass();
    let (dr, ds) = (reference.diff_r(), reference.diff_s());
    let k = dr.transpose() * m * dr + ds.transpose() * m * ds;
    largest_generalized_eigenvalue(&(m + k), m)
}

pub(crate) fn largest_generalized_eigenvalue(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    let chol = b
        .clone()
        .cholesky()
        .ok_or_else(|| DgError::Numerical("mass matrix is not positive definite".into()))?;
    let l_inv = chol
        .l()
        .try_inverse()
        .ok_or_else(|| DgError::Numerical("Cholesky factor is singular".into()))?;
    let sym = &l_inv * a * l_inv.transpose();
    let sym = (&sym + sym.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(sym, 1e-14, 10_000)
        .ok_or_else(|| DgError::Numerical("eigenvalue iteration did not converge".into()))?;
    Ok(eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

/// Per-order inverse-inequality constants ||u||_{H1} <= C_inv N^2 / h ||u||,
/// calibrated on the reference triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct InverseConstants {
    per_order: Vec<f64>,
}

impl InverseConstants {
    /// C_inv(N) for N = 1..=n_max.
    pub fn per_order(&self) -> &[f64] {
        &self.per_order
    }

    pub fn n_max(&self) -> usize {
        self.per_order.len()
    }

    /// max over 1 <= n <= N of C_inv(n); the value entering the bound for order N.
    pub fn for_order(&self, order: usize) -> Result<f64> {
        if order == 0 || order > self.per_order.len() {
            return Err(DgError::Domain(format!(
                "C_inv calibrated for N <= {}, requested N = {order}",
                self.per_order.len()
            )));
        }
        Ok(self.per_order[..order].iter().copied().fold(0.0, f64::max))
    }

    pub fn max(&self) -> f64 {
        self.per_order.iter().copied().fold(0.0, f64::max)
    }
}

pub fn calibrate_c_inv(n_max: usize) -> Result<InverseConstants> {
    if n_max == 0 {
        return Err(DgError::Domain("C_inv calibration needs N_max >= 1".into()));
    }
    let per_order = (1..=n_max)
        .map(|n| {
            let re = ReferenceElement::new(n)?;
            let lambda = h1_l2_ratio(&re)?;
            Ok(REFERENCE_DIAMETER / (n * n) as f64 * lambda.sqrt())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(InverseConstants { per_order })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaParams {
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
}

/// Boundary-condition weights of the bound: PEC (alpha, 0, 0), PMC
/// (0, 1, alpha), Silver-Muller (1/2, 1/2, 1). PEC never uses beta3.
pub fn beta_params(bc: BoundaryCondition, alpha: f64) -> Result<BetaParams> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(DgError::Domain(format!("alpha = {alpha} is outside [0, 1]")));
    }
    let (beta1, beta2, beta3) = match bc {
        BoundaryCondition::Pec => (alpha, 0.0, 0.0),
        BoundaryCondition::Pmc => (0.0, 1.0, alpha),
        BoundaryCondition::SilverMuller => (0.5, 0.5, 1.0),
    };
    Ok(BetaParams { beta1, beta2, beta3 })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInputs {
    pub order: usize,
    pub h_min: f64,
    pub eps_lower: f64,
    pub mu_lower: f64,
    pub z_min: f64,
    pub y_min: f64,
    pub flux: FluxParams,
    pub c_inv: f64,
    pub c_tau: f64,
}

impl BoundInputs {
    fn validate(&self) -> Result<()> {
        let named = [
            ("h_min", self.h_min),
            ("eps_lower", self.eps_lower),
            ("mu_lower", self.mu_lower),
            ("Z_min", self.z_min),
            ("Y_min", self.y_min),
            ("C_inv", self.c_inv),
            ("C_tau", self.c_tau),
        ];
        for (name, v) in named {
            if !(v.is_finite() && v > 0.0) {
                return Err(DgError::Domain(format!("{name} must be positive, got {v}")));
            }
        }
        if self.order == 0 {
            return Err(DgError::Domain("order must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityConstants {
    pub c_inv: f64,
    pub c_tau: f64,
    pub beta: BetaParams,
    pub c_e: f64,
    pub c_h: f64,
    pub dt_bound: f64,
}

pub fn stability_bound_2d(inputs: &BoundInputs) -> Result<StabilityConstants> {
    inputs.validate()?;
    let alpha = inputs.flux.alpha();
    let beta = beta_params(inputs.flux.bc(), alpha)?;
    let n = inputs.order as f64;
    let vol = 0.5 * inputs.c_inv * n * n;
    let tr = inputs.c_tau.powi(2) * (n + 1.0) * (n + 2.0);
    let c_e = vol + tr * (2.0 + beta.beta2 + (2.0 * alpha + beta.beta1) / (2.0 * inputs.z_min));
    let c_h = vol + tr * (2.0 + beta.beta2 + (alpha + beta.beta2 * beta.beta3) / inputs.y_min);
    Ok(finish(inputs, beta, c_e, c_h))
}

pub fn stability_bound_3d(inputs: &BoundInputs) -> Result<StabilityConstants> {
    inputs.validate()?;
    let alpha = inputs.flux.alpha();
    let beta = beta_params(inputs.flux.bc(), alpha)?;
    let n = inputs.order as f64;
    let vol = 0.5 * inputs.c_inv * n * n;
    let tr = inputs.c_tau.powi(2) * (n + 1.0) * (n + 3.0);
    let base = 3.0 + 0.5 * beta.beta2;
    let c_e = vol + tr * (base + (alpha + beta.beta1) / (2.0 * inputs.z_min));
    let c_h = vol + tr * (base + (alpha + beta.beta3) / (2.0 * inputs.y_min));
    Ok(finish(inputs, beta, c_e, c_h))
}

fn finish(inputs: &BoundInputs, beta: BetaParams, c_e: f64, c_h: f64) -> StabilityConstants {
    StabilityConstants {
        c_inv: inputs.c_inv,
        c_tau: inputs.c_tau,
        beta,
        c_e,
        c_h,
        dt_bound: inputs.eps_lower.min(inputs.mu_lower) * inputs.h_min / c_e.max(c_h),
    }
}

/// Collects every input of the 2D bound from an assembled operator.
pub fn bound_inputs(op: &DgOperator, c_inv: &InverseConstants) -> Result<BoundInputs> {
    let order = op.reference().order();
    Ok(BoundInputs {
        order,
        h_min: op.mesh().h_min(),
        eps_lower: op.materials().eps_lower(),
        mu_lower: op.materials().mu_lower(),
        z_min: op.impedances().z_min(),
        y_min: op.impedances().y_min(),
        flux: op.flux(),
        c_inv: c_inv.for_order(order)?,
        c_tau: calibrate_c_tau(op.mesh()),
    })
}
