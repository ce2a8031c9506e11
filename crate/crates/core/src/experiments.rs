//! Empirical stability limits: bisection on the largest stable time step and
//! the CFL constant C = dt_max (N+1)(N+2) / h_min over mesh/order sweeps.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::dg_core::{BoundaryCondition, DgOperator, FluxParams};
use crate::error::{DgError, Result};
use crate::leapfrog::{initial_conditions, run, InitialCondition, RunConfig, DEFAULT_BLOWUP_FACTOR};
use crate::materials::{MaterialMap, PermittivityTensor};
use crate::mesh::{structured_square_mesh_with, Diagonal};
use crate::reference_element::ReferenceElement;
use crate::stability_theory::{bound_inputs, calibrate_c_inv, stability_bound_2d, InverseConstants, StabilityConstants};

/// Largest dt tried while bracketing before the sweep gives up.
pub const DT_CAP: f64 = 10.0;
pub const DEFAULT_TOLERANCE: f64 = 1e-2;
/// A fixed final time of 1 gives only a handful of steps on coarse meshes,
/// too few for a mildly unstable mode to reach the blowup threshold; runs
/// are extended to at least this many steps.
pub const DEFAULT_MIN_STEPS: usize = 1000;
/// Diagonal of the structured meshes used for the tables.
pub const BENCHMARK_DIAGONAL: Diagonal = Diagonal::NorthWestSouthEast;
/// Cells per side of the structured meshes on (-1,1)^2.
pub const BENCHMARK_LEVELS: [usize; 6] = [5, 10, 20, 40, 80, 160];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    Stable,
    Unstable,
}

/// Everything that determines one stability experiment on the structured
/// square mesh with `cells` cells per side.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityCase {
    pub cells: usize,
    pub order: usize,
    pub flux: FluxParams,
    pub eps: PermittivityTensor,
    pub mu: f64,
    pub initial: InitialCondition,
    pub final_time: f64,
    pub blowup_factor: f64,
    /// Minimum number of steps per classification run; the run lasts
    /// max(final_time, min_steps * dt).
    pub min_steps: usize,
    pub diagonal: Diagonal,
}

impl StabilityCase {
    /// The anisotropic test medium eps = [[5,1],[1,3]], mu = 1, run to T = 1,
    /// with the initial data matching the boundary condition.
    pub fn benchmark(cells: usize, order: usize, flux: FluxParams) -> Self {
        Self {
            cells,
            order,
            flux,
            eps: benchmark_permittivity(),
            mu: 1.0,
            initial: default_initial_condition(flux.bc()),
            final_time: 1.0,
            blowup_factor: DEFAULT_BLOWUP_FACTOR,
            min_steps: DEFAULT_MIN_STEPS,
            diagonal: BENCHMARK_DIAGONAL,
        }
    }
}

pub fn benchmark_permittivity() -> PermittivityTensor {
    PermittivityTensor {
        xx: 5.0,
        xy: 1.0,
        yx: 1.0,
        yy: 3.0,
    }
}

pub fn default_initial_condition(bc: BoundaryCondition) -> InitialCondition {
    match bc {
        BoundaryCondition::SilverMuller => InitialCondition::SmSine,
        BoundaryCondition::Pec | BoundaryCondition::Pmc => InitialCondition::PecCosine,
    }
}

/// A case with its operator assembled and its theoretical bound evaluated.
#[derive(Debug, Clone)]
pub struct PreparedCase {
    pub case: StabilityCase,
    pub operator: DgOperator,
    pub theory: StabilityConstants,
}

impl PreparedCase {
    pub fn new(case: StabilityCase, c_inv: &InverseConstants) -> Result<Self> {
        let mesh = structured_square_mesh_with(case.cells, -1.0, 1.0, -1.0, 1.0, case.diagonal)?;
        let materials = MaterialMap::homogeneous(case.eps, case.mu, mesh.num_elements())?;
        let operator = DgOperator::new(ReferenceElement::new(case.order)?, mesh, materials, case.flux)?;
        let theory = stability_bound_2d(&bound_inputs(&operator, c_inv)?)?;
        Ok(Self {
            case,
            operator,
            theory,
        })
    }

    pub fn h_min(&self) -> f64 {
        self.operator.mesh().h_min()
    }

    /// Runs to max(final_time, min_steps * dt): stable iff the run completes
    /// without the energy passing the blowup threshold.
    pub fn classify(&self, dt: f64) -> Result<Stability> {
        let horizon = self.case.final_time.max(self.case.min_steps as f64 * dt);
        let mut cfg = RunConfig::new(dt, horizon)?;
        cfg.record_energy_every = 0;
        cfg.blowup_factor = self.case.blowup_factor;
        let state = initial_conditions(&self.case.initial, &self.operator, dt)?;
        let out = run(state, &self.operator, &cfg)?;
        let ok = out.completed() && out.final_energy <= cfg.blowup_factor * out.initial_energy;
        Ok(if ok { Stability::Stable } else { Stability::Unstable })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DtMax {
    pub dt_max: f64,
    /// Smallest dt observed to be unstable.
    pub dt_unstable: f64,
    pub classifications: usize,
    pub theory_bound: f64,
}

/// Brackets the stability limit by doubling from the theoretical bound, then
/// bisects to relative tolerance `tol`; returns the last stable dt.
pub fn find_dtmax(case: &PreparedCase, tol: f64) -> Result<DtMax> {
    if !(tol > 0.0 && tol <= 0.1) {
        return Err(DgError::Config(format!("bisection tolerance {tol} is outside (0, 0.1]")));
    }
    let bound = case.theory.dt_bound;
    let mut calls = 0;
    let mut classify = |dt: f64| {
        calls += 1;
        case.classify(dt)
    };
    if classify(bound)? == Stability::Unstable {
        return Err(DgError::Sweep(format!(
            "run at the theoretical bound dt = {bound:e} is unstable"
        )));
    }
    let mut lo = bound;
    let mut hi = 2.0 * bound;
    loop {
        if hi > DT_CAP {
            return Err(DgError::Sweep(format!("no unstable dt found below {DT_CAP}")));
        }
        match classify(hi)? {
            Stability::Stable => {
                lo = hi;
                hi *= 2.0;
            }
            Stability::Unstable => break,
        }
    }
    while (hi - lo) > tol * lo {
        let mid = 0.5 * (lo + hi);
        match classify(mid)? {
            Stability::Stable => lo = mid,
            Stability::Unstable => hi = mid,
        }
    }
    Ok(DtMax {
        dt_max: lo,
        dt_unstable: hi,
        classifications: calls,
        theory_bound: bound,
    })
}

pub fn cfl_constant(dt_max: f64, order: usize, h_min: f64) -> f64 {
    let n = order as f64;
    dt_max * (n + 1.0) * (n + 2.0) / h_min
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub levels: Vec<usize>,
    pub orders: Vec<usize>,
    pub flux: FluxParams,
    pub eps: PermittivityTensor,
    pub mu: f64,
    pub initial: InitialCondition,
    pub final_time: f64,
    pub tolerance: f64,
    pub blowup_factor: f64,
    pub min_steps: usize,
    pub diagonal: Diagonal,
}

impl SweepSpec {
    /// Six structured meshes and N = 1..5.
    pub fn benchmark(flux: FluxParams) -> Self {
        Self {
            levels: BENCHMARK_LEVELS.to_vec(),
            orders: (1..=5).collect(),
            flux,
            eps: benchmark_permittivity(),
            mu: 1.0,
            initial: default_initial_condition(flux.bc()),
            final_time: 1.0,
            tolerance: DEFAULT_TOLERANCE,
            blowup_factor: DEFAULT_BLOWUP_FACTOR,
            min_steps: DEFAULT_MIN_STEPS,
            diagonal: BENCHMARK_DIAGONAL,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0 && self.tolerance <= 0.1) {
            return Err(DgError::Config(format!(
                "bisection tolerance {} is outside (0, 0.1]",
                self.tolerance
            )));
        }
        if self.levels.iter().any(|&n| n == 0) {
            return Err(DgError::Config("mesh levels must be positive".into()));
        }
        if !(self.final_time > 0.0) {
            return Err(DgError::Config("final time must be positive".into()));
        }
        Ok(())
    }

    pub fn case(&self, cells: usize, order: usize) -> StabilityCase {
        StabilityCase {
            cells,
            order,
            flux: self.flux,
            eps: self.eps,
            mu: self.mu,
            initial: self.initial.clone(),
            final_time: self.final_time,
            blowup_factor: self.blowup_factor,
            min_steps: self.min_steps,
            diagonal: self.diagonal,
        }
    }

    /// `table_{bc}_{flux}.csv`, with `central`/`upwind` for alpha 0/1.
    pub fn file_name(&self) -> String {
        let flux = match self.flux.alpha() {
            a if a == 0.0 => "central".to_string(),
            a if a == 1.0 => "upwind".to_string(),
            a => format!("alpha{a}"),
        };
        format!("table_{}_{}.csv", self.flux.bc(), flux)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub cells: usize,
    pub order: usize,
    pub h_min: f64,
    pub outcome: std::result::Result<DtMax, String>,
}

impl SweepRow {
    pub fn cfl(&self) -> Option<f64> {
        self.outcome
            .as_ref()
            .ok()
            .map(|r| cfl_constant(r.dt_max, self.order, self.h_min))
    }
}

/// Runs every (level, order) case; cases run concurrently and failures are
/// kept per row. Rows are ordered by level, then order.
pub fn run_table(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let Some(&n_max) = spec.orders.iter().max() else {
        return Ok(Vec::new());
    };
    let c_inv = calibrate_c_inv(n_max)?;
    let cases: Vec<(usize, usize)> = spec
        .levels
        .iter()
        .flat_map(|&l| spec.orders.iter().map(move |&n| (l, n)))
        .collect();
    Ok(cases
        .par_iter()
        .map(|&(cells, order)| {
            let h_min = 2.0 * std::f64::consts::SQRT_2 / cells as f64;
            let outcome = PreparedCase::new(spec.case(cells, order), &c_inv)
                .and_then(|p| find_dtmax(&p, spec.tolerance))
                .map_err(|e| e.to_string());
            SweepRow {
                cells,
                order,
                h_min,
                outcome,
            }
        })
        .collect())
}

pub fn write_table_csv(rows: &[SweepRow], out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "h_min,N,dt_max,C,theory_bound")?;
    for row in rows {
        match &row.outcome {
            Ok(r) => writeln!(
                out,
                "{:.6},{},{:.6e},{:.4},{:.6e}",
                row.h_min,
                row.order,
                r.dt_max,
                cfl_constant(r.dt_max, row.order, row.h_min),
                r.theory_bound
            )?,
            Err(_) => writeln!(out, "{:.6},{},NaN,NaN,NaN", row.h_min, row.order)?,
        }
    }
    Ok(())
}

pub fn save_table_csv(rows: &[SweepRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    write_table_csv(rows, &mut buf).map_err(|e| DgError::io(path, e))?;
    std::fs::write(path, buf).map_err(|e| DgError::io(path, e))
}
