//! Run configuration: a TOML document with `[mesh]`, `[material]`,
//! `[solver]`, `[time]`, `[initial]`, `[output]` and an optional `[sweep]`
//! section. Relative file paths are resolved against the directory that holds
//! the config file.
//!
//! ```toml
//! [mesh]
//! cells = 10            # structured mesh on `bounds`, or `file = "..."`
//! diagonal = "nw-se"
//!
//! [material]
//! eps = [5.0, 1.0, 1.0, 3.0]
//! mu = 1.0
//!
//! [solver]
//! order = 2
//! alpha = 0.0
//! bc = "pec"
//!
//! [time]
//! auto = 0.9            # dt = 0.9 * theoretical bound, or `dt = ...`
//! final_time = 1.0
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dg_core::{BoundaryCondition, DgOperator, FluxParams};
use crate::error::{DgError, Result};
use crate::experiments::{default_initial_condition, StabilityCase, SweepSpec, DEFAULT_MIN_STEPS, DEFAULT_TOLERANCE};
use crate::leapfrog::{InitialCondition, RunConfig, DEFAULT_BLOWUP_FACTOR};
use crate::materials::{MaterialMap, PermittivityTensor};
use crate::mesh::{load_mesh_with, structured_square_mesh_with, Diagonal, Mesh2D, OrientationPolicy};
use crate::reference_element::ReferenceElement;

const UNIT_SQUARE: [f64; 4] = [-1.0, 1.0, -1.0, 1.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub mesh: MeshSection,
    pub material: MaterialSection,
    pub solver: SolverSection,
    pub time: TimeSection,
    #[serde(default)]
    pub initial: InitialSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    /// Directory used to resolve relative paths; not part of the document.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cells: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    /// `[xmin, xmax, ymin, ymax]` of the structured mesh.
    #[serde(default = "default_bounds")]
    pub bounds: [f64; 4],
    /// `sw-ne` or `nw-se`.
    #[serde(default = "default_diagonal")]
    pub diagonal: String,
    /// Accept clockwise triangles from a mesh file by flipping them.
    #[serde(default)]
    pub reorient: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialSection {
    /// `[xx, xy, yx, yy]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<[f64; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    /// Per-element table, see [`MaterialMap::load_table`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub order: usize,
    pub alpha: f64,
    pub bc: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// Safety factor applied to the theoretical bound.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auto: Option<f64>,
    pub final_time: f64,
    #[serde(default = "default_blowup")]
    pub blowup_factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    /// `auto` (chosen from the boundary condition), `pec_cosine`, `sm_sine`,
    /// `zero` or `custom`.
    #[serde(default = "default_kind")]
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ex: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ey: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hz: Option<String>,
}

impl Default for InitialSection {
    fn default() -> Self {
        Self {
            kind: default_kind(),
            ex: None,
            ey: None,
            hz: None,
        }
    }
}

/// Output file names, relative to the output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_energy")]
    pub energy: PathBuf,
    #[serde(default = "default_every")]
    pub energy_every: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot: Option<PathBuf>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            energy: default_energy(),
            energy_every: default_every(),
            snapshot: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub levels: Vec<usize>,
    pub orders: Vec<usize>,
    /// One table per entry.
    #[serde(default = "default_alphas")]
    pub alphas: Vec<f64>,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_min_steps")]
    pub min_steps: usize,
}

fn default_bounds() -> [f64; 4] {
    UNIT_SQUARE
}
fn default_diagonal() -> String {
    "sw-ne".into()
}
fn default_blowup() -> f64 {
    DEFAULT_BLOWUP_FACTOR
}
fn default_kind() -> String {
    "auto".into()
}
fn default_energy() -> PathBuf {
    "energy.csv".into()
}
fn default_every() -> usize {
    1
}
fn default_alphas() -> Vec<f64> {
    vec![0.0, 1.0]
}
fn default_tolerance() -> f64 {
    DEFAULT_TOLERANCE
}
fn default_min_steps() -> usize {
    DEFAULT_MIN_STEPS
}

pub fn parse_diagonal(s: &str) -> Result<Diagonal> {
    match s.trim() {
        "sw-ne" => Ok(Diagonal::SouthWestNorthEast),
        "nw-se" => Ok(Diagonal::NorthWestSouthEast),
        other => Err(DgError::Config(format!(
            "mesh.diagonal: unknown value `{other}` (expected sw-ne or nw-se)"
        ))),
    }
}

/// How the time step is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeStep {
    Fixed(f64),
    Auto { safety: f64 },
}

impl Config {
    /// Reads, parses and validates a config file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| DgError::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, base).map_err(|e| match e {
            DgError::Config(msg) => DgError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut cfg: Config = toml::from_str(text).map_err(|e| DgError::Config(e.to_string()))?;
        cfg.base_dir = base_dir.into();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| DgError::Config(format!("cannot serialize config: {e}")))
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(DgError::Config(m));
        match (&self.mesh.cells, &self.mesh.file) {
            (Some(_), Some(_)) => return cfg("mesh: `cells` and `file` are mutually exclusive".into()),
            (None, None) => return cfg("mesh: one of `cells` or `file` is required".into()),
            (Some(0), None) => return cfg("mesh.cells must be positive".into()),
            (None, Some(f)) => {
                let p = self.resolve(f);
                if !p.is_file() {
                    return cfg(format!("mesh.file: `{}` does not exist", p.display()));
                }
            }
            _ => {}
        }
        let [x0, x1, y0, y1] = self.mesh.bounds;
        if !(x0 < x1 && y0 < y1) {
            return cfg(format!("mesh.bounds: {:?} is not a valid box", self.mesh.bounds));
        }
        parse_diagonal(&self.mesh.diagonal)?;

        match (&self.material.eps, &self.material.table) {
            (Some(_), Some(_)) => return cfg("material: `eps` and `table` are mutually exclusive".into()),
            (None, None) => return cfg("material: one of `eps` or `table` is required".into()),
            (Some(e), None) => {
                PermittivityTensor::new(e[0], e[1], e[2], e[3])
                    .map_err(|err| DgError::Config(format!("material.eps: {err}")))?;
                let mu = self.material.mu.unwrap_or(1.0);
                if !(mu.is_finite() && mu > 0.0) {
                    return cfg(format!("material.mu must be positive, got {mu}"));
                }
            }
            (None, Some(t)) => {
                if self.material.mu.is_some() {
                    return cfg("material: `mu` comes from the table when `table` is given".into());
                }
                let p = self.resolve(t);
                if !p.is_file() {
                    return cfg(format!("material.table: `{}` does not exist", p.display()));
                }
            }
        }

        self.flux()?;
        if self.solver.order == 0 {
            return cfg("solver.order must be at least 1".into());
        }

        self.time_step()?;
        if !(self.time.final_time.is_finite() && self.time.final_time > 0.0) {
            return cfg(format!("time.final_time must be positive, got {}", self.time.final_time));
        }
        if !(self.time.blowup_factor > 1.0) {
            return cfg(format!("time.blowup_factor must exceed 1, got {}", self.time.blowup_factor));
        }

        self.initial_condition()?;

        if let Some(s) = &self.sweep {
            if s.levels.is_empty() || s.orders.is_empty() || s.alphas.is_empty() {
                return cfg("sweep: levels, orders and alphas must be non-empty".into());
            }
            if s.levels.contains(&0) || s.orders.contains(&0) {
                return cfg("sweep: levels and orders must be positive".into());
            }
            for &a in &s.alphas {
                FluxParams::new(a, BoundaryCondition::Pec)
                    .map_err(|e| DgError::Config(format!("sweep.alphas: {e}")))?;
            }
        }
        Ok(())
    }

    pub fn boundary_condition(&self) -> Result<BoundaryCondition> {
        self.solver
            .bc
            .parse()
            .map_err(|e: DgError| DgError::Config(format!("solver.bc: {e}")))
    }

    pub fn flux(&self) -> Result<FluxParams> {
        FluxParams::new(self.solver.alpha, self.boundary_condition()?)
            .map_err(|e| DgError::Config(format!("solver.alpha: {e}")))
    }

    pub fn time_step(&self) -> Result<TimeStep> {
        match (self.time.dt, self.time.auto) {
            (Some(_), Some(_)) => Err(DgError::Config("time: `dt` and `auto` are mutually exclusive".into())),
            (None, None) => Err(DgError::Config("time: one of `dt` or `auto` is required".into())),
            (Some(dt), None) if dt.is_finite() && dt > 0.0 => Ok(TimeStep::Fixed(dt)),
            (Some(dt), None) => Err(DgError::Config(format!("time.dt must be positive, got {dt}"))),
            (None, Some(s)) if s.is_finite() && s > 0.0 => Ok(TimeStep::Auto { safety: s }),
            (None, Some(s)) => Err(DgError::Config(format!("time.auto must be positive, got {s}"))),
        }
    }

    pub fn initial_condition(&self) -> Result<InitialCondition> {
        let ic = &self.initial;
        let has_expr = ic.ex.is_some() || ic.ey.is_some() || ic.hz.is_some();
        match ic.kind.as_str() {
            "custom" => Ok(InitialCondition::Custom {
                ex: ic.ex.clone().unwrap_or_else(|| "0".into()),
                ey: ic.ey.clone().unwrap_or_else(|| "0".into()),
                hz: ic.hz.clone().unwrap_or_else(|| "0".into()),
            }),
            _ if has_expr => Err(DgError::Config(
                "initial: ex/ey/hz are only used with kind = \"custom\"".into(),
            )),
            "auto" => Ok(default_initial_condition(self.boundary_condition()?)),
            other => other
                .parse()
                .map_err(|e: DgError| DgError::Config(format!("initial.kind: {e}"))),
        }
    }

    pub fn build_mesh(&self) -> Result<Mesh2D> {
        if let Some(file) = &self.mesh.file {
            let policy = if self.mesh.reorient {
                OrientationPolicy::Reorient
            } else {
                OrientationPolicy::Reject
            };
            return load_mesh_with(self.resolve(file), policy);
        }
        let [x0, x1, y0, y1] = self.mesh.bounds;
        let cells = self.mesh.cells.unwrap_or_default();
        structured_square_mesh_with(cells, x0, x1, y0, y1, parse_diagonal(&self.mesh.diagonal)?)
    }

    pub fn build_materials(&self, num_elements: usize) -> Result<MaterialMap> {
        match (&self.material.eps, &self.material.table) {
            (Some(e), _) => MaterialMap::homogeneous(
                PermittivityTensor::new(e[0], e[1], e[2], e[3])?,
                self.material.mu.unwrap_or(1.0),
                num_elements,
            ),
            (None, Some(t)) => MaterialMap::load_table(self.resolve(t), num_elements),
            (None, None) => Err(DgError::Config("material: one of `eps` or `table` is required".into())),
        }
    }

    pub fn build_operator(&self) -> Result<DgOperator> {
        let mesh = self.build_mesh()?;
        let materials = self.build_materials(mesh.num_elements())?;
        DgOperator::new(ReferenceElement::new(self.solver.order)?, mesh, materials, self.flux()?)
    }

    /// Run parameters for a given time step.
    pub fn run_config(&self, dt: f64) -> Result<RunConfig> {
        let mut rc = RunConfig::new(dt, self.time.final_time)?;
        rc.record_energy_every = self.output.energy_every;
        rc.blowup_factor = self.time.blowup_factor;
        Ok(rc)
    }

    /// Sweep specifications, one per entry of `sweep.alphas`. Sweeps run on
    /// structured meshes of (-1,1)^2 with a homogeneous material.
    pub fn sweep_specs(&self) -> Result<Vec<SweepSpec>> {
        let s = self
            .sweep
            .as_ref()
            .ok_or_else(|| DgError::Config("a [sweep] section is required".into()))?;
        self.check_sweepable()?;
        let bc = self.boundary_condition()?;
        let mut specs = Vec::with_capacity(s.alphas.len());
        for &alpha in &s.alphas {
            let flux = FluxParams::new(alpha, bc)?;
            specs.push(SweepSpec {
                levels: s.levels.clone(),
                orders: s.orders.clone(),
                flux,
                eps: self.homogeneous_eps()?,
                mu: self.material.mu.unwrap_or(1.0),
                initial: self.initial_for(bc)?,
                final_time: self.time.final_time,
                tolerance: s.tolerance,
                blowup_factor: self.time.blowup_factor,
                min_steps: s.min_steps,
                diagonal: parse_diagonal(&self.mesh.diagonal)?,
            });
        }
        Ok(specs)
    }

    /// The single stability experiment described by `[mesh]`, `[material]`,
    /// `[solver]` and `[time]`; `[sweep]` only contributes `min_steps`.
    pub fn stability_case(&self) -> Result<StabilityCase> {
        self.check_sweepable()?;
        let bc = self.boundary_condition()?;
        Ok(StabilityCase {
            cells: self.mesh.cells.unwrap_or_default(),
            order: self.solver.order,
            flux: self.flux()?,
            eps: self.homogeneous_eps()?,
            mu: self.material.mu.unwrap_or(1.0),
            initial: self.initial_for(bc)?,
            final_time: self.time.final_time,
            blowup_factor: self.time.blowup_factor,
            min_steps: self.sweep.as_ref().map_or(DEFAULT_MIN_STEPS, |s| s.min_steps),
            diagonal: parse_diagonal(&self.mesh.diagonal)?,
        })
    }

    /// The same document with file paths made absolute, so that it can be
    /// re-read from any directory.
    pub fn effective(&self) -> Result<Self> {
        let mut c = self.clone();
        let abs = |p: &PathBuf| -> Result<PathBuf> {
            let r = self.resolve(p);
            std::fs::canonicalize(&r).map_err(|e| DgError::io(r, e))
        };
        if let Some(f) = &self.mesh.file {
            c.mesh.file = Some(abs(f)?);
        }
        if let Some(t) = &self.material.table {
            c.material.table = Some(abs(t)?);
        }
        Ok(c)
    }

    /// Checks that the mesh and material can be reproduced by the sweep
    /// harness (structured mesh on (-1,1)^2, one tensor).
    pub fn check_sweepable(&self) -> Result<()> {
        if self.mesh.file.is_some() || self.mesh.bounds != UNIT_SQUARE {
            return Err(DgError::Config(
                "mesh: stability sweeps need a structured mesh on bounds [-1, 1, -1, 1]".into(),
            ));
        }
        self.homogeneous_eps().map(|_| ())
    }

    fn homogeneous_eps(&self) -> Result<PermittivityTensor> {
        let e = self
            .material
            .eps
            .ok_or_else(|| DgError::Config("material: stability sweeps need a global `eps`".into()))?;
        PermittivityTensor::new(e[0], e[1], e[2], e[3])
    }

    fn initial_for(&self, bc: BoundaryCondition) -> Result<InitialCondition> {
        if self.initial.kind == "auto" {
            Ok(default_initial_condition(bc))
        } else {
            self.initial_condition()
        }
    }
}
