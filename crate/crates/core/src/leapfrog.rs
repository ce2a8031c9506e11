//! Staggered leap-frog time stepping, the discrete energy, and initial data.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use evalexpr::{
    ContextWithMutableFunctions, ContextWithMutableVariables, EvalexprError, Function,
    HashMapContext, Node, Value,
};

use crate::dg_core::{DgOperator, FieldState, TeValues};
use crate::error::{DgError, Result};

pub const DEFAULT_BLOWUP_FACTOR: f64 = 1e6;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dt: f64,
    pub final_time: f64,
    /// Record the energy every this many steps (0 disables recording; the
    /// initial and final energies are always recorded).
    pub record_energy_every: usize,
    pub blowup_factor: f64,
}

impl RunConfig {
    pub fn new(dt: f64, final_time: f64) -> Result<Self> {
        let cfg = Self {
            dt,
            final_time,
            record_energy_every: 1,
            blowup_factor: DEFAULT_BLOWUP_FACTOR,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(DgError::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.final_time.is_finite() && self.final_time > 0.0) {
            return Err(DgError::Config(format!(
                "final time must be positive, got {}",
                self.final_time
            )));
        }
        if !(self.blowup_factor > 1.0) {
            return Err(DgError::Config(format!(
                "blowup factor must exceed 1, got {}",
                self.blowup_factor
            )));
        }
        Ok(())
    }

    /// Number of full steps: floor(T/dt) with a small guard against round-off.
    pub fn num_steps(&self) -> usize {
        (self.final_time / self.dt + 1e-9).floor() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Completed,
    BlewUp { step: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergySample {
    pub step: usize,
    pub time: f64,
    pub energy: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub state: FieldState,
    pub energy: Vec<EnergySample>,
    pub status: RunStatus,
    pub initial_energy: f64,
    pub final_energy: f64,
}

impl RunOutcome {
    pub fn completed(&self) -> bool {
        self.status == RunStatus::Completed
    }

    pub fn max_energy(&self) -> f64 {
        self.energy
            .iter()
            .map(|e| e.energy)
            .fold(self.initial_energy.max(self.final_energy), f64::max)
    }
}

/// Reusable buffers for [`step`].
#[derive(Debug, Clone, Default)]
pub struct StepWorkspace {
    dex: Vec<f64>,
    dey: Vec<f64>,
    dhz: Vec<f64>,
}

impl StepWorkspace {
    pub fn new(len: usize) -> Self {
        Self {
            dex: vec![0.0; len],
            dey: vec![0.0; len],
            dhz: vec![0.0; len],
        }
    }
}

/// Advances E from level m to m+1 and Hz from m+1/2 to m+3/2.
pub fn step(state: &mut FieldState, op: &DgOperator, dt: f64, ws: &mut StepWorkspace) {
    let n = state.ex.len();
    if ws.dex.len() != n {
        *ws = StepWorkspace::new(n);
    }
    op.rhs_e(state, &mut ws.dex, &mut ws.dey);
    for (e, d) in state.ex.iter_mut().zip(&ws.dex) {
        *e += dt * d;
    }
    for (e, d) in state.ey.iter_mut().zip(&ws.dey) {
        *e += dt * d;
    }
    op.rhs_h(state, &mut ws.dhz);
    for (h, d) in state.hz.iter_mut().zip(&ws.dhz) {
        *h += dt * d;
    }
    state.advance(dt);
}

/// sum_k (eps E, E)_{T_k} + (mu Hz, Hz)_{T_k}, evaluated exactly with the
/// element mass matrices.
pub fn discrete_energy(state: &FieldState, op: &DgOperator) -> f64 {
    // sequential sum for a reproducible result
    op.element_energies(state).iter().sum()
}

pub fn run(state0: FieldState, op: &DgOperator, config: &RunConfig) -> Result<RunOutcome> {
    config.validate()?;
    let mut state = state0;
    let mut ws = StepWorkspace::new(state.ex.len());
    let initial = discrete_energy(&state, op);
    let mut energy = vec![EnergySample {
        step: state.steps(),
        time: state.time_e(),
        energy: initial,
    }];
    let threshold = config.blowup_factor * initial;
    let every = config.record_energy_every;
    let mut status = RunStatus::Completed;
    let mut current = initial;

    for _ in 0..config.num_steps() {
        step(&mut state, op, config.dt, &mut ws);
        current = discrete_energy(&state, op);
        let blown = !current.is_finite() || (initial > 0.0 && current > threshold);
        if blown || (every > 0 && state.steps() % every == 0) {
            energy.push(EnergySample {
                step: state.steps(),
                time: state.time_e(),
                energy: current,
            });
        }
        if blown || !state.is_finite() {
            status = RunStatus::BlewUp { step: state.steps() };
            break;
        }
    }
    if energy.last().map(|e| e.step) != Some(state.steps()) {
        energy.push(EnergySample {
            step: state.steps(),
            time: state.time_e(),
            energy: current,
        });
    }
    Ok(RunOutcome {
        state,
        energy,
        status,
        initial_energy: initial,
        final_energy: current,
    })
}

pub fn write_energy_csv(samples: &[EnergySample], out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "step,time,energy")?;
    for s in samples {
        writeln!(out, "{},{:?},{:?}", s.step, s.time, s.energy)?;
    }
    Ok(())
}

pub fn save_energy_csv(samples: &[EnergySample], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    write_energy_csv(samples, &mut buf).map_err(|e| DgError::io(path, e))?;
    std::fs::write(path, buf).map_err(|e| DgError::io(path, e))
}

/// Nodal values as `element,node,x,y,Ex,Ey,Hz`. E and Hz are half a step
/// apart (see [`FieldState::time_e`] and [`FieldState::time_h`]).
pub fn write_snapshot_csv(state: &FieldState, op: &DgOperator, out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "element,node,x,y,Ex,Ey,Hz")?;
    let np = state.np();
    for (g, p) in op.node_coordinates().iter().enumerate() {
        let v = state.values_at(g / np, g % np);
        writeln!(
            out,
            "{},{},{:?},{:?},{:?},{:?},{:?}",
            g / np,
            g % np,
            p[0],
            p[1],
            v.ex,
            v.ey,
            v.hz
        )?;
    }
    Ok(())
}

pub fn save_snapshot_csv(state: &FieldState, op: &DgOperator, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    write_snapshot_csv(state, op, &mut buf).map_err(|e| DgError::io(path, e))?;
    std::fs::write(path, buf).map_err(|e| DgError::io(path, e))
}

/// Angular frequency of the cos(pi x) cos(pi y) cavity mode for a diagonal
/// permittivity: omega = pi sqrt(1/eps_xx + 1/eps_yy).
pub fn cavity_frequency(eps_xx: f64, eps_yy: f64) -> f64 {
    PI * (1.0 / eps_xx + 1.0 / eps_yy).sqrt()
}

/// Exact standing mode in the PEC square (-1,1)^2 for diagonal eps and mu = 1.
pub fn cavity_mode(eps_xx: f64, eps_yy: f64, x: f64, y: f64, t: f64) -> TeValues {
    let w = cavity_frequency(eps_xx, eps_yy);
    let (cx, sx) = ((PI * x).cos(), (PI * x).sin());
    let (cy, sy) = ((PI * y).cos(), (PI * y).sin());
    TeValues {
        ex: -PI / (eps_xx * w) * cx * sy * (w * t).sin(),
        ey: PI / (eps_yy * w) * sx * cy * (w * t).sin(),
        hz: cx * cy * (w * t).cos(),
    }
}

/// Initial data: E at t = 0 and Hz at t = dt/2.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    /// Hz = cos(pi x) cos(pi y) cos(omega dt/2), E = 0 (uses the permittivity
    /// of element 0).
    PecCosine,
    /// Hz = sin(pi dt/2) sin(pi x y), E = 0.
    SmSine,
    Zero,
    /// Expressions in `x`, `y`, `t` (E evaluated at t = 0, Hz at t = dt/2).
    Custom { ex: String, ey: String, hz: String },
}

impl InitialCondition {
    pub fn name(&self) -> &'static str {
        match self {
            InitialCondition::PecCosine => "pec_cosine",
            InitialCondition::SmSine => "sm_sine",
            InitialCondition::Zero => "zero",
            InitialCondition::Custom { .. } => "custom",
        }
    }
}

impl fmt::Display for InitialCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InitialCondition {
    type Err = DgError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "pec_cosine" => Ok(Self::PecCosine),
            "sm_sine" => Ok(Self::SmSine),
            "zero" => Ok(Self::Zero),
            other => Err(DgError::Config(format!(
                "unknown initial condition `{other}` (expected pec_cosine, sm_sine, zero or custom)"
            ))),
        }
    }
}

struct Expr {
    node: Node,
    ctx: HashMapContext,
}

impl Expr {
    fn parse(src: &str) -> Result<Self> {
        let node = evalexpr::build_operator_tree(src)
            .map_err(|e| DgError::Config(format!("cannot parse expression `{src}`: {e}")))?;
        let mut ctx = HashMapContext::new();
        let unary = |f: fn(f64) -> f64| {
            Function::new(move |arg: &Value| Ok(Value::Float(f(arg.as_number()?))))
        };
        let table: [(&str, fn(f64) -> f64); 7] = [
            ("sin", f64::sin),
            ("cos", f64::cos),
            ("tan", f64::tan),
            ("exp", f64::exp),
            ("sqrt", f64::sqrt),
            ("abs", f64::abs),
            ("ln", f64::ln),
        ];
        for (name, f) in table {
            ctx.set_function(name.into(), unary(f)).map_err(expr_err)?;
        }
        ctx.set_value("pi".into(), Value::Float(PI)).map_err(expr_err)?;
        Ok(Self { node, ctx })
    }

    fn eval(&mut self, x: f64, y: f64, t: f64) -> Result<f64> {
        for (k, v) in [("x", x), ("y", y), ("t", t)] {
            self.ctx.set_value(k.into(), Value::Float(v)).map_err(expr_err)?;
        }
        let v = self.node.eval_number_with_context(&self.ctx).map_err(expr_err)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(DgError::Config(format!("expression evaluates to {v} at ({x}, {y}, {t})")))
        }
    }
}

fn expr_err(e: EvalexprError) -> DgError {
    DgError::Config(format!("expression error: {e}"))
}

pub fn initial_conditions(ic: &InitialCondition, op: &DgOperator, dt: f64) -> Result<FieldState> {
    let mut state = op.zero_state(dt);
    let coords = op.node_coordinates();
    let th = 0.5 * dt;
    match ic {
        InitialCondition::Zero => {}
        InitialCondition::PecCosine => {
            let eps = op.materials().eps(0);
            let w = cavity_frequency(eps.xx, eps.yy);
            for (h, p) in state.hz.iter_mut().zip(&coords) {
                *h = (PI * p[0]).cos() * (PI * p[1]).cos() * (w * th).cos();
            }
        }
        InitialCondition::SmSine => {
            for (h, p) in state.hz.iter_mut().zip(&coords) {
                *h = (PI * th).sin() * (PI * p[0] * p[1]).sin();
            }
        }
        InitialCondition::Custom { ex, ey, hz } => {
            let (mut fx, mut fy, mut fh) = (Expr::parse(ex)?, Expr::parse(ey)?, Expr::parse(hz)?);
            for (g, p) in coords.iter().enumerate() {
                state.ex[g] = fx.eval(p[0], p[1], 0.0)?;
                state.ey[g] = fy.eval(p[0], p[1], 0.0)?;
                state.hz[g] = fh.eval(p[0], p[1], th)?;
            }
        }
    }
    Ok(state)
}
