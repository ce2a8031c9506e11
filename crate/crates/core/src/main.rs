use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};

use dgtd::config::{Config, TimeStep};
use dgtd::experiments::{
    find_dtmax, run_table, save_table_csv, write_table_csv, PreparedCase, SweepRow, DEFAULT_TOLERANCE,
};
use dgtd::leapfrog::{initial_conditions, run, save_energy_csv, save_snapshot_csv, RunStatus};
use dgtd::stability_theory::{
    bound_inputs, calibrate_c_inv, stability_bound_2d, stability_bound_3d, BoundInputs, StabilityConstants,
};
use dgtd::DgError;

#[derive(Parser)]
#[command(name = "dgtd", version, about = "Leap-frog DG solver for 2D TE Maxwell in anisotropic media")]
struct Cli {
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write the energy trace (and a field snapshot).
    Simulate(Common),
    /// Evaluate the theoretical time-step bound.
    Bound(BoundArgs),
    /// Find the largest stable time step for the configured case.
    DtmaxSweep(SweepArgs),
    /// Sweep mesh levels and orders from `[sweep]` and write CFL tables.
    Table(SweepArgs),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Relative bisection tolerance (overrides `sweep.tolerance`).
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args)]
struct BoundArgs {
    #[command(flatten)]
    common: Common,
    /// Also evaluate the 3D bound; needs the five quantities below.
    #[arg(long = "3d", requires_all = ["h_min", "eps_lower", "mu_lower", "z_min", "y_min"])]
    three_d: bool,
    #[arg(long)]
    h_min: Option<f64>,
    #[arg(long)]
    eps_lower: Option<f64>,
    #[arg(long)]
    mu_lower: Option<f64>,
    #[arg(long)]
    z_min: Option<f64>,
    #[arg(long)]
    y_min: Option<f64>,
    /// Override the calibrated inverse-inequality constant for the 3D bound.
    #[arg(long)]
    c_inv: Option<f64>,
    /// Override the calibrated trace constant for the 3D bound.
    #[arg(long)]
    c_tau: Option<f64>,
}

enum Failure {
    Config(anyhow::Error),
    Internal(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Internal(e)
    }
}

impl From<DgError> for Failure {
    fn from(e: DgError) -> Self {
        Failure::Internal(e.into())
    }
}

fn config_err(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Config(e.into())
}

type CmdResult = Result<ExitCode, Failure>;

const EXIT_CONFIG: u8 = 2;
const EXIT_BLOWUP: u8 = 3;
const EXIT_INTERNAL: u8 = 4;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} worker threads: {e}");
            return ExitCode::from(EXIT_INTERNAL);
        }
    }
    let result = match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Bound(a) => bound(a),
        Command::DtmaxSweep(a) => dtmax_sweep(a),
        Command::Table(a) => table(a),
    };
    match result {
        Ok(code) => code,
        Err(Failure::Config(e)) => {
            eprintln!("config error: {e:#}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Internal(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INTERNAL)
        }
    }
}

fn load(common: &Common) -> Result<Config, Failure> {
    Config::load(&common.config).map_err(config_err)
}

fn out_path(common: &Common, name: &Path) -> Result<PathBuf, Failure> {
    std::fs::create_dir_all(&common.out)
        .with_context(|| format!("creating output directory {}", common.out.display()))?;
    Ok(common.out.join(name))
}

fn simulate(args: &Common) -> CmdResult {
    let cfg = load(args)?;
    let op = cfg.build_operator().map_err(config_err)?;
    let dt = match cfg.time_step().map_err(config_err)? {
        TimeStep::Fixed(dt) => dt,
        TimeStep::Auto { safety } => {
            let c_inv = calibrate_c_inv(cfg.solver.order)?;
            safety * stability_bound_2d(&bound_inputs(&op, &c_inv)?)?.dt_bound
        }
    };
    let run_cfg = cfg.run_config(dt).map_err(config_err)?;
    let ic = cfg.initial_condition().map_err(config_err)?;
    let state = initial_conditions(&ic, &op, dt).map_err(config_err)?;
    println!(
        "{} elements, N = {}, {} nodes each; dt = {dt:.6e}, {} steps to T = {}",
        op.num_elements(),
        cfg.solver.order,
        op.np(),
        run_cfg.num_steps(),
        cfg.time.final_time
    );

    let outcome = run(state, &op, &run_cfg)?;
    let energy_path = out_path(args, &cfg.output.energy)?;
    save_energy_csv(&outcome.energy, &energy_path)?;
    if let Some(snap) = &cfg.output.snapshot {
        save_snapshot_csv(&outcome.state, &op, out_path(args, snap)?)?;
    }
    let effective = cfg.effective()?.to_toml()?;
    let cfg_path = out_path(args, Path::new("config.toml"))?;
    std::fs::write(&cfg_path, effective).with_context(|| format!("writing {}", cfg_path.display()))?;

    let ratio = outcome.final_energy / outcome.initial_energy;
    match outcome.status {
        RunStatus::Completed => {
            println!(
                "completed: energy {:.6e} -> {:.6e} (ratio {ratio:.6}); wrote {}",
                outcome.initial_energy,
                outcome.final_energy,
                energy_path.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        RunStatus::BlewUp { step } => {
            eprintln!(
                "blowup at step {step} (t = {:.6e}): energy ratio {ratio:.3e}",
                step as f64 * dt
            );
            Ok(ExitCode::from(EXIT_BLOWUP))
        }
    }
}

const BOUND_HEADER: &str = "dimension,N,alpha,bc,h_min,eps_lower,mu_lower,z_min,y_min,c_inv,c_tau,beta1,beta2,beta3,c_e,c_h,dt_bound";

fn bound_row(dim: usize, i: &BoundInputs, c: &StabilityConstants) -> String {
    format!(
        "{dim},{},{:?},{},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?}",
        i.order,
        i.flux.alpha(),
        i.flux.bc(),
        i.h_min,
        i.eps_lower,
        i.mu_lower,
        i.z_min,
        i.y_min,
        c.c_inv,
        c.c_tau,
        c.beta.beta1,
        c.beta.beta2,
        c.beta.beta3,
        c.c_e,
        c.c_h,
        c.dt_bound
    )
}

fn print_report(title: &str, i: &BoundInputs, c: &StabilityConstants) {
    println!("{title}");
    println!("  N = {}, alpha = {}, bc = {}", i.order, i.flux.alpha(), i.flux.bc());
    println!("  h_min     = {:.6e}", i.h_min);
    println!("  eps_lower = {:.6e}   mu_lower = {:.6e}", i.eps_lower, i.mu_lower);
    println!("  Z_min     = {:.6e}   Y_min    = {:.6e}", i.z_min, i.y_min);
    println!("  C_inv     = {:.6e}   C_tau    = {:.6e}", c.c_inv, c.c_tau);
    println!(
        "  beta      = ({}, {}, {})",
        c.beta.beta1, c.beta.beta2, c.beta.beta3
    );
    println!("  C_E       = {:.6e}   C_H      = {:.6e}", c.c_e, c.c_h);
    println!("  dt_bound  = {:.6e}", c.dt_bound);
}

fn bound(args: &BoundArgs) -> CmdResult {
    let cfg = load(&args.common)?;
    let op = cfg.build_operator().map_err(config_err)?;
    let c_inv = calibrate_c_inv(cfg.solver.order)?;
    let inputs = bound_inputs(&op, &c_inv)?;
    let two = stability_bound_2d(&inputs)?;
    print_report("2D bound", &inputs, &two);
    let mut csv = format!("{BOUND_HEADER}\n{}\n", bound_row(2, &inputs, &two));

    if args.three_d {
        let need = |v: Option<f64>, name: &str| v.ok_or_else(|| config_err(anyhow!("--3d needs --{name}")));
        let inputs3 = BoundInputs {
            h_min: need(args.h_min, "h-min")?,
            eps_lower: need(args.eps_lower, "eps-lower")?,
            mu_lower: need(args.mu_lower, "mu-lower")?,
            z_min: need(args.z_min, "z-min")?,
            y_min: need(args.y_min, "y-min")?,
            c_inv: args.c_inv.unwrap_or(inputs.c_inv),
            c_tau: args.c_tau.unwrap_or(inputs.c_tau),
            ..inputs
        };
        let three = stability_bound_3d(&inputs3).map_err(config_err)?;
        print_report("3D bound", &inputs3, &three);
        csv.push_str(&bound_row(3, &inputs3, &three));
        csv.push('\n');
    }
    let path = out_path(&args.common, Path::new("bound.csv"))?;
    std::fs::write(&path, csv).with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(ExitCode::SUCCESS)
}

fn tolerance(args: &SweepArgs, cfg: &Config) -> f64 {
    args.tol
        .or(cfg.sweep.as_ref().map(|s| s.tolerance))
        .unwrap_or(DEFAULT_TOLERANCE)
}

fn dtmax_sweep(args: &SweepArgs) -> CmdResult {
    let cfg = load(&args.common)?;
    let case = cfg.stability_case().map_err(config_err)?;
    let tol = tolerance(args, &cfg);
    let c_inv = calibrate_c_inv(case.order)?;
    let prepared = PreparedCase::new(case, &c_inv).map_err(config_err)?;
    let h_min = prepared.h_min();
    let result = find_dtmax(&prepared, tol)?;
    let row = SweepRow {
        cells: prepared.case.cells,
        order: prepared.case.order,
        h_min,
        outcome: Ok(result),
    };
    println!(
        "h_min = {h_min:.4}, N = {}: dt_max = {:.6e} (unstable at {:.6e}), C = {:.4}, bound = {:.6e}, {} runs",
        row.order,
        result.dt_max,
        result.dt_unstable,
        row.cfl().unwrap_or(f64::NAN),
        result.theory_bound,
        result.classifications
    );
    let path = out_path(&args.common, Path::new("dtmax.csv"))?;
    let mut buf = Vec::new();
    write_table_csv(std::slice::from_ref(&row), &mut buf).context("formatting dtmax row")?;
    std::fs::write(&path, buf).with_context(|| format!("writing {}", path.display()))?;
    Ok(ExitCode::SUCCESS)
}

fn table(args: &SweepArgs) -> CmdResult {
    let cfg = load(&args.common)?;
    let mut specs = cfg.sweep_specs().map_err(config_err)?;
    let tol = tolerance(args, &cfg);
    let mut failed = 0;
    let mut total = 0;
    for spec in &mut specs {
        spec.tolerance = tol;
        spec.validate().map_err(config_err)?;
        let name = spec.file_name();
        println!("{name}");
        let rows = run_table(spec)?;
        for row in &rows {
            total += 1;
            match &row.outcome {
                Ok(r) => println!(
                    "  h_min = {:.4}  N = {}  dt_max = {:.6e}  C = {:.4}  bound = {:.6e}",
                    row.h_min,
                    row.order,
                    r.dt_max,
                    row.cfl().unwrap_or(f64::NAN),
                    r.theory_bound
                ),
                Err(msg) => {
                    failed += 1;
                    println!("  h_min = {:.4}  N = {}  FAILED: {msg}", row.h_min, row.order);
                }
            }
        }
        save_table_csv(&rows, out_path(&args.common, Path::new(&name))?)?;
    }
    if failed > 0 {
        return Err(Failure::Internal(anyhow!("{failed} of {total} rows failed")));
    }
    Ok(ExitCode::SUCCESS)
}
