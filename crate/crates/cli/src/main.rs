//! Command-line front end for the Anderson Hamiltonian lattice laboratory.
//!
//! Subcommands: gn, rate, renorm, spectrum, subbox-check, asymptotics,
//! tail, scaling, fluct, shape. Every run prints a JSON summary embedding
//! {version, config, seed} to stdout (and to `--out` when given); series
//! subcommands additionally write a CSV file. Outputs are written
//! atomically, and re-running an embedded config reproduces the files
//! byte-for-byte.

mod config;
mod output;

use anderson_core::dim::Dim;
use anderson_core::eigensolver::{smallest_eigenpairs_with, SolverOptions};
use anderson_core::experiments::{
    run_asymptotics, run_fluctuations, run_scaling_law, run_shape, run_tail, ExperimentConfig,
};
use anderson_core::groundstate::{
    compute_constants, limit_profiles, solve_ground_state, GroundStateOptions,
};
use anderson_core::hamiltonian::assemble;
use anderson_core::lattice::{sample_white_noise, LatticeGrid};
use anderson_core::ratefn::{estimate_rate, RateOptions};
use anderson_core::renorm::{renorm_constant, RenormConstant, RenormOrder};
use anderson_core::subbox::check_box_bounds;
use anyhow::{anyhow, bail};
use clap::{Args, Parser, Subcommand};
use config::{parse_list, StoredConfig};
use output::{summary_json, write_json, CsvField, CsvSeries};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "anderson",
    version,
    about = "Lattice laboratory for the smallest eigenvalues of -Laplacian + white noise in d <= 3"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON config file or a previous output file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write the JSON summary to this file (stdout always gets a copy).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Write the CSV series to this file (default: <subcommand>.csv for
    /// subcommands that emit series).
    #[arg(long, global = true)]
    csv: Option<PathBuf>,
    /// Worker threads; falls back to ANDERSON_THREADS, then physical cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Args, Clone, Default)]
struct CommonArgs {
    /// Dimension (1, 2 or 3).
    #[arg(long)]
    dim: Option<usize>,
    /// Box side length L.
    #[arg(long = "L")]
    side: Option<f64>,
    /// Lattice points per unit length.
    #[arg(long)]
    ppu: Option<usize>,
    /// Noise amplitude.
    #[arg(long)]
    beta: Option<f64>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo replicas.
    #[arg(long)]
    replicas: Option<usize>,
    /// Eigensolver residual tolerance.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Gagliardo-Nirenberg constants, ground state and limit profiles.
    Gn {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Rate function I_L(x) by constrained optimisation.
    Rate {
        #[command(flatten)]
        common: CommonArgs,
        /// Target principal eigenvalue x.
        #[arg(long, allow_hyphen_values = true)]
        x: Option<f64>,
        /// Grid resolution (points per unit length).
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Renormalisation constants C(d, a, m, beta).
    Renorm {
        #[command(flatten)]
        common: CommonArgs,
        /// Green's function mass m > 0.
        #[arg(long = "m")]
        mass: Option<f64>,
        /// Order: none, second or fourth.
        #[arg(long)]
        order: Option<String>,
        /// Comma-separated lattice spacings.
        #[arg(long)]
        spacings: Option<String>,
    },
    /// Smallest-k eigenpairs of one sampled operator.
    Spectrum {
        #[command(flatten)]
        common: CommonArgs,
        /// Number of eigenpairs.
        #[arg(long)]
        k: Option<usize>,
    },
    /// Sub-box eigenvalue bounds on a coupled sample.
    SubboxCheck {
        #[command(flatten)]
        common: CommonArgs,
        /// Sub-box scale r (multiple of 4 lattice spacings).
        #[arg(long)]
        r: Option<f64>,
        /// Eigenpairs per box solve.
        #[arg(long)]
        k_eigs: Option<usize>,
    },
    /// Mean smallest eigenvalues along an L-ladder.
    Asymptotics {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated ladder of box sides.
        #[arg(long)]
        ladder: Option<String>,
        /// Eigenvalue index (1-based).
        #[arg(long)]
        n: Option<usize>,
    },
    /// Empirical tail P(lambda_1 >= -x) against the analytic envelope.
    Tail {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated x values (default: a grid around x_c).
        #[arg(long)]
        x_grid: Option<String>,
        #[arg(long)]
        gamma1: Option<f64>,
        #[arg(long)]
        gamma2: Option<f64>,
        #[arg(long)]
        eta: Option<f64>,
    },
    /// Two-sample Kolmogorov-Smirnov test of the beta-scaling law.
    Scaling {
        #[command(flatten)]
        common: CommonArgs,
        /// Eigenvalue index (1-based).
        #[arg(long)]
        n: Option<usize>,
    },
    /// Fluctuation probe: Gumbel and Poisson inter-arrival diagnostics.
    Fluct {
        #[command(flatten)]
        common: CommonArgs,
        /// Number of eigenvalues per replica.
        #[arg(long)]
        n_max: Option<usize>,
    },
    /// Eigenfunction-shape probe near localisation centers.
    Shape {
        #[command(flatten)]
        common: CommonArgs,
        /// Eigenvalue index (1-based).
        #[arg(long)]
        n: Option<usize>,
        /// Window radius in rescaled coordinates.
        #[arg(long)]
        window: Option<f64>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Gn { .. } => "gn",
            Command::Rate { .. } => "rate",
            Command::Renorm { .. } => "renorm",
            Command::Spectrum { .. } => "spectrum",
            Command::SubboxCheck { .. } => "subbox-check",
            Command::Asymptotics { .. } => "asymptotics",
            Command::Tail { .. } => "tail",
            Command::Scaling { .. } => "scaling",
            Command::Fluct { .. } => "fluct",
            Command::Shape { .. } => "shape",
        }
    }
}

/// Configuration errors exit with 2, runtime errors with 1.
enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

fn config_err(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Config(e.into())
}

fn runtime_err(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Runtime(e.into())
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("configuration error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn init_threads(threads: Option<usize>, stored: Option<usize>) -> Result<usize, Failure> {
    let from_env = std::env::var("ANDERSON_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok());
    let t = threads
        .or(stored)
        .or(from_env)
        .unwrap_or_else(num_cpus::get_physical)
        .max(1);
    rayon::ThreadPoolBuilder::new()
        .num_threads(t)
        .build_global()
        .map_err(runtime_err)?;
    Ok(t)
}

fn attach_banner(dim: Dim, aggregates: &mut serde_json::Value) {
    if dim == Dim::Three {
        eprintln!("warning: {}", anderson_core::experiments::D3_BANNER);
        if let Some(map) = aggregates.as_object_mut() {
            map.insert(
                "banner".into(),
                serde_json::Value::String(anderson_core::experiments::D3_BANNER.into()),
            );
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let stored = match &cli.config {
        Some(path) => {
            let loaded = StoredConfig::load(path).map_err(config_err)?;
            loaded
                .check_subcommand(cli.command.name())
                .map_err(config_err)?;
            loaded
        }
        None => StoredConfig::default(),
    };
    let threads = init_threads(cli.threads, stored.threads)?;

    let (config, aggregates, csv) = dispatch(&cli.command, stored, threads)?;
    let summary = summary_json(&config, &aggregates);
    println!(
        "{}",
        serde_json::to_string_pretty(&summary).map_err(runtime_err)?
    );
    if let Some(out) = &cli.out {
        write_json(out, &summary).map_err(runtime_err)?;
    }
    if let Some(series) = csv {
        let path = cli
            .csv
            .clone()
            .unwrap_or_else(|| PathBuf::from(format!("{}.csv", cli.command.name())));
        series.write(&path).map_err(runtime_err)?;
    }
    Ok(())
}

fn resolve_dim(flag: Option<usize>, stored: Option<usize>) -> Result<Dim, Failure> {
    let d = flag
        .or(stored)
        .ok_or_else(|| config_err(anyhow!("--dim is required")))?;
    Dim::new(d).map_err(config_err)
}

fn solver_options(tol: f64) -> SolverOptions {
    SolverOptions {
        tol,
        ..SolverOptions::default()
    }
}

type CommandOutput = (StoredConfig, serde_json::Value, Option<CsvSeries>);

fn dispatch(
    command: &Command,
    stored: StoredConfig,
    threads: usize,
) -> Result<CommandOutput, Failure> {
    match command {
        Command::Gn { common } => cmd_gn(common, stored, threads),
        Command::Rate { common, x, grid } => cmd_rate(common, *x, *grid, stored, threads),
        Command::Renorm {
            common,
            mass,
            order,
            spacings,
        } => cmd_renorm(common, *mass, order.clone(), spacings.clone(), stored, threads),
        Command::Spectrum { common, k } => cmd_spectrum(common, *k, stored, threads),
        Command::SubboxCheck { common, r, k_eigs } => {
            cmd_subbox(common, *r, *k_eigs, stored, threads)
        }
        Command::Asymptotics { common, ladder, n } => {
            cmd_asymptotics(common, ladder.clone(), *n, stored, threads)
        }
        Command::Tail {
            common,
            x_grid,
            gamma1,
            gamma2,
            eta,
        } => cmd_tail(common, x_grid.clone(), *gamma1, *gamma2, *eta, stored, threads),
        Command::Scaling { common, n } => cmd_scaling(common, *n, stored, threads),
        Command::Fluct { common, n_max } => cmd_fluct(common, *n_max, stored, threads),
        Command::Shape { common, n, window } => cmd_shape(common, *n, *window, stored, threads),
    }
}

fn cmd_gn(
    common: &CommonArgs,
    stored: StoredConfig,
    threads: usize,
) -> Result<CommandOutput, Failure> {
    let dim = resolve_dim(common.dim, stored.dim)?;
    let config = StoredConfig {
        subcommand: "gn".into(),
        dim: Some(dim.value()),
        seed: Some(common.seed.or(stored.seed).unwrap_or(0)),
        threads: Some(threads),
        ..StoredConfig::default()
    };
    let profile = solve_ground_state(dim, &GroundStateOptions::default()).map_err(runtime_err)?;
    let consts = compute_constants(&profile);
    let limits = limit_profiles(&profile, &consts);
    let aggregates = serde_json::json!({
        "d": dim.value(),
        "kappa": consts.kappa,
        "C_d": consts.c_d,
        "rho": consts.rho,
        "sup_J": consts.sup_j,
        "lambda_scale": consts.lambda_scale,
        "Q0": profile.q0,
        "norms": {
            "l2": profile.l2,
            "l4": profile.l4,
            "grad_l2": profile.grad_l2,
        },
        "psi_residual": limits.psi_residual,
        "w_residual": limits.w_residual,
        "w_eigenvalue": limits.w_eigenvalue,
    });
    let mut csv = CsvSeries::new(&config, &["r", "q", "psi_star", "w_star", "v_star"]);
    for (i, &r) in profile.r_grid.iter().enumerate() {
        csv.push(&[
            CsvField::Float(r),
            CsvField::Float(profile.q_values[i]),
            CsvField::Float(limits.psi_star[i]),
            CsvField::Float(limits.w_star[i]),
            CsvField::Float(limits.v_star[i]),
        ]);
    }
    Ok((config, aggregates, Some(csv)))
}

fn cmd_rate(
    common: &CommonArgs,
    x: Option<f64>,
    grid_flag: Option<usize>,
    stored: StoredConfig,
    threads: usize,
) -> Result<CommandOutput, Failure> {
    let dim = resolve_dim(common.dim, stored.dim)?;
    let side = common.side.or(stored.side).unwrap_or(20.0);
    let target = x.or(stored.x).unwrap_or(-1.0);
    let grid_res = grid_flag.or(stored.grid).unwrap_or(64);
    let seed = common.seed.or(stored.seed).unwrap_or(0);
    let tol = common.tol.or(stored.tol).unwrap_or(1e-9);
    if side <= 0.0 {
        return Err(config_err(anyhow!("L must be positive")));
    }
    let config = StoredConfig {
        subcommand: "rate".into(),
        dim: Some(dim.value()),
        side: Some(side),
        x: Some(target),
        grid: Some(grid_res),
        seed: Some(seed),
        tol: Some(tol),
        threads: Some(threads),
        ..StoredConfig::default()
    };
    let grid = LatticeGrid::centered(dim, side, grid_res).map_err(config_err)?;
    let opts = RateOptions {
        seed,
        solver: solver_options(tol),
        ..RateOptions::default()
    };
    let estimate = estimate_rate(&grid, target, &opts).map_err(runtime_err)?;
    let aggregates = serde_json::json!({
        "value": estimate.value,
        "achieved_lambda": estimate.achieved_lambda,
        "iterations": estimate.iterations,
        "constraint_violation": estimate.constraint_violation,
    });
    let d = dim.value();
    let mut header: Vec<&str> = vec!["site"];
    let coords = ["x1", "x2", "x3"];
    header.extend_from_slice(&coords[..d]);
    header.push("v");
    let mut csv = CsvSeries::new(&config, &header);
    for (i, &v) in estimate.v_opt.values().iter().enumerate() {
        let pos = grid.position(i);
        let mut row = vec![CsvField::Int(i as i64)];
        for p in pos.iter().take(d) {
            row.push(CsvField::Float(*p));
        }
        row.push(CsvField::Float(v));
        csv.push(&row);
    }
    Ok((config, aggregates, Some(csv)))
}

fn parse_order(name: &str) -> anyhow::Result<RenormOrder> {
    match name {
        "none" => Ok(RenormOrder::None),
        "second" | "second_order" => Ok(RenormOrder::SecondOrder),
        "fourth" | "plus_fourth_order" => Ok(RenormOrder::PlusFourthOrder),
        other => bail!("unknown order '{other}' (none | second | fourth)"),
    }
}

fn cmd_renorm(
    common: &CommonArgs,
    mass: Option<f64>,
    order: Option<String>,
    spacings: Option<String>,
    stored: StoredConfig,
    threads: usize,
) -> Result<CommandOutput, Failure> {
    let dim = resolve_dim(common.dim, stored.dim)?;
    let mass = mass.or(stored.mass).unwrap_or(1.0);
    let beta = common.beta.or(stored.beta).unwrap_or(1.0);
    let order_name = order.or(stored.order.clone()).unwrap_or_else(|| match dim {
        Dim::One => "none".into(),
        _ => "second".into(),
    });
    let order = parse_order(&order_name).map_err(config_err)?;
    // Invalid order/dimension combinations are configuration errors.
    match (dim, order) {
        (Dim::One, RenormOrder::None)
        | (Dim::Two, RenormOrder::SecondOrder)
        | (Dim::Three, RenormOrder::SecondOrder)
        | (Dim::Three, RenormOrder::PlusFourthOrder) => {}
        _ => {
            return Err(config_err(anyhow!(
                "order '{order_name}' is not valid in dimension {dim}"
            )))
        }
    }
    let spacing_list = match spacings {
        Some(text) => parse_list(&text).map_err(config_err)?,
        None => stored.spacings.clone().unwrap_or_else(|| vec![0.0625]),
    };
    if spacing_list.iter().any(|&a| a <= 0.0) {
        return Err(config_err(anyhow!("spacings must be positive")));
    }
    if mass <= 0.0 {
        return Err(config_err(anyhow!("mass must be positive")));
    }
    let config = StoredConfig {
        subcommand: "renorm".into(),
        dim: Some(dim.value()),
        mass: Some(mass),
        beta: Some(beta),
        order: Some(order_name),
        spacings: Some(spacing_list.clone()),
        seed: Some(common.seed.or(stored.seed).unwrap_or(0)),
        threads: Some(threads),
        ..StoredConfig::default()
    };
    let mut table: Vec<RenormConstant> = Vec::new();
    for &a in &spacing_list {
        table.push(renorm_constant(dim, a, mass, beta, order).map_err(runtime_err)?);
    }
    let aggregates = serde_json::json!({ "table": table });
    Ok((config, aggregates, None))
}

fn cmd_spectrum(
    common: &CommonArgs,
    k: Option<usize>,
    stored: StoredConfig,
    threads: usize,
) -> Result<CommandOutput, Failure> {
    let dim = resolve_dim(common.dim, stored.dim)?;
    let side = common.side.or(stored.side).unwrap_or(8.0);
    let ppu = common.ppu.or(stored.ppu).unwrap_or(32);
    let beta = common.beta.or(stored.beta).unwrap_or(1.0);
    let seed = common.seed.or(stored.seed).unwrap_or(0);
    let k = k.or(stored.k).unwrap_or(1);
    let tol = common.tol.or(stored.tol).unwrap_or(1e-10);
    let config = StoredConfig {
        subcommand: "spectrum".into(),
        dim: Some(dim.value()),
        side: Some(side),
        ppu: Some(ppu),
        beta: Some(beta),
        seed: Some(seed),
        k: Some(k),
        tol: Some(tol),
        threads: Some(threads),
        ..StoredConfig::default()
    };
    let grid = LatticeGrid::centered(dim, side, ppu).map_err(config_err)?;
    let field = sample_white_noise(&grid, beta, seed).map_err(config_err)?;
    let renorm = match dim {
        Dim::One => RenormConstant::zero(dim),
        _ => renorm_constant(dim, grid.spacing(), 1.0, beta, RenormOrder::SecondOrder)
            .map_err(runtime_err)?,
    };
    let h = assemble(&grid, &field, &renorm).map_err(runtime_err)?;
    let res = smallest_eigenpairs_with(&h, k, &solver_options(tol)).map_err(runtime_err)?;
    let centers: Vec<Vec<f64>> = res
        .centers
        .iter()
        .map(|&c| grid.position(c)[..dim.value()].to_vec())
        .collect();
    let aggregates = serde_json::json!({
        "eigenvalues": res.eigenvalues,
        "residuals": res.residuals,
        "centers": centers,
        "renorm_shift": renorm.value,
        "matvecs": res.stats.matvecs,
        "restarts": res.stats.restarts,
    });
    Ok((config, aggregates, None))
}

fn cmd_subbox(
    common: &CommonArgs,
    r: Option<f64>,
    k_eigs: Option<usize>,
    stored: StoredConfig,
    threads: usize,
) -> Result<CommandOutput, Failure> {
    let dim = resolve_dim(common.dim, stored.dim)?;
    let side = common.side.or(stored.side).unwrap_or(32.0);
    let ppu = common.ppu.or(stored.ppu).unwrap_or(8);
    let beta = common.beta.or(stored.beta).unwrap_or(1.0);
    let seed = common.seed.or(stored.seed).unwrap_or(0);
    let r = r.or(stored.r).unwrap_or(4.0);
    let k_eigs = k_eigs.or(stored.k_eigs).unwrap_or(1);
    let tol = common.tol.or(stored.tol).unwrap_or(1e-8);
    let config = StoredConfig {
        subcommand: "subbox-check".into(),
        dim: Some(dim.value()),
        side: Some(side),
        ppu: Some(ppu),
        beta: Some(beta),
        seed: Some(seed),
        r: Some(r),
        k_eigs: Some(k_eigs),
        tol: Some(tol),
        threads: Some(threads),
        ..StoredConfig::default()
    };
    let grid = LatticeGrid::centered(dim, side, ppu).map_err(config_err)?;
    let field = sample_white_noise(&grid, beta, seed).map_err(config_err)?;
    let report =
        check_box_bounds(&grid, &field, r, k_eigs, &solver_options(tol)).map_err(runtime_err)?;
    let aggregates = serde_json::to_value(&report).map_err(runtime_err)?;
    Ok((config, aggregates, None))
}

fn cmd_asymptotics(
    common: &CommonArgs,
    ladder: Option<String>,
    n: Option<usize>,
    stored: StoredConfig,
    threads: usize,
) -> Result<CommandOutput, Failure> {
    let dim = resolve_dim(common.dim, stored.dim)?;
    let ppu = common.ppu.or(stored.ppu).unwrap_or(4);
    let beta = common.beta.or(stored.beta).unwrap_or(1.0);
    let seed = common.seed.or(stored.seed).unwrap_or(0);
    let replicas = common.replicas.or(stored.replicas).unwrap_or(20);
    let n = n.or(stored.n).unwrap_or(1);
    let tol = common.tol.or(stored.tol).unwrap_or(1e-8);
    if n == 0 {
        return Err(config_err(anyhow!("eigenvalue index n is 1-based")));
    }
    let ladder_values = match ladder {
        Some(text) => parse_list(&text).map_err(config_err)?,
        None => stored
            .ladder
            .clone()
            .unwrap_or_else(|| vec![64.0, 128.0, 256.0, 512.0, 1024.0]),
    };
    let config = StoredConfig {
        subcommand: "asymptotics".into(),
        dim: Some(dim.value()),
        ppu: Some(ppu),
        beta: Some(beta),
        seed: Some(seed),
        replicas: Some(replicas),
        n: Some(n),
        tol: Some(tol),
        ladder: Some(ladder_values.clone()),
        threads: Some(threads),
        ..StoredConfig::default()
    };
    let mut cfg = ExperimentConfig::new(dim, ppu, replicas, seed);
    cfg.beta = beta;
    cfg.solver = solver_options(tol);
    let report = run_asymptotics(&cfg, &ladder_values, n - 1).map_err(runtime_err)?;
    let mut aggregates = serde_json::json!({ "rows": report.rows });
    attach_banner(dim, &mut aggregates);
    let mut csv = CsvSeries::new(&config, &["L", "replica", "n", "lambda", "ratio"]);
    for sample in &report.samples {
        let a_l = report
            .rows
            .iter()
            .find(|row| row.side == sample.side)
            .map(|row| row.a_l)
            .unwrap_or(f64::NAN);
        csv.push(&[
            CsvField::Float(sample.side),
            CsvField::Int(sample.replica as i64),
            CsvField::Int((sample.index + 1) as i64),
            CsvField::Float(sample.lambda),
            CsvField::Float(sample.lambda / a_l),
        ]);
    }
    Ok((config, aggregates, Some(csv)))
}

fn cmd_tail(
    common: &CommonArgs,
    x_grid: Option<String>,
    gamma1: Option<f64>,
    gamma2: Option<f64>,
    eta: Option<f64>,
    stored: StoredConfig,
    threads: usize,
) -> Result<CommandOutput, Failure> {
    let dim = resolve_dim(common.dim, stored.dim)?;
    let side = common.side.or(stored.side).unwrap_or(64.0);
    let ppu = common.ppu.or(stored.ppu).unwrap_or(8);
    let beta = common.beta.or(stored.beta).unwrap_or(1.0);
    let seed = common.seed.or(stored.seed).unwrap_or(0);
    let replicas = common.replicas.or(stored.replicas).unwrap_or(200);
    let gamma1 = gamma1.or(stored.gamma1).unwrap_or(0.5);
    let gamma2 = gamma2.or(stored.gamma2).unwrap_or(2.0);
    let eta = eta.or(stored.eta).unwrap_or(0.1);
    let tol = common.tol.or(stored.tol).unwrap_or(1e-8);
    if !(gamma2 >= gamma1 && gamma1 > 0.0) || !(0.0..1.0).contains(&eta) {
        return Err(config_err(anyhow!(
            "need gamma2 >= gamma1 > 0 and eta in [0, 1)"
        )));
    }
    let xs = match x_grid {
        Some(text) => parse_list(&text).map_err(config_err)?,
        None => match stored.x_grid.clone() {
            Some(v) => v,
            None => {
                // Default grid straddling the critical value.
                let consts =
                    anderson_core::experiments::gn_constants(dim).map_err(runtime_err)?;
                let d = dim.as_f64();
                let xc = (consts.c_d * side.ln()).powf(1.0 / (2.0 - d / 2.0));
                (0..13).map(|i| xc * (0.4 + 0.1 * i as f64)).collect()
            }
        },
    };
    let config = StoredConfig {
        subcommand: "tail".into(),
        dim: Some(dim.value()),
        side: Some(side),
        ppu: Some(ppu),
        beta: Some(beta),
        seed: Some(seed),
        replicas: Some(replicas),
        gamma1: Some(gamma1),
        gamma2: Some(gamma2),
        eta: Some(eta),
        tol: Some(tol),
        x_grid: Some(xs.clone()),
        threads: Some(threads),
        ..StoredConfig::default()
    };
    let mut cfg = ExperimentConfig::new(dim, ppu, replicas, seed);
    cfg.beta = beta;
    cfg.solver = solver_options(tol);
    let report = run_tail(&cfg, side, &xs, gamma1, gamma2, eta).map_err(runtime_err)?;
    let mut aggregates = serde_json::json!({
        "x_critical": report.x_critical,
        "rho": report.envelope.rho,
        "C_d": report.envelope.c_d,
        "points": report.points,
    });
    attach_banner(dim, &mut aggregates);
    let mut csv = CsvSeries::new(
        &config,
        &["x", "p_hat", "ci_low", "ci_high", "env_lower", "env_upper"],
    );
    for p in &report.points {
        csv.push(&[
            CsvField::Float(p.x),
            CsvField::Float(p.p_hat),
            CsvField::Float(p.ci_low),
            CsvField::Float(p.ci_high),
            CsvField::Float(p.env_lower),
            CsvField::Float(p.env_upper),
        ]);
    }
    Ok((config, aggregates, Some(csv)))
}

fn cmd_scaling(
    common: &CommonArgs,
    n: Option<usize>,
    stored: StoredConfig,
    threads: usize,
) -> Result<CommandOutput, Failure> {
    let dim = resolve_dim(common.dim, stored.dim)?;
    let side = common.side.or(stored.side).unwrap_or(16.0);
    let ppu = common.ppu.or(stored.ppu).unwrap_or(16);
    let beta = common.beta.or(stored.beta).unwrap_or(0.5);
    let seed = common.seed.or(stored.seed).unwrap_or(0);
    let replicas = common.replicas.or(stored.replicas).unwrap_or(500);
    let n = n.or(stored.n).unwrap_or(1);
    let tol = common.tol.or(stored.tol).unwrap_or(1e-8);
    if n == 0 {
        return Err(config_err(anyhow!("eigenvalue index n is 1-based")));
    }
    if beta.is_nan() || beta <= 0.0 {
        return Err(config_err(anyhow!("beta must be positive")));
    }
    let config = StoredConfig {
        subcommand: "scaling".into(),
        dim: Some(dim.value()),
        side: Some(side),
        ppu: Some(ppu),
        beta: Some(beta),
        seed: Some(seed),
        replicas: Some(replicas),
        n: Some(n),
        tol: Some(tol),
        threads: Some(threads),
        ..StoredConfig::default()
    };
    let mut cfg = ExperimentConfig::new(dim, ppu, replicas, seed);
    cfg.solver = solver_options(tol);
    let report = run_scaling_law(&cfg, side, beta, n - 1).map_err(runtime_err)?;
    let mut aggregates = serde_json::json!({
        "beta": report.beta,
        "delta_beta": report.delta_beta,
        "ks_statistic": report.ks_statistic,
        "p_value": report.p_value,
        "per_group": report.group_a.len(),
    });
    attach_banner(dim, &mut aggregates);
    let mut csv = CsvSeries::new(&config, &["group", "replica", "n", "lambda"]);
    for (r, v) in report.group_a.iter().enumerate() {
        csv.push(&[
            CsvField::Text("a".into()),
            CsvField::Int(r as i64),
            CsvField::Int(n as i64),
            CsvField::Float(*v),
        ]);
    }
    for (r, v) in report.group_b.iter().enumerate() {
        csv.push(&[
            CsvField::Text("b".into()),
            CsvField::Int(r as i64),
            CsvField::Int(n as i64),
            CsvField::Float(*v),
        ]);
    }
    Ok((config, aggregates, Some(csv)))
}

fn cmd_fluct(
    common: &CommonArgs,
    n_max: Option<usize>,
    stored: StoredConfig,
    threads: usize,
) -> Result<CommandOutput, Failure> {
    let dim = resolve_dim(common.dim, stored.dim)?;
    let side = common.side.or(stored.side).unwrap_or(1024.0);
    let ppu = common.ppu.or(stored.ppu).unwrap_or(4);
    let beta = common.beta.or(stored.beta).unwrap_or(1.0);
    let seed = common.seed.or(stored.seed).unwrap_or(0);
    let replicas = common.replicas.or(stored.replicas).unwrap_or(200);
    let n_max = n_max.or(stored.n_max).unwrap_or(3);
    let tol = common.tol.or(stored.tol).unwrap_or(1e-8);
    let config = StoredConfig {
        subcommand: "fluct".into(),
        dim: Some(dim.value()),
        side: Some(side),
        ppu: Some(ppu),
        beta: Some(beta),
        seed: Some(seed),
        replicas: Some(replicas),
        n_max: Some(n_max),
        tol: Some(tol),
        threads: Some(threads),
        ..StoredConfig::default()
    };
    let mut cfg = ExperimentConfig::new(dim, ppu, replicas, seed);
    cfg.beta = beta;
    cfg.solver = solver_options(tol);
    let report = run_fluctuations(&cfg, side, n_max).map_err(runtime_err)?;
    let mut aggregates = serde_json::json!({
        "a_L": report.a_l,
        "b_L": report.b_l,
        "ks_gumbel": report.ks_gumbel,
        "interarrival_mean": report.interarrival_mean,
        "interarrival_cv": report.interarrival_cv,
        "ks_exponential": report.ks_exponential,
        "samples": report.normalized.len(),
    });
    attach_banner(dim, &mut aggregates);
    let mut csv = CsvSeries::new(&config, &["replica", "normalized"]);
    for (r, v) in report.normalized.iter().enumerate() {
        csv.push(&[CsvField::Int(r as i64), CsvField::Float(*v)]);
    }
    Ok((config, aggregates, Some(csv)))
}

fn cmd_shape(
    common: &CommonArgs,
    n: Option<usize>,
    window: Option<f64>,
    stored: StoredConfig,
    threads: usize,
) -> Result<CommandOutput, Failure> {
    let dim = resolve_dim(common.dim, stored.dim)?;
    let side = common.side.or(stored.side).unwrap_or(512.0);
    let ppu = common.ppu.or(stored.ppu).unwrap_or(8);
    let beta = common.beta.or(stored.beta).unwrap_or(1.0);
    let seed = common.seed.or(stored.seed).unwrap_or(0);
    let replicas = common.replicas.or(stored.replicas).unwrap_or(100);
    let n = n.or(stored.n).unwrap_or(1);
    let window = window.or(stored.window).unwrap_or(3.0);
    let tol = common.tol.or(stored.tol).unwrap_or(1e-8);
    if n == 0 {
        return Err(config_err(anyhow!("eigenvalue index n is 1-based")));
    }
    if window.is_nan() || window <= 0.0 {
        return Err(config_err(anyhow!("window must be positive")));
    }
    let config = StoredConfig {
        subcommand: "shape".into(),
        dim: Some(dim.value()),
        side: Some(side),
        ppu: Some(ppu),
        beta: Some(beta),
        seed: Some(seed),
        replicas: Some(replicas),
        n: Some(n),
        window: Some(window),
        tol: Some(tol),
        threads: Some(threads),
        ..StoredConfig::default()
    };
    let mut cfg = ExperimentConfig::new(dim, ppu, replicas, seed);
    cfg.beta = beta;
    cfg.solver = solver_options(tol);
    let report = run_shape(&cfg, side, n - 1, window).map_err(runtime_err)?;
    let mut aggregates = serde_json::json!({
        "used_replicas": report.used_replicas,
        "skipped_replicas": report.skipped_replicas,
        "l2_psi": report.l2_psi,
        "l2_psi_relative": report.l2_psi_relative,
        "l2_noise": report.l2_noise,
        "l2_noise_relative": report.l2_noise_relative,
    });
    attach_banner(dim, &mut aggregates);
    let mut csv = CsvSeries::new(
        &config,
        &["x", "eigen_profile", "noise_profile", "ref_psi", "ref_v"],
    );
    for (i, &x) in report.xs.iter().enumerate() {
        csv.push(&[
            CsvField::Float(x),
            CsvField::Float(report.eigen_profile[i]),
            CsvField::Float(report.noise_profile[i]),
            CsvField::Float(report.ref_psi[i]),
            CsvField::Float(report.ref_v[i]),
        ]);
    }
    Ok((config, aggregates, Some(csv)))
}
