//! `kgs` command line front end.

use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use kgs_harness::config::{parse_list, parse_scheme, FileConfig, FlagOverrides};
use kgs_harness::report::{build_id, emit_json};
use kgs_harness::{resolve_config, run_consistency, run_convergence, run_oracle_check, RunConfig};

#[derive(Parser)]
#[command(
    name = "kgs",
    about = "Uniformly accurate exponential integrators for the Klein-Gordon-Schrodinger system",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve each (c, tau) pair and report final norms and mass.
    Run(RunArgs),
    /// Convergence study against a certified reference; CSV + SVG + JSON.
    Converge(CommonArgs),
    /// Deviation from the limit flow as c grows; slope fits and symbol checks.
    Consistency(CommonArgs),
    /// Defect gates for every closed-form integral approximation (c <= 32).
    OracleCheck(CommonArgs),
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Scheme: ua1 | ua2 | limit | splitting.
    #[arg(long)]
    scheme: Option<String>,
    /// Comma-separated list of c values, e.g. "1,10,100".
    #[arg(long)]
    c: Option<String>,
    /// Comma-separated list of time steps.
    #[arg(long)]
    tau: Option<String>,
    /// Dyadic steps T/2^j for j in "jmin:jmax"; mutually exclusive with --tau.
    #[arg(long = "tau-dyadic")]
    tau_dyadic: Option<String>,
    /// Grid points per axis.
    #[arg(long)]
    n: Option<usize>,
    /// Spatial dimension (1, 2 or 3).
    #[arg(long)]
    dim: Option<usize>,
    /// Final time.
    #[arg(long = "T")]
    t_final: Option<f64>,
    /// Sobolev regularity of the wavefunction data.
    #[arg(long = "theta-psi")]
    theta_psi: Option<f64>,
    /// Sobolev regularity of the meson data.
    #[arg(long = "theta-z")]
    theta_z: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Sobolev index of the error norm.
    #[arg(long = "norm-r")]
    norm_r: Option<f64>,
    /// Apply the 2/3-rule cutoff to pointwise products.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    dealias: Option<bool>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
    /// JSON configuration file; explicit flags win over its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run sweep jobs sequentially even when built with the parallel feature.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    sequential: Option<bool>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Also dump the final state of each job as a spectral JSON file.
    #[arg(long = "save-state")]
    save_state: bool,
    /// Start from a spectral state dump instead of seeded random data;
    /// the grid is taken from the dump.
    #[arg(long = "load-state")]
    load_state: Option<PathBuf>,
    /// Record per-step H^1 norms and mass to a CSV per job.
    #[arg(long)]
    trace: bool,
}

fn to_config(args: &CommonArgs) -> Result<RunConfig, kgs_harness::HarnessError> {
    let file = match &args.config {
        Some(path) => Some(FileConfig::from_path(path)?),
        None => None,
    };
    let flags = FlagOverrides {
        scheme: args.scheme.as_deref().map(parse_scheme).transpose()?,
        c_list: args.c.as_deref().map(parse_list).transpose()?,
        tau_list: args.tau.as_deref().map(parse_list).transpose()?,
        tau_dyadic: args.tau_dyadic.clone(),
        n: args.n,
        dim: args.dim,
        t_final: args.t_final,
        theta_psi: args.theta_psi,
        theta_z: args.theta_z,
        seed: args.seed,
        norm_r: args.norm_r,
        dealias: args.dealias,
        out_dir: args.out.clone(),
        sequential: args.sequential,
    };
    resolve_config(file, flags)
}

#[derive(Serialize)]
struct RunSummaryRow {
    scheme: String,
    c: f64,
    tau: f64,
    steps: usize,
    h1_u: f64,
    h1_psi: f64,
    mass_initial: f64,
    mass_final: f64,
    runtime_ms: f64,
    diverged: bool,
    diverged_at: Option<usize>,
}

#[derive(Serialize)]
struct RunSummary {
    config: RunConfig,
    build: String,
    rows: Vec<RunSummaryRow>,
}

fn cmd_run(args: &RunArgs) -> Result<(), Box<dyn std::error::Error>> {
    use kgs_core::{evolve, load_state, make_state, save_state, CParam, Grid, StepParams};
    let cfg = to_config(&args.common)?;
    let loaded = args.load_state.as_deref().map(load_state).transpose()?;
    let grid = match &loaded {
        Some(state) => state.grid().clone(),
        None => Grid::with_options(cfg.dim, cfg.n, 2.0 * std::f64::consts::PI, cfg.dealias)?,
    };
    let mut rows = Vec::new();
    for &c in &cfg.c_list {
        let cp = CParam::new(c)?;
        let state0 = match &loaded {
            Some(state) => state.clone(),
            None => make_state(&grid, cp, cfg.theta_psi, cfg.theta_z, cfg.seed)?,
        };
        let mass_initial = state0.psi.sobolev_norm(0.0);
        for &tau in &cfg.tau_list {
            let p = StepParams::new(cp, tau)?;
            let steps = cfg.steps_for(tau);
            let start = Instant::now();
            let outcome = if args.trace {
                match kgs_core::evolve_traced(cfg.scheme, &state0, &p, steps) {
                    Ok((end, trace)) => {
                        let mut csv = String::from("step,t,h1_u,h1_psi,mass_psi\n");
                        for row in &trace {
                            csv.push_str(&format!(
                                "{},{},{},{},{}\n",
                                row.step,
                                row.step as f64 * tau,
                                row.h1_u,
                                row.h1_psi,
                                row.mass_psi
                            ));
                        }
                        let path = PathBuf::from(&cfg.out_dir)
                            .join(format!("trace_{}_c{}_tau{}.csv", cfg.scheme.name(), c, tau));
                        kgs_harness::report::atomic_write(&path, &csv)?;
                        Ok(end)
                    }
                    Err(e) => Err(e),
                }
            } else {
                evolve(cfg.scheme, &state0, &p, steps)
            };
            let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
            let row = match outcome {
                Ok(end) => {
                    if args.save_state {
                        let path = PathBuf::from(&cfg.out_dir)
                            .join(format!("state_{}_c{}_tau{}.json", cfg.scheme.name(), c, tau));
                        std::fs::create_dir_all(&cfg.out_dir).ok();
                        save_state(&end, &path)?;
                    }
                    RunSummaryRow {
                        scheme: cfg.scheme.name().into(),
                        c,
                        tau,
                        steps,
                        h1_u: end.u.sobolev_norm(1.0),
                        h1_psi: end.psi.sobolev_norm(1.0),
                        mass_initial,
                        mass_final: end.psi.sobolev_norm(0.0),
                        runtime_ms,
                        diverged: false,
                        diverged_at: None,
                    }
                }
                Err(kgs_core::Error::BlowUp { step }) => RunSummaryRow {
                    scheme: cfg.scheme.name().into(),
                    c,
                    tau,
                    steps,
                    h1_u: f64::NAN,
                    h1_psi: f64::NAN,
                    mass_initial,
                    mass_final: f64::NAN,
                    runtime_ms,
                    diverged: true,
                    diverged_at: Some(step),
                },
                Err(other) => return Err(other.into()),
            };
            println!(
                "{} c={} tau={} steps={}: H1(u)={:.6e} H1(psi)={:.6e} mass drift={:+.3e}{}",
                row.scheme,
                row.c,
                row.tau,
                row.steps,
                row.h1_u,
                row.h1_psi,
                row.mass_final - row.mass_initial,
                if row.diverged { " [DIVERGED]" } else { "" }
            );
            rows.push(row);
        }
    }
    let summary = RunSummary { config: cfg.clone(), build: build_id(), rows };
    let path = PathBuf::from(&cfg.out_dir).join("run.json");
    emit_json(&summary, &path)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn main() {
    // die silently on closed pipes (e.g. `kgs ... | head`) like other CLIs
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    let outcome: Result<(), Box<dyn std::error::Error>> = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Converge(args) => (|| {
            let cfg = to_config(args)?;
            let report = run_convergence(&cfg)?;
            for &c in &cfg.c_list {
                match report.fit_for(cfg.scheme.name(), c) {
                    Some(fit) => println!(
                        "scheme {} c={}: slope {:.3} (intercept {:.3}, {} points)",
                        fit.scheme, fit.c, fit.slope, fit.intercept, fit.points_used
                    ),
                    None => println!(
                        "scheme {} c={c}: no slope fitted (fewer than two rows clear 1000x \
                         the reference error floor; extend the tau ladder)",
                        cfg.scheme.name()
                    ),
                }
            }
            for cert in &report.meta.certifications {
                println!(
                    "certification c={}: |ua2_ref - rk4_ref| = {:.3e} (n_fine = {})",
                    cert.c, cert.delta, cert.n_fine
                );
            }
            println!("wrote {}/convergence_{}.{{csv,svg,json}}", cfg.out_dir, cfg.scheme.name());
            Ok(())
        })(),
        Command::Consistency(args) => (|| {
            let cfg = to_config(args)?;
            let report = run_consistency(&cfg)?;
            for fit in &report.fits {
                println!(
                    "{} {}: deviation slope vs c = {:.3}",
                    fit.scheme, fit.component, fit.slope
                );
            }
            for row in &report.symbol_checks {
                println!("symbol check c={}: max ratio {:.4} (bound 0.25)", row.c, row.max_ratio);
            }
            println!("wrote {}/consistency.{{csv,json}}", cfg.out_dir);
            Ok(())
        })(),
        Command::OracleCheck(args) => (|| {
            let cfg = to_config(args)?;
            let report = run_oracle_check(&cfg)?;
            print!("{}", report.render_table());
            println!("wrote {}/oracle_check.json", cfg.out_dir);
            if !report.all_pass {
                return Err("oracle gates failed".into());
            }
            Ok(())
        })(),
    };
    if let Err(err) = outcome {
        eprintln!("error: {err}");
        std::process::exit(1);
    }
}
