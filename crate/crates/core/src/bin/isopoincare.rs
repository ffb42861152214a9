use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use isopoincare::experiment::{self, CellSummary, CellStatus, ExperimentConfig, RunSummary, WEIGHT_TOL};
use isopoincare::fpsolver::{DtPolicy, GridSpec, Perturbation, PerturbationKind, Scenario};
use isopoincare::inequality::suite::run_matrix;
use isopoincare::IsotropicDensity;

#[derive(Parser)]
#[command(name = "isopoincare", version, about = "Weighted Poincare checks and Fokker-Planck relaxation")]
struct Cli {
    /// TOML experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Corpus seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form against quadrature diffusion weights.
    Weights {
        #[arg(long = "density")]
        densities: Vec<String>,
        #[arg(long, default_value_t = 50)]
        points: usize,
    },
    /// Poincare checks over the test corpus.
    Check {
        #[arg(long = "theorem")]
        theorems: Vec<String>,
        #[arg(long = "density")]
        densities: Vec<String>,
        /// Skip the non-catalog targets.
        #[arg(long)]
        no_extras: bool,
    },
    /// Relax a perturbed equilibrium and fit decay rates.
    Evolve {
        #[arg(long)]
        density: String,
        #[arg(long, default_value = "tanh")]
        perturbation: String,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        #[arg(long, default_value_t = 400)]
        cells: usize,
        #[arg(long)]
        t_final: Option<f64>,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long, default_value_t = 10)]
        sample_every: usize,
    },
    /// Full configured run with persisted artifacts.
    Run,
    /// Print the summary of a finished run.
    Report {
        /// Run directory; defaults to --out or the config's output_dir.
        dir: Option<PathBuf>,
    },
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("reading {}", p.display()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.corpus_seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.output_dir = o.clone();
    }
    Ok(cfg)
}

fn exit(pass: bool) -> ExitCode {
    if pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn weights(cli: &Cli, cfg: &ExperimentConfig, specs: &[String], points: usize) -> Result<bool> {
    let specs = if specs.is_empty() { &cfg.densities } else { specs };
    let mut pass = true;
    for spec in specs {
        let d = IsotropicDensity::from_spec(spec)?;
        if experiment::closed_weight(&d).is_none() {
            println!("{}: no closed form, skipped", d.label());
            continue;
        }
        let rows = experiment::weight_table(&d, points)?;
        let max = rows.iter().map(|r| r.rel_err).fold(0.0, f64::max);
        pass &= max <= WEIGHT_TOL;
        match &cli.out {
            Some(dir) => {
                std::fs::create_dir_all(dir)?;
                let path = dir.join(format!("{}.csv", experiment::slug(&d.label())));
                experiment::write_weight_csv(&rows, &path)?;
                println!("{}: max rel. error {max:.2e} -> {}", d.label(), path.display());
            }
            None => {
                println!("# {}", d.label());
                println!("rho,K_closed,K_quadrature,rel_err");
                for r in rows {
                    println!("{},{},{},{}", r.rho, r.k_closed, r.k_quadrature, r.rel_err);
                }
            }
        }
    }
    Ok(pass)
}

fn check(cli: &Cli, cfg: &ExperimentConfig, theorems: &[String], densities: &[String], no_extras: bool) -> Result<bool> {
    let mut cfg = cfg.clone();
    if !theorems.is_empty() {
        cfg.theorems = theorems.to_vec();
    }
    if !densities.is_empty() {
        cfg.densities = densities.to_vec();
    }
    let cells = run_matrix(
        &cfg.parsed_theorems()?,
        &cfg.parsed_densities()?,
        cfg.corpus_seed,
        &cfg.check_config(),
        cfg.hybrid_c,
        cfg.extras && !no_extras,
    );
    let mut pass = true;
    for c in &cells {
        let s = CellSummary::from_cell(c);
        pass &= matches!(s.status, CellStatus::Pass | CellStatus::Skipped);
        let detail = match s.status {
            CellStatus::Pass => format!("pass, max ratio {:.6} over {} functions", s.max_ratio, s.reports),
            CellStatus::Fail => format!("FAIL, max ratio {:.6}: {}", s.max_ratio, s.failing.join(", ")),
            CellStatus::Skipped => format!("skipped: {}", s.reason.unwrap_or_default()),
            CellStatus::Error => format!("ERROR: {}", s.reason.unwrap_or_default()),
        };
        println!("{:<22} {:<40} {detail}", s.theorem.key(), s.target);
    }
    if let Some(dir) = &cli.out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("checks.json"), serde_json::to_string_pretty(&cells)? + "\n")?;
        std::fs::write(dir.join("checks.csv"), experiment::checks_csv(&cells)?)?;
    }
    Ok(pass)
}

#[allow(clippy::too_many_arguments)]
fn evolve(
    cli: &Cli,
    density: &str,
    perturbation: &str,
    eps: f64,
    cells: usize,
    t_final: Option<f64>,
    dt: f64,
    sample_every: usize,
) -> Result<bool> {
    let scenario = Scenario {
        density: IsotropicDensity::from_spec(density)?,
        perturbation: Perturbation::new(PerturbationKind::from_key(perturbation)?, eps)?,
        grid: GridSpec::new(cells),
        t_final,
        policy: DtPolicy::new(dt, sample_every)?,
    };
    let r = scenario.run()?;
    let summary = serde_json::to_string_pretty(&r)?;
    match &cli.out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let stem = experiment::slug(&scenario.label());
            r.trace.write_csv(&dir.join(format!("{stem}.csv")))?;
            std::fs::write(dir.join(format!("{stem}.json")), summary + "\n")?;
            println!(
                "{}: chi2 rate {} (bound {:.4}), {} -> {}",
                r.density,
                r.fitted_rate.map_or("-".into(), |v| format!("{v:.5}")),
                r.rate_bound,
                if r.pass { "pass" } else { "FAIL" },
                dir.display()
            );
        }
        None => println!("{summary}"),
    }
    Ok(r.pass)
}

fn report(dir: &Path) -> Result<bool> {
    let s = RunSummary::load(dir).with_context(|| format!("reading summary in {}", dir.display()))?;
    print!("{}", s.to_markdown());
    Ok(s.all_pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = load_config(&cli).and_then(|cfg| match &cli.command {
        Command::Weights { densities, points } => weights(&cli, &cfg, densities, *points),
        Command::Check {
            theorems,
            densities,
            no_extras,
        } => check(&cli, &cfg, theorems, densities, *no_extras),
        Command::Evolve {
            density,
            perturbation,
            eps,
            cells,
            t_final,
            dt,
            sample_every,
        } => evolve(&cli, density, perturbation, *eps, *cells, *t_final, *dt, *sample_every),
        Command::Run => {
            let s = experiment::run(&cfg)?;
            print!("{}", s.to_markdown());
            eprintln!("artifacts in {}", cfg.output_dir.display());
            Ok(s.all_pass)
        }
        Command::Report { dir } => report(dir.as_deref().unwrap_or(&cfg.output_dir)),
    });
    match result {
        Ok(pass) => exit(pass),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
