use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use quasiloc_lab::config::{Experiment, ExperimentConfig, PotentialSpec};
use quasiloc_lab::suite::run_suite;
use quasiloc_lab::{run, Cache, LabError};

/// Transfer matrices, Lyapunov exponents, Green's functions and localization
/// experiments for quasi-periodic Schrödinger equations on the line.
#[derive(Parser)]
#[command(name = "quasiloc", version)]
struct Cli {
    /// Cache directory; defaults to $QUASILOC_CACHE_DIR, caching is off when
    /// neither is given.
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// M_I(θ, ω, E) as JSON
    Transfer(Common),
    /// finite-scale Lyapunov exponents over the interval schedule
    Lyapunov(Common),
    /// large-deviation measure over the interval schedule
    Ldt(Common),
    /// avalanche principle survey and multiscale estimate
    Ap(Common),
    /// Green's function, Poisson identity and decay window
    Green(Common),
    /// Dirichlet eigenfunction on a box and its decay rate
    Localize(Common),
    /// Faber surrogate of the transfer matrix: build, evaluate, certify
    Faber(Common),
    /// Diophantine condition check
    Dc(Common),
    /// orbit discrepancy against C log N
    Discrepancy(Common),
    /// orbit visits to the large-deviation set
    Orbitcount(Common),
    /// double-resonance scan (single-frequency demonstration)
    ResonanceScan(Common),
    /// acceptance criteria
    Suite {
        /// comma-separated criterion numbers; all by default
        #[arg(long, value_delimiter = ',')]
        criteria: Vec<u8>,
    },
}

#[derive(Args)]
struct Common {
    /// TOML or JSON config file
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// preset (cosine:K, zero, zero:d) or potential JSON file
    #[arg(long)]
    potential: Option<String>,
    /// a,b; repeat for a schedule
    #[arg(long = "interval", value_parser = parse_pair, allow_hyphen_values = true)]
    intervals: Vec<[f64; 2]>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    theta: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    omega: Option<Vec<f64>>,
    #[arg(long, allow_hyphen_values = true)]
    energy: Option<f64>,
    /// E′,E″
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    energy_window: Option<[f64; 2]>,
    #[arg(long)]
    rel_tol: Option<f64>,
    #[arg(long)]
    grid_points: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// output directory
    #[arg(long, short)]
    out: Option<PathBuf>,
}

fn parse_pair(s: &str) -> Result<[f64; 2], String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(format!("expected a,b but got `{s}`"));
    }
    let p = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("`{x}`: {e}"));
    Ok([p(parts[0])?, p(parts[1])?])
}

fn build_config(exp: Experiment, c: Common) -> Result<ExperimentConfig, LabError> {
    let mut cfg = match &c.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(named) = cfg.experiment {
        if named != exp {
            return Err(LabError::Usage(format!("config names experiment `{}`, not `{}`", named.name(), exp.name())));
        }
    }
    cfg.experiment = Some(exp);
    if let Some(p) = c.potential {
        let path = PathBuf::from(&p);
        cfg.potential = if path.is_file() { PotentialSpec::File { file: path } } else { PotentialSpec::Preset(p) };
        let d = cfg.potential.resolve()?.dim();
        // keep default phases usable when only the potential changes
        if cfg.theta.len() != d {
            cfg.theta = vec![0.0; d];
        }
        if cfg.eta.len() != d {
            cfg.eta = vec![0.0; d];
        }
    }
    if !c.intervals.is_empty() {
        cfg.intervals = c.intervals;
    }
    if let Some(v) = c.theta {
        cfg.theta = v;
    }
    if let Some(v) = c.omega {
        cfg.omega = v;
    }
    if let Some(v) = c.energy {
        cfg.energy = v;
    }
    if let Some(v) = c.energy_window {
        cfg.energy_window = v;
    }
    if let Some(v) = c.rel_tol {
        cfg.tolerances.rel_tol = v;
    }
    if let Some(v) = c.grid_points {
        cfg.grid_points = v;
    }
    if let Some(v) = c.seed {
        cfg.seed = v;
    }
    if let Some(v) = c.out {
        cfg.output_dir = v;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let cache = cli.cache_dir.map(Cache::new).or_else(Cache::from_env);
    let (exp, common) = match cli.command {
        Command::Suite { criteria } => {
            let ids = if criteria.is_empty() { (1..=8).collect() } else { criteria };
            if let Some(bad) = ids.iter().find(|&&i| !(1..=8).contains(&i)) {
                eprintln!("error: no criterion {bad}; criteria are numbered 1 to 8");
                return ExitCode::from(2);
            }
            let reports = run_suite(&ids);
            for r in &reports {
                println!("{}", r.line());
            }
            return ExitCode::from(if reports.iter().all(|r| r.passed) { 0 } else { 1 });
        }
        Command::Transfer(c) => (Experiment::Transfer, c),
        Command::Lyapunov(c) => (Experiment::Lyapunov, c),
        Command::Ldt(c) => (Experiment::Ldt, c),
        Command::Ap(c) => (Experiment::Ap, c),
        Command::Green(c) => (Experiment::Green, c),
        Command::Localize(c) => (Experiment::Localize, c),
        Command::Faber(c) => (Experiment::Faber, c),
        Command::Dc(c) => (Experiment::Dc, c),
        Command::Discrepancy(c) => (Experiment::Discrepancy, c),
        Command::Orbitcount(c) => (Experiment::Orbitcount, c),
        Command::ResonanceScan(c) => (Experiment::ResonanceScan, c),
    };
    let result = build_config(exp, common).and_then(|cfg| run(&cfg, cache.as_ref()));
    match result {
        Ok(record) => {
            println!("{}", record.to_json());
            ExitCode::from(if record.passed { 0 } else { 1 })
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
