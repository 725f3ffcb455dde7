//! Command-line front end: one subcommand per experiment, a JSON config
//! loader and per-field overrides. Outputs land in `--out` as
//! `<experiment>.csv` and `<experiment>.summary.json`; the exit status
//! reflects the verdicts.

use clap::{Args, Parser, Subcommand};
use gmc_lab::config::{ExperimentConfig, ExperimentKind};
use gmc_lab::experiments;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "gmc-lab",
    about = "Monte Carlo laboratory for Gaussian multiplicative chaos on Wiener space",
    version
)]
struct Cli {
    /// JSON config file; CLI flags override its fields
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// master seed
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// worker threads (0 = default pool)
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// output directory
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Overrides {
    /// spatial dimension
    #[arg(long)]
    d: Option<usize>,
    /// inverse temperature
    #[arg(long)]
    gamma: Option<f64>,
    /// comma-separated coupling sweep
    #[arg(long, value_delimiter = ',')]
    gamma_list: Option<Vec<f64>>,
    /// horizon T
    #[arg(long)]
    t: Option<f64>,
    /// comma-separated horizon sweep
    #[arg(long, value_delimiter = ',')]
    t_list: Option<Vec<f64>>,
    /// time step
    #[arg(long)]
    dt: Option<f64>,
    /// noise cell size
    #[arg(long)]
    dx: Option<f64>,
    /// tube radius
    #[arg(long)]
    r: Option<f64>,
    /// overlap threshold
    #[arg(long)]
    delta: Option<f64>,
    /// cover slack / misc epsilon
    #[arg(long)]
    eps: Option<f64>,
    /// comma-separated mollification scales (she)
    #[arg(long, value_delimiter = ',')]
    eps_list: Option<Vec<f64>>,
    /// flow horizon (ou-check)
    #[arg(long)]
    t_flow: Option<f64>,
    /// flow integral steps (ou-check)
    #[arg(long)]
    flow_steps: Option<usize>,
    /// Chebyshev epsilon (ou-check); 0 picks the bound-0.2 value
    #[arg(long)]
    cheb_eps: Option<f64>,
    /// paths per ensemble / samples
    #[arg(long)]
    n: Option<usize>,
    /// noise realizations
    #[arg(long)]
    k: Option<usize>,
    /// pair-sampling budget for overlaps
    #[arg(long)]
    n_pairs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Wiener tube survival decay vs the Dirichlet eigenvalue
    TubeDecay(Overrides),
    /// GMC tube volume decay vs the Theta bound
    GmcDecay(Overrides),
    /// free energy over a coupling sweep
    FreeEnergy(Overrides),
    /// GMC thickness E[H_T/T] vs gamma V0
    Thickness(Overrides),
    /// OU generator mean-zero, Poincare and Chebyshev checks along the flow
    OuCheck(Overrides),
    /// replica overlap and greedy localization cover
    Localize(Overrides),
    /// Feynman-Kac SHE solution and the scaling identity
    She(Overrides),
    /// decay-rate report Theta = lambda1(sqrt2 r)/4 - gamma^2 V0/2
    Rate(Overrides),
    /// Dirichlet eigenvalue of -1/2 Laplacian on a ball
    Eigen(Overrides),
    /// dump the kernel self-convolution table as CSV
    KernelTable {
        #[arg(long, default_value_t = 1)]
        d: usize,
        #[arg(long, default_value_t = 1.0 / 64.0)]
        kernel_h: f64,
    },
}

fn apply(mut config: ExperimentConfig, o: &Overrides) -> ExperimentConfig {
    if let Some(v) = o.d {
        config.d = v;
    }
    if let Some(v) = o.gamma {
        config.gamma = v;
    }
    if let Some(v) = &o.gamma_list {
        config.gamma_list = v.clone();
    }
    if let Some(v) = o.t {
        config.t = v;
    }
    if let Some(v) = &o.t_list {
        config.t_list = v.clone();
    }
    if let Some(v) = o.dt {
        config.dt = v;
    }
    if let Some(v) = o.dx {
        config.dx = v;
    }
    if let Some(v) = o.r {
        config.r = v;
    }
    if let Some(v) = o.delta {
        config.delta = v;
    }
    if let Some(v) = o.eps {
        config.eps = v;
    }
    if let Some(v) = &o.eps_list {
        config.eps_list = v.clone();
    }
    if let Some(v) = o.t_flow {
        config.t_flow = v;
    }
    if let Some(v) = o.flow_steps {
        config.flow_steps = v;
    }
    if let Some(v) = o.cheb_eps {
        config.cheb_eps = v;
    }
    if let Some(v) = o.n {
        config.n = v;
    }
    if let Some(v) = o.k {
        config.k = v;
    }
    if let Some(v) = o.n_pairs {
        config.n_pairs = v;
    }
    config
}

fn run() -> gmc_lab::Result<bool> {
    let cli = Cli::parse();

    let (kind, overrides) = match &cli.command {
        Command::TubeDecay(o) => (ExperimentKind::TubeDecay, o.clone()),
        Command::GmcDecay(o) => (ExperimentKind::GmcDecay, o.clone()),
        Command::FreeEnergy(o) => (ExperimentKind::FreeEnergy, o.clone()),
        Command::Thickness(o) => (ExperimentKind::Thickness, o.clone()),
        Command::OuCheck(o) => (ExperimentKind::OuCheck, o.clone()),
        Command::Localize(o) => (ExperimentKind::Localize, o.clone()),
        Command::She(o) => (ExperimentKind::She, o.clone()),
        Command::Rate(o) => (ExperimentKind::Rate, o.clone()),
        Command::Eigen(o) => (ExperimentKind::Eigen, o.clone()),
        Command::KernelTable { d, kernel_h } => {
            std::fs::create_dir_all(&cli.out)?;
            let path = cli.out.join("kernel-table.csv");
            experiments::write_kernel_table(*d, *kernel_h, &path)?;
            println!("wrote {}", path.display());
            return Ok(true);
        }
    };

    let mut config = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            let c = ExperimentConfig::from_json(&text)?;
            if c.experiment != kind {
                return Err(gmc_lab::Error::invalid(format!(
                    "config file is for `{}` but the `{}` subcommand was invoked",
                    c.experiment.name(),
                    kind.name()
                )));
            }
            c
        }
        None => ExperimentConfig::default_for(kind),
    };
    config = apply(config, &overrides);
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(workers) = cli.workers {
        config.workers = workers;
    }

    let artifacts = experiments::run_experiment(&config, &cli.out)?;
    println!("wrote {}", artifacts.csv_path.display());
    println!("wrote {}", artifacts.summary_path.display());
    for v in &artifacts.verdicts {
        println!(
            "[{}] {}: {}",
            if v.pass { "PASS" } else { "FAIL" },
            v.name,
            v.detail
        );
    }
    Ok(artifacts.pass)
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
