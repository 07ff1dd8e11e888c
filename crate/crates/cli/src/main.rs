use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dcg_cli::experiment::run_experiment;
use dcg_cli::{CliError, ExperimentConfig, Settings};
use dcg_core::apps::normal::{assemble_normal_rows, random_local_system};
use dcg_core::linalg::{eigen_extremes_spd, POWER_TOL};
use dcg_core::network::generate_geometric_network;
use dcg_core::system::{rows_to_dense, RowSlice};
use dcg_core::Network;

#[derive(Parser)]
#[command(name = "dcg", version, about = "Distributed conjugate gradient experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment; exits non-zero unless every solver converged.
    Run(Box<RunArgs>),
    /// Generate a random geometric network and write it as JSON.
    GenNetwork {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long)]
        range: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print size, hop diameter, connectivity and eigenvalue extremes of a
    /// network's shifted Laplacian and of a random least-squares system on it.
    Inspect {
        #[arg(long)]
        network: PathBuf,
        /// Seed of the random least-squares system.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Flat `key = value` config file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    anchors: Option<usize>,
    #[arg(long = "range")]
    reception_range: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma list of dcg, richardson, jacobi, gauss_seidel.
    #[arg(long)]
    solvers: Option<String>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    t_max: Option<usize>,
    /// strict or cached.
    #[arg(long)]
    dcg_mode: Option<String>,
    /// identity or shifted_laplacian, for raw_system.
    #[arg(long)]
    matrix: Option<String>,
    #[arg(long)]
    noise_matrix_scale: Option<f64>,
    #[arg(long)]
    noise_rhs_scale: Option<f64>,
    #[arg(long)]
    noise_seed: Option<u64>,
    #[arg(long)]
    noise_distribution: Option<String>,
    #[arg(long = "out")]
    output_dir: Option<PathBuf>,
}

impl RunArgs {
    fn settings(&self) -> Result<Settings, CliError> {
        let mut s = match &self.config {
            Some(path) => Settings::read(path)?,
            None => Settings::default(),
        };
        let flags: [(&str, Option<String>); 16] = [
            ("scenario", self.scenario.clone()),
            ("n", self.n.map(|v| v.to_string())),
            ("dim", self.dim.map(|v| v.to_string())),
            ("anchors", self.anchors.map(|v| v.to_string())),
            ("reception_range", self.reception_range.map(|v| v.to_string())),
            ("seed", self.seed.map(|v| v.to_string())),
            ("solvers", self.solvers.clone()),
            ("epsilon", self.epsilon.map(|v| v.to_string())),
            ("t_max", self.t_max.map(|v| v.to_string())),
            ("dcg_mode", self.dcg_mode.clone()),
            ("matrix", self.matrix.clone()),
            ("noise_matrix_scale", self.noise_matrix_scale.map(|v| v.to_string())),
            ("noise_rhs_scale", self.noise_rhs_scale.map(|v| v.to_string())),
            ("noise_seed", self.noise_seed.map(|v| v.to_string())),
            ("noise_distribution", self.noise_distribution.clone()),
            ("output_dir", self.output_dir.as_ref().map(|p| p.display().to_string())),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                s.set(key, v);
            }
        }
        Ok(s)
    }
}

fn run(args: RunArgs) -> Result<bool, CliError> {
    let cfg = ExperimentConfig::from_settings(&args.settings()?)?;
    let out = run_experiment(&cfg)?;
    let report = &out.report;
    println!(
        "{} agents, hop diameter {}, round bound {}, seed {} ({} attempt{})",
        report.agents,
        report.hop_diameter,
        report.round_bound,
        report.seed_used,
        report.attempts,
        if report.attempts == 1 { "" } else { "s" }
    );
    for s in &report.solvers {
        let mse = s.final_mse.map_or("-".to_string(), |v| format!("{v:.3e}"));
        let speedup = s.speedup_vs_baseline.map_or("-".to_string(), |v| format!("{v:.1}x"));
        match &s.failure {
            None => println!(
                "{:<13} rounds {:>9}  iterations {:>9}  mse {mse}  speedup {speedup}",
                s.solver.name(),
                s.rounds_to_converge,
                s.outer_iterations
            ),
            Some(f) => println!("{:<13} FAILED: {f}", s.solver.name()),
        }
        if s.within_round_bound == Some(false) {
            eprintln!("warning: {} used more than {} rounds", s.solver.name(), report.round_bound);
        }
    }
    for f in &out.files {
        println!("wrote {}", f.display());
    }
    Ok(report.all_converged())
}

fn describe_extremes(label: &str, rows: &[RowSlice]) -> Result<(), CliError> {
    let (a, _) = rows_to_dense(rows)?;
    match eigen_extremes_spd(&a, POWER_TOL) {
        Ok(e) => println!(
            "{label}: lambda_min {:.6e}, lambda_max {:.6e}, condition {:.3e}",
            e.lambda_min,
            e.lambda_max,
            e.condition_number()
        ),
        Err(e) => println!("{label}: eigenvalues unavailable ({e})"),
    }
    Ok(())
}

fn inspect(path: PathBuf, seed: u64) -> Result<(), CliError> {
    let net = Network::read_json(&path)?;
    println!("n: {}", net.n());
    println!("dim: {}", net.dim());
    println!("edges: {}", net.edge_count());
    println!("connected: {}", net.is_connected());
    match net.hop_diameter() {
        Ok(h) => println!("hop diameter: {}", h.hops()),
        Err(_) => println!("hop diameter: undefined"),
    }
    if net.n() == 0 {
        return Ok(());
    }
    describe_extremes(
        "shifted laplacian",
        &dcg_cli::experiment::shifted_laplacian_rows(&net, seed)?,
    )?;
    let raw = random_local_system(&net, 1, seed)?;
    describe_extremes("normal equations", &assemble_normal_rows(&raw, &net)?)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(*args),
        Command::GenNetwork {
            n,
            dim,
            range,
            seed,
            out,
        } => generate_geometric_network(n, dim, range, seed)
            .and_then(|net| {
                net.write_json(&out)?;
                println!(
                    "wrote {} ({} agents, {} edges, connected: {})",
                    out.display(),
                    net.n(),
                    net.edge_count(),
                    net.is_connected()
                );
                Ok(true)
            })
            .map_err(CliError::from),
        Command::Inspect { network, seed } => inspect(network, seed).map(|()| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
