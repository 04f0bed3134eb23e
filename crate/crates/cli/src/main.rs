mod artifacts;
mod commands;
mod failure;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use failure::Failure;

/// Lattice compression surrogate: geometry, FEM oracle, datasets, training
/// and rollout.
#[derive(Debug, Parser)]
#[command(name = "lgn", version)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Pipeline configuration (JSON); built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Print the resolved configuration and exit.
    #[arg(long, global = true)]
    pub print_config: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the lattice, its tet mesh and the reduced graphs.
    GenLattice,
    /// Run the FEM oracle on the generated mesh.
    Simulate {
        /// Mesh to simulate (defaults to `<out>/mesh.vtk`).
        #[arg(long)]
        mesh: Option<PathBuf>,
    },
    /// Turn one or more simulated runs into training shards.
    BuildDataset {
        /// Output directories of earlier gen-lattice + simulate runs
        /// (defaults to `<out>`).
        #[arg(long = "run")]
        runs: Vec<PathBuf>,
    },
    /// Train the reduced-graph predictor (displacement then stress phase).
    TrainLgn1 {
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Train the up-mapping network.
    TrainLgn2 {
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Roll both networks forward on every reduced graph of the specimen.
    Rollout {
        #[arg(long)]
        lgn1: Option<PathBuf>,
        #[arg(long)]
        lgn2: Option<PathBuf>,
    },
    /// Homogenized force-displacement curves of stored trajectories.
    Homogenize {
        /// Trajectory directories (defaults to every rollout).
        #[arg(long = "trajectory")]
        trajectories: Vec<PathBuf>,
    },
    /// Error statistics and force curves of rollouts against the oracle.
    Report {
        /// Predicted trajectories (defaults to every rollout).
        #[arg(long = "prediction")]
        predictions: Vec<PathBuf>,
        /// Oracle trajectory (defaults to `<out>/trajectory`).
        #[arg(long)]
        truth: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), Failure> {
    let ctx = commands::Context::load(&cli.global)?;
    if cli.global.print_config {
        println!("{}", ctx.config.to_json());
        return Ok(());
    }
    let Some(command) = cli.command else {
        return Err(Failure::usage("no command given; see `lgn --help`"));
    };
    match command {
        Command::GenLattice => commands::gen_lattice(&ctx),
        Command::Simulate { mesh } => commands::simulate(&ctx, mesh),
        Command::BuildDataset { runs } => commands::build_dataset(&ctx, runs),
        Command::TrainLgn1 { dataset } => commands::train_lgn1(&ctx, dataset),
        Command::TrainLgn2 { dataset } => commands::train_lgn2(&ctx, dataset),
        Command::Rollout { lgn1, lgn2 } => commands::rollout(&ctx, lgn1, lgn2),
        Command::Homogenize { trajectories } => commands::homogenize(&ctx, trajectories),
        Command::Report { predictions, truth } => commands::report(&ctx, predictions, truth),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.to_json());
            ExitCode::from(f.code)
        }
    }
}
