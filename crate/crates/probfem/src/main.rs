//! Command-line front end: runs experiments from JSON configs, compares
//! result bundles, and exports meshes.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use probfem::experiments::{
    compare_posteriors, load_bundle, run_experiment, Bundle, ExperimentConfig,
};
use probfem::geometry::{triangulate_beam, BeamGeometry, HoleParams};
use probfem::mesh::io::save_text;
use probfem::mesh::generate_interval_mesh;
use probfem::Result;

#[derive(Parser)]
#[command(name = "probfem", version, about = "Probabilistic finite elements for Bayesian inverse problems", long_about = None)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a JSON config and write a result bundle.
    Run {
        /// Path to the experiment config (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Use the full-scale setup of the three-point problem
        /// (h = 0.05 m, N_burn = N = 10\u{2074}, data mesh h = 0.005 m).
        #[arg(long)]
        paper_scale: bool,
        /// Override the chain seed (the data seed is unaffected).
        #[arg(long)]
        seed: Option<u64>,
        /// Output bundle directory (defaults to runs/<problem>_<method>_h<h>).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare two or more result bundles computed on identical data.
    Compare {
        /// Bundle directories written by `probfem run`.
        #[arg(required = true, num_args = 2..)]
        bundles: Vec<PathBuf>,
    },
    /// Triangulate a problem domain and write the mesh as plain text.
    Mesh {
        /// Problem whose domain to mesh.
        #[arg(long, value_enum)]
        problem: ProblemArg,
        /// Target element size.
        #[arg(long)]
        h: f64,
        /// Output path for the text mesh.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
#[value(rename_all = "snake_case")]
enum ProblemArg {
    Pullout,
    ThreePoint,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Run {
            config,
            paper_scale,
            seed,
            out,
        } => run(&config, paper_scale, seed, out),
        Command::Compare { bundles } => compare(&bundles),
        Command::Mesh { problem, h, out } => mesh(problem, h, &out),
    }
}

fn run(config: &PathBuf, paper_scale: bool, seed: Option<u64>, out: Option<PathBuf>) -> Result<()> {
    let text = std::fs::read_to_string(config)?;
    let exp = ExperimentConfig::from_json(&text)?.resolve(paper_scale, seed, out)?;
    println!(
        "running {} / {} at h = {} ({} burn-in + {} retained steps, seed {})",
        exp.problem, exp.method, exp.h, exp.chain.n_burn, exp.chain.n, exp.chain.seed
    );
    let (chain, dir) = run_experiment(&exp)?;
    println!("bundle written to {}", dir.display());
    println!(
        "acceptance rate {:.3}, final proposal scale {:.4}",
        chain.acceptance_rate(),
        chain.final_scale
    );
    println!("posterior means (with 95% credible intervals):");
    let means = chain.mean();
    let lo = chain.quantile(0.025);
    let hi = chain.quantile(0.975);
    for (j, name) in chain.names.iter().enumerate() {
        println!("  {name:>8}: {:.6} in [{:.6}, {:.6}]", means[j], lo[j], hi[j]);
    }
    Ok(())
}

fn compare(dirs: &[PathBuf]) -> Result<()> {
    let bundles: Vec<Bundle> = dirs
        .iter()
        .map(|d| load_bundle(d))
        .collect::<Result<_>>()?;
    let report = compare_posteriors(&bundles)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn mesh(problem: ProblemArg, h: f64, out: &PathBuf) -> Result<()> {
    let mesh = match problem {
        ProblemArg::Pullout => {
            let n = (1.0 / h).round();
            if !(h > 0.0) || n < 1.0 || (1.0 / h - n).abs() > 1e-9 {
                return Err(probfem::Error::Config(format!(
                    "pullout mesh size must divide the unit bar, got h = {h}"
                )));
            }
            generate_interval_mesh(1.0, n as usize)?
        }
        ProblemArg::ThreePoint => triangulate_beam(
            &BeamGeometry::default(),
            &HoleParams::ground_truth(),
            h,
        )?,
    };
    save_text(&mesh, out)?;
    println!(
        "wrote {} ({} nodes, {} elements)",
        out.display(),
        mesh.n_nodes(),
        mesh.n_elements()
    );
    Ok(())
}
