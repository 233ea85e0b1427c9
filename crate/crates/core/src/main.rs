use clap::{Parser, Subcommand};
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "crl", version, about = "Conformal rigidity laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a mesh and write it with its vertex masses
    Mesh(Args),
    /// Radial shooting eigenvalue on a geodesic ball
    Radial(Args),
    /// First Dirichlet eigenpair on a mesh
    Eig(Args),
    /// Brown-York mass of a conformal factor
    Mass(Args),
    /// Compactly supported deformation on a cap
    Deform(Args),
    /// Parameter sweeps (karpPinsky, complement, product)
    Sweep(Args),
    /// Run any experiment config and check its assertions
    Verify(Args),
}

#[derive(clap::Args)]
struct Args {
    /// Experiment config (JSON)
    #[arg(long)]
    config: PathBuf,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the mesh size
    #[arg(long)]
    h: Option<f64>,
    /// Override the seed
    #[arg(long)]
    seed: Option<u64>,
}

fn main() {
    let cli = Cli::parse();
    let (name, a) = match &cli.command {
        Command::Mesh(a) => ("mesh", a),
        Command::Radial(a) => ("radial", a),
        Command::Eig(a) => ("eig", a),
        Command::Mass(a) => ("mass", a),
        Command::Deform(a) => ("deform", a),
        Command::Sweep(a) => ("sweep", a),
        Command::Verify(a) => ("verify", a),
    };
    let (code, report) = crl::lab::run_command(name, &a.config, &a.out, a.h, a.seed);
    if let Some(r) = report {
        for x in &r.assertions {
            println!("{} {} {}", if x.passed { "PASS" } else { "FAIL" }, x.name, x.detail);
        }
        if let Some(e) = &r.error {
            eprintln!("error: {e}");
        }
        println!("{} -> {}", r.name, a.out.join("report.json").display());
    }
    std::process::exit(code);
}
