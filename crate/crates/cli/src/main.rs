mod commands;
mod options;
mod sweep;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use options::{BlendArgs, EvalArgs, ExtractArgs, FitArgs, FixturesArgs, GridArgs, SampleArgs, SweepArgs};

/// Reconstruct surfaces from point clouds with neural signed distance
/// fields.
#[derive(Parser)]
#[command(name = "vinr", version, about)]
struct Cli {
    /// Increase log output (-v epochs and progress, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample surface points from a mesh or a built-in shape.
    Sample(SampleArgs),
    /// Fit a network to one point cloud, or several nested ones.
    Fit(FitArgs),
    /// Evaluate one model channel on a lattice and save the grid.
    Grid(GridArgs),
    /// Evaluate several models on one lattice and blend them.
    Blend(BlendArgs),
    /// Extract the zero level set of a model or grid as an OBJ mesh.
    Extract(ExtractArgs),
    /// Score a model against a reference shape.
    Eval(EvalArgs),
    /// Repeated sample, fit and eval runs over several cloud sizes.
    Sweep(SweepArgs),
    /// Write the built-in shapes as point clouds and meshes.
    Fixtures(FixturesArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .format_timestamp(None)
        .init();

    let result = match cli.command {
        Command::Sample(a) => commands::sample(a),
        Command::Fit(a) => commands::fit(a),
        Command::Grid(a) => commands::grid(a),
        Command::Blend(a) => commands::blend(a),
        Command::Extract(a) => commands::extract(a),
        Command::Eval(a) => commands::eval(a),
        Command::Sweep(a) => sweep::run(a),
        Command::Fixtures(a) => commands::fixtures(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
