mod commands;
mod output;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "qanneal", version, about = "Analog quantum protocol simulation and optimization", arg_required_else_help = true)]
struct Cli {
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true, env = "QANNEAL_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw a random instance with couplings uniform on [-1, 1).
    GenInstance(commands::GenInstance),
    /// Print an instance as JSON.
    ShowInstance(commands::ShowInstance),
    /// Sector spectrum and matrix elements along u.
    Spectrum(commands::Spectrum),
    /// Evolve |+> under a schedule and record a trace.
    Evolve(commands::Evolve),
    /// Optimize QAOA angles, optionally bootstrapped over a depth range.
    Qaoa(commands::Qaoa),
    /// Gradient-descent optimal control on a uniform grid.
    Optimal(commands::Optimal),
    /// Two-level leakage scan over ramp rates.
    NearAdiabatic(commands::NearAdiabatic),
    /// Product-formula error bounds over slice counts or around Δt = τ.
    Trotter(commands::Trotter),
    /// Optimize the bang-anneal-bang ansatz on a QAOA curve.
    Bab(commands::Bab),
    /// Full protocol comparison: linear, basic, sine, QAOA, BAB, GD and ground.
    Table1(commands::Table1),
    /// Regenerate reference values from the dense oracles.
    #[command(hide = true)]
    Xcheck(commands::Xcheck),
}

/// Arguments shared by commands that read a problem instance.
#[derive(Args, Debug, Clone)]
pub struct InstanceArg {
    /// Instance JSON path or `builtin:appendix-d`.
    #[arg(long, default_value = "builtin:appendix-d")]
    pub instance: String,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(1);
        }
    }
    let argv: Vec<String> = std::env::args().collect();
    let outcome = match cli.command {
        Command::GenInstance(a) => commands::gen_instance(a, argv),
        Command::ShowInstance(a) => commands::show_instance(a, argv),
        Command::Spectrum(a) => commands::spectrum(a, argv),
        Command::Evolve(a) => commands::evolve(a, argv),
        Command::Qaoa(a) => commands::qaoa(a, argv),
        Command::Optimal(a) => commands::optimal(a, argv),
        Command::NearAdiabatic(a) => commands::near_adiabatic(a, argv),
        Command::Trotter(a) => commands::trotter(a, argv),
        Command::Bab(a) => commands::bab(a, argv),
        Command::Table1(a) => commands::table1(a, argv),
        Command::Xcheck(a) => commands::xcheck(a, argv),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("warning: at least one stage did not converge; output was written");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
