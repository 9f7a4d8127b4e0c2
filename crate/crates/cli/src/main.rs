//! `receipt`: generate synthetic scenes, detect and rectify receipts, evaluate and tune.

mod commands;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Failure;

#[derive(Parser)]
#[command(name = "receipt", version, about = "Receipt corner detection, rectification and evaluation")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Log level: error, warn, info, debug or trace.
    #[arg(long, global = true, default_value = "warn")]
    log_level: log::LevelFilter,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compose annotated synthetic scenes from receipt and background images.
    Generate(commands::GenerateArgs),
    /// Write predictions JSONL from the baseline detector or from existing predictions.
    Detect(commands::DetectArgs),
    /// Warp each receipt to a bird's-eye view using known or predicted corners.
    Rectify(commands::RectifyArgs),
    /// Score predictions against ground truth at several distance thresholds.
    Evaluate(commands::EvaluateArgs),
    /// Grid-search baseline parameters on a validation dataset.
    Tune(commands::TuneArgs),
    /// Run generate, detect, rectify and evaluate on procedural assets.
    Demo(commands::DemoArgs),
}

fn run(cli: Cli) -> Result<(), Failure> {
    env_logger::Builder::new().filter_level(cli.log_level).format_timestamp(None).init();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::input("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::internal(e.to_string()))?;
    }
    match cli.command {
        Command::Generate(a) => commands::generate(a),
        Command::Detect(a) => commands::detect(a),
        Command::Rectify(a) => commands::rectify(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Tune(a) => commands::tune(a),
        Command::Demo(a) => commands::demo(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(f)) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
        Err(_) => ExitCode::from(2),
    }
}
