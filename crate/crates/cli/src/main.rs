mod args;
mod commands;
mod config;
mod error;
mod manifest;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};
use commands::Context;
use error::{CliError, EXIT_USAGE};

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
}

fn init_threads(threads: Option<usize>) -> Result<(), CliError> {
    let n = threads.unwrap_or(0);
    if threads.is_some() {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("--threads: {e}")))?;
    }
    lrg_core::linalg::set_parallelism(n);
    Ok(())
}

fn run(argv: Vec<String>) -> Result<(), CliError> {
    let args = config::apply(argv.clone()).map_err(|e| CliError::Usage(e.to_string()))?;
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return Ok(());
        }
        Err(e) => {
            let _ = e.print();
            std::process::exit(EXIT_USAGE);
        }
    };
    init_logging(cli.verbose);
    init_threads(cli.threads)?;
    let ctx = Context {
        argv,
        seed: cli.seed,
    };
    log::debug!("running {}", cli.command.name());
    match &cli.command {
        Command::GenerateSbm(a) => commands::generate_sbm_cmd(&ctx, a),
        Command::Analyze(a) => commands::analyze_cmd(&ctx, a),
        Command::Renormalize(a) => commands::renormalize_cmd(&ctx, a),
        Command::Train(a) => commands::train_cmd(&ctx, a),
        Command::Compare(a) => commands::compare_cmd(&ctx, a),
        Command::RandomControl(a) => commands::random_control_cmd(&ctx, a),
    }
}

fn main() {
    if let Err(e) = run(std::env::args().collect()) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
