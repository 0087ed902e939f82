use clap::Parser;

use blendkit_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Err(e) = run(&cli) {
        eprintln!("error [{}]: {e}", e.kind());
        if let blendkit_core::service::ServiceError::FixtureMiss { missing_cache_keys, .. } =
            match &e {
                blendkit_cli::CliError::Service(s) => s,
                _ => std::process::exit(e.exit_code()),
            }
        {
            for key in missing_cache_keys {
                eprintln!("  missing: {key}");
            }
        }
        std::process::exit(e.exit_code());
    }
}
