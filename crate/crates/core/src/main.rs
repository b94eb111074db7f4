use std::path::PathBuf;

use clap::Parser;
use manifold_extend::cli::{run, Command};

/// Extension operators for sphere-valued fields on perforated domains.
#[derive(Parser, Debug)]
#[command(name = "manifold-extend", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// Flat `key = value` configuration file (optional for `selftest`).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory receiving reports and fields.
    #[arg(long)]
    out: PathBuf,
    /// Global seed, 42 when omitted.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    let status = run(args.command, args.config.as_deref(), &args.out, args.seed);
    std::process::exit(status as i32);
}
