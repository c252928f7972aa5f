use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use lamplight_cli::{cmd_checkmap, cmd_folner, cmd_obstruction, cmd_upaudit, CliError, ExperimentConfig};
use lamplight_core::boundary::CloneBall;
use lamplight_core::qmaps::{format_map, random_global_map, random_mixed_map};
use lamplight_core::rng::Stream;

/// Diestel-Leader box experiments: Folner tables, lifted boundary maps,
/// and the homological bijection obstruction.
#[derive(Parser)]
#[command(name = "lamplight", version)]
struct Cli {
    /// Config file with `key = value` lines; flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Branching parameter of the trees.
    #[arg(short = 'n', long, global = true)]
    n: Option<u32>,

    /// Comparison multiple (obstruction) or fiber size (upaudit).
    #[arg(short = 'k', long, global = true)]
    k: Option<i64>,

    /// Comma-separated strictly increasing box heights.
    #[arg(long, value_name = "H,H,...", global = true)]
    heights: Option<String>,

    /// Boundary radius for Folner and Whyte statistics.
    #[arg(short = 'r', long, global = true)]
    radius: Option<u32>,

    /// Matching radius for the bipartite audit; 0 skips it.
    #[arg(short = 'R', long, global = true)]
    match_radius: Option<u32>,

    /// Lower-boundary map description file.
    #[arg(long, global = true)]
    phi_l: Option<PathBuf>,

    /// Upper-boundary map description file.
    #[arg(long, global = true)]
    phi_u: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Ambient for boundary counts: band or box.
    #[arg(long, global = true)]
    ambient: Option<String>,

    /// Directory for report files.
    #[arg(long, global = true)]
    outdir: Option<PathBuf>,

    /// Vertex budget for box construction.
    #[arg(long, global = true)]
    budget: Option<u128>,

    /// Report envelope: csv or json.
    #[arg(long, global = true)]
    emit: Option<String>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Exact boundary-to-size ratios over the configured heights.
    Folner,
    /// Lift the boundary maps, scan the comparison chain, print a verdict.
    Obstruction,
    /// Exhaustive fiber check of the k-step up map.
    Upaudit,
    /// Validate a map description file and echo its canonical form.
    CheckMap { file: PathBuf },
    /// Print a seeded random piecewise map in the description format.
    GenMap {
        /// Maximum piece depth below the unit window.
        #[arg(long, default_value_t = 3)]
        depth: u32,
        /// Global height shift (ignored with --mixed).
        #[arg(long, default_value_t = 0)]
        shift: i64,
        /// Mix per-piece shifts instead of one global constant.
        #[arg(long)]
        mixed: bool,
    },
}

fn build_config(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let mut cfg = ExperimentConfig::default();
    if let Some(path) = &cli.config {
        cfg.load_file(path)?;
    }
    if let Some(n) = cli.n {
        cfg.n = n;
    }
    if let Some(k) = cli.k {
        cfg.k = k;
    }
    if let Some(hs) = &cli.heights {
        cfg.set("H_list", hs)?;
    }
    if let Some(r) = cli.radius {
        cfg.r = r;
    }
    if let Some(big_r) = cli.match_radius {
        cfg.match_radius = big_r;
    }
    if let Some(p) = &cli.phi_l {
        cfg.phi_l = Some(p.clone());
    }
    if let Some(p) = &cli.phi_u {
        cfg.phi_u = Some(p.clone());
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(a) = &cli.ambient {
        cfg.set("ambient", a)?;
    }
    if let Some(dir) = &cli.outdir {
        cfg.outdir = dir.clone();
    }
    if let Some(b) = cli.budget {
        cfg.budget = b;
    }
    if let Some(e) = &cli.emit {
        cfg.set("emit", e)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = build_config(cli)?;
    match &cli.cmd {
        Cmd::Folner => {
            cmd_folner(&cfg)?;
        }
        Cmd::Obstruction => {
            cmd_obstruction(&cfg)?;
        }
        Cmd::Upaudit => {
            cmd_upaudit(&cfg)?;
        }
        Cmd::CheckMap { file } => {
            cmd_checkmap(file)?;
        }
        Cmd::GenMap { depth, shift, mixed } => {
            let mut stream = Stream::new(cfg.seed);
            let m = if *mixed {
                random_mixed_map(cfg.n, *depth, shift.abs().max(1), &mut stream)
            } else {
                random_global_map(cfg.n, *depth, *shift, &mut stream)
            };
            debug_assert!(m.domain().contains_clone(&CloneBall::zero(cfg.n, 0)));
            print!("{}", format_map(&m));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
