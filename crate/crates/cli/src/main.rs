use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bloch_cli::commands::{
    cmd_bands, cmd_compare, cmd_drift, cmd_evolve, cmd_hoppings, cmd_semiclassical, Outcome,
};
use bloch_cli::config::{parse_config_with, RunConfig, KEYS};
use bloch_cli::CliError;

/// Environment variable that replaces the configured output directory.
const OUTPUT_ENV: &str = "BLOCH2D_OUTPUT_DIR";

fn key_help() -> String {
    let mut s = String::from("Configuration keys (`section.key = value`, `#` comments):\n");
    for (k, d) in KEYS {
        s.push_str(&format!("  {k:<26} {d}\n"));
    }
    s.push_str(&format!(
        "\nThe output directory is taken from --output, then ${OUTPUT_ENV}, then output.dir.\n\
         Exit codes: 0 success, 1 I/O failure, 2 configuration error, 3 numerical-validity abort."
    ));
    s
}

#[derive(Parser)]
#[command(
    name = "bloch2d",
    version,
    about = "Directed transport from Bloch oscillations on the triangular lattice"
)]
#[command(after_help = key_help())]
struct Cli {
    /// Configuration file.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Override one configuration key, e.g. `--set packet.L=121`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    sets: Vec<String>,
    /// Output directory.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Lowest band on the reduced-wave-vector grid.
    Bands,
    /// Hopping table and ln|J| summary.
    Hoppings,
    /// Predicted Bloch period, drift per period and drift line.
    Drift,
    /// Semiclassical centre-of-mass trajectory.
    Semiclassical,
    /// Exact wave-packet evolution.
    Evolve(EvolveArgs),
    /// Exact versus semiclassical trajectories and the predicted drift line.
    Compare,
}

#[derive(Args)]
struct EvolveArgs {
    /// Odd grid side L.
    #[arg(long)]
    side: Option<usize>,
    /// Packet width in sites.
    #[arg(long)]
    sigma: Option<f64>,
    /// Initial wave vector, e.g. "0.05 0.03".
    #[arg(long, allow_hyphen_values = true)]
    k0: Option<String>,
    /// Force in units of J1, e.g. "0.5 -0.5".
    #[arg(long, allow_hyphen_values = true)]
    force: Option<String>,
    /// Time step in 1/E_r.
    #[arg(long)]
    dt: Option<f64>,
    /// Duration in 1/J1.
    #[arg(long)]
    t_end: Option<f64>,
}

impl EvolveArgs {
    fn overrides(&self) -> Vec<String> {
        let mut v = Vec::new();
        if let Some(x) = self.side {
            v.push(format!("packet.L={x}"));
        }
        if let Some(x) = self.sigma {
            v.push(format!("packet.sigma={x}"));
        }
        if let Some(x) = &self.k0 {
            v.push(format!("packet.k0={x}"));
        }
        if let Some(x) = &self.force {
            v.push(format!("force.F={x}"));
        }
        if let Some(x) = self.dt {
            v.push(format!("evolution.dt={x}"));
        }
        if let Some(x) = self.t_end {
            v.push(format!("evolution.t_end={x}"));
        }
        v
    }
}

fn load(cli: &Cli) -> Result<RunConfig, CliError> {
    let (text, base) = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            let base = path.parent().map(PathBuf::from).unwrap_or_default();
            (text, base)
        }
        None => (String::new(), PathBuf::from(".")),
    };
    let mut overrides = cli.sets.clone();
    if let Command::Evolve(args) = &cli.command {
        overrides.extend(args.overrides());
    }
    let mut cfg = parse_config_with(&text, &base, &overrides)?;
    if let Some(dir) = &cli.output {
        cfg.output.dir = dir.clone();
    } else if let Some(dir) = std::env::var_os(OUTPUT_ENV).filter(|d| !d.is_empty()) {
        cfg.output.dir = PathBuf::from(dir);
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let cfg = load(cli)?;
    match cli.command {
        Command::Bands => cmd_bands(&cfg),
        Command::Hoppings => cmd_hoppings(&cfg),
        Command::Drift => cmd_drift(&cfg),
        Command::Semiclassical => cmd_semiclassical(&cfg),
        Command::Evolve(_) => cmd_evolve(&cfg),
        Command::Compare => cmd_compare(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(outcome) => {
            print!("{}", outcome.stdout);
            for f in &outcome.files {
                eprintln!("wrote {}", f.display());
            }
            if outcome.aborts.is_empty() {
                ExitCode::SUCCESS
            } else {
                for a in &outcome.aborts {
                    eprintln!("{a}");
                }
                ExitCode::from(3)
            }
        }
        Err(e) => {
            eprintln!("bloch2d: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
