use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pfa_cli::commands::{self, ConstructParams};
use pfa_cli::{CliError, CliResult};
use pfa_core::constructions::{EpsilonRule, FamilyKind, FamilySpec, DEFAULT_U0, DEFAULT_U_TILDE0};

#[derive(Parser)]
#[command(name = "pfa-lab", version, about = "Principal factor approximation laboratory")]
struct Cli {
    /// Root seed; overrides the seed in a sweep configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a covariance family and verify its invariants.
    Construct(ConstructArgs),
    /// Decompose a matrix file and report k-selection and conditions.
    Pfa(PfaArgs),
    /// Run a dimension sweep from a TOML configuration.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct ConstructArgs {
    /// TOML file with `m`, `delta` and a `[family]` table; replaces the flags below.
    #[arg(long)]
    config: Option<PathBuf>,
    /// block-diag | dense | bounded-tail | mixed | equicorrelated
    #[arg(long, value_parser = parse_family, required_unless_present = "config")]
    family: Option<FamilyKind>,
    #[arg(long, required_unless_present = "config")]
    m: Option<usize>,
    /// Largest ε; the spectrum runs from ε0/4 to ε0.
    #[arg(long, default_value_t = 0.4)]
    eps0: f64,
    #[arg(long, default_value_t = DEFAULT_U0)]
    u0: f64,
    #[arg(long = "u-tilde0", default_value_t = DEFAULT_U_TILDE0)]
    u_tilde0: f64,
    #[arg(long, default_value_t = 0.5)]
    rho: f64,
    #[arg(long, default_value_t = 0.4)]
    delta: f64,
}

#[derive(Args)]
struct PfaArgs {
    /// Matrix file: dimension line, then one row per line.
    #[arg(long)]
    matrix: PathBuf,
    #[arg(long = "c", default_value_t = 1.0)]
    c: f64,
    #[arg(long)]
    delta: f64,
    /// Use this k instead of the minimal one.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long = "eps-s", default_value_t = 0.05)]
    eps_s: f64,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// Exit with status 3 unless the fitted slope is at most −δ.
    #[arg(long)]
    assert_slope: bool,
}

fn parse_family(s: &str) -> Result<FamilyKind, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| {
        format!("unknown family {s:?}; expected block-diag, dense, bounded-tail, mixed or equicorrelated")
    })
}

fn run(cli: Cli) -> CliResult<String> {
    let seed = cli.seed.unwrap_or(0);
    match cli.command {
        Command::Construct(args) => {
            let params = match &args.config {
                Some(path) => {
                    let text = std::fs::read_to_string(path)
                        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
                    toml::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?
                }
                None => {
                    let mut family = FamilySpec::new(args.family.expect("required by clap"));
                    family.epsilon = EpsilonRule::Pinned { eps0: args.eps0 };
                    family.u0 = args.u0;
                    family.u_tilde0 = args.u_tilde0;
                    family.rho = args.rho;
                    ConstructParams {
                        family,
                        m: args.m.expect("required by clap"),
                        delta: args.delta,
                    }
                }
            };
            let report = commands::construct(&params, seed, &cli.out)?;
            Ok(format!(
                "construct: m = {}, {} checks passed, ϑ_m = {:.6}",
                params.m,
                report.verification.checks.len(),
                report.verification.theta_m
            ))
        }
        Command::Pfa(args) => {
            let report =
                commands::pfa_report(&args.matrix, args.c, args.delta, args.k, args.eps_s, seed, &cli.out)?;
            Ok(format!(
                "pfa: m = {}, minimal k = {}, ϑ = {:.6} (bound {:.6})",
                report.m, report.selected_k, report.conditions.theta_m, report.bound
            ))
        }
        Command::Sweep(args) => {
            let mut config = commands::load_experiment(&args.config)?;
            if let Some(s) = cli.seed {
                config.seed = s;
            }
            let bundle = commands::sweep(&config, args.assert_slope, &cli.out)?;
            let slope = bundle
                .report
                .slope
                .slope
                .map_or_else(|| "undefined".to_string(), |s| format!("{s:.4}"));
            Ok(format!(
                "sweep: {} grid points, slope {slope} ({:?}), G-event hits {}",
                bundle.report.points.len(),
                bundle.report.slope.status,
                bundle.report.g_event_hits
            ))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.threads {
        Some(0) => Err(CliError::Input("--threads must be at least 1".into())),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| run(cli)),
            Err(e) => Err(CliError::Input(format!("cannot start thread pool: {e}"))),
        },
        None => run(cli),
    };
    match outcome {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            let body = serde_json::json!({
                "error": { "kind": e.kind(), "exit_code": e.exit_code(), "message": e.to_string() }
            });
            eprintln!("{body}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
