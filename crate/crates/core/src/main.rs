use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fracsolve::cli::config::{Format, Method, Overrides, RunConfig};
use fracsolve::cli::{emit, runner};

#[derive(Parser)]
#[command(
    name = "fracsolve",
    version,
    about = "Fractional powers of SPD operators: approximants and error checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sweep over `m_list` and emit one row per m.
    Run(RunArgs),
    /// Print the approximant coefficients for one m as JSON.
    Coeffs(CoeffArgs),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, value_enum)]
    method: Option<Method>,
    #[arg(long)]
    alpha: Option<f64>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated sizes, e.g. `8,16,32`.
    #[arg(long, value_delimiter = ',')]
    m: Option<Vec<usize>>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args)]
struct CoeffArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    m: usize,
}

const EXIT_CHECK: u8 = 1;
const EXIT_INVALID: u8 = 2;

fn load(common: &Common, extra: Overrides) -> Result<RunConfig, ExitCode> {
    let mut cfg = RunConfig::load(&common.config).map_err(|e| {
        eprintln!("error: {e}");
        ExitCode::from(EXIT_INVALID)
    })?;
    cfg.apply(&Overrides {
        method: common.method,
        alpha: common.alpha,
        ..extra
    });
    Ok(cfg)
}

fn run(args: RunArgs) -> Result<ExitCode, ExitCode> {
    let cfg = load(
        &args.common,
        Overrides {
            m_list: args.m,
            out: args.out,
            format: args.format,
            ..Default::default()
        },
    )?;
    let invalid = |e: fracsolve::cli::config::ConfigError| {
        eprintln!("error: {e}");
        ExitCode::from(EXIT_INVALID)
    };
    let outcome = runner::run(&cfg).map_err(invalid)?;
    for f in &outcome.resolved.failures {
        eprintln!("failed: {f}");
    }
    emit::write_outputs(
        cfg.output.path.as_deref(),
        cfg.output.format,
        &outcome.rows,
        &cfg,
        &outcome.resolved,
    )
    .map_err(invalid)?;
    Ok(if outcome.all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_CHECK)
    })
}

fn coeffs(args: CoeffArgs) -> Result<ExitCode, ExitCode> {
    let cfg = load(&args.common, Overrides::default())?;
    let value = runner::coefficients(&cfg, args.m).map_err(|e| {
        eprintln!("error: {e}");
        ExitCode::from(EXIT_INVALID)
    })?;
    println!(
        "{}",
        serde_json::to_string_pretty(&value).expect("json value")
    );
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Run(a) => run(a),
        Command::Coeffs(a) => coeffs(a),
    };
    res.unwrap_or_else(|code| code)
}
