//! Command-line front end: analyze, verify and decompose Walker metric
//! specs. Output is JSON by default (schema shipped in `schema/`), exit
//! codes are 0 for success, 2 for an indeterminate classification, 1 for
//! input or budget failures.

use clap::{Args, Parser, Subcommand};

use std::path::PathBuf;
use std::process::ExitCode;
use walker_holonomy::{
    analyze, decompose_report, load_metric_spec, verify, AnalyzeOptions, Geometry, Point,
};

#[derive(Parser)]
#[command(name = "wh", version, about = "Walker-metric foliation operators, curvature decomposition and holonomy classification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Full pipeline: decompose, sample holonomy, classify, run criteria.
    Analyze(AnalyzeArgs),
    /// Run the invariant suites against their documented budgets.
    Verify(VerifyArgs),
    /// Print the five curvature components at a point.
    Decompose(DecomposeArgs),
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Metric-spec file.
    spec: PathBuf,
    /// Base point `c0,c1,..,c{n+1}`; defaults to (0, 1, .., 1, 0).
    #[arg(long)]
    point: Option<String>,
    /// Number of component-evaluation points.
    #[arg(long, default_value_t = 5)]
    samples: usize,
    /// RNG seed for curves and sample points.
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Rank/fit tolerance (default 1e-5; env WH_TOL overrides the default).
    #[arg(long)]
    tol: Option<f64>,
    /// Number of transport curves for holonomy sampling.
    #[arg(long, default_value_t = 64)]
    curves: usize,
    /// Emit JSON (default).
    #[arg(long, conflicts_with = "text")]
    json: bool,
    /// Emit a human-readable summary instead of JSON.
    #[arg(long)]
    text: bool,
}

#[derive(Args)]
struct VerifyArgs {
    /// Metric-spec file.
    spec: PathBuf,
    /// Number of evaluation points.
    #[arg(long, default_value_t = 4)]
    points: usize,
    /// RNG seed for the evaluation points.
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

#[derive(Args)]
struct DecomposeArgs {
    /// Metric-spec file.
    spec: PathBuf,
    /// Evaluation point `c0,c1,..,c{n+1}`.
    #[arg(long, required = true)]
    point: String,
}

fn parse_point(text: &str) -> Result<Point, String> {
    let coords: Result<Vec<f64>, _> = text.split(',').map(|c| c.trim().parse::<f64>()).collect();
    let coords = coords.map_err(|e| format!("invalid point `{text}`: {e}"))?;
    Point::new(coords).map_err(|e| e.to_string())
}

fn env_tol() -> Option<f64> {
    std::env::var("WH_TOL").ok().and_then(|v| v.parse().ok())
}

fn run() -> Result<i32, String> {
    // usage errors exit 1 per the interface contract; help/version exit 0
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e)
            if matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            ) =>
        {
            print!("{e}");
            return Ok(0);
        }
        Err(e) => return Err(e.to_string()),
    };
    match cli.command {
        Command::Analyze(args) => {
            let spec = load_metric_spec(&args.spec).map_err(|e| e.to_string())?;
            let geom = Geometry::new(spec);
            let mut opts = AnalyzeOptions {
                samples: args.samples.max(1),
                seed: args.seed,
                curves: args.curves,
                ..Default::default()
            };
            if let Some(tol) = args.tol.or_else(env_tol) {
                opts.tol = tol;
            }
            if let Some(ref text) = args.point {
                opts.point = Some(parse_point(text)?);
            }
            let report = analyze(&geom, &opts).map_err(|e| e.to_string())?;
            if args.text {
                print!("{}", report.to_text());
            } else {
                println!("{}", report.to_json());
            }
            Ok(report.exit_code())
        }
        Command::Verify(args) => {
            let spec = load_metric_spec(&args.spec).map_err(|e| e.to_string())?;
            let geom = Geometry::new(spec);
            let report = verify(&geom, args.points, args.seed).map_err(|e| e.to_string())?;
            print!("{}", report.to_text());
            Ok(if report.all_pass() { 0 } else { 1 })
        }
        Command::Decompose(args) => {
            let spec = load_metric_spec(&args.spec).map_err(|e| e.to_string())?;
            let geom = Geometry::new(spec);
            let point = parse_point(&args.point)?;
            let report = decompose_report(&geom, &point).map_err(|e| e.to_string())?;
            println!("{}", report.to_json());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => ExitCode::from(code as u8),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
