use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use fractscan_core::block::{block_forward, BlockConfig, MergeRule, Parameterization, PatchGrid};
use fractscan_core::curves::{generate, CurveKind, CurveSpec, GridShape, MAX_DEPTH};
use fractscan_core::metrics::compare_orders;
use fractscan_core::ssm::{build_kernel, discretize_zoh, SsmParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{Layers, UsageError};
use crate::formats::{self, OrderFormat};
use crate::verify::{self, Suite};

const AFTER_HELP: &str = "\
Option values are resolved in this order: command-line flag, then the file \
given with --config (TOML, keys named like the long flags, e.g. `state-size = 8`), \
then FRACTSCAN_<KEY> environment variables (e.g. FRACTSCAN_SEED), then the \
built-in default.

Exit status: 0 on success, 1 on runtime or verification failure, 2 on usage errors.";

#[derive(Debug, Parser)]
#[command(name = "fractscan", version, about = "Hilbert scan orders, locality metrics and selective-scan checks", after_help = AFTER_HELP)]
pub struct Cli {
    /// TOML file with option defaults (see below for precedence)
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a scan order and export it as JSON, CSV or SVG
    Curve(CurveArgs),
    /// Compare locality metrics of several scan orders on one grid
    Metrics(MetricsArgs),
    /// Dump the convolution kernel of a discretised diagonal SSM as CSV
    Kernel(KernelArgs),
    /// Run the four-direction scan block on a patch grid
    Block(BlockArgs),
    /// Run property suites and write a JSON summary
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct ShapeArgs {
    /// Grid side as a power of two: 2^depth x 2^depth [default: 3]
    #[arg(long, conflicts_with_all = ["rows", "cols"])]
    pub depth: Option<u32>,
    /// Grid rows (use with --cols for non-square or non-power-of-two grids)
    #[arg(long, requires = "cols")]
    pub rows: Option<usize>,
    /// Grid columns
    #[arg(long, requires = "rows")]
    pub cols: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    /// Curve kind: hilbert, raster, boustrophedon (zigzag) or morton (zorder) [default: hilbert]
    #[arg(long, value_parser = parse_kind)]
    pub kind: Option<CurveKind>,
    #[command(flatten)]
    pub shape: ShapeArgs,
    /// Orientation, 1 to 4 [default: 1]
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
    pub direction: Option<u8>,
    /// Vertical shift in cells; wraps at the grid edge [default: 0]
    #[arg(long, allow_negative_numbers = true)]
    pub shift: Option<i64>,
    /// Output format [default: csv]
    #[arg(long, value_enum)]
    pub format: Option<OrderFormat>,
    /// Output file (standard output when omitted)
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// Order to compare, as KIND[:DIRECTION[:SHIFT]][@ROWSxCOLS]; repeatable
    #[arg(long = "spec", value_name = "SPEC", allow_hyphen_values = true)]
    pub specs: Vec<String>,
    /// Add the hilbert, raster, boustrophedon and morton baselines
    #[arg(long)]
    pub baseline: bool,
    /// Shared grid shape [default: 8x8]
    #[command(flatten)]
    pub shape: ShapeArgs,
    /// Report format [default: csv]
    #[arg(long, value_enum)]
    pub format: Option<ReportFormat>,
    /// Output file (standard output when omitted)
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct KernelArgs {
    /// Diagonal of the evolution matrix, comma separated (e.g. --a=-1,-0.5)
    #[arg(
        long,
        value_delimiter = ',',
        allow_negative_numbers = true,
        required = true
    )]
    pub a: Vec<f64>,
    /// Input projection, comma separated
    #[arg(
        long,
        value_delimiter = ',',
        allow_negative_numbers = true,
        required = true
    )]
    pub b: Vec<f64>,
    /// Output projection, comma separated
    #[arg(
        long,
        value_delimiter = ',',
        allow_negative_numbers = true,
        required = true
    )]
    pub c: Vec<f64>,
    /// Timescale, must be positive
    #[arg(long, allow_negative_numbers = true)]
    pub delta: f64,
    /// Kernel length
    #[arg(long)]
    pub length: usize,
    /// Output file (standard output when omitted)
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MergeArg {
    Sum,
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ParamArg {
    Seeded,
    Identity,
    Accumulate,
}

#[derive(Debug, Args)]
pub struct BlockArgs {
    /// Grid JSON file; a random grid is drawn from --seed when omitted
    #[arg(long, value_name = "PATH")]
    pub input: Option<PathBuf>,
    /// Rows of the random grid [default: 8]
    #[arg(long, conflicts_with = "input")]
    pub rows: Option<usize>,
    /// Columns of the random grid [default: 8]
    #[arg(long, conflicts_with = "input")]
    pub cols: Option<usize>,
    /// Channels of the random grid [default: 4]
    #[arg(long, conflicts_with = "input")]
    pub channels: Option<usize>,
    /// Curve kind for the four directions [default: hilbert]
    #[arg(long, value_parser = parse_kind)]
    pub kind: Option<CurveKind>,
    /// SSM state size [default: 16]
    #[arg(long)]
    pub state_size: Option<usize>,
    /// How the four directional outputs are combined [default: sum, or mean with --param identity]
    #[arg(long, value_enum)]
    pub merge: Option<MergeArg>,
    /// Vertical curve shift [default: 0]
    #[arg(long, allow_negative_numbers = true)]
    pub shift: Option<i64>,
    /// Source of the per-step SSM parameters [default: seeded]
    #[arg(long, value_enum)]
    pub param: Option<ParamArg>,
    /// Use one set of projection weights for all four directions
    #[arg(long)]
    pub share_directions: bool,
    /// Seed for the random grid and the projection weights [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file (standard output when omitted)
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Property suite to run [default: all]
    #[arg(long, value_enum)]
    pub suite: Option<Suite>,
    /// Seed for the randomised checks [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSON summary file (standard output when omitted)
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Usage(#[from] UsageError),
    #[error("{0:#}")]
    Runtime(#[from] anyhow::Error),
    #[error("verification failed")]
    VerificationFailed,
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) | CliError::VerificationFailed => 1,
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(UsageError(msg.into()))
}

impl From<fractscan_core::Error> for CliError {
    fn from(e: fractscan_core::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if !matches!(e, CliError::VerificationFailed) {
                eprintln!("error: {e}");
            }
            ExitCode::from(e.exit_code())
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let layers = Layers::load(cli.config.as_deref())?;
    match cli.command {
        Command::Curve(args) => cmd_curve(&layers, args),
        Command::Metrics(args) => cmd_metrics(&layers, args),
        Command::Kernel(args) => cmd_kernel(args),
        Command::Block(args) => cmd_block(&layers, args),
        Command::Verify(args) => cmd_verify(&layers, args),
    }
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match out {
        Some(path) => {
            std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes).context("writing standard output")?;
            stdout.flush().context("writing standard output")?;
        }
    }
    Ok(())
}

fn parse_kind(s: &str) -> Result<CurveKind, String> {
    s.parse::<CurveKind>().map_err(|e| e.to_string())
}

fn resolve_shape(
    layers: &Layers,
    args: &ShapeArgs,
    default_depth: u32,
) -> Result<GridShape, CliError> {
    let rows = layers.get(args.rows, "rows")?;
    let cols = layers.get(args.cols, "cols")?;
    let shape = match (rows, cols) {
        (Some(r), Some(c)) if args.depth.is_none() => {
            GridShape::new(r, c).map_err(|e| usage(e.to_string()))?
        }
        (None, None) | (Some(_), Some(_)) => {
            let depth = layers.get(args.depth, "depth")?.unwrap_or(default_depth);
            if depth > MAX_DEPTH {
                return Err(usage(format!(
                    "depth {depth} exceeds the limit of {MAX_DEPTH}"
                )));
            }
            GridShape::square(1 << depth).expect("positive side")
        }
        _ => return Err(usage("--rows and --cols must be given together")),
    };
    Ok(shape)
}

fn resolve_direction(layers: &Layers, flag: Option<u8>) -> Result<u8, CliError> {
    let direction = layers.get(flag, "direction")?.unwrap_or(1);
    if !(1..=4).contains(&direction) {
        return Err(usage(format!(
            "direction must be in 1..=4, got {direction}"
        )));
    }
    Ok(direction)
}

fn cmd_curve(layers: &Layers, args: CurveArgs) -> Result<(), CliError> {
    let kind = layers
        .get_with(args.kind, "kind", parse_kind)?
        .unwrap_or(CurveKind::Hilbert);
    let shape = resolve_shape(layers, &args.shape, 3)?;
    let direction = resolve_direction(layers, args.direction)?;
    let shift = layers.get(args.shift, "shift")?.unwrap_or(0);
    let format = layers
        .get_enum(args.format, "format")?
        .unwrap_or(OrderFormat::Csv);
    let order = generate(&CurveSpec::new(kind, shape, direction, shift))?;
    emit(args.out.as_deref(), &formats::export_order(&order, format))
}

/// Parses `KIND[:DIRECTION[:SHIFT]][@ROWSxCOLS]`.
pub fn parse_spec(text: &str, default_shape: GridShape) -> Result<CurveSpec, String> {
    let (body, shape) = match text.split_once('@') {
        Some((body, dims)) => {
            let (r, c) = dims
                .split_once('x')
                .ok_or_else(|| format!("bad shape {dims:?}, expected ROWSxCOLS"))?;
            let rows = r.parse().map_err(|_| format!("bad row count {r:?}"))?;
            let cols = c.parse().map_err(|_| format!("bad column count {c:?}"))?;
            (body, GridShape::new(rows, cols).map_err(|e| e.to_string())?)
        }
        None => (text, default_shape),
    };
    let mut parts = body.split(':');
    let kind = parse_kind(parts.next().unwrap_or_default())?;
    let direction = match parts.next() {
        Some(d) => d.parse().map_err(|_| format!("bad direction {d:?}"))?,
        None => 1,
    };
    let shift = match parts.next() {
        Some(s) => s.parse().map_err(|_| format!("bad shift {s:?}"))?,
        None => 0,
    };
    if parts.next().is_some() {
        return Err(format!("too many fields in {text:?}"));
    }
    if !(1..=4).contains(&direction) {
        return Err(format!("direction must be in 1..=4, got {direction}"));
    }
    Ok(CurveSpec::new(kind, shape, direction, shift))
}

fn cmd_metrics(layers: &Layers, args: MetricsArgs) -> Result<(), CliError> {
    let shape = resolve_shape(layers, &args.shape, 3)?;
    let mut specs: Vec<CurveSpec> = args
        .specs
        .iter()
        .map(|s| parse_spec(s, shape).map_err(usage))
        .collect::<Result<_, _>>()?;
    if args.baseline {
        specs.extend(CurveKind::ALL.map(|kind| CurveSpec::linear(kind, shape)));
    }
    if specs.is_empty() {
        return Err(usage("give at least one --spec or --baseline"));
    }
    let format = layers
        .get_enum(args.format, "format")?
        .unwrap_or(ReportFormat::Csv);
    let reports = compare_orders(&specs)?;
    let text = match format {
        ReportFormat::Csv => formats::reports_to_csv(&reports),
        ReportFormat::Json => formats::reports_to_json(&reports),
    };
    emit(args.out.as_deref(), text.as_bytes())
}

fn cmd_kernel(args: KernelArgs) -> Result<(), CliError> {
    let params = SsmParams::new(args.a, args.b, args.c, args.delta)?;
    let kernel = build_kernel(&discretize_zoh(&params)?, args.length);
    emit(
        args.out.as_deref(),
        formats::kernel_to_csv(&kernel).as_bytes(),
    )
}

fn cmd_block(layers: &Layers, args: BlockArgs) -> Result<(), CliError> {
    let seed = layers.get(args.seed, "seed")?.unwrap_or(0);
    let grid = match &args.input {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            formats::grid_from_json(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => {
            let rows = layers.get(args.rows, "rows")?.unwrap_or(8);
            let cols = layers.get(args.cols, "cols")?.unwrap_or(8);
            let channels = layers.get(args.channels, "channels")?.unwrap_or(4);
            let shape = GridShape::new(rows, cols).map_err(|e| usage(e.to_string()))?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            PatchGrid::from_fn(shape, channels, |_, _, _| rng.random_range(-1.0..1.0))
                .map_err(|e| usage(e.to_string()))?
        }
    };
    let parameterization = match args.param.unwrap_or(ParamArg::Seeded) {
        ParamArg::Seeded => Parameterization::Seeded,
        ParamArg::Identity => Parameterization::Identity,
        ParamArg::Accumulate => Parameterization::Accumulate,
    };
    let defaults = match parameterization {
        Parameterization::Identity => BlockConfig::identity(),
        _ => BlockConfig::default(),
    };
    let config = BlockConfig {
        curve_kind: layers
            .get_with(args.kind, "kind", parse_kind)?
            .unwrap_or(defaults.curve_kind),
        state_size: layers
            .get(args.state_size, "state-size")?
            .unwrap_or(defaults.state_size),
        merge_rule: match layers.get_enum(args.merge, "merge")? {
            Some(MergeArg::Sum) => MergeRule::Sum,
            Some(MergeArg::Mean) => MergeRule::Mean,
            None => defaults.merge_rule,
        },
        shift: layers.get(args.shift, "shift")?.unwrap_or(0),
        param_seed: seed,
        share_directions: args.share_directions,
        parameterization,
    };
    let out = block_forward(&grid, &config)?;
    emit(args.out.as_deref(), formats::grid_to_json(&out).as_bytes())
}

fn cmd_verify(layers: &Layers, args: VerifyArgs) -> Result<(), CliError> {
    let suite = layers.get_enum(args.suite, "suite")?.unwrap_or(Suite::All);
    let seed = layers.get(args.seed, "seed")?.unwrap_or(0);
    let summary = verify::run(suite, seed);
    for p in &summary.properties {
        let status = if p.passed { "PASS" } else { "FAIL" };
        eprintln!("{status} {}::{} ({})", p.suite, p.name, p.detail);
    }
    let mut json = serde_json::to_string_pretty(&summary).context("serialising summary")?;
    json.push('\n');
    emit(args.out.as_deref(), json.as_bytes())?;
    if summary.passed {
        Ok(())
    } else {
        Err(CliError::VerificationFailed)
    }
}
