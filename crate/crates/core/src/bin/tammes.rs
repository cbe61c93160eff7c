//! Command-line front end: solve, simplex, bench, gradcurve, analyze, demo.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime failure, 3 I/O or parse
//! error. Machine-readable output goes to `--out` (stdout by default);
//! diagnostics go to stderr.

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use tammes::analyzer::{angle_stats, load_weight_matrix, points_to_csv, InputFormat};
use tammes::bench::{compare_report, has_failures, run_table1, BenchConfig, ReportFormat, RowSelector};
use tammes::demo::{train, DemoConfig, Regularizer};
use tammes::losses::{pair_gradient_norm, LossKind};
use tammes::optimizer::{solve, OptimizerConfig};
use tammes::simplex::regular_simplex;
use tammes::Error;

#[derive(Parser, Debug)]
#[command(name = "tammes", version, about = "Spread unit vectors on hyperspheres")]
struct Cli {
    /// Random seed.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Output file (stdout when absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Output format; each subcommand has its own default.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Md,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Optimize n points in R^d with one loss.
    Solve(SolveArgs),
    /// Emit the regular simplex with n vertices in R^d.
    Simplex(SimplexArgs),
    /// Run the minimum-angle benchmark table.
    Bench(BenchArgs),
    /// Emit per-pair gradient norm against pairwise angle.
    Gradcurve(GradcurveArgs),
    /// Angle statistics of a weight matrix.
    Analyze(AnalyzeArgs),
    /// Train the toy classifier with an angular regularizer.
    Demo(DemoArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum LossArg {
    Mma,
    Cosine,
    Rf,
    Log,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[arg(long)]
    d: usize,
    #[arg(long)]
    n: usize,
    #[arg(long, value_enum, default_value = "mma")]
    loss: LossArg,
    /// Riesz-Fisher exponent (rf only).
    #[arg(long)]
    s: Option<f64>,
    #[arg(long, default_value_t = 10_000)]
    iters: usize,
    #[arg(long, default_value_t = 0.1)]
    lr: f64,
    #[arg(long, default_value_t = 0.9)]
    momentum: f64,
    #[arg(long, default_value_t = 1000)]
    patience: usize,
    #[arg(long, default_value_t = 0.2)]
    factor: f64,
}

#[derive(Args, Debug)]
struct SimplexArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    d: usize,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long, default_value_t = 3)]
    seeds: usize,
    /// `all`, or `d,n` pairs separated by `;` or given repeatedly.
    #[arg(long, default_value = "all")]
    rows: Vec<String>,
    /// Also run the n = 600 row.
    #[arg(long = "include-600")]
    include_600: bool,
    /// Override the iteration budget.
    #[arg(long)]
    iters: Option<usize>,
}

#[derive(Args, Debug)]
struct GradcurveArgs {
    /// Riesz-Fisher exponent.
    #[arg(long, default_value_t = 1.0)]
    s: f64,
    #[arg(long, default_value_t = 500)]
    samples: usize,
    #[arg(long, default_value_t = 1.0)]
    wnorm: f64,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum InputArg {
    Csv,
    Json,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    /// Input file (stdin when absent).
    #[arg(long = "in")]
    input: Option<PathBuf>,
    #[arg(long = "format-in", value_enum, default_value = "json")]
    format_in: InputArg,
    #[arg(long, default_value_t = 0.2)]
    threshold: f64,
    #[arg(long, default_value_t = 40)]
    bins: usize,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum RegArg {
    None,
    Mma,
    Orthogonal,
    Rf,
    Log,
}

#[derive(Args, Debug)]
struct DemoArgs {
    #[arg(long, value_enum, default_value = "mma")]
    reg: RegArg,
    /// Regularization coefficient (default depends on --reg).
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long = "include-output", default_value_t = true, action = clap::ArgAction::Set)]
    include_output: bool,
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    /// Write each layer's weights as CSV into this directory.
    #[arg(long = "dump-layers")]
    dump_layers: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Runtime(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Runtime(_) => 2,
            Failure::Io(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Runtime(m) | Failure::Io(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidConfig(_)
            | Error::TooFewPoints(_)
            | Error::DimensionTooSmall { .. }
            | Error::DomainError(_) => Failure::Usage(e.to_string()),
            Error::ParseError { .. } | Error::RaggedRows { .. } | Error::Shape(_) => Failure::Io(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

fn io_failure(context: &str, e: impl std::fmt::Display) -> Failure {
    Failure::Io(format!("{context}: {e}"))
}

/// Output text plus whether the run should still exit with code 2.
struct Output {
    text: String,
    failed: bool,
}

impl Output {
    fn ok(text: String) -> Self {
        Self { text, failed: false }
    }
}

fn pick_format(requested: Option<Format>, default: Format, allowed: &[Format]) -> Result<Format, Failure> {
    let f = requested.unwrap_or(default);
    if allowed.contains(&f) {
        Ok(f)
    } else {
        Err(Failure::Usage(format!("format {f:?} is not supported by this subcommand")))
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String, Failure> {
    serde_json::to_string_pretty(value)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| Failure::Runtime(e.to_string()))
}

fn run_solve(args: &SolveArgs, cli: &Cli) -> Result<Output, Failure> {
    let format = pick_format(cli.format, Format::Json, &[Format::Json, Format::Csv])?;
    let loss = match args.loss {
        LossArg::Mma => LossKind::Mma,
        LossArg::Cosine => LossKind::Cosine,
        LossArg::Rf => LossKind::RieszFisher { s: args.s.unwrap_or(2.0) },
        LossArg::Log => LossKind::Logarithmic,
    };
    if args.s.is_some() && args.loss != LossArg::Rf {
        return Err(Failure::Usage("--s only applies to --loss rf".into()));
    }
    let config = OptimizerConfig {
        iterations: args.iters,
        lr0: args.lr,
        momentum: args.momentum,
        plateau_patience: args.patience,
        plateau_factor: args.factor,
        ..OptimizerConfig::new(loss, args.n, args.d, cli.seed)
    };
    let result = solve(&config)?;
    eprintln!(
        "{} d={} n={} seed={}: min angle {:.4} deg",
        loss.short_name(),
        args.d,
        args.n,
        cli.seed,
        result.final_min_angle.to_degrees()
    );
    Ok(Output::ok(match format {
        Format::Csv => points_to_csv(&result.final_points),
        _ => to_json(&result)?,
    }))
}

fn run_simplex(args: &SimplexArgs, cli: &Cli) -> Result<Output, Failure> {
    let format = pick_format(cli.format, Format::Json, &[Format::Json, Format::Csv])?;
    let points = regular_simplex(args.n, args.d)?;
    Ok(Output::ok(match format {
        Format::Csv => points_to_csv(&points),
        _ => to_json(&points)?,
    }))
}

fn parse_rows(specs: &[String]) -> Result<RowSelector, Failure> {
    let mut pairs = Vec::new();
    for arg in specs {
        for part in arg.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            if part.eq_ignore_ascii_case("all") {
                if specs.len() == 1 && arg.trim().eq_ignore_ascii_case("all") {
                    return Ok(RowSelector::All);
                }
                return Err(Failure::Usage("`all` cannot be combined with explicit rows".into()));
            }
            let (d, n) = part
                .split_once(',')
                .ok_or_else(|| Failure::Usage(format!("row {part:?} is not of the form d,n")))?;
            let parse = |v: &str| {
                v.trim()
                    .parse::<usize>()
                    .map_err(|_| Failure::Usage(format!("row {part:?} is not of the form d,n")))
            };
            pairs.push((parse(d)?, parse(n)?));
        }
    }
    if pairs.is_empty() {
        return Err(Failure::Usage("no benchmark rows selected".into()));
    }
    Ok(RowSelector::Pairs(pairs))
}

fn run_bench(args: &BenchArgs, cli: &Cli) -> Result<Output, Failure> {
    let format = pick_format(cli.format, Format::Csv, &[Format::Csv, Format::Md, Format::Json])?;
    let config = BenchConfig {
        seeds: args.seeds,
        base_seed: cli.seed,
        rows: parse_rows(&args.rows)?,
        include_large: args.include_600,
        iterations: args.iters,
        ..BenchConfig::default()
    };
    let rows = run_table1(&config)?;
    let failed = has_failures(&rows);
    if failed {
        eprintln!("some benchmark cells failed; see the report for details");
    }
    let text = match format {
        Format::Csv => compare_report(&rows, ReportFormat::Csv),
        Format::Md => compare_report(&rows, ReportFormat::Markdown),
        Format::Json => to_json(&rows)?,
    };
    Ok(Output { text, failed })
}

fn run_gradcurve(args: &GradcurveArgs, cli: &Cli) -> Result<Output, Failure> {
    pick_format(cli.format, Format::Csv, &[Format::Csv])?;
    if args.samples < 2 {
        return Err(Failure::Usage("--samples must be at least 2".into()));
    }
    let kinds = [
        LossKind::Cosine,
        LossKind::Mma,
        LossKind::RieszFisher { s: args.s },
        LossKind::Logarithmic,
    ];
    let (lo, hi) = (0.5f64, 179.5f64);
    let step = (hi - lo) / (args.samples - 1) as f64;
    let mut text = String::from("theta_deg,cosine,mma,rf,log\n");
    for k in 0..args.samples {
        let deg = lo + step * k as f64;
        let mut line = deg.to_string();
        for kind in kinds {
            let g = pair_gradient_norm(kind, deg.to_radians(), args.wnorm)?;
            line.push(',');
            line.push_str(&g.to_string());
        }
        text.push_str(&line);
        text.push('\n');
    }
    Ok(Output::ok(text))
}

fn read_input(path: Option<&Path>) -> Result<String, Failure> {
    match path {
        Some(p) => fs::read_to_string(p).map_err(|e| io_failure(&p.display().to_string(), e)),
        None => {
            let mut s = String::new();
            io::stdin()
                .read_to_string(&mut s)
                .map_err(|e| io_failure("stdin", e))?;
            Ok(s)
        }
    }
}

fn run_analyze(args: &AnalyzeArgs, cli: &Cli) -> Result<Output, Failure> {
    let format = pick_format(cli.format, Format::Json, &[Format::Json, Format::Csv])?;
    let source = read_input(args.input.as_deref())?;
    let format_in = match args.format_in {
        InputArg::Csv => InputFormat::Csv,
        InputArg::Json => InputFormat::PointSetJson,
    };
    let points = load_weight_matrix(&source, format_in).map_err(|e| Failure::Io(e.to_string()))?;
    let stats = angle_stats(&points, args.threshold, args.bins)?;
    eprintln!(
        "n={} d={}: min angle {:.4} deg, {} of {} pairs above {}",
        stats.n,
        stats.d,
        stats.min_angle_deg,
        stats.count_above_threshold,
        stats.pair_count(),
        args.threshold
    );
    Ok(Output::ok(match format {
        Format::Csv => stats.histogram_csv(),
        _ => to_json(&stats)?,
    }))
}

fn demo_summary(report: &tammes::DemoReport) -> String {
    let mut s = format!(
        "train accuracy {:.4}, test accuracy {:.4}\n| layer | min angle (deg) | pairs cos > 0.2 |\n|---|---|---|\n",
        report.train_accuracy, report.test_accuracy
    );
    for (k, (angle, count)) in report
        .per_layer_min_angle_deg
        .iter()
        .zip(&report.per_layer_count_above_02)
        .enumerate()
    {
        let angle = angle.map(|a| format!("{a:.3}")).unwrap_or_else(|| "NA".into());
        let count = count.map(|c| c.to_string()).unwrap_or_else(|| "NA".into());
        s.push_str(&format!("| {k} | {angle} | {count} |\n"));
    }
    s
}

fn run_demo(args: &DemoArgs, cli: &Cli) -> Result<Output, Failure> {
    let format = pick_format(cli.format, Format::Json, &[Format::Json, Format::Md])?;
    let reg = match args.reg {
        RegArg::None => Regularizer::None,
        RegArg::Mma => Regularizer::Mma,
        RegArg::Orthogonal => Regularizer::Orthogonal,
        RegArg::Rf => Regularizer::RieszFisher { s: 2.0 },
        RegArg::Log => Regularizer::Logarithmic,
    };
    let mut config = DemoConfig::new(reg, cli.seed);
    if let Some(l) = args.lambda {
        config.lambda = l;
    }
    config.include_output_layer = args.include_output;
    config.epochs = args.epochs;
    let (net, report) = train(&config)?;

    if let Some(dir) = &args.dump_layers {
        fs::create_dir_all(dir).map_err(|e| io_failure(&dir.display().to_string(), e))?;
        for (k, layer) in net.layers.iter().enumerate() {
            let path = dir.join(format!("layer_{k}.csv"));
            fs::write(&path, points_to_csv(&layer.weights))
                .map_err(|e| io_failure(&path.display().to_string(), e))?;
        }
    }

    let summary = demo_summary(&report);
    eprint!("{summary}");
    Ok(Output::ok(match format {
        Format::Md => summary,
        _ => to_json(&report)?,
    }))
}

fn run(cli: &Cli) -> Result<Output, Failure> {
    match &cli.command {
        Command::Solve(a) => run_solve(a, cli),
        Command::Simplex(a) => run_simplex(a, cli),
        Command::Bench(a) => run_bench(a, cli),
        Command::Gradcurve(a) => run_gradcurve(a, cli),
        Command::Analyze(a) => run_analyze(a, cli),
        Command::Demo(a) => run_demo(a, cli),
    }
}

fn write_output(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| io_failure(&p.display().to_string(), e)),
        None => {
            let mut stdout = io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| io_failure("stdout", e))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };

    let result = run(&cli).and_then(|output| {
        write_output(cli.out.as_deref(), &output.text)?;
        Ok(output.failed)
    });
    match result {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(2),
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
