mod commands;
mod dataset;
mod sweep;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tablewright::mapping::{KeyStyle, Population};
use tablewright::preset::Preset;
use tablewright::report::Profile;
use tablewright::Variant;

/// Input that fails validation outside the core library (CSV shape, flags).
#[derive(Debug)]
pub struct Invalid(pub String);

impl fmt::Display for Invalid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

const EXIT_VALIDATION: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_BUDGET: u8 = 4;

#[derive(Parser)]
#[command(name = "tablewright", version, about = "Compile trained models into match/action pipeline programs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a model into program.json, entries.json, model.p4 and report.json.
    Convert(ConvertArgs),
    /// Run a program over a CSV dataset and write one prediction per row.
    Simulate(SimulateArgs),
    /// Score a program against its model on a CSV dataset.
    Compare(CompareArgs),
    /// Convert generated models across one axis and tabulate resources and fidelity.
    Sweep(sweep::SweepArgs),
}

/// Action-data precision: a bit count or `full`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bits(pub Option<u32>);

impl std::str::FromStr for Bits {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "full" {
            return Ok(Bits(None));
        }
        match s.parse::<u32>() {
            Ok(n) if (1..=64).contains(&n) => Ok(Bits(Some(n))),
            _ => Err(format!("expected a bit count in 1..=64 or `full`, got {s:?}")),
        }
    }
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    s.parse().map_err(|e: tablewright::Error| e.to_string())
}

fn parse_preset(s: &str) -> Result<Preset, String> {
    s.parse().map_err(|e: tablewright::Error| e.to_string())
}

fn parse_mode(s: &str) -> Result<Population, String> {
    s.parse().map_err(|e: tablewright::Error| e.to_string())
}

fn parse_profile(s: &str) -> Result<Profile, String> {
    s.parse().map_err(|e: tablewright::Error| e.to_string())
}

fn parse_keys(s: &str) -> Result<KeyStyle, String> {
    match s {
        "ternary" => Ok(KeyStyle::Ternary),
        "lpm" => Ok(KeyStyle::Lpm),
        "exact" => Ok(KeyStyle::Exact),
        _ => Err(format!("expected ternary, lpm or exact, got {s:?}")),
    }
}

/// Conversion knobs shared by convert and sweep.
#[derive(Args, Debug, Clone)]
pub struct MappingArgs {
    /// eb, lb or dm; defaults to the family's first supported variant.
    #[arg(long, value_parser = parse_variant)]
    variant: Option<Variant>,
    /// Action-data bits for lookup-based words, or `full`.
    #[arg(long)]
    bits: Option<Bits>,
    /// Quadtree depth limit for kmeans and knn.
    #[arg(long)]
    depth: Option<u32>,
    /// Size preset (S, M, L or H); sets bits and quadtree depth.
    #[arg(long, value_parser = parse_preset)]
    preset: Option<Preset>,
    /// Table population for lookup-based tables: auto, full-domain or unique.
    #[arg(long, value_parser = parse_mode)]
    mode: Option<Population>,
    /// Match kind for encode-based tables: ternary, lpm or exact.
    #[arg(long, value_parser = parse_keys)]
    keys: Option<KeyStyle>,
    /// Resource limits checked by the report: software or hardware.
    #[arg(long, value_parser = parse_profile, default_value = "software")]
    profile: Profile,
}

#[derive(Args)]
struct ConvertArgs {
    /// Model document.
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    mapping: MappingArgs,
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    /// Program document written by convert.
    #[arg(long)]
    program: PathBuf,
    /// Entries document to install over the program's own entries.
    #[arg(long)]
    entries: Option<PathBuf>,
    /// Input CSV.
    #[arg(long)]
    data: PathBuf,
    /// Predictions CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    program: PathBuf,
    #[arg(long)]
    entries: Option<PathBuf>,
    #[arg(long)]
    data: PathBuf,
    /// Report JSON; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<tablewright::Error>() {
            return if e.is_budget() { EXIT_BUDGET } else { EXIT_VALIDATION };
        }
        if cause.is::<Invalid>() {
            return EXIT_VALIDATION;
        }
        if let Some(e) = cause.downcast_ref::<csv::Error>() {
            return if e.is_io_error() { EXIT_IO } else { EXIT_VALIDATION };
        }
        if cause.is::<std::io::Error>() {
            return EXIT_IO;
        }
        if cause.is::<serde_json::Error>() {
            return EXIT_VALIDATION;
        }
    }
    EXIT_VALIDATION
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("TABLEWRIGHT_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Convert(a) => commands::convert(&a.model, &a.mapping, &a.out),
        Command::Simulate(a) => commands::simulate(&a.program, a.entries.as_deref(), &a.data, a.out.as_deref()),
        Command::Compare(a) => {
            commands::compare(&a.model, &a.program, a.entries.as_deref(), &a.data, a.out.as_deref())
        }
        Command::Sweep(a) => sweep::run(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
