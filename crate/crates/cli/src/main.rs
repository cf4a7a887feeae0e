mod commands;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use relcert::pairwise::GraphMode;
use relcert::reductions::BitMode;
use relcert::{Limits, TargetKind};

#[derive(Parser)]
#[command(name = "relcert", version, about = "Exact relevance certification for finite decision problems")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Largest state count any enumeration may visit.
    #[arg(long, global = true, default_value_t = 1 << 20, value_parser = clap::value_parser!(u64).range(1..))]
    budget: u64,
    /// Largest dimension for full subset scans; above it subsets are sampled.
    #[arg(long, global = true, default_value_t = 10)]
    subset_cap: usize,
    /// Seed for every randomized step (default 0).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Human)]
    format: Format,
    /// Also write the machine-readable output to this file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Human,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Quotient, relevant set, minimal sufficient set and rank of a problem or slice.
    Analyze { file: PathBuf },
    /// Build the orbit-gap witness bundle of a built-in target.
    Witness {
        #[arg(value_parser = parse_kind)]
        kind: TargetKind,
        n: usize,
    },
    /// Re-check every invariant of a witness bundle.
    Verify { file: PathBuf },
    /// Interaction graph of a slice in DOT.
    Graph {
        file: PathBuf,
        #[arg(long, default_value = "raw", value_parser = parse_mode)]
        mode: GraphMode,
    },
    /// Apply a closure trace and check invariance.
    Transform { file: PathBuf, trace: PathBuf },
    /// Reductions: induced problems, profile compression, bit presentations.
    #[command(subcommand)]
    Reduce(Reduce),
    /// Perturbation certificate for a pair of problems.
    Stability {
        base: PathBuf,
        perturbed: PathBuf,
        /// Relevance or non-sufficiency witness to test for preservation.
        #[arg(long)]
        witness: Option<PathBuf>,
        /// Skip the brute-force cross-check of a certified verdict.
        #[arg(long)]
        no_verify: bool,
    },
    /// Evaluate a target (built-in name or scheme file) on a slice.
    Classify { target: String, slice: PathBuf },
    /// Search for an orbit gap of a target (built-in name or scheme file).
    Falsify {
        target: String,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// The family table, optionally with detector hits for an instance.
    Taxonomy {
        #[arg(long)]
        detect: Option<PathBuf>,
        /// Bound used by the bounded detectors.
        #[arg(long, default_value_t = 2)]
        k: usize,
    },
}

#[derive(Subcommand)]
enum Reduce {
    /// Decision problem induced by an admissibility specification.
    Induce { spec: PathBuf },
    /// Merge actions with identical utility profiles.
    Compress { file: PathBuf },
    /// Boolean presentation of a problem.
    Bits {
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = Bits::BinaryIndex)]
        mode: Bits,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Bits {
    Indicator,
    BinaryIndex,
}

fn parse_kind(s: &str) -> Result<TargetKind, String> {
    s.parse().map_err(|e: relcert::Error| e.to_string())
}

fn parse_mode(s: &str) -> Result<GraphMode, String> {
    s.parse().map_err(|e: relcert::Error| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let g = &cli.global;
    let limits = Limits {
        max_states: usize::try_from(g.budget).unwrap_or(usize::MAX),
        subset_cap: g.subset_cap,
        self_check: false,
    };
    let (name, outcome) = run(&cli.command, &limits, g.seed);
    let report = match outcome {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let json = serde_json::to_string_pretty(&io::Envelope {
        version: io::VERSION,
        command: name,
        seed: report.seed.or(g.seed).unwrap_or(0),
        result: &report.result,
    })
    .expect("reports serialize")
        + "\n";
    match g.format {
        Format::Json => print!("{json}"),
        Format::Human => print!("{}", report.human),
    }
    if let Some(path) = &g.out {
        if let Err(e) = io::write(path, &json) {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    }
    match report.failure {
        Some(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
        None => ExitCode::SUCCESS,
    }
}

fn run(cmd: &Command, limits: &Limits, seed: Option<u64>) -> (&'static str, relcert::Result<commands::Report>) {
    match cmd {
        Command::Analyze { file } => ("analyze", commands::analyze(file, limits)),
        Command::Witness { kind, n } => ("witness", commands::witness(*kind, *n, limits)),
        Command::Verify { file } => ("verify", commands::verify(file, limits)),
        Command::Graph { file, mode } => ("graph", commands::graph(file, *mode, limits)),
        Command::Transform { file, trace } => ("transform", commands::transform(file, trace, limits)),
        Command::Reduce(Reduce::Induce { spec }) => ("reduce induce", commands::induce(spec, limits)),
        Command::Reduce(Reduce::Compress { file }) => ("reduce compress", commands::compress(file, limits)),
        Command::Reduce(Reduce::Bits { file, mode }) => {
            let mode = match mode {
                Bits::Indicator => BitMode::Indicator,
                Bits::BinaryIndex => BitMode::BinaryIndex,
            };
            ("reduce bits", commands::bits(file, mode, limits))
        }
        Command::Stability { base, perturbed, witness, no_verify } => (
            "stability",
            commands::stability(base, perturbed, witness.as_deref(), !no_verify, limits),
        ),
        Command::Classify { target, slice } => ("classify", commands::classify(target, slice)),
        Command::Falsify { target, config } => ("falsify", commands::falsify(target, config.as_deref(), seed, limits)),
        Command::Taxonomy { detect, k } => ("taxonomy", commands::taxonomy(detect.as_deref(), *k, limits)),
    }
}
