use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use subtree_core::bench::run_bench;
use subtree_core::dissim::parse_matrix_with;
use subtree_core::{
    audit_minimality, check_extended_four_point, generate_instance, reconstruct_subtree_distance,
    verify_distances, DissimilarityMatrix, MatrixFormat, Representation, Tolerance, Weights,
};

const EXIT_OK: u8 = 0;
const EXIT_USAGE: u8 = 1;
const EXIT_REJECT: u8 = 2;
const EXIT_DISAGREE: u8 = 3;

/// Reconstruct and recognize subtree distances.
#[derive(Parser, Debug)]
#[command(name = "subtree", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Reconstruct the minimal representation of a matrix.
    Reconstruct(ReconstructArgs),
    /// Decide whether a matrix is a subtree distance.
    Check(CheckArgs),
    /// Generate a random instance and its ground truth.
    Gen(GenArgs),
    /// Check a representation against a matrix.
    Verify(VerifyArgs),
    /// Time the reconstruction on synthetic instances.
    Bench(BenchArgs),
}

#[derive(Args, Debug)]
struct MatrixArgs {
    /// Matrix file (CSV, TSV or square PHYLIP).
    matrix: PathBuf,
    /// Input format; guessed from the extension when omitted.
    #[arg(long)]
    format: Option<String>,
    /// Tolerance as `rel` or `rel,abs`, or `exact` for τ = 0.
    #[arg(long, env = "SUBTREE_TOL")]
    tol: Option<String>,
}

impl MatrixArgs {
    fn tolerance(&self) -> Result<Tolerance> {
        match self.tol.as_deref() {
            None => Ok(Tolerance::default()),
            Some("exact") => Ok(Tolerance::EXACT),
            Some(s) => s
                .parse()
                .with_context(|| format!("invalid tolerance `{s}`")),
        }
    }

    fn load(&self) -> Result<(DissimilarityMatrix, Tolerance)> {
        let tol = self.tolerance()?;
        let format = match &self.format {
            Some(f) => f.parse()?,
            None => MatrixFormat::from_extension(&self.matrix.to_string_lossy()),
        };
        let text = fs::read_to_string(&self.matrix)
            .with_context(|| format!("cannot read {}", self.matrix.display()))?;
        let d = parse_matrix_with(&text, format, &tol)
            .with_context(|| format!("cannot parse {}", self.matrix.display()))?;
        Ok((d, tol))
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum OutFormat {
    Json,
    Dot,
}

#[derive(Args, Debug)]
struct ReconstructArgs {
    #[command(flatten)]
    input: MatrixArgs,
    /// Output format for the representation.
    #[arg(long, value_enum, default_value_t = OutFormat::Json)]
    out: OutFormat,
    /// Write the representation here instead of stdout.
    #[arg(short = 'o', long = "output")]
    output: Option<PathBuf>,
    /// Write the recognition report here.
    #[arg(long)]
    report_path: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum Method {
    Ext4pc,
    Pipeline,
    Both,
}

#[derive(Args, Debug)]
struct CheckArgs {
    #[command(flatten)]
    input: MatrixArgs,
    #[arg(long, value_enum, default_value_t = Method::Both)]
    method: Method,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    vertices: usize,
    #[arg(long, default_value_t = 10)]
    objects: usize,
    #[arg(long, default_value_t = 0.5)]
    singleton_fraction: f64,
    /// Edge weights as `lo:hi` (uniform reals) or `int:hi` (integers 1..=hi).
    #[arg(long, default_value = "1:10")]
    weights: String,
    /// Writes `<prefix>.csv` and `<prefix>.rep.json`.
    #[arg(long, default_value = "instance")]
    out_prefix: PathBuf,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[command(flatten)]
    input: MatrixArgs,
    /// Representation JSON.
    representation: PathBuf,
    /// Skip the minimality audit.
    #[arg(long)]
    no_minimality: bool,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Comma-separated object counts.
    #[arg(long, value_delimiter = ',', default_values_t = [500usize, 1000, 2000])]
    sizes: Vec<usize>,
    /// Seeds per size; the median time is reported.
    #[arg(long, default_value_t = 3)]
    seeds: u64,
    /// Write `size,median_seconds` rows here instead of stdout.
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => {
            println!("{}", text.trim_end());
            Ok(())
        }
    }
}

fn cmd_reconstruct(args: &ReconstructArgs) -> Result<u8> {
    let (d, tol) = args.input.load()?;
    let outcome = reconstruct_subtree_distance(&d, &tol);
    let report = outcome.report.to_json();
    match outcome.representation {
        Some(rep) => {
            let text = match args.out {
                OutFormat::Json => rep.to_json(),
                OutFormat::Dot => rep.to_dot(),
            };
            write_or_print(args.output.as_deref(), &text)?;
            if let Some(p) = &args.report_path {
                write_or_print(Some(p), &report)?;
            }
            Ok(EXIT_OK)
        }
        None => {
            let stage = outcome.report.stage.map_or("unknown", |s| s.as_str());
            eprintln!("rejected at stage {stage}");
            write_or_print(args.report_path.as_deref(), &report)?;
            Ok(EXIT_REJECT)
        }
    }
}

fn cmd_check(args: &CheckArgs) -> Result<u8> {
    let (d, tol) = args.input.load()?;
    let mut verdicts = Vec::new();
    if args.method != Method::Pipeline {
        let violation = check_extended_four_point(&d, &tol);
        match &violation {
            None => println!("ext4pc: accept"),
            Some(v) => println!("ext4pc: reject ({v})"),
        }
        verdicts.push(violation.is_none());
    }
    if args.method != Method::Ext4pc {
        let out = reconstruct_subtree_distance(&d, &tol);
        if out.report.accepted {
            println!("pipeline: accept");
        } else {
            let stage = out.report.stage.map_or("unknown", |s| s.as_str());
            let why = out
                .report
                .witness
                .as_ref()
                .and_then(|w| w["error"].as_str())
                .unwrap_or("");
            println!("pipeline: reject at stage {stage} ({why})");
        }
        verdicts.push(out.report.accepted);
    }
    if verdicts.windows(2).any(|w| w[0] != w[1]) {
        eprintln!("internal error: the extended four-point check and the pipeline disagree");
        return Ok(EXIT_DISAGREE);
    }
    Ok(if verdicts[0] { EXIT_OK } else { EXIT_REJECT })
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn cmd_gen(args: &GenArgs) -> Result<u8> {
    let weights: Weights = args.weights.parse()?;
    let (d, rep) = generate_instance(
        args.seed,
        args.vertices,
        args.objects,
        args.singleton_fraction,
        weights,
    )?;
    let matrix_path = with_suffix(&args.out_prefix, ".csv");
    let rep_path = with_suffix(&args.out_prefix, ".rep.json");
    write_or_print(Some(&matrix_path), &d.to_text(MatrixFormat::Csv))?;
    write_or_print(Some(&rep_path), &rep.to_json())?;
    eprintln!("wrote {} and {}", matrix_path.display(), rep_path.display());
    Ok(EXIT_OK)
}

fn cmd_verify(args: &VerifyArgs) -> Result<u8> {
    let (d, tol) = args.input.load()?;
    let text = fs::read_to_string(&args.representation)
        .with_context(|| format!("cannot read {}", args.representation.display()))?;
    let rep = Representation::from_json(&text)
        .with_context(|| format!("cannot parse {}", args.representation.display()))?;
    let mismatches = verify_distances(&rep, &d, &tol)?;
    for m in &mismatches {
        println!("mismatch: {m}");
    }
    let defects = if args.no_minimality {
        Vec::new()
    } else {
        audit_minimality(&rep, tol.scale(&d))
    };
    for defect in &defects {
        println!("defect: {defect}");
    }
    if mismatches.is_empty() && defects.is_empty() {
        println!("ok");
        Ok(EXIT_OK)
    } else {
        Ok(EXIT_REJECT)
    }
}

fn cmd_bench(args: &BenchArgs) -> Result<u8> {
    if args.sizes.is_empty() {
        bail!("no sizes given");
    }
    let rows = run_bench(&args.sizes, args.seeds)?;
    let mut csv = String::from("size,median_seconds\n");
    for (n, t) in &rows {
        csv.push_str(&format!("{n},{t:.6}\n"));
    }
    for pair in rows.windows(2) {
        let ((n1, t1), (n2, t2)) = (pair[0], pair[1]);
        let ratio = t2 / t1;
        let expected = (n2 as f64 / n1 as f64).powi(2);
        eprintln!("time({n2})/time({n1}) = {ratio:.2} (quadratic: {expected:.2})");
        if n2 == 2 * n1 && ratio > 6.0 {
            eprintln!("warning: ratio above 6 for a doubling of n");
        }
    }
    write_or_print(args.csv.as_deref(), &csv)?;
    Ok(EXIT_OK)
}

fn run(cli: &Cli) -> Result<u8> {
    match &cli.command {
        Command::Reconstruct(a) => cmd_reconstruct(a),
        Command::Check(a) => cmd_check(a),
        Command::Gen(a) => cmd_gen(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Bench(a) => cmd_bench(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}
