//! `polaris list` / `polaris analyze`.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand};
use polaris_core::analysis::{self, parse_checks, Check, Settings};
use polaris_core::catalog::{self, System};
use polaris_core::model::{load_model_file, LoadedModel};
use polaris_core::report::{self, AnalysisReport, SuiteReport};
use polaris_core::Tolerances;

#[derive(Parser)]
#[command(name = "polaris", version, about = "Polarity and variational completeness checks for isometric actions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the built-in catalog.
    List {
        #[arg(long)]
        json: bool,
    },
    /// Run checks on a catalog entry, a model file, or the whole catalog.
    Analyze(AnalyzeArgs),
}

#[derive(Args)]
#[command(group(ArgGroup::new("target").required(true).args(["entry", "model", "all"])))]
#[command(group(ArgGroup::new("format").args(["json", "text"])))]
struct AnalyzeArgs {
    /// Catalog entry name.
    #[arg(long)]
    entry: Option<String>,
    /// Model JSON document.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Every catalog entry, judged against its expected values.
    #[arg(long)]
    all: bool,
    /// Comma-separated check ids, or `all`.
    #[arg(long, default_value = "all")]
    checks: String,
    #[arg(long, env = "POLARIS_SEED", default_value_t = 0)]
    seed: u64,
    /// Residual tolerance of the exact tests.
    #[arg(long)]
    tol: Option<f64>,
    /// Grid step along geodesics.
    #[arg(long, default_value_t = 1e-3)]
    step: f64,
    /// Judge a single entry against its expected values.
    #[arg(long)]
    expected: bool,
    #[arg(long)]
    json: bool,
    #[arg(long)]
    text: bool,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn usage(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("polaris: {msg}");
    ExitCode::from(2)
}

fn emit(doc: &str, out: Option<&PathBuf>) -> Result<(), String> {
    match out {
        Some(path) => std::fs::write(path, doc).map_err(|e| format!("cannot write {}: {e}", path.display())),
        None => std::io::stdout().write_all(doc.as_bytes()).map_err(|e| e.to_string()),
    }
}

fn list(json: bool) -> ExitCode {
    let entries = catalog::catalog_list();
    let doc = if json {
        report::to_json(&entries)
    } else {
        entries
            .iter()
            .map(|e| format!("{:<20} {:<24} {}\n", e.name, serde_json::to_value(e.kind).unwrap().as_str().unwrap_or(""), e.description))
            .collect()
    };
    match emit(&doc, None) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => usage(e),
    }
}

fn analyze(args: AnalyzeArgs) -> ExitCode {
    let checks: Vec<Check> = match parse_checks(&args.checks) {
        Ok(c) => c,
        Err(e) => return usage(e),
    };
    if !(args.step > 0.0 && args.step <= 1e-2) {
        return usage(format!("--step must lie in (0, 1e-2], got {}", args.step));
    }
    let mut tol = Tolerances::default();
    if let Some(t) = args.tol {
        if !(t > 0.0 && t.is_finite()) {
            return usage(format!("--tol must be positive, got {t}"));
        }
        tol.residual = t;
    }
    let settings = Settings { seed: args.seed, tol, step: args.step, use_expected: args.expected };

    let (reports, doc) = if args.all {
        let suite = analysis::run_suite(&checks, &settings);
        let doc = if args.text { report::to_text(&suite.reports) } else { report::to_json(&suite) };
        (suite.reports, doc)
    } else {
        let r = if let Some(name) = &args.entry {
            let Some(entry) = catalog::entry(name) else {
                return usage(format!("no catalog entry `{name}` (see `polaris list`)"));
            };
            analysis::analyze_entry(&entry, &checks, &settings)
        } else {
            let path = args.model.as_ref().expect("clap enforces a target");
            let system: System = match load_model_file(path) {
                Ok(LoadedModel::System(s)) => s,
                Ok(LoadedModel::Algebra(a)) => {
                    eprintln!("polaris: {} is a Lie algebra of dimension {}; nothing to analyze", path.display(), a.dim());
                    let r = AnalysisReport::new(path.display().to_string(), Vec::new());
                    return finish(&[r.clone()], &render(&r, args.text), args.out.as_ref());
                }
                Err(e) => return usage(e),
            };
            analysis::analyze(&path.display().to_string(), &system, &checks, &settings, &[])
        };
        let doc = render(&r, args.text);
        (vec![r], doc)
    };
    finish(&reports, &doc, args.out.as_ref())
}

fn render(r: &AnalysisReport, text: bool) -> String {
    if text {
        report::to_text(std::slice::from_ref(r))
    } else {
        report::to_json(r)
    }
}

fn finish(reports: &[AnalysisReport], doc: &str, out: Option<&PathBuf>) -> ExitCode {
    if let Err(e) = emit(doc, out) {
        return usage(e);
    }
    if SuiteReport::new(0, reports.to_vec()).passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli.command {
        Command::List { json } => list(json),
        Command::Analyze(args) => analyze(args),
    }
}
