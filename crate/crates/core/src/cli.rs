//! Command-line front end.
//!
//! Exit codes: 0 success, 1 validation or data error, 2 usage error,
//! 3 non-convergence or misfit under `--strict`.

use std::ffi::OsString;
use std::fs;
use std::io::{IsTerminal, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::catalog::{default_catalog, load_catalog, FactorCatalog};
use crate::engine::CalibrationConfig;
use crate::findings::ValidationError;
use crate::fit::{FitBand, FitClass};
use crate::ingest::{build_coded_matrix, parse_responses, parse_targets, LikertScore, TOP_CATEGORY};
use crate::model::ThresholdVector;
use crate::oracle::{simulate, PersonDistribution, SimulationSpec};
use crate::pipeline::{analyze, PipelineConfig};
use crate::report::{self, Format};
use crate::wright::wright_map_from_report;

pub const NO_COLOR_ENV: &str = "RASCH_ASSESS_NO_COLOR";

#[derive(Debug, Parser)]
#[command(name = "rasch-assess", version, about = "Rasch calibration of success-factor assessments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the factor, response and target files without calibrating.
    Validate(InputArgs),
    /// Run the full pipeline and write the JSON report.
    Calibrate(CalibrateArgs),
    /// Render a stored JSON report.
    Report(ReportArgs),
    /// Write a synthetic responses file drawn from known item logits.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
struct InputArgs {
    /// Factor catalog CSV (`id,group,name`); the built-in catalog when omitted.
    #[arg(long)]
    factors: Option<PathBuf>,
    /// Responses CSV (`respondent_id,factor_id,score`).
    #[arg(long)]
    responses: PathBuf,
    /// Targets CSV (`factor_id,target`).
    #[arg(long)]
    targets: PathBuf,
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    #[command(flatten)]
    inputs: InputArgs,
    /// Convergence tolerance in logits.
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    #[arg(long = "max-iter", default_value_t = 1000)]
    max_iter: usize,
    /// Acceptable mean-square band as `low,high`, or `default` / `strict`.
    #[arg(long = "fit-band", default_value = "0.5,2.0", value_parser = parse_band)]
    fit_band: FitBand,
    /// Exit with code 3 on non-convergence or any misfitting item.
    #[arg(long)]
    strict: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[arg(long)]
    input: PathBuf,
    /// markdown, csv, json, or wright for a text Wright map.
    #[arg(long, default_value = "markdown", value_parser = parse_output_format)]
    format: OutputFormat,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// CSV of `factor_id,logit` giving each factor's true difficulty.
    #[arg(long = "true-logits")]
    true_logits: PathBuf,
    #[arg(long)]
    persons: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    factors: Option<PathBuf>,
    /// Step thresholds, comma separated and summing to zero.
    #[arg(long, default_value = "-1,-0.3,0.3,1", value_parser = parse_thresholds, allow_hyphen_values = true)]
    thresholds: ThresholdVector,
    /// Also write the implied all-5 targets file here.
    #[arg(long = "targets-out")]
    targets_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy)]
enum OutputFormat {
    Table(Format),
    Wright,
}

fn parse_output_format(s: &str) -> Result<OutputFormat, String> {
    if s.eq_ignore_ascii_case("wright") {
        Ok(OutputFormat::Wright)
    } else {
        s.parse().map(OutputFormat::Table)
    }
}

fn parse_band(s: &str) -> Result<FitBand, String> {
    match s {
        "default" => return Ok(FitBand::default()),
        "strict" => return Ok(FitBand::STRICT),
        _ => {}
    }
    let (low, high) = s.split_once(',').ok_or("expected low,high")?;
    let low: f64 = low.trim().parse().map_err(|e| format!("low bound: {e}"))?;
    let high: f64 = high.trim().parse().map_err(|e| format!("high bound: {e}"))?;
    FitBand::new(low, high)
}

fn parse_thresholds(s: &str) -> Result<ThresholdVector, String> {
    let values = s
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    if values.len() != TOP_CATEGORY as usize {
        return Err(format!("expected {TOP_CATEGORY} thresholds, got {}", values.len()));
    }
    ThresholdVector::new(values).map_err(|e| e.to_string())
}

/// ANSI styling for terminal output.
#[derive(Debug, Clone, Copy, Default)]
pub struct Style {
    pub color: bool,
}

impl Style {
    /// Colour only on a terminal and only when the opt-out variable is unset.
    pub fn detect() -> Self {
        Self { color: std::env::var_os(NO_COLOR_ENV).is_none() && std::io::stderr().is_terminal() }
    }

    fn paint(&self, code: &str, text: &str) -> String {
        if self.color {
            format!("\x1b[{code}m{text}\x1b[0m")
        } else {
            text.to_string()
        }
    }

    fn error(&self, text: &str) -> String {
        self.paint("31", text)
    }

    fn warn(&self, text: &str) -> String {
        self.paint("33", text)
    }

    fn ok(&self, text: &str) -> String {
        self.paint("32", text)
    }
}

#[derive(Debug)]
enum Failure {
    /// Exit 1, message already printed.
    Reported,
    /// Exit 1 with this message.
    Data(String),
    /// Exit 3.
    Strict(String),
}

struct Io<'a> {
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
    style: Style,
}

impl Io<'_> {
    // output to a closed pipe is not worth failing over
    fn say(&mut self, text: &str) {
        let _ = writeln!(self.out, "{text}");
    }

    fn complain(&mut self, text: &str) {
        let _ = writeln!(self.err, "{text}");
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Data(format!("cannot read {}: {e}", path.display())))
}

/// Writes through a temporary file in the destination directory and renames
/// it into place, so the destination is never left half-written.
fn write_atomically(path: &Path, contents: &str) -> Result<(), Failure> {
    let fail = |e: std::io::Error| Failure::Data(format!("cannot write {}: {e}", path.display()));
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(fail)?;
    tmp.write_all(contents.as_bytes()).map_err(fail)?;
    tmp.as_file().sync_all().map_err(fail)?;
    tmp.persist(path).map_err(|e| fail(e.error))?;
    Ok(())
}

fn load_factors(path: Option<&Path>) -> Result<FactorCatalog, Failure> {
    match path {
        None => Ok(default_catalog()),
        Some(p) => load_catalog(&read(p)?).map_err(|e| Failure::Data(findings_text(&p.display().to_string(), &e))),
    }
}

fn findings_text(label: &str, err: &ValidationError) -> String {
    let mut text = format!("{label}: {} problem(s)", err.findings.len());
    for f in &err.findings {
        text.push_str(&format!("\n  {f}"));
    }
    text
}

fn validate(args: &InputArgs, io: &mut Io) -> Result<(), Failure> {
    let style = io.style;
    let mut failed = false;
    let catalog = match &args.factors {
        None => {
            let c = default_catalog();
            io.say(&format!("factors: {} ({} factors, built-in catalog)", style.ok("ok"), c.len()));
            c
        }
        Some(p) => match load_catalog(&read(p)?) {
            Ok(c) => {
                io.say(&format!("factors: {} ({} factors)", style.ok("ok"), c.len()));
                c
            }
            Err(e) => {
                io.say(&style.error(&findings_text("factors", &e)));
                io.complain(&format!("{}: cannot check responses and targets without a valid catalog", p.display()));
                return Err(Failure::Reported);
            }
        },
    };

    let responses = parse_responses(&read(&args.responses)?, &catalog);
    match &responses {
        Ok(r) => {
            let answers: usize = r.iter().map(|r| r.answers.len()).sum();
            io.say(&format!("responses: {} ({} respondents, {answers} answers)", style.ok("ok"), r.len()));
        }
        Err(e) => {
            failed = true;
            io.say(&style.error(&findings_text("responses", e)));
        }
    }
    let targets = parse_targets(&read(&args.targets)?, &catalog);
    match &targets {
        Ok(_) => io.say(&format!("targets: {} ({} factors covered)", style.ok("ok"), catalog.len())),
        Err(e) => {
            failed = true;
            io.say(&style.error(&findings_text("targets", e)));
        }
    }

    if let (Ok(records), Ok(profile)) = (&responses, &targets) {
        match build_coded_matrix(records, profile, &catalog) {
            Ok(m) => io.say(&format!(
                "matrix: {} ({} persons x {} items, {} missing cells, {} extreme persons, {} extreme items)",
                style.ok("ok"),
                m.n_persons(),
                m.n_items(),
                m.missing_count(),
                m.n_persons() - m.non_extreme_persons(),
                m.n_items() - m.non_extreme_items()
            )),
            Err(e) => {
                failed = true;
                io.say(&style.error(&format!("matrix: {e}")));
            }
        }
    }
    if failed {
        Err(Failure::Reported)
    } else {
        Ok(())
    }
}

fn calibrate(args: &CalibrateArgs, io: &mut Io) -> Result<(), Failure> {
    let catalog = load_factors(args.inputs.factors.as_deref())?;
    let records = parse_responses(&read(&args.inputs.responses)?, &catalog)
        .map_err(|e| Failure::Data(findings_text(&args.inputs.responses.display().to_string(), &e)))?;
    let targets = parse_targets(&read(&args.inputs.targets)?, &catalog)
        .map_err(|e| Failure::Data(findings_text(&args.inputs.targets.display().to_string(), &e)))?;
    let config = PipelineConfig {
        calibration: CalibrationConfig { tolerance: args.tol, max_iterations: args.max_iter, ..Default::default() },
        fit_band: args.fit_band,
    };
    let analysis = analyze(&catalog, &records, &targets, &config).map_err(|e| Failure::Data(e.to_string()))?;
    let report = &analysis.report;
    write_atomically(&args.out, &report::render(report, Format::Json))?;

    for w in &report.meta.warnings {
        let line = io.style.warn(&format!("warning: {w}"));
        io.complain(&line);
    }
    let misfits: Vec<&str> = report
        .items
        .iter()
        .filter(|r| r.fit_flag == Some(FitClass::Misfit))
        .map(|r| r.factor_id.as_str())
        .collect();
    io.say(&format!(
        "calibrated {} items from {} persons in {} sweeps ({})",
        report.items.len(),
        analysis.coded.n_persons(),
        report.meta.iterations,
        if report.meta.converged { "converged" } else { "not converged" }
    ));
    if !misfits.is_empty() {
        io.say(&format!("misfitting items: {}", misfits.join(", ")));
    }
    io.say(&format!("wrote {}", args.out.display()));

    if args.strict {
        if !report.meta.converged {
            return Err(Failure::Strict(format!("no convergence within {} sweeps", report.meta.max_iterations)));
        }
        if !misfits.is_empty() {
            return Err(Failure::Strict(format!("{} item(s) misfit the model", misfits.len())));
        }
    }
    Ok(())
}

fn report_cmd(args: &ReportArgs, io: &mut Io) -> Result<(), Failure> {
    let text = read(&args.input)?;
    let parsed = report::from_json(&text)
        .map_err(|e| Failure::Data(format!("{} is not a calibration report: {e}", args.input.display())))?;
    let rendered = match args.format {
        OutputFormat::Table(f) => report::render(&parsed, f),
        OutputFormat::Wright => wright_map_from_report(&parsed),
    };
    let _ = io.out.write_all(rendered.as_bytes());
    Ok(())
}

fn simulate_cmd(args: &SimulateArgs, io: &mut Io) -> Result<(), Failure> {
    let catalog = load_factors(args.factors.as_deref())?;
    let source = read(&args.true_logits)?;
    let label = args.true_logits.display().to_string();

    let mut reader = csv::ReaderBuilder::new().from_reader(source.as_bytes());
    let header_ok = reader.headers().map(|h| h.iter().map(str::trim).eq(["factor_id", "logit"])).unwrap_or(false);
    if !header_ok {
        return Err(Failure::Data(format!("{label}: expected header factor_id,logit")));
    }
    let mut logits: Vec<Option<f64>> = vec![None; catalog.len()];
    let mut problems = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| Failure::Data(format!("{label}: {e}")))?;
        let line = row.position().map_or(0, |p| p.line());
        let id = row.get(0).unwrap_or("").trim();
        let Some(pos) = catalog.position(id) else {
            problems.push(format!("line {line}: unknown factor id {id:?}"));
            continue;
        };
        match row.get(1).unwrap_or("").trim().parse::<f64>() {
            Ok(v) if v.is_finite() => logits[pos] = Some(v),
            _ => problems.push(format!("line {line}: logit is not a finite number")),
        }
    }
    let missing: Vec<&str> =
        catalog.iter().zip(&logits).filter(|(_, l)| l.is_none()).map(|(f, _)| f.id.as_str()).collect();
    if !missing.is_empty() {
        problems.push(format!("no logit for factors: {}", missing.join(", ")));
    }
    if !problems.is_empty() {
        return Err(Failure::Data(format!("{label}:\n  {}", problems.join("\n  "))));
    }
    if args.persons == 0 {
        return Err(Failure::Data("--persons must be at least 1".into()));
    }

    let spec = SimulationSpec {
        item_difficulties: logits.into_iter().flatten().collect(),
        persons: PersonDistribution::Uniform { count: args.persons, low: -2.0, high: 2.0 },
        thresholds: args.thresholds.clone(),
        seed: args.seed,
        item_ids: Some(catalog.ids().map(str::to_string).collect()),
    };
    // simulated categories are attainment levels; with every target at 5 the
    // score is one above the category
    let matrix = simulate(&spec);
    let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let write_err = |e: csv::Error| Failure::Data(format!("cannot format responses: {e}"));
    writer.write_record(["respondent_id", "factor_id", "score"]).map_err(write_err)?;
    for n in 0..matrix.n_persons() {
        for (i, factor) in matrix.item_ids().iter().enumerate() {
            let attainment = matrix.get(n, i).expect("simulated matrices are complete");
            let score = (attainment + 1).to_string();
            writer.write_record([matrix.person_ids()[n].as_str(), factor.as_str(), score.as_str()]).map_err(write_err)?;
        }
    }
    let body = String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("csv output is utf-8");
    write_atomically(&args.out, &body)?;
    io.say(&format!("wrote {} responses from {} simulated persons to {}", matrix.cells().len(), args.persons, args.out.display()));

    if let Some(path) = &args.targets_out {
        let top = LikertScore::new(LikertScore::MAX).expect("5 is a Likert score");
        let mut body = String::from("factor_id,target\n");
        for id in catalog.ids() {
            body.push_str(&format!("{id},{top}\n"));
        }
        write_atomically(path, &body)?;
        io.say(&format!("wrote targets to {}", path.display()));
    }
    Ok(())
}

/// Runs one invocation with plain (uncoloured) output.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_styled(args, out, err, Style::default())
}

pub fn run_styled<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write, style: Style) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    0
                }
                _ => {
                    let _ = write!(err, "{}", e.render());
                    2
                }
            };
        }
    };
    let mut io = Io { out, err, style };
    let outcome = match &cli.command {
        Command::Validate(a) => validate(a, &mut io),
        Command::Calibrate(a) => calibrate(a, &mut io),
        Command::Report(a) => report_cmd(a, &mut io),
        Command::Simulate(a) => simulate_cmd(a, &mut io),
    };
    match outcome {
        Ok(()) => 0,
        Err(Failure::Reported) => 1,
        Err(Failure::Data(msg)) => {
            let line = style.error(&format!("error: {msg}"));
            io.complain(&line);
            1
        }
        Err(Failure::Strict(msg)) => {
            let line = style.error(&format!("strict: {msg}"));
            io.complain(&line);
            3
        }
    }
}

/// Entry point for the binary.
pub fn main_exit_code() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_styled(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock(), Style::detect())
}
