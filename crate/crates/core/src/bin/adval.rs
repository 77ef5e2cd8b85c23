use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use toml::{Table, Value};

use adval::report::{compare, run, Method, Report, RunConfig, OUTPUT_DIR_ENV};
use adval::synthgen::DriftSpec;
use adval::trees::LearnerKind;
use adval::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_RUNTIME: u8 = 4;

#[derive(Parser)]
#[command(name = "adval", version, about = "Adversarial validation for train/test drift")]
struct Cli {
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Adversarial AUC and drift verdict.
    Detect(RunArgs),
    /// Automated removal of drifting features.
    Features(RunArgs),
    /// Propensity-matched validation split.
    Validation(RunArgs),
    /// Inverse propensity weights.
    Ipw(RunArgs),
    /// Repeated runs scoring every adaptation on labeled test snapshots.
    Experiment(RunArgs),
    /// Generate a synthetic train/test pair with known drift.
    Synth(SynthArgs),
    /// Tabulate several reports side by side.
    Compare(CompareArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML run config; its values take precedence over flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    train: Option<PathBuf>,
    /// Test snapshot CSV; repeat for several.
    #[arg(long)]
    test: Vec<PathBuf>,
    /// Label-only CSV for each --test, in the same order.
    #[arg(long)]
    test_labels: Vec<PathBuf>,
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Outcome column name.
    #[arg(long)]
    label: Option<String>,
    /// Dataset name shown in reports.
    #[arg(long)]
    name: Option<String>,
    /// Root of AutoML3-style data (`<root>/<dataset>/train.csv, test1.csv, ...`).
    #[arg(long, env = "ADVAL_AUTOML3_DIR", requires = "dataset")]
    automl3_dir: Option<PathBuf>,
    /// Dataset directory under --automl3-dir.
    #[arg(long)]
    dataset: Option<String>,
    /// Adversarial learner: dt, rf or gbdt.
    #[arg(long)]
    learner: Option<LearnerKind>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    theta_auc: Option<f64>,
    #[arg(long)]
    folds: Option<usize>,
    /// Report file; defaults to $ADVAL_OUTPUT_DIR/<dataset>-<method>.json.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Generator spec (TOML). Without it a Gaussian spec is built from the flags below.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, default_value_t = 5000)]
    n_train: usize,
    #[arg(long, default_value_t = 5000)]
    n_test: usize,
    #[arg(long, short = 'd', default_value_t = 10)]
    features: usize,
    /// Test-side mean shift as FEATURE=DELTA; repeatable.
    #[arg(long, value_parser = parse_shift)]
    shift: Vec<(String, f64)>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory; defaults to $ADVAL_OUTPUT_DIR/synth.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(required = true)]
    reports: Vec<PathBuf>,
    /// Write the comparison as JSON here.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

fn parse_shift(s: &str) -> Result<(String, f64), String> {
    let (name, delta) = s.split_once('=').ok_or("expected FEATURE=DELTA")?;
    let delta = delta.parse().map_err(|e| format!("bad shift `{delta}`: {e}"))?;
    Ok((name.to_string(), delta))
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidParameter(_) => EXIT_CONFIG,
        Error::Io { .. }
        | Error::Csv(_)
        | Error::RaggedRow { .. }
        | Error::BadNumber { .. }
        | Error::SchemaMismatch(_)
        | Error::ColumnMismatch(_)
        | Error::NoModelableColumns
        | Error::NonBinaryLabel { .. }
        | Error::FeatureMismatch(_)
        | Error::EmptyData(_)
        | Error::LengthMismatch(_)
        | Error::SingleClass => EXIT_DATA,
        _ => EXIT_RUNTIME,
    }
}

fn path_value(p: &Path) -> Value {
    Value::String(p.to_string_lossy().into_owned())
}

/// Flags as a TOML table, so a config file can be layered over them.
fn flag_table(a: &RunArgs) -> Result<Table, Error> {
    let mut base = RunConfig::default();
    if let Some(root) = &a.automl3_dir {
        base = base.with_automl3(root, a.dataset.as_deref().expect("clap requires it"))?;
    }
    let mut t: Table = Table::try_from(&base).map_err(|e| Error::Config(e.to_string()))?;
    let data = t.entry("data").or_insert_with(|| Value::Table(Table::new()));
    let data = data.as_table_mut().expect("data is a table");
    if let Some(p) = &a.train {
        data.insert("train".into(), path_value(p));
    }
    if !a.test.is_empty() {
        data.insert("test".into(), Value::Array(a.test.iter().map(|p| path_value(p)).collect()));
    }
    if !a.test_labels.is_empty() {
        data.insert("test_labels".into(), Value::Array(a.test_labels.iter().map(|p| path_value(p)).collect()));
    }
    if let Some(p) = &a.schema {
        data.insert("schema".into(), path_value(p));
    }
    if let Some(l) = &a.label {
        data.insert("label".into(), Value::String(l.clone()));
    }
    if let Some(n) = &a.name {
        data.insert("name".into(), Value::String(n.clone()));
    }
    if let Some(k) = a.learner {
        let adv = t.entry("adversarial").or_insert_with(|| Value::Table(Table::new()));
        adv.as_table_mut().expect("table").insert("kind".into(), Value::String(k.to_string()));
    }
    if let Some(s) = a.seed {
        t.insert("seed".into(), Value::Integer(s as i64));
    }
    if let Some(n) = a.runs {
        t.insert("n_runs".into(), Value::Integer(n as i64));
    }
    if let Some(x) = a.theta_auc {
        t.insert("theta_auc".into(), Value::Float(x));
    }
    if let Some(k) = a.folds {
        t.insert("folds".into(), Value::Integer(k as i64));
    }
    if let Some(p) = &a.output {
        t.insert("output".into(), path_value(p));
    }
    Ok(t)
}

fn merge(into: &mut Table, over: Table) {
    for (k, v) in over {
        match (into.get_mut(&k), v) {
            (Some(Value::Table(a)), Value::Table(b)) => merge(a, b),
            (_, v) => {
                into.insert(k, v);
            }
        }
    }
}

fn build_config(method: Method, a: &RunArgs) -> Result<RunConfig, Error> {
    let mut table = flag_table(a)?;
    if let Some(path) = &a.config {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })?;
        // round-trip through the typed config to resolve paths against the file
        let file = RunConfig::from_toml_str(&text, path.parent())?;
        let mut file_table: Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let resolved: Table = Table::try_from(&file).map_err(|e| Error::Config(e.to_string()))?;
        if let Some(Value::Table(d)) = file_table.get_mut("data") {
            for key in ["train", "test", "test_labels", "schema"] {
                if d.contains_key(key) {
                    d.insert(key.into(), resolved["data"][key].clone());
                }
            }
        }
        if file_table.contains_key("output") {
            file_table.insert("output".into(), resolved["output"].clone());
        }
        merge(&mut table, file_table);
    }
    table.insert("method".into(), Value::String(method.as_str().into()));
    let cfg: RunConfig = table.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    Ok(cfg)
}

fn run_method(method: Method, a: &RunArgs) -> Result<(), Error> {
    let cfg = build_config(method, a)?;
    let report = run(&cfg)?;
    print!("{}", report.summary_text());
    match cfg.report_path(&report.dataset) {
        Some(p) => {
            report.save(&p)?;
            println!("report: {}", p.display());
        }
        None => eprintln!("no report file written; pass --output or set {OUTPUT_DIR_ENV}"),
    }
    Ok(())
}

fn run_synth(a: &SynthArgs) -> Result<(), Error> {
    let spec = match &a.spec {
        Some(p) => DriftSpec::load(p)?,
        None => a
            .shift
            .iter()
            .fold(DriftSpec::gaussian(a.n_train, a.n_test, a.features, a.seed), |s, (f, d)| {
                s.with_mean_shift(f, *d)
            }),
    };
    for (f, _) in &a.shift {
        if !spec.features.iter().any(|x| &x.name == f) {
            return Err(Error::Config(format!("--shift names unknown feature `{f}`")));
        }
    }
    let output = match (&a.output, std::env::var_os(OUTPUT_DIR_ENV)) {
        (Some(p), _) => p.clone(),
        (None, Some(d)) => PathBuf::from(d).join("synth"),
        (None, None) => return Err(Error::Config(format!("pass --output or set {OUTPUT_DIR_ENV}"))),
    };
    let mut cfg = RunConfig::new(Method::Synth);
    cfg.synth = Some(spec);
    cfg.output = Some(output);
    print!("{}", run(&cfg)?.summary_text());
    Ok(())
}

fn run_compare(a: &CompareArgs) -> Result<(), Error> {
    let reports = a.reports.iter().map(Report::load).collect::<Result<Vec<_>, _>>()?;
    let table = compare(&reports)?;
    print!("{}", table.to_text());
    if let Some(p) = &a.output {
        let json = serde_json::to_string_pretty(&table)?;
        std::fs::write(p, json).map_err(|e| Error::Io {
            path: p.clone(),
            source: e,
        })?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match &cli.command {
        Command::Detect(a) => run_method(Method::Detect, a),
        Command::Features(a) => run_method(Method::Features, a),
        Command::Validation(a) => run_method(Method::Validation, a),
        Command::Ipw(a) => run_method(Method::Ipw, a),
        Command::Experiment(a) => run_method(Method::Experiment, a),
        Command::Synth(a) => run_synth(a),
        Command::Compare(a) => run_compare(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
