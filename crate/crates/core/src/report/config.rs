use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adversarial::{Learner, DEFAULT_FOLDS, DEFAULT_THETA_AUC};
use crate::data::{align_codebooks, encode, load_csv, Dataset, EncodedMatrix, EncodingPolicy, KindSource, LoadOptions, NumericMissing, Schema};
use crate::error::{Error, Result};
use crate::methods::{Adaptation, FeatureSelectionConfig, MatchConfig, DEFAULT_P_MAX};
use crate::synthgen::DriftSpec;
use crate::trees::{DTParams, GBDTParams, LearnerKind, RFParams};

/// Environment variable naming the default directory for report files.
pub const OUTPUT_DIR_ENV: &str = "ADVAL_OUTPUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Detect,
    Features,
    Validation,
    Ipw,
    Experiment,
    Synth,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Detect => "detect",
            Method::Features => "features",
            Method::Validation => "validation",
            Method::Ipw => "ipw",
            Method::Experiment => "experiment",
            Method::Synth => "synth",
        }
    }

    /// Default repetition count: the full protocol for experiments, one run otherwise.
    pub fn default_runs(self) -> usize {
        match self {
            Method::Experiment => 30,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DataConfig {
    /// Dataset name used in reports; defaults to the train file's parent directory.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train: Option<PathBuf>,
    /// One or more test snapshots.
    pub test: Vec<PathBuf>,
    /// Optional label-only CSVs aligned with `test`, for test files without a label column.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub test_labels: Vec<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schema: Option<PathBuf>,
    pub label: String,
    pub missing: NumericMissing,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            name: None,
            train: None,
            test: Vec::new(),
            test_labels: Vec::new(),
            schema: None,
            label: "label".into(),
            missing: NumericMissing::ImputeZero,
        }
    }
}

/// Adversarial learner choice; only the parameters of `kind` are used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnerConfig {
    pub kind: LearnerKind,
    pub dt: DTParams,
    pub rf: RFParams,
    pub gbdt: GBDTParams,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            kind: LearnerKind::Gbdt,
            dt: DTParams::default(),
            rf: RFParams::default(),
            gbdt: GBDTParams::default(),
        }
    }
}

impl LearnerConfig {
    pub fn of_kind(kind: LearnerKind) -> Self {
        LearnerConfig {
            kind,
            ..Default::default()
        }
    }

    pub fn learner(&self) -> Learner {
        match self.kind {
            LearnerKind::Dt => Learner::Dt(self.dt),
            LearnerKind::Rf => Learner::Rf(self.rf),
            LearnerKind::Gbdt => Learner::Gbdt(self.gbdt),
        }
    }
}

/// Everything a run needs. Loaded from TOML; see the README for an example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub method: Method,
    pub seed: u64,
    /// `None` uses [`Method::default_runs`].
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_runs: Option<usize>,
    pub theta_auc: f64,
    pub folds: usize,
    pub data: DataConfig,
    pub adversarial: LearnerConfig,
    pub outcome: GBDTParams,
    pub selection: FeatureSelectionConfig,
    pub matching: MatchConfig,
    pub p_max: f64,
    /// Adaptations scored by `experiment`.
    pub adaptations: Vec<Adaptation>,
    /// Generator spec for `synth`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub synth: Option<DriftSpec>,
    /// Report file (or output directory for `synth`).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            method: Method::Detect,
            seed: 0,
            n_runs: None,
            theta_auc: DEFAULT_THETA_AUC,
            folds: DEFAULT_FOLDS,
            data: DataConfig::default(),
            adversarial: LearnerConfig::default(),
            outcome: GBDTParams::default(),
            selection: FeatureSelectionConfig::default(),
            matching: MatchConfig::default(),
            p_max: DEFAULT_P_MAX,
            adaptations: Adaptation::ALL.to_vec(),
            synth: None,
            output: None,
        }
    }
}

impl RunConfig {
    pub fn new(method: Method) -> Self {
        RunConfig {
            method,
            ..Default::default()
        }
    }

    /// Parses TOML. Relative paths resolve against `base` when given.
    pub fn from_toml_str(s: &str, base: Option<&Path>) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        if let Some(base) = base {
            cfg.resolve_paths(base);
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, path.parent())
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let d = &mut self.data;
        d.train.iter_mut().for_each(fix);
        d.test.iter_mut().for_each(fix);
        d.test_labels.iter_mut().for_each(fix);
        d.schema.iter_mut().for_each(fix);
        self.output.iter_mut().for_each(fix);
    }

    /// Points the data section at an AutoML3-style directory:
    /// `<root>/<name>/train.csv`, `test1.csv`, `test2.csv`, ... and an
    /// optional `schema.toml`.
    pub fn with_automl3(mut self, root: impl AsRef<Path>, name: &str) -> Result<Self> {
        let dir = root.as_ref().join(name);
        let train = dir.join("train.csv");
        if !train.is_file() {
            return Err(Error::Config(format!("{} not found", train.display())));
        }
        let mut tests = Vec::new();
        for k in 1.. {
            let t = dir.join(format!("test{k}.csv"));
            if !t.is_file() {
                break;
            }
            tests.push(t);
        }
        if tests.is_empty() {
            return Err(Error::Config(format!("no test1.csv in {}", dir.display())));
        }
        let schema = dir.join("schema.toml");
        self.data = DataConfig {
            name: Some(name.to_string()),
            train: Some(train),
            test: tests,
            schema: schema.is_file().then_some(schema),
            ..self.data
        };
        Ok(self)
    }

    pub fn runs(&self) -> usize {
        self.n_runs.unwrap_or_else(|| self.method.default_runs())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.runs() == 0 {
            return bad("n_runs must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&self.theta_auc) {
            return bad(format!("theta_auc {} outside [0, 1]", self.theta_auc));
        }
        if self.folds < 2 {
            return bad("folds must be >= 2".into());
        }
        if !(self.p_max > 0.0 && self.p_max < 1.0) {
            return bad(format!("p_max {} outside (0, 1)", self.p_max));
        }
        self.selection.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.matching.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.outcome.validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.method == Method::Synth {
            if self.synth.is_none() {
                return bad("synth needs a generator spec".into());
            }
            return Ok(());
        }
        let d = &self.data;
        let Some(train) = &d.train else {
            return bad("no train file".into());
        };
        if d.test.is_empty() {
            return bad("no test file".into());
        }
        if !d.test_labels.is_empty() && d.test_labels.len() != d.test.len() {
            return bad(format!("{} test label files for {} test files", d.test_labels.len(), d.test.len()));
        }
        if self.method == Method::Experiment && self.adaptations.is_empty() {
            return bad("experiment needs at least one adaptation".into());
        }
        for p in std::iter::once(train).chain(&d.test).chain(&d.test_labels).chain(&d.schema) {
            if !p.exists() {
                return bad(format!("{} does not exist", p.display()));
            }
        }
        Ok(())
    }

    /// Report path: `output` if set, else `$ADVAL_OUTPUT_DIR/<dataset>-<method>.json`.
    pub fn report_path(&self, dataset: &str) -> Option<PathBuf> {
        if let Some(p) = &self.output {
            return Some(p.clone());
        }
        let dir = std::env::var_os(OUTPUT_DIR_ENV)?;
        Some(PathBuf::from(dir).join(format!("{dataset}-{}.json", self.method.as_str())))
    }
}

/// One test snapshot after encoding against the train codebooks.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub name: String,
    pub x: EncodedMatrix,
    pub labels: Option<Vec<u8>>,
}

#[derive(Debug, Clone)]
pub struct LoadedData {
    pub name: String,
    pub train: EncodedMatrix,
    pub train_labels: Option<Vec<u8>>,
    pub snapshots: Vec<Snapshot>,
    /// All snapshots stacked, for the adversarial stage.
    pub test: EncodedMatrix,
}

impl LoadedData {
    pub fn has_test_labels(&self) -> bool {
        self.snapshots.iter().all(|s| s.labels.is_some())
    }
}

fn header_has(path: &Path, column: &str) -> Result<bool> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::Reader::from_reader(file);
    Ok(rdr.headers()?.iter().any(|h| h.trim() == column))
}

fn load_table(path: &Path, kinds: KindSource, label: &str) -> Result<Dataset> {
    let label = header_has(path, label)?.then(|| label.to_string());
    load_csv(path, &LoadOptions { kinds, label })
}

fn load_label_file(path: &Path, label: &str) -> Result<Vec<u8>> {
    let ds = load_csv(path, &LoadOptions::infer().with_label(label))?;
    ds.label()
        .map(<[u8]>::to_vec)
        .ok_or_else(|| Error::SchemaMismatch(format!("{} has no `{label}` column", path.display())))
}

impl DataConfig {
    pub fn policy(&self) -> EncodingPolicy {
        EncodingPolicy {
            numeric_missing: self.missing,
        }
    }

    /// Reads and encodes train and test files. Test columns take the train
    /// kinds; a label column in a test file is split off for evaluation.
    pub fn load(&self) -> Result<LoadedData> {
        let train_path = self.train.as_ref().ok_or_else(|| Error::Config("no train file".into()))?;
        let (kinds, label) = match &self.schema {
            Some(p) => {
                let s = Schema::load(p)?;
                let label = s.label.clone().unwrap_or_else(|| self.label.clone());
                (KindSource::Explicit(s.columns), label)
            }
            None => (KindSource::Infer, self.label.clone()),
        };
        let train = load_table(train_path, kinds, &label)?;
        let train_kinds = KindSource::Explicit(train.kinds().into_iter().collect());
        let policy = self.policy();
        let (train, train_labels) = train.take_label();
        let x_train = encode(&train, policy)?;

        let mut snapshots = Vec::with_capacity(self.test.len());
        for (k, path) in self.test.iter().enumerate() {
            let ds = load_table(path, train_kinds.clone(), &label)?;
            let (ds, mut labels) = ds.take_label();
            if let Some(lp) = self.test_labels.get(k) {
                let l = load_label_file(lp, &label)?;
                if l.len() != ds.n_rows() {
                    return Err(Error::LengthMismatch(format!(
                        "{} has {} labels for {} rows",
                        lp.display(),
                        l.len(),
                        ds.n_rows()
                    )));
                }
                labels = Some(l);
            }
            snapshots.push(Snapshot {
                name: ds.name().to_string(),
                x: align_codebooks(&x_train, &ds, policy)?,
                labels,
            });
        }
        let mut test = snapshots[0].x.clone();
        for s in &snapshots[1..] {
            test = test.vstack(&s.x)?;
        }
        let name = self.name.clone().unwrap_or_else(|| {
            train_path
                .canonicalize()
                .ok()
                .and_then(|p| p.parent().and_then(|d| d.file_name()).map(|n| n.to_string_lossy().into_owned()))
                .unwrap_or_else(|| "data".into())
        });
        Ok(LoadedData {
            name,
            train: x_train,
            train_labels,
            snapshots,
            test,
        })
    }
}
