use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{LoadedData, Method, RunConfig};
use crate::adversarial::{detect_drift, propensity_oof, DriftVerdict, PropensityScores};
use crate::error::{Error, Result};
use crate::methods::{
    auto_feature_selection, ipw_weights, psm_validation_select, train_outcome, Adaptation, AdaptationPlan,
    MatchResult, SelectionTrace, WeightVector,
};
use crate::metrics::{auc, mean, mean_ci, BalanceRow};
use crate::rng;
use crate::synthgen::generate;

pub const REPORT_VERSION: u32 = 1;

/// Seed of run `i`: `derive(derive(seed, RUN), i)` with the SplitMix64
/// derivation in [`crate::rng`]. Any single run can be replayed from it.
pub fn run_seed(seed: u64, i: usize) -> u64 {
    rng::derive(rng::derive(seed, rng::TAG_RUN), i as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub mean: f64,
    /// 95% Student-t half-width; absent for a single value.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub halfwidth: Option<f64>,
    pub n: usize,
}

impl Interval {
    pub fn of(values: &[f64]) -> Interval {
        let halfwidth = mean_ci(values, 0.95).ok().map(|(_, h)| h);
        Interval {
            mean: mean(values),
            halfwidth,
            n: values.len(),
        }
    }
}

impl std::fmt::Display for Interval {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.halfwidth {
            Some(h) => write!(f, "{:.4} ± {:.4}", self.mean, h),
            None => write!(f, "{:.4}", self.mean),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchSummary {
    pub n_pairs: usize,
    pub caliper: f64,
    pub n_val: usize,
    pub fallback_used: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fallback_reason: Option<String>,
    pub balance: Vec<BalanceRow>,
}

impl From<&MatchResult> for MatchSummary {
    fn from(m: &MatchResult) -> Self {
        MatchSummary {
            n_pairs: m.pairs.len(),
            caliper: m.caliper,
            n_val: m.val_indices.len(),
            fallback_used: m.fallback_used,
            fallback_reason: m.fallback_reason.clone(),
            balance: m.balance.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSummary {
    pub min: f64,
    pub max: f64,
    pub effective_sample_size: f64,
    pub n_trimmed: usize,
    pub near_zero_share: f64,
    pub p_max: f64,
}

impl From<&WeightVector> for WeightSummary {
    fn from(w: &WeightVector) -> Self {
        WeightSummary {
            min: w.min,
            max: w.max,
            effective_sample_size: w.effective_sample_size,
            n_trimmed: w.n_trimmed,
            near_zero_share: w.near_zero_share,
            p_max: w.p_max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeScore {
    pub adaptation: Adaptation,
    /// Test AUC per snapshot, in config order.
    pub snapshot_auc: Vec<f64>,
    /// Unweighted mean over snapshots.
    pub mean_auc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<DriftVerdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub propensity_cv_auc: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection: Option<SelectionTrace>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matching: Option<MatchSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<WeightSummary>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub outcomes: Vec<OutcomeScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeSummary {
    pub adaptation: Adaptation,
    pub auc: Interval,
    pub snapshots: Vec<Interval>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Summary {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adversarial_auc: Option<Interval>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub propensity_cv_auc: Option<Interval>,
    /// How many runs removed each feature.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub removed_features: BTreeMap<String, usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub outcomes: Vec<OutcomeSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSummary {
    pub directory: PathBuf,
    pub n_train: usize,
    pub n_test: usize,
    pub ground_truth: BTreeSet<String>,
}

/// Wall-clock timings. These are the only report fields that are not
/// reproducible from the config.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Timings {
    pub load_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub version: u32,
    pub dataset: String,
    pub config: RunConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub snapshots: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub runs: Vec<RunRecord>,
    pub summary: Summary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synth: Option<SynthSummary>,
    #[serde(default)]
    pub timings: Timings,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let r: Report = serde_json::from_str(s)?;
        if r.version != REPORT_VERSION {
            return Err(Error::Serde(format!("unsupported report version {}", r.version)));
        }
        Ok(r)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Same report with timings zeroed, for reproducibility comparisons.
    pub fn without_timings(&self) -> Report {
        Report {
            timings: Timings::default(),
            ..self.clone()
        }
    }

    pub fn outcome(&self, a: Adaptation) -> Option<&OutcomeSummary> {
        self.summary.outcomes.iter().find(|o| o.adaptation == a)
    }

    /// Human-readable summary.
    pub fn summary_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} on {} ({} run(s))", self.config.method.as_str(), self.dataset, self.runs.len().max(1));
        if let Some(syn) = &self.synth {
            let _ = writeln!(
                s,
                "  wrote {} train / {} test rows to {}; drifted: {:?}",
                syn.n_train,
                syn.n_test,
                syn.directory.display(),
                syn.ground_truth
            );
        }
        if let Some(a) = &self.summary.adversarial_auc {
            let drifted = a.mean > self.config.theta_auc;
            let _ = writeln!(
                s,
                "  adversarial AUC {a}  ({} at theta {})",
                if drifted { "drift" } else { "no drift" },
                self.config.theta_auc
            );
        }
        if let Some(a) = &self.summary.propensity_cv_auc {
            let _ = writeln!(s, "  out-of-fold propensity AUC {a}");
        }
        if let Some(v) = self.runs.first().and_then(|r| r.verdict.as_ref()) {
            let top: Vec<String> = v.top_features.iter().take(5).map(|(f, g)| format!("{f} {g:.3}")).collect();
            let _ = writeln!(s, "  top features: {}", top.join(", "));
        }
        if !self.summary.removed_features.is_empty() {
            let removed: Vec<String> =
                self.summary.removed_features.iter().map(|(f, n)| format!("{f} ({n}/{})", self.runs.len())).collect();
            let _ = writeln!(s, "  removed: {}", removed.join(", "));
        } else if self.runs.iter().any(|r| r.selection.is_some()) {
            let _ = writeln!(s, "  removed: none");
        }
        if let Some(m) = self.runs.first().and_then(|r| r.matching.as_ref()) {
            let _ = writeln!(
                s,
                "  matching: {} pairs, caliper {:.4}, {} validation rows{}",
                m.n_pairs,
                m.caliper,
                m.n_val,
                if m.fallback_used { " (fallback: highest propensity)" } else { "" }
            );
            for b in &m.balance {
                let _ = writeln!(s, "    {:<20} smd {:>8.4} {}", b.feature, b.smd, if b.balanced { "ok" } else { "unbalanced" });
            }
        }
        if let Some(w) = self.runs.first().and_then(|r| r.weights.as_ref()) {
            let _ = writeln!(
                s,
                "  weights: min {:.4} max {:.4} ESS {:.1} trimmed {}",
                w.min, w.max, w.effective_sample_size, w.n_trimmed
            );
        }
        for o in &self.summary.outcomes {
            let _ = writeln!(s, "  outcome AUC {:<22} {}", o.adaptation.to_string(), o.auc);
        }
        s
    }
}

fn score_outcomes(
    data: &LoadedData,
    cfg: &RunConfig,
    plans: &[AdaptationPlan],
    seed: u64,
) -> Result<Vec<OutcomeScore>> {
    let y = data
        .train_labels
        .as_deref()
        .ok_or_else(|| Error::SchemaMismatch(format!("train file has no `{}` column", cfg.data.label)))?;
    plans
        .par_iter()
        .map(|plan| {
            let model = train_outcome(&data.train, y, plan, &cfg.outcome, seed)?;
            let snapshot_auc = data
                .snapshots
                .iter()
                .map(|s| auc(&model.predict_proba(&s.x)?, s.labels.as_deref().expect("checked")))
                .collect::<Result<Vec<f64>>>()?;
            Ok(OutcomeScore {
                adaptation: plan.adaptation(),
                mean_auc: mean(&snapshot_auc),
                snapshot_auc,
            })
        })
        .collect()
}

fn one_run(data: &LoadedData, cfg: &RunConfig, run: usize) -> Result<RunRecord> {
    let seed = run_seed(cfg.seed, run);
    let learner = cfg.adversarial.learner();
    let mut rec = RunRecord {
        run,
        seed,
        verdict: None,
        propensity_cv_auc: None,
        selection: None,
        matching: None,
        weights: None,
        outcomes: Vec::new(),
    };
    let score = data.has_test_labels();
    let wanted: Vec<Adaptation> = match cfg.method {
        Method::Detect | Method::Synth => Vec::new(),
        Method::Features if score => vec![Adaptation::Baseline, Adaptation::FeatureSelection],
        Method::Validation if score => vec![Adaptation::Baseline, Adaptation::ValidationSelection],
        Method::Ipw if score => vec![Adaptation::Baseline, Adaptation::Ipw],
        Method::Experiment => cfg.adaptations.clone(),
        _ => Vec::new(),
    };
    let needs_trace = cfg.method == Method::Features || wanted.contains(&Adaptation::FeatureSelection);
    let needs_ps = matches!(cfg.method, Method::Validation | Method::Ipw)
        || wanted.iter().any(|a| matches!(a, Adaptation::ValidationSelection | Adaptation::Ipw));

    if matches!(cfg.method, Method::Detect | Method::Experiment) {
        rec.verdict = Some(detect_drift(&data.train, &data.test, &learner, cfg.theta_auc, seed)?);
    }
    if needs_trace {
        rec.selection = Some(auto_feature_selection(&data.train, &data.test, &learner, &cfg.selection, seed)?);
    }
    let mut ps: Option<PropensityScores> = None;
    if needs_ps {
        let p = propensity_oof(&data.train, &data.test, &learner, cfg.folds, seed)?;
        rec.propensity_cv_auc = Some(p.cv_auc);
        ps = Some(p);
    }
    let mut matched = None;
    let mut weights = None;
    if let Some(p) = &ps {
        if cfg.method == Method::Validation || wanted.contains(&Adaptation::ValidationSelection) {
            let m = psm_validation_select(&data.train, &data.test, p, &cfg.matching, seed)?;
            rec.matching = Some((&m).into());
            matched = Some(m);
        }
        if cfg.method == Method::Ipw || wanted.contains(&Adaptation::Ipw) {
            let w = ipw_weights(p, cfg.p_max)?;
            rec.weights = Some((&w).into());
            weights = Some(w);
        }
    }
    if !wanted.is_empty() {
        let plans: Vec<AdaptationPlan> = wanted
            .iter()
            .map(|a| match a {
                Adaptation::Baseline => AdaptationPlan::Baseline,
                Adaptation::FeatureSelection => rec.selection.as_ref().expect("trace computed").into(),
                Adaptation::ValidationSelection => matched.as_ref().expect("match computed").into(),
                Adaptation::Ipw => weights.as_ref().expect("weights computed").into(),
            })
            .collect();
        rec.outcomes = score_outcomes(data, cfg, &plans, seed)?;
    }
    Ok(rec)
}

fn summarize(runs: &[RunRecord], n_snapshots: usize) -> Summary {
    let collect = |f: &dyn Fn(&RunRecord) -> Option<f64>| {
        let v: Vec<f64> = runs.iter().filter_map(f).collect();
        (!v.is_empty()).then(|| Interval::of(&v))
    };
    let mut removed = BTreeMap::new();
    for r in runs {
        for f in r.selection.iter().flat_map(|t| t.removed()) {
            *removed.entry(f).or_insert(0) += 1;
        }
    }
    let mut outcomes = Vec::new();
    if let Some(first) = runs.first() {
        for o in &first.outcomes {
            let per_run: Vec<&OutcomeScore> =
                runs.iter().flat_map(|r| r.outcomes.iter().filter(|x| x.adaptation == o.adaptation)).collect();
            let means: Vec<f64> = per_run.iter().map(|x| x.mean_auc).collect();
            let snapshots = (0..n_snapshots)
                .map(|k| Interval::of(&per_run.iter().map(|x| x.snapshot_auc[k]).collect::<Vec<_>>()))
                .collect();
            outcomes.push(OutcomeSummary {
                adaptation: o.adaptation,
                auc: Interval::of(&means),
                snapshots,
            });
        }
    }
    Summary {
        adversarial_auc: collect(&|r| r.verdict.as_ref().map(|v| v.auc)),
        propensity_cv_auc: collect(&|r| r.propensity_cv_auc),
        removed_features: removed,
        outcomes,
    }
}

/// Runs the configured method `n_runs` times in parallel and aggregates.
/// Nothing is written to disk except the generated tables for `synth`.
pub fn run(config: &RunConfig) -> Result<Report> {
    config.validate()?;
    let start = Instant::now();
    if config.method == Method::Synth {
        return run_synth(config, start);
    }
    let data = config.data.load()?;
    let load_ms = start.elapsed().as_secs_f64() * 1e3;
    if config.method == Method::Experiment && !data.has_test_labels() {
        return Err(Error::SchemaMismatch(format!(
            "experiment needs `{}` in every test snapshot (or test_labels files)",
            config.data.label
        )));
    }
    if config.method != Method::Detect && data.train_labels.is_none() && data.has_test_labels() {
        return Err(Error::SchemaMismatch(format!("train file has no `{}` column", config.data.label)));
    }
    let runs: Vec<RunRecord> = (0..config.runs())
        .into_par_iter()
        .map(|i| one_run(&data, config, i))
        .collect::<Result<_>>()?;
    let summary = summarize(&runs, data.snapshots.len());
    Ok(Report {
        version: REPORT_VERSION,
        dataset: data.name.clone(),
        config: config.clone(),
        snapshots: data.snapshots.iter().map(|s| s.name.clone()).collect(),
        runs,
        summary,
        synth: None,
        timings: Timings {
            load_ms,
            total_ms: start.elapsed().as_secs_f64() * 1e3,
        },
    })
}

fn run_synth(config: &RunConfig, start: Instant) -> Result<Report> {
    let spec = config.synth.as_ref().expect("validated");
    let dir = config
        .output
        .clone()
        .ok_or_else(|| Error::Config("synth needs an output directory".into()))?;
    let data = generate(spec)?;
    data.write(&dir)?;
    Ok(Report {
        version: REPORT_VERSION,
        dataset: dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "synth".into()),
        config: config.clone(),
        snapshots: Vec::new(),
        runs: Vec::new(),
        summary: Summary::default(),
        synth: Some(SynthSummary {
            directory: dir,
            n_train: spec.n_train,
            n_test: spec.n_test,
            ground_truth: data.ground_truth,
        }),
        timings: Timings {
            load_ms: 0.0,
            total_ms: start.elapsed().as_secs_f64() * 1e3,
        },
    })
}
