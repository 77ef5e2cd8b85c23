//! Put two runs with different adversarial learners side by side.

use adval::report::{compare, run, DataConfig, Method, RunConfig};
use adval::synthgen::{generate, DriftSpec};
use adval::trees::LearnerKind;

fn main() -> adval::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    generate(&DriftSpec::gaussian(2000, 1500, 6, 9).with_mean_shift("f0", 1.5))?.write(dir.path())?;
    let data = DataConfig {
        name: Some("syn".into()),
        train: Some(dir.path().join("train.csv")),
        test: vec![dir.path().join("test.csv")],
        test_labels: vec![dir.path().join("test_labels.csv")],
        ..Default::default()
    };
    let mut reports = Vec::new();
    for kind in [LearnerKind::Gbdt, LearnerKind::Dt] {
        let mut cfg = RunConfig::new(Method::Experiment);
        cfg.n_runs = Some(2);
        cfg.data = data.clone();
        cfg.adversarial.kind = kind;
        reports.push(run(&cfg)?);
    }
    print!("{}", compare(&reports)?.to_text());
    Ok(())
}
