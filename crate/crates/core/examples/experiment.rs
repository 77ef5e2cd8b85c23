//! Full experiment on generated data: write the tables, then score every
//! adaptation over a few seeded runs and save the report.

use adval::methods::Adaptation;
use adval::report::{run, DataConfig, Method, RunConfig};
use adval::synthgen::{generate, DriftSpec};

fn main() -> adval::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let spec = DriftSpec::gaussian(3000, 2000, 8, 5).with_mean_shift("f1", 1.0).with_mean_shift("f4", 2.0);
    generate(&spec)?.write(dir.path())?;

    let mut cfg = RunConfig::new(Method::Experiment);
    cfg.n_runs = Some(3);
    cfg.data = DataConfig {
        name: Some("synthetic".into()),
        train: Some(dir.path().join("train.csv")),
        test: vec![dir.path().join("test.csv")],
        test_labels: vec![dir.path().join("test_labels.csv")],
        schema: Some(dir.path().join("schema.toml")),
        ..Default::default()
    };
    let report = run(&cfg)?;
    print!("{}", report.summary_text());
    let base = report.outcome(Adaptation::Baseline).unwrap().auc;
    let fs = report.outcome(Adaptation::FeatureSelection).unwrap().auc;
    println!("baseline {base}, feature selection {fs}");

    let path = dir.path().join("report.json");
    report.save(&path)?;
    println!("saved {} bytes", std::fs::metadata(&path).unwrap().len());
    Ok(())
}
