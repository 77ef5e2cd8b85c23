//! Fit the three tree learners on the same table and compare holdout AUC.

use adval::metrics::auc;
use adval::synthgen::{generate, DriftSpec};
use adval::data::{encode, EncodingPolicy};
use adval::trees::{fit_decision_tree, fit_gbdt, fit_random_forest, DTParams, GBDTParams, RFParams};

fn main() -> adval::Result<()> {
    let data = generate(&DriftSpec::gaussian(4000, 2000, 6, 1))?;
    let x = encode(&data.train, EncodingPolicy::IMPUTE_ZERO)?;
    let y = data.train.label().unwrap();
    let test = data.labeled_test();
    let xt = encode(&test, EncodingPolicy::IMPUTE_ZERO)?;
    let yt = test.label().unwrap();

    let dt = fit_decision_tree(&x, y, None, &DTParams::default())?;
    let rf = fit_random_forest(&x, y, None, &RFParams::default())?;
    let gb = fit_gbdt(&x, y, None, &GBDTParams::default(), None)?;
    for (name, m) in [("dt", &dt), ("rf", &rf), ("gbdt", &gb)] {
        let score = auc(&m.predict_proba(&xt)?, yt)?;
        println!("{name:>4}: {} trees, test AUC {score:.4}", m.trees.len());
    }
    println!("gbdt stopped at round {:?}", gb.best_iteration);
    println!("gbdt importances: {:?}", &gb.ranked_importance()[..3]);

    let json = gb.to_json();
    let back = adval::trees::TreeEnsembleModel::from_json(&json)?;
    assert_eq!(back.predict_proba(&xt)?, gb.predict_proba(&xt)?);
    Ok(())
}
