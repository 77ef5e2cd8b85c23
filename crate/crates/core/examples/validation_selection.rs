//! Pick a test-like validation set from the training rows by propensity
//! matching, then train an outcome model that early-stops on it.

use adval::adversarial::{encode_pair, propensity_oof, Learner};
use adval::data::{encode, EncodingPolicy};
use adval::methods::{psm_validation_select, train_outcome, AdaptationPlan, MatchConfig};
use adval::metrics::auc;
use adval::synthgen::{generate, DriftSpec};
use adval::trees::GBDTParams;

fn main() -> adval::Result<()> {
    let spec = DriftSpec::gaussian(5000, 3000, 6, 11).with_mean_shift("f1", 0.4);
    let data = generate(&spec)?;
    let (train, test) = encode_pair(&data.train, &data.test, EncodingPolicy::IMPUTE_ZERO)?;
    let ps = propensity_oof(&train, &test, &Learner::default(), 5, 11)?;
    let m = psm_validation_select(&train, &test, &ps, &MatchConfig::default(), 11)?;
    println!(
        "{} pairs within caliper {:.4}; {} validation rows; fallback={} {:?}",
        m.pairs.len(),
        m.caliper,
        m.val_indices.len(),
        m.fallback_used,
        m.fallback_reason
    );
    for row in &m.balance {
        println!("  smd {:>10}: {:+.4} balanced={}", row.feature, row.smd, row.balanced);
    }

    let y = data.train.label().unwrap();
    let labeled = data.labeled_test();
    let xt = encode(&labeled, EncodingPolicy::IMPUTE_ZERO)?;
    for plan in [AdaptationPlan::Baseline, AdaptationPlan::from(&m)] {
        let model = train_outcome(&train, y, &plan, &GBDTParams::default(), 0)?;
        let score = auc(&model.predict_proba(&xt)?, labeled.label().unwrap())?;
        println!("{:>22}: test AUC {score:.4}", plan.adaptation());
    }
    Ok(())
}
