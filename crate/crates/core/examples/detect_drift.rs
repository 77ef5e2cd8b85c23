//! Adversarial drift check: a clean pair, then one with a shifted feature.

use adval::adversarial::{detect_drift, encode_pair, propensity_oof, Learner, DEFAULT_THETA_AUC};
use adval::data::EncodingPolicy;
use adval::synthgen::{generate, DriftSpec};
use adval::trees::LearnerKind;

fn main() -> adval::Result<()> {
    for shift in [0.0, 1.5] {
        let spec = DriftSpec::gaussian(3000, 3000, 8, 7).with_mean_shift("f5", shift);
        let data = generate(&spec)?;
        let (train, test) = encode_pair(&data.train, &data.test, EncodingPolicy::IMPUTE_ZERO)?;
        for kind in [LearnerKind::Dt, LearnerKind::Gbdt] {
            let learner = Learner::from(kind);
            let v = detect_drift(&train, &test, &learner, DEFAULT_THETA_AUC, 0)?;
            let ps = propensity_oof(&train, &test, &learner, 5, 0)?;
            println!(
                "shift {shift} {kind:>4}: holdout AUC {:.3} drifted={} oof AUC {:.3} top {:?}",
                v.auc, v.drifted, ps.cv_auc, v.top_features.first()
            );
        }
    }
    Ok(())
}
