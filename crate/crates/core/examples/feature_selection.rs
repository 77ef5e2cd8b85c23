//! Drop drifting features until the adversary can no longer tell the sides apart.

use adval::adversarial::{encode_pair, Learner};
use adval::data::EncodingPolicy;
use adval::methods::{auto_feature_selection, FeatureSelectionConfig};
use adval::synthgen::{generate, DriftSpec};

fn main() -> adval::Result<()> {
    let spec = DriftSpec::gaussian(4000, 4000, 10, 3)
        .with_mean_shift("f2", 3.0)
        .with_mean_shift("f7", 1.0);
    let data = generate(&spec)?;
    let (train, test) = encode_pair(&data.train, &data.test, EncodingPolicy::IMPUTE_ZERO)?;

    let trace = auto_feature_selection(&train, &test, &Learner::default(), &FeatureSelectionConfig::default(), 3)?;
    for (i, it) in trace.iterations.iter().enumerate() {
        println!("round {i}: auc {:.3}, removed {:?}", it.auc, it.removed);
    }
    println!("final auc {:.3} unresolved={}", trace.final_auc, trace.unresolved);
    println!("kept {:?}", trace.final_features);
    println!("ground truth {:?}", data.ground_truth);
    Ok(())
}
