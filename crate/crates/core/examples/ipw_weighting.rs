//! Inverse propensity weights: the formula, trimming, and the effect on a
//! shifted feature's train mean.

use adval::adversarial::{encode_pair, propensity_oof, Learner};
use adval::data::EncodingPolicy;
use adval::methods::{ipw_weight, ipw_weights, DEFAULT_P_MAX};
use adval::synthgen::{generate, DriftSpec};

fn main() -> adval::Result<()> {
    for p in [0.1, 0.5, 0.8, 0.99] {
        println!("w({p}) = {:.4}", ipw_weight(p, DEFAULT_P_MAX));
    }

    let spec = DriftSpec::gaussian(5000, 5000, 3, 2).with_mean_shift("f0", 1.0);
    let data = generate(&spec)?;
    let (train, test) = encode_pair(&data.train, &data.test, EncodingPolicy::IMPUTE_ZERO)?;
    let ps = propensity_oof(&train, &test, &Learner::default(), 5, 2)?;
    let w = ipw_weights(&ps, DEFAULT_P_MAX)?;
    println!(
        "weights: min {:.4} max {:.4} ESS {:.0} trimmed {} near-zero share {:.3}",
        w.min, w.max, w.effective_sample_size, w.n_trimmed, w.near_zero_share
    );

    let x = train.column(0);
    let plain = x.iter().sum::<f64>() / x.len() as f64;
    let weighted = x.iter().zip(&w.weights).map(|(a, b)| a * b).sum::<f64>() / w.weights.iter().sum::<f64>();
    let target = test.column(0).iter().sum::<f64>() / test.n_rows() as f64;
    println!("f0 mean: train {plain:.3}, weighted train {weighted:.3}, test {target:.3}");
    Ok(())
}
