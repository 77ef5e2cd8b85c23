//! Load a CSV with mixed column kinds, encode it, and align a test file to
//! the training codebooks.

use adval::data::{align_codebooks, encode, load_csv, EncodingPolicy, LoadOptions};

fn main() -> adval::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let train = dir.path().join("train.csv");
    let test = dir.path().join("test.csv");
    std::fs::write(&train, "age,city,label\n31,paris,1\n,berlin,0\n45,paris,1\n27,,0\n").unwrap();
    std::fs::write(&test, "age,city\n52,rome\n33,berlin\n").unwrap();

    let opts = LoadOptions::infer().with_label("label");
    let train_ds = load_csv(&train, &opts)?;
    let test_ds = load_csv(&test, &LoadOptions::infer())?;
    println!("train kinds: {:?}", train_ds.kinds());

    let policy = EncodingPolicy::KEEP_MISSING;
    let x = encode(&train_ds, policy)?;
    let xt = align_codebooks(&x, &test_ds, policy)?;
    let city = x.feature_index("city").unwrap();
    println!("city codebook: {:?}", x.codebook(city).unwrap().labels());
    println!("test city codes (rome is unseen): {:?}", xt.column(city));
    println!("train age missing mask: {:?}", x.missing_column(0));
    Ok(())
}
