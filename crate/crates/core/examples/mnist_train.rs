//! Trains on MNIST and prints test accuracy after every epoch.
//!
//! Usage: mnist_train <data dir> [train samples] [epochs] [T] [s] [N]

use std::path::Path;
use std::time::Instant;

use tmforge::data::{booleanize_threshold, load_idx, DEFAULT_THRESHOLD_FRACTION};
use tmforge::tm::{Hyperparams, ReferenceModel, Trainer};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let dir = Path::new(args.get(1).map(String::as_str).unwrap_or("data/mnist"));
    let arg = |i: usize, d: f64| args.get(i).and_then(|s| s.parse().ok()).unwrap_or(d);
    let n = arg(2, 60_000.0) as usize;
    let hp = Hyperparams {
        clauses_per_class: 200,
        epochs: arg(3, 10.0) as usize,
        threshold: arg(4, 15.0) as u32,
        specificity: arg(5, 10.0),
        states_per_action: arg(6, 128.0) as u32,
        seed: 1,
    };
    let mut train = load_idx(
        &dir.join("train-images-idx3-ubyte"),
        &dir.join("train-labels-idx1-ubyte"),
    )
    .unwrap();
    let test = load_idx(
        &dir.join("t10k-images-idx3-ubyte"),
        &dir.join("t10k-labels-idx1-ubyte"),
    )
    .unwrap();
    let t = train.threshold_at(DEFAULT_THRESHOLD_FRACTION);
    train.truncate(n);
    let train = booleanize_threshold(&train, t, Some(10)).unwrap();
    let test = booleanize_threshold(&test, t, Some(10)).unwrap();
    println!("{hp:?} samples={}", train.len());
    let mut trainer = Trainer::new(10, train.feature_count(), hp.clone()).unwrap();
    for e in 0..hp.epochs {
        let start = Instant::now();
        trainer.fit_epoch(train.features(), train.labels()).unwrap();
        let acc = ReferenceModel::new(trainer.model())
            .accuracy(test.features(), test.labels())
            .unwrap();
        println!(
            "epoch {} acc {:.4} ({:.1}s)",
            e + 1,
            acc,
            start.elapsed().as_secs_f64()
        );
    }
}
