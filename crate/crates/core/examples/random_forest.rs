//! Random forest on a nonlinear propensity-like target: held-out error
//! against a constant predictor, and identical forests across thread counts.
//!
//! cargo run --release --example random_forest

use std::time::Instant;

use heatlight::nuisance::{fit_forest, predict_forest, ForestParams};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> heatlight::Result<()> {
    let (n, p) = (1500, 8);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = DMatrix::from_fn(n, p, |_, _| rng.gen::<f64>());
    let prob = |r: usize| 1.0 / (1.0 + (-(6.0 * (x[(r, 0)] - 0.5) * (x[(r, 1)] - 0.5) * 4.0 + 2.0 * x[(r, 2)] - 1.0)).exp());
    let d: Vec<f64> = (0..n).map(|r| f64::from(u8::from(rng.gen::<f64>() < prob(r)))).collect();

    let train: Vec<usize> = (0..1000).collect();
    let test: Vec<usize> = (1000..n).collect();
    let x_train = x.select_rows(&train);
    let d_train: Vec<f64> = train.iter().map(|&r| d[r]).collect();

    let params = ForestParams::default();
    let start = Instant::now();
    let forest = fit_forest(&x_train, &d_train, &params, 11)?;
    println!("{} trees grown in {:.2?}", params.n_trees, start.elapsed());

    let pred = predict_forest(&forest, &x.select_rows(&test))?;
    let mean = d_train.iter().sum::<f64>() / d_train.len() as f64;
    let mse = |f: &dyn Fn(usize) -> f64| test.iter().enumerate().map(|(i, &r)| (prob(r) - f(i)).powi(2)).sum::<f64>() / test.len() as f64;
    println!("error against the true probability: forest {:.4}, constant {:.4}", mse(&|i| pred[i]), mse(&|_| mean));

    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().expect("thread pool");
    let again = single.install(|| fit_forest(&x_train, &d_train, &params, 11))?;
    println!("same forest on one thread: {}", again == forest);
    Ok(())
}
