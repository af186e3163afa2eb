//! Cross-validated Lasso on a sparse problem with correlated columns: the
//! penalty grid, the chosen penalty and the recovered support.
//!
//! cargo run --release --example lasso_path

use heatlight::nuisance::lasso::lambda_max;
use heatlight::nuisance::{fit_lasso, LassoParams};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn main() -> heatlight::Result<()> {
    let (n, p) = (500, 20);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let shared: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let x = DMatrix::from_fn(n, p, |r, _| 0.5 * shared[r] + rng.sample::<f64, _>(StandardNormal));
    let truth = |j: usize| match j {
        0 => 2.0,
        3 => -1.0,
        7 => 0.5,
        _ => 0.0,
    };
    let y: Vec<f64> = (0..n)
        .map(|r| 3.0 + (0..p).map(|j| truth(j) * x[(r, j)]).sum::<f64>() + rng.sample::<f64, _>(StandardNormal))
        .collect();

    let params = LassoParams::default();
    let model = fit_lasso(&x, &y, &params, 1)?;
    println!("λ_max {:.4}, grid of {} down to {:.1e}·λ_max", lambda_max(&x, &y)?, params.n_lambda, params.lambda_min_ratio);
    println!("chosen λ {:.5} by {}-fold CV", model.lambda, params.cv_folds);
    for (lambda, mse) in model.cv_path.iter().step_by(20) {
        println!("  λ {lambda:9.5}  held-out MSE {mse:.4}");
    }
    let (beta, intercept) = model.original_scale();
    println!("intercept {intercept:.3}");
    for (j, b) in beta.iter().enumerate() {
        if b.abs() > 1e-3 || truth(j) != 0.0 {
            println!("  x{j:<2} estimate {b:7.3}  truth {:5.2}", truth(j));
        }
    }
    let zeros = beta.iter().filter(|b| **b == 0.0).count();
    println!("{zeros} of {p} coefficients exactly zero");
    Ok(())
}
