//! Fit a GP to a noisy 1-D function, then add points one at a time.
//!
//! cargo run --example gp_posterior

use moccas::gp::{default_grid, prefit_hyperparams, GpModel, Scaling};

fn f(x: f64) -> f64 {
    (6.0 * x).sin() + 0.5 * x
}

fn main() -> moccas::Result<()> {
    let xs: Vec<Vec<f64>> = (0..12).map(|i| vec![i as f64 / 11.0]).collect();
    let ys: Vec<f64> = xs.iter().map(|x| f(x[0])).collect();

    let scaling = Scaling::fit(&xs, &ys)?;
    let scaled_x: Vec<Vec<f64>> = xs.iter().map(|x| scaling.scale_input(x)).collect();
    let scaled_y: Vec<f64> = ys.iter().map(|y| scaling.scale_target(*y)).collect();
    let params = prefit_hyperparams(&scaled_x, &scaled_y, &default_grid(1, 5, 5, 1e-2)?)?;
    println!(
        "prefit: lengthscale {:.3}, signal variance {:.3}",
        params.lengthscales[0], params.signal_variance
    );

    let mut model = GpModel::prior(params, scaling)?;
    for (x, y) in xs.iter().zip(&ys).take(4) {
        model = model.condition(x, *y)?;
    }
    println!("\nafter 4 points        after 12 points");
    let full = xs
        .iter()
        .zip(&ys)
        .skip(4)
        .try_fold(model.clone(), |m, (x, y)| m.condition(x, *y))?;
    for i in 0..=10 {
        let x = [i as f64 / 10.0];
        let (m4, s4) = model.predict(&x)?;
        let (m12, s12) = full.predict(&x)?;
        println!(
            "x={:.1}  {:+.3} ± {:.3}      {:+.3} ± {:.3}   truth {:+.3}",
            x[0],
            m4,
            s4,
            m12,
            s12,
            f(x[0])
        );
    }
    let post = full.posterior(&[0.35])?;
    println!("\nd mean/dx at 0.35 = {:.3}, d std/dx = {:.4}", post.mean_grad[0], post.std_grad[0]);
    Ok(())
}
