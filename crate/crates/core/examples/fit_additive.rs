//! Fit a two-component additive model on simulated data and compare the
//! estimated components with the truth at a few points.

use smooth_backfit::{fit, generate, ComponentFn, Scenario};

fn main() -> smooth_backfit::Result<()> {
    let mut scenario = Scenario::new(500, vec![ComponentFn::Sine, ComponentFn::Quadratic], 0.5);
    scenario.sigma = 0.3;
    scenario.intercept = 1.0;
    scenario.seed = 11;
    let data = generate(&scenario)?;

    let (fitted, diag) = fit(&data, &scenario.kernel()?, &scenario.grids()?, &scenario.fit_config())?;
    println!(
        "converged after {} sweeps, contraction {:.3}, intercept {:.4}",
        diag.sweeps,
        diag.contraction,
        fitted.intercept()
    );
    println!("{:>6} {:>10} {:>10} {:>10} {:>10}", "x", "m1_hat", "m1", "m2_hat", "m2");
    for x in [0.1, 0.25, 0.5, 0.75, 0.9] {
        println!(
            "{x:>6.2} {:>10.4} {:>10.4} {:>10.4} {:>10.4}",
            fitted.level_at(0, x)?,
            scenario.truth(0, x),
            fitted.level_at(1, x)?,
            scenario.truth(1, x)
        );
    }
    println!("prediction at (0.3, 0.6): {:.4}", fitted.predict(&[0.3, 0.6])?);
    Ok(())
}
