//! In one dimension smooth backfitting is the local linear estimator. Compare
//! the two and print the theoretical bias terms next to the fit.

use smooth_backfit::{fit, generate, local_linear_1d, theory_bias, ComponentFn, FitConfig, Scenario};

fn main() -> smooth_backfit::Result<()> {
    let mut s = Scenario::new(400, vec![ComponentFn::Sine], 0.5);
    s.sigma = 0.2;
    s.seed = 3;
    let data = generate(&s)?;
    let (spec, grids) = (s.kernel()?, s.grids()?);
    let grid = grids.axis(0);

    let (fitted, _) = fit(&data, &spec, &grids, &FitConfig::default().with_tolerance(1e-12))?;
    let oracle = local_linear_1d(data.y(), data.column(0), &spec, grid)?;
    let diff = fitted.level(0).iter().zip(&oracle.level).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("h = {:.4}, largest difference to the local linear fit {diff:.2e}", spec.bandwidth(0));

    let curvature: Vec<f64> = grid.points().iter().map(|&x| ComponentFn::Sine.second_derivative(x, 0.0, 1.0)).collect();
    let (beta, beta_prime) = theory_bias(&curvature, &spec, grid)?;
    println!("{:>6} {:>10} {:>10} {:>10} {:>10}", "x", "m_hat", "m", "beta", "beta'");
    for q in (0..grid.len()).step_by(10) {
        let x = grid.points()[q];
        println!(
            "{x:>6.2} {:>10.4} {:>10.4} {:>10.4} {:>10.4}",
            fitted.level(0)[q],
            s.truth(0, x),
            beta[q],
            beta_prime[q]
        );
    }
    Ok(())
}
