//! The projection operators on additive elements: project a single level
//! function onto another axis, and check the decomposition of the level
//! projection into the full projection minus the constant part.

use smooth_backfit::{
    compute_marginals, generate, project_p0, project_pk, project_pk_full, seminorm_inner, AdditiveElement,
    ComponentFn, Design, Scenario,
};

fn main() -> smooth_backfit::Result<()> {
    let mut s = Scenario::new(200, vec![ComponentFn::Zero, ComponentFn::Zero], 0.6);
    s.design = Design::Copula;
    s.rho = 0.6;
    s.grid_size = 21;
    let data = generate(&s)?;
    let tables = compute_marginals(&data, &s.kernel()?, &s.grids()?)?;

    // m = m_1 only: a centered level function on the first axis
    let mut m = AdditiveElement::zeros(tables.grids());
    m.levels[0] = tables.grids().axis(0).points().iter().map(|x| x - 0.5).collect();
    m.center(&tables);

    let onto_second = project_pk(&m, 1, &tables)?;
    println!("projection of m_1 onto axis 2 (correlated design):");
    for (x, v) in tables.grids().axis(1).points().iter().zip(&onto_second).step_by(4) {
        println!("  x = {x:.2}: {v:+.4}");
    }

    m.intercept = 1.0;
    m.slopes[1] = vec![0.5; 21];
    let p0 = project_p0(&m, &tables);
    let full = project_pk_full(&m, 1, &tables)?;
    let centered = project_pk(&m, 1, &tables)?;
    let gap = full.iter().zip(&centered).map(|(f, c)| (f - p0 - c).abs()).fold(0.0, f64::max);
    println!("P0(m) = {p0:.4}; max |P_k(m) - P0(m) - projection onto centered levels| = {gap:.1e}");
    println!("squared semi-norm of m: {:.4}", seminorm_inner(&m, &m, &tables)?);
    Ok(())
}
