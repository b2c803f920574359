//! Run the identifiability check on a design with a hole in the middle and on
//! a well-spread design, then show that fitting refuses the former.

use smooth_backfit::{check_identifiability, fit, Dataset, Domain, FitConfig, GridSet, KernelSpec};

fn one_dimensional(xs: &[f64]) -> smooth_backfit::Result<Dataset> {
    let rows: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
    let y = xs.iter().map(|x| x * x).collect();
    Dataset::from_rows(&rows, y, Domain::unit(1)?)
}

fn main() -> smooth_backfit::Result<()> {
    let spec = KernelSpec::epanechnikov(vec![0.1])?;
    let grids = GridSet::uniform(&Domain::unit(1)?, 101)?;

    let gap: Vec<f64> = (0..=30).chain(70..=100).map(|i| i as f64 / 100.0).collect();
    let spread: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();

    for (name, xs) in [("gap", &gap), ("spread", &spread)] {
        let data = one_dimensional(xs)?;
        let report = check_identifiability(&data, &spec, &grids)?;
        println!("{name:>6}: {}", report.summary());
        println!("        {}", serde_json::to_string(&report).expect("report serializes"));
    }

    match fit(&one_dimensional(&gap)?, &spec, &grids, &FitConfig::default()) {
        Ok(_) => println!("unexpectedly fitted the gap data"),
        Err(e) => println!("fit on gap data: {e}"),
    }
    Ok(())
}
