//! Equality of two correlation matrices while the variances differ.

use covtest::engine::{run_test, Method};
use covtest::hypothesis::{predefined_hypothesis, Target};
use covtest::linalg::SymMatrix;
use covtest::sampling::{substream, GaussianSampler};
use covtest::GroupedSample;

fn main() -> covtest::Result<()> {
    let r = [1.0, 0.5, 0.2, 0.5, 1.0, 0.4, 0.2, 0.4, 1.0];
    let sd1 = [1.0, 2.0, 0.5];
    let sd2 = [3.0, 1.0, 1.0];
    let scale = |sd: [f64; 3]| {
        let v: Vec<f64> = (0..9).map(|i| r[i] * sd[i / 3] * sd[i % 3]).collect();
        SymMatrix::from_row_slice(3, &v)
    };
    let sample = GroupedSample::new(vec![
        GaussianSampler::new(&scale(sd1)?)?.sample_columns(80, &mut substream(5, 0)),
        GaussianSampler::new(&scale(sd2)?)?.sample_columns(70, &mut substream(5, 1)),
    ])?;

    let spec = predefined_hypothesis("equal-correlated", Target::Correlation, 2, 3, None)?;
    for method in [Method::MonteCarlo, Method::Bootstrap, Method::Taylor] {
        let report = run_test(&sample, &spec, method, 2000, 9, 0.05)?;
        println!(
            "{:<34} ATS = {:.4}  p = {:.3}",
            method.description(),
            report.statistic,
            report.p_value
        );
    }

    let equal_cov = predefined_hypothesis("equal", Target::Covariance, 2, 3, None)?;
    let report = run_test(&sample, &equal_cov, Method::Bootstrap, 2000, 9, 0.05)?;
    println!("equal covariance (BT): p = {:.3}", report.p_value);
    Ok(())
}
