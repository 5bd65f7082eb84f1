//! Simultaneous test of equal variances and equal correlations for two groups
//! that differ only in one correlation.

use covtest::combined::combined_test;
use covtest::linalg::SymMatrix;
use covtest::sampling::{substream, GaussianSampler};
use covtest::GroupedSample;

fn main() -> covtest::Result<()> {
    let v1 = SymMatrix::from_row_slice(3, &[1.0, 0.2, 0.1, 0.2, 1.0, 0.3, 0.1, 0.3, 1.0])?;
    let v2 = SymMatrix::from_row_slice(3, &[1.0, 0.7, 0.1, 0.7, 1.0, 0.3, 0.1, 0.3, 1.0])?;
    let sample = GroupedSample::new(vec![
        GaussianSampler::new(&v1)?.sample_columns(80, &mut substream(21, 0)),
        GaussianSampler::new(&v2)?.sample_columns(90, &mut substream(21, 1)),
    ])?;

    let report = combined_test(&sample, 2000, 123, 0.05, 2000)?;
    println!("T        = {:.3?}", report.statistic.as_slice());
    println!("β̃        = {:.4}", report.beta_tilde);
    println!("p (var)  = {:.3}", report.p_variances);
    println!("p (corr) = {:.3}", report.p_correlations);
    println!("p total  = {:.3}", report.p_total);
    Ok(())
}
