//! Equality of three covariance matrices with each resampling engine, plus
//! the same hypothesis written as a custom `(C, ζ)` pair.

use covtest::engine::{run_test, Method};
use covtest::hypothesis::{custom_hypothesis, predefined_hypothesis, Target};
use covtest::linalg::{kron, SymMatrix};
use covtest::sampling::{substream, GaussianSampler};
use covtest::GroupedSample;
use nalgebra::{DMatrix, DVector};

fn main() -> covtest::Result<()> {
    let base = SymMatrix::from_row_slice(3, &[2.0, 0.6, 0.3, 0.6, 1.0, 0.4, 0.3, 0.4, 1.5])?;
    let inflated = SymMatrix::symmetrize(&(base.as_matrix() * 1.8))?;
    let groups = [(&base, 45), (&base, 50), (&inflated, 40)]
        .iter()
        .enumerate()
        .map(|(i, (cov, n))| {
            Ok(GaussianSampler::new(cov)?.sample_columns(*n, &mut substream(11, i as u64)))
        })
        .collect::<covtest::Result<Vec<_>>>()?;
    let sample = GroupedSample::new(groups)?;

    let spec = predefined_hypothesis("equal", Target::Covariance, 3, 3, None)?;
    for method in [Method::MonteCarlo, Method::Bootstrap] {
        let r = run_test(&sample, &spec, method, 1000, 123, 0.05)?;
        println!("{method}: ATS = {:.4}, p = {:.3}", r.statistic, r.p_value);
    }

    // P₃ ⊗ I₆ with P₃ = I₃ − J₃/3
    let p3 = DMatrix::identity(3, 3) - DMatrix::from_element(3, 3, 1.0 / 3.0);
    let c = kron(&p3, &DMatrix::identity(6, 6));
    let custom = custom_hypothesis(c, DVector::zeros(18), Target::Covariance, 3, 3)?;
    let r = run_test(&sample, &custom, Method::MonteCarlo, 1000, 123, 0.05)?;
    println!("custom C: ATS = {:.4}, p = {:.3}", r.statistic, r.p_value);
    Ok(())
}
