//! Per-group and pooled moment estimates for two simulated groups.

use covtest::linalg::SymMatrix;
use covtest::sampling::{substream, GaussianSampler};
use covtest::{GroupedSample, MomentEstimates};

fn main() -> covtest::Result<()> {
    let cov = SymMatrix::from_row_slice(3, &[2.0, 0.6, 0.3, 0.6, 1.0, 0.4, 0.3, 0.4, 1.5])?;
    let sampler = GaussianSampler::new(&cov)?;
    let sample = GroupedSample::new(vec![
        sampler.sample_columns(40, &mut substream(1, 0)),
        sampler.sample_columns(60, &mut substream(1, 1)),
    ])?;

    let est = MomentEstimates::new(&sample)?;
    for (i, g) in est.groups().iter().enumerate() {
        let corr = est.group_correlation(i)?;
        println!("group {} (n = {})", i + 1, g.n);
        println!("  vech(V̂)  = {:.3?}", g.vhat.as_slice());
        println!("  vech⁻(R̂) = {:.3?}", corr.rhat.as_slice());
        println!("  tr Σ̂ = {:.3}, tr Υ̂ = {:.3}", g.sigma.trace(), corr.upsilon.trace());
    }
    println!(
        "pooled Σ̂ is {0}×{0}, pooled Υ̂ is {1}×{1}",
        est.pooled_sigma().nrows(),
        est.pooled_upsilon()?.nrows()
    );
    Ok(())
}
