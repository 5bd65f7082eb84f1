//! Resampling tests for hypotheses about covariance and correlation matrices.
//!
//! The crate works on one or more independent groups of `d`-variate
//! observations. From each group it estimates the half-vectorized covariance
//! (or correlation) matrix together with the covariance of that estimator,
//! and tests linear hypotheses `C·θ = ζ` with an ANOVA-type statistic whose
//! null distribution is approximated by resampling:
//!
//! * [`Method::MonteCarlo`]: weighted sum of `χ²₁` variables with weights
//!   from the estimated hypothesis covariance;
//! * [`Method::Bootstrap`]: parametric bootstrap that re-estimates the
//!   scale on every draw;
//! * [`Method::Taylor`]: correlation-only simulation through the first-order
//!   expansion of the correlation map.
//!
//! A two-group [`combined_test`] checks equal variances and equal
//! correlations simultaneously and reports a p-value for each block.
//!
//! ```
//! use covtest::{predefined_hypothesis, run_test, GroupedSample, Method, Target};
//! use nalgebra::DMatrix;
//!
//! let g1 = DMatrix::from_row_slice(2, 4, &[1.0, 2.0, 0.5, 3.0, 0.2, 1.1, 0.4, 2.0]);
//! let g2 = DMatrix::from_row_slice(2, 4, &[0.3, 1.0, 2.2, 1.4, 1.0, 0.1, 0.7, 0.9]);
//! let sample = GroupedSample::new(vec![g1, g2]).unwrap();
//! let spec = predefined_hypothesis("equal", Target::Covariance, 2, 2, None).unwrap();
//! let report = run_test(&sample, &spec, Method::MonteCarlo, 1000, 42, 0.05).unwrap();
//! assert!((0.0..=1.0).contains(&report.p_value));
//! ```

pub mod cli;
pub mod combined;
pub mod engine;
pub mod error;
pub mod estimation;
pub mod hypothesis;
pub mod linalg;
pub mod sampling;

pub use combined::{
    calibrate_beta, combined_statistic, combined_test, simulate_reference, BandCalibrator,
    CombinedReport,
};
pub use engine::{
    ats, bootstrap_pvalue, mc_pvalue, run_test, run_test_with_estimates, taylor_pvalue, Method,
    ReferenceDistribution, TestReport,
};
pub use error::{Error, ErrorKind, Result};
pub use estimation::{pool_estimates, GroupedSample, MomentEstimates};
pub use hypothesis::{
    custom_hypothesis, predefined_hypothesis, structure_hypothesis, HypothesisParam,
    HypothesisSpec, Target, TransformSpec,
};
pub use linalg::{unvech, vech, vech_strict, HalfVec, HalfVecKind, SymMatrix};
