//! Anova-type statistic and its three quantile engines.
//!
//! The statistic is `N·‖C θ̂ − ζ‖² / tr(C Ŝ Cᵀ)` where `Ŝ` is the pooled
//! covariance estimate of `√N·θ̂` (`Σ̂` for covariances, `Υ̂` for
//! correlations). With a transform, `C` is replaced by `C·J(θ̂)` in the trace
//! and `θ̂` by `f(θ̂)` in the numerator.
//!
//! All engines produce a [`ReferenceDistribution`] of `B` resampled
//! statistics. Repetition `b` draws from its own random stream
//! ([`substream`]`(seed, b)`), so the result is bit-identical for any rayon
//! thread count.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimation::{GroupedSample, MomentEstimates};
use crate::hypothesis::{HypothesisSpec, Linearized, Target};
use crate::linalg::{psd_factor, sym_eigenvalues, SymMatrix, DEFAULT_CLAMP_TOL};
use crate::sampling::{fill_standard_normal, substream};

pub const DEFAULT_REPETITIONS: usize = 1000;

/// Below this many repetitions resampling noise dominates the p-value.
pub const MIN_RECOMMENDED_REPETITIONS: usize = 500;

/// How the null distribution of the statistic is approximated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Monte-Carlo draws from the weighted χ² limit.
    MonteCarlo,
    /// Parametric bootstrap.
    Bootstrap,
    /// Taylor-based Monte-Carlo (correlations only).
    Taylor,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::MonteCarlo => "MC",
            Method::Bootstrap => "BT",
            Method::Taylor => "TAY",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Method::MonteCarlo => "Monte-Carlo-technique",
            Method::Bootstrap => "Bootstrap",
            Method::Taylor => "Taylor-based Monte-Carlo-approach",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "MC" => Ok(Method::MonteCarlo),
            "BT" => Ok(Method::Bootstrap),
            "TAY" => Ok(Method::Taylor),
            _ => Err(Error::Config(format!(
                "unknown method '{s}', expected MC, BT or TAY"
            ))),
        }
    }
}

/// Sorted resampled statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceDistribution {
    sorted: Vec<f64>,
}

impl ReferenceDistribution {
    pub fn from_draws(mut draws: Vec<f64>) -> Self {
        draws.sort_by(f64::total_cmp);
        ReferenceDistribution { sorted: draws }
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    /// Fraction of draws `≥ statistic`.
    pub fn p_value(&self, statistic: f64) -> f64 {
        if self.sorted.is_empty() {
            return f64::NAN;
        }
        let below = self.sorted.partition_point(|&x| x < statistic);
        (self.sorted.len() - below) as f64 / self.sorted.len() as f64
    }

    /// Inverse empirical CDF: the smallest draw `x` with `F̂(x) ≥ prob`.
    pub fn quantile(&self, prob: f64) -> f64 {
        let b = self.sorted.len();
        if b == 0 {
            return f64::NAN;
        }
        let k = (prob * b as f64).ceil() as usize;
        self.sorted[k.clamp(1, b) - 1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalValue {
    pub alpha: f64,
    /// `(1 − α)`-quantile of the reference distribution.
    pub value: f64,
}

/// Outcome of a single-statistic test.
#[derive(Debug, Clone, PartialEq)]
pub struct TestReport {
    pub target: Target,
    pub label: String,
    pub statistic: f64,
    pub p_value: f64,
    pub method: Method,
    pub repetitions: usize,
    pub seed: u64,
    pub critical_value: Option<CriticalValue>,
    pub sizes: Vec<usize>,
}

impl TestReport {
    pub fn num_groups(&self) -> usize {
        self.sizes.len()
    }

    /// True when no resampled statistic reached the observed one.
    pub fn below_resolution(&self) -> bool {
        self.p_value == 0.0
    }

    pub fn rejects(&self, alpha: f64) -> bool {
        self.p_value <= alpha
    }
}

/// Hypothesis linearized at the pooled estimate, with `K Ŝ Kᵀ` and its trace.
struct Prepared {
    lin: Linearized,
    projected: DMatrix<f64>,
    trace: f64,
}

fn check_compatible(spec: &HypothesisSpec, est: &MomentEstimates) -> Result<()> {
    if spec.num_groups() != est.num_groups() || spec.dim() != est.dim() {
        return Err(Error::Dimension(format!(
            "hypothesis is for a={}, d={} but the sample has a={}, d={}",
            spec.num_groups(),
            spec.dim(),
            est.num_groups(),
            est.dim()
        )));
    }
    Ok(())
}

fn prepare(spec: &HypothesisSpec, est: &MomentEstimates) -> Result<Prepared> {
    check_compatible(spec, est)?;
    let target = spec.target();
    let lin = spec.linearize(est.theta(target)?)?;
    let pooled = est.pooled_cov(target)?;
    let projected = &lin.matrix * pooled * lin.matrix.transpose();
    let trace = projected.trace();
    if trace.is_nan() || trace <= 0.0 {
        return Err(Error::DegenerateHypothesis { trace });
    }
    Ok(Prepared {
        lin,
        projected,
        trace,
    })
}

fn check_repetitions(b: usize) -> Result<()> {
    if b == 0 {
        return Err(Error::InvalidArgument("need at least one repetition".into()));
    }
    Ok(())
}

/// The Anova-type statistic.
pub fn ats(spec: &HypothesisSpec, est: &MomentEstimates) -> Result<f64> {
    let prep = prepare(spec, est)?;
    Ok(est.total() as f64 * prep.lin.residual.norm_squared() / prep.trace)
}

/// `K Ŝ Kᵀ`, the estimated covariance of `√N·K θ̂`.
pub fn hypothesis_covariance(spec: &HypothesisSpec, est: &MomentEstimates) -> Result<DMatrix<f64>> {
    Ok(prepare(spec, est)?.projected)
}

/// Weights `λ̂` of the weighted χ² limit: eigenvalues of `K Ŝ Kᵀ / tr(K Ŝ Kᵀ)`.
pub fn chi_square_weights(spec: &HypothesisSpec, est: &MomentEstimates) -> Result<DVector<f64>> {
    let prep = prepare(spec, est)?;
    let normalized = SymMatrix::symmetrize(&(prep.projected / prep.trace))?;
    Ok(sym_eigenvalues(&normalized))
}

/// `B` draws of `Σ λ̂_ℓ B_ℓ`, `B_ℓ ~ χ²₁` iid.
pub fn mc_reference(
    spec: &HypothesisSpec,
    est: &MomentEstimates,
    b: usize,
    seed: u64,
) -> Result<ReferenceDistribution> {
    check_repetitions(b)?;
    let weights: Vec<f64> = chi_square_weights(spec, est)?.iter().copied().collect();
    Ok(weighted_chi_square_reference(&weights, b, seed))
}

/// Monte-Carlo draws of `Σ wₗ·zₗ²` for fixed weights.
pub fn weighted_chi_square_reference(weights: &[f64], b: usize, seed: u64) -> ReferenceDistribution {
    let draws: Vec<f64> = (0..b)
        .into_par_iter()
        .map(|rep| {
            let mut rng = substream(seed, rep as u64);
            let mut z = vec![0.0; weights.len()];
            fill_standard_normal(&mut rng, &mut z);
            weights.iter().zip(&z).map(|(w, z)| w * z * z).sum()
        })
        .collect();
    ReferenceDistribution::from_draws(draws)
}

pub fn mc_pvalue(
    spec: &HypothesisSpec,
    est: &MomentEstimates,
    statistic: f64,
    b: usize,
    seed: u64,
) -> Result<f64> {
    Ok(mc_reference(spec, est, b, seed)?.p_value(statistic))
}

/// Per-group quantities of the parametric bootstrap, in the latent
/// coordinates of the group's sampling factor `L`.
struct BootstrapGroup {
    n: usize,
    rank: usize,
    /// `K_i L` (m × r).
    projection: DMatrix<f64>,
    /// `(N/nᵢ)·Lᵀ K_iᵀ K_i L` (r × r).
    trace_form: DMatrix<f64>,
}

/// Parametric bootstrap: per group, `nᵢ` draws from `N(0, Ŝᵢ)` where `Ŝᵢ`
/// is `Σ̂ᵢ` (covariance) or `Υ̂ᵢ` (correlation); each repetition evaluates
/// `N‖K Z̄*‖² / tr(K Ŝ* Kᵀ)` with `Ŝ* = ⊕ (N/nᵢ)·Ŝᵢ*` from the bootstrap
/// sample covariances.
pub fn bootstrap_reference(
    spec: &HypothesisSpec,
    est: &MomentEstimates,
    b: usize,
    seed: u64,
) -> Result<ReferenceDistribution> {
    check_repetitions(b)?;
    let prep = prepare(spec, est)?;
    let target = spec.target();
    let big_n = est.total() as f64;
    let gl = target.group_len(spec.dim());
    let k = &prep.lin.matrix;
    let mut groups = Vec::with_capacity(est.num_groups());
    for (i, g) in est.groups().iter().enumerate() {
        let factor = psd_factor(est.group_cov(target, i)?, DEFAULT_CLAMP_TOL)?;
        let k_block = k.columns(i * gl, gl);
        let projection = k_block * &factor;
        let weight = big_n / g.n as f64;
        let trace_form = projection.transpose() * &projection * weight;
        groups.push(BootstrapGroup {
            n: g.n,
            rank: factor.ncols(),
            projection,
            trace_form,
        });
    }
    let m = k.nrows();
    let draws: Vec<f64> = (0..b)
        .into_par_iter()
        .map(|rep| {
            let mut rng = substream(seed, rep as u64);
            let mut mean_proj = DVector::<f64>::zeros(m);
            let mut denom = 0.0;
            for g in &groups {
                let r = g.rank;
                if r == 0 {
                    continue;
                }
                let mut z = vec![0.0; r * g.n];
                fill_standard_normal(&mut rng, &mut z);
                let mut mean = DVector::<f64>::zeros(r);
                let mut quad = 0.0;
                for obs in z.chunks_exact(r) {
                    for (m, x) in mean.iter_mut().zip(obs) {
                        *m += x;
                    }
                    quad += quad_form(&g.trace_form, obs);
                }
                let n = g.n as f64;
                mean /= n;
                let mean_quad = quad_form(&g.trace_form, mean.as_slice());
                // ⟨H, S*⟩ with S* the unbiased covariance of the draws
                denom += (quad - n * mean_quad) / (n - 1.0);
                mean_proj += &g.projection * &mean;
            }
            let stat = big_n * mean_proj.norm_squared() / denom;
            if stat.is_finite() {
                stat
            } else {
                0.0
            }
        })
        .collect();
    Ok(ReferenceDistribution::from_draws(draws))
}

fn quad_form(h: &DMatrix<f64>, z: &[f64]) -> f64 {
    let r = z.len();
    let data = h.as_slice();
    let mut acc = 0.0;
    for (col, &zc) in z.iter().enumerate() {
        let column = &data[col * r..(col + 1) * r];
        let dot: f64 = column.iter().zip(z).map(|(a, b)| a * b).sum();
        acc += zc * dot;
    }
    acc
}

pub fn bootstrap_pvalue(
    spec: &HypothesisSpec,
    est: &MomentEstimates,
    statistic: f64,
    b: usize,
    seed: u64,
) -> Result<f64> {
    Ok(bootstrap_reference(spec, est, b, seed)?.p_value(statistic))
}

/// Taylor-based Monte-Carlo for correlation hypotheses: `Λᵢ ~ N(0, Σ̂ᵢ)`
/// pushed through the first-order expansion `M̂ᵢ Λᵢ`, stacked with weights
/// `√(N/nᵢ)`, and evaluated as `‖K·vec‖² / tr(K Υ̂ Kᵀ)`.
pub fn taylor_reference(
    spec: &HypothesisSpec,
    est: &MomentEstimates,
    b: usize,
    seed: u64,
) -> Result<ReferenceDistribution> {
    if spec.target() != Target::Correlation {
        return Err(Error::TaylorOnCovariance);
    }
    check_repetitions(b)?;
    let prep = prepare(spec, est)?;
    let big_n = est.total() as f64;
    let gl = spec.target().group_len(spec.dim());
    let k = &prep.lin.matrix;
    let mut maps = Vec::with_capacity(est.num_groups());
    for (i, g) in est.groups().iter().enumerate() {
        let factor = psd_factor(&g.sigma, DEFAULT_CLAMP_TOL)?;
        let corr = est.group_correlation(i)?;
        let weight = (big_n / g.n as f64).sqrt();
        let map = k.columns(i * gl, gl) * &corr.jacobian * factor * weight;
        maps.push(map);
    }
    let m = k.nrows();
    let trace = prep.trace;
    let draws: Vec<f64> = (0..b)
        .into_par_iter()
        .map(|rep| {
            let mut rng = substream(seed, rep as u64);
            let mut acc = DVector::<f64>::zeros(m);
            for map in &maps {
                let mut z = DVector::zeros(map.ncols());
                fill_standard_normal(&mut rng, z.as_mut_slice());
                acc += map * z;
            }
            acc.norm_squared() / trace
        })
        .collect();
    Ok(ReferenceDistribution::from_draws(draws))
}

pub fn taylor_pvalue(
    spec: &HypothesisSpec,
    est: &MomentEstimates,
    statistic: f64,
    b: usize,
    seed: u64,
) -> Result<f64> {
    Ok(taylor_reference(spec, est, b, seed)?.p_value(statistic))
}

/// Reference distribution for `method`.
pub fn reference(
    spec: &HypothesisSpec,
    est: &MomentEstimates,
    method: Method,
    b: usize,
    seed: u64,
) -> Result<ReferenceDistribution> {
    match method {
        Method::MonteCarlo => mc_reference(spec, est, b, seed),
        Method::Bootstrap => bootstrap_reference(spec, est, b, seed),
        Method::Taylor => taylor_reference(spec, est, b, seed),
    }
}

/// Statistic, p-value and critical value at `alpha` from precomputed estimates.
pub fn run_test_with_estimates(
    est: &MomentEstimates,
    spec: &HypothesisSpec,
    method: Method,
    b: usize,
    seed: u64,
    alpha: f64,
) -> Result<TestReport> {
    if method == Method::Taylor && spec.target() != Target::Correlation {
        return Err(Error::TaylorOnCovariance);
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    let statistic = ats(spec, est)?;
    let refdist = reference(spec, est, method, b, seed)?;
    Ok(TestReport {
        target: spec.target(),
        label: spec.label().to_string(),
        statistic,
        p_value: refdist.p_value(statistic),
        method,
        repetitions: b,
        seed,
        critical_value: Some(CriticalValue {
            alpha,
            value: refdist.quantile(1.0 - alpha),
        }),
        sizes: est.sizes(),
    })
}

/// Estimates the moments of `sample` and runs the test.
pub fn run_test(
    sample: &GroupedSample,
    spec: &HypothesisSpec,
    method: Method,
    b: usize,
    seed: u64,
    alpha: f64,
) -> Result<TestReport> {
    if method == Method::Taylor && spec.target() != Target::Correlation {
        return Err(Error::TaylorOnCovariance);
    }
    let est = MomentEstimates::for_target(sample, spec.target())?;
    run_test_with_estimates(&est, spec, method, b, seed, alpha)
}
