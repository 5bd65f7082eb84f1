//! Simultaneous two-group test of equal variances and equal correlations.
//!
//! The vector statistic is `T = √N·(diag V̂₁ − diag V̂₂, r̂₁ − r̂₂)`. Its null
//! law is simulated by pushing `Λᵢ ~ N(0, Σ̂ᵢ)` through the first-order
//! expansion `[S_diag; M̂ᵢ]·Λᵢ`. Componentwise two-sided bands at a common
//! local level `β` are calibrated so that the simulated family-wise error
//! stays below `α`, and a block (variances or correlations) rejects when any
//! of its components leaves its band.
//!
//! Bands use "lower" empirical quantiles: at grid point `β = k/B`,
//! `q_{β/2}` is order statistic `⌊k(B−1)/(2B)⌋` and `q_{1−β/2}` is order
//! statistic `⌊(2B−k)(B−1)/(2B)⌋` (0-based). Bands shrink as `k` grows, so
//! the simulated error rate and every rejection region are monotone in `k`.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimation::{GroupedSample, MomentEstimates};
use crate::linalg::{diag_positions, psd_factor, DEFAULT_CLAMP_TOL};
use crate::sampling::{fill_standard_normal, substream};

/// Outcome of the combined test.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinedReport {
    /// `T`: `d` variance differences followed by `p₋` correlation differences.
    pub statistic: DVector<f64>,
    pub alpha: f64,
    /// Calibrated local level at `alpha`.
    pub beta_tilde: f64,
    pub p_variances: f64,
    pub p_correlations: f64,
    pub p_total: f64,
    pub repetitions: usize,
    pub seed: u64,
    pub sizes: Vec<usize>,
}

impl CombinedReport {
    pub fn rejects(&self, alpha: f64) -> bool {
        self.p_total <= alpha
    }
}

fn check_two_groups(n_groups: usize) -> Result<()> {
    if n_groups != 2 {
        return Err(Error::CombinedGroupCount(n_groups));
    }
    Ok(())
}

/// `T` from precomputed estimates (which must include correlations).
pub fn combined_statistic_from(est: &MomentEstimates) -> Result<DVector<f64>> {
    check_two_groups(est.num_groups())?;
    let d = est.dim();
    let diag = diag_positions(d);
    let g = est.groups();
    let r1 = est.group_correlation(0)?.rhat.values();
    let r2 = est.group_correlation(1)?.rhat.values();
    let scale = (est.total() as f64).sqrt();
    let mut t = Vec::with_capacity(d + r1.len());
    for &pos in &diag {
        t.push(scale * (g[0].vhat.values()[pos] - g[1].vhat.values()[pos]));
    }
    for (a, b) in r1.iter().zip(r2.iter()) {
        t.push(scale * (a - b));
    }
    Ok(DVector::from_vec(t))
}

pub fn combined_statistic(sample: &GroupedSample) -> Result<DVector<f64>> {
    check_two_groups(sample.num_groups())?;
    combined_statistic_from(&MomentEstimates::new(sample)?)
}

/// `B × p` matrix of simulated `T^Tay` draws, one per row.
pub fn simulate_reference(est: &MomentEstimates, b: usize, seed: u64) -> Result<DMatrix<f64>> {
    check_two_groups(est.num_groups())?;
    if b == 0 {
        return Err(Error::InvalidArgument("need at least one repetition".into()));
    }
    let d = est.dim();
    let diag = diag_positions(d);
    let big_n = est.total() as f64;
    let mut maps = Vec::with_capacity(2);
    for (i, g) in est.groups().iter().enumerate() {
        let jac = &est.group_correlation(i)?.jacobian;
        let p = g.vhat.len();
        let mut transform = DMatrix::zeros(d + jac.nrows(), p);
        for (row, &pos) in diag.iter().enumerate() {
            transform[(row, pos)] = 1.0;
        }
        transform.view_mut((d, 0), (jac.nrows(), p)).copy_from(jac);
        let factor = psd_factor(&g.sigma, DEFAULT_CLAMP_TOL)?;
        let sign = if i == 0 { 1.0 } else { -1.0 };
        maps.push(transform * factor * (sign * (big_n / g.n as f64).sqrt()));
    }
    let width = maps[0].nrows();
    let rows: Vec<DVector<f64>> = (0..b)
        .into_par_iter()
        .map(|rep| {
            let mut rng = substream(seed, rep as u64);
            let mut t = DVector::<f64>::zeros(width);
            for map in &maps {
                let mut z = DVector::zeros(map.ncols());
                fill_standard_normal(&mut rng, z.as_mut_slice());
                t += map * z;
            }
            t
        })
        .collect();
    Ok(DMatrix::from_fn(b, width, |r, c| rows[r][c]))
}

/// Componentwise quantile bands over a fixed set of reference draws.
#[derive(Debug, Clone)]
pub struct BandCalibrator {
    draws: DMatrix<f64>,
    sorted: Vec<Vec<f64>>,
}

impl BandCalibrator {
    pub fn new(draws: DMatrix<f64>) -> Result<Self> {
        if draws.nrows() == 0 || draws.ncols() == 0 {
            return Err(Error::InvalidArgument("no reference draws".into()));
        }
        let sorted = draws
            .column_iter()
            .map(|c| {
                let mut v: Vec<f64> = c.iter().copied().collect();
                v.sort_by(f64::total_cmp);
                v
            })
            .collect();
        Ok(BandCalibrator { draws, sorted })
    }

    pub fn repetitions(&self) -> usize {
        self.draws.nrows()
    }

    pub fn width(&self) -> usize {
        self.draws.ncols()
    }

    pub fn draws(&self) -> &DMatrix<f64> {
        &self.draws
    }

    /// Order-statistic indices of the band at `β = k/B`.
    fn band_indices(&self, k: usize) -> (usize, usize) {
        let b = self.repetitions() as u64;
        let k = k as u64;
        let lo = k * (b - 1) / (2 * b);
        let hi = (2 * b - k) * (b - 1) / (2 * b);
        (lo as usize, hi as usize)
    }

    /// `(q_{ℓ,β/2}, q_{ℓ,1−β/2})` at `β = k/B`.
    pub fn band(&self, component: usize, k: usize) -> (f64, f64) {
        let (lo, hi) = self.band_indices(k);
        let col = &self.sorted[component];
        (col[lo], col[hi])
    }

    fn outside(&self, row: impl Iterator<Item = (usize, f64)>, k: usize) -> bool {
        let (lo, hi) = self.band_indices(k);
        for (l, x) in row {
            let col = &self.sorted[l];
            if x < col[lo] || x > col[hi] {
                return true;
            }
        }
        false
    }

    /// Number of reference draws with at least one component outside its band.
    pub fn exceedances(&self, k: usize) -> usize {
        (0..self.repetitions())
            .filter(|&r| {
                self.outside(
                    self.draws.row(r).iter().copied().enumerate(),
                    k,
                )
            })
            .count()
    }

    /// Simulated family-wise error rate at `β = k/B`.
    pub fn family_wise_error(&self, k: usize) -> f64 {
        self.exceedances(k) as f64 / self.repetitions() as f64
    }

    /// Largest grid index `k ∈ {0, …, B−1}` whose error rate is `≤ alpha`.
    pub fn beta_index(&self, alpha: f64) -> usize {
        if alpha <= 0.0 {
            return 0;
        }
        let b = self.repetitions();
        // family_wise_error(0) == 0, so k = 0 always qualifies
        let (mut good, mut bad) = (0usize, b);
        while bad - good > 1 {
            let mid = good + (bad - good) / 2;
            if self.family_wise_error(mid) <= alpha {
                good = mid;
            } else {
                bad = mid;
            }
        }
        good
    }

    /// `β̃` for level `alpha`.
    pub fn beta(&self, alpha: f64) -> f64 {
        self.beta_index(alpha) as f64 / self.repetitions() as f64
    }

    /// Whether the components in `block` of `t` leave their bands at `β = k/B`.
    pub fn block_rejects(&self, t: &DVector<f64>, block: Range<usize>, k: usize) -> bool {
        self.outside(block.map(|l| (l, t[l])), k)
    }

    /// Smallest level on the grid `{j/resolution}` at which `block` rejects.
    pub fn block_pvalue(&self, t: &DVector<f64>, block: Range<usize>, resolution: usize) -> f64 {
        if block.is_empty() {
            return 1.0;
        }
        let b = self.repetitions();
        if !self.block_rejects(t, block.clone(), b - 1) {
            return 1.0;
        }
        // first k at which the block rejects
        let (mut lo, mut hi) = (0usize, b - 1);
        if self.block_rejects(t, block.clone(), 0) {
            hi = 0;
        } else {
            while hi - lo > 1 {
                let mid = lo + (hi - lo) / 2;
                if self.block_rejects(t, block.clone(), mid) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
        }
        let count = self.exceedances(hi) as u64;
        let res = resolution.max(1) as u64;
        let steps = (count * res).div_ceil(b as u64);
        steps as f64 / res as f64
    }
}

/// `β̃ = max{β ∈ {0, 1/B, …, (B−1)/B} : simulated FWER(β) ≤ α}`.
pub fn calibrate_beta(draws: &DMatrix<f64>, alpha: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!(
            "alpha must lie in [0, 1], got {alpha}"
        )));
    }
    Ok(BandCalibrator::new(draws.clone())?.beta(alpha))
}

/// Runs the combined test on two groups.
///
/// Block p-values invert the level-α rule over the grid `{j/grid_resolution}`;
/// the total p-value is the smaller of the two, since the global rule rejects
/// as soon as either block does.
pub fn combined_test(
    sample: &GroupedSample,
    b: usize,
    seed: u64,
    alpha: f64,
    grid_resolution: usize,
) -> Result<CombinedReport> {
    check_two_groups(sample.num_groups())?;
    if sample.dim() < 2 {
        return Err(Error::CorrelationDimension);
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!(
            "alpha must lie in [0, 1], got {alpha}"
        )));
    }
    let est = MomentEstimates::new(sample)?;
    combined_test_with_estimates(&est, b, seed, alpha, grid_resolution)
}

pub fn combined_test_with_estimates(
    est: &MomentEstimates,
    b: usize,
    seed: u64,
    alpha: f64,
    grid_resolution: usize,
) -> Result<CombinedReport> {
    let t = combined_statistic_from(est)?;
    let draws = simulate_reference(est, b, seed)?;
    let cal = BandCalibrator::new(draws)?;
    let d = est.dim();
    let width = t.len();
    let p_variances = cal.block_pvalue(&t, 0..d, grid_resolution);
    let p_correlations = cal.block_pvalue(&t, d..width, grid_resolution);
    Ok(CombinedReport {
        statistic: t,
        alpha,
        beta_tilde: cal.beta(alpha),
        p_variances,
        p_correlations,
        p_total: p_variances.min(p_correlations),
        repetitions: b,
        seed,
        sizes: est.sizes(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SymMatrix;
    use crate::sampling::GaussianSampler;

    fn sample(n: usize, seed: u64) -> DMatrix<f64> {
        let cov = SymMatrix::from_row_slice(3, &[1.0, 0.4, 0.1, 0.4, 2.0, 0.3, 0.1, 0.3, 1.5])
            .unwrap();
        GaussianSampler::new(&cov)
            .unwrap()
            .sample_columns(n, &mut substream(seed, 0))
    }

    #[test]
    fn identical_groups_give_zero_statistic() {
        let x = sample(30, 1);
        let s = GroupedSample::new(vec![x.clone(), x]).unwrap();
        let t = combined_statistic(&s).unwrap();
        assert_eq!(t.len(), 6);
        assert!(t.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rescaled_variable_changes_only_its_variance() {
        let x = sample(40, 2);
        let mut y = x.clone();
        y.row_mut(1).scale_mut(2.0);
        let t = combined_statistic(&GroupedSample::new(vec![x, y]).unwrap()).unwrap();
        assert_eq!(t[0], 0.0);
        assert!(t[1].abs() > 0.0);
        assert_eq!(t[2], 0.0);
        for l in 3..6 {
            assert!(t[l].abs() < 1e-12, "{}", t[l]);
        }
    }

    #[test]
    fn hand_computed_two_dimensional_statistic() {
        let g1 = DMatrix::from_row_slice(2, 3, &[0.0, 1.0, 2.0, 0.0, 2.0, 1.0]);
        let g2 = DMatrix::from_row_slice(2, 3, &[0.0, 2.0, 4.0, 1.0, 1.0, 4.0]);
        let t = combined_statistic(&GroupedSample::new(vec![g1, g2]).unwrap()).unwrap();
        // group 1: var = (1, 1), cov = 0.5, r = 0.5
        // group 2: var = (4, 3), cov = 3,  r = 3/√12
        let s6 = 6f64.sqrt();
        let expected = [s6 * (1.0 - 4.0), s6 * (1.0 - 3.0), s6 * (0.5 - 3.0 / 12f64.sqrt())];
        for (a, b) in t.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn needs_two_groups() {
        let s = GroupedSample::new(vec![sample(10, 1)]).unwrap();
        assert!(matches!(
            combined_statistic(&s),
            Err(Error::CombinedGroupCount(1))
        ));
        let s3 = GroupedSample::new(vec![sample(10, 1), sample(10, 2), sample(10, 3)]).unwrap();
        assert!(combined_test(&s3, 100, 1, 0.05, 100).is_err());
    }

    #[test]
    fn zero_sigma_gives_zero_draws() {
        // two observations per group make every Σ̂ᵢ zero
        let g1 = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 2.0]);
        let g2 = DMatrix::from_row_slice(2, 2, &[1.0, 3.0, 0.5, 0.0]);
        let est = MomentEstimates::new(&GroupedSample::new(vec![g1, g2]).unwrap()).unwrap();
        let draws = simulate_reference(&est, 50, 3).unwrap();
        assert!(draws.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn beta_edge_cases() {
        let draws = DMatrix::from_fn(200, 1, |r, _| r as f64);
        assert_eq!(calibrate_beta(&draws, 0.0).unwrap(), 0.0);
        let b = calibrate_beta(&draws, 0.05).unwrap();
        assert!((b - 0.05).abs() <= 2.0 / 200.0, "{b}");
        assert!(calibrate_beta(&draws, -0.1).is_err());
    }

    #[test]
    fn band_indices_cover_everything_at_zero() {
        let cal = BandCalibrator::new(DMatrix::from_fn(10, 2, |r, c| (r * (c + 1)) as f64)).unwrap();
        assert_eq!(cal.band_indices(0), (0, 9));
        assert_eq!(cal.exceedances(0), 0);
    }

    #[test]
    fn identical_groups_have_large_pvalues() {
        let x = sample(50, 4);
        let s = GroupedSample::new(vec![x.clone(), x]).unwrap();
        let r = combined_test(&s, 1000, 123, 0.05, 1000).unwrap();
        assert!(r.p_variances >= 0.99, "{r:?}");
        assert!(r.p_correlations >= 0.99, "{r:?}");
        assert!(r.p_total >= 0.99, "{r:?}");
    }
}
