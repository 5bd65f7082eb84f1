//! Per-group and pooled moment estimators.
//!
//! For each group the crate estimates the half-vectorized covariance `v̂ᵢ`,
//! the covariance `Σ̂ᵢ` of `vech(εεᵀ)` (a fourth-moment quantity), the strict
//! half-vectorized correlation `r̂ᵢ`, the Jacobian `M` of the covariance to
//! correlation map, and `Υ̂ᵢ = M Σ̂ᵢ Mᵀ`. Pooled covariances are block
//! diagonal with block weights `N/nᵢ`.
//!
//! Group means are nuisance parameters: only centered observations enter.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hypothesis::Target;
use crate::linalg::{
    block_diag, strict_pairs, vech_index, HalfVec, HalfVecKind, SymMatrix,
};

/// Observations of `a` groups; group `i` is a `d × nᵢ` matrix whose columns
/// are subjects.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedSample {
    groups: Vec<DMatrix<f64>>,
}

impl GroupedSample {
    pub fn new(groups: Vec<DMatrix<f64>>) -> Result<Self> {
        let first = groups
            .first()
            .ok_or_else(|| Error::Data("sample has no groups".into()))?;
        let d = first.nrows();
        if d == 0 {
            return Err(Error::Data("sample has no variables".into()));
        }
        for (i, g) in groups.iter().enumerate() {
            if g.nrows() != d {
                return Err(Error::Data(format!(
                    "group {} has {} variables, group 1 has {d}",
                    i + 1,
                    g.nrows()
                )));
            }
            if g.ncols() < 2 {
                return Err(Error::TooFewObservations {
                    group: i + 1,
                    n: g.ncols(),
                });
            }
            if g.iter().any(|x| !x.is_finite()) {
                return Err(Error::Data(format!(
                    "group {} contains non-finite values",
                    i + 1
                )));
            }
        }
        Ok(GroupedSample { groups })
    }

    /// Splits a `d × N` matrix whose columns are ordered by group.
    pub fn from_stacked(data: &DMatrix<f64>, sizes: &[usize]) -> Result<Self> {
        let total: usize = sizes.iter().sum();
        if total != data.ncols() {
            return Err(Error::Data(format!(
                "group sizes sum to {total} but there are {} observations",
                data.ncols()
            )));
        }
        let mut start = 0;
        let mut groups = Vec::with_capacity(sizes.len());
        for &n in sizes {
            groups.push(data.columns(start, n).into_owned());
            start += n;
        }
        Self::new(groups)
    }

    pub fn groups(&self) -> &[DMatrix<f64>] {
        &self.groups
    }

    pub fn group(&self, i: usize) -> &DMatrix<f64> {
        &self.groups[i]
    }

    pub fn dim(&self) -> usize {
        self.groups[0].nrows()
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.groups.iter().map(|g| g.ncols()).collect()
    }

    pub fn total(&self) -> usize {
        self.groups.iter().map(|g| g.ncols()).sum()
    }
}

fn check_group_size(x: &DMatrix<f64>) -> Result<()> {
    if x.ncols() < 2 {
        return Err(Error::TooFewObservations {
            group: 1,
            n: x.ncols(),
        });
    }
    Ok(())
}

fn centered(x: &DMatrix<f64>) -> DMatrix<f64> {
    let mean = x.column_sum() / x.ncols() as f64;
    let mut out = x.clone();
    for mut col in out.column_iter_mut() {
        col -= &mean;
    }
    out
}

fn cov_matrix(x: &DMatrix<f64>) -> DMatrix<f64> {
    let xc = centered(x);
    let n = x.ncols() as f64;
    let s = &xc * xc.transpose() / (n - 1.0);
    SymMatrix::symmetrize(&s)
        .expect("square by construction")
        .into_matrix()
}

/// vech of the unbiased sample covariance of the columns of `x`.
pub fn group_cov_vector(x: &DMatrix<f64>) -> Result<HalfVec> {
    check_group_size(x)?;
    let s = SymMatrix::symmetrize(&cov_matrix(x))?;
    Ok(crate::linalg::vech(&s))
}

/// Estimator of `Cov(vech(εεᵀ))`:
/// `(n−1)⁻¹ Σ_k wₖwₖᵀ` with `wₖ = vech(X̃ₖX̃ₖᵀ − n⁻¹Σ_ℓ X̃_ℓX̃_ℓᵀ)`.
pub fn group_fourth_moment_cov(x: &DMatrix<f64>) -> Result<SymMatrix> {
    check_group_size(x)?;
    let d = x.nrows();
    let n = x.ncols();
    let p = HalfVecKind::Full.len_for(d);
    let xc = centered(x);
    let mut w = DMatrix::zeros(p, n);
    for (k, col) in xc.column_iter().enumerate() {
        let mut pos = 0;
        for j in 0..d {
            for l in j..d {
                w[(pos, k)] = col[j] * col[l];
                pos += 1;
            }
        }
    }
    let mean = w.column_sum() / w.ncols() as f64;
    for mut col in w.column_iter_mut() {
        col -= &mean;
    }
    let sigma = &w * w.transpose() / (n as f64 - 1.0);
    SymMatrix::symmetrize(&sigma)
}

fn corr_from_cov_vector(v: &HalfVec, group: usize, scale: &[f64]) -> Result<HalfVec> {
    let d = v.dim();
    if d < 2 {
        return Err(Error::CorrelationDimension);
    }
    let vals = v.values();
    for j in 0..d {
        let vjj = vals[vech_index(d, j, j)];
        // round-off floor for a constant column
        let floor = (64.0 * f64::EPSILON * scale[j]).powi(2);
        if vjj.is_nan() || vjj <= floor {
            return Err(Error::DegenerateComponent {
                group,
                variable: j + 1,
            });
        }
    }
    let r: Vec<f64> = strict_pairs(d)
        .into_iter()
        .map(|(j, k)| {
            let vjk = vals[vech_index(d, j, k)];
            let vjj = vals[vech_index(d, j, j)];
            let vkk = vals[vech_index(d, k, k)];
            (vjk / (vjj * vkk).sqrt()).clamp(-1.0, 1.0)
        })
        .collect();
    HalfVec::new(HalfVecKind::Strict, DVector::from_vec(r))
}

fn column_scales(x: &DMatrix<f64>) -> Vec<f64> {
    x.row_iter()
        .map(|row| row.iter().fold(0.0_f64, |m, v| m.max(v.abs())))
        .collect()
}

fn group_corr_vector_indexed(x: &DMatrix<f64>, group: usize) -> Result<HalfVec> {
    if x.nrows() < 2 {
        return Err(Error::CorrelationDimension);
    }
    let v = group_cov_vector(x)?;
    corr_from_cov_vector(&v, group, &column_scales(x))
}

/// Strict half-vectorized Pearson correlation of the columns of `x`.
pub fn group_corr_vector(x: &DMatrix<f64>) -> Result<HalfVec> {
    group_corr_vector_indexed(x, 1)
}

/// Jacobian (p₋ × p) of `vech(V) ↦ vech⁻(R)` evaluated at `v`.
///
/// Row `(j,k)` has `∂r/∂v_jk = (v_jj v_kk)^{-1/2}`, `∂r/∂v_jj = −r/(2v_jj)`
/// and `∂r/∂v_kk = −r/(2v_kk)`.
pub fn correlation_jacobian(v: &HalfVec) -> Result<DMatrix<f64>> {
    if v.kind() != HalfVecKind::Full {
        return Err(Error::Dimension(
            "correlation Jacobian needs a full half-vectorization".into(),
        ));
    }
    let d = v.dim();
    if d < 2 {
        return Err(Error::CorrelationDimension);
    }
    let vals = v.values();
    for j in 0..d {
        let idx = vech_index(d, j, j);
        if vals[idx].is_nan() || vals[idx] <= 0.0 {
            return Err(Error::NonPositiveVariance {
                index: idx,
                value: vals[idx],
            });
        }
    }
    let pairs = strict_pairs(d);
    let mut m = DMatrix::zeros(pairs.len(), v.len());
    for (row, (j, k)) in pairs.into_iter().enumerate() {
        let (jj, kk, jk) = (vech_index(d, j, j), vech_index(d, k, k), vech_index(d, j, k));
        let inv = 1.0 / (vals[jj] * vals[kk]).sqrt();
        let r = vals[jk] * inv;
        m[(row, jk)] = inv;
        m[(row, jj)] = -r / (2.0 * vals[jj]);
        m[(row, kk)] = -r / (2.0 * vals[kk]);
    }
    Ok(m)
}

/// `M Σ Mᵀ`, symmetrized.
pub fn group_upsilon(sigma: &SymMatrix, m: &DMatrix<f64>) -> Result<SymMatrix> {
    if m.ncols() != sigma.dim() {
        return Err(Error::Dimension(format!(
            "Jacobian has {} columns but Σ is {}×{}",
            m.ncols(),
            sigma.dim(),
            sigma.dim()
        )));
    }
    if m.nrows() == 0 {
        return Err(Error::Dimension("Jacobian has no rows".into()));
    }
    SymMatrix::symmetrize(&(m * sigma.as_matrix() * m.transpose()))
}

/// Correlation-side estimates of one group.
#[derive(Debug, Clone)]
pub struct GroupCorrelation {
    pub rhat: HalfVec,
    pub jacobian: DMatrix<f64>,
    pub upsilon: SymMatrix,
}

/// Estimates of one group.
#[derive(Debug, Clone)]
pub struct GroupMoments {
    pub n: usize,
    pub vhat: HalfVec,
    pub sigma: SymMatrix,
    pub correlation: Option<GroupCorrelation>,
}

/// Per-group and pooled estimates. Immutable after construction.
#[derive(Debug, Clone)]
pub struct MomentEstimates {
    d: usize,
    groups: Vec<GroupMoments>,
    pooled_v: DVector<f64>,
    pooled_sigma: DMatrix<f64>,
    pooled_r: Option<DVector<f64>>,
    pooled_upsilon: Option<DMatrix<f64>>,
}

impl MomentEstimates {
    /// Covariance and correlation estimates; fails when the correlation is
    /// undefined (d < 2 or a zero sample variance).
    pub fn new(sample: &GroupedSample) -> Result<Self> {
        Self::build(sample, true)
    }

    /// Covariance-side estimates only.
    pub fn covariance_only(sample: &GroupedSample) -> Result<Self> {
        Self::build(sample, false)
    }

    /// Estimates needed for tests on `target`.
    pub fn for_target(sample: &GroupedSample, target: Target) -> Result<Self> {
        Self::build(sample, target == Target::Correlation)
    }

    fn build(sample: &GroupedSample, with_correlation: bool) -> Result<Self> {
        let big_n = sample.total() as f64;
        let mut groups = Vec::with_capacity(sample.num_groups());
        for (i, x) in sample.groups().iter().enumerate() {
            let vhat = group_cov_vector(x)?;
            let sigma = group_fourth_moment_cov(x)?;
            let correlation = if with_correlation {
                let rhat = group_corr_vector_indexed(x, i + 1)?;
                let jacobian = correlation_jacobian(&vhat)?;
                let upsilon = group_upsilon(&sigma, &jacobian)?;
                Some(GroupCorrelation {
                    rhat,
                    jacobian,
                    upsilon,
                })
            } else {
                None
            };
            groups.push(GroupMoments {
                n: x.ncols(),
                vhat,
                sigma,
                correlation,
            });
        }
        let weights: Vec<f64> = groups.iter().map(|g| big_n / g.n as f64).collect();
        let pooled_v = stack(groups.iter().map(|g| g.vhat.values()));
        let sigma_blocks: Vec<DMatrix<f64>> =
            groups.iter().map(|g| g.sigma.as_matrix().clone()).collect();
        let pooled_sigma = block_diag(&sigma_blocks, &weights)?;
        let (pooled_r, pooled_upsilon) = if with_correlation {
            let corr: Vec<&GroupCorrelation> = groups
                .iter()
                .map(|g| g.correlation.as_ref().expect("computed above"))
                .collect();
            let r = stack(corr.iter().map(|c| c.rhat.values()));
            let blocks: Vec<DMatrix<f64>> =
                corr.iter().map(|c| c.upsilon.as_matrix().clone()).collect();
            (Some(r), Some(block_diag(&blocks, &weights)?))
        } else {
            (None, None)
        };
        Ok(MomentEstimates {
            d: sample.dim(),
            groups,
            pooled_v,
            pooled_sigma,
            pooled_r,
            pooled_upsilon,
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn groups(&self) -> &[GroupMoments] {
        &self.groups
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.groups.iter().map(|g| g.n).collect()
    }

    pub fn total(&self) -> usize {
        self.groups.iter().map(|g| g.n).sum()
    }

    pub fn has_correlation(&self) -> bool {
        self.pooled_r.is_some()
    }

    pub fn pooled_v(&self) -> &DVector<f64> {
        &self.pooled_v
    }

    /// `⊕ (N/nᵢ)·Σ̂ᵢ`.
    pub fn pooled_sigma(&self) -> &DMatrix<f64> {
        &self.pooled_sigma
    }

    pub fn pooled_r(&self) -> Result<&DVector<f64>> {
        self.pooled_r.as_ref().ok_or_else(missing_correlation)
    }

    /// `⊕ (N/nᵢ)·Υ̂ᵢ`.
    pub fn pooled_upsilon(&self) -> Result<&DMatrix<f64>> {
        self.pooled_upsilon.as_ref().ok_or_else(missing_correlation)
    }

    /// Pooled parameter estimate for `target`.
    pub fn theta(&self, target: Target) -> Result<&DVector<f64>> {
        match target {
            Target::Covariance => Ok(&self.pooled_v),
            Target::Correlation => self.pooled_r(),
        }
    }

    /// Pooled covariance estimate of `√N·θ̂` for `target`.
    pub fn pooled_cov(&self, target: Target) -> Result<&DMatrix<f64>> {
        match target {
            Target::Covariance => Ok(&self.pooled_sigma),
            Target::Correlation => self.pooled_upsilon(),
        }
    }

    /// Unweighted per-group covariance block (`Σ̂ᵢ` or `Υ̂ᵢ`).
    pub fn group_cov(&self, target: Target, i: usize) -> Result<&SymMatrix> {
        let g = &self.groups[i];
        match target {
            Target::Covariance => Ok(&g.sigma),
            Target::Correlation => g
                .correlation
                .as_ref()
                .map(|c| &c.upsilon)
                .ok_or_else(missing_correlation),
        }
    }

    pub fn group_correlation(&self, i: usize) -> Result<&GroupCorrelation> {
        self.groups[i]
            .correlation
            .as_ref()
            .ok_or_else(missing_correlation)
    }
}

/// Same as [`MomentEstimates::new`].
pub fn pool_estimates(sample: &GroupedSample) -> Result<MomentEstimates> {
    MomentEstimates::new(sample)
}

fn missing_correlation() -> Error {
    Error::InvalidArgument("correlation estimates were not computed for this sample".into())
}

fn stack<'a>(parts: impl Iterator<Item = &'a DVector<f64>>) -> DVector<f64> {
    let v: Vec<f64> = parts.flat_map(|p| p.iter().copied()).collect();
    DVector::from_vec(v)
}
