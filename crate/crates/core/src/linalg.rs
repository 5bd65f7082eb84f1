//! Dense symmetric-matrix utilities.
//!
//! Half-vectorization uses the row-major upper triangle throughout the crate:
//! `(1,1), (1,2), …, (1,d), (2,2), …, (d,d)` for the full kind and the same
//! order without the diagonal for the strict kind. Hypothesis matrices index
//! into exactly this layout.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative eigenvalue threshold below which [`psd_factor`] clamps to zero.
pub const DEFAULT_CLAMP_TOL: f64 = 1e-10;

/// A square matrix whose entries are exactly symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    /// Wraps `m`, rejecting it unless it is square and exactly symmetric.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() || m.nrows() == 0 {
            return Err(Error::Dimension(format!(
                "expected a non-empty square matrix, got {}×{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let d = m.nrows();
        for j in 0..d {
            for k in (j + 1)..d {
                if m[(j, k)] != m[(k, j)] {
                    return Err(Error::Dimension(format!(
                        "matrix is not symmetric at ({j},{k})"
                    )));
                }
            }
        }
        Ok(SymMatrix(m))
    }

    /// Returns `(m + mᵀ)/2`, which is exactly symmetric.
    pub fn symmetrize(m: &DMatrix<f64>) -> Result<Self> {
        if !m.is_square() || m.nrows() == 0 {
            return Err(Error::Dimension(format!(
                "expected a non-empty square matrix, got {}×{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let d = m.nrows();
        let out = DMatrix::from_fn(d, d, |j, k| 0.5 * (m[(j, k)] + m[(k, j)]));
        Ok(SymMatrix(out))
    }

    pub fn from_row_slice(d: usize, values: &[f64]) -> Result<Self> {
        if values.len() != d * d {
            return Err(Error::Dimension(format!(
                "{} values cannot fill a {d}×{d} matrix",
                values.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(d, d, values))
    }

    pub fn identity(d: usize) -> Self {
        SymMatrix(DMatrix::identity(d, d))
    }

    pub fn zeros(d: usize) -> Self {
        SymMatrix(DMatrix::zeros(d, d))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }
}

impl std::ops::Index<(usize, usize)> for SymMatrix {
    type Output = f64;

    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.0[idx]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HalfVecKind {
    /// Upper triangle including the diagonal, length d(d+1)/2.
    Full,
    /// Upper triangle excluding the diagonal, length d(d−1)/2.
    Strict,
}

impl HalfVecKind {
    pub fn len_for(self, d: usize) -> usize {
        match self {
            HalfVecKind::Full => d * (d + 1) / 2,
            HalfVecKind::Strict => d * d.saturating_sub(1) / 2,
        }
    }

    fn name(self) -> &'static str {
        match self {
            HalfVecKind::Full => "full",
            HalfVecKind::Strict => "strict",
        }
    }

    /// Recovers `d` from a vector length, if the length is admissible.
    pub fn dim_for_len(self, len: usize) -> Option<usize> {
        let min_d = match self {
            HalfVecKind::Full => 1,
            HalfVecKind::Strict => 2,
        };
        let mut d = min_d;
        loop {
            let l = self.len_for(d);
            if l == len {
                return Some(d);
            }
            if l > len {
                return None;
            }
            d += 1;
        }
    }
}

/// A half-vectorized symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfVec {
    d: usize,
    kind: HalfVecKind,
    values: DVector<f64>,
}

impl HalfVec {
    pub fn new(kind: HalfVecKind, values: DVector<f64>) -> Result<Self> {
        let d = kind
            .dim_for_len(values.len())
            .ok_or(Error::InvalidHalfVecLength {
                len: values.len(),
                kind: kind.name(),
            })?;
        Ok(HalfVec { d, kind, values })
    }

    pub fn from_slice(kind: HalfVecKind, values: &[f64]) -> Result<Self> {
        Self::new(kind, DVector::from_column_slice(values))
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn kind(&self) -> HalfVecKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn into_values(self) -> DVector<f64> {
        self.values
    }

    pub fn as_slice(&self) -> &[f64] {
        self.values.as_slice()
    }
}

/// Offset of entry `(j, k)`, `j ≤ k`, in the full half-vectorization.
pub fn vech_index(d: usize, j: usize, k: usize) -> usize {
    debug_assert!(j <= k && k < d);
    j * (2 * d - j + 1) / 2 + (k - j)
}

/// Offset of entry `(j, k)`, `j < k`, in the strict half-vectorization.
pub fn vech_strict_index(d: usize, j: usize, k: usize) -> usize {
    debug_assert!(j < k && k < d);
    j * (2 * d - j - 1) / 2 + (k - j - 1)
}

/// Positions of the diagonal entries within the full half-vectorization.
pub fn diag_positions(d: usize) -> Vec<usize> {
    (0..d).map(|j| vech_index(d, j, j)).collect()
}

/// Positions of the off-diagonal entries within the full half-vectorization,
/// in row-major order.
pub fn offdiag_positions(d: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(HalfVecKind::Strict.len_for(d));
    for j in 0..d {
        for k in (j + 1)..d {
            out.push(vech_index(d, j, k));
        }
    }
    out
}

/// Row-major `(j, k)` pairs of the strict upper triangle, in vech⁻ order.
pub fn strict_pairs(d: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(HalfVecKind::Strict.len_for(d));
    for j in 0..d {
        for k in (j + 1)..d {
            out.push((j, k));
        }
    }
    out
}

pub fn vech(s: &SymMatrix) -> HalfVec {
    let d = s.dim();
    let mut values = Vec::with_capacity(HalfVecKind::Full.len_for(d));
    for j in 0..d {
        for k in j..d {
            values.push(s[(j, k)]);
        }
    }
    HalfVec {
        d,
        kind: HalfVecKind::Full,
        values: DVector::from_vec(values),
    }
}

pub fn vech_strict(s: &SymMatrix) -> Result<HalfVec> {
    let d = s.dim();
    if d < 2 {
        return Err(Error::CorrelationDimension);
    }
    let values: Vec<f64> = strict_pairs(d).into_iter().map(|jk| s[jk]).collect();
    Ok(HalfVec {
        d,
        kind: HalfVecKind::Strict,
        values: DVector::from_vec(values),
    })
}

/// Inverse of [`vech`] / [`vech_strict`]. The strict kind gets a unit diagonal.
pub fn unvech(v: &HalfVec) -> SymMatrix {
    let d = v.d;
    let mut m = DMatrix::zeros(d, d);
    let mut it = v.values.iter();
    match v.kind {
        HalfVecKind::Full => {
            for j in 0..d {
                for k in j..d {
                    let x = *it.next().expect("length checked at construction");
                    m[(j, k)] = x;
                    m[(k, j)] = x;
                }
            }
        }
        HalfVecKind::Strict => {
            for j in 0..d {
                m[(j, j)] = 1.0;
                for k in (j + 1)..d {
                    let x = *it.next().expect("length checked at construction");
                    m[(j, k)] = x;
                    m[(k, j)] = x;
                }
            }
        }
    }
    SymMatrix(m)
}

/// `P_n = I_n − J_n/n`.
pub fn centering_matrix(n: usize) -> Result<SymMatrix> {
    if n < 1 {
        return Err(Error::InvalidArgument(
            "centering matrix needs n ≥ 1".into(),
        ));
    }
    let off = -1.0 / n as f64;
    let diag = 1.0 + off;
    Ok(SymMatrix(DMatrix::from_fn(n, n, |j, k| {
        if j == k {
            diag
        } else {
            off
        }
    })))
}

pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

/// Eigenvalues of a symmetric matrix in descending order.
pub fn sym_eigenvalues(s: &SymMatrix) -> DVector<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(s.0.clone())
        .eigenvalues
        .iter()
        .copied()
        .collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    DVector::from_vec(ev)
}

/// Factor `L` (d×r) with `L·Lᵀ ≈ S`, built from the eigendecomposition.
///
/// Eigenvalues below `clamp_tol·λ_max` are treated as zero and their columns
/// dropped, so `r` is the numerical rank. Singular inputs are accepted; an
/// eigenvalue below `−clamp_tol·‖S‖₂` is rejected.
pub fn psd_factor(s: &SymMatrix, clamp_tol: f64) -> Result<DMatrix<f64>> {
    let d = s.dim();
    let eig = SymmetricEigen::new(s.0.clone());
    let norm = eig.eigenvalues.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let lambda_max = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lambda_min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if lambda_min < -clamp_tol * norm {
        return Err(Error::NotPositiveSemidefinite {
            min_eigenvalue: lambda_min,
        });
    }
    let threshold = clamp_tol * lambda_max.max(0.0);
    let mut order: Vec<usize> = (0..d)
        .filter(|&i| eig.eigenvalues[i] > threshold && eig.eigenvalues[i] > 0.0)
        .collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut factor = DMatrix::zeros(d, order.len());
    for (col, &i) in order.iter().enumerate() {
        let scale = eig.eigenvalues[i].sqrt();
        factor.set_column(col, &(eig.eigenvectors.column(i) * scale));
    }
    Ok(factor)
}

/// Direct sum `⊕ wᵢ·Bᵢ` of square blocks.
pub fn block_diag(blocks: &[DMatrix<f64>], weights: &[f64]) -> Result<DMatrix<f64>> {
    if blocks.len() != weights.len() {
        return Err(Error::Dimension(format!(
            "{} blocks but {} weights",
            blocks.len(),
            weights.len()
        )));
    }
    if let Some(b) = blocks.iter().find(|b| !b.is_square()) {
        return Err(Error::Dimension(format!(
            "block_diag needs square blocks, got {}×{}",
            b.nrows(),
            b.ncols()
        )));
    }
    let total: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(total, total);
    let mut offset = 0;
    for (b, &w) in blocks.iter().zip(weights) {
        let n = b.nrows();
        out.view_mut((offset, offset), (n, n)).copy_from(&(b * w));
        offset += n;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: &DMatrix<f64>, b: &DMatrix<f64>, atol: f64, rtol: f64) {
        assert_eq!(a.shape(), b.shape());
        for (x, y) in a.iter().zip(b.iter()) {
            assert!(
                (x - y).abs() <= atol + rtol * y.abs(),
                "{x} vs {y}\n{a}\n{b}"
            );
        }
    }

    #[test]
    fn vech_small_cases() {
        let s = SymMatrix::from_row_slice(2, &[4.0, 1.0, 1.0, 9.0]).unwrap();
        assert_eq!(vech(&s).as_slice(), &[4.0, 1.0, 9.0]);
        assert_eq!(
            vech(&SymMatrix::identity(3)).as_slice(),
            &[1.0, 0.0, 0.0, 1.0, 0.0, 1.0]
        );
    }

    #[test]
    fn vech_strict_small_cases() {
        let r = SymMatrix::from_row_slice(2, &[1.0, 0.5, 0.5, 1.0]).unwrap();
        assert_eq!(vech_strict(&r).unwrap().as_slice(), &[0.5]);
        assert_eq!(
            vech_strict(&SymMatrix::identity(3)).unwrap().as_slice(),
            &[0.0, 0.0, 0.0]
        );
        let (a, b, c) = (0.7, 0.4, 0.2);
        let toep = SymMatrix::from_row_slice(
            4,
            &[
                1.0, a, b, c, //
                a, 1.0, a, b, //
                b, a, 1.0, a, //
                c, b, a, 1.0,
            ],
        )
        .unwrap();
        assert_eq!(vech_strict(&toep).unwrap().as_slice(), &[a, b, c, a, b, a]);
    }

    #[test]
    fn vech_strict_rejects_scalar() {
        let s = SymMatrix::identity(1);
        assert!(matches!(vech_strict(&s), Err(Error::CorrelationDimension)));
    }

    #[test]
    fn unvech_examples() {
        let v = HalfVec::from_slice(HalfVecKind::Full, &[4.0, 1.0, 9.0]).unwrap();
        assert_eq!(
            unvech(&v),
            SymMatrix::from_row_slice(2, &[4.0, 1.0, 1.0, 9.0]).unwrap()
        );
        let r = HalfVec::from_slice(HalfVecKind::Strict, &[0.5]).unwrap();
        assert_eq!(
            unvech(&r),
            SymMatrix::from_row_slice(2, &[1.0, 0.5, 0.5, 1.0]).unwrap()
        );
    }

    #[test]
    fn halfvec_rejects_non_triangular_lengths() {
        assert!(HalfVec::from_slice(HalfVecKind::Full, &[1.0, 2.0]).is_err());
        assert!(HalfVec::from_slice(HalfVecKind::Full, &[]).is_err());
        assert!(HalfVec::from_slice(HalfVecKind::Strict, &[1.0, 2.0]).is_err());
        assert!(HalfVec::from_slice(HalfVecKind::Strict, &[]).is_err());
        assert_eq!(
            HalfVec::from_slice(HalfVecKind::Strict, &[0.0; 6]).unwrap().dim(),
            4
        );
    }

    #[test]
    fn index_formula_matches_naive_enumeration() {
        for d in 1..8 {
            let mut pos = 0;
            for j in 0..d {
                for k in j..d {
                    assert_eq!(vech_index(d, j, k), pos);
                    pos += 1;
                }
            }
            let mut pos = 0;
            for j in 0..d {
                for k in (j + 1)..d {
                    assert_eq!(vech_strict_index(d, j, k), pos);
                    pos += 1;
                }
            }
        }
    }

    #[test]
    fn centering_matrix_cases() {
        assert_eq!(centering_matrix(1).unwrap().as_matrix()[(0, 0)], 0.0);
        let p2 = centering_matrix(2).unwrap();
        assert_eq!(
            p2.as_matrix(),
            &DMatrix::from_row_slice(2, 2, &[0.5, -0.5, -0.5, 0.5])
        );
        let p3 = centering_matrix(3).unwrap().into_matrix();
        assert_close(&(&p3 * &p3), &p3, 1e-12, 0.0);
        for j in 0..3 {
            assert!(p3.row(j).sum().abs() < 1e-15);
        }
        assert!(centering_matrix(0).is_err());
    }

    #[test]
    fn kron_cases() {
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let k = kron(&DMatrix::identity(2, 2), &b);
        let expected = DMatrix::from_row_slice(
            4,
            4,
            &[
                1.0, 2.0, 0.0, 0.0, //
                3.0, 4.0, 0.0, 0.0, //
                0.0, 0.0, 1.0, 2.0, //
                0.0, 0.0, 3.0, 4.0,
            ],
        );
        assert_eq!(k, expected);
        let s = kron(
            &DMatrix::from_element(1, 1, 3.0),
            &DMatrix::from_element(1, 1, -2.0),
        );
        assert_eq!(s[(0, 0)], -6.0);
    }

    #[test]
    fn kron_centering_centers_blocks() {
        // (P₃ ⊗ I₂)·(x₁; x₂; x₃) == (x₁ − x̄; x₂ − x̄; x₃ − x̄)
        let xs = [[1.0, -2.0], [4.0, 0.5], [-3.0, 7.0]];
        let stacked = DVector::from_iterator(6, xs.iter().flatten().copied());
        let c = kron(
            centering_matrix(3).unwrap().as_matrix(),
            &DMatrix::identity(2, 2),
        );
        let got = c * stacked;
        for comp in 0..2 {
            let mean: f64 = xs.iter().map(|x| x[comp]).sum::<f64>() / 3.0;
            for (i, x) in xs.iter().enumerate() {
                assert!((got[2 * i + comp] - (x[comp] - mean)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn eigenvalues_sorted_descending() {
        let d = SymMatrix::new(DMatrix::from_diagonal(&DVector::from_vec(vec![
            3.0, 1.0, 2.0,
        ])))
        .unwrap();
        assert_eq!(sym_eigenvalues(&d).as_slice(), &[3.0, 2.0, 1.0]);
        let s = SymMatrix::from_row_slice(2, &[2.0, 1.0, 1.0, 2.0]).unwrap();
        let ev = sym_eigenvalues(&s);
        assert!((ev[0] - 3.0).abs() < 1e-14 && (ev[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn psd_factor_identity_and_rank_one() {
        let l = psd_factor(&SymMatrix::identity(3), DEFAULT_CLAMP_TOL).unwrap();
        assert_close(&(&l * l.transpose()), &DMatrix::identity(3, 3), 1e-12, 1e-9);

        let u = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let s = SymMatrix::symmetrize(&(&u * u.transpose())).unwrap();
        let l = psd_factor(&s, DEFAULT_CLAMP_TOL).unwrap();
        assert_eq!(l.ncols(), 1);
        let col = l.column(0);
        let ratio = col[0] / u[0];
        for i in 0..3 {
            assert!((col[i] - ratio * u[i]).abs() < 1e-12);
        }
        assert_close(&(&l * l.transpose()), s.as_matrix(), 1e-12, 1e-9);
    }

    #[test]
    fn psd_factor_zero_matrix_has_no_columns() {
        let l = psd_factor(&SymMatrix::zeros(4), DEFAULT_CLAMP_TOL).unwrap();
        assert_eq!(l.shape(), (4, 0));
    }

    #[test]
    fn psd_factor_rejects_indefinite() {
        let s = SymMatrix::from_row_slice(2, &[1.0, 2.0, 2.0, 1.0]).unwrap();
        assert!(matches!(
            psd_factor(&s, DEFAULT_CLAMP_TOL),
            Err(Error::NotPositiveSemidefinite { .. })
        ));
    }

    #[test]
    fn block_diag_cases() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 5.0]);
        assert_eq!(block_diag(std::slice::from_ref(&a), &[1.0]).unwrap(), a);
        let one = |x| DMatrix::from_element(1, 1, x);
        let bd = block_diag(&[one(1.5), one(-4.0)], &[2.0, 3.0]).unwrap();
        assert_eq!(bd, DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, -12.0]));
        assert!(block_diag(&[one(1.0)], &[1.0, 2.0]).is_err());

        // equal group sizes: weights N/nᵢ = a
        let blocks = vec![a.clone(), a.clone(), a.clone()];
        let bd = block_diag(&blocks, &[3.0; 3]).unwrap();
        let plain = block_diag(&blocks, &[1.0; 3]).unwrap();
        assert_eq!(bd, plain * 3.0);
    }
}
