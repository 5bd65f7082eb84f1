//! Hypothesis matrices `(C, ζ)` on the pooled vectorized covariance or
//! correlation parameters.
//!
//! Equalities between several coordinates are encoded by successive
//! differences `e_h − e_{h+1}`. Autoregressive structures are not linear in
//! the parameters; they carry a [`TransformSpec`] (the subdiagonal-mean-ratio
//! map) and `C` then acts on the transformed vector.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{
    centering_matrix, diag_positions, kron, offdiag_positions, vech, vech_index,
    vech_strict_index, HalfVecKind, SymMatrix,
};

/// Which parameter vector a hypothesis constrains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Target {
    Covariance,
    Correlation,
}

impl Target {
    /// Per-group parameter length: `p` for covariances, `p₋` for correlations.
    pub fn group_len(self, d: usize) -> usize {
        match self {
            Target::Covariance => HalfVecKind::Full.len_for(d),
            Target::Correlation => HalfVecKind::Strict.len_for(d),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Target::Covariance => "covariance",
            Target::Correlation => "correlation",
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Differentiable reparametrization applied before a linear hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub enum TransformSpec {
    /// `x ↦ (x, ρ₁, …, ρ_{d−1})` with `ρ_h = m_h / m_{h−1}` and `m_h` the mean
    /// of the `h`-th subdiagonal of the matrix encoded by `x`. With
    /// `unit_diagonal`, `x` is a strict half-vectorization and `m₀ = 1`.
    SubdiagonalMeanRatio { d: usize, unit_diagonal: bool },
}

/// Relative size below which a subdiagonal mean counts as zero.
const RATIO_DOMAIN_TOL: f64 = 1e-12;

impl TransformSpec {
    pub fn input_len(&self) -> usize {
        match *self {
            TransformSpec::SubdiagonalMeanRatio { d, unit_diagonal } => {
                if unit_diagonal {
                    HalfVecKind::Strict.len_for(d)
                } else {
                    HalfVecKind::Full.len_for(d)
                }
            }
        }
    }

    pub fn output_len(&self) -> usize {
        match *self {
            TransformSpec::SubdiagonalMeanRatio { d, .. } => self.input_len() + d - 1,
        }
    }

    /// Positions of subdiagonal `h` within the input vector.
    fn subdiagonal(&self, h: usize) -> Vec<usize> {
        match *self {
            TransformSpec::SubdiagonalMeanRatio { d, unit_diagonal } => {
                if unit_diagonal {
                    subdiag_positions_strict(d, h)
                } else {
                    subdiag_positions_full(d, h)
                }
            }
        }
    }

    /// Subdiagonal means `m₀, …, m_{d−1}`.
    pub fn subdiagonal_means(&self, x: &DVector<f64>) -> Result<Vec<f64>> {
        self.check_len(x)?;
        let TransformSpec::SubdiagonalMeanRatio { d, unit_diagonal } = *self;
        Ok((0..d)
            .map(|h| {
                if h == 0 && unit_diagonal {
                    1.0
                } else {
                    let pos = self.subdiagonal(h);
                    pos.iter().map(|&i| x[i]).sum::<f64>() / pos.len() as f64
                }
            })
            .collect())
    }

    fn check_len(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.input_len() {
            return Err(Error::Dimension(format!(
                "transform expects a vector of length {}, got {}",
                self.input_len(),
                x.len()
            )));
        }
        Ok(())
    }

    /// Errors unless every ratio denominator is away from zero.
    pub fn check_domain(&self, x: &DVector<f64>) -> Result<()> {
        let means = self.subdiagonal_means(x)?;
        let scale = means[0].abs();
        for (h, m) in means[..means.len() - 1].iter().enumerate() {
            if m.is_nan() || m.abs() < RATIO_DOMAIN_TOL * scale || scale == 0.0 {
                return Err(Error::Domain(format!(
                    "subdiagonal mean m{h} = {m:.3e} is zero relative to m0 = {:.3e}",
                    means[0]
                )));
            }
        }
        Ok(())
    }

    pub fn apply(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_domain(x)?;
        let means = self.subdiagonal_means(x)?;
        let q = x.len();
        let mut out = DVector::zeros(self.output_len());
        out.rows_mut(0, q).copy_from(x);
        for h in 1..means.len() {
            out[q + h - 1] = means[h] / means[h - 1];
        }
        Ok(out)
    }

    /// Jacobian (output_len × input_len) at `x`.
    pub fn jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_domain(x)?;
        let means = self.subdiagonal_means(x)?;
        let TransformSpec::SubdiagonalMeanRatio { unit_diagonal, .. } = *self;
        let q = x.len();
        let mut jac = DMatrix::zeros(self.output_len(), q);
        jac.view_mut((0, 0), (q, q)).fill_with_identity();
        for h in 1..means.len() {
            let row = q + h - 1;
            // ∂(m_h/m_{h−1}) = ∂m_h/m_{h−1} − m_h/m_{h−1}²·∂m_{h−1}
            let num = self.subdiagonal(h);
            for &i in &num {
                jac[(row, i)] += 1.0 / (num.len() as f64 * means[h - 1]);
            }
            if !(h == 1 && unit_diagonal) {
                let den = self.subdiagonal(h - 1);
                let coef = -means[h] / (means[h - 1] * means[h - 1] * den.len() as f64);
                for &i in &den {
                    jac[(row, i)] += coef;
                }
            }
        }
        Ok(jac)
    }
}

/// A linear hypothesis `C·θ = ζ`, or `C·f(θ) = ζ` when a transform is set.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisSpec {
    target: Target,
    groups: usize,
    d: usize,
    c: DMatrix<f64>,
    zeta: DVector<f64>,
    transform: Option<TransformSpec>,
    label: String,
}

/// Hypothesis linearized at an estimate: effective matrix `K` (`C` or `C·J`)
/// and residual `C·θ̂ − ζ` (or `C·f(θ̂) − ζ`).
#[derive(Debug, Clone)]
pub struct Linearized {
    pub matrix: DMatrix<f64>,
    pub residual: DVector<f64>,
}

impl HypothesisSpec {
    fn build(
        target: Target,
        groups: usize,
        d: usize,
        c: DMatrix<f64>,
        zeta: DVector<f64>,
        transform: Option<TransformSpec>,
        label: impl Into<String>,
    ) -> Result<Self> {
        let label = label.into();
        let q = groups * target.group_len(d);
        let expected_cols = match &transform {
            Some(t) => {
                if t.input_len() != q {
                    return Err(Error::Hypothesis(format!(
                        "transform input length {} does not match q = {q}",
                        t.input_len()
                    )));
                }
                t.output_len()
            }
            None => q,
        };
        if c.nrows() == 0 {
            return Err(Error::Hypothesis(format!(
                "'{label}' imposes no constraints for {target} with a={groups}, d={d}"
            )));
        }
        if c.ncols() != expected_cols {
            return Err(Error::Hypothesis(format!(
                "hypothesis matrix has {} columns; {target} with a={groups}, d={d} needs q = {expected_cols}",
                c.ncols()
            )));
        }
        if zeta.len() != c.nrows() {
            return Err(Error::Hypothesis(format!(
                "hypothesis vector has length {} but the matrix has {} rows",
                zeta.len(),
                c.nrows()
            )));
        }
        if let Some(r) = (0..c.nrows()).find(|&r| c.row(r).iter().all(|&x| x == 0.0)) {
            return Err(Error::Hypothesis(format!(
                "row {} of the hypothesis matrix is all zero (for '{label}' with a={groups}, d={d})",
                r + 1
            )));
        }
        if c.iter().chain(zeta.iter()).any(|x| !x.is_finite()) {
            return Err(Error::Hypothesis("non-finite entry in C or ζ".into()));
        }
        Ok(HypothesisSpec {
            target,
            groups,
            d,
            c,
            zeta,
            transform,
            label,
        })
    }

    pub fn target(&self) -> Target {
        self.target
    }

    pub fn num_groups(&self) -> usize {
        self.groups
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Length of the pooled parameter vector, `a·p` or `a·p₋`.
    pub fn param_len(&self) -> usize {
        self.groups * self.target.group_len(self.d)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn vector(&self) -> &DVector<f64> {
        &self.zeta
    }

    pub fn transform(&self) -> Option<&TransformSpec> {
        self.transform.as_ref()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Rows of `C`.
    pub fn num_constraints(&self) -> usize {
        self.c.nrows()
    }

    /// Same hypothesis with `C` and `ζ` multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::build(
            self.target,
            self.groups,
            self.d,
            &self.c * factor,
            &self.zeta * factor,
            self.transform.clone(),
            self.label.clone(),
        )
    }

    pub fn linearize(&self, theta: &DVector<f64>) -> Result<Linearized> {
        if theta.len() != self.param_len() {
            return Err(Error::Dimension(format!(
                "parameter vector has length {}, hypothesis expects {}",
                theta.len(),
                self.param_len()
            )));
        }
        match &self.transform {
            None => Ok(Linearized {
                matrix: self.c.clone(),
                residual: &self.c * theta - &self.zeta,
            }),
            Some(t) => {
                let f = t.apply(theta)?;
                let jac = t.jacobian(theta)?;
                Ok(Linearized {
                    matrix: &self.c * jac,
                    residual: &self.c * f - &self.zeta,
                })
            }
        }
    }
}

/// Extra input for the predefined hypotheses that need one.
#[derive(Debug, Clone, PartialEq)]
pub enum HypothesisParam {
    /// `γ > 0` for "given-trace".
    Trace(f64),
    /// `V` for "given-matrix".
    Matrix(SymMatrix),
}

fn unit_rows(positions: &[usize], q: usize) -> Vec<Vec<f64>> {
    positions
        .iter()
        .map(|&i| {
            let mut r = vec![0.0; q];
            r[i] = 1.0;
            r
        })
        .collect()
}

fn diff_rows(positions: &[usize], q: usize) -> Vec<Vec<f64>> {
    positions
        .windows(2)
        .map(|w| {
            let mut r = vec![0.0; q];
            r[w[0]] += 1.0;
            r[w[1]] -= 1.0;
            r
        })
        .collect()
}

fn rows_to_matrix(rows: &[Vec<f64>], q: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), q, |i, j| rows[i][j])
}

fn subdiag_positions_full(d: usize, h: usize) -> Vec<usize> {
    (0..d - h).map(|j| vech_index(d, j, j + h)).collect()
}

fn subdiag_positions_strict(d: usize, h: usize) -> Vec<usize> {
    debug_assert!(h >= 1);
    (0..d - h).map(|j| vech_strict_index(d, j, j + h)).collect()
}

fn toeplitz_rows(d: usize, q: usize) -> Vec<Vec<f64>> {
    (0..d)
        .flat_map(|h| diff_rows(&subdiag_positions_full(d, h), q))
        .collect()
}

fn htoeplitz_rows(d: usize, q: usize) -> Vec<Vec<f64>> {
    (1..d)
        .flat_map(|h| diff_rows(&subdiag_positions_strict(d, h), q))
        .collect()
}

/// One of the named hypotheses for `a` groups of dimension `d`.
///
/// Covariance, one group: "equal" (equal variances), "given-trace",
/// "given-matrix", "uncorrelated". Covariance, several groups: "equal",
/// "equal-trace", "equal-diagonals". Correlation, one group:
/// "equal-correlated", "uncorrelated". Correlation, several groups:
/// "equal-correlated".
pub fn predefined_hypothesis(
    name: &str,
    target: Target,
    a: usize,
    d: usize,
    param: Option<&HypothesisParam>,
) -> Result<HypothesisSpec> {
    if a == 0 {
        return Err(Error::Hypothesis("need at least one group".into()));
    }
    if d == 0 || (target == Target::Correlation && d < 2) {
        return Err(Error::Hypothesis(format!(
            "{target} hypotheses need d ≥ {}",
            if target == Target::Correlation { 2 } else { 1 }
        )));
    }
    let gl = target.group_len(d);
    let q = a * gl;
    let zeros = |m: usize| DVector::zeros(m);
    let wrong_count = || {
        let allowed = match (target, a) {
            (Target::Covariance, 1) => "equal, given-trace, given-matrix, uncorrelated",
            (Target::Covariance, _) => "equal, equal-trace, equal-diagonals",
            (Target::Correlation, 1) => "equal-correlated, uncorrelated",
            (Target::Correlation, _) => "equal-correlated",
        };
        Error::Hypothesis(format!(
            "unknown {target} hypothesis '{name}' for a={a} group(s); expected one of: {allowed}"
        ))
    };
    let (c, zeta) = match (target, a > 1, name) {
        (Target::Covariance, false, "equal") => {
            let rows = diff_rows(&diag_positions(d), q);
            let m = rows.len();
            (rows_to_matrix(&rows, q), zeros(m))
        }
        (Target::Covariance, false, "given-trace") => {
            let gamma = match param {
                Some(HypothesisParam::Trace(g)) => *g,
                _ => {
                    return Err(Error::Hypothesis(
                        "'given-trace' needs a trace value γ > 0".into(),
                    ))
                }
            };
            if !(gamma > 0.0 && gamma.is_finite()) {
                return Err(Error::Hypothesis(format!(
                    "'given-trace' needs γ > 0, got {gamma}"
                )));
            }
            let mut row = DMatrix::zeros(1, q);
            for i in diag_positions(d) {
                row[(0, i)] = 1.0;
            }
            (row, DVector::from_element(1, gamma))
        }
        (Target::Covariance, false, "given-matrix") => {
            let v = match param {
                Some(HypothesisParam::Matrix(v)) => v,
                _ => {
                    return Err(Error::Hypothesis(
                        "'given-matrix' needs a d×d symmetric matrix".into(),
                    ))
                }
            };
            if v.dim() != d {
                return Err(Error::Hypothesis(format!(
                    "'given-matrix' needs a {d}×{d} matrix, got {}×{}",
                    v.dim(),
                    v.dim()
                )));
            }
            (DMatrix::identity(q, q), vech(v).into_values())
        }
        (Target::Covariance, false, "uncorrelated") => {
            let rows = unit_rows(&offdiag_positions(d), q);
            let m = rows.len();
            (rows_to_matrix(&rows, q), zeros(m))
        }
        (Target::Covariance, true, "equal") | (Target::Correlation, true, "equal-correlated") => {
            let c = kron(
                centering_matrix(a)?.as_matrix(),
                &DMatrix::identity(gl, gl),
            );
            (c, zeros(q))
        }
        (Target::Covariance, true, "equal-trace") => {
            let diag = diag_positions(d);
            let mut c = DMatrix::zeros(a - 1, q);
            for i in 0..a - 1 {
                for &pos in &diag {
                    c[(i, i * gl + pos)] = 1.0;
                    c[(i, (i + 1) * gl + pos)] = -1.0;
                }
            }
            (c, zeros(a - 1))
        }
        (Target::Covariance, true, "equal-diagonals") => {
            let mut rows = Vec::new();
            for i in 0..a - 1 {
                for pos in diag_positions(d) {
                    let mut r = vec![0.0; q];
                    r[i * gl + pos] = 1.0;
                    r[(i + 1) * gl + pos] = -1.0;
                    rows.push(r);
                }
            }
            let m = rows.len();
            (rows_to_matrix(&rows, q), zeros(m))
        }
        (Target::Correlation, false, "equal-correlated") => {
            (centering_matrix(gl)?.into_matrix(), zeros(gl))
        }
        (Target::Correlation, false, "uncorrelated") => (DMatrix::identity(gl, gl), zeros(gl)),
        _ => return Err(wrong_count()),
    };
    HypothesisSpec::build(target, a, d, c, zeta, None, name)
}

/// Structure names and aliases accepted for each target.
pub fn canonical_structure(name: &str, target: Target) -> Option<&'static str> {
    let canonical = match name.to_ascii_lowercase().as_str() {
        "autoregressive" | "ar" => "autoregressive",
        "fo-autoregressive" | "fo-ar" => "fo-autoregressive",
        "diagonal" | "diag" => "diagonal",
        "sphericity" | "spher" => "sphericity",
        "compoundsymmetry" | "cs" => "compoundsymmetry",
        "toeplitz" | "toep" => "toeplitz",
        "hautoregressive" | "har" => "hautoregressive",
        "htoeplitz" | "htoep" => "htoeplitz",
        "hcompoundsymmetry" | "hcs" => "hcompoundsymmetry",
        _ => return None,
    };
    let ok = match target {
        Target::Covariance => matches!(
            canonical,
            "autoregressive"
                | "fo-autoregressive"
                | "diagonal"
                | "sphericity"
                | "compoundsymmetry"
                | "toeplitz"
        ),
        Target::Correlation => matches!(
            canonical,
            "hautoregressive" | "htoeplitz" | "hcompoundsymmetry" | "diagonal"
        ),
    };
    ok.then_some(canonical)
}

/// Structural hypothesis for a single group of dimension `d`.
pub fn structure_hypothesis(name: &str, target: Target, d: usize) -> Result<HypothesisSpec> {
    let canonical = canonical_structure(name, target).ok_or_else(|| {
        Error::Hypothesis(format!(
            "unknown {target} structure '{name}'; expected one of: {}",
            match target {
                Target::Covariance =>
                    "autoregressive (ar), fo-autoregressive (fo-ar), diagonal (diag), sphericity (spher), compoundsymmetry (cs), toeplitz (toep)",
                Target::Correlation =>
                    "hautoregressive (har), htoeplitz (htoep), hcompoundsymmetry (hcs), diagonal (diag)",
            }
        ))
    })?;
    let min_d = match canonical {
        "autoregressive" | "fo-autoregressive" | "hautoregressive" => 3,
        _ if target == Target::Correlation => 2,
        _ => 1,
    };
    if d < min_d {
        return Err(Error::Hypothesis(format!(
            "structure '{canonical}' needs d ≥ {min_d}, got d={d}"
        )));
    }
    let q = target.group_len(d);
    let mut transform = None;
    let rows: Vec<Vec<f64>> = match canonical {
        "compoundsymmetry" => {
            let mut r = diff_rows(&diag_positions(d), q);
            r.extend(diff_rows(&offdiag_positions(d), q));
            r
        }
        "diagonal" if target == Target::Covariance => unit_rows(&offdiag_positions(d), q),
        "diagonal" => unit_rows(&(0..q).collect::<Vec<_>>(), q),
        "sphericity" => {
            let mut r = diff_rows(&diag_positions(d), q);
            r.extend(unit_rows(&offdiag_positions(d), q));
            r
        }
        "toeplitz" => toeplitz_rows(d, q),
        "hcompoundsymmetry" => diff_rows(&(0..q).collect::<Vec<_>>(), q),
        "htoeplitz" => htoeplitz_rows(d, q),
        "autoregressive" | "fo-autoregressive" | "hautoregressive" => {
            let unit_diagonal = target == Target::Correlation;
            let t = TransformSpec::SubdiagonalMeanRatio { d, unit_diagonal };
            let width = t.output_len();
            let base = if unit_diagonal {
                htoeplitz_rows(d, width)
            } else {
                toeplitz_rows(d, width)
            };
            let ratio_positions: Vec<usize> = (q..width).collect();
            let mut r = base;
            r.extend(diff_rows(&ratio_positions, width));
            transform = Some(t);
            r
        }
        _ => unreachable!("canonical names are exhaustive"),
    };
    let width = transform.as_ref().map_or(q, TransformSpec::output_len);
    let c = rows_to_matrix(&rows, width);
    let m = c.nrows();
    HypothesisSpec::build(target, 1, d, c, DVector::zeros(m), transform, canonical)
}

/// User-supplied `(C, ζ)`; `C` need not be square, symmetric or idempotent.
pub fn custom_hypothesis(
    c: DMatrix<f64>,
    zeta: DVector<f64>,
    target: Target,
    a: usize,
    d: usize,
) -> Result<HypothesisSpec> {
    if a == 0 || d == 0 || (target == Target::Correlation && d < 2) {
        return Err(Error::Hypothesis(format!(
            "invalid design a={a}, d={d} for a {target} hypothesis"
        )));
    }
    HypothesisSpec::build(target, a, d, c, zeta, None, "custom")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::vech_strict;

    fn cs_matrix(d: usize, diag: f64, off: f64) -> SymMatrix {
        SymMatrix::new(DMatrix::from_fn(d, d, |j, k| if j == k { diag } else { off })).unwrap()
    }

    #[test]
    fn equal_three_groups_shape() {
        let h = predefined_hypothesis("equal", Target::Covariance, 3, 6, None).unwrap();
        assert_eq!(h.matrix().shape(), (63, 63));
        assert_eq!(h.vector().len(), 63);
        assert!(h.vector().iter().all(|&z| z == 0.0));
        let expected = kron(
            centering_matrix(3).unwrap().as_matrix(),
            &DMatrix::identity(21, 21),
        );
        assert_eq!(h.matrix(), &expected);
    }

    #[test]
    fn uncorrelated_single_correlation() {
        let h = predefined_hypothesis("uncorrelated", Target::Correlation, 1, 2, None).unwrap();
        assert_eq!(h.matrix(), &DMatrix::from_element(1, 1, 1.0));
        assert_eq!(h.vector(), &DVector::from_element(1, 0.0));
    }

    #[test]
    fn given_trace_satisfied_by_identity() {
        let h = predefined_hypothesis(
            "given-trace",
            Target::Covariance,
            1,
            3,
            Some(&HypothesisParam::Trace(3.0)),
        )
        .unwrap();
        let v = vech(&SymMatrix::identity(3)).into_values();
        let lin = h.linearize(&v).unwrap();
        assert_eq!(lin.residual, DVector::zeros(1));
    }

    #[test]
    fn predefined_errors() {
        assert!(predefined_hypothesis("given-trace", Target::Covariance, 1, 3, None).is_err());
        assert!(predefined_hypothesis(
            "given-trace",
            Target::Covariance,
            1,
            3,
            Some(&HypothesisParam::Trace(-1.0))
        )
        .is_err());
        assert!(predefined_hypothesis("equal-trace", Target::Covariance, 1, 3, None).is_err());
        assert!(predefined_hypothesis("uncorrelated", Target::Covariance, 2, 3, None).is_err());
        assert!(predefined_hypothesis("bogus", Target::Correlation, 1, 3, None).is_err());
        // P₁ for a single correlation is the zero matrix: nothing to test.
        assert!(predefined_hypothesis("equal-correlated", Target::Correlation, 1, 2, None).is_err());
        let wrong = HypothesisParam::Matrix(SymMatrix::identity(2));
        assert!(
            predefined_hypothesis("given-matrix", Target::Covariance, 1, 3, Some(&wrong)).is_err()
        );
    }

    #[test]
    fn given_matrix_vector_is_vech() {
        let v = cs_matrix(3, 2.0, 0.5);
        let h = predefined_hypothesis(
            "given-matrix",
            Target::Covariance,
            1,
            3,
            Some(&HypothesisParam::Matrix(v.clone())),
        )
        .unwrap();
        assert_eq!(h.matrix(), &DMatrix::identity(6, 6));
        assert_eq!(h.vector(), vech(&v).values());
    }

    #[test]
    fn cs_structure_accepts_cs_matrix() {
        let h = structure_hypothesis("cs", Target::Covariance, 3).unwrap();
        let v = vech(&cs_matrix(3, 2.0, 1.0)).into_values();
        assert_eq!(h.linearize(&v).unwrap().residual.amax(), 0.0);
        assert_eq!(h.label(), "compoundsymmetry");
    }

    #[test]
    fn diag_structure_selects_offdiagonals() {
        let h = structure_hypothesis("diag", Target::Covariance, 6).unwrap();
        assert_eq!(h.matrix().shape(), (15, 21));
        for (row, pos) in offdiag_positions(6).into_iter().enumerate() {
            assert_eq!(h.matrix()[(row, pos)], 1.0);
            assert_eq!(h.matrix().row(row).sum(), 1.0);
        }
    }

    #[test]
    fn ar_structure_on_exact_ar1() {
        let d = 4;
        let v = SymMatrix::new(DMatrix::from_fn(d, d, |j, k| {
            2.0 * 0.5_f64.powi((j as i32 - k as i32).abs())
        }))
        .unwrap();
        let h = structure_hypothesis("fo-ar", Target::Covariance, d).unwrap();
        let t = h.transform().unwrap();
        let x = vech(&v).into_values();
        let f = t.apply(&x).unwrap();
        let q = x.len();
        for h in 1..d {
            assert!((f[q + h - 1] - 0.5).abs() < 1e-15);
        }
        assert!(h.linearize(&x).unwrap().residual.amax() < 1e-15);
    }

    #[test]
    fn har_structure_on_exact_ar1_correlation() {
        let d = 5;
        let r = SymMatrix::new(DMatrix::from_fn(d, d, |j, k| {
            (-0.6_f64).powi((j as i32 - k as i32).abs())
        }))
        .unwrap();
        let h = structure_hypothesis("har", Target::Correlation, d).unwrap();
        let x = vech_strict(&r).unwrap().into_values();
        assert!(h.linearize(&x).unwrap().residual.amax() < 1e-15);
    }

    #[test]
    fn ar_needs_three_dimensions() {
        assert!(structure_hypothesis("ar", Target::Covariance, 2).is_err());
        assert!(structure_hypothesis("har", Target::Correlation, 2).is_err());
        assert!(structure_hypothesis("ar", Target::Covariance, 3).is_ok());
    }

    #[test]
    fn structure_name_validation() {
        assert!(structure_hypothesis("hcs", Target::Covariance, 3).is_err());
        assert!(structure_hypothesis("cs", Target::Correlation, 3).is_err());
        assert!(structure_hypothesis("nope", Target::Covariance, 3).is_err());
        assert!(structure_hypothesis("Toeplitz", Target::Covariance, 3).is_ok());
        // one correlation leaves nothing to compare
        assert!(structure_hypothesis("hcs", Target::Correlation, 2).is_err());
    }

    #[test]
    fn ratio_domain_error() {
        let t = TransformSpec::SubdiagonalMeanRatio {
            d: 3,
            unit_diagonal: false,
        };
        let x = vech(&SymMatrix::identity(3)).into_values();
        assert!(matches!(t.apply(&x), Err(Error::Domain(_))));
    }

    #[test]
    fn custom_matches_predefined_and_validates() {
        let c = kron(
            centering_matrix(3).unwrap().as_matrix(),
            &DMatrix::identity(21, 21),
        );
        let h = custom_hypothesis(c, DVector::zeros(63), Target::Covariance, 3, 6).unwrap();
        let p = predefined_hypothesis("equal", Target::Covariance, 3, 6, None).unwrap();
        assert_eq!(h.matrix(), p.matrix());

        let bad = custom_hypothesis(
            DMatrix::from_element(1, 5, 1.0),
            DVector::zeros(1),
            Target::Covariance,
            1,
            3,
        );
        match bad {
            Err(Error::Hypothesis(msg)) => assert!(msg.contains("q = 6"), "{msg}"),
            other => panic!("{other:?}"),
        }
        assert!(custom_hypothesis(
            DMatrix::from_element(1, 6, 1.0),
            DVector::zeros(2),
            Target::Covariance,
            1,
            3
        )
        .is_err());
        assert!(custom_hypothesis(
            DMatrix::zeros(1, 6),
            DVector::zeros(1),
            Target::Covariance,
            1,
            3
        )
        .is_err());
    }

    #[test]
    fn custom_trace_row_reproduces_given_trace() {
        let mut c = DMatrix::zeros(1, 6);
        for i in diag_positions(3) {
            c[(0, i)] = 1.0;
        }
        let custom = custom_hypothesis(c, DVector::from_element(1, 2.5), Target::Covariance, 1, 3)
            .unwrap();
        let pre = predefined_hypothesis(
            "given-trace",
            Target::Covariance,
            1,
            3,
            Some(&HypothesisParam::Trace(2.5)),
        )
        .unwrap();
        assert_eq!(custom.matrix(), pre.matrix());
        assert_eq!(custom.vector(), pre.vector());
    }
}
