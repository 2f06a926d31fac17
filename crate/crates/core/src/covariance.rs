//! Analytic covariance of the noiseless samples and its closed-form
//! determinant and spectrum.
//!
//! With zero-mean i.i.d. matrix entries of variance `1/n` and an i.i.d.
//! signal of variance `sigma_x2`, two samples are correlated only through
//! the segments their rows share. A shared segment has length `n/m_o`, so
//!
//! ```text
//! E[w_i w_j] = sigma_x2 * (shared segments of rows i, j) / m_o
//! ```
//!
//! which gives `sigma_x2` on the diagonal, `0` between rows of one group
//! and `sigma_x2 / m_o` between rows of different groups (the original rows
//! count as a group of their own). Noise is unit variance, so
//! `Sigma_Y = Sigma_W + I`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{cluster_eigenvalues, lu_log_det, symmetric_eigen};
use crate::model::Extension;
use crate::permgroup::{correlation_count, ConstantSequence, PermutationSequence, SegmentSources};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceModel {
    pub sigma_x2: f64,
    pub m_o: usize,
    pub extension: Extension,
}

impl CovarianceModel {
    pub fn new(sigma_x2: f64, m_o: usize, extension: Extension) -> Result<Self> {
        if !(sigma_x2.is_finite() && sigma_x2 >= 0.0) {
            return Err(Error::Domain(format!(
                "signal variance must be finite and >= 0, got {sigma_x2}"
            )));
        }
        extension.validate(m_o)?;
        Ok(Self {
            sigma_x2,
            m_o,
            extension,
        })
    }

    /// `sigma_x2 / (sigma_x2 + 1)`, in `[0, 1)`.
    pub fn beta(&self) -> f64 {
        self.sigma_x2 / (self.sigma_x2 + 1.0)
    }

    /// Per-sample SNR; equals the signal variance under unit-variance noise.
    pub fn gamma(&self) -> f64 {
        self.sigma_x2
    }

    pub fn alpha(&self) -> f64 {
        self.extension.alpha(self.m_o)
    }

    pub fn m(&self) -> usize {
        self.extension.total_rows(self.m_o)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixKind {
    SigmaW,
    SigmaY,
    U(usize),
    V(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructuredMatrix {
    pub kind: MatrixKind,
    pub data: DMatrix<f64>,
}

/// `[[diag * I, off * 1], [off * 1, tail]]` with an `m_o` leading block.
fn border(m_o: usize, diag: f64, off: f64, tail: &DMatrix<f64>) -> DMatrix<f64> {
    let m = m_o + tail.nrows();
    DMatrix::from_fn(m, m, |i, j| match (i < m_o, j < m_o) {
        (true, true) => {
            if i == j {
                diag
            } else {
                0.0
            }
        }
        (false, false) => tail[(i - m_o, j - m_o)],
        _ => off,
    })
}

/// `U(1) = sigma_x2 I`, `U(k+1) = [[sigma_x2 I, sigma_x2/m_o 1], [sigma_x2/m_o 1, U(k)]]`.
pub fn build_u(k: usize, sigma_x2: f64, m_o: usize) -> StructuredMatrix {
    assert!(k >= 1 && m_o >= 1);
    let mut u = DMatrix::from_diagonal_element(m_o, m_o, sigma_x2);
    for _ in 1..k {
        u = border(m_o, sigma_x2, sigma_x2 / m_o as f64, &u);
    }
    StructuredMatrix {
        kind: MatrixKind::U(k),
        data: u,
    }
}

/// `V(1) = I`, `V(k+1) = [[I, beta/m_o 1], [beta/m_o 1, V(k)]]`.
pub fn build_v(k: usize, beta: f64, m_o: usize) -> StructuredMatrix {
    assert!(k >= 1 && m_o >= 1);
    let mut v = DMatrix::identity(m_o, m_o);
    for _ in 1..k {
        v = border(m_o, 1.0, beta / m_o as f64, &v);
    }
    StructuredMatrix {
        kind: MatrixKind::V(k),
        data: v,
    }
}

pub fn build_sigma_w(model: &CovarianceModel) -> StructuredMatrix {
    let s = model.sigma_x2;
    let m_o = model.m_o;
    let data = match model.extension {
        Extension::SingleGroup { m_e } => {
            let tail = DMatrix::from_diagonal_element(m_e, m_e, s);
            border(m_o, s, s / m_o as f64, &tail)
        }
        Extension::MultiGroup { groups } => build_u(groups + 1, s, m_o).data,
    };
    StructuredMatrix {
        kind: MatrixKind::SigmaW,
        data,
    }
}

pub fn build_sigma_y(model: &CovarianceModel) -> StructuredMatrix {
    let w = build_sigma_w(model).data;
    let m = w.nrows();
    StructuredMatrix {
        kind: MatrixKind::SigmaY,
        data: w + DMatrix::identity(m, m),
    }
}

/// `Sigma_W` assembled entry by entry from row provenance: the original rows
/// are constant sequences `1..=m_o`, followed by `extension`.
pub fn sigma_w_from_sequences(sigma_x2: f64, m_o: usize, extension: &[PermutationSequence]) -> Result<DMatrix<f64>> {
    let originals: Vec<ConstantSequence> = (1..=m_o)
        .map(|v| ConstantSequence::new(v, m_o))
        .collect::<Result<_>>()?;
    let rows: Vec<&dyn SegmentSources> = originals
        .iter()
        .map(|c| c as &dyn SegmentSources)
        .chain(extension.iter().map(|p| p as &dyn SegmentSources))
        .collect();
    let m = rows.len();
    let mut out = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            let shared = correlation_count(rows[i], rows[j])?;
            out[(i, j)] = sigma_x2 * shared as f64 / m_o as f64;
        }
    }
    Ok(out)
}

/// `(sigma_x2+1)^m * (1 - beta^2 alpha)` for a single-group extension.
pub fn det_sigma_y_single(model: &CovarianceModel) -> Result<f64> {
    match model.extension {
        Extension::SingleGroup { .. } => {
            let b = model.beta();
            Ok((model.sigma_x2 + 1.0).powi(model.m() as i32) * (1.0 - b * b * model.alpha()))
        }
        other => Err(Error::Domain(format!(
            "single-group determinant requested for {}",
            other.case_name()
        ))),
    }
}

/// `(sigma_x2+1)^m * (1-beta)^alpha * (1 + alpha beta)` for a multi-group extension.
pub fn det_sigma_y_multi(model: &CovarianceModel) -> Result<f64> {
    match model.extension {
        Extension::MultiGroup { groups } => {
            let b = model.beta();
            Ok((model.sigma_x2 + 1.0).powi(model.m() as i32)
                * (1.0 - b).powi(groups as i32)
                * (1.0 + groups as f64 * b))
        }
        other => Err(Error::Domain(format!(
            "multi-group determinant requested for {}",
            other.case_name()
        ))),
    }
}

pub fn det_sigma_y(model: &CovarianceModel) -> f64 {
    match model.extension {
        Extension::SingleGroup { .. } => det_sigma_y_single(model),
        Extension::MultiGroup { .. } => det_sigma_y_multi(model),
    }
    .expect("dispatch matches case")
}

/// `log2 |Sigma_Y|` from the closed form, without forming the power.
pub fn log2_det_sigma_y(model: &CovarianceModel) -> f64 {
    let b = model.beta();
    let lead = model.m() as f64 * (model.sigma_x2 + 1.0).log2();
    match model.extension {
        Extension::SingleGroup { .. } => lead + (1.0 - b * b * model.alpha()).log2(),
        Extension::MultiGroup { groups } => {
            let a = groups as f64;
            lead + a * (1.0 - b).log2() + (1.0 + a * b).log2()
        }
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if (0.0..1.0).contains(&beta) {
        Ok(())
    } else {
        Err(Error::Domain(format!("beta = {beta} outside [0, 1)")))
    }
}

/// `|V(k)| = (1-beta)^(k-1) (1 + (k-1) beta)`; independent of `m_o`.
pub fn det_v(k: usize, beta: f64, m_o: usize) -> Result<f64> {
    check_beta(beta)?;
    if k == 0 || m_o == 0 {
        return Err(Error::Domain("k and m_o must be positive".into()));
    }
    let km1 = (k - 1) as f64;
    Ok((1.0 - beta).powi(k as i32 - 1) * (1.0 + km1 * beta))
}

/// Distinct eigenvalues of `V(k)` with multiplicities, ascending:
/// `1 - beta` (k-1 times), `1` ((m_o-1) k times), `1 + (k-1) beta` (once).
/// Coinciding values (k = 1 or beta = 0) are merged.
pub fn eigen_v(k: usize, beta: f64, m_o: usize) -> Result<Vec<(f64, usize)>> {
    check_beta(beta)?;
    if k == 0 || m_o == 0 {
        return Err(Error::Domain("k and m_o must be positive".into()));
    }
    let raw = [
        (1.0 - beta, k - 1),
        (1.0, (m_o - 1) * k),
        (1.0 + (k - 1) as f64 * beta, 1),
    ];
    let mut out: Vec<(f64, usize)> = Vec::with_capacity(3);
    for (value, mult) in raw {
        if mult == 0 {
            continue;
        }
        match out.iter_mut().find(|(v, _)| *v == value) {
            Some((_, m)) => *m += mult,
            None => out.push((value, mult)),
        }
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(out)
}

/// One closed-form-versus-numeric comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct DeterminantCheck {
    pub label: String,
    pub k: usize,
    pub beta: f64,
    pub m_o: usize,
    pub closed_form: f64,
    pub numeric: f64,
}

impl DeterminantCheck {
    pub fn rel_err(&self) -> f64 {
        let scale = self.closed_form.abs().max(f64::MIN_POSITIVE);
        (self.closed_form - self.numeric).abs() / scale
    }

    pub const CSV_HEADER: &'static str = "k,beta,m_o,closed_form,numeric,rel_err";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{:e}",
            self.k,
            self.beta,
            self.m_o,
            self.closed_form,
            self.numeric,
            self.rel_err()
        )
    }
}

pub fn check_det_v(k: usize, beta: f64, m_o: usize) -> Result<DeterminantCheck> {
    let closed_form = det_v(k, beta, m_o)?;
    let numeric = lu_log_det(&build_v(k, beta, m_o).data).det();
    Ok(DeterminantCheck {
        label: format!("det V({k})"),
        k,
        beta,
        m_o,
        closed_form,
        numeric,
    })
}

/// Compares the closed-form `|Sigma_Y|` with an LU determinant of the
/// explicit matrix. `k` is reported as the number of row groups.
pub fn check_det_sigma_y(model: &CovarianceModel) -> DeterminantCheck {
    let closed_form = det_sigma_y(model);
    let numeric = lu_log_det(&build_sigma_y(model).data).det();
    let k = match model.extension {
        Extension::SingleGroup { m_e } => 1 + usize::from(m_e > 0),
        Extension::MultiGroup { groups } => groups + 1,
    };
    DeterminantCheck {
        label: format!("|Sigma_Y| {} alpha={}", model.extension.case_name(), model.alpha()),
        k,
        beta: model.beta(),
        m_o: model.m_o,
        closed_form,
        numeric,
    }
}

/// Closed-form spectrum of `V(k)` against a numeric eigendecomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenCheck {
    pub k: usize,
    pub beta: f64,
    pub m_o: usize,
    pub closed_form: Vec<(f64, usize)>,
    pub numeric: Vec<(f64, usize)>,
    /// Largest `|closed - numeric|` over matched eigenvalues; infinite when
    /// the cluster structure differs.
    pub max_value_err: f64,
    /// Largest deviation from the all-ones contracts: `1'q = 0` outside the
    /// top eigenspace, `|1'q| = sqrt(k m_o)` for the top eigenvector. `None`
    /// when the top eigenvalue is degenerate (k = 1 or beta = 0).
    pub ones_contract_err: Option<f64>,
    /// `|prod(eigenvalues^mult) - det_v| / det_v`.
    pub product_rel_err: f64,
}

impl EigenCheck {
    pub fn multiplicities_match(&self) -> bool {
        self.closed_form.len() == self.numeric.len()
            && self.closed_form.iter().zip(&self.numeric).all(|(a, b)| a.1 == b.1)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.multiplicities_match()
            && self.max_value_err <= tol
            && self.ones_contract_err.is_none_or(|e| e <= tol)
            && self.product_rel_err <= tol
    }
}

pub const EIGEN_CLUSTER_TOL: f64 = 1e-8;

pub fn check_eigen_v(k: usize, beta: f64, m_o: usize) -> Result<EigenCheck> {
    let closed_form = eigen_v(k, beta, m_o)?;
    let v = build_v(k, beta, m_o).data;
    let (values, vectors) = symmetric_eigen(&v);
    let numeric = cluster_eigenvalues(&values, EIGEN_CLUSTER_TOL);

    let max_value_err = if closed_form.len() == numeric.len() {
        closed_form
            .iter()
            .zip(&numeric)
            .map(|(a, b)| (a.0 - b.0).abs())
            .fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };

    let top = 1.0 + (k - 1) as f64 * beta;
    let ones_contract_err = (k > 1 && beta > 0.0).then(|| {
        let dim = v.nrows();
        let target = (dim as f64).sqrt();
        let tol = EIGEN_CLUSTER_TOL * top.max(1.0);
        (0..dim)
            .map(|c| {
                let s: f64 = vectors.column(c).sum();
                if (values[c] - top).abs() <= tol {
                    (s.abs() - target).abs()
                } else {
                    s.abs()
                }
            })
            .fold(0.0, f64::max)
    });

    let det = det_v(k, beta, m_o)?;
    let product: f64 = closed_form.iter().map(|&(v, m)| v.powi(m as i32)).product();
    Ok(EigenCheck {
        k,
        beta,
        m_o,
        closed_form,
        numeric,
        max_value_err,
        ones_contract_err,
        product_rel_err: (product - det).abs() / det.abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::determinant;
    use approx::assert_relative_eq;

    fn single(s: f64, m_o: usize, m_e: usize) -> CovarianceModel {
        CovarianceModel::new(s, m_o, Extension::SingleGroup { m_e }).unwrap()
    }

    fn multi(s: f64, m_o: usize, groups: usize) -> CovarianceModel {
        CovarianceModel::new(s, m_o, Extension::MultiGroup { groups }).unwrap()
    }

    #[test]
    fn sigma_w_single_block_layout() {
        let w = build_sigma_w(&single(1.0, 3, 3)).data;
        assert_eq!(w.nrows(), 6);
        for i in 0..6 {
            for j in 0..6 {
                let expected = if i == j {
                    1.0
                } else if (i < 3) == (j < 3) {
                    0.0
                } else {
                    1.0 / 3.0
                };
                assert_eq!(w[(i, j)], expected, "({i},{j})");
            }
        }
    }

    #[test]
    fn cases_coincide_at_alpha_one() {
        for s in [0.1, 1.0, 100.0] {
            let a = build_sigma_w(&single(s, 3, 3)).data;
            let b = build_sigma_w(&multi(s, 3, 1)).data;
            assert_eq!(a, b);
            assert_relative_eq!(
                det_sigma_y(&single(s, 3, 3)),
                det_sigma_y(&multi(s, 3, 1)),
                max_relative = 1e-14
            );
        }
    }

    #[test]
    fn zero_signal() {
        let w = build_sigma_w(&multi(0.0, 5, 3)).data;
        assert!(w.iter().all(|&x| x == 0.0));
        assert_eq!(det_sigma_y(&single(0.0, 3, 2)), 1.0);
        assert_eq!(det_sigma_y(&multi(0.0, 5, 3)), 1.0);
    }

    #[test]
    fn det_single_example() {
        // 101^6 (1 - (100/101)^2) = 101^4 * 201
        let closed = det_sigma_y_single(&single(100.0, 3, 3)).unwrap();
        assert_relative_eq!(closed, 20_916_140_601.0, max_relative = 1e-12);
        let numeric = determinant(&build_sigma_y(&single(100.0, 3, 3)).data);
        assert_relative_eq!(closed, numeric, max_relative = 1e-9);
        assert_eq!(det_sigma_y_single(&single(2.0, 4, 0)).unwrap(), 3f64.powi(4));
        assert!(det_sigma_y_single(&multi(1.0, 3, 1)).is_err());
    }

    #[test]
    fn det_multi_example() {
        // 101^9 (1/101)^2 (301/101), frozen from an independent dense determinant
        let closed = det_sigma_y_multi(&multi(100.0, 3, 2)).unwrap();
        assert_relative_eq!(closed, 319_517_565_330_901.06, max_relative = 1e-12);
        let numeric = determinant(&build_sigma_y(&multi(100.0, 3, 2)).data);
        assert_relative_eq!(closed, numeric, max_relative = 1e-9);
        assert!(det_sigma_y_multi(&single(1.0, 3, 1)).is_err());
    }

    #[test]
    fn det_v_examples() {
        assert_eq!(det_v(1, 0.7, 4).unwrap(), 1.0);
        assert_relative_eq!(det_v(2, 0.5, 3).unwrap(), 0.75, max_relative = 1e-15);
        assert_relative_eq!(det_v(3, 0.8, 2).unwrap(), 0.104, max_relative = 1e-14);
        assert_relative_eq!(determinant(&build_v(2, 0.5, 3).data), 0.75, max_relative = 1e-12);
        assert_relative_eq!(determinant(&build_v(3, 0.8, 2).data), 0.104, max_relative = 1e-12);
        assert!(det_v(2, 1.0, 3).is_err());
        assert!(det_v(2, -0.1, 3).is_err());
    }

    #[test]
    fn eigen_v_examples() {
        let e = eigen_v(3, 0.8, 2).unwrap();
        assert_eq!(e.len(), 3);
        assert_relative_eq!(e[0].0, 0.2, max_relative = 1e-12);
        assert_eq!(e[0].1, 2);
        assert_eq!(e[1], (1.0, 3));
        assert_relative_eq!(e[2].0, 2.6, max_relative = 1e-12);
        assert_eq!(e[2].1, 1);
        assert_eq!(eigen_v(1, 0.5, 4).unwrap(), vec![(1.0, 4)]);
        assert_eq!(eigen_v(3, 0.0, 4).unwrap(), vec![(1.0, 12)]);

        let check = check_eigen_v(3, 0.8, 2).unwrap();
        assert!(check.passes(1e-8), "{check:?}");
    }

    #[test]
    fn u_recursion_matches_group_layout() {
        let u = build_u(3, 2.0, 4).data;
        for i in 0..12 {
            for j in 0..12 {
                let expected = if i == j {
                    2.0
                } else if i / 4 == j / 4 {
                    0.0
                } else {
                    0.5
                };
                assert_eq!(u[(i, j)], expected);
            }
        }
        let v = build_v(3, 2.0 / 3.0, 4).data;
        let from_u = (u + DMatrix::identity(12, 12)) / 3.0;
        assert!((v - from_u).amax() < 1e-15);
    }

    #[test]
    fn provenance_matches_analytic_form() {
        for (m_o, ext) in [
            (3, Extension::SingleGroup { m_e: 3 }),
            (5, Extension::SingleGroup { m_e: 2 }),
            (5, Extension::MultiGroup { groups: 3 }),
            (7, Extension::MultiGroup { groups: 6 }),
        ] {
            let model = CovarianceModel::new(1.7, m_o, ext).unwrap();
            let seqs = ext.sequences(m_o).unwrap();
            let from_rows = sigma_w_from_sequences(1.7, m_o, &seqs).unwrap();
            let analytic = build_sigma_w(&model).data;
            assert!((from_rows - analytic).amax() < 1e-15);
        }
    }

    #[test]
    fn log2_det_matches_det() {
        let m = multi(10.0, 5, 4);
        assert_relative_eq!(log2_det_sigma_y(&m), det_sigma_y(&m).log2(), max_relative = 1e-13);
        let s = single(10.0, 5, 4);
        assert_relative_eq!(log2_det_sigma_y(&s), det_sigma_y(&s).log2(), max_relative = 1e-13);
    }

    #[test]
    fn model_validation() {
        assert!(CovarianceModel::new(-1.0, 3, Extension::NONE).is_err());
        assert!(CovarianceModel::new(1.0, 3, Extension::SingleGroup { m_e: 4 }).is_err());
        assert!(CovarianceModel::new(1.0, 3, Extension::MultiGroup { groups: 3 }).is_err());
        assert_relative_eq!(single(100.0, 3, 1).beta(), 100.0 / 101.0);
    }
}
