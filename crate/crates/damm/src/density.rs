//! Component families and their log-densities.
//!
//! Six families are supported: univariate Gaussian and Student-t,
//! multivariate Gaussian and Student-t with a standard-deviation/correlation
//! factorization of the scale matrix, and the t / Gaussian copulas on
//! pseudo-observations in (0,1)^d. Everything is evaluated in log space; the
//! mixture combines component log-densities through log-sum-exp so that a
//! far-away component underflows gracefully instead of poisoning the sum.
//!
//! Invariants enforced here: variances, scales, and shapes are strictly
//! positive; correlation matrices must admit a Cholesky factorization; copula
//! inputs live strictly inside the open unit interval (clamping is the
//! caller's job and is counted there).

use nalgebra::{DMatrix, DVector};

use crate::error::{DammError, Result};
use crate::special::{
    ln_gamma, normal_cdf, normal_quantile, student_t_cdf, student_t_logpdf_std,
    student_t_quantile, LN_2PI,
};

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianParams {
    pub mean: f64,
    pub variance: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StudentTParams {
    pub mean: f64,
    pub scale: f64,
    pub shape: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MvGaussianParams {
    pub mean: DVector<f64>,
    pub sd: DVector<f64>,
    pub corr: DMatrix<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MvStudentTParams {
    pub mean: DVector<f64>,
    pub scale: DVector<f64>,
    pub corr: DMatrix<f64>,
    pub shape: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TCopulaParams {
    pub corr: DMatrix<f64>,
    pub shape: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianCopulaParams {
    pub corr: DMatrix<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ComponentParams {
    Gaussian(GaussianParams),
    StudentT(StudentTParams),
    MvGaussian(MvGaussianParams),
    MvStudentT(MvStudentTParams),
    TCopula(TCopulaParams),
    GaussianCopula(GaussianCopulaParams),
}

impl ComponentParams {
    pub fn dim(&self) -> usize {
        match self {
            ComponentParams::Gaussian(_) | ComponentParams::StudentT(_) => 1,
            ComponentParams::MvGaussian(p) => p.mean.len(),
            ComponentParams::MvStudentT(p) => p.mean.len(),
            ComponentParams::TCopula(p) => p.corr.nrows(),
            ComponentParams::GaussianCopula(p) => p.corr.nrows(),
        }
    }

    pub fn logpdf(&self, y: &[f64]) -> Result<f64> {
        match self {
            ComponentParams::Gaussian(p) => logpdf_gaussian(scalar(y)?, p.mean, p.variance),
            ComponentParams::StudentT(p) => {
                logpdf_student_t(scalar(y)?, p.mean, p.scale, p.shape)
            }
            ComponentParams::MvGaussian(p) => logpdf_mvgaussian(y, p),
            ComponentParams::MvStudentT(p) => logpdf_mvstudent_t(y, p),
            ComponentParams::TCopula(p) => logpdf_tcopula(y, p),
            ComponentParams::GaussianCopula(p) => logpdf_gaussian_copula(y, p),
        }
    }

    /// CDF at `y` for the univariate families; the multivariate and copula
    /// families have no scalar CDF and report a domain error.
    pub fn cdf(&self, y: f64) -> Result<f64> {
        match self {
            ComponentParams::Gaussian(p) => Ok(normal_cdf((y - p.mean) / p.variance.sqrt())),
            ComponentParams::StudentT(p) => student_t_cdf((y - p.mean) / p.scale, p.shape),
            _ => Err(DammError::domain("cdf", "scalar CDF defined only for univariate families")),
        }
    }
}

fn scalar(y: &[f64]) -> Result<f64> {
    if y.len() != 1 {
        return Err(DammError::domain("logpdf", format!("expected 1 value, got {}", y.len())));
    }
    Ok(y[0])
}

pub fn logpdf_gaussian(y: f64, mean: f64, variance: f64) -> Result<f64> {
    if !(variance > 0.0) || !variance.is_finite() {
        return Err(DammError::domain("logpdf_gaussian", format!("variance={variance}")));
    }
    let z = y - mean;
    Ok(-0.5 * (LN_2PI + variance.ln()) - 0.5 * z * z / variance)
}

pub fn logpdf_student_t(y: f64, mean: f64, scale: f64, shape: f64) -> Result<f64> {
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(DammError::domain("logpdf_student_t", format!("scale={scale}")));
    }
    if !(shape > 0.0) || !shape.is_finite() {
        return Err(DammError::domain("logpdf_student_t", format!("shape={shape}")));
    }
    Ok(student_t_logpdf_std((y - mean) / scale, shape) - scale.ln())
}

/// Cholesky factor of a correlation matrix with its log-determinant,
/// shared by the multivariate densities and the score engine. Factors are
/// small (d is the observation dimension), so the decomposition and solves
/// are hand-rolled on a flat row-major buffer rather than routed through
/// generic matrix machinery — this sits inside the per-observation filter
/// loop.
pub struct CorrChol {
    /// Lower-triangular factor, row-major, entries above the diagonal zero.
    l: Vec<f64>,
    d: usize,
    pub log_det: f64,
}

impl CorrChol {
    pub fn new(r: &DMatrix<f64>) -> Result<Self> {
        let d = r.nrows();
        let mut l = vec![0.0; d * d];
        let mut log_det = 0.0;
        for i in 0..d {
            for j in 0..=i {
                let mut sum = r[(i, j)];
                for k in 0..j {
                    sum -= l[i * d + k] * l[j * d + k];
                }
                if i == j {
                    if !(sum > 0.0) {
                        return Err(DammError::domain(
                            "correlation",
                            "matrix is not positive definite",
                        ));
                    }
                    let root = sum.sqrt();
                    l[i * d + i] = root;
                    log_det += 2.0 * root.ln();
                } else {
                    l[i * d + j] = sum / l[j * d + j];
                }
            }
        }
        Ok(CorrChol { l, d, log_det })
    }

    /// R^{-1} v by forward and back substitution through the factor.
    pub fn solve(&self, v: &DVector<f64>) -> DVector<f64> {
        let d = self.d;
        let l = &self.l;
        let mut x = DVector::zeros(d);
        for i in 0..d {
            let mut sum = v[i];
            for k in 0..i {
                sum -= l[i * d + k] * x[k];
            }
            x[i] = sum / l[i * d + i];
        }
        for i in (0..d).rev() {
            let mut sum = x[i];
            for k in i + 1..d {
                sum -= l[k * d + i] * x[k];
            }
            x[i] = sum / l[i * d + i];
        }
        x
    }

    /// Full inverse R^{-1} = L^{-T} L^{-1} (symmetric).
    pub fn inverse(&self) -> DMatrix<f64> {
        let d = self.d;
        let l = &self.l;
        // Invert the lower-triangular factor in place of a scratch buffer.
        let mut inv = vec![0.0; d * d];
        for j in 0..d {
            inv[j * d + j] = 1.0 / l[j * d + j];
            for i in j + 1..d {
                let mut sum = 0.0;
                for k in j..i {
                    sum -= l[i * d + k] * inv[k * d + j];
                }
                inv[i * d + j] = sum / l[i * d + i];
            }
        }
        // R^{-1}[i, j] = sum_k inv[k, i] * inv[k, j] over k >= max(i, j).
        let mut out = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..=i {
                let mut sum = 0.0;
                for k in i..d {
                    sum += inv[k * d + i] * inv[k * d + j];
                }
                out[(i, j)] = sum;
                out[(j, i)] = sum;
            }
        }
        out
    }

    pub fn lower(&self) -> DMatrix<f64> {
        let d = self.d;
        DMatrix::from_fn(d, d, |i, j| if j <= i { self.l[d * i + j] } else { 0.0 })
    }
}

fn check_mv_inputs(
    place: &'static str,
    y: &[f64],
    mean: &DVector<f64>,
    spread: &DVector<f64>,
    corr: &DMatrix<f64>,
) -> Result<()> {
    let d = mean.len();
    if y.len() != d || spread.len() != d || corr.nrows() != d || corr.ncols() != d {
        return Err(DammError::domain(place, "dimension mismatch between y and parameters"));
    }
    if spread.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
        return Err(DammError::domain(place, "scales must be strictly positive"));
    }
    Ok(())
}

/// Multivariate Gaussian log-density given precomputed pieces: correlation
/// log-determinant, the standardized quadratic form, and sum of log spreads.
pub(crate) fn mv_gaussian_loglik(d: usize, log_det: f64, log_spread: f64, quad: f64) -> f64 {
    -0.5 * d as f64 * LN_2PI - log_spread - 0.5 * log_det - 0.5 * quad
}

/// Multivariate Student-t log-density from the same precomputed pieces.
pub(crate) fn mv_student_loglik(
    d: usize,
    shape: f64,
    log_det: f64,
    log_spread: f64,
    quad: f64,
) -> f64 {
    let df = d as f64;
    ln_gamma(0.5 * (shape + df)) - ln_gamma(0.5 * shape)
        - 0.5 * df * (shape * std::f64::consts::PI).ln()
        - log_spread
        - 0.5 * log_det
        - 0.5 * (shape + df) * (quad / shape).ln_1p()
}

pub fn logpdf_mvgaussian(y: &[f64], p: &MvGaussianParams) -> Result<f64> {
    check_mv_inputs("logpdf_mvgaussian", y, &p.mean, &p.sd, &p.corr)?;
    let d = p.mean.len();
    let chol = CorrChol::new(&p.corr)?;
    let v = DVector::from_iterator(d, y.iter().zip(p.mean.iter()).zip(p.sd.iter()).map(
        |((yi, mi), si)| (yi - mi) / si,
    ));
    let quad = v.dot(&chol.solve(&v));
    let log_sd: f64 = p.sd.iter().map(|s| s.ln()).sum();
    Ok(mv_gaussian_loglik(d, chol.log_det, log_sd, quad))
}

pub fn logpdf_mvstudent_t(y: &[f64], p: &MvStudentTParams) -> Result<f64> {
    check_mv_inputs("logpdf_mvstudent_t", y, &p.mean, &p.scale, &p.corr)?;
    if !(p.shape > 0.0) || !p.shape.is_finite() {
        return Err(DammError::domain("logpdf_mvstudent_t", format!("shape={}", p.shape)));
    }
    let zeta = p.shape;
    let chol = CorrChol::new(&p.corr)?;
    let v = DVector::from_iterator(
        p.mean.len(),
        y.iter().zip(p.mean.iter()).zip(p.scale.iter()).map(|((yi, mi), si)| (yi - mi) / si),
    );
    let r = v.dot(&chol.solve(&v));
    let log_scale: f64 = p.scale.iter().map(|s| s.ln()).sum();
    Ok(mv_student_loglik(p.mean.len(), zeta, chol.log_det, log_scale, r))
}

fn check_unit_interval(place: &'static str, u: &[f64]) -> Result<()> {
    if u.iter().any(|ui| !(*ui > 0.0 && *ui < 1.0)) {
        return Err(DammError::domain(place, "pseudo-observations must lie strictly in (0,1)"));
    }
    Ok(())
}

/// Log-density of the t copula at pseudo-observations `u`.
///
/// Built constructively: the multivariate Student-t log-density (zero means,
/// unit scales) evaluated at the component-wise t quantiles of `u`, minus the
/// sum of the univariate standard-t log-densities at those quantiles.
pub fn logpdf_tcopula(u: &[f64], p: &TCopulaParams) -> Result<f64> {
    check_unit_interval("logpdf_tcopula", u)?;
    let d = p.corr.nrows();
    if u.len() != d {
        return Err(DammError::domain("logpdf_tcopula", "dimension mismatch"));
    }
    if !(p.shape > 0.0) || !p.shape.is_finite() {
        return Err(DammError::domain("logpdf_tcopula", format!("shape={}", p.shape)));
    }
    let zeta = p.shape;
    let chol = CorrChol::new(&p.corr)?;
    let x = DVector::from_iterator(
        d,
        u.iter().map(|ui| student_t_quantile(*ui, zeta)).collect::<Result<Vec<_>>>()?,
    );
    let r = x.dot(&chol.solve(&x));
    let joint = mv_student_loglik(d, zeta, chol.log_det, 0.0, r);
    let marginals: f64 = x.iter().map(|xi| student_t_logpdf_std(*xi, zeta)).sum();
    Ok(joint - marginals)
}

/// Log-density of the Gaussian copula, the shape-to-infinity limit of the t
/// copula: `-0.5 ln|R| - 0.5 x'(R^{-1} - I)x` at the normal scores `x`.
pub fn logpdf_gaussian_copula(u: &[f64], p: &GaussianCopulaParams) -> Result<f64> {
    check_unit_interval("logpdf_gaussian_copula", u)?;
    let d = p.corr.nrows();
    if u.len() != d {
        return Err(DammError::domain("logpdf_gaussian_copula", "dimension mismatch"));
    }
    let chol = CorrChol::new(&p.corr)?;
    let x =
        DVector::from_iterator(d, u.iter().map(|ui| normal_quantile(*ui)).collect::<Result<
            Vec<_>,
        >>()?);
    let quad = x.dot(&chol.solve(&x));
    Ok(-0.5 * chol.log_det - 0.5 * (quad - x.dot(&x)))
}

/// Numerically stable log(sum(exp(xs))); -inf entries drop out.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let s: f64 = xs.iter().map(|x| (x - m).exp()).sum();
    m + s.ln()
}

/// Mixture log-density: log sum_j w_j p_j(y), in log space.
///
/// Weights must be a probability vector matching `comps`; a zero weight is
/// allowed and simply removes its component from the sum.
pub fn mixture_logpdf(weights: &[f64], comps: &[ComponentParams], y: &[f64]) -> Result<f64> {
    if weights.len() != comps.len() || comps.is_empty() {
        return Err(DammError::domain("mixture_logpdf", "weights and components must align"));
    }
    let sum: f64 = weights.iter().sum();
    if weights.iter().any(|w| *w < 0.0) || (sum - 1.0).abs() > 1e-6 {
        return Err(DammError::domain(
            "mixture_logpdf",
            format!("weights must form a probability vector (sum={sum})"),
        ));
    }
    let mut terms = Vec::with_capacity(comps.len());
    for (w, c) in weights.iter().zip(comps) {
        if *w > 0.0 {
            terms.push(w.ln() + c.logpdf(y)?);
        }
    }
    Ok(log_sum_exp(&terms))
}
