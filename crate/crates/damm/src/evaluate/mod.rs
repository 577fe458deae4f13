//! Fit-quality metrics and density diagnostics.
//!
//! Everything here is pure: series in, numbers out. The adaptive
//! Kullback-Leibler average integrates the true density against the log
//! ratio per time step; the DGT tests probe probability integral transforms
//! for serial dependence (autoregression on powers) and for uniformity
//! (Pearson histogram). Baseline filters live in [`baselines`].

pub mod baselines;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::density::{ComponentParams, mixture_logpdf};
use crate::error::{DammError, Result};
use crate::estimate::{fit_ml_from, CoefficientTemplate, EstimationConfig, PIT_CLAMP};
use crate::filter::{filter_pass, implied_moments};
use crate::model::GasCoefficients;

/// Mean absolute and mean squared error of an estimate series against the
/// truth.
pub fn mae_mse(estimate: &[f64], truth: &[f64]) -> Result<(f64, f64)> {
    if estimate.len() != truth.len() || estimate.is_empty() {
        return Err(DammError::domain("mae_mse", "series lengths must match and be nonzero"));
    }
    let mut abs = 0.0;
    let mut sq = 0.0;
    for (e, t) in estimate.iter().zip(truth) {
        let diff = e - t;
        abs += diff.abs();
        sq += diff * diff;
    }
    let n = estimate.len() as f64;
    Ok((abs / n, sq / n))
}

/// One time step of a univariate mixture density: the weights and component
/// parameters in force at that step.
#[derive(Clone, Debug)]
pub struct UniMixture {
    pub weights: Vec<f64>,
    pub comps: Vec<ComponentParams>,
}

impl UniMixture {
    pub fn pdf(&self, y: f64) -> Result<f64> {
        Ok(mixture_logpdf(&self.weights, &self.comps, &[y])?.exp())
    }

    /// Mixture mean and standard deviation via the law of total variance.
    pub fn moments(&self) -> Result<(f64, f64)> {
        let (mean, cov) = implied_moments(&self.weights, &self.comps)?;
        if mean.len() != 1 {
            return Err(DammError::domain("akl", "density must be univariate"));
        }
        Ok((mean[0], cov[(0, 0)].sqrt()))
    }
}

/// Number of standard deviations on each side of the mean covered by the
/// KL integration window.
const AKL_WINDOW_SDS: f64 = 12.0;
/// Absolute quadrature tolerance per time step.
const AKL_TOL: f64 = 1e-8;

/// Average Kullback-Leibler divergence T^-1 sum_t KL(p_t || q_t), each term
/// integrated adaptively over the true density's effective support.
pub fn akl(true_density: &[UniMixture], model_density: &[UniMixture]) -> Result<f64> {
    if true_density.len() != model_density.len() || true_density.is_empty() {
        return Err(DammError::domain("akl", "density series must align and be nonzero"));
    }
    let mut total = 0.0;
    for (t, (p, q)) in true_density.iter().zip(model_density).enumerate() {
        let (mean, sd) = p.moments()?;
        if !(sd > 0.0) {
            return Err(DammError::numeric(t, "akl", "degenerate true density"));
        }
        let lo = mean - AKL_WINDOW_SDS * sd;
        let hi = mean + AKL_WINDOW_SDS * sd;
        let integrand = |y: f64| -> Result<f64> {
            let lp = mixture_logpdf(&p.weights, &p.comps, &[y])?;
            if lp == f64::NEG_INFINITY {
                return Ok(0.0);
            }
            let lq = mixture_logpdf(&q.weights, &q.comps, &[y])?;
            Ok(lp.exp() * (lp - lq))
        };
        total += adaptive_simpson(&integrand, lo, hi, AKL_TOL, t)?;
    }
    Ok(total / true_density.len() as f64)
}

/// Closed-form KL divergence between two scalar Gaussians, the oracle for
/// the quadrature route.
pub fn gaussian_kl(mean_p: f64, var_p: f64, mean_q: f64, var_q: f64) -> f64 {
    0.5 * ((var_q / var_p).ln() + (var_p + (mean_p - mean_q).powi(2)) / var_q - 1.0)
}

/// Adaptive composite Simpson quadrature with interval-halving error
/// control; `t` only labels the error when the recursion bottoms out.
fn adaptive_simpson(
    f: &impl Fn(f64) -> Result<f64>,
    lo: f64,
    hi: f64,
    tol: f64,
    t: usize,
) -> Result<f64> {
    fn simpson(fl: f64, fm: f64, fr: f64, h: f64) -> f64 {
        (fl + 4.0 * fm + fr) * h / 6.0
    }
    fn recurse(
        f: &impl Fn(f64) -> Result<f64>,
        lo: f64,
        hi: f64,
        fl: f64,
        fm: f64,
        fr: f64,
        whole: f64,
        tol: f64,
        depth: usize,
        t: usize,
    ) -> Result<f64> {
        let mid = 0.5 * (lo + hi);
        let lm = 0.5 * (lo + mid);
        let rm = 0.5 * (mid + hi);
        let flm = f(lm)?;
        let frm = f(rm)?;
        let left = simpson(fl, flm, fm, mid - lo);
        let right = simpson(fm, frm, fr, hi - mid);
        let err = left + right - whole;
        if err.abs() <= 15.0 * tol {
            return Ok(left + right + err / 15.0);
        }
        if depth == 0 {
            return Err(DammError::numeric(
                t,
                "akl quadrature",
                format!("did not converge on [{lo:.6}, {hi:.6}]"),
            ));
        }
        Ok(recurse(f, lo, mid, fl, flm, fm, left, 0.5 * tol, depth - 1, t)?
            + recurse(f, mid, hi, fm, frm, fr, right, 0.5 * tol, depth - 1, t)?)
    }

    // Seed with a modest composite pass so narrow mixture spikes inside a
    // wide window cannot hide from the first subdivision.
    let n = 32;
    let h = (hi - lo) / n as f64;
    let mut total = 0.0;
    for k in 0..n {
        let a = lo + k as f64 * h;
        let b = a + h;
        let m = 0.5 * (a + b);
        let (fa, fm, fb) = (f(a)?, f(m)?, f(b)?);
        let whole = simpson(fa, fm, fb, h);
        total += recurse(f, a, b, fa, fm, fb, whole, tol / n as f64, 48, t)?;
    }
    Ok(total)
}

/// Average Frobenius distance between two correlation-matrix paths,
/// including every entry of each matrix in the double sum.
pub fn avg_frobenius(estimated: &[DMatrix<f64>], truth: &[DMatrix<f64>]) -> Result<f64> {
    if estimated.len() != truth.len() || estimated.is_empty() {
        return Err(DammError::domain("frobenius", "matrix series must align and be nonzero"));
    }
    let mut total = 0.0;
    for (e, t) in estimated.iter().zip(truth) {
        if e.shape() != t.shape() {
            return Err(DammError::domain("frobenius", "matrix shapes must match"));
        }
        total += (e - t).norm();
    }
    Ok(total / estimated.len() as f64)
}

/// Probability integral transforms of a univariate series under filtered
/// mixture parameters, with the count of boundary clamps.
pub fn pit_series(
    spec: &crate::model::ModelSpec,
    coeffs: &GasCoefficients,
    data: &[Vec<f64>],
) -> Result<(Vec<f64>, usize)> {
    if !spec.family.is_univariate() {
        return Err(DammError::domain("pit", "PIT series needs a univariate model"));
    }
    let trace = filter_pass(spec, coeffs, data, None)?;
    let mut out = Vec::with_capacity(data.len());
    let mut clamped = 0;
    for (step, y) in trace.steps.iter().zip(data) {
        let mut u = 0.0;
        for (w, comp) in step.weights.iter().zip(&step.comps) {
            u += w * comp.cdf(y[0])?;
        }
        if !(PIT_CLAMP..=1.0 - PIT_CLAMP).contains(&u) {
            clamped += 1;
            u = u.clamp(PIT_CLAMP, 1.0 - PIT_CLAMP);
        }
        out.push(u);
    }
    Ok((out, clamped))
}

/// 5% critical value of a chi-squared with 20 degrees of freedom.
pub const DGT_AR_CRITICAL: f64 = 31.41;
/// 5% critical value of a chi-squared with 19 degrees of freedom.
pub const DGT_HIST_CRITICAL: f64 = 30.14;
const DGT_LAGS: usize = 20;

/// Serial-dependence diagnostic: an LM test from the autoregression of the
/// k-th power of the PITs on twenty of its lags.
pub fn dgt_ar_test(pits: &[f64], k: u32) -> Result<(f64, bool)> {
    if !(1..=4).contains(&k) {
        return Err(DammError::domain("dgt", "power k must lie in 1..=4"));
    }
    let t_len = pits.len();
    if t_len <= 2 * DGT_LAGS {
        return Err(DammError::domain("dgt", "series too short for 20 lags"));
    }
    let powered: Vec<f64> = pits.iter().map(|u| u.powi(k as i32)).collect();
    let mean = powered.iter().sum::<f64>() / t_len as f64;
    let u: Vec<f64> = powered.iter().map(|v| v - mean).collect();

    // Drop the first 20 points; regress u_t on an intercept and 20 lags.
    let rows = t_len - DGT_LAGS;
    let cols = DGT_LAGS + 1;
    let mut x = DMatrix::zeros(rows, cols);
    let mut y = DVector::zeros(rows);
    for r in 0..rows {
        let t = r + DGT_LAGS;
        y[r] = u[t];
        x[(r, 0)] = 1.0;
        for lag in 1..=DGT_LAGS {
            x[(r, lag)] = u[t - lag];
        }
    }
    let xtx = x.transpose() * &x;
    let xty = x.transpose() * &y;
    let beta = xtx
        .cholesky()
        .map(|c| c.solve(&xty))
        .ok_or_else(|| DammError::domain("dgt", "degenerate regressor matrix"))?;
    let resid = &y - &x * beta;
    let tss = y.dot(&y);
    if !(tss > 0.0) {
        return Err(DammError::domain("dgt", "constant PIT series"));
    }
    let r2 = 1.0 - resid.dot(&resid) / tss;
    let stat = rows as f64 * r2.max(0.0);
    Ok((stat, stat > DGT_AR_CRITICAL))
}

/// Uniformity diagnostic: Pearson chi-squared over twenty equal-width bins.
pub fn dgt_hist_test(pits: &[f64]) -> Result<(f64, bool)> {
    const BINS: usize = 20;
    let t_len = pits.len();
    if t_len < 200 {
        return Err(DammError::domain("dgt", "histogram test needs at least 200 points"));
    }
    let mut counts = [0usize; BINS];
    for u in pits {
        let bin = ((u * BINS as f64) as usize).min(BINS - 1);
        counts[bin] += 1;
    }
    let expected = t_len as f64 / BINS as f64;
    let stat: f64 =
        counts.iter().map(|c| (*c as f64 - expected).powi(2) / expected).sum();
    Ok((stat, stat > DGT_HIST_CRITICAL))
}

/// Outcome of a rolling one-step-ahead log-score evaluation.
#[derive(Clone, Debug)]
pub struct LogScoreReport {
    /// Sum of the per-step predictive log densities over the validation span.
    pub total: f64,
    /// One contribution per validation observation, in time order.
    pub contributions: Vec<f64>,
    pub refits: usize,
    /// Refit attempts that failed and carried the previous coefficients.
    pub carried: usize,
}

/// Rolling out-of-sample log score. The first `window` observations form
/// the estimation window; coefficients are refit every `refit_every` steps
/// on the trailing `window` observations (a fixed-length window) and the
/// filter then scores the steps until the next refit.
pub fn log_score(
    template: &CoefficientTemplate,
    data: &[Vec<f64>],
    window: usize,
    refit_every: usize,
    config: &EstimationConfig,
) -> Result<LogScoreReport> {
    if window == 0 || window >= data.len() {
        return Err(DammError::domain("log_score", "need a window shorter than the data"));
    }
    if refit_every == 0 {
        return Err(DammError::domain("log_score", "refit_every must be positive"));
    }
    let mut coeffs: Option<GasCoefficients> = None;
    let mut refits = 0;
    let mut carried = 0;
    let mut contributions = Vec::with_capacity(data.len() - window);

    let mut t = window;
    while t < data.len() {
        // Refit on the trailing fixed-length window ending at t.
        let train = &data[t - window..t];
        let refreshed = match &coeffs {
            None => crate::estimate::fit_ml(template, train, config).map(|f| f.coefficients),
            Some(prev) => {
                refits += 1;
                // Warm continuation first; if the previous optimum cannot
                // even seed this window, re-anchor with a cold start before
                // falling back to the stale coefficients.
                fit_ml_from(template, train, config, prev)
                    .or_else(|_| crate::estimate::fit_ml(template, train, config))
                    .map(|f| f.coefficients)
            }
        };
        match refreshed {
            Ok(c) => coeffs = Some(c),
            Err(e) => {
                if coeffs.is_none() {
                    return Err(e);
                }
                carried += 1;
            }
        }
        let active = coeffs.as_ref().expect("set on first pass");

        // Filter from the window start so the state at t is conditioned on
        // the same trailing history the fit saw, then score forward.
        let span_end = (t + refit_every).min(data.len());
        let trace = filter_pass(&template.spec, active, &data[t - window..span_end], None)?;
        for step in &trace.steps[window..] {
            contributions.push(step.loglik);
        }
        t = span_end;
    }
    Ok(LogScoreReport {
        total: contributions.iter().sum(),
        contributions,
        refits,
        carried,
    })
}

/// A named metric column across replications with its reporting median.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MetricReport {
    pub name: String,
    pub per_replication: Vec<f64>,
    pub median: f64,
    pub relative_to: Option<String>,
}

impl MetricReport {
    pub fn new(name: impl Into<String>, per_replication: Vec<f64>) -> Self {
        let median = median(&per_replication);
        MetricReport { name: name.into(), per_replication, median, relative_to: None }
    }

    pub fn relative_to(mut self, baseline: impl Into<String>) -> Self {
        self.relative_to = Some(baseline.into());
        self
    }
}

/// Empirical median: midpoint of the two central order statistics for even
/// lengths, NaN for empty input.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}
