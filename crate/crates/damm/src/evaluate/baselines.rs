//! Reference filters the studies compare against: an exponentially weighted
//! correlation, a rolling-window static mixture, and a two-state Markov
//! switching filter with fixed regime densities.

use nalgebra::DMatrix;

use crate::density::{logpdf_gaussian, GaussianParams};
use crate::error::{DammError, Result};
use crate::estimate::em::{em_static_mixture, StaticMixture};
use crate::estimate::optim::{bfgs, OptimSettings};
use crate::mapping::{logistic, logit};

/// Default smoothing constant of the exponentially weighted correlation.
pub const EWMA_LAMBDA: f64 = 0.96;

/// Exponentially weighted moving correlation of a bivariate series:
/// Q_t = lambda Q_{t-1} + (1 - lambda) y_{t-1} y_{t-1}', seeded at the
/// sample correlation, reported as the off-diagonal correlation of Q_t.
pub fn ewma_corr(data: &[Vec<f64>], lambda: f64) -> Result<Vec<f64>> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(DammError::domain("ewma", "lambda must lie in (0,1)"));
    }
    if data.len() < 3 || data.iter().any(|row| row.len() != 2) {
        return Err(DammError::domain("ewma", "need a bivariate series of length >= 3"));
    }
    let t_len = data.len();
    let mean: Vec<f64> = (0..2)
        .map(|c| data.iter().map(|r| r[c]).sum::<f64>() / t_len as f64)
        .collect();
    let mut q = DMatrix::<f64>::zeros(2, 2);
    for row in data {
        for r in 0..2 {
            for c in 0..2 {
                q[(r, c)] += (row[r] - mean[r]) * (row[c] - mean[c]) / (t_len - 1) as f64;
            }
        }
    }
    // Normalize the seed to a correlation matrix.
    let sd = [q[(0, 0)].sqrt(), q[(1, 1)].sqrt()];
    if !(sd[0] > 0.0 && sd[1] > 0.0) {
        return Err(DammError::domain("ewma", "degenerate sample covariance seed"));
    }
    for r in 0..2 {
        for c in 0..2 {
            q[(r, c)] /= sd[r] * sd[c];
        }
    }

    let mut out = Vec::with_capacity(t_len);
    for t in 0..t_len {
        if t > 0 {
            let y = &data[t - 1];
            for r in 0..2 {
                for c in 0..2 {
                    q[(r, c)] = lambda * q[(r, c)] + (1.0 - lambda) * y[r] * y[c];
                }
            }
        }
        let denom = q[(0, 0)] * q[(1, 1)];
        if !(denom > 0.0) {
            return Err(DammError::numeric(t, "ewma", "degenerate smoothed covariance"));
        }
        out.push((q[(0, 1)] / denom.sqrt()).clamp(-1.0, 1.0));
    }
    Ok(out)
}

/// Rolling-window static mixture estimates. Entry `t` holds the fit on the
/// trailing `window` observations ending at `t`; the first `window - 1`
/// entries are unavailable.
#[derive(Clone, Debug)]
pub struct MmrOutput {
    pub fits: Vec<Option<StaticMixture>>,
    /// Windows where EM failed and the previous fit was carried forward.
    pub carried: usize,
}

pub fn mmr_rolling(data: &[Vec<f64>], j: usize, window: usize, seed: u64) -> Result<MmrOutput> {
    if window == 0 || window > data.len() {
        return Err(DammError::domain("mmr", "window must fit inside the sample"));
    }
    let mut fits: Vec<Option<StaticMixture>> = vec![None; data.len()];
    let mut carried = 0;
    let mut last: Option<StaticMixture> = None;
    for t in window - 1..data.len() {
        let slice = &data[t + 1 - window..=t];
        match em_static_mixture(slice, j, seed.wrapping_add(t as u64)) {
            Ok(fit) => last = Some(fit),
            Err(_) if last.is_some() => carried += 1,
            Err(e) => return Err(e),
        }
        fits[t] = last.clone();
    }
    Ok(MmrOutput { fits, carried })
}

/// Two-state Markov switching filter with fixed Gaussian regimes.
#[derive(Clone, Debug)]
pub struct MsFit {
    /// One-step-ahead predicted probability of the first regime.
    pub predicted: Vec<f64>,
    /// Fitted transition matrix; `transition[i][k]` is P(next = k | now = i).
    pub transition: [[f64; 2]; 2],
    pub loglik: f64,
}

/// Estimate the transition matrix of a two-regime model by maximum
/// likelihood through the Hamilton filter, holding both regime densities
/// fixed, and return the predicted first-regime probabilities.
pub fn ms_two_state_filter(data: &[Vec<f64>], comps: &[GaussianParams; 2]) -> Result<MsFit> {
    if data.len() < 10 || data.iter().any(|row| row.len() != 1) {
        return Err(DammError::domain("ms", "need a univariate series of length >= 10"));
    }
    let neg_loglik = |x: &[f64]| -> f64 {
        let p11 = logistic(x[0]);
        let p22 = logistic(x[1]);
        match hamilton_filter(data, comps, p11, p22) {
            Ok((_, ll)) if ll.is_finite() => -ll,
            _ => 1e12,
        }
    };
    // Persistent-regime start; the surface in the two logits is smooth.
    let x0 = [logit(0.9), logit(0.9)];
    let outcome = bfgs(neg_loglik, &x0, &OptimSettings::default());
    if !(outcome.value < 1e12) {
        return Err(DammError::Estimation("Markov switching likelihood never evaluated".into()));
    }
    let p11 = logistic(outcome.x[0]);
    let p22 = logistic(outcome.x[1]);
    let (predicted, loglik) = hamilton_filter(data, comps, p11, p22)?;
    Ok(MsFit {
        predicted,
        transition: [[p11, 1.0 - p11], [1.0 - p22, p22]],
        loglik,
    })
}

/// Hamilton filter for two fixed Gaussian regimes: returns the predicted
/// probability of regime 1 at each step and the total log-likelihood.
fn hamilton_filter(
    data: &[Vec<f64>],
    comps: &[GaussianParams; 2],
    p11: f64,
    p22: f64,
) -> Result<(Vec<f64>, f64)> {
    // Stationary distribution of the chain as the time-1 prediction.
    let denom = 2.0 - p11 - p22;
    let mut pi1 = if denom.abs() < 1e-12 { 0.5 } else { (1.0 - p22) / denom };
    pi1 = pi1.clamp(1e-12, 1.0 - 1e-12);

    let mut predicted = Vec::with_capacity(data.len());
    let mut loglik = 0.0;
    for (t, y) in data.iter().enumerate() {
        predicted.push(pi1);
        let f1 = logpdf_gaussian(y[0], comps[0].mean, comps[0].variance)?.exp();
        let f2 = logpdf_gaussian(y[0], comps[1].mean, comps[1].variance)?.exp();
        let mix = pi1 * f1 + (1.0 - pi1) * f2;
        if !(mix > 0.0) {
            return Err(DammError::numeric(t, "ms", "zero predictive density"));
        }
        loglik += mix.ln();
        let post1 = pi1 * f1 / mix;
        pi1 = (post1 * p11 + (1.0 - post1) * (1.0 - p22)).clamp(1e-12, 1.0 - 1e-12);
    }
    Ok((predicted, loglik))
}
