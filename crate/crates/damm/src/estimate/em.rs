//! Expectation-maximization for static Gaussian mixtures.
//!
//! This is the warm-start engine for the dynamic fits and the workhorse of
//! the rolling-window baseline. The E step works in log space, so distant
//! components underflow to an exact zero responsibility rather than NaN.
//! A collapsing component (vanishing weight or variance) triggers a seeded
//! re-jitter of the responsibilities, up to five times.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::density::{ComponentParams, GaussianParams, MvGaussianParams};
use crate::error::{DammError, Result};

/// A fitted static mixture with the likelihood trail of the final EM run.
#[derive(Clone, Debug)]
pub struct StaticMixture {
    pub weights: Vec<f64>,
    pub comps: Vec<ComponentParams>,
    pub loglik: f64,
    /// Log-likelihood after each iteration; non-decreasing by construction.
    pub loglik_path: Vec<f64>,
}

const MAX_ITER: usize = 500;
const REL_TOL: f64 = 1e-9;
const MIN_WEIGHT: f64 = 1e-8;
const MIN_VAR: f64 = 1e-10;
const MAX_COLLAPSES: usize = 5;

/// Fit a J-component static Gaussian mixture. Univariate data (rows of
/// length 1) get scalar components; wider rows get full-covariance
/// multivariate components expressed as (mean, sd, correlation).
pub fn em_static_mixture(data: &[Vec<f64>], j: usize, seed: u64) -> Result<StaticMixture> {
    if data.is_empty() {
        return Err(DammError::Estimation("empty dataset".into()));
    }
    let d = data[0].len();
    if data.iter().any(|row| row.len() != d) {
        return Err(DammError::Estimation("ragged dataset".into()));
    }
    if j == 0 || data.len() < 10 * j.max(1) {
        return Err(DammError::Estimation(format!(
            "need at least {} observations for {} components, got {}",
            10 * j,
            j,
            data.len()
        )));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut resp = initial_responsibilities(data, j);
    for attempt in 0..=MAX_COLLAPSES {
        match em_run(data, j, d, &mut resp) {
            Ok(fit) => return Ok(fit),
            Err(Collapse) if attempt < MAX_COLLAPSES => {
                resp = jittered_responsibilities(data.len(), j, &mut rng);
            }
            Err(Collapse) => {
                return Err(DammError::Estimation(format!(
                    "mixture component collapsed in {MAX_COLLAPSES} restarts"
                )))
            }
        }
    }
    unreachable!()
}

struct Collapse;

/// Deterministic start: soft assignment by rank along the first coordinate,
/// which separates any mixture with distinct location profiles.
fn initial_responsibilities(data: &[Vec<f64>], j: usize) -> Vec<Vec<f64>> {
    let t = data.len();
    let mut order: Vec<usize> = (0..t).collect();
    order.sort_by(|a, b| data[*a][0].total_cmp(&data[*b][0]));
    let mut resp = vec![vec![0.1 / (j as f64 - 1.0).max(1.0); j]; t];
    for (rank, idx) in order.into_iter().enumerate() {
        let comp = (rank * j / t).min(j - 1);
        for (c, r) in resp[idx].iter_mut().enumerate() {
            *r = if c == comp { 0.9 } else { 0.1 / (j as f64 - 1.0).max(1.0) };
        }
        if j == 1 {
            resp[idx][0] = 1.0;
        }
    }
    resp
}

fn jittered_responsibilities(t: usize, j: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    (0..t)
        .map(|_| {
            let mut row: Vec<f64> = (0..j).map(|_| rng.random_range(0.05..1.0)).collect();
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= s);
            row
        })
        .collect()
}

fn em_run(
    data: &[Vec<f64>],
    j: usize,
    d: usize,
    resp: &mut [Vec<f64>],
) -> std::result::Result<StaticMixture, Collapse> {
    let t = data.len();
    let mut loglik_path = Vec::new();
    let mut weights = vec![0.0; j];
    let mut comps: Vec<ComponentParams> = Vec::new();
    let mut prev_ll = f64::NEG_INFINITY;

    for _ in 0..MAX_ITER {
        // M step from current responsibilities.
        weights.clear();
        comps.clear();
        for c in 0..j {
            let nc: f64 = resp.iter().map(|r| r[c]).sum();
            if !(nc / t as f64 > MIN_WEIGHT) {
                return Err(Collapse);
            }
            weights.push(nc / t as f64);
            if d == 1 {
                let mean = resp.iter().zip(data).map(|(r, y)| r[c] * y[0]).sum::<f64>() / nc;
                let var = resp
                    .iter()
                    .zip(data)
                    .map(|(r, y)| r[c] * (y[0] - mean) * (y[0] - mean))
                    .sum::<f64>()
                    / nc;
                if !(var > MIN_VAR) {
                    return Err(Collapse);
                }
                comps.push(ComponentParams::Gaussian(GaussianParams { mean, variance: var }));
            } else {
                let mut mean = DVector::zeros(d);
                for (r, y) in resp.iter().zip(data) {
                    for k in 0..d {
                        mean[k] += r[c] * y[k];
                    }
                }
                mean /= nc;
                let mut cov = DMatrix::<f64>::zeros(d, d);
                for (r, y) in resp.iter().zip(data) {
                    for a in 0..d {
                        let da = y[a] - mean[a];
                        for b in 0..=a {
                            cov[(a, b)] += r[c] * da * (y[b] - mean[b]);
                        }
                    }
                }
                for a in 0..d {
                    for b in 0..=a {
                        cov[(a, b)] /= nc;
                        cov[(b, a)] = cov[(a, b)];
                    }
                    cov[(a, a)] += 1e-9; // ridge against exact singularity
                }
                let sd = DVector::from_iterator(d, (0..d).map(|k| cov[(k, k)].sqrt()));
                if sd.iter().any(|s| !(s * s > MIN_VAR)) {
                    return Err(Collapse);
                }
                let corr = DMatrix::from_fn(d, d, |a, b| cov[(a, b)] / (sd[a] * sd[b]));
                comps.push(ComponentParams::MvGaussian(MvGaussianParams {
                    mean,
                    sd,
                    corr,
                }));
            }
        }

        // E step, accumulating the log-likelihood of the *new* parameters.
        let mut ll = 0.0;
        for (row, y) in resp.iter_mut().zip(data) {
            let mut lp = vec![0.0; j];
            for c in 0..j {
                lp[c] = weights[c].ln()
                    + comps[c].logpdf(y).map_err(|_| Collapse)?;
            }
            let lm = crate::density::log_sum_exp(&lp);
            if !lm.is_finite() {
                return Err(Collapse);
            }
            ll += lm;
            for c in 0..j {
                row[c] = (lp[c] - lm).exp();
            }
        }
        loglik_path.push(ll);
        if (ll - prev_ll).abs() <= REL_TOL * (1.0 + ll.abs()) {
            prev_ll = ll;
            break;
        }
        prev_ll = ll;
    }

    Ok(StaticMixture { weights, comps, loglik: prev_ll, loglik_path })
}

/// Maximize the static mixture likelihood over the weights only, holding the
/// component parameters fixed. Same EM recursion with a trivial M step.
pub fn em_weights_only(
    data: &[Vec<f64>],
    comps: &[ComponentParams],
    init: &[f64],
) -> Result<(Vec<f64>, f64)> {
    let j = comps.len();
    if init.len() != j || j == 0 {
        return Err(DammError::Estimation("weights/components mismatch".into()));
    }
    // Component log-densities never change; cache them.
    let mut lp = vec![vec![0.0; j]; data.len()];
    for (row, y) in lp.iter_mut().zip(data) {
        for (c, comp) in comps.iter().enumerate() {
            row[c] = comp.logpdf(y)?;
        }
    }
    let mut weights = init.to_vec();
    let mut prev_ll = f64::NEG_INFINITY;
    for _ in 0..MAX_ITER {
        let mut acc = vec![0.0; j];
        let mut ll = 0.0;
        for row in &lp {
            let terms: Vec<f64> = (0..j)
                .map(|c| if weights[c] > 0.0 { weights[c].ln() + row[c] } else { f64::NEG_INFINITY })
                .collect();
            let lm = crate::density::log_sum_exp(&terms);
            ll += lm;
            for c in 0..j {
                acc[c] += (terms[c] - lm).exp();
            }
        }
        for c in 0..j {
            weights[c] = (acc[c] / data.len() as f64).max(0.0);
        }
        let s: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= s);
        if (ll - prev_ll).abs() <= REL_TOL * (1.0 + ll.abs()) {
            return Ok((weights, ll));
        }
        prev_ll = ll;
    }
    Ok((weights, prev_ll))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::replication_rng;
    use approx::assert_abs_diff_eq;
    use rand_distr::{Distribution, StandardNormal};

    fn normals(n: usize, mean: f64, sd: f64, rng: &mut impl Rng) -> Vec<f64> {
        (0..n)
            .map(|_| mean + sd * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng))
            .collect()
    }

    #[test]
    fn single_component_is_the_sample_moments() {
        let mut rng = replication_rng(41, 0);
        let y = normals(500, 2.0, 1.5, &mut rng);
        let data: Vec<Vec<f64>> = y.iter().map(|v| vec![*v]).collect();
        let fit = em_static_mixture(&data, 1, 0).unwrap();
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / y.len() as f64;
        assert_abs_diff_eq!(fit.weights[0], 1.0, epsilon = 1e-12);
        if let ComponentParams::Gaussian(p) = &fit.comps[0] {
            assert_abs_diff_eq!(p.mean, mean, epsilon = 1e-9);
            assert_abs_diff_eq!(p.variance, var, epsilon = 1e-9);
        } else {
            panic!("wrong family");
        }
    }

    #[test]
    fn well_separated_mixture_is_recovered() {
        let mut rng = replication_rng(42, 0);
        let mut data = Vec::new();
        for _ in 0..5000 {
            let v = if rng.random::<f64>() < 0.3 {
                normals(1, -5.0, 1.0, &mut rng)[0]
            } else {
                normals(1, 5.0, 1.0, &mut rng)[0]
            };
            data.push(vec![v]);
        }
        let fit = em_static_mixture(&data, 2, 0).unwrap();
        let mut pairs: Vec<(f64, f64)> = fit
            .comps
            .iter()
            .zip(&fit.weights)
            .map(|(c, w)| match c {
                ComponentParams::Gaussian(p) => (p.mean, *w),
                _ => panic!(),
            })
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        assert!((pairs[0].0 + 5.0).abs() < 0.2, "mean 1: {}", pairs[0].0);
        assert!((pairs[1].0 - 5.0).abs() < 0.2, "mean 2: {}", pairs[1].0);
        assert!((pairs[0].1 - 0.3).abs() < 0.05, "weight 1: {}", pairs[0].1);
    }

    #[test]
    fn loglik_path_is_monotone() {
        let mut rng = replication_rng(43, 0);
        let mut data = Vec::new();
        for _ in 0..800 {
            let v = if rng.random::<f64>() < 0.5 {
                normals(1, -1.0, 1.0, &mut rng)[0]
            } else {
                normals(1, 2.0, 2.0, &mut rng)[0]
            };
            data.push(vec![v]);
        }
        let fit = em_static_mixture(&data, 2, 0).unwrap();
        for w in fit.loglik_path.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "loglik decreased: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn multivariate_mixture_recovers_means() {
        let mut rng = replication_rng(44, 0);
        let mut data = Vec::new();
        for _ in 0..4000 {
            let c = rng.random::<f64>() < 0.4;
            let (m, rho): (f64, f64) = if c { (-4.0, 0.5) } else { (4.0, -0.3) };
            let z1: f64 = StandardNormal.sample(&mut rng);
            let z2: f64 = StandardNormal.sample(&mut rng);
            data.push(vec![m + z1, m + rho * z1 + (1.0 - rho * rho).sqrt() * z2]);
        }
        let fit = em_static_mixture(&data, 2, 0).unwrap();
        let mut means: Vec<f64> = fit
            .comps
            .iter()
            .map(|c| match c {
                ComponentParams::MvGaussian(p) => p.mean[0],
                _ => panic!(),
            })
            .collect();
        means.sort_by(f64::total_cmp);
        assert!((means[0] + 4.0).abs() < 0.3);
        assert!((means[1] - 4.0).abs() < 0.3);
        // Correlation estimates separate by sign.
        for c in &fit.comps {
            if let ComponentParams::MvGaussian(p) = c {
                let r = p.corr[(1, 0)];
                if p.mean[0] < 0.0 {
                    assert!(r > 0.2, "corr {r}");
                } else {
                    assert!(r < -0.1, "corr {r}");
                }
            }
        }
    }

    #[test]
    fn degenerate_data_reports_collapse() {
        let data = vec![vec![1.0]; 100];
        let err = em_static_mixture(&data, 2, 0).unwrap_err();
        assert!(matches!(err, DammError::Estimation(_)));
    }

    #[test]
    fn weights_only_recovers_composition() {
        let mut rng = replication_rng(45, 0);
        let comps = vec![
            ComponentParams::Gaussian(GaussianParams { mean: -4.0, variance: 6.0 }),
            ComponentParams::Gaussian(GaussianParams { mean: 1.0, variance: 3.0 }),
        ];
        let mut data = Vec::new();
        for _ in 0..6000 {
            let c = usize::from(rng.random::<f64>() >= 0.7);
            let (m, v): (f64, f64) = if c == 0 { (-4.0, 6.0) } else { (1.0, 3.0) };
            data.push(vec![m + v.sqrt() * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)]);
        }
        let (w, ll) = em_weights_only(&data, &comps, &[0.5, 0.5]).unwrap();
        assert!((w[0] - 0.7).abs() < 0.05, "weight {w:?}");
        assert!(ll.is_finite());
        assert_abs_diff_eq!(w.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn short_samples_are_rejected() {
        let data = vec![vec![0.0]; 15];
        assert!(em_static_mixture(&data, 2, 0).is_err());
    }
}
