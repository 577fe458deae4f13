//! Score engine: conditional scores, the score-driven update, and filtering.
//!
//! One observation advances the state in four moves. Map the unconstrained
//! state to weights and component parameters; evaluate the mixture
//! log-density (the likelihood contribution); form the mixture score, which
//! factorizes into a weights part (the vector of component-to-mixture density
//! ratios pulled back through the stick-breaking Jacobian) and per-component
//! parts (the component's own conditional score times its posterior mass
//! `xi_j = w_j p_j / p`, pulled back through the component map Jacobian);
//! then apply the linear update `state' = kappa + A * scaled_score + B *
//! state` coordinate by coordinate.
//!
//! Scores are analytic for every family and are validated against central
//! finite differences of the log-densities. The copula shape coordinate is
//! the one exception: it is static by construction (its loading is always
//! zero), so its score slot is reported as zero rather than differentiating
//! through the quantile transform.
//!
//! `xi_weights` and `weight_score` use the log-space component densities, so
//! a component that is hundreds of standard deviations away contributes an
//! exact zero instead of NaN. Any non-finite intermediate aborts the pass
//! with the time index and the offending block.

use nalgebra::{DMatrix, DVector};

use crate::density::{
    log_sum_exp, mv_gaussian_loglik, mv_student_loglik, ComponentParams, CorrChol,
};
use crate::error::{DammError, Result};
use crate::model::{CompJac, GasCoefficients, ModelSpec, UnconstrainedState};
use crate::special::{digamma, normal_quantile, student_t_logpdf_std, student_t_quantile};

/// Mixture-weight score: the vector of ratios p_j(y) / p(y), one per
/// component, computed from log densities.
pub fn weight_score(log_comp: &[f64], log_mix: f64) -> Vec<f64> {
    log_comp.iter().map(|lp| (lp - log_mix).exp()).collect()
}

/// Posterior component masses xi_j = w_j p_j(y) / p(y); sums to one.
pub fn xi_weights(weights: &[f64], log_comp: &[f64], log_mix: f64) -> Vec<f64> {
    weights
        .iter()
        .zip(log_comp)
        .map(|(w, lp)| if *w > 0.0 { (w.ln() + lp - log_mix).exp() } else { 0.0 })
        .collect()
}

/// Conditional score of one component's log-density with respect to its
/// constrained parameters, laid out like the component state block.
pub fn component_score(params: &ComponentParams, y: &[f64]) -> Result<Vec<f64>> {
    Ok(score_and_loglik(params, y)?.0)
}

/// Component score and log-density in one pass (they share the Cholesky
/// factor for the multivariate families).
pub fn score_and_loglik(params: &ComponentParams, y: &[f64]) -> Result<(Vec<f64>, f64)> {
    match params {
        ComponentParams::Gaussian(p) => {
            let ll = crate::density::logpdf_gaussian(y[0], p.mean, p.variance)?;
            let z = y[0] - p.mean;
            let g_mean = z / p.variance;
            let g_var = (z * z / p.variance - 1.0) / (2.0 * p.variance);
            Ok((vec![g_mean, g_var], ll))
        }
        ComponentParams::StudentT(p) => {
            let ll = crate::density::logpdf_student_t(y[0], p.mean, p.scale, p.shape)?;
            let (nu, psi) = (p.shape, p.scale);
            let w = y[0] - p.mean;
            let denom = nu * psi * psi + w * w;
            let g_mean = (nu + 1.0) * w / denom;
            let g_scale = -1.0 / psi + (nu + 1.0) * w * w / (psi * denom);
            let g_shape = 0.5 * (digamma(0.5 * (nu + 1.0)) - digamma(0.5 * nu))
                - 0.5 / nu
                - 0.5 * (w * w / (nu * psi * psi)).ln_1p()
                + (nu + 1.0) * w * w / (2.0 * nu * denom);
            Ok((vec![g_mean, g_scale, g_shape], ll))
        }
        ComponentParams::MvGaussian(p) => {
            let d = p.mean.len();
            if y.len() != d {
                return Err(DammError::domain("score", "dimension mismatch"));
            }
            let chol = CorrChol::new(&p.corr)?;
            let v = DVector::from_iterator(
                d,
                y.iter().zip(p.mean.iter()).zip(p.sd.iter()).map(|((yi, mi), si)| (yi - mi) / si),
            );
            let q = chol.solve(&v);
            let quad = v.dot(&q);
            let rinv = chol.inverse();
            let log_sd: f64 = p.sd.iter().map(|s| s.ln()).sum();
            let ll = mv_gaussian_loglik(d, chol.log_det, log_sd, quad);
            let mut g = Vec::with_capacity(2 * d + d * (d - 1) / 2);
            for i in 0..d {
                g.push(q[i] / p.sd[i]);
            }
            for i in 0..d {
                g.push((v[i] * q[i] - 1.0) / p.sd[i]);
            }
            for c in 0..d {
                for r in c + 1..d {
                    g.push(q[r] * q[c] - rinv[(r, c)]);
                }
            }
            Ok((g, ll))
        }
        ComponentParams::MvStudentT(p) => {
            let d = p.mean.len();
            if y.len() != d {
                return Err(DammError::domain("score", "dimension mismatch"));
            }
            let zeta = p.shape;
            let chol = CorrChol::new(&p.corr)?;
            let v = DVector::from_iterator(
                d,
                y.iter()
                    .zip(p.mean.iter())
                    .zip(p.scale.iter())
                    .map(|((yi, mi), si)| (yi - mi) / si),
            );
            let q = chol.solve(&v);
            let quad = v.dot(&q);
            let rinv = chol.inverse();
            let log_scale: f64 = p.scale.iter().map(|s| s.ln()).sum();
            let ll = mv_student_loglik(d, zeta, chol.log_det, log_scale, quad);
            let z = (zeta + d as f64) / (zeta + quad);
            let mut g = Vec::with_capacity(2 * d + d * (d - 1) / 2 + 1);
            for i in 0..d {
                g.push(z * q[i] / p.scale[i]);
            }
            for i in 0..d {
                g.push((z * v[i] * q[i] - 1.0) / p.scale[i]);
            }
            for c in 0..d {
                for r in c + 1..d {
                    g.push(z * q[r] * q[c] - rinv[(r, c)]);
                }
            }
            g.push(
                0.5 * (digamma(0.5 * (zeta + d as f64)) - digamma(0.5 * zeta))
                    - 0.5 * d as f64 / zeta
                    - 0.5 * (quad / zeta).ln_1p()
                    + z * quad / (2.0 * zeta),
            );
            Ok((g, ll))
        }
        ComponentParams::TCopula(p) => {
            let d = p.corr.nrows();
            if y.len() != d {
                return Err(DammError::domain("score", "dimension mismatch"));
            }
            if y.iter().any(|ui| !(*ui > 0.0 && *ui < 1.0)) {
                return Err(DammError::domain("score", "copula input outside (0,1)"));
            }
            let zeta = p.shape;
            let chol = CorrChol::new(&p.corr)?;
            let x = DVector::from_iterator(
                d,
                y.iter().map(|ui| student_t_quantile(*ui, zeta)).collect::<Result<Vec<_>>>()?,
            );
            let q = chol.solve(&x);
            let quad = x.dot(&q);
            let rinv = chol.inverse();
            let marginals: f64 = x.iter().map(|xi| student_t_logpdf_std(*xi, zeta)).sum();
            let ll = mv_student_loglik(d, zeta, chol.log_det, 0.0, quad) - marginals;
            let z = (zeta + d as f64) / (zeta + quad);
            let mut g = Vec::with_capacity(d * (d - 1) / 2 + 1);
            for c in 0..d {
                for r in c + 1..d {
                    g.push(z * q[r] * q[c] - rinv[(r, c)]);
                }
            }
            // Static by construction; the loading on this coordinate is zero.
            g.push(0.0);
            Ok((g, ll))
        }
        ComponentParams::GaussianCopula(p) => {
            let d = p.corr.nrows();
            if y.len() != d {
                return Err(DammError::domain("score", "dimension mismatch"));
            }
            if y.iter().any(|ui| !(*ui > 0.0 && *ui < 1.0)) {
                return Err(DammError::domain("score", "copula input outside (0,1)"));
            }
            let chol = CorrChol::new(&p.corr)?;
            let x = DVector::from_iterator(
                d,
                y.iter().map(|ui| normal_quantile(*ui)).collect::<Result<Vec<_>>>()?,
            );
            let q = chol.solve(&x);
            let quad = x.dot(&q);
            let rinv = chol.inverse();
            let ll = -0.5 * chol.log_det - 0.5 * (quad - x.dot(&x));
            let mut g = Vec::with_capacity(d * (d - 1) / 2);
            for c in 0..d {
                for r in c + 1..d {
                    g.push(q[r] * q[c] - rinv[(r, c)]);
                }
            }
            Ok((g, ll))
        }
    }
}

/// Mixture score block for component j: xi_j times the component score.
pub fn mixture_component_score(xi_j: f64, comp_score: &[f64]) -> Vec<f64> {
    comp_score.iter().map(|g| xi_j * g).collect()
}

#[derive(Clone, Debug)]
pub struct GasStep {
    pub next: UnconstrainedState,
    pub weights: Vec<f64>,
    pub comps: Vec<ComponentParams>,
    pub xi: Vec<f64>,
    pub loglik: f64,
}

/// One score-driven update at time index `t` (for error reporting).
pub fn gas_step(
    spec: &ModelSpec,
    coeffs: &GasCoefficients,
    state: &UnconstrainedState,
    y: &[f64],
    t: usize,
) -> Result<GasStep> {
    let numeric = |block: &str, msg: String| DammError::numeric(t, block, msg);

    let (weights, wjac) = spec.map_weights(&state.weights);
    let mut comps = Vec::with_capacity(spec.j);
    let mut jacs: Vec<CompJac> = Vec::with_capacity(spec.j);
    for (cidx, cx) in state.comps.iter().enumerate() {
        let (params, jac) = spec
            .map_component(cx)
            .map_err(|e| numeric(&format!("component {} map", cidx + 1), e.to_string()))?;
        comps.push(params);
        jacs.push(jac);
    }

    let mut log_comp = Vec::with_capacity(spec.j);
    let mut scores = Vec::with_capacity(spec.j);
    for (cidx, params) in comps.iter().enumerate() {
        let (g, ll) = score_and_loglik(params, y)
            .map_err(|e| numeric(&format!("component {} score", cidx + 1), e.to_string()))?;
        if !ll.is_finite() && ll != f64::NEG_INFINITY {
            return Err(numeric(&format!("component {} density", cidx + 1), format!("{ll}")));
        }
        log_comp.push(ll);
        scores.push(g);
    }

    let log_terms: Vec<f64> = weights
        .iter()
        .zip(&log_comp)
        .map(|(w, lp)| if *w > 0.0 { w.ln() + lp } else { f64::NEG_INFINITY })
        .collect();
    let log_mix = log_sum_exp(&log_terms);
    if !log_mix.is_finite() {
        return Err(numeric("mixture density", format!("log mixture density = {log_mix}")));
    }

    let ratios = weight_score(&log_comp, log_mix);
    let xi = xi_weights(&weights, &log_comp, log_mix);

    // Weights block: pull the ratio vector back through the simplex Jacobian.
    let wlen = spec.weights_len();
    let mut next_weights = Vec::with_capacity(wlen);
    for h in 0..wlen {
        let scaled: f64 = (0..spec.j).map(|r| wjac[(r, h)] * ratios[r]).sum();
        let v = coeffs.kappa[h] + coeffs.a[h] * scaled + coeffs.b[h] * state.weights[h];
        next_weights.push(v);
    }

    // Component blocks: xi-weighted scores through each map Jacobian.
    let cl = spec.comp_len();
    let mut next_comps = Vec::with_capacity(spec.j);
    for (cidx, ((jac, g), cx)) in jacs.iter().zip(&scores).zip(&state.comps).enumerate() {
        let scaled = jac.scale_grad(g);
        let base = wlen + cidx * cl;
        let mut next = Vec::with_capacity(cl);
        for k in 0..cl {
            let f = base + k;
            next.push(coeffs.kappa[f] + coeffs.a[f] * xi[cidx] * scaled[k] + coeffs.b[f] * cx[k]);
        }
        next_comps.push(next);
    }

    let next = UnconstrainedState { weights: next_weights, comps: next_comps };
    if !next.is_finite() {
        let flat = next.to_flat();
        let bad = flat.iter().position(|v| !v.is_finite()).unwrap_or(0);
        return Err(numeric(&spec.coord_label(bad), "state update produced non-finite value".into()));
    }
    Ok(GasStep { next, weights, comps, xi, loglik: log_mix })
}

/// Per-time record of a filtering pass; `state` is the in-force state at t,
/// measurable from information through t-1.
#[derive(Clone, Debug)]
pub struct FilterStep {
    pub state: UnconstrainedState,
    pub weights: Vec<f64>,
    pub comps: Vec<ComponentParams>,
    pub xi: Vec<f64>,
    pub loglik: f64,
}

#[derive(Clone, Debug)]
pub struct FilterTrace {
    pub steps: Vec<FilterStep>,
    pub total_loglik: f64,
    /// One-step-ahead state implied by the final observation.
    pub final_state: UnconstrainedState,
}

/// Filter a whole sample, collecting the trace. `init` overrides the default
/// stationary-level initializer kappa / (1 - b).
pub fn filter_pass(
    spec: &ModelSpec,
    coeffs: &GasCoefficients,
    data: &[Vec<f64>],
    init: Option<&UnconstrainedState>,
) -> Result<FilterTrace> {
    coeffs.validate(spec)?;
    let mut state = match init {
        Some(s) => s.clone(),
        None => coeffs.unconditional_state(spec),
    };
    let mut steps = Vec::with_capacity(data.len());
    let mut total = 0.0;
    for (t, y) in data.iter().enumerate() {
        let out = gas_step(spec, coeffs, &state, y, t + 1)?;
        total += out.loglik;
        steps.push(FilterStep {
            state: state.clone(),
            weights: out.weights,
            comps: out.comps,
            xi: out.xi,
            loglik: out.loglik,
        });
        state = out.next;
    }
    Ok(FilterTrace { steps, total_loglik: total, final_state: state })
}

/// Likelihood-only pass for the estimation hot loop.
pub fn filter_loglik(
    spec: &ModelSpec,
    coeffs: &GasCoefficients,
    data: &[Vec<f64>],
    init: Option<&UnconstrainedState>,
) -> Result<f64> {
    coeffs.validate(spec)?;
    let mut state = match init {
        Some(s) => s.clone(),
        None => coeffs.unconditional_state(spec),
    };
    let mut total = 0.0;
    for (t, y) in data.iter().enumerate() {
        let out = gas_step(spec, coeffs, &state, y, t + 1)?;
        total += out.loglik;
        state = out.next;
    }
    Ok(total)
}

/// Mean vector and covariance matrix implied by a mixture at one time point.
/// Defined for the density families; copulas have no observation moments.
pub fn implied_moments(
    weights: &[f64],
    comps: &[ComponentParams],
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if weights.len() != comps.len() || comps.is_empty() {
        return Err(DammError::domain("implied_moments", "weights and components must align"));
    }
    let d = comps[0].dim();
    let mut mean = DVector::zeros(d);
    let mut second = DMatrix::zeros(d, d);
    for (w, c) in weights.iter().zip(comps) {
        let (mu, cov): (DVector<f64>, DMatrix<f64>) = match c {
            ComponentParams::Gaussian(p) => (
                DVector::from_element(1, p.mean),
                DMatrix::from_element(1, 1, p.variance),
            ),
            ComponentParams::StudentT(p) => {
                if p.shape <= 2.0 {
                    return Err(DammError::domain(
                        "implied_moments",
                        "student-t variance requires shape > 2",
                    ));
                }
                (
                    DVector::from_element(1, p.mean),
                    DMatrix::from_element(1, 1, p.scale * p.scale * p.shape / (p.shape - 2.0)),
                )
            }
            ComponentParams::MvGaussian(p) => {
                let dm = DMatrix::from_diagonal(&p.sd);
                (p.mean.clone(), &dm * &p.corr * &dm)
            }
            ComponentParams::MvStudentT(p) => {
                if p.shape <= 2.0 {
                    return Err(DammError::domain(
                        "implied_moments",
                        "student-t covariance requires shape > 2",
                    ));
                }
                let dm = DMatrix::from_diagonal(&p.scale);
                (p.mean.clone(), (&dm * &p.corr * &dm) * (p.shape / (p.shape - 2.0)))
            }
            ComponentParams::TCopula(_) | ComponentParams::GaussianCopula(_) => {
                return Err(DammError::domain(
                    "implied_moments",
                    "copula families have no observation moments",
                ));
            }
        };
        if mu.len() != d {
            return Err(DammError::domain("implied_moments", "mixed component dimensions"));
        }
        second += (&cov + &mu * mu.transpose()) * *w;
        mean += mu * *w;
    }
    let cov = second - &mean * mean.transpose();
    Ok((mean, cov))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{
        GaussianCopulaParams, GaussianParams, MvGaussianParams, MvStudentTParams, StudentTParams,
        TCopulaParams,
    };
    use crate::mapping::vechd_pairs;
    use crate::model::Family;
    use approx::assert_abs_diff_eq;
    use nalgebra::dvector;
    use rand::rngs::SmallRng;
    use rand::{RngExt, SeedableRng};

    /// Central finite difference of a component log-density with respect to
    /// one constrained parameter, where `bump` rebuilds the params.
    fn fd(_params: &ComponentParams, y: &[f64], bump: impl Fn(f64) -> ComponentParams) -> f64 {
        let h = 1e-6;
        let hi = bump(h).logpdf(y).unwrap();
        let lo = bump(-h).logpdf(y).unwrap();
        (hi - lo) / (2.0 * h)
    }

    fn assert_rel(analytic: f64, numeric: f64, tol: f64, what: &str) {
        let scale = analytic.abs().max(numeric.abs()).max(1e-8);
        assert!(
            (analytic - numeric).abs() / scale <= tol,
            "{what}: analytic={analytic} fd={numeric}"
        );
    }

    #[test]
    fn gaussian_score_matches_finite_differences() {
        let p = GaussianParams { mean: 0.4, variance: 2.3 };
        let cp = ComponentParams::Gaussian(p.clone());
        for &y in &[-1.5, 0.4, 2.2] {
            let g = component_score(&cp, &[y]).unwrap();
            let fd_mean = fd(&cp, &[y], |h| {
                ComponentParams::Gaussian(GaussianParams { mean: p.mean + h, ..p.clone() })
            });
            let fd_var = fd(&cp, &[y], |h| {
                ComponentParams::Gaussian(GaussianParams { variance: p.variance + h, ..p.clone() })
            });
            assert_rel(g[0], fd_mean, 1e-6, "gaussian mean score");
            assert_rel(g[1], fd_var, 1e-6, "gaussian variance score");
        }
    }

    #[test]
    fn student_t_score_matches_finite_differences() {
        let p = StudentTParams { mean: -0.2, scale: 1.4, shape: 5.5 };
        let cp = ComponentParams::StudentT(p.clone());
        for &y in &[-2.0, -0.2, 3.7] {
            let g = component_score(&cp, &[y]).unwrap();
            let fds = [
                fd(&cp, &[y], |h| {
                    ComponentParams::StudentT(StudentTParams { mean: p.mean + h, ..p.clone() })
                }),
                fd(&cp, &[y], |h| {
                    ComponentParams::StudentT(StudentTParams { scale: p.scale + h, ..p.clone() })
                }),
                fd(&cp, &[y], |h| {
                    ComponentParams::StudentT(StudentTParams { shape: p.shape + h, ..p.clone() })
                }),
            ];
            for (k, f) in fds.iter().enumerate() {
                assert_rel(g[k], *f, 1e-5, &format!("student-t score coordinate {k}"));
            }
        }
    }

    fn random_corr(d: usize, rng: &mut SmallRng) -> DMatrix<f64> {
        let p = crate::mapping::n_corr_angles(d);
        let angles: Vec<f64> =
            (0..p).map(|_| rng.random_range(0.4..std::f64::consts::PI - 0.4)).collect();
        crate::mapping::corr_map(&angles, d).unwrap()
    }

    fn bump_corr(corr: &DMatrix<f64>, r: usize, c: usize, h: f64) -> DMatrix<f64> {
        let mut m = corr.clone();
        m[(r, c)] += h;
        m[(c, r)] += h;
        m
    }

    #[test]
    fn mv_gaussian_score_matches_finite_differences() {
        let mut rng = SmallRng::seed_from_u64(21);
        for _ in 0..20 {
            let d = 3;
            let p = MvGaussianParams {
                mean: dvector![0.1, -0.4, 0.7],
                sd: dvector![1.2, 0.6, 2.0],
                corr: random_corr(d, &mut rng),
            };
            let cp = ComponentParams::MvGaussian(p.clone());
            let y: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
            let g = component_score(&cp, &y).unwrap();
            for i in 0..d {
                let f = fd(&cp, &y, |h| {
                    let mut q = p.clone();
                    q.mean[i] += h;
                    ComponentParams::MvGaussian(q)
                });
                assert_rel(g[i], f, 1e-5, &format!("mv-gaussian mean {i}"));
                let f = fd(&cp, &y, |h| {
                    let mut q = p.clone();
                    q.sd[i] += h;
                    ComponentParams::MvGaussian(q)
                });
                assert_rel(g[d + i], f, 1e-5, &format!("mv-gaussian sd {i}"));
            }
            for (m, (r, c)) in vechd_pairs(d).into_iter().enumerate() {
                let f = fd(&cp, &y, |h| {
                    ComponentParams::MvGaussian(MvGaussianParams {
                        corr: bump_corr(&p.corr, r, c, h),
                        ..p.clone()
                    })
                });
                assert_rel(g[2 * d + m], f, 1e-5, &format!("mv-gaussian corr ({r},{c})"));
            }
        }
    }

    #[test]
    fn mv_student_t_score_matches_finite_differences() {
        let mut rng = SmallRng::seed_from_u64(22);
        for _ in 0..20 {
            let d = 3;
            let p = MvStudentTParams {
                mean: dvector![0.0, 0.3, -0.6],
                scale: dvector![0.8, 1.1, 1.7],
                corr: random_corr(d, &mut rng),
                shape: 6.3,
            };
            let cp = ComponentParams::MvStudentT(p.clone());
            let y: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
            let g = component_score(&cp, &y).unwrap();
            for i in 0..d {
                let f = fd(&cp, &y, |h| {
                    let mut q = p.clone();
                    q.mean[i] += h;
                    ComponentParams::MvStudentT(q)
                });
                assert_rel(g[i], f, 1e-5, &format!("mv-t mean {i}"));
                let f = fd(&cp, &y, |h| {
                    let mut q = p.clone();
                    q.scale[i] += h;
                    ComponentParams::MvStudentT(q)
                });
                assert_rel(g[d + i], f, 1e-5, &format!("mv-t scale {i}"));
            }
            for (m, (r, c)) in vechd_pairs(d).into_iter().enumerate() {
                let f = fd(&cp, &y, |h| {
                    ComponentParams::MvStudentT(MvStudentTParams {
                        corr: bump_corr(&p.corr, r, c, h),
                        ..p.clone()
                    })
                });
                assert_rel(g[2 * d + m], f, 1e-5, &format!("mv-t corr ({r},{c})"));
            }
            let f = fd(&cp, &y, |h| {
                ComponentParams::MvStudentT(MvStudentTParams { shape: p.shape + h, ..p.clone() })
            });
            assert_rel(g[2 * d + vechd_pairs(d).len()], f, 1e-5, "mv-t shape");
        }
    }

    #[test]
    fn t_copula_corr_score_matches_finite_differences() {
        let mut rng = SmallRng::seed_from_u64(23);
        for _ in 0..20 {
            let d = 3;
            let p = TCopulaParams { corr: random_corr(d, &mut rng), shape: 7.0 };
            let cp = ComponentParams::TCopula(p.clone());
            let u: Vec<f64> = (0..d).map(|_| rng.random_range(0.05..0.95)).collect();
            let g = component_score(&cp, &u).unwrap();
            for (m, (r, c)) in vechd_pairs(d).into_iter().enumerate() {
                let f = fd(&cp, &u, |h| {
                    ComponentParams::TCopula(TCopulaParams {
                        corr: bump_corr(&p.corr, r, c, h),
                        ..p.clone()
                    })
                });
                assert_rel(g[m], f, 1e-5, &format!("t-copula corr ({r},{c})"));
            }
            assert_eq!(g[vechd_pairs(d).len()], 0.0);
        }
    }

    #[test]
    fn gaussian_copula_score_matches_finite_differences() {
        let mut rng = SmallRng::seed_from_u64(24);
        for _ in 0..20 {
            let d = 2;
            let p = GaussianCopulaParams { corr: random_corr(d, &mut rng) };
            let cp = ComponentParams::GaussianCopula(p.clone());
            let u: Vec<f64> = (0..d).map(|_| rng.random_range(0.05..0.95)).collect();
            let g = component_score(&cp, &u).unwrap();
            for (m, (r, c)) in vechd_pairs(d).into_iter().enumerate() {
                let f = fd(&cp, &u, |h| {
                    ComponentParams::GaussianCopula(GaussianCopulaParams {
                        corr: bump_corr(&p.corr, r, c, h),
                    })
                });
                assert_rel(g[m], f, 1e-5, &format!("gaussian-copula corr ({r},{c})"));
            }
        }
    }

    #[test]
    fn ratio_identities_hold() {
        // sum_j w_j (p_j/p) = 1 and xi sums to one.
        let log_comp = [-1.3f64, -2.6, -0.9];
        let weights = [0.2f64, 0.5, 0.3];
        let terms: Vec<f64> =
            weights.iter().zip(&log_comp).map(|(w, lp)| w.ln() + lp).collect();
        let lm = log_sum_exp(&terms);
        let ratios = weight_score(&log_comp, lm);
        let xi = xi_weights(&weights, &log_comp, lm);
        let dot: f64 = weights.iter().zip(&ratios).map(|(w, r)| w * r).sum();
        assert_abs_diff_eq!(dot, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(xi.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        for (x, (w, r)) in xi.iter().zip(weights.iter().zip(&ratios)) {
            assert_abs_diff_eq!(*x, w * r, epsilon = 1e-12);
        }
    }

    fn two_comp_gaussian_spec() -> (ModelSpec, GasCoefficients) {
        let spec = ModelSpec::new(Family::UniGaussian, 2, 1).unwrap();
        let l = spec.state_len();
        let mut coeffs = GasCoefficients { kappa: vec![0.0; l], a: vec![0.0; l], b: vec![0.0; l] };
        // weights ~ 0.4, comp1 N(-1, 0.8), comp2 N(1.5, 2.0)
        coeffs.kappa = vec![-0.405, -1.0, 0.8f64.ln(), 1.5, 2.0f64.ln()];
        (spec, coeffs)
    }

    #[test]
    fn static_step_reproduces_mixture_loglik() {
        let (spec, coeffs) = two_comp_gaussian_spec();
        let state = coeffs.unconditional_state(&spec);
        let y = [0.3];
        let out = gas_step(&spec, &coeffs, &state, &y, 1).unwrap();
        let direct = crate::density::mixture_logpdf(&out.weights, &out.comps, &y).unwrap();
        assert_abs_diff_eq!(out.loglik, direct, epsilon = 1e-12);
        // A = B = 0 pins the state at kappa.
        assert_eq!(out.next.to_flat(), coeffs.kappa);
    }

    #[test]
    fn filter_pass_accumulates_and_reports_states() {
        let (spec, mut coeffs) = two_comp_gaussian_spec();
        coeffs.a = vec![0.02; 5];
        coeffs.b = vec![0.9; 5];
        coeffs.kappa = coeffs.kappa.iter().map(|k| k * 0.1).collect();
        let data: Vec<Vec<f64>> = vec![vec![0.1], vec![-0.7], vec![1.9], vec![0.0]];
        let trace = filter_pass(&spec, &coeffs, &data, None).unwrap();
        assert_eq!(trace.steps.len(), 4);
        let manual: f64 = trace.steps.iter().map(|s| s.loglik).sum();
        assert_abs_diff_eq!(trace.total_loglik, manual, epsilon = 1e-12);
        // State at t=1 is the initializer.
        assert_eq!(trace.steps[0].state, coeffs.unconditional_state(&spec));
        // Determinism.
        let again = filter_pass(&spec, &coeffs, &data, None).unwrap();
        assert_abs_diff_eq!(again.total_loglik, trace.total_loglik, epsilon = 0.0);
    }

    #[test]
    fn filter_reports_numeric_failures_with_location() {
        let (spec, mut coeffs) = two_comp_gaussian_spec();
        // Explosive autoregression on the first variance coordinate.
        coeffs.b = vec![0.0; 5];
        coeffs.kappa[2] = 800.0; // variance exp(800) overflows
        let data = vec![vec![0.1]];
        let err = filter_pass(&spec, &coeffs, &data, None).unwrap_err();
        match err {
            DammError::Numeric { t, ref block, .. } => {
                assert_eq!(t, 1);
                assert!(block.contains("component 1"), "block was {block}");
            }
            other => panic!("expected numeric error, got {other}"),
        }
    }

    #[test]
    fn scaled_score_has_zero_mean_in_model() {
        // Martingale property of the full scaled score under the model,
        // smoke-scale here; the acceptance suite runs the big version.
        let (spec, coeffs) = two_comp_gaussian_spec();
        let state = coeffs.unconditional_state(&spec);
        let mapped = {
            let (w, _) = spec.map_weights(&state.weights);
            let comps: Vec<ComponentParams> = state
                .comps
                .iter()
                .map(|c| spec.map_component(c).unwrap().0)
                .collect();
            (w, comps)
        };
        let mut rng = SmallRng::seed_from_u64(99);
        let n = 20_000;
        let l = spec.state_len();
        let mut sums = vec![0.0; l];
        let mut sq = vec![0.0; l];
        let mut unit = coeffs.clone();
        unit.a = vec![1.0; l];
        unit.b = vec![0.0; l];
        unit.kappa = vec![0.0; l];
        for _ in 0..n {
            let (w, comps) = (&mapped.0, &mapped.1);
            let u: f64 = rng.random();
            let (mean, var) = match (&comps[0], &comps[1]) {
                (ComponentParams::Gaussian(a), ComponentParams::Gaussian(b)) => {
                    if u < w[0] {
                        (a.mean, a.variance)
                    } else {
                        (b.mean, b.variance)
                    }
                }
                _ => unreachable!(),
            };
            let z: f64 = rng.sample(rand_distr::StandardNormal);
            let y = [mean + var.sqrt() * z];
            // With kappa=0, b=0, a=1 the next state IS the scaled score.
            let out = gas_step(&spec, &unit, &state, &y, 1).unwrap();
            for (k, v) in out.next.to_flat().iter().enumerate() {
                sums[k] += v;
                sq[k] += v * v;
            }
        }
        for k in 0..l {
            let mean = sums[k] / n as f64;
            let var = sq[k] / n as f64 - mean * mean;
            let se = (var / n as f64).sqrt();
            assert!(
                mean.abs() <= 4.0 * se.max(1e-12),
                "coordinate {k}: mean scaled score {mean} exceeds 4 x SE {se}"
            );
        }
    }

    #[test]
    fn implied_moments_match_two_component_formula() {
        let weights = [0.3, 0.7];
        let comps = [
            ComponentParams::Gaussian(GaussianParams { mean: 3.0, variance: 0.9 }),
            ComponentParams::Gaussian(GaussianParams { mean: -2.0, variance: 1.6 }),
        ];
        let (mean, cov) = implied_moments(&weights, &comps).unwrap();
        let e = 0.3 * 3.0 + 0.7 * (-2.0);
        let v = 0.3 * 0.9 + 0.7 * 1.6 + 0.3 * 9.0 + 0.7 * 4.0 - e * e;
        assert_abs_diff_eq!(mean[0], e, epsilon = 1e-12);
        assert_abs_diff_eq!(cov[(0, 0)], v, epsilon = 1e-12);
    }

    #[test]
    fn implied_moments_mv_single_component_is_drd() {
        let corr = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        let p = MvGaussianParams {
            mean: dvector![1.0, -1.0],
            sd: dvector![2.0, 0.5],
            corr: corr.clone(),
        };
        let (_, cov) = implied_moments(&[1.0], &[ComponentParams::MvGaussian(p)]).unwrap();
        assert_abs_diff_eq!(cov[(0, 0)], 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(cov[(1, 1)], 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(cov[(0, 1)], 0.5 * 2.0 * 0.5, epsilon = 1e-12);
    }

    #[test]
    fn implied_moments_reject_copulas_and_fat_tails() {
        let t = ComponentParams::TCopula(TCopulaParams {
            corr: DMatrix::identity(2, 2),
            shape: 5.0,
        });
        assert!(implied_moments(&[1.0], &[t]).is_err());
        let fat = ComponentParams::StudentT(StudentTParams { mean: 0.0, scale: 1.0, shape: 1.5 });
        assert!(implied_moments(&[1.0], &[fat]).is_err());
    }
}
