//! Simulators: the model itself, and the synthetic processes the Monte
//! Carlo studies filter.
//!
//! Everything here is deterministic given its RNG. Replication `r` of a
//! study uses [`replication_rng`], which selects an independent counter
//! stream of one ChaCha instance, so replications can run in any order or in
//! parallel without sharing state.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngExt};
use rand_chacha::ChaCha12Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::density::{ComponentParams, CorrChol};
use crate::error::{DammError, Result};
use crate::filter::{gas_step, FilterStep, FilterTrace};
use crate::mapping::{corr_unmap, logistic, n_corr_angles, simplex_unmap};
use crate::model::{Block, Family, GasCoefficients, ModelSpec, UnconstrainedState};
use crate::special::{normal_cdf, student_t_cdf};
use rand::SeedableRng;

/// Independent RNG for replication `rep` of a run seeded with `seed`.
pub fn replication_rng(seed: u64, rep: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    rng
}

pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Standard Student-t draw via the normal/chi-square ratio.
fn standard_t<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> Result<f64> {
    let chi = ChiSquared::new(shape)
        .map_err(|e| DammError::domain("simulate", format!("chi-squared shape: {e}")))?;
    let w: f64 = chi.sample(rng);
    Ok(standard_normal(rng) * (shape / w).sqrt())
}

fn correlated_normals<R: Rng + ?Sized>(corr: &DMatrix<f64>, rng: &mut R) -> Result<DVector<f64>> {
    let chol = CorrChol::new(corr)?;
    let d = corr.nrows();
    let z = DVector::from_iterator(d, (0..d).map(|_| standard_normal(rng)));
    Ok(chol.lower() * z)
}

/// One draw from a single mixture component.
pub fn draw_component<R: Rng + ?Sized>(params: &ComponentParams, rng: &mut R) -> Result<Vec<f64>> {
    match params {
        ComponentParams::Gaussian(p) => {
            Ok(vec![p.mean + p.variance.sqrt() * standard_normal(rng)])
        }
        ComponentParams::StudentT(p) => {
            Ok(vec![p.mean + p.scale * standard_t(p.shape, rng)?])
        }
        ComponentParams::MvGaussian(p) => {
            let x = correlated_normals(&p.corr, rng)?;
            Ok((0..x.len()).map(|i| p.mean[i] + p.sd[i] * x[i]).collect())
        }
        ComponentParams::MvStudentT(p) => {
            let x = correlated_normals(&p.corr, rng)?;
            let chi = ChiSquared::new(p.shape)
                .map_err(|e| DammError::domain("simulate", format!("chi-squared shape: {e}")))?;
            let w: f64 = chi.sample(rng);
            let mult = (p.shape / w).sqrt();
            Ok((0..x.len()).map(|i| p.mean[i] + p.scale[i] * x[i] * mult).collect())
        }
        ComponentParams::TCopula(p) => {
            let x = correlated_normals(&p.corr, rng)?;
            let chi = ChiSquared::new(p.shape)
                .map_err(|e| DammError::domain("simulate", format!("chi-squared shape: {e}")))?;
            let w: f64 = chi.sample(rng);
            let mult = (p.shape / w).sqrt();
            x.iter().map(|xi| student_t_cdf(xi * mult, p.shape)).collect()
        }
        ComponentParams::GaussianCopula(p) => {
            let x = correlated_normals(&p.corr, rng)?;
            Ok(x.iter().map(|xi| normal_cdf(*xi)).collect())
        }
    }
}

/// Categorical draw from a probability vector.
pub fn draw_category<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (j, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return j;
        }
    }
    weights.len() - 1
}

/// Simulate a path of the model itself: at each t draw a component from the
/// current weights, draw the observation from it, then advance the state by
/// the score-driven update with that observation. Returns the data and the
/// generating trace (the truth a filtering run should recover).
pub fn simulate_damm<R: Rng + ?Sized>(
    spec: &ModelSpec,
    coeffs: &GasCoefficients,
    t_len: usize,
    rng: &mut R,
) -> Result<(Vec<Vec<f64>>, FilterTrace)> {
    coeffs.validate(spec)?;
    let mut state = coeffs.unconditional_state(spec);
    let mut data = Vec::with_capacity(t_len);
    let mut steps = Vec::with_capacity(t_len);
    let mut total = 0.0;
    for t in 1..=t_len {
        let (weights, _) = spec.map_weights(&state.weights);
        let comps = state
            .comps
            .iter()
            .map(|cx| spec.map_component(cx).map(|(p, _)| p))
            .collect::<Result<Vec<_>>>()?;
        let j = draw_category(&weights, rng);
        let y = draw_component(&comps[j], rng)?;
        let out = gas_step(spec, coeffs, &state, &y, t)?;
        total += out.loglik;
        steps.push(FilterStep {
            state: state.clone(),
            weights: out.weights,
            comps: out.comps,
            xi: out.xi,
            loglik: out.loglik,
        });
        state = out.next;
        data.push(y);
    }
    Ok((data, FilterTrace { steps, total_loglik: total, final_state: state }))
}

/// One simulated continuation of length `horizon` starting from a given
/// unconstrained state (typically the one-step-ahead state left behind by a
/// filtering pass). The state advances by the same score-driven update the
/// filter applies, so repeated calls with independent generators draw from
/// the model's predictive distribution.
pub fn forecast_path<R: Rng + ?Sized>(
    spec: &ModelSpec,
    coeffs: &GasCoefficients,
    init: &UnconstrainedState,
    horizon: usize,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    coeffs.validate(spec)?;
    let mut state = init.clone();
    let mut data = Vec::with_capacity(horizon);
    for t in 1..=horizon {
        let (weights, _) = spec.map_weights(&state.weights);
        let comps = state
            .comps
            .iter()
            .map(|cx| spec.map_component(cx).map(|(p, _)| p))
            .collect::<Result<Vec<_>>>()?;
        let j = draw_category(&weights, rng);
        let y = draw_component(&comps[j], rng)?;
        let out = gas_step(spec, coeffs, &state, &y, t)?;
        state = out.next;
        data.push(y);
    }
    Ok(data)
}

// ---------------------------------------------------------------------------
// Stochastic two-component benchmark process
// ---------------------------------------------------------------------------

/// AR(1) constants of the five latent processes, in the order
/// (logit weight, mean 1, log variance 1, mean 2, log variance 2):
/// intercept, slope, innovation variance.
const SDMM_AR: [(f64, f64, f64); 5] = [
    (-0.003, 0.99, 1.00),
    (0.09, 0.97, 0.02),
    (-0.001, 0.98, 0.04),
    (-0.04, 0.98, 0.06),
    (0.004, 0.99, 0.08),
];

/// Latent truth of the stochastic mixture benchmark: per-t weight of the
/// first component, component moments, and the implied conditional mean and
/// variance of the observation.
#[derive(Clone, Debug)]
pub struct SdmmPath {
    pub omega: Vec<f64>,
    pub mean1: Vec<f64>,
    pub var1: Vec<f64>,
    pub mean2: Vec<f64>,
    pub var2: Vec<f64>,
    pub cond_mean: Vec<f64>,
    pub cond_var: Vec<f64>,
}

fn sdmm_step(state: [f64; 5], eps: [f64; 5]) -> [f64; 5] {
    let mut next = [0.0; 5];
    for k in 0..5 {
        let (c, b, _) = SDMM_AR[k];
        next[k] = c + b * state[k] + eps[k];
    }
    next
}

fn sdmm_stationary_mean() -> [f64; 5] {
    let mut m = [0.0; 5];
    for k in 0..5 {
        let (c, b, _) = SDMM_AR[k];
        m[k] = c / (1.0 - b);
    }
    m
}

/// Simulate the latent path (weights and component moments) of length `t_len`
/// starting from the stationary means.
pub fn sdmm_path<R: Rng + ?Sized>(t_len: usize, rng: &mut R) -> SdmmPath {
    let mut state = sdmm_stationary_mean();
    let mut path = SdmmPath {
        omega: Vec::with_capacity(t_len),
        mean1: Vec::with_capacity(t_len),
        var1: Vec::with_capacity(t_len),
        mean2: Vec::with_capacity(t_len),
        var2: Vec::with_capacity(t_len),
        cond_mean: Vec::with_capacity(t_len),
        cond_var: Vec::with_capacity(t_len),
    };
    for _ in 0..t_len {
        let omega = logistic(state[0]);
        let (m1, v1) = (state[1], state[2].exp());
        let (m2, v2) = (state[3], state[4].exp());
        let mean = omega * m1 + (1.0 - omega) * m2;
        let var = omega * v1 + (1.0 - omega) * v2 + omega * m1 * m1
            + (1.0 - omega) * m2 * m2
            - mean * mean;
        path.omega.push(omega);
        path.mean1.push(m1);
        path.var1.push(v1);
        path.mean2.push(m2);
        path.var2.push(v2);
        path.cond_mean.push(mean);
        path.cond_var.push(var);
        let mut eps = [0.0; 5];
        for k in 0..5 {
            eps[k] = SDMM_AR[k].2.sqrt() * standard_normal(rng);
        }
        state = sdmm_step(state, eps);
    }
    path
}

/// Draw one observation series from a fixed latent path. Separate from
/// [`sdmm_path`] so a study can hold the truth fixed across replications and
/// vary only the measurement draws.
pub fn sdmm_observations<R: Rng + ?Sized>(path: &SdmmPath, rng: &mut R) -> Vec<f64> {
    path.omega
        .iter()
        .zip(path.mean1.iter().zip(&path.var1))
        .zip(path.mean2.iter().zip(&path.var2))
        .map(|((omega, (m1, v1)), (m2, v2))| {
            if rng.random::<f64>() < *omega {
                m1 + v1.sqrt() * standard_normal(rng)
            } else {
                m2 + v2.sqrt() * standard_normal(rng)
            }
        })
        .collect()
}

/// Path and one observation series in one call, on separate substreams.
pub fn simulate_sdmm(t_len: usize, seed: u64) -> (Vec<f64>, SdmmPath) {
    let mut path_rng = replication_rng(seed, 0);
    let path = sdmm_path(t_len, &mut path_rng);
    let mut obs_rng = replication_rng(seed, 1);
    let data = sdmm_observations(&path, &mut obs_rng);
    (data, path)
}

// ---------------------------------------------------------------------------
// Deterministic and stochastic target patterns
// ---------------------------------------------------------------------------

/// The seven target dynamics imposed on a correlation or a mixture weight.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PatternKind {
    Constant,
    Sine,
    FastSine,
    Step,
    Ramp,
    Model1,
    Model2,
}

impl PatternKind {
    pub const ALL: [PatternKind; 7] = [
        PatternKind::Constant,
        PatternKind::Sine,
        PatternKind::FastSine,
        PatternKind::Step,
        PatternKind::Ramp,
        PatternKind::Model1,
        PatternKind::Model2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PatternKind::Constant => "constant",
            PatternKind::Sine => "sine",
            PatternKind::FastSine => "fast-sine",
            PatternKind::Step => "step",
            PatternKind::Ramp => "ramp",
            PatternKind::Model1 => "model1",
            PatternKind::Model2 => "model2",
        }
    }
}

impl std::str::FromStr for PatternKind {
    type Err = DammError;
    fn from_str(s: &str) -> Result<Self> {
        PatternKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| DammError::Config(format!("unknown pattern `{s}`")))
    }
}

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Correlation target series of length `t_len` (time is 1-based in the
/// formulas). Stochastic patterns start at their stationary means; set
/// `burn_in` to discard that many leading draws first.
pub fn corr_pattern_series<R: Rng + ?Sized>(
    kind: PatternKind,
    t_len: usize,
    burn_in: usize,
    rng: &mut R,
) -> Vec<f64> {
    match kind {
        PatternKind::Constant => (1..=t_len).map(|_| 0.9).collect(),
        PatternKind::Sine => {
            (1..=t_len).map(|t| 0.5 + 0.4 * (TWO_PI * t as f64 / 200.0).cos()).collect()
        }
        PatternKind::FastSine => {
            (1..=t_len).map(|t| 0.5 + 0.4 * (TWO_PI * t as f64 / 20.0).cos()).collect()
        }
        PatternKind::Step => {
            (1..=t_len).map(|t| 0.9 - 0.5 * f64::from(u8::from(t > 500))).collect()
        }
        PatternKind::Ramp => (1..=t_len).map(|t| (t % 200) as f64 / 200.0).collect(),
        PatternKind::Model1 => {
            // Logistic AR(1) with stationary level -0.4.
            let mut x = -0.4;
            let mut out = Vec::with_capacity(t_len);
            for i in 0..burn_in + t_len {
                x = -0.4 * (1.0 - 0.99) + 0.99 * x + 0.14 * standard_normal(rng);
                if i >= burn_in {
                    out.push(logistic(x));
                }
            }
            out
        }
        PatternKind::Model2 => {
            // Mixture of two logistic AR(1) levels; the mixing weight follows
            // an intercept-free logit AR(1).
            let (mut x1, mut x2, mut wz) = (-0.4, 0.4, 0.0);
            let mut out = Vec::with_capacity(t_len);
            for i in 0..burn_in + t_len {
                x1 = -0.4 * (1.0 - 0.99) + 0.99 * x1 + 0.14 * standard_normal(rng);
                x2 = 0.4 * (1.0 - 0.99) + 0.99 * x2 + 0.14 * standard_normal(rng);
                wz = 0.98 * wz + standard_normal(rng);
                if i >= burn_in {
                    let w = logistic(-wz);
                    out.push(w * logistic(x1) + (1.0 - w) * logistic(x2));
                }
            }
            out
        }
    }
}

/// Mixture-weight target series. The sine shapes use the same bounded form
/// as the correlation study so the weight stays inside (0,1); see the module
/// tests for the pointwise values.
pub fn weight_pattern_series<R: Rng + ?Sized>(
    kind: PatternKind,
    t_len: usize,
    burn_in: usize,
    rng: &mut R,
) -> Vec<f64> {
    match kind {
        PatternKind::Constant => (1..=t_len).map(|_| 0.9).collect(),
        PatternKind::Sine => {
            (1..=t_len).map(|t| 0.5 + 0.4 * (TWO_PI * t as f64 / 200.0).cos()).collect()
        }
        PatternKind::FastSine => {
            (1..=t_len).map(|t| 0.5 + 0.4 * (TWO_PI * t as f64 / 20.0).cos()).collect()
        }
        PatternKind::Step => {
            (1..=t_len).map(|t| 0.9 - 0.5 * f64::from(u8::from(t > 500))).collect()
        }
        PatternKind::Ramp => (1..=t_len).map(|t| (t % 100) as f64 / 100.0).collect(),
        PatternKind::Model1 | PatternKind::Model2 => {
            let sd = if kind == PatternKind::Model1 { 0.1 } else { 0.5 };
            let mut x = -0.015 / (1.0 - 0.98);
            let mut out = Vec::with_capacity(t_len);
            for i in 0..burn_in + t_len {
                x = -0.015 + 0.98 * x + sd * standard_normal(rng);
                if i >= burn_in {
                    out.push(logistic(-x));
                }
            }
            out
        }
    }
}

/// Bivariate unit-variance Gaussian sample with a prescribed correlation
/// path. Returns (data, the path itself).
pub fn simulate_corr_series<R: Rng + ?Sized>(
    kind: PatternKind,
    t_len: usize,
    rng: &mut R,
) -> (Vec<Vec<f64>>, Vec<f64>) {
    let rho = corr_pattern_series(kind, t_len, 0, rng);
    let data = rho
        .iter()
        .map(|r| {
            let z1 = standard_normal(rng);
            let z2 = standard_normal(rng);
            vec![z1, r * z1 + (1.0 - r * r).sqrt() * z2]
        })
        .collect();
    (data, rho)
}

/// Fixed two-Gaussian mixture with time-varying composition.
pub const MIXFIX_MEANS: [f64; 2] = [-4.0, 1.0];
pub const MIXFIX_VARS: [f64; 2] = [6.0, 3.0];

/// Univariate draws from the fixed-component mixture, one per weight.
pub fn simulate_mixfix<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Vec<f64> {
    weights
        .iter()
        .map(|w| {
            let j = usize::from(rng.random::<f64>() >= *w);
            MIXFIX_MEANS[j] + MIXFIX_VARS[j].sqrt() * standard_normal(rng)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Four-dimensional misspecification designs
// ---------------------------------------------------------------------------

/// The four nested designs of the misspecification study: a two-component
/// standard-Gaussian mixture in four dimensions where the weight and the
/// component correlation matrices are each either score-driven or static.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dgp {
    /// Dynamic weight, dynamic correlations.
    Dgp1,
    /// Static weight, dynamic correlations.
    Dgp2,
    /// Dynamic weight, static correlations.
    Dgp3,
    /// Static weight, static correlations.
    Dgp4,
}

impl Dgp {
    pub const ALL: [Dgp; 4] = [Dgp::Dgp1, Dgp::Dgp2, Dgp::Dgp3, Dgp::Dgp4];

    pub fn name(self) -> &'static str {
        match self {
            Dgp::Dgp1 => "dgp1",
            Dgp::Dgp2 => "dgp2",
            Dgp::Dgp3 => "dgp3",
            Dgp::Dgp4 => "dgp4",
        }
    }

    pub fn dynamic_weights(self) -> bool {
        matches!(self, Dgp::Dgp1 | Dgp::Dgp3)
    }

    pub fn dynamic_correlations(self) -> bool {
        matches!(self, Dgp::Dgp1 | Dgp::Dgp2)
    }
}

impl std::str::FromStr for Dgp {
    type Err = DammError;
    fn from_str(s: &str) -> Result<Self> {
        Dgp::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| DammError::Config(format!("unknown design `{s}`")))
    }
}

fn equicorrelation(d: usize, rho: f64) -> DMatrix<f64> {
    DMatrix::from_fn(d, d, |r, c| if r == c { 1.0 } else { rho })
}

/// Model specification and generating coefficients for one design:
/// four-dimensional two-component Gaussian mixture with zero means, unit
/// scales, unconditional weight one half, and unconditional component
/// equicorrelations 0.2 and 0.6. Dynamic blocks are persistent
/// (autoregression 0.98, loadings 0.05 on the weight and 0.02 on the
/// correlation angles); static blocks sit at their unconditional values.
pub fn dgp_model(which: Dgp) -> Result<(ModelSpec, GasCoefficients)> {
    let mut frozen = std::collections::BTreeSet::from([Block::Means, Block::Scales]);
    if !which.dynamic_weights() {
        frozen.insert(Block::Weights);
    }
    if !which.dynamic_correlations() {
        frozen.insert(Block::Correlations);
    }
    let spec = ModelSpec { family: Family::MvGaussian, j: 2, d: 4, frozen };
    spec.validate()?;

    let d = 4;
    let p = n_corr_angles(d);
    let mut coeffs = GasCoefficients::zeros(&spec);
    let (b_dyn, a_w, a_r) = (0.98, 0.05, 0.02);

    // Weights block: logit stick-break of (1/2, 1/2) is zero, so kappa stays
    // zero whether or not the block is dynamic.
    let w_tilde = simplex_unmap(&[0.5, 0.5])?;
    debug_assert_eq!(w_tilde.len(), 1);
    if which.dynamic_weights() {
        coeffs.a[0] = a_w;
        coeffs.b[0] = b_dyn;
    }
    coeffs.kappa[0] =
        w_tilde[0] * if which.dynamic_weights() { 1.0 - b_dyn } else { 1.0 };

    // Component blocks: means and scales pinned at zero (identity and log
    // links both give state coordinate 0), correlation angles at the
    // equicorrelation targets.
    for (cidx, rho) in [0.2, 0.6].into_iter().enumerate() {
        let angles = corr_unmap(&equicorrelation(d, rho))?;
        let base = spec.weights_len() + cidx * spec.comp_len() + 2 * d;
        for (k, angle) in angles.iter().enumerate().take(p) {
            if which.dynamic_correlations() {
                coeffs.a[base + k] = a_r;
                coeffs.b[base + k] = b_dyn;
                coeffs.kappa[base + k] = angle * (1.0 - b_dyn);
            } else {
                coeffs.kappa[base + k] = *angle;
            }
        }
    }
    Ok((spec, coeffs))
}

/// Simulated data from one design together with the implied per-t
/// correlation truth, the weight-average of the component correlations.
pub struct DgpSample {
    pub data: Vec<Vec<f64>>,
    pub truth_corr: Vec<DMatrix<f64>>,
    pub truth_weight: Vec<f64>,
}

/// Implied observation correlation of a standard-margins mixture: the
/// weight-average of the component correlation matrices.
pub fn implied_mixture_corr(weights: &[f64], comps: &[ComponentParams]) -> Result<DMatrix<f64>> {
    let d = comps[0].dim();
    let mut out = DMatrix::zeros(d, d);
    for (w, c) in weights.iter().zip(comps) {
        match c {
            ComponentParams::MvGaussian(p) => out += &p.corr * *w,
            _ => {
                return Err(DammError::domain(
                    "implied_mixture_corr",
                    "defined for standard-margins Gaussian mixtures",
                ))
            }
        }
    }
    Ok(out)
}

pub fn simulate_dgp<R: Rng + ?Sized>(which: Dgp, t_len: usize, rng: &mut R) -> Result<DgpSample> {
    let (spec, coeffs) = dgp_model(which)?;
    let (data, trace) = simulate_damm(&spec, &coeffs, t_len, rng)?;
    let truth_corr = trace
        .steps
        .iter()
        .map(|s| implied_mixture_corr(&s.weights, &s.comps))
        .collect::<Result<Vec<_>>>()?;
    let truth_weight = trace.steps.iter().map(|s| s.weights[0]).collect();
    Ok(DgpSample { data, truth_corr, truth_weight })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::UnconstrainedState;
    use approx::assert_abs_diff_eq;

    #[test]
    fn replication_streams_are_independent_and_reproducible() {
        let mut a = replication_rng(7, 0);
        let mut b = replication_rng(7, 1);
        let mut a2 = replication_rng(7, 0);
        let xa: f64 = a.random();
        let xb: f64 = b.random();
        let xa2: f64 = a2.random();
        assert_ne!(xa, xb);
        assert_eq!(xa, xa2);
    }

    #[test]
    fn single_component_static_model_matches_sample_mean() {
        let spec = ModelSpec::new(Family::UniGaussian, 1, 1).unwrap();
        let mut coeffs = GasCoefficients::zeros(&spec);
        coeffs.kappa = vec![1.5, 0.25f64.ln()];
        let mut rng = replication_rng(11, 0);
        let t_len = 4000;
        let (data, _) = simulate_damm(&spec, &coeffs, t_len, &mut rng).unwrap();
        let mean: f64 = data.iter().map(|y| y[0]).sum::<f64>() / t_len as f64;
        let tol = 3.0 * 0.5 / (t_len as f64).sqrt();
        assert!((mean - 1.5).abs() < tol, "sample mean {mean}");
    }

    #[test]
    fn component_frequencies_track_average_weight() {
        let spec = ModelSpec::new(Family::UniGaussian, 2, 1).unwrap();
        let mut coeffs = GasCoefficients::zeros(&spec);
        coeffs.kappa = vec![simplex_unmap(&[0.3, 0.7]).unwrap()[0], -10.0, 0.0, 10.0, 0.0];
        let mut rng = replication_rng(13, 0);
        let t_len = 20_000;
        let (data, trace) = simulate_damm(&spec, &coeffs, t_len, &mut rng).unwrap();
        // Disjoint means let the sign of y identify the component.
        let freq1 =
            data.iter().filter(|y| y[0] < 0.0).count() as f64 / t_len as f64;
        let avg_w1: f64 =
            trace.steps.iter().map(|s| s.weights[0]).sum::<f64>() / t_len as f64;
        let se = (avg_w1 * (1.0 - avg_w1) / t_len as f64).sqrt();
        assert!((freq1 - avg_w1).abs() <= 3.0 * se, "freq {freq1} vs weight {avg_w1}");
    }

    #[test]
    fn simulate_damm_is_seed_deterministic() {
        let spec = ModelSpec::new(Family::UniGaussian, 2, 1).unwrap();
        let mut coeffs = GasCoefficients::zeros(&spec);
        coeffs.kappa = vec![0.1, -1.0, 0.0, 1.0, 0.3];
        coeffs.a = vec![0.05; 5];
        coeffs.b = vec![0.9; 5];
        coeffs.kappa.iter_mut().for_each(|k| *k *= 0.1);
        let (d1, _) = simulate_damm(&spec, &coeffs, 50, &mut replication_rng(3, 4)).unwrap();
        let (d2, _) = simulate_damm(&spec, &coeffs, 50, &mut replication_rng(3, 4)).unwrap();
        assert_eq!(d1, d2);
    }

    #[test]
    fn sdmm_without_innovations_sits_at_stationary_levels() {
        let m = sdmm_stationary_mean();
        assert_abs_diff_eq!(m[0], -0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(m[1], 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m[2], -0.05, epsilon = 1e-12);
        assert_abs_diff_eq!(m[3], -2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m[4], 0.4, epsilon = 1e-12);
        let next = sdmm_step(m, [0.0; 5]);
        for k in 0..5 {
            assert_abs_diff_eq!(next[k], m[k], epsilon = 1e-12);
        }
        assert_abs_diff_eq!(logistic(m[0]), logistic(-0.3), epsilon = 1e-15);
    }

    #[test]
    fn sdmm_truth_variance_dominates_within_component_part() {
        let (data, path) = simulate_sdmm(300, 19);
        assert_eq!(data.len(), 300);
        for t in 0..300 {
            let within = path.omega[t] * path.var1[t] + (1.0 - path.omega[t]) * path.var2[t];
            assert!(path.cond_var[t] >= within - 1e-12);
        }
        let (data2, _) = simulate_sdmm(300, 19);
        assert_eq!(data, data2);
    }

    #[test]
    fn corr_patterns_match_printed_values() {
        let mut rng = replication_rng(1, 0);
        let series = |k: PatternKind| corr_pattern_series(k, 1000, 0, &mut replication_rng(1, 0));
        assert_abs_diff_eq!(series(PatternKind::Constant)[0], 0.9);
        assert_abs_diff_eq!(series(PatternKind::Constant)[999], 0.9);
        // t = 20: cos(2 pi) = 1.
        assert_abs_diff_eq!(series(PatternKind::FastSine)[19], 0.9, epsilon = 1e-12);
        // t = 500 is before the break, 501 after.
        assert_abs_diff_eq!(series(PatternKind::Step)[499], 0.9);
        assert_abs_diff_eq!(series(PatternKind::Step)[500], 0.4);
        // Sine at t = 100: cos(pi) = -1.
        assert_abs_diff_eq!(series(PatternKind::Sine)[99], 0.1, epsilon = 1e-12);
        // Ramp sawtooth.
        assert_abs_diff_eq!(series(PatternKind::Ramp)[0], 1.0 / 200.0);
        assert_abs_diff_eq!(series(PatternKind::Ramp)[199], 0.0);
        for kind in [PatternKind::Model1, PatternKind::Model2] {
            let s = corr_pattern_series(kind, 2000, 0, &mut rng);
            assert!(s.iter().all(|r| *r > 0.0 && *r < 1.0));
        }
    }

    #[test]
    fn weight_patterns_match_printed_values_and_stay_in_range() {
        let series = |k: PatternKind| weight_pattern_series(k, 1000, 0, &mut replication_rng(2, 0));
        assert_abs_diff_eq!(series(PatternKind::Constant)[0], 0.9);
        assert_abs_diff_eq!(series(PatternKind::Step)[500], 0.4);
        assert_abs_diff_eq!(series(PatternKind::Ramp)[49], 50.0 / 100.0);
        for kind in PatternKind::ALL {
            let s = series(kind);
            assert!(s.iter().all(|w| (0.0..=1.0).contains(w)), "{kind:?} out of [0,1]");
        }
        // Model2 swings harder than Model1.
        let sd1 = std_dev(&series(PatternKind::Model1));
        let sd2 = std_dev(&series(PatternKind::Model2));
        assert!(sd2 > sd1);
    }

    fn std_dev(x: &[f64]) -> f64 {
        let m = x.iter().sum::<f64>() / x.len() as f64;
        (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64).sqrt()
    }

    #[test]
    fn pattern_names_round_trip() {
        for kind in PatternKind::ALL {
            assert_eq!(kind.name().parse::<PatternKind>().unwrap(), kind);
        }
        assert!("wiggle".parse::<PatternKind>().is_err());
    }

    #[test]
    fn corr_series_data_has_target_correlation() {
        let mut rng = replication_rng(5, 0);
        let (data, rho) = simulate_corr_series(PatternKind::Constant, 20_000, &mut rng);
        assert!(rho.iter().all(|r| *r == 0.9));
        let n = data.len() as f64;
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for y in &data {
            sxy += y[0] * y[1];
            sxx += y[0] * y[0];
            syy += y[1] * y[1];
        }
        let r = sxy / (sxx * syy).sqrt();
        // SE of a sample correlation is about (1 - rho^2) / sqrt(n).
        let se = (1.0 - 0.81) / n.sqrt();
        assert!((r - 0.9).abs() < 4.0 * se, "sample corr {r}");
    }

    #[test]
    fn mixfix_mean_lies_between_component_means() {
        let mut rng = replication_rng(6, 0);
        let w = weight_pattern_series(PatternKind::Sine, 5000, 0, &mut rng);
        let y = simulate_mixfix(&w, &mut rng);
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        assert!(mean > -4.0 && mean < 1.0, "mixture mean {mean}");
    }

    #[test]
    fn student_t_draws_match_cdf() {
        let mut rng = replication_rng(8, 0);
        let shape = 6.0;
        let n = 20_000;
        let p = ComponentParams::StudentT(crate::density::StudentTParams {
            mean: 0.0,
            scale: 1.0,
            shape,
        });
        let mut below = [0usize; 3];
        let probes = [-1.5, 0.0, 2.0];
        for _ in 0..n {
            let y = draw_component(&p, &mut rng).unwrap()[0];
            for (k, q) in probes.iter().enumerate() {
                if y < *q {
                    below[k] += 1;
                }
            }
        }
        for (k, q) in probes.iter().enumerate() {
            let expect = student_t_cdf(*q, shape).unwrap();
            let got = below[k] as f64 / n as f64;
            let se = (expect * (1.0 - expect) / n as f64).sqrt();
            assert!((got - expect).abs() <= 4.0 * se, "cdf at {q}: {got} vs {expect}");
        }
    }

    #[test]
    fn copula_draws_have_uniform_margins() {
        let mut rng = replication_rng(9, 0);
        let corr = DMatrix::from_row_slice(2, 2, &[1.0, 0.6, 0.6, 1.0]);
        let p = ComponentParams::TCopula(crate::density::TCopulaParams { corr, shape: 5.0 });
        let n = 10_000;
        let mut sum = [0.0; 2];
        for _ in 0..n {
            let u = draw_component(&p, &mut rng).unwrap();
            assert!(u.iter().all(|v| *v > 0.0 && *v < 1.0));
            sum[0] += u[0];
            sum[1] += u[1];
        }
        let se = (1.0f64 / 12.0 / n as f64).sqrt();
        for s in sum {
            assert!((s / n as f64 - 0.5).abs() <= 4.0 * se);
        }
    }

    #[test]
    fn dgp_models_validate_and_honor_block_dynamics() {
        for which in Dgp::ALL {
            let (spec, coeffs) = dgp_model(which).unwrap();
            coeffs.validate(&spec).unwrap();
            // Means and scales never move.
            let base = spec.weights_len();
            for cidx in 0..2 {
                for k in 0..8 {
                    let f = base + cidx * spec.comp_len() + k;
                    assert_eq!(coeffs.a[f], 0.0);
                    assert_eq!(coeffs.b[f], 0.0);
                    assert_eq!(coeffs.kappa[f], 0.0);
                }
            }
            assert_eq!(coeffs.a[0] != 0.0, which.dynamic_weights());
            let angle0 = base + 8;
            assert_eq!(coeffs.a[angle0] != 0.0, which.dynamic_correlations());
            // Unconditional state maps to the intended targets.
            let state: UnconstrainedState = coeffs.unconditional_state(&spec);
            let (w, _) = spec.map_weights(&state.weights);
            assert_abs_diff_eq!(w[0], 0.5, epsilon = 1e-12);
            for (cidx, rho) in [0.2, 0.6].into_iter().enumerate() {
                let (params, _) = spec.map_component(&state.comps[cidx]).unwrap();
                if let ComponentParams::MvGaussian(p) = params {
                    assert_abs_diff_eq!(p.mean[0], 0.0, epsilon = 1e-12);
                    assert_abs_diff_eq!(p.sd[0], 1.0, epsilon = 1e-12);
                    assert_abs_diff_eq!(p.corr[(1, 0)], rho, epsilon = 1e-10);
                    assert_abs_diff_eq!(p.corr[(3, 2)], rho, epsilon = 1e-10);
                } else {
                    panic!("wrong family");
                }
            }
        }
    }

    #[test]
    fn dgp4_truth_correlation_is_constant_and_valid() {
        let mut rng = replication_rng(10, 0);
        let sample = simulate_dgp(Dgp::Dgp4, 50, &mut rng).unwrap();
        let first = &sample.truth_corr[0];
        for m in &sample.truth_corr {
            assert_abs_diff_eq!((m - first).norm(), 0.0, epsilon = 1e-12);
            for i in 0..4 {
                assert_abs_diff_eq!(m[(i, i)], 1.0, epsilon = 1e-12);
            }
            // Convex combination of correlation matrices stays one.
            CorrChol::new(m).unwrap();
        }
        assert!(sample.truth_weight.iter().all(|w| (*w - 0.5).abs() < 1e-12));
    }

    #[test]
    fn dgp1_truth_correlation_moves() {
        let mut rng = replication_rng(12, 0);
        let sample = simulate_dgp(Dgp::Dgp1, 200, &mut rng).unwrap();
        let spread = sample
            .truth_corr
            .iter()
            .map(|m| m[(1, 0)])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        assert!(spread.1 - spread.0 > 1e-3, "correlation never moved: {spread:?}");
        for m in &sample.truth_corr {
            CorrChol::new(m).unwrap();
        }
    }
}
