//! Maximum-likelihood estimation of the update coefficients.
//!
//! The optimizer works on a packed vector of free parameters. Which
//! coefficients are free is decided per state coordinate by a
//! [`CoefficientTemplate`]: a `Dynamic` coordinate contributes its full
//! (kappa, a, b) triple, a `Static` coordinate contributes only kappa (the
//! frozen level), and a `Pinned` coordinate contributes nothing at all. The
//! autoregressive root b is optimized through a bounded transform so the
//! filter is never evaluated outside the stationary region.
//!
//! Starting values come from a static mixture fit: EM for the Gaussian
//! families, EM plus a neutral fat-tail shape of 8 for the Student-t
//! families, and the sample correlation of normal scores for the copulas.

pub mod em;
pub mod optim;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::density::{
    ComponentParams, GaussianCopulaParams, MvStudentTParams, StudentTParams,
};
use crate::density::{CorrChol, TCopulaParams};
use crate::error::{DammError, Result};
use crate::filter::{filter_loglik, filter_pass};
use crate::mapping::{corr_unmap, simplex_unmap};
use crate::model::{Block, Family, GasCoefficients, ModelSpec};
use crate::special::normal_quantile;
use em::em_static_mixture;
use optim::{bfgs, central_gradient, OptimSettings};

/// Neutral starting value for Student-t shapes when the warm start comes
/// from a Gaussian fit.
const INIT_SHAPE: f64 = 8.0;

/// Objective value returned when the filter rejects a coefficient vector;
/// large enough that any admissible point wins.
const PENALTY: f64 = 1e12;

/// Lower clamp for probability integral transforms; the upper clamp is its
/// complement.
pub const PIT_CLAMP: f64 = 1e-10;

/// Role of one state coordinate in the optimization.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum CoordMode {
    /// Free (kappa, a, b): the coordinate follows the score-driven recursion.
    Dynamic,
    /// Free kappa with a = b = 0: a constant level estimated from the data.
    Static,
    /// Fully fixed at the given unconstrained value; not a parameter.
    Pinned(f64),
}

impl CoordMode {
    fn n_free(self) -> usize {
        match self {
            CoordMode::Dynamic => 3,
            CoordMode::Static => 1,
            CoordMode::Pinned(_) => 0,
        }
    }
}

/// Per-coordinate estimation plan for a model spec.
#[derive(Clone, Debug)]
pub struct CoefficientTemplate {
    pub spec: ModelSpec,
    modes: Vec<CoordMode>,
}

impl CoefficientTemplate {
    /// Default plan: every coordinate dynamic, except blocks the spec
    /// declares frozen (static level) and t-copula shapes, whose score is
    /// identically zero, so a and b would be unidentified.
    pub fn new(spec: ModelSpec) -> Result<Self> {
        spec.validate()?;
        let modes = (0..spec.state_len())
            .map(|i| {
                let (block, _, _) = spec.coord_info(i);
                let forced_static =
                    spec.family == Family::TCopula && block == Block::Shapes;
                if forced_static || spec.frozen.contains(&block) {
                    CoordMode::Static
                } else {
                    CoordMode::Dynamic
                }
            })
            .collect();
        Ok(CoefficientTemplate { spec, modes })
    }

    pub fn modes(&self) -> &[CoordMode] {
        &self.modes
    }

    /// Demote every coordinate of a block (in all components) to a constant
    /// level.
    pub fn set_block_static(&mut self, block: Block) -> Result<()> {
        for i in self.block_coords(block)? {
            self.modes[i] = CoordMode::Static;
        }
        Ok(())
    }

    /// Remove a block from the parameter set entirely, fixing it at the
    /// given unconstrained values. Pass one block's worth of values to pin
    /// every component at the same numbers, or one value per coordinate
    /// across all components to pin them individually.
    pub fn pin_block(&mut self, block: Block, values: &[f64]) -> Result<()> {
        let coords = self.block_coords(block)?;
        let per = self.block_len(block);
        if values.len() != per && values.len() != coords.len() {
            return Err(DammError::domain(
                "template",
                format!(
                    "block {block:?} needs {per} or {} pin values, got {}",
                    coords.len(),
                    values.len()
                ),
            ));
        }
        for (k, i) in coords.into_iter().enumerate() {
            self.modes[i] = CoordMode::Pinned(values[k % values.len()]);
        }
        Ok(())
    }

    fn block_len(&self, block: Block) -> usize {
        if block == Block::Weights {
            self.spec.weights_len()
        } else {
            self.spec.block_offset(block).map(|(_, len)| len).unwrap_or(0)
        }
    }

    fn block_coords(&self, block: Block) -> Result<Vec<usize>> {
        let coords: Vec<usize> = (0..self.spec.state_len())
            .filter(|i| self.spec.coord_info(*i).0 == block)
            .collect();
        if coords.is_empty() {
            return Err(DammError::domain(
                "template",
                format!("model has no {block:?} block"),
            ));
        }
        Ok(coords)
    }

    /// Number of free parameters (Np in the information criteria).
    pub fn n_free(&self) -> usize {
        self.modes.iter().map(|m| m.n_free()).sum()
    }

    /// Human-readable labels of the packed vector entries, in pack order.
    pub fn labels(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.n_free());
        for (i, mode) in self.modes.iter().enumerate() {
            let coord = self.spec.coord_label(i);
            match mode {
                CoordMode::Dynamic => {
                    out.push(format!("kappa[{coord}]"));
                    out.push(format!("a[{coord}]"));
                    out.push(format!("b[{coord}]"));
                }
                CoordMode::Static => out.push(format!("kappa[{coord}]")),
                CoordMode::Pinned(_) => {}
            }
        }
        out
    }

    /// Collapse full coefficients into the packed free-parameter vector.
    /// Dynamic b entries go through the bounded transform.
    pub fn pack(&self, coeffs: &GasCoefficients, bound: f64) -> Result<Vec<f64>> {
        coeffs.validate(&self.spec)?;
        let mut x = Vec::with_capacity(self.n_free());
        for (i, mode) in self.modes.iter().enumerate() {
            match mode {
                CoordMode::Dynamic => {
                    x.push(coeffs.kappa[i]);
                    x.push(coeffs.a[i]);
                    x.push(b_to_unbounded(coeffs.b[i], bound)?);
                }
                CoordMode::Static => x.push(coeffs.kappa[i]),
                CoordMode::Pinned(_) => {}
            }
        }
        Ok(x)
    }

    /// Expand a packed vector back into full coefficients. Static and pinned
    /// coordinates get a = b = 0.
    pub fn unpack(&self, x: &[f64], bound: f64) -> Result<GasCoefficients> {
        if x.len() != self.n_free() {
            return Err(DammError::domain(
                "template",
                format!("expected {} packed values, got {}", self.n_free(), x.len()),
            ));
        }
        let mut coeffs = GasCoefficients::zeros(&self.spec);
        let mut pos = 0;
        for (i, mode) in self.modes.iter().enumerate() {
            match mode {
                CoordMode::Dynamic => {
                    coeffs.kappa[i] = x[pos];
                    coeffs.a[i] = x[pos + 1];
                    coeffs.b[i] = b_from_unbounded(x[pos + 2], bound);
                    pos += 3;
                }
                CoordMode::Static => {
                    coeffs.kappa[i] = x[pos];
                    pos += 1;
                }
                CoordMode::Pinned(v) => coeffs.kappa[i] = *v,
            }
        }
        Ok(coeffs)
    }

    /// Per-entry jitter scales for the restart perturbations, in pack order.
    fn jitter_scales(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_free());
        for mode in &self.modes {
            match mode {
                CoordMode::Dynamic => out.extend_from_slice(&[0.25, 0.05, 0.25]),
                CoordMode::Static => out.push(0.25),
                CoordMode::Pinned(_) => {}
            }
        }
        out
    }
}

/// Map an autoregressive root into the open interval (-bound, bound).
pub fn b_from_unbounded(x: f64, bound: f64) -> f64 {
    bound * x.tanh()
}

/// Inverse of [`b_from_unbounded`].
pub fn b_to_unbounded(b: f64, bound: f64) -> Result<f64> {
    if !(b.abs() < bound) {
        return Err(DammError::domain(
            "transform",
            format!("|b| = {} must lie below the bound {bound}", b.abs()),
        ));
    }
    Ok((b / bound).atanh())
}

/// Optimizer budget and reproducibility knobs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EstimationConfig {
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    /// Relative finite-difference step in transformed space.
    pub fd_step: f64,
    pub restarts: usize,
    pub seed: u64,
    /// Stationarity bound s: optimization keeps every b inside (-s, s).
    pub stationarity_bound: f64,
    /// Invert the numerical Hessian at the optimum for standard errors.
    pub standard_errors: bool,
}

impl Default for EstimationConfig {
    fn default() -> Self {
        EstimationConfig {
            max_iterations: 500,
            gradient_tolerance: 1e-5,
            fd_step: 1e-6,
            restarts: 3,
            seed: 0,
            stationarity_bound: 0.999,
            standard_errors: false,
        }
    }
}

impl EstimationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gradient_tolerance > 0.0) || !(self.fd_step > 0.0) {
            return Err(DammError::domain("config", "tolerances must be positive"));
        }
        if self.restarts < 1 {
            return Err(DammError::domain("config", "need at least one start"));
        }
        if !(self.stationarity_bound > 0.0 && self.stationarity_bound < 1.0) {
            return Err(DammError::domain("config", "stationarity bound must be in (0,1)"));
        }
        Ok(())
    }
}

/// A fitted model with its likelihood and information criteria.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FitResult {
    pub coefficients: GasCoefficients,
    pub loglik: f64,
    pub aic: f64,
    pub bic: f64,
    /// Count of free parameters behind the information criteria.
    pub np: usize,
    pub t_len: usize,
    pub converged: bool,
    pub iterations: usize,
    pub evaluations: usize,
    /// Which start won, for reproducibility diagnostics.
    pub best_start: usize,
    pub standard_errors: Option<Vec<f64>>,
}

/// Maximize the filter log-likelihood over the template's free parameters.
///
/// Start 1 comes from a static fit of the data; the remaining starts jitter
/// it with seeded noise. Starts are merged deterministically: strictly
/// better likelihood wins, ties keep the earlier start.
pub fn fit_ml(
    template: &CoefficientTemplate,
    data: &[Vec<f64>],
    config: &EstimationConfig,
) -> Result<FitResult> {
    let warm = warm_start(template, data, config)?;
    fit_ml_from(template, data, config, &warm)
}

/// Like [`fit_ml`] but with caller-supplied starting coefficients (used for
/// nested-model comparisons that begin at a restricted solution).
pub fn fit_ml_from(
    template: &CoefficientTemplate,
    data: &[Vec<f64>],
    config: &EstimationConfig,
    warm: &GasCoefficients,
) -> Result<FitResult> {
    config.validate()?;
    check_data(&template.spec, data)?;
    let bound = config.stationarity_bound;
    let x0 = template.pack(warm, bound)?;
    let scales = template.jitter_scales();
    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);

    let opt_settings = OptimSettings {
        max_iterations: config.max_iterations,
        gradient_tolerance: config.gradient_tolerance,
        fd_step: config.fd_step,
        cliff: 0.1 * PENALTY,
    };

    let mut objective = |x: &[f64]| -> f64 {
        let coeffs = match template.unpack(x, bound) {
            Ok(c) => c,
            Err(_) => return PENALTY,
        };
        match filter_loglik(&template.spec, &coeffs, data, None) {
            Ok(ll) if ll.is_finite() => -ll,
            _ => PENALTY,
        }
    };

    let mut best: Option<(usize, optim::OptimOutcome)> = None;
    for start in 0..config.restarts {
        let mut x = x0.clone();
        if start > 0 {
            for (xi, s) in x.iter_mut().zip(&scales) {
                *xi += s * standard_normal_draw(&mut rng);
            }
        }
        let outcome = bfgs(&mut objective, &x, &opt_settings);
        let better = match &best {
            None => true,
            Some((_, cur)) => outcome.value < cur.value,
        };
        if better {
            best = Some((start, outcome));
        }
    }
    let (best_start, outcome) = best.expect("at least one start");
    if !(outcome.value < PENALTY) {
        return Err(DammError::Estimation(format!(
            "every start ended in the penalty region (best value {:.3e} from start {best_start})",
            outcome.value
        )));
    }

    let mut coefficients = template.unpack(&outcome.x, bound)?;
    canonicalize_components(template, &mut coefficients);
    // Relabeling is likelihood-preserving only up to rounding; near a
    // knife-edge optimum the mirrored filter path can diverge, so keep the
    // optimizer's orientation unless the relabeled one replays cleanly.
    match filter_loglik(&template.spec, &coefficients, data, None) {
        Ok(ll) if ll.is_finite() => {}
        _ => coefficients = template.unpack(&outcome.x, bound)?,
    }
    let packed = template.pack(&coefficients, bound)?;

    let standard_errors = if config.standard_errors {
        hessian_standard_errors(&mut objective, &packed, config.fd_step)
    } else {
        None
    };

    let loglik = -outcome.value;
    let np = template.n_free();
    let t_len = data.len();
    Ok(FitResult {
        coefficients,
        loglik,
        aic: 2.0 * np as f64 - 2.0 * loglik,
        bic: (t_len as f64).ln() * np as f64 - 2.0 * loglik,
        np,
        t_len,
        converged: outcome.converged,
        iterations: outcome.iterations,
        evaluations: outcome.evaluations,
        best_start,
        standard_errors,
    })
}

fn check_data(spec: &ModelSpec, data: &[Vec<f64>]) -> Result<()> {
    if data.is_empty() {
        return Err(DammError::Estimation("empty dataset".into()));
    }
    let want = if spec.family.is_univariate() { 1 } else { spec.d };
    if data.iter().any(|row| row.len() != want) {
        return Err(DammError::Estimation(format!(
            "expected rows of length {want} for this model"
        )));
    }
    Ok(())
}

fn standard_normal_draw(rng: &mut impl Rng) -> f64 {
    // Box–Muller; one draw per call keeps the stream layout obvious.
    let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Build starting coefficients from a static fit: levels from EM (or normal
/// scores for copulas), a = 0 everywhere, and b = 0.95 * bound on dynamic
/// scale and correlation coordinates so persistence is in place once the
/// optimizer raises a.
fn warm_start(
    template: &CoefficientTemplate,
    data: &[Vec<f64>],
    config: &EstimationConfig,
) -> Result<GasCoefficients> {
    config.validate()?;
    check_data(&template.spec, data)?;
    let spec = &template.spec;
    let bound = config.stationarity_bound;

    let (weights, comp_levels) = static_levels(spec, data, config.seed)?;
    let mut level =
        if spec.j == 1 { Vec::new() } else { simplex_unmap(&weights)? };
    for comp in &comp_levels {
        level.extend_from_slice(comp);
    }

    let mut coeffs = GasCoefficients::zeros(spec);
    let b0 = 0.95 * bound;
    for (i, mode) in template.modes.iter().enumerate() {
        let (block, _, _) = spec.coord_info(i);
        match mode {
            CoordMode::Dynamic => {
                let persistent =
                    block == Block::Scales || block == Block::Correlations;
                let b = if persistent { b0 } else { 0.0 };
                coeffs.b[i] = b;
                coeffs.kappa[i] = (1.0 - b) * level[i];
            }
            CoordMode::Static => coeffs.kappa[i] = level[i],
            CoordMode::Pinned(v) => coeffs.kappa[i] = *v,
        }
    }
    Ok(coeffs)
}

/// Static weight and per-component unconstrained levels for the warm start.
fn static_levels(
    spec: &ModelSpec,
    data: &[Vec<f64>],
    seed: u64,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    match spec.family {
        Family::UniGaussian | Family::MvGaussian => {
            let fit = em_static_mixture(data, spec.j, seed)?;
            let comps = fit
                .comps
                .iter()
                .map(|c| spec.unmap_component(c))
                .collect::<Result<Vec<_>>>()?;
            Ok((fit.weights, comps))
        }
        Family::UniStudentT => {
            let fit = em_static_mixture(data, spec.j, seed)?;
            let comps = fit
                .comps
                .iter()
                .map(|c| match c {
                    ComponentParams::Gaussian(p) => {
                        let params = ComponentParams::StudentT(StudentTParams {
                            mean: p.mean,
                            scale: gaussian_to_t_scale(p.variance),
                            shape: INIT_SHAPE,
                        });
                        spec.unmap_component(&params)
                    }
                    _ => Err(DammError::Estimation("expected scalar EM components".into())),
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((fit.weights, comps))
        }
        Family::MvStudentT => {
            let fit = em_static_mixture(data, spec.j, seed)?;
            let comps = fit
                .comps
                .iter()
                .map(|c| match c {
                    ComponentParams::MvGaussian(p) => {
                        let scale = DVector::from_iterator(
                            p.sd.len(),
                            p.sd.iter().map(|s| gaussian_to_t_scale(s * s)),
                        );
                        let params = ComponentParams::MvStudentT(MvStudentTParams {
                            mean: p.mean.clone(),
                            scale,
                            corr: p.corr.clone(),
                            shape: INIT_SHAPE,
                        });
                        spec.unmap_component(&params)
                    }
                    _ => Err(DammError::Estimation("expected mv EM components".into())),
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((fit.weights, comps))
        }
        Family::TCopula | Family::GaussianCopula => {
            let corr = normal_scores_corr(data)?;
            let params = match spec.family {
                Family::TCopula => ComponentParams::TCopula(TCopulaParams {
                    corr,
                    shape: INIT_SHAPE,
                }),
                _ => ComponentParams::GaussianCopula(GaussianCopulaParams { corr }),
            };
            let comp = spec.unmap_component(&params)?;
            let weights = vec![1.0 / spec.j as f64; spec.j];
            Ok((weights, vec![comp; spec.j]))
        }
    }
}

/// Scale of a Student-t with the initial shape that matches a given
/// Gaussian variance: psi^2 * shape / (shape - 2) = variance.
fn gaussian_to_t_scale(variance: f64) -> f64 {
    (variance * (INIT_SHAPE - 2.0) / INIT_SHAPE).sqrt()
}

/// Sample correlation of the normal scores of PIT data, shrunk toward the
/// identity just enough to guarantee a usable Cholesky factor.
fn normal_scores_corr(data: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let d = data[0].len();
    let t = data.len();
    if t < 3 {
        return Err(DammError::Estimation("too few observations for a copula start".into()));
    }
    let mut scores = vec![vec![0.0; d]; t];
    for (row, y) in data.iter().enumerate() {
        for (col, u) in y.iter().enumerate() {
            let c = u.clamp(PIT_CLAMP, 1.0 - PIT_CLAMP);
            scores[row][col] = normal_quantile(c)?;
        }
    }
    let mean: Vec<f64> =
        (0..d).map(|c| scores.iter().map(|r| r[c]).sum::<f64>() / t as f64).collect();
    let sd: Vec<f64> = (0..d)
        .map(|c| {
            let v = scores.iter().map(|r| (r[c] - mean[c]).powi(2)).sum::<f64>()
                / (t - 1) as f64;
            v.sqrt().max(1e-12)
        })
        .collect();
    let mut corr = DMatrix::identity(d, d);
    for r in 0..d {
        for c in r + 1..d {
            let cov = scores
                .iter()
                .map(|row| (row[r] - mean[r]) * (row[c] - mean[c]))
                .sum::<f64>()
                / (t - 1) as f64;
            let rho = (cov / (sd[r] * sd[c])).clamp(-0.999, 0.999);
            corr[(r, c)] = rho;
            corr[(c, r)] = rho;
        }
    }
    for shrink in 0..6 {
        let lambda = 1.0 - 0.1 * shrink as f64;
        let shrunk = &corr * lambda + DMatrix::identity(d, d) * (1.0 - lambda);
        if CorrChol::new(&shrunk).is_ok() && corr_unmap(&shrunk).is_ok() {
            return Ok(shrunk);
        }
    }
    Ok(DMatrix::identity(d, d))
}

/// Canonical component order for two-component mixtures: ascending
/// unconditional scale level. The swap relabels exactly — exchanging the two
/// component blocks and negating the weight-block kappa leaves the
/// likelihood unchanged, because the stick-breaking score flips sign with
/// the state.
fn canonicalize_components(template: &CoefficientTemplate, coeffs: &mut GasCoefficients) {
    let spec = &template.spec;
    if spec.j != 2 {
        return;
    }
    let Some((scale_off, scale_len)) = spec.block_offset(Block::Scales) else {
        return;
    };
    let w = spec.weights_len();
    let cl = spec.comp_len();
    // Relabeling requires flipping the weight-block kappa; a pinned weight
    // coordinate cannot move, so leave the fit as returned.
    for i in 0..w {
        if matches!(template.modes[i], CoordMode::Pinned(_)) {
            return;
        }
    }
    // The two components must play symmetric roles in the template.
    for k in 0..cl {
        if template.modes[w + k] != template.modes[w + cl + k] {
            return;
        }
    }
    let level = |comp: usize| -> f64 {
        (0..scale_len)
            .map(|k| {
                let i = w + comp * cl + scale_off + k;
                coeffs.kappa[i] / (1.0 - coeffs.b[i])
            })
            .sum::<f64>()
            / scale_len as f64
    };
    if level(0) <= level(1) {
        return;
    }
    for v in [&mut coeffs.kappa, &mut coeffs.a, &mut coeffs.b] {
        for k in 0..cl {
            v.swap(w + k, w + cl + k);
        }
    }
    for i in 0..w {
        coeffs.kappa[i] = -coeffs.kappa[i];
    }
}

/// Standard errors from the inverse numerical Hessian of the negative
/// log-likelihood; `None` when the Hessian is not positive definite.
fn hessian_standard_errors(
    f: &mut impl FnMut(&[f64]) -> f64,
    x: &[f64],
    fd_step: f64,
) -> Option<Vec<f64>> {
    let n = x.len();
    // Hessian of f via central differences of the gradient; the sqrt step
    // balances truncation and roundoff for second derivatives.
    let h_step = fd_step.sqrt();
    let mut hess = DMatrix::zeros(n, n);
    let mut probe = x.to_vec();
    for i in 0..n {
        let h = h_step * x[i].abs().max(1.0);
        probe[i] = x[i] + h;
        let gp = central_gradient(f, &probe, fd_step);
        probe[i] = x[i] - h;
        let gm = central_gradient(f, &probe, fd_step);
        probe[i] = x[i];
        for j in 0..n {
            hess[(i, j)] += (gp[j] - gm[j]) / (2.0 * h);
        }
    }
    // Symmetrize before factoring.
    let hess = (&hess + hess.transpose()) * 0.5;
    let chol = hess.cholesky()?;
    let inv = chol.inverse();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let v = inv[(i, i)];
        if !(v > 0.0) || !v.is_finite() {
            return None;
        }
        out.push(v.sqrt());
    }
    Some(out)
}

/// Result of the two-step copula estimation: per-series marginal fits, the
/// copula fit on their probability integral transforms, and the Sklar
/// decomposition of the joint likelihood.
#[derive(Clone, Debug)]
pub struct TwoStepFit {
    pub marginals: Vec<FitResult>,
    pub copula: FitResult,
    /// Joint log-likelihood: sum of marginal logliks plus the copula loglik.
    pub total_loglik: f64,
    /// PIT values that had to be clamped away from 0 or 1.
    pub clamped: usize,
    pub pits: Vec<Vec<f64>>,
}

/// Inference-functions-for-margins estimator: fit each margin with the
/// univariate template, transform the data through the fitted conditional
/// mixture CDFs, then fit the copula template on the transforms.
pub fn two_step_copula_fit(
    copula_template: &CoefficientTemplate,
    marginal_template: &CoefficientTemplate,
    data: &[Vec<f64>],
    config: &EstimationConfig,
) -> Result<TwoStepFit> {
    if !copula_template.spec.family.is_copula() {
        return Err(DammError::domain("two_step", "step two needs a copula family"));
    }
    if !marginal_template.spec.family.is_univariate() {
        return Err(DammError::domain("two_step", "margins must be univariate"));
    }
    check_data(&copula_template.spec, data)?;
    let d = copula_template.spec.d;
    let t_len = data.len();

    let mut marginals = Vec::with_capacity(d);
    let mut pits = vec![vec![0.0; d]; t_len];
    let mut clamped = 0usize;
    for col in 0..d {
        let series: Vec<Vec<f64>> = data.iter().map(|row| vec![row[col]]).collect();
        let fit = fit_ml(marginal_template, &series, config)?;
        let trace =
            filter_pass(&marginal_template.spec, &fit.coefficients, &series, None)?;
        for (t, step) in trace.steps.iter().enumerate() {
            let mut u = 0.0;
            for (w, comp) in step.weights.iter().zip(&step.comps) {
                u += w * comp.cdf(series[t][0])?;
            }
            if !(PIT_CLAMP..=1.0 - PIT_CLAMP).contains(&u) {
                clamped += 1;
                u = u.clamp(PIT_CLAMP, 1.0 - PIT_CLAMP);
            }
            pits[t][col] = u;
        }
        marginals.push(fit);
    }

    let copula = fit_ml(copula_template, &pits, config)?;
    let total_loglik =
        marginals.iter().map(|m| m.loglik).sum::<f64>() + copula.loglik;
    Ok(TwoStepFit { marginals, copula, total_loglik, clamped, pits })
}
