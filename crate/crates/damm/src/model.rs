//! Model specification, state layout, and update coefficients.
//!
//! A model is a J-component mixture of one family observed in d dimensions.
//! The unconstrained state stacks one weights block of length J-1 (empty for
//! J=1) and one block per component whose layout depends on the family:
//!
//! - uni-gaussian:    [mean, log variance]
//! - uni-student-t:   [mean, log scale, log(shape - 2)]
//! - mv-gaussian:     [means (d), log sds (d), angles (p)]
//! - mv-student-t:    [means (d), log scales (d), angles (p), log(shape - 2.01)]
//! - t-copula:        [angles (p), log(shape - 2.01)]   (shape never evolves)
//! - gaussian-copula: [angles (p)]
//!
//! with p = d(d-1)/2. The shape offsets keep second moments finite for the
//! Student families. `GasCoefficients` hold one intercept, score loading, and
//! autoregressive coefficient per state coordinate; blocks are frozen by
//! zeroing their loadings, which keeps one recursion for every restricted
//! variant.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::density::{
    ComponentParams, GaussianCopulaParams, GaussianParams, MvGaussianParams, MvStudentTParams,
    StudentTParams, TCopulaParams,
};
use crate::error::{DammError, Result};
use crate::mapping::{corr_map_jacobian, n_corr_angles, simplex_jacobian, simplex_map};

/// Shape link offset for the univariate Student-t: shape = exp(x) + 2.
pub const UNI_SHAPE_OFFSET: f64 = 2.0;
/// Shape link offset for the multivariate Student-t and the copulas.
pub const MV_SHAPE_OFFSET: f64 = 2.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    UniGaussian,
    UniStudentT,
    MvGaussian,
    MvStudentT,
    TCopula,
    GaussianCopula,
}

impl Family {
    pub fn is_univariate(self) -> bool {
        matches!(self, Family::UniGaussian | Family::UniStudentT)
    }

    pub fn is_copula(self) -> bool {
        matches!(self, Family::TCopula | Family::GaussianCopula)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Block {
    Weights,
    Means,
    Scales,
    Correlations,
    Shapes,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: Family,
    /// Number of mixture components J >= 1.
    pub j: usize,
    /// Observation dimension.
    pub d: usize,
    /// Blocks held constant over time (estimated as static levels).
    #[serde(default)]
    pub frozen: BTreeSet<Block>,
}

impl ModelSpec {
    pub fn new(family: Family, j: usize, d: usize) -> Result<Self> {
        let spec = ModelSpec { family, j, d, frozen: BTreeSet::new() };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_frozen(mut self, blocks: impl IntoIterator<Item = Block>) -> Self {
        self.frozen.extend(blocks);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.j == 0 {
            return Err(DammError::domain("model_spec", "need at least one component"));
        }
        if self.family.is_univariate() && self.d != 1 {
            return Err(DammError::domain("model_spec", "univariate families require d=1"));
        }
        if !self.family.is_univariate() && self.d < 2 {
            return Err(DammError::domain("model_spec", "multivariate families require d>=2"));
        }
        let blocks: BTreeSet<Block> = self.comp_layout().iter().map(|(b, _)| *b).collect();
        for f in &self.frozen {
            if *f != Block::Weights && !blocks.contains(f) {
                return Err(DammError::domain(
                    "model_spec",
                    format!("block {f:?} does not exist in family {:?}", self.family),
                ));
            }
        }
        Ok(())
    }

    /// Per-component layout as (block, length) runs, in storage order.
    pub fn comp_layout(&self) -> Vec<(Block, usize)> {
        let d = self.d;
        let p = n_corr_angles(d);
        match self.family {
            Family::UniGaussian => vec![(Block::Means, 1), (Block::Scales, 1)],
            Family::UniStudentT => {
                vec![(Block::Means, 1), (Block::Scales, 1), (Block::Shapes, 1)]
            }
            Family::MvGaussian => {
                vec![(Block::Means, d), (Block::Scales, d), (Block::Correlations, p)]
            }
            Family::MvStudentT => vec![
                (Block::Means, d),
                (Block::Scales, d),
                (Block::Correlations, p),
                (Block::Shapes, 1),
            ],
            Family::TCopula => vec![(Block::Correlations, p), (Block::Shapes, 1)],
            Family::GaussianCopula => vec![(Block::Correlations, p)],
        }
    }

    pub fn comp_len(&self) -> usize {
        self.comp_layout().iter().map(|(_, n)| n).sum()
    }

    pub fn weights_len(&self) -> usize {
        self.j - 1
    }

    /// Total state length L.
    pub fn state_len(&self) -> usize {
        self.weights_len() + self.j * self.comp_len()
    }

    /// Block and component owning a flat coordinate, with the offset inside
    /// the block; weights report component `None`.
    pub fn coord_info(&self, flat: usize) -> (Block, Option<usize>, usize) {
        let w = self.weights_len();
        if flat < w {
            return (Block::Weights, None, flat);
        }
        let cl = self.comp_len();
        let rel = flat - w;
        let comp = rel / cl;
        let mut within = rel % cl;
        for (block, len) in self.comp_layout() {
            if within < len {
                return (block, Some(comp), within);
            }
            within -= len;
        }
        unreachable!("coordinate {flat} beyond state length");
    }

    pub fn coord_label(&self, flat: usize) -> String {
        let (block, comp, k) = self.coord_info(flat);
        match comp {
            None => format!("weights[{k}]"),
            Some(c) => format!("comp{}.{:?}[{k}]", c + 1, block).to_lowercase(),
        }
    }

    /// Offset of a block inside the per-component layout.
    pub fn block_offset(&self, block: Block) -> Option<(usize, usize)> {
        let mut off = 0;
        for (b, len) in self.comp_layout() {
            if b == block {
                return Some((off, len));
            }
            off += len;
        }
        None
    }

    /// Constrained parameters and map Jacobian for one component block.
    pub fn map_component(&self, x: &[f64]) -> Result<(ComponentParams, CompJac)> {
        let d = self.d;
        let p = n_corr_angles(d);
        if x.len() != self.comp_len() {
            return Err(DammError::domain("map_component", "state block length mismatch"));
        }
        match self.family {
            Family::UniGaussian => {
                let variance = x[1].exp();
                Ok((
                    ComponentParams::Gaussian(GaussianParams { mean: x[0], variance }),
                    CompJac::Scalars(vec![1.0, variance]),
                ))
            }
            Family::UniStudentT => {
                let scale = x[1].exp();
                let ds = x[2].exp();
                Ok((
                    ComponentParams::StudentT(StudentTParams {
                        mean: x[0],
                        scale,
                        shape: ds + UNI_SHAPE_OFFSET,
                    }),
                    CompJac::Scalars(vec![1.0, scale, ds]),
                ))
            }
            Family::MvGaussian => {
                let mean = nalgebra::DVector::from_column_slice(&x[..d]);
                let sd = nalgebra::DVector::from_iterator(d, x[d..2 * d].iter().map(|v| v.exp()));
                let angles = &x[2 * d..2 * d + p];
                let (corr, corr_jac) = corr_map_jacobian(angles, d)?;
                let jac = CompJac::Mv {
                    head: std::iter::repeat(1.0).take(d).chain(sd.iter().cloned()).collect(),
                    corr: corr_jac,
                    tail: vec![],
                };
                Ok((ComponentParams::MvGaussian(MvGaussianParams { mean, sd, corr }), jac))
            }
            Family::MvStudentT => {
                let mean = nalgebra::DVector::from_column_slice(&x[..d]);
                let scale =
                    nalgebra::DVector::from_iterator(d, x[d..2 * d].iter().map(|v| v.exp()));
                let angles = &x[2 * d..2 * d + p];
                let (corr, corr_jac) = corr_map_jacobian(angles, d)?;
                let ds = x[2 * d + p].exp();
                let jac = CompJac::Mv {
                    head: std::iter::repeat(1.0).take(d).chain(scale.iter().cloned()).collect(),
                    corr: corr_jac,
                    tail: vec![ds],
                };
                Ok((
                    ComponentParams::MvStudentT(MvStudentTParams {
                        mean,
                        scale,
                        corr,
                        shape: ds + MV_SHAPE_OFFSET,
                    }),
                    jac,
                ))
            }
            Family::TCopula => {
                let angles = &x[..p];
                let (corr, corr_jac) = corr_map_jacobian(angles, d)?;
                let ds = x[p].exp();
                let jac = CompJac::Mv {
                    head: vec![],
                    corr: corr_jac,
                    tail: vec![ds],
                };
                Ok((
                    ComponentParams::TCopula(TCopulaParams { corr, shape: ds + MV_SHAPE_OFFSET }),
                    jac,
                ))
            }
            Family::GaussianCopula => {
                let angles = &x[..p];
                let (corr, corr_jac) = corr_map_jacobian(angles, d)?;
                let jac = CompJac::Mv {
                    head: vec![],
                    corr: corr_jac,
                    tail: vec![],
                };
                Ok((ComponentParams::GaussianCopula(GaussianCopulaParams { corr }), jac))
            }
        }
    }

    /// Mixture weights and the stick-breaking Jacobian (J rows, J-1 cols).
    pub fn map_weights(&self, wtilde: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
        if self.j == 1 {
            return (vec![1.0], DMatrix::zeros(1, 0));
        }
        (simplex_map(wtilde), simplex_jacobian(wtilde))
    }

    /// Inverse of the per-component map: constrained parameters to the
    /// unconstrained block, used to seed the filter from static fits.
    pub fn unmap_component(&self, params: &ComponentParams) -> Result<Vec<f64>> {
        use crate::mapping::corr_unmap;
        let place = "unmap_component";
        let err = || DammError::domain(place, "parameters do not match the model family");
        match (self.family, params) {
            (Family::UniGaussian, ComponentParams::Gaussian(p)) => {
                if !(p.variance > 0.0) {
                    return Err(DammError::domain(place, "variance must be positive"));
                }
                Ok(vec![p.mean, p.variance.ln()])
            }
            (Family::UniStudentT, ComponentParams::StudentT(p)) => {
                if !(p.scale > 0.0 && p.shape > UNI_SHAPE_OFFSET) {
                    return Err(DammError::domain(place, "scale must be positive, shape > 2"));
                }
                Ok(vec![p.mean, p.scale.ln(), (p.shape - UNI_SHAPE_OFFSET).ln()])
            }
            (Family::MvGaussian, ComponentParams::MvGaussian(p)) => {
                let mut out: Vec<f64> = p.mean.iter().cloned().collect();
                if p.sd.iter().any(|s| !(*s > 0.0)) {
                    return Err(DammError::domain(place, "sds must be positive"));
                }
                out.extend(p.sd.iter().map(|s| s.ln()));
                out.extend(corr_unmap(&p.corr)?);
                Ok(out)
            }
            (Family::MvStudentT, ComponentParams::MvStudentT(p)) => {
                if p.scale.iter().any(|s| !(*s > 0.0)) || p.shape <= MV_SHAPE_OFFSET {
                    return Err(DammError::domain(place, "scales positive, shape > 2.01"));
                }
                let mut out: Vec<f64> = p.mean.iter().cloned().collect();
                out.extend(p.scale.iter().map(|s| s.ln()));
                out.extend(corr_unmap(&p.corr)?);
                out.push((p.shape - MV_SHAPE_OFFSET).ln());
                Ok(out)
            }
            (Family::TCopula, ComponentParams::TCopula(p)) => {
                if p.shape <= MV_SHAPE_OFFSET {
                    return Err(DammError::domain(place, "shape must exceed 2.01"));
                }
                let mut out = corr_unmap(&p.corr)?;
                out.push((p.shape - MV_SHAPE_OFFSET).ln());
                Ok(out)
            }
            (Family::GaussianCopula, ComponentParams::GaussianCopula(p)) => corr_unmap(&p.corr),
            _ => Err(err()),
        }
    }
}

/// Jacobian of one component's map, stored by block: scalar diagonal entries
/// for mean/scale/shape links and a dense p x p block for the correlations.
#[derive(Clone, Debug)]
pub enum CompJac {
    Scalars(Vec<f64>),
    Mv { head: Vec<f64>, corr: DMatrix<f64>, tail: Vec<f64> },
}

impl CompJac {
    /// J' g: pull a constrained-space gradient back to the unconstrained
    /// block coordinates.
    pub fn scale_grad(&self, g: &[f64]) -> Vec<f64> {
        match self {
            CompJac::Scalars(diag) => {
                debug_assert_eq!(diag.len(), g.len());
                diag.iter().zip(g).map(|(d, gi)| d * gi).collect()
            }
            CompJac::Mv { head, corr, tail } => {
                let p = corr.nrows();
                debug_assert_eq!(head.len() + p + tail.len(), g.len());
                let mut out = Vec::with_capacity(g.len());
                for (d, gi) in head.iter().zip(&g[..head.len()]) {
                    out.push(d * gi);
                }
                let gc = &g[head.len()..head.len() + p];
                for col in 0..p {
                    out.push((0..p).map(|row| corr[(row, col)] * gc[row]).sum());
                }
                for (d, gi) in tail.iter().zip(&g[head.len() + p..]) {
                    out.push(d * gi);
                }
                out
            }
        }
    }
}

/// Unconstrained filter state: one weights block and one block per component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnconstrainedState {
    pub weights: Vec<f64>,
    pub comps: Vec<Vec<f64>>,
}

impl UnconstrainedState {
    pub fn zeros(spec: &ModelSpec) -> Self {
        UnconstrainedState {
            weights: vec![0.0; spec.weights_len()],
            comps: vec![vec![0.0; spec.comp_len()]; spec.j],
        }
    }

    pub fn from_flat(spec: &ModelSpec, flat: &[f64]) -> Result<Self> {
        if flat.len() != spec.state_len() {
            return Err(DammError::domain("state", "flat state length mismatch"));
        }
        let w = spec.weights_len();
        let cl = spec.comp_len();
        Ok(UnconstrainedState {
            weights: flat[..w].to_vec(),
            comps: (0..spec.j).map(|c| flat[w + c * cl..w + (c + 1) * cl].to_vec()).collect(),
        })
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = self.weights.clone();
        for c in &self.comps {
            out.extend_from_slice(c);
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|v| v.is_finite())
            && self.comps.iter().all(|c| c.iter().all(|v| v.is_finite()))
    }
}

/// Update coefficients, one (kappa, a, b) triple per state coordinate:
/// state' = kappa + a * scaled_score + b * state. Flat layout matches
/// `UnconstrainedState::to_flat`. A frozen coordinate is a=0, b=0 with kappa
/// holding the frozen level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GasCoefficients {
    pub kappa: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl GasCoefficients {
    /// All-zero coefficients with the layout of `spec`.
    pub fn zeros(spec: &ModelSpec) -> Self {
        let l = spec.state_len();
        GasCoefficients { kappa: vec![0.0; l], a: vec![0.0; l], b: vec![0.0; l] }
    }

    pub fn constant(spec: &ModelSpec, kappa: Vec<f64>) -> Result<Self> {
        let l = spec.state_len();
        if kappa.len() != l {
            return Err(DammError::domain("coefficients", "kappa length mismatch"));
        }
        Ok(GasCoefficients { kappa, a: vec![0.0; l], b: vec![0.0; l] })
    }

    pub fn validate(&self, spec: &ModelSpec) -> Result<()> {
        let l = spec.state_len();
        if self.kappa.len() != l || self.a.len() != l || self.b.len() != l {
            return Err(DammError::domain("coefficients", "coefficient length mismatch"));
        }
        for (i, v) in self.kappa.iter().chain(&self.a).enumerate() {
            if !v.is_finite() {
                return Err(DammError::domain(
                    "coefficients",
                    format!("non-finite coefficient at flat index {}", i % l),
                ));
            }
        }
        for (i, b) in self.b.iter().enumerate() {
            if !b.is_finite() || b.abs() >= 1.0 {
                return Err(DammError::domain(
                    "coefficients",
                    format!("b[{i}]={b} violates |b| < 1"),
                ));
            }
        }
        Ok(())
    }

    /// Stationary level kappa / (1 - b), the default filter initializer.
    pub fn unconditional_state(&self, spec: &ModelSpec) -> UnconstrainedState {
        let flat: Vec<f64> =
            self.kappa.iter().zip(&self.b).map(|(k, b)| k / (1.0 - b)).collect();
        UnconstrainedState::from_flat(spec, &flat).expect("coefficient layout matches spec")
    }
}
