//! Mappings from unconstrained states to admissible parameter regions.
//!
//! Three pieces: scalar links (identity, exponential-with-offset, bounded
//! logistic), the stick-breaking map from R^{J-1} onto the open probability
//! simplex, and the angle parametrization of correlation matrices via an
//! upper-triangular factor of cosines and sine products. Each map ships its
//! analytic Jacobian; the Jacobians are what turn conditional scores in the
//! constrained space into updates of the unconstrained state, so they are
//! finite-difference tested rather than trusted.
//!
//! Simplex Jacobian structure (J rows, J-1 columns): diagonal entries are
//! `b_j sigma'(x_j)`, entries left of the diagonal recycle the negated
//! partial column sums, the last row closes each column so that every column
//! sums to zero. That zero-sum property is what makes the mixture-weight
//! score a martingale difference after rescaling.
//!
//! Correlation angles: the p = d(d-1)/2 entries are laid out like the
//! strictly lower triangle of the matrix, column-major: for d=4 the order is
//! (2,1),(3,1),(4,1),(3,2),(4,2),(4,3). The angle for pair (i,k), i<k, sits
//! in row i of column k of the factor. Angles enter through cos/sin directly,
//! so any finite real input yields a valid (possibly singular) correlation
//! matrix; the map is periodic rather than injective, and the inverse returns
//! the canonical branch with all angles in (0, pi).

use nalgebra::{Cholesky, DMatrix};

use crate::error::{DammError, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ScalarLink {
    Identity,
    /// v = exp(x) + offset, keeping v > offset.
    Exp { offset: f64 },
    /// v = lo + (hi - lo) * logistic(x), keeping v in (lo, hi).
    Bounded { lo: f64, hi: f64 },
}

impl ScalarLink {
    /// Returns (value, d value / d x).
    pub fn apply(self, x: f64) -> (f64, f64) {
        match self {
            ScalarLink::Identity => (x, 1.0),
            ScalarLink::Exp { offset } => {
                let e = x.exp();
                (e + offset, e)
            }
            ScalarLink::Bounded { lo, hi } => {
                let s = logistic(x);
                (lo + (hi - lo) * s, (hi - lo) * s * (1.0 - s))
            }
        }
    }

    pub fn invert(self, v: f64) -> Result<f64> {
        match self {
            ScalarLink::Identity => Ok(v),
            ScalarLink::Exp { offset } => {
                if v <= offset {
                    return Err(DammError::domain("link", format!("{v} not above offset {offset}")));
                }
                Ok((v - offset).ln())
            }
            ScalarLink::Bounded { lo, hi } => {
                if !(v > lo && v < hi) {
                    return Err(DammError::domain("link", format!("{v} outside ({lo},{hi})")));
                }
                Ok(logit((v - lo) / (hi - lo)))
            }
        }
    }
}

/// Numerically stable logistic function.
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Stick-breaking map from J-1 unconstrained values to J weights.
///
/// Each step takes a logistic share of the remaining budget; the last weight
/// absorbs the remainder, so the output sums to one exactly up to the
/// accumulated rounding of the subtractions.
pub fn simplex_map(wtilde: &[f64]) -> Vec<f64> {
    let j = wtilde.len() + 1;
    let mut w = Vec::with_capacity(j);
    let mut budget = 1.0_f64;
    for &x in wtilde {
        let wj = budget * logistic(x);
        w.push(wj);
        budget -= wj;
    }
    w.push(budget);
    w
}

/// Jacobian of `simplex_map`: J rows, J-1 columns; every column sums to zero.
pub fn simplex_jacobian(wtilde: &[f64]) -> DMatrix<f64> {
    let cols = wtilde.len();
    let j = cols + 1;
    let mut jac = DMatrix::zeros(j, cols);
    let mut colsum = vec![0.0_f64; cols];
    let mut budget = 1.0_f64;
    for (row, &x) in wtilde.iter().enumerate() {
        let s = logistic(x);
        jac[(row, row)] = budget * s * (1.0 - s);
        for h in 0..row {
            jac[(row, h)] = -colsum[h] * s;
        }
        for h in 0..=row.min(cols - 1) {
            colsum[h] += jac[(row, h)];
        }
        budget -= budget * s;
    }
    for h in 0..cols {
        jac[(j - 1, h)] = -colsum[h];
    }
    jac
}

/// Inverse of `simplex_map` for weights strictly inside the simplex.
pub fn simplex_unmap(w: &[f64]) -> Result<Vec<f64>> {
    if w.len() < 2 {
        return Err(DammError::domain("simplex_unmap", "need at least two weights"));
    }
    let sum: f64 = w.iter().sum();
    if w.iter().any(|wi| !(*wi > 0.0)) || (sum - 1.0).abs() > 1e-8 {
        return Err(DammError::domain(
            "simplex_unmap",
            format!("weights must be strictly positive and sum to one (sum={sum})"),
        ));
    }
    let mut out = Vec::with_capacity(w.len() - 1);
    let mut budget = 1.0_f64;
    for &wi in &w[..w.len() - 1] {
        let share = wi / budget;
        if !(share > 0.0 && share < 1.0) {
            return Err(DammError::domain("simplex_unmap", "weight exhausts remaining budget"));
        }
        out.push(logit(share));
        budget -= wi;
    }
    Ok(out)
}

pub fn n_corr_angles(d: usize) -> usize {
    d * (d - 1) / 2
}

/// Off-diagonal pairs in storage order: (row, col) with row > col,
/// column-major over the strictly lower triangle.
pub fn vechd_pairs(d: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::with_capacity(n_corr_angles(d));
    for c in 0..d {
        for r in c + 1..d {
            pairs.push((r, c));
        }
    }
    pairs
}

/// Index of pair (lo, hi), lo < hi, in the `vechd_pairs` order.
pub fn pair_index(lo: usize, hi: usize, d: usize) -> usize {
    debug_assert!(lo < hi && hi < d);
    lo * d - lo * (lo + 1) / 2 + (hi - lo - 1)
}

/// Upper-triangular factor of the angle parametrization: column k holds
/// cos(angle) terms damped by the running sine product, with the pure sine
/// product on the diagonal, so every column has unit norm. Takes the
/// precomputed cos/sin of each angle so the map and its Jacobian share one
/// round of trigonometry.
fn angle_factor(cos: &[f64], sin: &[f64], d: usize) -> DMatrix<f64> {
    let mut z = DMatrix::zeros(d, d);
    z[(0, 0)] = 1.0;
    for k in 1..d {
        let mut prod = 1.0_f64;
        for i in 0..k {
            let m = pair_index(i, k, d);
            z[(i, k)] = cos[m] * prod;
            prod *= sin[m];
        }
        z[(k, k)] = prod;
    }
    z
}

fn angle_trig(angles: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut cos = Vec::with_capacity(angles.len());
    let mut sin = Vec::with_capacity(angles.len());
    for phi in angles {
        let (s, c) = phi.sin_cos();
        cos.push(c);
        sin.push(s);
    }
    (cos, sin)
}

/// Correlation matrix from d(d-1)/2 angles: R = Z'Z with Z the angle factor.
/// Symmetric with an exactly unit diagonal by construction.
pub fn corr_map(angles: &[f64], d: usize) -> Result<DMatrix<f64>> {
    if angles.len() != n_corr_angles(d) || d < 1 {
        return Err(DammError::domain("corr_map", "angle count must be d(d-1)/2"));
    }
    let (cos, sin) = angle_trig(angles);
    Ok(corr_from_factor(&angle_factor(&cos, &sin, d), d))
}

fn corr_from_factor(z: &DMatrix<f64>, d: usize) -> DMatrix<f64> {
    let mut r = DMatrix::identity(d, d);
    for c in 0..d {
        for row in c + 1..d {
            // Columns `row` and `c` of the factor are supported on rows
            // 0..=min(row, c) = 0..=c since c < row.
            let dot: f64 = (0..=c).map(|k| z[(k, row)] * z[(k, c)]).sum();
            r[(row, c)] = dot;
            r[(c, row)] = dot;
        }
    }
    r
}

/// Jacobian of the off-diagonal correlations with respect to the angles:
/// p x p, rows in `vechd_pairs` order, columns in angle order. Product rule
/// through the factor: dR = dZ'Z + Z'dZ, where dZ touches one column.
pub fn corr_jacobian(angles: &[f64], d: usize) -> Result<DMatrix<f64>> {
    Ok(corr_map_jacobian(angles, d)?.1)
}

/// The correlation matrix and its angle Jacobian in one pass, sharing the
/// trigonometry and the factor (this is the filter's hot path).
pub fn corr_map_jacobian(angles: &[f64], d: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let p = n_corr_angles(d);
    if angles.len() != p || d < 1 {
        return Err(DammError::domain("corr_jacobian", "angle count must be d(d-1)/2"));
    }
    let (cos, sin) = angle_trig(angles);
    let z = angle_factor(&cos, &sin, d);
    let r = corr_from_factor(&z, d);
    let mut jac = DMatrix::zeros(p, p);
    let mut dcol = vec![0.0; d];
    for c in 0..d {
        for hi in c + 1..d {
            let lo = c;
            let m = pair_index(lo, hi, d);
            // Angle m lives at row `lo` of column `hi` of the factor.
            angle_factor_column_derivative(&cos, &sin, d, lo, hi, &mut dcol);
            // dR = dZ'Z + Z'dZ with dZ nonzero only in column `hi`:
            // dR[x, hi] += dot(dcol, Z[., x]) for all x, and symmetrically.
            let mut row_idx = 0;
            for cc in 0..d {
                for rr in cc + 1..d {
                    let mut val = 0.0;
                    if rr == hi {
                        val += (lo..=hi.min(cc)).map(|k| dcol[k] * z[(k, cc)]).sum::<f64>();
                    }
                    if cc == hi {
                        val += (lo..=hi.min(rr)).map(|k| dcol[k] * z[(k, rr)]).sum::<f64>();
                    }
                    jac[(row_idx, m)] = val;
                    row_idx += 1;
                }
            }
        }
    }
    Ok((r, jac))
}

/// Derivative of factor column `b` with respect to the angle at row `a` of
/// that column (a < b), written into `dcol[a..=b]` (entries outside that
/// range stay untouched; callers read only the supported range): each entry
/// swaps one cos/sin factor for its derivative inside the running product.
fn angle_factor_column_derivative(
    cos: &[f64],
    sin: &[f64],
    d: usize,
    a: usize,
    b: usize,
    dcol: &mut [f64],
) {
    let m_ab = pair_index(a, b, d);
    // Running product of sin(angle_l) for l < i, skipping l = a.
    let mut prod_excl = 1.0_f64;
    for l in 0..a {
        prod_excl *= sin[pair_index(l, b, d)];
    }
    dcol[a] = -sin[m_ab] * prod_excl;
    for i in a + 1..b {
        let m_ib = pair_index(i, b, d);
        dcol[i] = cos[m_ib] * cos[m_ab] * prod_excl;
        prod_excl *= sin[m_ib];
    }
    dcol[b] = cos[m_ab] * prod_excl;
    // Factors between a (exclusive) and b contribute their sines; the loop
    // above already accumulated them into prod_excl in order.
}

/// Canonical angles in (0, pi) reproducing a given correlation matrix.
pub fn corr_unmap(r: &DMatrix<f64>) -> Result<Vec<f64>> {
    let d = r.nrows();
    if r.ncols() != d || d < 2 {
        return Err(DammError::domain("corr_unmap", "need a square matrix with d >= 2"));
    }
    for i in 0..d {
        if (r[(i, i)] - 1.0).abs() > 1e-8 {
            return Err(DammError::domain("corr_unmap", "diagonal must be one"));
        }
        for c in 0..i {
            if (r[(i, c)] - r[(c, i)]).abs() > 1e-8 {
                return Err(DammError::domain("corr_unmap", "matrix must be symmetric"));
            }
        }
    }
    let chol = Cholesky::new(r.clone())
        .ok_or_else(|| DammError::domain("corr_unmap", "matrix is not positive definite"))?;
    let u = chol.l().transpose();
    let mut angles = vec![0.0; n_corr_angles(d)];
    for k in 1..d {
        let mut prod = 1.0_f64;
        for i in 0..k {
            let ratio = if prod.abs() > 1e-300 { u[(i, k)] / prod } else { 0.0 };
            let phi = ratio.clamp(-1.0, 1.0).acos();
            angles[pair_index(i, k, d)] = phi;
            prod *= phi.sin();
        }
    }
    Ok(angles)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::rngs::SmallRng;
    use rand::{RngExt, SeedableRng};

    #[test]
    fn scalar_links_apply_invert_and_differentiate() {
        let links = [
            ScalarLink::Identity,
            ScalarLink::Exp { offset: 2.0 },
            ScalarLink::Bounded { lo: -0.999, hi: 0.999 },
        ];
        let h = 1e-6;
        for link in links {
            for &x in &[-3.0, -0.2, 0.0, 1.4, 5.0] {
                let (v, dv) = link.apply(x);
                let fd = (link.apply(x + h).0 - link.apply(x - h).0) / (2.0 * h);
                assert_abs_diff_eq!(dv, fd, epsilon = 1e-5 * dv.abs().max(1.0));
                assert_abs_diff_eq!(link.invert(v).unwrap(), x, epsilon = 1e-9);
            }
        }
        assert!(ScalarLink::Exp { offset: 2.0 }.invert(1.5).is_err());
        assert!(ScalarLink::Bounded { lo: 0.0, hi: 1.0 }.invert(1.0).is_err());
    }

    #[test]
    fn simplex_map_equal_split_reference() {
        let w = simplex_map(&[0.0, 0.0]);
        assert_abs_diff_eq!(w[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(w[1], 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(w[2], 0.25, epsilon = 1e-15);
    }

    #[test]
    fn simplex_map_saturation_stays_valid() {
        let w = simplex_map(&[-30.0]);
        assert!(w[0] < 1e-12 && w[0] > 0.0);
        assert!(w[1] > 1.0 - 1e-12);
        assert_abs_diff_eq!(w[0] + w[1], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn simplex_map_sums_to_one_and_unmaps() {
        let mut rng = SmallRng::seed_from_u64(11);
        for j in 2..=5 {
            for _ in 0..200 {
                let wt: Vec<f64> = (0..j - 1).map(|_| rng.random_range(-6.0..6.0)).collect();
                let w = simplex_map(&wt);
                assert!(w.iter().all(|wi| *wi > 0.0 && *wi < 1.0));
                let sum: f64 = w.iter().sum();
                assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-12);
                let back = simplex_unmap(&w).unwrap();
                for (a, b) in wt.iter().zip(&back) {
                    assert_abs_diff_eq!(a, b, epsilon = 1e-8);
                }
            }
        }
    }

    #[test]
    fn simplex_jacobian_matches_finite_differences_and_columns_sum_to_zero() {
        let mut rng = SmallRng::seed_from_u64(7);
        let h = 1e-6;
        for j in 2..=5 {
            for _ in 0..50 {
                let wt: Vec<f64> = (0..j - 1).map(|_| rng.random_range(-4.0..4.0)).collect();
                let jac = simplex_jacobian(&wt);
                for col in 0..j - 1 {
                    let mut hi = wt.clone();
                    let mut lo = wt.clone();
                    hi[col] += h;
                    lo[col] -= h;
                    let whi = simplex_map(&hi);
                    let wlo = simplex_map(&lo);
                    for row in 0..j {
                        let fd = (whi[row] - wlo[row]) / (2.0 * h);
                        assert_abs_diff_eq!(jac[(row, col)], fd, epsilon = 1e-7);
                    }
                    let colsum: f64 = (0..j).map(|row| jac[(row, col)]).sum();
                    assert_abs_diff_eq!(colsum, 0.0, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn corr_map_two_dimensional_reference() {
        let r = corr_map(&[std::f64::consts::FRAC_PI_3], 2).unwrap();
        assert_abs_diff_eq!(r[(0, 1)], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(r[(0, 0)], 1.0, epsilon = 0.0);
        // Derivative of the single correlation is -sin(phi); at pi/2 it is -1.
        let jac = corr_jacobian(&[std::f64::consts::FRAC_PI_2], 2).unwrap();
        assert_abs_diff_eq!(jac[(0, 0)], -1.0, epsilon = 1e-12);
    }

    #[test]
    fn corr_map_outputs_valid_correlation_matrices() {
        let mut rng = SmallRng::seed_from_u64(3);
        for d in 2..=4 {
            let p = n_corr_angles(d);
            for _ in 0..100 {
                let angles: Vec<f64> =
                    (0..p).map(|_| rng.random_range(0.2..std::f64::consts::PI - 0.2)).collect();
                let r = corr_map(&angles, d).unwrap();
                for i in 0..d {
                    assert_abs_diff_eq!(r[(i, i)], 1.0, epsilon = 0.0);
                    for c in 0..d {
                        assert!(r[(i, c)].abs() <= 1.0 + 1e-12);
                        assert_abs_diff_eq!(r[(i, c)], r[(c, i)], epsilon = 0.0);
                    }
                }
                assert!(Cholesky::new(r).is_some(), "map produced a non-PD matrix");
            }
        }
    }

    #[test]
    fn corr_jacobian_matches_finite_differences() {
        let mut rng = SmallRng::seed_from_u64(5);
        let h = 1e-6;
        for d in 2..=4 {
            let p = n_corr_angles(d);
            for _ in 0..40 {
                let angles: Vec<f64> =
                    (0..p).map(|_| rng.random_range(0.3..std::f64::consts::PI - 0.3)).collect();
                let jac = corr_jacobian(&angles, d).unwrap();
                let pairs = vechd_pairs(d);
                for m in 0..p {
                    let mut hi = angles.clone();
                    let mut lo = angles.clone();
                    hi[m] += h;
                    lo[m] -= h;
                    let rhi = corr_map(&hi, d).unwrap();
                    let rlo = corr_map(&lo, d).unwrap();
                    for (row, &(r, c)) in pairs.iter().enumerate() {
                        let fd = (rhi[(r, c)] - rlo[(r, c)]) / (2.0 * h);
                        assert_abs_diff_eq!(jac[(row, m)], fd, epsilon = 1e-7);
                    }
                }
            }
        }
    }

    #[test]
    fn corr_unmap_round_trips() {
        let mut rng = SmallRng::seed_from_u64(9);
        for d in 2..=4 {
            let p = n_corr_angles(d);
            for _ in 0..100 {
                let angles: Vec<f64> =
                    (0..p).map(|_| rng.random_range(0.25..std::f64::consts::PI - 0.25)).collect();
                let r = corr_map(&angles, d).unwrap();
                let back = corr_unmap(&r).unwrap();
                for (a, b) in angles.iter().zip(&back) {
                    assert_abs_diff_eq!(a, b, epsilon = 1e-9);
                }
                let r2 = corr_map(&back, d).unwrap();
                for i in 0..d {
                    for c in 0..d {
                        assert_abs_diff_eq!(r[(i, c)], r2[(i, c)], epsilon = 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn corr_unmap_rejects_invalid_input() {
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 1.5, 1.5, 1.0]);
        assert!(corr_unmap(&bad).is_err());
        let ok = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 1.0]);
        assert!(corr_unmap(&ok).is_ok());
    }
}
