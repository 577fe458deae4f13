//! Quasi-Newton minimization with numerical gradients.
//!
//! BFGS on a black-box objective: central finite differences for the
//! gradient, Armijo backtracking for the step, and the usual curvature guard
//! on the inverse-Hessian update. The objective returns plain `f64`; callers
//! encode failures as large finite penalties so the optimizer can back away
//! from bad regions without plumbing errors through the line search.

use nalgebra::{DMatrix, DVector};

#[derive(Clone, Copy, Debug)]
pub struct OptimSettings {
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    /// Relative finite-difference step: h_i = fd_step * max(1, |x_i|).
    pub fd_step: f64,
    /// Objective values at or above this are treated as infeasible when
    /// differencing, so a penalty cliff one probe away cannot blow up the
    /// gradient; must sit below the caller's penalty value.
    pub cliff: f64,
}

impl Default for OptimSettings {
    fn default() -> Self {
        OptimSettings {
            max_iterations: 500,
            gradient_tolerance: 1e-5,
            fd_step: 1e-6,
            cliff: 1e11,
        }
    }
}

#[derive(Clone, Debug)]
pub struct OptimOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub gradient_norm: f64,
    pub converged: bool,
}

/// Central-difference gradient with per-coordinate relative steps.
pub fn central_gradient(
    f: &mut impl FnMut(&[f64]) -> f64,
    x: &[f64],
    fd_step: f64,
) -> Vec<f64> {
    guarded_gradient(f, x, f64::NAN, fd_step, f64::INFINITY)
}

/// Central differences that respect a penalty cliff: a probe landing at or
/// above `cliff` is replaced by the feasible one-sided difference against
/// `fx` (the value at `x`), or by zero when both sides are infeasible.
fn guarded_gradient(
    f: &mut impl FnMut(&[f64]) -> f64,
    x: &[f64],
    fx: f64,
    fd_step: f64,
    cliff: f64,
) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        let h = fd_step * x[i].abs().max(1.0);
        probe[i] = x[i] + h;
        let hi = f(&probe);
        probe[i] = x[i] - h;
        let lo = f(&probe);
        probe[i] = x[i];
        g[i] = match (hi < cliff, lo < cliff) {
            (true, true) => (hi - lo) / (2.0 * h),
            (true, false) => (hi - fx) / h,
            (false, true) => (fx - lo) / h,
            (false, false) => 0.0,
        };
    }
    g
}

/// Minimize `f` starting from `x0`. Convergence means the max-norm of the
/// numerical gradient fell below the tolerance; the best point found is
/// returned either way.
pub fn bfgs(mut f: impl FnMut(&[f64]) -> f64, x0: &[f64], s: &OptimSettings) -> OptimOutcome {
    let n = x0.len();
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        f(x)
    };

    let mut x = DVector::from_column_slice(x0);
    let mut fx = eval(x.as_slice(), &mut evals);
    let mut grad = {
        let mut wrapped = |p: &[f64]| eval(p, &mut evals);
        DVector::from_vec(guarded_gradient(&mut wrapped, x.as_slice(), fx, s.fd_step, s.cliff))
    };
    let mut h_inv = DMatrix::<f64>::identity(n, n);
    let mut iterations = 0;
    let mut converged = grad.amax() <= s.gradient_tolerance;
    // A quasi-Newton matrix built from noisy numerical gradients can sour
    // and stall the line search; one identity reset per stall recovers
    // steepest descent before giving up for good.
    let mut fresh_reset = true;
    // Rescale a fresh (identity) matrix with the first observed curvature
    // so step lengths start in the right order of magnitude.
    let mut scale_next = true;

    while !converged && iterations < s.max_iterations {
        iterations += 1;
        let mut dir = -(&h_inv * &grad);
        let mut slope = dir.dot(&grad);
        if !slope.is_finite() || slope >= 0.0 {
            h_inv = DMatrix::identity(n, n);
            fresh_reset = true;
            scale_next = true;
            dir = -grad.clone();
            slope = dir.dot(&grad);
        }

        // Armijo backtracking. The step scale guards against gigantic
        // steepest-descent proposals right after a reset.
        let mut alpha = (1.0f64).min(10.0 / dir.amax().max(1e-12));
        let mut accepted = None;
        for _ in 0..60 {
            let cand = &x + &dir * alpha;
            let fc = eval(cand.as_slice(), &mut evals);
            if fc.is_finite() && fc <= fx + 1e-4 * alpha * slope {
                accepted = Some((cand, fc));
                break;
            }
            alpha *= 0.5;
        }
        let Some((x_new, f_new)) = accepted else {
            if fresh_reset {
                // No descent along the raw gradient either: a stationary
                // point at this tolerance.
                break;
            }
            h_inv = DMatrix::identity(n, n);
            fresh_reset = true;
            scale_next = true;
            continue;
        };

        let grad_new = {
            let mut wrapped = |p: &[f64]| eval(p, &mut evals);
            DVector::from_vec(guarded_gradient(
                &mut wrapped,
                x_new.as_slice(),
                f_new,
                s.fd_step,
                s.cliff,
            ))
        };
        let step = &x_new - &x;
        let y = &grad_new - &grad;
        let sy = step.dot(&y);
        if sy > 1e-10 * step.norm() * y.norm() {
            if scale_next {
                let yy = y.dot(&y);
                if yy > 0.0 && (sy / yy).is_finite() {
                    h_inv = DMatrix::identity(n, n) * (sy / yy);
                }
                scale_next = false;
            }
            // Standard inverse-Hessian update.
            let rho = 1.0 / sy;
            let hy = &h_inv * &y;
            let yhy = y.dot(&hy);
            // H' = H + (1 + yHy/sy) s s^T / sy - (H y s^T + s y^T H) / sy
            let ss = &step * step.transpose();
            let hys = &hy * step.transpose();
            h_inv += ss * (rho * (1.0 + rho * yhy)) - (&hys + hys.transpose()) * rho;
            fresh_reset = false;
        }

        let f_drop = fx - f_new;
        x = x_new;
        fx = f_new;
        grad = grad_new;
        if grad.amax() <= s.gradient_tolerance {
            converged = true;
        } else if f_drop.abs() <= 1e-12 * (1.0 + fx.abs()) {
            if fresh_reset {
                // Flat progress even along the raw gradient; stop without
                // claiming gradient convergence.
                break;
            }
            h_inv = DMatrix::identity(n, n);
            fresh_reset = true;
            scale_next = true;
        }
    }

    OptimOutcome {
        x: x.as_slice().to_vec(),
        value: fx,
        iterations,
        evaluations: evals,
        gradient_norm: grad.amax(),
        converged,
    }
}
