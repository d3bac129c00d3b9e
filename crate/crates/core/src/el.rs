//! Empirical likelihood for a multivariate mean.
//!
//! The profile log-ratio at a target `t` is
//!
//! ```text
//! log R(t) = max sum_i log(n p_i)   s.t.  p_i >= 0, sum p_i = 1, sum p_i (x_i - t) = 0.
//! ```
//!
//! It is computed through the Lagrangian dual: with `z_i = x_i - t`, the
//! optimal weights are `p_i = 1 / (n (1 + lambda' z_i))` where `lambda`
//! minimizes the convex function `-sum_i log*(1 + lambda' z_i)`. `log*` is the
//! logarithm above `1/n` and its second-order Taylor extension below, which
//! makes the dual finite everywhere without changing its minimizer.
//!
//! Data are whitened first. Directions in which the data have (numerically)
//! no spread are projected out; the target must agree with the data mean in
//! those directions or the problem is infeasible.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ElError {
    #[error("empirical likelihood needs at least one observation")]
    EmptyData,
    #[error("observation {index} has length {found}, target has length {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("extra constraint {index} has {found} values for {expected} observations")]
    ConstraintLength {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("inputs must be finite")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElStatus {
    /// Target in the relative interior of the convex hull; weights are the optimum.
    Interior,
    /// Target on the hull boundary. `log_ratio` is `-inf`; the weights are the
    /// limit of the optimal weights and sit on the supporting face.
    Boundary,
    /// Target outside the hull.
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElResult {
    #[serde(with = "crate::json")]
    pub log_ratio: f64,
    #[serde(with = "crate::json::opt_vec")]
    pub weights: Option<Vec<f64>>,
    #[serde(with = "crate::json::vec")]
    pub multiplier: Vec<f64>,
    pub status: ElStatus,
    pub iterations: usize,
}

impl ElResult {
    /// `-2 log R`.
    pub fn statistic(&self) -> f64 {
        0.0 - 2.0 * self.log_ratio
    }

    pub fn is_feasible(&self) -> bool {
        self.status == ElStatus::Interior
    }

    pub(crate) fn uniform(n: usize, q: usize) -> Self {
        ElResult {
            log_ratio: 0.0,
            weights: Some(vec![1.0 / n as f64; n]),
            multiplier: vec![0.0; q],
            status: ElStatus::Interior,
            iterations: 0,
        }
    }

    pub(crate) fn infeasible(q: usize, iterations: usize) -> Self {
        ElResult {
            log_ratio: f64::NEG_INFINITY,
            weights: None,
            multiplier: vec![f64::NAN; q],
            status: ElStatus::Infeasible,
            iterations,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElOptions {
    /// Stop when the weighted moment residual `|sum p_i z_i|` falls below
    /// this fraction of the largest `|z_i|`.
    pub grad_tol: f64,
    pub max_iter: usize,
    /// Whitened multiplier norm beyond which the target is declared outside the hull.
    pub divergence: f64,
    /// Relative singular-value cutoff for degenerate directions.
    pub rank_tol: f64,
    /// Allowed mismatch between target and data mean in degenerate directions,
    /// relative to the data scale.
    pub degenerate_tol: f64,
}

impl Default for ElOptions {
    fn default() -> Self {
        ElOptions {
            grad_tol: 1e-10,
            max_iter: 100,
            divergence: 1e8,
            rank_tol: 1e-12,
            degenerate_tol: 1e-10,
        }
    }
}

fn validate(data: &[Vec<f64>], target: &[f64]) -> Result<(), ElError> {
    if data.is_empty() {
        return Err(ElError::EmptyData);
    }
    let q = target.len();
    for (index, x) in data.iter().enumerate() {
        if x.len() != q {
            return Err(ElError::DimensionMismatch {
                index,
                expected: q,
                found: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(ElError::NonFinite);
        }
    }
    if target.iter().any(|v| !v.is_finite()) {
        return Err(ElError::NonFinite);
    }
    Ok(())
}

/// Profile EL log-ratio of the mean of `data` at `target`.
pub fn el_log_ratio(data: &[Vec<f64>], target: &[f64], opts: &ElOptions) -> Result<ElResult, ElError> {
    validate(data, target)?;
    Ok(solve(data, target, opts, 0))
}

/// EL log-ratio with additional scalar moment constraints.
///
/// `extra[j][i]` is the value of the `j`-th functional at observation `i`;
/// each is required to have weighted mean zero. Equivalent to
/// [`el_log_ratio`] on the data augmented with those values and a target
/// padded with zeros.
pub fn el_log_ratio_with_equality(
    data: &[Vec<f64>],
    target: &[f64],
    extra: &[Vec<f64>],
    opts: &ElOptions,
) -> Result<ElResult, ElError> {
    validate(data, target)?;
    let n = data.len();
    for (index, f) in extra.iter().enumerate() {
        if f.len() != n {
            return Err(ElError::ConstraintLength {
                index,
                expected: n,
                found: f.len(),
            });
        }
        if f.iter().any(|v| !v.is_finite()) {
            return Err(ElError::NonFinite);
        }
    }
    let augmented: Vec<Vec<f64>> = data
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let mut row = x.clone();
            row.extend(extra.iter().map(|f| f[i]));
            row
        })
        .collect();
    let mut t = target.to_vec();
    t.resize(target.len() + extra.len(), 0.0);
    Ok(solve(&augmented, &t, opts, 0))
}

/// One-dimensional fast path. Same contract as [`el_log_ratio`] with `q = 1`.
pub fn el_log_ratio_1d(data: &[f64], target: f64, opts: &ElOptions) -> Result<ElResult, ElError> {
    if data.is_empty() {
        return Err(ElError::EmptyData);
    }
    if !target.is_finite() || data.iter().any(|v| !v.is_finite()) {
        return Err(ElError::NonFinite);
    }
    Ok(solve_1d(data, target, opts))
}

fn solve(data: &[Vec<f64>], target: &[f64], opts: &ElOptions, depth: usize) -> ElResult {
    let n = data.len();
    let q = target.len();
    if q == 0 {
        return ElResult::uniform(n, 0);
    }
    if q == 1 {
        let flat: Vec<f64> = data.iter().map(|x| x[0]).collect();
        return solve_1d(&flat, target[0], opts);
    }

    // Whitening basis from the centred second moments.
    let nf = n as f64;
    let mean: DVector<f64> = data
        .iter()
        .fold(DVector::zeros(q), |acc, x| acc + DVector::from_column_slice(x))
        / nf;
    let mut cov = DMatrix::zeros(q, q);
    for x in data {
        let d = DVector::from_column_slice(x) - &mean;
        cov += &d * d.transpose();
    }
    cov /= nf;
    let eig = SymmetricEigen::new(cov);
    let sv: Vec<f64> = eig.eigenvalues.iter().map(|&e| e.max(0.0).sqrt()).collect();
    let sv_max = sv.iter().cloned().fold(0.0, f64::max);
    let scale = data
        .iter()
        .flat_map(|x| x.iter())
        .chain(target.iter())
        .fold(0.0_f64, |a, v| a.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let t = DVector::from_column_slice(target);
    let offset = &t - &mean;
    let mut keep = Vec::new();
    for (j, &s) in sv.iter().enumerate() {
        let u = eig.eigenvectors.column(j);
        if s <= opts.rank_tol * sv_max || s <= 1e-14 * scale {
            if u.dot(&offset).abs() > opts.degenerate_tol * scale {
                return ElResult::infeasible(q, 0);
            }
        } else {
            keep.push(j);
        }
    }
    if keep.is_empty() {
        return ElResult::uniform(n, q);
    }
    let r = keep.len();
    // Columns of `map` send a whitened multiplier back to original coordinates.
    let mut map = DMatrix::zeros(q, r);
    for (c, &j) in keep.iter().enumerate() {
        map.set_column(c, &(eig.eigenvectors.column(j) / sv[j]));
    }
    let z: Vec<DVector<f64>> = data
        .iter()
        .map(|x| map.transpose() * (DVector::from_column_slice(x) - &t))
        .collect();

    match newton(&z, opts) {
        NewtonOutcome::Converged { lambda, iterations } => {
            let w: Vec<f64> = z.iter().map(|zi| 1.0 + lambda.dot(zi)).collect();
            finish(&w, (map * lambda).as_slice().to_vec(), iterations)
        }
        NewtonOutcome::Diverged { lambda, iterations } => {
            face_limit(data, target, &z, &lambda, opts, depth, iterations)
        }
    }
}

enum NewtonOutcome {
    Converged { lambda: DVector<f64>, iterations: usize },
    Diverged { lambda: DVector<f64>, iterations: usize },
}

/// `log*` and its first two derivatives, with the switch at `eps = 1/n`.
#[inline]
fn log_star(w: f64, eps: f64) -> (f64, f64, f64) {
    if w >= eps {
        (w.ln(), 1.0 / w, -1.0 / (w * w))
    } else {
        let r = w / eps;
        (
            eps.ln() - 1.5 + 2.0 * r - 0.5 * r * r,
            (2.0 - r) / eps,
            -1.0 / (eps * eps),
        )
    }
}

fn dual_objective(z: &[DVector<f64>], lambda: &DVector<f64>, eps: f64) -> f64 {
    -z.iter()
        .map(|zi| log_star(1.0 + lambda.dot(zi), eps).0)
        .sum::<f64>()
}

fn newton(z: &[DVector<f64>], opts: &ElOptions) -> NewtonOutcome {
    let n = z.len() as f64;
    let r = z[0].len();
    let eps = 1.0 / n;
    let zmax = z.iter().map(|zi| zi.norm()).fold(0.0, f64::max);
    let tol = opts.grad_tol * zmax.max(f64::MIN_POSITIVE);
    let mut lambda = DVector::zeros(r);
    let mut f = dual_objective(z, &lambda, eps);
    // (in region, residual, largest dual factor) at the last iterate.
    let mut last = (false, f64::INFINITY, f64::INFINITY);
    let mut stalled = false;
    for it in 1..=opts.max_iter {
        let mut grad = DVector::zeros(r);
        let mut hess = DMatrix::zeros(r, r);
        let mut in_region = true;
        let mut wmax = 0.0f64;
        for zi in z {
            let w = 1.0 + lambda.dot(zi);
            in_region &= w >= eps;
            wmax = wmax.max(w);
            let (_, d1, d2) = log_star(w, eps);
            grad -= zi * d1;
            hess -= zi * zi.transpose() * d2;
        }
        let resid = grad.norm() / n;
        last = (in_region, resid, wmax);
        if in_region && resid <= tol {
            return NewtonOutcome::Converged { lambda, iterations: it };
        }
        let step = match hess.cholesky() {
            Some(ch) => -ch.solve(&grad),
            None => -grad.clone(),
        };
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let cand = &lambda + &step * t;
            let fc = dual_objective(z, &cand, eps);
            // Near the optimum a full step changes f by rounding only.
            if fc <= f + 1e-13 * (1.0 + f.abs()) {
                stalled = (&step * t).norm() <= 1e-8 * (1.0 + lambda.norm());
                lambda = cand;
                f = fc;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // No descent left: accept only if the residual is at rounding level.
            return if in_region && resid <= 1e3 * tol {
                NewtonOutcome::Converged { lambda, iterations: it }
            } else {
                NewtonOutcome::Diverged { lambda, iterations: it }
            };
        }
        if lambda.norm() > opts.divergence {
            return NewtonOutcome::Diverged { lambda, iterations: it };
        }
    }
    // A residual that keeps shrinking while lambda grows is a boundary
    // target, not convergence.
    if stalled && last.0 && last.1 <= 1e3 * tol && last.2 <= 1e6 {
        return NewtonOutcome::Converged {
            lambda,
            iterations: opts.max_iter,
        };
    }
    NewtonOutcome::Diverged {
        lambda,
        iterations: opts.max_iter,
    }
}

/// Weights and log-ratio from the dual factors `w_i = 1 + lambda' z_i`.
fn finish(w: &[f64], multiplier: Vec<f64>, iterations: usize) -> ElResult {
    let n = w.len() as f64;
    let mut p: Vec<f64> = w.iter().map(|wi| 1.0 / (n * wi)).collect();
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|pi| *pi /= total);
    let log_ratio = p.iter().map(|pi| (n * pi).ln()).sum::<f64>().min(0.0);
    ElResult {
        log_ratio,
        weights: Some(p),
        multiplier,
        status: ElStatus::Interior,
        iterations,
    }
}

/// The multiplier diverged. If the divergence direction exposes a face of
/// the hull containing the target, the target sits on the boundary and the
/// limiting weights are the EL weights of that face.
fn face_limit(
    data: &[Vec<f64>],
    target: &[f64],
    z: &[DVector<f64>],
    lambda: &DVector<f64>,
    opts: &ElOptions,
    depth: usize,
    iterations: usize,
) -> ElResult {
    let q = target.len();
    let norm = lambda.norm();
    if norm == 0.0 || depth >= q {
        return ElResult::infeasible(q, iterations);
    }
    let dir = lambda / norm;
    let s: Vec<f64> = z.iter().map(|zi| dir.dot(zi)).collect();
    let smax = s.iter().cloned().fold(0.0, f64::max);
    let tol = 1e-6 * smax.max(f64::MIN_POSITIVE);
    if s.iter().any(|&si| si < -tol) {
        return ElResult::infeasible(q, iterations);
    }
    let face: Vec<usize> = (0..z.len()).filter(|&i| s[i].abs() <= tol).collect();
    if face.is_empty() || face.len() == z.len() {
        return ElResult::infeasible(q, iterations);
    }
    let sub: Vec<Vec<f64>> = face.iter().map(|&i| data[i].clone()).collect();
    let inner = solve(&sub, target, opts, depth + 1);
    match inner.weights {
        Some(wf) if inner.status != ElStatus::Infeasible => {
            let mut weights = vec![0.0; z.len()];
            for (&i, w) in face.iter().zip(wf) {
                weights[i] = w;
            }
            ElResult {
                log_ratio: f64::NEG_INFINITY,
                weights: Some(weights),
                multiplier: vec![f64::NAN; q],
                status: ElStatus::Boundary,
                iterations: iterations + inner.iterations,
            }
        }
        _ => ElResult::infeasible(q, iterations),
    }
}

/// Scalar solver. The optimal multiplier lies in the bracket where every
/// `w_i >= 1/n` (equivalently `p_i <= 1`); on it `log* = log`, and the dual
/// derivative is monotone, so a bracketed Newton iteration always converges.
fn solve_1d(data: &[f64], target: f64, opts: &ElOptions) -> ElResult {
    let n = data.len();
    let nf = n as f64;
    let (mut lo_x, mut hi_x) = (f64::INFINITY, f64::NEG_INFINITY);
    for &x in data {
        lo_x = lo_x.min(x);
        hi_x = hi_x.max(x);
    }
    if target < lo_x || target > hi_x {
        return ElResult::infeasible(1, 0);
    }
    if lo_x == hi_x {
        return ElResult::uniform(n, 1);
    }
    if target == lo_x || target == hi_x {
        let ties = data.iter().filter(|&&x| x == target).count() as f64;
        return ElResult {
            log_ratio: f64::NEG_INFINITY,
            weights: Some(
                data.iter()
                    .map(|&x| if x == target { 1.0 / ties } else { 0.0 })
                    .collect(),
            ),
            multiplier: vec![f64::NAN],
            status: ElStatus::Boundary,
            iterations: 0,
        };
    }
    // Scale-free: work with z_i / max|z_i|.
    let zscale = (hi_x - target).max(target - lo_x);
    let z: Vec<f64> = data.iter().map(|&x| (x - target) / zscale).collect();
    let (zmin, zmax) = ((lo_x - target) / zscale, (hi_x - target) / zscale);
    let eps = 1.0 / nf;
    // w_i >= eps  <=>  lambda in [(eps - 1)/zmax, (eps - 1)/zmin].
    let mut lo = (eps - 1.0) / zmax;
    let mut hi = (eps - 1.0) / zmin;
    // g(lambda) = sum z_i / w_i, decreasing in lambda; root is the optimum.
    let eval = |lambda: f64| -> (f64, f64) {
        let mut g = 0.0;
        let mut h = 0.0;
        for &zi in &z {
            let inv = 1.0 / (1.0 + lambda * zi);
            g += zi * inv;
            h -= zi * zi * inv * inv;
        }
        (g, h)
    };
    let mut lambda = 0.0;
    let mut iterations = 0;
    let tol = opts.grad_tol * nf;
    for it in 1..=opts.max_iter {
        iterations = it;
        let (g, h) = eval(lambda);
        if g > 0.0 {
            lo = lambda;
        } else if g < 0.0 {
            hi = lambda;
        } else {
            break;
        }
        let newton = lambda - g / h;
        if g.abs() <= tol {
            // Polish only; never bisect away from a converged point.
            if newton >= lo && newton <= hi {
                lambda = newton;
            }
            break;
        }
        lambda = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= 1e-15 * lambda.abs().max(1.0) {
            break;
        }
    }
    let w: Vec<f64> = z.iter().map(|&zi| 1.0 + lambda * zi).collect();
    finish(&w, vec![lambda / zscale], iterations)
}
