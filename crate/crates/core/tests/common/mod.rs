//! Independent reference computations shared by the integration tests.
//!
//! Nothing here calls the solvers under test: EL log-ratios come from a
//! direct search over the probability simplex, chi-square probabilities from
//! quadrature of the density, Fréchet means from a scan of the legs.

#![allow(dead_code)]

use openbook_el::Sample;

/// `sum_i log(n p_i)`, `-inf` when some weight vanishes.
pub fn log_lik(p: &[f64]) -> f64 {
    let n = p.len() as f64;
    let mut acc = 0.0;
    for &pi in p {
        if pi <= 0.0 {
            return f64::NEG_INFINITY;
        }
        acc += (n * pi).ln();
    }
    acc
}

fn for_each_composition(d: usize, total: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(k: &mut Vec<usize>, d: usize, left: usize, f: &mut impl FnMut(&[usize])) {
        if k.len() == d {
            f(k);
            return;
        }
        for v in 0..=left {
            k.push(v);
            rec(k, d, left - v, f);
            k.pop();
        }
    }
    rec(&mut Vec::with_capacity(d), d, total, f);
}

/// Maximizes `eval(u)` over `u >= 0, sum u <= 1` in `d` dimensions: a full
/// grid at step `1/coarse`, then local box searches on successively halved
/// steps down to `finest`. `eval` returns `None` outside the feasible set;
/// a feasible value of `-inf` (some weight zero) is a valid starting point.
/// Returns the best value and the point that attains it. `start` competes
/// with the coarse grid as the seed of the local search.
pub fn grid_maximize(
    d: usize,
    coarse: usize,
    finest: f64,
    start: &[f64],
    eval: impl Fn(&[f64]) -> Option<f64>,
) -> Option<(f64, Vec<f64>)> {
    let mut best: Option<(f64, Vec<f64>)> = eval(start).map(|v| (v, start.to_vec()));
    let h = 1.0 / coarse as f64;
    for_each_composition(d, coarse, &mut |k| {
        let u: Vec<f64> = k.iter().map(|&v| v as f64 * h).collect();
        if let Some(v) = eval(&u) {
            if best.as_ref().is_none_or(|(b, _)| v > *b) {
                best = Some((v, u));
            }
        }
    });
    let (mut value, mut u) = best?;
    if d == 0 {
        return Some((value, u));
    }
    let radius: i64 = if d <= 3 { 3 } else { 2 };
    let width = (2 * radius + 1) as usize;
    let mut h = h;
    while h >= finest {
        loop {
            let mut improved: Option<(f64, Vec<f64>)> = None;
            for code in 0..width.pow(d as u32) {
                let mut c = code;
                let mut cand = u.clone();
                for slot in cand.iter_mut() {
                    *slot += ((c % width) as i64 - radius) as f64 * h;
                    c /= width;
                }
                if cand.iter().any(|&x| x < 0.0) || cand.iter().sum::<f64>() > 1.0 {
                    continue;
                }
                if let Some(v) = eval(&cand) {
                    let bar = improved.as_ref().map_or(value, |(b, _)| *b);
                    if v > bar {
                        improved = Some((v, cand));
                    }
                }
            }
            match improved {
                Some((v, cand)) => {
                    value = v;
                    u = cand;
                }
                None => break,
            }
        }
        h *= 0.5;
    }
    Some((value, u))
}

/// Solves the square system `a x = b` by Gaussian elimination with partial
/// pivoting; `None` when it is (numerically) singular.
fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let m = b.len();
    for col in 0..m {
        let piv = (col..m).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in (col + 1)..m {
            let f = a[row][col] / a[col][col];
            for k in col..m {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; m];
    for row in (0..m).rev() {
        let tail: f64 = ((row + 1)..m).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    Some(x)
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Grid search of `max sum log(n p_i)` over `p` in the simplex with
/// `sum p_i row_i = 0` for every row of `eqs`. The `m + 1` pivot weights
/// (sum and equalities) are solved exactly; the others are searched.
/// `None` unless the maximizer also has `sum p_i row_i <= 0` for every row
/// of `ineq`.
fn face_search(n: usize, eqs: &[&[f64]], ineq: &[&[f64]]) -> Option<f64> {
    let m = eqs.len() + 1;
    if m > n {
        return None;
    }
    let row = |r: usize, i: usize| if r == 0 { 1.0 } else { eqs[r - 1][i] };
    // Best-conditioned pivot set.
    let pivots = combinations(n, m)
        .into_iter()
        .filter_map(|e| {
            let a: Vec<Vec<f64>> = (0..m).map(|r| e.iter().map(|&i| row(r, i)).collect()).collect();
            let scale: f64 = a.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max);
            let probe = solve_square(a, (0..m).map(|r| if r == 0 { 1.0 } else { 0.0 }).collect())?;
            let size = probe.iter().map(|v| v.abs()).fold(0.0, f64::max) * scale.max(1e-300);
            Some((size, e))
        })
        .min_by(|x, y| x.0.total_cmp(&y.0))?
        .1;
    let free: Vec<usize> = (0..n).filter(|i| !pivots.contains(i)).collect();
    let weights = |u: &[f64]| -> Option<Vec<f64>> {
        let a: Vec<Vec<f64>> = (0..m).map(|r| pivots.iter().map(|&i| row(r, i)).collect()).collect();
        let b: Vec<f64> = (0..m)
            .map(|r| {
                let target = if r == 0 { 1.0 } else { 0.0 };
                target - u.iter().zip(&free).map(|(ui, &i)| ui * row(r, i)).sum::<f64>()
            })
            .collect();
        let mut x = solve_square(a, b)?;
        if x.iter().any(|&v| v < -1e-12) {
            return None;
        }
        // A pivot that is zero up to rounding is an exact zero weight.
        x.iter_mut().filter(|v| **v < 1e-12).for_each(|v| *v = 0.0);
        let mut p = vec![0.0; n];
        for (ui, &i) in u.iter().zip(&free) {
            p[i] = *ui;
        }
        for (xi, &i) in x.iter().zip(&pivots) {
            p[i] = *xi;
        }
        Some(p)
    };
    // Basic feasible solutions; their centroid is a relative-interior seed.
    let vertices: Vec<Vec<f64>> = combinations(n, m)
        .into_iter()
        .filter_map(|e| {
            let a: Vec<Vec<f64>> = (0..m).map(|r| e.iter().map(|&i| row(r, i)).collect()).collect();
            let x = solve_square(a, (0..m).map(|r| if r == 0 { 1.0 } else { 0.0 }).collect())?;
            if x.iter().any(|&v| v < -1e-12) {
                return None;
            }
            let mut p = vec![0.0; n];
            for (xi, &i) in x.iter().zip(&e) {
                p[i] = xi.max(0.0);
            }
            Some(p)
        })
        .collect();
    if vertices.is_empty() {
        return None;
    }
    let start: Vec<f64> = free
        .iter()
        .map(|&i| vertices.iter().map(|p| p[i]).sum::<f64>() / vertices.len() as f64)
        .collect();
    let coarse = match free.len() {
        0..=3 => 20,
        4 => 14,
        _ => 10,
    };
    let (value, u) = grid_maximize(free.len(), coarse, 1e-6, &start, |u| weights(u).map(|p| log_lik(&p)))?;
    let p = weights(&u)?;
    let ok = ineq.iter().all(|c| {
        let scale = c.iter().map(|v| v.abs()).fold(0.0, f64::max);
        c.iter().zip(&p).map(|(ci, pi)| ci * pi).sum::<f64>() <= 1e-7 * scale
    });
    ok.then_some(value)
}

/// Grid reference for `max sum log(n p_i)` subject to `sum p_i = 1`,
/// `sum p_i e_i = 0` for each `e` in `eqs` and `sum p_i c_i <= 0` for each
/// `c` in `ineq`, over `n` observations.
///
/// The search runs once per subset of inequalities held at equality. On
/// each face it maximizes under the equalities alone and keeps the result
/// only if the maximizer satisfies the remaining inequalities; by concavity
/// the best kept value is the constrained maximum. On each face the pivot
/// weights are solved exactly.
/// `None` when nothing feasible is found; `-inf` when every feasible point
/// found puts zero weight on some observation.
pub fn el_grid(n: usize, eqs: &[Vec<f64>], ineq: &[Vec<f64>]) -> Option<f64> {
    let mut best: Option<f64> = None;
    for mask in 0u32..(1 << ineq.len()) {
        let mut rows: Vec<&[f64]> = eqs.iter().map(|e| e.as_slice()).collect();
        let mut rest: Vec<&[f64]> = Vec::new();
        for (j, c) in ineq.iter().enumerate() {
            if mask & (1 << j) != 0 {
                rows.push(c);
            } else {
                rest.push(c);
            }
        }
        if let Some(v) = face_search(n, &rows, &rest) {
            if best.is_none_or(|b| v > b) {
                best = Some(v);
            }
        }
    }
    best
}

/// Exhaustive search on the step-`h` simplex lattice (no refinement).
pub fn el_grid_exhaustive(eq: Option<&[f64]>, ineq: &[Vec<f64>], h_inv: usize, eq_tol: f64) -> Option<f64> {
    let n = match eq {
        Some(z) => z.len(),
        None => ineq.first().map(|c| c.len())?,
    };
    let h = 1.0 / h_inv as f64;
    let mut best: Option<f64> = None;
    for_each_composition(n - 1, h_inv, &mut |k| {
        let mut p: Vec<f64> = k.iter().map(|&v| v as f64 * h).collect();
        p.push(1.0 - p.iter().sum::<f64>());
        if let Some(z) = eq {
            if z.iter().zip(&p).map(|(zi, pi)| zi * pi).sum::<f64>().abs() > eq_tol {
                return;
            }
        }
        if !ineq
            .iter()
            .all(|c| c.iter().zip(&p).map(|(ci, pi)| ci * pi).sum::<f64>() <= 0.0)
        {
            return;
        }
        let v = log_lik(&p);
        if v.is_finite() && best.is_none_or(|b| v > b) {
            best = Some(v);
        }
    });
    best
}

/// Adaptive Simpson quadrature.
pub fn integrate(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(f: &impl Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    }
    #[allow(clippy::too_many_arguments)]
    fn rec(
        f: &impl Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        m: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1)
            + rec(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1)
    }
    let (fa, fb) = (f(a), f(b));
    let (m, fm, whole) = simpson(f, a, fa, b, fb);
    rec(f, a, fa, b, fb, m, fm, whole, tol, 50)
}

/// `P(chi2_1 <= c)` as `int_0^sqrt(c) 2 phi(u) du`.
pub fn chi2_1_cdf(c: f64) -> f64 {
    if c <= 0.0 {
        return 0.0;
    }
    let phi = |u: f64| 2.0 * (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt();
    integrate(&phi, 0.0, c.sqrt(), 1e-14)
}

/// Upper `alpha` point of chi2_1 by bisection on the quadrature CDF.
pub fn chi2_1_upper_quantile(alpha: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 100.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if 1.0 - chi2_1_cdf(mid) > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Kolmogorov-Smirnov distance between the empirical law of `xs` and `cdf`.
pub fn ks_distance(xs: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in v.iter().enumerate() {
        let f = cdf(x);
        d = d.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs());
    }
    d
}

/// Spider distance written out from the leg coordinates.
pub fn spider_distance(a: (usize, f64), b: (usize, f64)) -> f64 {
    if a.1 == 0.0 || b.1 == 0.0 || a.0 == b.0 {
        (a.1 - b.1).abs()
    } else {
        a.1 + b.1
    }
}

/// Minimizer of the empirical Fréchet function over a scan of each leg at
/// step `h`, as `(leg, x)`; `x = 0` is the centre.
pub fn frechet_scan(points: &[(usize, f64)], legs: usize, h: f64) -> (usize, f64) {
    let reach = points.iter().map(|p| p.1).fold(0.0, f64::max);
    let steps = (reach / h).ceil() as usize + 1;
    let f = |c: (usize, f64)| points.iter().map(|&p| spider_distance(c, p).powi(2)).sum::<f64>();
    let mut best = ((1, 0.0), f((1, 0.0)));
    for leg in 1..=legs {
        for j in 1..=steps {
            let c = (leg, j as f64 * h);
            let v = f(c);
            if v < best.1 {
                best = (c, v);
            }
        }
    }
    best.0
}

/// Leg coordinates of a spider sample.
pub fn spider_coords(s: &Sample) -> Vec<(usize, f64)> {
    s.points()
        .iter()
        .map(|p| (p.page().map_or(0, |k| k.number()), p.normal()))
        .collect()
}

/// Median of a slice (mean of the middle pair for even length).
pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Grid reference for the book EL at `x`, written from the defining
/// constraints: off the spine, the folded normal mean on `x`'s page equals
/// `x`'s normal; on the spine, every page's folded normal mean is `<= 0`
/// (plus the tangential mean when `p = 2`). Handles spiders and, on the
/// spine, books with `p = 2`.
pub fn book_el_grid(s: &Sample, x: &openbook_el::BookPoint) -> Option<f64> {
    let shape = s.shape();
    match x.page() {
        Some(k) => {
            assert_eq!(shape.dim(), 1, "page targets only for spiders");
            let z: Vec<f64> = s.points().iter().map(|p| p.signed_normal(k) - x.normal()).collect();
            el_grid(s.len(), &[z], &[])
        }
        None => {
            assert!(shape.dim() <= 2);
            let ineq: Vec<Vec<f64>> = shape
                .page_iter()
                .map(|j| s.points().iter().map(|p| p.signed_normal(j)).collect())
                .collect();
            if shape.dim() == 2 {
                let z: Vec<f64> = s.points().iter().map(|p| p.tangential()[0] - x.tangential()[0]).collect();
                el_grid(s.len(), &[z], &ineq)
            } else {
                el_grid(s.len(), &[], &ineq)
            }
        }
    }
}
