mod common;

use approx::assert_abs_diff_eq;
use openbook_el::{el_log_ratio, el_log_ratio_1d, ElOptions, ElStatus};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn opts() -> ElOptions {
    ElOptions::default()
}

fn spread(xs: &[f64]) -> (f64, f64) {
    let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

fn scalar_data(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0f64..5.0, 3..max_len).prop_filter("needs spread", |xs| {
        let (lo, hi) = spread(xs);
        hi - lo > 1e-3
    })
}

fn planar_data() -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 2), 4..25)
}

/// A strictly interior point: a convex combination with all weights positive.
fn interior(data: &[Vec<f64>], w: &[f64]) -> Vec<f64> {
    let total: f64 = w.iter().sum();
    let mut t = vec![0.0; data[0].len()];
    for (x, wi) in data.iter().zip(w) {
        for (tj, xj) in t.iter_mut().zip(x) {
            *tj += wi / total * xj;
        }
    }
    t
}

#[test]
fn two_point_closed_forms() {
    let r = el_log_ratio_1d(&[-1.0, 1.0], 0.5, &opts()).unwrap();
    let w = r.weights.unwrap();
    assert_abs_diff_eq!(w[0], 0.25, epsilon = 1e-12);
    assert_abs_diff_eq!(w[1], 0.75, epsilon = 1e-12);
    assert_abs_diff_eq!(r.log_ratio, -0.287682, epsilon = 1e-6);
    let out = el_log_ratio_1d(&[-1.0, 1.0], 1.5, &opts()).unwrap();
    assert_eq!(out.status, ElStatus::Infeasible);
    assert_eq!(out.log_ratio, f64::NEG_INFINITY);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn scalar_solution_invariants(xs in scalar_data(40), u in 0.01f64..0.99) {
        let (lo, hi) = spread(&xs);
        let t = lo + u * (hi - lo);
        let r = el_log_ratio_1d(&xs, t, &opts()).unwrap();
        prop_assume!(r.status == ElStatus::Interior);
        let p = r.weights.unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-10);
        prop_assert!(p.iter().all(|&pi| pi >= 0.0));
        let scale = xs.iter().map(|x| x.abs()).fold(0.0, f64::max);
        let resid: f64 = p.iter().zip(&xs).map(|(pi, x)| pi * (x - t)).sum();
        prop_assert!(resid.abs() <= 1e-8 * scale, "residual {resid}");
        let direct: f64 = p.iter().map(|pi| (xs.len() as f64 * pi).ln()).sum();
        prop_assert!((direct - r.log_ratio).abs() <= 1e-9 * direct.abs().max(1.0));
        prop_assert!(r.log_ratio <= 0.0);
    }

    #[test]
    fn outside_the_hull_is_infeasible(xs in scalar_data(20), d in 0.001f64..3.0) {
        let (_, hi) = spread(&xs);
        let r = el_log_ratio_1d(&xs, hi + d, &opts()).unwrap();
        prop_assert_eq!(r.status, ElStatus::Infeasible);
        prop_assert_eq!(r.log_ratio, f64::NEG_INFINITY);
    }

    #[test]
    fn zero_at_the_sample_mean(xs in scalar_data(40)) {
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let r = el_log_ratio_1d(&xs, mean, &opts()).unwrap();
        prop_assert!(r.log_ratio.abs() <= 1e-10);
        let n = xs.len() as f64;
        prop_assert!(r.weights.unwrap().iter().all(|&p| (p - 1.0 / n).abs() <= 1e-9));
    }

    #[test]
    fn scalar_midpoint_concavity(xs in scalar_data(30), u in 0.02f64..0.98, v in 0.02f64..0.98) {
        let (lo, hi) = spread(&xs);
        let (a, b) = (lo + u * (hi - lo), lo + v * (hi - lo));
        let f = |t: f64| el_log_ratio_1d(&xs, t, &opts()).unwrap().log_ratio;
        let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
        prop_assume!(fa.is_finite() && fb.is_finite());
        prop_assert!(fm >= 0.5 * (fa + fb) - 1e-9, "f(mid) {fm} < {}", 0.5 * (fa + fb));
    }

    #[test]
    fn planar_midpoint_concavity(
        data in planar_data(),
        w1 in prop::collection::vec(0.05f64..1.0, 25),
        w2 in prop::collection::vec(0.05f64..1.0, 25),
    ) {
        let n = data.len();
        let a = interior(&data, &w1[..n]);
        let b = interior(&data, &w2[..n]);
        let m: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
        let f = |t: &[f64]| el_log_ratio(&data, t, &opts()).unwrap();
        let (ra, rb, rm) = (f(&a), f(&b), f(&m));
        prop_assume!(ra.is_feasible() && rb.is_feasible() && rm.is_feasible());
        prop_assert!(rm.log_ratio >= 0.5 * (ra.log_ratio + rb.log_ratio) - 1e-9);
    }

    #[test]
    fn planar_kkt_residual(data in planar_data(), w in prop::collection::vec(0.05f64..1.0, 25)) {
        let t = interior(&data, &w[..data.len()]);
        let r = el_log_ratio(&data, &t, &opts()).unwrap();
        prop_assume!(r.status == ElStatus::Interior);
        let p = r.weights.unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-10);
        let scale = data.iter().map(|x| x.iter().map(|v| v * v).sum::<f64>().sqrt()).fold(0.0, f64::max);
        let mut resid = [0.0; 2];
        for (x, pi) in data.iter().zip(&p) {
            for j in 0..2 {
                resid[j] += pi * (x[j] - t[j]);
            }
        }
        let norm = (resid[0] * resid[0] + resid[1] * resid[1]).sqrt();
        prop_assert!(norm <= 1e-8 * scale, "residual {norm}");
        prop_assert!(r.log_ratio <= 0.0);
    }

    #[test]
    fn monotone_along_rays(data in planar_data(), angle in 0.0f64..std::f64::consts::TAU, t in 0.0f64..1.0, s in 0.0f64..1.0) {
        let (t, s) = if t <= s { (t, s) } else { (s, t) };
        let n = data.len() as f64;
        let mean = [
            data.iter().map(|x| x[0]).sum::<f64>() / n,
            data.iter().map(|x| x[1]).sum::<f64>() / n,
        ];
        let v = [angle.cos(), angle.sin()];
        let at = |c: f64| el_log_ratio(&data, &[mean[0] + c * v[0], mean[1] + c * v[1]], &opts()).unwrap();
        let (rt, rs) = (at(t), at(s));
        prop_assume!(rt.is_feasible() && rs.is_feasible());
        prop_assert!(rt.log_ratio >= rs.log_ratio - 1e-9);
    }

    #[test]
    fn agrees_with_simplex_grid(xs in prop::collection::vec(-2.0f64..2.0, 2..=6), u in 0.05f64..0.95) {
        let (lo, hi) = spread(&xs);
        prop_assume!(hi - lo > 0.05);
        let t = lo + u * (hi - lo);
        let r = el_log_ratio_1d(&xs, t, &opts()).unwrap();
        let z: Vec<f64> = xs.iter().map(|x| x - t).collect();
        let oracle = common::el_grid(z.len(), &[z], &[]).unwrap();
        prop_assert!((r.log_ratio - oracle).abs() <= 1e-3, "solver {} grid {}", r.log_ratio, oracle);
    }
}

#[test]
fn grid_reference_matches_plain_lattice() {
    // The refined search must never do worse than the plain step-1e-3 lattice.
    let xs = [0.3, -1.1, 0.8];
    let ineq = vec![xs.to_vec()];
    let refined = common::el_grid(3, &[], &ineq).unwrap();
    let lattice = common::el_grid_exhaustive(None, &ineq, 1000, 0.0).unwrap();
    assert!(refined >= lattice - 1e-12);
    assert!(refined - lattice <= 1e-3);
}

#[test]
fn statistic_diverges_under_a_fixed_alternative() {
    let mut medians = Vec::new();
    for n in [50usize, 200, 800] {
        let stats: Vec<f64> = (0..200u64)
            .map(|r| {
                let mut rng = ChaCha8Rng::seed_from_u64(1000 * n as u64 + r);
                let xs: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
                el_log_ratio_1d(&xs, 0.5, &opts()).unwrap().statistic()
            })
            .collect();
        medians.push(common::median(&stats));
    }
    assert!(medians[0] < medians[1] && medians[1] < medians[2], "{medians:?}");
}
