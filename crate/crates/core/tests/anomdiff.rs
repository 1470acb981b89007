use std::f64::consts::PI;

use mlz_core::anomdiff::{
    build_q, charfun_w, charfun_w_mc, charfun_w_multi, density_w, sample_w, sample_w_given, self_similarity_check,
    TimeGrid,
};
use mlz_core::specfun::{lamperti_sample, mittag_leffler, FracOrder};
use mlz_core::stats::{ks_one_sample, mean_estimate, two_sample_distance, Metric, PermutationSettings};
use mlz_core::streams::stream;
use proptest::prelude::*;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

fn nu(v: f64) -> FracOrder {
    FracOrder::new(v).unwrap()
}

fn grid(t: &[f64]) -> TimeGrid {
    TimeGrid::new(t.to_vec()).unwrap()
}

/// ∫_a^b f over a log-spaced trapezoid grid.
fn log_trapezoid(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let (la, lb) = (a.ln(), b.ln());
    let h = (lb - la) / n as f64;
    (0..=n)
        .map(|i| {
            let x = (la + h * i as f64).exp();
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            w * f(x) * x * h
        })
        .sum()
}

#[test]
fn min_covariance_blocks() {
    let q = build_q(&grid(&[1.0, 2.0, 4.0]), 2);
    assert_eq!((q.n, q.d), (3, 2));
    let expected = [[1.0, 1.0, 1.0], [1.0, 2.0, 2.0], [1.0, 2.0, 4.0]];
    for j in 0..2 {
        for (h, row) in expected.iter().enumerate() {
            for (k, &v) in row.iter().enumerate() {
                assert_eq!(q.q[(j * 3 + h, j * 3 + k)], v);
                assert_eq!(q.q[(j * 3 + h, (1 - j) * 3 + k)], 0.0);
            }
        }
    }
}

#[test]
fn brownian_variance_at_nu_one() {
    let mut rng = stream(70, 0);
    let g = grid(&[0.5, 2.0]);
    let n = 200_000;
    let (mut a, mut b, mut ab) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for _ in 0..n {
        let w = sample_w(nu(1.0), &g, 1, &mut rng);
        assert_eq!(w.mixture_draw, 1.0);
        a.push(w.positions[0] * w.positions[0]);
        b.push(w.positions[1] * w.positions[1]);
        ab.push(w.positions[0] * w.positions[1]);
    }
    for (xs, target) in [(a, 0.5), (b, 2.0), (ab, 0.5)] {
        let e = mean_estimate(&xs);
        assert!((e.mean - target).abs() < 3.0 * e.se, "{e:?} vs {target}");
    }
}

#[test]
fn conditionally_gaussian_in_every_mixture_decile() {
    let mut rng = stream(71, 0);
    let g = grid(&[1.5]);
    let mut rows: Vec<(f64, f64)> = (0..50_000)
        .map(|_| {
            let w = sample_w(nu(0.5), &g, 1, &mut rng);
            (w.mixture_draw, w.positions[0] / (w.mixture_draw * 1.5).sqrt())
        })
        .collect();
    rows.sort_by(|x, y| x.0.total_cmp(&y.0));
    let phi = Normal::new(0.0, 1.0).unwrap();
    for decile in rows.chunks(rows.len() / 10) {
        let z: Vec<f64> = decile.iter().map(|r| r.1).collect();
        let ks = ks_one_sample(&z, |x| phi.cdf(x)).unwrap();
        assert!(ks.p_value > 0.001, "{ks:?}");
    }
}

#[test]
fn charfun_examples() {
    // |u|^2 t / 2 = 1
    let v = charfun_w(nu(0.5), &[1.0, 1.0], 1.0).unwrap();
    assert!((v - 0.427_583_576_155_807).abs() < 1e-12);
    let v = charfun_w(nu(1.0), &[0.3, -0.4, 1.2], 2.0).unwrap();
    assert!((v - (-1.69f64).exp()).abs() < 1e-14);
    assert_eq!(charfun_w(nu(0.3), &[0.0; 3], 5.0).unwrap(), 1.0);
}

#[test]
fn multi_time_reductions() {
    let o = nu(0.6);
    let g = grid(&[0.5, 1.0, 3.0]);
    // only the last time
    let u = [0.0, 0.0, 0.8, 0.0, 0.0, -0.3];
    let single = charfun_w(o, &[0.8, -0.3], 3.0).unwrap();
    assert!((charfun_w_multi(o, &u, &g, 2).unwrap() - single).abs() < 1e-13);
    // an increment W_3 - W_1
    let u = [0.0, -0.7, 0.7];
    let inc = mittag_leffler(o, -(0.5 * 0.49 * 2.0f64).powf(0.6)).unwrap();
    assert!((charfun_w_multi(o, &u, &g, 1).unwrap() - inc).abs() < 1e-13);
}

#[test]
fn multi_time_charfun_matches_monte_carlo() {
    let o = nu(0.6);
    let g = grid(&[0.3, 1.0, 2.2]);
    let u = [0.4, -0.2, 0.5, 0.1, 0.6, -0.3];
    let exact = charfun_w_multi(o, &u, &g, 2).unwrap();
    let e = charfun_w_mc(o, &u, &g, 2, 400_000, &mut stream(72, 0)).unwrap();
    assert!((e.mean - exact).abs() < 3.0 * e.se, "{e:?} vs {exact}");
    // the same phase computed here from raw draws
    let mut rng = stream(72, 1);
    let cos: Vec<f64> = (0..400_000)
        .map(|_| {
            let w = sample_w(o, &g, 2, &mut rng);
            (0..3).map(|h| (0..2).map(|j| u[j * 3 + h] * w.positions[h * 2 + j]).sum::<f64>()).sum::<f64>().cos()
        })
        .collect();
    let e = mean_estimate(&cos);
    assert!((e.mean - exact).abs() < 3.0 * e.se, "{e:?} vs {exact}");
}

#[test]
fn self_similarity() {
    let o = nu(0.4);
    let g = grid(&[0.5, 1.0, 2.0]);
    let u = [0.3, 0.5, -0.4];
    let r = self_similarity_check::<ChaCha8Rng>(o, 3.7, &g, &u, 1, None).unwrap();
    assert!(r.passed && r.analytic_gap < 1e-12);
    let mut rng = stream(73, 0);
    let r = self_similarity_check(o, 3.7, &g, &u, 1, Some((100_000, &mut rng))).unwrap();
    assert!(r.passed, "{r:?}");

    // sample paths: W on the scaled grid against sqrt(a) W on the original
    let a = 3.7;
    let scaled = g.scaled(a).unwrap();
    let squash = |x: f64| x / (1.0 + x.abs());
    let lhs: Vec<f64> = (0..4000).flat_map(|_| sample_w(o, &scaled, 1, &mut rng).positions).map(squash).collect();
    let rhs: Vec<f64> =
        (0..4000).flat_map(|_| sample_w(o, &g, 1, &mut rng).positions).map(|x| squash(a.sqrt() * x)).collect();
    let settings = PermutationSettings { shuffles: 100, max_points: 2000 };
    let t = two_sample_distance(&lhs, &rhs, 3, Metric::Energy, &settings, &mut rng).unwrap();
    assert!(t.p_value > 0.01, "{t:?}");
}

#[test]
fn density_is_normalized_and_matches_the_charfun() {
    let o = nu(0.7);
    let t = 1.3;
    let p1 = |x: f64| density_w(o, &[x], t).unwrap();
    let mass = 2.0 * log_trapezoid(p1, 1e-8, 1e8, 6000);
    assert!((mass - 1.0).abs() < 1e-5, "{mass}");
    let u = 0.9;
    let ft = 2.0 * log_trapezoid(|x| p1(x) * (u * x).cos(), 1e-8, 60.0, 40_000)
        + 2.0 * log_trapezoid(|x| p1(x) * (u * x).cos(), 60.0, 1e4, 200_000);
    let exact = charfun_w(o, &[u], t).unwrap();
    assert!((ft - exact).abs() < 1e-4, "{ft} vs {exact}");
    let p3 = |r: f64| 4.0 * PI * r * r * density_w(o, &[r, 0.0, 0.0], t).unwrap();
    let mass = log_trapezoid(p3, 1e-8, 1e8, 6000);
    assert!((mass - 1.0).abs() < 1e-4, "{mass}");
}

#[test]
fn given_draw_scales_a_brownian_path() {
    let g = grid(&[1.0, 2.0]);
    let mut rng = stream(74, 0);
    let l = lamperti_sample(nu(0.5), &mut rng).value;
    let a = sample_w_given(l, &g, 3, &mut stream(74, 1));
    let b = sample_w_given(1.0, &g, 3, &mut stream(74, 1));
    for (x, y) in a.positions.iter().zip(&b.positions) {
        assert!((x - l.sqrt() * y).abs() < 1e-12 * (1.0 + x.abs()));
    }
}

proptest! {
    #[test]
    fn covariance_is_positive_definite(mut ts in prop::collection::vec(0.01f64..10.0, 1..8), d in 1usize..4) {
        ts.sort_by(f64::total_cmp);
        ts.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
        let q = build_q(&grid(&ts), d).q;
        prop_assert!((q.clone() - q.transpose()).amax() == 0.0);
        prop_assert!(q.cholesky().is_some());
    }

    #[test]
    fn charfun_is_a_bounded_decreasing_function_of_time(
        v in 0.1f64..1.0, u in -3.0f64..3.0, t in 0.0f64..10.0, dt in 0.0f64..10.0,
    ) {
        let a = charfun_w(nu(v), &[u], t).unwrap();
        let b = charfun_w(nu(v), &[u], t + dt).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&a));
        prop_assert!(b <= a + 1e-12);
    }
}
