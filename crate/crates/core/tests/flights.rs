use mlz_core::error::Error;
use mlz_core::flights::{
    duhamel_model1, efpp_pmf, efpp_tail, msd_markov, msd_model1, scattering_average, simulate_flight_model1,
    simulate_flight_model1_given, simulate_flight_model2, simulate_flight_model2_given, simulate_markov_flight,
    small_interval_jump_prob, uniform_sphere_direction, FlightModel, Model2Repr, SimParams, StateSampler,
};
use mlz_core::specfun::{lamperti_sample, mittag_leffler, FracOrder};
use mlz_core::stats::{chi_square_gof, ks_one_sample, mean_estimate, two_sample_distance, Metric, PermutationSettings};
use mlz_core::streams::stream;
use proptest::prelude::*;
use statrs::function::gamma::gamma;

fn nu(v: f64) -> FracOrder {
    FracOrder::new(v).unwrap()
}

fn params(v: f64, lambda: f64, c: f64, d: usize, t: f64) -> SimParams {
    SimParams::new(nu(v), lambda, c, d, t).unwrap()
}

const E3: [f64; 3] = [0.0, 0.0, 1.0];

fn within_3se(e: mlz_core::stats::Estimate, target: f64) -> bool {
    (e.mean - target).abs() < 3.0 * e.se.max(1e-15)
}

#[test]
fn sphere_directions() {
    let mut rng = stream(41, 0);
    let signs: Vec<f64> = (0..100_000).map(|_| uniform_sphere_direction(1, &mut rng)[0]).collect();
    assert!(signs.iter().all(|s| s.abs() == 1.0));
    assert!(within_3se(mean_estimate(&signs), 0.0));
    let n = 1_000_000;
    let vs: Vec<Vec<f64>> = (0..n).map(|_| uniform_sphere_direction(3, &mut rng)).collect();
    for k in 0..3 {
        assert!(within_3se(mean_estimate(&vs.iter().map(|v| v[k]).collect::<Vec<_>>()), 0.0));
    }
    assert!(within_3se(mean_estimate(&vs.iter().map(|v| v[0] * v[0]).collect::<Vec<_>>()), 1.0 / 3.0));
}

#[test]
fn markov_flight_moments() {
    let mut rng = stream(42, 0);
    let (lambda, c, t) = (2.0, 1.5, 1.0);
    let p = params(1.0, lambda, c, 3, t);
    let n = 100_000;
    let mut counts = Vec::with_capacity(n);
    let mut sq = Vec::with_capacity(n);
    let mut cosines = Vec::with_capacity(n);
    for _ in 0..n {
        let path = simulate_markov_flight(&p, &[0.0; 3], &E3, &mut rng).unwrap();
        counts.push(path.n_events() as f64);
        let x = path.position(t).unwrap();
        sq.push(x.iter().map(|v| v * v).sum::<f64>());
        cosines.push(path.direction(t).unwrap()[2]);
    }
    assert!(within_3se(mean_estimate(&counts), lambda * t));
    let msd = 2.0 * c * c / (lambda * lambda) * (lambda * t - 1.0 + (-lambda * t).exp());
    assert!((msd - msd_markov(lambda, c, t)).abs() < 1e-14);
    assert!(within_3se(mean_estimate(&sq), msd));
    assert!(within_3se(mean_estimate(&cosines), (-lambda * t).exp()));
}

#[test]
fn model1_at_nu_one_is_the_markov_flight() {
    let p = params(1.0, 1.3, 1.0, 3, 2.0);
    for seed in 0..20 {
        let a = simulate_flight_model1(&p, &[0.0; 3], &E3, &mut stream(43, seed)).unwrap();
        let b = simulate_markov_flight(&p, &[0.0; 3], &E3, &mut stream(43, seed)).unwrap();
        assert_eq!(a.times, b.times);
        assert_eq!(a.positions, b.positions);
    }
}

#[test]
fn model1_joint_survival_of_two_flight_times() {
    // P(J1 > 1, J2 > 1) = M_nu(-(lambda (1 + 1))^nu); the horizon is long
    // enough that two events are observed unless both gaps are huge
    let mut rng = stream(44, 0);
    let n = 1_000_000;
    let survived: Vec<f64> = (0..n)
        .map(|_| {
            let l = lamperti_sample(nu(0.5), &mut rng).value;
            let p = params(0.5, 1.0, 1.0, 1, 2.0 + 60.0 / l);
            // a path that hits the event cap has rate l >= 1e6, so J1 > 1 has
            // probability below e^{-1e6}
            let Ok(path) = simulate_flight_model1_given(&p, l, &[0.0], &[1.0], &mut rng) else {
                return 0.0;
            };
            let ts = path.event_times();
            let j1 = ts.first().copied().unwrap_or(f64::INFINITY);
            let j2 = if ts.len() > 1 { ts[1] - ts[0] } else { f64::INFINITY };
            f64::from(u8::from(j1 > 1.0 && j2 > 1.0))
        })
        .collect();
    let target = mittag_leffler(nu(0.5), -(2f64).sqrt()).unwrap();
    let e = mean_estimate(&survived);
    assert!(within_3se(e, target), "{e:?} vs {target}");
}

#[test]
fn model1_counts_follow_the_pmf() {
    let mut rng = stream(45, 0);
    let p = params(0.5, 1.0, 1.0, 2, 1.0);
    let mut obs = [0u64; 4];
    for _ in 0..100_000 {
        let k = match simulate_flight_model1(&p, &[0.0; 2], &[1.0, 0.0], &mut rng) {
            Ok(path) => path.counting().count(1.0).min(3),
            Err(Error::EventCap { .. }) => 3,
            Err(e) => panic!("{e}"),
        };
        obs[k] += 1;
    }
    let mut probs: Vec<f64> = (0..3).map(|k| efpp_pmf(nu(0.5), 1.0, 1.0, k).unwrap()).collect();
    probs.push(efpp_tail(nu(0.5), 1.0, 1.0, 2).unwrap());
    assert!(chi_square_gof(&obs, &probs).unwrap().p_value > 0.01);
}

#[test]
fn model2_at_nu_one_is_markov() {
    let p = params(1.0, 1.0, 2.0, 3, 1.5);
    for repr in [Model2Repr::TimeScaled, Model2Repr::SpeedScaled] {
        let a = simulate_flight_model2(&p, &[0.0; 3], &E3, &mut stream(46, 1), repr).unwrap();
        let b = simulate_markov_flight(&p, &[0.0; 3], &E3, &mut stream(46, 1)).unwrap();
        assert_eq!(a.position(1.5).unwrap(), b.position(1.5).unwrap());
    }
}

#[test]
fn model2_representations_agree() {
    // both sides condition on the same bounded mixture draw so the time-scaled
    // side stays under the event cap
    let p = params(0.5, 1.0, 1.0, 3, 1.0);
    let sample = |repr: Model2Repr, seed: u64| -> Vec<f64> {
        let mut rng = stream(47, seed);
        (0..20_000)
            .flat_map(|_| {
                let l = loop {
                    let l = lamperti_sample(nu(0.5), &mut rng).value;
                    if l < 1e4 {
                        break l;
                    }
                };
                let path = simulate_flight_model2_given(&p, l, &[0.0; 3], &E3, repr, &mut rng).unwrap();
                path.position(1.0).unwrap().into_iter().map(|x| x / (1.0 + x.abs()))
            })
            .collect()
    };
    let a = sample(Model2Repr::TimeScaled, 0);
    let b = sample(Model2Repr::SpeedScaled, 1);
    let settings = PermutationSettings { shuffles: 100, max_points: 1500 };
    let r = two_sample_distance(&a, &b, 3, Metric::Energy, &settings, &mut stream(47, 2)).unwrap();
    assert!(r.p_value > 0.01, "{r:?}");
}

#[test]
fn model2_free_path_does_not_depend_on_speed() {
    // speed c L and first flight time Exp(lambda L): the free path c L J1 is
    // Exp with mean c/lambda in every L-bin, and speed and J1 are
    // negatively correlated
    let (lambda, c) = (2.0, 1.0);
    let p = params(0.5, lambda, c, 3, 1e9);
    let mut rng = stream(48, 0);
    let mut rows = Vec::new();
    for _ in 0..60_000 {
        let l = lamperti_sample(nu(0.5), &mut rng).value;
        let horizon = SimParams { t_max: 50.0 / (lambda * l), ..p };
        let path =
            simulate_flight_model2_given(&horizon, l, &[0.0; 3], &E3, Model2Repr::SpeedScaled, &mut rng).unwrap();
        if let Some(&j1) = path.event_times().first() {
            rows.push((path.speed, j1));
        }
    }
    assert!(rows.len() > 59_990);
    let logs: Vec<(f64, f64)> = rows.iter().map(|&(s, j)| (s.ln(), j.ln())).collect();
    let n = logs.len() as f64;
    let (mx, my) = (logs.iter().map(|r| r.0).sum::<f64>() / n, logs.iter().map(|r| r.1).sum::<f64>() / n);
    let cov = logs.iter().map(|r| (r.0 - mx) * (r.1 - my)).sum::<f64>() / n;
    assert!(cov < 0.0);
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mean_path = c / lambda;
    for bin in rows.chunks(rows.len() / 3 + 1) {
        let paths: Vec<f64> = bin.iter().map(|&(s, j)| s * j).collect();
        let r = ks_one_sample(&paths, |x| if x <= 0.0 { 0.0 } else { 1.0 - (-x / mean_path).exp() }).unwrap();
        assert!(r.p_value > 0.01, "{r:?}");
    }
}

#[test]
fn efpp_pmf_examples() {
    let o = nu(0.5);
    assert!((efpp_pmf(o, 2.0, 0.5, 0).unwrap() - mittag_leffler(o, -1.0).unwrap()).abs() < 1e-10);
    for k in 0..6u64 {
        let pois = (-1.7f64).exp() * 1.7f64.powi(k as i32) / gamma(k as f64 + 1.0);
        assert!((efpp_pmf(nu(1.0), 1.7, 1.0, k).unwrap() - pois).abs() < 1e-14);
    }
    let head: f64 = (0..=60).map(|k| efpp_pmf(o, 1.0, 1.0, k).unwrap()).sum();
    let tail = efpp_tail(o, 1.0, 1.0, 60).unwrap();
    assert!((head + tail - 1.0).abs() < 1e-8, "{head} + {tail}");
    assert!(tail > 0.01);
}

#[test]
fn small_interval_jumps() {
    let p = small_interval_jump_prob(nu(0.5), 1.0, 1e-6).unwrap();
    let approx = 1e-3 / gamma(1.5);
    assert!((p / approx - 1.0).abs() < 0.01, "{p} vs {approx}");
    let q = small_interval_jump_prob(nu(1.0), 2.0, 1e-3).unwrap();
    assert!((q - (1.0 - (-2e-3f64).exp())).abs() < 1e-15);
}

#[test]
fn msd_model1_limits_and_growth() {
    for t in [0.1, 1.0, 7.0] {
        let m = msd_model1(nu(1.0), 1.5, 2.0, t).unwrap();
        let exact = 2.0 * 4.0 / 2.25 * (1.5 * t - 1.0 + (-1.5 * t).exp());
        assert!((m - exact).abs() < 1e-8 * exact.max(1.0), "t={t}: {m} vs {exact}");
    }
    let t = 1e-6;
    let r = msd_model1(nu(0.5), 1.0, 1.0, t).unwrap() / (t * t);
    assert!((r - 1.0).abs() < 1e-2, "{r}");
    // log-log slope 2 - nu over [1e2, 1e4]
    let (a, b) = (1e2, 1e4);
    let slope =
        (msd_model1(nu(0.5), 1.0, 1.0, b).unwrap() / msd_model1(nu(0.5), 1.0, 1.0, a).unwrap()).ln() / (b / a).ln();
    assert!((slope - 1.5).abs() < 0.03, "{slope}");
}

#[test]
fn msd_model1_matches_simulation() {
    let mut rng = stream(49, 0);
    let p = params(0.6, 1.0, 1.0, 3, 2.0);
    let sampler = StateSampler::new(FlightModel::Model1, p);
    let sq: Vec<f64> = (0..200_000)
        .map(|_| sampler.sample(&[0.0; 3], &E3, &[2.0], &mut rng).unwrap().positions.iter().map(|x| x * x).sum())
        .collect();
    assert!(within_3se(mean_estimate(&sq), msd_model1(nu(0.6), 1.0, 1.0, 2.0).unwrap()));
}

#[test]
fn state_sampler_shortcut_keeps_the_msd() {
    // rates above the shortcut threshold replace events by a Gaussian step
    let mut rng = stream(50, 0);
    let p = params(1.0, 1e4, 100.0, 3, 1.0);
    let mut sampler = StateSampler::new(FlightModel::Markov, p);
    sampler.shortcut = Some(1e3);
    let sq: Vec<f64> = (0..50_000)
        .map(|_| {
            let s = sampler.sample(&[0.0; 3], &E3, &[0.5, 1.0], &mut rng).unwrap();
            assert!(s.shortcut);
            s.positions[3..].iter().map(|x| x * x).sum()
        })
        .collect();
    assert!(within_3se(mean_estimate(&sq), msd_markov(1e4, 100.0, 1.0)));
}

#[test]
fn scattering_averages() {
    let mut rng = stream(51, 0);
    let x = [0.3, -0.2, 1.0];
    let e = scattering_average(|x, _| x[0] + 2.0, &x, 100, &mut rng).unwrap();
    assert_eq!(e.mean, 2.3);
    assert_eq!(e.se, 0.0);
    let e = scattering_average(|_, v| v[0], &x, 1_000_000, &mut rng).unwrap();
    assert!(within_3se(e, 0.0));
    let e = scattering_average(|_, v| v[0] * v[0], &x, 1_000_000, &mut rng).unwrap();
    assert!(within_3se(e, 1.0 / 3.0));
}

#[test]
fn duhamel_with_constant_observable_is_the_partial_pmf_sum() {
    let mut rng = stream(52, 0);
    let p = params(0.5, 1.0, 1.0, 3, 1.0);
    let d = duhamel_model1(|_, _| 1.0, &[0.0; 3], &E3, &p, 6, 100, &mut rng).unwrap();
    let partial: f64 = (0..=6).map(|k| efpp_pmf(nu(0.5), 1.0, 1.0, k).unwrap()).sum();
    assert!((d.value - partial).abs() < 1e-12);
    assert!((d.tail_bound - efpp_tail(nu(0.5), 1.0, 1.0, 6).unwrap()).abs() < 1e-12);
}

#[test]
fn duhamel_at_nu_one_matches_markov_monte_carlo() {
    let xi = [0.7, -0.4, 1.1];
    let h = |x: &[f64], _: &[f64]| x.iter().zip(&xi).map(|(a, b)| a * b).sum::<f64>().cos();
    let p = params(1.0, 0.5, 1.0, 3, 1.0);
    let mut rng = stream(53, 0);
    let d = duhamel_model1(h, &[0.0; 3], &E3, &p, 8, 200_000, &mut rng).unwrap();
    let mc: Vec<f64> = (0..400_000)
        .map(|_| {
            let path = simulate_markov_flight(&p, &[0.0; 3], &E3, &mut rng).unwrap();
            h(&path.position(1.0).unwrap(), &[])
        })
        .collect();
    let e = mean_estimate(&mc);
    let tol = 3.0 * (e.se * e.se + d.se * d.se).sqrt() + d.tail_bound;
    assert!((e.mean - d.value).abs() < tol, "{} vs {} (tol {tol})", e.mean, d.value);
}

proptest! {
    #[test]
    fn directions_are_unit_vectors(d in 1usize..7, seed in 0u64..1000) {
        let v = uniform_sphere_direction(d, &mut stream(seed, 3));
        let n: f64 = v.iter().map(|x| x * x).sum();
        prop_assert!((n - 1.0).abs() < 1e-12);
    }

    #[test]
    fn flight_paths_are_continuous_at_speed_c(seed in 0u64..500, v in 0.2f64..1.0, c in 0.1f64..3.0) {
        let p = params(v, 1.0, c, 2, 3.0);
        let path = simulate_flight_model1(&p, &[0.5, -1.0], &[0.0, 1.0], &mut stream(seed, 4));
        prop_assume!(path.is_ok());
        let path = path.unwrap();
        let mut prev = path.position(0.0).unwrap();
        let steps = 300;
        for i in 1..=steps {
            let t = 3.0 * i as f64 / steps as f64;
            let x = path.position(t).unwrap();
            let step = ((x[0] - prev[0]).powi(2) + (x[1] - prev[1]).powi(2)).sqrt();
            prop_assert!(step <= c * 3.0 / steps as f64 * (1.0 + 1e-9));
            prev = x;
        }
        let dir = path.direction(3.0).unwrap();
        prop_assert!((dir[0].hypot(dir[1]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn efpp_pmf_sums_with_its_tail_to_one(v in 0.2f64..1.0, lt in 0.05f64..5.0, n in 0u64..30) {
        let o = nu(v);
        let head: f64 = (0..=n).map(|k| efpp_pmf(o, lt, 1.0, k).unwrap()).sum();
        let tail = efpp_tail(o, lt, 1.0, n).unwrap();
        prop_assert!((head + tail - 1.0).abs() < 1e-8);
    }

    #[test]
    fn jump_probability_is_monotone(v in 0.1f64..1.0, a in 1e-8f64..10.0, b in 1e-8f64..10.0) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let p = small_interval_jump_prob(nu(v), 1.0, lo).unwrap();
        let q = small_interval_jump_prob(nu(v), 1.0, hi).unwrap();
        prop_assert!(p <= q + 1e-12 && (0.0..=1.0).contains(&p));
    }

    #[test]
    fn msd_is_increasing_and_ballistic_bounded(v in 0.2f64..1.0, t in 0.01f64..50.0, dt in 0.01f64..50.0) {
        let a = msd_model1(nu(v), 1.0, 1.0, t).unwrap();
        let b = msd_model1(nu(v), 1.0, 1.0, t + dt).unwrap();
        prop_assert!(a < b);
        prop_assert!(a <= t * t * (1.0 + 1e-9));
    }
}
