use std::f64::consts::PI;

use mlz_core::error::Error;
use mlz_core::lorentz::{
    first_flight_time, free_flight_atom, free_flight_survival, ray_sphere_first_hit, run_dynamics,
    simulate_lorentz_model1, simulate_lorentz_model2, simulate_lorentz_model2_given, specular_reflect, Exposure,
    LorentzParams, ObstacleField, Vec3,
};
use mlz_core::specfun::{lamperti_sample, mittag_leffler, FracOrder};
use mlz_core::stats::{ks_one_sample, mean_estimate, two_sample_distance, Metric, PermutationSettings};
use mlz_core::streams::stream;
use proptest::prelude::*;

fn nu(v: f64) -> FracOrder {
    FracOrder::new(v).unwrap()
}

const E1: Vec3 = [1.0, 0.0, 0.0];

fn unit(v: Vec3) -> Vec3 {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

fn dist(a: &Vec3, b: &Vec3) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

#[test]
fn nearly_empty_field_gives_free_motion() {
    let p = LorentzParams::new(nu(1.0), 1e-12, 0.1, 2.0, 5.0).unwrap();
    let tr = simulate_lorentz_model1([1.0, 2.0, 3.0], E1, &p, &mut stream(60, 0)).unwrap();
    assert_eq!(tr.n_collisions(), 0);
    let x = tr.final_position();
    assert!(dist(&x, &[11.0, 2.0, 3.0]) < 1e-12);
}

#[test]
fn free_flight_law_at_nu_one() {
    let (rho, r, c, t) = (0.7, 0.4, 1.5, 0.8);
    let s = free_flight_survival(nu(1.0), rho, r, c, t).unwrap();
    let exact = (-rho * (PI * r * r * c * t + 4.0 / 3.0 * PI * r.powi(3))).exp();
    assert!((s - exact).abs() < 1e-14);
    let atom = free_flight_atom(nu(1.0), rho, r).unwrap();
    assert!((atom - (1.0 - (-rho * 4.0 / 3.0 * PI * r.powi(3)).exp())).abs() < 1e-14);
}

#[test]
fn scaling_limit_of_the_survival_is_monotone() {
    // rho pi R^2 c fixed at 1, R -> 0: P(T > 1) increases to M_{1/2}(-1)
    let target = mittag_leffler(nu(0.5), -1.0).unwrap();
    let mut prev = 0.0;
    for k in 0..8 {
        let r = 0.5 * 0.25f64.powi(k);
        let rho = 1.0 / (PI * r * r);
        let s = free_flight_survival(nu(0.5), rho, r, 1.0, 1.0).unwrap();
        assert!(s > prev && s < target);
        prev = s;
    }
    assert!((target - prev).abs() < 1e-4, "{prev} vs {target}");
}

fn censored_cdf(survival: impl Fn(f64) -> f64, t_max: f64) -> impl Fn(f64) -> f64 {
    move |x| {
        if x <= 0.0 {
            0.0
        } else if x >= t_max {
            1.0
        } else {
            1.0 - survival(x)
        }
    }
}

#[test]
fn exposed_first_flight_follows_the_conditional_law() {
    let (rho, r, c, t_max) = (1.0, 0.5, 1.0, 4.0);
    let o = nu(0.5);
    let p = LorentzParams::new(o, rho, r, c, t_max).unwrap();
    let mut rng = stream(61, 0);
    let ts: Vec<f64> = (0..40_000).map(|_| first_flight_time([0.0; 3], E1, &p, &mut rng).unwrap().min(t_max)).collect();
    let v0 = 4.0 / 3.0 * PI * r.powi(3);
    let free = mittag_leffler(o, -(rho * v0).sqrt()).unwrap();
    let surv = |t: f64| free_flight_survival(o, rho, r, c, t).unwrap() / free;
    let ks = ks_one_sample(&ts, censored_cdf(surv, t_max)).unwrap();
    assert!(ks.p_value > 0.01, "{ks:?}");
}

#[test]
fn unconditioned_first_flight_has_an_atom_at_zero() {
    let (rho, r) = (1.0, 0.5);
    let o = nu(0.5);
    let p = LorentzParams::new(o, rho, r, 1.0, 4.0).unwrap().with_exposure(Exposure::Disabled);
    let mut rng = stream(62, 0);
    // a cell too crowded to materialize holds ~1e8 points per unit volume,
    // so the start is covered
    let ts: Vec<f64> = (0..40_000)
        .map(|_| match first_flight_time([0.0; 3], E1, &p, &mut rng) {
            Ok(t) => t.min(4.0),
            Err(Error::TooManyPoints { .. }) => 0.0,
            Err(e) => panic!("{e}"),
        })
        .collect();
    let zero: Vec<f64> = ts.iter().map(|&t| f64::from(u8::from(t == 0.0))).collect();
    let e = mean_estimate(&zero);
    let atom = free_flight_atom(o, rho, r).unwrap();
    assert!((e.mean - atom).abs() < 3.0 * e.se, "{e:?} vs {atom}");
    let ks = ks_one_sample(&ts, |x| {
        if x < 0.0 {
            0.0
        } else if x >= 4.0 {
            1.0
        } else {
            1.0 - free_flight_survival(o, rho, r, 1.0, x).unwrap()
        }
    })
    .unwrap();
    assert!(ks.p_value > 0.01, "{ks:?}");
}

#[test]
fn model2_free_path_is_exponential_given_the_speed() {
    // the exposure exclusion removes exactly the half ball behind the
    // tube's front cap, so the free path is Exp(rho pi R^2) for every l
    let (rho, r, c) = (2.0, 0.3, 1.0);
    let p = LorentzParams::new(nu(0.5), rho, r, c, 1.0).unwrap();
    let mut rng = stream(63, 0);
    let rate = rho * PI * r * r;
    for l in [0.3, 1.0, 4.0] {
        let horizon = LorentzParams { t_max: 40.0 / (rate * c * l), ..p };
        let paths: Vec<f64> = (0..20_000)
            .map(|_| {
                let tr = simulate_lorentz_model2_given([0.0; 3], E1, &horizon, l, &mut rng).unwrap();
                tr.first_flight_time().expect("a collision within 40 mean free paths") * c * l
            })
            .collect();
        let ks = ks_one_sample(&paths, |x| if x <= 0.0 { 0.0 } else { 1.0 - (-rate * x).exp() }).unwrap();
        assert!(ks.p_value > 0.01, "l={l}: {ks:?}");
    }
}

#[test]
fn model2_first_flight_survival_is_mittag_leffler() {
    let (rho, r, c) = (1.0, 0.4, 1.0);
    let lambda = rho * c * PI * r * r;
    let mut rng = stream(64, 0);
    let n = 100_000;
    let ts = [0.5, 2.0, 8.0];
    let mut hits = vec![Vec::with_capacity(n); ts.len()];
    for _ in 0..n {
        let l = lamperti_sample(nu(0.5), &mut rng).value;
        let mut field = ObstacleField::poisson(rho, r, Some(([0.0; 3], r)), &mut rng).unwrap();
        let window = c * l * ts[ts.len() - 1];
        let first = field.first_hit([0.0; 3], E1, window, None).unwrap().map(|h| h.distance / (c * l));
        for (k, &t) in ts.iter().enumerate() {
            hits[k].push(f64::from(u8::from(first.is_none_or(|s| s > t))));
        }
    }
    for (k, &t) in ts.iter().enumerate() {
        let target = mittag_leffler(nu(0.5), -(lambda * t).sqrt()).unwrap();
        let e = mean_estimate(&hits[k]);
        assert!((e.mean - target).abs() < 3.0 * e.se, "t={t}: {e:?} vs {target}");
    }
}

#[test]
fn models_coincide_with_the_poisson_gas_at_nu_one() {
    let p = LorentzParams::new(nu(1.0), 1.0, 0.3, 1.0, 3.0).unwrap();
    let x0 = [0.0; 3];
    let finals = |which: u8, seed: u64| -> Vec<f64> {
        let mut rng = stream(65, seed);
        (0..4000)
            .flat_map(|_| {
                let tr = match which {
                    0 => simulate_lorentz_model1(x0, E1, &p, &mut rng).unwrap(),
                    1 => simulate_lorentz_model2(x0, E1, &p, &mut rng).unwrap(),
                    _ => {
                        let mut f = ObstacleField::poisson(p.rho, p.radius, Some((x0, p.radius)), &mut rng).unwrap();
                        run_dynamics(&mut f, x0, E1, p.c, p.t_max, p.event_cap, 1.0).unwrap()
                    }
                };
                tr.final_position()
            })
            .collect()
    };
    let direct = finals(2, 0);
    let settings = PermutationSettings { shuffles: 100, max_points: 1500 };
    for (which, seed) in [(0, 1), (1, 2)] {
        let sample = finals(which, seed);
        let r = two_sample_distance(&sample, &direct, 3, Metric::Energy, &settings, &mut stream(65, 9)).unwrap();
        assert!(r.p_value > 0.01, "model {}: {r:?}", which + 1);
    }
}

#[test]
fn trajectories_keep_speed_and_stay_outside_obstacles() {
    let p = LorentzParams::new(nu(0.7), 2.0, 0.3, 1.0, 10.0).unwrap();
    let mut rng = stream(66, 0);
    for _ in 0..200 {
        let mut field = mlz_core::lorentz::model1_field([0.0; 3], &p, &mut rng).unwrap();
        let l = field.intensity_draw.unwrap();
        let tr = run_dynamics(&mut field, [0.0; 3], E1, p.c, p.t_max, p.event_cap, l).unwrap();
        for (k, hp) in tr.hit_points.iter().enumerate() {
            let c = field.centers()[tr.hit_obstacle_ids[k]];
            assert!((dist(hp, &c) - p.radius).abs() < 1e-9);
        }
        for i in 0..=100 {
            let x = tr.position(p.t_max * i as f64 / 100.0).unwrap();
            for c in field.centers() {
                assert!(dist(&x, c) > p.radius - 1e-7);
            }
        }
        for w in tr.directions.iter() {
            assert!((dist(w, &[0.0; 3]) - 1.0).abs() < 1e-12);
        }
    }
}

proptest! {
    #[test]
    fn reflection_is_an_involution_that_flips_the_normal(
        v in prop::array::uniform3(-1.0f64..1.0),
        n in prop::array::uniform3(-1.0f64..1.0),
    ) {
        prop_assume!(dist(&v, &[0.0; 3]) > 1e-3 && dist(&n, &[0.0; 3]) > 1e-3);
        let (v, n) = (unit(v), unit(n));
        let w = specular_reflect(v, n);
        let dot = |a: &Vec3, b: &Vec3| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
        prop_assert!((dot(&w, &n) + dot(&v, &n)).abs() < 1e-12);
        prop_assert!((dot(&w, &w) - 1.0).abs() < 1e-12);
        let back = specular_reflect(w, n);
        prop_assert!(dist(&back, &v) < 1e-12);
    }

    #[test]
    fn first_hit_is_on_the_sphere_and_nothing_is_crossed_before(
        centers in prop::collection::vec(prop::array::uniform3(-5.0f64..5.0), 1..20),
        d in prop::array::uniform3(-1.0f64..1.0),
        r in 0.05f64..0.8,
    ) {
        prop_assume!(dist(&d, &[0.0; 3]) > 1e-3);
        let origin = [0.0; 3];
        prop_assume!(centers.iter().all(|c| dist(c, &origin) > r + 1e-6));
        let d = unit(d);
        let hit = ray_sphere_first_hit(origin, d, &centers, r, 20.0).unwrap();
        let limit = hit.map_or(20.0, |h| h.distance);
        if let Some(h) = hit {
            prop_assert!((dist(&h.point, &centers[h.id]) - r).abs() < 1e-9);
        }
        for i in 0..2000 {
            let s = limit * i as f64 / 2000.0;
            let x = [s * d[0], s * d[1], s * d[2]];
            prop_assert!(centers.iter().all(|c| dist(&x, c) >= r - 1e-9));
        }
        let mut field = ObstacleField::fixed(centers.clone(), r).unwrap();
        let lazy = field.first_hit(origin, d, 20.0, None).unwrap();
        prop_assert_eq!(lazy.map(|h| h.id), hit.map(|h| h.id));
    }
}
