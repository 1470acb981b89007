//! Deterministic formula checks grouped into suites, each computed by two
//! independent routes or against a closed form.

use std::f64::consts::PI;

use mlz_core::anomdiff::{charfun_w, charfun_w_multi, self_similarity_check, TimeGrid};
use mlz_core::flights::{efpp_pmf, efpp_tail, msd_markov, msd_model1, small_interval_jump_prob};
use mlz_core::kinetics::{
    averaged_multiplier, fractional_power_symmetric, para_markov_transition, phillips_fractional_power,
    verify_fractional_cauchy_symbol, GeneratorMatrix,
};
use mlz_core::lorentz::{free_flight_atom, free_flight_survival};
use mlz_core::pointproc::{finite_dim_pmf, janossy_density, nearest_distance_survival};
use mlz_core::quad::{breakpoints, integrate};
use mlz_core::specfun::{
    lamperti_average, lamperti_cdf, lamperti_pdf, lamperti_quantile, mittag_leffler, ml_quadrature, ml_series,
    poisson_mixture_tail,
};
use mlz_core::streams::Stream;
use mlz_core::{FracOrder, QuadratureSpec};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, ln_gamma};

use crate::error::{HarnessError, Result};

pub const SUITES: [&str; 8] = ["specfun", "lamperti", "efpp", "pointproc", "freeflight", "msd", "anomdiff", "kinetics"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Comparison {
    /// |achieved − target| <= tolerance.
    AbsDiff,
    /// achieved < target.
    Below,
    /// achieved > target.
    Above,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub comparison: Comparison,
    pub target: f64,
    pub achieved: f64,
    pub tolerance: f64,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Check {
    pub fn abs_diff(name: impl Into<String>, target: f64, achieved: f64, tolerance: f64) -> Self {
        let passed = (achieved - target).abs() <= tolerance;
        Self { name: name.into(), comparison: Comparison::AbsDiff, target, achieved, tolerance, passed, error: None }
    }

    pub fn below(name: impl Into<String>, achieved: f64, bound: f64) -> Self {
        let passed = achieved < bound;
        Self {
            name: name.into(),
            comparison: Comparison::Below,
            target: bound,
            achieved,
            tolerance: 0.0,
            passed,
            error: None,
        }
    }

    pub fn above(name: impl Into<String>, achieved: f64, bound: f64) -> Self {
        let passed = achieved > bound;
        Self {
            name: name.into(),
            comparison: Comparison::Above,
            target: bound,
            achieved,
            tolerance: 0.0,
            passed,
            error: None,
        }
    }

    /// Within `k` standard errors of the target.
    pub fn within_se(name: impl Into<String>, target: f64, achieved: f64, se: f64, k: f64) -> Self {
        Self::abs_diff(name, target, achieved, k * se)
    }

    pub fn failed(name: impl Into<String>, err: impl std::fmt::Display) -> Self {
        Self {
            name: name.into(),
            comparison: Comparison::AbsDiff,
            target: f64::NAN,
            achieved: f64::NAN,
            tolerance: 0.0,
            passed: false,
            error: Some(err.to_string()),
        }
    }
}

/// Collects checks; a computation error becomes a failed entry.
#[derive(Debug, Default)]
pub struct Checks(pub Vec<Check>);

impl Checks {
    pub fn add<E: std::fmt::Display>(&mut self, name: &str, r: std::result::Result<Check, E>) {
        self.0.push(r.unwrap_or_else(|e| Check::failed(name, e)));
    }

    pub fn push(&mut self, c: Check) {
        self.0.push(c);
    }

    pub fn all_passed(&self) -> bool {
        self.0.iter().all(|c| c.passed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LawReport {
    pub suite: String,
    pub passed: bool,
    pub checks: Vec<Check>,
}

type CoreResult<T> = mlz_core::Result<T>;

fn nu(v: f64) -> FracOrder {
    FracOrder::new(v).expect("constant order in (0, 1]")
}

/// E f(L) by integrating against the Lamperti density in y, a route
/// independent of the u-coordinate quadrature behind `mittag_leffler`.
pub fn density_average<F: Fn(f64) -> f64>(order: FracOrder, f: F, scale: f64) -> CoreResult<f64> {
    let mut err = None;
    let pts = breakpoints(0.0, f64::INFINITY, &[1e-6 * scale, 1e-3 * scale, 0.1 * scale, scale, 10.0 * scale, 1.0]);
    let v = integrate(
        |y| {
            if y == 0.0 {
                return 0.0;
            }
            match lamperti_pdf(order, y) {
                Ok(p) => f(y) * p,
                Err(e) => {
                    err.get_or_insert(e);
                    0.0
                }
            }
        },
        &pts,
        &QuadratureSpec::new(1e-13, 1e-11, 8000)?,
    )?;
    match err {
        Some(e) => Err(e),
        None => Ok(v),
    }
}

fn specfun_suite(c: &mut Checks) {
    // e·erfc(1) rounded to the nearest double; statrs' erfc(1) is about 2e-11 off
    const E_ERFC_1: f64 = 0.427_583_576_155_807;
    c.add(
        "M_0.5(-1) = e erfc(1)",
        mittag_leffler(nu(0.5), -1.0).map(|m| Check::abs_diff("M_0.5(-1) = e erfc(1)", E_ERFC_1, m, 1e-12)),
    );
    c.add(
        "M_1(-2) = exp(-2)",
        mittag_leffler(FracOrder::ONE, -2.0).map(|m| Check::abs_diff("M_1(-2) = exp(-2)", (-2.0f64).exp(), m, 1e-14)),
    );
    for v in [0.3, 0.5, 0.8] {
        let name = format!("series vs quadrature on [0,2], nu={v}");
        let r = (0..=20)
            .map(|i| {
                let z = -0.1 * i as f64;
                let s = ml_series(nu(v), z).ok_or_else(|| mlz_core::Error::Domain("series refused".into()))?;
                Ok((s - ml_quadrature(nu(v), z, &QuadratureSpec::default())?).abs())
            })
            .collect::<CoreResult<Vec<f64>>>()
            .map(|d| Check::abs_diff(&name, 0.0, d.into_iter().fold(0.0, f64::max), 1e-8));
        c.add(&name, r);
    }
}

fn lamperti_suite(c: &mut Checks) {
    for v in [0.3, 0.5, 0.8] {
        let o = nu(v);
        let name = format!("median 1, nu={v}");
        c.add(&name, lamperti_cdf(o, 1.0).map(|p| Check::abs_diff(&name, 0.5, p, 1e-12)));
        let name = format!("quantile inverts cdf at 2, nu={v}");
        c.add(
            &name,
            lamperti_cdf(o, 2.0).and_then(|p| lamperti_quantile(o, p)).map(|q| Check::abs_diff(&name, 2.0, q, 1e-10)),
        );
        for eta in [0.5, 1.0, 2.0] {
            let name = format!("Laplace transform at eta={eta}, nu={v}");
            let r = (|| {
                let lhs = density_average(o, |y| (-eta * y).exp(), 1.0 / eta)?;
                Ok::<_, mlz_core::Error>(Check::abs_diff(&name, mittag_leffler(o, -eta.powf(v))?, lhs, 1e-8))
            })();
            c.add(&name, r);
        }
    }
}

fn efpp_suite(c: &mut Checks) {
    let name = "pmf n<=60 plus tail = 1, nu=0.5";
    let r = (|| {
        let s: f64 = (0..=60).map(|n| efpp_pmf(nu(0.5), 1.0, 1.0, n)).sum::<CoreResult<f64>>()?;
        Ok::<_, mlz_core::Error>(Check::abs_diff(name, 1.0, s + efpp_tail(nu(0.5), 1.0, 1.0, 60)?, 1e-8))
    })();
    c.add(name, r);
    let name = "nu=1 is Poisson: P(N=3) = e^-1/6";
    c.add(name, efpp_pmf(FracOrder::ONE, 1.0, 1.0, 3).map(|p| Check::abs_diff(name, (-1.0f64).exp() / 6.0, p, 1e-14)));
    for v in [0.5, 0.8] {
        let name = format!("small-interval jump probability ~ (lambda dt)^nu / Gamma(1+nu), nu={v}");
        let dt = 1e-10;
        let r = small_interval_jump_prob(nu(v), 1.0, dt)
            .map(|p| Check::abs_diff(&name, 1.0, p * gamma(1.0 + v) / dt.powf(v), 1e-3));
        c.add(&name, r);
    }
}

fn poisson_pmf(mean: f64, k: u64) -> f64 {
    if mean == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    (k as f64 * mean.ln() - mean - ln_gamma(k as f64 + 1.0)).exp()
}

fn pointproc_suite(c: &mut Checks) {
    let (rho, vols) = (2.0, [0.7, 1.3]);
    for v in [0.5, 0.8] {
        let o = nu(v);
        for counts in [[0u64, 0u64], [2, 1], [5, 7]] {
            let name = format!("fdd pmf {counts:?} vs Cox quadrature, nu={v}");
            let r = (|| {
                let direct = finite_dim_pmf(o, rho, &vols, &counts)?;
                let cox = lamperti_average(
                    o,
                    |l| poisson_pmf(rho * l * vols[0], counts[0]) * poisson_pmf(rho * l * vols[1], counts[1]),
                    &[1.0 / (rho * 2.0), (counts[0] + counts[1]) as f64 / (rho * 2.0)],
                    &QuadratureSpec::new(1e-14, 1e-11, 4000)?,
                )?;
                Ok::<_, mlz_core::Error>(Check::abs_diff(&name, cox, direct, 1e-8))
            })();
            c.add(&name, r);
        }
        let name = format!("fdd pmf over k1+k2<=40 plus tail = 1, nu={v}");
        let r = (|| {
            let mut s = 0.0;
            for k1 in 0..=40u64 {
                for k2 in 0..=(40 - k1) {
                    s += finite_dim_pmf(o, rho, &vols, &[k1, k2])?;
                }
            }
            Ok::<_, mlz_core::Error>(Check::abs_diff(&name, 1.0, s + poisson_mixture_tail(o, rho * 2.0, 40)?, 1e-6))
        })();
        c.add(&name, r);
        let name = format!("Janossy n=0 is the void probability, nu={v}");
        let r = (|| {
            let j = janossy_density(o, rho, 1.5, 0)?;
            Ok::<_, mlz_core::Error>(Check::abs_diff(&name, mittag_leffler(o, -(rho * 1.5f64).powf(v))?, j, 1e-14))
        })();
        c.add(&name, r);
        let name = format!("nearest-point survival vs density route, nu={v}");
        let r = (|| {
            let x: f64 = 0.6;
            let m = rho * 4.0 / 3.0 * PI * x.powi(3);
            let lhs = nearest_distance_survival(o, rho, x)?;
            Ok::<_, mlz_core::Error>(Check::abs_diff(
                &name,
                density_average(o, |y| (-m * y).exp(), 1.0 / m)?,
                lhs,
                1e-8,
            ))
        })();
        c.add(&name, r);
    }
}

fn freeflight_suite(c: &mut Checks) {
    let (rho, radius, cc) = (1.0 / (PI * 0.05 * 0.05), 0.05, 1.0);
    for v in [0.5, 0.8] {
        let o = nu(v);
        for t in [0.1, 1.0, 10.0] {
            let name = format!("survival at t={t} vs density route, nu={v}");
            let r = (|| {
                let vol = PI * radius * radius * cc * t + 4.0 / 3.0 * PI * radius.powi(3);
                let m = rho * vol;
                let s = free_flight_survival(o, rho, radius, cc, t)?;
                Ok::<_, mlz_core::Error>(Check::abs_diff(
                    &name,
                    density_average(o, |y| (-m * y).exp(), 1.0 / m)?,
                    s,
                    1e-8,
                ))
            })();
            c.add(&name, r);
        }
        let name = format!("survival at 0 plus atom = 1, nu={v}");
        let r = (|| {
            Ok::<_, mlz_core::Error>(Check::abs_diff(
                &name,
                1.0,
                free_flight_survival(o, rho, radius, cc, 0.0)? + free_flight_atom(o, rho, radius)?,
                1e-14,
            ))
        })();
        c.add(&name, r);
        let name = format!("survival tail ~ (lambda t)^-nu / Gamma(1-nu), nu={v}");
        let r = (|| {
            let t = 1e10;
            let s = free_flight_survival(o, rho, radius, cc, t)?;
            let lam = rho * cc * PI * radius * radius;
            Ok::<_, mlz_core::Error>(Check::abs_diff(&name, 1.0, s * (lam * t).powf(v) * gamma(1.0 - v), 1e-3))
        })();
        c.add(&name, r);
    }
}

fn msd_suite(c: &mut Checks) {
    for t in [0.1, 1.0, 10.0] {
        let name = format!("model-1 MSD at nu=1 equals Markov closed form, t={t}");
        let r = msd_model1(FracOrder::ONE, 1.0, 1.0, t).map(|m| {
            let exact = msd_markov(1.0, 1.0, t);
            Check::abs_diff(&name, exact, m, 1e-8 * exact)
        });
        c.add(&name, r);
    }
    let name = "Markov MSD at t=10: 2(t - 1 + e^-t)";
    c.push(Check::abs_diff(name, 2.0 * (10.0 - 1.0 + (-10.0f64).exp()), msd_markov(1.0, 1.0, 10.0), 1e-12));
    // corrections to both limits are of relative size (lambda t)^{∓nu}, so
    // the windows move out as nu drops
    for (v, t0, t_short) in [(0.3, 1e6, 1e-14), (0.5, 1e2, 1e-8), (0.8, 1e2, 1e-6)] {
        let name = format!("model-1 MSD log-log slope on [{t0:e}, {:e}] = 2 - nu, nu={v}", t0 * 100.0);
        let r = (|| {
            let a = msd_model1(nu(v), 1.0, 1.0, t0)?;
            let b = msd_model1(nu(v), 1.0, 1.0, t0 * 100.0)?;
            Ok::<_, mlz_core::Error>(Check::abs_diff(&name, 2.0 - v, (b / a).ln() / 100f64.ln(), 0.03))
        })();
        c.add(&name, r);
        let name = format!("model-1 MSD is ballistic at t={t_short:e}, nu={v}");
        let t = t_short;
        c.add(&name, msd_model1(nu(v), 1.0, 1.0, t).map(|m| Check::abs_diff(&name, 1.0, m / (t * t), 1e-3)));
    }
}

fn anomdiff_suite(c: &mut Checks) {
    for v in [0.5, 0.8] {
        let o = nu(v);
        let name = format!("one-time characteristic function vs Gaussian mixture, nu={v}");
        let r = (|| {
            let u = [0.4, -0.3, 1.1];
            let q: f64 = u.iter().map(|x| x * x).sum::<f64>() * 2.0 / 2.0;
            Ok::<_, mlz_core::Error>(Check::abs_diff(
                &name,
                density_average(o, |y| (-q * y).exp(), 1.0 / q)?,
                charfun_w(o, &u, 2.0)?,
                1e-8,
            ))
        })();
        c.add(&name, r);
        let name = format!("two-time characteristic function vs Gaussian mixture, nu={v}");
        let r = (|| {
            let grid = TimeGrid::new(vec![0.5, 1.5])?;
            let (u1, u2) = (0.7, -0.2);
            // Var(u1 B_{t1} + u2 B_{t2}) = (u1 + u2)² t1 + u2² (t2 − t1)
            let q = 0.5 * ((u1 + u2) * (u1 + u2) * 0.5 + u2 * u2 * 1.0);
            Ok::<_, mlz_core::Error>(Check::abs_diff(
                &name,
                density_average(o, |y| (-q * y).exp(), 1.0 / q)?,
                charfun_w_multi(o, &[u1, u2], &grid, 1)?,
                1e-8,
            ))
        })();
        c.add(&name, r);
        let name = format!("self-similarity W(a.) = sqrt(a) W(.), nu={v}");
        let r = (|| {
            let grid = TimeGrid::new(vec![0.3, 1.0, 2.2])?;
            let u = [0.5, -0.4, 0.9, 0.1, 0.2, -0.7];
            let rep = self_similarity_check::<Stream>(o, 3.7, &grid, &u, 2, None)?;
            Ok::<_, mlz_core::Error>(Check::below(&name, rep.analytic_gap, 1e-12))
        })();
        c.add(&name, r);
    }
}

pub fn symmetric_test_generator() -> GeneratorMatrix {
    GeneratorMatrix::new(DMatrix::from_row_slice(3, 3, &[-1.5, 1.0, 0.5, 1.0, -1.3, 0.3, 0.5, 0.3, -0.8]))
        .expect("valid generator")
}

pub fn asymmetric_test_generator() -> GeneratorMatrix {
    GeneratorMatrix::new(DMatrix::from_row_slice(3, 3, &[-1.2, 0.9, 0.3, 0.2, -0.7, 0.5, 1.6, 0.4, -2.0]))
        .expect("valid generator")
}

fn kinetics_suite(c: &mut Checks) {
    let q = QuadratureSpec::default();
    for v in [0.3, 0.5, 0.8] {
        let o = nu(v);
        let name = format!("Phillips power vs eigendecomposition, nu={v}");
        let g = symmetric_test_generator();
        let r = (|| {
            let a = phillips_fractional_power(&g, o, &q)?;
            let b = fractional_power_symmetric(&g, o)?;
            Ok::<_, mlz_core::Error>(Check::abs_diff(&name, 0.0, (a - b).amax(), 1e-8))
        })();
        c.add(&name, r);
        let name = format!("Phillips power has zero row sums, nu={v}");
        let r = phillips_fractional_power(&asymmetric_test_generator(), o, &q)
            .map(|a| Check::abs_diff(&name, 0.0, a.column_sum().amax(), 1e-10));
        c.add(&name, r);
        let name = format!("para-Markov P(1) is stochastic, nu={v}");
        let r = para_markov_transition(&asymmetric_test_generator(), o, 1.0, &q)
            .map(|p| Check::abs_diff(&name, 0.0, p.column_sum().map(|s| s - 1.0).amax(), 1e-10));
        c.add(&name, r);
    }
    let name = "two-state P(t) matches the averaged multiplier";
    let r = (|| {
        let g = GeneratorMatrix::new(DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0]))?;
        let p = para_markov_transition(&g, nu(0.5), 1.3, &q)?;
        Ok::<_, mlz_core::Error>(Check::abs_diff(
            name,
            0.5 * (1.0 + averaged_multiplier(nu(0.5), 1.3, -2.0)?),
            p[(0, 0)],
            1e-9,
        ))
    })();
    c.add(name, r);
    let name = "Caputo residual order of the relaxation solution, nu=0.5";
    c.add(
        name,
        verify_fractional_cauchy_symbol(nu(0.5), -1.0, 2.0, 0.05, 4)
            .map(|rep| Check::above(name, rep.min_order(), 1.2)),
    );
}

/// Runs one suite, or every suite for `"all"`.
pub fn run_law_suite(id: &str) -> Result<LawReport> {
    let mut c = Checks::default();
    let run: &dyn Fn(&mut Checks) = match id {
        "specfun" => &specfun_suite,
        "lamperti" => &lamperti_suite,
        "efpp" => &efpp_suite,
        "pointproc" => &pointproc_suite,
        "freeflight" => &freeflight_suite,
        "msd" => &msd_suite,
        "anomdiff" => &anomdiff_suite,
        "kinetics" => &kinetics_suite,
        "all" => &|c: &mut Checks| {
            for s in SUITES {
                let r = run_law_suite(s).expect("known suite");
                c.0.extend(r.checks.into_iter().map(|mut k| {
                    k.name = format!("{s}: {}", k.name);
                    k
                }));
            }
        },
        _ => {
            let mut available = SUITES.to_vec();
            available.push("all");
            return Err(HarnessError::UnknownSuite { requested: id.to_string(), available });
        }
    };
    run(&mut c);
    Ok(LawReport { suite: id.to_string(), passed: c.all_passed(), checks: c.0 })
}
