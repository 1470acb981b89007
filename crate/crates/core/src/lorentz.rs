//! Event-driven hard-sphere Lorentz gas in ℝ³.
//!
//! Obstacles are generated lazily on a cubic cell grid: each cell's
//! Poisson content is a deterministic function of the field seed and the
//! cell index, and is kept for the whole trajectory, so recollisions see
//! the same spheres.

use std::collections::HashMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::pointproc::{poisson_count, Point3};
use crate::specfun::{lamperti_sample, mittag_leffler, FracOrder};

pub type Vec3 = [f64; 3];

const INSIDE_TOL: f64 = 1e-9;
const TIE_TOL: f64 = 1e-12;

#[inline]
fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
fn sub(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
fn axpy(a: f64, x: &Vec3, y: &Vec3) -> Vec3 {
    [y[0] + a * x[0], y[1] + a * x[1], y[2] + a * x[2]]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    /// Distance travelled along the unit direction.
    pub distance: f64,
    pub id: usize,
    pub point: Vec3,
}

/// Outcome of testing one sphere against a ray.
enum SphereTest {
    Miss,
    Inside,
    At(f64),
}

#[inline]
fn test_sphere(origin: &Vec3, dir: &Vec3, center: &Vec3, r2: f64, inside2: f64) -> SphereTest {
    let w = sub(center, origin);
    let w2 = dot(&w, &w);
    if w2 < inside2 {
        return SphereTest::Inside;
    }
    let b = dot(&w, dir);
    if b <= 0.0 {
        return SphereTest::Miss;
    }
    let perp = axpy(-b, dir, &w);
    let q = dot(&perp, &perp);
    if q > r2 {
        return SphereTest::Miss;
    }
    let root = (r2 - q).sqrt();
    // stable form of b - root
    let s = (w2 - r2) / (b + root);
    if s > 0.0 {
        SphereTest::At(s)
    } else {
        SphereTest::Miss
    }
}

#[inline]
fn better(s: f64, id: usize, best: &Option<(f64, usize)>) -> bool {
    match best {
        None => true,
        Some((bs, bid)) => s < bs - TIE_TOL || (s <= bs + TIE_TOL && id < *bid),
    }
}

/// Earliest hit within distance `window` along a unit `direction`.
pub fn ray_sphere_first_hit(
    origin: Vec3,
    direction: Vec3,
    centers: &[Vec3],
    radius: f64,
    window: f64,
) -> Result<Option<Hit>> {
    let r2 = radius * radius;
    let inside2 = (radius - INSIDE_TOL).max(0.0).powi(2);
    let mut best: Option<(f64, usize)> = None;
    for (id, c) in centers.iter().enumerate() {
        match test_sphere(&origin, &direction, c, r2, inside2) {
            SphereTest::Inside => return Err(Error::StartedInside { id }),
            SphereTest::At(s) if s <= window && better(s, id, &best) => best = Some((s, id)),
            _ => {}
        }
    }
    Ok(best.map(|(s, id)| Hit { distance: s, id, point: axpy(s, &direction, &origin) }))
}

pub fn specular_reflect(v: Vec3, normal: Vec3) -> Vec3 {
    let vn = dot(&v, &normal);
    let out = axpy(-2.0 * vn, &normal, &v);
    // renormalize against rounding drift
    let n = dot(&out, &out).sqrt();
    [out[0] / n, out[1] / n, out[2] / n]
}

#[derive(Debug, Clone)]
enum Source {
    /// All obstacles are known up front.
    Fixed,
    /// Poisson with the given intensity, cell contents derived from `seed`.
    Poisson { intensity: f64, seed: u64 },
}

/// Hard-sphere obstacles indexed by a cubic cell grid.
#[derive(Debug, Clone)]
pub struct ObstacleField {
    pub radius: f64,
    /// The Lamperti value behind a Cox field, if any.
    pub intensity_draw: Option<f64>,
    exclusion: Option<(Vec3, f64)>,
    source: Source,
    cell: f64,
    centers: Vec<Point3>,
    cells: HashMap<[i64; 3], Vec<u32>>,
}

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn cell_stream(key: [i64; 3]) -> u64 {
    let mut h = 0x9e37_79b9_7f4a_7c15u64;
    for k in key {
        h = mix64(h ^ (k as u64));
    }
    h
}

impl ObstacleField {
    /// A field with exactly the given centers.
    pub fn fixed(centers: Vec<Point3>, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return domain("obstacle radius must be positive");
        }
        let (lo, hi) = centers.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| {
            (c.iter().fold(lo, |m, &x| m.min(x)), c.iter().fold(hi, |m, &x| m.max(x)))
        });
        // about one obstacle per cell on average
        let extent = if centers.is_empty() { 1.0 } else { (hi - lo).max(radius) };
        let cell = radius.max(extent / (centers.len().max(1) as f64).cbrt());
        let mut f = Self {
            radius,
            intensity_draw: None,
            exclusion: None,
            source: Source::Fixed,
            cell,
            centers: Vec::new(),
            cells: HashMap::new(),
        };
        for c in centers {
            let key = f.key(&c);
            f.cells.entry(key).or_default().push(f.centers.len() as u32);
            f.centers.push(c);
        }
        Ok(f)
    }

    /// Homogeneous Poisson field of the given intensity; points inside
    /// `exclusion` (center, radius) are removed.
    pub fn poisson<R: Rng + ?Sized>(
        intensity: f64,
        radius: f64,
        exclusion: Option<(Vec3, f64)>,
        rng: &mut R,
    ) -> Result<Self> {
        if !(intensity > 0.0) || !(radius > 0.0) {
            return domain("intensity and radius must be positive");
        }
        let cell = radius.max((2.0 / intensity).cbrt());
        Ok(Self {
            radius,
            intensity_draw: None,
            exclusion,
            source: Source::Poisson { intensity, seed: rng.next_u64() },
            cell,
            centers: Vec::new(),
            cells: HashMap::new(),
        })
    }

    pub fn centers(&self) -> &[Point3] {
        &self.centers
    }

    #[inline]
    fn key(&self, p: &Vec3) -> [i64; 3] {
        std::array::from_fn(|i| (p[i] / self.cell).floor() as i64)
    }

    fn ensure(&mut self, key: [i64; 3]) -> Result<()> {
        if self.cells.contains_key(&key) {
            return Ok(());
        }
        let mut ids = Vec::new();
        if let Source::Poisson { intensity, seed } = self.source {
            let h = self.cell;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(cell_stream(key));
            let n = poisson_count(intensity * h * h * h, &mut rng)?;
            for _ in 0..n {
                let p: Point3 = std::array::from_fn(|i| (key[i] as f64 + rng.random::<f64>()) * h);
                if let Some((c, r)) = self.exclusion {
                    let w = sub(&p, &c);
                    if dot(&w, &w) < r * r {
                        continue;
                    }
                }
                ids.push(self.centers.len() as u32);
                self.centers.push(p);
            }
        }
        self.cells.insert(key, ids);
        Ok(())
    }

    fn test_cell(
        &mut self,
        key: [i64; 3],
        origin: &Vec3,
        dir: &Vec3,
        skip: Option<usize>,
        best: &mut Option<(f64, usize)>,
    ) -> Result<()> {
        self.ensure(key)?;
        let r2 = self.radius * self.radius;
        let inside2 = (self.radius - INSIDE_TOL).max(0.0).powi(2);
        for &id in &self.cells[&key] {
            let id = id as usize;
            if Some(id) == skip {
                continue;
            }
            match test_sphere(origin, dir, &self.centers[id], r2, inside2) {
                SphereTest::Inside => return Err(Error::StartedInside { id }),
                SphereTest::At(s) if better(s, id, best) => *best = Some((s, id)),
                _ => {}
            }
        }
        Ok(())
    }

    /// Earliest hit within distance `window`, ignoring obstacle `skip`.
    pub fn first_hit(&mut self, origin: Vec3, dir: Vec3, window: f64, skip: Option<usize>) -> Result<Option<Hit>> {
        let h = self.cell;
        let mut key = self.key(&origin);
        let mut best = None;
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    self.test_cell([key[0] + dx, key[1] + dy, key[2] + dz], &origin, &dir, skip, &mut best)?;
                }
            }
        }
        let mut step = [0i64; 3];
        let mut t_next = [f64::INFINITY; 3];
        let mut t_delta = [f64::INFINITY; 3];
        for i in 0..3 {
            if dir[i] > 0.0 {
                step[i] = 1;
                t_next[i] = ((key[i] + 1) as f64 * h - origin[i]) / dir[i];
                t_delta[i] = h / dir[i];
            } else if dir[i] < 0.0 {
                step[i] = -1;
                t_next[i] = (key[i] as f64 * h - origin[i]) / dir[i];
                t_delta[i] = -h / dir[i];
            }
        }
        loop {
            let axis = (0..3).min_by(|&a, &b| t_next[a].total_cmp(&t_next[b])).unwrap_or(0);
            let t_exit = t_next[axis].max(0.0);
            if let Some((s, _)) = best {
                if s <= t_exit {
                    break;
                }
            }
            if t_exit > window {
                break;
            }
            key[axis] += step[axis];
            t_next[axis] += t_delta[axis];
            // only the far slab of the new neighborhood is untested
            let far = key[axis] + step[axis];
            for a in -1..=1 {
                for b in -1..=1 {
                    let mut k = key;
                    k[axis] = far;
                    k[(axis + 1) % 3] += a;
                    k[(axis + 2) % 3] += b;
                    self.test_cell(k, &origin, &dir, skip, &mut best)?;
                }
            }
        }
        Ok(best.filter(|(s, _)| *s <= window).map(|(s, id)| Hit { distance: s, id, point: axpy(s, &dir, &origin) }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Exposure {
    /// Condition the field on the start point lying outside every obstacle.
    #[default]
    Condition,
    /// No conditioning; a covered start point is reported as an error (or
    /// as a zero free flight by [`first_flight_time`]).
    Disabled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorentzParams {
    pub nu: FracOrder,
    pub rho: f64,
    pub radius: f64,
    pub c: f64,
    pub t_max: f64,
    pub exposure: Exposure,
    pub event_cap: usize,
    /// Model 2: maximum allowed c·L·t_max + R.
    pub max_reach: f64,
}

impl LorentzParams {
    pub fn new(nu: FracOrder, rho: f64, radius: f64, c: f64, t_max: f64) -> Result<Self> {
        let p =
            Self { nu, rho, radius, c, t_max, exposure: Exposure::Condition, event_cap: 10_000_000, max_reach: 1e6 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |x: f64| x > 0.0 && x.is_finite();
        if !pos(self.rho) || !pos(self.radius) || !pos(self.c) || !pos(self.t_max) {
            return domain("rho, R, c and t_max must be positive");
        }
        Ok(())
    }

    pub fn with_exposure(mut self, exposure: Exposure) -> Self {
        self.exposure = exposure;
        self
    }

    /// λ = ρ c π R².
    pub fn collision_rate(&self) -> f64 {
        self.rho * self.c * PI * self.radius * self.radius
    }

    fn excluded_volume(&self) -> f64 {
        4.0 / 3.0 * PI * self.radius.powi(3)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LorentzTrajectory {
    pub start: Vec3,
    pub speed: f64,
    pub t_max: f64,
    pub collision_times: Vec<f64>,
    /// Direction after each collision; index 0 is the initial direction.
    pub directions: Vec<Vec3>,
    pub hit_obstacle_ids: Vec<usize>,
    /// Position at each collision.
    pub hit_points: Vec<Vec3>,
    pub mixture_draw: f64,
}

impl LorentzTrajectory {
    fn segment(&self, t: f64) -> Result<usize> {
        if !(t >= 0.0) || t > self.t_max * (1.0 + 1e-12) {
            return Err(Error::BeyondHorizon { t, horizon: self.t_max });
        }
        Ok(self.collision_times.partition_point(|&x| x <= t))
    }

    pub fn position(&self, t: f64) -> Result<Vec3> {
        let i = self.segment(t)?;
        let (t0, p0) = if i == 0 { (0.0, self.start) } else { (self.collision_times[i - 1], self.hit_points[i - 1]) };
        Ok(axpy(self.speed * (t - t0), &self.directions[i], &p0))
    }

    pub fn direction(&self, t: f64) -> Result<Vec3> {
        Ok(self.directions[self.segment(t)?])
    }

    pub fn final_position(&self) -> Vec3 {
        self.position(self.t_max).expect("t_max is within the horizon")
    }

    pub fn final_direction(&self) -> Vec3 {
        *self.directions.last().expect("at least the initial direction")
    }

    /// Time of the first collision, `None` if none before t_max.
    pub fn first_flight_time(&self) -> Option<f64> {
        self.collision_times.first().copied()
    }

    pub fn n_collisions(&self) -> usize {
        self.collision_times.len()
    }

    /// Whether some obstacle was hit more than once.
    pub fn has_recollision(&self) -> bool {
        let mut ids = self.hit_obstacle_ids.clone();
        ids.sort_unstable();
        ids.windows(2).any(|w| w[0] == w[1])
    }
}

/// Runs the billiard in a given field.
pub fn run_dynamics(
    field: &mut ObstacleField,
    x0: Vec3,
    v0: Vec3,
    speed: f64,
    t_max: f64,
    event_cap: usize,
    mixture_draw: f64,
) -> Result<LorentzTrajectory> {
    let n0 = dot(&v0, &v0);
    if (n0 - 1.0).abs() > 1e-9 {
        return domain("initial direction must be a unit vector");
    }
    let mut traj = LorentzTrajectory {
        start: x0,
        speed,
        t_max,
        collision_times: Vec::new(),
        directions: vec![v0],
        hit_obstacle_ids: Vec::new(),
        hit_points: Vec::new(),
        mixture_draw,
    };
    let mut pos = x0;
    let mut dir = v0;
    let mut t = 0.0;
    let mut last = None;
    let nudge = 1e-9 * field.radius;
    loop {
        let window = (t_max - t) * speed;
        let Some(hit) = field.first_hit(pos, dir, window, last)? else { break };
        if traj.collision_times.len() >= event_cap {
            return Err(Error::EventCap { cap: event_cap });
        }
        t += hit.distance / speed;
        let c = field.centers[hit.id];
        let n = sub(&hit.point, &c);
        let nn = dot(&n, &n).sqrt();
        dir = specular_reflect(dir, [n[0] / nn, n[1] / nn, n[2] / nn]);
        traj.collision_times.push(t);
        traj.directions.push(dir);
        traj.hit_obstacle_ids.push(hit.id);
        traj.hit_points.push(hit.point);
        pos = axpy(nudge, &dir, &hit.point);
        last = Some(hit.id);
    }
    Ok(traj)
}

/// Draws L for model 1, tilted by exp(−ρ L |B_R|) when conditioning on exposure.
fn model1_mixture<R: Rng + ?Sized>(p: &LorentzParams, rng: &mut R) -> f64 {
    loop {
        let l = lamperti_sample(p.nu, rng).value;
        match p.exposure {
            Exposure::Disabled => return l,
            Exposure::Condition => {
                if rng.random::<f64>() < (-p.rho * l * p.excluded_volume()).exp() {
                    return l;
                }
            }
        }
    }
}

fn exclusion(p: &LorentzParams, x0: Vec3) -> Option<(Vec3, f64)> {
    match p.exposure {
        Exposure::Condition => Some((x0, p.radius)),
        Exposure::Disabled => None,
    }
}

/// Obstacle field and L draw of model 1 (Mittag-Leffler obstacles).
pub fn model1_field<R: Rng + ?Sized>(x0: Vec3, p: &LorentzParams, rng: &mut R) -> Result<ObstacleField> {
    p.validate()?;
    let l = model1_mixture(p, rng);
    let mut f = ObstacleField::poisson(p.rho * l, p.radius, exclusion(p, x0), rng)?;
    f.intensity_draw = Some(l);
    Ok(f)
}

pub fn simulate_lorentz_model1<R: Rng + ?Sized>(
    x0: Vec3,
    v0: Vec3,
    params: &LorentzParams,
    rng: &mut R,
) -> Result<LorentzTrajectory> {
    let mut field = model1_field(x0, params, rng)?;
    let l = field.intensity_draw.unwrap_or(1.0);
    run_dynamics(&mut field, x0, v0, params.c, params.t_max, params.event_cap, l)
}

/// Model 2 with the speed factor `l` given.
pub fn simulate_lorentz_model2_given<R: Rng + ?Sized>(
    x0: Vec3,
    v0: Vec3,
    params: &LorentzParams,
    l: f64,
    rng: &mut R,
) -> Result<LorentzTrajectory> {
    params.validate()?;
    let speed = params.c * l;
    let reach = speed * params.t_max + params.radius;
    if reach > params.max_reach {
        return Err(Error::ReachCap { reach, max: params.max_reach });
    }
    let mut field = ObstacleField::poisson(params.rho, params.radius, exclusion(params, x0), rng)?;
    run_dynamics(&mut field, x0, v0, speed, params.t_max, params.event_cap, l)
}

pub fn simulate_lorentz_model2<R: Rng + ?Sized>(
    x0: Vec3,
    v0: Vec3,
    params: &LorentzParams,
    rng: &mut R,
) -> Result<LorentzTrajectory> {
    let l = lamperti_sample(params.nu, rng).value;
    simulate_lorentz_model2_given(x0, v0, params, l, rng)
}

/// First free-flight time of model 1, up to `params.t_max`
/// (`f64::INFINITY` beyond). With exposure conditioning disabled a covered
/// start gives 0.
pub fn first_flight_time<R: Rng + ?Sized>(x0: Vec3, v0: Vec3, params: &LorentzParams, rng: &mut R) -> Result<f64> {
    let mut field = model1_field(x0, params, rng)?;
    match field.first_hit(x0, v0, params.c * params.t_max, None) {
        Ok(Some(h)) => Ok(h.distance / params.c),
        Ok(None) => Ok(f64::INFINITY),
        Err(Error::StartedInside { .. }) if params.exposure == Exposure::Disabled => Ok(0.0),
        Err(e) => Err(e),
    }
}

/// P(T > t) for the model-1 free flight, t > 0.
pub fn free_flight_survival(nu: FracOrder, rho: f64, radius: f64, c: f64, t: f64) -> Result<f64> {
    if !(rho > 0.0 && radius > 0.0 && c > 0.0 && t >= 0.0) {
        return domain("free-flight parameters must be positive");
    }
    let vol = PI * radius * radius * c * t + 4.0 / 3.0 * PI * radius.powi(3);
    mittag_leffler(nu, -(rho * vol).powf(nu.get()))
}

/// P(T = 0): the start point is covered by an obstacle.
pub fn free_flight_atom(nu: FracOrder, rho: f64, radius: f64) -> Result<f64> {
    if !(rho > 0.0 && radius > 0.0) {
        return domain("free-flight parameters must be positive");
    }
    let vol = 4.0 / 3.0 * PI * radius.powi(3);
    Ok(1.0 - mittag_leffler(nu, -(rho * vol).powf(nu.get()))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn head_on_and_miss() {
        let h = ray_sphere_first_hit([0.0; 3], [1.0, 0.0, 0.0], &[[5.0, 0.0, 0.0]], 1.0, 100.0).unwrap().unwrap();
        assert!((h.distance - 4.0).abs() < 1e-15);
        assert_eq!(h.point, [4.0, 0.0, 0.0]);
        assert!(ray_sphere_first_hit([0.0; 3], [1.0, 0.0, 0.0], &[[0.0, 5.0, 0.0]], 1.0, 100.0).unwrap().is_none());
        assert!(ray_sphere_first_hit([0.0; 3], [1.0, 0.0, 0.0], &[[5.0, 0.0, 0.0]], 1.0, 3.0).unwrap().is_none());
    }

    #[test]
    fn grazing_rays() {
        let r = 1.0;
        let near = ray_sphere_first_hit([0.0; 3], [1.0, 0.0, 0.0], &[[5.0, r * (1.0 - 1e-13), 0.0]], r, 10.0).unwrap();
        assert!(near.is_some());
        let far = ray_sphere_first_hit([0.0; 3], [1.0, 0.0, 0.0], &[[5.0, r * (1.0 + 1e-13), 0.0]], r, 10.0).unwrap();
        assert!(far.is_none());
    }

    #[test]
    fn inside_is_reported() {
        let e = ray_sphere_first_hit([0.0; 3], [1.0, 0.0, 0.0], &[[9.0, 9.0, 9.0], [0.5, 0.0, 0.0]], 1.0, 10.0);
        assert_eq!(e.unwrap_err(), Error::StartedInside { id: 1 });
    }

    #[test]
    fn ties_go_to_lowest_id() {
        let centers = [[5.0, 0.5, 0.0], [5.0, -0.5, 0.0]];
        let h = ray_sphere_first_hit([0.0; 3], [1.0, 0.0, 0.0], &centers, 1.0, 10.0).unwrap().unwrap();
        assert_eq!(h.id, 0);
        let swapped = [centers[1], centers[0]];
        let h = ray_sphere_first_hit([0.0; 3], [1.0, 0.0, 0.0], &swapped, 1.0, 10.0).unwrap().unwrap();
        assert_eq!(h.id, 0);
    }

    #[test]
    fn reflections() {
        assert_eq!(specular_reflect([1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]), [-1.0, 0.0, 0.0]);
        assert_eq!(specular_reflect([1.0, 0.0, 0.0], [0.0, 1.0, 0.0]), [1.0, 0.0, 0.0]);
    }

    #[test]
    fn fixed_field_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let centers: Vec<Point3> =
            (0..400).map(|_| std::array::from_fn(|_| 20.0 * rng.random::<f64>() - 10.0)).collect();
        let mut field = ObstacleField::fixed(centers.clone(), 0.3).unwrap();
        for _ in 0..200 {
            let o: Vec3 = std::array::from_fn(|_| 4.0 * rng.random::<f64>() - 2.0);
            let mut d: Vec3 = std::array::from_fn(|_| rng.random::<f64>() - 0.5);
            let n = dot(&d, &d).sqrt();
            d.iter_mut().for_each(|x| *x /= n);
            let a = ray_sphere_first_hit(o, d, &centers, 0.3, 15.0);
            let b = field.first_hit(o, d, 15.0, None);
            match (a, b) {
                (Ok(a), Ok(b)) => assert_eq!(a.map(|h| h.id), b.map(|h| h.id)),
                (Err(_), Err(_)) => {}
                (a, b) => panic!("disagreement {a:?} {b:?}"),
            }
        }
    }

    #[test]
    fn empty_field_is_free_motion() {
        let mut field = ObstacleField::fixed(Vec::new(), 0.1).unwrap();
        let tr = run_dynamics(&mut field, [1.0, 2.0, 3.0], [0.0, 1.0, 0.0], 2.0, 3.0, 10, 1.0).unwrap();
        assert_eq!(tr.n_collisions(), 0);
        assert_eq!(tr.final_position(), [1.0, 8.0, 3.0]);
    }

    #[test]
    fn atom_plus_survival_is_one() {
        let nu = FracOrder::new(0.5).unwrap();
        let s = free_flight_survival(nu, 3.0, 0.2, 1.0, 0.0).unwrap();
        let a = free_flight_atom(nu, 3.0, 0.2).unwrap();
        assert!((s + a - 1.0).abs() < 1e-12);
    }
}
