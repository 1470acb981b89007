//! Adaptive Gauss–Kronrod (7/15) quadrature with breakpoints and a
//! compactifying map for a semi-infinite last segment.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { abs_tol: 1e-10, rel_tol: 1e-10, max_subdivisions: 2000 }
    }
}

impl QuadratureSpec {
    pub fn new(abs_tol: f64, rel_tol: f64, max_subdivisions: usize) -> Result<Self> {
        if !(abs_tol > 0.0) || !(rel_tol > 0.0) || max_subdivisions == 0 {
            return domain("quadrature tolerances must be positive");
        }
        Ok(Self { abs_tol, rel_tol, max_subdivisions })
    }

    /// Purely relative control, for integrals whose magnitude is unknown.
    pub fn relative(rel_tol: f64) -> Self {
        Self { abs_tol: 1e-300, rel_tol, max_subdivisions: 4000 }
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5, 7).
const WG: [f64; 4] =
    [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

#[derive(Clone, Copy)]
enum Map {
    Identity,
    /// x = base + max(|base|, 1)·s/(1-s) for s in [0, 1).
    Tail(f64),
}

struct Segment {
    a: f64,
    b: f64,
    map: Map,
    value: Vec<f64>,
    err: f64,
    splittable: bool,
}

fn rule<F: FnMut(f64, &mut [f64])>(
    f: &mut F,
    a: f64,
    b: f64,
    map: Map,
    dim: usize,
    buf: &mut [f64],
) -> Result<(Vec<f64>, f64)> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut kron = vec![0.0; dim];
    let mut gauss = vec![0.0; dim];
    let mut eval = |s: f64, buf: &mut [f64]| -> Result<()> {
        buf.iter_mut().for_each(|v| *v = 0.0);
        match map {
            Map::Identity => f(s, buf),
            Map::Tail(base) => {
                let one_minus = 1.0 - s;
                if one_minus <= 0.0 {
                    return Ok(());
                }
                let scale = base.abs().max(1.0);
                let x = base + scale * s / one_minus;
                f(x, buf);
                let jac = scale / (one_minus * one_minus);
                buf.iter_mut().for_each(|v| *v *= jac);
            }
        }
        if buf.iter().any(|v| !v.is_finite()) {
            return domain(format!("integrand not finite at {s}"));
        }
        Ok(())
    };
    // values[j * dim + k]: node j in the order of XGK (both signs), component k
    let mut values = Vec::with_capacity(15 * dim);
    let mut weights = Vec::with_capacity(15);
    for (i, (&x, &wk)) in XGK.iter().zip(WGK.iter()).enumerate() {
        let nodes: &[f64] = if x == 0.0 { &[0.0] } else { &[1.0, -1.0] };
        for &sign in nodes {
            eval(center + sign * half * x, buf)?;
            for k in 0..dim {
                kron[k] += wk * buf[k];
                if i % 2 == 1 {
                    gauss[k] += WG[i / 2] * buf[k];
                }
            }
            values.extend_from_slice(buf);
            weights.push(wk);
        }
    }
    // error heuristic of QUADPACK's qk15
    let mut err = 0.0f64;
    for k in 0..dim {
        let mean = 0.5 * kron[k];
        let mut resabs = 0.0;
        let mut resasc = 0.0;
        for (j, &w) in weights.iter().enumerate() {
            let v = values[j * dim + k];
            resabs += w * v.abs();
            resasc += w * (v - mean).abs();
        }
        resabs *= half.abs();
        resasc *= half.abs();
        kron[k] *= half;
        gauss[k] *= half;
        let mut e = (kron[k] - gauss[k]).abs();
        if resasc != 0.0 && e != 0.0 {
            e = resasc * (200.0 * e / resasc).powf(1.5).min(1.0);
        }
        if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
            e = e.max(50.0 * f64::EPSILON * resabs);
        }
        err = err.max(e);
    }
    Ok((kron, err))
}

/// Integrates a vector-valued `f` over consecutive pieces `points[0]..points[1]..`;
/// the last point may be `f64::INFINITY`.
pub fn integrate_vec<F: FnMut(f64, &mut [f64])>(
    mut f: F,
    points: &[f64],
    dim: usize,
    spec: &QuadratureSpec,
) -> Result<Vec<f64>> {
    if points.len() < 2 {
        return domain("need at least two integration points");
    }
    let mut buf = vec![0.0; dim];
    let mut segments = Vec::with_capacity(points.len() + 16);
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        if !(b > a) || a.is_infinite() {
            return domain("integration points must be finite and increasing");
        }
        let (lo, hi, map) = if b.is_infinite() { (0.0, 1.0, Map::Tail(a)) } else { (a, b, Map::Identity) };
        let (value, err) = rule(&mut f, lo, hi, map, dim, &mut buf)?;
        segments.push(Segment { a: lo, b: hi, map, value, err, splittable: true });
    }
    loop {
        let mut total = vec![0.0; dim];
        let mut err = 0.0;
        for s in &segments {
            total.iter_mut().zip(&s.value).for_each(|(t, v)| *t += v);
            err += s.err;
        }
        let scale = total.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let target = spec.abs_tol.max(spec.rel_tol * scale);
        if err <= target {
            return Ok(total);
        }
        let worst = segments
            .iter()
            .enumerate()
            .filter(|(_, s)| s.splittable)
            .max_by(|x, y| x.1.err.total_cmp(&y.1.err))
            .map(|(i, _)| i);
        let Some(i) = worst else {
            return Err(Error::Quadrature { achieved: err, requested: target });
        };
        if segments.len() >= spec.max_subdivisions {
            return Err(Error::Quadrature { achieved: err, requested: target });
        }
        let seg = segments.swap_remove(i);
        let mid = 0.5 * (seg.a + seg.b);
        if !(mid > seg.a && mid < seg.b) || (seg.b - seg.a) < 1e-15 * seg.a.abs().max(seg.b.abs()) {
            segments.push(Segment { splittable: false, ..seg });
            continue;
        }
        let (v1, e1) = rule(&mut f, seg.a, mid, seg.map, dim, &mut buf)?;
        let (v2, e2) = rule(&mut f, mid, seg.b, seg.map, dim, &mut buf)?;
        segments.push(Segment { a: seg.a, b: mid, map: seg.map, value: v1, err: e1, splittable: true });
        segments.push(Segment { a: mid, b: seg.b, map: seg.map, value: v2, err: e2, splittable: true });
    }
}

/// Scalar convenience wrapper over [`integrate_vec`].
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, points: &[f64], spec: &QuadratureSpec) -> Result<f64> {
    integrate_vec(|x, out| out[0] = f(x), points, 1, spec).map(|v| v[0])
}

/// Sorts, deduplicates and clips candidate breakpoints into `(lo, hi)`,
/// returning the full point list `lo, .., hi`.
pub fn breakpoints(lo: f64, hi: f64, candidates: &[f64]) -> Vec<f64> {
    let mut pts: Vec<f64> = candidates.iter().copied().filter(|&x| x.is_finite() && x > lo && x < hi).collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1e-300));
    let mut out = Vec::with_capacity(pts.len() + 2);
    out.push(lo);
    out.extend(pts);
    out.push(hi);
    out
}
