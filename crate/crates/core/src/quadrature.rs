//! Adaptive Gauss-Legendre quadrature in one dimension and over disks with
//! circular holes.

use std::f64::consts::{PI, TAU};
use std::sync::OnceLock;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Circle, DiskWithHoles};
use crate::rates::KahanSum;

const ORDER: usize = 12;
const MAX_DEPTH: usize = 40;

/// Integral value with an a-posteriori error estimate.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Quad {
    pub value: f64,
    pub error: f64,
}

impl Quad {
    fn add(self, other: Quad) -> Quad {
        Quad { value: self.value + other.value, error: self.error + other.error }
    }
}

/// Nodes and weights of the `n`-point rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else { p1 };
            dp = n as f64 * (z * p - p0) / (z * z - 1.0);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

fn rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(ORDER))
}

fn fixed<F: Fn(f64) -> Result<f64>>(f: &F, a: f64, b: f64) -> Result<f64> {
    let (x, w) = rule();
    let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
    let mut s = KahanSum::default();
    for (xi, wi) in x.iter().zip(w) {
        s.add(wi * f(m + h * xi)?);
    }
    Ok(s.value() * h)
}

/// Adaptive bisection; accepts a panel when the two-half estimate agrees
/// with the whole-panel estimate to its share of the tolerance.
pub fn integrate<F: Fn(f64) -> Result<f64>>(f: &F, a: f64, b: f64, rel: f64, abs: f64) -> Result<Quad> {
    if a == b {
        return Ok(Quad::default());
    }
    let whole = fixed(f, a, b)?;
    let scale = whole.abs();
    let mut stack = vec![(a, b, whole, 0usize)];
    let mut value = KahanSum::default();
    let mut error = 0.0;
    let len = (b - a).abs();
    let mut global = scale;
    while let Some((lo, hi, est, depth)) = stack.pop() {
        let mid = 0.5 * (lo + hi);
        let left = fixed(f, lo, mid)?;
        let right = fixed(f, mid, hi)?;
        let refined = left + right;
        let diff = (refined - est).abs();
        global = global.max(refined.abs());
        let share = (hi - lo).abs() / len;
        if diff <= rel.max(0.0) * global * share || diff <= abs * share || depth >= MAX_DEPTH {
            if depth >= MAX_DEPTH && !refined.is_finite() {
                return Err(Error::Numeric("quadrature diverged".into()));
            }
            value.add(refined);
            error += diff;
        } else {
            stack.push((mid, hi, right, depth + 1));
            stack.push((lo, mid, left, depth + 1));
        }
    }
    let v = value.value();
    if !v.is_finite() {
        return Err(Error::Numeric("non-finite integral".into()));
    }
    Ok(Quad { value: v, error })
}

/// Integral over consecutive breakpoints, panels evaluated in parallel and
/// summed in order.
pub fn integrate_breaks<F>(f: &F, breaks: &[f64], rel: f64, abs: f64) -> Result<Quad>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    let parts: Vec<Result<Quad>> = breaks
        .par_windows(2)
        .map(|w| integrate(f, w[0], w[1], rel, abs / (breaks.len().max(2) - 1) as f64))
        .collect();
    let mut total = Quad::default();
    let mut sum = KahanSum::default();
    for p in parts {
        let q = p?;
        sum.add(q.value);
        total = total.add(q);
    }
    total.value = sum.value();
    Ok(total)
}

/// Periodic trapezoid rule with doubling until successive values agree.
pub fn integrate_periodic<F: Fn(f64) -> Result<f64>>(f: &F, rel: f64) -> Result<Quad> {
    let eval = |n: usize| -> Result<f64> {
        let mut s = KahanSum::default();
        for k in 0..n {
            s.add(f(TAU * k as f64 / n as f64)?);
        }
        Ok(s.value() * TAU / n as f64)
    };
    let mut n = 64;
    let mut prev = eval(n)?;
    loop {
        n *= 2;
        let cur = eval(n)?;
        let diff = (cur - prev).abs();
        if diff <= rel * cur.abs().max(f64::MIN_POSITIVE) || n >= 1 << 20 {
            return Ok(Quad { value: cur, error: diff });
        }
        prev = cur;
    }
}

/// Default relative tolerance used by energy and volume integrals.
pub const REGION_REL: f64 = 1e-10;

fn radial<F>(f: &F, center: Complex64, theta: f64, lo: f64, hi: f64, rel: f64) -> Result<f64>
where
    F: Fn(Complex64) -> Result<f64>,
{
    let e = Complex64::from_polar(1.0, theta);
    if lo > 0.0 {
        // log-radial variable resolves scale-separated annuli
        let g = |s: f64| {
            let r = s.exp();
            Ok(f(center + e * r)? * r * r)
        };
        Ok(integrate(&g, lo.ln(), hi.ln(), rel, 0.0)?.value)
    } else {
        let g = |r: f64| Ok(f(center + e * r)? * r);
        Ok(integrate(&g, lo, hi, rel, 0.0)?.value)
    }
}

/// Tangent angles of `hole` seen from `center`, when the hole does not
/// contain `center`.
fn tangent_angles(center: Complex64, hole: &Circle) -> Vec<f64> {
    let d = hole.center - center;
    let dist = d.norm();
    if dist <= hole.radius {
        return Vec::new();
    }
    let a = d.arg();
    let s = (hole.radius / dist).asin();
    vec![a - s, a, a + s]
}

/// Radial intervals of the ray at angle `theta` from `center` lying inside
/// the outer radius and outside every hole.
fn ray_intervals(center: Complex64, outer: f64, holes: &[Circle], theta: f64) -> Vec<(f64, f64)> {
    let e = Complex64::from_polar(1.0, -theta);
    let mut cuts: Vec<(f64, f64)> = Vec::new();
    for h in holes {
        let d = h.center - center;
        let b = (d * e).re;
        let q = d.norm_sqr() - h.radius * h.radius;
        let disc = b * b - q;
        if disc <= 0.0 {
            continue;
        }
        let sq = disc.sqrt();
        let (r0, r1) = (b - sq, b + sq);
        if r1 <= 0.0 {
            continue;
        }
        cuts.push((r0.max(0.0), r1.min(outer)));
    }
    cuts.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut out = Vec::new();
    let mut start = 0.0;
    for (c0, c1) in cuts {
        if c0 > start {
            out.push((start, c0));
        }
        start = start.max(c1);
    }
    if start < outer {
        out.push((start, outer));
    }
    out
}

fn collar_radius(region: &DiskWithHoles, k: usize) -> f64 {
    let h = &region.holes[k];
    let mut gap = region.outer.radius - (h.center - region.outer.center).norm() - h.radius;
    for (j, o) in region.holes.iter().enumerate() {
        if j != k {
            gap = gap.min((h.center - o.center).norm() - h.radius - o.radius);
        }
    }
    h.radius + 0.45 * gap
}

/// `∫_region f dA`. Each hole is surrounded by a concentric log-polar collar;
/// the rest is integrated in polar coordinates about the outer center with
/// the hole chords cut out exactly.
pub fn integrate_region<F>(region: &DiskWithHoles, f: &F, rel: f64) -> Result<Quad>
where
    F: Fn(Complex64) -> Result<f64> + Sync,
{
    let mut total = Quad::default();
    let mut sum = KahanSum::default();
    let mut cut_holes = Vec::with_capacity(region.holes.len());
    for k in 0..region.holes.len() {
        let h = region.holes[k];
        let rc = collar_radius(region, k);
        if !(rc > h.radius) {
            return Err(Error::OutsideDomain("hole touches another boundary circle".into()));
        }
        let g = |th: f64| radial(f, h.center, th, h.radius, rc, rel);
        let q = integrate_breaks(&g, &[0.0, 0.5 * PI, PI, 1.5 * PI, TAU], rel, 0.0)?;
        sum.add(q.value);
        total = total.add(q);
        cut_holes.push(Circle::new(h.center, rc));
    }
    let c = region.outer.center;
    let r = region.outer.radius;
    let mut breaks = vec![0.0, 0.5 * PI, PI, 1.5 * PI, TAU];
    for h in &cut_holes {
        for a in tangent_angles(c, h) {
            breaks.push(a.rem_euclid(TAU));
        }
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
    let g = |th: f64| -> Result<f64> {
        let mut s = KahanSum::default();
        for (lo, hi) in ray_intervals(c, r, &cut_holes, th) {
            s.add(radial(f, c, th, lo, hi, rel)?);
        }
        Ok(s.value())
    };
    let q = integrate_breaks(&g, &breaks, rel, 0.0)?;
    sum.add(q.value);
    total = total.add(q);
    total.value = sum.value();
    Ok(total)
}
