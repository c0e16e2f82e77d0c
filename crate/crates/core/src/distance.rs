//! Distance to the boundary of a generalized neck domain under the
//! piecewise neck/ghost weight, in closed form and as a grid shortest path.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::decomposition::{DecompositionGraph, PieceKind};
use crate::error::{Error, Result};
use crate::geometry::{ConformalWeight, DiskWithHoles};
use crate::metrics::BarWeight;
use crate::quadrature::integrate;

/// `min(ln(outer/|z-c|), ln(|z-c|/inner))`: the flat-cylinder distance.
pub fn annulus_distance(z: Complex64, center: Complex64, inner: f64, outer: f64) -> Result<f64> {
    let r = (z - center).norm();
    if r < inner || r > outer {
        return Err(Error::OutsideDomain(format!("|z - c| = {r} outside [{inner}, {outer}]")));
    }
    Ok((outer / r).ln().min((r / inner).ln()))
}

/// Largest straight-line weight length from a hole of a ghost piece to its
/// outer circle, maximised over all ghost pieces.
pub fn measure_kappa(g: &DecompositionGraph, t: f64) -> Result<f64> {
    let mut kappa: f64 = 0.0;
    for gh in g.ghosts() {
        let fr = g.frame(gh.piece, t);
        let w = g.ghost_weight(&fr)?;
        let big = fr.region.outer.radius;
        for h in &fr.region.holes {
            let dir = if h.center.norm() > 0.0 { h.center / h.center.norm() } else { Complex64::new(1.0, 0.0) };
            // exit point of the ray from the hole center through the outer circle
            let b = (h.center * dir.conj()).re;
            let s_out = -b + (b * b - h.center.norm_sqr() + big * big).sqrt();
            let start = h.center + dir * h.radius;
            let end = h.center + dir * s_out;
            let len = (end - start).norm();
            let f = |s: f64| Ok(w.weight(start + (end - start) * s)?.sqrt() * len);
            kappa = kappa.max(integrate(&f, 0.0, 1.0, 1e-10, 0.0)?.value);
        }
    }
    Ok(kappa)
}

/// Closed-form distance on one neck domain: each simple neck is a flat
/// cylinder of length `ln(R/rho)`, each ghost piece a star whose arms cost
/// `kappa / 2`.
#[derive(Clone, Debug)]
pub struct DistanceField {
    pub nd: usize,
    pub t: f64,
    pub kappa: f64,
    circle_d: HashMap<usize, f64>,
    ghost_d: HashMap<usize, f64>,
}

impl DistanceField {
    pub fn analytic(g: &DecompositionGraph, nd: usize, t: f64, kappa: Option<f64>) -> Result<Self> {
        let kappa = match kappa {
            Some(k) => k,
            None => measure_kappa(g, t)?,
        };
        let dom = &g.neck_domains()[nd];
        let circles = g.circles();
        // nodes: circles first, then ghost centres
        let mut index: HashMap<usize, usize> = HashMap::new();
        for &p in &dom.pieces {
            let piece = g.piece(p);
            for c in std::iter::once(piece.outer).chain(piece.holes.iter().copied()) {
                let n = index.len();
                index.entry(c).or_insert(n);
            }
        }
        let nc = index.len();
        let mut edges: Vec<(usize, usize, f64)> = Vec::new();
        let mut ghost_nodes: Vec<usize> = Vec::new();
        for &p in &dom.pieces {
            let piece = g.piece(p);
            match piece.kind {
                PieceKind::SimpleNeck => {
                    let len = circles[piece.outer].radius.ln_at(t) - circles[piece.holes[0]].radius.ln_at(t);
                    edges.push((index[&piece.outer], index[&piece.holes[0]], len));
                }
                PieceKind::GhostBubbleDomain => {
                    let centre = nc + ghost_nodes.len();
                    ghost_nodes.push(piece.ghost.expect("ghost piece"));
                    for c in std::iter::once(piece.outer).chain(piece.holes.iter().copied()) {
                        edges.push((centre, index[&c], 0.5 * kappa));
                    }
                }
                PieceKind::BubbleDomain => {}
            }
        }
        let total = nc + ghost_nodes.len();

        let mut dist = vec![f64::INFINITY; total];
        for c in std::iter::once(dom.outer).chain(dom.leaf_circles.iter().copied()) {
            if let Some(&i) = index.get(&c) {
                dist[i] = 0.0;
            }
        }
        // Bellman-Ford style relaxation on a graph with a handful of nodes
        for _ in 0..total {
            let mut changed = false;
            for &(a, b, l) in &edges {
                if dist[a] + l < dist[b] {
                    dist[b] = dist[a] + l;
                    changed = true;
                }
                if dist[b] + l < dist[a] {
                    dist[a] = dist[b] + l;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        let circle_d = index.iter().map(|(&c, &i)| (c, dist[i])).collect();
        let ghost_d = ghost_nodes.iter().enumerate().map(|(k, &gh)| (gh, dist[nc + k])).collect();
        Ok(DistanceField { nd, t, kappa, circle_d, ghost_d })
    }

    /// Distance of `z`, given in the frame of `piece`.
    pub fn distance(&self, g: &DecompositionGraph, piece: usize, z: Complex64) -> Result<f64> {
        let p = g.piece(piece);
        if p.neck_domain != Some(self.nd) {
            return Err(Error::OutsideDomain(format!("piece `{}` is not in this neck domain", p.label)));
        }
        match p.kind {
            PieceKind::SimpleNeck => {
                let c = g.circles();
                let r = z.norm();
                let (lo, hi) = (c[p.holes[0]].radius.ln_at(self.t), c[p.outer].radius.ln_at(self.t));
                let u = r.ln();
                let tol = 1e-9 * (hi - lo).abs().max(1.0);
                if u < lo - tol || u > hi + tol {
                    return Err(Error::OutsideDomain(format!("{z} outside `{}`", p.label)));
                }
                let u = u.clamp(lo, hi);
                Ok((hi - u + self.circle_d[&p.outer]).min(u - lo + self.circle_d[&p.holes[0]]))
            }
            PieceKind::GhostBubbleDomain => {
                let gh = p.ghost.expect("ghost piece");
                Ok(0.5 * self.kappa + self.ghost_d[&gh])
            }
            PieceKind::BubbleDomain => Err(Error::KindMismatch("neck or ghost piece")),
        }
    }

    /// Distance of `z` given relative to the neck-domain center.
    pub fn distance_in_domain(&self, g: &DecompositionGraph, z: Complex64) -> Result<f64> {
        let dom = &g.neck_domains()[self.nd];
        let mut best: Option<(usize, Complex64, f64)> = None;
        for &p in &dom.pieces {
            let fr = g.frame(p, self.t);
            let shift = (&fr.anchor - &dom.center).evaluate(self.t);
            let local = z - shift;
            if fr.region.contains(local) {
                // prefer the innermost containing piece near shared circles
                let size = fr.region.outer.radius;
                if best.is_none_or(|(_, _, s)| size < s) {
                    best = Some((p, local, size));
                }
            }
        }
        let (p, local, _) = best.ok_or_else(|| Error::OutsideDomain(format!("{z} outside the neck domain")))?;
        self.distance(g, p, local)
    }
}

fn stencil() -> Vec<(i64, i64)> {
    fn gcd(a: i64, b: i64) -> i64 {
        if b == 0 { a } else { gcd(b, a % b) }
    }
    let mut out = Vec::new();
    for a in -3i64..=3 {
        for b in -3i64..=3 {
            if (a, b) != (0, 0) && gcd(a.abs(), b.abs()) == 1 {
                out.push((a, b));
            }
        }
    }
    out
}

/// Smallest `s` in `(0, 1]` at which `p + s (q - p)` leaves the region.
fn first_exit(region: &DiskWithHoles, p: Complex64, q: Complex64) -> Option<f64> {
    let d = q - p;
    let dd = d.norm_sqr();
    let mut best: Option<f64> = None;
    let mut take = |s: f64| {
        if s > 0.0 && s <= 1.0 && best.is_none_or(|b| s < b) {
            best = Some(s);
        }
    };
    let o = &region.outer;
    let m = p - o.center;
    let b = (m * d.conj()).re;
    let c = m.norm_sqr() - o.radius * o.radius;
    let disc = b * b - dd * c;
    if disc >= 0.0 {
        take((-b + disc.sqrt()) / dd);
    }
    for h in &region.holes {
        let m = p - h.center;
        let b = (m * d.conj()).re;
        let c = m.norm_sqr() - h.radius * h.radius;
        let disc = b * b - dd * c;
        if disc > 0.0 {
            take((-b - disc.sqrt()) / dd);
        }
    }
    best
}

fn segment_length(weight: &dyn ConformalWeight, p: Complex64, q: Complex64) -> Result<f64> {
    let m = 0.5 * (p + q);
    let s = weight.weight(p)?.sqrt() + 4.0 * weight.weight(m)?.sqrt() + weight.weight(q)?.sqrt();
    Ok((q - p).norm() * s / 6.0)
}

/// Boundary distance of `z` by Dijkstra on a square grid with a
/// 32-direction stencil; edges crossing a boundary circle are clipped there.
pub fn distance_numeric_region(
    region: &DiskWithHoles,
    weight: &dyn ConformalWeight,
    z: Complex64,
    resolution: usize,
) -> Result<f64> {
    if !region.contains(z) {
        return Err(Error::OutsideDomain(format!("{z}")));
    }
    let n = resolution.max(2);
    let big = region.outer.radius;
    let h = 2.0 * big / n as f64;
    let mut gap = f64::INFINITY;
    for (i, a) in region.holes.iter().enumerate() {
        gap = gap.min(big - (a.center - region.outer.center).norm() - a.radius);
        for b in &region.holes[i + 1..] {
            gap = gap.min((a.center - b.center).norm() - a.radius - b.radius);
        }
    }
    if gap < 2.0 * h {
        return Err(Error::TooCoarse(format!("boundary gap {gap:.3e} below two cells of size {h:.3e}")));
    }
    let side = n + 1;
    let origin = region.outer.center - Complex64::new(big, big);
    let pos = |i: usize, j: usize| origin + Complex64::new(i as f64 * h, j as f64 * h);
    let inside: Vec<bool> = (0..side * side).into_par_iter().map(|k| region.contains(pos(k % side, k / side))).collect();
    let sw: Vec<f64> = (0..side * side)
        .into_par_iter()
        .map(|k| if inside[k] { weight.weight(pos(k % side, k / side)).map(f64::sqrt).unwrap_or(f64::NAN) } else { f64::NAN })
        .collect();
    let st = stencil();
    let inward = 1.0 - 1e-9;

    // seeds from edges clipped at the boundary
    let seeds: Vec<Result<f64>> = (0..side * side)
        .into_par_iter()
        .map(|k| {
            if !inside[k] {
                return Ok(f64::INFINITY);
            }
            let p = pos(k % side, k / side);
            let mut best = f64::INFINITY;
            for &(a, b) in &st {
                let q = p + Complex64::new(a as f64 * h, b as f64 * h);
                if let Some(s) = first_exit(region, p, q) {
                    best = best.min(segment_length(weight, p, p + (q - p) * (s * inward))?);
                }
            }
            Ok(best)
        })
        .collect();
    let mut dist = Vec::with_capacity(side * side);
    for s in seeds {
        dist.push(s?);
    }
    let mut heap: BinaryHeap<Reverse<(u64, usize)>> =
        dist.iter().enumerate().filter(|(_, d)| d.is_finite()).map(|(k, d)| Reverse((d.to_bits(), k))).collect();
    while let Some(Reverse((bits, k))) = heap.pop() {
        let du = f64::from_bits(bits);
        if du > dist[k] {
            continue;
        }
        let (i, j) = ((k % side) as i64, (k / side) as i64);
        let p = pos(i as usize, j as usize);
        for &(a, b) in &st {
            let (ni, nj) = (i + a, j + b);
            if ni < 0 || nj < 0 || ni >= side as i64 || nj >= side as i64 {
                continue;
            }
            let v = nj as usize * side + ni as usize;
            if !inside[v] {
                continue;
            }
            let q = pos(ni as usize, nj as usize);
            if first_exit(region, p, q).is_some() {
                continue;
            }
            let mid = weight.weight(0.5 * (p + q))?.sqrt();
            let cost = (q - p).norm() * (sw[k] + 4.0 * mid + sw[v]) / 6.0;
            if du + cost < dist[v] {
                dist[v] = du + cost;
                heap.push(Reverse((dist[v].to_bits(), v)));
            }
        }
    }

    let mut best = f64::INFINITY;
    for &(a, b) in &st {
        let q = z + Complex64::new(a as f64 * h, b as f64 * h);
        if let Some(s) = first_exit(region, z, q) {
            best = best.min(segment_length(weight, z, z + (q - z) * (s * inward))?);
        }
    }
    let fi = ((z - origin).re / h).round() as i64;
    let fj = ((z - origin).im / h).round() as i64;
    for dj in -3..=3 {
        for di in -3..=3 {
            let (i, j) = (fi + di, fj + dj);
            if i < 0 || j < 0 || i >= side as i64 || j >= side as i64 {
                continue;
            }
            let v = j as usize * side + i as usize;
            if !inside[v] || !dist[v].is_finite() {
                continue;
            }
            let q = pos(i as usize, j as usize);
            if first_exit(region, z, q).is_some() {
                continue;
            }
            best = best.min(dist[v] + segment_length(weight, z, q)?);
        }
    }
    if !best.is_finite() {
        return Err(Error::Numeric("grid point unreachable from the boundary".into()));
    }
    Ok(best)
}

/// Grid distance on a whole neck domain; `z` relative to its center.
pub fn distance_numeric(g: &DecompositionGraph, nd: usize, t: f64, z: Complex64, resolution: usize) -> Result<f64> {
    let dom = &g.neck_domains()[nd];
    let c = g.circles();
    let rel = |k: usize| crate::geometry::Circle::new((&c[k].center - &dom.center).evaluate(t), c[k].radius.evaluate(t));
    let region = DiskWithHoles { outer: rel(dom.outer), holes: dom.leaf_circles.iter().map(|&k| rel(k)).collect() };
    let bar = BarWeight::new(g, nd, &dom.center, t)?;
    distance_numeric_region(&region, &bar, z, resolution)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bubble::{build_tree, Bubble};
    use crate::decomposition::{decompose, NeckWeight};
    use crate::rates::{Rate, RateExpr, Scale, Q};

    fn origin() -> Complex64 {
        Complex64::new(0.0, 0.0)
    }

    #[test]
    fn stencil_has_32_primitive_directions() {
        assert_eq!(stencil().len(), 32);
    }

    #[test]
    fn annulus_examples() {
        let d = annulus_distance(Complex64::new(0.1, 0.0), origin(), 1e-3, 1.0).unwrap();
        assert!((d - 10f64.ln()).abs() < 1e-12);
        assert_eq!(annulus_distance(Complex64::new(0.0, 1.0), origin(), 1e-3, 1.0).unwrap(), 0.0);
        let g = annulus_distance(Complex64::new(1e-3f64.sqrt(), 0.0), origin(), 1e-3, 1.0).unwrap();
        assert!((g - 0.5 * 1e3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn single_neck_field_matches_cylinder() {
        let b = Bubble::new("a", RateExpr::zero(), Scale::new(1.0, Rate::integer(1)).unwrap());
        let g = decompose(&build_tree(&[b]).unwrap(), 0.1).unwrap();
        let t = 10.0;
        let f = DistanceField::analytic(&g, 0, t, None).unwrap();
        let neck = g.neck_domains()[0].pieces[0];
        let fr = g.frame(neck, t);
        let z = Complex64::new(1e-3, 0.0);
        let d = f.distance(&g, neck, z).unwrap();
        let e = annulus_distance(z, origin(), fr.region.holes[0].radius, fr.region.outer.radius).unwrap();
        assert!((d - e).abs() < 1e-9);
        assert_eq!(f.kappa, 0.0);
    }

    #[test]
    fn two_bubble_field_is_symmetric() {
        let b = |id: &str, s: i64| {
            Bubble::new(id, RateExpr::real(Q::from_integer(s), Rate::integer(1)), Scale::new(1.0, Rate::integer(2)).unwrap())
        };
        let g = decompose(&build_tree(&[b("l", -1), b("r", 1)]).unwrap(), 0.1).unwrap();
        let t = 20.0;
        let f = DistanceField::analytic(&g, 0, t, None).unwrap();
        assert!(f.kappa > 0.0);
        let lam = (-40f64).exp();
        let y = (-20f64).exp();
        let a = f.distance_in_domain(&g, Complex64::new(y + 100.0 * lam, 0.0)).unwrap();
        let b2 = f.distance_in_domain(&g, Complex64::new(-y - 100.0 * lam, 0.0)).unwrap();
        assert!((a - b2).abs() < 1e-9);
        assert!((a - 10f64.ln()).abs() < 1e-6);
    }

    #[test]
    fn grid_reproduces_log_ten() {
        let a = DiskWithHoles::annulus(origin(), 1e-3, 1.0);
        let w = NeckWeight::new(origin());
        let d = distance_numeric_region(&a, &w, Complex64::new(0.1, 0.0), 512).unwrap();
        assert!((d / 10f64.ln() - 1.0).abs() < 0.02, "{d}");
    }

    #[test]
    fn grid_near_boundary_is_short() {
        let a = DiskWithHoles::annulus(origin(), 1e-3, 1.0);
        let w = NeckWeight::new(origin());
        let h = 2.0 / 256.0;
        let d = distance_numeric_region(&a, &w, Complex64::new(1.0 - 0.5 * h, 0.0), 256).unwrap();
        assert!(d <= h * 1.01);
    }

    #[test]
    fn grid_refines_monotonically() {
        let a = DiskWithHoles::annulus(origin(), 1e-3, 1.0);
        let w = NeckWeight::new(origin());
        let z = Complex64::new(0.1, 0.0);
        let d: Vec<f64> = [256, 512, 1024].iter().map(|&n| distance_numeric_region(&a, &w, z, n).unwrap()).collect();
        assert!((d[2] - d[1]).abs() < (d[1] - d[0]).abs());
    }

    #[test]
    fn grid_detects_coarse_resolution() {
        let mut a = DiskWithHoles::disk(origin(), 1.0);
        a.holes.push(crate::geometry::Circle::new(Complex64::new(0.1, 0.0), 0.05));
        a.holes.push(crate::geometry::Circle::new(Complex64::new(-0.1, 0.0), 0.05));
        let w = crate::geometry::FlatWeight(1.0);
        assert!(matches!(distance_numeric_region(&a, &w, Complex64::new(0.5, 0.0), 16), Err(Error::TooCoarse(_))));
    }
}
