//! The pullback-type weight `omega`, the bubble profile `f`, the piecewise
//! weight on neck domains, the glued weight, volumes and metric comparison.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bubble::Bubble;
use crate::decomposition::{DecompositionGraph, GhostWeight, NeckWeight, PieceKind};
use crate::distance::DistanceField;
use crate::error::{Error, Result};
use crate::geometry::{cutoff, Circle, ConformalWeight, DiskWithHoles, MetricTag};
use crate::quadrature::{integrate_region, Quad, REGION_REL};
use crate::rates::RateExpr;

/// `flat + sum_j (lambda_j / |z - x_j|^2)^2`.
#[derive(Clone, Debug)]
pub struct OmegaWeight {
    pub flat: f64,
    pub poles: Vec<(Complex64, f64)>,
}

impl OmegaWeight {
    pub fn new(flat: f64, poles: Vec<(Complex64, f64)>) -> Self {
        OmegaWeight { flat, poles }
    }

    /// Neck-domain form: flat part `lambda_P^-2`, poles at the children of `P`,
    /// positions relative to `anchor`.
    pub fn for_domain(g: &DecompositionGraph, nd: usize, anchor: &RateExpr, t: f64) -> Self {
        let tree = g.tree();
        let p = g.neck_domains()[nd].parent;
        let lam_p = tree.node(p).scale.evaluate(t);
        let poles = tree
            .children(p)
            .iter()
            .map(|&c| {
                let b = tree.node(c);
                ((&b.center - anchor).evaluate(t), b.scale.evaluate(t))
            })
            .collect();
        OmegaWeight { flat: 1.0 / (lam_p * lam_p), poles }
    }

    /// Root-level form `1 + sum_j lambda_j^2 / |z - x_j|^4` over the
    /// bubbles directly on the root.
    pub fn root(g: &DecompositionGraph, anchor: &RateExpr, t: f64) -> Self {
        let tree = g.tree();
        let poles = tree
            .children(0)
            .iter()
            .map(|&c| {
                let b = tree.node(c);
                ((&b.center - anchor).evaluate(t), b.scale.evaluate(t))
            })
            .collect();
        OmegaWeight { flat: 1.0, poles }
    }
}

impl ConformalWeight for OmegaWeight {
    fn tag(&self) -> MetricTag {
        MetricTag::Tilde
    }

    fn weight(&self, z: Complex64) -> Result<f64> {
        let mut s = self.flat;
        for &(x, lam) in &self.poles {
            let d = (z - x).norm_sqr();
            if d == 0.0 {
                return Err(Error::Pole);
            }
            let q = lam / d;
            s += q * q;
        }
        Ok(s)
    }
}

/// `1 + sum_j lambda_j^2 / |z - x_j|^4` with every bubble evaluated at `t`.
pub fn omega(z: Complex64, bubbles: &[Bubble], t: f64) -> Result<f64> {
    let poles = bubbles.iter().map(|b| (b.center.evaluate(t), b.scale.evaluate(t))).collect();
    OmegaWeight::new(1.0, poles).weight(z)
}

const LN4: f64 = 1.386_294_361_119_890_6;
const LN16: f64 = 2.772_588_722_239_781;

/// Quintic Hermite data for `ln f` on `[1, 2]`: values, slopes and second
/// derivatives of both closed-form branches at the junctions.
fn log_f_bridge(r: f64) -> f64 {
    let (y0, y1) = (-LN4, -LN16);
    let (d0, d1) = (-2.0, -2.0);
    let (s0, s1) = (0.0, 1.0);
    let x = r - 1.0;
    let (x2, x3) = (x * x, x * x * x);
    let (x4, x5) = (x3 * x, x3 * x2);
    let h0 = 1.0 - 10.0 * x3 + 15.0 * x4 - 6.0 * x5;
    let h1 = x - 6.0 * x3 + 8.0 * x4 - 3.0 * x5;
    let h2 = 0.5 * x2 - 1.5 * x3 + 1.5 * x4 - 0.5 * x5;
    let h3 = 0.5 * x3 - x4 + 0.5 * x5;
    let h4 = -4.0 * x3 + 7.0 * x4 - 3.0 * x5;
    let h5 = 10.0 * x3 - 15.0 * x4 + 6.0 * x5;
    y0 * h0 + d0 * h1 + s0 * h2 + s1 * h3 + d1 * h4 + y1 * h5
}

/// Radial profile of the round bubble metric `f(r) (dr^2 + r^2 dtheta^2)`.
pub fn bubble_metric_f(r: f64) -> f64 {
    if r <= 1.0 {
        let q = 1.0 / (1.0 + r * r);
        q * q
    } else if r >= 2.0 {
        1.0 / (r * r * r * r)
    } else {
        log_f_bridge(r).exp()
    }
}

/// `lambda^-2 f(|z - x| / lambda)`.
#[derive(Clone, Copy, Debug)]
pub struct BubbleWeight {
    pub center: Complex64,
    pub lambda: f64,
}

impl ConformalWeight for BubbleWeight {
    fn tag(&self) -> MetricTag {
        MetricTag::Bubble
    }

    fn weight(&self, z: Complex64) -> Result<f64> {
        let r = (z - self.center).norm() / self.lambda;
        Ok(bubble_metric_f(r) / (self.lambda * self.lambda))
    }
}

/// Metric obtained by gluing the flat background, `omega` on the neck
/// region, and rescaled bubble metrics near each top-level bubble.
#[derive(Clone, Debug)]
pub struct GluedWeight {
    pub delta0: f64,
    pub centers: Vec<Complex64>,
    pub omega: OmegaWeight,
}

impl GluedWeight {
    pub fn new(g: &DecompositionGraph, anchor: &RateExpr, t: f64, delta0: f64) -> Self {
        let centers = g
            .neck_domains()
            .iter()
            .filter(|nd| nd.parent == 0)
            .map(|nd| (&nd.center - anchor).evaluate(t))
            .collect();
        GluedWeight { delta0, centers, omega: OmegaWeight::root(g, anchor, t) }
    }
}

impl ConformalWeight for GluedWeight {
    fn tag(&self) -> MetricTag {
        MetricTag::Glued
    }

    fn weight(&self, z: Complex64) -> Result<f64> {
        let d0 = self.delta0;
        let r = self.centers.iter().map(|c| (z - c).norm()).fold(f64::INFINITY, f64::min);
        if r >= 0.5 * d0 {
            return Ok(1.0);
        }
        for &(x, lam) in &self.omega.poles {
            let dz = (z - x).norm();
            if dz < 4.0 * lam / d0 {
                let b = BubbleWeight { center: x, lambda: lam }.weight(z)?;
                let s = dz * d0 / (2.0 * lam);
                let phi = cutoff(s);
                if phi == 0.0 {
                    return Ok(b);
                }
                return Ok(phi * self.omega.weight(z)? + (1.0 - phi) * b);
            }
        }
        let w = self.omega.weight(z)?;
        if r >= 0.25 * d0 {
            let phi = cutoff(4.0 * r / d0);
            return Ok(phi + (1.0 - phi) * w);
        }
        Ok(w)
    }
}

#[derive(Clone, Debug)]
enum PieceWeight {
    Neck(NeckWeight),
    Ghost(GhostWeight),
}

/// Piecewise neck/ghost weight on one generalized neck domain.
#[derive(Clone, Debug)]
pub struct BarWeight {
    pieces: Vec<(usize, DiskWithHoles, PieceWeight)>,
}

impl BarWeight {
    pub fn new(g: &DecompositionGraph, nd: usize, anchor: &RateExpr, t: f64) -> Result<Self> {
        let mut pieces = Vec::new();
        for &p in &g.neck_domains()[nd].pieces {
            let fr = g.frame(p, t);
            let shift = (&fr.anchor - anchor).evaluate(t);
            let w = match fr.kind {
                PieceKind::SimpleNeck => {
                    let mut w = g.neck_weight(&fr)?;
                    w.center += shift;
                    PieceWeight::Neck(w)
                }
                PieceKind::GhostBubbleDomain => {
                    let mut w = g.ghost_weight(&fr)?;
                    w.center += shift;
                    w.hole_centers.iter_mut().for_each(|c| *c += shift);
                    PieceWeight::Ghost(w)
                }
                PieceKind::BubbleDomain => return Err(Error::KindMismatch("neck or ghost piece")),
            };
            pieces.push((p, fr.region.shifted(shift), w));
        }
        Ok(BarWeight { pieces })
    }

    pub fn piece_at(&self, z: Complex64) -> Option<usize> {
        self.pieces.iter().find(|(_, r, _)| r.contains(z)).map(|(p, _, _)| *p)
    }
}

impl ConformalWeight for BarWeight {
    fn tag(&self) -> MetricTag {
        MetricTag::Bar
    }

    fn weight(&self, z: Complex64) -> Result<f64> {
        for (_, region, w) in &self.pieces {
            if region.contains(z) {
                return match w {
                    PieceWeight::Neck(n) => n.weight(z),
                    PieceWeight::Ghost(gw) => gw.weight(z),
                };
            }
        }
        Err(Error::OutsideDomain(format!("{z} lies in no neck or ghost piece")))
    }
}

/// `∫_region w dA`.
pub fn volume(region: &DiskWithHoles, weight: &dyn ConformalWeight) -> Result<Quad> {
    integrate_region(region, &|z| weight.weight(z), REGION_REL)
}

/// Exact `∫_region |z - a|^-4 dA` for a pole inside one hole or outside the
/// outer disk.
pub fn inverse_fourth_integral(region: &DiskWithHoles, a: Complex64) -> Result<f64> {
    let disk = |c: &Circle| {
        let aa = (a - c.center).norm_sqr();
        let rr = c.radius * c.radius;
        PI * rr / (aa - rr).powi(2)
    };
    let exterior = |c: &Circle| {
        let aa = (a - c.center).norm_sqr();
        let rr = c.radius * c.radius;
        PI * rr / (rr - aa).powi(2)
    };
    let o = &region.outer;
    if (a - o.center).norm() > o.radius {
        return Ok(disk(o) - region.holes.iter().map(disk).sum::<f64>());
    }
    let k = region
        .holes
        .iter()
        .position(|h| (a - h.center).norm() < h.radius)
        .ok_or_else(|| Error::OutsideDomain("pole inside the integration region".into()))?;
    let others: f64 = region.holes.iter().enumerate().filter(|(i, _)| *i != k).map(|(_, h)| disk(h)).sum();
    Ok(exterior(&region.holes[k]) - exterior(o) - others)
}

/// Closed-form `∫_region omega dA`.
pub fn omega_volume_exact(region: &DiskWithHoles, w: &OmegaWeight) -> Result<f64> {
    let mut s = w.flat * region.area();
    for &(x, lam) in &w.poles {
        s += lam * lam * inverse_fourth_integral(region, x)?;
    }
    Ok(s)
}

/// The neck region `B(c, rho) \ ∪ B(x_j, lambda_j / rho)` of the root's first
/// concentration point, relative to its center.
pub fn omega_region(g: &DecompositionGraph, rho: f64, t: f64) -> Result<(DiskWithHoles, OmegaWeight)> {
    let nd = g
        .neck_domains()
        .iter()
        .find(|nd| nd.parent == 0)
        .ok_or_else(|| Error::OutsideDomain("configuration has no neck region".into()))?;
    let tree = g.tree();
    let holes = nd
        .leaves
        .iter()
        .map(|&j| {
            let b = tree.node(j);
            Circle::new((&b.center - &nd.center).evaluate(t), b.scale.evaluate(t) / rho)
        })
        .collect();
    let region = DiskWithHoles { outer: Circle::new(Complex64::new(0.0, 0.0), rho), holes };
    Ok((region, OmegaWeight::root(g, &nd.center, t)))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricComparison {
    pub inf_ratio: f64,
    pub sup_ratio: f64,
    pub samples: usize,
}

impl MetricComparison {
    pub fn spread(&self) -> f64 {
        self.sup_ratio / self.inf_ratio
    }
}

/// Stratified sample points of a piece in its own frame.
pub(crate) fn sample_piece(
    g: &DecompositionGraph,
    piece: usize,
    t: f64,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Complex64> {
    let fr = g.frame(piece, t);
    let c = g.circles();
    let p = g.piece(piece);
    let mut out = Vec::with_capacity(n);
    match p.kind {
        PieceKind::SimpleNeck => {
            let lo = c[p.holes[0]].radius.ln_at(t);
            let hi = c[p.outer].radius.ln_at(t);
            for k in 0..n {
                let u = lo + (hi - lo) * (k as f64 + rng.gen::<f64>()) / n as f64;
                let th = rng.gen::<f64>() * 2.0 * PI;
                out.push(Complex64::from_polar(u.exp(), th));
            }
        }
        _ => {
            let side = ((n as f64).sqrt().ceil() as usize).max(1);
            let r = fr.region.outer.radius;
            let cell = 2.0 * r / side as f64;
            let mut tries = 0;
            while out.len() < n && tries < 64 {
                for i in 0..side {
                    for j in 0..side {
                        let z = Complex64::new(
                            -r + cell * (i as f64 + rng.gen::<f64>()),
                            -r + cell * (j as f64 + rng.gen::<f64>()),
                        );
                        if fr.region.contains(z) && out.len() < n {
                            out.push(z);
                        }
                    }
                }
                tries += 1;
            }
        }
    }
    out
}

/// Extremes of `bar / (exp(2 d) omega)` over stratified samples of every
/// neck and ghost piece.
pub fn compare_metrics(
    g: &DecompositionGraph,
    t: f64,
    samples: usize,
    kappa: Option<f64>,
    seed: u64,
) -> Result<MetricComparison> {
    g.require_valid(t)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_pieces: usize = g.neck_domains().iter().map(|nd| nd.pieces.len()).sum();
    if n_pieces == 0 {
        return Err(Error::OutsideDomain("configuration has no neck region".into()));
    }
    let per = (samples / n_pieces).max(16);
    let mut logs: Vec<f64> = Vec::new();
    for (k, nd) in g.neck_domains().iter().enumerate() {
        let field = DistanceField::analytic(g, k, t, kappa)?;
        for &p in &nd.pieces {
            let fr = g.frame(p, t);
            let omega = OmegaWeight::for_domain(g, k, &fr.anchor, t);
            let bar = BarWeight::new(g, k, &fr.anchor, t)?;
            let pts = sample_piece(g, p, t, per, &mut rng);
            let vals: Vec<Result<f64>> = pts
                .par_iter()
                .map(|&z| {
                    let d = field.distance(g, p, z)?;
                    Ok(bar.weight(z)?.ln() - 2.0 * d - omega.weight(z)?.ln())
                })
                .collect();
            for v in vals {
                logs.push(v?);
            }
        }
    }
    let lo = logs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(MetricComparison { inf_ratio: lo.exp(), sup_ratio: hi.exp(), samples: logs.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bubble::build_tree;
    use crate::decomposition::decompose;
    use crate::geometry::FlatWeight;
    use crate::rates::{Rate, Scale, Q};

    fn two() -> DecompositionGraph {
        let b = |id: &str, s: i64| {
            Bubble::new(id, RateExpr::real(Q::from_integer(s), Rate::integer(1)), Scale::new(1.0, Rate::integer(2)).unwrap())
        };
        decompose(&build_tree(&[b("l", -1), b("r", 1)]).unwrap(), 0.1).unwrap()
    }

    #[test]
    fn omega_examples() {
        let b = Bubble::new("a", RateExpr::zero(), Scale::new(1e-4, Rate::zero()).unwrap());
        let v = omega(Complex64::new(0.1, 0.0), std::slice::from_ref(&b), 0.0).unwrap();
        assert!((v - 1.0001).abs() < 1e-14);
        assert!((omega(Complex64::new(1e9, 0.0), std::slice::from_ref(&b), 0.0).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(omega(Complex64::new(0.0, 0.0), &[b], 0.0), Err(Error::Pole));
        let sym = OmegaWeight::new(1.0, vec![(Complex64::new(0.3, 0.0), 0.1), (Complex64::new(-0.3, 0.0), 0.1)]);
        let z = Complex64::new(0.1, 0.4);
        assert_eq!(sym.weight(z).unwrap(), sym.weight(z.conj()).unwrap());
    }

    #[test]
    fn bubble_f_examples() {
        assert!((bubble_metric_f(0.5) - 0.64).abs() < 1e-15);
        assert!((bubble_metric_f(3.0) - 1.0 / 81.0).abs() < 1e-18);
        assert_eq!(bubble_metric_f(1.0), 0.25);
        assert!((bubble_metric_f(1.0 + 1e-12) - 0.25).abs() < 1e-11);
        assert!((bubble_metric_f(2.0 - 1e-12) - 1.0 / 16.0).abs() < 1e-12);
    }

    #[test]
    fn bubble_f_is_c2_and_decreasing() {
        let lf = |r: f64| bubble_metric_f(r).ln();
        let h = 1e-4;
        for &r in &[1.0, 2.0] {
            let d_l = (lf(r) - lf(r - h)) / h;
            let d_r = (lf(r + h) - lf(r)) / h;
            assert!((d_l - d_r).abs() < 1e-3);
            let s_l = (lf(r) - 2.0 * lf(r - h) + lf(r - 2.0 * h)) / (h * h);
            let s_r = (lf(r + 2.0 * h) - 2.0 * lf(r + h) + lf(r)) / (h * h);
            assert!((s_l - s_r).abs() < 1e-2);
        }
        let mut prev = bubble_metric_f(0.0);
        for k in 1..=3000 {
            let v = bubble_metric_f(k as f64 * 0.001);
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn glued_branches() {
        let g = two();
        let t = 20.0;
        let anchor = g.neck_domains()[0].center.clone();
        let gw = GluedWeight::new(&g, &anchor, t, 0.1);
        assert_eq!(gw.weight(Complex64::new(0.06, 0.0)).unwrap(), 1.0);
        let z = Complex64::new(0.0, 0.01);
        assert_eq!(gw.weight(z).unwrap(), gw.omega.weight(z).unwrap());
        // near a leaf, in a frame centered on that leaf
        let leaf = g.tree().node(2);
        let gw = GluedWeight::new(&g, &leaf.center, t, 0.1);
        let lam = leaf.scale.evaluate(t);
        let z = Complex64::new(3.0 * lam, 0.0);
        let expect = bubble_metric_f(3.0) / (lam * lam);
        assert!((gw.weight(z).unwrap() / expect - 1.0).abs() < 1e-12);
    }

    #[test]
    fn glued_is_continuous() {
        let g = two();
        let t = 10.0;
        let anchor = g.neck_domains()[0].center.clone();
        let gw = GluedWeight::new(&g, &anchor, t, 0.1);
        for &r in &[0.025, 0.05] {
            let a = gw.weight(Complex64::new(0.0, r * (1.0 - 1e-12))).unwrap();
            let b = gw.weight(Complex64::new(0.0, r * (1.0 + 1e-12))).unwrap();
            assert!((a / b - 1.0).abs() < 1e-8);
        }
        let leaf = g.tree().node(2);
        let gw = GluedWeight::new(&g, &leaf.center, t, 0.1);
        let lam = leaf.scale.evaluate(t);
        for &s in &[20.0, 40.0] {
            let a = gw.weight(Complex64::new(s * lam * (1.0 - 1e-12), 0.0)).unwrap();
            let b = gw.weight(Complex64::new(s * lam * (1.0 + 1e-12), 0.0)).unwrap();
            assert!((a / b - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn volume_examples() {
        let a = DiskWithHoles::annulus(Complex64::new(0.0, 0.0), 1e-3, 1.0);
        let v = volume(&a, &NeckWeight::new(Complex64::new(0.0, 0.0))).unwrap();
        assert!((v.value / (2.0 * PI * 1e3f64.ln()) - 1.0).abs() < 1e-9);
        let d = DiskWithHoles::disk(Complex64::new(0.0, 0.0), 0.1);
        let v = volume(&d, &FlatWeight(1.0)).unwrap();
        assert!((v.value / (PI * 0.01) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn omega_volume_routes_agree() {
        let g = two();
        for &t in &[5.0, 10.0] {
            let (region, w) = omega_region(&g, 0.05, t).unwrap();
            let q = volume(&region, &w).unwrap().value;
            let e = omega_volume_exact(&region, &w).unwrap();
            assert!((q / e - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn comparison_refuses_invalid_index() {
        assert!(matches!(compare_metrics(&two(), 0.5, 100, None, 1), Err(Error::NotValidAtIndex { .. })));
    }
}
