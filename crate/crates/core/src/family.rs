//! The explicit holomorphic family `z -> (z, lambda_1/(z - x_1), ..., lambda_l/(z - x_l))`.
//!
//! Conventions: the conformal pullback factor is `sum_k |d_z u_k|^2`, the
//! energy density is twice that, and `|grad u|^2_g = 2 pullback / w` for a
//! metric `w |dz|^2`.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::bubble::{check_separated, Bubble};
use crate::decomposition::{DecompositionGraph, PieceKind};
use crate::distance::DistanceField;
use crate::error::{Error, Result};
use crate::geometry::{Circle, ConformalWeight, DiskWithHoles, MetricTag};
use crate::metrics::{omega_volume_exact, BarWeight, OmegaWeight};
use crate::quadrature::{integrate_periodic, integrate_region, REGION_REL};
use crate::rates::{limit_ratio_scale, LimitClass, RateExpr, Scale};

#[derive(Clone, Debug)]
pub struct HolomorphicFamily {
    bubbles: Vec<Bubble>,
}

impl HolomorphicFamily {
    /// Requires centers tending to 0, summing to 0 exactly, and pairwise
    /// separated.
    pub fn new(bubbles: Vec<Bubble>) -> Result<Self> {
        let fam = HolomorphicFamily { bubbles };
        if let Some(v) = fam.assumption_violations().into_iter().next() {
            return Err(Error::Assumption(v));
        }
        Ok(fam)
    }

    /// Skips the assumption checks; evaluation formulas stay meaningful for
    /// nested configurations.
    pub fn new_unchecked(bubbles: Vec<Bubble>) -> Self {
        HolomorphicFamily { bubbles }
    }

    pub fn assumption_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for b in &self.bubbles {
            if limit_ratio_scale(&b.center, &Scale::unit()) != LimitClass::Zero {
                out.push(format!("center of `{}` does not tend to 0", b.id));
            }
        }
        let sum = self.bubbles.iter().fold(RateExpr::zero(), |a, b| a + b.center.clone());
        if !sum.is_zero() {
            out.push(format!("centers sum to {sum}, not 0"));
        }
        for (i, a) in self.bubbles.iter().enumerate() {
            for b in &self.bubbles[i + 1..] {
                if !check_separated(a, b) {
                    out.push(format!("`{}` and `{}` are not separated", a.id, b.id));
                }
            }
        }
        out
    }

    pub fn bubbles(&self) -> &[Bubble] {
        &self.bubbles
    }

    /// Evaluation data at index `t` with positions relative to `anchor`.
    pub fn frame(&self, anchor: &RateExpr, t: f64) -> FamilyFrame {
        FamilyFrame {
            identity: true,
            base: anchor.evaluate(t),
            poles: self.bubbles.iter().map(|b| ((&b.center - anchor).evaluate(t), b.scale.evaluate(t))).collect(),
        }
    }

    pub fn evaluate(&self, z: Complex64, t: f64) -> Result<Vec<Complex64>> {
        self.frame(&RateExpr::zero(), t).evaluate(z)
    }

    pub fn pullback_weight(&self, z: Complex64, t: f64) -> Result<f64> {
        self.frame(&RateExpr::zero(), t).pullback(z)
    }

    pub fn grad_norm(&self, z: Complex64, t: f64, weight: &dyn ConformalWeight) -> Result<f64> {
        self.frame(&RateExpr::zero(), t).grad_norm(z, weight)
    }

    pub fn circle_energy(&self, center: Complex64, r: f64, t: f64) -> Result<f64> {
        self.frame(&RateExpr::zero(), t).circle_energy(center, r)
    }

    pub fn pohozaev(&self, center: Complex64, r: f64, t: f64) -> Result<f64> {
        self.frame(&RateExpr::zero(), t).pohozaev(center, r)
    }
}

/// The family at a fixed index. `z` arguments are offsets from the anchor.
#[derive(Clone, Debug)]
pub struct FamilyFrame {
    /// whether the first component `z` is present
    pub identity: bool,
    /// absolute position of the anchor
    pub base: Complex64,
    pub poles: Vec<(Complex64, f64)>,
}

impl FamilyFrame {
    pub fn evaluate(&self, z: Complex64) -> Result<Vec<Complex64>> {
        let mut out = Vec::with_capacity(self.poles.len() + 1);
        if self.identity {
            out.push(self.base + z);
        }
        for &(x, lam) in &self.poles {
            let d = z - x;
            if d.norm_sqr() == 0.0 {
                return Err(Error::Pole);
            }
            out.push(lam / d);
        }
        Ok(out)
    }

    /// `d_z u_k` for every component.
    pub fn derivatives(&self, z: Complex64) -> Result<Vec<Complex64>> {
        let mut out = Vec::with_capacity(self.poles.len() + 1);
        if self.identity {
            out.push(Complex64::new(1.0, 0.0));
        }
        for &(x, lam) in &self.poles {
            let d = z - x;
            if d.norm_sqr() == 0.0 {
                return Err(Error::Pole);
            }
            let q = (lam / d) / d;
            out.push(-q);
        }
        Ok(out)
    }

    pub fn pullback(&self, z: Complex64) -> Result<f64> {
        Ok(self.derivatives(z)?.iter().map(|d| d.norm_sqr()).sum())
    }

    pub fn energy_density(&self, z: Complex64) -> Result<f64> {
        Ok(2.0 * self.pullback(z)?)
    }

    pub fn grad_norm(&self, z: Complex64, weight: &dyn ConformalWeight) -> Result<f64> {
        Ok((2.0 * self.pullback(z)? / weight.weight(z)?).sqrt())
    }

    /// `∫ |grad u|^2 dtheta` on the circle `|z - center| = r` in cylinder
    /// coordinates `z = center + exp(-(s + i theta))`.
    pub fn circle_energy(&self, center: Complex64, r: f64) -> Result<f64> {
        let f = |th: f64| Ok(r * r * self.energy_density(center + Complex64::from_polar(r, th))?);
        Ok(integrate_periodic(&f, 1e-13)?.value)
    }

    /// `∫ |u_theta|^2 - |u_s|^2 dtheta` on the same circle.
    pub fn pohozaev(&self, center: Complex64, r: f64) -> Result<f64> {
        let f = |th: f64| {
            let zeta = Complex64::from_polar(r, th);
            let ds = self.derivatives(center + zeta)?;
            let mut s = 0.0;
            for d in ds {
                // dz/ds = -zeta, dz/dtheta = i zeta
                let us = -zeta * d;
                let ut = Complex64::i() * zeta * d;
                s += ut.norm_sqr() - us.norm_sqr();
            }
            Ok(s)
        };
        Ok(integrate_periodic(&f, 1e-13)?.value)
    }

    fn as_omega(&self) -> OmegaWeight {
        OmegaWeight::new(if self.identity { 1.0 } else { 0.0 }, self.poles.clone())
    }
}

impl ConformalWeight for FamilyFrame {
    fn tag(&self) -> MetricTag {
        MetricTag::Tilde
    }

    fn weight(&self, z: Complex64) -> Result<f64> {
        self.pullback(z)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnergyMethod {
    ClosedForm,
    Quadrature,
}

impl EnergyMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            EnergyMethod::ClosedForm => "closed-form",
            EnergyMethod::Quadrature => "quadrature",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnergyReport {
    pub region: String,
    pub value: f64,
    pub method: EnergyMethod,
    pub error: f64,
}

/// `∫_region |grad u|^2 dA` with `region` given in the frame's coordinates.
pub fn energy_in(frame: &FamilyFrame, region: &DiskWithHoles, method: EnergyMethod) -> Result<(f64, f64)> {
    if frame.poles.iter().any(|&(x, _)| region.contains(x)) {
        return Err(Error::Pole);
    }
    match method {
        EnergyMethod::ClosedForm => Ok((2.0 * omega_volume_exact(region, &frame.as_omega())?, 0.0)),
        EnergyMethod::Quadrature => {
            let q = integrate_region(region, &|z| frame.energy_density(z), REGION_REL)?;
            Ok((q.value, q.error))
        }
    }
}

pub fn region_energy(
    fam: &HolomorphicFamily,
    g: &DecompositionGraph,
    piece: usize,
    t: f64,
    method: EnergyMethod,
) -> Result<EnergyReport> {
    let fr = g.frame(piece, t);
    let ff = fam.frame(&fr.anchor, t);
    let (value, error) = energy_in(&ff, &fr.region, method)?;
    Ok(EnergyReport { region: g.piece(piece).label.clone(), value, method, error })
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecayReport {
    pub t: f64,
    /// sup of `|grad u|_bar * exp(d)`
    pub sup: f64,
    pub sup_piece: String,
    pub sup_at: Complex64,
    /// sup of `|grad u|` against the flat metric, no distance factor
    pub sup_flat: f64,
    pub points: usize,
}

pub(crate) fn piece_grid(g: &DecompositionGraph, piece: usize, t: f64, n: usize) -> Vec<Complex64> {
    let fr = g.frame(piece, t);
    let p = g.piece(piece);
    let c = g.circles();
    let mut out = Vec::new();
    match p.kind {
        PieceKind::SimpleNeck => {
            let lo = c[p.holes[0]].radius.ln_at(t);
            let hi = c[p.outer].radius.ln_at(t);
            for i in 0..n {
                let u = lo + (hi - lo) * (i as f64 + 0.5) / n as f64;
                for j in 0..n {
                    out.push(Complex64::from_polar(u.exp(), TAU * (j as f64 + 0.5) / n as f64));
                }
            }
        }
        _ => {
            let r = fr.region.outer.radius;
            for i in 0..=n {
                for j in 0..=n {
                    let z = Complex64::new(-r + 2.0 * r * i as f64 / n as f64, -r + 2.0 * r * j as f64 / n as f64);
                    if fr.region.contains(z) {
                        out.push(z);
                    }
                }
            }
        }
    }
    out
}

/// Sup of `|grad u|_bar e^{d}` over grids on every neck and ghost piece.
pub fn verify_decay(
    fam: &HolomorphicFamily,
    g: &DecompositionGraph,
    t: f64,
    grid: usize,
    kappa: Option<f64>,
) -> Result<DecayReport> {
    g.require_valid(t)?;
    let mut best = (f64::NEG_INFINITY, String::new(), Complex64::new(0.0, 0.0));
    let mut flat = f64::NEG_INFINITY;
    let mut points = 0;
    for (k, nd) in g.neck_domains().iter().enumerate() {
        let field = DistanceField::analytic(g, k, t, kappa)?;
        for &p in &nd.pieces {
            let fr = g.frame(p, t);
            let ff = fam.frame(&fr.anchor, t);
            let bar = BarWeight::new(g, k, &fr.anchor, t)?;
            let pts = piece_grid(g, p, t, grid);
            let vals: Vec<Result<(f64, f64)>> = pts
                .par_iter()
                .map(|&z| {
                    let pull = ff.pullback(z)?;
                    let d = field.distance(g, p, z)?;
                    let lg = 0.5 * ((2.0 * pull).ln() - bar.weight(z)?.ln()) + d;
                    Ok((lg, 0.5 * (2.0 * pull).ln()))
                })
                .collect();
            for (z, v) in pts.iter().zip(vals) {
                let (lg, lf) = v?;
                points += 1;
                flat = flat.max(lf);
                if lg > best.0 {
                    best = (lg, g.piece(p).label.clone(), *z);
                }
            }
        }
    }
    if points == 0 {
        return Err(Error::OutsideDomain("configuration has no neck region".into()));
    }
    Ok(DecayReport { t, sup: best.0.exp(), sup_piece: best.1, sup_at: best.2, sup_flat: flat.exp(), points })
}

/// Smallest distance between two point clouds in `C^n`.
pub fn min_pair_distance(a: &[Vec<Complex64>], b: &[Vec<Complex64>]) -> f64 {
    a.par_iter()
        .map(|p| {
            b.iter()
                .map(|q| p.iter().zip(q).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>())
                .fold(f64::INFINITY, f64::min)
        })
        .collect::<Vec<f64>>()
        .into_iter()
        .fold(f64::INFINITY, f64::min)
        .sqrt()
}

fn max_step(curve: &[Vec<Complex64>], closed: bool) -> f64 {
    let n = curve.len();
    let m = if closed { n } else { n.saturating_sub(1) };
    (0..m)
        .map(|i| {
            let (p, q) = (&curve[i], &curve[(i + 1) % n]);
            p.iter().zip(q).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
        })
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeparationReport {
    pub t: f64,
    pub delta0: f64,
    pub distance: f64,
    /// bound on how much sampling can overestimate `distance`
    pub sampling_gap: f64,
    pub threshold: f64,
    pub passed: bool,
}

/// Image distance between `Omega(delta0/16)` and `∂Omega(delta0/8)` for the
/// neck region of the root's first concentration point.
pub fn image_separation(
    fam: &HolomorphicFamily,
    g: &DecompositionGraph,
    t: f64,
    delta0: f64,
    samples: usize,
) -> Result<SeparationReport> {
    g.require_valid(t)?;
    let nd = g
        .neck_domains()
        .iter()
        .find(|nd| nd.parent == 0)
        .ok_or_else(|| Error::OutsideDomain("configuration has no neck region".into()))?;
    let tree = g.tree();
    let leaves: Vec<&Bubble> = nd.leaves.iter().map(|&j| tree.node(j)).collect();
    let n = samples.max(64);
    let (r_in, r_bd) = (delta0 / 16.0, delta0 / 8.0);

    let image = |anchor: &RateExpr, zeta: Complex64| -> Result<Vec<Complex64>> { fam.frame(anchor, t).evaluate(zeta) };
    let circle = |anchor: &RateExpr, r: f64| -> Result<Vec<Vec<Complex64>>> {
        let ff = fam.frame(anchor, t);
        (0..n).map(|k| ff.evaluate(Complex64::from_polar(r, TAU * k as f64 / n as f64))).collect()
    };

    // boundary of Omega(delta0/8)
    let mut boundary = Vec::new();
    let mut gap_b: f64 = 0.0;
    let outer = circle(&nd.center, r_bd)?;
    gap_b = gap_b.max(max_step(&outer, true));
    boundary.extend(outer);
    for b in &leaves {
        let c = circle(&b.center, b.scale.evaluate(t) / r_bd)?;
        gap_b = gap_b.max(max_step(&c, true));
        boundary.extend(c);
    }

    // Omega(delta0/16): log-polar grids about each leaf and about the center
    let mut interior = Vec::new();
    let mut gap_i: f64 = 0.0;
    let min_sep = leaves
        .iter()
        .enumerate()
        .flat_map(|(i, a)| leaves[i + 1..].iter().map(move |b| (&a.center - &b.center).evaluate(t).norm()))
        .fold(f64::INFINITY, f64::min);
    let radial = n / 4;
    let mut push_grid = |anchor: &RateExpr, lo: f64, hi: f64, keep: &dyn Fn(&RateExpr, Complex64) -> bool| -> Result<()> {
        for i in 0..=radial {
            // rings stay strictly inside so the membership test never splits one
            let (a, b) = ((lo * (1.0 + 1e-9)).ln(), (hi * (1.0 - 1e-9)).ln());
            let r = (a + (b - a) * i as f64 / radial as f64).exp();
            let mut ring = Vec::with_capacity(n);
            for k in 0..n {
                let zeta = Complex64::from_polar(r, TAU * k as f64 / n as f64);
                if keep(anchor, zeta) {
                    ring.push(image(anchor, zeta)?);
                }
            }
            gap_i = gap_i.max(max_step(&ring, false));
            interior.extend(ring);
        }
        Ok(())
    };
    let inside = |anchor: &RateExpr, zeta: Complex64| -> bool {
        ((anchor - &nd.center).evaluate(t) + zeta).norm() <= r_in
            && leaves.iter().all(|b| ((anchor - &b.center).evaluate(t) + zeta).norm() >= b.scale.evaluate(t) / r_in)
    };
    for b in &leaves {
        let lo = b.scale.evaluate(t) / r_in;
        let hi = if leaves.len() > 1 { 0.45 * min_sep } else { r_in };
        push_grid(&b.center, lo, hi.max(lo), &inside)?;
    }
    let lo = if leaves.len() > 1 { 0.01 * min_sep } else { leaves[0].scale.evaluate(t) / r_in };
    push_grid(&nd.center, lo, r_in, &inside)?;

    let distance = min_pair_distance(&interior, &boundary);
    let sampling_gap = 0.5 * (gap_b + gap_i);
    let threshold = delta0 / 32.0;
    Ok(SeparationReport {
        t,
        delta0,
        distance,
        sampling_gap,
        threshold,
        passed: distance - sampling_gap > threshold,
    })
}

/// Energy `2 pi r^2` of the identity component on a disk of radius `r`.
pub fn flat_disk_energy(radius: f64) -> f64 {
    2.0 * PI * radius * radius
}

pub fn disk(center: Complex64, radius: f64) -> DiskWithHoles {
    DiskWithHoles { outer: Circle::new(center, radius), holes: Vec::new() }
}
