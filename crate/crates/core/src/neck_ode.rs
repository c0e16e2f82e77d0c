//! Cylinder-side analysis: circle-energy profiles, three-circle type
//! inequalities, and the boundary value problem `g'' = gamma^2 g`.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::decomposition::{DecompositionGraph, PieceKind};
use crate::error::{Error, Result};
use crate::family::{energy_in, EnergyMethod, HolomorphicFamily};
use crate::geometry::{Circle, DiskWithHoles};
use crate::report::Status;

pub const PROFILE_DT: f64 = 0.05;
pub const DEFAULT_EPSILON1: f64 = 1e-2;

/// Closed-form solution of `g'' = gamma^2 g`, `g(0) = a`, `g(T) = b`.
///
/// Written as `P + Q` with `P = E1 e^{-gamma t}`, `Q = E2 e^{gamma t}`. The
/// evaluators work with the sinh form in log space, so nothing cancels,
/// overflows or underflows.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdeSolution {
    pub a: f64,
    pub b: f64,
    pub gamma: f64,
    pub big_t: f64,
    pub e1: f64,
    pub e2: f64,
}

pub fn ode_solve(a: f64, b: f64, gamma: f64, big_t: f64) -> Result<OdeSolution> {
    if !(a >= 0.0 && b >= 0.0 && a + b > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(Error::ParameterDomain(format!("boundary values a = {a}, b = {b}")));
    }
    if !(gamma >= 0.5 && gamma.is_finite()) {
        return Err(Error::ParameterDomain(format!("gamma = {gamma} < 1/2")));
    }
    if !(big_t > 5.0 && big_t.is_finite()) {
        return Err(Error::ParameterDomain(format!("T = {big_t} <= 5")));
    }
    let q = (-gamma * big_t).exp();
    let den = 1.0 - q * q;
    Ok(OdeSolution { a, b, gamma, big_t, e1: (a - b * q) / den, e2: (b * q - a * q * q) / den })
}

/// `ln sinh(gamma x)` for `x >= 0`.
fn ln_sinh(gx: f64) -> f64 {
    gx + (-(-2.0 * gx).exp()).ln_1p() - std::f64::consts::LN_2
}

/// `ln cosh(gamma x)`.
fn ln_cosh(gx: f64) -> f64 {
    gx + (-2.0 * gx).exp().ln_1p() - std::f64::consts::LN_2
}

impl OdeSolution {
    /// `g = u + v` with `u = a sinh(gamma (T - t)) / sinh(gamma T)` and
    /// `v = b sinh(gamma t) / sinh(gamma T)`; returns the logs of `u`, `v` and
    /// of their cosh counterparts.
    fn log_terms(&self, t: f64) -> [f64; 4] {
        let (g, tt) = (self.gamma, self.big_t);
        let t = t.clamp(0.0, tt);
        let ln_st = ln_sinh(g * tt);
        let (la, lb) = (self.a.ln(), self.b.ln());
        [
            la + ln_sinh(g * (tt - t)) - ln_st,
            lb + ln_sinh(g * t) - ln_st,
            la + ln_cosh(g * (tt - t)) - ln_st,
            lb + ln_cosh(g * t) - ln_st,
        ]
    }

    pub fn ln_g(&self, t: f64) -> f64 {
        let [lu, lv, _, _] = self.log_terms(t);
        let m = lu.max(lv);
        m + ((lu - m).exp() + (lv - m).exp()).ln()
    }

    pub fn g(&self, t: f64) -> f64 {
        self.ln_g(t).exp()
    }

    pub fn dg(&self, t: f64) -> f64 {
        let [_, _, lu, lv] = self.log_terms(t);
        self.gamma * (lv.exp() - lu.exp())
    }

    pub fn log_d(&self, t: f64) -> f64 {
        let [_, _, lu, lv] = self.log_terms(t);
        let lg = self.ln_g(t);
        self.gamma * ((lv - lg).exp() - (lu - lg).exp())
    }

    /// `gamma^2 (2 a b cosh(gamma T) - a^2 - b^2) / (sinh(gamma T) g)^2`,
    /// which is `4 gamma^2 P Q / (P + Q)^2`.
    pub fn log_dd(&self, t: f64) -> f64 {
        let (g, tt) = (self.gamma, self.big_t);
        let base = 2.0 * (ln_sinh(g * tt) + self.ln_g(t));
        let (la, lb) = (self.a.ln(), self.b.ln());
        let cross = (std::f64::consts::LN_2 + la + lb + ln_cosh(g * tt) - base).exp();
        let squares = (2.0 * la - base).exp() + (2.0 * lb - base).exp();
        g * g * (cross - squares)
    }

    /// `(P, Q)` at `t`.
    pub fn parts(&self, t: f64) -> (f64, f64) {
        let (g, tt) = (self.gamma, self.big_t);
        let q = (-g * tt).exp();
        let c2 = (self.b - self.a * q) / (1.0 - q * q);
        (self.e1 * (-g * t).exp(), c2 * (g * (t - tt)).exp())
    }

    /// `gamma^2 - ((log g)')^2`, an independent route to `(log g)''`.
    pub fn log_dd_alt(&self, t: f64) -> f64 {
        let l = self.log_d(t);
        self.gamma * self.gamma - l * l
    }

    /// Minimiser of `g` over `[lo, hi]`, using convexity.
    pub fn inf_on(&self, lo: f64, hi: f64) -> f64 {
        let mut best = self.g(lo).min(self.g(hi));
        let q = (-self.gamma * self.big_t).exp();
        let c2 = (self.b - self.a * q) / (1.0 - q * q);
        if self.e1 > 0.0 && c2 > 0.0 {
            let t_star = (self.e1.ln() - c2.ln() + self.gamma * self.big_t) / (2.0 * self.gamma);
            if t_star > lo && t_star < hi {
                best = best.min(self.g(t_star));
            }
        }
        best
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LemmaAReport {
    pub sup_log_d: f64,
    pub inf_g: f64,
    /// `a / inf_[0,1] g`, the smallest constant that works for the left bound
    pub left_constant: f64,
    pub bound: f64,
    pub status: Status,
}

/// `sup_[1,T] |(log g)'| <= 4 gamma` and `a <= 4 gamma inf_[0,1] g`.
pub fn lemma_a_check(sol: &OdeSolution) -> Result<LemmaAReport> {
    if sol.b < sol.a {
        return Err(Error::ParameterDomain("requires b >= a".into()));
    }
    // (log g)' is monotone, so the sup sits at an endpoint; the dense
    // sample guards that reasoning
    let mut sup = sol.log_d(1.0).abs().max(sol.log_d(sol.big_t).abs());
    let n = 2000;
    for k in 0..=n {
        let t = 1.0 + (sol.big_t - 1.0) * k as f64 / n as f64;
        sup = sup.max(sol.log_d(t).abs());
    }
    let inf_g = sol.inf_on(0.0, 1.0);
    let bound = 4.0 * sol.gamma;
    let status = Status::from_bool(sup <= bound && sol.a <= bound * inf_g);
    Ok(LemmaAReport { sup_log_d: sup, inf_g, left_constant: sol.a / inf_g, bound, status })
}

/// Samples of `f(t)`, the energy on the circle at cylinder coordinate `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct CircleEnergyProfile {
    pub source: String,
    pub t0: f64,
    pub dt: f64,
    pub f: Vec<f64>,
}

impl CircleEnergyProfile {
    pub fn new(source: impl Into<String>, t0: f64, dt: f64, f: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0) || f.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::ParameterDomain("profile needs dt > 0 and f >= 0".into()));
        }
        Ok(CircleEnergyProfile { source: source.into(), t0, dt, f })
    }

    pub fn from_fn(source: &str, t0: f64, t1: f64, dt: f64, f: impl Fn(f64) -> f64) -> Result<Self> {
        let n = ((t1 - t0) / dt + 1e-9).floor() as usize;
        Self::new(source, t0, dt, (0..=n).map(|k| f(t0 + k as f64 * dt)).collect())
    }

    pub fn len(&self) -> usize {
        self.f.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f.is_empty()
    }

    pub fn t(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.t(self.f.len().saturating_sub(1))
    }

    pub fn gamma(&self) -> Vec<f64> {
        self.f.iter().map(|v| v.sqrt()).collect()
    }

    fn index(&self, t: f64) -> Result<usize> {
        let x = (t - self.t0) / self.dt;
        let k = x.round();
        if (x - k).abs() > 1e-6 || k < 0.0 || k as usize >= self.f.len() {
            return Err(Error::Coverage(format!("t = {t} is not a sample of [{}, {}]", self.t0, self.t_end())));
        }
        Ok(k as usize)
    }

    /// Composite Simpson over samples in `[lo, hi]`; a trailing odd interval
    /// uses the three-eighths rule.
    pub fn integral(&self, lo: f64, hi: f64) -> Result<f64> {
        let (i, j) = (self.index(lo)?, self.index(hi)?);
        Ok(simpson(&self.f[i..=j], self.dt))
    }
}

fn simpson(y: &[f64], h: f64) -> f64 {
    let n = y.len().saturating_sub(1);
    match n {
        0 => 0.0,
        1 => 0.5 * h * (y[0] + y[1]),
        _ => {
            let (even, tail) = if n % 2 == 0 { (n, 0) } else { (n - 3, 3) };
            let mut s = 0.0;
            for k in (0..even).step_by(2) {
                s += y[k] + 4.0 * y[k + 1] + y[k + 2];
            }
            s *= h / 3.0;
            if tail == 3 {
                let k = even;
                s += 3.0 * h / 8.0 * (y[k] + 3.0 * y[k + 1] + 3.0 * y[k + 2] + y[k + 3]);
            }
            s
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThreeCircleReport {
    pub middle: f64,
    pub sides: f64,
    pub ratio: f64,
    /// `beta * sides - middle`
    pub margin: f64,
    pub status: Status,
}

/// `∫_[L,2L] f <= beta (∫_[0,L] f + ∫_[2L,3L] f)` on a profile starting at 0.
pub fn three_circle_check(p: &CircleEnergyProfile, l: f64, beta: f64) -> Result<ThreeCircleReport> {
    let o = p.t0;
    let middle = p.integral(o + l, o + 2.0 * l)?;
    let sides = p.integral(o, o + l)? + p.integral(o + 2.0 * l, o + 3.0 * l)?;
    let margin = beta * sides - middle;
    Ok(ThreeCircleReport { middle, sides, ratio: middle / sides, margin, status: Status::from_bool(margin >= 0.0) })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SharpReport {
    pub e1: f64,
    pub e2: f64,
    /// `max (gamma(t) - factor (E1 e^{-t} + E2 e^{t}))`
    pub max_violation: f64,
    pub status: Status,
}

/// `gamma(t) <= factor (E1 e^{-t} + E2 e^{t})` with `E1, E2` from the endpoints
/// of `gamma = sqrt(f)` and unit rate.
pub fn sharp_profile_check(p: &CircleEnergyProfile, factor: f64) -> Result<SharpReport> {
    let gam = p.gamma();
    let n = gam.len();
    if n < 2 {
        return Err(Error::Coverage("profile needs two samples".into()));
    }
    let big_t = p.t_end() - p.t0;
    let q = (-big_t).exp();
    let den = 1.0 - q * q;
    let (a, b) = (gam[0], gam[n - 1]);
    let e1 = (a - b * q) / den;
    let e2 = (b * q - a * q * q) / den;
    let mut worst = f64::NEG_INFINITY;
    let mut rel_worst = f64::NEG_INFINITY;
    for (k, &g) in gam.iter().enumerate() {
        let s = p.t(k) - p.t0;
        let bound = factor * (e1 * (-s).exp() + (b * (s - big_t).exp() - a * (s - 2.0 * big_t).exp()) / den);
        worst = worst.max(g - bound);
        rel_worst = rel_worst.max((g - bound) / bound.abs().max(f64::MIN_POSITIVE));
    }
    Ok(SharpReport { e1, e2, max_violation: worst, status: Status::from_bool(rel_worst <= 1e-12) })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainReport {
    pub m: usize,
    pub hypothesis: bool,
    pub bound: f64,
    pub ratio: f64,
    /// negated least-squares slope of `ln E` against position `i L`
    pub exponent: f64,
    pub status: Status,
}

/// Least-squares slope of `y` against `x`.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

pub fn chain_constant(l: f64) -> f64 {
    16.0 * (6.0 * l).exp()
}

/// Doubling hypothesis `E_i <= E_{i+1}/2` and conclusion
/// `E_1 <= 16 e^{6L} e^{-2mL} E_m` on consecutive cylinder pieces.
pub fn chain_decay_check(energies: &[f64], l: f64) -> Result<ChainReport> {
    let m = energies.len();
    if m == 0 || energies.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::ParameterDomain("energies must be positive".into()));
    }
    let x: Vec<f64> = (0..m).map(|i| (i + 1) as f64 * l).collect();
    let y: Vec<f64> = energies.iter().map(|e| e.ln()).collect();
    let exponent = if m >= 2 { -ls_slope(&x, &y) } else { f64::NAN };
    let hypothesis = energies.windows(2).all(|w| w[0] <= 0.5 * w[1]);
    let ln_bound = chain_constant(l).ln() - 2.0 * m as f64 * l;
    let bound = ln_bound.exp();
    let ratio = energies[0] / energies[m - 1];
    let status = if m < 5 {
        Status::Vacuous
    } else if !hypothesis {
        Status::HypothesisNotMet
    } else {
        Status::from_bool(ratio.ln() <= ln_bound)
    };
    Ok(ChainReport { m, hypothesis, bound, ratio, exponent, status })
}

/// Circle-energy profile along a simple neck, cylinder coordinate 0 at the
/// outer circle.
pub fn neck_profile(
    fam: &HolomorphicFamily,
    g: &DecompositionGraph,
    piece: usize,
    t: f64,
    dt: f64,
) -> Result<CircleEnergyProfile> {
    let p = g.piece(piece);
    if p.kind != PieceKind::SimpleNeck {
        return Err(Error::KindMismatch("simple neck"));
    }
    let fr = g.frame(piece, t);
    let ff = fam.frame(&fr.anchor, t);
    let c = g.circles();
    let (hi, lo) = (c[p.outer].radius.ln_at(t), c[p.holes[0]].radius.ln_at(t));
    let n = ((hi - lo) / dt).floor() as usize;
    let vals: Vec<Result<f64>> = (0..=n)
        .into_par_iter()
        .map(|k| ff.circle_energy(Complex64::new(0.0, 0.0), (hi - k as f64 * dt).exp()))
        .collect();
    let f = vals.into_iter().collect::<Result<Vec<f64>>>()?;
    CircleEnergyProfile::new(p.label.clone(), 0.0, dt, f)
}

/// Energies of consecutive length-`l` cylinder pieces of a profile, listed
/// towards the more energetic end.
pub fn chain_energies(p: &CircleEnergyProfile, l: f64) -> Result<Vec<f64>> {
    let m = ((p.t_end() - p.t0) / l + 1e-9).floor() as usize;
    let mut e = (0..m)
        .map(|i| p.integral(p.t0 + i as f64 * l, p.t0 + (i + 1) as f64 * l))
        .collect::<Result<Vec<f64>>>()?;
    if e.first() > e.last() {
        e.reverse();
    }
    Ok(e)
}

/// Slopes of `ln f` on the branches left and right of the profile minimum,
/// leaving out a window of `window` around it.
pub fn neck_slopes(p: &CircleEnergyProfile, window: f64) -> Vec<f64> {
    let n = p.len();
    let k_min = (0..n).min_by(|&i, &j| p.f[i].total_cmp(&p.f[j])).unwrap_or(0);
    let t_min = p.t(k_min);
    let min_len = 1.0;
    let mut out = Vec::new();
    for (from, to) in [(0, k_min), (k_min, n - 1)] {
        let ks: Vec<usize> = (from..=to).filter(|&k| (p.t(k) - t_min).abs() >= window).collect();
        if ks.len() < 3 || p.t(*ks.last().unwrap()) - p.t(ks[0]) < min_len {
            continue;
        }
        let x: Vec<f64> = ks.iter().map(|&k| p.t(k)).collect();
        let y: Vec<f64> = ks.iter().map(|&k| p.f[k].ln()).collect();
        out.push(ls_slope(&x, &y));
    }
    out
}

/// `Omega_j = B(c, 2 eta^{-j} sigma) \ ∪_k B(c_k, delta eta^j sigma)` around a
/// ghost bubble with center `c` and concentration centers `c_k`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegionLadder {
    pub eta: f64,
}

impl RegionLadder {
    pub fn new(eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta < 1.0) {
            return Err(Error::ParameterDomain(format!("eta = {eta} outside (0, 1)")));
        }
        Ok(RegionLadder { eta })
    }

    /// Level `j` in the ghost frame.
    pub fn level(&self, g: &DecompositionGraph, ghost: usize, j: i32, t: f64) -> DiskWithHoles {
        let gh = &g.ghosts()[ghost];
        let fr = g.frame(gh.piece, t);
        let sigma = gh.sigma.evaluate(t);
        let e = self.eta.powi(j);
        DiskWithHoles {
            outer: Circle::new(fr.region.outer.center, 2.0 * sigma / e),
            holes: fr.region.holes.iter().map(|h| Circle::new(h.center, g.delta() * sigma * e)).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneralizedThreeCircleReport {
    pub eta: f64,
    pub energies: [f64; 4],
    /// `E(Omega_1) / E(Omega_2 \ Omega_1)`
    pub c1: f64,
    /// `E(Omega_2) / E(Omega_3 \ Omega_2)`
    pub beta: f64,
    pub status: Status,
}

/// Ratios of energies on the ladder around the first ghost bubble. Gated by
/// `E(Omega_3) <= epsilon1`.
pub fn generalized_three_circle_check(
    fam: &HolomorphicFamily,
    g: &DecompositionGraph,
    ladder: RegionLadder,
    t: f64,
    beta_max: f64,
    epsilon1: f64,
) -> Result<GeneralizedThreeCircleReport> {
    g.require_valid(t)?;
    if g.ghosts().is_empty() {
        return Err(Error::OutsideDomain("configuration has no ghost bubble".into()));
    }
    let gh = &g.ghosts()[0];
    let nd = g.pieces()[gh.piece].neck_domain.expect("ghost piece lies in a neck domain");
    let dom = &g.neck_domains()[nd];
    let circles = g.circles();
    let fr = g.frame(gh.piece, t);
    let ff = fam.frame(&fr.anchor, t);
    let top = ladder.level(g, 0, 3, t);
    let outer_r = circles[dom.outer].radius.evaluate(t);
    let outer_shift = (&circles[dom.outer].center - &fr.anchor).evaluate(t);
    let leaf_ok = dom.leaf_circles.iter().all(|&k| {
        let c = (&circles[k].center - &fr.anchor).evaluate(t);
        top.holes.iter().any(|h| (h.center - c).norm() + circles[k].radius.evaluate(t) < h.radius)
    });
    if top.outer.radius + (top.outer.center - outer_shift).norm() >= outer_r || !leaf_ok {
        return Err(Error::OutsideDomain("ladder leaves the generalized neck domain".into()));
    }
    let mut energies = [0.0; 4];
    for (j, e) in energies.iter_mut().enumerate() {
        *e = energy_in(&ff, &ladder.level(g, 0, j as i32, t), EnergyMethod::ClosedForm)?.0;
    }
    let c1 = energies[1] / (energies[2] - energies[1]);
    let beta = energies[2] / (energies[3] - energies[2]);
    let status = if energies[3] > epsilon1 {
        Status::HypothesisNotMet
    } else {
        Status::from_bool(beta <= beta_max)
    };
    Ok(GeneralizedThreeCircleReport { eta: ladder.eta, energies, c1, beta, status })
}
