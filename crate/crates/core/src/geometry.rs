//! Evaluated planar geometry in local frames.
//!
//! Points are offsets from an anchor expression so that structures far
//! below `f64` resolution of their absolute position stay resolvable.

use num_complex::Complex64;

use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Circle {
    pub center: Complex64,
    pub radius: f64,
}

impl Circle {
    pub fn new(center: Complex64, radius: f64) -> Self {
        Circle { center, radius }
    }

    pub fn contains(&self, z: Complex64) -> bool {
        (z - self.center).norm() < self.radius
    }
}

/// A disk minus finitely many disjoint closed holes inside it.
#[derive(Clone, Debug, PartialEq)]
pub struct DiskWithHoles {
    pub outer: Circle,
    pub holes: Vec<Circle>,
}

impl DiskWithHoles {
    pub fn annulus(center: Complex64, inner: f64, outer: f64) -> Self {
        DiskWithHoles {
            outer: Circle::new(center, outer),
            holes: vec![Circle::new(center, inner)],
        }
    }

    pub fn disk(center: Complex64, radius: f64) -> Self {
        DiskWithHoles { outer: Circle::new(center, radius), holes: Vec::new() }
    }

    pub fn contains(&self, z: Complex64) -> bool {
        (z - self.outer.center).norm() <= self.outer.radius
            && self.holes.iter().all(|h| (z - h.center).norm() >= h.radius)
    }

    pub fn area(&self) -> f64 {
        std::f64::consts::PI
            * (self.outer.radius.powi(2) - self.holes.iter().map(|h| h.radius.powi(2)).sum::<f64>())
    }

    pub fn shifted(&self, by: Complex64) -> Self {
        DiskWithHoles {
            outer: Circle::new(self.outer.center + by, self.outer.radius),
            holes: self.holes.iter().map(|h| Circle::new(h.center + by, h.radius)).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MetricTag {
    /// pullback of the example family
    Tilde,
    /// piecewise neck/ghost weight
    Bar,
    Glued,
    Bubble,
    Flat,
}

/// Conformal factor `w` of a metric `w |dz|^2`, evaluated at local offsets.
pub trait ConformalWeight: Sync {
    fn tag(&self) -> MetricTag;
    fn weight(&self, z: Complex64) -> Result<f64>;
}

#[derive(Clone, Copy, Debug)]
pub struct FlatWeight(pub f64);

impl ConformalWeight for FlatWeight {
    fn tag(&self) -> MetricTag {
        MetricTag::Flat
    }
    fn weight(&self, _z: Complex64) -> Result<f64> {
        Ok(self.0)
    }
}

/// Quintic smoothstep on [0,1], clamped outside.
pub fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * x * (x * (x * 6.0 - 15.0) + 10.0)
}

/// Cutoff with value 0 on `s <= 1` and 1 on `s >= 2`.
pub fn cutoff(s: f64) -> f64 {
    smoothstep(s - 1.0)
}
