//! Exact asymptotic expressions in the sequence index.
//!
//! A sequence indexed by `i` is modelled as a function of a continuous
//! parameter `t` of the form `sum_k c_k exp(-r_k t)` with exact rational
//! rates `r_k >= 0` and exact complex-rational coefficients. Limits as
//! `t -> infinity` reduce to comparing leading terms.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::{Complex, Complex64};
use num_rational::Rational64;
use num_traits::{ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Q = Rational64;
pub type Coeff = Complex<Q>;

/// Nonnegative exact decay exponent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rate(Q);

impl Rate {
    pub fn new(value: Q) -> Result<Self> {
        if value < Q::zero() {
            return Err(Error::NegativeRate(value.to_string()));
        }
        Ok(Rate(value))
    }

    pub fn integer(n: i64) -> Self {
        Rate::new(Q::from_integer(n)).expect("nonnegative integer rate")
    }

    pub fn zero() -> Self {
        Rate(Q::zero())
    }

    pub fn value(&self) -> Q {
        self.0
    }

    pub fn as_f64(&self) -> f64 {
        q_to_f64(self.0)
    }
}

impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub(crate) fn q_to_f64(q: Q) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

pub(crate) fn coeff_to_c64(c: &Coeff) -> Complex64 {
    Complex64::new(q_to_f64(c.re), q_to_f64(c.im))
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Term {
    pub coeff: Coeff,
    pub rate: Rate,
}

/// `sum_k c_k exp(-r_k t)`, stored with strictly increasing rates and no
/// zero coefficients. The empty term list is the zero expression.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct RateExpr {
    terms: Vec<Term>,
}

impl RateExpr {
    pub fn zero() -> Self {
        RateExpr { terms: Vec::new() }
    }

    pub fn term(coeff: Coeff, rate: Rate) -> Self {
        Self::from_terms([Term { coeff, rate }])
    }

    /// Real rational coefficient times `exp(-rate t)`.
    pub fn real(coeff: Q, rate: Rate) -> Self {
        Self::term(Coeff::new(coeff, Q::zero()), rate)
    }

    pub fn constant(coeff: Coeff) -> Self {
        Self::term(coeff, Rate::zero())
    }

    /// Builds a normalized expression: like rates merged, zeros dropped,
    /// rates sorted ascending.
    pub fn from_terms<I: IntoIterator<Item = Term>>(terms: I) -> Self {
        let mut all: Vec<Term> = terms.into_iter().collect();
        all.sort_by(|a, b| a.rate.cmp(&b.rate));
        let mut out: Vec<Term> = Vec::with_capacity(all.len());
        for t in all {
            match out.last_mut() {
                Some(last) if last.rate == t.rate => last.coeff = last.coeff + t.coeff,
                _ => out.push(t),
            }
        }
        out.retain(|t| !t.coeff.is_zero());
        RateExpr { terms: out }
    }

    pub fn normalize(&self) -> Self {
        Self::from_terms(self.terms.iter().cloned())
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Dominant term as `t -> infinity` (smallest rate).
    pub fn leading(&self) -> Option<(Coeff, Rate)> {
        self.terms.first().map(|t| (t.coeff, t.rate))
    }

    pub fn leading_f64(&self) -> Option<(Complex64, Rate)> {
        self.leading().map(|(c, r)| (coeff_to_c64(&c), r))
    }

    /// `self(t) / scale(t)` evaluated without forming either factor, so
    /// tiny magnitudes at large `t` do not underflow.
    pub fn evaluate_over(&self, t: f64, scale: &Scale) -> Complex64 {
        let p = scale.rate.as_f64();
        let mut re = KahanSum::default();
        let mut im = KahanSum::default();
        for term in &self.terms {
            let e = (-(term.rate.as_f64() - p) * t).exp() / scale.coef;
            let c = coeff_to_c64(&term.coeff);
            re.add(c.re * e);
            im.add(c.im * e);
        }
        Complex64::new(re.value(), im.value())
    }

    pub fn scale_by(&self, k: Q) -> Self {
        Self::from_terms(self.terms.iter().map(|t| Term {
            coeff: t.coeff * Coeff::new(k, Q::zero()),
            rate: t.rate,
        }))
    }

    /// Floating evaluation at index `t` with compensated summation.
    pub fn evaluate(&self, t: f64) -> Complex64 {
        let mut re = KahanSum::default();
        let mut im = KahanSum::default();
        for term in &self.terms {
            let e = (-term.rate.as_f64() * t).exp();
            let c = coeff_to_c64(&term.coeff);
            re.add(c.re * e);
            im.add(c.im * e);
        }
        Complex64::new(re.value(), im.value())
    }
}

impl fmt::Display for RateExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, t) in self.terms.iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({}+{}i)e^(-{}t)", t.coeff.re, t.coeff.im, t.rate)?;
        }
        Ok(())
    }
}

impl Add for &RateExpr {
    type Output = RateExpr;
    fn add(self, rhs: &RateExpr) -> RateExpr {
        RateExpr::from_terms(self.terms.iter().chain(rhs.terms.iter()).cloned())
    }
}

impl Add for RateExpr {
    type Output = RateExpr;
    fn add(self, rhs: RateExpr) -> RateExpr {
        &self + &rhs
    }
}

impl Neg for &RateExpr {
    type Output = RateExpr;
    fn neg(self) -> RateExpr {
        RateExpr {
            terms: self
                .terms
                .iter()
                .map(|t| Term { coeff: -t.coeff, rate: t.rate })
                .collect(),
        }
    }
}

impl Neg for RateExpr {
    type Output = RateExpr;
    fn neg(self) -> RateExpr {
        -&self
    }
}

impl Sub for &RateExpr {
    type Output = RateExpr;
    fn sub(self, rhs: &RateExpr) -> RateExpr {
        self + &(-rhs)
    }
}

impl Sub for RateExpr {
    type Output = RateExpr;
    fn sub(self, rhs: RateExpr) -> RateExpr {
        &self - &rhs
    }
}

/// Limit of a ratio of two sequences as `t -> infinity`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LimitClass {
    Zero,
    Finite(Complex64),
    Infinite,
}

impl LimitClass {
    pub fn is_bounded(&self) -> bool {
        !matches!(self, LimitClass::Infinite)
    }
}

fn classify(num: Option<(Complex64, Rate)>, den: (Complex64, Rate)) -> LimitClass {
    match num {
        None => LimitClass::Zero,
        Some((c, r)) => match r.cmp(&den.1) {
            Ordering::Greater => LimitClass::Zero,
            Ordering::Less => LimitClass::Infinite,
            Ordering::Equal => LimitClass::Finite(c / den.0),
        },
    }
}

pub fn limit_ratio(num: &RateExpr, den: &RateExpr) -> Result<LimitClass> {
    let d = den.leading_f64().ok_or(Error::ZeroDenominator)?;
    Ok(classify(num.leading_f64(), d))
}

/// Positive scale sequence `coef * exp(-rate t)`.
///
/// The coefficient is a float because scales built from distances
/// (ghost scales) carry moduli of complex rationals; the rate stays exact,
/// and every limit classification only depends on rates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Scale {
    pub coef: f64,
    pub rate: Rate,
}

impl Scale {
    pub fn new(coef: f64, rate: Rate) -> Result<Self> {
        if !(coef.is_finite() && coef > 0.0) {
            return Err(Error::BadScale(coef));
        }
        Ok(Scale { coef, rate })
    }

    pub fn unit() -> Self {
        Scale { coef: 1.0, rate: Rate::zero() }
    }

    pub fn times(&self, k: f64) -> Self {
        Scale { coef: self.coef * k, rate: self.rate }
    }

    pub fn evaluate(&self, t: f64) -> f64 {
        self.coef * (-self.rate.as_f64() * t).exp()
    }

    /// `ln(scale(t))` without under/overflow.
    pub fn ln_at(&self, t: f64) -> f64 {
        self.coef.ln() - self.rate.as_f64() * t
    }

    /// `self(t) / other(t)`.
    pub fn ratio_at(&self, other: &Scale, t: f64) -> f64 {
        (self.coef / other.coef) * (-(self.rate.as_f64() - other.rate.as_f64()) * t).exp()
    }

    fn leading(&self) -> (Complex64, Rate) {
        (Complex64::new(self.coef, 0.0), self.rate)
    }
}

pub fn limit_ratio_scale(num: &RateExpr, den: &Scale) -> LimitClass {
    classify(num.leading_f64(), den.leading())
}

pub fn limit_scale_ratio(num: &Scale, den: &Scale) -> LimitClass {
    classify(Some(num.leading()), den.leading())
}

#[derive(Default, Clone, Copy, Debug)]
pub(crate) struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        // Neumaier variant
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl Mul<Q> for &RateExpr {
    type Output = RateExpr;
    fn mul(self, k: Q) -> RateExpr {
        self.scale_by(k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(n: i64, d: i64) -> Q {
        Q::new(n, d)
    }

    fn e(c: i64, r: i64) -> RateExpr {
        RateExpr::real(Q::from_integer(c), Rate::integer(r))
    }

    #[test]
    fn add_cancels_and_keeps() {
        assert!((e(1, 1) + e(-1, 1)).is_zero());
        let s = e(1, 0) + e(1, 1);
        assert_eq!(s.terms().len(), 2);
        assert_eq!(&s + &RateExpr::zero(), s);
    }

    #[test]
    fn leading_term() {
        let x = e(3, 2) + e(5, 1);
        let (c, r) = x.leading().unwrap();
        assert_eq!(c, Coeff::new(q(5, 1), q(0, 1)));
        assert_eq!(r, Rate::integer(1));
        assert!(RateExpr::zero().leading().is_none());
        assert_eq!(e(2, 0).leading().unwrap().1, Rate::zero());
    }

    #[test]
    fn limit_ratio_examples() {
        assert_eq!(limit_ratio(&e(1, 2), &e(1, 1)).unwrap(), LimitClass::Zero);
        assert_eq!(
            limit_ratio(&e(1, 1), &e(1, 1)).unwrap(),
            LimitClass::Finite(Complex64::new(1.0, 0.0))
        );
        let num = RateExpr::real(q(3, 10), Rate::integer(1));
        match limit_ratio(&num, &e(1, 1)).unwrap() {
            LimitClass::Finite(v) => assert!((v - Complex64::new(0.3, 0.0)).norm() < 1e-15),
            other => panic!("{other:?}"),
        }
        assert_eq!(limit_ratio(&e(1, 1), &RateExpr::zero()), Err(Error::ZeroDenominator));
    }

    #[test]
    fn evaluate_examples() {
        assert_eq!(e(1, 1).evaluate(0.0), Complex64::new(1.0, 0.0));
        assert!((e(1, 1).evaluate(2f64.ln()).re - 0.5).abs() < 1e-15);
        assert_eq!(RateExpr::zero().evaluate(3.0), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn negative_rate_rejected() {
        assert!(Rate::new(q(-1, 2)).is_err());
    }

    fn arb_expr() -> impl Strategy<Value = RateExpr> {
        prop::collection::vec((-20i64..20, -20i64..20, 1i64..6, 0i64..9), 1..5).prop_map(|v| {
            RateExpr::from_terms(v.into_iter().map(|(re, im, den, num)| Term {
                coeff: Coeff::new(Q::new(re, den), Q::new(im, den)),
                rate: Rate::new(Q::new(num, 2)).unwrap(),
            }))
        })
    }

    proptest! {
        #[test]
        fn normalize_idempotent(x in arb_expr()) {
            prop_assert_eq!(x.normalize().normalize(), x.normalize());
        }

        #[test]
        fn self_ratio_is_one(x in arb_expr()) {
            prop_assume!(!x.is_zero());
            prop_assert_eq!(limit_ratio(&x, &x).unwrap(), LimitClass::Finite(Complex64::new(1.0, 0.0)));
        }

        #[test]
        fn ratio_antisymmetry(a in arb_expr(), b in arb_expr()) {
            prop_assume!(!a.is_zero() && !b.is_zero());
            let ab = limit_ratio(&a, &b).unwrap();
            let ba = limit_ratio(&b, &a).unwrap();
            match ab {
                LimitClass::Zero => prop_assert_eq!(ba, LimitClass::Infinite),
                LimitClass::Infinite => prop_assert_eq!(ba, LimitClass::Zero),
                LimitClass::Finite(v) => match ba {
                    LimitClass::Finite(w) => prop_assert!((v * w - 1.0).norm() < 1e-12),
                    other => prop_assert!(false, "{:?}", other),
                },
            }
        }

        #[test]
        fn finite_limit_matches_evaluation(a in arb_expr(), b in arb_expr()) {
            prop_assume!(!a.is_zero() && !b.is_zero());
            if let LimitClass::Finite(v) = limit_ratio(&a, &b).unwrap() {
                let r = a.evaluate(60.0) / b.evaluate(60.0);
                prop_assert!((r - v).norm() < 1e-6);
            }
        }
    }
}
