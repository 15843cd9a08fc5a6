//! Interval arithmetic and enclosures of Taylor polynomials over the unit box.
//!
//! Endpoints are ordinary doubles. Enclosures produced by [`bound_poly`] and
//! [`bound_map`] are padded outward by a small relative amount so that
//! floating-point evaluation error cannot push a sampled value outside.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::da::{TaylorMap, TaylorPoly};

/// Default relative outward padding applied to polynomial enclosures.
pub const DEFAULT_PADDING: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum IntervalError {
    #[error("invalid interval [{lo}, {hi}]")]
    Invalid { lo: f64, hi: f64 },
    #[error("remainder has {got} entries for a map with {expected} components")]
    LengthMismatch { expected: usize, got: usize },
    #[error("remainder entry {0} is negative or not finite")]
    BadRemainder(f64),
}

#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl fmt::Debug for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:e}, {:e}]", self.lo, self.hi)
    }
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self, IntervalError> {
        if lo.is_finite() && hi.is_finite() && lo <= hi {
            Ok(Interval { lo, hi })
        } else {
            Err(IntervalError::Invalid { lo, hi })
        }
    }

    pub fn point(x: f64) -> Self {
        Interval { lo: x, hi: x }
    }

    /// `[-r, r]`.
    pub fn symmetric(r: f64) -> Self {
        Interval { lo: -r.abs(), hi: r.abs() }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    /// Widens both endpoints by `rel·max(|lo|, |hi|)`.
    pub fn padded(&self, rel: f64) -> Self {
        let pad = rel * self.lo.abs().max(self.hi.abs());
        Interval { lo: self.lo - pad, hi: self.hi + pad }
    }

    pub fn hull(&self, other: &Interval) -> Self {
        Interval { lo: self.lo.min(other.lo), hi: self.hi.max(other.hi) }
    }
}

impl Add for Interval {
    type Output = Interval;
    fn add(self, rhs: Interval) -> Interval {
        Interval { lo: self.lo + rhs.lo, hi: self.hi + rhs.hi }
    }
}

impl Sub for Interval {
    type Output = Interval;
    fn sub(self, rhs: Interval) -> Interval {
        Interval { lo: self.lo - rhs.hi, hi: self.hi - rhs.lo }
    }
}

impl Mul for Interval {
    type Output = Interval;
    fn mul(self, rhs: Interval) -> Interval {
        let p = [self.lo * rhs.lo, self.lo * rhs.hi, self.hi * rhs.lo, self.hi * rhs.hi];
        Interval {
            lo: p.iter().copied().fold(f64::INFINITY, f64::min),
            hi: p.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

pub fn iadd(a: Interval, b: Interval) -> Interval {
    a + b
}

pub fn isub(a: Interval, b: Interval) -> Interval {
    a - b
}

pub fn imul(a: Interval, b: Interval) -> Interval {
    a * b
}

/// One interval per output component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalBox(pub Vec<Interval>);

impl IntervalBox {
    pub fn components(&self) -> &[Interval] {
        &self.0
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.0.len() && self.0.iter().zip(x).all(|(i, v)| i.contains(*v))
    }
}

/// Per-component non-negative remainder magnitudes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemainderEstimate(pub Vec<f64>);

impl RemainderEstimate {
    pub fn new(values: Vec<f64>) -> Result<Self, IntervalError> {
        if let Some(bad) = values.iter().find(|r| !(r.is_finite() && **r >= 0.0)) {
            return Err(IntervalError::BadRemainder(*bad));
        }
        Ok(RemainderEstimate(values))
    }

    pub fn zeros(n: usize) -> Self {
        RemainderEstimate(vec![0.0; n])
    }
}

/// Enclosure of `p` over `[-1, 1]^m`: the constant term plus the sum of the
/// absolute values of all other coefficients, padded by `padding` (relative)
/// unless the polynomial is constant.
pub fn bound_poly_with(p: &TaylorPoly, padding: f64) -> Interval {
    let c = p.constant_term();
    let r = p.nonconstant_l1();
    if r == 0.0 {
        // a constant evaluates exactly
        return Interval::point(c);
    }
    Interval { lo: c - r, hi: c + r }.padded(padding)
}

pub fn bound_poly(p: &TaylorPoly) -> Interval {
    bound_poly_with(p, DEFAULT_PADDING)
}

/// Component-wise [`bound_poly`] widened by `[-R_i, R_i]`.
pub fn bound_map(map: &TaylorMap, rem: &RemainderEstimate) -> Result<IntervalBox, IntervalError> {
    if rem.0.len() != map.len() {
        return Err(IntervalError::LengthMismatch { expected: map.len(), got: rem.0.len() });
    }
    Ok(IntervalBox(
        map.components()
            .iter()
            .zip(&rem.0)
            .map(|(c, r)| bound_poly(c) + Interval::symmetric(*r))
            .collect(),
    ))
}

/// Sampled range of `p` over `[-1, 1]^m`; an inner approximation of the true
/// range used to validate enclosures.
pub fn range_oracle(p: &TaylorPoly, samples: usize, seed: u64) -> Interval {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dx = vec![0.0; p.nvars()];
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for _ in 0..samples.max(1) {
        for v in &mut dx {
            *v = rng.gen_range(-1.0..=1.0);
        }
        let y = p.eval(&dx).expect("sample has the polynomial's dimension");
        lo = lo.min(y);
        hi = hi.max(y);
    }
    Interval { lo, hi }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::da::{space, MultiIndex};

    fn iv(lo: f64, hi: f64) -> Interval {
        Interval::new(lo, hi).unwrap()
    }

    fn poly(m: usize, n: usize, terms: &[(&[u32], f64)]) -> TaylorPoly {
        let s = space(m, n).unwrap();
        TaylorPoly::from_terms(&s, terms.iter().map(|(b, a)| (MultiIndex::new(b.to_vec()), *a))).unwrap()
    }

    fn approx(a: Interval, lo: f64, hi: f64) {
        assert!((a.lo - lo).abs() <= 1e-10 * (1.0 + lo.abs()) && (a.hi - hi).abs() <= 1e-10 * (1.0 + hi.abs()), "{a:?}");
        assert!(a.lo <= lo && a.hi >= hi, "padding must be outward: {a:?}");
    }

    #[test]
    fn elementary_operators() {
        assert_eq!(iadd(iv(1.0, 2.0), iv(-1.0, 3.0)), iv(0.0, 5.0));
        assert_eq!(imul(iv(1.0, 2.0), iv(-1.0, 3.0)), iv(-2.0, 6.0));
        let (a, b) = (0.3, 1.7);
        assert_eq!(isub(iv(a, b), iv(a, b)), iv(a - b, b - a));
    }

    #[test]
    fn invalid_interval_rejected() {
        assert!(Interval::new(2.0, 1.0).is_err());
        assert!(Interval::new(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn bound_poly_examples() {
        approx(bound_poly(&poly(1, 2, &[(&[0], 1.0), (&[1], 2.0), (&[2], -3.0)])), -4.0, 6.0);
        assert_eq!(bound_poly(&poly(2, 2, &[(&[0, 0], 7.0)])), iv(7.0, 7.0));
        approx(bound_poly(&poly(2, 2, &[(&[1, 1], 1.0)])), -1.0, 1.0);
    }

    #[test]
    fn bound_map_examples() {
        let p = poly(1, 2, &[(&[0], 1.0), (&[1], 2.0), (&[2], -3.0)]);
        let m = TaylorMap::from_components(vec![p.clone()]).unwrap();
        let b = bound_map(&m, &RemainderEstimate::new(vec![0.1]).unwrap()).unwrap();
        approx(b.0[0], -4.1, 6.1);
        let b0 = bound_map(&m, &RemainderEstimate::zeros(1)).unwrap();
        assert_eq!(b0.0[0], bound_poly(&p));

        let m2 = TaylorMap::from_components(vec![p.clone(), p.clone()]).unwrap();
        let b = bound_map(&m2, &RemainderEstimate::new(vec![0.1, 1.0]).unwrap()).unwrap();
        approx(b.0[0], -4.1, 6.1);
        approx(b.0[1], -5.0, 7.0);
        assert!(matches!(bound_map(&m2, &RemainderEstimate::zeros(1)), Err(IntervalError::LengthMismatch { .. })));
    }

    #[test]
    fn negative_remainder_rejected() {
        assert!(RemainderEstimate::new(vec![0.1, -1.0]).is_err());
    }

    #[test]
    fn range_oracle_examples() {
        assert_eq!(range_oracle(&poly(2, 2, &[(&[0, 0], 7.0)]), 100, 1), iv(7.0, 7.0));
        let r = range_oracle(&poly(1, 3, &[(&[1], 1.0)]), 20_000, 3);
        assert!((r.lo + 1.0).abs() < 0.01 && (r.hi - 1.0).abs() < 0.01, "{r:?}");
    }
}
