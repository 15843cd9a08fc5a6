//! Elementary functions of Taylor polynomials.
//!
//! Every function is applied by composing its univariate Taylor series about
//! the constant term `c` with the non-constant part of the argument.

use super::poly::TaylorPoly;
use super::DaError;

/// Univariate functions available on polynomials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Intrinsic {
    Sin,
    Cos,
    Exp,
    Ln,
    Reciprocal,
    Sqrt,
    Tanh,
    /// Integer power.
    Powi(i32),
    /// Real power, `c > 0` required.
    Powf(f64),
}

impl TaylorPoly {
    /// `Σ_k series[k]·(p - c)^k`, evaluated by Horner's rule.
    fn compose_series(&self, series: &[f64]) -> TaylorPoly {
        let tail = self.nonconstant_part();
        let mut acc = TaylorPoly::constant(self.space(), series[series.len() - 1]);
        for &s in series[..series.len() - 1].iter().rev() {
            acc = (&acc * &tail).add_constant(s);
        }
        acc
    }

    fn check_finite(self) -> Result<TaylorPoly, DaError> {
        if self.is_finite() {
            Ok(self)
        } else {
            Err(DaError::NonFinite(f64::NAN))
        }
    }

    pub fn sin(&self) -> TaylorPoly {
        let c = self.constant_term();
        let (s, co) = c.sin_cos();
        let mut fact = 1.0;
        let series = (0..=self.order())
            .map(|k| {
                if k > 0 {
                    fact *= k as f64;
                }
                let d = match k % 4 {
                    0 => s,
                    1 => co,
                    2 => -s,
                    _ => -co,
                };
                d / fact
            })
            .collect::<Vec<_>>();
        self.compose_series(&series)
    }

    pub fn cos(&self) -> TaylorPoly {
        let c = self.constant_term();
        let (s, co) = c.sin_cos();
        let mut fact = 1.0;
        let series = (0..=self.order())
            .map(|k| {
                if k > 0 {
                    fact *= k as f64;
                }
                let d = match k % 4 {
                    0 => co,
                    1 => -s,
                    2 => -co,
                    _ => s,
                };
                d / fact
            })
            .collect::<Vec<_>>();
        self.compose_series(&series)
    }

    pub fn exp(&self) -> TaylorPoly {
        let e = self.constant_term().exp();
        let mut term = e;
        let series = (0..=self.order())
            .map(|k| {
                if k > 0 {
                    term /= k as f64;
                }
                term
            })
            .collect::<Vec<_>>();
        self.compose_series(&series)
    }

    pub fn ln(&self) -> Result<TaylorPoly, DaError> {
        let c = self.constant_term();
        if c <= 0.0 {
            return Err(DaError::Domain { function: "ln", constant: c });
        }
        let mut series = vec![c.ln()];
        let mut pow = 1.0;
        for k in 1..=self.order() {
            pow /= c;
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            series.push(sign * pow / k as f64);
        }
        self.compose_series(&series).check_finite()
    }

    pub fn recip(&self) -> Result<TaylorPoly, DaError> {
        let c = self.constant_term();
        if c == 0.0 {
            return Err(DaError::Domain { function: "reciprocal", constant: c });
        }
        // 1/(c + t) = Σ (-1)^k t^k / c^{k+1}
        let mut term = 1.0 / c;
        let series = (0..=self.order())
            .map(|k| {
                if k > 0 {
                    term *= -1.0 / c;
                }
                term
            })
            .collect::<Vec<_>>();
        self.compose_series(&series).check_finite()
    }

    pub fn sqrt(&self) -> Result<TaylorPoly, DaError> {
        let c = self.constant_term();
        if c <= 0.0 {
            return Err(DaError::Domain { function: "sqrt", constant: c });
        }
        // sqrt(c + t) = sqrt(c) Σ binom(1/2, k) (t/c)^k
        let mut coef = c.sqrt();
        let series = (0..=self.order())
            .map(|k| {
                if k > 0 {
                    coef *= (0.5 - (k as f64 - 1.0)) / (k as f64) / c;
                }
                coef
            })
            .collect::<Vec<_>>();
        self.compose_series(&series).check_finite()
    }

    /// Hyperbolic tangent through the exponential: `1 - 2/(exp(2p) + 1)`.
    pub fn tanh(&self) -> TaylorPoly {
        let e = self.scale(2.0).exp().add_constant(1.0);
        let r = e.recip().expect("exp(2p) + 1 > 0");
        (r * -2.0).add_constant(1.0)
    }

    /// Integer power by repeated squaring; negative exponents go through the
    /// reciprocal.
    pub fn powi(&self, k: i32) -> Result<TaylorPoly, DaError> {
        let base = if k < 0 { self.recip()? } else { self.clone() };
        let mut e = k.unsigned_abs();
        let mut result = TaylorPoly::constant(self.space(), 1.0);
        let mut sq = base;
        while e > 0 {
            if e & 1 == 1 {
                result = &result * &sq;
            }
            e >>= 1;
            if e > 0 {
                sq = &sq * &sq;
            }
        }
        Ok(result)
    }

    /// Real power `exp(a·ln p)`; integral exponents take the `powi` route.
    pub fn powf(&self, a: f64) -> Result<TaylorPoly, DaError> {
        if a.fract() == 0.0 && a.abs() <= i32::MAX as f64 {
            return self.powi(a as i32);
        }
        let c = self.constant_term();
        if c <= 0.0 {
            return Err(DaError::Domain { function: "powf", constant: c });
        }
        Ok(self.ln()?.scale(a).exp())
    }

    pub fn apply(&self, f: Intrinsic) -> Result<TaylorPoly, DaError> {
        match f {
            Intrinsic::Sin => Ok(self.sin()),
            Intrinsic::Cos => Ok(self.cos()),
            Intrinsic::Exp => Ok(self.exp()),
            Intrinsic::Ln => self.ln(),
            Intrinsic::Reciprocal => self.recip(),
            Intrinsic::Sqrt => self.sqrt(),
            Intrinsic::Tanh => Ok(self.tanh()),
            Intrinsic::Powi(k) => self.powi(k),
            Intrinsic::Powf(a) => self.powf(a),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::da::{space, MultiIndex};

    fn uni(n: usize, coeffs: &[f64]) -> TaylorPoly {
        let s = space(1, n).unwrap();
        let mut c = coeffs.to_vec();
        c.resize(n + 1, 0.0);
        TaylorPoly::from_coeffs(&s, c).unwrap()
    }

    fn close(a: &TaylorPoly, b: &TaylorPoly, tol: f64) {
        for (x, y) in a.coeffs().iter().zip(b.coeffs()) {
            assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn maclaurin_examples() {
        let d = uni(3, &[0.0, 1.0]);
        close(&d.sin(), &uni(3, &[0.0, 1.0, 0.0, -1.0 / 6.0]), 1e-16);
        let d = uni(2, &[0.0, 1.0]);
        close(&d.exp(), &uni(2, &[1.0, 1.0, 0.5]), 1e-16);
        let p = uni(2, &[1.0, 1.0]);
        close(&p.recip().unwrap(), &uni(2, &[1.0, -1.0, 1.0]), 1e-16);
    }

    #[test]
    fn domain_errors() {
        let z = uni(3, &[0.0, 1.0]);
        assert!(matches!(z.recip(), Err(DaError::Domain { function: "reciprocal", .. })));
        assert!(matches!(z.sqrt(), Err(DaError::Domain { function: "sqrt", .. })));
        assert!(uni(3, &[-1.0, 1.0]).sqrt().is_err());
        assert!(uni(3, &[0.0, 1.0]).ln().is_err());
    }

    #[test]
    fn sqrt_squares_back() {
        let p = uni(6, &[2.0, 0.3, -0.1, 0.05]);
        let r = p.sqrt().unwrap();
        close(&(&r * &r), &p, 1e-14);
    }

    #[test]
    fn cos_and_sin_satisfy_pythagoras() {
        let s = space(2, 5).unwrap();
        let p = TaylorPoly::from_terms(
            &s,
            [(MultiIndex::new(vec![0, 0]), 0.7), (MultiIndex::new(vec![1, 0]), 1.0), (MultiIndex::new(vec![1, 1]), -0.4)],
        )
        .unwrap();
        let one = &(&p.sin() * &p.sin()) + &(&p.cos() * &p.cos());
        close(&one, &TaylorPoly::constant(&s, 1.0), 1e-14);
    }

    #[test]
    fn powers_agree() {
        let p = uni(5, &[1.5, 0.2, -0.3]);
        let cube = p.powi(3).unwrap();
        close(&cube, &(&(&p * &p) * &p), 1e-14);
        let via_exp = p.powf(2.5).unwrap();
        let direct = &p.powi(2).unwrap() * &p.sqrt().unwrap();
        close(&via_exp, &direct, 1e-13);
        let inv = p.powi(-2).unwrap();
        close(&(&inv * &p.powi(2).unwrap()), &uni(5, &[1.0]), 1e-14);
    }

    #[test]
    fn tanh_matches_series() {
        // tanh x = x - x^3/3 + 2x^5/15
        let d = uni(5, &[0.0, 1.0]);
        close(&d.tanh(), &uni(5, &[0.0, 1.0, 0.0, -1.0 / 3.0, 0.0, 2.0 / 15.0]), 1e-15);
    }
}
