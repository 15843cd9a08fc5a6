use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use super::space::{space, DaSpace, MultiIndex};
use super::DaError;

/// Coefficients smaller than this are flushed to zero after every operation.
pub const COEFF_FLOOR: f64 = 1e-300;

/// Truncated multivariate Taylor polynomial in `nvars` variables up to total
/// degree `order`, stored densely in the graded-lex layout of its [`DaSpace`].
#[derive(Clone)]
pub struct TaylorPoly {
    space: Arc<DaSpace>,
    coeffs: Vec<f64>,
}

impl TaylorPoly {
    pub fn zero(space: &Arc<DaSpace>) -> Self {
        TaylorPoly { space: space.clone(), coeffs: vec![0.0; space.len()] }
    }

    pub fn constant(space: &Arc<DaSpace>, c: f64) -> Self {
        let mut p = Self::zero(space);
        p.coeffs[0] = c;
        p
    }

    /// `center + δ_i` in the space `(nvars, order)`.
    pub fn variable(nvars: usize, order: usize, i: usize, center: f64) -> Result<Self, DaError> {
        if order == 0 {
            return Err(DaError::ZeroOrder);
        }
        let s = space(nvars, order)?;
        Self::variable_in(&s, i, center)
    }

    pub fn variable_in(space: &Arc<DaSpace>, i: usize, center: f64) -> Result<Self, DaError> {
        if space.order() == 0 {
            return Err(DaError::ZeroOrder);
        }
        if i >= space.nvars() {
            return Err(DaError::VariableOutOfRange { index: i, nvars: space.nvars() });
        }
        let mut p = Self::constant(space, center);
        // degree-1 monomials are e_0, e_1, ... in graded-lex order
        p.coeffs[1 + i] = 1.0;
        Ok(p)
    }

    /// Builds a polynomial from raw coefficients in the space's layout.
    pub fn from_coeffs(space: &Arc<DaSpace>, coeffs: Vec<f64>) -> Result<Self, DaError> {
        if coeffs.len() != space.len() {
            return Err(DaError::CoefficientCount { expected: space.len(), got: coeffs.len() });
        }
        if let Some(bad) = coeffs.iter().find(|c| !c.is_finite()) {
            return Err(DaError::NonFinite(*bad));
        }
        let mut p = TaylorPoly { space: space.clone(), coeffs };
        p.flush();
        Ok(p)
    }

    /// Builds a polynomial from `(β, a_β)` pairs; duplicate indices accumulate.
    pub fn from_terms<I>(space: &Arc<DaSpace>, terms: I) -> Result<Self, DaError>
    where
        I: IntoIterator<Item = (MultiIndex, f64)>,
    {
        let mut p = Self::zero(space);
        for (beta, a) in terms {
            let k = p.index_checked(&beta)?;
            p.coeffs[k] += a;
        }
        if let Some(bad) = p.coeffs.iter().find(|c| !c.is_finite()) {
            return Err(DaError::NonFinite(*bad));
        }
        p.flush();
        Ok(p)
    }

    fn index_checked(&self, beta: &MultiIndex) -> Result<usize, DaError> {
        if beta.nvars() != self.nvars() {
            return Err(DaError::Mismatch {
                left: (self.nvars(), self.order()),
                right: (beta.nvars(), self.order()),
            });
        }
        self.space
            .index_of(&beta.0)
            .ok_or(DaError::DegreeTooHigh { degree: beta.degree() as usize, order: self.order() })
    }

    pub fn space(&self) -> &Arc<DaSpace> {
        &self.space
    }

    pub fn nvars(&self) -> usize {
        self.space.nvars()
    }

    pub fn order(&self) -> usize {
        self.space.order()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeff(&self, beta: &MultiIndex) -> f64 {
        self.space.index_of(&beta.0).map_or(0.0, |k| self.coeffs[k])
    }

    pub fn set_coeff(&mut self, beta: &MultiIndex, value: f64) -> Result<(), DaError> {
        let k = self.index_checked(beta)?;
        self.coeffs[k] = value;
        Ok(())
    }

    pub fn constant_term(&self) -> f64 {
        self.coeffs[0]
    }

    /// Coefficient of `δ_i`.
    pub fn linear_coeff(&self, i: usize) -> f64 {
        self.coeffs[1 + i]
    }

    /// Non-zero terms in graded-lex order.
    pub fn terms(&self) -> impl Iterator<Item = (&[u32], f64)> + '_ {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(move |(k, c)| (self.space.exponents(k), *c))
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// Σ|a_β| over all non-constant terms.
    pub fn nonconstant_l1(&self) -> f64 {
        self.coeffs[1..].iter().map(|c| c.abs()).sum()
    }

    pub(crate) fn from_raw(space: Arc<DaSpace>, coeffs: Vec<f64>) -> Self {
        let mut p = TaylorPoly { space, coeffs };
        p.flush();
        p
    }

    pub(crate) fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    fn flush(&mut self) {
        for c in &mut self.coeffs {
            if c.abs() < COEFF_FLOOR {
                *c = 0.0;
            }
        }
    }

    pub(crate) fn check_same(&self, other: &TaylorPoly) -> Result<(), DaError> {
        if Arc::ptr_eq(&self.space, &other.space) || self.space.same_as(&other.space) {
            Ok(())
        } else {
            Err(DaError::Mismatch {
                left: (self.nvars(), self.order()),
                right: (other.nvars(), other.order()),
            })
        }
    }

    pub fn try_add(&self, other: &TaylorPoly) -> Result<TaylorPoly, DaError> {
        self.check_same(other)?;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect();
        Ok(Self::from_raw(self.space.clone(), coeffs))
    }

    pub fn try_sub(&self, other: &TaylorPoly) -> Result<TaylorPoly, DaError> {
        self.check_same(other)?;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect();
        Ok(Self::from_raw(self.space.clone(), coeffs))
    }

    /// Truncated product: convolution of coefficients, dropping every term of
    /// total degree above the order.
    pub fn try_mul(&self, other: &TaylorPoly) -> Result<TaylorPoly, DaError> {
        self.check_same(other)?;
        let mut out = vec![0.0; self.coeffs.len()];
        for (i, &a) in self.coeffs.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for &(j, k) in self.space.products(i) {
                out[k as usize] += a * other.coeffs[j as usize];
            }
        }
        Ok(Self::from_raw(self.space.clone(), out))
    }

    pub fn scale(&self, s: f64) -> TaylorPoly {
        Self::from_raw(self.space.clone(), self.coeffs.iter().map(|c| c * s).collect())
    }

    pub fn add_constant(&self, c: f64) -> TaylorPoly {
        let mut p = self.clone();
        p.coeffs[0] += c;
        p
    }

    /// Same polynomial with the constant term removed.
    pub fn nonconstant_part(&self) -> TaylorPoly {
        let mut p = self.clone();
        p.coeffs[0] = 0.0;
        p
    }

    /// Terms of total degree `<= d` only.
    pub fn truncated(&self, d: usize) -> TaylorPoly {
        let mut p = self.clone();
        if d < self.order() {
            let start = self.space.degree_range(d + 1).start;
            for c in &mut p.coeffs[start..] {
                *c = 0.0;
            }
        }
        p
    }

    /// Term-wise integral in `δ_i` with zero constant of integration; terms
    /// pushed past the order are dropped.
    pub fn antiderivative(&self, i: usize) -> Result<TaylorPoly, DaError> {
        if i >= self.nvars() {
            return Err(DaError::VariableOutOfRange { index: i, nvars: self.nvars() });
        }
        let mut out = vec![0.0; self.coeffs.len()];
        let mut e = vec![0u32; self.nvars()];
        for (k, &a) in self.coeffs.iter().enumerate() {
            if a == 0.0 || self.space.degree(k) as usize >= self.order() {
                continue;
            }
            e.copy_from_slice(self.space.exponents(k));
            e[i] += 1;
            let target = self.space.index_of(&e).expect("degree checked");
            out[target] = a / e[i] as f64;
        }
        Ok(Self::from_raw(self.space.clone(), out))
    }

    /// Formal partial derivative in `δ_i`. The top order of the result is zero.
    pub fn derivative(&self, i: usize) -> Result<TaylorPoly, DaError> {
        if i >= self.nvars() {
            return Err(DaError::VariableOutOfRange { index: i, nvars: self.nvars() });
        }
        let mut out = vec![0.0; self.coeffs.len()];
        let mut e = vec![0u32; self.nvars()];
        for (k, &a) in self.coeffs.iter().enumerate() {
            let b = self.space.exponents(k)[i];
            if a == 0.0 || b == 0 {
                continue;
            }
            e.copy_from_slice(self.space.exponents(k));
            e[i] -= 1;
            let target = self.space.index_of(&e).expect("lower degree exists");
            out[target] = a * b as f64;
        }
        Ok(Self::from_raw(self.space.clone(), out))
    }

    /// Values of all monomials at `dx`, built incrementally along the parent
    /// chain of the layout.
    pub(crate) fn monomial_values(space: &DaSpace, dx: &[f64]) -> Vec<f64> {
        let mut vals = vec![0.0; space.len()];
        vals[0] = 1.0;
        for k in 1..space.len() {
            let (p, v) = space.parent(k);
            vals[k] = vals[p] * dx[v];
        }
        vals
    }

    /// Numeric value at displacement `dx`.
    pub fn eval(&self, dx: &[f64]) -> Result<f64, DaError> {
        if dx.len() != self.nvars() {
            return Err(DaError::DimensionMismatch { expected: self.nvars(), got: dx.len() });
        }
        // Horner in total degree: accumulate the homogeneous parts from the top.
        let vals = Self::monomial_values(&self.space, dx);
        let mut acc = 0.0;
        for d in (0..=self.order()).rev() {
            let r = self.space.degree_range(d);
            acc += self.coeffs[r.clone()].iter().zip(&vals[r]).map(|(a, m)| a * m).sum::<f64>();
        }
        Ok(acc)
    }

    /// Substitutes polynomial arguments for the variables: `p(args_0, ..., args_{m-1})`.
    ///
    /// The arguments may live in a different space; the result lives in theirs.
    /// Arguments may carry constant parts.
    pub fn substitute(&self, args: &[TaylorPoly]) -> Result<TaylorPoly, DaError> {
        if args.len() != self.nvars() {
            return Err(DaError::DimensionMismatch { expected: self.nvars(), got: args.len() });
        }
        let target = args[0].space.clone();
        for a in &args[1..] {
            args[0].check_same(a)?;
        }
        let mut acc = TaylorPoly::constant(&target, self.coeffs[0]);
        if self.coeffs.len() == 1 {
            return Ok(acc);
        }
        let mut mono: Vec<Option<TaylorPoly>> = vec![None; self.space.len()];
        mono[0] = Some(TaylorPoly::constant(&target, 1.0));
        for k in 1..self.space.len() {
            let (p, v) = self.space.parent(k);
            let m = mono[p].as_ref().expect("parent precedes child").try_mul(&args[v])?;
            let a = self.coeffs[k];
            if a != 0.0 {
                for (dst, src) in acc.coeffs.iter_mut().zip(&m.coeffs) {
                    *dst += a * src;
                }
            }
            mono[k] = Some(m);
        }
        acc.flush();
        Ok(acc)
    }

    /// Re-expresses the polynomial on a child box: substitutes
    /// `δ_i ← offset_i + scale_i·δ_i'`.
    pub fn recenter(&self, offset: &[f64], scale: &[f64]) -> Result<TaylorPoly, DaError> {
        let m = self.nvars();
        if offset.len() != m || scale.len() != m {
            return Err(DaError::DimensionMismatch { expected: m, got: offset.len().min(scale.len()) });
        }
        for i in 0..m {
            if offset[i].abs() + scale[i].abs() > 1.0 + 1e-12 {
                return Err(DaError::ChildOutsideParent { index: i });
            }
        }
        let args = (0..m)
            .map(|i| {
                let mut v = TaylorPoly::zero(&self.space);
                v.coeffs[0] = offset[i];
                if self.order() > 0 {
                    v.coeffs[1 + i] = scale[i];
                }
                v
            })
            .collect::<Vec<_>>();
        self.substitute(&args)
    }

    /// Moves the polynomial into `target`, which must have at least as many
    /// variables. Extra variables are absent from the result.
    pub fn embed(&self, target: &Arc<DaSpace>) -> Result<TaylorPoly, DaError> {
        if target.nvars() < self.nvars() {
            return Err(DaError::DimensionMismatch { expected: self.nvars(), got: target.nvars() });
        }
        let args = (0..self.nvars())
            .map(|i| TaylorPoly::variable_in(target, i, 0.0))
            .collect::<Result<Vec<_>, _>>()?;
        self.substitute(&args)
    }

    /// Drops variables `nvars..` by setting them to zero and moves the result
    /// into `(nvars, order)`.
    pub fn restrict(&self, nvars: usize) -> Result<TaylorPoly, DaError> {
        let target = space(nvars, self.order())?;
        let args = (0..self.nvars())
            .map(|i| {
                if i < nvars {
                    TaylorPoly::variable_in(&target, i, 0.0)
                } else {
                    Ok(TaylorPoly::zero(&target))
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        self.substitute(&args)
    }

    /// Debug text form: one line `β_1 ... β_m coefficient` per non-zero term,
    /// graded-lex order, coefficients in shortest round-trip notation.
    pub fn to_debug_text(&self) -> String {
        let mut s = String::new();
        for (beta, a) in self.terms() {
            for b in beta {
                s.push_str(&b.to_string());
                s.push(' ');
            }
            s.push_str(&format!("{a:e}\n"));
        }
        s
    }

    pub fn from_debug_text(space: &Arc<DaSpace>, text: &str) -> Result<TaylorPoly, DaError> {
        let mut terms = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != space.nvars() + 1 {
                return Err(DaError::Parse { line: lineno + 1 });
            }
            let beta = fields[..space.nvars()]
                .iter()
                .map(|f| f.parse::<u32>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| DaError::Parse { line: lineno + 1 })?;
            let a: f64 = fields[space.nvars()].parse().map_err(|_| DaError::Parse { line: lineno + 1 })?;
            terms.push((MultiIndex(beta), a));
        }
        Self::from_terms(space, terms)
    }
}

impl fmt::Debug for TaylorPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TaylorPoly({}, {}) {{ ", self.nvars(), self.order())?;
        for (beta, a) in self.terms() {
            write!(f, "{beta:?}: {a:e}, ")?;
        }
        write!(f, "}}")
    }
}

impl PartialEq for TaylorPoly {
    fn eq(&self, other: &Self) -> bool {
        self.space.same_as(&other.space) && self.coeffs == other.coeffs
    }
}

// Operator forms panic on mismatched spaces; the `try_*` methods report it.
macro_rules! binop {
    ($tr:ident, $method:ident, $try:ident) => {
        impl $tr<TaylorPoly> for TaylorPoly {
            type Output = TaylorPoly;
            fn $method(self, rhs: TaylorPoly) -> TaylorPoly {
                self.$try(&rhs).expect("polynomials from different DA spaces")
            }
        }
        impl $tr<&TaylorPoly> for TaylorPoly {
            type Output = TaylorPoly;
            fn $method(self, rhs: &TaylorPoly) -> TaylorPoly {
                self.$try(rhs).expect("polynomials from different DA spaces")
            }
        }
        impl $tr<&TaylorPoly> for &TaylorPoly {
            type Output = TaylorPoly;
            fn $method(self, rhs: &TaylorPoly) -> TaylorPoly {
                self.$try(rhs).expect("polynomials from different DA spaces")
            }
        }
    };
}

binop!(Add, add, try_add);
binop!(Sub, sub, try_sub);
binop!(Mul, mul, try_mul);

impl Add<f64> for TaylorPoly {
    type Output = TaylorPoly;
    fn add(mut self, rhs: f64) -> TaylorPoly {
        self.coeffs[0] += rhs;
        self
    }
}

impl Sub<f64> for TaylorPoly {
    type Output = TaylorPoly;
    fn sub(mut self, rhs: f64) -> TaylorPoly {
        self.coeffs[0] -= rhs;
        self
    }
}

impl Mul<f64> for TaylorPoly {
    type Output = TaylorPoly;
    fn mul(self, rhs: f64) -> TaylorPoly {
        self.scale(rhs)
    }
}

impl Neg for TaylorPoly {
    type Output = TaylorPoly;
    fn neg(mut self) -> TaylorPoly {
        for c in &mut self.coeffs {
            *c = -*c;
        }
        self
    }
}
