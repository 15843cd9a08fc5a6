use std::sync::Arc;

use super::poly::TaylorPoly;
use super::space::DaSpace;
use super::DaError;

/// Condition-number ceiling for inverting the linear part of a map.
pub const MAX_CONDITION: f64 = 1e12;

/// Ordered list of polynomials sharing one space, with the expansion point.
#[derive(Debug, Clone, PartialEq)]
pub struct TaylorMap {
    components: Vec<TaylorPoly>,
    reference_point: Vec<f64>,
}

impl TaylorMap {
    pub fn new(components: Vec<TaylorPoly>, reference_point: Vec<f64>) -> Result<Self, DaError> {
        if let Some(first) = components.first() {
            for c in &components[1..] {
                first.check_same(c)?;
            }
            if reference_point.len() != first.nvars() {
                return Err(DaError::DimensionMismatch { expected: first.nvars(), got: reference_point.len() });
            }
        }
        Ok(TaylorMap { components, reference_point })
    }

    /// Map with a zero reference point.
    pub fn from_components(components: Vec<TaylorPoly>) -> Result<Self, DaError> {
        let m = components.first().map_or(0, |c| c.nvars());
        Self::new(components, vec![0.0; m])
    }

    pub fn identity(space: &Arc<DaSpace>) -> Self {
        let components = (0..space.nvars())
            .map(|i| TaylorPoly::variable_in(space, i, 0.0).expect("index within space"))
            .collect();
        TaylorMap { components, reference_point: vec![0.0; space.nvars()] }
    }

    pub fn components(&self) -> &[TaylorPoly] {
        &self.components
    }

    pub fn into_components(self) -> Vec<TaylorPoly> {
        self.components
    }

    pub fn reference_point(&self) -> &[f64] {
        &self.reference_point
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn nvars(&self) -> usize {
        self.components.first().map_or(0, |c| c.nvars())
    }

    pub fn order(&self) -> usize {
        self.components.first().map_or(0, |c| c.order())
    }

    pub fn constant_part(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.constant_term()).collect()
    }

    /// Jacobian at the expansion point, row per component.
    pub fn linear_part(&self) -> Vec<Vec<f64>> {
        let m = self.nvars();
        self.components.iter().map(|c| (0..m).map(|j| c.linear_coeff(j)).collect()).collect()
    }

    pub fn evaluate(&self, dx: &[f64]) -> Result<Vec<f64>, DaError> {
        self.components.iter().map(|c| c.eval(dx)).collect()
    }

    fn check_origin_preserving(&self) -> Result<(), DaError> {
        for (i, c) in self.components.iter().enumerate() {
            let tol = 1e-12 * c.max_abs().max(1.0);
            if c.constant_term().abs() > tol {
                return Err(DaError::NonZeroConstant { component: i, value: c.constant_term() });
            }
        }
        Ok(())
    }

    /// Truncated composition `outer ∘ inner`. `inner` must have zero constant
    /// parts so the result is exact to the order.
    pub fn compose(outer: &TaylorMap, inner: &TaylorMap) -> Result<TaylorMap, DaError> {
        if inner.len() != outer.nvars() {
            return Err(DaError::DimensionMismatch { expected: outer.nvars(), got: inner.len() });
        }
        inner.check_origin_preserving()?;
        if let (Some(a), Some(b)) = (outer.components.first(), inner.components.first()) {
            if a.order() != b.order() {
                return Err(DaError::Mismatch { left: (a.nvars(), a.order()), right: (b.nvars(), b.order()) });
            }
        }
        let components = outer
            .components
            .iter()
            .map(|c| c.substitute(&inner.components))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(TaylorMap { components, reference_point: inner.reference_point.clone() })
    }

    /// Inverse of a square, origin-preserving map.
    ///
    /// The linear part is inverted by partial-pivot elimination; the
    /// nonlinear part by the fixed point `X ← L⁻¹(I − N∘X)`, which gains one
    /// order per iteration.
    pub fn invert(&self) -> Result<TaylorMap, DaError> {
        let m = self.nvars();
        if self.len() != m {
            return Err(DaError::NotSquare { components: self.len(), nvars: m });
        }
        self.check_origin_preserving()?;
        let (linv, condition) = invert_matrix(&self.linear_part())?;
        if condition > MAX_CONDITION {
            return Err(DaError::Singular { condition });
        }
        let space = self.components[0].space().clone();
        let ident = TaylorMap::identity(&space);

        // nonlinear part N = M - L
        let nonlinear: Vec<TaylorPoly> = self
            .components
            .iter()
            .map(|c| {
                let mut p = c.nonconstant_part();
                for j in 0..m {
                    p.coeffs_mut()[1 + j] = 0.0;
                }
                p
            })
            .collect();
        let nonlinear = TaylorMap { components: nonlinear, reference_point: vec![0.0; m] };

        let apply_linv = |v: &[TaylorPoly]| -> Vec<TaylorPoly> {
            (0..m)
                .map(|i| {
                    let mut acc = TaylorPoly::zero(&space);
                    for (j, vj) in v.iter().enumerate() {
                        if linv[i][j] != 0.0 {
                            acc = &acc + &vj.scale(linv[i][j]);
                        }
                    }
                    acc
                })
                .collect()
        };

        let mut x = TaylorMap { components: apply_linv(&ident.components), reference_point: vec![0.0; m] };
        for _ in 1..space.order().max(1) {
            let nx = TaylorMap::compose(&nonlinear, &x)?;
            let rhs: Vec<TaylorPoly> =
                ident.components.iter().zip(&nx.components).map(|(a, b)| a - b).collect();
            x = TaylorMap { components: apply_linv(&rhs), reference_point: vec![0.0; m] };
        }
        Ok(x)
    }

    /// Component-wise scaling, e.g. for unit conversion.
    pub fn scaled(&self, factors: &[f64]) -> Result<TaylorMap, DaError> {
        if factors.len() != self.len() {
            return Err(DaError::DimensionMismatch { expected: self.len(), got: factors.len() });
        }
        Ok(TaylorMap {
            components: self.components.iter().zip(factors).map(|(c, f)| c.scale(*f)).collect(),
            reference_point: self.reference_point.clone(),
        })
    }
}

/// Inverse of a square matrix by Gauss-Jordan elimination with partial
/// pivoting, plus the 1-norm condition number `‖A‖₁‖A⁻¹‖₁`.
pub fn invert_matrix(a: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, f64), DaError> {
    let n = a.len();
    if a.iter().any(|row| row.len() != n) {
        return Err(DaError::NotSquare { components: n, nvars: a.first().map_or(0, |r| r.len()) });
    }
    let mut work: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| work[i][col].abs().total_cmp(&work[j][col].abs()))
            .expect("non-empty range");
        if work[pivot][col] == 0.0 {
            return Err(DaError::Singular { condition: f64::INFINITY });
        }
        work.swap(col, pivot);
        let p = work[col][col];
        for v in &mut work[col] {
            *v /= p;
        }
        let pivot = work[col].clone();
        for (row, r) in work.iter_mut().enumerate() {
            let f = r[col];
            if row != col && f != 0.0 {
                for (w, p) in r.iter_mut().zip(&pivot) {
                    *w -= f * p;
                }
            }
        }
    }
    let inv: Vec<Vec<f64>> = work.into_iter().map(|r| r[n..].to_vec()).collect();
    let norm1 = |m: &[Vec<f64>]| (0..n).map(|j| m.iter().map(|r| r[j].abs()).sum::<f64>()).fold(0.0, f64::max);
    let condition = norm1(a) * norm1(&inv);
    Ok((inv, condition))
}
