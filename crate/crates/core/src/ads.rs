//! Automatic domain splitting: truncation-error estimates from per-order
//! coefficient sizes, split-direction selection and the splitting run.

use serde::{Deserialize, Serialize};

use crate::da::{TaylorMap, TaylorPoly};

/// Box in physical units with its split history from the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub center: Vec<f64>,
    pub half_width: Vec<f64>,
    pub lineage: Vec<Split>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub var: usize,
    pub side: Side,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

impl Domain {
    pub fn new(center: Vec<f64>, half_width: Vec<f64>) -> Result<Self, String> {
        if center.len() != half_width.len() || center.is_empty() {
            return Err("domain center and half-width must have the same, non-zero length".into());
        }
        if half_width.iter().any(|h| !(h.is_finite() && *h > 0.0)) || center.iter().any(|c| !c.is_finite()) {
            return Err("domain half-widths must be positive and finite".into());
        }
        Ok(Domain { center, half_width, lineage: Vec::new() })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn volume(&self) -> f64 {
        self.half_width.iter().map(|h| 2.0 * h).product()
    }

    pub fn lo(&self, j: usize) -> f64 {
        self.center[j] - self.half_width[j]
    }

    pub fn hi(&self, j: usize) -> f64 {
        self.center[j] + self.half_width[j]
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        (0..self.dim()).all(|j| self.lo(j) <= x[j] && x[j] <= self.hi(j))
    }

    /// Physical point for unit-box coordinates `ξ ∈ [-1, 1]^m`.
    pub fn point(&self, xi: &[f64]) -> Vec<f64> {
        (0..self.dim()).map(|j| self.center[j] + self.half_width[j] * xi[j]).collect()
    }

    /// Lineage as a compact string such as `0L1R`; empty for the root.
    pub fn lineage_tag(&self) -> String {
        self.lineage
            .iter()
            .map(|s| format!("{}{}", s.var, if s.side == Side::Left { 'L' } else { 'R' }))
            .collect()
    }
}

/// Halves the box along `j`.
pub fn split(dom: &Domain, j: usize) -> (Domain, Domain) {
    let h = 0.5 * dom.half_width[j];
    let child = |sign: f64, side| {
        let mut d = dom.clone();
        d.center[j] += sign * h;
        d.half_width[j] = h;
        d.lineage.push(Split { var: j, side });
        d
    };
    (child(-1.0, Side::Left), child(1.0, Side::Right))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdsConfig {
    pub order: usize,
    /// `None` never splits.
    pub e_tol: Option<f64>,
    pub n_max: usize,
}

impl Default for AdsConfig {
    fn default() -> Self {
        AdsConfig { order: 4, e_tol: Some(1e-4), n_max: 15 }
    }
}

impl AdsConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.order < 2 {
            return Err("ads.order must be at least 2".into());
        }
        if let Some(e) = self.e_tol {
            if !(e > 0.0) {
                return Err("ads.e_tol must be positive".into());
            }
        }
        Ok(())
    }

    pub fn tolerance(&self) -> f64 {
        self.e_tol.unwrap_or(f64::INFINITY)
    }
}

/// Per-order L1 sizes `S_i` with the exponential fit `E(i) = A·exp(B·i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderSizes {
    pub sizes: Vec<f64>,
    pub a: f64,
    pub b: f64,
    pub extrapolated: f64,
}

/// `S_i = Σ_{|β| = i} |a_β|` for `i = 0..=n`.
pub fn order_sizes(p: &TaylorPoly) -> Vec<f64> {
    let s = p.space();
    (0..=s.order()).map(|d| s.degree_range(d).map(|k| p.coeffs()[k].abs()).sum()).collect()
}

/// Least-squares fit of `ln S_i` against `i` over the non-zero sizes,
/// evaluated at `n + 1`. Fewer than two non-zero sizes extrapolate to 0.
pub fn fit_and_extrapolate(sizes: &[f64], n: usize) -> OrderSizes {
    let pts: Vec<(f64, f64)> =
        sizes.iter().enumerate().filter(|(_, s)| **s > 0.0).map(|(i, s)| (i as f64, s.ln())).collect();
    if pts.len() < 2 {
        return OrderSizes { sizes: sizes.to_vec(), a: 0.0, b: 0.0, extrapolated: 0.0 };
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let b = sxy / sxx;
    let ln_a = my - b * mx;
    OrderSizes { sizes: sizes.to_vec(), a: ln_a.exp(), b, extrapolated: (ln_a + b * (n as f64 + 1.0)).exp() }
}

/// Extrapolated `S_{n+1}` of a single polynomial.
pub fn poly_error(p: &TaylorPoly) -> f64 {
    fit_and_extrapolate(&order_sizes(p), p.order()).extrapolated
}

/// Per-component extrapolated `S_{n+1}` and their maximum.
pub fn map_error(map: &TaylorMap) -> (Vec<f64>, f64) {
    let e: Vec<f64> = map.components().iter().map(poly_error).collect();
    let max = e.iter().copied().fold(0.0, f64::max);
    (e, max)
}

/// Sizes of a polynomial grouped by the exponent of variable `j`.
pub fn variable_sizes(p: &TaylorPoly, j: usize) -> Vec<f64> {
    let mut s = vec![0.0; p.order() + 1];
    for (beta, a) in p.terms() {
        s[beta[j] as usize] += a.abs();
    }
    s
}

/// Variable contributing the largest extrapolated error, maximized over
/// components; ties go to the lowest index. The flag is set when every
/// estimate is zero.
pub fn split_direction(map: &TaylorMap) -> (usize, bool) {
    let mut best = (0usize, 0.0f64);
    for j in 0..map.nvars() {
        let e = map
            .components()
            .iter()
            .map(|p| fit_and_extrapolate(&variable_sizes(p, j), p.order()).extrapolated)
            .fold(0.0, f64::max);
        if e > best.1 {
            best = (j, e);
        }
    }
    (best.0, best.1 == 0.0)
}

/// Outcome of expanding one domain.
#[derive(Debug, Clone)]
pub struct Expansion<T> {
    pub payload: T,
    /// Estimated truncation error; `None` when the expansion failed.
    pub error: Option<f64>,
    pub direction: usize,
}

#[derive(Debug, Clone)]
pub struct Leaf<T> {
    pub domain: Domain,
    pub payload: T,
    pub error: Option<f64>,
}

/// Splits depth-first, left child first, until every leaf is within
/// tolerance, has used `n_max` splits, or failed to expand. Children are
/// re-expanded from scratch; sibling subtrees run in parallel on the current
/// rayon pool. Output order is the depth-first order, independent of
/// scheduling.
pub fn run<T, F>(root: &Domain, cfg: &AdsConfig, expand: &F) -> Vec<Leaf<T>>
where
    T: Send,
    F: Fn(&Domain) -> Expansion<T> + Sync,
{
    let exp = expand(root);
    let done = match exp.error {
        None => true,
        Some(e) => e <= cfg.tolerance() || root.lineage.len() >= cfg.n_max,
    };
    if done {
        return vec![Leaf { domain: root.clone(), payload: exp.payload, error: exp.error }];
    }
    let (l, r) = split(root, exp.direction);
    drop(exp);
    let (mut a, b) = rayon::join(|| run(&l, cfg, expand), || run(&r, cfg, expand));
    a.extend(b);
    a
}

/// Checks that `leaves` tile `root`: equal total volume (relative 1e-12),
/// every leaf inside the root, and no two leaves overlapping with positive
/// volume.
pub fn check_partition(root: &Domain, leaves: &[Domain]) -> Result<(), String> {
    let total: f64 = leaves.iter().map(Domain::volume).sum();
    if ((total - root.volume()) / root.volume()).abs() > 1e-12 {
        return Err(format!("leaf volume {total} differs from root volume {}", root.volume()));
    }
    let tol = 1e-12;
    for (k, d) in leaves.iter().enumerate() {
        for j in 0..root.dim() {
            let slack = tol * root.half_width[j];
            if d.lo(j) < root.lo(j) - slack || d.hi(j) > root.hi(j) + slack {
                return Err(format!("leaf {k} leaves the root along {j}"));
            }
        }
    }
    for a in 0..leaves.len() {
        for b in a + 1..leaves.len() {
            let overlap = (0..root.dim()).all(|j| {
                let slack = tol * root.half_width[j];
                leaves[a].lo(j).max(leaves[b].lo(j)) < leaves[a].hi(j).min(leaves[b].hi(j)) - slack
            });
            if overlap {
                return Err(format!("leaves {a} and {b} overlap"));
            }
        }
    }
    Ok(())
}
