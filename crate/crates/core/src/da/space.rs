//! Monomial layout shared by every polynomial with the same `(nvars, order)`.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use super::DaError;

/// Exponent tuple of a single monomial.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn new(exponents: impl Into<Vec<u32>>) -> Self {
        MultiIndex(exponents.into())
    }

    pub fn zero(nvars: usize) -> Self {
        MultiIndex(vec![0; nvars])
    }

    /// Unit index `e_i`.
    pub fn unit(nvars: usize, i: usize) -> Self {
        let mut e = vec![0; nvars];
        e[i] = 1;
        MultiIndex(e)
    }

    /// Total degree `|β|`.
    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn nvars(&self) -> usize {
        self.0.len()
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

/// Graded-lexicographic monomial table with a precomputed truncated product
/// table.
///
/// Within one total degree, monomials are ordered by decreasing exponent of
/// the first variable, then the second, and so on. For two variables and
/// degree 2 this gives `x1^2, x1 x2, x2^2`.
pub struct DaSpace {
    nvars: usize,
    order: usize,
    exps: Vec<u32>,
    degrees: Vec<u32>,
    degree_start: Vec<usize>,
    lookup: HashMap<Vec<u32>, usize>,
    // products[i] lists (j, k) with monomial_i * monomial_j = monomial_k, deg_k <= order
    products: Vec<Vec<(u32, u32)>>,
    // parent[k] = (p, v) with monomial_k = monomial_p * x_v; unused for k = 0
    parent: Vec<(usize, usize)>,
}

impl fmt::Debug for DaSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DaSpace")
            .field("nvars", &self.nvars)
            .field("order", &self.order)
            .field("len", &self.len())
            .finish()
    }
}

fn exponents_of_degree(nvars: usize, degree: u32, out: &mut Vec<Vec<u32>>) {
    fn rec(prefix: &mut Vec<u32>, remaining_vars: usize, remaining: u32, out: &mut Vec<Vec<u32>>) {
        if remaining_vars == 1 {
            prefix.push(remaining);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for b in (0..=remaining).rev() {
            prefix.push(b);
            rec(prefix, remaining_vars - 1, remaining - b, out);
            prefix.pop();
        }
    }
    rec(&mut Vec::with_capacity(nvars), nvars, degree, out);
}

impl DaSpace {
    fn build(nvars: usize, order: usize) -> Self {
        let mut all = Vec::new();
        let mut degree_start = Vec::with_capacity(order + 2);
        for d in 0..=order as u32 {
            degree_start.push(all.len());
            exponents_of_degree(nvars, d, &mut all);
        }
        degree_start.push(all.len());

        let lookup: HashMap<Vec<u32>, usize> =
            all.iter().enumerate().map(|(k, e)| (e.clone(), k)).collect();
        let degrees: Vec<u32> = all.iter().map(|e| e.iter().sum()).collect();

        let mut products = Vec::with_capacity(all.len());
        let mut buf = vec![0u32; nvars];
        for (i, ei) in all.iter().enumerate() {
            let room = order - degrees[i] as usize;
            let mut row = Vec::with_capacity(degree_start[room + 1]);
            for (j, ej) in all[..degree_start[room + 1]].iter().enumerate() {
                for v in 0..nvars {
                    buf[v] = ei[v] + ej[v];
                }
                row.push((j as u32, lookup[&buf] as u32));
            }
            products.push(row);
        }

        let mut parent = vec![(0, 0); all.len()];
        for (k, e) in all.iter().enumerate().skip(1) {
            let v = e.iter().position(|&b| b > 0).expect("non-constant monomial");
            let mut p = e.clone();
            p[v] -= 1;
            parent[k] = (lookup[&p], v);
        }

        DaSpace {
            nvars,
            order,
            exps: all.into_iter().flatten().collect(),
            degrees,
            degree_start,
            lookup,
            products,
            parent,
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Number of monomials `C(nvars + order, order)`.
    pub fn len(&self) -> usize {
        self.degrees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.degrees.is_empty()
    }

    pub fn exponents(&self, k: usize) -> &[u32] {
        &self.exps[k * self.nvars..(k + 1) * self.nvars]
    }

    pub fn degree(&self, k: usize) -> u32 {
        self.degrees[k]
    }

    /// Index range of the monomials of total degree `d`.
    pub fn degree_range(&self, d: usize) -> std::ops::Range<usize> {
        self.degree_start[d]..self.degree_start[d + 1]
    }

    pub fn index_of(&self, beta: &[u32]) -> Option<usize> {
        self.lookup.get(beta).copied()
    }

    pub(crate) fn products(&self, i: usize) -> &[(u32, u32)] {
        &self.products[i]
    }

    pub(crate) fn parent(&self, k: usize) -> (usize, usize) {
        self.parent[k]
    }

    pub fn same_as(&self, other: &DaSpace) -> bool {
        self.nvars == other.nvars && self.order == other.order
    }
}

type SpaceCache = Mutex<HashMap<(usize, usize), Arc<DaSpace>>>;

static SPACES: OnceLock<SpaceCache> = OnceLock::new();

/// Shared monomial layout for `nvars` variables truncated at `order`.
pub fn space(nvars: usize, order: usize) -> Result<Arc<DaSpace>, DaError> {
    if nvars == 0 {
        return Err(DaError::NoVariables);
    }
    if nvars > 16 || order > 24 {
        return Err(DaError::SpaceTooLarge { nvars, order });
    }
    let cache = SPACES.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("space cache poisoned");
    Ok(guard
        .entry((nvars, order))
        .or_insert_with(|| Arc::new(DaSpace::build(nvars, order)))
        .clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graded_lex_layout() {
        let s = space(2, 2).unwrap();
        let listed: Vec<Vec<u32>> = (0..s.len()).map(|k| s.exponents(k).to_vec()).collect();
        assert_eq!(
            listed,
            vec![vec![0, 0], vec![1, 0], vec![0, 1], vec![2, 0], vec![1, 1], vec![0, 2]]
        );
        assert_eq!(s.degree_range(1), 1..3);
    }

    #[test]
    fn monomial_count_is_binomial() {
        let s = space(4, 6).unwrap();
        assert_eq!(s.len(), 210);
        let s = space(3, 4).unwrap();
        assert_eq!(s.len(), 35);
    }

    #[test]
    fn parents_reconstruct_exponents() {
        let s = space(3, 4).unwrap();
        for k in 1..s.len() {
            let (p, v) = s.parent(k);
            let mut e = s.exponents(p).to_vec();
            e[v] += 1;
            assert_eq!(e, s.exponents(k));
        }
    }

    #[test]
    fn zero_variables_rejected() {
        assert!(space(0, 3).is_err());
    }
}
