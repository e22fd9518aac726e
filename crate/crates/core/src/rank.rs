//! Rank transforms, the bivariate empirical copula and its
//! nearest-neighbour finite-difference conditional estimates.
//!
//! All indicator sums are accumulated as integers and divided once, so
//! results do not depend on summation order. Ties are handled by the
//! literal `<=` counting definition: tied values share the largest rank of
//! their group (not midranks).

use crate::{Error, Result};

/// Normalized ranks u_t = (1/(n+1)) * #{s : x_s <= x_t}.
///
/// Strictly increasing transforms of `x` leave the output unchanged.
pub fn normalized_ranks(x: &[f64]) -> Result<Vec<f64>> {
    let n = x.len();
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "normalized ranks need at least 2 observations, got {n}"
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("normalized ranks need finite values".into()));
    }
    Ok(integer_ranks(x).into_iter().map(|r| r as f64 / (n + 1) as f64).collect())
}

/// Normalized ranks with ties broken by original sample order, so the
/// output is always an exact permutation of {1/(n+1), ..., n/(n+1)}.
///
/// The finite-difference conditional estimates are count ratios over
/// nearly constant window sizes, so across a sample they collapse onto a
/// few hundred rational values and tie heavily. Re-ranking them with the
/// plain `<=` count would push every tied group to its largest rank,
/// visibly shrinking both margins of the next level's pseudo-observations
/// and biasing the pair-copula estimates downward. Breaking ties keeps
/// the margins exactly uniform on the grid; the arbitrary within-group
/// order adds only exchangeable noise. Callers track how many inputs were
/// tied as a diagnostic.
pub fn tie_broken_ranks(x: &[f64]) -> Result<Vec<f64>> {
    let n = x.len();
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "normalized ranks need at least 2 observations, got {n}"
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("normalized ranks need finite values".into()));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).expect("finite values"));
    let mut ranks = vec![0.0f64; n];
    for (k, &t) in idx.iter().enumerate() {
        ranks[t] = (k + 1) as f64 / (n + 1) as f64;
    }
    Ok(ranks)
}

/// `#{s : x_s <= x_t}` for every t (max-rank convention for ties), via one
/// sort instead of the quadratic double loop.
pub(crate) fn integer_ranks(x: &[f64]) -> Vec<usize> {
    let n = x.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).expect("finite values"));
    let mut ranks = vec![0usize; n];
    let mut s = 0;
    while s < n {
        let mut e = s;
        while e + 1 < n && x[idx[e + 1]] == x[idx[s]] {
            e += 1;
        }
        for &t in &idx[s..=e] {
            ranks[t] = e + 1; // all tied observations get the group's max rank
        }
        s = e + 1;
    }
    ranks
}

/// Columns of normalized ranks for an n x d data set.
#[derive(Debug, Clone)]
pub struct PseudoObservations {
    columns: Vec<Vec<f64>>,
    n: usize,
}

impl PseudoObservations {
    /// Rank-transform each data column (columns must share their length).
    pub fn from_columns(data: &[Vec<f64>]) -> Result<Self> {
        if data.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "need at least 2 variables, got {}",
                data.len()
            )));
        }
        let n = data[0].len();
        for (j, col) in data.iter().enumerate() {
            if col.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: col.len() });
            }
            if col.iter().all(|v| *v == col[0]) {
                return Err(Error::InvalidInput(format!(
                    "column {} is constant; its ranks are degenerate",
                    j + 1
                )));
            }
        }
        let columns = data.iter().map(|c| normalized_ranks(c)).collect::<Result<_>>()?;
        Ok(Self { columns, n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }
}

/// Bandwidth rule for the finite-difference window, resolved against the
/// sample size. The resolved value must land in (0, 1/2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    /// 0.5 * n^(-1/3) (default; tracks the estimator's convergence rate).
    HalfCubeRoot,
    /// n^(-1/5)
    FifthRoot,
    /// n^(-1/4)
    QuarterRoot,
    /// A fixed user-chosen value.
    Fixed(f64),
}

impl Default for Bandwidth {
    fn default() -> Self {
        Bandwidth::HalfCubeRoot
    }
}

impl Bandwidth {
    /// Concrete window half-width for a sample of size `n`.
    pub fn resolve(self, n: usize) -> Result<f64> {
        if n < 2 {
            return Err(Error::InvalidInput("bandwidth needs n >= 2".into()));
        }
        let h = match self {
            Bandwidth::HalfCubeRoot => 0.5 * (n as f64).powf(-1.0 / 3.0),
            Bandwidth::FifthRoot => (n as f64).powf(-1.0 / 5.0),
            Bandwidth::QuarterRoot => (n as f64).powf(-1.0 / 4.0),
            Bandwidth::Fixed(h) => h,
        };
        if !(h > 0.0 && h < 0.5) {
            return Err(Error::InvalidInput(format!(
                "bandwidth {h} outside (0, 0.5); rule {self:?} with n = {n}"
            )));
        }
        Ok(h)
    }
}

/// A bivariate sample of pseudo-observations together with the window
/// half-width used for its conditional estimates.
#[derive(Debug, Clone)]
pub struct PairSample {
    u: Vec<f64>,
    v: Vec<f64>,
    bandwidth: f64,
}

impl PairSample {
    pub fn new(u: Vec<f64>, v: Vec<f64>, bandwidth: f64) -> Result<Self> {
        if u.len() != v.len() {
            return Err(Error::DimensionMismatch { expected: u.len(), got: v.len() });
        }
        if u.len() < 2 {
            return Err(Error::InvalidInput("pair sample needs n >= 2".into()));
        }
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::InvalidInput(format!("bandwidth must be positive, got {bandwidth}")));
        }
        let ok = |s: &[f64]| s.iter().all(|&x| x > 0.0 && x < 1.0);
        if !ok(&u) || !ok(&v) {
            return Err(Error::InvalidInput("pseudo-observations must lie in (0,1)".into()));
        }
        Ok(Self { u, v, bandwidth })
    }

    pub fn n(&self) -> usize {
        self.u.len()
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// Pearson correlation of the two pseudo-observation vectors, which is
    /// the sample Spearman correlation of the underlying pair (ranks are
    /// max-ranks under ties).
    pub fn spearman_rho(&self) -> f64 {
        crate::math::pearson(&self.u, &self.v)
    }
}

/// Bivariate empirical copula of the pair at (u, v):
/// (1/n) #{t : u_t <= u, v_t <= v}.
pub fn empirical_copula(pairs: &PairSample, u: f64, v: f64) -> f64 {
    let count = pairs
        .u
        .iter()
        .zip(&pairs.v)
        .filter(|&(&a, &b)| a <= u && b <= v)
        .count();
    count as f64 / pairs.n() as f64
}

/// Finite-difference estimate of the conditional cdf P(U <= u_i | V = u_j):
/// the fraction of points with u-coordinate below `u_i` among those whose
/// v-coordinate lies within the closed window |v_t - u_j| <= h.
pub fn conditional_cdf_estimate(pairs: &PairSample, u_i: f64, u_j: f64) -> Result<f64> {
    let h = pairs.bandwidth;
    let mut num = 0u64;
    let mut den = 0u64;
    for (&a, &b) in pairs.u.iter().zip(&pairs.v) {
        if (b - u_j).abs() <= h {
            den += 1;
            if a <= u_i {
                num += 1;
            }
        }
    }
    if den == 0 {
        return Err(Error::EmptyWindow { center: u_j, bandwidth: h });
    }
    Ok(num as f64 / den as f64)
}

/// Which argument of the pair copula to differentiate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeAxis {
    /// dC/du: window on the first coordinate, indicator on the second.
    First,
    /// dC/dv: window on the second coordinate, indicator on the first.
    Second,
}

/// Finite-difference estimate of a first partial derivative of the pair
/// copula. `Second` is the conditional cdf above; `First` mirrors the
/// window onto the other axis.
pub fn partial_derivative_estimate(
    pairs: &PairSample,
    u_i: f64,
    u_j: f64,
    axis: DerivativeAxis,
) -> Result<f64> {
    match axis {
        DerivativeAxis::Second => conditional_cdf_estimate(pairs, u_i, u_j),
        DerivativeAxis::First => {
            let h = pairs.bandwidth;
            let mut num = 0u64;
            let mut den = 0u64;
            for (&a, &b) in pairs.u.iter().zip(&pairs.v) {
                if (a - u_i).abs() <= h {
                    den += 1;
                    if b <= u_j {
                        num += 1;
                    }
                }
            }
            if den == 0 {
                return Err(Error::EmptyWindow { center: u_i, bandwidth: h });
            }
            Ok(num as f64 / den as f64)
        }
    }
}

// ---------------------------------------------------------------------------
// Fast whole-sample kernels. These produce exactly the same integer counts
// as the naive double loops above (same closed-window comparisons on the
// same f64 values), only faster: a sliding window over the sorted
// conditioning coordinate plus a Fenwick tree for dominance counts.
// ---------------------------------------------------------------------------

struct Fenwick {
    tree: Vec<u32>,
}

impl Fenwick {
    fn new(n: usize) -> Self {
        Self { tree: vec![0; n + 1] }
    }

    fn add(&mut self, mut i: usize, delta: i32) {
        while i < self.tree.len() {
            self.tree[i] = (self.tree[i] as i32 + delta) as u32;
            i += i & i.wrapping_neg();
        }
    }

    /// Sum of entries 1..=i.
    fn prefix(&self, mut i: usize) -> u64 {
        let mut s = 0u64;
        while i > 0 {
            s += self.tree[i] as u64;
            i -= i & i.wrapping_neg();
        }
        s
    }
}

/// Conditional-cdf estimates at every sample point: element t is
/// P_hat(U <= u_t | V = v_t) with the closed window |v_s - v_t| <= h.
///
/// O(n log n); identical to evaluating `conditional_cdf_estimate` at each
/// (u_t, v_t).
pub(crate) fn conditional_obs_at_samples(u: &[f64], v: &[f64], h: f64) -> Vec<f64> {
    let n = u.len();
    debug_assert_eq!(n, v.len());
    // u-ranks for the Fenwick tree; tie groups share max rank, and counting
    // "u_s <= u_t" equals counting ranks <= rank_t.
    let ur = integer_ranks(u);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).expect("finite pseudo-observations"));

    let mut out = vec![0.0; n];
    let mut bit = Fenwick::new(n);
    let (mut lo, mut hi) = (0usize, 0usize); // members of [lo, hi) are in the tree
    for &t in &order {
        let center = v[t];
        // grow right edge: admit points with |v - center| <= h
        while hi < n && (v[order[hi]] - center).abs() <= h {
            bit.add(ur[order[hi]], 1);
            hi += 1;
        }
        // shrink left edge: evict points that fell out of the window
        while lo < hi && !((v[order[lo]] - center).abs() <= h) {
            bit.add(ur[order[lo]], -1);
            lo += 1;
        }
        debug_assert!(hi > lo, "sample point must lie inside its own window");
        let den = (hi - lo) as u64;
        let num = bit.prefix(ur[t]);
        out[t] = num as f64 / den as f64;
    }
    out
}

/// Empirical copula evaluated at every sample point:
/// element t is (1/n) #{s : u_s <= u_t, v_s <= v_t}.
pub(crate) fn empirical_copula_at_samples(u: &[f64], v: &[f64]) -> Vec<f64> {
    let n = u.len();
    debug_assert_eq!(n, v.len());
    let ur = integer_ranks(u);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).expect("finite pseudo-observations"));

    let mut out = vec![0.0; n];
    let mut bit = Fenwick::new(n);
    let mut s = 0;
    while s < n {
        // insert the whole tie group on v before querying any member of it
        let mut e = s;
        while e + 1 < n && v[order[e + 1]] == v[order[s]] {
            e += 1;
        }
        for &t in &order[s..=e] {
            bit.add(ur[t], 1);
        }
        for &t in &order[s..=e] {
            out[t] = bit.prefix(ur[t]) as f64 / n as f64;
        }
        s = e + 1;
    }
    out
}
