//! Inference on fitted empirical vines.
//!
//! Everything downstream of [`crate::estimator::fit`]: the asymptotic
//! variance of the edge process, multiplier-bootstrap resampling of that
//! process, confidence intervals for pair-copula values and for conditional
//! Spearman's rho, a Cramér-von Mises independence test with simulated
//! critical values, a parametric-bootstrap goodness-of-fit test, and the
//! expansion-residual diagnostic used by the validation experiments.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rand::Rng;
use rayon::prelude::*;

use crate::estimator::{EdgeEstimate, FittedEmpiricalVine};
use crate::families::{FamilyKind, PairCopula, VineModel};
use crate::math;
use crate::rank::{self, DerivativeAxis, PairSample};
use crate::rng::{derive_seed, replicate_rng};
use crate::{Error, Result};

// sub-seed tags keeping nested stages of one procedure on disjoint streams
const TAG_INTEGRATION_POINTS: u64 = 1;
const TAG_INDEPENDENCE_NULL: u64 = 2;
const TAG_GOF_NULL: u64 = 3;

// ---------------------------------------------------------------------------
// Asymptotic variance
// ---------------------------------------------------------------------------

/// Asymptotic variance of the normalized edge process `sqrt(n)(Chat - C)` at
/// `(u, v)`, given the copula value `C` and its partial derivatives `C1 =
/// dC/du`, `C2 = dC/dv` at that point.
///
/// The value is the variance of `B(u,v) - C1 B(u,1) - C2 B(1,v)` where `B` is
/// the C-pinned Brownian bridge with `Cov(B(s), B(t)) = C(s ∧ t) - C(s)C(t)`:
///
/// ```text
/// C(1-C) + C1^2 u(1-u) + C2^2 v(1-v)
///        - 2 C1 C (1-u) - 2 C2 C (1-v) + 2 C1 C2 (C - uv)
/// ```
///
/// Under independence (`C = uv`, `C1 = v`, `C2 = u`) this collapses to
/// `uv(1-u)(1-v)`; for the comonotone copula on the off-diagonal, and on the
/// boundary of the square, it vanishes. Inconsistent plug-in inputs can make
/// the expression negative; the result is clamped at zero (use
/// [`plug_in_variance`] to observe the clamping).
pub fn asymptotic_variance(c: f64, c1: f64, c2: f64, u: f64, v: f64) -> f64 {
    raw_asymptotic_variance(c, c1, c2, u, v).max(0.0)
}

fn raw_asymptotic_variance(c: f64, c1: f64, c2: f64, u: f64, v: f64) -> f64 {
    c * (1.0 - c)
        + c1 * c1 * u * (1.0 - u)
        + c2 * c2 * v * (1.0 - v)
        - 2.0 * c1 * c * (1.0 - u)
        - 2.0 * c2 * c * (1.0 - v)
        + 2.0 * c1 * c2 * (c - u * v)
}

/// Plug-in estimate of [`asymptotic_variance`] with the empirical copula and
/// finite-difference partial derivatives substituted for the true quantities.
#[derive(Debug, Clone, Copy)]
pub struct PlugInVariance {
    /// The clamped variance estimate (never negative).
    pub value: f64,
    /// Whether the raw six-term expression was negative and got clamped.
    pub clamped: bool,
}

/// Estimate the asymptotic variance at `(u, v)` from an edge's
/// pseudo-observation pairs.
pub fn plug_in_variance(pairs: &PairSample, u: f64, v: f64) -> Result<PlugInVariance> {
    check_point(u, v)?;
    let c = rank::empirical_copula(pairs, u, v);
    let c1 = rank::partial_derivative_estimate(pairs, u, v, DerivativeAxis::First)?;
    let c2 = rank::partial_derivative_estimate(pairs, u, v, DerivativeAxis::Second)?;
    let raw = raw_asymptotic_variance(c, c1, c2, u, v);
    Ok(PlugInVariance { value: raw.max(0.0), clamped: raw < 0.0 })
}

// ---------------------------------------------------------------------------
// Multiplier bootstrap
// ---------------------------------------------------------------------------

/// Distribution of the iid multiplier weights. The contract is mean 0,
/// variance 1 and a finite 2+delta moment; only the standard normal is
/// currently provided, but the tag keeps room for other choices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MultiplierDistribution {
    StandardNormal,
}

/// A multiplier-bootstrap ensemble: `B` replicates of the resampled edge
/// process evaluated at a fixed list of points.
#[derive(Debug, Clone)]
pub struct BootstrapEnsemble {
    points: Vec<(f64, f64)>,
    /// `values[k][b]` = replicate `b` of the process at `points[k]`.
    values: Vec<Vec<f64>>,
    multiplier: MultiplierDistribution,
}

impl BootstrapEnsemble {
    /// Number of replicates.
    pub fn b(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    /// The evaluation points, in the order they were given.
    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    /// All replicate values at point `k`.
    pub fn point_values(&self, k: usize) -> &[f64] {
        &self.values[k]
    }

    /// Replicate mean at point `k`.
    pub fn mean(&self, k: usize) -> f64 {
        let vals = &self.values[k];
        vals.iter().sum::<f64>() / vals.len() as f64
    }

    /// Replicate standard deviation (denominator `B - 1`) at point `k`.
    pub fn sd(&self, k: usize) -> f64 {
        sample_sd(&self.values[k])
    }

    /// Which multiplier distribution generated the ensemble.
    pub fn multiplier(&self) -> MultiplierDistribution {
        self.multiplier
    }
}

/// Resample the edge process `sqrt(n)(Chat - C)` at the given points by the
/// multiplier bootstrap.
///
/// One replicate draws iid weights `xi_t`, centers them, and evaluates
///
/// ```text
/// alpha'(u,v) - C1hat(u,v) alpha'(u,1) - C2hat(u,v) alpha'(1,v),
/// alpha'(u,v) = n^{-1/2} sum_t (xi_t - xibar) 1{u_t <= u, v_t <= v},
/// ```
///
/// with the finite-difference derivative estimates held fixed across
/// replicates. Replicate `b` uses its own RNG stream derived from `seed`, so
/// the ensemble is reproducible and independent of the number of worker
/// threads.
pub fn multiplier_resample(
    fit: &FittedEmpiricalVine,
    level: usize,
    index: usize,
    points: &[(f64, f64)],
    b: usize,
    seed: u64,
    multiplier: MultiplierDistribution,
) -> Result<BootstrapEnsemble> {
    if b == 0 {
        return Err(Error::InvalidInput("bootstrap needs at least one replicate".into()));
    }
    if points.is_empty() {
        return Err(Error::InvalidInput("no evaluation points given".into()));
    }
    for &(u, v) in points {
        check_point(u, v)?;
    }
    let pairs = edge_ref(fit, level, index)?.pairs();
    let mut c1 = Vec::with_capacity(points.len());
    let mut c2 = Vec::with_capacity(points.len());
    for &(u, v) in points {
        c1.push(rank::partial_derivative_estimate(pairs, u, v, DerivativeAxis::First)?);
        c2.push(rank::partial_derivative_estimate(pairs, u, v, DerivativeAxis::Second)?);
    }

    let n = pairs.n();
    let per_replicate: Vec<Vec<f64>> = (0..b)
        .into_par_iter()
        .map(|r| {
            let xi = draw_multipliers(n, seed, r as u64, multiplier);
            resample_with_multipliers(pairs, points, &c1, &c2, &xi)
        })
        .collect();

    // transpose to per-point storage
    let mut values = vec![Vec::with_capacity(b); points.len()];
    for rep in &per_replicate {
        for (k, &x) in rep.iter().enumerate() {
            values[k].push(x);
        }
    }
    Ok(BootstrapEnsemble { points: points.to_vec(), values, multiplier })
}

fn draw_multipliers(n: usize, seed: u64, replicate: u64, kind: MultiplierDistribution) -> Vec<f64> {
    let mut rng = replicate_rng(seed, replicate);
    match kind {
        MultiplierDistribution::StandardNormal => {
            (0..n).map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal)).collect()
        }
    }
}

/// One bootstrap replicate with caller-supplied multiplier weights; exposed
/// for tests (constant weights must give an exactly-zero replicate).
pub(crate) fn resample_with_multipliers(
    pairs: &PairSample,
    points: &[(f64, f64)],
    c1: &[f64],
    c2: &[f64],
    xi: &[f64],
) -> Vec<f64> {
    let n = pairs.n();
    let xibar = xi.iter().sum::<f64>() / n as f64;
    let root_n = (n as f64).sqrt();
    let u = pairs.u();
    let v = pairs.v();
    points
        .iter()
        .enumerate()
        .map(|(k, &(pu, pv))| {
            let mut a_uv = 0.0;
            let mut a_u1 = 0.0;
            let mut a_1v = 0.0;
            for t in 0..n {
                let w = xi[t] - xibar;
                let in_u = u[t] <= pu;
                let in_v = v[t] <= pv;
                if in_u && in_v {
                    a_uv += w;
                }
                if in_u {
                    a_u1 += w;
                }
                if in_v {
                    a_1v += w;
                }
            }
            (a_uv - c1[k] * a_u1 - c2[k] * a_1v) / root_n
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Confidence intervals
// ---------------------------------------------------------------------------

/// How a confidence interval is built from the bootstrap ensemble (or, for
/// `PlugIn`, from the estimated asymptotic variance alone).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CiMethod {
    /// Endpoints from ensemble quantiles:
    /// `[Chat - q_{1-a/2}/sqrt(n), Chat - q_{a/2}/sqrt(n)]`.
    Percentile,
    /// `Chat ± z_{1-a/2} * sd(ensemble)/sqrt(n)`.
    SymmetricNormal,
    /// `Chat ± z_{1-a/2} * sigma_hat/sqrt(n)` with the plug-in variance.
    PlugIn,
}

impl std::fmt::Display for CiMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            CiMethod::Percentile => "percentile",
            CiMethod::SymmetricNormal => "symmetric-normal",
            CiMethod::PlugIn => "plug-in",
        };
        f.write_str(name)
    }
}

/// A two-sided confidence interval.
#[derive(Debug, Clone)]
pub struct ConfidenceInterval {
    pub lower: f64,
    pub upper: f64,
    /// Confidence level `1 - alpha`.
    pub level: f64,
    pub method: CiMethod,
    /// Set when the interval is degenerate or the variance was clamped.
    pub warning: Option<String>,
}

impl ConfidenceInterval {
    /// Interval length.
    pub fn length(&self) -> f64 {
        self.upper - self.lower
    }

    /// Whether the interval contains `x`.
    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }
}

/// Two-sided confidence interval for the pair-copula value `C(u, v)` at one
/// edge, via `b` multiplier replicates (or the plug-in variance).
///
/// Endpoints are clamped to `[0, 1]` since the target is a copula value.
#[allow(clippy::too_many_arguments)]
pub fn confidence_interval(
    fit: &FittedEmpiricalVine,
    level: usize,
    index: usize,
    point: (f64, f64),
    alpha: f64,
    b: usize,
    seed: u64,
    method: CiMethod,
) -> Result<ConfidenceInterval> {
    check_alpha(alpha)?;
    check_point(point.0, point.1)?;
    let est = edge_ref(fit, level, index)?;
    let estimate = est.copula(point.0, point.1);
    let n = fit.n();

    let ci = match method {
        CiMethod::PlugIn => {
            let var = plug_in_variance(est.pairs(), point.0, point.1)?;
            let z = math::norm_quantile(1.0 - alpha / 2.0);
            let half = z * var.value.sqrt() / (n as f64).sqrt();
            let warning = var
                .clamped
                .then(|| "plug-in variance was negative and has been clamped to zero".to_string());
            ConfidenceInterval {
                lower: estimate - half,
                upper: estimate + half,
                level: 1.0 - alpha,
                method,
                warning,
            }
        }
        CiMethod::Percentile | CiMethod::SymmetricNormal => {
            let ensemble = multiplier_resample(
                fit,
                level,
                index,
                &[point],
                b,
                seed,
                MultiplierDistribution::StandardNormal,
            )?;
            ci_from_ensemble(estimate, n, ensemble.point_values(0), alpha, method)?
        }
    };
    Ok(clamp_interval(ci, 0.0, 1.0))
}

/// Build an interval for an estimate from an existing ensemble of resampled
/// process values (methods `Percentile` and `SymmetricNormal` only; `PlugIn`
/// does not use an ensemble).
pub fn ci_from_ensemble(
    estimate: f64,
    n: usize,
    values: &[f64],
    alpha: f64,
    method: CiMethod,
) -> Result<ConfidenceInterval> {
    check_alpha(alpha)?;
    if values.is_empty() {
        return Err(Error::InvalidInput("empty bootstrap ensemble".into()));
    }
    let root_n = (n as f64).sqrt();
    match method {
        CiMethod::Percentile => {
            let mut sorted = values.to_vec();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let q_lo = math::empirical_quantile(&sorted, alpha / 2.0);
            let q_hi = math::empirical_quantile(&sorted, 1.0 - alpha / 2.0);
            let warning = (sorted[0] == sorted[sorted.len() - 1])
                .then(|| "degenerate bootstrap ensemble: zero-width interval".to_string());
            Ok(ConfidenceInterval {
                lower: estimate - q_hi / root_n,
                upper: estimate - q_lo / root_n,
                level: 1.0 - alpha,
                method,
                warning,
            })
        }
        CiMethod::SymmetricNormal => {
            let sd = sample_sd(values);
            let z = math::norm_quantile(1.0 - alpha / 2.0);
            let half = z * sd / root_n;
            let warning =
                (sd == 0.0).then(|| "degenerate bootstrap ensemble: zero-width interval".to_string());
            Ok(ConfidenceInterval {
                lower: estimate - half,
                upper: estimate + half,
                level: 1.0 - alpha,
                method,
                warning,
            })
        }
        CiMethod::PlugIn => Err(Error::InvalidInput(
            "the plug-in method is not ensemble-based; call confidence_interval".into(),
        )),
    }
}

fn clamp_interval(mut ci: ConfidenceInterval, lo: f64, hi: f64) -> ConfidenceInterval {
    ci.lower = ci.lower.clamp(lo, hi);
    ci.upper = ci.upper.clamp(lo, hi);
    ci
}

// ---------------------------------------------------------------------------
// Spearman's rho
// ---------------------------------------------------------------------------

/// Exact sample Spearman correlation of an edge's conditional
/// pseudo-observation pairs.
pub fn spearman_rho(fit: &FittedEmpiricalVine, level: usize, index: usize) -> Result<f64> {
    Ok(edge_ref(fit, level, index)?.spearman_rho())
}

/// Quadrature rule for the functional `12 ∬ process(u,v) du dv` applied to
/// each bootstrap replicate of the edge process.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntegrationRule {
    /// Midpoint rule on a `cells × cells` grid (the default, `cells = 64`).
    MidpointGrid { cells: usize },
    /// Monte Carlo integration over `draws` uniform points, as a cross-check.
    MonteCarlo { draws: usize },
}

impl Default for IntegrationRule {
    fn default() -> Self {
        IntegrationRule::MidpointGrid { cells: 64 }
    }
}

/// Multiplier replicates of the Spearman functional `12 ∬ process du dv`.
///
/// Replicate `b` reuses the same multiplier stream as the point-wise
/// resampler, so grid and Monte Carlo quadrature of the same seed integrate
/// literally the same process realizations.
pub fn spearman_functional_ensemble(
    fit: &FittedEmpiricalVine,
    level: usize,
    index: usize,
    b: usize,
    seed: u64,
    rule: IntegrationRule,
) -> Result<Vec<f64>> {
    if b == 0 {
        return Err(Error::InvalidInput("bootstrap needs at least one replicate".into()));
    }
    let pairs = edge_ref(fit, level, index)?.pairs();
    let n = pairs.n();
    match rule {
        IntegrationRule::MidpointGrid { cells } => {
            if cells < 2 {
                return Err(Error::InvalidInput("integration grid needs at least 2 cells".into()));
            }
            let (c1, c2) = grid_partials(pairs, cells)?;
            let cell_u: Vec<usize> = pairs.u().iter().map(|&x| cell_index(x, cells)).collect();
            let cell_v: Vec<usize> = pairs.v().iter().map(|&x| cell_index(x, cells)).collect();
            Ok((0..b)
                .into_par_iter()
                .map(|r| {
                    let xi = draw_multipliers(n, seed, r as u64, MultiplierDistribution::StandardNormal);
                    grid_functional(&cell_u, &cell_v, &xi, cells, &c1, &c2)
                })
                .collect())
        }
        IntegrationRule::MonteCarlo { draws } => {
            if draws == 0 {
                return Err(Error::InvalidInput("Monte Carlo integration needs draws > 0".into()));
            }
            let mut rng = replicate_rng(derive_seed(seed, TAG_INTEGRATION_POINTS), 0);
            let points: Vec<(f64, f64)> = (0..draws)
                .map(|_| (rng.random::<f64>(), rng.random::<f64>()))
                .collect();
            let mut c1 = Vec::with_capacity(draws);
            let mut c2 = Vec::with_capacity(draws);
            for &(u, v) in &points {
                c1.push(rank::partial_derivative_estimate(pairs, u, v, DerivativeAxis::First)?);
                c2.push(rank::partial_derivative_estimate(pairs, u, v, DerivativeAxis::Second)?);
            }
            Ok((0..b)
                .into_par_iter()
                .map(|r| {
                    let xi = draw_multipliers(n, seed, r as u64, MultiplierDistribution::StandardNormal);
                    let vals = resample_with_multipliers(pairs, &points, &c1, &c2, &xi);
                    12.0 * vals.iter().sum::<f64>() / draws as f64
                })
                .collect())
        }
    }
}

/// Smallest midpoint index `a` with `x <= (a + 0.5)/cells`; `cells` means
/// "beyond every midpoint" and only contributes to margin totals.
fn cell_index(x: f64, cells: usize) -> usize {
    let a = (x * cells as f64 - 0.5).ceil() as isize;
    a.clamp(0, cells as isize) as usize
}

/// Finite-difference partial derivatives at all grid midpoints, row-major
/// `[a * cells + b]` for the midpoint `((a+0.5)/cells, (b+0.5)/cells)`.
fn grid_partials(pairs: &PairSample, cells: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let mids: Vec<f64> = (0..cells).map(|a| (a as f64 + 0.5) / cells as f64).collect();
    let entries: Vec<(f64, f64)> = (0..cells * cells)
        .into_par_iter()
        .map(|idx| {
            let (u, v) = (mids[idx / cells], mids[idx % cells]);
            let d1 = rank::partial_derivative_estimate(pairs, u, v, DerivativeAxis::First)
                .unwrap_or(0.0);
            let d2 = rank::partial_derivative_estimate(pairs, u, v, DerivativeAxis::Second)
                .unwrap_or(0.0);
            (d1, d2)
        })
        .collect();
    let c1 = entries.iter().map(|e| e.0).collect();
    let c2 = entries.iter().map(|e| e.1).collect();
    Ok((c1, c2))
}

/// Integrate one multiplier replicate of the process over the unit square by
/// the midpoint rule, via a histogram of centered weights and 2-d prefix
/// sums; row/column `cells` hold the beyond-all-midpoints overflow so the
/// margins `alpha'(u, 1)`, `alpha'(1, v)` come from the same pass.
fn grid_functional(
    cell_u: &[usize],
    cell_v: &[usize],
    xi: &[f64],
    cells: usize,
    c1: &[f64],
    c2: &[f64],
) -> f64 {
    let n = xi.len();
    let xibar = xi.iter().sum::<f64>() / n as f64;
    let w = cells + 1;
    let mut grid = vec![0.0f64; w * w];
    for t in 0..n {
        grid[cell_u[t] * w + cell_v[t]] += xi[t] - xibar;
    }
    // in-place 2-d prefix sums
    for a in 0..w {
        for b in 1..w {
            grid[a * w + b] += grid[a * w + b - 1];
        }
    }
    for a in 1..w {
        for b in 0..w {
            grid[a * w + b] += grid[(a - 1) * w + b];
        }
    }
    let root_n = (n as f64).sqrt();
    let mut total = 0.0;
    for a in 0..cells {
        let margin_u = grid[a * w + cells];
        for b in 0..cells {
            let idx = a * cells + b;
            let margin_v = grid[cells * w + b];
            total += (grid[a * w + b] - c1[idx] * margin_u - c2[idx] * margin_v) / root_n;
        }
    }
    12.0 * total / (cells * cells) as f64
}

/// Confidence interval for the conditional Spearman's rho of an edge, by
/// resampling the functional `12 ∬ process` with the default 64-cell midpoint
/// grid. Only `Percentile` and `SymmetricNormal` are available ([`CiMethod::PlugIn`]
/// has no closed plug-in variance for the integral functional here).
#[allow(clippy::too_many_arguments)]
pub fn spearman_ci(
    fit: &FittedEmpiricalVine,
    level: usize,
    index: usize,
    alpha: f64,
    b: usize,
    seed: u64,
    method: CiMethod,
) -> Result<ConfidenceInterval> {
    spearman_ci_with(fit, level, index, alpha, b, seed, method, IntegrationRule::default())
}

/// [`spearman_ci`] with an explicit integration rule.
#[allow(clippy::too_many_arguments)]
pub fn spearman_ci_with(
    fit: &FittedEmpiricalVine,
    level: usize,
    index: usize,
    alpha: f64,
    b: usize,
    seed: u64,
    method: CiMethod,
    rule: IntegrationRule,
) -> Result<ConfidenceInterval> {
    if method == CiMethod::PlugIn {
        return Err(Error::InvalidInput(
            "plug-in intervals are not available for the Spearman functional; \
             use percentile or symmetric-normal"
                .into(),
        ));
    }
    let estimate = spearman_rho(fit, level, index)?;
    let values = spearman_functional_ensemble(fit, level, index, b, seed, rule)?;
    let ci = ci_from_ensemble(estimate, fit.n(), &values, alpha, method)?;
    Ok(clamp_interval(ci, -1.0, 1.0))
}

/// Ensemble variance of the resampled Spearman functional (an estimate of
/// the asymptotic variance of `sqrt(n)(rho_hat - rho)`).
pub fn spearman_variance(
    fit: &FittedEmpiricalVine,
    level: usize,
    index: usize,
    b: usize,
    seed: u64,
) -> Result<f64> {
    let values =
        spearman_functional_ensemble(fit, level, index, b, seed, IntegrationRule::default())?;
    let sd = sample_sd(&values);
    Ok(sd * sd)
}

/// Exact value of `∬ Chat du dv` for an edge's empirical copula:
/// `(1/n) Σ (1 - u_t)(1 - v_t)`. Used to bound quadrature error in tests.
pub fn copula_mean_integral(pairs: &PairSample) -> f64 {
    let n = pairs.n() as f64;
    pairs
        .u()
        .iter()
        .zip(pairs.v())
        .map(|(&a, &b)| (1.0 - a) * (1.0 - b))
        .sum::<f64>()
        / n
}

// ---------------------------------------------------------------------------
// Independence test
// ---------------------------------------------------------------------------

/// Outcome of a Monte-Carlo calibrated test.
#[derive(Debug, Clone)]
pub struct TestResult {
    pub statistic: f64,
    /// `(1 + #{null >= statistic}) / (replicates + 1)`.
    pub p_value: f64,
    /// Simulated critical values at the 0.10, 0.05 and 0.01 levels.
    pub critical_values: [(f64, f64); 3],
    /// Number of Monte-Carlo replicates behind the p-value.
    pub replicates: usize,
}

/// Cramér-von Mises statistic of an edge against the product copula:
/// `Σ_t (Chat(u_t, v_t) - u_t v_t)^2` over the edge's pseudo-observations.
pub fn independence_statistic(pairs: &PairSample) -> f64 {
    cvm_distance(pairs.u(), pairs.v(), |u, v| u * v)
}

/// `Σ_t (Chat(u_t, v_t) - F(u_t, v_t))^2` for a hypothesized cdf `F`.
fn cvm_distance<F: Fn(f64, f64) -> f64>(u: &[f64], v: &[f64], cdf: F) -> f64 {
    let chat = rank::empirical_copula_at_samples(u, v);
    chat.iter()
        .zip(u.iter().zip(v))
        .map(|(&c, (&a, &b))| {
            let d = c - cdf(a, b);
            d * d
        })
        .sum()
}

/// Test an edge's conditional pseudo-observations for independence.
///
/// The null distribution of the statistic depends only on the sample size
/// (the test is rank-based), so it is simulated once per `(n, mc_replicates,
/// seed)` and cached process-wide; repeated calls across edges and levels
/// reuse it.
pub fn independence_test(
    fit: &FittedEmpiricalVine,
    level: usize,
    index: usize,
    mc_replicates: usize,
    seed: u64,
) -> Result<TestResult> {
    if mc_replicates < 100 {
        return Err(Error::InvalidInput(format!(
            "independence test needs at least 100 Monte-Carlo replicates, got {mc_replicates}"
        )));
    }
    let pairs = edge_ref(fit, level, index)?.pairs();
    let statistic = independence_statistic(pairs);
    let null = null_distribution(pairs.n(), mc_replicates, seed);
    Ok(test_result_from_null(statistic, &null))
}

fn test_result_from_null(statistic: f64, sorted_null: &[f64]) -> TestResult {
    let m = sorted_null.len();
    let exceed = sorted_null.iter().filter(|&&x| x >= statistic).count();
    let p_value = (1 + exceed) as f64 / (m + 1) as f64;
    let critical_values = [0.10, 0.05, 0.01].map(|alpha| {
        let k = ((1.0 - alpha) * (m + 1) as f64).ceil() as usize;
        (alpha, sorted_null[k.clamp(1, m) - 1])
    });
    TestResult { statistic, p_value, critical_values, replicates: m }
}

type NullKey = (usize, usize, u64);
static NULL_CACHE: OnceLock<Mutex<HashMap<NullKey, Arc<Vec<f64>>>>> = OnceLock::new();

/// Sorted Monte-Carlo null distribution of [`independence_statistic`] for
/// samples of `n` independent pairs, cached by `(n, replicates, seed)`.
pub(crate) fn null_distribution(n: usize, replicates: usize, seed: u64) -> Arc<Vec<f64>> {
    let cache = NULL_CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(hit) = cache.lock().unwrap().get(&(n, replicates, seed)) {
        return Arc::clone(hit);
    }
    let null_seed = derive_seed(seed, TAG_INDEPENDENCE_NULL);
    let mut draws: Vec<f64> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate_rng(null_seed, r as u64);
            let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let u = rank::normalized_ranks(&x).expect("nonempty");
            let v = rank::normalized_ranks(&y).expect("nonempty");
            cvm_distance(&u, &v, |a, b| a * b)
        })
        .collect();
    draws.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let arc = Arc::new(draws);
    cache.lock().unwrap().insert((n, replicates, seed), Arc::clone(&arc));
    arc
}

// ---------------------------------------------------------------------------
// Goodness of fit
// ---------------------------------------------------------------------------

/// Cramér-von Mises distance between an edge's empirical copula and a
/// hypothesized parametric copula, summed over the edge's own
/// pseudo-observations.
pub fn gof_statistic(pairs: &PairSample, copula: &PairCopula) -> f64 {
    cvm_distance(pairs.u(), pairs.v(), |u, v| copula.cdf(u, v))
}

/// Fit a parametric pair-copula family to pseudo-observations by maximizing
/// the pseudo-likelihood. Student's t profiles the degrees of freedom over
/// the integer grid 3..=30.
pub fn fit_family(kind: FamilyKind, u: &[f64], v: &[f64]) -> Result<PairCopula> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch { expected: u.len(), got: v.len() });
    }
    if u.len() < 10 {
        return Err(Error::InvalidInput("need at least 10 pairs to fit a family".into()));
    }
    match kind {
        FamilyKind::Independence => Ok(PairCopula::Independence),
        FamilyKind::Gaussian => {
            let x: Vec<f64> = u.iter().map(|&p| math::norm_quantile(p)).collect();
            let y: Vec<f64> = v.iter().map(|&p| math::norm_quantile(p)).collect();
            let rho = maximize(|r| gaussian_loglik(&x, &y, r), -0.995, 0.995);
            Ok(PairCopula::Gaussian { rho })
        }
        FamilyKind::Gumbel => {
            let lx: Vec<f64> = u.iter().map(|&p| -p.ln()).collect();
            let ly: Vec<f64> = v.iter().map(|&p| -p.ln()).collect();
            let llx: Vec<f64> = lx.iter().map(|&x| x.ln()).collect();
            let lly: Vec<f64> = ly.iter().map(|&y| y.ln()).collect();
            let theta = maximize(|t| gumbel_loglik(&lx, &ly, &llx, &lly, t), 1.0, 12.0);
            Ok(PairCopula::Gumbel { theta })
        }
        FamilyKind::StudentT => {
            let mut best = (f64::NEG_INFINITY, 0.0, 3.0);
            for nu_i in 3..=30u32 {
                let nu = f64::from(nu_i);
                let x: Vec<f64> = u.iter().map(|&p| math::student_t_quantile(p, nu)).collect();
                let y: Vec<f64> = v.iter().map(|&p| math::student_t_quantile(p, nu)).collect();
                let rho = maximize(|r| student_loglik(&x, &y, r, nu), -0.995, 0.995);
                let ll = student_loglik(&x, &y, rho, nu);
                if ll > best.0 {
                    best = (ll, rho, nu);
                }
            }
            Ok(PairCopula::StudentT { rho: best.1, nu: best.2 })
        }
    }
}

/// Maximize a smooth one-parameter log-likelihood on `[lo, hi]`: coarse scan
/// to bracket the mode, then golden-section refinement.
fn maximize<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64) -> f64 {
    const SCAN: usize = 41;
    let step = (hi - lo) / (SCAN - 1) as f64;
    let mut best = (f64::NEG_INFINITY, lo);
    for i in 0..SCAN {
        let x = lo + step * i as f64;
        let y = f(x);
        if y > best.0 {
            best = (y, x);
        }
    }
    let mut a = (best.1 - step).max(lo);
    let mut b = (best.1 + step).min(hi);
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..80 {
        if b - a < 1e-9 {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Gaussian copula pseudo-log-likelihood with pre-transformed scores
/// `x = Phi^{-1}(u)`, `y = Phi^{-1}(v)`.
fn gaussian_loglik(x: &[f64], y: &[f64], rho: f64) -> f64 {
    let omr2 = 1.0 - rho * rho;
    let log_det = -0.5 * omr2.ln();
    let inv = 0.5 / omr2;
    x.iter()
        .zip(y)
        .map(|(&a, &b)| log_det - inv * (rho * rho * (a * a + b * b) - 2.0 * rho * a * b))
        .sum()
}

/// Gumbel copula pseudo-log-likelihood with caches `lx = -ln u`,
/// `llx = ln lx` (and likewise for `v`).
fn gumbel_loglik(lx: &[f64], ly: &[f64], llx: &[f64], lly: &[f64], theta: f64) -> f64 {
    let mut total = 0.0;
    for t in 0..lx.len() {
        let a = (theta * llx[t]).exp(); // (-ln u)^theta
        let b = (theta * lly[t]).exp();
        let s = a + b;
        let sp = (s.ln() / theta).exp(); // s^(1/theta)
        total += -sp + (theta - 1.0) * (llx[t] + lly[t]) + (lx[t] + ly[t])
            + (1.0 / theta - 2.0) * s.ln()
            + (sp + theta - 1.0).ln();
    }
    total
}

/// Student-t copula pseudo-log-likelihood with pre-transformed scores
/// `x = T_nu^{-1}(u)`, `y = T_nu^{-1}(v)`.
fn student_loglik(x: &[f64], y: &[f64], rho: f64, nu: f64) -> f64 {
    let omr2 = 1.0 - rho * rho;
    let const_term = math::ln_gamma((nu + 2.0) / 2.0) + math::ln_gamma(nu / 2.0)
        - 2.0 * math::ln_gamma((nu + 1.0) / 2.0)
        - 0.5 * omr2.ln();
    let half_nu2 = (nu + 2.0) / 2.0;
    let half_nu1 = (nu + 1.0) / 2.0;
    x.iter()
        .zip(y)
        .map(|(&a, &b)| {
            let q = (a * a - 2.0 * rho * a * b + b * b) / omr2;
            const_term - half_nu2 * (1.0 + q / nu).ln()
                + half_nu1 * ((1.0 + a * a / nu).ln() + (1.0 + b * b / nu).ln())
        })
        .sum()
}

/// Parametric-bootstrap goodness-of-fit test of a family for one edge.
///
/// The family's parameters are fitted to the edge's pseudo-observations by
/// pseudo-likelihood and the Cramér-von Mises distance to the fitted cdf is
/// the statistic. At conditional levels the pseudo-observations carry
/// estimation noise from the finite-difference recursion, so an i.i.d.
/// resample of the fitted copula would understate the statistic's null
/// spread. Each bootstrap replicate therefore simulates a full vine with
/// the hypothesized family fitted to every edge by pseudo-likelihood,
/// re-runs the whole empirical fit at the same bandwidth, and recomputes
/// the statistic from the replicate's own pseudo-observations.
pub fn gof_test(
    fit: &FittedEmpiricalVine,
    level: usize,
    index: usize,
    family: FamilyKind,
    mc_replicates: usize,
    seed: u64,
) -> Result<TestResult> {
    if family == FamilyKind::Independence {
        return Err(Error::InvalidInput(
            "the independence family has no parameters to fit; use independence_test".into(),
        ));
    }
    if mc_replicates < 50 {
        return Err(Error::InvalidInput(format!(
            "goodness-of-fit test needs at least 50 bootstrap replicates, got {mc_replicates}"
        )));
    }
    let pairs = edge_ref(fit, level, index)?.pairs();
    let n = pairs.n();
    let fitted = fit_family(family, pairs.u(), pairs.v())?;
    fitted.validate()?;
    let statistic = gof_statistic(pairs, &fitted);

    let copulas: Vec<Vec<PairCopula>> = fit
        .estimates()
        .iter()
        .enumerate()
        .map(|(l, tree)| {
            tree.iter()
                .enumerate()
                .map(|(e, est)| {
                    if (l, e) == (level, index) {
                        Ok(fitted)
                    } else {
                        fit_family(family, est.pairs().u(), est.pairs().v())
                    }
                })
                .collect::<Result<Vec<PairCopula>>>()
        })
        .collect::<Result<_>>()?;
    let null_model = VineModel::new(fit.vine().clone(), copulas)?;
    let bandwidth = fit.bandwidth();

    let boot_seed = derive_seed(seed, TAG_GOF_NULL);
    let mut null: Vec<f64> = (0..mc_replicates)
        .into_par_iter()
        .map(|r| -> Result<f64> {
            let columns = null_model.sample_stream(n, boot_seed, r as u64);
            let refit = crate::estimator::fit(&columns, null_model.vine(), bandwidth)?;
            let bpairs = edge_ref(&refit, level, index)?.pairs();
            let refitted = fit_family(family, bpairs.u(), bpairs.v())?;
            Ok(gof_statistic(bpairs, &refitted))
        })
        .collect::<Result<Vec<f64>>>()?;
    null.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(test_result_from_null(statistic, &null))
}

// ---------------------------------------------------------------------------
// Process evaluation and expansion residual
// ---------------------------------------------------------------------------

/// The normalized edge process `sqrt(n)(Chat - C0)` at one point, for a
/// caller-supplied reference value `C0`.
#[derive(Debug, Clone, Copy)]
pub struct ProcessEvaluation {
    pub level: usize,
    pub index: usize,
    pub point: (f64, f64),
    pub value: f64,
}

/// Evaluate `sqrt(n)(Chat(u, v) - reference)` at an edge.
pub fn process_value(
    fit: &FittedEmpiricalVine,
    level: usize,
    index: usize,
    point: (f64, f64),
    reference: f64,
) -> Result<ProcessEvaluation> {
    check_point(point.0, point.1)?;
    if !(0.0..=1.0).contains(&reference) {
        return Err(Error::InvalidInput(format!(
            "reference copula value {reference} outside [0, 1]"
        )));
    }
    let est = edge_ref(fit, level, index)?;
    let value = (fit.n() as f64).sqrt() * (est.copula(point.0, point.1) - reference);
    Ok(ProcessEvaluation { level, index, point, value })
}

/// True conditional inputs of one edge under a known simulation model,
/// together with the edge's true pair-copula: the oracle needed to evaluate
/// the linear expansion of the edge process.
#[derive(Debug, Clone)]
pub struct EdgeOracle {
    /// True conditional probability transforms of the edge's first side.
    pub true_u: Vec<f64>,
    /// True conditional probability transforms of the edge's second side.
    pub true_v: Vec<f64>,
    /// The edge's true pair-copula.
    pub copula: PairCopula,
}

impl EdgeOracle {
    /// Build the oracle for `model`'s edge at `(level, index)` from the raw
    /// sample columns that the model generated.
    pub fn from_model(
        model: &VineModel,
        columns: &[Vec<f64>],
        level: usize,
        index: usize,
    ) -> Result<Self> {
        let (true_u, true_v) = model.true_edge_inputs(columns, level, index)?;
        Ok(EdgeOracle { true_u, true_v, copula: *model.copula(level, index) })
    }
}

/// Absolute difference at one point between the edge process
/// `sqrt(n)(Chat - C)` and its conjectured linear expansion
///
/// ```text
/// alpha_n(u,v) - C1(u,v) alpha_n(u,1) - C2(u,v) alpha_n(1,v)
/// ```
///
/// where `alpha_n` is the empirical process of the *true* (unobservable)
/// conditional transforms supplied by the oracle and `C1`, `C2` are the true
/// partial derivatives. One replicate of the validation experiments.
pub fn expansion_residual(
    fit: &FittedEmpiricalVine,
    level: usize,
    index: usize,
    point: (f64, f64),
    oracle: &EdgeOracle,
) -> Result<f64> {
    check_point(point.0, point.1)?;
    let est = edge_ref(fit, level, index)?;
    let n = fit.n();
    if oracle.true_u.len() != n || oracle.true_v.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: oracle.true_u.len().min(oracle.true_v.len()),
        });
    }
    let (u, v) = point;
    let root_n = (n as f64).sqrt();
    let c_true = oracle.copula.cdf(u, v);
    let lhs = root_n * (est.copula(u, v) - c_true);

    let mut hits_uv = 0usize;
    let mut hits_u = 0usize;
    let mut hits_v = 0usize;
    for t in 0..n {
        let in_u = oracle.true_u[t] <= u;
        let in_v = oracle.true_v[t] <= v;
        hits_uv += usize::from(in_u && in_v);
        hits_u += usize::from(in_u);
        hits_v += usize::from(in_v);
    }
    let nf = n as f64;
    let alpha_uv = root_n * (hits_uv as f64 / nf - c_true);
    let alpha_u = root_n * (hits_u as f64 / nf - u);
    let alpha_v = root_n * (hits_v as f64 / nf - v);
    // the supported families are all exchangeable, so dC/du at (u, v) is the
    // conditional cdf h with the argument roles swapped
    let c1 = oracle.copula.h(v, u);
    let c2 = oracle.copula.h(u, v);
    let rhs = alpha_uv - c1 * alpha_u - c2 * alpha_v;
    Ok((lhs - rhs).abs())
}

// ---------------------------------------------------------------------------
// shared helpers
// ---------------------------------------------------------------------------

fn edge_ref(fit: &FittedEmpiricalVine, level: usize, index: usize) -> Result<&EdgeEstimate> {
    fit.estimates()
        .get(level)
        .and_then(|tree| tree.get(index))
        .ok_or_else(|| Error::InvalidInput(format!("no fitted edge at level {level}, index {index}")))
}

fn check_point(u: f64, v: f64) -> Result<()> {
    if !(u > 0.0 && u < 1.0 && v > 0.0 && v < 1.0) {
        return Err(Error::InvalidInput(format!(
            "evaluation point ({u}, {v}) must lie in the open unit square"
        )));
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!("alpha {alpha} outside (0, 1)")));
    }
    Ok(())
}

fn sample_sd(vals: &[f64]) -> f64 {
    let n = vals.len();
    if n < 2 {
        return 0.0;
    }
    let mean = vals.iter().sum::<f64>() / n as f64;
    let ss = vals.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>();
    (ss / (n - 1) as f64).sqrt()
}
