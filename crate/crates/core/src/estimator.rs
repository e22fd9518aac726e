//! The empirical pair-copula estimator: starting from the normalized ranks
//! of the data, finite-difference conditional cdf estimates are propagated
//! level by level up a regular vine. Every edge exposes the rank pairs its
//! empirical copula is built on, plus the conditional estimates it hands to
//! the next level.

use rayon::prelude::*;

use crate::rank::{
    conditional_obs_at_samples, empirical_copula, tie_broken_ranks, Bandwidth, PairSample,
    PseudoObservations,
};
use crate::vine::{RegularVine, SideSource};
use crate::{Error, Result};

/// Everything estimated for one vine edge.
#[derive(Debug, Clone)]
pub struct EdgeEstimate {
    pairs: PairSample,
    /// Finite-difference conditional cdf values at the sample points:
    /// `outputs[0][t]` estimates F(i | j and the conditioning set) at
    /// observation t, `outputs[1][t]` the same with i and j swapped. Their
    /// normalized ranks are the coordinates consumed by child edges.
    outputs: [Vec<f64>; 2],
    spearman: f64,
    tied_inputs: usize,
}

impl EdgeEstimate {
    /// The rank pairs this edge's empirical copula is evaluated on.
    pub fn pairs(&self) -> &PairSample {
        &self.pairs
    }

    /// Empirical copula of the edge at a point.
    pub fn copula(&self, u: f64, v: f64) -> f64 {
        empirical_copula(&self.pairs, u, v)
    }

    /// Sample Spearman coefficient of the edge's rank pairs.
    pub fn spearman_rho(&self) -> f64 {
        self.spearman
    }

    /// Conditional cdf estimates before rank-normalization; `side` 0 gives
    /// the first conditioned variable given everything else on the edge,
    /// `side` 1 the second.
    pub fn conditional_outputs(&self, side: usize) -> &[f64] {
        &self.outputs[side]
    }

    /// How many coordinate values entered this edge tied with another
    /// value (0 when the pairs are exact permutations of k/(n+1)).
    pub fn tied_input_count(&self) -> usize {
        self.tied_inputs
    }
}

/// A vine fitted with the empirical pair-copula at every edge.
#[derive(Debug, Clone)]
pub struct FittedEmpiricalVine {
    vine: RegularVine,
    n: usize,
    bandwidth: Bandwidth,
    h: f64,
    estimates: Vec<Vec<EdgeEstimate>>,
    warnings: Vec<String>,
}

/// Fit the empirical pair-copula on every edge of `vine`. `columns` holds
/// the raw data, one column per variable; only the columnwise ranks are
/// used, so strictly increasing marginal transformations do not change the
/// result.
pub fn fit(columns: &[Vec<f64>], vine: &RegularVine, bandwidth: Bandwidth) -> Result<FittedEmpiricalVine> {
    let pseudo = PseudoObservations::from_columns(columns)?;
    if pseudo.d() != vine.dimension() {
        return Err(Error::DimensionMismatch { expected: vine.dimension(), got: pseudo.d() });
    }
    let violations = vine.validate();
    if !violations.is_empty() {
        return Err(Error::InvalidStructure(violations.join("; ")));
    }
    let n = pseudo.n();
    if n < 10 {
        return Err(Error::InvalidInput(format!(
            "need at least 10 observations to fit, got {n}"
        )));
    }
    let mut warnings = Vec::new();
    if n < 100 {
        warnings.push(format!(
            "n = {n} is small; conditional cdf estimates are noisy below n = 100"
        ));
    }
    let h = bandwidth.resolve(n)?;

    let mut estimates: Vec<Vec<EdgeEstimate>> = Vec::with_capacity(vine.trees().len());
    for (level, tree) in vine.trees().iter().enumerate() {
        // edges within a level depend only on completed lower levels
        let level_estimates: Vec<EdgeEstimate> = tree
            .par_iter()
            .enumerate()
            .map(|(index, _)| -> Result<EdgeEstimate> {
                let (u, tied_u) = side_input(vine, &estimates, &pseudo, level, index, 0)?;
                let (v, tied_v) = side_input(vine, &estimates, &pseudo, level, index, 1)?;
                let pairs = PairSample::new(u, v, h)?;
                let outputs = [
                    conditional_obs_at_samples(pairs.u(), pairs.v(), h),
                    conditional_obs_at_samples(pairs.v(), pairs.u(), h),
                ];
                let spearman = pairs.spearman_rho();
                Ok(EdgeEstimate { pairs, outputs, spearman, tied_inputs: tied_u + tied_v })
            })
            .collect::<Result<Vec<_>>>()?;
        estimates.push(level_estimates);
    }

    let tied_edges = estimates
        .iter()
        .flatten()
        .filter(|e| e.tied_inputs > 0)
        .count();
    if tied_edges > 0 {
        warnings.push(format!(
            "{tied_edges} edge(s) received tied coordinate values; tied entries share a normalized rank"
        ));
    }

    Ok(FittedEmpiricalVine { vine: vine.clone(), n, bandwidth, h, estimates, warnings })
}

/// One coordinate vector for an edge: ground variables contribute their
/// normalized ranks directly, higher edges the normalized ranks of the
/// relevant parent's conditional estimates. Also counts tied values.
fn side_input(
    vine: &RegularVine,
    estimates: &[Vec<EdgeEstimate>],
    pseudo: &PseudoObservations,
    level: usize,
    index: usize,
    side: usize,
) -> Result<(Vec<f64>, usize)> {
    match vine.side_source(level, index, side) {
        SideSource::Variable(var) => {
            let ranks = pseudo.column(var).to_vec();
            let tied = tie_count(&ranks);
            Ok((ranks, tied))
        }
        SideSource::Parent { level: pl, index: pi, side: ps } => {
            // the finite-difference estimates tie heavily (they are count
            // ratios over near-constant window sizes), so rank them with
            // ties broken to keep the margins exactly uniform
            let raw = &estimates[pl][pi].outputs[ps];
            let ranks = tie_broken_ranks(raw)?;
            Ok((ranks, tie_count(raw)))
        }
    }
}

fn tie_count(values: &[f64]) -> usize {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let mut tied = 0;
    let mut run = 1;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            if run > 1 {
                tied += run;
            }
            run = 1;
        }
    }
    if run > 1 {
        tied += run;
    }
    tied
}

impl FittedEmpiricalVine {
    pub fn vine(&self) -> &RegularVine {
        &self.vine
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// The bandwidth rule the fit was requested with.
    pub fn bandwidth(&self) -> Bandwidth {
        self.bandwidth
    }

    /// The resolved numeric bandwidth used in every window.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn estimate(&self, level: usize, index: usize) -> &EdgeEstimate {
        &self.estimates[level][index]
    }

    pub fn estimates(&self) -> &[Vec<EdgeEstimate>] {
        &self.estimates
    }

    /// Look up an edge estimate by 0-based conditioned pair and
    /// conditioning set.
    pub fn estimate_by_label(&self, i: usize, j: usize, conditioning: &[usize]) -> Option<&EdgeEstimate> {
        let (level, index) = self.vine.find_edge(i, j, conditioning)?;
        Some(&self.estimates[level][index])
    }

    /// Empirical pair-copula of an edge at a point.
    pub fn edge_copula(&self, level: usize, index: usize, u: f64, v: f64) -> f64 {
        self.estimates[level][index].copula(u, v)
    }

    /// Conditional cdf estimates an edge passes upward (see
    /// [`EdgeEstimate::conditional_outputs`]).
    pub fn conditional_pseudo_obs(&self, level: usize, index: usize, side: usize) -> &[f64] {
        self.estimates[level][index].conditional_outputs(side)
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }
}
