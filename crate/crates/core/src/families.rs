//! Parametric bivariate copulas (independence, Gaussian, Student t,
//! Gumbel) with cdf / density / conditional distribution (h-function) /
//! inverse h-function, plus a parametric vine model with a deterministic
//! sampler and the level-wise parameter schedules used by the simulation
//! harnesses.

use rand::Rng;
use rand::distr::Open01;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::math;
use crate::rng::replicate_rng;
use crate::vine::{RegularVine, SamplingPlan, SideSource};
use crate::{Error, Result};

/// Arguments are clamped into [EPS, 1 - EPS] before quantile transforms.
const EPS: f64 = 1e-12;

fn clamp01(x: f64) -> f64 {
    x.clamp(EPS, 1.0 - EPS)
}

/// A bivariate copula family with fixed parameters. All four families are
/// exchangeable, so a single h-function `h(u, v) = P(U <= u | V = v)`
/// serves both conditioning directions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum PairCopula {
    Independence,
    Gaussian { rho: f64 },
    StudentT { rho: f64, nu: f64 },
    Gumbel { theta: f64 },
}

/// Family name without parameters, for fitting and CLI selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    Independence,
    Gaussian,
    StudentT,
    Gumbel,
}

impl std::str::FromStr for FamilyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "independence" | "indep" => Ok(Self::Independence),
            "gaussian" | "normal" => Ok(Self::Gaussian),
            "student_t" | "student-t" | "t" => Ok(Self::StudentT),
            "gumbel" => Ok(Self::Gumbel),
            other => Err(Error::Parse(format!("unknown copula family '{other}'"))),
        }
    }
}

impl std::fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Self::Independence => "independence",
            Self::Gaussian => "gaussian",
            Self::StudentT => "student_t",
            Self::Gumbel => "gumbel",
        };
        f.write_str(s)
    }
}

impl PairCopula {
    pub fn kind(&self) -> FamilyKind {
        match self {
            Self::Independence => FamilyKind::Independence,
            Self::Gaussian { .. } => FamilyKind::Gaussian,
            Self::StudentT { .. } => FamilyKind::StudentT,
            Self::Gumbel { .. } => FamilyKind::Gumbel,
        }
    }

    /// Parameter domain check: rho in (-1, 1), nu > 2, theta >= 1.
    pub fn validate(&self) -> Result<()> {
        let fail = |family: &'static str, detail: String| {
            Err(Error::InvalidParameter { family, detail })
        };
        match *self {
            Self::Independence => Ok(()),
            Self::Gaussian { rho } => {
                if !(rho.is_finite() && rho.abs() < 1.0) {
                    return fail("gaussian", format!("rho = {rho} not in (-1, 1)"));
                }
                Ok(())
            }
            Self::StudentT { rho, nu } => {
                if !(rho.is_finite() && rho.abs() < 1.0) {
                    return fail("student_t", format!("rho = {rho} not in (-1, 1)"));
                }
                if !(nu.is_finite() && nu > 2.0) {
                    return fail("student_t", format!("nu = {nu} must exceed 2"));
                }
                Ok(())
            }
            Self::Gumbel { theta } => {
                if !(theta.is_finite() && theta >= 1.0) {
                    return fail("gumbel", format!("theta = {theta} must be >= 1"));
                }
                Ok(())
            }
        }
    }

    /// C(u, v) = P(U <= u, V <= v).
    pub fn cdf(&self, u: f64, v: f64) -> f64 {
        // groundedness and uniform margins hold exactly; the quadrature
        // used by the Student-t branch would only approximate them
        if u <= 0.0 || v <= 0.0 {
            return 0.0;
        }
        if u >= 1.0 {
            return v.min(1.0);
        }
        if v >= 1.0 {
            return u;
        }
        let (u, v) = (clamp01(u), clamp01(v));
        match *self {
            Self::Independence => u * v,
            Self::Gaussian { rho } => {
                math::bvn_cdf(math::norm_quantile(u), math::norm_quantile(v), rho)
            }
            Self::StudentT { .. } => {
                // integrate the closed-form conditional over the second
                // coordinate: C(u, v) = int_0^v P(U <= u | V = w) dw
                let f = |w: f64| self.h(u, w);
                math::adaptive_simpson(&f, 0.0, v, 1e-10)
            }
            Self::Gumbel { theta } => {
                let (x, y) = (-u.ln(), -v.ln());
                let a = x.powf(theta) + y.powf(theta);
                (-a.powf(1.0 / theta)).exp()
            }
        }
    }

    /// Copula density c(u, v).
    pub fn density(&self, u: f64, v: f64) -> f64 {
        let (u, v) = (clamp01(u), clamp01(v));
        match *self {
            Self::Independence => 1.0,
            Self::Gaussian { rho } => {
                let (x, y) = (math::norm_quantile(u), math::norm_quantile(v));
                let r2 = 1.0 - rho * rho;
                let q = (rho * rho * (x * x + y * y) - 2.0 * rho * x * y) / (2.0 * r2);
                (-q).exp() / r2.sqrt()
            }
            Self::StudentT { rho, nu } => {
                let (x, y) = (math::student_t_quantile(u, nu), math::student_t_quantile(v, nu));
                let r2 = 1.0 - rho * rho;
                let ln_const = math::ln_gamma((nu + 2.0) / 2.0) + math::ln_gamma(nu / 2.0)
                    - 2.0 * math::ln_gamma((nu + 1.0) / 2.0);
                let ln_core = -(nu + 2.0) / 2.0
                    * (1.0 + (x * x - 2.0 * rho * x * y + y * y) / (nu * r2)).ln();
                let ln_marg = -(nu + 1.0) / 2.0
                    * ((1.0 + x * x / nu).ln() + (1.0 + y * y / nu).ln());
                (ln_const + ln_core - ln_marg).exp() / r2.sqrt()
            }
            Self::Gumbel { theta } => {
                let (x, y) = (-u.ln(), -v.ln());
                let a = x.powf(theta) + y.powf(theta);
                let c = (-a.powf(1.0 / theta)).exp();
                c * (x * y).powf(theta - 1.0) / (u * v)
                    * a.powf(2.0 / theta - 2.0)
                    * (1.0 + (theta - 1.0) * a.powf(-1.0 / theta))
            }
        }
    }

    /// Conditional distribution h(u, v) = P(U <= u | V = v) = dC/dv.
    pub fn h(&self, u: f64, v: f64) -> f64 {
        let (u, v) = (clamp01(u), clamp01(v));
        let out = match *self {
            Self::Independence => u,
            Self::Gaussian { rho } => {
                let (x, y) = (math::norm_quantile(u), math::norm_quantile(v));
                math::norm_cdf((x - rho * y) / (1.0 - rho * rho).sqrt())
            }
            Self::StudentT { rho, nu } => {
                let (x, y) = (math::student_t_quantile(u, nu), math::student_t_quantile(v, nu));
                let scale = ((nu + y * y) * (1.0 - rho * rho) / (nu + 1.0)).sqrt();
                math::student_t_cdf((x - rho * y) / scale, nu + 1.0)
            }
            Self::Gumbel { theta } => {
                let (x, y) = (-u.ln(), -v.ln());
                let a = x.powf(theta) + y.powf(theta);
                (-a.powf(1.0 / theta)).exp() * a.powf(1.0 / theta - 1.0) * y.powf(theta - 1.0) / v
            }
        };
        out.clamp(0.0, 1.0)
    }

    /// Solve h(u, v) = p for u. Closed form where available, monotone
    /// bisection otherwise.
    pub fn h_inverse(&self, p: f64, v: f64) -> f64 {
        let (p, v) = (clamp01(p), clamp01(v));
        match *self {
            Self::Independence => p,
            Self::Gaussian { rho } => {
                let y = math::norm_quantile(v);
                let x = (1.0 - rho * rho).sqrt() * math::norm_quantile(p) + rho * y;
                clamp01(math::norm_cdf(x))
            }
            Self::StudentT { rho, nu } => {
                let y = math::student_t_quantile(v, nu);
                let scale = ((nu + y * y) * (1.0 - rho * rho) / (nu + 1.0)).sqrt();
                let x = math::student_t_quantile(p, nu + 1.0) * scale + rho * y;
                clamp01(math::student_t_cdf(x, nu))
            }
            Self::Gumbel { .. } => {
                let (mut lo, mut hi) = (EPS, 1.0 - EPS);
                if p <= self.h(lo, v) {
                    return lo;
                }
                if p >= self.h(hi, v) {
                    return hi;
                }
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if self.h(mid, v) < p {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo <= 1e-13 {
                        break;
                    }
                }
                0.5 * (lo + hi)
            }
        }
    }
}

/// Level-wise parameter rule: Gaussian/t correlations decay as
/// rho / (1 + (level-1) rho), t degrees of freedom grow by one per level,
/// Gumbel theta stays constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScheduleFamily {
    Independence,
    Gaussian { rho: f64 },
    StudentT { rho: f64, nu: f64 },
    Gumbel { theta: f64 },
}

impl ScheduleFamily {
    /// Copula assigned to every edge of tree level `level` (1-based).
    pub fn copula_at_level(&self, level: usize) -> PairCopula {
        let k = (level - 1) as f64;
        match *self {
            Self::Independence => PairCopula::Independence,
            Self::Gaussian { rho } => PairCopula::Gaussian { rho: rho / (1.0 + k * rho) },
            Self::StudentT { rho, nu } => {
                PairCopula::StudentT { rho: rho / (1.0 + k * rho), nu: nu + k }
            }
            Self::Gumbel { theta } => PairCopula::Gumbel { theta },
        }
    }
}

/// A regular vine with one parametric pair-copula per edge. The
/// conditional copulas do not depend on their conditioning values, so all
/// conditional structure is carried by the vine recursion itself.
#[derive(Debug, Clone)]
pub struct VineModel {
    vine: RegularVine,
    copulas: Vec<Vec<PairCopula>>,
    plan: SamplingPlan,
    edge_base: Vec<usize>,
}

impl VineModel {
    /// `copulas` must mirror the vine's tree shape (one per edge).
    pub fn new(vine: RegularVine, copulas: Vec<Vec<PairCopula>>) -> Result<Self> {
        if copulas.len() != vine.trees().len() {
            return Err(Error::DimensionMismatch {
                expected: vine.trees().len(),
                got: copulas.len(),
            });
        }
        for (l, (tree, cs)) in vine.trees().iter().zip(&copulas).enumerate() {
            if tree.len() != cs.len() {
                return Err(Error::InvalidStructure(format!(
                    "level {} has {} edges but {} copulas",
                    l + 1,
                    tree.len(),
                    cs.len()
                )));
            }
            for c in cs {
                c.validate()?;
            }
        }
        let plan = vine.sampling_plan()?;
        let mut edge_base = Vec::with_capacity(vine.trees().len());
        let mut base = 0;
        for tree in vine.trees() {
            edge_base.push(base);
            base += tree.len();
        }
        Ok(Self { vine, copulas, plan, edge_base })
    }

    /// Same copula for every edge in a level.
    pub fn from_level_copulas(vine: RegularVine, levels: &[PairCopula]) -> Result<Self> {
        if levels.len() != vine.trees().len() {
            return Err(Error::DimensionMismatch {
                expected: vine.trees().len(),
                got: levels.len(),
            });
        }
        let copulas = vine
            .trees()
            .iter()
            .zip(levels)
            .map(|(tree, c)| vec![*c; tree.len()])
            .collect();
        Self::new(vine, copulas)
    }

    /// Apply a parameter schedule across all levels of `vine`.
    pub fn from_schedule(vine: RegularVine, family: ScheduleFamily) -> Result<Self> {
        let levels: Vec<PairCopula> = (1..vine.dimension())
            .map(|level| family.copula_at_level(level))
            .collect();
        Self::from_level_copulas(vine, &levels)
    }

    pub fn vine(&self) -> &RegularVine {
        &self.vine
    }

    pub fn copula(&self, level: usize, index: usize) -> &PairCopula {
        &self.copulas[level][index]
    }

    pub fn dimension(&self) -> usize {
        self.vine.dimension()
    }

    fn memo_id(&self, level: usize, index: usize, side: usize) -> usize {
        2 * (self.edge_base[level] + index) + side
    }

    /// F(x_side | conditioning set of the edge, plus the other conditioned
    /// variable) at one observation, memoized across the recursion.
    fn cond_value(&self, level: usize, index: usize, side: usize, u: &[f64], memo: &mut [f64]) -> f64 {
        let id = self.memo_id(level, index, side);
        if !memo[id].is_nan() {
            return memo[id];
        }
        let a = self.input_value(level, index, side, u, memo);
        let b = self.input_value(level, index, 1 - side, u, memo);
        let out = self.copulas[level][index].h(a, b);
        memo[id] = out;
        out
    }

    /// F(x_side | conditioning set of the edge) at one observation — the
    /// value fed into the edge's pair-copula.
    fn input_value(&self, level: usize, index: usize, side: usize, u: &[f64], memo: &mut [f64]) -> f64 {
        match self.vine.side_source(level, index, side) {
            SideSource::Variable(var) => u[var],
            SideSource::Parent { level: pl, index: pi, side: ps } => {
                self.cond_value(pl, pi, ps, u, memo)
            }
        }
    }

    /// Transform one row of d independent uniforms into one joint draw by
    /// inverting the h-functions down each variable's edge chain.
    fn transform_row(&self, w: &[f64]) -> Vec<f64> {
        let d = self.vine.dimension();
        let mut u = vec![f64::NAN; d];
        let mut memo = vec![f64::NAN; 2 * self.vine.edge_count()];
        u[self.plan.order[0]] = clamp01(w[0]);
        for k in 1..d {
            let x = self.plan.order[k];
            let mut q = clamp01(w[k]);
            for &(l, idx) in self.plan.chains[k].iter().rev() {
                let e = self.vine.edge(l, idx);
                let side_x = if e.conditioned.0 == x { 0 } else { 1 };
                let z = self.input_value(l, idx, 1 - side_x, &u, &mut memo);
                // before inversion, q is this edge's conditional output for x
                memo[self.memo_id(l, idx, side_x)] = q;
                q = self.copulas[l][idx].h_inverse(q, z);
            }
            u[x] = q;
        }
        u
    }

    /// Draw `n` joint uniform rows, returned column-major (d columns of
    /// length n). The stream index gives independent replicates under one
    /// seed. All randomness is consumed serially before the (parallel,
    /// order-independent) row transforms, so results do not depend on
    /// thread scheduling.
    pub fn sample_stream(&self, n: usize, seed: u64, stream: u64) -> Vec<Vec<f64>> {
        let d = self.vine.dimension();
        let mut rng = replicate_rng(seed, stream);
        let draws: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.sample(Open01)).collect())
            .collect();
        let rows: Vec<Vec<f64>> = draws.par_iter().map(|w| self.transform_row(w)).collect();
        let mut cols = vec![Vec::with_capacity(n); d];
        for row in rows {
            for (j, x) in row.into_iter().enumerate() {
                cols[j].push(x);
            }
        }
        cols
    }

    /// Draw `n` rows on stream 0.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<Vec<f64>> {
        self.sample_stream(n, seed, 0)
    }

    /// True conditional inputs (F(i | D), F(j | D)) of an edge at each
    /// observation of `columns` (column-major joint uniforms). Under this
    /// model the pair of inputs is distributed exactly as the edge's
    /// copula.
    pub fn true_edge_inputs(
        &self,
        columns: &[Vec<f64>],
        level: usize,
        index: usize,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let d = self.vine.dimension();
        if columns.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: columns.len() });
        }
        let n = columns[0].len();
        if columns.iter().any(|c| c.len() != n) {
            return Err(Error::InvalidInput("columns differ in length".into()));
        }
        if level >= self.vine.trees().len() || index >= self.vine.trees()[level].len() {
            return Err(Error::InvalidInput(format!(
                "no edge at level {} index {index}",
                level + 1
            )));
        }
        let pairs: Vec<(f64, f64)> = (0..n)
            .into_par_iter()
            .map(|t| {
                let row: Vec<f64> = (0..d).map(|j| clamp01(columns[j][t])).collect();
                let mut memo = vec![f64::NAN; 2 * self.vine.edge_count()];
                let a = self.input_value(level, index, 0, &row, &mut memo);
                let b = self.input_value(level, index, 1, &row, &mut memo);
                (a, b)
            })
            .collect();
        Ok(pairs.into_iter().unzip())
    }

    /// JSON: the vine's tree layout with `family` / `params` attached to
    /// every edge.
    pub fn to_json_string(&self) -> String {
        let trees: Vec<Vec<ModelEdgeDto>> = self
            .vine
            .trees()
            .iter()
            .enumerate()
            .map(|(l, tree)| {
                let mut dtos: Vec<ModelEdgeDto> = tree
                    .iter()
                    .enumerate()
                    .map(|(k, e)| ModelEdgeDto {
                        i: e.conditioned.0 + 1,
                        j: e.conditioned.1 + 1,
                        v: e.conditioning.iter().map(|x| x + 1).collect(),
                        copula: self.copulas[l][k],
                    })
                    .collect();
                dtos.sort_by_key(|e| (e.i, e.j));
                dtos
            })
            .collect();
        let dto = ModelDto { d: self.vine.dimension(), trees };
        serde_json::to_string_pretty(&dto).expect("model serialization cannot fail")
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let dto: ModelDto = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        // rebuild the vine from the labels alone, then attach copulas
        let vine_json = serde_json::json!({
            "d": dto.d,
            "trees": dto
                .trees
                .iter()
                .map(|tree| {
                    tree.iter()
                        .map(|e| serde_json::json!({"i": e.i, "j": e.j, "v": e.v}))
                        .collect::<Vec<_>>()
                })
                .collect::<Vec<_>>(),
        });
        let vine = RegularVine::from_json_str(&vine_json.to_string())?;
        let mut copulas: Vec<Vec<Option<PairCopula>>> =
            vine.trees().iter().map(|t| vec![None; t.len()]).collect();
        for tree in &dto.trees {
            for e in tree {
                let v0: Vec<usize> = e.v.iter().map(|&x| x - 1).collect();
                let (l, k) = vine
                    .find_edge(e.i - 1, e.j - 1, &v0)
                    .ok_or_else(|| Error::Parse(format!("edge {},{} not found after rebuild", e.i, e.j)))?;
                copulas[l][k] = Some(e.copula);
            }
        }
        let copulas: Vec<Vec<PairCopula>> = copulas
            .into_iter()
            .map(|t| t.into_iter().map(|c| c.expect("every edge was assigned")).collect())
            .collect();
        Self::new(vine, copulas)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelEdgeDto {
    i: usize,
    j: usize,
    v: Vec<usize>,
    #[serde(flatten)]
    copula: PairCopula,
}

#[derive(Serialize, Deserialize)]
struct ModelDto {
    d: usize,
    trees: Vec<Vec<ModelEdgeDto>>,
}
