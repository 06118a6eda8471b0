//! Policy representations, candidate-pool sampling and local refinement.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{expit, Dataset};
use crate::error::{Error, Result};
use crate::rng;

const SIMPLEX_TOL: f64 = 1e-12;
const MAX_RESAMPLES: usize = 1000;

/// Linear score rule `beta . [1, s, x...]`, thresholded at zero when the
/// temperature is zero and passed through a logistic link otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearPolicy {
    beta: Vec<f64>,
    tau: f64,
    uses_sensitive: bool,
}

impl LinearPolicy {
    pub fn new(beta: Vec<f64>, tau: f64, uses_sensitive: bool) -> Result<Self> {
        if beta.len() < 3 {
            return Err(Error::Config(format!(
                "linear policy needs [intercept, s, x...] weights, got {}",
                beta.len()
            )));
        }
        if !(tau >= 0.0) {
            return Err(Error::Config(format!("temperature must be >= 0, got {tau}")));
        }
        if !uses_sensitive && beta[1] != 0.0 {
            return Err(Error::Config(
                "s-coefficient must be zero when the sensitive attribute is excluded".into(),
            ));
        }
        Ok(Self {
            beta,
            tau,
            uses_sensitive,
        })
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn uses_sensitive(&self) -> bool {
        self.uses_sensitive
    }

    pub fn dim(&self) -> usize {
        self.beta.len() - 2
    }

    pub fn score(&self, s: u8, x: &[f64]) -> f64 {
        let mut z = self.beta[0] + self.beta[1] * f64::from(s);
        for (b, v) in self.beta[2..].iter().zip(x) {
            z += b * v;
        }
        z
    }

    /// Probability of action 1. Exact zero scores resolve to action 0 when
    /// thresholding.
    pub fn prob(&self, s: u8, x: &[f64]) -> f64 {
        let z = self.score(s, x);
        if self.tau == 0.0 {
            if z > 0.0 {
                1.0
            } else {
                0.0
            }
        } else {
            expit(z / self.tau)
        }
    }

    fn with_beta(&self, beta: Vec<f64>) -> Self {
        Self {
            beta,
            tau: self.tau,
            uses_sensitive: self.uses_sensitive,
        }
    }
}

/// Lookup-table rule over a finite covariate support; `table[s][j]` is the
/// action distribution at support point `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularPolicy {
    support: Vec<Vec<f64>>,
    table: [Vec<Vec<f64>>; 2],
}

impl TabularPolicy {
    pub fn new(support: Vec<Vec<f64>>, table: [Vec<Vec<f64>>; 2]) -> Result<Self> {
        let m = support.len();
        let n_actions = table[0].first().map(|v| v.len()).unwrap_or(0);
        if n_actions < 2 {
            return Err(Error::Config("tabular policy needs at least two actions".into()));
        }
        for rows in &table {
            if rows.len() != m {
                return Err(Error::SupportMismatch(format!(
                    "table has {} rows for a support of {m} points",
                    rows.len()
                )));
            }
            for p in rows {
                let total: f64 = p.iter().sum();
                if p.len() != n_actions
                    || p.iter().any(|v| *v < -SIMPLEX_TOL || *v > 1.0 + SIMPLEX_TOL)
                    || (total - 1.0).abs() > SIMPLEX_TOL
                {
                    return Err(Error::Config(format!("{p:?} is not a probability vector")));
                }
            }
        }
        Ok(Self { support, table })
    }

    /// Binary-action table from `P(A = 1 | s, x_j)`.
    pub fn from_treat_probs(support: Vec<Vec<f64>>, treat: [Vec<f64>; 2]) -> Result<Self> {
        let to_rows = |v: &[f64]| v.iter().map(|p| vec![1.0 - p, *p]).collect::<Vec<_>>();
        Self::new(support, [to_rows(&treat[0]), to_rows(&treat[1])])
    }

    pub fn support(&self) -> &[Vec<f64>] {
        &self.support
    }

    pub fn n_actions(&self) -> usize {
        self.table[0][0].len()
    }

    pub fn distribution(&self, s: u8, j: usize) -> &[f64] {
        &self.table[s as usize][j]
    }

    pub fn index_of(&self, x: &[f64]) -> Option<usize> {
        self.support.iter().position(|p| p.as_slice() == x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Policy {
    Linear(LinearPolicy),
    Tabular(TabularPolicy),
}

impl Policy {
    pub fn linear(beta: Vec<f64>, tau: f64, uses_sensitive: bool) -> Result<Self> {
        LinearPolicy::new(beta, tau, uses_sensitive).map(Policy::Linear)
    }

    /// Policy that ignores its inputs and treats with probability `p`.
    pub fn constant(dim: usize, p: f64) -> Self {
        let mut beta = vec![0.0; dim + 2];
        if p == 0.5 {
            return Policy::Linear(LinearPolicy {
                beta,
                tau: 1.0,
                uses_sensitive: false,
            });
        }
        let (intercept, tau) = if p >= 1.0 {
            (1.0, 0.0)
        } else if p <= 0.0 {
            (-1.0, 0.0)
        } else {
            ((p / (1.0 - p)).ln(), 1.0)
        };
        beta[0] = intercept;
        Policy::Linear(LinearPolicy {
            beta,
            tau,
            uses_sensitive: false,
        })
    }

    /// Whether the rule can depend on the sensitive attribute at all.
    pub fn uses_sensitive(&self) -> bool {
        match self {
            Policy::Linear(p) => p.uses_sensitive && p.beta[1] != 0.0,
            Policy::Tabular(t) => t.table[0] != t.table[1],
        }
    }

    /// Probability of choosing action 1 given `(s, x)`.
    pub fn action_prob(&self, s: u8, x: &[f64]) -> Result<f64> {
        match self {
            Policy::Linear(p) => {
                if x.len() != p.dim() {
                    return Err(Error::Dimension {
                        expected: p.dim(),
                        got: x.len(),
                    });
                }
                Ok(p.prob(s, x))
            }
            Policy::Tabular(t) => {
                let j = t
                    .index_of(x)
                    .ok_or_else(|| Error::SupportMismatch(format!("{x:?} is not a support point")))?;
                Ok(t.table[s as usize][j][1])
            }
        }
    }

    /// Hot-path variant of [`Policy::action_prob`] for inputs already
    /// validated against the policy.
    pub(crate) fn prob_unchecked(&self, s: u8, x: &[f64]) -> f64 {
        match self {
            Policy::Linear(p) => p.prob(s, x),
            Policy::Tabular(t) => t
                .index_of(x)
                .map(|j| t.table[s as usize][j][1])
                .unwrap_or(f64::NAN),
        }
    }

    /// Checks that the policy can be evaluated on every record of `data`.
    pub fn check_compatible(&self, data: &Dataset) -> Result<()> {
        match self {
            Policy::Linear(p) if p.dim() != data.dim() => Err(Error::Dimension {
                expected: p.dim(),
                got: data.dim(),
            }),
            Policy::Linear(_) => Ok(()),
            Policy::Tabular(t) => {
                if t.n_actions() != 2 {
                    return Err(Error::NotBinary(t.n_actions()));
                }
                for i in 0..data.len() {
                    if t.index_of(data.x(i)).is_none() {
                        return Err(Error::SupportMismatch(format!(
                            "record {} covariates {:?} are off the policy support",
                            i + 1,
                            data.x(i)
                        )));
                    }
                }
                Ok(())
            }
        }
    }

    /// Expected number treated on `data`.
    pub fn expected_treated(&self, data: &Dataset) -> f64 {
        (0..data.len())
            .map(|i| self.prob_unchecked(data.sensitive()[i], data.x(i)))
            .sum()
    }
}

// ── Policy classes ──────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Linear,
    Tabular,
}

/// A restricted policy class searched by the fitters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicyClassSpec {
    pub kind: PolicyKind,
    pub pool_size: usize,
    pub weight_bound: f64,
    pub temperature: f64,
    pub uses_sensitive: bool,
    /// Upper bound on the expected number treated on the training data.
    pub budget_cap: Option<u64>,
    /// Objective evaluations per refined incumbent.
    pub refine_budget: usize,
}

impl Default for PolicyClassSpec {
    fn default() -> Self {
        Self {
            kind: PolicyKind::Linear,
            pool_size: 2000,
            weight_bound: 1.0,
            temperature: 0.0,
            uses_sensitive: true,
            budget_cap: None,
            refine_budget: 200,
        }
    }
}

impl PolicyClassSpec {
    pub fn validate(&self) -> Result<()> {
        if self.pool_size < 1 {
            return Err(Error::Config("pool_size must be >= 1".into()));
        }
        if !(self.weight_bound > 0.0) {
            return Err(Error::Config("weight_bound must be positive".into()));
        }
        if !(self.temperature >= 0.0) {
            return Err(Error::Config("temperature must be >= 0".into()));
        }
        Ok(())
    }

    pub fn within_budget(&self, policy: &Policy, reference: &Dataset) -> bool {
        match self.budget_cap {
            None => true,
            Some(cap) => policy.expected_treated(reference) <= cap as f64 + 1e-9,
        }
    }
}

fn draw_linear<R: Rng + ?Sized>(spec: &PolicyClassSpec, dim: usize, rng: &mut R) -> Policy {
    let free = if spec.uses_sensitive { dim + 1 } else { dim };
    let mut w: Vec<f64> = (0..free).map(|_| StandardNormal.sample(rng)).collect();
    let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    for v in &mut w {
        *v *= spec.weight_bound / norm;
    }
    let intercept = rng.random_range(-spec.weight_bound..=spec.weight_bound);
    let mut beta = Vec::with_capacity(dim + 2);
    beta.push(intercept);
    if spec.uses_sensitive {
        beta.extend_from_slice(&w);
    } else {
        beta.push(0.0);
        beta.extend_from_slice(&w);
    }
    Policy::Linear(LinearPolicy {
        beta,
        tau: spec.temperature,
        uses_sensitive: spec.uses_sensitive,
    })
}

/// Samples `pool_size` linear rules: non-intercept weights uniform on the
/// sphere of radius `weight_bound`, intercepts uniform on
/// `[-weight_bound, weight_bound]`. Candidates breaking the budget cap on
/// `reference` are redrawn.
pub fn sample_pool(
    spec: &PolicyClassSpec,
    dim: usize,
    reference: Option<&Dataset>,
    seed: u64,
) -> Result<Vec<Policy>> {
    spec.validate()?;
    if spec.kind != PolicyKind::Linear {
        return Err(Error::Config("only linear classes can be sampled".into()));
    }
    if dim == 0 {
        return Err(Error::Config("covariate dimension must be >= 1".into()));
    }
    let mut rng = rng::stream(seed, 0);
    let mut pool = Vec::with_capacity(spec.pool_size);
    for _ in 0..spec.pool_size {
        let mut accepted = None;
        for _ in 0..MAX_RESAMPLES {
            let cand = draw_linear(spec, dim, &mut rng);
            let ok = match reference {
                Some(data) => spec.within_budget(&cand, data),
                None => true,
            };
            if ok {
                accepted = Some(cand);
                break;
            }
        }
        match accepted {
            Some(p) => pool.push(p),
            None => {
                return Err(Error::Config(format!(
                    "budget cap {:?} rejected {MAX_RESAMPLES} consecutive candidates",
                    spec.budget_cap
                )))
            }
        }
    }
    Ok(pool)
}

// ── Local refinement ────────────────────────────────────────────────────

#[derive(Debug, Clone)]
pub struct Refined {
    pub policy: Policy,
    pub objective: f64,
    pub evaluations: usize,
}

/// Coordinate pattern search over the linear weights, minimizing
/// `objective` while keeping `feasible` true. Step sizes halve after a sweep
/// without improvement. Uses at most `budget` objective evaluations; tabular
/// policies are returned unchanged.
pub fn local_refine<F, G>(start: &Policy, mut objective: F, mut feasible: G, budget: usize) -> Refined
where
    F: FnMut(&Policy) -> f64,
    G: FnMut(&Policy) -> bool,
{
    let unchanged = |obj: f64, evals: usize| Refined {
        policy: start.clone(),
        objective: obj,
        evaluations: evals,
    };
    if budget == 0 {
        return unchanged(f64::NAN, 0);
    }
    let lin = match start {
        Policy::Linear(p) => p,
        Policy::Tabular(_) => return unchanged(f64::NAN, 0),
    };
    let mut best_obj = objective(start);
    let mut evals = 1;
    let mut beta = lin.beta.clone();
    let coords: Vec<usize> = (0..beta.len())
        .filter(|&j| j != 1 || lin.uses_sensitive)
        .collect();
    let scale = beta.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let mut step = 0.5 * scale;
    let min_step = 1e-10 * scale;

    'outer: while step > min_step {
        let mut improved = false;
        for &j in &coords {
            for dir in [1.0, -1.0] {
                if evals >= budget {
                    break 'outer;
                }
                let mut trial = beta.clone();
                trial[j] += dir * step;
                let cand = Policy::Linear(lin.with_beta(trial.clone()));
                if !feasible(&cand) {
                    continue;
                }
                let obj = objective(&cand);
                evals += 1;
                if obj < best_obj {
                    best_obj = obj;
                    beta = trial;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    Refined {
        policy: Policy::Linear(lin.with_beta(beta)),
        objective: best_obj,
        evaluations: evals,
    }
}
