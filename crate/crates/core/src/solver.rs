//! Pareto-set estimation over (action fairness, outcome fairness) and the
//! baseline fitters.
//!
//! Every fitter works on one shared candidate pool. Local refinement runs
//! from the incumbent of each sub-step and its output joins the pool; the
//! final selection is then made on the frozen pool, so all constraint sets
//! are nested and every feasibility claim below holds exactly on the
//! returned pool.
//!
//! For a weight `alpha` the lexicographic Tchebyshev step is
//!
//! 1. `M* = min M_alpha` with `M_alpha = max(alpha D1, (1 - alpha) D2)`;
//! 2. `D* = min (D1 + D2)` subject to `M_alpha <= M* + kappa`;
//! 3. `V*` = max value subject to both slack constraints.
//!
//! The fitted rule is the step-3 maximiser with the largest `V*` over the
//! weight grid.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::fairness::{MetricConfig, PolicyEvaluator, Scores};
use crate::nuisance::{Channel, OutcomeFn, ShiftModel};
use crate::policy::{local_refine, sample_pool, Policy, PolicyClassSpec};

// ── Schedules and scalarizations ────────────────────────────────────────

/// Slack `c0 * max(n^(-gamma2 / 2), sqrt(ln n / n))`.
pub fn kappa_schedule(n: usize, c0: f64, gamma2: f64) -> f64 {
    let n = n as f64;
    c0 * n.powf(-gamma2 / 2.0).max((n.ln() / n).sqrt())
}

/// Midpoint grid `(2k - 1) / (2K)`, `k = 1..K`.
pub fn alpha_grid(k: usize) -> Vec<f64> {
    (1..=k).map(|i| (2 * i - 1) as f64 / (2 * k) as f64).collect()
}

pub fn tchebyshev_m(alpha: f64, delta1: f64, delta2: f64) -> f64 {
    (alpha * delta1).max((1.0 - alpha) * delta2)
}

pub fn linear_scalarization(alpha: f64, delta1: f64, delta2: f64) -> f64 {
    alpha * delta1 + (1.0 - alpha) * delta2
}

// ── Finite-set selection ────────────────────────────────────────────────

fn require_nonempty(scores: &[Scores]) -> Result<()> {
    if scores.is_empty() {
        return Err(Error::Config("candidate pool is empty".into()));
    }
    Ok(())
}

fn min_over<F: Fn(&Scores) -> f64>(scores: &[Scores], f: F) -> f64 {
    scores.iter().map(f).fold(f64::INFINITY, f64::min)
}

/// Index of the largest value among candidates passing `keep`; ties go to
/// the lowest index.
fn argmax_value<P: Fn(&Scores) -> bool>(scores: &[Scores], keep: P) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, s) in scores.iter().enumerate() {
        if keep(s) && best.is_none_or(|b| s.value > scores[b].value) {
            best = Some(i);
        }
    }
    best
}

/// Outcome of the three-step problem at one weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaStep {
    pub alpha: f64,
    pub m_star: f64,
    pub delta_star: f64,
    pub value_star: f64,
    /// Pool index of the value maximiser.
    pub index: usize,
}

impl AlphaStep {
    fn admits(&self, s: &Scores, kappa: f64) -> bool {
        tchebyshev_m(self.alpha, s.delta1, s.delta2) <= self.m_star + kappa
            && s.delta1 + s.delta2 <= self.delta_star + kappa
    }
}

pub fn select_alpha(scores: &[Scores], alpha: f64, kappa: f64) -> Result<AlphaStep> {
    require_nonempty(scores)?;
    let m = |s: &Scores| tchebyshev_m(alpha, s.delta1, s.delta2);
    let m_star = min_over(scores, m);
    let delta_star = scores
        .iter()
        .filter(|s| m(s) <= m_star + kappa)
        .map(|s| s.delta1 + s.delta2)
        .fold(f64::INFINITY, f64::min);
    let mut step = AlphaStep {
        alpha,
        m_star,
        delta_star,
        value_star: f64::NAN,
        index: 0,
    };
    let index = argmax_value(scores, |s| step.admits(s, kappa))
        .ok_or_else(|| Error::Numerical(format!("empty constraint set at alpha = {alpha}")))?;
    step.index = index;
    step.value_star = scores[index].value;
    Ok(step)
}

/// The set of candidates satisfying both slack constraints at `alpha`.
pub fn lambda_set(scores: &[Scores], alpha: f64, kappa: f64) -> Result<Vec<usize>> {
    let step = select_alpha(scores, alpha, kappa)?;
    Ok((0..scores.len()).filter(|&i| step.admits(&scores[i], kappa)).collect())
}

/// Per-weight steps and the chosen weight index (ties to the smaller index).
pub fn select_dfl(scores: &[Scores], alphas: &[f64], kappa: f64) -> Result<(Vec<AlphaStep>, usize)> {
    if alphas.is_empty() {
        return Err(Error::Config("empty alpha grid".into()));
    }
    let steps = alphas
        .iter()
        .map(|&a| select_alpha(scores, a, kappa))
        .collect::<Result<Vec<_>>>()?;
    let mut chosen = 0;
    for (k, s) in steps.iter().enumerate() {
        if s.value_star > steps[chosen].value_star {
            chosen = k;
        }
    }
    Ok((steps, chosen))
}

/// Union over the grid of the near-minimisers of the linear scalarization.
pub fn linear_union(scores: &[Scores], alphas: &[f64], kappa: f64) -> Result<Vec<usize>> {
    require_nonempty(scores)?;
    let mins: Vec<f64> = alphas
        .iter()
        .map(|&a| min_over(scores, |s| linear_scalarization(a, s.delta1, s.delta2)))
        .collect();
    Ok((0..scores.len())
        .filter(|&i| in_linear_union(&scores[i], alphas, &mins, kappa))
        .collect())
}

fn in_linear_union(s: &Scores, alphas: &[f64], mins: &[f64], kappa: f64) -> bool {
    alphas
        .iter()
        .zip(mins)
        .any(|(&a, &m)| linear_scalarization(a, s.delta1, s.delta2) <= m + kappa)
}

pub fn select_advb(scores: &[Scores], alphas: &[f64], kappa: f64) -> Result<usize> {
    let union = linear_union(scores, alphas, kappa)?;
    union
        .iter()
        .copied()
        .reduce(|b, i| if scores[i].value > scores[b].value { i } else { b })
        .ok_or_else(|| Error::Numerical("empty linear-scalarization union".into()))
}

/// Which fairness metric a single-metric baseline constrains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SingleTarget {
    Action,
    Outcome,
}

impl SingleTarget {
    fn metric(self, s: &Scores) -> f64 {
        match self {
            SingleTarget::Action => s.delta1,
            SingleTarget::Outcome => s.delta2,
        }
    }
}

pub fn select_single(scores: &[Scores], which: SingleTarget, kappa: f64) -> Result<usize> {
    require_nonempty(scores)?;
    let best = min_over(scores, |s| which.metric(s));
    argmax_value(scores, |s| which.metric(s) <= best + kappa)
        .ok_or_else(|| Error::Numerical("empty single-metric constraint set".into()))
}

// ── Configuration ───────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DFLConfig {
    #[serde(rename = "K")]
    pub k: usize,
    pub c0: f64,
    pub gamma2: f64,
    pub metric: MetricConfig,
    pub class_spec: PolicyClassSpec,
    pub seed: u64,
    pub kappa_override: Option<f64>,
}

impl Default for DFLConfig {
    fn default() -> Self {
        Self {
            k: 10,
            c0: 0.5,
            gamma2: 1.0,
            metric: MetricConfig::default(),
            class_spec: PolicyClassSpec::default(),
            seed: 2024,
            kappa_override: None,
        }
    }
}

impl DFLConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::Config("K must be >= 1".into()));
        }
        if !(self.c0 > 0.0 && self.c0.is_finite()) {
            return Err(Error::Config(format!("c0 must be positive, got {}", self.c0)));
        }
        if !(self.gamma2 > 0.0 && self.gamma2 <= 1.0) {
            return Err(Error::Config(format!("gamma2 must lie in (0, 1], got {}", self.gamma2)));
        }
        if let Some(k) = self.kappa_override {
            if !(k >= 0.0 && k.is_finite()) {
                return Err(Error::Config(format!("kappa_override must be >= 0, got {k}")));
            }
        }
        self.class_spec.validate()
    }

    pub fn kappa(&self, n: usize) -> f64 {
        self.kappa_override
            .unwrap_or_else(|| kappa_schedule(n.max(2), self.c0, self.gamma2))
    }
}

/// Fitted nuisances handed to the fitters.
#[derive(Clone, Copy)]
pub struct Models<'a> {
    pub primary: &'a dyn OutcomeFn,
    pub fairness: &'a dyn OutcomeFn,
    pub shift: Option<&'a ShiftModel>,
}

// ── Candidate pool with refinement ──────────────────────────────────────

/// Candidates and their training-sample scores.
#[derive(Debug, Clone)]
pub struct Pool {
    pub policies: Vec<Policy>,
    pub scores: Vec<Scores>,
    pub initial_size: usize,
    pub refine_evaluations: usize,
}

impl Pool {
    fn score(ev: &PolicyEvaluator, policies: Vec<Policy>) -> Self {
        let scores = policies.par_iter().map(|p| ev.scores(p)).collect();
        let initial_size = policies.len();
        Self {
            policies,
            scores,
            initial_size,
            refine_evaluations: 0,
        }
    }

    fn extend(&mut self, found: Vec<Candidate>) {
        for c in found {
            self.refine_evaluations += c.evaluations;
            if c.fresh {
                self.policies.push(c.policy);
                self.scores.push(c.scores);
            }
        }
    }
}

struct Candidate {
    policy: Policy,
    scores: Scores,
    evaluations: usize,
    fresh: bool,
}

/// Shared, read-only context for refinement.
struct Refiner<'a> {
    ev: &'a PolicyEvaluator,
    data: &'a Dataset,
    spec: &'a PolicyClassSpec,
}

impl Refiner<'_> {
    /// Minimises `objective` over scores from `start`, keeping `feasible`.
    fn run<F, G>(&self, start: &Policy, objective: F, feasible: G) -> Candidate
    where
        F: Fn(&Scores) -> f64,
        G: Fn(&Scores) -> bool,
    {
        let out = local_refine(
            start,
            |p| {
                let s = self.ev.scores(p);
                if feasible(&s) && self.spec.within_budget(p, self.data) {
                    objective(&s)
                } else {
                    f64::INFINITY
                }
            },
            |_| true,
            self.spec.refine_budget,
        );
        let fresh = &out.policy != start;
        Candidate {
            scores: self.ev.scores(&out.policy),
            policy: out.policy,
            evaluations: out.evaluations,
            fresh,
        }
    }

    /// Scores `f` over a frozen slice plus freshly found candidates.
    fn best_start<'p>(
        &self,
        pool: &'p Pool,
        extra: &'p [Candidate],
        f: impl Fn(&Scores) -> f64,
        keep: impl Fn(&Scores) -> bool,
    ) -> Option<(&'p Policy, f64)> {
        let base = pool.policies.iter().zip(&pool.scores);
        let more = extra.iter().map(|c| (&c.policy, &c.scores));
        let mut best: Option<(&Policy, f64)> = None;
        for (p, s) in base.chain(more) {
            if keep(s) {
                let v = f(s);
                if best.is_none_or(|(_, b)| v < b) {
                    best = Some((p, v));
                }
            }
        }
        best
    }

    fn enabled(&self) -> bool {
        self.spec.refine_budget > 0
    }
}

/// Three refinements at one weight, each seeded at its sub-step incumbent.
fn refine_alpha(r: &Refiner, pool: &Pool, alpha: f64, kappa: f64) -> Vec<Candidate> {
    let m = move |s: &Scores| tchebyshev_m(alpha, s.delta1, s.delta2);
    let d = |s: &Scores| s.delta1 + s.delta2;
    let mut found: Vec<Candidate> = Vec::new();

    let (start, _) = r.best_start(pool, &found, m, |_| true).expect("pool is nonempty");
    let c = r.run(start, m, |_| true);
    found.push(c);
    let (_, m_star) = r.best_start(pool, &found, m, |_| true).expect("pool is nonempty");

    let f1 = move |s: &Scores| m(s) <= m_star + kappa;
    let (start, _) = r.best_start(pool, &found, d, f1).expect("M-minimiser is feasible");
    let c = r.run(start, d, f1);
    found.push(c);
    let (_, d_star) = r.best_start(pool, &found, d, f1).expect("M-minimiser is feasible");

    let f2 = move |s: &Scores| f1(s) && d(s) <= d_star + kappa;
    let neg_v = |s: &Scores| -s.value;
    let (start, _) = r.best_start(pool, &found, neg_v, f2).expect("D-minimiser is feasible");
    let c = r.run(start, neg_v, f2);
    found.push(c);
    found
}

fn build_pool(data: &Dataset, ev: &PolicyEvaluator, spec: &PolicyClassSpec, seed: u64) -> Result<Pool> {
    let policies = sample_pool(spec, data.dim(), Some(data), seed)?;
    Ok(Pool::score(ev, policies))
}

fn check_pool(data: &Dataset, policies: &[Policy]) -> Result<()> {
    if policies.is_empty() {
        return Err(Error::Config("candidate pool is empty".into()));
    }
    policies.iter().try_for_each(|p| p.check_compatible(data))
}

fn evaluator(data: &Dataset, models: Models, metric: MetricConfig) -> Result<PolicyEvaluator> {
    PolicyEvaluator::new(data, models.primary, models.fairness, models.shift, metric)
}

// ── The Pareto-set estimator ────────────────────────────────────────────

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlphaRow {
    #[serde(flatten)]
    pub step: AlphaStep,
    pub policy: Policy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub initial_pool_size: usize,
    pub final_pool_size: usize,
    pub refine_evaluations: usize,
    pub n_train: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    pub policy: Policy,
    /// Training-sample scores of the returned rule.
    pub scores: Scores,
    /// Zero-based position of the chosen weight in the grid.
    pub chosen_alpha_index: usize,
    pub kappa: f64,
    pub per_alpha: Vec<AlphaRow>,
    /// Pool indices of candidates satisfying both slack constraints at some weight.
    pub pareto_pool: Vec<usize>,
    pub diagnostics: Diagnostics,
    #[serde(skip)]
    pub pool: Option<Pool>,
}

/// Outcome of [`FitResult::verify`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct InvariantCheck {
    /// Every per-weight rule satisfies both slack constraints on the pool.
    pub slack: bool,
    /// The returned value equals the largest per-weight value.
    pub argmax: bool,
}

impl InvariantCheck {
    pub fn holds(&self) -> bool {
        self.slack && self.argmax
    }
}

impl FitResult {
    fn assemble(pool: Pool, alphas: &[f64], kappa: f64, n_train: usize) -> Result<Self> {
        let (steps, chosen) = select_dfl(&pool.scores, alphas, kappa)?;
        let mut pareto = Vec::new();
        for (i, s) in pool.scores.iter().enumerate() {
            if steps.iter().any(|st| st.admits(s, kappa)) {
                pareto.push(i);
            }
        }
        let per_alpha = steps
            .iter()
            .map(|st| AlphaRow {
                step: *st,
                policy: pool.policies[st.index].clone(),
            })
            .collect();
        let idx = steps[chosen].index;
        let out = Self {
            policy: pool.policies[idx].clone(),
            scores: pool.scores[idx],
            chosen_alpha_index: chosen,
            kappa,
            per_alpha,
            pareto_pool: pareto,
            diagnostics: Diagnostics {
                initial_pool_size: pool.initial_size,
                final_pool_size: pool.policies.len(),
                refine_evaluations: pool.refine_evaluations,
                n_train,
            },
            pool: Some(pool),
        };
        debug_assert!(out.verify().is_none_or(|c| c.holds()));
        Ok(out)
    }

    pub fn alphas(&self) -> Vec<f64> {
        self.per_alpha.iter().map(|r| r.step.alpha).collect()
    }

    /// Re-checks the slack and argmax properties against the pool; `None`
    /// when the pool was not retained.
    pub fn verify(&self) -> Option<InvariantCheck> {
        let pool = self.pool.as_ref()?;
        let mut slack = true;
        for row in &self.per_alpha {
            let st = row.step;
            let m_star = min_over(&pool.scores, |s| tchebyshev_m(st.alpha, s.delta1, s.delta2));
            let d_star = pool
                .scores
                .iter()
                .filter(|s| tchebyshev_m(st.alpha, s.delta1, s.delta2) <= m_star + self.kappa)
                .map(|s| s.delta1 + s.delta2)
                .fold(f64::INFINITY, f64::min);
            let s = &pool.scores[st.index];
            slack &= tchebyshev_m(st.alpha, s.delta1, s.delta2) <= m_star + self.kappa
                && s.delta1 + s.delta2 <= d_star + self.kappa;
        }
        let best = self
            .per_alpha
            .iter()
            .map(|r| r.step.value_star)
            .fold(f64::NEG_INFINITY, f64::max);
        Some(InvariantCheck {
            slack,
            argmax: self.scores.value == best,
        })
    }

    /// Selection on the frozen pool at a different slack.
    pub fn reselect(&self, kappa: f64) -> Result<Scores> {
        let pool = self
            .pool
            .as_ref()
            .ok_or_else(|| Error::Config("fit result carries no pool".into()))?;
        let (steps, chosen) = select_dfl(&pool.scores, &self.alphas(), kappa)?;
        Ok(pool.scores[steps[chosen].index])
    }
}

/// Runs the estimator on a freshly sampled linear pool.
pub fn dfl_fit(data: &Dataset, models: Models, config: &DFLConfig) -> Result<FitResult> {
    config.validate()?;
    let ev = evaluator(data, models, config.metric)?;
    let pool = build_pool(data, &ev, &config.class_spec, config.seed)?;
    dfl_on_pool(data, &ev, pool, config)
}

/// Runs the estimator starting from a caller-supplied pool.
pub fn dfl_fit_with_pool(data: &Dataset, models: Models, config: &DFLConfig, pool: Vec<Policy>) -> Result<FitResult> {
    config.validate()?;
    check_pool(data, &pool)?;
    let ev = evaluator(data, models, config.metric)?;
    let pool = Pool::score(&ev, pool);
    dfl_on_pool(data, &ev, pool, config)
}

fn dfl_on_pool(data: &Dataset, ev: &PolicyEvaluator, mut pool: Pool, config: &DFLConfig) -> Result<FitResult> {
    let alphas = alpha_grid(config.k);
    let kappa = config.kappa(data.len());
    let refiner = Refiner {
        ev,
        data,
        spec: &config.class_spec,
    };
    if refiner.enabled() {
        let found: Vec<Vec<Candidate>> = alphas
            .par_iter()
            .map(|&a| refine_alpha(&refiner, &pool, a, kappa))
            .collect();
        pool.extend(found.into_iter().flatten().collect());
    }
    FitResult::assemble(pool, &alphas, kappa, data.len())
}

// ── Baselines ───────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "DFL")]
    Dfl,
    #[serde(rename = "Optimal")]
    Optimal,
    #[serde(rename = "VB1")]
    Vb1,
    #[serde(rename = "VB2")]
    Vb2,
    #[serde(rename = "ADVB")]
    Advb,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Dfl, Method::Optimal, Method::Vb1, Method::Vb2, Method::Advb];

    pub fn name(self) -> &'static str {
        match self {
            Method::Dfl => "DFL",
            Method::Optimal => "Optimal",
            Method::Vb1 => "VB1",
            Method::Vb2 => "VB2",
            Method::Advb => "ADVB",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown method `{s}`")))
    }
}

/// A baseline's chosen rule with its training-sample scores.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BaselineFit {
    pub method: Method,
    pub policy: Policy,
    pub scores: Option<Scores>,
    pub kappa: Option<f64>,
    pub pool_size: usize,
}

/// Precomputed `r(S_i, X_i, 1) - r(S_i, X_i, 0)`.
struct GainEvaluator<'a> {
    data: &'a Dataset,
    effect: Vec<f64>,
}

impl<'a> GainEvaluator<'a> {
    fn new(data: &'a Dataset, model: &dyn OutcomeFn) -> Result<Self> {
        model.check_compatible(data)?;
        if model.channel() != Channel::Primary {
            return Err(Error::Config("the value objective needs a primary outcome model".into()));
        }
        let effect = (0..data.len())
            .map(|i| {
                let (s, x) = (data.sensitive()[i], data.x(i));
                model.mean(s, x, 1) - model.mean(s, x, 0)
            })
            .collect();
        Ok(Self { data, effect })
    }

    fn gain(&self, p: &Policy) -> f64 {
        let d = self.data;
        self.effect
            .iter()
            .enumerate()
            .map(|(i, e)| e * p.prob_unchecked(d.sensitive()[i], d.x(i)))
            .sum::<f64>()
            / d.len() as f64
    }
}

/// Maximises the mean estimated treatment gain
/// `(1/n) sum [r(S_i, X_i, 1) - r(S_i, X_i, 0)] pi(1 | S_i, X_i)`.
pub fn fit_optimal(data: &Dataset, model: &dyn OutcomeFn, spec: &PolicyClassSpec, seed: u64) -> Result<BaselineFit> {
    let pool = sample_pool(spec, data.dim(), Some(data), seed)?;
    fit_optimal_with_pool(data, model, spec, pool)
}

pub fn fit_optimal_with_pool(
    data: &Dataset,
    model: &dyn OutcomeFn,
    spec: &PolicyClassSpec,
    mut pool: Vec<Policy>,
) -> Result<BaselineFit> {
    check_pool(data, &pool)?;
    let ge = GainEvaluator::new(data, model)?;
    let gains: Vec<f64> = pool.par_iter().map(|p| ge.gain(p)).collect();
    let mut best = 0;
    for (i, g) in gains.iter().enumerate() {
        if *g > gains[best] {
            best = i;
        }
    }
    if spec.refine_budget > 0 {
        let out = local_refine(
            &pool[best],
            |p| {
                if spec.within_budget(p, data) {
                    -ge.gain(p)
                } else {
                    f64::INFINITY
                }
            },
            |_| true,
            spec.refine_budget,
        );
        if ge.gain(&out.policy) > gains[best] {
            pool.push(out.policy);
            best = pool.len() - 1;
        }
    }
    let size = pool.len();
    Ok(BaselineFit {
        method: Method::Optimal,
        policy: pool.swap_remove(best),
        scores: None,
        kappa: None,
        pool_size: size,
    })
}

/// Two-step single-metric baseline: minimise the chosen metric, then
/// maximise value within `kappa` of that minimum.
pub fn fit_single_fair(data: &Dataset, models: Models, config: &DFLConfig, which: SingleTarget) -> Result<BaselineFit> {
    config.validate()?;
    let ev = evaluator(data, models, config.metric)?;
    let pool = build_pool(data, &ev, &config.class_spec, config.seed)?;
    single_on_pool(data, &ev, pool, config, which)
}

pub fn fit_single_fair_with_pool(
    data: &Dataset,
    models: Models,
    config: &DFLConfig,
    which: SingleTarget,
    pool: Vec<Policy>,
) -> Result<BaselineFit> {
    config.validate()?;
    check_pool(data, &pool)?;
    let ev = evaluator(data, models, config.metric)?;
    let pool = Pool::score(&ev, pool);
    single_on_pool(data, &ev, pool, config, which)
}

fn single_on_pool(
    data: &Dataset,
    ev: &PolicyEvaluator,
    mut pool: Pool,
    config: &DFLConfig,
    which: SingleTarget,
) -> Result<BaselineFit> {
    let kappa = config.kappa(data.len());
    let r = Refiner {
        ev,
        data,
        spec: &config.class_spec,
    };
    if r.enabled() {
        let metric = move |s: &Scores| which.metric(s);
        let mut found = Vec::new();
        let (start, _) = r.best_start(&pool, &found, metric, |_| true).expect("nonempty pool");
        found.push(r.run(start, metric, |_| true));
        let (_, best) = r.best_start(&pool, &found, metric, |_| true).expect("nonempty pool");
        let feas = move |s: &Scores| metric(s) <= best + kappa;
        let neg_v = |s: &Scores| -s.value;
        let (start, _) = r.best_start(&pool, &found, neg_v, feas).expect("minimiser is feasible");
        found.push(r.run(start, neg_v, feas));
        pool.extend(found);
    }
    let idx = select_single(&pool.scores, which, kappa)?;
    Ok(BaselineFit {
        method: match which {
            SingleTarget::Action => Method::Vb1,
            SingleTarget::Outcome => Method::Vb2,
        },
        policy: pool.policies[idx].clone(),
        scores: Some(pool.scores[idx]),
        kappa: Some(kappa),
        pool_size: pool.policies.len(),
    })
}

/// Value maximiser over the union of linear-scalarization near-minimisers.
pub fn fit_advb(data: &Dataset, models: Models, config: &DFLConfig) -> Result<BaselineFit> {
    config.validate()?;
    let ev = evaluator(data, models, config.metric)?;
    let pool = build_pool(data, &ev, &config.class_spec, config.seed)?;
    advb_on_pool(data, &ev, pool, config)
}

pub fn fit_advb_with_pool(data: &Dataset, models: Models, config: &DFLConfig, pool: Vec<Policy>) -> Result<BaselineFit> {
    config.validate()?;
    check_pool(data, &pool)?;
    let ev = evaluator(data, models, config.metric)?;
    let pool = Pool::score(&ev, pool);
    advb_on_pool(data, &ev, pool, config)
}

fn advb_on_pool(data: &Dataset, ev: &PolicyEvaluator, mut pool: Pool, config: &DFLConfig) -> Result<BaselineFit> {
    let alphas = alpha_grid(config.k);
    let kappa = config.kappa(data.len());
    let r = Refiner {
        ev,
        data,
        spec: &config.class_spec,
    };
    if r.enabled() {
        let found: Vec<Candidate> = alphas
            .par_iter()
            .map(|&a| {
                let l = move |s: &Scores| linear_scalarization(a, s.delta1, s.delta2);
                let (start, _) = r.best_start(&pool, &[], l, |_| true).expect("nonempty pool");
                r.run(start, l, |_| true)
            })
            .collect();
        pool.extend(found);
        let mins: Vec<f64> = alphas
            .iter()
            .map(|&a| min_over(&pool.scores, |s| linear_scalarization(a, s.delta1, s.delta2)))
            .collect();
        let feas = |s: &Scores| in_linear_union(s, &alphas, &mins, kappa);
        let neg_v = |s: &Scores| -s.value;
        let (start, _) = r.best_start(&pool, &[], neg_v, feas).expect("minimisers are feasible");
        let c = r.run(start, neg_v, feas);
        pool.extend(vec![c]);
    }
    let idx = select_advb(&pool.scores, &alphas, kappa)?;
    Ok(BaselineFit {
        method: Method::Advb,
        policy: pool.policies[idx].clone(),
        scores: Some(pool.scores[idx]),
        kappa: Some(kappa),
        pool_size: pool.policies.len(),
    })
}
