//! Action- and outcome-fairness metrics, the regression value estimate, and
//! exact population metrics on finite environments.
//!
//! Every metric averages a per-record gap `g(u - v)` where `g` is the square
//! (default) or the absolute value:
//!
//! * equal opportunity compares the rule at `(1, X_i)` and `(0, X_i)`;
//! * counterfactual compares `(S_i, X_i)` with `(1 - S_i, X'_i)`, where
//!   `X'_i` is the shifted covariate vector.
//!
//! The action metric gaps the treatment probabilities, the outcome metric
//! gaps the policy-induced mean fairness outcome
//! `f^pi(s, x) = sum_a pi(a | s, x) f(s, x, a)`.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, DiscreteEnv};
use crate::error::{Error, Result};
use crate::nuisance::{Channel, OutcomeFn, ShiftModel};
use crate::policy::{Policy, TabularPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Notion {
    #[default]
    EqualOpportunity,
    Counterfactual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    #[default]
    Squared,
    Absolute,
}

impl Variant {
    #[inline]
    pub fn gap(self, d: f64) -> f64 {
        match self {
            Variant::Squared => d * d,
            Variant::Absolute => d.abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MetricConfig {
    pub notion: Notion,
    pub variant: Variant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub delta1: f64,
    pub delta2: f64,
    pub value: f64,
    pub notion: Notion,
    pub variant: Variant,
}

fn require_channel(model: &dyn OutcomeFn, want: Channel) -> Result<()> {
    if model.channel() != want {
        return Err(Error::Config(format!(
            "expected a {want:?} outcome model, got {:?}",
            model.channel()
        )));
    }
    Ok(())
}

fn f_pi(policy: &Policy, model: &dyn OutcomeFn, s: u8, x: &[f64]) -> f64 {
    let p = policy.prob_unchecked(s, x);
    (1.0 - p) * model.mean(s, x, 0) + p * model.mean(s, x, 1)
}

fn mean_over<F: FnMut(usize) -> f64>(n: usize, f: F) -> f64 {
    (0..n).map(f).sum::<f64>() / n as f64
}

fn check_shift(shift: &ShiftModel, data: &Dataset) -> Result<()> {
    if shift.dim() != data.dim() {
        return Err(Error::Dimension {
            expected: shift.dim(),
            got: data.dim(),
        });
    }
    Ok(())
}

/// Equal-opportunity action metric `(1/n) sum g(pi(1, X_i) - pi(0, X_i))`.
pub fn delta1_eo(policy: &Policy, data: &Dataset, variant: Variant) -> Result<f64> {
    policy.check_compatible(data)?;
    Ok(mean_over(data.len(), |i| {
        let x = data.x(i);
        variant.gap(policy.prob_unchecked(1, x) - policy.prob_unchecked(0, x))
    }))
}

/// Equal-opportunity outcome metric `(1/n) sum g(f^pi(1, X_i) - f^pi(0, X_i))`.
pub fn delta2_eo(policy: &Policy, data: &Dataset, model: &dyn OutcomeFn, variant: Variant) -> Result<f64> {
    policy.check_compatible(data)?;
    model.check_compatible(data)?;
    require_channel(model, Channel::Fairness)?;
    Ok(mean_over(data.len(), |i| {
        let x = data.x(i);
        variant.gap(f_pi(policy, model, 1, x) - f_pi(policy, model, 0, x))
    }))
}

/// Counterfactual action metric `(1/n) sum g(pi(S_i, X_i) - pi(S'_i, X'_i))`.
pub fn delta1_cf(policy: &Policy, data: &Dataset, shift: &ShiftModel, variant: Variant) -> Result<f64> {
    policy.check_compatible(data)?;
    check_shift(shift, data)?;
    let mut xcf = Vec::with_capacity(data.dim());
    Ok(mean_over(data.len(), |i| {
        let s = data.sensitive()[i];
        let x = data.x(i);
        shift.counterfactual_into(s, x, 1 - s, &mut xcf);
        variant.gap(policy.prob_unchecked(s, x) - policy.prob_unchecked(1 - s, &xcf))
    }))
}

/// Counterfactual outcome metric `(1/n) sum g(f^pi(S_i, X_i) - f^pi(S'_i, X'_i))`.
pub fn delta2_cf(
    policy: &Policy,
    data: &Dataset,
    model: &dyn OutcomeFn,
    shift: &ShiftModel,
    variant: Variant,
) -> Result<f64> {
    policy.check_compatible(data)?;
    model.check_compatible(data)?;
    require_channel(model, Channel::Fairness)?;
    check_shift(shift, data)?;
    let mut xcf = Vec::with_capacity(data.dim());
    Ok(mean_over(data.len(), |i| {
        let s = data.sensitive()[i];
        let x = data.x(i);
        shift.counterfactual_into(s, x, 1 - s, &mut xcf);
        variant.gap(f_pi(policy, model, s, x) - f_pi(policy, model, 1 - s, &xcf))
    }))
}

/// Regression value estimate `(1/n) sum_i sum_a r(S_i, X_i, a) pi(a | S_i, X_i)`.
pub fn value_hat(policy: &Policy, data: &Dataset, model: &dyn OutcomeFn) -> Result<f64> {
    policy.check_compatible(data)?;
    model.check_compatible(data)?;
    require_channel(model, Channel::Primary)?;
    Ok(mean_over(data.len(), |i| {
        let s = data.sensitive()[i];
        let x = data.x(i);
        let p = policy.prob_unchecked(s, x);
        (1.0 - p) * model.mean(s, x, 0) + p * model.mean(s, x, 1)
    }))
}

/// All three metrics under one configuration.
pub fn evaluate(
    policy: &Policy,
    data: &Dataset,
    primary: &dyn OutcomeFn,
    fairness: &dyn OutcomeFn,
    shift: Option<&ShiftModel>,
    config: MetricConfig,
) -> Result<MetricReport> {
    let (delta1, delta2) = match config.notion {
        Notion::EqualOpportunity => (
            delta1_eo(policy, data, config.variant)?,
            delta2_eo(policy, data, fairness, config.variant)?,
        ),
        Notion::Counterfactual => {
            let shift = shift.ok_or_else(|| Error::Config("counterfactual metrics need a shift model".into()))?;
            (
                delta1_cf(policy, data, shift, config.variant)?,
                delta2_cf(policy, data, fairness, shift, config.variant)?,
            )
        }
    };
    Ok(MetricReport {
        delta1,
        delta2,
        value: value_hat(policy, data, primary)?,
        notion: config.notion,
        variant: config.variant,
    })
}

/// Population metrics (equal-opportunity notion) by exact summation over the
/// environment's support.
pub fn exact_metrics(policy: &TabularPolicy, env: &DiscreteEnv, variant: Variant) -> Result<MetricReport> {
    if policy.n_actions() != env.n_actions {
        return Err(Error::SupportMismatch(format!(
            "policy has {} actions, environment has {}",
            policy.n_actions(),
            env.n_actions
        )));
    }
    let m = env.n_support();
    if policy.support().len() != m {
        return Err(Error::SupportMismatch(format!(
            "policy covers {} points, environment {m}",
            policy.support().len()
        )));
    }
    let mut idx = Vec::with_capacity(m);
    for x in &env.x_support {
        idx.push(
            policy
                .index_of(x)
                .ok_or_else(|| Error::SupportMismatch(format!("{x:?} missing from policy support")))?,
        );
    }
    let px = env.marginal_x_probs();
    let mut delta1 = 0.0;
    let mut delta2 = 0.0;
    let mut value = 0.0;
    for j in 0..m {
        let p1 = policy.distribution(1, idx[j]);
        let p0 = policy.distribution(0, idx[j]);
        // Half the summed per-action gaps; for two actions this is g(pi(1|1,x) - pi(1|0,x)).
        let action_gap: f64 = 0.5 * p1.iter().zip(p0).map(|(a, b)| variant.gap(a - b)).sum::<f64>();
        let outcome = |s: u8, p: &[f64]| (0..env.n_actions).map(|a| p[a] * env.f(s, j, a)).sum::<f64>();
        delta1 += px[j] * action_gap;
        delta2 += px[j] * variant.gap(outcome(1, p1) - outcome(0, p0));
        for s in 0..2u8 {
            let p = policy.distribution(s, idx[j]);
            let r: f64 = (0..env.n_actions).map(|a| p[a] * env.r(s, j, a)).sum();
            value += env.s_weight(s) * env.x_probs[s as usize][j] * r;
        }
    }
    Ok(MetricReport {
        delta1,
        delta2,
        value,
        notion: Notion::EqualOpportunity,
        variant,
    })
}

// ── Cached evaluation over many candidate policies ──────────────────────

/// Action metric, outcome metric and value of one policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub delta1: f64,
    pub delta2: f64,
    pub value: f64,
}

/// Precomputes every nuisance prediction a metric needs on a fixed dataset,
/// so that scoring a policy costs two policy evaluations per record.
///
/// For record `i` the "left" point is `(1, X_i)` (equal opportunity) or
/// `(S_i, X_i)` (counterfactual); the "right" point is `(0, X_i)` or
/// `(1 - S_i, X'_i)`.
#[derive(Debug, Clone)]
pub struct PolicyEvaluator {
    config: MetricConfig,
    dim: usize,
    left_s: Vec<u8>,
    left_x: Vec<f64>,
    right_s: Vec<u8>,
    right_x: Vec<f64>,
    f_left: [Vec<f64>; 2],
    f_right: [Vec<f64>; 2],
    r_obs: [Vec<f64>; 2],
    /// Whether the observed point `(S_i, X_i)` is the left one.
    obs_is_left: Vec<bool>,
}

impl PolicyEvaluator {
    pub fn new(
        data: &Dataset,
        primary: &dyn OutcomeFn,
        fairness: &dyn OutcomeFn,
        shift: Option<&ShiftModel>,
        config: MetricConfig,
    ) -> Result<Self> {
        primary.check_compatible(data)?;
        fairness.check_compatible(data)?;
        require_channel(primary, Channel::Primary)?;
        require_channel(fairness, Channel::Fairness)?;
        let n = data.len();
        let d = data.dim();
        let mut ev = Self {
            config,
            dim: d,
            left_s: Vec::with_capacity(n),
            left_x: Vec::with_capacity(n * d),
            right_s: Vec::with_capacity(n),
            right_x: Vec::with_capacity(n * d),
            f_left: [Vec::with_capacity(n), Vec::with_capacity(n)],
            f_right: [Vec::with_capacity(n), Vec::with_capacity(n)],
            r_obs: [Vec::with_capacity(n), Vec::with_capacity(n)],
            obs_is_left: Vec::with_capacity(n),
        };
        if config.notion == Notion::Counterfactual {
            let shift = shift.ok_or_else(|| Error::Config("counterfactual metrics need a shift model".into()))?;
            check_shift(shift, data)?;
        }
        let mut xcf = Vec::with_capacity(d);
        for i in 0..n {
            let s = data.sensitive()[i];
            let x = data.x(i);
            let (ls, rs) = match config.notion {
                Notion::EqualOpportunity => {
                    xcf.clear();
                    xcf.extend_from_slice(x);
                    (1, 0)
                }
                Notion::Counterfactual => {
                    shift
                        .expect("checked above")
                        .counterfactual_into(s, x, 1 - s, &mut xcf);
                    (s, 1 - s)
                }
            };
            ev.left_s.push(ls);
            ev.left_x.extend_from_slice(x);
            ev.right_s.push(rs);
            ev.right_x.extend_from_slice(&xcf);
            for a in 0..2u8 {
                ev.f_left[a as usize].push(fairness.mean(ls, x, a));
                ev.f_right[a as usize].push(fairness.mean(rs, &xcf, a));
                ev.r_obs[a as usize].push(primary.mean(s, x, a));
            }
            ev.obs_is_left.push(ls == s);
        }
        Ok(ev)
    }

    pub fn len(&self) -> usize {
        self.left_s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.left_s.is_empty()
    }

    pub fn config(&self) -> MetricConfig {
        self.config
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn scores(&self, policy: &Policy) -> Scores {
        let n = self.len();
        let d = self.dim;
        let g = self.config.variant;
        let (mut d1, mut d2, mut v) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let pl = policy.prob_unchecked(self.left_s[i], &self.left_x[i * d..(i + 1) * d]);
            let pr = policy.prob_unchecked(self.right_s[i], &self.right_x[i * d..(i + 1) * d]);
            d1 += g.gap(pl - pr);
            let fl = (1.0 - pl) * self.f_left[0][i] + pl * self.f_left[1][i];
            let fr = (1.0 - pr) * self.f_right[0][i] + pr * self.f_right[1][i];
            d2 += g.gap(fl - fr);
            let po = if self.obs_is_left[i] { pl } else { pr };
            v += (1.0 - po) * self.r_obs[0][i] + po * self.r_obs[1][i];
        }
        let nf = n as f64;
        Scores {
            delta1: d1 / nf,
            delta2: d2 / nf,
            value: v / nf,
        }
    }

    /// Mean of `[r(S_i, X_i, 1) - r(S_i, X_i, 0)] pi(1 | S_i, X_i)`.
    pub fn treatment_gain(&self, policy: &Policy) -> f64 {
        let d = self.dim;
        let mut acc = 0.0;
        for i in 0..self.len() {
            let (s, x) = if self.obs_is_left[i] {
                (self.left_s[i], &self.left_x[i * d..(i + 1) * d])
            } else {
                (self.right_s[i], &self.right_x[i * d..(i + 1) * d])
            };
            acc += (self.r_obs[1][i] - self.r_obs[0][i]) * policy.prob_unchecked(s, x);
        }
        acc / self.len() as f64
    }

    pub fn report(&self, policy: &Policy) -> MetricReport {
        let s = self.scores(policy);
        MetricReport {
            delta1: s.delta1,
            delta2: s.delta2,
            value: s.value,
            notion: self.config.notion,
            variant: self.config.variant,
        }
    }
}

/// The three rules `1(X > 0)`, `1(S + X > 0)` and `1(S > 0)` as tables over
/// the support `{0, 1}`.
pub fn b2_policies() -> [TabularPolicy; 3] {
    let support = vec![vec![0.0], vec![1.0]];
    let make = |t0: [f64; 2], t1: [f64; 2]| {
        TabularPolicy::from_treat_probs(support.clone(), [t0.to_vec(), t1.to_vec()]).expect("valid table")
    };
    [
        make([0.0, 1.0], [0.0, 1.0]),
        make([0.0, 1.0], [1.0, 1.0]),
        make([0.0, 0.0], [1.0, 1.0]),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_b2_env, simulate_records};
    use crate::nuisance::{fit_outcome, fit_shift, CellMeans, Family, OutcomeModel};
    use crate::rng;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    /// 20 records reproducing the B.2 population weights exactly.
    fn b2_population() -> Dataset {
        let mut s = Vec::new();
        let mut xs = Vec::new();
        for si in 0..2u8 {
            for k in 0..10 {
                s.push(si);
                xs.push(vec![if k < 4 { 0.0 } else { 1.0 }]);
            }
        }
        Dataset::new(s, xs, vec![0; 20], vec![0.0; 20], None).unwrap()
    }

    fn b2_models() -> (CellMeans, CellMeans) {
        let env = make_b2_env();
        (
            CellMeans::new(&env, Channel::Primary).unwrap(),
            CellMeans::new(&env, Channel::Fairness).unwrap(),
        )
    }

    #[test]
    fn b2_action_metrics() {
        let data = b2_population();
        let [p1, p2, p3] = b2_policies().map(Policy::Tabular);
        assert_eq!(delta1_eo(&p1, &data, Variant::Squared).unwrap(), 0.0);
        assert_abs_diff_eq!(delta1_eo(&p2, &data, Variant::Squared).unwrap(), 0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(delta1_eo(&p3, &data, Variant::Squared).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn b2_outcome_metric_and_value() {
        let data = b2_population();
        let (r, f) = b2_models();
        let [p1, _, _] = b2_policies().map(Policy::Tabular);
        assert_abs_diff_eq!(delta2_eo(&p1, &data, &f, Variant::Squared).unwrap(), 0.55, epsilon = 1e-12);
        assert_abs_diff_eq!(delta2_eo(&p1, &data, &f, Variant::Absolute).unwrap(), 0.7, epsilon = 1e-12);
        assert_abs_diff_eq!(value_hat(&p1, &data, &r).unwrap(), 1.19, epsilon = 1e-12);
    }

    #[test]
    fn b2_exact_metrics() {
        let env = make_b2_env();
        let [p1, p2, p3] = b2_policies();
        let m1 = exact_metrics(&p1, &env, Variant::Absolute).unwrap();
        assert_eq!(m1.delta1, 0.0);
        assert_abs_diff_eq!(m1.delta2, 0.7, epsilon = 1e-12);
        assert_abs_diff_eq!(m1.value, 1.19, epsilon = 1e-12);
        let m2 = exact_metrics(&p2, &env, Variant::Absolute).unwrap();
        assert_abs_diff_eq!(m2.delta1, 0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(m2.delta2, 0.66, epsilon = 1e-12);
        assert_abs_diff_eq!(m2.value, 1.17, epsilon = 1e-12);
        let m3 = exact_metrics(&p3, &env, Variant::Squared).unwrap();
        assert_abs_diff_eq!(m3.delta1, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m3.delta2, 0.81, epsilon = 1e-12);
    }

    #[test]
    fn exact_metrics_support_mismatch() {
        let env = make_b2_env();
        let other = TabularPolicy::from_treat_probs(vec![vec![0.0], vec![2.0]], [vec![0.0, 1.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(
            exact_metrics(&other, &env, Variant::Squared),
            Err(Error::SupportMismatch(_))
        ));
    }

    #[test]
    fn blind_policy_has_zero_eo_action_metric() {
        let data = simulate_records(300, &mut rng::stream(8, 0));
        let p = Policy::linear(vec![0.2, 0.0, -0.7, 1.1], 0.0, false).unwrap();
        assert_eq!(delta1_eo(&p, &data, Variant::Squared).unwrap(), 0.0);
        let f = OutcomeModel::from_coefficients(
            Family::LinearGaussian,
            Channel::Fairness,
            vec![0.3, 0.0, 1.0, -1.0, 0.5, 0.0, 0.2, 0.1],
        )
        .unwrap();
        assert_eq!(delta2_eo(&p, &data, &f, Variant::Squared).unwrap(), 0.0);
    }

    #[test]
    fn cf_metrics_vanish_without_shift() {
        let data = simulate_records(200, &mut rng::stream(9, 0));
        let zero = ShiftModel::oracle(vec![0.1, 0.2], vec![0.1, 0.2]).unwrap();
        let p = Policy::linear(vec![0.2, 0.0, -0.7, 1.1], 0.0, false).unwrap();
        assert_eq!(delta1_cf(&p, &data, &zero, Variant::Squared).unwrap(), 0.0);
        let half = Policy::constant(2, 0.5);
        let shift = fit_shift(&data).unwrap();
        assert_eq!(delta1_cf(&half, &data, &shift, Variant::Squared).unwrap(), 0.0);
        let f = OutcomeModel::from_coefficients(
            Family::LinearGaussian,
            Channel::Fairness,
            vec![0.3, 0.0, 1.0, -1.0, 0.5, 0.0, 0.2, 0.1],
        )
        .unwrap();
        assert_eq!(delta2_cf(&p, &data, &f, &zero, Variant::Squared).unwrap(), 0.0);
        let flat = OutcomeModel::from_coefficients(Family::LinearGaussian, Channel::Fairness, {
            let mut c = vec![0.0; 8];
            c[0] = 4.0;
            c
        })
        .unwrap();
        assert_eq!(delta2_cf(&p, &data, &flat, &shift, Variant::Squared).unwrap(), 0.0);
    }

    #[test]
    fn cf_action_metric_counts_flips() {
        // Rule 1(x1 > 0.5); group 1 sits at x1 in (0.5, 1) and is shifted by
        // -10 in the counterfactual world, so each group-1 record flips. The
        // group-0 records move by +10: the one at x1 = 0.2 flips, the one at
        // x1 = 0.9 stays treated. Three of four records flip.
        let data = Dataset::new(
            vec![1, 1, 0, 0],
            vec![vec![0.6, 0.0], vec![0.9, 0.0], vec![0.2, 0.0], vec![0.9, 0.0]],
            vec![0; 4],
            vec![0.0; 4],
            None,
        )
        .unwrap();
        let shift = ShiftModel::oracle(vec![0.0, 0.0], vec![10.0, 0.0]).unwrap();
        let p = Policy::linear(vec![-0.5, 0.0, 1.0, 0.0], 0.0, false).unwrap();
        assert_abs_diff_eq!(delta1_cf(&p, &data, &shift, Variant::Squared).unwrap(), 0.75, epsilon = 1e-15);
    }

    #[test]
    fn cf_outcome_metric_two_records() {
        // f(s, x, a) = 1 + 2s + x1 + a (x2 - 0.5 s); d = 2.
        let f = OutcomeModel::from_coefficients(
            Family::LinearGaussian,
            Channel::Fairness,
            vec![1.0, 2.0, 1.0, 0.0, 0.0, -0.5, 0.0, 1.0],
        )
        .unwrap();
        let shift = ShiftModel::oracle(vec![0.0, 0.0], vec![1.0, 2.0]).unwrap();
        let data = Dataset::new(
            vec![0, 1],
            vec![vec![0.5, 1.0], vec![2.0, 3.0]],
            vec![0; 2],
            vec![0.0; 2],
            None,
        )
        .unwrap();
        let p = Policy::constant(2, 1.0);
        // Record 1: s=0, x=(0.5,1) -> f = 1 + 0.5 + 1 = 2.5;
        //   counterfactual s=1, x'=(1.5,3) -> f = 1 + 2 + 1.5 + (3 - 0.5) = 7.0; gap -4.5.
        // Record 2: s=1, x=(2,3) -> f = 1 + 2 + 2 + 2.5 = 7.5;
        //   counterfactual s=0, x'=(1,1) -> f = 1 + 1 + 1 = 3.0; gap 4.5.
        let expected = (4.5f64.powi(2) + 4.5f64.powi(2)) / 2.0;
        assert_abs_diff_eq!(delta2_cf(&p, &data, &f, &shift, Variant::Squared).unwrap(), expected, epsilon = 1e-12);
        assert_abs_diff_eq!(delta2_cf(&p, &data, &f, &shift, Variant::Absolute).unwrap(), 4.5, epsilon = 1e-12);
    }

    #[test]
    fn value_examples() {
        let data = simulate_records(100, &mut rng::stream(10, 0));
        let mut c = vec![0.0; 8];
        c[0] = 3.25;
        let flat = OutcomeModel::from_coefficients(Family::LinearGaussian, Channel::Primary, c).unwrap();
        let p = Policy::linear(vec![0.1, 0.5, -0.3, 0.2], 0.7, true).unwrap();
        assert_abs_diff_eq!(value_hat(&p, &data, &flat).unwrap(), 3.25, epsilon = 1e-12);

        let fitted = fit_outcome(&data, Family::LinearGaussian, Channel::Primary).unwrap();
        let all = Policy::constant(2, 1.0);
        let expect = (0..data.len())
            .map(|i| fitted.mean(data.sensitive()[i], data.x(i), 1))
            .sum::<f64>()
            / data.len() as f64;
        assert_abs_diff_eq!(value_hat(&all, &data, &fitted).unwrap(), expect, epsilon = 1e-12);
    }

    #[test]
    fn wrong_channel_rejected() {
        let data = b2_population();
        let (r, _) = b2_models();
        let p = Policy::Tabular(b2_policies()[0].clone());
        assert!(delta2_eo(&p, &data, &r, Variant::Squared).is_err());
    }

    #[test]
    fn empirical_converges_to_exact() {
        let env = make_b2_env();
        let data = env.sample(100_000, 1.0, &mut rng::stream(12, 0)).unwrap();
        let (r, f) = b2_models();
        for t in b2_policies() {
            let exact = exact_metrics(&t, &env, Variant::Squared).unwrap();
            let p = Policy::Tabular(t);
            let emp = evaluate(&p, &data, &r, &f, None, MetricConfig::default()).unwrap();
            assert!((emp.delta1 - exact.delta1).abs() < 0.02);
            assert!((emp.delta2 - exact.delta2).abs() < 0.02);
            assert!((emp.value - exact.value).abs() < 0.02);
        }
    }

    fn random_model(coef: Vec<f64>, channel: Channel) -> OutcomeModel {
        OutcomeModel::from_coefficients(Family::LinearGaussian, channel, coef).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn evaluator_matches_reference(
            beta in proptest::collection::vec(-2.0f64..2.0, 4),
            tau in prop_oneof![Just(0.0), 0.1f64..2.0],
            coef in proptest::collection::vec(-2.0f64..2.0, 8),
            seed in 0u64..1000,
            cf in any::<bool>(),
            abs in any::<bool>(),
        ) {
            let data = simulate_records(60, &mut rng::stream(seed, 0));
            let f = random_model(coef.clone(), Channel::Fairness);
            let r = random_model(coef, Channel::Primary);
            let shift = fit_shift(&data).ok();
            prop_assume!(shift.is_some());
            let config = MetricConfig {
                notion: if cf { Notion::Counterfactual } else { Notion::EqualOpportunity },
                variant: if abs { Variant::Absolute } else { Variant::Squared },
            };
            let p = Policy::linear(beta, tau, true).unwrap();
            let reference = evaluate(&p, &data, &r, &f, shift.as_ref(), config).unwrap();
            let ev = PolicyEvaluator::new(&data, &r, &f, shift.as_ref(), config).unwrap();
            let fast = ev.scores(&p);
            prop_assert!((fast.delta1 - reference.delta1).abs() < 1e-12);
            prop_assert!((fast.delta2 - reference.delta2).abs() < 1e-12);
            prop_assert!((fast.value - reference.value).abs() < 1e-12);
            prop_assert!(fast.delta1 >= 0.0 && fast.delta2 >= 0.0);
        }

        #[test]
        fn squared_is_absolute_squared_on_one_record(
            beta in proptest::collection::vec(-2.0f64..2.0, 4),
            coef in proptest::collection::vec(-3.0f64..3.0, 8),
            x in proptest::collection::vec(-2.0f64..2.0, 2),
        ) {
            let data = Dataset::new(vec![1], vec![x], vec![0], vec![0.0], None).unwrap();
            let f = random_model(coef, Channel::Fairness);
            let p = Policy::linear(beta, 0.5, true).unwrap();
            let sq = delta2_eo(&p, &data, &f, Variant::Squared).unwrap();
            let ab = delta2_eo(&p, &data, &f, Variant::Absolute).unwrap();
            prop_assert!((sq - ab * ab).abs() <= 1e-9 * (1.0 + sq));
        }

        #[test]
        fn affine_transform_of_models(
            beta in proptest::collection::vec(-2.0f64..2.0, 4),
            coef in proptest::collection::vec(-2.0f64..2.0, 8),
            a in 0.1f64..4.0, b in -3.0f64..3.0,
        ) {
            let data = simulate_records(40, &mut rng::stream(77, 0));
            let p = Policy::linear(beta, 0.3, true).unwrap();
            let f = random_model(coef.clone(), Channel::Fairness);
            let mut scaled = coef.iter().map(|c| a * c).collect::<Vec<_>>();
            scaled[0] += b;
            let fa = random_model(scaled.clone(), Channel::Fairness);
            let d = delta2_eo(&p, &data, &f, Variant::Squared).unwrap();
            let da = delta2_eo(&p, &data, &fa, Variant::Squared).unwrap();
            prop_assert!((da - a * a * d).abs() <= 1e-9 * (1.0 + da));
            let r = random_model(coef, Channel::Primary);
            let ra = random_model(scaled, Channel::Primary);
            let v = value_hat(&p, &data, &r).unwrap();
            let va = value_hat(&p, &data, &ra).unwrap();
            prop_assert!((va - (a * v + b)).abs() <= 1e-9 * (1.0 + va.abs()));
        }
    }
}
