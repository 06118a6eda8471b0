//! Outcome regressions `r(s,x,a)`, `f(s,x,a)` and the group-mean covariate
//! shift used to build counterfactual covariates.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{expit, Dataset, DiscreteEnv};
use crate::error::{Error, Result};

const RIDGE: f64 = 1e-8;
const RANK_TOL: f64 = 1e-10;
const IRLS_MAX_ITER: usize = 100;
const IRLS_GRAD_TOL: f64 = 1e-8;
const PROB_CLIP: f64 = 1e-6;
const SEPARATION_LOGIT: f64 = 25.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    LinearGaussian,
    Logistic,
}

/// Which reward the model targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Primary,
    Fairness,
}

/// Anything that yields a conditional mean outcome at `(s, x, a)`.
pub trait OutcomeFn: Sync {
    fn channel(&self) -> Channel;

    /// Mean outcome; callers guarantee `x` matches the model's covariates.
    fn mean(&self, s: u8, x: &[f64], a: u8) -> f64;

    /// Rejects data the model cannot be evaluated on.
    fn check_compatible(&self, data: &Dataset) -> Result<()>;
}

/// Number of coefficients for the interaction feature map with `d` covariates.
pub fn n_features(d: usize) -> usize {
    2 * d + 4
}

/// Writes `[1, s, x..., a, a*s, a*x...]` into `out`.
pub fn feature_map(s: u8, x: &[f64], a: u8, out: &mut Vec<f64>) {
    let sf = f64::from(s);
    let af = f64::from(a);
    out.clear();
    out.push(1.0);
    out.push(sf);
    out.extend_from_slice(x);
    out.push(af);
    out.push(af * sf);
    out.extend(x.iter().map(|v| af * v));
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeModel {
    pub family: Family,
    pub channel: Channel,
    pub coefficients: Vec<f64>,
    /// False when IRLS stopped at the iteration cap (typically separation).
    #[serde(default = "default_true")]
    pub converged: bool,
}

fn default_true() -> bool {
    true
}

impl OutcomeModel {
    pub fn from_coefficients(family: Family, channel: Channel, coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() < 6 || !coefficients.len().is_multiple_of(2) {
            return Err(Error::Config(format!(
                "coefficient vector of length {} does not match a 2d+4 feature map",
                coefficients.len()
            )));
        }
        Ok(Self {
            family,
            channel,
            coefficients,
            converged: true,
        })
    }

    pub fn dim(&self) -> usize {
        (self.coefficients.len() - 4) / 2
    }

    pub fn score(&self, s: u8, x: &[f64], a: u8) -> f64 {
        let d = x.len();
        let c = &self.coefficients;
        let sf = f64::from(s);
        let af = f64::from(a);
        let mut z = c[0] + c[1] * sf + c[d + 2] * af + c[d + 3] * af * sf;
        for j in 0..d {
            z += (c[2 + j] + af * c[d + 4 + j]) * x[j];
        }
        z
    }

    pub fn predict(&self, s: u8, x: &[f64], a: u8) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(self.mean(s, x, a))
    }

    /// Same model relabelled for the other reward channel.
    pub fn with_channel(&self, channel: Channel) -> Self {
        Self {
            channel,
            ..self.clone()
        }
    }
}

impl OutcomeFn for OutcomeModel {
    fn channel(&self) -> Channel {
        self.channel
    }

    fn mean(&self, s: u8, x: &[f64], a: u8) -> f64 {
        let z = self.score(s, x, a);
        match self.family {
            Family::LinearGaussian => z,
            Family::Logistic => expit(z).clamp(PROB_CLIP, 1.0 - PROB_CLIP),
        }
    }

    fn check_compatible(&self, data: &Dataset) -> Result<()> {
        if data.dim() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: data.dim(),
            });
        }
        Ok(())
    }
}

fn design(data: &Dataset) -> DMatrix<f64> {
    let p = n_features(data.dim());
    let mut m = DMatrix::zeros(data.len(), p);
    let mut row = Vec::with_capacity(p);
    for i in 0..data.len() {
        feature_map(data.sensitive()[i], data.x(i), data.actions()[i], &mut row);
        for (j, v) in row.iter().enumerate() {
            m[(i, j)] = *v;
        }
    }
    m
}

fn ridge_solve(x: &DMatrix<f64>, weights: Option<&DVector<f64>>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let xtw = match weights {
        Some(w) => {
            let mut t = x.transpose();
            for (j, mut col) in t.column_iter_mut().enumerate() {
                col *= w[j];
            }
            t
        }
        None => x.transpose(),
    };
    let mut gram = &xtw * x;
    for j in 0..gram.ncols() {
        gram[(j, j)] += RIDGE;
    }
    gram.cholesky()
        .map(|c| c.solve(rhs))
        .ok_or_else(|| Error::Numerical("normal equations are not positive definite".into()))
}

fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    let qr = x.clone().qr();
    let r = qr.r();
    let max_diag = r.diagonal().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let deficient = r.diagonal().iter().any(|v| v.abs() <= RANK_TOL * max_diag.max(1.0));
    if !deficient {
        let qty = qr.q().transpose() * y;
        if let Some(beta) = r.solve_upper_triangular(&qty) {
            return Ok(beta);
        }
    }
    let xty = x.transpose() * y;
    ridge_solve(x, None, &xty)
}

fn irls(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<(DVector<f64>, bool)> {
    let n = x.nrows() as f64;
    let mut beta = DVector::zeros(x.ncols());
    for _ in 0..IRLS_MAX_ITER {
        let eta = x * &beta;
        let mu = eta.map(expit);
        let grad = x.transpose() * (y - &mu);
        // Fitted probabilities pinned at 0 or 1 signal separation; keep
        // iterating so the cap reports it.
        let pinned = eta.iter().any(|v| v.abs() > SEPARATION_LOGIT);
        if grad.norm() / n < IRLS_GRAD_TOL && !pinned {
            return Ok((beta, true));
        }
        let w = mu.map(|m| (m * (1.0 - m)).max(1e-12));
        let next = match ridge_solve(x, Some(&w), &grad) {
            Ok(step) => &beta + step,
            Err(_) if pinned => return Ok((beta, false)),
            Err(e) => return Err(e),
        };
        if next.iter().any(|v| !v.is_finite()) {
            return Ok((beta, false));
        }
        beta = next;
    }
    Ok((beta, false))
}

/// Fits an outcome regression for the chosen reward channel on the
/// interaction feature map.
pub fn fit_outcome(data: &Dataset, family: Family, channel: Channel) -> Result<OutcomeModel> {
    let p = n_features(data.dim());
    if data.len() <= p {
        return Err(Error::Data(format!(
            "need more than {p} records to fit {p} coefficients, got {}",
            data.len()
        )));
    }
    let target = match channel {
        Channel::Primary => data.reward_primary(),
        Channel::Fairness => data.reward_fairness(),
    };
    let x = design(data);
    let y = DVector::from_column_slice(target);
    let (beta, converged) = match family {
        Family::LinearGaussian => (least_squares(&x, &y)?, true),
        Family::Logistic => {
            if let Some(i) = target.iter().position(|v| *v != 0.0 && *v != 1.0) {
                return Err(Error::Row {
                    row: i + 1,
                    message: format!("logistic outcome must be 0 or 1, got {}", target[i]),
                });
            }
            irls(&x, &y)?
        }
    };
    Ok(OutcomeModel {
        family,
        channel,
        coefficients: beta.iter().copied().collect(),
        converged,
    })
}

/// Exact cell means of a finite environment behind the outcome interface.
#[derive(Debug, Clone)]
pub struct CellMeans {
    env: DiscreteEnv,
    channel: Channel,
}

impl CellMeans {
    pub fn new(env: &DiscreteEnv, channel: Channel) -> Result<Self> {
        if env.n_actions != 2 {
            return Err(Error::NotBinary(env.n_actions));
        }
        Ok(Self {
            env: env.clone(),
            channel,
        })
    }

    pub fn env(&self) -> &DiscreteEnv {
        &self.env
    }
}

impl OutcomeFn for CellMeans {
    fn channel(&self) -> Channel {
        self.channel
    }

    fn mean(&self, s: u8, x: &[f64], a: u8) -> f64 {
        match self.env.index_of(x) {
            Some(j) => match self.channel {
                Channel::Primary => self.env.r(s, j, a as usize),
                Channel::Fairness => self.env.f(s, j, a as usize),
            },
            None => f64::NAN,
        }
    }

    fn check_compatible(&self, data: &Dataset) -> Result<()> {
        for i in 0..data.len() {
            if self.env.index_of(data.x(i)).is_none() {
                return Err(Error::SupportMismatch(format!(
                    "record {} covariates {:?} are off the environment support",
                    i + 1,
                    data.x(i)
                )));
            }
        }
        Ok(())
    }
}

// ── Covariate shift ─────────────────────────────────────────────────────

/// Per-group covariate means `theta(s)` under the additive-error model
/// `X = theta(S) + e`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftModel {
    pub theta: [Vec<f64>; 2],
    pub counts: [usize; 2],
}

impl ShiftModel {
    /// Shift with known group means.
    pub fn oracle(theta0: Vec<f64>, theta1: Vec<f64>) -> Result<Self> {
        if theta0.len() != theta1.len() {
            return Err(Error::Dimension {
                expected: theta0.len(),
                got: theta1.len(),
            });
        }
        Ok(Self {
            theta: [theta0, theta1],
            counts: [0, 0],
        })
    }

    pub fn dim(&self) -> usize {
        self.theta[0].len()
    }

    /// `theta(s') + x - theta(s)`.
    pub fn counterfactual_x(&self, s: u8, x: &[f64], s_prime: u8) -> Vec<f64> {
        let mut out = Vec::with_capacity(x.len());
        self.counterfactual_into(s, x, s_prime, &mut out);
        out
    }

    pub(crate) fn counterfactual_into(&self, s: u8, x: &[f64], s_prime: u8, out: &mut Vec<f64>) {
        out.clear();
        let from = &self.theta[s as usize];
        let to = &self.theta[s_prime as usize];
        if s == s_prime || from == to {
            out.extend_from_slice(x);
            return;
        }
        out.extend(x.iter().zip(from).zip(to).map(|((v, f), t)| t + (v - f)));
    }
}

pub fn fit_shift(data: &Dataset) -> Result<ShiftModel> {
    let d = data.dim();
    let mut sums = [vec![0.0; d], vec![0.0; d]];
    let mut counts = [0usize; 2];
    for i in 0..data.len() {
        let s = data.sensitive()[i] as usize;
        counts[s] += 1;
        for (acc, v) in sums[s].iter_mut().zip(data.x(i)) {
            *acc += v;
        }
    }
    for s in 0..2 {
        if counts[s] == 0 {
            return Err(Error::EmptyGroup(s as u8));
        }
        for v in &mut sums[s] {
            *v /= counts[s] as f64;
        }
    }
    Ok(ShiftModel {
        theta: sums,
        counts,
    })
}
