//! Existence theory for fair policies on finite environments.
//!
//! Everything is decided cell by cell: at each support point `x` the
//! relevant object is the 2x2 table `f[s][a] = f(s, x, a)`. A rule is
//! outcome-fair at `x` when `f^pi(0, x) = f^pi(1, x)`; it is double-fair when,
//! in addition, `pi(1, x) = pi(0, x)`.

use serde::{Deserialize, Serialize};

use crate::data::DiscreteEnv;
use crate::error::{Error, Result};
use crate::policy::TabularPolicy;
use crate::simplex;

/// Fairness-outcome table at one support point, indexed `[s][a]`.
pub type Cell = [[f64; 2]; 2];

/// The three parts of the opposite-sign condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assumption2 {
    pub i: bool,
    pub ii: bool,
    pub iii: bool,
}

impl Assumption2 {
    pub fn all(&self) -> bool {
        self.i && self.ii && self.iii
    }
}

/// Some action weakly dominates the other for both groups.
pub fn cell_assumption1(f: &Cell) -> bool {
    (0..2).any(|a| {
        let lo = f[0][a].min(f[1][a]);
        let hi = f[0][1 - a].max(f[1][1 - a]);
        lo >= hi
    })
}

pub fn cell_assumption2(f: &Cell) -> Assumption2 {
    let i = (f[1][1] - f[0][1]) * (f[1][0] - f[0][0]) <= 0.0;
    let ii = (f[1][1] - f[1][0]) * (f[0][1] - f[0][0]) <= 0.0;
    let iii = (0..2).any(|s| (0..2).any(|a| f[s][a] >= f[s][1 - a] && f[s][a] >= f[1 - s][a]));
    Assumption2 { i, ii, iii }
}

pub fn cell_outcome_fair(f: &Cell) -> bool {
    cell_assumption1(f) || cell_assumption2(f).all()
}

/// Shared treatment probability equalising the two groups' outcomes, if it
/// lies in `[0, 1]`. A cell that is flat in `s` for both actions gives 0.5.
pub fn cell_double_fair(f: &Cell) -> Option<f64> {
    if !cell_assumption2(f).i {
        return None;
    }
    let num = f[0][0] - f[1][0];
    let den = num + f[1][1] - f[0][1];
    if den == 0.0 {
        return if num == 0.0 { Some(0.5) } else { None };
    }
    let p = num / den;
    (0.0..=1.0).contains(&p).then_some(p)
}

/// All outcome-fair probability pairs at one support point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SolutionMap {
    /// `pi(1, x) = slope * pi(0, x) + intercept` for `pi(0, x)` in `interval`.
    Affine {
        slope: f64,
        intercept: f64,
        interval: Option<(f64, f64)>,
    },
    /// Group 1's outcome does not depend on the action: any `pi(1, x)` works
    /// and `pi(0, x)` must lie in `interval`.
    Flat { interval: Option<(f64, f64)> },
}

impl SolutionMap {
    pub fn interval(&self) -> Option<(f64, f64)> {
        match *self {
            SolutionMap::Affine { interval, .. } | SolutionMap::Flat { interval } => interval,
        }
    }
}

pub fn cell_solution_map(f: &Cell) -> SolutionMap {
    let den = f[1][1] - f[1][0];
    if den == 0.0 {
        let target = f[1][0];
        let rise = f[0][1] - f[0][0];
        let interval = if rise == 0.0 {
            (f[0][0] == target).then_some((0.0, 1.0))
        } else {
            let p = (target - f[0][0]) / rise;
            (0.0..=1.0).contains(&p).then_some((p, p))
        };
        return SolutionMap::Flat { interval };
    }
    let slope = (f[0][1] - f[0][0]) / den;
    let intercept = (f[0][0] - f[1][0]) / den;
    let rise = f[0][1] - f[0][0];
    let num = f[0][0] - f[1][0];
    let interval = if rise == 0.0 {
        (0.0..=1.0).contains(&intercept).then_some((0.0, 1.0))
    } else {
        // pi(0, x) values sending pi(1, x) to 0 and to 1.
        let a = -num / rise;
        let b = (den - num) / rise;
        let lo = a.min(b).max(0.0);
        let hi = a.max(b).min(1.0);
        (lo <= hi).then_some((lo, hi))
    };
    SolutionMap::Affine {
        slope,
        intercept,
        interval,
    }
}

// ── Environment-level checks ────────────────────────────────────────────

fn require_binary(env: &DiscreteEnv) -> Result<()> {
    if env.n_actions != 2 {
        return Err(Error::NotBinary(env.n_actions));
    }
    Ok(())
}

fn env_cell(env: &DiscreteEnv, j: usize) -> Result<Cell> {
    require_binary(env)?;
    if j >= env.n_support() {
        return Err(Error::Data(format!(
            "support index {j} out of range ({} points)",
            env.n_support()
        )));
    }
    Ok(cross_cell(env, j, j))
}

/// `f[s][a] = f(s, x(s), a)` with `x(0)` at index `j0` and `x(1)` at `j1`.
fn cross_cell(env: &DiscreteEnv, j0: usize, j1: usize) -> Cell {
    [[env.f(0, j0, 0), env.f(0, j0, 1)], [env.f(1, j1, 0), env.f(1, j1, 1)]]
}

pub fn check_assumption1(env: &DiscreteEnv, j: usize) -> Result<bool> {
    Ok(cell_assumption1(&env_cell(env, j)?))
}

pub fn check_assumption2(env: &DiscreteEnv, j: usize) -> Result<Assumption2> {
    Ok(cell_assumption2(&env_cell(env, j)?))
}

pub fn outcome_fair_exists(env: &DiscreteEnv) -> Result<bool> {
    require_binary(env)?;
    (0..env.n_support()).try_fold(true, |acc, j| Ok(acc && cell_outcome_fair(&env_cell(env, j)?)))
}

/// The rule `pi(1, x) = pi(0, x) = pi(x)` equalising outcomes at every
/// support point, when one exists.
pub fn construct_double_fair(env: &DiscreteEnv) -> Result<Option<TabularPolicy>> {
    require_binary(env)?;
    let mut probs = Vec::with_capacity(env.n_support());
    for j in 0..env.n_support() {
        match cell_double_fair(&env_cell(env, j)?) {
            Some(p) => probs.push(p),
            None => return Ok(None),
        }
    }
    TabularPolicy::from_treat_probs(env.x_support.clone(), [probs.clone(), probs]).map(Some)
}

pub fn outcome_fair_solution_map(env: &DiscreteEnv, j: usize) -> Result<SolutionMap> {
    Ok(cell_solution_map(&env_cell(env, j)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    /// Support indices of `x(0)` and `x(1)`; equal for the observed-covariate check.
    pub x_index: (usize, usize),
    pub assumption1: bool,
    pub assumption2: Assumption2,
    pub outcome_fair: bool,
    pub double_fair_prob: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExistenceReport {
    pub cells: Vec<CellReport>,
    pub assumption1: bool,
    pub assumption2: Assumption2,
    pub outcome_fair_exists: bool,
    pub double_fair_exists: bool,
    pub double_fair_policy: Option<TabularPolicy>,
}

impl ExistenceReport {
    fn from_cells(env: &DiscreteEnv, pairs: &[(usize, usize)]) -> Result<Self> {
        let cells: Vec<CellReport> = pairs
            .iter()
            .map(|&(j0, j1)| {
                let f = cross_cell(env, j0, j1);
                CellReport {
                    x_index: (j0, j1),
                    assumption1: cell_assumption1(&f),
                    assumption2: cell_assumption2(&f),
                    outcome_fair: cell_outcome_fair(&f),
                    double_fair_prob: cell_double_fair(&f),
                }
            })
            .collect();
        let every = |pred: &dyn Fn(&CellReport) -> bool| cells.iter().all(pred);
        let assumption2 = Assumption2 {
            i: every(&|c| c.assumption2.i),
            ii: every(&|c| c.assumption2.ii),
            iii: every(&|c| c.assumption2.iii),
        };
        let double_fair_exists = every(&|c| c.double_fair_prob.is_some());
        let double_fair_policy = if double_fair_exists {
            policy_from_pairs(env, &cells)?
        } else {
            None
        };
        Ok(Self {
            assumption1: every(&|c| c.assumption1),
            assumption2,
            outcome_fair_exists: every(&|c| c.outcome_fair),
            double_fair_exists,
            double_fair_policy,
            cells,
        })
    }
}

/// Table assigning `pi(0, x(0)) = pi(1, x(1)) = p` per cell. Entries no cell
/// touches default to 0.5; conflicting assignments yield no table.
fn policy_from_pairs(env: &DiscreteEnv, cells: &[CellReport]) -> Result<Option<TabularPolicy>> {
    let m = env.n_support();
    let mut treat: [Vec<Option<f64>>; 2] = [vec![None; m], vec![None; m]];
    for c in cells {
        let p = c.double_fair_prob.expect("checked by caller");
        for (s, j) in [(0, c.x_index.0), (1, c.x_index.1)] {
            match treat[s][j] {
                Some(q) if q != p => return Ok(None),
                _ => treat[s][j] = Some(p),
            }
        }
    }
    let fill = |v: &[Option<f64>]| v.iter().map(|p| p.unwrap_or(0.5)).collect::<Vec<_>>();
    TabularPolicy::from_treat_probs(env.x_support.clone(), [fill(&treat[0]), fill(&treat[1])]).map(Some)
}

/// Every check, per support point and overall.
pub fn existence_report(env: &DiscreteEnv) -> Result<ExistenceReport> {
    require_binary(env)?;
    let pairs: Vec<_> = (0..env.n_support()).map(|j| (j, j)).collect();
    ExistenceReport::from_cells(env, &pairs)
}

/// Counterfactual variant: each pair `(j0, j1)` names the support points
/// `x(0)` and `x(1)` of one individual's covariates in the two worlds, and
/// the checks run on `f(s, x(s), a)`.
pub fn existence_cf(env: &DiscreteEnv, pairs: &[(usize, usize)]) -> Result<ExistenceReport> {
    require_binary(env)?;
    if pairs.is_empty() {
        return Err(Error::Data("no counterfactual support pairs supplied".into()));
    }
    let m = env.n_support();
    if let Some(&(j0, j1)) = pairs.iter().find(|(j0, j1)| *j0 >= m || *j1 >= m) {
        return Err(Error::SupportMismatch(format!(
            "counterfactual pair ({j0}, {j1}) outside a support of {m} points"
        )));
    }
    ExistenceReport::from_cells(env, pairs)
}

// ── Multi-action feasibility ────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FairMode {
    OutcomeFair,
    DoubleFair,
}

/// Action distributions for the two groups at one support point (equal in
/// double-fair mode).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairWeights {
    pub pi0: Vec<f64>,
    pub pi1: Vec<f64>,
}

impl FairWeights {
    pub fn outcome_gap(&self, f0: &[f64], f1: &[f64]) -> f64 {
        let dot = |f: &[f64], p: &[f64]| f.iter().zip(p).map(|(a, b)| a * b).sum::<f64>();
        (dot(f0, &self.pi0) - dot(f1, &self.pi1)).abs()
    }

    /// Largest violation of nonnegativity or unit mass.
    pub fn simplex_residual(&self) -> f64 {
        [&self.pi0, &self.pi1]
            .iter()
            .map(|p| {
                let neg = p.iter().fold(0.0f64, |acc, v| acc.max(-v));
                neg.max((p.iter().sum::<f64>() - 1.0).abs())
            })
            .fold(0.0, f64::max)
    }
}

const FEAS_TOL: f64 = 1e-10;

/// Finds action distributions with equal expected fairness outcome for the
/// two groups, given the outcome vectors `f0 = f(0, x, .)` and
/// `f1 = f(1, x, .)` over `L` actions. Returns `None` when infeasible.
pub fn multi_action_fair_feasibility(f0: &[f64], f1: &[f64], mode: FairMode) -> Result<Option<FairWeights>> {
    let l = f0.len();
    if l < 2 {
        return Err(Error::Config(format!("need at least two actions, got {l}")));
    }
    if f1.len() != l {
        return Err(Error::Dimension { expected: l, got: f1.len() });
    }
    if f0.iter().chain(f1).any(|v| !v.is_finite()) {
        return Err(Error::Data("outcome vectors must be finite".into()));
    }
    let ones = vec![1.0; l];
    let (a, b) = match mode {
        FairMode::DoubleFair => {
            let diff: Vec<f64> = f0.iter().zip(f1).map(|(u, v)| u - v).collect();
            (vec![ones, diff], vec![1.0, 0.0])
        }
        FairMode::OutcomeFair => {
            let zeros = vec![0.0; l];
            let neg: Vec<f64> = f1.iter().map(|v| -v).collect();
            (
                vec![
                    [ones.clone(), zeros.clone()].concat(),
                    [zeros, ones].concat(),
                    [f0.to_vec(), neg].concat(),
                ],
                vec![1.0, 1.0, 0.0],
            )
        }
    };
    let Some(x) = simplex::phase_one(&a, &b, FEAS_TOL) else {
        return Ok(None);
    };
    let weights = match mode {
        FairMode::DoubleFair => FairWeights {
            pi0: x.clone(),
            pi1: x,
        },
        FairMode::OutcomeFair => FairWeights {
            pi0: x[..l].to_vec(),
            pi1: x[l..].to_vec(),
        },
    };
    Ok(Some(weights))
}
