//! Observational datasets, finite environments, synthetic generators and CSV
//! ingestion.

use std::collections::HashMap;
use std::path::Path;

use rand::Rng;
use rand_distr::{Bernoulli, Distribution, Gamma, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

const PROB_TOL: f64 = 1e-12;

pub fn expit(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

// ── Dataset ─────────────────────────────────────────────────────────────

/// Observational records `(S, X, A, R1, R2)`.
///
/// Covariates are stored row-major. When no separate fairness reward is
/// supplied, the fairness channel aliases the primary reward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    sensitive: Vec<u8>,
    covariates: Vec<f64>,
    dim: usize,
    actions: Vec<u8>,
    reward_primary: Vec<f64>,
    reward_fairness: Option<Vec<f64>>,
}

impl Dataset {
    pub fn new(
        sensitive: Vec<u8>,
        covariates: Vec<Vec<f64>>,
        actions: Vec<u8>,
        reward_primary: Vec<f64>,
        reward_fairness: Option<Vec<f64>>,
    ) -> Result<Self> {
        let n = sensitive.len();
        let dim = covariates.first().map(|r| r.len()).unwrap_or(0);
        let mut flat = Vec::with_capacity(n * dim);
        for (i, row) in covariates.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::Row {
                    row: i + 1,
                    message: format!("expected {dim} covariates, found {}", row.len()),
                });
            }
            flat.extend_from_slice(row);
        }
        Self::from_flat(sensitive, flat, dim, actions, reward_primary, reward_fairness)
    }

    pub fn from_flat(
        sensitive: Vec<u8>,
        covariates: Vec<f64>,
        dim: usize,
        actions: Vec<u8>,
        reward_primary: Vec<f64>,
        reward_fairness: Option<Vec<f64>>,
    ) -> Result<Self> {
        let n = sensitive.len();
        if n == 0 {
            return Err(Error::Data("dataset must contain at least one record".into()));
        }
        if dim == 0 {
            return Err(Error::Data("dataset must have at least one covariate".into()));
        }
        if covariates.len() != n * dim
            || actions.len() != n
            || reward_primary.len() != n
            || reward_fairness.as_ref().is_some_and(|r| r.len() != n)
        {
            return Err(Error::Data("all fields must share the same length".into()));
        }
        if let Some(i) = sensitive.iter().position(|&s| s > 1) {
            return Err(Error::Row {
                row: i + 1,
                message: format!("sensitive value {} is not binary", sensitive[i]),
            });
        }
        if let Some(i) = actions.iter().position(|&a| a > 1) {
            return Err(Error::Row {
                row: i + 1,
                message: format!("action value {} is not binary", actions[i]),
            });
        }
        Ok(Self {
            sensitive,
            covariates,
            dim,
            actions,
            reward_primary,
            reward_fairness,
        })
    }

    pub fn len(&self) -> usize {
        self.sensitive.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sensitive.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sensitive(&self) -> &[u8] {
        &self.sensitive
    }

    pub fn actions(&self) -> &[u8] {
        &self.actions
    }

    pub fn x(&self, i: usize) -> &[f64] {
        &self.covariates[i * self.dim..(i + 1) * self.dim]
    }

    pub fn covariates_flat(&self) -> &[f64] {
        &self.covariates
    }

    pub fn reward_primary(&self) -> &[f64] {
        &self.reward_primary
    }

    pub fn reward_fairness(&self) -> &[f64] {
        self.reward_fairness.as_deref().unwrap_or(&self.reward_primary)
    }

    /// True when the fairness channel is the primary reward.
    pub fn fairness_aliases_primary(&self) -> bool {
        self.reward_fairness.is_none()
    }

    pub fn group_count(&self, s: u8) -> usize {
        self.sensitive.iter().filter(|&&v| v == s).count()
    }

    /// Records at the given indices, in order.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        let mut cov = Vec::with_capacity(idx.len() * self.dim);
        for &i in idx {
            cov.extend_from_slice(self.x(i));
        }
        Dataset {
            sensitive: idx.iter().map(|&i| self.sensitive[i]).collect(),
            covariates: cov,
            dim: self.dim,
            actions: idx.iter().map(|&i| self.actions[i]).collect(),
            reward_primary: idx.iter().map(|&i| self.reward_primary[i]).collect(),
            reward_fairness: self
                .reward_fairness
                .as_ref()
                .map(|r| idx.iter().map(|&i| r[i]).collect()),
        }
    }
}

// ── Synthetic simulation ────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_train: 200,
            n_test: 5000,
            seed: 2024,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_train < 10 {
            return Err(Error::Config(format!("n_train must be >= 10, got {}", self.n_train)));
        }
        if self.n_test < 1 {
            return Err(Error::Config("n_test must be >= 1".into()));
        }
        Ok(())
    }
}

/// True coefficients of the simulation's reward mean over the feature map
/// `[1, s, x1, x2, a, a*s, a*x1, a*x2]`.
pub const SIM_TRUE_COEFFICIENTS: [f64; 8] = [0.0, 1.5, 0.9, 0.8, 1.0, -0.8, -0.5, -0.5];

/// Group means of the simulation covariates: `theta(0)`, `theta(1)`.
pub const SIM_TRUE_SHIFT: [[f64; 2]; 2] = [[0.0, 0.0], [0.45, 0.85]];

/// Weights `[intercept, s, x1, x2]` of the value-optimal rule of the simulation.
pub const SIM_OPTIMAL_RULE: [f64; 4] = [1.0, -0.8, -0.5, -0.5];

/// Draws `n` records from the two-covariate simulation design.
pub fn simulate_records<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Dataset {
    let sens = Bernoulli::new(0.35).expect("valid probability");
    let mut s_out = Vec::with_capacity(n);
    let mut x_out = Vec::with_capacity(2 * n);
    let mut a_out = Vec::with_capacity(n);
    let mut r_out = Vec::with_capacity(n);
    for _ in 0..n {
        let s = u8::from(sens.sample(rng));
        let sf = f64::from(s);
        let e1: f64 = StandardNormal.sample(rng);
        let e2: f64 = StandardNormal.sample(rng);
        let x1 = 0.45 * sf + e1;
        let x2 = 0.85 * sf + e2;
        let p = expit(-0.5 + sf + x1 - x2);
        let a = u8::from(rng.random::<f64>() < p);
        let af = f64::from(a);
        let eps: f64 = StandardNormal.sample(rng);
        let r = 1.5 * sf + 0.9 * x1 + 0.8 * x2 + af * (1.0 - 0.8 * sf - 0.5 * x1 - 0.5 * x2) + eps;
        s_out.push(s);
        x_out.push(x1);
        x_out.push(x2);
        a_out.push(a);
        r_out.push(r);
    }
    Dataset::from_flat(s_out, x_out, 2, a_out, r_out, None).expect("simulated records are valid")
}

/// Train/test pair for the simulation design; a pure function of the seed.
pub fn generate_simulation(config: &SimConfig) -> Result<(Dataset, Dataset)> {
    config.validate()?;
    let mut train_rng = rng::stream(config.seed, rng::Purpose::Train as u64);
    let mut test_rng = rng::stream(config.seed, rng::Purpose::Test as u64);
    Ok((
        simulate_records(config.n_train, &mut train_rng),
        simulate_records(config.n_test, &mut test_rng),
    ))
}

// ── Finite environments ─────────────────────────────────────────────────

/// A fully specified environment over a finite covariate support.
///
/// Tables are indexed `[s][x_index][action]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteEnv {
    pub s_prob: f64,
    pub x_support: Vec<Vec<f64>>,
    /// `P(X = x_j | S = s)` for `s = 0, 1`.
    pub x_probs: [Vec<f64>; 2],
    pub f_table: [Vec<Vec<f64>>; 2],
    pub r_table: [Vec<Vec<f64>>; 2],
    pub n_actions: usize,
}

impl DiscreteEnv {
    pub fn new(
        s_prob: f64,
        x_support: Vec<Vec<f64>>,
        x_probs: [Vec<f64>; 2],
        f_table: [Vec<Vec<f64>>; 2],
        r_table: [Vec<Vec<f64>>; 2],
    ) -> Result<Self> {
        let n_actions = f_table[0].first().map(|v| v.len()).unwrap_or(0);
        let env = Self {
            s_prob,
            x_support,
            x_probs,
            f_table,
            r_table,
            n_actions,
        };
        env.validate()?;
        Ok(env)
    }

    /// Environment whose outcome tables are shared (`r = f`) and whose
    /// covariate law does not depend on `S`.
    pub fn shared(
        s_prob: f64,
        x_support: Vec<Vec<f64>>,
        x_probs: Vec<f64>,
        f_table: [Vec<Vec<f64>>; 2],
    ) -> Result<Self> {
        Self::new(
            s_prob,
            x_support,
            [x_probs.clone(), x_probs],
            f_table.clone(),
            f_table,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.s_prob) {
            return Err(Error::Data(format!("s_prob {} outside [0,1]", self.s_prob)));
        }
        if self.n_actions < 2 {
            return Err(Error::Data("environment needs at least two actions".into()));
        }
        let m = self.x_support.len();
        if m == 0 {
            return Err(Error::Data("empty covariate support".into()));
        }
        for s in 0..2 {
            let p = &self.x_probs[s];
            if p.len() != m {
                return Err(Error::Data(format!("x_probs[{s}] has {} entries, support has {m}", p.len())));
            }
            if p.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::Data(format!("x_probs[{s}] has an entry outside [0,1]")));
            }
            let total: f64 = p.iter().sum();
            if (total - 1.0).abs() > PROB_TOL {
                return Err(Error::Data(format!("x_probs[{s}] sums to {total}")));
            }
            for table in [&self.f_table, &self.r_table] {
                if table[s].len() != m || table[s].iter().any(|row| row.len() != self.n_actions) {
                    return Err(Error::Data("outcome tables must cover every (s, x, a)".into()));
                }
            }
        }
        Ok(())
    }

    pub fn n_support(&self) -> usize {
        self.x_support.len()
    }

    pub fn f(&self, s: u8, xi: usize, a: usize) -> f64 {
        self.f_table[s as usize][xi][a]
    }

    pub fn r(&self, s: u8, xi: usize, a: usize) -> f64 {
        self.r_table[s as usize][xi][a]
    }

    pub fn s_weight(&self, s: u8) -> f64 {
        if s == 1 {
            self.s_prob
        } else {
            1.0 - self.s_prob
        }
    }

    /// Marginal law of `X`.
    pub fn marginal_x_probs(&self) -> Vec<f64> {
        (0..self.n_support())
            .map(|j| self.s_weight(0) * self.x_probs[0][j] + self.s_weight(1) * self.x_probs[1][j])
            .collect()
    }

    /// Position of `x` in the support (exact match).
    pub fn index_of(&self, x: &[f64]) -> Option<usize> {
        self.x_support.iter().position(|p| p.as_slice() == x)
    }

    /// Draws records with uniformly random binary actions and Gaussian
    /// noise of standard deviation `noise` around the cell means.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, noise: f64, rng: &mut R) -> Result<Dataset> {
        if self.n_actions != 2 {
            return Err(Error::NotBinary(self.n_actions));
        }
        let dim = self.x_support[0].len();
        let mut s_out = Vec::with_capacity(n);
        let mut x_out = Vec::with_capacity(n * dim);
        let mut a_out = Vec::with_capacity(n);
        let mut r1 = Vec::with_capacity(n);
        let mut r2 = Vec::with_capacity(n);
        for _ in 0..n {
            let s = u8::from(rng.random::<f64>() < self.s_prob);
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut xi = self.n_support() - 1;
            for (j, p) in self.x_probs[s as usize].iter().enumerate() {
                acc += p;
                if u < acc {
                    xi = j;
                    break;
                }
            }
            let a = u8::from(rng.random::<bool>());
            let e1: f64 = StandardNormal.sample(rng);
            let e2: f64 = StandardNormal.sample(rng);
            s_out.push(s);
            x_out.extend_from_slice(&self.x_support[xi]);
            a_out.push(a);
            r1.push(self.r(s, xi, a as usize) + noise * e1);
            r2.push(self.f(s, xi, a as usize) + noise * e2);
        }
        Dataset::from_flat(s_out, x_out, dim, a_out, r1, Some(r2))
    }
}

/// The two-action environment with `S ~ Ber(0.5)`, `X ~ Ber(0.6)` and mean
/// outcome `s + x + 0.4a - 0.5as` on both reward channels.
pub fn make_b2_env() -> DiscreteEnv {
    let cell = |s: f64, x: f64| vec![s + x, s + x + 0.4 - 0.5 * s];
    let table = [
        vec![cell(0.0, 0.0), cell(0.0, 1.0)],
        vec![cell(1.0, 0.0), cell(1.0, 1.0)],
    ];
    DiscreteEnv::shared(0.5, vec![vec![0.0], vec![1.0]], vec![0.4, 0.6], table)
        .expect("built-in environment is valid")
}

// ── CSV ingestion ───────────────────────────────────────────────────────

/// Column-name mapping for [`load_csv`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub sensitive: String,
    pub action: String,
    pub reward_primary: String,
    #[serde(default)]
    pub reward_fairness: Option<String>,
    pub covariates: Vec<String>,
    /// Appends a 0/1 covariate `bm > 5` computed from this bonus-malus column.
    #[serde(default)]
    pub high_risk_from_bm: Option<String>,
}

impl CsvSchema {
    /// Schema matching the files produced by [`write_csv`] for `dim` covariates.
    pub fn standard(dim: usize, separate_fairness: bool) -> Self {
        Self {
            sensitive: "s".into(),
            action: "a".into(),
            reward_primary: "r1".into(),
            reward_fairness: separate_fairness.then(|| "r2".into()),
            covariates: (1..=dim).map(|j| format!("x{j}")).collect(),
            high_risk_from_bm: None,
        }
    }
}

/// Bonus-malus risk label: high risk iff the scale value exceeds five.
pub fn high_risk_label(bm: f64) -> f64 {
    if bm > 5.0 {
        1.0
    } else {
        0.0
    }
}

pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    read_csv(file, schema)
}

pub fn read_csv<R: std::io::Read>(reader: R, schema: &CsvSchema) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Data(format!("cannot read header: {e}")))?
        .clone();
    let width = headers.len();
    let position: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h, i)).collect();
    let col = |name: &str| {
        position
            .get(name)
            .copied()
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let s_col = col(&schema.sensitive)?;
    let a_col = col(&schema.action)?;
    let r1_col = col(&schema.reward_primary)?;
    let r2_col = schema.reward_fairness.as_deref().map(col).transpose()?;
    let x_cols = schema
        .covariates
        .iter()
        .map(|c| col(c))
        .collect::<Result<Vec<_>>>()?;
    let bm_col = schema.high_risk_from_bm.as_deref().map(col).transpose()?;

    let mut sensitive = Vec::new();
    let mut actions = Vec::new();
    let mut r1 = Vec::new();
    let mut r2 = Vec::new();
    let mut cov = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Row {
            row,
            message: e.to_string(),
        })?;
        if record.len() != width {
            return Err(Error::Row {
                row,
                message: format!("expected {width} fields, found {}", record.len()),
            });
        }
        let binary = |c: usize, what: &str| -> Result<u8> {
            let raw = &record[c];
            match raw.parse::<i64>() {
                Ok(v @ (0 | 1)) => Ok(v as u8),
                _ => Err(Error::Row {
                    row,
                    message: format!("{what} value `{raw}` is not 0 or 1"),
                }),
            }
        };
        let real = |c: usize| -> Result<f64> {
            let raw = &record[c];
            raw.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::Row {
                row,
                message: format!("column `{}` value `{raw}` is not numeric", &headers[c]),
            })
        };
        sensitive.push(binary(s_col, "sensitive")?);
        actions.push(binary(a_col, "action")?);
        r1.push(real(r1_col)?);
        if let Some(c) = r2_col {
            r2.push(real(c)?);
        }
        for &c in &x_cols {
            cov.push(real(c)?);
        }
        if let Some(c) = bm_col {
            cov.push(high_risk_label(real(c)?));
        }
    }
    let dim = x_cols.len() + usize::from(bm_col.is_some());
    Dataset::from_flat(
        sensitive,
        cov,
        dim,
        actions,
        r1,
        r2_col.map(|_| r2),
    )
}

/// Writes a dataset in the layout read back by `CsvSchema::standard`.
pub fn write_csv(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    write_csv_to(data, file).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn write_csv_to<W: std::io::Write>(data: &Dataset, writer: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let separate = !data.fairness_aliases_primary();
    let mut header = vec!["s".to_string(), "a".to_string(), "r1".to_string()];
    if separate {
        header.push("r2".into());
    }
    header.extend((1..=data.dim()).map(|j| format!("x{j}")));
    w.write_record(&header)?;
    for i in 0..data.len() {
        let mut row = vec![
            data.sensitive()[i].to_string(),
            data.actions()[i].to_string(),
            data.reward_primary()[i].to_string(),
        ];
        if separate {
            row.push(data.reward_fairness()[i].to_string());
        }
        row.extend(data.x(i).iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()
}

// ── Insurance premium scenario ──────────────────────────────────────────

/// Adjusted premium: `min(500 coverage + 100 claims / exposure + 20 gender, 5000)`.
pub fn insurance_premium(coverage: u8, n_claims: u32, exposure: f64, gender: u8) -> Result<f64> {
    if !(exposure > 0.0) {
        return Err(Error::Data(format!("exposure must be positive, got {exposure}")));
    }
    if !(1..=3).contains(&coverage) {
        return Err(Error::Data(format!("coverage plan must be 1, 2 or 3, got {coverage}")));
    }
    if gender > 1 {
        return Err(Error::Data(format!("gender must be 0 or 1, got {gender}")));
    }
    let raw = 500.0 * f64::from(coverage) + 100.0 * f64::from(n_claims) / exposure + 20.0 * f64::from(gender);
    Ok(raw.min(5000.0))
}

/// One semi-synthetic motor-insurance policyholder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InsuranceRecord {
    pub gender: u8,
    pub age: f64,
    pub coverage: u8,
    pub n_claims: u32,
    pub exposure: f64,
    pub fleet: u8,
    pub bm: u32,
    /// 1 = contract underwritten at the adjusted premium.
    pub action: u8,
    pub premium: f64,
    pub claim_amount: f64,
}

impl InsuranceRecord {
    /// Company revenue in thousands: premium minus claims when underwritten.
    pub fn reward(&self) -> f64 {
        f64::from(self.action) * (self.premium - self.claim_amount) / 1000.0
    }

    /// Customer welfare, the negated revenue.
    pub fn welfare(&self) -> f64 {
        -self.reward()
    }
}

pub const INSURANCE_COLUMNS: [&str; 12] = [
    "gender", "age", "coverage", "n_claims", "exposure", "fleet", "bm", "action", "premium",
    "claim_amount", "reward", "welfare",
];

/// Draws a semi-synthetic insurance portfolio. Premiums follow
/// [`insurance_premium`]; claim amounts are compound Poisson-Gamma with a
/// frequency driven by the bonus-malus level.
pub fn generate_insurance(n: usize, seed: u64) -> Vec<InsuranceRecord> {
    let mut rng = rng::stream(seed, 0);
    let male = Bernoulli::new(0.72).expect("valid probability");
    let fleet_d = Bernoulli::new(0.03).expect("valid probability");
    let severity = Gamma::new(2.0, 600.0).expect("valid gamma");
    (0..n)
        .map(|_| {
            let gender = u8::from(male.sample(&mut rng));
            let age = rng.random_range(18.0..80.0_f64).round();
            let u: f64 = rng.random();
            let coverage = if u < 0.5 { 1 } else if u < 0.85 { 2 } else { 3 };
            let fleet = u8::from(fleet_d.sample(&mut rng));
            let exposure = rng.random_range(0.1..1.0_f64);
            let young = if age < 30.0 { 4.0 } else { 0.0 };
            let bm_mean = 2.0 + young + 0.5 * f64::from(1 - gender);
            let bm = (Poisson::new(bm_mean).expect("positive rate").sample(&mut rng) as u32).min(22);
            let lambda = (0.08 * (0.12 * f64::from(bm)).exp() * exposure).max(1e-6);
            let n_claims = Poisson::new(lambda).expect("positive rate").sample(&mut rng) as u32;
            let premium = insurance_premium(coverage, n_claims, exposure, gender).expect("valid inputs");
            let p_underwrite = expit(0.8 - 0.6 * high_risk_label(f64::from(bm)) + 0.2 * f64::from(gender));
            let action = u8::from(rng.random::<f64>() < p_underwrite);
            let future_rate = 0.25 * (0.12 * f64::from(bm)).exp() * (1.0 + 0.3 * f64::from(coverage - 1));
            let future = Poisson::new(future_rate).expect("positive rate").sample(&mut rng) as u32;
            let claim_amount: f64 = (0..future).map(|_| severity.sample(&mut rng)).sum();
            InsuranceRecord {
                gender,
                age,
                coverage,
                n_claims,
                exposure,
                fleet,
                bm,
                action,
                premium,
                claim_amount,
            }
        })
        .collect()
}

pub fn write_insurance_csv(records: &[InsuranceRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io_err = |e: std::io::Error| Error::io(path.display().to_string(), e);
    let file = std::fs::File::create(path).map_err(io_err)?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(INSURANCE_COLUMNS)
        .map_err(|e| io_err(e.into()))?;
    for r in records {
        w.write_record([
            r.gender.to_string(),
            r.age.to_string(),
            r.coverage.to_string(),
            r.n_claims.to_string(),
            r.exposure.to_string(),
            r.fleet.to_string(),
            r.bm.to_string(),
            r.action.to_string(),
            r.premium.to_string(),
            r.claim_amount.to_string(),
            r.reward().to_string(),
            r.welfare().to_string(),
        ])
        .map_err(|e| io_err(e.into()))?;
    }
    w.flush().map_err(io_err)
}

/// Schema for files written by [`write_insurance_csv`].
pub fn insurance_schema() -> CsvSchema {
    CsvSchema {
        sensitive: "gender".into(),
        action: "action".into(),
        reward_primary: "reward".into(),
        reward_fairness: Some("welfare".into()),
        covariates: vec![
            "n_claims".into(),
            "age".into(),
            "coverage".into(),
            "fleet".into(),
            "exposure".into(),
        ],
        high_risk_from_bm: Some("bm".into()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn simulation_shapes() {
        let cfg = SimConfig {
            n_train: 200,
            n_test: 5000,
            seed: 7,
        };
        let (train, test) = generate_simulation(&cfg).unwrap();
        assert_eq!(train.len(), 200);
        assert_eq!(train.dim(), 2);
        assert_eq!(test.len(), 5000);
        assert!(train.fairness_aliases_primary());
    }

    #[test]
    fn simulation_is_deterministic() {
        let cfg = SimConfig {
            n_train: 50,
            n_test: 20,
            seed: 11,
        };
        let a = generate_simulation(&cfg).unwrap();
        let b = generate_simulation(&cfg).unwrap();
        assert_eq!(a, b);
        let c = generate_simulation(&SimConfig { seed: 12, ..cfg }).unwrap();
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn simulation_rejects_small_train() {
        let cfg = SimConfig {
            n_train: 9,
            n_test: 1,
            seed: 0,
        };
        assert!(matches!(generate_simulation(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn sensitive_rate_matches_bernoulli() {
        let mut rng = rng::stream(3, 99);
        let data = simulate_records(1_000_000, &mut rng);
        let mean = data.group_count(1) as f64 / data.len() as f64;
        assert!((mean - 0.35).abs() < 0.002, "mean {mean}");
    }

    #[test]
    fn b2_table() {
        let env = make_b2_env();
        assert_abs_diff_eq!(env.f(1, 1, 1), 1.9, epsilon = 1e-15);
        assert_eq!(env.f(0, 0, 0), 0.0);
        assert_abs_diff_eq!(env.f(1, 0, 1), 0.9, epsilon = 1e-15);
        assert_eq!(env.f_table, env.r_table);
        assert_eq!(env.marginal_x_probs(), vec![0.4, 0.6]);
    }

    #[test]
    fn env_rejects_bad_probabilities() {
        let t = [vec![vec![0.0, 1.0]], vec![vec![0.0, 1.0]]];
        let err = DiscreteEnv::shared(0.5, vec![vec![0.0]], vec![0.9], t);
        assert!(err.is_err());
    }

    #[test]
    fn premium_examples() {
        assert_eq!(insurance_premium(1, 2, 1.0, 1).unwrap(), 720.0);
        assert_eq!(insurance_premium(3, 40, 1.0, 0).unwrap(), 5000.0);
        assert_eq!(insurance_premium(1, 0, 1.0, 0).unwrap(), 500.0);
        assert!(insurance_premium(1, 0, 0.0, 0).is_err());
        assert!(insurance_premium(1, 0, -1.0, 0).is_err());
    }

    proptest! {
        #[test]
        fn premium_is_monotone_and_capped(
            cov in 1u8..=3, claims in 0u32..200, exposure in 0.01f64..3.0, gender in 0u8..=1,
        ) {
            let p = insurance_premium(cov, claims, exposure, gender).unwrap();
            prop_assert!(p <= 5000.0);
            if cov < 3 {
                prop_assert!(insurance_premium(cov + 1, claims, exposure, gender).unwrap() >= p);
            }
            prop_assert!(insurance_premium(cov, claims + 1, exposure, gender).unwrap() >= p);
            prop_assert!(insurance_premium(cov, claims, exposure * 1.5, gender).unwrap() <= p);
            if gender == 0 {
                prop_assert!(insurance_premium(cov, claims, exposure, 1).unwrap() >= p);
            }
        }
    }

    const SMALL: &str = "s,a,r1,x1,x2\n0,1,0.5,1.0,2.0\n1,0,-1.25,0.5,0.25\n1,1,3,2,2\n";

    #[test]
    fn reads_well_formed_file() {
        let d = read_csv(SMALL.as_bytes(), &CsvSchema::standard(2, false)).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.x(1), &[0.5, 0.25]);
        assert_eq!(d.reward_primary()[1], -1.25);
    }

    #[test]
    fn rejects_non_binary_sensitive_with_row() {
        let mut text = String::from("s,a,r1,x1\n");
        for _ in 0..4 {
            text.push_str("0,1,1.0,0.0\n");
        }
        text.push_str("2,1,1.0,0.0\n");
        let err = read_csv(text.as_bytes(), &CsvSchema::standard(1, false)).unwrap_err();
        match err {
            Error::Row { row, message } => {
                assert_eq!(row, 5);
                assert!(message.contains("sensitive"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_missing_column_and_ragged_rows() {
        let err = read_csv(SMALL.as_bytes(), &CsvSchema::standard(3, false)).unwrap_err();
        assert!(matches!(err, Error::MissingColumn(c) if c == "x3"));
        let ragged = "s,a,r1,x1\n0,1,1.0,0.0\n1,0,2.0\n";
        let err = read_csv(ragged.as_bytes(), &CsvSchema::standard(1, false)).unwrap_err();
        assert!(matches!(err, Error::Row { row: 2, .. }));
        let nonnum = "s,a,r1,x1\n0,1,abc,0.0\n";
        let err = read_csv(nonnum.as_bytes(), &CsvSchema::standard(1, false)).unwrap_err();
        assert!(matches!(err, Error::Row { row: 1, .. }));
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_csv("/nonexistent/dir/data.csv", &CsvSchema::standard(1, false)).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn csv_round_trip() {
        let (train, _) = generate_simulation(&SimConfig {
            n_train: 30,
            n_test: 1,
            seed: 5,
        })
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("train.csv");
        write_csv(&train, &path).unwrap();
        let back = load_csv(&path, &CsvSchema::standard(2, false)).unwrap();
        assert_eq!(back, train);

        let env = make_b2_env();
        let sampled = env.sample(25, 0.1, &mut rng::stream(1, 1)).unwrap();
        write_csv(&sampled, &path).unwrap();
        assert_eq!(load_csv(&path, &CsvSchema::standard(1, true)).unwrap(), sampled);
    }

    #[test]
    fn insurance_csv_pipeline() {
        let records = generate_insurance(300, 4);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ins.csv");
        write_insurance_csv(&records, &path).unwrap();
        let d = load_csv(&path, &insurance_schema()).unwrap();
        assert_eq!(d.len(), 300);
        assert_eq!(d.dim(), 6);
        for i in 0..d.len() {
            assert_eq!(d.reward_fairness()[i], -d.reward_primary()[i]);
            assert_eq!(d.x(i)[5], high_risk_label(f64::from(records[i].bm)));
            assert!(records[i].premium <= 5000.0);
        }
    }
}
