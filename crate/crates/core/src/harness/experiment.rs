use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{
    load_csv, make_b2_env, simulate_records, CsvSchema, Dataset, SimConfig, SIM_TRUE_COEFFICIENTS, SIM_TRUE_SHIFT,
};
use crate::error::{Error, Result};
use crate::fairness::{b2_policies, exact_metrics, MetricReport, Notion, PolicyEvaluator, Scores, Variant};
use crate::nuisance::{fit_outcome, fit_shift, CellMeans, Channel, Family, OutcomeModel, ShiftModel};
use crate::policy::{sample_pool, Policy, PolicyKind};
use crate::rng::{self, Purpose};
use crate::solver::{
    alpha_grid, dfl_fit_with_pool, fit_advb_with_pool, fit_optimal_with_pool, fit_single_fair_with_pool,
    linear_union, select_dfl, BaselineFit, DFLConfig, FitResult, Method, Models, SingleTarget,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    #[default]
    Simulation,
    B2Demo,
    Csv,
}

/// Which nuisance models score the fitted rules on the test set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalModels {
    /// The models fitted on the training split.
    #[default]
    Train,
    /// Models refitted on the test split.
    TestRefit,
    /// True simulation coefficients and covariate shift (simulation only).
    Oracle,
}

/// Input file and split rule for the CSV scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvScenario {
    pub path: PathBuf,
    pub schema: CsvSchema,
    /// Fraction held out for evaluation; 0 evaluates in-sample.
    #[serde(default)]
    pub test_fraction: f64,
    #[serde(default = "default_family")]
    pub family: Family,
}

fn default_family() -> Family {
    Family::LinearGaussian
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub methods: Vec<Method>,
    pub replications: usize,
    /// Master seed; falls back to `sim.seed` when absent.
    pub seed: Option<u64>,
    /// Concurrent replications; 0 uses every available core.
    pub workers: usize,
    pub eval_models: EvalModels,
    pub sim: SimConfig,
    pub dfl: DFLConfig,
    /// Slack constants for the estimator; empty means `[dfl.c0]`.
    pub c0_grid: Vec<f64>,
    /// Grid sizes for the estimator; empty means `[dfl.K]`.
    #[serde(rename = "K_grid")]
    pub k_grid: Vec<usize>,
    pub csv: Option<CsvScenario>,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::Simulation,
            methods: Method::ALL.to_vec(),
            replications: 100,
            seed: None,
            workers: 0,
            eval_models: EvalModels::Train,
            sim: SimConfig::default(),
            dfl: DFLConfig::default(),
            c0_grid: Vec::new(),
            k_grid: Vec::new(),
            csv: None,
            output_dir: PathBuf::from("dfl-out"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications < 1 {
            return Err(Error::Config("replications must be >= 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("methods must be nonempty".into()));
        }
        self.dfl.validate()?;
        for &c0 in &self.c0_grid {
            if !(c0 > 0.0 && c0.is_finite()) {
                return Err(Error::Config(format!("c0_grid entries must be positive, got {c0}")));
            }
        }
        if self.k_grid.contains(&0) {
            return Err(Error::Config("K_grid entries must be >= 1".into()));
        }
        match self.scenario {
            Scenario::Simulation => self.sim.validate()?,
            Scenario::Csv => {
                let csv = self
                    .csv
                    .as_ref()
                    .ok_or_else(|| Error::Config("csv scenario needs a [csv] section".into()))?;
                if !(0.0..1.0).contains(&csv.test_fraction) {
                    return Err(Error::Config("csv.test_fraction must lie in [0, 1)".into()));
                }
                if self.eval_models == EvalModels::Oracle {
                    return Err(Error::Config("oracle evaluation models exist only for the simulation".into()));
                }
            }
            Scenario::B2Demo => {}
        }
        if self.dfl.class_spec.kind != PolicyKind::Linear && self.scenario != Scenario::B2Demo {
            return Err(Error::Config("only linear policy classes can be sampled".into()));
        }
        Ok(())
    }

    pub fn master_seed(&self) -> u64 {
        self.seed.unwrap_or(self.sim.seed)
    }

    fn c0s(&self) -> Vec<f64> {
        if self.c0_grid.is_empty() {
            vec![self.dfl.c0]
        } else {
            self.c0_grid.clone()
        }
    }

    fn ks(&self) -> Vec<usize> {
        if self.k_grid.is_empty() {
            vec![self.dfl.k]
        } else {
            self.k_grid.clone()
        }
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Fitted nuisances for one training sample.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FittedModels {
    pub primary: OutcomeModel,
    pub fairness: OutcomeModel,
    pub shift: Option<ShiftModel>,
}

impl FittedModels {
    /// Outcome regressions for both channels (shared when the fairness
    /// reward aliases the primary one) and, if asked, the covariate shift.
    pub fn fit(data: &Dataset, family: Family, with_shift: bool) -> Result<Self> {
        let primary = fit_outcome(data, family, Channel::Primary)?;
        let fairness = if data.fairness_aliases_primary() {
            primary.with_channel(Channel::Fairness)
        } else {
            fit_outcome(data, family, Channel::Fairness)?
        };
        let shift = if with_shift { Some(fit_shift(data)?) } else { None };
        Ok(Self {
            primary,
            fairness,
            shift,
        })
    }

    /// True models of the simulation design.
    pub fn simulation_oracle() -> Self {
        let primary =
            OutcomeModel::from_coefficients(Family::LinearGaussian, Channel::Primary, SIM_TRUE_COEFFICIENTS.to_vec())
                .expect("valid coefficients");
        Self {
            fairness: primary.with_channel(Channel::Fairness),
            primary,
            shift: Some(
                ShiftModel::oracle(SIM_TRUE_SHIFT[0].to_vec(), SIM_TRUE_SHIFT[1].to_vec()).expect("same length"),
            ),
        }
    }

    pub fn view(&self) -> Models<'_> {
        Models {
            primary: &self.primary,
            fairness: &self.fairness,
            shift: self.shift.as_ref(),
        }
    }
}

/// Result of fitting one method.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Fitted {
    Dfl(Box<FitResult>),
    Baseline(BaselineFit),
}

impl Fitted {
    pub fn policy(&self) -> &Policy {
        match self {
            Fitted::Dfl(f) => &f.policy,
            Fitted::Baseline(b) => &b.policy,
        }
    }
}

/// Fits `method` on a fresh pool drawn from `config.class_spec` and `config.seed`.
pub fn fit_method(method: Method, data: &Dataset, models: Models, config: &DFLConfig) -> Result<Fitted> {
    config.validate()?;
    let pool = sample_pool(&config.class_spec, data.dim(), Some(data), config.seed)?;
    fit_on_pool(method, data, models, config, pool)
}

fn fit_on_pool(method: Method, data: &Dataset, models: Models, config: &DFLConfig, pool: Vec<Policy>) -> Result<Fitted> {
    Ok(match method {
        Method::Dfl => Fitted::Dfl(Box::new(dfl_fit_with_pool(data, models, config, pool)?)),
        Method::Optimal => Fitted::Baseline(fit_optimal_with_pool(data, models.primary, &config.class_spec, pool)?),
        Method::Vb1 => Fitted::Baseline(fit_single_fair_with_pool(data, models, config, SingleTarget::Action, pool)?),
        Method::Vb2 => Fitted::Baseline(fit_single_fair_with_pool(data, models, config, SingleTarget::Outcome, pool)?),
        Method::Advb => Fitted::Baseline(fit_advb_with_pool(data, models, config, pool)?),
    })
}

/// Solver properties re-checked on a fitted estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolverAudit {
    pub slack: bool,
    pub argmax: bool,
    /// Returned value is nondecreasing over slacks `0, kappa, 2 kappa` on the frozen pool.
    pub kappa_monotone: bool,
}

impl SolverAudit {
    pub fn of(fit: &FitResult) -> Result<Self> {
        let check = fit
            .verify()
            .ok_or_else(|| Error::Numerical("fit result carries no pool".into()))?;
        let k0 = fit.kappa;
        let v: Vec<f64> = [0.0, k0, 2.0 * k0]
            .iter()
            .map(|&k| fit.reselect(k).map(|s| s.value))
            .collect::<Result<_>>()?;
        Ok(Self {
            slack: check.slack,
            argmax: check.argmax,
            kappa_monotone: v[0] <= v[1] && v[1] <= v[2],
        })
    }
}

/// One method's outcome in one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    /// Row label, e.g. `DFL` or `DFL(c0=0.5,K=10)`.
    pub method: String,
    pub base: Method,
    pub rep: usize,
    pub c0: Option<f64>,
    #[serde(rename = "K")]
    pub k: Option<usize>,
    /// Metrics on the evaluation sample.
    pub metrics: MetricReport,
    /// Metrics on the training sample.
    pub train: Option<Scores>,
    pub audit: Option<SolverAudit>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    /// Standard error of the mean; 0 for a single replication.
    pub se: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let se = if values.len() > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        Self { mean, se }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub method: String,
    pub base: Method,
    pub c0: Option<f64>,
    #[serde(rename = "K")]
    pub k: Option<usize>,
    pub n: usize,
    pub delta1: Stat,
    pub delta2: Stat,
    pub value: Stat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub master_seed: u64,
    pub config_hash: String,
    pub wall_time_secs: f64,
    pub replications: usize,
    pub eval_models: EvalModels,
    /// Whether metrics were computed on the training data itself.
    pub in_sample: bool,
    pub notion: Notion,
    pub variant: Variant,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct B2Row {
    pub name: String,
    pub delta1: f64,
    pub delta2: f64,
    pub value: f64,
}

/// Tchebyshev against linear scalarization on the three-rule example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct B2Demo {
    pub triples: Vec<B2Row>,
    #[serde(rename = "K")]
    pub k: usize,
    /// Name of the rule selected at each weight.
    pub tchebyshev_by_alpha: Vec<(f64, String)>,
    pub tchebyshev_recovered: Vec<String>,
    pub linear_recovered: Vec<String>,
    /// Exact population metrics of the three rules (squared, then absolute gap).
    pub exact_squared: Vec<B2Row>,
    pub exact_absolute: Vec<B2Row>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub scenario: Scenario,
    pub config: ExperimentConfig,
    pub results: Vec<MethodResult>,
    pub aggregates: Vec<Aggregate>,
    pub b2_demo: Option<B2Demo>,
    pub metadata: Metadata,
}

impl Report {
    pub fn aggregate(&self, method: &str) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.method == method)
    }
}

const B2_NAMES: [&str; 3] = ["pi1", "pi2", "pi3"];

/// The three-rule comparison with the metric pairs (0, 0.7), (0.4, 0.66),
/// (1, 0.5) and exact values, at slack 0 over a `k`-point grid.
pub fn b2_demo(k: usize) -> Result<B2Demo> {
    let env = make_b2_env();
    let rules = b2_policies();
    let exact = |variant| -> Result<Vec<B2Row>> {
        rules
            .iter()
            .zip(B2_NAMES)
            .map(|(p, name)| {
                let m = exact_metrics(p, &env, variant)?;
                Ok(B2Row {
                    name: name.into(),
                    delta1: m.delta1,
                    delta2: m.delta2,
                    value: m.value,
                })
            })
            .collect()
    };
    let exact_squared = exact(Variant::Squared)?;
    let exact_absolute = exact(Variant::Absolute)?;
    let given = [(0.0, 0.7), (0.4, 0.66), (1.0, 0.5)];
    let scores: Vec<Scores> = given
        .iter()
        .zip(&exact_squared)
        .map(|(&(delta1, delta2), row)| Scores {
            delta1,
            delta2,
            value: row.value,
        })
        .collect();
    let alphas = alpha_grid(k);
    let (steps, _) = select_dfl(&scores, &alphas, 0.0)?;
    let by_alpha: Vec<(f64, String)> = steps.iter().map(|s| (s.alpha, B2_NAMES[s.index].to_string())).collect();
    let mut recovered: Vec<usize> = steps.iter().map(|s| s.index).collect();
    recovered.sort_unstable();
    recovered.dedup();
    let linear = linear_union(&scores, &alphas, 0.0)?;
    Ok(B2Demo {
        triples: scores
            .iter()
            .zip(B2_NAMES)
            .map(|(s, name)| B2Row {
                name: name.into(),
                delta1: s.delta1,
                delta2: s.delta2,
                value: s.value,
            })
            .collect(),
        k,
        tchebyshev_by_alpha: by_alpha,
        tchebyshev_recovered: recovered.iter().map(|&i| B2_NAMES[i].to_string()).collect(),
        linear_recovered: linear.iter().map(|&i| B2_NAMES[i].to_string()).collect(),
        exact_squared,
        exact_absolute,
    })
}

/// A method configuration run in every replication.
#[derive(Debug, Clone)]
struct Arm {
    label: String,
    method: Method,
    c0: Option<f64>,
    k: Option<usize>,
}

fn variants(config: &ExperimentConfig) -> Vec<Arm> {
    let c0s = config.c0s();
    let ks = config.ks();
    let several = c0s.len() * ks.len() > 1;
    let mut out = Vec::new();
    for &m in &config.methods {
        if m == Method::Dfl {
            for &k in &ks {
                for &c0 in &c0s {
                    out.push(Arm {
                        label: if several {
                            format!("DFL(c0={c0},K={k})")
                        } else {
                            "DFL".into()
                        },
                        method: m,
                        c0: Some(c0),
                        k: Some(k),
                    });
                }
            }
        } else {
            out.push(Arm {
                label: m.name().into(),
                method: m,
                c0: None,
                k: None,
            });
        }
    }
    out
}

struct RepData {
    train: Dataset,
    test: Dataset,
}

fn split(data: &Dataset, fraction: f64, rng: &mut impl rand::Rng) -> Result<(Dataset, Dataset)> {
    let n = data.len();
    let mut idx: Vec<usize> = (0..n).collect();
    rand::seq::SliceRandom::shuffle(idx.as_mut_slice(), rng);
    let n_test = ((n as f64) * fraction).round() as usize;
    if n_test == 0 || n_test >= n {
        return Err(Error::Config(format!("test_fraction {fraction} leaves an empty split of {n} records")));
    }
    let (test_idx, train_idx) = idx.split_at(n_test);
    let mut train_idx = train_idx.to_vec();
    let mut test_idx = test_idx.to_vec();
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    Ok((data.subset(&train_idx), data.subset(&test_idx)))
}

struct Runner<'a> {
    config: &'a ExperimentConfig,
    seed: u64,
    variants: Vec<Arm>,
    csv_data: Option<Dataset>,
}

impl Runner<'_> {
    fn family(&self) -> Family {
        self.config.csv.as_ref().map_or(Family::LinearGaussian, |c| c.family)
    }

    fn rep_data(&self, rep: usize) -> Result<RepData> {
        match self.config.scenario {
            Scenario::Simulation => {
                let sim = &self.config.sim;
                Ok(RepData {
                    train: simulate_records(sim.n_train, &mut rng::replication_stream(self.seed, rep, Purpose::Train)),
                    test: simulate_records(sim.n_test, &mut rng::replication_stream(self.seed, rep, Purpose::Test)),
                })
            }
            Scenario::Csv => {
                let data = self.csv_data.as_ref().expect("loaded before the loop");
                let fraction = self.config.csv.as_ref().map_or(0.0, |c| c.test_fraction);
                if fraction == 0.0 {
                    Ok(RepData {
                        train: data.clone(),
                        test: data.clone(),
                    })
                } else {
                    let (train, test) = split(data, fraction, &mut rng::replication_stream(self.seed, rep, Purpose::Split))?;
                    Ok(RepData {
                        train,
                        test,
                        })
                }
            }
            Scenario::B2Demo => {
                let env = make_b2_env();
                let sim = &self.config.sim;
                Ok(RepData {
                    train: env.sample(sim.n_train, 1.0, &mut rng::replication_stream(self.seed, rep, Purpose::Train))?,
                    test: env.sample(sim.n_test, 1.0, &mut rng::replication_stream(self.seed, rep, Purpose::Test))?,
                })
            }
        }
    }

    fn run_rep(&self, rep: usize) -> Result<Vec<MethodResult>> {
        let data = self.rep_data(rep)?;
        let metric = self.config.dfl.metric;
        let need_shift = metric.notion == Notion::Counterfactual;
        let pool_seed = rng::child_seed(self.seed, rep, Purpose::Pool);

        // B.2 replications use exact cell means and the three tabular rules.
        if self.config.scenario == Scenario::B2Demo {
            let env = make_b2_env();
            let r = CellMeans::new(&env, Channel::Primary)?;
            let f = CellMeans::new(&env, Channel::Fairness)?;
            let shift = ShiftModel::oracle(vec![0.0], vec![0.0])?;
            let models = Models {
                primary: &r,
                fairness: &f,
                shift: need_shift.then_some(&shift),
            };
            let pool: Vec<Policy> = b2_policies().into_iter().map(Policy::Tabular).collect();
            return self.fit_all(rep, &data, models, models, pool_seed, Some(pool));
        }

        let fitted = FittedModels::fit(&data.train, self.family(), need_shift)?;
        let eval = match self.config.eval_models {
            EvalModels::Train => None,
            EvalModels::TestRefit => Some(FittedModels::fit(&data.test, self.family(), need_shift)?),
            EvalModels::Oracle => Some(FittedModels::simulation_oracle()),
        };
        let eval_view = eval.as_ref().map_or(fitted.view(), FittedModels::view);
        self.fit_all(rep, &data, fitted.view(), eval_view, pool_seed, None)
    }

    fn fit_all(
        &self,
        rep: usize,
        data: &RepData,
        models: Models,
        eval_models: Models,
        pool_seed: u64,
        fixed_pool: Option<Vec<Policy>>,
    ) -> Result<Vec<MethodResult>> {
        let metric = self.config.dfl.metric;
        let test_ev = PolicyEvaluator::new(
            &data.test,
            eval_models.primary,
            eval_models.fairness,
            eval_models.shift,
            metric,
        )?;
        let base_pool = match fixed_pool {
            Some(p) => p,
            None => sample_pool(&self.config.dfl.class_spec, data.train.dim(), Some(&data.train), pool_seed)?,
        };
        let mut out = Vec::with_capacity(self.variants.len());
        for v in &self.variants {
            let mut cfg = self.config.dfl.clone();
            cfg.seed = pool_seed;
            if let Some(c0) = v.c0 {
                cfg.c0 = c0;
            }
            if let Some(k) = v.k {
                cfg.k = k;
            }
            let fitted = fit_on_pool(v.method, &data.train, models, &cfg, base_pool.clone())?;
            let (train, audit) = match &fitted {
                Fitted::Dfl(f) => (Some(f.scores), Some(SolverAudit::of(f)?)),
                Fitted::Baseline(b) => (b.scores, None),
            };
            let policy = fitted.policy();
            let metrics = test_ev.report(policy);
            if !(metrics.delta1.is_finite() && metrics.delta2.is_finite() && metrics.value.is_finite()) {
                return Err(Error::Numerical(format!("{} produced non-finite test metrics", v.label)));
            }
            out.push(MethodResult {
                method: v.label.clone(),
                base: v.method,
                rep,
                c0: v.c0,
                k: v.k,
                metrics,
                train,
                audit,
            });
        }
        Ok(out)
    }
}

fn aggregate(results: &[MethodResult], variants: &[Arm]) -> Vec<Aggregate> {
    variants
        .iter()
        .map(|v| {
            let rows: Vec<&MethodResult> = results.iter().filter(|r| r.method == v.label).collect();
            let col = |f: fn(&MetricReport) -> f64| rows.iter().map(|r| f(&r.metrics)).collect::<Vec<_>>();
            Aggregate {
                method: v.label.clone(),
                base: v.method,
                c0: v.c0,
                k: v.k,
                n: rows.len(),
                delta1: Stat::of(&col(|m| m.delta1)),
                delta2: Stat::of(&col(|m| m.delta2)),
                value: Stat::of(&col(|m| m.value)),
            }
        })
        .collect()
}

/// Runs every replication (concurrently, up to `workers`) and aggregates.
/// Results are ordered by replication, then by method, regardless of
/// completion order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Report> {
    config.validate()?;
    let start = Instant::now();
    let seed = config.master_seed();
    let csv_data = match (&config.scenario, &config.csv) {
        (Scenario::Csv, Some(c)) => Some(load_csv(&c.path, &c.schema)?),
        _ => None,
    };
    let runner = Runner {
        config,
        seed,
        variants: variants(config),
        csv_data,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let per_rep: Vec<Vec<MethodResult>> = pool.install(|| {
        (0..config.replications)
            .into_par_iter()
            .map(|rep| {
                runner.run_rep(rep).map_err(|e| Error::Replication {
                    rep,
                    source: Box::new(e),
                })
            })
            .collect::<Result<_>>()
    })?;
    let results: Vec<MethodResult> = per_rep.into_iter().flatten().collect();
    let aggregates = aggregate(&results, &runner.variants);
    let b2 = match config.scenario {
        Scenario::B2Demo => Some(b2_demo(99)?),
        _ => None,
    };
    let in_sample = config.scenario == Scenario::Csv && config.csv.as_ref().is_some_and(|c| c.test_fraction == 0.0);
    Ok(Report {
        schema_version: 1,
        scenario: config.scenario,
        config: config.clone(),
        results,
        aggregates,
        b2_demo: b2,
        metadata: Metadata {
            master_seed: seed,
            config_hash: config.hash(),
            wall_time_secs: start.elapsed().as_secs_f64(),
            replications: config.replications,
            eval_models: config.eval_models,
            in_sample,
            notion: config.dfl.metric.notion,
            variant: config.dfl.metric.variant,
            version: env!("CARGO_PKG_VERSION").into(),
        },
    })
}
