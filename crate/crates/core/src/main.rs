//! `dfl` command-line front end.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use dfl_core::data::{
    generate_insurance, insurance_schema, load_csv, make_b2_env, simulate_records, write_csv, write_insurance_csv,
    CsvSchema, Dataset, DiscreteEnv,
};
use dfl_core::existence::{existence_cf, existence_report, ExistenceReport};
use dfl_core::fairness::{MetricConfig, MetricReport, Notion, PolicyEvaluator, Scores, Variant};
use dfl_core::harness::{
    b2_demo, emit_report, fit_method, run_experiment, ExperimentConfig, Fitted, FittedModels, ReportFormat, Scenario,
};
use dfl_core::nuisance::Family;
use dfl_core::policy::Policy;
use dfl_core::rng::{self, Purpose};
use dfl_core::solver::Method;
use dfl_core::{Error, Result};

#[derive(Parser)]
#[command(name = "dfl", version, about = "Double-fairness policy learning")]
struct Cli {
    /// Master seed; overrides the configuration file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Concurrent replications (0 = all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SimKind {
    Simulation,
    Insurance,
    B2,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemaKind {
    /// Columns s, a, r1, [r2], x1..xd.
    Standard,
    Insurance,
}

#[derive(Clone, Copy, ValueEnum)]
enum NotionArg {
    Eo,
    Cf,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Squared,
    Absolute,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Linear,
    Logistic,
}

#[derive(clap::Args)]
struct MetricArgs {
    #[arg(long, value_enum, default_value = "eo")]
    notion: NotionArg,
    #[arg(long, value_enum, default_value = "squared")]
    variant: VariantArg,
}

impl MetricArgs {
    fn config(&self) -> MetricConfig {
        MetricConfig {
            notion: match self.notion {
                NotionArg::Eo => Notion::EqualOpportunity,
                NotionArg::Cf => Notion::Counterfactual,
            },
            variant: match self.variant {
                VariantArg::Squared => Variant::Squared,
                VariantArg::Absolute => Variant::Absolute,
            },
        }
    }
}

#[derive(clap::Args)]
struct DataArgs {
    /// Input CSV.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value = "standard")]
    schema: SchemaKind,
    #[arg(long, value_enum, default_value = "linear")]
    family: FamilyArg,
}

impl DataArgs {
    fn load(&self) -> Result<Dataset> {
        let schema = match self.schema {
            SchemaKind::Standard => standard_schema(&self.data)?,
            SchemaKind::Insurance => insurance_schema(),
        };
        load_csv(&self.data, &schema)
    }

    fn family(&self) -> Family {
        match self.family {
            FamilyArg::Linear => Family::LinearGaussian,
            FamilyArg::Logistic => Family::Logistic,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset as CSV.
    Simulate {
        #[arg(long, value_enum, default_value = "simulation")]
        kind: SimKind,
        #[arg(long, default_value_t = 200)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit one method on a CSV and write the rule as JSON.
    Fit {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value = "DFL")]
        method: Method,
        /// Experiment configuration whose `[dfl]` section is used.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        metric: MetricArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a fitted rule on a CSV with models fitted on that CSV.
    Evaluate {
        #[command(flatten)]
        data: DataArgs,
        /// Output of `fit`, or a bare policy JSON.
        #[arg(long)]
        policy: PathBuf,
        #[command(flatten)]
        metric: MetricArgs,
    },
    /// Check fair-policy existence on a discrete environment.
    Existence {
        /// Environment JSON; the three-rule example when omitted.
        #[arg(long)]
        env: Option<PathBuf>,
        /// Counterfactual pairs `j0:j1` of support indices.
        #[arg(long, value_delimiter = ',')]
        pairs: Vec<String>,
        #[arg(long)]
        json: bool,
    },
    /// Tchebyshev versus linear scalarization on the three-rule example.
    B2Demo {
        #[arg(long, default_value_t = 99)]
        k: usize,
        #[arg(long)]
        json: bool,
    },
    /// Run a replication experiment and emit its report files.
    Report {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        scenario: Option<ScenarioArg>,
        #[arg(long)]
        replications: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        methods: Vec<Method>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Formats to emit: csv, json, svg-scatter, svg-radar (default all).
        #[arg(long, value_delimiter = ',')]
        format: Vec<ReportFormat>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioArg {
    Simulation,
    B2Demo,
    Csv,
}

/// Standard schema sized from the header: `x1..xd` covariates and an
/// optional `r2` column.
fn standard_schema(path: &Path) -> Result<CsvSchema> {
    let mut rd = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path.display().to_string(), io),
        other => Error::Data(format!("{other:?}")),
    })?;
    let headers = rd.headers().map_err(|e| Error::Data(e.to_string()))?;
    let dim = (1..).take_while(|j| headers.iter().any(|h| h == format!("x{j}"))).count();
    let has_r2 = headers.iter().any(|h| h == "r2");
    Ok(CsvSchema::standard(dim, has_r2))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Data(e.to_string()))?;
    println!("{text}");
    Ok(())
}

fn write_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => {
            let text = serde_json::to_string_pretty(value).map_err(|e| Error::Data(e.to_string()))?;
            std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
        }
        None => print_json(value),
    }
}

#[derive(Serialize)]
struct FitOutput {
    method: Method,
    policy: Policy,
    train_scores: Option<Scores>,
    kappa: Option<f64>,
    chosen_alpha: Option<f64>,
}

fn simulate(kind: SimKind, n: usize, seed: u64, out: &Path) -> Result<()> {
    match kind {
        SimKind::Simulation => write_csv(&simulate_records(n, &mut rng::replication_stream(seed, 0, Purpose::Train)), out),
        SimKind::Insurance => write_insurance_csv(&generate_insurance(n, seed), out),
        SimKind::B2 => {
            let data = make_b2_env().sample(n, 1.0, &mut rng::replication_stream(seed, 0, Purpose::Train))?;
            write_csv(&data, out)
        }
    }
}

fn fit(data_args: &DataArgs, method: Method, config: Option<&Path>, metric: MetricConfig, seed: Option<u64>, out: Option<&Path>) -> Result<()> {
    let data = data_args.load()?;
    let mut cfg = match config {
        Some(p) => ExperimentConfig::load(p)?.dfl,
        None => Default::default(),
    };
    cfg.metric = metric;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let models = FittedModels::fit(&data, data_args.family(), metric.notion == Notion::Counterfactual)?;
    let fitted = fit_method(method, &data, models.view(), &cfg)?;
    let output = match fitted {
        Fitted::Dfl(f) => FitOutput {
            method,
            chosen_alpha: f.alphas().get(f.chosen_alpha_index).copied(),
            policy: f.policy,
            train_scores: Some(f.scores),
            kappa: Some(f.kappa),
        },
        Fitted::Baseline(b) => FitOutput {
            method,
            policy: b.policy,
            train_scores: b.scores,
            kappa: b.kappa,
            chosen_alpha: None,
        },
    };
    write_json(&output, out)
}

fn evaluate(data_args: &DataArgs, policy_path: &Path, metric: MetricConfig) -> Result<MetricReport> {
    let data = data_args.load()?;
    let raw: serde_json::Value = read_json(policy_path)?;
    let raw = raw.get("policy").cloned().unwrap_or(raw);
    let policy: Policy = serde_json::from_value(raw).map_err(|e| Error::Config(format!("policy: {e}")))?;
    policy.check_compatible(&data)?;
    let models = FittedModels::fit(&data, data_args.family(), metric.notion == Notion::Counterfactual)?;
    let ev = PolicyEvaluator::new(&data, &models.primary, &models.fairness, models.shift.as_ref(), metric)?;
    Ok(ev.report(&policy))
}

fn parse_pairs(raw: &[String]) -> Result<Vec<(usize, usize)>> {
    raw.iter()
        .map(|p| {
            let (a, b) = p
                .split_once(':')
                .ok_or_else(|| Error::Config(format!("pair `{p}` is not of the form j0:j1")))?;
            let parse = |t: &str| t.trim().parse::<usize>().map_err(|_| Error::Config(format!("bad index in `{p}`")));
            Ok((parse(a)?, parse(b)?))
        })
        .collect()
}

fn print_existence(env: &DiscreteEnv, report: &ExistenceReport) {
    println!("{:>8} {:>24} {:>4} {:>10} {:>6} {:>10}", "x", "x(1)", "A1", "A2(i-iii)", "OF", "DF prob");
    for c in &report.cells {
        let (j0, j1) = c.x_index;
        let fmt = |j: usize| format!("{:?}", env.x_support[j]);
        let a2 = &c.assumption2;
        let flags = format!(
            "{}{}{}",
            if a2.i { 'y' } else { 'n' },
            if a2.ii { 'y' } else { 'n' },
            if a2.iii { 'y' } else { 'n' }
        );
        let df = c.double_fair_prob.map_or("-".to_string(), |p| format!("{p:.6}"));
        let x1 = if j0 == j1 { String::new() } else { fmt(j1) };
        println!(
            "{:>8} {:>24} {:>4} {:>10} {:>6} {:>10}",
            fmt(j0),
            x1,
            if c.assumption1 { "y" } else { "n" },
            flags,
            if c.outcome_fair { "y" } else { "n" },
            df
        );
    }
    println!(
        "outcome-fair policy exists: {}; double-fair policy exists: {}",
        report.outcome_fair_exists, report.double_fair_exists
    );
}

#[allow(clippy::too_many_arguments)]
fn report(
    config: Option<&Path>,
    scenario: Option<ScenarioArg>,
    replications: Option<usize>,
    methods: &[Method],
    output_dir: Option<&Path>,
    formats: &[ReportFormat],
    seed: Option<u64>,
    workers: Option<usize>,
) -> Result<()> {
    let mut cfg = match config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = scenario {
        cfg.scenario = match s {
            ScenarioArg::Simulation => Scenario::Simulation,
            ScenarioArg::B2Demo => Scenario::B2Demo,
            ScenarioArg::Csv => Scenario::Csv,
        };
    }
    if let Some(r) = replications {
        cfg.replications = r;
    }
    if !methods.is_empty() {
        cfg.methods = methods.to_vec();
    }
    if let Some(d) = output_dir {
        cfg.output_dir = d.to_path_buf();
    }
    if seed.is_some() {
        cfg.seed = seed;
    }
    if let Some(w) = workers {
        cfg.workers = w;
    }
    let report = run_experiment(&cfg)?;
    std::fs::create_dir_all(&cfg.output_dir).map_err(|e| Error::io(cfg.output_dir.display().to_string(), e))?;
    let formats = if formats.is_empty() { &ReportFormat::ALL[..] } else { formats };
    for &f in formats {
        let path = emit_report(&report, f, &cfg.output_dir)?;
        eprintln!("wrote {}", path.display());
    }
    println!("{:<22} {:>4} {:>18} {:>18} {:>18}", "method", "n", "delta1", "delta2", "value");
    for a in &report.aggregates {
        println!(
            "{:<22} {:>4} {:>9.4} ({:.4}) {:>9.4} ({:.4}) {:>9.4} ({:.4})",
            a.method, a.n, a.delta1.mean, a.delta1.se, a.delta2.mean, a.delta2.se, a.value.mean, a.value.se
        );
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { kind, n, out } => simulate(kind, n, cli.seed.unwrap_or(2024), &out),
        Command::Fit {
            data,
            method,
            config,
            metric,
            out,
        } => fit(&data, method, config.as_deref(), metric.config(), cli.seed, out.as_deref()),
        Command::Evaluate { data, policy, metric } => print_json(&evaluate(&data, &policy, metric.config())?),
        Command::Existence { env, pairs, json } => {
            let env = match env {
                Some(p) => read_json::<DiscreteEnv>(&p)?,
                None => make_b2_env(),
            };
            env.validate()?;
            let report = if pairs.is_empty() {
                existence_report(&env)?
            } else {
                existence_cf(&env, &parse_pairs(&pairs)?)?
            };
            if json {
                print_json(&report)
            } else {
                print_existence(&env, &report);
                Ok(())
            }
        }
        Command::B2Demo { k, json } => {
            let demo = b2_demo(k)?;
            if json {
                return print_json(&demo);
            }
            println!("{:<6} {:>8} {:>8} {:>8}", "rule", "delta1", "delta2", "value");
            for r in &demo.triples {
                println!("{:<6} {:>8.3} {:>8.3} {:>8.3}", r.name, r.delta1, r.delta2, r.value);
            }
            println!("Tchebyshev (K={k}) recovers: {}", demo.tchebyshev_recovered.join(", "));
            println!("linear scalarization recovers: {}", demo.linear_recovered.join(", "));
            Ok(())
        }
        Command::Report {
            config,
            scenario,
            replications,
            methods,
            output_dir,
            format,
        } => report(
            config.as_deref(),
            scenario,
            replications,
            &methods,
            output_dir.as_deref(),
            &format,
            cli.seed,
            cli.workers,
        ),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
