mod manifest;
mod plot;

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use rgax::events::{filter_cohort, write_event_table, ColumnKind, ColumnSpec, Discipline, EventTable, FeatureEncoder, FeatureSpec, ParseOptions};
use rgax::gcm::{Direction, IntervalSpec, Sidedness};
use rgax::metrics::{evaluate_all, metric_outcomes, CrossFitting, EvaluationReport, MetricConfig, MetricKind, OutcomeMode};
use rgax::multiplicity::{adjust, AdjustmentMethod};
use rgax::regress::{load_model, save_model, FittedRegressor, Loss, Mtry, RegressorSpec, TuningGrid};
use rgax::sim::{self, CalibrationCell, CoxSimConfig, Estimator, Nonlinearity, PllmConfig};
use rgax::survival::{evaluate_riax, fit_hazard, HazardFamily, SurvivalTable};
use rgax::teams::{fit_team_strengths, MatchTable, DEFAULT_PERIOD_DAYS};
use rgax::{Error, ErrorKind};

use manifest::{beside, RunManifest};

#[derive(Parser)]
#[command(name = "rgax", version, about = "Classical and residualized player-evaluation metrics")]
struct Cli {
    /// Worker threads (0 = one per core). Outputs do not depend on it.
    #[arg(long, env = "RGAX_THREADS", global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train and save an outcome model.
    TrainOutcome(TrainArgs),
    /// Classical and residualized metrics for every actor in the cohort.
    Evaluate(EvaluateArgs),
    /// Fit bivariate Poisson team ratings.
    TeamStrength(TeamArgs),
    /// Synthetic data and calibration studies.
    #[command(subcommand)]
    Simulate(SimCommand),
    /// Multiplicity-adjust a column of p-values.
    Adjust(AdjustArgs),
    /// Render an SVG from plot-data CSV.
    #[command(subcommand)]
    Plot(PlotCommand),
}

#[derive(Args, Serialize)]
struct EventArgs {
    /// Event CSV.
    #[arg(long)]
    events: PathBuf,
    /// shot, shot-on-target, basketball-shot, pass or injury-spell.
    #[arg(long)]
    discipline: Option<String>,
    /// Preset (shot, post-shot, classic) or comma-separated `name[:kind]` list;
    /// kinds are numeric (default), categorical, binary and date.
    #[arg(long, default_value = "shot")]
    features: String,
    #[arg(long, default_value = "actor_id")]
    actor_column: String,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum FamilyArg {
    Gbt,
    Logistic,
    Forest,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum GridArg {
    /// Full tuning grid.
    Standard,
    /// One cell (boosting: rate 0.1, depth 3; forest: sqrt features, depth 5).
    Quick,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum ModeArg {
    Indicator,
    ScoreValue,
}

#[derive(Args, Serialize)]
struct TrainArgs {
    #[command(flatten)]
    input: EventArgs,
    #[arg(long, value_enum)]
    family: FamilyArg,
    #[arg(long, value_enum, default_value_t = GridArg::Standard)]
    grid: GridArg,
    /// Cross-validation folds for boosting.
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 500)]
    trees: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::Indicator)]
    outcome_mode: ModeArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Model file (JSON).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum MetricArg {
    Gax,
    Gsax,
    Qsi,
    Cpae,
    Iax,
}

impl MetricArg {
    fn kind(self) -> MetricKind {
        match self {
            MetricArg::Gax => MetricKind::Gax,
            MetricArg::Gsax => MetricKind::Gsax,
            MetricArg::Qsi => MetricKind::Qsi,
            MetricArg::Cpae => MetricKind::Cpae,
            MetricArg::Iax => MetricKind::Iax,
        }
    }

    fn discipline(self) -> Discipline {
        match self {
            MetricArg::Gax | MetricArg::Gsax => Discipline::Shot,
            MetricArg::Qsi => Discipline::BasketballShot,
            MetricArg::Cpae => Discipline::Pass,
            MetricArg::Iax => Discipline::InjurySpell,
        }
    }
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum SidedArg {
    Two,
    Lower,
    Upper,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum DirectionArg {
    TwoSided,
    Greater,
    Less,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum HazardArg {
    Cox,
    NelsonAalen,
}

impl HazardArg {
    fn family(self) -> HazardFamily {
        match self {
            HazardArg::Cox => HazardFamily::CoxBreslow,
            HazardArg::NelsonAalen => HazardFamily::NelsonAalen,
        }
    }
}

#[derive(Args, Serialize)]
struct EvaluateArgs {
    #[command(flatten)]
    input: EventArgs,
    #[arg(long, value_enum)]
    metric: MetricArg,
    /// Saved outcome model.
    #[arg(long, conflicts_with = "train")]
    outcome_model: Option<PathBuf>,
    /// Train the outcome model on the evaluation table.
    #[arg(long)]
    train: bool,
    #[arg(long, value_enum, default_value_t = FamilyArg::Gbt)]
    outcome_family: FamilyArg,
    #[arg(long, value_enum, default_value_t = FamilyArg::Forest)]
    propensity: FamilyArg,
    #[arg(long, value_enum, default_value_t = GridArg::Standard)]
    grid: GridArg,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 500)]
    trees: usize,
    /// auto (out-of-bag for forests, none otherwise), none, oob or kfold:K.
    #[arg(long, default_value = "auto")]
    cross_fitting: String,
    /// Refit the outcome model without each evaluated actor (needs --train).
    #[arg(long)]
    exclude_actor: bool,
    #[arg(long, default_value_t = 1)]
    min_units: usize,
    #[arg(long, default_value_t = 0)]
    min_positive: usize,
    /// holm, bh, by or none.
    #[arg(long, default_value = "bh")]
    adjust: String,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[arg(long, value_enum, default_value_t = SidedArg::Two)]
    sided: SidedArg,
    /// Fixed critical value replacing the normal quantile.
    #[arg(long)]
    critical_value: Option<f64>,
    /// Null value for the per-actor test.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    rho0: f64,
    #[arg(long, value_enum, default_value_t = DirectionArg::TwoSided)]
    direction: DirectionArg,
    #[arg(long, value_enum, default_value_t = ModeArg::Indicator)]
    outcome_mode: ModeArg,
    /// Hazard model for iax.
    #[arg(long, value_enum, default_value_t = HazardArg::Cox)]
    hazard: HazardArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct TeamArgs {
    /// Match CSV.
    #[arg(long)]
    matches: PathBuf,
    /// Half-life of the recency weights in days.
    #[arg(long, default_value_t = DEFAULT_PERIOD_DAYS)]
    period: f64,
    /// Reference date (YYYY-MM-DD); defaults to the latest match.
    #[arg(long)]
    asof: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum NonlinearityArg {
    SineProduct,
    Zero,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum EstimatorArg {
    Oracle,
    OracleConstant,
    Forest,
    Logistic,
}

#[derive(Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
enum SimCommand {
    /// Partially linear logistic model draws as a shot table.
    Pllm {
        #[arg(long, default_value_t = 2000)]
        n: usize,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        beta: f64,
        #[arg(long, default_value_t = 3)]
        dim_z: usize,
        #[arg(long, value_enum, default_value_t = NonlinearityArg::SineProduct)]
        nonlinearity: NonlinearityArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Bivariate Poisson league.
    League {
        #[arg(long, default_value_t = 6)]
        teams: usize,
        #[arg(long, default_value_t = 600)]
        matches: usize,
        #[arg(long, default_value_t = 0.1)]
        lambda_c: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Exponential proportional-hazards spells as an injury table.
    Cox {
        #[arg(long, default_value_t = 500)]
        n: usize,
        #[arg(long, value_delimiter = ',', default_value = "0.5,-0.3", allow_negative_numbers = true)]
        coefficients: Vec<f64>,
        #[arg(long, default_value_t = 0.3)]
        censoring_rate: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rejection rate of the residualized test on PLLM draws.
    Calibrate {
        #[arg(long, value_enum, default_value_t = EstimatorArg::Oracle)]
        estimator: EstimatorArg,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        beta: f64,
        #[arg(long, default_value_t = 2000)]
        n: usize,
        #[arg(long, default_value_t = 500)]
        replications: usize,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, value_enum, default_value_t = DirectionArg::TwoSided)]
        direction: DirectionArg,
        #[arg(long, default_value_t = 100)]
        trees: usize,
        #[arg(long, default_value_t = 5)]
        depth: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Serialize)]
struct AdjustArgs {
    /// CSV with a p-value column.
    #[arg(long)]
    pvalues: PathBuf,
    /// holm, bh, by or none.
    #[arg(long, default_value = "bh")]
    method: String,
    #[arg(long, default_value = "p")]
    column: String,
    /// Output CSV; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum PlotCommand {
    /// Classical against residualized metric.
    Scatter {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Ranked estimates with intervals.
    Intervals {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn feature_spec(text: &str) -> Result<FeatureSpec> {
    Ok(match text {
        "shot" => FeatureSpec::shot_features(),
        "post-shot" => FeatureSpec::post_shot_features(),
        "classic" => FeatureSpec::classic_features(),
        list => FeatureSpec::new(
            list.split(',')
                .map(|item| {
                    let (name, kind) = item.split_once(':').unwrap_or((item, "numeric"));
                    let kind = match kind {
                        "numeric" => ColumnKind::Numeric,
                        "categorical" => ColumnKind::Categorical,
                        "binary" => ColumnKind::Binary,
                        "date" => ColumnKind::Date,
                        other => return Err(Error::Config(format!("unknown column kind `{other}`"))),
                    };
                    Ok(ColumnSpec::new(name.trim(), kind))
                })
                .collect::<rgax::Result<_>>()?,
        ),
    })
}

fn load_events(args: &EventArgs, default: Discipline) -> Result<EventTable> {
    let discipline = match &args.discipline {
        Some(d) => d.parse::<Discipline>()?,
        None => default,
    };
    let options = ParseOptions {
        actor_column: args.actor_column.clone(),
        ..ParseOptions::default()
    };
    Ok(options.parse_path(&args.events, &feature_spec(&args.features)?, discipline)?)
}

fn regressor(family: FamilyArg, grid: GridArg, folds: usize, trees: usize, binary: bool) -> Result<RegressorSpec> {
    let mut g = match (family, grid) {
        (FamilyArg::Gbt, GridArg::Quick) => TuningGrid::single_gbt(0.1, 3),
        (FamilyArg::Forest, GridArg::Quick) => TuningGrid::single_forest(trees, Mtry::Sqrt, 5),
        _ => TuningGrid::standard(),
    };
    g.folds = folds;
    g.trees = trees;
    Ok(match family {
        FamilyArg::Gbt => RegressorSpec::Gbt {
            grid: g,
            loss: if binary { Loss::Logistic } else { Loss::Squared },
        },
        FamilyArg::Forest => RegressorSpec::Forest {
            grid: g,
            probability: binary,
        },
        FamilyArg::Logistic if binary => RegressorSpec::Logistic,
        FamilyArg::Logistic => return Err(Error::Config("logistic regression needs binary outcomes".into()).into()),
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn train_outcome(args: &TrainArgs) -> Result<()> {
    let table = load_events(&args.input, Discipline::Shot)?;
    let mode = match args.outcome_mode {
        ModeArg::Indicator => OutcomeMode::Indicator,
        ModeArg::ScoreValue => OutcomeMode::ScoreValue,
    };
    let y = if mode == OutcomeMode::ScoreValue { table.outcomes() } else { table.indicator_outcomes() };
    let spec = regressor(args.family, args.grid, args.folds, args.trees, mode == OutcomeMode::Indicator)?;
    let encoder = FeatureEncoder::fit(&table)?;
    let model = spec.fit_table(&table, &encoder, &y, args.seed)?;
    save_model(&model, &args.out)?;

    let d = model.diagnostics();
    let mut out = io::stdout().lock();
    writeln!(out, "family: {:?}, training rows: {}, iterations: {}", model.family(), d.training_rows, d.iterations)?;
    for (k, v) in model.hyperparameters() {
        writeln!(out, "  {k} = {v}")?;
    }
    if !d.cv_table.is_empty() {
        writeln!(out, "learning_rate,max_depth,best_rounds,mean_valid_loss")?;
        for c in &d.cv_table {
            writeln!(out, "{},{},{},{}", c.learning_rate, c.max_depth, c.best_rounds, c.mean_valid_loss)?;
        }
    }
    if !d.oob_table.is_empty() {
        writeln!(out, "mtry,max_depth,oob_loss")?;
        for c in &d.oob_table {
            writeln!(out, "{},{},{}", c.mtry, c.max_depth, c.oob_loss)?;
        }
    }
    if let Some(ll) = d.log_likelihood {
        writeln!(out, "log-likelihood: {ll}")?;
    }

    let mut m = RunManifest::new("train-outcome", args, Some(args.seed), &[&args.input.events])?;
    m.output(&args.out);
    m.write(&beside(&args.out))
}

fn metric_config(args: &EvaluateArgs) -> Result<MetricConfig> {
    let binary = !matches!(args.outcome_mode, ModeArg::ScoreValue);
    let propensity = regressor(args.propensity, args.grid, args.folds, args.trees, true)?;
    let cross_fitting = match args.cross_fitting.as_str() {
        "auto" if matches!(args.propensity, FamilyArg::Forest) => CrossFitting::Oob,
        "auto" | "none" => CrossFitting::None,
        "oob" => CrossFitting::Oob,
        other => match other.strip_prefix("kfold:").and_then(|k| k.parse().ok()) {
            Some(k) => CrossFitting::KFold(k),
            None => return Err(Error::Config(format!("unknown cross-fitting `{other}`")).into()),
        },
    };
    let outcome_refit = if args.train && (args.exclude_actor || matches!(cross_fitting, CrossFitting::KFold(_))) {
        Some(regressor(args.outcome_family, args.grid, args.folds, args.trees, binary)?)
    } else {
        None
    };
    let mut interval = IntervalSpec::new(
        args.level,
        match args.sided {
            SidedArg::Two => Sidedness::TwoSided,
            SidedArg::Lower => Sidedness::LowerOneSided,
            SidedArg::Upper => Sidedness::UpperOneSided,
        },
    )?;
    interval.rho0 = args.rho0;
    interval.critical_value = args.critical_value;
    Ok(MetricConfig {
        metric: args.metric.kind(),
        outcome_mode: if binary { OutcomeMode::Indicator } else { OutcomeMode::ScoreValue },
        propensity,
        cross_fitting,
        outcome_refit,
        exclude_actor: args.exclude_actor,
        interval,
        direction: direction(args.direction),
        adjustment: args.adjust.parse::<AdjustmentMethod>()?,
        seed: args.seed,
    })
}

fn direction(d: DirectionArg) -> Direction {
    match d {
        DirectionArg::TwoSided => Direction::TwoSided,
        DirectionArg::Greater => Direction::Greater,
        DirectionArg::Less => Direction::Less,
    }
}

fn evaluate(args: &EvaluateArgs) -> Result<()> {
    let config = metric_config(args)?;
    let mut table = load_events(&args.input, args.metric.discipline())?;
    if args.metric == MetricArg::Gsax && table.discipline() == Discipline::Shot {
        table = table.on_target_only()?;
    }
    config.validate(&table)?;
    let cohort = filter_cohort(&table, args.min_units, args.min_positive);
    if cohort.is_empty() {
        return Err(Error::InvalidInput("no actor passes the cohort filter".into()).into());
    }
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let mut inputs = vec![args.input.events.as_path()];
    let mut written = Vec::new();

    let report: EvaluationReport = if args.metric == MetricArg::Iax {
        let survival = SurvivalTable::from_events(&table, None)?;
        let hazard = fit_hazard(&survival, args.hazard.family())?;
        evaluate_riax(&survival, &cohort, &hazard, &config)?
    } else {
        let model: FittedRegressor = match (&args.outcome_model, args.train) {
            (Some(path), _) => {
                inputs.push(path);
                load_model(path)?
            }
            (None, true) => {
                let spec = regressor(args.outcome_family, args.grid, args.folds, args.trees, config.outcome_mode == OutcomeMode::Indicator)?;
                let encoder = FeatureEncoder::fit(&table)?;
                let model = spec.fit_table(&table, &encoder, &metric_outcomes(&table, &config), args.seed)?;
                let path = args.out.join("outcome-model.json");
                save_model(&model, &path)?;
                written.push(path);
                model
            }
            (None, false) => return Err(Error::Config("pass --outcome-model FILE or --train".into()).into()),
        };
        evaluate_all(&table, &cohort, &model, &config)?
    };

    let json = args.out.join("report.json");
    fs::write(&json, report.to_json()? + "\n").with_context(|| format!("writing {}", json.display()))?;
    let csv_path = args.out.join("report.csv");
    report.write_csv(create(&csv_path)?)?;
    let scatter = args.out.join("scatter.csv");
    report.write_scatter_csv(create(&scatter)?)?;
    let intervals = args.out.join("intervals.csv");
    report.write_interval_csv(create(&intervals)?)?;
    let scatter_svg = args.out.join("scatter.svg");
    render(&scatter, &scatter_svg, plot::scatter_svg)?;
    let intervals_svg = args.out.join("intervals.svg");
    render(&intervals, &intervals_svg, plot::interval_svg)?;
    written.extend([json, csv_path, scatter, intervals, scatter_svg, intervals_svg]);

    eprintln!(
        "{} actors evaluated, {} failed; Pearson R = {}",
        report.actors.len(),
        report.failures.len(),
        report.pearson_r.map_or("n/a".into(), |r| format!("{r:.4}"))
    );
    let mut m = RunManifest::new("evaluate", args, Some(args.seed), &inputs)?;
    for p in &written {
        m.output(p);
    }
    m.write(&args.out.join("manifest.json"))
}

fn render(data: &Path, out: &Path, f: fn(&str) -> Result<String>) -> Result<()> {
    let text = fs::read_to_string(data).with_context(|| format!("reading {}", data.display()))?;
    fs::write(out, f(&text)?).with_context(|| format!("writing {}", out.display()))
}

fn team_strength(args: &TeamArgs) -> Result<()> {
    let table = MatchTable::read_path(&args.matches)?;
    let asof = match &args.asof {
        Some(s) => Some(NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|e| Error::Config(format!("--asof `{s}`: {e}")))?),
        None => None,
    };
    let strengths = fit_team_strengths(&table, asof, args.period)?;
    fs::create_dir_all(&args.out)?;
    let csv_path = args.out.join("strengths.csv");
    strengths.write_csv(create(&csv_path)?)?;
    let json = args.out.join("strengths.json");
    fs::write(&json, strengths.to_json()? + "\n")?;
    let mut m = RunManifest::new("team-strength", args, None, &[&args.matches])?;
    m.output(&csv_path);
    m.output(&json);
    m.write(&args.out.join("manifest.json"))
}

fn simulate(cmd: &SimCommand) -> Result<()> {
    let (out, seed) = match cmd {
        SimCommand::Pllm { n, beta, dim_z, nonlinearity, seed, out } => {
            let config = PllmConfig {
                n: *n,
                beta: *beta,
                dim_z: *dim_z,
                nonlinearity: match nonlinearity {
                    NonlinearityArg::SineProduct => Nonlinearity::SineProduct,
                    NonlinearityArg::Zero => Nonlinearity::Zero,
                },
                propensity: rgax::sim::PropensityLaw::Linear {
                    intercept: -0.5,
                    coefficients: [0.8, -0.5, 0.3].into_iter().cycle().take(*dim_z).collect(),
                },
                seed: *seed,
                ..PllmConfig::default()
            };
            write_event_table(&sim::simulate_pllm(&config)?, create(out)?)?;
            (out, *seed)
        }
        SimCommand::League { teams, matches, lambda_c, seed, out } => {
            let truth = sim::league_truth(*teams, *lambda_c)?;
            sim::simulate_league(&truth, *matches, *seed)?.write(create(out)?)?;
            (out, *seed)
        }
        SimCommand::Cox { n, coefficients, censoring_rate, seed, out } => {
            let config = CoxSimConfig {
                n: *n,
                coefficients: coefficients.clone(),
                censoring_rate: *censoring_rate,
                seed: *seed,
                ..CoxSimConfig::default()
            };
            write_event_table(&sim::simulate_cox(&config)?.to_event_table()?, create(out)?)?;
            (out, *seed)
        }
        SimCommand::Calibrate { estimator, beta, n, replications, alpha, direction: dir, trees, depth, seed, out } => {
            let estimator = match estimator {
                EstimatorArg::Oracle => Estimator::Oracle,
                EstimatorArg::OracleConstant => Estimator::OracleOutcomeConstantPropensity,
                EstimatorArg::Forest => Estimator::ForestOob {
                    trees: *trees,
                    mtry: Mtry::All,
                    depth: *depth,
                },
                EstimatorArg::Logistic => Estimator::Logistic,
            };
            let cell = CalibrationCell {
                replications: *replications,
                alpha: *alpha,
                direction: direction(*dir),
                ..CalibrationCell::new(
                    "cli",
                    PllmConfig {
                        n: *n,
                        beta: *beta,
                        seed: *seed,
                        ..PllmConfig::default()
                    },
                    estimator,
                )
            };
            let result = sim::run_calibration_cell(&cell)?;
            sim::write_calibration_csv(std::slice::from_ref(&result), create(out)?)?;
            eprintln!(
                "rejection rate {} (band [{:.4}, {:.4}]), {} failures",
                result.rejection_rate, result.band_lower, result.band_upper, result.failures
            );
            (out, *seed)
        }
    };
    let name = match cmd {
        SimCommand::Pllm { .. } => "simulate pllm",
        SimCommand::League { .. } => "simulate league",
        SimCommand::Cox { .. } => "simulate cox",
        SimCommand::Calibrate { .. } => "simulate calibrate",
    };
    let mut m = RunManifest::new(name, cmd, Some(seed), &[])?;
    m.output(out);
    m.write(&beside(out))
}

fn adjust_cmd(args: &AdjustArgs) -> Result<()> {
    let method: AdjustmentMethod = args.method.parse()?;
    let mut rdr = csv::Reader::from_path(&args.pvalues).with_context(|| format!("reading {}", args.pvalues.display()))?;
    let header = rdr.headers()?.clone();
    let col = header
        .iter()
        .position(|h| h == args.column)
        .ok_or_else(|| Error::MissingColumn(args.column.clone()))?;
    let records: Vec<csv::StringRecord> = rdr.records().collect::<Result<_, _>>()?;
    let p: Vec<f64> = records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            r[col].trim().parse::<f64>().map_err(|_| Error::NonNumeric {
                row: i + 1,
                column: args.column.clone(),
                value: r[col].to_string(),
            })
        })
        .collect::<rgax::Result<_>>()?;
    let adjusted = adjust(&p, method)?;

    let sink: Box<dyn Write> = match &args.out {
        Some(path) => Box::new(create(path)?),
        None => Box::new(io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(sink);
    let mut head: Vec<&str> = header.iter().collect();
    head.push("p_adjusted");
    w.write_record(&head)?;
    for (r, a) in records.iter().zip(&adjusted) {
        let mut rec: Vec<String> = r.iter().map(str::to_string).collect();
        rec.push(a.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    drop(w);
    if let Some(path) = &args.out {
        let mut m = RunManifest::new("adjust", args, None, &[&args.pvalues])?;
        m.output(path);
        m.write(&beside(path))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
        .map_err(|e| anyhow!("thread pool: {e}"))?;
    match &cli.command {
        Command::TrainOutcome(a) => train_outcome(a),
        Command::Evaluate(a) => evaluate(a),
        Command::TeamStrength(a) => team_strength(a),
        Command::Simulate(c) => simulate(c),
        Command::Adjust(a) => adjust_cmd(a),
        Command::Plot(PlotCommand::Scatter { data, out }) => render(data, out, plot::scatter_svg),
        Command::Plot(PlotCommand::Intervals { data, out }) => render(data, out, plot::interval_svg),
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.chain().find_map(|c| c.downcast_ref::<Error>()).map(Error::kind) {
        Some(ErrorKind::Usage) => 2,
        Some(ErrorKind::Numeric) => 4,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
