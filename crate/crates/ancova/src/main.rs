use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use ancova::analysis::{analyze, Analysis, AnalysisOptions};
use ancova::output::{Cell, Format, Table};
use ancova::reproduce::{judge, verdict_table, SuiteOptions};
use ancova::sweep::{summary_table, sweep, SweepOptions};
use ancova::{json, load_csv, scenarios, Error, Parallel, Result};
use ancova_core::asymptotics::DEFAULT_ORACLE_SEED;
use ancova_core::{AsymptoticLimits, BruteForceConfig, Reference, VarianceKind};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "ancova", version, about = "Covariate-adjusted treatment effects for two-arm trials")]
struct Cli {
    /// Output format for results printed to stdout.
    #[arg(long, value_enum, default_value_t = Format::Table, global = true)]
    format: Format,

    /// Worker threads for simulations (default: one per core). Results do
    /// not depend on this value.
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the treatment effect and its standard errors from a CSV file.
    Analyze(AnalyzeArgs),
    /// Limiting variances and the bias diagnosis for a data-generating process.
    Limits(LimitsArgs),
    /// Run one or more simulation plans and write their reports.
    Simulate(SimulateArgs),
    /// Run the bundled scenario suite and judge it against the limits.
    Reproduce(ReproduceArgs),
}

#[derive(Args)]
struct AnalyzeArgs {
    /// CSV with columns Y, A and any covariates.
    #[arg(long)]
    input: PathBuf,
    /// Comma-separated variance estimators (default: all).
    #[arg(long, value_delimiter = ',')]
    estimators: Option<Vec<VarianceKind>>,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    /// Treatment effect under the null hypothesis.
    #[arg(long = "null", default_value_t = 0.0, allow_negative_numbers = true)]
    null_value: f64,
    /// Use Student t references instead of the standard normal.
    #[arg(long)]
    t_reference: bool,
    /// Directory to also write the result into.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct LimitsArgs {
    /// JSON data-generating process, bare or inside a simulation plan.
    #[arg(long)]
    input: PathBuf,
    /// Draws for the brute-force route.
    #[arg(long, default_value_t = 10_000_000)]
    draws: u64,
    /// Seed for the brute-force route.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct Overrides {
    /// Replace the plan seed (plan i gets seed + i).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    reps: Option<u64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    level: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    estimators: Option<Vec<VarianceKind>>,
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON plan or array of plans.
    #[arg(long)]
    input: PathBuf,
    /// Directory for reports, summary tables and the manifest.
    #[arg(long)]
    output: PathBuf,
    /// Also write one CSV row per replication.
    #[arg(long)]
    dump: bool,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct ReproduceArgs {
    /// Scenarios to run (default: the whole suite).
    scenarios: Vec<String>,
    /// 2000 replications per scenario; model-based estimators are judged on
    /// bias direction only.
    #[arg(long)]
    fast: bool,
    /// Directory for reports, summary tables and verdicts.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Print the available scenarios and exit.
    #[arg(long)]
    list: bool,
    #[command(flatten)]
    overrides: Overrides,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: &Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Analyze(args) => cmd_analyze(args, cli.format),
        Command::Limits(args) => cmd_limits(args, cli),
        Command::Simulate(args) => cmd_simulate(args, cli),
        Command::Reproduce(args) => cmd_reproduce(args, cli),
    }
}

fn write_file(dir: &Path, name: &str, text: &str) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.into(), source: e })?;
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| Error::Io { path, source: e })
}

fn extension(format: Format) -> &'static str {
    match format {
        Format::Table => "txt",
        Format::Csv => "csv",
        Format::Json => "json",
    }
}

fn check_level(level: f64) -> Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(Error::Usage(format!("--level {level} is outside (0, 1)")))
    }
}

fn analysis_table(a: &Analysis) -> Table {
    let mut t = Table::new(&[
        "estimator", "target", "estimate", "std_error", "statistic", "p_value", "ci_lower",
        "ci_upper", "dof",
    ]);
    for r in &a.estimators {
        t.push(vec![
            r.estimator.as_str().into(),
            match r.target {
                ancova_core::estimators::EstimateTarget::Ancova => "ancova",
                ancova_core::estimators::EstimateTarget::Unadjusted => "unadjusted",
            }
            .into(),
            r.estimate.into(),
            r.std_error.into(),
            r.statistic.into(),
            r.p_value.into(),
            r.ci_lower.into(),
            r.ci_upper.into(),
            r.dof.into(),
        ]);
    }
    t
}

fn render_analysis(a: &Analysis, format: Format) -> String {
    match format {
        Format::Json => json::to_pretty(a),
        Format::Csv => analysis_table(a).to_csv(),
        Format::Table => {
            let mut out = format!(
                "n = {} ({} treated, {} control), k = {}, treated fraction = {:.4}\n\
                 unadjusted estimate: {:.6}\nancova estimate:     {:.6}\n\
                 null = {}, level = {}\n\n",
                a.n, a.n_treated, a.n_control, a.k, a.pi_hat, a.unadjusted_estimate,
                a.ancova_estimate, a.null_value, a.level
            );
            out.push_str(&analysis_table(a).to_text());
            out
        }
    }
}

fn cmd_analyze(args: &AnalyzeArgs, format: Format) -> Result<ExitCode> {
    check_level(args.level)?;
    let data = load_csv(&args.input)?;
    let options = AnalysisOptions {
        estimators: args.estimators.clone().unwrap_or_else(|| VarianceKind::ALL.to_vec()),
        level: args.level,
        null_value: args.null_value,
        reference: if args.t_reference { Reference::StudentT } else { Reference::Normal },
    };
    let result = analyze(&data, &options)?;
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    let text = render_analysis(&result, format);
    print!("{text}");
    if let Some(dir) = &args.output {
        write_file(dir, &format!("analysis.{}", extension(format)), &text)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn limits_table(l: &AsymptoticLimits) -> Table {
    let mut t = Table::new(&["quantity", "value", "mc_se"]);
    let se = l.standard_errors.as_ref();
    let route = match l.route {
        ancova_core::LimitRoute::Analytic => "analytic",
        ancova_core::LimitRoute::BruteForce => "brute_force",
    };
    let direction = match l.diagnosis.direction {
        ancova_core::BiasDirection::Conservative => "conservative",
        ancova_core::BiasDirection::Anticonservative => "anticonservative",
        ancova_core::BiasDirection::Exact => "exact",
    };
    t.push(vec!["route".into(), route.into(), Cell::Empty]);
    t.push(vec!["pi".into(), l.pi.into(), Cell::Empty]);
    t.push(vec!["delta".into(), l.delta.into(), Cell::Empty]);
    t.push(vec!["beta0".into(), l.beta_under.beta0.into(), se.map(|s| s.beta0).into()]);
    t.push(vec!["beta_a".into(), l.beta_under.beta_a.into(), se.map(|s| s.beta_a).into()]);
    for (j, b) in l.beta_under.beta_w.iter().enumerate() {
        let e = se.map(|s| s.beta_w[j]);
        t.push(vec![format!("beta_w[{j}]").into(), (*b).into(), e.into()]);
    }
    t.push(vec!["v1".into(), l.v1.into(), se.map(|s| s.v1).into()]);
    t.push(vec!["v0".into(), l.v0.into(), se.map(|s| s.v0).into()]);
    t.push(vec!["thm1".into(), l.thm1_value.into(), se.map(|s| s.thm1_value).into()]);
    t.push(vec!["thm2".into(), l.thm2_value.into(), se.map(|s| s.thm2_value).into()]);
    t.push(vec!["bias_ratio".into(), l.bias_ratio.into(), Cell::Empty]);
    t.push(vec!["diagnosis".into(), direction.into(), Cell::Empty]);
    t.push(vec!["level".into(), l.level.into(), Cell::Empty]);
    t.push(vec!["predicted_type1".into(), l.diagnosis.predicted_type1.into(), Cell::Empty]);
    t.push(vec!["unadjusted_thm1".into(), l.unadjusted.thm1_value.into(), Cell::Empty]);
    t.push(vec!["unadjusted_thm2".into(), l.unadjusted.thm2_value.into(), Cell::Empty]);
    t
}

fn cmd_limits(args: &LimitsArgs, cli: &Cli) -> Result<ExitCode> {
    check_level(args.level)?;
    let dgp = json::load_dgp(&args.input)?;
    let config = BruteForceConfig {
        draws: args.draws,
        seed: args.seed.unwrap_or(DEFAULT_ORACLE_SEED),
    };
    let executor = Parallel::new(cli.workers)?;
    let limits = ancova_core::asymptotics::limits_with(&dgp, &config, &executor)?.at_level(args.level);
    let text = match cli.format {
        Format::Json => json::to_pretty(&limits),
        other => limits_table(&limits).render(other),
    };
    print!("{text}");
    if let Some(dir) = &args.output {
        write_file(dir, &format!("limits.{}", extension(cli.format)), &text)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn apply_overrides(plans: &mut [ancova_core::SimPlan], o: &Overrides) {
    for (i, plan) in plans.iter_mut().enumerate() {
        if let Some(seed) = o.seed {
            plan.seed = seed.wrapping_add(i as u64);
        }
        if let Some(reps) = o.reps {
            plan.reps = reps;
        }
        if let Some(n) = o.n {
            plan.n = n;
        }
        if let Some(level) = o.level {
            plan.level = level;
        }
        if let Some(kinds) = &o.estimators {
            plan.estimators = kinds.clone();
        }
    }
}

fn cmd_simulate(args: &SimulateArgs, cli: &Cli) -> Result<ExitCode> {
    let mut plans = json::load_plans(&args.input)?;
    apply_overrides(&mut plans, &args.overrides);
    for plan in &plans {
        json::validate_plan(plan, &args.input)?;
    }
    let executor = Parallel::new(cli.workers)?;
    let options = SweepOptions {
        dump_replications: args.dump,
        ..Default::default()
    };
    let reports = sweep(&plans, &args.output, &executor, &options)?;
    print!("{}", summary_table(&reports, &options.tolerance).render(cli.format));
    Ok(ExitCode::SUCCESS)
}

fn cmd_reproduce(args: &ReproduceArgs, cli: &Cli) -> Result<ExitCode> {
    if args.list {
        for s in scenarios::SCENARIOS {
            println!("{:<8} {}", s.name, s.description);
        }
        return Ok(ExitCode::SUCCESS);
    }
    let o = &args.overrides;
    let suite = SuiteOptions {
        scenarios: args.scenarios.clone(),
        fast: args.fast,
        seed: o.seed,
        reps: o.reps,
        n: o.n,
        level: o.level,
        estimators: o.estimators.clone(),
    };
    let plans = suite.plans()?;
    let executor = Parallel::new(cli.workers)?;
    let options = SweepOptions::default();
    let reports = match &args.output {
        Some(dir) => sweep(&plans, dir, &executor, &options)?,
        None => {
            let mut reports = Vec::with_capacity(plans.len());
            for plan in &plans {
                eprintln!("running {} (n = {}, reps = {})", plan.scenario, plan.n, plan.reps);
                reports.push(ancova_core::simulate(plan, &executor)?.0);
            }
            reports
        }
    };
    let verdicts: Vec<_> = reports
        .iter()
        .map(|r| judge(r, args.fast, &options.tolerance))
        .collect();
    if let Some(dir) = &args.output {
        write_file(dir, "verdicts.json", &json::to_pretty(&verdicts))?;
    }
    match cli.format {
        Format::Json => print!("{}", json::to_pretty(&verdicts)),
        other => print!("{}", verdict_table(&verdicts).render(other)),
    }
    let failed: Vec<&str> = verdicts
        .iter()
        .filter(|v| !v.pass)
        .map(|v| v.scenario.as_str())
        .collect();
    if failed.is_empty() {
        eprintln!("all {} scenarios pass", verdicts.len());
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("failing scenarios: {}", failed.join(", "));
        Ok(ExitCode::from(1))
    }
}
