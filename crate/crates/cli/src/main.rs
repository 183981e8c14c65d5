//! Command-line front door: load CSV databases, classify queries and
//! dispatch attribution runs to the right engine.

mod report;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use factshap::approx::SamplerConfig;
use factshap::data::{Database, FactHandle};
use factshap::{Error, Result};

use report::{
    classification_line, CompareColumn, CompareReport, CompareRow, ConfigBlock, FactRow, Format,
    RunReport,
};
use run::{
    classification_summary, parse_fact_literal, parse_target, resolve_engine, Engine, Measure,
    MethodChoice, Runner, Target,
};

#[derive(Parser)]
#[command(
    name = "factshap",
    version,
    about = "Shapley and causal-effect attribution of database facts to query answers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a query and report which engines apply
    Classify(ClassifyArgs),
    /// Shapley value of facts for a query
    Shapley(RunArgs),
    /// Causal effect (Banzhaf power index) of facts for a query
    Banzhaf(RunArgs),
    /// Run several methods side by side and show deviations
    Compare(CompareArgs),
}

#[derive(Args)]
struct ClassifyArgs {
    /// Query file or inline text
    #[arg(long)]
    query: String,
    /// Edge relation for reach('a','b') queries
    #[arg(long, default_value = "Edge")]
    edges: String,
    /// Optional manifest, to size the brute-force matrix
    #[arg(long)]
    db: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "table")]
    format: Format,
}

#[derive(Args)]
struct RunArgs {
    /// JSON manifest describing the CSV database
    #[arg(long)]
    db: PathBuf,
    /// Query file or inline text (rules, aggregates, or reach('a','b'))
    #[arg(long)]
    query: String,
    /// Single fact literal, e.g. "Author(Cathy,UCSD)"
    #[arg(long, conflicts_with = "all")]
    fact: Option<String>,
    /// Score every endogenous fact
    #[arg(long)]
    all: bool,
    /// auto | exact | brute | mc
    #[arg(long, default_value = "auto")]
    method: String,
    #[arg(long, default_value_t = 0.05)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Override the Hoeffding trial count
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long, value_enum, default_value = "table")]
    format: Format,
    /// Emit DP tables (exact) or capped per-trial logs (mc)
    #[arg(long)]
    trace: bool,
    /// Edge relation for reach('a','b') queries
    #[arg(long, default_value = "Edge")]
    edges: String,
    /// Prefer brute-force enumeration over sampling when m <= 20
    #[arg(long)]
    prefer_exact: bool,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    common: RunArgs,
    /// Comma-separated methods, each optionally measure-prefixed:
    /// exact,mc,banzhaf:brute
    #[arg(long, default_value = "exact,mc")]
    methods: String,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Classify(args) => cmd_classify(args),
        Command::Shapley(args) => cmd_run(Measure::Shapley, args),
        Command::Banzhaf(args) => cmd_run(Measure::Banzhaf, args),
        Command::Compare(args) => cmd_compare(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

/// 2 = parse/config error, 3 = engine precondition, 4 = i/o.
fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Syntax { .. }
        | Error::UnsafeHead { .. }
        | Error::BadManifest(_)
        | Error::DuplicateRelation(_)
        | Error::MissingProvenanceColumn { .. }
        | Error::BadProvenanceValue { .. }
        | Error::ArityMismatch { .. }
        | Error::Domain { .. }
        | Error::NotBoolean(_) => 2,
        Error::NotHierarchical
        | Error::SelfJoin(_)
        | Error::NotSingleAtom(_)
        | Error::NotMonotone(_)
        | Error::TooManyPlayers(..)
        | Error::NotEndogenous(_)
        | Error::FactNotFound(_)
        | Error::UnknownRelation(_)
        | Error::QueryArity { .. }
        | Error::BadArity { .. }
        | Error::NonNumericFeature { .. }
        | Error::UnboundedRange => 3,
        Error::Io { .. } | Error::Csv { .. } => 4,
        Error::Internal(_) => 3,
    }
}

fn cmd_classify(args: ClassifyArgs) -> Result<()> {
    let target = parse_target(&args.query, &args.edges)?;
    let m = match &args.db {
        Some(path) => factshap::load_database(path)?.0.endo_count(),
        None => 0,
    };
    let block: report::ClassificationBlock = classification_summary(&target, m).into();
    match args.format {
        Format::Json => {
            let json = serde_json::json!({
                "query": target.render(),
                "classification": serde_json::to_value(&block)
                    .expect("classification serializes"),
            });
            println!("{}", serde_json::to_string_pretty(&json).expect("json"));
        }
        _ => {
            println!("query: {}", target.render());
            println!("{}", classification_line(&block));
        }
    }
    Ok(())
}

struct Prepared {
    db: Database,
    target: Target,
    scope: Vec<FactHandle>,
    cfg: SamplerConfig,
}

fn prepare(args: &RunArgs) -> Result<Prepared> {
    let (db, _report) = factshap::load_database(&args.db)?;
    let target = parse_target(&args.query, &args.edges)?;
    if target.numeric().is_none() {
        return Err(Error::NotBoolean(match &target {
            Target::Query(factshap::Query::Cq(q)) => q.head.len(),
            Target::Query(factshap::Query::Union(u)) => u.branches[0].head.len(),
            _ => 0,
        }));
    }
    let scope = match (&args.fact, args.all) {
        (Some(literal), false) => {
            let (relation, tuple) = parse_fact_literal(literal)?;
            vec![db.fact_handle(&relation, &tuple)?]
        }
        (None, true) => db.endo_handles().collect(),
        (None, false) => {
            return Err(Error::Syntax {
                line: 0,
                column: 0,
                message: "pass --fact \"Rel(c1,...)\" or --all".into(),
            })
        }
        (Some(_), true) => unreachable!("clap conflicts_with"),
    };
    let mut cfg = SamplerConfig::new(args.epsilon, args.delta, args.seed);
    if let Some(t) = args.trials {
        cfg = cfg.with_trials(t);
    }
    // validate epsilon/delta eagerly so config errors exit with code 2
    cfg.trials()?;
    Ok(Prepared {
        db,
        target,
        scope,
        cfg,
    })
}

fn cmd_run(measure: Measure, args: RunArgs) -> Result<()> {
    let start = Instant::now();
    let method: MethodChoice = args.method.parse().map_err(|message| Error::Syntax {
        line: 0,
        column: 0,
        message,
    })?;
    let prepared = prepare(&args)?;
    let Prepared {
        db,
        target,
        scope,
        cfg,
    } = &prepared;

    let (engine, fallback) = resolve_engine(measure, target, db, method, args.prefer_exact)?;
    let trace_cap = if args.trace && engine == Engine::Mc {
        20
    } else {
        0
    };
    let runner = Runner::new(db, target, measure, engine, *cfg, trace_cap)?;

    let mut facts = Vec::with_capacity(scope.len());
    for &f in scope {
        let score = runner.score(f)?;
        let fact = db.endo_fact(f);
        let (rational, double) = match (&score.exact, &score.estimate) {
            (Some(v), _) => (Some(v.to_string()), v.to_f64()),
            (None, Some(e)) => (None, e.point),
            (None, None) => unreachable!("score carries a value"),
        };
        facts.push(FactRow {
            fact: fact.to_string(),
            index: f.index(),
            method: engine.label(measure).to_string(),
            rational,
            double,
            estimate: score.estimate,
            trials_log: score.trials_log,
        });
    }

    let trace = if args.trace && scope.len() == 1 {
        runner.dp_trace(scope[0])?
    } else {
        None
    };

    let report = RunReport {
        query: target.render(),
        measure: measure.name().to_string(),
        classification: classification_summary(target, db.endo_count()).into(),
        config: ConfigBlock {
            method_requested: args.method.clone(),
            method_resolved: engine.label(measure).to_string(),
            fallback,
            epsilon: cfg.epsilon,
            delta: cfg.delta,
            seed: cfg.seed,
            trials_override: cfg.trials_override,
            prefer_exact: args.prefer_exact,
        },
        facts,
        timing_ms: start.elapsed().as_secs_f64() * 1e3,
        trace,
    };
    print!("{}", report.render(args.format));
    Ok(())
}

fn parse_method_token(token: &str) -> Result<(Measure, MethodChoice)> {
    let bad = |message: String| Error::Syntax {
        line: 0,
        column: 0,
        message,
    };
    let (measure, rest) = match token.split_once(':') {
        Some(("shapley", rest)) => (Measure::Shapley, rest),
        Some(("banzhaf", rest)) => (Measure::Banzhaf, rest),
        Some((other, _)) => {
            return Err(bad(format!(
                "unknown measure prefix {other:?} (shapley|banzhaf)"
            )))
        }
        None => (Measure::Shapley, token),
    };
    let method = rest.parse::<MethodChoice>().map_err(bad)?;
    Ok((measure, method))
}

fn cmd_compare(args: CompareArgs) -> Result<()> {
    let start = Instant::now();
    let prepared = prepare(&args.common)?;
    let Prepared {
        db,
        target,
        scope,
        cfg,
    } = &prepared;

    let tokens: Vec<&str> = args
        .methods
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .collect();
    if tokens.is_empty() {
        return Err(Error::Syntax {
            line: 0,
            column: 0,
            message: "--methods needs at least one entry".into(),
        });
    }

    let mut columns = Vec::new();
    let mut per_column: Vec<Vec<(Option<String>, f64)>> = Vec::new();
    for token in &tokens {
        let (measure, method) = parse_method_token(token)?;
        let (engine, _) = resolve_engine(measure, target, db, method, args.common.prefer_exact)?;
        let runner = Runner::new(db, target, measure, engine, *cfg, 0)?;
        let mut values = Vec::with_capacity(scope.len());
        for &f in scope {
            let score = runner.score(f)?;
            let entry = match (&score.exact, &score.estimate) {
                (Some(v), _) => (Some(v.to_string()), v.to_f64()),
                (None, Some(e)) => (None, e.point),
                (None, None) => unreachable!("score carries a value"),
            };
            values.push(entry);
        }
        columns.push(CompareColumn {
            token: token.to_string(),
            measure: measure.name().to_string(),
            method: engine.label(measure).to_string(),
        });
        per_column.push(values);
    }

    let mut rows = Vec::with_capacity(scope.len());
    let mut max_deviation = vec![0.0f64; tokens.len()];
    for (i, &f) in scope.iter().enumerate() {
        let fact = db.endo_fact(f).to_string();
        let doubles: Vec<f64> = per_column.iter().map(|col| col[i].1).collect();
        let rationals: Vec<Option<String>> =
            per_column.iter().map(|col| col[i].0.clone()).collect();
        let deviations: Vec<f64> = doubles.iter().map(|v| (v - doubles[0]).abs()).collect();
        for (c, d) in deviations.iter().enumerate() {
            if *d > max_deviation[c] {
                max_deviation[c] = *d;
            }
        }
        rows.push(CompareRow {
            fact,
            index: f.index(),
            doubles,
            rationals,
            deviations,
        });
    }

    let report = CompareReport {
        query: target.render(),
        columns,
        rows,
        max_deviation,
        timing_ms: start.elapsed().as_secs_f64() * 1e3,
    };
    print!("{}", report.render(args.common.format));
    Ok(())
}
