//! Query/fact argument parsing, engine selection and per-fact execution.

use std::path::Path;

use factshap::approx::{
    mc_causal_effect_with_log, mc_shapley_numeric_with_log, mc_shapley_with_log, Estimate,
    SamplerConfig, TrialRecord,
};
use factshap::data::{Constant, Database, FactHandle};
use factshap::exact::{
    banzhaf_boolean, banzhaf_sum, cnt_sat_with_trace, shapley_boolean, shapley_minmax, shapley_sum,
    ExactValue,
};
use factshap::oracle::{
    brute_banzhaf, brute_shapley, CooperativeGame, ReachabilityQuery, MAX_PLAYERS,
};
use factshap::query::{classify, AggKind, Classification, ConjunctiveQuery, Query};
use factshap::{BooleanQuery, Error, NumericQuery, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Measure {
    Shapley,
    Banzhaf,
}

impl Measure {
    pub fn name(self) -> &'static str {
        match self {
            Measure::Shapley => "shapley",
            Measure::Banzhaf => "banzhaf",
        }
    }
}

/// A parsed target query: the rule grammar or the reachability shorthand
/// `reach('a','b')` over `--edges`.
#[derive(Clone, Debug)]
pub enum Target {
    Query(Query),
    Reach(ReachabilityQuery),
}

impl Target {
    pub fn render(&self) -> String {
        match self {
            Target::Query(q) => q.to_string(),
            Target::Reach(r) => r.to_string(),
        }
    }

    pub fn boolean<'a>(&'a self) -> Option<BooleanQuery<'a>> {
        match self {
            Target::Query(Query::Cq(q)) if q.is_boolean() => Some(BooleanQuery::Cq(q)),
            Target::Query(Query::Union(u)) if u.is_boolean() => Some(BooleanQuery::Union(u)),
            Target::Reach(r) => Some(BooleanQuery::Reachability(r)),
            _ => None,
        }
    }

    pub fn numeric<'a>(&'a self) -> Option<NumericQuery<'a>> {
        match self {
            Target::Query(Query::Aggregate(a)) => Some(NumericQuery::Aggregate(a)),
            other => other.boolean().map(NumericQuery::Boolean),
        }
    }
}

/// `--query` accepts a file path or inline text; `reach('a','b')` is the
/// reachability shorthand.
pub fn parse_target(raw: &str, edges: &str) -> Result<Target> {
    let text = if Path::new(raw).is_file() {
        std::fs::read_to_string(raw).map_err(|e| Error::Io {
            path: raw.to_string(),
            source: e,
        })?
    } else {
        raw.to_string()
    };
    let trimmed = text.trim();
    if let Some(rest) = trimmed.strip_prefix("reach") {
        let inner = rest
            .trim()
            .strip_prefix('(')
            .and_then(|s| s.trim_end().strip_suffix(')'))
            .ok_or_else(|| Error::Syntax {
                line: 1,
                column: 1,
                message: "reachability syntax is reach('a','b')".into(),
            })?;
        let args = split_fact_args(inner)?;
        if args.len() != 2 {
            return Err(Error::Syntax {
                line: 1,
                column: 1,
                message: format!("reach takes exactly 2 arguments, got {}", args.len()),
            });
        }
        return Ok(Target::Reach(ReachabilityQuery {
            source: args[0].clone(),
            target: args[1].clone(),
            edge_relation: edges.to_string(),
        }));
    }
    Ok(Target::Query(factshap::parse_query(trimmed)?))
}

/// `--fact` literal: `Rel(c1,...,ck)` with bare, quoted or integer args.
pub fn parse_fact_literal(raw: &str) -> Result<(String, Vec<Constant>)> {
    let bad = |message: String| Error::Syntax {
        line: 1,
        column: 1,
        message,
    };
    let trimmed = raw.trim();
    let open = trimmed
        .find('(')
        .ok_or_else(|| bad("fact literal must look like Rel(c1,...)".into()))?;
    let relation = trimmed[..open].trim().to_string();
    if relation.is_empty() {
        return Err(bad("fact literal is missing a relation name".into()));
    }
    let inner = trimmed[open + 1..]
        .strip_suffix(')')
        .ok_or_else(|| bad("fact literal must end with ')'".into()))?;
    let args = split_fact_args(inner)?;
    if args.is_empty() {
        return Err(bad("fact literal needs at least one argument".into()));
    }
    Ok((relation, args))
}

fn split_fact_args(inner: &str) -> Result<Vec<Constant>> {
    let mut out = Vec::new();
    for part in inner.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let constant =
            if let Some(stripped) = part.strip_prefix('\'').and_then(|s| s.strip_suffix('\'')) {
                Constant::Str(stripped.to_string())
            } else {
                Constant::sniff(part)
            };
        out.push(constant);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MethodChoice {
    Auto,
    Exact,
    Brute,
    Mc,
}

impl std::str::FromStr for MethodChoice {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "auto" => Ok(MethodChoice::Auto),
            "exact" => Ok(MethodChoice::Exact),
            "brute" => Ok(MethodChoice::Brute),
            "mc" => Ok(MethodChoice::Mc),
            other => Err(format!("unknown method {other:?} (auto|exact|brute|mc)")),
        }
    }
}

/// The concrete engine a run dispatches to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Engine {
    ExactBoolean,
    ExactAdditive,
    ExactMinMax,
    Brute,
    Mc,
}

impl Engine {
    pub fn label(self, measure: Measure) -> &'static str {
        match self {
            Engine::ExactBoolean | Engine::ExactAdditive | Engine::ExactMinMax => "exact",
            Engine::Brute => "brute",
            Engine::Mc => match measure {
                Measure::Shapley => "mc-permutation",
                Measure::Banzhaf => "mc-subset",
            },
        }
    }
}

/// Which exact engine, if any, applies to this target under this measure?
pub fn exact_engine(measure: Measure, target: &Target) -> Option<Engine> {
    match target {
        Target::Query(Query::Cq(q)) if q.is_boolean() => {
            let c = classify(q);
            (c.hierarchical && c.self_join_free).then_some(Engine::ExactBoolean)
        }
        Target::Query(Query::Aggregate(a)) => match a.kind {
            AggKind::Sum | AggKind::Count => {
                let c = classify(&a.inner);
                (c.hierarchical && c.self_join_free).then_some(Engine::ExactAdditive)
            }
            AggKind::Max | AggKind::Min => (measure == Measure::Shapley && a.inner.body.len() == 1)
                .then_some(Engine::ExactMinMax),
        },
        _ => None,
    }
}

/// Resolves `--method` to an engine: `auto` picks exact when available,
/// then brute under `--prefer-exact` at desk scale, then Monte Carlo.
pub fn resolve_engine(
    measure: Measure,
    target: &Target,
    db: &Database,
    choice: MethodChoice,
    prefer_exact: bool,
) -> Result<(Engine, bool)> {
    let m = db.endo_count();
    match choice {
        MethodChoice::Auto => {
            if let Some(engine) = exact_engine(measure, target) {
                Ok((engine, false))
            } else if prefer_exact && m <= MAX_PLAYERS {
                Ok((Engine::Brute, true))
            } else {
                Ok((Engine::Mc, true))
            }
        }
        MethodChoice::Exact => exact_engine(measure, target)
            .map(|e| (e, false))
            .ok_or_else(|| precondition_error(measure, target)),
        MethodChoice::Brute => {
            if m > MAX_PLAYERS {
                Err(Error::TooManyPlayers(m, MAX_PLAYERS))
            } else {
                Ok((Engine::Brute, false))
            }
        }
        MethodChoice::Mc => Ok((Engine::Mc, false)),
    }
}

fn precondition_error(measure: Measure, target: &Target) -> Error {
    match target {
        Target::Query(Query::Cq(q)) if q.is_boolean() => {
            let c = classify(q);
            if !c.self_join_free {
                Error::SelfJoin("(body)".into())
            } else if !c.hierarchical {
                Error::NotHierarchical
            } else {
                Error::Internal("exact engine refused a tractable query".into())
            }
        }
        Target::Query(Query::Aggregate(a)) => match a.kind {
            AggKind::Max | AggKind::Min if a.inner.body.len() != 1 => {
                Error::NotSingleAtom(a.inner.body.len())
            }
            AggKind::Max | AggKind::Min if measure == Measure::Banzhaf => Error::NotMonotone(
                "no exact causal-effect engine for max/min; use brute or mc".into(),
            ),
            _ => {
                let c = classify(&a.inner);
                if !c.self_join_free {
                    Error::SelfJoin("(body)".into())
                } else {
                    Error::NotHierarchical
                }
            }
        },
        Target::Query(Query::Cq(q)) => Error::NotBoolean(q.head.len()),
        Target::Query(Query::Union(_)) => {
            Error::NotMonotone("unions have no exact engine; use brute or mc".into())
        }
        Target::Reach(_) => {
            Error::NotMonotone("reachability has no exact engine; use brute or mc".into())
        }
    }
}

/// One computed score.
pub struct Score {
    pub exact: Option<ExactValue>,
    pub estimate: Option<Estimate>,
    pub trials_log: Vec<TrialRecord>,
}

pub struct Runner<'a> {
    pub db: &'a Database,
    pub target: &'a Target,
    pub measure: Measure,
    pub engine: Engine,
    pub cfg: SamplerConfig,
    pub trace_cap: usize,
    game: Option<CooperativeGame<'a>>,
}

impl<'a> Runner<'a> {
    pub fn new(
        db: &'a Database,
        target: &'a Target,
        measure: Measure,
        engine: Engine,
        cfg: SamplerConfig,
        trace_cap: usize,
    ) -> Result<Self> {
        let game = match engine {
            Engine::Brute => {
                let numeric = target
                    .numeric()
                    .ok_or_else(|| Error::NotBoolean(head_arity(target)))?;
                Some(CooperativeGame::new(db, numeric)?)
            }
            _ => None,
        };
        Ok(Runner {
            db,
            target,
            measure,
            engine,
            cfg,
            trace_cap,
            game,
        })
    }

    pub fn score(&self, f: FactHandle) -> Result<Score> {
        let mut score = Score {
            exact: None,
            estimate: None,
            trials_log: Vec::new(),
        };
        match self.engine {
            Engine::ExactBoolean => {
                let q = self.require_cq()?;
                score.exact = Some(match self.measure {
                    Measure::Shapley => shapley_boolean(self.db, q, f)?,
                    Measure::Banzhaf => banzhaf_boolean(self.db, q, f)?,
                });
            }
            Engine::ExactAdditive => {
                let a = self.require_aggregate()?;
                score.exact = Some(match self.measure {
                    Measure::Shapley => shapley_sum(self.db, a, f)?,
                    Measure::Banzhaf => banzhaf_sum(self.db, a, f)?,
                });
            }
            Engine::ExactMinMax => {
                let a = self.require_aggregate()?;
                score.exact = Some(shapley_minmax(self.db, a, f)?);
            }
            Engine::Brute => {
                let game = self.game.as_ref().expect("brute runner carries a game");
                score.exact = Some(match self.measure {
                    Measure::Shapley => brute_shapley(game, f),
                    Measure::Banzhaf => brute_banzhaf(game, f),
                });
            }
            Engine::Mc => {
                let (estimate, log) = match self.measure {
                    Measure::Shapley => match self.target.boolean() {
                        Some(b) => mc_shapley_with_log(self.db, b, f, &self.cfg, self.trace_cap)?,
                        None => {
                            let n = self.require_numeric()?;
                            mc_shapley_numeric_with_log(self.db, n, f, &self.cfg, self.trace_cap)?
                        }
                    },
                    Measure::Banzhaf => {
                        let n = self.require_numeric()?;
                        mc_causal_effect_with_log(self.db, n, f, &self.cfg, self.trace_cap)?
                    }
                };
                score.estimate = Some(estimate);
                score.trials_log = log;
            }
        }
        Ok(score)
    }

    /// DP-table trace for exact Boolean runs on a single fact.
    pub fn dp_trace(&self, f: FactHandle) -> Result<Option<serde_json::Value>> {
        if self.engine != Engine::ExactBoolean {
            return Ok(None);
        }
        let q = self.require_cq()?;
        let d_prime = self.db.with_fact_exogenous(f);
        let d_minus = self.db.without_fact(f);
        let (_, with_f) = cnt_sat_with_trace(&d_prime, q)?;
        let (_, without_f) = cnt_sat_with_trace(&d_minus, q)?;
        Ok(Some(serde_json::json!({
            "fact_exogenous": with_f,
            "fact_deleted": without_f,
        })))
    }

    fn require_cq(&self) -> Result<&'a ConjunctiveQuery> {
        match self.target {
            Target::Query(Query::Cq(q)) => Ok(q),
            _ => Err(Error::Internal(
                "engine expected a conjunctive query".into(),
            )),
        }
    }

    fn require_aggregate(&self) -> Result<&'a factshap::AggregateQuery> {
        match self.target {
            Target::Query(Query::Aggregate(a)) => Ok(a),
            _ => Err(Error::Internal("engine expected an aggregate query".into())),
        }
    }

    fn require_numeric(&self) -> Result<NumericQuery<'a>> {
        self.target
            .numeric()
            .ok_or_else(|| Error::NotBoolean(head_arity(self.target)))
    }
}

fn head_arity(target: &Target) -> usize {
    match target {
        Target::Query(Query::Cq(q)) => q.head.len(),
        Target::Query(Query::Union(u)) => u.branches[0].head.len(),
        _ => 0,
    }
}

/// Classification block plus the method matrix for reports.
pub fn classification_summary(target: &Target, m: usize) -> ClassificationReport {
    match target {
        Target::Query(Query::Cq(q)) => {
            let c = classify(q);
            let exact = q.is_boolean() && c.hierarchical && c.self_join_free;
            let mut methods = Vec::new();
            if exact {
                methods.push("exact".to_string());
            }
            push_fallbacks(&mut methods, m);
            ClassificationReport {
                kind: "cq".into(),
                boolean: q.is_boolean(),
                classification: Some(c),
                exact_available: exact,
                methods,
            }
        }
        Target::Query(Query::Aggregate(a)) => {
            let c = classify(&a.inner);
            let mut methods = Vec::new();
            let exact = match a.kind {
                AggKind::Sum | AggKind::Count => c.hierarchical && c.self_join_free,
                AggKind::Max | AggKind::Min => a.inner.body.len() == 1,
            };
            if exact {
                methods.push(match a.kind {
                    AggKind::Max | AggKind::Min => "exact (shapley only)".to_string(),
                    _ => "exact".to_string(),
                });
            }
            push_fallbacks(&mut methods, m);
            ClassificationReport {
                kind: format!("aggregate/{}", a.kind),
                boolean: false,
                classification: Some(c),
                exact_available: exact,
                methods,
            }
        }
        Target::Query(Query::Union(u)) => {
            let mut methods = Vec::new();
            push_fallbacks(&mut methods, m);
            ClassificationReport {
                kind: "union".into(),
                boolean: u.is_boolean(),
                classification: None,
                exact_available: false,
                methods,
            }
        }
        Target::Reach(_) => {
            let mut methods = Vec::new();
            push_fallbacks(&mut methods, m);
            ClassificationReport {
                kind: "reachability".into(),
                boolean: true,
                classification: None,
                exact_available: false,
                methods,
            }
        }
    }
}

fn push_fallbacks(methods: &mut Vec<String>, m: usize) {
    if m <= MAX_PLAYERS {
        methods.push(format!("brute (m={m} <= {MAX_PLAYERS})"));
    } else {
        methods.push(format!("brute unavailable (m={m} > {MAX_PLAYERS})"));
    }
    methods.push("mc".to_string());
}

pub struct ClassificationReport {
    pub kind: String,
    pub boolean: bool,
    pub classification: Option<Classification>,
    pub exact_available: bool,
    pub methods: Vec<String>,
}
