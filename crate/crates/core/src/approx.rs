//! Seeded Monte Carlo estimation: permutation sampling for Shapley values
//! and independent-coin subset sampling for the causal effect.
//!
//! Both samplers accept any polynomial-time monotone Boolean query
//! (conjunctive, union, reachability) and, for the numeric variants, any
//! aggregate. Trial counts come from the two-sided Hoeffding bound
//! `ceil(ln(2/δ) / (2ε²))`; for numeric queries the additive guarantee is
//! `ε·B` where `B` bounds the per-trial marginal.
//!
//! Reproducibility: each trial draws from its own ChaCha8 stream selected
//! by the trial index, so results are independent of scheduling and a
//! report can be replayed from its own `(seed, ε, δ)` alone.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::data::{Constant, Database, EndoMask, FactHandle};
use crate::error::{Error, Result};
use crate::oracle::ReachabilityQuery;
use crate::query::{Atom, Term};
use crate::{BooleanQuery, NumericQuery};

/// `(ε, δ, seed)` plus an optional trial override.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SamplerConfig {
    pub epsilon: f64,
    pub delta: f64,
    pub seed: u64,
    pub trials_override: Option<u64>,
}

impl SamplerConfig {
    pub fn new(epsilon: f64, delta: f64, seed: u64) -> Self {
        SamplerConfig {
            epsilon,
            delta,
            seed,
            trials_override: None,
        }
    }

    pub fn with_trials(mut self, trials: u64) -> Self {
        self.trials_override = Some(trials);
        self
    }

    pub fn trials(&self) -> Result<u64> {
        // epsilon and delta document the run, so they are validated even
        // when the trial count is overridden
        let computed = trials_needed(self.epsilon, self.delta)?;
        Ok(match self.trials_override {
            Some(t) => t.max(1),
            None => computed,
        })
    }
}

/// Two-sided Hoeffding trial count for variables in `[0, 1]`:
/// `ceil(ln(2/δ) / (2ε²))`.
pub fn trials_needed(epsilon: f64, delta: f64) -> Result<u64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Domain {
            name: "epsilon",
            value: epsilon,
        });
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Domain {
            name: "delta",
            value: delta,
        });
    }
    let raw = (2.0 / delta).ln() / (2.0 * epsilon * epsilon);
    Ok(raw.ceil().max(1.0) as u64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Method {
    #[serde(rename = "mc-permutation")]
    McPermutation,
    #[serde(rename = "mc-subset")]
    McSubset,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Method::McPermutation => write!(f, "mc-permutation"),
            Method::McSubset => write!(f, "mc-subset"),
        }
    }
}

/// A Monte Carlo point estimate with its full sampling provenance.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub point: f64,
    pub trials: u64,
    pub epsilon: f64,
    pub delta: f64,
    pub seed: u64,
    pub method: Method,
    /// Success count for Boolean permutation sampling (diagnostic, not part
    /// of the wire format).
    #[serde(skip)]
    pub successes: Option<u64>,
}

impl Estimate {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("estimate serializes")
    }
}

/// One logged trial, kept by the `*_with_log` variants up to a cap.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub success: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub marginal: Option<f64>,
}

fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

fn shuffle_identity(perm: &mut [usize], rng: &mut ChaCha8Rng) {
    for (i, slot) in perm.iter_mut().enumerate() {
        *slot = i;
    }
    for i in (1..perm.len()).rev() {
        let j = rng.gen_range(0..=i);
        perm.swap(i, j);
    }
}

/// Additive-FPRAS permutation sampling of `Shapley(D, q, f)` for a monotone
/// Boolean query. Per trial: draw a uniform permutation of `D_n`; report
/// success iff the query is false just before `f` and true just after.
/// Scanning stops early once the prefix satisfies the query.
pub fn mc_shapley(
    db: &Database,
    q: BooleanQuery,
    f: FactHandle,
    cfg: &SamplerConfig,
) -> Result<Estimate> {
    mc_shapley_with_log(db, q, f, cfg, 0).map(|(est, _)| est)
}

/// [`mc_shapley`] that also returns the first `log_cap` trial outcomes.
pub fn mc_shapley_with_log(
    db: &Database,
    q: BooleanQuery,
    f: FactHandle,
    cfg: &SamplerConfig,
    log_cap: usize,
) -> Result<(Estimate, Vec<TrialRecord>)> {
    let m = db.endo_count();
    if f.index() >= m {
        return Err(Error::FactNotFound(format!("{f}")));
    }
    let trials = cfg.trials()?;
    let mut log = Vec::new();

    // resolve endogenous facts once; facts of unrelated relations are no-ops
    let endo_facts: Vec<Fact2> = resolve_endo(db);
    let template = IncrementalBool::new(db, q)?;

    let mut successes = 0u64;
    if !template.satisfied() {
        let mut perm = vec![0usize; m];
        for trial in 0..trials {
            let mut rng = trial_rng(cfg.seed, trial);
            shuffle_identity(&mut perm, &mut rng);
            let mut state = template.clone();
            let mut success = false;
            for &idx in perm.iter() {
                if idx == f.index() {
                    if !state.satisfied() {
                        state.insert(&endo_facts[idx]);
                        success = state.satisfied();
                    }
                    break;
                }
                state.insert(&endo_facts[idx]);
                if state.satisfied() {
                    break;
                }
            }
            if success {
                successes += 1;
            }
            if (trial as usize) < log_cap {
                log.push(TrialRecord {
                    trial,
                    success: Some(success),
                    marginal: None,
                });
            }
        }
    }

    let estimate = Estimate {
        point: successes as f64 / trials as f64,
        trials,
        epsilon: cfg.epsilon,
        delta: cfg.delta,
        seed: cfg.seed,
        method: Method::McPermutation,
        successes: Some(successes),
    };
    Ok((estimate, log))
}

/// Range bound `B` on per-trial marginals for a numeric query.
fn range_bound(db: &Database, q: NumericQuery) -> Result<i128> {
    use crate::query::{eval_aggregate, evaluate, feature_value, AggKind};
    match q {
        NumericQuery::Boolean(_) => Ok(1),
        NumericQuery::Aggregate(agg) => match agg.kind {
            AggKind::Count => eval_aggregate(agg, db, None),
            AggKind::Sum => {
                let mut total: i128 = 0;
                for answer in evaluate(&agg.inner, db, None)? {
                    total += feature_value(agg.feature, &answer)?.abs();
                }
                Ok(total)
            }
            AggKind::Max | AggKind::Min => {
                let mut lo: i128 = 0;
                let mut hi: i128 = 0;
                for answer in evaluate(&agg.inner, db, None)? {
                    let v = feature_value(agg.feature, &answer)?;
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
                Ok(hi - lo)
            }
        },
    }
}

/// Permutation sampling of the Shapley value of a numeric query. The point
/// estimate carries an additive `ε·B` guarantee at confidence `1 − δ`,
/// where `B` is the computed range bound on per-trial marginals.
pub fn mc_shapley_numeric(
    db: &Database,
    q: NumericQuery,
    f: FactHandle,
    cfg: &SamplerConfig,
) -> Result<Estimate> {
    mc_shapley_numeric_with_log(db, q, f, cfg, 0).map(|(est, _)| est)
}

/// [`mc_shapley_numeric`] that also returns the first `log_cap` marginals.
pub fn mc_shapley_numeric_with_log(
    db: &Database,
    q: NumericQuery,
    f: FactHandle,
    cfg: &SamplerConfig,
    log_cap: usize,
) -> Result<(Estimate, Vec<TrialRecord>)> {
    let m = db.endo_count();
    if f.index() >= m {
        return Err(Error::FactNotFound(format!("{f}")));
    }
    let trials = cfg.trials()?;
    let bound = range_bound(db, q)?;
    let mut log = Vec::new();

    let mut perm = vec![0usize; m];
    let mut mask = EndoMask::empty(m);
    let mut sum: i128 = 0;
    for trial in 0..trials {
        let mut rng = trial_rng(cfg.seed, trial);
        shuffle_identity(&mut perm, &mut rng);
        for i in 0..m {
            mask.set(i, false);
        }
        for &idx in perm.iter() {
            if idx == f.index() {
                break;
            }
            mask.set(idx, true);
        }
        let before = q.value(db, Some(&mask))?;
        mask.set(f.index(), true);
        let after = q.value(db, Some(&mask))?;
        let marginal = after - before;
        if marginal.abs() > bound {
            return Err(Error::Internal(format!(
                "per-trial marginal {marginal} exceeds computed range bound {bound}"
            )));
        }
        sum += marginal;
        if (trial as usize) < log_cap {
            log.push(TrialRecord {
                trial,
                success: None,
                marginal: Some(marginal as f64),
            });
        }
    }

    let estimate = Estimate {
        point: sum as f64 / trials as f64,
        trials,
        epsilon: cfg.epsilon,
        delta: cfg.delta,
        seed: cfg.seed,
        method: Method::McPermutation,
        successes: None,
    };
    Ok((estimate, log))
}

/// Subset sampling of the causal effect: per trial draw `E ⊆ D_n∖{f}` with
/// independent fair coins and average `α(D_x∪E∪{f}) − α(D_x∪E)`. The
/// combined additive guarantee is `2ε·B`.
pub fn mc_causal_effect(
    db: &Database,
    q: NumericQuery,
    f: FactHandle,
    cfg: &SamplerConfig,
) -> Result<Estimate> {
    mc_causal_effect_with_log(db, q, f, cfg, 0).map(|(est, _)| est)
}

/// [`mc_causal_effect`] that also returns the first `log_cap` marginals.
pub fn mc_causal_effect_with_log(
    db: &Database,
    q: NumericQuery,
    f: FactHandle,
    cfg: &SamplerConfig,
    log_cap: usize,
) -> Result<(Estimate, Vec<TrialRecord>)> {
    let m = db.endo_count();
    if f.index() >= m {
        return Err(Error::FactNotFound(format!("{f}")));
    }
    let trials = cfg.trials()?;
    let bound = range_bound(db, q)?;
    let mut log = Vec::new();

    let mut mask = EndoMask::empty(m);
    let mut sum: i128 = 0;
    for trial in 0..trials {
        let mut rng = trial_rng(cfg.seed, trial);
        for i in 0..m {
            mask.set(i, i != f.index() && rng.gen_bool(0.5));
        }
        let without = q.value(db, Some(&mask))?;
        mask.set(f.index(), true);
        let with = q.value(db, Some(&mask))?;
        let marginal = with - without;
        if marginal.abs() > bound {
            return Err(Error::Internal(format!(
                "per-trial marginal {marginal} exceeds computed range bound {bound}"
            )));
        }
        sum += marginal;
        if (trial as usize) < log_cap {
            log.push(TrialRecord {
                trial,
                success: None,
                marginal: Some(marginal as f64),
            });
        }
    }

    let estimate = Estimate {
        point: sum as f64 / trials as f64,
        trials,
        epsilon: cfg.epsilon,
        delta: cfg.delta,
        seed: cfg.seed,
        method: Method::McSubset,
        successes: None,
    };
    Ok((estimate, log))
}

// ---------------------------------------------------------------------------
// Incremental satisfaction state for the permutation walk
// ---------------------------------------------------------------------------

struct Fact2 {
    relation: String,
    tuple: Vec<Constant>,
}

fn resolve_endo(db: &Database) -> Vec<Fact2> {
    db.endo_handles()
        .map(|h| {
            let f = db.endo_fact(h);
            Fact2 {
                relation: f.relation,
                tuple: f.tuple,
            }
        })
        .collect()
}

#[derive(Clone)]
enum IncKind {
    Cqs(Vec<CqState>),
    Reach(ReachState),
}

#[derive(Clone)]
struct IncrementalBool {
    satisfied: bool,
    kind: IncKind,
}

impl IncrementalBool {
    fn new(db: &Database, q: BooleanQuery) -> Result<Self> {
        let mut state = match q {
            BooleanQuery::Cq(cq) => IncrementalBool {
                satisfied: false,
                kind: IncKind::Cqs(vec![CqState::new(db, cq.body.clone())?]),
            },
            BooleanQuery::Union(u) => IncrementalBool {
                satisfied: false,
                kind: IncKind::Cqs(
                    u.branches
                        .iter()
                        .map(|b| CqState::new(db, b.body.clone()))
                        .collect::<Result<Vec<_>>>()?,
                ),
            },
            BooleanQuery::Reachability(r) => IncrementalBool {
                satisfied: false,
                kind: IncKind::Reach(ReachState::new(db, r)?),
            },
        };
        // preload the exogenous context
        for rel in db.relations() {
            for (tuple, provenance, _) in rel.facts() {
                if provenance == crate::data::Provenance::Exogenous {
                    let fact = Fact2 {
                        relation: rel.name().to_string(),
                        tuple: tuple.to_vec(),
                    };
                    state.insert(&fact);
                }
            }
        }
        Ok(state)
    }

    fn satisfied(&self) -> bool {
        self.satisfied
    }

    fn insert(&mut self, fact: &Fact2) {
        if self.satisfied {
            return;
        }
        match &mut self.kind {
            IncKind::Cqs(branches) => {
                for branch in branches.iter_mut() {
                    if branch.insert(fact) {
                        self.satisfied = true;
                        return;
                    }
                }
            }
            IncKind::Reach(reach) => {
                if reach.insert(fact) {
                    self.satisfied = true;
                }
            }
        }
    }
}

/// Present facts of one conjunctive body, indexed per (atom-relation,
/// position, value). `insert` answers: does some homomorphism use the new
/// fact?
#[derive(Clone)]
struct CqState {
    atoms: Vec<Atom>,
    /// facts per atom index (self-joins store the fact under every atom of
    /// its relation exactly once via shared relation ids)
    facts_by_relation: HashMap<String, usize>,
    facts: Vec<Vec<Vec<Constant>>>,
    index: Vec<Vec<HashMap<Constant, Vec<usize>>>>,
}

impl CqState {
    fn new(db: &Database, atoms: Vec<Atom>) -> Result<Self> {
        let mut facts_by_relation = HashMap::new();
        for atom in &atoms {
            let rel = db
                .relation(&atom.relation)
                .ok_or_else(|| Error::UnknownRelation(atom.relation.clone()))?;
            if rel.arity() != atom.args.len() {
                return Err(Error::QueryArity {
                    relation: atom.relation.clone(),
                    expected: rel.arity(),
                    found: atom.args.len(),
                });
            }
            let next = facts_by_relation.len();
            facts_by_relation
                .entry(atom.relation.clone())
                .or_insert(next);
        }
        let n_rels = facts_by_relation.len();
        let arities: Vec<usize> = {
            let mut a = vec![0usize; n_rels];
            for atom in &atoms {
                a[facts_by_relation[&atom.relation]] = atom.args.len();
            }
            a
        };
        Ok(CqState {
            atoms,
            facts_by_relation,
            facts: vec![Vec::new(); n_rels],
            index: arities.iter().map(|&ar| vec![HashMap::new(); ar]).collect(),
        })
    }

    fn insert(&mut self, fact: &Fact2) -> bool {
        let Some(&rid) = self.facts_by_relation.get(&fact.relation) else {
            return false;
        };
        let fid = self.facts[rid].len();
        self.facts[rid].push(fact.tuple.clone());
        for (pos, value) in fact.tuple.iter().enumerate() {
            self.index[rid][pos]
                .entry(value.clone())
                .or_default()
                .push(fid);
        }
        // seed the probe at every atom the new fact can serve
        for seed in 0..self.atoms.len() {
            if self.atoms[seed].relation != fact.relation {
                continue;
            }
            let mut bindings: HashMap<&str, &Constant> = HashMap::new();
            if !bind_atom(&self.atoms[seed], &fact.tuple, &mut bindings) {
                continue;
            }
            let remaining: Vec<usize> = (0..self.atoms.len()).filter(|&i| i != seed).collect();
            if self.probe(&remaining, &mut bindings) {
                return true;
            }
        }
        false
    }

    fn probe<'s>(
        &'s self,
        remaining: &[usize],
        bindings: &mut HashMap<&'s str, &'s Constant>,
    ) -> bool {
        if remaining.is_empty() {
            return true;
        }
        // prefer the most-bound atom to keep candidate lists short
        let (pick, _) = remaining
            .iter()
            .enumerate()
            .map(|(i, &ai)| {
                let bound = self.atoms[ai]
                    .args
                    .iter()
                    .filter(|t| match t {
                        Term::Const(_) => true,
                        Term::Var(v) => bindings.contains_key(v.as_str()),
                    })
                    .count();
                (i, bound)
            })
            .max_by_key(|&(i, bound)| (bound, std::cmp::Reverse(i)))
            .expect("remaining is non-empty");
        let ai = remaining[pick];
        let atom = &self.atoms[ai];
        let rid = self.facts_by_relation[&atom.relation];
        let rest: Vec<usize> = remaining.iter().copied().filter(|&x| x != ai).collect();

        // smallest index bucket over bound positions, else full scan
        let mut bucket: Option<&Vec<usize>> = None;
        for (pos, term) in atom.args.iter().enumerate() {
            let value = match term {
                Term::Const(c) => Some(c),
                Term::Var(v) => bindings.get(v.as_str()).copied(),
            };
            if let Some(value) = value {
                match self.index[rid][pos].get(value) {
                    None => return false,
                    Some(list) => {
                        if bucket.map(|b| list.len() < b.len()).unwrap_or(true) {
                            bucket = Some(list);
                        }
                    }
                }
            }
        }
        let candidates: Vec<usize> = match bucket {
            Some(list) => list.clone(),
            None => (0..self.facts[rid].len()).collect(),
        };
        for fid in candidates {
            let snapshot: Vec<&str> = bindings.keys().copied().collect();
            let tuple = &self.facts[rid][fid];
            if bind_atom(atom, tuple, bindings) && self.probe(&rest, bindings) {
                return true;
            }
            bindings.retain(|k, _| snapshot.contains(k));
        }
        false
    }
}

fn bind_atom<'s>(
    atom: &'s Atom,
    tuple: &'s [Constant],
    bindings: &mut HashMap<&'s str, &'s Constant>,
) -> bool {
    let snapshot: Vec<&str> = bindings.keys().copied().collect();
    for (term, value) in atom.args.iter().zip(tuple) {
        let ok = match term {
            Term::Const(c) => c == value,
            Term::Var(v) => match bindings.get(v.as_str()) {
                Some(bound) => *bound == value,
                None => {
                    bindings.insert(v.as_str(), value);
                    true
                }
            },
        };
        if !ok {
            bindings.retain(|k, _| snapshot.contains(k));
            return false;
        }
    }
    true
}

/// Incrementally maintained forward-reachable set.
#[derive(Clone)]
struct ReachState {
    source: Constant,
    target: Constant,
    edge_relation: String,
    adjacency: HashMap<Constant, Vec<Constant>>,
    reached: std::collections::HashSet<Constant>,
}

impl ReachState {
    fn new(db: &Database, rq: &ReachabilityQuery) -> Result<Self> {
        let rel = db
            .relation(&rq.edge_relation)
            .ok_or_else(|| Error::UnknownRelation(rq.edge_relation.clone()))?;
        if rel.arity() != 2 {
            return Err(Error::BadArity {
                relation: rq.edge_relation.clone(),
                arity: rel.arity(),
            });
        }
        let mut reached = std::collections::HashSet::new();
        reached.insert(rq.source.clone());
        Ok(ReachState {
            source: rq.source.clone(),
            target: rq.target.clone(),
            edge_relation: rq.edge_relation.clone(),
            adjacency: HashMap::new(),
            reached,
        })
    }

    fn insert(&mut self, fact: &Fact2) -> bool {
        if fact.relation != self.edge_relation {
            return self.satisfied();
        }
        let (from, to) = (&fact.tuple[0], &fact.tuple[1]);
        self.adjacency
            .entry(from.clone())
            .or_default()
            .push(to.clone());
        if self.reached.contains(from) && !self.reached.contains(to) {
            let mut stack = vec![to.clone()];
            while let Some(node) = stack.pop() {
                if self.reached.insert(node.clone()) {
                    if let Some(nexts) = self.adjacency.get(&node) {
                        stack.extend(nexts.iter().cloned());
                    }
                }
            }
        }
        self.satisfied()
    }

    fn satisfied(&self) -> bool {
        self.source == self.target || self.reached.contains(&self.target)
    }
}
