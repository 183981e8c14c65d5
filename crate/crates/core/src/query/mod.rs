//! Conjunctive, union and aggregate-relational queries: AST, parsing,
//! classification, grounding and evaluation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::data::{Constant, Database, FactHandle};
use crate::error::{Error, Result};

mod eval;
mod parser;

pub use eval::{eval_aggregate, evaluate, evaluate_union, feature_value, is_satisfied};
pub use parser::parse_query;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Term {
    Var(String),
    Const(Constant),
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "{v}"),
            Term::Const(Constant::Int(n)) => write!(f, "{n}"),
            Term::Const(Constant::Str(s)) => write!(f, "'{s}'"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Atom {
    pub relation: String,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn vars(&self) -> impl Iterator<Item = &str> {
        self.args.iter().filter_map(|t| match t {
            Term::Var(v) => Some(v.as_str()),
            Term::Const(_) => None,
        })
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(|t| matches!(t, Term::Const(_)))
    }

    /// Does `fact` match this atom on its own: constants agree and repeated
    /// variables take consistent values?
    pub fn unifies_with(&self, fact: &[Constant]) -> bool {
        if fact.len() != self.args.len() {
            return false;
        }
        let mut seen: BTreeMap<&str, &Constant> = BTreeMap::new();
        for (term, value) in self.args.iter().zip(fact) {
            match term {
                Term::Const(c) => {
                    if c != value {
                        return false;
                    }
                }
                Term::Var(v) => match seen.get(v.as_str()) {
                    Some(prev) => {
                        if *prev != value {
                            return false;
                        }
                    }
                    None => {
                        seen.insert(v, value);
                    }
                },
            }
        }
        true
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.relation)?;
        for (i, t) in self.args.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{t}")?;
        }
        write!(f, ")")
    }
}

/// A conjunctive query written as a logic rule
/// `name(x̄) :- R1(t̄1), …, Rn(t̄n)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ConjunctiveQuery {
    pub name: String,
    pub head: Vec<String>,
    pub body: Vec<Atom>,
}

impl ConjunctiveQuery {
    pub fn boolean(body: Vec<Atom>) -> Self {
        ConjunctiveQuery {
            name: "q".to_string(),
            head: Vec::new(),
            body,
        }
    }

    pub fn is_boolean(&self) -> bool {
        self.head.is_empty()
    }

    pub fn body_vars(&self) -> BTreeSet<&str> {
        self.body.iter().flat_map(|a| a.vars()).collect()
    }

    /// Body variables that do not occur in the head.
    pub fn existential_vars(&self) -> BTreeSet<&str> {
        let mut vars = self.body_vars();
        for h in &self.head {
            vars.remove(h.as_str());
        }
        vars
    }

    /// Safety: every head variable occurs at least once in the body.
    pub fn check_safety(&self) -> Result<()> {
        let body = self.body_vars();
        for h in &self.head {
            if !body.contains(h.as_str()) {
                return Err(Error::UnsafeHead {
                    variable: h.clone(),
                });
            }
        }
        Ok(())
    }
}

impl fmt::Display for ConjunctiveQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.name)?;
        for (i, v) in self.head.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, ") :- ")?;
        for (i, a) in self.body.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{a}")?;
        }
        Ok(())
    }
}

/// A union of conjunctive queries sharing one head variable list.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct UnionQuery {
    pub branches: Vec<ConjunctiveQuery>,
}

impl UnionQuery {
    pub fn new(branches: Vec<ConjunctiveQuery>) -> Result<Self> {
        if branches.is_empty() {
            return Err(Error::Internal("empty union".into()));
        }
        let head = &branches[0].head;
        for b in &branches[1..] {
            if &b.head != head {
                return Err(Error::Syntax {
                    line: 0,
                    column: 0,
                    message: "union branches must share the same head".into(),
                });
            }
        }
        Ok(UnionQuery { branches })
    }

    pub fn is_boolean(&self) -> bool {
        self.branches[0].is_boolean()
    }
}

impl fmt::Display for UnionQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, b) in self.branches.iter().enumerate() {
            if i > 0 {
                write!(f, " ; ")?;
            }
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AggKind {
    Count,
    Sum,
    Max,
    Min,
}

impl fmt::Display for AggKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            AggKind::Count => "count",
            AggKind::Sum => "sum",
            AggKind::Max => "max",
            AggKind::Min => "min",
        };
        write!(f, "{s}")
    }
}

/// Feature function over a head tuple: constant one, one column, or the
/// product of two columns. Columns are 1-based head positions and must hold
/// integer constants at evaluation time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FeatureExpr {
    One,
    Col(usize),
    Prod(usize, usize),
}

/// `kind⟨feature⟩[inner]`: aggregate over the answers of a conjunctive query.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AggregateQuery {
    pub kind: AggKind,
    pub feature: FeatureExpr,
    pub inner: ConjunctiveQuery,
}

impl fmt::Display for AggregateQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.kind, self.feature) {
            (AggKind::Count, _) => write!(f, "count( {} )", self.inner),
            (kind, FeatureExpr::Col(i)) => write!(f, "{kind}{{col={i}}}( {} )", self.inner),
            (kind, FeatureExpr::Prod(i, j)) => {
                write!(f, "{kind}{{col={i}*{j}}}( {} )", self.inner)
            }
            (kind, FeatureExpr::One) => write!(f, "{kind}{{col=1}}( {} )", self.inner),
        }
    }
}

/// Any parseable query.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Query {
    Cq(ConjunctiveQuery),
    Union(UnionQuery),
    Aggregate(AggregateQuery),
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Query::Cq(q) => write!(f, "{q}"),
            Query::Union(q) => write!(f, "{q}"),
            Query::Aggregate(q) => write!(f, "{q}"),
        }
    }
}

/// Structural properties that pick the applicable engines.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Classification {
    pub self_join_free: bool,
    pub hierarchical: bool,
    /// Body atom indices grouped by transitive variable sharing.
    pub components: Vec<Vec<usize>>,
}

/// Classifies a conjunctive query.
///
/// The hierarchy test ranges over existential variables only: for every two
/// existential variables the sets of atoms containing them must be nested or
/// disjoint.
pub fn classify(q: &ConjunctiveQuery) -> Classification {
    let mut seen = BTreeSet::new();
    let mut self_join_free = true;
    for atom in &q.body {
        if !seen.insert(atom.relation.as_str()) {
            self_join_free = false;
        }
    }

    let existential = q.existential_vars();
    let atom_sets: BTreeMap<&str, BTreeSet<usize>> = existential
        .iter()
        .map(|v| {
            let set = q
                .body
                .iter()
                .enumerate()
                .filter(|(_, a)| a.vars().any(|w| w == *v))
                .map(|(i, _)| i)
                .collect();
            (*v, set)
        })
        .collect();
    let mut hierarchical = true;
    let vars: Vec<&str> = existential.iter().copied().collect();
    'outer: for i in 0..vars.len() {
        for j in i + 1..vars.len() {
            let a = &atom_sets[vars[i]];
            let b = &atom_sets[vars[j]];
            let nested = a.is_subset(b) || b.is_subset(a);
            let disjoint = a.is_disjoint(b);
            if !nested && !disjoint {
                hierarchical = false;
                break 'outer;
            }
        }
    }

    Classification {
        self_join_free,
        hierarchical,
        components: components_by_shared_vars(&q.body),
    }
}

pub(crate) fn components_by_shared_vars(body: &[Atom]) -> Vec<Vec<usize>> {
    let n = body.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        if parent[i] != i {
            let root = find(parent, parent[i]);
            parent[i] = root;
        }
        parent[i]
    }
    let mut owner: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, atom) in body.iter().enumerate() {
        for v in atom.vars() {
            match owner.get(v) {
                Some(&j) => {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    if a != b {
                        parent[a] = b;
                    }
                }
                None => {
                    owner.insert(v, i);
                }
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().push(i);
    }
    let mut components: Vec<Vec<usize>> = groups.into_values().collect();
    components.sort_by_key(|c| c[0]);
    components
}

/// Substitutes an answer tuple for the head variables, yielding the Boolean
/// query `q[x̄ → ā]`.
pub fn ground(q: &ConjunctiveQuery, answer: &[Constant]) -> Result<ConjunctiveQuery> {
    if answer.len() != q.head.len() {
        return Err(Error::QueryArity {
            relation: q.name.clone(),
            expected: q.head.len(),
            found: answer.len(),
        });
    }
    let mut subst: BTreeMap<&str, &Constant> = BTreeMap::new();
    for (var, value) in q.head.iter().zip(answer) {
        match subst.get(var.as_str()) {
            Some(prev) if *prev != value => {
                return Err(Error::Internal(format!(
                    "conflicting substitution for repeated head variable {var}"
                )))
            }
            _ => {
                subst.insert(var, value);
            }
        }
    }
    let body = q
        .body
        .iter()
        .map(|atom| Atom {
            relation: atom.relation.clone(),
            args: atom
                .args
                .iter()
                .map(|t| match t {
                    Term::Var(v) => match subst.get(v.as_str()) {
                        Some(c) => Term::Const((*c).clone()),
                        None => t.clone(),
                    },
                    Term::Const(_) => t.clone(),
                })
                .collect(),
        })
        .collect();
    Ok(ConjunctiveQuery {
        name: q.name.clone(),
        head: Vec::new(),
        body,
    })
}

/// Endogenous facts that are homomorphic images of some atom of `q`.
/// Every endogenous fact outside this set is a null player.
pub fn concerned_facts(q: &ConjunctiveQuery, db: &Database) -> Vec<FactHandle> {
    let mut result = Vec::new();
    for handle in db.endo_handles() {
        let fact = db.endo_fact(handle);
        let concerned = q
            .body
            .iter()
            .any(|atom| atom.relation == fact.relation && atom.unifies_with(&fact.tuple));
        if concerned {
            result.push(handle);
        }
    }
    result
}
