//! Quantifying how much each database fact contributes to a query answer.
//!
//! Facts are split into exogenous context and endogenous facts; the
//! endogenous facts play a cooperative game whose wealth is the query
//! result, and each fact is scored by its Shapley value or by the causal
//! effect (equivalently, the Banzhaf power index).
//!
//! The crate provides:
//!
//! - [`data`]: facts with provenance, CSV/manifest loading;
//! - [`query`]: conjunctive, union and aggregate-relational queries —
//!   parsing, classification, grounding and evaluation;
//! - [`exact`]: polynomial-time exact engines for hierarchical
//!   self-join-free queries (subset-counting dynamic program, sums and
//!   counts via linearity, single-atom max/min);
//! - [`approx`]: seeded Monte Carlo estimators with Hoeffding trial counts;
//! - [`oracle`]: brute-force enumeration over arbitrary cooperative games,
//!   including graph reachability, used as ground truth.

pub mod approx;
pub mod data;
pub mod error;
pub mod exact;
pub mod fixtures;
pub(crate) mod numeric;
pub mod oracle;
pub mod query;
pub mod synth;

pub use data::{load_database, Manifest, ManifestRelation, ProvenancePolicy};
pub use data::{Constant, Database, EndoMask, Fact, FactHandle, LoadReport, Provenance};
pub use error::{Error, Result};
pub use exact::{CountTable, ExactValue};
pub use query::{
    classify, concerned_facts, ground, parse_query, AggKind, AggregateQuery, Atom, Classification,
    ConjunctiveQuery, FeatureExpr, Query, Term, UnionQuery,
};

use oracle::ReachabilityQuery;

/// A monotone Boolean query: a Boolean conjunctive query, a Boolean union,
/// or graph reachability.
#[derive(Clone, Copy, Debug)]
pub enum BooleanQuery<'a> {
    Cq(&'a ConjunctiveQuery),
    Union(&'a UnionQuery),
    Reachability(&'a ReachabilityQuery),
}

impl<'a> BooleanQuery<'a> {
    pub fn holds(&self, db: &Database, mask: Option<&EndoMask>) -> Result<bool> {
        match self {
            BooleanQuery::Cq(q) => query::is_satisfied(q, db, mask),
            BooleanQuery::Union(u) => {
                for b in &u.branches {
                    if query::is_satisfied(b, db, mask)? {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
            BooleanQuery::Reachability(r) => oracle::eval_reachability(r, db, mask),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            BooleanQuery::Cq(q) => q.to_string(),
            BooleanQuery::Union(u) => u.to_string(),
            BooleanQuery::Reachability(r) => r.to_string(),
        }
    }
}

/// Anything that maps a database to a number: a monotone Boolean query
/// read as 0/1, or an aggregate-relational query.
#[derive(Clone, Copy, Debug)]
pub enum NumericQuery<'a> {
    Boolean(BooleanQuery<'a>),
    Aggregate(&'a AggregateQuery),
}

impl<'a> NumericQuery<'a> {
    pub fn value(&self, db: &Database, mask: Option<&EndoMask>) -> Result<i128> {
        match self {
            NumericQuery::Boolean(b) => Ok(i128::from(b.holds(db, mask)?)),
            NumericQuery::Aggregate(a) => query::eval_aggregate(a, db, mask),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            NumericQuery::Boolean(b) => b.describe(),
            NumericQuery::Aggregate(a) => a.to_string(),
        }
    }
}
