//! Error type shared by the loader, the parser and the engines.

use thiserror::Error;

/// Everything that can go wrong across the crate.
#[derive(Debug, Error)]
pub enum Error {
    // --- data loading ---
    #[error("relation {relation}: row {row} has {found} columns, expected {expected}")]
    ArityMismatch {
        relation: String,
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error(
        "relation {relation}: row {row}: provenance cell {value:?} is not \"endo\" or \"exo\""
    )]
    BadProvenanceValue {
        relation: String,
        row: usize,
        value: String,
    },
    #[error("relation {0} declared more than once in the manifest")]
    DuplicateRelation(String),
    #[error("relation {relation}: provenance column {column:?} missing from CSV header")]
    MissingProvenanceColumn { relation: String, column: String },
    #[error("manifest: {0}")]
    BadManifest(String),

    // --- fact lookup ---
    #[error("fact {0} not present in the database")]
    FactNotFound(String),
    #[error("fact {0} is exogenous; only endogenous facts carry attribution")]
    NotEndogenous(String),

    // --- parsing ---
    #[error("syntax error at {line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unsafe head: variable {variable} does not occur in the body")]
    UnsafeHead { variable: String },

    // --- evaluation ---
    #[error("unknown relation {0}")]
    UnknownRelation(String),
    #[error("atom over {relation} has {found} arguments, relation arity is {expected}")]
    QueryArity {
        relation: String,
        expected: usize,
        found: usize,
    },
    #[error("feature column {column} of answer {answer} is not an integer")]
    NonNumericFeature { column: usize, answer: String },

    // --- exact engines ---
    #[error("query is not hierarchical; the exact engine does not apply")]
    NotHierarchical,
    #[error("query has a self-join on relation {0}; the exact engine does not apply")]
    SelfJoin(String),
    #[error("max/min engine requires a single-atom body, found {0} atoms")]
    NotSingleAtom(usize),
    #[error("expected a Boolean query (empty head), found head arity {0}")]
    NotBoolean(usize),

    // --- sampling ---
    #[error("query kind is not accepted by the Monte Carlo sampler: {0}")]
    NotMonotone(String),
    #[error("sampler parameter {name} = {value} outside (0, 1)")]
    Domain { name: &'static str, value: f64 },
    #[error("cannot compute a finite range bound for the per-trial marginals")]
    UnboundedRange,

    // --- oracle ---
    #[error("{0} endogenous facts exceed the brute-force ceiling of {1}")]
    TooManyPlayers(usize, usize),
    #[error("relation {relation} has arity {arity}, expected a binary edge relation")]
    BadArity { relation: String, arity: usize },

    // --- plumbing ---
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error on {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
