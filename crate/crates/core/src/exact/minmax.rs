//! Exact Shapley values for `max⟨φ⟩[q]` and `min⟨φ⟩[q]` when the inner
//! query has a single atom.
//!
//! With one atom, each fact contributes at most one answer, so the value a
//! permutation assigns to `f` depends only on the best feature value seen
//! before `f`. Counting permutations by that "best so far" value gives a
//! closed form: for each candidate value `v` strictly better than the
//! exogenous baseline and strictly worse than `φ(ā_f)`, count the ways to
//! pick the prefix facts so the running best is exactly `v`, weight by
//! `t!(N−t−1)!`, and divide by `N!`.
//!
//! When no exogenous answer exists the baseline is the empty aggregate,
//! which is 0 by definition; the only prefix realizing it is the empty one.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;

use crate::data::{Database, FactHandle, Provenance};
use crate::error::{Error, Result};
use crate::numeric::{factorials, Binomials};
use crate::query::{evaluate, feature_value, AggKind, AggregateQuery, Term};

use super::ExactValue;

/// Exact Shapley value of `f` for a single-atom max/min aggregate.
pub fn shapley_minmax(db: &Database, agg: &AggregateQuery, f: FactHandle) -> Result<ExactValue> {
    let maximize = match agg.kind {
        AggKind::Max => true,
        AggKind::Min => false,
        other => {
            return Err(Error::Internal(format!(
                "max/min engine expects max or min, got {other}"
            )))
        }
    };
    if agg.inner.body.len() != 1 {
        return Err(Error::NotSingleAtom(agg.inner.body.len()));
    }
    let atom = &agg.inner.body[0];
    if f.index() >= db.endo_count() {
        return Err(Error::FactNotFound(format!("{f}")));
    }

    let fact = db.endo_fact(f);
    if fact.relation != atom.relation || !atom.unifies_with(&fact.tuple) {
        // null player: f never produces an answer
        return Ok(ExactValue::zero());
    }
    let phi_f = feature_of_fact(agg, &fact.tuple)?;

    // concerned endogenous facts and their feature values; facts of other
    // relations or failing unification are null players and drop out of N
    let mut endo_values: Vec<i128> = Vec::new();
    let mut f_value_seen = false;
    if let Some(rel) = db.relation(&atom.relation) {
        for (tuple, provenance, endo_index) in rel.facts() {
            if provenance != Provenance::Endogenous || !atom.unifies_with(tuple) {
                continue;
            }
            if endo_index == Some(f.index()) {
                f_value_seen = true;
                continue;
            }
            endo_values.push(feature_of_fact(agg, tuple)?);
        }
    }
    debug_assert!(f_value_seen);
    let n_players = endo_values.len() + 1; // including f

    // exogenous baseline: best feature value over q(D_x)
    let empty = crate::data::EndoMask::empty(db.endo_count());
    let exo_answers = evaluate(&agg.inner, db, Some(&empty))?;
    let mut exo_best: Option<i128> = None;
    for answer in &exo_answers {
        let v = feature_value(agg.feature, answer)?;
        exo_best = Some(match exo_best {
            None => v,
            Some(b) => {
                if maximize {
                    b.max(v)
                } else {
                    b.min(v)
                }
            }
        });
    }

    // exogenous answer at least as good as f's: f never moves the aggregate
    if let Some(bound) = exo_best {
        let dominated = if maximize {
            bound >= phi_f
        } else {
            bound <= phi_f
        };
        if dominated {
            return Ok(ExactValue::zero());
        }
    }

    // candidate "best so far" values strictly between the baseline and φ_f
    let beats_baseline = |v: i128| match exo_best {
        None => true,
        Some(bound) => {
            if maximize {
                v > bound
            } else {
                v < bound
            }
        }
    };
    let worse_than_f = |v: i128| if maximize { v < phi_f } else { v > phi_f };
    let mut candidates: Vec<i128> = endo_values
        .iter()
        .copied()
        .filter(|&v| beats_baseline(v) && worse_than_f(v))
        .collect();
    candidates.sort_unstable();
    candidates.dedup();

    let facts = factorials(n_players);
    let mut binomials = Binomials::new();
    let mut numerator = BigRational::zero();

    // counts relative to a candidate value v
    let strictly_worse = |v: i128| {
        endo_values
            .iter()
            .filter(|&&w| if maximize { w < v } else { w > v })
            .count()
    };
    let equal_to = |v: i128| endo_values.iter().filter(|&&w| w == v).count();

    let perm_weight = |t: usize, facts: &[num_bigint::BigUint]| {
        BigInt::from(&facts[t] * &facts[n_players - t - 1])
    };

    // baseline term: the running best equals the exogenous baseline (or the
    // prefix is empty when there is none)
    match exo_best {
        Some(bound) => {
            let n_le = strictly_worse(bound) + equal_to(bound);
            let mut ways = BigInt::zero();
            for t in 0..=n_le {
                ways += perm_weight(t, &facts) * BigInt::from(binomials.get(n_le, t));
            }
            numerator += BigRational::from(ways * BigInt::from(phi_f - bound));
        }
        None => {
            // only f first realizes the empty aggregate, worth φ_f − 0
            let ways = perm_weight(0, &facts);
            numerator += BigRational::from(ways * BigInt::from(phi_f));
        }
    }

    // one term per candidate: at least one prefix fact sits exactly at v,
    // the rest strictly worse
    for v in candidates {
        let n_eq = equal_to(v);
        let n_lt = strictly_worse(v);
        let n_le = n_eq + n_lt;
        let mut ways = BigInt::zero();
        for t in 1..=n_le {
            let mut choices = BigInt::zero();
            for l in 1..=n_eq.min(t) {
                choices += BigInt::from(binomials.get(n_eq, l) * binomials.get(n_lt, t - l));
            }
            ways += perm_weight(t, &facts) * choices;
        }
        numerator += BigRational::from(ways * BigInt::from(phi_f - v));
    }

    let total = numerator / BigRational::from(BigInt::from(facts[n_players].clone()));
    Ok(ExactValue::from_rational(total))
}

/// Feature value of the answer a fact contributes: bind the atom's
/// variables from the fact tuple and project the head.
fn feature_of_fact(agg: &AggregateQuery, tuple: &[crate::data::Constant]) -> Result<i128> {
    let atom = &agg.inner.body[0];
    let answer: Vec<crate::data::Constant> = agg
        .inner
        .head
        .iter()
        .map(|h| {
            atom.args
                .iter()
                .zip(tuple)
                .find_map(|(term, value)| match term {
                    Term::Var(v) if v == h => Some(value.clone()),
                    _ => None,
                })
                .expect("head variable occurs in the single atom by safety")
        })
        .collect();
    feature_value(agg.feature, &answer)
}
