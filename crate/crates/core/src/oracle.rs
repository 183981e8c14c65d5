//! Brute-force ground truth: exhaustive Shapley/Banzhaf over arbitrary
//! cooperative games on facts, subset counting by enumeration, and graph
//! reachability as a monotone Boolean query.
//!
//! Everything here is exponential in the number of endogenous facts and
//! guarded at [`MAX_PLAYERS`]; the engines in [`crate::exact`] and
//! [`crate::approx`] are validated against these implementations.

use std::collections::{HashMap, VecDeque};
use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_traits::Zero;

use crate::data::{Constant, Database, EndoMask, FactHandle};
use crate::error::{Error, Result};
use crate::exact::ExactValue;
use crate::{BooleanQuery, NumericQuery};

/// Ceiling on `2^m` wealth evaluations; past this the CLI points users to
/// the sampler.
pub const MAX_PLAYERS: usize = 20;

/// Boolean reachability `source →* target` over a binary edge relation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReachabilityQuery {
    pub source: Constant,
    pub target: Constant,
    pub edge_relation: String,
}

impl fmt::Display for ReachabilityQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "reach({}, {}) over {}",
            self.source, self.target, self.edge_relation
        )
    }
}

/// True iff `target` is reachable from `source` over the edges visible
/// under `mask`.
pub fn eval_reachability(
    rq: &ReachabilityQuery,
    db: &Database,
    mask: Option<&EndoMask>,
) -> Result<bool> {
    let rel = db
        .relation(&rq.edge_relation)
        .ok_or_else(|| Error::UnknownRelation(rq.edge_relation.clone()))?;
    if rel.arity() != 2 {
        return Err(Error::BadArity {
            relation: rq.edge_relation.clone(),
            arity: rel.arity(),
        });
    }
    if rq.source == rq.target {
        return Ok(true);
    }
    let mut adjacency: HashMap<&Constant, Vec<&Constant>> = HashMap::new();
    for edge in db.visible_facts(&rq.edge_relation, mask) {
        adjacency.entry(&edge[0]).or_default().push(&edge[1]);
    }
    let mut seen: Vec<&Constant> = vec![&rq.source];
    let mut queue: VecDeque<&Constant> = VecDeque::from([&rq.source]);
    while let Some(node) = queue.pop_front() {
        for &next in adjacency.get(node).into_iter().flatten() {
            if next == &rq.target {
                return Ok(true);
            }
            if !seen.contains(&next) {
                seen.push(next);
                queue.push_back(next);
            }
        }
    }
    Ok(false)
}

/// The cooperative game of Definition-style wealth
/// `v(E) = α(D_x ∪ E) − α(D_x)` with the endogenous facts as players.
///
/// The wealth of every one of the `2^m` coalitions is evaluated once, in
/// binary counting order, and cached; per-player aggregation reads the
/// table only.
pub struct CooperativeGame<'a> {
    db: &'a Database,
    players: Vec<FactHandle>,
    wealth: Vec<i128>,
}

impl<'a> CooperativeGame<'a> {
    pub fn new(db: &'a Database, query: NumericQuery<'a>) -> Result<Self> {
        let m = db.endo_count();
        if m > MAX_PLAYERS {
            return Err(Error::TooManyPlayers(m, MAX_PLAYERS));
        }
        let baseline = query.value(db, Some(&EndoMask::empty(m)))?;
        let mut wealth = Vec::with_capacity(1usize << m);
        let mut mask = EndoMask::empty(m);
        for bits in 0u32..(1u32 << m) {
            for i in 0..m {
                mask.set(i, bits & (1 << i) != 0);
            }
            wealth.push(query.value(db, Some(&mask))? - baseline);
        }
        Ok(CooperativeGame {
            db,
            players: db.endo_handles().collect(),
            wealth,
        })
    }

    pub fn player_count(&self) -> usize {
        self.players.len()
    }

    pub fn players(&self) -> &[FactHandle] {
        &self.players
    }

    pub fn db(&self) -> &Database {
        self.db
    }

    pub fn wealth(&self, coalition_bits: u32) -> i128 {
        self.wealth[coalition_bits as usize]
    }

    /// Wealth of the grand coalition, `v(A) = α(D) − α(D_x)`.
    pub fn total_wealth(&self) -> i128 {
        *self.wealth.last().expect("wealth table is never empty")
    }
}

/// Exact Shapley value by enumerating all coalitions excluding the player.
pub fn brute_shapley(game: &CooperativeGame, player: FactHandle) -> ExactValue {
    let m = game.player_count();
    let p = player.index();
    debug_assert!(p < m);
    // group marginal contributions by coalition size
    let mut by_size = vec![0i128; m];
    let all = (1u32 << m) - 1;
    let without_p = all & !(1u32 << p);
    let mut mask = without_p;
    loop {
        let k = mask.count_ones() as usize;
        by_size[k] += game.wealth(mask | (1 << p)) - game.wealth(mask);
        if mask == 0 {
            break;
        }
        mask = (mask - 1) & without_p;
    }
    weighted_by_size(&by_size, m)
}

fn weighted_by_size(by_size: &[i128], m: usize) -> ExactValue {
    let facts = crate::numeric::factorials(m);
    let mut numerator = BigInt::zero();
    for (k, delta) in by_size.iter().enumerate() {
        if *delta != 0 {
            let coeff = BigInt::from(&facts[k] * &facts[m - k - 1]);
            numerator += coeff * BigInt::from(*delta);
        }
    }
    ExactValue::from_ratio(numerator, BigInt::from(facts[m].clone()))
}

/// Exact Banzhaf power index: uniform coefficient `1 / 2^(m−1)`.
pub fn brute_banzhaf(game: &CooperativeGame, player: FactHandle) -> ExactValue {
    let m = game.player_count();
    let p = player.index();
    let mut total = BigInt::zero();
    let all = (1u32 << m) - 1;
    let without_p = all & !(1u32 << p);
    let mut mask = without_p;
    loop {
        let delta = game.wealth(mask | (1 << p)) - game.wealth(mask);
        total += BigInt::from(delta);
        if mask == 0 {
            break;
        }
        mask = (mask - 1) & without_p;
    }
    ExactValue::from_ratio(total, BigInt::from(1u64) << (m - 1))
}

/// `|Sat(D, q, k)|` for every `k = 0..=m`, by exhaustive enumeration.
pub fn brute_cnt_sat_all(db: &Database, q: BooleanQuery) -> Result<Vec<BigUint>> {
    let m = db.endo_count();
    if m > MAX_PLAYERS {
        return Err(Error::TooManyPlayers(m, MAX_PLAYERS));
    }
    let mut counts = vec![BigUint::zero(); m + 1];
    let mut mask = EndoMask::empty(m);
    for bits in 0u32..(1u32 << m) {
        for i in 0..m {
            mask.set(i, bits & (1 << i) != 0);
        }
        if q.holds(db, Some(&mask))? {
            counts[bits.count_ones() as usize] += 1u32;
        }
    }
    Ok(counts)
}

/// The number of size-`k` endogenous subsets `E` with `D_x ∪ E ⊨ q`.
pub fn brute_cnt_sat(db: &Database, q: BooleanQuery, k: usize) -> Result<BigUint> {
    let counts = brute_cnt_sat_all(db, q)?;
    Ok(counts.get(k).cloned().unwrap_or_else(BigUint::zero))
}
