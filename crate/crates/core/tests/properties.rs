//! Property tests for the spec-level invariants: parser round trips,
//! classification invariance, evaluation monotonicity, loader round trips
//! and count-table bounds.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use proptest::prelude::*;

use factshap::data::{Constant, Database, EndoMask, Provenance};
use factshap::query::{
    classify, evaluate, ground, parse_query, Atom, ConjunctiveQuery, Query, Term,
};
use factshap::{exact, oracle, tuple, BooleanQuery};

// fixed schema shared by query and database generators
const SCHEMA: [(&str, usize); 4] = [("A", 1), ("B", 2), ("C", 2), ("D", 1)];
const VARS: [&str; 4] = ["x", "y", "z", "w"];

fn term_strategy() -> impl Strategy<Value = Term> {
    prop_oneof![
        3 => proptest::sample::select(&VARS[..]).prop_map(|v| Term::Var(v.to_string())),
        1 => (1..=4i64).prop_map(|n| Term::Const(Constant::Int(n))),
        1 => "[a-c]{1,2}".prop_map(|s| Term::Const(Constant::Str(s))),
    ]
}

fn atom_strategy(rel_idx: usize) -> impl Strategy<Value = Atom> {
    let (name, arity) = SCHEMA[rel_idx];
    proptest::collection::vec(term_strategy(), arity).prop_map(move |args| Atom {
        relation: name.to_string(),
        args,
    })
}

/// Self-join-free body over a random subset of the schema.
fn body_strategy() -> impl Strategy<Value = Vec<Atom>> {
    proptest::sample::subsequence(vec![0usize, 1, 2, 3], 1..=4).prop_flat_map(|rels| {
        rels.into_iter()
            .map(atom_strategy)
            .collect::<Vec<_>>()
            .prop_map(|atoms| atoms)
    })
}

fn cq_strategy() -> impl Strategy<Value = ConjunctiveQuery> {
    (body_strategy(), proptest::collection::vec(any::<bool>(), 4)).prop_map(|(body, keep)| {
        let mut vars: Vec<String> = Vec::new();
        for atom in &body {
            for v in atom.vars() {
                if !vars.iter().any(|w| w == v) {
                    vars.push(v.to_string());
                }
            }
        }
        let head: Vec<String> = vars
            .into_iter()
            .enumerate()
            .filter(|(i, _)| keep.get(*i).copied().unwrap_or(false))
            .map(|(_, v)| v)
            .collect();
        ConjunctiveQuery {
            name: "q".to_string(),
            head,
            body,
        }
    })
}

fn db_strategy() -> impl Strategy<Value = Database> {
    let fact = (
        0usize..SCHEMA.len(),
        proptest::collection::vec(1..=4i64, 3),
        any::<bool>(),
    );
    proptest::collection::vec(fact, 0..24).prop_map(|rows| {
        let mut b = Database::builder();
        for (name, arity) in SCHEMA {
            b = b.relation(name, arity);
        }
        for (rel, values, endo) in rows {
            let (name, arity) = SCHEMA[rel];
            let tuple: Vec<Constant> = values.into_iter().take(arity).map(Constant::Int).collect();
            let provenance = if endo {
                Provenance::Endogenous
            } else {
                Provenance::Exogenous
            };
            b = b.fact(name, provenance, tuple);
        }
        b.build()
    })
}

/// A pair of masks with `small ⊆ large`.
fn mask_pair(m: usize) -> impl Strategy<Value = (EndoMask, EndoMask)> {
    (
        proptest::collection::vec(any::<bool>(), m),
        proptest::collection::vec(any::<bool>(), m),
    )
        .prop_map(move |(large_bits, keep)| {
            let mut large = EndoMask::empty(m);
            let mut small = EndoMask::empty(m);
            for i in 0..m {
                large.set(i, large_bits[i]);
                small.set(i, large_bits[i] && keep[i]);
            }
            (small, large)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(160))]

    #[test]
    fn printer_parser_round_trip(q in cq_strategy()) {
        let printed = q.to_string();
        let reparsed = parse_query(&printed).unwrap();
        prop_assert_eq!(reparsed, Query::Cq(q));
    }

    #[test]
    fn classification_is_invariant_under_reordering_and_renaming(
        q in cq_strategy(),
        seed in any::<u64>(),
    ) {
        use rand::{seq::SliceRandom, SeedableRng};
        let base = classify(&q);

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut body = q.body.clone();
        body.shuffle(&mut rng);
        let reordered = ConjunctiveQuery { name: q.name.clone(), head: q.head.clone(), body };
        let c = classify(&reordered);
        prop_assert_eq!(c.hierarchical, base.hierarchical);
        prop_assert_eq!(c.self_join_free, base.self_join_free);

        let rename: BTreeMap<&str, String> =
            VARS.iter().map(|v| (*v, format!("{v}_r"))).collect();
        let renamed = ConjunctiveQuery {
            name: q.name.clone(),
            head: q.head.iter().map(|h| rename[h.as_str()].clone()).collect(),
            body: q.body.iter().map(|a| Atom {
                relation: a.relation.clone(),
                args: a.args.iter().map(|t| match t {
                    Term::Var(v) => Term::Var(rename[v.as_str()].clone()),
                    c => c.clone(),
                }).collect(),
            }).collect(),
        };
        let c = classify(&renamed);
        prop_assert_eq!(c.hierarchical, base.hierarchical);
        prop_assert_eq!(c.self_join_free, base.self_join_free);
    }

    #[test]
    fn evaluation_is_monotone(
        q in cq_strategy(),
        db in db_strategy(),
        masks in (0usize..1).prop_flat_map(|_| mask_pair(24)),
    ) {
        let m = db.endo_count();
        let mut small = EndoMask::empty(m);
        let mut large = EndoMask::empty(m);
        for i in 0..m {
            small.set(i, masks.0.contains(i));
            large.set(i, masks.1.contains(i));
        }
        let lo = evaluate(&q, &db, Some(&small)).unwrap();
        let hi = evaluate(&q, &db, Some(&large)).unwrap();
        prop_assert!(lo.is_subset(&hi));
    }

    #[test]
    fn grounded_answers_hold(q in cq_strategy(), db in db_strategy()) {
        let answers = evaluate(&q, &db, None).unwrap();
        for answer in answers.iter().take(8) {
            let g = ground(&q, answer).unwrap();
            prop_assert!(factshap::query::is_satisfied(&g, &db, None).unwrap());
        }
    }

    #[test]
    fn export_reload_round_trip(db in db_strategy()) {
        let dir = tempfile::tempdir().unwrap();
        let manifest = db.export_csv(dir.path()).unwrap();
        let (reloaded, _) = factshap::load_database(&manifest).unwrap();
        prop_assert_eq!(db, reloaded);
    }
}

// --- count-table invariants on seeded hierarchical instances ---

#[test]
fn count_table_is_bounded_by_binomials() {
    for seed in 0..40 {
        let inst = factshap::synth::random_hierarchical_instance(seed);
        let table = exact::cnt_sat_table(&inst.db, &inst.query).unwrap();
        let m = inst.db.endo_count();
        let facts: Vec<BigInt> = {
            let mut f = vec![BigInt::one()];
            for i in 1..=m {
                let last = f.last().unwrap().clone();
                f.push(last * BigInt::from(i));
            }
            f
        };
        for k in 0..=m {
            let binom = &facts[m] / (&facts[k] * &facts[m - k]);
            assert!(
                BigInt::from(table.count(k)) <= binom,
                "seed {seed}: counts[{k}] exceeds C({m},{k})"
            );
        }
    }
}

#[test]
fn count_table_is_invariant_under_renaming_and_reordering() {
    use rand::{seq::SliceRandom, SeedableRng};
    for seed in 0..25 {
        let inst = factshap::synth::random_hierarchical_instance(seed);
        let base = exact::cnt_sat_table(&inst.db, &inst.query).unwrap();

        // reorder body atoms
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0xabcd);
        let mut body = inst.query.body.clone();
        body.shuffle(&mut rng);
        let shuffled = ConjunctiveQuery {
            name: inst.query.name.clone(),
            head: vec![],
            body,
        };
        let t = exact::cnt_sat_table(&inst.db, &shuffled).unwrap();
        assert_eq!(base, t, "seed {seed}: atom order changed the counts");

        // rename constants with a fixed bijection n -> n + 100
        let rename = |c: &Constant| match c {
            Constant::Int(n) => Constant::Int(n + 100),
            Constant::Str(s) => Constant::Str(format!("{s}_r")),
        };
        let mut b = Database::builder();
        for rel in inst.db.relations() {
            b = b.relation(rel.name(), rel.arity());
        }
        for rel in inst.db.relations() {
            for (t, p, _) in rel.facts() {
                b = b.fact(rel.name(), p, t.iter().map(&rename).collect());
            }
        }
        let renamed_db = b.build();
        let renamed_q = ConjunctiveQuery {
            name: inst.query.name.clone(),
            head: vec![],
            body: inst
                .query
                .body
                .iter()
                .map(|a| Atom {
                    relation: a.relation.clone(),
                    args: a
                        .args
                        .iter()
                        .map(|t| match t {
                            Term::Const(c) => Term::Const(rename(c)),
                            v => v.clone(),
                        })
                        .collect(),
                })
                .collect(),
        };
        let t = exact::cnt_sat_table(&renamed_db, &renamed_q).unwrap();
        assert_eq!(base, t, "seed {seed}: constant renaming changed the counts");
    }
}

/// Statistical smoke check: `counts[k] / C(m,k)` is the probability that a
/// uniformly random k-subset satisfies the query.
#[test]
fn count_table_matches_sampled_satisfaction_rates() {
    use rand::{seq::SliceRandom, SeedableRng};
    let db = factshap::fixtures::rs_pairs();
    let q = match parse_query("q() :- R(x,y), S(x,z)").unwrap() {
        Query::Cq(c) => c,
        _ => unreachable!(),
    };
    let table = exact::cnt_sat_table(&db, &q).unwrap();
    let m = db.endo_count();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
    for k in [2usize, 3, 4] {
        let mut expected = BigRational::from(BigInt::from(table.count(k)));
        let mut denom = BigRational::one();
        for i in 0..k {
            denom *= BigRational::new(BigInt::from(m - i), BigInt::from(i + 1));
        }
        expected /= denom;
        let p_true = {
            use num_traits::ToPrimitive;
            expected.to_f64().unwrap()
        };
        let trials = 4000;
        let mut hits = 0u32;
        let mut idx: Vec<usize> = (0..m).collect();
        for _ in 0..trials {
            idx.shuffle(&mut rng);
            let mut mask = EndoMask::empty(m);
            for &i in idx.iter().take(k) {
                mask.set(i, true);
            }
            if factshap::query::is_satisfied(&q, &db, Some(&mask)).unwrap() {
                hits += 1;
            }
        }
        let observed = f64::from(hits) / f64::from(trials);
        assert!(
            (observed - p_true).abs() < 0.05,
            "k={k}: observed {observed}, expected {p_true}"
        );
    }
}

/// Every nonzero Shapley value of a Boolean CQ is at least `(m−k)!/m!`
/// where `k` is the number of atoms, and all values sit in `[0, 1]`.
#[test]
fn boolean_shapley_bounds() {
    for seed in 200..240 {
        let inst = factshap::synth::random_hierarchical_instance(seed);
        let m = inst.db.endo_count();
        let k = inst.query.body.len();
        let mut lower = BigRational::one();
        if k <= m {
            for i in 0..k {
                lower /= BigRational::from(BigInt::from(m - i));
            }
        }
        let one = BigRational::one();
        for f in inst.db.endo_handles() {
            let v = exact::shapley_boolean(&inst.db, &inst.query, f).unwrap();
            let r = v.rational();
            assert!(r >= &BigRational::zero() && r <= &one, "seed {seed}");
            if !r.is_zero() && k <= m {
                assert!(
                    r >= &lower,
                    "seed {seed}: value {r} below lower bound {lower}"
                );
            }
        }
    }
}

/// Boolean efficiency: the values sum to 1 when the endogenous facts are
/// needed, 0 when the query holds exogenously or not at all.
#[test]
fn boolean_efficiency_axiom() {
    for seed in 300..340 {
        let inst = factshap::synth::random_hierarchical_instance(seed);
        let db = &inst.db;
        let q = &inst.query;
        let full = factshap::query::is_satisfied(q, db, None).unwrap();
        let empty = EndoMask::empty(db.endo_count());
        let exo_only = factshap::query::is_satisfied(q, db, Some(&empty)).unwrap();
        let mut total = BigRational::zero();
        for f in db.endo_handles() {
            total += exact::shapley_boolean(db, q, f).unwrap().rational().clone();
        }
        let expected = if full && !exo_only {
            BigRational::one()
        } else {
            BigRational::zero()
        };
        assert_eq!(total, expected, "seed {seed}");
    }
}

/// Null players: facts outside the concerned set score exactly zero under
/// both measures.
#[test]
fn null_players_score_zero() {
    let db = Database::builder()
        .relation("B", 2)
        .relation("Z", 1)
        .endo("B", tuple![1, 1])
        .endo("B", tuple![1, 2])
        .endo("Z", tuple![9])
        .build();
    let q = match parse_query("q() :- B(x,x)").unwrap() {
        Query::Cq(c) => c,
        _ => unreachable!(),
    };
    let concerned = factshap::concerned_facts(&q, &db);
    assert_eq!(concerned.len(), 1);
    for f in db.endo_handles() {
        if !concerned.contains(&f) {
            assert!(exact::shapley_boolean(&db, &q, f).unwrap().is_zero());
            assert!(exact::banzhaf_boolean(&db, &q, f).unwrap().is_zero());
            let game = oracle::CooperativeGame::new(
                &db,
                factshap::NumericQuery::Boolean(BooleanQuery::Cq(&q)),
            )
            .unwrap();
            assert!(oracle::brute_shapley(&game, f).is_zero());
        }
    }
}
