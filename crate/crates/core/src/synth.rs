//! Synthetic databases and queries for randomized validation and scale
//! benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{Database, Provenance};
use crate::query::{classify, Atom, ConjunctiveQuery, Term};
use crate::tuple;

pub struct RandomInstance {
    pub db: Database,
    pub query: ConjunctiveQuery,
}

/// A random hierarchical self-join-free Boolean instance: at most 4 atoms,
/// at most 8 endogenous facts, constants drawn from {1..6}. Deterministic
/// in `seed`. Unconcerned endogenous facts are deliberately possible.
pub fn random_hierarchical_instance(seed: u64) -> RandomInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vars = ["x", "y", "z", "w"];

    let query = loop {
        let n_atoms = rng.gen_range(1..=4);
        let mut body = Vec::with_capacity(n_atoms);
        for i in 0..n_atoms {
            let arity = rng.gen_range(1..=2);
            let args = (0..arity)
                .map(|_| {
                    if rng.gen_bool(0.75) {
                        Term::Var(vars[rng.gen_range(0..vars.len())].to_string())
                    } else {
                        Term::Const(crate::data::Constant::Int(rng.gen_range(1..=6)))
                    }
                })
                .collect();
            body.push(Atom {
                relation: format!("R{i}"),
                args,
            });
        }
        let q = ConjunctiveQuery::boolean(body);
        let c = classify(&q);
        if c.self_join_free && c.hierarchical {
            break q;
        }
    };

    // facts for the query's relations plus an occasional unrelated one
    let mut builder = Database::builder();
    let mut decls: Vec<(String, usize)> = query
        .body
        .iter()
        .map(|a| (a.relation.clone(), a.args.len()))
        .collect();
    if rng.gen_bool(0.3) {
        decls.push(("Z".to_string(), 1));
    }
    for (name, arity) in &decls {
        builder = builder.relation(name, *arity);
    }
    let mut endo_total = 0usize;
    for (name, arity) in &decls {
        let n_facts = rng.gen_range(0..=4);
        for _ in 0..n_facts {
            let row: Vec<crate::data::Constant> = (0..*arity)
                .map(|_| crate::data::Constant::Int(rng.gen_range(1..=6)))
                .collect();
            let provenance = if endo_total < 8 && rng.gen_bool(0.5) {
                endo_total += 1;
                Provenance::Endogenous
            } else {
                Provenance::Exogenous
            };
            builder = builder.fact(name, provenance, row);
        }
    }
    let mut db = builder.build();
    if db.endo_count() == 0 {
        // force one player so every instance exercises the engines
        let (name, arity) = decls[0].clone();
        let mut b = Database::builder();
        for (n, a) in &decls {
            b = b.relation(n, *a);
        }
        for rel in db.relations() {
            for (t, p, _) in rel.facts() {
                b = b.fact(rel.name(), p, t.to_vec());
            }
        }
        b = b.fact(
            &name,
            Provenance::Endogenous,
            (0..arity)
                .map(|_| crate::data::Constant::Int(rng.gen_range(1..=6)))
                .collect(),
        );
        db = b.build();
    }
    RandomInstance { db, query }
}

/// Hierarchical scale instance: `groups` root values, each with two R and
/// two S facts, all endogenous. `q() :- R(x,y), S(x,z)`, `m = 4·groups`.
pub fn hierarchical_scale(groups: usize) -> (Database, ConjunctiveQuery) {
    let mut b = Database::builder().relation("R", 2).relation("S", 2);
    for g in 0..groups as i64 {
        b = b
            .endo("R", tuple![g, 10 * g + 1])
            .endo("R", tuple![g, 10 * g + 2])
            .endo("S", tuple![g, 10 * g + 3])
            .endo("S", tuple![g, 10 * g + 4]);
    }
    let q = ConjunctiveQuery::boolean(vec![
        Atom {
            relation: "R".into(),
            args: vec![Term::Var("x".into()), Term::Var("y".into())],
        },
        Atom {
            relation: "S".into(),
            args: vec![Term::Var("x".into()), Term::Var("z".into())],
        },
    ]);
    (b.build(), q)
}

/// Non-hierarchical chain instance shaped like
/// `q() :- R(x,y), S(x,z), T(z,w)`: `triples` independent satisfying
/// triples plus `extra` dangling R facts. `m = 3·triples + extra`.
pub fn chain_scale(triples: usize, extra: usize) -> (Database, ConjunctiveQuery) {
    let mut b = Database::builder()
        .relation("R", 2)
        .relation("S", 2)
        .relation("T", 2);
    for i in 0..triples as i64 {
        b = b
            .endo("R", tuple![i, 0])
            .endo("S", tuple![i, i])
            .endo("T", tuple![i, 0]);
    }
    for j in 0..extra as i64 {
        b = b.endo("R", tuple![1_000_000 + j, 0]);
    }
    let q = ConjunctiveQuery::boolean(vec![
        Atom {
            relation: "R".into(),
            args: vec![Term::Var("x".into()), Term::Var("y".into())],
        },
        Atom {
            relation: "S".into(),
            args: vec![Term::Var("x".into()), Term::Var("z".into())],
        },
        Atom {
            relation: "T".into(),
            args: vec![Term::Var("z".into()), Term::Var("w".into())],
        },
    ]);
    (b.build(), q)
}
