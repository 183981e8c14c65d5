//! The subset-counting dynamic program behind the exact Boolean engine.
//!
//! `cnt_sat(D, q, k)` counts the size-`k` subsets `E ⊆ D_n` with
//! `D_x ∪ E ⊨ q`, for a hierarchical self-join-free Boolean query. The
//! recursion has three cases:
//!
//! - every atom is ground: the only satisfying choice is the set of atoms
//!   that are endogenous facts of the database;
//! - a root variable occurs in all atoms: partition the database by the
//!   root value and combine per-value tables with the three-term
//!   inclusion–exclusion update over prefix counts;
//! - the atoms fall apart into variable-disjoint components: convolve the
//!   component tables over subset sizes.
//!
//! The core assumes every endogenous fact is a homomorphic image of the
//! atom over its relation. The public entry points establish that by
//! restricting to concerned facts and re-inflating the resulting table with
//! binomial factors over the pruned facts.

use std::collections::BTreeMap;
use std::rc::Rc;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde_json::json;

use crate::data::{Constant, Database, Provenance};
use crate::error::{Error, Result};
use crate::numeric::Binomials;
use crate::query::{classify, components_by_shared_vars, Atom, ConjunctiveQuery, Term};

/// The vector `|Sat(D, q, k)|` for `k = 0..=m_effective`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CountTable {
    counts: Vec<BigUint>,
}

impl CountTable {
    pub(crate) fn new(counts: Vec<BigUint>) -> Self {
        CountTable { counts }
    }

    /// Number of endogenous facts in the counted database.
    pub fn m_effective(&self) -> usize {
        self.counts.len() - 1
    }

    /// `|Sat(D, q, k)|`; zero beyond `m_effective`.
    pub fn count(&self, k: usize) -> BigUint {
        self.counts.get(k).cloned().unwrap_or_else(BigUint::zero)
    }

    pub fn counts(&self) -> &[BigUint] {
        &self.counts
    }

    pub fn total(&self) -> BigUint {
        self.counts.iter().sum()
    }
}

#[derive(Clone)]
struct SubFact {
    tuple: Rc<Vec<Constant>>,
    endo: bool,
}

/// Database slice carrying exactly the relations of the current query.
#[derive(Clone)]
struct SubDb {
    relations: BTreeMap<String, Vec<SubFact>>,
    endo_count: usize,
}

impl SubDb {
    fn facts(&self, relation: &str) -> &[SubFact] {
        self.relations
            .get(relation)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }
}

struct Ctx {
    binomials: Binomials,
    trace: bool,
}

fn zeros(len: usize) -> Vec<BigUint> {
    vec![BigUint::zero(); len]
}

/// One recursion step; returns `counts[0..=endo_count]` and a trace node.
fn table(db: &SubDb, atoms: &[Atom], ctx: &mut Ctx) -> Result<(Vec<BigUint>, serde_json::Value)> {
    let n = db.endo_count;

    // (a) variable-free base case
    if atoms.iter().all(Atom::is_ground) {
        let mut present = true;
        let mut endogenous_atoms = 0usize;
        for atom in atoms {
            let tuple: Vec<Constant> = atom
                .args
                .iter()
                .map(|t| match t {
                    Term::Const(c) => c.clone(),
                    Term::Var(_) => unreachable!("ground atom"),
                })
                .collect();
            match db.facts(&atom.relation).iter().find(|f| *f.tuple == tuple) {
                None => {
                    present = false;
                    break;
                }
                Some(f) if f.endo => endogenous_atoms += 1,
                Some(_) => {}
            }
        }
        let mut counts = zeros(n + 1);
        if present && endogenous_atoms <= n {
            counts[endogenous_atoms] = BigUint::one();
        }
        let node = json!({
            "case": "ground",
            "present": present,
            "endogenous_atoms": endogenous_atoms,
        });
        return Ok((counts, node));
    }

    // (b) a root variable occurs in every atom
    if let Some(root) = root_variable(atoms) {
        return root_case(db, atoms, root, ctx);
    }

    // (c) variable-disjoint components
    let components = components_by_shared_vars(atoms);
    if components.len() < 2 {
        return Err(Error::NotHierarchical);
    }
    let mut combined = vec![BigUint::one()];
    let mut children = Vec::new();
    for component in &components {
        let comp_atoms: Vec<Atom> = component.iter().map(|&i| atoms[i].clone()).collect();
        let relations: BTreeMap<String, Vec<SubFact>> = comp_atoms
            .iter()
            .map(|a| (a.relation.clone(), db.facts(&a.relation).to_vec()))
            .collect();
        let endo_count = relations
            .values()
            .map(|fs| fs.iter().filter(|f| f.endo).count())
            .sum();
        let comp_db = SubDb {
            relations,
            endo_count,
        };
        let (t, child) = table(&comp_db, &comp_atoms, ctx)?;
        combined = convolve(&combined, &t);
        children.push(child);
    }
    if combined.len() != n + 1 {
        return Err(Error::Internal(format!(
            "component split lost endogenous facts: {} vs {}",
            combined.len() - 1,
            n
        )));
    }
    let node = json!({
        "case": "split",
        "components": children,
    });
    Ok((combined, node))
}

fn convolve(a: &[BigUint], b: &[BigUint]) -> Vec<BigUint> {
    let mut out = zeros(a.len() + b.len() - 1);
    for (i, x) in a.iter().enumerate() {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.iter().enumerate() {
            if !y.is_zero() {
                out[i + j] += x * y;
            }
        }
    }
    out
}

/// Lexicographically smallest variable occurring in all atoms, if any.
fn root_variable(atoms: &[Atom]) -> Option<String> {
    let mut shared: Option<BTreeMap<String, ()>> = None;
    for atom in atoms {
        let vars: BTreeMap<String, ()> = atom.vars().map(|v| (v.to_string(), ())).collect();
        shared = Some(match shared {
            None => vars,
            Some(prev) => prev
                .into_iter()
                .filter(|(v, _)| vars.contains_key(v))
                .collect(),
        });
        if shared.as_ref().map(BTreeMap::is_empty).unwrap_or(false) {
            return None;
        }
    }
    shared.and_then(|s| s.into_keys().next())
}

fn substitute(atoms: &[Atom], var: &str, value: &Constant) -> Vec<Atom> {
    atoms
        .iter()
        .map(|a| Atom {
            relation: a.relation.clone(),
            args: a
                .args
                .iter()
                .map(|t| match t {
                    Term::Var(v) if v == var => Term::Const(value.clone()),
                    other => other.clone(),
                })
                .collect(),
        })
        .collect()
}

fn root_case(
    db: &SubDb,
    atoms: &[Atom],
    root: String,
    ctx: &mut Ctx,
) -> Result<(Vec<BigUint>, serde_json::Value)> {
    let n = db.endo_count;

    // positions of the root variable per relation
    let positions: BTreeMap<&str, Vec<usize>> = atoms
        .iter()
        .map(|a| {
            let pos: Vec<usize> = a
                .args
                .iter()
                .enumerate()
                .filter(|(_, t)| matches!(t, Term::Var(v) if *v == root))
                .map(|(i, _)| i)
                .collect();
            (a.relation.as_str(), pos)
        })
        .collect();

    // V_x: values realizable in some atom (unification respects constants
    // and repeated variables)
    let mut values: BTreeMap<Constant, ()> = BTreeMap::new();
    for atom in atoms {
        for fact in db.facts(&atom.relation) {
            if atom.unifies_with(&fact.tuple) {
                let pos = positions[atom.relation.as_str()][0];
                values.entry(fact.tuple[pos].clone()).or_insert(());
            }
        }
    }
    let values: Vec<Constant> = values.into_keys().collect();

    if values.is_empty() {
        if n > 0 {
            return Err(Error::Internal(format!(
                "no value for root variable {root} but {n} endogenous facts remain"
            )));
        }
        return Ok((
            zeros(1),
            json!({"case": "root", "variable": root, "values": []}),
        ));
    }

    // partition the database by root value
    let mut branches: Vec<SubDb> = values
        .iter()
        .map(|_| SubDb {
            relations: atoms
                .iter()
                .map(|a| (a.relation.clone(), Vec::new()))
                .collect(),
            endo_count: 0,
        })
        .collect();
    let value_index: BTreeMap<&Constant, usize> =
        values.iter().enumerate().map(|(i, v)| (v, i)).collect();
    for (relation, facts) in &db.relations {
        let pos = &positions[relation.as_str()];
        for fact in facts {
            let first = &fact.tuple[pos[0]];
            if pos.iter().any(|&p| &fact.tuple[p] != first) {
                if fact.endo {
                    return Err(Error::Internal(
                        "endogenous fact with inconsistent root values".into(),
                    ));
                }
                continue;
            }
            match value_index.get(first) {
                Some(&i) => {
                    let b = &mut branches[i];
                    if fact.endo {
                        b.endo_count += 1;
                    }
                    b.relations.get_mut(relation).unwrap().push(fact.clone());
                }
                None if fact.endo => {
                    return Err(Error::Internal(
                        "endogenous fact outside every root branch".into(),
                    ))
                }
                None => {}
            }
        }
    }
    if branches.iter().map(|b| b.endo_count).sum::<usize>() != n {
        return Err(Error::Internal("root branches do not partition D_n".into()));
    }

    // per-value tables f_{i,j}
    let mut f_tables = Vec::with_capacity(values.len());
    let mut children = Vec::with_capacity(values.len());
    for (value, branch) in values.iter().zip(&branches) {
        let sub_atoms = substitute(atoms, &root, value);
        let (t, child) = table(branch, &sub_atoms, ctx)?;
        f_tables.push(t);
        children.push(child);
    }

    // prefix counts P_i^ℓ over ∪_{r≤i} branch r
    let mut p_rows: Vec<Vec<BigUint>> = Vec::with_capacity(values.len());
    let mut prefix = f_tables[0].clone();
    let mut prefix_endo = branches[0].endo_count;
    p_rows.push(prefix.clone());
    for i in 1..values.len() {
        let n_i = branches[i].endo_count;
        let f_i = &f_tables[i];
        let new_endo = prefix_endo + n_i;
        let mut next = zeros(new_endo + 1);
        #[allow(clippy::needless_range_loop)]
        for l in 0..=new_endo {
            let mut acc = BigUint::zero();
            for j in 0..=l.min(n_i) {
                if l - j > prefix_endo {
                    continue;
                }
                let p_prev = &prefix[l - j];
                let f_ij = &f_i[j];
                // (1) both sides already satisfy the query
                acc += p_prev * f_ij;
                // (2) only the new branch satisfies it
                acc += (ctx.binomials.get(prefix_endo, l - j) - p_prev) * f_ij;
                // (3) only the prefix satisfies it
                acc += p_prev * (ctx.binomials.get(n_i, j) - f_ij);
            }
            next[l] = acc;
        }
        prefix = next;
        prefix_endo = new_endo;
        p_rows.push(prefix.clone());
    }

    let node = if ctx.trace {
        json!({
            "case": "root",
            "variable": root,
            "values": values.iter().map(|v| v.to_string()).collect::<Vec<_>>(),
            "f": f_tables
                .iter()
                .map(|row| row.iter().map(BigUint::to_string).collect::<Vec<_>>())
                .collect::<Vec<_>>(),
            "p": p_rows
                .iter()
                .map(|row| row.iter().map(BigUint::to_string).collect::<Vec<_>>())
                .collect::<Vec<_>>(),
            "children": children,
        })
    } else {
        serde_json::Value::Null
    };
    Ok((prefix, node))
}

/// Checks the preconditions of the exact Boolean engine.
pub(crate) fn check_boolean_tractable(q: &ConjunctiveQuery) -> Result<()> {
    if !q.is_boolean() {
        return Err(Error::NotBoolean(q.head.len()));
    }
    let mut seen = BTreeMap::new();
    for atom in &q.body {
        if seen.insert(atom.relation.clone(), ()).is_some() {
            return Err(Error::SelfJoin(atom.relation.clone()));
        }
    }
    if !classify(q).hierarchical {
        return Err(Error::NotHierarchical);
    }
    Ok(())
}

/// Restriction of `db` to the relations of `q` and, among endogenous facts,
/// to those unifying with the atom over their relation. Returns the slice
/// plus the number of pruned (unconcerned) endogenous facts.
fn restrict(db: &Database, q: &ConjunctiveQuery) -> (SubDb, usize) {
    let mut relations: BTreeMap<String, Vec<SubFact>> = BTreeMap::new();
    let mut endo_count = 0usize;
    let mut pruned = 0usize;
    for atom in &q.body {
        let entry = relations.entry(atom.relation.clone()).or_default();
        if let Some(rel) = db.relation(&atom.relation) {
            for (tuple, provenance, _) in rel.facts() {
                let unifies = atom.unifies_with(tuple);
                match provenance {
                    Provenance::Endogenous if unifies => {
                        endo_count += 1;
                        entry.push(SubFact {
                            tuple: Rc::new(tuple.to_vec()),
                            endo: true,
                        });
                    }
                    Provenance::Endogenous => pruned += 1,
                    Provenance::Exogenous if unifies => entry.push(SubFact {
                        tuple: Rc::new(tuple.to_vec()),
                        endo: false,
                    }),
                    Provenance::Exogenous => {}
                }
            }
        }
    }
    // endogenous facts of relations not mentioned by q are unconcerned too
    for rel in db.relations() {
        if !relations.contains_key(rel.name()) {
            pruned += rel
                .facts()
                .filter(|(_, p, _)| *p == Provenance::Endogenous)
                .count();
        }
    }
    (
        SubDb {
            relations,
            endo_count,
        },
        pruned,
    )
}

fn run(
    db: &Database,
    q: &ConjunctiveQuery,
    trace: bool,
) -> Result<(CountTable, serde_json::Value)> {
    check_boolean_tractable(q)?;
    let m = db.endo_count();
    let (slice, pruned) = restrict(db, q);
    let mut ctx = Ctx {
        binomials: Binomials::new(),
        trace,
    };
    let (restricted, node) = table(&slice, &q.body, &mut ctx)?;
    let counts = if pruned == 0 {
        let mut counts = restricted;
        counts.resize(m + 1, BigUint::zero());
        counts
    } else {
        // |Sat| over the full D_n: pruned facts pad subsets freely
        let mut counts = zeros(m + 1);
        #[allow(clippy::needless_range_loop)]
        for k in 0..=m {
            let mut acc = BigUint::zero();
            for (j, c) in restricted.iter().enumerate().take(k + 1) {
                if !c.is_zero() {
                    acc += c * ctx.binomials.get(pruned, k - j);
                }
            }
            counts[k] = acc;
        }
        counts
    };
    let trace_value = if trace {
        json!({
            "unconcerned": pruned,
            "restricted_endo": slice.endo_count,
            "dp": node,
        })
    } else {
        serde_json::Value::Null
    };
    Ok((CountTable::new(counts), trace_value))
}

/// `|Sat(db, q, k)|` for all `k = 0..=m` at once.
pub fn cnt_sat_table(db: &Database, q: &ConjunctiveQuery) -> Result<CountTable> {
    run(db, q, false).map(|(t, _)| t)
}

/// `|Sat(db, q, k)|`: the number of size-`k` subsets `E` of `D_n` with
/// `D_x ∪ E ⊨ q`. Requires a hierarchical self-join-free Boolean query.
pub fn cnt_sat(db: &Database, q: &ConjunctiveQuery, k: usize) -> Result<BigUint> {
    Ok(cnt_sat_table(db, q)?.count(k))
}

/// Like [`cnt_sat_table`], also emitting the DP tables (`f_{i,j}`, `P_i^ℓ`)
/// as a JSON object for inspection and tests.
pub fn cnt_sat_with_trace(
    db: &Database,
    q: &ConjunctiveQuery,
) -> Result<(CountTable, serde_json::Value)> {
    run(db, q, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{rs_pairs, rstu};
    use crate::query::{parse_query, Query};
    use crate::tuple;
    use crate::BooleanQuery;

    fn cq(text: &str) -> ConjunctiveQuery {
        match parse_query(text).unwrap() {
            Query::Cq(c) => c,
            _ => panic!("expected rule"),
        }
    }

    #[test]
    fn worked_example_trace() {
        let db = rs_pairs();
        let q = cq("q() :- R(x,y), S(x,z)");
        let (table, trace) = cnt_sat_with_trace(&db, &q).unwrap();
        assert_eq!(table.count(3), BigUint::from(31u32));
        assert_eq!(table.count(2), BigUint::from(6u32));

        let dp = &trace["dp"];
        assert_eq!(dp["case"], "root");
        assert_eq!(dp["variable"], "x");
        assert_eq!(dp["values"], serde_json::json!(["1", "2", "3"]));
        let f = &dp["f"];
        assert_eq!(f[0][2], "4");
        assert_eq!(f[0][3], "4");
        assert_eq!(f[1][2], "2");
        assert_eq!(f[1][3], "1");
        let p = &dp["p"];
        assert_eq!(p[1][2], "6");
        assert_eq!(p[1][3], "25");
        assert_eq!(p[2][2], "6");
        assert_eq!(p[2][3], "31");
    }

    #[test]
    fn zero_when_exogenous_part_cannot_satisfy() {
        let db = rs_pairs();
        let q = cq("q() :- R(x,y), S(x,z)");
        assert_eq!(cnt_sat(&db, &q, 0).unwrap(), BigUint::zero());
        assert_eq!(cnt_sat(&db, &q, 1).unwrap(), BigUint::zero());
    }

    #[test]
    fn component_split_matches_brute_force() {
        let db = rstu();
        let q = cq("q() :- R(x,y), S(x,z), T(w,w), U(w)");
        let table = cnt_sat_table(&db, &q).unwrap();
        let brute = crate::oracle::brute_cnt_sat_all(&db, BooleanQuery::Cq(&q)).unwrap();
        for k in 0..=db.endo_count() {
            assert_eq!(table.count(k), brute[k], "k = {k}");
        }
    }

    #[test]
    fn defensive_checks() {
        let db = rs_pairs();
        assert!(matches!(
            cnt_sat(&db, &cq("q() :- R(x,y), R(y,z)"), 1),
            Err(Error::SelfJoin(_))
        ));
        assert!(matches!(
            cnt_sat(&rstu(), &cq("q() :- R(x,y), S(y,w), T(w,z)"), 1),
            Err(Error::NotHierarchical)
        ));
        assert!(matches!(
            cnt_sat(&db, &cq("q(x) :- R(x,y)"), 1),
            Err(Error::NotBoolean(1))
        ));
    }

    #[test]
    fn unconcerned_facts_are_reinflated() {
        // one endogenous fact can never match R(x,x)
        let db = crate::data::Database::builder()
            .relation("R", 2)
            .endo("R", tuple![1, 1])
            .endo("R", tuple![1, 2])
            .build();
        let q = cq("q() :- R(x,x)");
        let table = cnt_sat_table(&db, &q).unwrap();
        let brute = crate::oracle::brute_cnt_sat_all(&db, BooleanQuery::Cq(&q)).unwrap();
        for k in 0..=2 {
            assert_eq!(table.count(k), brute[k], "k = {k}");
        }
        // {R(1,1)}, {R(1,1),R(1,2)}
        assert_eq!(table.count(1), BigUint::one());
        assert_eq!(table.count(2), BigUint::one());
    }

    #[test]
    fn constants_in_atoms_restrict_branches() {
        let db = crate::fixtures::bibliography();
        let q = cq("q() :- Author(x,y), Pub(x,'A'), Citations('A',18)");
        let table = cnt_sat_table(&db, &q).unwrap();
        let brute = crate::oracle::brute_cnt_sat_all(&db, BooleanQuery::Cq(&q)).unwrap();
        for k in 0..=db.endo_count() {
            assert_eq!(table.count(k), brute[k], "k = {k}");
        }
    }
}
