//! Query evaluation: atom-ordered backtracking join with hash indexes per
//! (relation, bound-position pattern), over `D_x ∪ (masked D_n)`.

use std::collections::{BTreeSet, HashMap};

use crate::data::{Constant, Database, EndoMask};
use crate::error::{Error, Result};

use super::{AggKind, AggregateQuery, Atom, ConjunctiveQuery, FeatureExpr, Term, UnionQuery};

#[derive(Clone, Debug)]
enum ArgSpec {
    Const(Constant),
    Var(usize),
}

struct CompiledAtom<'q> {
    atom: &'q Atom,
    args: Vec<ArgSpec>,
    /// Positions whose value is fixed once the preceding atoms are bound.
    bound_positions: Vec<usize>,
}

struct Plan<'q> {
    atoms: Vec<CompiledAtom<'q>>,
    head_slots: Vec<usize>,
    n_slots: usize,
}

fn compile<'q>(q: &'q ConjunctiveQuery, db: &Database) -> Result<Plan<'q>> {
    let mut slots: HashMap<&str, usize> = HashMap::new();
    let mut atoms = Vec::with_capacity(q.body.len());
    for atom in &q.body {
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
        // Slots assigned before this atom are bound by the time the join
        // reaches it; a variable first seen in this very atom (including
        // within-atom repeats) is matched by unification, not the index.
        let prior_slots = slots.len();
        let args: Vec<ArgSpec> = atom
            .args
            .iter()
            .map(|term| match term {
                Term::Const(c) => ArgSpec::Const(c.clone()),
                Term::Var(v) => {
                    let next = slots.len();
                    let slot = *slots.entry(v.as_str()).or_insert(next);
                    ArgSpec::Var(slot)
                }
            })
            .collect();
        let bound_positions = args
            .iter()
            .enumerate()
            .filter(|(_, arg)| match arg {
                ArgSpec::Const(_) => true,
                ArgSpec::Var(slot) => *slot < prior_slots,
            })
            .map(|(pos, _)| pos)
            .collect();
        atoms.push(CompiledAtom {
            atom,
            args,
            bound_positions,
        });
    }
    let head_slots = q
        .head
        .iter()
        .map(|v| {
            slots
                .get(v.as_str())
                .copied()
                .ok_or_else(|| Error::UnsafeHead {
                    variable: v.clone(),
                })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Plan {
        atoms,
        head_slots,
        n_slots: slots.len(),
    })
}

struct Exec<'p, 'q, 'db> {
    plan: &'p Plan<'q>,
    facts: Vec<Vec<&'db [Constant]>>,
    indexes: Vec<Option<HashMap<Vec<Constant>, Vec<usize>>>>,
}

impl<'p, 'q, 'db> Exec<'p, 'q, 'db> {
    fn new(plan: &'p Plan<'q>, db: &'db Database, mask: Option<&'db EndoMask>) -> Self {
        let facts: Vec<Vec<&[Constant]>> = plan
            .atoms
            .iter()
            .map(|a| db.visible_facts(&a.atom.relation, mask).collect())
            .collect();
        let indexes = plan
            .atoms
            .iter()
            .enumerate()
            .map(|(i, a)| {
                if a.bound_positions.is_empty() {
                    None
                } else {
                    let mut map: HashMap<Vec<Constant>, Vec<usize>> = HashMap::new();
                    for (fi, fact) in facts[i].iter().enumerate() {
                        let key: Vec<Constant> =
                            a.bound_positions.iter().map(|&p| fact[p].clone()).collect();
                        map.entry(key).or_default().push(fi);
                    }
                    Some(map)
                }
            })
            .collect();
        Exec {
            plan,
            facts,
            indexes,
        }
    }

    fn unify(
        &self,
        atom: &CompiledAtom,
        fact: &'db [Constant],
        bindings: &mut [Option<&'db Constant>],
        touched: &mut Vec<usize>,
    ) -> bool {
        for (arg, value) in atom.args.iter().zip(fact) {
            match arg {
                ArgSpec::Const(c) => {
                    if c != value {
                        return false;
                    }
                }
                ArgSpec::Var(slot) => match bindings[*slot] {
                    Some(bound) => {
                        if bound != value {
                            return false;
                        }
                    }
                    None => {
                        bindings[*slot] = Some(value);
                        touched.push(*slot);
                    }
                },
            }
        }
        true
    }

    /// Depth-first join. Returns true when the sink asks to stop.
    fn join(
        &self,
        depth: usize,
        bindings: &mut [Option<&'db Constant>],
        sink: &mut dyn FnMut(&[Option<&'db Constant>]) -> bool,
    ) -> bool {
        if depth == self.plan.atoms.len() {
            return sink(bindings);
        }
        let atom = &self.plan.atoms[depth];
        match &self.indexes[depth] {
            Some(index) => {
                let key: Vec<Constant> = atom
                    .bound_positions
                    .iter()
                    .map(|&p| match &atom.args[p] {
                        ArgSpec::Const(c) => c.clone(),
                        ArgSpec::Var(slot) => bindings[*slot]
                            .expect("bound position without binding")
                            .clone(),
                    })
                    .collect();
                if let Some(bucket) = index.get(&key) {
                    for &fi in bucket {
                        if self.try_fact(depth, fi, bindings, sink) {
                            return true;
                        }
                    }
                }
                false
            }
            None => {
                for fi in 0..self.facts[depth].len() {
                    if self.try_fact(depth, fi, bindings, sink) {
                        return true;
                    }
                }
                false
            }
        }
    }

    fn try_fact(
        &self,
        depth: usize,
        fi: usize,
        bindings: &mut [Option<&'db Constant>],
        sink: &mut dyn FnMut(&[Option<&'db Constant>]) -> bool,
    ) -> bool {
        let fact = self.facts[depth][fi];
        let mut touched = Vec::new();
        let stop = self.unify(&self.plan.atoms[depth], fact, bindings, &mut touched)
            && self.join(depth + 1, bindings, sink);
        for slot in touched {
            bindings[slot] = None;
        }
        stop
    }
}

/// Answer callback: bound slots plus the head slot map; returns true to stop.
type AnswerSink<'db, 'a> = &'a mut dyn FnMut(&[Option<&'db Constant>], &[usize]) -> bool;

fn run<'db>(
    q: &ConjunctiveQuery,
    db: &'db Database,
    mask: Option<&'db EndoMask>,
    sink: AnswerSink<'db, '_>,
) -> Result<()> {
    let plan = compile(q, db)?;
    let exec = Exec::new(&plan, db, mask);
    let mut bindings: Vec<Option<&Constant>> = vec![None; plan.n_slots];
    let head_slots = plan.head_slots.clone();
    exec.join(0, &mut bindings, &mut |b| sink(b, &head_slots));
    Ok(())
}

/// All answers of `q` on the visible part of `db`, as a set of head tuples.
pub fn evaluate(
    q: &ConjunctiveQuery,
    db: &Database,
    mask: Option<&EndoMask>,
) -> Result<BTreeSet<Vec<Constant>>> {
    let mut out = BTreeSet::new();
    run(q, db, mask, &mut |bindings, head_slots| {
        let tuple: Vec<Constant> = head_slots
            .iter()
            .map(|&s| bindings[s].expect("head variable unbound").clone())
            .collect();
        out.insert(tuple);
        false
    })?;
    Ok(out)
}

/// Satisfaction check with early exit on the first homomorphism. For a
/// Boolean query this is exactly `D ⊨ q`; for a non-Boolean query it tells
/// whether the answer set is non-empty.
pub fn is_satisfied(q: &ConjunctiveQuery, db: &Database, mask: Option<&EndoMask>) -> Result<bool> {
    let mut found = false;
    run(q, db, mask, &mut |_, _| {
        found = true;
        true
    })?;
    Ok(found)
}

pub fn evaluate_union(
    u: &UnionQuery,
    db: &Database,
    mask: Option<&EndoMask>,
) -> Result<BTreeSet<Vec<Constant>>> {
    let mut out = BTreeSet::new();
    for branch in &u.branches {
        out.extend(evaluate(branch, db, mask)?);
    }
    Ok(out)
}

/// The numeric feature of one answer tuple.
pub fn feature_value(feature: FeatureExpr, answer: &[Constant]) -> Result<i128> {
    let col = |i: usize| -> Result<i128> {
        let c = answer.get(i - 1).ok_or(Error::NonNumericFeature {
            column: i,
            answer: render_answer(answer),
        })?;
        c.as_int().map(i128::from).ok_or(Error::NonNumericFeature {
            column: i,
            answer: render_answer(answer),
        })
    };
    match feature {
        FeatureExpr::One => Ok(1),
        FeatureExpr::Col(i) => col(i),
        FeatureExpr::Prod(i, j) => Ok(col(i)? * col(j)?),
    }
}

fn render_answer(answer: &[Constant]) -> String {
    let parts: Vec<String> = answer.iter().map(|c| c.to_string()).collect();
    format!("({})", parts.join(", "))
}

/// Evaluates an aggregate-relational query to a number. `max` and `min`
/// return 0 on an empty answer set.
pub fn eval_aggregate(a: &AggregateQuery, db: &Database, mask: Option<&EndoMask>) -> Result<i128> {
    let answers = evaluate(&a.inner, db, mask)?;
    match a.kind {
        AggKind::Count => Ok(answers.len() as i128),
        AggKind::Sum => {
            let mut total = 0i128;
            for t in &answers {
                total += feature_value(a.feature, t)?;
            }
            Ok(total)
        }
        AggKind::Max => {
            let mut best: Option<i128> = None;
            for t in &answers {
                let v = feature_value(a.feature, t)?;
                best = Some(best.map_or(v, |b: i128| b.max(v)));
            }
            Ok(best.unwrap_or(0))
        }
        AggKind::Min => {
            let mut best: Option<i128> = None;
            for t in &answers {
                let v = feature_value(a.feature, t)?;
                best = Some(best.map_or(v, |b: i128| b.min(v)));
            }
            Ok(best.unwrap_or(0))
        }
    }
}
