//! Query evaluation over a [`KnowledgeBase`], plus a brute-force reference
//! evaluator used as a test oracle.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use crate::kb::{Fact, KnowledgeBase};
use crate::query::{Aggregate, CanonicalQuery, Filter, Pattern, Predicate, Term};
use crate::value::{AnswerSet, Literal, LiteralType, Value};

/// One satisfying assignment of the query variables.
pub type Binding = BTreeMap<String, Value>;

/// Default bound on assignments the brute-force evaluator may enumerate.
pub const DEFAULT_BRUTE_FORCE_LIMIT: u128 = 20_000_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExecError {
    #[error("brute-force enumeration needs {needed} assignments, limit is {limit}")]
    SizeLimit { needed: u128, limit: u128 },
}

/// Executes `q` on `kb`. References to ids the KB lacks match nothing.
pub fn execute(kb: &KnowledgeBase, q: &CanonicalQuery) -> AnswerSet {
    let projected = bindings(kb, q).into_iter().filter_map(|mut b| b.remove(q.projection())).collect();
    aggregate(kb, q.aggregate(), projected)
}

/// Executes each query, in parallel when the `parallel` feature is on.
pub fn execute_batch(kb: &KnowledgeBase, queries: &[CanonicalQuery]) -> Vec<AnswerSet> {
    crate::par::map(queries, |q| execute(kb, q))
}

pub fn execute_batch_seq(kb: &KnowledgeBase, queries: &[CanonicalQuery]) -> Vec<AnswerSet> {
    crate::par::map_seq(queries, |q| execute(kb, q))
}

/// All assignments satisfying every pattern and filter, before projection
/// and aggregation. Deduplicated, in sorted order.
pub fn bindings(kb: &KnowledgeBase, q: &CanonicalQuery) -> Vec<Binding> {
    let mut remaining: Vec<&Pattern> = q.patterns().iter().collect();
    let mut partial = vec![Binding::new()];
    while !remaining.is_empty() && !partial.is_empty() {
        // Left to right, preferring the first pattern with a bound end so an
        // index can be used.
        let probe = &partial[0];
        let pick =
            remaining.iter().position(|p| is_anchored(&p.subject, probe) || is_anchored(&p.object, probe)).unwrap_or(0);
        let p = remaining.remove(pick);
        let mut next = Vec::new();
        for b in &partial {
            extend(kb, p, b, &mut next);
        }
        partial = next;
    }
    let mut out: Vec<Binding> =
        partial.into_iter().filter(|b| q.filters().iter().all(|f| filter_holds(f, b))).collect();
    out.sort();
    out.dedup();
    out
}

fn is_anchored(t: &Term, b: &Binding) -> bool {
    match t {
        Term::Var(v) => b.contains_key(v),
        _ => true,
    }
}

/// Value a term denotes under `b`, if fixed.
fn resolve(t: &Term, b: &Binding) -> Option<Value> {
    match t {
        Term::Var(v) => b.get(v).cloned(),
        Term::Entity(e) | Term::Class(e) => Some(Value::entity(e)),
        Term::Literal(l) => Some(Value::Literal(l.clone())),
    }
}

/// Whether the fact object satisfies the pattern object. Literal constants
/// match by value (numerics coerce); everything else structurally.
fn object_matches(pattern: &Term, fixed: &Value, fact: &Value) -> bool {
    match (pattern, fixed, fact) {
        (Term::Literal(_), Value::Literal(a), Value::Literal(b)) => a.value_eq(b),
        _ => fixed == fact,
    }
}

fn bind(b: &Binding, t: &Term, v: &Value) -> Option<Binding> {
    match t {
        Term::Var(name) => match b.get(name) {
            Some(old) if old != v => None,
            Some(_) => Some(b.clone()),
            None => {
                let mut nb = b.clone();
                nb.insert(name.clone(), v.clone());
                Some(nb)
            }
        },
        _ => Some(b.clone()),
    }
}

fn extend(kb: &KnowledgeBase, p: &Pattern, b: &Binding, out: &mut Vec<Binding>) {
    let subject = resolve(&p.subject, b);
    match &p.predicate {
        Predicate::Type => {
            let Term::Class(class) = &p.object else { return };
            match subject {
                Some(Value::Entity(e)) => {
                    if kb.entity_classes(&e).is_some_and(|cs| cs.contains(class)) {
                        out.push(b.clone());
                    }
                }
                Some(Value::Literal(_)) => {}
                None => {
                    for e in kb.instances_of(class) {
                        if let Some(nb) = bind(b, &p.subject, &Value::entity(e)) {
                            out.push(nb);
                        }
                    }
                }
            }
        }
        Predicate::Relation(rel) => {
            let object = resolve(&p.object, b);
            let candidates: Box<dyn Iterator<Item = &Fact>> = match (&subject, &object) {
                (Some(Value::Entity(s)), _) => Box::new(kb.facts_with_subject(s)),
                (Some(Value::Literal(_)), _) => return,
                (None, Some(o)) if !matches!(p.object, Term::Literal(_)) => Box::new(kb.facts_with_object(o)),
                _ => Box::new(kb.facts_with_relation(rel)),
            };
            for f in candidates {
                if &f.relation != rel {
                    continue;
                }
                if let Some(Value::Entity(s)) = &subject {
                    if &f.subject != s {
                        continue;
                    }
                }
                if let Some(o) = &object {
                    if !object_matches(&p.object, o, &f.object) {
                        continue;
                    }
                }
                let Some(nb) = bind(b, &p.subject, &Value::entity(&f.subject)) else { continue };
                let Some(nb) = bind(&nb, &p.object, &f.object) else { continue };
                out.push(nb);
            }
        }
    }
}

fn filter_holds(f: &Filter, b: &Binding) -> bool {
    match b.get(&f.var) {
        Some(Value::Literal(l)) => l.compare(&f.value).is_some_and(|o| f.op.holds(o)),
        _ => false,
    }
}

fn aggregate(kb: &KnowledgeBase, agg: &Aggregate, projected: AnswerSet) -> AnswerSet {
    match agg {
        Aggregate::None => projected,
        Aggregate::Count => BTreeSet::from([Value::Literal(Literal::integer(projected.len() as i64))]),
        Aggregate::ArgMax(path) | Aggregate::ArgMin(path) => {
            let keyed: Vec<(Value, Vec<Literal>)> = projected
                .into_iter()
                .map(|v| {
                    let ends = follow(kb, &v, path);
                    (v, ends)
                })
                .collect();
            extremum(keyed, matches!(agg, Aggregate::ArgMax(_)))
        }
    }
}

/// Literal values reachable from `start` along a forward relation chain.
fn follow(kb: &KnowledgeBase, start: &Value, path: &[String]) -> Vec<Literal> {
    let mut frontier = BTreeSet::from([start.clone()]);
    for rel in path {
        let mut next = BTreeSet::new();
        for v in &frontier {
            if let Value::Entity(e) = v {
                next.extend(kb.facts_with_subject(e).filter(|f| &f.relation == rel).map(|f| f.object.clone()));
            }
        }
        frontier = next;
    }
    frontier
        .into_iter()
        .filter_map(|v| match v {
            Value::Literal(l) => Some(l),
            Value::Entity(_) => None,
        })
        .collect()
}

/// Comparison family used to rank aggregate keys: numerics if any are
/// present, else dates, else strings.
fn key_family(keyed: &[(Value, Vec<Literal>)]) -> Option<fn(LiteralType) -> bool> {
    let kinds: BTreeSet<LiteralType> = keyed.iter().flat_map(|(_, ls)| ls.iter().map(Literal::kind)).collect();
    if kinds.iter().any(|k| k.is_numeric()) {
        Some(LiteralType::is_numeric)
    } else if kinds.contains(&LiteralType::Date) {
        Some(|k| k == LiteralType::Date)
    } else if kinds.contains(&LiteralType::String) {
        Some(|k| k == LiteralType::String)
    } else {
        None
    }
}

/// Values whose best key attains the extremum; ties keep every attainer.
fn extremum(keyed: Vec<(Value, Vec<Literal>)>, max: bool) -> AnswerSet {
    let Some(family) = key_family(&keyed) else { return AnswerSet::new() };
    let better = |a: &Literal, b: &Literal| {
        let o = a.compare(b).unwrap_or(Ordering::Equal);
        if max {
            o == Ordering::Greater
        } else {
            o == Ordering::Less
        }
    };
    let best_of = |ls: &[Literal]| -> Option<Literal> {
        ls.iter()
            .filter(|l| family(l.kind()))
            .fold(None, |acc: Option<&Literal>, l| match acc {
                Some(a) if !better(l, a) => Some(a),
                _ => Some(l),
            })
            .cloned()
    };
    let scored: Vec<(Value, Literal)> = keyed.into_iter().filter_map(|(v, ls)| best_of(&ls).map(|k| (v, k))).collect();
    let Some(top) = scored.iter().map(|(_, k)| k).fold(None, |acc: Option<&Literal>, k| match acc {
        Some(a) if !better(k, a) => Some(a),
        _ => Some(k),
    }) else {
        return AnswerSet::new();
    };
    let top = top.clone();
    scored.into_iter().filter(|(_, k)| k.compare(&top) == Some(Ordering::Equal)).map(|(v, _)| v).collect()
}

/// Reference evaluator: tries every assignment of the query variables to
/// KB entities and fact literals. Fails when the assignment space exceeds
/// `limit`.
pub fn brute_force_execute_with_limit(
    kb: &KnowledgeBase,
    q: &CanonicalQuery,
    limit: u128,
) -> Result<AnswerSet, ExecError> {
    let mut domain: BTreeSet<Value> = kb.entities().map(|e| Value::entity(&e.id)).collect();
    for f in kb.facts() {
        domain.insert(Value::entity(&f.subject));
        domain.insert(f.object.clone());
    }
    let domain: Vec<Value> = domain.into_iter().collect();
    let vars = q.variables();
    let needed = (domain.len() as u128).saturating_pow(vars.len() as u32);
    if needed > limit {
        return Err(ExecError::SizeLimit { needed, limit });
    }
    let facts: BTreeSet<&Fact> = kb.facts().iter().collect();
    let holds = |p: &Pattern, a: &Binding| -> bool {
        let val = |t: &Term| match t {
            Term::Var(v) => a[v].clone(),
            Term::Entity(e) | Term::Class(e) => Value::entity(e),
            Term::Literal(l) => Value::Literal(l.clone()),
        };
        let s = val(&p.subject);
        match &p.predicate {
            Predicate::Type => {
                let (Value::Entity(e), Term::Class(c)) = (&s, &p.object) else { return false };
                kb.entity(e).is_some_and(|ent| ent.classes.contains(c))
            }
            Predicate::Relation(r) => {
                let Value::Entity(e) = &s else { return false };
                let o = val(&p.object);
                facts.iter().any(|f| {
                    &f.subject == e
                        && &f.relation == r
                        && match (&p.object, &o, &f.object) {
                            (Term::Literal(_), Value::Literal(a), Value::Literal(b)) => {
                                a.compare(b) == Some(Ordering::Equal)
                            }
                            _ => o == f.object,
                        }
                })
            }
        }
    };
    let mut projected = AnswerSet::new();
    let mut idx = vec![0usize; vars.len()];
    if domain.is_empty() {
        return Ok(aggregate_reference(kb, q.aggregate(), projected));
    }
    loop {
        let a: Binding = vars.iter().cloned().zip(idx.iter().map(|&i| domain[i].clone())).collect();
        let ok = q.patterns().iter().all(|p| holds(p, &a))
            && q.filters().iter().all(|f| match &a[&f.var] {
                Value::Literal(l) => l.compare(&f.value).is_some_and(|o| f.op.holds(o)),
                Value::Entity(_) => false,
            });
        if ok {
            projected.insert(a[q.projection()].clone());
        }
        // Odometer increment.
        let mut k = 0;
        loop {
            if k == idx.len() {
                return Ok(aggregate_reference(kb, q.aggregate(), projected));
            }
            idx[k] += 1;
            if idx[k] < domain.len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

pub fn brute_force_execute(kb: &KnowledgeBase, q: &CanonicalQuery) -> Result<AnswerSet, ExecError> {
    brute_force_execute_with_limit(kb, q, DEFAULT_BRUTE_FORCE_LIMIT)
}

/// Aggregation for the reference evaluator, written independently of the
/// indexed path: path values are found by scanning every fact.
fn aggregate_reference(kb: &KnowledgeBase, agg: &Aggregate, projected: AnswerSet) -> AnswerSet {
    let (path, max) = match agg {
        Aggregate::None => return projected,
        Aggregate::Count => return BTreeSet::from([Value::Literal(Literal::integer(projected.len() as i64))]),
        Aggregate::ArgMax(p) => (p, true),
        Aggregate::ArgMin(p) => (p, false),
    };
    let mut keyed: Vec<(Value, Vec<Literal>)> = Vec::new();
    for v in projected {
        let mut reach = vec![v.clone()];
        for rel in path {
            let mut next = Vec::new();
            for f in kb.facts() {
                if &f.relation == rel && reach.contains(&Value::entity(&f.subject)) && !next.contains(&f.object) {
                    next.push(f.object.clone());
                }
            }
            reach = next;
        }
        let lits = reach.into_iter().filter_map(|x| if let Value::Literal(l) = x { Some(l) } else { None }).collect();
        keyed.push((v, lits));
    }
    // Rank family and extremum spelled out with sorting rather than folds.
    let kinds: Vec<LiteralType> = keyed.iter().flat_map(|(_, l)| l.iter().map(Literal::kind)).collect();
    let in_family = |k: LiteralType| {
        if kinds.iter().any(|k| k.is_numeric()) {
            k.is_numeric()
        } else if kinds.contains(&LiteralType::Date) {
            k == LiteralType::Date
        } else {
            k == LiteralType::String
        }
    };
    let mut best: Vec<(Value, Literal)> = Vec::new();
    for (v, mut lits) in keyed {
        lits.retain(|l| in_family(l.kind()));
        lits.sort_by(|a, b| a.compare(b).unwrap_or(Ordering::Equal));
        let pick = if max { lits.last() } else { lits.first() };
        if let Some(l) = pick {
            best.push((v, l.clone()));
        }
    }
    best.sort_by(|a, b| a.1.compare(&b.1).unwrap_or(Ordering::Equal));
    let Some(target) = (if max { best.last() } else { best.first() }).map(|(_, l)| l.clone()) else {
        return AnswerSet::new();
    };
    best.into_iter().filter(|(_, l)| l.compare(&target) == Some(Ordering::Equal)).map(|(v, _)| v).collect()
}
