//! Random stores and queries plus a nested-loop reference join, shared by
//! the metastore tests and the acceptance suite.

use std::collections::{BTreeMap, BTreeSet};

use benchfold_core::metastore::{CmpOp, NumericFilter, PatternTerm, Term, Triple, TripleStore, TriplePattern};
use num_bigint::BigInt;
use rand::seq::SliceRandom;
use rand::Rng;

const NS: &str = "http://example.org/";

fn iri(kind: &str, n: usize) -> Term {
    Term::iri(format!("{NS}{kind}{n}"))
}

pub fn random_store(rng: &mut impl Rng, max_triples: usize) -> TripleStore {
    let subjects = rng.gen_range(1..=40);
    let predicates = rng.gen_range(1..=6);
    let n = rng.gen_range(0..=max_triples);
    let mut triples = Vec::with_capacity(n);
    for _ in 0..n {
        let s = iri("s", rng.gen_range(0..subjects));
        let p = iri("p", rng.gen_range(0..predicates));
        let o = match rng.gen_range(0..3) {
            0 => iri("s", rng.gen_range(0..subjects)),
            1 => Term::literal(rng.gen_range(-5..60).to_string()),
            _ => Term::literal(format!("w{}", rng.gen_range(0..8))),
        };
        triples.push(Triple::new(s, p, o).expect("IRI subject and predicate"));
    }
    TripleStore::new(BTreeMap::new(), triples)
}

pub fn random_query(rng: &mut impl Rng, store: &TripleStore) -> (Vec<TriplePattern>, Vec<NumericFilter>) {
    let vars = ["a", "b", "c", "d"];
    let sample = |rng: &mut dyn rand::RngCore, pick: fn(&Triple) -> &Term| -> PatternTerm {
        match store.triples().choose(rng) {
            Some(t) => PatternTerm::Const(pick(t).clone()),
            None => PatternTerm::Const(iri("p", 0)),
        }
    };
    let n = rng.gen_range(1..=3);
    let mut patterns = Vec::with_capacity(n);
    for _ in 0..n {
        let slot = |rng: &mut dyn rand::RngCore, pick: fn(&Triple) -> &Term, const_odds: f64| {
            if rng.gen_bool(const_odds) {
                sample(rng, pick)
            } else {
                PatternTerm::var(*vars.choose(rng).unwrap())
            }
        };
        let s = slot(rng, |t| &t.subject, 0.2);
        let p = slot(rng, |t| &t.predicate, 0.8);
        let o = slot(rng, |t| &t.object, 0.2);
        patterns.push(TriplePattern::new(s, p, o));
    }
    let used: Vec<String> = variables(&patterns);
    let mut filters = Vec::new();
    if !used.is_empty() && rng.gen_bool(0.3) {
        let op = *[CmpOp::Lt, CmpOp::Le, CmpOp::Eq, CmpOp::Ge, CmpOp::Gt].choose(rng).unwrap();
        filters.push(NumericFilter::new(used.choose(rng).unwrap().clone(), op, rng.gen_range(0..60)));
    }
    (patterns, filters)
}

pub fn variables(patterns: &[TriplePattern]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for p in patterns {
        for slot in [&p.subject, &p.predicate, &p.object] {
            if let PatternTerm::Var(v) = slot {
                if !out.contains(v) {
                    out.push(v.clone());
                }
            }
        }
    }
    out
}

fn holds(op: CmpOp, lhs: &BigInt, rhs: &BigInt) -> bool {
    match op {
        CmpOp::Lt => lhs < rhs,
        CmpOp::Le => lhs <= rhs,
        CmpOp::Eq => lhs == rhs,
        CmpOp::Ge => lhs >= rhs,
        CmpOp::Gt => lhs > rhs,
    }
}

/// Every combination of one triple per pattern, kept when the bindings
/// agree; then filtered and projected. Sorted and distinct.
///
/// Terms are interned to integers first so the loops compare numbers; no
/// index of the store is used.
pub fn brute_force(store: &TripleStore, patterns: &[TriplePattern], filters: &[NumericFilter]) -> Vec<Vec<Term>> {
    const UNBOUND: u32 = u32::MAX;
    // Never matches a stored term.
    const ABSENT: u32 = u32::MAX - 1;
    enum Slot {
        Const(u32),
        Var(usize),
    }
    let mut ids: BTreeMap<&Term, u32> = BTreeMap::new();
    let mut terms: Vec<&Term> = Vec::new();
    for t in store.triples() {
        for term in [&t.subject, &t.predicate, &t.object] {
            if !ids.contains_key(term) {
                ids.insert(term, terms.len() as u32);
                terms.push(term);
            }
        }
    }
    let table: Vec<[u32; 3]> = store
        .triples()
        .iter()
        .map(|t| [ids[&t.subject], ids[&t.predicate], ids[&t.object]])
        .collect();

    let vars = variables(patterns);
    let compiled: Vec<[Slot; 3]> = patterns
        .iter()
        .map(|p| {
            [&p.subject, &p.predicate, &p.object].map(|s| match s {
                PatternTerm::Const(c) => Slot::Const(ids.get(c).copied().unwrap_or(ABSENT)),
                PatternTerm::Var(v) => Slot::Var(vars.iter().position(|x| x == v).unwrap()),
            })
        })
        .collect();
    let filters: Vec<(usize, &NumericFilter)> = filters
        .iter()
        .map(|f| (vars.iter().position(|v| *v == f.variable).unwrap(), f))
        .collect();

    fn extend(table: &[[u32; 3]], patterns: &[[Slot; 3]], binding: &mut Vec<u32>, emit: &mut dyn FnMut(&[u32])) {
        let Some((first, rest)) = patterns.split_first() else {
            emit(binding);
            return;
        };
        for row in table {
            let mut added = [usize::MAX; 3];
            let mut k = 0;
            while k < 3 {
                let ok = match first[k] {
                    Slot::Const(c) => c == row[k],
                    Slot::Var(i) if binding[i] == UNBOUND => {
                        binding[i] = row[k];
                        added[k] = i;
                        true
                    }
                    Slot::Var(i) => binding[i] == row[k],
                };
                if !ok {
                    break;
                }
                k += 1;
            }
            if k == 3 {
                extend(table, rest, binding, emit);
            }
            for i in added {
                if i != usize::MAX {
                    binding[i] = UNBOUND;
                }
            }
        }
    }

    let mut rows: BTreeSet<Vec<u32>> = BTreeSet::new();
    let mut binding = vec![UNBOUND; vars.len()];
    extend(&table, &compiled, &mut binding, &mut |b| {
        rows.insert(b.to_vec());
    });
    let mut out: Vec<Vec<Term>> = rows
        .into_iter()
        .filter(|b| {
            filters.iter().all(|(i, f)| {
                let term = terms[b[*i] as usize];
                !term.is_iri() && term.value().trim().parse::<BigInt>().is_ok_and(|v| holds(f.op, &v, &f.value))
            })
        })
        .map(|b| b.iter().map(|&id| terms[id as usize].clone()).collect())
        .collect();
    out.sort();
    out
}
