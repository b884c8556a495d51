use std::collections::BTreeMap;

use super::{Elem, Indexed, Structure, TupleCache};

/// Injective map from the universe of the embedded structure into the host.
pub type Embedding = BTreeMap<Elem, Elem>;

/// Search for an induced-substructure embedding of `b` into `a`: an injection
/// that preserves and reflects every relation and every label.
///
/// Exhaustive backtracking; the caller is responsible for keeping `b` small.
pub fn is_embeddable(b: &Structure, a: &Structure) -> Option<Embedding> {
    if b.len() > a.len() || !same_signature(a, b) {
        return None;
    }
    let bi = Indexed::new(b);
    let ai = Indexed::new(a);
    let mut search = Search {
        b: &bi,
        a: &ai,
        assigned: Vec::with_capacity(bi.n),
        used: vec![false; ai.n],
        tuples: TupleCache::default(),
    };
    if search.extend() {
        Some(
            search
                .assigned
                .iter()
                .enumerate()
                .map(|(i, &j)| (b.universe()[i], a.universe()[j]))
                .collect(),
        )
    } else {
        None
    }
}

pub fn is_isomorphic(a: &Structure, b: &Structure) -> bool {
    a.len() == b.len() && a.tuple_count() == b.tuple_count() && is_embeddable(b, a).is_some()
}

fn same_signature(a: &Structure, b: &Structure) -> bool {
    let (va, vb) = (a.vocab(), b.vocab());
    va.relations() == vb.relations() && va.label_count() == vb.label_count()
}

struct Search<'s, 'a> {
    b: &'s Indexed<'a>,
    a: &'s Indexed<'a>,
    assigned: Vec<usize>,
    used: Vec<bool>,
    tuples: TupleCache,
}

impl Search<'_, '_> {
    fn extend(&mut self) -> bool {
        let i = self.assigned.len();
        if i == self.b.n {
            return true;
        }
        for cand in 0..self.a.n {
            if self.used[cand] || self.a.labels[cand] != self.b.labels[i] {
                continue;
            }
            self.assigned.push(cand);
            if self.consistent(i) {
                self.used[cand] = true;
                if self.extend() {
                    return true;
                }
                self.used[cand] = false;
            }
            self.assigned.pop();
        }
        false
    }

    fn consistent(&mut self, i: usize) -> bool {
        for r in 0..self.b.rel_count() {
            let arity = self.b.arity(r);
            let tuples = self.tuples.get(arity, i);
            for t in tuples.iter() {
                let in_b = self.b.holds(r, t.iter().copied());
                let in_a = self.a.holds(r, t.iter().map(|&p| self.assigned[p]));
                if in_a != in_b {
                    return false;
                }
            }
        }
        true
    }
}
