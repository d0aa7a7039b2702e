//! Independent brute-force oracles for group computations. These must stay
//! implementation-independent: closure is computed by product-table
//! saturation (not BFS) and the derived series re-derives every step from
//! scratch.

use std::collections::BTreeSet;

use lsa_core::groups::Permutation;

/// Fixpoint closure: repeatedly add all pairwise products until stable.
pub fn naive_closure(generators: &[Permutation]) -> Vec<Permutation> {
    let n = generators[0].degree();
    let mut set: BTreeSet<Permutation> = BTreeSet::new();
    set.insert(Permutation::identity(n));
    for g in generators {
        set.insert(g.clone());
        set.insert(g.inverse());
    }
    loop {
        let snapshot: Vec<Permutation> = set.iter().cloned().collect();
        let before = set.len();
        for a in &snapshot {
            for b in &snapshot {
                set.insert(a.compose(b).unwrap());
            }
        }
        if set.len() == before {
            break;
        }
    }
    set.into_iter().collect()
}

/// All commutators a⁻¹b⁻¹ab of the element set, closed by saturation.
pub fn naive_derived_subgroup(elements: &[Permutation]) -> Vec<Permutation> {
    let mut commutators = Vec::new();
    for a in elements {
        for b in elements {
            let c = a
                .inverse()
                .compose(&b.inverse())
                .unwrap()
                .compose(a)
                .unwrap()
                .compose(b)
                .unwrap();
            commutators.push(c);
        }
    }
    naive_closure(&commutators)
}

/// Derived-series orders computed entirely through the naive routines.
pub fn naive_series_orders(generators: &[Permutation]) -> Vec<usize> {
    let mut current = naive_closure(generators);
    let mut orders = vec![current.len()];
    loop {
        if current.len() == 1 {
            break;
        }
        let next = naive_derived_subgroup(&current);
        orders.push(next.len());
        if next.len() == current.len() || next.len() == 1 {
            break;
        }
        current = next;
    }
    orders
}

/// Classification mirroring the solvability levels, derived only from the
/// naive order chain.
pub fn naive_classify(orders: &[usize]) -> &'static str {
    let last = *orders.last().unwrap();
    if last > 1 {
        "NonSolvable"
    } else if orders.len() <= 2 {
        "Abelian"
    } else {
        "SolvableNonAbelian"
    }
}
