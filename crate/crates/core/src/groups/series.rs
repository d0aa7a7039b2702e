use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{GroupElement, GroupError, GroupKind, GroupSpec, Permutation, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolvabilityLevel {
    Abelian,
    SolvableNonAbelian,
    NonSolvable,
}

/// Outcome of the derived-series computation: the chain of subgroup orders
/// `|G⁽⁰⁾|, |G⁽¹⁾|, …` and the resulting classification.
///
/// For solvable groups the chain ends at 1; for non-solvable groups it ends
/// with a repeated order, the perfect subgroup where the series stabilizes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolvabilityClass {
    pub level: SolvabilityLevel,
    pub series_orders: Vec<usize>,
}

/// Breadth-first product closure of the spec's generators.
///
/// Elements are returned in discovery order (identity first), which is
/// deterministic for a given generator list.
pub fn closure(spec: &GroupSpec) -> Result<Vec<Permutation>> {
    if spec.kind() != GroupKind::FinitePermutation {
        return Err(GroupError::Invalid(
            "closure is only defined for finite permutation groups".into(),
        ));
    }
    let gens: Vec<&Permutation> = spec
        .generators()
        .iter()
        .map(|g| match g {
            GroupElement::Perm(p) => Ok(p),
            GroupElement::Matrix(_) => Err(GroupError::Invalid(
                "matrix generator in a finite-permutation spec".into(),
            )),
        })
        .collect::<Result<_>>()?;
    closure_of_perms(&gens, spec.order_cap())
}

pub(super) fn closure_of_perms(gens: &[&Permutation], cap: usize) -> Result<Vec<Permutation>> {
    let n = gens[0].degree();
    let identity = Permutation::identity(n);
    let mut seen: HashSet<Permutation> = HashSet::new();
    let mut order = Vec::new();
    seen.insert(identity.clone());
    order.push(identity);
    let mut frontier = 0usize;
    while frontier < order.len() {
        let current = order[frontier].clone();
        frontier += 1;
        for g in gens {
            let next = current.compose(g)?;
            if seen.insert(next.clone()) {
                if order.len() + 1 > cap {
                    return Err(GroupError::GroupTooLarge { cap });
                }
                order.push(next);
            }
        }
    }
    Ok(order)
}

/// Subgroup generated by all commutators `[a, b]` of `elements`.
fn derived_subgroup(elements: &[Permutation], cap: usize) -> Result<Vec<Permutation>> {
    let mut commutators: Vec<Permutation> = Vec::new();
    let mut seen: HashSet<Permutation> = HashSet::new();
    for a in elements {
        let a_inv = a.inverse();
        for b in elements {
            // [a, b] = a⁻¹ b⁻¹ a b
            let c = a_inv.compose(&b.inverse())?.compose(a)?.compose(b)?;
            if seen.insert(c.clone()) {
                commutators.push(c);
            }
        }
    }
    let refs: Vec<&Permutation> = commutators.iter().collect();
    closure_of_perms(&refs, cap)
}

/// Compute the derived series `G ⊵ [G,G] ⊵ …` of the group generated by the
/// spec and classify its solvability level.
pub fn derived_series(spec: &GroupSpec) -> Result<SolvabilityClass> {
    let g0 = closure(spec)?;
    let cap = spec.order_cap();
    let mut series_orders = vec![g0.len()];
    let mut current = g0;
    loop {
        if current.len() == 1 {
            break;
        }
        let next = derived_subgroup(&current, cap)?;
        series_orders.push(next.len());
        if next.len() == current.len() || next.len() == 1 {
            break;
        }
        current = next;
    }
    let level = classify(&series_orders);
    Ok(SolvabilityClass { level, series_orders })
}

fn classify(orders: &[usize]) -> SolvabilityLevel {
    let last = *orders.last().expect("series is nonempty");
    if last > 1 {
        SolvabilityLevel::NonSolvable
    } else if orders.len() <= 2 {
        SolvabilityLevel::Abelian
    } else {
        SolvabilityLevel::SolvableNonAbelian
    }
}

/// Conjugation check: every `g h g⁻¹` with `g` in the big group and `h` in
/// the candidate stays inside the candidate.
pub fn is_normal_subgroup(sub: &[Permutation], group: &[Permutation]) -> Result<bool> {
    let members: HashSet<&Permutation> = sub.iter().collect();
    for g in group {
        let g_inv = g.inverse();
        for h in sub {
            let conj = g.compose(h)?.compose(&g_inv)?;
            if !members.contains(&conj) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::preset;

    #[test]
    fn closure_of_transposition() {
        let spec = GroupSpec::from_cycle_strings(&["(0 1)"], None).unwrap();
        let elems = closure(&spec).unwrap();
        assert_eq!(elems.len(), 2);
    }

    #[test]
    fn closure_of_s4_has_order_24() {
        let spec = preset("S4").unwrap();
        assert_eq!(closure(&spec).unwrap().len(), 24);
    }

    #[test]
    fn closure_respects_cap() {
        let spec = preset("A5").unwrap().with_order_cap(30);
        assert!(matches!(
            closure(&spec),
            Err(GroupError::GroupTooLarge { cap: 30 })
        ));
    }

    #[test]
    fn z5_is_abelian() {
        let cls = derived_series(&preset("Z5").unwrap()).unwrap();
        assert_eq!(cls.level, SolvabilityLevel::Abelian);
        assert_eq!(cls.series_orders, vec![5, 1]);
    }

    #[test]
    fn s4_is_solvable_non_abelian() {
        let cls = derived_series(&preset("S4").unwrap()).unwrap();
        assert_eq!(cls.level, SolvabilityLevel::SolvableNonAbelian);
        assert_eq!(cls.series_orders, vec![24, 12, 4, 1]);
    }

    #[test]
    fn a5_is_non_solvable() {
        let cls = derived_series(&preset("A5").unwrap()).unwrap();
        assert_eq!(cls.level, SolvabilityLevel::NonSolvable);
        assert_eq!(cls.series_orders.last(), Some(&60));
        let k = cls.series_orders.len();
        assert!(k >= 2 && cls.series_orders[k - 1] == cls.series_orders[k - 2]);
    }

    #[test]
    fn derived_members_are_normal() {
        // Conjugation check on the first derived step of S4.
        let g = closure(&preset("S4").unwrap()).unwrap();
        let d = derived_subgroup(&g, 10_080).unwrap();
        assert_eq!(d.len(), 12);
        assert!(is_normal_subgroup(&d, &g).unwrap());
    }

    #[test]
    fn trivial_group_is_abelian() {
        let spec = GroupSpec::from_cycle_strings(&["()"], Some(3)).unwrap();
        let cls = derived_series(&spec).unwrap();
        assert_eq!(cls.level, SolvabilityLevel::Abelian);
        assert_eq!(cls.series_orders, vec![1]);
    }
}
