//! Property tests for the group algebra and scene invariants.

mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use lsa_core::groups::{
    closure, derived_series, is_normal_subgroup, preset, word_evaluate, GroupElement, GroupSpec,
    Permutation, WordTerm,
};
use lsa_core::scene::{apply, level_generators, Level, PoseState};

fn perm_strategy(n: usize) -> impl Strategy<Value = Permutation> {
    // Argsort of random keys yields a uniform permutation.
    proptest::collection::vec(proptest::num::u64::ANY, n).prop_map(move |keys| {
        let mut images: Vec<usize> = (0..n).collect();
        images.sort_by_key(|&i| (keys[i], i));
        Permutation::from_images(images).unwrap()
    })
}

proptest! {
    #[test]
    fn inverse_cancels(p in perm_strategy(7), q in perm_strategy(7)) {
        prop_assert!(p.compose(&p.inverse()).unwrap().is_identity());
        // (p·q)⁻¹ = q⁻¹·p⁻¹
        let lhs = p.compose(&q).unwrap().inverse();
        let rhs = q.inverse().compose(&p.inverse()).unwrap();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn composition_is_associative(
        a in perm_strategy(6),
        b in perm_strategy(6),
        c in perm_strategy(6),
    ) {
        let lhs = a.compose(&b).unwrap().compose(&c).unwrap();
        let rhs = a.compose(&b.compose(&c).unwrap()).unwrap();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn word_with_reversed_inverse_suffix_is_identity(
        word in proptest::collection::vec((0usize..2, proptest::bool::ANY), 0..30),
        preset_idx in 0usize..4,
    ) {
        let name = ["Z5", "S4", "A5", "icosahedral"][preset_idx];
        let spec = preset(name).unwrap();
        let mut terms: Vec<WordTerm> = word
            .iter()
            .map(|&(i, inv)| WordTerm { index: i % spec.generators().len(), inverted: inv })
            .collect();
        let suffix: Vec<WordTerm> = terms
            .iter()
            .rev()
            .map(|t| WordTerm { index: t.index, inverted: !t.inverted })
            .collect();
        terms.extend(suffix);
        prop_assert!(word_evaluate(&spec, &terms).unwrap().is_identity());
    }

    // Solvability classification agrees with the independent brute force for
    // groups generated by random permutations on ≤ 4 points (order ≤ 24).
    #[test]
    fn small_group_classification_matches_oracle(
        a in perm_strategy(4),
        b in perm_strategy(4),
    ) {
        let gens = vec![a, b];
        let spec = GroupSpec::from_permutations(gens.clone()).unwrap();
        let ours = derived_series(&spec).unwrap();
        let oracle = common::naive_series_orders(&gens);
        prop_assert_eq!(&ours.series_orders, &oracle);
        prop_assert_eq!(format!("{:?}", ours.level), common::naive_classify(&oracle));
    }

    // All pairs of L1 actions commute exactly, from any reachable state.
    #[test]
    fn l1_actions_commute_exactly(
        i in 0usize..6,
        j in 0usize..6,
        prefix in proptest::collection::vec(0usize..6, 0..10),
    ) {
        let gens = level_generators(Level::L1);
        let mut state = PoseState::initial(Level::L1);
        for &k in &prefix {
            state = apply(&state, &gens[k]).unwrap();
        }
        let ab = apply(&apply(&state, &gens[i]).unwrap(), &gens[j]).unwrap();
        let ba = apply(&apply(&state, &gens[j]).unwrap(), &gens[i]).unwrap();
        prop_assert_eq!(ab, ba);
    }
}

/// Bijectivity survives 10⁴ random compose/inverse operations.
#[test]
fn permutation_bijectivity_fuzz() {
    let mut rng = ChaCha20Rng::seed_from_u64(0xF022);
    let n = 9;
    let mut pool: Vec<Permutation> = (0..8)
        .map(|_| {
            let mut images: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                let j = rng.gen_range(0..=i);
                images.swap(i, j);
            }
            Permutation::from_images(images).unwrap()
        })
        .collect();
    for _ in 0..10_000 {
        let a = &pool[rng.gen_range(0..pool.len())];
        let candidate = if rng.gen_bool(0.3) {
            a.inverse()
        } else {
            let b = &pool[rng.gen_range(0..pool.len())];
            a.compose(b).unwrap()
        };
        // from_images revalidates the bijection invariant.
        let revalidated = Permutation::from_images(candidate.images().to_vec()).unwrap();
        let slot = rng.gen_range(0..pool.len());
        pool[slot] = revalidated;
    }
}

/// Each derived-series step is a normal subgroup of its predecessor, checked
/// by conjugation on groups of order ≤ 120.
#[test]
fn derived_steps_are_normal() {
    for name in ["Z5", "S4", "A5", "icosahedral"] {
        let spec = preset(name).unwrap();
        let gens: Vec<Permutation> = spec
            .generators()
            .iter()
            .map(|g| match g {
                GroupElement::Perm(p) => p.clone(),
                _ => unreachable!(),
            })
            .collect();
        let mut current = common::naive_closure(&gens);
        if current.len() > 120 {
            continue;
        }
        loop {
            let next = common::naive_derived_subgroup(&current);
            assert!(
                is_normal_subgroup(&next, &current).unwrap(),
                "{name}: derived step is not normal"
            );
            if next.len() == current.len() || next.len() == 1 {
                break;
            }
            current = next;
        }
    }
}

/// The closure of the icosahedral generators matches the naive oracle
/// element-for-element.
#[test]
fn icosahedral_closure_matches_oracle() {
    let spec = preset("icosahedral").unwrap();
    let ours: std::collections::BTreeSet<Permutation> =
        closure(&spec).unwrap().into_iter().collect();
    let gens: Vec<Permutation> = spec
        .generators()
        .iter()
        .map(|g| match g {
            GroupElement::Perm(p) => p.clone(),
            _ => unreachable!(),
        })
        .collect();
    let oracle: std::collections::BTreeSet<Permutation> =
        common::naive_closure(&gens).into_iter().collect();
    assert_eq!(ours, oracle);
}
