mod common;

use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::Rng;

use riskdp::nested::{build_product_tree, product_nested_evaluate, product_paths};
use riskdp::{FiniteDistribution, RiskSpec, StageRiskProfile};

fn profile(rng: &mut impl Rng, stages: usize) -> StageRiskProfile {
    StageRiskProfile::new((0..stages).map(|_| common::risk(rng)).collect()).unwrap()
}

fn inner_nodes(tree: &riskdp::ScenarioTree) -> Vec<usize> {
    tree.nodes().iter().filter(|n| !n.is_leaf()).map(|n| n.id).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn expectation_matches_path_sum(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let t = rng.gen_range(1..=5);
        let tree = common::tree(&mut rng, t, 4, 1);
        let p = StageRiskProfile::constant(RiskSpec::Expectation, t);
        let v = tree.nested_evaluate(&p).unwrap();
        let oracle = common::path_expectation(&tree, &BTreeMap::new());
        prop_assert!((v - oracle).abs() <= 1e-9);
    }

    #[test]
    fn constant_shift(seed in any::<u64>(), c in -10.0f64..10.0) {
        let mut rng = common::rng(seed);
        let t = rng.gen_range(1..=4);
        let k = rng.gen_range(1..3);
        let tree = common::tree(&mut rng, t, 3, k);
        let p = profile(&mut rng, t);
        let shifted = tree.map_leaves(|_, v| v + c).unwrap();
        if k == 1 {
            let (a, b) = (tree.nested_evaluate(&p).unwrap(), shifted.nested_evaluate(&p).unwrap());
            prop_assert!((b - a - c).abs() <= 1e-9 * a.abs().max(1.0));
        }
        let (a, b) = (tree.robust_nested_evaluate(&p).unwrap(), shifted.robust_nested_evaluate(&p).unwrap());
        prop_assert!((b - a - c).abs() <= 1e-9 * a.abs().max(1.0));
    }

    #[test]
    fn raising_a_leaf_never_lowers(seed in any::<u64>(), bump in 0.0f64..5.0) {
        let mut rng = common::rng(seed);
        let t = rng.gen_range(1..=4);
        let k = rng.gen_range(1..3);
        let tree = common::tree(&mut rng, t, 3, k);
        let p = profile(&mut rng, t);
        let ids: Vec<usize> = tree.leaf_values().keys().copied().collect();
        let target = ids[rng.gen_range(0..ids.len())];
        let raised = tree.map_leaves(|id, v| if id == target { v + bump } else { v }).unwrap();
        if k == 1 {
            prop_assert!(raised.nested_evaluate(&p).unwrap() >= tree.nested_evaluate(&p).unwrap() - 1e-12);
        }
        prop_assert!(raised.robust_nested_evaluate(&p).unwrap() >= tree.robust_nested_evaluate(&p).unwrap() - 1e-12);
    }

    #[test]
    fn product_tree_matches_flat_recursion(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let t = rng.gen_range(1..=4);
        let marginals: Vec<FiniteDistribution> = (0..t)
            .map(|_| {
                let n = rng.gen_range(1..=3);
                let atoms: Vec<f64> = (0..n).map(|i| i as f64 + rng.gen_range(0.0..0.5)).collect();
                FiniteDistribution::new(atoms, common::probs(&mut rng, n)).unwrap()
            })
            .collect();
        let table: Vec<f64> = product_paths(&marginals)
            .iter()
            .map(|path| path.iter().enumerate().map(|(i, x)| x * (i as f64 + 1.0)).sum::<f64>().sin() * 3.0)
            .collect();
        let p = profile(&mut rng, t);
        let tree = build_product_tree(&marginals, &table).unwrap();
        let a = tree.nested_evaluate(&p).unwrap();
        let b = product_nested_evaluate(&marginals, &table, &p).unwrap();
        prop_assert!((a - b).abs() <= 1e-9);
    }

    #[test]
    fn robust_equals_best_member_selection(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let t = rng.gen_range(1..=2);
        let tree = common::tree(&mut rng, t, 2, 2);
        let p = profile(&mut rng, t);
        let inner = inner_nodes(&tree);
        prop_assume!(inner.len() <= 6);
        let mut best = f64::NEG_INFINITY;
        for mask in 0u32..(1 << inner.len()) {
            let members: BTreeMap<usize, usize> = inner
                .iter()
                .enumerate()
                .map(|(i, &id)| (id, (mask >> i & 1) as usize))
                .collect();
            best = best.max(tree.nested_evaluate_with_members(&p, &members).unwrap());
        }
        prop_assert!((tree.robust_nested_evaluate(&p).unwrap() - best).abs() <= 1e-12 * best.abs().max(1.0));
    }
}

#[test]
fn two_hundred_random_trees_match_path_enumeration() {
    let mut rng = common::rng(3);
    for _ in 0..200 {
        let t = rng.gen_range(1..=5);
        let tree = common::tree(&mut rng, t, 4, 1);
        let v = tree
            .nested_evaluate(&StageRiskProfile::constant(RiskSpec::Expectation, t))
            .unwrap();
        assert!((v - common::path_expectation(&tree, &BTreeMap::new())).abs() <= 1e-9);
    }
}

#[test]
fn tree_json_round_trip() {
    let tree = common::tree(&mut common::rng(5), 3, 3, 2);
    let text = serde_json::to_string(&tree).unwrap();
    let back: riskdp::ScenarioTree = serde_json::from_str(&text).unwrap();
    assert_eq!(back, tree);
}
