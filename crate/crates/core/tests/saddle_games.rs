mod common;

use proptest::prelude::*;
use rand::Rng;

use riskdp::saddle::{analyze, build_psi_mdp, build_psi_soc, dual_maximin, is_saddle, primal_minimax, randomized_value, PsiMatrix};
use riskdp::RiskSpec;

fn matrix(rng: &mut impl Rng, max: usize, integer: bool) -> Vec<Vec<f64>> {
    let (m, n) = (rng.gen_range(1..=max), rng.gen_range(1..=max));
    (0..m)
        .map(|_| {
            (0..n)
                .map(|_| if integer { rng.gen_range(0..4) as f64 } else { rng.gen_range(-5.0..5.0) })
                .collect()
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn duality_chain(seed in any::<u64>(), integer in any::<bool>()) {
        let mut rng = common::rng(seed);
        let psi = PsiMatrix::new(matrix(&mut rng, 8, integer)).unwrap();
        let r = analyze(&psi, 1e-9).unwrap();
        prop_assert!(r.dual <= r.randomized + 1e-9);
        prop_assert!(r.randomized <= r.primal + 1e-9);
        prop_assert_eq!(r.gap, r.primal - r.dual);
        prop_assert_eq!(r.gap <= 1e-9, r.saddle.is_some());
        if let Some((u, p)) = r.saddle {
            let v = psi.get(u, p);
            prop_assert!((0..psi.n_rows()).all(|i| v <= psi.get(i, p)));
            prop_assert!((0..psi.n_cols()).all(|j| v >= psi.get(u, j)));
            prop_assert_eq!(r.randomized, r.primal);
        }
        let total: f64 = r.mix.iter().sum();
        prop_assert!((total - 1.0).abs() <= 1e-12);
        prop_assert!(r.mix.iter().all(|&x| x >= 0.0));
        for j in 0..psi.n_cols() {
            let against: f64 = (0..psi.n_rows()).map(|i| r.mix[i] * psi.get(i, j)).sum();
            prop_assert!(against <= r.randomized + 1e-9);
        }
    }

    #[test]
    fn mixed_value_matches_support_oracle(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let rows = matrix(&mut rng, 4, false);
        let (v, _) = randomized_value(&PsiMatrix::new(rows.clone()).unwrap()).unwrap();
        let oracle = common::mixed_value_oracle(&rows);
        prop_assert!((v - oracle).abs() <= 1e-9, "{v} vs {oracle}");
    }

    #[test]
    fn single_column_has_no_gap(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let n = rng.gen_range(1..8);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.gen_range(-5.0..5.0)]).collect();
        let r = analyze(&PsiMatrix::new(rows).unwrap(), 1e-9).unwrap();
        prop_assert_eq!(r.gap, 0.0);
        prop_assert!(r.saddle.is_some());
    }
}

#[test]
fn matching_pennies_and_pure_saddle() {
    let pennies = PsiMatrix::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
    let r = analyze(&pennies, 1e-9).unwrap();
    assert_eq!((r.primal, r.dual, r.randomized), (1.0, 0.0, 0.5));
    assert_eq!(r.saddle, None);

    let easy = PsiMatrix::new(vec![vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
    let r = analyze(&easy, 1e-9).unwrap();
    assert_eq!(r.gap, 0.0);
    assert_eq!(r.saddle, Some((0, 1)));
    assert!(is_saddle(&easy, 0, 1, 0.0));
    assert_eq!(primal_minimax(&easy), (2.0, 0));
    assert_eq!(dual_maximin(&easy), (2.0, 1));
}

#[test]
fn entropic_matrices_carry_a_warning() {
    let psi = PsiMatrix::new(vec![vec![1.0]]).unwrap().with_risk(Some(RiskSpec::Entropic { tau: 1.0 }));
    assert!(analyze(&psi, 1e-9).unwrap().warning.is_some());
    let psi = PsiMatrix::new(vec![vec![1.0]]).unwrap().with_risk(Some(RiskSpec::Expectation));
    assert!(analyze(&psi, 1e-9).unwrap().warning.is_none());
}

#[test]
fn stage_matrices_agree_with_bellman_values() {
    let mut rng = common::rng(4);
    for _ in 0..20 {
        let m = common::soc_model(&mut rng, common::Shape::finite(2).robust(3), true);
        let risk = common::risk(&mut rng);
        let p = riskdp::StageRiskProfile::constant(risk, 2);
        let sol = riskdp::soc::solve_soc_finite(&m, &p).unwrap();
        let d = riskdp::mdp::mdp_from_soc(&m).unwrap();
        for x in 0..m.states() {
            let psi = build_psi_soc(&m, 0, x, sol.values[1].values(), &risk).unwrap();
            assert_eq!(primal_minimax(&psi).0, sol.value_at(x));
            let psi_d = build_psi_mdp(&d, 0, x, sol.values[1].values(), &risk).unwrap();
            assert!((primal_minimax(&psi_d).0 - sol.value_at(x)).abs() <= 1e-12);
        }
    }
}
