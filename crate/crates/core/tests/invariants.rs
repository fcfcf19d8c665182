use proptest::prelude::*;
use simudice_core::algos::{q_update, sampling_probabilities, Formula};
use simudice_core::dataset::{collect_dataset, Dataset};
use simudice_core::dice::{solve_dualdice, weights_from_nu};
use simudice_core::envs::EnvKind;
use simudice_core::mdp::{Policy, QTable};
use simudice_core::rng::derive_seed;
use simudice_core::world_model::TabularWorldModel;

fn env_strategy() -> impl Strategy<Value = EnvKind> {
    prop::sample::select(EnvKind::ALL.to_vec())
}

fn formula_strategy() -> impl Strategy<Value = Formula> {
    prop::sample::select(vec![Formula::F1, Formula::F2, Formula::F3, Formula::Uniform])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn collected_datasets_are_valid_and_round_trip(env in env_strategy(), n in 1usize..400, seed in any::<u64>()) {
        let pi = Policy::uniform(env.n_states(), env.n_actions());
        let d = collect_dataset(env, &pi, n, 1.0, seed).unwrap();
        prop_assert_eq!(d.len(), n);
        let (lo, hi) = env.reward_bounds();
        for r in d.records() {
            prop_assert!(!env.is_terminal(r.state));
            prop_assert!(r.reward >= lo && r.reward <= hi);
            prop_assert!(!(r.done && r.truncated));
        }
        let again = collect_dataset(env, &pi, n, 1.0, seed).unwrap();
        prop_assert_eq!(d.records(), again.records());

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        d.save(&path).unwrap();
        let loaded = Dataset::load(&path).unwrap();
        prop_assert_eq!(loaded.records(), d.records());
        prop_assert_eq!(loaded.collection_seed(), seed);
    }

    #[test]
    fn sampling_distributions_are_normalised_over_known_pairs(
        env in env_strategy(),
        n in 20usize..300,
        seed in any::<u64>(),
        lambda in 0.1f64..2000.0,
        formula in formula_strategy(),
    ) {
        let behaviour = Policy::uniform(env.n_states(), env.n_actions());
        let d = collect_dataset(env, &behaviour, n, 1.0, seed).unwrap();
        let model = TabularWorldModel::fit(&d);
        let nu = solve_dualdice(&d, &behaviour, 0.99, 1e-8).unwrap();
        let w = weights_from_nu(&nu, &d, &behaviour, 0.99);
        let p = sampling_probabilities(&model, &w, lambda, formula).unwrap();

        let table = p.table();
        let total: f64 = table.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
        let known = model.known_pairs();
        for (i, &pr) in table.iter().enumerate() {
            prop_assert!(pr >= 0.0);
            if pr > 0.0 {
                prop_assert!(known.contains(&i));
            }
        }
        prop_assert!(p.entropy() >= -1e-12 && p.entropy() <= (known.len() as f64).ln() + 1e-9);
    }

    #[test]
    fn q_update_contracts_towards_its_target(
        q0 in -50.0f64..50.0,
        r in -20.0f64..20.0,
        next_max in -50.0f64..50.0,
        alpha in 0.0f64..=1.0,
        gamma in 0.0f64..1.0,
        done in any::<bool>(),
    ) {
        let mut q = QTable::from_values(2, 1, vec![q0, next_max]).unwrap();
        q_update(&mut q, 0, 0, r, 1, done, alpha, gamma);
        let target = if done { r } else { r + gamma * next_max };
        prop_assert!(((q.get(0, 0) - target).abs() - (1.0 - alpha) * (q0 - target).abs()).abs() < 1e-9);
        prop_assert_eq!(q.get(1, 0), next_max);
    }

    #[test]
    fn derived_seeds_are_stable_and_separate_streams(master in any::<u64>(), idx in 0u64..1000) {
        prop_assert_eq!(derive_seed(master, "learn/x", idx), derive_seed(master, "learn/x", idx));
        prop_assert_ne!(derive_seed(master, "learn/x", idx), derive_seed(master, "eval/x", idx));
        prop_assert_ne!(derive_seed(master, "learn/x", idx), derive_seed(master, "learn/x", idx + 1));
    }
}
