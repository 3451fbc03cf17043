mod common;

use std::collections::BTreeMap;

use common::{exhaustive_breaks, random_instance};
use goalplot::clusters::{build_cluster_index, jenks_breaks, restricted_vocab};
use goalplot::reward::{RewardEntry, RewardTable};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn dynamic_programme_matches_exhaustive_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..200 {
        let (values, k) = random_instance(&mut rng);
        let got = jenks_breaks(&values, k).unwrap();
        let want = exhaustive_breaks(&values, k);
        assert_eq!(got, want, "case {case}: {values:?} k={k}");
    }
}

#[test]
fn equal_values_stay_together() {
    let values = [0.5, 0.5, 0.5, 0.9, 0.1];
    let breaks = jenks_breaks(&values, 3).unwrap();
    assert_eq!(breaks, vec![1, 4]);
    assert!(jenks_breaks(&values, 4).is_err());
}

fn table(rewards: &[(&str, f64)], goal: &str) -> RewardTable {
    let verbs: BTreeMap<String, RewardEntry> = rewards
        .iter()
        .map(|&(v, r)| {
            (
                v.to_string(),
                RewardEntry {
                    r1: None,
                    r2: None,
                    reward: r,
                },
            )
        })
        .collect();
    RewardTable {
        goal: goal.into(),
        alpha: 1.0,
        verbs,
    }
}

#[test]
fn two_clusters_of_four_verbs() {
    let t = table(&[("v1", 0.1), ("v2", 0.15), ("v3", 0.9), ("g", 1.0)], "g");
    let index = build_cluster_index(&t, 2).unwrap();
    assert_eq!(index.clusters[0].verbs, vec!["v1", "v2"]);
    assert_eq!(index.clusters[1].verbs, vec!["v3", "g"]);
    assert_eq!(restricted_vocab(&index, "v1"), ["v3", "g"]);
    assert_eq!(restricted_vocab(&index, "g"), ["v3", "g"]);
    assert_eq!(restricted_vocab(&index, "unseen"), ["v1", "v2"]);
}

fn reward_table() -> impl Strategy<Value = RewardTable> {
    prop::collection::vec(prop_oneof![Just(0.0), 0.0f64..1.0], 2..14).prop_map(|rewards| {
        let mut verbs: Vec<(String, f64)> = rewards
            .iter()
            .enumerate()
            .map(|(i, &r)| (format!("v{i}"), r))
            .collect();
        verbs.push(("g".into(), 1.0));
        let refs: Vec<(&str, f64)> = verbs.iter().map(|(v, r)| (v.as_str(), *r)).collect();
        table(&refs, "g")
    })
}

proptest! {
    #[test]
    fn clusters_partition_positive_verbs(t in reward_table(), k in 1usize..5) {
        let distinct = {
            let mut r: Vec<f64> = t.verbs.values().map(|e| e.reward).filter(|r| *r > 0.0).collect();
            r.sort_by(f64::total_cmp);
            r.dedup();
            r.len()
        };
        prop_assume!(k <= distinct);
        let index = build_cluster_index(&t, k).unwrap();
        prop_assert_eq!(index.clusters.len(), k);

        let mut members: Vec<&str> = index.clusters.iter().flat_map(|c| c.verbs.iter().map(String::as_str)).collect();
        members.sort();
        let mut expected: Vec<&str> = t.verbs.iter().filter(|(_, e)| e.reward > 0.0).map(|(v, _)| v.as_str()).collect();
        expected.sort();
        prop_assert_eq!(members, expected);

        for w in index.clusters.windows(2) {
            prop_assert!(w[0].mean < w[1].mean);
            prop_assert!(w[0].max < w[1].min);
        }
        prop_assert_eq!(index.cluster_of("g"), Some(k - 1));
    }

    #[test]
    fn restriction_climbs_to_the_top(t in reward_table(), k in 1usize..5) {
        let distinct = {
            let mut r: Vec<f64> = t.verbs.values().map(|e| e.reward).filter(|r| *r > 0.0).collect();
            r.sort_by(f64::total_cmp);
            r.dedup();
            r.len()
        };
        prop_assume!(k <= distinct);
        let index = build_cluster_index(&t, k).unwrap();
        for start in index.clusters[0].verbs.iter() {
            let mut verb = start.clone();
            let mut steps = 0;
            while index.cluster_of(&verb) != Some(index.top()) {
                let allowed = restricted_vocab(&index, &verb);
                prop_assert!(!allowed.is_empty());
                verb = allowed[0].clone();
                steps += 1;
            }
            prop_assert!(steps < k);
            prop_assert!(restricted_vocab(&index, &verb).contains(&"g".to_string()));
        }
        for (v, e) in &t.verbs {
            if e.reward == 0.0 {
                prop_assert_eq!(restricted_vocab(&index, v), index.clusters[0].verbs.as_slice());
            }
        }
    }
}
