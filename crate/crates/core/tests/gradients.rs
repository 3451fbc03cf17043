mod common;

use common::{grad_corpus, gradient_error, jittered_model, pair, param_delta};
use goalplot::clusters::build_cluster_index;
use goalplot::reinforce::{reinforce_step, FinetuneMode};
use goalplot::reward::RewardTable;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn analytic_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for (case, (story, pos)) in [(1, 0), (1, 2), (4, 3)].into_iter().enumerate() {
        let mut model = jittered_model(case as u64);
        let (src, tgt) = pair(&model, story, pos);
        let (rel, at) = gradient_error(&mut model, &src, &tgt, 20, &mut rng);
        assert!(rel <= 1e-4, "relative error {rel} at {at}");
    }
}

#[test]
fn policy_step_is_reward_scaled_likelihood_step() {
    let c = grad_corpus();
    let table = RewardTable::from_corpus(&c, "g").unwrap();
    let index = build_cluster_index(&table, 2).unwrap();
    let base = jittered_model(7);
    let mut seen_positive = false;
    for (n, e) in c.stories.iter().flat_map(|s| s.plot()).enumerate() {
        for mode in [FinetuneMode::Unrestricted, FinetuneMode::Clustered] {
            let mut rl = base.clone();
            let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
            let report =
                reinforce_step(&mut rl, e, &table, Some(&index), mode, 0.05, &mut rng).unwrap();
            let mut ml = base.clone();
            ml.likelihood_step(e, &report.sampled, 0.05).unwrap();
            if report.reward == 0.0 {
                assert_eq!(rl.params, base.params, "zero reward changed parameters");
                continue;
            }
            seen_positive = true;
            let d_rl = param_delta(&rl.params, &base.params);
            let d_ml = param_delta(&ml.params, &base.params);
            for (a, b) in d_rl.iter().zip(&d_ml) {
                assert!(
                    (a - report.reward * b).abs() <= 1e-12,
                    "{a} vs {} * {b}",
                    report.reward
                );
            }
        }
    }
    assert!(seen_positive);
}

#[test]
fn positive_reward_raises_log_probability() {
    let c = grad_corpus();
    let table = RewardTable::from_corpus(&c, "g").unwrap();
    let base = jittered_model(2);
    let mut checked = 0;
    for (n, e) in c.stories.iter().flat_map(|s| s.plot()).enumerate() {
        let mut model = base.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(100 + n as u64);
        let report = reinforce_step(
            &mut model,
            e,
            &table,
            None,
            FinetuneMode::Unrestricted,
            1e-3,
            &mut rng,
        )
        .unwrap();
        if report.reward > 0.0 {
            let before = base.log_prob(e, &report.sampled).unwrap();
            let after = model.log_prob(e, &report.sampled).unwrap();
            assert!(after > before, "{before} -> {after}");
            checked += 1;
        }
    }
    assert!(checked > 0);
}

#[test]
fn masked_verb_sampling_follows_renormalised_distribution() {
    let model = jittered_model(5);
    let c = grad_corpus();
    let e = &c.stories[0].events()[0];
    let mask = ["a", "b", "g"];
    let ids = model.mask_ids(&mask).unwrap();
    let expected = model.next_event_dist(e).unwrap().masked_verb(&ids);

    const N: usize = 50_000;
    let mut counts = vec![0usize; model.vocab.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..N {
        let (next, _) = model.sample_next(e, Some(&mask), &mut rng).unwrap();
        counts[model.vocab.id(&next.verb).unwrap()] += 1;
    }
    let mut chi2 = 0.0;
    for (id, p) in expected.iter().enumerate() {
        if ids.contains(&id) {
            let want = p * N as f64;
            chi2 += (counts[id] as f64 - want).powi(2) / want;
        } else {
            assert_eq!(counts[id], 0);
            assert_eq!(*p, 0.0);
        }
    }
    // Upper 0.1% point of chi-square with two degrees of freedom.
    assert!(chi2 < 13.82, "chi2 = {chi2}");
}
