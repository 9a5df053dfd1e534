//! Property suites for the structural invariants that cut across modules.

mod common;

use proptest::prelude::*;
use quota_robust::adversary::{
    adversarial_pair, myopic_worst_case, sender_best_response, worst_case_regret, GridParams,
    RuleTable, StructureGrid,
};
use quota_robust::binary::{
    left_error, optimal_quota, right_error, thresholds, BinaryPrior,
};
use quota_robust::checks::split_posterior;
use quota_robust::game::{play, simulate};
use quota_robust::model::{FiniteModel, Posterior, Quota, SenderUtility};
use quota_robust::transport;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn normalized(raw: Vec<f64>) -> Vec<f64> {
    let total: f64 = raw.iter().sum();
    raw.iter().map(|x| x / total).collect()
}

fn belief_strategy(len: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(1e-3f64..1.0, len).prop_map(normalized)
}

proptest! {
    /// Expected payoff is linear in the belief.
    #[test]
    fn posterior_payoff_is_linear(
        a in belief_strategy(3),
        b in belief_strategy(3),
        lambda in 0.0f64..1.0,
        rows in proptest::collection::vec(proptest::collection::vec(-1.0f64..1.0, 2), 3),
    ) {
        let model = FiniteModel::from_parts(rows, vec![1.0 / 3.0; 3]).unwrap();
        let mix: Vec<f64> = a.iter().zip(&b)
            .map(|(x, y)| lambda * x + (1.0 - lambda) * y)
            .collect();
        let mixed = Posterior::new(mix).unwrap();
        let (pa, pb) = (Posterior { belief: a }, Posterior { belief: b });
        for action in 0..2 {
            let direct = model.payoff(&mixed, action);
            let combined = lambda * model.payoff(&pa, action)
                + (1.0 - lambda) * model.payoff(&pb, action);
            prop_assert!((direct - combined).abs() < 1e-12);
        }
    }

    /// The binary reduction preserves the myopic comparison: action 1 is
    /// chosen exactly when the expected payoff difference is positive
    /// (ties go to action 0).
    #[test]
    fn binary_reduction_preserves_argmax(
        rows in proptest::collection::vec(proptest::collection::vec(-1.0f64..1.0, 2), 3),
        belief in belief_strategy(3),
    ) {
        let model = FiniteModel::from_parts(rows.clone(), vec![1.0 / 3.0; 3]).unwrap();
        let mu = Posterior { belief: belief.clone() };
        let diff: f64 = belief.iter().enumerate()
            .map(|(s, &p)| p * (rows[s][1] - rows[s][0]))
            .sum();
        let expected = usize::from(diff > 0.0);
        prop_assert_eq!(model.myopic_action(&mu), expected);
    }

    /// Returned plans satisfy both marginals and are nonnegative.
    #[test]
    fn plans_are_feasible(seed in 0u64..1024) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let states = rng.gen_range(2..=4usize);
        let actions = rng.gen_range(2..=4usize);
        let model = common::random_model(&mut rng, states, actions);
        let grid = StructureGrid::generate(&model, GridParams {
            signals: 3,
            resolution: 2,
            random_count: 2,
            seed,
        }).unwrap();
        let quota = common::random_quota(&mut rng, actions);
        for pi in &grid.structures {
            let (_, plan) = transport::constrained_value(&model, pi, &quota).unwrap();
            prop_assert!(plan.marginal_error() < 1e-9);
            prop_assert!(plan.flow.iter().flatten().all(|&f| f >= 0.0));
            for row in plan.decision_rule() {
                let sum: f64 = row.iter().sum();
                prop_assert!((sum - 1.0).abs() < 1e-9);
            }
        }
    }

    /// Both biased-error closed forms agree at the boundary quota
    /// `q = 1 - p0`, where the partition is exactly feasible.
    #[test]
    fn biased_errors_agree_at_the_boundary(seed in 0u64..2048) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let prior = common::random_binary_prior(&mut rng);
        let (lo, hi) = thresholds(&prior);
        let p0 = lo + (hi - lo) * rng.gen::<f64>();
        let gamma = rng.gen_range(0.0f64..1.0);
        let q = 1.0 - p0;
        let left = quota_robust::binary::left_biased_regret(&prior, q, gamma, p0);
        let right = quota_robust::binary::right_biased_regret(&prior, q, gamma, p0);
        let expected = (2.0 * gamma - 1.0) * prior.quantile().upper_integral(p0);
        prop_assert!((left - expected).abs() <= 1e-12, "left {} vs {}", left, expected);
        prop_assert!((right - expected).abs() <= 1e-12, "right {} vs {}", right, expected);
    }

    /// The threshold interval always contains the uninformative partition
    /// that matters: a nonnegative mean pins the lower threshold at 0 and a
    /// nonpositive mean pins the upper at 1.
    #[test]
    fn thresholds_contain_the_relevant_endpoint(seed in 0u64..2048) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let prior = common::random_binary_prior(&mut rng);
        let (lo, hi) = thresholds(&prior);
        prop_assert!(0.0 <= lo && lo <= hi && hi <= 1.0);
        if prior.prior_mean() >= 0.0 {
            prop_assert_eq!(lo, 0.0);
        }
        if prior.prior_mean() <= 0.0 {
            prop_assert_eq!(hi, 1.0);
        }
    }

    /// The transport distance between structures is symmetric.
    #[test]
    fn wasserstein_is_symmetric(seed in 0u64..512) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = common::random_model(&mut rng, 3, 2);
        let grid = StructureGrid::generate(&model, GridParams {
            signals: 3,
            resolution: 2,
            random_count: 4,
            seed,
        }).unwrap();
        let a = &grid.structures[rng.gen_range(0..grid.len())];
        let b = &grid.structures[rng.gen_range(0..grid.len())];
        let ab = transport::wasserstein(a, b).unwrap();
        let ba = transport::wasserstein(b, a).unwrap();
        prop_assert!((ab - ba).abs() < 1e-12);
        prop_assert!(transport::wasserstein(a, a).unwrap().abs() < 1e-12);
    }
}

#[test]
fn strict_monotonicity_where_errors_are_positive() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..10 {
        let prior = common::random_binary_prior_nonzero_mean(&mut rng);
        for &gamma in &[0.25, 0.5, 0.75] {
            for i in 0..10 {
                let q = i as f64 * 0.1;
                let q_next = q + 0.1;
                let l = left_error(&prior, q, gamma).unwrap().value;
                let l_next = left_error(&prior, q_next, gamma).unwrap().value;
                if l.min(l_next) >= 1e-6 {
                    assert!(
                        l_next <= l - 1e-9,
                        "left error not strictly decreasing: {l} -> {l_next} at q={q}"
                    );
                }
                let r = right_error(&prior, q, gamma).unwrap().value;
                let r_next = right_error(&prior, q_next, gamma).unwrap().value;
                if r.min(r_next) >= 1e-6 {
                    assert!(
                        r_next >= r + 1e-9,
                        "right error not strictly increasing: {r} -> {r_next} at q={q}"
                    );
                }
            }
        }
    }
}

/// The right-biased worst partition keeps every strictly positive atom in
/// the high cell: its low-signal mass is at least the negative mass.
#[test]
fn right_worst_case_respects_the_sign_split() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    for _ in 0..50 {
        let prior = common::random_binary_prior(&mut rng);
        let q = rng.gen::<f64>();
        let gamma = rng.gen_range(0.0f64..1.0);
        let err = right_error(&prior, q, gamma).unwrap();
        if err.feasible {
            let floor = prior.negative_mass().min(1.0 - q).max(thresholds(&prior).0);
            assert!(
                err.argmax_p0 >= floor.min(prior.negative_mass()) - 1e-9,
                "right argmax {} below the negative mass {} (q={q}, gamma={gamma}, atoms {:?})",
                err.argmax_p0,
                prior.negative_mass(),
                prior.atoms()
            );
        }
    }
}

/// Splitting a posterior (more informative structure) never lowers the
/// constrained value.
#[test]
fn blackwell_monotonicity_under_splits() {
    let mut rng = ChaCha8Rng::seed_from_u64(35);
    let mut probes = 0;
    while probes < 60 {
        let states = rng.gen_range(2..=4usize);
        let actions = rng.gen_range(2..=3usize);
        let model = common::random_model(&mut rng, states, actions);
        let grid = StructureGrid::generate(
            &model,
            GridParams {
                signals: 2,
                resolution: 4,
                random_count: 4,
                seed: rng.gen(),
            },
        )
        .unwrap();
        let pi = &grid.structures[rng.gen_range(0..grid.len())];
        let j = rng.gen_range(0..pi.num_signals());
        let Some(finer) = split_posterior(pi, j, &mut rng) else {
            continue;
        };
        let quota = common::random_quota(&mut rng, actions);
        let coarse = transport::constrained_value(&model, pi, &quota).unwrap().0;
        let fine = transport::constrained_value(&model, &finer, &quota).unwrap().0;
        assert!(
            fine >= coarse - 1e-9,
            "split lowered the value: {fine} < {coarse}"
        );
        probes += 1;
    }
}

/// Under a constant rule the sender is indifferent, so the tie-break hands
/// the receiver his best structure for every sender utility.
#[test]
fn constant_rules_align_the_senders_choice() {
    let mut rng = ChaCha8Rng::seed_from_u64(37);
    let model = common::symmetric_model();
    let grid = StructureGrid::generate(
        &model,
        GridParams {
            signals: 2,
            resolution: 8,
            random_count: 8,
            seed: 37,
        },
    )
    .unwrap();
    let menu: Vec<usize> = (0..grid.len()).collect();
    let quota = Quota::binary(0.5);
    let rule = RuleTable::constant(quota.clone(), grid.len());
    let receiver_values: Vec<f64> = grid
        .structures
        .iter()
        .map(|pi| transport::constrained_value(&model, pi, &quota).unwrap().0)
        .collect();
    let best = receiver_values
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    for _ in 0..100 {
        let v = SenderUtility::new(vec![rng.gen(), rng.gen()]).unwrap();
        let chosen = sender_best_response(&model, &grid.structures, &rule, &v, &menu).unwrap();
        assert!(
            (receiver_values[chosen] - best).abs() <= 1e-9,
            "sender picked a receiver-suboptimal structure under a constant rule"
        );
    }
}

/// The separating utility always makes the preferred quota strictly better
/// for the sender.
#[test]
fn adversarial_utilities_separate_strictly() {
    let mut rng = ChaCha8Rng::seed_from_u64(39);
    for _ in 0..200 {
        let k = rng.gen_range(2..=4usize);
        let a = common::random_quota(&mut rng, k);
        let b = common::random_quota(&mut rng, k);
        match adversarial_pair(&a, &b) {
            Ok(v) => {
                let margin = v.expected(&a) - v.expected(&b);
                assert!(margin > 0.0, "no strict separation: margin {margin}");
                assert!(v.values.iter().all(|&x| x >= 0.0));
            }
            Err(_) => {
                let max_diff = a
                    .probs
                    .iter()
                    .zip(&b.probs)
                    .map(|(x, y)| (x - y).abs())
                    .fold(0.0f64, f64::max);
                assert!(max_diff <= 1e-12);
            }
        }
    }
}

/// The myopic rule's worst case dominates the optimal quota's worst case
/// at plain regret.
#[test]
fn myopic_rule_is_weakly_worse_than_the_optimal_quota() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for _ in 0..8 {
        let prior = common::random_binary_prior(&mut rng);
        let model = prior.canonical_model();
        let (myopic, _, _) = myopic_worst_case(&model);
        let (q_star, _) = optimal_quota(&prior, 0.5).unwrap();
        let grid = StructureGrid::generate(
            &model,
            GridParams {
                signals: 2,
                resolution: 50,
                random_count: 10,
                seed: rng.gen(),
            },
        )
        .unwrap();
        let (quota_worst, _) =
            worst_case_regret(&model, &Quota::binary(q_star), &grid.structures, 0.5).unwrap();
        assert!(
            myopic >= quota_worst - 1e-9,
            "myopic {myopic} vs quota worst case {quota_worst}"
        );
    }
}

/// Regret decomposition: efficiency plus agency always sum exactly to
/// plain regret. Nonnegativity of both terms holds for the myopic rule on
/// any menu and for constant rules on informativeness-ordered menus; a
/// constant rule on an incomparable menu can have negative agency loss
/// because the sender's receiver-favoring tie-break may beat the
/// first-best structure under the quota.
#[test]
fn loss_decomposition_is_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    for _ in 0..20 {
        let states = rng.gen_range(2..=4usize);
        let actions = rng.gen_range(2..=3usize);
        let model = common::random_model(&mut rng, states, actions);
        let grid = StructureGrid::generate(
            &model,
            GridParams {
                signals: 2,
                resolution: 3,
                random_count: 3,
                seed: rng.gen(),
            },
        )
        .unwrap();
        let menu = grid.structures[..grid.len().min(4)].to_vec();
        let rules = [
            RuleTable::constant(common::random_quota(&mut rng, actions), menu.len()),
            RuleTable::myopic(&model, &menu),
        ];
        for rule in rules {
            let v =
                SenderUtility::new((0..actions).map(|_| rng.gen::<f64>()).collect()).unwrap();
            let outcome = play(&model, &menu, &rule, &v, 0.5).unwrap();
            let identity =
                outcome.efficiency_loss + outcome.agency_loss - outcome.regret_plain;
            assert!(identity.abs() <= 1e-10);
            assert!(outcome.efficiency_loss >= -1e-10);
        }

        // Myopic rules never lose to efficiency; agency is the whole regret.
        let myopic = RuleTable::myopic(&model, &menu);
        let v = SenderUtility::new((0..actions).map(|_| rng.gen::<f64>()).collect()).unwrap();
        let outcome = play(&model, &menu, &myopic, &v, 0.5).unwrap();
        assert!(outcome.efficiency_loss.abs() <= 1e-10);
        assert!(outcome.agency_loss >= -1e-10);

        // On an informativeness-ordered menu both terms are nonnegative for
        // any constant rule.
        let ordered = vec![
            quota_robust::model::full_revelation(&model),
            quota_robust::model::no_information(&model),
        ];
        let rule = RuleTable::constant(common::random_quota(&mut rng, actions), ordered.len());
        let outcome = play(&model, &ordered, &rule, &v, 0.5).unwrap();
        assert!(outcome.efficiency_loss >= -1e-10);
        assert!(outcome.agency_loss >= -1e-10);
    }
}

/// Standard errors shrink like the square root of the round count.
#[test]
fn standard_errors_follow_the_clt_rate() {
    let model = common::symmetric_model();
    let menu = vec![quota_robust::model::full_revelation(&model)];
    let rule = RuleTable::constant(Quota::binary(0.5), 1);
    let v = SenderUtility::new(vec![0.5, 0.5]).unwrap();
    let small = simulate(&model, &menu, &rule, &v, 0.5, 30_000, 17).unwrap();
    let large = simulate(&model, &menu, &rule, &v, 0.5, 90_000, 18).unwrap();
    let ratio = small.receiver_std_error / large.receiver_std_error;
    assert!(
        (1.5..=2.1).contains(&ratio),
        "se ratio {ratio} outside the loose CLT band"
    );
}

/// Worst-case search restricted to partitions agrees with the closed form
/// within the Lipschitz-propagated grid error.
#[test]
fn grid_worst_case_tracks_the_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(47);
    for _ in 0..5 {
        let prior = common::random_binary_prior(&mut rng);
        let model = prior.canonical_model();
        let resolution = 200usize;
        let grid = StructureGrid::generate(
            &model,
            GridParams {
                signals: 2,
                resolution,
                random_count: 0,
                seed: 1,
            },
        )
        .unwrap();
        let width = model.utility_range_width();
        let q = rng.gen::<f64>();
        let gamma = rng.gen_range(0.0f64..1.0);
        let (grid_value, _) =
            worst_case_regret(&model, &Quota::binary(q), &grid.structures, gamma).unwrap();
        let closed = left_error(&prior, q, gamma)
            .unwrap()
            .value
            .max(right_error(&prior, q, gamma).unwrap().value);
        let bound = width * 2.0 / resolution as f64;
        assert!(
            (grid_value - closed).abs() <= bound,
            "grid {grid_value} vs closed form {closed} (allowed {bound})"
        );
        assert!(grid_value <= closed + 1e-9);
    }
}

/// BinaryPrior atoms merge and stay sorted even from unsorted input.
#[test]
fn binary_prior_normalizes_its_atoms() {
    let prior = BinaryPrior::new(vec![(0.5, 0.25), (-0.5, 0.25), (0.5, 0.25), (-1.0, 0.25)])
        .unwrap();
    assert_eq!(prior.atoms(), &[(-1.0, 0.25), (-0.5, 0.25), (0.5, 0.5)]);
    let cums = prior.cumulative();
    assert_eq!(cums.first(), Some(&0.0));
    assert_eq!(cums.last(), Some(&1.0));
}
