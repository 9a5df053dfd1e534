//! Plays the commitment timeline: the receiver commits to a rule, the
//! sender best-responds with a signal structure from her menu, then states,
//! signals, and actions realize. Payoffs come out both analytically and by
//! seeded Monte Carlo.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::adversary::{sender_best_response, RuleTable};
use crate::model::{FiniteModel, Quota, SenderUtility, SignalStructure};
use crate::transport;
use crate::{Error, Result};

/// Analytic outcome of one play of the game.
///
/// The regret decomposes exactly: `efficiency_loss` is the payoff lost to
/// quota-constrained actions on the receiver-best structure, `agency_loss`
/// the further loss from the sender's strategic choice, and the two sum to
/// `regret_plain`.
#[derive(Debug, Clone, Serialize)]
pub struct GameOutcome {
    pub chosen_structure: usize,
    pub receiver_value: f64,
    pub sender_value: f64,
    /// Receiver-best achievable value over the menu.
    pub first_best: f64,
    pub regret_plain: f64,
    pub efficiency_loss: f64,
    pub agency_loss: f64,
    pub gamma: f64,
    /// `gamma * first_best - (1 - gamma) * receiver_value`.
    pub regret_gamma: f64,
    /// FNV-1a digest of the menu for reproducibility records.
    pub menu_digest: String,
}

/// Empirical counterpart of a [`GameOutcome`] from seeded sampling.
#[derive(Debug, Clone, Serialize)]
pub struct SimulationOutcome {
    pub analytic: GameOutcome,
    pub rounds: u64,
    pub seed: u64,
    pub empirical_receiver_value: f64,
    pub receiver_std_error: f64,
    pub empirical_sender_value: f64,
    pub sender_std_error: f64,
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

fn menu_digest(menu: &[SignalStructure]) -> String {
    let encoded = serde_json::to_vec(menu).expect("structures serialize");
    format!("{:016x}", fnv1a(&encoded))
}

/// The quota implementing the receiver's first-best payoff on `menu`: the
/// marginal of myopically optimal actions under the structure maximizing
/// the first-best value (ties to the lowest index).
pub fn first_best_quota(model: &FiniteModel, menu: &[SignalStructure]) -> Result<Quota> {
    if menu.is_empty() {
        return Err(Error::EmptyMenu);
    }
    let best = receiver_best_structure(model, menu);
    Ok(crate::adversary::myopic_marginal(model, &menu[best]))
}

fn receiver_best_structure(model: &FiniteModel, menu: &[SignalStructure]) -> usize {
    let mut best = 0;
    let mut best_value = transport::first_best(model, &menu[0]);
    for (i, pi) in menu.iter().enumerate().skip(1) {
        let value = transport::first_best(model, pi);
        if value > best_value {
            best = i;
            best_value = value;
        }
    }
    best
}

/// Plays the timeline once: sender best response, then the rule's optimal
/// plan on the chosen structure. `rule` must cover every menu index.
pub fn play(
    model: &FiniteModel,
    menu: &[SignalStructure],
    rule: &RuleTable,
    v: &SenderUtility,
    gamma: f64,
) -> Result<GameOutcome> {
    transport::check_gamma(gamma)?;
    if menu.is_empty() {
        return Err(Error::EmptyMenu);
    }
    if rule.len() < menu.len() {
        return Err(Error::RuleGap(rule.len()));
    }
    let indices: Vec<usize> = (0..menu.len()).collect();
    let chosen = sender_best_response(model, menu, rule, v, &indices)?;
    let (receiver_value, _) =
        transport::constrained_value(model, &menu[chosen], rule.quota_for(chosen)?)?;
    let sender_value = v.expected(rule.quota_for(chosen)?);

    let fb_index = receiver_best_structure(model, menu);
    let first_best = transport::first_best(model, &menu[fb_index]);
    let (value_at_fb, _) =
        transport::constrained_value(model, &menu[fb_index], rule.quota_for(fb_index)?)?;

    Ok(GameOutcome {
        chosen_structure: chosen,
        receiver_value,
        sender_value,
        first_best,
        regret_plain: first_best - receiver_value,
        efficiency_loss: first_best - value_at_fb,
        agency_loss: value_at_fb - receiver_value,
        gamma,
        regret_gamma: gamma * first_best - (1.0 - gamma) * receiver_value,
        menu_digest: menu_digest(menu),
    })
}

fn sample_index(cdf: &[f64], u: f64) -> usize {
    cdf.iter()
        .position(|&c| u < c)
        .unwrap_or(cdf.len().saturating_sub(1))
}

fn cumulative(probs: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    probs
        .iter()
        .map(|&p| {
            acc += p;
            acc
        })
        .collect()
}

/// Runs `rounds` independent plays of the realized timeline: state from the
/// prior, signal conditionally on the state, action from the committed
/// plan. Deterministic per seed.
pub fn simulate(
    model: &FiniteModel,
    menu: &[SignalStructure],
    rule: &RuleTable,
    v: &SenderUtility,
    gamma: f64,
    rounds: u64,
    seed: u64,
) -> Result<SimulationOutcome> {
    if rounds == 0 {
        return Err(Error::InvalidParams("rounds must be at least 1".into()));
    }
    let analytic = play(model, menu, rule, v, gamma)?;
    let chosen = &menu[analytic.chosen_structure];
    let (_, plan) =
        transport::constrained_value(model, chosen, rule.quota_for(analytic.chosen_structure)?)?;

    let m = model.num_states();
    let prior_cdf = cumulative(&model.prior);
    // Conditional signal distributions: p_j * mu_j(theta) / prior(theta).
    let mut signal_cdfs: Vec<Option<Vec<f64>>> = vec![None; m];
    for (s, &rho) in model.prior.iter().enumerate() {
        if rho > 0.0 {
            let probs: Vec<f64> = chosen
                .posteriors
                .iter()
                .zip(&chosen.weights)
                .map(|(mu, &w)| w * mu.belief[s] / rho)
                .collect();
            signal_cdfs[s] = Some(cumulative(&probs));
        }
    }
    let action_cdfs: Vec<Vec<f64>> = plan
        .decision_rule()
        .iter()
        .map(|row| cumulative(row))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut receiver_sum = 0.0;
    let mut receiver_sq = 0.0;
    let mut sender_sum = 0.0;
    let mut sender_sq = 0.0;
    for _ in 0..rounds {
        let state = sample_index(&prior_cdf, rng.gen::<f64>());
        let signal_cdf = signal_cdfs[state]
            .as_ref()
            .ok_or(Error::ZeroPriorState(state))?;
        let signal = sample_index(signal_cdf, rng.gen::<f64>());
        let action = sample_index(&action_cdfs[signal], rng.gen::<f64>());
        let payoff = model.utility[state][action];
        let reward = v.values[action];
        receiver_sum += payoff;
        receiver_sq += payoff * payoff;
        sender_sum += reward;
        sender_sq += reward * reward;
    }
    let n = rounds as f64;
    let std_error = |sum: f64, sq: f64| {
        if rounds < 2 {
            return 0.0;
        }
        let mean = sum / n;
        let var = ((sq - n * mean * mean) / (n - 1.0)).max(0.0);
        (var / n).sqrt()
    };
    Ok(SimulationOutcome {
        rounds,
        seed,
        empirical_receiver_value: receiver_sum / n,
        receiver_std_error: std_error(receiver_sum, receiver_sq),
        empirical_sender_value: sender_sum / n,
        sender_std_error: std_error(sender_sum, sender_sq),
        analytic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::myopic_worst_case;
    use crate::model::{full_revelation, no_information};

    fn symmetric_model() -> FiniteModel {
        FiniteModel::from_parts(vec![vec![0.0, -1.0], vec![0.0, 1.0]], vec![0.5, 0.5]).unwrap()
    }

    #[test]
    fn first_best_quota_examples() {
        let m = symmetric_model();
        let q = first_best_quota(&m, &[full_revelation(&m)]).unwrap();
        assert_eq!(q.probs, vec![0.5, 0.5]);

        // At the prior the receiver ties and takes action 0.
        let q = first_best_quota(&m, &[no_information(&m)]).unwrap();
        assert_eq!(q.probs, vec![1.0, 0.0]);

        let q = first_best_quota(&m, &[no_information(&m), full_revelation(&m)]).unwrap();
        assert_eq!(q.probs, vec![0.5, 0.5]);

        assert!(matches!(
            first_best_quota(&m, &[]),
            Err(Error::EmptyMenu)
        ));
    }

    #[test]
    fn first_best_quota_achieves_zero_regret() {
        let m = symmetric_model();
        let menu = vec![no_information(&m), full_revelation(&m)];
        let quota = first_best_quota(&m, &menu).unwrap();
        let rule = RuleTable::constant(quota, menu.len());
        for values in [[0.0, 1.0], [1.0, 0.0], [0.4, 0.6]] {
            let v = SenderUtility::new(values.to_vec()).unwrap();
            let outcome = play(&m, &menu, &rule, &v, 0.5).unwrap();
            assert!(outcome.regret_plain.abs() < 1e-12);
            assert!(outcome.efficiency_loss.abs() < 1e-12);
            assert!(outcome.agency_loss.abs() < 1e-12);
        }
    }

    #[test]
    fn myopic_rule_suffers_pure_agency_loss() {
        let m = symmetric_model();
        let (expected, v, menu) = myopic_worst_case(&m);
        let rule = RuleTable::myopic(&m, &menu);
        let outcome = play(&m, &menu, &rule, &v, 0.5).unwrap();
        assert_eq!(outcome.chosen_structure, 1); // no information
        assert!(outcome.efficiency_loss.abs() < 1e-12);
        assert!((outcome.agency_loss - expected).abs() < 1e-12);
        assert!((outcome.regret_plain - expected).abs() < 1e-12);
    }

    #[test]
    fn off_quota_rule_suffers_pure_efficiency_loss() {
        let m = symmetric_model();
        let menu = vec![full_revelation(&m), no_information(&m)];
        let rule = RuleTable::constant(Quota::binary(0.25), menu.len());
        let v = SenderUtility::new(vec![0.7, 0.2]).unwrap();
        let outcome = play(&m, &menu, &rule, &v, 0.5).unwrap();
        assert!(outcome.agency_loss.abs() < 1e-12);
        assert!(outcome.efficiency_loss > 0.0);
        let identity =
            outcome.efficiency_loss + outcome.agency_loss - outcome.regret_plain;
        assert!(identity.abs() < 1e-10);
    }

    #[test]
    fn simulation_is_reproducible_and_consistent() {
        let m = symmetric_model();
        let menu = vec![full_revelation(&m)];
        let rule = RuleTable::constant(Quota::binary(0.5), 1);
        let v = SenderUtility::new(vec![0.5, 0.5]).unwrap();

        let one = simulate(&m, &menu, &rule, &v, 0.5, 1, 99).unwrap();
        let two = simulate(&m, &menu, &rule, &v, 0.5, 1, 99).unwrap();
        assert_eq!(one.empirical_receiver_value, two.empirical_receiver_value);

        let run = simulate(&m, &menu, &rule, &v, 0.5, 200_000, 99).unwrap();
        let deviation = (run.empirical_receiver_value - run.analytic.receiver_value).abs();
        assert!(
            deviation <= 3.0 * run.receiver_std_error,
            "empirical {} vs analytic {} (se {})",
            run.empirical_receiver_value,
            run.analytic.receiver_value,
            run.receiver_std_error
        );
    }

    #[test]
    fn deterministic_plans_have_zero_action_variance() {
        let m = symmetric_model();
        let menu = vec![full_revelation(&m)];
        // Quota 0: action 0 always, receiver payoff identically zero.
        let rule = RuleTable::constant(Quota::binary(0.0), 1);
        let v = SenderUtility::new(vec![1.0, 0.0]).unwrap();
        let run = simulate(&m, &menu, &rule, &v, 0.5, 5_000, 7).unwrap();
        assert_eq!(run.sender_std_error, 0.0);
        assert_eq!(run.empirical_sender_value, 1.0);
        assert_eq!(run.receiver_std_error, 0.0);
    }

    #[test]
    fn zero_rounds_is_invalid() {
        let m = symmetric_model();
        let menu = vec![no_information(&m)];
        let rule = RuleTable::constant(Quota::binary(0.0), 1);
        let v = SenderUtility::new(vec![1.0, 0.0]).unwrap();
        assert!(matches!(
            simulate(&m, &menu, &rule, &v, 0.5, 0, 1),
            Err(Error::InvalidParams(_))
        ));
    }

    #[test]
    fn conditional_signal_probabilities_are_distributions() {
        let m = FiniteModel::from_parts(
            vec![vec![0.1, -0.4], vec![0.0, 1.0], vec![0.5, 0.2]],
            vec![0.3, 0.45, 0.25],
        )
        .unwrap();
        let grid = crate::adversary::StructureGrid::generate(
            &m,
            crate::adversary::GridParams {
                signals: 3,
                resolution: 4,
                random_count: 8,
                seed: 11,
            },
        )
        .unwrap();
        for pi in &grid.structures {
            for (s, &rho) in m.prior.iter().enumerate() {
                if rho > 0.0 {
                    let total: f64 = pi
                        .posteriors
                        .iter()
                        .zip(&pi.weights)
                        .map(|(mu, &w)| w * mu.belief[s] / rho)
                        .sum();
                    assert!((total - 1.0).abs() < 1e-10);
                }
            }
        }
    }
}
