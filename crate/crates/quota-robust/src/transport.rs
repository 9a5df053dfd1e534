//! Quota-constrained receiver values as exact transportation problems.
//!
//! `U(q, pi)` maximizes the receiver's expected payoff over joint
//! distributions of (posterior, action) whose marginals are the signal
//! weights and the quota. Two-column instances use a provably optimal
//! sort-and-fill greedy; larger instances go through the transportation
//! simplex. The same kernel, run as a minimizer over the L1 ground cost,
//! yields the Wasserstein distance between signal structures.

use serde::Serialize;

use crate::model::{FiniteModel, Quota, SignalStructure};
use crate::simplex;
use crate::{Error, Result};

/// A joint measure over (signal, action) with fixed marginals.
#[derive(Debug, Clone, Serialize)]
pub struct TransportPlan {
    /// Row-major flow, rows indexed by signal, columns by action.
    pub flow: Vec<Vec<f64>>,
    /// Signal weights (row sums).
    pub row_marginal: Vec<f64>,
    /// Quota (column sums).
    pub col_marginal: Quota,
}

impl TransportPlan {
    /// Per-signal action distributions `alpha(a | signal_j)`.
    pub fn decision_rule(&self) -> Vec<Vec<f64>> {
        self.flow
            .iter()
            .zip(&self.row_marginal)
            .map(|(row, &p)| row.iter().map(|&f| f / p).collect())
            .collect()
    }

    /// Largest deviation of row/column sums from the stated marginals.
    pub fn marginal_error(&self) -> f64 {
        let mut err = 0.0f64;
        for (row, &p) in self.flow.iter().zip(&self.row_marginal) {
            err = err.max((row.iter().sum::<f64>() - p).abs());
        }
        for (a, &q) in self.col_marginal.probs.iter().enumerate() {
            let col: f64 = self.flow.iter().map(|row| row[a]).sum();
            err = err.max((col - q).abs());
        }
        err
    }
}

/// One evaluation of the generalized regret `gamma * u*(pi) - (1 - gamma) * U(q, pi)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RegretReport {
    pub first_best: f64,
    pub constrained_value: f64,
    pub gamma: f64,
    pub regret: f64,
}

fn check_dimensions(model: &FiniteModel, pi: &SignalStructure) -> Result<()> {
    if pi.posteriors[0].len() != model.num_states() {
        return Err(Error::DimensionMismatch(format!(
            "structure over {} states, model has {}",
            pi.posteriors[0].len(),
            model.num_states()
        )));
    }
    Ok(())
}

/// Exact maximum of the receiver's payoff subject to the quota constraint,
/// together with an optimal plan.
pub fn constrained_value(
    model: &FiniteModel,
    pi: &SignalStructure,
    quota: &Quota,
) -> Result<(f64, TransportPlan)> {
    check_dimensions(model, pi)?;
    if quota.len() != model.num_actions() {
        return Err(Error::DimensionMismatch(format!(
            "quota over {} actions, model has {}",
            quota.len(),
            model.num_actions()
        )));
    }
    let n = pi.num_signals();
    let payoff: Vec<Vec<f64>> = pi
        .posteriors
        .iter()
        .map(|mu| (0..model.num_actions()).map(|a| model.payoff(mu, a)).collect())
        .collect();

    // Zero-quota actions carry no flow; drop them and reinsert zero columns.
    let active: Vec<usize> = (0..quota.len()).filter(|&a| quota.probs[a] > 0.0).collect();
    let mut flow = vec![vec![0.0; quota.len()]; n];
    match active.len() {
        1 => {
            let a = active[0];
            for (j, row) in flow.iter_mut().enumerate() {
                row[a] = pi.weights[j];
            }
        }
        2 => {
            let (a0, a1) = (active[0], active[1]);
            greedy_two_columns(&pi.weights, &payoff, a0, a1, quota.probs[a1], &mut flow);
        }
        _ => {
            let cost: Vec<Vec<f64>> = payoff
                .iter()
                .map(|row| active.iter().map(|&a| -row[a]).collect())
                .collect();
            let demand: Vec<f64> = active.iter().map(|&a| quota.probs[a]).collect();
            let (_, reduced) = simplex::solve_min(&pi.weights, &demand, &cost);
            for (j, row) in reduced.iter().enumerate() {
                for (c, &a) in active.iter().enumerate() {
                    flow[j][a] = row[c].max(0.0);
                }
            }
        }
    }
    let value = flow
        .iter()
        .zip(&payoff)
        .map(|(fr, pr)| fr.iter().zip(pr).map(|(f, p)| f * p).sum::<f64>())
        .sum();
    let plan = TransportPlan {
        flow,
        row_marginal: pi.weights.clone(),
        col_marginal: quota.clone(),
    };
    Ok((value, plan))
}

/// Fractional-knapsack fill for two active columns: every unit moved from
/// `a0` to `a1` earns the payoff difference, so filling the `a1` budget in
/// decreasing order of that difference is optimal.
fn greedy_two_columns(
    weights: &[f64],
    payoff: &[Vec<f64>],
    a0: usize,
    a1: usize,
    budget: f64,
    flow: &mut [Vec<f64>],
) {
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&i, &j| {
        let di = payoff[i][a1] - payoff[i][a0];
        let dj = payoff[j][a1] - payoff[j][a0];
        dj.partial_cmp(&di).unwrap().then(i.cmp(&j))
    });
    let mut remaining = budget;
    for &j in &order {
        let f = remaining.min(weights[j]);
        flow[j][a1] = f;
        flow[j][a0] = weights[j] - f;
        remaining -= f;
    }
}

/// Receiver value when every signal is answered with its myopically optimal
/// action: `sum_j p_j * max_a u(mu_j, a)`.
pub fn first_best(model: &FiniteModel, pi: &SignalStructure) -> f64 {
    pi.posteriors
        .iter()
        .zip(&pi.weights)
        .map(|(mu, &p)| {
            let best = (0..model.num_actions())
                .map(|a| model.payoff(mu, a))
                .fold(f64::NEG_INFINITY, f64::max);
            p * best
        })
        .sum()
}

/// Generalized regret of quota `q` against structure `pi`. Negative values
/// are legitimate for `gamma < 1/2`.
pub fn regret(
    model: &FiniteModel,
    pi: &SignalStructure,
    quota: &Quota,
    gamma: f64,
) -> Result<RegretReport> {
    check_gamma(gamma)?;
    let fb = first_best(model, pi);
    let (value, _) = constrained_value(model, pi, quota)?;
    Ok(RegretReport {
        first_best: fb,
        constrained_value: value,
        gamma,
        regret: gamma * fb - (1.0 - gamma) * value,
    })
}

pub(crate) fn check_gamma(gamma: f64) -> Result<()> {
    if !(0.0..1.0).contains(&gamma) || !gamma.is_finite() {
        return Err(Error::GammaOutOfRange(gamma));
    }
    Ok(())
}

/// Wasserstein distance between two signal structures under the L1 ground
/// cost on beliefs.
pub fn wasserstein(pi1: &SignalStructure, pi2: &SignalStructure) -> Result<f64> {
    if pi1.posteriors[0].len() != pi2.posteriors[0].len() {
        return Err(Error::DimensionMismatch(format!(
            "structures over {} and {} states",
            pi1.posteriors[0].len(),
            pi2.posteriors[0].len()
        )));
    }
    let cost: Vec<Vec<f64>> = pi1
        .posteriors
        .iter()
        .map(|mu| pi2.posteriors.iter().map(|nu| mu.l1_distance(nu)).collect())
        .collect();
    let (value, _) = simplex::solve_min(&pi1.weights, &pi2.weights, &cost);
    Ok(value.max(0.0))
}
