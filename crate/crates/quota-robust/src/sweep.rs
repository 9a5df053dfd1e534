//! Comparative-statics sweeps: families of priors ordered by first- or
//! second-order stochastic dominance, with the optimal quota tracked along
//! the family and its predicted monotone direction asserted.

use rayon::prelude::*;
use serde::Deserialize;

use crate::binary::{optimal_quota, BinaryPrior};
use crate::{thread_pool, Error, Result};

/// Predicted direction of the optimal quota along the parameter grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    NonDecreasing,
    NonIncreasing,
    Unconstrained,
}

/// A sweep family parsed from its JSON file.
///
/// - `fosd_shift` interpolates the base weights toward dominating target
///   weights (`gamma` must be 1/2: the monotonicity claim for other gamma
///   values is not established, so the sweep refuses them).
/// - `mps_spread_theta1` / `mps_spread_theta0` split one atom into a
///   mean-preserving pair that widens with the parameter, staying inside
///   the positive (respectively negative) region.
/// - `gamma_sweep` tracks the optimal quota across the grid of gamma
///   values, with no direction asserted.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum SweepSpec {
    FosdShift {
        theta: Vec<f64>,
        prob: Vec<f64>,
        target_prob: Vec<f64>,
        grid: Vec<f64>,
        gamma: f64,
    },
    MpsSpreadTheta1 {
        theta: Vec<f64>,
        prob: Vec<f64>,
        atom_index: usize,
        spread_low: f64,
        spread_high: f64,
        grid: Vec<f64>,
        gamma: f64,
    },
    MpsSpreadTheta0 {
        theta: Vec<f64>,
        prob: Vec<f64>,
        atom_index: usize,
        spread_low: f64,
        spread_high: f64,
        grid: Vec<f64>,
        gamma: f64,
    },
    GammaSweep {
        theta: Vec<f64>,
        prob: Vec<f64>,
        grid: Vec<f64>,
    },
}

/// `(parameter, q_star)` rows plus the direction contract.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub rows: Vec<(f64, f64)>,
    pub direction: Direction,
}

impl SweepSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidParams(format!("sweep file: {e}")))
    }

    pub fn direction(&self) -> Direction {
        match self {
            SweepSpec::FosdShift { .. } => Direction::NonDecreasing,
            SweepSpec::MpsSpreadTheta1 { .. } => Direction::NonIncreasing,
            SweepSpec::MpsSpreadTheta0 { .. } => Direction::NonDecreasing,
            SweepSpec::GammaSweep { .. } => Direction::Unconstrained,
        }
    }
}

fn check_grid(grid: &[f64], range01: bool) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidParams("parameter grid is empty".into()));
    }
    for pair in grid.windows(2) {
        if pair[1] <= pair[0] {
            return Err(Error::InvalidParams(format!(
                "parameter grid must be strictly increasing, got {} then {}",
                pair[0], pair[1]
            )));
        }
    }
    if range01 && grid.iter().any(|&t| !(0.0..=1.0).contains(&t)) {
        return Err(Error::InvalidParams(
            "shift parameters must lie in [0, 1]".into(),
        ));
    }
    Ok(())
}

fn check_sorted_atoms(theta: &[f64], prob: &[f64]) -> Result<()> {
    if theta.len() != prob.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} positions vs {} probabilities",
            theta.len(),
            prob.len()
        )));
    }
    for pair in theta.windows(2) {
        if pair[1] <= pair[0] {
            return Err(Error::InvalidParams(
                "atom positions must be strictly increasing".into(),
            ));
        }
    }
    Ok(())
}

fn atoms(theta: &[f64], prob: &[f64]) -> Vec<(f64, f64)> {
    theta.iter().cloned().zip(prob.iter().cloned()).collect()
}

/// Evaluates the sweep: one optimal quota per grid point, in parallel with
/// index-ordered assembly.
pub fn run(spec: &SweepSpec) -> Result<SweepResult> {
    let rows = match spec {
        SweepSpec::FosdShift {
            theta,
            prob,
            target_prob,
            grid,
            gamma,
        } => {
            check_sorted_atoms(theta, prob)?;
            check_grid(grid, true)?;
            if target_prob.len() != prob.len() {
                return Err(Error::DimensionMismatch(format!(
                    "{} target probabilities vs {} atoms",
                    target_prob.len(),
                    prob.len()
                )));
            }
            if (*gamma - 0.5).abs() > 1e-12 {
                return Err(Error::InvalidParams(
                    "first-order shift sweeps support gamma = 0.5 only; the monotone \
                     direction is not established for other gamma values"
                        .into(),
                ));
            }
            // Dominance: target cumulative mass never exceeds the base.
            let mut cum_base = 0.0;
            let mut cum_target = 0.0;
            for (i, (&p, &t)) in prob.iter().zip(target_prob).enumerate() {
                cum_base += p;
                cum_target += t;
                if cum_target > cum_base + 1e-12 {
                    return Err(Error::InvalidParams(format!(
                        "target does not dominate the base prior at atom {i}"
                    )));
                }
            }
            let priors: Result<Vec<(f64, BinaryPrior)>> = grid
                .iter()
                .map(|&t| {
                    let mixed: Vec<f64> = prob
                        .iter()
                        .zip(target_prob)
                        .map(|(&p, &tp)| (1.0 - t) * p + t * tp)
                        .collect();
                    Ok((t, BinaryPrior::new(atoms(theta, &mixed))?))
                })
                .collect();
            solve_rows(priors?, *gamma)?
        }
        SweepSpec::MpsSpreadTheta1 {
            theta,
            prob,
            atom_index,
            spread_low,
            spread_high,
            grid,
            gamma,
        } => {
            validate_mps(theta, prob, *atom_index, *spread_low, *spread_high, true)?;
            check_grid(grid, true)?;
            let priors: Result<Vec<(f64, BinaryPrior)>> = grid
                .iter()
                .map(|&t| Ok((t, mps_prior(theta, prob, *atom_index, *spread_low, *spread_high, t)?)))
                .collect();
            solve_rows(priors?, *gamma)?
        }
        SweepSpec::MpsSpreadTheta0 {
            theta,
            prob,
            atom_index,
            spread_low,
            spread_high,
            grid,
            gamma,
        } => {
            validate_mps(theta, prob, *atom_index, *spread_low, *spread_high, false)?;
            check_grid(grid, true)?;
            let priors: Result<Vec<(f64, BinaryPrior)>> = grid
                .iter()
                .map(|&t| Ok((t, mps_prior(theta, prob, *atom_index, *spread_low, *spread_high, t)?)))
                .collect();
            solve_rows(priors?, *gamma)?
        }
        SweepSpec::GammaSweep { theta, prob, grid } => {
            check_sorted_atoms(theta, prob)?;
            check_grid(grid, false)?;
            let prior = BinaryPrior::new(atoms(theta, prob))?;
            thread_pool().install(|| {
                grid.par_iter()
                    .map(|&g| Ok((g, optimal_quota(&prior, g)?.0)))
                    .collect::<Result<Vec<_>>>()
            })?
        }
    };
    Ok(SweepResult {
        rows,
        direction: spec.direction(),
    })
}

fn solve_rows(priors: Vec<(f64, BinaryPrior)>, gamma: f64) -> Result<Vec<(f64, f64)>> {
    thread_pool().install(|| {
        priors
            .par_iter()
            .map(|(t, prior)| Ok((*t, optimal_quota(prior, gamma)?.0)))
            .collect()
    })
}

fn validate_mps(
    theta: &[f64],
    prob: &[f64],
    atom_index: usize,
    spread_low: f64,
    spread_high: f64,
    positive_region: bool,
) -> Result<()> {
    check_sorted_atoms(theta, prob)?;
    let center = *theta
        .get(atom_index)
        .ok_or_else(|| Error::InvalidParams(format!("atom index {atom_index} out of range")))?;
    if !(spread_low < center && center < spread_high) {
        return Err(Error::InvalidParams(format!(
            "spread [{spread_low}, {spread_high}] must bracket the atom at {center}"
        )));
    }
    if spread_low < -1.0 || spread_high > 1.0 {
        return Err(Error::InvalidParams(
            "spread endpoints must stay in [-1, 1]".into(),
        ));
    }
    if positive_region && spread_low <= 0.0 {
        return Err(Error::InvalidParams(
            "a spread in the positive region needs spread_low > 0".into(),
        ));
    }
    if !positive_region && spread_high >= 0.0 {
        return Err(Error::InvalidParams(
            "a spread in the negative region needs spread_high < 0".into(),
        ));
    }
    Ok(())
}

/// Splits atom `atom_index` into two atoms at parameter `t`: positions
/// interpolate from the center toward the spread endpoints while the split
/// weights keep the conditional mean fixed for every `t`.
fn mps_prior(
    theta: &[f64],
    prob: &[f64],
    atom_index: usize,
    spread_low: f64,
    spread_high: f64,
    t: f64,
) -> Result<BinaryPrior> {
    let center = theta[atom_index];
    let weight = prob[atom_index];
    let share_low = (spread_high - center) / (spread_high - spread_low);
    let share_high = (center - spread_low) / (spread_high - spread_low);
    let mut result = Vec::with_capacity(theta.len() + 1);
    for (i, (&pos, &w)) in theta.iter().zip(prob).enumerate() {
        if i == atom_index {
            result.push((center + t * (spread_low - center), weight * share_low));
            result.push((center + t * (spread_high - center), weight * share_high));
        } else {
            result.push((pos, w));
        }
    }
    BinaryPrior::new(result)
}

/// Verifies the direction contract at tolerance 1e-8; returns the first
/// offending adjacent pair on failure.
pub fn check_monotonicity(result: &SweepResult) -> std::result::Result<(), (usize, f64, f64)> {
    const TOL: f64 = 1e-8;
    for (i, pair) in result.rows.windows(2).enumerate() {
        let (a, b) = (pair[0].1, pair[1].1);
        let violated = match result.direction {
            Direction::NonDecreasing => b < a - TOL,
            Direction::NonIncreasing => b > a + TOL,
            Direction::Unconstrained => false,
        };
        if violated {
            return Err((i, a, b));
        }
    }
    Ok(())
}
