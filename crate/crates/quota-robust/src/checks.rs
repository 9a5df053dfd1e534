//! Verification suite: re-derives the structural guarantees numerically on
//! a concrete model and reports a margin per check. Anything negative is a
//! failure; the CLI exits nonzero rather than emitting suspect data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::adversary::{quota_optimality_report, GridParams, StructureGrid};
use crate::binary;
use crate::model::{FiniteModel, Posterior, Quota, SignalStructure};
use crate::transport;
use crate::Result;

/// One verified property with its worst margin (nonnegative means pass).
/// Vacuous checks (for example equalization when one side is infeasible)
/// report no margin.
#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub pass: bool,
    pub margin: Option<f64>,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: &str, margin: f64, detail: String) -> Self {
        Self {
            name: name.into(),
            pass: margin >= 0.0,
            margin: Some(margin),
            detail,
        }
    }

    fn vacuous(name: &str, detail: &str) -> Self {
        Self {
            name: name.into(),
            pass: true,
            margin: None,
            detail: detail.into(),
        }
    }
}

/// Full verification report for a binary-action model.
#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub gamma: f64,
    pub seed: u64,
    pub trials: u32,
    pub lipschitz_width: f64,
    pub q_star: f64,
    pub optimal_regret_normalized: f64,
    pub checks: Vec<CheckOutcome>,
    pub all_pass: bool,
}

fn random_quota(rng: &mut ChaCha8Rng, k: usize) -> Quota {
    let draws: Vec<f64> = (0..k).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let total: f64 = draws.iter().sum();
    Quota {
        probs: draws.iter().map(|&e| e / total).collect(),
    }
}

/// Splits posterior `j` of `pi` into two beliefs with the same barycenter,
/// yielding a structure that dominates `pi` in informativeness. Returns
/// `None` when the posterior cannot move in both directions (point masses).
pub fn split_posterior(
    pi: &SignalStructure,
    j: usize,
    rng: &mut ChaCha8Rng,
) -> Option<SignalStructure> {
    let mu = &pi.posteriors[j].belief;
    let m = mu.len();
    for _ in 0..16 {
        let raw: Vec<f64> = (0..m).map(|_| rng.gen::<f64>() - 0.5).collect();
        let mean = raw.iter().sum::<f64>() / m as f64;
        let dir: Vec<f64> = raw.iter().map(|g| g - mean).collect();
        let step = |d: &[f64]| -> f64 {
            let mut s = f64::INFINITY;
            for (x, &di) in mu.iter().zip(d) {
                if di < 0.0 {
                    s = s.min(x / -di);
                }
            }
            s
        };
        let neg: Vec<f64> = dir.iter().map(|d| -d).collect();
        let fwd = step(&dir);
        let bwd = step(&neg);
        if !fwd.is_finite() || !bwd.is_finite() || fwd <= 1e-12 || bwd <= 1e-12 {
            continue;
        }
        let t1 = 0.8 * fwd * rng.gen::<f64>();
        let t2 = 0.8 * bwd * rng.gen::<f64>();
        if t1 <= 0.0 || t2 <= 0.0 {
            continue;
        }
        // lambda * t1 = (1 - lambda) * t2 keeps the barycenter fixed.
        let lambda = t2 / (t1 + t2);
        let split_a: Vec<f64> = mu.iter().zip(&dir).map(|(x, d)| (x + t1 * d).max(0.0)).collect();
        let split_b: Vec<f64> = mu.iter().zip(&dir).map(|(x, d)| (x - t2 * d).max(0.0)).collect();
        let mut posteriors = pi.posteriors.clone();
        let mut weights = pi.weights.clone();
        let w = weights[j];
        posteriors[j] = Posterior { belief: split_a };
        weights[j] = lambda * w;
        posteriors.push(Posterior { belief: split_b });
        weights.push((1.0 - lambda) * w);
        return Some(SignalStructure {
            posteriors,
            weights,
        });
    }
    None
}

/// Runs every check on a binary-action model. `lipschitz_width` overrides
/// the utility range width used in the continuity bound, which is how the
/// negative control (a widened range with an unscaled tolerance) is
/// expressed.
pub fn run(
    model: &FiniteModel,
    gamma: f64,
    seed: u64,
    trials: u32,
    lipschitz_width: Option<f64>,
) -> Result<VerifyReport> {
    transport::check_gamma(gamma)?;
    let reduction = model.to_binary()?;
    let prior = &reduction.prior;
    let width = lipschitz_width.unwrap_or_else(|| model.utility_range_width());
    let (q_star, optimal_regret) = binary::optimal_quota(prior, gamma)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();

    // Closed forms against the transport solver, in model units.
    {
        let (lo, hi) = binary::thresholds(prior);
        let scale_tol = 1e-9 * reduction.scale.max(1.0);
        let mut worst = f64::INFINITY;
        let mut detail = String::new();
        for _ in 0..200 {
            let p0 = lo + (hi - lo) * rng.gen::<f64>();
            let q = rng.gen::<f64>();
            let closed = if p0 <= 1.0 - q {
                binary::left_biased_regret(prior, q, gamma, p0)
            } else {
                binary::right_biased_regret(prior, q, gamma, p0)
            };
            let mapped = reduction.model_regret(closed, gamma);
            let partition = crate::adversary::model_partition(model, p0)?;
            let lp = transport::regret(model, &partition, &Quota::binary(q), gamma)?.regret;
            let margin = scale_tol - (mapped - lp).abs();
            if margin < worst {
                worst = margin;
                detail = format!("q={q:.6} p0={p0:.6} closed={mapped:.12} lp={lp:.12}");
            }
        }
        checks.push(CheckOutcome::new("closed_form_vs_transport", worst, detail));
    }

    let grid = StructureGrid::generate(
        model,
        GridParams {
            signals: 3,
            resolution: 16,
            random_count: 24,
            seed: seed ^ 0x9e37_79b9_7f4a_7c15,
        },
    )?;

    // Lipschitz continuity of the regret in the structure.
    {
        let mut worst = f64::INFINITY;
        let mut detail = String::new();
        for _ in 0..100 {
            let a = rng.gen_range(0..grid.len());
            let b = rng.gen_range(0..grid.len());
            let quota = random_quota(&mut rng, model.num_actions());
            let ra = transport::regret(model, &grid.structures[a], &quota, gamma)?.regret;
            let rb = transport::regret(model, &grid.structures[b], &quota, gamma)?.regret;
            let dist = transport::wasserstein(&grid.structures[a], &grid.structures[b])?;
            let margin = width * dist + 1e-9 - (ra - rb).abs();
            if margin < worst {
                worst = margin;
                detail = format!(
                    "structures ({a}, {b}): |dR|={:.3e} bound={:.3e}",
                    (ra - rb).abs(),
                    width * dist
                );
            }
        }
        checks.push(CheckOutcome::new("lipschitz_in_structure", worst, detail));
    }

    // Concavity of the constrained value in the quota.
    {
        let mut worst = f64::INFINITY;
        let mut detail = String::new();
        for _ in 0..100 {
            let pi = &grid.structures[rng.gen_range(0..grid.len())];
            let q1 = random_quota(&mut rng, model.num_actions());
            let q2 = random_quota(&mut rng, model.num_actions());
            let mid = Quota {
                probs: q1
                    .probs
                    .iter()
                    .zip(&q2.probs)
                    .map(|(a, b)| 0.5 * (a + b))
                    .collect(),
            };
            let u1 = transport::constrained_value(model, pi, &q1)?.0;
            let u2 = transport::constrained_value(model, pi, &q2)?.0;
            let um = transport::constrained_value(model, pi, &mid)?.0;
            let margin = um - 0.5 * (u1 + u2) + 1e-9;
            if margin < worst {
                worst = margin;
                detail = format!("mid {um:.12} vs mean {:.12}", 0.5 * (u1 + u2));
            }
        }
        checks.push(CheckOutcome::new("concavity_in_quota", worst, detail));
    }

    // Blackwell monotonicity under barycenter-preserving splits.
    {
        let mut worst = f64::INFINITY;
        let mut detail = String::from("no splittable posterior found");
        let mut probes = 0;
        let mut guard = 0;
        while probes < 50 && guard < 500 {
            guard += 1;
            let idx = rng.gen_range(0..grid.len());
            let pi = &grid.structures[idx];
            let j = rng.gen_range(0..pi.num_signals());
            let Some(finer) = split_posterior(pi, j, &mut rng) else {
                continue;
            };
            let quota = random_quota(&mut rng, model.num_actions());
            let coarse = transport::constrained_value(model, pi, &quota)?.0;
            let fine = transport::constrained_value(model, &finer, &quota)?.0;
            let margin = fine - coarse + 1e-9;
            if margin < worst {
                worst = margin;
                detail = format!("structure {idx}: split {fine:.12} vs base {coarse:.12}");
            }
            probes += 1;
        }
        checks.push(CheckOutcome::new("blackwell_monotonicity", worst, detail));
    }

    // Worst cases are monotone partitions: random two-signal structures
    // never beat the closed-form partition maximum.
    {
        let scale_tol = 1e-6 * reduction.scale.max(1.0);
        let two_signal = StructureGrid::generate(
            model,
            GridParams {
                signals: 2,
                resolution: 1,
                random_count: 50,
                seed: seed ^ 0x5851_f42d_4c95_7f2d,
            },
        )?;
        let mut worst = f64::INFINITY;
        let mut detail = String::new();
        for _ in 0..20 {
            let q = rng.gen::<f64>();
            let left = binary::left_error(prior, q, gamma)?.value;
            let right = binary::right_error(prior, q, gamma)?.value;
            let bound = reduction.model_regret(left.max(right), gamma);
            for pi in &two_signal.structures {
                let r = transport::regret(model, pi, &Quota::binary(q), gamma)?.regret;
                let margin = bound + scale_tol - r;
                if margin < worst {
                    worst = margin;
                    detail = format!("q={q:.6}: structure regret {r:.12} vs bound {bound:.12}");
                }
            }
        }
        checks.push(CheckOutcome::new("partition_dominance", worst, detail));
    }

    // Left error weakly decreasing, right error weakly increasing.
    if prior.prior_mean().abs() > 0.0 {
        let mut worst = f64::INFINITY;
        let mut detail = String::new();
        let mut previous: Option<(f64, f64)> = None;
        for i in 0..=20 {
            let q = i as f64 / 20.0;
            let l = binary::left_error(prior, q, gamma)?.value;
            let r = binary::right_error(prior, q, gamma)?.value;
            if let Some((pl, pr)) = previous {
                let margin_l = if pl.is_finite() || l.is_finite() {
                    pl - l + 1e-12
                } else {
                    f64::INFINITY
                };
                let margin_r = if pr.is_finite() || r.is_finite() {
                    r - pr + 1e-12
                } else {
                    f64::INFINITY
                };
                let margin = margin_l.min(margin_r);
                if margin < worst {
                    worst = margin;
                    detail = format!("between q={} and q={q}", q - 0.05);
                }
            }
            previous = Some((l, r));
        }
        checks.push(CheckOutcome::new("monotone_biased_errors", worst, detail));
    } else {
        checks.push(CheckOutcome::vacuous(
            "monotone_biased_errors",
            "prior mean is zero; strict monotonicity not asserted",
        ));
    }

    // Equalization at the optimum.
    {
        let l = binary::left_error(prior, q_star, gamma)?;
        let r = binary::right_error(prior, q_star, gamma)?;
        if gamma > 0.0 && l.feasible && r.feasible {
            let margin = 1e-8 - (l.value - r.value).abs();
            checks.push(CheckOutcome::new(
                "equalization_at_optimum",
                margin,
                format!("L={:.12} R={:.12}", l.value, r.value),
            ));
        } else {
            checks.push(CheckOutcome::vacuous(
                "equalization_at_optimum",
                "one side infeasible or max-min objective",
            ));
        }
    }

    // Interior optimum for gamma in (0, 1).
    if gamma > 0.0 {
        let margin = (q_star - 1e-6).min(1.0 - 1e-6 - q_star);
        checks.push(CheckOutcome::new(
            "interior_optimum",
            margin,
            format!("q* = {q_star:.10}"),
        ));
    } else {
        checks.push(CheckOutcome::vacuous(
            "interior_optimum",
            "max-min objective selects a degenerate quota",
        ));
    }

    // Adversarial certificate and local optimality.
    {
        let certificate_grid = StructureGrid::generate(
            model,
            GridParams {
                signals: 2,
                resolution: 100,
                random_count: 20,
                seed,
            },
        )?;
        let report = quota_optimality_report(model, gamma, &certificate_grid, trials, seed)?;
        match report.min_trial_margin {
            Some(min_margin) => {
                let adversarial = min_margin + crate::adversary::WORST_CASE_BAND;
                checks.push(CheckOutcome::new(
                    "adversarial_trials",
                    adversarial,
                    format!("{} trials, min realized margin {min_margin:.3e}", trials),
                ));
                let local = report
                    .trials
                    .iter()
                    .map(|t| t.local_bound - (report.optimal_regret - 1e-8))
                    .fold(f64::INFINITY, f64::min);
                checks.push(CheckOutcome::new(
                    "local_optimality",
                    local,
                    "worst-case set maxima dominate the optimum".into(),
                ));
            }
            None => {
                checks.push(CheckOutcome::vacuous("adversarial_trials", "no trials"));
                checks.push(CheckOutcome::vacuous("local_optimality", "no trials"));
            }
        }
        if gamma == 0.5 {
            let margin = report.myopic_regret - report.optimal_regret;
            checks.push(CheckOutcome::new(
                "myopic_rule_dominated",
                margin,
                format!(
                    "myopic worst case {:.6} vs quota worst case {:.6}",
                    report.myopic_regret, report.optimal_regret
                ),
            ));
        } else {
            checks.push(CheckOutcome::vacuous(
                "myopic_rule_dominated",
                "baseline comparison stated for gamma = 1/2",
            ));
        }
    }

    let all_pass = checks.iter().all(|c| c.pass);
    Ok(VerifyReport {
        gamma,
        seed,
        trials,
        lipschitz_width: width,
        q_star,
        optimal_regret_normalized: optimal_regret,
        checks,
        all_pass,
    })
}
