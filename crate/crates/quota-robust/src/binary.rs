//! Closed forms for the binary-action model.
//!
//! With two actions the model reduces to a prior over payoff differences
//! `theta` in `[-1, 1]` (action 1 pays `theta`, action 0 pays zero). Worst
//! cases are binary monotone partitions: the low signal collects the lowest
//! `p0` quantile of the prior. Everything here is built from the
//! piecewise-linear integrals of the quantile function, so the biased-error
//! maxima and the optimal quota come out exact up to floating-point
//! rounding rather than through grid search.
//!
//! Sign conventions for a partition with low-signal mass `p0` feasible for
//! quota `q = Pr(a = 1)`:
//!
//! - left-biased (`p0 <= 1 - q`, the quota undersupplies action 1):
//!   regret `(gamma - (1 - gamma) * q / (1 - p0)) * G(p0)`,
//! - right-biased (`p0 >= 1 - q`): regret
//!   `(2 gamma - 1) * G(p0) - (1 - gamma) * (p0 - 1 + q) / p0 * H(p0)`,
//!
//! where `G(z)` integrates the quantile function above `z` and
//! `H(z) = mean - G(z)` below. Both forms evaluate to
//! `(2 gamma - 1) * G(p0)` on the shared boundary `q = 1 - p0`; the
//! transport solver adjudicates them in the test suites.

use serde::Deserialize;

use crate::model::{FiniteModel, Posterior, SignalStructure};
use crate::transport::check_gamma;
use crate::{Error, Result};

/// Sorted prior over payoff differences in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryPrior {
    atoms: Vec<(f64, f64)>,
    cumulative: Vec<f64>,
}

impl BinaryPrior {
    /// Sorts, merges equal positions, drops zero weights, and validates.
    ///
    /// Requires mass on both sides of zero; a one-sided prior makes
    /// information worthless and the quota problem degenerate.
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self> {
        let mut kept: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for (i, &(theta, w)) in atoms.iter().enumerate() {
            if !theta.is_finite() || !w.is_finite() {
                return Err(Error::NonFiniteEntry(format!("atom {i}: ({theta}, {w})")));
            }
            if theta.abs() > 1.0 {
                return Err(Error::InvalidParams(format!(
                    "atom {i} position {theta} outside [-1, 1]"
                )));
            }
            if w < 0.0 {
                return Err(Error::NonSimplexPrior(format!("atom {i} weight {w} < 0")));
            }
            if w > 0.0 {
                kept.push((theta, w));
            }
        }
        kept.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(kept.len());
        for (theta, w) in kept {
            match merged.last_mut() {
                Some(last) if last.0 == theta => last.1 += w,
                _ => merged.push((theta, w)),
            }
        }
        let total: f64 = merged.iter().map(|&(_, w)| w).sum();
        if (total - 1.0).abs() > crate::model::SIMPLEX_TOL {
            return Err(Error::NonSimplexPrior(format!("weights sum to {total}")));
        }
        if !merged.iter().any(|&(t, _)| t < 0.0) || !merged.iter().any(|&(t, _)| t > 0.0) {
            return Err(Error::DegenerateBinaryPrior);
        }
        let mut cumulative = Vec::with_capacity(merged.len() + 1);
        let mut acc = 0.0;
        cumulative.push(0.0);
        for &(_, w) in &merged {
            acc += w;
            cumulative.push(acc);
        }
        *cumulative.last_mut().unwrap() = 1.0;
        Ok(Self {
            atoms: merged,
            cumulative,
        })
    }

    /// Parses `{"theta": [...], "prob": [...]}`.
    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Raw {
            theta: Vec<f64>,
            prob: Vec<f64>,
        }
        let raw: Raw = serde_json::from_str(text)
            .map_err(|e| Error::InvalidParams(format!("binary prior file: {e}")))?;
        if raw.theta.len() != raw.prob.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} positions vs {} probabilities",
                raw.theta.len(),
                raw.prob.len()
            )));
        }
        Self::new(raw.theta.into_iter().zip(raw.prob).collect())
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    /// Running sums `0 = c_0 < c_1 < ... < c_m = 1`.
    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn prior_mean(&self) -> f64 {
        self.atoms.iter().map(|&(t, w)| t * w).sum()
    }

    /// Mass strictly below zero.
    pub fn negative_mass(&self) -> f64 {
        self.atoms
            .iter()
            .filter(|&&(t, _)| t < 0.0)
            .map(|&(_, w)| w)
            .sum()
    }

    pub fn quantile(&self) -> QuantileIntegral {
        QuantileIntegral::new(self)
    }

    /// The prior as a finite model whose states are the atoms: action 1
    /// pays the atom position, action 0 pays zero.
    pub fn canonical_model(&self) -> FiniteModel {
        let states = self
            .atoms
            .iter()
            .enumerate()
            .map(|(i, &(t, _))| format!("theta{i}={t}"))
            .collect();
        let utility = self.atoms.iter().map(|&(t, _)| vec![0.0, t]).collect();
        let prior = self.atoms.iter().map(|&(_, w)| w).collect();
        FiniteModel::new(states, vec!["a0".into(), "a1".into()], utility, prior)
            .expect("canonical model of a valid binary prior")
    }
}

/// Piecewise-linear integrals of the quantile function.
///
/// `upper_integral(z)` integrates the quantile function over `[z, 1]` and
/// has slope `-theta_i` on the piece carrying atom `i`; breakpoint values
/// are exact suffix sums of `theta * weight`.
#[derive(Debug, Clone)]
pub struct QuantileIntegral {
    thetas: Vec<f64>,
    breakpoints: Vec<f64>,
    upper_at: Vec<f64>,
    prior_mean: f64,
}

impl QuantileIntegral {
    fn new(prior: &BinaryPrior) -> Self {
        let m = prior.atoms.len();
        let mut upper_at = vec![0.0; m + 1];
        for i in (0..m).rev() {
            upper_at[i] = upper_at[i + 1] + prior.atoms[i].0 * prior.atoms[i].1;
        }
        Self {
            thetas: prior.atoms.iter().map(|&(t, _)| t).collect(),
            breakpoints: prior.cumulative.clone(),
            upper_at: upper_at.clone(),
            prior_mean: upper_at[0],
        }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn prior_mean(&self) -> f64 {
        self.prior_mean
    }

    fn piece_of(&self, z: f64) -> usize {
        // Largest i with breakpoints[i] <= z, clamped to a valid piece.
        match self
            .breakpoints
            .binary_search_by(|c| c.partial_cmp(&z).unwrap())
        {
            Ok(i) => i.min(self.thetas.len() - 1),
            Err(i) => i.saturating_sub(1).min(self.thetas.len() - 1),
        }
    }

    /// `G(z)`: integral of the quantile function over `[z, 1]`.
    pub fn upper_integral(&self, z: f64) -> f64 {
        let i = self.piece_of(z);
        self.upper_at[i + 1] + self.thetas[i] * (self.breakpoints[i + 1] - z)
    }

    /// `H(z)`: integral of the quantile function over `[0, z]`.
    pub fn lower_integral(&self, z: f64) -> f64 {
        self.prior_mean - self.upper_integral(z)
    }
}

/// Which side of the quota the worst case errs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Side {
    Left,
    Right,
}

/// A maximized biased error: the value, the maximizing low-signal mass, and
/// whether the constrained domain was nonempty (infeasible sides report a
/// negative-infinity sentinel).
#[derive(Debug, Clone, Copy)]
pub struct BiasedError {
    pub value: f64,
    pub argmax_p0: f64,
    pub side: Side,
    pub feasible: bool,
}

impl BiasedError {
    fn infeasible(side: Side) -> Self {
        Self {
            value: f64::NEG_INFINITY,
            argmax_p0: f64::NAN,
            side,
            feasible: false,
        }
    }
}

/// Feasible low-signal masses: `(lower, upper)` bound the interval on which
/// the low-signal mean is nonpositive and the high-signal mean nonnegative.
///
/// The lower threshold is the smallest `z` with `G(z) >= 0`, the upper the
/// largest `z` with `H(z) <= 0`. A nonnegative prior mean forces the lower
/// threshold to 0 and a nonpositive mean forces the upper to 1, so the
/// uninformative partition stays in range whenever it matters.
pub fn thresholds(prior: &BinaryPrior) -> (f64, f64) {
    let qi = prior.quantile();
    let m = qi.thetas.len();
    let mean = qi.prior_mean;

    let lower = if mean >= 0.0 {
        0.0
    } else {
        // G rises from the negative mean while atoms are negative; find the
        // piece where it crosses zero.
        let mut z = 0.0;
        for i in 0..m {
            let at_end = qi.upper_at[i + 1];
            if qi.upper_at[i] < 0.0 && at_end >= 0.0 {
                z = qi.breakpoints[i + 1] + at_end / qi.thetas[i];
                break;
            }
        }
        z
    };

    let upper = if mean <= 0.0 {
        1.0
    } else {
        let mut z = 1.0;
        for i in (0..m).rev() {
            let h_start = mean - qi.upper_at[i];
            let h_end = mean - qi.upper_at[i + 1];
            if h_start <= 0.0 && h_end > 0.0 {
                z = qi.breakpoints[i] - h_start / qi.thetas[i];
                break;
            }
        }
        z
    };
    (lower.clamp(0.0, 1.0), upper.clamp(0.0, 1.0))
}

/// Left-biased regret of the partition at `p0` under quota `q`, evaluated
/// from the closed form. Only meaningful for `p0` within the threshold
/// interval and `p0 <= 1 - q`.
pub fn left_biased_regret(prior: &BinaryPrior, q: f64, gamma: f64, p0: f64) -> f64 {
    let qi = prior.quantile();
    left_value(&qi, q, gamma, p0)
}

/// Right-biased regret of the partition at `p0` under quota `q`.
pub fn right_biased_regret(prior: &BinaryPrior, q: f64, gamma: f64, p0: f64) -> f64 {
    let qi = prior.quantile();
    right_value(&qi, q, gamma, p0)
}

fn left_value(qi: &QuantileIntegral, q: f64, gamma: f64, p0: f64) -> f64 {
    let g = qi.upper_integral(p0);
    if q == 0.0 {
        gamma * g
    } else {
        (gamma - (1.0 - gamma) * q / (1.0 - p0)) * g
    }
}

fn right_value(qi: &QuantileIntegral, q: f64, gamma: f64, p0: f64) -> f64 {
    let g = qi.upper_integral(p0);
    let h = qi.lower_integral(p0);
    let excess = 1.0 - q;
    if excess == 0.0 {
        (2.0 * gamma - 1.0) * g - (1.0 - gamma) * h
    } else {
        (2.0 * gamma - 1.0) * g - (1.0 - gamma) * (p0 - excess) / p0 * h
    }
}

/// Golden-section ascent, the fallback when a piece's analytic critical
/// point degenerates numerically.
fn golden_section_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    while b - a > 1e-12 {
        let x1 = b - INV_PHI * (b - a);
        let x2 = a + INV_PHI * (b - a);
        if f(x1) >= f(x2) {
            b = x2;
        } else {
            a = x1;
        }
    }
    0.5 * (a + b)
}

/// Maximizes `value_at` over `[lo, hi]` piece by piece. `critical` returns
/// the interior stationary point of a piece, if any. `prefer_high` controls
/// tie-breaking between equal maxima.
fn piecewise_maximize(
    qi: &QuantileIntegral,
    lo: f64,
    hi: f64,
    prefer_high: bool,
    critical: impl Fn(usize) -> Option<f64>,
    value_at: impl Fn(f64) -> f64,
) -> (f64, f64) {
    let mut best_value = f64::NEG_INFINITY;
    let mut best_p0 = lo;
    let mut consider = |p0: f64| {
        let v = value_at(p0);
        if !v.is_finite() {
            return;
        }
        let improves = if prefer_high {
            v >= best_value
        } else {
            v > best_value
        };
        if improves {
            best_value = v;
            best_p0 = p0;
        }
    };
    for i in 0..qi.thetas.len() {
        let a = qi.breakpoints[i].max(lo);
        let b = qi.breakpoints[i + 1].min(hi);
        if a > b {
            continue;
        }
        consider(a);
        match critical(i) {
            Some(p) if p > a && p < b => consider(p),
            Some(_) | None => {}
        }
        // The analytic candidate can be lost to rounding when the piece is
        // nearly flat; a short golden-section pass recovers it.
        if b - a > 1e-9 {
            let v_a = value_at(a);
            let v_b = value_at(b);
            if !v_a.is_finite() || !v_b.is_finite() {
                let p = golden_section_max(&value_at, a, b);
                consider(p);
            }
        }
        consider(b);
    }
    (best_value, best_p0)
}

/// Worst-case left-biased error: maximizes the left closed form over
/// `p0 in [lower, min(upper, 1 - q)]`.
pub fn left_error(prior: &BinaryPrior, q: f64, gamma: f64) -> Result<BiasedError> {
    check_gamma(gamma)?;
    check_quota_scalar(q)?;
    let qi = prior.quantile();
    let (lower, upper) = thresholds(prior);
    let hi = upper.min(1.0 - q);
    if lower > hi {
        return Ok(BiasedError::infeasible(Side::Left));
    }
    // On a piece, writing t = 1 - p0 and G = K + theta * t, the objective is
    // gamma*K + gamma*theta*t - (1-gamma)*q*(K/t + theta); its stationary
    // point satisfies t^2 = -(1-gamma)*q*K / (gamma*theta).
    let critical = |i: usize| -> Option<f64> {
        let theta = qi.thetas[i];
        if theta == 0.0 || gamma == 0.0 || q == 0.0 {
            return None;
        }
        let k = qi.upper_at[i + 1] + theta * (qi.breakpoints[i + 1] - 1.0);
        let rad = -(1.0 - gamma) * q * k / (gamma * theta);
        if rad > 0.0 {
            Some(1.0 - rad.sqrt())
        } else {
            None
        }
    };
    let (value, argmax) =
        piecewise_maximize(&qi, lower, hi, false, critical, |p0| left_value(&qi, q, gamma, p0));
    Ok(BiasedError {
        value,
        argmax_p0: argmax,
        side: Side::Left,
        feasible: true,
    })
}

/// Worst-case right-biased error: maximizes the right closed form over
/// `p0 in [max(lower, 1 - q), upper]`. Ties prefer the largest maximizer,
/// which keeps every strictly positive atom in the high cell.
pub fn right_error(prior: &BinaryPrior, q: f64, gamma: f64) -> Result<BiasedError> {
    check_gamma(gamma)?;
    check_quota_scalar(q)?;
    let qi = prior.quantile();
    let (lower, upper) = thresholds(prior);
    let lo = lower.max(1.0 - q);
    if lo > upper {
        return Ok(BiasedError::infeasible(Side::Right));
    }
    // On a piece, with H = C + theta * p0, the objective is
    // const - gamma*theta*p0 + (1-gamma)*(1-q)*C/p0; stationary at
    // p0^2 = -(1-gamma)*(1-q)*C / (gamma*theta).
    let excess = 1.0 - q;
    let critical = |i: usize| -> Option<f64> {
        let theta = qi.thetas[i];
        if theta == 0.0 || gamma == 0.0 || excess == 0.0 {
            return None;
        }
        let h_start = qi.prior_mean - qi.upper_at[i];
        let c = h_start - theta * qi.breakpoints[i];
        let rad = -(1.0 - gamma) * excess * c / (gamma * theta);
        if rad > 0.0 {
            Some(rad.sqrt())
        } else {
            None
        }
    };
    let (value, argmax) =
        piecewise_maximize(&qi, lo, upper, true, critical, |p0| right_value(&qi, q, gamma, p0));
    Ok(BiasedError {
        value,
        argmax_p0: argmax,
        side: Side::Right,
        feasible: true,
    })
}

fn check_quota_scalar(q: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidParams(format!(
            "quota probability {q} outside [0, 1]"
        )));
    }
    Ok(())
}

/// The min-max-regret quota `Pr(a = 1)` and its worst-case regret.
///
/// For `gamma = 0` the problem is max-min and the answer is the degenerate
/// quota on the prior-optimal action (ties to action 0). For
/// `gamma in (0, 1)` the difference `L(q) - R(q)` is weakly decreasing, so
/// the equalizing quota is found by bisection; with a tied prior mean the
/// optimum may be an interval and the midpoint of the zero band is
/// returned.
pub fn optimal_quota(prior: &BinaryPrior, gamma: f64) -> Result<(f64, f64)> {
    check_gamma(gamma)?;
    let mean = prior.prior_mean();
    if gamma == 0.0 {
        let q = if mean > 0.0 { 1.0 } else { 0.0 };
        return Ok((q, -mean.max(0.0)));
    }

    let diff = |q: f64| -> f64 {
        let l = left_error(prior, q, gamma).expect("validated inputs");
        let r = right_error(prior, q, gamma).expect("validated inputs");
        match (l.feasible, r.feasible) {
            (true, true) => l.value - r.value,
            (true, false) => f64::INFINITY,
            (false, true) => f64::NEG_INFINITY,
            (false, false) => unreachable!("threshold intervals always overlap one side"),
        }
    };

    const ZERO_BAND: f64 = 1e-12;
    const WIDTH: f64 = 1e-10;

    // Edge of {q : diff(q) > band} from the left.
    let low_edge = if diff(0.0) <= ZERO_BAND {
        0.0
    } else {
        let (mut a, mut b) = (0.0, 1.0);
        while b - a > WIDTH {
            let mid = 0.5 * (a + b);
            if diff(mid) > ZERO_BAND {
                a = mid;
            } else {
                b = mid;
            }
        }
        0.5 * (a + b)
    };
    // Edge of {q : diff(q) < -band} from the right.
    let high_edge = if diff(1.0) >= -ZERO_BAND {
        1.0
    } else {
        let (mut a, mut b) = (0.0, 1.0);
        while b - a > WIDTH {
            let mid = 0.5 * (a + b);
            if diff(mid) < -ZERO_BAND {
                b = mid;
            } else {
                a = mid;
            }
        }
        0.5 * (a + b)
    };

    let q_star = 0.5 * (low_edge + high_edge);
    let l = left_error(prior, q_star, gamma)?;
    let r = right_error(prior, q_star, gamma)?;
    Ok((q_star, l.value.max(r.value)))
}

/// The binary monotone partition with low-signal mass `p0`: the low signal
/// collects the lowest quantiles, splitting the boundary atom
/// proportionally. Returns a structure over the atoms of the prior (the
/// states of [`BinaryPrior::canonical_model`]).
pub fn monotone_partition(prior: &BinaryPrior, p0: f64) -> Result<SignalStructure> {
    if !(0.0..=1.0).contains(&p0) {
        return Err(Error::InvalidParams(format!(
            "low-signal mass {p0} outside [0, 1]"
        )));
    }
    let weights: Vec<f64> = prior.atoms.iter().map(|&(_, w)| w).collect();
    if p0 <= 0.0 || p0 >= 1.0 {
        return Ok(SignalStructure {
            posteriors: vec![Posterior { belief: weights }],
            weights: vec![1.0],
        });
    }
    let m = weights.len();
    let mut low = vec![0.0; m];
    let mut high = vec![0.0; m];
    let mut remaining = p0;
    for (i, &w) in weights.iter().enumerate() {
        let taken = remaining.min(w);
        low[i] = taken / p0;
        high[i] = (w - taken) / (1.0 - p0);
        remaining -= taken;
    }
    Ok(SignalStructure {
        posteriors: vec![Posterior { belief: low }, Posterior { belief: high }],
        weights: vec![p0, 1.0 - p0],
    })
}

/// The regret-maximizing binary monotone partition for quota `q`: evaluates
/// both biased errors and returns the partition at the better argmax, its
/// side, and its regret.
pub fn worst_partition(
    prior: &BinaryPrior,
    q: f64,
    gamma: f64,
) -> Result<(SignalStructure, Side, f64)> {
    let l = left_error(prior, q, gamma)?;
    let r = right_error(prior, q, gamma)?;
    let pick = if l.value >= r.value { l } else { r };
    let structure = monotone_partition(prior, pick.argmax_p0)?;
    Ok((structure, pick.side, pick.value))
}
