//! Core domain types: finite models, posteriors, signal structures, quotas,
//! and JSON ingestion.

use serde::{Deserialize, Serialize};

use crate::binary::BinaryPrior;
use crate::{Error, Result};

/// Probability vectors must sum to one within this tolerance.
pub const SIMPLEX_TOL: f64 = 1e-12;
/// Barycenters of signal structures must match the prior within this
/// tolerance.
pub const BAYES_TOL: f64 = 1e-10;

fn check_simplex(v: &[f64], what: &str) -> Result<()> {
    if v.is_empty() {
        return Err(Error::DimensionMismatch(format!("{what} is empty")));
    }
    for (i, &x) in v.iter().enumerate() {
        if !x.is_finite() {
            return Err(Error::NonFiniteEntry(format!("{what}[{i}] = {x}")));
        }
        if x < 0.0 {
            return Err(Error::NonSimplexPrior(format!("{what}[{i}] = {x} < 0")));
        }
    }
    let sum: f64 = v.iter().sum();
    if (sum - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::NonSimplexPrior(format!("{what} sums to {sum}")));
    }
    Ok(())
}

/// A finite sender-receiver environment: states, actions, the receiver's
/// utility matrix, and the common prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteModel {
    /// State labels, one per row of `utility`.
    pub states: Vec<String>,
    /// Action labels, one per column of `utility`.
    pub actions: Vec<String>,
    /// Receiver payoff, row-major by state.
    pub utility: Vec<Vec<f64>>,
    /// Common prior over states.
    pub prior: Vec<f64>,
}

impl FiniteModel {
    /// Validates and constructs a model.
    pub fn new(
        states: Vec<String>,
        actions: Vec<String>,
        utility: Vec<Vec<f64>>,
        prior: Vec<f64>,
    ) -> Result<Self> {
        if states.len() < 2 {
            return Err(Error::DimensionMismatch(format!(
                "need at least 2 states, got {}",
                states.len()
            )));
        }
        if actions.len() < 2 {
            return Err(Error::DimensionMismatch(format!(
                "need at least 2 actions, got {}",
                actions.len()
            )));
        }
        if utility.len() != states.len() {
            return Err(Error::DimensionMismatch(format!(
                "utility has {} rows, expected {}",
                utility.len(),
                states.len()
            )));
        }
        for (s, row) in utility.iter().enumerate() {
            if row.len() != actions.len() {
                return Err(Error::DimensionMismatch(format!(
                    "utility row {s} has {} entries, expected {}",
                    row.len(),
                    actions.len()
                )));
            }
            for (a, &u) in row.iter().enumerate() {
                if !u.is_finite() {
                    return Err(Error::NonFiniteEntry(format!("utility[{s}][{a}] = {u}")));
                }
            }
        }
        if prior.len() != states.len() {
            return Err(Error::DimensionMismatch(format!(
                "prior has {} entries, expected {}",
                prior.len(),
                states.len()
            )));
        }
        check_simplex(&prior, "prior")?;
        Ok(Self {
            states,
            actions,
            utility,
            prior,
        })
    }

    /// Parses and validates a model from its JSON file representation.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawModel = serde_json::from_str(text)
            .map_err(|e| Error::InvalidParams(format!("model file: {e}")))?;
        Self::new(raw.states, raw.actions, raw.utility, raw.prior)
    }

    /// Convenience constructor with numbered labels.
    pub fn from_parts(utility: Vec<Vec<f64>>, prior: Vec<f64>) -> Result<Self> {
        let states = (0..prior.len()).map(|i| format!("s{i}")).collect();
        let actions = (0..utility.first().map_or(0, Vec::len))
            .map(|a| format!("a{a}"))
            .collect();
        Self::new(states, actions, utility, prior)
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }

    /// Width of the utility range, `max - min`. All Lipschitz-type
    /// tolerances scale with this width.
    pub fn utility_range_width(&self) -> f64 {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for row in &self.utility {
            for &u in row {
                lo = lo.min(u);
                hi = hi.max(u);
            }
        }
        hi - lo
    }

    /// Expected receiver payoff of `action` at belief `mu`.
    pub fn payoff(&self, mu: &Posterior, action: usize) -> f64 {
        mu.belief
            .iter()
            .zip(&self.utility)
            .map(|(&p, row)| p * row[action])
            .sum()
    }

    /// The myopically optimal action at belief `mu`; ties break to the
    /// lowest action index.
    pub fn myopic_action(&self, mu: &Posterior) -> usize {
        let mut best = 0;
        let mut best_value = self.payoff(mu, 0);
        for a in 1..self.num_actions() {
            let value = self.payoff(mu, a);
            if value > best_value {
                best = a;
                best_value = value;
            }
        }
        best
    }

    /// Expected payoff when the state is observed before acting:
    /// `sum_theta prior(theta) * max_a u(theta, a)`.
    pub fn full_information_value(&self) -> f64 {
        self.prior
            .iter()
            .zip(&self.utility)
            .map(|(&p, row)| p * row.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
            .sum()
    }

    /// The prior as a posterior belief.
    pub fn prior_belief(&self) -> Posterior {
        Posterior {
            belief: self.prior.clone(),
        }
    }

    /// Reduces a two-action model to a sorted prior over payoff differences
    /// scaled into `[-1, 1]`.
    ///
    /// State `theta` maps to `(u(theta, 1) - u(theta, 0)) / scale`; equal
    /// differences merge and zero-prior states drop. The optimal quota is
    /// invariant under the reduction, and regrets map back through
    /// [`BinaryReduction::model_regret`].
    pub fn to_binary(&self) -> Result<BinaryReduction> {
        if self.num_actions() != 2 {
            return Err(Error::NotBinaryAction);
        }
        let mut diffs: Vec<(f64, f64)> = Vec::new();
        for (s, row) in self.utility.iter().enumerate() {
            let w = self.prior[s];
            if w > 0.0 {
                diffs.push((row[1] - row[0], w));
            }
        }
        let scale = diffs.iter().map(|&(d, _)| d.abs()).fold(0.0, f64::max);
        if scale == 0.0 {
            return Err(Error::DegenerateBinaryPrior);
        }
        diffs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut atoms: Vec<(f64, f64)> = Vec::new();
        for (d, w) in diffs {
            let theta = d / scale;
            match atoms.last_mut() {
                Some(last) if last.0 == theta => last.1 += w,
                _ => atoms.push((theta, w)),
            }
        }
        let offset: f64 = self
            .prior
            .iter()
            .zip(&self.utility)
            .map(|(&p, row)| p * row[0])
            .sum();
        Ok(BinaryReduction {
            prior: BinaryPrior::new(atoms)?,
            scale,
            offset,
        })
    }
}

#[derive(Deserialize)]
struct RawModel {
    states: Vec<String>,
    actions: Vec<String>,
    utility: Vec<Vec<f64>>,
    prior: Vec<f64>,
}

/// A two-action model rewritten as a prior over scaled payoff differences.
#[derive(Debug, Clone)]
pub struct BinaryReduction {
    pub prior: BinaryPrior,
    /// Positive factor dividing the payoff differences.
    pub scale: f64,
    /// Expected payoff of action 0 under the prior.
    pub offset: f64,
}

impl BinaryReduction {
    /// Maps a regret computed on the normalized prior back into the units of
    /// the original model.
    pub fn model_regret(&self, normalized_regret: f64, gamma: f64) -> f64 {
        self.scale * normalized_regret + (2.0 * gamma - 1.0) * self.offset
    }
}

/// A belief over states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Posterior {
    pub belief: Vec<f64>,
}

impl Posterior {
    pub fn new(belief: Vec<f64>) -> Result<Self> {
        check_simplex(&belief, "posterior")?;
        Ok(Self { belief })
    }

    /// Point mass on one state.
    pub fn degenerate(state: usize, num_states: usize) -> Self {
        let mut belief = vec![0.0; num_states];
        belief[state] = 1.0;
        Self { belief }
    }

    pub fn len(&self) -> usize {
        self.belief.len()
    }

    pub fn is_empty(&self) -> bool {
        self.belief.is_empty()
    }

    /// L1 distance between beliefs, the ground cost of the Wasserstein
    /// metric.
    pub fn l1_distance(&self, other: &Posterior) -> f64 {
        self.belief
            .iter()
            .zip(&other.belief)
            .map(|(a, b)| (a - b).abs())
            .sum()
    }
}

/// A finite distribution over posterior beliefs whose barycenter is the
/// prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalStructure {
    pub posteriors: Vec<Posterior>,
    pub weights: Vec<f64>,
}

impl SignalStructure {
    /// Validates weights and Bayes plausibility against `prior`.
    pub fn new(posteriors: Vec<Posterior>, weights: Vec<f64>, prior: &[f64]) -> Result<Self> {
        if posteriors.is_empty() || posteriors.len() != weights.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} posteriors vs {} weights",
                posteriors.len(),
                weights.len()
            )));
        }
        check_simplex(&weights, "weights")?;
        for (j, w) in weights.iter().enumerate() {
            if *w <= 0.0 {
                return Err(Error::InvalidParams(format!("weight[{j}] = {w} must be > 0")));
            }
        }
        for (j, mu) in posteriors.iter().enumerate() {
            check_simplex(&mu.belief, &format!("posterior {j}"))?;
            if mu.len() != prior.len() {
                return Err(Error::DimensionMismatch(format!(
                    "posterior {j} has length {}, expected {}",
                    mu.len(),
                    prior.len()
                )));
            }
        }
        let structure = Self {
            posteriors,
            weights,
        };
        let bary = structure.barycenter();
        for (s, (&b, &p)) in bary.iter().zip(prior).enumerate() {
            if (b - p).abs() > BAYES_TOL {
                return Err(Error::NonSimplexPrior(format!(
                    "Bayes plausibility fails at state {s}: barycenter {b} vs prior {p}"
                )));
            }
        }
        Ok(structure)
    }

    /// Parses a signal-structure file `{"posteriors": [[..]], "weights": [..]}`
    /// and validates it against `prior`.
    pub fn from_json(text: &str, prior: &[f64]) -> Result<Self> {
        #[derive(Deserialize)]
        struct Raw {
            posteriors: Vec<Vec<f64>>,
            weights: Vec<f64>,
        }
        let raw: Raw = serde_json::from_str(text)
            .map_err(|e| Error::InvalidParams(format!("signal-structure file: {e}")))?;
        let posteriors = raw
            .posteriors
            .into_iter()
            .map(|belief| Posterior { belief })
            .collect();
        Self::new(posteriors, raw.weights, prior)
    }

    pub fn num_signals(&self) -> usize {
        self.weights.len()
    }

    /// Weighted average of the posteriors.
    pub fn barycenter(&self) -> Vec<f64> {
        let m = self.posteriors[0].len();
        let mut bary = vec![0.0; m];
        for (mu, &w) in self.posteriors.iter().zip(&self.weights) {
            for (b, &x) in bary.iter_mut().zip(&mu.belief) {
                *b += w * x;
            }
        }
        bary
    }

    /// True when both structures have the same posterior sequence and
    /// weights within `tol` (order-sensitive).
    pub fn approx_eq(&self, other: &SignalStructure, tol: f64) -> bool {
        self.num_signals() == other.num_signals()
            && self
                .weights
                .iter()
                .zip(&other.weights)
                .all(|(a, b)| (a - b).abs() <= tol)
            && self
                .posteriors
                .iter()
                .zip(&other.posteriors)
                .all(|(a, b)| a.l1_distance(b) <= tol)
    }
}

/// The uninformative structure: a single posterior equal to the prior.
pub fn no_information(model: &FiniteModel) -> SignalStructure {
    SignalStructure {
        posteriors: vec![model.prior_belief()],
        weights: vec![1.0],
    }
}

/// Degenerate posteriors on each state with prior weights; zero-prior
/// states are omitted.
pub fn full_revelation(model: &FiniteModel) -> SignalStructure {
    let m = model.num_states();
    let mut posteriors = Vec::new();
    let mut weights = Vec::new();
    for (s, &p) in model.prior.iter().enumerate() {
        if p > 0.0 {
            posteriors.push(Posterior::degenerate(s, m));
            weights.push(p);
        }
    }
    SignalStructure {
        posteriors,
        weights,
    }
}

/// A distribution over actions constraining the action marginal of a
/// decision rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Quota {
    pub probs: Vec<f64>,
}

impl Quota {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        check_simplex(&probs, "quota")?;
        Ok(Self { probs })
    }

    /// Two-action quota from the probability of action 1.
    pub fn binary(p_action1: f64) -> Self {
        Self {
            probs: vec![1.0 - p_action1, p_action1],
        }
    }

    /// Point mass on one action.
    pub fn degenerate(action: usize, num_actions: usize) -> Self {
        let mut probs = vec![0.0; num_actions];
        probs[action] = 1.0;
        Self { probs }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// State-independent sender payoff per action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SenderUtility {
    pub values: Vec<f64>,
}

impl SenderUtility {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        for (a, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFiniteEntry(format!("sender utility[{a}] = {v}")));
            }
        }
        Ok(Self { values })
    }

    /// Expected sender payoff under an action marginal.
    pub fn expected(&self, marginal: &Quota) -> f64 {
        self.values
            .iter()
            .zip(&marginal.probs)
            .map(|(v, q)| v * q)
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state_model() -> FiniteModel {
        FiniteModel::from_parts(vec![vec![0.0, -1.0], vec![0.0, 1.0]], vec![0.5, 0.5]).unwrap()
    }

    #[test]
    fn validates_well_formed_model() {
        let m = two_state_model();
        assert_eq!(m.num_states(), 2);
        assert_eq!(m.num_actions(), 2);
        assert_eq!(m.utility_range_width(), 2.0);
    }

    #[test]
    fn rejects_non_simplex_prior() {
        let err = FiniteModel::from_parts(vec![vec![0.0, -1.0], vec![0.0, 1.0]], vec![0.6, 0.6])
            .unwrap_err();
        assert!(matches!(err, Error::NonSimplexPrior(_)));
    }

    #[test]
    fn rejects_non_finite_utility() {
        let err =
            FiniteModel::from_parts(vec![vec![0.0, f64::NAN], vec![0.0, 1.0]], vec![0.5, 0.5])
                .unwrap_err();
        assert!(matches!(err, Error::NonFiniteEntry(_)));
    }

    #[test]
    fn rejects_dimension_mismatch() {
        let err =
            FiniteModel::from_parts(vec![vec![0.0, 1.0]], vec![0.5, 0.5]).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch(_)));
    }

    #[test]
    fn json_rejects_nan_literals() {
        let text = r#"{"states":["l","h"],"actions":["a","b"],
            "utility":[[0,NaN],[0,1]],"prior":[0.5,0.5]}"#;
        assert!(FiniteModel::from_json(text).is_err());
    }

    #[test]
    fn payoff_examples() {
        let m = two_state_model();
        let mu = Posterior::new(vec![1.0, 0.0]).unwrap();
        assert_eq!(m.payoff(&mu, 1), -1.0);
        let mu = Posterior::new(vec![0.5, 0.5]).unwrap();
        assert_eq!(m.payoff(&mu, 1), 0.0);
        let mu = Posterior::new(vec![0.25, 0.75]).unwrap();
        assert!((m.payoff(&mu, 1) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn myopic_action_examples() {
        let m = two_state_model();
        assert_eq!(m.myopic_action(&Posterior::new(vec![1.0, 0.0]).unwrap()), 0);
        assert_eq!(m.myopic_action(&Posterior::new(vec![0.0, 1.0]).unwrap()), 1);
        // Tie at the uniform belief breaks to the lowest index.
        assert_eq!(m.myopic_action(&Posterior::new(vec![0.5, 0.5]).unwrap()), 0);
    }

    #[test]
    fn full_information_value_examples() {
        let m = two_state_model();
        assert!((m.full_information_value() - 0.5).abs() < 1e-15);

        let c = FiniteModel::from_parts(vec![vec![3.0, 3.0], vec![3.0, 3.0]], vec![0.5, 0.5])
            .unwrap();
        assert!((c.full_information_value() - 3.0).abs() < 1e-15);

        let m = FiniteModel::from_parts(vec![vec![0.0, -1.0], vec![0.0, 1.0]], vec![0.25, 0.75])
            .unwrap();
        assert!((m.full_information_value() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn canonical_structures() {
        let m = two_state_model();
        let none = no_information(&m);
        assert_eq!(none.num_signals(), 1);
        assert_eq!(none.posteriors[0].belief, vec![0.5, 0.5]);

        let full = full_revelation(&m);
        assert_eq!(full.num_signals(), 2);
        assert_eq!(full.posteriors[0].belief, vec![1.0, 0.0]);
        assert_eq!(full.weights, vec![0.5, 0.5]);

        let degenerate =
            FiniteModel::from_parts(vec![vec![0.0, -1.0], vec![0.0, 1.0]], vec![1.0, 0.0])
                .unwrap();
        let full = full_revelation(&degenerate);
        assert_eq!(full.num_signals(), 1);
        assert_eq!(full.posteriors[0].belief, vec![1.0, 0.0]);
    }

    #[test]
    fn binary_reduction_normalizes_and_merges() {
        let m = two_state_model();
        let red = m.to_binary().unwrap();
        assert_eq!(red.prior.atoms(), &[(-1.0, 0.5), (1.0, 0.5)]);
        assert_eq!(red.scale, 1.0);
        assert_eq!(red.offset, 0.0);

        // Columnwise subtraction: (2,2)/(1,3) has the same differences.
        let shifted =
            FiniteModel::from_parts(vec![vec![2.0, 1.0], vec![2.0, 3.0]], vec![0.5, 0.5])
                .unwrap();
        let red = shifted.to_binary().unwrap();
        assert_eq!(red.prior.atoms(), &[(-1.0, 0.5), (1.0, 0.5)]);
        assert_eq!(red.offset, 2.0);

        // Equal differences merge.
        let m3 = FiniteModel::from_parts(
            vec![vec![0.0, -0.5], vec![0.0, -0.5], vec![0.0, 1.0]],
            vec![0.25, 0.25, 0.5],
        )
        .unwrap();
        let red = m3.to_binary().unwrap();
        assert_eq!(red.prior.atoms(), &[(-0.5, 0.5), (1.0, 0.5)]);
    }

    #[test]
    fn binary_reduction_requires_two_actions() {
        let m = FiniteModel::from_parts(
            vec![vec![0.0, 1.0, 2.0], vec![2.0, 1.0, 0.0]],
            vec![0.5, 0.5],
        )
        .unwrap();
        assert!(matches!(m.to_binary(), Err(Error::NotBinaryAction)));
    }

    #[test]
    fn signal_structure_requires_bayes_plausibility() {
        let m = two_state_model();
        let err = SignalStructure::new(
            vec![Posterior::new(vec![1.0, 0.0]).unwrap()],
            vec![1.0],
            &m.prior,
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonSimplexPrior(_)));
    }
}
