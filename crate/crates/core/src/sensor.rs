//! Social sensor decisions under an incentive.
//!
//! Each sensor earns `r(x, y, a) = δ_a p − α_a I(a ≠ x) − β_a I(a ≠ y) − γ_a`
//! and reports `argmax_a r_a' η_y` where `r_a = [r(1,a), r(2,a)]` is the reward
//! marginalized over its observation noise. Rearranging the argmax gives the
//! incentive function
//!
//! ```text
//! Δ(η) = l1 η(1) − l2 η(2) + l3
//! ```
//!
//! with decision 1 preferred exactly when `p < Δ(η_y)`. For a public belief π
//! the two private beliefs `η_{y=1}`, `η_{y=2}` split the incentive axis into
//! three intervals, and with them the belief space into the regions
//!
//! | region | incentive interval              | decision |
//! |--------|---------------------------------|----------|
//! | P3     | `[0, Δ(η_{y=2}))`               | 1        |
//! | P2     | `[Δ(η_{y=2}), Δ(η_{y=1}))`      | y        |
//! | P1     | `[Δ(η_{y=1}), 1]`               | 2        |
//!
//! At a vertex of the simplex both private beliefs coincide and the P2
//! interval is empty. There the sensor is indifferent between the decisions
//! for *both* observations at `p = Δ`, and that tie resolves to the truthful
//! rule `a = y`; this keeps the vertex values continuous with the interior
//! (see [`IncentiveThresholds::region`]).

use std::fmt;

use serde::Serialize;

use crate::belief::{private_update, Belief, DecisionLikelihood, ObservationModel, Symbol};
use crate::error::{FusionError, Result};

/// Per-decision reward parameters. Index 0 is decision 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RewardParams {
    /// Fraction of the incentive received.
    pub delta: [f64; 2],
    /// Loss for a decision that mismatches the state.
    pub alpha: [f64; 2],
    /// Loss for a decision that mismatches the observation.
    pub beta: [f64; 2],
    /// Cost of acquiring information.
    pub gamma: [f64; 2],
}

impl RewardParams {
    /// Validates that every entry lies in `[0,1]`. With `enforce_positivity`
    /// the sufficient condition for positive incentive coefficients must hold
    /// as well; without it the condition is only reported by
    /// [`RewardParams::positivity_condition`].
    pub fn new(
        delta: [f64; 2],
        alpha: [f64; 2],
        beta: [f64; 2],
        gamma: [f64; 2],
        enforce_positivity: bool,
    ) -> Result<Self> {
        let params = Self {
            delta,
            alpha,
            beta,
            gamma,
        };
        for (name, values) in [
            ("delta", delta),
            ("alpha", alpha),
            ("beta", beta),
            ("gamma", gamma),
        ] {
            if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(FusionError::InvalidParameter {
                    name,
                    reason: format!("entries must lie in [0,1], got {values:?}"),
                });
            }
        }
        if enforce_positivity && !params.positivity_condition() {
            return Err(FusionError::InvalidParameter {
                name: "reward",
                reason: "expected alpha_1 > alpha_2 >= beta_1 > beta_2, delta_2 > delta_1, gamma_2 > gamma_1"
                    .into(),
            });
        }
        Ok(params)
    }

    /// Reward parameters calibrated for `B = [[0.8, 0.2], [0.4, 0.6]]`.
    pub fn baseline() -> Self {
        Self {
            delta: [0.3, 0.95],
            alpha: [0.288, 0.278],
            beta: [0.11, 0.1],
            gamma: [0.1, 0.414],
        }
    }

    /// Parameters paired with the squared observation matrix.
    pub fn squared_channel() -> Self {
        Self {
            alpha: [0.3132, 0.3032],
            ..Self::baseline()
        }
    }

    /// Parameters paired with the cubed observation matrix.
    pub fn cubed_channel() -> Self {
        Self {
            alpha: [0.3233, 0.3133],
            ..Self::baseline()
        }
    }

    /// `α₁ > α₂ ≥ β₁ > β₂`, `δ₂ > δ₁` and `γ₂ > γ₁`.
    pub fn positivity_condition(&self) -> bool {
        let (a, b) = (self.alpha, self.beta);
        a[0] > a[1] && a[1] >= b[0] && b[0] > b[1] && self.delta[1] > self.delta[0] && self.gamma[1] > self.gamma[0]
    }
}

/// Coefficients of the incentive function `Δ(η) = l1 η(1) − l2 η(2) + l3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IncentiveCoefficients {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
}

impl IncentiveCoefficients {
    /// `Δ` evaluated at a private belief.
    pub fn evaluate(&self, eta: &Belief) -> f64 {
        self.l1 * eta.p1() - self.l2 * eta.p2() + self.l3
    }

    pub fn all_positive(&self) -> bool {
        self.l1 > 0.0 && self.l2 > 0.0 && self.l3 > 0.0
    }

    /// Residuals of the calibration equations `Δ(e₁) = 1` and `Δ(e₂) = 0`.
    pub fn calibration_residuals(&self) -> [f64; 2] {
        [self.evaluate(&Belief::E1) - 1.0, self.evaluate(&Belief::E2)]
    }
}

pub fn coefficients(params: &RewardParams, model: &ObservationModel) -> Result<IncentiveCoefficients> {
    let [d1, d2] = params.delta;
    if d1 == d2 {
        return Err(FusionError::EqualCompensation(d1));
    }
    let b = model.matrix();
    let (a, be, g) = (params.alpha, params.beta, params.gamma);
    let scale = d2 - d1;
    Ok(IncentiveCoefficients {
        l1: (a[1] + be[1] * b[0][0] - be[0] * b[0][1]) / scale,
        l2: (a[0] - be[1] * b[1][0] + be[0] * b[1][1]) / scale,
        l3: (g[1] - g[0]) / scale,
    })
}

/// Recover the row-stochastic `B` for which the incentive function satisfies
/// `Δ(e₁) = 1` and `Δ(e₂) = 0`. Both equations are linear in `B₁₁` and `B₂₁`.
pub fn calibrate_observation_model(params: &RewardParams) -> Result<ObservationModel> {
    let (a, be, g, d) = (params.alpha, params.beta, params.gamma, params.delta);
    let slope = be[0] + be[1];
    if slope <= 0.0 {
        return Err(FusionError::Calibration(
            "beta_1 + beta_2 must be positive for the calibration equations to determine B".into(),
        ));
    }
    if d[0] == d[1] {
        return Err(FusionError::EqualCompensation(d[0]));
    }
    let b11 = (d[1] - d[0] - (g[1] - g[0]) - a[1] + be[0]) / slope;
    let b21 = (a[0] + be[0] - (g[1] - g[0])) / slope;
    for (name, v) in [("B11", b11), ("B21", b21)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(FusionError::Calibration(format!("{name} = {v} lies outside [0,1]")));
        }
    }
    ObservationModel::new([[b11, 1.0 - b11], [b21, 1.0 - b21]])
}

/// Expected reward `r(x, a) = δ_a p − α_a I(a ≠ x) − β_a P(y ≠ a | x) − γ_a`,
/// indexed `[x][a]`.
pub fn expected_reward(params: &RewardParams, model: &ObservationModel, incentive: f64) -> [[f64; 2]; 2] {
    let b = model.matrix();
    let mut r = [[0.0; 2]; 2];
    for x in 0..2 {
        for a in 0..2 {
            let state_miss = if a != x { params.alpha[a] } else { 0.0 };
            r[x][a] = params.delta[a] * incentive - state_miss - params.beta[a] * (1.0 - b[x][a]) - params.gamma[a];
        }
    }
    r
}

/// Supermodularity of the expected reward: `r(1,1) > r(2,1)` and
/// `r(2,2) > r(1,2)`. The differences do not depend on the incentive, so
/// checking both ends of `[0,1]` covers every `p`.
pub fn check_supermodular(params: &RewardParams, model: &ObservationModel) -> bool {
    [0.0, 1.0].iter().all(|&p| {
        let r = expected_reward(params, model, p);
        r[0][0] > r[1][0] && r[1][1] > r[0][1]
    })
}

/// Belief-space region induced by an incentive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Region {
    /// Herding on decision 2.
    P1,
    /// Social learning: decisions equal observations.
    P2,
    /// Herding on decision 1.
    P3,
}

impl Region {
    pub const ALL: [Region; 3] = [Region::P1, Region::P2, Region::P3];

    /// Decision rule `M[y][a] = P(a | y)` in this region.
    pub fn decision_rule(self) -> [[f64; 2]; 2] {
        match self {
            Region::P1 => [[0.0, 1.0], [0.0, 1.0]],
            Region::P2 => [[1.0, 0.0], [0.0, 1.0]],
            Region::P3 => [[1.0, 0.0], [1.0, 0.0]],
        }
    }

    /// Decision reported after observation `obs`.
    pub fn decision(self, obs: Symbol) -> Symbol {
        match self {
            Region::P1 => Symbol::Two,
            Region::P2 => obs,
            Region::P3 => Symbol::One,
        }
    }

    pub fn is_learning(self) -> bool {
        self == Region::P2
    }

    pub fn index(self) -> usize {
        match self {
            Region::P1 => 0,
            Region::P2 => 1,
            Region::P3 => 2,
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Region::P1 => "P1",
            Region::P2 => "P2",
            Region::P3 => "P3",
        };
        f.write_str(s)
    }
}

/// The two incentive levels `Δ(η_{y=2})` and `Δ(η_{y=1})` at a public belief.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IncentiveThresholds {
    /// `Δ(η_{y=2})`, raw (not clamped).
    pub lower: f64,
    /// `Δ(η_{y=1})`, raw (not clamped).
    pub upper: f64,
}

impl IncentiveThresholds {
    /// Cheapest admissible incentive that puts the sensor in the learning
    /// region: `Δ(η_{y=2})` clamped to `[0,1]`.
    pub fn learning_incentive(&self) -> f64 {
        self.lower.clamp(0.0, 1.0)
    }

    /// Cheapest admissible incentive at which every sensor reports decision 2.
    pub fn herding_incentive(&self) -> f64 {
        self.upper.clamp(0.0, 1.0)
    }

    /// The private belief does not depend on the observation, so the learning
    /// interval is empty.
    pub fn is_degenerate(&self) -> bool {
        self.lower == self.upper
    }

    /// Region for incentive `p`, using the half-open intervals of the module
    /// table. Comparisons are exact. The one addition is the degenerate case,
    /// where `p` equal to [`Self::learning_incentive`] leaves the sensor
    /// indifferent for both observations and counts as learning.
    pub fn region(&self, p: f64) -> Region {
        if self.is_degenerate() && p == self.learning_incentive() {
            Region::P2
        } else if p < self.lower {
            Region::P3
        } else if p < self.upper {
            Region::P2
        } else {
            Region::P1
        }
    }
}

/// A population of identical sensors: reward parameters, observation model
/// and the derived incentive coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SocialSensor {
    params: RewardParams,
    model: ObservationModel,
    coeffs: IncentiveCoefficients,
}

impl SocialSensor {
    pub fn new(params: RewardParams, model: ObservationModel) -> Result<Self> {
        let coeffs = coefficients(&params, &model)?;
        Ok(Self { params, model, coeffs })
    }

    pub fn params(&self) -> &RewardParams {
        &self.params
    }

    pub fn model(&self) -> &ObservationModel {
        &self.model
    }

    pub fn coefficients(&self) -> &IncentiveCoefficients {
        &self.coeffs
    }

    /// TP2 observations and a supermodular reward.
    pub fn hypotheses(&self) -> (bool, bool) {
        (self.model.is_tp2(), check_supermodular(&self.params, &self.model))
    }

    /// Raw `Δ(η_y)` for the private belief after `obs`.
    pub fn incentive(&self, prior: &Belief, obs: Symbol) -> Result<f64> {
        let eta = private_update(prior, obs, &self.model)?;
        Ok(self.coeffs.evaluate(&eta))
    }

    /// `Δ(η_{y=2})` and `Δ(η_{y=1})`. An observation with zero predictive
    /// probability never occurs, so its private belief is taken to be the
    /// prior itself.
    pub fn thresholds(&self, prior: &Belief) -> IncentiveThresholds {
        let at = |obs| {
            let eta = private_update(prior, obs, &self.model).unwrap_or(*prior);
            self.coeffs.evaluate(&eta)
        };
        IncentiveThresholds {
            lower: at(Symbol::Two),
            upper: at(Symbol::One),
        }
    }

    pub fn expected_reward(&self, incentive: f64) -> [[f64; 2]; 2] {
        expected_reward(&self.params, &self.model, incentive)
    }

    /// `argmax_a r_a' η_y`, evaluated from the expected reward matrix. Exact
    /// ties go to decision 2, except in the degenerate case described in
    /// [`IncentiveThresholds::region`] where the sensor reports `obs`.
    pub fn choose_action(&self, incentive: f64, prior: &Belief, obs: Symbol) -> Result<Symbol> {
        let eta = private_update(prior, obs, &self.model)?;
        let t = self.thresholds(prior);
        if t.is_degenerate() && incentive == t.learning_incentive() {
            return Ok(obs);
        }
        let r = self.expected_reward(incentive);
        let value = |a: usize| r[0][a] * eta.p1() + r[1][a] * eta.p2();
        Ok(if value(0) > value(1) { Symbol::One } else { Symbol::Two })
    }

    /// Region from the incentive intervals.
    pub fn classify_region(&self, incentive: f64, prior: &Belief) -> Region {
        self.thresholds(prior).region(incentive)
    }

    /// Region from the sign of `(r₁ − r₂)'η_y` for both observations. This is
    /// computed independently of the incentive function and agrees with
    /// [`Self::classify_region`] away from interval boundaries. When the model
    /// violates TP2 the P1 and P3 conditions can hold together; P1 wins.
    pub fn region_by_sign_test(&self, incentive: f64, prior: &Belief) -> Region {
        let r = self.expected_reward(incentive);
        let margin = |obs| {
            let eta = private_update(prior, obs, &self.model).unwrap_or(*prior);
            (r[0][0] - r[0][1]) * eta.p1() + (r[1][0] - r[1][1]) * eta.p2()
        };
        let (after_one, after_two) = (margin(Symbol::One), margin(Symbol::Two));
        if after_one <= 0.0 {
            Region::P1
        } else if after_two > 0.0 {
            Region::P3
        } else {
            Region::P2
        }
    }

    /// `R^π`, constant on each region.
    pub fn decision_likelihood(&self, incentive: f64, prior: &Belief) -> DecisionLikelihood {
        match self.classify_region(incentive, prior) {
            Region::P1 => DecisionLikelihood::HERD_TWO,
            Region::P2 => DecisionLikelihood::truthful(&self.model),
            Region::P3 => DecisionLikelihood::HERD_ONE,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn baseline_model() -> ObservationModel {
        ObservationModel::new([[0.8, 0.2], [0.4, 0.6]]).unwrap()
    }

    fn sensor() -> SocialSensor {
        SocialSensor::new(RewardParams::baseline(), baseline_model()).unwrap()
    }

    fn interior(p2: f64) -> Belief {
        Belief::from_p2(p2).unwrap()
    }

    #[test]
    fn coefficient_values() {
        let c = coefficients(&RewardParams::baseline(), &baseline_model()).unwrap();
        assert_abs_diff_eq!(c.l3, 0.314 / 0.65, epsilon = 1e-12);
        assert_abs_diff_eq!(c.l2, (0.288 - 0.04 + 0.066) / 0.65, epsilon = 1e-12);
        assert_abs_diff_eq!(c.l1, (0.278 + 0.08 - 0.022) / 0.65, epsilon = 1e-12);
        assert_abs_diff_eq!(c.l3, 0.483077, epsilon = 1e-6);
        assert_abs_diff_eq!(c.l1, 0.516923, epsilon = 1e-6);
        assert!(c.all_positive());
    }

    #[test]
    fn equal_compensation_is_rejected() {
        let mut p = RewardParams::baseline();
        p.delta = [0.5, 0.5];
        assert!(matches!(coefficients(&p, &baseline_model()), Err(FusionError::EqualCompensation(_))));
    }

    #[test]
    fn params_validation() {
        let t = RewardParams::baseline();
        assert!(RewardParams::new(t.delta, t.alpha, t.beta, t.gamma, true).is_ok());
        assert!(RewardParams::new([0.3, 1.2], t.alpha, t.beta, t.gamma, false).is_err());
        // Swapped gammas fail only when positivity is enforced.
        let g = [0.414, 0.1];
        assert!(RewardParams::new(t.delta, t.alpha, t.beta, g, true).is_err());
        let loose = RewardParams::new(t.delta, t.alpha, t.beta, g, false).unwrap();
        assert!(!loose.positivity_condition());
    }

    #[test]
    fn incentive_function_examples() {
        let s = sensor();
        for obs in Symbol::ALL {
            assert_abs_diff_eq!(s.incentive(&Belief::E1, obs).unwrap(), 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(s.incentive(&Belief::E2, obs).unwrap(), 0.0, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(s.incentive(&Belief::UNIFORM, Symbol::One).unwrap(), 2.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    #[allow(clippy::approx_constant)] // 0.318 is a reward gap, not 1/π
    fn expected_reward_examples() {
        let b = baseline_model();
        let p = RewardParams::baseline();
        let r0 = expected_reward(&p, &b, 0.0);
        assert_abs_diff_eq!(r0[0][0] - r0[1][0], 0.332, epsilon = 1e-12);
        for inc in [0.0, 0.37, 1.0] {
            let r = expected_reward(&p, &b, inc);
            assert_abs_diff_eq!(r[1][1] - r[0][1], 0.318, epsilon = 1e-12);
        }
        let zero = RewardParams {
            delta: [0.0; 2],
            alpha: [0.0; 2],
            beta: [0.0; 2],
            gamma: [0.0; 2],
        };
        assert_eq!(expected_reward(&zero, &b, 0.7), [[0.0; 2]; 2]);
    }

    #[test]
    fn supermodularity_examples() {
        assert!(check_supermodular(&RewardParams::baseline(), &baseline_model()));
        let flat = RewardParams {
            alpha: [0.0; 2],
            beta: [0.0; 2],
            ..RewardParams::baseline()
        };
        assert!(!check_supermodular(&flat, &baseline_model()));
        let b2 = baseline_model().power(2);
        assert!(check_supermodular(&RewardParams::squared_channel(), &b2));
    }

    #[test]
    fn calibration_recovers_baseline_matrix() {
        let b = calibrate_observation_model(&RewardParams::baseline()).unwrap().matrix();
        assert_abs_diff_eq!(b[0][0], 0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(b[1][0], 0.4, epsilon = 1e-12);
        let model = ObservationModel::new(b).unwrap();
        assert!(model.is_tp2());
        assert_abs_diff_eq!(model.det(), 0.4, epsilon = 1e-12);
        let c = coefficients(&RewardParams::baseline(), &model).unwrap();
        let [r1, r2] = c.calibration_residuals();
        assert!(r1.abs() < 1e-9 && r2.abs() < 1e-9);
        assert_abs_diff_eq!(c.l2, c.l3, epsilon = 1e-9);
    }

    #[test]
    fn calibration_is_inexact_for_matrix_powers() {
        let b2 = baseline_model().power(2);
        let c = coefficients(&RewardParams::squared_channel(), &b2).unwrap();
        let [r1, _] = c.calibration_residuals();
        // 0.0084 / 0.65
        assert_abs_diff_eq!(r1, 0.0084 / 0.65, epsilon = 1e-9);
    }

    #[test]
    fn calibration_infeasible_without_losses() {
        let p = RewardParams {
            alpha: [0.0; 2],
            beta: [0.0; 2],
            ..RewardParams::baseline()
        };
        assert!(matches!(calibrate_observation_model(&p), Err(FusionError::Calibration(_))));
    }

    #[test]
    fn choose_action_examples() {
        let s = sensor();
        let prior = interior(0.5);
        let t = s.thresholds(&prior);
        for p in [t.lower, 0.5 * (t.lower + t.upper), t.upper - 1e-9] {
            for y in Symbol::ALL {
                assert_eq!(s.choose_action(p, &prior, y).unwrap(), y, "p={p}");
            }
        }
        for y in Symbol::ALL {
            assert_eq!(s.choose_action(0.0, &prior, y).unwrap(), Symbol::One);
            assert_eq!(s.choose_action(1.0, &prior, y).unwrap(), Symbol::Two);
        }
    }

    #[test]
    fn region_examples() {
        let s = sensor();
        assert_eq!(s.classify_region(0.0, &interior(0.3)), Region::P3);
        let t = s.thresholds(&Belief::UNIFORM);
        assert_abs_diff_eq!(t.lower, 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(t.upper, 2.0 / 3.0, epsilon = 1e-12);
        assert_eq!(s.classify_region(0.3, &Belief::UNIFORM), Region::P2);
        assert_eq!(s.classify_region(1.0, &interior(0.3)), Region::P1);
    }

    #[test]
    fn vertex_tie_counts_as_learning() {
        let s = sensor();
        for v in [Belief::E1, Belief::E2] {
            let t = s.thresholds(&v);
            assert!(t.is_degenerate());
            assert_eq!(t.region(t.learning_incentive()), Region::P2);
            for y in Symbol::ALL {
                assert_eq!(s.choose_action(t.learning_incentive(), &v, y).unwrap(), y);
            }
        }
        assert_eq!(s.classify_region(0.0, &Belief::E1), Region::P3);
    }

    #[test]
    fn decision_likelihood_per_region() {
        let s = sensor();
        let prior = interior(0.5);
        assert_eq!(s.decision_likelihood(0.3, &prior).matrix(), baseline_model().matrix());
        assert_eq!(s.decision_likelihood(0.1, &prior), DecisionLikelihood::HERD_ONE);
        assert_eq!(s.decision_likelihood(0.9, &prior), DecisionLikelihood::HERD_TWO);
    }

    fn near_boundary(t: &IncentiveThresholds, p: f64) -> bool {
        (p - t.lower).abs() < 1e-9 || (p - t.upper).abs() < 1e-9
    }

    #[test]
    fn regions_match_decisions_and_lemma_two() {
        let s = sensor();
        let b = baseline_model();
        for i in 1..200 {
            let prior = interior(i as f64 / 200.0);
            let t = s.thresholds(&prior);
            for j in 0..=200 {
                let p = j as f64 / 200.0;
                if near_boundary(&t, p) {
                    continue;
                }
                let region = s.classify_region(p, &prior);
                assert_eq!(region, s.region_by_sign_test(p, &prior));
                let mut rule = [[0.0; 2]; 2];
                for y in Symbol::ALL {
                    let a = s.choose_action(p, &prior, y).unwrap();
                    assert_eq!(a, region.decision(y), "belief {} p {p}", prior.p2());
                    rule[y.index()][a.index()] = 1.0;
                }
                let brute = DecisionLikelihood::from_decision_rule(&b, rule).unwrap();
                assert_eq!(brute, s.decision_likelihood(p, &prior));
            }
        }
    }

    #[test]
    fn incentive_function_shape_on_grid() {
        let s = sensor();
        let n = 2000;
        let mut prev: Option<IncentiveThresholds> = None;
        for i in 0..=n {
            let prior = interior(i as f64 / n as f64);
            let t = s.thresholds(&prior);
            if i > 0 && i < n {
                assert!(t.lower <= t.upper);
            }
            if let Some(p) = prev {
                assert!(t.lower < p.lower, "lower not decreasing at {i}");
                assert!(t.upper < p.upper, "upper not decreasing at {i}");
            }
            prev = Some(t);
        }
    }

    proptest! {
        #[test]
        fn lower_convex_upper_concave(a in 0.0f64..=1.0, b in 0.0f64..=1.0, w in 0.0f64..=1.0) {
            let s = sensor();
            let mid = w * a + (1.0 - w) * b;
            let (ta, tb, tm) = (
                s.thresholds(&interior(a)),
                s.thresholds(&interior(b)),
                s.thresholds(&interior(mid)),
            );
            prop_assert!(tm.lower <= w * ta.lower + (1.0 - w) * tb.lower + 1e-12);
            prop_assert!(tm.upper >= w * ta.upper + (1.0 - w) * tb.upper - 1e-12);
        }
    }
}
