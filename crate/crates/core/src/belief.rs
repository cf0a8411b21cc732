//! Two-state belief arithmetic.
//!
//! States, observations and decisions all take values in `{1, 2}` and are
//! represented by [`Symbol`]. A [`Belief`] is a point on the 2-simplex; the
//! orderings used throughout the crate are stated on its second component.
//!
//! Two Bayesian updates live here:
//!
//! - the private update `η_y = B_y π / 1'B_y π` a sensor performs after its
//!   own observation, where `B_y = diag(P(y | x = 1), P(y | x = 2))`;
//! - the social learning filter `T(π, a) = R_a π / σ(π, a)` the public performs
//!   after a decision, with a prior-dependent decision likelihood `R`.

use serde::Serialize;

use crate::error::{FusionError, Result};

/// Absolute tolerance on the simplex constraint.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// Normalizers below this are treated as a zero-probability event.
pub const MIN_NORMALIZER: f64 = 1e-300;

/// Tolerance on the stochasticity of the garbling matrix in [`ObservationModel::blackwell_geq`].
pub const GARBLING_TOL: f64 = 1e-9;

/// A value in `{1, 2}`: a state, an observation or a decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Symbol {
    One,
    Two,
}

impl Symbol {
    pub const ALL: [Symbol; 2] = [Symbol::One, Symbol::Two];

    /// Zero-based index (`One -> 0`).
    pub fn index(self) -> usize {
        match self {
            Symbol::One => 0,
            Symbol::Two => 1,
        }
    }

    /// One-based label as used in tables and CSV output.
    pub fn label(self) -> u8 {
        self.index() as u8 + 1
    }

    pub fn from_label(label: u8) -> Option<Symbol> {
        match label {
            1 => Some(Symbol::One),
            2 => Some(Symbol::Two),
            _ => None,
        }
    }
}

/// Probability mass function over the two states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Belief {
    p1: f64,
    p2: f64,
}

impl Belief {
    /// Point mass on state 1.
    pub const E1: Belief = Belief { p1: 1.0, p2: 0.0 };
    /// Point mass on state 2.
    pub const E2: Belief = Belief { p1: 0.0, p2: 1.0 };
    pub const UNIFORM: Belief = Belief { p1: 0.5, p2: 0.5 };

    pub fn new(p1: f64, p2: f64) -> Result<Self> {
        let in_range = |p: f64| (0.0..=1.0).contains(&p);
        if !in_range(p1) || !in_range(p2) || (p1 + p2 - 1.0).abs() > SIMPLEX_TOL {
            return Err(FusionError::InvalidBelief { p1, p2 });
        }
        Ok(Self { p1, p2 })
    }

    /// Belief with `π(2) = p2`.
    pub fn from_p2(p2: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p2) {
            return Err(FusionError::InvalidBelief { p1: 1.0 - p2, p2 });
        }
        Ok(Self { p1: 1.0 - p2, p2 })
    }

    /// Normalize a non-negative vector. Both components are divided by the
    /// same normalizer so a tiny `p1` keeps its relative precision.
    pub(crate) fn normalize(u1: f64, u2: f64) -> Result<(Self, f64)> {
        let total = u1 + u2;
        if total.is_nan() || total < MIN_NORMALIZER {
            return Err(FusionError::ZeroNormalizer(total));
        }
        Ok((
            Self {
                p1: u1 / total,
                p2: u2 / total,
            },
            total,
        ))
    }

    pub fn p1(&self) -> f64 {
        self.p1
    }

    pub fn p2(&self) -> f64 {
        self.p2
    }

    pub fn mass(&self, state: Symbol) -> f64 {
        match state {
            Symbol::One => self.p1,
            Symbol::Two => self.p2,
        }
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.p1, self.p2]
    }

    /// Point mass at `state`, the `g(θ)` of the consistency statements.
    pub fn point_mass(state: Symbol) -> Self {
        match state {
            Symbol::One => Self::E1,
            Symbol::Two => Self::E2,
        }
    }

    /// True at `e₁` and `e₂`.
    pub fn is_vertex(&self) -> bool {
        self.p1 == 0.0 || self.p2 == 0.0
    }

    /// First-order stochastic dominance; for two states this is `a(2) >= b(2)`.
    pub fn fsd_geq(&self, other: &Belief) -> bool {
        self.p2 >= other.p2
    }

    /// Binary entropy in bits, zero at the vertices.
    pub fn entropy_bits(&self) -> f64 {
        let term = |p: f64| if p > 0.0 && p < 1.0 { -p * p.log2() } else { 0.0 };
        term(self.p1) + term(self.p2)
    }
}

fn validate_stochastic(what: &'static str, m: &[[f64; 2]; 2]) -> Result<()> {
    for (i, row) in m.iter().enumerate() {
        if row.iter().any(|v| !v.is_finite() || *v < 0.0 || *v > 1.0) {
            return Err(FusionError::InvalidMatrix {
                what,
                reason: format!("row {} has an entry outside [0,1]: {:?}", i + 1, row),
            });
        }
        let sum = row[0] + row[1];
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(FusionError::InvalidMatrix {
                what,
                reason: format!("row {} sums to {sum}", i + 1),
            });
        }
    }
    Ok(())
}

fn matmul(a: &[[f64; 2]; 2], b: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

/// Observation likelihood `B[i][j] = P(y = j | x = i)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObservationModel {
    b: [[f64; 2]; 2],
}

impl ObservationModel {
    pub fn new(b: [[f64; 2]; 2]) -> Result<Self> {
        validate_stochastic("observation", &b)?;
        Ok(Self { b })
    }

    pub fn identity() -> Self {
        Self {
            b: [[1.0, 0.0], [0.0, 1.0]],
        }
    }

    pub fn matrix(&self) -> [[f64; 2]; 2] {
        self.b
    }

    /// `P(y = obs | x = state)`.
    pub fn prob(&self, state: Symbol, obs: Symbol) -> f64 {
        self.b[state.index()][obs.index()]
    }

    /// Diagonal of `B_y`: the likelihood of `obs` under each state.
    pub fn likelihood(&self, obs: Symbol) -> [f64; 2] {
        [self.b[0][obs.index()], self.b[1][obs.index()]]
    }

    pub fn det(&self) -> f64 {
        self.b[0][0] * self.b[1][1] - self.b[0][1] * self.b[1][0]
    }

    /// Totally positive of order 2: `det(B) >= 0`.
    pub fn is_tp2(&self) -> bool {
        self.det() >= 0.0
    }

    /// Matrix product `self · other`, which is again stochastic.
    pub fn compose(&self, other: &ObservationModel) -> ObservationModel {
        let mut b = matmul(&self.b, &other.b);
        // Renormalize rows to absorb rounding so the product validates.
        for row in &mut b {
            let s = row[0] + row[1];
            row[0] /= s;
            row[1] /= s;
        }
        ObservationModel { b }
    }

    /// `B^n` for `n >= 1`.
    pub fn power(&self, n: u32) -> ObservationModel {
        let mut out = *self;
        for _ in 1..n.max(1) {
            out = out.compose(self);
        }
        out
    }

    /// Blackwell dominance: `self ≽ other` iff `other = self · Γ` for a
    /// stochastic `Γ`. Requires `self` invertible.
    pub fn blackwell_geq(&self, other: &ObservationModel) -> Result<bool> {
        let det = self.det();
        if det.abs() < 1e-14 {
            return Err(FusionError::Singular(det));
        }
        let inv = [
            [self.b[1][1] / det, -self.b[0][1] / det],
            [-self.b[1][0] / det, self.b[0][0] / det],
        ];
        let gamma = matmul(&inv, &other.b);
        let ok = gamma.iter().all(|row| {
            row.iter()
                .all(|v| (-GARBLING_TOL..=1.0 + GARBLING_TOL).contains(v))
                && (row[0] + row[1] - 1.0).abs() <= GARBLING_TOL
        });
        Ok(ok)
    }
}

/// `σ(π, y) = 1'B_y π`, the predictive probability of observation `obs`.
pub fn observation_probability(prior: &Belief, obs: Symbol, model: &ObservationModel) -> f64 {
    let l = model.likelihood(obs);
    l[0] * prior.p1 + l[1] * prior.p2
}

/// Private belief after fusing observation `obs` with the public belief.
pub fn private_update(prior: &Belief, obs: Symbol, model: &ObservationModel) -> Result<Belief> {
    let l = model.likelihood(obs);
    Belief::normalize(l[0] * prior.p1, l[1] * prior.p2).map(|(b, _)| b)
}

/// Decision likelihood `R[i][a] = P(a | x = i, π)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecisionLikelihood {
    r: [[f64; 2]; 2],
}

impl DecisionLikelihood {
    pub fn new(r: [[f64; 2]; 2]) -> Result<Self> {
        validate_stochastic("decision likelihood", &r)?;
        Ok(Self { r })
    }

    /// Every sensor reports decision 1 regardless of its observation.
    pub const HERD_ONE: DecisionLikelihood = DecisionLikelihood {
        r: [[1.0, 0.0], [1.0, 0.0]],
    };

    /// Every sensor reports decision 2 regardless of its observation.
    pub const HERD_TWO: DecisionLikelihood = DecisionLikelihood {
        r: [[0.0, 1.0], [0.0, 1.0]],
    };

    /// Decisions equal observations, so `R = B`.
    pub fn truthful(model: &ObservationModel) -> Self {
        Self { r: model.matrix() }
    }

    /// `R = B M` where `M[y][a] = P(a | y)` is the sensors' decision rule.
    pub fn from_decision_rule(model: &ObservationModel, rule: [[f64; 2]; 2]) -> Result<Self> {
        Self::new(matmul(&model.matrix(), &rule))
    }

    pub fn matrix(&self) -> [[f64; 2]; 2] {
        self.r
    }

    /// Diagonal of `R_a`.
    pub fn likelihood(&self, action: Symbol) -> [f64; 2] {
        [self.r[0][action.index()], self.r[1][action.index()]]
    }
}

/// `σ(π, a) = 1'R_a π`, the probability that the next decision is `action`.
pub fn action_probability(prior: &Belief, action: Symbol, likelihood: &DecisionLikelihood) -> f64 {
    let l = likelihood.likelihood(action);
    l[0] * prior.p1 + l[1] * prior.p2
}

/// Social learning filter: public belief after observing decision `action`.
/// Returns the posterior and the normalizer `σ(π, a)`.
pub fn social_filter(
    prior: &Belief,
    action: Symbol,
    likelihood: &DecisionLikelihood,
) -> Result<(Belief, f64)> {
    let l = likelihood.likelihood(action);
    Belief::normalize(l[0] * prior.p1, l[1] * prior.p2)
}
