//! Value iteration for the fusion center's incentive problem.
//!
//! The fusion center chooses an incentive `p = μ(π)` at each public belief to
//! minimize the discounted stage cost `Σ_{k≥1} ρ^{k−1} c(p_k)`. On a uniform
//! grid over `π(2)` the Bellman operator reduces to three branches:
//!
//! ```text
//! Q(π, p) = c(π, p) + ρ V(π)                        p in P3 or P1
//! Q(π, p) = c(π, p) + ρ Σ_y σ(π, y) V(η_y)          p in P2
//! ```
//!
//! since herding freezes the public belief and learning moves it to the
//! sensor's private belief. Off-grid values are linearly interpolated.

use rayon::prelude::*;
use serde::Serialize;

use crate::belief::{observation_probability, private_update, Belief, Symbol};
use crate::error::{FusionError, Result};
use crate::sensor::{IncentiveThresholds, Region, SocialSensor};

/// Fixed sweep count reported alongside the converged answer.
pub const PAPER_ITERATIONS: usize = 100;
pub const DEFAULT_MAX_ITERS: usize = 10 * PAPER_ITERATIONS;
pub const DEFAULT_TOLERANCE: f64 = 1e-9;
pub const DEFAULT_GRID_SIZE: usize = 1000;
/// Incentive search grid for costs where the three-candidate reduction is
/// not known to hold.
pub const ENTROPY_SEARCH_POINTS: usize = 101;

/// Belief-dependent weight `ψ_e` on the entropy of the public belief.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum EntropyWeight {
    /// `offset − π(2)²`.
    Quadratic { offset: f64 },
    /// `below` when `π(2) < split`, `above` when `π(2) > split`, zero at the
    /// split itself.
    TwoLevel { split: f64, below: f64, above: f64 },
    /// Piecewise linear through `(pi2[i], weight[i])`, constant beyond the ends.
    Tabulated { pi2: Vec<f64>, weight: Vec<f64> },
}

impl EntropyWeight {
    /// `0.1 − π(2)²`.
    pub fn quadratic() -> Self {
        EntropyWeight::Quadratic { offset: 0.1 }
    }

    /// `0.6·I(π(2) < 0.75) − 0.35·I(π(2) > 0.75)`.
    pub fn two_level() -> Self {
        EntropyWeight::TwoLevel {
            split: 0.75,
            below: 0.6,
            above: -0.35,
        }
    }

    pub fn tabulated(pi2: Vec<f64>, weight: Vec<f64>) -> Result<Self> {
        let invalid = |reason: String| FusionError::InvalidParameter { name: "psi", reason };
        if pi2.is_empty() || pi2.len() != weight.len() {
            return Err(invalid(format!(
                "need equally many knots and weights, got {} and {}",
                pi2.len(),
                weight.len()
            )));
        }
        if pi2.windows(2).any(|w| w[1] <= w[0]) || pi2.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(invalid("knots must be strictly increasing within [0,1]".into()));
        }
        if weight.iter().any(|w| !w.is_finite()) {
            return Err(invalid("weights must be finite".into()));
        }
        Ok(EntropyWeight::Tabulated { pi2, weight })
    }

    pub fn eval(&self, belief: &Belief) -> f64 {
        let x = belief.p2();
        match self {
            EntropyWeight::Quadratic { offset } => offset - x * x,
            EntropyWeight::TwoLevel { split, below, above } => {
                if x < *split {
                    *below
                } else if x > *split {
                    *above
                } else {
                    0.0
                }
            }
            EntropyWeight::Tabulated { pi2, weight } => {
                let last = pi2.len() - 1;
                if x <= pi2[0] {
                    return weight[0];
                }
                if x >= pi2[last] {
                    return weight[last];
                }
                let i = pi2.partition_point(|&k| k <= x) - 1;
                let w = (x - pi2[i]) / (pi2[i + 1] - pi2[i]);
                weight[i] * (1.0 - w) + weight[i + 1] * w
            }
        }
    }
}

/// Stage cost of information fusion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum FusionCostSpec {
    /// `p − φ_s I(P2)`.
    Linear { phi_s: f64 },
    /// `p + ψ_e(π) C_e(π) − φ_e I(P2)` with `C_e` the entropy in bits.
    Entropy { phi_e: f64, psi: EntropyWeight },
}

fn check_weight(name: &'static str, w: f64) -> Result<()> {
    if w > 0.0 && w < 1.0 {
        Ok(())
    } else {
        Err(FusionError::InvalidParameter {
            name,
            reason: format!("must lie in (0,1), got {w}"),
        })
    }
}

impl FusionCostSpec {
    pub fn linear(phi_s: f64) -> Result<Self> {
        check_weight("phi_s", phi_s)?;
        Ok(FusionCostSpec::Linear { phi_s })
    }

    pub fn entropy(phi_e: f64, psi: EntropyWeight) -> Result<Self> {
        check_weight("phi_e", phi_e)?;
        Ok(FusionCostSpec::Entropy { phi_e, psi })
    }

    /// Reward for keeping sensors in the learning region.
    pub fn learning_weight(&self) -> f64 {
        match self {
            FusionCostSpec::Linear { phi_s } => *phi_s,
            FusionCostSpec::Entropy { phi_e, .. } => *phi_e,
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, FusionCostSpec::Linear { .. })
    }

    /// Incentive-independent part of the stage cost at `belief`.
    fn belief_term(&self, belief: &Belief) -> f64 {
        match self {
            FusionCostSpec::Linear { .. } => 0.0,
            FusionCostSpec::Entropy { psi, .. } => {
                let h = belief.entropy_bits();
                if h == 0.0 {
                    0.0
                } else {
                    psi.eval(belief) * h
                }
            }
        }
    }
}

/// Stage cost for incentive `p` when the sensors act according to `region`.
pub fn stage_cost(spec: &FusionCostSpec, belief: &Belief, incentive: f64, region: Region) -> f64 {
    let learning = if region.is_learning() { spec.learning_weight() } else { 0.0 };
    incentive + spec.belief_term(belief) - learning
}

/// Uniform grid on `π(2) ∈ [0,1]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BeliefGrid {
    points: Vec<f64>,
}

impl BeliefGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(FusionError::InvalidParameter {
                name: "grid_size",
                reason: format!("need at least 2 points, got {n}"),
            });
        }
        let last = (n - 1) as f64;
        Ok(Self {
            points: (0..n).map(|i| i as f64 / last).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn spacing(&self) -> f64 {
        1.0 / (self.len() - 1) as f64
    }

    pub fn belief(&self, i: usize) -> Belief {
        Belief::from_p2(self.points[i]).expect("grid points lie in [0,1]")
    }

    /// Cell index `i` and weight `w` with `x = (1−w)·x_i + w·x_{i+1}`.
    pub fn locate(&self, pi2: f64) -> (usize, f64) {
        let scaled = pi2.clamp(0.0, 1.0) * (self.len() - 1) as f64;
        let i = (scaled.floor() as usize).min(self.len() - 2);
        (i, scaled - i as f64)
    }

    pub fn nearest(&self, pi2: f64) -> usize {
        let scaled = pi2.clamp(0.0, 1.0) * (self.len() - 1) as f64;
        (scaled.round() as usize).min(self.len() - 1)
    }

    /// Linear interpolation of grid values at `π(2)`.
    pub fn interpolate(&self, values: &[f64], pi2: f64) -> f64 {
        let (i, w) = self.locate(pi2);
        lerp(values, i, w)
    }
}

fn lerp(values: &[f64], i: usize, w: f64) -> f64 {
    if w == 0.0 {
        values[i]
    } else {
        values[i] * (1.0 - w) + values[i + 1] * w
    }
}

/// Everything a backup needs at one grid point, computed once per solve.
#[derive(Debug, Clone)]
struct Node {
    index: usize,
    belief: Belief,
    thresholds: IncentiveThresholds,
    sigma: [f64; 2],
    eta: [(usize, f64); 2],
}

/// Sensors, cost and discount factor.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FusionProblem {
    sensor: SocialSensor,
    cost: FusionCostSpec,
    discount: f64,
}

/// Iteration limits for [`FusionProblem::value_iterate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverSettings {
    pub max_iters: usize,
    pub tolerance: f64,
    /// Also snapshot the iterate after this many sweeps.
    pub checkpoint: Option<usize>,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            max_iters: DEFAULT_MAX_ITERS,
            tolerance: DEFAULT_TOLERANCE,
            checkpoint: Some(PAPER_ITERATIONS),
        }
    }
}

type Snapshot = (Vec<f64>, Vec<f64>, Vec<Region>, usize, f64);

/// Iterate after a fixed number of sweeps.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Checkpoint {
    pub iterations: usize,
    pub residual: f64,
    pub value: Vec<f64>,
    pub policy: Vec<f64>,
    pub regions: Vec<Region>,
    pub switch_points: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveResult {
    pub grid: BeliefGrid,
    pub value: Vec<f64>,
    /// Greedy incentive at each grid point.
    pub policy: Vec<f64>,
    /// Region the greedy incentive induces at each grid point.
    pub regions: Vec<Region>,
    /// Indices `i` where the policy branch differs between `i` and `i+1`.
    pub switch_points: Vec<usize>,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
    /// Sup-norm change of each sweep.
    pub residual_history: Vec<f64>,
    pub checkpoint: Option<Checkpoint>,
}

/// Outcome of [`extract_threshold`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ThresholdReport {
    /// Constant policy branch over the whole grid.
    NoSwitch,
    /// Exactly one switch; `pi2` is the midpoint of the bracketing cell.
    Single { index: usize, pi2: f64 },
    Multiple(Vec<usize>),
}

impl ThresholdReport {
    pub fn threshold(&self) -> Option<f64> {
        match self {
            ThresholdReport::Single { pi2, .. } => Some(*pi2),
            _ => None,
        }
    }

    pub fn switch_count(&self) -> usize {
        match self {
            ThresholdReport::NoSwitch => 0,
            ThresholdReport::Single { .. } => 1,
            ThresholdReport::Multiple(v) => v.len(),
        }
    }
}

/// Indices where adjacent grid points use different policy branches.
pub fn switch_points(regions: &[Region]) -> Vec<usize> {
    regions
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[0] != w[1])
        .map(|(i, _)| i)
        .collect()
}

pub fn extract_threshold(result: &SolveResult) -> ThresholdReport {
    match result.switch_points.as_slice() {
        [] => ThresholdReport::NoSwitch,
        [i] => {
            let p = result.grid.points();
            ThresholdReport::Single {
                index: *i,
                pi2: 0.5 * (p[*i] + p[*i + 1]),
            }
        }
        many => ThresholdReport::Multiple(many.to_vec()),
    }
}

impl FusionProblem {
    pub fn new(sensor: SocialSensor, cost: FusionCostSpec, discount: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&discount) {
            return Err(FusionError::InvalidParameter {
                name: "discount",
                reason: format!("must lie in [0,1), got {discount}"),
            });
        }
        Ok(Self { sensor, cost, discount })
    }

    pub fn sensor(&self) -> &SocialSensor {
        &self.sensor
    }

    pub fn cost(&self) -> &FusionCostSpec {
        &self.cost
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn stage_cost(&self, belief: &Belief, incentive: f64, region: Region) -> f64 {
        stage_cost(&self.cost, belief, incentive, region)
    }

    /// Candidate incentives at a belief. Ties in the minimization go to the
    /// earliest candidate, so zero is preferred.
    pub fn candidates(&self, thresholds: &IncentiveThresholds) -> Vec<f64> {
        let mut c = vec![0.0, thresholds.learning_incentive(), thresholds.herding_incentive()];
        if !self.cost.is_linear() {
            let last = (ENTROPY_SEARCH_POINTS - 1) as f64;
            c.extend((0..ENTROPY_SEARCH_POINTS).map(|i| i as f64 / last));
        }
        c
    }

    fn node(&self, grid: &BeliefGrid, index: usize, belief: Belief) -> Node {
        let model = self.sensor.model();
        let mut sigma = [0.0; 2];
        let mut eta = [(0, 0.0); 2];
        for y in Symbol::ALL {
            sigma[y.index()] = observation_probability(&belief, y, model);
            let post = private_update(&belief, y, model).unwrap_or(belief);
            eta[y.index()] = grid.locate(post.p2());
        }
        Node {
            index,
            belief,
            thresholds: self.sensor.thresholds(&belief),
            sigma,
            eta,
        }
    }

    fn nodes(&self, grid: &BeliefGrid) -> Vec<Node> {
        (0..grid.len())
            .into_par_iter()
            .map(|i| self.node(grid, i, grid.belief(i)))
            .collect()
    }

    /// `Q` at a node, where `stay` is the value of remaining at the node's belief.
    fn q_node(&self, values: &[f64], node: &Node, stay: f64, incentive: f64) -> (f64, Region) {
        let region = node.thresholds.region(incentive);
        let continuation = if region.is_learning() {
            let [(i1, w1), (i2, w2)] = node.eta;
            node.sigma[0] * lerp(values, i1, w1) + node.sigma[1] * lerp(values, i2, w2)
        } else {
            stay
        };
        (self.stage_cost(&node.belief, incentive, region) + self.discount * continuation, region)
    }

    /// `Q(π, p)` for an arbitrary belief with `V` given on `grid`.
    pub fn q_value(&self, values: &[f64], grid: &BeliefGrid, belief: &Belief, incentive: f64) -> f64 {
        let node = self.node(grid, 0, *belief);
        self.q_node(values, &node, grid.interpolate(values, belief.p2()), incentive).0
    }

    fn greedy(&self, values: &[f64], node: &Node) -> (f64, f64, Region) {
        let stay = values[node.index];
        let mut best = (f64::INFINITY, 0.0, Region::P3);
        for p in self.candidates(&node.thresholds) {
            let (q, region) = self.q_node(values, node, stay, p);
            if q < best.0 {
                best = (q, p, region);
            }
        }
        best
    }

    fn sweep(&self, values: &[f64], nodes: &[Node]) -> (Vec<f64>, Vec<f64>, Vec<Region>) {
        let out: Vec<(f64, f64, Region)> = nodes.par_iter().map(|n| self.greedy(values, n)).collect();
        let mut v = Vec::with_capacity(out.len());
        let mut p = Vec::with_capacity(out.len());
        let mut r = Vec::with_capacity(out.len());
        for (q, inc, reg) in out {
            v.push(q);
            p.push(inc);
            r.push(reg);
        }
        (v, p, r)
    }

    /// One application of the Bellman operator; returns the new values and
    /// the greedy incentives.
    pub fn bellman_backup(&self, values: &[f64], grid: &BeliefGrid) -> (Vec<f64>, Vec<f64>) {
        let (v, p, _) = self.sweep(values, &self.nodes(grid));
        (v, p)
    }

    /// Value iteration from `V ≡ 0`.
    pub fn value_iterate(&self, grid: &BeliefGrid, settings: &SolverSettings) -> Result<SolveResult> {
        let nodes = self.nodes(grid);
        let mut value = vec![0.0; grid.len()];
        let mut policy = vec![0.0; grid.len()];
        let mut regions = vec![Region::P3; grid.len()];
        let mut history = Vec::new();
        let mut checkpoint = None;
        // Value, policy, regions, iteration and residual at first convergence.
        let mut converged: Option<Snapshot> = None;
        let want_checkpoint = settings.checkpoint.filter(|&c| c <= settings.max_iters);

        for it in 1..=settings.max_iters {
            let (v, p, r) = self.sweep(&value, &nodes);
            if let Some(index) = v.iter().position(|x| !x.is_finite()) {
                return Err(FusionError::NonFinite { index, iteration: it });
            }
            let residual = v.iter().zip(&value).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            history.push(residual);
            value = v;
            policy = p;
            regions = r;
            if Some(it) == want_checkpoint {
                checkpoint = Some(Checkpoint {
                    iterations: it,
                    residual,
                    value: value.clone(),
                    policy: policy.clone(),
                    switch_points: switch_points(&regions),
                    regions: regions.clone(),
                });
            }
            if converged.is_none() && residual < settings.tolerance {
                converged = Some((value.clone(), policy.clone(), regions.clone(), it, residual));
            }
            if converged.is_some() && want_checkpoint.is_none_or(|c| it >= c) {
                break;
            }
        }

        let (value, policy, regions, iterations, residual, converged) = match converged {
            Some((v, p, r, it, res)) => (v, p, r, it, res, true),
            None => {
                let res = history.last().copied().unwrap_or(0.0);
                (value, policy, regions, history.len(), res, false)
            }
        };
        history.truncate(iterations);
        Ok(SolveResult {
            grid: grid.clone(),
            switch_points: switch_points(&regions),
            value,
            policy,
            regions,
            iterations,
            residual,
            converged,
            residual_history: history,
            checkpoint,
        })
    }

    fn policy_sweep(&self, values: &[f64], nodes: &[Node], incentives: &[f64]) -> Vec<f64> {
        nodes
            .par_iter()
            .map(|n| self.q_node(values, n, values[n.index], incentives[n.index]).0)
            .collect()
    }

    fn check_policy(grid: &BeliefGrid, incentives: &[f64]) -> Result<()> {
        if incentives.len() != grid.len() {
            return Err(FusionError::InvalidParameter {
                name: "policy",
                reason: format!("expected {} incentives, got {}", grid.len(), incentives.len()),
            });
        }
        if let Some(p) = incentives.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(FusionError::InvalidParameter {
                name: "policy",
                reason: format!("incentive {p} lies outside [0,1]"),
            });
        }
        Ok(())
    }

    /// Discounted cost of a fixed grid policy, iterated to `tolerance`.
    pub fn evaluate_policy(
        &self,
        grid: &BeliefGrid,
        incentives: &[f64],
        tolerance: f64,
        max_iters: usize,
    ) -> Result<Vec<f64>> {
        Self::check_policy(grid, incentives)?;
        let nodes = self.nodes(grid);
        let mut w = vec![0.0; grid.len()];
        for it in 1..=max_iters {
            let next = self.policy_sweep(&w, &nodes, incentives);
            if let Some(index) = next.iter().position(|x| !x.is_finite()) {
                return Err(FusionError::NonFinite { index, iteration: it });
            }
            let residual = next.iter().zip(&w).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            w = next;
            if residual < tolerance {
                break;
            }
        }
        Ok(w)
    }

    /// Expected cost of the first `steps` stages under a fixed grid policy.
    pub fn evaluate_policy_truncated(&self, grid: &BeliefGrid, incentives: &[f64], steps: usize) -> Result<Vec<f64>> {
        Self::check_policy(grid, incentives)?;
        let nodes = self.nodes(grid);
        let mut w = vec![0.0; grid.len()];
        for _ in 0..steps {
            w = self.policy_sweep(&w, &nodes, incentives);
        }
        Ok(w)
    }

    /// The always-learn policy `μ_c(π) = Δ(η_{y=2})` on the grid.
    pub fn consistency_incentives(&self, grid: &BeliefGrid) -> Vec<f64> {
        (0..grid.len())
            .map(|i| self.sensor.thresholds(&grid.belief(i)).learning_incentive())
            .collect()
    }

    /// Zero below `threshold` in `π(2)`, `Δ(η_{y=2})` at and above it.
    pub fn threshold_incentives(&self, grid: &BeliefGrid, threshold: f64) -> Vec<f64> {
        (0..grid.len())
            .map(|i| {
                if grid.points()[i] < threshold {
                    0.0
                } else {
                    self.sensor.thresholds(&grid.belief(i)).learning_incentive()
                }
            })
            .collect()
    }
}

/// Upper bound on `sup_π (W_{μ_c}(π) − J_{μ*}(π))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostBound {
    /// `f64::INFINITY` when `infinite` is set.
    pub value: f64,
    pub infinite: bool,
}

/// `2 (1−φ_s)/(1−ρ) · e^{2d²}/(e^{2d²} − 1)` with `d = π_s*(1) − B₂₁`.
pub fn consistency_cost_bound(phi_s: f64, discount: f64, pi_star_1: f64, b21: f64) -> Result<CostBound> {
    if !(0.0..1.0).contains(&discount) {
        return Err(FusionError::InvalidParameter {
            name: "discount",
            reason: format!("must lie in [0,1), got {discount}"),
        });
    }
    let d = pi_star_1 - b21;
    let scale = 2.0 * (1.0 - phi_s) / (1.0 - discount);
    if d == 0.0 {
        return Ok(CostBound {
            value: f64::INFINITY,
            infinite: true,
        });
    }
    // e^x / (e^x − 1) = 1 / (1 − e^{−x}), stable for large x.
    let x = 2.0 * d * d;
    let value = scale / -(-x).exp_m1();
    Ok(CostBound {
        value,
        infinite: !value.is_finite(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::ObservationModel;
    use crate::sensor::{calibrate_observation_model, RewardParams};
    use approx::assert_abs_diff_eq;

    fn problem(phi_s: f64, rho: f64) -> FusionProblem {
        let params = RewardParams::baseline();
        let model = calibrate_observation_model(&params).unwrap();
        let sensor = SocialSensor::new(params, model).unwrap();
        FusionProblem::new(sensor, FusionCostSpec::linear(phi_s).unwrap(), rho).unwrap()
    }

    #[test]
    fn stage_cost_examples() {
        let lin = FusionCostSpec::linear(0.4).unwrap();
        assert_abs_diff_eq!(stage_cost(&lin, &Belief::UNIFORM, 0.25, Region::P2), -0.15, epsilon = 1e-15);
        assert_eq!(stage_cost(&lin, &Belief::UNIFORM, 0.0, Region::P3), 0.0);
        let ent = FusionCostSpec::entropy(0.25, EntropyWeight::quadratic()).unwrap();
        assert_abs_diff_eq!(stage_cost(&ent, &Belief::UNIFORM, 0.0, Region::P3), -0.15, epsilon = 1e-15);
        assert_eq!(stage_cost(&ent, &Belief::E2, 0.0, Region::P3), 0.0);
    }

    #[test]
    fn cost_spec_validation() {
        assert!(FusionCostSpec::linear(0.0).is_err());
        assert!(FusionCostSpec::linear(1.0).is_err());
        assert!(FusionCostSpec::entropy(1.5, EntropyWeight::quadratic()).is_err());
        assert!(EntropyWeight::tabulated(vec![0.5, 0.2], vec![1.0, 2.0]).is_err());
        assert!(EntropyWeight::tabulated(vec![0.0], vec![]).is_err());
    }

    #[test]
    fn entropy_weight_families() {
        let b = |x: f64| Belief::from_p2(x).unwrap();
        assert_abs_diff_eq!(EntropyWeight::quadratic().eval(&b(0.5)), -0.15, epsilon = 1e-15);
        let two = EntropyWeight::two_level();
        assert_eq!(two.eval(&b(0.5)), 0.6);
        assert_eq!(two.eval(&b(0.75)), 0.0);
        assert_eq!(two.eval(&b(0.9)), -0.35);
        let tab = EntropyWeight::tabulated(vec![0.0, 0.5, 1.0], vec![0.0, 1.0, 3.0]).unwrap();
        assert_abs_diff_eq!(tab.eval(&b(0.25)), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(tab.eval(&b(0.75)), 2.0, epsilon = 1e-15);
        assert_eq!(tab.eval(&b(1.0)), 3.0);
    }

    #[test]
    fn grid_layout_and_interpolation() {
        let g = BeliefGrid::new(5).unwrap();
        assert_eq!(g.points(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!(BeliefGrid::new(1).is_err());
        let v = [0.0, 1.0, 2.0, 3.0, 4.0];
        assert_abs_diff_eq!(g.interpolate(&v, 0.6), 2.4, epsilon = 1e-12);
        assert_eq!(g.interpolate(&v, 1.0), 4.0);
        assert_eq!(g.locate(1.0), (3, 1.0));
        assert_eq!(g.nearest(0.3), 1);
    }

    #[test]
    fn q_value_examples() {
        let prob = problem(0.4, 0.4);
        let grid = BeliefGrid::new(11).unwrap();
        let zero = vec![0.0; 11];
        assert_abs_diff_eq!(prob.q_value(&zero, &grid, &Belief::E2, 0.0), -0.4, epsilon = 1e-12);
        assert_eq!(prob.q_value(&zero, &grid, &Belief::UNIFORM, 0.0), 0.0);
        let c = vec![2.5; 11];
        let b = Belief::from_p2(0.3).unwrap();
        assert_abs_diff_eq!(prob.q_value(&c, &grid, &b, 1.0), 1.0 + 0.4 * 2.5, epsilon = 1e-12);
    }

    #[test]
    fn backup_examples() {
        let prob = problem(0.4, 0.4);
        let grid = BeliefGrid::new(101).unwrap();
        let (v, p) = prob.bellman_backup(&vec![0.0; 101], &grid);
        assert_abs_diff_eq!(v[100], -0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(p[100], 0.0, epsilon = 1e-12);
        assert_eq!(v[0], 0.0);
        assert_eq!(p[0], 0.0);

        let eager = problem(0.999, 0.4);
        let (_, p) = eager.bellman_backup(&vec![0.0; 101], &grid);
        // Skip e1, where Δ(η₂) = 1 and learning is not worth paying for.
        for (i, &pi) in p.iter().enumerate().take(100).skip(1) {
            let t = eager.sensor().thresholds(&grid.belief(i));
            assert_eq!(pi, t.learning_incentive(), "grid point {i}");
        }
    }

    #[test]
    fn tiny_grid_corner_values() {
        let prob = problem(0.4, 0.4);
        let grid = BeliefGrid::new(2).unwrap();
        let res = prob.value_iterate(&grid, &SolverSettings::default()).unwrap();
        assert_abs_diff_eq!(res.value[0], 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(res.value[1], -0.4 / 0.6, epsilon = 1e-9);
    }

    #[test]
    fn checkpoint_is_recorded_after_convergence() {
        let prob = problem(0.4, 0.4);
        let grid = BeliefGrid::new(51).unwrap();
        let res = prob.value_iterate(&grid, &SolverSettings::default()).unwrap();
        assert!(res.converged);
        assert!(res.iterations < PAPER_ITERATIONS);
        assert_eq!(res.residual_history.len(), res.iterations);
        let cp = res.checkpoint.as_ref().unwrap();
        assert_eq!(cp.iterations, PAPER_ITERATIONS);
        for (a, b) in cp.value.iter().zip(&res.value) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn threshold_extraction_cases() {
        let grid = BeliefGrid::new(4).unwrap();
        let mk = |regions: Vec<Region>| SolveResult {
            grid: grid.clone(),
            value: vec![0.0; 4],
            policy: vec![0.0; 4],
            switch_points: switch_points(&regions),
            regions,
            iterations: 0,
            residual: 0.0,
            converged: true,
            residual_history: vec![],
            checkpoint: None,
        };
        assert_eq!(extract_threshold(&mk(vec![Region::P3; 4])), ThresholdReport::NoSwitch);
        let single = extract_threshold(&mk(vec![Region::P3, Region::P3, Region::P2, Region::P2]));
        assert_eq!(single.switch_count(), 1);
        assert_abs_diff_eq!(single.threshold().unwrap(), 0.5, epsilon = 1e-15);
        let multi = extract_threshold(&mk(vec![Region::P3, Region::P2, Region::P3, Region::P2]));
        assert_eq!(multi, ThresholdReport::Multiple(vec![0, 1, 2]));
    }

    #[test]
    fn consistency_policy_corners() {
        let prob = problem(0.4, 0.4);
        let grid = BeliefGrid::new(201).unwrap();
        let mu_c = prob.consistency_incentives(&grid);
        let w = prob.evaluate_policy(&grid, &mu_c, 1e-12, 10_000).unwrap();
        assert_abs_diff_eq!(w[200], -0.4 / 0.6, epsilon = 1e-9);
        assert_abs_diff_eq!(w[0], 0.6 / 0.6, epsilon = 1e-9);
        let zero = prob.evaluate_policy(&grid, &vec![0.0; 201], 1e-12, 10_000).unwrap();
        // Zero incentives herd everywhere except at e2, where Δ(η₂) = 0.
        assert!(zero[..200].iter().all(|&x| x == 0.0));
        assert!(prob.evaluate_policy(&grid, &vec![1.5; 201], 1e-9, 10).is_err());
    }

    #[test]
    fn truncated_evaluation_is_a_partial_sum() {
        let prob = problem(0.4, 0.4);
        let grid = BeliefGrid::new(101).unwrap();
        let mu_c = prob.consistency_incentives(&grid);
        let w1 = prob.evaluate_policy_truncated(&grid, &mu_c, 1).unwrap();
        assert_abs_diff_eq!(w1[100], -0.4, epsilon = 1e-12);
        assert_eq!(prob.evaluate_policy_truncated(&grid, &mu_c, 0).unwrap(), vec![0.0; 101]);
    }

    #[test]
    fn bound_examples() {
        let b = consistency_cost_bound(0.4, 0.4, 0.9, 0.4).unwrap();
        let e = 0.5f64.exp();
        assert_abs_diff_eq!(b.value, 2.0 * e / (e - 1.0), epsilon = 1e-12);
        assert_abs_diff_eq!(b.value, 5.083, epsilon = 2e-4);
        assert!(consistency_cost_bound(0.4, 0.4, 0.4, 0.4).unwrap().infinite);
        assert!(consistency_cost_bound(0.999_999, 0.4, 0.9, 0.4).unwrap().value < 1e-4);
        let far = consistency_cost_bound(0.4, 0.4, 10.0, 0.4).unwrap();
        assert_abs_diff_eq!(far.value, 2.0, epsilon = 1e-12);
        assert!(consistency_cost_bound(0.4, 1.0, 0.9, 0.4).is_err());
    }

    #[test]
    fn rejects_bad_discount() {
        let params = RewardParams::baseline();
        let model = ObservationModel::new([[0.8, 0.2], [0.4, 0.6]]).unwrap();
        let sensor = SocialSensor::new(params, model).unwrap();
        assert!(FusionProblem::new(sensor, FusionCostSpec::linear(0.4).unwrap(), 1.0).is_err());
    }
}
