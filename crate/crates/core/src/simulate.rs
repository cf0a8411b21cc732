//! Sample paths of the controlled social learning protocol.
//!
//! At step `k` the fusion center first posts `p_k = μ(π_{k−1})`; only then is
//! the sensor's observation `y_k` drawn. The sensor reports according to the
//! region the incentive induces, and the public belief is updated by the
//! social learning filter with that region's decision likelihood.
//!
//! Path `i` of a run with base seed `s` uses ChaCha8 seeded from `s` on
//! stream `i`, so adding paths never changes the earlier ones.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::belief::{social_filter, Belief, Symbol};
use crate::error::{FusionError, Result};
use crate::sensor::{Region, SocialSensor};
use crate::solver::{BeliefGrid, FusionProblem, SolveResult};
use crate::stats::{binomial_se, RunningStats};

/// Largest horizon [`brute_force_cost`] will enumerate.
pub const MAX_ENUMERATION_HORIZON: usize = 12;

/// Generator for path `index` of a run seeded with `base_seed`.
pub fn path_rng(base_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(index);
    rng
}

/// Policy branch stored at a grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum GridBranch {
    Zero,
    /// `Δ(η_{y=2})` at the current belief.
    Learning,
    /// `Δ(η_{y=1})` at the current belief.
    Herding,
    Fixed(f64),
}

/// A solved policy, evaluated off-grid with the nearest grid point's branch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridPolicy {
    grid: BeliefGrid,
    branches: Vec<GridBranch>,
}

impl GridPolicy {
    pub fn new(grid: BeliefGrid, branches: Vec<GridBranch>) -> Result<Self> {
        if grid.len() != branches.len() {
            return Err(FusionError::InvalidParameter {
                name: "policy",
                reason: format!("{} branches for {} grid points", branches.len(), grid.len()),
            });
        }
        Ok(Self { grid, branches })
    }

    pub fn from_solve(sensor: &SocialSensor, result: &SolveResult) -> Self {
        let branches = (0..result.grid.len())
            .map(|i| {
                let t = sensor.thresholds(&result.grid.belief(i));
                let p = result.policy[i];
                match result.regions[i] {
                    Region::P3 if p == 0.0 => GridBranch::Zero,
                    Region::P2 if p == t.learning_incentive() => GridBranch::Learning,
                    Region::P1 if p == t.herding_incentive() => GridBranch::Herding,
                    _ => GridBranch::Fixed(p),
                }
            })
            .collect();
        Self {
            grid: result.grid.clone(),
            branches,
        }
    }

    pub fn branches(&self) -> &[GridBranch] {
        &self.branches
    }
}

/// Incentive policy of the fusion center.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum PolicySpec {
    Zero,
    /// Zero for `π(2)` below the threshold, `Δ(η_{y=2})` from it on.
    Threshold { pi2: f64 },
    /// `Δ(η_{y=2})` everywhere, keeping every sensor in the learning region.
    Consistency,
    Grid(GridPolicy),
}

impl PolicySpec {
    pub fn label(&self) -> &'static str {
        match self {
            PolicySpec::Zero => "zero",
            PolicySpec::Threshold { .. } => "threshold",
            PolicySpec::Consistency => "consistency",
            PolicySpec::Grid(_) => "grid",
        }
    }

    pub fn incentive(&self, sensor: &SocialSensor, belief: &Belief) -> f64 {
        let learning = || sensor.thresholds(belief).learning_incentive();
        match self {
            PolicySpec::Zero => 0.0,
            PolicySpec::Threshold { pi2 } => {
                if belief.p2() < *pi2 {
                    0.0
                } else {
                    learning()
                }
            }
            PolicySpec::Consistency => learning(),
            PolicySpec::Grid(g) => match g.branches[g.grid.nearest(belief.p2())] {
                GridBranch::Zero => 0.0,
                GridBranch::Learning => learning(),
                GridBranch::Herding => sensor.thresholds(belief).herding_incentive(),
                GridBranch::Fixed(p) => p,
            },
        }
    }

    /// The policy tabulated on `grid`, for grid-based evaluation.
    pub fn on_grid(&self, sensor: &SocialSensor, grid: &BeliefGrid) -> Vec<f64> {
        (0..grid.len()).map(|i| self.incentive(sensor, &grid.belief(i))).collect()
    }
}

/// How the true state of a path is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum StateDraw {
    FromPrior,
    Fixed(Symbol),
}

/// One realized sample path. Step `k` (1-based) is stored at index `k−1`;
/// `beliefs` additionally holds the prior at index 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub true_state: Symbol,
    pub beliefs: Vec<Belief>,
    pub incentives: Vec<f64>,
    pub observations: Vec<Symbol>,
    pub actions: Vec<Symbol>,
    pub stage_costs: Vec<f64>,
    pub regions: Vec<Region>,
    /// Raw `I(a_k = y_k)`, kept apart from the region-based indicator used in
    /// the stage cost.
    pub truthful: Vec<bool>,
}

impl Trajectory {
    fn start(true_state: Symbol, prior: Belief, horizon: usize) -> Self {
        let mut beliefs = Vec::with_capacity(horizon + 1);
        beliefs.push(prior);
        Self {
            true_state,
            beliefs,
            incentives: Vec::with_capacity(horizon),
            observations: Vec::with_capacity(horizon),
            actions: Vec::with_capacity(horizon),
            stage_costs: Vec::with_capacity(horizon),
            regions: Vec::with_capacity(horizon),
            truthful: Vec::with_capacity(horizon),
        }
    }

    pub fn horizon(&self) -> usize {
        self.incentives.len()
    }

    /// `Σ_{k≥1} ρ^{k−1} c_k`.
    pub fn discounted_cost(&self, discount: f64) -> f64 {
        let mut weight = 1.0;
        let mut total = 0.0;
        for c in &self.stage_costs {
            total += weight * c;
            weight *= discount;
        }
        total
    }
}

/// The posted incentive for the next step, computed from the public belief alone.
fn post_incentive(problem: &FusionProblem, policy: &PolicySpec, traj: &Trajectory) -> f64 {
    let belief = traj.beliefs.last().expect("trajectory holds the prior");
    policy.incentive(problem.sensor(), belief)
}

/// Complete step `k` once `y_k` is known.
fn advance(problem: &FusionProblem, traj: &mut Trajectory, incentive: f64, obs: Symbol) -> Result<()> {
    let sensor = problem.sensor();
    let belief = *traj.beliefs.last().expect("trajectory holds the prior");
    let region = sensor.classify_region(incentive, &belief);
    let action = region.decision(obs);
    let likelihood = sensor.decision_likelihood(incentive, &belief);
    let (next, _) = social_filter(&belief, action, &likelihood)?;
    traj.stage_costs.push(problem.stage_cost(&belief, incentive, region));
    traj.incentives.push(incentive);
    traj.observations.push(obs);
    traj.actions.push(action);
    traj.regions.push(region);
    traj.truthful.push(action == obs);
    traj.beliefs.push(next);
    Ok(())
}

/// Run the protocol on a fixed true state and observation sequence.
pub fn drive(
    problem: &FusionProblem,
    policy: &PolicySpec,
    prior: &Belief,
    true_state: Symbol,
    observations: &[Symbol],
) -> Result<Trajectory> {
    let mut traj = Trajectory::start(true_state, *prior, observations.len());
    for &y in observations {
        let p = post_incentive(problem, policy, &traj);
        advance(problem, &mut traj, p, y)?;
    }
    Ok(traj)
}

fn draw_symbol(rng: &mut ChaCha8Rng, p_one: f64) -> Symbol {
    if rng.gen::<f64>() < p_one {
        Symbol::One
    } else {
        Symbol::Two
    }
}

/// Path `path_index` of a run seeded with `base_seed`.
pub fn simulate_path(
    problem: &FusionProblem,
    policy: &PolicySpec,
    prior: &Belief,
    horizon: usize,
    state: StateDraw,
    base_seed: u64,
    path_index: u64,
) -> Result<Trajectory> {
    let mut rng = path_rng(base_seed, path_index);
    let true_state = match state {
        StateDraw::FromPrior => draw_symbol(&mut rng, prior.p1()),
        StateDraw::Fixed(s) => s,
    };
    let model = problem.sensor().model();
    let mut traj = Trajectory::start(true_state, *prior, horizon);
    for _ in 0..horizon {
        let p = post_incentive(problem, policy, &traj);
        let y = draw_symbol(&mut rng, model.prob(true_state, Symbol::One));
        advance(problem, &mut traj, p, y)?;
    }
    Ok(traj)
}

/// `paths` independent paths, in path order.
pub fn simulate_paths(
    problem: &FusionProblem,
    policy: &PolicySpec,
    prior: &Belief,
    horizon: usize,
    state: StateDraw,
    paths: usize,
    base_seed: u64,
) -> Result<Vec<Trajectory>> {
    (0..paths as u64)
        .into_par_iter()
        .map(|i| simulate_path(problem, policy, prior, horizon, state, base_seed, i))
        .collect()
}

/// Exact expected discounted cost of the first `horizon` stages, by
/// enumerating the true state and every observation sequence.
pub fn brute_force_cost(problem: &FusionProblem, policy: &PolicySpec, prior: &Belief, horizon: usize) -> Result<f64> {
    if horizon > MAX_ENUMERATION_HORIZON {
        return Err(FusionError::InvalidParameter {
            name: "horizon",
            reason: format!("enumeration supports at most {MAX_ENUMERATION_HORIZON} steps, got {horizon}"),
        });
    }
    let model = problem.sensor().model();
    let mut total = 0.0;
    for theta in Symbol::ALL {
        let p_theta = prior.mass(theta);
        if p_theta == 0.0 {
            continue;
        }
        for code in 0..(1u32 << horizon) {
            let ys: Vec<Symbol> = (0..horizon)
                .map(|k| if code >> k & 1 == 0 { Symbol::One } else { Symbol::Two })
                .collect();
            let weight: f64 = p_theta * ys.iter().map(|&y| model.prob(theta, y)).product::<f64>();
            if weight == 0.0 {
                continue;
            }
            total += weight * drive(problem, policy, prior, theta, &ys)?.discounted_cost(problem.discount());
        }
    }
    Ok(total)
}

/// Monte Carlo estimate of the discounted cost; one sample per path.
pub fn monte_carlo_cost(
    problem: &FusionProblem,
    policy: &PolicySpec,
    prior: &Belief,
    horizon: usize,
    paths: usize,
    base_seed: u64,
) -> Result<RunningStats> {
    let costs: Vec<f64> = (0..paths as u64)
        .into_par_iter()
        .map(|i| {
            simulate_path(problem, policy, prior, horizon, StateDraw::FromPrior, base_seed, i)
                .map(|t| t.discounted_cost(problem.discount()))
        })
        .collect::<Result<_>>()?;
    Ok(costs.into_iter().collect())
}

/// Smallest `N` with `ρ^N (1 + φ)/(1 − ρ) < tol`, bounding the discounted
/// tail of stage costs no larger than `1 + φ` in magnitude.
pub fn truncation_horizon(discount: f64, weight: f64, tol: f64) -> usize {
    let scale = (1.0 + weight) / (1.0 - discount);
    let mut n = 0;
    let mut tail = scale;
    while tail >= tol {
        tail *= discount;
        n += 1;
    }
    n
}

/// Per-step summary over a set of paths.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepSummary {
    pub step: usize,
    pub incentive: RunningStats,
    /// `|π_k(2) − g(θ)(2)|`.
    pub belief_error: RunningStats,
    /// Fractions of paths in P1, P2, P3 at this step.
    pub region_freq: [f64; 3],
    pub truthful_freq: f64,
}

pub fn summarize_paths(paths: &[Trajectory]) -> Vec<StepSummary> {
    let horizon = paths.iter().map(Trajectory::horizon).min().unwrap_or(0);
    let n = paths.len() as f64;
    (0..horizon)
        .map(|k| {
            let mut counts = [0usize; 3];
            let mut truthful = 0usize;
            for t in paths {
                counts[t.regions[k].index()] += 1;
                truthful += t.truthful[k] as usize;
            }
            StepSummary {
                step: k + 1,
                incentive: paths.iter().map(|t| t.incentives[k]).collect(),
                belief_error: paths
                    .iter()
                    .map(|t| (t.beliefs[k + 1].p2() - Belief::point_mass(t.true_state).p2()).abs())
                    .collect(),
                region_freq: counts.map(|c| c as f64 / n),
                truthful_freq: truthful as f64 / n,
            }
        })
        .collect()
}

/// Across-path statistics of the incentive sequence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubmartingaleReport {
    /// `p_{k+1} − p_k` for `k = 1..N−1`, at index `k−1`.
    pub increments: Vec<RunningStats>,
    /// `p_k` for `k = 1..N`.
    pub incentives: Vec<RunningStats>,
    /// Running average `(1/k) Σ_{j≤k} p̄_j` of the across-path mean incentive.
    pub cumulative_mean: Vec<f64>,
    /// Smallest mean increment and the step where it occurs.
    pub min_increment: f64,
    pub min_increment_step: usize,
    /// `min_k (mean_k + z·SE_k)`; non-negative when every step passes the
    /// one-sided check at `z` standard errors.
    pub min_margin: f64,
}

pub fn submartingale_stats(paths: &[Trajectory], z: f64) -> Result<SubmartingaleReport> {
    if paths.len() < 2 {
        return Err(FusionError::InvalidParameter {
            name: "paths",
            reason: "need at least two paths".into(),
        });
    }
    let horizon = paths.iter().map(Trajectory::horizon).min().unwrap_or(0);
    let incentives: Vec<RunningStats> = (0..horizon)
        .map(|k| paths.iter().map(|t| t.incentives[k]).collect())
        .collect();
    let increments: Vec<RunningStats> = (0..horizon.saturating_sub(1))
        .map(|k| paths.iter().map(|t| t.incentives[k + 1] - t.incentives[k]).collect())
        .collect();
    let mut running = 0.0;
    let cumulative_mean = incentives
        .iter()
        .enumerate()
        .map(|(k, s)| {
            running += s.mean();
            running / (k + 1) as f64
        })
        .collect();
    let (mut min_increment, mut min_increment_step, mut min_margin) = (f64::INFINITY, 0, f64::INFINITY);
    for (k, s) in increments.iter().enumerate() {
        if s.mean() < min_increment {
            min_increment = s.mean();
            min_increment_step = k + 1;
        }
        min_margin = min_margin.min(s.mean() + z * s.std_error());
    }
    Ok(SubmartingaleReport {
        increments,
        incentives,
        cumulative_mean,
        min_increment,
        min_increment_step,
        min_margin,
    })
}

/// Empirical consistency curves for paths with a common true state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyReport {
    pub true_state: Symbol,
    pub epsilon: f64,
    pub threshold_pi2: f64,
    pub paths: usize,
    /// `P(|π_k(2) − g(θ)(2)| > ε)` for `k = 1..N`.
    pub divergence: Vec<f64>,
    /// `P(π_k(2) ≤ π_s*(2))`.
    pub in_low_region: Vec<f64>,
    /// `e^{−2k(π_s*(1) − B_{θ1})²}`.
    pub envelope: Vec<f64>,
}

impl ConsistencyReport {
    /// Steps where the low-region frequency exceeds the envelope by more
    /// than `z` binomial standard errors.
    pub fn envelope_violations(&self, z: f64) -> Vec<usize> {
        self.in_low_region
            .iter()
            .zip(&self.envelope)
            .enumerate()
            .filter(|(_, (p, env))| **p > **env + z * binomial_se(**p, self.paths as u64))
            .map(|(k, _)| k + 1)
            .collect()
    }
}

/// `e^{−2k(π_s*(1) − B_{θ1})²}`.
pub fn hoeffding_envelope(k: usize, pi_star_1: f64, b_theta1: f64) -> f64 {
    let d = pi_star_1 - b_theta1;
    (-2.0 * k as f64 * d * d).exp()
}

pub fn consistency_stats(
    paths: &[Trajectory],
    sensor: &SocialSensor,
    epsilon: f64,
    threshold_pi2: f64,
) -> Result<ConsistencyReport> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(FusionError::InvalidParameter {
            name: "epsilon",
            reason: format!("must lie in (0,1), got {epsilon}"),
        });
    }
    let Some(first) = paths.first() else {
        return Err(FusionError::InvalidParameter {
            name: "paths",
            reason: "need at least one path".into(),
        });
    };
    let theta = first.true_state;
    if paths.iter().any(|t| t.true_state != theta) {
        return Err(FusionError::InvalidParameter {
            name: "paths",
            reason: "consistency statistics need a common true state".into(),
        });
    }
    let target = Belief::point_mass(theta).p2();
    let horizon = paths.iter().map(Trajectory::horizon).min().unwrap_or(0);
    let n = paths.len() as f64;
    let freq = |pred: &dyn Fn(&Belief) -> bool, k: usize| {
        paths.iter().filter(|t| pred(&t.beliefs[k])).count() as f64 / n
    };
    let b_theta1 = sensor.model().prob(theta, Symbol::One);
    Ok(ConsistencyReport {
        true_state: theta,
        epsilon,
        threshold_pi2,
        paths: paths.len(),
        divergence: (1..=horizon).map(|k| freq(&|b| (b.p2() - target).abs() > epsilon, k)).collect(),
        in_low_region: (1..=horizon).map(|k| freq(&|b| b.p2() <= threshold_pi2, k)).collect(),
        envelope: (1..=horizon)
            .map(|k| hoeffding_envelope(k, 1.0 - threshold_pi2, b_theta1))
            .collect(),
    })
}

/// Paired Monte Carlo comparison of two policies from one start.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapRow {
    pub start_pi2: f64,
    pub consistency_cost: RunningStats,
    pub optimal_cost: RunningStats,
    /// Per-path difference under common random numbers.
    pub gap: RunningStats,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostGapReport {
    pub horizon: usize,
    pub rows: Vec<GapRow>,
    pub max_gap: f64,
    pub max_gap_se: f64,
    pub max_gap_start: f64,
}

/// `Ŵ_{μ_c} − Ĵ_{μ*}` from each start in `starts`, using the same seeds for
/// both policies.
pub fn empirical_cost_gap(
    problem: &FusionProblem,
    optimal: &PolicySpec,
    starts: &[f64],
    paths: usize,
    horizon: usize,
    base_seed: u64,
) -> Result<CostGapReport> {
    let rho = problem.discount();
    let mut rows = Vec::with_capacity(starts.len());
    for (s, &pi2) in starts.iter().enumerate() {
        let prior = Belief::from_p2(pi2)?;
        let seed = base_seed.wrapping_add(s as u64);
        let pairs: Vec<(f64, f64)> = (0..paths as u64)
            .into_par_iter()
            .map(|i| {
                let c = simulate_path(problem, &PolicySpec::Consistency, &prior, horizon, StateDraw::FromPrior, seed, i)?;
                let o = simulate_path(problem, optimal, &prior, horizon, StateDraw::FromPrior, seed, i)?;
                Ok((c.discounted_cost(rho), o.discounted_cost(rho)))
            })
            .collect::<Result<_>>()?;
        rows.push(GapRow {
            start_pi2: pi2,
            consistency_cost: pairs.iter().map(|p| p.0).collect(),
            optimal_cost: pairs.iter().map(|p| p.1).collect(),
            gap: pairs.iter().map(|p| p.0 - p.1).collect(),
        });
    }
    let best = rows
        .iter()
        .max_by(|a, b| a.gap.mean().total_cmp(&b.gap.mean()))
        .ok_or(FusionError::InvalidParameter {
            name: "starts",
            reason: "need at least one starting belief".into(),
        })?;
    Ok(CostGapReport {
        horizon,
        max_gap: best.gap.mean(),
        max_gap_se: best.gap.std_error(),
        max_gap_start: best.start_pi2,
        rows,
    })
}

/// Per-step across-path incentive statistics for each `(problem, policy)` pair,
/// all driven by the same seeds.
pub fn averaged_incentives(
    setups: &[(FusionProblem, PolicySpec)],
    prior: &Belief,
    paths: usize,
    horizon: usize,
    base_seed: u64,
) -> Result<Vec<Vec<RunningStats>>> {
    setups
        .iter()
        .map(|(problem, policy)| {
            let trajs = simulate_paths(problem, policy, prior, horizon, StateDraw::FromPrior, paths, base_seed)?;
            Ok((0..horizon).map(|k| trajs.iter().map(|t| t.incentives[k]).collect()).collect())
        })
        .collect()
}

/// Running average of a per-step mean curve.
pub fn cumulative_means(curve: &[RunningStats]) -> Vec<f64> {
    let mut sum = 0.0;
    curve
        .iter()
        .enumerate()
        .map(|(k, s)| {
            sum += s.mean();
            sum / (k + 1) as f64
        })
        .collect()
}
