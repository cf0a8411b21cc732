//! Experiment configuration and the commands behind the `incentive-fusion` binary.
//!
//! Configuration is TOML with one table per concern. Every key is optional;
//! omitted keys fall back to the baseline parameter set with `φ_s = 0.4`,
//! `ρ = 0.4` and a 1000-point grid. Unknown keys are rejected.
//!
//! Outputs are written once, at the end of a command, to the directory chosen
//! by `--out`, then `INCENTIVE_FUSION_OUT`, then `output.directory`, then
//! `./out`. CSV files start with a `#` metadata line carrying the SHA-256 of
//! the effective configuration and the seed, followed by a header row.
//! Numbers use 12 significant digits so that reruns are byte-identical.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::belief::{Belief, ObservationModel, Symbol};
use crate::error::FusionError;
use crate::sensor::{calibrate_observation_model, check_supermodular, coefficients, IncentiveCoefficients, RewardParams, SocialSensor};
use crate::simulate::{
    averaged_incentives, consistency_stats, cumulative_means, empirical_cost_gap, simulate_paths, submartingale_stats,
    summarize_paths, truncation_horizon, GridPolicy, PolicySpec, StateDraw,
};
use crate::solver::{
    consistency_cost_bound, extract_threshold, BeliefGrid, EntropyWeight, FusionCostSpec, FusionProblem, SolveResult,
    SolverSettings, ThresholdReport, PAPER_ITERATIONS,
};

/// Environment variable that overrides the output directory.
pub const OUT_DIR_ENV: &str = "INCENTIVE_FUSION_OUT";

/// Annotation attached to results whose structural hypotheses fail.
pub const OUTSIDE_HYPOTHESES: &str = "outside theorem hypotheses";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("hypothesis violation: {0}")]
    Hypothesis(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Hypothesis(_) => 4,
        }
    }

    /// Attach the config key path (or command) that produced a model error.
    fn from_model(context: &str, err: FusionError) -> Self {
        match err {
            FusionError::NonFinite { .. } | FusionError::ZeroNormalizer(_) | FusionError::Singular(_) => {
                CliError::Numerical(format!("{context}: {err}"))
            }
            _ => CliError::Config(format!("{context}: {err}")),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "incentive-fusion", version, about = "Incentive design for Bayesian social sensors")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML experiment configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides the environment and the config).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub paths: Option<usize>,
    #[arg(long, global = true)]
    pub horizon: Option<usize>,
    /// Exit with code 4 when the TP2 or supermodularity hypothesis fails.
    #[arg(long, global = true)]
    pub strict: bool,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Value iteration: value.csv, policy.csv, threshold.json.
    Solve,
    /// Belief-space boundaries of the learning region per incentive: regions.csv.
    Regions {
        /// Number of incentive values in [0,1].
        #[arg(long)]
        resolution: Option<usize>,
    },
    /// Sample paths: paths_summary.csv, submartingale.csv, avg_incentives.csv.
    Simulate,
    /// Cost of consistency against its analytic bound: bound_report.json.
    Bound,
    /// Recover the observation matrix from reward parameters: calibration.json.
    Calibrate,
    /// Convergence of the public belief under the always-learn policy.
    Consistency,
}

// ---------------------------------------------------------------------------
// Configuration

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub reward: RewardSection,
    pub observation: ObservationSection,
    pub cost: CostSection,
    pub solver: SolverSection,
    pub simulation: SimulationSection,
    pub regions: RegionsSection,
    pub bound: BoundSection,
    pub compare: Vec<CompareSection>,
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardSection {
    pub delta: [f64; 2],
    pub alpha: [f64; 2],
    pub beta: [f64; 2],
    pub gamma: [f64; 2],
    pub enforce_positivity: bool,
}

impl Default for RewardSection {
    fn default() -> Self {
        let t = RewardParams::baseline();
        Self {
            delta: t.delta,
            alpha: t.alpha,
            beta: t.beta,
            gamma: t.gamma,
            enforce_positivity: false,
        }
    }
}

/// `"calibrate"` or an explicit row-stochastic 2×2 matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    Explicit([[f64; 2]; 2]),
    Keyword(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObservationSection {
    pub matrix: MatrixSpec,
}

impl Default for ObservationSection {
    fn default() -> Self {
        Self {
            matrix: MatrixSpec::Keyword("calibrate".into()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostKind {
    Linear,
    Entropy,
}

/// `"quadratic"`, `"two-level"` or `{ pi2 = [...], weight = [...] }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PsiSpec {
    Named(String),
    Table { pi2: Vec<f64>, weight: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CostSection {
    pub kind: CostKind,
    pub phi_s: f64,
    pub phi_e: f64,
    pub psi: PsiSpec,
}

impl Default for CostSection {
    fn default() -> Self {
        Self {
            kind: CostKind::Linear,
            phi_s: 0.4,
            phi_e: 0.25,
            psi: PsiSpec::Named("quadratic".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub discount: f64,
    pub grid_size: usize,
    pub max_iters: usize,
    pub tolerance: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        let s = SolverSettings::default();
        Self {
            discount: 0.4,
            grid_size: crate::solver::DEFAULT_GRID_SIZE,
            max_iters: s.max_iters,
            tolerance: s.tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSection {
    pub paths: usize,
    pub horizon: usize,
    pub seed: u64,
    /// Prior `π₀(2)`.
    pub prior: f64,
    /// `optimal`, `threshold`, `grid`, `zero` or `consistency`.
    pub policy: String,
    /// Fix the true state (1 or 2) instead of drawing it from the prior.
    pub true_state: Option<u8>,
    /// Tolerance in the divergence probability `P(|π_k − g(θ)| > ε)`.
    pub epsilon: f64,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            paths: 100,
            horizon: 500,
            seed: 1,
            prior: 0.5,
            policy: "optimal".into(),
            true_state: None,
            epsilon: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegionsSection {
    pub resolution: usize,
}

impl Default for RegionsSection {
    fn default() -> Self {
        Self { resolution: 101 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundSection {
    /// Starting beliefs `π₀(2)` for the Monte Carlo gap.
    pub starts: Vec<f64>,
    pub paths: usize,
}

impl Default for BoundSection {
    fn default() -> Self {
        Self {
            starts: vec![0.05, 0.2, 0.35, 0.5, 0.65, 0.8, 0.95, 1.0],
            paths: 10_000,
        }
    }
}

/// An additional model for averaged-incentive comparisons. The matrix is
/// either `power` applied to the base matrix or given explicitly; omitted
/// reward entries are taken from `[reward]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSection {
    pub label: String,
    pub power: Option<u32>,
    pub matrix: Option<[[f64; 2]; 2]>,
    pub delta: Option<[f64; 2]>,
    pub alpha: Option<[f64; 2]>,
    pub beta: Option<[f64; 2]>,
    pub gamma: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub directory: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// SHA-256 of the canonical JSON form of the effective configuration.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }

    fn apply_overrides(&mut self, cli: &Cli) {
        if let Some(s) = cli.seed {
            self.simulation.seed = s;
        }
        if let Some(p) = cli.paths {
            self.simulation.paths = p;
        }
        if let Some(h) = cli.horizon {
            self.simulation.horizon = h;
        }
    }

    pub fn reward_params(&self) -> CliResult<RewardParams> {
        let r = &self.reward;
        RewardParams::new(r.delta, r.alpha, r.beta, r.gamma, r.enforce_positivity)
            .map_err(|e| CliError::from_model("reward", e))
    }

    pub fn observation_model(&self, params: &RewardParams) -> CliResult<ObservationModel> {
        match &self.observation.matrix {
            MatrixSpec::Explicit(m) => ObservationModel::new(*m).map_err(|e| CliError::from_model("observation.matrix", e)),
            MatrixSpec::Keyword(k) if k == "calibrate" => {
                calibrate_observation_model(params).map_err(|e| CliError::from_model("observation.matrix", e))
            }
            MatrixSpec::Keyword(k) => Err(CliError::Config(format!(
                "observation.matrix: expected \"calibrate\" or a 2x2 array, got \"{k}\""
            ))),
        }
    }

    pub fn cost_spec(&self) -> CliResult<FusionCostSpec> {
        let c = &self.cost;
        match c.kind {
            CostKind::Linear => FusionCostSpec::linear(c.phi_s).map_err(|e| CliError::from_model("cost.phi_s", e)),
            CostKind::Entropy => {
                let psi = match &c.psi {
                    PsiSpec::Named(n) if n == "quadratic" => EntropyWeight::quadratic(),
                    PsiSpec::Named(n) if n == "two-level" => EntropyWeight::two_level(),
                    PsiSpec::Named(n) => {
                        return Err(CliError::Config(format!(
                            "cost.psi: expected \"quadratic\", \"two-level\" or a table, got \"{n}\""
                        )))
                    }
                    PsiSpec::Table { pi2, weight } => EntropyWeight::tabulated(pi2.clone(), weight.clone())
                        .map_err(|e| CliError::from_model("cost.psi", e))?,
                };
                FusionCostSpec::entropy(c.phi_e, psi).map_err(|e| CliError::from_model("cost.phi_e", e))
            }
        }
    }

    pub fn grid(&self) -> CliResult<BeliefGrid> {
        BeliefGrid::new(self.solver.grid_size).map_err(|e| CliError::from_model("solver.grid_size", e))
    }

    pub fn solver_settings(&self) -> CliResult<SolverSettings> {
        let s = &self.solver;
        if s.max_iters == 0 || s.tolerance.is_nan() || s.tolerance <= 0.0 {
            return Err(CliError::Config(
                "solver: max_iters must be positive and tolerance must be > 0".into(),
            ));
        }
        Ok(SolverSettings {
            max_iters: s.max_iters,
            tolerance: s.tolerance,
            checkpoint: Some(PAPER_ITERATIONS),
        })
    }

    fn problem_for(&self, params: RewardParams, model: ObservationModel) -> CliResult<FusionProblem> {
        let sensor = SocialSensor::new(params, model).map_err(|e| CliError::from_model("reward", e))?;
        FusionProblem::new(sensor, self.cost_spec()?, self.solver.discount)
            .map_err(|e| CliError::from_model("solver.discount", e))
    }

    pub fn problem(&self) -> CliResult<FusionProblem> {
        let params = self.reward_params()?;
        let model = self.observation_model(&params)?;
        self.problem_for(params, model)
    }

    fn prior(&self) -> CliResult<Belief> {
        Belief::from_p2(self.simulation.prior).map_err(|e| CliError::from_model("simulation.prior", e))
    }

    fn true_state(&self) -> CliResult<Option<Symbol>> {
        match self.simulation.true_state {
            None => Ok(None),
            Some(l) => Symbol::from_label(l)
                .map(Some)
                .ok_or_else(|| CliError::Config(format!("simulation.true_state: expected 1 or 2, got {l}"))),
        }
    }

    fn compare_problems(&self, base: &FusionProblem) -> CliResult<Vec<(String, FusionProblem)>> {
        let base_params = *base.sensor().params();
        let base_model = *base.sensor().model();
        self.compare
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let key = format!("compare[{i}]");
                let model = match (c.power, c.matrix) {
                    (Some(_), Some(_)) => {
                        return Err(CliError::Config(format!("{key}: give either power or matrix, not both")))
                    }
                    (Some(0), None) => return Err(CliError::Config(format!("{key}.power: must be at least 1"))),
                    (Some(n), None) => base_model.power(n),
                    (None, Some(m)) => {
                        ObservationModel::new(m).map_err(|e| CliError::from_model(&format!("{key}.matrix"), e))?
                    }
                    (None, None) => base_model,
                };
                let params = RewardParams::new(
                    c.delta.unwrap_or(base_params.delta),
                    c.alpha.unwrap_or(base_params.alpha),
                    c.beta.unwrap_or(base_params.beta),
                    c.gamma.unwrap_or(base_params.gamma),
                    self.reward.enforce_positivity,
                )
                .map_err(|e| CliError::from_model(&key, e))?;
                Ok((c.label.clone(), self.problem_for(params, model)?))
            })
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Output helpers

/// `%.12g`-style formatting: 12 significant digits, trailing zeros trimmed.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp) as usize;
        trim_zeros(&format!("{x:.decimals$}"))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

/// CSV table with a metadata comment line and a header row.
pub struct CsvTable {
    text: String,
}

impl CsvTable {
    pub fn new(meta: &str, header: &[&str]) -> Self {
        let mut text = String::new();
        let _ = writeln!(text, "# {meta}");
        let _ = writeln!(text, "{}", header.join(","));
        Self { text }
    }

    pub fn row<I: IntoIterator<Item = String>>(&mut self, cells: I) {
        let cells: Vec<String> = cells.into_iter().collect();
        let _ = writeln!(self.text, "{}", cells.join(","));
    }

    pub fn numbers(&mut self, values: &[f64]) {
        self.row(values.iter().map(|v| fmt_num(*v)));
    }

    pub fn into_string(self) -> String {
        self.text
    }
}

/// Structural-hypothesis verdicts written into every output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Hypotheses {
    pub tp2: bool,
    pub supermodular: bool,
    pub positive_coefficients: bool,
    pub within_hypotheses: bool,
    pub note: Option<&'static str>,
}

impl Hypotheses {
    pub fn of(sensor: &SocialSensor) -> Self {
        let (tp2, supermodular) = sensor.hypotheses();
        let within = tp2 && supermodular;
        Self {
            tp2,
            supermodular,
            positive_coefficients: sensor.coefficients().all_positive(),
            within_hypotheses: within,
            note: (!within).then_some(OUTSIDE_HYPOTHESES),
        }
    }

    fn meta(&self) -> String {
        let mut s = format!("tp2={} supermodular={}", self.tp2, self.supermodular);
        if let Some(n) = self.note {
            let _ = write!(s, " note=\"{n}\"");
        }
        s
    }
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

/// Files produced by a command, written together at the end.
#[derive(Debug, Default)]
pub struct Outputs {
    pub files: Vec<(String, String)>,
}

impl Outputs {
    fn add(&mut self, name: &str, contents: String) {
        self.files.push((name.to_string(), contents));
    }

    pub fn write_to(&self, dir: &Path) -> CliResult<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        self.files
            .iter()
            .map(|(name, contents)| {
                let path = dir.join(name);
                std::fs::write(&path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
                Ok(path)
            })
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Commands

struct Context {
    meta: String,
    hypotheses: Hypotheses,
}

impl Context {
    fn table(&self, header: &[&str]) -> CsvTable {
        CsvTable::new(&self.meta, header)
    }
}

fn solve(problem: &FusionProblem, config: &ExperimentConfig) -> CliResult<SolveResult> {
    problem
        .value_iterate(&config.grid()?, &config.solver_settings()?)
        .map_err(|e| CliError::from_model("solver", e))
}

#[derive(Debug, Serialize)]
struct CheckpointSummary {
    iterations: usize,
    residual: f64,
    switch_points: Vec<usize>,
    max_value_change: f64,
}

#[derive(Debug, Serialize)]
struct ThresholdJson<'a> {
    switch_points: &'a [usize],
    /// Midpoints of the cells containing each switch.
    switch_pi2: Vec<f64>,
    threshold_pi2: Option<f64>,
    residual: f64,
    iterations: usize,
    converged: bool,
    checkpoint: Option<CheckpointSummary>,
    hypotheses: &'a Hypotheses,
}

pub fn cmd_solve(config: &ExperimentConfig, out: &mut Outputs) -> CliResult<()> {
    let problem = config.problem()?;
    let ctx = context(config, &problem);
    let result = solve(&problem, config)?;
    let pts = result.grid.points();

    let mut value = ctx.table(&["pi2", "value"]);
    let mut policy = ctx.table(&["pi2", "incentive", "region_at_policy"]);
    for (i, &pi2) in pts.iter().enumerate() {
        value.numbers(&[pi2, result.value[i]]);
        policy.row([fmt_num(pi2), fmt_num(result.policy[i]), result.regions[i].to_string()]);
    }
    let checkpoint = result.checkpoint.as_ref().map(|c| CheckpointSummary {
        iterations: c.iterations,
        residual: c.residual,
        switch_points: c.switch_points.clone(),
        max_value_change: c.value.iter().zip(&result.value).fold(0.0, |m, (a, b)| f64::max(m, (a - b).abs())),
    });
    let report = ThresholdJson {
        switch_points: &result.switch_points,
        switch_pi2: result.switch_points.iter().map(|&i| 0.5 * (pts[i] + pts[i + 1])).collect(),
        threshold_pi2: extract_threshold(&result).threshold(),
        residual: result.residual,
        iterations: result.iterations,
        converged: result.converged,
        checkpoint,
        hypotheses: &ctx.hypotheses,
    };
    out.add("value.csv", value.into_string());
    out.add("policy.csv", policy.into_string());
    out.add("threshold.json", json(&report));
    Ok(())
}

/// Beliefs `π(2)` where `Δ(η_y(π)) = p`, clamped to `[0,1]`.
///
/// `Δ(η) = (l1 + l3) − (l1 + l2) η(2)` is affine in `η(2)`, and `η_y(2)` is a
/// monotone bijection of `π(2)`, so both inversions are closed-form.
pub fn region_boundary(sensor: &SocialSensor, obs: Symbol, incentive: f64) -> f64 {
    let IncentiveCoefficients { l1, l2, l3 } = *sensor.coefficients();
    let u = ((l1 + l3 - incentive) / (l1 + l2)).clamp(0.0, 1.0);
    let l = sensor.model().likelihood(obs);
    let num = u * l[0];
    let den = num + (1.0 - u) * l[1];
    if den == 0.0 {
        u
    } else {
        num / den
    }
}

pub fn cmd_regions(config: &ExperimentConfig, resolution: usize, out: &mut Outputs) -> CliResult<()> {
    if resolution < 2 {
        return Err(CliError::Config(format!("regions.resolution: need at least 2, got {resolution}")));
    }
    let problem = config.problem()?;
    let ctx = context(config, &problem);
    let sensor = problem.sensor();
    let mut table = ctx.table(&["p", "p2_lower_boundary", "p2_upper_boundary"]);
    for j in 0..resolution {
        let p = j as f64 / (resolution - 1) as f64;
        table.numbers(&[p, region_boundary(sensor, Symbol::Two, p), region_boundary(sensor, Symbol::One, p)]);
    }
    out.add("regions.csv", table.into_string());
    Ok(())
}

fn resolve_policy(name: &str, problem: &FusionProblem, config: &ExperimentConfig) -> CliResult<PolicySpec> {
    let solved = || solve(problem, config);
    match name {
        "zero" => Ok(PolicySpec::Zero),
        "consistency" => Ok(PolicySpec::Consistency),
        "grid" => Ok(PolicySpec::Grid(GridPolicy::from_solve(problem.sensor(), &solved()?))),
        "threshold" => match extract_threshold(&solved()?) {
            ThresholdReport::Single { pi2, .. } => Ok(PolicySpec::Threshold { pi2 }),
            other => Err(CliError::Numerical(format!(
                "simulation.policy: threshold policy needs exactly one switch, solver found {}",
                other.switch_count()
            ))),
        },
        "optimal" => {
            let r = solved()?;
            Ok(match extract_threshold(&r) {
                ThresholdReport::Single { pi2, .. } => PolicySpec::Threshold { pi2 },
                _ => PolicySpec::Grid(GridPolicy::from_solve(problem.sensor(), &r)),
            })
        }
        other => Err(CliError::Config(format!(
            "simulation.policy: expected optimal, threshold, grid, zero or consistency, got \"{other}\""
        ))),
    }
}

fn check_simulation(config: &ExperimentConfig) -> CliResult<()> {
    let s = &config.simulation;
    if s.paths < 2 || s.horizon < 1 {
        return Err(CliError::Config(format!(
            "simulation: need paths >= 2 and horizon >= 1, got paths={} horizon={}",
            s.paths, s.horizon
        )));
    }
    Ok(())
}

pub fn cmd_simulate(config: &ExperimentConfig, out: &mut Outputs) -> CliResult<()> {
    check_simulation(config)?;
    let problem = config.problem()?;
    let ctx = context(config, &problem);
    let s = &config.simulation;
    let prior = config.prior()?;
    let state = config.true_state()?.map_or(StateDraw::FromPrior, StateDraw::Fixed);
    let policy = resolve_policy(&s.policy, &problem, config)?;
    let paths = simulate_paths(&problem, &policy, &prior, s.horizon, state, s.paths, s.seed)
        .map_err(|e| CliError::from_model("simulate", e))?;

    let mut summary = ctx.table(&[
        "step",
        "mean_incentive",
        "se_incentive",
        "mean_belief_error",
        "freq_p1",
        "freq_p2",
        "freq_p3",
        "freq_truthful",
    ]);
    for st in summarize_paths(&paths) {
        summary.numbers(&[
            st.step as f64,
            st.incentive.mean(),
            st.incentive.std_error(),
            st.belief_error.mean(),
            st.region_freq[0],
            st.region_freq[1],
            st.region_freq[2],
            st.truthful_freq,
        ]);
    }

    let sub = submartingale_stats(&paths, 3.0).map_err(|e| CliError::from_model("simulate", e))?;
    let mut incr = ctx.table(&["step", "mean_increment", "se_increment", "mean_incentive", "cumulative_mean_incentive"]);
    for k in 0..sub.incentives.len() {
        let (m, se) = sub.increments.get(k).map_or((f64::NAN, f64::NAN), |r| (r.mean(), r.std_error()));
        incr.numbers(&[(k + 1) as f64, m, se, sub.incentives[k].mean(), sub.cumulative_mean[k]]);
    }

    let mut setups = vec![("base".to_string(), problem.clone(), policy)];
    for (label, p) in config.compare_problems(&problem)? {
        let pol = resolve_policy(&s.policy, &p, config)?;
        setups.push((label, p, pol));
    }
    let pairs: Vec<(FusionProblem, PolicySpec)> = setups.iter().map(|(_, p, q)| (p.clone(), q.clone())).collect();
    let curves = averaged_incentives(&pairs, &prior, s.paths, s.horizon, s.seed)
        .map_err(|e| CliError::from_model("simulate", e))?;
    let mut header = vec!["step".to_string()];
    for (label, _, _) in &setups {
        header.push(format!("{label}_mean"));
        header.push(format!("{label}_se"));
        header.push(format!("{label}_cumulative_mean"));
    }
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut avg = ctx.table(&header_refs);
    let cumulative: Vec<Vec<f64>> = curves.iter().map(|c| cumulative_means(c)).collect();
    for k in 0..s.horizon {
        let mut row = vec![(k + 1) as f64];
        for (m, c) in curves.iter().zip(&cumulative) {
            row.extend([m[k].mean(), m[k].std_error(), c[k]]);
        }
        avg.numbers(&row);
    }

    out.add("paths_summary.csv", summary.into_string());
    out.add("submartingale.csv", incr.into_string());
    out.add("avg_incentives.csv", avg.into_string());
    Ok(())
}

#[derive(Debug, Serialize)]
struct BoundReport<'a> {
    threshold_pi2: Option<f64>,
    bound: Option<f64>,
    bound_infinite: bool,
    grid_gap_max: f64,
    grid_gap_min: f64,
    mc_gap_max: Option<f64>,
    mc_gap_se: Option<f64>,
    mc_gap_start: Option<f64>,
    mc_horizon: usize,
    mc_paths: usize,
    pass: bool,
    note: Option<String>,
    hypotheses: &'a Hypotheses,
}

pub fn cmd_bound(config: &ExperimentConfig, out: &mut Outputs) -> CliResult<()> {
    let problem = config.problem()?;
    let FusionCostSpec::Linear { phi_s } = *problem.cost() else {
        return Err(CliError::Config("cost.kind: the consistency bound is defined for the linear cost".into()));
    };
    let ctx = context(config, &problem);
    let result = solve(&problem, config)?;
    let grid = &result.grid;
    let mu_c = problem.consistency_incentives(grid);
    let w = problem
        .evaluate_policy(grid, &mu_c, config.solver.tolerance, 100 * config.solver.max_iters)
        .map_err(|e| CliError::from_model("bound", e))?;
    let gaps: Vec<f64> = w.iter().zip(&result.value).map(|(a, b)| a - b).collect();
    let grid_gap_max = gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let grid_gap_min = gaps.iter().copied().fold(f64::INFINITY, f64::min);
    let rho = problem.discount();
    let horizon = truncation_horizon(rho, phi_s, 1e-6);
    let seed = config.simulation.seed;

    let report = match extract_threshold(&result) {
        ThresholdReport::Single { pi2, .. } => {
            let b21 = problem.sensor().model().prob(Symbol::Two, Symbol::One);
            let bound = consistency_cost_bound(phi_s, rho, 1.0 - pi2, b21).map_err(|e| CliError::from_model("bound", e))?;
            let mc = empirical_cost_gap(&problem, &PolicySpec::Threshold { pi2 }, &config.bound.starts, config.bound.paths, horizon, seed)
                .map_err(|e| CliError::from_model("bound", e))?;
            BoundReport {
                threshold_pi2: Some(pi2),
                bound: (!bound.infinite).then_some(bound.value),
                bound_infinite: bound.infinite,
                grid_gap_max,
                grid_gap_min,
                mc_gap_max: Some(mc.max_gap),
                mc_gap_se: Some(mc.max_gap_se),
                mc_gap_start: Some(mc.max_gap_start),
                mc_horizon: horizon,
                mc_paths: config.bound.paths,
                pass: bound.infinite || grid_gap_max <= bound.value,
                note: bound.infinite.then(|| "threshold equals B21; bound is infinite".to_string()),
                hypotheses: &ctx.hypotheses,
            }
        }
        other => BoundReport {
            threshold_pi2: None,
            bound: None,
            bound_infinite: false,
            grid_gap_max,
            grid_gap_min,
            mc_gap_max: None,
            mc_gap_se: None,
            mc_gap_start: None,
            mc_horizon: horizon,
            mc_paths: 0,
            pass: false,
            note: Some(format!(
                "{OUTSIDE_HYPOTHESES}: policy has {} switch points, the bound needs a single threshold",
                other.switch_count()
            )),
            hypotheses: &ctx.hypotheses,
        },
    };
    out.add("bound_report.json", json(&report));
    Ok(())
}

/// Result of calibrating `B` from reward parameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationReport {
    pub matrix: Option<[[f64; 2]; 2]>,
    pub tp2: Option<bool>,
    pub supermodular: Option<bool>,
    pub coefficients: Option<IncentiveCoefficients>,
    /// `Δ(e₁) − 1` and `Δ(e₂)`.
    pub residuals: Option<[f64; 2]>,
    pub error: Option<String>,
}

impl CalibrationReport {
    fn at(params: &RewardParams, model: &ObservationModel) -> Self {
        match coefficients(params, model) {
            Ok(c) => Self {
                matrix: Some(model.matrix()),
                tp2: Some(model.is_tp2()),
                supermodular: Some(check_supermodular(params, model)),
                residuals: Some(c.calibration_residuals()),
                coefficients: Some(c),
                error: None,
            },
            Err(e) => Self::failed(model.matrix().into(), e.to_string()),
        }
    }

    fn failed(matrix: Option<[[f64; 2]; 2]>, error: String) -> Self {
        Self {
            matrix,
            tp2: None,
            supermodular: None,
            coefficients: None,
            residuals: None,
            error: Some(error),
        }
    }
}

pub fn calibration_report(params: &RewardParams) -> CalibrationReport {
    match calibrate_observation_model(params) {
        Ok(model) => CalibrationReport::at(params, &model),
        Err(e) => CalibrationReport::failed(None, e.to_string()),
    }
}

#[derive(Debug, Serialize)]
struct CalibrationJson {
    recovered: CalibrationReport,
    /// The configured explicit matrix evaluated against the same equations.
    configured: Option<CalibrationReport>,
    positivity_condition: bool,
}

pub fn cmd_calibrate(config: &ExperimentConfig, out: &mut Outputs) -> CliResult<()> {
    let params = config.reward_params()?;
    let configured = match &config.observation.matrix {
        MatrixSpec::Explicit(_) => Some(CalibrationReport::at(&params, &config.observation_model(&params)?)),
        MatrixSpec::Keyword(_) => {
            config.observation_model(&params).or_else(|e| match e {
                // An infeasible calibration is the result being reported.
                CliError::Config(m) if m.contains("calibration infeasible") => Ok(ObservationModel::identity()),
                other => Err(other),
            })?;
            None
        }
    };
    let report = CalibrationJson {
        recovered: calibration_report(&params),
        configured,
        positivity_condition: params.positivity_condition(),
    };
    out.add("calibration.json", json(&report));
    Ok(())
}

#[derive(Debug, Serialize)]
struct ConsistencyJson<'a> {
    true_state: u8,
    threshold_pi2: f64,
    epsilon: f64,
    paths: usize,
    horizon: usize,
    final_divergence: f64,
    envelope_violations: Vec<usize>,
    hypotheses: &'a Hypotheses,
}

pub fn cmd_consistency(config: &ExperimentConfig, out: &mut Outputs) -> CliResult<()> {
    check_simulation(config)?;
    let problem = config.problem()?;
    let ctx = context(config, &problem);
    let s = &config.simulation;
    let threshold = match extract_threshold(&solve(&problem, config)?) {
        ThresholdReport::Single { pi2, .. } => pi2,
        other => {
            return Err(CliError::Numerical(format!(
                "consistency: the low-belief region needs a single threshold, solver found {} switch points",
                other.switch_count()
            )))
        }
    };
    let theta = config.true_state()?.unwrap_or(Symbol::Two);
    let paths = simulate_paths(
        &problem,
        &PolicySpec::Consistency,
        &config.prior()?,
        s.horizon,
        StateDraw::Fixed(theta),
        s.paths,
        s.seed,
    )
    .map_err(|e| CliError::from_model("consistency", e))?;
    let report = consistency_stats(&paths, problem.sensor(), s.epsilon, threshold)
        .map_err(|e| CliError::from_model("simulation.epsilon", e))?;
    let mut table = ctx.table(&["step", "divergence", "in_low_region", "envelope"]);
    for k in 0..report.divergence.len() {
        table.numbers(&[(k + 1) as f64, report.divergence[k], report.in_low_region[k], report.envelope[k]]);
    }
    let summary = ConsistencyJson {
        true_state: theta.label(),
        threshold_pi2: threshold,
        epsilon: s.epsilon,
        paths: s.paths,
        horizon: s.horizon,
        final_divergence: report.divergence.last().copied().unwrap_or(0.0),
        envelope_violations: report.envelope_violations(3.0),
        hypotheses: &ctx.hypotheses,
    };
    out.add("consistency.csv", table.into_string());
    out.add("consistency.json", json(&summary));
    Ok(())
}

fn context(config: &ExperimentConfig, problem: &FusionProblem) -> Context {
    let hypotheses = Hypotheses::of(problem.sensor());
    let meta = format!(
        "config_sha256={} seed={} {}",
        config.hash(),
        config.simulation.seed,
        hypotheses.meta()
    );
    Context {
        meta,
        hypotheses,
    }
}

/// Output directory: flag, then environment, then config, then `./out`.
pub fn output_dir(cli_out: Option<&Path>, config: &ExperimentConfig) -> PathBuf {
    if let Some(p) = cli_out {
        return p.to_path_buf();
    }
    if let Some(p) = std::env::var_os(OUT_DIR_ENV).filter(|v| !v.is_empty()) {
        return PathBuf::from(p);
    }
    config.output.directory.clone().unwrap_or_else(|| PathBuf::from("out"))
}

/// Run a parsed command line and return the written files.
pub fn run(cli: &Cli) -> CliResult<Vec<PathBuf>> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    config.apply_overrides(cli);

    if cli.strict {
        let problem = config.problem()?;
        let h = Hypotheses::of(problem.sensor());
        if !h.within_hypotheses {
            return Err(CliError::Hypothesis(format!(
                "{OUTSIDE_HYPOTHESES}: TP2 {}, supermodular {}",
                h.tp2, h.supermodular
            )));
        }
    }

    let mut out = Outputs::default();
    match &cli.command {
        Command::Solve => cmd_solve(&config, &mut out)?,
        Command::Regions { resolution } => {
            let r = resolution.unwrap_or(config.regions.resolution);
            cmd_regions(&config, r, &mut out)?
        }
        Command::Simulate => cmd_simulate(&config, &mut out)?,
        Command::Bound => cmd_bound(&config, &mut out)?,
        Command::Calibrate => cmd_calibrate(&config, &mut out)?,
        Command::Consistency => cmd_consistency(&config, &mut out)?,
    }
    out.write_to(&output_dir(cli.out.as_deref(), &config))
}

/// Entry point for the binary.
pub fn main_entry() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(files) => {
            for f in files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("incentive-fusion: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
