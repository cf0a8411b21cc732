use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use incentive_fusion::belief::Belief;
use incentive_fusion::sensor::{calibrate_observation_model, RewardParams, SocialSensor};
use serde_json::Value;
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_incentive-fusion");

struct Run {
    dir: TempDir,
    output: Output,
}

impl Run {
    fn code(&self) -> i32 {
        self.output.status.code().expect("exit code")
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join("out").join(name)
    }

    fn text(&self, name: &str) -> String {
        fs::read_to_string(self.path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
    }

    fn json(&self, name: &str) -> Value {
        serde_json::from_str(&self.text(name)).unwrap()
    }

    /// Data rows of a CSV output, skipping the metadata and header lines.
    fn rows(&self, name: &str) -> Vec<Vec<f64>> {
        let text = self.text(name);
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with('#'));
        lines.next().unwrap();
        lines
            .map(|l| l.split(',').map(|c| c.parse().unwrap_or(f64::NAN)).collect())
            .collect()
    }

    fn stderr(&self) -> String {
        String::from_utf8_lossy(&self.output.stderr).into_owned()
    }
}

fn run(config: &str, args: &[&str]) -> Run {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("config.toml");
    fs::write(&cfg, config).unwrap();
    let out = dir.path().join("out");
    let output = Command::new(BIN)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args(args)
        .env_remove("INCENTIVE_FUSION_OUT")
        .output()
        .unwrap();
    Run { dir, output }
}

fn ok(config: &str, args: &[&str]) -> Run {
    let r = run(config, args);
    assert_eq!(r.code(), 0, "{args:?}: {}", r.stderr());
    r
}

#[test]
fn solve_default_gives_single_threshold() {
    let r = ok("", &["solve"]);
    let t = r.json("threshold.json");
    assert_eq!(t["switch_points"].as_array().unwrap().len(), 1);
    let thr = t["threshold_pi2"].as_f64().unwrap();
    assert!((0.25..0.35).contains(&thr), "{thr}");
    assert_eq!(t["checkpoint"]["iterations"], 100);
    assert_eq!(t["hypotheses"]["within_hypotheses"], true);
    assert_eq!(r.rows("value.csv").len(), 1000);
    assert_eq!(r.rows("policy.csv").len(), 1000);
}

#[test]
fn solve_on_two_point_grid_gives_corner_values() {
    let r = ok("[solver]\ngrid_size = 2\n", &["solve"]);
    let rows = r.rows("value.csv");
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0], [0.0, 0.0]);
    assert_eq!(rows[1][0], 1.0);
    // Converged to the 1e-9 sweep tolerance, so within ρ/(1−ρ)·1e-9 of −ρ/(1−ρ).
    assert!((rows[1][1] + 2.0 / 3.0).abs() < 1e-9, "{}", rows[1][1]);
}

#[test]
fn solve_entropy_cost_has_several_switches() {
    let cfg = "[cost]\nkind = \"entropy\"\nphi_e = 0.25\npsi = \"quadratic\"\n[solver]\ndiscount = 0.8\n";
    let t = ok(cfg, &["solve"]).json("threshold.json");
    assert!(t["switch_points"].as_array().unwrap().len() >= 2);
    assert!(t["threshold_pi2"].is_null());
}

#[test]
fn region_boundaries_match_bisection() {
    let r = ok("", &["regions", "--resolution", "5"]);
    let rows = r.rows("regions.csv");
    assert_eq!(rows.len(), 5);
    assert_eq!(rows[0], [0.0, 1.0, 1.0]);
    assert_eq!(rows[4], [1.0, 0.0, 0.0]);

    let params = RewardParams::baseline();
    let sensor = SocialSensor::new(params, calibrate_observation_model(&params).unwrap()).unwrap();
    let boundary = |p: f64, lower: bool| {
        // Both thresholds decrease in π(2).
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            let t = sensor.thresholds(&Belief::from_p2(mid).unwrap());
            let d = if lower { t.lower } else { t.upper };
            if d > p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    for row in &rows[1..4] {
        assert!((row[1] - boundary(row[0], true)).abs() < 1e-9, "{row:?}");
        assert!((row[2] - boundary(row[0], false)).abs() < 1e-9, "{row:?}");
        // Observing 2 raises the posterior, so its boundary is reached from a lower prior.
        assert!(row[1] <= row[2]);
    }
}

#[test]
fn simulate_is_reproducible_for_a_seed() {
    let args = ["--seed", "7", "--paths", "20", "--horizon", "30", "simulate"];
    let a = ok("", &args);
    let b = ok("", &args);
    for name in ["paths_summary.csv", "submartingale.csv", "avg_incentives.csv"] {
        assert_eq!(a.text(name), b.text(name), "{name}");
    }
    let c = ok("", &["--seed", "8", "--paths", "20", "--horizon", "30", "simulate"]);
    assert_ne!(a.text("paths_summary.csv"), c.text("paths_summary.csv"));
}

#[test]
fn zero_policy_leaves_belief_error_constant() {
    let cfg = "[simulation]\npolicy = \"zero\"\nprior = 0.3\npaths = 50\nhorizon = 40\n";
    let rows = ok(cfg, &["simulate"]).rows("paths_summary.csv");
    assert_eq!(rows.len(), 40);
    for row in &rows {
        assert_eq!(row[1], 0.0);
        assert_eq!(row[3], rows[0][3]);
        assert_eq!(row[6], 1.0);
    }
}

#[test]
fn simulate_writes_one_curve_per_compare_entry() {
    let cfg = "[simulation]\npaths = 10\nhorizon = 20\n[[compare]]\nlabel = \"b2\"\npower = 2\n[[compare]]\nlabel = \"b3\"\npower = 3\n";
    let r = ok(cfg, &["simulate"]);
    let text = r.text("avg_incentives.csv");
    let header = text.lines().nth(1).unwrap();
    assert!(header.starts_with("step,base_mean,base_se,base_cumulative_mean,b2_mean"));
    assert!(header.ends_with("b3_cumulative_mean"));
    assert_eq!(r.rows("avg_incentives.csv").len(), 20);
}

#[test]
fn bound_holds_for_default_and_tightens_with_heavy_learning_weight() {
    let cfg = "[bound]\npaths = 500\n";
    let base = ok(cfg, &["bound"]).json("bound_report.json");
    assert_eq!(base["pass"], true);
    let gap = base["grid_gap_max"].as_f64().unwrap();
    assert!(gap <= base["bound"].as_f64().unwrap());

    let heavy = ok(&format!("{cfg}[cost]\nphi_s = 0.99\n"), &["bound"]).json("bound_report.json");
    assert_eq!(heavy["pass"], true);
    assert!(heavy["grid_gap_max"].as_f64().unwrap() < gap);
}

#[test]
fn bound_rejects_entropy_cost() {
    let r = run("[cost]\nkind = \"entropy\"\n", &["bound"]);
    assert_eq!(r.code(), 2);
}

#[test]
fn calibrate_recovers_baseline_matrix() {
    let c = ok("", &["calibrate"]).json("calibration.json");
    let m = &c["recovered"]["matrix"];
    let expected = [[0.8, 0.2], [0.4, 0.6]];
    for (i, row) in expected.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            assert!((m[i][j].as_f64().unwrap() - v).abs() < 1e-12);
        }
    }
    for r in c["recovered"]["residuals"].as_array().unwrap() {
        assert!(r.as_f64().unwrap().abs() < 1e-12);
    }
    assert!(c["configured"].is_null());
}

#[test]
fn calibrate_reports_residual_of_an_explicit_matrix() {
    let cfg = "[reward]\nalpha = [0.3132, 0.3032]\n[observation]\nmatrix = [[0.72, 0.28], [0.56, 0.44]]\n";
    let c = ok(cfg, &["calibrate"]).json("calibration.json");
    let res = c["configured"]["residuals"].as_array().unwrap();
    let worst = res.iter().map(|v| v.as_f64().unwrap().abs()).fold(0.0, f64::max);
    assert!((worst - 0.0084 / 0.65).abs() < 1e-9, "{worst}");
}

#[test]
fn calibrate_reports_infeasible_parameters_without_failing() {
    let cfg = "[reward]\nalpha = [0.0, 0.0]\nbeta = [0.0, 0.0]\n";
    let c = ok(cfg, &["calibrate"]).json("calibration.json");
    assert!(c["recovered"]["error"].is_string());
    assert!(c["recovered"]["matrix"].is_null());
}

#[test]
fn unknown_key_is_a_configuration_error() {
    let r = run("[solver]\ndiscont = 0.5\n", &["solve"]);
    assert_eq!(r.code(), 2);
    assert!(r.stderr().contains("discont"), "{}", r.stderr());
    assert!(!r.path("value.csv").exists());
}

#[test]
fn strict_mode_rejects_a_non_tp2_matrix() {
    let cfg = "[observation]\nmatrix = [[0.3, 0.7], [0.8, 0.2]]\n";
    assert_eq!(run(cfg, &["--strict", "solve"]).code(), 4);
    let lax = ok(cfg, &["solve"]);
    assert_eq!(lax.json("threshold.json")["hypotheses"]["tp2"], false);
    assert!(lax.text("value.csv").lines().next().unwrap().contains("note="));
}

#[test]
fn environment_sets_output_directory() {
    let dir = TempDir::new().unwrap();
    let target: &Path = &dir.path().join("from_env");
    let status = Command::new(BIN)
        .args(["--paths", "5", "--horizon", "10", "consistency"])
        .env("INCENTIVE_FUSION_OUT", target)
        .current_dir(dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    assert!(target.join("consistency.csv").exists());
    assert!(target.join("consistency.json").exists());
    assert!(!dir.path().join("out").exists());
}
