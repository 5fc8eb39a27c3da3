mod common;

use std::path::Path;

use common::*;
use nalgebra::{Vector3, Vector6};
use screw_mpc::dq::UnitDualQuaternion;
use screw_mpc::harness::*;
use screw_mpc::kinematics::forward_kinematics;
use screw_mpc::mpc::LimitSet;

/// Writes `keypoints.txt` and `run.toml` into `dir` and loads the configuration.
fn config_in(dir: &Path, keypoints: &str, extra: &str) -> RunConfig {
    std::fs::write(dir.join("keypoints.txt"), keypoints).unwrap();
    let panda = config_dir().join("panda.toml");
    let q = panda_ready().map(|v| v.to_string()).join(", ");
    let text = format!(
        "keypoints = \"keypoints.txt\"\nrobot = {:?}\nq_init = [{q}]\n{extra}\n",
        panda.to_str().unwrap()
    );
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    RunConfig::load(&path).unwrap()
}

#[test]
fn identical_keypoints_give_zero_twists() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_in(dir.path(), "0 0 0 0 0 1 0\n0 0 0 0 0 1 0\n", "");
    let plan = plan(&cfg, None, &UnitDualQuaternion::IDENTITY).unwrap();
    assert_eq!(plan.path.len(), 101);
    assert!(plan.twists.twists().iter().all(|t| t.vec6() == Vector6::zeros()));
}

#[test]
fn translation_segment_and_sample_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_in(
        dir.path(),
        "0 0 0 0 0 1 0\n1 0 0 0 0 1 0\n1 1 0 0 0 1 0.5\n",
        "keypoint_frame = \"base\"",
    );
    let plan = plan(&cfg, None, &UnitDualQuaternion::IDENTITY).unwrap();
    assert_eq!(plan.path.len(), 2 * 100 + 1);
    let h = plan.path.samples()[100].pose.to_homogeneous();
    assert!((Vector3::new(h[(0, 3)], h[(1, 3)], h[(2, 3)]) - Vector3::x()).amax() < 1e-12);
    // 1 m over 100 steps of T.
    let v = plan.twists.twists()[50].vec6();
    assert!((v[3] - 1.0 / (100.0 * cfg.sample_time_s)).abs() < 1e-9);
}

#[test]
fn start_frame_keypoints_follow_the_robot() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_in(dir.path(), "0 0 0 0 0 1 0\n0 0 0.1 0 0 1 0\n", "");
    let s = start(&cfg).unwrap();
    let plan = plan(&cfg, None, &s.pose).unwrap();
    let want = forward_kinematics(&panda(), &panda_ready()).unwrap();
    assert!(plan.path.samples()[0].pose.as_dq().max_abs_diff(want.as_dq()) < 1e-15);
}

#[test]
fn random_keypoints_depend_only_on_the_seed() {
    let a = random_keypoints(4, 0.1, 0.3, 7).unwrap();
    let b = random_keypoints(4, 0.1, 0.3, 7).unwrap();
    let c = random_keypoints(4, 0.1, 0.3, 8).unwrap();
    assert_eq!(a.points(), b.points());
    assert_ne!(a.points(), c.points());
    assert_eq!(a.first(), UnitDualQuaternion::IDENTITY);
}

#[test]
fn start_at_goal_stops_immediately() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_in(dir.path(), "0 0 0 0 0 1 0\n0 0 0 0 0 1 0\n", "");
    let sim = simulate(&cfg, None).unwrap();
    assert!(sim.log.records.len() <= 2);
    assert!(sim.summary.reached);
}

#[test]
fn simulation_reaches_the_goal_within_limits() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_in(dir.path(), "0 0 0 0 0 1 0\n0.05 0 -0.05 0 0 1 0.3\n", "");
    let (path, summary) = run_simulate(&cfg, None, dir.path()).unwrap();
    assert!(summary.reached, "{summary:?}");
    assert_eq!(summary.violations, 0);
    assert!(summary.terminal_error <= 1e-3);
    let report = verify_log(&path, &cfg.limit_set().unwrap()).unwrap();
    assert!(report.passed(), "{report}");
    assert_eq!(report.samples, summary.ticks + 1);
}

#[test]
fn seeded_runs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_in(dir.path(), "0 0 0 0 0 1 0\n0 0 0 0 0 1 0\n", "");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_simulate(&cfg, Some(3), &a).unwrap();
    run_simulate(&cfg, Some(3), &b).unwrap();
    let read = |d: &Path| std::fs::read(d.join("trajectory.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn verify_flags_a_tampered_log() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("log.csv");
    let rows = ["t,twist1,twist2,twist3,twist4,twist5,twist6", "0,0,0,0,0,0,0", "0.009,0,0,0,0.001,0,0", "0.018,0,0,0,3,0,0"];
    std::fs::write(&path, rows.join("\n") + "\n").unwrap();
    let report = verify_log(&path, &LimitSet::default()).unwrap();
    assert!(!report.passed());
    assert_eq!(report.violations, 1);
    std::fs::write(&path, "t,twist1\n0,0\n").unwrap();
    assert!(verify_log(&path, &LimitSet::default()).is_err());
}

#[test]
fn config_errors_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "n_c = 10\nbogus = 1\n").unwrap();
    assert!(RunConfig::load(&path).is_err());
    std::fs::write(&path, "inner_rate_hz = 50.0\n").unwrap();
    assert!(RunConfig::load(&path).is_err());
    let cfg = RunConfig::default();
    assert!(simulate(&cfg, Some(1)).is_err());
}
