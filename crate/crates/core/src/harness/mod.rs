//! The full cascade behind the command-line tool: keypoints to path and
//! reference twists, MPC smoothing, and the dual-rate closed loop.

mod config;
mod log;

use std::path::{Path, PathBuf};

use nalgebra::{DVector, Vector3, Vector6};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use config::{AxisValues, BoundsFile, KeypointFrame, LimitsFile, RunConfig};
pub use log::{
    read_twists, verify_log, verify_twists, BoundMonitor, Differences, TrajectoryLog,
    TrajectoryRecord, VerifyReport, VIOLATION_SLACK,
};

use crate::dq::UnitDualQuaternion;
use crate::error::{Error, Result};
use crate::io;
use crate::kinematics::{
    forward_kinematics, inner_step, isotropic_gain, pose_error, RobotModel,
};
use crate::mpc::{StepReport, TwistSmoother};
use crate::screw_path::{
    generate_path, reference_twists, DiscretePath, KeypointSet, ReferenceTwistSeries,
};

/// `n` keypoints relative to the start pose: the identity, then random
/// displacements of up to `translation` metres and `rotation` radians.
pub fn random_keypoints(n: usize, translation: f64, rotation: f64, seed: u64) -> Result<KeypointSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = vec![UnitDualQuaternion::IDENTITY];
    while points.len() < n.max(2) {
        let p = Vector3::from_fn(|_, _| rng.random_range(-1.0..=1.0) * translation);
        let axis = loop {
            let a = Vector3::from_fn(|_, _| rng.random_range(-1.0..=1.0));
            let n = a.norm();
            if n > 0.1 && n <= 1.0 {
                break a / n;
            }
        };
        let angle = rng.random_range(-1.0..=1.0) * rotation;
        points.push(UnitDualQuaternion::from_axis_angle_translation(&p, &axis, angle));
    }
    KeypointSet::new(points)
}

/// Robot, initial joints and initial end-effector pose, when a robot is configured.
pub struct Start {
    pub robot: Option<(RobotModel, DVector<f64>)>,
    pub pose: UnitDualQuaternion,
}

pub fn start(cfg: &RunConfig) -> Result<Start> {
    let Some(path) = &cfg.robot else {
        return Ok(Start {
            robot: None,
            pose: UnitDualQuaternion::IDENTITY,
        });
    };
    let model = RobotModel::load(path)?;
    let q0 = cfg
        .q_init
        .clone()
        .ok_or_else(|| Error::Config("q_init is required when a robot is configured".into()))?;
    let pose = forward_kinematics(&model, &q0)?;
    Ok(Start {
        robot: Some((model, DVector::from_vec(q0))),
        pose,
    })
}

/// Keypoints, path and reference twists in the base frame.
#[derive(Debug, Clone)]
pub struct Plan {
    pub keypoints: KeypointSet,
    pub path: DiscretePath,
    pub twists: ReferenceTwistSeries,
}

/// Builds the plan from the keypoint file, or from random keypoints when a
/// seed is given. Random keypoints are always relative to the start pose.
pub fn plan(cfg: &RunConfig, seed: Option<u64>, start_pose: &UnitDualQuaternion) -> Result<Plan> {
    let (relative, frame) = match seed {
        Some(s) => (
            random_keypoints(
                cfg.random_keypoints,
                cfg.random_translation,
                cfg.random_rotation,
                s,
            )?,
            KeypointFrame::Start,
        ),
        None => {
            let path = cfg.keypoints.as_ref().ok_or_else(|| {
                Error::Config("no keypoint file configured and no seed given".into())
            })?;
            (KeypointSet::load(path)?, cfg.keypoint_frame)
        }
    };
    let keypoints = match frame {
        KeypointFrame::Start => KeypointSet::new(
            relative.points().iter().map(|k| *start_pose * *k).collect(),
        )?,
        KeypointFrame::Base => relative,
    };
    let path = generate_path(&keypoints, cfg.samples_per_segment, cfg.sample_time_s)?;
    let twists = reference_twists(&path)?;
    Ok(Plan {
        keypoints,
        path,
        twists,
    })
}

/// Writes `path.csv` and `twists.csv` into `out`.
pub fn run_plan(cfg: &RunConfig, seed: Option<u64>, out: &Path) -> Result<Plan> {
    let s = start(cfg)?;
    let plan = plan(cfg, seed, &s.pose)?;
    let p = out.join("path.csv");
    let mut w = io::create(&p)?;
    plan.path.write_csv(&mut w, &p)?;
    let p = out.join("twists.csv");
    let mut w = io::create(&p)?;
    plan.twists.write_csv(&mut w, &p)?;
    Ok(plan)
}

/// Produces the desired pose one MPC tick at a time: it feeds the reference
/// twists to the smoother and, once they run out, a pose-feedback twist that
/// removes the remaining lag to the final keypoint.
pub struct DesiredPose {
    smoother: TwistSmoother,
    twists: Vec<Vector6<f64>>,
    goal: UnitDualQuaternion,
    settle_gain: f64,
    tick: usize,
    /// Index of the last path sample that differs from the goal.
    last_moving: usize,
}

impl DesiredPose {
    pub fn new(cfg: &RunConfig, plan: &Plan) -> Result<Self> {
        let first = plan.path.samples()[0].pose;
        let goal = plan.path.samples()[plan.path.len() - 1].pose;
        let last_moving = plan
            .path
            .poses()
            .enumerate()
            .filter(|(_, x)| pose_error(&goal, x).norm() > 1e-12)
            .map(|(i, _)| i)
            .last()
            .unwrap_or(0);
        Ok(Self {
            smoother: TwistSmoother::new(cfg.mpc()?, cfg.limit_set()?, first)?,
            twists: plan.twists.twists().iter().map(|t| t.vec6()).collect(),
            goal,
            settle_gain: cfg.settle_gain,
            tick: 0,
            last_moving,
        })
    }

    pub fn pose(&self) -> UnitDualQuaternion {
        self.smoother.pose()
    }

    pub fn goal(&self) -> UnitDualQuaternion {
        self.goal
    }

    pub fn tick(&self) -> usize {
        self.tick
    }

    /// The path has no motion left after the current tick.
    pub fn path_done(&self) -> bool {
        self.tick >= self.last_moving
    }

    /// Twist the smoother is asked to track at the current tick.
    pub fn target(&self) -> Vector6<f64> {
        match self.twists.get(self.tick + 1) {
            Some(t) => *t,
            None => {
                let delta = (self.goal * self.smoother.pose().conjugate()).shortest();
                delta.log().scale(2.0 * self.settle_gain).vec6()
            }
        }
    }

    pub fn step(&mut self) -> Result<(Vector6<f64>, StepReport)> {
        let target = self.target();
        let report = self.smoother.step(&target)?;
        self.tick += 1;
        Ok((target, report))
    }
}

/// Counters over a closed-loop run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimulationSummary {
    pub ticks: usize,
    pub inner_ticks_per_tick: usize,
    pub duration: f64,
    pub terminal_error: f64,
    pub reached: bool,
    pub qp_not_converged: usize,
    pub qp_infeasible: usize,
    pub singular_steps: usize,
    pub violations: usize,
}

pub struct Simulation {
    pub log: TrajectoryLog,
    pub summary: SimulationSummary,
}

/// Dual-rate closed loop: one MPC tick, then `round(T/T_inner)` inner Euler
/// steps towards the held desired pose. Stops once the path is consumed and
/// the end effector is within `tol` of the final keypoint, or at the time limit.
pub fn simulate(cfg: &RunConfig, seed: Option<u64>) -> Result<Simulation> {
    let s = start(cfg)?;
    let (model, mut q) = s
        .robot
        .ok_or_else(|| Error::Config("simulate needs a robot model".into()))?;
    let plan = plan(cfg, seed, &s.pose)?;
    let mut desired = DesiredPose::new(cfg, &plan)?;
    let limits = cfg.limit_set()?;
    let gain = isotropic_gain(cfg.gain);
    let n_inner = cfg.inner_ticks();
    let dt = 1.0 / cfg.inner_rate_hz;
    let t_mpc = cfg.sample_time_s;
    let max_ticks = (cfg.max_duration_s / t_mpc).floor() as usize;

    let mut monitor = BoundMonitor::new(limits);
    let mut summary = SimulationSummary {
        inner_ticks_per_tick: n_inner,
        ..Default::default()
    };
    let mut log = TrajectoryLog::default();
    let mut record = |t: f64,
                      q: &DVector<f64>,
                      x_d: &UnitDualQuaternion,
                      reference: Vector6<f64>,
                      twist: Vector6<f64>,
                      goal: &UnitDualQuaternion,
                      monitor: &mut BoundMonitor|
     -> Result<(f64, Differences)> {
        let x_eff = forward_kinematics(&model, q.as_slice())?;
        if !x_eff.as_dq().is_finite() {
            return Err(Error::NonFinite(format!("end-effector pose at t = {t}")));
        }
        let goal_err = pose_error(goal, &x_eff).norm();
        let diff = monitor.push(t, &twist);
        log.records.push(TrajectoryRecord {
            t,
            q: q.iter().copied().collect(),
            x_eff: x_eff.vec8(),
            x_d: x_d.vec8(),
            reference,
            twist,
            err_norm: pose_error(x_d, &x_eff).norm(),
            goal_err,
            diff,
        });
        Ok((goal_err, diff))
    };

    let goal = desired.goal();
    let (mut goal_err, _) = record(
        0.0,
        &q,
        &desired.pose(),
        Vector6::zeros(),
        Vector6::zeros(),
        &goal,
        &mut monitor,
    )?;
    while !(desired.path_done() && goal_err <= cfg.tol) && desired.tick() < max_ticks {
        let (target, report) = desired.step()?;
        summary.qp_not_converged += usize::from(!report.converged);
        summary.qp_infeasible += usize::from(!report.feasible);
        for _ in 0..n_inner {
            let cmd = inner_step(&model, &mut q, &report.pose, &gain, dt)?;
            summary.singular_steps += usize::from(cmd.singular);
        }
        let t = desired.tick() as f64 * t_mpc;
        let (err, diff) = record(t, &q, &report.pose, target, report.twist, &goal, &mut monitor)?;
        goal_err = err;
        summary.violations += usize::from(diff.any());
    }
    summary.ticks = desired.tick();
    summary.duration = summary.ticks as f64 * t_mpc;
    summary.terminal_error = goal_err;
    summary.reached = desired.path_done() && goal_err <= cfg.tol;
    Ok(Simulation { log, summary })
}

/// Runs [`simulate`] and writes `trajectory.csv` into `out`.
pub fn run_simulate(cfg: &RunConfig, seed: Option<u64>, out: &Path) -> Result<(PathBuf, SimulationSummary)> {
    let sim = simulate(cfg, seed)?;
    let path = out.join("trajectory.csv");
    sim.log.write_csv(&path)?;
    Ok((path, sim.summary))
}

/// Runs the smoother alone on the plan and writes `mpc.csv` into `out`.
/// Returns the path written and the number of ticks.
pub fn run_smooth(cfg: &RunConfig, seed: Option<u64>, out: &Path) -> Result<(PathBuf, usize)> {
    let s = start(cfg)?;
    let plan = plan(cfg, seed, &s.pose)?;
    let mut desired = DesiredPose::new(cfg, &plan)?;
    let goal = desired.goal();
    let max_ticks = (cfg.max_duration_s / cfg.sample_time_s).floor() as usize;
    let path = out.join("mpc.csv");
    let mut w = io::create(&path)?;
    let mut header: Vec<String> = vec!["i".into(), "t".into()];
    for (name, n) in [("ref", 6), ("twist", 6), ("du", 6), ("xd", 8)] {
        header.extend((1..=n).map(|k| format!("{name}{k}")));
    }
    header.extend(["goal_err", "active", "iterations", "converged", "feasible"].map(String::from));
    io::write_row(&mut w, &header, &path)?;
    loop {
        let goal_err = pose_error(&goal, &desired.pose()).norm();
        if (desired.path_done() && goal_err <= cfg.tol) || desired.tick() >= max_ticks {
            break;
        }
        let (target, r) = desired.step()?;
        let i = desired.tick();
        let mut row = vec![i.to_string(), io::real(i as f64 * cfg.sample_time_s)];
        for v in [&target, &r.twist, &r.delta_u] {
            row.extend(v.iter().map(|x| io::real(*x)));
        }
        row.extend(r.pose.vec8().iter().map(|x| io::real(*x)));
        row.push(io::real(pose_error(&goal, &r.pose).norm()));
        row.push(r.active_constraints.to_string());
        row.push(r.iterations.to_string());
        row.push(u8::from(r.converged).to_string());
        row.push(u8::from(r.feasible).to_string());
        io::write_row(&mut w, &row, &path)?;
    }
    io::flush(&mut w, &path)?;
    Ok((path, desired.tick()))
}
