use std::fmt;
use std::path::Path;

use nalgebra::Vector6;

use crate::dq::Vector8;
use crate::error::{Error, Result};
use crate::io;
use crate::mpc::LimitSet;

/// Slack allowed above a limit before a sample counts as a violation.
pub const VIOLATION_SLACK: f64 = 1e-6;

/// Finite-difference acceleration and jerk of a twist sequence, checked
/// against a limit set as samples arrive.
#[derive(Debug, Clone)]
pub struct BoundMonitor {
    limits: LimitSet,
    prev: Option<(f64, Vector6<f64>, Vector6<f64>)>,
}

/// Derived quantities for one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Differences {
    pub acceleration: Vector6<f64>,
    pub jerk: Vector6<f64>,
    /// Velocity, acceleration and jerk exceed their limits by more than the slack.
    pub violations: [bool; 3],
}

impl Differences {
    pub fn any(&self) -> bool {
        self.violations.iter().any(|v| *v)
    }
}

impl BoundMonitor {
    /// The sequence is taken to start from rest.
    pub fn new(limits: LimitSet) -> Self {
        Self { limits, prev: None }
    }

    pub fn push(&mut self, t: f64, twist: &Vector6<f64>) -> Differences {
        let (acceleration, jerk) = match self.prev {
            Some((t0, xi0, acc0)) => {
                let dt = t - t0;
                let acc = (twist - xi0) / dt;
                (acc, (acc - acc0) / dt)
            }
            None => (Vector6::zeros(), Vector6::zeros()),
        };
        self.prev = Some((t, *twist, acceleration));
        let over = |b: &crate::mpc::Bounds, v: &Vector6<f64>| b.excess(v).amax() > VIOLATION_SLACK;
        Differences {
            acceleration,
            jerk,
            violations: [
                over(&self.limits.velocity, twist),
                over(&self.limits.acceleration, &acceleration),
                over(&self.limits.jerk, &jerk),
            ],
        }
    }
}

/// One row of the trajectory log, recorded after each MPC tick.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub t: f64,
    pub q: Vec<f64>,
    pub x_eff: Vector8,
    pub x_d: Vector8,
    pub reference: Vector6<f64>,
    pub twist: Vector6<f64>,
    /// `‖vec8(1 − x_d* x_eff)‖`.
    pub err_norm: f64,
    /// Same measure against the final keypoint.
    pub goal_err: f64,
    pub diff: Differences,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectoryLog {
    pub records: Vec<TrajectoryRecord>,
}

impl TrajectoryLog {
    pub fn header(dof: usize) -> Vec<String> {
        let mut h = vec!["t".to_string()];
        let mut group = |name: &str, n: usize| h.extend((1..=n).map(|k| format!("{name}{k}")));
        group("q", dof);
        group("xeff", 8);
        group("xd", 8);
        group("ref", 6);
        group("twist", 6);
        h.push("err_norm".into());
        h.push("goal_err".into());
        let mut group = |name: &str, n: usize| h.extend((1..=n).map(|k| format!("{name}{k}")));
        group("acc", 6);
        group("jerk", 6);
        h.extend(["viol_vel", "viol_acc", "viol_jerk"].map(String::from));
        h
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let dof = self.records.first().map_or(0, |r| r.q.len());
        let mut out = io::create(path)?;
        io::write_row(&mut out, &Self::header(dof), path)?;
        for r in &self.records {
            let mut row = vec![io::real(r.t)];
            row.extend(r.q.iter().map(|v| io::real(*v)));
            for v in [r.x_eff.as_slice(), r.x_d.as_slice()] {
                row.extend(v.iter().map(|v| io::real(*v)));
            }
            for v in [&r.reference, &r.twist] {
                row.extend(v.iter().map(|v| io::real(*v)));
            }
            row.push(io::real(r.err_norm));
            row.push(io::real(r.goal_err));
            for v in [&r.diff.acceleration, &r.diff.jerk] {
                row.extend(v.iter().map(|v| io::real(*v)));
            }
            row.extend(r.diff.violations.iter().map(|v| u8::from(*v).to_string()));
            io::write_row(&mut out, &row, path)?;
        }
        io::flush(&mut out, path)
    }
}

/// Per-axis maxima and the number of samples over the limits.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub samples: usize,
    pub max_velocity: Vector6<f64>,
    pub max_acceleration: Vector6<f64>,
    pub max_jerk: Vector6<f64>,
    pub violations: usize,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "samples: {}", self.samples)?;
        let axes = ["wx", "wy", "wz", "vx", "vy", "vz"];
        writeln!(f, "{:<6}{:>14}{:>14}{:>14}", "axis", "|velocity|", "|accel|", "|jerk|")?;
        for k in 0..6 {
            writeln!(
                f,
                "{:<6}{:>14.6e}{:>14.6e}{:>14.6e}",
                axes[k], self.max_velocity[k], self.max_acceleration[k], self.max_jerk[k]
            )?;
        }
        write!(f, "violations: {}", self.violations)
    }
}

/// Checks a twist sequence sampled at times `t` (starting from rest).
pub fn verify_twists(t: &[f64], twists: &[Vector6<f64>], limits: &LimitSet) -> VerifyReport {
    let mut monitor = BoundMonitor::new(*limits);
    let mut report = VerifyReport {
        samples: twists.len(),
        max_velocity: Vector6::zeros(),
        max_acceleration: Vector6::zeros(),
        max_jerk: Vector6::zeros(),
        violations: 0,
    };
    for (ti, xi) in t.iter().zip(twists) {
        let d = monitor.push(*ti, xi);
        report.max_velocity = report.max_velocity.sup(&xi.abs());
        report.max_acceleration = report.max_acceleration.sup(&d.acceleration.abs());
        report.max_jerk = report.max_jerk.sup(&d.jerk.abs());
        if d.any() {
            report.violations += 1;
        }
    }
    report
}

/// Reads the `t` and `twist1 … twist6` columns of a trajectory log.
pub fn read_twists(path: &Path) -> Result<(Vec<f64>, Vec<Vector6<f64>>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: e.to_string(),
        })?;
    let headers = reader.headers()?.clone();
    let column = |name: &str| {
        headers.iter().position(|h| h.trim() == name).ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("missing column `{name}`"),
        })
    };
    let t_col = column("t")?;
    let twist_cols = (1..=6)
        .map(|k| column(&format!("twist{k}")))
        .collect::<Result<Vec<_>>>()?;
    let mut times = Vec::new();
    let mut twists = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line,
            message: e.to_string(),
        })?;
        let field = |c: usize| -> Result<f64> {
            let s = rec.get(c).unwrap_or("").trim();
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    message: format!("column {}: `{s}` is not a finite number", c + 1),
                })
        };
        let t = field(t_col)?;
        if let Some(prev) = times.last() {
            if t <= *prev {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    message: format!("time {t} does not increase"),
                });
            }
        }
        times.push(t);
        let mut xi = Vector6::zeros();
        for (k, &c) in twist_cols.iter().enumerate() {
            xi[k] = field(c)?;
        }
        twists.push(xi);
    }
    Ok((times, twists))
}

/// Recomputes finite differences from the log's twist columns.
pub fn verify_log(path: &Path, limits: &LimitSet) -> Result<VerifyReport> {
    let (t, twists) = read_twists(path)?;
    Ok(verify_twists(&t, &twists, limits))
}
