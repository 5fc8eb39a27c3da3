//! Serial-chain forward kinematics, the pose Jacobian and the inner-loop
//! kinematic control law.

use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, Vector3};
use serde::Deserialize;

use crate::dq::{c8, hamilton_minus_8, DualQuaternion, Matrix8, UnitDualQuaternion, Vector8};
use crate::error::{Error, Result};
use crate::io;

/// Singular values at or below this are treated as zero by the pseudo-inverse.
pub const SINGULAR_VALUE_CUTOFF: f64 = 1e-8;
/// Damping of the least-squares fallback near singularities.
pub const DAMPING: f64 = 1e-4;
/// Rank of the task matrix away from singularities (the unit constraint removes two).
const TASK_RANK: usize = 6;

/// Rotation axis of a revolute joint, in the joint's local frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JointAxis {
    X,
    Y,
    Z,
    NegX,
    NegY,
    NegZ,
    /// Does not move; the joint angle is ignored.
    Fixed,
}

impl JointAxis {
    pub fn unit(self) -> Vector3<f64> {
        match self {
            JointAxis::X => Vector3::x(),
            JointAxis::Y => Vector3::y(),
            JointAxis::Z => Vector3::z(),
            JointAxis::NegX => -Vector3::x(),
            JointAxis::NegY => -Vector3::y(),
            JointAxis::NegZ => -Vector3::z(),
            JointAxis::Fixed => Vector3::zeros(),
        }
    }
}

impl FromStr for JointAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "x" | "+x" => Ok(JointAxis::X),
            "y" | "+y" => Ok(JointAxis::Y),
            "z" | "+z" => Ok(JointAxis::Z),
            "-x" => Ok(JointAxis::NegX),
            "-y" => Ok(JointAxis::NegY),
            "-z" => Ok(JointAxis::NegZ),
            "fixed" => Ok(JointAxis::Fixed),
            other => Err(Error::Config(format!("unknown joint axis `{other}`"))),
        }
    }
}

/// One revolute joint: a fixed offset followed by a rotation about `axis`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Joint {
    pub offset: UnitDualQuaternion,
    pub axis: JointAxis,
    pub q_min: f64,
    pub q_max: f64,
    pub qd_max: f64,
}

impl Joint {
    pub fn new(offset: UnitDualQuaternion, axis: JointAxis) -> Self {
        Self {
            offset,
            axis,
            q_min: f64::NEG_INFINITY,
            q_max: f64::INFINITY,
            qd_max: f64::INFINITY,
        }
    }

    pub fn with_limits(mut self, q_min: f64, q_max: f64, qd_max: f64) -> Self {
        self.q_min = q_min;
        self.q_max = q_max;
        self.qd_max = qd_max;
        self
    }

    /// `offset · rot_axis(q)`.
    pub fn transform(&self, q: f64) -> UnitDualQuaternion {
        match self.axis {
            JointAxis::Fixed => self.offset,
            axis => self.offset * UnitDualQuaternion::from_rotation(&axis.unit(), q),
        }
    }
}

/// Modified Denavit-Hartenberg row: `RotX(alpha) TransX(a) RotZ(q) TransZ(d)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DhRow {
    pub a: f64,
    pub d: f64,
    pub alpha: f64,
}

impl DhRow {
    /// The part of the row that does not depend on `q`.
    pub fn offset(&self) -> UnitDualQuaternion {
        UnitDualQuaternion::from_rotation(&Vector3::x(), self.alpha)
            * UnitDualQuaternion::from_translation(&Vector3::new(self.a, 0.0, self.d))
    }
}

/// Revolute serial chain ending in a fixed tool transform.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotModel {
    pub name: String,
    joints: Vec<Joint>,
    tool: UnitDualQuaternion,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RobotFile {
    #[serde(default)]
    name: String,
    tool: Option<Vec<f64>>,
    joints: Vec<JointFile>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JointFile {
    offset: Vec<f64>,
    axis: String,
    q_min: Option<f64>,
    q_max: Option<f64>,
    qd_max: Option<f64>,
}

fn unit_from_file(v: &[f64], what: &str) -> Result<UnitDualQuaternion> {
    if v.len() != 8 {
        return Err(Error::Config(format!(
            "{what}: expected 8 coefficients, got {}",
            v.len()
        )));
    }
    UnitDualQuaternion::from_vec8(&Vector8::from_column_slice(v))
        .map_err(|e| Error::Config(format!("{what}: {e}")))
}

impl RobotModel {
    pub fn new(name: impl Into<String>, joints: Vec<Joint>, tool: UnitDualQuaternion) -> Result<Self> {
        if joints.is_empty() {
            return Err(Error::Config("a robot needs at least one joint".into()));
        }
        for (i, j) in joints.iter().enumerate() {
            if j.q_min.is_nan() || j.q_max.is_nan() || j.q_min > j.q_max {
                return Err(Error::Config(format!(
                    "joint {}: position limits [{}, {}] are empty",
                    i + 1,
                    j.q_min,
                    j.q_max
                )));
            }
            if !(j.qd_max > 0.0) {
                return Err(Error::Config(format!(
                    "joint {}: velocity limit {} must be positive",
                    i + 1,
                    j.qd_max
                )));
            }
        }
        Ok(Self {
            name: name.into(),
            joints,
            tool,
        })
    }

    /// Chain of z-axis revolute joints from modified DH rows.
    pub fn from_modified_dh(name: impl Into<String>, rows: &[DhRow], tool: UnitDualQuaternion) -> Result<Self> {
        let joints = rows
            .iter()
            .map(|r| Joint::new(r.offset(), JointAxis::Z))
            .collect();
        Self::new(name, joints, tool)
    }

    pub fn parse(text: &str, source: &Path) -> Result<Self> {
        let file: RobotFile = toml::from_str(text)
            .map_err(|e| Error::Config(format!("{}: {e}", source.display())))?;
        let tool = match &file.tool {
            Some(v) => unit_from_file(v, "tool")?,
            None => UnitDualQuaternion::IDENTITY,
        };
        let joints = file
            .joints
            .iter()
            .enumerate()
            .map(|(i, j)| {
                let what = format!("joint {}", i + 1);
                Ok(Joint::new(unit_from_file(&j.offset, &what)?, j.axis.parse()?).with_limits(
                    j.q_min.unwrap_or(f64::NEG_INFINITY),
                    j.q_max.unwrap_or(f64::INFINITY),
                    j.qd_max.unwrap_or(f64::INFINITY),
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(file.name, joints, tool)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&io::read_to_string(path)?, path)
    }

    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    pub fn joints(&self) -> &[Joint] {
        &self.joints
    }

    pub fn tool(&self) -> UnitDualQuaternion {
        self.tool
    }

    fn check(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.dof() {
            return Err(Error::DimensionMismatch {
                expected: self.dof(),
                actual: q.len(),
            });
        }
        Ok(())
    }

    /// Clamps each joint into its position limits.
    pub fn clamp_positions(&self, q: &mut DVector<f64>) {
        for (v, j) in q.iter_mut().zip(&self.joints) {
            *v = v.clamp(j.q_min, j.q_max);
        }
    }

    /// Scales `qd` uniformly so every joint respects its velocity limit.
    /// Returns the factor applied (1 when already inside).
    pub fn scale_velocities(&self, qd: &mut DVector<f64>) -> f64 {
        let worst = qd
            .iter()
            .zip(&self.joints)
            .map(|(v, j)| v.abs() / j.qd_max)
            .fold(0.0, f64::max);
        if worst > 1.0 {
            *qd /= worst;
            1.0 / worst
        } else {
            1.0
        }
    }
}

/// Joint positions and rates.
#[derive(Debug, Clone, PartialEq)]
pub struct JointState {
    pub q: DVector<f64>,
    pub qd: DVector<f64>,
}

impl JointState {
    pub fn at_rest(q: DVector<f64>) -> Self {
        let qd = DVector::zeros(q.len());
        Self { q, qd }
    }
}

/// `∏ (offset_j · rot_j(q_j)) · tool`.
pub fn forward_kinematics(model: &RobotModel, q: &[f64]) -> Result<UnitDualQuaternion> {
    model.check(q)?;
    let x = model
        .joints
        .iter()
        .zip(q)
        .fold(UnitDualQuaternion::IDENTITY, |acc, (j, &qj)| acc * j.transform(qj));
    Ok(x * model.tool)
}

/// `8 × n` matrix with `d/dt vec8(x) = J q̇`.
///
/// Since `d/dq rot(q) = rot(q) · ½ a` for a joint axis `a`, column `j` is
/// `vec8(prefix_j · ½ a_j · suffix_j)` where the prefix includes joint `j`.
pub fn pose_jacobian(model: &RobotModel, q: &[f64]) -> Result<DMatrix<f64>> {
    model.check(q)?;
    let n = model.dof();
    let transforms: Vec<UnitDualQuaternion> =
        model.joints.iter().zip(q).map(|(j, &qj)| j.transform(qj)).collect();
    let mut suffix = vec![model.tool; n];
    for j in (0..n - 1).rev() {
        suffix[j] = transforms[j + 1] * suffix[j + 1];
    }
    let mut jac = DMatrix::zeros(8, n);
    let mut prefix = UnitDualQuaternion::IDENTITY;
    for j in 0..n {
        prefix = prefix * transforms[j];
        let a = model.joints[j].axis.unit() * 0.5;
        let half_axis = DualQuaternion::new(
            crate::dq::Quaternion::pure(&a),
            crate::dq::Quaternion::ZERO,
        );
        let col = *prefix.as_dq() * half_axis * *suffix[j].as_dq();
        jac.set_column(j, &col.vec8());
    }
    Ok(jac)
}

/// Tracking error `e = 1 − x_d* x_eff`, zero iff the poses coincide.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseError {
    pub e: DualQuaternion,
}

impl PoseError {
    pub fn vec8(&self) -> Vector8 {
        self.e.vec8()
    }

    pub fn norm(&self) -> f64 {
        self.vec8().norm()
    }
}

/// `1 − x_d* x_eff`, with `x_eff` flipped onto the same cover as `x_d` first.
pub fn pose_error(x_d: &UnitDualQuaternion, x_eff: &UnitDualQuaternion) -> PoseError {
    let x_eff = x_eff.aligned_with(x_d);
    let prod = *x_d.conjugate().as_dq() * *x_eff.as_dq();
    PoseError {
        e: DualQuaternion::ONE - prod,
    }
}

/// Moore-Penrose pseudo-inverse from an SVD, and the numerical rank.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoInverse {
    pub matrix: DMatrix<f64>,
    pub rank: usize,
    /// Whether the damped fallback was used.
    pub damped: bool,
}

/// Pseudo-inverse with singular values `≤ cutoff` dropped. When the rank falls
/// below `expected_rank`, returns the damped least-squares inverse
/// `Σ σ/(σ² + λ²) v uᵀ` instead.
pub fn pseudo_inverse(
    m: &DMatrix<f64>,
    cutoff: f64,
    expected_rank: usize,
    damping: f64,
) -> Result<PseudoInverse> {
    if !m.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("matrix passed to pseudo_inverse".into()));
    }
    let svd = m.clone().svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::invalid("SVD did not produce singular vectors")),
    };
    let rank = svd.singular_values.iter().filter(|s| **s > cutoff).count();
    let damped = rank < expected_rank;
    let inv_sigma = svd.singular_values.map(|s| {
        if damped {
            s / (s * s + damping * damping)
        } else if s > cutoff {
            1.0 / s
        } else {
            0.0
        }
    });
    let matrix = v_t.transpose() * DMatrix::from_diagonal(&inv_sigma) * u.transpose();
    Ok(PseudoInverse {
        matrix,
        rank,
        damped,
    })
}

/// Joint-rate command from one inner-loop step.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerCommand {
    pub qd: DVector<f64>,
    pub error: PoseError,
    /// Task matrix lost rank and the damped inverse was used.
    pub singular: bool,
}

/// `q̇ = −(H⁻₈(x_d) C₈ J)† K vec8(e)`.
pub fn inner_control(
    model: &RobotModel,
    q: &[f64],
    x_d: &UnitDualQuaternion,
    gain: &Matrix8,
) -> Result<InnerCommand> {
    let x_eff = forward_kinematics(model, q)?;
    let error = pose_error(x_d, &x_eff);
    let jac = pose_jacobian(model, q)?;
    let h = hamilton_minus_8(x_d.as_dq()) * c8();
    let task = DMatrix::from_column_slice(8, 8, h.as_slice()) * jac;
    let pinv = pseudo_inverse(
        &task,
        SINGULAR_VALUE_CUTOFF,
        TASK_RANK.min(model.dof()),
        DAMPING,
    )?;
    let ke = gain * error.vec8();
    let qd = -(&pinv.matrix * DVector::from_column_slice(ke.as_slice()));
    if !qd.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("joint-rate command".into()));
    }
    Ok(InnerCommand {
        qd,
        error,
        singular: pinv.damped,
    })
}

/// `K = k · I₈`.
pub fn isotropic_gain(k: f64) -> Matrix8 {
    Matrix8::identity() * k
}

/// One explicit Euler step `q ← clamp(q + dt · scale(q̇))` of the inner loop.
/// Returns the command before scaling.
pub fn inner_step(
    model: &RobotModel,
    q: &mut DVector<f64>,
    x_d: &UnitDualQuaternion,
    gain: &Matrix8,
    dt: f64,
) -> Result<InnerCommand> {
    let cmd = inner_control(model, q.as_slice(), x_d, gain)?;
    let mut qd = cmd.qd.clone();
    model.scale_velocities(&mut qd);
    *q += qd * dt;
    model.clamp_positions(q);
    Ok(cmd)
}

/// Result of driving the chain to a fixed pose.
#[derive(Debug, Clone, PartialEq)]
pub struct Regulation {
    pub q: DVector<f64>,
    /// `‖vec8(e)‖` before each step, then after the last one.
    pub errors: Vec<f64>,
    pub converged: bool,
    pub singular_steps: usize,
}

/// Runs the inner loop at period `dt` towards a constant `x_d` until the error
/// norm is at most `tol` or `max_time` seconds have elapsed.
pub fn regulate(
    model: &RobotModel,
    q0: &[f64],
    x_d: &UnitDualQuaternion,
    gain: &Matrix8,
    dt: f64,
    tol: f64,
    max_time: f64,
) -> Result<Regulation> {
    if !(dt > 0.0) || !(tol > 0.0) {
        return Err(Error::invalid("regulation needs positive dt and tol"));
    }
    model.check(q0)?;
    let mut q = DVector::from_column_slice(q0);
    let steps = (max_time / dt).round() as usize;
    let mut errors = Vec::with_capacity(steps + 1);
    let mut singular_steps = 0;
    for _ in 0..steps {
        let x = forward_kinematics(model, q.as_slice())?;
        let err = pose_error(x_d, &x).norm();
        errors.push(err);
        if err <= tol {
            return Ok(Regulation {
                q,
                errors,
                converged: true,
                singular_steps,
            });
        }
        if inner_step(model, &mut q, x_d, gain, dt)?.singular {
            singular_steps += 1;
        }
    }
    let err = pose_error(x_d, &forward_kinematics(model, q.as_slice())?).norm();
    errors.push(err);
    Ok(Regulation {
        q,
        errors,
        converged: err <= tol,
        singular_steps,
    })
}
