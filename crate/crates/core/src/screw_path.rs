//! Screw-linear interpolation through task-space keypoints and the reference
//! twist series derived from the sampled path.

use std::io::Write;
use std::path::Path;

use nalgebra::Vector3;

use crate::dq::{DualQuaternion, PureDualQuaternion, UnitDualQuaternion, Vector8};
use crate::error::{Error, Result};
use crate::io;

/// Ordered keypoints `k₁ … k_n`, `n ≥ 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct KeypointSet(Vec<UnitDualQuaternion>);

impl KeypointSet {
    pub fn new(points: Vec<UnitDualQuaternion>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::invalid(format!(
                "need at least 2 keypoints, got {}",
                points.len()
            )));
        }
        Ok(Self(points))
    }

    pub fn points(&self) -> &[UnitDualQuaternion] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn first(&self) -> UnitDualQuaternion {
        self.0[0]
    }

    pub fn last(&self) -> UnitDualQuaternion {
        self.0[self.0.len() - 1]
    }

    /// Left-multiplies every keypoint by `frame`.
    pub fn transformed(&self, frame: &UnitDualQuaternion) -> Self {
        Self(self.0.iter().map(|k| *frame * *k).collect())
    }

    /// Parses the keypoint text format.
    ///
    /// One keypoint per line, fields separated by commas or whitespace, `#`
    /// starts a comment. Eight fields are read as `vec8` coefficients; seven
    /// fields as `x y z ax ay az angle` (metres, axis, radians).
    pub fn parse(text: &str, source: &Path) -> Result<Self> {
        let mut points = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let err = |message: String| Error::Parse {
                path: source.to_path_buf(),
                line: n + 1,
                message,
            };
            let Some(fields) = io::parse_reals(line) else {
                continue;
            };
            let v = fields.map_err(err)?;
            let pose = match v.len() {
                8 => {
                    let h = DualQuaternion::from_vec8(&Vector8::from_column_slice(&v));
                    unit_from_record(h).map_err(err)?
                }
                7 => {
                    let axis = Vector3::new(v[3], v[4], v[5]);
                    if axis.norm() == 0.0 && v[6] != 0.0 {
                        return Err(err("rotation axis is zero".into()));
                    }
                    UnitDualQuaternion::from_axis_angle_translation(
                        &Vector3::new(v[0], v[1], v[2]),
                        &axis,
                        v[6],
                    )
                }
                k => {
                    return Err(err(format!(
                        "expected 8 (vec8) or 7 (x y z ax ay az angle) fields, found {k}"
                    )))
                }
            };
            points.push(pose);
        }
        Self::new(points).map_err(|e| Error::Parse {
            path: source.to_path_buf(),
            line: text.lines().count(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&io::read_to_string(path)?, path)
    }
}

/// Hand-written vec8 records rarely carry 1e-9 precision; anything within
/// 1e-6 of the unit subset is projected onto it.
fn unit_from_record(h: DualQuaternion) -> std::result::Result<UnitDualQuaternion, String> {
    let n = h.norm().map_err(|e| e.to_string())?;
    if (n.primary - 1.0).abs() > 1e-6 || n.dual.abs() > 1e-6 {
        return Err(format!(
            "not a unit dual quaternion (norm {} + ε{:e})",
            n.primary, n.dual
        ));
    }
    UnitDualQuaternion::normalize(h).map_err(|e| e.to_string())
}

/// `x_a (x_a⁻¹ x_b)^τ`, following the shorter screw.
pub fn sclerp(
    xa: &UnitDualQuaternion,
    xb: &UnitDualQuaternion,
    tau: f64,
) -> Result<UnitDualQuaternion> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::invalid(format!("τ = {tau} outside [0, 1]")));
    }
    let xb = align_rotation(xb, xa);
    Ok(*xa * (xa.conjugate() * xb).pow(tau))
}

/// Flips `x` onto the hemisphere of `reference` by the primary-part inner product.
fn align_rotation(x: &UnitDualQuaternion, reference: &UnitDualQuaternion) -> UnitDualQuaternion {
    if x.rotation().dot(&reference.rotation()) < 0.0 {
        -*x
    } else {
        *x
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSample {
    pub index: usize,
    /// Zero-based segment, `k_{segment} → k_{segment+1}`.
    pub segment: usize,
    pub tau: f64,
    pub pose: UnitDualQuaternion,
}

/// Sampled pose path with a fixed time step between samples.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePath {
    samples: Vec<PathSample>,
    step: f64,
}

impl DiscretePath {
    pub fn samples(&self) -> &[PathSample] {
        &self.samples
    }

    pub fn poses(&self) -> impl Iterator<Item = UnitDualQuaternion> + '_ {
        self.samples.iter().map(|s| s.pose)
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// CSV with columns `i, segment, tau, h1 … h8`.
    pub fn write_csv<W: Write>(&self, out: &mut W, dest: &Path) -> Result<()> {
        let header: Vec<String> = ["i", "segment", "tau"]
            .iter()
            .map(|s| s.to_string())
            .chain((1..=8).map(|k| format!("h{k}")))
            .collect();
        io::write_row(out, &header, dest)?;
        for s in &self.samples {
            let mut row = vec![s.index.to_string(), s.segment.to_string(), io::real(s.tau)];
            row.extend(s.pose.vec8().iter().map(|v| io::real(*v)));
            io::write_row(out, &row, dest)?;
        }
        io::flush(out, dest)
    }
}

/// Concatenates per-segment ScLERP samples at `τ ∈ {0, 1/m, …, 1}`, dropping
/// the repeated junction pose at the start of every segment after the first.
///
/// Keypoints are sign-aligned to their predecessor first so the path is
/// continuous in the coefficients, and segment endpoints are the keypoints
/// themselves.
pub fn generate_path(
    keypoints: &KeypointSet,
    samples_per_segment: usize,
    step: f64,
) -> Result<DiscretePath> {
    if samples_per_segment == 0 {
        return Err(Error::invalid("samples_per_segment must be at least 1"));
    }
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::invalid(format!("path step {step} must be positive")));
    }
    let m = samples_per_segment;
    let mut aligned = Vec::with_capacity(keypoints.len());
    aligned.push(keypoints.first());
    for k in &keypoints.points()[1..] {
        let prev = aligned[aligned.len() - 1];
        aligned.push(align_rotation(k, &prev));
    }

    let mut samples = Vec::with_capacity((keypoints.len() - 1) * m + 1);
    for (segment, pair) in aligned.windows(2).enumerate() {
        let (xa, xb) = (pair[0], pair[1]);
        let start = if segment == 0 { 0 } else { 1 };
        for j in start..=m {
            let tau = j as f64 / m as f64;
            let pose = match j {
                0 => xa,
                _ if j == m => xb,
                _ => sclerp(&xa, &xb, tau)?,
            };
            samples.push(PathSample {
                index: samples.len(),
                segment,
                tau,
                pose,
            });
        }
    }
    Ok(DiscretePath { samples, step })
}

/// Reference twists aligned with a path's samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTwistSeries {
    twists: Vec<PureDualQuaternion>,
    step: f64,
}

impl ReferenceTwistSeries {
    pub fn twists(&self) -> &[PureDualQuaternion] {
        &self.twists
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.twists.len()
    }

    pub fn is_empty(&self) -> bool {
        self.twists.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<&PureDualQuaternion> {
        self.twists.get(i)
    }

    /// CSV with columns `i, t, xi1 … xi6`.
    pub fn write_csv<W: Write>(&self, out: &mut W, dest: &Path) -> Result<()> {
        let header: Vec<String> = ["i", "t"]
            .iter()
            .map(|s| s.to_string())
            .chain((1..=6).map(|k| format!("xi{k}")))
            .collect();
        io::write_row(out, &header, dest)?;
        for (i, xi) in self.twists.iter().enumerate() {
            let mut row = vec![i.to_string(), io::real(i as f64 * self.step)];
            row.extend(xi.vec6().iter().map(|v| io::real(*v)));
            io::write_row(out, &row, dest)?;
        }
        io::flush(out, dest)
    }
}

/// `ξ_r[i] = (2/τ) log(x_d[i] x_d*[i−1])` with `ξ_r[0] = 0`.
///
/// The displacement is taken on its shorter screw before the logarithm, and
/// the twist is expressed in the base frame (the displacement multiplies
/// from the left).
pub fn reference_twists(path: &DiscretePath) -> Result<ReferenceTwistSeries> {
    let step = path.step;
    if !(step > 0.0) {
        return Err(Error::invalid("reference twists need a positive time step"));
    }
    if path.len() < 2 {
        return Err(Error::invalid("reference twists need at least 2 path samples"));
    }
    let mut twists = Vec::with_capacity(path.len());
    twists.push(PureDualQuaternion::ZERO);
    for w in path.samples.windows(2) {
        let delta = (w[1].pose * w[0].pose.conjugate()).shortest();
        twists.push(delta.log().scale(2.0 / step));
    }
    Ok(ReferenceTwistSeries { twists, step })
}
