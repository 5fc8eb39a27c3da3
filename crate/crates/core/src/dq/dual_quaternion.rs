use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{Matrix4, SVector, Vector3, Vector6};

use super::quaternion::{Quaternion, UNIT_TOLERANCE};
use crate::error::{Error, Result};

/// Below this rotation half-angle (or `sin` of it) the exp/log maps switch to
/// their pure-translation limits.
pub const SMALL_ANGLE: f64 = 1e-8;

pub type Vector8 = SVector<f64, 8>;

/// Dual quaternion `h_P + ε h_D` with `ε² = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DualQuaternion {
    pub primary: Quaternion,
    pub dual: Quaternion,
}

/// Dual number `a + ε b`, used for the dual-quaternion norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualScalar {
    pub primary: f64,
    pub dual: f64,
}

impl DualQuaternion {
    pub const ZERO: DualQuaternion = DualQuaternion::new(Quaternion::ZERO, Quaternion::ZERO);
    pub const ONE: DualQuaternion = DualQuaternion::new(Quaternion::ONE, Quaternion::ZERO);

    pub const fn new(primary: Quaternion, dual: Quaternion) -> Self {
        Self { primary, dual }
    }

    /// Coefficients `[h₁ … h₈]`, primary part first, each part stored `[w, x, y, z]`.
    pub fn vec8(&self) -> Vector8 {
        let p = self.primary;
        let d = self.dual;
        Vector8::from([p.w, p.x, p.y, p.z, d.w, d.x, d.y, d.z])
    }

    pub fn from_vec8(v: &Vector8) -> Self {
        Self::from_slice8(v.as_slice())
    }

    pub(crate) fn from_slice8(v: &[f64]) -> Self {
        Self::new(
            Quaternion::new(v[0], v[1], v[2], v[3]),
            Quaternion::new(v[4], v[5], v[6], v[7]),
        )
    }

    pub fn conjugate(&self) -> Self {
        Self::new(self.primary.conjugate(), self.dual.conjugate())
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.primary.scale(s), self.dual.scale(s))
    }

    /// `‖h‖ = (‖h_P‖, ⟨h_P, h_D⟩ / ‖h_P‖)`.
    pub fn norm(&self) -> Result<DualScalar> {
        let primary = self.primary.norm();
        if primary < f64::MIN_POSITIVE {
            return Err(Error::DegenerateNorm);
        }
        Ok(DualScalar {
            primary,
            dual: self.primary.dot(&self.dual) / primary,
        })
    }

    pub fn is_unit(&self) -> bool {
        match self.norm() {
            Ok(n) => (n.primary - 1.0).abs() <= UNIT_TOLERANCE && n.dual.abs() <= UNIT_TOLERANCE,
            Err(_) => false,
        }
    }

    pub fn is_pure(&self) -> bool {
        self.primary.is_pure() && self.dual.is_pure()
    }

    pub fn is_finite(&self) -> bool {
        self.primary.is_finite() && self.dual.is_finite()
    }

    /// Largest absolute coefficient difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (self.vec8() - other.vec8()).amax()
    }

    /// Exponential of a pure dual quaternion.
    pub fn exp(&self) -> Result<UnitDualQuaternion> {
        Ok(PureDualQuaternion::new(*self)?.exp())
    }
}

impl Add for DualQuaternion {
    type Output = DualQuaternion;
    fn add(self, o: Self) -> Self {
        Self::new(self.primary + o.primary, self.dual + o.dual)
    }
}

impl Sub for DualQuaternion {
    type Output = DualQuaternion;
    fn sub(self, o: Self) -> Self {
        Self::new(self.primary - o.primary, self.dual - o.dual)
    }
}

impl Neg for DualQuaternion {
    type Output = DualQuaternion;
    fn neg(self) -> Self {
        Self::new(-self.primary, -self.dual)
    }
}

impl Mul for DualQuaternion {
    type Output = DualQuaternion;
    fn mul(self, o: Self) -> Self {
        // ε² = 0 drops the dual·dual term.
        Self::new(
            self.primary * o.primary,
            self.primary * o.dual + self.dual * o.primary,
        )
    }
}

impl Mul<f64> for DualQuaternion {
    type Output = DualQuaternion;
    fn mul(self, s: f64) -> Self {
        self.scale(s)
    }
}

impl fmt::Display for DualQuaternion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}) + ε({})", self.primary, self.dual)
    }
}

/// Unit dual quaternion `r + ε ½ p r`, a rigid transformation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitDualQuaternion(DualQuaternion);

impl UnitDualQuaternion {
    pub const IDENTITY: UnitDualQuaternion = UnitDualQuaternion(DualQuaternion::ONE);

    /// Checked constructor; both norm components must be within `1e-9` of `(1, 0)`.
    pub fn new(h: DualQuaternion) -> Result<Self> {
        let n = h.norm()?;
        if (n.primary - 1.0).abs() > UNIT_TOLERANCE || n.dual.abs() > UNIT_TOLERANCE {
            return Err(Error::NotUnit {
                primary: n.primary,
                dual: n.dual,
            });
        }
        Ok(Self(h))
    }

    /// Projects `h` back onto the unit subset: scales the primary part to unit norm
    /// and removes the dual component parallel to it.
    pub fn normalize(h: DualQuaternion) -> Result<Self> {
        let n = h.primary.norm();
        if n < f64::MIN_POSITIVE || !h.is_finite() {
            return Err(Error::DegenerateNorm);
        }
        let r = h.primary.scale(1.0 / n);
        let d = h.dual.scale(1.0 / n);
        let d = d - r.scale(r.dot(&d));
        Ok(Self(DualQuaternion::new(r, d)))
    }

    /// Pose with rotation `r` (unit) followed by translation `p`, expressed in the base frame.
    pub fn from_rotation_translation(r: Quaternion, p: &Vector3<f64>) -> Result<Self> {
        if !r.is_unit() {
            return Err(Error::NotUnit {
                primary: r.norm(),
                dual: 0.0,
            });
        }
        Ok(Self(DualQuaternion::new(
            r,
            (Quaternion::pure(p) * r).scale(0.5),
        )))
    }

    pub fn from_translation(p: &Vector3<f64>) -> Self {
        Self(DualQuaternion::new(
            Quaternion::ONE,
            Quaternion::pure(p).scale(0.5),
        ))
    }

    pub fn from_rotation(axis: &Vector3<f64>, angle: f64) -> Self {
        Self(DualQuaternion::new(
            Quaternion::from_axis_angle(axis, angle),
            Quaternion::ZERO,
        ))
    }

    /// Translation `p` plus rotation `angle` about `axis`.
    pub fn from_axis_angle_translation(
        p: &Vector3<f64>,
        axis: &Vector3<f64>,
        angle: f64,
    ) -> Self {
        let r = Quaternion::from_axis_angle(axis, angle);
        Self(DualQuaternion::new(
            r,
            (Quaternion::pure(p) * r).scale(0.5),
        ))
    }

    pub fn from_vec8(v: &Vector8) -> Result<Self> {
        Self::new(DualQuaternion::from_vec8(v))
    }

    pub fn as_dq(&self) -> &DualQuaternion {
        &self.0
    }

    pub fn into_dq(self) -> DualQuaternion {
        self.0
    }

    pub fn vec8(&self) -> Vector8 {
        self.0.vec8()
    }

    pub fn rotation(&self) -> Quaternion {
        self.0.primary
    }

    /// Position `p = 2 x_D x_P*`.
    pub fn translation(&self) -> Vector3<f64> {
        (self.0.dual * self.0.primary.conjugate())
            .scale(2.0)
            .vector()
    }

    /// Conjugate, which is also the group inverse.
    pub fn conjugate(&self) -> Self {
        Self(self.0.conjugate())
    }

    pub fn inverse(&self) -> Self {
        self.conjugate()
    }

    /// Representative of the same pose with a non-negative primary real part.
    pub fn shortest(&self) -> Self {
        if self.0.primary.w < 0.0 {
            -*self
        } else {
            *self
        }
    }

    /// Representative of the same pose on the same hemisphere as `reference`
    /// (non-negative inner product of all eight coefficients).
    pub fn aligned_with(&self, reference: &Self) -> Self {
        if self.vec8().dot(&reference.vec8()) < 0.0 {
            -*self
        } else {
            *self
        }
    }

    /// Principal logarithm `(θ/2) l + ε((d/2) l + (θ/2) m)` with `θ ∈ [0, 2π)`.
    ///
    /// The branch is not sign-normalized: `x` and `-x` give different screws
    /// (`θ` and `2π - θ`). Call [`shortest`](Self::shortest) first for the
    /// shorter one. For a rotation about an axis through the origin the dual
    /// part reduces to `p/2`.
    pub fn log(&self) -> PureDualQuaternion {
        let r = self.0.primary;
        let s = r.vector().norm();
        if s < SMALL_ANGLE && r.w < 0.0 {
            // Rotation by ~2π: the axis is undefined, use the other cover.
            return (-*self).log();
        }
        let p = self.translation();
        let rv = r.vector();
        let (angular, a_cot_a, lin_axial) = if s < SMALL_ANGLE {
            (rv, 1.0, Vector3::zeros())
        } else {
            let half = s.atan2(r.w);
            let axis = rv / s;
            let f = half * r.w / s;
            (axis * half, f, axis * (0.5 * (1.0 - f) * p.dot(&axis)))
        };
        let linear = p * (0.5 * a_cot_a) + lin_axial + p.cross(&angular) * 0.5;
        PureDualQuaternion::from_vectors(&angular, &linear)
    }

    /// `exp(τ log x)`.
    pub fn pow(&self, tau: f64) -> Self {
        self.log().scale(tau).exp()
    }

    /// Screw decomposition of the shortest representative.
    pub fn screw(&self) -> ScrewParameters {
        let x = self.shortest();
        let r = x.0.primary;
        let p = x.translation();
        let s = r.vector().norm();
        if s < SMALL_ANGLE {
            let d = p.norm();
            let axis = if d > 0.0 { p / d } else { Vector3::z() };
            return ScrewParameters {
                angle: 0.0,
                displacement: d,
                axis,
                moment: Vector3::zeros(),
            };
        }
        let half = s.atan2(r.w);
        let axis = r.vector() / s;
        let d = p.dot(&axis);
        let cot = r.w / s;
        let moment = ((p - axis * d) * cot + p.cross(&axis)) * 0.5;
        ScrewParameters {
            angle: 2.0 * half,
            displacement: d,
            axis,
            moment,
        }
    }

    /// `x ξ x*`: re-expresses a twist in the frame `x` maps from.
    pub fn adjoint(&self, xi: &PureDualQuaternion) -> PureDualQuaternion {
        PureDualQuaternion::project(self.0 * *xi.as_dq() * self.0.conjugate())
    }

    /// 4×4 homogeneous transform.
    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let rot = self.0.primary.to_rotation_matrix();
        let p = self.translation();
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&rot);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&p);
        m
    }

    /// Renormalizes accumulated rounding drift.
    pub fn renormalized(&self) -> Self {
        Self::normalize(self.0).unwrap_or(*self)
    }
}

impl Mul for UnitDualQuaternion {
    type Output = UnitDualQuaternion;
    fn mul(self, o: Self) -> Self {
        Self(self.0 * o.0)
    }
}

impl Neg for UnitDualQuaternion {
    type Output = UnitDualQuaternion;
    fn neg(self) -> Self {
        Self(-self.0)
    }
}

impl From<UnitDualQuaternion> for DualQuaternion {
    fn from(x: UnitDualQuaternion) -> Self {
        x.0
    }
}

/// Pure dual quaternion: a twist with angular (primary) and linear (dual) parts.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PureDualQuaternion(DualQuaternion);

impl PureDualQuaternion {
    pub const ZERO: PureDualQuaternion = PureDualQuaternion(DualQuaternion::ZERO);

    /// Fails if either real part exceeds `1e-12`; the real parts are then set to zero.
    pub fn new(h: DualQuaternion) -> Result<Self> {
        if !h.is_pure() {
            return Err(Error::NotPure {
                primary: h.primary.w,
                dual: h.dual.w,
            });
        }
        Ok(Self::project(h))
    }

    /// Drops the real parts.
    pub(crate) fn project(h: DualQuaternion) -> Self {
        Self(DualQuaternion::new(h.primary.imag(), h.dual.imag()))
    }

    pub fn from_vectors(angular: &Vector3<f64>, linear: &Vector3<f64>) -> Self {
        Self(DualQuaternion::new(
            Quaternion::pure(angular),
            Quaternion::pure(linear),
        ))
    }

    /// Inverse of [`vec6`](Self::vec6).
    pub fn from_vec6(v: &Vector6<f64>) -> Self {
        Self::from_vectors(
            &Vector3::new(v[0], v[1], v[2]),
            &Vector3::new(v[3], v[4], v[5]),
        )
    }

    /// `[h₂ h₃ h₄ h₆ h₇ h₈]`.
    pub fn vec6(&self) -> Vector6<f64> {
        let p = self.0.primary;
        let d = self.0.dual;
        Vector6::new(p.x, p.y, p.z, d.x, d.y, d.z)
    }

    pub fn angular(&self) -> Vector3<f64> {
        self.0.primary.vector()
    }

    pub fn linear(&self) -> Vector3<f64> {
        self.0.dual.vector()
    }

    pub fn as_dq(&self) -> &DualQuaternion {
        &self.0
    }

    pub fn vec8(&self) -> Vector8 {
        self.0.vec8()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(self.0.scale(s))
    }

    /// Exponential map onto the unit dual quaternions.
    ///
    /// With `g = (θ/2) l + ε((d/2) l + (θ/2) m)` this evaluates
    /// `cos(θ̂/2) + sin(θ̂/2) l̂` for the dual angle `θ̂ = θ + εd` and dual axis
    /// `l̂ = l + εm`, arranged so that every division by `θ` appears inside a
    /// `sin(a)/a` factor.
    pub fn exp(&self) -> UnitDualQuaternion {
        let gp = self.angular();
        let gd = self.linear();
        let half = gp.norm();
        let (cos, sin) = (half.cos(), half.sin());
        let sinc = if half < SMALL_ANGLE { 1.0 } else { sin / half };
        let along = gd.dot(&gp);
        let primary = Quaternion::new(cos, sinc * gp.x, sinc * gp.y, sinc * gp.z);
        let mut dual_v = gd * sinc;
        if half >= SMALL_ANGLE {
            dual_v += gp * (along / (half * half) * (cos - sinc));
        }
        let dual = Quaternion::new(-along * sinc, dual_v.x, dual_v.y, dual_v.z);
        UnitDualQuaternion(DualQuaternion::new(primary, dual))
    }
}

impl Add for PureDualQuaternion {
    type Output = PureDualQuaternion;
    fn add(self, o: Self) -> Self {
        Self(self.0 + o.0)
    }
}

impl Sub for PureDualQuaternion {
    type Output = PureDualQuaternion;
    fn sub(self, o: Self) -> Self {
        Self(self.0 - o.0)
    }
}

impl From<PureDualQuaternion> for DualQuaternion {
    fn from(x: PureDualQuaternion) -> Self {
        x.0
    }
}

/// Screw motion: rotation `angle` about, and translation `displacement` along,
/// the line with direction `axis` and moment `moment`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScrewParameters {
    /// θ in `[0, π]`.
    pub angle: f64,
    /// d, in the translation unit.
    pub displacement: f64,
    pub axis: Vector3<f64>,
    pub moment: Vector3<f64>,
}

impl ScrewParameters {
    /// `(θ̂/2) l̂`.
    pub fn log(&self) -> PureDualQuaternion {
        let half = 0.5 * self.angle;
        PureDualQuaternion::from_vectors(
            &(self.axis * half),
            &(self.axis * (0.5 * self.displacement) + self.moment * half),
        )
    }

    /// `cos(θ̂/2) + sin(θ̂/2) l̂` expanded with `cos(a+εb) = cos a − εb sin a`
    /// and `sin(a+εb) = sin a + εb cos a`.
    pub fn to_unit(&self) -> UnitDualQuaternion {
        let (sin, cos) = (0.5 * self.angle).sin_cos();
        let half_d = 0.5 * self.displacement;
        let l = self.axis;
        let m = self.moment;
        let primary = Quaternion::new(cos, sin * l.x, sin * l.y, sin * l.z);
        let dual_v = l * (half_d * cos) + m * sin;
        let dual = Quaternion::new(-half_d * sin, dual_v.x, dual_v.y, dual_v.z);
        UnitDualQuaternion(DualQuaternion::new(primary, dual))
    }
}
