//! Dual quaternion algebra.
//!
//! Poses are unit dual quaternions `r + ε ½ p r`, twists are pure dual
//! quaternions `ω + ε v`. Coefficients are stored `[w, x, y, z]` per part,
//! so `vec8` and `vec6` layouts are fixed.

mod dual_quaternion;
mod quaternion;

use nalgebra::SMatrix;

pub use dual_quaternion::{
    DualQuaternion, DualScalar, PureDualQuaternion, ScrewParameters, UnitDualQuaternion, Vector8,
    SMALL_ANGLE,
};
pub use quaternion::{Quaternion, PURE_TOLERANCE, UNIT_TOLERANCE};

pub type Matrix8 = SMatrix<f64, 8, 8>;

/// `vec8(a h) = H⁺₈(a) vec8(h)`.
pub fn hamilton_plus_8(h: &DualQuaternion) -> Matrix8 {
    let p = h.primary.hamilton_plus();
    let d = h.dual.hamilton_plus();
    let mut m = Matrix8::zeros();
    m.fixed_view_mut::<4, 4>(0, 0).copy_from(&p);
    m.fixed_view_mut::<4, 4>(4, 4).copy_from(&p);
    m.fixed_view_mut::<4, 4>(4, 0).copy_from(&d);
    m
}

/// `vec8(a h) = H⁻₈(h) vec8(a)`.
pub fn hamilton_minus_8(h: &DualQuaternion) -> Matrix8 {
    let p = h.primary.hamilton_minus();
    let d = h.dual.hamilton_minus();
    let mut m = Matrix8::zeros();
    m.fixed_view_mut::<4, 4>(0, 0).copy_from(&p);
    m.fixed_view_mut::<4, 4>(4, 4).copy_from(&p);
    m.fixed_view_mut::<4, 4>(4, 0).copy_from(&d);
    m
}

/// `C₈ = diag(1, −1, −1, −1, 1, −1, −1, −1)`, so that `C₈ vec8(h) = vec8(h*)`.
pub fn c8() -> Matrix8 {
    Matrix8::from_diagonal(&Vector8::from([1.0, -1.0, -1.0, -1.0, 1.0, -1.0, -1.0, -1.0]))
}
