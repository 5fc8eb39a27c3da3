use nalgebra::{DMatrix, DVector, SVector, Vector6};

use crate::error::{Error, Result};

/// Discrete double integrator on the 6-D twist, in plant and
/// backward-difference augmented form.
///
/// Plant state is `[ξ; ξ̇]` (12), input `u = ξ̈` (6), output `ξ` (6).
/// The augmented state is `[Δξ; Δξ̇; ξ]` (18) driven by `Δu`.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedModel {
    pub sample_time: f64,
    pub plant_a: DMatrix<f64>,
    pub plant_b: DMatrix<f64>,
    pub plant_c: DMatrix<f64>,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
}

/// Zero-order-hold discretization with sample time `t`.
pub fn build_model(t: f64) -> Result<AugmentedModel> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::invalid(format!("sample time {t} must be positive")));
    }
    let i6 = DMatrix::<f64>::identity(6, 6);
    let mut plant_a = DMatrix::<f64>::identity(12, 12);
    plant_a.view_mut((0, 6), (6, 6)).copy_from(&(&i6 * t));
    let mut plant_b = DMatrix::<f64>::zeros(12, 6);
    plant_b.view_mut((0, 0), (6, 6)).copy_from(&(&i6 * (0.5 * t * t)));
    plant_b.view_mut((6, 0), (6, 6)).copy_from(&(&i6 * t));
    let mut plant_c = DMatrix::<f64>::zeros(6, 12);
    plant_c.view_mut((0, 0), (6, 6)).copy_from(&i6);

    let mut a = DMatrix::<f64>::zeros(18, 18);
    a.view_mut((0, 0), (12, 12)).copy_from(&plant_a);
    a.view_mut((12, 0), (6, 12)).copy_from(&(&plant_c * &plant_a));
    a.view_mut((12, 12), (6, 6)).copy_from(&i6);
    let mut b = DMatrix::<f64>::zeros(18, 6);
    b.view_mut((0, 0), (12, 6)).copy_from(&plant_b);
    b.view_mut((12, 0), (6, 6)).copy_from(&(&plant_c * &plant_b));
    let mut c = DMatrix::<f64>::zeros(6, 18);
    c.view_mut((0, 12), (6, 6)).copy_from(&i6);

    Ok(AugmentedModel {
        sample_time: t,
        plant_a,
        plant_b,
        plant_c,
        a,
        b,
        c,
    })
}

/// The 18-D augmented state `[Δξ; Δξ̇; ξ]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AugmentedState(pub SVector<f64, 18>);

impl AugmentedState {
    pub fn new(delta: &SVector<f64, 12>, output: &Vector6<f64>) -> Self {
        let mut v = SVector::<f64, 18>::zeros();
        v.fixed_rows_mut::<12>(0).copy_from(delta);
        v.fixed_rows_mut::<6>(12).copy_from(output);
        Self(v)
    }

    pub fn delta(&self) -> SVector<f64, 12> {
        self.0.fixed_rows::<12>(0).into_owned()
    }

    pub fn output(&self) -> Vector6<f64> {
        self.0.fixed_rows::<6>(12).into_owned()
    }

    pub fn to_dvector(&self) -> DVector<f64> {
        DVector::from_column_slice(self.0.as_slice())
    }
}

/// Stacked predictions `Y = F ξ[i] + Φ ΔU` over `n_p` steps.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionMatrices {
    pub n_p: usize,
    pub n_c: usize,
    /// `6n_p × 18`, block row `k` is `C A^(k+1)`.
    pub f: DMatrix<f64>,
    /// `6n_p × 6n_c`, block `(r, c)` is `C A^(r−c) B` for `c ≤ r`, zero above.
    pub phi: DMatrix<f64>,
}

impl PredictionMatrices {
    /// `F ξ + Φ ΔU`.
    pub fn predict(&self, state: &AugmentedState, delta_u: &DVector<f64>) -> DVector<f64> {
        &self.f * state.to_dvector() + &self.phi * delta_u
    }
}

pub fn build_prediction(
    model: &AugmentedModel,
    n_p: usize,
    n_c: usize,
) -> Result<PredictionMatrices> {
    if n_c == 0 || n_c > n_p {
        return Err(Error::invalid(format!(
            "horizons must satisfy 1 <= n_c <= n_p, got n_c = {n_c}, n_p = {n_p}"
        )));
    }
    let mut f = DMatrix::<f64>::zeros(6 * n_p, 18);
    // markov[k] = C A^k B
    let mut markov = Vec::with_capacity(n_p);
    let mut ca = model.c.clone();
    for k in 0..n_p {
        markov.push(&ca * &model.b);
        ca = &ca * &model.a;
        f.view_mut((6 * k, 0), (6, 18)).copy_from(&ca);
    }
    let mut phi = DMatrix::<f64>::zeros(6 * n_p, 6 * n_c);
    for r in 0..n_p {
        for c in 0..n_c.min(r + 1) {
            phi.view_mut((6 * r, 6 * c), (6, 6))
                .copy_from(&markov[r - c]);
        }
    }
    Ok(PredictionMatrices { n_p, n_c, f, phi })
}

/// `n_p` stacked copies of the target twist.
pub fn build_setpoint(target: &Vector6<f64>, n_p: usize) -> DVector<f64> {
    DVector::from_iterator(6 * n_p, (0..n_p).flat_map(|_| target.iter().copied()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn unit_step_blocks() {
        let m = build_model(1.0).unwrap();
        assert_eq!(
            m.plant_a.view((0, 6), (6, 6)).into_owned(),
            DMatrix::<f64>::identity(6, 6)
        );
    }

    #[test]
    fn augmented_input_bottom_block() {
        let t = 0.3;
        let m = build_model(t).unwrap();
        let bottom = m.b.view((12, 0), (6, 6)).into_owned();
        assert_relative_eq!(bottom, DMatrix::<f64>::identity(6, 6) * (t * t / 2.0));
    }

    #[test]
    fn rejects_bad_sample_time_and_horizons() {
        assert!(build_model(0.0).is_err());
        assert!(build_model(f64::NAN).is_err());
        let m = build_model(0.01).unwrap();
        assert!(build_prediction(&m, 3, 4).is_err());
        assert!(build_prediction(&m, 3, 0).is_err());
    }

    #[test]
    fn single_step_prediction() {
        let m = build_model(0.01).unwrap();
        let p = build_prediction(&m, 1, 1).unwrap();
        assert_eq!(p.f, &m.c * &m.a);
        assert_eq!(p.phi, &m.c * &m.b);
    }

    #[test]
    fn prediction_is_causal() {
        let m = build_model(0.01).unwrap();
        let p = build_prediction(&m, 3, 2).unwrap();
        assert_eq!(p.phi.view((0, 6), (6, 6)).amax(), 0.0);
        assert!(p.phi.view((6, 6), (6, 6)).amax() > 0.0);
    }

    #[test]
    fn setpoint_replication() {
        assert_eq!(build_setpoint(&Vector6::zeros(), 4).amax(), 0.0);
        let t = Vector6::new(1.0, -2.0, 3.0, 0.5, 0.0, 4.0);
        let s = build_setpoint(&t, 2);
        assert_eq!(s.len(), 12);
        assert_eq!(s.rows(0, 6).into_owned(), DVector::from_column_slice(t.as_slice()));
        assert_eq!(s.rows(6, 6).into_owned(), DVector::from_column_slice(t.as_slice()));
        assert_relative_eq!(s.norm(), 2f64.sqrt() * t.norm(), epsilon = 1e-14);
    }
}
