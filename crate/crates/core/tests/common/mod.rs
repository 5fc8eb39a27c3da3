//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use nalgebra::{DMatrix, DVector, Matrix3, Matrix4, Matrix6, Vector3, Vector6};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use screw_mpc::dq::{DualQuaternion, PureDualQuaternion, Quaternion, UnitDualQuaternion};
use screw_mpc::kinematics::RobotModel;
use screw_mpc::mpc::QpProblem;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec3(rng: &mut ChaCha8Rng, scale: f64) -> Vector3<f64> {
    Vector3::from_fn(|_, _| rng.random_range(-scale..scale))
}

pub fn random_unit_vec3(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = random_vec3(rng, 1.0);
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Rotation by an angle in `(−max_angle, max_angle)` about a random axis, then a translation.
pub fn random_pose(rng: &mut ChaCha8Rng, max_angle: f64, max_dist: f64) -> UnitDualQuaternion {
    let axis = random_unit_vec3(rng);
    let angle = rng.random_range(-max_angle..max_angle);
    let p = random_vec3(rng, max_dist);
    UnitDualQuaternion::from_axis_angle_translation(&p, &axis, angle)
}

pub fn random_dq(rng: &mut ChaCha8Rng) -> DualQuaternion {
    let mut c = [0.0; 8];
    for v in &mut c {
        *v = rng.random_range(-2.0..2.0);
    }
    DualQuaternion::new(
        Quaternion::new(c[0], c[1], c[2], c[3]),
        Quaternion::new(c[4], c[5], c[6], c[7]),
    )
}

pub fn random_twist(rng: &mut ChaCha8Rng, angular: f64, linear: f64) -> PureDualQuaternion {
    PureDualQuaternion::from_vectors(&random_vec3(rng, angular), &random_vec3(rng, linear))
}

/// Quaternion product from the unit multiplication table `i² = j² = k² = ijk = −1`.
pub fn table_product(a: &Quaternion, b: &Quaternion) -> Quaternion {
    // basis index 0 = 1, 1 = i, 2 = j, 3 = k; TABLE[r][c] = (sign, index) of e_r e_c
    const TABLE: [[(f64, usize); 4]; 4] = [
        [(1.0, 0), (1.0, 1), (1.0, 2), (1.0, 3)],
        [(1.0, 1), (-1.0, 0), (1.0, 3), (-1.0, 2)],
        [(1.0, 2), (-1.0, 3), (-1.0, 0), (1.0, 1)],
        [(1.0, 3), (1.0, 2), (-1.0, 1), (-1.0, 0)],
    ];
    let (ca, cb) = (a.to_array(), b.to_array());
    let mut out = [0.0; 4];
    for r in 0..4 {
        for c in 0..4 {
            let (s, k) = TABLE[r][c];
            out[k] += s * ca[r] * cb[c];
        }
    }
    Quaternion::from_array(out)
}

/// Dual quaternion product with `ε² = 0`.
pub fn table_dq_product(a: &DualQuaternion, b: &DualQuaternion) -> DualQuaternion {
    DualQuaternion::new(
        table_product(&a.primary, &b.primary),
        table_product(&a.primary, &b.dual) + table_product(&a.dual, &b.primary),
    )
}

pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// `expm([[ω̂, v], [0, 0]])` by scaling and squaring with a Taylor series.
pub fn se3_exp(omega: &Vector3<f64>, v: &Vector3<f64>) -> Matrix4<f64> {
    let mut m = Matrix4::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&skew(omega));
    m.fixed_view_mut::<3, 1>(0, 3).copy_from(v);
    let norm = m.abs().max();
    let mut squarings = 0;
    let mut scale = 1.0;
    while norm * scale > 0.25 {
        scale *= 0.5;
        squarings += 1;
    }
    let a = m * scale;
    let mut term = Matrix4::identity();
    let mut sum = Matrix4::identity();
    for k in 1..30 {
        term = term * a / k as f64;
        sum += term;
    }
    for _ in 0..squarings {
        sum = sum * sum;
    }
    sum
}

/// `[[R, 0], [p̂R, R]]`, mapping `[ω; v]` to the same twist in the moved frame.
pub fn adjoint_matrix(h: &Matrix4<f64>) -> Matrix6<f64> {
    let r = h.fixed_view::<3, 3>(0, 0).into_owned();
    let p = h.fixed_view::<3, 1>(0, 3).into_owned();
    let mut m = Matrix6::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(&r);
    m.fixed_view_mut::<3, 3>(3, 0).copy_from(&(skew(&p) * r));
    m
}

pub fn homogeneous_from_rt(r: &Matrix3<f64>, p: &Vector3<f64>) -> Matrix4<f64> {
    let mut m = Matrix4::identity();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(r);
    m.fixed_view_mut::<3, 1>(0, 3).copy_from(p);
    m
}

pub fn rot_x(a: f64) -> Matrix4<f64> {
    let (s, c) = a.sin_cos();
    homogeneous_from_rt(
        &Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c),
        &Vector3::zeros(),
    )
}

pub fn rot_z(a: f64) -> Matrix4<f64> {
    let (s, c) = a.sin_cos();
    homogeneous_from_rt(
        &Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0),
        &Vector3::zeros(),
    )
}

pub fn trans(x: f64, y: f64, z: f64) -> Matrix4<f64> {
    homogeneous_from_rt(&Matrix3::identity(), &Vector3::new(x, y, z))
}

/// Modified DH table of the Panda, `(a, d, alpha)` per joint, and the flange offset.
pub const PANDA_DH: [(f64, f64, f64); 7] = [
    (0.0, 0.333, 0.0),
    (0.0, 0.0, -std::f64::consts::FRAC_PI_2),
    (0.0, 0.316, std::f64::consts::FRAC_PI_2),
    (0.0825, 0.0, std::f64::consts::FRAC_PI_2),
    (-0.0825, 0.384, -std::f64::consts::FRAC_PI_2),
    (0.0, 0.0, std::f64::consts::FRAC_PI_2),
    (0.088, 0.0, std::f64::consts::FRAC_PI_2),
];
pub const PANDA_FLANGE: f64 = 0.107;

/// Chain of 4×4 matrices `RotX(α) TransX(a) RotZ(q) TransZ(d)`.
pub fn dh_fk(q: &[f64]) -> Matrix4<f64> {
    let mut t = Matrix4::<f64>::identity();
    for ((a, d, alpha), qi) in PANDA_DH.iter().zip(q) {
        t = t * rot_x(*alpha) * trans(*a, 0.0, 0.0) * rot_z(*qi) * trans(0.0, 0.0, *d);
    }
    t * trans(0.0, 0.0, PANDA_FLANGE)
}

pub fn config_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

pub fn panda() -> RobotModel {
    RobotModel::load(&config_dir().join("panda.toml")).expect("panda model")
}

/// The Panda's usual ready configuration.
pub fn panda_ready() -> [f64; 7] {
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
    [0.0, -FRAC_PI_4, 0.0, -3.0 * FRAC_PI_4, 0.0, FRAC_PI_2, FRAC_PI_4]
}

/// Random joint vector well inside the Panda's limits.
pub fn random_panda_q(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let model = panda();
    model
        .joints()
        .iter()
        .map(|j| {
            let mid = 0.5 * (j.q_min + j.q_max);
            let half = 0.45 * (j.q_max - j.q_min);
            mid + rng.random_range(-half..half)
        })
        .collect()
}

/// Central differences of `f` at `x` with step `h`.
pub fn central_difference<F>(f: F, x: &[f64], h: f64) -> DMatrix<f64>
where
    F: Fn(&[f64]) -> DVector<f64>,
{
    let rows = f(x).len();
    let mut jac = DMatrix::zeros(rows, x.len());
    for j in 0..x.len() {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[j] += h;
        xm[j] -= h;
        jac.set_column(j, &((f(&xp) - f(&xm)) / (2.0 * h)));
    }
    jac
}

/// Augmented double-integrator model assembled axis by axis from scalars.
/// State order `[Δξ (6); Δξ̇ (6); ξ (6)]`.
pub struct ScalarModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
}

pub fn scalar_model(t: f64) -> ScalarModel {
    let mut a = DMatrix::zeros(18, 18);
    let mut b = DMatrix::zeros(18, 6);
    let mut c = DMatrix::zeros(6, 18);
    for k in 0..6 {
        let (pos, vel, out) = (k, 6 + k, 12 + k);
        // Δξ⁺ = Δξ + T Δξ̇ + T²/2 Δu, Δξ̇⁺ = Δξ̇ + T Δu, ξ⁺ = ξ + Δξ⁺
        a[(pos, pos)] = 1.0;
        a[(pos, vel)] = t;
        a[(vel, vel)] = 1.0;
        a[(out, pos)] = 1.0;
        a[(out, vel)] = t;
        a[(out, out)] = 1.0;
        b[(pos, k)] = 0.5 * t * t;
        b[(vel, k)] = t;
        b[(out, k)] = 0.5 * t * t;
        c[(k, out)] = 1.0;
    }
    ScalarModel { a, b, c }
}

/// Outputs `y[1..=n_p]` of the augmented model driven by `Δu` (zero after `n_c`).
pub fn rollout(m: &ScalarModel, x0: &DVector<f64>, du: &DVector<f64>, n_p: usize) -> DVector<f64> {
    let n_c = du.len() / 6;
    let mut x = x0.clone();
    let mut y = DVector::zeros(6 * n_p);
    for k in 0..n_p {
        let u = if k < n_c {
            du.rows(6 * k, 6).into_owned()
        } else {
            DVector::zeros(6)
        };
        x = &m.a * &x + &m.b * u;
        y.rows_mut(6 * k, 6).copy_from(&(&m.c * &x));
    }
    y
}

/// Exact minimizer of `½xᵀEx + fᵀx` s.t. `Wx ≤ V` by trying every active set.
/// Returns `(x, λ)`.
pub fn enumerate_qp(
    e: &DMatrix<f64>,
    f: &DVector<f64>,
    w: &DMatrix<f64>,
    v: &DVector<f64>,
) -> Option<(DVector<f64>, DVector<f64>)> {
    let n = e.nrows();
    let m = w.nrows();
    let mut best: Option<(f64, DVector<f64>, DVector<f64>)> = None;
    for mask in 0u32..(1 << m) {
        let active: Vec<usize> = (0..m).filter(|r| mask & (1 << r) != 0).collect();
        let k = active.len();
        let mut kkt = DMatrix::zeros(n + k, n + k);
        let mut rhs = DVector::zeros(n + k);
        kkt.view_mut((0, 0), (n, n)).copy_from(e);
        rhs.rows_mut(0, n).copy_from(&(-f));
        for (i, &r) in active.iter().enumerate() {
            for j in 0..n {
                kkt[(n + i, j)] = w[(r, j)];
                kkt[(j, n + i)] = w[(r, j)];
            }
            rhs[n + i] = v[r];
        }
        let lu = kkt.lu();
        if lu.determinant().abs() < 1e-12 {
            continue;
        }
        let Some(sol) = lu.solve(&rhs) else { continue };
        let x = sol.rows(0, n).into_owned();
        let mut lambda = DVector::zeros(m);
        for (i, &r) in active.iter().enumerate() {
            lambda[r] = sol[n + i];
        }
        if lambda.iter().any(|l| *l < -1e-10) {
            continue;
        }
        if (w * &x - v).iter().any(|s| *s > 1e-9) {
            continue;
        }
        let obj = 0.5 * x.dot(&(e * &x)) + f.dot(&x);
        if best.as_ref().is_none_or(|(b, _, _)| obj < *b) {
            best = Some((obj, x, lambda));
        }
    }
    best.map(|(_, x, l)| (x, l))
}

/// Stack of a twist as `[ω; v]`.
pub fn twist6(xi: &PureDualQuaternion) -> Vector6<f64> {
    xi.vec6()
}

pub fn random_dvec(r: &mut ChaCha8Rng, n: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| r.random_range(-scale..scale))
}

/// Random strictly convex QP with a known feasible point.
pub fn random_qp(r: &mut ChaCha8Rng) -> QpProblem {
    let n = r.random_range(1..=4);
    let m = r.random_range(0..=6);
    let g = DMatrix::from_fn(n, n, |_, _| r.random_range(-1.0..1.0));
    let e = g.transpose() * &g + DMatrix::identity(n, n) * 0.1;
    let f = random_dvec(r, n, 2.0);
    let w = DMatrix::from_fn(m, n, |_, _| r.random_range(-1.0..1.0));
    let x_feasible = random_dvec(r, n, 1.0);
    let v = &w * x_feasible + DVector::from_fn(m, |_, _| r.random_range(0.0..0.5));
    QpProblem {
        e,
        f,
        w,
        v,
        groups: [m, 0, 0],
    }
}
