//! Dense inequality-constrained QP built from the MPC prediction, and
//! Hildreth's dual coordinate-ascent solver for it.

use nalgebra::{DMatrix, DVector, Vector6};

use super::model::{AugmentedState, PredictionMatrices};
use super::{LimitSet, MpcConfig};
use crate::error::{Error, Result};

/// `min ½ xᵀE x + fᵀx` subject to `W x ≤ V`.
#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub e: DMatrix<f64>,
    pub f: DVector<f64>,
    pub w: DMatrix<f64>,
    pub v: DVector<f64>,
    /// Row counts of the jerk, acceleration and velocity groups, in that order.
    pub groups: [usize; 3],
}

impl QpProblem {
    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.e * x)) + self.f.dot(x)
    }

    /// Largest positive entry of `W x − V` (zero when feasible).
    pub fn max_violation(&self, x: &DVector<f64>) -> f64 {
        if self.w.nrows() == 0 {
            return 0.0;
        }
        (&self.w * x - &self.v).max().max(0.0)
    }
}

/// What the constraints need to know about the plant beyond the augmented state.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlantMemory {
    /// Input applied at the previous tick, `u[i−1] = ξ̈`.
    pub prev_input: Vector6<f64>,
    /// Current twist rate `ξ̇[i]`.
    pub twist_rate: Vector6<f64>,
}

/// Builds cost and constraints for one MPC tick.
///
/// Constraint rows come in three groups, each holding for every step
/// `k = 1 … n_c` six lower-bound rows followed by six upper-bound rows:
///
/// 1. jerk: `u[i+k−1] = u[i−1] + Σ_{j<k} Δu_j`;
/// 2. acceleration: the predicted twist rate `ξ̇[i+k]`;
/// 3. velocity: the predicted twist `ξ[i+k]`, i.e. rows of `F ξ + Φ ΔU`.
///
/// Rows whose bound is infinite are omitted.
pub fn build_qp(
    state: &AugmentedState,
    setpoint: &DVector<f64>,
    prediction: &PredictionMatrices,
    config: &MpcConfig,
    limits: &LimitSet,
    memory: &PlantMemory,
) -> Result<QpProblem> {
    limits.validate()?;
    let (n_p, n_c) = (prediction.n_p, prediction.n_c);
    if setpoint.len() != 6 * n_p {
        return Err(Error::DimensionMismatch {
            expected: 6 * n_p,
            actual: setpoint.len(),
        });
    }
    let t = config.sample_time;
    let n = 6 * n_c;
    let phi = &prediction.phi;

    let q_diag = DVector::from_iterator(6 * n_p, (0..n_p).flat_map(|_| config.q_weight));
    let r_diag = DVector::from_iterator(n, (0..n_c).flat_map(|_| config.r_weight));
    let mut q_phi = phi.clone();
    for (mut row, q) in q_phi.row_iter_mut().zip(q_diag.iter()) {
        row *= *q;
    }
    let mut e = phi.transpose() * &q_phi;
    for k in 0..n {
        e[(k, k)] += r_diag[k];
    }
    // Symmetrize away rounding.
    let e = (&e + e.transpose()) * 0.5;
    let free = &prediction.f * state.to_dvector();
    let f = -(q_phi.transpose() * (setpoint - &free));

    let mut rows: Vec<(DVector<f64>, f64)> = Vec::with_capacity(36 * n_c);
    let mut groups = [0usize; 3];
    let mut push_pair = |group: usize, coef: DVector<f64>, offset: f64, lo: f64, hi: f64| {
        if lo.is_finite() {
            rows.push((-coef.clone(), offset - lo));
            groups[group] += 1;
        }
        if hi.is_finite() {
            rows.push((coef, hi - offset));
            groups[group] += 1;
        }
    };

    let axis_coef = |weights: &dyn Fn(usize) -> f64, axis: usize| {
        let mut c = DVector::zeros(n);
        for j in 0..n_c {
            c[6 * j + axis] = weights(j);
        }
        c
    };

    for k in 0..n_c {
        for axis in 0..6 {
            let coef = axis_coef(&|j| if j <= k { 1.0 } else { 0.0 }, axis);
            push_pair(
                0,
                coef,
                memory.prev_input[axis],
                limits.jerk.min[axis],
                limits.jerk.max[axis],
            );
        }
    }
    for k in 0..n_c {
        let steps = (k + 1) as f64;
        for axis in 0..6 {
            let coef = axis_coef(
                &|j| if j <= k { t * (steps - j as f64) } else { 0.0 },
                axis,
            );
            let offset = memory.twist_rate[axis] + t * steps * memory.prev_input[axis];
            push_pair(
                1,
                coef,
                offset,
                limits.acceleration.min[axis],
                limits.acceleration.max[axis],
            );
        }
    }
    for k in 0..n_c {
        for axis in 0..6 {
            let r = 6 * k + axis;
            let coef = phi.row(r).transpose();
            push_pair(
                2,
                coef,
                free[r],
                limits.velocity.min[axis],
                limits.velocity.max[axis],
            );
        }
    }

    let m = rows.len();
    let mut w = DMatrix::zeros(m, n);
    let mut v = DVector::zeros(m);
    for (i, (coef, bound)) in rows.into_iter().enumerate() {
        w.set_row(i, &coef.transpose());
        v[i] = bound;
    }
    Ok(QpProblem { e, f, w, v, groups })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HildrethOptions {
    /// Stop once the Euclidean norm of a sweep's multiplier change is below this.
    pub tolerance: f64,
    /// Sweep cap; `None` means `max(2000, 50 m)` for `m` constraint rows.
    pub max_sweeps: Option<usize>,
}

impl Default for HildrethOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-9,
            max_sweeps: None,
        }
    }
}

/// Primal infeasibility above this is reported as infeasible.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: DVector<f64>,
    /// Lagrange multipliers, one per row of `W`.
    pub multipliers: DVector<f64>,
    /// Sweeps used (largest over independent blocks).
    pub iterations: usize,
    pub converged: bool,
    /// Rows with a positive multiplier.
    pub active: usize,
    pub max_violation: f64,
}

impl QpSolution {
    pub fn feasible(&self) -> bool {
        self.max_violation <= FEASIBILITY_TOLERANCE
    }
}

pub fn solve_qp(qp: &QpProblem) -> Result<QpSolution> {
    solve_qp_with(qp, &HildrethOptions::default())
}

/// Solves the QP with Hildreth's procedure.
///
/// Variables that share no Hessian entry and no constraint row are split into
/// independent blocks first; the procedure then runs on each block. The
/// multipliers it reaches seed an active-set finish on the same dual problem,
/// whose result replaces the Hildreth iterate when it is no less feasible.
pub fn solve_qp_with(qp: &QpProblem, opts: &HildrethOptions) -> Result<QpSolution> {
    let n = qp.e.nrows();
    if qp.e.ncols() != n || qp.f.len() != n || qp.w.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: qp.f.len(),
        });
    }
    if qp.w.nrows() != qp.v.len() {
        return Err(Error::DimensionMismatch {
            expected: qp.w.nrows(),
            actual: qp.v.len(),
        });
    }

    let mut x = DVector::zeros(n);
    let mut multipliers = DVector::zeros(qp.w.nrows());
    let mut iterations = 0;
    let mut converged = true;
    for block in blocks(qp) {
        let sub = block.extract(qp);
        let sol = hildreth(&sub, opts)?;
        for (k, &var) in block.vars.iter().enumerate() {
            x[var] = sol.x[k];
        }
        for (k, &row) in block.rows.iter().enumerate() {
            multipliers[row] = sol.multipliers[k];
        }
        iterations = iterations.max(sol.iterations);
        converged &= sol.converged;
    }
    let active = multipliers.iter().filter(|l| **l > 0.0).count();
    let max_violation = qp.max_violation(&x);
    Ok(QpSolution {
        x,
        multipliers,
        iterations,
        converged,
        active,
        max_violation,
    })
}

struct Block {
    vars: Vec<usize>,
    rows: Vec<usize>,
}

impl Block {
    fn extract(&self, qp: &QpProblem) -> QpProblem {
        let (nv, nr) = (self.vars.len(), self.rows.len());
        let e = DMatrix::from_fn(nv, nv, |i, j| qp.e[(self.vars[i], self.vars[j])]);
        let f = DVector::from_fn(nv, |i, _| qp.f[self.vars[i]]);
        let w = DMatrix::from_fn(nr, nv, |i, j| qp.w[(self.rows[i], self.vars[j])]);
        let v = DVector::from_fn(nr, |i, _| qp.v[self.rows[i]]);
        QpProblem {
            e,
            f,
            w,
            v,
            groups: [nr, 0, 0],
        }
    }
}

fn find(parent: &mut [usize], mut a: usize) -> usize {
    while parent[a] != a {
        parent[a] = parent[parent[a]];
        a = parent[a];
    }
    a
}

fn union(parent: &mut [usize], a: usize, b: usize) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra != rb {
        parent[ra.max(rb)] = ra.min(rb);
    }
}

/// Connected components of the variable coupling graph, in order of first variable.
fn blocks(qp: &QpProblem) -> Vec<Block> {
    let n = qp.e.nrows();
    let mut parent: Vec<usize> = (0..n).collect();
    for j in 0..n {
        for i in 0..j {
            if qp.e[(i, j)] != 0.0 || qp.e[(j, i)] != 0.0 {
                union(&mut parent, i, j);
            }
        }
    }
    for r in 0..qp.w.nrows() {
        let mut first = None;
        for j in 0..n {
            if qp.w[(r, j)] != 0.0 {
                match first {
                    None => first = Some(j),
                    Some(f) => union(&mut parent, f, j),
                }
            }
        }
    }
    let mut out: Vec<Block> = Vec::new();
    let mut index_of_root = vec![usize::MAX; n];
    for j in 0..n {
        let root = find(&mut parent, j);
        if index_of_root[root] == usize::MAX {
            index_of_root[root] = out.len();
            out.push(Block {
                vars: Vec::new(),
                rows: Vec::new(),
            });
        }
        out[index_of_root[root]].vars.push(j);
    }
    for r in 0..qp.w.nrows() {
        // A row with no nonzero coefficient constrains nothing; keep it with block 0
        // so an infeasible `0 ≤ v` still shows up as a violation.
        let owner = (0..n)
            .find(|&j| qp.w[(r, j)] != 0.0)
            .map(|j| index_of_root[find(&mut parent, j)])
            .unwrap_or(0);
        if let Some(b) = out.get_mut(owner) {
            b.rows.push(r);
        }
    }
    out
}

/// Hildreth's procedure on one block.
fn hildreth(qp: &QpProblem, opts: &HildrethOptions) -> Result<QpSolution> {
    let m = qp.w.nrows();
    let chol = qp
        .e
        .clone()
        .cholesky()
        .ok_or_else(|| Error::invalid("QP Hessian is not positive definite"))?;
    let x0 = -chol.solve(&qp.f);
    let unconstrained = QpSolution {
        x: x0.clone(),
        multipliers: DVector::zeros(m),
        iterations: 0,
        converged: true,
        active: 0,
        max_violation: qp.max_violation(&x0),
    };
    if m == 0 || unconstrained.max_violation == 0.0 {
        return Ok(unconstrained);
    }

    // Dual: min ½ λᵀHλ + λᵀK, λ ≥ 0, with H = W E⁻¹ Wᵀ and K = V − W x₀.
    let p = chol.solve(&qp.w.transpose());
    let h = &qp.w * &p;
    let k = &qp.v - &qp.w * &x0;
    let mut lambda = DVector::<f64>::zeros(m);
    // Dual gradient K + Hλ, updated incrementally.
    let mut grad = k.clone();
    let max_sweeps = opts.max_sweeps.unwrap_or((50 * m).max(2000)).max(1);
    let mut sweeps = 0;
    let mut converged = false;
    while sweeps < max_sweeps {
        sweeps += 1;
        let mut change = 0.0;
        for j in 0..m {
            let hjj = h[(j, j)];
            if hjj <= 0.0 {
                continue;
            }
            let next = (lambda[j] - grad[j] / hjj).max(0.0);
            let delta = next - lambda[j];
            if delta != 0.0 {
                lambda[j] = next;
                grad.axpy(delta, &h.column(j), 1.0);
                change += delta * delta;
            }
        }
        if change.sqrt() < opts.tolerance {
            converged = true;
            break;
        }
    }
    let x = &x0 - &p * &lambda;
    let violation = qp.max_violation(&x);

    let (x, lambda, violation) = match finish(&h, &k, &lambda) {
        Some(lf) => {
            let xf = &x0 - &p * &lf;
            let vf = qp.max_violation(&xf);
            if vf <= violation.max(1e-12) {
                (xf, lf, vf)
            } else {
                (x, lambda, violation)
            }
        }
        None => (x, lambda, violation),
    };
    let active = lambda.iter().filter(|l| **l > 0.0).count();
    Ok(QpSolution {
        x,
        multipliers: lambda,
        iterations: sweeps,
        converged,
        active,
        max_violation: violation,
    })
}

/// Active-set finish on the dual `min ½λᵀHλ + λᵀK, λ ≥ 0`, warm-started at `λ`.
///
/// Rows with `λ = 0` form the working set of bounds. Each iteration minimizes
/// over the free multipliers; a blocking bound joins the working set, and at a
/// subspace minimizer the bound with the most negative gradient (the most
/// violated primal row) leaves it. A singular free block means dependent rows:
/// the step then follows the zero-curvature descent direction instead.
/// Returns `None` if the iteration cap is hit or the dual is unbounded
/// (primal infeasible).
fn finish(h: &DMatrix<f64>, k: &DVector<f64>, lambda: &DVector<f64>) -> Option<DVector<f64>> {
    let m = lambda.len();
    let scale = k.amax().max(h.amax()).max(1.0);
    let tol = 1e-12 * scale;
    let mut lambda = lambda.clone();
    let mut free: Vec<bool> = lambda.iter().map(|l| *l > 0.0).collect();
    for _ in 0..(20 * m + 50) {
        let g = h * &lambda + k;
        let idx: Vec<usize> = (0..m).filter(|&i| free[i]).collect();
        let mut at_minimizer = idx.is_empty();
        if !idx.is_empty() {
            let nf = idx.len();
            let h_ff = DMatrix::from_fn(nf, nf, |i, j| h[(idx[i], idx[j])]);
            let g_f = DVector::from_fn(nf, |i, _| g[idx[i]]);
            let svd = h_ff.clone().svd(true, true);
            let cutoff = 1e-12 * svd.singular_values.max().max(1.0);
            let p_ls = -svd.solve(&g_f, cutoff).ok()?;
            let residual = &h_ff * &p_ls + &g_f;
            let (dir, newton) = if residual.amax() > 1e-9 * scale {
                (-residual, false)
            } else {
                (p_ls, true)
            };
            let mut alpha: f64 = if newton { 1.0 } else { f64::INFINITY };
            let mut blocking = None;
            for (i, &r) in idx.iter().enumerate() {
                if dir[i] < 0.0 {
                    let a = -lambda[r] / dir[i];
                    if a < alpha {
                        alpha = a;
                        blocking = Some(r);
                    }
                }
            }
            if !alpha.is_finite() {
                return None;
            }
            for (i, &r) in idx.iter().enumerate() {
                lambda[r] = (lambda[r] + alpha * dir[i]).max(0.0);
            }
            match blocking {
                Some(r) => {
                    lambda[r] = 0.0;
                    free[r] = false;
                }
                None => at_minimizer = true,
            }
        }
        if at_minimizer {
            let g = h * &lambda + k;
            let leave = (0..m)
                .filter(|&i| !free[i] && g[i] < -tol)
                .min_by(|&a, &b| g[a].total_cmp(&g[b]));
            match leave {
                Some(i) => free[i] = true,
                None => return Some(lambda),
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn qp1(e: f64, f: f64, w: &[f64], v: &[f64]) -> QpProblem {
        QpProblem {
            e: DMatrix::from_element(1, 1, e),
            f: DVector::from_element(1, f),
            w: DMatrix::from_column_slice(w.len(), 1, w),
            v: DVector::from_column_slice(v),
            groups: [w.len(), 0, 0],
        }
    }

    #[test]
    fn unconstrained_optimum() {
        let qp = QpProblem {
            e: DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]),
            f: DVector::from_column_slice(&[1.0, -1.0]),
            w: DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            v: DVector::from_element(1, 100.0),
            groups: [1, 0, 0],
        };
        let s = solve_qp(&qp).unwrap();
        let expect = -qp.e.clone().lu().solve(&qp.f).unwrap();
        assert_relative_eq!(s.x, expect, epsilon = 1e-14);
        assert_eq!(s.iterations, 0);
        assert_eq!(s.active, 0);
    }

    #[test]
    fn clipping_in_one_dimension() {
        let s = solve_qp(&qp1(1.0, -2.0, &[1.0], &[0.5])).unwrap();
        assert_relative_eq!(s.x[0], 0.5, epsilon = 1e-12);
        assert_relative_eq!(s.multipliers[0], 1.5, epsilon = 1e-12);
        assert!(s.converged);
        assert_eq!(s.active, 1);
    }

    #[test]
    fn infeasible_problem_is_flagged() {
        // x ≤ −1 and −x ≤ −1 (x ≥ 1).
        let s = solve_qp_with(
            &qp1(1.0, 0.0, &[1.0, -1.0], &[-1.0, -1.0]),
            &HildrethOptions {
                tolerance: 1e-9,
                max_sweeps: Some(50),
            },
        )
        .unwrap();
        assert!(!s.converged);
        assert!(!s.feasible());
    }

    #[test]
    fn indefinite_hessian_is_an_error() {
        assert!(solve_qp(&qp1(-1.0, 0.0, &[1.0], &[1.0])).is_err());
    }

    #[test]
    fn independent_blocks_are_split() {
        let mut e = DMatrix::<f64>::identity(4, 4);
        e[(0, 2)] = 0.1;
        e[(2, 0)] = 0.1;
        let qp = QpProblem {
            e,
            f: DVector::from_column_slice(&[-1.0, -1.0, -1.0, -1.0]),
            w: DMatrix::from_row_slice(2, 4, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0]),
            v: DVector::from_column_slice(&[0.2, 0.4]),
            groups: [2, 0, 0],
        };
        let b = blocks(&qp);
        assert_eq!(b.len(), 2);
        assert_eq!(b[0].vars, vec![0, 2]);
        assert_eq!(b[1].vars, vec![1, 3]);
        let s = solve_qp(&qp).unwrap();
        assert_relative_eq!(s.x[1], 0.2, epsilon = 1e-12);
        assert_relative_eq!(s.x[3], 0.2, epsilon = 1e-12);
        assert_relative_eq!(s.x[0], 0.2, epsilon = 1e-12);
    }
}
