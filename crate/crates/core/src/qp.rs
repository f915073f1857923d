//! Dense convex QP via Goldfarb-Idnani (`quadprog`), plus polyhedral projections.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: DVector<f64>,
    pub objective: f64,
    /// Multipliers in constraint order (nonnegative for inequalities).
    pub multipliers: DVector<f64>,
}

/// Minimise `0.5 x'Hx + f'x` subject to `A x <= b`, with the first `n_eq` rows as equalities.
pub fn solve_qp(
    h: &DMatrix<f64>,
    f: &DVector<f64>,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    n_eq: usize,
) -> Result<QpSolution> {
    let n = f.len();
    let m = b.len();
    let mut q: Vec<f64> = (0..n * n).map(|idx| h[(idx / n, idx % n)]).collect();
    let amat: Vec<f64> = (0..m * n).map(|idx| a[(idx / n, idx % n)]).collect();
    let sol = quadprog::solve_qp(&mut q, f.as_slice(), &amat, b.as_slice(), n_eq, false).map_err(|e| match e {
        quadprog::Error::Infeasible => {
            let violation = if m == 0 { 0.0 } else { b.iter().fold(0.0f64, |v, bi| v.max(-bi)) };
            Error::Infeasible { max_violation: violation }
        }
        other => Error::Invalid(format!("quadratic program: {other}")),
    })?;
    Ok(QpSolution {
        x: DVector::from_vec(sol.sol),
        objective: sol.obj,
        multipliers: DVector::from_vec(sol.lagr),
    })
}

/// Euclidean projection of `v` onto `{z : A z <= b}` (first `n_eq` rows equalities).
pub fn project_polyhedron(
    v: &DVector<f64>,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    n_eq: usize,
) -> Result<DVector<f64>> {
    let n = v.len();
    if b.is_empty() {
        return Ok(v.clone());
    }
    // Already feasible points are returned untouched.
    let r = a * v - b;
    let feasible = r.iter().enumerate().all(|(i, ri)| if i < n_eq { ri.abs() <= 1e-13 } else { *ri <= 0.0 });
    if feasible {
        return Ok(v.clone());
    }
    let sol = solve_qp(&DMatrix::identity(n, n), &(-v), a, b, n_eq)?;
    Ok(sol.x)
}
