//! Riccati sweep for weighted tracking problems on affine dynamics.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::game::{AffineMap, Trajectory};

/// Minimises `sum_k 0.5 wx |x_k - y_k|^2 + 0.5 wu |u_k - z_k|^2` subject to
/// `x_{k+1} = A_k x_k + B_k u_k + c_k` and the fixed `x_0`.
pub fn track(maps: &[AffineMap], x0: &DVector<f64>, y: &[DVector<f64>], z: &[DVector<f64>], wx: f64, wu: f64) -> Result<Trajectory> {
    if wu <= 0.0 {
        return Err(Error::Invalid("action weight must be positive".into()));
    }
    let t = maps.len();
    let nx = x0.len();
    let mut p = DMatrix::identity(nx, nx) * wx;
    let mut pv = -&y[t] * wx;
    let mut gains = Vec::with_capacity(t);
    for k in (0..t).rev() {
        let AffineMap { a, b, c } = &maps[k];
        let nu = b.ncols();
        let pb = &p * b;
        let quu = DMatrix::identity(nu, nu) * wu + b.tr_mul(&pb);
        let qux = pb.tr_mul(a);
        let carry = &p * c + &pv;
        let qu = -&z[k] * wu + b.tr_mul(&carry);
        let qxx = DMatrix::identity(nx, nx) * wx + a.tr_mul(&(&p * a));
        let qx = -&y[k] * wx + a.tr_mul(&carry);
        let chol = quu.cholesky().ok_or(Error::Singular { what: "tracking Hessian".into(), stage: k })?;
        let kk = -chol.solve(&qux);
        let kf = -chol.solve(&qu);
        p = &qxx + qux.tr_mul(&kk);
        p = (&p + p.transpose()) * 0.5;
        pv = qx + qux.tr_mul(&kf);
        gains.push((kk, kf));
    }
    gains.reverse();
    let mut states = Vec::with_capacity(t + 1);
    let mut actions = Vec::with_capacity(t + 1);
    states.push(x0.clone());
    for (k, (kk, kf)) in gains.iter().enumerate() {
        let u = kk * &states[k] + kf;
        let AffineMap { a, b, c } = &maps[k];
        states.push(a * &states[k] + b * &u + c);
        actions.push(u);
    }
    actions.push(z[t].clone());
    Ok(Trajectory { states, actions })
}
