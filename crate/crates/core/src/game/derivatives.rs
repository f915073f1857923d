//! Derivatives of stage primitives, analytic when provided and central differences otherwise.
//!
//! First derivatives use the step `eps^(1/3) (1 + |v|)`. Second derivatives difference an
//! analytic gradient when one exists, and fall back to second differences of values with the
//! larger step `eps^(1/4) (1 + |v|)`.

use nalgebra::{DMatrix, DVector};

use super::model::{Dynamics, StageConstraint, StageCost};
use crate::linalg::stack_vectors;

fn step1(v: f64) -> f64 {
    f64::EPSILON.cbrt() * (1.0 + v.abs())
}

fn step2(v: f64) -> f64 {
    f64::EPSILON.powf(0.25) * (1.0 + v.abs())
}

/// Central-difference Jacobian of a vector map on the stacked `[x; u]`.
fn fd_jacobian(f: impl Fn(&DVector<f64>) -> DVector<f64>, z: &DVector<f64>, m: usize) -> DMatrix<f64> {
    let n = z.len();
    let mut j = DMatrix::zeros(m, n);
    let mut zp = z.clone();
    for i in 0..n {
        let h = step1(z[i]);
        zp[i] = z[i] + h;
        let fp = f(&zp);
        zp[i] = z[i] - h;
        let fm = f(&zp);
        zp[i] = z[i];
        j.set_column(i, &((fp - fm) / (2.0 * h)));
    }
    j
}

fn split_cols(j: DMatrix<f64>, nx: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let nu = j.ncols() - nx;
    (j.columns(0, nx).into_owned(), j.columns(nx, nu).into_owned())
}

pub fn dynamics_jacobians(d: &dyn Dynamics, x: &DVector<f64>, u: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    if let Some(a) = d.affine() {
        return (a.a, a.b);
    }
    if let Some(j) = d.jacobians(x, u) {
        return j;
    }
    let nx = x.len();
    let z = stack_vectors(&[x.clone(), u.clone()]);
    let m = d.step(x, u).len();
    let j = fd_jacobian(|z| d.step(&z.rows(0, nx).into_owned(), &z.rows(nx, z.len() - nx).into_owned()), &z, m);
    split_cols(j, nx)
}

/// Hessians of each output component over `[x; u]`.
pub fn dynamics_hessians(d: &dyn Dynamics, x: &DVector<f64>, u: &DVector<f64>) -> Vec<DMatrix<f64>> {
    let nx = x.len();
    let n = nx + u.len();
    if d.affine().is_some() {
        return vec![DMatrix::zeros(n, n); nx];
    }
    if let Some(h) = d.hessians(x, u) {
        return h;
    }
    let z = stack_vectors(&[x.clone(), u.clone()]);
    if d.jacobians(x, u).is_some() {
        // Difference the analytic Jacobian.
        let jac = |z: &DVector<f64>| {
            let (a, b) = d.jacobians(&z.rows(0, nx).into_owned(), &z.rows(nx, n - nx).into_owned()).unwrap();
            let mut j = DMatrix::zeros(a.nrows(), n);
            j.columns_mut(0, nx).copy_from(&a);
            j.columns_mut(nx, n - nx).copy_from(&b);
            j
        };
        let m = d.step(x, u).len();
        let mut hs = vec![DMatrix::zeros(n, n); m];
        let mut zp = z.clone();
        for i in 0..n {
            let h = step1(z[i]);
            zp[i] = z[i] + h;
            let jp = jac(&zp);
            zp[i] = z[i] - h;
            let jm = jac(&zp);
            zp[i] = z[i];
            let col = (jp - jm) / (2.0 * h);
            for (l, hl) in hs.iter_mut().enumerate() {
                for k in 0..n {
                    hl[(k, i)] = col[(l, k)];
                }
            }
        }
        return hs.into_iter().map(|h| (&h + h.transpose()) * 0.5).collect();
    }
    let m = d.step(x, u).len();
    let f = |z: &DVector<f64>| d.step(&z.rows(0, nx).into_owned(), &z.rows(nx, n - nx).into_owned());
    second_differences(&f, &z, m)
}

fn second_differences(f: &dyn Fn(&DVector<f64>) -> DVector<f64>, z: &DVector<f64>, m: usize) -> Vec<DMatrix<f64>> {
    let n = z.len();
    let f0 = f(z);
    let mut hs = vec![DMatrix::zeros(n, n); m];
    let mut zp = z.clone();
    for i in 0..n {
        let hi = step2(z[i]);
        for j in i..n {
            let hj = step2(z[j]);
            let val = if i == j {
                zp[i] = z[i] + hi;
                let fp = f(&zp);
                zp[i] = z[i] - hi;
                let fm = f(&zp);
                zp[i] = z[i];
                (fp - &f0 * 2.0 + fm) / (hi * hi)
            } else {
                let mut eval = |si: f64, sj: f64| {
                    zp[i] = z[i] + si * hi;
                    zp[j] = z[j] + sj * hj;
                    let r = f(&zp);
                    zp[i] = z[i];
                    zp[j] = z[j];
                    r
                };
                (eval(1.0, 1.0) - eval(1.0, -1.0) - eval(-1.0, 1.0) + eval(-1.0, -1.0)) / (4.0 * hi * hj)
            };
            for (l, h) in hs.iter_mut().enumerate() {
                h[(i, j)] = val[l];
                h[(j, i)] = val[l];
            }
        }
    }
    hs
}

pub fn cost_gradient(c: &dyn StageCost, x: &DVector<f64>, u: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    if let Some(g) = c.gradient(x, u) {
        return g;
    }
    let nx = x.len();
    let n = nx + u.len();
    let z = stack_vectors(&[x.clone(), u.clone()]);
    let j = fd_jacobian(
        |z| DVector::from_element(1, c.value(&z.rows(0, nx).into_owned(), &z.rows(nx, n - nx).into_owned())),
        &z,
        1,
    );
    let g = j.row(0).transpose();
    (g.rows(0, nx).into_owned(), g.rows(nx, n - nx).into_owned())
}

pub fn cost_hessian(c: &dyn StageCost, x: &DVector<f64>, u: &DVector<f64>) -> DMatrix<f64> {
    if let Some(h) = c.hessian(x, u) {
        return h;
    }
    let nx = x.len();
    let n = nx + u.len();
    let z = stack_vectors(&[x.clone(), u.clone()]);
    if c.gradient(x, u).is_some() {
        let grad = |z: &DVector<f64>| {
            let (gx, gu) = c.gradient(&z.rows(0, nx).into_owned(), &z.rows(nx, n - nx).into_owned()).unwrap();
            stack_vectors(&[gx, gu])
        };
        let h = fd_jacobian(grad, &z, n);
        return (&h + h.transpose()) * 0.5;
    }
    let f = |z: &DVector<f64>| DVector::from_element(1, c.value(&z.rows(0, nx).into_owned(), &z.rows(nx, n - nx).into_owned()));
    second_differences(&f, &z, 1).pop().unwrap()
}

pub fn constraint_jacobians(g: &dyn StageConstraint, x: &DVector<f64>, u: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    if let Some(a) = g.affine() {
        let a = super::primitives::resize_affine(a, x.len(), u.len());
        return (a.w, a.s);
    }
    if let Some(j) = g.jacobians(x, u) {
        return j;
    }
    let nx = x.len();
    let n = nx + u.len();
    let z = stack_vectors(&[x.clone(), u.clone()]);
    let j = fd_jacobian(|z| g.value(&z.rows(0, nx).into_owned(), &z.rows(nx, n - nx).into_owned()), &z, g.len());
    split_cols(j, nx)
}
