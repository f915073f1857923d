//! Concrete stage primitives.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::model::{AffineMap, AffineRows, Dynamics, StageConstraint, StageCost};
use crate::qp::project_polyhedron;

/// `x' = a x + b u + c`.
#[derive(Debug, Clone)]
pub struct LinearDynamics(pub AffineMap);

impl LinearDynamics {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DVector<f64>) -> Self {
        Self(AffineMap { a, b, c })
    }
}

impl Dynamics for LinearDynamics {
    fn step(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        &self.0.a * x + &self.0.b * u + &self.0.c
    }
    fn jacobians(&self, _x: &DVector<f64>, _u: &DVector<f64>) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
        Some((self.0.a.clone(), self.0.b.clone()))
    }
    fn hessians(&self, x: &DVector<f64>, u: &DVector<f64>) -> Option<Vec<DMatrix<f64>>> {
        let n = x.len() + u.len();
        Some(vec![DMatrix::zeros(n, n); self.0.a.nrows()])
    }
    fn affine(&self) -> Option<AffineMap> {
        Some(self.0.clone())
    }
}

type StepFn = dyn Fn(&DVector<f64>, &DVector<f64>) -> DVector<f64> + Send + Sync;
type JacFn = dyn Fn(&DVector<f64>, &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>) + Send + Sync;

/// Closure-backed dynamics with an optional analytic Jacobian.
pub struct FnDynamics {
    step: Box<StepFn>,
    jac: Option<Box<JacFn>>,
}

impl FnDynamics {
    pub fn new(step: impl Fn(&DVector<f64>, &DVector<f64>) -> DVector<f64> + Send + Sync + 'static) -> Self {
        Self { step: Box::new(step), jac: None }
    }

    pub fn with_jacobians(
        mut self,
        jac: impl Fn(&DVector<f64>, &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>) + Send + Sync + 'static,
    ) -> Self {
        self.jac = Some(Box::new(jac));
        self
    }
}

impl Dynamics for FnDynamics {
    fn step(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        (self.step)(x, u)
    }
    fn jacobians(&self, x: &DVector<f64>, u: &DVector<f64>) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
        self.jac.as_ref().map(|j| j(x, u))
    }
}

/// `c = 0.5 z' q z` with `z = [1; x; u]`.
#[derive(Debug, Clone)]
pub struct QuadraticCost {
    pub q: DMatrix<f64>,
}

impl QuadraticCost {
    pub fn new(q: DMatrix<f64>) -> Self {
        Self { q: (&q + q.transpose()) * 0.5 }
    }

    /// `0.5 (x - xt)' qx (x - xt) + 0.5 (u - ut)' ru (u - ut)`.
    pub fn tracking(qx: &DMatrix<f64>, xt: &DVector<f64>, ru: &DMatrix<f64>, ut: &DVector<f64>) -> Self {
        let nx = xt.len();
        let nu = ut.len();
        let mut q = DMatrix::zeros(1 + nx + nu, 1 + nx + nu);
        let qxt = qx * xt;
        let rut = ru * ut;
        q[(0, 0)] = xt.dot(&qxt) + ut.dot(&rut);
        q.view_mut((1, 1), (nx, nx)).copy_from(qx);
        q.view_mut((1 + nx, 1 + nx), (nu, nu)).copy_from(ru);
        for i in 0..nx {
            q[(0, 1 + i)] = -qxt[i];
            q[(1 + i, 0)] = -qxt[i];
        }
        for i in 0..nu {
            q[(0, 1 + nx + i)] = -rut[i];
            q[(1 + nx + i, 0)] = -rut[i];
        }
        Self { q }
    }

    fn z(x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        let mut z = DVector::zeros(1 + x.len() + u.len());
        z[0] = 1.0;
        z.rows_mut(1, x.len()).copy_from(x);
        z.rows_mut(1 + x.len(), u.len()).copy_from(u);
        z
    }
}

impl StageCost for QuadraticCost {
    fn value(&self, x: &DVector<f64>, u: &DVector<f64>) -> f64 {
        let z = Self::z(x, u);
        0.5 * z.dot(&(&self.q * &z))
    }
    fn gradient(&self, x: &DVector<f64>, u: &DVector<f64>) -> Option<(DVector<f64>, DVector<f64>)> {
        let g = &self.q * Self::z(x, u);
        Some((g.rows(1, x.len()).into_owned(), g.rows(1 + x.len(), u.len()).into_owned()))
    }
    fn hessian(&self, x: &DVector<f64>, u: &DVector<f64>) -> Option<DMatrix<f64>> {
        let n = x.len() + u.len();
        Some(self.q.view((1, 1), (n, n)).into_owned())
    }
}

type ValueFn = dyn Fn(&DVector<f64>, &DVector<f64>) -> f64 + Send + Sync;
type GradFn = dyn Fn(&DVector<f64>, &DVector<f64>) -> (DVector<f64>, DVector<f64>) + Send + Sync;

/// Closure-backed stage cost with an optional analytic gradient.
pub struct FnCost {
    value: Box<ValueFn>,
    grad: Option<Box<GradFn>>,
}

impl FnCost {
    pub fn new(value: impl Fn(&DVector<f64>, &DVector<f64>) -> f64 + Send + Sync + 'static) -> Self {
        Self { value: Box::new(value), grad: None }
    }

    pub fn with_gradient(
        mut self,
        grad: impl Fn(&DVector<f64>, &DVector<f64>) -> (DVector<f64>, DVector<f64>) + Send + Sync + 'static,
    ) -> Self {
        self.grad = Some(Box::new(grad));
        self
    }
}

impl StageCost for FnCost {
    fn value(&self, x: &DVector<f64>, u: &DVector<f64>) -> f64 {
        (self.value)(x, u)
    }
    fn gradient(&self, x: &DVector<f64>, u: &DVector<f64>) -> Option<(DVector<f64>, DVector<f64>)> {
        self.grad.as_ref().map(|g| g(x, u))
    }
}

/// `w x + s u + p <= 0`, first `n_eq` rows equalities.
#[derive(Debug, Clone)]
pub struct AffineConstraint(pub AffineRows);

impl AffineConstraint {
    pub fn new(w: DMatrix<f64>, s: DMatrix<f64>, p: DVector<f64>, n_eq: usize) -> Self {
        Self(AffineRows { w, s, p, n_eq })
    }
}

impl StageConstraint for AffineConstraint {
    fn len(&self) -> usize {
        self.0.p.len()
    }
    fn equality_rows(&self) -> usize {
        self.0.n_eq
    }
    fn value(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        &self.0.w * x + &self.0.s * u + &self.0.p
    }
    fn jacobians(&self, _x: &DVector<f64>, _u: &DVector<f64>) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
        Some((self.0.w.clone(), self.0.s.clone()))
    }
    fn affine(&self) -> Option<AffineRows> {
        Some(self.0.clone())
    }
    fn project(&self, x: &DVector<f64>, u: &DVector<f64>) -> Option<(DVector<f64>, DVector<f64>)> {
        project_affine_rows(&self.0, x, u)
    }
    fn depends_on_state(&self) -> bool {
        self.0.w.iter().any(|v| *v != 0.0)
    }
}

pub(crate) fn project_affine_rows(
    rows: &AffineRows,
    x: &DVector<f64>,
    u: &DVector<f64>,
) -> Option<(DVector<f64>, DVector<f64>)> {
    let nx = x.len();
    let a = {
        let mut a = DMatrix::zeros(rows.p.len(), nx + u.len());
        a.view_mut((0, 0), (rows.p.len(), nx)).copy_from(&rows.w);
        a.view_mut((0, nx), (rows.p.len(), u.len())).copy_from(&rows.s);
        a
    };
    let v = crate::linalg::stack_vectors(&[x.clone(), u.clone()]);
    let z = project_polyhedron(&v, &a, &(-&rows.p), rows.n_eq).ok()?;
    Some((z.rows(0, nx).into_owned(), z.rows(nx, u.len()).into_owned()))
}

/// Elementwise bounds on the joint action; rows are `lo_i - u_i`, `u_i - hi_i` per component.
#[derive(Debug, Clone)]
pub struct BoxConstraint {
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

impl StageConstraint for BoxConstraint {
    fn len(&self) -> usize {
        2 * self.lower.len()
    }
    fn value(&self, _x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        let mut g = DVector::zeros(self.len());
        for i in 0..u.len() {
            g[2 * i] = self.lower[i] - u[i];
            g[2 * i + 1] = u[i] - self.upper[i];
        }
        g
    }
    fn jacobians(&self, x: &DVector<f64>, u: &DVector<f64>) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
        let a = resize_affine(self.affine()?, x.len(), u.len());
        Some((a.w, a.s))
    }
    fn affine(&self) -> Option<AffineRows> {
        let nu = self.lower.len();
        let mut s = DMatrix::zeros(2 * nu, nu);
        let mut p = DVector::zeros(2 * nu);
        for i in 0..nu {
            s[(2 * i, i)] = -1.0;
            s[(2 * i + 1, i)] = 1.0;
            p[2 * i] = self.lower[i];
            p[2 * i + 1] = -self.upper[i];
        }
        // State width is unknown here; callers pad with `resize_affine`.
        Some(AffineRows { w: DMatrix::zeros(2 * nu, 0), s, p, n_eq: 0 })
    }
    fn project(&self, x: &DVector<f64>, u: &DVector<f64>) -> Option<(DVector<f64>, DVector<f64>)> {
        let mut v = u.clone();
        for i in 0..v.len() {
            v[i] = v[i].clamp(self.lower[i], self.upper[i]);
        }
        Some((x.clone(), v))
    }
    fn depends_on_state(&self) -> bool {
        false
    }
}

/// Euclidean balls `|u[off..off+len]|^2 <= r^2` on slices of the joint action.
#[derive(Debug, Clone)]
pub struct BallConstraint {
    pub blocks: Vec<(usize, usize, f64)>,
}

impl StageConstraint for BallConstraint {
    fn len(&self) -> usize {
        self.blocks.len()
    }
    fn value(&self, _x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.blocks.len(),
            self.blocks.iter().map(|&(o, l, r)| u.rows(o, l).norm_squared() - r * r),
        )
    }
    fn jacobians(&self, x: &DVector<f64>, u: &DVector<f64>) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
        let mut ju = DMatrix::zeros(self.blocks.len(), u.len());
        for (i, &(o, l, _)) in self.blocks.iter().enumerate() {
            for j in o..o + l {
                ju[(i, j)] = 2.0 * u[j];
            }
        }
        Some((DMatrix::zeros(self.blocks.len(), x.len()), ju))
    }
    fn project(&self, x: &DVector<f64>, u: &DVector<f64>) -> Option<(DVector<f64>, DVector<f64>)> {
        let mut v = u.clone();
        for &(o, l, r) in &self.blocks {
            let n = v.rows(o, l).norm();
            if n > r {
                let scaled = v.rows(o, l) * (r / n);
                v.rows_mut(o, l).copy_from(&scaled);
            }
        }
        Some((x.clone(), v))
    }
    fn depends_on_state(&self) -> bool {
        false
    }
}

/// Equalities `x[b_j] = x[b_0]` between equally sized state blocks given by offsets.
#[derive(Debug, Clone)]
pub struct ConsensusConstraint {
    pub offsets: Vec<usize>,
    pub width: usize,
    pub state_dim: usize,
}

impl StageConstraint for ConsensusConstraint {
    fn len(&self) -> usize {
        (self.offsets.len() - 1) * self.width
    }
    fn equality_rows(&self) -> usize {
        self.len()
    }
    fn value(&self, x: &DVector<f64>, _u: &DVector<f64>) -> DVector<f64> {
        let o0 = self.offsets[0];
        let mut g = DVector::zeros(self.len());
        for (j, &o) in self.offsets.iter().skip(1).enumerate() {
            for i in 0..self.width {
                g[j * self.width + i] = x[o + i] - x[o0 + i];
            }
        }
        g
    }
    fn jacobians(&self, _x: &DVector<f64>, u: &DVector<f64>) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
        let a = self.affine()?;
        Some((a.w, DMatrix::zeros(self.len(), u.len())))
    }
    fn affine(&self) -> Option<AffineRows> {
        let mut w = DMatrix::zeros(self.len(), self.state_dim);
        let o0 = self.offsets[0];
        for (j, &o) in self.offsets.iter().skip(1).enumerate() {
            for i in 0..self.width {
                w[(j * self.width + i, o + i)] = 1.0;
                w[(j * self.width + i, o0 + i)] = -1.0;
            }
        }
        Some(AffineRows { w, s: DMatrix::zeros(self.len(), 0), p: DVector::zeros(self.len()), n_eq: self.len() })
    }
    fn project(&self, x: &DVector<f64>, u: &DVector<f64>) -> Option<(DVector<f64>, DVector<f64>)> {
        let mut y = x.clone();
        let m = self.offsets.len() as f64;
        for i in 0..self.width {
            let mean = self.offsets.iter().map(|&o| x[o + i]).sum::<f64>() / m;
            for &o in &self.offsets {
                y[o + i] = mean;
            }
        }
        Some((y, u.clone()))
    }
    fn depends_on_action(&self) -> bool {
        false
    }
}

/// Row-wise concatenation; equality rows of all parts come first.
pub struct CompositeConstraint {
    parts: Vec<Arc<dyn StageConstraint>>,
}

impl CompositeConstraint {
    pub fn new(parts: Vec<Arc<dyn StageConstraint>>) -> Self {
        Self { parts }
    }

    fn reorder(&self, blocks: Vec<DMatrix<f64>>) -> DMatrix<f64> {
        let cols = blocks.iter().map(|b| b.ncols()).max().unwrap_or(0);
        let mut out = DMatrix::zeros(self.len(), cols);
        let mut eq_row = 0;
        let mut in_row = self.equality_rows();
        for (part, b) in self.parts.iter().zip(blocks) {
            let ne = part.equality_rows();
            for i in 0..b.nrows() {
                let target = if i < ne {
                    eq_row += 1;
                    eq_row - 1
                } else {
                    in_row += 1;
                    in_row - 1
                };
                out.view_mut((target, 0), (1, b.ncols())).copy_from(&b.row(i));
            }
        }
        out
    }
}

impl StageConstraint for CompositeConstraint {
    fn len(&self) -> usize {
        self.parts.iter().map(|p| p.len()).sum()
    }
    fn equality_rows(&self) -> usize {
        self.parts.iter().map(|p| p.equality_rows()).sum()
    }
    fn value(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        let cols: Vec<DMatrix<f64>> = self.parts.iter().map(|p| DMatrix::from_column_slice(p.len(), 1, p.value(x, u).as_slice())).collect();
        let m = self.reorder(cols);
        DVector::from_column_slice(m.as_slice())
    }
    fn jacobians(&self, x: &DVector<f64>, u: &DVector<f64>) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
        let mut jx = Vec::new();
        let mut ju = Vec::new();
        for p in &self.parts {
            let (a, b) = p.jacobians(x, u)?;
            jx.push(a);
            ju.push(b);
        }
        Some((self.reorder(jx), self.reorder(ju)))
    }
    fn project(&self, x: &DVector<f64>, u: &DVector<f64>) -> Option<(DVector<f64>, DVector<f64>)> {
        let state_parts = self.parts.iter().filter(|p| p.depends_on_state()).count();
        let action_parts = self.parts.iter().filter(|p| p.depends_on_action()).count();
        if state_parts > 1 || action_parts > 1 || self.parts.iter().any(|p| p.depends_on_state() && p.depends_on_action()) {
            return None;
        }
        let (mut y, mut v) = (x.clone(), u.clone());
        for p in &self.parts {
            (y, v) = p.project(&y, &v)?;
        }
        Some((y, v))
    }
    fn depends_on_state(&self) -> bool {
        self.parts.iter().any(|p| p.depends_on_state())
    }
    fn depends_on_action(&self) -> bool {
        self.parts.iter().any(|p| p.depends_on_action())
    }
}

/// `g(x, u) + gamma <= 0`.
pub struct Tightened {
    pub inner: Arc<dyn StageConstraint>,
    pub gamma: DVector<f64>,
}

impl StageConstraint for Tightened {
    fn len(&self) -> usize {
        self.inner.len()
    }
    fn equality_rows(&self) -> usize {
        self.inner.equality_rows()
    }
    fn value(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        self.inner.value(x, u) + &self.gamma
    }
    fn jacobians(&self, x: &DVector<f64>, u: &DVector<f64>) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
        self.inner.jacobians(x, u)
    }
    fn affine(&self) -> Option<AffineRows> {
        self.inner.affine().map(|mut a| {
            a.p += &self.gamma;
            a
        })
    }
    fn project(&self, x: &DVector<f64>, u: &DVector<f64>) -> Option<(DVector<f64>, DVector<f64>)> {
        let rows = resize_affine(self.affine()?, x.len(), u.len());
        project_affine_rows(&rows, x, u)
    }
    fn depends_on_state(&self) -> bool {
        self.inner.depends_on_state()
    }
    fn depends_on_action(&self) -> bool {
        self.inner.depends_on_action()
    }
}

/// Zero-pads affine rows whose state or action block was built without knowing the width.
pub fn resize_affine(mut rows: AffineRows, nx: usize, nu: usize) -> AffineRows {
    let m = rows.p.len();
    if rows.w.ncols() != nx {
        rows.w = DMatrix::zeros(m, nx);
    }
    if rows.s.ncols() != nu {
        rows.s = DMatrix::zeros(m, nu);
    }
    rows
}
