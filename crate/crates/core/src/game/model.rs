//! Stage primitives: dynamics, costs and constraints.
//!
//! Analytic derivatives are optional; anything missing is filled in by
//! finite differences (see [`super::derivatives`]).

use nalgebra::{DMatrix, DVector};

/// Affine stage map `x' = a x + b u + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DVector<f64>,
}

/// Affine stage constraint `w x + s u + p <= 0`; the first `n_eq` rows are equalities.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineRows {
    pub w: DMatrix<f64>,
    pub s: DMatrix<f64>,
    pub p: DVector<f64>,
    pub n_eq: usize,
}

pub trait Dynamics: Send + Sync {
    fn step(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64>;

    /// `(df/dx, df/du)`.
    fn jacobians(&self, _x: &DVector<f64>, _u: &DVector<f64>) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
        None
    }

    /// One Hessian per output component, over the stacked `[x; u]`.
    fn hessians(&self, _x: &DVector<f64>, _u: &DVector<f64>) -> Option<Vec<DMatrix<f64>>> {
        None
    }

    fn affine(&self) -> Option<AffineMap> {
        None
    }
}

pub trait StageCost: Send + Sync {
    fn value(&self, x: &DVector<f64>, u: &DVector<f64>) -> f64;

    /// `(dc/dx, dc/du)`.
    fn gradient(&self, _x: &DVector<f64>, _u: &DVector<f64>) -> Option<(DVector<f64>, DVector<f64>)> {
        None
    }

    /// Hessian over the stacked `[x; u]`.
    fn hessian(&self, _x: &DVector<f64>, _u: &DVector<f64>) -> Option<DMatrix<f64>> {
        None
    }
}

pub trait StageConstraint: Send + Sync {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of leading rows that are equalities (`g_i = 0`).
    fn equality_rows(&self) -> usize {
        0
    }

    fn value(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64>;

    /// `(dg/dx, dg/du)`.
    fn jacobians(&self, _x: &DVector<f64>, _u: &DVector<f64>) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
        None
    }

    fn affine(&self) -> Option<AffineRows> {
        None
    }

    /// Euclidean projection of `(x, u)` onto the stage set, when cheap and exact.
    fn project(&self, _x: &DVector<f64>, _u: &DVector<f64>) -> Option<(DVector<f64>, DVector<f64>)> {
        None
    }

    fn depends_on_state(&self) -> bool {
        true
    }

    fn depends_on_action(&self) -> bool {
        true
    }
}
