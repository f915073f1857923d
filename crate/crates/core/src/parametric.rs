//! Quadratic parametric games with linear constraints.
//!
//! Each player `n` minimises `0.5 [1; x; u]' Gamma_n [1; x; u]` over its own action block,
//! subject to the shared constraint `W x + S u + p <= 0` (first `n_eq` rows equalities).
//! Stacking the players' own-action stationarity rows gives `F u + P x + H + S' lambda = 0`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{pinv, rank, solve, solve_vec};
use crate::qp::solve_qp;

#[derive(Debug, Clone)]
pub struct ParametricGameData {
    /// Per-player `(1 + nx + nu)`-square symmetric cost matrices.
    pub gamma: Vec<DMatrix<f64>>,
    pub action_dims: Vec<usize>,
    pub state_dim: usize,
    pub w: DMatrix<f64>,
    pub s: DMatrix<f64>,
    pub p: DVector<f64>,
    pub n_eq: usize,
}

impl ParametricGameData {
    pub fn unconstrained(gamma: Vec<DMatrix<f64>>, action_dims: Vec<usize>, state_dim: usize) -> Self {
        let nu = action_dims.iter().sum();
        Self { gamma, action_dims, state_dim, w: DMatrix::zeros(0, state_dim), s: DMatrix::zeros(0, nu), p: DVector::zeros(0), n_eq: 0 }
    }

    fn nu(&self) -> usize {
        self.action_dims.iter().sum()
    }

    /// Stacked own-action rows `(F, P, H)`.
    pub fn fph(&self) -> (DMatrix<f64>, DMatrix<f64>, DVector<f64>) {
        let (nx, nu) = (self.state_dim, self.nu());
        let mut f = DMatrix::zeros(nu, nu);
        let mut p = DMatrix::zeros(nu, nx);
        let mut h = DVector::zeros(nu);
        let mut off = 0;
        for (g, &d) in self.gamma.iter().zip(&self.action_dims) {
            let r = 1 + nx + off;
            f.view_mut((off, 0), (d, nu)).copy_from(&g.view((r, 1 + nx), (d, nu)));
            p.view_mut((off, 0), (d, nx)).copy_from(&g.view((r, 1), (d, nx)));
            h.rows_mut(off, d).copy_from(&g.view((r, 0), (d, 1)));
            off += d;
        }
        (f, p, h)
    }
}

/// Affine equilibrium law `u = K x + s` with multipliers `lambda = lambda_gain x + lambda_offset`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AffineLaw {
    #[serde(serialize_with = "ser_mat")]
    pub k: DMatrix<f64>,
    #[serde(serialize_with = "ser_vec")]
    pub s: DVector<f64>,
    #[serde(serialize_with = "ser_mat")]
    pub lambda_gain: DMatrix<f64>,
    #[serde(serialize_with = "ser_vec")]
    pub lambda_offset: DVector<f64>,
}

pub(crate) fn ser_mat<S: serde::Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(m.nrows()))?;
    for r in m.row_iter() {
        seq.serialize_element(&r.iter().copied().collect::<Vec<f64>>())?;
    }
    seq.end()
}

pub(crate) fn ser_vec<S: serde::Serializer>(v: &DVector<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter())
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub enum SingularHandling {
    /// `F` must be invertible and `S` full row rank.
    #[default]
    Reject,
    /// Solve the joint KKT matrix, falling back to its pseudo-inverse when singular.
    LeastSquares,
    /// Adds `mu I` to `F` before solving.
    Regularized(f64),
}

/// Unique affine equilibrium of an equality-constrained stage game `F u + P x + H + S'l = 0`,
/// `W x + S u + p = 0`.
///
/// Solved through the joint KKT matrix `[F S'; S 0]`; eliminating `u` gives the closed form
/// `K = -F^-1 S'(S F^-1 S')^-1 (W - S F^-1 P) - F^-1 P`.
pub fn solve_eq_constrained_stage_game(
    f: &DMatrix<f64>,
    p_mat: &DMatrix<f64>,
    h: &DVector<f64>,
    w: &DMatrix<f64>,
    s: &DMatrix<f64>,
    p: &DVector<f64>,
    handling: SingularHandling,
) -> Result<AffineLaw> {
    let nu = f.nrows();
    let nx = p_mat.ncols();
    let m = s.nrows();
    crate::error::check_dim("constraint action columns", nu, s.ncols().max(if m == 0 { nu } else { 0 }))?;
    if handling == SingularHandling::Reject {
        if solve(f, &DMatrix::identity(nu, nu)).is_none() {
            return Err(Error::Singular { what: "stage game matrix F".into(), stage: 0 });
        }
        if m > 0 && rank(s, 1e-10) < m {
            return Err(Error::RankDeficient { stage: 0 });
        }
    }
    if m == nu && m > 0 {
        // Square S pins the action outright: u = -S^-1 (W x + p).
        let mut wp = DMatrix::zeros(m, nx + 1);
        wp.view_mut((0, 0), (m, nx)).copy_from(w);
        wp.set_column(nx, p);
        if let Some(ks) = solve(s, &wp) {
            let ks = -ks;
            let k = ks.columns(0, nx).into_owned();
            let s_off = ks.column(nx).into_owned();
            let st = s.transpose();
            let lambda_gain = solve(&st, &(-(f * &k + p_mat))).expect("S' invertible when S is");
            let lambda_offset = solve_vec(&st, &(-(f * &s_off + h))).expect("S' invertible when S is");
            return Ok(AffineLaw { k, s: s_off, lambda_gain, lambda_offset });
        }
    }
    let mut kkt = DMatrix::zeros(nu + m, nu + m);
    kkt.view_mut((0, 0), (nu, nu)).copy_from(f);
    if let SingularHandling::Regularized(mu) = handling {
        for i in 0..nu {
            kkt[(i, i)] += mu;
        }
    }
    if m > 0 {
        kkt.view_mut((0, nu), (nu, m)).copy_from(&s.transpose());
        kkt.view_mut((nu, 0), (m, nu)).copy_from(s);
    }
    let mut rhs = DMatrix::zeros(nu + m, nx + 1);
    rhs.view_mut((0, 0), (nu, nx)).copy_from(&(-p_mat));
    rhs.view_mut((0, nx), (nu, 1)).copy_from(&(-h));
    if m > 0 {
        rhs.view_mut((nu, 0), (m, nx)).copy_from(&(-w));
        rhs.view_mut((nu, nx), (m, 1)).copy_from(&(-p));
    }
    let sol = match solve(&kkt, &rhs) {
        Some(sol) => sol,
        None if handling == SingularHandling::LeastSquares => pinv(&kkt, 1e-10) * &rhs,
        None => return Err(Error::Singular { what: "stage KKT matrix".into(), stage: 0 }),
    };
    let law = AffineLaw {
        k: sol.view((0, 0), (nu, nx)).into_owned(),
        s: sol.view((0, nx), (nu, 1)).column(0).into_owned(),
        lambda_gain: sol.view((nu, 0), (m, nx)).into_owned(),
        lambda_offset: sol.view((nu, nx), (m, 1)).column(0).into_owned(),
    };
    if handling == SingularHandling::Reject {
        let res = kkt_residual(f, p_mat, h, w, s, p, &law);
        let scale = 1.0 + f.abs().max() + p_mat.abs().max() + h.abs().max() + w.abs().max() + p.abs().max();
        if res > 1e-8 * scale * (1.0 + law.k.abs().max() + law.s.abs().max()) {
            return Err(Error::Singular { what: format!("stage KKT solve (residual {res:e})"), stage: 0 });
        }
    }
    Ok(law)
}

/// Max-norm residual of the KKT identities holding for every `x`.
pub fn kkt_residual(
    f: &DMatrix<f64>,
    p_mat: &DMatrix<f64>,
    h: &DVector<f64>,
    w: &DMatrix<f64>,
    s: &DMatrix<f64>,
    p: &DVector<f64>,
    law: &AffineLaw,
) -> f64 {
    if s.nrows() == 0 {
        return (f * &law.k + p_mat).abs().max().max((f * &law.s + h).abs().max());
    }
    let st = s.transpose();
    [
        (f * &law.k + p_mat + &st * &law.lambda_gain).abs().max(),
        (f * &law.s + h + &st * &law.lambda_offset).abs().max(),
        (w + s * &law.k).abs().max(),
        (s * &law.s + p).abs().max(),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

/// Canonical entry point on [`ParametricGameData`], treating every row as an equality.
pub fn solve_lecq_parametric(data: &ParametricGameData) -> Result<AffineLaw> {
    let (f, pm, h) = data.fph();
    solve_eq_constrained_stage_game(&f, &pm, &h, &data.w, &data.s, &data.p, SingularHandling::Reject)
}

/// `L` with `v in cone{rows of S} <=> L v <= 0` for `S` of full row rank.
pub fn cone_to_inequalities(s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (m, n) = s.shape();
    if m == 0 {
        // The cone of no generators is the origin.
        return Ok(crate::linalg::vstack(&[&DMatrix::identity(n, n), &(-DMatrix::identity(n, n))]));
    }
    if rank(s, 1e-10) < m {
        return Err(Error::RankDeficient { stage: 0 });
    }
    let sst_inv_s = solve(&(s * s.transpose()), s).ok_or(Error::RankDeficient { stage: 0 })?;
    let proj = DMatrix::identity(n, n) - s.transpose() * &sst_inv_s;
    Ok(crate::linalg::vstack(&[&(-&sst_inv_s), &proj, &(-&proj)]))
}

#[derive(Debug, Clone, Serialize)]
pub struct PolicyRegion {
    pub active: Vec<usize>,
    pub law: AffineLaw,
    /// Region `{x : L x + l <= 0}`.
    #[serde(serialize_with = "ser_mat")]
    pub l_mat: DMatrix<f64>,
    #[serde(serialize_with = "ser_vec")]
    pub l_vec: DVector<f64>,
}

impl PolicyRegion {
    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        (&self.l_mat * x + &self.l_vec).iter().all(|v| *v <= tol)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PiecewiseAffinePolicy {
    pub regions: Vec<PolicyRegion>,
    /// Active subsets skipped because `S_a` lost row rank.
    pub skipped_rank_deficient: Vec<Vec<usize>>,
}

impl PiecewiseAffinePolicy {
    pub fn region_of(&self, x: &DVector<f64>, tol: f64) -> Option<&PolicyRegion> {
        self.regions.iter().find(|r| r.contains(x, tol))
    }

    pub fn evaluate(&self, x: &DVector<f64>, tol: f64) -> Option<DVector<f64>> {
        self.region_of(x, tol).map(|r| &r.law.k * x + &r.law.s)
    }
}

pub const ENUMERATION_CAP: usize = 12;

/// Piecewise affine equilibrium law by enumerating active subsets.
///
/// For each subset `a` (always containing the equality rows) with `S_a` of full row rank, the
/// equality-constrained law `u = K_a x + s_a` is valid where the inactive rows hold and
/// `-(F u + P x + H) in cone{rows of S_a}`.
pub fn enumerate_lcq_parametric(data: &ParametricGameData) -> Result<PiecewiseAffinePolicy> {
    let (f, pm, h) = data.fph();
    let nc = data.p.len();
    let n_free = nc - data.n_eq;
    if n_free > ENUMERATION_CAP {
        return Err(Error::Unsupported(format!("{n_free} inequality rows exceed the enumeration cap of {ENUMERATION_CAP}")));
    }
    if solve(&f, &DMatrix::identity(f.nrows(), f.ncols())).is_none() {
        return Err(Error::Singular { what: "stage game matrix F".into(), stage: 0 });
    }
    let mut regions = Vec::new();
    let mut skipped = Vec::new();
    for mask in 0u32..(1u32 << n_free) {
        let active: Vec<usize> = (0..data.n_eq).chain((0..n_free).filter(|i| mask & (1 << i) != 0).map(|i| data.n_eq + i)).collect();
        let inactive: Vec<usize> = (data.n_eq..nc).filter(|i| !active.contains(i)).collect();
        let (wa, sa, pa) = (data.w.select_rows(&active), data.s.select_rows(&active), data.p.select_rows(&active));
        if !active.is_empty() && rank(&sa, 1e-10) < active.len() {
            skipped.push(active);
            continue;
        }
        let law = solve_eq_constrained_stage_game(&f, &pm, &h, &wa, &sa, &pa, SingularHandling::Reject)?;
        // Primal feasibility of inactive rows: (W + S K) x + S s + p <= 0.
        let wi = data.w.select_rows(&inactive);
        let si = data.s.select_rows(&inactive);
        let pi = data.p.select_rows(&inactive);
        let prim_l = &wi + &si * &law.k;
        let prim_c = &si * &law.s + &pi;
        // Dual feasibility: -(F u + P x + H) in cone{rows of S_a}. Multipliers of equality
        // rows are free, so their sign rows are dropped from the cone description.
        let l_cone = cone_to_inequalities(&sa)?;
        let keep: Vec<usize> = (0..l_cone.nrows()).filter(|&i| active.is_empty() || i >= data.n_eq).collect();
        let l_cone = l_cone.select_rows(&keep);
        let dual_l = -(&l_cone * (&f * &law.k + &pm));
        let dual_c = -(&l_cone * (&f * &law.s + &h));
        let l_mat = crate::linalg::vstack(&[&prim_l, &dual_l]);
        let l_vec = crate::linalg::stack_vectors(&[prim_c, dual_c]);
        if region_nonempty(&l_mat, &l_vec) {
            regions.push(PolicyRegion { active, law, l_mat, l_vec });
        }
    }
    Ok(PiecewiseAffinePolicy { regions, skipped_rank_deficient: skipped })
}

/// Phase-1 certificate: the minimum-norm point of `{x : L x + l <= 0}` exists.
fn region_nonempty(l_mat: &DMatrix<f64>, l_vec: &DVector<f64>) -> bool {
    let nx = l_mat.ncols();
    // Rows that vanish identically carry no information and would only add roundoff.
    let scale = 1e-10 * (1.0 + l_mat.amax() + l_vec.amax());
    let keep: Vec<usize> = (0..l_vec.len())
        .filter(|&i| l_mat.row(i).amax() > scale || l_vec[i] > scale)
        .collect();
    if keep.iter().any(|&i| l_mat.row(i).amax() <= scale) {
        return false;
    }
    let a = l_mat.select_rows(&keep);
    let b = -l_vec.select_rows(&keep);
    solve_qp(&DMatrix::identity(nx, nx), &DVector::zeros(nx), &a, &b, 0).is_ok()
}
