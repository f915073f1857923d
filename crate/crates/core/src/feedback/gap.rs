//! Best-response gap of a feedback policy on a game with affine dynamics and polyhedral
//! constraints, where rows active at the reference stay tightened and the others are loosened
//! back to their original right-hand side.

use nalgebra::{DMatrix, DVector};

use super::FeedbackPolicy;
use crate::error::{Error, Result};
use crate::game::quadraticize::quadraticize;
use crate::game::{GameDefinition, Trajectory};
use crate::linalg::{stack_vectors, vstack};
use crate::qp::solve_qp;

/// Local data in deviation coordinates around a reference trajectory.
#[derive(Debug, Clone)]
pub struct TightenedGameSpec {
    pub reference: Trajectory,
    pub action_dims: Vec<usize>,
    pub a: Vec<DMatrix<f64>>,
    pub b: Vec<DMatrix<f64>>,
    /// Affine offsets `b_k` of the dynamics (informational; deviations cancel them).
    pub c: Vec<DVector<f64>>,
    /// `m[n][k]`: player costs in `[1; dx; du]` form.
    pub m: Vec<Vec<DMatrix<f64>>>,
    pub w: Vec<DMatrix<f64>>,
    pub s: Vec<DMatrix<f64>>,
    /// Tightened constraint value at the reference.
    pub p: Vec<DVector<f64>>,
    pub n_eq: Vec<usize>,
    pub gamma: Vec<DVector<f64>>,
    pub active: Vec<Vec<usize>>,
}

impl TightenedGameSpec {
    /// Requires affine dynamics and affine (optionally tightened) constraints; costs are taken
    /// from their second-order model at the reference, which is exact for quadratic costs.
    pub fn from_game(game: &GameDefinition, reference: &Trajectory, active_tol: f64) -> Result<Self> {
        let maps = game.affine_dynamics().ok_or_else(|| Error::Unsupported("best-response gap needs affine dynamics".into()))?;
        let quads = quadraticize(game, reference, active_tol)?;
        let t = game.horizon();
        let (nx, nu) = (game.state_dim(), game.joint_action_dim());
        let mut spec = TightenedGameSpec {
            reference: reference.clone(),
            action_dims: game.action_dims().to_vec(),
            a: maps.iter().map(|m| m.a.clone()).collect(),
            b: maps.iter().map(|m| m.b.clone()).collect(),
            c: maps.iter().map(|m| m.c.clone()).collect(),
            m: (0..game.num_players()).map(|n| quads.iter().map(|q| q.m[n].clone()).collect()).collect(),
            w: Vec::new(),
            s: Vec::new(),
            p: Vec::new(),
            n_eq: Vec::new(),
            gamma: Vec::new(),
            active: Vec::new(),
        };
        for k in 0..=t {
            match game.constraint(k) {
                Some(c) if !c.is_empty() => {
                    let rows = game.affine_constraint(k).ok_or_else(|| Error::Unsupported(format!("non-polyhedral constraint at stage {k}")))?;
                    let value = &rows.w * &reference.states[k] + &rows.s * &reference.actions[k] + &rows.p;
                    let gamma = game.tightening(k).cloned().unwrap_or_else(|| DVector::zeros(rows.p.len()));
                    spec.active.push((0..value.len()).filter(|&i| i < rows.n_eq || value[i] >= -active_tol).collect());
                    spec.w.push(rows.w);
                    spec.s.push(rows.s);
                    spec.p.push(value);
                    spec.n_eq.push(rows.n_eq);
                    spec.gamma.push(gamma);
                }
                _ => {
                    spec.w.push(DMatrix::zeros(0, nx));
                    spec.s.push(DMatrix::zeros(0, nu));
                    spec.p.push(DVector::zeros(0));
                    spec.n_eq.push(0);
                    spec.gamma.push(DVector::zeros(0));
                    spec.active.push(Vec::new());
                }
            }
        }
        Ok(spec)
    }

    pub fn horizon(&self) -> usize {
        self.m[0].len() - 1
    }
}

/// `J_{n,t}(x_t, phi) - min_psi J_{n,t}(x_t, [psi, phi_{-n}])`, with the best response found by a
/// dense QP over player `n`'s remaining actions.
pub fn epsilon_nash_gap(spec: &TightenedGameSpec, policy: &FeedbackPolicy, n: usize, t: usize, x_t: &DVector<f64>) -> Result<f64> {
    let horizon = spec.horizon();
    if t > horizon {
        return Err(Error::StageOutOfRange { stage: t, horizon });
    }
    let nx = x_t.len();
    let nu: usize = spec.action_dims.iter().sum();
    let off: usize = spec.action_dims[..n].iter().sum();
    let d = spec.action_dims[n];
    let stages = horizon - t + 1;
    let nv = d * stages;
    // Others' policy rows; player n's rows zeroed.
    let mask = |m: &DMatrix<f64>| {
        let mut m = m.clone();
        m.rows_mut(off, d).fill(0.0);
        m
    };
    let mut phi = DMatrix::zeros(nx, nv);
    let mut phi0 = x_t - &spec.reference.states[t];
    let (mut h, mut f) = (DMatrix::zeros(nv, nv), DVector::zeros(nv));
    let (mut eq_a, mut eq_b, mut in_a, mut in_b) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    // Policy's own actions, rolled out jointly.
    let mut v_policy = DVector::zeros(nv);
    let mut dx_pol = phi0.clone();
    for k in t..=horizon {
        let j = k - t;
        let kk = mask(&policy.gains[k]);
        let mut uu = &kk * &phi;
        uu.view_mut((off, j * d), (d, d)).fill_with_identity();
        let u0 = &kk * &phi0;
        // z = Z v + zeta in [1; dx; du] coordinates.
        let mut z = DMatrix::zeros(1 + nx + nu, nv);
        z.view_mut((1, 0), (nx, nv)).copy_from(&phi);
        z.view_mut((1 + nx, 0), (nu, nv)).copy_from(&uu);
        let zeta = stack_vectors(&[DVector::from_element(1, 1.0), phi0.clone(), u0.clone()]);
        let m = &spec.m[n][k];
        h += z.tr_mul(&(m * &z));
        f += z.tr_mul(&(m * &zeta));
        // Constraints: active rows keep the tightened bound, inactive rows get gamma back.
        if !spec.p[k].is_empty() {
            let rows_a = &spec.w[k] * &phi + &spec.s[k] * &uu;
            let rows_c = &spec.w[k] * &phi0 + &spec.s[k] * &u0 + &spec.p[k];
            for i in 0..spec.p[k].len() {
                let slack = if spec.active[k].contains(&i) { 0.0 } else { spec.gamma[k][i] };
                let row = rows_a.row(i).into_owned();
                let rhs = slack - rows_c[i];
                if i < spec.n_eq[k] {
                    eq_a.push(row);
                    eq_b.push(rhs);
                } else {
                    in_a.push(row);
                    in_b.push(rhs);
                }
            }
        }
        let u_pol = &policy.gains[k] * &dx_pol;
        v_policy.rows_mut(j * d, d).copy_from(&u_pol.rows(off, d));
        if k < horizon {
            phi = &spec.a[k] * &phi + &spec.b[k] * &uu;
            phi0 = &spec.a[k] * &phi0 + &spec.b[k] * &u0;
            dx_pol = &spec.a[k] * &dx_pol + &spec.b[k] * &u_pol;
        }
    }
    let n_eq = eq_a.len();
    let rows: Vec<DMatrix<f64>> = eq_a.into_iter().chain(in_a).map(|r| DMatrix::from_row_slice(1, nv, r.as_slice())).collect();
    let refs: Vec<&DMatrix<f64>> = rows.iter().collect();
    let a = if refs.is_empty() { DMatrix::zeros(0, nv) } else { vstack(&refs) };
    let b = DVector::from_vec(eq_b.into_iter().chain(in_b).collect());
    let h = crate::linalg::symmetrize(&h);
    let sol = solve_qp(&h, &f, &a, &b, n_eq)?;
    let obj = |v: &DVector<f64>| 0.5 * v.dot(&(&h * v)) + f.dot(v);
    Ok((obj(&v_policy) - obj(&sol.x)).max(0.0))
}
