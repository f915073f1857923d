//! Shared builders and independent oracles for the integration tests.
#![allow(dead_code)]

use std::sync::Arc;

use dyngame::game::primitives::{AffineConstraint, FnCost, FnDynamics, LinearDynamics, QuadraticCost};
use dyngame::{GameBuilder, GameDefinition, Trajectory};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rand_mat(r: &mut ChaCha8Rng, m: usize, n: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(m, n, |_, _| scale * r.random_range(-1.0..1.0))
}

pub fn rand_vec(r: &mut ChaCha8Rng, n: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| scale * r.random_range(-1.0..1.0))
}

/// Affine stage rows `w x + s u + p (<= | =) 0`.
#[derive(Clone, Debug)]
pub struct Rows {
    pub w: DMatrix<f64>,
    pub s: DMatrix<f64>,
    pub p: DVector<f64>,
    pub n_eq: usize,
}

/// Plain-matrix description of an affine-quadratic game, kept separate from the library types
/// so the oracles below never call into the code under test.
#[derive(Clone, Debug)]
pub struct LqSpec {
    pub t: usize,
    pub nx: usize,
    pub dims: Vec<usize>,
    pub x0: DVector<f64>,
    /// `(A_k, B_k, c_k)` for `k < t`.
    pub maps: Vec<(DMatrix<f64>, DMatrix<f64>, DVector<f64>)>,
    /// `q[n][k]`: stage cost `0.5 z' q z`, `z = [1; x; u]`, for `k = 0..=t`.
    pub q: Vec<Vec<DMatrix<f64>>>,
    pub cons: Vec<Option<Rows>>,
}

impl LqSpec {
    pub fn nu(&self) -> usize {
        self.dims.iter().sum()
    }

    pub fn offset(&self, n: usize) -> usize {
        self.dims[..n].iter().sum()
    }

    pub fn build(&self) -> GameDefinition {
        let mut b = GameBuilder::new(self.t, self.x0.clone(), self.dims.clone());
        for (k, (a, bm, c)) in self.maps.iter().enumerate() {
            b = b.dynamics(k, Arc::new(LinearDynamics::new(a.clone(), bm.clone(), c.clone())));
        }
        for (n, qs) in self.q.iter().enumerate() {
            for (k, q) in qs.iter().enumerate() {
                b = b.cost(n, k, Arc::new(QuadraticCost::new(q.clone())));
            }
        }
        for (k, c) in self.cons.iter().enumerate() {
            if let Some(r) = c {
                b = b.constraint(k, Arc::new(AffineConstraint::new(r.w.clone(), r.s.clone(), r.p.clone(), r.n_eq)));
            }
        }
        b.build().unwrap()
    }

    /// Same game with nonlinear-capable closure primitives (finite-difference derivatives).
    pub fn build_opaque(&self) -> GameDefinition {
        let mut b = GameBuilder::new(self.t, self.x0.clone(), self.dims.clone());
        for (k, (a, bm, c)) in self.maps.iter().enumerate() {
            let (a, bm, c) = (a.clone(), bm.clone(), c.clone());
            b = b.dynamics(k, Arc::new(FnDynamics::new(move |x, u| &a * x + &bm * u + &c)));
        }
        for (n, qs) in self.q.iter().enumerate() {
            for (k, q) in qs.iter().enumerate() {
                let q = q.clone();
                b = b.cost(
                    n,
                    k,
                    Arc::new(FnCost::new(move |x, u| {
                        let z = stack_z(x, u);
                        0.5 * z.dot(&(&q * &z))
                    })),
                );
            }
        }
        b.build().unwrap()
    }

    /// `[1; x_0; ...; x_t]` as a linear map of `[1; U]` with `U` the time-major stacked actions.
    fn state_maps(&self) -> Vec<DMatrix<f64>> {
        let (nx, nu, t) = (self.nx, self.nu(), self.t);
        let cols = 1 + nu * (t + 1);
        let mut x = DMatrix::zeros(nx, cols);
        x.column_mut(0).copy_from(&self.x0);
        let mut out = vec![x.clone()];
        for k in 0..t {
            let (a, b, c) = &self.maps[k];
            let mut next = a * &x;
            let mut col0 = next.column(0).into_owned();
            col0 += c;
            next.column_mut(0).copy_from(&col0);
            let mut bu = next.columns_mut(1 + k * nu, nu);
            bu += b;
            x = next;
            out.push(x.clone());
        }
        out
    }

    /// `z_k = L_k [1; U]`.
    fn z_maps(&self) -> Vec<DMatrix<f64>> {
        let (nx, nu) = (self.nx, self.nu());
        let cols = 1 + nu * (self.t + 1);
        self.state_maps()
            .into_iter()
            .enumerate()
            .map(|(k, xm)| {
                let mut l = DMatrix::zeros(1 + nx + nu, cols);
                l[(0, 0)] = 1.0;
                l.view_mut((1, 0), (nx, cols)).copy_from(&xm);
                for i in 0..nu {
                    l[(1 + nx + i, 1 + k * nu + i)] = 1.0;
                }
                l
            })
            .collect()
    }

    /// Player cost as `0.5 [1; U]' Q [1; U]`.
    pub fn stacked_cost(&self, n: usize) -> DMatrix<f64> {
        let ls = self.z_maps();
        let cols = ls[0].ncols();
        let mut q = DMatrix::zeros(cols, cols);
        for (k, l) in ls.iter().enumerate() {
            let s = &self.q[n][k];
            q += l.transpose() * (0.5 * (s + s.transpose())) * l;
        }
        q
    }

    /// Pseudo-gradient `M U + m` and constraints `G U + h (<= | =) 0` (equalities first).
    pub fn stacked(&self) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>, DVector<f64>, usize) {
        let nu = self.nu();
        let nv = nu * (self.t + 1);
        let mut mm = DMatrix::zeros(nv, nv);
        let mut mv = DVector::zeros(nv);
        for n in 0..self.dims.len() {
            let q = self.stacked_cost(n);
            for k in 0..=self.t {
                for i in 0..self.dims[n] {
                    let r = k * nu + self.offset(n) + i;
                    mm.row_mut(r).copy_from(&q.view((1 + r, 1), (1, nv)));
                    mv[r] = q[(1 + r, 0)];
                }
            }
        }
        let xs = self.state_maps();
        let (mut eq, mut ineq) = (Vec::new(), Vec::new());
        for (k, c) in self.cons.iter().enumerate() {
            let Some(r) = c else { continue };
            let mut g = &r.w * &xs[k];
            let mut su = g.columns_mut(1 + k * nu, nu);
            su += &r.s;
            for i in 0..r.p.len() {
                let row = (g.view((i, 1), (1, nv)).into_owned(), g[(i, 0)] + r.p[i]);
                if i < r.n_eq { eq.push(row) } else { ineq.push(row) }
            }
        }
        let n_eq = eq.len();
        let all: Vec<_> = eq.into_iter().chain(ineq).collect();
        let mut g = DMatrix::zeros(all.len(), nv);
        let mut h = DVector::zeros(all.len());
        for (i, (row, c)) in all.into_iter().enumerate() {
            g.row_mut(i).copy_from(&row);
            h[i] = c;
        }
        (mm, mv, g, h, n_eq)
    }

    pub fn split(&self, v: &DVector<f64>) -> Vec<DVector<f64>> {
        let nu = self.nu();
        (0..=self.t).map(|k| v.rows(k * nu, nu).into_owned()).collect()
    }
}

pub fn stack_z(x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
    let mut z = DVector::zeros(1 + x.len() + u.len());
    z[0] = 1.0;
    z.rows_mut(1, x.len()).copy_from(x);
    z.rows_mut(1 + x.len(), u.len()).copy_from(u);
    z
}

/// Random stage cost whose own-action block is strongly convex for player `n`.
pub fn random_cost(r: &mut ChaCha8Rng, nx: usize, dims: &[usize], n: usize, coupling: f64) -> DMatrix<f64> {
    let nu: usize = dims.iter().sum();
    let dim = nx + nu;
    let a = rand_mat(r, dim, dim, 1.0);
    let mut h = a.transpose() * a * (0.3 / dim as f64);
    // Cross-player action terms scaled down to keep the game monotone.
    let off: usize = dims[..n].iter().sum();
    for i in 0..nu {
        for j in 0..nu {
            let own_i = (off..off + dims[n]).contains(&i);
            let own_j = (off..off + dims[n]).contains(&j);
            if !(own_i && own_j) {
                h[(nx + i, nx + j)] *= coupling;
            }
        }
    }
    for i in off..off + dims[n] {
        h[(nx + i, nx + i)] += 1.0;
    }
    let mut q = DMatrix::zeros(1 + dim, 1 + dim);
    q.view_mut((1, 1), (dim, dim)).copy_from(&h);
    let lin = rand_vec(r, dim, 1.0);
    for i in 0..dim {
        q[(0, 1 + i)] = lin[i];
        q[(1 + i, 0)] = lin[i];
    }
    q[(0, 0)] = r.random_range(0.0..1.0);
    q
}

pub fn random_lq(r: &mut ChaCha8Rng, t: usize, nx: usize, dims: &[usize], coupling: f64) -> LqSpec {
    let nu: usize = dims.iter().sum();
    let maps = (0..t)
        .map(|_| {
            let a = DMatrix::identity(nx, nx) + rand_mat(r, nx, nx, 0.3);
            (a, rand_mat(r, nx, nu, 1.0), rand_vec(r, nx, 0.2))
        })
        .collect();
    let q = (0..dims.len()).map(|n| (0..=t).map(|_| random_cost(r, nx, dims, n, coupling)).collect()).collect();
    LqSpec { t, nx, dims: dims.to_vec(), x0: rand_vec(r, nx, 1.0), maps, q, cons: vec![None; t + 1] }
}

/// OLNE of an affine-quadratic game with shared multipliers, by active-set enumeration of the
/// stacked KKT system `M U + m + G' l = 0`.
pub fn kkt_olne(spec: &LqSpec) -> DVector<f64> {
    let (m, mv, g, h, n_eq) = spec.stacked();
    let rows = g.nrows();
    let n_in = rows - n_eq;
    assert!(n_in <= 16, "too many inequality rows for enumeration");
    let nv = m.nrows();
    let mut best: Option<(f64, DVector<f64>)> = None;
    for mask in 0u32..(1 << n_in) {
        let act: Vec<usize> = (0..n_eq).chain((0..n_in).filter(|i| mask & (1 << i) != 0).map(|i| n_eq + i)).collect();
        let na = act.len();
        let mut kkt = DMatrix::zeros(nv + na, nv + na);
        kkt.view_mut((0, 0), (nv, nv)).copy_from(&m);
        let mut rhs = DVector::zeros(nv + na);
        rhs.rows_mut(0, nv).copy_from(&(-&mv));
        for (j, &i) in act.iter().enumerate() {
            kkt.view_mut((0, nv + j), (nv, 1)).copy_from(&g.row(i).transpose());
            kkt.view_mut((nv + j, 0), (1, nv)).copy_from(&g.row(i));
            rhs[nv + j] = -h[i];
        }
        let Some(sol) = kkt.clone().lu().solve(&rhs) else { continue };
        if (&kkt * &sol - &rhs).amax() > 1e-8 * (1.0 + rhs.amax()) {
            continue;
        }
        let u = sol.rows(0, nv).into_owned();
        let slack = &g * &u + &h;
        let feasible = (n_eq..rows).all(|i| slack[i] <= 1e-9);
        let dual_ok = act.iter().enumerate().all(|(j, &i)| i < n_eq || sol[nv + j] >= -1e-9);
        if feasible && dual_ok {
            let score = slack.rows(n_eq, n_in).max().max(0.0);
            if best.as_ref().is_none_or(|(s, _)| score < *s) {
                best = Some((score, u));
            }
        }
    }
    best.expect("no KKT point found").1
}

/// Central finite difference of a scalar function along coordinate `i`.
pub fn central_diff(f: &dyn Fn(&DVector<f64>) -> f64, v: &DVector<f64>, i: usize, h: f64) -> f64 {
    let mut a = v.clone();
    let mut b = v.clone();
    a[i] += h;
    b[i] -= h;
    (f(&a) - f(&b)) / (2.0 * h)
}

/// Log-log slope of `ys` against `xs`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let num: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    num / den
}

/// Random smooth game: `x' = A x + B u + c + 0.1 tanh(C x + D u)` and costs
/// `0.5 z' Q z + 0.05 sum cos(E [x; u])`, both with analytic first derivatives.
pub fn random_smooth_game(r: &mut ChaCha8Rng, t: usize, nx: usize, dims: &[usize]) -> GameDefinition {
    use dyngame::game::primitives::{FnCost, FnDynamics};
    let nu: usize = dims.iter().sum();
    let mut b = GameBuilder::new(t, rand_vec(r, nx, 1.0), dims.to_vec());
    for k in 0..t {
        let a = DMatrix::identity(nx, nx) + rand_mat(r, nx, nx, 0.3);
        let bm = rand_mat(r, nx, nu, 1.0);
        let c = rand_vec(r, nx, 0.2);
        let cm = rand_mat(r, nx, nx, 1.0);
        let dm = rand_mat(r, nx, nu, 1.0);
        let (a2, b2, c2, d2) = (a.clone(), bm.clone(), cm.clone(), dm.clone());
        let step = move |x: &DVector<f64>, u: &DVector<f64>| &a * x + &bm * u + &c + (&cm * x + &dm * u).map(|v| 0.1 * v.tanh());
        let jac = move |x: &DVector<f64>, u: &DVector<f64>| {
            let s = (&c2 * x + &d2 * u).map(|v| 0.1 / v.cosh().powi(2));
            let ds = DMatrix::from_diagonal(&s);
            (&a2 + &ds * &c2, &b2 + &ds * &d2)
        };
        b = b.dynamics(k, Arc::new(FnDynamics::new(step).with_jacobians(jac)));
    }
    for n in 0..dims.len() {
        for k in 0..=t {
            let q = random_cost(r, nx, dims, n, 1.0);
            let e = rand_mat(r, 3, nx + nu, 1.0);
            let (q2, e2) = (q.clone(), e.clone());
            let value = move |x: &DVector<f64>, u: &DVector<f64>| {
                let z = stack_z(x, u);
                let xu = z.rows(1, z.len() - 1).into_owned();
                0.5 * z.dot(&(&q * &z)) + 0.05 * (&e * xu).map(f64::cos).sum()
            };
            let grad = move |x: &DVector<f64>, u: &DVector<f64>| {
                let z = stack_z(x, u);
                let xu = z.rows(1, z.len() - 1).into_owned();
                let g = (&q2 * &z).rows(1, z.len() - 1).into_owned() - 0.05 * e2.tr_mul(&(&e2 * &xu).map(f64::sin));
                (g.rows(0, x.len()).into_owned(), g.rows(x.len(), u.len()).into_owned())
            };
            b = b.cost(n, k, Arc::new(FnCost::new(value).with_gradient(grad)));
        }
    }
    b.build().unwrap()
}

/// `dJ_n/du_{n,k}` for all players and stages by central differences of rolled-out costs,
/// time-major like the library's flat pseudo-gradient.
pub fn fd_pseudo_gradient(game: &GameDefinition, actions: &[DVector<f64>], h: f64) -> DVector<f64> {
    let nu = game.joint_action_dim();
    let t = game.horizon();
    let flat = DVector::from_iterator(nu * (t + 1), actions.iter().flat_map(|u| u.iter().copied()));
    let mut out = DVector::zeros(flat.len());
    for n in 0..game.num_players() {
        let cost = |v: &DVector<f64>| {
            let acts: Vec<DVector<f64>> = (0..=t).map(|k| v.rows(k * nu, nu).into_owned()).collect();
            let tr = game.rollout(&acts).unwrap();
            game.player_costs(&tr)[n]
        };
        let (off, d) = (game.action_offset(n), game.action_dims()[n]);
        for k in 0..=t {
            for i in 0..d {
                let idx = k * nu + off + i;
                out[idx] = central_diff(&cost, &flat, idx, h);
            }
        }
    }
    out
}

/// Random parametric game data: per-player cost matrices with a strongly monotone stacked `F`.
pub fn random_parametric(r: &mut ChaCha8Rng, nx: usize, dims: &[usize]) -> Vec<DMatrix<f64>> {
    (0..dims.len()).map(|n| random_cost(r, nx, dims, n, 0.3)).collect()
}

/// Is `v` in the cone generated by the rows of `s`? Exact enumeration of supports of a
/// nonnegative least-squares fit.
pub fn in_cone_nnls(s: &DMatrix<f64>, v: &DVector<f64>, tol: f64) -> bool {
    let m = s.nrows();
    if v.norm() <= tol {
        return true;
    }
    for mask in 1u32..(1 << m) {
        let idx: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
        let g = s.select_rows(&idx).transpose();
        let Ok(svd) = g.clone().svd(true, true).solve(v, 1e-12) else { continue };
        if svd.iter().all(|l| *l >= -tol) && (&g * &svd - v).norm() <= tol * (1.0 + v.norm()) {
            return true;
        }
    }
    false
}

pub fn dense_kkt(f: &DMatrix<f64>, pm: &DMatrix<f64>, h: &DVector<f64>, w: &DMatrix<f64>, s: &DMatrix<f64>, p: &DVector<f64>, x: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    let (nu, m) = (f.nrows(), s.nrows());
    let mut kkt = DMatrix::zeros(nu + m, nu + m);
    kkt.view_mut((0, 0), (nu, nu)).copy_from(f);
    kkt.view_mut((0, nu), (nu, m)).copy_from(&s.transpose());
    kkt.view_mut((nu, 0), (m, nu)).copy_from(s);
    let mut rhs = DVector::zeros(nu + m);
    rhs.rows_mut(0, nu).copy_from(&(-(pm * x + h)));
    rhs.rows_mut(nu, m).copy_from(&(-(w * x + p)));
    let sol = kkt.lu().solve(&rhs).unwrap();
    (sol.rows(0, nu).into_owned(), sol.rows(nu, m).into_owned())
}

/// Projected fixed-point VI solve of the stage game at one `x` over `{u : W x + S u + p <= 0}`,
/// a half-space, so the projection is closed-form.
pub fn vi_oracle(f: &DMatrix<f64>, pm: &DMatrix<f64>, h: &DVector<f64>, w: &DMatrix<f64>, s: &DMatrix<f64>, p: &DVector<f64>, x: &DVector<f64>) -> DVector<f64> {
    let a = s.row(0).transpose();
    let b = -(w * x + p)[0];
    let proj = |u: DVector<f64>| {
        let viol = a.dot(&u) - b;
        if viol > 0.0 { &u - &a * (viol / a.norm_squared()) } else { u }
    };
    let sym = (f + f.transpose()) * 0.5;
    let mu = sym.symmetric_eigenvalues().min();
    let lip = f.norm();
    let tau = mu / (lip * lip);
    let mut u = DVector::zeros(f.nrows());
    for _ in 0..200_000 {
        let next = proj(&u - tau * (f * &u + pm * x + h));
        let d = (&next - &u).amax();
        u = next;
        if d < 1e-15 {
            break;
        }
    }
    u
}

/// Feedback Nash gains of the quadratic part by the classical coupled Riccati recursion.
pub fn coupled_riccati_gains(spec: &LqSpec) -> Vec<DMatrix<f64>> {
    let (nx, nu, np) = (spec.nx, spec.nu(), spec.dims.len());
    let mut v = vec![DMatrix::<f64>::zeros(nx, nx); np];
    let mut gains = vec![DMatrix::zeros(nu, nx); spec.t + 1];
    for k in (0..=spec.t).rev() {
        let mut g = Vec::with_capacity(np);
        for n in 0..np {
            let q = &spec.q[n][k];
            let mut gn = q.view((1, 1), (nx + nu, nx + nu)).into_owned();
            gn = (&gn + gn.transpose()) * 0.5;
            if k < spec.t {
                let (a, b, _) = &spec.maps[k];
                let mut ab = DMatrix::zeros(nx, nx + nu);
                ab.view_mut((0, 0), (nx, nx)).copy_from(a);
                ab.view_mut((0, nx), (nx, nu)).copy_from(b);
                gn += ab.transpose() * &v[n] * ab;
            }
            g.push(gn);
        }
        let mut f = DMatrix::zeros(nu, nu);
        let mut p = DMatrix::zeros(nu, nx);
        for n in 0..np {
            let (off, d) = (spec.offset(n), spec.dims[n]);
            f.view_mut((off, 0), (d, nu)).copy_from(&g[n].view((nx + off, nx), (d, nu)));
            p.view_mut((off, 0), (d, nx)).copy_from(&g[n].view((nx + off, 0), (d, nx)));
        }
        let k_mat = -f.lu().solve(&p).unwrap();
        let mut ik = DMatrix::zeros(nx + nu, nx);
        ik.view_mut((0, 0), (nx, nx)).fill_with_identity();
        ik.view_mut((nx, 0), (nu, nx)).copy_from(&k_mat);
        for n in 0..np {
            v[n] = ik.transpose() * &g[n] * &ik;
        }
        gains[k] = k_mat;
    }
    gains
}

/// Two-player cascade: player 1 steers `x_1`, player 2 steers `x_2` and tracks `x_1`. One
/// tightened inequality on player 2's stage-2 action just touches the OLNE (zero multiplier),
/// and a loose tightened bound on player 1 stays inactive.
pub fn cascade_game() -> (GameDefinition, Trajectory) {
    let t = 5;
    let x0 = DVector::from_vec(vec![1.0, -1.0]);
    let dynamics = Arc::new(LinearDynamics::new(DMatrix::identity(2, 2), DMatrix::identity(2, 2), DVector::zeros(2)));
    // Player 1: (x_1 - 2)^2 + u_1^2. Player 2: (x_2 - x_1)^2 + u_2^2.
    let mut q1 = DMatrix::zeros(5, 5);
    q1[(0, 0)] = 8.0;
    q1[(0, 1)] = -4.0;
    q1[(1, 0)] = -4.0;
    q1[(1, 1)] = 2.0;
    q1[(3, 3)] = 2.0;
    let mut q2 = DMatrix::zeros(5, 5);
    q2[(1, 1)] = 2.0;
    q2[(2, 2)] = 2.0;
    q2[(1, 2)] = -2.0;
    q2[(2, 1)] = -2.0;
    q2[(4, 4)] = 2.0;
    let base = |cons: Option<(f64, f64)>| {
        let mut b = GameBuilder::new(t, x0.clone(), vec![1, 1])
            .dynamics_all(dynamics.clone())
            .running_cost(0, Arc::new(QuadraticCost::new(q1.clone())))
            .terminal_cost(0, Arc::new(QuadraticCost::new(q1.clone())))
            .running_cost(1, Arc::new(QuadraticCost::new(q2.clone())))
            .terminal_cost(1, Arc::new(QuadraticCost::new(q2.clone())));
        if let Some((bound, gamma)) = cons {
            // u_2 - bound <= 0 and u_1 - 10 <= 0 at stage 2, both tightened by gamma.
            let s = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
            let c = AffineConstraint::new(DMatrix::zeros(2, 2), s, DVector::from_vec(vec![-bound, -10.0]), 0);
            b = b.constraint(2, Arc::new(c)).tighten(2, DVector::from_element(2, gamma));
        }
        b.build().unwrap()
    };
    let free = base(None);
    let olne = dyngame::feedback::openloop::solve_unconstrained_olne(&free, &free.zero_actions(), Default::default()).unwrap();
    let reference = olne.trajectory;
    let gamma = 0.05;
    let game = base(Some((reference.actions[2][1] + gamma, gamma)));
    (game, reference)
}

/// LQ game with one affine inequality at stage 2 that cuts off the unconstrained OLNE.
pub fn constrained_spec(seed: u64) -> LqSpec {
    let mut r = rng(seed);
    let mut spec = random_lq(&mut r, 4, 2, &[1, 1], 0.3);
    let free = spec.split(&kkt_olne(&spec));
    let x = spec.build().rollout(&free).unwrap().states[2].clone();
    let w = rand_mat(&mut r, 1, 2, 1.0);
    let s = rand_mat(&mut r, 1, 2, 1.0);
    let p = DVector::from_element(1, 0.5 - (&w * &x + &s * &free[2])[0]);
    spec.cons[2] = Some(Rows { w, s, p, n_eq: 0 });
    spec
}
