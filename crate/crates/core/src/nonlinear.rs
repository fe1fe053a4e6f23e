//! The nonlinear problem for `u = u_bar(R + S, a + alpha) + v`:
//! `N(S, alpha, v) = zeta + Delta v + c ((u_bar + v)^p - u_bar^p)`, its
//! linearization `Lambda` at the approximate solution, the chord iteration
//! `x <- x - Lambda^{-1} N(x)` and the nondegeneracy report.
//!
//! Parameter directions enter through deficiency fields: the glue solve returns
//! `G + (K/eps) Psi` in each ball, and `(K/eps) Psi` is traded for parameter
//! increments `(S, alpha)` and the difference between `Psi` and the cut-off
//! derivative `J` of `u_bar` in that parameter, which vanishes for `r < rho`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::approx::ApproxSolution;
use crate::config::{Grids, Tolerances};
use crate::delaunay::DelaunayOrbit;
use crate::error::{Error, Result};
use crate::exterior::{shell_cutoff, Exterior};
use crate::field::{ModalBlock, NormRegion};
use crate::gluing::{GlobalLinearSolution, GlueOperator, GluedField, Source};
use crate::grid::{BallGrid, ShellGrid};
use crate::harmonics::{modes, SphereTransform};
use crate::interior::{neumann_at_boundary, weighted_sup, ModeProblem, NumerovDirichlet};

/// `||phi_1|| / ||x_1||` on the unit sphere: `phi_j = C1 theta_j` for `j = 1, 2, 3`.
const C1: f64 = 0.488_602_511_902_919_9;

/// `r^{(N-2)/2} u(R, a, r theta)` at `t = -log r`, computed without forming
/// `x_i + r theta`: `|theta - a e^{-t}|^{-kappa} v(t + log R + log|theta - a e^{-t}|)`.
pub fn cylindrical_piece(orbit: &DelaunayOrbit, r_param: f64, a: &[f64], t: f64, theta: [f64; 3]) -> f64 {
    let k = orbit.params.kappa();
    let e = (-t).exp();
    let d2: f64 = (0..3).map(|c| (theta[c] - a[c] * e).powi(2)).sum();
    let ln_d = 0.5 * d2.ln();
    (-k * ln_d).exp() * orbit.eval(t + r_param.ln() + ln_d).0
}

/// Samples of `u_bar` and the error term on the discretization.
#[derive(Debug, Clone)]
pub struct Background {
    /// Cylindrical `r^{(N-2)/2} u_bar` at (ball node, angular node); empty unless
    /// sampled in full.
    pub balls: Vec<DMatrix<f64>>,
    /// `u_bar` at (shell node, angular node).
    pub shells: Vec<DMatrix<f64>>,
    /// Mode coefficients of `zeta` (cylindrical in the balls).
    pub zeta: Source,
    /// Largest sample of `zeta` not represented by the retained modes.
    pub zeta_tail: f64,
}

/// Parameter increments and field of the unknown, with `L v` tracked alongside.
#[derive(Debug, Clone)]
pub struct State {
    pub s: Vec<f64>,
    pub alpha: Vec<[f64; 3]>,
    pub v: GluedField,
    pub lv: Source,
}

impl State {
    pub fn axpy(&mut self, a: f64, other: &State) {
        for (x, y) in self.s.iter_mut().zip(&other.s) {
            *x += a * y;
        }
        for (x, y) in self.alpha.iter_mut().zip(&other.alpha) {
            for c in 0..3 {
                x[c] += a * y[c];
            }
        }
        self.v.axpy(a, &other.v);
        self.lv.axpy(a, &other.lv);
    }

    fn has_parameters(&self) -> bool {
        self.s.iter().any(|v| *v != 0.0) || self.alpha.iter().flatten().any(|v| *v != 0.0)
    }
}

/// `rho^nu ||v||_nu + eps |S| + rho eps |alpha|` and its parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StateNorm {
    pub v: f64,
    pub s: f64,
    pub alpha: f64,
    pub total: f64,
}

/// Galerkin residual of the nonlinear equation.
#[derive(Debug, Clone)]
pub struct Residual {
    pub source: Source,
    pub norm: f64,
    /// Largest sample of the nonlinear terms and of `zeta` outside the retained modes.
    pub tail: f64,
    /// Smallest sampled value of `u`.
    pub min_u: f64,
}

/// Output of [`NonlinearProblem::solve_linearized`].
#[derive(Debug, Clone)]
pub struct LinearSolve {
    pub state: State,
    pub iterations: usize,
    /// Per-iteration residual reduction factors.
    pub factors: Vec<f64>,
    pub relative_residual: f64,
}

/// One step of the chord iteration.
#[derive(Debug, Clone, Serialize)]
pub struct IterationRecord {
    pub step: usize,
    /// Weighted residual after the step.
    pub residual: f64,
    pub step_norm: f64,
    pub norm: f64,
    /// `|x_{k+1} - x_k| / |x_k - x_{k-1}|`.
    pub contraction: Option<f64>,
    pub inner_iterations: usize,
    pub inner_factor: f64,
}

/// Converged (or stopped) chord iteration.
#[derive(Debug, Clone)]
pub struct NonlinearSolution {
    pub state: State,
    pub records: Vec<IterationRecord>,
    pub zeta_norm: f64,
    pub residual: f64,
    pub reduction: f64,
    pub min_u: f64,
    pub galerkin_tail: f64,
    /// `C0` with the ball radius `C0 eps rho^2`.
    pub c0: f64,
    pub radius: f64,
    pub converged: bool,
}

/// Serializable summary of a [`NonlinearSolution`].
#[derive(Debug, Clone, Serialize)]
pub struct SolutionSummary {
    pub r: Vec<f64>,
    pub a: Vec<Vec<f64>>,
    pub s: Vec<f64>,
    pub alpha: Vec<[f64; 3]>,
    pub zeta_norm: f64,
    pub residual: f64,
    pub reduction: f64,
    pub min_u: f64,
    pub galerkin_tail: f64,
    pub c0: f64,
    pub radius: f64,
    pub norm: StateNorm,
    pub converged: bool,
    pub records: Vec<IterationRecord>,
}

/// Relative defects of a symmetric solution.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SymmetryReport {
    pub s: f64,
    pub alpha: f64,
    pub field: f64,
}

/// Smallest singular value of the high-mode matching system for the linearization
/// at `u`, per weight `mu'`, on two grids.
#[derive(Debug, Clone, Serialize)]
pub struct NondegeneracyReport {
    pub mu_prime: Vec<f64>,
    pub sigma: Vec<f64>,
    pub sigma_refined: Vec<f64>,
    pub max_relative_change: f64,
    pub positive_and_stable: bool,
}

/// Field `D = Psi - J` and `L D` of one parameter direction, stored sparsely.
#[derive(Debug, Clone, Default)]
struct Deficiency {
    /// `(ball, mode, w, w_tt, F)`.
    columns: Vec<(usize, usize, Vec<f64>, Vec<f64>, Vec<f64>)>,
    /// `(ball, w, w_tt, F)`.
    blocks: Vec<(usize, DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)>,
    /// `(shell, field, F)`.
    shells: Vec<(usize, ModalBlock, DMatrix<f64>)>,
    /// `(center, mode, value)`.
    multipoles: Vec<(usize, usize, f64)>,
}

impl Deficiency {
    fn add_to(&self, a: f64, v: &mut GluedField, f: &mut Source) {
        if a == 0.0 {
            return;
        }
        for (i, j, w, wtt, fc) in &self.columns {
            for k in 0..w.len() {
                v.balls[*i][(k, *j)] += a * w[k];
                v.balls_tt[*i][(k, *j)] += a * wtt[k];
                f.balls[*i][(k, *j)] += a * fc[k];
            }
        }
        for (i, w, wtt, fc) in &self.blocks {
            v.balls[*i] += w * a;
            v.balls_tt[*i] += wtt * a;
            f.balls[*i] += fc * a;
        }
        for (i, blk, fc) in &self.shells {
            v.shells[*i].u += &blk.u * a;
            v.shells[*i].ur += &blk.ur * a;
            f.shells[*i] += fc * a;
        }
        for (i, j, c) in &self.multipoles {
            v.multipoles[(*i, *j)] += a * c;
        }
    }
}

fn row_scale(m: &DMatrix<f64>, s: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |k, j| s[k] * m[(k, j)])
}

fn rows_to_matrix(rows: &[Vec<f64>], ncols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), ncols, |k, q| rows[k][q])
}

/// Nonlinear problem around one approximate solution.
#[derive(Debug, Clone)]
pub struct NonlinearProblem {
    pub op: GlueOperator,
    pub zeta: Source,
    pub zeta_norm: f64,
    pub zeta_tail: f64,
    /// `V_{u_bar} - V`: cylindrical in the balls, physical on the shells.
    e_balls: Vec<DMatrix<f64>>,
    e_shells: Vec<DMatrix<f64>>,
    deficiency: Vec<Deficiency>,
    /// Relative parameter step of the derivative of `zeta`.
    pub fd_step: f64,
}

impl NonlinearProblem {
    pub fn new(op: GlueOperator) -> Result<Self> {
        let mut me = Self {
            zeta: op.zero_source(),
            op,
            zeta_norm: 0.0,
            zeta_tail: 0.0,
            e_balls: Vec::new(),
            e_shells: Vec::new(),
            deficiency: Vec::new(),
            fd_step: 1e-3,
        };
        let base = me.sample(&me.op.approx, true)?;
        let params = me.op.approx.orbits[0].params;
        me.e_balls = base
            .balls
            .iter()
            .zip(&me.op.balls)
            .map(|(u, b)| DMatrix::from_fn(u.nrows(), u.ncols(), |k, q| params.potential(u[(k, q)]) - b.grid.potential[k]))
            .collect();
        me.e_shells = base
            .shells
            .iter()
            .zip(&me.op.exterior.potential)
            .map(|(u, v)| DMatrix::from_fn(u.nrows(), u.ncols(), |k, q| params.potential(u[(k, q)]) - v[k]))
            .collect();
        me.zeta_norm = me.op.source_norm(&base.zeta);
        me.zeta_tail = base.zeta_tail;
        me.zeta = base.zeta;
        let n = me.op.n_centers();
        me.deficiency = (0..4 * n)
            .into_par_iter()
            .map(|ip| if ip % 4 == 0 { me.radial_deficiency(ip / 4) } else { me.displacement_deficiency(ip / 4, ip % 4) })
            .collect::<Result<Vec<_>>>()?;
        Ok(me)
    }

    fn eps(&self) -> f64 {
        self.op.approx.config.eps
    }

    /// Largest `rho_i`.
    pub fn rho(&self) -> f64 {
        self.op.approx.config.rho_i.iter().cloned().fold(0.0, f64::max)
    }

    pub fn zero_state(&self) -> State {
        let n = self.op.n_centers();
        State { s: vec![0.0; n], alpha: vec![[0.0; 3]; n], v: self.op.zero_field(), lv: self.op.zero_source() }
    }

    /// Approximate solution with parameters `(R + S, a + alpha)`.
    pub fn approx_at(&self, s: &[f64], alpha: &[[f64; 3]]) -> ApproxSolution {
        let cfg = &self.op.approx.config;
        let r = cfg.r.iter().zip(s).map(|(r, s)| r + s).collect();
        let a = cfg.a.iter().zip(alpha).map(|(a, d)| a.iter().zip(d).map(|(x, y)| x + y).collect()).collect();
        self.op.approx.with_parameters(r, a)
    }

    /// Samples `u_bar` (when `full`) and `zeta` of `approx` on the discretization.
    pub fn sample(&self, approx: &ApproxSolution, full: bool) -> Result<Background> {
        let tr = self.op.tr();
        let nq = tr.quad.len();
        let m = self.op.n_modes();
        let k = self.op.kappa();
        let cfg = &approx.config;
        let mut zeta = self.op.zero_source();
        let mut zeta_tail: f64 = 0.0;
        let mut balls = Vec::new();
        for (i, b) in self.op.balls.iter().enumerate() {
            let g = &b.grid;
            let rho = cfg.rho_i[i];
            let xi = &cfg.points[i];
            let n_out = g.radius.iter().take_while(|&&r| r >= rho).count();
            let rows_out = (0..n_out)
                .into_par_iter()
                .map(|kk| {
                    let r = g.radius[kk];
                    let (ak, bk) = (r.powf(k), r.powf(k + 2.0));
                    let mut u = vec![0.0; nq];
                    let mut z = vec![0.0; nq];
                    for (q, th) in tr.quad.nodes.iter().enumerate() {
                        let x: Vec<f64> = (0..3).map(|c| xi[c] + r * th[c]).collect();
                        let pv = approx.point(&x)?;
                        u[q] = ak * pv.ubar;
                        z[q] = bk * pv.zeta;
                    }
                    Ok((u, z))
                })
                .collect::<Result<Vec<_>>>()?;
            let (u_out, z_out): (Vec<_>, Vec<_>) = rows_out.into_iter().unzip();
            let zs = rows_to_matrix(&z_out, nq);
            let zm = &zs * &tr.weighted;
            zeta_tail = zeta_tail.max((&zs - &zm * tr.values.transpose()).amax());
            zeta.balls[i].view_mut((0, 0), (n_out, m)).copy_from(&zm);
            if full {
                let (orbit, rp, a) = (&approx.orbits[i], cfg.r[i], &cfg.a[i]);
                let inner: Vec<Vec<f64>> = (n_out..g.len())
                    .into_par_iter()
                    .map(|kk| tr.quad.nodes.iter().map(|th| cylindrical_piece(orbit, rp, a, g.t[kk], *th)).collect())
                    .collect();
                let mut u = u_out;
                u.extend(inner);
                balls.push(rows_to_matrix(&u, nq));
            }
        }
        let mut shells = Vec::new();
        for i in 0..cfg.len() {
            let xi = &cfg.points[i];
            let rows = self
                .op
                .exterior
                .shell
                .cheb
                .nodes
                .par_iter()
                .map(|&r| {
                    let mut u = vec![0.0; nq];
                    let mut z = vec![0.0; nq];
                    for (q, th) in tr.quad.nodes.iter().enumerate() {
                        let x: Vec<f64> = (0..3).map(|c| xi[c] + r * th[c]).collect();
                        let pv = approx.point(&x)?;
                        u[q] = pv.ubar;
                        z[q] = pv.zeta;
                    }
                    Ok((u, z))
                })
                .collect::<Result<Vec<_>>>()?;
            let (u, z): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
            let zs = rows_to_matrix(&z, nq);
            let zm = &zs * &tr.weighted;
            zeta_tail = zeta_tail.max((&zs - &zm * tr.values.transpose()).amax());
            zeta.shells[i] = zm;
            shells.push(rows_to_matrix(&u, nq));
        }
        Ok(Background { balls, shells, zeta, zeta_tail })
    }

    /// Coefficient `kappa (eps_i/2) R_i^{kappa - 1}` of `|x - x_i|^{2-N}` in `d w_bar / d R_i`.
    fn dwbar_coef(&self, i: usize) -> f64 {
        self.op.kappa() * self.op.approx.wbar_coef(i) / self.op.approx.config.r[i]
    }

    /// Direction `R_i`: `J = chi_i mu~ + (1 - sum_o chi_o) d w_bar / d R_i`.
    fn radial_deficiency(&self, i: usize) -> Result<Deficiency> {
        let approx = &self.op.approx;
        let cfg = &approx.config;
        let dim = cfg.dim as f64;
        let k = self.op.kappa();
        let s4 = (4.0 * PI).sqrt();
        let ch = self.dwbar_coef(i);
        let rp = cfg.r[i];
        let tr = self.op.tr();
        let mut d = Deficiency::default();

        let g = &self.op.balls[i].grid;
        let n = g.len();
        let (mut w, mut wtt, mut fc) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        for kk in 0..n {
            let r = g.radius[kk];
            let [chi, c1, c2] = approx.cutoffs.cutoffs[i].eval(r);
            let [mu, mur] = approx.mu_tilde(i, r);
            let h = ch * r.powf(2.0 - dim);
            let hr = (2.0 - dim) * h / r;
            let lj = (1.0 - chi) * g.potential[kk] / (r * r) * h
                + 2.0 * c1 * (mur - hr)
                + (c2 + (dim - 1.0) * c1 / r) * (mu - h);
            w[kk] = s4 * (1.0 - chi) * (g.vdot[kk] / rp - r.powf(k) * h);
            fc[kk] = -s4 * r.powf(k + 2.0) * lj;
            wtt[kk] = (k * k - g.potential[kk]) * w[kk] + fc[kk];
        }
        d.columns.push((i, 0, w, wtt, fc));

        let xi = &cfg.points[i];
        let h_at = |x: [f64; 3], th: [f64; 3]| -> (f64, f64) {
            let y = [0, 1, 2].map(|c| x[c] - xi[c]);
            let r = (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt();
            let h = ch * r.powf(2.0 - dim);
            let yth = y[0] * th[0] + y[1] * th[1] + y[2] * th[2];
            (h, (2.0 - dim) * h / (r * r) * yth)
        };
        for (o, b) in self.op.balls.iter().enumerate() {
            if o == i {
                continue;
            }
            let g = &b.grid;
            let xo = &cfg.points[o];
            let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..g.len())
                .into_par_iter()
                .map(|kk| {
                    let r = g.radius[kk];
                    let [chi, c1, c2] = approx.cutoffs.cutoffs[o].eval(r);
                    let (ak, bk) = (r.powf(k), r.powf(k + 2.0));
                    let lap = c2 + (dim - 1.0) * c1 / r;
                    tr.quad
                        .nodes
                        .iter()
                        .map(|th| {
                            let (h, hr) = h_at([0, 1, 2].map(|c| xo[c] + r * th[c]), *th);
                            let lj = (1.0 - chi) * g.potential[kk] / (r * r) * h - 2.0 * c1 * hr - lap * h;
                            (-ak * (1.0 - chi) * h, -bk * lj)
                        })
                        .unzip()
                })
                .collect();
            let (ws, fs): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
            let w = rows_to_matrix(&ws, tr.quad.len()) * &tr.weighted;
            let fc = rows_to_matrix(&fs, tr.quad.len()) * &tr.weighted;
            let ms = modes(b.lmax);
            let wtt = DMatrix::from_fn(w.nrows(), w.ncols(), |kk, j| {
                (ModeProblem::new(g, ms[j].l).gamma2() - g.potential[kk]) * w[(kk, j)] + fc[(kk, j)]
            });
            d.blocks.push((o, w, wtt, fc));
        }

        let shell = &self.op.exterior.shell;
        for o in 0..cfg.len() {
            let pot = &self.op.exterior.potential[o];
            let mut blk = ModalBlock::zeros(shell.cheb.nodes.clone(), self.op.n_modes());
            let mut fc = DMatrix::zeros(shell.len(), self.op.n_modes());
            if o == i {
                for (kk, &r) in shell.cheb.nodes.iter().enumerate() {
                    let h = ch * r.powf(2.0 - dim);
                    blk.u[(kk, 0)] = -s4 * h;
                    blk.ur[(kk, 0)] = -s4 * (2.0 - dim) * h / r;
                    fc[(kk, 0)] = -pot[kk] * s4 * h;
                }
            } else {
                let xo = &cfg.points[o];
                let nq = tr.quad.len();
                let mut hv = DMatrix::zeros(shell.len(), nq);
                let mut hr = DMatrix::zeros(shell.len(), nq);
                for (kk, &r) in shell.cheb.nodes.iter().enumerate() {
                    for (q, th) in tr.quad.nodes.iter().enumerate() {
                        let (h, dh) = h_at([0, 1, 2].map(|c| xo[c] + r * th[c]), *th);
                        hv[(kk, q)] = -h;
                        hr[(kk, q)] = -dh;
                    }
                }
                blk.u = &hv * &tr.weighted;
                blk.ur = &hr * &tr.weighted;
                fc = row_scale(&blk.u, pot);
            }
            d.shells.push((o, blk, fc));
        }
        d.multipoles.push((i, 0, -s4 * ch));
        Ok(d)
    }

    /// Direction `a_{i,j}`: `J = chi x_j g(r)`, supported in `B(x_i, 2 rho_i)`.
    fn displacement_deficiency(&self, i: usize, j: usize) -> Result<Deficiency> {
        let approx = &self.op.approx;
        let dim = approx.config.dim as f64;
        let k = self.op.kappa();
        let g = &self.op.balls[i].grid;
        let n = g.len();
        let (mut w, mut wtt, mut fc) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        let gamma2 = ModeProblem::new(g, 1).gamma2();
        for kk in 0..n {
            let r = g.radius[kk];
            let [chi, c1, c2] = approx.cutoffs.cutoffs[i].eval(r);
            let z = k * g.v[kk] - g.vdot[kk];
            w[kk] = (1.0 - chi) * r * z / C1;
            if c1 != 0.0 || c2 != 0.0 {
                let [gp, gpr] = approx.gamma_profile(i, r);
                let q = r * gp / C1;
                let qr = (gp + r * gpr) / C1;
                let lj = 2.0 * c1 * qr + (c2 + (dim - 1.0) * c1 / r) * q;
                fc[kk] = -r.powf(k + 2.0) * lj;
            }
            wtt[kk] = (gamma2 - g.potential[kk]) * w[kk] + fc[kk];
        }
        Ok(Deficiency { columns: vec![(i, j, w, wtt, fc)], ..Default::default() })
    }

    /// Trades the deficiency coefficients of a glue solution for parameter increments:
    /// `S_i = K^0 R_i / (eps_i sqrt(4 pi))`, `alpha_ij = K^j C1 / (eps_i R_i)`.
    pub fn lift(&self, sol: &GlobalLinearSolution, f: &Source) -> State {
        let cfg = &self.op.approx.config;
        let n = self.op.n_centers();
        let mut x = State {
            s: vec![0.0; n],
            alpha: vec![[0.0; 3]; n],
            v: self.op.regular_part(sol),
            lv: f.clone(),
        };
        for i in 0..n {
            let k = sol.k(i);
            let (e, r) = (cfg.eps_i[i], cfg.r[i]);
            x.s[i] = k[0] * r / (e * (4.0 * PI).sqrt());
            for j in 0..3 {
                x.alpha[i][j] = k[j + 1] * C1 / (e * r);
            }
            self.deficiency[4 * i].add_to(x.s[i], &mut x.v, &mut x.lv);
            for j in 0..3 {
                self.deficiency[4 * i + j + 1].add_to(x.alpha[i][j], &mut x.v, &mut x.lv);
            }
        }
        x
    }

    /// `L^{-1} f` as parameters and field.
    pub fn inverse_l(&self, f: &Source) -> Result<State> {
        Ok(self.lift(&self.op.glue_solve(f)?, f))
    }

    /// `rho^nu ||v||_{C^1_nu} + eps |S| + rho eps |alpha|`.
    pub fn norm(&self, x: &State) -> Result<StateNorm> {
        let nv = self.op.weighted_field(&x.v).weighted_norm(self.op.tr(), 1, NormRegion::All)?.total;
        let s = x.s.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let alpha = x.alpha.iter().map(|a| (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()).fold(0.0, f64::max);
        let (eps, rho) = (self.eps(), self.rho());
        let v = rho.powf(self.op.nu) * nv;
        Ok(StateNorm { v, s: eps * s, alpha: rho * eps * alpha, total: v + eps * s + rho * eps * alpha })
    }

    /// Mode coefficients of node samples and the largest unrepresented sample.
    fn project(&self, samples: &DMatrix<f64>) -> (DMatrix<f64>, f64) {
        let tr = self.op.tr();
        let modes = samples * &tr.weighted;
        let tail = (samples - &modes * tr.values.transpose()).amax();
        (modes, tail)
    }

    /// `N(x) = zeta_p + L v - V v + c ((u_bar_p + v)^p - u_bar_p^p)` projected on the modes.
    pub fn residual(&self, x: &State) -> Result<Residual> {
        let approx = self.approx_at(&x.s, &x.alpha);
        let bg = self.sample(&approx, true)?;
        let params = approx.orbits[0].params;
        let (c, p) = (params.c_nl(), params.power());
        let k = self.op.kappa();
        let tr = self.op.tr();
        let nl = |u: f64, w: f64| c * u.powf(p) * (p * (w / u).ln_1p()).exp_m1();
        let mut src = bg.zeta.clone();
        src.axpy(1.0, &x.lv);
        let mut tail = bg.zeta_tail;
        let mut min_u = f64::INFINITY;
        for (i, b) in self.op.balls.iter().enumerate() {
            let ws = &x.v.balls[i] * tr.values.transpose();
            let u = &bg.balls[i];
            let mut samples = DMatrix::zeros(u.nrows(), u.ncols());
            for kk in 0..u.nrows() {
                let amp = b.grid.radius[kk].powf(-k);
                for q in 0..u.ncols() {
                    let tot = u[(kk, q)] + ws[(kk, q)];
                    if !(tot > 0.0) {
                        return Err(Error::Positivity(format!("u = {tot:e} in ball {i} at t = {}", b.grid.t[kk])));
                    }
                    min_u = min_u.min(amp * tot);
                    samples[(kk, q)] = nl(u[(kk, q)], ws[(kk, q)]);
                }
            }
            let (modes, t) = self.project(&samples);
            tail = tail.max(t);
            src.balls[i] += modes - row_scale(&x.v.balls[i], &b.grid.potential);
        }
        for (i, u) in bg.shells.iter().enumerate() {
            let ws = &x.v.shells[i].u * tr.values.transpose();
            let mut samples = DMatrix::zeros(u.nrows(), u.ncols());
            for kk in 0..u.nrows() {
                for q in 0..u.ncols() {
                    let tot = u[(kk, q)] + ws[(kk, q)];
                    if !(tot > 0.0) {
                        return Err(Error::Positivity(format!("u = {tot:e} on shell {i}")));
                    }
                    min_u = min_u.min(tot);
                    samples[(kk, q)] = nl(u[(kk, q)], ws[(kk, q)]);
                }
            }
            let (modes, t) = self.project(&samples);
            tail = tail.max(t);
            src.shells[i] += modes - row_scale(&x.v.shells[i].u, &self.op.exterior.potential[i]);
        }
        let norm = self.op.source_norm(&src);
        Ok(Residual { source: src, norm, tail, min_u })
    }

    /// `Lambda x = (d zeta / d p) x_p + L v + (V_{u_bar} - V) v` at the approximate solution.
    pub fn apply_linearization(&self, x: &State) -> Result<Source> {
        let tr = self.op.tr();
        let mut out = x.lv.clone();
        for (i, e) in self.e_balls.iter().enumerate() {
            let ws = &x.v.balls[i] * tr.values.transpose();
            out.balls[i] += ws.component_mul(e) * &tr.weighted;
        }
        for (i, e) in self.e_shells.iter().enumerate() {
            let ws = &x.v.shells[i].u * tr.values.transpose();
            out.shells[i] += ws.component_mul(e) * &tr.weighted;
        }
        if x.has_parameters() {
            let amp = x
                .s
                .iter()
                .map(|v| v.abs())
                .chain(x.alpha.iter().flatten().map(|v| v.abs()))
                .fold(0.0, f64::max);
            let h = self.fd_step / amp;
            let z = |t: f64| -> Result<Source> {
                let s: Vec<f64> = x.s.iter().map(|v| t * v).collect();
                let a: Vec<[f64; 3]> = x.alpha.iter().map(|v| v.map(|c| t * c)).collect();
                Ok(self.sample(&self.approx_at(&s, &a), false)?.zeta)
            };
            let (p1, m1, p2, m2) = (z(h)?, z(-h)?, z(2.0 * h)?, z(-2.0 * h)?);
            let w = 1.0 / (12.0 * h);
            out.axpy(8.0 * w, &p1);
            out.axpy(-8.0 * w, &m1);
            out.axpy(-w, &p2);
            out.axpy(w, &m2);
        }
        Ok(out)
    }

    /// Solves `Lambda x = f` by the iteration `x += L^{-1}(f - Lambda x)`.
    pub fn solve_linearized(&self, f: &Source, tol: f64, max_iter: usize) -> Result<LinearSolve> {
        let fnorm = self.op.source_norm(f);
        let mut x = self.zero_state();
        if fnorm == 0.0 {
            return Ok(LinearSolve { state: x, iterations: 0, factors: Vec::new(), relative_residual: 0.0 });
        }
        let mut r = f.clone();
        let mut prev = fnorm;
        let mut factors = Vec::new();
        for it in 1..=max_iter {
            let dx = self.inverse_l(&r)?;
            let ldx = self.apply_linearization(&dx)?;
            x.axpy(1.0, &dx);
            r.axpy(-1.0, &ldx);
            let rn = self.op.source_norm(&r);
            let factor = rn / prev;
            factors.push(factor);
            if !(factor < 1.0) {
                return Err(Error::NonContractive { factor, context: format!("linearized solve, iteration {it}") });
            }
            prev = rn;
            if rn <= tol * fnorm {
                return Ok(LinearSolve { state: x, iterations: it, factors, relative_residual: rn / fnorm });
            }
        }
        Ok(LinearSolve { state: x, iterations: max_iter, factors, relative_residual: prev / fnorm })
    }

    /// `x - Lambda^{-1} N(x)` with the residual at `x`.
    pub fn picard_step(&self, x: &State, tol_linear: f64, max_inner: usize) -> Result<(State, Residual, LinearSolve)> {
        let res = self.residual(x)?;
        let ls = self.solve_linearized(&res.source.scaled(-1.0), tol_linear, max_inner)?;
        let mut next = x.clone();
        next.axpy(1.0, &ls.state);
        Ok((next, res, ls))
    }

    /// Chord iteration from `x = 0` until the weighted residual has dropped by
    /// `reduction` and the steps stall or fall below `1e-10 eps rho^2`.
    pub fn solve(&self, tol: &Tolerances, reduction: f64) -> Result<NonlinearSolution> {
        let eps_rho2 = self.eps() * self.rho().powi(2);
        let lz = self.inverse_l(&self.zeta)?;
        let c0 = 2.0 * self.norm(&lz)?.total / eps_rho2;
        let radius = c0 * eps_rho2;
        let mut x = self.zero_state();
        let mut res = self.residual(&x)?;
        let r0 = res.norm;
        let mut records = Vec::new();
        let mut prev_step: Option<f64> = None;
        let mut tail: f64 = res.tail;
        let mut converged = false;
        for step in 1..=tol.max_iter {
            let ls = self.solve_linearized(&res.source.scaled(-1.0), tol.linear, 50)?;
            let step_norm = self.norm(&ls.state)?.total;
            x.axpy(1.0, &ls.state);
            let norm = self.norm(&x)?.total;
            if norm > radius {
                return Err(Error::BallExit { norm, radius });
            }
            let prev_res = res.norm;
            res = self.residual(&x)?;
            tail = tail.max(res.tail);
            let contraction = prev_step.map(|p| step_norm / p);
            records.push(IterationRecord {
                step,
                residual: res.norm,
                step_norm,
                norm,
                contraction,
                inner_iterations: ls.iterations,
                inner_factor: ls.factors.iter().cloned().fold(0.0, f64::max),
            });
            if let Some(f) = contraction {
                if !(f < 1.0) && step_norm > 1e-10 * eps_rho2 {
                    return Err(Error::NonContractive { factor: f, context: format!("chord iteration, step {step}") });
                }
            }
            prev_step = Some(step_norm);
            let reduced = res.norm * reduction <= r0;
            if reduced && (step_norm <= 1e-10 * eps_rho2 || res.norm > 0.5 * prev_res) {
                converged = true;
                break;
            }
        }
        Ok(NonlinearSolution {
            state: x,
            records,
            zeta_norm: r0,
            residual: res.norm,
            reduction: r0 / res.norm,
            min_u: res.min_u,
            galerkin_tail: tail,
            c0,
            radius,
            converged,
        })
    }

    /// Parameters and diagnostics of a solution.
    pub fn summary(&self, sol: &NonlinearSolution) -> Result<SolutionSummary> {
        let approx = self.approx_at(&sol.state.s, &sol.state.alpha);
        Ok(SolutionSummary {
            r: approx.config.r.clone(),
            a: approx.config.a.clone(),
            s: sol.state.s.clone(),
            alpha: sol.state.alpha.clone(),
            zeta_norm: sol.zeta_norm,
            residual: sol.residual,
            reduction: sol.reduction,
            min_u: sol.min_u,
            galerkin_tail: sol.galerkin_tail,
            c0: sol.c0,
            radius: sol.radius,
            norm: self.norm(&sol.state)?,
            converged: sol.converged,
            records: sol.records.clone(),
        })
    }

    /// Defects of `x` under a rotation `Q` that maps center `i` to center `perm[i]`:
    /// parameters `(R + S, a + alpha)` relative to their largest entries, and the field.
    pub fn symmetry_defect(&self, x: &State, q: [[f64; 3]; 3], perm: &[usize]) -> SymmetryReport {
        let rot = |v: [f64; 3]| [0, 1, 2].map(|r| (0..3).map(|c| q[r][c] * v[c]).sum::<f64>());
        let approx = self.approx_at(&x.s, &x.alpha);
        let (r, a) = (&approx.config.r, &approx.config.a);
        let a3: Vec<[f64; 3]> = a.iter().map(|v| [v[0], v[1], v[2]]).collect();
        let smax = r.iter().map(|v| v.abs()).fold(1e-300, f64::max);
        let amax = a.iter().flatten().map(|v| v.abs()).fold(1e-300, f64::max);
        let mut ds: f64 = 0.0;
        let mut da: f64 = 0.0;
        for (i, &pi) in perm.iter().enumerate() {
            ds = ds.max((r[pi] - r[i]).abs());
            let ra = rot(a3[i]);
            da = da.max((0..3).map(|c| (a3[pi][c] - ra[c]).abs()).fold(0.0, f64::max));
        }
        let tr = self.op.tr();
        let mut dv: f64 = 0.0;
        let mut vmax: f64 = 1e-300;
        let compare = |a: &DMatrix<f64>, b: &DMatrix<f64>, rows: &mut dyn Iterator<Item = usize>, dv: &mut f64, vmax: &mut f64| {
            for kk in rows {
                let ca: Vec<f64> = a.row(kk).iter().copied().collect();
                let cb: Vec<f64> = b.row(kk).iter().copied().collect();
                for th in &tr.quad.nodes {
                    let va = tr.recompose(&ca, *th);
                    let vb = tr.recompose(&cb, rot(*th));
                    *vmax = vmax.max(va.abs());
                    *dv = dv.max((va - vb).abs());
                }
            }
        };
        for (i, &pi) in perm.iter().enumerate() {
            let n = x.v.balls[i].nrows();
            let stride = (n / 64).max(1);
            compare(&x.v.balls[i], &x.v.balls[pi], &mut (0..n).step_by(stride), &mut dv, &mut vmax);
            let ns = x.v.shells[i].u.nrows();
            compare(&x.v.shells[i].u, &x.v.shells[pi].u, &mut (0..ns), &mut dv, &mut vmax);
        }
        SymmetryReport { s: ds / smax, alpha: da / amax, field: dv / vmax }
    }

    /// `sigma_min` of the high-mode matching system of `L_u` per weight `mu'`, with
    /// columns scaled to unit `C^0_{mu'}` size of the interior solution.
    pub fn schur_sigmas(&self, x: &State, grids: &Grids, mu_primes: &[f64]) -> Result<Vec<f64>> {
        let approx = self.approx_at(&x.s, &x.alpha);
        let cfg = &approx.config;
        let tr = self.op.tr();
        let nq = tr.quad.len();
        let lmax = self.op.balls[0].lmax;
        let ms = modes(lmax);
        let m = ms.len();
        let params = approx.orbits[0].params;
        let k = self.op.kappa();
        let n = cfg.len();
        let avg = |vals: &mut dyn Iterator<Item = f64>| -> f64 {
            vals.zip(&tr.quad.weights).map(|(v, w)| w * params.potential(v)).sum::<f64>() / (4.0 * PI)
        };
        let mut t_diag = vec![vec![0.0; lmax + 1]; n];
        let mut scale = vec![vec![vec![0.0; lmax + 1]; n]; mu_primes.len()];
        for i in 0..n {
            let g = BallGrid::new(approx.orbits[i].clone(), self.op.balls[i].grid.r_param, grids);
            let base = &self.op.balls[i].grid;
            let wb = &x.v.balls[i];
            let pot: Vec<f64> = (0..g.len())
                .into_par_iter()
                .map(|kk| {
                    let (t, r) = (g.t[kk], g.radius[kk]);
                    let s = (t / base.h).min((base.len() - 1) as f64);
                    let k0 = (s.floor() as usize).min(base.len() - 2);
                    let fr = s - k0 as f64;
                    let coef: Vec<f64> = (0..m).map(|j| (1.0 - fr) * wb[(k0, j)] + fr * wb[(k0 + 1, j)]).collect();
                    let ws = tr.synthesize(&coef);
                    let vals: Result<Vec<f64>> = tr
                        .quad
                        .nodes
                        .iter()
                        .enumerate()
                        .map(|(q, th)| {
                            let v = if r < cfg.rho_i[i] {
                                cylindrical_piece(&approx.orbits[i], cfg.r[i], &cfg.a[i], t, *th)
                            } else {
                                let xg: Vec<f64> = (0..3).map(|c| cfg.points[i][c] + r * th[c]).collect();
                                r.powf(k) * approx.point(&xg)?.ubar
                            };
                            Ok(v + ws[q])
                        })
                        .collect();
                    Ok(avg(&mut vals?.into_iter()))
                })
                .collect::<Result<Vec<_>>>()?;
            for l in 2..=lmax {
                let p = ModeProblem { dim: cfg.dim, l, h: g.h, potential: &pot };
                let y = NumerovDirichlet::new(&p).solve(&p, &vec![0.0; pot.len()], 1.0);
                let ydd: Vec<f64> = (0..3).map(|kk| (p.gamma2() - pot[kk]) * y[kk]).collect();
                t_diag[i][l] = neumann_at_boundary(&y[..3], &ydd, g.h, k);
                for (a, &mu) in mu_primes.iter().enumerate() {
                    scale[a][i][l] = weighted_sup(&y, g.h, k, mu);
                }
            }
        }
        let shell = ShellGrid::new(cfg.shell_radius(), grids.n_cheb);
        let mut shell_pot = vec![vec![0.0; shell.len()]; n];
        for i in 0..n {
            for (kk, &r) in shell.cheb.nodes.iter().enumerate() {
                let coef = x.v.shells[i].modes_at(r).unwrap_or_else(|| vec![0.0; m]);
                let ws = tr.synthesize(&coef);
                let mut vals = Vec::with_capacity(nq);
                for (q, th) in tr.quad.nodes.iter().enumerate() {
                    let xg: Vec<f64> = (0..3).map(|c| cfg.points[i][c] + r * th[c]).collect();
                    vals.push(approx.point(&xg)?.ubar + ws[q]);
                }
                shell_pot[i][kk] = shell_cutoff(r, shell.r_out()) * avg(&mut vals.into_iter());
            }
        }
        let ext = Exterior::new(self.op.exterior.centers.clone(), SphereTransform::with_degree(lmax), shell, Some(shell_pot))?;
        let s = ext.dtn(true);
        let high: Vec<usize> = (0..n * m).filter(|c| ms[c % m].l >= 2).collect();
        Ok((0..mu_primes.len())
            .map(|a| {
                let mat = DMatrix::from_fn(n * m, high.len(), |row, col| {
                    let c = high[col];
                    let (i, l) = (c / m, ms[c % m].l);
                    let diag = if row == c { t_diag[i][l] } else { 0.0 };
                    (s[(row, c)] - diag) / scale[a][i][l]
                });
                mat.singular_values().min()
            })
            .collect())
    }

    /// [`Self::schur_sigmas`] on the problem grids and on `refined`.
    pub fn nondegeneracy(&self, x: &State, grids: &Grids, refined: &Grids, mu_primes: &[f64]) -> Result<NondegeneracyReport> {
        let sigma = self.schur_sigmas(x, grids, mu_primes)?;
        let sigma_refined = self.schur_sigmas(x, refined, mu_primes)?;
        let max_relative_change =
            sigma.iter().zip(&sigma_refined).map(|(a, b)| (a - b).abs() / a.abs()).fold(0.0, f64::max);
        let positive_and_stable = sigma.iter().chain(&sigma_refined).all(|s| *s > 0.0) && max_relative_change <= 0.1;
        Ok(NondegeneracyReport {
            mu_prime: mu_primes.to_vec(),
            sigma,
            sigma_refined,
            max_relative_change,
            positive_and_stable,
        })
    }
}

/// Rotation by `angle` about the `z` axis.
pub fn rotation_z(angle: f64) -> [[f64; 3]; 3] {
    let (s, c) = angle.sin_cos();
    [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degree_one_constant() {
        assert!((C1 - (3.0 / (4.0 * PI)).sqrt()).abs() < 1e-15);
    }
}
