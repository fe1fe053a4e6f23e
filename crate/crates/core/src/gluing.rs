//! Global linear solver for `L = Delta + V` on `R^3 \ Sigma`: per-ball Dirichlet
//! solves, the exterior solve on the shells and beyond, and the interface
//! correction `(S - T) Psi = -J` that restores `C^1` matching on every unit sphere.
//!
//! `V` is `(N(N+2)/4) u_i^4` of the radial Delaunay piece inside each unit ball,
//! the same potential tapered to zero across the shell `1 <= r <= r_out`, and zero
//! beyond the shells.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::approx::ApproxSolution;
use crate::config::{Grids, RunConfig};
use crate::error::{Error, Result};
use crate::exterior::{sigma_min, Exterior, ExteriorField};
use crate::field::{ModalBlock, WeightedField};
use crate::grid::{grid_derivative, BallGrid};
use crate::harmonics::{modes, SphereTransform};
use crate::interior::{neumann_at_boundary, BallSolver, InteriorSolution, ModeProblem};

/// Relative floor on `sigma_min(S - T) / |S - T|` below which the interface system is
/// treated as singular.
pub const INTERFACE_FLOOR: f64 = 1e-8;

/// Right-hand side of `L w = f`: cylindrical sources `r^{(N+2)/2} f` on each ball
/// grid and physical sources on each shell grid, as mode coefficients (rows are
/// radial nodes).
#[derive(Debug, Clone, PartialEq)]
pub struct Source {
    pub balls: Vec<DMatrix<f64>>,
    pub shells: Vec<DMatrix<f64>>,
}

impl Source {
    pub fn axpy(&mut self, a: f64, other: &Source) {
        for (x, y) in self.balls.iter_mut().zip(&other.balls) {
            *x += y * a;
        }
        for (x, y) in self.shells.iter_mut().zip(&other.shells) {
            *x += y * a;
        }
    }

    pub fn scaled(&self, a: f64) -> Source {
        Source {
            balls: self.balls.iter().map(|m| m * a).collect(),
            shells: self.shells.iter().map(|m| m * a).collect(),
        }
    }

    /// Largest coefficient.
    pub fn amax(&self) -> f64 {
        self.balls.iter().chain(&self.shells).map(|m| m.amax()).fold(0.0, f64::max)
    }
}

/// A field on the discretization: cylindrical modes `w = r^{(N-2)/2} u` and `w_tt`
/// in each ball, modal blocks on each shell and multipoles beyond the shells.
#[derive(Debug, Clone, PartialEq)]
pub struct GluedField {
    pub balls: Vec<DMatrix<f64>>,
    pub balls_tt: Vec<DMatrix<f64>>,
    pub shells: Vec<ModalBlock>,
    pub multipoles: DMatrix<f64>,
}

impl GluedField {
    pub fn axpy(&mut self, a: f64, other: &GluedField) {
        for (x, y) in self.balls.iter_mut().zip(&other.balls) {
            *x += y * a;
        }
        for (x, y) in self.balls_tt.iter_mut().zip(&other.balls_tt) {
            *x += y * a;
        }
        for (x, y) in self.shells.iter_mut().zip(&other.shells) {
            x.u += &y.u * a;
            x.ur += &y.ur * a;
        }
        self.multipoles += &other.multipoles * a;
    }

    pub fn scaled(&self, a: f64) -> GluedField {
        let mut z = self.clone();
        z.balls.iter_mut().chain(z.balls_tt.iter_mut()).for_each(|m| *m *= a);
        for s in &mut z.shells {
            s.u *= a;
            s.ur *= a;
        }
        z.multipoles *= a;
        z
    }

    /// Largest coefficient.
    pub fn amax(&self) -> f64 {
        self.balls
            .iter()
            .chain(self.shells.iter().map(|s| &s.u))
            .map(|m| m.amax())
            .fold(self.multipoles.amax(), f64::max)
    }
}

/// Output of [`GlueOperator::glue_solve`].
#[derive(Debug, Clone)]
pub struct GlobalLinearSolution {
    /// Per-ball interior solutions with the interface data absorbed.
    pub interior: Vec<InteriorSolution>,
    pub exterior: ExteriorField,
    /// Interface traces on the unit spheres, `(n, M)`.
    pub psi: DMatrix<f64>,
    pub field: GluedField,
    /// Largest trace mismatch on the unit spheres.
    pub jump_c0: f64,
    /// Largest radial-derivative mismatch on the unit spheres.
    pub jump_c1: f64,
}

impl GlobalLinearSolution {
    /// Deficiency coefficients `K^0..K^3` of ball `i`.
    pub fn k(&self, i: usize) -> [f64; 4] {
        let k = &self.interior[i].k;
        [k[0], k[1], k[2], k[3]]
    }
}

/// Interface diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct InterfaceReport {
    pub sigma_min: f64,
    pub norm: f64,
    pub trace_condition: f64,
    /// Largest entry of `S_eps - S_0`.
    pub potential_correction: f64,
}

/// Precomputed global linear operator for one approximate solution.
#[derive(Debug, Clone)]
pub struct GlueOperator {
    pub approx: ApproxSolution,
    pub balls: Vec<BallSolver>,
    pub exterior: Exterior,
    /// Exterior Dirichlet-to-Neumann matrix with the shell potential.
    pub s: DMatrix<f64>,
    /// Interior Dirichlet-to-Neumann eigenvalues per `(i, mode)`.
    pub t: DVector<f64>,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    pub report: InterfaceReport,
    pub nu: f64,
}

impl GlueOperator {
    /// Builds ball solvers, exterior operators and the interface system.
    pub fn new(approx: &ApproxSolution, lmax: usize, grids: &Grids, nu: f64) -> Result<Self> {
        let cfg = &approx.config;
        if cfg.len() < 3 {
            return Err(Error::Infeasible(format!(
                "{} points: the linear gluing needs n >= 3 (for n = 2 the radial kernel system is singular)",
                cfg.len()
            )));
        }
        let balls = (0..cfg.len())
            .into_par_iter()
            .map(|i| BallSolver::new(BallGrid::new(approx.orbits[i].clone(), cfg.r[i], grids), lmax))
            .collect::<Result<Vec<_>>>()?;
        let exterior = Exterior::for_approx(approx, SphereTransform::with_degree(lmax), grids.n_cheb, true)?;
        let s = exterior.dtn(true);
        let s0 = exterior.dtn(false);
        let m = exterior.n_modes();
        let ms = modes(lmax);
        let t = DVector::from_iterator(cfg.len() * m, (0..cfg.len() * m).map(|r| balls[r / m].dtn[ms[r % m].l]));
        let a = &s - DMatrix::from_diagonal(&t);
        let smin = sigma_min(&a);
        let norm = a.norm();
        if !(smin > INTERFACE_FLOOR * norm) {
            return Err(Error::Conditioning(format!("interface system S - T is singular (sigma_min {smin:e})")));
        }
        let report = InterfaceReport {
            sigma_min: smin,
            norm,
            trace_condition: exterior.condition,
            potential_correction: (&s - &s0).amax(),
        };
        Ok(Self { approx: approx.clone(), balls, exterior, s, t, lu: a.lu(), report, nu })
    }

    /// Operator for a run configuration.
    pub fn from_run_config(rc: &RunConfig) -> Result<Self> {
        let approx = ApproxSolution::new(rc.configuration()?)?;
        Self::new(&approx, rc.lmax, &rc.grids, rc.nu)
    }

    pub fn n_centers(&self) -> usize {
        self.balls.len()
    }

    pub fn n_modes(&self) -> usize {
        self.exterior.n_modes()
    }

    pub fn tr(&self) -> &SphereTransform {
        &self.exterior.tr
    }

    pub fn kappa(&self) -> f64 {
        self.balls[0].grid.kappa()
    }

    pub fn zero_source(&self) -> Source {
        let m = self.n_modes();
        Source {
            balls: self.balls.iter().map(|b| DMatrix::zeros(b.grid.len(), m)).collect(),
            shells: vec![DMatrix::zeros(self.exterior.shell.len(), m); self.n_centers()],
        }
    }

    pub fn zero_field(&self) -> GluedField {
        let m = self.n_modes();
        let nodes = self.exterior.shell.cheb.nodes.clone();
        GluedField {
            balls: self.balls.iter().map(|b| DMatrix::zeros(b.grid.len(), m)).collect(),
            balls_tt: self.balls.iter().map(|b| DMatrix::zeros(b.grid.len(), m)).collect(),
            shells: vec![ModalBlock::zeros(nodes, m); self.n_centers()],
            multipoles: DMatrix::zeros(self.n_centers(), m),
        }
    }

    /// Interior Neumann data `d/dr` at `r = 1` of cylindrical modes.
    fn interior_neumann(&self, i: usize, w: &DMatrix<f64>, wtt: &DMatrix<f64>) -> Vec<f64> {
        let h = self.balls[i].grid.h;
        (0..w.ncols())
            .map(|j| {
                let wj = [w[(0, j)], w[(1, j)], w[(2, j)]];
                let dj = [wtt[(0, j)], wtt[(1, j)], wtt[(2, j)]];
                neumann_at_boundary(&wj, &dj, h, self.kappa())
            })
            .collect()
    }

    /// Total cylindrical modes `G + (K/eps) Psi` of an interior solution.
    fn total_modes(&self, i: usize, sol: &InteriorSolution) -> (DMatrix<f64>, DMatrix<f64>) {
        let b = &self.balls[i];
        let mut w = sol.w.clone();
        let mut wtt = sol.wdd.clone();
        for j in 0..4.min(w.ncols()) {
            let (tw, ttt) = b.total_mode(sol, j);
            w.set_column(j, &DVector::from_vec(tw));
            wtt.set_column(j, &DVector::from_vec(ttt));
        }
        (w, wtt)
    }

    /// Solves `L w = f` with decay at infinity, zero trace of `G` inside every ball and
    /// deficiency coefficients `K` absorbing the low-mode interface data.
    pub fn glue_solve(&self, f: &Source) -> Result<GlobalLinearSolution> {
        let n = self.n_centers();
        let m = self.n_modes();
        let mut interior = (0..n)
            .into_par_iter()
            .map(|i| self.balls[i].solve_cyl(&f.balls[i], self.nu))
            .collect::<Result<Vec<_>>>()?;
        let zero = DMatrix::zeros(n, m);
        let ext0 = self.exterior.solve(&zero, Some(&f.shells), true);
        let (_, ext_dr) = self.exterior.boundary_data(&ext0);
        let mut rhs = DVector::zeros(n * m);
        for i in 0..n {
            let (w, wtt) = self.total_modes(i, &interior[i]);
            let int_dr = self.interior_neumann(i, &w, &wtt);
            for j in 0..m {
                rhs[i * m + j] = int_dr[j] - ext_dr[(i, j)];
            }
        }
        let x = self.lu.solve(&rhs).ok_or_else(|| Error::Conditioning("interface solve failed".into()))?;
        let psi = DMatrix::from_fn(n, m, |i, j| x[i * m + j]);
        let ms = modes(self.balls[0].lmax);
        for (i, sol) in interior.iter_mut().enumerate() {
            let b = &self.balls[i];
            let eps = b.grid.eps;
            for j in 0..m {
                let p = psi[(i, j)];
                if p == 0.0 {
                    continue;
                }
                let l = ms[j].l;
                if l <= 1 {
                    sol.k[j] += eps * p / b.psi[l].0[0];
                } else {
                    let prob = ModeProblem::new(&b.grid, l);
                    let y = &b.y_dec[l];
                    for k in 0..y.len() {
                        sol.w[(k, j)] += p * y[k];
                        sol.wdd[(k, j)] += p * (prob.gamma2() - b.grid.potential[k]) * y[k];
                    }
                }
            }
        }
        let exterior = self.exterior.solve(&psi, Some(&f.shells), true);
        let (ext_tr, ext_dr) = self.exterior.boundary_data(&exterior);
        let mut field = self.zero_field();
        let mut jump_c0: f64 = 0.0;
        let mut jump_c1: f64 = 0.0;
        for i in 0..n {
            let (w, wtt) = self.total_modes(i, &interior[i]);
            let int_dr = self.interior_neumann(i, &w, &wtt);
            for j in 0..m {
                jump_c0 = jump_c0.max((ext_tr[(i, j)] - w[(0, j)]).abs());
                jump_c1 = jump_c1.max((ext_dr[(i, j)] - int_dr[j]).abs());
            }
            field.balls[i] = w;
            field.balls_tt[i] = wtt;
            field.shells[i] = self.exterior.shell_modes(&exterior, i);
        }
        field.multipoles = exterior.multipoles();
        Ok(GlobalLinearSolution { interior, exterior, psi, field, jump_c0, jump_c1 })
    }

    /// The solution without its deficiency components `(K^j / eps) Psi_j` in the balls.
    pub fn regular_part(&self, sol: &GlobalLinearSolution) -> GluedField {
        let mut f = sol.field.clone();
        for (i, int) in sol.interior.iter().enumerate() {
            f.balls[i] = int.w.clone();
            f.balls_tt[i] = int.wdd.clone();
        }
        f
    }

    /// Physical field `u = r^{-(N-2)/2} w` with radial derivatives, for the weighted norms.
    pub fn weighted_field(&self, f: &GluedField) -> WeightedField {
        let k = self.kappa();
        let balls = self
            .balls
            .iter()
            .zip(f.balls.iter().zip(&f.balls_tt))
            .map(|(b, (w, wtt))| {
                let g = &b.grid;
                let mut blk = ModalBlock::zeros(g.radius.clone(), w.ncols());
                for j in 0..w.ncols() {
                    let wj: Vec<f64> = w.column(j).iter().copied().collect();
                    let dj: Vec<f64> = wtt.column(j).iter().copied().collect();
                    let wt = grid_derivative(&wj, &dj, g.h);
                    for (kk, &r) in g.radius.iter().enumerate() {
                        let amp = r.powf(-k);
                        blk.u[(kk, j)] = amp * wj[kk];
                        blk.ur[(kk, j)] = -amp / r * (k * wj[kk] + wt[kk]);
                    }
                }
                blk
            })
            .collect();
        WeightedField {
            centers: self.exterior.centers.clone(),
            balls,
            shells: f.shells.clone(),
            multipoles: f.multipoles.clone(),
            decay: 1.0,
            nu: self.nu,
            nu_prime: 1.0,
        }
    }

    /// Weighted size of a source: dyadic weight `nu - 2` in the balls (computed in
    /// the cylindrical variable as `sup e^{(kappa + nu) t} |F|`) and plain sup on the
    /// shells, both over the angular nodes.
    pub fn source_norm(&self, f: &Source) -> f64 {
        let tr = self.tr();
        let mut best: f64 = 0.0;
        for (b, fb) in self.balls.iter().zip(&f.balls) {
            let vals = fb * tr.values.transpose();
            let g = &b.grid;
            for k in 0..g.len() {
                let s = vals.row(k).amax();
                best = best.max(((self.kappa() + self.nu) * g.t[k]).exp() * s);
            }
        }
        for fs in &f.shells {
            best = best.max((fs * tr.values.transpose()).amax());
        }
        best
    }
}

/// `sigma_min(S - T)` for any number of points, including `n = 2`.
pub fn interface_sigma_min(approx: &ApproxSolution, lmax: usize, grids: &Grids) -> Result<f64> {
    let cfg = &approx.config;
    let exterior = Exterior::for_approx(approx, SphereTransform::with_degree(lmax), grids.n_cheb, true)?;
    let s = exterior.dtn(true);
    let m = exterior.n_modes();
    let ms = modes(lmax);
    let mut a = s;
    for i in 0..cfg.len() {
        let b = BallSolver::new(BallGrid::new(approx.orbits[i].clone(), cfg.r[i], grids), lmax)?;
        for j in 0..m {
            a[(i * m + j, i * m + j)] -= b.dtn[ms[j].l];
        }
    }
    Ok(sigma_min(&a))
}
