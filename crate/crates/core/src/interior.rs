//! Dirichlet problems for the model operator `Delta + (N(N+2)/4) u_i^{4/(N-2)}` in
//! each unit ball, solved mode by mode in the cylindrical variable `t = -log r`.
//!
//! Writing `u = r^{-(N-2)/2} sum_j w_j(t) phi_j`, mode `j` of degree `l` obeys
//! `w'' - gamma_j^2 w + P(t) w = F_j` with `gamma_j^2 = (N-2)^2/4 + l(l+N-2)` and
//! `F_j = r^{(N+2)/2} f_j`. Modes `l <= 1` are marched from the deep end with zero
//! data and corrected by the bounded Jacobi field; modes `l >= 2` are two-point
//! problems with a decaying far end. Both use the Numerov scheme.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{grid_derivative, BallGrid};
use crate::harmonics::modes;

/// Lower bound `m eps` on `|Psi(0)|` below which extraction of the deficiency
/// coefficient is rejected as ill-conditioned.
pub const CONDITIONING_FLOOR: f64 = 1e-2;

/// Mode equation on a uniform grid with potential samples `P(t_k)`.
#[derive(Debug, Clone, Copy)]
pub struct ModeProblem<'a> {
    pub dim: usize,
    pub l: usize,
    pub h: f64,
    pub potential: &'a [f64],
}

impl<'a> ModeProblem<'a> {
    pub fn new(grid: &'a BallGrid, l: usize) -> Self {
        Self { dim: grid.dim, l, h: grid.h, potential: &grid.potential }
    }

    pub fn kappa(&self) -> f64 {
        (self.dim as f64 - 2.0) / 2.0
    }

    /// `gamma^2 = (N-2)^2/4 + l(l+N-2)`.
    pub fn gamma2(&self) -> f64 {
        let k = self.kappa();
        k * k + (self.l * (self.l + self.dim - 2)) as f64
    }

    pub fn gamma(&self) -> f64 {
        self.gamma2().sqrt()
    }

    /// `delta = (gamma^2 - N(N+2)/4)^{1/2}` (zero when the radicand is negative).
    pub fn delta(&self) -> f64 {
        let n = self.dim as f64;
        (self.gamma2() - n * (n + 2.0) / 4.0).max(0.0).sqrt()
    }

    /// Number of intervals.
    pub fn nt(&self) -> usize {
        self.potential.len() - 1
    }

    fn q(&self, k: usize) -> f64 {
        self.gamma2() - self.potential[k]
    }

    /// Numerov coefficients `a_k = 1 - h^2 Q_k / 12`, `b_k = 2 (1 + 5 h^2 Q_k / 12)`.
    fn coefficients(&self) -> (Vec<f64>, Vec<f64>) {
        let h2 = self.h * self.h;
        (0..=self.nt())
            .map(|k| {
                let q = self.q(k);
                (1.0 - h2 * q / 12.0, 2.0 * (1.0 + 5.0 * h2 * q / 12.0))
            })
            .unzip()
    }

    fn rhs(&self, f: &[f64], k: usize) -> f64 {
        self.h * self.h / 12.0 * (f[k - 1] + 10.0 * f[k] + f[k + 1])
    }

    /// Second derivative `Q w + F` at the nodes.
    pub fn second_derivative(&self, w: &[f64], f: &[f64]) -> Vec<f64> {
        (0..w.len()).map(|k| self.q(k) * w[k] + f[k]).collect()
    }

    /// Residual `w'' - Q w - F` with `w''` from the standard five-point stencil,
    /// at interior nodes `2..nt-1`.
    pub fn fd_residual(&self, w: &[f64], f: &[f64]) -> Vec<f64> {
        let h2 = self.h * self.h;
        (2..w.len() - 2)
            .map(|k| {
                let d2 = (-w[k + 2] + 16.0 * w[k + 1] - 30.0 * w[k] + 16.0 * w[k - 1] - w[k - 2]) / (12.0 * h2);
                d2 - self.q(k) * w[k] - f[k]
            })
            .collect()
    }
}

/// Tridiagonal Numerov system with Dirichlet data at both ends, factored once.
#[derive(Debug, Clone)]
pub struct NumerovDirichlet {
    a: Vec<f64>,
    cp: Vec<f64>,
    denom: Vec<f64>,
}

impl NumerovDirichlet {
    pub fn new(p: &ModeProblem) -> Self {
        let (a, b) = p.coefficients();
        let n = p.nt();
        let mut cp = vec![0.0; n + 1];
        let mut denom = vec![0.0; n + 1];
        for k in 1..n {
            let lower = if k > 1 { a[k - 1] * cp[k - 1] } else { 0.0 };
            denom[k] = -b[k] - lower;
            cp[k] = a[k + 1] / denom[k];
        }
        Self { a, cp, denom }
    }

    /// Solves with `w(0) = w0`, `w(T) = 0` and cylindrical right-hand side `f`.
    pub fn solve(&self, p: &ModeProblem, f: &[f64], w0: f64) -> Vec<f64> {
        let n = p.nt();
        let mut d = vec![0.0; n + 1];
        for k in 1..n {
            let mut r = p.rhs(f, k);
            if k == 1 {
                r -= self.a[0] * w0;
            }
            let lower = if k > 1 { self.a[k - 1] * d[k - 1] } else { 0.0 };
            d[k] = (r - lower) / self.denom[k];
        }
        let mut w = vec![0.0; n + 1];
        w[0] = w0;
        for k in (1..n).rev() {
            w[k] = d[k] - self.cp[k] * w[k + 1];
        }
        w
    }
}

/// Values and second derivatives of one mode.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSolution {
    pub w: Vec<f64>,
    pub wdd: Vec<f64>,
}

/// Decaying and growing homogeneous solutions of a mode with `l >= 2`.
#[derive(Debug, Clone)]
pub struct HomogeneousPair {
    /// Number of intervals covered (growth of `y_gro` is capped to stay finite).
    pub n: usize,
    /// `y_dec(0) = 1`, decaying.
    pub y_dec: Vec<f64>,
    /// `y_gro(0) = 0`, `y_gro'(0) = 1`.
    pub y_gro: Vec<f64>,
    /// Discrete Wronskian `a_k a_{k+1} (y_dec_k y_gro_{k+1} - y_dec_{k+1} y_gro_k) / h`.
    pub wronskian: Vec<f64>,
    /// `y_dec'(0)`.
    pub slope: f64,
}

/// Homogeneous pair by marching each solution in its stable direction: `y_dec`
/// backward from asymptotic decay data, `y_gro` forward from the origin.
pub fn homogeneous_pair(p: &ModeProblem) -> Result<HomogeneousPair> {
    if p.l < 2 {
        return Err(Error::InvalidParameter(format!(
            "degree {} has explicit Jacobi fields; the pair is for l >= 2",
            p.l
        )));
    }
    let g = p.gamma();
    let n = p.nt().min((600.0 / (g * p.h)).floor() as usize);
    if n < 4 {
        return Err(Error::InvalidParameter("grid too short for the homogeneous pair".into()));
    }
    let (a, b) = p.coefficients();
    let mut y = vec![0.0; n + 1];
    y[n] = 1.0;
    y[n - 1] = (g * p.h).exp();
    for k in (1..n).rev() {
        y[k - 1] = (b[k] * y[k] - a[k + 1] * y[k + 1]) / a[k - 1];
        if y[k - 1].abs() > 1e200 {
            let s = y[k - 1];
            y.iter_mut().for_each(|v| *v /= s);
        }
    }
    let y0 = y[0];
    if !(y0.is_finite() && y0 != 0.0) {
        return Err(Error::RootNotFound(format!(
            "decaying solution of degree {} vanishes at the boundary (y(T) = 1, y(0) = {y0})",
            p.l
        )));
    }
    y.iter_mut().for_each(|v| *v /= y0);
    let mut z = vec![0.0; n + 1];
    let q0 = p.q(0);
    z[1] = p.h + p.h.powi(3) * q0 / 6.0;
    for k in 1..n {
        z[k + 1] = (b[k] * z[k] - a[k - 1] * z[k - 1]) / a[k + 1];
    }
    let wronskian = (0..n).map(|k| a[k] * a[k + 1] * (y[k] * z[k + 1] - y[k + 1] * z[k]) / p.h).collect();
    let yd: Vec<f64> = (0..3).map(|k| p.q(k) * y[k]).collect();
    let slope = grid_derivative(&y[..3], &yd, p.h)[0];
    Ok(HomogeneousPair { n, y_dec: y, y_gro: z, wronskian, slope })
}

/// Solves a mode with `l >= 2`: `w(0) = 0`, `w(T) = 0`.
pub fn solve_mode_high(p: &ModeProblem, f: &[f64]) -> Result<ModeSolution> {
    if p.l < 2 {
        return Err(Error::InvalidParameter(format!("degree {} is not a high mode", p.l)));
    }
    let w = NumerovDirichlet::new(p).solve(p, f, 0.0);
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::Conditioning(format!("tridiagonal solve of degree {} failed", p.l)));
    }
    let wdd = p.second_derivative(&w, f);
    Ok(ModeSolution { w, wdd })
}

/// Particular solution with zero Cauchy data at the deep end, marched toward `t = 0`.
pub fn march_from_deep_end(p: &ModeProblem, f: &[f64]) -> Vec<f64> {
    let n = p.nt();
    let (a, b) = p.coefficients();
    let mut w = vec![0.0; n + 1];
    w[n - 1] = 0.5 * p.h * p.h * f[n];
    for k in (1..n).rev() {
        w[k - 1] = (b[k] * w[k] - a[k + 1] * w[k + 1] + p.rhs(f, k)) / a[k - 1];
    }
    w
}

/// Solution of a mode with `l <= 1` split as `w = G + (K/eps) Psi`: returns the
/// particular part `G` and `K = -eps G(0) / Psi(0)`, so that `w(0) = 0`.
pub fn solve_mode_low(p: &ModeProblem, f: &[f64], psi: &[f64], eps: f64) -> Result<(ModeSolution, f64)> {
    if p.l > 1 {
        return Err(Error::InvalidParameter(format!("degree {} is not a low mode", p.l)));
    }
    if psi[0].abs() < CONDITIONING_FLOOR * eps {
        return Err(Error::Conditioning(format!(
            "|Psi(0)| = {:e} below {:e} for degree {}",
            psi[0].abs(),
            CONDITIONING_FLOOR * eps,
            p.l
        )));
    }
    let w = march_from_deep_end(p, f);
    let k = -eps * w[0] / psi[0];
    let wdd = p.second_derivative(&w, f);
    Ok((ModeSolution { w, wdd }, k))
}

/// Sup of `e^{delta t} |w|` with `delta = (N-2)/2 + mu`.
pub fn weighted_sup(w: &[f64], h: f64, kappa: f64, mu: f64) -> f64 {
    w.iter().enumerate().map(|(k, v)| ((kappa + mu) * k as f64 * h).exp() * v.abs()).fold(0.0, f64::max)
}

/// Neumann derivative `d/dr` at `r = 1` of `r^{-(N-2)/2} w(t)`: `-(N-2)/2 w(0) - w'(0)`.
pub fn neumann_at_boundary(w: &[f64], wdd: &[f64], h: f64, kappa: f64) -> f64 {
    let wp0 = (w[2] - w[0]) / (2.0 * h) - h / 3.0 * (wdd[0] + 2.0 * wdd[1]);
    -kappa * w[0] - wp0
}

/// Per-ball solver with factored high-mode systems and cached homogeneous data.
#[derive(Debug, Clone)]
pub struct BallSolver {
    pub grid: BallGrid,
    pub lmax: usize,
    /// Bounded Jacobi profiles `Psi_l` and derivatives for `l = 0, 1`.
    pub psi: [(Vec<f64>, Vec<f64>); 2],
    systems: Vec<Option<NumerovDirichlet>>,
    /// Decaying solutions with unit trace for `l >= 2` (zero at `T`).
    pub y_dec: Vec<Vec<f64>>,
    /// Interior Dirichlet-to-Neumann eigenvalue of each degree.
    pub dtn: Vec<f64>,
}

impl BallSolver {
    pub fn new(grid: BallGrid, lmax: usize) -> Result<Self> {
        if grid.dim != 3 {
            return Err(Error::InvalidParameter("mode solver is three-dimensional".into()));
        }
        let psi = [grid.jacobi_profile(0), grid.jacobi_profile(1)];
        let k = grid.kappa();
        let mut systems = Vec::with_capacity(lmax + 1);
        let mut y_dec = Vec::with_capacity(lmax + 1);
        let mut dtn = Vec::with_capacity(lmax + 1);
        let zero = vec![0.0; grid.len()];
        for l in 0..=lmax {
            let p = ModeProblem::new(&grid, l);
            if l <= 1 {
                let (ps, dps) = &psi[l];
                if ps[0].abs() < CONDITIONING_FLOOR * grid.eps {
                    return Err(Error::Conditioning(format!("|Psi_{l}(0)| = {:e}", ps[0].abs())));
                }
                dtn.push(-k - dps[0] / ps[0]);
                systems.push(None);
                y_dec.push(Vec::new());
            } else {
                let sys = NumerovDirichlet::new(&p);
                let y = sys.solve(&p, &zero, 1.0);
                let ydd = p.second_derivative(&y, &zero);
                dtn.push(neumann_at_boundary(&y, &ydd, grid.h, k));
                systems.push(Some(sys));
                y_dec.push(y);
            }
        }
        Ok(Self { grid, lmax, psi, systems, y_dec, dtn })
    }

    pub fn n_modes(&self) -> usize {
        (self.lmax + 1) * (self.lmax + 1)
    }

    /// Solves `L w = f` in the ball with zero trace. `f` holds the mode coefficients of
    /// the physical right-hand side at the grid nodes (rows are nodes).
    pub fn solve(&self, f: &DMatrix<f64>, mu: f64) -> Result<InteriorSolution> {
        let kp2 = self.grid.kappa() + 2.0;
        let mut fc = f.clone();
        for (k, t) in self.grid.t.iter().enumerate().take(f.nrows()) {
            let s = (-kp2 * t).exp();
            fc.row_mut(k).iter_mut().for_each(|v| *v *= s);
        }
        self.solve_cyl(&fc, mu)
    }

    /// Same as [`BallSolver::solve`] with the cylindrical source `r^{(N+2)/2} f`.
    pub fn solve_cyl(&self, fc: &DMatrix<f64>, mu: f64) -> Result<InteriorSolution> {
        let g = &self.grid;
        let m = self.n_modes();
        if fc.nrows() != g.len() || fc.ncols() != m {
            return Err(Error::InvalidParameter(format!(
                "source is {}x{}, expected {}x{m}",
                fc.nrows(),
                fc.ncols(),
                g.len()
            )));
        }
        let ms = modes(self.lmax);
        let cols: Vec<Result<(ModeSolution, f64)>> = (0..m)
            .into_par_iter()
            .map(|j| {
                let l = ms[j].l;
                let fj: Vec<f64> = fc.column(j).iter().copied().collect();
                let p = ModeProblem::new(g, l);
                if l <= 1 {
                    solve_mode_low(&p, &fj, &self.psi[l].0, g.eps)
                } else {
                    let sys = self.systems[l].as_ref().expect("factored");
                    let w = sys.solve(&p, &fj, 0.0);
                    let wdd = p.second_derivative(&w, &fj);
                    Ok((ModeSolution { w, wdd }, 0.0))
                }
            })
            .collect();
        let mut w = DMatrix::zeros(g.len(), m);
        let mut wdd = DMatrix::zeros(g.len(), m);
        let mut kcoef = vec![0.0; 4];
        for (j, c) in cols.into_iter().enumerate() {
            let (sol, kj) = c?;
            w.set_column(j, &nalgebra::DVector::from_vec(sol.w));
            wdd.set_column(j, &nalgebra::DVector::from_vec(sol.wdd));
            if j < 4 {
                kcoef[j] = kj;
            }
        }
        Ok(InteriorSolution { w, wdd, k: kcoef, mu })
    }

    /// Full mode profile `G_j + (K_j / eps) Psi_j` of a solution.
    pub fn total_mode(&self, sol: &InteriorSolution, j: usize) -> (Vec<f64>, Vec<f64>) {
        let mut w: Vec<f64> = sol.w.column(j).iter().copied().collect();
        let mut wdd: Vec<f64> = sol.wdd.column(j).iter().copied().collect();
        if j < 4 {
            let l = usize::from(j > 0);
            let c = sol.k[j] / self.grid.eps;
            let p = ModeProblem::new(&self.grid, l);
            let psi = &self.psi[l].0;
            for k in 0..w.len() {
                w[k] += c * psi[k];
                wdd[k] += c * p.q(k) * psi[k];
            }
        }
        (w, wdd)
    }
}

/// Interior solution `w = G(f) + sum_j K^j (1/eps) Psi^{j,+}` in one ball.
#[derive(Debug, Clone)]
pub struct InteriorSolution {
    /// Mode profiles of `G(f)` (rows are nodes).
    pub w: DMatrix<f64>,
    pub wdd: DMatrix<f64>,
    /// Deficiency coefficients `K^0..K^3`.
    pub k: Vec<f64>,
    pub mu: f64,
}

/// Solves the ball problem for per-mode sources (convenience wrapper).
pub fn solve_dirichlet_ball(solver: &BallSolver, f: &DMatrix<f64>, mu: f64) -> Result<InteriorSolution> {
    if !(mu > 1.0 && mu < 2.0) {
        return Err(Error::InvalidParameter(format!("weight {mu} outside (1, 2)")));
    }
    solver.solve(f, mu)
}

/// Interior Dirichlet-to-Neumann eigenvalue of degree `l` at `r = 1`.
pub fn interior_dtn(grid: &BallGrid, l: usize) -> Result<f64> {
    let k = grid.kappa();
    if l <= 1 {
        let (ps, dps) = grid.jacobi_profile(l);
        if ps[0].abs() < CONDITIONING_FLOOR * grid.eps {
            return Err(Error::Conditioning(format!("|Psi_{l}(0)| = {:e}", ps[0].abs())));
        }
        return Ok(-k - dps[0] / ps[0]);
    }
    let p = ModeProblem::new(grid, l);
    let zero = vec![0.0; grid.len()];
    let y = NumerovDirichlet::new(&p).solve(&p, &zero, 1.0);
    let ydd = p.second_derivative(&y, &zero);
    Ok(neumann_at_boundary(&y, &ydd, grid.h, k))
}

/// Limit of the interior Dirichlet-to-Neumann eigenvalue as `eps -> 0`:
/// `(2-N) R^{N-2} / (R^{N-2} - 1)` for `l = 0` and `(2-N)/2 + gamma_l` otherwise.
pub fn interior_dtn_limit(dim: usize, r_param: f64, l: usize) -> f64 {
    let n = dim as f64;
    if l == 0 {
        let rp = r_param.powf(n - 2.0);
        (2.0 - n) * rp / (rp - 1.0)
    } else {
        let k = (n - 2.0) / 2.0;
        -k + (k * k + (l * (l + dim - 2)) as f64).sqrt()
    }
}
