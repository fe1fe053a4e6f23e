//! Discretization grids: the cylindrical grid `t = -log|x - x_i|` inside each unit
//! ball and the Chebyshev radial grid on each exterior shell `1 <= |x - x_i| <= r_out`.

use std::sync::Arc;

use crate::config::Grids;
use crate::delaunay::DelaunayOrbit;
use crate::quad::ChebGrid;

/// Uniform cylindrical grid on `[0, T_loc]` inside `B(x_i, 1)` with the model
/// potential `(N(N+2)/4) v(t + log R)^{4/(N-2)}` sampled at the nodes.
#[derive(Debug, Clone)]
pub struct BallGrid {
    pub dim: usize,
    pub eps: f64,
    /// Delaunay translation parameter `R_i`.
    pub r_param: f64,
    pub h: f64,
    /// Number of intervals; nodes are `0..=nt`.
    pub nt: usize,
    pub t: Vec<f64>,
    pub radius: Vec<f64>,
    pub v: Vec<f64>,
    pub vdot: Vec<f64>,
    pub potential: Vec<f64>,
    pub orbit: Arc<DelaunayOrbit>,
}

impl BallGrid {
    pub fn new(orbit: Arc<DelaunayOrbit>, r_param: f64, grids: &Grids) -> Self {
        let period = orbit.period;
        let h = period / grids.tgrid_per_period as f64;
        let t_loc = grids.periods * period + grids.t_extra;
        let nt = (t_loc / h).ceil() as usize;
        let params = orbit.params;
        let s0 = r_param.ln();
        let t: Vec<f64> = (0..=nt).map(|k| k as f64 * h).collect();
        let (v, vdot): (Vec<f64>, Vec<f64>) = t.iter().map(|&tk| orbit.eval(tk + s0)).unzip();
        let potential = v.iter().map(|&x| params.potential(x)).collect();
        Self {
            dim: params.dim,
            eps: params.eps,
            r_param,
            h,
            nt,
            radius: t.iter().map(|tk| (-tk).exp()).collect(),
            t,
            v,
            vdot,
            potential,
            orbit,
        }
    }

    pub fn kappa(&self) -> f64 {
        (self.dim as f64 - 2.0) / 2.0
    }

    pub fn len(&self) -> usize {
        self.nt + 1
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Largest cylindrical coordinate covered.
    pub fn t_max(&self) -> f64 {
        self.nt as f64 * self.h
    }

    /// Radial factor `Psi(t)` of the bounded Jacobi field of degree `l <= 1` and its
    /// `t` derivative: `vdot(s)` for `l = 0` and `e^{-s}((N-2)/2 v - vdot)(s)` for
    /// `l = 1`, with `s = t + log R`.
    pub fn jacobi_profile(&self, l: usize) -> (Vec<f64>, Vec<f64>) {
        let p = self.orbit.params;
        let k = self.kappa();
        let s0 = self.r_param.ln();
        self.t
            .iter()
            .zip(self.v.iter().zip(&self.vdot))
            .map(|(&t, (&v, &vd))| {
                let vdd = p.rhs(v);
                if l == 0 {
                    (vd, vdd)
                } else {
                    let e = (-(t + s0)).exp();
                    let z = k * v - vd;
                    (e * z, e * (k * vd - vdd - z))
                }
            })
            .unzip()
    }
}

/// Chebyshev radial nodes on the shell `1 <= r <= r_out` around each point.
#[derive(Debug, Clone)]
pub struct ShellGrid {
    pub cheb: ChebGrid,
}

impl ShellGrid {
    pub fn new(r_out: f64, n_cheb: usize) -> Self {
        Self { cheb: ChebGrid::new(1.0, r_out, n_cheb) }
    }

    pub fn r_out(&self) -> f64 {
        self.cheb.b
    }

    pub fn len(&self) -> usize {
        self.cheb.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cheb.is_empty()
    }
}

/// Fourth-order derivative on a uniform grid from values `w` and second
/// derivatives `wdd` (compact central formula, one-sided closures at the ends).
pub fn grid_derivative(w: &[f64], wdd: &[f64], h: f64) -> Vec<f64> {
    let n = w.len();
    assert!(n >= 3, "grid needs at least three nodes");
    let mut d = vec![0.0; n];
    d[0] = (w[2] - w[0]) / (2.0 * h) - h / 3.0 * (wdd[0] + 2.0 * wdd[1]);
    for k in 1..n - 1 {
        d[k] = (w[k + 1] - w[k - 1]) / (2.0 * h) - h / 12.0 * (wdd[k + 1] - wdd[k - 1]);
    }
    d[n - 1] = (w[n - 1] - w[n - 3]) / (2.0 * h) + h / 3.0 * (wdd[n - 1] + 2.0 * wdd[n - 2]);
    d
}
