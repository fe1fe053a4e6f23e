//! Exterior problem on `R^3` minus the unit balls: exterior multipoles fitted to
//! boundary traces, per-mode Newton potentials of sources on the shells
//! `1 <= |x - x_i| <= r_out`, one Born iteration for the shell potential, the
//! exterior Dirichlet-to-Neumann map and the radial kernel system.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::approx::{smoothstep7, ApproxSolution};
use crate::balance::Configuration;
use crate::error::{Error, Result};
use crate::field::ModalBlock;
use crate::grid::ShellGrid;
use crate::harmonics::SphereTransform;

/// Largest accepted condition number of the trace system.
pub const TRACE_CONDITION_LIMIT: f64 = 1e8;

/// Shell cutoff: one at `r = 1`, zero at `r = r_out`.
pub fn shell_cutoff(r: f64, r_out: f64) -> f64 {
    1.0 - smoothstep7((r - 1.0) / (r_out - 1.0))[0]
}

/// Per-mode Newton potential of a source supported on one shell.
#[derive(Debug, Clone, PartialEq)]
pub struct NewtonPotential {
    /// Values and radial derivatives on the shell nodes, `(node, mode)`.
    pub vals: DMatrix<f64>,
    pub dr: DMatrix<f64>,
    /// Multipole coefficients representing the potential beyond the shell.
    pub tail: Vec<f64>,
}

/// Exterior solution: harmonic multipoles `c[(i, j)] |x - x_i|^{-l-1} Y_j` plus the
/// Newton potentials of the shell sources.
#[derive(Debug, Clone, PartialEq)]
pub struct ExteriorField {
    pub c: DMatrix<f64>,
    pub newton: Vec<Option<NewtonPotential>>,
}

impl ExteriorField {
    /// Multipole coefficients valid beyond every shell.
    pub fn multipoles(&self) -> DMatrix<f64> {
        let mut m = self.c.clone();
        for (i, nw) in self.newton.iter().enumerate() {
            if let Some(nw) = nw {
                for (j, t) in nw.tail.iter().enumerate() {
                    m[(i, j)] += t;
                }
            }
        }
        m
    }
}

/// Precomputed exterior operators for a configuration.
#[derive(Debug, Clone)]
pub struct Exterior {
    pub centers: Vec<[f64; 3]>,
    pub tr: SphereTransform,
    pub shell: ShellGrid,
    degrees: Vec<usize>,
    /// `cross_val[i][k]`: modes at radius `shell.nodes[k]` about `x_i` of every unit
    /// multipole centered elsewhere, `M x (n M)`.
    cross_val: Vec<Vec<DMatrix<f64>>>,
    cross_dr: Vec<Vec<DMatrix<f64>>>,
    trace_lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    /// Condition number of the trace system.
    pub condition: f64,
    /// Radial shell potential `V_i(r_k)` of the exterior operator.
    pub potential: Vec<Vec<f64>>,
}

fn unit_multipoles(tr: &SphereTransform, y: [f64; 3], theta: [f64; 3]) -> (Vec<f64>, Vec<f64>) {
    let g = tr.basis.solid_grad(y);
    let r2 = y[0] * y[0] + y[1] * y[1] + y[2] * y[2];
    let r = r2.sqrt();
    let mut val = Vec::with_capacity(g.len());
    let mut drv = Vec::with_capacity(g.len());
    for (gj, md) in g.iter().zip(&tr.basis.modes) {
        let p = (2 * md.l + 1) as f64;
        let s = r.powf(-p);
        val.push(gj.v * s);
        let mut d = 0.0;
        for k in 0..3 {
            d += (gj.d[k] * s - p * gj.v * s * y[k] / r2) * theta[k];
        }
        drv.push(d);
    }
    (val, drv)
}

impl Exterior {
    /// Builds the operators. `potential` holds the radial shell potential per
    /// center (or `None` for the Laplacian).
    pub fn new(
        centers: Vec<[f64; 3]>,
        tr: SphereTransform,
        shell: ShellGrid,
        potential: Option<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        let n = centers.len();
        let m = tr.basis.len();
        let nk = shell.len();
        for i in 0..n {
            for k in 0..i {
                let d: f64 = (0..3).map(|c| (centers[i][c] - centers[k][c]).powi(2)).sum::<f64>().sqrt();
                if d < 2.0 * shell.r_out() - 1e-12 {
                    return Err(Error::Infeasible(format!("shells around x_{i} and x_{k} overlap (distance {d})")));
                }
            }
        }
        let degrees: Vec<usize> = tr.basis.modes.iter().map(|md| md.l).collect();
        let blocks: Vec<(Vec<DMatrix<f64>>, Vec<DMatrix<f64>>)> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut vals = Vec::with_capacity(nk);
                let mut drs = Vec::with_capacity(nk);
                for &rk in &shell.cheb.nodes {
                    let mut cv = DMatrix::zeros(m, n * m);
                    let mut cd = DMatrix::zeros(m, n * m);
                    for (q, th) in tr.quad.nodes.iter().enumerate() {
                        let x = [0, 1, 2].map(|c| centers[i][c] + rk * th[c]);
                        for (o, xo) in centers.iter().enumerate() {
                            if o == i {
                                continue;
                            }
                            let y = [0, 1, 2].map(|c| x[c] - xo[c]);
                            let (val, drv) = unit_multipoles(&tr, y, *th);
                            for j in 0..m {
                                let w = tr.weighted[(q, j)];
                                for jp in 0..m {
                                    cv[(j, o * m + jp)] += w * val[jp];
                                    cd[(j, o * m + jp)] += w * drv[jp];
                                }
                            }
                        }
                    }
                    vals.push(cv);
                    drs.push(cd);
                }
                (vals, drs)
            })
            .collect();
        let (cross_val, cross_dr): (Vec<_>, Vec<_>) = blocks.into_iter().unzip();
        let mut trace = DMatrix::identity(n * m, n * m);
        for i in 0..n {
            let mut blk = trace.view_mut((i * m, 0), (m, n * m));
            blk += &cross_val[i][0];
        }
        let sv = trace.clone().singular_values();
        let condition = sv.max() / sv.min();
        if !(condition < TRACE_CONDITION_LIMIT) {
            return Err(Error::Conditioning(format!("exterior trace system condition {condition:e}")));
        }
        let potential = potential.unwrap_or_else(|| vec![vec![0.0; nk]; n]);
        Ok(Self { centers, tr, shell, degrees, cross_val, cross_dr, trace_lu: trace.lu(), condition, potential })
    }

    /// Operators for the exterior of the approximate solution's configuration,
    /// with the shell potential `(N(N+2)/4) chi_shell u_0^4` of the radial pieces
    /// when `with_potential` is set.
    pub fn for_approx(sol: &ApproxSolution, tr: SphereTransform, n_cheb: usize, with_potential: bool) -> Result<Self> {
        let cfg = &sol.config;
        let shell = ShellGrid::new(cfg.shell_radius(), n_cheb);
        let potential = with_potential.then(|| shell_potential(sol, &shell));
        Self::new(centers_of(cfg)?, tr, shell, potential)
    }

    pub fn n_centers(&self) -> usize {
        self.centers.len()
    }

    pub fn n_modes(&self) -> usize {
        self.tr.basis.len()
    }

    pub fn has_potential(&self) -> bool {
        self.potential.iter().flatten().any(|&v| v != 0.0)
    }

    /// Newton potential of a source given by its modes on the nodes of shell `i`.
    pub fn newton(&self, g: &DMatrix<f64>) -> NewtonPotential {
        let cheb = &self.shell.cheb;
        let nk = cheb.len();
        let m = self.n_modes();
        let mut vals = DMatrix::zeros(nk, m);
        let mut dr = DMatrix::zeros(nk, m);
        let mut tail = vec![0.0; m];
        for j in 0..m {
            let l = self.degrees[j] as i32;
            let c = -1.0 / (2 * l + 1) as f64;
            let a: Vec<f64> = (0..nk).map(|k| cheb.nodes[k].powi(l + 2) * g[(k, j)]).collect();
            let b: Vec<f64> = (0..nk).map(|k| cheb.nodes[k].powi(1 - l) * g[(k, j)]).collect();
            let i1 = cheb.cumulative(&a);
            let ib = cheb.cumulative(&b);
            let total = ib[nk - 1];
            for k in 0..nk {
                let r = cheb.nodes[k];
                let i2 = total - ib[k];
                vals[(k, j)] = c * (r.powi(-l - 1) * i1[k] + r.powi(l) * i2);
                dr[(k, j)] = c * (-(l + 1) as f64 * r.powi(-l - 2) * i1[k] + l as f64 * r.powi(l - 1) * i2);
            }
            tail[j] = c * i1[nk - 1];
        }
        NewtonPotential { vals, dr, tail }
    }

    fn others(&self, field: &ExteriorField, i: usize) -> DVector<f64> {
        let m = self.n_modes();
        let all = field.multipoles();
        let mut v = DVector::zeros(self.n_centers() * m);
        for o in 0..self.n_centers() {
            if o != i {
                for j in 0..m {
                    v[o * m + j] = all[(o, j)];
                }
            }
        }
        v
    }

    /// Modes of the field and of its radial derivative on shell `i`.
    pub fn shell_modes(&self, field: &ExteriorField, i: usize) -> ModalBlock {
        let m = self.n_modes();
        let nodes = &self.shell.cheb.nodes;
        let mut blk = ModalBlock::zeros(nodes.clone(), m);
        let others = self.others(field, i);
        for (k, &r) in nodes.iter().enumerate() {
            let cv = &self.cross_val[i][k] * &others;
            let cd = &self.cross_dr[i][k] * &others;
            for j in 0..m {
                let l = self.degrees[j] as i32;
                let own = field.c[(i, j)];
                blk.u[(k, j)] = own * r.powi(-l - 1) + cv[j];
                blk.ur[(k, j)] = -(l + 1) as f64 * own * r.powi(-l - 2) + cd[j];
                if let Some(nw) = &field.newton[i] {
                    blk.u[(k, j)] += nw.vals[(k, j)];
                    blk.ur[(k, j)] += nw.dr[(k, j)];
                }
            }
        }
        blk
    }

    /// Traces and radial derivatives on every unit sphere, `(n, M)` each.
    pub fn boundary_data(&self, field: &ExteriorField) -> (DMatrix<f64>, DMatrix<f64>) {
        let n = self.n_centers();
        let m = self.n_modes();
        let mut tr = DMatrix::zeros(n, m);
        let mut dr = DMatrix::zeros(n, m);
        for i in 0..n {
            let others = self.others(field, i);
            let cv = &self.cross_val[i][0] * &others;
            let cd = &self.cross_dr[i][0] * &others;
            for j in 0..m {
                let l = self.degrees[j] as f64;
                tr[(i, j)] = field.c[(i, j)] + cv[j];
                dr[(i, j)] = -(l + 1.0) * field.c[(i, j)] + cd[j];
                if let Some(nw) = &field.newton[i] {
                    tr[(i, j)] += nw.vals[(0, j)];
                    dr[(i, j)] += nw.dr[(0, j)];
                }
            }
        }
        (tr, dr)
    }

    fn fit_traces(&self, psi: &DMatrix<f64>, newton: Vec<Option<NewtonPotential>>) -> ExteriorField {
        let n = self.n_centers();
        let m = self.n_modes();
        let mut field = ExteriorField { c: DMatrix::zeros(n, m), newton };
        let (tr0, _) = self.boundary_data(&field);
        let mut rhs = DVector::zeros(n * m);
        for i in 0..n {
            for j in 0..m {
                rhs[i * m + j] = psi[(i, j)] - tr0[(i, j)];
            }
        }
        let c = self.trace_lu.solve(&rhs).expect("trace system checked at construction");
        for i in 0..n {
            for j in 0..m {
                field.c[(i, j)] = c[i * m + j];
            }
        }
        field
    }

    /// Solves `Delta w + V w = f` outside the unit balls with traces `psi`, the
    /// potential handled by one Born iteration when `born` is set.
    pub fn solve(&self, psi: &DMatrix<f64>, f: Option<&[DMatrix<f64>]>, born: bool) -> ExteriorField {
        let n = self.n_centers();
        let newton0: Vec<Option<NewtonPotential>> = match f {
            Some(src) => src.iter().map(|g| Some(self.newton(g))).collect(),
            None => vec![None; n],
        };
        let first = self.fit_traces(psi, newton0);
        if !born || !self.has_potential() {
            return first;
        }
        let newton1 = (0..n)
            .map(|i| {
                let blk = self.shell_modes(&first, i);
                let mut g = match f {
                    Some(src) => src[i].clone(),
                    None => DMatrix::zeros(self.shell.len(), self.n_modes()),
                };
                for k in 0..self.shell.len() {
                    let v = self.potential[i][k];
                    for j in 0..self.n_modes() {
                        g[(k, j)] -= v * blk.u[(k, j)];
                    }
                }
                Some(self.newton(&g))
            })
            .collect();
        self.fit_traces(psi, newton1)
    }

    /// Exterior Dirichlet-to-Neumann matrix (radial derivative at `r = 1`), indexed
    /// by `(i, j) -> i M + j`, with or without the Born-corrected potential.
    pub fn dtn(&self, with_potential: bool) -> DMatrix<f64> {
        let n = self.n_centers();
        let m = self.n_modes();
        let cols: Vec<DVector<f64>> = (0..n * m)
            .into_par_iter()
            .map(|col| {
                let mut psi = DMatrix::zeros(n, m);
                psi[(col / m, col % m)] = 1.0;
                let field = self.solve(&psi, None, with_potential);
                let (_, dr) = self.boundary_data(&field);
                DVector::from_iterator(n * m, (0..n * m).map(|r| dr[(r / m, r % m)]))
            })
            .collect();
        DMatrix::from_columns(&cols)
    }

    /// Value at a point outside every unit ball.
    pub fn eval(&self, field: &ExteriorField, x: [f64; 3]) -> Result<f64> {
        let ro = self.shell.r_out();
        let mut val = 0.0;
        let mult = field.multipoles();
        for (i, c) in self.centers.iter().enumerate() {
            let y = [0, 1, 2].map(|k| x[k] - c[k]);
            let r = (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt();
            if r < 1.0 - 1e-12 {
                return Err(Error::InvalidParameter(format!("point inside B(x_{i}, 1)")));
            }
            let th = [y[0] / r, y[1] / r, y[2] / r];
            let inside = r <= ro;
            let coef: Vec<f64> = (0..self.n_modes()).map(|j| if inside { field.c[(i, j)] } else { mult[(i, j)] }).collect();
            let (v, _) = unit_multipoles(&self.tr, y, th);
            val += v.iter().zip(&coef).map(|(a, b)| a * b).sum::<f64>();
            if inside {
                if let Some(nw) = &field.newton[i] {
                    let cheb = &self.shell.cheb;
                    let phi = self.tr.basis.eval_all(th);
                    for j in 0..self.n_modes() {
                        let col: Vec<f64> = nw.vals.column(j).iter().copied().collect();
                        val += cheb.eval_coeffs(&cheb.coeffs(&col), r) * phi[j];
                    }
                }
            }
        }
        Ok(val)
    }
}

/// Centers as 3-vectors.
pub fn centers_of(cfg: &Configuration) -> Result<Vec<[f64; 3]>> {
    if cfg.dim != 3 {
        return Err(Error::InvalidParameter("exterior solver is three-dimensional".into()));
    }
    Ok(cfg.points.iter().map(|p| [p[0], p[1], p[2]]).collect())
}

/// `(N(N+2)/4) chi_shell(r) u_{eps_i}(R_i, 0, r)^4` on the shell nodes.
pub fn shell_potential(sol: &ApproxSolution, shell: &ShellGrid) -> Vec<Vec<f64>> {
    let cfg = &sol.config;
    (0..cfg.len())
        .map(|i| {
            let p = sol.orbits[i].params;
            let k = p.kappa();
            shell
                .cheb
                .nodes
                .iter()
                .map(|&r| {
                    let u = r.powf(-k) * sol.orbits[i].eval(-r.ln() + cfg.r[i].ln()).0;
                    shell_cutoff(r, shell.r_out()) * p.potential(u)
                })
                .collect()
        })
        .collect()
}

/// Matrix `A` with `A_{ii} = 1`, `A_{i0 i} = R_{i0}^{N-2} |x_i - x_{i0}|^{2-N}`:
/// radial elements of `ker(S_0 - T_0)` correspond to `A p = 0`.
pub fn kernel_system_matrix(cfg: &Configuration) -> DMatrix<f64> {
    let n = cfg.len();
    let e = cfg.dim as f64 - 2.0;
    DMatrix::from_fn(n, n, |i0, i| {
        if i == i0 {
            1.0
        } else {
            let d: f64 = cfg.points[i].iter().zip(&cfg.points[i0]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            cfg.r[i0].powf(e) * d.powf(-e)
        }
    })
}

/// `sum_{i < i0} s_{i,i0} (p_i + p_{i0})^2` with
/// `s_{i,j} = (R_i R_j)^{(N-2)/2} q_i q_j |x_i - x_j|^{2-N}`.
pub fn kernel_quadratic_form(cfg: &Configuration, pt: &[f64]) -> f64 {
    let k = (cfg.dim as f64 - 2.0) / 2.0;
    let mut s = 0.0;
    for i0 in 0..cfg.len() {
        for i in 0..i0 {
            let d: f64 = cfg.points[i].iter().zip(&cfg.points[i0]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            let sij = (cfg.r[i] * cfg.r[i0]).powf(k) * cfg.q[i] * cfg.q[i0] * d.powf(-2.0 * k);
            s += sij * (pt[i] + pt[i0]).powi(2);
        }
    }
    s
}

/// Smallest singular value.
pub fn sigma_min(a: &DMatrix<f64>) -> f64 {
    a.clone().singular_values().min()
}
