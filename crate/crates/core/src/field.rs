//! Weighted function spaces: global fields stored as angular-mode coefficient
//! functions on the ball and shell grids plus exterior multipoles, and the
//! dyadic-annulus weighted norms.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::harmonics::SphereTransform;

/// `sup` over dyadic annuli `[s, 2s]` inside `(0, outer]` of
/// `s^{-mu} (sup|u| + s sup|grad u|)`, from per-node suprema at radii `r`.
pub fn dyadic_norm(r: &[f64], sup_u: &[f64], sup_grad: Option<&[f64]>, mu: f64, outer: f64) -> Result<f64> {
    if r.is_empty() {
        return Err(Error::InvalidParameter("empty region".into()));
    }
    let mut annuli: Vec<(f64, f64)> = Vec::new();
    for (k, &rk) in r.iter().enumerate() {
        if !(rk > 0.0 && rk <= outer * (1.0 + 1e-12)) {
            continue;
        }
        let m = (outer / rk).log2().floor().max(0.0) as usize;
        if annuli.len() <= m {
            annuli.resize(m + 1, (0.0, 0.0));
        }
        annuli[m].0 = annuli[m].0.max(sup_u[k]);
        if let Some(g) = sup_grad {
            annuli[m].1 = annuli[m].1.max(g[k]);
        }
    }
    Ok(annuli
        .iter()
        .enumerate()
        .map(|(m, &(a, g))| {
            let s = outer * 0.5f64.powi(m as i32 + 1);
            s.powf(-mu) * (a + s * g)
        })
        .fold(0.0, f64::max))
}

/// Coefficient functions `u_j(r)` and `du_j/dr` of a field `sum_j u_j(r) phi_j(theta)`
/// on a radial grid around one center.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalBlock {
    pub r: Vec<f64>,
    pub u: DMatrix<f64>,
    pub ur: DMatrix<f64>,
}

impl ModalBlock {
    pub fn zeros(r: Vec<f64>, modes: usize) -> Self {
        let n = r.len();
        Self { r, u: DMatrix::zeros(n, modes), ur: DMatrix::zeros(n, modes) }
    }

    /// Values at every (radial node, angular node): `u * Phi^T`.
    pub fn synthesize(&self, tr: &SphereTransform) -> DMatrix<f64> {
        &self.u * tr.values.transpose()
    }

    /// Per radial node `sup_theta |u|` and `sup_theta |grad u|`.
    pub fn sups(&self, tr: &SphereTransform) -> (Vec<f64>, Vec<f64>) {
        let vals = self.synthesize(tr);
        let radial = &self.ur * tr.values.transpose();
        let tang: Vec<DMatrix<f64>> = tr.tangential.iter().map(|t| &self.u * t.transpose()).collect();
        let nq = tr.quad.len();
        let mut su = vec![0.0; self.r.len()];
        let mut sg = vec![0.0; self.r.len()];
        for k in 0..self.r.len() {
            let inv = 1.0 / self.r[k];
            for q in 0..nq {
                su[k] = f64::max(su[k], vals[(k, q)].abs());
                let t2: f64 = tang.iter().map(|t| t[(k, q)] * t[(k, q)]).sum();
                let g2 = radial[(k, q)] * radial[(k, q)] + t2 * inv * inv;
                sg[k] = f64::max(sg[k], g2.sqrt());
            }
        }
        (su, sg)
    }

    /// Values of the modal coefficients at radius `r` by cubic interpolation
    /// (Hermite with the stored derivatives).
    pub fn modes_at(&self, r: f64) -> Option<Vec<f64>> {
        let n = self.r.len();
        let (lo, hi) = if self.r[0] <= self.r[n - 1] { (self.r[0], self.r[n - 1]) } else { (self.r[n - 1], self.r[0]) };
        if !(r >= lo && r <= hi) {
            return None;
        }
        let k = (0..n - 1)
            .find(|&k| (self.r[k] - r) * (self.r[k + 1] - r) <= 0.0)
            .unwrap_or(n - 2);
        let (r0, r1) = (self.r[k], self.r[k + 1]);
        let h = r1 - r0;
        let s = (r - r0) / h;
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        Some(
            (0..self.u.ncols())
                .map(|j| {
                    h00 * self.u[(k, j)] + h10 * h * self.ur[(k, j)] + h01 * self.u[(k + 1, j)] + h11 * h * self.ur[(k + 1, j)]
                })
                .collect(),
        )
    }
}

/// Region selector for [`WeightedField::weighted_norm`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormRegion {
    Ball(usize),
    Shell(usize),
    Far,
    All,
}

/// Weighted norm split by region.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct NormReport {
    pub balls: Vec<f64>,
    pub shells: Vec<f64>,
    pub far: f64,
    pub total: f64,
}

/// Global field on `R^3 \ Sigma`: modal blocks in the unit balls and on the
/// shells `1 <= |x - x_i| <= r_out`, and multipoles `|x - x_i|^{-l-1} Y_j` that
/// represent the field beyond the shells.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedField {
    pub centers: Vec<[f64; 3]>,
    pub balls: Vec<ModalBlock>,
    pub shells: Vec<ModalBlock>,
    /// `multipoles[(i, j)]`.
    pub multipoles: DMatrix<f64>,
    /// Decay exponent `N - 2` of the far field.
    pub decay: f64,
    /// Weight near the singular points.
    pub nu: f64,
    /// Weight at infinity.
    pub nu_prime: f64,
}

fn multipole_value_grad(tr: &SphereTransform, coef: &[f64], y: [f64; 3]) -> (f64, [f64; 3]) {
    let g = tr.basis.solid_grad(y);
    let r2 = y[0] * y[0] + y[1] * y[1] + y[2] * y[2];
    let r = r2.sqrt();
    let mut val = 0.0;
    let mut grad = [0.0; 3];
    for ((gj, md), c) in g.iter().zip(&tr.basis.modes).zip(coef) {
        let p = (2 * md.l + 1) as f64;
        let s = r.powf(-p);
        val += c * gj.v * s;
        for k in 0..3 {
            grad[k] += c * (gj.d[k] * s - p * gj.v * s * y[k] / r2);
        }
    }
    (val, grad)
}

impl WeightedField {
    /// Value and gradient of the multipole part at `x`.
    pub fn multipole_eval(&self, tr: &SphereTransform, x: [f64; 3]) -> (f64, [f64; 3]) {
        let mut val = 0.0;
        let mut grad = [0.0; 3];
        for (i, c) in self.centers.iter().enumerate() {
            let y = [x[0] - c[0], x[1] - c[1], x[2] - c[2]];
            let coef: Vec<f64> = self.multipoles.row(i).iter().copied().collect();
            let (v, g) = multipole_value_grad(tr, &coef, y);
            val += v;
            for k in 0..3 {
                grad[k] += g[k];
            }
        }
        (val, grad)
    }

    /// Radius beyond which only the multipoles are sampled.
    pub fn far_radius(&self) -> f64 {
        let r_out = self.shells.first().map(|s| s.r.iter().cloned().fold(0.0, f64::max)).unwrap_or(1.0);
        self.centers.iter().map(|c| (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt()).fold(0.0, f64::max) + r_out + 1.0
    }

    /// `sup |x|^{decay} (|u| + |x| |grad u|)` on spheres of radius `2^k R_far`, `k = 0..4`.
    fn far_norm(&self, tr: &SphereTransform, k: usize) -> f64 {
        let r0 = self.far_radius();
        let mut best: f64 = 0.0;
        for m in 0..5 {
            let rad = r0 * 2f64.powi(m);
            for th in &tr.quad.nodes {
                let x = [rad * th[0], rad * th[1], rad * th[2]];
                let (v, g) = self.multipole_eval(tr, x);
                let gn = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
                let grad_term = if k == 1 { rad * gn } else { 0.0 };
                best = best.max(rad.powf(self.decay) * (v.abs() + grad_term));
            }
        }
        best
    }

    /// Weighted norm with `k = 0` (values) or `k = 1` (values and scaled gradients):
    /// dyadic weight `nu` in the balls, plain sup on the shells, `|x|^{N-2}` far away.
    pub fn weighted_norm(&self, tr: &SphereTransform, k: usize, region: NormRegion) -> Result<NormReport> {
        if k > 1 {
            return Err(Error::InvalidParameter(format!("k = {k} not in {{0, 1}}")));
        }
        let want = |r: NormRegion| region == NormRegion::All || region == r;
        let mut balls = vec![0.0; self.balls.len()];
        for (i, b) in self.balls.iter().enumerate() {
            if want(NormRegion::Ball(i)) {
                let (su, sg) = b.sups(tr);
                balls[i] = dyadic_norm(&b.r, &su, (k == 1).then_some(&sg[..]), self.nu, 1.0)?;
            }
        }
        let mut shells = vec![0.0; self.shells.len()];
        for (i, s) in self.shells.iter().enumerate() {
            if want(NormRegion::Shell(i)) {
                let (su, sg) = s.sups(tr);
                let a = su.iter().cloned().fold(0.0, f64::max);
                let g = if k == 1 { sg.iter().cloned().fold(0.0, f64::max) } else { 0.0 };
                shells[i] = a + g;
            }
        }
        let far = if want(NormRegion::Far) && !self.centers.is_empty() { self.far_norm(tr, k) } else { 0.0 };
        let total = balls.iter().chain(&shells).cloned().fold(far, f64::max);
        Ok(NormReport { balls, shells, far, total })
    }

    /// Writes `region,center,mode,t,value` rows (`t = -log r`).
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["region", "center", "mode", "t", "value"])?;
        for (name, blocks) in [("ball", &self.balls), ("shell", &self.shells)] {
            for (i, b) in blocks.iter().enumerate() {
                for j in 0..b.u.ncols() {
                    for (k, r) in b.r.iter().enumerate() {
                        w.write_record([
                            name.to_string(),
                            i.to_string(),
                            j.to_string(),
                            format!("{:.12e}", -r.ln()),
                            format!("{:.15e}", b.u[(k, j)]),
                        ])?;
                    }
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}
