//! The approximate solution: Delaunay pieces near each singular point glued to
//! the harmonic tail `w_bar` with radial cutoffs, its matching moments and the
//! error term `zeta = Delta u_bar + (N(N-2)/4) u_bar^{(N+2)/(N-2)}`.

use std::sync::Arc;

use crate::balance::Configuration;
use crate::delaunay::{DelaunayFamilyParams, DelaunayOrbit, DelaunayParams};
use crate::error::{Error, Result};
use crate::harmonics::SphereTransform;

/// Degree-7 smoothstep `35x^4 - 84x^5 + 70x^6 - 20x^7` and its first two derivatives.
pub fn smoothstep7(x: f64) -> [f64; 3] {
    if x <= 0.0 {
        return [0.0; 3];
    }
    if x >= 1.0 {
        return [1.0, 0.0, 0.0];
    }
    let x3 = x * x * x;
    let y = 1.0 - x;
    let s = x3 * x * (35.0 - 84.0 * x + 70.0 * x * x - 20.0 * x3);
    let d1 = 140.0 * x3 * y * y * y;
    let d2 = 420.0 * x * x * y * y * (1.0 - 2.0 * x);
    [s, d1, d2]
}

/// Radial cutoff equal to one on `r <= inner` and zero on `r >= 2 inner`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cutoff {
    pub inner: f64,
}

impl Cutoff {
    /// `(chi, d chi/dr, d^2 chi/dr^2)`.
    pub fn eval(&self, r: f64) -> [f64; 3] {
        let [s, d1, d2] = smoothstep7((r - self.inner) / self.inner);
        [1.0 - s, -d1 / self.inner, -d2 / (self.inner * self.inner)]
    }
}

/// Cutoffs `chi_i` around every point with measured derivative constants.
#[derive(Debug, Clone)]
pub struct CutoffFamily {
    pub cutoffs: Vec<Cutoff>,
    /// `sup |chi'| rho`.
    pub c1: f64,
    /// `sup |chi''| rho^2`.
    pub c2: f64,
}

impl CutoffFamily {
    pub fn new(rho: &[f64]) -> Self {
        let mut c1: f64 = 0.0;
        let mut c2: f64 = 0.0;
        for k in 0..=4000 {
            let [_, d1, d2] = smoothstep7(k as f64 / 4000.0);
            c1 = c1.max(d1.abs());
            c2 = c2.max(d2.abs());
        }
        Self { cutoffs: rho.iter().map(|&inner| Cutoff { inner }).collect(), c1, c2 }
    }
}

fn sub(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| a - b).collect()
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Region of a point relative to the gluing annuli.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    /// `|x - x_i| < rho_i`: exact Delaunay piece.
    Inner(usize),
    /// `rho_i <= |x - x_i| <= 2 rho_i`: transition annulus.
    Annulus(usize),
    /// Harmonic tail.
    Outer,
}

/// Pointwise data of the approximate solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointValue {
    pub region: Region,
    pub ubar: f64,
    pub zeta: f64,
}

/// Approximate solution `u_bar(R, a, .)` for a configuration.
#[derive(Debug, Clone)]
pub struct ApproxSolution {
    pub config: Configuration,
    pub orbits: Vec<Arc<DelaunayOrbit>>,
    pub cutoffs: CutoffFamily,
}

impl ApproxSolution {
    /// Builds the orbits (shared between points with equal necksize).
    pub fn new(config: Configuration) -> Result<Self> {
        let mut orbits: Vec<Arc<DelaunayOrbit>> = Vec::with_capacity(config.len());
        for &e in &config.eps_i {
            if let Some(o) = orbits.iter().find(|o| o.params.eps == e) {
                orbits.push(o.clone());
            } else {
                orbits.push(Arc::new(DelaunayOrbit::new(config.dim, e)?));
            }
        }
        let cutoffs = CutoffFamily::new(&config.rho_i);
        Ok(Self { config, orbits, cutoffs })
    }

    /// Same orbits and cutoffs with translated parameters.
    pub fn with_parameters(&self, r: Vec<f64>, a: Vec<Vec<f64>>) -> Self {
        let mut s = self.clone();
        s.config.r = r;
        s.config.a = a;
        s
    }

    fn kappa(&self) -> f64 {
        (self.config.dim as f64 - 2.0) / 2.0
    }

    /// Coefficient `(eps_i/2) R_i^{(N-2)/2}` of `|x - x_i|^{2-N}` in `w_bar`.
    pub fn wbar_coef(&self, i: usize) -> f64 {
        0.5 * self.config.eps_i[i] * self.config.r[i].powf(self.kappa())
    }

    pub fn family(&self, i: usize, with_displacement: bool) -> DelaunayFamilyParams {
        let a = if with_displacement { self.config.a[i].clone() } else { vec![0.0; self.config.dim] };
        DelaunayFamilyParams {
            base: DelaunayParams { dim: self.config.dim, eps: self.config.eps_i[i] },
            r: self.config.r[i],
            a,
        }
    }

    /// `w_bar(x) = sum_i (eps_i/2) R_i^{(N-2)/2} |x - x_i|^{2-N}`.
    pub fn eval_wbar(&self, x: &[f64]) -> Result<f64> {
        Ok(self.wbar_grad(x)?.0)
    }

    /// Value and gradient of `w_bar`.
    pub fn wbar_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let n = self.config.dim as f64;
        let mut val = 0.0;
        let mut grad = vec![0.0; x.len()];
        for (i, p) in self.config.points.iter().enumerate() {
            let y = sub(x, p);
            let r = norm(&y);
            if r == 0.0 {
                return Err(Error::SingularPoint(format!("x = x_{i}")));
            }
            let c = self.wbar_coef(i);
            let g = c * r.powf(2.0 - n);
            val += g;
            for (gk, yk) in grad.iter_mut().zip(&y) {
                *gk += (2.0 - n) * g * yk / (r * r);
            }
        }
        Ok((val, grad))
    }

    /// Nearest point with distance below `2 rho_i`, if any.
    pub fn locate(&self, x: &[f64]) -> (Region, usize, f64) {
        let mut best = (Region::Outer, usize::MAX, f64::INFINITY);
        for (i, p) in self.config.points.iter().enumerate() {
            let r = norm(&sub(x, p));
            let rho = self.config.rho_i[i];
            if r < rho {
                return (Region::Inner(i), i, r);
            }
            if r <= 2.0 * rho && r < best.2 {
                best = (Region::Annulus(i), i, r);
            }
        }
        best
    }

    /// Value of `u_bar` and of the error term at `x`.
    pub fn point(&self, x: &[f64]) -> Result<PointValue> {
        let c = self.config.dim as f64 * (self.config.dim as f64 - 2.0) / 4.0;
        let pw = (self.config.dim as f64 + 2.0) / (self.config.dim as f64 - 2.0);
        let (region, i, r) = self.locate(x);
        match region {
            Region::Inner(i) => {
                let y = sub(x, &self.config.points[i]);
                let u = crate::delaunay::family_eval(&self.family(i, true), &self.orbits[i], &y)?;
                Ok(PointValue { region, ubar: u, zeta: 0.0 })
            }
            Region::Annulus(_) => {
                let y = sub(x, &self.config.points[i]);
                let (u, gu) = crate::delaunay::family_grad(&self.family(i, true), &self.orbits[i], &y)?;
                let (w, gw) = self.wbar_grad(x)?;
                let [chi, d1, d2] = self.cutoffs.cutoffs[i].eval(r);
                let diff = u - w;
                let dr: f64 = gu.iter().zip(&gw).zip(&y).map(|((a, b), yk)| (a - b) * yk / r).sum();
                let ubar = chi * u + (1.0 - chi) * w;
                let lap_chi = d2 + (self.config.dim as f64 - 1.0) / r * d1;
                let zeta = c * (ubar.powf(pw) - chi * u.powf(pw)) + 2.0 * d1 * dr + lap_chi * diff;
                Ok(PointValue { region, ubar, zeta })
            }
            Region::Outer => {
                let w = self.eval_wbar(x)?;
                Ok(PointValue { region, ubar: w, zeta: c * w.powf(pw) })
            }
        }
    }

    /// `u_bar(x) = sum chi_i u_i + (1 - sum chi_i) w_bar`.
    pub fn eval_approx(&self, x: &[f64]) -> Result<f64> {
        Ok(self.point(x)?.ubar)
    }

    /// `zeta(x)`.
    pub fn error_term(&self, x: &[f64]) -> Result<f64> {
        Ok(self.point(x)?.zeta)
    }

    /// Dirichlet and Neumann moments of `u_i - w_bar` on the sphere of radius `rho_i`
    /// about `x_i` against mode `j` (three dimensions).
    pub fn matching_moments(&self, tr: &SphereTransform, i: usize, j: usize) -> Result<(f64, f64)> {
        self.matching_moments_at(tr, i, j, self.config.rho_i[i])
    }

    /// Moments on the sphere of radius `radius`.
    pub fn matching_moments_at(&self, tr: &SphereTransform, i: usize, j: usize, radius: f64) -> Result<(f64, f64)> {
        if self.config.dim != 3 {
            return Err(Error::InvalidParameter("angular quadrature is three-dimensional".into()));
        }
        let fam = self.family(i, true);
        let xi = &self.config.points[i];
        let mut dm = 0.0;
        let mut nm = 0.0;
        for (k, th) in tr.quad.nodes.iter().enumerate() {
            let y: Vec<f64> = th.iter().map(|t| radius * t).collect();
            let x: Vec<f64> = y.iter().zip(xi).map(|(a, b)| a + b).collect();
            let (u, gu) = crate::delaunay::family_grad(&fam, &self.orbits[i], &y)?;
            let (w, gw) = self.wbar_grad(&x)?;
            let dr: f64 = (0..3).map(|c| (gu[c] - gw[c]) * th[c]).sum();
            let wgt = tr.weighted[(k, j)];
            dm += wgt * (u - w);
            nm += wgt * dr;
        }
        Ok((dm, nm))
    }

    /// Derivative of `u_i(R_i, 0, y)` in `R_i`: `r^{-(N-2)/2} vdot(s) / R`, with its
    /// radial derivative.
    pub fn mu_tilde(&self, i: usize, r: f64) -> [f64; 2] {
        let k = self.kappa();
        let rr = self.config.r[i];
        let s = -r.ln() + rr.ln();
        let (_, vd, vdd) = self.orbits[i].eval2(s);
        let amp = r.powf(-k);
        [amp * vd / rr, -amp / r * (k * vd + vdd) / rr]
    }

    /// Radial profile `g(r) = r^{-(N-2)/2} ((N-2)/2 v - vdot)(s)` of the displacement
    /// fields `gamma_j = y_j g(r)`, with `g'(r)`.
    pub fn gamma_profile(&self, i: usize, r: f64) -> [f64; 2] {
        let k = self.kappa();
        let s = -r.ln() + self.config.r[i].ln();
        let (v, vd, vdd) = self.orbits[i].eval2(s);
        let amp = r.powf(-k);
        let z = k * v - vd;
        let zd = k * vd - vdd;
        [amp * z, -amp / r * (k * z + zd)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smoothstep_endpoints() {
        assert_eq!(smoothstep7(0.0), [0.0; 3]);
        assert_eq!(smoothstep7(1.0), [1.0, 0.0, 0.0]);
        let h = 1e-6;
        let x = 0.37;
        let fd = (smoothstep7(x + h)[0] - smoothstep7(x - h)[0]) / (2.0 * h);
        assert!((fd - smoothstep7(x)[1]).abs() < 1e-8);
        let fd2 = (smoothstep7(x + h)[1] - smoothstep7(x - h)[1]) / (2.0 * h);
        assert!((fd2 - smoothstep7(x)[2]).abs() < 1e-7);
    }
}
