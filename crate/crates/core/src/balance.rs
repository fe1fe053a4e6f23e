//! Singular configurations and the balancing conditions fixing the Delaunay
//! translation parameters `R_i` and displacements `a_i`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

fn dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

fn check_points(points: &[Vec<f64>], q: &[f64], dim: usize) -> Result<()> {
    if points.len() < 2 {
        return Err(Error::InvalidParameter("need at least two points".into()));
    }
    if dim < 3 {
        return Err(Error::InvalidParameter(format!("dimension {dim} < 3")));
    }
    if q.len() != points.len() || q.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::InvalidParameter("q must be positive, one per point".into()));
    }
    if points.iter().any(|p| p.len() != dim) {
        return Err(Error::InvalidParameter("point dimension mismatch".into()));
    }
    for i in 0..points.len() {
        for j in 0..i {
            if dist(&points[i], &points[j]) == 0.0 {
                return Err(Error::InvalidParameter(format!("points {j} and {i} coincide")));
            }
        }
    }
    Ok(())
}

/// Interaction matrix `q_j |x_i - x_j|^{2-N}` with zero diagonal.
fn interaction(points: &[Vec<f64>], q: &[f64], dim: usize) -> DMatrix<f64> {
    let n = points.len();
    let e = 2.0 - dim as f64;
    DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { q[j] * dist(&points[i], &points[j]).powf(e) })
}

/// Relative residual of the balancing equations
/// `sum_{i != i0} R_i^{(N-2)/2} R_{i0}^{(N-2)/2} q_i |x_{i0} - x_i|^{2-N} = q_{i0}`.
pub fn balancing_residual(points: &[Vec<f64>], q: &[f64], r: &[f64], dim: usize) -> f64 {
    let m = interaction(points, q, dim);
    let k = (dim as f64 - 2.0) / 2.0;
    let x = DVector::from_iterator(r.len(), r.iter().map(|v| v.powf(k)));
    let mx = &m * &x;
    (0..r.len())
        .map(|i| ((x[i] * mx[i] - q[i]) / q[i]).abs())
        .fold(0.0, f64::max)
}

/// Solves the balancing equations for `R` by damped Newton in `log R^{(N-2)/2}`.
pub fn solve_balancing(points: &[Vec<f64>], q: &[f64], dim: usize) -> Result<Vec<f64>> {
    check_points(points, q, dim)?;
    let n = points.len();
    let m = interaction(points, q, dim);
    let k = (dim as f64 - 2.0) / 2.0;
    let s = &m * DVector::from_element(n, 1.0);
    let mut y = DVector::from_fn(n, |i, _| -0.5 * (s[i] / q[i]).ln());
    let resid = |y: &DVector<f64>| {
        let x = y.map(f64::exp);
        let mx = &m * &x;
        DVector::from_fn(n, |i, _| (x[i] * mx[i] - q[i]) / q[i])
    };
    let mut f = resid(&y);
    for _ in 0..100 {
        if f.amax() <= 1e-14 {
            break;
        }
        let x = y.map(f64::exp);
        let mx = &m * &x;
        let jac = DMatrix::from_fn(n, n, |i, j| {
            let d = if i == j { x[i] * mx[i] } else { 0.0 };
            (x[i] * m[(i, j)] * x[j] + d) / q[i]
        });
        let step = jac
            .svd(true, true)
            .solve(&f, 1e-13)
            .map_err(|e| Error::NoBalancingSolution(e.to_string()))?;
        let norm0 = f.norm();
        let mut lambda = 1.0;
        loop {
            let trial = &y - &step * lambda;
            let ft = resid(&trial);
            if ft.norm() < norm0 || lambda < 1e-6 {
                y = trial;
                f = ft;
                break;
            }
            lambda *= 0.5;
        }
    }
    if !(f.amax() <= 1e-12) {
        return Err(Error::NoBalancingSolution(format!(
            "Newton stalled with relative residual {:e}",
            f.amax()
        )));
    }
    Ok(y.iter().map(|v| (v / k).exp()).collect())
}

/// Displacements `a_{i0} = -(1/q_{i0}) R_{i0}^{(N-2)/2}
/// sum_{i != i0} q_i R_i^{(N-2)/2} |x_{i0} - x_i|^{-N} (x_{i0} - x_i)`.
pub fn compute_displacements(points: &[Vec<f64>], q: &[f64], r: &[f64], dim: usize) -> Vec<Vec<f64>> {
    let n = points.len();
    let k = (dim as f64 - 2.0) / 2.0;
    (0..n)
        .map(|i0| {
            let mut a = vec![0.0; dim];
            for i in (0..n).filter(|&i| i != i0) {
                let d = dist(&points[i0], &points[i]);
                let c = q[i] * r[i].powf(k) * d.powf(-(dim as f64));
                for (al, (p0, p)) in a.iter_mut().zip(points[i0].iter().zip(&points[i])) {
                    *al += c * (p0 - p);
                }
            }
            let pre = -r[i0].powf(k) / q[i0];
            a.iter().map(|v| pre * v).collect()
        })
        .collect()
}

/// Singular set with necksizes and balanced Delaunay parameters.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct Configuration {
    pub dim: usize,
    pub points: Vec<Vec<f64>>,
    pub q: Vec<f64>,
    pub eps: f64,
    pub eps_i: Vec<f64>,
    pub rho_i: Vec<f64>,
    pub r: Vec<f64>,
    pub a: Vec<Vec<f64>>,
    /// Accumulated dilation factor.
    pub kappa: f64,
}

impl Configuration {
    /// Balanced configuration without dilation.
    pub fn balanced(dim: usize, points: Vec<Vec<f64>>, q: Vec<f64>, eps: f64) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(Error::InvalidParameter(format!("eps = {eps}")));
        }
        let r = solve_balancing(&points, &q, dim)?;
        let a = compute_displacements(&points, &q, &r, dim);
        let eps_i: Vec<f64> = q.iter().map(|qi| eps * qi).collect();
        let ex = 4.0 / ((dim * dim) as f64 - 4.0);
        let rho_i = eps_i.iter().map(|e| e.powf(ex)).collect();
        Ok(Self { dim, points, q, eps, eps_i, rho_i, r, a, kappa: 1.0 })
    }

    /// Balanced configuration dilated so that unit balls are well separated and
    /// every `R_i >= 2`.
    pub fn balanced_normalized(dim: usize, points: Vec<Vec<f64>>, q: Vec<f64>, eps: f64) -> Result<Self> {
        let c = Self::balanced(dim, points, q, eps)?;
        let rmin = c.r.iter().cloned().fold(f64::INFINITY, f64::min);
        let kappa = (2.0 / rmin).max(4.0 / c.min_distance());
        c.rescale(kappa)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn min_distance(&self) -> f64 {
        let mut d = f64::INFINITY;
        for i in 0..self.len() {
            for j in 0..i {
                d = d.min(dist(&self.points[i], &self.points[j]));
            }
        }
        d
    }

    pub fn residual(&self) -> f64 {
        balancing_residual(&self.points, &self.q, &self.r, self.dim)
    }

    /// Dilation `x_i -> kappa x_i`, `R_i -> kappa R_i`, `a_i -> a_i / kappa`.
    pub fn rescale(&self, kappa: f64) -> Result<Self> {
        if !(kappa > 0.0) {
            return Err(Error::InvalidParameter(format!("kappa = {kappa}")));
        }
        let mut c = self.clone();
        c.points = self.points.iter().map(|p| p.iter().map(|v| v * kappa).collect()).collect();
        c.r = self.r.iter().map(|v| v * kappa).collect();
        c.a = self.a.iter().map(|p| p.iter().map(|v| v / kappa).collect()).collect();
        c.kappa = self.kappa * kappa;
        if c.min_distance() <= 2.0 {
            return Err(Error::Infeasible(format!(
                "unit balls overlap after dilation by {kappa} (min distance {})",
                c.min_distance()
            )));
        }
        if c.r.iter().any(|&v| v <= 1.0) {
            return Err(Error::Infeasible(format!("some R_i <= 1 after dilation by {kappa}")));
        }
        if self.rho_i.iter().any(|&v| v >= 1.0) {
            return Err(Error::Infeasible("inner radius rho_i >= 1".into()));
        }
        Ok(c)
    }

    /// Outer radius of the shells `1 <= |x - x_i| <= r_out` used for exterior sources.
    pub fn shell_radius(&self) -> f64 {
        (0.5 * self.min_distance()).min(2.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_closed_form() {
        let pts = vec![vec![0.0, 0.0, 0.0], vec![3.0, 0.0, 0.0]];
        let r = solve_balancing(&pts, &[1.0, 1.0], 3).unwrap();
        assert!((r[0] - 3.0).abs() < 1e-12 && (r[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn coincident_points_rejected() {
        let pts = vec![vec![0.0; 3], vec![0.0; 3]];
        assert!(solve_balancing(&pts, &[1.0, 1.0], 3).is_err());
    }
}
