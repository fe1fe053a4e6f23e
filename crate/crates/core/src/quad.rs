//! Quadrature rules: Gauss-Legendre, adaptive Gauss-Kronrod and Chebyshev-Lobatto grids.

use crate::error::{Error, Result};

/// Gauss-Legendre nodes and weights on [-1, 1], nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p1 = z;
                p0 = 1.0;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let hl = 0.5 * (b - a);
    let fc = f(c);
    let mut rk = fc * WGK[7];
    let mut rg = fc * WG[3];
    for j in 0..7 {
        let dx = hl * XGK[j];
        let s = f(c - dx) + f(c + dx);
        rk += WGK[j] * s;
        if j % 2 == 1 {
            rg += WG[j / 2] * s;
        }
    }
    (rk * hl, ((rk - rg) * hl).abs())
}

/// Adaptive Gauss-Kronrod (7-15) integration to absolute-or-relative tolerance.
pub fn integrate_adaptive<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    let mut segs = vec![(a, b, gk15(&f, a, b))];
    let mut previous = f64::NAN;
    for _ in 0..2000 {
        let total: f64 = segs.iter().map(|s| s.2 .0).sum();
        let err: f64 = segs.iter().map(|s| s.2 .1).sum();
        if err <= tol * total.abs().max(1e-300) || err < 1e-300 {
            return Ok(total);
        }
        let (imax, _) = segs
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .2 .1.total_cmp(&y.1 .2 .1))
            .expect("nonempty");
        let (lo, hi, _) = segs.swap_remove(imax);
        let mid = 0.5 * (lo + hi);
        segs.push((lo, mid, gk15(&f, lo, mid)));
        segs.push((mid, hi, gk15(&f, mid, hi)));
        previous = total;
    }
    let last: f64 = segs.iter().map(|s| s.2 .0).sum();
    Err(Error::QuadratureNonConvergence { last, previous })
}

/// Chebyshev-Lobatto grid on [a, b] with spectral interpolation and integration.
#[derive(Debug, Clone)]
pub struct ChebGrid {
    pub a: f64,
    pub b: f64,
    /// Nodes in ascending order.
    pub nodes: Vec<f64>,
}

impl ChebGrid {
    /// Grid with `n + 1` Lobatto nodes.
    pub fn new(a: f64, b: f64, n: usize) -> Self {
        let nodes = (0..=n)
            .map(|k| {
                let x = -(std::f64::consts::PI * k as f64 / n as f64).cos();
                0.5 * (a + b) + 0.5 * (b - a) * x
            })
            .collect();
        Self { a, b, nodes }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn degree(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Chebyshev coefficients of the interpolant through `values` at the nodes.
    pub fn coeffs(&self, values: &[f64]) -> Vec<f64> {
        let n = self.degree();
        let mut c = vec![0.0; n + 1];
        for (j, cj) in c.iter_mut().enumerate() {
            let mut s = 0.0;
            for (k, v) in values.iter().enumerate() {
                let wk = if k == 0 || k == n { 0.5 } else { 1.0 };
                // node k corresponds to x = -cos(pi k / n) = cos(pi (n-k)/n)
                s += wk * v * (std::f64::consts::PI * (j * (n - k)) as f64 / n as f64).cos();
            }
            let scale = if j == 0 || j == n { 1.0 } else { 2.0 };
            *cj = scale * s / n as f64;
        }
        c
    }

    fn to_unit(&self, r: f64) -> f64 {
        (2.0 * r - self.a - self.b) / (self.b - self.a)
    }

    /// Evaluates a Chebyshev series at physical coordinate `r` (Clenshaw).
    pub fn eval_coeffs(&self, c: &[f64], r: f64) -> f64 {
        let x = self.to_unit(r);
        let (mut b1, mut b2) = (0.0, 0.0);
        for &cj in c.iter().skip(1).rev() {
            let b0 = 2.0 * x * b1 - b2 + cj;
            b2 = b1;
            b1 = b0;
        }
        x * b1 - b2 + c[0]
    }

    /// Coefficients of the antiderivative vanishing at `a`.
    pub fn integral_coeffs(&self, c: &[f64]) -> Vec<f64> {
        let n = c.len();
        let half = 0.5 * (self.b - self.a);
        let mut ci = vec![0.0; n + 1];
        let get = |k: usize| if k < n { c[k] } else { 0.0 };
        for k in 1..=n {
            let prev = if k == 1 { 2.0 * get(0) } else { get(k - 1) };
            ci[k] = half * (prev - get(k + 1)) / (2 * k) as f64;
        }
        // fix constant so the antiderivative vanishes at x = -1
        let mut s = 0.0;
        for (k, v) in ci.iter().enumerate().skip(1) {
            s += if k % 2 == 0 { *v } else { -*v };
        }
        ci[0] = -s;
        ci
    }

    /// Cumulative integral from `a` to every node.
    pub fn cumulative(&self, values: &[f64]) -> Vec<f64> {
        let ci = self.integral_coeffs(&self.coeffs(values));
        self.nodes.iter().map(|&r| self.eval_coeffs(&ci, r)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_exact_for_polynomials() {
        let (x, w) = gauss_legendre(9);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(16)).sum();
        assert!((s - 2.0 / 17.0).abs() < 1e-14);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn kronrod_integrates_singular_endpoint() {
        let v = integrate_adaptive(|x: f64| 1.0 / x.sqrt(), 1e-12, 1.0, 1e-12).unwrap();
        assert!((v - 2.0 * (1.0 - 1e-6)).abs() < 1e-8);
        let p = integrate_adaptive(|x: f64| x.powi(20), 0.0, 1.0, 1e-14).unwrap();
        assert!((p - 1.0 / 21.0).abs() < 1e-15);
    }

    #[test]
    fn chebyshev_cumulative_integral() {
        let g = ChebGrid::new(1.0, 2.0, 24);
        let vals: Vec<f64> = g.nodes.iter().map(|r| r.exp()).collect();
        let cum = g.cumulative(&vals);
        for (r, c) in g.nodes.iter().zip(&cum) {
            assert!((c - (r.exp() - 1f64.exp())).abs() < 1e-13);
        }
        let co = g.coeffs(&vals);
        assert!((g.eval_coeffs(&co, 1.37) - 1.37f64.exp()).abs() < 1e-13);
    }
}
