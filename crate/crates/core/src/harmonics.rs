//! Real orthonormal spherical harmonics on `S^2`, product angular quadrature,
//! and forward-mode duals for gradients of solid harmonics.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::quad::gauss_legendre;

/// Normalization of the degree-one modes, `phi_j = c1 theta_j`.
pub const C1: f64 = 0.488_602_511_902_919_9;

/// Scalar arithmetic shared by `f64` and [`Dual3`].
pub trait Scalar: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self> {
    fn cst(v: f64) -> Self;
    fn scale(self, v: f64) -> Self;
}

impl Scalar for f64 {
    fn cst(v: f64) -> Self {
        v
    }
    fn scale(self, v: f64) -> Self {
        self * v
    }
}

/// Value with gradient in three variables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual3 {
    pub v: f64,
    pub d: [f64; 3],
}

impl Dual3 {
    pub fn var(v: f64, k: usize) -> Self {
        let mut d = [0.0; 3];
        d[k] = 1.0;
        Self { v, d }
    }
}

impl Add for Dual3 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self { v: self.v + o.v, d: [self.d[0] + o.d[0], self.d[1] + o.d[1], self.d[2] + o.d[2]] }
    }
}

impl Sub for Dual3 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self { v: self.v - o.v, d: [self.d[0] - o.d[0], self.d[1] - o.d[1], self.d[2] - o.d[2]] }
    }
}

impl Mul for Dual3 {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Self {
            v: self.v * o.v,
            d: [
                self.d[0] * o.v + self.v * o.d[0],
                self.d[1] * o.v + self.v * o.d[1],
                self.d[2] * o.v + self.v * o.d[2],
            ],
        }
    }
}

impl Neg for Dual3 {
    type Output = Self;
    fn neg(self) -> Self {
        Self { v: -self.v, d: [-self.d[0], -self.d[1], -self.d[2]] }
    }
}

impl Scalar for Dual3 {
    fn cst(v: f64) -> Self {
        Self { v, d: [0.0; 3] }
    }
    fn scale(self, s: f64) -> Self {
        Self { v: self.v * s, d: [self.d[0] * s, self.d[1] * s, self.d[2] * s] }
    }
}

/// Degree and order of a real harmonic; `m > 0` is cosine type, `m < 0` sine type.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SphericalMode {
    pub index: usize,
    pub l: usize,
    pub m: i64,
}

impl SphericalMode {
    /// Eigenvalue `l(l + N - 2)` of `-Delta_{S^{N-1}}` at `N = 3`.
    pub fn eigenvalue(&self) -> f64 {
        (self.l * (self.l + 1)) as f64
    }
}

/// Number of modes up to degree `lmax`.
pub fn n_modes(lmax: usize) -> usize {
    (lmax + 1) * (lmax + 1)
}

/// Modes ordered by degree; within degree `l` the orders run `1, -1, 2, -2, ..., l, -l, 0`,
/// so that indices 1, 2, 3 are the coordinate functions `x, y, z`.
pub fn modes(lmax: usize) -> Vec<SphericalMode> {
    let mut out = Vec::with_capacity(n_modes(lmax));
    for l in 0..=lmax {
        for mm in 1..=l as i64 {
            out.push(SphericalMode { index: out.len(), l, m: mm });
            out.push(SphericalMode { index: out.len(), l, m: -mm });
        }
        out.push(SphericalMode { index: out.len(), l, m: 0 });
    }
    out
}

fn norm_const(l: usize, m: usize) -> f64 {
    let mut ratio = 1.0;
    for k in (l - m + 1)..=(l + m) {
        ratio /= k as f64;
    }
    let base = ((2 * l + 1) as f64 / (4.0 * PI) * ratio).sqrt();
    if m == 0 {
        base
    } else {
        base * 2f64.sqrt()
    }
}

/// Precomputed normalization constants and index map for degree `<= lmax`.
#[derive(Debug, Clone)]
pub struct HarmonicBasis {
    pub lmax: usize,
    pub modes: Vec<SphericalMode>,
    norms: Vec<Vec<f64>>,
    index: Vec<Vec<[usize; 2]>>,
}

impl HarmonicBasis {
    pub fn new(lmax: usize) -> Self {
        let modes = modes(lmax);
        let norms = (0..=lmax).map(|l| (0..=l).map(|m| norm_const(l, m)).collect()).collect();
        let mut index = vec![vec![[usize::MAX; 2]; lmax + 1]; lmax + 1];
        for md in &modes {
            let slot = if md.m < 0 { 1 } else { 0 };
            index[md.l][md.m.unsigned_abs() as usize][slot] = md.index;
        }
        Self { lmax, modes, norms, index }
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// Solid harmonics `r^l Y_j(x/r)` for every mode, written into `out`.
    pub fn solid<T: Scalar>(&self, x: [T; 3], out: &mut [T]) {
        let lmax = self.lmax;
        let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
        let z = x[2];
        let mut cm = T::cst(1.0);
        let mut sm = T::cst(0.0);
        let mut qmm = 1.0;
        for m in 0..=lmax {
            if m > 0 {
                let c = cm * x[0] - sm * x[1];
                let s = cm * x[1] + sm * x[0];
                cm = c;
                sm = s;
                qmm *= (2 * m - 1) as f64;
            }
            let mut q_prev = T::cst(0.0);
            let mut q = T::cst(qmm);
            for l in m..=lmax {
                if l == m + 1 {
                    q_prev = q;
                    q = z * q.scale((2 * m + 1) as f64);
                } else if l > m + 1 {
                    let next = (z * q.scale((2 * l - 1) as f64) - r2 * q_prev.scale((l + m - 1) as f64))
                        .scale(1.0 / (l - m) as f64);
                    q_prev = q;
                    q = next;
                }
                let nrm = self.norms[l][m];
                let [ic, is] = self.index[l][m];
                if m == 0 {
                    out[ic] = q.scale(nrm);
                } else {
                    out[ic] = (q * cm).scale(nrm);
                    out[is] = (q * sm).scale(nrm);
                }
            }
        }
    }

    /// Values of all modes at a unit vector.
    pub fn eval_all(&self, theta: [f64; 3]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.solid(theta, &mut out);
        out
    }

    /// Value of one mode at a unit vector.
    pub fn eval_mode(&self, j: usize, theta: [f64; 3]) -> f64 {
        self.eval_all(theta)[j]
    }

    /// Solid harmonics with gradients at `x`.
    pub fn solid_grad(&self, x: [f64; 3]) -> Vec<Dual3> {
        let xd = [Dual3::var(x[0], 0), Dual3::var(x[1], 1), Dual3::var(x[2], 2)];
        let mut out = vec![Dual3::cst(0.0); self.len()];
        self.solid(xd, &mut out);
        out
    }
}

/// Gauss-Legendre in `cos(theta)` times uniform longitude.
#[derive(Debug, Clone)]
pub struct AngularQuadrature {
    pub nodes: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub n_theta: usize,
    pub n_phi: usize,
}

impl AngularQuadrature {
    pub fn new(n_theta: usize, n_phi: usize) -> Self {
        let (z, wz) = gauss_legendre(n_theta);
        let mut nodes = Vec::with_capacity(n_theta * n_phi);
        let mut weights = Vec::with_capacity(n_theta * n_phi);
        for (zi, wi) in z.iter().zip(&wz) {
            let s = (1.0 - zi * zi).sqrt();
            for k in 0..n_phi {
                let ph = 2.0 * PI * k as f64 / n_phi as f64;
                nodes.push([s * ph.cos(), s * ph.sin(), *zi]);
                weights.push(wi * 2.0 * PI / n_phi as f64);
            }
        }
        Self { nodes, weights, n_theta, n_phi }
    }

    /// Rule exact for products of harmonics of degree `<= lmax`.
    pub fn for_degree(lmax: usize) -> Self {
        let n_phi = (2 * lmax + 8).div_ceil(3) * 3;
        Self::new(lmax + 4, n_phi.max(6))
    }

    /// Largest degree whose products the rule integrates exactly.
    pub fn exact_degree(&self) -> usize {
        (self.n_theta.saturating_sub(1)).min((self.n_phi.saturating_sub(1)) / 2)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Mode values at quadrature nodes, for analysis and synthesis.
#[derive(Debug, Clone)]
pub struct SphereTransform {
    pub basis: HarmonicBasis,
    pub quad: AngularQuadrature,
    /// `values[(k, j)] = phi_j(node_k)`.
    pub values: nalgebra::DMatrix<f64>,
    /// `weighted[(k, j)] = w_k phi_j(node_k)`.
    pub weighted: nalgebra::DMatrix<f64>,
    /// Cartesian components of the tangential gradient `r grad[phi_j(x/r)]` at the nodes.
    pub tangential: [nalgebra::DMatrix<f64>; 3],
}

impl SphereTransform {
    pub fn new(basis: HarmonicBasis, quad: AngularQuadrature) -> Result<Self> {
        if basis.lmax > quad.exact_degree() {
            return Err(Error::InvalidParameter(format!(
                "degree {} beyond quadrature exactness {}",
                basis.lmax,
                quad.exact_degree()
            )));
        }
        let nq = quad.len();
        let nm = basis.len();
        let mut values = nalgebra::DMatrix::zeros(nq, nm);
        let mut tangential = [0, 1, 2].map(|_| nalgebra::DMatrix::zeros(nq, nm));
        for (k, x) in quad.nodes.iter().enumerate() {
            let g = basis.solid_grad(*x);
            for (j, (gj, md)) in g.iter().zip(&basis.modes).enumerate() {
                values[(k, j)] = gj.v;
                for c in 0..3 {
                    tangential[c][(k, j)] = gj.d[c] - md.l as f64 * gj.v * x[c];
                }
            }
        }
        let mut weighted = values.clone();
        for k in 0..nq {
            for j in 0..nm {
                weighted[(k, j)] *= quad.weights[k];
            }
        }
        Ok(Self { basis, quad, values, weighted, tangential })
    }

    pub fn with_degree(lmax: usize) -> Self {
        Self::new(HarmonicBasis::new(lmax), AngularQuadrature::for_degree(lmax)).expect("rule sized for degree")
    }

    /// Mode coefficients of samples at the quadrature nodes.
    pub fn decompose(&self, samples: &[f64]) -> Vec<f64> {
        let s = nalgebra::DVector::from_column_slice(samples);
        (self.weighted.transpose() * s).iter().copied().collect()
    }

    /// Values at the quadrature nodes of a mode expansion.
    pub fn synthesize(&self, coeffs: &[f64]) -> Vec<f64> {
        let c = nalgebra::DVector::from_column_slice(coeffs);
        (&self.values * c).iter().copied().collect()
    }

    /// Value of a mode expansion at an arbitrary unit vector.
    pub fn recompose(&self, coeffs: &[f64], theta: [f64; 3]) -> f64 {
        self.basis.eval_all(theta).iter().zip(coeffs).map(|(a, b)| a * b).sum()
    }
}
