//! Delaunay solutions of the radial conformal scalar curvature equation
//! `v'' - ((N-2)^2/4) v + (N(N-2)/4) v^{(N+2)/(N-2)} = 0`, their period, the
//! translated family `u_eps(R, a, x)` and the Jacobi fields.

use crate::error::{Error, Result};
use crate::ode::rk8_step;
use crate::quad::integrate_adaptive;

/// Cylindrical necksize `((N-2)/N)^{(N-2)/4}`.
pub fn eps_cyl(dim: usize) -> f64 {
    let n = dim as f64;
    ((n - 2.0) / n).powf((n - 2.0) / 4.0)
}

/// Dimension and necksize of a Delaunay solution.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DelaunayParams {
    pub dim: usize,
    pub eps: f64,
}

impl DelaunayParams {
    pub fn new(dim: usize, eps: f64) -> Result<Self> {
        if dim < 3 {
            return Err(Error::InvalidParameter(format!("dimension {dim} < 3")));
        }
        let cyl = eps_cyl(dim);
        if !(eps > 0.0 && eps <= cyl * (1.0 + 1e-15)) {
            return Err(Error::InvalidParameter(format!(
                "necksize {eps} outside (0, {cyl}]"
            )));
        }
        Ok(Self { dim, eps: eps.min(cyl) })
    }

    /// `(N-2)/2`.
    pub fn kappa(&self) -> f64 {
        (self.dim as f64 - 2.0) / 2.0
    }

    /// Exponent `(N+2)/(N-2)` of the nonlinearity.
    pub fn power(&self) -> f64 {
        (self.dim as f64 + 2.0) / (self.dim as f64 - 2.0)
    }

    /// Coefficient `N(N-2)/4` of the nonlinearity.
    pub fn c_nl(&self) -> f64 {
        let n = self.dim as f64;
        n * (n - 2.0) / 4.0
    }

    /// Linearized potential `(N(N+2)/4) v^{4/(N-2)}`.
    pub fn potential(&self, v: f64) -> f64 {
        let n = self.dim as f64;
        n * (n + 2.0) / 4.0 * v.powf(4.0 / (n - 2.0))
    }

    pub fn is_cylindrical(&self) -> bool {
        self.eps >= eps_cyl(self.dim) * (1.0 - 1e-14)
    }

    /// Right-hand side of the first-order system `(v, vdot)`.
    pub fn rhs(&self, v: f64) -> f64 {
        let k = self.kappa();
        k * k * v - self.c_nl() * v.powf(self.power())
    }
}

/// Hamiltonian energy `vdot^2 - ((N-2)^2/4) v^2 + ((N-2)^2/4) v^{2N/(N-2)}`.
pub fn hamiltonian(v: f64, vdot: f64, dim: usize) -> f64 {
    let n = dim as f64;
    let k2 = (n - 2.0) * (n - 2.0) / 4.0;
    vdot * vdot - k2 * v * v + k2 * v.powf(2.0 * n / (n - 2.0))
}

/// Largest value of the orbit through `v(0) = eps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VMax {
    pub value: f64,
    /// Set when `eps = eps_cyl`, where the two roots coincide.
    pub degenerate: bool,
}

/// Larger root in `(eps, 1)` of `v^2 - v^{2N/(N-2)} = eps^2 - eps^{2N/(N-2)}`.
pub fn v_max(params: &DelaunayParams) -> Result<VMax> {
    let cyl = eps_cyl(params.dim);
    if params.is_cylindrical() {
        return Ok(VMax { value: cyl, degenerate: true });
    }
    let p = 2.0 * params.dim as f64 / (params.dim as f64 - 2.0);
    let e = params.eps;
    let c = e * e - e.powf(p);
    let g = |v: f64| v * v - v.powf(p) - c;
    let (mut lo, mut hi) = (cyl, 1.0);
    if g(lo) <= 0.0 {
        return Err(Error::RootNotFound(format!("no root above eps_cyl for eps = {e}")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let value = if g(lo).abs() < g(hi).abs() { lo } else { hi };
    Ok(VMax { value, degenerate: false })
}

/// Period of the linearization about the cylinder, `2 pi / sqrt(N-2)`.
pub fn cylinder_period(dim: usize) -> f64 {
    2.0 * std::f64::consts::PI / (dim as f64 - 2.0).sqrt()
}

/// Period `T_eps` from the substitution integral, with both square-root endpoint
/// singularities removed before adaptive Gauss-Kronrod quadrature.
pub fn period(params: &DelaunayParams) -> Result<f64> {
    if params.is_cylindrical() {
        return Ok(cylinder_period(params.dim));
    }
    let n = params.dim as f64;
    let p = 2.0 * n / (n - 2.0);
    let e = params.eps.powf(4.0 / (n - 2.0));
    let b = v_max(params)?.value / params.eps;
    let m = 0.5 * (1.0 + b);
    let bp = b.powf(p);
    let lower = |s: f64| {
        let s2 = s * s;
        let g = (2.0 * s2 + s2 * s2) - e * (p * s2.ln_1p()).exp_m1();
        if s == 0.0 {
            2.0 / (2.0 - e * p).sqrt()
        } else {
            2.0 * s / g.sqrt()
        }
    };
    let upper = |s: f64| {
        let s2 = s * s;
        let g = -s2 * (2.0 * b - s2) - e * bp * (p * (-s2 / b).ln_1p()).exp_m1();
        if s == 0.0 {
            2.0 / (2.0 * b - e * p * bp / b).sqrt()
        } else {
            2.0 * s / g.sqrt()
        }
    };
    let tol = 1e-14;
    let i1 = integrate_adaptive(lower, 0.0, (m - 1.0).sqrt(), tol)?;
    let i2 = integrate_adaptive(upper, 0.0, (b - m).sqrt(), tol)?;
    Ok(4.0 / (n - 2.0) * (i1 + i2))
}

/// Augmented state: `v, vdot`, the necksize variation `phi = dv/deps` with its
/// derivative, and the deviation `d = v - eps cosh((N-2)t/2)` with its derivative.
pub type OrbitState = [f64; 6];

fn augmented_rhs(params: &DelaunayParams) -> impl Fn(&OrbitState) -> OrbitState + '_ {
    let k2 = params.kappa() * params.kappa();
    let c = params.c_nl();
    let pw = params.power();
    move |y: &OrbitState| {
        let vp = y[0].powf(pw);
        let pot = params.potential(y[0]);
        [
            y[1],
            k2 * y[0] - c * vp,
            y[3],
            (k2 - pot) * y[2],
            y[5],
            k2 * y[4] - c * vp,
        ]
    }
}

/// Integrates `(v, vdot)` from arbitrary initial data with `n` steps of size `h`.
pub fn solve_ivp(dim: usize, v0: f64, vdot0: f64, h: f64, n: usize) -> Vec<[f64; 2]> {
    let nn = dim as f64;
    let k2 = (nn - 2.0) * (nn - 2.0) / 4.0;
    let c = nn * (nn - 2.0) / 4.0;
    let pw = (nn + 2.0) / (nn - 2.0);
    let f = |y: &[f64; 2]| [y[1], k2 * y[0] - c * y[0].abs().powf(pw) * y[0].signum()];
    crate::ode::rk8_trajectory(&f, [v0, vdot0], h, n)
}

/// Sampled Delaunay solution with `v(0) = eps` (the neck) and its variational data.
#[derive(Debug, Clone)]
pub struct DelaunayOrbit {
    pub params: DelaunayParams,
    /// Uniform grid step.
    pub step: f64,
    pub t_grid: Vec<f64>,
    pub v: Vec<f64>,
    pub vdot: Vec<f64>,
    /// Necksize variation `dv/deps` at the nodes.
    pub phi: Vec<f64>,
    /// Deviation `v - eps cosh((N-2)t/2)` at the nodes.
    pub deviation: Vec<f64>,
    /// Period from the substitution integral.
    pub period: f64,
    /// Period located on the integrated trajectory (second zero of `vdot`).
    pub period_event: f64,
    /// `dT/deps` read off the variational equation.
    pub dperiod_deps: f64,
    pub energy: f64,
    pub v_max: f64,
    pub energy_drift: f64,
    states: Vec<OrbitState>,
}

/// Integrates the orbit over `n_periods` periods with `steps_per_period` RK8 steps
/// per period and checks energy conservation against `energy_tol`.
pub fn integrate_orbit(
    params: &DelaunayParams,
    n_periods: usize,
    steps_per_period: usize,
    energy_tol: f64,
) -> Result<DelaunayOrbit> {
    let n_periods = n_periods.max(1);
    let vmax = v_max(params)?;
    let energy = hamiltonian(params.eps, 0.0, params.dim);
    let t_period = period(params)?;
    let h = t_period / steps_per_period as f64;
    let total = n_periods * steps_per_period;
    if vmax.degenerate {
        let e = params.eps;
        let states = vec![[e, 0.0, 1.0, 0.0, 0.0, 0.0]; steps_per_period + 1];
        let mut phi = Vec::with_capacity(total + 1);
        let mut deviation = Vec::with_capacity(total + 1);
        let cyl = cylinder_period(params.dim);
        let mut traj = vec![[1.0, 0.0]; total + 1];
        for (k, st) in traj.iter_mut().enumerate().skip(1) {
            let w = (params.dim as f64 - 2.0).sqrt();
            let t = k as f64 * h;
            *st = [(w * t).cos(), -w * (w * t).sin()];
        }
        for (k, st) in traj.iter().enumerate() {
            phi.push(st[0]);
            let t = k as f64 * h;
            deviation.push(e - e * (params.kappa() * t).cosh());
        }
        return Ok(DelaunayOrbit {
            params: *params,
            step: h,
            t_grid: (0..=total).map(|k| k as f64 * h).collect(),
            v: vec![e; total + 1],
            vdot: vec![0.0; total + 1],
            phi,
            deviation,
            period: cyl,
            period_event: cyl,
            dperiod_deps: f64::NAN,
            energy,
            v_max: e,
            energy_drift: 0.0,
            states,
        });
    }
    let f = augmented_rhs(params);
    let mut states = Vec::with_capacity(total + 1);
    let mut y: OrbitState = [params.eps, 0.0, 1.0, 0.0, 0.0, 0.0];
    states.push(y);
    for _ in 0..total {
        y = rk8_step(&f, &y, h);
        states.push(y);
    }
    let mut drift: f64 = 0.0;
    for s in &states {
        drift = drift.max((hamiltonian(s[0], s[1], params.dim) - energy).abs());
    }
    if drift > energy_tol {
        return Err(Error::IntegrationFailure { drift, tol: energy_tol });
    }
    // second zero of vdot: sign change from negative to positive near t = T
    let lo = steps_per_period / 2 + 1;
    let hi = (steps_per_period + steps_per_period / 4).min(total);
    let k = (lo..hi)
        .find(|&k| states[k][1] < 0.0 && states[k + 1][1] >= 0.0)
        .ok_or_else(|| Error::RootNotFound("no period event on the trajectory".into()))?;
    let mut tau = -states[k][1] / f(&states[k])[1];
    for _ in 0..30 {
        let st = rk8_step(&f, &states[k], tau);
        let dtau = -st[1] / f(&st)[1];
        tau += dtau;
        if dtau.abs() < 1e-16 * (1.0 + tau.abs()) {
            break;
        }
    }
    let period_event = k as f64 * h + tau;
    let at_event = rk8_step(&f, &states[k], tau);
    let dperiod_deps = -at_event[3] / f(&at_event)[1];
    let first: Vec<OrbitState> = states[..=steps_per_period].to_vec();
    Ok(DelaunayOrbit {
        params: *params,
        step: h,
        t_grid: (0..=total).map(|k| k as f64 * h).collect(),
        v: states.iter().map(|s| s[0]).collect(),
        vdot: states.iter().map(|s| s[1]).collect(),
        phi: states.iter().map(|s| s[2]).collect(),
        deviation: states.iter().map(|s| s[4]).collect(),
        period: t_period,
        period_event,
        dperiod_deps,
        energy,
        v_max: vmax.value,
        energy_drift: drift,
        states: first,
    })
}

impl DelaunayOrbit {
    /// Default construction: five periods, `T/4096` steps, drift tolerance `1e-9`.
    pub fn new(dim: usize, eps: f64) -> Result<Self> {
        integrate_orbit(&DelaunayParams::new(dim, eps)?, 5, 4096, 1e-9)
    }

    fn substep(&self, tau: f64) -> OrbitState {
        if self.params.is_cylindrical() {
            let e = self.params.eps;
            let w = (self.params.dim as f64 - 2.0).sqrt();
            let d = e - e * (self.params.kappa() * tau).cosh();
            return [e, 0.0, (w * tau).cos(), -w * (w * tau).sin(), d, 0.0];
        }
        let n = self.states.len() - 1;
        let k = ((tau / self.step).round() as usize).min(n);
        let dt = tau - k as f64 * self.step;
        if dt == 0.0 {
            return self.states[k];
        }
        rk8_step(&augmented_rhs(&self.params), &self.states[k], dt)
    }

    /// Full augmented state at arbitrary `t`, using evenness in `t` and periodicity.
    /// The deviation components are only meaningful for `|t| <= T/2`.
    pub fn state(&self, t: f64) -> OrbitState {
        let tp = self.period_event;
        let at = t.abs();
        let k = (at / tp).floor();
        let tau = at - k * tp;
        let mut s = self.substep(tau);
        if k > 0.0 && !self.params.is_cylindrical() {
            let vdd = self.params.rhs(s[0]);
            s[2] -= k * self.dperiod_deps * s[1];
            s[3] -= k * self.dperiod_deps * vdd;
            let e = self.params.eps;
            let kc = self.params.kappa();
            s[4] = s[0] - e * (kc * at).cosh();
            s[5] = s[1] - e * kc * (kc * at).sinh();
        }
        if t < 0.0 {
            s[1] = -s[1];
            s[3] = -s[3];
            s[5] = -s[5];
        }
        s
    }

    /// `(v, vdot)` at `t` by quintic Hermite interpolation of the stored period.
    pub fn eval(&self, t: f64) -> (f64, f64) {
        if self.params.is_cylindrical() {
            return (self.params.eps, 0.0);
        }
        let tp = self.period_event;
        let at = t.abs();
        let tau = at - (at / tp).floor() * tp;
        let n = self.states.len() - 1;
        let k = ((tau / self.step).floor() as usize).min(n - 1);
        let u = (tau - k as f64 * self.step) / self.step;
        let h = self.step;
        let (a, b) = (&self.states[k], &self.states[k + 1]);
        let acc = |y: &OrbitState| self.params.rhs(y[0]);
        let jerk = |y: &OrbitState| {
            let k2 = self.params.kappa() * self.params.kappa();
            (k2 - self.params.potential(y[0])) * y[1]
        };
        let (u2, u3) = (u * u, u * u * u);
        let (u4, u5) = (u3 * u, u3 * u2);
        let h0 = 1.0 - 10.0 * u3 + 15.0 * u4 - 6.0 * u5;
        let h1 = u - 6.0 * u3 + 8.0 * u4 - 3.0 * u5;
        let h2 = 0.5 * (u2 - 3.0 * u3 + 3.0 * u4 - u5);
        let g0 = 10.0 * u3 - 15.0 * u4 + 6.0 * u5;
        let g1 = -4.0 * u3 + 7.0 * u4 - 3.0 * u5;
        let g2 = 0.5 * (u3 - 2.0 * u4 + u5);
        let (aa, ba) = (acc(a), acc(b));
        let v = h0 * a[0] + h1 * h * a[1] + h2 * h * h * aa + g0 * b[0] + g1 * h * b[1] + g2 * h * h * ba;
        let vd = h0 * a[1] + h1 * h * aa + h2 * h * h * jerk(a) + g0 * b[1] + g1 * h * ba + g2 * h * h * jerk(b);
        (v, if t < 0.0 { -vd } else { vd })
    }

    /// `(v, vdot, vddot)` at `t`.
    pub fn eval2(&self, t: f64) -> (f64, f64, f64) {
        let (v, vd) = self.eval(t);
        (v, vd, self.params.rhs(v))
    }

    /// `(v, vdot)` on the grid `s0 + k h`, `k = 0..=n`, marched by RK8 from `s0`.
    pub fn march(&self, s0: f64, h: f64, n: usize) -> Vec<[f64; 2]> {
        let (v0, vd0) = self.eval(s0);
        if self.params.is_cylindrical() {
            return vec![[v0, 0.0]; n + 1];
        }
        solve_ivp(self.params.dim, v0, vd0, h, n)
    }

    /// Jacobi fields `(Phi^{0,+}, Phi^{0,-}, Phi^{1,+}, Phi^{1,-})` at `t`.
    pub fn jacobi_fields(&self, t: f64) -> [f64; 4] {
        let s = self.state(t);
        let k = self.params.kappa();
        [
            s[1],
            s[2],
            (-t).exp() * (k * s[0] - s[1]),
            t.exp() * (k * s[0] + s[1]),
        ]
    }

    /// Derivatives in `t` of the Jacobi fields.
    pub fn jacobi_fields_dot(&self, t: f64) -> [f64; 4] {
        let s = self.state(t);
        let k = self.params.kappa();
        let vdd = self.params.rhs(s[0]);
        let zp = k * s[0] - s[1];
        let zm = k * s[0] + s[1];
        [
            vdd,
            s[3],
            (-t).exp() * (k * s[1] - vdd - zp),
            t.exp() * (k * s[1] + vdd + zm),
        ]
    }

    /// Largest `|v(t + T) - v(t)|` over overlapping grid nodes.
    pub fn periodicity_defect(&self) -> f64 {
        let m = (self.period / self.step).round() as usize;
        (0..self.v.len().saturating_sub(m))
            .map(|k| (self.v[k + m] - self.v[k]).abs())
            .fold(0.0, f64::max)
    }

    /// Writes the orbit as CSV with columns `t, v, vdot, H_drift`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            format!("N={}", self.params.dim),
            format!("eps={:e}", self.params.eps),
            format!("T_eps={:.15e}", self.period),
            String::new(),
        ])?;
        w.write_record(["t", "v", "vdot", "H_drift"])?;
        for k in 0..self.v.len() {
            let drift = hamiltonian(self.v[k], self.vdot[k], self.params.dim) - self.energy;
            w.write_record([
                format!("{:.15e}", self.t_grid[k]),
                format!("{:.15e}", self.v[k]),
                format!("{:.15e}", self.vdot[k]),
                format!("{:.3e}", drift),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Translation parameters of the family `u_eps(R, a, x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DelaunayFamilyParams {
    pub base: DelaunayParams,
    pub r: f64,
    pub a: Vec<f64>,
}

fn family_pieces(fam: &DelaunayFamilyParams, x: &[f64]) -> Result<(f64, Vec<f64>, f64, f64)> {
    let x2: f64 = x.iter().map(|v| v * v).sum();
    if x2 == 0.0 {
        return Err(Error::SingularPoint("x = 0".into()));
    }
    let y: Vec<f64> = if fam.a.is_empty() {
        x.to_vec()
    } else {
        x.iter().zip(&fam.a).map(|(xi, ai)| xi - ai * x2).collect()
    };
    let y2: f64 = y.iter().map(|v| v * v).sum();
    if y2 == 0.0 {
        return Err(Error::SingularPoint("x - a|x|^2 = 0".into()));
    }
    let s = -x2.ln() + 0.5 * y2.ln() + fam.r.ln();
    Ok((x2, y, y2, s))
}

/// `u_eps(R, a, x) = |x - a|x|^2|^{(2-N)/2} v_eps(-2 log|x| + log|x - a|x|^2| + log R)`.
pub fn family_eval(fam: &DelaunayFamilyParams, orbit: &DelaunayOrbit, x: &[f64]) -> Result<f64> {
    let (_, _, y2, s) = family_pieces(fam, x)?;
    let k = fam.base.kappa();
    Ok(y2.powf(-0.5 * k) * orbit.eval(s).0)
}

/// Value and gradient of `u_eps(R, a, x)`.
pub fn family_grad(
    fam: &DelaunayFamilyParams,
    orbit: &DelaunayOrbit,
    x: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let (x2, y, y2, s) = family_pieces(fam, x)?;
    let k = fam.base.kappa();
    let (v, vd) = orbit.eval(s);
    let ay: f64 = fam.a.iter().zip(&y).map(|(a, y)| a * y).sum();
    let amp = y2.powf(-0.5 * k);
    let grad = (0..x.len())
        .map(|j| {
            let dy = y[j] - 2.0 * ay * x[j];
            let ds = -2.0 * x[j] / x2 + dy / y2;
            -k * amp / y2 * dy * v + amp * vd * ds
        })
        .collect();
    Ok((amp * v, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hamiltonian_reference_values() {
        assert!((hamiltonian(0.5f64.sqrt(), 0.0, 4) + 0.25).abs() < 1e-15);
        assert_eq!(hamiltonian(1.0, 0.0, 5), 0.0);
    }

    #[test]
    fn vmax_closed_form_dimension_four() {
        let p = DelaunayParams::new(4, 0.1).unwrap();
        let vm = v_max(&p).unwrap();
        assert!((vm.value - 0.99f64.sqrt()).abs() < 1e-14);
        assert!(!vm.degenerate);
    }

    #[test]
    fn cylindrical_root_is_degenerate() {
        let p = DelaunayParams::new(4, eps_cyl(4)).unwrap();
        let vm = v_max(&p).unwrap();
        assert!(vm.degenerate);
        assert!((vm.value - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn hermite_evaluation_matches_substep() {
        let o = DelaunayOrbit::new(3, 1e-2).unwrap();
        for &t in &[0.0123, 3.7, 11.29, -5.5, 40.1] {
            let (v, vd) = o.eval(t);
            let s = o.state(t);
            assert!((v - s[0]).abs() < 1e-13 && (vd - s[1]).abs() < 1e-12, "{t}");
        }
    }

    #[test]
    fn period_matches_trajectory_event() {
        let o = DelaunayOrbit::new(3, 1e-2).unwrap();
        assert!((o.period - o.period_event).abs() < 1e-8 * o.period);
    }
}
