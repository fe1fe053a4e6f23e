//! Fixed-step eighth-order Runge-Kutta integration (Cooper-Verner, 11 stages).

/// Butcher tableau of the Cooper-Verner eighth-order method.
struct Tableau {
    a: [[f64; 10]; 11],
    b: [f64; 11],
}

fn tableau() -> &'static Tableau {
    use std::sync::OnceLock;
    static T: OnceLock<Tableau> = OnceLock::new();
    T.get_or_init(|| {
        let s = 21f64.sqrt();
        let mut a = [[0.0; 10]; 11];
        a[1][0] = 0.5;
        a[2][0] = 0.25;
        a[2][1] = 0.25;
        a[3][0] = 1.0 / 7.0;
        a[3][1] = (-7.0 - 3.0 * s) / 98.0;
        a[3][2] = (21.0 + 5.0 * s) / 49.0;
        a[4][0] = (11.0 + s) / 84.0;
        a[4][2] = (18.0 + 4.0 * s) / 63.0;
        a[4][3] = (21.0 - s) / 252.0;
        a[5][0] = (5.0 + s) / 48.0;
        a[5][2] = (9.0 + s) / 36.0;
        a[5][3] = (-231.0 + 14.0 * s) / 360.0;
        a[5][4] = (63.0 - 7.0 * s) / 80.0;
        a[6][0] = (10.0 - s) / 42.0;
        a[6][2] = (-432.0 + 92.0 * s) / 315.0;
        a[6][3] = (633.0 - 145.0 * s) / 90.0;
        a[6][4] = (-504.0 + 115.0 * s) / 70.0;
        a[6][5] = (63.0 - 13.0 * s) / 35.0;
        a[7][0] = 1.0 / 14.0;
        a[7][4] = (14.0 - 3.0 * s) / 126.0;
        a[7][5] = (13.0 - 3.0 * s) / 63.0;
        a[7][6] = 1.0 / 9.0;
        a[8][0] = 1.0 / 32.0;
        a[8][4] = (91.0 - 21.0 * s) / 576.0;
        a[8][5] = 11.0 / 72.0;
        a[8][6] = (-385.0 - 75.0 * s) / 1152.0;
        a[8][7] = (63.0 + 13.0 * s) / 128.0;
        a[9][0] = 1.0 / 14.0;
        a[9][4] = 1.0 / 9.0;
        a[9][5] = (-733.0 - 147.0 * s) / 2205.0;
        a[9][6] = (515.0 + 111.0 * s) / 504.0;
        a[9][7] = (-51.0 - 11.0 * s) / 56.0;
        a[9][8] = (132.0 + 28.0 * s) / 245.0;
        a[10][4] = (-42.0 + 7.0 * s) / 18.0;
        a[10][5] = (-18.0 + 28.0 * s) / 45.0;
        a[10][6] = (-273.0 - 53.0 * s) / 72.0;
        a[10][7] = (301.0 + 53.0 * s) / 72.0;
        a[10][8] = (28.0 - 28.0 * s) / 45.0;
        a[10][9] = (49.0 - 7.0 * s) / 18.0;
        let b = [
            1.0 / 20.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            49.0 / 180.0,
            16.0 / 45.0,
            49.0 / 180.0,
            1.0 / 20.0,
        ];
        Tableau { a, b }
    })
}

/// One step of size `h` (negative allowed) for the autonomous system `y' = f(y)`.
pub fn rk8_step<const D: usize, F>(f: &F, y: &[f64; D], h: f64) -> [f64; D]
where
    F: Fn(&[f64; D]) -> [f64; D],
{
    let tab = tableau();
    let mut k = [[0.0; D]; 11];
    for s in 0..11 {
        let mut ys = *y;
        for (j, kj) in k.iter().enumerate().take(s) {
            let a = tab.a[s][j];
            if a != 0.0 {
                for d in 0..D {
                    ys[d] += h * a * kj[d];
                }
            }
        }
        k[s] = f(&ys);
    }
    let mut out = *y;
    for (s, ks) in k.iter().enumerate() {
        let b = tab.b[s];
        if b != 0.0 {
            for d in 0..D {
                out[d] += h * b * ks[d];
            }
        }
    }
    out
}

/// Integrates `n` fixed steps and returns every state including the initial one.
pub fn rk8_trajectory<const D: usize, F>(f: &F, y0: [f64; D], h: f64, n: usize) -> Vec<[f64; D]>
where
    F: Fn(&[f64; D]) -> [f64; D],
{
    let mut out = Vec::with_capacity(n + 1);
    out.push(y0);
    let mut y = y0;
    for _ in 0..n {
        y = rk8_step(f, &y, h);
        out.push(y);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eighth_order_convergence_on_oscillator() {
        let f = |y: &[f64; 2]| [y[1], -y[0]];
        let err = |n: usize| {
            let h = 10.0 / n as f64;
            let traj = rk8_trajectory(&f, [1.0, 0.0], h, n);
            (traj[n][0] - 10f64.cos()).abs()
        };
        let e1 = err(40);
        let e2 = err(80);
        let order = (e1 / e2).log2();
        assert!(order > 7.5, "observed order {order}");
    }

    #[test]
    fn tableau_rows_are_consistent() {
        let tab = tableau();
        let sb: f64 = tab.b.iter().sum();
        assert!((sb - 1.0).abs() < 1e-15);
    }
}
