//! Small numerical kernels shared by the solvers: quadrature, banded solves,
//! finite differences, interpolation, fixed-step Runge-Kutta and line fits.

use std::f64::consts::PI;

/// Area of the unit sphere `S^k` in `R^{k+1}`.
pub fn sphere_area(k: usize) -> f64 {
    match k {
        0 => 2.0,
        1 => 2.0 * PI,
        _ => 2.0 * PI / (k as f64 - 1.0) * sphere_area(k - 2),
    }
}

/// Gauss-Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..(n + 1) / 2 {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        GaussLegendre { nodes, weights }
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn on_interval(&self, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let x = self.nodes.iter().map(|t| mid + half * t).collect();
        let w = self.weights.iter().map(|w| half * w).collect();
        (x, w)
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, a: f64, b: f64, f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(t, w)| w * f(mid + half * t))
            .sum::<f64>()
            * half
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Thomas algorithm. `sub[i]` multiplies `x[i-1]` in row `i`, `sup[i]`
/// multiplies `x[i+1]`; `sub[0]` and `sup[n-1]` are ignored.
pub fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &mut [f64]) {
    let n = rhs.len();
    assert!(diag.len() == n && sub.len() == n && sup.len() == n);
    if n == 0 {
        return;
    }
    let mut c = vec![0.0; n];
    c[0] = sup[0] / diag[0];
    rhs[0] /= diag[0];
    for i in 1..n {
        let m = diag[i] - sub[i] * c[i - 1];
        c[i] = sup[i] / m;
        rhs[i] = (rhs[i] - sub[i] * rhs[i - 1]) / m;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
}

/// Square banded matrix with `lower` sub-diagonals and `upper`
/// super-diagonals, factorised without pivoting (the flow matrices are
/// diagonally dominant).
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    lower: usize,
    upper: usize,
    band: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, lower: usize, upper: usize) -> Self {
        BandMatrix { n, lower, upper, band: vec![0.0; n * (lower + upper + 1)] }
    }

    fn idx(&self, row: usize, col: usize) -> usize {
        debug_assert!(col + self.lower >= row && col <= row + self.upper);
        row * (self.lower + self.upper + 1) + (col + self.lower - row)
    }

    pub fn set(&mut self, row: usize, col: usize, v: f64) {
        let i = self.idx(row, col);
        self.band[i] = v;
    }

    pub fn add(&mut self, row: usize, col: usize, v: f64) {
        let i = self.idx(row, col);
        self.band[i] += v;
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        if col + self.lower < row || col > row + self.upper {
            0.0
        } else {
            self.band[self.idx(row, col)]
        }
    }

    /// Solves in place; the matrix is consumed by the factorisation.
    pub fn solve(mut self, rhs: &mut [f64]) {
        let n = self.n;
        assert_eq!(rhs.len(), n);
        for k in 0..n {
            let pivot = self.get(k, k);
            let last_row = (k + self.lower).min(n - 1);
            let last_col = (k + self.upper).min(n - 1);
            for i in k + 1..=last_row {
                let f = self.get(i, k) / pivot;
                if f == 0.0 {
                    continue;
                }
                for j in k..=last_col {
                    let v = self.get(k, j);
                    // fill-in stays inside the band because there is no pivoting
                    if j <= i + self.upper {
                        self.add(i, j, -f * v);
                    }
                }
                rhs[i] -= f * rhs[k];
            }
        }
        for k in (0..n).rev() {
            let last_col = (k + self.upper).min(n - 1);
            let mut s = rhs[k];
            for j in k + 1..=last_col {
                s -= self.get(k, j) * rhs[j];
            }
            rhs[k] = s / self.get(k, k);
        }
    }
}

/// Fourth-order central first derivative at interior node `i` (needs `2 <= i < n-2`).
#[inline]
pub fn d1_central4(f: &[f64], i: usize, h: f64) -> f64 {
    (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]) / (12.0 * h)
}

/// Fourth-order central second derivative at interior node `i`.
#[inline]
pub fn d2_central4(f: &[f64], i: usize, h: f64) -> f64 {
    (-f[i - 2] + 16.0 * f[i - 1] - 30.0 * f[i] + 16.0 * f[i + 1] - f[i + 2]) / (12.0 * h * h)
}

/// First and second derivatives of a uniformly sampled function at every
/// node, second order, one-sided at the two ends.
pub fn derivatives2(f: &[f64], h: f64) -> (Vec<f64>, Vec<f64>) {
    let n = f.len();
    assert!(n >= 4, "need at least four samples for one-sided stencils");
    let mut d1 = vec![0.0; n];
    let mut d2 = vec![0.0; n];
    for i in 1..n - 1 {
        d1[i] = (f[i + 1] - f[i - 1]) / (2.0 * h);
        d2[i] = (f[i + 1] - 2.0 * f[i] + f[i - 1]) / (h * h);
    }
    d1[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h);
    d1[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * h);
    d2[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / (h * h);
    d2[n - 1] = (2.0 * f[n - 1] - 5.0 * f[n - 2] + 4.0 * f[n - 3] - f[n - 4]) / (h * h);
    (d1, d2)
}

/// Local Lagrange interpolation of degree `order - 1` on a uniform grid
/// starting at `x0` with spacing `h`. Exact for polynomials of that degree.
pub fn lagrange_uniform(x0: f64, h: f64, values: &[f64], x: f64, order: usize) -> f64 {
    let n = values.len();
    let order = order.min(n);
    let s = (x - x0) / h;
    let centre = s.floor() as isize - (order as isize - 1) / 2;
    let start = centre.clamp(0, (n - order) as isize) as usize;
    let mut acc = 0.0;
    for j in 0..order {
        let mut basis = 1.0;
        let sj = (start + j) as f64;
        for m in 0..order {
            if m != j {
                let sm = (start + m) as f64;
                basis *= (s - sm) / (sj - sm);
            }
        }
        acc += basis * values[start + j];
    }
    acc
}

/// Piecewise linear interpolation of `(xs, ys)` with `xs` increasing;
/// returns `None` outside the sampled range.
pub fn interp_linear(xs: &[f64], ys: &[f64], x: f64) -> Option<f64> {
    let n = xs.len();
    if n == 0 || x < xs[0] || x > xs[n - 1] {
        return None;
    }
    let k = match xs.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
        Ok(k) => return Some(ys[k]),
        Err(k) => k,
    };
    let (x0, x1) = (xs[k - 1], xs[k]);
    let t = (x - x0) / (x1 - x0);
    Some(ys[k - 1] * (1.0 - t) + ys[k] * t)
}

/// Classical fourth-order Runge-Kutta step for an autonomous-in-form system
/// `y' = f(t, y)` with a fixed-size state.
pub fn rk4_step<const N: usize, F>(f: &F, t: f64, y: &[f64; N], h: f64) -> [f64; N]
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let k1 = f(t, y);
    let y2 = axpy(y, 0.5 * h, &k1);
    let k2 = f(t + 0.5 * h, &y2);
    let y3 = axpy(y, 0.5 * h, &k2);
    let k3 = f(t + 0.5 * h, &y3);
    let y4 = axpy(y, h, &k3);
    let k4 = f(t + h, &y4);
    let mut out = *y;
    for i in 0..N {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

fn axpy<const N: usize>(y: &[f64; N], a: f64, k: &[f64; N]) -> [f64; N] {
    let mut out = *y;
    for i in 0..N {
        out[i] += a * k[i];
    }
    out
}

/// Pointwise defect of a sampled ODE solution: the cubic Hermite interpolant
/// through consecutive samples (values and `f`-slopes) is differentiated at
/// the midpoint and compared with `f` evaluated there. Returns the maximum
/// over intervals, measured componentwise.
pub fn collocation_defect<const N: usize, F>(f: &F, ts: &[f64], ys: &[[f64; N]]) -> f64
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let mut worst = 0.0f64;
    for k in 0..ts.len().saturating_sub(1) {
        let (t0, t1) = (ts[k], ts[k + 1]);
        let h = t1 - t0;
        let f0 = f(t0, &ys[k]);
        let f1 = f(t1, &ys[k + 1]);
        let mut ym = [0.0; N];
        let mut dym = [0.0; N];
        for i in 0..N {
            let (y0, y1) = (ys[k][i], ys[k + 1][i]);
            // cubic Hermite at s = 1/2
            ym[i] = 0.5 * (y0 + y1) + h / 8.0 * (f0[i] - f1[i]);
            dym[i] = 1.5 * (y1 - y0) / h - 0.25 * (f0[i] + f1[i]);
        }
        let fm = f(t0 + 0.5 * h, &ym);
        for i in 0..N {
            let scale = 1.0f64.max(fm[i].abs());
            worst = worst.max((dym[i] - fm[i]).abs() / scale);
        }
    }
    worst
}

/// Least-squares line `y = slope x + intercept`; also returns the RMS residual.
pub fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (xi, yi) in x.iter().zip(y) {
        sxx += (xi - mx) * (xi - mx);
        sxy += (xi - mx) * (yi - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(xi, yi)| {
            let r = yi - (slope * xi + intercept);
            r * r
        })
        .sum();
    (slope, intercept, (rss / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_areas() {
        assert!((sphere_area(1) - 2.0 * PI).abs() < 1e-14);
        assert!((sphere_area(2) - 4.0 * PI).abs() < 1e-14);
        assert!((sphere_area(3) - 2.0 * PI * PI).abs() < 1e-13);
    }

    #[test]
    fn gauss_legendre_exact_on_polynomials() {
        let gl = GaussLegendre::new(7);
        for k in 0..14 {
            let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
            let got = gl.integrate(-1.0, 1.0, |x| x.powi(k));
            assert!((got - exact).abs() < 1e-14, "k={k}: {got} vs {exact}");
        }
        let big = GaussLegendre::new(400);
        let s: f64 = big.weights.iter().sum();
        assert!((s - 2.0).abs() < 1e-13);
    }

    #[test]
    fn tridiagonal_matches_dense() {
        let sub = [0.0, -1.0, -1.0, -1.0];
        let diag = [4.0, 4.0, 4.0, 4.0];
        let sup = [-1.0, -1.0, -1.0, 0.0];
        let x = [1.0, 2.0, -1.0, 0.5];
        let mut rhs: Vec<f64> = (0..4)
            .map(|i| {
                let mut s = diag[i] * x[i];
                if i > 0 {
                    s += sub[i] * x[i - 1];
                }
                if i < 3 {
                    s += sup[i] * x[i + 1];
                }
                s
            })
            .collect();
        solve_tridiagonal(&sub, &diag, &sup, &mut rhs);
        for i in 0..4 {
            assert!((rhs[i] - x[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn band_solver_with_wide_last_row() {
        let n = 6;
        let mut m = BandMatrix::zeros(n, 3, 1);
        for i in 0..n {
            m.set(i, i, 5.0);
            if i > 0 {
                m.set(i, i - 1, -1.0);
            }
            if i + 1 < n {
                m.set(i, i + 1, -1.0);
            }
        }
        m.set(n - 1, n - 4, 0.5);
        m.set(n - 1, n - 3, -0.25);
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin() + 1.0).collect();
        let mut rhs = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                rhs[i] += m.get(i, j) * x[j];
            }
        }
        m.solve(&mut rhs);
        for i in 0..n {
            assert!((rhs[i] - x[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn lagrange_reproduces_quintics() {
        let h = 0.1;
        let vals: Vec<f64> = (0..40).map(|i| {
            let x = -2.0 + h * i as f64;
            x.powi(5) - 3.0 * x * x + 1.0
        }).collect();
        for &x in &[-2.0, -1.234, 0.05, 1.77, 1.9] {
            let got = lagrange_uniform(-2.0, h, &vals, x, 6);
            let exact = x.powi(5) - 3.0 * x * x + 1.0;
            assert!((got - exact).abs() < 1e-11, "{x}: {got} vs {exact}");
        }
    }

    #[test]
    fn line_fit_exact() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        let (s, c, r) = fit_line(&x, &y);
        assert!((s - 2.0).abs() < 1e-14 && (c - 1.0).abs() < 1e-14 && r < 1e-14);
    }

    #[test]
    fn rk4_exponential() {
        let f = |_t: f64, y: &[f64; 1]| [y[0]];
        let mut y = [1.0];
        for k in 0..100 {
            y = rk4_step(&f, k as f64 * 0.01, &y, 0.01);
        }
        assert!((y[0] - 1f64.exp()).abs() < 1e-9);
    }
}
