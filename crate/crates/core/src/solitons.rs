//! Rotationally symmetric solitons: the bowl translator `u(r)` and
//! self-shrinker profiles `r(z)`.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::flow::AxialFlow;
use crate::io::{format_key_values, CsvTable};
use crate::numerics::{collocation_defect, rk4_step};
use crate::spectral::cylinder_radius;

/// The bowl `x_{n+1} = u(|x|)` moving with unit speed, sampled with
/// `v = u'`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolitonProfile {
    pub n: usize,
    pub r: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub residual: f64,
}

/// `v' = (1 + v^2)(1 - (n-1) v / r)`, with its axis limit `1/n`.
fn bowl_rhs(n: usize) -> impl Fn(f64, &[f64; 2]) -> [f64; 2] {
    let m = n as f64 - 1.0;
    move |r: f64, y: &[f64; 2]| {
        let v = y[1];
        let dv = if r == 0.0 { 1.0 / n as f64 } else { (1.0 + v * v) * (1.0 - m * v / r) };
        [v, dv]
    }
}

/// Step size: `2.5e-4` near the axis, growing like `0.001 r`, capped by the
/// RK4 stability limit of the stiff far-field relaxation
/// `dv'/dv ~ -(1 + v^2)(n-1)/r`.
fn bowl_step(n: usize, r: f64, v: f64) -> f64 {
    let stiff = (1.0 + v * v) * (n as f64 - 1.0) / r.max(1e-12);
    (0.001 * r).min(0.25 / stiff).max(2.5e-4)
}

/// Integrates the bowl from the axis out to `r_max`.
pub fn solve_bowl(n: usize, r_max: f64, tol: f64) -> Result<SolitonProfile> {
    if n < 2 {
        return Err(Error::InvalidInput("bowl needs n >= 2".into()));
    }
    if !(r_max >= 10.0) || !r_max.is_finite() {
        return Err(Error::InvalidInput(format!("r_max = {r_max} must be >= 10")));
    }
    let f = bowl_rhs(n);
    let mut r = 0.0;
    let mut y = [0.0, 0.0];
    let mut rs = vec![r];
    let mut ys = vec![y];
    while r < r_max {
        let h = bowl_step(n, r, y[1]).min(r_max - r);
        if h < 1e-9 {
            return Err(Error::Integration { last_r: r, reason: "step size underflow".into() });
        }
        let next = rk4_step(&f, r, &y, h);
        if !next.iter().all(|v| v.is_finite()) || next[1] < y[1] {
            return Err(Error::Integration { last_r: r, reason: "non-finite or non-convex state".into() });
        }
        r = if r_max - (r + h) < 1e-12 { r_max } else { r + h };
        y = next;
        rs.push(r);
        ys.push(y);
    }
    let residual = collocation_defect(&f, &rs, &ys);
    if !(residual <= tol) {
        return Err(Error::Integration { last_r: r, reason: format!("ODE residual {residual:e} above {tol:e}") });
    }
    Ok(SolitonProfile {
        n,
        u: ys.iter().map(|s| s[0]).collect(),
        v: ys.iter().map(|s| s[1]).collect(),
        r: rs,
        residual,
    })
}

impl SolitonProfile {
    pub fn r_max(&self) -> f64 {
        self.r[self.r.len() - 1]
    }

    /// Height at radius `r` by cubic Hermite interpolation.
    pub fn height_at(&self, r: f64) -> Option<f64> {
        if !(r >= 0.0 && r <= self.r_max()) {
            return None;
        }
        let k = self.r.partition_point(|&x| x <= r).saturating_sub(1).min(self.r.len() - 2);
        Some(self.hermite(k, r).0)
    }

    fn hermite(&self, k: usize, r: f64) -> (f64, f64) {
        let (r0, r1) = (self.r[k], self.r[k + 1]);
        let h = r1 - r0;
        let s = (r - r0) / h;
        let (u0, u1, v0, v1) = (self.u[k], self.u[k + 1], self.v[k], self.v[k + 1]);
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        let val = h00 * u0 + h10 * h * v0 + h01 * u1 + h11 * h * v1;
        let d00 = 6.0 * s * (s - 1.0) / h;
        let d10 = (1.0 - s) * (1.0 - 3.0 * s);
        let d01 = -d00;
        let d11 = s * (3.0 * s - 2.0);
        let der = d00 * u0 + d10 * v0 + d01 * u1 + d11 * v1;
        (val, der)
    }

    /// Radius at height `h` above the tip (inverse of `u`).
    pub fn radius_at_height(&self, h: f64) -> Option<f64> {
        let last = self.u.len() - 1;
        if !(h >= 0.0 && h <= self.u[last]) {
            return None;
        }
        if h == 0.0 {
            return Some(0.0);
        }
        let k = self.u.partition_point(|&x| x <= h).saturating_sub(1).min(last - 1);
        let (mut a, mut b) = (self.r[k], self.r[k + 1]);
        // bracketed Newton on the monotone Hermite piece
        let mut x = a + (b - a) * (h - self.u[k]) / (self.u[k + 1] - self.u[k]);
        for _ in 0..60 {
            let (val, der) = self.hermite(k, x);
            let g = val - h;
            if g.abs() <= 1e-15 * h.max(1.0) {
                break;
            }
            if g > 0.0 {
                b = x;
            } else {
                a = x;
            }
            let step = if der > 0.0 { x - g / der } else { f64::NAN };
            x = if step > a && step < b { step } else { 0.5 * (a + b) };
            if b - a < 1e-15 * b {
                break;
            }
        }
        Some(x)
    }

    /// CSV `r,u`.
    pub fn to_csv(&self) -> String {
        let mut t = CsvTable::new(&["r", "u"]);
        for (r, u) in self.r.iter().zip(&self.u) {
            t.row(&[*r, *u]);
        }
        t.finish()
    }

    pub fn metadata(&self) -> String {
        let mut m = BTreeMap::new();
        m.insert("kind".to_string(), "bowl".to_string());
        m.insert("n".to_string(), self.n.to_string());
        m.insert("r_max".to_string(), self.r_max().to_string());
        m.insert("speed".to_string(), "1".to_string());
        m.insert("residual".to_string(), format!("{:e}", self.residual));
        format_key_values(&m)
    }
}

/// The bowl as a flow: `M_t = M_0 + t e_{n+1}`, tip at height `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct TranslatingBowl {
    pub profile: SolitonProfile,
}

impl TranslatingBowl {
    /// Tip height `psi(t)`.
    pub fn tip_height(&self, t: f64) -> f64 {
        t
    }
}

impl AxialFlow for TranslatingBowl {
    fn dimension(&self) -> usize {
        self.profile.n
    }

    fn time_span(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }

    fn radius_sq(&self, t: f64, z: f64) -> Option<f64> {
        self.profile.radius_at_height(z - t).map(|r| r * r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ShrinkerKind {
    Cylinder,
    Sphere,
    /// Shooting from the cap at height `a` on the axis.
    Ads(f64),
}

/// A shrinker profile `r(z)` sampled along the curve.
#[derive(Debug, Clone, PartialEq)]
pub struct ShrinkerProfile {
    pub n: usize,
    pub kind: ShrinkerKind,
    pub z: Vec<f64>,
    pub r: Vec<f64>,
    pub residual: f64,
}

/// Residual of `(n-1)/r - r''/(1+r'^2) - (r - z r')/2` given derivatives.
pub fn shrinker_graph_residual(n: usize, z: f64, r: f64, dr: f64, ddr: f64) -> f64 {
    (n as f64 - 1.0) / r - ddr / (1.0 + dr * dr) - 0.5 * (r - z * dr)
}

/// Profile curve `(x, y) = (z, r)` in arclength with tangent angle `theta`:
/// `theta' = (x sin(theta) - y cos(theta))/2 + (n-1) cos(theta)/y`.
fn arclength_rhs(n: usize, a: f64) -> impl Fn(f64, &[f64; 3]) -> [f64; 3] {
    let m = n as f64 - 1.0;
    let kappa0 = a / (2.0 * n as f64);
    move |_s: f64, y: &[f64; 3]| {
        let (x, r, th) = (y[0], y[1], y[2]);
        let (sn, cs) = th.sin_cos();
        let dth = if r <= 0.0 { kappa0 } else { 0.5 * (x * sn - r * cs) + m * cs / r };
        [cs, sn, dth]
    }
}

const ADS_STEP: f64 = 2.5e-4;

/// Outcome of one shooting from the cap at height `a`.
#[derive(Debug, Clone, PartialEq)]
enum Shot {
    /// Reached the plane `z = 0` as a graph over the axis.
    Closed { s: Vec<f64>, y: Vec<[f64; 3]> },
    /// Folded back or blew up first.
    Failed,
}

fn shoot_ads(n: usize, a: f64) -> Shot {
    let f = arclength_rhs(n, a);
    let big_r = cylinder_radius(n);
    let mut s = 0.0;
    let mut y = [a, 0.0, std::f64::consts::FRAC_PI_2];
    let mut ss = vec![s];
    let mut ys = vec![y];
    let limit = 10.0 * (a + big_r) + 100.0;
    while s < limit {
        // finer steps near the regular singular point on the axis
        let h = ADS_STEP * (y[1] / 0.1).clamp(0.02, 1.0);
        let mut next = rk4_step(&f, s, &y, h);
        if next[0] <= 0.0 {
            // shortened final step lands on z = 0
            let frac = y[0] / (y[0] - next[0]);
            next = rk4_step(&f, s, &y, frac * h);
            next[0] = 0.0;
            ss.push(s + frac * h);
            ys.push(next);
            return Shot::Closed { s: ss, y: ys };
        }
        s += h;
        let graph = next[2] > std::f64::consts::FRAC_PI_2 && next[2] < 1.5 * std::f64::consts::PI;
        if !graph || !(next[1] > 0.0) || !next.iter().all(|v| v.is_finite()) {
            return Shot::Failed;
        }
        y = next;
        ss.push(s);
        ys.push(y);
    }
    Shot::Failed
}

/// Sub-interval of `[lo, hi]` of cap heights whose profiles close as graphs
/// over `0 <= z <= a`: a scan on `samples` points followed by bisection
/// against failing neighbours.
pub fn ads_bracket(n: usize, lo: f64, hi: f64, samples: usize) -> Result<(f64, f64)> {
    if !(lo > 0.0 && hi > lo) || samples < 2 {
        return Err(Error::InvalidInput("ADS scan needs 0 < lo < hi and two samples".into()));
    }
    let grid: Vec<f64> = (0..samples).map(|k| lo + (hi - lo) * k as f64 / (samples - 1) as f64).collect();
    let ok: Vec<bool> = grid.iter().map(|&a| matches!(shoot_ads(n, a), Shot::Closed { .. })).collect();
    let first = ok.iter().position(|&b| b);
    let last = ok.iter().rposition(|&b| b);
    let (Some(i), Some(j)) = (first, last) else {
        return Err(Error::NoSolution(format!("no closing profile for a in [{lo}, {hi}]")));
    };
    let refine = |mut good: f64, mut bad: f64| {
        for _ in 0..50 {
            let mid = 0.5 * (good + bad);
            if matches!(shoot_ads(n, mid), Shot::Closed { .. }) {
                good = mid;
            } else {
                bad = mid;
            }
        }
        good
    };
    let left = if i > 0 { refine(grid[i], grid[i - 1]) } else { grid[0] };
    let right = if j + 1 < samples { refine(grid[j], grid[j + 1]) } else { grid[samples - 1] };
    Ok((left, right))
}

/// Shrinker profiles: closed-form cylinder and sphere, shooting for ADS.
pub fn solve_shrinker_profile(n: usize, kind: ShrinkerKind, tol: f64) -> Result<ShrinkerProfile> {
    if n < 2 {
        return Err(Error::InvalidInput("shrinkers need n >= 2".into()));
    }
    let nf = n as f64;
    match kind {
        ShrinkerKind::Cylinder => {
            let r0 = cylinder_radius(n);
            let z: Vec<f64> = (0..=200).map(|k| -10.0 + 0.1 * k as f64).collect();
            let residual = z
                .iter()
                .map(|&x| shrinker_graph_residual(n, x, r0, 0.0, 0.0).abs())
                .fold(0.0, f64::max);
            Ok(ShrinkerProfile { n, kind, r: vec![r0; z.len()], z, residual })
        }
        ShrinkerKind::Sphere => {
            let rad = (2.0 * nf).sqrt();
            // open interval: the graph representation degenerates at the poles
            let z: Vec<f64> = (1..400).map(|k| rad * (-1.0 + k as f64 / 200.0)).collect();
            let r: Vec<f64> = z.iter().map(|x| (2.0 * nf - x * x).sqrt()).collect();
            let residual = z
                .iter()
                .zip(&r)
                .map(|(&x, &y)| {
                    let dr = -x / y;
                    let ddr = -2.0 * nf / (y * y * y);
                    shrinker_graph_residual(n, x, y, dr, ddr).abs()
                })
                .fold(0.0, f64::max);
            Ok(ShrinkerProfile { n, kind, z, r, residual })
        }
        ShrinkerKind::Ads(a) => {
            if !(a > 0.0) || !a.is_finite() {
                return Err(Error::InvalidInput(format!("ADS parameter a = {a} must be positive")));
            }
            let Shot::Closed { s, y } = shoot_ads(n, a) else {
                return Err(Error::NoSolution(format!(
                    "cap at a = {a} folds back before reaching z = 0"
                )));
            };
            let residual = collocation_defect(&arclength_rhs(n, a), &s, &y);
            if !(residual <= tol) {
                return Err(Error::Integration { last_r: y[y.len() - 1][1], reason: format!("residual {residual:e}") });
            }
            // stored with z increasing
            let z = y.iter().rev().map(|p| p[0]).collect();
            let r = y.iter().rev().map(|p| p[1]).collect();
            Ok(ShrinkerProfile { n, kind, z, r, residual })
        }
    }
}

impl ShrinkerProfile {
    /// `max r - sqrt(2(n-1))`: positive when the profile leaves the cylinder.
    pub fn radial_excess(&self) -> f64 {
        self.r.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v)) - cylinder_radius(self.n)
    }

    /// CSV `z,r`.
    pub fn to_csv(&self) -> String {
        let mut t = CsvTable::new(&["z", "r"]);
        for (z, r) in self.z.iter().zip(&self.r) {
            t.row(&[*z, *r]);
        }
        t.finish()
    }

    pub fn metadata(&self) -> String {
        let mut m = BTreeMap::new();
        let (kind, param) = match self.kind {
            ShrinkerKind::Cylinder => ("cylinder", None),
            ShrinkerKind::Sphere => ("sphere", None),
            ShrinkerKind::Ads(a) => ("ads", Some(a)),
        };
        m.insert("kind".to_string(), kind.to_string());
        m.insert("n".to_string(), self.n.to_string());
        if let Some(a) = param {
            m.insert("a".to_string(), a.to_string());
            m.insert("parametrization".to_string(), "arclength from the cap at (a, 0)".to_string());
        }
        m.insert("radial_excess".to_string(), format!("{:e}", self.radial_excess()));
        m.insert("residual".to_string(), format!("{:e}", self.residual));
        format_key_values(&m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Plane,
    Sphere,
    Cylinder,
}

/// Closed-form shrinking models `S^k(sqrt(2k)) x R^{n-k}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactModel {
    pub kind: ModelKind,
    pub n: usize,
}

pub fn exact_model(kind: ModelKind, n: usize) -> ExactModel {
    ExactModel { kind, n }
}

impl ExactModel {
    /// Number of curved directions `k`.
    pub fn curved_dimension(&self) -> usize {
        match self.kind {
            ModelKind::Plane => 0,
            ModelKind::Sphere => self.n,
            ModelKind::Cylinder => self.n - 1,
        }
    }

    /// Radius of the time `-1` slice: `sqrt(2k)`, infinite for the plane.
    pub fn shrinker_radius(&self) -> f64 {
        match self.curved_dimension() {
            0 => f64::INFINITY,
            k => (2.0 * k as f64).sqrt(),
        }
    }

    /// `sqrt(r0^2 - 2kt)`; `None` after extinction.
    pub fn radius_at(&self, r0: f64, t: f64) -> Option<f64> {
        let k = self.curved_dimension() as f64;
        if k == 0.0 {
            return Some(r0);
        }
        let w = r0 * r0 - 2.0 * k * t;
        (w > 0.0).then(|| w.sqrt())
    }

    pub fn extinction_time(&self, r0: f64) -> f64 {
        match self.curved_dimension() {
            0 => f64::INFINITY,
            k => r0 * r0 / (2.0 * k as f64),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bowl_tip_series() {
        let b = solve_bowl(3, 10.0, 1e-8).unwrap();
        let u = b.height_at(0.01).unwrap();
        assert!((u - 1e-4 / 6.0).abs() < 1e-8);
        assert!(b.v.windows(2).all(|p| p[1] > p[0]));
    }

    #[test]
    fn bowl_inverse_roundtrip() {
        let b = solve_bowl(2, 50.0, 1e-8).unwrap();
        for r in [0.0, 0.003, 0.5, 3.0, 27.1, 49.9] {
            let h = b.height_at(r).unwrap();
            let back = b.radius_at_height(h).unwrap();
            assert!((back - r).abs() < 1e-9 * r.max(1.0), "{r} -> {back}");
        }
    }

    #[test]
    fn bowl_rejects_small_domain() {
        assert!(matches!(solve_bowl(3, 5.0, 1e-8), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn closed_form_shrinkers() {
        let c = solve_shrinker_profile(3, ShrinkerKind::Cylinder, 1e-12).unwrap();
        assert!(c.r.iter().all(|&r| r == 2.0));
        assert!(c.residual <= 1e-15);
        for n in 2..=4 {
            let s = solve_shrinker_profile(n, ShrinkerKind::Sphere, 1e-12).unwrap();
            assert!(s.residual <= 1e-12, "n = {n}: {}", s.residual);
        }
    }

    #[test]
    fn ads_profiles_close_at_the_cap() {
        let p = solve_shrinker_profile(3, ShrinkerKind::Ads(8.0), 1e-6).unwrap();
        assert_eq!(p.z[0], 0.0);
        assert!((p.z[p.z.len() - 1] - 8.0).abs() < 1e-12);
        assert_eq!(p.r[p.r.len() - 1], 0.0);
        assert!(p.z.windows(2).all(|w| w[1] > w[0]));
        // excess over the cylinder shrinks as the cap moves out
        let q = solve_shrinker_profile(3, ShrinkerKind::Ads(16.0), 1e-6).unwrap();
        assert!(q.radial_excess() < p.radial_excess() && q.radial_excess() > 0.0);
        assert!(solve_shrinker_profile(3, ShrinkerKind::Ads(-1.0), 1e-8).is_err());
    }

    #[test]
    fn exact_models() {
        assert_eq!(exact_model(ModelKind::Cylinder, 3).shrinker_radius(), 2.0);
        assert_eq!(exact_model(ModelKind::Sphere, 3).shrinker_radius(), 6f64.sqrt());
        assert!(exact_model(ModelKind::Plane, 3).shrinker_radius().is_infinite());
        let s = exact_model(ModelKind::Sphere, 2);
        assert_eq!(s.extinction_time(1.0), 0.25);
        assert_eq!(s.radius_at(1.0, 0.3), None);
    }
}
