//! Gaussian area, entropy, Huisken density and the cylindrical scale.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::flow::{AxialFlow, EndCondition, FlowTrajectory, ProfileCurve, SpaceTimeCenter};
use crate::io::{format_key_values, CsvTable};
use crate::numerics::{fit_line, sphere_area, GaussLegendre};

/// A rotationally symmetric hypersurface in `R^{n+1}` about the
/// `x_{n+1}`-axis.
#[derive(Debug, Clone, PartialEq)]
pub enum Surface {
    /// The hyperplane `x_{n+1} = height`.
    Plane { n: usize, height: f64 },
    /// Round `S^n(radius)` centred on the axis at `center`.
    Sphere { n: usize, radius: f64, center: f64 },
    /// `S^{n-1}(radius) x R`.
    Cylinder { n: usize, radius: f64 },
    Profile(ProfileCurve),
}

impl Surface {
    pub fn n(&self) -> usize {
        match self {
            Surface::Plane { n, .. } | Surface::Sphere { n, .. } | Surface::Cylinder { n, .. } => *n,
            Surface::Profile(p) => p.n,
        }
    }

    /// The surface dilated by `mu` about the origin.
    pub fn scaled(&self, mu: f64) -> Result<Surface> {
        Ok(match self {
            Surface::Plane { n, height } => Surface::Plane { n: *n, height: mu * height },
            Surface::Sphere { n, radius, center } => Surface::Sphere { n: *n, radius: mu * radius, center: mu * center },
            Surface::Cylinder { n, radius } => Surface::Cylinder { n: *n, radius: mu * radius },
            Surface::Profile(p) => {
                let z = p.z.iter().map(|v| mu * v).collect();
                let w = p.squared_radius().iter().map(|v| mu * mu * v).collect();
                Surface::Profile(ProfileCurve::from_squared_radius(p.n, z, w, p.left, p.right)?)
            }
        })
    }
}

/// Value of a Gaussian-area query together with a bound on the mass lying
/// beyond a truncated (reflecting) end of a profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianArea {
    pub value: f64,
    pub tail_bound: f64,
}

/// `log of int_{S^{n-1}} e^{kappa w_1} dw`.
fn log_angular(n: usize, kappa: f64) -> f64 {
    if kappa == 0.0 {
        return sphere_area(n - 1).ln();
    }
    if n == 1 {
        // S^0 = {+-1}
        return kappa.abs() + (1.0 + (-2.0 * kappa.abs()).exp()).ln();
    }
    let k = kappa.abs();
    let upper = if k > 1.0 { PI.min(15.0 / k.sqrt()) } else { PI };
    let rule = angular_rule();
    let reduced = rule.integrate(0.0, upper, |phi| (k * (phi.cos() - 1.0)).exp() * phi.sin().powi(n as i32 - 2));
    k + (sphere_area(n - 2) * reduced).ln()
}

fn angular_rule() -> &'static GaussLegendre {
    static RULE: std::sync::OnceLock<GaussLegendre> = std::sync::OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(96))
}

fn panel_rule() -> &'static GaussLegendre {
    static RULE: std::sync::OnceLock<GaussLegendre> = std::sync::OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(8))
}

/// Gaussian weight of the orbit through `(r, z)` including the area element
/// `r^{n-1}` of the orbit: `(4 pi lambda)^{-n/2} r^{n-1} int_{S^{n-1}} e^{-|x-y|^2/(4 lambda)}`.
fn orbit_weight(n: usize, r: f64, z: f64, y: (f64, f64), lambda: f64) -> f64 {
    let (zc, lat) = y;
    let kappa = r * lat / (2.0 * lambda);
    let expo = -((z - zc).powi(2) + r * r + lat * lat) / (4.0 * lambda) + log_angular(n, kappa);
    (4.0 * PI * lambda).powf(-0.5 * n as f64) * r.powi(n as i32 - 1) * expo.exp()
}

/// `(4 pi lambda)^{-n/2} int_M e^{-|x - y|^2/(4 lambda)} dA` for the centre
/// `y = lateral e_1 + z e_{n+1}`.
pub fn gaussian_area(surface: &Surface, center: (f64, f64), lambda: f64) -> Result<GaussianArea> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidInput(format!("scale lambda = {lambda} must be positive")));
    }
    let (zc, lat) = center;
    let value = match surface {
        Surface::Plane { height, .. } => (-(height - zc).powi(2) / (4.0 * lambda)).exp(),
        Surface::Cylinder { n, radius } => {
            // the axial Gaussian integral contributes sqrt(4 pi lambda)
            orbit_weight(*n, *radius, zc, center, lambda) * (4.0 * PI * lambda).sqrt()
        }
        Surface::Sphere { n, radius, center: zs } => {
            let rule = panel_rule();
            let panels = 256;
            let mut acc = 0.0;
            for k in 0..panels {
                let a = PI * k as f64 / panels as f64;
                let b = PI * (k + 1) as f64 / panels as f64;
                acc += rule.integrate(a, b, |th| {
                    let r = radius * th.sin();
                    let z = zs + radius * th.cos();
                    orbit_weight(*n, r, z, (zc, lat), lambda) * radius
                });
            }
            acc
        }
        Surface::Profile(p) => return profile_gaussian_area(p, center, lambda),
    };
    Ok(GaussianArea { value, tail_bound: 0.0 })
}

/// Gaussian area of a profile curve. Inside the active range `w` is cubic
/// Hermite per cell; beyond the last nodes the cubic through the four
/// outermost samples is integrated up to the tip with `z - tip ~ sigma^2`.
pub fn profile_gaussian_area(p: &ProfileCurve, center: (f64, f64), lambda: f64) -> Result<GaussianArea> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidInput(format!("scale lambda = {lambda} must be positive")));
    }
    let n = p.n;
    let w = p.squared_radius();
    let (lo, hi) = p.active_range();
    let (d1, _) = p.squared_radius_derivatives();
    let h = p.dz();
    let rule = panel_rule();
    // r ds = sqrt(w + w_z^2/4) dz, so the orbit weight carries r^{n-2} sqrt(...)
    let element = |wv: f64, wz: f64, z: f64| -> f64 {
        let wv = wv.max(0.0);
        let r = wv.sqrt();
        let stretch = (wv + 0.25 * wz * wz).sqrt();
        if r == 0.0 {
            return if n == 2 { tip_weight(n, z, center, lambda) * stretch } else { 0.0 };
        }
        orbit_weight(n, r, z, center, lambda) / r * stretch
    };
    let mut acc = 0.0;
    for i in lo..hi {
        let (z0, z1) = (p.z[i], p.z[i + 1]);
        let (w0, w1) = (w[i], w[i + 1]);
        let (s0, s1) = (d1[i - lo], d1[i + 1 - lo]);
        acc += rule.integrate(z0, z1, |x| {
            let t = (x - z0) / h;
            let h00 = (1.0 + 2.0 * t) * (1.0 - t) * (1.0 - t);
            let h10 = t * (1.0 - t) * (1.0 - t);
            let h01 = t * t * (3.0 - 2.0 * t);
            let h11 = t * t * (t - 1.0);
            let wv = h00 * w0 + h10 * h * s0 + h01 * w1 + h11 * h * s1;
            let dw = (6.0 * t * (t - 1.0) * (w0 - w1)) / h + (1.0 - t) * (1.0 - 3.0 * t) * s0 + t * (3.0 * t - 2.0) * s1;
            element(wv, dw, x)
        });
    }
    let (tip_l, tip_r) = p.caps();
    let tip_piece = |nodes: [usize; 4], tip: f64| -> f64 {
        let zs = nodes.map(|i| p.z[i]);
        let ws = nodes.map(|i| w[i]);
        let cubic = |x: f64| -> (f64, f64) {
            let mut v = 0.0;
            let mut d = 0.0;
            for j in 0..4 {
                let mut b = 1.0;
                let mut db = 0.0;
                for m in 0..4 {
                    if m == j {
                        continue;
                    }
                    let f = 1.0 / (zs[j] - zs[m]);
                    db = db * (x - zs[m]) * f + b * f;
                    b *= (x - zs[m]) * f;
                }
                v += b * ws[j];
                d += db * ws[j];
            }
            (v, d)
        };
        let span = zs[0] - tip;
        rule.integrate(0.0, 1.0, |sigma| {
            let x = tip + span * sigma * sigma;
            let (wv, dw) = cubic(x);
            element(wv, dw, x) * 2.0 * span.abs() * sigma
        })
    };
    if let Some(t) = tip_l {
        acc += tip_piece([lo, lo + 1, lo + 2, lo + 3], t);
    }
    if let Some(t) = tip_r {
        acc += tip_piece([hi, hi - 1, hi - 2, hi - 3], t);
    }
    // reflecting ends: estimate the mass of a cylindrical continuation
    let mut tail = 0.0;
    let reach = 8.0 * lambda.sqrt();
    for (cond, idx, dir) in [(p.left, lo, -1.0), (p.right, hi, 1.0)] {
        if cond == EndCondition::Neumann {
            let end = p.z[idx];
            if (end - center.0).abs() < reach || dir * (center.0 - end) > 0.0 {
                let r = w[idx].sqrt();
                let far = end + dir * (reach + (end - center.0).abs() + 1.0);
                let (a, b) = if dir > 0.0 { (end, far) } else { (far, end) };
                tail += GaussLegendre::new(64).integrate(a, b, |x| orbit_weight(n, r, x, center, lambda));
            }
        }
    }
    Ok(GaussianArea { value: acc, tail_bound: tail })
}

/// `r^{n-2}`-free orbit weight at a tip (only used for `n = 2`, where the
/// area element `r ds` stays finite as `r -> 0`).
fn tip_weight(n: usize, z: f64, center: (f64, f64), lambda: f64) -> f64 {
    let (zc, lat) = center;
    let expo = -((z - zc).powi(2) + lat * lat) / (4.0 * lambda);
    (4.0 * PI * lambda).powf(-0.5 * n as f64) * sphere_area(n - 1) * expo.exp()
}

/// Result of maximising the Gaussian area over on-axis centres and scales.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyEstimate {
    pub value: f64,
    pub center: f64,
    pub lambda: f64,
    /// The maximiser sits on the boundary of the search box.
    pub boundary: bool,
}

const LOG2_SPAN: f64 = 6.0;
const COARSE: usize = 41;

fn axial_extent(s: &Surface) -> (f64, f64, f64) {
    match s {
        Surface::Plane { height, .. } => (*height, *height, 1.0),
        Surface::Sphere { radius, center, .. } => (center - radius, center + radius, *radius),
        Surface::Cylinder { radius, .. } => (0.0, 0.0, *radius),
        Surface::Profile(p) => {
            let (lo, hi) = p.active_range();
            let (l, r) = p.caps();
            (l.unwrap_or(p.z[lo]), r.unwrap_or(p.z[hi]), p.max_radius())
        }
    }
}

/// Golden-section maximisation of `f` on `[a, b]`.
fn golden_max(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// `sup` of the Gaussian area over on-axis centres and scales: a 41 x 41
/// grid over (axial position, `log2 lambda` in `[-6, 6]` relative to the
/// squared characteristic length) refined by coordinate descent.
pub fn entropy(surface: &Surface) -> Result<EntropyEstimate> {
    if let Surface::Plane { height, .. } = surface {
        return Ok(EntropyEstimate { value: 1.0, center: *height, lambda: 1.0, boundary: false });
    }
    let (zmin, zmax, len) = axial_extent(surface);
    let base = len * len;
    let eval = |z: f64, mu: f64| -> f64 {
        gaussian_area(surface, (z, 0.0), base * mu.exp2()).map_or(f64::NEG_INFINITY, |g| g.value)
    };
    let zs: Vec<f64> = if zmax > zmin {
        (0..COARSE).map(|k| zmin + (zmax - zmin) * k as f64 / (COARSE - 1) as f64).collect()
    } else {
        vec![zmin]
    };
    let mus: Vec<f64> = (0..COARSE).map(|k| -LOG2_SPAN + 2.0 * LOG2_SPAN * k as f64 / (COARSE - 1) as f64).collect();
    let (mut bz, mut bm, mut best) = (zs[0], mus[0], f64::NEG_INFINITY);
    for &z in &zs {
        for &m in &mus {
            let v = eval(z, m);
            if v > best {
                best = v;
                bz = z;
                bm = m;
            }
        }
    }
    let mut step_z = if zs.len() > 1 { zs[1] - zs[0] } else { 0.0 };
    let mut step_m = mus[1] - mus[0];
    for _ in 0..200 {
        if step_z > 0.0 {
            let a = (bz - step_z).max(zmin);
            let b = (bz + step_z).min(zmax);
            let (z, v) = golden_max(&|z| eval(z, bm), a, b, 1e-9);
            if v >= best {
                best = v;
                bz = z;
            }
        }
        let a = (bm - step_m).max(-LOG2_SPAN);
        let b = (bm + step_m).min(LOG2_SPAN);
        let (m, v) = golden_max(&|m| eval(bz, m), a, b, 1e-9);
        if v >= best {
            best = v;
            bm = m;
        }
        step_z *= 0.5;
        step_m *= 0.5;
        if step_z < 1e-8 && step_m < 1e-8 {
            break;
        }
    }
    let boundary = (bm.abs() - LOG2_SPAN).abs() < 1e-6
        || (zmax > zmin && ((bz - zmin).abs() < 1e-6 || (bz - zmax).abs() < 1e-6));
    Ok(EntropyEstimate { value: best, center: bz, lambda: base * bm.exp2(), boundary })
}

/// Gaussian densities `Theta(t) = F_{x0, t0 - t}(M_t)` along a sequence of
/// slices, with the extrapolated limit `t -> t0`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityReport {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub limit: f64,
    /// Largest step-to-step increase (negative when strictly decreasing).
    pub worst_increase: f64,
    pub worst_step: usize,
}

impl DensityReport {
    pub fn to_csv(&self) -> String {
        let mut t = CsvTable::new(&["t", "density"]);
        for (a, b) in self.times.iter().zip(&self.values) {
            t.row(&[*a, *b]);
        }
        t.finish()
    }
}

fn density_from_values(times: Vec<f64>, values: Vec<f64>, t0: f64, tol: f64) -> Result<DensityReport> {
    if values.len() < 3 {
        return Err(Error::InsufficientData("need at least three slices before t0".into()));
    }
    let mut worst_increase = f64::NEG_INFINITY;
    let mut worst_step = 0;
    for k in 1..values.len() {
        let inc = values[k] - values[k - 1];
        if inc > worst_increase {
            worst_increase = inc;
            worst_step = k;
        }
    }
    if worst_increase > tol {
        return Err(Error::Discretization { step: worst_step, increase: worst_increase });
    }
    // c0 + c1 (t0 - t) on the last decade of t0 - t
    let last = t0 - times[times.len() - 1];
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (t, v) in times.iter().zip(&values) {
        if t0 - t <= 10.0 * last {
            xs.push(t0 - t);
            ys.push(*v);
        }
    }
    if xs.len() < 3 {
        let k = times.len() - 3;
        xs = times[k..].iter().map(|t| t0 - t).collect();
        ys = values[k..].to_vec();
    }
    let (_, intercept, _) = fit_line(&xs, &ys);
    Ok(DensityReport { times, values, limit: intercept, worst_increase, worst_step })
}

/// Huisken density along explicit slices `(t, M_t)` with `t < t0`.
pub fn huisken_density(slices: &[(f64, Surface)], x0: SpaceTimeCenter, tol: f64) -> Result<DensityReport> {
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (t, s) in slices {
        if *t < x0.t0 {
            times.push(*t);
            values.push(gaussian_area(s, (x0.z0, x0.lateral), x0.t0 - t)?.value);
        }
    }
    density_from_values(times, values, x0.t0, tol)
}

/// Huisken density over the snapshots of a simulated trajectory.
pub fn huisken_density_trajectory(traj: &FlowTrajectory, x0: SpaceTimeCenter, tol: f64) -> Result<DensityReport> {
    if !(x0.t0 > traj.start_time()) {
        return Err(Error::InvalidInput("density centre must be later than the first snapshot".into()));
    }
    let mut times = Vec::new();
    let mut values = Vec::new();
    for s in &traj.snapshots {
        if s.t < x0.t0 {
            times.push(s.t);
            values.push(profile_gaussian_area(&s.profile, (x0.z0, x0.lateral), x0.t0 - s.t)?.value);
        }
    }
    density_from_values(times, values, x0.t0, tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Cylindrical,
    NotCylindrical,
    Undecidable,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Cylindrical => "cylindrical",
            Verdict::NotCylindrical => "not-cylindrical",
            Verdict::Undecidable => "undecidable",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CylindricalScaleConfig {
    pub epsilon: f64,
    /// Radius of the comparison ball in rescaled units (capped by `1/epsilon`).
    pub window: f64,
    pub j_min: i32,
    pub j_max: i32,
    /// Rescaled times sampled in `[-2, -1]`.
    pub time_samples: usize,
    /// Rescaled axial spacing of the comparison samples.
    pub sample_dz: f64,
}

impl Default for CylindricalScaleConfig {
    fn default() -> Self {
        CylindricalScaleConfig { epsilon: 0.05, window: 5.0, j_min: -12, j_max: 4, time_samples: 5, sample_dz: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CylindricalScaleReport {
    pub center: SpaceTimeCenter,
    pub epsilon: f64,
    pub window: f64,
    /// `(j, deviation, verdict)`, contiguous in `j`.
    pub verdicts: Vec<(i32, f64, Verdict)>,
    /// Smallest `j` with a cylindrical verdict.
    pub j: Option<i32>,
}

impl CylindricalScaleReport {
    /// `Z(X) = 2^J`.
    pub fn scale(&self) -> Option<f64> {
        self.j.map(|j| 2f64.powi(j))
    }

    pub fn to_csv(&self) -> String {
        let mut t = CsvTable::new(&["j", "r", "verdict", "deviation"]);
        for (j, dev, v) in &self.verdicts {
            t.raw_row(&[
                j.to_string(),
                crate::io::fmt_f64(2f64.powi(*j)),
                v.as_str().to_string(),
                crate::io::fmt_f64(*dev),
            ]);
        }
        t.finish()
    }

    pub fn summary(&self) -> String {
        let mut m = BTreeMap::new();
        m.insert("J".to_string(), self.j.map_or("none".to_string(), |j| j.to_string()));
        m.insert("Z".to_string(), self.scale().map_or("inf".to_string(), |z| z.to_string()));
        m.insert("epsilon".to_string(), self.epsilon.to_string());
        m.insert("order".to_string(), "2".to_string());
        m.insert("window".to_string(), self.window.to_string());
        format_key_values(&m)
    }
}

/// Deviation of the flow rescaled about `x` by `r` from the shrinking
/// cylinder `sqrt(-2(n-1)s)`, `s in [-2, -1]`, in value, first and second
/// axial differences; `None` if the needed times or nodes are unavailable.
fn cylinder_deviation<F: AxialFlow + ?Sized>(
    flow: &F,
    x: SpaceTimeCenter,
    r: f64,
    cfg: &CylindricalScaleConfig,
) -> Option<f64> {
    let n = flow.dimension();
    let (start, end) = flow.time_span();
    let window = cfg.window.min(1.0 / cfg.epsilon);
    if r * window < 10.0 * flow.resolution() {
        return None;
    }
    let h = cfg.sample_dz;
    let m = (window / h).ceil() as i64;
    let delta = x.lateral.abs() / r;
    let mut worst = 0.0f64;
    for k in 0..cfg.time_samples.max(2) {
        let s = -2.0 + k as f64 / (cfg.time_samples.max(2) - 1) as f64;
        let t = x.t0 + r * r * s;
        if !(t >= start && t <= end) {
            return None;
        }
        let target = (-2.0 * (n as f64 - 1.0) * s).sqrt();
        let reach = (window * window - target * target).max(0.0).sqrt();
        let samples: Vec<(f64, Option<f64>)> = (-m - 1..=m + 1)
            .map(|i| {
                let zr = i as f64 * h;
                (zr, flow.radius_sq(t, x.z0 + r * zr).map(|w| w.sqrt() / r))
            })
            .collect();
        for i in 1..samples.len() - 1 {
            let (zr, rho) = samples[i];
            if zr.abs() > reach {
                continue;
            }
            // a hole inside the ball is as far from the cylinder as it gets
            let (Some(a), Some(b), Some(c)) = (samples[i - 1].1, rho, samples[i + 1].1) else {
                return Some(f64::INFINITY);
            };
            let d0 = (b - target).abs() + delta;
            let d1 = ((c - a) / (2.0 * h)).abs();
            let d2 = ((c - 2.0 * b + a) / (h * h)).abs();
            worst = worst.max(d0).max(d1).max(d2);
        }
    }
    Some(worst)
}

/// Scans dyadic scales `r_j = 2^j` around `x` and records the cylindrical
/// verdicts and `J(X)`.
pub fn cylindrical_scale<F: AxialFlow + ?Sized>(
    flow: &F,
    x: SpaceTimeCenter,
    cfg: &CylindricalScaleConfig,
) -> Result<CylindricalScaleReport> {
    if !(cfg.epsilon > 0.0 && cfg.epsilon < 1.0) || !(cfg.window > 0.0) || cfg.j_min > cfg.j_max || !(cfg.sample_dz > 0.0) {
        return Err(Error::InvalidInput("cylindrical-scale configuration out of range".into()));
    }
    let mut verdicts = Vec::new();
    for j in cfg.j_min..=cfg.j_max {
        let r = 2f64.powi(j);
        let entry = match cylinder_deviation(flow, x, r, cfg) {
            None => (j, f64::NAN, Verdict::Undecidable),
            Some(d) if d < cfg.epsilon => (j, d, Verdict::Cylindrical),
            Some(d) => (j, d, Verdict::NotCylindrical),
        };
        verdicts.push(entry);
    }
    let j = verdicts.iter().find(|v| v.2 == Verdict::Cylindrical).map(|v| v.0);
    Ok(CylindricalScaleReport { center: x, epsilon: cfg.epsilon, window: cfg.window.min(1.0 / cfg.epsilon), verdicts, j })
}
