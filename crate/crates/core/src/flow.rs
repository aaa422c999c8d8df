//! Rotationally symmetric mean curvature flow of profile curves and the
//! renormalised flow about a space-time point.
//!
//! The solver evolves the squared radius `w = r^2`,
//!
//! ```text
//! w_t = (4 w w_zz - 2 w_z^2) / (4 w + w_z^2) - 2(n-1),
//! ```
//!
//! which is equivalent to `r_t = r_zz/(1+r_z^2) - (n-1)/r` where `r > 0` and
//! stays regular at a cap, where `r -> 0` but `w` vanishes linearly.

use crate::error::{Error, Result};
use crate::io::CsvTable;
use crate::numerics::{lagrange_uniform, solve_tridiagonal, BandMatrix, GaussLegendre};
use crate::spectral::{cylinder_radius, symmetric_grid, CylinderGraph, ModeField};

/// Nodes next to a cap that are never treated as neck candidates.
const CAP_MARGIN: usize = 5;
/// Fewest active nodes a profile may carry.
const MIN_ACTIVE: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EndCondition {
    /// The profile closes up with `r -> 0` inside the grid.
    Cap,
    /// Reflecting end at the first/last grid node (`r_z = 0`).
    Neumann,
}

/// One time slice: `r(z)` sampled on a uniform grid. Nodes outside the
/// contiguous active range `lo..=hi` lie beyond a cap and carry `r = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileCurve {
    pub n: usize,
    pub z: Vec<f64>,
    w: Vec<f64>,
    lo: usize,
    hi: usize,
    pub left: EndCondition,
    pub right: EndCondition,
}

impl ProfileCurve {
    /// Builds a profile from squared-radius samples; `w <= 0` marks nodes
    /// beyond a cap.
    pub fn from_squared_radius(
        n: usize,
        z: Vec<f64>,
        w: Vec<f64>,
        left: EndCondition,
        right: EndCondition,
    ) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidInput("surface dimension n must be at least 2".into()));
        }
        if z.len() != w.len() || z.len() < MIN_ACTIVE {
            return Err(Error::InvalidInput("profile needs matching z and r arrays of length >= 8".into()));
        }
        let h = z[1] - z[0];
        if !(h > 0.0) || z.windows(2).any(|p| ((p[1] - p[0]) - h).abs() > 1e-9 * h) {
            return Err(Error::InvalidInput("axial grid must be uniform and increasing".into()));
        }
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("radius samples must be finite".into()));
        }
        let lo = w.iter().position(|&v| v > 0.0).ok_or_else(|| Error::InvalidInput("profile is empty".into()))?;
        let hi = w.iter().rposition(|&v| v > 0.0).unwrap();
        if w[lo..=hi].iter().any(|&v| v <= 0.0) {
            return Err(Error::InvalidInput("profile has more than one component".into()));
        }
        if hi + 1 - lo < MIN_ACTIVE {
            return Err(Error::InvalidInput("profile has fewer than 8 nodes".into()));
        }
        match left {
            EndCondition::Neumann if lo != 0 => {
                return Err(Error::InvalidInput("Neumann end requires r > 0 at the first node".into()))
            }
            EndCondition::Cap if lo == 0 => {
                return Err(Error::InvalidInput("left cap does not close inside the grid".into()))
            }
            _ => {}
        }
        match right {
            EndCondition::Neumann if hi != z.len() - 1 => {
                return Err(Error::InvalidInput("Neumann end requires r > 0 at the last node".into()))
            }
            EndCondition::Cap if hi == z.len() - 1 => {
                return Err(Error::InvalidInput("right cap does not close inside the grid".into()))
            }
            _ => {}
        }
        let mut w = w;
        for (i, v) in w.iter_mut().enumerate() {
            if i < lo || i > hi {
                *v = 0.0;
            }
        }
        Ok(ProfileCurve { n, z, w, lo, hi, left, right })
    }

    /// Samples `r = f(z)`; non-positive or NaN values mark nodes beyond a cap.
    pub fn from_fn(
        n: usize,
        z: Vec<f64>,
        f: impl Fn(f64) -> f64,
        left: EndCondition,
        right: EndCondition,
    ) -> Result<Self> {
        let w = z
            .iter()
            .map(|&x| {
                let r = f(x);
                if r > 0.0 { r * r } else { 0.0 }
            })
            .collect();
        Self::from_squared_radius(n, z, w, left, right)
    }

    /// Round sphere of radius `radius` centred at the origin.
    pub fn sphere(n: usize, radius: f64, dz: f64) -> Result<Self> {
        let z = symmetric_grid(radius + 6.0 * dz, dz);
        let w = z.iter().map(|&x| radius * radius - x * x).collect();
        Self::from_squared_radius(n, z, w, EndCondition::Cap, EndCondition::Cap)
    }

    /// Cylinder segment `|z| <= half_length` with reflecting ends.
    pub fn cylinder(n: usize, radius: f64, half_length: f64, dz: f64) -> Result<Self> {
        let z = symmetric_grid(half_length, dz);
        let w = vec![radius * radius; z.len()];
        Self::from_squared_radius(n, z, w, EndCondition::Neumann, EndCondition::Neumann)
    }

    /// The fixed dumbbell datum.
    pub fn dumbbell(n: usize, dz: f64, p: &DumbbellParams) -> Result<Self> {
        p.validate()?;
        let z = symmetric_grid(p.halflength + p.bulge + 6.0 * dz, dz);
        let w = z.iter().map(|&x| p.squared_radius(x)).collect();
        Self::from_squared_radius(n, z, w, EndCondition::Cap, EndCondition::Cap)
    }

    pub fn dz(&self) -> f64 {
        self.z[1] - self.z[0]
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn active_range(&self) -> (usize, usize) {
        (self.lo, self.hi)
    }

    pub fn is_active(&self, i: usize) -> bool {
        i >= self.lo && i <= self.hi
    }

    pub fn squared_radius(&self) -> &[f64] {
        &self.w
    }

    /// Radius samples, zero beyond the caps.
    pub fn radius(&self) -> Vec<f64> {
        self.w.iter().map(|v| v.max(0.0).sqrt()).collect()
    }

    pub fn max_radius(&self) -> f64 {
        self.w[self.lo..=self.hi].iter().fold(0.0f64, |m, &v| m.max(v)).sqrt()
    }

    /// Node of the largest radius.
    pub fn argmax_radius(&self) -> usize {
        let mut best = self.lo;
        for i in self.lo..=self.hi {
            if self.w[i] > self.w[best] {
                best = i;
            }
        }
        best
    }

    /// Ghost value one node beyond the active range on either side.
    fn ghost(&self, w: &[f64], left: bool) -> f64 {
        if left {
            let l = self.lo;
            match self.left {
                EndCondition::Neumann => w[l + 1],
                EndCondition::Cap => 4.0 * w[l] - 6.0 * w[l + 1] + 4.0 * w[l + 2] - w[l + 3],
            }
        } else {
            let h = self.hi;
            match self.right {
                EndCondition::Neumann => w[h - 1],
                EndCondition::Cap => 4.0 * w[h] - 6.0 * w[h - 1] + 4.0 * w[h - 2] - w[h - 3],
            }
        }
    }

    /// `w` over `lo-1 ..= hi+1` including the two ghost values.
    fn extended(&self) -> Vec<f64> {
        let mut e = Vec::with_capacity(self.hi - self.lo + 3);
        e.push(self.ghost(&self.w, true));
        e.extend_from_slice(&self.w[self.lo..=self.hi]);
        e.push(self.ghost(&self.w, false));
        e
    }

    /// `(w_z, w_zz)` at every active node, second-order central.
    pub fn squared_radius_derivatives(&self) -> (Vec<f64>, Vec<f64>) {
        let e = self.extended();
        let h = self.dz();
        let m = self.hi - self.lo + 1;
        let mut d1 = Vec::with_capacity(m);
        let mut d2 = Vec::with_capacity(m);
        for k in 1..=m {
            d1.push((e[k + 1] - e[k - 1]) / (2.0 * h));
            d2.push((e[k + 1] - 2.0 * e[k] + e[k - 1]) / (h * h));
        }
        (d1, d2)
    }

    /// Mean curvature at the active nodes (regular through the caps):
    /// `H = 2(n-1)/sqrt(4w + w_z^2) - 2(2 w w_zz - w_z^2)/(4w + w_z^2)^{3/2}`.
    pub fn mean_curvature(&self) -> Vec<f64> {
        let (d1, d2) = self.squared_radius_derivatives();
        let m = self.n as f64 - 1.0;
        (self.lo..=self.hi)
            .zip(d1.iter().zip(&d2))
            .map(|(i, (&wz, &wzz))| {
                let w = self.w[i];
                let q = 4.0 * w + wz * wz;
                2.0 * m / q.sqrt() - 2.0 * (2.0 * w * wzz - wz * wz) / (q * q.sqrt())
            })
            .collect()
    }

    /// Smallest interior local minimum of `r` away from the caps:
    /// `(node, radius)`. `None` for profiles without a neck (e.g. spheres).
    pub fn neck(&self) -> Option<(usize, f64)> {
        let first = if self.left == EndCondition::Cap { self.lo + CAP_MARGIN } else { self.lo };
        let last = if self.right == EndCondition::Cap { self.hi.checked_sub(CAP_MARGIN)? } else { self.hi };
        let mut best: Option<(usize, f64)> = None;
        for i in first..=last.min(self.hi) {
            let left = if i == 0 { self.w[1] } else if i == self.lo { self.ghost(&self.w, true) } else { self.w[i - 1] };
            let right = if i == self.hi { self.ghost(&self.w, false) } else { self.w[i + 1] };
            let v = self.w[i];
            if v <= left && v <= right && best.map_or(true, |(_, b)| v < b) {
                best = Some((i, v));
            }
        }
        best.map(|(i, v)| (i, v.sqrt()))
    }

    /// Axial position of the neck refined by a parabola through the
    /// neighbouring squared radii.
    pub fn neck_position(&self) -> Option<f64> {
        let (i, _) = self.neck()?;
        if i <= self.lo || i >= self.hi {
            return Some(self.z[i]);
        }
        let (a, b, c) = (self.w[i - 1], self.w[i], self.w[i + 1]);
        let denom = a - 2.0 * b + c;
        let shift = if denom > 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
        Some(self.z[i] + shift.clamp(-0.5, 0.5) * self.dz())
    }

    /// Tip heights `(left, right)` of declared caps: roots of the cubic
    /// through the four outermost active squared radii.
    pub fn caps(&self) -> (Option<f64>, Option<f64>) {
        let h = self.dz();
        let root = |zs: [f64; 4], ws: [f64; 4], towards: f64| -> f64 {
            let p = |x: f64| {
                let mut acc = 0.0;
                for j in 0..4 {
                    let mut b = 1.0;
                    for m in 0..4 {
                        if m != j {
                            b *= (x - zs[m]) / (zs[j] - zs[m]);
                        }
                    }
                    acc += b * ws[j];
                }
                acc
            };
            let (mut a, mut b) = (zs[0], zs[0] + towards * 2.0 * h);
            if p(b) > 0.0 {
                // no sign change within two cells: fall back to the secant
                let slope = (ws[0] - ws[1]) / h;
                return zs[0] + towards * ws[0] / slope.max(f64::MIN_POSITIVE);
            }
            for _ in 0..60 {
                let m = 0.5 * (a + b);
                if p(m) > 0.0 {
                    a = m;
                } else {
                    b = m;
                }
            }
            0.5 * (a + b)
        };
        let left = (self.left == EndCondition::Cap).then(|| {
            let l = self.lo;
            root(
                [self.z[l], self.z[l + 1], self.z[l + 2], self.z[l + 3]],
                [self.w[l], self.w[l + 1], self.w[l + 2], self.w[l + 3]],
                -1.0,
            )
        });
        let right = (self.right == EndCondition::Cap).then(|| {
            let r = self.hi;
            root(
                [self.z[r], self.z[r - 1], self.z[r - 2], self.z[r - 3]],
                [self.w[r], self.w[r - 1], self.w[r - 2], self.w[r - 3]],
                1.0,
            )
        });
        (left, right)
    }

    /// Largest admissible semi-implicit step:
    /// `min(0.2 dz^2, 0.1 r_neck^2/(n-1))`.
    pub fn stability_bound(&self) -> f64 {
        let h = self.dz();
        let r = self.neck().map_or_else(|| self.max_radius(), |(_, r)| r);
        (0.2 * h * h).min(0.1 * r * r / (self.n as f64 - 1.0))
    }

    /// Squared radius at an arbitrary height by cubic interpolation over the
    /// active nodes; `None` outside `[z_lo, z_hi]`.
    pub fn squared_radius_at(&self, z: f64) -> Option<f64> {
        let (zl, zh) = (self.z[self.lo], self.z[self.hi]);
        if !(z >= zl && z <= zh) {
            return None;
        }
        let v = lagrange_uniform(zl, self.dz(), &self.w[self.lo..=self.hi], z, 4);
        Some(v.max(0.0))
    }
}

/// Parameters of the dumbbell datum
/// `r = neck + (bulge - neck)(1 - cos(pi z / L))^2 / 4` on `|z| <= L`,
/// closed by hemispheres of radius `bulge` centred at `z = +-L`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DumbbellParams {
    pub neck: f64,
    pub bulge: f64,
    pub halflength: f64,
}

impl Default for DumbbellParams {
    fn default() -> Self {
        DumbbellParams { neck: 0.35, bulge: 1.0, halflength: 4.0 }
    }
}

impl DumbbellParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.neck > 0.0 && self.bulge > self.neck && self.halflength > 0.0) {
            return Err(Error::InvalidInput("dumbbell needs 0 < neck < bulge and halflength > 0".into()));
        }
        Ok(())
    }

    pub fn radius(&self, z: f64) -> f64 {
        self.squared_radius(z).max(0.0).sqrt()
    }

    pub fn squared_radius(&self, z: f64) -> f64 {
        let a = z.abs();
        if a <= self.halflength {
            let c = 1.0 - (std::f64::consts::PI * z / self.halflength).cos();
            let r = self.neck + (self.bulge - self.neck) * c * c / 4.0;
            r * r
        } else {
            let d = a - self.halflength;
            self.bulge * self.bulge - d * d
        }
    }
}

/// One semi-implicit step: the diffusion coefficient `4w/(4w + w_z^2)` is
/// frozen and the second difference taken implicitly, the remaining terms
/// explicitly. Cap ghosts come from cubic extrapolation, which gives the
/// one-sided second-order stencil at the last active node.
pub fn step_profile_flow(p: &ProfileCurve, dt: f64) -> Result<ProfileCurve> {
    let threshold = 10.0 * p.dz();
    if let Some((_, r)) = p.neck() {
        if r < threshold {
            return Err(Error::NeckPinch { radius: r, threshold });
        }
    }
    let bound = p.stability_bound();
    if !(dt > 0.0) || dt > bound * (1.0 + 1e-12) {
        return Err(Error::RejectedStep { dt, bound });
    }
    let h = p.dz();
    let (lo, hi) = (p.lo, p.hi);
    let m = hi - lo + 1;
    let e = p.extended();
    let mut mat = BandMatrix::zeros(m, 3, 3);
    let mut rhs = vec![0.0; m];
    let reaction = 2.0 * (p.n as f64 - 1.0);
    for k in 0..m {
        let w = e[k + 1];
        let wz = (e[k + 2] - e[k]) / (2.0 * h);
        let q = 4.0 * w + wz * wz;
        let c = dt * 4.0 * w / q / (h * h);
        rhs[k] = w + dt * (-2.0 * wz * wz / q - reaction);
        mat.add(k, k, 1.0 + 2.0 * c);
        // left neighbour
        if k > 0 {
            mat.add(k, k - 1, -c);
        } else {
            match p.left {
                EndCondition::Neumann => mat.add(k, k + 1, -c),
                EndCondition::Cap => {
                    for (j, coef) in [4.0, -6.0, 4.0, -1.0].into_iter().enumerate() {
                        mat.add(k, k + j, -c * coef);
                    }
                }
            }
        }
        // right neighbour
        if k + 1 < m {
            mat.add(k, k + 1, -c);
        } else {
            match p.right {
                EndCondition::Neumann => mat.add(k, k - 1, -c),
                EndCondition::Cap => {
                    for (j, coef) in [4.0, -6.0, 4.0, -1.0].into_iter().enumerate() {
                        mat.add(k, k - j, -c * coef);
                    }
                }
            }
        }
    }
    mat.solve(&mut rhs);

    let mut w = vec![0.0; p.len()];
    w[lo..=hi].copy_from_slice(&rhs);
    let (mut nlo, mut nhi) = (lo, hi);
    if p.left == EndCondition::Cap {
        while nlo <= nhi && w[nlo] <= 0.0 {
            w[nlo] = 0.0;
            nlo += 1;
        }
    }
    if p.right == EndCondition::Cap {
        while nhi >= nlo && w[nhi] <= 0.0 {
            w[nhi] = 0.0;
            nhi -= 1;
        }
    }
    if nhi < nlo + MIN_ACTIVE - 1 {
        return Err(Error::NeckPinch { radius: 0.0, threshold });
    }
    if let Some(bad) = (nlo..=nhi).find(|&i| w[i] <= 0.0) {
        return Err(Error::NeckPinch { radius: w[bad].max(0.0).sqrt(), threshold });
    }
    let mut next = ProfileCurve { n: p.n, z: p.z.clone(), w, lo: nlo, hi: nhi, left: p.left, right: p.right };
    // a cap may advance by one node if the extrapolated profile is positive there
    if next.left == EndCondition::Cap && next.lo >= 2 {
        let g = next.ghost(&next.w, true);
        if g > 0.0 {
            next.lo -= 1;
            next.w[next.lo] = g;
        }
    }
    if next.right == EndCondition::Cap && next.hi + 2 < next.len() {
        let g = next.ghost(&next.w, false);
        if g > 0.0 {
            next.hi += 1;
            next.w[next.hi] = g;
        }
    }
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    TimeLimit,
    NeckRadiusThreshold,
    CapCollapse,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::TimeLimit => "time-limit",
            Termination::NeckRadiusThreshold => "neck-radius-threshold",
            Termination::CapCollapse => "cap-collapse",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowConfig {
    pub t_max: f64,
    /// Neck radius at which the run stops; `None` means `10 dz`.
    pub pinch_threshold: Option<f64>,
    /// A snapshot is stored every this many steps (the first and last
    /// slices are always kept).
    pub snapshot_every: usize,
    pub dt_min: f64,
    pub max_steps: usize,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig { t_max: 10.0, pinch_threshold: None, snapshot_every: 10, dt_min: 1e-14, max_steps: 5_000_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub dt: f64,
    /// `max |H|` over the slice after the step.
    pub curvature: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub profile: ProfileCurve,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowTrajectory {
    pub snapshots: Vec<Snapshot>,
    pub steps: Vec<StepRecord>,
    pub termination: Termination,
    /// Extrapolated first singular time (neck pinch or extinction).
    pub singular_time: Option<f64>,
    /// Pinch height when the neck threshold fired.
    pub pinch_z: Option<f64>,
}

/// Returned when the step size collapses; carries the slices computed so far.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowFailure {
    pub error: Error,
    pub partial: Vec<Snapshot>,
}

impl std::fmt::Display for FlowFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} after {} snapshots", self.error, self.partial.len())
    }
}

impl std::error::Error for FlowFailure {}

/// Zero of a decreasing, asymptotically linear history `y(t)`: secant
/// estimates from lags `k` and `2k` combined by Richardson extrapolation.
fn extrapolate_zero(ts: &[f64], ys: &[f64]) -> Option<f64> {
    let last = ts.len().checked_sub(1)?;
    let (t_n, y_n) = (ts[last], ys[last]);
    let secant = |j: usize| {
        let slope = (ys[j] - y_n) / (ts[j] - t_n);
        (slope < 0.0).then(|| t_n - y_n / slope)
    };
    // lag k: the history value has grown to about 1.5 y_n
    let k = (0..last).rev().find(|&j| ys[j] >= 1.5 * y_n).map(|j| last - j)?;
    let t1 = secant(last - k)?;
    match last.checked_sub(2 * k) {
        Some(j2) => secant(j2).map(|t2| 2.0 * t1 - t2).or(Some(t1)),
        None => Some(t1),
    }
}

/// Integrates until the neck pinches, the surface collapses or `t_max`.
pub fn run_to_singularity(p0: &ProfileCurve, cfg: &FlowConfig) -> std::result::Result<FlowTrajectory, FlowFailure> {
    let fail = |error: Error, partial: Vec<Snapshot>| FlowFailure { error, partial };
    let threshold = cfg.pinch_threshold.unwrap_or(10.0 * p0.dz());
    if !(threshold > 0.0) || !(cfg.t_max > 0.0) || cfg.snapshot_every == 0 {
        return Err(fail(Error::InvalidInput("flow thresholds must be positive".into()), Vec::new()));
    }
    if let Some((_, r)) = p0.neck() {
        if r < threshold {
            return Err(fail(Error::NeckPinch { radius: r, threshold }, Vec::new()));
        }
    }
    let mut snapshots = vec![Snapshot { t: 0.0, profile: p0.clone() }];
    let mut steps = Vec::new();
    let mut hist_t = vec![0.0];
    let mut hist_neck = vec![p0.neck().map_or(f64::NAN, |(_, r)| r * r)];
    let mut hist_max = vec![p0.max_radius().powi(2)];
    let mut p = p0.clone();
    let mut t = 0.0;
    let mut count = 0usize;
    let termination = loop {
        if p.max_radius() < 2.0 * threshold {
            break Termination::CapCollapse;
        }
        if p.neck().map_or(false, |(_, r)| r < threshold) {
            break Termination::NeckRadiusThreshold;
        }
        // a remainder below dt_min is accumulated rounding, not a stiff step
        if cfg.t_max - t <= cfg.dt_min.max(1e-14 * cfg.t_max) {
            break Termination::TimeLimit;
        }
        if count >= cfg.max_steps {
            snapshots.push(Snapshot { t, profile: p.clone() });
            return Err(fail(Error::NonConvergence { dt: 0.0, t }, snapshots));
        }
        let bound = p.stability_bound();
        let last = bound >= cfg.t_max - t;
        let dt = if last { cfg.t_max - t } else { bound };
        if dt < cfg.dt_min {
            snapshots.push(Snapshot { t, profile: p.clone() });
            return Err(fail(Error::NonConvergence { dt, t }, snapshots));
        }
        p = match step_profile_flow(&p, dt) {
            Ok(q) => q,
            Err(Error::NeckPinch { .. }) => break Termination::NeckRadiusThreshold,
            Err(e) => return Err(fail(e, snapshots)),
        };
        t = if last { cfg.t_max } else { t + dt };
        count += 1;
        let curvature = p.mean_curvature().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        steps.push(StepRecord { t, dt, curvature });
        hist_t.push(t);
        hist_neck.push(p.neck().map_or(f64::NAN, |(_, r)| r * r));
        hist_max.push(p.max_radius().powi(2));
        if count % cfg.snapshot_every == 0 {
            snapshots.push(Snapshot { t, profile: p.clone() });
        }
    };
    if snapshots.last().map_or(true, |s| s.t < t) {
        snapshots.push(Snapshot { t, profile: p.clone() });
    }
    let (singular_time, pinch_z) = match termination {
        Termination::NeckRadiusThreshold => {
            let start = hist_neck.iter().rposition(|v| v.is_nan()).map_or(0, |i| i + 1);
            (extrapolate_zero(&hist_t[start..], &hist_neck[start..]), p.neck_position())
        }
        Termination::CapCollapse => (extrapolate_zero(&hist_t, &hist_max), None),
        Termination::TimeLimit => (None, None),
    };
    Ok(FlowTrajectory { snapshots, steps, termination, singular_time, pinch_z })
}

impl FlowTrajectory {
    pub fn start_time(&self) -> f64 {
        self.snapshots[0].t
    }

    pub fn end_time(&self) -> f64 {
        self.snapshots[self.snapshots.len() - 1].t
    }

    pub fn final_profile(&self) -> &ProfileCurve {
        &self.snapshots[self.snapshots.len() - 1].profile
    }

    /// Long-format CSV `t,z,r` over active nodes of every snapshot.
    pub fn to_csv(&self) -> String {
        let mut t = CsvTable::new(&["t", "z", "r"]);
        for s in &self.snapshots {
            let (lo, hi) = s.profile.active_range();
            for i in lo..=hi {
                t.row(&[s.t, s.profile.z[i], s.profile.w[i].sqrt()]);
            }
        }
        t.finish()
    }

    /// Step log CSV `t,dt,max_abs_H`.
    pub fn steps_csv(&self) -> String {
        let mut t = CsvTable::new(&["t", "dt", "max_abs_H"]);
        for s in &self.steps {
            t.row(&[s.t, s.dt, s.curvature]);
        }
        t.finish()
    }

    /// Index `k` with `t_k <= t <= t_{k+1}`.
    fn bracket(&self, t: f64) -> Option<usize> {
        let n = self.snapshots.len();
        if !(t >= self.start_time() && t <= self.end_time()) {
            return None;
        }
        if n == 1 {
            return Some(0);
        }
        let k = self.snapshots.partition_point(|s| s.t <= t);
        Some(k.saturating_sub(1).min(n - 2))
    }
}

/// A rotationally symmetric flow that can be sampled pointwise.
pub trait AxialFlow {
    fn dimension(&self) -> usize;
    /// Times for which slices are available.
    fn time_span(&self) -> (f64, f64);
    /// Squared radius of the time-`t` slice at height `z`; `None` off the slice.
    fn radius_sq(&self, t: f64, z: f64) -> Option<f64>;
    /// Axial spacing of the underlying data; zero for analytic flows.
    fn resolution(&self) -> f64 {
        0.0
    }
}

impl AxialFlow for FlowTrajectory {
    fn dimension(&self) -> usize {
        self.snapshots[0].profile.n
    }

    fn time_span(&self) -> (f64, f64) {
        (self.start_time(), self.end_time())
    }

    fn resolution(&self) -> f64 {
        self.snapshots[0].profile.dz()
    }

    /// Linear in time between snapshots (the squared radius is close to
    /// linear in time near a neck), cubic in space.
    fn radius_sq(&self, t: f64, z: f64) -> Option<f64> {
        let k = self.bracket(t)?;
        let a = &self.snapshots[k];
        let wa = a.profile.squared_radius_at(z)?;
        if self.snapshots.len() == 1 || t == a.t {
            return Some(wa);
        }
        let b = &self.snapshots[k + 1];
        let wb = b.profile.squared_radius_at(z)?;
        let s = (t - a.t) / (b.t - a.t);
        Some(wa * (1.0 - s) + wb * s)
    }
}

/// The self-similarly shrinking cylinder that becomes extinct at `t_ext`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShrinkingCylinder {
    pub n: usize,
    pub t_ext: f64,
}

impl AxialFlow for ShrinkingCylinder {
    fn dimension(&self) -> usize {
        self.n
    }

    fn time_span(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, self.t_ext)
    }

    fn radius_sq(&self, t: f64, _z: f64) -> Option<f64> {
        (t < self.t_ext).then(|| 2.0 * (self.n as f64 - 1.0) * (self.t_ext - t))
    }
}

/// Space-time centre of a rescaling: the point `(lateral e_1, z0)` at time `t0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceTimeCenter {
    pub z0: f64,
    pub t0: f64,
    pub lateral: f64,
}

impl SpaceTimeCenter {
    pub fn on_axis(z0: f64, t0: f64) -> Self {
        SpaceTimeCenter { z0, t0, lateral: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RescaleConfig {
    /// Half-width of the rescaled axial window.
    pub half_width: f64,
    pub dz: f64,
}

impl Default for RescaleConfig {
    fn default() -> Self {
        RescaleConfig { half_width: 12.0, dz: 0.02 }
    }
}

/// Slices of `e^{tau/2}(M_{t0 - e^{-tau}} - x0)` written as graphs over the
/// shrinking-cylinder radius.
#[derive(Debug, Clone, PartialEq)]
pub struct RenormalizedTrajectory {
    pub center: SpaceTimeCenter,
    pub tau: Vec<f64>,
    pub times: Vec<f64>,
    pub graphs: Vec<CylinderGraph>,
    /// Largest `Z` with `|u0| < 0.1` and `|u0'| < 0.1` on `|z| <= Z`
    /// (zero when the centre node already violates the band).
    pub rho: Vec<f64>,
    /// Nodes per slice whose values were clamped into the validity band.
    pub clamped: Vec<usize>,
}

/// Band within which deviations from the graphical region are clamped.
const GRAPH_BAND: f64 = 0.1;

/// Evenly spaced `tau` samples on `[lo, hi]`.
pub fn tau_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count <= 1 {
        return vec![lo];
    }
    (0..count).map(|k| lo + (hi - lo) * k as f64 / (count - 1) as f64).collect()
}

/// Mode-0 and mode-1 (along `e_1`) parts of the radial function of a circle
/// of radius `rho` whose centre sits at `-delta e_1` from the axis:
/// `rho(w) = -delta w_1 + sqrt(rho^2 - delta^2 (1 - w_1^2))`.
fn offset_circle_modes(n: usize, rho: f64, delta: f64, rule: &GaussLegendre) -> Option<(f64, f64)> {
    if delta == 0.0 {
        return Some((rho, 0.0));
    }
    if delta.abs() >= rho {
        return None;
    }
    // average over S^{n-1} against sin^{n-2} phi, w_1 = cos phi
    let weight = |phi: f64| phi.sin().powi(n as i32 - 2);
    let radial = |phi: f64| {
        let c = phi.cos();
        -delta * c + (rho * rho - delta * delta * (1.0 - c * c)).sqrt()
    };
    let pi = std::f64::consts::PI;
    let norm = rule.integrate(0.0, pi, weight);
    let m0 = rule.integrate(0.0, pi, |p| radial(p) * weight(p)) / norm;
    let m1 = rule.integrate(0.0, pi, |p| radial(p) * p.cos() * weight(p)) / norm;
    // <w_1^2> = 1/n on S^{n-1}
    Some((m0, m1 * n as f64))
}

/// Rescales `flow` about `center` at each `tau`, regridding on
/// `|z| <= cfg.half_width`.
pub fn rescale_about<F: AxialFlow + ?Sized>(
    flow: &F,
    center: SpaceTimeCenter,
    taus: &[f64],
    cfg: &RescaleConfig,
) -> Result<RenormalizedTrajectory> {
    let n = flow.dimension();
    let big_r = cylinder_radius(n);
    let (start, end) = flow.time_span();
    if end.is_finite() && center.t0 < end - 1e-12 {
        return Err(Error::InvalidInput(format!("center time {} precedes the last slice {end}", center.t0)));
    }
    if taus.windows(2).any(|p| p[1] <= p[0]) {
        return Err(Error::InvalidInput("tau samples must increase".into()));
    }
    let grid = symmetric_grid(cfg.half_width, cfg.dz);
    let h = grid[1] - grid[0];
    let mid = grid.len() / 2;
    let rule = GaussLegendre::new(48);
    let mut out = RenormalizedTrajectory {
        center,
        tau: Vec::new(),
        times: Vec::new(),
        graphs: Vec::new(),
        rho: Vec::new(),
        clamped: Vec::new(),
    };
    for &tau in taus {
        let t = center.t0 - (-tau).exp();
        if !(t >= start && t <= end) {
            return Err(Error::Range { t, start, end });
        }
        let s = (-0.5 * tau).exp();
        let delta = center.lateral / s;
        let mut u0 = vec![f64::NAN; grid.len()];
        let mut u1 = vec![0.0; grid.len()];
        for (k, &zr) in grid.iter().enumerate() {
            let Some(w) = flow.radius_sq(t, center.z0 + s * zr) else { continue };
            if let Some((m0, m1)) = offset_circle_modes(n, w.sqrt() / s, delta, &rule) {
                u0[k] = m0 - big_r;
                u1[k] = m1;
            }
        }
        // graphical radius: walk outwards from the centre on both sides
        let ok = |k: usize| -> bool {
            if !u0[k].is_finite() || u0[k].abs() >= GRAPH_BAND {
                return false;
            }
            let (a, b) = (k.saturating_sub(1), (k + 1).min(grid.len() - 1));
            if !u0[a].is_finite() || !u0[b].is_finite() {
                return false;
            }
            ((u0[b] - u0[a]) / ((b - a) as f64 * h)).abs() < GRAPH_BAND
        };
        let mut right = mid;
        while right + 1 < grid.len() && ok(right + 1) {
            right += 1;
        }
        let mut left = mid;
        while left > 0 && ok(left - 1) {
            left -= 1;
        }
        let rho = if ok(mid) { (grid[right]).min(-grid[left]) } else { 0.0 };
        let graphical = grid
            .iter()
            .zip(&u0)
            .all(|(z, u)| z.abs() > 1.0 || (u.is_finite() && u.abs() < big_r));
        if !graphical {
            return Err(Error::NotYetCylindrical { tau });
        }
        let cap = 0.9 * big_r;
        let mut clamped = 0;
        for k in 0..grid.len() {
            if !u0[k].is_finite() {
                u0[k] = -cap;
                u1[k] = 0.0;
                clamped += 1;
                continue;
            }
            let total = u0[k].abs() + u1[k].abs();
            if total > cap {
                u0[k] *= cap / total;
                u1[k] *= cap / total;
                clamped += 1;
            }
        }
        let mut mode1 = vec![vec![0.0; grid.len()]; n];
        mode1[0] = u1;
        let field = ModeField { n, z: grid.clone(), mode0: u0, mode1 };
        out.graphs.push(CylinderGraph::new(field)?);
        out.tau.push(tau);
        out.times.push(t);
        out.rho.push(rho);
        out.clamped.push(clamped);
    }
    Ok(out)
}

/// Tridiagonal rows of the discrete `L = d^2/dz^2 - (z/2) d/dz + shift`.
fn l_rows(z: &[f64], h: f64, shift: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let m = z.len();
    let mut sub = vec![0.0; m];
    let mut diag = vec![0.0; m];
    let mut sup = vec![0.0; m];
    for j in 1..m - 1 {
        sub[j] = 1.0 / (h * h) + z[j] / (4.0 * h);
        diag[j] = -2.0 / (h * h) + shift;
        sup[j] = 1.0 / (h * h) - z[j] / (4.0 * h);
    }
    (sub, diag, sup)
}

/// Crank-Nicolson step of `v_tau = L v + g` with frozen end values.
fn cn_step(v: &[f64], g: &[f64], z: &[f64], h: f64, shift: f64, dtau: f64) -> Vec<f64> {
    let m = v.len();
    let (sub, diag, sup) = l_rows(z, h, shift);
    let mut a = vec![0.0; m];
    let mut b = vec![1.0; m];
    let mut c = vec![0.0; m];
    let mut rhs = v.to_vec();
    for j in 1..m - 1 {
        let lv = sub[j] * v[j - 1] + diag[j] * v[j] + sup[j] * v[j + 1];
        rhs[j] = v[j] + 0.5 * dtau * lv + dtau * g[j];
        a[j] = -0.5 * dtau * sub[j];
        b[j] = 1.0 - 0.5 * dtau * diag[j];
        c[j] = -0.5 * dtau * sup[j];
    }
    solve_tridiagonal(&a, &b, &c, &mut rhs);
    rhs
}

/// One step of the renormalised graph flow. Mode 0 follows the full
/// rotationally symmetric equation (linear part Crank-Nicolson, remainder
/// explicit), mode 1 the linearisation; both keep their end values.
pub fn step_renormalized(u: &CylinderGraph, dtau: f64) -> Result<CylinderGraph> {
    let f = u.field();
    let n = f.n;
    let big_r = cylinder_radius(n);
    let max0 = f.mode0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(max0 < 0.5 * big_r) {
        return Err(Error::BlowUp { max_dev: max0 });
    }
    if !(dtau > 0.0) {
        return Err(Error::InvalidInput("dtau must be positive".into()));
    }
    if f.len() < 5 {
        return Err(Error::Stencil { nodes: f.len() });
    }
    let h = f.dz();
    let m = f.len();
    let m1 = n as f64 - 1.0;
    let mut g = vec![0.0; m];
    for j in 1..m - 1 {
        let v = f.mode0[j];
        let vz = (f.mode0[j + 1] - f.mode0[j - 1]) / (2.0 * h);
        let vzz = (f.mode0[j + 1] - 2.0 * v + f.mode0[j - 1]) / (h * h);
        // F(R + v) - L v, arranged to vanish exactly at v = 0
        g[j] = -vzz * vz * vz / (1.0 + vz * vz) - m1 * v * v / (big_r * big_r * (big_r + v));
    }
    let mode0 = cn_step(&f.mode0, &g, &f.z, h, 1.0, dtau);
    let zero = vec![0.0; m];
    let mode1 = f.mode1.iter().map(|c| cn_step(c, &zero, &f.z, h, 0.5, dtau)).collect();
    let next = ModeField { n, z: f.z.clone(), mode0, mode1 };
    let max0 = next.mode0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(max0 < 0.5 * big_r) || next.sup_bound() >= big_r {
        return Err(Error::BlowUp { max_dev: max0 });
    }
    CylinderGraph::new(next)
}

/// `steps` consecutive renormalised steps.
pub fn evolve_renormalized(u: &CylinderGraph, dtau: f64, steps: usize) -> Result<CylinderGraph> {
    let mut v = u.clone();
    for _ in 0..steps {
        v = step_renormalized(&v, dtau)?;
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cylinder_step_is_exact() {
        for n in [2usize, 3, 4] {
            let p = ProfileCurve::cylinder(n, 1.3, 2.0, 0.01).unwrap();
            let dt = p.stability_bound();
            let q = step_profile_flow(&p, dt).unwrap();
            let want = (1.69 - 2.0 * (n as f64 - 1.0) * dt).sqrt();
            for r in q.radius() {
                assert!((r - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn rejects_oversized_step() {
        let p = ProfileCurve::cylinder(3, 1.0, 1.0, 0.01).unwrap();
        let b = p.stability_bound();
        assert!(matches!(step_profile_flow(&p, 2.0 * b), Err(Error::RejectedStep { .. })));
    }

    #[test]
    fn sphere_step_keeps_quadratic_profile() {
        let p = ProfileCurve::sphere(3, 1.0, 0.01).unwrap();
        let dt = p.stability_bound();
        let q = step_profile_flow(&p, dt).unwrap();
        let r2 = 1.0 - 6.0 * dt;
        let (lo, hi) = q.active_range();
        for i in lo..=hi {
            let want = r2 - q.z[i] * q.z[i];
            assert!((q.squared_radius()[i] - want).abs() < 1e-12, "node {i}");
        }
        let (l, r) = q.caps();
        assert!((r.unwrap() - r2.sqrt()).abs() < 1e-9);
        assert!((l.unwrap() + r2.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn mean_curvature_of_sphere_and_cylinder() {
        let p = ProfileCurve::sphere(3, 2.0, 0.01).unwrap();
        for h in p.mean_curvature() {
            assert!((h - 1.5).abs() < 1e-9);
        }
        let c = ProfileCurve::cylinder(4, 0.5, 1.0, 0.01).unwrap();
        for h in c.mean_curvature() {
            assert!((h - 6.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dumbbell_datum_shape() {
        let d = DumbbellParams::default();
        assert_eq!(d.radius(0.0), 0.35);
        assert!((d.radius(4.0) - 1.0).abs() < 1e-15);
        assert!((d.radius(4.5) - 0.75f64.sqrt()).abs() < 1e-15);
        let p = ProfileCurve::dumbbell(3, 0.02, &d).unwrap();
        let (i, r) = p.neck().unwrap();
        assert!(p.z[i].abs() < 1e-12);
        assert!((r - 0.35).abs() < 1e-12);
        let (l, rr) = p.caps();
        assert!((rr.unwrap() - 5.0).abs() < 1e-3 && (l.unwrap() + 5.0).abs() < 1e-3);
    }

    #[test]
    fn sphere_runs_to_extinction() {
        let p = ProfileCurve::sphere(2, 1.0, 0.01).unwrap();
        let traj = run_to_singularity(&p, &FlowConfig::default()).unwrap();
        assert_eq!(traj.termination, Termination::CapCollapse);
        let t = traj.singular_time.unwrap();
        assert!((t - 0.25).abs() < 1e-3 * 0.25, "t* = {t}");
    }

    #[test]
    fn neumann_cylinder_runs_to_extinction() {
        let p = ProfileCurve::cylinder(3, 1.0, 1.0, 0.01).unwrap();
        let traj = run_to_singularity(&p, &FlowConfig::default()).unwrap();
        assert_eq!(traj.termination, Termination::CapCollapse);
        let t = traj.singular_time.unwrap();
        assert!((t - 0.25).abs() < 1e-9, "t* = {t}");
    }

    #[test]
    fn time_limit_termination() {
        let p = ProfileCurve::cylinder(3, 1.0, 1.0, 0.02).unwrap();
        let cfg = FlowConfig { t_max: 0.01, ..FlowConfig::default() };
        let traj = run_to_singularity(&p, &cfg).unwrap();
        assert_eq!(traj.termination, Termination::TimeLimit);
        assert!((traj.end_time() - 0.01).abs() < 1e-15);
        assert!(traj.snapshots.windows(2).all(|s| s[1].t > s[0].t));
    }

    #[test]
    fn step_collapse_reports_partial() {
        let p = ProfileCurve::cylinder(3, 1.0, 1.0, 0.02).unwrap();
        let cfg = FlowConfig { dt_min: 1.0, ..FlowConfig::default() };
        let err = run_to_singularity(&p, &cfg).unwrap_err();
        assert!(matches!(err.error, Error::NonConvergence { .. }));
        assert!(!err.partial.is_empty());
    }

    #[test]
    fn exact_cylinder_rescales_to_zero() {
        let flow = ShrinkingCylinder { n: 3, t_ext: 1.0 };
        let taus = tau_grid(-1.0, 3.0, 5);
        let rt = rescale_about(&flow, SpaceTimeCenter::on_axis(0.0, 1.0), &taus, &RescaleConfig::default()).unwrap();
        for (g, rho) in rt.graphs.iter().zip(&rt.rho) {
            assert!(g.field().sup_bound() < 1e-14);
            assert!((rho - 12.0).abs() < 1e-12);
        }
        for (tau, t) in rt.tau.iter().zip(&rt.times) {
            assert!((-(1.0 - t).ln() - tau).abs() < 1e-12);
        }
    }

    #[test]
    fn rescale_range_and_noncylindrical_errors() {
        let flow = ShrinkingCylinder { n: 3, t_ext: 1.0 };
        // centre off the extinction time: slices are spheres of wrong radius
        let bad = rescale_about(&flow, SpaceTimeCenter::on_axis(0.0, 2.0), &[0.0], &RescaleConfig::default());
        assert!(matches!(bad, Err(Error::NotYetCylindrical { .. })));
        let p = ProfileCurve::cylinder(3, 1.0, 1.0, 0.02).unwrap();
        let cfg = FlowConfig { t_max: 0.01, ..FlowConfig::default() };
        let traj = run_to_singularity(&p, &cfg).unwrap();
        let r = rescale_about(&traj, SpaceTimeCenter::on_axis(0.0, 0.25), &[10.0], &RescaleConfig::default());
        assert!(matches!(r, Err(Error::Range { .. })));
    }

    #[test]
    fn renormalized_fixed_point() {
        let z = symmetric_grid(12.0, 0.05);
        let mut u = CylinderGraph::zero(2, z);
        for _ in 0..10_000 {
            u = step_renormalized(&u, 0.01).unwrap();
        }
        assert_eq!(u.field().sup_bound(), 0.0);
    }

    #[test]
    fn renormalized_blow_up_detected() {
        let z = symmetric_grid(12.0, 0.05);
        let f = ModeField::axial(3, z, |_| 1.2);
        let u = CylinderGraph::new(f).unwrap();
        assert!(matches!(step_renormalized(&u, 0.01), Err(Error::BlowUp { .. })));
    }

    #[test]
    fn richardson_on_linear_history() {
        let ts: Vec<f64> = (0..50).map(|k| k as f64 * 0.01).collect();
        let ys: Vec<f64> = ts.iter().map(|t| 2.0 * (0.6 - t)).collect();
        assert!((extrapolate_zero(&ts, &ys).unwrap() - 0.6).abs() < 1e-12);
    }
}
