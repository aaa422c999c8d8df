//! Diagnostics on renormalised necks: mode energies, decay fits, the
//! truncated neutral-mode system, tip heights and mean convexity.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::flow::{AxialFlow, EndCondition, FlowTrajectory, ProfileCurve, RescaleConfig, SpaceTimeCenter};
use crate::io::{fmt_f64, format_key_values, CsvTable};
use crate::numerics::{fit_line, sphere_area};
use crate::spectral::{coefficients_csv, cylinder_radius, neutral_constant_a, project_modes, SpectralCoefficients};

/// Mode energies `U_+, U_0, U_-` sampled in `tau`, with the cutoff radius
/// used for each projection.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeEnergyTrack {
    pub tau: Vec<f64>,
    pub u_plus: Vec<f64>,
    pub u_zero: Vec<f64>,
    pub u_minus: Vec<f64>,
    pub rho: Vec<f64>,
}

impl ModeEnergyTrack {
    pub fn new(tau: Vec<f64>, u_plus: Vec<f64>, u_zero: Vec<f64>, u_minus: Vec<f64>, rho: Vec<f64>) -> Result<Self> {
        let m = tau.len();
        if [u_plus.len(), u_zero.len(), u_minus.len(), rho.len()].iter().any(|&l| l != m) {
            return Err(Error::InvalidInput("energy columns differ in length".into()));
        }
        if tau.windows(2).any(|p| !(p[1] > p[0])) {
            return Err(Error::InvalidInput("tau samples must increase".into()));
        }
        let bad = |v: &Vec<f64>| v.iter().any(|x| !(x.is_finite() && *x >= 0.0));
        if bad(&u_plus) || bad(&u_zero) || bad(&u_minus) {
            return Err(Error::InvalidInput("mode energies must be finite and nonnegative".into()));
        }
        if rho.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::InvalidInput("cutoff radii must be positive".into()));
        }
        Ok(ModeEnergyTrack { tau, u_plus, u_zero, u_minus, rho })
    }

    pub fn from_coefficients(rows: &[(f64, SpectralCoefficients)], rho: f64) -> Result<Self> {
        ModeEnergyTrack::new(
            rows.iter().map(|r| r.0).collect(),
            rows.iter().map(|r| r.1.u_plus).collect(),
            rows.iter().map(|r| r.1.u_zero).collect(),
            rows.iter().map(|r| r.1.u_minus).collect(),
            vec![rho; rows.len()],
        )
    }

    pub fn len(&self) -> usize {
        self.tau.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut t = CsvTable::new(&["tau", "Uplus", "Uzero", "Uminus", "rho"]);
        for k in 0..self.len() {
            t.row(&[self.tau[k], self.u_plus[k], self.u_zero[k], self.u_minus[k], self.rho[k]]);
        }
        t.finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dichotomy {
    PlusDominant,
    NeutralDominant,
    Undecided,
}

impl Dichotomy {
    pub fn as_str(&self) -> &'static str {
        match self {
            Dichotomy::PlusDominant => "plus-dominant",
            Dichotomy::NeutralDominant => "neutral-dominant",
            Dichotomy::Undecided => "undecided",
        }
    }
}

/// The inequalities actually measured on a track.
///
/// `kappa(tau) = (U_0 + U_-) rho / U_+` and `eta(tau) = (U_+ + U_-) / U_0`;
/// the halves are the earlier and later half of the samples.
#[derive(Debug, Clone, PartialEq)]
pub struct DichotomyReport {
    pub verdict: Dichotomy,
    pub kappa_early: f64,
    pub kappa_late: f64,
    pub eta_max: f64,
    pub eta_nondecreasing: bool,
}

impl DichotomyReport {
    /// `verdict=... kappa=... eta=...`
    pub fn summary(&self) -> String {
        format!(
            "verdict={} kappa={} kappa_early={} eta={} eta_nondecreasing={}",
            self.verdict.as_str(),
            fmt_f64(self.kappa_early.max(self.kappa_late)),
            fmt_f64(self.kappa_early),
            fmt_f64(self.eta_max),
            self.eta_nondecreasing
        )
    }
}

pub const MIN_DICHOTOMY_SAMPLES: usize = 20;
pub const MIN_DICHOTOMY_SPAN: f64 = 3.0;

/// Decides which of the two alternatives the track follows as `tau`
/// decreases. Plus-dominance needs `kappa` finite throughout and no more
/// than doubling from the later to the earlier half; neutral-dominance needs
/// `eta < 1` everywhere and `eta` shrinking towards earlier times.
pub fn classify_dichotomy(track: &ModeEnergyTrack) -> Result<DichotomyReport> {
    let m = track.len();
    if m < MIN_DICHOTOMY_SAMPLES || track.tau[m - 1] - track.tau[0] < MIN_DICHOTOMY_SPAN {
        return Err(Error::InsufficientData(format!(
            "dichotomy needs {MIN_DICHOTOMY_SAMPLES} samples over a tau span of {MIN_DICHOTOMY_SPAN}"
        )));
    }
    let kappa: Vec<f64> = (0..m)
        .map(|k| {
            let rest = track.u_zero[k] + track.u_minus[k];
            if track.u_plus[k] > 0.0 {
                rest * track.rho[k] / track.u_plus[k]
            } else if rest == 0.0 {
                f64::NAN
            } else {
                f64::INFINITY
            }
        })
        .collect();
    let eta: Vec<f64> = (0..m)
        .map(|k| {
            let rest = track.u_plus[k] + track.u_minus[k];
            if track.u_zero[k] > 0.0 {
                rest / track.u_zero[k]
            } else if rest == 0.0 {
                f64::NAN
            } else {
                f64::INFINITY
            }
        })
        .collect();
    let half = m / 2;
    let sup = |v: &[f64]| v.iter().fold(f64::NEG_INFINITY, |a, &b| if b.is_nan() { f64::NAN } else { a.max(b) });
    let kappa_early = sup(&kappa[..half]);
    let kappa_late = sup(&kappa[half..]);
    let eta_max = sup(&eta);
    let eta_nondecreasing = eta.windows(2).all(|p| p[1] >= p[0] * (1.0 - 1e-12));
    let verdict = if kappa_early.is_finite() && kappa_late.is_finite() && kappa_early <= 2.0 * kappa_late {
        Dichotomy::PlusDominant
    } else if eta_max.is_finite() && eta_max < 1.0 && eta_nondecreasing {
        Dichotomy::NeutralDominant
    } else {
        Dichotomy::Undecided
    };
    Ok(DichotomyReport { verdict, kappa_early, kappa_late, eta_max, eta_nondecreasing })
}

/// Exponential fit `coefficient ~ constant * e^{rate tau}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub rate: f64,
    pub constant: f64,
    /// RMS of the residual of the log-linear fit.
    pub residual: f64,
}

/// Least squares on `(tau, log|coefficient|)` restricted to `window`.
/// Power laws are told apart from exponentials by comparing the slopes of
/// the two halves of the window.
pub fn fit_mode_decay(tau: &[f64], series: &[f64], window: (f64, f64)) -> Result<DecayFit> {
    if tau.len() != series.len() {
        return Err(Error::InvalidInput("tau and series differ in length".into()));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = tau
        .iter()
        .zip(series)
        .filter(|(t, _)| **t >= window.0 && **t <= window.1)
        .map(|(t, v)| (*t, *v))
        .unzip();
    if xs.len() < 4 {
        return Err(Error::InsufficientData("fewer than four samples in the fit window".into()));
    }
    let sign = ys[0].signum();
    if ys.iter().any(|v| !v.is_finite() || *v == 0.0 || v.signum() != sign) {
        return Err(Error::Nonexponential("series vanishes or changes sign in the window".into()));
    }
    let logs: Vec<f64> = ys.iter().map(|v| v.abs().ln()).collect();
    let (rate, intercept, residual) = fit_line(&xs, &logs);
    let mid = xs.len() / 2;
    let (s1, _, _) = fit_line(&xs[..=mid], &logs[..=mid]);
    let (s2, _, _) = fit_line(&xs[mid..], &logs[mid..]);
    if (s1 - s2).abs() > 0.05 * s1.abs().max(s2.abs()) + 1e-6 {
        return Err(Error::Nonexponential(format!("half-window slopes {s1} and {s2} disagree")));
    }
    Ok(DecayFit { rate, constant: sign * intercept.exp(), residual })
}

/// Renormalised neck around a space-time point: spectral coefficients per
/// `tau` and the corresponding energy track.
#[derive(Debug, Clone, PartialEq)]
pub struct NeckScan {
    pub n: usize,
    pub center: SpaceTimeCenter,
    pub rows: Vec<(f64, SpectralCoefficients)>,
    pub track: ModeEnergyTrack,
    /// Sup of `|u0|` on `|z| <= 5` per slice.
    pub sup_mode0: Vec<f64>,
}

pub const NECK_SUP_WINDOW: f64 = 5.0;

impl NeckScan {
    pub fn coefficients_csv(&self) -> String {
        coefficients_csv(self.n, &self.rows)
    }

    pub fn series(&self, f: impl Fn(&SpectralCoefficients) -> f64) -> (Vec<f64>, Vec<f64>) {
        (self.rows.iter().map(|r| r.0).collect(), self.rows.iter().map(|r| f(&r.1)).collect())
    }
}

/// Rescales about `center`, projects every slice with cutoff radius `rho`.
pub fn neck_scan<F: AxialFlow + ?Sized>(
    flow: &F,
    center: SpaceTimeCenter,
    taus: &[f64],
    rho: f64,
    cfg: &RescaleConfig,
) -> Result<NeckScan> {
    let traj = crate::flow::rescale_about(flow, center, taus, cfg)?;
    let mut rows = Vec::with_capacity(taus.len());
    let mut sup_mode0 = Vec::with_capacity(taus.len());
    for (tau, g) in traj.tau.iter().zip(&traj.graphs) {
        rows.push((*tau, project_modes(g, rho)?));
        let f = g.field();
        let s = f
            .z
            .iter()
            .zip(&f.mode0)
            .filter(|(z, _)| z.abs() <= NECK_SUP_WINDOW)
            .fold(0.0f64, |m, (_, u)| m.max(u.abs()));
        sup_mode0.push(s);
    }
    let track = ModeEnergyTrack::from_coefficients(&rows, rho)?;
    Ok(NeckScan { n: flow.dimension(), center, rows, track, sup_mode0 })
}

/// Centre shifted so that a fitted lateral plus-mode limit `b_bar` is
/// absorbed: the mode `b x_1` is a sideways shift of the cylinder by
/// `sqrt(2(n-1)) b` in rescaled units.
pub fn recenter(center: SpaceTimeCenter, n: usize, b_bar: f64) -> SpaceTimeCenter {
    SpaceTimeCenter { lateral: center.lateral + cylinder_radius(n) * b_bar, ..center }
}

/// State of the truncated neutral-mode system
/// `a0' = -2A a0^2 - A sum ai^2`, `ai' = -A a0 ai`.
#[derive(Debug, Clone, PartialEq)]
pub struct NeutralOdeState {
    pub n: usize,
    pub a: f64,
    pub alpha0: f64,
    pub alpha: Vec<f64>,
}

impl NeutralOdeState {
    pub fn new(n: usize, alpha0: f64, alpha: Vec<f64>) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidInput(format!("dimension n = {n} must be at least 2")));
        }
        if alpha.len() != n {
            return Err(Error::InvalidInput(format!("expected {n} lateral coefficients, got {}", alpha.len())));
        }
        Ok(NeutralOdeState { n, a: neutral_constant_a(n), alpha0, alpha })
    }

    fn derivative(&self, y: &[f64]) -> Vec<f64> {
        let a = self.a;
        let mut d = vec![0.0; y.len()];
        d[0] = -2.0 * a * y[0] * y[0] - a * y[1..].iter().map(|v| v * v).sum::<f64>();
        for i in 1..y.len() {
            d[i] = -a * y[0] * y[i];
        }
        d
    }

    fn packed(&self) -> Vec<f64> {
        let mut y = vec![self.alpha0];
        y.extend(&self.alpha);
        y
    }

    fn with(&self, y: &[f64]) -> Self {
        NeutralOdeState { n: self.n, a: self.a, alpha0: y[0], alpha: y[1..].to_vec() }
    }

    fn magnitude(&self) -> f64 {
        self.alpha.iter().fold(self.alpha0.abs(), |m, v| m.max(v.abs()))
    }
}

/// `-1/(2A)`, the limit of `tau alpha_0` on the truncated system.
pub fn truncated_limit_constant(n: usize) -> f64 {
    -1.0 / (2.0 * neutral_constant_a(n))
}

/// `-2 sqrt(n-1) (2 e pi/(n-1))^{-(n-1)/4} |S^{n-1}|^{1/2}`, the constant
/// displayed for the same limit in the neutral-mode asymptotics.
pub fn displayed_limit_constant(n: usize) -> f64 {
    let m = n as f64 - 1.0;
    -2.0 * m.sqrt() * (2.0 * std::f64::consts::E * std::f64::consts::PI / m).powf(-0.25 * m) * sphere_area(n - 1).sqrt()
}

/// RK4 on `[tau0, tau1]` with step `dtau` (the last step is shortened).
/// Returns every state including both ends.
pub fn integrate_neutral_ode(s0: &NeutralOdeState, tau0: f64, tau1: f64, dtau: f64) -> Result<Vec<(f64, NeutralOdeState)>> {
    if !(dtau > 0.0) || !(tau1 > tau0) {
        return Err(Error::InvalidInput("need tau1 > tau0 and dtau > 0".into()));
    }
    if !(dtau * s0.a * s0.magnitude() < 0.1) {
        return Err(Error::InvalidInput(format!(
            "step too large: dtau A |alpha| = {} must stay below 0.1",
            dtau * s0.a * s0.magnitude()
        )));
    }
    let steps = ((tau1 - tau0) / dtau).ceil() as usize;
    let mut out = Vec::with_capacity(steps + 1);
    let mut y = s0.packed();
    out.push((tau0, s0.clone()));
    let axpy = |y: &[f64], k: &[f64], h: f64| -> Vec<f64> { y.iter().zip(k).map(|(a, b)| a + h * b).collect() };
    for k in 0..steps {
        let t = tau0 + k as f64 * dtau;
        let h = if k + 1 == steps { tau1 - t } else { dtau };
        let k1 = s0.derivative(&y);
        let k2 = s0.derivative(&axpy(&y, &k1, 0.5 * h));
        let k3 = s0.derivative(&axpy(&y, &k2, 0.5 * h));
        let k4 = s0.derivative(&axpy(&y, &k3, h));
        for i in 0..y.len() {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let state = s0.with(&y);
        let mag = state.magnitude();
        if !mag.is_finite() || dtau * s0.a * mag >= 0.1 {
            // 1/alpha0 moves at rate -2A near the pole
            let tau_blowup = if y[0].is_finite() && y[0] != 0.0 { t + h - 1.0 / (2.0 * s0.a * y[0]) } else { t + h };
            return Err(Error::OdeBlowUp { tau_blowup });
        }
        out.push((t + h, state));
    }
    Ok(out)
}

pub fn neutral_ode_csv(traj: &[(f64, NeutralOdeState)]) -> String {
    let n = traj.first().map_or(0, |s| s.1.n);
    let mut header = vec!["tau".to_string(), "alpha0".to_string()];
    header.extend((1..=n).map(|i| format!("alpha{i}")));
    let refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut t = CsvTable::new(&refs);
    for (tau, s) in traj {
        let mut row = vec![*tau, s.alpha0];
        row.extend(&s.alpha);
        t.row(&row);
    }
    t.finish()
}

/// Which end of a profile the tip is read from. `psi` is measured pointing
/// into the surface: `min z` at the lower end, `-max z` at the upper.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TipEnd {
    Lower,
    Upper,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TipHeightReport {
    pub times: Vec<f64>,
    pub psi: Vec<f64>,
    pub slope: f64,
    pub strictly_increasing: bool,
    /// Smallest `C` with `psi(t) - psi(t') <= C (t - t' + 1)` for `t > t'`.
    pub speed_constant: f64,
}

impl TipHeightReport {
    pub fn to_csv(&self) -> String {
        let mut t = CsvTable::new(&["t", "psi"]);
        for (a, b) in self.times.iter().zip(&self.psi) {
            t.row(&[*a, *b]);
        }
        t.finish()
    }
}

/// Slope, monotonicity and macroscopic speed constant of a tip series.
pub fn tip_height_series(times: Vec<f64>, psi: Vec<f64>) -> Result<TipHeightReport> {
    if times.len() != psi.len() || times.len() < 2 {
        return Err(Error::InsufficientData("need at least two tip samples".into()));
    }
    let (slope, _, _) = fit_line(&times, &psi);
    let strictly_increasing = psi.windows(2).all(|p| p[1] > p[0]);
    let mut speed_constant = 0.0f64;
    for j in 0..times.len() {
        for i in 0..j {
            speed_constant = speed_constant.max((psi[j] - psi[i]) / (times[j] - times[i] + 1.0));
        }
    }
    Ok(TipHeightReport { times, psi, slope, strictly_increasing, speed_constant })
}

/// Tip height per snapshot of a simulated trajectory.
pub fn tip_height(traj: &FlowTrajectory, end: TipEnd) -> Result<TipHeightReport> {
    let mut times = Vec::new();
    let mut psi = Vec::new();
    for s in &traj.snapshots {
        let p = &s.profile;
        let (cond, tip) = match end {
            TipEnd::Lower => (p.left, p.caps().0),
            TipEnd::Upper => (p.right, p.caps().1.map(|z| -z)),
        };
        if cond != EndCondition::Cap {
            return Err(Error::Inapplicable("the requested end is not capped".into()));
        }
        let Some(tip) = tip else {
            return Err(Error::Inapplicable(format!("no tip at t = {}", s.t)));
        };
        times.push(s.t);
        psi.push(tip);
    }
    tip_height_series(times, psi)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanConvexity {
    pub min_h: f64,
    pub z_at_min: f64,
    pub positive: bool,
    /// The region reached a node next to a cap, where the curvature comes
    /// from the cap-regularised stencils.
    pub cap_note: bool,
}

/// Minimum of `H` over active nodes with `z` in `region`.
pub fn mean_convexity_check(p: &ProfileCurve, region: (f64, f64)) -> Result<MeanConvexity> {
    let h = p.mean_curvature();
    let (lo, hi) = p.active_range();
    let mut best = (f64::INFINITY, f64::NAN);
    let mut cap_note = false;
    for i in lo..=hi {
        let z = p.z[i];
        if z < region.0 || z > region.1 {
            continue;
        }
        if (i < lo + 2 && p.left == EndCondition::Cap) || (i + 2 > hi && p.right == EndCondition::Cap) {
            cap_note = true;
        }
        let v = h[i - lo];
        if v < best.0 {
            best = (v, z);
        }
    }
    if best.1.is_nan() {
        return Err(Error::InvalidInput(format!("no active nodes in [{}, {}]", region.0, region.1)));
    }
    Ok(MeanConvexity { min_h: best.0, z_at_min: best.1, positive: best.0 > 0.0, cap_note })
}

/// Mean convexity on `neck +- half_width` over the snapshots in the final
/// `fraction` of the run; returns the worst snapshot.
pub fn mean_convexity_near_neck(traj: &FlowTrajectory, fraction: f64, half_width: f64) -> Result<(f64, MeanConvexity)> {
    let (t0, t1) = (traj.start_time(), traj.end_time());
    let from = t1 - fraction * (t1 - t0);
    let mut worst: Option<(f64, MeanConvexity)> = None;
    for s in traj.snapshots.iter().filter(|s| s.t >= from) {
        let Some(zn) = s.profile.neck_position() else { continue };
        let m = mean_convexity_check(&s.profile, (zn - half_width, zn + half_width))?;
        if worst.as_ref().map_or(true, |w| m.min_h < w.1.min_h) {
            worst = Some((s.t, m));
        }
    }
    worst.ok_or_else(|| Error::InsufficientData("no snapshot with a neck in the final window".into()))
}

/// Key-value summary of a neutral-ode run with both limit constants.
pub fn neutral_ode_summary(n: usize, traj: &[(f64, NeutralOdeState)]) -> String {
    let mut m = BTreeMap::new();
    m.insert("A".to_string(), fmt_f64(neutral_constant_a(n)));
    m.insert("limit_truncated".to_string(), fmt_f64(truncated_limit_constant(n)));
    m.insert("limit_displayed".to_string(), fmt_f64(displayed_limit_constant(n)));
    if let Some((tau, s)) = traj.last() {
        m.insert("tau_alpha0_final".to_string(), fmt_f64(tau * s.alpha0));
    }
    format_key_values(&m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(f: impl Fn(f64) -> (f64, f64, f64)) -> ModeEnergyTrack {
        let tau: Vec<f64> = (0..40).map(|k| -10.0 + 0.15 * k as f64).collect();
        let v: Vec<_> = tau.iter().map(|t| f(*t)).collect();
        ModeEnergyTrack::new(
            tau.clone(),
            v.iter().map(|x| x.0).collect(),
            v.iter().map(|x| x.1).collect(),
            v.iter().map(|x| x.2).collect(),
            vec![1.0; tau.len()],
        )
        .unwrap()
    }

    #[test]
    fn dichotomy_examples() {
        let plus = synthetic(|t| (t.exp(), (1.5 * t).exp(), (1.5 * t).exp()));
        assert_eq!(classify_dichotomy(&plus).unwrap().verdict, Dichotomy::PlusDominant);
        let neutral = synthetic(|t| (t.powi(-4), t.powi(-2), t.powi(-4)));
        let r = classify_dichotomy(&neutral).unwrap();
        assert_eq!(r.verdict, Dichotomy::NeutralDominant);
        assert!(r.summary().starts_with("verdict=neutral-dominant kappa="));
        let zero = synthetic(|_| (0.0, 0.0, 0.0));
        assert_eq!(classify_dichotomy(&zero).unwrap().verdict, Dichotomy::Undecided);
        let mut short = plus.clone();
        short.tau.truncate(10);
        assert!(matches!(classify_dichotomy(&short), Err(Error::InvalidInput(_)) | Err(Error::InsufficientData(_))));
    }

    #[test]
    fn negative_energy_rejected() {
        assert!(ModeEnergyTrack::new(vec![0.0], vec![-1.0], vec![0.0], vec![0.0], vec![1.0]).is_err());
    }

    #[test]
    fn exponential_fit_is_exact() {
        let tau: Vec<f64> = (0..50).map(|k| -8.0 + 0.08 * k as f64).collect();
        let s: Vec<f64> = tau.iter().map(|t| 0.3 * (0.5 * t).exp()).collect();
        let f = fit_mode_decay(&tau, &s, (-8.0, -4.0)).unwrap();
        assert!((f.rate - 0.5).abs() < 1e-12);
        assert!((f.constant - 0.3).abs() < 1e-12);
        assert!(f.residual < 1e-12);
        let neg: Vec<f64> = s.iter().map(|v| -v).collect();
        assert!((fit_mode_decay(&tau, &neg, (-8.0, -4.0)).unwrap().constant + 0.3).abs() < 1e-12);
    }

    #[test]
    fn power_law_is_flagged() {
        let a = neutral_constant_a(3);
        let tau: Vec<f64> = (0..50).map(|k| -8.0 + 0.08 * k as f64).collect();
        let s: Vec<f64> = tau.iter().map(|t| 1.0 / (2.0 * a * t)).collect();
        assert!(matches!(fit_mode_decay(&tau, &s, (-8.0, -4.0)), Err(Error::Nonexponential(_))));
        let flip: Vec<f64> = tau.iter().map(|t| (t + 6.0).sin()).collect();
        assert!(matches!(fit_mode_decay(&tau, &flip, (-8.0, -4.0)), Err(Error::Nonexponential(_))));
    }

    #[test]
    fn neutral_ode_closed_form() {
        let n = 3;
        let a = neutral_constant_a(n);
        let tau0 = -1e4;
        let s0 = NeutralOdeState::new(n, 1.0 / (2.0 * a * tau0), vec![0.0; n]).unwrap();
        let traj = integrate_neutral_ode(&s0, tau0, -10.0, 0.5).unwrap();
        for (tau, s) in &traj {
            let exact = 1.0 / (2.0 * a * tau);
            assert!(((s.alpha0 - exact) / exact).abs() < 1e-6, "tau {tau}");
            assert!(s.alpha.iter().all(|v| *v == 0.0));
        }
        assert!(s0.a > 0.0);
    }

    #[test]
    fn neutral_ode_blow_up_reported() {
        let s0 = NeutralOdeState::new(2, -0.5, vec![0.0, 0.0]).unwrap();
        match integrate_neutral_ode(&s0, 0.0, 10.0, 0.01) {
            Err(Error::OdeBlowUp { tau_blowup }) => {
                let exact = 1.0 / (2.0 * s0.a * 0.5);
                assert!((tau_blowup - exact).abs() < 0.05, "{tau_blowup} vs {exact}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn limit_constants_differ_by_two() {
        for n in 2..=5 {
            assert!((displayed_limit_constant(n) / truncated_limit_constant(n) - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn tip_series_examples() {
        let t: Vec<f64> = (0..11).map(|k| -5.0 + k as f64).collect();
        let bowl = tip_height_series(t.clone(), t.clone()).unwrap();
        assert!((bowl.slope - 1.0).abs() < 1e-12 && bowl.strictly_increasing);
        let plane = tip_height_series(t.clone(), vec![0.4; t.len()]).unwrap();
        assert!(plane.slope.abs() < 1e-12 && plane.speed_constant == 0.0);
    }

    #[test]
    fn sphere_and_cylinder_curvature() {
        let s = ProfileCurve::sphere(3, 1.5, 0.005).unwrap();
        let m = mean_convexity_check(&s, (-1.0, 1.0)).unwrap();
        assert!((m.min_h - 2.0).abs() < 1e-4 && m.positive && !m.cap_note);
        assert!(mean_convexity_check(&s, (-2.0, 2.0)).unwrap().cap_note);
        let c = ProfileCurve::cylinder(3, 2.0, 3.0, 0.01).unwrap();
        let m = mean_convexity_check(&c, (-1.0, 1.0)).unwrap();
        assert!((m.min_h - 1.0).abs() < 1e-12);
        assert!(mean_convexity_check(&c, (10.0, 11.0)).is_err());
    }
}
