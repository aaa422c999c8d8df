//! Gaussian-weighted analysis on the round cylinder `S^{n-1}(sqrt(2(n-1))) x R`.
//!
//! Functions on the cylinder are truncated at angular mode one:
//! `f(z, w) = f0(z) + sum_i f1_i(z) <w, e_i>`. Angular integrals of these
//! products are exact, the axial integral uses Gauss-Legendre quadrature on
//! `|z| <= 12` with the samples interpolated by local degree-7 polynomials.

use std::f64::consts::{E, PI};
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::numerics::{d1_central4, d2_central4, lagrange_uniform, sphere_area, GaussLegendre};

/// Axial half-width of the quadrature window.
pub const QUAD_HALF_WIDTH: f64 = 12.0;
/// Grids shorter than this risk visible Gaussian tail truncation.
pub const MIN_HALF_WIDTH: f64 = 8.0;
pub const QUAD_NODES: usize = 400;
const INTERP_ORDER: usize = 8;

fn quad_rule() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(QUAD_NODES))
}

/// Radius of the self-shrinking cylinder at time -1.
pub fn cylinder_radius(n: usize) -> f64 {
    (2.0 * (n as f64 - 1.0)).sqrt()
}

/// `||1||_G^2` on the cylinder: `((n-1)/(2 pi e))^{(n-1)/2} |S^{n-1}|`.
pub fn gaussian_mass(n: usize) -> f64 {
    let m = n as f64 - 1.0;
    (m / (2.0 * PI * E)).powf(0.5 * m) * sphere_area(n - 1)
}

/// Normalisation of the zero-mode `x_{n+1}^2 - 2`.
pub fn psi0_constant(n: usize) -> f64 {
    1.0 / (8.0 * gaussian_mass(n)).sqrt()
}

/// Normalisation of the zero-modes `x_i x_{n+1}`.
pub fn psi_i_constant(n: usize) -> f64 {
    let nf = n as f64;
    1.0 / (4.0 * gaussian_mass(n) * (nf - 1.0) / nf).sqrt()
}

/// Coefficient `A` of the truncated neutral-mode system.
pub fn neutral_constant_a(n: usize) -> f64 {
    let m = n as f64 - 1.0;
    1.0 / (2.0 * m.sqrt()) * (2.0 * E * PI / m).powf(0.25 * m) / sphere_area(n - 1).sqrt()
}

/// Smooth cutoff: 1 on `|s| <= 1/2`, 0 on `|s| >= 1`, C^2 quintic taper.
pub fn cutoff(s: f64) -> f64 {
    let a = s.abs();
    if a <= 0.5 {
        1.0
    } else if a >= 1.0 {
        0.0
    } else {
        let x = 2.0 * (a - 0.5);
        1.0 - x * x * x * (10.0 - 15.0 * x + 6.0 * x * x)
    }
}

/// Uniform axial grid `[-half, half]` with spacing close to `dz` and a node at 0.
pub fn symmetric_grid(half: f64, dz: f64) -> Vec<f64> {
    let m = (half / dz).round() as usize;
    let h = half / m as f64;
    (0..=2 * m).map(|i| -half + h * i as f64).collect()
}

/// A function on the cylinder with angular modes 0 and 1, sampled on a
/// uniform axial grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeField {
    pub n: usize,
    pub z: Vec<f64>,
    pub mode0: Vec<f64>,
    pub mode1: Vec<Vec<f64>>,
}

impl ModeField {
    pub fn zeros(n: usize, z: Vec<f64>) -> Self {
        let len = z.len();
        ModeField { n, z, mode0: vec![0.0; len], mode1: vec![vec![0.0; len]; n] }
    }

    /// Samples `f0` for mode 0 and `f1(i, z)` for the coefficient of `<w, e_{i+1}>`.
    pub fn from_fn<F0, F1>(n: usize, z: Vec<f64>, f0: F0, f1: F1) -> Self
    where
        F0: Fn(f64) -> f64,
        F1: Fn(usize, f64) -> f64,
    {
        let mode0 = z.iter().map(|&x| f0(x)).collect();
        let mode1 = (0..n).map(|i| z.iter().map(|&x| f1(i, x)).collect()).collect();
        ModeField { n, z, mode0, mode1 }
    }

    pub fn axial(n: usize, z: Vec<f64>, f0: impl Fn(f64) -> f64) -> Self {
        Self::from_fn(n, z, f0, |_, _| 0.0)
    }

    /// The constant eigenfunction `1`.
    pub fn one(n: usize, z: Vec<f64>) -> Self {
        Self::axial(n, z, |_| 1.0)
    }

    /// The coordinate function `x_{n+1} = z`.
    pub fn x_axial(n: usize, z: Vec<f64>) -> Self {
        Self::axial(n, z, |x| x)
    }

    /// The coordinate function `x_{i+1} = R <w, e_{i+1}>` restricted to the cylinder.
    pub fn x_lateral(n: usize, z: Vec<f64>, i: usize) -> Self {
        let r = cylinder_radius(n);
        Self::from_fn(n, z, |_| 0.0, move |j, _| if j == i { r } else { 0.0 })
    }

    /// Normalised zero-mode `psi_0`.
    pub fn psi0(n: usize, z: Vec<f64>) -> Self {
        let k = psi0_constant(n);
        Self::axial(n, z, move |x| k * (x * x - 2.0))
    }

    /// Normalised zero-mode `psi_{i+1}` (proportional to `x_{i+1} x_{n+1}`).
    pub fn psi_lateral(n: usize, z: Vec<f64>, i: usize) -> Self {
        let k = psi_i_constant(n) * cylinder_radius(n);
        Self::from_fn(n, z, |_| 0.0, move |j, x| if j == i { k * x } else { 0.0 })
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn dz(&self) -> f64 {
        (self.z[self.z.len() - 1] - self.z[0]) / (self.z.len() - 1) as f64
    }

    pub fn same_grid(&self, other: &ModeField) -> bool {
        self.n == other.n
            && self.z.len() == other.z.len()
            && self.z.iter().zip(&other.z).all(|(a, b)| (a - b).abs() <= 1e-12 * (1.0 + a.abs()))
    }

    pub fn scaled(&self, s: f64) -> ModeField {
        self.map(|v| s * v)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ModeField {
        ModeField {
            n: self.n,
            z: self.z.clone(),
            mode0: self.mode0.iter().map(|&v| f(v)).collect(),
            mode1: self.mode1.iter().map(|m| m.iter().map(|&v| f(v)).collect()).collect(),
        }
    }

    /// `self + s * other`; panics on grid mismatch.
    pub fn add_scaled(&self, s: f64, other: &ModeField) -> ModeField {
        assert!(self.same_grid(other), "grid mismatch");
        let mut out = self.clone();
        for (a, b) in out.mode0.iter_mut().zip(&other.mode0) {
            *a += s * b;
        }
        for (ma, mb) in out.mode1.iter_mut().zip(&other.mode1) {
            for (a, b) in ma.iter_mut().zip(mb) {
                *a += s * b;
            }
        }
        out
    }

    /// Pointwise multiplication by a function of `z` (acts on every mode).
    pub fn times_axial(&self, f: impl Fn(f64) -> f64) -> ModeField {
        let w: Vec<f64> = self.z.iter().map(|&x| f(x)).collect();
        ModeField {
            n: self.n,
            z: self.z.clone(),
            mode0: self.mode0.iter().zip(&w).map(|(v, s)| v * s).collect(),
            mode1: self
                .mode1
                .iter()
                .map(|m| m.iter().zip(&w).map(|(v, s)| v * s).collect())
                .collect(),
        }
    }

    /// Largest value of `|f0| + sum_i |f1_i|`, a bound for `sup |f|`.
    pub fn sup_bound(&self) -> f64 {
        (0..self.len())
            .map(|k| self.mode0[k].abs() + self.mode1.iter().map(|m| m[k].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// The field with `layers` nodes dropped at each end, matching the
    /// output grid of [`eval_l`] for `layers = 2`.
    pub fn interior(&self, layers: usize) -> ModeField {
        let k = self.len();
        let cut = |v: &Vec<f64>| v[layers..k - layers].to_vec();
        ModeField { n: self.n, z: cut(&self.z), mode0: cut(&self.mode0), mode1: self.mode1.iter().map(cut).collect() }
    }

    fn check_grid(&self) -> Result<()> {
        let len = self.z.len();
        if len < 2 || self.mode0.len() != len || self.mode1.len() != self.n
            || self.mode1.iter().any(|m| m.len() != len)
        {
            return Err(Error::InvalidInput("mode arrays do not match the axial grid".into()));
        }
        let h = self.dz();
        if h <= 0.0 {
            return Err(Error::InvalidInput("axial grid must be increasing".into()));
        }
        for k in 1..len {
            let step = self.z[k] - self.z[k - 1];
            if (step - h).abs() > 1e-12 * h.max(self.z[k].abs()) {
                return Err(Error::InvalidInput("axial grid is not uniform".into()));
            }
        }
        Ok(())
    }
}

/// A small graph `u` over the cylinder: `|u| < sqrt(2(n-1))` everywhere.
#[derive(Debug, Clone, PartialEq)]
pub struct CylinderGraph {
    field: ModeField,
}

impl CylinderGraph {
    pub fn new(field: ModeField) -> Result<Self> {
        if field.n < 2 {
            return Err(Error::InvalidInput("surface dimension n must be at least 2".into()));
        }
        field.check_grid()?;
        let r = cylinder_radius(field.n);
        if !(field.sup_bound() < r) || field.mode0.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "graph deviation {} does not stay inside radius {r}",
                field.sup_bound()
            )));
        }
        Ok(CylinderGraph { field })
    }

    pub fn zero(n: usize, z: Vec<f64>) -> Self {
        CylinderGraph { field: ModeField::zeros(n, z) }
    }

    pub fn field(&self) -> &ModeField {
        &self.field
    }

    pub fn into_field(self) -> ModeField {
        self.field
    }

    pub fn n(&self) -> usize {
        self.field.n
    }
}

/// Projection coefficients of the truncated graph onto the plus and neutral
/// eigenspaces together with the three mode energies.
///
/// `a`, `b`, `c` are the coefficients of `x_{n+1}`, `x_i` and `1` in
/// `P_+ u`; `alpha0`, `alpha` those of the normalised zero-modes.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralCoefficients {
    pub a: f64,
    pub b: Vec<f64>,
    pub c: f64,
    pub alpha0: f64,
    pub alpha: Vec<f64>,
    pub u_plus: f64,
    pub u_zero: f64,
    pub u_minus: f64,
    /// `||u_hat||_G^2`
    pub norm_sq: f64,
}

impl SpectralCoefficients {
    /// `U_+` from the coefficients alone.
    pub fn u_plus_closed_form(&self, n: usize) -> f64 {
        u_plus_from_coefficients(n, self.a, &self.b, self.c)
    }
}

/// `U_+ = K (a^2 + (1 - 1/n) sum b_i^2 + c^2/2)` with
/// `K = e^{-(n-1)/2} pi^{-(n-1)/2} 2^{-(n-3)/2} (n-1)^{(n-1)/2} |S^{n-1}|`.
pub fn u_plus_from_coefficients(n: usize, a: f64, b: &[f64], c: f64) -> f64 {
    let nf = n as f64;
    let m = nf - 1.0;
    let k = (-0.5 * m).exp()
        * PI.powf(-0.5 * m)
        * 2f64.powf(-0.5 * (nf - 3.0))
        * m.powf(0.5 * m)
        * sphere_area(n - 1);
    k * (a * a + (1.0 - 1.0 / nf) * b.iter().map(|v| v * v).sum::<f64>() + 0.5 * c * c)
}

fn window(field: &ModeField) -> Result<(f64, f64)> {
    let lo = field.z[0].max(-QUAD_HALF_WIDTH);
    let hi = field.z[field.len() - 1].min(QUAD_HALF_WIDTH);
    let extent = (-lo).min(hi);
    if extent < MIN_HALF_WIDTH {
        return Err(Error::Truncation { extent, required: MIN_HALF_WIDTH });
    }
    Ok((lo, hi))
}

/// `int_R e^{-z^2/4} g(z) dz` over the quadrature window.
pub fn axial_gauss_integral(lo: f64, hi: f64, g: impl Fn(f64) -> f64) -> f64 {
    quad_rule().integrate(lo, hi, |z| (-0.25 * z * z).exp() * g(z))
}

/// Gaussian inner product on the cylinder,
/// `int_Sigma (4 pi)^{-n/2} e^{-|x|^2/4} f g`.
pub fn gaussian_inner(f: &ModeField, g: &ModeField) -> Result<f64> {
    if !f.same_grid(g) {
        return Err(Error::GridMismatch);
    }
    f.check_grid()?;
    let (lo, hi) = window(f)?;
    let n = f.n;
    let r = cylinder_radius(n);
    let nf = n as f64;
    let s = sphere_area(n - 1);
    let prefactor = (4.0 * PI).powf(-0.5 * nf) * (-0.25 * r * r).exp() * r.powi(n as i32 - 1);
    let z0 = f.z[0];
    let h = f.dz();
    let interp = |vals: &[f64], z: f64| lagrange_uniform(z0, h, vals, z, INTERP_ORDER);
    let (nodes, weights) = quad_rule().on_interval(lo, hi);
    let mut acc = 0.0;
    for (&z, &w) in nodes.iter().zip(&weights) {
        let mut v = s * interp(&f.mode0, z) * interp(&g.mode0, z);
        for i in 0..n {
            v += s / nf * interp(&f.mode1[i], z) * interp(&g.mode1[i], z);
        }
        acc += w * (-0.25 * z * z).exp() * v;
    }
    Ok(prefactor * acc)
}

pub fn gaussian_norm_sq(f: &ModeField) -> Result<f64> {
    gaussian_inner(f, f)
}

/// `L f = Delta_Sigma f - (1/2) z d_z f + f` on interior nodes (two layers
/// dropped at each end). On mode one the sphere Laplacian contributes
/// `-(n-1)/R^2 = -1/2`.
pub fn eval_l(f: &ModeField) -> Result<ModeField> {
    let len = f.len();
    if len < 5 {
        return Err(Error::Stencil { nodes: len });
    }
    f.check_grid()?;
    let h = f.dz();
    let n = f.n;
    let r2 = 2.0 * (n as f64 - 1.0);
    let angular = -(n as f64 - 1.0) / r2;
    let apply = |vals: &[f64], shift: f64| -> Vec<f64> {
        (2..len - 2)
            .map(|i| {
                d2_central4(vals, i, h) - 0.5 * f.z[i] * d1_central4(vals, i, h)
                    + (1.0 + shift) * vals[i]
            })
            .collect()
    };
    Ok(ModeField {
        n,
        z: f.z[2..len - 2].to_vec(),
        mode0: apply(&f.mode0, 0.0),
        mode1: f.mode1.iter().map(|m| apply(m, angular)).collect(),
    })
}

/// Projects `u_hat = u chi(z / rho)` onto the plus and neutral eigenspaces.
pub fn project_modes(u: &CylinderGraph, rho: f64) -> Result<SpectralCoefficients> {
    let field = u.field();
    let n = field.n;
    if !(rho >= 1.0) || !rho.is_finite() {
        return Err(Error::InvalidInput(format!("cutoff radius {rho} must be >= 1")));
    }
    let extent = (-field.z[0]).min(field.z[field.len() - 1]);
    if rho > extent + 1e-12 {
        return Err(Error::Truncation { extent, required: rho });
    }
    let uhat = field.times_axial(|z| cutoff(z / rho));
    let z = field.z.clone();
    let mass = gaussian_mass(n);
    let nf = n as f64;

    let a = gaussian_inner(&uhat, &ModeField::x_axial(n, z.clone()))? / (2.0 * mass);
    let lateral_norm = 2.0 * mass * (1.0 - 1.0 / nf);
    let b = (0..n)
        .map(|i| Ok(gaussian_inner(&uhat, &ModeField::x_lateral(n, z.clone(), i))? / lateral_norm))
        .collect::<Result<Vec<_>>>()?;
    let c = gaussian_inner(&uhat, &ModeField::one(n, z.clone()))? / mass;
    let alpha0 = gaussian_inner(&uhat, &ModeField::psi0(n, z.clone()))?;
    let alpha = (0..n)
        .map(|i| gaussian_inner(&uhat, &ModeField::psi_lateral(n, z.clone(), i)))
        .collect::<Result<Vec<_>>>()?;

    // P_+ u_hat assembled as a field and integrated directly.
    let mut plus = ModeField::x_axial(n, z.clone()).scaled(a);
    plus = plus.add_scaled(c, &ModeField::one(n, z.clone()));
    for (i, bi) in b.iter().enumerate() {
        plus = plus.add_scaled(*bi, &ModeField::x_lateral(n, z.clone(), i));
    }
    let u_plus = gaussian_norm_sq(&plus)?;
    let u_zero = alpha0 * alpha0 + alpha.iter().map(|v| v * v).sum::<f64>();
    let norm_sq = gaussian_norm_sq(&uhat)?;
    let mut u_minus = norm_sq - u_plus - u_zero;
    let tol = 1e-9 * norm_sq + 1e-15;
    if u_minus < -tol {
        return Err(Error::QuadratureFailure { value: u_minus });
    }
    if u_minus < 0.0 {
        u_minus = 0.0;
    }
    Ok(SpectralCoefficients { a, b, c, alpha0, alpha, u_plus, u_zero, u_minus, norm_sq })
}

/// CSV rows `tau,a,b1..bn,c,alpha0,alpha1..alphan,Uplus,Uzero,Uminus`.
pub fn coefficients_csv(n: usize, rows: &[(f64, SpectralCoefficients)]) -> String {
    use crate::io::fmt_f64;
    let mut header = vec!["tau".to_string(), "a".to_string()];
    header.extend((1..=n).map(|i| format!("b{i}")));
    header.push("c".into());
    header.push("alpha0".into());
    header.extend((1..=n).map(|i| format!("alpha{i}")));
    header.extend(["Uplus", "Uzero", "Uminus"].iter().map(|s| s.to_string()));
    let mut out = header.join(",");
    out.push('\n');
    for (tau, s) in rows {
        let mut vals = vec![*tau, s.a];
        vals.extend(&s.b);
        vals.push(s.c);
        vals.push(s.alpha0);
        vals.extend(&s.alpha);
        vals.extend([s.u_plus, s.u_zero, s.u_minus]);
        out.push_str(&vals.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Vec<f64> {
        symmetric_grid(12.0, 0.01)
    }

    #[test]
    fn constant_norm_matches_closed_form() {
        let z = grid();
        let one = ModeField::one(2, z);
        let v = gaussian_norm_sq(&one).unwrap();
        assert!((v - (2.0 * PI / E).sqrt()).abs() < 1e-10, "{v}");
        assert!((v - 1.52035).abs() < 1e-5);
    }

    #[test]
    fn lateral_and_axial_are_orthogonal() {
        for n in 2..=4 {
            let z = grid();
            let x1 = ModeField::x_lateral(n, z.clone(), 0);
            let xa = ModeField::x_axial(n, z);
            assert!(gaussian_inner(&x1, &xa).unwrap().abs() < 1e-14);
        }
    }

    #[test]
    fn psi_constants_match_explicit_formulas() {
        for n in 2..=6 {
            let nf = n as f64;
            let base = (E * PI / (nf - 1.0)).powf(0.25 * (nf - 1.0)) / sphere_area(n - 1).sqrt();
            let k0 = 2f64.powf((nf - 7.0) / 4.0) * base;
            let ki = 2f64.powf((nf - 5.0) / 4.0) * (1.0 - 1.0 / nf).powf(-0.5) * base;
            assert!((psi0_constant(n) / k0 - 1.0).abs() < 1e-12);
            assert!((psi_i_constant(n) / ki - 1.0).abs() < 1e-12);
            // A = c_0jj / (2 sqrt(2(n-1))) with c_0jj = 2^{(n+1)/4} base
            let c0jj = 2f64.powf((nf + 1.0) / 4.0) * base;
            let a = c0jj / (2.0 * (2.0 * (nf - 1.0)).sqrt());
            assert!((neutral_constant_a(n) / a - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn triple_product_c000_matches() {
        for n in 2..=4 {
            let z = grid();
            let p = ModeField::psi0(n, z.clone());
            let p2 = p.times_axial({
                let k = psi0_constant(n);
                move |x| k * (x * x - 2.0)
            });
            let c000 = gaussian_inner(&p2, &p).unwrap();
            let nf = n as f64;
            let expect = 2f64.powf((nf + 5.0) / 4.0)
                * (E * PI / (nf - 1.0)).powf(0.25 * (nf - 1.0))
                / sphere_area(n - 1).sqrt();
            assert!((c000 / expect - 1.0).abs() < 1e-9, "n={n}: {c000} vs {expect}");
        }
    }

    #[test]
    fn eval_l_eigenvalues() {
        let z = grid();
        for n in 2..=4 {
            let checks: Vec<(ModeField, f64)> = vec![
                (ModeField::one(n, z.clone()), 1.0),
                (ModeField::x_axial(n, z.clone()), 0.5),
                (ModeField::x_lateral(n, z.clone(), 0), 0.5),
                (ModeField::psi0(n, z.clone()), 0.0),
                (ModeField::psi_lateral(n, z.clone(), n - 1), 0.0),
            ];
            for (f, lambda) in checks {
                let lf = eval_l(&f).unwrap();
                let diff = lf.add_scaled(-lambda, &f.interior(2));
                assert!(diff.sup_bound() < 1e-6, "n={n} lambda={lambda}: {}", diff.sup_bound());
            }
        }
    }

    #[test]
    fn eval_l_rejects_tiny_grid() {
        let f = ModeField::one(3, vec![0.0, 0.1, 0.2, 0.3]);
        assert!(matches!(eval_l(&f), Err(Error::Stencil { .. })));
    }

    #[test]
    fn inner_product_errors() {
        let a = ModeField::one(3, symmetric_grid(12.0, 0.1));
        let b = ModeField::one(3, symmetric_grid(12.0, 0.05));
        assert_eq!(gaussian_inner(&a, &b), Err(Error::GridMismatch));
        let short = ModeField::one(3, symmetric_grid(6.0, 0.1));
        assert!(matches!(gaussian_inner(&short, &short), Err(Error::Truncation { .. })));
    }

    #[test]
    fn zero_graph_projects_to_zero() {
        let g = CylinderGraph::zero(3, grid());
        let s = project_modes(&g, 12.0).unwrap();
        assert_eq!(s.a, 0.0);
        assert!(s.b.iter().all(|v| *v == 0.0));
        assert_eq!((s.c, s.alpha0, s.u_plus, s.u_zero, s.u_minus), (0.0, 0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn translated_cylinder_gives_lateral_coefficient() {
        let n = 3;
        let field = ModeField::from_fn(n, grid(), |_| 0.0, |i, _| if i == 0 { 0.01 } else { 0.0 });
        let s = project_modes(&CylinderGraph::new(field).unwrap(), 12.0).unwrap();
        // recentering offset sqrt(2(n-1)) * b1 equals the translation 0.01
        assert!((cylinder_radius(n) * s.b[0] - 0.01).abs() < 1e-8, "{}", s.b[0]);
        assert!((s.b[0] - 0.005).abs() < 1e-8);
        assert!(s.a.abs() < 1e-6 && s.c.abs() < 1e-6 && s.alpha0.abs() < 1e-6);
        assert!(s.b[1..].iter().chain(&s.alpha).all(|v| v.abs() < 1e-6));
    }

    #[test]
    fn pure_zero_mode_projection() {
        let n = 3;
        let eps = 1e-3;
        // cutoff plateau |z| <= 12 covers the whole quadrature window
        let field = ModeField::axial(n, symmetric_grid(24.0, 0.01), |z| eps * (z * z - 2.0));
        let s = project_modes(&CylinderGraph::new(field).unwrap(), 24.0).unwrap();
        let expect = eps / psi0_constant(n);
        assert!((s.alpha0 / expect - 1.0).abs() < 1e-9, "{} vs {expect}", s.alpha0);
        assert!(s.u_plus < 1e-9 && s.u_minus < 1e-9, "{} {}", s.u_plus, s.u_minus);
    }

    #[test]
    fn rho_validation() {
        let g = CylinderGraph::zero(3, grid());
        assert!(matches!(project_modes(&g, 0.5), Err(Error::InvalidInput(_))));
        assert!(matches!(project_modes(&g, 13.0), Err(Error::Truncation { .. })));
    }

    #[test]
    fn cutoff_shape() {
        assert_eq!(cutoff(0.3), 1.0);
        assert_eq!(cutoff(-0.5), 1.0);
        assert_eq!(cutoff(1.0), 0.0);
        assert!((cutoff(0.75) - 0.5).abs() < 1e-15);
        let h = 1e-4;
        let d = (cutoff(0.5 + h) - cutoff(0.5)) / h;
        assert!(d.abs() < 1e-6);
    }

    #[test]
    fn csv_header_layout() {
        let s = SpectralCoefficients {
            a: 1.0, b: vec![0.0, 0.0], c: 0.0, alpha0: 0.0, alpha: vec![0.0, 0.0],
            u_plus: 0.0, u_zero: 0.0, u_minus: 0.0, norm_sq: 0.0,
        };
        let csv = coefficients_csv(2, &[(0.5, s)]);
        let first = csv.lines().next().unwrap();
        assert_eq!(first, "tau,a,b1,b2,c,alpha0,alpha1,alpha2,Uplus,Uzero,Uminus");
        assert_eq!(csv.lines().nth(1).unwrap().split(',').count(), 11);
    }
}
