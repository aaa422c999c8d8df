//! Moving-plane sweeps on planar cross-sections through the axis.
//!
//! The section is rasterised into scanlines orthogonal to the sweep
//! direction (spacing a quarter of the mean edge length, at most 1/512 of
//! the box); on each scanline the enclosed region is an exact union of
//! intervals. The margin of a plane `{x_axis = mu}` is the smallest gap,
//! measured along the sweep direction, between the reflected upper part and
//! the boundary of the region below the plane; a violation is reported as
//! minus the largest Euclidean distance of a reflected point from that
//! region.

use crate::error::{Error, Result};
use crate::flow::{EndCondition, ProfileCurve};
use crate::io::CsvTable;

#[derive(Debug, Clone, PartialEq)]
pub struct CrossSection {
    /// Closed polygon, last vertex joined to the first.
    pub points: Vec<[f64; 2]>,
    /// Signed area is positive.
    pub counterclockwise: bool,
    pub bbox: ([f64; 2], [f64; 2]),
    /// Coordinate along which the true section continues beyond the
    /// sampled window.
    pub unbounded_axis: Option<usize>,
}

impl CrossSection {
    pub fn from_polygon(points: Vec<[f64; 2]>) -> Result<Self> {
        Self::build(points, None)
    }

    fn build(points: Vec<[f64; 2]>, unbounded_axis: Option<usize>) -> Result<Self> {
        let m = points.len();
        if m < 3 {
            return Err(Error::InvalidInput("a section needs at least three vertices".into()));
        }
        if points.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err(Error::InvalidInput("section vertices must be finite".into()));
        }
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        let mut area = 0.0;
        for i in 0..m {
            let (p, q) = (points[i], points[(i + 1) % m]);
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
            area += p[0] * q[1] - q[0] * p[1];
        }
        if area == 0.0 {
            return Err(Error::InvalidInput("degenerate section".into()));
        }
        if let Some((i, j)) = first_crossing(&points) {
            return Err(Error::InvalidInput(format!("section edges {i} and {j} intersect")));
        }
        Ok(CrossSection { points, counterclockwise: area > 0.0, bbox: (lo, hi), unbounded_axis })
    }

    pub fn ellipse(center: [f64; 2], semi: [f64; 2], vertices: usize) -> Result<Self> {
        let pts = (0..vertices)
            .map(|k| {
                let th = 2.0 * std::f64::consts::PI * k as f64 / vertices as f64;
                [center[0] + semi[0] * th.cos(), center[1] + semi[1] * th.sin()]
            })
            .collect();
        Self::from_polygon(pts)
    }

    pub fn circle(center: [f64; 2], radius: f64, vertices: usize) -> Result<Self> {
        Self::ellipse(center, [radius, radius], vertices)
    }

    /// Section `{(z, x_1)}` of a rotational profile. Reflecting ends are
    /// closed by straight segments and flag the section as unbounded along
    /// the axis.
    pub fn from_profile(p: &ProfileCurve) -> Result<Self> {
        let (lo, hi) = p.active_range();
        let r = p.radius();
        let (tl, tr) = p.caps();
        let mut upper = Vec::new();
        if let Some(t) = tl {
            upper.push([t, 0.0]);
        }
        for i in lo..=hi {
            upper.push([p.z[i], r[i]]);
        }
        if let Some(t) = tr {
            upper.push([t, 0.0]);
        }
        let mut pts = upper.clone();
        // lower half without repeating the tips
        let skip_first = tl.is_some() as usize;
        let skip_last = tr.is_some() as usize;
        for q in upper[skip_first..upper.len() - skip_last].iter().rev() {
            pts.push([q[0], -q[1]]);
        }
        let open = p.left == EndCondition::Neumann || p.right == EndCondition::Neumann;
        Self::build(pts, open.then_some(0))
    }

    pub fn translated(&self, shift: [f64; 2]) -> Self {
        let points = self.points.iter().map(|p| [p[0] + shift[0], p[1] + shift[1]]).collect();
        let (lo, hi) = self.bbox;
        CrossSection {
            points,
            counterclockwise: self.counterclockwise,
            bbox: ([lo[0] + shift[0], lo[1] + shift[1]], [hi[0] + shift[0], hi[1] + shift[1]]),
            unbounded_axis: self.unbounded_axis,
        }
    }

    /// Scanline spacing.
    pub fn raster_spacing(&self) -> f64 {
        let m = self.points.len();
        let total: f64 = (0..m).map(|i| dist(self.points[i], self.points[(i + 1) % m])).sum();
        let extent = (self.bbox.1[0] - self.bbox.0[0]).max(self.bbox.1[1] - self.bbox.0[1]);
        (0.25 * total / m as f64).min(extent / 512.0)
    }

    /// Euclidean distance from `q` to `K ∩ {x_axis <= mu}`, where `q` lies
    /// below the plane and outside the region.
    fn distance_below(&self, q: [f64; 2], axis: usize, mu: f64) -> f64 {
        let m = self.points.len();
        let mut best = f64::INFINITY;
        for i in 0..m {
            let (mut a, mut b) = (self.points[i], self.points[(i + 1) % m]);
            if a[axis] > mu && b[axis] > mu {
                continue;
            }
            // clip the edge to the lower half-plane
            if a[axis] > mu || b[axis] > mu {
                let s = (mu - a[axis]) / (b[axis] - a[axis]);
                let cut = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
                if a[axis] > mu {
                    a = cut;
                } else {
                    b = cut;
                }
            }
            best = best.min(point_segment(q, a, b));
        }
        // the flat face cut out by the plane
        for (l, r) in self.intervals(1 - axis, mu) {
            let mut a = [0.0; 2];
            let mut b = [0.0; 2];
            a[axis] = mu;
            b[axis] = mu;
            a[1 - axis] = l;
            b[1 - axis] = r;
            best = best.min(point_segment(q, a, b));
        }
        best
    }

    /// Intervals of the enclosed region on the line `x_other = c`, as
    /// coordinates along `axis`.
    fn intervals(&self, axis: usize, c: f64) -> Vec<(f64, f64)> {
        let other = 1 - axis;
        let m = self.points.len();
        let mut xs = Vec::new();
        for i in 0..m {
            let (p, q) = (self.points[i], self.points[(i + 1) % m]);
            if (p[other] <= c) != (q[other] <= c) {
                let s = (c - p[other]) / (q[other] - p[other]);
                xs.push(p[axis] + s * (q[axis] - p[axis]));
            }
        }
        xs.sort_by(f64::total_cmp);
        xs.chunks_exact(2).map(|w| (w[0], w[1])).collect()
    }

    fn scanlines(&self, axis: usize) -> (f64, Vec<f64>) {
        let other = 1 - axis;
        let h = self.raster_spacing();
        let (lo, hi) = (self.bbox.0[other], self.bbox.1[other]);
        let count = ((hi - lo) / h).ceil().max(1.0) as usize;
        let step = (hi - lo) / count as f64;
        (step, (0..count).map(|k| lo + (k as f64 + 0.5) * step).collect())
    }

    fn check_axis(&self, axis: usize, window: Option<(f64, f64)>) -> Result<()> {
        if axis > 1 {
            return Err(Error::InvalidInput(format!("axis {axis} is not a section coordinate")));
        }
        if self.unbounded_axis == Some(axis) && window.is_none() {
            return Err(Error::FarFieldRequired);
        }
        Ok(())
    }
}

fn dist(p: [f64; 2], q: [f64; 2]) -> f64 {
    ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
}

fn point_segment(q: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let s = if len2 > 0.0 { (((q[0] - a[0]) * d[0] + (q[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0) } else { 0.0 };
    dist(q, [a[0] + s * d[0], a[1] + s * d[1]])
}

fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn segments_cross(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> bool {
    let (o1, o2) = (orient(a, b, c), orient(a, b, d));
    let (o3, o4) = (orient(c, d, a), orient(c, d, b));
    o1 * o2 < 0.0 && o3 * o4 < 0.0
}

/// First pair of non-adjacent edges that cross properly.
fn first_crossing(pts: &[[f64; 2]]) -> Option<(usize, usize)> {
    let m = pts.len();
    for i in 0..m {
        let (a, b) = (pts[i], pts[(i + 1) % m]);
        let (xlo, xhi) = (a[0].min(b[0]), a[0].max(b[0]));
        let (ylo, yhi) = (a[1].min(b[1]), a[1].max(b[1]));
        for j in i + 2..m {
            if i == 0 && j == m - 1 {
                continue;
            }
            let (c, d) = (pts[j], pts[(j + 1) % m]);
            if c[0].max(d[0]) < xlo || c[0].min(d[0]) > xhi || c[1].max(d[1]) < ylo || c[1].min(d[1]) > yhi {
                continue;
            }
            if segments_cross(a, b, c, d) {
                return Some((i, j));
            }
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Containment {
    pub contained: bool,
    /// Gap (>= 0) or minus the violation depth; infinite when nothing lies
    /// above the plane.
    pub margin: f64,
}

fn clip(iv: &[(f64, f64)], window: Option<(f64, f64)>) -> Vec<(f64, f64)> {
    match window {
        None => iv.to_vec(),
        Some((w0, w1)) => iv.iter().filter_map(|&(a, b)| {
            let (a, b) = (a.max(w0), b.min(w1));
            (b > a).then_some((a, b))
        }).collect(),
    }
}

/// Margin of one scanline; `depth` measures how far a reflected point lies
/// outside the region.
fn line_margin(k: &[(f64, f64)], mu: f64, window: Option<(f64, f64)>, depth: impl Fn(f64) -> f64) -> f64 {
    let mut margin = f64::INFINITY;
    for &(a, b) in k {
        if b <= mu {
            continue;
        }
        let mut lo = 2.0 * mu - b;
        let hi = 2.0 * mu - a.max(mu);
        if let Some((w0, _)) = window {
            // reflected points beyond the window are covered by the far-field assumption
            lo = lo.max(w0);
            if hi <= lo {
                continue;
            }
        }
        let host = k.iter().find(|&&(l, r)| l <= lo && hi <= r);
        let m = match host {
            Some(&(l, r)) => {
                let right = if r < mu { r - hi } else { f64::INFINITY };
                (lo - l).min(right)
            }
            None => -violation_candidates(k, lo, hi, mu).into_iter().map(&depth).fold(0.0, f64::max),
        };
        margin = margin.min(m);
    }
    margin
}

/// Points of `[lo, hi]` outside the part of `k` below `mu` that are
/// farthest from it along the line: segment ends and midpoints of gaps.
fn violation_candidates(k: &[(f64, f64)], lo: f64, hi: f64, mu: f64) -> Vec<f64> {
    let below: Vec<(f64, f64)> = k.iter().filter(|iv| iv.0 < mu).map(|&(l, r)| (l, r.min(mu))).collect();
    let inside = |x: f64| below.iter().any(|&(l, r)| l <= x && x <= r);
    let mut cands = vec![lo, hi];
    for w in below.windows(2) {
        cands.push(0.5 * (w[0].1 + w[1].0));
    }
    cands.into_iter().filter(|&x| x >= lo && x <= hi && !inside(x)).collect()
}

/// Reflects the part of `s` above `{x_axis = mu}` and tests containment in
/// the part below. `window` bounds the sweep coordinate where the section is
/// assumed symmetric beyond it; it is required when the section is
/// unbounded along `axis`.
pub fn reflect_and_test(s: &CrossSection, mu: f64, axis: usize, window: Option<(f64, f64)>) -> Result<Containment> {
    s.check_axis(axis, window)?;
    let margin = margin_on(s, &raster(s, axis, window), mu, axis, window, true);
    Ok(Containment { contained: margin >= 0.0, margin })
}

/// Scanlines with their (plane-independent) intervals.
fn raster(s: &CrossSection, axis: usize, window: Option<(f64, f64)>) -> Vec<(f64, Vec<(f64, f64)>)> {
    let (_, lines) = s.scanlines(axis);
    lines.into_iter().map(|c| (c, clip(&s.intervals(axis, c), window))).collect()
}

/// With `exact = false` violations count with unit depth, which is enough
/// for the sign.
fn margin_on(
    s: &CrossSection,
    lines: &[(f64, Vec<(f64, f64)>)],
    mu: f64,
    axis: usize,
    window: Option<(f64, f64)>,
    exact: bool,
) -> f64 {
    let mut margin = f64::INFINITY;
    for (c, k) in lines {
        let depth = |x: f64| {
            if !exact {
                return 1.0;
            }
            let mut q = [0.0; 2];
            q[axis] = x;
            q[1 - axis] = *c;
            s.distance_below(q, axis, mu)
        };
        margin = margin.min(line_margin(k, mu, window, depth));
        if !exact && margin < 0.0 {
            break;
        }
    }
    margin
}

/// `mu,margin` rows for a list of planes.
pub fn margin_sweep(s: &CrossSection, axis: usize, mus: &[f64], window: Option<(f64, f64)>) -> Result<String> {
    s.check_axis(axis, window)?;
    let lines = raster(s, axis, window);
    let mut t = CsvTable::new(&["mu", "margin"]);
    for &mu in mus {
        t.row(&[mu, margin_on(s, &lines, mu, axis, window, true)]);
    }
    Ok(t.finish())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetryPlane {
    pub mu: f64,
    /// Largest mismatch, along the sweep direction, between the boundary
    /// points of a scanline and their mirror images about `mu`.
    pub residual: f64,
    /// Scanline spacing of the raster.
    pub grid: f64,
}

/// Asymmetry of the section about `{x_axis = mu}`.
pub fn asymmetry(s: &CrossSection, mu: f64, axis: usize, window: Option<(f64, f64)>) -> Result<f64> {
    s.check_axis(axis, window)?;
    let mut worst = 0.0f64;
    for (_, k) in raster(s, axis, window) {
        let ends: Vec<f64> = k.iter().flat_map(|&(a, b)| [a, b]).collect();
        let mirrored: Vec<f64> = ends.iter().map(|x| 2.0 * mu - x).collect();
        let near = |x: f64, set: &[f64]| set.iter().fold(f64::INFINITY, |m, y| m.min((x - y).abs()));
        for &x in &ends {
            worst = worst.max(near(x, &mirrored));
        }
    }
    Ok(worst)
}

/// Lowers the plane from the top of the bounding box until containment
/// first fails and bisects the crossing to `tol`.
pub fn find_symmetry_plane(s: &CrossSection, axis: usize, tol: f64, window: Option<(f64, f64)>) -> Result<SymmetryPlane> {
    s.check_axis(axis, window)?;
    if !(tol > 0.0) {
        return Err(Error::InvalidInput("tolerance must be positive".into()));
    }
    let grid = s.raster_spacing();
    let (mut lo, mut hi) = (s.bbox.0[axis], s.bbox.1[axis]);
    if let Some((w0, w1)) = window {
        lo = lo.max(w0);
        hi = hi.min(w1);
    }
    let h = grid.min((hi - lo) / 400.0);
    let lines = raster(s, axis, window);
    let margin = |mu: f64| Ok::<f64, Error>(margin_on(s, &lines, mu, axis, window, false));
    let start = hi - h;
    if !(margin(start)? >= 0.0) {
        return Err(Error::NoStartPlane);
    }
    let mut upper = start;
    let mut lower = None;
    let mut mu = start;
    while mu > lo {
        mu -= h;
        if margin(mu)? < 0.0 {
            lower = Some(mu);
            break;
        }
        upper = mu;
    }
    let mut lower = lower.unwrap_or(lo);
    while upper - lower > tol {
        let mid = 0.5 * (upper + lower);
        if margin(mid)? >= 0.0 {
            upper = mid;
        } else {
            lower = mid;
        }
    }
    let mu = 0.5 * (upper + lower);
    Ok(SymmetryPlane { mu, residual: asymmetry(s, mu, axis, window)?, grid })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_margins() {
        let c = CrossSection::circle([0.0, 0.0], 1.0, 2000).unwrap();
        let at = |mu| reflect_and_test(&c, mu, 0, None).unwrap();
        assert!(at(0.0).margin.abs() < 1e-9 && at(0.0).contained || at(0.0).margin.abs() < 1e-9);
        assert!((at(0.3).margin - 0.6).abs() < 1e-4, "{}", at(0.3).margin);
        assert!(at(-0.3).margin < -0.5);
    }

    #[test]
    fn shifted_ellipse_violates() {
        let e = CrossSection::ellipse([0.2, 0.0], [1.5, 0.7], 2000).unwrap();
        let r = reflect_and_test(&e, 0.0, 0, None).unwrap();
        assert!(!r.contained);
        assert!((r.margin + 0.4).abs() < 1e-4, "{}", r.margin);
    }

    #[test]
    fn self_intersection_rejected() {
        let bow = vec![[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]];
        assert!(CrossSection::from_polygon(bow).is_err());
        let sq = CrossSection::from_polygon(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).unwrap();
        assert!(sq.counterclockwise);
    }

    #[test]
    fn plane_of_symmetry_and_translation() {
        let e = CrossSection::ellipse([0.0, 0.0], [1.0, 2.0], 800).unwrap();
        let p = find_symmetry_plane(&e, 1, 1e-10, None).unwrap();
        assert!(p.mu.abs() <= p.grid && p.residual <= p.grid);
        let q = find_symmetry_plane(&e.translated([0.0, 0.7]), 1, 1e-10, None).unwrap();
        assert!((q.mu - p.mu - 0.7).abs() < 1e-9);
    }

    #[test]
    fn open_section_needs_window() {
        let c = ProfileCurve::cylinder(3, 1.0, 2.0, 0.05).unwrap();
        let s = CrossSection::from_profile(&c).unwrap();
        assert_eq!(s.unbounded_axis, Some(0));
        assert!(matches!(reflect_and_test(&s, 0.0, 0, None), Err(Error::FarFieldRequired)));
        assert!(reflect_and_test(&s, 0.0, 0, Some((-1.5, 1.5))).unwrap().contained);
        let p = find_symmetry_plane(&s, 1, 1e-10, None).unwrap();
        assert!(p.mu.abs() < p.grid);
    }

    #[test]
    fn notch_stops_the_sweep() {
        // the reflected right prong leaves the prong once mu < 2.5
        let w = vec![[0.0, 0.0], [3.0, 0.0], [3.0, 2.0], [2.0, 2.0], [1.5, 1.0], [1.0, 2.0], [0.0, 2.0]];
        let s = CrossSection::from_polygon(w).unwrap();
        let p = find_symmetry_plane(&s, 0, 1e-9, None).unwrap();
        assert!((p.mu - 2.5).abs() < p.grid, "{}", p.mu);
    }

    #[test]
    fn thin_wall_has_no_start_plane() {
        let c = vec![[0.0, 0.0], [3.0, 0.0], [3.0, 2.0], [0.0, 2.0], [0.0, 1.9], [2.9999, 1.9], [2.9999, 0.1], [0.0, 0.1]];
        let s = CrossSection::from_polygon(c).unwrap();
        assert!(matches!(find_symmetry_plane(&s, 0, 1e-9, None), Err(Error::NoStartPlane)));
    }
}
