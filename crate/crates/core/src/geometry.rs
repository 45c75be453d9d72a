//! Profile curves, discrete curvature, Gaussian-weighted area and entropy.
//!
//! A surface of revolution about the `x` axis is stored through its generating curve
//! `(x, r)` with `r >= 0`. For `n_ambient = 1` the same type stores a planar curve and
//! `r` is just the second coordinate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{compensated_sum, log_add_exp};
use crate::optim::nelder_mead_max;
use crate::spline::{CurveSpline, SplineEnds, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Topology {
    ClosedLoop,
    AxisToAxis,
    OpenEnd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileCurve {
    pub x: Vec<f64>,
    pub r: Vec<f64>,
    pub topology: Topology,
    /// Cumulative spline arclength at each sample, starting at 0.
    pub arclength: Vec<f64>,
    /// Total length (includes the closing arc for loops).
    pub length: f64,
    pub n_ambient: u8,
}

pub const MIN_POINTS: usize = 8;

fn cross(a: Vec2, b: Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

fn wrap_angle(a: f64) -> f64 {
    let t = std::f64::consts::TAU;
    a - t * ((a + std::f64::consts::PI) / t).floor()
}

fn segments_cross(p1: Vec2, p2: Vec2, q1: Vec2, q2: Vec2) -> bool {
    let d1 = cross(p2 - p1, q1 - p1);
    let d2 = cross(p2 - p1, q2 - p1);
    let d3 = cross(q2 - q1, p1 - q1);
    let d4 = cross(q2 - q1, p2 - q1);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    let on = |a: Vec2, b: Vec2, c: Vec2, d: f64| {
        d == 0.0 && c.x >= a.x.min(b.x) && c.x <= a.x.max(b.x) && c.y >= a.y.min(b.y) && c.y <= a.y.max(b.y)
    };
    on(p1, p2, q1, d1) || on(p1, p2, q2, d2) || on(q1, q2, p1, d3) || on(q1, q2, p2, d4)
}

/// First pair of non-adjacent crossing segments of the polyline, if any.
pub fn find_self_intersection(points: &[Vec2], closed: bool) -> Option<(usize, usize)> {
    let n = points.len();
    let segs = if closed { n } else { n - 1 };
    let mut order: Vec<usize> = (0..segs).collect();
    let bounds = |j: usize| {
        let a = points[j];
        let b = points[(j + 1) % n];
        (a.x.min(b.x), a.x.max(b.x), a.y.min(b.y), a.y.max(b.y))
    };
    order.sort_by(|&a, &b| bounds(a).0.partial_cmp(&bounds(b).0).unwrap());
    for (k, &i) in order.iter().enumerate() {
        let bi = bounds(i);
        for &j in &order[k + 1..] {
            let bj = bounds(j);
            if bj.0 > bi.1 {
                break;
            }
            if bj.3 < bi.2 || bj.2 > bi.3 {
                continue;
            }
            let (lo, hi) = (i.min(j), i.max(j));
            if hi - lo == 1 || (closed && lo == 0 && hi == segs - 1) {
                continue;
            }
            if segments_cross(points[i], points[(i + 1) % n], points[j], points[(j + 1) % n]) {
                return Some((lo, hi));
            }
        }
    }
    None
}

/// Twice the signed area enclosed by the curve, closing open curves through the axis.
fn signed_area(points: &[Vec2], topology: Topology) -> f64 {
    let mut loop_pts = points.to_vec();
    if topology == Topology::OpenEnd {
        let last = points[points.len() - 1];
        loop_pts.push(Vec2::new(last.x, 0.0));
        loop_pts.push(Vec2::new(points[0].x, 0.0));
    }
    let n = loop_pts.len();
    (0..n).map(|i| cross(loop_pts[i], loop_pts[(i + 1) % n])).sum()
}

impl ProfileCurve {
    /// Wraps samples without resampling. Orientation is normalized so that the
    /// right-hand normal points outward (away from the enclosed region or the axis).
    pub fn from_samples(points: &[Vec2], topology: Topology, n_ambient: u8) -> Result<Self> {
        if !(n_ambient == 1 || n_ambient == 2) {
            return Err(Error::Invalid(format!("n_ambient must be 1 or 2, got {n_ambient}")));
        }
        if points.len() < MIN_POINTS {
            return Err(Error::TooFewPoints { got: points.len(), need: MIN_POINTS });
        }
        if points.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(Error::Invalid("non-finite sample".into()));
        }
        if n_ambient == 1 && topology == Topology::AxisToAxis {
            return Err(Error::Invalid("axis-to-axis topology needs n_ambient = 2".into()));
        }
        let mut pts = points.to_vec();
        if n_ambient == 2 {
            let last = pts.len() - 1;
            let scale = pts.iter().map(|p| p.norm()).fold(0.0, f64::max).max(1.0);
            for (i, p) in pts.iter_mut().enumerate() {
                let end = topology == Topology::AxisToAxis && (i == 0 || i == last);
                if end {
                    if p.y.abs() > 1e-9 * scale {
                        return Err(Error::Invalid(format!("axis endpoint {i} has r = {}", p.y)));
                    }
                    p.y = 0.0;
                } else if p.y < 0.0 || (p.y == 0.0 && topology != Topology::OpenEnd) {
                    return Err(Error::NegativeRadius { index: i, r: p.y });
                }
            }
        }
        if signed_area(&pts, topology) < 0.0 {
            pts.reverse();
        }
        let closed = topology == Topology::ClosedLoop;
        let n = pts.len();
        for i in 0..(if closed { n } else { n - 1 }) {
            if (pts[(i + 1) % n] - pts[i]).norm() == 0.0 {
                return Err(Error::DegenerateSegment(i));
            }
        }
        let mut curve = ProfileCurve {
            x: pts.iter().map(|p| p.x).collect(),
            r: pts.iter().map(|p| p.y).collect(),
            topology,
            arclength: Vec::new(),
            length: 0.0,
            n_ambient,
        };
        let cum = curve.spline().cumulative_arclength();
        curve.length = cum[cum.len() - 1];
        curve.arclength = cum[..n].to_vec();
        Ok(curve)
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn is_closed(&self) -> bool {
        self.topology == Topology::ClosedLoop
    }

    pub fn point(&self, i: usize) -> Vec2 {
        Vec2::new(self.x[i], self.r[i])
    }

    pub fn points(&self) -> Vec<Vec2> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    pub fn n_segments(&self) -> usize {
        if self.is_closed() {
            self.len()
        } else {
            self.len() - 1
        }
    }

    /// Chord length from sample `i` to its successor.
    pub fn chord(&self, i: usize) -> f64 {
        let n = self.len();
        (self.point((i + 1) % n) - self.point(i)).norm()
    }

    pub fn mean_spacing(&self) -> f64 {
        self.length / self.n_segments() as f64
    }

    pub fn spline_ends(&self) -> SplineEnds {
        match (self.topology, self.n_ambient) {
            (Topology::ClosedLoop, _) => SplineEnds::Periodic,
            (Topology::AxisToAxis, 2) => SplineEnds::AxisMirror,
            _ => SplineEnds::Natural,
        }
    }

    pub fn spline(&self) -> CurveSpline {
        CurveSpline::new(&self.points(), self.spline_ends())
    }

    /// Arclength-uniform resampling with `n` samples. Open and axis-to-axis ends stay put.
    pub fn resample(&self, n: usize) -> Result<Self> {
        Ok(self.resample_with_positions(n)?.0)
    }

    /// Like [`ProfileCurve::resample`], also returning where each new sample sits in the
    /// arclength coordinate of `self`.
    pub fn resample_with_positions(&self, n: usize) -> Result<(Self, Vec<f64>)> {
        if n < MIN_POINTS {
            return Err(Error::TooFewPoints { got: n, need: MIN_POINTS });
        }
        let sp = self.spline();
        let mut cum = self.arclength.clone();
        if self.is_closed() {
            cum.push(self.length);
        }
        let segs = if self.is_closed() { n } else { n - 1 };
        let positions: Vec<f64> = (0..n).map(|j| self.length * j as f64 / segs as f64).collect();
        let mut pts: Vec<Vec2> = positions.iter().map(|&s| sp.eval(sp.param_at_arclength(&cum, s))).collect();
        if !self.is_closed() {
            pts[0] = self.point(0);
            pts[n - 1] = self.point(self.len() - 1);
        }
        if self.topology == Topology::AxisToAxis {
            pts[0].y = 0.0;
            pts[n - 1].y = 0.0;
        }
        if self.n_ambient == 2 {
            for p in pts.iter_mut().take(n - 1).skip(1) {
                if p.y <= 0.0 {
                    p.y = f64::MIN_POSITIVE.max(p.y.abs());
                }
            }
        }
        let out = Self::from_samples_oriented(&pts, self.topology, self.n_ambient)?;
        Ok((out, positions))
    }

    // Samples already carry the right orientation; skip the area test so that a
    // flow step can never flip the labeling.
    fn from_samples_oriented(pts: &[Vec2], topology: Topology, n_ambient: u8) -> Result<Self> {
        let n = pts.len();
        let closed = topology == Topology::ClosedLoop;
        for i in 0..(if closed { n } else { n - 1 }) {
            if (pts[(i + 1) % n] - pts[i]).norm() == 0.0 {
                return Err(Error::DegenerateSegment(i));
            }
        }
        let mut curve = ProfileCurve {
            x: pts.iter().map(|p| p.x).collect(),
            r: pts.iter().map(|p| p.y).collect(),
            topology,
            arclength: Vec::new(),
            length: 0.0,
            n_ambient,
        };
        let cum = curve.spline().cumulative_arclength();
        curve.length = cum[cum.len() - 1];
        curve.arclength = cum[..n].to_vec();
        Ok(curve)
    }

    /// Replace sample positions keeping topology and orientation (used by flows).
    pub fn with_points(&self, pts: &[Vec2]) -> Result<Self> {
        Self::from_samples_oriented(pts, self.topology, self.n_ambient)
    }

    pub fn self_intersection(&self) -> Option<(usize, usize)> {
        find_self_intersection(&self.points(), self.is_closed())
    }
}

/// Validate, orient and resample raw points into a near-uniform profile.
pub fn build_profile(points: &[Vec2], topology: Topology, n_ambient: u8) -> Result<ProfileCurve> {
    if points.len() < MIN_POINTS {
        return Err(Error::TooFewPoints { got: points.len(), need: MIN_POINTS });
    }
    if let Some((i, j)) = find_self_intersection(points, topology == Topology::ClosedLoop) {
        return Err(Error::SelfIntersection(i, j));
    }
    let raw = ProfileCurve::from_samples(points, topology, n_ambient)?;
    raw.resample(points.len())
}

/// Per-sample differential geometry of the hypersurface generated by a profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceGeometry {
    pub n_ambient: u8,
    /// Tangent angle of the profile.
    pub theta: Vec<f64>,
    /// Outward unit normal `(n_x, n_r)`.
    pub normal: Vec<[f64; 2]>,
    pub kappa_profile: Vec<f64>,
    /// Principal curvature of the parallel circles (zero for curves).
    pub kappa_rot: Vec<f64>,
    pub h: Vec<f64>,
    pub a_norm_sq: Vec<f64>,
    /// `<x, n>`
    pub support: Vec<f64>,
    pub gauss_weight: Vec<f64>,
    /// `2 pi r` for surfaces, `1` for curves.
    pub area_element: Vec<f64>,
    /// Dual-cell length in the arclength variable.
    pub cell: Vec<f64>,
    /// Quadrature weights for `int f e^{-|x|^2/4} dmu` (unnormalized), in log form.
    pub log_mass: Vec<f64>,
}

fn log_density(p: Vec2, n_ambient: u8) -> f64 {
    let g = -p.norm_squared() / 4.0;
    if n_ambient == 2 {
        (std::f64::consts::TAU * p.y.abs()).ln() + g
    } else {
        g
    }
}

/// Log quadrature weights of the Gaussian area: each sample owns the half-edges next to
/// it, integrated by the midpoint rule on each half.
pub fn log_masses(points: &[Vec2], topology: Topology, n_ambient: u8) -> Vec<f64> {
    let n = points.len();
    let closed = topology == Topology::ClosedLoop;
    let mut out = vec![f64::NEG_INFINITY; n];
    let segs = if closed { n } else { n - 1 };
    for j in 0..segs {
        let a = points[j];
        let b = points[(j + 1) % n];
        let half = ((b - a).norm() / 2.0).ln();
        let qa = a + (b - a) * 0.25;
        let qb = a + (b - a) * 0.75;
        out[j] = log_add_exp(out[j], half + log_density(qa, n_ambient));
        let k = (j + 1) % n;
        out[k] = log_add_exp(out[k], half + log_density(qb, n_ambient));
    }
    out
}

impl SurfaceGeometry {
    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }

    pub fn mass(&self, i: usize) -> f64 {
        self.log_mass[i].exp()
    }

    pub fn masses(&self) -> Vec<f64> {
        self.log_mass.iter().map(|v| v.exp()).collect()
    }

    /// `H - <x,n>/2` at every sample.
    pub fn shrinker_defect(&self) -> Vec<f64> {
        self.h.iter().zip(&self.support).map(|(h, s)| h - s / 2.0).collect()
    }
}

fn menger(a: Vec2, b: Vec2) -> f64 {
    let c = a + b;
    2.0 * cross(a, b) / (a.norm() * b.norm() * c.norm())
}

fn angle(v: Vec2) -> f64 {
    v.y.atan2(v.x)
}

pub fn compute_geometry(curve: &ProfileCurve) -> Result<SurfaceGeometry> {
    let n = curve.len();
    let pts = curve.points();
    let closed = curve.is_closed();
    let tiny = 1e-14 * curve.length.max(1.0);
    for j in 0..curve.n_segments() {
        if curve.chord(j) <= tiny {
            return Err(Error::DegenerateSegment(j));
        }
    }
    let axis = curve.topology == Topology::AxisToAxis;
    let mirror = |p: Vec2| Vec2::new(p.x, -p.y);
    let mut kappa = vec![0.0; n];
    let mut theta = vec![0.0; n];
    for i in 0..n {
        let prev = if i > 0 {
            Some(pts[i - 1])
        } else if closed {
            Some(pts[n - 1])
        } else if axis {
            Some(mirror(pts[1]))
        } else {
            None
        };
        let next = if i + 1 < n {
            Some(pts[i + 1])
        } else if closed {
            Some(pts[0])
        } else if axis {
            Some(mirror(pts[n - 2]))
        } else {
            None
        };
        match (prev, next) {
            (Some(pp), Some(pn)) => {
                let a = pts[i] - pp;
                let b = pn - pts[i];
                let k = menger(a, b);
                let tb = angle(a) + (a.norm() * k / 2.0).clamp(-1.0, 1.0).asin();
                let tf = angle(b) - (b.norm() * k / 2.0).clamp(-1.0, 1.0).asin();
                kappa[i] = k;
                theta[i] = tb + wrap_angle(tf - tb) / 2.0;
            }
            (None, Some(pn)) => {
                let k = menger(pts[1] - pts[0], pts[2] - pts[1]);
                let b = pn - pts[i];
                kappa[i] = k;
                theta[i] = angle(b) - (b.norm() * k / 2.0).clamp(-1.0, 1.0).asin();
            }
            (Some(pp), None) => {
                let k = menger(pts[n - 2] - pts[n - 3], pts[n - 1] - pts[n - 2]);
                let a = pts[i] - pp;
                kappa[i] = k;
                theta[i] = angle(a) + (a.norm() * k / 2.0).clamp(-1.0, 1.0).asin();
            }
            (None, None) => unreachable!(),
        }
    }
    let mut kappa_rot = vec![0.0; n];
    if curve.n_ambient == 2 {
        for i in 0..n {
            kappa_rot[i] = -theta[i].cos() / curve.r[i];
        }
        if axis {
            let band = 10.0 * curve.mean_spacing();
            // near each pole: kappa_rot = kappa_pole + c * d^2, c matched just outside the band
            for pole in [0usize, n - 1] {
                let dist = |i: usize| (curve.arclength[i] - curve.arclength[pole]).abs();
                let step: isize = if pole == 0 { 1 } else { -1 };
                let mut j = pole as isize;
                while (j as usize) < n && j >= 0 && dist(j as usize) < band {
                    j += step;
                }
                let j = j.clamp(0, n as isize - 1) as usize;
                let kp = kappa[pole];
                let dj = dist(j);
                let c = if dj > 0.0 { (kappa_rot[j] - kp) / (dj * dj) } else { 0.0 };
                let mut i = pole as isize;
                while i != j as isize {
                    let d = dist(i as usize);
                    kappa_rot[i as usize] = kp + c * d * d;
                    i += step;
                }
            }
        }
    }
    let h: Vec<f64> = kappa.iter().zip(&kappa_rot).map(|(a, b)| a + b).collect();
    let a_norm_sq: Vec<f64> = kappa.iter().zip(&kappa_rot).map(|(a, b)| a * a + b * b).collect();
    let normal: Vec<[f64; 2]> = theta.iter().map(|t| [t.sin(), -t.cos()]).collect();
    let support: Vec<f64> = (0..n).map(|i| pts[i].x * normal[i][0] + pts[i].y * normal[i][1]).collect();
    let gauss_weight: Vec<f64> = pts.iter().map(|p| (-p.norm_squared() / 4.0).exp()).collect();
    let area_element: Vec<f64> =
        curve.r.iter().map(|r| if curve.n_ambient == 2 { std::f64::consts::TAU * r } else { 1.0 }).collect();
    let mut cell = vec![0.0; n];
    for j in 0..curve.n_segments() {
        let half = curve.chord(j) / 2.0;
        cell[j] += half;
        cell[(j + 1) % n] += half;
    }
    let log_mass = log_masses(&pts, curve.topology, curve.n_ambient);
    Ok(SurfaceGeometry {
        n_ambient: curve.n_ambient,
        theta,
        normal,
        kappa_profile: kappa,
        kappa_rot,
        h,
        a_norm_sq,
        support,
        gauss_weight,
        area_element,
        cell,
        log_mass,
    })
}

/// Gaussian normalization `(4 pi)^{-n/2}`.
pub fn gaussian_normalization(n_ambient: u8) -> f64 {
    (4.0 * std::f64::consts::PI).powf(-(n_ambient as f64) / 2.0)
}

/// `int e^{-|x|^2/4} dmu` over the samples, restricted to `|x| <= truncation` if given.
pub fn f_functional(curve: &ProfileCurve, geometry: &SurfaceGeometry, truncation: Option<f64>, normalized: bool) -> Result<f64> {
    if curve.topology == Topology::OpenEnd && truncation.is_none() {
        return Err(Error::UnboundedDomain);
    }
    let cut = truncation.unwrap_or(f64::INFINITY);
    let sum = compensated_sum(
        (0..curve.len()).filter(|&i| curve.point(i).norm() <= cut).map(|i| geometry.log_mass[i].exp()),
    );
    Ok(if normalized { sum * gaussian_normalization(curve.n_ambient) } else { sum })
}

/// Axis-preserving rigid motion composed with a dilation: `p -> (p - translation) / scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidMotionDilation {
    pub translation: [f64; 2],
    pub scale: f64,
}

impl Default for RigidMotionDilation {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidMotionDilation {
    pub fn identity() -> Self {
        Self { translation: [0.0, 0.0], scale: 1.0 }
    }

    pub fn new(translation: [f64; 2], scale: f64) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::Invalid(format!("scale must be positive, got {scale}")));
        }
        Ok(Self { translation, scale })
    }

    pub fn apply_point(&self, p: Vec2) -> Vec2 {
        Vec2::new((p.x - self.translation[0]) / self.scale, (p.y - self.translation[1]) / self.scale)
    }

    /// `self` after `first`.
    pub fn compose(&self, first: &Self) -> Self {
        Self {
            translation: [
                first.translation[0] + first.scale * self.translation[0],
                first.translation[1] + first.scale * self.translation[1],
            ],
            scale: self.scale * first.scale,
        }
    }

    pub fn inverse(&self) -> Self {
        Self {
            translation: [-self.translation[0] / self.scale, -self.translation[1] / self.scale],
            scale: 1.0 / self.scale,
        }
    }
}

pub fn apply_motion(curve: &ProfileCurve, m: &RigidMotionDilation) -> Result<ProfileCurve> {
    if !(m.scale > 0.0) {
        return Err(Error::Invalid(format!("scale must be positive, got {}", m.scale)));
    }
    if curve.n_ambient == 2 && m.translation[1] != 0.0 {
        return Err(Error::SymmetryBreaking(m.translation[1]));
    }
    let mut out = curve.clone();
    for i in 0..curve.len() {
        out.x[i] = (curve.x[i] - m.translation[0]) / m.scale;
        out.r[i] = (curve.r[i] - m.translation[1]) / m.scale;
        out.arclength[i] = curve.arclength[i] / m.scale;
    }
    out.length = curve.length / m.scale;
    Ok(out)
}

/// Gaussian area of the moved curve, computed straight from the samples.
pub fn f_under_motion(curve: &ProfileCurve, m: &RigidMotionDilation, truncation: Option<f64>, normalized: bool) -> Result<f64> {
    if curve.topology == Topology::OpenEnd && truncation.is_none() {
        return Err(Error::UnboundedDomain);
    }
    let pts: Vec<Vec2> = curve.points().into_iter().map(|p| m.apply_point(p)).collect();
    let lm = log_masses(&pts, curve.topology, curve.n_ambient);
    let cut = truncation.unwrap_or(f64::INFINITY);
    let sum = compensated_sum((0..pts.len()).filter(|&i| curve.point(i).norm() <= cut).map(|i| lm[i].exp()));
    Ok(if normalized { sum * gaussian_normalization(curve.n_ambient) } else { sum })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EntropySearch {
    /// Half width of the axial-shift window around the mean `x` of the curve.
    pub shift_half_width: f64,
    pub log_scale_min: f64,
    pub log_scale_max: f64,
    pub grid: usize,
    pub tol: f64,
    pub normalized_f: bool,
}

impl Default for EntropySearch {
    fn default() -> Self {
        Self { shift_half_width: 2.0, log_scale_min: -1.0, log_scale_max: 1.0, grid: 21, tol: 1e-8, normalized_f: true }
    }
}

/// Supremum of the Gaussian area over axial shifts and dilations (plus the transverse
/// shift for planar curves). Returns the value and the maximizing motion.
pub fn entropy(curve: &ProfileCurve, cfg: &EntropySearch) -> Result<(f64, RigidMotionDilation)> {
    if curve.topology == Topology::OpenEnd {
        return Err(Error::UnboundedDomain);
    }
    if cfg.grid < 2 || !(cfg.log_scale_max > cfg.log_scale_min) || !(cfg.shift_half_width > 0.0) {
        return Err(Error::Invalid("entropy search box is empty".into()));
    }
    let n = curve.len() as f64;
    let cx = curve.x.iter().sum::<f64>() / n;
    let cy = if curve.n_ambient == 1 { curve.r.iter().sum::<f64>() / n } else { 0.0 };
    let planar = curve.n_ambient == 1;
    let motion = |p: &[f64]| RigidMotionDilation {
        translation: [p[0], if planar { p[2] } else { 0.0 }],
        scale: p[1].exp(),
    };
    let objective = |p: &[f64]| f_under_motion(curve, &motion(p), None, cfg.normalized_f).unwrap_or(f64::NEG_INFINITY);
    let g = cfg.grid;
    let ds = 2.0 * cfg.shift_half_width / (g - 1) as f64;
    let dl = (cfg.log_scale_max - cfg.log_scale_min) / (g - 1) as f64;
    let mut best = (vec![cx, 0.0, cy], f64::NEG_INFINITY);
    for a in 0..g {
        for b in 0..g {
            let p = vec![cx - cfg.shift_half_width + a as f64 * ds, cfg.log_scale_min + b as f64 * dl, cy];
            let v = objective(&p);
            if v > best.1 {
                best = (p, v);
            }
        }
    }
    let dims = if planar { 3 } else { 2 };
    let start = &best.0[..dims];
    let steps = [ds, dl, ds];
    let (p, v) = nelder_mead_max(|q| objective(q), start, &steps[..dims], cfg.tol, 4000);
    let inside = (p[0] - cx).abs() <= cfg.shift_half_width * (1.0 + 1e-9)
        && p[1] >= cfg.log_scale_min - 1e-9
        && p[1] <= cfg.log_scale_max + 1e-9
        && (!planar || (p[2] - cy).abs() <= cfg.shift_half_width * (1.0 + 1e-9));
    if !inside {
        return Err(Error::SearchDiverged { shift: p[0], log_scale: p[1] });
    }
    let identity = f_under_motion(curve, &RigidMotionDilation::identity(), None, cfg.normalized_f)?;
    if identity > v {
        return Ok((identity, RigidMotionDilation::identity()));
    }
    let mut full = p.clone();
    if !planar {
        full.push(0.0);
    }
    Ok((v, motion(&full)))
}
