//! Exact and shooting-based self-shrinkers of revolution.
//!
//! Profiles solve `H = <x, n>/2`. In arclength with tangent angle `theta` this reads
//! `theta' = (x sin(theta) - r cos(theta))/2 + (n - 1) cos(theta)/r`.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{compute_geometry, ProfileCurve, Topology};
use crate::linalg::compensated_sum;
use crate::optim::{Dopri, OdeStop, State3};
use crate::spectral::WeightedGrid;
use crate::spline::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShrinkerKind {
    Circle,
    Sphere,
    Cylinder,
    AngenentTorus,
    ConicalEnd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Exact,
    Shooting,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShrinkerModel {
    pub kind: ShrinkerKind,
    pub profile: ProfileCurve,
    pub cone_slope: Option<f64>,
    /// Max of `|H - <x,n>/2|` over samples (interior samples for open profiles).
    pub residual: f64,
    /// Gaussian-weighted L^2 norm of the same defect.
    pub residual_l2: f64,
    pub provenance: Provenance,
}

impl ShrinkerModel {
    pub fn tolerance(&self) -> f64 {
        match self.provenance {
            Provenance::Exact => 1e-8,
            Provenance::Shooting => 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShootingConfig {
    /// Start of the torus orbit on the `r` axis; only `x = 0` is meaningful, `r` seeds the scan.
    pub initial_point: [f64; 2],
    pub initial_angle: f64,
    /// Largest integrator step, in arclength.
    pub integrator_step: f64,
    pub max_arclength: f64,
    pub match_tolerance: f64,
    /// Interval of starting heights scanned for a closing orbit.
    pub bracket: [f64; 2],
    pub scan_points: usize,
    pub samples: usize,
    /// Conical ends are sampled at least this finely; their defect is pure discretization error.
    pub max_spacing: f64,
}

impl Default for ShootingConfig {
    fn default() -> Self {
        Self {
            initial_point: [0.0, 0.8],
            initial_angle: 0.0,
            integrator_step: 1e-3,
            max_arclength: 60.0,
            match_tolerance: 1e-6,
            bracket: [0.3, 1.4],
            scan_points: 45,
            samples: 512,
            max_spacing: 8e-3,
        }
    }
}

impl ShootingConfig {
    fn validate(&self) -> Result<()> {
        if !(self.integrator_step > 0.0 && self.integrator_step <= 1e-3) {
            return Err(Error::Invalid(format!("integrator step must lie in (0, 1e-3], got {}", self.integrator_step)));
        }
        if !(self.match_tolerance > 0.0) || !(self.max_arclength > 0.0) || !(self.max_spacing > 0.0) {
            return Err(Error::Invalid("tolerance and arclength budget must be positive".into()));
        }
        if self.samples < 16 {
            return Err(Error::TooFewPoints { got: self.samples, need: 16 });
        }
        Ok(())
    }
}

/// Right-hand side of the shrinker ODE in arclength, state `(x, r, theta)`.
pub fn shrinker_rhs(n_ambient: u8) -> impl Fn(f64, &State3) -> State3 {
    move |_s, y| {
        let (x, r, th) = (y[0], y[1], y[2]);
        let (sn, cs) = th.sin_cos();
        let mut dth = (x * sn - r * cs) / 2.0;
        if n_ambient == 2 {
            dth += cs / r;
        }
        [cs, sn, dth]
    }
}

/// Max and weighted L^2 norm of `H - <x,n>/2`.
pub fn shrinker_residual(profile: &ProfileCurve) -> Result<(f64, f64)> {
    let geom = compute_geometry(profile)?;
    let defect = geom.shrinker_defect();
    let n = profile.len();
    let open = profile.topology == Topology::OpenEnd;
    let keep = |i: usize| !open || (i > 0 && i + 1 < n);
    let max = (0..n).filter(|&i| keep(i)).map(|i| defect[i].abs()).fold(0.0, f64::max);
    let l2 = compensated_sum((0..n).filter(|&i| keep(i)).map(|i| geom.log_mass[i].exp() * defect[i] * defect[i])).sqrt();
    Ok((max, l2))
}

fn finish(kind: ShrinkerKind, profile: ProfileCurve, cone_slope: Option<f64>, provenance: Provenance) -> Result<ShrinkerModel> {
    let (residual, residual_l2) = shrinker_residual(&profile)?;
    Ok(ShrinkerModel { kind, profile, cone_slope, residual, residual_l2, provenance })
}

/// Round sphere of any radius centered at the origin (a shrinker only for radius 2).
pub fn round_sphere(radius: f64, n_samples: usize) -> Result<ProfileCurve> {
    let pts: Vec<Vec2> = (0..n_samples)
        .map(|i| {
            let a = PI * i as f64 / (n_samples - 1) as f64;
            Vec2::new(radius * a.cos(), radius * a.sin())
        })
        .collect();
    ProfileCurve::from_samples(&pts, Topology::AxisToAxis, 2)
}

pub fn round_circle(radius: f64, n_samples: usize) -> Result<ProfileCurve> {
    let pts: Vec<Vec2> = (0..n_samples)
        .map(|i| {
            let a = 2.0 * PI * i as f64 / n_samples as f64;
            Vec2::new(radius * a.cos(), radius * a.sin())
        })
        .collect();
    ProfileCurve::from_samples(&pts, Topology::ClosedLoop, 1)
}

pub const DEFAULT_CYLINDER_HALF_LENGTH: f64 = 6.0;

/// Circle `S^1(sqrt 2)`, sphere `S^2(2)` or the cylinder of radius `sqrt 2` cut at `|x| <= half_length`.
pub fn exact_shrinker(kind: ShrinkerKind, n_samples: usize, half_length: Option<f64>) -> Result<ShrinkerModel> {
    let profile = match kind {
        ShrinkerKind::Circle => round_circle(SQRT_2, n_samples)?,
        ShrinkerKind::Sphere => round_sphere(2.0, n_samples)?,
        ShrinkerKind::Cylinder => {
            let z = half_length.unwrap_or(DEFAULT_CYLINDER_HALF_LENGTH);
            if !(z > 0.0) {
                return Err(Error::Invalid(format!("cylinder half length must be positive, got {z}")));
            }
            let pts: Vec<Vec2> =
                (0..n_samples).map(|i| Vec2::new(z - 2.0 * z * i as f64 / (n_samples - 1) as f64, SQRT_2)).collect();
            ProfileCurve::from_samples(&pts, Topology::OpenEnd, 2)?
        }
        _ => return Err(Error::Invalid(format!("{kind:?} has no closed form"))),
    };
    finish(kind, profile, None, Provenance::Exact)
}

/// Newton iteration on the discrete shrinker defect, moving samples along their normals.
/// The linearization of the defect is `-L`, so each step solves `L du = H - <x,n>/2`.
/// Open ends stay fixed.
pub fn newton_polish(profile: &ProfileCurve, tol: f64, max_iter: usize) -> Result<ProfileCurve> {
    let mut cur = profile.clone();
    let n = cur.len();
    let open = cur.topology == Topology::OpenEnd;
    let mut best = f64::INFINITY;
    for _ in 0..max_iter {
        let geom = compute_geometry(&cur)?;
        let mut rhs = geom.shrinker_defect();
        if open {
            rhs[0] = 0.0;
            rhs[n - 1] = 0.0;
        }
        let res = rhs.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if res <= tol || res >= best * 0.999 {
            break;
        }
        best = res;
        let grid = WeightedGrid::new(&cur, &geom);
        let mut jac = grid.jacobi_matrix();
        if open {
            for i in [0, n - 1] {
                jac.diag[i] = 1.0;
                jac.lower[i] = 0.0;
                jac.upper[i] = 0.0;
            }
        }
        let du = jac.solve(&rhs)?;
        let mut pts = cur.points();
        for i in 0..n {
            pts[i] += Vec2::new(geom.normal[i][0], geom.normal[i][1]) * du[i];
        }
        if cur.topology == Topology::AxisToAxis {
            pts[0].y = 0.0;
            pts[n - 1].y = 0.0;
        }
        cur = cur.with_points(&pts)?;
    }
    Ok(cur)
}

/// Height of the half orbit started at `(0, r0)` with horizontal tangent: returns
/// `sin(theta)` where the orbit next crosses `x = 0`, and the arclength there.
fn half_orbit(r0: f64, cfg: &ShootingConfig) -> Option<(f64, f64)> {
    let f = shrinker_rhs(2);
    let mut ode = Dopri::new(1e-10, cfg.integrator_step, cfg.integrator_step);
    let (mut s, mut y) = (0.0, [cfg.initial_point[0], r0, cfg.initial_angle]);
    let event = |s: f64, y: &State3| (s > 1e-3 && y[0] < 0.0) || y[1] <= 0.0;
    match ode.integrate(&f, &mut s, &mut y, cfg.max_arclength, &event) {
        OdeStop::Event if y[1] > 0.0 => Some((y[2].sin(), s)),
        _ => None,
    }
}

/// Angenent torus: the closed orbit symmetric under `x -> -x`, found by bisection on
/// the height at which the orbit leaves the `r` axis horizontally.
pub fn shoot_angenent_torus(cfg: &ShootingConfig) -> Result<ShrinkerModel> {
    cfg.validate()?;
    let m = cfg.scan_points.max(3);
    let heights: Vec<f64> = (0..m).map(|i| cfg.bracket[0] + (cfg.bracket[1] - cfg.bracket[0]) * i as f64 / (m - 1) as f64).collect();
    let vals: Vec<Option<(f64, f64)>> = heights.iter().map(|&h| half_orbit(h, cfg)).collect();
    let mut bracket = None;
    for i in 0..m - 1 {
        if let (Some((a, _)), Some((b, _))) = (vals[i], vals[i + 1]) {
            if a * b <= 0.0 {
                bracket = Some((heights[i], a, heights[i + 1]));
                break;
            }
        }
    }
    let (mut lo, mut glo, mut hi) =
        bracket.ok_or_else(|| Error::NoClosedOrbit("no sign change of the closing angle in the scanned heights".into()))?;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let (g, _) = half_orbit(mid, cfg).ok_or_else(|| Error::NoClosedOrbit(format!("orbit from height {mid} did not return")))?;
        if g * glo > 0.0 {
            lo = mid;
            glo = g;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    let r0 = 0.5 * (lo + hi);
    let (_, half) = half_orbit(r0, cfg).ok_or_else(|| Error::NoClosedOrbit("closing orbit lost".into()))?;
    let n = cfg.samples + cfg.samples % 2;
    let total = 2.0 * half;
    let f = shrinker_rhs(2);
    let mut ode = Dopri::new(1e-10, cfg.integrator_step, cfg.integrator_step);
    let (mut s, mut y) = (0.0, [cfg.initial_point[0], r0, cfg.initial_angle]);
    let mut pts = vec![Vec2::zeros(); n];
    pts[0] = Vec2::new(y[0], y[1]);
    for k in 1..=n / 2 {
        let target = total * k as f64 / n as f64;
        if ode.integrate(&f, &mut s, &mut y, target, &|_, _| false) != OdeStop::Reached {
            return Err(Error::NoClosedOrbit("resampling integration failed".into()));
        }
        pts[k] = Vec2::new(y[0], y[1]);
    }
    // top crossing sits on the axis of symmetry
    pts[n / 2].x = 0.0;
    pts[0].x = 0.0;
    for k in n / 2 + 1..n {
        let q = pts[n - k];
        pts[k] = Vec2::new(-q.x, q.y);
    }
    let raw = ProfileCurve::from_samples(&pts, Topology::ClosedLoop, 2)?;
    let profile = newton_polish(&raw, 1e-12, 40)?;
    let model = finish(ShrinkerKind::AngenentTorus, profile, None, Provenance::Shooting)?;
    if model.residual > cfg.match_tolerance {
        return Err(Error::NoClosedOrbit(format!("residual {} above tolerance", model.residual)));
    }
    Ok(model)
}

/// Far-field solution near the cone `r = a x`: `r = a x + (n-1)/(a x)`.
pub fn cone_asymptotic(a: f64, x: f64) -> (f64, f64) {
    let b = 1.0 / a;
    (a * x + b / x, a - b / (x * x))
}

/// Asymptotically conical end over `x in [x0, x1]`, integrated inward from the two-term
/// far-field series at `x1`. Samples run from `x1` to `x0` so the normal points away
/// from the axis. The integrated samples are kept as they are: pinning both ends in a
/// discrete polish would force a boundary layer at the far end.
pub fn shoot_conical_end(a: f64, x_range: (f64, f64), cfg: &ShootingConfig) -> Result<ShrinkerModel> {
    cfg.validate()?;
    let (x0, x1) = x_range;
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::Invalid(format!("cone slope must be positive, got {a}")));
    }
    if !(x1 > x0 && x0 > 0.0) {
        return Err(Error::Invalid(format!("need 0 < X0 < X1, got [{x0}, {x1}]")));
    }
    let (r1, dr1) = cone_asymptotic(a, x1);
    let start = [x1, r1, (-dr1).atan2(-1.0)];
    let f = shrinker_rhs(2);
    let h = cfg.integrator_step;
    let run = |until: f64, stops: &mut dyn FnMut(f64, &State3)| -> Result<(f64, State3)> {
        let mut ode = Dopri::new(1e-10, h, h.max(1e-3) * 50.0);
        let (mut s, mut y) = (0.0, start);
        let event = |_s: f64, y: &State3| y[0] <= x0 || y[1] <= 0.0;
        let stop = ode.integrate(&f, &mut s, &mut y, until, &event);
        stops(s, &y);
        match stop {
            OdeStop::Event if y[1] > 0.0 => Ok((s, y)),
            OdeStop::Event => Err(Error::BlowUp(format!("profile reached the axis at x = {}", y[0]))),
            OdeStop::Reached => Err(Error::BlowUp(format!("arclength budget {} exhausted at x = {}", cfg.max_arclength, y[0]))),
            OdeStop::Failed => Err(Error::BlowUp("integrator step underflow".into())),
        }
    };
    let (length, _) = run(cfg.max_arclength, &mut |_, _| {})?;
    let n = cfg.samples.max((length / cfg.max_spacing).ceil() as usize + 1);
    let mut pts = Vec::with_capacity(n);
    let mut ode = Dopri::new(1e-10, h, h.max(1e-3) * 50.0);
    let (mut s, mut y) = (0.0, start);
    pts.push(Vec2::new(y[0], y[1]));
    for k in 1..n - 1 {
        let target = length * k as f64 / (n - 1) as f64;
        if ode.integrate(&f, &mut s, &mut y, target, &|_, _| false) != OdeStop::Reached || y[1] <= 0.0 {
            return Err(Error::BlowUp("resampling integration failed".into()));
        }
        pts.push(Vec2::new(y[0], y[1]));
    }
    let (_, end) = run(cfg.max_arclength, &mut |_, _| {})?;
    pts.push(Vec2::new(end[0], end[1]));
    let raw = ProfileCurve::from_samples(&pts, Topology::OpenEnd, 2)?;
    finish(ShrinkerKind::ConicalEnd, raw, Some(a), Provenance::Shooting)
}

/// Hausdorff distance between the blow-down `profile / tau` and the cone `r = a x`,
/// both restricted to the annulus `1 <= |x| <= 2`.
pub fn blowdown_distance(model: &ShrinkerModel, tau: f64) -> Result<f64> {
    let a = model.cone_slope.ok_or_else(|| Error::Invalid("model has no asymptotic cone".into()))?;
    if !(tau >= 1.0) {
        return Err(Error::Invalid(format!("blow-down factor must be >= 1, got {tau}")));
    }
    let pts: Vec<Vec2> = model.profile.points().iter().map(|p| p / tau).collect();
    let (lo, hi) = pts.iter().fold((f64::INFINITY, 0.0f64), |(l, h), p| (l.min(p.norm()), h.max(p.norm())));
    if lo > 1.0 || hi < 2.0 {
        return Err(Error::AnnulusNotCovered { lo: lo * tau, hi: hi * tau });
    }
    let dir = Vec2::new(1.0, a).normalize();
    let to_cone = |q: Vec2| {
        let t = q.dot(&dir).clamp(1.0, 2.0);
        (q - dir * t).norm()
    };
    let d1 = pts.iter().filter(|q| (1.0..=2.0).contains(&q.norm())).map(|q| to_cone(*q)).fold(0.0, f64::max);
    let segs: Vec<(Vec2, Vec2)> = pts
        .windows(2)
        .filter(|w| w[0].norm().max(w[1].norm()) >= 1.0 - 1e-12 && w[0].norm().min(w[1].norm()) <= 2.0 + 1e-12)
        .map(|w| (w[0], w[1]))
        .collect();
    let to_profile = |q: Vec2| {
        segs.iter()
            .map(|(p0, p1)| {
                let e = p1 - p0;
                let u = ((q - p0).dot(&e) / e.norm_squared()).clamp(0.0, 1.0);
                (p0 + e * u - q).norm()
            })
            .fold(f64::INFINITY, f64::min)
    };
    let d2 = (0..=400).map(|i| to_profile(dir * (1.0 + i as f64 / 400.0))).fold(0.0, f64::max);
    Ok(d1.max(d2))
}

fn smooth_step(t: f64) -> f64 {
    let f = |u: f64| if u <= 0.0 { 0.0 } else { (-1.0 / u).exp() };
    let t = t.clamp(0.0, 1.0);
    f(t) / (f(t) + f(1.0 - t))
}

/// A capped conical end and the index range of samples copied verbatim from it.
#[derive(Debug, Clone, PartialEq)]
pub struct CappedEnd {
    pub profile: ProfileCurve,
    pub band: std::ops::Range<usize>,
}

/// Normal-line circle tangent to the end at abscissa `xq`: center on the axis, radius.
fn tangent_circle(profile: &ProfileCurve, xq: f64) -> Result<(Vec2, f64)> {
    let sp = profile.spline();
    let hits = sp.line_intersections(Vec2::new(xq, 0.0), Vec2::new(0.0, 1.0), 0, usize::MAX);
    let (_, s) = *hits.first().ok_or_else(|| Error::Invalid(format!("profile does not reach x = {xq}")))?;
    let q = sp.eval(s);
    let t = sp.tangent(s);
    let nrm = Vec2::new(t.y, -t.x);
    let center = q - nrm * (q.y / nrm.y);
    Ok((Vec2::new(center.x, 0.0), (q - Vec2::new(center.x, 0.0)).norm()))
}

/// Close a conical end into a compact axis-to-axis profile: the samples with
/// `x in [X0 + 1, cap_x - 1]` are kept, and each end is bent onto a circle centered on
/// the axis through a smooth radial blend over one unit of `x`.
pub fn cap_conical_end(model: &ShrinkerModel, cap_x: f64) -> Result<CappedEnd> {
    let prof = &model.profile;
    if model.kind != ShrinkerKind::ConicalEnd || prof.topology != Topology::OpenEnd {
        return Err(Error::Invalid("capping needs a conical end".into()));
    }
    let (x1, x0) = (prof.x[0], prof.x[prof.len() - 1]);
    if !(cap_x - 1.0 > x0 + 1.0 && cap_x < x1) {
        return Err(Error::CapTooTight { cap_x, x0, x1 });
    }
    let h = prof.mean_spacing();
    let (c_out, rho_out) = tangent_circle(prof, cap_x - 0.5)?;
    let (c_in, rho_in) = tangent_circle(prof, x0 + 0.5)?;
    let polar = |p: Vec2, c: Vec2| {
        let d = p - c;
        (d.y.atan2(d.x), d.norm())
    };
    let mut pts: Vec<Vec2> = Vec::new();
    let outer_blend: Vec<usize> = (0..prof.len()).filter(|&i| prof.x[i] > cap_x - 1.0 && prof.x[i] <= cap_x).collect();
    let inner_blend: Vec<usize> = (0..prof.len()).filter(|&i| prof.x[i] < x0 + 1.0 && prof.x[i] >= x0).collect();
    let band: Vec<usize> = (0..prof.len()).filter(|&i| prof.x[i] >= x0 + 1.0 && prof.x[i] <= cap_x - 1.0).collect();
    let (phi_first, _) = polar(prof.point(outer_blend[0]), c_out);
    let m = ((rho_out * phi_first) / h).ceil().max(2.0) as usize;
    for j in 0..m {
        let phi = phi_first * j as f64 / m as f64;
        pts.push(c_out + Vec2::new(phi.cos(), phi.sin()) * rho_out);
    }
    for &i in &outer_blend {
        let (phi, rho) = polar(prof.point(i), c_out);
        let beta = smooth_step(cap_x - prof.x[i]);
        let rr = beta * rho + (1.0 - beta) * rho_out;
        pts.push(c_out + Vec2::new(phi.cos(), phi.sin()) * rr);
    }
    let band_start = pts.len();
    pts.extend(band.iter().map(|&i| prof.point(i)));
    let band_end = pts.len();
    for &i in &inner_blend {
        let (phi, rho) = polar(prof.point(i), c_in);
        let beta = smooth_step(prof.x[i] - x0);
        let rr = beta * rho + (1.0 - beta) * rho_in;
        pts.push(c_in + Vec2::new(phi.cos(), phi.sin()) * rr);
    }
    let (phi_last, _) = polar(*pts.last().unwrap(), c_in);
    let m = ((rho_in * (PI - phi_last)) / h).ceil().max(2.0) as usize;
    for j in 1..=m {
        let phi = phi_last + (PI - phi_last) * j as f64 / m as f64;
        pts.push(c_in + Vec2::new(phi.cos(), phi.sin()) * rho_in);
    }
    let profile = ProfileCurve::from_samples(&pts, Topology::AxisToAxis, 2)?;
    Ok(CappedEnd { profile, band: band_start..band_end })
}
