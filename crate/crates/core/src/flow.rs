//! Rescaled mean curvature flow, its linearization, graphical scale and transplantation.
//!
//! Samples move along their normals with speed `-(H - <x,n>/2)`. Each step is linearly
//! implicit in the drift Laplacian and explicit in everything else, so the step size is
//! not tied to the grid spacing. Tangential redistribution happens by periodic
//! arclength resampling in [`FlowRunner`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{compute_geometry, f_functional, ProfileCurve, SurfaceGeometry, Topology};
use crate::linalg::{linear_fit, Tridiag};
use crate::spectral::{l2w_norm, q_norm_sq, WeightedGrid};
use crate::spline::Vec2;

/// Largest step the semi-implicit scheme accepts.
pub const MAX_DT: f64 = 0.01;

/// Normal graph of a flow slice over a reference shrinker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphOver {
    pub shrinker: String,
    /// Graph function on the shrinker's nodes; `None` where the slice is not graphical.
    pub u: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub t: f64,
    pub curve: ProfileCurve,
    pub geometry: SurfaceGeometry,
    pub graph_over: Option<GraphOver>,
    pub r_graph: f64,
}

impl FlowState {
    pub fn new(t: f64, curve: ProfileCurve) -> Result<Self> {
        let geometry = compute_geometry(&curve)?;
        Ok(Self { t, curve, geometry, graph_over: None, r_graph: 0.0 })
    }

    /// Normalized F-functional of the slice (open slices need a truncation radius).
    pub fn f_value(&self, truncation: Option<f64>) -> Result<f64> {
        f_functional(&self.curve, &self.geometry, truncation, true)
    }

    pub fn max_curvature(&self) -> f64 {
        self.geometry.a_norm_sq.iter().fold(0.0f64, |m, v| m.max(v.sqrt()))
    }

    /// Attach the graph over `shrinker` measured by [`graphical_scale`].
    pub fn with_graph(mut self, name: &str, shrinker: &ProfileCurve, cfg: &GraphicalConfig) -> Result<Self> {
        let report = graphical_scale(&self, shrinker, cfg)?;
        self.r_graph = report.r_graph;
        self.graph_over = Some(GraphOver { shrinker: name.to_string(), u: report.u });
        Ok(self)
    }
}

fn pinned_nodes(curve: &ProfileCurve, pin_radius: Option<f64>) -> Vec<bool> {
    let n = curve.len();
    let mut pinned: Vec<bool> = (0..n).map(|i| pin_radius.is_some_and(|r| curve.point(i).norm() < r)).collect();
    if curve.topology == Topology::OpenEnd {
        pinned[0] = true;
        pinned[n - 1] = true;
    }
    pinned
}

fn check_dt(dt: f64) -> Result<()> {
    if !(dt > 0.0) || dt > MAX_DT {
        return Err(Error::UnstableTimeStep { dt, bound: MAX_DT });
    }
    Ok(())
}

/// Normal displacement of one linearly implicit step: `(I - dt Lap) w = -dt (H - <x,n>/2)`,
/// with `w = 0` on pinned nodes.
pub fn rmcf_displacement(state: &FlowState, dt: f64, pinned: &[bool]) -> Result<Vec<f64>> {
    let grid = WeightedGrid::new(&state.curve, &state.geometry);
    let mut a = grid.drift_matrix().scaled_plus_identity(-dt, 1.0);
    let mut rhs: Vec<f64> = state.geometry.shrinker_defect().iter().map(|d| -dt * d).collect();
    for (i, _) in pinned.iter().enumerate().filter(|(_, p)| **p) {
        a.lower[i] = 0.0;
        a.upper[i] = 0.0;
        a.diag[i] = 1.0;
        rhs[i] = 0.0;
    }
    a.solve(&rhs)
}

fn advance(state: &FlowState, dt: f64, pinned: &[bool]) -> Result<FlowState> {
    check_dt(dt)?;
    let w = rmcf_displacement(state, dt, pinned)?;
    let n = state.curve.len();
    let mut pts = state.curve.points();
    for i in 0..n {
        let nrm = state.geometry.normal[i];
        pts[i] += Vec2::new(nrm[0], nrm[1]) * w[i];
    }
    if state.curve.topology == Topology::AxisToAxis {
        pts[0].y = 0.0;
        pts[n - 1].y = 0.0;
    }
    let t = state.t + dt;
    if state.curve.n_ambient == 2 && pts.iter().enumerate().any(|(i, p)| p.y <= 0.0 && !(state.curve.topology == Topology::AxisToAxis && (i == 0 || i == n - 1))) {
        return Err(Error::SingularityApproach { t, max_a: f64::INFINITY });
    }
    let curve = state.curve.with_points(&pts)?;
    if curve.self_intersection().is_some() {
        return Err(Error::SelfIntersectionDetected(t));
    }
    let next = FlowState::new(t, curve)?;
    let max_a = next.max_curvature();
    if max_a > 1.0 / (10.0 * next.curve.mean_spacing()) {
        return Err(Error::SingularityApproach { t, max_a });
    }
    Ok(next)
}

/// One normal step of the flow (no resampling, nothing pinned except open ends).
pub fn rmcf_step(state: &FlowState, dt: f64) -> Result<FlowState> {
    advance(state, dt, &pinned_nodes(&state.curve, None))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlowConfig {
    pub dt: f64,
    /// Resample to uniform arclength every this many steps (0 disables).
    pub resample_every: usize,
    /// Samples inside this ball are held fixed.
    pub pin_radius: Option<f64>,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self { dt: 1e-3, resample_every: 10, pin_radius: None }
    }
}

/// Linear interpolation of node values at arclength positions of `curve`.
pub fn interpolate_at_arclength(curve: &ProfileCurve, values: &[f64], positions: &[f64]) -> Vec<f64> {
    let n = curve.len();
    let mut s = curve.arclength.clone();
    let mut v = values.to_vec();
    if curve.is_closed() {
        s.push(curve.length);
        v.push(values[0]);
    }
    positions
        .iter()
        .map(|&p| {
            let j = match s.binary_search_by(|x| x.partial_cmp(&p).unwrap()) {
                Ok(j) => return v[j.min(v.len() - 1)],
                Err(j) => j.clamp(1, s.len() - 1) - 1,
            };
            let f = ((p - s[j]) / (s[j + 1] - s[j])).clamp(0.0, 1.0);
            let _ = n;
            v[j] * (1.0 - f) + v[j + 1] * f
        })
        .collect()
}

/// Steps a flow while carrying node fields (linear solutions, labels) through resampling.
#[derive(Debug, Clone)]
pub struct FlowRunner {
    pub state: FlowState,
    pub cfg: FlowConfig,
    pub steps: usize,
    /// Resampling adds nodes so the spacing never exceeds the initial one.
    pub target_spacing: f64,
}

impl FlowRunner {
    pub fn new(initial: FlowState, cfg: FlowConfig) -> Result<Self> {
        check_dt(cfg.dt)?;
        if initial.curve.self_intersection().is_some() {
            return Err(Error::Invalid("initial surface is not embedded".into()));
        }
        let target_spacing = initial.curve.mean_spacing();
        Ok(Self { state: initial, cfg, steps: 0, target_spacing })
    }

    /// Advance one step; `fields` are node functions that follow the samples.
    pub fn step(&mut self, fields: &mut [&mut Vec<f64>]) -> Result<()> {
        let pinned = pinned_nodes(&self.state.curve, self.cfg.pin_radius);
        let mut next = advance(&self.state, self.cfg.dt, &pinned)?;
        self.steps += 1;
        if self.cfg.resample_every > 0 && self.steps % self.cfg.resample_every == 0 {
            let segs = (next.curve.length / self.target_spacing - 1e-6).ceil() as usize;
            let needed = if next.curve.is_closed() { segs } else { segs + 1 };
            let (curve, positions) = next.curve.resample_with_positions(next.curve.len().max(needed))?;
            for f in fields.iter_mut() {
                **f = interpolate_at_arclength(&next.curve, f, &positions);
            }
            next = FlowState::new(next.t, curve)?;
        }
        self.state = next;
        Ok(())
    }

    pub fn run_until(&mut self, t_end: f64, fields: &mut [&mut Vec<f64>]) -> Result<()> {
        while self.state.t < t_end - 0.5 * self.cfg.dt {
            self.step(fields)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Completed,
    SelfIntersection,
    Singularity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowRecord {
    pub t: f64,
    pub f: f64,
    pub max_a: f64,
    pub r_graph: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<FlowState>,
    pub records: Vec<FlowRecord>,
    pub stop: StopReason,
}

/// Run the flow to `t_end`, keeping a state every `output_every` time units and a record
/// every step. Singularities and self-intersections end the run with a stop reason.
pub fn run_rmcf<C>(initial: &ProfileCurve, t_end: f64, output_every: f64, cfg: &FlowConfig, mut callback: C) -> Result<Trajectory>
where
    C: FnMut(&FlowState) -> Result<f64>,
{
    let mut runner = FlowRunner::new(FlowState::new(0.0, initial.clone())?, *cfg)?;
    let record = |s: &FlowState, r_graph: f64| -> Result<FlowRecord> {
        let trunc = (s.curve.topology == Topology::OpenEnd).then(|| s.curve.points().iter().map(|p| p.norm()).fold(0.0, f64::max));
        Ok(FlowRecord { t: s.t, f: s.f_value(trunc)?, max_a: s.max_curvature(), r_graph })
    };
    let first = callback(&runner.state)?;
    let mut records = vec![record(&runner.state, first)?];
    let mut states = vec![runner.state.clone()];
    let every = ((output_every / cfg.dt).round() as usize).max(1);
    let mut stop = StopReason::Completed;
    while runner.state.t < t_end - 0.5 * cfg.dt {
        match runner.step(&mut []) {
            Ok(()) => {}
            Err(Error::SelfIntersectionDetected(_)) => {
                stop = StopReason::SelfIntersection;
                break;
            }
            Err(Error::SingularityApproach { .. }) => {
                stop = StopReason::Singularity;
                break;
            }
            Err(e) => return Err(e),
        }
        if runner.steps % every == 0 {
            let rg = callback(&runner.state)?;
            runner.state.r_graph = rg;
            records.push(record(&runner.state, rg)?);
            states.push(runner.state.clone());
        } else {
            records.push(record(&runner.state, f64::NAN)?);
        }
    }
    Ok(Trajectory { states, records, stop })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "radius", rename_all = "kebab-case")]
pub enum FieldBoundary {
    None,
    Dirichlet(f64),
}

/// Solution of `dv/dt = L v` on a moving surface, with its norms.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFieldState {
    pub v: Vec<f64>,
    pub t: f64,
    pub l2: f64,
    pub q: f64,
    /// `Lambda` used for the Q-norm.
    pub q_lambda: f64,
}

impl LinearFieldState {
    pub fn new(v: Vec<f64>, t: f64, slice: &FlowState, q_lambda: f64) -> Self {
        let grid = WeightedGrid::new(&slice.curve, &slice.geometry);
        let l2 = l2w_norm(&v, &grid);
        let q = q_norm_sq(&v, &grid, q_lambda).max(0.0).sqrt();
        Self { v, t, l2, q, q_lambda }
    }
}

fn linear_step(v: &[f64], slice: &FlowState, dt: f64, boundary: FieldBoundary, potential: bool) -> Result<Vec<f64>> {
    let n = slice.curve.len();
    let active: Vec<bool> = match boundary {
        FieldBoundary::None => vec![true; n],
        FieldBoundary::Dirichlet(radius) => {
            let extent = slice.curve.points().iter().map(|p| p.norm()).fold(0.0, f64::max);
            if radius > extent * (1.0 + 1e-12) {
                return Err(Error::CutoffBeyondSurface { radius, extent });
            }
            (0..n).map(|i| slice.curve.point(i).norm() <= radius).collect()
        }
    };
    let grid = WeightedGrid::new(&slice.curve, &slice.geometry);
    let lap = grid.drift_matrix();
    let pot = grid.potential(0);
    let half = |u: &mut Vec<f64>| {
        if potential {
            u.iter_mut().zip(&pot).for_each(|(x, p)| *x *= (0.5 * dt * p).exp());
        }
    };
    let mut u: Vec<f64> = (0..n).map(|i| if active[i] { v[i] } else { 0.0 }).collect();
    half(&mut u);
    let lu = lap.matvec(&u);
    let mut rhs: Vec<f64> = (0..n).map(|i| u[i] + 0.5 * dt * lu[i]).collect();
    let mut a: Tridiag = lap.scaled_plus_identity(-0.5 * dt, 1.0);
    for i in (0..n).filter(|&i| !active[i]) {
        a.lower[i] = 0.0;
        a.upper[i] = 0.0;
        a.diag[i] = 1.0;
        rhs[i] = 0.0;
    }
    let mut out = a.solve(&rhs)?;
    half(&mut out);
    for i in (0..n).filter(|&i| !active[i]) {
        out[i] = 0.0;
    }
    Ok(out)
}

/// One Strang-split step of `dv/dt = L v` on `slice`: exact half steps of the potential
/// around a Crank-Nicolson step of the drift Laplacian.
pub fn linearized_step(field: &LinearFieldState, slice: &FlowState, dt: f64, boundary: FieldBoundary) -> Result<LinearFieldState> {
    let v = linear_step(&field.v, slice, dt, boundary, true)?;
    Ok(LinearFieldState::new(v, field.t + dt, slice, field.q_lambda))
}

/// Same step with the potential switched off (pure weighted heat flow).
pub fn drift_heat_step(field: &LinearFieldState, slice: &FlowState, dt: f64, boundary: FieldBoundary) -> Result<LinearFieldState> {
    let v = linear_step(&field.v, slice, dt, boundary, false)?;
    Ok(LinearFieldState::new(v, field.t + dt, slice, field.q_lambda))
}

/// Linearization of [`rmcf_step`] about `slice`: `(I - dt Lap) v' = (I + dt V) v`.
pub fn flow_step_linearization(v: &[f64], slice: &FlowState, dt: f64) -> Result<Vec<f64>> {
    check_dt(dt)?;
    let grid = WeightedGrid::new(&slice.curve, &slice.geometry);
    let a = grid.drift_matrix().scaled_plus_identity(-dt, 1.0);
    let rhs: Vec<f64> = v.iter().zip(grid.potential(0)).map(|(x, p)| x * (1.0 + dt * p)).collect();
    a.solve(&rhs)
}

/// Intersection of the normal line at node `i` of `base` with `target`:
/// `(offset along the normal, target segment, fraction in segment)`.
fn normal_hit(
    base: &ProfileCurve,
    base_geom: &SurfaceGeometry,
    target: &ProfileCurve,
    target_spline: &crate::spline::CurveSpline,
    i: usize,
    hint: Option<usize>,
    max_offset: f64,
) -> Option<(f64, usize, f64)> {
    let q = base.point(i);
    let nrm = Vec2::new(base_geom.normal[i][0], base_geom.normal[i][1]);
    let m = target.len();
    if base.topology == Topology::AxisToAxis && (i == 0 || i + 1 == base.len()) && target.topology == Topology::AxisToAxis {
        // the normal at a pole is the axis itself, which meets the target at one of its poles
        let (end, seg, frac) = if (target.point(0) - q).norm() <= (target.point(m - 1) - q).norm() { (0, 0, 0.0) } else { (m - 1, m - 2, 1.0) };
        let t = (target.point(end) - q).dot(&nrm);
        return (t.abs() <= max_offset).then_some((t, seg, frac));
    }
    let window = if hint.is_some() { 24 } else { usize::MAX };
    let hits = target_spline.line_intersections(q, nrm, hint.unwrap_or(0), window);
    let (t, param) = hits.into_iter().filter(|(t, _)| t.abs() <= max_offset).min_by(|a, b| a.0.abs().partial_cmp(&b.0.abs()).unwrap())?;
    let seg = target_spline.real_segment(param);
    let k0 = target_spline.knot(seg);
    let k1 = if seg + 1 < target.len() { target_spline.knot(seg + 1) } else { target_spline.param_range().1 };
    let frac = ((param - k0) / (k1 - k0)).clamp(0.0, 1.0);
    Some((t, seg, frac))
}

fn normal_graph(base: &ProfileCurve, base_geom: &SurfaceGeometry, target: &ProfileCurve, max_offset: f64, order: &[usize]) -> Vec<Option<(f64, usize, f64)>> {
    let sp = target.spline();
    let mut out = vec![None; base.len()];
    let mut hint: Option<usize> = None;
    let mut global_budget = 64usize;
    for &i in order {
        let mut hit = normal_hit(base, base_geom, target, &sp, i, hint, max_offset);
        if hit.is_none() && hint.is_some() && global_budget > 0 {
            global_budget -= 1;
            hit = normal_hit(base, base_geom, target, &sp, i, None, max_offset);
        }
        hint = hit.map(|(_, seg, _)| seg);
        out[i] = hit;
    }
    out
}

/// `v` on the nodes of `a` with `b = {x + v(x) n(x)}`.
pub fn difference_graph(a: &FlowState, b: &FlowState) -> Result<Vec<f64>> {
    let order: Vec<usize> = (0..a.curve.len()).collect();
    let scale = a.curve.points().iter().map(|p| p.norm()).fold(1.0, f64::max);
    let hits = normal_graph(&a.curve, &a.geometry, &b.curve, scale, &order);
    hits.iter()
        .enumerate()
        .map(|(i, h)| h.map(|(t, ..)| t).ok_or_else(|| Error::NotGraphical(format!("normal line at node {i} misses the other slice"))))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GraphicalConfig {
    pub eps0: f64,
    /// Radius `r` of the inner ball where the full C^2 bound applies.
    pub base_radius: f64,
}

impl Default for GraphicalConfig {
    fn default() -> Self {
        Self { eps0: 0.05, base_radius: 3.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphReport {
    pub r_graph: f64,
    pub u: Vec<Option<f64>>,
    /// Max of `|u|, |grad u|, |hess u|` over the inner ball.
    pub inner_c2: f64,
    /// Finite-difference quotient `|hess u(a) - hess u(b)| / |a - b|^(1/2)` at scale `4h`
    /// on the inner ball; reported only.
    pub holder_quotient: f64,
}

fn node_derivatives(curve: &ProfileCurve, geom: &SurfaceGeometry, u: &[Option<f64>]) -> Vec<Option<(f64, f64)>> {
    let n = curve.len();
    let closed = curve.is_closed();
    let s = &curve.arclength;
    let dist = |a: usize, b: usize| {
        let d = s[b] - s[a];
        if closed && d < 0.0 {
            d + curve.length
        } else {
            d
        }
    };
    (0..n)
        .map(|i| {
            let (im, ip) = if closed {
                ((i + n - 1) % n, (i + 1) % n)
            } else if i == 0 {
                (0, 1)
            } else if i == n - 1 {
                (n - 2, n - 1)
            } else {
                (i - 1, i + 1)
            };
            if !closed && (i == 0 || i == n - 1) {
                // one-sided: reuse the neighbor's stencil
                let c = if i == 0 { 1 } else { n - 2 };
                let (a, b, d) = (u[c - 1]?, u[c]?, u[c + 1]?);
                let (h0, h1) = (dist(c - 1, c), dist(c, c + 1));
                let d2 = 2.0 * (h0 * d - (h0 + h1) * b + h1 * a) / (h0 * h1 * (h0 + h1));
                let d1 = if i == 0 { (b - a) / h0 } else { (d - b) / h1 };
                let _ = (im, ip);
                let pole = curve.topology == Topology::AxisToAxis;
                let rot = if pole { d2 } else { 0.0 };
                return Some((d1.abs(), d2.abs().max(rot.abs())));
            }
            let (a, b, c) = (u[im]?, u[i]?, u[ip]?);
            let (h0, h1) = (dist(im, i), dist(i, ip));
            let d1 = (h0 * h0 * (c - b) + h1 * h1 * (b - a)) / (h0 * h1 * (h0 + h1));
            let d2 = 2.0 * (h0 * c - (h0 + h1) * b + h1 * a) / (h0 * h1 * (h0 + h1));
            let rot = if curve.n_ambient == 2 && curve.r[i] > 0.0 { geom.theta[i].sin() * d1 / curve.r[i] } else { 0.0 };
            Some((d1.abs(), d2.abs().max(rot.abs())))
        })
        .collect()
}

/// `max(|u|, |grad u|, |hess u|)` over the nodes of `shrinker` with `|x| <= radius`.
pub fn graph_c2_norm(shrinker: &ProfileCurve, geom: &SurfaceGeometry, u: &[f64], radius: f64) -> f64 {
    let vals: Vec<Option<f64>> = u.iter().map(|v| Some(*v)).collect();
    let derivs = node_derivatives(shrinker, geom, &vals);
    (0..shrinker.len())
        .filter(|&i| shrinker.point(i).norm() <= radius)
        .map(|i| {
            let (d1, d2) = derivs[i].unwrap_or((0.0, 0.0));
            u[i].abs().max(d1).max(d2)
        })
        .fold(0.0, f64::max)
}

fn holder_from_derivatives(shrinker: &ProfileCurve, derivs: &[Option<(f64, f64)>], radius: f64) -> f64 {
    let h = shrinker.mean_spacing();
    let step = 4;
    let n = shrinker.len();
    let inside = |i: usize| shrinker.point(i).norm() <= radius;
    let mut q = 0.0f64;
    for i in 0..n.saturating_sub(step) {
        if inside(i) && inside(i + step) {
            if let (Some((_, a)), Some((_, b))) = (derivs[i], derivs[i + step]) {
                q = q.max((a - b).abs() / (step as f64 * h).sqrt());
            }
        }
    }
    q
}

/// Finite-difference Hölder quotient (exponent 1/2, scale `4h`) of the Hessian of `u`
/// over the nodes with `|x| <= radius`.
pub fn holder_quotient(shrinker: &ProfileCurve, geom: &SurfaceGeometry, u: &[f64], radius: f64) -> f64 {
    let vals: Vec<Option<f64>> = u.iter().map(|v| Some(*v)).collect();
    holder_from_derivatives(shrinker, &node_derivatives(shrinker, geom, &vals), radius)
}

/// Largest `R` such that `state` is a normal graph `u` over `shrinker ∩ B_R` with
/// `|u|, |grad u|, |hess u| < eps0` on `B_r` and, for every node at radius `s > r`,
/// `|u| < s eps0`, `|grad u| < eps0`, `|hess u| < eps0 / s`. Zero if the inner bound fails.
pub fn graphical_scale(state: &FlowState, shrinker: &ProfileCurve, cfg: &GraphicalConfig) -> Result<GraphReport> {
    let sg = compute_geometry(shrinker)?;
    let n = shrinker.len();
    let radius: Vec<f64> = (0..n).map(|i| shrinker.point(i).norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|a, b| radius[*a].partial_cmp(&radius[*b]).unwrap().then(a.cmp(b)));
    let extent = radius.iter().fold(0.0f64, |m, v| m.max(*v));
    // walk along the curve, not by radius, so hints stay local
    let walk: Vec<usize> = if radius[0] > radius[n - 1] { (0..n).rev().collect() } else { (0..n).collect() };
    let hits = normal_graph(shrinker, &sg, &state.curve, extent.max(1.0), &walk);
    let u: Vec<Option<f64>> = hits.iter().map(|h| h.map(|(t, ..)| t)).collect();
    let derivs = node_derivatives(shrinker, &sg, &u);
    let mut r_graph = extent;
    let mut inner_c2 = 0.0f64;
    for &i in &order {
        let s = radius[i];
        let ok = match (u[i], derivs[i]) {
            (Some(v), Some((d1, d2))) => {
                if s <= cfg.base_radius {
                    inner_c2 = inner_c2.max(v.abs()).max(d1).max(d2);
                    v.abs().max(d1).max(d2) < cfg.eps0
                } else {
                    v.abs() < s * cfg.eps0 && d1 < cfg.eps0 && d2 < cfg.eps0 / s
                }
            }
            _ => false,
        };
        if !ok {
            r_graph = if s <= cfg.base_radius { 0.0 } else { s };
            break;
        }
    }
    let holder_quotient = holder_from_derivatives(shrinker, &derivs, cfg.base_radius);
    let u = (0..n).map(|i| if radius[i] <= r_graph { u[i] } else { None }).collect();
    Ok(GraphReport { r_graph, u, inner_c2, holder_quotient })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransplantMode {
    Normal,
    PolarSpherical,
}

/// A function pulled back to the shrinker's nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Transplanted {
    pub values: Vec<f64>,
    /// Nodes inside the graphical region; values elsewhere are zero.
    pub inside: Vec<bool>,
}

/// Pull `u` (on the nodes of `slice`) back to the shrinker nodes with `|x| <= r_graph`.
pub fn transplant(u: &[f64], slice: &FlowState, shrinker: &ProfileCurve, r_graph: f64, mode: TransplantMode) -> Result<Transplanted> {
    if r_graph <= 0.0 {
        return Err(Error::NotGraphical("slice has zero graphical radius".into()));
    }
    let n = shrinker.len();
    let m = slice.curve.len();
    let mut values = vec![0.0; n];
    let mut inside = vec![false; n];
    let lerp = |seg: usize, f: f64| {
        let next = if seg + 1 < m { seg + 1 } else { 0 };
        u[seg] * (1.0 - f) + u[next] * f
    };
    match mode {
        TransplantMode::Normal => {
            let sg = compute_geometry(shrinker)?;
            let walk: Vec<usize> = (0..n).collect();
            let hits = normal_graph(shrinker, &sg, &slice.curve, r_graph.max(1.0), &walk);
            for i in 0..n {
                if shrinker.point(i).norm() > r_graph {
                    continue;
                }
                let (_, seg, f) = hits[i].ok_or_else(|| Error::NotGraphical(format!("normal line at shrinker node {i} misses the slice")))?;
                values[i] = lerp(seg, f);
                inside[i] = true;
            }
        }
        TransplantMode::PolarSpherical => {
            let pts = slice.curve.points();
            let segs = slice.curve.n_segments();
            for i in 0..n {
                let q = shrinker.point(i);
                let rho = q.norm();
                if rho > r_graph {
                    continue;
                }
                let angle = q.y.atan2(q.x);
                let mut best: Option<(f64, f64)> = None;
                for j in 0..segs {
                    let (a, b) = (pts[j], pts[(j + 1) % m]);
                    let (da, db) = (a.norm() - rho, b.norm() - rho);
                    if da * db > 0.0 || (da == db) {
                        continue;
                    }
                    let f = if da == 0.0 { 0.0 } else { da / (da - db) };
                    let p = a + (b - a) * f;
                    let gap = (p.y.atan2(p.x) - angle).abs();
                    if best.is_none_or(|(g, _)| gap < g) {
                        best = Some((gap, lerp(j, f)));
                    }
                }
                let (_, val) = best.ok_or_else(|| Error::NotGraphical(format!("sphere of radius {rho} misses the slice")))?;
                values[i] = val;
                inside[i] = true;
            }
        }
    }
    Ok(Transplanted { values, inside })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticProbe {
    pub amplitudes: Vec<f64>,
    pub errors: Vec<f64>,
    pub linear_norms: Vec<f64>,
    pub exponent: f64,
}

/// Compare the nonlinear difference of two flows with the linearized prediction:
/// starting from `base` and `base + delta v0 n`, fit `|v - v*|_{L^2} ~ delta^p` at time `horizon`.
pub fn quadratic_error_probe(base: &ProfileCurve, v0: &[f64], amplitudes: &[f64], horizon: f64, cfg: &FlowConfig) -> Result<QuadraticProbe> {
    if amplitudes.iter().any(|a| !(0.0..=0.1).contains(a)) {
        return Err(Error::Invalid("amplitudes must lie in [0, 0.1]".into()));
    }
    let start = FlowState::new(0.0, base.clone())?;
    let mut runner = FlowRunner::new(start.clone(), *cfg)?;
    let mut field = v0.to_vec();
    while runner.state.t < horizon - 0.5 * cfg.dt {
        field = flow_step_linearization(&field, &runner.state, cfg.dt)?;
        runner.step(&mut [&mut field])?;
    }
    let end = runner.state.clone();
    let grid = WeightedGrid::new(&end.curve, &end.geometry);
    let mut errors = Vec::new();
    let mut linear_norms = Vec::new();
    for &delta in amplitudes {
        let mut pts = base.points();
        for (i, p) in pts.iter_mut().enumerate() {
            let nrm = start.geometry.normal[i];
            *p += Vec2::new(nrm[0], nrm[1]) * (delta * v0[i]);
        }
        if base.topology == Topology::AxisToAxis {
            let last = pts.len() - 1;
            pts[0].y = 0.0;
            pts[last].y = 0.0;
        }
        let mut pert = FlowRunner::new(FlowState::new(0.0, base.with_points(&pts)?)?, *cfg)?;
        pert.run_until(horizon, &mut [])?;
        let v = difference_graph(&end, &pert.state)?;
        let diff: Vec<f64> = v.iter().zip(&field).map(|(a, b)| a - delta * b).collect();
        errors.push(l2w_norm(&diff, &grid));
        linear_norms.push(delta * l2w_norm(&field, &grid));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) =
        amplitudes.iter().zip(&errors).filter(|(a, e)| **a > 0.0 && **e > 0.0).map(|(a, e)| (a.ln(), e.ln())).unzip();
    let exponent = if xs.len() >= 2 { linear_fit(&xs, &ys).0 } else { f64::NAN };
    Ok(QuadraticProbe { amplitudes: amplitudes.to_vec(), errors, linear_norms, exponent })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shrinkers::{exact_shrinker, round_circle, round_sphere, ShrinkerKind};
    use crate::spectral::{eigen, EigenConfig};

    fn sphere_state(radius: f64, n: usize) -> FlowState {
        FlowState::new(0.0, round_sphere(radius, n).unwrap()).unwrap()
    }

    fn mean_radius(s: &FlowState) -> f64 {
        let pts = s.curve.points();
        pts.iter().map(|p| p.norm()).sum::<f64>() / pts.len() as f64
    }

    #[test]
    fn shrinkers_are_fixed_points() {
        for s in [sphere_state(2.0, 257), FlowState::new(0.0, round_circle(2f64.sqrt(), 256).unwrap()).unwrap()] {
            let mut runner = FlowRunner::new(s.clone(), FlowConfig::default()).unwrap();
            runner.run_until(1.0, &mut []).unwrap();
            let moved = (0..s.curve.len()).map(|i| (runner.state.curve.point(i) - s.curve.point(i)).norm()).fold(0.0, f64::max);
            assert!(moved <= 1e-8, "{moved}");
        }
    }

    #[test]
    fn spheres_follow_radial_ode() {
        // r' = r/2 - 2/r, so r^2 - 4 = (r0^2 - 4) e^t
        for r0 in [2.2, 1.5] {
            let mut runner = FlowRunner::new(sphere_state(r0, 257), FlowConfig::default()).unwrap();
            let mut prev = r0;
            for k in 1..=5 {
                runner.run_until(0.1 * k as f64, &mut []).unwrap();
                let r = mean_radius(&runner.state);
                let exact = (4.0 + (r0 * r0 - 4.0) * (0.1 * k as f64).exp()).sqrt();
                assert!((r - exact).abs() < 2e-3, "{r0}: {r} vs {exact}");
                assert!((r - 2.0).abs() > (prev - 2.0).abs());
                prev = r;
            }
        }
    }

    #[test]
    fn step_size_and_embedding_are_validated() {
        let s = sphere_state(2.0, 65);
        assert!(matches!(rmcf_step(&s, 0.02), Err(Error::UnstableTimeStep { .. })));
        let cfg = FlowConfig { dt: 0.5, ..Default::default() };
        assert!(FlowRunner::new(s, cfg).is_err());
    }

    #[test]
    fn perturbed_sphere_relaxes_and_f_decreases() {
        // the zero-mean P2 mode sits at eigenvalue -1/2; the dilation mode is unstable,
        // so the run stays short enough that its quadratic seed does not take over
        let base = round_sphere(2.0, 513).unwrap();
        let g = compute_geometry(&base).unwrap();
        let pts: Vec<Vec2> = (0..base.len())
            .map(|i| {
                let c = base.x[i] / 2.0;
                base.point(i) + Vec2::new(g.normal[i][0], g.normal[i][1]) * (0.01 * 0.5 * (3.0 * c * c - 1.0))
            })
            .collect();
        let start = base.with_points(&pts).unwrap();
        let traj = run_rmcf(&start, 2.0, 0.5, &FlowConfig::default(), |_| Ok(0.0)).unwrap();
        assert_eq!(traj.stop, StopReason::Completed);
        for w in traj.records.windows(2) {
            assert!(w[1].f <= w[0].f + 1e-8, "{} -> {}", w[0].f, w[1].f);
        }
        let spread = |s: &FlowState| {
            let r: Vec<f64> = s.curve.points().iter().map(|p| p.norm()).collect();
            r.iter().fold(f64::MIN, |a, b| a.max(*b)) - r.iter().fold(f64::MAX, |a, b| a.min(*b))
        };
        let ratio = spread(traj.states.last().unwrap()) / spread(&traj.states[0]);
        assert!((ratio - (-1.0f64).exp()).abs() < 0.03, "{ratio}");
    }

    #[test]
    fn eigenflow_and_constant_growth() {
        let s = FlowState::new(0.0, round_circle(2f64.sqrt(), 256).unwrap()).unwrap();
        let mut f = LinearFieldState::new(vec![1.0; 256], 0.0, &s, 2.0);
        for _ in 0..100 {
            f = linearized_step(&f, &s, 0.01, FieldBoundary::None).unwrap();
        }
        assert!((f.v[17] - 1f64.exp()).abs() < 1e-12, "{}", f.v[17]);

        let sp = sphere_state(2.0, 513);
        let res = eigen(&sp.curve, &sp.geometry, 1, &EigenConfig::default()).unwrap();
        let phi = res.phi1().to_vec();
        let f = LinearFieldState::new(phi.clone(), 0.0, &sp, 2.0);
        let next = linearized_step(&f, &sp, 0.01, FieldBoundary::None).unwrap();
        let err = next.v.iter().zip(&phi).map(|(a, b)| (a - 0.01f64.exp() * b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-4 * 0.01, "{err}");
    }

    #[test]
    fn heat_flow_conserves_weighted_mass() {
        let s = FlowState::new(0.0, crate::shrinkers::shoot_angenent_torus(&Default::default()).unwrap().profile).unwrap();
        let grid = WeightedGrid::new(&s.curve, &s.geometry);
        let v0: Vec<f64> = s.curve.x.iter().map(|x| (1.3 * x).cos() + 2.0).collect();
        let ones = vec![1.0; v0.len()];
        let mut f = LinearFieldState::new(v0, 0.0, &s, 10.0);
        let m0 = grid.inner(&f.v, &ones);
        for _ in 0..50 {
            f = drift_heat_step(&f, &s, 0.01, FieldBoundary::None).unwrap();
        }
        assert!((grid.inner(&f.v, &ones) - m0).abs() < 1e-10 * m0.abs());
    }

    #[test]
    fn dirichlet_field_vanishes_outside_ball() {
        let s = sphere_state(2.0, 129);
        let f = LinearFieldState::new(vec![1.0; 129], 0.0, &s, 2.0);
        assert!(matches!(linearized_step(&f, &s, 0.01, FieldBoundary::Dirichlet(3.0)), Err(Error::CutoffBeyondSurface { .. })));
        let c = exact_shrinker(ShrinkerKind::Cylinder, 241, Some(6.0)).unwrap();
        let cs = FlowState::new(0.0, c.profile).unwrap();
        let f = LinearFieldState::new(vec![1.0; 241], 0.0, &cs, 2.0);
        let next = linearized_step(&f, &cs, 0.01, FieldBoundary::Dirichlet(3.0)).unwrap();
        for i in 0..241 {
            if cs.curve.point(i).norm() > 3.0 {
                assert_eq!(next.v[i], 0.0);
            }
        }
    }

    #[test]
    fn concentric_spheres_differ_by_constant() {
        let a = sphere_state(2.0, 257);
        let b = sphere_state(2.01, 301);
        let v = difference_graph(&a, &b).unwrap();
        assert!(v.iter().all(|x| (x - 0.01).abs() < 1e-10), "{:?}", &v[..3]);
        assert!(difference_graph(&a, &a).unwrap().iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn graphical_scale_of_shrinker_itself_is_full() {
        let s = exact_shrinker(ShrinkerKind::Sphere, 257, None).unwrap();
        let st = FlowState::new(0.0, s.profile.clone()).unwrap();
        let rep = graphical_scale(&st, &s.profile, &GraphicalConfig::default()).unwrap();
        assert!((rep.r_graph - 2.0).abs() < 1e-12);
        let far = FlowState::new(0.0, round_sphere(3.0, 257).unwrap()).unwrap();
        assert_eq!(graphical_scale(&far, &s.profile, &GraphicalConfig::default()).unwrap().r_graph, 0.0);
    }

    #[test]
    fn transplant_from_shrinker_is_identity() {
        let s = exact_shrinker(ShrinkerKind::Sphere, 257, None).unwrap();
        let st = FlowState::new(0.0, s.profile.clone()).unwrap();
        let u: Vec<f64> = s.profile.x.iter().map(|x| x * x - 0.3 * x).collect();
        for mode in [TransplantMode::Normal] {
            let t = transplant(&u, &st, &s.profile, 2.0, mode).unwrap();
            for i in 0..u.len() {
                assert!((t.values[i] - u[i]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn transplant_norms_are_equivalent() {
        let sigma = round_sphere(2.0, 257).unwrap();
        let eps = 0.01;
        let slice = sphere_state(2.0 * (1.0 + eps), 311);
        let u: Vec<f64> = slice.curve.x.iter().map(|x| 1.0 + 0.3 * x).collect();
        let t = transplant(&u, &slice, &sigma, 3.0, TransplantMode::Normal).unwrap();
        let sg = compute_geometry(&sigma).unwrap();
        let ratio = l2w_norm(&t.values, &WeightedGrid::new(&sigma, &sg)) / l2w_norm(&u, &WeightedGrid::new(&slice.curve, &slice.geometry));
        assert!((ratio - 1.0).abs() <= 5.0 * eps, "{ratio}");
    }

    #[test]
    fn zero_amplitude_probe_has_zero_error() {
        let base = round_sphere(2.0, 129).unwrap();
        let v0: Vec<f64> = base.x.iter().map(|x| x / 2.0).collect();
        let p = quadratic_error_probe(&base, &v0, &[0.0], 0.05, &FlowConfig::default()).unwrap();
        assert_eq!(p.errors, vec![0.0]);
    }

    #[test]
    fn sphere_difference_is_quadratically_close_to_linear() {
        let base = round_sphere(2.0, 129).unwrap();
        let v0: Vec<f64> = base.x.iter().map(|x| 0.5 * (0.75 * x * x - 1.0)).collect();
        let p = quadratic_error_probe(&base, &v0, &[1e-3, 1e-2, 3e-2], 1.0, &FlowConfig::default()).unwrap();
        assert!(p.exponent >= 1.5, "{:?}", p);
    }
}
