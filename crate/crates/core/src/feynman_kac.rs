//! Monte Carlo Feynman-Kac solver for `du/dt = Lap u + V u` on static and moving surfaces,
//! with a deterministic Trotter comparison and a propagator cocycle check.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{interpolate_at_arclength, FieldBoundary, FlowState};
use crate::geometry::ProfileCurve;
use crate::linalg::{compensated_sum, Tridiag};
use crate::spectral::{l2w_norm, WeightedGrid};
use crate::spline::{CurveSpline, Vec2};

/// Largest path time step accepted without a projection check.
pub const MAX_PATH_DT: f64 = 1e-3;

/// The surfaces the paths live on: one static slice or snapshots of a flow.
#[derive(Debug, Clone)]
pub enum FkBase {
    Static(FlowState),
    /// Snapshots with increasing `t`; the nearest one in time is used.
    Evolving(Vec<FlowState>),
}

impl FkBase {
    pub fn slice_index(&self, t: f64) -> usize {
        match self {
            FkBase::Static(_) => 0,
            FkBase::Evolving(states) => {
                let j = states.partition_point(|s| s.t < t);
                if j == 0 {
                    0
                } else if j == states.len() || t - states[j - 1].t <= states[j].t - t {
                    j - 1
                } else {
                    j
                }
            }
        }
    }

    pub fn slice(&self, index: usize) -> &FlowState {
        match self {
            FkBase::Static(s) => s,
            FkBase::Evolving(states) => &states[index],
        }
    }

    pub fn slice_at(&self, t: f64) -> &FlowState {
        self.slice(self.slice_index(t))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FkConfig {
    pub n_paths: usize,
    pub dt: f64,
    pub boundary: FieldBoundary,
    pub seed: u64,
    /// Switch off `V` to get pure drift diffusion.
    pub potential: bool,
}

impl Default for FkConfig {
    fn default() -> Self {
        Self { n_paths: 10_000, dt: 1e-3, boundary: FieldBoundary::None, seed: 0x5eed, potential: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathState {
    /// Spline parameter on the last slice visited.
    pub param: f64,
    /// Profile-plane position `(x, r)`.
    pub point: [f64; 2],
    /// Rotation angle about the axis (surfaces only).
    pub angle: f64,
    pub potential_integral: f64,
    pub alive: bool,
    pub stream: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathEnsemble {
    pub n_paths: usize,
    pub dt: f64,
    pub seed: u64,
    pub paths: Vec<PathState>,
    /// Endpoint `(x, t)` the paths run backward from.
    pub target: ([f64; 2], f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FkEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_paths: usize,
    pub killed_fraction: f64,
}

struct SliceSampler<'a> {
    curve: &'a ProfileCurve,
    spline: CurveSpline,
    potential: Vec<f64>,
    reach: Vec<f64>,
}

impl<'a> SliceSampler<'a> {
    fn new(slice: &'a FlowState, potential: bool) -> Self {
        let g = &slice.geometry;
        Self {
            curve: &slice.curve,
            spline: slice.curve.spline(),
            potential: g.a_norm_sq.iter().map(|a| if potential { a + 0.5 } else { 0.0 }).collect(),
            reach: g.a_norm_sq.iter().map(|a| 1.0 / a.sqrt().max(1e-12)).collect(),
        }
    }

    /// Node and fraction for a spline parameter.
    fn locate(&self, param: f64) -> (usize, usize, f64) {
        let n = self.curve.len();
        let seg = self.spline.real_segment(param);
        let next = if seg + 1 < n { seg + 1 } else { 0 };
        let k0 = self.spline.knot(seg);
        let k1 = if seg + 1 < n { self.spline.knot(seg + 1) } else { self.spline.param_range().1 };
        (seg, next, ((param - k0) / (k1 - k0)).clamp(0.0, 1.0))
    }

    fn interp(&self, values: &[f64], param: f64) -> f64 {
        let (a, b, f) = self.locate(param);
        values[a] * (1.0 - f) + values[b] * f
    }

    /// Potential and reach at `param`.
    fn local(&self, param: f64) -> (f64, f64) {
        let (a, b, f) = self.locate(param);
        (self.potential[a] * (1.0 - f) + self.potential[b] * f, self.reach[a].min(self.reach[b]))
    }

    /// Newton projection started from `guess`, with a windowed search as fallback.
    fn project_from(&self, q: Vec2, guess: f64) -> f64 {
        let (lo, hi) = self.spline.param_range();
        let periodic = self.spline.is_periodic();
        let fit = |s: f64| if periodic { s.rem_euclid(hi) } else { s.clamp(lo, hi) };
        let mut s = fit(guess);
        for _ in 0..8 {
            let (p, d1, d2) = self.spline.eval_all(s);
            let g = (p - q).dot(&d1);
            let gp = d1.norm_squared() + (p - q).dot(&d2);
            if !(gp > 0.0) {
                break;
            }
            let step = g / gp;
            s = fit(s - step);
            if step.abs() < 1e-12 * (1.0 + s.abs()) {
                return s;
            }
        }
        self.project(q, Some(fit(guess))).0
    }

    fn project(&self, q: Vec2, hint_param: Option<f64>) -> (f64, f64) {
        match hint_param {
            Some(p) => self.spline.closest_param(q, self.spline.real_segment(p), 16),
            None => self.spline.closest_param(q, 0, usize::MAX),
        }
    }
}

fn start_param(sampler: &SliceSampler, x: Vec2) -> Result<f64> {
    let (param, dist) = sampler.project(x, None);
    if dist > 1e-6 * (1.0 + x.norm()) {
        return Err(Error::Invalid(format!("start point is {dist:e} away from the slice")));
    }
    Ok(param)
}

fn outside(boundary: FieldBoundary, q: Vec2) -> bool {
    matches!(boundary, FieldBoundary::Dirichlet(r) if q.norm() > r)
}

/// Backward Euler-Maruyama paths from `(x, t)` down to time 0.
pub fn sample_paths(base: &FkBase, x: [f64; 2], t: f64, cfg: &FkConfig) -> Result<PathEnsemble> {
    if !(cfg.dt > 0.0) || !(t >= 0.0) || cfg.n_paths == 0 {
        return Err(Error::Invalid("need dt > 0, t >= 0 and at least one path".into()));
    }
    let n_steps = (t / cfg.dt).round() as usize;
    let dt = if n_steps == 0 { 0.0 } else { t / n_steps as f64 };
    // the slice schedule is shared by all paths
    let schedule: Vec<usize> = (0..n_steps).map(|k| base.slice_index(t - (k as f64 + 0.5) * dt)).collect();
    let mut samplers: Vec<Option<SliceSampler>> = Vec::new();
    let mut wanted: Vec<usize> = schedule.clone();
    wanted.push(base.slice_index(t));
    wanted.push(base.slice_index(0.0));
    let max_index = wanted.iter().copied().max().unwrap_or(0);
    samplers.resize_with(max_index + 1, || None);
    for &i in &wanted {
        if samplers[i].is_none() {
            samplers[i] = Some(SliceSampler::new(base.slice(i), cfg.potential));
        }
    }
    let first = samplers[base.slice_index(t)].as_ref().unwrap();
    let x = Vec2::new(x[0], x[1]);
    let p0 = start_param(first, x)?;
    let surface = first.curve.n_ambient == 2;
    let sq = (2.0 * dt).sqrt();
    let run = |idx: usize| -> Result<PathState> {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(idx as u64);
        let mut state = PathState {
            param: p0,
            point: [x.x, x.y],
            angle: 0.0,
            potential_integral: 0.0,
            alive: !outside(cfg.boundary, x),
            stream: idx as u64,
        };
        let mut current = usize::MAX;
        // position, tangent and potential at the current parameter
        let mut cached = (Vec2::zeros(), Vec2::zeros(), 0.0, 0.0);
        for (k, &si) in schedule.iter().enumerate() {
            if !state.alive {
                break;
            }
            let sampler = samplers[si].as_ref().unwrap();
            if si != current {
                let q = Vec2::new(state.point[0], state.point[1]);
                if current != usize::MAX {
                    state.param = sampler.project(q, None).0;
                }
                let (pos, d1, _) = sampler.spline.eval_all(state.param);
                let (v, reach) = sampler.local(state.param);
                cached = (pos, d1 / d1.norm(), v, reach);
                current = si;
            }
            let (here, tan, v_start, reach) = cached;
            let param = state.param;
            let xi1: f64 = StandardNormal.sample(&mut rng);
            let along = sq * xi1 - 0.5 * here.dot(&tan) * dt;
            let (next, turn, step_len) = if surface {
                let xi2: f64 = StandardNormal.sample(&mut rng);
                let b = sq * xi2;
                let moved = here + tan * along;
                (Vec2::new(moved.x, (moved.y * moved.y + b * b).sqrt()), b.atan2(moved.y), (along * along + b * b).sqrt())
            } else {
                (here + tan * along, 0.0, along.abs())
            };
            if step_len >= reach {
                return Err(Error::OffSurfaceProjectionFailed { path: idx, step: k });
            }
            let new_param = sampler.project_from(next, param + along);
            let (landed, d1, _) = sampler.spline.eval_all(new_param);
            let (v_end, reach_end) = sampler.local(new_param);
            cached = (landed, d1 / d1.norm(), v_end, reach_end);
            state.param = new_param;
            state.point = [landed.x, landed.y];
            state.angle += turn;
            state.potential_integral += 0.5 * (v_start + v_end) * dt;
            if outside(cfg.boundary, landed) {
                state.alive = false;
            }
        }
        if current == usize::MAX {
            current = base.slice_index(t);
        }
        let last = base.slice_index(0.0);
        if current != last {
            let sampler = samplers[last].as_ref().unwrap();
            state.param = sampler.project(Vec2::new(state.point[0], state.point[1]), None).0;
        }
        Ok(state)
    };
    let paths = (0..cfg.n_paths).into_par_iter().map(run).collect::<Result<Vec<_>>>()?;
    Ok(PathEnsemble { n_paths: cfg.n_paths, dt, seed: cfg.seed, paths, target: ([x.x, x.y], t) })
}

/// Estimate `u(x, t)` for initial data `f` given on the nodes of the time-0 slice.
pub fn fk_solve(f: &[f64], base: &FkBase, x: [f64; 2], t: f64, cfg: &FkConfig) -> Result<FkEstimate> {
    let slice0 = base.slice_at(0.0);
    if f.len() != slice0.curve.len() {
        return Err(Error::Invalid(format!("initial data has {} values for {} nodes", f.len(), slice0.curve.len())));
    }
    let ens = sample_paths(base, x, t, cfg)?;
    let sampler = SliceSampler::new(slice0, false);
    let weights: Vec<f64> = ens
        .paths
        .iter()
        .map(|p| if p.alive { sampler.interp(f, p.param) * p.potential_integral.exp() } else { 0.0 })
        .collect();
    let n = weights.len() as f64;
    let mean = compensated_sum(weights.iter().copied()) / n;
    let var = if weights.len() > 1 { compensated_sum(weights.iter().map(|w| (w - mean) * (w - mean))) / (n - 1.0) } else { 0.0 };
    let killed = ens.paths.iter().filter(|p| !p.alive).count() as f64 / n;
    Ok(FkEstimate { mean, std_error: (var / n).sqrt(), n_paths: ens.n_paths, killed_fraction: killed })
}

/// Potential used by the deterministic solvers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PotentialChoice {
    /// `|A|^2 + 1/2` of each slice.
    Jacobi,
    Zero,
    /// Fixed node values (static bases only).
    Custom(Vec<f64>),
}

fn slice_potential(choice: &PotentialChoice, slice: &FlowState) -> Result<Vec<f64>> {
    match choice {
        PotentialChoice::Jacobi => Ok(slice.geometry.a_norm_sq.iter().map(|a| a + 0.5).collect()),
        PotentialChoice::Zero => Ok(vec![0.0; slice.curve.len()]),
        PotentialChoice::Custom(v) if v.len() == slice.curve.len() => Ok(v.clone()),
        PotentialChoice::Custom(v) => Err(Error::Invalid(format!("potential has {} values for {} nodes", v.len(), slice.curve.len()))),
    }
}

/// Carry node values from one slice to another by normalized arclength.
pub fn transport_field(values: &[f64], from: &FlowState, to: &FlowState) -> Vec<f64> {
    if std::ptr::eq(from, to) || (from.curve.len() == to.curve.len() && from.curve.x == to.curve.x && from.curve.r == to.curve.r) {
        return values.to_vec();
    }
    let scale = from.curve.length / to.curve.length;
    let pos: Vec<f64> = to.curve.arclength.iter().map(|s| s * scale).collect();
    interpolate_at_arclength(&from.curve, values, &pos)
}

fn cn_matrices(slice: &FlowState, dt: f64, potential: &[f64]) -> (Tridiag, Tridiag) {
    let grid = WeightedGrid::new(&slice.curve, &slice.geometry);
    let mut op = grid.drift_matrix();
    for (d, p) in op.diag.iter_mut().zip(potential) {
        *d += p;
    }
    (op.scaled_plus_identity(-0.5 * dt, 1.0), op.scaled_plus_identity(0.5 * dt, 1.0))
}

/// Fine Crank-Nicolson steps over `[t0, t1]`, using the slice at each step midpoint.
/// Returns the values and the index of the slice they live on.
fn cn_propagate(u: &[f64], base: &FkBase, mut at: usize, t0: f64, t1: f64, steps: usize, potential: &PotentialChoice) -> Result<(Vec<f64>, usize)> {
    let mut u = u.to_vec();
    if steps == 0 || t1 == t0 {
        return Ok((u, at));
    }
    let h = (t1 - t0) / steps as f64;
    for k in 0..steps {
        let si = base.slice_index(t0 + (k as f64 + 0.5) * h);
        if si != at {
            u = transport_field(&u, base.slice(at), base.slice(si));
            at = si;
        }
        let slice = base.slice(si);
        let v = slice_potential(potential, slice)?;
        let (lhs, rhs) = cn_matrices(slice, h, &v);
        u = lhs.solve(&rhs.matvec(&u))?;
    }
    Ok((u, at))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrotterRow {
    pub substeps: usize,
    pub error: f64,
}

/// Lie splitting (drift diffusion, then `e^{dt V}`) against the unsplit Crank-Nicolson
/// solve, both on `reference_steps` fine steps. Errors are weighted L^2 on the final slice.
pub fn trotter_compare(f: &[f64], base: &FkBase, t: f64, substeps: &[usize], reference_steps: usize, potential: &PotentialChoice) -> Result<Vec<TrotterRow>> {
    let start = base.slice_index(0.0);
    if f.len() != base.slice(start).curve.len() {
        return Err(Error::Invalid("initial data does not match the time-0 slice".into()));
    }
    let (reference, ref_at) = cn_propagate(f, base, start, 0.0, t, reference_steps, potential)?;
    let final_slice = base.slice(ref_at);
    let grid = WeightedGrid::new(&final_slice.curve, &final_slice.geometry);
    substeps
        .iter()
        .map(|&n| {
            if n == 0 {
                return Err(Error::Invalid("substep count must be positive".into()));
            }
            let inner = (reference_steps / n).max(1);
            let tau = t / n as f64;
            let mut u = f.to_vec();
            let mut at = start;
            for k in 0..n {
                let t0 = k as f64 * tau;
                let (next, idx) = cn_propagate(&u, base, at, t0, t0 + tau, inner, &PotentialChoice::Zero)?;
                at = idx;
                let si = base.slice_index(t0 + 0.5 * tau);
                u = transport_field(&next, base.slice(at), base.slice(si));
                at = si;
                let v = slice_potential(potential, base.slice(si))?;
                u.iter_mut().zip(&v).for_each(|(x, p)| *x *= (tau * p).exp());
            }
            let u = transport_field(&u, base.slice(at), final_slice);
            let diff: Vec<f64> = u.iter().zip(&reference).map(|(a, b)| a - b).collect();
            Ok(TrotterRow { substeps: n, error: l2w_norm(&diff, &grid) })
        })
        .collect()
}

/// Compose the discrete propagator over `[r, s]` and `[s, t]` and compare with the direct
/// one over `[r, t]`, for unit-normalized probes. Steps are `round(span / dt)` per leg.
pub fn cocycle_check(base: &FkBase, r: f64, s: f64, t: f64, probes: &[Vec<f64>], dt: f64) -> Result<f64> {
    if !(r <= s && s <= t) || !(dt > 0.0) {
        return Err(Error::Invalid("need r <= s <= t and dt > 0".into()));
    }
    let start = base.slice_index(r);
    let grid0 = WeightedGrid::new(&base.slice(start).curve, &base.slice(start).geometry);
    let steps = |span: f64| if span == 0.0 { 0 } else { ((span / dt).round() as usize).max(1) };
    let pot = PotentialChoice::Jacobi;
    let mut worst = 0.0f64;
    for p in probes {
        let norm = l2w_norm(p, &grid0);
        if norm == 0.0 {
            continue;
        }
        let u: Vec<f64> = p.iter().map(|x| x / norm).collect();
        let (direct, at_d) = cn_propagate(&u, base, start, r, t, steps(t - r), &pot)?;
        let (half, at_h) = cn_propagate(&u, base, start, r, s, steps(s - r), &pot)?;
        let (composed, at_c) = cn_propagate(&half, base, at_h, s, t, steps(t - s), &pot)?;
        let composed = transport_field(&composed, base.slice(at_c), base.slice(at_d));
        let slice = base.slice(at_d);
        let grid = WeightedGrid::new(&slice.curve, &slice.geometry);
        let diff: Vec<f64> = direct.iter().zip(&composed).map(|(a, b)| a - b).collect();
        worst = worst.max(l2w_norm(&diff, &grid));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{run_rmcf, FlowConfig};
    use crate::geometry::compute_geometry;
    use crate::shrinkers::{round_circle, round_sphere, shoot_angenent_torus};
    use crate::spectral::{eigen, EigenConfig};

    fn static_base(curve: ProfileCurve) -> FkBase {
        FkBase::Static(FlowState::new(0.0, curve).unwrap())
    }

    fn circle() -> FkBase {
        static_base(round_circle(2f64.sqrt(), 256).unwrap())
    }

    fn sphere() -> FkBase {
        static_base(round_sphere(2.0, 257).unwrap())
    }

    #[test]
    fn circle_paths_accumulate_unit_potential() {
        let cfg = FkConfig { n_paths: 200, ..Default::default() };
        let ens = sample_paths(&circle(), [2f64.sqrt(), 0.0], 1.0, &cfg).unwrap();
        for p in &ens.paths {
            assert!((p.potential_integral - 1.0).abs() < 1e-12, "{}", p.potential_integral);
            assert!(p.alive);
        }
    }

    #[test]
    fn sphere_endpoint_coordinate_decays() {
        // <x, e1> has drift-Laplacian eigenvalue -1/2
        let cfg = FkConfig { n_paths: 4000, dt: 2e-3, potential: false, ..Default::default() };
        let base = sphere();
        for (start, expected) in [([0.0, 2.0], 0.0), ([2.0, 0.0], 2.0 * (-0.5f64).exp())] {
            let x = match &base {
                FkBase::Static(s) => s.curve.x.clone(),
                _ => unreachable!(),
            };
            let est = fk_solve(&x, &base, start, 1.0, &cfg).unwrap();
            assert!((est.mean - expected).abs() <= 3.0 * est.std_error + 0.01, "{est:?} vs {expected}");
        }
    }

    #[test]
    fn large_steps_leave_the_torus() {
        let base = static_base(shoot_angenent_torus(&Default::default()).unwrap().profile);
        let x = base.slice(0).curve.point(0);
        let cfg = FkConfig { n_paths: 50, dt: 0.1, ..Default::default() };
        assert!(matches!(sample_paths(&base, [x.x, x.y], 1.0, &cfg), Err(Error::OffSurfaceProjectionFailed { .. })));
    }

    #[test]
    fn zero_data_gives_zero_estimate() {
        let est = fk_solve(&vec![0.0; 257], &sphere(), [2.0, 0.0], 0.5, &FkConfig { n_paths: 64, ..Default::default() }).unwrap();
        assert_eq!((est.mean, est.std_error, est.killed_fraction), (0.0, 0.0, 0.0));
    }

    #[test]
    fn eigenfunction_grows_like_exponential() {
        let base = sphere();
        let s = base.slice(0);
        let phi = eigen(&s.curve, &s.geometry, 1, &EigenConfig::default()).unwrap().phi1().to_vec();
        let est = fk_solve(&phi, &base, [0.0, 2.0], 1.0, &FkConfig { n_paths: 500, ..Default::default() }).unwrap();
        let exact = std::f64::consts::E * phi[128];
        assert!((est.mean - exact).abs() <= (3.0 * est.std_error).max(0.02 * exact.abs()), "{est:?} {exact}");
    }

    #[test]
    fn dirichlet_killing_is_dominated() {
        let base = static_base(shoot_angenent_torus(&Default::default()).unwrap().profile);
        let curve = &base.slice(0).curve;
        let dist = |i: usize| (curve.point(i).norm() - 2.0).abs();
        let top = (0..curve.len()).min_by(|a, b| dist(*a).partial_cmp(&dist(*b)).unwrap()).unwrap();
        let x = curve.point(top);
        let f = vec![1.0; curve.len()];
        let cfg = FkConfig { n_paths: 400, dt: 1e-3, ..Default::default() };
        let free = fk_solve(&f, &base, [x.x, x.y], 0.3, &cfg).unwrap();
        let mut prev = 0.0;
        for r in [2.3, 2.8] {
            let est = fk_solve(&f, &base, [x.x, x.y], 0.3, &FkConfig { boundary: FieldBoundary::Dirichlet(r), ..cfg }).unwrap();
            assert!(est.killed_fraction > 0.0);
            assert!(est.mean >= prev);
            assert!(est.mean <= free.mean);
            prev = est.mean;
        }
        assert_eq!(free.killed_fraction, 0.0);
    }

    #[test]
    fn estimates_are_reproducible() {
        let cfg = FkConfig { n_paths: 100, ..Default::default() };
        let f: Vec<f64> = (0..257).map(|i| 1.0 + (i as f64 * 0.1).sin()).collect();
        let a = fk_solve(&f, &sphere(), [2.0, 0.0], 0.2, &cfg).unwrap();
        let b = fk_solve(&f, &sphere(), [2.0, 0.0], 0.2, &cfg).unwrap();
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.std_error.to_bits(), b.std_error.to_bits());
    }

    #[test]
    fn unit_data_without_potential_is_conserved() {
        let est = fk_solve(&vec![1.0; 257], &sphere(), [1.0, 3f64.sqrt()], 0.5, &FkConfig { n_paths: 100, potential: false, ..Default::default() }).unwrap();
        assert!((est.mean - 1.0).abs() < 1e-12 && est.std_error < 1e-12);
    }

    #[test]
    fn trotter_error_decreases_at_first_order() {
        let base = circle();
        let s = base.slice(0);
        let f: Vec<f64> = s.curve.x.iter().map(|x| 1.0 + 0.5 * x).collect();
        let v: Vec<f64> = s.curve.x.iter().map(|x| 0.5 + 0.5 * x).collect();
        let rows = trotter_compare(&f, &base, 1.0, &[4, 8, 16, 32], 1024, &PotentialChoice::Custom(v)).unwrap();
        for w in rows.windows(2) {
            assert!(w[1].error < w[0].error);
        }
        let order = (rows[2].error / rows[3].error).log2();
        assert!(order >= 0.9, "{rows:?}");
        let zero = trotter_compare(&f, &base, 1.0, &[4], 1024, &PotentialChoice::Zero).unwrap();
        assert!(zero[0].error < 1e-13);
        let jac = trotter_compare(&f, &base, 1.0, &[4], 1024, &PotentialChoice::Jacobi).unwrap();
        // constant potential commutes; what is left is the reference's own time error
        assert!(jac[0].error < 1e-6, "{jac:?}");
        assert_eq!(trotter_compare(&f, &base, 0.0, &[8], 1024, &PotentialChoice::Jacobi).unwrap()[0].error, 0.0);
    }

    #[test]
    fn cocycle_on_static_and_moving_bases() {
        let base = circle();
        let s = base.slice(0);
        let res = eigen(&s.curve, &s.geometry, 3, &EigenConfig::default()).unwrap();
        let probes: Vec<Vec<f64>> = res.eigenfunctions.iter().take(6).cloned().collect();
        assert_eq!(cocycle_check(&base, 0.0, 0.0, 1.0, &probes, 0.01).unwrap(), 0.0);
        let stat = cocycle_check(&base, 0.0, 0.333, 1.0, &probes, 0.01).unwrap();
        assert!(stat <= 0.01, "{stat}");

        let sp = round_sphere(2.0, 129).unwrap();
        let g = compute_geometry(&sp).unwrap();
        let pts: Vec<Vec2> = (0..sp.len())
            .map(|i| {
                let c = sp.x[i] / 2.0;
                sp.point(i) + Vec2::new(g.normal[i][0], g.normal[i][1]) * (0.02 * 0.5 * (3.0 * c * c - 1.0))
            })
            .collect();
        let traj = run_rmcf(&sp.with_points(&pts).unwrap(), 1.0, 0.01, &FlowConfig::default(), |_| Ok(0.0)).unwrap();
        let moving = FkBase::Evolving(traj.states);
        let ms = moving.slice(0);
        let probes: Vec<Vec<f64>> = vec![vec![1.0; ms.curve.len()], ms.curve.x.clone()];
        let sphere_static = static_base(sp);
        let st = cocycle_check(&sphere_static, 0.0, 0.333, 1.0, &probes, 0.01).unwrap();
        let mv = cocycle_check(&moving, 0.0, 0.333, 1.0, &probes, 0.01).unwrap();
        // static legs differ only by the step-size error of Crank-Nicolson; a moving base
        // also switches snapshots at different instants, which costs O(dt |dL/dt|)
        assert!(st <= 1e-4 && mv <= 0.01, "{mv} vs {st}");
    }
}
