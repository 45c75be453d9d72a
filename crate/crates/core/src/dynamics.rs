//! Perturbation experiments around a shrinker: drift toward the top eigenfunction, cone
//! preservation, Lyapunov exponents, entropy drop and the two-case growth probe.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{
    difference_graph, graph_c2_norm, graphical_scale, holder_quotient, linearized_step, transplant, FieldBoundary, FlowConfig, FlowRunner,
    FlowState, GraphicalConfig, LinearFieldState, TransplantMode,
};
use crate::geometry::{f_under_motion, gaussian_normalization, ProfileCurve, RigidMotionDilation, Topology};
use crate::linalg::linear_fit;
use crate::optim::nelder_mead_max;
use crate::spectral::{eigen, l2w_norm, q_norm_sq, EigenConfig, WeightedGrid};
use crate::spline::Vec2;

/// A shrinker together with its axially symmetric spectrum.
#[derive(Debug, Clone)]
pub struct ShrinkerReference {
    pub name: String,
    pub state: FlowState,
    /// Descending.
    pub eigenvalues: Vec<f64>,
    /// Weighted-L^2-normalized; the first one is positive.
    pub eigenfunctions: Vec<Vec<f64>>,
    /// `Lambda` of the Q-norm, one above the top eigenvalue.
    pub q_lambda: f64,
}

impl ShrinkerReference {
    pub fn new(name: &str, curve: ProfileCurve, modes: usize) -> Result<Self> {
        let state = FlowState::new(0.0, curve)?;
        let res = eigen(&state.curve, &state.geometry, modes, &EigenConfig { k_max: 0, ..Default::default() })?;
        let mut eigenfunctions = res.eigenfunctions;
        if eigenfunctions[0].iter().sum::<f64>() < 0.0 {
            eigenfunctions[0].iter_mut().for_each(|v| *v = -*v);
        }
        Ok(Self { name: name.to_string(), q_lambda: res.eigenvalues[0] + 1.0, eigenvalues: res.eigenvalues, eigenfunctions, state })
    }

    pub fn grid(&self) -> WeightedGrid {
        WeightedGrid::new(&self.state.curve, &self.state.geometry)
    }

    pub fn lambda1(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn phi1(&self) -> &[f64] {
        &self.eigenfunctions[0]
    }

    pub fn extent(&self) -> f64 {
        self.state.curve.points().iter().map(|p| p.norm()).fold(0.0, f64::max)
    }

    pub fn q_inner(&self, u: &[f64], v: &[f64]) -> f64 {
        let g = self.grid();
        let plus: Vec<f64> = u.iter().zip(v).map(|(a, b)| a + b).collect();
        let minus: Vec<f64> = u.iter().zip(v).map(|(a, b)| a - b).collect();
        0.25 * (q_norm_sq(&plus, &g, self.q_lambda) - q_norm_sq(&minus, &g, self.q_lambda))
    }
}

/// Move every node of `curve` along its normal by `u`.
pub fn normal_displacement(curve: &ProfileCurve, u: &[f64]) -> Result<ProfileCurve> {
    let g = crate::geometry::compute_geometry(curve)?;
    let mut pts = curve.points();
    for (i, p) in pts.iter_mut().enumerate() {
        *p += Vec2::new(g.normal[i][0], g.normal[i][1]) * u[i];
    }
    if curve.topology == Topology::AxisToAxis {
        let last = pts.len() - 1;
        pts[0].y = 0.0;
        pts[last].y = 0.0;
    }
    curve.with_points(&pts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConeNorm {
    L2,
    Q,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeState {
    pub t: f64,
    pub pi1: f64,
    pub pi2: f64,
    /// `pi1 / pi2`, infinite when `pi2` vanishes.
    pub ratio: f64,
    pub threshold: f64,
    pub inside: bool,
}

/// Norms of the top-mode part and the rest of `v`.
pub fn cone_split(v: &[f64], reference: &ShrinkerReference, norm: ConeNorm) -> (f64, f64) {
    let grid = reference.grid();
    let phi = reference.phi1();
    let c = grid.inner(v, phi);
    let rest: Vec<f64> = v.iter().zip(phi).map(|(a, p)| a - c * p).collect();
    match norm {
        ConeNorm::L2 => (c.abs(), l2w_norm(&rest, &grid)),
        ConeNorm::Q => {
            let top: Vec<f64> = phi.iter().map(|p| c * p).collect();
            (q_norm_sq(&top, &grid, reference.q_lambda).max(0.0).sqrt(), q_norm_sq(&rest, &grid, reference.q_lambda).max(0.0).sqrt())
        }
    }
}

pub fn cone_track(series: &[(f64, Vec<f64>)], reference: &ShrinkerReference, norm: ConeNorm, threshold: f64) -> Vec<ConeState> {
    series
        .iter()
        .map(|(t, v)| {
            let (pi1, pi2) = cone_split(v, reference, norm);
            let ratio = if pi2 > 0.0 { pi1 / pi2 } else { f64::INFINITY };
            ConeState { t: *t, pi1, pi2, ratio, threshold, inside: ratio >= threshold }
        })
        .collect()
}

/// `dv/dt = L v` on the static shrinker, recorded every `record_every`.
pub fn static_linear_series(reference: &ShrinkerReference, v0: &[f64], horizon: f64, dt: f64, record_every: f64) -> Result<Vec<(f64, Vec<f64>)>> {
    let steps = (horizon / dt).round() as usize;
    let every = ((record_every / dt).round() as usize).max(1);
    let mut field = LinearFieldState::new(v0.to_vec(), 0.0, &reference.state, reference.q_lambda);
    let mut out = vec![(0.0, field.v.clone())];
    for k in 1..=steps {
        field = linearized_step(&field, &reference.state, dt, FieldBoundary::None)?;
        if k % every == 0 {
            out.push((k as f64 * dt, field.v.clone()));
        }
    }
    Ok(out)
}

/// Same flow, returning `(t, log ||v||_{L^2})` with periodic renormalization.
pub fn static_linear_log_norms(reference: &ShrinkerReference, v0: &[f64], horizon: f64, dt: f64, record_every: f64) -> Result<Vec<(f64, f64)>> {
    let grid = reference.grid();
    let steps = (horizon / dt).round() as usize;
    let every = ((record_every / dt).round() as usize).max(1);
    let mut field = LinearFieldState::new(v0.to_vec(), 0.0, &reference.state, reference.q_lambda);
    let mut log_scale = 0.0;
    let mut out = vec![(0.0, l2w_norm(v0, &grid).ln())];
    for k in 1..=steps {
        field = linearized_step(&field, &reference.state, dt, FieldBoundary::None)?;
        if k % every == 0 {
            let n = l2w_norm(&field.v, &grid);
            out.push((k as f64 * dt, log_scale + n.ln()));
            if n > 0.0 {
                log_scale += n.ln();
                let v: Vec<f64> = field.v.iter().map(|x| x / n).collect();
                field = LinearFieldState::new(v, field.t, &reference.state, reference.q_lambda);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovFit {
    pub slope: f64,
    pub r2: f64,
    pub window: (f64, f64),
}

/// Least-squares slope of `log_norms` against `times` over the trailing half of the span.
pub fn lyapunov_exponent(times: &[f64], log_norms: &[f64]) -> Result<LyapunovFit> {
    let n = times.len().min(log_norms.len());
    let span = if n > 1 { times[n - 1] - times[0] } else { 0.0 };
    if n < 20 || span < 3.0 - 1e-9 {
        return Err(Error::WindowTooShort { samples: n, span });
    }
    let start = times[n - 1] - 0.5 * span;
    let (xs, ys): (Vec<f64>, Vec<f64>) = (0..n).filter(|&i| times[i] >= start - 1e-12).map(|i| (times[i], log_norms[i])).unzip();
    let (slope, _, r2) = linear_fit(&xs, &ys);
    Ok(LyapunovFit { slope, r2, window: (start, times[n - 1]) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearRecord {
    pub t: f64,
    pub log_l2: f64,
}

/// `dv/dt = L_{M_t} v` along the flow from `initial`, with the field carried through
/// resampling. Returns `log ||v||_{L^2(M_t)}` every `record_every`.
pub fn linear_along_flow(initial: &ProfileCurve, v0: &[f64], horizon: f64, flow: &FlowConfig, record_every: f64) -> Result<Vec<LinearRecord>> {
    let mut runner = FlowRunner::new(FlowState::new(0.0, initial.clone())?, *flow)?;
    let every = ((record_every / flow.dt).round() as usize).max(1);
    let norm = |v: &[f64], s: &FlowState| l2w_norm(v, &WeightedGrid::new(&s.curve, &s.geometry));
    let mut field = v0.to_vec();
    let mut log_scale = 0.0;
    let mut out = vec![LinearRecord { t: 0.0, log_l2: norm(&field, &runner.state).ln() }];
    while runner.state.t < horizon - 0.5 * flow.dt {
        let f = LinearFieldState::new(field, runner.state.t, &runner.state, 0.0);
        field = linearized_step(&f, &runner.state, flow.dt, FieldBoundary::None)?.v;
        runner.step(&mut [&mut field])?;
        if runner.steps % every == 0 {
            let n = norm(&field, &runner.state);
            out.push(LinearRecord { t: runner.state.t, log_l2: log_scale + n.ln() });
            log_scale += n.ln();
            field.iter_mut().for_each(|x| *x /= n);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SliceSpectrum {
    pub t: f64,
    pub lambda1: f64,
    /// C^2 size of the graph over the shrinker.
    pub graph_c2: f64,
    pub r_graph: f64,
}

/// Top eigenvalue of each slice of the flow from `initial`, with its graph size over the shrinker.
pub fn spectrum_along_flow(reference: &ShrinkerReference, initial: &ProfileCurve, horizon: f64, flow: &FlowConfig, record_every: f64) -> Result<Vec<SliceSpectrum>> {
    let mut runner = FlowRunner::new(FlowState::new(0.0, initial.clone())?, *flow)?;
    let every = ((record_every / flow.dt).round() as usize).max(1);
    let gcfg = GraphicalConfig { base_radius: reference.extent() + 1.0, ..Default::default() };
    let sample = |s: &FlowState| -> Result<SliceSpectrum> {
        let lambda1 = eigen(&s.curve, &s.geometry, 1, &EigenConfig { k_max: 0, ..Default::default() })?.lambda1();
        let u = difference_graph(&reference.state, s)?;
        let graph_c2 = graph_c2_norm(&reference.state.curve, &reference.state.geometry, &u, f64::INFINITY);
        let r_graph = graphical_scale(s, &reference.state.curve, &gcfg)?.r_graph;
        Ok(SliceSpectrum { t: s.t, lambda1, graph_c2, r_graph })
    };
    let mut out = vec![sample(&runner.state)?];
    while runner.state.t < horizon - 0.5 * flow.dt {
        runner.step(&mut [])?;
        if runner.steps % every == 0 {
            out.push(sample(&runner.state)?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConvergingBaseConfig {
    /// Index of the stable eigenfunction that seeds the flow.
    pub stable_mode: usize,
    pub eta: f64,
    /// Indices of the unstable modes whose coefficients are shot to zero at the horizon.
    pub unstable_modes: Vec<usize>,
    pub horizon: f64,
    pub flow: FlowConfig,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for ConvergingBaseConfig {
    fn default() -> Self {
        Self { stable_mode: 3, eta: 0.05, unstable_modes: vec![0, 1], horizon: 3.0, flow: FlowConfig::default(), tol: 1e-7, max_iter: 12 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergingBase {
    pub initial: ProfileCurve,
    pub coefficients: Vec<f64>,
    /// Unstable-mode coefficients of the graph at the horizon.
    pub residual: Vec<f64>,
    pub horizon: f64,
    pub evaluations: usize,
}

/// A flow that approaches the shrinker along a stable mode: start from
/// `Sigma + (eta psi + sum c_i phi_i) n` and choose `c` so that the unstable coefficients
/// of the graph vanish at the horizon (Broyden iteration).
pub fn manufacture_converging_base(reference: &ShrinkerReference, cfg: &ConvergingBaseConfig) -> Result<ConvergingBase> {
    let modes = reference.eigenfunctions.len();
    if cfg.stable_mode >= modes || cfg.unstable_modes.iter().any(|&i| i >= modes) {
        return Err(Error::Invalid(format!("mode index beyond the {modes} computed eigenfunctions")));
    }
    if reference.eigenvalues[cfg.stable_mode] >= 0.0 {
        return Err(Error::Invalid(format!("mode {} is not stable", cfg.stable_mode)));
    }
    let sigma = &reference.state;
    let grid = reference.grid();
    let m = cfg.unstable_modes.len();
    let build = |c: &[f64]| -> Result<ProfileCurve> {
        let u: Vec<f64> = (0..sigma.curve.len())
            .map(|i| cfg.eta * reference.eigenfunctions[cfg.stable_mode][i] + cfg.unstable_modes.iter().zip(c).map(|(&k, ck)| ck * reference.eigenfunctions[k][i]).sum::<f64>())
            .collect();
        normal_displacement(&sigma.curve, &u)
    };
    let mut evaluations = 0;
    let mut evaluate = |c: &[f64], horizon: f64| -> Result<DVector<f64>> {
        evaluations += 1;
        let mut runner = FlowRunner::new(FlowState::new(0.0, build(c)?)?, cfg.flow)?;
        runner.run_until(horizon, &mut [])?;
        let g = difference_graph(sigma, &runner.state)?;
        Ok(DVector::from_iterator(m, cfg.unstable_modes.iter().map(|&k| grid.inner(&g, &reference.eigenfunctions[k]))))
    };
    // continuation in the horizon: the unstable modes amplify the error in c by e^{lambda T}
    let stages = (cfg.horizon / 0.5).ceil().max(1.0) as usize;
    let mut c = DVector::zeros(m);
    let mut g = DVector::zeros(m);
    for stage in 1..=stages {
        let horizon = cfg.horizon * stage as f64 / stages as f64;
        let tol = cfg.tol * (cfg.horizon - horizon).exp();
        let mut jac = DMatrix::from_fn(m, m, |i, j| if i == j { (reference.eigenvalues[cfg.unstable_modes[i]] * horizon).exp() } else { 0.0 });
        g = evaluate(c.as_slice(), horizon).map_err(|e| Error::BaseFlowShooting(format!("flow to t = {horizon:.3} failed: {e}")))?;
        for _ in 0..cfg.max_iter {
            if g.amax() <= tol {
                break;
            }
            let mut dc = -jac.clone().lu().solve(&g).ok_or_else(|| Error::BaseFlowShooting("singular Jacobian".into()))?;
            let mut trial = None;
            for _ in 0..6 {
                match evaluate((&c + &dc).as_slice(), horizon) {
                    Ok(v) => {
                        trial = Some(v);
                        break;
                    }
                    Err(_) => dc *= 0.5,
                }
            }
            let g_new = trial.ok_or_else(|| Error::BaseFlowShooting(format!("no admissible step at t = {horizon:.3}")))?;
            c += &dc;
            let dg = &g_new - &g;
            let denom = dc.dot(&dc);
            if denom > 0.0 {
                jac += (&dg - &jac * &dc) * dc.transpose() / denom;
            }
            g = g_new;
        }
        if g.amax() > tol {
            return Err(Error::BaseFlowShooting(format!("unstable coefficients {:?} at t = {horizon:.3} after {evaluations} flows", g.as_slice())));
        }
    }
    Ok(ConvergingBase { initial: build(c.as_slice())?, coefficients: c.as_slice().to_vec(), residual: g.as_slice().to_vec(), horizon: cfg.horizon, evaluations })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignClass {
    Positive,
    Generic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PerturbationConfig {
    /// Shape on the nodes of the base flow's initial surface; rescaled to unit C^2 norm.
    pub shape: Vec<f64>,
    pub sign_class: SignClass,
    pub amplitudes: Vec<f64>,
    /// Exit once the transplanted difference reaches this C^2 size on the inner ball.
    pub delta: f64,
    pub max_time: f64,
    pub record_every: f64,
    pub flow: FlowConfig,
    /// Radius of the ball on the shrinker where the C^2 size is measured.
    pub inner_radius: f64,
}

impl Default for PerturbationConfig {
    fn default() -> Self {
        Self {
            shape: Vec::new(),
            sign_class: SignClass::Positive,
            amplitudes: vec![1e-3],
            delta: 0.05,
            max_time: 8.0,
            record_every: 0.05,
            flow: FlowConfig::default(),
            inner_radius: 5.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationRecord {
    pub t: f64,
    pub l2: f64,
    pub q: f64,
    pub cone_ratio: f64,
    pub phi1_coeff: f64,
    pub f: f64,
    pub r_graph: f64,
    pub c2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExitStatus {
    Exited,
    /// The difference never reached `delta`: the slow-growth case.
    HorizonReached,
}

#[derive(Debug, Clone)]
pub struct PerturbationOutcome {
    pub epsilon: f64,
    pub records: Vec<PerturbationRecord>,
    pub status: ExitStatus,
    pub exit_time: f64,
    /// Transplanted difference on the shrinker nodes at exit.
    pub final_u: Vec<f64>,
    /// `|<u, phi1>| / (|u| |phi1|)` in the weighted H^1 pairing.
    pub alignment_h1: f64,
    /// Same in the Q pairing.
    pub alignment_q: f64,
    pub holder_quotient: f64,
    pub final_state: FlowState,
}

fn alignment(u: &[f64], phi: &[f64], inner: impl Fn(&[f64], &[f64]) -> f64) -> f64 {
    let d = (inner(u, u) * inner(phi, phi)).sqrt();
    if d > 0.0 {
        inner(u, phi).abs() / d
    } else {
        0.0
    }
}

/// Run the base flow and `base + eps u0 n` side by side for each amplitude, tracking the
/// difference transplanted to the shrinker until its C^2 size reaches `delta`.
pub fn run_perturbation(reference: &ShrinkerReference, base_initial: &ProfileCurve, cfg: &PerturbationConfig) -> Result<Vec<PerturbationOutcome>> {
    if cfg.shape.len() != base_initial.len() {
        return Err(Error::Invalid(format!("shape has {} values for {} nodes", cfg.shape.len(), base_initial.len())));
    }
    if cfg.amplitudes.is_empty() || cfg.amplitudes.iter().any(|a| !(*a > 0.0)) || cfg.amplitudes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Invalid("amplitudes must be positive and increasing".into()));
    }
    if cfg.sign_class == SignClass::Positive && cfg.shape.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Invalid("positive sign class needs a positive shape".into()));
    }
    let bg = crate::geometry::compute_geometry(base_initial)?;
    let size = graph_c2_norm(base_initial, &bg, &cfg.shape, f64::INFINITY);
    if !(size > 0.0) {
        return Err(Error::Invalid("shape vanishes".into()));
    }
    let shape: Vec<f64> = cfg.shape.iter().map(|v| v / size).collect();
    let sigma = &reference.state;
    let grid = reference.grid();
    let phi = reference.phi1();
    let gcfg = GraphicalConfig { base_radius: cfg.inner_radius, ..Default::default() };
    let every = ((cfg.record_every / cfg.flow.dt).round() as usize).max(1);
    let truncation = |s: &FlowState| (s.curve.topology == Topology::OpenEnd).then(|| s.curve.points().iter().map(|p| p.norm()).fold(0.0, f64::max));

    cfg.amplitudes
        .iter()
        .map(|&eps| {
            let pert0: Vec<f64> = shape.iter().map(|v| eps * v).collect();
            let mut base = FlowRunner::new(FlowState::new(0.0, base_initial.clone())?, cfg.flow)?;
            let mut pert = FlowRunner::new(FlowState::new(0.0, normal_displacement(base_initial, &pert0)?)?, cfg.flow)?;
            let mut records = Vec::new();
            let measure = |b: &FlowState, p: &FlowState| -> Result<(PerturbationRecord, Vec<f64>)> {
                let t = b.t;
                let v = difference_graph(b, p).map_err(|_| Error::FlowLeftNeighborhood(t))?;
                let r_graph = graphical_scale(b, &sigma.curve, &gcfg)?.r_graph;
                if r_graph <= 0.0 {
                    return Err(Error::FlowLeftNeighborhood(t));
                }
                let u = transplant(&v, b, &sigma.curve, r_graph, TransplantMode::Normal).map_err(|_| Error::FlowLeftNeighborhood(t))?.values;
                let (pi1, pi2) = cone_split(&u, reference, ConeNorm::L2);
                let rec = PerturbationRecord {
                    t,
                    l2: l2w_norm(&u, &grid),
                    q: q_norm_sq(&u, &grid, reference.q_lambda).max(0.0).sqrt(),
                    cone_ratio: if pi2 > 0.0 { pi1 / pi2 } else { f64::INFINITY },
                    phi1_coeff: grid.inner(&u, phi),
                    f: p.f_value(truncation(p))?,
                    r_graph,
                    c2: graph_c2_norm(&sigma.curve, &sigma.geometry, &u, cfg.inner_radius),
                };
                Ok((rec, u))
            };
            let (rec, mut u) = measure(&base.state, &pert.state)?;
            records.push(rec);
            let mut status = ExitStatus::HorizonReached;
            while base.state.t < cfg.max_time - 0.5 * cfg.flow.dt {
                base.step(&mut [])?;
                pert.step(&mut []).map_err(|e| match e {
                    Error::SingularityApproach { t, .. } | Error::SelfIntersectionDetected(t) => Error::FlowLeftNeighborhood(t),
                    other => other,
                })?;
                if base.steps % every == 0 {
                    let (rec, uu) = measure(&base.state, &pert.state)?;
                    records.push(rec);
                    u = uu;
                    if rec.c2 >= cfg.delta {
                        status = ExitStatus::Exited;
                        break;
                    }
                }
            }
            let h1 = |a: &[f64], b: &[f64]| grid.h1_inner(a, b);
            Ok(PerturbationOutcome {
                epsilon: eps,
                exit_time: base.state.t,
                status,
                alignment_h1: alignment(&u, phi, h1),
                alignment_q: alignment(&u, phi, |a, b| reference.q_inner(a, b)),
                holder_quotient: holder_quotient(&sigma.curve, &sigma.geometry, &u, cfg.inner_radius),
                final_u: u,
                records,
                final_state: pert.state,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyDrop {
    pub deltas: Vec<f64>,
    /// `F(Sigma) - F(Sigma + delta phi n)` with `phi` Q-normalized.
    pub drops: Vec<f64>,
    /// Fitted coefficient of `delta^2` in `F(Sigma + delta phi n) - F(Sigma)`.
    pub c2: f64,
    /// `-<phi, L phi>` in the Gaussian normalization of F.
    pub quadratic_form: f64,
    pub direction: Vec<f64>,
}

impl EntropyDrop {
    /// Whether each drop beats `delta^2.5`.
    pub fn beats_power(&self) -> Vec<bool> {
        self.deltas.iter().zip(&self.drops).map(|(d, drop)| *drop > d.powf(2.5)).collect()
    }
}

/// F along the normal graph of `direction`, normalized so that `Q(phi) = 1` in the same
/// Gaussian normalization as F.
pub fn entropy_drop_check(reference: &ShrinkerReference, direction: &[f64], deltas: &[f64]) -> Result<EntropyDrop> {
    if deltas.iter().any(|d| !(0.0..=0.1).contains(d)) {
        return Err(Error::Invalid("deltas must lie in [0, 0.1]".into()));
    }
    let sigma = &reference.state.curve;
    if sigma.topology == Topology::OpenEnd {
        return Err(Error::UnboundedDomain);
    }
    let grid = reference.grid();
    let norm = gaussian_normalization(sigma.n_ambient);
    let q = (norm * q_norm_sq(direction, &grid, reference.q_lambda)).sqrt();
    if !(q > 0.0) {
        return Err(Error::Invalid("direction has zero Q-norm".into()));
    }
    let phi: Vec<f64> = direction.iter().map(|v| v / q).collect();
    let f0 = f_under_motion(sigma, &RigidMotionDilation::identity(), None, true)?;
    let drops = deltas
        .iter()
        .map(|&d| {
            if d == 0.0 {
                return Ok(0.0);
            }
            let moved = normal_displacement(sigma, &phi.iter().map(|v| d * v).collect::<Vec<_>>())?;
            Ok(f0 - f_under_motion(&moved, &RigidMotionDilation::identity(), None, true)?)
        })
        .collect::<Result<Vec<f64>>>()?;
    let (xs, ys): (Vec<f64>, Vec<f64>) = deltas.iter().zip(&drops).filter(|(d, _)| **d > 0.0).map(|(d, drop)| (*d, -drop / (d * d))).unzip();
    let c2 = match xs.len() {
        0 => 0.0,
        1 => ys[0],
        _ => linear_fit(&xs, &ys).1,
    };
    let lphi = grid.jacobi(&phi);
    Ok(EntropyDrop { deltas: deltas.to_vec(), drops, c2, quadratic_form: -norm * grid.inner(&phi, &lphi), direction: phi })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionSweep {
    pub max_f: f64,
    pub best: RigidMotionDilation,
    pub identity_f: f64,
}

/// Largest F over axial translations `|x0| <= delta` and dilations `|log s| <= delta`.
pub fn motion_sweep(curve: &ProfileCurve, delta: f64) -> Result<MotionSweep> {
    if !(delta >= 0.0) {
        return Err(Error::Invalid("sweep scale must be nonnegative".into()));
    }
    let trunc = (curve.topology == Topology::OpenEnd).then(|| curve.points().iter().map(|p| p.norm()).fold(0.0, f64::max));
    let motion = |p: &[f64]| RigidMotionDilation { translation: [p[0], 0.0], scale: p[1].exp() };
    let objective = |p: &[f64]| {
        if p[0].abs() > delta * (1.0 + 1e-12) || p[1].abs() > delta * (1.0 + 1e-12) {
            return f64::NEG_INFINITY;
        }
        f_under_motion(curve, &motion(p), trunc, true).unwrap_or(f64::NEG_INFINITY)
    };
    let identity_f = objective(&[0.0, 0.0]);
    let mut best = (vec![0.0, 0.0], identity_f);
    if delta > 0.0 {
        let g = 9;
        for a in 0..g {
            for b in 0..g {
                let p = vec![-delta + 2.0 * delta * a as f64 / (g - 1) as f64, -delta + 2.0 * delta * b as f64 / (g - 1) as f64];
                let v = objective(&p);
                if v > best.1 {
                    best = (p, v);
                }
            }
        }
        let step = delta / 4.0;
        let (p, v) = nelder_mead_max(objective, &best.0, &[step, step], 1e-12, 2000);
        if v > best.1 {
            best = (p, v);
        }
    }
    Ok(MotionSweep { max_f: best.1, best: motion(&best.0), identity_f })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GrowthCase {
    /// Grows at the top rate.
    Fast,
    /// Grows strictly slower.
    Slow,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TwoCaseConfig {
    pub horizon: f64,
    pub dt: f64,
    pub record_every: f64,
    /// Relative margin below the top eigenvalue that still counts as fast.
    pub margin: f64,
    /// Multiple of the constant added to slow shapes.
    pub boost: f64,
}

impl Default for TwoCaseConfig {
    fn default() -> Self {
        Self { horizon: 20.0, dt: 0.01, record_every: 0.1, margin: 0.05, boost: 0.01 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoCaseReport {
    pub slope: f64,
    pub case: GrowthCase,
    /// Slope and case after adding `boost` times the constant, for slow shapes.
    pub boosted: Option<(f64, GrowthCase)>,
}

/// Classify each shape by the growth rate of the linear flow on the static shrinker.
pub fn generic_two_case_probe(reference: &ShrinkerReference, shapes: &[Vec<f64>], cfg: &TwoCaseConfig) -> Result<Vec<TwoCaseReport>> {
    let grid = reference.grid();
    let threshold = reference.lambda1() - cfg.margin * reference.lambda1().abs();
    let classify = |u: &[f64]| -> Result<(f64, GrowthCase)> {
        let n = l2w_norm(u, &grid);
        if !(n > 0.0) {
            return Err(Error::Invalid("shape vanishes".into()));
        }
        let v: Vec<f64> = u.iter().map(|x| x / n).collect();
        let series = static_linear_log_norms(reference, &v, cfg.horizon, cfg.dt, cfg.record_every)?;
        let (ts, ls): (Vec<f64>, Vec<f64>) = series.into_iter().unzip();
        let fit = lyapunov_exponent(&ts, &ls)?;
        Ok((fit.slope, if fit.slope >= threshold { GrowthCase::Fast } else { GrowthCase::Slow }))
    };
    shapes
        .iter()
        .map(|u| {
            let n = l2w_norm(u, &grid);
            let (slope, case) = classify(u)?;
            let boosted = if case == GrowthCase::Slow {
                let b: Vec<f64> = u.iter().map(|x| x / n + cfg.boost).collect();
                Some(classify(&b)?)
            } else {
                None
            };
            Ok(TwoCaseReport { slope, case, boosted })
        })
        .collect()
}
