//! The weighted Jacobi operator `L = Delta - <x, grad>/2 + |A|^2 + 1/2` on profiles.
//!
//! Functions of the form `u(s) e^{ik phi}` reduce `L` to a Sturm-Liouville problem on the
//! profile. It is discretized in divergence form against the weight
//! `rho = area_element * e^{-|x|^2/4}`, so the discrete operator is exactly symmetric for
//! the quadrature inner product `sum_i m_i u_i v_i`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ProfileCurve, SurfaceGeometry, Topology};
use crate::linalg::{compensated_sum, Tridiag};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "radius", rename_all = "kebab-case")]
pub enum Cutoff {
    /// Ambient ball `|x| <= R` around the origin.
    Ball(f64),
    /// Arclength `<= R` from the first profile sample.
    GeodesicCap(f64),
}

impl Cutoff {
    pub fn radius(&self) -> f64 {
        match self {
            Cutoff::Ball(r) | Cutoff::GeodesicCap(r) => *r,
        }
    }

    /// Which samples lie inside, and the extent the radius is compared against.
    pub fn inside(&self, curve: &ProfileCurve) -> (Vec<bool>, f64) {
        match self {
            Cutoff::Ball(r) => {
                let ext = (0..curve.len()).map(|i| curve.point(i).norm()).fold(0.0, f64::max);
                ((0..curve.len()).map(|i| curve.point(i).norm() <= *r).collect(), ext)
            }
            Cutoff::GeodesicCap(r) => {
                let ext = if curve.is_closed() { curve.length / 2.0 } else { curve.length };
                let inside = curve
                    .arclength
                    .iter()
                    .map(|s| {
                        let d = if curve.is_closed() { s.min(curve.length - s) } else { *s };
                        d <= *r
                    })
                    .collect();
                (inside, ext)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    Dirichlet,
    /// Natural (Neumann) conditions; a cutoff then simply truncates the domain.
    #[default]
    None,
}

/// Edge and cell weights of the divergence-form discretization on one profile.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGrid {
    pub n_ambient: u8,
    pub closed: bool,
    pub log_mass: Vec<f64>,
    pub edge_log_rho: Vec<f64>,
    pub edge_len: Vec<f64>,
    pub a_norm_sq: Vec<f64>,
    pub r: Vec<f64>,
    pub pole: Vec<bool>,
}

impl WeightedGrid {
    pub fn new(curve: &ProfileCurve, geom: &SurfaceGeometry) -> Self {
        let n = curve.len();
        let segs = curve.n_segments();
        let mut edge_log_rho = Vec::with_capacity(segs);
        let mut edge_len = Vec::with_capacity(segs);
        for j in 0..segs {
            let a = curve.point(j);
            let b = curve.point((j + 1) % n);
            let mid = (a + b) * 0.5;
            let mut lr = -mid.norm_squared() / 4.0;
            if curve.n_ambient == 2 {
                lr += (std::f64::consts::TAU * mid.y.abs()).ln();
            }
            edge_log_rho.push(lr);
            edge_len.push((b - a).norm());
        }
        let mut pole = vec![false; n];
        if curve.topology == Topology::AxisToAxis {
            pole[0] = true;
            pole[n - 1] = true;
        }
        Self {
            n_ambient: curve.n_ambient,
            closed: curve.is_closed(),
            log_mass: geom.log_mass.clone(),
            edge_log_rho,
            edge_len,
            a_norm_sq: geom.a_norm_sq.clone(),
            r: curve.r.clone(),
            pole,
        }
    }

    pub fn len(&self) -> usize {
        self.log_mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_mass.is_empty()
    }

    pub fn edge(&self, j: usize) -> (usize, usize) {
        (j, (j + 1) % self.len())
    }

    /// `rho_e / h_e`
    pub fn conductance(&self, j: usize) -> f64 {
        (self.edge_log_rho[j] - self.edge_len[j].ln()).exp()
    }

    pub fn masses(&self) -> Vec<f64> {
        self.log_mass.iter().map(|v| v.exp()).collect()
    }

    /// Potential `|A|^2 + 1/2 - k^2/r^2` of Fourier mode `k`.
    pub fn potential(&self, k: u32) -> Vec<f64> {
        (0..self.len())
            .map(|i| {
                let mut v = self.a_norm_sq[i] + 0.5;
                if k > 0 && self.n_ambient == 2 && !self.pole[i] {
                    v -= (k * k) as f64 / (self.r[i] * self.r[i]);
                }
                v
            })
            .collect()
    }

    /// Weighted drift Laplacian `M^{-1} K u` with natural boundary conditions.
    pub fn drift_laplacian(&self, u: &[f64]) -> Vec<f64> {
        self.drift_matrix().matvec(u)
    }

    // conductance over cell mass, as a ratio of logs so far-out nodes do not underflow
    fn coupling(&self, j: usize, node: usize) -> f64 {
        (self.edge_log_rho[j] - self.edge_len[j].ln() - self.log_mass[node]).exp()
    }

    /// `L u` for the axially symmetric mode.
    pub fn jacobi(&self, u: &[f64]) -> Vec<f64> {
        let pot = self.potential(0);
        let mut out = self.drift_laplacian(u);
        for i in 0..out.len() {
            out[i] += pot[i] * u[i];
        }
        out
    }

    /// `sum_i m_i u_i v_i`
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        compensated_sum((0..self.len()).map(|i| self.log_mass[i].exp() * u[i] * v[i]))
    }

    /// `int grad u . grad v e^{-|x|^2/4} dmu` for axially symmetric functions.
    pub fn dirichlet_form(&self, u: &[f64], v: &[f64]) -> f64 {
        compensated_sum((0..self.edge_len.len()).map(|j| {
            let (a, b) = self.edge(j);
            self.conductance(j) * (u[b] - u[a]) * (v[b] - v[a])
        }))
    }

    /// Weighted H^1 inner product `int (u v + grad u . grad v) e^{-|x|^2/4} dmu`.
    pub fn h1_inner(&self, u: &[f64], v: &[f64]) -> f64 {
        self.inner(u, v) + self.dirichlet_form(u, v)
    }

    /// Tridiagonal matrix of the drift Laplacian (natural boundary), not symmetrized.
    pub fn drift_matrix(&self) -> Tridiag {
        let mut t = Tridiag::zeros(self.len(), self.closed);
        for j in 0..self.edge_len.len() {
            let (a, b) = self.edge(j);
            let (ca, cb) = (self.coupling(j, a), self.coupling(j, b));
            t.diag[a] -= ca;
            t.diag[b] -= cb;
            t.upper[a] += ca;
            t.lower[b] += cb;
        }
        t
    }

    /// Tridiagonal matrix of `u -> L u` (mode 0, natural boundary), not symmetrized.
    pub fn jacobi_matrix(&self) -> Tridiag {
        let mut t = self.drift_matrix();
        for (d, p) in t.diag.iter_mut().zip(self.potential(0)) {
            *d += p;
        }
        t
    }
}

/// A discrete eigenproblem for one Fourier mode, optionally cut off.
#[derive(Debug, Clone)]
pub struct SpectralSystem {
    pub k: u32,
    pub cutoff: Option<Cutoff>,
    pub boundary: Boundary,
    pub active: Vec<bool>,
    pub grid: WeightedGrid,
    pub potential: Vec<f64>,
    /// `M^{-1/2} K M^{-1/2} + V` on active nodes; inactive rows are decoupled.
    pub sym: Tridiag,
}

pub fn assemble(curve: &ProfileCurve, geom: &SurfaceGeometry, k: u32, cutoff: Option<Cutoff>, boundary: Boundary) -> Result<SpectralSystem> {
    let grid = WeightedGrid::new(curve, geom);
    let n = grid.len();
    let mut active = vec![true; n];
    if let Some(c) = cutoff {
        let (inside, extent) = c.inside(curve);
        if c.radius() > extent * (1.0 + 1e-12) {
            return Err(Error::CutoffBeyondSurface { radius: c.radius(), extent });
        }
        active = inside;
    }
    if k > 0 && curve.n_ambient == 2 {
        for i in 0..n {
            if grid.pole[i] {
                active[i] = false;
            }
        }
    }
    if k > 0 && curve.n_ambient == 1 {
        return Err(Error::Invalid("Fourier modes k > 0 only exist for surfaces of revolution".into()));
    }
    if !active.iter().any(|a| *a) {
        return Err(Error::Invalid("cutoff leaves no active nodes".into()));
    }
    // a pole removed for k > 0 is a Dirichlet node even under natural boundary conditions
    let dirichlet_node = |i: usize| boundary == Boundary::Dirichlet || (k > 0 && grid.pole[i]);
    let potential = grid.potential(k);
    let mut sym = Tridiag::zeros(n, grid.closed);
    for j in 0..grid.edge_len.len() {
        let (a, b) = grid.edge(j);
        let lc = grid.edge_log_rho[j] - grid.edge_len[j].ln();
        match (active[a], active[b]) {
            (true, true) => {
                let off = (lc - 0.5 * (grid.log_mass[a] + grid.log_mass[b])).exp();
                sym.diag[a] -= (lc - grid.log_mass[a]).exp();
                sym.diag[b] -= (lc - grid.log_mass[b]).exp();
                sym.upper[a] = off;
                sym.lower[b] = off;
            }
            (true, false) if dirichlet_node(b) => sym.diag[a] -= (lc - grid.log_mass[a]).exp(),
            (false, true) if dirichlet_node(a) => sym.diag[b] -= (lc - grid.log_mass[b]).exp(),
            _ => {}
        }
    }
    for i in 0..n {
        if active[i] {
            sym.diag[i] += potential[i];
        }
    }
    let floor = (0..n)
        .filter(|&i| active[i])
        .map(|i| sym.diag[i] - sym.lower[i].abs() - sym.upper[i].abs())
        .fold(f64::INFINITY, f64::min);
    for i in 0..n {
        if !active[i] {
            sym.diag[i] = floor - 1.0;
        }
    }
    Ok(SpectralSystem { k, cutoff, boundary, active, grid, potential, sym })
}

impl SpectralSystem {
    pub fn active_count(&self) -> usize {
        self.active.iter().filter(|a| **a).count()
    }

    /// `L u` on the active set (zero elsewhere), in the unsymmetrized form.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let n = self.grid.len();
        let sqm: Vec<f64> = self.grid.log_mass.iter().map(|v| (0.5 * v).exp()).collect();
        let y: Vec<f64> = (0..n).map(|i| if self.active[i] { u[i] * sqm[i] } else { 0.0 }).collect();
        let sy = self.sym.matvec(&y);
        (0..n).map(|i| if self.active[i] { sy[i] / sqm[i] } else { 0.0 }).collect()
    }
}

/// Number of eigenvalues of the symmetric (possibly periodic) tridiagonal `t` below `sigma`.
///
/// Non-periodic matrices use the Sturm count of `t - sigma I`. A periodic matrix is split
/// as a bordered system; its inertia is that of the leading block plus the sign of the
/// scalar Schur complement of the last row.
pub fn count_below(t: &Tridiag, sigma: f64) -> usize {
    let n = t.len();
    if !t.periodic || n < 3 {
        return sturm_count(&t.diag, &t.lower, sigma);
    }
    let m = n - 1;
    let lead = sturm_count(&t.diag[..m], &t.lower[..m], sigma);
    let mut block = Tridiag::zeros(m, false);
    for i in 0..m {
        block.diag[i] = t.diag[i] - sigma;
        block.lower[i] = t.lower[i];
        block.upper[i] = t.upper[i];
    }
    block.lower[0] = 0.0;
    block.upper[m - 1] = 0.0;
    let mut c = vec![0.0; m];
    c[0] += t.lower[0];
    c[m - 1] += t.upper[m - 1];
    let schur = match block.solve(&c) {
        Ok(z) => t.diag[m] - sigma - c.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>(),
        Err(_) => {
            let scale = t.diag.iter().map(|d| d.abs()).fold(1.0, f64::max);
            return count_below(t, sigma + 64.0 * f64::EPSILON * scale);
        }
    };
    lead + usize::from(schur < 0.0)
}

fn sturm_count(diag: &[f64], lower: &[f64], sigma: f64) -> usize {
    let scale = diag.iter().map(|d| d.abs()).fold(1.0, f64::max);
    let pivmin = f64::MIN_POSITIVE.max(f64::EPSILON * f64::EPSILON * scale);
    let mut neg = 0;
    let mut d = 1.0;
    for i in 0..diag.len() {
        let b2 = if i == 0 { 0.0 } else { lower[i] * lower[i] };
        d = diag[i] - sigma - b2 / d;
        if d.abs() < pivmin {
            d = -pivmin;
        }
        if d < 0.0 {
            neg += 1;
        }
    }
    neg
}

fn gershgorin(t: &Tridiag) -> (f64, f64) {
    let n = t.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let mut rad = 0.0;
        if i > 0 || t.periodic {
            rad += t.lower[i].abs();
        }
        if i + 1 < n || t.periodic {
            rad += t.upper[i].abs();
        }
        lo = lo.min(t.diag[i] - rad);
        hi = hi.max(t.diag[i] + rad);
    }
    (lo, hi)
}

/// Top `count` eigenpairs of a symmetric tridiagonal matrix (descending), by inertia
/// bisection followed by shifted inverse iteration with Gram-Schmidt deflation.
pub fn top_eigenpairs(t: &Tridiag, count: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = t.len();
    let count = count.min(n);
    let (lo, hi) = gershgorin(t);
    let scale = lo.abs().max(hi.abs()).max(1.0);
    let mut values = Vec::with_capacity(count);
    for j in 1..=count {
        // largest sigma with at least j eigenvalues >= sigma
        let (mut a, mut b) = (lo - 1e-9 * scale, hi + 1e-9 * scale);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            let above = n - count_below(t, mid);
            if above >= j {
                a = mid;
            } else {
                b = mid;
            }
            if b - a <= 4.0 * f64::EPSILON * scale {
                break;
            }
        }
        values.push(0.5 * (a + b));
    }
    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(count);
    let mut state = 0x2545_f491_4f6c_dd1du64;
    let max_iter = 60;
    for (j, lam) in values.iter_mut().enumerate() {
        let shift = *lam + 1e-10 * scale;
        let lu = t.scaled_plus_identity(1.0, -shift).factor()?;
        let mut x: Vec<f64> = (0..n)
            .map(|_| {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            })
            .collect();
        let mut converged = false;
        for _ in 0..max_iter {
            lu.solve_in_place(&mut x);
            for v in &vectors {
                let d: f64 = v.iter().zip(&x).map(|(a, b)| a * b).sum();
                x.iter_mut().zip(v).for_each(|(xi, vi)| *xi -= d * vi);
            }
            let nrm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if nrm == 0.0 || !nrm.is_finite() {
                return Err(Error::EigensolverNoConvergence(j));
            }
            x.iter_mut().for_each(|v| *v /= nrm);
            let tx = t.matvec(&x);
            let rq: f64 = tx.iter().zip(&x).map(|(a, b)| a * b).sum();
            let res = tx.iter().zip(&x).map(|(a, b)| (a - rq * b).powi(2)).sum::<f64>().sqrt();
            if res <= 1e-10 * scale {
                *lam = rq;
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::EigensolverNoConvergence(max_iter));
        }
        vectors.push(x);
    }
    Ok((values, vectors))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Harmonic {
    Axial,
    Cos,
    Sin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeTag {
    pub k: u32,
    pub harmonic: Harmonic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralResult {
    /// Descending.
    pub eigenvalues: Vec<f64>,
    /// Profile node values, normalized in the weighted L^2 inner product.
    pub eigenfunctions: Vec<Vec<f64>>,
    pub gap: f64,
    pub mode_provenance: Vec<ModeTag>,
}

impl SpectralResult {
    pub fn lambda1(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn phi1(&self) -> &[f64] {
        &self.eigenfunctions[0]
    }
}

/// Eigenpairs of a single system, as weighted-normalized node functions.
pub fn eigen_single(system: &SpectralSystem, count: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    if count == 0 {
        return Err(Error::Invalid("eigenpair count must be at least 1".into()));
    }
    let count = count.min(system.active_count());
    let (vals, vecs) = top_eigenpairs(&system.sym, count)?;
    let funcs = vecs
        .into_iter()
        .map(|y| {
            y.iter()
                .zip(&system.grid.log_mass)
                .zip(&system.active)
                .map(|((v, lm), a)| if *a { v * (-0.5 * lm).exp() } else { 0.0 })
                .collect()
        })
        .collect();
    Ok((vals, funcs))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EigenConfig {
    pub k_max: u32,
    pub cutoff: Option<Cutoff>,
    pub boundary: Boundary,
}

impl Default for EigenConfig {
    fn default() -> Self {
        Self { k_max: 8, cutoff: None, boundary: Boundary::None }
    }
}

/// Top `count` eigenpairs of `L` on the surface, merged over Fourier modes `0..=k_max`.
/// Modes with `k >= 1` contribute a cosine and a sine copy of each eigenvalue.
pub fn eigen(curve: &ProfileCurve, geom: &SurfaceGeometry, count: usize, cfg: &EigenConfig) -> Result<SpectralResult> {
    if count == 0 {
        return Err(Error::Invalid("eigenpair count must be at least 1".into()));
    }
    let k_top = if curve.n_ambient == 2 { cfg.k_max } else { 0 };
    let mut pool: Vec<(f64, Vec<f64>, ModeTag)> = Vec::new();
    for k in 0..=k_top {
        let sys = assemble(curve, geom, k, cfg.cutoff, cfg.boundary)?;
        let (vals, funcs) = eigen_single(&sys, count)?;
        for (v, f) in vals.into_iter().zip(funcs) {
            if k == 0 {
                pool.push((v, f, ModeTag { k, harmonic: Harmonic::Axial }));
            } else {
                pool.push((v, f.clone(), ModeTag { k, harmonic: Harmonic::Cos }));
                pool.push((v, f, ModeTag { k, harmonic: Harmonic::Sin }));
            }
        }
    }
    // stable sort keeps lower k first among ties
    pool.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    pool.truncate(count);
    let mut eigenvalues = Vec::new();
    let mut eigenfunctions = Vec::new();
    let mut mode_provenance = Vec::new();
    for (v, f, t) in pool {
        eigenvalues.push(v);
        eigenfunctions.push(f);
        mode_provenance.push(t);
    }
    let s: f64 = eigenfunctions[0].iter().sum();
    if s < 0.0 {
        eigenfunctions[0].iter_mut().for_each(|v| *v = -*v);
    }
    let gap = if eigenvalues.len() > 1 { eigenvalues[0] - eigenvalues[1] } else { f64::NAN };
    Ok(SpectralResult { eigenvalues, eigenfunctions, gap, mode_provenance })
}

/// Leading eigenvalue for each cutoff radius (Dirichlet conditions on the cut).
pub fn dirichlet_sweep(curve: &ProfileCurve, geom: &SurfaceGeometry, cutoffs: &[Cutoff], k_max: u32) -> Result<Vec<f64>> {
    for w in cutoffs.windows(2) {
        if w[1].radius() <= w[0].radius() {
            return Err(Error::Invalid("cutoff radii must increase".into()));
        }
    }
    cutoffs
        .iter()
        .map(|c| {
            let cfg = EigenConfig { k_max, cutoff: Some(*c), boundary: Boundary::Dirichlet };
            Ok(eigen(curve, geom, 1, &cfg)?.lambda1())
        })
        .collect()
}

/// Squared Q-norm `int (|grad u|^2 + Lambda u^2 - (|A|^2 + 1/2) u^2) e^{-|x|^2/4} dmu`.
pub fn q_norm_sq(u: &[f64], grid: &WeightedGrid, lambda: f64) -> f64 {
    let pot = grid.potential(0);
    let mass_part = compensated_sum((0..grid.len()).map(|i| grid.log_mass[i].exp() * (lambda - pot[i]) * u[i] * u[i]));
    grid.dirichlet_form(u, u) + mass_part
}

pub fn q_norm(u: &[f64], grid: &WeightedGrid, lambda: f64) -> Result<f64> {
    let q = q_norm_sq(u, grid, lambda);
    if q < 0.0 {
        return Err(Error::LambdaTooSmall { lambda, q_sq: q });
    }
    Ok(q.sqrt())
}

pub fn l2w_norm(u: &[f64], grid: &WeightedGrid) -> f64 {
    grid.inner(u, u).max(0.0).sqrt()
}

/// Coefficient of `u` along `phi` in the weighted L^2 pairing.
pub fn project(u: &[f64], phi: &[f64], grid: &WeightedGrid) -> f64 {
    grid.inner(u, phi) / grid.inner(phi, phi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    /// Weighted L^2 norm of `L H - H`.
    pub dilation_residual: f64,
    /// Weighted L^2 norm of `L <n, e_x> - <n, e_x>/2`.
    pub translation_residual: f64,
}

pub fn check_shrinker_identities(curve: &ProfileCurve, geom: &SurfaceGeometry) -> IdentityReport {
    let grid = WeightedGrid::new(curve, geom);
    let interior = |i: usize| curve.topology != Topology::OpenEnd || (i > 0 && i + 1 < curve.len());
    let res = |f: &[f64], lam: f64| {
        let lf = grid.jacobi(f);
        compensated_sum((0..f.len()).filter(|&i| interior(i)).map(|i| grid.log_mass[i].exp() * (lf[i] - lam * f[i]).powi(2))).sqrt()
    };
    let nx: Vec<f64> = geom.normal.iter().map(|n| n[0]).collect();
    IdentityReport { dilation_residual: res(&geom.h, 1.0), translation_residual: res(&nx, 0.5) }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    /// Slope of `log |phi|` against `log |x|` on the end.
    pub loglog_slope: f64,
    pub tail_mass_5: f64,
    pub tail_mass_10: f64,
    /// Smallest `C` with tail mass `<= (C/R)^2` over the sampled radii.
    pub fitted_c: f64,
    pub pass: bool,
}

/// Weighted tail mass `sum_{|x|>R} m_i f_i^2`.
pub fn tail_mass(f: &[f64], curve: &ProfileCurve, grid: &WeightedGrid, radius: f64) -> f64 {
    compensated_sum((0..f.len()).filter(|&i| curve.point(i).norm() > radius).map(|i| grid.log_mass[i].exp() * f[i] * f[i]))
}

pub fn eigenfunction_decay_check(f: &[f64], curve: &ProfileCurve, geom: &SurfaceGeometry) -> Result<DecayReport> {
    let extent = (0..curve.len()).map(|i| curve.point(i).norm()).fold(0.0, f64::max);
    if curve.topology != Topology::OpenEnd || extent < 20.0 {
        return Err(Error::EndTooShort { need: 20.0, got: extent });
    }
    let grid = WeightedGrid::new(curve, geom);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for i in 0..f.len() {
        let d = curve.point(i).norm();
        if d >= 5.0 && d <= extent - 1.0 && f[i] != 0.0 {
            xs.push(d.ln());
            ys.push(f[i].abs().ln());
        }
    }
    if xs.len() < 3 {
        return Err(Error::EndTooShort { need: 20.0, got: extent });
    }
    let (slope, _, _) = crate::linalg::linear_fit(&xs, &ys);
    let t5 = tail_mass(f, curve, &grid, 5.0);
    let t10 = tail_mass(f, curve, &grid, 10.0);
    let fitted_c = [5.0, 7.5, 10.0, 15.0, 20.0]
        .iter()
        .map(|r| r * tail_mass(f, curve, &grid, *r).sqrt())
        .fold(0.0, f64::max);
    let pass = slope < -0.1 && t10 * 4.0 <= t5;
    Ok(DecayReport { loglog_slope: slope, tail_mass_5: t5, tail_mass_10: t10, fitted_c, pass })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EckerReport {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

/// `int f^2 |x|^2 e^{-|x|^2/4} <= 4 int (n f^2 + 4 |grad f|^2) e^{-|x|^2/4}` by quadrature.
pub fn ecker_inequality_check(f: &[f64], curve: &ProfileCurve, geom: &SurfaceGeometry) -> EckerReport {
    let grid = WeightedGrid::new(curve, geom);
    let lhs = compensated_sum((0..f.len()).map(|i| grid.log_mass[i].exp() * f[i] * f[i] * curve.point(i).norm_squared()));
    let n = curve.n_ambient as f64;
    let rhs = 4.0 * (n * grid.inner(f, f) + 4.0 * grid.dirichlet_form(f, f));
    EckerReport { lhs, rhs, pass: lhs <= rhs + 1e-10 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{compute_geometry, tests::{circle_points, semicircle_points}};
    use proptest::prelude::*;

    fn circle(n: usize) -> (ProfileCurve, SurfaceGeometry) {
        let c = ProfileCurve::from_samples(&circle_points(n, 2f64.sqrt()), Topology::ClosedLoop, 1).unwrap();
        let g = compute_geometry(&c).unwrap();
        (c, g)
    }

    fn sphere(n: usize) -> (ProfileCurve, SurfaceGeometry) {
        let c = ProfileCurve::from_samples(&semicircle_points(n, 2.0, 0.0), Topology::AxisToAxis, 2).unwrap();
        let g = compute_geometry(&c).unwrap();
        (c, g)
    }

    #[test]
    fn inertia_count_matches_dense_eigenvalues() {
        for periodic in [false, true] {
            let n = 12;
            let mut t = Tridiag::zeros(n, periodic);
            for i in 0..n {
                t.diag[i] = (i as f64 * 0.7).sin() * 3.0;
                let b = 1.0 + 0.1 * i as f64;
                t.upper[i] = b;
                t.lower[(i + 1) % n] = b;
            }
            if !periodic {
                t.lower[0] = 0.0;
                t.upper[n - 1] = 0.0;
            }
            let ev = nalgebra::SymmetricEigen::new(t.to_dense()).eigenvalues;
            for sigma in [-3.0, -1.1, 0.0, 0.4, 2.5] {
                let expect = ev.iter().filter(|v| **v < sigma).count();
                assert_eq!(count_below(&t, sigma), expect, "periodic={periodic} sigma={sigma}");
            }
        }
    }

    #[test]
    fn circle_spectrum_is_one_minus_half_k_squared() {
        let (c, g) = circle(1024);
        let res = eigen(&c, &g, 7, &EigenConfig::default()).unwrap();
        let expect = [1.0, 0.5, 0.5, -1.0, -1.0, -3.5, -3.5];
        for (a, b) in res.eigenvalues.iter().zip(expect) {
            assert!((a - b).abs() < 1e-3, "{a} vs {b}");
        }
        assert!(res.phi1().iter().all(|v| *v > 0.0));
    }

    #[test]
    fn sphere_spectrum() {
        let (c, g) = sphere(1024);
        let res = eigen(&c, &g, 9, &EigenConfig::default()).unwrap();
        let expect = [1.0, 0.5, 0.5, 0.5, -0.5, -0.5, -0.5, -0.5, -0.5];
        for (a, b) in res.eigenvalues.iter().zip(expect) {
            assert!((a - b).abs() < 1e-3, "{:?}", res.eigenvalues);
        }
        for i in 0..4 {
            for j in 0..4 {
                if res.mode_provenance[i].k == 0 && res.mode_provenance[j].k == 0 {
                    let grid = WeightedGrid::new(&c, &g);
                    let ip = grid.inner(&res.eigenfunctions[i], &res.eigenfunctions[j]);
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((ip - want).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn cutoff_beyond_surface_is_rejected() {
        let (c, g) = sphere(64);
        assert!(matches!(
            assemble(&c, &g, 0, Some(Cutoff::Ball(100.0)), Boundary::Dirichlet),
            Err(Error::CutoffBeyondSurface { .. })
        ));
        let full = eigen(&c, &g, 1, &EigenConfig::default()).unwrap().lambda1();
        let cut = dirichlet_sweep(&c, &g, &[Cutoff::Ball(2.0)], 8).unwrap()[0];
        assert!((full - cut).abs() < 1e-8);
    }

    #[test]
    fn dirichlet_caps_increase_towards_full_value() {
        let (c, g) = sphere(512);
        let l = dirichlet_sweep(&c, &g, &[Cutoff::GeodesicCap(1.0), Cutoff::GeodesicCap(1.5), Cutoff::GeodesicCap(2.0)], 8).unwrap();
        assert!(l[0] < l[1] && l[1] < l[2] && l[2] < 1.0, "{l:?}");
    }

    #[test]
    fn norms_and_projection() {
        let (c, g) = circle(256);
        let res = eigen(&c, &g, 3, &EigenConfig::default()).unwrap();
        let grid = WeightedGrid::new(&c, &g);
        let q2 = q_norm_sq(res.phi1(), &grid, 2.0);
        assert!((q2 - (2.0 - res.lambda1())).abs() < 1e-8);
        assert_eq!(q_norm(&vec![0.0; c.len()], &grid, 2.0).unwrap(), 0.0);
        assert!(project(&res.eigenfunctions[1], res.phi1(), &grid).abs() < 1e-8);
        assert!(matches!(q_norm(res.phi1(), &grid, 0.5), Err(Error::LambdaTooSmall { .. })));
    }

    #[test]
    fn identities_on_round_shrinkers() {
        let (c, g) = sphere(1024);
        let rep = check_shrinker_identities(&c, &g);
        assert!(rep.dilation_residual < 1e-4 && rep.translation_residual < 1e-4, "{rep:?}");
        let (c, g) = circle(256);
        let rep = check_shrinker_identities(&c, &g);
        assert!(rep.dilation_residual < 1e-8, "{rep:?}");
    }

    #[test]
    fn ecker_on_sphere_constant() {
        let (c, g) = sphere(512);
        let rep = ecker_inequality_check(&vec![1.0; c.len()], &c, &g);
        let f = crate::geometry::f_functional(&c, &g, None, false).unwrap();
        assert!((rep.lhs - 4.0 * f).abs() < 1e-9 * f && (rep.rhs - 8.0 * f).abs() < 1e-9 * f && rep.pass);
        assert!(matches!(eigenfunction_decay_check(&vec![1.0; c.len()], &c, &g), Err(Error::EndTooShort { .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn operator_is_weighted_symmetric(seed in 0u64..1000, k in 0u32..4) {
            let (c, g) = sphere(200);
            let sys = assemble(&c, &g, k, Some(Cutoff::GeodesicCap(4.0)), Boundary::Dirichlet).unwrap();
            let f = |i: usize, a: f64| ((i as f64 * 0.113 + a) * (seed as f64 + 1.0)).sin();
            let u: Vec<f64> = (0..c.len()).map(|i| f(i, 0.3)).collect();
            let v: Vec<f64> = (0..c.len()).map(|i| f(i, 1.7)).collect();
            let (lu, lv) = (sys.apply(&u), sys.apply(&v));
            let a = sys.grid.inner(&lu, &v);
            let b = sys.grid.inner(&u, &lv);
            let scale = (sys.grid.inner(&u, &u) * sys.grid.inner(&v, &v)).sqrt() * sys.sym.diag.iter().map(|d| d.abs()).fold(0.0, f64::max);
            prop_assert!((a - b).abs() <= 1e-10 * scale);
        }
    }
}
