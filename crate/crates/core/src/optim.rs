//! Derivative-free local maximization and adaptive ODE integration.

/// Nelder-Mead maximization of `f` from `start` with initial simplex edge `step`.
/// Stops when the spread of objective values over the simplex drops below `tol`.
/// Returns the best point and its value.
pub fn nelder_mead_max<F>(mut f: F, start: &[f64], step: &[f64], tol: f64, max_evals: usize) -> (Vec<f64>, f64)
where
    F: FnMut(&[f64]) -> f64,
{
    let d = start.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(d + 1);
    let v0 = f(start);
    simplex.push((start.to_vec(), v0));
    for k in 0..d {
        let mut p = start.to_vec();
        p[k] += step[k];
        let v = f(&p);
        simplex.push((p, v));
    }
    let mut evals = d + 1;
    // minimize -f
    let neg = |v: f64| if v.is_nan() { f64::INFINITY } else { -v };
    while evals < max_evals {
        simplex.sort_by(|a, b| neg(a.1).partial_cmp(&neg(b.1)).unwrap());
        let spread = neg(simplex[d].1) - neg(simplex[0].1);
        if spread.abs() <= tol {
            let size: f64 = simplex[1..]
                .iter()
                .map(|(p, _)| p.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
                .fold(0.0, f64::max);
            if size <= tol.sqrt() {
                break;
            }
        }
        let centroid: Vec<f64> = (0..d).map(|k| simplex[..d].iter().map(|(p, _)| p[k]).sum::<f64>() / d as f64).collect();
        let worst = simplex[d].clone();
        let along = |t: f64| -> Vec<f64> { (0..d).map(|k| centroid[k] + t * (worst.0[k] - centroid[k])).collect() };
        let xr = along(-1.0);
        let fr = f(&xr);
        evals += 1;
        if neg(fr) < neg(simplex[0].1) {
            let xe = along(-2.0);
            let fe = f(&xe);
            evals += 1;
            simplex[d] = if neg(fe) < neg(fr) { (xe, fe) } else { (xr, fr) };
        } else if neg(fr) < neg(simplex[d - 1].1) {
            simplex[d] = (xr, fr);
        } else {
            let (xc, fc) = if neg(fr) < neg(worst.1) {
                let x = along(-0.5);
                let v = f(&x);
                (x, v)
            } else {
                let x = along(0.5);
                let v = f(&x);
                (x, v)
            };
            evals += 1;
            if neg(fc) < neg(worst.1).min(neg(fr)) {
                simplex[d] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for item in simplex.iter_mut().skip(1) {
                    let p: Vec<f64> = (0..d).map(|k| best[k] + 0.5 * (item.0[k] - best[k])).collect();
                    let v = f(&p);
                    *item = (p, v);
                }
                evals += d;
            }
        }
    }
    simplex.sort_by(|a, b| neg(a.1).partial_cmp(&neg(b.1)).unwrap());
    simplex.swap_remove(0)
}

/// Outcome of one adaptive integration segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OdeStop {
    Reached,
    Event,
    Failed,
}

// Dormand-Prince 5(4) tableau
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Adaptive Dormand-Prince integrator for `y' = f(t, y)` with three state components.
#[derive(Debug, Clone)]
pub struct Dopri {
    pub rtol: f64,
    pub atol: f64,
    pub h: f64,
    pub h_max: f64,
}

pub type State3 = [f64; 3];

impl Dopri {
    pub fn new(tol: f64, h0: f64, h_max: f64) -> Self {
        Self { rtol: tol, atol: tol, h: h0, h_max }
    }

    fn step<F: Fn(f64, &State3) -> State3>(&self, f: &F, t: f64, y: &State3, h: f64) -> (State3, f64) {
        let mut k = [[0.0; 3]; 7];
        for s in 0..7 {
            let mut ys = *y;
            for (j, kj) in k.iter().enumerate().take(s) {
                for c in 0..3 {
                    ys[c] += h * A[s][j] * kj[c];
                }
            }
            k[s] = f(t + C[s] * h, &ys);
        }
        let mut out = *y;
        let mut err = 0.0f64;
        for c in 0..3 {
            let mut inc = 0.0;
            let mut e = 0.0;
            for s in 0..7 {
                inc += B[s] * k[s][c];
                e += E[s] * k[s][c];
            }
            out[c] += h * inc;
            let sc = self.atol + self.rtol * y[c].abs().max(out[c].abs());
            err = err.max((h * e / sc).abs());
        }
        (out, err)
    }

    /// Integrate from `t` to `t_end`, stopping early when `event(t, y)` returns true
    /// (the step is then bisected so the event is located to within `1e-14`).
    pub fn integrate<F, G>(&mut self, f: &F, t: &mut f64, y: &mut State3, t_end: f64, event: &G) -> OdeStop
    where
        F: Fn(f64, &State3) -> State3,
        G: Fn(f64, &State3) -> bool,
    {
        let mut guard = 0usize;
        while *t < t_end {
            guard += 1;
            if guard > 10_000_000 {
                return OdeStop::Failed;
            }
            let h = self.h.min(self.h_max).min(t_end - *t);
            let (next, err) = self.step(f, *t, y, h);
            if !err.is_finite() || next.iter().any(|v| !v.is_finite()) {
                self.h *= 0.25;
                if self.h < 1e-14 {
                    return OdeStop::Failed;
                }
                continue;
            }
            if err <= 1.0 {
                if event(*t + h, &next) {
                    // locate the event by bisection on the step length
                    let (mut lo, mut hi) = (0.0, h);
                    while hi - lo > 1e-14 {
                        let mid = 0.5 * (lo + hi);
                        let (ym, _) = self.step(f, *t, y, mid);
                        if event(*t + mid, &ym) {
                            hi = mid;
                        } else {
                            lo = mid;
                        }
                    }
                    let (yh, _) = self.step(f, *t, y, hi);
                    *t += hi;
                    *y = yh;
                    return OdeStop::Event;
                }
                *t += h;
                *y = next;
                let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                if h >= self.h.min(self.h_max) * 0.999 {
                    self.h = (h * fac).min(self.h_max);
                }
            } else {
                self.h = h * (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
                if self.h < 1e-14 {
                    return OdeStop::Failed;
                }
            }
        }
        OdeStop::Reached
    }
}
