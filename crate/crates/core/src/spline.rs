//! Chord-length parametrized cubic splines through profile samples.
//!
//! Used for arclength resampling, nearest-point projection of Monte Carlo paths,
//! and normal-line intersection when one profile is written as a graph over another.

use nalgebra::Vector2;

use crate::linalg::Tridiag;

pub type Vec2 = Vector2<f64>;

/// End treatment for a spline through an ordered list of samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplineEnds {
    /// Closed curve: the last sample connects back to the first.
    Periodic,
    /// Natural end conditions (zero second derivative).
    Natural,
    /// Both ends lie on the symmetry axis `r = 0`; ghost samples mirrored across the
    /// axis give the spline the even symmetry of a smooth surface of revolution.
    AxisMirror,
}

const GHOSTS: usize = 10;

#[derive(Debug, Clone)]
pub struct CurveSpline {
    knots: Vec<f64>,
    pts: Vec<Vec2>,
    m: Vec<Vec2>,
    periodic: bool,
    /// Index of the first real sample inside `pts` (nonzero for mirrored ghosts).
    offset: usize,
    n_real: usize,
}

fn solve_second_derivs(knots: &[f64], ys: &[f64], periodic: bool) -> Vec<f64> {
    let n = ys.len();
    if periodic {
        let mut t = Tridiag::zeros(n, true);
        let mut rhs = vec![0.0; n];
        for i in 0..n {
            let hp = knots[i + 1] - knots[i];
            let hm = if i == 0 { knots[n] - knots[n - 1] } else { knots[i] - knots[i - 1] };
            let yp = ys[(i + 1) % n];
            let ym = ys[(i + n - 1) % n];
            t.lower[i] = hm;
            t.diag[i] = 2.0 * (hm + hp);
            t.upper[i] = hp;
            rhs[i] = 6.0 * ((yp - ys[i]) / hp - (ys[i] - ym) / hm);
        }
        t.solve(&rhs).expect("periodic spline system is diagonally dominant")
    } else {
        let mut t = Tridiag::zeros(n, false);
        let mut rhs = vec![0.0; n];
        t.diag[0] = 1.0;
        t.diag[n - 1] = 1.0;
        for i in 1..n - 1 {
            let hm = knots[i] - knots[i - 1];
            let hp = knots[i + 1] - knots[i];
            t.lower[i] = hm;
            t.diag[i] = 2.0 * (hm + hp);
            t.upper[i] = hp;
            rhs[i] = 6.0 * ((ys[i + 1] - ys[i]) / hp - (ys[i] - ys[i - 1]) / hm);
        }
        t.solve(&rhs).expect("natural spline system is diagonally dominant")
    }
}

// 5-point Gauss-Legendre on [0, 1]
const GL_X: [f64; 5] = [
    0.046_910_077_030_668_0,
    0.230_765_344_947_158_5,
    0.5,
    0.769_234_655_052_841_5,
    0.953_089_922_969_332_0,
];
const GL_W: [f64; 5] = [
    0.118_463_442_528_094_5,
    0.239_314_335_249_683_2,
    0.284_444_444_444_444_4,
    0.239_314_335_249_683_2,
    0.118_463_442_528_094_5,
];

impl CurveSpline {
    pub fn new(samples: &[Vec2], ends: SplineEnds) -> Self {
        let n_real = samples.len();
        assert!(n_real >= 3, "spline needs at least three samples");
        let (pts, offset, periodic) = match ends {
            SplineEnds::Periodic => (samples.to_vec(), 0, true),
            SplineEnds::Natural => (samples.to_vec(), 0, false),
            SplineEnds::AxisMirror => {
                let g = GHOSTS.min(n_real - 1);
                let mirror = |p: &Vec2| Vec2::new(p.x, -p.y);
                let mut v: Vec<Vec2> = (1..=g).rev().map(|i| mirror(&samples[i])).collect();
                v.extend_from_slice(samples);
                v.extend((1..=g).map(|i| mirror(&samples[n_real - 1 - i])));
                (v, g, false)
            }
        };
        let n = pts.len();
        let segs = if periodic { n } else { n - 1 };
        let mut knots = Vec::with_capacity(segs + 1);
        knots.push(0.0);
        for j in 0..segs {
            let d = (pts[(j + 1) % n] - pts[j]).norm();
            knots.push(knots[j] + d.max(1e-300));
        }
        let xs: Vec<f64> = pts.iter().map(|p| p.x).collect();
        let ys: Vec<f64> = pts.iter().map(|p| p.y).collect();
        let mx = solve_second_derivs(&knots, &xs, periodic);
        let my = solve_second_derivs(&knots, &ys, periodic);
        let m = mx.into_iter().zip(my).map(|(a, b)| Vec2::new(a, b)).collect();
        Self { knots, pts, m, periodic, offset, n_real }
    }

    /// Parameter range covering the real samples.
    pub fn param_range(&self) -> (f64, f64) {
        if self.periodic {
            (0.0, self.knots[self.knots.len() - 1])
        } else {
            (self.knots[self.offset], self.knots[self.offset + self.n_real - 1])
        }
    }

    /// Parameter of real sample `i`.
    pub fn knot(&self, i: usize) -> f64 {
        self.knots[self.offset + i]
    }

    pub fn is_periodic(&self) -> bool {
        self.periodic
    }

    fn wrap(&self, s: f64) -> f64 {
        if self.periodic {
            let total = self.knots[self.knots.len() - 1];
            s.rem_euclid(total)
        } else {
            s
        }
    }

    fn segment(&self, s: f64) -> usize {
        let segs = self.knots.len() - 1;
        match self.knots.binary_search_by(|k| k.partial_cmp(&s).unwrap()) {
            Ok(i) => i.min(segs - 1),
            Err(i) => i.saturating_sub(1).min(segs - 1),
        }
    }

    fn seg_data(&self, j: usize) -> (f64, f64, Vec2, Vec2, Vec2, Vec2) {
        let n = self.pts.len();
        let k = (j + 1) % n;
        (self.knots[j], self.knots[j + 1] - self.knots[j], self.pts[j], self.pts[k], self.m[j], self.m[k])
    }

    /// Position, first and second parameter derivatives at `s`.
    pub fn eval_all(&self, s: f64) -> (Vec2, Vec2, Vec2) {
        let s = self.wrap(s);
        let j = self.segment(s);
        let (t0, h, y0, y1, m0, m1) = self.seg_data(j);
        let u = s - t0;
        let slope = (y1 - y0) / h - (2.0 * m0 + m1) * (h / 6.0);
        let p = y0 + slope * u + m0 * (u * u / 2.0) + (m1 - m0) * (u * u * u / (6.0 * h));
        let d1 = slope + m0 * u + (m1 - m0) * (u * u / (2.0 * h));
        let d2 = m0 + (m1 - m0) * (u / h);
        (p, d1, d2)
    }

    pub fn eval(&self, s: f64) -> Vec2 {
        self.eval_all(s).0
    }

    /// Unit tangent at parameter `s`.
    pub fn tangent(&self, s: f64) -> Vec2 {
        let d = self.eval_all(s).1;
        d / d.norm()
    }

    /// Arc length of the spline between knots `j` and `j+1` of the internal list.
    fn segment_length(&self, j: usize) -> f64 {
        let (t0, h, ..) = self.seg_data(j);
        GL_X.iter().zip(GL_W).map(|(x, w)| w * h * self.eval_all(t0 + x * h).1.norm()).sum()
    }

    /// Cumulative arc length at each real sample (and the closing length for loops).
    pub fn cumulative_arclength(&self) -> Vec<f64> {
        let segs = if self.periodic { self.n_real } else { self.n_real - 1 };
        let mut acc = Vec::with_capacity(segs + 1);
        acc.push(0.0);
        for j in 0..segs {
            acc.push(acc[j] + self.segment_length(self.offset + j));
        }
        acc
    }

    /// Parameter at which the arc length measured from the first real sample equals `target`.
    pub fn param_at_arclength(&self, cumulative: &[f64], target: f64) -> f64 {
        let segs = cumulative.len() - 1;
        let jj = match cumulative.binary_search_by(|c| c.partial_cmp(&target).unwrap()) {
            Ok(i) => return self.knot_param(i),
            Err(i) => i.saturating_sub(1).min(segs - 1),
        };
        let j = self.offset + jj;
        let (t0, h, ..) = self.seg_data(j);
        let seg_len = cumulative[jj + 1] - cumulative[jj];
        let want = target - cumulative[jj];
        let mut u = h * want / seg_len;
        for _ in 0..30 {
            let len = self.partial_length(t0, u);
            let speed = self.eval_all(t0 + u).1.norm();
            let du = (len - want) / speed;
            u = (u - du).clamp(0.0, h);
            if du.abs() < 1e-15 * h.max(1.0) {
                break;
            }
        }
        t0 + u
    }

    fn knot_param(&self, i: usize) -> f64 {
        if self.periodic && i == self.n_real {
            self.knots[self.knots.len() - 1]
        } else {
            self.knots[self.offset + i]
        }
    }

    fn partial_length(&self, t0: f64, u: f64) -> f64 {
        GL_X.iter().zip(GL_W).map(|(x, w)| w * u * self.eval_all(t0 + x * u).1.norm()).sum()
    }

    /// Index of the real segment containing parameter `s`.
    pub fn real_segment(&self, s: f64) -> usize {
        let s = self.wrap(s);
        let j = self.segment(s);
        j.saturating_sub(self.offset).min(self.n_real.saturating_sub(if self.periodic { 1 } else { 2 }))
    }

    fn real_segments(&self) -> usize {
        if self.periodic {
            self.n_real
        } else {
            self.n_real - 1
        }
    }

    /// Nearest point on the spline to `q`, searching real segments within `window`
    /// of `hint`. Returns `(param, distance)`.
    pub fn closest_param(&self, q: Vec2, hint: usize, window: usize) -> (f64, f64) {
        let segs = self.real_segments();
        let mut best = (0.0, f64::INFINITY);
        let (from, to) = if window >= segs { (0isize, segs as isize - 1) } else { (hint as isize - window as isize, hint as isize + window as isize) };
        for j in from..=to {
            let jr = if self.periodic {
                j.rem_euclid(segs as isize) as usize
            } else if j >= 0 && (j as usize) < segs {
                j as usize
            } else {
                continue;
            };
            let j = self.offset + jr;
            let (t0, h, y0, y1, ..) = self.seg_data(j);
            let e = y1 - y0;
            let u = ((q - y0).dot(&e) / e.norm_squared()).clamp(0.0, 1.0);
            let d = (y0 + e * u - q).norm();
            if d < best.1 {
                best = (t0 + u * h, d);
            }
        }
        let (lo, hi) = self.param_range();
        let mut s = best.0;
        for _ in 0..8 {
            let (p, d1, d2) = self.eval_all(s);
            let g = (p - q).dot(&d1);
            let gp = d1.norm_squared() + (p - q).dot(&d2);
            if gp <= 0.0 {
                break;
            }
            let step = g / gp;
            let mut next = s - step;
            if !self.periodic {
                next = next.clamp(lo, hi);
            }
            let done = (next - s).abs() < 1e-15 * (1.0 + s.abs());
            s = next;
            if done {
                break;
            }
        }
        if self.periodic {
            s = self.wrap(s);
        }
        (s, (self.eval(s) - q).norm())
    }

    /// Intersections of the line `origin + t * dir` with the spline, restricted to real
    /// segments within `window` of `hint` (all segments when `window` is large).
    /// Returns `(t, param)` pairs.
    pub fn line_intersections(&self, origin: Vec2, dir: Vec2, hint: usize, window: usize) -> Vec<(f64, f64)> {
        let segs = self.real_segments();
        let cross = |a: Vec2, b: Vec2| a.x * b.y - a.y * b.x;
        let mut out = Vec::new();
        let iter: Box<dyn Iterator<Item = usize>> = if window >= segs {
            Box::new(0..segs)
        } else {
            let w = window as isize;
            let periodic = self.periodic;
            Box::new((-w..=w).filter_map(move |d| {
                let j = hint as isize + d;
                if periodic {
                    Some(j.rem_euclid(segs as isize) as usize)
                } else if j >= 0 && (j as usize) < segs {
                    Some(j as usize)
                } else {
                    None
                }
            }))
        };
        for jr in iter {
            let j = self.offset + jr;
            let (t0, h, y0, y1, ..) = self.seg_data(j);
            let f0 = cross(y0 - origin, dir);
            let f1 = cross(y1 - origin, dir);
            if f0 == 0.0 {
                out.push(((y0 - origin).dot(&dir), t0));
                continue;
            }
            if f0 * f1 > 0.0 || f1 == 0.0 {
                continue;
            }
            // safeguarded Newton on the spline segment
            let (mut a, mut b) = (0.0, h);
            let mut u = h * f0 / (f0 - f1);
            for _ in 0..50 {
                let (p, d1, _) = self.eval_all(t0 + u);
                let f = cross(p - origin, dir);
                if f == 0.0 {
                    break;
                }
                if f * f0 > 0.0 {
                    a = u;
                } else {
                    b = u;
                }
                let fp = cross(d1, dir);
                let mut next = u - f / fp;
                if !(next > a && next < b) || !next.is_finite() {
                    next = 0.5 * (a + b);
                }
                if (next - u).abs() < 1e-16 * h.max(1.0) || (b - a) < 1e-15 * h {
                    u = next;
                    break;
                }
                u = next;
            }
            let s = t0 + u;
            out.push(((self.eval(s) - origin).dot(&dir), s));
        }
        out
    }
}
