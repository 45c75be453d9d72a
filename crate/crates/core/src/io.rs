//! Deterministic output formats: profile and record CSVs, JSON summaries, run manifests
//! and native SVG line plots.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{ProfileCurve, Topology};
use crate::spline::Vec2;

/// 17 significant digits, enough to round-trip every f64.
pub fn format_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "NaN".to_string()
    } else if v > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// Write a numeric table with a header row.
pub fn write_table(path: &Path, headers: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(headers).map_err(csv_err)?;
    for row in rows {
        if row.len() != headers.len() {
            return Err(Error::Invalid(format!("row of {} values for {} columns", row.len(), headers.len())));
        }
        w.write_record(row.iter().map(|v| format_f64(*v))).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Read a numeric table written by [`write_table`].
pub fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let headers = r.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let row = rec
            .iter()
            .map(|s| s.trim().parse::<f64>().map_err(|_| Error::Invalid(format!("not a number: {s:?} in {}", path.display()))))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((headers, rows))
}

pub fn write_profile_csv(path: &Path, curve: &ProfileCurve) -> Result<()> {
    write_table(path, &["x", "r"], curve.x.iter().zip(&curve.r).map(|(x, r)| vec![*x, *r]))
}

/// Wrap stored samples exactly, rejecting self-intersecting polylines.
pub fn profile_from_samples(points: &[Vec2], topology: Topology, n_ambient: u8) -> Result<ProfileCurve> {
    let curve = ProfileCurve::from_samples(points, topology, n_ambient)?;
    if let Some((i, j)) = curve.self_intersection() {
        return Err(Error::SelfIntersection(i, j));
    }
    Ok(curve)
}

pub fn read_profile_csv(path: &Path, topology: Topology, n_ambient: u8) -> Result<ProfileCurve> {
    let (headers, rows) = read_table(path)?;
    if headers.len() < 2 || headers[0] != "x" || headers[1] != "r" {
        return Err(Error::Invalid(format!("{} does not start with columns x,r", path.display())));
    }
    let pts: Vec<Vec2> = rows.iter().map(|row| Vec2::new(row[0], row[1])).collect();
    profile_from_samples(&pts, topology, n_ambient)
}

/// Profile plus the metadata needed to rebuild it, as stored in model JSON files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub kind: String,
    pub topology: Topology,
    pub n_ambient: u8,
    pub x: Vec<f64>,
    pub r: Vec<f64>,
    #[serde(default)]
    pub notes: serde_json::Value,
}

impl ModelFile {
    pub fn new(kind: &str, curve: &ProfileCurve, notes: serde_json::Value) -> Self {
        Self { kind: kind.to_string(), topology: curve.topology, n_ambient: curve.n_ambient, x: curve.x.clone(), r: curve.r.clone(), notes }
    }

    pub fn curve(&self) -> Result<ProfileCurve> {
        if self.x.len() != self.r.len() {
            return Err(Error::Invalid("x and r lengths differ".into()));
        }
        let pts: Vec<Vec2> = self.x.iter().zip(&self.r).map(|(x, r)| Vec2::new(*x, *r)).collect();
        profile_from_samples(&pts, self.topology, self.n_ambient)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Invalid(format!("cannot read model {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Invalid(format!("bad model {}: {e}", path.display())))
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// SHA-256 of the compact JSON with object keys sorted at every level.
pub fn config_hash(config: &serde_json::Value) -> String {
    fn canonical(v: &serde_json::Value, out: &mut String) {
        match v {
            serde_json::Value::Object(map) => {
                let mut keys: Vec<&String> = map.keys().collect();
                keys.sort();
                out.push('{');
                for (i, k) in keys.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    out.push_str(&serde_json::Value::String((*k).clone()).to_string());
                    out.push(':');
                    canonical(&map[*k], out);
                }
                out.push('}');
            }
            serde_json::Value::Array(items) => {
                out.push('[');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    canonical(item, out);
                }
                out.push(']');
            }
            other => out.push_str(&other.to_string()),
        }
    }
    let mut s = String::new();
    canonical(config, &mut s);
    hex::encode(Sha256::digest(s.as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub command: String,
    pub config_hash: String,
    pub tool_version: String,
    pub seeds: Vec<u64>,
    /// Seconds since the Unix epoch.
    pub started: f64,
    pub stopped: Option<f64>,
    pub stop_reason: String,
    /// Paths relative to the output directory.
    pub outputs: Vec<String>,
}

fn now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

pub const MANIFEST_NAME: &str = "manifest.json";

/// A manifest on disk that is rewritten as the run progresses.
#[derive(Debug)]
pub struct RunManifest {
    pub dir: PathBuf,
    pub manifest: ExperimentManifest,
}

impl RunManifest {
    /// Create the output directory and write a `running` manifest before any data.
    pub fn start(dir: &Path, command: &str, config: &serde_json::Value, seeds: Vec<u64>) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        let manifest = ExperimentManifest {
            command: command.to_string(),
            config_hash: config_hash(config),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seeds,
            started: now(),
            stopped: None,
            stop_reason: "running".to_string(),
            outputs: Vec::new(),
        };
        let run = Self { dir: dir.to_path_buf(), manifest };
        run.save()?;
        Ok(run)
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Record an output file that has been written.
    pub fn add_output(&mut self, name: &str) -> Result<()> {
        if !self.manifest.outputs.iter().any(|o| o == name) {
            self.manifest.outputs.push(name.to_string());
        }
        self.save()
    }

    pub fn finish(mut self, stop_reason: &str) -> Result<ExperimentManifest> {
        self.manifest.stopped = Some(now());
        self.manifest.stop_reason = stop_reason.to_string();
        self.save()?;
        Ok(self.manifest)
    }

    fn save(&self) -> Result<()> {
        write_json(&self.dir.join(MANIFEST_NAME), &self.manifest)
    }
}

/// Output files listed in the manifest that do not exist.
pub fn missing_outputs(dir: &Path, manifest: &ExperimentManifest) -> Vec<String> {
    manifest.outputs.iter().filter(|o| !dir.join(o).exists()).cloned().collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(label: &str, points: Vec<(f64, f64)>) -> Self {
        Self { label: label.to_string(), points }
    }
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn nice_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = hi - lo;
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-9 * step {
        out.push(if t.abs() < 1e-12 * step { 0.0 } else { t });
        t += step;
    }
    out
}

/// A line plot as a standalone SVG document. Non-finite points are skipped.
pub fn svg_line_plot(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let (w, h) = (640.0, 420.0);
    let (left, right, top, bottom) = (70.0, 20.0, 40.0, 50.0);
    let finite = series.iter().flat_map(|s| s.points.iter()).filter(|(x, y)| x.is_finite() && y.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in finite {
        x0 = x0.min(*x);
        x1 = x1.max(*x);
        y0 = y0.min(*y);
        y1 = y1.max(*y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 <= 0.0 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if y1 - y0 <= 1e-300 {
        let pad = if y0 == 0.0 { 1.0 } else { 0.05 * y0.abs() };
        y0 -= pad;
        y1 += pad;
    }
    let pw = w - left - right;
    let ph = h - top - bottom;
    let sx = |x: f64| left + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| top + (y1 - y) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, escape(title));
    for t in nice_ticks(x0, x1) {
        let x = sx(t);
        let _ = writeln!(s, r##"<line x1="{x:.2}" y1="{top}" x2="{x:.2}" y2="{:.2}" stroke="#e0e0e0"/>"##, top + ph);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, top + ph + 16.0, tick_label(t));
    }
    for t in nice_ticks(y0, y1) {
        let y = sy(t);
        let _ = writeln!(s, r##"<line x1="{left}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#e0e0e0"/>"##, left + pw);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, left - 6.0, y + 4.0, tick_label(t));
    }
    let _ = writeln!(s, r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, left + pw / 2.0, h - 10.0, escape(x_label));
    let _ = writeln!(s, r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#, top + ph / 2.0, top + ph / 2.0, escape(y_label));
    for (k, ser) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        // split at non-finite points
        let mut runs: Vec<Vec<(f64, f64)>> = vec![Vec::new()];
        for &(x, y) in &ser.points {
            if x.is_finite() && y.is_finite() {
                runs.last_mut().unwrap().push((x, y));
            } else if !runs.last().unwrap().is_empty() {
                runs.push(Vec::new());
            }
        }
        for run in runs.iter().filter(|r| !r.is_empty()) {
            let pts: Vec<String> = run.iter().map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y))).collect();
            let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, pts.join(" "));
        }
        let ly = top + 14.0 + 16.0 * k as f64;
        let lx = left + pw - 150.0;
        let _ = writeln!(s, r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#, lx + 20.0);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, lx + 26.0, ly + 4.0, escape(&ser.label));
    }
    s.push_str("</svg>\n");
    s
}

fn tick_label(t: f64) -> String {
    if t != 0.0 && (t.abs() >= 1e4 || t.abs() < 1e-3) {
        format!("{t:.1e}")
    } else {
        let s = format!("{t:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shrinkers::round_sphere;
    use proptest::prelude::*;

    #[test]
    fn profile_csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sphere.csv");
        let c = round_sphere(2.0, 65).unwrap();
        write_profile_csv(&p, &c).unwrap();
        let back = read_profile_csv(&p, Topology::AxisToAxis, 2).unwrap();
        assert_eq!(back.x, c.x);
        assert_eq!(back.r, c.r);
    }

    #[test]
    fn manifest_lifecycle() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = serde_json::json!({"dt": 0.001, "kind": "sphere"});
        let mut run = RunManifest::start(dir.path(), "flow run", &cfg, vec![7]).unwrap();
        let on_disk: ExperimentManifest = serde_json::from_str(&std::fs::read_to_string(dir.path().join(MANIFEST_NAME)).unwrap()).unwrap();
        assert_eq!(on_disk.stop_reason, "running");
        std::fs::write(run.path("a.csv"), "x\n").unwrap();
        run.add_output("a.csv").unwrap();
        let m = run.finish("completed").unwrap();
        assert!(missing_outputs(dir.path(), &m).is_empty());
        assert!(m.stopped.unwrap() >= m.started);
    }

    #[test]
    fn svg_skips_non_finite() {
        let svg = svg_line_plot("t", "x", "y", &[Series::new("a", vec![(0.0, 1.0), (1.0, f64::NAN), (2.0, 3.0), (3.0, 4.0)])]);
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(!svg.contains("NaN"));
    }

    proptest! {
        #[test]
        fn float_format_round_trips(v in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            prop_assert_eq!(format_f64(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }

        #[test]
        fn hash_ignores_key_order(a in -1e6f64..1e6, b in 0u64..1000, name in "[a-z]{1,8}") {
            let one: serde_json::Value = serde_json::from_str(&format!(r#"{{"a": {a}, "n": {{"b": {b}, "name": "{name}"}}}}"#)).unwrap();
            let two: serde_json::Value = serde_json::from_str(&format!(r#"{{"n": {{"name": "{name}", "b": {b}}}, "a": {a}}}"#)).unwrap();
            prop_assert_eq!(config_hash(&one), config_hash(&two));
        }
    }
}
