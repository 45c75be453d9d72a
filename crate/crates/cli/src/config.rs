use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use shrinker_lab_core::dynamics::{normal_displacement, ConvergingBaseConfig, SignClass, TwoCaseConfig};
use shrinker_lab_core::flow::FieldBoundary;
use shrinker_lab_core::geometry::compute_geometry;
use shrinker_lab_core::io::ModelFile;
use shrinker_lab_core::shrinkers::{exact_shrinker, shoot_angenent_torus, shoot_conical_end, ShootingConfig};
use shrinker_lab_core::spectral::{eigen, EigenConfig};
use shrinker_lab_core::{Error, FlowConfig, ProfileCurve, Result, ShrinkerKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Circle,
    Sphere,
    Cylinder,
    Torus,
    Conical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShrinkerSpec {
    pub kind: Kind,
    pub samples: Option<usize>,
    pub cone_slope: Option<f64>,
    /// `[X0, X1]` for conical ends.
    pub x_range: Option<[f64; 2]>,
}

pub fn build_shrinker(spec: &ShrinkerSpec) -> Result<(ShrinkerKind, ProfileCurve, f64)> {
    if spec.samples.is_some_and(|n| n < 16) {
        return Err(Error::Invalid("at least 16 samples are needed".into()));
    }
    if spec.cone_slope.is_some() && spec.kind != Kind::Conical {
        return Err(Error::Invalid("--cone-slope only applies to conical ends".into()));
    }
    let model = match spec.kind {
        Kind::Circle => exact_shrinker(ShrinkerKind::Circle, spec.samples.unwrap_or(256), None)?,
        Kind::Sphere => exact_shrinker(ShrinkerKind::Sphere, spec.samples.unwrap_or(257), None)?,
        Kind::Cylinder => exact_shrinker(ShrinkerKind::Cylinder, spec.samples.unwrap_or(257), None)?,
        Kind::Torus => shoot_angenent_torus(&ShootingConfig { samples: spec.samples.unwrap_or(512), ..Default::default() })?,
        Kind::Conical => {
            let a = spec.cone_slope.unwrap_or(0.5);
            let [x0, x1] = spec.x_range.unwrap_or([2.0, 40.0]);
            let cfg = ShootingConfig { max_arclength: 3.0 * (x1 - x0).abs() + 20.0, ..Default::default() };
            let model = shoot_conical_end(a, (x0, x1), &cfg)?;
            match spec.samples {
                Some(n) => shrinker_lab_core::shrinkers::ShrinkerModel { profile: model.profile.resample(n)?, ..model },
                None => model,
            }
        }
    };
    Ok((model.kind, model.profile, model.residual))
}

/// A surface given either by a shrinker recipe or a model file, optionally bumped along its normal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceSpec {
    #[serde(flatten)]
    pub source: SurfaceSource,
    pub bump: Option<Bump>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SurfaceSource {
    Model { model: PathBuf },
    Shrinker(ShrinkerSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bump {
    pub shape: Shape,
    pub amplitude: f64,
}

/// Node function on a profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Shape {
    Constant,
    /// `x / max|x|`.
    Axial,
    /// Second Legendre polynomial of `x / max|x|`.
    Quadratic,
    /// Axially symmetric eigenfunction of the Jacobi operator, counted from the top.
    Eigen(usize),
    Values(Vec<f64>),
}

impl Shape {
    pub fn evaluate(&self, curve: &ProfileCurve) -> Result<Vec<f64>> {
        let ext = curve.x.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
        Ok(match self {
            Shape::Constant => vec![1.0; curve.len()],
            Shape::Axial => curve.x.iter().map(|x| x / ext).collect(),
            Shape::Quadratic => curve.x.iter().map(|x| 0.5 * (3.0 * (x / ext).powi(2) - 1.0)).collect(),
            Shape::Eigen(k) => {
                let g = compute_geometry(curve)?;
                let res = eigen(curve, &g, k + 1, &EigenConfig { k_max: 0, ..Default::default() })?;
                res.eigenfunctions.get(*k).cloned().ok_or_else(|| Error::Invalid(format!("only {} axial modes available", res.eigenfunctions.len())))?
            }
            Shape::Values(v) => {
                if v.len() != curve.len() {
                    return Err(Error::Invalid(format!("{} values for {} nodes", v.len(), curve.len())));
                }
                v.clone()
            }
        })
    }
}

impl SurfaceSpec {
    /// The unbumped surface.
    pub fn base(&self, root: &Path) -> Result<ProfileCurve> {
        match &self.source {
            SurfaceSource::Model { model } => ModelFile::load(&root.join(model))?.curve(),
            SurfaceSource::Shrinker(spec) => Ok(build_shrinker(spec)?.1),
        }
    }

    pub fn build(&self, root: &Path) -> Result<ProfileCurve> {
        let base = self.base(root)?;
        match &self.bump {
            None => Ok(base),
            Some(b) => {
                let u: Vec<f64> = b.shape.evaluate(&base)?.iter().map(|v| b.amplitude * v).collect();
                normal_displacement(&base, &u)
            }
        }
    }
}

fn default_output_every() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowRunConfig {
    pub surface: SurfaceSpec,
    pub t_end: f64,
    #[serde(default = "default_output_every")]
    pub output_every: f64,
    #[serde(default)]
    pub flow: FlowConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FkSolveConfig {
    pub surface: SurfaceSpec,
    pub data: Shape,
    /// Profile node where the solution is evaluated.
    pub node: usize,
    pub t: f64,
    #[serde(default = "default_paths")]
    pub n_paths: usize,
    #[serde(default = "default_path_dt")]
    pub dt: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_true")]
    pub potential: bool,
    pub dirichlet_radius: Option<f64>,
}

fn default_paths() -> usize {
    10_000
}
fn default_path_dt() -> f64 {
    1e-3
}
fn default_seed() -> u64 {
    0x5eed
}
fn default_true() -> bool {
    true
}

impl FkSolveConfig {
    pub fn boundary(&self) -> FieldBoundary {
        self.dirichlet_radius.map_or(FieldBoundary::None, FieldBoundary::Dirichlet)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum BaseSpec {
    /// The shrinker itself.
    Static,
    /// A flow manufactured to converge to the shrinker along a stable mode.
    Converging(ConvergingBaseConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbRunConfig {
    pub shrinker: ShrinkerSpec,
    #[serde(default = "default_base")]
    pub base: BaseSpec,
    pub shape: Shape,
    #[serde(default = "default_sign")]
    pub sign_class: SignClass,
    pub amplitudes: Vec<f64>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_max_time")]
    pub max_time: f64,
    #[serde(default = "default_record_every")]
    pub record_every: f64,
    #[serde(default = "default_inner_radius")]
    pub inner_radius: f64,
    #[serde(default)]
    pub flow: FlowConfig,
    #[serde(default = "default_modes")]
    pub modes: usize,
    /// Also classify the shape by its growth rate under the static linear flow.
    pub two_case: Option<TwoCaseConfig>,
}

fn default_base() -> BaseSpec {
    BaseSpec::Static
}
fn default_sign() -> SignClass {
    SignClass::Positive
}
fn default_delta() -> f64 {
    0.05
}
fn default_max_time() -> f64 {
    8.0
}
fn default_record_every() -> f64 {
    0.05
}
fn default_inner_radius() -> f64 {
    5.0
}
fn default_modes() -> usize {
    6
}

/// Parse a TOML or JSON (by extension) config into the raw value used for hashing and the typed form.
pub fn load<T: DeserializeOwned>(path: &Path) -> Result<(serde_json::Value, T)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Invalid(format!("cannot read config {}: {e}", path.display())))?;
    let value: serde_json::Value = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| Error::Invalid(format!("bad JSON in {}: {e}", path.display())))?
    } else {
        toml::from_str(&text).map_err(|e| Error::Invalid(format!("bad TOML in {}: {e}", path.display())))?
    };
    let typed = serde_json::from_value(value.clone()).map_err(|e| Error::Invalid(format!("bad config {}: {e}", path.display())))?;
    Ok((value, typed))
}
