//! Numerical laboratory for rescaled mean curvature flow near self-shrinkers.
//!
//! Everything is rotationally symmetric: surfaces in R^3 are described by a profile
//! curve in the half-plane `(x, r)`, and curves in R^2 by the curve itself.

pub mod dynamics;
pub mod error;
pub mod feynman_kac;
pub mod geometry;
pub mod io;
pub mod linalg;
pub mod optim;
pub mod shrinkers;
pub mod spectral;
pub mod flow;
pub mod spline;

pub use dynamics::{ConeNorm, ConeState, ExitStatus, PerturbationConfig, PerturbationOutcome, ShrinkerReference, SignClass};
pub use error::{Error, Result};
pub use feynman_kac::{FkBase, FkConfig, FkEstimate};
pub use flow::{FlowConfig, FlowRunner, FlowState, GraphicalConfig};
pub use geometry::{ProfileCurve, RigidMotionDilation, SurfaceGeometry, Topology};
pub use io::ExperimentManifest;
pub use shrinkers::{ShrinkerKind, ShrinkerModel};
pub use spectral::{Boundary, Cutoff, EigenConfig, SpectralResult};
pub use spline::Vec2;
