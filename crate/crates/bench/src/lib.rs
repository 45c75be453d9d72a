//! Shared fixtures for the kernel benchmarks.

use shrinker_lab_core::shrinkers::{round_sphere, shoot_angenent_torus, ShootingConfig};
use shrinker_lab_core::ProfileCurve;

pub fn sphere(samples: usize) -> ProfileCurve {
    round_sphere(2.0, samples).expect("sphere profile")
}

pub fn torus(samples: usize) -> ProfileCurve {
    shoot_angenent_torus(&ShootingConfig { samples, ..Default::default() }).expect("torus shooting").profile
}
