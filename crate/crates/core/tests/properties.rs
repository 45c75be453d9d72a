use proptest::prelude::*;

use shrinker_lab_core::dynamics::*;
use shrinker_lab_core::feynman_kac::{fk_solve, FkBase, FkConfig};
use shrinker_lab_core::flow::*;
use shrinker_lab_core::geometry::compute_geometry;
use shrinker_lab_core::io::{read_profile_csv, write_profile_csv, ModelFile};
use shrinker_lab_core::shrinkers::{round_circle, round_sphere};
use shrinker_lab_core::spectral::{ecker_inequality_check, l2w_norm, WeightedGrid};
use shrinker_lab_core::Topology;

fn circle() -> ShrinkerReference {
    ShrinkerReference::new("circle", round_circle(2f64.sqrt(), 128).unwrap(), 4).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn positive_scaling_leaves_linear_observables_unchanged(scale in 1e-3f64..1e3, c in -1.0f64..1.0, d in 0.1f64..1.0) {
        let r = circle();
        let v0: Vec<f64> = (0..128).map(|i| d * r.eigenfunctions[0][i] + c * r.eigenfunctions[2][i] + 0.2 * r.eigenfunctions[3][i]).collect();
        let scaled: Vec<f64> = v0.iter().map(|v| scale * v).collect();
        let a = cone_track(&static_linear_series(&r, &v0, 0.5, 0.01, 0.1).unwrap(), &r, ConeNorm::Q, 1.0);
        let b = cone_track(&static_linear_series(&r, &scaled, 0.5, 0.01, 0.1).unwrap(), &r, ConeNorm::Q, 1.0);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x.ratio - y.ratio).abs() <= 1e-10 * x.ratio.abs().max(1.0));
        }
    }

    #[test]
    fn cone_ratio_never_decreases_under_static_linear_flow(c in -2.0f64..2.0, e in -2.0f64..2.0) {
        let r = circle();
        let v0: Vec<f64> = (0..128).map(|i| r.eigenfunctions[0][i] + c * r.eigenfunctions[1][i] + e * r.eigenfunctions[3][i]).collect();
        let states = cone_track(&static_linear_series(&r, &v0, 1.0, 0.01, 0.05).unwrap(), &r, ConeNorm::L2, 1.0);
        for w in states.windows(2) {
            prop_assert!(w[1].ratio >= w[0].ratio * (1.0 - 1e-12));
        }
    }

    #[test]
    fn synthetic_exponential_slope_is_recovered(rate in -2.0f64..4.0, offset in -5.0f64..5.0) {
        let ts: Vec<f64> = (0..40).map(|i| i as f64 * 0.1).collect();
        let ls: Vec<f64> = ts.iter().map(|t| rate * t + offset).collect();
        prop_assert!((lyapunov_exponent(&ts, &ls).unwrap().slope - rate).abs() < 1e-9);
    }

    #[test]
    fn ecker_holds_for_polynomials_on_the_sphere(a in -1.0f64..1.0, b in -1.0f64..1.0, c in -1.0f64..1.0) {
        let s = round_sphere(2.0, 129).unwrap();
        let g = compute_geometry(&s).unwrap();
        let f: Vec<f64> = s.x.iter().map(|x| a + b * x + c * x * x).collect();
        prop_assert!(ecker_inequality_check(&f, &s, &g).pass);
    }
}

#[test]
fn model_files_round_trip_through_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let s = round_sphere(2.0, 129).unwrap();
    let csv = dir.path().join("sphere.csv");
    write_profile_csv(&csv, &s).unwrap();
    let back = read_profile_csv(&csv, Topology::AxisToAxis, 2).unwrap();
    assert_eq!(back, s);
    let json = dir.path().join("sphere.json");
    shrinker_lab_core::io::write_json(&json, &ModelFile::new("sphere", &s, serde_json::Value::Null)).unwrap();
    assert_eq!(ModelFile::load(&json).unwrap().curve().unwrap(), s);
}

#[test]
fn fk_growth_matches_linear_flow_on_the_circle() {
    let r = circle();
    let base = FkBase::Static(r.state.clone());
    let f: Vec<f64> = r.state.curve.x.iter().map(|x| 1.0 + 0.2 * x).collect();
    let est = fk_solve(&f, &base, [2f64.sqrt(), 0.0], 0.5, &FkConfig { n_paths: 2000, ..Default::default() }).unwrap();
    let series = static_linear_series(&r, &f, 0.5, 0.001, 0.5).unwrap();
    let v = &series.last().unwrap().1;
    assert!((est.mean - v[0]).abs() <= (4.0 * est.std_error).max(0.01 * v[0].abs()), "{est:?} vs {}", v[0]);
}

#[test]
fn perturbation_records_are_time_ordered_and_aligned_on_the_sphere() {
    let s = ShrinkerReference::new("sphere", round_sphere(2.0, 129).unwrap(), 3).unwrap();
    let cfg = PerturbationConfig { shape: vec![1.0; 129], amplitudes: vec![1e-3, 3e-3], ..Default::default() };
    let out = run_perturbation(&s, &s.state.curve, &cfg).unwrap();
    assert!(out[1].exit_time < out[0].exit_time);
    for o in &out {
        assert!(o.records.windows(2).all(|w| w[1].t > w[0].t));
        assert!(o.alignment_h1 > 0.95);
        let grid = WeightedGrid::new(&s.state.curve, &s.state.geometry);
        assert!((l2w_norm(&o.final_u, &grid) - o.records.last().unwrap().l2).abs() < 1e-12);
    }
}

#[test]
fn invalid_time_step_is_a_validation_error() {
    let s = round_sphere(2.0, 65).unwrap();
    let cfg = FlowConfig { dt: 0.05, ..Default::default() };
    let err = FlowRunner::new(FlowState::new(0.0, s).unwrap(), cfg).and_then(|mut r| r.step(&mut [])).unwrap_err();
    assert!(err.is_validation());
}
