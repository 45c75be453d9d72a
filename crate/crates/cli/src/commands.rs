use std::path::Path;

use serde::Serialize;
use serde_json::json;

use shrinker_lab_core::dynamics::{
    generic_two_case_probe, lyapunov_exponent, manufacture_converging_base, run_perturbation, PerturbationConfig, ShrinkerReference,
};
use shrinker_lab_core::feynman_kac::fk_solve;
use shrinker_lab_core::flow::run_rmcf;
use shrinker_lab_core::geometry::{compute_geometry, f_functional};
use shrinker_lab_core::io::{svg_line_plot, write_json, write_profile_csv, write_table, ModelFile, RunManifest, Series};
use shrinker_lab_core::spectral::{dirichlet_sweep, eigen, EigenConfig};
use shrinker_lab_core::{Boundary, Cutoff, Error, FkBase, FkConfig, FlowState, Result, Topology};

use crate::config::{self, BaseSpec, FkSolveConfig, FlowRunConfig, PerturbRunConfig, ShrinkerSpec};

/// Run `body` inside a manifest that records the outcome even on failure.
fn with_manifest<F>(dir: &Path, command: &str, config: &serde_json::Value, seeds: Vec<u64>, body: F) -> Result<()>
where
    F: FnOnce(&mut RunManifest) -> Result<String>,
{
    let mut run = RunManifest::start(dir, command, config, seeds)?;
    match body(&mut run) {
        Ok(reason) => {
            run.finish(&reason)?;
            Ok(())
        }
        Err(e) => {
            run.finish(&format!("error: {e}"))?;
            Err(e)
        }
    }
}

fn emit_json<T: Serialize>(run: &mut RunManifest, name: &str, value: &T) -> Result<()> {
    write_json(&run.path(name), value)?;
    run.add_output(name)
}

fn emit_svg(run: &mut RunManifest, name: &str, svg: String) -> Result<()> {
    std::fs::write(run.path(name), svg)?;
    run.add_output(name)
}

pub fn shrinker(spec: &ShrinkerSpec, out: &Path) -> Result<()> {
    let value = serde_json::to_value(spec).map_err(|e| Error::Invalid(e.to_string()))?;
    with_manifest(out, "shrinker", &value, Vec::new(), |run| {
        let (kind, curve, residual) = config::build_shrinker(spec)?;
        write_profile_csv(&run.path("profile.csv"), &curve)?;
        run.add_output("profile.csv")?;
        let geom = compute_geometry(&curve)?;
        let f = if curve.topology == Topology::OpenEnd { None } else { Some(f_functional(&curve, &geom, None, true)?) };
        let notes = json!({ "residual": residual, "f_normalized": f });
        emit_json(run, "model.json", &ModelFile::new(&serde_json::to_value(kind).unwrap_or_default().as_str().unwrap_or("model").to_string(), &curve, notes.clone()))?;
        println!("{}", json!({ "kind": kind, "samples": curve.len(), "residual": residual, "f_normalized": f }));
        Ok("completed".into())
    })
}

#[derive(Debug, Serialize)]
struct SpectrumReport {
    eigenvalues: Vec<f64>,
    gap: f64,
    modes: Vec<serde_json::Value>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    sweep: Vec<SweepRow>,
}

#[derive(Debug, Serialize)]
struct SweepRow {
    radius: f64,
    lambda1: f64,
}

pub struct SpectrumArgs<'a> {
    pub model: &'a Path,
    pub k_max: u32,
    pub count: usize,
    pub cutoff: Option<f64>,
    pub dirichlet: bool,
    pub sweep: &'a [f64],
    pub out: Option<&'a Path>,
}

pub fn spectrum(args: &SpectrumArgs) -> Result<()> {
    let compute = || -> Result<SpectrumReport> {
        let curve = ModelFile::load(args.model)?.curve()?;
        let geom = compute_geometry(&curve)?;
        if args.count == 0 {
            return Err(Error::Invalid("--count must be at least 1".into()));
        }
        let cfg = EigenConfig {
            k_max: args.k_max,
            cutoff: args.cutoff.map(Cutoff::Ball),
            boundary: if args.dirichlet { Boundary::Dirichlet } else { Boundary::None },
        };
        let res = eigen(&curve, &geom, args.count, &cfg)?;
        let sweep = if args.sweep.is_empty() {
            Vec::new()
        } else {
            let cutoffs: Vec<Cutoff> = args.sweep.iter().map(|r| Cutoff::Ball(*r)).collect();
            let vals = dirichlet_sweep(&curve, &geom, &cutoffs, args.k_max)?;
            args.sweep.iter().zip(vals).map(|(r, l)| SweepRow { radius: *r, lambda1: l }).collect()
        };
        Ok(SpectrumReport {
            eigenvalues: res.eigenvalues,
            gap: res.gap,
            modes: res.mode_provenance.iter().map(|m| serde_json::to_value(m).unwrap_or_default()).collect(),
            sweep,
        })
    };
    match args.out {
        None => {
            let report = compute()?;
            println!("{}", serde_json::to_string_pretty(&report).map_err(|e| Error::Io(e.to_string()))?);
            Ok(())
        }
        Some(dir) => {
            let value = json!({
                "model": args.model, "k_max": args.k_max, "count": args.count,
                "cutoff": args.cutoff, "dirichlet": args.dirichlet, "sweep": args.sweep,
            });
            with_manifest(dir, "spectrum", &value, Vec::new(), |run| {
                let report = compute()?;
                emit_json(run, "spectrum.json", &report)?;
                if !report.sweep.is_empty() {
                    write_table(&run.path("sweep.csv"), &["radius", "lambda1"], report.sweep.iter().map(|r| vec![r.radius, r.lambda1]))?;
                    run.add_output("sweep.csv")?;
                }
                println!("{}", serde_json::to_string_pretty(&report).map_err(|e| Error::Io(e.to_string()))?);
                Ok("completed".into())
            })
        }
    }
}

fn root_of(path: &Path) -> &Path {
    path.parent().unwrap_or(Path::new("."))
}

pub fn flow_run(config_path: &Path, out: &Path) -> Result<()> {
    let (value, cfg): (_, FlowRunConfig) = config::load(config_path)?;
    if !(cfg.t_end > 0.0) || !(cfg.output_every > 0.0) {
        return Err(Error::Invalid("t_end and output_every must be positive".into()));
    }
    if !(cfg.flow.dt > 0.0 && cfg.flow.dt <= shrinker_lab_core::flow::MAX_DT) {
        return Err(Error::UnstableTimeStep { dt: cfg.flow.dt, bound: shrinker_lab_core::flow::MAX_DT });
    }
    with_manifest(out, "flow run", &value, Vec::new(), |run| {
        let initial = cfg.surface.build(root_of(config_path))?;
        write_profile_csv(&run.path("initial.csv"), &initial)?;
        run.add_output("initial.csv")?;
        let traj = run_rmcf(&initial, cfg.t_end, cfg.output_every, &cfg.flow, |_| Ok(f64::NAN))?;
        write_table(&run.path("records.csv"), &["t", "f", "max_a"], traj.records.iter().map(|r| vec![r.t, r.f, r.max_a]))?;
        run.add_output("records.csv")?;
        let last = traj.states.last().ok_or_else(|| Error::Invalid("flow produced no states".into()))?;
        write_profile_csv(&run.path("final.csv"), &last.curve)?;
        run.add_output("final.csv")?;
        let f: Vec<(f64, f64)> = traj.records.iter().map(|r| (r.t, r.f)).collect();
        emit_svg(run, "f.svg", svg_line_plot("F along the flow", "t", "F", &[Series::new("F", f)]))?;
        let worst = traj.records.windows(2).map(|w| w[1].f - w[0].f).fold(0.0, f64::max);
        let summary = json!({
            "stop": format!("{:?}", traj.stop),
            "t_final": last.t,
            "f_initial": traj.records.first().map(|r| r.f),
            "f_final": traj.records.last().map(|r| r.f),
            "max_f_increase": worst,
            "steps": traj.records.len() - 1,
        });
        emit_json(run, "summary.json", &summary)?;
        println!("{summary}");
        Ok(format!("{:?}", traj.stop).to_lowercase())
    })
}

pub fn fk_solve_cmd(config_path: &Path, out: &Path) -> Result<()> {
    let (value, cfg): (_, FkSolveConfig) = config::load(config_path)?;
    with_manifest(out, "fk solve", &value, vec![cfg.seed], |run| {
        let curve = cfg.surface.build(root_of(config_path))?;
        if cfg.node >= curve.len() {
            return Err(Error::Invalid(format!("node {} beyond {} samples", cfg.node, curve.len())));
        }
        let data = cfg.data.evaluate(&curve)?;
        let p = curve.point(cfg.node);
        let base = FkBase::Static(FlowState::new(0.0, curve)?);
        let fk = FkConfig { n_paths: cfg.n_paths, dt: cfg.dt, boundary: cfg.boundary(), seed: cfg.seed, potential: cfg.potential };
        let est = fk_solve(&data, &base, [p.x, p.y], cfg.t, &fk)?;
        let summary = json!({
            "point": [p.x, p.y],
            "t": cfg.t,
            "mean": est.mean,
            "std_error": est.std_error,
            "n_paths": est.n_paths,
            "killed_fraction": est.killed_fraction,
        });
        emit_json(run, "estimate.json", &summary)?;
        println!("{summary}");
        Ok("completed".into())
    })
}

pub fn perturb_run(config_path: &Path, out: &Path) -> Result<()> {
    let (value, cfg): (_, PerturbRunConfig) = config::load(config_path)?;
    with_manifest(out, "perturb run", &value, Vec::new(), |run| {
        let (_, curve, _) = config::build_shrinker(&cfg.shrinker)?;
        let reference = ShrinkerReference::new(&format!("{:?}", cfg.shrinker.kind).to_lowercase(), curve, cfg.modes)?;
        let (base_initial, base_info) = match &cfg.base {
            BaseSpec::Static => (reference.state.curve.clone(), json!({ "kind": "static" })),
            BaseSpec::Converging(c) => {
                let b = manufacture_converging_base(&reference, c)?;
                let info = json!({ "kind": "converging", "coefficients": b.coefficients, "residual": b.residual, "flows": b.evaluations });
                (b.initial, info)
            }
        };
        let shape = cfg.shape.evaluate(&base_initial)?;
        let pcfg = PerturbationConfig {
            shape: shape.clone(),
            sign_class: cfg.sign_class,
            amplitudes: cfg.amplitudes.clone(),
            delta: cfg.delta,
            max_time: cfg.max_time,
            record_every: cfg.record_every,
            flow: cfg.flow,
            inner_radius: cfg.inner_radius,
        };
        let outcomes = run_perturbation(&reference, &base_initial, &pcfg)?;
        let mut log_norms = Vec::new();
        let mut ratios = Vec::new();
        let mut fs = Vec::new();
        let mut rows = Vec::new();
        for (i, o) in outcomes.iter().enumerate() {
            let name = format!("records_{i}.csv");
            write_table(
                &run.path(&name),
                &["t", "l2", "q", "cone_ratio", "phi1_coeff", "f", "r_graph", "c2"],
                o.records.iter().map(|r| vec![r.t, r.l2, r.q, r.cone_ratio, r.phi1_coeff, r.f, r.r_graph, r.c2]),
            )?;
            run.add_output(&name)?;
            let label = format!("eps {:e}", o.epsilon);
            log_norms.push(Series::new(&label, o.records.iter().map(|r| (r.t, r.l2.ln())).collect()));
            ratios.push(Series::new(&label, o.records.iter().map(|r| (r.t, r.cone_ratio)).collect()));
            fs.push(Series::new(&label, o.records.iter().map(|r| (r.t, r.f)).collect()));
            let ts: Vec<f64> = o.records.iter().map(|r| r.t).collect();
            let ls: Vec<f64> = o.records.iter().map(|r| r.l2.ln()).collect();
            let slope = lyapunov_exponent(&ts, &ls).ok().map(|f| f.slope);
            rows.push(json!({
                "epsilon": o.epsilon,
                "status": o.status,
                "exit_time": o.exit_time,
                "alignment_h1": o.alignment_h1,
                "alignment_q": o.alignment_q,
                "holder_quotient": o.holder_quotient,
                "lyapunov_slope": slope,
                "records": name,
            }));
        }
        emit_svg(run, "log_norm.svg", svg_line_plot("log |v| in weighted L2", "t", "log |v|", &log_norms))?;
        emit_svg(run, "cone_ratio.svg", svg_line_plot("cone ratio", "t", "|pi1 v| / |pi2 v|", &ratios))?;
        emit_svg(run, "f.svg", svg_line_plot("F of the perturbed flow", "t", "F", &fs))?;
        let two_case = match &cfg.two_case {
            Some(tc) => {
                let shape_on_sigma = cfg.shape.evaluate(&reference.state.curve)?;
                Some(generic_two_case_probe(&reference, &[shape_on_sigma], tc)?)
            }
            None => None,
        };
        let summary = json!({
            "shrinker": reference.name,
            "lambda1": reference.lambda1(),
            "eigenvalues": reference.eigenvalues,
            "base": base_info,
            "runs": rows,
            "two_case": two_case,
        });
        emit_json(run, "summary.json", &summary)?;
        println!("{}", serde_json::to_string_pretty(&summary).map_err(|e| Error::Io(e.to_string()))?);
        Ok("completed".into())
    })
}
