use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use latticegraph::config::PipelineConfig;
use latticegraph::continuum::{deformation_gradient, pk_stress_clamped, stress_invariants, Material};
use latticegraph::geometry::{assign_tets_to_strut_nodes, generate_beam_lattice, BeamLattice, Point3, TetMesh};
use latticegraph::io::{
    force_csv, load_checkpoint, loss_log_csv, read_dataset, save_checkpoint, sha256_hex, write_dataset,
    write_trajectory, write_vtk, Checkpoint, PointField, SampleShard,
};
use latticegraph::lgn::{self, Lgn1Model, Lgn2Model, Phase};
use latticegraph::oracle::{run_compression, BoundaryCondition, Trajectory, TrajectoryState};
use latticegraph::pipeline::{
    band_spread, cap_samples, force_curve, point_errors, predict, trajectory_samples, Discretization, ErrorStats,
    Specimen,
};
use latticegraph::Error;
use serde_json::json;

use crate::artifacts::{self as art, GraphFile, Meta};
use crate::failure::{self, Failure};
use crate::GlobalArgs;

pub struct Context {
    pub config: PipelineConfig,
    pub config_sha256: String,
    pub out: PathBuf,
}

impl Context {
    pub fn load(args: &GlobalArgs) -> Result<Context, Failure> {
        let mut config = match &args.config {
            Some(path) => {
                let text = String::from_utf8(art::read_bytes(path)?)
                    .map_err(|_| Failure::new(failure::CONFIG, "config", format!("{}: not UTF-8", path.display())))?;
                PipelineConfig::from_json(&text)?
            }
            None => PipelineConfig::default(),
        };
        if let Some(seed) = args.seed {
            config.seed = seed;
        }
        if let Some(out) = &args.out {
            config.out_dir = out.display().to_string();
        }
        config.validate()?;
        Ok(Context {
            config_sha256: sha256_hex(config.to_json().as_bytes()),
            out: PathBuf::from(&config.out_dir),
            config,
        })
    }

    fn meta(&self, command: &'static str, inputs: Vec<PathBuf>, outputs: Vec<PathBuf>) -> Result<(), Failure> {
        Meta {
            command,
            config_sha256: &self.config_sha256,
            seed: self.config.seed,
            inputs,
            outputs,
        }
        .write(&self.out)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    /// The lattice written by gen-lattice, or the configured one.
    fn lattice(&self) -> Result<BeamLattice, Failure> {
        if self.path(art::LATTICE).is_file() {
            art::read_lattice(&self.out)
        } else {
            let g = &self.config.geometry;
            Ok(generate_beam_lattice(&g.unit_cell(), g.cells[0], g.cells[1], g.cells[2]).map_err(Error::from)?)
        }
    }

    fn boundary(&self, mesh: &TetMesh, lattice: &BeamLattice) -> Result<BoundaryCondition, Failure> {
        let b = &self.config.boundary;
        let bb = lattice.bounding_box;
        Ok(BoundaryCondition::compression(mesh, (bb[0][2], bb[1][2]), b.platen_tolerance, b.rate, b.n_steps, b.strain)
            .map_err(Error::from)?)
    }
}

fn json_line(v: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

pub fn gen_lattice(ctx: &Context) -> Result<(), Failure> {
    let c = &ctx.config;
    let specimen = Specimen::build(&c.geometry)?;
    let lattice_path = ctx.path(art::LATTICE);
    let mesh_path = ctx.path(art::MESH);
    art::write_json(&lattice_path, &specimen.lattice)?;
    art::write(&mesh_path, write_vtk(&specimen.mesh, None, "lattice mesh", &[]))?;

    let mut outputs = vec![lattice_path, mesh_path];
    let mut reduced = Vec::new();
    for (i, l) in c.dataset.scaled_segment_lengths().into_iter().enumerate() {
        let graph = specimen.reduced_graph(l, c.boundary.platen_tolerance)?;
        reduced.push(json!({ "segment_length": l, "nodes": graph.num_nodes(), "edges": graph.edges.len() }));
        let path = art::graph_path(&ctx.out, i);
        art::write_json(&path, &GraphFile { segment_length: l, graph })?;
        outputs.push(path);
    }
    json_line(&json!({
        "cell_type": c.geometry.cell_type,
        "cells": c.geometry.cells,
        "nodes": specimen.lattice.nodes.len(),
        "struts": specimen.lattice.struts.len(),
        "vertices": specimen.mesh.num_vertices(),
        "tets": specimen.mesh.num_tets(),
        "reduced": reduced,
    }));
    ctx.meta("gen-lattice", vec![], outputs)
}

pub fn simulate(ctx: &Context, mesh: Option<PathBuf>) -> Result<(), Failure> {
    // The manifest names its mesh relative to the trajectory directory.
    let (mesh_path, manifest_mesh) = match mesh {
        Some(p) => {
            let abs = std::fs::canonicalize(&p).map_err(|e| Failure::new(failure::IO, "io", format!("{}: {e}", p.display())))?;
            (p, abs.display().to_string())
        }
        None => (ctx.path(art::MESH), format!("../{}", art::MESH)),
    };
    let (mesh_bytes, mesh) = art::read_mesh(&mesh_path)?;
    let lattice = ctx.lattice()?;
    let bc = ctx.boundary(&mesh, &lattice)?;
    let traj = run_compression(&mesh, &ctx.config.material, &bc).map_err(Error::from)?;

    let dir = ctx.path(art::TRAJECTORY);
    write_trajectory(&dir, &traj, &manifest_mesh, &mesh_bytes)?;
    let mut table = String::from("step  displacement_mm  force_N\n");
    for (t, s) in traj.states.iter().enumerate() {
        let _ = writeln!(table, "{t:>4}  {:>15.6}  {:>12.6}", bc.prescribed_compression(t), s.reaction_force + 0.0);
    }
    print!("{table}");
    ctx.meta("simulate", vec![mesh_path], vec![dir])
}

/// Rebuilds the specimen and discretizations of one gen-lattice + simulate run.
fn load_run(dir: &Path) -> Result<(Specimen, Vec<Discretization>, Trajectory), Failure> {
    let (traj, mesh) = art::load_trajectory(&dir.join(art::TRAJECTORY))?;
    let lattice = art::read_lattice(dir)?;
    let mut discs = Vec::new();
    for GraphFile { segment_length, graph } in art::read_graphs(dir)? {
        let assignment = assign_tets_to_strut_nodes(&mesh, &graph).map_err(Error::from)?;
        discs.push(Discretization {
            segment_length,
            graph,
            assignment,
        });
    }
    Ok((Specimen { lattice, mesh }, discs, traj))
}

pub fn build_dataset(ctx: &Context, mut runs: Vec<PathBuf>) -> Result<(), Failure> {
    if runs.is_empty() {
        runs.push(ctx.out.clone());
    }
    let (mut a, mut b) = (Vec::new(), Vec::new());
    let mut inputs = Vec::new();
    for run in &runs {
        let (specimen, discs, traj) = load_run(run)?;
        let (ra, rb) = trajectory_samples(&specimen, &traj, &discs, &ctx.config.dataset)?;
        a.extend(ra);
        b.extend(rb);
        inputs.push(run.join(art::TRAJECTORY));
    }
    let (a, b) = cap_samples(a, b, &ctx.config.dataset, ctx.config.seed);
    let dir = ctx.path(art::DATASET);
    let (na, nb) = (a.len(), b.len());
    write_dataset(&dir, &[("lgn1".into(), SampleShard::Lgn1(a)), ("lgn2".into(), SampleShard::Lgn2(b))])?;
    json_line(&json!({ "runs": runs.len(), "lgn1_samples": na, "lgn2_samples": nb }));
    ctx.meta("build-dataset", inputs, vec![dir])
}

pub fn train_lgn1(ctx: &Context, dataset: Option<PathBuf>) -> Result<(), Failure> {
    let c = &ctx.config;
    let dataset = dataset.unwrap_or_else(|| ctx.path(art::DATASET));
    let (samples, _) = read_dataset(&dataset)?;
    let mut model = Lgn1Model::new(c.lgn1.model(), c.seed);
    let disp = lgn::train_lgn1(&mut model, &samples, &c.lgn1.train(c.seed), Phase::Displacement, |_| {})?;
    let stress = lgn::train_lgn1(&mut model, &samples, &c.lgn1.stress_train(c.seed), Phase::Stress, |_| {})?;

    let ck = ctx.path(art::LGN1);
    let log = ctx.path("lgn1_loss.csv");
    let stress_log = ctx.path("lgn1_stress_loss.csv");
    std::fs::create_dir_all(&ctx.out)?;
    save_checkpoint(&ck, &Checkpoint::Lgn1(model))?;
    art::write(&log, loss_log_csv(&disp))?;
    art::write(&stress_log, loss_log_csv(&stress))?;
    json_line(&json!({
        "samples": samples.len(),
        "displacement_steps": disp.len(),
        "final_loss": disp.last().map(|r| r.loss),
        "stress_steps": stress.len(),
        "final_stress_loss": stress.last().map(|r| r.loss),
    }));
    ctx.meta("train-lgn1", vec![dataset], vec![ck, log, stress_log])
}

pub fn train_lgn2(ctx: &Context, dataset: Option<PathBuf>) -> Result<(), Failure> {
    let c = &ctx.config;
    let dataset = dataset.unwrap_or_else(|| ctx.path(art::DATASET));
    let (_, samples) = read_dataset(&dataset)?;
    let mut model = Lgn2Model::new(c.lgn2.model(), c.seed);
    let records = lgn::train_lgn2(&mut model, &samples, &c.lgn2.train(c.seed), |_| {})?;

    let ck = ctx.path(art::LGN2);
    let log = ctx.path("lgn2_loss.csv");
    std::fs::create_dir_all(&ctx.out)?;
    save_checkpoint(&ck, &Checkpoint::Lgn2(model))?;
    art::write(&log, loss_log_csv(&records))?;
    json_line(&json!({
        "samples": samples.len(),
        "steps": records.len(),
        "final_loss": records.last().map(|r| r.loss),
    }));
    ctx.meta("train-lgn2", vec![dataset], vec![ck, log])
}

fn deformed(mesh: &TetMesh, u: &[Point3]) -> Vec<Point3> {
    mesh.vertices.iter().zip(u).map(|(x, d)| [x[0] + d[0], x[1] + d[1], x[2] + d[2]]).collect()
}

/// Per-tet invariants of a predicted displacement field, with the clamped
/// stress so that inverted predictions still produce finite values.
fn invariants(mesh: &TetMesh, u: &[Point3], mat: &Material) -> Result<Vec<latticegraph::continuum::StressInvariants>, Failure> {
    (0..mesh.num_tets())
        .map(|t| {
            let disp = mesh.tets[t].map(|v| u[v]);
            let f = deformation_gradient(&mesh.tet_positions(t), &disp).map_err(Error::from)?;
            Ok(stress_invariants(&pk_stress_clamped(&f, mat)))
        })
        .collect()
}

pub fn rollout(ctx: &Context, lgn1: Option<PathBuf>, lgn2: Option<PathBuf>) -> Result<(), Failure> {
    let c = &ctx.config;
    let lgn1_path = lgn1.unwrap_or_else(|| ctx.path(art::LGN1));
    let lgn2_path = lgn2.unwrap_or_else(|| ctx.path(art::LGN2));
    let m1 = load_checkpoint(&lgn1_path)?.into_lgn1()?;
    let m2 = load_checkpoint(&lgn2_path)?.into_lgn2()?;

    let mesh_path = ctx.path(art::MESH);
    let (mesh_bytes, mesh) = art::read_mesh(&mesh_path)?;
    let specimen = Specimen {
        lattice: art::read_lattice(&ctx.out)?,
        mesh,
    };
    let bc = ctx.boundary(&specimen.mesh, &specimen.lattice)?;
    let mut outputs = Vec::new();
    let mut summary = Vec::new();
    for (i, GraphFile { segment_length, graph }) in art::read_graphs(&ctx.out)?.into_iter().enumerate() {
        let assignment = assign_tets_to_strut_nodes(&specimen.mesh, &graph).map_err(Error::from)?;
        let disc = Discretization {
            segment_length,
            graph,
            assignment,
        };
        let p = predict(&m1, &m2, &specimen, &disc, &bc, c)?;
        let states = p
            .displacements
            .iter()
            .map(|u| {
                Ok(TrajectoryState {
                    invariants: invariants(&specimen.mesh, u, &c.material)?,
                    displacements: u.clone(),
                    // The surrogate has no platen reaction; use homogenize.
                    reaction_force: f64::NAN,
                })
            })
            .collect::<Result<Vec<_>, Failure>>()?;
        let traj = Trajectory {
            states,
            bc: bc.clone(),
            material: c.material,
        };
        let dir = ctx.path(art::ROLLOUT).join(format!("seg_{i}"));
        write_trajectory(&dir, &traj, &format!("../../{}", art::MESH), &mesh_bytes)?;
        for (t, u) in p.displacements.iter().enumerate() {
            let text = write_vtk(
                &specimen.mesh,
                Some(&deformed(&specimen.mesh, u)),
                &format!("rollout seg_{i} step {t}"),
                &[PointField::Vectors("displacement", u)],
            );
            art::write(&dir.join(format!("step_{t:03}.vtk")), text)?;
        }
        summary.push(json!({ "segment_length": segment_length, "nodes": disc.graph.num_nodes(), "steps": p.displacements.len() - 1 }));
        outputs.push(dir);
    }
    json_line(&json!({ "rollouts": summary }));
    ctx.meta("rollout", vec![lgn1_path, lgn2_path, mesh_path], outputs)
}

fn default_predictions(ctx: &Context, given: Vec<PathBuf>) -> Result<Vec<PathBuf>, Failure> {
    if !given.is_empty() {
        return Ok(given);
    }
    let found = art::trajectory_dirs(&ctx.path(art::ROLLOUT))?;
    if found.is_empty() {
        return Err(Failure::new(failure::IO, "io", "no rollouts found; run rollout first"));
    }
    Ok(found)
}

fn label(path: &Path) -> String {
    path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| path.display().to_string())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// `(displacement, strain)` axis of a trajectory.
fn axis(traj: &Trajectory, mesh: &TetMesh) -> (Vec<f64>, Vec<f64>) {
    let (lo, hi) = mesh.vertices.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p[2]), hi.max(p[2])));
    let d: Vec<f64> = (0..traj.states.len()).map(|t| traj.bc.prescribed_compression(t)).collect();
    let s = d.iter().map(|x| x / (hi - lo)).collect();
    (d, s)
}

/// Force table: axis, band statistics across `curves[skip..]`, then every curve.
fn force_table(displacement: &[f64], strain: &[f64], curves: &[(String, Vec<f64>)], skip: usize) -> String {
    let n = displacement.len();
    let values: Vec<Vec<f64>> = curves[skip..].iter().map(|(_, c)| c[..n.min(c.len())].to_vec()).collect();
    let means: Vec<f64> = (0..n).map(|i| mean(&values.iter().filter_map(|c| c.get(i).copied()).collect::<Vec<_>>())).collect();
    let spread = band_spread(&values);
    let mut columns: Vec<(&str, &[f64])> = vec![("strain", strain), ("force_mean", &means), ("force_std", &spread)];
    for (name, c) in curves {
        columns.push((name, c));
    }
    force_csv(displacement, &columns)
}

pub fn homogenize(ctx: &Context, trajectories: Vec<PathBuf>) -> Result<(), Failure> {
    let dirs = default_predictions(ctx, trajectories)?;
    let fractions = &ctx.config.homogenization.fractions;
    let mut curves = Vec::new();
    let mut axes = None;
    for dir in &dirs {
        let (traj, mesh) = art::load_trajectory(dir)?;
        let states: Vec<Vec<Point3>> = traj.states.iter().map(|s| s.displacements.clone()).collect();
        curves.push((format!("force_{}", label(dir)), force_curve(&mesh, &states, &traj.material, fractions)?));
        axes.get_or_insert_with(|| axis(&traj, &mesh));
    }
    let (d, s) = axes.expect("at least one trajectory");
    let path = ctx.path("force.csv");
    art::write(&path, force_table(&d, &s, &curves, 0))?;
    let finals: Vec<f64> = curves.iter().filter_map(|(_, c)| c.last().copied()).collect();
    json_line(&json!({ "trajectories": dirs.len(), "final_force_mean": mean(&finals), "csv": path.display().to_string() }));
    ctx.meta("homogenize", dirs, vec![path])
}

pub fn report(ctx: &Context, predictions: Vec<PathBuf>, truth: Option<PathBuf>) -> Result<(), Failure> {
    let fractions = &ctx.config.homogenization.fractions;
    let truth_dir = truth.unwrap_or_else(|| ctx.path(art::TRAJECTORY));
    let predictions = default_predictions(ctx, predictions)?;
    let (truth, mesh) = art::load_trajectory(&truth_dir)?;
    let truth_u: Vec<Vec<Point3>> = truth.states.iter().map(|s| s.displacements.clone()).collect();

    let report_dir = ctx.path(art::REPORT);
    let mut curves = vec![("force_truth".to_string(), force_curve(&mesh, &truth_u, &truth.material, fractions)?)];
    let mut entries = Vec::new();
    let mut stats: Vec<ErrorStats> = Vec::new();
    for dir in &predictions {
        let (pred, pmesh) = art::load_trajectory(dir)?;
        if pmesh.num_vertices() != mesh.num_vertices() || pmesh.tets != mesh.tets {
            return Err(Failure::new(
                failure::MISMATCH,
                "artifact_mismatch",
                format!("{}: mesh differs from the reference trajectory", dir.display()),
            ));
        }
        let pred_u: Vec<Vec<Point3>> = pred.states.iter().map(|s| s.displacements.clone()).collect();
        let e = point_errors(&pred_u, &truth_u);
        let name = label(dir);
        for (t, (p, q)) in pred_u.iter().zip(&truth_u).enumerate() {
            let diff: Vec<Point3> = p.iter().zip(q).map(|(a, b)| [a[0] - b[0], a[1] - b[1], a[2] - b[2]]).collect();
            let err: Vec<f64> = diff.iter().map(|d| (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()).collect();
            let text = write_vtk(
                &mesh,
                Some(&deformed(&mesh, p)),
                &format!("{name} step {t}"),
                &[
                    PointField::Scalars("error", &err),
                    PointField::Vectors("error_vector", &diff),
                    PointField::Vectors("displacement", p),
                ],
            );
            art::write(&report_dir.join(&name).join(format!("step_{t:03}.vtk")), text)?;
        }
        curves.push((format!("force_{name}"), force_curve(&mesh, &pred_u, &pred.material, fractions)?));
        entries.push(json!({ "path": dir.display().to_string(), "stats": e }));
        stats.push(e);
    }
    let aggregate = json!({
        "final_mean": mean(&stats.iter().map(|s| s.mean).collect::<Vec<_>>()),
        "final_max": stats.iter().map(|s| s.max).fold(0.0, f64::max),
        "max_reference": stats.first().map(|s| s.max_reference),
    });
    let errors = json!({ "truth": truth_dir.display().to_string(), "predictions": entries, "aggregate": aggregate });
    let errors_path = report_dir.join("errors.json");
    art::write_json(&errors_path, &errors)?;

    let (d, s) = axis(&truth, &mesh);
    // Band statistics cover the predictions only.
    let csv = force_table(&d, &s, &curves, 1);
    let csv_path = report_dir.join("force.csv");
    art::write(&csv_path, csv)?;
    json_line(&json!({ "aggregate": aggregate, "errors": errors_path.display().to_string(), "csv": csv_path.display().to_string() }));

    let mut inputs = vec![truth_dir];
    inputs.extend(predictions);
    ctx.meta("report", inputs, vec![errors_path, csv_path])
}
