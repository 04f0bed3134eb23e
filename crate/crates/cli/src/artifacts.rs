//! Run-directory layout and the metadata record written next to every output.

use std::fs;
use std::path::{Path, PathBuf};

use latticegraph::geometry::{BeamLattice, ReducedGraph, TetMesh};
use latticegraph::io::{self, read_manifest, read_trajectory, read_vtk, sha256_hex, MANIFEST};
use latticegraph::oracle::Trajectory;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::failure::Failure;

pub const LATTICE: &str = "lattice.json";
pub const MESH: &str = "mesh.vtk";
pub const GRAPHS: &str = "graphs";
pub const TRAJECTORY: &str = "trajectory";
pub const DATASET: &str = "dataset";
pub const LGN1: &str = "lgn1.lgnc";
pub const LGN2: &str = "lgn2.lgnc";
pub const ROLLOUT: &str = "rollout";
pub const REPORT: &str = "report";

/// One reduced graph as stored under `graphs/`.
#[derive(Debug, Serialize, Deserialize)]
pub struct GraphFile {
    pub segment_length: f64,
    pub graph: ReducedGraph,
}

pub fn graph_path(dir: &Path, i: usize) -> PathBuf {
    dir.join(GRAPHS).join(format!("graph_{i}.json"))
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|e| Failure::new(crate::failure::IO, "io", format!("{}: {e}", path.display())))
}

pub fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), Failure> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, bytes).map_err(|e| Failure::new(crate::failure::IO, "io", format!("{}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    write(path, serde_json::to_string_pretty(value).expect("serializable") + "\n")
}

pub fn read_lattice(dir: &Path) -> Result<BeamLattice, Failure> {
    Ok(io::read_json(&dir.join(LATTICE))?)
}

/// Mesh text and parsed mesh.
pub fn read_mesh(path: &Path) -> Result<(Vec<u8>, TetMesh), Failure> {
    let bytes = read_bytes(path)?;
    let text = std::str::from_utf8(&bytes)
        .map_err(|_| Failure::new(crate::failure::MISMATCH, "artifact_mismatch", format!("{}: not ASCII VTK", path.display())))?;
    let mesh = read_vtk(text)?;
    Ok((bytes, mesh))
}

/// Every `graphs/graph_<i>.json` of a run, in index order.
pub fn read_graphs(dir: &Path) -> Result<Vec<GraphFile>, Failure> {
    let mut out = Vec::new();
    loop {
        let path = graph_path(dir, out.len());
        if !path.exists() {
            break;
        }
        out.push(io::read_json::<GraphFile>(&path)?);
    }
    if out.is_empty() {
        return Err(Failure::new(
            crate::failure::IO,
            "io",
            format!("{}: no reduced graphs; run gen-lattice first", dir.join(GRAPHS).display()),
        ));
    }
    Ok(out)
}

/// Loads a trajectory directory together with the mesh its manifest names,
/// verifying every digest.
pub fn load_trajectory(dir: &Path) -> Result<(Trajectory, TetMesh), Failure> {
    let manifest = read_manifest(dir)?;
    let (bytes, mesh) = read_mesh(&dir.join(&manifest.mesh))?;
    let traj = read_trajectory(dir, Some(&bytes))?;
    Ok((traj, mesh))
}

/// Subdirectories of `dir` holding a trajectory manifest, sorted by name.
pub fn trajectory_dirs(dir: &Path) -> Result<Vec<PathBuf>, Failure> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Failure::new(crate::failure::IO, "io", format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(MANIFEST).is_file())
        .collect();
    out.sort();
    Ok(out)
}

/// Digest of an input: the file itself, or a directory's manifest.
fn input_digest(path: &Path) -> Option<String> {
    let file = if path.is_dir() {
        [MANIFEST, io::DATASET_MANIFEST].iter().map(|m| path.join(m)).find(|p| p.is_file())?
    } else {
        path.to_path_buf()
    };
    fs::read(file).ok().map(|b| sha256_hex(&b))
}

pub struct Meta<'a> {
    pub command: &'a str,
    pub config_sha256: &'a str,
    pub seed: u64,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
}

impl Meta<'_> {
    pub fn write(&self, out: &Path) -> Result<(), Failure> {
        let files = |v: &[PathBuf]| -> Vec<serde_json::Value> {
            v.iter()
                .map(|p| json!({ "path": p.display().to_string(), "sha256": input_digest(p) }))
                .collect()
        };
        let value = json!({
            "command": self.command,
            "config_sha256": self.config_sha256,
            "seed": self.seed,
            "version": env!("CARGO_PKG_VERSION"),
            "formats": {
                "trajectory": String::from_utf8_lossy(io::TRAJECTORY_MAGIC),
                "samples": String::from_utf8_lossy(io::SAMPLE_MAGIC),
                "checkpoint": String::from_utf8_lossy(io::CHECKPOINT_MAGIC),
                "binary_version": io::binary::VERSION,
            },
            "inputs": files(&self.inputs),
            "outputs": files(&self.outputs),
        });
        write_json(&out.join(format!("{}.meta.json", self.command)), &value)
    }
}
