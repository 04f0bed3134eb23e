//! Trajectory directories: `manifest.json` plus one `LGNT` block per state.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::binary::{flat_to_points, points_to_flat, Reader, Writer};
use super::sha256_hex;
use crate::continuum::{Material, StressInvariants};
use crate::error::FormatError;
use crate::oracle::{BoundaryCondition, Trajectory, TrajectoryState};

pub const TRAJECTORY_MAGIC: &[u8; 4] = b"LGNT";
pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepEntry {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryManifest {
    pub format: String,
    pub mesh: String,
    pub mesh_sha256: String,
    pub bc: BoundaryCondition,
    pub material: Material,
    pub num_steps: usize,
    pub steps: Vec<StepEntry>,
    /// SHA-256 of the manifest serialized with this field empty.
    pub checksum: String,
}

impl TrajectoryManifest {
    fn digest(&self) -> Result<String, FormatError> {
        let mut bare = self.clone();
        bare.checksum.clear();
        Ok(sha256_hex(serde_json::to_string(&bare)?.as_bytes()))
    }
}

pub fn encode_state(state: &TrajectoryState) -> Vec<u8> {
    let mut w = Writer::with_magic(TRAJECTORY_MAGIC);
    w.u64(state.displacements.len() as u64);
    w.u64(state.invariants.len() as u64);
    for x in points_to_flat(&state.displacements) {
        w.f64(x);
    }
    for s in &state.invariants {
        w.f64(s.i1);
        w.f64(s.j2);
    }
    w.f64(state.reaction_force);
    w.buf
}

pub fn decode_state(data: &[u8]) -> Result<TrajectoryState, FormatError> {
    let mut r = Reader::new(data);
    r.expect_magic(TRAJECTORY_MAGIC)?;
    let nv = r.u64()? as usize;
    let nt = r.u64()? as usize;
    let expected = nv
        .checked_mul(24)
        .and_then(|a| nt.checked_mul(16).and_then(|b| a.checked_add(b)));
    if expected.and_then(|e| e.checked_add(8)) != Some(data.len() - r.position()) {
        return Err(FormatError::Malformed(format!(
            "state block size does not match {nv} vertices, {nt} tets"
        )));
    }
    let flat = (0..3 * nv)
        .map(|_| r.f64())
        .collect::<Result<Vec<_>, _>>()?;
    let invariants = (0..nt)
        .map(|_| {
            Ok(StressInvariants {
                i1: r.f64()?,
                j2: r.f64()?,
            })
        })
        .collect::<Result<Vec<_>, FormatError>>()?;
    let reaction_force = r.f64()?;
    Ok(TrajectoryState {
        displacements: flat_to_points(&flat)?,
        invariants,
        reaction_force,
    })
}

/// Writes `traj` under `dir`; `mesh_path` is recorded verbatim together with
/// the digest of `mesh_bytes`.
pub fn write_trajectory(
    dir: &Path,
    traj: &Trajectory,
    mesh_path: &str,
    mesh_bytes: &[u8],
) -> Result<TrajectoryManifest, FormatError> {
    fs::create_dir_all(dir)?;
    let mut steps = Vec::with_capacity(traj.states.len());
    for (t, s) in traj.states.iter().enumerate() {
        let file = format!("step_{t:04}.lgnt");
        let bytes = encode_state(s);
        fs::write(dir.join(&file), &bytes)?;
        steps.push(StepEntry {
            file,
            sha256: sha256_hex(&bytes),
        });
    }
    let mut manifest = TrajectoryManifest {
        format: "lgn-trajectory/1".into(),
        mesh: mesh_path.into(),
        mesh_sha256: sha256_hex(mesh_bytes),
        bc: traj.bc.clone(),
        material: traj.material,
        num_steps: traj.num_steps(),
        steps,
        checksum: String::new(),
    };
    manifest.checksum = manifest.digest()?;
    fs::write(dir.join(MANIFEST), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<TrajectoryManifest, FormatError> {
    let manifest: TrajectoryManifest =
        serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST))?)?;
    if manifest.format != "lgn-trajectory/1" {
        return Err(FormatError::Malformed(format!(
            "unknown trajectory format {:?}",
            manifest.format
        )));
    }
    if manifest.digest()? != manifest.checksum {
        return Err(FormatError::Checksum(
            dir.join(MANIFEST).display().to_string(),
        ));
    }
    if manifest.steps.len() != manifest.num_steps + 1 {
        return Err(FormatError::Malformed(format!(
            "{} step files for {} steps",
            manifest.steps.len(),
            manifest.num_steps
        )));
    }
    Ok(manifest)
}

/// Reads and verifies every block; `mesh_bytes`, when given, must match the
/// recorded mesh digest.
pub fn read_trajectory(dir: &Path, mesh_bytes: Option<&[u8]>) -> Result<Trajectory, FormatError> {
    let manifest = read_manifest(dir)?;
    if let Some(m) = mesh_bytes {
        if sha256_hex(m) != manifest.mesh_sha256 {
            return Err(FormatError::Checksum(manifest.mesh.clone()));
        }
    }
    let mut states = Vec::with_capacity(manifest.steps.len());
    for e in &manifest.steps {
        let bytes = fs::read(dir.join(&e.file))?;
        if sha256_hex(&bytes) != e.sha256 {
            return Err(FormatError::Checksum(
                dir.join(&e.file).display().to_string(),
            ));
        }
        states.push(decode_state(&bytes)?);
    }
    Ok(Trajectory {
        states,
        bc: manifest.bc,
        material: manifest.material,
    })
}
