//! File formats: VTK meshes, JSON graphs and manifests, and the
//! little-endian binary records for trajectories, samples and checkpoints.

pub mod binary;
mod checkpoint;
mod samples;
mod trajectory;
mod vtk;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, read_header, Checkpoint, CheckpointHeader, ModelConfig,
    StatsLayout, CHECKPOINT_MAGIC,
};
pub use samples::{
    decode_shard, encode_shard, read_dataset, write_dataset, DatasetManifest, SampleShard,
    ShardEntry, DATASET_MANIFEST, SAMPLE_MAGIC,
};
pub use trajectory::{
    decode_state, encode_state, read_manifest, read_trajectory, write_trajectory, StepEntry,
    TrajectoryManifest, MANIFEST, TRAJECTORY_MAGIC,
};
pub use vtk::{read_vtk, write_vtk, PointField};

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::FormatError;
use crate::lgn::LossRecord;

pub fn sha256_hex(data: &[u8]) -> String {
    Sha256::digest(data)
        .iter()
        .fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), FormatError> {
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, FormatError> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

pub fn save_checkpoint(path: &Path, ck: &Checkpoint) -> Result<(), FormatError> {
    fs::write(path, encode_checkpoint(ck))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> crate::Result<Checkpoint> {
    let bytes = fs::read(path).map_err(FormatError::from)?;
    decode_checkpoint(&bytes)
}

pub fn loss_log_csv(records: &[LossRecord]) -> String {
    let mut s = String::from("step,lr,loss,first,second\n");
    for r in records {
        let _ = writeln!(
            s,
            "{},{:e},{:e},{:e},{:e}",
            r.step, r.lr, r.loss, r.first, r.second
        );
    }
    s
}

/// Force-displacement table; `columns` are `(header, values)` aligned with `displacement`.
pub fn force_csv(displacement: &[f64], columns: &[(&str, &[f64])]) -> String {
    let mut s = String::from("displacement");
    for (h, _) in columns {
        s.push(',');
        s.push_str(h);
    }
    s.push('\n');
    for (i, d) in displacement.iter().enumerate() {
        let _ = write!(s, "{d:?}");
        for (_, v) in columns {
            let _ = write!(s, ",{:?}", v.get(i).copied().unwrap_or(f64::NAN));
        }
        s.push('\n');
    }
    s
}
