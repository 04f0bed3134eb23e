//! `LGNS` sample records and dataset shard manifests.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::binary::{flat_to_points, pairs, points_to_flat, Reader, Writer};
use super::sha256_hex;
use crate::dataset::{GraphSample, PushforwardTargets, SubgraphSample};
use crate::error::FormatError;

pub const SAMPLE_MAGIC: &[u8; 4] = b"LGNS";
const KIND_LGN1: u64 = 1;
const KIND_LGN2: u64 = 2;

pub fn encode_graph_sample(w: &mut Writer, s: &GraphSample) {
    w.buf.extend_from_slice(SAMPLE_MAGIC);
    w.u64(KIND_LGN1);
    w.f64s(&points_to_flat(&s.rest));
    w.f64s(&points_to_flat(&s.current));
    w.edges(&s.edges);
    w.matrix(&s.node_features);
    w.matrix(&s.edge_features);
    w.matrix(&s.target_disp);
    w.matrix(&s.target_stress);
    match &s.pushforward {
        Some(pf) => {
            w.u64(1);
            w.matrix(&pf.disp);
            w.matrix(&pf.stress);
        }
        None => w.u64(0),
    }
}

pub fn encode_subgraph_sample(w: &mut Writer, s: &SubgraphSample) {
    w.buf.extend_from_slice(SAMPLE_MAGIC);
    w.u64(KIND_LGN2);
    w.u64(s.center as u64);
    w.u64(s.step as u64);
    w.indices(&s.strut_nodes);
    w.indices(&s.tet_vertices);
    w.matrix(&s.strut_features);
    w.matrix(&s.tet_features);
    w.edges(&s.edges);
    w.matrix(&s.edge_features);
    w.matrix(&s.target);
}

fn record_kind(r: &mut Reader<'_>) -> Result<u64, FormatError> {
    let magic = r.bytes(4)?;
    if magic != SAMPLE_MAGIC {
        return Err(FormatError::BadMagic {
            expected: "LGNS".into(),
            found: String::from_utf8_lossy(magic).into_owned(),
        });
    }
    r.u64()
}

fn decode_graph_sample(r: &mut Reader<'_>) -> Result<GraphSample, FormatError> {
    let rest = flat_to_points(&r.f64s()?)?;
    let current = flat_to_points(&r.f64s()?)?;
    let edges = pairs(&r.indices()?)?;
    let node_features = r.matrix()?;
    let edge_features = r.matrix()?;
    let target_disp = r.matrix()?;
    let target_stress = r.matrix()?;
    let pushforward = match r.u64()? {
        0 => None,
        1 => Some(PushforwardTargets {
            disp: r.matrix()?,
            stress: r.matrix()?,
        }),
        v => return Err(FormatError::Malformed(format!("pushforward flag {v}"))),
    };
    let n = rest.len();
    if current.len() != n
        || node_features.nrows() != n
        || edge_features.nrows() != edges.len()
        || target_disp.nrows() != n
    {
        return Err(FormatError::Malformed(
            "inconsistent graph sample sizes".into(),
        ));
    }
    if edges.iter().flatten().any(|&i| i >= n) {
        return Err(FormatError::Malformed("edge index out of range".into()));
    }
    Ok(GraphSample {
        rest,
        current,
        edges,
        node_features,
        edge_features,
        target_disp,
        target_stress,
        pushforward,
    })
}

fn decode_subgraph_sample(r: &mut Reader<'_>) -> Result<SubgraphSample, FormatError> {
    let center = r.u64()? as usize;
    let step = r.u64()? as usize;
    let strut_nodes = r.indices()?;
    let tet_vertices = r.indices()?;
    let strut_features = r.matrix()?;
    let tet_features = r.matrix()?;
    let edges = pairs(&r.indices()?)?;
    let edge_features = r.matrix()?;
    let target = r.matrix()?;
    let n = strut_nodes.len() + tet_vertices.len();
    if strut_features.nrows() != strut_nodes.len()
        || tet_features.nrows() != tet_vertices.len()
        || target.nrows() != tet_vertices.len()
        || edge_features.nrows() != edges.len()
        || edges.iter().flatten().any(|&i| i >= n)
    {
        return Err(FormatError::Malformed(
            "inconsistent subgraph sample sizes".into(),
        ));
    }
    Ok(SubgraphSample {
        center,
        step,
        strut_nodes,
        tet_vertices,
        strut_features,
        tet_features,
        edges,
        edge_features,
        target,
    })
}

/// Sequence of records of one kind.
#[derive(Debug, Clone, PartialEq)]
pub enum SampleShard {
    Lgn1(Vec<GraphSample>),
    Lgn2(Vec<SubgraphSample>),
}

impl SampleShard {
    pub fn len(&self) -> usize {
        match self {
            SampleShard::Lgn1(v) => v.len(),
            SampleShard::Lgn2(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> &'static str {
        match self {
            SampleShard::Lgn1(_) => "lgn1",
            SampleShard::Lgn2(_) => "lgn2",
        }
    }
}

pub fn encode_shard(shard: &SampleShard) -> Vec<u8> {
    let mut w = Writer::with_magic(SAMPLE_MAGIC);
    w.u64(shard.len() as u64);
    match shard {
        SampleShard::Lgn1(v) => v.iter().for_each(|s| encode_graph_sample(&mut w, s)),
        SampleShard::Lgn2(v) => v.iter().for_each(|s| encode_subgraph_sample(&mut w, s)),
    }
    w.buf
}

pub fn decode_shard(data: &[u8]) -> Result<SampleShard, FormatError> {
    let mut r = Reader::new(data);
    r.expect_magic(SAMPLE_MAGIC)?;
    let n = r.u64()? as usize;
    let mut lgn1 = Vec::new();
    let mut lgn2 = Vec::new();
    for _ in 0..n {
        match record_kind(&mut r)? {
            KIND_LGN1 => lgn1.push(decode_graph_sample(&mut r)?),
            KIND_LGN2 => lgn2.push(decode_subgraph_sample(&mut r)?),
            k => return Err(FormatError::Malformed(format!("unknown record kind {k}"))),
        }
    }
    if !r.at_end() {
        return Err(FormatError::Malformed(
            "trailing bytes after last record".into(),
        ));
    }
    match (lgn1.is_empty(), lgn2.is_empty()) {
        (_, true) => Ok(SampleShard::Lgn1(lgn1)),
        (true, false) => Ok(SampleShard::Lgn2(lgn2)),
        _ => Err(FormatError::Malformed("shard mixes record kinds".into())),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShardEntry {
    pub file: String,
    pub kind: String,
    pub records: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub format: String,
    pub shards: Vec<ShardEntry>,
}

pub const DATASET_MANIFEST: &str = "dataset.json";

/// Writes each shard as `<name>.lgns` and a manifest listing them.
pub fn write_dataset(
    dir: &Path,
    shards: &[(String, SampleShard)],
) -> Result<DatasetManifest, FormatError> {
    fs::create_dir_all(dir)?;
    let mut entries = Vec::with_capacity(shards.len());
    for (name, shard) in shards {
        let file = format!("{name}.lgns");
        let bytes = encode_shard(shard);
        fs::write(dir.join(&file), &bytes)?;
        entries.push(ShardEntry {
            file,
            kind: shard.kind().into(),
            records: shard.len(),
            sha256: sha256_hex(&bytes),
        });
    }
    let manifest = DatasetManifest {
        format: "lgn-dataset/1".into(),
        shards: entries,
    };
    fs::write(
        dir.join(DATASET_MANIFEST),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(manifest)
}

/// Loads every shard, verifying digests; returns all LGN-i and LGN-ii
/// samples in manifest order.
pub fn read_dataset(dir: &Path) -> Result<(Vec<GraphSample>, Vec<SubgraphSample>), FormatError> {
    let manifest: DatasetManifest =
        serde_json::from_str(&fs::read_to_string(dir.join(DATASET_MANIFEST))?)?;
    if manifest.format != "lgn-dataset/1" {
        return Err(FormatError::Malformed(format!(
            "unknown dataset format {:?}",
            manifest.format
        )));
    }
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for e in &manifest.shards {
        let bytes = fs::read(dir.join(&e.file))?;
        if sha256_hex(&bytes) != e.sha256 {
            return Err(FormatError::Checksum(
                dir.join(&e.file).display().to_string(),
            ));
        }
        match decode_shard(&bytes)? {
            SampleShard::Lgn1(v) => a.extend(v),
            SampleShard::Lgn2(v) => b.extend(v),
        }
    }
    Ok((a, b))
}
