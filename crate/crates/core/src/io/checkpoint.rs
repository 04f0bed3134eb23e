//! `LGNC` model checkpoints: a JSON header describing the architecture and
//! a raw f64 payload holding parameters followed by normalization moments.

use serde::{Deserialize, Serialize};

use super::binary::{Reader, Writer};
use crate::dataset::NormStats;
use crate::error::{FormatError, ModelError};
use crate::lgn::{Lgn1Config, Lgn1Model, Lgn2Config, Lgn2Model};
use crate::nn::ParamStore;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"LGNC";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsLayout {
    pub name: String,
    pub width: usize,
    pub bypass: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelConfig {
    Lgn1(Lgn1Config),
    Lgn2(Lgn2Config),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointHeader {
    pub model: ModelConfig,
    pub names: Vec<String>,
    pub shapes: Vec<[usize; 2]>,
    pub stats: Vec<StatsLayout>,
    #[serde(default)]
    pub displacement_steps: u64,
    #[serde(default)]
    pub stress_steps: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Checkpoint {
    Lgn1(Lgn1Model),
    Lgn2(Lgn2Model),
}

impl Checkpoint {
    pub fn kind(&self) -> &'static str {
        match self {
            Checkpoint::Lgn1(_) => "lgn1",
            Checkpoint::Lgn2(_) => "lgn2",
        }
    }

    fn parts(&self) -> (ModelConfig, &ParamStore, &NormStats, u64, u64) {
        match self {
            Checkpoint::Lgn1(m) => (
                ModelConfig::Lgn1(m.config),
                &m.params,
                &m.stats,
                m.displacement_steps,
                m.stress_steps,
            ),
            Checkpoint::Lgn2(m) => (ModelConfig::Lgn2(m.config), &m.params, &m.stats, 0, 0),
        }
    }

    pub fn into_lgn1(self) -> Result<Lgn1Model, ModelError> {
        match self {
            Checkpoint::Lgn1(m) => Ok(m),
            Checkpoint::Lgn2(_) => Err(ModelError::ArchitectureMismatch(
                "expected an LGN-i checkpoint, found LGN-ii".into(),
            )),
        }
    }

    pub fn into_lgn2(self) -> Result<Lgn2Model, ModelError> {
        match self {
            Checkpoint::Lgn2(m) => Ok(m),
            Checkpoint::Lgn1(_) => Err(ModelError::ArchitectureMismatch(
                "expected an LGN-ii checkpoint, found LGN-i".into(),
            )),
        }
    }
}

fn layout(stats: &NormStats) -> Vec<StatsLayout> {
    stats
        .groups
        .iter()
        .map(|g| StatsLayout {
            name: g.name.clone(),
            width: g.width(),
            bypass: g.bypass.clone(),
        })
        .collect()
}

pub fn encode_checkpoint(ck: &Checkpoint) -> Vec<u8> {
    let (model, params, stats, displacement_steps, stress_steps) = ck.parts();
    let header = CheckpointHeader {
        model,
        names: params.names.clone(),
        shapes: params.shapes(),
        stats: layout(stats),
        displacement_steps,
        stress_steps,
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut w = Writer::with_magic(CHECKPOINT_MAGIC);
    w.u64(json.len() as u64);
    w.buf.extend_from_slice(&json);
    w.f64s(&params.to_flat());
    w.f64s(&stats.to_flat());
    w.buf
}

pub fn read_header(data: &[u8]) -> Result<(CheckpointHeader, Reader<'_>), FormatError> {
    let mut r = Reader::new(data);
    r.expect_magic(CHECKPOINT_MAGIC)?;
    let n = r.u64()? as usize;
    let header = serde_json::from_slice(r.bytes(n)?)?;
    Ok((header, r))
}

/// Rebuilds the model the header describes and checks that its parameter
/// names, shapes and statistics layout agree with the file before loading.
pub fn decode_checkpoint(data: &[u8]) -> crate::Result<Checkpoint> {
    let (header, mut r) = read_header(data)?;
    let mut ck = match header.model {
        ModelConfig::Lgn1(c) => {
            let mut m = Lgn1Model::new(c, 0);
            m.displacement_steps = header.displacement_steps;
            m.stress_steps = header.stress_steps;
            Checkpoint::Lgn1(m)
        }
        ModelConfig::Lgn2(c) => Checkpoint::Lgn2(Lgn2Model::new(c, 0)),
    };
    let (params, stats) = match &mut ck {
        Checkpoint::Lgn1(m) => (&mut m.params, &mut m.stats),
        Checkpoint::Lgn2(m) => (&mut m.params, &mut m.stats),
    };
    if params.names != header.names || params.shapes() != header.shapes {
        return Err(ModelError::ArchitectureMismatch(format!(
            "checkpoint lists {} parameter tensors that do not match the {} built from its configuration",
            header.names.len(),
            params.len()
        ))
        .into());
    }
    if layout(stats) != header.stats {
        return Err(ModelError::ArchitectureMismatch("normalization layout differs".into()).into());
    }
    let flat = r.f64s()?;
    params
        .load_flat(&flat)
        .map_err(|e| ModelError::ArchitectureMismatch(e.to_string()))?;
    let sflat = r.f64s()?;
    if stats.load_flat(&sflat) != Some(sflat.len()) {
        return Err(ModelError::ArchitectureMismatch(format!(
            "{} normalization values do not fit the layout",
            sflat.len()
        ))
        .into());
    }
    if !r.at_end() {
        return Err(
            FormatError::Malformed("trailing bytes after checkpoint payload".into()).into(),
        );
    }
    Ok(ck)
}
