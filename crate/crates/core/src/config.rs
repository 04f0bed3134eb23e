//! JSON pipeline configuration. Every section has complete defaults and
//! unknown keys are rejected.

use serde::{Deserialize, Serialize};

use crate::continuum::Material;
use crate::dataset::{AugmentConfig, IDW_K, IDW_POWER, SEGMENT_LENGTHS};
use crate::error::ConfigError;
use crate::geometry::{CellType, UnitCellSpec};
use crate::lgn::{Lgn1Config, Lgn2Config, TrainConfig};
use crate::oracle::{DEFAULT_RATE, DEFAULT_STEPS, DEFAULT_STRAIN};
use crate::rollout::DEFAULT_FRACTIONS;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryConfig {
    pub cell_type: CellType,
    pub cell_size: f64,
    pub strut_diameter: f64,
    /// Cells along x, y, z.
    pub cells: [usize; 3],
    /// Polygon sides of each strut tube.
    pub sides: usize,
    /// Axial slabs per strut tube.
    pub axial: usize,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig {
            cell_type: CellType::BodyCenteredCubic,
            cell_size: 10.0,
            strut_diameter: 2.0,
            cells: [1, 1, 1],
            sides: 6,
            axial: 3,
        }
    }
}

impl GeometryConfig {
    pub fn unit_cell(&self) -> UnitCellSpec {
        UnitCellSpec {
            cell_type: self.cell_type,
            cell_size: self.cell_size,
            strut_diameter: self.strut_diameter,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundaryConfig {
    /// Platen speed (mm/s).
    pub rate: f64,
    pub n_steps: usize,
    /// Final nominal compressive strain.
    pub strain: f64,
    /// Distance from a platen plane within which vertices are constrained (mm).
    pub platen_tolerance: f64,
}

impl Default for BoundaryConfig {
    fn default() -> Self {
        BoundaryConfig {
            rate: DEFAULT_RATE,
            n_steps: DEFAULT_STEPS,
            strain: DEFAULT_STRAIN,
            platen_tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    /// Reduced-graph segment lengths before scaling (mm).
    pub segment_lengths: Vec<f64>,
    /// Multiplier applied to every segment length.
    pub segment_scale: f64,
    pub idw_k: usize,
    pub idw_power: f64,
    /// Upper bound on reduced-predictor samples kept across the corpus.
    pub lgn1_cap: usize,
    /// Upper bound on up-mapper samples kept across the corpus.
    pub lgn2_cap: usize,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            segment_lengths: SEGMENT_LENGTHS.to_vec(),
            segment_scale: 1.0,
            idw_k: IDW_K,
            idw_power: IDW_POWER,
            lgn1_cap: 10_000,
            lgn2_cap: 100_000,
        }
    }
}

impl DatasetConfig {
    pub fn scaled_segment_lengths(&self) -> Vec<f64> {
        self.segment_lengths
            .iter()
            .map(|l| l * self.segment_scale)
            .collect()
    }
}

/// Reduced predictor architecture and schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Lgn1Section {
    pub latent: usize,
    pub hidden_layers: usize,
    pub message_passing_steps: usize,
    pub layer_norm: bool,
    pub lr: f64,
    pub decay: f64,
    pub batch_size: usize,
    /// Optimizer steps of the displacement phase.
    pub steps: u64,
    /// Optimizer steps of the stress-decoder phase.
    pub stress_steps: u64,
    pub pushforward: bool,
    pub augment: AugmentConfig,
}

impl Default for Lgn1Section {
    fn default() -> Self {
        let m = Lgn1Config::default();
        let t = TrainConfig::lgn1();
        Lgn1Section {
            latent: m.latent,
            hidden_layers: m.hidden_layers,
            message_passing_steps: m.message_passing_steps,
            layer_norm: m.layer_norm,
            lr: t.lr,
            decay: t.decay,
            batch_size: t.batch_size,
            steps: t.steps,
            stress_steps: t.steps,
            pushforward: t.pushforward,
            augment: t.augment,
        }
    }
}

impl Lgn1Section {
    pub fn model(&self) -> Lgn1Config {
        Lgn1Config {
            latent: self.latent,
            hidden_layers: self.hidden_layers,
            message_passing_steps: self.message_passing_steps,
            layer_norm: self.layer_norm,
        }
    }

    pub fn train(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            lr: self.lr,
            decay: self.decay,
            batch_size: self.batch_size,
            steps: self.steps,
            epochs: 0,
            pushforward: self.pushforward,
            seed,
            augment: self.augment,
        }
    }

    pub fn stress_train(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            steps: self.stress_steps,
            ..self.train(seed)
        }
    }
}

/// Up-mapper architecture and schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Lgn2Section {
    pub latent: usize,
    pub hidden_layers: usize,
    pub message_passing_steps: usize,
    pub layer_norm: bool,
    pub lr: f64,
    pub decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub augment: AugmentConfig,
}

impl Default for Lgn2Section {
    fn default() -> Self {
        let m = Lgn2Config::default();
        let t = TrainConfig::lgn2();
        Lgn2Section {
            latent: m.latent,
            hidden_layers: m.hidden_layers,
            message_passing_steps: m.message_passing_steps,
            layer_norm: m.layer_norm,
            lr: t.lr,
            decay: t.decay,
            batch_size: t.batch_size,
            epochs: t.epochs,
            augment: t.augment,
        }
    }
}

impl Lgn2Section {
    pub fn model(&self) -> Lgn2Config {
        Lgn2Config {
            latent: self.latent,
            hidden_layers: self.hidden_layers,
            message_passing_steps: self.message_passing_steps,
            layer_norm: self.layer_norm,
        }
    }

    pub fn train(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            lr: self.lr,
            decay: self.decay,
            batch_size: self.batch_size,
            steps: 0,
            epochs: self.epochs,
            pushforward: false,
            seed,
            augment: self.augment,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RolloutConfig {
    /// Predicted steps; 0 follows `boundary.n_steps`.
    pub steps: usize,
    /// Overwrite platen vertices of the full mesh with their prescribed values.
    pub enforce_mesh_boundary: bool,
}

impl Default for RolloutConfig {
    fn default() -> Self {
        RolloutConfig {
            steps: 0,
            enforce_mesh_boundary: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HomogenizationConfig {
    /// Slice heights as fractions of the rest height.
    pub fractions: Vec<f64>,
}

impl Default for HomogenizationConfig {
    fn default() -> Self {
        HomogenizationConfig {
            fractions: DEFAULT_FRACTIONS.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub seed: u64,
    pub out_dir: String,
    pub geometry: GeometryConfig,
    pub material: Material,
    pub boundary: BoundaryConfig,
    pub dataset: DatasetConfig,
    pub lgn1: Lgn1Section,
    pub lgn2: Lgn2Section,
    pub rollout: RolloutConfig,
    pub homogenization: HomogenizationConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            out_dir: "out".into(),
            geometry: GeometryConfig::default(),
            material: Material::default(),
            boundary: BoundaryConfig::default(),
            dataset: DatasetConfig::default(),
            lgn1: Lgn1Section::default(),
            lgn2: Lgn2Section::default(),
            rollout: RolloutConfig::default(),
            homogenization: HomogenizationConfig::default(),
        }
    }
}

fn positive(field: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::new(
            field,
            format!("must be positive and finite, got {v}"),
        ))
    }
}

fn nonzero(field: &str, v: usize) -> Result<(), ConfigError> {
    if v > 0 {
        Ok(())
    } else {
        Err(ConfigError::new(field, "must be at least 1"))
    }
}

impl PipelineConfig {
    /// Parses and validates; errors name the offending key path.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: PipelineConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            ConfigError::new(
                if path == "." {
                    "<root>".to_string()
                } else {
                    path
                },
                e.into_inner().to_string(),
            )
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let g = &self.geometry;
        g.unit_cell()
            .validate()
            .map_err(|e| ConfigError::new("geometry.cell_size/strut_diameter", e.to_string()))?;
        for (i, &c) in g.cells.iter().enumerate() {
            nonzero(&format!("geometry.cells[{i}]"), c)?;
        }
        if g.sides < 3 {
            return Err(ConfigError::new(
                "geometry.sides",
                format!("need at least 3, got {}", g.sides),
            ));
        }
        nonzero("geometry.axial", g.axial)?;
        self.material
            .validate()
            .map_err(|m| ConfigError::new("material", m))?;
        let b = &self.boundary;
        positive("boundary.rate", b.rate)?;
        nonzero("boundary.n_steps", b.n_steps)?;
        if !(b.strain > 0.0 && b.strain < 1.0) {
            return Err(ConfigError::new(
                "boundary.strain",
                format!("must lie in (0, 1), got {}", b.strain),
            ));
        }
        positive("boundary.platen_tolerance", b.platen_tolerance)?;
        let d = &self.dataset;
        if d.segment_lengths.is_empty() {
            return Err(ConfigError::new(
                "dataset.segment_lengths",
                "must not be empty",
            ));
        }
        for (i, &l) in d.segment_lengths.iter().enumerate() {
            positive(&format!("dataset.segment_lengths[{i}]"), l)?;
        }
        positive("dataset.segment_scale", d.segment_scale)?;
        nonzero("dataset.idw_k", d.idw_k)?;
        positive("dataset.idw_power", d.idw_power)?;
        nonzero("dataset.lgn1_cap", d.lgn1_cap)?;
        nonzero("dataset.lgn2_cap", d.lgn2_cap)?;
        for (name, latent, mp, lr, decay, batch) in [
            (
                "lgn1",
                self.lgn1.latent,
                self.lgn1.message_passing_steps,
                self.lgn1.lr,
                self.lgn1.decay,
                self.lgn1.batch_size,
            ),
            (
                "lgn2",
                self.lgn2.latent,
                self.lgn2.message_passing_steps,
                self.lgn2.lr,
                self.lgn2.decay,
                self.lgn2.batch_size,
            ),
        ] {
            nonzero(&format!("{name}.latent"), latent)?;
            nonzero(&format!("{name}.message_passing_steps"), mp)?;
            positive(&format!("{name}.lr"), lr)?;
            if !(decay > 0.0 && decay <= 1.0) {
                return Err(ConfigError::new(
                    format!("{name}.decay"),
                    format!("must lie in (0, 1], got {decay}"),
                ));
            }
            nonzero(&format!("{name}.batch_size"), batch)?;
        }
        for (name, a) in [("lgn1", &self.lgn1.augment), ("lgn2", &self.lgn2.augment)] {
            if !(a.noise_std >= 0.0 && a.noise_std.is_finite()) {
                return Err(ConfigError::new(
                    format!("{name}.augment.noise_std"),
                    "must be non-negative",
                ));
            }
        }
        let f = &self.homogenization.fractions;
        if f.is_empty() {
            return Err(ConfigError::new(
                "homogenization.fractions",
                "must not be empty",
            ));
        }
        for (i, &x) in f.iter().enumerate() {
            if !(x > 0.0 && x < 1.0) {
                return Err(ConfigError::new(
                    format!("homogenization.fractions[{i}]"),
                    format!("must lie in (0, 1), got {x}"),
                ));
            }
        }
        Ok(())
    }

    pub fn rollout_steps(&self) -> usize {
        match self.rollout.steps {
            0 => self.boundary.n_steps,
            n => n,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_the_default() {
        assert_eq!(
            PipelineConfig::from_json("{}").unwrap(),
            PipelineConfig::default()
        );
    }

    #[test]
    fn defaults_round_trip() {
        let d = PipelineConfig::default();
        assert_eq!(PipelineConfig::from_json(&d.to_json()).unwrap(), d);
    }

    #[test]
    fn partial_sections_keep_their_own_defaults() {
        let c = PipelineConfig::from_json(r#"{"lgn2": {"epochs": 5}}"#).unwrap();
        assert_eq!(c.lgn2.epochs, 5);
        assert_eq!(c.lgn2.lr, 5e-4);
        assert_eq!(c.lgn2.batch_size, 256);
    }

    #[test]
    fn errors_name_the_field() {
        let e = PipelineConfig::from_json(r#"{"geometry": {"cell_type": "kagome"}}"#).unwrap_err();
        assert_eq!(e.field, "geometry.cell_type");
        let e = PipelineConfig::from_json(r#"{"boundary": {"sped": 1}}"#).unwrap_err();
        assert!(e.message.contains("sped"), "{e}");
        let e = PipelineConfig::from_json(r#"{"boundary": {"strain": 1.5}}"#).unwrap_err();
        assert_eq!(e.field, "boundary.strain");
    }
}
