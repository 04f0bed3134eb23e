//! The two graph networks: the reduced predictor (LGN-i) and the
//! tetrahedral up-mapper (LGN-ii), their losses and training loops.

mod lgn1;
mod lgn2;
mod train;

pub use lgn1::{
    lgn1_displacement_loss, lgn1_forward, lgn1_stats, lgn1_stress_loss, pushforward_state,
    DisplacementLoss, Lgn1Config, Lgn1Model, Lgn1Outputs,
};
pub use lgn2::{lgn2_forward, lgn2_loss, lgn2_stats, Lgn2Config, Lgn2Model, SubgraphBatch};
pub use train::{steps_per_epoch, train_lgn1, train_lgn2, LossRecord, Phase, TrainConfig};
