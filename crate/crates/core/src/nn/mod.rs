//! Small reverse-mode autodiff engine and the network blocks built on it.

mod adam;
mod message;
mod mlp;
mod tape;

pub use adam::{AdamConfig, AdamState};
pub use message::{scatter_sum, GraphIndex, MessageBlock};
pub use mlp::{InputBlock, Mlp};
pub use tape::{Gradients, ParamStore, Tape, Var, LAYER_NORM_EPS};
