//! Oracle trajectories resampled onto reduced graphs, training samples for
//! both networks, augmentation and feature normalization.

mod augment;
mod idw;
mod norm;
mod samples;

pub use augment::{augment, perturb_positions, rotate_sample, rotate_subgraph, AugmentConfig};
pub use idw::{idw_map, IdwStencil, EXACT_DISTANCE};
pub use norm::{ChannelStats, Direction, NormStats, STD_FLOOR};
pub use samples::{
    build_lgn1_samples, build_lgn2_samples, current_positions, lgn1_edge_features,
    lgn1_node_features, map_trajectory, subgraph_templates, subsample, GraphSample,
    PushforwardTargets, ReducedTrajectory, SubgraphEdge, SubgraphSample, SubgraphTemplate,
    LGN1_EDGE_WIDTH, LGN1_NODE_WIDTH, LGN2_EDGE_WIDTH, LGN2_STRUT_WIDTH, LGN2_TET_WIDTH,
    STRESS_COLUMNS,
};

/// Default reduced segment lengths (mm) before scaling to the lattice.
pub const SEGMENT_LENGTHS: [f64; 4] = [1.25, 1.5, 1.75, 2.0];
/// Default IDW neighborhood size and exponent.
pub const IDW_K: usize = 8;
pub const IDW_POWER: f64 = 2.0;
