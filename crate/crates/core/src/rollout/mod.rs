//! Autoregressive rollout of both networks and slice-based force
//! homogenization.

mod homog;
mod rollout;

pub use homog::{
    homogenized_force, plan_slices, tet_plane_section, HomogenizedForce, Slice, SlicePlan,
    DEFAULT_FRACTIONS,
};
pub use rollout::{rollout_full, rollout_lgn1, ReducedRollout, UPMAP_CHUNK};
