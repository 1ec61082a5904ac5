//! Forward transformations and their log-det-Jacobians.

mod activation;
mod general;
mod iaf;
mod planar;
mod stack;
mod sylvester;

pub use activation::{Activation, LOG_DET_GUARD};
pub use general::{general_sylvester_forward, GeneralSylvesterParams};
pub use iaf::{hidden_degrees, iaf_forward, made_masks, made_outputs, MadeParams, MaskedLinear};
pub use planar::{planar_forward, project_planar, PlanarParams};
pub use stack::{stack_forward, Flow, FlowStack, StackOutput};
pub use sylvester::{
    sylvester_forward, OrthogonalFactor, PermutationOrder, SylvesterParams, SylvesterVariant,
};
