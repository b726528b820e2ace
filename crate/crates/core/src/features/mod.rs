//! Image descriptors consumed by the cascade: a whole-image HOG vector for
//! the initial regressor, and per-landmark histogram descriptors read from
//! precomputed orientation integral maps for the refinement stages.

mod hog;
mod local;
mod response;

pub use hog::{extract_global, HogConfig};
pub use local::{
    extract_local, landmark_descriptor, local_jacobian, FeatureJacobian, LocalDescriptorConfig,
    LANDMARK_DESCRIPTOR_LEN, SPATIAL_CELLS,
};
pub use response::{build_response_maps, build_response_planes, ResponseMaps, ORIENTATION_BINS};
