//! Image I/O, colour handling, bicubic degradation and training patches.

pub mod color;
pub mod dataset;
pub mod netpbm;
pub mod plane;
pub mod resample;

pub use color::{rgb_to_ycbcr, ycbcr_to_rgb};
pub use dataset::{
    augment, build_patch_set, extract_patches, subsample_indices, subsample_patches,
    DatasetManifest, ManifestEntry, PatchPlan, PatchSet, Role,
};
pub use netpbm::{load_netpbm, save_netpbm, NetpbmImage};
pub use plane::{ImagePlane, RgbImage};
pub use resample::{bicubic_resize, degrade, AxisWeights};
