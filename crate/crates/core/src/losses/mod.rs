//! Forward computations of the self-supervised loss family.

pub mod photometric;
pub mod regression;

pub use photometric::{
    aggregate_reconstruction, apply_predictive_mask, feature_reconstruction_loss,
    multi_scale_loss, photometric_error, photometric_loss, ssim, static_automask,
    upsample_bilinear, Aggregated, AggregationMode, FeatureDistance, LossMap, MultiScaleLoss,
    PhotometricConfig, PredictiveMask, PredictiveMaskKind,
};
pub use regression::{berhu, berhu_loss, log_l1_loss, virtual_stereo_loss, BerhuState};
