//! Monocular depth benchmarking engine.
//!
//! Camera geometry and view synthesis, the self-supervised loss and
//! regularizer family as forward computations, image/pointcloud/edge
//! metrics, panorama patch extraction, and an evaluation harness with
//! deterministic parallel execution and report generation.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod filter;
pub mod geometry;
pub mod grid;
pub mod harness;
pub mod io;
pub mod losses;
pub mod metrics;
pub mod panorama;
pub mod regularizers;
pub mod synthetic;

pub use error::{Error, Result};
pub use geometry::{
    axis_angle_to_transform, backproject, bilinear_sample, compute_warp, disp_to_depth, reproject,
    synthesize_view, warp_image, DepthMap, DepthRange, DisparityMap, Intrinsics, PointCloud,
    RigidTransform, Synthesized, WarpField,
};
pub use grid::{Grid, Image};
pub use harness::{
    emit_report, rank_methods, run_evaluation, Manifest, MetricReport, Protocol, ReportFormat,
};
pub use metrics::{
    align_prediction, boundary_masked_metrics, chamfer, clamp_and_mask, edge_accuracy_completeness,
    extract_depth_boundaries, image_metrics, pointcloud_metrics, prf_iou, truncated_edt,
    AlignmentMode, DepthTransform, EdgeConfig, EdgeMap, EdgeMetrics, ImageMetrics,
    PointcloudMetrics,
};
pub use panorama::{generate_scene_patches, sample_patch, Panorama, Patch, PatchSpec};
pub use regularizers::{explainability_reg, occlusion_loss, smoothness_loss, SmoothnessConfig};
pub use synthetic::{render_scene, SyntheticScene};

/// Engine version, mirrored by every front end.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
