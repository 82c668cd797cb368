//! Evaluation metrics: image-space, pointcloud and depth-boundary suites.

pub mod edge;
pub mod edt;
pub mod image;
pub mod kdtree;
pub mod pointcloud;

pub use edge::{
    boundary_masked_metrics, canny, edge_accuracy_completeness, extract_depth_boundaries,
    truncated_edt, DepthTransform, EdgeConfig, EdgeMap, EdgeMetrics, DEFAULT_EDGE_TRUNCATION,
};
pub use edt::{squared_edt, truncated_distance};
pub use image::{align_prediction, clamp_and_mask, image_metrics, median, AlignmentMode, ImageMetrics};
pub use kdtree::{squared_distance, KdTree, Neighbour};
pub use pointcloud::{chamfer, f_score_iou, nn_distances, pointcloud_metrics, prf_iou, PointcloudMetrics, DEFAULT_TAU_3D};
