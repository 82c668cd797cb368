//! Pointcloud reconstruction metrics: Chamfer distance, precision, recall,
//! F-Score and IoU at a distance threshold.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::metrics::kdtree::KdTree;

/// Distance below which a point counts as correctly reconstructed (meters).
pub const DEFAULT_TAU_3D: f64 = 0.1;

/// Chamfer in meters; the rest in percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointcloudMetrics {
    pub chamfer: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    pub iou: f64,
}

/// Nearest-neighbour distances from every query point to `reference`.
pub fn nn_distances(query: &PointCloud, reference: &KdTree) -> Vec<f64> {
    query
        .points()
        .par_iter()
        .map(|p| reference.nearest_distance(p))
        .collect()
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn fraction_below(values: &[f64], tau: f64) -> f64 {
    values.iter().filter(|&&d| d < tau).count() as f64 / values.len() as f64
}

/// `(F, IoU)` from precision and recall given as fractions; both zero when `P = R = 0`.
pub fn f_score_iou(precision: f64, recall: f64) -> (f64, f64) {
    let sum = precision + recall;
    if sum == 0.0 {
        return (0.0, 0.0);
    }
    let prod = precision * recall;
    (2.0 * prod / sum, prod / (sum - prod))
}

struct Directed {
    pred_to_gt: Vec<f64>,
    gt_to_pred: Vec<f64>,
}

fn directed(pred: &PointCloud, gt: &PointCloud) -> Result<Directed> {
    if pred.is_empty() || gt.is_empty() {
        return Err(Error::empty("pointcloud metrics need two nonempty clouds"));
    }
    let pred_index = KdTree::build(pred)?;
    let gt_index = KdTree::build(gt)?;
    Ok(Directed {
        pred_to_gt: nn_distances(pred, &gt_index),
        gt_to_pred: nn_distances(gt, &pred_index),
    })
}

/// Mean NN distance gt→pred plus mean NN distance pred→gt.
pub fn chamfer(pred: &PointCloud, gt: &PointCloud) -> Result<f64> {
    let d = directed(pred, gt)?;
    Ok(mean(&d.gt_to_pred) + mean(&d.pred_to_gt))
}

/// Precision/recall/F/IoU at threshold `tau` (strict `<`), plus Chamfer.
pub fn pointcloud_metrics(pred: &PointCloud, gt: &PointCloud, tau: f64) -> Result<PointcloudMetrics> {
    if !(tau > 0.0) {
        return Err(Error::invalid(format!("threshold must be positive, got {tau}")));
    }
    let d = directed(pred, gt)?;
    let precision = fraction_below(&d.pred_to_gt, tau);
    let recall = fraction_below(&d.gt_to_pred, tau);
    let (f, iou) = f_score_iou(precision, recall);
    Ok(PointcloudMetrics {
        chamfer: mean(&d.gt_to_pred) + mean(&d.pred_to_gt),
        precision: 100.0 * precision,
        recall: 100.0 * recall,
        f_score: 100.0 * f,
        iou: 100.0 * iou,
    })
}

/// Threshold metrics between two clouds; identical to [`pointcloud_metrics`].
pub fn prf_iou(pred: &PointCloud, gt: &PointCloud, tau: f64) -> Result<PointcloudMetrics> {
    pointcloud_metrics(pred, gt, tau)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Point3;

    fn cloud(points: &[[f64; 3]]) -> PointCloud {
        PointCloud::new(points.iter().map(|p| Point3::from(*p)).collect()).unwrap()
    }

    #[test]
    fn single_point_chamfer() {
        let a = cloud(&[[0.0, 0.0, 0.0]]);
        let b = cloud(&[[0.0, 0.0, 1.0]]);
        assert_eq!(chamfer(&a, &b).unwrap(), 2.0);
        assert_eq!(chamfer(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn identity_is_perfect() {
        let a = cloud(&[[0.0, 0.0, 1.0], [1.0, 2.0, 3.0]]);
        let m = pointcloud_metrics(&a, &a, DEFAULT_TAU_3D).unwrap();
        assert_eq!((m.precision, m.recall, m.f_score, m.iou), (100.0, 100.0, 100.0, 100.0));
    }

    #[test]
    fn f_and_iou_formulas() {
        let (f, iou) = f_score_iou(1.0, 0.5);
        assert!((f - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(iou, 0.5);
        assert_eq!(f_score_iou(0.0, 0.0), (0.0, 0.0));
    }

    #[test]
    fn precision_one_recall_half() {
        // Every prediction sits on a gt point, but half the gt is unexplained.
        let pred = cloud(&[[0.0, 0.0, 1.0]]);
        let gt = cloud(&[[0.0, 0.0, 1.0], [5.0, 0.0, 1.0]]);
        let m = pointcloud_metrics(&pred, &gt, 0.1).unwrap();
        assert_eq!(m.precision, 100.0);
        assert_eq!(m.recall, 50.0);
        assert!((m.f_score - 200.0 / 3.0).abs() < 1e-12);
        assert_eq!(m.iou, 50.0);
    }

    #[test]
    fn threshold_is_strict() {
        let pred = cloud(&[[0.0, 0.0, 0.0]]);
        let gt = cloud(&[[0.0, 0.0, 0.5]]);
        let m = pointcloud_metrics(&pred, &gt, 0.5).unwrap();
        assert_eq!(m.precision, 0.0);
        assert_eq!(m.f_score, 0.0);
    }

    #[test]
    fn empty_and_bad_threshold() {
        let a = cloud(&[[0.0, 0.0, 1.0]]);
        assert!(chamfer(&a, &PointCloud::default()).is_err());
        assert!(pointcloud_metrics(&a, &a, 0.0).is_err());
    }
}
