//! Report metric names, their display order and which direction is better.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::metrics::{EdgeMetrics, ImageMetrics, PointcloudMetrics};

pub const MAE: &str = "MAE";
pub const RMSE: &str = "RMSE";
pub const INV_MAE: &str = "InvMAE";
pub const INV_RMSE: &str = "InvRMSE";
pub const LOG_MAE: &str = "LogMAE";
pub const LOG_RMSE: &str = "LogRMSE";
pub const LOG_SI: &str = "LogSI";
pub const ABS_REL: &str = "AbsRel";
pub const SQ_REL: &str = "SqRel";
pub const SQ_REL_LEGACY: &str = "SqRel-Legacy";
pub const DELTA1: &str = "Delta<1.25";
pub const DELTA2: &str = "Delta<1.25^2";
pub const DELTA3: &str = "Delta<1.25^3";
pub const CHAMFER: &str = "Chamfer";
pub const PRECISION: &str = "Precision";
pub const RECALL: &str = "Recall";
pub const F_SCORE: &str = "F-Score";
pub const IOU: &str = "IoU";
pub const EDGE_ACC: &str = "EdgeAcc";
pub const EDGE_COMP: &str = "EdgeComp";

/// Prefix for metrics restricted to gt depth-boundary pixels.
pub const BOUNDARY_PREFIX: &str = "Boundary/";
pub const BOUNDARY_F_SCORE: &str = "Boundary/F-Score";

pub const IMAGE_ORDER: [&str; 13] = [
    MAE, RMSE, INV_MAE, INV_RMSE, LOG_MAE, LOG_RMSE, LOG_SI, ABS_REL, SQ_REL, SQ_REL_LEGACY, DELTA1, DELTA2,
    DELTA3,
];
pub const POINTCLOUD_ORDER: [&str; 5] = [CHAMFER, PRECISION, RECALL, F_SCORE, IOU];
pub const EDGE_ORDER: [&str; 2] = [EDGE_ACC, EDGE_COMP];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Lower,
    Higher,
}

impl Direction {
    /// Whether `a` is strictly better than `b`.
    pub fn better(self, a: f64, b: f64) -> bool {
        match self {
            Direction::Lower => a < b,
            Direction::Higher => a > b,
        }
    }
}

impl std::str::FromStr for Direction {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> crate::error::Result<Self> {
        match s {
            "lower" => Ok(Direction::Lower),
            "higher" => Ok(Direction::Higher),
            other => Err(crate::error::Error::invalid(format!(
                "direction must be `lower` or `higher`, got `{other}`"
            ))),
        }
    }
}

/// Better direction of a report metric, or `None` for unknown names.
pub fn direction_of(name: &str) -> Option<Direction> {
    let base = name.strip_prefix(BOUNDARY_PREFIX).unwrap_or(name);
    match base {
        DELTA1 | DELTA2 | DELTA3 | PRECISION | RECALL | F_SCORE | IOU => Some(Direction::Higher),
        _ if IMAGE_ORDER.contains(&base) || POINTCLOUD_ORDER.contains(&base) || EDGE_ORDER.contains(&base) => {
            Some(Direction::Lower)
        }
        _ => None,
    }
}

/// Full display order: image, pointcloud, edge, then the boundary variants.
pub fn canonical_order() -> Vec<String> {
    let base = IMAGE_ORDER.iter().chain(POINTCLOUD_ORDER.iter()).chain(EDGE_ORDER.iter());
    let boundary = IMAGE_ORDER
        .iter()
        .chain(POINTCLOUD_ORDER.iter())
        .map(|n| format!("{BOUNDARY_PREFIX}{n}"));
    base.map(|n| n.to_string()).chain(boundary).collect()
}

/// Image metrics by report name; the legacy SqRel only when requested.
pub fn image_entries(m: &ImageMetrics, legacy_sqrel: bool) -> Vec<(&'static str, f64)> {
    let mut v = vec![
        (MAE, m.mae),
        (RMSE, m.rmse),
        (INV_MAE, m.inv_mae),
        (INV_RMSE, m.inv_rmse),
        (LOG_MAE, m.log_mae),
        (LOG_RMSE, m.log_rmse),
        (LOG_SI, m.log_si),
        (ABS_REL, m.abs_rel),
        (SQ_REL, m.sq_rel),
    ];
    if legacy_sqrel {
        v.push((SQ_REL_LEGACY, m.sq_rel_legacy));
    }
    v.extend([(DELTA1, m.delta1), (DELTA2, m.delta2), (DELTA3, m.delta3)]);
    v
}

pub fn pointcloud_entries(m: &PointcloudMetrics) -> Vec<(&'static str, f64)> {
    vec![
        (CHAMFER, m.chamfer),
        (PRECISION, m.precision),
        (RECALL, m.recall),
        (F_SCORE, m.f_score),
        (IOU, m.iou),
    ]
}

pub fn edge_entries(m: &EdgeMetrics) -> Vec<(&'static str, f64)> {
    vec![(EDGE_ACC, m.edge_acc), (EDGE_COMP, m.edge_comp)]
}

/// Image metrics as a name → value map.
pub fn image_metric_map(m: &ImageMetrics, legacy_sqrel: bool) -> BTreeMap<String, f64> {
    image_entries(m, legacy_sqrel)
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn directions() {
        assert_eq!(direction_of(ABS_REL), Some(Direction::Lower));
        assert_eq!(direction_of(F_SCORE), Some(Direction::Higher));
        assert_eq!(direction_of(BOUNDARY_F_SCORE), Some(Direction::Higher));
        assert_eq!(direction_of("Boundary/Chamfer"), Some(Direction::Lower));
        assert_eq!(direction_of("Accuracy"), None);
    }

    #[test]
    fn order_is_complete() {
        let order = canonical_order();
        assert_eq!(order.len(), 13 + 5 + 2 + 13 + 5);
        assert_eq!(order[0], MAE);
        assert!(order.contains(&BOUNDARY_F_SCORE.to_string()));
    }
}
