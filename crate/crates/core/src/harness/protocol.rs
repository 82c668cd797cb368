use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{AlignmentMode, EdgeConfig, DEFAULT_EDGE_TRUNCATION, DEFAULT_TAU_3D};

/// Which metric families an evaluation computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Suites {
    pub image: bool,
    pub pointcloud: bool,
    pub edge: bool,
}

impl Default for Suites {
    fn default() -> Self {
        Self {
            image: true,
            pointcloud: true,
            edge: true,
        }
    }
}

impl std::str::FromStr for Suites {
    type Err = Error;

    /// Comma-separated list, e.g. `image,pointcloud`.
    fn from_str(s: &str) -> Result<Self> {
        let mut suites = Suites {
            image: false,
            pointcloud: false,
            edge: false,
        };
        for name in s.split(',').map(str::trim).filter(|n| !n.is_empty()) {
            match name {
                "image" => suites.image = true,
                "pointcloud" => suites.pointcloud = true,
                "edge" => suites.edge = true,
                other => return Err(Error::invalid(format!("unknown suite `{other}`"))),
            }
        }
        if !(suites.image || suites.pointcloud || suites.edge) {
            return Err(Error::invalid("no metric suite selected"));
        }
        Ok(suites)
    }
}

impl std::fmt::Display for Suites {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let names: Vec<&str> = [(self.image, "image"), (self.pointcloud, "pointcloud"), (self.edge, "edge")]
            .into_iter()
            .filter_map(|(on, n)| on.then_some(n))
            .collect();
        f.write_str(&names.join(","))
    }
}

/// Evaluation protocol. The defaults are the corrected benchmark protocol:
/// median scaling, predictions capped to 100 m, no border crop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Protocol {
    pub alignment: AlignmentMode,
    pub min_depth: f64,
    pub max_depth: f64,
    pub suites: Suites,
    pub edge: EdgeConfig,
    pub edge_truncation: f64,
    pub tau_3d: f64,
    /// Also report the historical SqRel normalized by `gt` instead of `gt^2`.
    pub legacy_sqrel: bool,
    /// Report and exclude failed images instead of aborting.
    pub allow_partial: bool,
}

impl Default for Protocol {
    fn default() -> Self {
        Self {
            alignment: AlignmentMode::Median,
            min_depth: 1e-3,
            max_depth: 100.0,
            suites: Suites::default(),
            edge: EdgeConfig::default(),
            edge_truncation: DEFAULT_EDGE_TRUNCATION,
            tau_3d: DEFAULT_TAU_3D,
            legacy_sqrel: false,
            allow_partial: false,
        }
    }
}

impl Protocol {
    pub fn validate(&self) -> Result<()> {
        self.alignment.validate()?;
        if !(self.min_depth > 0.0 && self.min_depth < self.max_depth && self.max_depth.is_finite()) {
            return Err(Error::invalid(format!(
                "depth range needs 0 < min < max, got [{}, {}]",
                self.min_depth, self.max_depth
            )));
        }
        if !(self.tau_3d > 0.0) {
            return Err(Error::invalid("pointcloud threshold must be positive"));
        }
        if !(self.edge_truncation > 0.0) {
            return Err(Error::invalid("edge truncation must be positive"));
        }
        self.edge.validate()
    }

    /// Choices the report records alongside the numbers.
    pub fn notes(&self) -> Vec<String> {
        vec![
            "aggregates are means of per-image values in manifest order".into(),
            "median alignment uses pixels valid in both maps with gt inside the depth range".into(),
            "boundary metrics restrict both pointclouds to gt boundary pixels".into(),
            "boundary aggregates average over images that have boundary pixels".into(),
            "edge accuracy: predicted edges to nearest gt edge; completeness: gt edges to nearest predicted edge".into(),
            "ranks are dense; tied methods share a rank".into(),
        ]
    }
}
