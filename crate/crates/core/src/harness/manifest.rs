use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Intrinsics;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionEntry {
    pub method: String,
    pub path: PathBuf,
}

/// One evaluated view. Paths are relative to the manifest file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<PathBuf>,
    pub gt: PathBuf,
    pub predictions: Vec<PredictionEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sky_mask: Option<PathBuf>,
    pub intrinsics: Intrinsics,
}

impl ManifestRecord {
    pub fn prediction(&self, method: &str) -> Option<&PredictionEntry> {
        self.predictions.iter().find(|p| p.method == method)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ManifestFile {
    records: Vec<ManifestRecord>,
}

/// Dataset description: every record lists the same set of methods.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    root: PathBuf,
    records: Vec<ManifestRecord>,
}

impl Manifest {
    /// Builds a manifest whose relative paths resolve against `root`.
    pub fn new(root: impl Into<PathBuf>, records: Vec<ManifestRecord>) -> Result<Self> {
        let manifest = Self {
            root: root.into(),
            records,
        };
        manifest.validate_structure()?;
        Ok(manifest)
    }

    /// Parses a JSON manifest and checks that every referenced file exists.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: ManifestFile =
            serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let manifest = Self::new(root, file.records)?;
        manifest.check_files()?;
        Ok(manifest)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(&ManifestFile {
            records: self.records.clone(),
        })?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn records(&self) -> &[ManifestRecord] {
        &self.records
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        self.root.join(path)
    }

    /// Method names in the order of the first record.
    pub fn methods(&self) -> Vec<String> {
        self.records
            .first()
            .map(|r| r.predictions.iter().map(|p| p.method.clone()).collect())
            .unwrap_or_default()
    }

    fn validate_structure(&self) -> Result<()> {
        if self.records.is_empty() {
            return Err(Error::empty("manifest has no records"));
        }
        let mut names = BTreeSet::new();
        let expected: BTreeSet<&str> = self.records[0].predictions.iter().map(|p| p.method.as_str()).collect();
        for r in &self.records {
            if !names.insert(r.name.as_str()) {
                return Err(Error::invalid(format!("duplicate record name `{}`", r.name)));
            }
            if r.predictions.is_empty() {
                return Err(Error::invalid(format!("record `{}` has no predictions", r.name)));
            }
            let methods: BTreeSet<&str> = r.predictions.iter().map(|p| p.method.as_str()).collect();
            if methods.len() != r.predictions.len() {
                return Err(Error::invalid(format!("record `{}` repeats a method", r.name)));
            }
            if methods != expected {
                return Err(Error::invalid(format!(
                    "record `{}` lists methods {methods:?}, expected {expected:?}",
                    r.name
                )));
            }
            r.intrinsics
                .validate()
                .map_err(|e| Error::invalid(format!("record `{}`: {e}", r.name)))?;
        }
        Ok(())
    }

    fn check_files(&self) -> Result<()> {
        for r in &self.records {
            let paths = std::iter::once(&r.gt)
                .chain(r.image.iter())
                .chain(r.sky_mask.iter())
                .chain(r.predictions.iter().map(|p| &p.path));
            for p in paths {
                let full = self.resolve(p);
                if !full.is_file() {
                    return Err(Error::io(
                        full,
                        std::io::Error::new(std::io::ErrorKind::NotFound, "referenced file does not exist"),
                    ));
                }
            }
        }
        Ok(())
    }
}
