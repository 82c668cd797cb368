//! Evaluation runner: a parallel map over manifest records followed by a
//! sequential, order-preserving reduction.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{backproject, DepthMap, Intrinsics};
use crate::grid::{ensure_same_dims, Grid};
use crate::harness::manifest::{Manifest, ManifestRecord};
use crate::harness::names::{self, edge_entries, image_entries, pointcloud_entries, BOUNDARY_PREFIX};
use crate::harness::protocol::Protocol;
use crate::harness::report::{rank_methods, Failure, ImageResult, MethodSummary, MetricReport, RANK_KEYS};
use crate::io;
use crate::metrics::{
    align_prediction, boundary_masked_metrics, clamp_and_mask, edge_accuracy_completeness,
    extract_depth_boundaries, image_metrics, pointcloud_metrics,
};

/// Metrics of one prediction, keyed by report name.
#[derive(Debug, Clone, PartialEq)]
pub struct PairEvaluation {
    pub scale: f64,
    pub eval_pixels: usize,
    pub metrics: BTreeMap<String, f64>,
}

/// Runs the full protocol on one prediction/gt pair: align, cap, then every
/// enabled suite.
pub fn evaluate_pair(
    pred: &DepthMap,
    gt: &DepthMap,
    sky: Option<&Grid<bool>>,
    k: &Intrinsics,
    protocol: &Protocol,
) -> Result<PairEvaluation> {
    protocol.validate()?;
    ensure_same_dims(gt.dims(), pred.dims())?;
    ensure_same_dims(gt.dims(), (k.width, k.height))?;

    let in_range = gt
        .values()
        .zip_map(gt.valid(), |d, ok| *ok && (protocol.min_depth..=protocol.max_depth).contains(d))?;
    let (aligned, scale) = align_prediction(pred, &gt.restrict(&in_range)?, protocol.alignment)?;
    let (pred_eval, gt_eval, mask) = clamp_and_mask(&aligned, gt, protocol.min_depth, protocol.max_depth)?;
    let eval_pixels = mask.count_true();
    if eval_pixels == 0 {
        return Err(Error::empty("no pixels pass the evaluation mask"));
    }

    let mut metrics = BTreeMap::new();
    let mut put = |prefix: &str, entries: Vec<(&str, f64)>| {
        for (name, v) in entries {
            metrics.insert(format!("{prefix}{name}"), v);
        }
    };
    if protocol.suites.image {
        put("", image_entries(&image_metrics(&pred_eval, &gt_eval, &mask)?, protocol.legacy_sqrel));
    }
    if protocol.suites.pointcloud {
        let pred_cloud = backproject(&pred_eval.restrict(&mask)?, k)?;
        let gt_cloud = backproject(&gt_eval.restrict(&mask)?, k)?;
        put("", pointcloud_entries(&pointcloud_metrics(&pred_cloud, &gt_cloud, protocol.tau_3d)?));
    }
    if protocol.suites.edge {
        let gt_edges = extract_depth_boundaries(&gt_eval, sky, &protocol.edge)?;
        let pred_edges = extract_depth_boundaries(&pred_eval, sky, &protocol.edge)?;
        put("", edge_entries(&edge_accuracy_completeness(&pred_edges, &gt_edges, protocol.edge_truncation)?));
        if mask.and(&gt_edges.edges)?.count_true() > 0 {
            let (img, cloud) = boundary_masked_metrics(&pred_eval, &gt_eval, &mask, &gt_edges, k, protocol.tau_3d)?;
            if protocol.suites.image {
                put(BOUNDARY_PREFIX, image_entries(&img, protocol.legacy_sqrel));
            }
            put(BOUNDARY_PREFIX, pointcloud_entries(&cloud));
        }
    }
    Ok(PairEvaluation {
        scale,
        eval_pixels,
        metrics,
    })
}

type RecordOutcome = Vec<(String, Result<PairEvaluation>)>;

fn evaluate_record(manifest: &Manifest, record: &ManifestRecord, methods: &[String], protocol: &Protocol) -> RecordOutcome {
    let shared = (|| -> Result<(DepthMap, Option<Grid<bool>>)> {
        let gt = io::load_depth(manifest.resolve(&record.gt))?;
        let sky = record
            .sky_mask
            .as_ref()
            .map(|p| io::load_sky_mask(manifest.resolve(p)))
            .transpose()?;
        if let Some(s) = &sky {
            ensure_same_dims(gt.dims(), s.dims())?;
        }
        Ok((gt, sky))
    })();
    methods
        .iter()
        .map(|method| {
            let outcome = match &shared {
                Err(e) => Err(Error::invalid(format!("loading gt: {e}"))),
                Ok((gt, sky)) => record
                    .prediction(method)
                    .ok_or_else(|| Error::invalid(format!("no prediction for `{method}`")))
                    .and_then(|p| io::load_depth(manifest.resolve(&p.path)))
                    .and_then(|pred| evaluate_pair(&pred, gt, sky.as_ref(), &record.intrinsics, protocol)),
            };
            (method.clone(), outcome)
        })
        .collect()
}

fn summarize(method: &str, results: &[&ImageResult]) -> MethodSummary {
    let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for r in results {
        for (name, &v) in &r.metrics {
            let e = sums.entry(name.clone()).or_insert((0.0, 0));
            e.0 += v;
            e.1 += 1;
        }
    }
    MethodSummary {
        method: method.to_string(),
        images: results.len(),
        boundary_images: results
            .iter()
            .filter(|r| r.metrics.contains_key(names::BOUNDARY_F_SCORE))
            .count(),
        metrics: sums.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect(),
    }
}

/// Builds aggregates and rankings from per-image results (manifest order).
pub fn build_report(
    protocol: &Protocol,
    methods: &[String],
    images: Vec<ImageResult>,
    failures: Vec<Failure>,
) -> Result<MetricReport> {
    if methods.is_empty() {
        return Err(Error::empty("report needs at least one method"));
    }
    let summaries: Vec<MethodSummary> = methods
        .iter()
        .map(|m| {
            let own: Vec<&ImageResult> = images.iter().filter(|r| &r.method == m).collect();
            summarize(m, &own)
        })
        .collect();
    let mut notes = protocol.notes();
    let mut rankings = Vec::new();
    for (key, direction) in RANK_KEYS {
        if summaries.iter().all(|s| s.metrics.contains_key(key)) {
            rankings.push(rank_methods(&summaries, key, direction)?);
        } else if summaries.iter().any(|s| s.metrics.contains_key(key)) {
            notes.push(format!("no `{key}` ranking: not every method has the metric"));
        }
    }
    Ok(MetricReport {
        protocol: protocol.clone(),
        notes,
        methods: summaries,
        rankings,
        images,
        failures,
    })
}

/// Evaluates every prediction in the manifest on `jobs` worker threads
/// (0 = one per core). The report does not depend on `jobs`.
pub fn run_evaluation(manifest: &Manifest, protocol: &Protocol, jobs: usize) -> Result<MetricReport> {
    protocol.validate()?;
    let methods = manifest.methods();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
    let outcomes: Vec<RecordOutcome> = pool.install(|| {
        manifest
            .records()
            .par_iter()
            .map(|r| evaluate_record(manifest, r, &methods, protocol))
            .collect()
    });

    let mut images = Vec::new();
    let mut failures = Vec::new();
    for (record, outcome) in manifest.records().iter().zip(outcomes) {
        for (method, result) in outcome {
            match result {
                Ok(e) => images.push(ImageResult {
                    name: record.name.clone(),
                    method,
                    scale: e.scale,
                    eval_pixels: e.eval_pixels,
                    metrics: e.metrics,
                }),
                Err(err) => failures.push(Failure {
                    name: record.name.clone(),
                    method,
                    error: err.to_string(),
                }),
            }
        }
    }
    if let Some(first) = failures.first() {
        if !protocol.allow_partial {
            return Err(Error::EvaluationFailed {
                failed: failures.len(),
                first: format!("{} / {}: {}", first.name, first.method, first.error),
            });
        }
    }
    build_report(protocol, &methods, images, failures)
}
