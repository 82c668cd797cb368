//! Metric reports, method ranking and report rendering.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::harness::names::{self, canonical_order, Direction};
use crate::harness::protocol::Protocol;

/// Metrics of one prediction against one gt map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageResult {
    pub name: String,
    pub method: String,
    /// Scale applied to the prediction before evaluation.
    pub scale: f64,
    pub eval_pixels: usize,
    pub metrics: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub name: String,
    pub method: String,
    pub error: String,
}

/// Dataset aggregates of one method: per-metric means over the images that carry the metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub images: usize,
    pub boundary_images: usize,
    pub metrics: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub method: String,
    pub value: f64,
    pub rank: usize,
    pub tied: bool,
}

/// Dense ranking of all methods by one aggregate metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub metric: String,
    pub direction: Direction,
    pub entries: Vec<RankEntry>,
}

impl Ranking {
    pub fn entry(&self, method: &str) -> Option<&RankEntry> {
        self.entries.iter().find(|e| e.method == method)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub protocol: Protocol,
    pub notes: Vec<String>,
    pub methods: Vec<MethodSummary>,
    pub rankings: Vec<Ranking>,
    pub images: Vec<ImageResult>,
    pub failures: Vec<Failure>,
}

/// Rounds to 6 significant digits, the precision of every emitted value.
pub fn round_sig6(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.5e}").parse().expect("formatted float parses")
}

/// Dense ranks (1 = best) with tie flags. Values are compared at emitted precision.
pub fn dense_ranks(values: &[f64], direction: Direction) -> Result<(Vec<usize>, Vec<bool>)> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("cannot rank non-finite values"));
    }
    let rounded: Vec<f64> = values.iter().map(|&v| round_sig6(v)).collect();
    let mut distinct = rounded.clone();
    distinct.sort_by(|a, b| match direction {
        Direction::Lower => a.total_cmp(b),
        Direction::Higher => b.total_cmp(a),
    });
    distinct.dedup();
    let ranks: Vec<usize> = rounded
        .iter()
        .map(|v| 1 + distinct.iter().position(|d| d == v).expect("value is present"))
        .collect();
    let tied = ranks
        .iter()
        .map(|r| ranks.iter().filter(|o| *o == r).count() > 1)
        .collect();
    Ok((ranks, tied))
}

/// Ranks methods by the aggregate `key`. Every method must carry the key.
pub fn rank_methods(methods: &[MethodSummary], key: &str, direction: Direction) -> Result<Ranking> {
    if methods.is_empty() {
        return Err(Error::empty("no methods to rank"));
    }
    let values = methods
        .iter()
        .map(|m| m.metrics.get(key).copied().ok_or_else(|| Error::UnknownMetric(key.to_string())))
        .collect::<Result<Vec<f64>>>()?;
    let (ranks, tied) = dense_ranks(&values, direction)?;
    let entries = methods
        .iter()
        .zip(values)
        .zip(ranks.into_iter().zip(tied))
        .map(|((m, value), (rank, tied))| RankEntry {
            method: m.method.clone(),
            value,
            rank,
            tied,
        })
        .collect();
    Ok(Ranking {
        metric: key.to_string(),
        direction,
        entries,
    })
}

/// Metrics the report ranks by, with their better direction.
pub const RANK_KEYS: [(&str, Direction); 3] = [
    (names::ABS_REL, Direction::Lower),
    (names::F_SCORE, Direction::Higher),
    (names::BOUNDARY_F_SCORE, Direction::Higher),
];

impl MetricReport {
    pub fn method(&self, name: &str) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.method == name)
    }

    pub fn ranking(&self, metric: &str) -> Option<&Ranking> {
        self.rankings.iter().find(|r| r.metric == metric)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Verifies that every rank column agrees with its aggregate column at
    /// emitted precision: better values have smaller ranks, equal values equal ranks.
    pub fn check_rank_consistency(&self) -> Result<()> {
        for ranking in &self.rankings {
            let fail = |why: String| Err(Error::invalid(format!("rank column `{}`: {why}", ranking.metric)));
            if ranking.entries.len() != self.methods.len() {
                return fail("does not cover every method".into());
            }
            for e in &ranking.entries {
                let Some(agg) = self.method(&e.method).and_then(|m| m.metrics.get(&ranking.metric)) else {
                    return fail(format!("no aggregate for `{}`", e.method));
                };
                if round_sig6(*agg) != round_sig6(e.value) {
                    return fail(format!("value for `{}` differs from its aggregate", e.method));
                }
            }
            let mut ranks: Vec<usize> = ranking.entries.iter().map(|e| e.rank).collect();
            ranks.sort_unstable();
            ranks.dedup();
            if ranks.first() != Some(&1) || ranks.windows(2).any(|w| w[1] != w[0] + 1) {
                return fail("ranks are not dense from 1".into());
            }
            for a in &ranking.entries {
                let shared = ranking.entries.iter().filter(|b| b.rank == a.rank).count() > 1;
                if a.tied != shared {
                    return fail(format!("tie flag of `{}` is wrong", a.method));
                }
                for b in &ranking.entries {
                    let (va, vb) = (round_sig6(a.value), round_sig6(b.value));
                    let consistent = if ranking.direction.better(va, vb) {
                        a.rank < b.rank
                    } else if va == vb {
                        a.rank == b.rank
                    } else {
                        a.rank > b.rank
                    };
                    if !consistent {
                        return fail(format!("`{}` and `{}` are ordered against their values", a.method, b.method));
                    }
                }
            }
        }
        Ok(())
    }

    fn ensure_emittable(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::empty("report has no methods"));
        }
        self.check_rank_consistency()
    }

    /// Metric columns present in any method, in display order.
    fn columns(&self) -> Vec<String> {
        canonical_order()
            .into_iter()
            .filter(|c| self.methods.iter().any(|m| m.metrics.contains_key(c)))
            .collect()
    }
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = round_sig6(n.as_f64().expect("f64 number"));
            *v = serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number);
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

fn fmt_value(x: f64) -> String {
    format!("{}", round_sig6(x))
}

/// Full report, every float at 6 significant digits.
pub fn render_json(report: &MetricReport) -> Result<String> {
    report.ensure_emittable()?;
    let mut value = serde_json::to_value(report)?;
    round_value(&mut value);
    Ok(serde_json::to_string_pretty(&value)? + "\n")
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// One row per method: aggregates, then rank and tie columns.
pub fn render_csv(report: &MetricReport) -> Result<String> {
    report.ensure_emittable()?;
    let columns = report.columns();
    let mut header = vec!["method".to_string(), "images".into(), "boundary_images".into()];
    header.extend(columns.iter().map(|c| csv_field(c)));
    for r in &report.rankings {
        header.push(csv_field(&format!("rank {}", r.metric)));
        header.push(csv_field(&format!("tied {}", r.metric)));
    }
    let mut out = header.join(",") + "\n";
    for m in &report.methods {
        let mut row = vec![csv_field(&m.method), m.images.to_string(), m.boundary_images.to_string()];
        row.extend(columns.iter().map(|c| m.metrics.get(c).map(|&v| fmt_value(v)).unwrap_or_default()));
        for r in &report.rankings {
            let e = r.entry(&m.method).expect("checked by rank consistency");
            row.push(e.rank.to_string());
            row.push(e.tied.to_string());
        }
        out += &(row.join(",") + "\n");
    }
    Ok(out)
}

fn markdown_table(report: &MetricReport, title: &str, columns: &[String], ranking: Option<&Ranking>) -> String {
    let mut out = format!("## {title}\n\n| Method |");
    for c in columns {
        let arrow = match names::direction_of(c) {
            Some(Direction::Higher) => "↑",
            _ => "↓",
        };
        let _ = write!(out, " {c} {arrow} |");
    }
    if let Some(r) = ranking {
        let _ = write!(out, " Rank ({}) |", r.metric);
    }
    out += "\n|---|";
    out += &"---:|".repeat(columns.len() + usize::from(ranking.is_some()));
    out += "\n";
    for m in &report.methods {
        let _ = write!(out, "| {} |", m.method);
        for c in columns {
            let cell = m.metrics.get(c).map(|&v| fmt_value(v)).unwrap_or_else(|| "-".into());
            let _ = write!(out, " {cell} |");
        }
        if let Some(e) = ranking.and_then(|r| r.entry(&m.method)) {
            let tie = if e.tied { "=" } else { "" };
            let _ = write!(out, " {}{tie} |", e.rank);
        }
        out += "\n";
    }
    out + "\n"
}

/// Aggregate tables per metric family, each with its rank column.
pub fn render_markdown(report: &MetricReport) -> Result<String> {
    report.ensure_emittable()?;
    let columns = report.columns();
    let family = |pred: &dyn Fn(&str) -> bool| -> Vec<String> {
        columns.iter().filter(|c| pred(c)).cloned().collect()
    };
    let image = family(&|c| names::IMAGE_ORDER.contains(&c));
    let cloud = family(&|c| names::POINTCLOUD_ORDER.contains(&c));
    let edge = family(&|c| names::EDGE_ORDER.contains(&c) || c.starts_with(names::BOUNDARY_PREFIX));

    let mut out = String::from("# Depth benchmark results\n\n");
    let _ = writeln!(
        out,
        "Alignment: {}. Depth range: [{}, {}] m. Pointcloud threshold: {} m. Edge truncation: {} px.\n",
        report.protocol.alignment,
        report.protocol.min_depth,
        report.protocol.max_depth,
        report.protocol.tau_3d,
        report.protocol.edge_truncation
    );
    for (title, cols, key) in [
        ("Image-based", &image, names::ABS_REL),
        ("Pointcloud-based", &cloud, names::F_SCORE),
        ("Edge-based", &edge, names::BOUNDARY_F_SCORE),
    ] {
        if !cols.is_empty() {
            out += &markdown_table(report, title, cols, report.ranking(key));
        }
    }
    if !report.failures.is_empty() {
        let _ = writeln!(out, "{} evaluation(s) failed and are excluded.\n", report.failures.len());
    }
    Ok(out.trim_end().to_string() + "\n")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
    Markdown,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Json => "json",
            ReportFormat::Csv => "csv",
            ReportFormat::Markdown => "md",
        }
    }

    pub fn render(self, report: &MetricReport) -> Result<String> {
        match self {
            ReportFormat::Json => render_json(report),
            ReportFormat::Csv => render_csv(report),
            ReportFormat::Markdown => render_markdown(report),
        }
    }
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(Error::invalid(format!("unknown report format `{other}`"))),
        }
    }
}

/// Writes `report.<ext>` into `dir` and returns its path.
pub fn emit_report(report: &MetricReport, format: ReportFormat, dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    let text = format.render(report)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(format!("report.{}", format.extension()));
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}
