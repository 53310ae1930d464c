//! Benchmark runner over a directory of `<name>.xyz` / `<name>_gt.obj` pairs.
//!
//! Every cloud is reconstructed and evaluated against its ground truth in
//! the cloud's normalized frame, so the match threshold is in normalized
//! units. Items are processed on a pool of `jobs` worker threads and
//! reported in name order; metric values do not depend on `jobs`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{normalize_to_range, read_obj_wireframe, read_xyz, write_obj_wireframe, write_xyz};
use crate::metrics::{evaluate, EvalReport};
use crate::reconstruct::{reconstruct_with_params, ReconstructionParams};
use crate::synth::{generate_roof, perturb_noise, perturb_sparsity, Archetype, PerturbSpec, RoofSpec};

/// Suffix of ground-truth files next to each `<name>.xyz`.
pub const GT_SUFFIX: &str = "_gt.obj";

/// One cloud of a suite directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuiteEntry {
    pub name: String,
    pub cloud: PathBuf,
    pub ground_truth: PathBuf,
}

/// Lists the clouds of `dir`, sorted by name. Ground-truth files are not
/// checked here; a missing one becomes a per-item error in [`run_bench`].
pub fn discover_suite(dir: &Path) -> Result<Vec<SuiteEntry>> {
    let mut entries = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("xyz") {
            continue;
        }
        let Some(name) = path.file_stem().and_then(|s| s.to_str()) else {
            continue;
        };
        let ground_truth = dir.join(format!("{name}{GT_SUFFIX}"));
        entries.push(SuiteEntry { name: name.to_string(), cloud: path.clone(), ground_truth });
    }
    entries.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(entries)
}

/// Wall-clock timings of one item, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ItemTiming {
    /// Triangulation plus scoring.
    pub scoring: f64,
    pub total: f64,
}

/// Result line for one cloud.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchItem {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metrics: Option<EvalReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing: Option<ItemTiming>,
}

impl BenchItem {
    /// The item as a JSON line without its timing.
    pub fn metrics_json(&self) -> String {
        let item = BenchItem { timing: None, ..self.clone() };
        serde_json::to_string(&item).expect("bench items serialize")
    }
}

/// Means of the eight metrics over the items that succeeded.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricMeans {
    pub wed: f64,
    pub aco: f64,
    pub cp: f64,
    pub cr: f64,
    pub cf1: f64,
    pub ep: f64,
    pub er: f64,
    pub ef1: f64,
}

/// Scoring-stage timing statistics in seconds (nearest-rank percentiles).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TimingStats {
    pub mean: f64,
    pub p50: f64,
    pub p90: f64,
    pub max: f64,
}

impl TimingStats {
    pub fn from_samples(samples: &[f64]) -> Option<Self> {
        if samples.is_empty() {
            return None;
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let rank = |q: f64| sorted[((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1];
        Some(Self {
            mean: sorted.iter().sum::<f64>() / sorted.len() as f64,
            p50: rank(0.5),
            p90: rank(0.9),
            max: sorted[sorted.len() - 1],
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Aggregate {
    pub items: usize,
    pub succeeded: usize,
    pub failed: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub means: Option<MetricMeans>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scoring_time: Option<TimingStats>,
}

impl Aggregate {
    /// Recomputes the aggregate from per-item results.
    pub fn from_items(items: &[BenchItem]) -> Self {
        let reports: Vec<&EvalReport> = items.iter().filter_map(|i| i.metrics.as_ref()).collect();
        let means = (!reports.is_empty()).then(|| {
            let n = reports.len() as f64;
            let mean = |f: fn(&EvalReport) -> f64| reports.iter().map(|r| f(r)).sum::<f64>() / n;
            MetricMeans {
                wed: mean(|r| r.wed),
                aco: mean(|r| r.aco),
                cp: mean(|r| r.cp),
                cr: mean(|r| r.cr),
                cf1: mean(|r| r.cf1),
                ep: mean(|r| r.ep),
                er: mean(|r| r.er),
                ef1: mean(|r| r.ef1),
            }
        });
        let scoring: Vec<f64> = items.iter().filter_map(|i| i.timing.map(|t| t.scoring)).collect();
        Self {
            items: items.len(),
            succeeded: reports.len(),
            failed: items.len() - reports.len(),
            means,
            scoring_time: TimingStats::from_samples(&scoring),
        }
    }

    /// The aggregate as JSON without timing statistics.
    pub fn metrics_json(&self) -> String {
        let aggregate = Aggregate { scoring_time: None, ..*self };
        serde_json::to_string(&aggregate).expect("aggregates serialize")
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BenchReport {
    pub items: Vec<BenchItem>,
    pub aggregate: Aggregate,
}

impl BenchReport {
    pub fn has_failures(&self) -> bool {
        self.aggregate.failed > 0
    }

    /// Writes one JSON line per item followed by the aggregate line.
    pub fn write_json_lines<W: Write>(&self, mut writer: W) -> Result<()> {
        for item in &self.items {
            serde_json::to_writer(&mut writer, item).map_err(std::io::Error::from)?;
            writeln!(writer)?;
        }
        serde_json::to_writer(&mut writer, &serde_json::json!({ "aggregate": self.aggregate }))
            .map_err(std::io::Error::from)?;
        writeln!(writer)?;
        Ok(())
    }

    /// All metric values of the report, timings left out. Identical for
    /// identical inputs regardless of the number of jobs.
    pub fn metrics_json(&self) -> String {
        let mut out = String::new();
        for item in &self.items {
            out.push_str(&item.metrics_json());
            out.push('\n');
        }
        out.push_str(&self.aggregate.metrics_json());
        out.push('\n');
        out
    }
}

fn run_item(entry: &SuiteEntry, params: &ReconstructionParams, threshold: f64) -> BenchItem {
    let start = Instant::now();
    let outcome = (|| -> Result<(EvalReport, f64)> {
        let cloud = read_xyz(BufReader::new(File::open(&entry.cloud)?))?;
        let gt_file = File::open(&entry.ground_truth).map_err(|e| {
            Error::Io(std::io::Error::new(e.kind(), format!("ground truth {}: {e}", entry.ground_truth.display())))
        })?;
        let gt = read_obj_wireframe(BufReader::new(gt_file))?;
        let result = reconstruct_with_params(&cloud, params)?;
        let (_, transform) = normalize_to_range(&cloud)?;
        let pred = transform.apply_wireframe(&result.wireframe);
        let gt = transform.apply_wireframe(&gt);
        Ok((evaluate(&pred, &gt, threshold)?, result.timings.scoring_total().as_secs_f64()))
    })();
    let total = start.elapsed().as_secs_f64();
    match outcome {
        Ok((report, scoring)) => BenchItem {
            name: entry.name.clone(),
            metrics: Some(report),
            error: None,
            timing: Some(ItemTiming { scoring, total }),
        },
        Err(e) => BenchItem { name: entry.name.clone(), metrics: None, error: Some(e.to_string()), timing: None },
    }
}

/// Reconstructs and evaluates every cloud in `dir` using `jobs` workers.
pub fn run_bench(dir: &Path, params: &ReconstructionParams, threshold: f64, jobs: usize) -> Result<BenchReport> {
    if jobs == 0 {
        return Err(Error::Contract("jobs must be at least 1".into()));
    }
    params.validate()?;
    let entries = discover_suite(dir)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Contract(format!("cannot start worker pool: {e}")))?;
    let items: Vec<BenchItem> = pool.install(|| {
        use rayon::prelude::*;
        entries.par_iter().map(|entry| run_item(entry, params, threshold)).collect()
    });
    let aggregate = Aggregate::from_items(&items);
    Ok(BenchReport { items, aggregate })
}

/// Archetype, width, depth and ridge height of the standard suite. Every
/// roof spans 256 units in x, the extent of the normalized frame.
pub const SUITE_SHAPES: [(Archetype, f64, f64, f64); 5] = [
    (Archetype::Flat, 256.0, 160.0, 20.0),
    (Archetype::Gable, 256.0, 128.0, 48.0),
    (Archetype::Hip, 256.0, 128.0, 40.0),
    (Archetype::Pyramid, 256.0, 200.0, 60.0),
    (Archetype::LGable, 256.0, 96.0, 40.0),
];

/// Default number of points per suite cloud.
pub const SUITE_POINT_COUNT: usize = 30_000;

/// Roof specs of the standard suite; `seed` offsets the per-roof seeds.
pub fn suite_specs(point_count: usize, seed: u64) -> Vec<RoofSpec> {
    SUITE_SHAPES
        .iter()
        .enumerate()
        .map(|(i, &(archetype, width, depth, ridge_height))| RoofSpec {
            archetype,
            width,
            depth,
            ridge_height,
            point_count,
            seed: seed.wrapping_mul(10).wrapping_add(1000 + i as u64),
        })
        .collect()
}

/// Writes the standard suite into `dir`, optionally perturbed, and returns
/// the entries written. Perturbation seeds are derived per roof from
/// `perturb.seed`.
pub fn write_suite(
    dir: &Path,
    point_count: usize,
    seed: u64,
    perturb: Option<&PerturbSpec>,
) -> Result<Vec<SuiteEntry>> {
    std::fs::create_dir_all(dir)?;
    let mut entries = Vec::new();
    for (i, spec) in suite_specs(point_count, seed).iter().enumerate() {
        let (mut cloud, gt) = generate_roof(spec)?;
        if let Some(p) = perturb {
            let p = PerturbSpec { seed: p.seed.wrapping_mul(10).wrapping_add(7 + i as u64), ..*p };
            if p.sparsity_fraction > 0.0 {
                cloud = perturb_sparsity(&cloud, &p)?;
            }
            cloud = perturb_noise(&cloud, &p)?;
        }
        let name = spec.archetype.name().to_string();
        let entry = SuiteEntry {
            cloud: dir.join(format!("{name}.xyz")),
            ground_truth: dir.join(format!("{name}{GT_SUFFIX}")),
            name,
        };
        write_xyz(&cloud, BufWriter::new(File::create(&entry.cloud)?))?;
        write_obj_wireframe(&gt, BufWriter::new(File::create(&entry.ground_truth)?))?;
        entries.push(entry);
    }
    Ok(entries)
}
