//! Trajectory file ingestion with interval binning and interpolation, run
//! configuration, result persistence, and plot-data export.
//!
//! File formats (all UTF-8, comma-delimited, one header line):
//!
//! - trajectories: `id,t,x1..xm`, one observation per line
//! - ground truth: `id,label`, label `-1` marks unassigned points
//! - assignments:  `id,t,label`
//! - partition:    `id,label`
//!
//! Numeric values are written with 12 significant digits; loading a saved
//! file and saving it again reproduces the bytes exactly.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::datagen::GeneratedScenario;
use crate::error::{Error, Result};
use crate::metrics;
use crate::phase2::{self, Phase2Config};
use crate::solver::{self, FitResult};
use crate::types::{
    validate, AssignmentHistory, CenterTensor, Partition, RawRecord, SolverConfig,
    TrajectoryTensor,
};

/// Format a number with 12 significant digits (the documented file
/// precision).
pub fn format_value(v: f64) -> String {
    format!("{v:.11e}")
}

// ── parsing ──────────────────────────────────────────────────────────────────

fn parse_f64(field: &str, line: usize) -> Result<f64> {
    field.trim().parse::<f64>().map_err(|_| Error::ParseError {
        line,
        message: format!("`{field}` is not a number"),
    })
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let content = fs::read_to_string(path)?;
    Ok(content.lines().map(str::to_string).collect())
}

fn parse_trajectory_file(path: &Path) -> Result<Vec<RawRecord>> {
    let lines = read_lines(path)?;
    if lines.is_empty() {
        return Err(Error::ParseError {
            line: 0,
            message: "file is empty".to_string(),
        });
    }
    let header: Vec<&str> = lines[0].split(',').map(str::trim).collect();
    if header.len() < 3 || header[0] != "id" || header[1] != "t" {
        return Err(Error::ParseError {
            line: 1,
            message: format!("expected header `id,t,x1..xm`, got `{}`", lines[0]),
        });
    }
    let m = header.len() - 2;
    let mut records = Vec::new();
    for (idx, line) in lines.iter().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let line_no = idx + 1;
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != m + 2 {
            return Err(Error::InconsistentDimension {
                expected: m,
                actual: fields.len().saturating_sub(2),
                context: format!("line {line_no}"),
            });
        }
        let time = parse_f64(fields[1], line_no)?;
        let position = fields[2..]
            .iter()
            .map(|f| parse_f64(f, line_no))
            .collect::<Result<Vec<f64>>>()?;
        records.push(RawRecord::new(fields[0], position, time));
    }
    if records.is_empty() {
        return Err(Error::ParseError {
            line: lines.len(),
            message: "no observations in file".to_string(),
        });
    }
    Ok(records)
}

// ── interval binning ─────────────────────────────────────────────────────────

/// Bin observations into uniform intervals: multiple observations of an id
/// in one bin are averaged per coordinate; empty bins are filled by linear
/// interpolation between that id's nearest observed bins, with endpoint gaps
/// extended from the nearest observed value.
fn bin_records(records: &[RawRecord], interval: f64) -> Result<Vec<RawRecord>> {
    if !(interval > 0.0) || !interval.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "interval must be positive and finite, got {interval}"
        )));
    }
    let m = records[0].position.len();
    let t_min = records.iter().map(|r| r.time).fold(f64::INFINITY, f64::min);
    let t_max = records
        .iter()
        .map(|r| r.time)
        .fold(f64::NEG_INFINITY, f64::max);
    let n_bins = ((t_max - t_min) / interval).floor() as usize + 1;

    // Per id: per bin, the running coordinate sums and observation count.
    let mut ids: Vec<String> = Vec::new();
    let mut per_id: HashMap<String, Vec<Option<(Vec<f64>, usize)>>> = HashMap::new();
    for r in records {
        if !per_id.contains_key(&r.id) {
            ids.push(r.id.clone());
            per_id.insert(r.id.clone(), vec![None; n_bins]);
        }
        let bin = (((r.time - t_min) / interval).floor() as usize).min(n_bins - 1);
        let slot = &mut per_id.get_mut(&r.id).expect("inserted above")[bin];
        match slot {
            Some((sums, count)) => {
                for d in 0..m {
                    sums[d] += r.position[d];
                }
                *count += 1;
            }
            None => *slot = Some((r.position.clone(), 1)),
        }
    }

    let mut out = Vec::with_capacity(ids.len() * n_bins);
    for id in &ids {
        let bins = &per_id[id];
        let observed: Vec<usize> = (0..n_bins).filter(|&b| bins[b].is_some()).collect();
        if observed.is_empty() {
            return Err(Error::UnfillableGap { id: id.clone() });
        }
        let mean_at = |b: usize| -> Vec<f64> {
            let (sums, count) = bins[b].as_ref().expect("observed bin");
            sums.iter().map(|s| s / *count as f64).collect()
        };
        for b in 0..n_bins {
            let position = if bins[b].is_some() {
                mean_at(b)
            } else {
                // Nearest observed bins on each side.
                let before = observed.iter().rev().find(|&&o| o < b).copied();
                let after = observed.iter().find(|&&o| o > b).copied();
                match (before, after) {
                    (Some(lo), Some(hi)) => {
                        let frac = (b - lo) as f64 / (hi - lo) as f64;
                        let plo = mean_at(lo);
                        let phi = mean_at(hi);
                        (0..m).map(|d| plo[d] + (phi[d] - plo[d]) * frac).collect()
                    }
                    (Some(lo), None) => mean_at(lo),
                    (None, Some(hi)) => mean_at(hi),
                    (None, None) => unreachable!("observed is non-empty"),
                }
            };
            out.push(RawRecord::new(
                id.clone(),
                position,
                t_min + b as f64 * interval,
            ));
        }
    }
    Ok(out)
}

/// Read a trajectory file. Without an interval the observations must already
/// form a complete regular grid; with one, time is binned into uniform
/// intervals (averaging duplicates, interpolating gaps) before validation.
pub fn load_trajectories(path: &Path, interval: Option<f64>) -> Result<TrajectoryTensor> {
    let records = parse_trajectory_file(path)?;
    match interval {
        Some(width) => validate(&bin_records(&records, width)?),
        None => validate(&records),
    }
}

/// Write a trajectory file (12 significant digits per value).
pub fn save_trajectories(path: &Path, tensor: &TrajectoryTensor) -> Result<()> {
    let mut out = String::new();
    let m = tensor.dim();
    out.push_str("id,t");
    for d in 1..=m {
        out.push_str(&format!(",x{d}"));
    }
    out.push('\n');
    for r in tensor.to_records() {
        out.push_str(&r.id);
        out.push(',');
        out.push_str(&format_value(r.time));
        for v in &r.position {
            out.push(',');
            out.push_str(&format_value(*v));
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

// ── ground truth and label files ─────────────────────────────────────────────

/// Read a two-column `id,label` file and align it with the given point
/// order. Label `-1` marks unassigned points.
pub fn load_ground_truth(path: &Path, point_ids: &[String]) -> Result<Partition> {
    let lines = read_lines(path)?;
    if lines.is_empty() || lines[0].split(',').map(str::trim).collect::<Vec<_>>() != ["id", "label"]
    {
        return Err(Error::ParseError {
            line: 1,
            message: "expected header `id,label`".to_string(),
        });
    }
    let mut by_id: HashMap<String, i64> = HashMap::new();
    for (idx, line) in lines.iter().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let line_no = idx + 1;
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 2 {
            return Err(Error::ParseError {
                line: line_no,
                message: format!("expected 2 fields, got {}", fields.len()),
            });
        }
        let label = fields[1].parse::<i64>().map_err(|_| Error::ParseError {
            line: line_no,
            message: format!("`{}` is not an integer label", fields[1]),
        })?;
        if by_id.insert(fields[0].to_string(), label).is_some() {
            return Err(Error::ParseError {
                line: line_no,
                message: format!("duplicate id `{}`", fields[0]),
            });
        }
    }
    let labels = point_ids
        .iter()
        .map(|id| {
            by_id.get(id).copied().ok_or_else(|| Error::ParseError {
                line: 0,
                message: format!("ground truth is missing id `{id}`"),
            })
        })
        .collect::<Result<Vec<i64>>>()?;
    Partition::new(labels)
}

/// Write a two-column `id,label` file.
pub fn save_partition(path: &Path, point_ids: &[String], partition: &Partition) -> Result<()> {
    let mut out = String::from("id,label\n");
    for (id, &label) in point_ids.iter().zip(partition.labels().iter()) {
        out.push_str(&format!("{id},{label}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Write an `id,t,label` assignment-history file (the Fig.-style "ribbon"
/// export: one hard label per point per time step).
pub fn save_assignments(
    path: &Path,
    point_ids: &[String],
    timestamps: &[f64],
    assignments: &AssignmentHistory,
) -> Result<()> {
    let mut out = String::from("id,t,label\n");
    for t in 0..assignments.n_steps() {
        for (i, id) in point_ids.iter().enumerate() {
            out.push_str(&format!(
                "{id},{},{}\n",
                format_value(timestamps[t]),
                assignments.labels()[[t, i]]
            ));
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// Read an `id,t,label` file back into an assignment history plus the point
/// order it uses.
pub fn load_assignments(path: &Path) -> Result<(AssignmentHistory, Vec<String>)> {
    let lines = read_lines(path)?;
    if lines.is_empty()
        || lines[0].split(',').map(str::trim).collect::<Vec<_>>() != ["id", "t", "label"]
    {
        return Err(Error::ParseError {
            line: 1,
            message: "expected header `id,t,label`".to_string(),
        });
    }
    let mut ids: Vec<String> = Vec::new();
    let mut id_index: HashMap<String, usize> = HashMap::new();
    let mut times: Vec<f64> = Vec::new();
    let mut entries: Vec<(usize, f64, usize)> = Vec::new();
    for (idx, line) in lines.iter().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let line_no = idx + 1;
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(Error::ParseError {
                line: line_no,
                message: format!("expected 3 fields, got {}", fields.len()),
            });
        }
        let t = parse_f64(fields[1], line_no)?;
        let label = fields[2].parse::<usize>().map_err(|_| Error::ParseError {
            line: line_no,
            message: format!("`{}` is not a cluster label", fields[2]),
        })?;
        let i = *id_index.entry(fields[0].to_string()).or_insert_with(|| {
            ids.push(fields[0].to_string());
            ids.len() - 1
        });
        times.push(t);
        entries.push((i, t, label));
    }
    times.sort_by(f64::total_cmp);
    times.dedup();
    let t_len = times.len();
    let n = ids.len();
    if t_len == 0 || n == 0 {
        return Err(Error::EmptyInput);
    }
    let mut labels = ndarray::Array2::zeros((t_len, n));
    let mut filled = ndarray::Array2::from_elem((t_len, n), false);
    let mut k = 1usize;
    for (i, t, label) in entries {
        let ti = times
            .binary_search_by(|probe| probe.total_cmp(&t))
            .expect("time collected above");
        if filled[[ti, i]] {
            return Err(Error::IncompleteGrid {
                missing: vec![],
                duplicates: vec![(ids[i].clone(), t)],
            });
        }
        filled[[ti, i]] = true;
        labels[[ti, i]] = label;
        k = k.max(label + 1);
    }
    if let Some((ti, i)) = (0..t_len)
        .flat_map(|ti| (0..n).map(move |i| (ti, i)))
        .find(|&(ti, i)| !filled[[ti, i]])
    {
        return Err(Error::IncompleteGrid {
            missing: vec![(ids[i].clone(), times[ti])],
            duplicates: vec![],
        });
    }
    Ok((AssignmentHistory::new(labels, k)?, ids))
}

// ── datagen export ───────────────────────────────────────────────────────────

/// Write a generated scenario as a trajectory file plus ground-truth file,
/// and optionally the true center tracks.
pub fn save_scenario(
    scenario: &GeneratedScenario,
    data_path: &Path,
    ground_truth_path: &Path,
    true_centers_path: Option<&Path>,
) -> Result<()> {
    save_trajectories(data_path, &scenario.trajectories)?;
    save_partition(
        ground_truth_path,
        scenario.trajectories.point_ids(),
        &scenario.ground_truth,
    )?;
    if let Some(path) = true_centers_path {
        save_center_paths(
            path,
            scenario.trajectories.timestamps(),
            &scenario.true_centers,
        )?;
    }
    Ok(())
}

/// Write a `t,cluster,x1..xm` center-path table.
pub fn save_center_paths(path: &Path, timestamps: &[f64], centers: &CenterTensor) -> Result<()> {
    let m = centers.dim();
    let mut out = String::from("t,cluster");
    for d in 1..=m {
        out.push_str(&format!(",x{d}"));
    }
    out.push('\n');
    for t in 0..centers.n_steps() {
        for j in 0..centers.k() {
            out.push_str(&format_value(timestamps[t]));
            out.push_str(&format!(",{j}"));
            for d in 0..m {
                out.push(',');
                out.push_str(&format_value(centers.data()[[t, d, j]]));
            }
            out.push('\n');
        }
    }
    fs::write(path, out)?;
    Ok(())
}

// ── run configuration ────────────────────────────────────────────────────────

/// Phase-2 settings as they appear in a config file; `k_target` defaults to
/// the solver's `k` when omitted.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Phase2Options {
    pub k_target: Option<usize>,
    pub theta_grid_step: Option<f64>,
    pub votes_first_round: Option<usize>,
    pub votes_max: Option<usize>,
    pub seed: Option<u64>,
}

impl Phase2Options {
    pub fn to_config(&self, fallback_k: usize) -> Phase2Config {
        let defaults = Phase2Config::default();
        Phase2Config {
            k_target: self.k_target.unwrap_or(fallback_k),
            theta_grid_step: self.theta_grid_step.unwrap_or(defaults.theta_grid_step),
            votes_first_round: self.votes_first_round.unwrap_or(defaults.votes_first_round),
            votes_max: self.votes_max.unwrap_or(defaults.votes_max),
            seed: self.seed.unwrap_or(defaults.seed),
        }
    }
}

/// A full pipeline run described as a TOML document. Unknown keys are
/// errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: PathBuf,
    #[serde(default)]
    pub ground_truth: Option<PathBuf>,
    #[serde(default)]
    pub interval: Option<f64>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub phase2: Phase2Options,
}

impl RunConfig {
    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{path:?}: {e}")))
    }
}

// ── run record ───────────────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub iterations: usize,
    pub final_objective: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricScores {
    pub total_ami: f64,
    pub long_term_ami: f64,
}

/// Wall-clock seconds per pipeline stage. Excluded from determinism
/// comparisons.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StageTimings {
    pub load_s: f64,
    pub fit_s: f64,
    pub phase2_s: f64,
    pub metrics_s: f64,
    pub write_s: f64,
}

/// Everything one pipeline run produced, persisted as `run_record.json`
/// alongside flat plot-ready tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub dataset: String,
    pub interval: Option<f64>,
    pub solver: SolverConfig,
    pub phase2: Phase2Config,
    pub fit: FitSummary,
    pub objective_trace: Vec<f64>,
    pub theta: f64,
    pub point_ids: Vec<String>,
    pub partition: Vec<i64>,
    pub assignment_history: Vec<Vec<usize>>,
    pub centers: Vec<Vec<Vec<f64>>>,
    pub metrics: Option<MetricScores>,
    pub timings: StageTimings,
}

fn centers_to_nested(c: &CenterTensor) -> Vec<Vec<Vec<f64>>> {
    (0..c.n_steps())
        .map(|t| {
            (0..c.dim())
                .map(|d| (0..c.k()).map(|j| c.data()[[t, d, j]]).collect())
                .collect()
        })
        .collect()
}

fn history_to_rows(a: &AssignmentHistory) -> Vec<Vec<usize>> {
    (0..a.n_steps())
        .map(|t| (0..a.n_points()).map(|i| a.labels()[[t, i]]).collect())
        .collect()
}

/// Write the labeled-position table `t,id,x1..xm,label`.
fn save_labeled_positions(
    path: &Path,
    x: &TrajectoryTensor,
    assignments: &AssignmentHistory,
) -> Result<()> {
    let m = x.dim();
    let mut out = String::from("t,id");
    for d in 1..=m {
        out.push_str(&format!(",x{d}"));
    }
    out.push_str(",label\n");
    for t in 0..x.n_steps() {
        for (i, id) in x.point_ids().iter().enumerate() {
            out.push_str(&format_value(x.timestamps()[t]));
            out.push_str(&format!(",{id}"));
            for d in 0..m {
                out.push(',');
                out.push_str(&format_value(x.data()[[t, d, i]]));
            }
            out.push_str(&format!(",{}\n", assignments.labels()[[t, i]]));
        }
    }
    fs::write(path, out)?;
    Ok(())
}

fn save_trace(path: &Path, trace: &[f64]) -> Result<()> {
    let mut out = String::from("iteration,objective\n");
    for (i, v) in trace.iter().enumerate() {
        out.push_str(&format!("{i},{}\n", format_value(*v)));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Execute load -> fit -> assignment extraction -> long-term clustering ->
/// metrics (when ground truth is supplied) and persist the results under
/// `out_dir`: `run_record.json` plus flat tables for plotting
/// (`points.csv`, `centers.csv`, `long_term_centers.csv`, `trace.csv`,
/// `assignments.csv`, `partition.csv`).
///
/// Configuration is validated before any computation; errors are tagged with
/// the stage they occurred in.
pub fn run_pipeline(
    data_path: &Path,
    ground_truth_path: Option<&Path>,
    interval: Option<f64>,
    solver_config: &SolverConfig,
    phase2_config: &Phase2Config,
    out_dir: &Path,
) -> Result<RunRecord> {
    solver_config
        .validate()
        .map_err(|e| Error::staged("config", e))?;
    phase2_config
        .validate()
        .map_err(|e| Error::staged("config", e))?;

    let started = Instant::now();
    let x = load_trajectories(data_path, interval).map_err(|e| Error::staged("load", e))?;
    let ground_truth = match ground_truth_path {
        Some(path) => {
            Some(load_ground_truth(path, x.point_ids()).map_err(|e| Error::staged("load", e))?)
        }
        None => None,
    };
    let load_s = started.elapsed().as_secs_f64();

    let fit_started = Instant::now();
    let fitted: FitResult = if solver_config.distance.is_robust() {
        solver::fit_robust(&x, solver_config).map_err(|e| Error::staged("fit", e))?
    } else {
        solver::fit(&x, solver_config).map_err(|e| Error::staged("fit", e))?
    };
    let fit_s = fit_started.elapsed().as_secs_f64();

    let phase2_started = Instant::now();
    let assignments = phase2::extract_assignments(&fitted.weights);
    let phase2_result = phase2::long_term_clusters(&assignments, phase2_config)
        .map_err(|e| Error::staged("phase2", e))?;
    let long_term_paths = phase2::long_term_center_paths(&x, &phase2_result.partition)
        .map_err(|e| Error::staged("phase2", e))?;
    let phase2_s = phase2_started.elapsed().as_secs_f64();

    let metrics_started = Instant::now();
    let scores = match &ground_truth {
        Some(gt) => Some(MetricScores {
            total_ami: metrics::total_ami(&assignments, gt)
                .map_err(|e| Error::staged("metrics", e))?,
            long_term_ami: metrics::long_term_ami(&phase2_result.partition, gt)
                .map_err(|e| Error::staged("metrics", e))?,
        }),
        None => None,
    };
    let metrics_s = metrics_started.elapsed().as_secs_f64();

    let write_started = Instant::now();
    fs::create_dir_all(out_dir)?;
    save_labeled_positions(&out_dir.join("points.csv"), &x, &assignments)
        .map_err(|e| Error::staged("write", e))?;
    save_center_paths(&out_dir.join("centers.csv"), x.timestamps(), &fitted.centers)
        .map_err(|e| Error::staged("write", e))?;
    save_center_paths(
        &out_dir.join("long_term_centers.csv"),
        x.timestamps(),
        &long_term_paths,
    )
    .map_err(|e| Error::staged("write", e))?;
    save_trace(&out_dir.join("trace.csv"), &fitted.objective_trace)
        .map_err(|e| Error::staged("write", e))?;
    save_assignments(
        &out_dir.join("assignments.csv"),
        x.point_ids(),
        x.timestamps(),
        &assignments,
    )
    .map_err(|e| Error::staged("write", e))?;
    save_partition(
        &out_dir.join("partition.csv"),
        x.point_ids(),
        &phase2_result.partition,
    )
    .map_err(|e| Error::staged("write", e))?;

    let mut record = RunRecord {
        dataset: data_path.display().to_string(),
        interval,
        solver: solver_config.clone(),
        phase2: phase2_config.clone(),
        fit: FitSummary {
            iterations: fitted.iterations,
            final_objective: *fitted
                .objective_trace
                .last()
                .expect("trace has the initial value"),
            converged: fitted.converged,
        },
        objective_trace: fitted.objective_trace.clone(),
        theta: phase2_result.theta,
        point_ids: x.point_ids().to_vec(),
        partition: phase2_result.partition.labels().to_vec(),
        assignment_history: history_to_rows(&assignments),
        centers: centers_to_nested(&fitted.centers),
        metrics: scores,
        timings: StageTimings::default(),
    };
    record.timings = StageTimings {
        load_s,
        fit_s,
        phase2_s,
        metrics_s,
        write_s: write_started.elapsed().as_secs_f64(),
    };
    let json = serde_json::to_string_pretty(&record)
        .map_err(|e| Error::staged("write", Error::InvalidConfig(e.to_string())))?;
    let mut file = fs::File::create(out_dir.join("run_record.json"))?;
    file.write_all(json.as_bytes())?;
    file.write_all(b"\n")?;
    Ok(record)
}

// ── sweep ────────────────────────────────────────────────────────────────────

/// One row of the sweep log.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRun {
    pub dataset: String,
    pub lambda: f64,
    pub size: Option<usize>,
    pub total_ami: Option<f64>,
    pub long_term_ami: Option<f64>,
    pub error: Option<String>,
}

/// Aggregate scores for one dataset-size bucket.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BucketRow {
    pub bucket_lo: usize,
    /// Exclusive upper edge; `None` for the last, unbounded bucket.
    pub bucket_hi: Option<usize>,
    pub runs: usize,
    pub avg_total_ami: f64,
    pub median_total_ami: f64,
    pub avg_long_term_ami: f64,
    pub median_long_term_ami: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepSummary {
    pub runs: Vec<SweepRun>,
    pub buckets: Vec<BucketRow>,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Run the pipeline for every `(dataset, lambda)` combination and aggregate
/// median and average total/long-term AMI per dataset-size bucket (size is
/// `T * N`). `k` and `k_target` are taken from each dataset's ground truth.
/// Per-run failures are recorded and the sweep continues.
pub fn sweep(
    datasets: &[(PathBuf, PathBuf)],
    lambdas: &[f64],
    interval: Option<f64>,
    base_solver: &SolverConfig,
    phase2_options: &Phase2Options,
    bucket_edges: &[usize],
    out_dir: &Path,
) -> Result<SweepSummary> {
    fs::create_dir_all(out_dir)?;
    let mut runs = Vec::new();
    for (data_path, gt_path) in datasets {
        for &lambda in lambdas {
            let run_name = format!(
                "{}_lambda{}",
                data_path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "dataset".to_string()),
                lambda
            );
            let outcome = (|| -> Result<(usize, RunRecord)> {
                let x = load_trajectories(data_path, interval)?;
                let gt = load_ground_truth(gt_path, x.point_ids())?;
                let k = gt.n_clusters().max(1);
                let mut solver_config = base_solver.clone();
                solver_config.k = k;
                solver_config.lambda = lambda;
                let phase2_config = phase2_options.to_config(k);
                let record = run_pipeline(
                    data_path,
                    Some(gt_path),
                    interval,
                    &solver_config,
                    &phase2_config,
                    &out_dir.join(&run_name),
                )?;
                Ok((x.n_steps() * x.n_points(), record))
            })();
            match outcome {
                Ok((size, record)) => {
                    let scores = record.metrics.expect("ground truth was supplied");
                    runs.push(SweepRun {
                        dataset: data_path.display().to_string(),
                        lambda,
                        size: Some(size),
                        total_ami: Some(scores.total_ami),
                        long_term_ami: Some(scores.long_term_ami),
                        error: None,
                    });
                }
                Err(e) => runs.push(SweepRun {
                    dataset: data_path.display().to_string(),
                    lambda,
                    size: None,
                    total_ami: None,
                    long_term_ami: None,
                    error: Some(e.to_string()),
                }),
            }
        }
    }

    // Bucket successful runs by dataset size.
    let mut edges: Vec<usize> = bucket_edges.to_vec();
    edges.sort_unstable();
    edges.dedup();
    let bucket_of = |size: usize| -> usize {
        edges.iter().position(|&e| size < e).unwrap_or(edges.len())
    };
    let mut buckets = Vec::new();
    for b in 0..=edges.len() {
        let members: Vec<&SweepRun> = runs
            .iter()
            .filter(|r| r.size.is_some_and(|s| bucket_of(s) == b))
            .collect();
        if members.is_empty() {
            continue;
        }
        let mut totals: Vec<f64> = members.iter().filter_map(|r| r.total_ami).collect();
        let mut longs: Vec<f64> = members.iter().filter_map(|r| r.long_term_ami).collect();
        let n = members.len();
        buckets.push(BucketRow {
            bucket_lo: if b == 0 { 0 } else { edges[b - 1] },
            bucket_hi: edges.get(b).copied(),
            runs: n,
            avg_total_ami: totals.iter().sum::<f64>() / n as f64,
            median_total_ami: median(&mut totals),
            avg_long_term_ami: longs.iter().sum::<f64>() / n as f64,
            median_long_term_ami: median(&mut longs),
        });
    }

    // Persist the flat tables.
    let mut runs_csv = String::from("dataset,lambda,size,total_ami,long_term_ami,error\n");
    for r in &runs {
        runs_csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.dataset,
            r.lambda,
            r.size.map_or(String::new(), |v| v.to_string()),
            r.total_ami.map_or(String::new(), format_value),
            r.long_term_ami.map_or(String::new(), format_value),
            r.error.clone().unwrap_or_default().replace(',', ";"),
        ));
    }
    fs::write(out_dir.join("runs.csv"), runs_csv)?;
    let mut agg = String::from(
        "bucket_lo,bucket_hi,runs,avg_total_ami,median_total_ami,avg_long_term_ami,median_long_term_ami\n",
    );
    for b in &buckets {
        agg.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            b.bucket_lo,
            b.bucket_hi.map_or(String::new(), |v| v.to_string()),
            b.runs,
            format_value(b.avg_total_ami),
            format_value(b.median_total_ami),
            format_value(b.avg_long_term_ami),
            format_value(b.median_long_term_ami),
        ));
    }
    fs::write(out_dir.join("aggregate.csv"), agg)?;
    Ok(SweepSummary { runs, buckets })
}
