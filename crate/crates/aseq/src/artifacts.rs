//! On-disk formats: Q-table and network JSON, learning-curve and trace CSV,
//! metrics JSON, comparison tables and the run manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use aseq_core::episode::Trace;
use aseq_core::metrics::MetricsReport;
use aseq_core::qlearn::{BinEdges, DiscreteStateKey, QTable};
use aseq_core::tom::{BeliefNetwork, LabeledEpisode};
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::{AppError, AppResult};

pub const QTABLE_FORMAT: &str = "aseq-qtable";
pub const QTABLE_VERSION: u32 = 1;

/// Serialized Q-table with the metadata needed to use it safely.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QTableFile {
    pub format: String,
    pub version: u32,
    pub bins: BinEdges,
    pub actions: Vec<f64>,
    pub rows: Vec<QRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QRow {
    pub key: DiscreteStateKey,
    pub q: Vec<f64>,
    pub visits: Vec<u32>,
}

impl QTableFile {
    pub fn new(table: &QTable, bins: &BinEdges, actions: &[f64]) -> Self {
        QTableFile {
            format: QTABLE_FORMAT.into(),
            version: QTABLE_VERSION,
            bins: bins.clone(),
            actions: actions.to_vec(),
            rows: table
                .entries()
                .map(|(k, q, v)| QRow {
                    key: *k,
                    q: q.clone(),
                    visits: v.clone(),
                })
                .collect(),
        }
    }
}

fn write_text(path: &Path, text: &str) -> AppResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| AppError::io(path, e))
}

fn read_text(path: &Path) -> AppResult<String> {
    fs::read_to_string(path).map_err(|e| AppError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> AppResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| AppError::format(path, e))?;
    text.push('\n');
    write_text(path, &text)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> AppResult<T> {
    serde_json::from_str(&read_text(path)?).map_err(|e| AppError::format(path, e))
}

pub fn write_qtable(path: &Path, table: &QTable, bins: &BinEdges, actions: &[f64]) -> AppResult<()> {
    write_json(path, &QTableFile::new(table, bins, actions))
}

/// Loads a table and checks it was trained with the given bins and actions.
pub fn read_qtable(path: &Path, bins: &BinEdges, actions: &[f64]) -> AppResult<QTable> {
    let file: QTableFile = read_json(path)?;
    let mismatch = |message: String| AppError::MetadataMismatch {
        path: path.to_path_buf(),
        message,
    };
    if file.format != QTABLE_FORMAT || file.version != QTABLE_VERSION {
        return Err(mismatch(format!(
            "expected {QTABLE_FORMAT} version {QTABLE_VERSION}, found {} version {}",
            file.format, file.version
        )));
    }
    if &file.bins != bins {
        return Err(mismatch(format!("table bins {:?} differ from configured bins {:?}", file.bins, bins)));
    }
    if file.actions != actions {
        return Err(mismatch(format!("table actions {:?} differ from configured actions {:?}", file.actions, actions)));
    }
    let mut table = QTable::new(actions.len());
    for row in file.rows {
        table.insert_row(row.key, row.q, row.visits).map_err(|e| AppError::format(path, e))?;
    }
    Ok(table)
}

pub fn write_network(path: &Path, bn: &BeliefNetwork) -> AppResult<()> {
    write_json(path, bn)
}

pub fn read_network(path: &Path) -> AppResult<BeliefNetwork> {
    read_json(path)
}

/// `episode,mean_reward`, episodes counted from 1.
pub fn curve_csv(curve: &[f64]) -> String {
    let mut out = String::from("episode,mean_reward\n");
    for (i, r) in curve.iter().enumerate() {
        writeln!(out, "{},{}", i + 1, r).unwrap();
    }
    out
}

pub fn write_curve(path: &Path, curve: &[f64]) -> AppResult<()> {
    write_text(path, &curve_csv(curve))
}

pub fn read_curve(path: &Path) -> AppResult<Vec<f64>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| AppError::format(path, e))?;
    rdr.records()
        .map(|rec| {
            let rec = rec.map_err(|e| AppError::format(path, e))?;
            rec.get(1)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| AppError::format(path, "bad mean_reward field"))
        })
        .collect()
}

pub const TRACE_HEADER: [&str; 15] = [
    "t", "x1", "y1", "v1", "a1", "x2", "y2", "v2", "a2", "ttc", "dist", "w_s", "r_tom", "r_game", "r_total",
];

/// Trace CSV. Vehicle 1 is the target, vehicle 2 the ego; `a` is the
/// acceleration applied over the following step.
pub fn trace_csv(trace: &Trace) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TRACE_HEADER).unwrap();
    for r in &trace.rows {
        let d = &r.diagnostics;
        let fields = [
            r.t,
            r.target.x,
            r.target.y,
            r.target.speed(),
            r.a_target,
            r.ego.x,
            r.ego.y,
            r.ego.speed(),
            r.a_ego,
            r.ttc,
            r.dist,
            d.w_s,
            d.r_tom,
            d.r_game,
            d.r_total,
        ];
        w.write_record(fields.iter().map(|v| v.to_string())).unwrap();
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}

pub fn write_trace(path: &Path, trace: &Trace) -> AppResult<()> {
    write_text(path, &trace_csv(trace))
}

/// Metrics as written to JSON; infinities become `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsFile {
    pub case: String,
    pub seed: Option<u64>,
    pub crossing_time: Option<f64>,
    pub min_speed: f64,
    pub comfort_index: f64,
    pub mean_abs_jerk: f64,
    pub min_distance: Option<f64>,
    pub collided: bool,
    pub partial: bool,
}

impl MetricsFile {
    pub fn new(case: &str, seed: Option<u64>, m: &MetricsReport) -> Self {
        MetricsFile {
            case: case.into(),
            seed,
            crossing_time: m.crossing_time,
            min_speed: m.min_speed,
            comfort_index: m.comfort_index,
            mean_abs_jerk: m.mean_abs_jerk,
            min_distance: m.min_distance.is_finite().then_some(m.min_distance),
            collided: m.collided,
            partial: m.partial,
        }
    }
}

/// Per-case aggregate over evaluation seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseSummary {
    pub case: String,
    pub runs: usize,
    pub collisions: usize,
    pub mean_crossing_time: Option<f64>,
    pub mean_min_speed: f64,
    pub mean_comfort_index: f64,
    pub min_distance: Option<f64>,
}

impl CaseSummary {
    pub fn from_metrics(case: &str, metrics: &[MetricsReport]) -> Self {
        let n = metrics.len().max(1) as f64;
        let crossed: Vec<f64> = metrics.iter().filter_map(|m| m.crossing_time).collect();
        let min_distance = metrics.iter().map(|m| m.min_distance).fold(f64::INFINITY, f64::min);
        CaseSummary {
            case: case.into(),
            runs: metrics.len(),
            collisions: metrics.iter().filter(|m| m.collided).count(),
            mean_crossing_time: (!crossed.is_empty()).then(|| crossed.iter().sum::<f64>() / crossed.len() as f64),
            mean_min_speed: metrics.iter().map(|m| m.min_speed).sum::<f64>() / n,
            mean_comfort_index: metrics.iter().map(|m| m.comfort_index).sum::<f64>() / n,
            min_distance: min_distance.is_finite().then_some(min_distance),
        }
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

pub fn comparison_csv(rows: &[CaseSummary]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["case", "runs", "collisions", "mean_crossing_time", "mean_min_speed", "mean_comfort_index", "min_distance"])
        .unwrap();
    for r in rows {
        w.write_record([
            r.case.clone(),
            r.runs.to_string(),
            r.collisions.to_string(),
            opt(r.mean_crossing_time),
            r.mean_min_speed.to_string(),
            r.mean_comfort_index.to_string(),
            opt(r.min_distance),
        ])
        .unwrap();
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}

/// Fixed-width text rendering of the comparison table.
pub fn comparison_text(rows: &[CaseSummary]) -> String {
    let fmt = |v: Option<f64>, digits: usize| v.map_or_else(|| "-".to_string(), |x| format!("{x:.digits$}"));
    let mut out = format!(
        "{:<11} {:>5} {:>10} {:>10} {:>10} {:>8} {:>10}\n",
        "case", "runs", "collisions", "cross (s)", "vmin (m/s)", "comfort", "dmin (m)"
    );
    for r in rows {
        writeln!(
            out,
            "{:<11} {:>5} {:>10} {:>10} {:>10.3} {:>8.3} {:>10}",
            r.case,
            r.runs,
            r.collisions,
            fmt(r.mean_crossing_time, 3),
            r.mean_min_speed,
            r.mean_comfort_index,
            fmt(r.min_distance, 3)
        )
        .unwrap();
    }
    out
}

pub fn write_corpus(path: &Path, corpus: &[LabeledEpisode]) -> AppResult<()> {
    write_json(path, &corpus)
}

/// Reads every `*.json` corpus file of a directory (sorted by name, the
/// manifest excluded) or a single file.
pub fn read_corpus(path: &Path) -> AppResult<Vec<LabeledEpisode>> {
    if path.is_file() {
        return read_json(path);
    }
    let mut files: Vec<PathBuf> = fs::read_dir(path)
        .map_err(|e| AppError::io(path, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json") && p.file_name().is_some_and(|n| n != MANIFEST_NAME))
        .collect();
    files.sort();
    let mut out = Vec::new();
    for f in files {
        out.extend(read_json::<Vec<LabeledEpisode>>(&f)?);
    }
    Ok(out)
}

/// Provenance of one output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub code_version: String,
    pub output_dir: PathBuf,
    /// Seconds since the Unix epoch.
    pub started: u64,
    pub finished: u64,
}

pub const MANIFEST_NAME: &str = "manifest.json";

pub fn unix_now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}
