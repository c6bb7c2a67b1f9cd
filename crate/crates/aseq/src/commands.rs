//! Subcommand implementations. Each one writes into its own output
//! directory and finishes by writing the run manifest there.

use std::fs;
use std::path::{Path, PathBuf};

use aseq_core::metrics::MetricsReport;
use aseq_core::qlearn::QTable;
use aseq_core::scenarios::{describe, make_case_with, run_case, CaseId, CaseRun};
use aseq_core::tom::malice::is_malice_network;
use aseq_core::tom::{fit_cpts, BeliefNetwork};
use aseq_core::training::{collect_corpus, train};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::artifacts::{self, CaseSummary, MetricsFile, RunManifest, MANIFEST_NAME};
use crate::config::{load_config, RunConfig};
use crate::error::{AppError, AppResult};
use crate::plot;

pub const QTABLE_FILE: &str = "qtable.json";
pub const CURVE_FILE: &str = "curve.csv";
pub const TRACE_FILE: &str = "trace.csv";
pub const METRICS_FILE: &str = "metrics.json";
pub const SPEED_PLOT: &str = "speed.svg";
pub const DISTANCE_PLOT: &str = "distance.svg";
pub const NETWORK_FILE: &str = "network.json";
pub const CORPUS_FILE: &str = "corpus.json";
pub const SEEDS_FILE: &str = "seeds.csv";
pub const COMPARISON_CSV: &str = "comparison.csv";
pub const COMPARISON_TXT: &str = "comparison.txt";

/// Config and the directory its relative paths resolve against.
fn config_or_default(path: Option<&Path>) -> AppResult<(RunConfig, PathBuf)> {
    match path {
        Some(p) => {
            let base = p.parent().map(Path::to_path_buf).unwrap_or_default();
            Ok((load_config(p)?, base))
        }
        None => Ok((RunConfig::default(), PathBuf::from("."))),
    }
}

fn create_dir(out: &Path) -> AppResult<()> {
    fs::create_dir_all(out).map_err(|e| AppError::io(out, e))
}

fn write_manifest(out: &Path, command: &str, args: Vec<String>, config: Option<&Path>, seed: Option<u64>, started: u64) -> AppResult<()> {
    let manifest = RunManifest {
        command: command.into(),
        args,
        config: config.map(Path::to_path_buf),
        seed,
        code_version: env!("CARGO_PKG_VERSION").into(),
        output_dir: out.to_path_buf(),
        started,
        finished: artifacts::unix_now(),
    };
    artifacts::write_json(&out.join(MANIFEST_NAME), &manifest)
}

pub struct TrainOutput {
    pub table: QTable,
    pub curve: Vec<f64>,
}

/// Trains a table, optionally continuing from `init`, and writes the table,
/// the learning curve and the manifest.
pub fn train_cmd(config: Option<&Path>, seed: u64, out: &Path, init: Option<&Path>) -> AppResult<TrainOutput> {
    let started = artifacts::unix_now();
    let (cfg, base) = config_or_default(config)?;
    let decider = cfg.decider();
    let network = cfg.network(&base)?;
    let initial = init
        .map(|p| artifacts::read_qtable(p, &decider.bins, &decider.ego_actions))
        .transpose()?;
    if cfg.learner.episodes == 0 {
        eprintln!("warning: episodes = 0, writing an empty learning curve");
    }
    let (table, curve) = train(&decider, &network, cfg.scenario, &cfg.learner, seed, initial)?;
    create_dir(out)?;
    artifacts::write_qtable(&out.join(QTABLE_FILE), &table, &decider.bins, &decider.ego_actions)?;
    artifacts::write_curve(&out.join(CURVE_FILE), &curve)?;
    let mut args = vec!["--seed".to_string(), seed.to_string()];
    if let Some(p) = init {
        args.extend(["--init".into(), p.display().to_string()]);
    }
    write_manifest(out, "train", args, config, Some(seed), started)?;
    Ok(TrainOutput { table, curve })
}

/// The decider a case runs with under `cfg`, and the network it uses.
pub fn case_setup(id: CaseId, cfg: &RunConfig, base: &Path) -> AppResult<(aseq_core::scenarios::Case, BeliefNetwork)> {
    Ok((make_case_with(id, cfg.decider()), cfg.network(base)?))
}

/// Runs one case and writes its trace, metrics and plots. A collision is
/// reported as an error after all artifacts are written.
pub fn run_case_cmd(id: CaseId, qtable: Option<&Path>, config: Option<&Path>, seed: Option<u64>, out: &Path) -> AppResult<CaseRun> {
    let started = artifacts::unix_now();
    let (cfg, base) = config_or_default(config)?;
    let (case, network) = case_setup(id, &cfg, &base)?;
    let table = qtable
        .map(|p| artifacts::read_qtable(p, &case.decider.bins, &case.decider.ego_actions))
        .transpose()?;
    let run = run_case(&case, &network, table.as_ref(), seed)?;
    create_dir(out)?;
    artifacts::write_trace(&out.join(TRACE_FILE), &run.trace)?;
    artifacts::write_json(&out.join(METRICS_FILE), &MetricsFile::new(id.name(), seed, &run.metrics))?;
    let title = format!("case {id}: ego speed");
    write_text(&out.join(SPEED_PLOT), &plot::speed_svg(&title, &run.trace))?;
    if matches!(id, CaseId::D25 | CaseId::D50) {
        let title = format!("case {id}: distance between vehicles");
        write_text(&out.join(DISTANCE_PLOT), &plot::distance_svg(&title, &run.trace))?;
    }
    let mut args = vec!["--case".to_string(), id.name().to_string()];
    if let Some(p) = qtable {
        args.extend(["--qtable".into(), p.display().to_string()]);
    }
    write_manifest(out, "run-case", args, config, seed, started)?;
    if run.metrics.collided {
        return Err(AppError::Collision(format!("case {id} collided ({})", describe(&case))));
    }
    Ok(run)
}

fn write_text(path: &Path, text: &str) -> AppResult<()> {
    fs::write(path, text).map_err(|e| AppError::io(path, e))
}

/// Runs a case over `seeds` jittered starts (seeds `0..seeds`) without
/// writing anything.
pub fn evaluate(id: CaseId, cfg: &RunConfig, base: &Path, table: Option<&QTable>, seeds: u64) -> AppResult<Vec<MetricsReport>> {
    let (case, network) = case_setup(id, cfg, base)?;
    (0..seeds)
        .into_par_iter()
        .map(|s| Ok(run_case(&case, &network, table, Some(s))?.metrics))
        .collect()
}

/// Fits the malice network to a corpus and writes it.
pub fn fit_tom_cmd(corpus: &Path, out: &Path) -> AppResult<BeliefNetwork> {
    let started = artifacts::unix_now();
    let episodes = artifacts::read_corpus(corpus)?;
    let bn = fit_cpts(&episodes)?;
    let file = if out.extension().is_some_and(|x| x == "json") {
        out.to_path_buf()
    } else {
        create_dir(out)?;
        out.join(NETWORK_FILE)
    };
    if let Some(dir) = file.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    artifacts::write_network(&file, &bn)?;
    let dir = file.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    write_manifest(dir, "fit-tom", vec!["--corpus".into(), corpus.display().to_string()], None, None, started)?;
    Ok(bn)
}

/// Generates a labeled corpus from scripted episodes.
pub fn corpus_cmd(config: Option<&Path>, seed: u64, episodes: usize, out: &Path) -> AppResult<usize> {
    let started = artifacts::unix_now();
    let (cfg, _) = config_or_default(config)?;
    let corpus = collect_corpus(&cfg.scenario, &cfg.decider(), episodes, seed)?;
    create_dir(out)?;
    artifacts::write_corpus(&out.join(CORPUS_FILE), &corpus)?;
    write_manifest(out, "corpus", vec!["--episodes".into(), episodes.to_string()], config, Some(seed), started)?;
    Ok(corpus.len())
}

/// Printable summary of a network: each node with its CPT rows.
pub fn network_summary(bn: &BeliefNetwork) -> String {
    let mut out = String::new();
    if is_malice_network(bn) {
        out.push_str("malice network\n");
    }
    for node in bn.nodes() {
        let parents: Vec<&str> = node.parents.iter().map(|&p| bn.nodes()[p].variable.name.as_str()).collect();
        out.push_str(&format!("{} [{}] | {}\n", node.variable.name, node.variable.states.join(", "), parents.join(", ")));
        for row in node.cpt.chunks(node.variable.cardinality()) {
            let cells: Vec<String> = row.iter().map(|p| format!("{p:.4}")).collect();
            out.push_str(&format!("  {}\n", cells.join(" ")));
        }
    }
    out
}

/// One entry of a batch manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Job {
    Train {
        config: Option<PathBuf>,
        seed: u64,
        out: PathBuf,
        init: Option<PathBuf>,
    },
    /// Runs a case over seeds `0..seeds`; writes per-seed metrics plus the
    /// nominal run's trace and plots.
    RunCase {
        case: String,
        qtable: Option<PathBuf>,
        config: Option<PathBuf>,
        #[serde(default = "one")]
        seeds: u64,
        out: PathBuf,
    },
}

fn one() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchManifest {
    /// Where the comparison table of all run-case jobs goes.
    pub out: PathBuf,
    #[serde(rename = "job")]
    pub jobs: Vec<Job>,
}

pub struct BatchOutput {
    pub summaries: Vec<CaseSummary>,
    /// Failed jobs by index.
    pub failures: Vec<(usize, AppError)>,
}

/// Runs every job of a batch manifest in parallel. Relative paths resolve
/// against the manifest's directory. Output directories must be distinct.
pub fn batch_cmd(manifest: &Path) -> AppResult<BatchOutput> {
    let started = artifacts::unix_now();
    let src = fs::read_to_string(manifest).map_err(|e| AppError::io(manifest, e))?;
    let batch: BatchManifest = toml::from_str(&src).map_err(|e| {
        let (line, column) = e.span().map_or((1, 1), |s| crate::config::line_col(&src, s.start));
        AppError::Config {
            path: manifest.to_path_buf(),
            line,
            column,
            message: e.message().trim().to_string(),
        }
    })?;
    let base = manifest.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut outs: Vec<&PathBuf> = batch
        .jobs
        .iter()
        .map(|j| match j {
            Job::Train { out, .. } | Job::RunCase { out, .. } => out,
        })
        .collect();
    outs.sort();
    if outs.windows(2).any(|w| w[0] == w[1]) {
        return Err(AppError::format(manifest, "jobs must have distinct output directories"));
    }
    // training first, so case jobs can use tables trained in the same batch
    let mut results: Vec<Option<AppResult<Option<CaseSummary>>>> = batch.jobs.iter().map(|_| None).collect();
    for train_phase in [true, false] {
        let phase: Vec<(usize, AppResult<Option<CaseSummary>>)> = batch
            .jobs
            .par_iter()
            .enumerate()
            .filter(|(_, j)| matches!(j, Job::Train { .. }) == train_phase)
            .map(|(i, job)| (i, run_job(job, &base)))
            .collect();
        for (i, r) in phase {
            results[i] = Some(r);
        }
    }
    let results = results.into_iter().map(|r| r.expect("every job ran"));
    let mut summaries = Vec::new();
    let mut failures = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(Some(s)) => summaries.push(s),
            Ok(None) => {}
            Err(e) => failures.push((i, e)),
        }
    }
    let out = base.join(&batch.out);
    create_dir(&out)?;
    write_text(&out.join(COMPARISON_CSV), &artifacts::comparison_csv(&summaries))?;
    write_text(&out.join(COMPARISON_TXT), &artifacts::comparison_text(&summaries))?;
    write_manifest(&out, "batch", vec!["--manifest".into(), manifest.display().to_string()], None, None, started)?;
    Ok(BatchOutput { summaries, failures })
}

fn run_job(job: &Job, base: &Path) -> AppResult<Option<CaseSummary>> {
    let resolve = |p: &Option<PathBuf>| p.as_ref().map(|p| base.join(p));
    match job {
        Job::Train { config, seed, out, init } => {
            train_cmd(resolve(config).as_deref(), *seed, &base.join(out), resolve(init).as_deref())?;
            Ok(None)
        }
        Job::RunCase {
            case,
            qtable,
            config,
            seeds,
            out,
        } => {
            let id: CaseId = case.parse()?;
            let out = base.join(out);
            let config = resolve(config);
            let qtable = resolve(qtable);
            let (cfg, cfg_base) = config_or_default(config.as_deref())?;
            let (case_cfg, _) = case_setup(id, &cfg, &cfg_base)?;
            let table = qtable
                .as_deref()
                .map(|p| artifacts::read_qtable(p, &case_cfg.decider.bins, &case_cfg.decider.ego_actions))
                .transpose()?;
            let metrics = evaluate(id, &cfg, &cfg_base, table.as_ref(), *seeds)?;
            // The nominal run's artifacts; its collision is counted in the summary.
            match run_case_cmd(id, qtable.as_deref(), config.as_deref(), None, &out) {
                Ok(_) | Err(AppError::Collision(_)) => {}
                Err(e) => return Err(e),
            }
            write_text(&out.join(SEEDS_FILE), &seeds_csv(&metrics))?;
            Ok(Some(CaseSummary::from_metrics(id.name(), &metrics)))
        }
    }
}

/// Per-seed metrics, one row per evaluation seed.
pub fn seeds_csv(metrics: &[MetricsReport]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["seed", "crossing_time", "min_speed", "comfort_index", "min_distance", "collided"])
        .unwrap();
    for (i, m) in metrics.iter().enumerate() {
        w.write_record([
            i.to_string(),
            m.crossing_time.map_or_else(String::new, |t| t.to_string()),
            m.min_speed.to_string(),
            m.comfort_index.to_string(),
            if m.min_distance.is_finite() { m.min_distance.to_string() } else { String::new() },
            m.collided.to_string(),
        ])
        .unwrap();
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}

/// Describes an artifact file: a Q-table, a network, a learning curve or a
/// trace.
pub fn inspect(path: &Path) -> AppResult<String> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
    if name.ends_with(".csv") {
        let text = fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
        let rows = text.lines().count().saturating_sub(1);
        let header = text.lines().next().unwrap_or_default();
        return Ok(format!("{}: csv with {rows} rows\ncolumns: {header}\n", path.display()));
    }
    let value: serde_json::Value = artifacts::read_json(path)?;
    if value.get("format").and_then(|f| f.as_str()) == Some(artifacts::QTABLE_FORMAT) {
        let file: artifacts::QTableFile = serde_json::from_value(value).map_err(|e| AppError::format(path, e))?;
        let visits: u64 = file.rows.iter().flat_map(|r| r.visits.iter()).map(|&v| v as u64).sum();
        return Ok(format!(
            "{}: q-table v{}, {} states, {} actions {:?}, {} updates\n",
            path.display(),
            file.version,
            file.rows.len(),
            file.actions.len(),
            file.actions,
            visits
        ));
    }
    if value.get("nodes").is_some() {
        let bn = artifacts::read_network(path)?;
        return Ok(format!("{}: belief network\n{}", path.display(), network_summary(&bn)));
    }
    Ok(format!("{}: json\n{}\n", path.display(), serde_json::to_string_pretty(&value).unwrap_or_default()))
}
