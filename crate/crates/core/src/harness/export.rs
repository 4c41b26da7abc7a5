use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::metrics::{aggregate, AggregateRow, EpisodeMetrics};
use super::run::{write_file, Failure, RunRecord, StudyResult};
use crate::error::{Error, Result};
use crate::mappo::config_hash;

pub const EPISODES_CSV: &str = "episodes.csv";
pub const SUMMARY_CSV: &str = "summary.csv";
pub const CONFIG_SNAPSHOT: &str = "config.toml";
pub const RUN_MANIFEST: &str = "run_manifest.json";

pub const EPISODE_HEADER: [&str; 14] = [
    "study",
    "scenario",
    "method",
    "label",
    "agents",
    "seed",
    "episode",
    "reward",
    "emv_speed",
    "av_speed",
    "collisions",
    "mean_risk",
    "emv_risk",
    "safety_distance",
];

pub const SUMMARY_HEADER: [&str; 20] = [
    "study",
    "scenario",
    "method",
    "label",
    "agents",
    "episodes",
    "reward_mean",
    "reward_std",
    "emv_speed_mean",
    "emv_speed_std",
    "av_speed_mean",
    "av_speed_std",
    "collisions_mean",
    "collisions_std",
    "mean_risk_mean",
    "mean_risk_std",
    "emv_risk_mean",
    "emv_risk_std",
    "safety_distance_mean",
    "safety_distance_std",
];

fn write_csv<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    study: &'a str,
    code_version: &'a str,
    seeds: &'a [u64],
    config_sha256: String,
    started_unix: u64,
    finished_unix: u64,
    files: Vec<String>,
    runs: &'a [RunRecord],
    failures: &'a [Failure],
}

/// Writes the per-episode and aggregate tables, the resolved config, the
/// per-count learning curves of a scalability study and a run manifest.
/// Returns the paths written.
pub fn export_results(result: &StudyResult, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();

    let path = dir.join(EPISODES_CSV);
    write_csv(&path, &EPISODE_HEADER, &result.episodes)?;
    files.push(path);

    let path = dir.join(SUMMARY_CSV);
    write_csv::<AggregateRow>(&path, &SUMMARY_HEADER, &aggregate(&result.episodes))?;
    files.push(path);

    let path = dir.join(CONFIG_SNAPSHOT);
    write_file(&path, result.config.to_toml()?.as_bytes())?;
    files.push(path);

    files.extend(write_learning_curves(&result.runs, dir)?);

    let names: Vec<String> = files
        .iter()
        .filter_map(|p| p.strip_prefix(dir).ok())
        .map(|p| p.to_string_lossy().into_owned())
        .collect();
    let manifest = Manifest {
        study: &result.study,
        code_version: env!("CARGO_PKG_VERSION"),
        seeds: &result.config.experiment.seeds,
        config_sha256: config_hash(&result.config)?,
        started_unix: result.started_unix,
        finished_unix: result.finished_unix,
        files: names,
        runs: &result.runs,
        failures: &result.failures,
    };
    let path = dir.join(RUN_MANIFEST);
    write_file(&path, serde_json::to_string_pretty(&manifest)?.as_bytes())?;
    files.push(path);
    Ok(files)
}

/// One wide file per run label: summed reward per seed and their mean.
fn write_learning_curves(runs: &[RunRecord], dir: &Path) -> Result<Vec<PathBuf>> {
    let mut by_label: BTreeMap<&str, Vec<&RunRecord>> = BTreeMap::new();
    for r in runs.iter().filter(|r| !r.curve.is_empty()) {
        by_label.entry(r.label.as_str()).or_default().push(r);
    }
    let mut files = Vec::new();
    for (label, group) in by_label {
        let name = if label.is_empty() { "mappo" } else { label };
        let path = dir.join(format!("learning_curve_{name}.csv"));
        let mut w = csv::Writer::from_path(&path)?;
        let mut header = vec!["iteration".to_string()];
        header.extend(group.iter().map(|r| format!("seed_{}", r.seed)));
        header.push("mean".into());
        w.write_record(&header)?;
        let len = group.iter().map(|r| r.curve.len()).min().unwrap_or(0);
        for i in 0..len {
            let values: Vec<f64> = group.iter().map(|r| r.curve[i].summed_reward).collect();
            let mut row = vec![i.to_string()];
            row.extend(values.iter().map(|v| v.to_string()));
            row.push((values.iter().sum::<f64>() / values.len() as f64).to_string());
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        files.push(path);
    }
    Ok(files)
}

/// Reads a per-episode CSV written by [`export_results`].
pub fn read_episodes(path: &Path) -> Result<Vec<EpisodeMetrics>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<Vec<_>, _>>()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::{ExperimentConfig, Method, Scenario};

    fn result(n: usize) -> StudyResult {
        let episodes = (0..n)
            .map(|e| EpisodeMetrics {
                study: "compare".into(),
                scenario: Scenario::Road,
                method: Method::Gipps,
                label: String::new(),
                agents: 10,
                seed: (e / 10) as u64,
                episode: e % 10,
                reward: 100.0 + e as f64 * 0.1,
                emv_speed: 19.0 + (e as f64).sin(),
                av_speed: 15.0,
                collisions: e % 3,
                mean_risk: 0.1 * (e % 4) as f64,
                emv_risk: 0.05,
                safety_distance: 12.5,
            })
            .collect();
        StudyResult {
            study: "compare".into(),
            config: ExperimentConfig::default(),
            episodes,
            runs: Vec::new(),
            failures: Vec::new(),
            started_unix: 1,
            finished_unix: 2,
        }
    }

    #[test]
    fn header_matches_serialised_fields() {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.serialize(&result(1).episodes[0]).unwrap();
        let text = String::from_utf8(w.into_inner().unwrap()).unwrap();
        assert_eq!(text.lines().next().unwrap(), EPISODE_HEADER.join(","));
        let mut w = csv::Writer::from_writer(Vec::new());
        w.serialize(&aggregate(&result(1).episodes)[0]).unwrap();
        let text = String::from_utf8(w.into_inner().unwrap()).unwrap();
        assert_eq!(text.lines().next().unwrap(), SUMMARY_HEADER.join(","));
    }

    #[test]
    fn empty_result_gives_header_only() {
        let dir = tempfile::tempdir().unwrap();
        export_results(&result(0), dir.path()).unwrap();
        let text = fs::read_to_string(dir.path().join(EPISODES_CSV)).unwrap();
        assert_eq!(text, format!("{}\n", EPISODE_HEADER.join(",")));
    }

    #[test]
    fn row_count_and_byte_stability() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let res = result(20);
        export_results(&res, a.path()).unwrap();
        export_results(&res, b.path()).unwrap();
        for f in [EPISODES_CSV, SUMMARY_CSV, CONFIG_SNAPSHOT, RUN_MANIFEST] {
            assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
        }
        let rows = read_episodes(&a.path().join(EPISODES_CSV)).unwrap();
        assert_eq!(rows.len(), 20);
        assert_eq!(rows, res.episodes);
    }

    #[test]
    fn summary_recomputes_exactly() {
        let dir = tempfile::tempdir().unwrap();
        export_results(&result(20), dir.path()).unwrap();
        let rows = read_episodes(&dir.path().join(EPISODES_CSV)).unwrap();
        let xs: Vec<f64> = rows.iter().map(|r| r.emv_speed).collect();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let std = (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt();
        let mut r = csv::Reader::from_path(dir.path().join(SUMMARY_CSV)).unwrap();
        let agg: Vec<AggregateRow> = r.deserialize().collect::<std::result::Result<_, _>>().unwrap();
        assert_eq!(agg[0].emv_speed_mean, mean);
        assert_eq!(agg[0].emv_speed_std, std);
    }

    #[test]
    fn unwritable_directory_reports_path() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, b"x").unwrap();
        let err = export_results(&result(1), &blocker.join("sub")).unwrap_err();
        assert!(err.to_string().contains("file"), "{err}");
    }
}
