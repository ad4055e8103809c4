//! Run artifacts: `metrics.csv`, `summary.json` and `config.echo`.

use std::io::Write;
use std::path::{Path, PathBuf};

use super::pipeline::RunReport;
use crate::error::{IglError, Result};
use crate::online::EpisodeMetrics;

pub const METRICS_FILE: &str = "metrics.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const CONFIG_ECHO_FILE: &str = "config.echo";
/// Written in the decoded-reward column of episodes that skipped the oracle update.
pub const FILTERED_SENTINEL: &str = "NA";

const METRICS_HEADER: [&str; 7] = [
    "episode",
    "context",
    "terminal_state",
    "true_reward",
    "decoded_reward",
    "policy_value",
    "cumulative_regret",
];

pub fn write_metrics<W: Write>(writer: W, metrics: &[EpisodeMetrics]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let wrap = |e: csv::Error| IglError::Io {
        path: PathBuf::from("<metrics stream>"),
        source: e.into(),
    };
    w.write_record(METRICS_HEADER).map_err(wrap)?;
    for m in metrics {
        let decoded = m
            .decoded_reward
            .map_or_else(|| FILTERED_SENTINEL.to_string(), |r| r.to_string());
        w.write_record([
            m.episode.to_string(),
            m.context.to_string(),
            m.terminal_state.to_string(),
            u8::from(m.true_reward).to_string(),
            decoded,
            m.policy_value.to_string(),
            m.cumulative_regret.to_string(),
        ])
        .map_err(wrap)?;
    }
    w.flush().map_err(|e| IglError::io("<metrics stream>", e))
}

/// Parses a stream written by [`write_metrics`].
pub fn read_metrics<R: std::io::Read>(reader: R) -> Result<Vec<EpisodeMetrics>> {
    let bad = |msg: String| IglError::InvalidArgument(format!("malformed metrics row: {msg}"));
    let mut out = Vec::new();
    for row in csv::Reader::from_reader(reader).records() {
        let row = row.map_err(|e| bad(e.to_string()))?;
        if row.len() != METRICS_HEADER.len() {
            return Err(bad(format!("{} fields", row.len())));
        }
        let num = |i: usize| {
            row[i]
                .parse::<f64>()
                .map_err(|e| bad(format!("{}: {e}", METRICS_HEADER[i])))
        };
        let int = |i: usize| {
            row[i]
                .parse::<usize>()
                .map_err(|e| bad(format!("{}: {e}", METRICS_HEADER[i])))
        };
        out.push(EpisodeMetrics {
            episode: int(0)?,
            context: int(1)?,
            terminal_state: int(2)?,
            true_reward: int(3)? == 1,
            decoded_reward: if &row[4] == FILTERED_SENTINEL {
                None
            } else {
                Some(num(4)?)
            },
            policy_value: num(5)?,
            cumulative_regret: num(6)?,
        });
    }
    Ok(out)
}

/// Writes the three run artifacts into `dir`, creating it if needed and
/// overwriting earlier files.
pub fn emit_metrics(report: &RunReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| IglError::io(dir, e))?;
    let path = dir.join(METRICS_FILE);
    let file = std::fs::File::create(&path).map_err(|e| IglError::io(&path, e))?;
    write_metrics(std::io::BufWriter::new(file), &report.metrics).map_err(|e| with_path(e, &path))?;

    let path = dir.join(SUMMARY_FILE);
    let json = serde_json::to_string_pretty(report).map_err(|e| IglError::InvalidArgument(e.to_string()))?;
    std::fs::write(&path, json + "\n").map_err(|e| IglError::io(&path, e))?;

    let path = dir.join(CONFIG_ECHO_FILE);
    std::fs::write(&path, report.config.to_toml_string()?).map_err(|e| IglError::io(&path, e))
}

fn with_path(e: IglError, path: &Path) -> IglError {
    match e {
        IglError::Io { source, .. } => IglError::io(path, source),
        other => other,
    }
}
