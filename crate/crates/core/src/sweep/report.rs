//! CSV reports for grid runs.
//!
//! Everything except `timings.csv` is a deterministic function of the grid,
//! the data and the seeds.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use super::config::{DimSpec, SweepConfig};
use super::importance::{aliased_pairs, rank_importance};
use super::{GridEntry, SweepResult};
use crate::error::{Error, Result};
use crate::fsutil;
use crate::train::EpochRecord;

pub const RESULTS_HEADER: [&str; 15] = [
    "SN",
    "SqLn",
    "EmSz",
    "Lyrs",
    "OutDim",
    "ActFun",
    "DropOut",
    "BchSz",
    "Loss",
    "Acc%",
    "best_epoch",
    "epochs_run",
    "seq_len",
    "out_dim",
    "error",
];
const HISTORY_HEADER: [&str; 5] = ["SN", "epoch", "train_loss", "val_loss", "val_acc"];
const RANKING_HEADER: [&str; 3] = ["rank", "hyperparameter", "score"];
const LEVELS_HEADER: [&str; 4] = ["hyperparameter", "level", "mean_acc", "count"];
const ALIASES_HEADER: [&str; 2] = ["a", "b"];
const TIMINGS_HEADER: [&str; 2] = ["SN", "wall_time_s"];

#[derive(Debug, Clone)]
pub struct ReportFiles {
    pub results: PathBuf,
    pub history: PathBuf,
    pub ranking: PathBuf,
    pub levels: PathBuf,
    pub aliases: PathBuf,
    pub timings: PathBuf,
}

impl ReportFiles {
    pub fn in_dir(dir: &Path) -> Self {
        ReportFiles {
            results: dir.join("results.csv"),
            history: dir.join("history.csv"),
            ranking: dir.join("ranking.csv"),
            levels: dir.join("levels.csv"),
            aliases: dir.join("aliases.csv"),
            timings: dir.join("timings.csv"),
        }
    }
}

fn csv_bytes<const N: usize>(header: [&str; N], rows: &[Vec<String>]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.into_inner()
        .map_err(|e| Error::invalid(format!("csv buffer: {}", e.error())))
}

/// Writes all report files into `dir`. The ranking files are header-only
/// when fewer than two distinct successful configurations exist.
pub fn emit_report(entries: &[GridEntry], dir: &Path) -> Result<ReportFiles> {
    let files = ReportFiles::in_dir(dir);
    let mut results = Vec::new();
    let mut history = Vec::new();
    let mut timings = Vec::new();
    for e in entries {
        let mut row: Vec<String> = vec![e.config.id.clone()];
        row.extend(e.config.columns().into_iter().map(|(_, v)| v));
        match &e.outcome {
            Ok(r) => {
                row.extend([
                    r.val_loss.to_string(),
                    r.val_accuracy.to_string(),
                    r.best_epoch.to_string(),
                    r.epochs_run().to_string(),
                    r.seq_len.to_string(),
                    r.out_dim.to_string(),
                    String::new(),
                ]);
                for h in &r.history {
                    history.push(vec![
                        e.config.id.clone(),
                        h.epoch.to_string(),
                        h.train_loss.to_string(),
                        h.val_loss.to_string(),
                        h.val_accuracy.to_string(),
                    ]);
                }
                timings.push(vec![e.config.id.clone(), format!("{:.3}", r.wall_time)]);
            }
            Err(msg) => {
                row.extend(std::iter::repeat_n(String::new(), 6));
                row.push(msg.clone());
            }
        }
        results.push(row);
    }

    let scored: Vec<(SweepConfig, f64)> = entries
        .iter()
        .filter_map(|e| {
            e.outcome
                .as_ref()
                .ok()
                .map(|r| (e.config.clone(), r.val_accuracy))
        })
        .collect();
    let mut ranking = Vec::new();
    let mut levels = Vec::new();
    if let Ok(ranked) = rank_importance(&scored) {
        for (i, imp) in ranked.iter().enumerate() {
            ranking.push(vec![
                (i + 1).to_string(),
                imp.hyperparameter.to_string(),
                imp.score.to_string(),
            ]);
            for l in &imp.levels {
                levels.push(vec![
                    imp.hyperparameter.to_string(),
                    l.level.clone(),
                    l.mean_accuracy.to_string(),
                    l.count.to_string(),
                ]);
            }
        }
    }
    let configs: Vec<SweepConfig> = scored.into_iter().map(|(c, _)| c).collect();
    let aliases: Vec<Vec<String>> = aliased_pairs(&configs)
        .into_iter()
        .map(|(a, b)| vec![a.to_string(), b.to_string()])
        .collect();

    fsutil::create_dir_all(dir)?;
    fsutil::write_atomic(&files.results, csv_bytes(RESULTS_HEADER, &results)?)?;
    fsutil::write_atomic(&files.history, csv_bytes(HISTORY_HEADER, &history)?)?;
    fsutil::write_atomic(&files.ranking, csv_bytes(RANKING_HEADER, &ranking)?)?;
    fsutil::write_atomic(&files.levels, csv_bytes(LEVELS_HEADER, &levels)?)?;
    fsutil::write_atomic(&files.aliases, csv_bytes(ALIASES_HEADER, &aliases)?)?;
    fsutil::write_atomic(&files.timings, csv_bytes(TIMINGS_HEADER, &timings)?)?;
    Ok(files)
}

fn read_rows(path: &Path, header: &[&str]) -> Result<Vec<csv::StringRecord>> {
    let text = fsutil::read_to_string(path)?;
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let got: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if got != header {
        return Err(Error::parse(
            "report",
            1,
            format!("unexpected header {got:?} in {}", path.display()),
        ));
    }
    r.records().map(|rec| rec.map_err(Error::from)).collect()
}

fn cell<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, line: usize) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let v = rec.get(i).unwrap_or("");
    v.parse()
        .map_err(|e| Error::parse("report", line, format!("column {i} {v:?}: {e}")))
}

/// Reads a report directory back into grid entries. Config fields beyond the
/// seven table columns take their defaults; a missing `timings.csv` leaves
/// wall times at zero.
pub fn load_report(dir: &Path) -> Result<Vec<GridEntry>> {
    let files = ReportFiles::in_dir(dir);
    let mut histories: BTreeMap<String, Vec<EpochRecord>> = BTreeMap::new();
    for (i, rec) in read_rows(&files.history, &HISTORY_HEADER)?
        .iter()
        .enumerate()
    {
        let line = i + 2;
        histories
            .entry(rec[0].to_string())
            .or_default()
            .push(EpochRecord {
                epoch: cell(rec, 1, line)?,
                train_loss: cell(rec, 2, line)?,
                val_loss: cell(rec, 3, line)?,
                val_accuracy: cell(rec, 4, line)?,
            });
    }
    let mut times: BTreeMap<String, f64> = BTreeMap::new();
    if files.timings.exists() {
        for (i, rec) in read_rows(&files.timings, &TIMINGS_HEADER)?
            .iter()
            .enumerate()
        {
            times.insert(rec[0].to_string(), cell(rec, 1, i + 2)?);
        }
    }

    let mut out = Vec::new();
    for (i, rec) in read_rows(&files.results, &RESULTS_HEADER)?
        .iter()
        .enumerate()
    {
        let line = i + 2;
        let id = rec[0].to_string();
        let dim = |k: usize| -> Result<DimSpec> {
            rec[k]
                .parse()
                .map_err(|e| Error::parse("report", line, format!("{}: {e}", RESULTS_HEADER[k])))
        };
        let config = SweepConfig::new(
            &id,
            dim(1)?,
            cell(rec, 2, line)?,
            cell(rec, 3, line)?,
            dim(4)?,
            rec[5].parse()?,
            cell(rec, 6, line)?,
            cell(rec, 7, line)?,
        );
        let outcome = if !rec[14].is_empty() {
            Err(rec[14].to_string())
        } else {
            let history = histories.remove(&id).unwrap_or_default();
            let epochs_run: usize = cell(rec, 11, line)?;
            if history.len() != epochs_run {
                return Err(Error::parse(
                    "report",
                    line,
                    format!(
                        "{id}: {epochs_run} epochs in results, {} in history",
                        history.len()
                    ),
                ));
            }
            Ok(SweepResult {
                config_id: id.clone(),
                val_loss: cell(rec, 8, line)?,
                val_accuracy: cell(rec, 9, line)?,
                best_epoch: cell(rec, 10, line)?,
                seq_len: cell(rec, 12, line)?,
                out_dim: cell(rec, 13, line)?,
                history,
                wall_time: times.get(&id).copied().unwrap_or(0.0),
            })
        };
        out.push(GridEntry { config, outcome });
    }
    Ok(out)
}
