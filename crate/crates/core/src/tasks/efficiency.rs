//! Parameter count against error, one row per run.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::export::{fmt_f64, markdown_table, write_csv};
use super::metrics::median;
use super::{Task, TaskReport};
use crate::error::{Error, Result};
use crate::models::Family;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyRow {
    pub task: Task,
    pub family: Family,
    pub seed: u64,
    pub params: usize,
    pub test_mse: f64,
    pub train_mse: f64,
    pub epoch_seconds: f64,
}

pub const CSV_HEADER: [&str; 7] = ["task", "family", "seed", "params", "test_mse", "train_mse", "epoch_seconds"];

/// Rows sorted by parameter count, largest first; ties by family, task, seed.
pub fn efficiency_table(reports: &[TaskReport]) -> Vec<EfficiencyRow> {
    let mut rows: Vec<EfficiencyRow> = reports
        .iter()
        .map(|r| EfficiencyRow {
            task: r.task,
            family: r.family,
            seed: r.seed,
            params: r.param_count,
            test_mse: r.test_mse,
            train_mse: r.train_mse,
            epoch_seconds: r.mean_epoch_seconds,
        })
        .collect();
    rows.sort_by(|a, b| {
        b.params
            .cmp(&a.params)
            .then(a.family.cmp(&b.family))
            .then(a.task.cmp(&b.task))
            .then(a.seed.cmp(&b.seed))
    });
    rows
}

pub fn write_table_csv(path: &Path, rows: &[EfficiencyRow]) -> Result<()> {
    write_csv(
        path,
        &CSV_HEADER.map(String::from),
        rows.iter().map(|r| {
            vec![
                r.task.to_string(),
                r.family.tag().to_string(),
                r.seed.to_string(),
                r.params.to_string(),
                fmt_f64(r.test_mse),
                fmt_f64(r.train_mse),
                fmt_f64(r.epoch_seconds),
            ]
        }),
    )
}

pub fn read_table_csv(path: &Path) -> Result<Vec<EfficiencyRow>> {
    let text = std::fs::read_to_string(path)?;
    let bad = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    text.lines()
        .enumerate()
        .skip(1)
        .map(|(i, line)| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != CSV_HEADER.len() {
                return Err(bad(i + 1, format!("expected {} fields", CSV_HEADER.len())));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|e| bad(i + 1, e.to_string()));
            Ok(EfficiencyRow {
                task: f[0].parse()?,
                family: f[1].parse()?,
                seed: f[2].parse().map_err(|_| bad(i + 1, "bad seed".into()))?,
                params: f[3].parse().map_err(|_| bad(i + 1, "bad params".into()))?,
                test_mse: num(f[4])?,
                train_mse: num(f[5])?,
                epoch_seconds: num(f[6])?,
            })
        })
        .collect()
}

pub fn write_table_json(path: &Path, rows: &[EfficiencyRow]) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(rows)?)?;
    Ok(())
}

/// Per (task, family): median test and train MSE over seeds, in table order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySummary {
    pub task: Task,
    pub family: Family,
    pub params: usize,
    pub runs: usize,
    pub median_test_mse: f64,
    pub median_train_mse: f64,
    pub median_epoch_seconds: f64,
}

pub fn summarize(rows: &[EfficiencyRow]) -> Vec<FamilySummary> {
    let mut out: Vec<FamilySummary> = Vec::new();
    let mut keys: Vec<(Task, Family)> = Vec::new();
    for r in rows {
        if !keys.contains(&(r.task, r.family)) {
            keys.push((r.task, r.family));
        }
    }
    for (task, family) in keys {
        let group: Vec<&EfficiencyRow> = rows.iter().filter(|r| r.task == task && r.family == family).collect();
        let col = |f: fn(&EfficiencyRow) -> f64| median(&group.iter().map(|r| f(r)).collect::<Vec<_>>());
        out.push(FamilySummary {
            task,
            family,
            params: group[0].params,
            runs: group.len(),
            median_test_mse: col(|r| r.test_mse),
            median_train_mse: col(|r| r.train_mse),
            median_epoch_seconds: col(|r| r.epoch_seconds),
        });
    }
    out
}

pub fn markdown_summary(summary: &[FamilySummary]) -> String {
    let rows: Vec<Vec<String>> = summary
        .iter()
        .map(|s| {
            vec![
                s.task.to_string(),
                s.family.to_string(),
                s.params.to_string(),
                s.runs.to_string(),
                format!("{:.5}", s.median_test_mse),
                format!("{:.5}", s.median_train_mse),
                format!("{:.3}", s.median_epoch_seconds),
            ]
        })
        .collect();
    markdown_table(
        &["task", "family", "params", "runs", "median test MSE", "median train MSE", "s/epoch"],
        &rows,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(family: Family, params: usize, seed: u64, mse: f64) -> EfficiencyRow {
        EfficiencyRow {
            task: Task::Reconstruction,
            family,
            seed,
            params,
            test_mse: mse,
            train_mse: mse / 2.0,
            epoch_seconds: 0.125,
        }
    }

    #[test]
    fn csv_and_json_agree() {
        let rows = vec![row(Family::Ae, 10, 0, 0.1 + 0.2), row(Family::Kcae, 3, 1, 1.0 / 3.0)];
        let dir = tempfile::tempdir().unwrap();
        write_table_csv(&dir.path().join("t.csv"), &rows).unwrap();
        write_table_json(&dir.path().join("t.json"), &rows).unwrap();
        let from_csv = read_table_csv(&dir.path().join("t.csv")).unwrap();
        let from_json: Vec<EfficiencyRow> =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("t.json")).unwrap()).unwrap();
        assert_eq!(from_csv, rows);
        assert_eq!(from_json, rows);
    }

    #[test]
    fn summary_medians() {
        let rows = vec![
            row(Family::Cae, 5, 0, 0.3),
            row(Family::Cae, 5, 1, 0.1),
            row(Family::Cae, 5, 2, 0.2),
        ];
        let s = summarize(&rows);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].median_test_mse, 0.2);
        assert!(markdown_summary(&s).contains("| reconstruction | CAE | 5 | 3 | 0.20000 |"));
    }
}
