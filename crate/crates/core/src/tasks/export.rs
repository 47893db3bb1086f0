//! CSV artifacts. Every file has a header row; floats are written with 17
//! significant digits so they parse back to the same bits.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Write `header` and `rows` as comma-separated text.
pub fn write_csv(path: &Path, header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

fn header(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|c| c.to_string()).collect()
}

/// `sample_index,split,loss`
pub fn write_losses(path: &Path, split: &str, losses: &[f64]) -> Result<()> {
    write_csv(
        path,
        &header(&["sample_index", "split", "loss"]),
        losses
            .iter()
            .enumerate()
            .map(|(i, l)| vec![i.to_string(), split.to_string(), fmt_f64(*l)]),
    )
}

/// Read the loss column of a file written by [`write_losses`].
pub fn read_losses(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .skip(1)
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            line.rsplit(',').next().and_then(|f| f.parse().ok()).ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg: format!("bad loss row {line:?}"),
            })
        })
        .collect()
}

/// `epoch,mean_train_loss`
pub fn write_trace(path: &Path, epoch_loss: &[f64]) -> Result<()> {
    write_csv(
        path,
        &header(&["epoch", "mean_train_loss"]),
        epoch_loss.iter().enumerate().map(|(e, l)| vec![e.to_string(), fmt_f64(*l)]),
    )
}

/// `epoch,seconds`
pub fn write_timing(path: &Path, epoch_seconds: &[f64]) -> Result<()> {
    write_csv(
        path,
        &header(&["epoch", "seconds"]),
        epoch_seconds.iter().enumerate().map(|(e, s)| vec![e.to_string(), fmt_f64(*s)]),
    )
}

/// `sample_index,label,<prefix>_1..<prefix>_d`
pub fn write_labeled_rows(path: &Path, prefix: &str, labels: &[i64], rows: &[Vec<f64>]) -> Result<()> {
    let d = rows.first().map_or(0, Vec::len);
    let mut cols = header(&["sample_index", "label"]);
    cols.extend((1..=d).map(|i| format!("{prefix}_{i}")));
    write_csv(
        path,
        &cols,
        rows.iter().zip(labels).enumerate().map(|(i, (r, l))| {
            let mut row = vec![i.to_string(), l.to_string()];
            row.extend(r.iter().map(|v| fmt_f64(*v)));
            row
        }),
    )
}

/// `sample_index,x_1..x_n`
pub fn write_samples(path: &Path, rows: &[Vec<f64>]) -> Result<()> {
    let d = rows.first().map_or(0, Vec::len);
    let mut cols = header(&["sample_index"]);
    cols.extend((1..=d).map(|i| format!("x_{i}")));
    write_csv(
        path,
        &cols,
        rows.iter().enumerate().map(|(i, r)| {
            let mut row = vec![i.to_string()];
            row.extend(r.iter().map(|v| fmt_f64(*v)));
            row
        }),
    )
}

/// Parse a numeric CSV with a header into (header, rows). Non-numeric
/// cells are an error.
pub fn read_numeric_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let head = lines
        .next()
        .ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            msg: "missing header".into(),
        })?
        .split(',')
        .map(str::to_string)
        .collect();
    let rows = lines
        .enumerate()
        .map(|(i, line)| {
            line.split(',')
                .map(|f| {
                    f.parse::<f64>().map_err(|_| Error::Parse {
                        path: path.to_path_buf(),
                        line: i + 2,
                        msg: format!("bad number {f:?}"),
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok((head, rows))
}

/// Render a markdown table.
pub fn markdown_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "| {} |", header.join(" | "));
    let _ = writeln!(s, "|{}", "---|".repeat(header.len()));
    for r in rows {
        let _ = writeln!(s, "| {} |", r.join(" | "));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn loss_csv_roundtrip_is_bitwise(losses in prop::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 0..50)) {
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("l.csv");
            write_losses(&p, "test", &losses).unwrap();
            let back = read_losses(&p).unwrap();
            prop_assert_eq!(back.len(), losses.len());
            for (a, b) in back.iter().zip(&losses) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn labeled_rows_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("z.csv");
        write_labeled_rows(&p, "z", &[0, 1], &[vec![0.5, 1.5], vec![2.5, 3.5]]).unwrap();
        let (head, rows) = read_numeric_csv(&p).unwrap();
        assert_eq!(head, ["sample_index", "label", "z_1", "z_2"]);
        assert_eq!(rows[1], vec![1.0, 1.0, 2.5, 3.5]);
    }
}
