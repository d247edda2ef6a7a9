//! CSV export of sweep records.
//!
//! Numbers are written with 9 significant digits in scientific notation so
//! that identical records always produce identical bytes.

use std::path::Path;

use crate::error::{Error, Result};

use super::sweep::MetricsRecord;

pub const RECORD_HEADER: [&str; 5] = ["sweep_value", "acc_mean", "acc_std", "mse_mean", "md_mean"];
pub const CONFUSION_HEADER: [&str; 4] = ["sweep_value", "true_label", "predicted_label", "count"];

pub fn fmt9(x: f64) -> String {
    format!("{x:.8e}")
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    csv::Writer::from_path(path).map_err(|e| Error::parse(path, e))
}

/// Writes arbitrary rows under `header`, creating parent directories.
pub fn write_rows<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let mut w = writer(path)?;
    w.write_record(header).map_err(|e| Error::parse(path, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| Error::parse(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Summary CSV plus the long-form confusion CSV next to it.
pub fn export(records: &[MetricsRecord], path: &Path, confusion_path: &Path) -> Result<()> {
    write_rows(
        path,
        &RECORD_HEADER,
        records.iter().map(|r| {
            [r.sweep_value, r.acc_mean, r.acc_std, r.mse_mean, r.md_mean]
                .into_iter()
                .map(fmt9)
                .collect::<Vec<_>>()
        }),
    )?;
    let mut rows = Vec::new();
    for r in records {
        for (t, row) in r.confusion.iter().enumerate() {
            for (p, c) in row.iter().enumerate() {
                rows.push(vec![fmt9(r.sweep_value), t.to_string(), p.to_string(), c.to_string()]);
            }
        }
    }
    write_rows(confusion_path, &CONFUSION_HEADER, rows)
}

fn reader(path: &Path, header: &[&str]) -> Result<csv::Reader<std::fs::File>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::parse(path, e))?;
    let got = r.headers().map_err(|e| Error::parse(path, e))?.clone();
    if got.iter().ne(header.iter().copied()) {
        return Err(Error::parse(path, format!("unexpected header {got:?}")));
    }
    Ok(r)
}

fn num<T: std::str::FromStr>(path: &Path, field: Option<&str>) -> Result<T> {
    field
        .and_then(|f| f.trim().parse().ok())
        .ok_or_else(|| Error::parse(path, format!("bad field {field:?}")))
}

/// Reads back a pair written by [`export`].
pub fn read_records(path: &Path, confusion_path: &Path) -> Result<Vec<MetricsRecord>> {
    let mut out: Vec<MetricsRecord> = Vec::new();
    for row in reader(path, &RECORD_HEADER)?.records() {
        let row = row.map_err(|e| Error::parse(path, e))?;
        out.push(MetricsRecord {
            sweep_value: num(path, row.get(0))?,
            acc_mean: num(path, row.get(1))?,
            acc_std: num(path, row.get(2))?,
            mse_mean: num(path, row.get(3))?,
            md_mean: num(path, row.get(4))?,
            confusion: Vec::new(),
        });
    }
    // every point's block starts at cell (0, 0)
    let mut point: Option<usize> = None;
    for row in reader(confusion_path, &CONFUSION_HEADER)?.records() {
        let row = row.map_err(|e| Error::parse(confusion_path, e))?;
        let _: f64 = num(confusion_path, row.get(0))?;
        let t: usize = num(confusion_path, row.get(1))?;
        let p: usize = num(confusion_path, row.get(2))?;
        let c: u64 = num(confusion_path, row.get(3))?;
        if t == 0 && p == 0 {
            point = Some(point.map_or(0, |i| i + 1));
        }
        let rec = point
            .and_then(|i| out.get_mut(i))
            .ok_or_else(|| Error::parse(confusion_path, "more sweep points than the summary file"))?;
        let size = rec.confusion.len().max(t + 1).max(p + 1);
        rec.confusion.resize(size, Vec::new());
        for r in rec.confusion.iter_mut() {
            r.resize(size, 0);
        }
        rec.confusion[t][p] = c;
    }
    Ok(out)
}
