//! CSV matrices: a header row followed by rows of numbers.

use std::path::Path;

use anyhow::{bail, Context};
use nalgebra::DMatrix;

pub fn read_matrix(path: &Path) -> anyhow::Result<DMatrix<f64>> {
    let mut reader =
        csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let width = reader.headers()?.len();
    let mut values = Vec::new();
    let mut rows = 0;
    for (i, record) in reader.records().enumerate() {
        let record = record.with_context(|| format!("{}: row {}", path.display(), i + 1))?;
        if record.len() != width {
            bail!(
                "{}: row {} has {} fields, header has {width}",
                path.display(),
                i + 1,
                record.len()
            );
        }
        for (j, field) in record.iter().enumerate() {
            let v: f64 = field.trim().parse().with_context(|| {
                format!(
                    "{}: row {}, column {}: `{field}` is not a number",
                    path.display(),
                    i + 1,
                    j + 1
                )
            })?;
            values.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        bail!("{}: no data rows", path.display());
    }
    Ok(DMatrix::from_row_slice(rows, width, &values))
}

/// Writes `m` with columns named `{prefix}1..{prefix}p`.
pub fn write_matrix(path: &Path, m: &DMatrix<f64>, prefix: &str) -> anyhow::Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record((1..=m.ncols()).map(|j| format!("{prefix}{j}")))?;
    for row in m.row_iter() {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
