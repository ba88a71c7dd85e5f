use std::fmt;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};

/// Problems with user-supplied input files.
#[derive(Debug)]
pub struct DataError(pub String);

impl fmt::Display for DataError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for DataError {}

fn data_error(msg: String) -> anyhow::Error {
    DataError(msg).into()
}

/// Reads one numeric column. A first row whose selected field is not a
/// number is taken as a header. `column` is a header name or a 1-based
/// index; the first column is used when it is `None`.
pub fn read_column(path: &Path, column: Option<&str>) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| data_error(format!("cannot read {}: {e}", path.display())))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| data_error(format!("{}: {e}", path.display())))?;
        let line = row.position().map_or(0, |p| p.line());
        if row.iter().all(str::is_empty) {
            continue;
        }
        records.push((line, row));
    }
    let Some((_, first)) = records.first() else {
        return Err(data_error(format!("{} contains no rows", path.display())));
    };

    let header_by_name = column.and_then(|name| first.iter().position(|h| h == name));
    let index = match (column, header_by_name) {
        (None, _) => 0,
        (Some(_), Some(i)) => i,
        (Some(spec), None) => match spec.parse::<usize>() {
            Ok(k) if k >= 1 => k - 1,
            _ => {
                return Err(data_error(format!(
                    "column `{spec}` not found in {}",
                    path.display()
                )))
            }
        },
    };
    let has_header = header_by_name.is_some()
        || first
            .get(index)
            .is_some_and(|field| field.parse::<f64>().is_err());

    let mut values = Vec::with_capacity(records.len());
    for (line, row) in records.iter().skip(usize::from(has_header)) {
        let field = row.get(index).ok_or_else(|| {
            data_error(format!(
                "{} line {line}: missing column {}",
                path.display(),
                index + 1
            ))
        })?;
        let value: f64 = field.parse().ok().filter(|v: &f64| v.is_finite()).ok_or_else(|| {
            data_error(format!(
                "{} line {line}: `{field}` is not a finite number",
                path.display()
            ))
        })?;
        values.push(value);
    }
    Ok(values)
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("cannot create a temporary file in {}", dir.display()))?;
    tmp.write_all(contents.as_bytes())?;
    tmp.persist(path)
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

/// Writes to `path`, or to stdout when no path is given.
pub fn emit(path: Option<&Path>, contents: &str) -> Result<()> {
    match path {
        Some(p) => write_atomic(p, contents),
        None => {
            std::io::stdout().write_all(contents.as_bytes())?;
            Ok(())
        }
    }
}
