//! JSON and JSON Lines file helpers with line-numbered parse errors.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

fn display(path: &Path) -> String {
    path.display().to_string()
}

/// Read a JSON Lines file, validating each record. Blank lines are skipped.
/// Parse or validation failures are reported with the 1-based line number.
pub(crate) fn read_jsonl<T, F>(path: &Path, validate: F) -> Result<Vec<T>>
where
    T: DeserializeOwned,
    F: Fn(&T) -> Result<()>,
{
    let file = File::open(path)?;
    let reader = BufReader::new(file);
    let mut records = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: T = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: display(path),
            line: lineno + 1,
            message: e.to_string(),
        })?;
        validate(&record).map_err(|e| Error::Parse {
            path: display(path),
            line: lineno + 1,
            message: e.to_string(),
        })?;
        records.push(record);
    }
    Ok(records)
}

/// Write records as one compact JSON object per line.
pub(crate) fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let file = File::create(path)?;
    let mut writer = BufWriter::new(file);
    for record in records {
        let line = serde_json::to_string(record).map_err(|e| Error::Parse {
            path: display(path),
            line: 0,
            message: e.to_string(),
        })?;
        writer.write_all(line.as_bytes())?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

/// Read a whole-file JSON document.
pub(crate) fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path)?;
    let reader = BufReader::new(file);
    serde_json::from_reader(reader).map_err(|e| Error::Parse {
        path: display(path),
        line: e.line(),
        message: e.to_string(),
    })
}

/// Write a whole-file compact JSON document with a trailing newline.
pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut body = serde_json::to_string(value).map_err(|e| Error::Parse {
        path: display(path),
        line: 0,
        message: e.to_string(),
    })?;
    body.push('\n');
    std::fs::write(path, body)?;
    Ok(())
}
