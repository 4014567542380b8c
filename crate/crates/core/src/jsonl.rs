//! Line-oriented JSON reading and writing.

use std::io::{BufRead, Write};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

/// Parses one JSON value per non-blank line. Errors carry the 1-based line.
pub fn read<T, R>(reader: R) -> Result<Vec<T>>
where
    T: DeserializeOwned,
    R: BufRead,
{
    read_with(reader, |_, v| Ok(v))
}

/// Like [`read`], converting each parsed record with `convert`, which receives
/// the 1-based line number. Conversion errors are reported with that line.
pub fn read_with<T, U, R, F>(reader: R, mut convert: F) -> Result<Vec<U>>
where
    T: DeserializeOwned,
    R: BufRead,
    F: FnMut(usize, T) -> Result<U>,
{
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: T = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let converted = convert(line_no, value).map_err(|e| match e {
            Error::Parse { .. } | Error::Io(_) => e,
            other => Error::Parse {
                line: line_no,
                message: other.to_string(),
            },
        })?;
        out.push(converted);
    }
    Ok(out)
}

/// Writes each item as one JSON line.
pub fn write<'a, T, W, I>(mut writer: W, items: I) -> Result<()>
where
    T: Serialize + 'a,
    W: Write,
    I: IntoIterator<Item = &'a T>,
{
    for item in items {
        serde_json::to_writer(&mut writer, item)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}
