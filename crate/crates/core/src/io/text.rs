use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Result, RvgpError};

/// Shortest representation that parses back to the same `f64`.
pub fn format_float(x: f64) -> String {
    let s = format!("{x:?}");
    match s.strip_suffix(".0") {
        Some(int) => int.to_string(),
        None => s,
    }
}

pub(crate) fn join_floats<'a>(values: impl IntoIterator<Item = &'a f64>, sep: &str) -> String {
    values.into_iter().map(|v| format_float(*v)).collect::<Vec<_>>().join(sep)
}

pub(crate) fn ensure_finite<'a>(values: impl IntoIterator<Item = &'a f64>, what: &str) -> Result<()> {
    if values.into_iter().any(|v| !v.is_finite()) {
        return Err(RvgpError::InvalidInput(format!("{what} contains non-finite values")));
    }
    Ok(())
}

/// Writes to a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| RvgpError::io(parent, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = Path::new(&tmp);
    let mut file = fs::File::create(tmp).map_err(|e| RvgpError::io(tmp, e))?;
    file.write_all(bytes).map_err(|e| RvgpError::io(tmp, e))?;
    file.sync_all().map_err(|e| RvgpError::io(tmp, e))?;
    drop(file);
    fs::rename(tmp, path).map_err(|e| RvgpError::io(path, e))
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| RvgpError::io(path, e))
}

pub(crate) fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> RvgpError {
    RvgpError::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Parses a finite float, reporting the location otherwise.
pub(crate) fn parse_finite(path: &Path, line: usize, token: &str) -> Result<f64> {
    let v: f64 = token
        .trim()
        .parse()
        .map_err(|_| parse_error(path, line, format!("expected a number, found {token:?}")))?;
    if !v.is_finite() {
        return Err(parse_error(path, line, format!("non-finite value {token:?}")));
    }
    Ok(v)
}
