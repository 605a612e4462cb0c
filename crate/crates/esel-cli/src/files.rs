//! File helpers shared by the subcommands.

use std::io::Read;
use std::path::Path;

use esel_core::pool::{load_pool_binary, parse_pool_jsonl};
use esel_core::{Error, Pool, Result};

/// Load a pool from either format: binary if the file starts with the ESEL
/// magic, JSONL otherwise.
pub fn load_pool_auto(path: &str) -> Result<Pool> {
    let mut head = [0u8; 4];
    let mut file = std::fs::File::open(path).map_err(|e| not_found(e, path))?;
    let n = file.read(&mut head).map_err(Error::Io)?;
    if n == 4 && &head == b"ESEL" {
        load_pool_binary(path)
    } else {
        let text = std::fs::read_to_string(path).map_err(|e| not_found(e, path))?;
        parse_pool_jsonl(&text)
    }
}

pub fn not_found(e: std::io::Error, path: &str) -> Error {
    if e.kind() == std::io::ErrorKind::NotFound {
        Error::Contract(format!("{path} not found"))
    } else {
        Error::Io(e)
    }
}

pub fn read_to_string(path: &str) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| not_found(e, path))
}

/// Parse one JSON value per non-empty line, with 1-based line numbers in
/// errors.
pub fn read_jsonl<T: serde::de::DeserializeOwned>(path: &str) -> Result<Vec<T>> {
    let text = read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(line).map_err(|e| Error::MalformedLine {
                line: i + 1,
                message: e.to_string(),
            })?,
        );
    }
    Ok(out)
}

pub fn write_jsonl<T: serde::Serialize>(path: &str, rows: &[T]) -> Result<()> {
    let mut out = String::new();
    for row in rows {
        out.push_str(&serde_json::to_string(row).expect("row serializes"));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(Error::Io)
}

pub fn write_json_pretty<T: serde::Serialize>(path: &str, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("value serializes");
    text.push('\n');
    std::fs::write(path, text).map_err(Error::Io)
}

/// Install a process-wide rayon pool when `--threads` is given. Falls back
/// silently if a pool was already installed (repeated calls in one process).
pub fn configure_threads(threads: Option<usize>) {
    if let Some(n) = threads {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
}

/// Path guard so outputs land in existing directories with a clear message.
pub fn ensure_parent_exists(path: &str) -> Result<()> {
    if let Some(parent) = Path::new(path).parent() {
        if !parent.as_os_str().is_empty() && !parent.exists() {
            return Err(Error::Contract(format!(
                "output directory {} not found",
                parent.display()
            )));
        }
    }
    Ok(())
}
