//! CSV and metadata writers. Files are written to a temporary sibling and
//! renamed into place so a failed run never leaves a partial file.

use std::io::Write;
use std::path::{Path, PathBuf};

use tempfile::NamedTempFile;

use crate::config::RunConfig;
use crate::CliError;

pub const OUT_DIR_ENV: &str = "PHOTODETECTION_OUT_DIR";

/// `Display` in the comfortable range, scientific notation elsewhere.
pub fn fmt_num(x: f64) -> String {
    let a = x.abs();
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else if x == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_else(|| "nan".into())
}

pub fn out_path(cfg: &RunConfig, command: &str) -> PathBuf {
    let base = std::env::var_os(OUT_DIR_ENV).map(PathBuf::from);
    let p = cfg.out.clone().unwrap_or_else(|| PathBuf::from(format!("{command}.csv")));
    match base {
        Some(dir) if p.is_relative() => dir.join(p),
        _ => p,
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Validation(format!("cannot write {}: {e}", path.display()))
}

fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir).map_err(|e| io_err(path, e))?;
    let mut tmp = NamedTempFile::new_in(&dir).map_err(|e| io_err(path, e))?;
    tmp.write_all(bytes).map_err(|e| io_err(path, e))?;
    tmp.persist(path).map_err(|e| io_err(path, e.error))?;
    Ok(())
}

/// Writes the table and its `.meta` sidecar.
pub fn write_table(
    cfg: &RunConfig,
    command: &str,
    header: &[&str],
    rows: &[Vec<String>],
    results: &[(String, String)],
) -> Result<PathBuf, CliError> {
    let path = out_path(cfg, command);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(|e| io_err(&path, e))?;
    for r in rows {
        w.write_record(r).map_err(|e| io_err(&path, e))?;
    }
    let bytes = w.into_inner().map_err(|e| io_err(&path, e))?;
    atomic_write(&path, &bytes)?;

    let mut meta = format!("# photodetection {command}\n");
    for (k, v) in cfg.entries() {
        meta.push_str(&format!("{k} = {v}\n"));
    }
    for (k, v) in results {
        meta.push_str(&format!("{}{k} = {v}\n", crate::config::RESULT_PREFIX));
    }
    atomic_write(&meta_path(&path), meta.as_bytes())?;
    Ok(path)
}

pub fn meta_path(csv: &Path) -> PathBuf {
    let mut s = csv.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}
