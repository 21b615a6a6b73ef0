//! File emission helpers: every write goes to a temporary file in the
//! destination directory and is renamed into place, so readers never
//! observe a half-written artifact. CSV floats use the shortest decimal
//! that round-trips to the same value.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn new(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        std::fs::create_dir_all(&root)
            .with_context(|| format!("cannot create output directory {}", root.display()))?;
        Ok(Self { root })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write(&self, name: &str, contents: &str) -> Result<PathBuf> {
        let path = self.path(name);
        atomic_write(&path, contents)?;
        Ok(path)
    }
}

pub fn atomic_write(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().context("write target needs a file name")?;
    let tmp = dir.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    std::fs::write(&tmp, contents)
        .with_context(|| format!("cannot write temporary file {}", tmp.display()))?;
    std::fs::rename(&tmp, path).with_context(|| {
        let _ = std::fs::remove_file(&tmp);
        format!("cannot move {} into place at {}", tmp.display(), path.display())
    })?;
    Ok(())
}

/// Shortest decimal representation that parses back to the same f64.
pub fn csv_float(x: f64) -> String {
    format!("{x}")
}

/// Assemble a CSV document from a header and row iterator.
pub fn csv_table<R, F>(header: &[&str], rows: R, mut emit: F) -> String
where
    R: IntoIterator,
    F: FnMut(R::Item, &mut Vec<String>),
{
    let mut out = String::new();
    writeln!(out, "{}", header.join(",")).expect("string write");
    let mut fields = Vec::with_capacity(header.len());
    for row in rows {
        fields.clear();
        emit(row, &mut fields);
        debug_assert_eq!(fields.len(), header.len(), "row width must match header");
        writeln!(out, "{}", fields.join(",")).expect("string write");
    }
    out
}

/// A plain `key = value` report body; keys appear in the given order.
pub fn report(entries: &[(&str, String)]) -> String {
    let mut out = String::new();
    for (key, value) in entries {
        writeln!(out, "{key} = {value}").expect("string write");
    }
    out
}
