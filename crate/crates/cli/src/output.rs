//! CSV files with a commented header that echoes the configuration.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::config::ExperimentConfig;
use crate::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// `# `-prefixed lines: tool version, seed, then the full configuration.
pub fn header(config: &ExperimentConfig) -> String {
    let mut out = format!("# lts-mlmc {VERSION}\n# seed = {}\n", config.seed);
    for line in config.to_toml().lines() {
        out.push_str("# ");
        out.push_str(line);
        out.push('\n');
    }
    out
}

/// Shortest round-trip scientific notation, stable across platforms.
pub fn num(v: f64) -> String {
    format!("{v:e}")
}

pub fn write_csv<R>(
    dir: &Path,
    name: &str,
    header: &str,
    columns: &[&str],
    rows: R,
) -> Result<PathBuf, CliError>
where
    R: IntoIterator<Item = Vec<String>>,
{
    let path = dir.join(name);
    let file = File::create(&path).map_err(io_err(&path))?;
    let mut w = BufWriter::new(file);
    w.write_all(header.as_bytes()).map_err(io_err(&path))?;
    let mut csv = csv::Writer::from_writer(w);
    let to_io = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(e) => e,
        other => std::io::Error::other(format!("{other:?}")),
    };
    csv.write_record(columns)
        .map_err(|e| io_err(&path)(to_io(e)))?;
    for row in rows {
        csv.write_record(&row)
            .map_err(|e| io_err(&path)(to_io(e)))?;
    }
    csv.flush().map_err(io_err(&path))?;
    Ok(path)
}

pub fn write_text(dir: &Path, name: &str, text: &str) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(io_err(&path))?;
    Ok(path)
}

pub fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))
}
