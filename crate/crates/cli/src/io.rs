//! Input digests and provenance headers for output files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use sha2::{Digest, Sha256};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Opens an input, logging its sha256 so runs can be reproduced.
pub fn open_input(path: &Path) -> Result<File> {
    let bytes = std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    log::info!(
        "input {} sha256={}",
        path.display(),
        hex::encode(Sha256::digest(&bytes))
    );
    File::open(path).with_context(|| format!("cannot open {}", path.display()))
}

/// Fails early on missing inputs, before any work starts.
pub fn check_inputs<'a>(paths: impl IntoIterator<Item = &'a PathBuf>) -> Result<()> {
    for p in paths {
        if !p.is_file() {
            anyhow::bail!("input file {} does not exist", p.display());
        }
    }
    Ok(())
}

/// `# iai <version> <command> key=value ...`
pub fn header_line(command: &str, params: &[(&str, String)]) -> String {
    let mut line = format!("# iai {VERSION} {command}");
    for (k, v) in params {
        line.push_str(&format!(" {k}={v}"));
    }
    line
}

/// Writes to `path`, or stdout when absent.
pub fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
            }
            Box::new(BufWriter::new(
                File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
            ))
        }
        None => Box::new(BufWriter::new(std::io::stdout())),
    })
}

pub fn opt_display(p: Option<&Path>) -> String {
    p.map_or_else(|| "-".into(), |p| p.display().to_string())
}
