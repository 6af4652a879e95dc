//! Writing and checking run directories.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use crate::experiments::RunArtifact;
use crate::report::Report;

pub const REPORT: &str = "report.txt";
/// Files every complete run directory holds, besides the report.
pub const REQUIRED: [&str; 3] = ["telemetry.csv", "snapshot.csv", "trajectory.csv"];

/// Writes `contents` to `dir/name` via a temporary file and a rename, so
/// readers never see a partial file.
pub fn write_atomic(dir: &Path, name: &str, contents: &str) -> io::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let target = dir.join(name);
    let tmp = dir.join(format!(".{name}.tmp"));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
    }
    fs::rename(&tmp, &target)?;
    Ok(target)
}

/// Data files first, the report last: a report implies complete data.
pub fn write_run(dir: &Path, art: &RunArtifact) -> io::Result<()> {
    for (name, contents) in &art.files {
        write_atomic(dir, name, contents)?;
    }
    write_atomic(dir, REPORT, &art.report.to_string())?;
    Ok(())
}

/// Loads and cross-checks a run directory: the report must parse and be
/// self-consistent, and every required CSV must exist with a header row.
pub fn verify_dir(dir: &Path) -> Result<Report, String> {
    let text = fs::read_to_string(dir.join(REPORT)).map_err(|e| format!("{}: {e}", dir.join(REPORT).display()))?;
    let report = Report::parse(&text)?;
    for name in REQUIRED {
        let path = dir.join(name);
        let body = fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        let header = body.lines().next().unwrap_or("");
        let header_ok = if name == "snapshot.csv" {
            header.starts_with("# prinn-snapshot")
        } else {
            !header.is_empty() && header.split(',').all(|c| c.parse::<f64>().is_err())
        };
        if !header_ok {
            return Err(format!("{} lacks a header row", path.display()));
        }
    }
    Ok(report)
}
