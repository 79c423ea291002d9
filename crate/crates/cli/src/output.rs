use std::io::Write;
use std::path::Path;

use crate::CliError;

fn out_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Output(format!("{}: {e}", path.display()))
}

/// Writes `contents` to a temporary file next to `path`, then renames it into
/// place, so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| out_err(dir, e))?;
    let name = path.file_name().ok_or_else(|| out_err(path, "not a file path"))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let mut f = std::fs::File::create(&tmp).map_err(|e| out_err(&tmp, e))?;
    f.write_all(contents).map_err(|e| out_err(&tmp, e))?;
    f.sync_all().map_err(|e| out_err(&tmp, e))?;
    drop(f);
    std::fs::rename(&tmp, path).map_err(|e| out_err(path, e))
}

/// CSV text from a header and rows of already formatted fields.
pub fn csv_text(header: &[&str], rows: &[Vec<String>]) -> Result<String, CliError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Output(format!("csv: {e}"));
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(r).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Output(format!("csv: {e}")))?;
    String::from_utf8(bytes).map_err(|e| CliError::Output(format!("csv: {e}")))
}
