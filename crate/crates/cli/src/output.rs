//! Atomic file output and derived paths.

use crate::Failure;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::process;

/// `<out>.meta.json`, next to the output itself.
pub fn meta_path(out: &Path) -> PathBuf {
    let mut os = out.as_os_str().to_os_string();
    os.push(".meta.json");
    PathBuf::from(os)
}

/// `<stem>-<tag>.<ext>` next to `out`; the extension defaults to csv.
pub fn tagged_path(out: &Path, tag: &str) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_os_string())
        .unwrap_or_else(|| OsString::from("out"));
    let ext = out
        .extension()
        .map(|e| e.to_os_string())
        .unwrap_or_else(|| OsString::from("csv"));
    let mut name = stem;
    name.push(format!("-{tag}."));
    name.push(&ext);
    out.with_file_name(name)
}

/// Write via a temp file in the target directory, then rename, so a failed
/// run never leaves a partial output behind.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), Failure> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let base = path
        .file_name()
        .ok_or_else(|| Failure::Usage(format!("{}: not a file path", path.display())))?;
    let mut tmp_name = OsString::from(".");
    tmp_name.push(base);
    tmp_name.push(format!(".tmp-{}", process::id()));
    let tmp = dir.join(tmp_name);
    fs::write(&tmp, contents)
        .map_err(|e| Failure::Input(format!("cannot write {}: {e}", tmp.display())))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Failure::Input(format!("cannot move output into {}: {e}", path.display()))
    })
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), Failure> {
    write_atomic(path, &format!("{value:#}\n"))
}
