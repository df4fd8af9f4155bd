//! All-or-nothing output writing.
//!
//! Commands compute every file's contents first, then hand them to
//! [`commit`], which writes each through a temporary sibling and renames it
//! into place. If any write fails, files already placed by this call are
//! removed, so a failed command leaves no partial outputs behind.

use std::fs;
use std::path::{Path, PathBuf};

use crate::CliError;

fn temp_sibling(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".partial");
    path.with_file_name(name)
}

fn place(path: &Path, contents: &str) -> std::io::Result<()> {
    let tmp = temp_sibling(path);
    let result = fs::write(&tmp, contents).and_then(|()| fs::rename(&tmp, path));
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

pub fn commit(files: &[(PathBuf, String)]) -> Result<(), CliError> {
    for (i, (path, contents)) in files.iter().enumerate() {
        if let Err(e) = place(path, contents) {
            for (done, _) in &files[..i] {
                let _ = fs::remove_file(done);
            }
            return Err(CliError::Runtime(format!(
                "cannot write {}: {e}",
                path.display()
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn writes_every_file() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.txt");
        let b = dir.path().join("b.txt");
        commit(&[(a.clone(), "one\n".into()), (b.clone(), "two\n".into())]).unwrap();
        assert_eq!(fs::read_to_string(a).unwrap(), "one\n");
        assert_eq!(fs::read_to_string(b).unwrap(), "two\n");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 2);
    }

    #[test]
    fn failure_removes_earlier_files() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.txt");
        let bad = dir.path().join("missing").join("b.txt");
        let err = commit(&[(a.clone(), "one\n".into()), (bad, "two\n".into())]).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(!a.exists());
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
    }
}
