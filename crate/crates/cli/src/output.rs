//! Clobber-safe output: files and directories appear only once fully written.

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::CliError;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    Ok(sha256_hex(&fs::read(path).map_err(|e| CliError::io(path, e))?))
}

fn sibling_tmp(path: &Path) -> PathBuf {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!(".{name}.tmp-{}", std::process::id()))
}

pub fn refuse_clobber(path: &Path, overwrite: bool) -> Result<(), CliError> {
    if path.exists() && !overwrite {
        return Err(CliError::config(format!(
            "{} already exists (pass --overwrite to replace it)",
            path.display()
        )));
    }
    Ok(())
}

/// Write `bytes` to a temporary sibling, then rename over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    let tmp = sibling_tmp(path);
    fs::write(&tmp, bytes).map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

/// A directory assembled under a temporary name and renamed into place on `commit`.
/// Dropping without committing removes the partial output.
pub struct StagedDir {
    target: PathBuf,
    tmp: PathBuf,
    overwrite: bool,
    committed: bool,
}

impl StagedDir {
    pub fn new(target: &Path, overwrite: bool) -> Result<Self, CliError> {
        refuse_clobber(target, overwrite)?;
        if let Some(parent) = target.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        let tmp = sibling_tmp(target);
        if tmp.exists() {
            fs::remove_dir_all(&tmp).map_err(|e| CliError::io(&tmp, e))?;
        }
        fs::create_dir(&tmp).map_err(|e| CliError::io(&tmp, e))?;
        Ok(StagedDir {
            target: target.to_path_buf(),
            tmp,
            overwrite,
            committed: false,
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.tmp.join(name)
    }

    pub fn write(&self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let p = self.path(name);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        fs::write(&p, bytes).map_err(|e| CliError::io(&p, e))
    }

    pub fn commit(mut self) -> Result<PathBuf, CliError> {
        if self.target.exists() {
            if !self.overwrite {
                return Err(CliError::config(format!("{} appeared while running", self.target.display())));
            }
            if self.target.is_dir() {
                fs::remove_dir_all(&self.target)
            } else {
                fs::remove_file(&self.target)
            }
            .map_err(|e| CliError::io(&self.target, e))?;
        }
        fs::rename(&self.tmp, &self.target).map_err(|e| CliError::io(&self.target, e))?;
        self.committed = true;
        Ok(self.target.clone())
    }
}

impl Drop for StagedDir {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.tmp);
        }
    }
}
