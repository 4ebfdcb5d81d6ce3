use std::io;
use std::os::unix::fs::PermissionsExt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::RunnerError;

#[derive(Clone, Debug)]
enum Storage {
    Owned(Arc<tempfile::TempDir>),
    Borrowed(PathBuf),
}

/// The executables a successful build produced.
#[derive(Clone, Debug)]
pub struct Artifacts {
    storage: Storage,
    names: Vec<String>,
}

impl Artifacts {
    /// Uses an existing directory in place (e.g. prebuilt oracle binaries).
    pub fn from_dir(dir: impl Into<PathBuf>, names: &[String]) -> Result<Self, RunnerError> {
        let artifacts = Artifacts { storage: Storage::Borrowed(dir.into()), names: names.to_vec() };
        artifacts.check()?;
        Ok(artifacts)
    }

    /// Copies `names` out of `src` into a private directory.
    pub fn collect(src: &Path, names: &[String]) -> Result<Self, RunnerError> {
        let dir = tempfile::Builder::new()
            .prefix("bibifi-artifacts-")
            .tempdir()
            .map_err(|e| RunnerError::Sandbox(e.to_string()))?;
        for name in names {
            let from = src.join(name);
            if !from.is_file() {
                return Err(RunnerError::MissingArtifact(name.clone()));
            }
            let to = dir.path().join(name);
            if let Some(parent) = to.parent() {
                std::fs::create_dir_all(parent).map_err(|e| RunnerError::Sandbox(e.to_string()))?;
            }
            std::fs::copy(&from, &to).map_err(|e| RunnerError::Sandbox(e.to_string()))?;
        }
        let artifacts = Artifacts { storage: Storage::Owned(Arc::new(dir)), names: names.to_vec() };
        artifacts.check()?;
        Ok(artifacts)
    }

    pub fn dir(&self) -> &Path {
        match &self.storage {
            Storage::Owned(d) => d.path(),
            Storage::Borrowed(p) => p,
        }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn path(&self, name: &str) -> Result<PathBuf, RunnerError> {
        if !self.names.iter().any(|n| n == name) {
            return Err(RunnerError::MissingArtifact(name.to_owned()));
        }
        Ok(self.dir().join(name))
    }

    fn check(&self) -> Result<(), RunnerError> {
        for name in &self.names {
            let meta = std::fs::metadata(self.dir().join(name)).map_err(|_| RunnerError::MissingArtifact(name.clone()))?;
            if !meta.is_file() || meta.permissions().mode() & 0o111 == 0 {
                return Err(RunnerError::MissingArtifact(name.clone()));
            }
        }
        Ok(())
    }
}

/// Recursively copies a directory tree, keeping symlinks as symlinks.
pub fn copy_tree(src: &Path, dst: &Path) -> io::Result<()> {
    std::fs::create_dir_all(dst)?;
    for entry in std::fs::read_dir(src)? {
        let entry = entry?;
        let ty = entry.file_type()?;
        let to = dst.join(entry.file_name());
        if ty.is_dir() {
            copy_tree(&entry.path(), &to)?;
        } else if ty.is_symlink() {
            std::os::unix::fs::symlink(std::fs::read_link(entry.path())?, &to)?;
        } else {
            std::fs::copy(entry.path(), &to)?;
        }
    }
    Ok(())
}
