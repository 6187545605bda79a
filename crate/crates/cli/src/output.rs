use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use multiplex::Config;
use sha2::{Digest, Sha256};

/// Everything a subcommand produces: tables, console text and the inputs
/// needed to reproduce them.
pub struct Report {
    pub subcommand: &'static str,
    pub resolved: Config,
    pub seed: Option<u64>,
    pub inputs: Vec<PathBuf>,
    pub files: Vec<(String, String)>,
    pub stdout: String,
    /// Failed checks; nonzero makes the process exit with status 1.
    pub failures: usize,
}

impl Report {
    pub fn new(subcommand: &'static str) -> Self {
        Report {
            subcommand,
            resolved: Config::default(),
            seed: None,
            inputs: Vec::new(),
            files: Vec::new(),
            stdout: String::new(),
            failures: 0,
        }
    }

    pub fn file(&mut self, name: impl Into<String>, contents: impl Into<String>) {
        self.files.push((name.into(), contents.into()));
    }

    pub fn input(&mut self, path: &Path) {
        if !self.inputs.iter().any(|p| p == path) {
            self.inputs.push(path.to_owned());
        }
    }

    pub fn manifest(&self) -> Result<String> {
        let mut out = String::new();
        writeln!(out, "subcommand = {}", self.subcommand)?;
        writeln!(out, "tool_version = {}", env!("CARGO_PKG_VERSION"))?;
        match self.seed {
            Some(s) => writeln!(out, "seed = {s}")?,
            None => writeln!(out, "seed = none")?,
        }
        for (k, v) in self.resolved.iter() {
            writeln!(out, "config.{k} = {v}")?;
        }
        for path in &self.inputs {
            let bytes = fs::read(path).with_context(|| format!("cannot hash input {}", path.display()))?;
            writeln!(out, "input.{} = sha256:{}", path.display(), hex::encode(Sha256::digest(&bytes)))?;
        }
        Ok(out)
    }
}

/// Writes every file plus `manifest.txt` into a staging directory next to
/// `dir`, then renames it into place so readers never see a partial result.
pub fn commit(report: &Report, dir: &Path) -> Result<()> {
    let parent = match dir.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_owned(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&parent).with_context(|| format!("cannot create {}", parent.display()))?;
    let stage = tempfile::Builder::new()
        .prefix(".multiplex-staging-")
        .tempdir_in(&parent)
        .context("cannot create staging directory")?;
    let manifest = report.manifest()?;
    for (name, contents) in report.files.iter().chain([&("manifest.txt".to_owned(), manifest)]) {
        let path = stage.path().join(name);
        if let Some(p) = path.parent() {
            fs::create_dir_all(p)?;
        }
        fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))?;
    }
    let staged = stage.keep();
    if dir.exists() {
        let old = parent.join(format!(".multiplex-replaced-{}", std::process::id()));
        fs::rename(dir, &old).with_context(|| format!("cannot move aside {}", dir.display()))?;
        fs::rename(&staged, dir).with_context(|| format!("cannot move output into {}", dir.display()))?;
        fs::remove_dir_all(&old)?;
    } else {
        fs::rename(&staged, dir).with_context(|| format!("cannot move output into {}", dir.display()))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report() -> Report {
        let mut r = Report::new("stats");
        r.seed = Some(4);
        r.resolved.set("layers", "a,b");
        r.file("t.csv", "x\n1\n");
        r.file("sub/u.csv", "y\n");
        r
    }

    #[test]
    fn commit_writes_files_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("o");
        commit(&report(), &out).unwrap();
        assert_eq!(fs::read_to_string(out.join("t.csv")).unwrap(), "x\n1\n");
        assert_eq!(fs::read_to_string(out.join("sub/u.csv")).unwrap(), "y\n");
        let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
        assert!(manifest.starts_with("subcommand = stats\n"));
        assert!(manifest.contains("seed = 4\nconfig.layers = a,b\n"));
    }

    #[test]
    fn commit_replaces_previous_output_without_leftovers() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("o");
        fs::create_dir(&out).unwrap();
        fs::write(out.join("stale.csv"), "old").unwrap();
        commit(&report(), &out).unwrap();
        assert!(!out.join("stale.csv").exists());
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn manifest_hashes_inputs() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("in.txt");
        fs::write(&input, "abc").unwrap();
        let mut r = report();
        r.input(&input);
        r.input(&input);
        let m = r.manifest().unwrap();
        assert_eq!(m.matches("sha256:").count(), 1);
        assert!(m.contains("ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"));
    }
}
