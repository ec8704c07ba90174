//! Batch run of every acceptance criterion with a hashed manifest.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;

use crate::acceptance::{self, CriterionResult};
use crate::output::{self, Artifact};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone)]
pub struct ReproduceOptions {
    pub seed: u64,
    pub out_dir: PathBuf,
    /// `(id.key, value)` parameter overrides, e.g. `("3.tol", "0.01")`.
    pub overrides: Vec<(String, String)>,
    /// Restrict to these criteria; all when `None`.
    pub only: Option<Vec<u32>>,
}

impl ReproduceOptions {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        Self { seed: 2024, out_dir: out_dir.into(), overrides: Vec::new(), only: None }
    }
}

#[derive(Debug, Clone)]
pub struct ReproduceReport {
    pub results: Vec<CriterionResult>,
    pub manifest: Artifact,
}

impl ReproduceReport {
    pub fn failures(&self) -> Vec<u32> {
        self.results.iter().filter(|r| !r.passed).map(|r| r.id).collect()
    }

    pub fn all_passed(&self) -> bool {
        self.failures().is_empty()
    }
}

#[derive(Serialize)]
struct ManifestOutput {
    file: String,
    sha256: String,
}

#[derive(Serialize)]
struct ManifestEntry {
    id: u32,
    title: &'static str,
    passed: bool,
    detail: String,
    config_sha256: String,
    outputs: Vec<ManifestOutput>,
}

#[derive(Serialize)]
struct Manifest {
    seed: u64,
    criteria: Vec<ManifestEntry>,
}

/// Runs the selected criteria in order, writes each one's config and
/// artifacts under `out_dir`, then the manifest. Timings are printed only,
/// never written, so reruns produce identical files.
pub fn reproduce_all(opts: &ReproduceOptions) -> Result<ReproduceReport> {
    crate::init_threads()?;
    let selected: Vec<_> = acceptance::criteria()
        .into_iter()
        .filter(|c| opts.only.as_ref().is_none_or(|ids| ids.contains(&c.id)))
        .collect();
    if let Some(ids) = &opts.only {
        if let Some(id) = ids.iter().find(|id| !selected.iter().any(|c| c.id == **id)) {
            bail!("no acceptance criterion {id}");
        }
    }
    let mut params: Vec<_> = selected.iter().map(|c| c.defaults(opts.seed)).collect();
    for (target, value) in &opts.overrides {
        let (id, key) = target
            .split_once('.')
            .and_then(|(id, key)| Some((id.parse::<u32>().ok()?, key)))
            .with_context(|| format!("override `{target}` must look like <criterion>.<key>"))?;
        let i = selected
            .iter()
            .position(|c| c.id == id)
            .with_context(|| format!("override `{target}`: criterion {id} is not selected"))?;
        params[i].set(key, value)?;
    }

    fs::create_dir_all(&opts.out_dir).with_context(|| format!("creating {}", opts.out_dir.display()))?;
    let mut results = Vec::new();
    let mut entries = Vec::new();
    for (c, p) in selected.iter().zip(&params) {
        let r = c.evaluate(p);
        println!("{}", r.line());
        let config = Artifact::text(format!("c{:02}_config.txt", c.id), r.config_text.clone());
        output::write_all(&opts.out_dir, std::slice::from_ref(&config))?;
        output::write_all(&opts.out_dir, &r.artifacts)?;
        entries.push(ManifestEntry {
            id: r.id,
            title: r.title,
            passed: r.passed,
            detail: r.detail.clone(),
            config_sha256: config.sha256(),
            outputs: r.artifacts.iter().map(|a| ManifestOutput { file: a.name.clone(), sha256: a.sha256() }).collect(),
        });
        results.push(r);
    }
    let manifest = Artifact::json(MANIFEST, &Manifest { seed: opts.seed, criteria: entries });
    output::write_all(&opts.out_dir, std::slice::from_ref(&manifest))?;
    Ok(ReproduceReport { results, manifest })
}

/// Files of `dir`, sorted by name, with their contents.
fn snapshot(dir: &Path) -> Result<Vec<(String, Vec<u8>)>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let entry = entry?;
        if entry.file_type()?.is_file() {
            files.push((entry.file_name().to_string_lossy().into_owned(), fs::read(entry.path())?));
        }
    }
    files.sort();
    Ok(files)
}

#[derive(Debug, Clone)]
pub struct DeterminismReport {
    pub identical: bool,
    pub files: usize,
    /// Files present in only one run or with different bytes.
    pub differing: Vec<String>,
}

/// Runs [`reproduce_all`] twice into `base/run_a` and `base/run_b` and
/// compares every file byte for byte.
pub fn determinism_check(base: &Path, seed: u64, only: Option<Vec<u32>>) -> Result<DeterminismReport> {
    let mut dirs = Vec::new();
    for name in ["run_a", "run_b"] {
        let dir = base.join(name);
        if dir.exists() {
            fs::remove_dir_all(&dir)?;
        }
        let opts = ReproduceOptions { seed, out_dir: dir.clone(), overrides: Vec::new(), only: only.clone() };
        reproduce_all(&opts)?;
        dirs.push(snapshot(&dir)?);
    }
    let (a, b) = (&dirs[0], &dirs[1]);
    let mut differing: Vec<String> = a
        .iter()
        .filter(|(name, bytes)| b.iter().find(|(n, _)| n == name).is_none_or(|(_, other)| other != bytes))
        .map(|(n, _)| n.clone())
        .collect();
    differing.extend(b.iter().filter(|(n, _)| !a.iter().any(|(m, _)| m == n)).map(|(n, _)| n.clone()));
    Ok(DeterminismReport { identical: differing.is_empty() && !a.is_empty(), files: a.len(), differing })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tampered_tolerance_fails_only_that_criterion() {
        let dir = tempfile::tempdir().unwrap();
        let mut opts = ReproduceOptions::new(dir.path());
        opts.only = Some(vec![4, 7]);
        opts.overrides = vec![("4.rel_tol".into(), "1e-30".into())];
        let report = reproduce_all(&opts).unwrap();
        assert_eq!(report.failures(), vec![4]);
        let manifest = fs::read_to_string(dir.path().join(MANIFEST)).unwrap();
        assert!(manifest.contains("\"passed\": false") && manifest.contains("\"passed\": true"));
    }

    #[test]
    fn bad_overrides_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut opts = ReproduceOptions::new(dir.path());
        opts.only = Some(vec![4]);
        for bad in ["4.nonsense", "x.tol", "7.tol"] {
            opts.overrides = vec![(bad.into(), "1".into())];
            assert!(reproduce_all(&opts).is_err(), "{bad}");
        }
        opts.overrides.clear();
        opts.only = Some(vec![11]);
        assert!(reproduce_all(&opts).is_err());
    }

    #[test]
    fn small_batch_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let r = determinism_check(dir.path(), 7, Some(vec![4, 6, 7])).unwrap();
        assert!(r.identical, "{:?}", r.differing);
        assert_eq!(r.files, 7);
    }
}
