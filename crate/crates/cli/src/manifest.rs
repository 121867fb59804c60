//! TOML run manifests for `simulate`.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Deserialize;

use crate::ModeArg;

/// Every field is optional; command-line flags take precedence. Relative
/// paths are resolved against the manifest's directory.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    /// Variant traces, leader first.
    #[serde(default)]
    pub variants: Vec<PathBuf>,
    /// Base trace, synthesized with `plan`.
    pub trace: Option<PathBuf>,
    pub plan: Option<PathBuf>,
    pub n: Option<usize>,
    pub mode: Option<ModeArg>,
    pub ring: Option<usize>,
    pub handshake: Option<u64>,
    pub selected: Option<Vec<String>>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl RunManifest {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut manifest: RunManifest = toml::from_str(&text).with_context(|| format!("in {}", path.display()))?;
        if let Some(n) = manifest.n {
            anyhow::ensure!(n >= 2, "manifest n must be at least 2, got {n}");
        }
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        manifest.variants.iter_mut().for_each(resolve);
        manifest.trace.as_mut().map(resolve);
        manifest.plan.as_mut().map(resolve);
        manifest.out.as_mut().map(resolve);
        for input in manifest.variants.iter().chain(&manifest.trace).chain(&manifest.plan) {
            anyhow::ensure!(input.exists(), "manifest input {} does not exist", input.display());
        }
        Ok(manifest)
    }
}
