//! The JSON pipeline configuration.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "rig": { "width": 1280, "height": 720, "focal_px": 640.0, ... },
//!   "depth": { "kind": "sgm", "d_max": 128, "p1": 8, "p2": 96 },
//!   "sharpen": { "edge_threshold_rel": 0.05 },
//!   "filter": { "epsilon": 0.1 },
//!   "fusion": { "weights": "fusion.npfw" },
//!   "stages": { "fill_partial": true, "fill_full": true },
//!   "threads": 2
//! }
//! ```
//!
//! Every section may be omitted and then takes its defaults. Relative paths
//! are resolved against the directory of the configuration file.

use std::path::{Path, PathBuf};

use passthrough_core::disocclusion::FilterConfig;
use passthrough_core::fusion::Backend;
use passthrough_core::rig::{RigModel, RigParams};
use passthrough_core::sharpen::SharpenConfig;
use passthrough_core::stereo::{DepthProviderConfig, ProviderKind};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::read_json;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub schema_version: u32,
    #[serde(default = "RigParams::prototype")]
    pub rig: RigParams,
    #[serde(default)]
    pub depth: DepthSection,
    #[serde(default)]
    pub sharpen: SharpenConfig,
    #[serde(default)]
    pub filter: FilterConfig,
    #[serde(default)]
    pub fusion: FusionSection,
    #[serde(default)]
    pub stages: StageToggles,
    /// 1 runs the two eyes one after the other, 2 runs them concurrently.
    #[serde(default = "default_threads")]
    pub threads: usize,
}

fn default_threads() -> usize {
    2
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            rig: RigParams::prototype(),
            depth: DepthSection::default(),
            sharpen: SharpenConfig::default(),
            filter: FilterConfig::default(),
            fusion: FusionSection::default(),
            stages: StageToggles::default(),
            threads: default_threads(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DepthSection {
    #[serde(flatten)]
    pub provider: DepthProviderConfig,
    /// Left-view map: a disparity PFM for `external_file`, an inverse-depth
    /// PFM for `ground_truth`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub left: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub right: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FusionSection {
    /// NPFW weights. Without them each eye shows its same-side filtered warp.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<PathBuf>,
    #[serde(default)]
    pub backend: BackendChoice,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendChoice {
    #[default]
    Auto,
    Portable,
    Avx512,
}

impl BackendChoice {
    pub fn resolve(self) -> Backend {
        match self {
            BackendChoice::Auto => Backend::detect(),
            BackendChoice::Portable => Backend::Portable,
            BackendChoice::Avx512 => Backend::Avx512,
        }
    }
}

/// Switches for ablation runs. Splatting has no switch of its own; a
/// `"splat": false` entry is rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StageToggles {
    pub sharpen: bool,
    pub splat: bool,
    pub fill_partial: bool,
    pub fill_full: bool,
    pub fusion: bool,
}

impl Default for StageToggles {
    fn default() -> Self {
        Self { sharpen: true, splat: true, fill_partial: true, fill_full: true, fusion: true }
    }
}

impl PipelineConfig {
    /// Reads, path-resolves and validates a configuration file.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg: PipelineConfig = read_json(path)?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        for p in [&mut self.depth.left, &mut self.depth.right, &mut self.fusion.weights].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }

    pub fn rig_model(&self) -> Result<RigModel> {
        RigModel::symmetric(&self.rig).map_err(|e| Error::Config(format!("rig: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.rig_model()?;
        let sub = |r: passthrough_core::Result<()>, what: &str| r.map_err(|e| Error::Config(format!("{what}: {e}")));
        sub(self.depth.provider.validate(), "depth")?;
        sub(self.sharpen.validate(), "sharpen")?;
        sub(self.filter.validate(), "filter")?;
        if !self.stages.splat {
            return Err(Error::Config("splatting cannot be disabled".into()));
        }
        if !(1..=2).contains(&self.threads) {
            return Err(Error::Config(format!("threads must be 1 or 2, got {}", self.threads)));
        }
        if self.depth.provider.kind != ProviderKind::Sgm {
            for (side, p) in [("left", &self.depth.left), ("right", &self.depth.right)] {
                match p {
                    Some(p) if p.is_file() => {}
                    Some(p) => return Err(Error::Config(format!("depth.{side}: {} does not exist", p.display()))),
                    None if self.depth.provider.kind == ProviderKind::ExternalFile => {
                        return Err(Error::Config(format!("depth.{side} is required for the external_file provider")))
                    }
                    // ground truth may be supplied by the caller instead
                    None => {}
                }
            }
        }
        if let Some(w) = &self.fusion.weights {
            if !w.is_file() {
                return Err(Error::Config(format!("fusion.weights: {} does not exist", w.display())));
            }
        }
        let backend = self.fusion.backend.resolve();
        if !backend.is_supported() {
            return Err(Error::Config(format!("fusion backend {} is not supported on this CPU", backend.name())));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_takes_defaults() {
        let cfg: PipelineConfig = serde_json::from_str(r#"{"schema_version": 1}"#).unwrap();
        assert_eq!(cfg, PipelineConfig::default());
        cfg.validate().unwrap();
        assert_eq!(cfg.filter.kernel_size, 29);
        assert_eq!(cfg.depth.provider.d_max, 128);
    }

    #[test]
    fn round_trips_through_json() {
        let mut cfg = PipelineConfig::default();
        cfg.stages.fill_full = false;
        cfg.depth.provider.kind = ProviderKind::GroundTruth;
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<PipelineConfig>(&text).unwrap(), cfg);
    }

    #[test]
    fn rejects_bad_documents() {
        let parse = |s: &str| serde_json::from_str::<PipelineConfig>(s);
        assert!(parse(r#"{"schema_version": 1, "bogus": 3}"#).is_err());
        assert!(parse(r#"{"schema_version": 1, "stages": {"fusoin": false}}"#).is_err());
        let v = |s: &str| parse(s).unwrap().validate();
        assert!(v(r#"{"schema_version": 2}"#).is_err());
        assert!(v(r#"{"schema_version": 1, "stages": {"splat": false}}"#).is_err());
        assert!(v(r#"{"schema_version": 1, "threads": 0}"#).is_err());
        assert!(v(r#"{"schema_version": 1, "depth": {"kind": "external_file"}}"#).is_err());
        assert!(v(r#"{"schema_version": 1, "fusion": {"weights": "/nonexistent/w.npfw"}}"#).is_err());
        assert!(v(r#"{"schema_version": 1, "filter": {"kernel_size": 28}}"#).is_err());
    }

    #[test]
    fn relative_paths_follow_the_config_file() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("w.npfw"), b"").unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"schema_version": 1, "fusion": {"weights": "w.npfw"}}"#).unwrap();
        let cfg = PipelineConfig::load(&p).unwrap();
        assert_eq!(cfg.fusion.weights.unwrap(), dir.path().join("w.npfw"));
    }
}
