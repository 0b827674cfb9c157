//! Runs the pipeline over a dataset and scores both eyes against ground
//! truth, once over the whole image and once outside the full-disocclusion
//! mask `M̂` the pipeline itself computes.

use std::path::{Path, PathBuf};

use passthrough_core::fusion::FusionWeights;
use passthrough_core::metrics::{masked_loss, psnr, psnr_masked, ssim_masked, ssim_mean};
use passthrough_core::stereo::ProviderKind;
use passthrough_core::ImagePlane;
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::dataset::{CaseData, Dataset};
use crate::error::{Error, Result, StageContext};
use crate::io::{save_color, save_pfm, write_json};
use crate::npfw;
use crate::pipeline::{DepthOverride, EyeResult, Pipeline, StageTiming};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FullScores {
    pub psnr_db: f64,
    pub ssim: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskedScores {
    pub psnr_db: f64,
    pub ssim: f64,
    pub masked_loss: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EyeScores {
    pub full: FullScores,
    pub masked: MaskedScores,
    pub pixels_total: usize,
    pub pixels_masked: usize,
    /// Full-disocclusion pixels of `F_l` plus `F_r` left without color.
    pub unfilled: usize,
}

impl EyeScores {
    pub fn compute(eye: &EyeResult, truth: &ImagePlane) -> Result<Self> {
        let m = &eye.masks.full;
        let s = |r: passthrough_core::Result<f64>| r.stage("metrics");
        Ok(Self {
            full: FullScores { psnr_db: s(psnr(&eye.image, truth))?, ssim: s(ssim_mean(&eye.image, truth))? },
            masked: MaskedScores {
                psnr_db: s(psnr_masked(&eye.image, truth, m))?,
                ssim: s(ssim_masked(&eye.image, truth, m))?,
                masked_loss: s(masked_loss(&eye.image, truth, m))?,
            },
            pixels_total: m.len_pixels(),
            pixels_masked: m.count_nonzero(),
            unfilled: eye.unfilled[0] + eye.unfilled[1],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseReport {
    pub name: String,
    pub ipd_m: f64,
    pub eye_left: EyeScores,
    pub eye_right: EyeScores,
    pub timing: StageTiming,
}

/// Means over every eye of every case.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MeanScores {
    pub psnr_db: f64,
    pub ssim: f64,
    pub masked_psnr_db: f64,
    pub masked_ssim: f64,
    pub masked_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset: PathBuf,
    pub fusion: bool,
    pub config: PipelineConfig,
    pub cases: Vec<CaseReport>,
    pub mean: MeanScores,
}

impl MeanScores {
    pub fn of(cases: &[CaseReport]) -> Self {
        let eyes: Vec<&EyeScores> = cases.iter().flat_map(|c| [&c.eye_left, &c.eye_right]).collect();
        let n = eyes.len().max(1) as f64;
        let mean = |f: &dyn Fn(&EyeScores) -> f64| eyes.iter().map(|e| f(e)).sum::<f64>() / n;
        Self {
            psnr_db: mean(&|e| e.full.psnr_db),
            ssim: mean(&|e| e.full.ssim),
            masked_psnr_db: mean(&|e| e.masked.psnr_db),
            masked_ssim: mean(&|e| e.masked.ssim),
            masked_loss: mean(&|e| e.masked.masked_loss),
        }
    }
}

/// Evaluation settings beyond the pipeline configuration.
#[derive(Debug, Clone, Default)]
pub struct EvalOptions {
    /// Where to write per-eye `F_l`, `F_r` (PNG) and `M̂` (PFM).
    pub intermediates: Option<PathBuf>,
    /// Weights already in memory; overrides the config's weight path.
    pub weights: Option<FusionWeights>,
}

/// Runs one case with the dataset's rig. Ground-truth depth comes from the
/// case files when the configured provider asks for it.
pub fn run_case(config: &PipelineConfig, weights: Option<FusionWeights>, case: &CaseData) -> Result<crate::PipelineOutput> {
    let mut cfg = config.clone();
    cfg.rig = case.rig;
    let (override_depth, pipeline) = match cfg.depth.provider.kind {
        ProviderKind::Sgm => (None, Pipeline::with_weights(cfg, weights)?),
        ProviderKind::GroundTruth => {
            cfg.depth.left = None;
            cfg.depth.right = None;
            (Some(DepthOverride::InverseDepth(&case.input_l_depth, &case.input_r_depth)), Pipeline::with_weights(cfg, weights)?)
        }
        ProviderKind::ExternalFile => {
            return Err(Error::Config("evaluate needs the sgm or ground_truth depth provider".into()));
        }
    };
    pipeline.run_with(&case.input_l, &case.input_r, override_depth)
}

fn write_intermediates(dir: &Path, name: &str, eye: &str, e: &EyeResult) -> Result<()> {
    let d = dir.join(name);
    save_color(&e.from_left, &d.join(format!("{eye}_f_l.png")))?;
    save_color(&e.from_right, &d.join(format!("{eye}_f_r.png")))?;
    save_pfm(&e.masks.full, &d.join(format!("{eye}_mask.pfm")))
}

pub fn evaluate_dataset(root: &Path, config: &PipelineConfig, options: &EvalOptions) -> Result<EvalReport> {
    let ds = Dataset::open(root)?;
    let weights = match (&options.weights, &config.fusion.weights, config.stages.fusion) {
        (Some(w), _, true) => Some(w.clone()),
        (None, Some(p), true) => Some(npfw::load(p)?),
        _ => None,
    };
    let mut cases = Vec::with_capacity(ds.len());
    for i in 0..ds.len() {
        let case = ds.load(i)?;
        let out = run_case(config, weights.clone(), &case)?;
        if let Some(dir) = &options.intermediates {
            write_intermediates(dir, &case.name, "eye_l", &out.eye_left)?;
            write_intermediates(dir, &case.name, "eye_r", &out.eye_right)?;
        }
        cases.push(CaseReport {
            name: case.name.clone(),
            ipd_m: case.rig.ipd_m,
            eye_left: EyeScores::compute(&out.eye_left, &case.eye_l_gt)?,
            eye_right: EyeScores::compute(&out.eye_right, &case.eye_r_gt)?,
            timing: out.timing,
        });
    }
    if let Some(dir) = &options.intermediates {
        write_json(&dir.join("index.json"), &ds.manifest.cases.iter().map(|c| &c.name).collect::<Vec<_>>())?;
    }
    Ok(EvalReport {
        dataset: root.to_path_buf(),
        fusion: weights.is_some(),
        config: config.clone(),
        mean: MeanScores::of(&cases),
        cases,
    })
}
