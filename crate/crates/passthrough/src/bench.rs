//! Repeated pipeline runs on a synthetic frame with per-stage statistics.

use passthrough_core::rig::RigModel;
use passthrough_core::scene::SceneSpec;
use passthrough_core::stereo::ProviderKind;
use passthrough_core::ImagePlane;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::time::Instant;

use crate::config::PipelineConfig;
use crate::dataset::{random_scene, SceneKind};
use crate::error::{Error, Result, StageContext};
use crate::pipeline::{DepthOverride, Pipeline, StageTiming};

/// Per-frame time of the reference implementation on its GPUs, for context.
pub const PAPER_FRAME_MS: f64 = 32.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchOptions {
    pub frames: usize,
    /// Overrides the config's rig resolution, scaling its focal lengths.
    pub resolution: Option<(usize, usize)>,
    /// Estimate depth every `depth_every` frames and reuse it in between.
    pub depth_every: usize,
    pub seed: u64,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self { frames: 10, resolution: None, depth_every: 1, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub depth_every: usize,
    pub backend: Option<String>,
    pub median: StageTiming,
    pub p95: StageTiming,
    pub per_frame: Vec<StageTiming>,
    pub paper_frame_ms: f64,
}

impl BenchReport {
    pub fn summary(&self) -> String {
        format!(
            "{}x{}, {} frames, depth every {} frame(s)\nmedian: {}\np95:    {}\nmedian total {:.1}ms (reference implementation on GPU: {PAPER_FRAME_MS}ms)",
            self.width,
            self.height,
            self.frames,
            self.depth_every,
            self.median.report(),
            self.p95.report(),
            self.median.total
        )
    }
}

/// Nearest-rank percentile of each stage independently.
pub fn percentile(samples: &[StageTiming], q: f64) -> StageTiming {
    let pick = |f: fn(&StageTiming) -> f64| {
        let mut v: Vec<f64> = samples.iter().map(f).collect();
        if v.is_empty() {
            return 0.0;
        }
        v.sort_by(f64::total_cmp);
        let rank = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
        v[rank - 1]
    };
    StageTiming {
        depth: pick(|t| t.depth),
        sharpen: pick(|t| t.sharpen),
        splat: pick(|t| t.splat),
        disocclusion: pick(|t| t.disocclusion),
        fusion: pick(|t| t.fusion),
        total: pick(|t| t.total),
    }
}

/// The benchmark frame: an occluder scene rendered for the rig, with its
/// exact inverse depth.
pub fn bench_frame(rig: &RigModel, seed: u64) -> Result<[ImagePlane; 4]> {
    let fov = 2.0 * (rig.cam_left.width() as f64 / 2.0 / rig.cam_left.intrinsics.fx).atan();
    let scene: SceneSpec = random_scene(&mut ChaCha8Rng::seed_from_u64(seed), SceneKind::Occluders, fov);
    let l = scene.render(&rig.cam_left).stage("render")?;
    let r = scene.render(&rig.cam_right).stage("render")?;
    Ok([l.view.color, r.view.color, l.view.inv_depth, r.view.inv_depth])
}

pub fn run_bench(config: &PipelineConfig, options: &BenchOptions) -> Result<BenchReport> {
    if options.frames == 0 || options.depth_every == 0 {
        return Err(Error::Config("frames and depth reuse interval must be at least 1".into()));
    }
    let mut cfg = config.clone();
    if let Some((w, h)) = options.resolution {
        cfg.rig = cfg.rig.with_resolution(w, h);
    }
    let ground_truth = cfg.depth.provider.kind != ProviderKind::Sgm;
    if ground_truth {
        // the frame's own depth stands in for whatever maps the config names
        cfg.depth.provider.kind = ProviderKind::GroundTruth;
        cfg.depth.left = None;
        cfg.depth.right = None;
    }
    let pipeline = Pipeline::new(cfg)?;
    let [left, right, inv_l, inv_r] = bench_frame(pipeline.rig(), options.seed)?;
    let gt = ground_truth.then_some(DepthOverride::InverseDepth(&inv_l, &inv_r));

    let mut per_frame = Vec::with_capacity(options.frames);
    let mut cached = None;
    for k in 0..options.frames {
        let t0 = Instant::now();
        if k % options.depth_every == 0 || cached.is_none() {
            cached = Some(pipeline.depth_stage(&left, &right, gt)?);
        }
        let depth_ms = t0.elapsed().as_secs_f64() * 1e3;
        let (rig, l, r, (dl, dr)) = cached.as_ref().expect("depth computed above");
        let mut out = pipeline.run_from_depth(rig, l, r, dl.clone(), dr.clone())?;
        out.timing.depth = depth_ms;
        out.timing.total = t0.elapsed().as_secs_f64() * 1e3;
        per_frame.push(out.timing);
    }
    let rig = pipeline.rig();
    Ok(BenchReport {
        width: rig.cam_left.width(),
        height: rig.cam_left.height(),
        frames: options.frames,
        depth_every: options.depth_every,
        backend: pipeline.fusion_backend().map(|b| b.name().to_string()),
        median: percentile(&per_frame, 0.5),
        p95: percentile(&per_frame, 0.95),
        per_frame,
        paper_frame_ms: PAPER_FRAME_MS,
    })
}
