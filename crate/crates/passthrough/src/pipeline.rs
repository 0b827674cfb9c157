//! End-to-end reconstruction of both eye views from one stereo frame.
//!
//! Stages run in a fixed order: depth, sharpen, splat, disocclusion filter,
//! fusion. Depth and sharpening work on the two input views and are shared;
//! the remaining stages form one independent chain per eye, and the two
//! chains may run on separate threads. Every stage is a deterministic
//! function of its inputs, so outputs do not depend on the thread count.

use std::sync::Mutex;
use std::time::{Duration, Instant};

use passthrough_core::disocclusion::{fill_full_counted, fill_partial, occlusion_masks, OcclusionMasks};
use passthrough_core::fusion::{FusionEngine, FusionScratch, FusionWeights};
use passthrough_core::rectify::rectify_pair;
use passthrough_core::rig::{PinholeCamera, RigModel};
use passthrough_core::sharpen::sharpen_rgbd;
use passthrough_core::splat::{splat_sources_to_eye, EyeSplats, SplatSource};
use passthrough_core::stereo::{DepthProvider, GroundTruthDepth, PrecomputedDisparity, ProviderKind, SgmProvider};
use passthrough_core::stereo::DisparityMap;
use passthrough_core::{ImagePlane, RgbdView};
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::{Error, Result, StageContext};
use crate::io::load_pfm;
use crate::npfw;

/// Wall-clock milliseconds per stage. Stage figures add up the work of both
/// eyes; `total` is end to end, so it falls below the sum when the eyes
/// overlap.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub depth: f64,
    pub sharpen: f64,
    pub splat: f64,
    pub disocclusion: f64,
    pub fusion: f64,
    pub total: f64,
}

impl StageTiming {
    /// Everything after depth estimation.
    pub fn non_depth(&self) -> f64 {
        self.sharpen + self.splat + self.disocclusion + self.fusion
    }

    pub fn stage_sum(&self) -> f64 {
        self.depth + self.non_depth()
    }

    /// One line per stage followed by the total.
    pub fn report(&self) -> String {
        format!(
            "depth estimation {:.1}ms, RGB-D sharpening {:.1}ms, forward splatting {:.1}ms, disocclusion filtering {:.1}ms, fusion {:.1}ms; total {:.1}ms",
            self.depth, self.sharpen, self.splat, self.disocclusion, self.fusion, self.total
        )
    }
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

/// Everything produced for one eye.
#[derive(Debug, Clone)]
pub struct EyeResult {
    /// Final color.
    pub image: ImagePlane,
    pub splats: EyeSplats,
    pub masks: OcclusionMasks,
    /// Filtered warp of the left input view, `F_l`.
    pub from_left: ImagePlane,
    /// Filtered warp of the right input view, `F_r`.
    pub from_right: ImagePlane,
    /// Full-disocclusion pixels of `F_l` and `F_r` that no filter filled:
    /// all of the mask when full filtering is off, otherwise the pixels
    /// without a contributing neighbor.
    pub unfilled: [usize; 2],
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub eye_left: EyeResult,
    pub eye_right: EyeResult,
    /// Sharpened input views handed to splatting.
    pub view_left: RgbdView,
    pub view_right: RgbdView,
    pub timing: StageTiming,
}

/// Depth handed in by the caller instead of the configured provider.
#[derive(Debug, Clone, Copy)]
pub enum DepthOverride<'a> {
    /// Inverse depth (1/m) at both input views.
    InverseDepth(&'a ImagePlane, &'a ImagePlane),
}

/// A validated configuration with its weights loaded, ready to process
/// frames. Keeps per-eye scratch memory between frames.
#[derive(Debug)]
pub struct Pipeline {
    config: PipelineConfig,
    rig: RigModel,
    engine: Option<FusionEngine>,
    external: Option<(ImagePlane, ImagePlane)>,
    scratch: [Mutex<FusionScratch>; 2],
}

impl Pipeline {
    pub fn new(config: PipelineConfig) -> Result<Self> {
        config.validate()?;
        let weights = match (&config.fusion.weights, config.stages.fusion) {
            (Some(p), true) => Some(npfw::load(p)?),
            _ => None,
        };
        Self::with_weights(config, weights)
    }

    /// Like [`new`](Self::new) but with weights already in memory (the
    /// config's weight path is ignored).
    pub fn with_weights(config: PipelineConfig, weights: Option<FusionWeights>) -> Result<Self> {
        let rig = config.rig_model()?;
        let engine = match weights {
            Some(w) if config.stages.fusion => Some(FusionEngine::new(&w, config.fusion.backend.resolve()).stage("fusion")?),
            _ => None,
        };
        let external = match (config.depth.provider.kind, &config.depth.left, &config.depth.right) {
            (ProviderKind::Sgm, _, _) => None,
            (_, Some(l), Some(r)) => Some((load_pfm(l)?, load_pfm(r)?)),
            (_, None, None) => None,
            _ => return Err(Error::Config("depth.left and depth.right must be given together".into())),
        };
        Ok(Self { config, rig, engine, external, scratch: Default::default() })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn rig(&self) -> &RigModel {
        &self.rig
    }

    pub fn has_fusion(&self) -> bool {
        self.engine.is_some()
    }

    pub fn fusion_backend(&self) -> Option<passthrough_core::fusion::Backend> {
        self.engine.as_ref().map(|e| e.backend())
    }

    pub fn run(&self, left: &ImagePlane, right: &ImagePlane) -> Result<PipelineOutput> {
        self.run_with(left, right, None)
    }

    pub fn run_with(&self, left: &ImagePlane, right: &ImagePlane, depth: Option<DepthOverride<'_>>) -> Result<PipelineOutput> {
        let t0 = Instant::now();
        let (rig, left, right, (inv_l, inv_r)) = self.depth_stage(left, right, depth)?;
        let depth_ms = ms(t0.elapsed());
        let mut out = self.run_from_depth(&rig, &left, &right, inv_l, inv_r)?;
        out.timing.depth = depth_ms;
        out.timing.total = ms(t0.elapsed());
        Ok(out)
    }

    /// Inverse depth at both input views, plus the (possibly rectified) rig
    /// and images the depth refers to.
    #[allow(clippy::type_complexity)]
    pub fn depth_stage(
        &self,
        left: &ImagePlane,
        right: &ImagePlane,
        depth: Option<DepthOverride<'_>>,
    ) -> Result<(RigModel, ImagePlane, ImagePlane, (ImagePlane, ImagePlane))> {
        let cam = &self.rig.cam_left;
        for (img, side) in [(left, "left"), (right, "right")] {
            if img.width() != cam.width() || img.height() != cam.height() || img.channels() != 3 {
                return Err(Error::Config(format!(
                    "{side} input is {}x{}x{} but the rig expects {}x{} RGB",
                    img.width(),
                    img.height(),
                    img.channels(),
                    cam.width(),
                    cam.height()
                )));
            }
        }
        let (rig, left, right) = if self.rig.inputs_rectified() {
            (self.rig, left.clone(), right.clone())
        } else {
            let r = rectify_pair(left, right, &self.rig).stage("rectify")?;
            (r.rig, r.left, r.right)
        };
        let f = rig.cam_left.intrinsics.fx;
        let b = rig.baseline();
        let kind = self.config.depth.provider.kind;
        let pair = match (depth, kind, &self.external) {
            (Some(DepthOverride::InverseDepth(l, r)), _, _) => {
                GroundTruthDepth { left: l.clone(), right: r.clone() }.inverse_depth_pair(&left, &right, f, b)
            }
            (None, ProviderKind::Sgm, _) => SgmProvider { config: self.config.depth.provider }.inverse_depth_pair(&left, &right, f, b),
            (None, ProviderKind::GroundTruth, Some((l, r))) => {
                GroundTruthDepth { left: l.clone(), right: r.clone() }.inverse_depth_pair(&left, &right, f, b)
            }
            (None, ProviderKind::ExternalFile, Some((l, r))) => {
                let dense = |m: &ImagePlane| DisparityMap::dense(m.clone());
                let p = PrecomputedDisparity { left: dense(l).stage("depth")?, right: dense(r).stage("depth")? };
                p.inverse_depth_pair(&left, &right, f, b)
            }
            (None, _, None) => {
                return Err(Error::Config("the configured depth provider needs depth maps but none were given".into()))
            }
        }
        .stage("depth")?;
        Ok((rig, left, right, pair))
    }

    /// Sharpen, splat, filter and fuse, given inverse depth at both inputs.
    pub fn run_from_depth(
        &self,
        rig: &RigModel,
        left: &ImagePlane,
        right: &ImagePlane,
        inv_l: ImagePlane,
        inv_r: ImagePlane,
    ) -> Result<PipelineOutput> {
        let t0 = Instant::now();
        let mut view_left = RgbdView::new(left.clone(), inv_l).stage("sharpen")?;
        let mut view_right = RgbdView::new(right.clone(), inv_r).stage("sharpen")?;
        if self.config.stages.sharpen {
            view_left = sharpen_rgbd(&view_left, &self.config.sharpen).stage("sharpen")?;
            view_right = sharpen_rgbd(&view_right, &self.config.sharpen).stage("sharpen")?;
        }
        let sharpen_ms = ms(t0.elapsed());
        let t_src = Instant::now();
        let (src_left, src_right) = (SplatSource::new(&view_left), SplatSource::new(&view_right));
        let prep_ms = ms(t_src.elapsed());

        let eyes = [(&rig.eye_left, 0usize), (&rig.eye_right, 1usize)];
        let run_eye = |(eye, idx): (&PinholeCamera, usize)| self.eye_chain(rig, &src_left, &src_right, eye, idx);
        let (a, b) = if self.config.threads >= 2 {
            std::thread::scope(|s| {
                let h = s.spawn(move || run_eye(eyes[1]));
                let a = run_eye(eyes[0]);
                (a, h.join().expect("eye thread panicked"))
            })
        } else {
            (run_eye(eyes[0]), run_eye(eyes[1]))
        };
        let ((eye_left, tl), (eye_right, tr)) = (a?, b?);
        let timing = StageTiming {
            depth: 0.0,
            sharpen: sharpen_ms,
            splat: prep_ms + tl[0] + tr[0],
            disocclusion: tl[1] + tr[1],
            fusion: tl[2] + tr[2],
            total: ms(t0.elapsed()),
        };
        Ok(PipelineOutput { eye_left, eye_right, view_left, view_right, timing })
    }

    fn eye_chain(
        &self,
        rig: &RigModel,
        src_left: &SplatSource<'_>,
        src_right: &SplatSource<'_>,
        eye: &PinholeCamera,
        idx: usize,
    ) -> Result<(EyeResult, [f64; 3])> {
        let stages = &self.config.stages;
        let t0 = Instant::now();
        let splats = splat_sources_to_eye(src_left, src_right, rig, eye);
        let t1 = Instant::now();

        let cfg = &self.config.filter;
        let (l, r) = (&splats.from_left, &splats.from_right);
        let masks = occlusion_masks(&l.inv_depth, &r.inv_depth, cfg).stage("disocclusion")?;
        let (p_l, p_r) = if stages.fill_partial {
            fill_partial(&l.color, &r.color, &masks).stage("disocclusion")?
        } else {
            (l.color.clone(), r.color.clone())
        };
        let ((from_left, ul), (from_right, ur)) = if stages.fill_full {
            let kernel = cfg.kernel().stage("disocclusion")?;
            (
                fill_full_counted(&p_l, &l.inv_depth, &masks.full, &kernel, cfg.valid_floor).stage("disocclusion")?,
                fill_full_counted(&p_r, &r.inv_depth, &masks.full, &kernel, cfg.valid_floor).stage("disocclusion")?,
            )
        } else {
            let n = masks.full.count_nonzero();
            ((p_l, n), (p_r, n))
        };
        let t2 = Instant::now();

        let image = match &self.engine {
            Some(engine) => {
                let mut scratch = self.scratch[idx].lock().unwrap_or_else(|e| e.into_inner());
                engine.fuse_with(&mut scratch, &from_left, &from_right).stage("fusion")?
            }
            None if idx == 0 => from_left.clone(),
            None => from_right.clone(),
        };
        let t3 = Instant::now();
        let times = [ms(t1 - t0), ms(t2 - t1), ms(t3 - t2)];
        Ok((EyeResult { image, splats, masks, from_left, from_right, unfilled: [ul, ur] }, times))
    }
}
