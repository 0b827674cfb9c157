//! Acceptance checks. Prints one PASS/FAIL line per criterion.
//!
//! Exits 0 either way so the rest of the test suite still runs; set
//! `ACCEPTANCE_STRICT=1` to turn any FAIL into a non-zero exit.

use std::time::Instant;

use passthrough::analysis::{fusion_selftest, random_weights, SELFTEST_TOLERANCE};
use passthrough::bench::{run_bench, BenchOptions};
use passthrough::dataset::{random_scene, DatasetSpec, SceneKind};
use passthrough::pipeline::DepthOverride;
use passthrough::{npfw, Pipeline, PipelineConfig};
use passthrough_core::disocclusion::{fill_full_counted, fill_partial, occlusion_masks, FilterConfig};
use passthrough_core::fusion::{self, Backend};
use passthrough_core::metrics::{psnr, psnr_masked};
use passthrough_core::rig::{disocclusion_width_raw, Intrinsics, PinholeCamera, Pose, RigModel, RigParams};
use passthrough_core::scene::{Background, PassthroughCase, PlaneLayer, Rect, SceneSpec, Texture, Visibility, BACKGROUND};
use passthrough_core::splat::splat_to_eye;
use passthrough_core::stereo::{sgm_match, DepthProviderConfig, ProviderKind};
use passthrough_core::{ImagePlane, Mat3, PixelCoord, RgbdView, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
    info: Vec<String>,
}

impl Outcome {
    fn new(pass: bool, detail: String) -> Self {
        Self { pass, detail, info: Vec::new() }
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn noise(rng: &mut ChaCha8Rng, cell_m: f64) -> Texture {
    let a: [f32; 3] = std::array::from_fn(|_| rng.random_range(0.0..0.3));
    let b: [f32; 3] = std::array::from_fn(|_| rng.random_range(0.7..1.0));
    Texture::ValueNoise { seed: rng.random(), cell_m, a, b }
}

fn gt_config(rig: RigParams) -> PipelineConfig {
    let mut cfg = PipelineConfig::default();
    cfg.rig = rig;
    cfg.depth.provider.kind = ProviderKind::GroundTruth;
    cfg.stages.fusion = false;
    cfg
}

fn run_gt(cfg: PipelineConfig, case: &PassthroughCase) -> passthrough::PipelineOutput {
    let p = Pipeline::with_weights(cfg, None).expect("pipeline");
    let (l, r) = (&case.input_left.view, &case.input_right.view);
    p.run_with(&l.color, &r.color, Some(DepthOverride::InverseDepth(&l.inv_depth, &r.inv_depth))).expect("pipeline run")
}

// ---------------------------------------------------------------- geometry

/// Background pixels along the middle row of `eye` that lie beyond the
/// occluder edge `edge_x` (on the side given by `outward`) and are hidden
/// from `cam`.
fn hidden_run(scene: &SceneSpec, eye: &PinholeCamera, cam: &PinholeCamera, edge_x: f64, outward: f64) -> usize {
    let y = (eye.height() / 2) as f64;
    (0..eye.width())
        .filter(|&px| {
            let hit = scene.trace(eye, PixelCoord::new(px as f64, y)).expect("trace");
            hit.label == BACKGROUND
                && (hit.point.x - edge_x) * outward > 0.0
                && scene.visibility(cam, hit.point, hit.label) == Visibility::Occluded
        })
        .count()
}

fn geometry_oracle() -> Outcome {
    const W: usize = 1024;
    let fov = 100f64.to_radians();
    let focal = Intrinsics::from_horizontal_fov(W, 3, fov).fx;
    let mut r = rng(11);
    let mut worst: f64 = 0.0;
    let mut widths = Vec::new();
    for _ in 0..50 {
        let t = r.random_range(0.05..0.12);
        let phi = r.random_range(10f64..60.0).to_radians();
        let x = r.random_range(0.0..0.95) * t * (phi / 2.0).tan();
        let e = r.random_range(0.054..0.074);
        let zn = r.random_range(0.5..1.5);
        let zf = r.random_range(zn + 0.5..5.0);
        let params = RigParams {
            width: W,
            height: 3,
            focal_px: focal,
            hmd_thickness_m: t,
            camera_offset_m: x,
            ipd_m: e,
            interest_angle_rad: phi,
            eye_focal_px: None,
        };
        let rig = RigModel::symmetric(&params).expect("rig");
        let beta = disocclusion_width_raw(t, x, phi, zn, zf);
        let predicted = focal * beta / (zf + t);
        let reach = (zn + t) * (phi / 2.0).tan();
        // one occluder per eye, its inner edge on the boundary of that eye's cone
        for (eye, cam, sign) in [(&rig.eye_left, &rig.cam_left, -1.0), (&rig.eye_right, &rig.cam_right, 1.0)] {
            let edge = eye.center().x + sign * reach;
            let extent = if sign < 0.0 { Rect::new(edge, edge + 10.0, -10.0, 10.0) } else { Rect::new(edge - 10.0, edge, -10.0, 10.0) };
            let scene = SceneSpec {
                layers: vec![PlaneLayer { depth: zn, extent, texture: noise(&mut r, 0.05) }],
                background: Background { depth: zf, texture: noise(&mut r, 0.1) },
                seed: 0,
            };
            let measured = hidden_run(&scene, eye, cam, edge, sign) as f64;
            worst = worst.max((measured - predicted).abs());
            widths.push(predicted);
        }
    }
    let width_ok = worst <= 1.0;

    // with the cameras pushed out to x >= t·tan(φ/2), nothing in the cone is hidden from both
    let mut in_cone_hidden = 0usize;
    let mut out_cone_hidden = 0usize;
    for _ in 0..50 {
        let t = r.random_range(0.05..0.12);
        let phi = r.random_range(10f64..60.0).to_radians();
        let x = t * (phi / 2.0).tan() + r.random_range(0.0..0.03);
        let params = RigParams {
            width: W,
            height: 3,
            focal_px: focal,
            hmd_thickness_m: t,
            camera_offset_m: x,
            ipd_m: r.random_range(0.054..0.074),
            interest_angle_rad: phi,
            eye_focal_px: None,
        };
        let rig = RigModel::symmetric(&params).expect("rig");
        let zn = r.random_range(0.4..1.5);
        let zf = r.random_range(zn + 0.5..5.0);
        // a full-height strip with one edge somewhere inside a random eye's cone
        let eye = if r.random::<bool>() { &rig.eye_left } else { &rig.eye_right };
        let edge = eye.center().x + (zn + t) * r.random_range(-1.0..1.0) * (phi / 2.0).tan();
        let w = r.random_range(0.05..0.4);
        let extent = if r.random::<bool>() { Rect::new(edge, edge + w, -10.0, 10.0) } else { Rect::new(edge - w, edge, -10.0, 10.0) };
        let scene = SceneSpec {
            layers: vec![PlaneLayer { depth: zn, extent, texture: noise(&mut r, 0.05) }],
            background: Background { depth: zf, texture: noise(&mut r, 0.1) },
            seed: 0,
        };
        for eye in [&rig.eye_left, &rig.eye_right] {
            let y = (eye.height() / 2) as f64;
            for px in 0..W {
                let p = PixelCoord::new(px as f64, y);
                let d = eye.world_ray(p);
                let hit = scene.trace(eye, p).expect("trace");
                let hidden = [&rig.cam_left, &rig.cam_right]
                    .iter()
                    .all(|c| scene.visibility(c, hit.point, hit.label) != Visibility::Visible);
                if hidden {
                    if (d.x / d.z).atan().abs() <= phi / 2.0 {
                        in_cone_hidden += 1;
                    } else {
                        out_cone_hidden += 1;
                    }
                }
            }
        }
    }
    let mean_w = widths.iter().sum::<f64>() / widths.len() as f64;
    let mut o = Outcome::new(
        width_ok && in_cone_hidden == 0,
        format!(
            "max |measured - predicted| = {worst:.2} px over 100 edges (tol 1 px, mean width {mean_w:.1} px); \
             hidden pixels inside the cone with x >= t*tan(phi/2): {in_cone_hidden} (outside: {out_cone_hidden})"
        ),
    );
    o.info.push(format!("{} edges, widths {:.1}..{:.1} px", widths.len(), widths.iter().cloned().fold(f64::MAX, f64::min), widths.iter().cloned().fold(0.0, f64::max)));
    o
}

// -------------------------------------------------------------------- warp

fn warp_oracle() -> Outcome {
    let spec = DatasetSpec::default();
    let mut scores = Vec::new();
    for i in 0..10 {
        let params = spec.rig(i);
        let rig = RigModel::symmetric(&params).expect("rig");
        let scene = random_scene(&mut rng(100 + i as u64), SceneKind::Plain, spec.camera_fov_deg.to_radians());
        let case = scene.render_passthrough_case(&rig).expect("render");
        let out = run_gt(gt_config(params), &case);
        for (eye, truth) in [(&out.eye_left, &case.eye_left), (&out.eye_right, &case.eye_right)] {
            scores.push(psnr_masked(&eye.image, &truth.view.color, &eye.masks.full).expect("psnr"));
        }
    }
    let min = scores.iter().cloned().fold(f64::MAX, f64::min);
    let mean = scores.iter().sum::<f64>() / scores.len() as f64;
    Outcome::new(min >= 40.0, format!("covered-pixel PSNR min {min:.2} dB, mean {mean:.2} dB over 20 eyes (need >= 40 dB)"))
}

// ------------------------------------------------------------------ filter

struct FilterCase {
    params: RigParams,
    case: PassthroughCase,
}

/// Hole thickness in pixels: twice the number of 3×3 erosions it takes
/// for the hole set to vanish.
fn hole_thickness(mask: &ImagePlane) -> usize {
    let (w, h) = (mask.width(), mask.height());
    let mut cur: Vec<bool> = mask.data().iter().map(|&v| v != 0.0).collect();
    let mut passes = 0;
    while cur.iter().any(|&v| v) {
        let next = (0..w * h)
            .map(|i| {
                let (x, y) = (i % w, i / w);
                (y.saturating_sub(1)..(y + 2).min(h)).all(|yy| (x.saturating_sub(1)..(x + 2).min(w)).all(|xx| cur[yy * w + xx]))
                    && x > 0
                    && y > 0
                    && x + 1 < w
                    && y + 1 < h
            })
            .collect();
        cur = next;
        passes += 1;
    }
    2 * passes
}

/// Color carrying the surface label: channel 0 is 1 on the background,
/// channel 1 is 1 everywhere.
fn label_view(input: &passthrough_core::scene::Render) -> RgbdView {
    let (w, h) = (input.view.width(), input.view.height());
    let color = ImagePlane::from_rgb_fn(w, h, |x, y| [(input.label(x, y) == BACKGROUND) as u8 as f32, 1.0, 0.0]);
    RgbdView::new(color, input.view.inv_depth.clone()).expect("view")
}

/// Occluder scenes whose full holes show the background and whose partial
/// holes are at most 12 px thick, inside the fill window radius.
fn filter_cases(n: usize) -> (Vec<FilterCase>, usize) {
    let spec = DatasetSpec::default();
    let cfg = FilterConfig::default();
    let mut out = Vec::new();
    let mut rejected = 0;
    let mut k = 0u64;
    while out.len() < n {
        assert!(rejected < 20 * n, "could not find {n} usable occluder scenes");
        let params = spec.rig(out.len());
        k += 1;
        let rig = RigModel::symmetric(&params).expect("rig");
        let scene = random_scene(&mut rng(1000 + k), SceneKind::Occluders, spec.camera_fov_deg.to_radians());
        let case = scene.render_passthrough_case(&rig).expect("render");
        let (lv, rv) = (label_view(&case.input_left), label_view(&case.input_right));
        let mut ok = true;
        for eye in [&rig.eye_left, &rig.eye_right] {
            let s = splat_to_eye(&lv, &rv, &rig, eye);
            let m = occlusion_masks(&s.from_left.inv_depth, &s.from_right.inv_depth, &cfg).expect("masks");
            let truth = if std::ptr::eq(eye, &rig.eye_left) { &case.eye_left } else { &case.eye_right };
            let bg = m.full.data().iter().zip(&truth.labels).all(|(&v, &l)| v == 0.0 || l == BACKGROUND);
            ok &= bg && m.full.count_nonzero() > 0 && hole_thickness(&m.left).max(hole_thickness(&m.right)) <= 12;
        }
        if ok {
            out.push(FilterCase { params, case });
        } else {
            rejected += 1;
        }
    }
    (out, rejected)
}

fn filter_contract(cases: &[FilterCase], rejected: usize) -> Outcome {
    let cfg = FilterConfig::default();
    let kernel = cfg.kernel().expect("kernel");
    let mut partial_mismatch = 0usize;
    let mut unfilled = 0usize;
    let mut pipeline_unfilled = 0usize;
    let mut filled = 0usize;
    let mut worst_bg: f32 = 0.0;
    let mut worst_sum: f32 = 0.0;
    for fc in cases {
        let rig = RigModel::symmetric(&fc.params).expect("rig");
        let (lv, rv) = (label_view(&fc.case.input_left), label_view(&fc.case.input_right));
        for eye in [&rig.eye_left, &rig.eye_right] {
            let s = splat_to_eye(&lv, &rv, &rig, eye);
            let m = occlusion_masks(&s.from_left.inv_depth, &s.from_right.inv_depth, &cfg).expect("masks");
            let (pl, pr) = fill_partial(&s.from_left.color, &s.from_right.color, &m).expect("partial");
            for p in [&pl, &pr] {
                // channel 1 is nonzero wherever some splat landed
                for (i, &full) in m.full.data().iter().enumerate() {
                    if (p.data()[i * 3 + 1] < 0.5) != (full != 0.0) {
                        partial_mismatch += 1;
                    }
                }
            }
            for (p, d) in [(&pl, &s.from_left.inv_depth), (&pr, &s.from_right.inv_depth)] {
                let (f, u) = fill_full_counted(p, d, &m.full, &kernel, cfg.valid_floor).expect("fill");
                unfilled += u;
                for (i, &full) in m.full.data().iter().enumerate() {
                    if full != 0.0 {
                        filled += 1;
                        worst_bg = worst_bg.max(1.0 - f.data()[i * 3]);
                        worst_sum = worst_sum.max((f.data()[i * 3 + 1] - 1.0).abs());
                    }
                }
            }
        }
        let out = run_gt(gt_config(fc.params), &fc.case);
        pipeline_unfilled += out.eye_left.unfilled.iter().chain(&out.eye_right.unfilled).sum::<usize>();
    }
    let pass = partial_mismatch == 0 && unfilled == 0 && pipeline_unfilled == 0 && worst_bg <= 1e-3 && worst_sum <= 1e-5;
    let mut o = Outcome::new(
        pass,
        format!(
            "partial-fill hole set vs M_full mismatches {partial_mismatch}; unfilled {unfilled} (pipeline {pipeline_unfilled}); \
             {filled} filled px, max non-background weight {worst_bg:.1e} (tol 1e-3), max |weight sum - 1| {worst_sum:.1e}"
        ),
    );
    o.info.push(format!("{} scenes kept, {rejected} rejected (full hole not on background, or partial hole thicker than 12 px)", cases.len()));
    o
}

fn ablation(cases: &[FilterCase]) -> Outcome {
    let (mut with, mut without) = (Vec::new(), Vec::new());
    for fc in cases {
        let on = gt_config(fc.params);
        let mut off = on.clone();
        off.stages.fill_partial = false;
        off.stages.fill_full = false;
        for (cfg, acc) in [(on, &mut with), (off, &mut without)] {
            let out = run_gt(cfg, &fc.case);
            acc.push(psnr(&out.eye_left.image, &fc.case.eye_left.view.color).expect("psnr"));
            acc.push(psnr(&out.eye_right.image, &fc.case.eye_right.view.color).expect("psnr"));
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (a, b) = (mean(&with), mean(&without));
    Outcome::new(a - b >= 1.0, format!("mean PSNR with filtering {a:.2} dB, without {b:.2} dB, gain {:.2} dB (need >= 1 dB)", a - b))
}

// ------------------------------------------------------------------ fusion

fn fusion_oracle() -> Outcome {
    let mut backends = vec![Backend::Portable];
    if Backend::detect() != Backend::Portable {
        backends.push(Backend::detect());
    }
    let mut worst: f32 = 0.0;
    let mut count_ok = fusion::param_count() == 119_123;
    let mut names = Vec::new();
    for &b in &backends {
        for i in 0..20u64 {
            let w = random_weights(7000 + i);
            let r = fusion_selftest(&w, b, 1, i).expect("selftest");
            worst = worst.max(r.max_abs_diff);
            count_ok &= r.param_count == 119_123;
        }
        names.push(b.name());
    }
    Outcome::new(
        worst < SELFTEST_TOLERANCE && count_ok,
        format!(
            "max |engine - reference| = {worst:.2e} over 20 cases per backend [{}] (tol {SELFTEST_TOLERANCE:.0e}); parameter count {} (need 119123)",
            names.join(", "),
            fusion::param_count()
        ),
    )
}

// --------------------------------------------------------------------- sgm

fn sgm_sanity() -> Outcome {
    let (w, h) = (320, 240);
    let k = Intrinsics::from_horizontal_fov(w, h, 90f64.to_radians());
    let b = 0.1;
    let cam = |x: f64| PinholeCamera::new(k, Pose::looking_from(Vec3::new(x, 0.0, 0.0), Mat3::IDENTITY)).expect("camera");
    let (cl, cr) = (cam(-b / 2.0), cam(b / 2.0));
    let mut cfg = DepthProviderConfig::default();
    cfg.d_max = 64;
    let mut r = rng(21);
    let mut fractions = Vec::new();
    for _ in 0..5 {
        let zn = r.random_range(1.0..2.0);
        let zf = r.random_range(3.0..5.0);
        let (cx, cy) = (r.random_range(-0.3..0.3) * zn, r.random_range(-0.2..0.2) * zn);
        let (hw, hh) = (r.random_range(0.15..0.35) * zn, r.random_range(0.15..0.3) * zn);
        // features of a few pixels at each plane
        let (near_cell, far_cell) = (zn * r.random_range(4.0..8.0) / k.fx, zf * r.random_range(4.0..8.0) / k.fx);
        let scene = SceneSpec {
            layers: vec![PlaneLayer {
                depth: zn,
                extent: Rect::new(cx - hw, cx + hw, cy - hh, cy + hh),
                texture: noise(&mut r, near_cell),
            }],
            background: Background { depth: zf, texture: noise(&mut r, far_cell) },
            seed: 0,
        };
        let left = scene.render(&cl).expect("render");
        let right = scene.render(&cr).expect("render");
        let d = sgm_match(&left.view.color, &right.view.color, &cfg).expect("sgm");
        let gt = &left.view.inv_depth;
        let (mut good, mut valid) = (0usize, 0usize);
        for (i, &ok) in d.valid.iter().enumerate() {
            if ok {
                valid += 1;
                let truth = k.fx * b * gt.data()[i] as f64;
                good += ((d.disparity.data()[i] as f64 - truth).abs() <= 1.0) as usize;
            }
        }
        fractions.push((good as f64 / valid.max(1) as f64, valid as f64 / d.valid.len() as f64));
    }
    let min = fractions.iter().map(|f| f.0).fold(1.0, f64::min);
    let dens = fractions.iter().map(|f| f.1).fold(1.0, f64::min);
    Outcome::new(min >= 0.95, format!("worst scene: {:.2}% of valid disparities within 1 px (need >= 95%), valid density >= {:.1}%", 100.0 * min, 100.0 * dens))
}

// ------------------------------------------------------------- determinism

fn bits(img: &ImagePlane) -> Vec<u32> {
    img.data().iter().map(|v| v.to_bits()).collect()
}

fn determinism(fc: &FilterCase) -> Outcome {
    let weights = random_weights(42);
    let (l, r) = (&fc.case.input_left.view, &fc.case.input_right.view);
    let mut same = true;
    let mut runs = 0;
    for kind in [ProviderKind::Sgm, ProviderKind::GroundTruth] {
        let mut images = Vec::new();
        for threads in [1, 2, 1] {
            let mut cfg = PipelineConfig::default();
            cfg.rig = fc.params;
            cfg.depth.provider.kind = kind;
            cfg.depth.provider.d_max = 64;
            cfg.threads = threads;
            let p = Pipeline::with_weights(cfg, Some(weights.clone())).expect("pipeline");
            let gt = (kind == ProviderKind::GroundTruth).then_some(DepthOverride::InverseDepth(&l.inv_depth, &r.inv_depth));
            let o = p.run_with(&l.color, &r.color, gt).expect("run");
            let planes = [
                &o.eye_left.image,
                &o.eye_right.image,
                &o.eye_left.from_left,
                &o.eye_left.from_right,
                &o.eye_right.from_left,
                &o.eye_right.from_right,
                &o.view_left.inv_depth,
                &o.view_right.inv_depth,
            ];
            images.push(planes.map(bits));
            runs += 1;
        }
        same &= images.windows(2).all(|p| p[0] == p[1]);
    }
    Outcome::new(same, format!("{runs} runs (sgm and ground-truth depth, threads 1/2/1, fusion on): outputs {}", if same { "bit-identical" } else { "differ" }))
}

// ------------------------------------------------------------- performance

fn performance() -> Outcome {
    let dir = tempfile::tempdir().expect("tempdir");
    let wpath = dir.path().join("fusion.npfw");
    npfw::save(&random_weights(1), &wpath).expect("save weights");
    let mut cfg = PipelineConfig::default();
    cfg.rig = RigParams::prototype();
    cfg.depth.provider.kind = ProviderKind::GroundTruth;
    cfg.fusion.weights = Some(wpath);
    let cores = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    cfg.threads = cores.clamp(1, 2);
    let bench = |res: (usize, usize)| {
        let opts = BenchOptions { frames: 5, resolution: Some(res), depth_every: 1, seed: 0 };
        run_bench(&cfg, &opts).expect("bench")
    };
    let hi = bench((1280, 720));
    let lo = bench((640, 360));
    let (nd_hi, nd_lo) = (hi.median.non_depth(), lo.median.non_depth());
    let ratio = nd_hi / nd_lo;
    // 4x the pixels
    let linear = ratio / 4.0;
    let pass = nd_hi < 1000.0 && (0.5..=2.0).contains(&linear);
    let mut o = Outcome::new(
        pass,
        format!(
            "non-depth median {nd_hi:.0} ms at 1280x720 (need < 1000 ms), {nd_lo:.0} ms at 640x360; \
             time ratio {ratio:.2} for 4x pixels ({linear:.2}x linear, need 0.5..2)"
        ),
    );
    let build = if cfg!(debug_assertions) { "test profile with debug assertions; use --release for representative timings" } else { "release" };
    o.info.push(format!("{cores} core(s), threads = {}, backend {}, {build}", cfg.threads, hi.backend.as_deref().unwrap_or("none")));
    o.info.push(format!("1280x720: {}", hi.median.report()));
    o.info.push(format!("640x360:  {}", lo.median.report()));
    o
}

fn main() {
    passthrough::alloc_tuning::retain_freed_memory();
    let strict = std::env::var_os("ACCEPTANCE_STRICT").is_some_and(|v| v != "0");
    let mut failed = 0;
    let mut report = |name: &str, f: &mut dyn FnMut() -> Outcome, limit_s: Option<f64>| {
        let t0 = Instant::now();
        let mut o = f();
        let secs = t0.elapsed().as_secs_f64();
        if let Some(limit) = limit_s {
            o.pass &= secs < limit;
            o.detail.push_str(&format!("; runtime {secs:.1} s (need < {limit:.0} s)"));
        } else {
            o.detail.push_str(&format!("; runtime {secs:.1} s"));
        }
        failed += !o.pass as usize;
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        for line in &o.info {
            println!("    {line}");
        }
    };
    report("geometry oracle", &mut geometry_oracle, Some(60.0));
    report("warp oracle", &mut warp_oracle, Some(60.0));
    let (cases, rejected) = filter_cases(10);
    report("disocclusion filter contract", &mut || filter_contract(&cases, rejected), None);
    report("ablation direction", &mut || ablation(&cases), None);
    report("fusion engine oracle", &mut fusion_oracle, None);
    report("sgm sanity", &mut sgm_sanity, None);
    report("determinism", &mut || determinism(&cases[0]), None);
    report("performance envelope", &mut performance, None);
    println!("{failed} of 8 criteria failed");
    if strict && failed > 0 {
        std::process::exit(1);
    }
}
