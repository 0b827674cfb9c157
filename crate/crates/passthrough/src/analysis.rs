//! Headset design tables and the fusion engine self-check.

use std::fmt::Write as _;
use std::path::Path;

use passthrough_core::fusion::{self, Backend, FusionEngine, FusionWeights};
use passthrough_core::rig::{sweep_design_space, DesignGrid, SweepRow};
use passthrough_core::ImagePlane;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, StageContext};
use crate::io::{read_json, write_file};

pub const SWEEP_HEADER: &str = "t_m,x_m,e_m,phi_rad,z_near_m,z_far_m,beta_m";

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from(SWEEP_HEADER);
    s.push('\n');
    for r in rows {
        writeln!(s, "{},{},{},{},{},{},{}", r.t_m, r.x_m, r.e_m, r.phi_rad, r.z_near_m, r.z_far_m, r.beta_m).expect("write to string");
    }
    s
}

/// Reads a [`DesignGrid`] document and writes the disocclusion-width table.
pub fn rig_analyze(sweep: &Path, out: &Path) -> Result<Vec<SweepRow>> {
    let grid: DesignGrid = read_json(sweep)?;
    if [grid.t_m.len(), grid.x_m.len(), grid.e_m.len(), grid.phi_rad.len(), grid.depths.len()].contains(&0) {
        return Err(Error::Config(format!("{}: every sweep axis needs at least one value", sweep.display())));
    }
    let rows = sweep_design_space(&grid);
    write_file(out, sweep_csv(&rows).as_bytes())?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelftestCase {
    pub width: usize,
    pub height: usize,
    pub max_abs_diff: f32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelftestReport {
    pub backend: String,
    pub param_count: usize,
    pub tolerance: f32,
    pub cases: Vec<SelftestCase>,
    pub max_abs_diff: f32,
    pub passed: bool,
}

pub const SELFTEST_TOLERANCE: f32 = 1e-4;

/// Random `[0, 1]` color plane.
pub fn random_color(rng: &mut ChaCha8Rng, w: usize, h: usize) -> ImagePlane {
    let data = (0..w * h * 3).map(|_| rng.random::<f32>()).collect();
    ImagePlane::new(w, h, 3, data).expect("size matches")
}

/// Compares the engine with the direct reference network on random inputs,
/// including sizes that are not multiples of four.
pub fn fusion_selftest(weights: &FusionWeights, backend: Backend, cases: usize, seed: u64) -> Result<SelftestReport> {
    let engine = FusionEngine::new(weights, backend).stage("fusion")?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(cases);
    for _ in 0..cases {
        let (w, h) = (rng.random_range(9..72), rng.random_range(9..56));
        let (l, r) = (random_color(&mut rng, w, h), random_color(&mut rng, w, h));
        let fast = engine.forward(&l, &r).stage("fusion")?;
        let slow = fusion::reference::forward(&l, &r, weights).stage("fusion")?;
        out.push(SelftestCase { width: w, height: h, max_abs_diff: fast.max_abs_diff(&slow) });
    }
    let max = out.iter().map(|c| c.max_abs_diff).fold(0.0, f32::max);
    Ok(SelftestReport {
        backend: backend.name().to_string(),
        param_count: weights.param_count(),
        tolerance: SELFTEST_TOLERANCE,
        max_abs_diff: max,
        passed: max < SELFTEST_TOLERANCE && weights.param_count() == fusion::param_count(),
        cases: out,
    })
}

/// He-style random weights for tests and benchmarks.
pub fn random_weights(seed: u64) -> FusionWeights {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bias_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    FusionWeights::from_fn(
        |s, _| {
            let scale = (2.0 / (s.in_channels * s.kernel_h * s.kernel_w) as f32).sqrt();
            (rng.random::<f32>() * 2.0 - 1.0) * scale
        },
        |_, _| bias_rng.random::<f32>() * 0.1 - 0.05,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use passthrough_core::rig::{disocclusion_width_raw, SceneDepthPair};

    #[test]
    fn single_point_sweep_matches_the_width_formula() {
        let dir = tempfile::tempdir().unwrap();
        let grid = DesignGrid {
            t_m: vec![0.093],
            x_m: vec![0.02],
            e_m: vec![0.06],
            phi_rad: vec![90f64.to_radians()],
            depths: vec![SceneDepthPair::new(0.5, 2.0).unwrap()],
        };
        let sweep = dir.path().join("sweep.json");
        std::fs::write(&sweep, serde_json::to_string(&grid).unwrap()).unwrap();
        let out = dir.path().join("beta.csv");
        let rows = rig_analyze(&sweep, &out).unwrap();
        let text = std::fs::read_to_string(&out).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(SWEEP_HEADER));
        let beta: f64 = lines.next().unwrap().rsplit(',').next().unwrap().parse().unwrap();
        assert_eq!(beta, disocclusion_width_raw(0.093, 0.02, 90f64.to_radians(), 0.5, 2.0));
        assert!((beta - 0.219).abs() < 1e-9);
        assert_eq!(rows.len(), 1);
    }

    #[test]
    fn selftest_passes_on_random_weights() {
        let r = fusion_selftest(&random_weights(3), Backend::Portable, 2, 9).unwrap();
        assert!(r.passed, "{r:?}");
        assert_eq!(r.param_count, 119_123);
    }
}
