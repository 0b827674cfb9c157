use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use passthrough::analysis::{fusion_selftest, rig_analyze};
use passthrough::bench::{run_bench, BenchOptions};
use passthrough::config::PipelineConfig;
use passthrough::dataset::{generate, DatasetSpec};
use passthrough::evaluate::{evaluate_dataset, EvalOptions};
use passthrough::io::{load_color, save_color, save_pfm};
use passthrough::{npfw, Error, Pipeline};

#[derive(Parser)]
#[command(name = "passthrough", version, about = "Stereo passthrough view synthesis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Reconstruct both eye views from one stereo pair.
    Synthesize {
        #[arg(long)]
        left: PathBuf,
        #[arg(long)]
        right: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write splats, masks and filtered warps.
        #[arg(long)]
        debug: bool,
    },
    /// Render a synthetic dataset with exact ground truth.
    RenderDataset {
        #[arg(long, default_value_t = 10)]
        scenes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_parser = parse_res, default_value = "512x512")]
        res: (usize, usize),
        #[arg(long)]
        out: PathBuf,
    },
    /// Score the pipeline on a dataset.
    Evaluate {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        report: PathBuf,
        /// Write F_l, F_r and the full-disocclusion mask of every eye here.
        #[arg(long)]
        intermediates: Option<PathBuf>,
    },
    /// Tabulate the disocclusion width over a grid of headset designs.
    RigAnalyze {
        #[arg(long)]
        sweep: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Time the stages over repeated frames.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 10)]
        frames: usize,
        #[arg(long, value_parser = parse_res)]
        res: Option<(usize, usize)>,
        /// Estimate depth every M frames and reuse it in between.
        #[arg(long, value_name = "M", default_value_t = 1)]
        reuse_depth: usize,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Check the fusion engine against the reference forward pass.
    FusionSelftest {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long, default_value_t = 20)]
        cases: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn parse_res(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or("expected WxH")?;
    let p = |v: &str| v.trim().parse::<usize>().map_err(|_| format!("bad dimension {v:?}"));
    let (w, h) = (p(w)?, p(h)?);
    if w == 0 || h == 0 {
        return Err("dimensions must be positive".into());
    }
    Ok((w, h))
}

/// Errors the user can fix by changing arguments or configuration.
enum Failure {
    Usage(Error),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) => Failure::Usage(e),
            e => Failure::Runtime(e),
        }
    }
}

fn load_config(path: &Path) -> Result<PipelineConfig, Failure> {
    PipelineConfig::load(path).map_err(Failure::Usage)
}

fn write_json<T: serde::Serialize>(path: &Path, v: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(v).expect("reports serialize");
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Failure::Runtime(Error::Io { path: dir.into(), source: e }))?;
    }
    std::fs::write(path, text + "\n").map_err(|e| Failure::Runtime(Error::Io { path: path.into(), source: e }))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Synthesize { left, right, config, out, debug } => {
            let pipeline = Pipeline::new(load_config(&config)?)?;
            let (l, r) = (load_color(&left)?, load_color(&right)?);
            let o = pipeline.run(&l, &r)?;
            save_color(&o.eye_left.image, &out.join("eye_l.png"))?;
            save_color(&o.eye_right.image, &out.join("eye_r.png"))?;
            if debug {
                for (eye, e) in [("eye_l", &o.eye_left), ("eye_r", &o.eye_right)] {
                    save_color(&e.splats.from_left.color, &out.join(format!("{eye}_splat_l.png")))?;
                    save_color(&e.splats.from_right.color, &out.join(format!("{eye}_splat_r.png")))?;
                    save_color(&e.from_left, &out.join(format!("{eye}_f_l.png")))?;
                    save_color(&e.from_right, &out.join(format!("{eye}_f_r.png")))?;
                    save_pfm(&e.masks.left, &out.join(format!("{eye}_mask_l.pfm")))?;
                    save_pfm(&e.masks.right, &out.join(format!("{eye}_mask_r.pfm")))?;
                    save_pfm(&e.masks.full, &out.join(format!("{eye}_mask_full.pfm")))?;
                }
                save_pfm(&o.view_left.inv_depth, &out.join("depth_l.pfm"))?;
                save_pfm(&o.view_right.inv_depth, &out.join("depth_r.pfm"))?;
            }
            write_json(&out.join("timing.json"), &o.timing)?;
            println!("{}", o.timing.report());
        }
        Command::RenderDataset { scenes, seed, res: (width, height), out } => {
            let spec = DatasetSpec { scenes, seed, width, height, ..DatasetSpec::default() };
            let m = generate(&spec, &out)?;
            println!("wrote {} cases to {}", m.cases.len(), out.display());
        }
        Command::Evaluate { dataset, config, report, intermediates } => {
            let cfg = load_config(&config)?;
            let r = evaluate_dataset(&dataset, &cfg, &EvalOptions { intermediates, weights: None })?;
            write_json(&report, &r)?;
            for c in &r.cases {
                println!(
                    "{}  L {:.2} dB / {:.4}  R {:.2} dB / {:.4}",
                    c.name, c.eye_left.full.psnr_db, c.eye_left.full.ssim, c.eye_right.full.psnr_db, c.eye_right.full.ssim
                );
            }
            let m = &r.mean;
            println!(
                "mean  {:.2} dB / {:.4} SSIM; outside M̂ {:.2} dB / {:.4} SSIM, masked loss {:.4}",
                m.psnr_db, m.ssim, m.masked_psnr_db, m.masked_ssim, m.masked_loss
            );
        }
        Command::RigAnalyze { sweep, out } => {
            let rows = rig_analyze(&sweep, &out)?;
            println!("wrote {} rows to {}", rows.len(), out.display());
        }
        Command::Bench { config, frames, res, reuse_depth, report } => {
            let cfg = load_config(&config)?;
            let opts = BenchOptions { frames, resolution: res, depth_every: reuse_depth, ..BenchOptions::default() };
            let r = run_bench(&cfg, &opts)?;
            println!("{}", r.summary());
            if let Some(p) = report {
                write_json(&p, &r)?;
            }
        }
        Command::FusionSelftest { weights, cases, seed } => {
            let w = npfw::load(&weights)?;
            let backend = passthrough_core::fusion::Backend::detect();
            let r = fusion_selftest(&w, backend, cases, seed)?;
            println!("{}", serde_json::to_string_pretty(&r).expect("report serializes"));
            if !r.passed {
                return Err(Failure::Runtime(Error::Config(format!(
                    "engine differs from the reference by {} (tolerance {})",
                    r.max_abs_diff, r.tolerance
                ))));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    passthrough::alloc_tuning::retain_freed_memory();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
