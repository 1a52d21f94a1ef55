use std::fs;
use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use log::warn;
use svma::data::load_dataset;
use svma::pose::Pose3D;
use svma::skeleton::Skeleton;

use crate::render::{layout, to_image, to_svg};
use crate::UsageError;

#[derive(Args, Debug)]
pub struct PlotArgs {
    /// Keypoint file with `_z` columns.
    #[arg(long)]
    input: PathBuf,
    /// `.png` or `.svg`.
    #[arg(long)]
    out: PathBuf,
    /// View azimuths in degrees, one panel column each.
    #[arg(long, value_delimiter = ',', default_value = "0", allow_negative_numbers = true)]
    azimuth: Vec<f64>,
    /// Frame indices to draw; defaults to the first `--max-frames`.
    #[arg(long, value_delimiter = ',')]
    frames: Vec<usize>,
    #[arg(long, default_value_t = 16)]
    max_frames: usize,
    /// Panel size in pixels.
    #[arg(long, default_value_t = 240)]
    cell: u32,
}

pub fn run(args: PlotArgs) -> anyhow::Result<()> {
    let ext = args.out.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
    if !matches!(ext.as_deref(), Some("png" | "svg")) {
        return Err(UsageError(format!("{}: output must end in .png or .svg", args.out.display())).into());
    }
    if args.azimuth.is_empty() || args.azimuth.iter().any(|a| !a.is_finite()) {
        return Err(UsageError("azimuths must be finite numbers".into()).into());
    }
    if args.cell < 16 {
        return Err(UsageError("--cell must be at least 16 pixels".into()).into());
    }
    let skeleton = Skeleton::canonical();
    let ds = load_dataset(&args.input, &skeleton).with_context(|| format!("reading {}", args.input.display()))?;
    let frames3d = ds
        .frames3d
        .as_ref()
        .ok_or_else(|| UsageError(format!("{} has no `_z` columns", args.input.display())))?;
    if frames3d.is_empty() {
        return Err(UsageError(format!("{} holds no valid frames", args.input.display())).into());
    }
    let picked: Vec<(usize, &Pose3D)> = if args.frames.is_empty() {
        if frames3d.len() > args.max_frames {
            warn!("drawing the first {} of {} frames", args.max_frames, frames3d.len());
        }
        frames3d.iter().enumerate().take(args.max_frames).collect()
    } else {
        args.frames
            .iter()
            .map(|&i| {
                frames3d
                    .get(i)
                    .map(|p| (i, p))
                    .ok_or_else(|| UsageError(format!("frame {i} out of range (file has {})", frames3d.len())))
            })
            .collect::<Result<_, _>>()?
    };
    let fig = layout(&picked, &skeleton, &args.azimuth, args.cell);
    if ext.as_deref() == Some("svg") {
        fs::write(&args.out, to_svg(&fig)).with_context(|| format!("writing {}", args.out.display()))?;
    } else {
        to_image(&fig)
            .save(&args.out)
            .with_context(|| format!("writing {}", args.out.display()))?;
    }
    println!(
        "{} panels ({} frames x {} views) written to {}",
        fig.panels.len(),
        picked.len(),
        args.azimuth.len(),
        args.out.display()
    );
    Ok(())
}
