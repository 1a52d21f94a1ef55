use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use log::warn;
use svma::checkpoint::load_checkpoint;
use svma::data::{read_keypoints, save_dataset, PoseDataset};
use svma::networks::stack_poses;
use svma::pose::Pose2D;
use svma::skeleton::Skeleton;
use svma::training::lift_batch;

use crate::UsageError;

#[derive(Args, Debug)]
pub struct LiftArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// 2D keypoint file.
    #[arg(long)]
    input: PathBuf,
    /// 3D keypoint file to write; cameras go to `<out stem>.cameras.csv`.
    #[arg(long)]
    out: PathBuf,
}

pub fn cameras_path(out: &Path) -> PathBuf {
    out.with_extension("cameras.csv")
}

const CAMERA_HEADER: [&str; 7] = ["frame", "k00", "k01", "k02", "k10", "k11", "k12"];

fn has_content(text: &str) -> bool {
    text.lines().any(|l| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('#')
    })
}

pub fn run(args: LiftArgs) -> anyhow::Result<()> {
    let ck = load_checkpoint(&args.checkpoint).with_context(|| format!("loading {}", args.checkpoint.display()))?;
    let skeleton = Skeleton::canonical();
    if ck.joint_names != skeleton.joint_names() {
        return Err(UsageError("checkpoint joint names do not match the skeleton".into()).into());
    }
    let text = fs::read_to_string(&args.input).map_err(|e| UsageError(format!("cannot read {}: {e}", args.input.display())))?;
    let cams = cameras_path(&args.out);
    if !has_content(&text) {
        fs::write(&args.out, "").with_context(|| format!("writing {}", args.out.display()))?;
        fs::write(&cams, "").with_context(|| format!("writing {}", cams.display()))?;
        println!("0 frames lifted");
        return Ok(());
    }
    let ds = read_keypoints(text.as_bytes(), &skeleton).with_context(|| format!("reading {}", args.input.display()))?;
    let (d, min_depth) = (ck.config.camera_distance, ck.config.min_depth);
    let prepared = ds.prepare_inputs(d);
    if prepared.dropped > 0 {
        warn!("{} degenerate frames were not lifted", prepared.dropped);
    }
    let lifted = if prepared.poses.is_empty() {
        Vec::new()
    } else {
        let refs: Vec<&Pose2D> = prepared.poses.iter().collect();
        lift_batch(&ck.state.generator, &stack_poses(&refs), d, min_depth)?
    };
    let pick = |v: &Vec<String>| prepared.indices.iter().map(|&i| v[i].clone()).collect();
    let out = PoseDataset {
        skeleton: skeleton.clone(),
        frames2d: prepared.poses.clone(),
        frames3d: Some(lifted.iter().map(|(p, _)| p.clone()).collect()),
        subjects: ds.subjects.as_ref().map(pick),
        actions: ds.actions.as_ref().map(pick),
        skipped: 0,
    };
    save_dataset(&args.out, &out)?;

    let mut w = csv::Writer::from_path(&cams).with_context(|| format!("creating {}", cams.display()))?;
    w.write_record(CAMERA_HEADER)?;
    for (i, (_, cam)) in lifted.iter().enumerate() {
        let mut row = vec![i.to_string()];
        row.extend(cam.to_array().iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    println!("{} frames lifted to {}", lifted.len(), args.out.display());
    Ok(())
}
