use std::fs;
use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use serde::Serialize;
use svma::checkpoint::load_checkpoint;
use svma::data::{load_dataset, pose_scale_3d, preprocess_3d, PoseDataset};
use svma::evaluation::{evaluate, evaluate_model, MetricReport};
use svma::skeleton::Skeleton;

use crate::manifest::{sha256_file, DatasetRecord};
use crate::UsageError;

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long, required_unless_present = "oracle")]
    checkpoint: Option<PathBuf>,
    /// Keypoint file with `_z` columns.
    #[arg(long)]
    data: PathBuf,
    /// Keep only these subjects (comma separated).
    #[arg(long, value_delimiter = ',')]
    subjects: Vec<String>,
    /// Score the ground truth against itself instead of model predictions.
    #[arg(long)]
    oracle: bool,
    /// Report path; defaults to `<checkpoint>.eval.json`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct EvalReport<'a> {
    checkpoint: Option<&'a PathBuf>,
    data: DatasetRecord,
    subjects: &'a [String],
    oracle: bool,
    metrics: &'a MetricReport,
}

fn oracle_report(ds: &PoseDataset) -> anyhow::Result<MetricReport> {
    let frames3d = ds.frames3d.as_ref().expect("checked by caller");
    let skel = &ds.skeleton;
    let (mut gts, mut scales, mut actions) = (Vec::new(), Vec::new(), Vec::new());
    for (i, raw) in frames3d.iter().enumerate() {
        if let Ok(gt) = preprocess_3d(raw, skel) {
            gts.push(gt);
            scales.push(pose_scale_3d(raw, skel));
            if let Some(a) = &ds.actions {
                actions.push(a[i].clone());
            }
        }
    }
    let actions = ds.actions.as_ref().map(|_| actions.as_slice());
    Ok(evaluate(&gts, &gts, &scales, skel.root_index(), actions)?)
}

pub fn run(args: EvalArgs) -> anyhow::Result<()> {
    let out = match (&args.out, &args.checkpoint) {
        (Some(o), _) => o.clone(),
        (None, Some(c)) => c.with_extension("eval.json"),
        (None, None) => return Err(UsageError("--oracle without --checkpoint needs --out".into()).into()),
    };
    let skeleton = Skeleton::canonical();
    let mut ds = load_dataset(&args.data, &skeleton).with_context(|| format!("loading {}", args.data.display()))?;
    if !ds.has_3d() {
        return Err(UsageError(format!("{} has no 3D ground truth (no `_z` columns)", args.data.display())).into());
    }
    if !args.subjects.is_empty() {
        ds = ds.filter_subjects(&args.subjects)?;
    }
    if ds.is_empty() {
        return Err(UsageError("no frames left to evaluate".into()).into());
    }

    let report = if args.oracle {
        oracle_report(&ds)?
    } else {
        let path = args.checkpoint.as_ref().expect("required unless oracle");
        let ck = load_checkpoint(path).with_context(|| format!("loading {}", path.display()))?;
        if ck.joint_names != skeleton.joint_names() {
            return Err(UsageError("checkpoint joint names do not match the skeleton".into()).into());
        }
        evaluate_model(&ck.state.generator, &ds, ck.config.camera_distance, ck.config.min_depth)?
    };

    println!("{}", report.summary_line());
    for (action, m) in &report.per_action {
        println!("  {action}: frames={} p_mpjpe_mm={:.3} mpjpe_mm={:.3}", m.frames, m.p_mpjpe_mm, m.mpjpe_mm);
    }
    let doc = EvalReport {
        checkpoint: args.checkpoint.as_ref(),
        data: DatasetRecord {
            path: args.data.clone(),
            sha256: sha256_file(&args.data)?,
            frames: ds.len(),
        },
        subjects: &args.subjects,
        oracle: args.oracle,
        metrics: &report,
    };
    fs::write(&out, serde_json::to_string_pretty(&doc)? + "\n").with_context(|| format!("writing {}", out.display()))?;
    println!("report {}", out.display());
    Ok(())
}
