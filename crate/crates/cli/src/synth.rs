use std::path::PathBuf;

use clap::Args;
use svma::data::save_dataset;
use svma::skeleton::Skeleton;
use svma::synth::{full_sweep, synthesize_poses};

use crate::UsageError;

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of evenly spaced camera azimuths.
    #[arg(long, default_value_t = 36)]
    views: usize,
    /// Subject labels assigned round robin (comma separated).
    #[arg(long, value_delimiter = ',')]
    subjects: Vec<String>,
    #[arg(long)]
    out: PathBuf,
}

pub fn run(args: SynthArgs) -> anyhow::Result<()> {
    if args.views == 0 {
        return Err(UsageError("--views must be positive".into()).into());
    }
    let skeleton = Skeleton::canonical();
    let mut ds = synthesize_poses(args.count, args.seed, &skeleton, &full_sweep(args.views))?;
    if !args.subjects.is_empty() {
        let labels = (0..ds.len()).map(|i| args.subjects[i % args.subjects.len()].clone()).collect();
        ds.subjects = Some(labels);
    }
    save_dataset(&args.out, &ds)?;
    println!("{} poses written to {}", ds.len(), args.out.display());
    Ok(())
}
