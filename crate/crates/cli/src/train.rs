use std::fs::{self, File};
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use svma::checkpoint::save_checkpoint;
use svma::data::load_dataset;
use svma::losses::LossReport;
use svma::skeleton::Skeleton;
use svma::training::{train, TrainConfig, TrainObserver, TrainState};

use crate::config::RunConfig;
use crate::manifest::{self, code_version, sha256_file, DatasetRecord, Outputs, RunManifest};
use crate::UsageError;

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Flat TOML config; any training setting plus `train_data` and `subjects`.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Training keypoint file (overrides `train_data`).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Re-run exactly the run described by a manifest.
    #[arg(long, conflicts_with_all = ["config", "data", "seed", "steps", "no_dis", "no_svma", "subjects"])]
    replay: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    steps: Option<u64>,
    /// Drop the adversarial terms.
    #[arg(long)]
    no_dis: bool,
    /// Drop the second generator pass and its terms.
    #[arg(long)]
    no_svma: bool,
    /// Keep only these subjects (comma separated).
    #[arg(long, value_delimiter = ',')]
    subjects: Vec<String>,
    /// Run directory.
    #[arg(long, default_value = "run")]
    out: PathBuf,
}

pub const LOG_FILE: &str = "train_log.csv";
pub const FINAL_CHECKPOINT: &str = "checkpoint.json";

/// Writes the loss log and checkpoints as training proceeds.
struct RunObserver {
    dir: PathBuf,
    cfg: TrainConfig,
    joint_names: Vec<String>,
    log: csv::Writer<File>,
    checkpoints: Vec<PathBuf>,
    last: Option<LossReport>,
}

impl TrainObserver for RunObserver {
    fn on_step(&mut self, report: &LossReport) -> svma::Result<()> {
        self.log.serialize(report)?;
        self.last = Some(*report);
        Ok(())
    }

    fn on_checkpoint(&mut self, state: &TrainState) -> svma::Result<()> {
        let name = if state.step >= self.cfg.total_steps {
            FINAL_CHECKPOINT.to_string()
        } else {
            format!("checkpoint_{:06}.json", state.step)
        };
        let path = self.dir.join(name);
        save_checkpoint(&path, state, &self.cfg, &self.joint_names)?;
        self.log.flush().map_err(|e| svma::Error::io(self.dir.join(LOG_FILE), e))?;
        self.checkpoints.push(path);
        Ok(())
    }
}

fn resolve(args: &TrainArgs) -> anyhow::Result<(RunConfig, Option<String>)> {
    if let Some(path) = &args.replay {
        let m = RunManifest::load(path)?;
        let cfg = RunConfig {
            train_data: Some(m.train_data.path.clone()),
            subjects: m.subjects.clone(),
            train: m.config.clone(),
        };
        return Ok((cfg, Some(m.train_data.sha256)));
    }
    let mut cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(d) = &args.data {
        cfg.train_data = Some(d.clone());
    }
    if let Some(s) = args.seed {
        cfg.train.seed = s;
    }
    if let Some(s) = args.steps {
        cfg.train.total_steps = s;
    }
    if args.no_dis {
        cfg.train.use_discriminator = false;
    }
    if args.no_svma {
        cfg.train.use_svma = false;
    }
    if !args.subjects.is_empty() {
        cfg.subjects = args.subjects.clone();
    }
    Ok((cfg, None))
}

fn relative(dir: &Path, p: &Path) -> PathBuf {
    p.strip_prefix(dir).map(Path::to_path_buf).unwrap_or_else(|_| p.to_path_buf())
}

pub fn run(args: TrainArgs) -> anyhow::Result<()> {
    let (cfg, expected_hash) = resolve(&args)?;
    let data_path = cfg
        .train_data
        .clone()
        .ok_or_else(|| UsageError("missing dataset path: set `train_data` in the config or pass --data".into()))?;
    cfg.train.validate()?;
    let hash = sha256_file(&data_path)?;
    if let Some(expected) = expected_hash {
        if expected != hash {
            return Err(UsageError(format!(
                "{} changed since the manifest was written (sha256 {hash}, expected {expected})",
                data_path.display()
            ))
            .into());
        }
    }
    let skeleton = Skeleton::canonical();
    let mut dataset = load_dataset(&data_path, &skeleton).with_context(|| format!("loading `train_data` {}", data_path.display()))?;
    if !cfg.subjects.is_empty() {
        dataset = dataset.filter_subjects(&cfg.subjects)?;
    }
    if dataset.is_empty() {
        return Err(UsageError(format!("`train_data` {} has no usable frames", data_path.display())).into());
    }

    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let log_path = args.out.join(LOG_FILE);
    let log = csv::Writer::from_path(&log_path).with_context(|| format!("creating {}", log_path.display()))?;
    let mut obs = RunObserver {
        dir: args.out.clone(),
        cfg: cfg.train.clone(),
        joint_names: skeleton.joint_names().to_vec(),
        log,
        checkpoints: Vec::new(),
        last: None,
    };
    let result = train(&dataset, &cfg.train, &mut obs);
    obs.log.flush().ok();
    if let Err(e) = result {
        let at = obs.last.map_or(1, |r| r.step + 1);
        let diag = match obs.last {
            Some(r) => format!(
                "training failed at step {at}; last logged losses: total {} adv {} angle {} cam {} sym {} l3d {} svma {} disc {} gp {}",
                r.total, r.adv, r.angle, r.cam, r.sym, r.l3d, r.svma, r.disc, r.gp
            ),
            None => format!("training failed at step {at}"),
        };
        return Err(anyhow::Error::new(e).context(diag));
    }

    let dir = &args.out;
    let final_path = dir.join(FINAL_CHECKPOINT);
    let m = RunManifest {
        format: manifest::FORMAT.into(),
        code_version: code_version(),
        seed: cfg.train.seed,
        config: cfg.train.clone(),
        train_data: DatasetRecord {
            path: data_path.clone(),
            sha256: hash,
            frames: dataset.len(),
        },
        subjects: cfg.subjects.clone(),
        outputs: Outputs {
            log: relative(dir, &log_path),
            checkpoints: obs.checkpoints.iter().map(|p| relative(dir, p)).collect(),
            final_checkpoint: relative(dir, &final_path),
        },
    };
    let mpath = m.save(dir)?;
    match obs.last {
        Some(r) => println!("step {} total {:.6}", r.step, r.total),
        None => println!("no training steps run"),
    }
    println!("checkpoint {}", final_path.display());
    println!("manifest {}", mpath.display());
    Ok(())
}
