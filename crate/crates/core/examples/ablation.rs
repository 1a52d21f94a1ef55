//! Desk-scale ablation on synthetic data: trains the three variants for a few
//! seeds and prints held-out P-MPJPE.
//!
//! usage: ablation [width] [steps] [batch] [lr] [seeds] [dropout] [critic_ratio]
//! Set VERBOSE to print loss terms every 250 steps.

use std::time::Instant;

use svma::evaluation::evaluate_model;
use svma::skeleton::Skeleton;
use svma::losses::LossReport;
use svma::synth::{full_sweep, synthesize_poses};
use svma::training::{train, TrainConfig, TrainObserver, TrainState};

struct Progress(bool);

impl TrainObserver for Progress {
    fn on_step(&mut self, r: &LossReport) -> svma::Result<()> {
        if self.0 && r.step % 250 == 0 {
            println!(
                "  step {:5} adv {:8.3} angle {:.4} cam {:.4} eq {:.4} sym {:.4} l3d {:.4} svma {:.4} disc {:8.3} gp {:.3} total {:.4}",
                r.step, r.adv, r.angle, r.cam, r.cam_eq, r.sym, r.l3d, r.svma, r.disc, r.gp, r.total
            );
        }
        Ok(())
    }
}

fn arg<T: std::str::FromStr>(i: usize, default: T) -> T {
    std::env::args().nth(i).and_then(|s| s.parse().ok()).unwrap_or(default)
}

fn main() -> svma::Result<()> {
    let width: usize = arg(1, 128);
    let steps: u64 = arg(2, 2000);
    let batch: usize = arg(3, 128);
    let lr: f64 = arg(4, 2e-3);
    let seeds: u64 = arg(5, 3);
    let dropout: f64 = arg(6, 0.25);
    let critic_ratio: usize = arg(7, 1);

    let skel = Skeleton::canonical();
    let all = synthesize_poses(5000, 2024, &skel, &full_sweep(36))?;
    let train_idx: Vec<usize> = (0..4500).collect();
    let test_idx: Vec<usize> = (4500..5000).collect();
    let train_set = all.select(&train_idx);
    let test_set = all.select(&test_idx);

    for seed in 0..seeds {
        let base = TrainConfig {
            width,
            batch_size: batch,
            total_steps: steps,
            learning_rate: lr,
            dropout,
            critic_ratio,
            seed,
            ..TrainConfig::default()
        };
        let init = TrainState::new(&base, skel.num_joints());
        let untrained = evaluate_model(&init.generator, &test_set, base.camera_distance, base.min_depth)?;
        println!("seed {seed} untrained p_mpjpe {:.1}", untrained.overall.p_mpjpe_mm);
        for (name, dis, svma) in [("no_dis", false, true), ("no_svma", true, false), ("all", true, true)] {
            let cfg = TrainConfig {
                use_discriminator: dis,
                use_svma: svma,
                ..base.clone()
            };
            let t0 = Instant::now();
            let state = train(&train_set, &cfg, &mut Progress(std::env::var_os("VERBOSE").is_some()))?;
            let r = evaluate_model(&state.generator, &test_set, cfg.camera_distance, cfg.min_depth)?;
            println!(
                "seed {seed} {name:8} p_mpjpe {:.1} mpjpe {:.1} ({:.1}s)",
                r.overall.p_mpjpe_mm,
                r.overall.mpjpe_mm,
                t0.elapsed().as_secs_f64()
            );
        }
    }
    Ok(())
}
