//! Adversarial training with the two-pass, weight-sharing generator.
//!
//! One step:
//!
//! 1. lift each real 2D pose with the generator's depth offsets;
//! 2. rotate the lifted pose about the vertical axis by a random angle and
//!    reproject it with the estimated camera;
//! 3. lift the reprojection again with the same generator parameters;
//! 4. update the critic on reprojections versus independent real samples;
//! 5. update the generator on the weighted objective.
//!
//! Gradients are propagated by hand through both generator passes, the
//! lifting, the rotation and the reprojection.

use std::f64::consts::TAU;

use log::{debug, warn};
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::PoseDataset;
use crate::error::{Error, Result};
use crate::geometry::{rotate_point, CameraWP, RotationY, DEFAULT_DEPTH, DEFAULT_MIN_DEPTH};
use crate::losses::{
    loss_3d_grad, loss_angle_grad, loss_cam_eq_grad, loss_camera_gram_grad, loss_svma_grad, loss_symmetry_grad,
    LossReport, LossTerms, LossWeights,
};
use crate::networks::{init_params, stack_poses, Discriminator, GeneratorCache, Generator, NetConfig};
use crate::nn::{Mode, Tensors};
use crate::pose::{Pose2D, Pose3D};
use crate::skeleton::Skeleton;

/// Everything that determines a training run apart from the data.
///
/// Serialises to a flat key-value document; loss weights sit at the top
/// level next to the optimiser settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub batch_size: usize,
    pub total_steps: u64,
    pub critic_ratio: usize,
    pub seed: u64,
    pub use_discriminator: bool,
    pub use_svma: bool,
    #[serde(flatten)]
    pub weights: LossWeights,
    /// Camera-to-root distance `d`.
    pub camera_distance: f64,
    pub min_depth: f64,
    pub width: usize,
    pub dropout: f64,
    pub leaky_slope: f64,
    /// Steps between checkpoints; 0 writes only the final one.
    pub checkpoint_every: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let net = NetConfig::default();
        TrainConfig {
            learning_rate: 5.5e-5,
            adam_beta1: 0.7,
            adam_beta2: 0.9,
            adam_eps: 1e-8,
            batch_size: 512,
            total_steps: 50_000,
            critic_ratio: 1,
            seed: 0,
            use_discriminator: true,
            use_svma: true,
            weights: LossWeights::default(),
            camera_distance: DEFAULT_DEPTH,
            min_depth: DEFAULT_MIN_DEPTH,
            width: net.width,
            dropout: net.dropout,
            leaky_slope: net.slope,
            checkpoint_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("learning_rate", self.learning_rate),
            ("adam_eps", self.adam_eps),
            ("camera_distance", self.camera_distance),
            ("min_depth", self.min_depth),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must lie in [0, 1), got {v}")));
            }
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout must lie in [0, 1), got {}", self.dropout)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.critic_ratio == 0 {
            return Err(Error::Config("critic_ratio must be at least 1".into()));
        }
        if self.width == 0 {
            return Err(Error::Config("width must be at least 1".into()));
        }
        self.weights.validate()
    }

    pub fn net_config(&self, num_joints: usize) -> NetConfig {
        NetConfig {
            num_joints,
            width: self.width,
            dropout: self.dropout,
            slope: self.leaky_slope,
        }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

/// First and second moment estimates, one buffer per trainable tensor.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AdamMoments {
    pub t: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl AdamMoments {
    pub fn for_params(params: &impl Tensors) -> Self {
        let sizes: Vec<usize> = params.tensor_list().iter().filter(|t| t.trainable).map(|t| t.data.len()).collect();
        AdamMoments {
            t: 0,
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }
}

/// Bias-corrected Adam on every trainable tensor of `params`.
pub fn adam_update<P: Tensors>(params: &mut P, grads: &P, moments: &mut AdamMoments, cfg: &AdamConfig) -> Result<()> {
    let grads: Vec<_> = grads.tensor_list().into_iter().filter(|t| t.trainable).collect();
    if grads.len() != moments.m.len() {
        return Err(Error::Shape(format!("{} gradient tensors for {} moment buffers", grads.len(), moments.m.len())));
    }
    for g in &grads {
        if g.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric(format!("gradient of {}", g.name)));
        }
    }
    moments.t += 1;
    let t = moments.t as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    let mut params: Vec<_> = params.tensor_list_mut().into_iter().filter(|t| t.trainable).collect();
    for (((p, g), m), v) in params.iter_mut().zip(&grads).zip(&mut moments.m).zip(&mut moments.v) {
        if p.data.len() != g.data.len() {
            return Err(Error::Shape(format!("gradient of {} has the wrong size", p.name)));
        }
        for i in 0..p.data.len() {
            let gi = g.data[i];
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
            let mh = m[i] / c1;
            let vh = v[i] / c2;
            p.data[i] -= cfg.learning_rate * mh / (vh.sqrt() + cfg.eps);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    /// Lifted joints whose depth was raised to the minimum.
    pub clamped_joints: u64,
    pub degenerate_orientations: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub net: NetConfig,
    pub generator: Generator,
    pub discriminator: Discriminator,
    pub gen_moments: AdamMoments,
    pub dis_moments: AdamMoments,
    pub step: u64,
    /// Bumped on every generator update.
    pub generator_version: u64,
    pub rng: ChaCha8Rng,
    pub counters: Counters,
    /// Current epoch permutation and position in it.
    pub order: Vec<usize>,
    pub cursor: usize,
}

impl TrainState {
    pub fn new(cfg: &TrainConfig, num_joints: usize) -> Self {
        let net = cfg.net_config(num_joints);
        let (generator, discriminator) = init_params(cfg.seed, &net);
        let gen_moments = AdamMoments::for_params(&generator);
        let dis_moments = AdamMoments::for_params(&discriminator);
        // separate stream from parameter initialisation
        let rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_cafe_f00d_d00d);
        TrainState {
            net,
            generator,
            discriminator,
            gen_moments,
            dis_moments,
            step: 0,
            generator_version: 0,
            rng,
            counters: Counters::default(),
            order: Vec::new(),
            cursor: 0,
        }
    }
}

/// What a step produced besides the new state.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub report: LossReport,
    /// Generator version read by the first and the second pass.
    pub pass_versions: (u64, u64),
}

/// Intermediate values of the generator's forward computation for a batch.
struct Forward {
    batch: usize,
    joints: usize,
    x_real: Array2<f64>,
    cache1: GeneratorCache,
    cams: Vec<CameraWP>,
    /// Lifted poses, `batch * joints` entries, and their clamp masks.
    lifted: Vec<[f64; 3]>,
    clamped1: Vec<bool>,
    rotations: Vec<[[f64; 3]; 3]>,
    rotated: Vec<[f64; 3]>,
    x_proj: Array2<f64>,
    second: Option<SecondPass>,
    versions: (u64, u64),
}

struct SecondPass {
    cache: GeneratorCache,
    cams: Vec<CameraWP>,
    lifted: Vec<[f64; 3]>,
    clamped: Vec<bool>,
}

fn lift_rows(x: &Array2<f64>, depth: &Array2<f64>, d: f64, min_depth: f64) -> (Vec<[f64; 3]>, Vec<bool>) {
    let (b, n) = depth.dim();
    let mut out = Vec::with_capacity(b * n);
    let mut clamped = Vec::with_capacity(b * n);
    for i in 0..b {
        for j in 0..n {
            let mut z = d + depth[[i, j]];
            let c = z < min_depth;
            if c {
                z = min_depth;
            }
            out.push([x[[i, 2 * j]] * z, x[[i, 2 * j + 1]] * z, z]);
            clamped.push(c);
        }
    }
    (out, clamped)
}

fn cameras(out: &Array2<f64>) -> Vec<CameraWP> {
    out.rows().into_iter().map(|r| CameraWP::from_slice(r.as_slice().expect("contiguous"))).collect()
}

fn project_all(cam: &CameraWP, pose: &[[f64; 3]]) -> Vec<[f64; 2]> {
    pose.iter().map(|&p| cam.apply(p)).collect()
}

/// Backpropagate `g` (gradient w.r.t. `K X_j`) into the camera and pose.
fn project_backward(cam: &CameraWP, pose: &[[f64; 3]], g: &[[f64; 2]], g_cam: &mut [f64], g_pose: &mut [[f64; 3]]) {
    let k = &cam.k;
    for ((p, gj), gp) in pose.iter().zip(g).zip(g_pose.iter_mut()) {
        for r in 0..2 {
            for c in 0..3 {
                g_cam[r * 3 + c] += gj[r] * p[c];
                gp[c] += k[r][c] * gj[r];
            }
        }
    }
}

fn scaled<const D: usize>(g: &[[f64; D]], s: f64) -> impl Iterator<Item = [f64; D]> + '_ {
    g.iter().map(move |v| v.map(|x| x * s))
}

fn add_into<const D: usize>(dst: &mut [[f64; D]], src: impl Iterator<Item = [f64; D]>) {
    for (d, s) in dst.iter_mut().zip(src) {
        for k in 0..D {
            d[k] += s[k];
        }
    }
}

/// The generator side of one step, separated so tests can inject angles and
/// random streams.
pub struct Objective<'a> {
    pub skeleton: &'a Skeleton,
    pub cfg: &'a TrainConfig,
}

/// Unweighted loss terms and the generator gradient of one batch.
pub struct GeneratorGrad {
    pub terms: LossTerms,
    pub cam_eq: f64,
    pub grads: Generator,
    pub x_proj: Array2<f64>,
    pub versions: (u64, u64),
    pub counters: Counters,
    cache1: GeneratorCache,
}

impl<'a> Objective<'a> {
    fn forward<R: Rng + ?Sized>(
        &self,
        g: &Generator,
        version: u64,
        x_real: &Array2<f64>,
        thetas: &[f64],
        rng: &mut R,
    ) -> Result<Forward> {
        let cfg = self.cfg;
        let (batch, joints) = (x_real.nrows(), x_real.ncols() / 2);
        if thetas.len() != batch {
            return Err(Error::Shape(format!("{} angles for a batch of {batch}", thetas.len())));
        }
        let (out1, cache1) = g.forward(x_real, Mode::Train, rng)?;
        let cams = cameras(&out1.camera);
        let (lifted, clamped1) = lift_rows(x_real, &out1.depth, cfg.camera_distance, cfg.min_depth);
        let rotations: Vec<_> = thetas.iter().map(|&t| RotationY::new(t).matrix()).collect();
        let mut rotated = Vec::with_capacity(lifted.len());
        let mut x_proj = Array2::zeros((batch, 2 * joints));
        for i in 0..batch {
            for j in 0..joints {
                let p = rotate_point(lifted[i * joints + j], &rotations[i], cfg.camera_distance);
                let q = cams[i].apply(p);
                x_proj[[i, 2 * j]] = q[0];
                x_proj[[i, 2 * j + 1]] = q[1];
                rotated.push(p);
            }
        }
        let second = if cfg.use_svma {
            let (out2, cache) = g.forward(&x_proj, Mode::Train, rng)?;
            let (lifted2, clamped) = lift_rows(&x_proj, &out2.depth, cfg.camera_distance, cfg.min_depth);
            Some(SecondPass {
                cache,
                cams: cameras(&out2.camera),
                lifted: lifted2,
                clamped,
            })
        } else {
            None
        };
        Ok(Forward {
            batch,
            joints,
            x_real: x_real.clone(),
            cache1,
            cams,
            lifted,
            clamped1,
            rotations,
            rotated,
            x_proj,
            second,
            versions: (version, version),
        })
    }

    fn backward(&self, g: &Generator, critic: Option<&Discriminator>, f: Forward) -> Result<GeneratorGrad> {
        let cfg = self.cfg;
        let w = &cfg.weights;
        let (b, n) = (f.batch, f.joints);
        let inv_b = 1.0 / b as f64;
        let mut terms = LossTerms::default();
        let mut cam_eq_total = 0.0;
        let mut counters = Counters::default();

        let mut g_lift1 = vec![[0.0; 3]; b * n];
        let mut g_rot = vec![[0.0; 3]; b * n];
        let mut g_cam1 = Array2::<f64>::zeros((b, 6));
        let mut g_xproj = Array2::<f64>::zeros((b, 2 * n));
        let mut g_lift2 = vec![[0.0; 3]; b * n];
        let mut g_cam2 = Array2::<f64>::zeros((b, 6));

        // adversarial term, scored by the current critic
        if let Some(d) = critic {
            let (scores, cache) = d.forward(&f.x_proj)?;
            terms.adv = -scores.sum() * inv_b;
            g_xproj.scaled_add(-inv_b, &d.input_gradient(&cache));
        }

        for i in 0..b {
            let rows = i * n..(i + 1) * n;
            let pose = &f.lifted[rows.clone()];
            let cam = &f.cams[i];

            let a = loss_angle_grad(pose, self.skeleton);
            counters.degenerate_orientations += a.degenerate as u64;
            terms.angle += a.value * inv_b;
            add_into(&mut g_lift1[rows.clone()], scaled(&a.grad, w.lambda_angle * inv_b));

            let (sym, gs) = loss_symmetry_grad(pose, self.skeleton);
            terms.sym += sym * inv_b;
            add_into(&mut g_lift1[rows.clone()], scaled(&gs, w.lambda_sym * inv_b));

            let (gram, gk) = loss_camera_gram_grad(cam).map_err(|_| Error::numeric("camera loss: zero camera"))?;
            terms.cam += gram * inv_b;
            let mut gc1 = g_cam1.row_mut(i);
            for k in 0..6 {
                gc1[k] += w.lambda_cam * inv_b * gk[k];
            }

            if let Some(s) = &f.second {
                let pose2 = &s.lifted[rows.clone()];
                let cam2 = &s.cams[i];
                let rotated = &f.rotated[rows.clone()];

                let (eq, ge) = loss_cam_eq_grad(cam, cam2);
                terms.cam += eq * inv_b;
                cam_eq_total += eq * inv_b;
                for k in 0..6 {
                    g_cam1[[i, k]] += w.lambda_cam * inv_b * ge[k];
                    g_cam2[[i, k]] -= w.lambda_cam * inv_b * ge[k];
                }

                let (l3, g3) = loss_3d_grad(pose2, rotated);
                terms.l3d += l3 * inv_b;
                let c = w.lambda_3d * inv_b;
                add_into(&mut g_lift2[rows.clone()], scaled(&g3, c));
                add_into(&mut g_rot[rows.clone()], scaled(&g3, -c));

                let x_real: Vec<[f64; 2]> = f.x_real.row(i).as_slice().expect("contiguous").chunks(2).map(|c| [c[0], c[1]]).collect();
                let x_proj: Vec<[f64; 2]> = f.x_proj.row(i).as_slice().expect("contiguous").chunks(2).map(|c| [c[0], c[1]]).collect();
                let k_x = project_all(cam, pose);
                let k2_x = project_all(cam2, pose);
                let k_x2 = project_all(cam, pose2);
                let k2_x2 = project_all(cam2, pose2);
                let (sv, sg) = loss_svma_grad(&[&x_real, &k_x, &k2_x], &[&x_proj, &k_x2, &k2_x2])?;
                terms.svma += sv * inv_b;
                let c = w.lambda_svma * inv_b;
                let scale2 = |g: &Vec<[f64; 2]>| g.iter().map(|v| [v[0] * c, v[1] * c]).collect::<Vec<_>>();
                let mut gc1: Vec<f64> = g_cam1.row(i).to_vec();
                let mut gc2: Vec<f64> = g_cam2.row(i).to_vec();
                project_backward(cam, pose, &scale2(&sg[0][1]), &mut gc1, &mut g_lift1[rows.clone()]);
                project_backward(cam2, pose, &scale2(&sg[0][2]), &mut gc2, &mut g_lift1[rows.clone()]);
                project_backward(cam, pose2, &scale2(&sg[1][1]), &mut gc1, &mut g_lift2[rows.clone()]);
                project_backward(cam2, pose2, &scale2(&sg[1][2]), &mut gc2, &mut g_lift2[rows.clone()]);
                g_cam1.row_mut(i).assign(&ndarray::ArrayView1::from(&gc1));
                g_cam2.row_mut(i).assign(&ndarray::ArrayView1::from(&gc2));
                for (j, v) in sg[1][0].iter().enumerate() {
                    g_xproj[[i, 2 * j]] += c * v[0];
                    g_xproj[[i, 2 * j + 1]] += c * v[1];
                }
            }
        }

        for (name, v) in [
            ("adv", terms.adv),
            ("angle", terms.angle),
            ("cam", terms.cam),
            ("sym", terms.sym),
            ("l3d", terms.l3d),
            ("svma", terms.svma),
        ] {
            if !v.is_finite() {
                return Err(Error::numeric(format!("loss term {name}")));
            }
        }

        let mut grads = g.zeros_like();

        // second lift and second generator pass
        if let Some(s) = &f.second {
            let mut g_depth2 = Array2::zeros((b, n));
            for i in 0..b {
                for j in 0..n {
                    let idx = i * n + j;
                    let gl = g_lift2[idx];
                    let z = s.lifted[idx][2];
                    let (x, y) = (f.x_proj[[i, 2 * j]], f.x_proj[[i, 2 * j + 1]]);
                    g_xproj[[i, 2 * j]] += gl[0] * z;
                    g_xproj[[i, 2 * j + 1]] += gl[1] * z;
                    if !s.clamped[idx] {
                        g_depth2[[i, j]] = gl[0] * x + gl[1] * y + gl[2];
                    }
                }
            }
            counters.clamped_joints += s.clamped.iter().filter(|&&c| c).count() as u64;
            let dx = g.backward(&s.cache, &g_depth2, &g_cam2, &mut grads);
            g_xproj += &dx;
        }

        // reprojection and rotation
        for i in 0..b {
            let rows = i * n..(i + 1) * n;
            let gp: Vec<[f64; 2]> = (0..n).map(|j| [g_xproj[[i, 2 * j]], g_xproj[[i, 2 * j + 1]]]).collect();
            let mut gc: Vec<f64> = g_cam1.row(i).to_vec();
            project_backward(&f.cams[i], &f.rotated[rows.clone()], &gp, &mut gc, &mut g_rot[rows.clone()]);
            g_cam1.row_mut(i).assign(&ndarray::ArrayView1::from(&gc));
            let m = &f.rotations[i];
            for idx in rows {
                let gr = g_rot[idx];
                for c in 0..3 {
                    g_lift1[idx][c] += gr[0] * m[c][0] + gr[1] * m[c][1] + gr[2] * m[c][2];
                }
            }
        }

        // first lift and first generator pass
        let mut g_depth1 = Array2::zeros((b, n));
        for i in 0..b {
            for j in 0..n {
                let idx = i * n + j;
                if !f.clamped1[idx] {
                    let gl = g_lift1[idx];
                    g_depth1[[i, j]] = gl[0] * f.x_real[[i, 2 * j]] + gl[1] * f.x_real[[i, 2 * j + 1]] + gl[2];
                }
            }
        }
        counters.clamped_joints += f.clamped1.iter().filter(|&&c| c).count() as u64;
        g.backward(&f.cache1, &g_depth1, &g_cam1, &mut grads);

        Ok(GeneratorGrad {
            terms,
            cam_eq: cam_eq_total,
            grads,
            x_proj: f.x_proj,
            versions: f.versions,
            counters,
            cache1: f.cache1,
        })
    }

    /// Loss terms and generator gradient on one batch with given angles.
    pub fn evaluate<R: Rng + ?Sized>(
        &self,
        g: &Generator,
        critic: Option<&Discriminator>,
        x_real: &Array2<f64>,
        thetas: &[f64],
        rng: &mut R,
    ) -> Result<GeneratorGrad> {
        let f = self.forward(g, 0, x_real, thetas, rng)?;
        self.backward(g, critic, f)
    }
}

/// Critic loss and penalty after one update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticStep {
    pub disc: f64,
    pub gp: f64,
}

/// One critic update on fixed fake and real batches; the interpolation
/// weights are drawn from `rng`.
pub fn critic_update<R: Rng + ?Sized>(
    d: &mut Discriminator,
    moments: &mut AdamMoments,
    x_fake: &Array2<f64>,
    x_real: &Array2<f64>,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<CriticStep> {
    let b = x_fake.nrows();
    if x_real.nrows() != b {
        return Err(Error::Shape("critic batches differ in size".into()));
    }
    let eps: Vec<f64> = (0..b).map(|_| rng.random::<f64>()).collect();
    let mut x_hat = x_fake.clone();
    for (i, mut row) in x_hat.rows_mut().into_iter().enumerate() {
        let e = eps[i];
        row.zip_mut_with(&x_real.row(i), |f, &r| *f = e * r + (1.0 - e) * *f);
    }
    let (s_fake, c_fake) = d.forward(x_fake)?;
    let (s_real, c_real) = d.forward(x_real)?;
    let mut grads = d.zeros_like();
    let inv_b = 1.0 / b as f64;
    d.backward(&c_fake, &ndarray::Array1::from_elem(b, inv_b), &mut grads);
    d.backward(&c_real, &ndarray::Array1::from_elem(b, -inv_b), &mut grads);
    let pen = d.gradient_penalty(&x_hat, cfg.weights.lambda_gp, Some(&mut grads))?;
    let disc = crate::losses::loss_adversarial(
        s_fake.as_slice().expect("contiguous"),
        s_real.as_slice().expect("contiguous"),
        pen.value,
    )?
    .disc;
    if !disc.is_finite() {
        return Err(Error::numeric("loss term disc"));
    }
    adam_update(d, &grads, moments, &cfg.adam())?;
    Ok(CriticStep { disc, gp: pen.value })
}

/// One full training step with explicit rotation angles.
pub fn train_step_with_angles(
    state: &mut TrainState,
    x_real: &Array2<f64>,
    x_sam: &Array2<f64>,
    thetas: &[f64],
    skeleton: &Skeleton,
    cfg: &TrainConfig,
) -> Result<StepOutput> {
    let obj = Objective { skeleton, cfg };
    let f = obj.forward(&state.generator, state.generator_version, x_real, thetas, &mut state.rng)?;
    let mut critic = CriticStep { disc: 0.0, gp: 0.0 };
    if cfg.use_discriminator {
        let fake = f.x_proj.clone();
        for _ in 0..cfg.critic_ratio {
            critic = critic_update(&mut state.discriminator, &mut state.dis_moments, &fake, x_sam, cfg, &mut state.rng)?;
        }
    }
    let critic_ref = cfg.use_discriminator.then_some(&state.discriminator);
    let gg = obj.backward(&state.generator, critic_ref, f)?;
    state.generator.update_running_stats(&gg.cache1);
    adam_update(&mut state.generator, &gg.grads, &mut state.gen_moments, &cfg.adam())?;
    state.generator_version += 1;
    state.counters.clamped_joints += gg.counters.clamped_joints;
    state.counters.degenerate_orientations += gg.counters.degenerate_orientations;
    state.step += 1;
    let mut report = LossReport::from_terms(state.step, &gg.terms, gg.cam_eq, &cfg.weights);
    report.disc = critic.disc;
    report.gp = critic.gp;
    if let Some(term) = report.non_finite_term() {
        return Err(Error::numeric(format!("loss term {term}")));
    }
    Ok(StepOutput {
        report,
        pass_versions: gg.versions,
    })
}

/// One training step; one rotation angle per sample is drawn uniformly from
/// `[0, 2pi)`.
pub fn train_step(
    state: &mut TrainState,
    x_real: &Array2<f64>,
    x_sam: &Array2<f64>,
    skeleton: &Skeleton,
    cfg: &TrainConfig,
) -> Result<StepOutput> {
    let thetas: Vec<f64> = (0..x_real.nrows()).map(|_| state.rng.random_range(0.0..TAU)).collect();
    train_step_with_angles(state, x_real, x_sam, &thetas, skeleton, cfg)
}

/// Receives training progress.
pub trait TrainObserver {
    fn on_step(&mut self, _report: &LossReport) -> Result<()> {
        Ok(())
    }
    fn on_checkpoint(&mut self, _state: &TrainState) -> Result<()> {
        Ok(())
    }
}

/// Observer that ignores everything.
pub struct NoObserver;
impl TrainObserver for NoObserver {}

/// Observer that keeps every report in memory.
#[derive(Debug, Default)]
pub struct Recorder {
    pub reports: Vec<LossReport>,
}

impl TrainObserver for Recorder {
    fn on_step(&mut self, report: &LossReport) -> Result<()> {
        self.reports.push(*report);
        Ok(())
    }
}

/// Normalised network inputs of a dataset as a `frames x 2N` matrix.
pub fn prepare_matrix(dataset: &PoseDataset, d: f64) -> Result<Array2<f64>> {
    let prepared = dataset.prepare_inputs(d);
    if prepared.poses.is_empty() {
        return Err(Error::Config("dataset has no usable frames".into()));
    }
    let refs: Vec<&Pose2D> = prepared.poses.iter().collect();
    Ok(stack_poses(&refs))
}

fn gather(inputs: &Array2<f64>, idx: &[usize]) -> Array2<f64> {
    inputs.select(ndarray::Axis(0), idx)
}

fn next_batch(state: &mut TrainState, len: usize, batch: usize) -> Vec<usize> {
    if state.order.len() != len || state.cursor + batch > len {
        state.order = (0..len).collect();
        state.order.shuffle(&mut state.rng);
        state.cursor = 0;
    }
    let idx = state.order[state.cursor..state.cursor + batch].to_vec();
    state.cursor += batch;
    idx
}

/// Train from scratch on a dataset.
pub fn train(dataset: &PoseDataset, cfg: &TrainConfig, observer: &mut dyn TrainObserver) -> Result<TrainState> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::Config("training dataset is empty".into()));
    }
    let inputs = prepare_matrix(dataset, cfg.camera_distance)?;
    let state = TrainState::new(cfg, dataset.skeleton.num_joints());
    resume(state, &inputs, &dataset.skeleton, cfg, observer)
}

/// Continue training `state` on prepared inputs until `cfg.total_steps`.
pub fn resume(
    mut state: TrainState,
    inputs: &Array2<f64>,
    skeleton: &Skeleton,
    cfg: &TrainConfig,
    observer: &mut dyn TrainObserver,
) -> Result<TrainState> {
    cfg.validate()?;
    if inputs.ncols() != 2 * state.net.num_joints {
        return Err(Error::Shape(format!(
            "inputs have {} columns, networks expect {}",
            inputs.ncols(),
            2 * state.net.num_joints
        )));
    }
    let len = inputs.nrows();
    let batch = cfg.batch_size.min(len);
    if batch < cfg.batch_size {
        warn!("batch size reduced to {batch} to fit the dataset");
    }
    while state.step < cfg.total_steps {
        let real_idx = next_batch(&mut state, len, batch);
        let sam_idx: Vec<usize> = (0..batch).map(|_| state.rng.random_range(0..len)).collect();
        let x_real = gather(inputs, &real_idx);
        let x_sam = gather(inputs, &sam_idx);
        let out = train_step(&mut state, &x_real, &x_sam, skeleton, cfg)?;
        debug!("step {} total {:.6}", out.report.step, out.report.total);
        observer.on_step(&out.report)?;
        if cfg.checkpoint_every > 0 && state.step % cfg.checkpoint_every == 0 && state.step < cfg.total_steps {
            observer.on_checkpoint(&state)?;
        }
    }
    observer.on_checkpoint(&state)?;
    Ok(state)
}

/// Mean camera disagreement between the two generator passes in eval mode,
/// for given rotation angles.
pub fn held_out_cam_eq(g: &Generator, x: &Array2<f64>, thetas: &[f64], d: f64, min_depth: f64) -> Result<f64> {
    let first = lift_batch(g, x, d, min_depth)?;
    if thetas.len() != first.len() {
        return Err(Error::Shape(format!("{} angles for a batch of {}", thetas.len(), first.len())));
    }
    let n = x.ncols() / 2;
    let mut x_proj = Array2::zeros(x.raw_dim());
    for (i, ((pose, cam), &t)) in first.iter().zip(thetas).enumerate() {
        let m = RotationY::new(t).matrix();
        for j in 0..n {
            let q = cam.apply(rotate_point(pose.0[j], &m, d));
            x_proj[[i, 2 * j]] = q[0];
            x_proj[[i, 2 * j + 1]] = q[1];
        }
    }
    let second = cameras(&g.predict(&x_proj)?.camera);
    let total: f64 = first.iter().zip(&second).map(|((_, k1), k2)| crate::losses::loss_cam_eq(k1, k2)).sum();
    Ok(total / first.len() as f64)
}

/// Eval-mode lifting of prepared inputs: absolute 3D poses and cameras.
pub fn lift_batch(g: &Generator, inputs: &Array2<f64>, d: f64, min_depth: f64) -> Result<Vec<(Pose3D, CameraWP)>> {
    let out = g.predict(inputs)?;
    let (lifted, _) = lift_rows(inputs, &out.depth, d, min_depth);
    let n = out.depth.ncols();
    Ok(lifted
        .chunks(n.max(1))
        .zip(cameras(&out.camera))
        .map(|(p, c)| (Pose3D(p.to_vec()), c))
        .collect())
}
