//! The dual-branch generator and the critic.
//!
//! Generator: `2N -> dense -> shared residual block`, then a pose branch
//! (two residual blocks, linear to `N` depth offsets) and a camera branch
//! (two residual blocks, linear to the 6 camera entries, reshaped row-major
//! to a 2x3 matrix). Batch norm and dropout follow every hidden layer.
//!
//! Critic: `2N -> dense -> two residual blocks -> linear -> 1`, leaky relu
//! only, so its input gradient is piecewise polynomial in the weights. That
//! lets [`Discriminator::gradient_penalty`] differentiate the penalty with an
//! explicit second backward sweep.
//!
//! Trainable parameter counts for `N` joints and hidden width `W`:
//!
//! ```text
//! generator      10 W^2 + (3N + 39) W + N + 6
//! discriminator   4 W^2 + (2N + 6) W + 1
//! ```

use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::CameraWP;
use crate::nn::{check_finite, Dense, DenseCache, LayerSpec, Linear, Mode, NoRng, ResidualBlock, ResidualCache, TensorMut, TensorRef, Tensors};

/// Shape and regularisation of both networks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    pub num_joints: usize,
    pub width: usize,
    pub dropout: f64,
    pub slope: f64,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig {
            num_joints: 17,
            width: 1024,
            dropout: 0.25,
            slope: 0.01,
        }
    }
}

/// Initial camera: `0.1 * [[1,0,0],[0,1,0]]` flattened.
pub const INITIAL_CAMERA: [f64; 6] = [0.1, 0.0, 0.0, 0.0, 0.1, 0.0];
const CAMERA_OUT_STD: f64 = 1e-3;
const RESIDUAL_BLOCKS_PER_BRANCH: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub input: Dense,
    pub shared: ResidualBlock,
    pub pose_blocks: Vec<ResidualBlock>,
    pub pose_out: Linear,
    pub cam_blocks: Vec<ResidualBlock>,
    pub cam_out: Linear,
}

#[derive(Debug, Clone)]
pub struct GeneratorOutput {
    /// `batch x N` depth offsets `D`.
    pub depth: Array2<f64>,
    /// `batch x 6` camera entries, row-major.
    pub camera: Array2<f64>,
}

impl GeneratorOutput {
    pub fn camera(&self, row: usize) -> CameraWP {
        CameraWP::from_slice(self.camera.row(row).as_slice().expect("contiguous"))
    }
}

#[derive(Debug, Clone)]
pub struct GeneratorCache {
    input: DenseCache,
    shared: ResidualCache,
    pose: Vec<ResidualCache>,
    pose_h: Array2<f64>,
    cam: Vec<ResidualCache>,
    cam_h: Array2<f64>,
}

impl GeneratorCache {
    /// Leaky-relu gates of every hidden layer; finite-difference checks use it
    /// to tell when a perturbation crossed a kink.
    pub fn activation_pattern(&self) -> Vec<Array2<f64>> {
        let mut v = vec![self.input.gate().clone(), self.shared.a.gate().clone(), self.shared.b.gate().clone()];
        for r in self.pose.iter().chain(&self.cam) {
            v.push(r.a.gate().clone());
            v.push(r.b.gate().clone());
        }
        v
    }
}

fn run_blocks<R: Rng + ?Sized>(
    blocks: &[ResidualBlock],
    mut h: Array2<f64>,
    mode: Mode,
    rng: &mut R,
    name: &str,
) -> Result<(Array2<f64>, Vec<ResidualCache>)> {
    let mut caches = Vec::with_capacity(blocks.len());
    for (i, b) in blocks.iter().enumerate() {
        let (y, c) = b.forward(&h, mode, rng);
        check_finite(&y, &format!("{name}.{i}"))?;
        caches.push(c);
        h = y;
    }
    Ok((h, caches))
}

fn back_blocks<'a>(
    blocks: &[ResidualBlock],
    caches: &[ResidualCache],
    mut d: Array2<f64>,
    grads: impl DoubleEndedIterator<Item = &'a mut ResidualBlock>,
) -> Array2<f64> {
    for ((b, c), g) in blocks.iter().zip(caches).rev().zip(grads.rev()) {
        d = b.backward(c, &d, g);
    }
    d
}

impl Generator {
    pub fn new<R: Rng + ?Sized>(cfg: &NetConfig, rng: &mut R) -> Self {
        let w = cfg.width;
        let n = cfg.num_joints;
        let spec = LayerSpec {
            batchnorm: true,
            dropout: cfg.dropout,
            slope: cfg.slope,
        };
        let input = Dense::new(2 * n, w, spec, rng);
        let shared = ResidualBlock::new(w, spec, rng);
        let pose_blocks = (0..RESIDUAL_BLOCKS_PER_BRANCH).map(|_| ResidualBlock::new(w, spec, rng)).collect();
        let pose_out = Linear::normal(w, n, (1.0 / w as f64).sqrt(), rng);
        let cam_blocks = (0..RESIDUAL_BLOCKS_PER_BRANCH).map(|_| ResidualBlock::new(w, spec, rng)).collect();
        let mut cam_out = Linear::normal(w, 6, CAMERA_OUT_STD, rng);
        cam_out.bias = Array1::from(INITIAL_CAMERA.to_vec());
        Generator {
            input,
            shared,
            pose_blocks,
            pose_out,
            cam_blocks,
            cam_out,
        }
    }

    /// Same structure with zero parameters; used to accumulate gradients.
    pub fn zeros_like(&self) -> Self {
        let (w, n) = self.pose_out.weight.dim();
        Generator {
            input: self.input.zeros_like(),
            shared: self.shared.zeros_like(),
            pose_blocks: self.pose_blocks.iter().map(ResidualBlock::zeros_like).collect(),
            pose_out: Linear::zeros(w, n),
            cam_blocks: self.cam_blocks.iter().map(ResidualBlock::zeros_like).collect(),
            cam_out: Linear::zeros(w, 6),
        }
    }

    pub fn num_joints(&self) -> usize {
        self.pose_out.weight.ncols()
    }

    pub fn expected_param_count(num_joints: usize, width: usize) -> usize {
        10 * width * width + (3 * num_joints + 39) * width + num_joints + 6
    }

    /// `x` is `batch x 2N` in interleaved `(x, y)` layout. Dropout masks in
    /// train mode are drawn from `rng`; eval mode never touches it.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        x: &Array2<f64>,
        mode: Mode,
        rng: &mut R,
    ) -> Result<(GeneratorOutput, GeneratorCache)> {
        check_finite(x, "generator.input_data")?;
        let (h, input) = self.input.forward(x, mode, rng);
        check_finite(&h, "generator.input")?;
        let (h, shared) = self.shared.forward(&h, mode, rng);
        check_finite(&h, "generator.shared")?;
        let (pose_h, pose) = run_blocks(&self.pose_blocks, h.clone(), mode, rng, "generator.pose")?;
        let depth = self.pose_out.forward(&pose_h);
        check_finite(&depth, "generator.pose_out")?;
        let (cam_h, cam) = run_blocks(&self.cam_blocks, h, mode, rng, "generator.camera")?;
        let camera = self.cam_out.forward(&cam_h);
        check_finite(&camera, "generator.camera_out")?;
        let cache = GeneratorCache {
            input,
            shared,
            pose,
            pose_h,
            cam,
            cam_h,
        };
        Ok((GeneratorOutput { depth, camera }, cache))
    }

    /// Eval-mode forward without caches.
    pub fn predict(&self, x: &Array2<f64>) -> Result<GeneratorOutput> {
        Ok(self.forward(x, Mode::Eval, &mut NoRng)?.0)
    }

    /// Backpropagate output gradients; parameter gradients are added to
    /// `grads` and the input gradient is returned.
    pub fn backward(
        &self,
        cache: &GeneratorCache,
        d_depth: &Array2<f64>,
        d_camera: &Array2<f64>,
        grads: &mut Generator,
    ) -> Array2<f64> {
        let d_pose_h = self.pose_out.backward(&cache.pose_h, d_depth, &mut grads.pose_out);
        let d_pose = back_blocks(&self.pose_blocks, &cache.pose, d_pose_h, grads.pose_blocks.iter_mut());
        let d_cam_h = self.cam_out.backward(&cache.cam_h, d_camera, &mut grads.cam_out);
        let d_cam = back_blocks(&self.cam_blocks, &cache.cam, d_cam_h, grads.cam_blocks.iter_mut());
        let d_shared = self.shared.backward(&cache.shared, &(d_pose + d_cam), &mut grads.shared);
        self.input.backward(&cache.input, &d_shared, &mut grads.input)
    }

    /// Fold the batch statistics of a train-mode pass into the running
    /// estimates used in eval mode.
    pub fn update_running_stats(&mut self, cache: &GeneratorCache) {
        self.input.update_running(&cache.input);
        self.shared.update_running(&cache.shared);
        for (b, c) in self.pose_blocks.iter_mut().zip(&cache.pose) {
            b.update_running(c);
        }
        for (b, c) in self.cam_blocks.iter_mut().zip(&cache.cam) {
            b.update_running(c);
        }
    }
}

impl Tensors for Generator {
    fn tensors<'a>(&'a self, prefix: &str, out: &mut Vec<TensorRef<'a>>) {
        let p = |s: &str| if prefix.is_empty() { s.to_string() } else { format!("{prefix}.{s}") };
        Tensors::tensors(&self.input, &p("input"), out);
        self.shared.tensors(&p("shared"), out);
        for (i, b) in self.pose_blocks.iter().enumerate() {
            b.tensors(&p(&format!("pose.{i}")), out);
        }
        Tensors::tensors(&self.pose_out, &p("pose_out"), out);
        for (i, b) in self.cam_blocks.iter().enumerate() {
            b.tensors(&p(&format!("camera.{i}")), out);
        }
        Tensors::tensors(&self.cam_out, &p("camera_out"), out);
    }

    fn tensors_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<TensorMut<'a>>) {
        let p = |s: &str| if prefix.is_empty() { s.to_string() } else { format!("{prefix}.{s}") };
        Tensors::tensors_mut(&mut self.input, &p("input"), out);
        self.shared.tensors_mut(&p("shared"), out);
        for (i, b) in self.pose_blocks.iter_mut().enumerate() {
            b.tensors_mut(&p(&format!("pose.{i}")), out);
        }
        Tensors::tensors_mut(&mut self.pose_out, &p("pose_out"), out);
        for (i, b) in self.cam_blocks.iter_mut().enumerate() {
            b.tensors_mut(&p(&format!("camera.{i}")), out);
        }
        Tensors::tensors_mut(&mut self.cam_out, &p("camera_out"), out);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Discriminator {
    pub input: Dense,
    pub blocks: Vec<ResidualBlock>,
    pub out: Linear,
}

#[derive(Debug, Clone)]
pub struct DiscriminatorCache {
    input: DenseCache,
    blocks: Vec<ResidualCache>,
    h: Array2<f64>,
}

impl DiscriminatorCache {
    /// Leaky-relu gates of every hidden layer.
    pub fn activation_pattern(&self) -> Vec<Array2<f64>> {
        let mut v = vec![self.input.gate().clone()];
        for r in &self.blocks {
            v.push(r.a.gate().clone());
            v.push(r.b.gate().clone());
        }
        v
    }
}

/// Pre-activation gradients stashed while computing the input gradient,
/// needed to differentiate the penalty with respect to the weights.
struct InputGradTape {
    input: Array2<f64>,
    /// Per block: (first layer, second layer).
    blocks: Vec<(Array2<f64>, Array2<f64>)>,
}

/// Value and per-sample input-gradient norms of the gradient penalty.
#[derive(Debug, Clone)]
pub struct PenaltyResult {
    pub value: f64,
    pub grad_norms: Vec<f64>,
}

impl Discriminator {
    pub fn new<R: Rng + ?Sized>(cfg: &NetConfig, rng: &mut R) -> Self {
        let w = cfg.width;
        let spec = LayerSpec {
            batchnorm: false,
            dropout: 0.0,
            slope: cfg.slope,
        };
        Discriminator {
            input: Dense::new(2 * cfg.num_joints, w, spec, rng),
            blocks: (0..2).map(|_| ResidualBlock::new(w, spec, rng)).collect(),
            out: Linear::normal(w, 1, (1.0 / w as f64).sqrt(), rng),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Discriminator {
            input: self.input.zeros_like(),
            blocks: self.blocks.iter().map(ResidualBlock::zeros_like).collect(),
            out: Linear::zeros(self.out.weight.nrows(), 1),
        }
    }

    pub fn expected_param_count(num_joints: usize, width: usize) -> usize {
        4 * width * width + (2 * num_joints + 6) * width + 1
    }

    /// One unbounded critic score per row of `x`.
    pub fn forward(&self, x: &Array2<f64>) -> Result<(Array1<f64>, DiscriminatorCache)> {
        check_finite(x, "discriminator.input_data")?;
        let (h, input) = self.input.forward(x, Mode::Eval, &mut NoRng);
        check_finite(&h, "discriminator.input")?;
        let (h, blocks) = run_blocks(&self.blocks, h, Mode::Eval, &mut NoRng, "discriminator.block")?;
        let score = self.out.forward(&h);
        check_finite(&score, "discriminator.out")?;
        let score = score.index_axis_move(Axis(1), 0);
        Ok((score, DiscriminatorCache { input, blocks, h }))
    }

    pub fn score(&self, x: &Array2<f64>) -> Result<Array1<f64>> {
        Ok(self.forward(x)?.0)
    }

    /// Backpropagate `d score`; parameter gradients are added to `grads`,
    /// the input gradient is returned.
    pub fn backward(&self, cache: &DiscriminatorCache, d_score: &Array1<f64>, grads: &mut Discriminator) -> Array2<f64> {
        let dy = d_score.view().insert_axis(Axis(1)).to_owned();
        let dh = self.out.backward(&cache.h, &dy, &mut grads.out);
        let dh = back_blocks(&self.blocks, &cache.blocks, dh, grads.blocks.iter_mut());
        self.input.backward(&cache.input, &dh, &mut grads.input)
    }

    /// Gradient of each sample's score with respect to its input, without
    /// touching parameter gradients.
    pub fn input_gradient(&self, cache: &DiscriminatorCache) -> Array2<f64> {
        self.input_gradient_taped(cache).0
    }

    fn input_gradient_taped(&self, cache: &DiscriminatorCache) -> (Array2<f64>, InputGradTape) {
        let batch = cache.h.nrows();
        let w_out = self.out.weight.column(0);
        let mut delta = Array2::from_shape_fn((batch, w_out.len()), |(_, j)| w_out[j]);
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for (b, c) in self.blocks.iter().zip(&cache.blocks).rev() {
            let alpha_b = &delta * c.b.gate();
            let mid = alpha_b.dot(&b.b.linear.weight.t());
            let alpha_a = &mid * c.a.gate();
            delta = delta + alpha_a.dot(&b.a.linear.weight.t());
            blocks.push((alpha_a, alpha_b));
        }
        blocks.reverse();
        let alpha_in = &delta * cache.input.gate();
        let g = alpha_in.dot(&self.input.linear.weight.t());
        (g, InputGradTape { input: alpha_in, blocks })
    }

    /// `lambda * mean_b (||grad_x D(x_b)|| - 1)^2`. When `grads` is given,
    /// the penalty's gradient with respect to the critic weights is added.
    /// Biases only move the activation pattern, so their gradient is zero
    /// almost everywhere.
    pub fn gradient_penalty(&self, x_hat: &Array2<f64>, lambda: f64, grads: Option<&mut Discriminator>) -> Result<PenaltyResult> {
        let (_, cache) = self.forward(x_hat)?;
        let (g, tape) = self.input_gradient_taped(&cache);
        let batch = g.nrows() as f64;
        let norms: Vec<f64> = g.rows().into_iter().map(|r| r.dot(&r).sqrt()).collect();
        let value = lambda * norms.iter().map(|n| (n - 1.0).powi(2)).sum::<f64>() / batch;

        if let Some(grads) = grads {
            // adjoint of the input gradient
            let mut rho = g;
            for (mut row, &n) in rho.rows_mut().into_iter().zip(&norms) {
                let c = if n > 0.0 { lambda * 2.0 * (n - 1.0) / (batch * n) } else { 0.0 };
                row *= c;
            }
            // sweep forward through the transposed network
            grads.input.linear.weight += &rho.t().dot(&tape.input);
            let mut rho = rho.dot(&self.input.linear.weight) * cache.input.gate();
            for (((b, c), gb), (alpha_a, alpha_b)) in self.blocks.iter().zip(&cache.blocks).zip(grads.blocks.iter_mut()).zip(&tape.blocks) {
                gb.a.linear.weight += &rho.t().dot(alpha_a);
                let mid = rho.dot(&b.a.linear.weight) * c.a.gate();
                gb.b.linear.weight += &mid.t().dot(alpha_b);
                let branch = mid.dot(&b.b.linear.weight) * c.b.gate();
                rho = rho + branch;
            }
            let mut col = grads.out.weight.column_mut(0);
            col += &rho.sum_axis(Axis(0));
        }
        Ok(PenaltyResult { value, grad_norms: norms })
    }
}

impl Tensors for Discriminator {
    fn tensors<'a>(&'a self, prefix: &str, out: &mut Vec<TensorRef<'a>>) {
        let p = |s: &str| if prefix.is_empty() { s.to_string() } else { format!("{prefix}.{s}") };
        Tensors::tensors(&self.input, &p("input"), out);
        for (i, b) in self.blocks.iter().enumerate() {
            b.tensors(&p(&format!("block.{i}")), out);
        }
        Tensors::tensors(&self.out, &p("out"), out);
    }

    fn tensors_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<TensorMut<'a>>) {
        let p = |s: &str| if prefix.is_empty() { s.to_string() } else { format!("{prefix}.{s}") };
        Tensors::tensors_mut(&mut self.input, &p("input"), out);
        for (i, b) in self.blocks.iter_mut().enumerate() {
            b.tensors_mut(&p(&format!("block.{i}")), out);
        }
        Tensors::tensors_mut(&mut self.out, &p("out"), out);
    }
}

/// Deterministic initialisation of both networks from one seed.
pub fn init_params(seed: u64, cfg: &NetConfig) -> (Generator, Discriminator) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = Generator::new(cfg, &mut rng);
    let d = Discriminator::new(cfg, &mut rng);
    (g, d)
}

/// Stack flattened 2D poses into a `batch x 2N` matrix.
pub fn stack_poses(poses: &[&crate::pose::Pose2D]) -> Array2<f64> {
    let n2 = poses.first().map_or(0, |p| 2 * p.num_joints());
    let mut m = Array2::zeros((poses.len(), n2));
    for (mut row, p) in m.rows_mut().into_iter().zip(poses) {
        for (j, q) in p.0.iter().enumerate() {
            row[2 * j] = q[0];
            row[2 * j + 1] = q[1];
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> NetConfig {
        NetConfig {
            num_joints: 5,
            width: 8,
            dropout: 0.25,
            slope: 0.01,
        }
    }

    fn input(batch: usize, n: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_simple_fn((batch, 2 * n), || rng.random_range(-0.3..0.3))
    }

    #[test]
    fn init_is_deterministic_and_seed_sensitive() {
        let cfg = small();
        assert_eq!(init_params(3, &cfg), init_params(3, &cfg));
        assert_ne!(init_params(3, &cfg).0, init_params(4, &cfg).0);
        assert_ne!(init_params(3, &cfg).1, init_params(4, &cfg).1);
        let (g, d) = init_params(3, &cfg);
        // biases start at zero apart from the camera head
        for t in g.tensor_list() {
            if t.name.ends_with("linear.bias") || t.name == "pose_out.bias" {
                assert!(t.data.iter().all(|&v| v == 0.0), "{}", t.name);
            }
        }
        assert_eq!(g.cam_out.bias.to_vec(), INITIAL_CAMERA.to_vec());
        assert!(d.out.bias.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn parameter_counts_match_closed_form() {
        for (n, w) in [(5, 8), (17, 32), (16, 64)] {
            let cfg = NetConfig { num_joints: n, width: w, ..small() };
            let (g, d) = init_params(0, &cfg);
            assert_eq!(g.param_count(), Generator::expected_param_count(n, w));
            assert_eq!(d.param_count(), Discriminator::expected_param_count(n, w));
        }
        // closed form evaluated by hand for N = 16, W = 1024
        assert_eq!(Generator::expected_param_count(16, 1024), 10_574_870);
        assert_eq!(Discriminator::expected_param_count(16, 1024), 4_233_217);
    }

    #[test]
    fn output_shapes_and_eval_determinism() {
        for n in [3, 5, 17] {
            let cfg = NetConfig { num_joints: n, ..small() };
            let (g, d) = init_params(1, &cfg);
            let x = input(4, n, 2);
            let a = g.predict(&x).unwrap();
            let b = g.predict(&x).unwrap();
            assert_eq!(a.depth.dim(), (4, n));
            assert_eq!(a.camera.dim(), (4, 6));
            assert_eq!(a.depth, b.depth);
            assert_eq!(a.camera, b.camera);
            assert_eq!(d.score(&x).unwrap(), d.score(&x).unwrap());
        }
    }

    #[test]
    fn critic_score_finite_for_large_inputs() {
        let (_, d) = init_params(5, &small());
        let x = input(3, 5, 6) * 1e3;
        assert!(d.score(&x).unwrap().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn non_finite_input_reports_layer() {
        let (g, _) = init_params(5, &small());
        let mut x = input(2, 5, 6);
        x[[0, 0]] = f64::NAN;
        let err = g.predict(&x).unwrap_err();
        assert!(err.to_string().contains("generator.input_data"));
    }

    #[test]
    fn train_mode_dropout_follows_the_rng() {
        let (g, _) = init_params(5, &small());
        let x = input(6, 5, 7);
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            g.forward(&x, Mode::Train, &mut rng).unwrap().0.depth
        };
        assert_eq!(run(1), run(1));
        assert_ne!(run(1), run(2));
    }

    fn gen_gates(c: &GeneratorCache) -> Vec<Array2<f64>> {
        c.activation_pattern()
    }

    fn dis_gates(c: &DiscriminatorCache) -> Vec<Array2<f64>> {
        c.activation_pattern()
    }

    fn rel_err(fd: &[f64], an: &[f64]) -> f64 {
        let diff: f64 = fd.iter().zip(an).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale: f64 = an.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-6);
        diff / scale
    }

    const STEP: f64 = 1e-3;

    /// Weighted sum of generator outputs; the weights make every output
    /// contribute.
    fn gen_objective(g: &Generator, x: &Array2<f64>, mode: Mode, seed: u64) -> (f64, Vec<Array2<f64>>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (out, cache) = g.forward(x, mode, &mut rng).unwrap();
        let wd = Array2::from_shape_fn(out.depth.dim(), |(i, j)| ((i * 3 + j) as f64 * 0.61).sin());
        let wc = Array2::from_shape_fn(out.camera.dim(), |(i, j)| ((i * 5 + j) as f64 * 0.43).cos());
        ((&out.depth * &wd).sum() + (&out.camera * &wc).sum(), gen_gates(&cache))
    }

    #[test]
    fn generator_input_gradient_matches_finite_differences() {
        let mut checked = 0;
        let mut seed = 0;
        while checked < 20 {
            seed += 1;
            let n = 3 + (seed as usize % 4);
            let cfg = NetConfig { num_joints: n, width: 6, ..small() };
            let (g, _) = init_params(seed, &cfg);
            let mode = if seed % 2 == 0 { Mode::Train } else { Mode::Eval };
            let x = input(4, n, seed + 100);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (out, cache) = g.forward(&x, mode, &mut rng).unwrap();
            let wd = Array2::from_shape_fn(out.depth.dim(), |(i, j)| ((i * 3 + j) as f64 * 0.61).sin());
            let wc = Array2::from_shape_fn(out.camera.dim(), |(i, j)| ((i * 5 + j) as f64 * 0.43).cos());
            let mut grads = g.zeros_like();
            let dx = g.backward(&cache, &wd, &wc, &mut grads);
            let base = gen_gates(&cache);
            let mut fd = Vec::new();
            let mut stable = true;
            for idx in 0..x.len() {
                let (i, j) = (idx / x.ncols(), idx % x.ncols());
                let mut xp = x.clone();
                xp[[i, j]] += STEP;
                let mut xm = x.clone();
                xm[[i, j]] -= STEP;
                let (fp, gp) = gen_objective(&g, &xp, mode, seed);
                let (fm, gm) = gen_objective(&g, &xm, mode, seed);
                stable &= gp == base && gm == base;
                fd.push((fp - fm) / (2.0 * STEP));
            }
            if !stable {
                continue;
            }
            let e = rel_err(&fd, dx.as_slice().unwrap());
            assert!(e < 1e-4, "seed {seed} {mode:?}: relative error {e}");
            checked += 1;
        }
    }

    #[test]
    fn generator_parameter_gradient_matches_finite_differences() {
        let cfg = NetConfig { num_joints: 4, width: 6, ..small() };
        let (g, _) = init_params(21, &cfg);
        let x = input(5, 4, 22);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (out, cache) = g.forward(&x, Mode::Train, &mut rng).unwrap();
        let wd = Array2::from_shape_fn(out.depth.dim(), |(i, j)| ((i * 3 + j) as f64 * 0.61).sin());
        let wc = Array2::from_shape_fn(out.camera.dim(), |(i, j)| ((i * 5 + j) as f64 * 0.43).cos());
        let mut grads = g.zeros_like();
        g.backward(&cache, &wd, &wc, &mut grads);
        let base = gen_gates(&cache);
        let analytic: Vec<(String, Vec<f64>)> = grads
            .tensor_list()
            .into_iter()
            .filter(|t| t.trainable)
            .map(|t| (t.name, t.data.to_vec()))
            .collect();
        let (mut total, mut skipped) = (0, 0);
        for (ti, (name, an_full)) in analytic.iter().enumerate() {
            let mut fd = Vec::new();
            let mut an = Vec::new();
            for k in 0..an_full.len() {
                let bump = |delta: f64| {
                    let mut gg = g.clone();
                    let mut ts = gg.tensor_list_mut();
                    let trainable: Vec<_> = ts.iter_mut().filter(|t| t.trainable).collect();
                    trainable.into_iter().nth(ti).unwrap().data[k] += delta;
                    drop(ts);
                    gen_objective(&gg, &x, Mode::Train, 3)
                };
                let (fp, gp) = bump(STEP);
                let (fm, gm) = bump(-STEP);
                total += 1;
                // a kink inside the stencil makes the difference meaningless
                if gp != base || gm != base {
                    skipped += 1;
                    continue;
                }
                fd.push((fp - fm) / (2.0 * STEP));
                an.push(an_full[k]);
            }
            let e = rel_err(&fd, &an);
            assert!(e < 1e-4, "{name}: relative error {e}");
        }
        assert!(skipped * 10 < total, "{skipped} of {total} coordinates crossed a kink");
    }

    #[test]
    fn critic_input_gradient_matches_finite_differences() {
        let mut checked = 0;
        let mut seed = 0;
        while checked < 20 {
            seed += 1;
            let n = 2 + (seed as usize % 5);
            let cfg = NetConfig { num_joints: n, width: 7, ..small() };
            let (_, d) = init_params(seed, &cfg);
            let x = input(3, n, seed + 50);
            let (_, cache) = d.forward(&x).unwrap();
            let g = d.input_gradient(&cache);
            let mut grads = d.zeros_like();
            let g2 = d.backward(&cache, &Array1::ones(3), &mut grads);
            assert_eq!(g, g2);
            let base = dis_gates(&cache);
            let mut fd = Vec::new();
            let mut stable = true;
            for idx in 0..x.len() {
                let (i, j) = (idx / x.ncols(), idx % x.ncols());
                let mut xp = x.clone();
                xp[[i, j]] += STEP;
                let mut xm = x.clone();
                xm[[i, j]] -= STEP;
                let (sp, cp) = d.forward(&xp).unwrap();
                let (sm, cm) = d.forward(&xm).unwrap();
                stable &= dis_gates(&cp) == base && dis_gates(&cm) == base;
                fd.push((sp[i] - sm[i]) / (2.0 * STEP));
            }
            if !stable {
                continue;
            }
            let e = rel_err(&fd, g.as_slice().unwrap());
            assert!(e < 1e-4, "seed {seed}: relative error {e}");
            checked += 1;
        }
    }

    #[test]
    fn penalty_weight_gradient_matches_finite_differences() {
        let mut checked = 0;
        let mut seed = 100;
        while checked < 20 {
            seed += 1;
            let cfg = NetConfig { num_joints: 3, width: 5, ..small() };
            let (_, d) = init_params(seed, &cfg);
            let x = input(4, 3, seed);
            let mut grads = d.zeros_like();
            d.gradient_penalty(&x, 10.0, Some(&mut grads)).unwrap();
            let base = dis_gates(&d.forward(&x).unwrap().1);
            let mut fd = Vec::new();
            let mut an = Vec::new();
            let mut stable = true;
            let names: Vec<String> = d.tensor_list().into_iter().map(|t| t.name).collect();
            for (ti, name) in names.iter().enumerate() {
                let len = d.tensor_list()[ti].data.len();
                let analytic = grads.tensor_list()[ti].data.to_vec();
                for k in 0..len {
                    let eval = |delta: f64| {
                        let mut dd = d.clone();
                        dd.tensor_list_mut()[ti].data[k] += delta;
                        let v = dd.gradient_penalty(&x, 10.0, None).unwrap().value;
                        (v, dis_gates(&dd.forward(&x).unwrap().1))
                    };
                    let (vp, gp) = eval(STEP);
                    let (vm, gm) = eval(-STEP);
                    stable &= gp == base && gm == base;
                    fd.push((vp - vm) / (2.0 * STEP));
                    an.push(analytic[k]);
                    if name.ends_with("bias") {
                        assert_eq!(analytic[k], 0.0);
                    }
                }
            }
            if !stable {
                continue;
            }
            let e = rel_err(&fd, &an);
            assert!(e < 1e-4, "seed {seed}: relative error {e}");
            checked += 1;
        }
    }

    #[test]
    fn linear_critic_penalty() {
        // Collapse the critic to D(x) = 2 * x_0 by zeroing everything but a
        // linear path through positive activations.
        let cfg = NetConfig { num_joints: 2, width: 4, ..small() };
        let (_, mut d) = init_params(0, &cfg);
        d.input.linear.weight.fill(0.0);
        d.input.linear.weight[[0, 0]] = 2.0;
        d.input.linear.bias.fill(0.0);
        d.input.linear.bias[0] = 10.0;
        for b in &mut d.blocks {
            b.a.linear.weight.fill(0.0);
            b.b.linear.weight.fill(0.0);
        }
        d.out.weight.fill(0.0);
        d.out.weight[[0, 0]] = 1.0;
        let x = input(5, 2, 1);
        let p = d.gradient_penalty(&x, 10.0, None).unwrap();
        assert!((p.value - 10.0).abs() < 1e-12);
        d.input.linear.weight[[0, 0]] = 1.0;
        let p = d.gradient_penalty(&x, 10.0, None).unwrap();
        assert_eq!(p.value, 0.0);
    }
}
