//! Pose accuracy metrics: Procrustes-aligned and plain per-joint errors,
//! PCK and its area under the curve.
//!
//! Errors are computed on normalised poses and converted to millimetres
//! with each frame's ground-truth scale.

use std::collections::BTreeMap;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::data::{pose_scale_3d, preprocess_3d, PoseDataset};
use crate::error::{Error, Result};
use crate::networks::{stack_poses, Generator};
use crate::pose::{Pose2D, Pose3D};
use crate::training::lift_batch;

/// PCK threshold in millimetres.
pub const PCK_THRESHOLD_MM: f64 = 150.0;
/// AUC threshold grid: 0 to 150 mm in 5 mm steps.
pub const AUC_STEP_MM: f64 = 5.0;
pub const AUC_POINTS: usize = 31;

pub fn auc_grid() -> Vec<f64> {
    (0..AUC_POINTS).map(|i| i as f64 * AUC_STEP_MM).collect()
}

/// Similarity transform taking a prediction onto the ground truth:
/// `aligned_j = scale * rotation * pred_j + translation`.
#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    pub rotation: [[f64; 3]; 3],
    pub scale: f64,
    pub translation: [f64; 3],
    pub aligned: Pose3D,
    /// The prediction was rank deficient; the rotation is one of several
    /// optimal choices, or undefined when the prediction is a single point.
    pub degenerate: bool,
}

fn centred(p: &Pose3D) -> (Vector3<f64>, Vec<Vector3<f64>>) {
    let n = p.num_joints() as f64;
    let mean = p.0.iter().fold(Vector3::zeros(), |acc, q| acc + Vector3::from(*q)) / n;
    (mean, p.0.iter().map(|q| Vector3::from(*q) - mean).collect())
}

/// Optimal similarity alignment (least squares over rotation, positive
/// scale and translation) of `pred` onto `gt`.
pub fn procrustes_align(pred: &Pose3D, gt: &Pose3D) -> Result<Alignment> {
    let n = gt.num_joints();
    if pred.num_joints() != n {
        return Err(Error::Shape(format!("prediction has {} joints, ground truth {n}", pred.num_joints())));
    }
    if n < 3 {
        return Err(Error::Shape("alignment needs at least 3 joints".into()));
    }
    let (mu_p, p) = centred(pred);
    let (mu_g, g) = centred(gt);
    let gt_var: f64 = g.iter().map(|v| v.norm_squared()).sum();
    if !(gt_var > 0.0) {
        return Err(Error::DegeneratePose);
    }
    let pred_var: f64 = p.iter().map(|v| v.norm_squared()).sum();
    if !pred_var.is_finite() {
        return Err(Error::numeric("procrustes input"));
    }
    if pred_var == 0.0 {
        let t = mu_g - mu_p;
        return Ok(Alignment {
            rotation: identity(),
            scale: 0.0,
            translation: t.into(),
            aligned: Pose3D(vec![mu_g.into(); n]),
            degenerate: true,
        });
    }
    // the optimum is exactly the identity; skip the round-off of the SVD route
    if pred == gt {
        return Ok(Alignment {
            rotation: identity(),
            scale: 1.0,
            translation: [0.0; 3],
            aligned: gt.clone(),
            degenerate: false,
        });
    }
    // cross covariance; rotation maps pred directions onto gt directions
    let h: Matrix3<f64> = p.iter().zip(&g).fold(Matrix3::zeros(), |acc, (a, b)| acc + b * a.transpose());
    let svd = h.svd(true, true);
    let u = svd.u.expect("requested");
    let v_t = svd.v_t.expect("requested");
    let mut d = Matrix3::identity();
    if (u * v_t).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    let r = u * d * v_t;
    let sv = svd.singular_values;
    let trace = sv[0] * d[(0, 0)] + sv[1] * d[(1, 1)] + sv[2] * d[(2, 2)];
    let scale = trace / pred_var;
    let t = mu_g - scale * r * mu_p;

    let pred_sv = {
        let cov: Matrix3<f64> = p.iter().fold(Matrix3::zeros(), |acc, a| acc + a * a.transpose());
        let mut e: Vec<f64> = cov.symmetric_eigenvalues().iter().copied().collect();
        e.sort_by(|a, b| b.total_cmp(a));
        e
    };
    let degenerate = pred_sv[1] <= 1e-12 * pred_sv[0];

    let aligned = Pose3D(pred.0.iter().map(|q| (scale * r * Vector3::from(*q) + t).into()).collect());
    let mut rotation = [[0.0; 3]; 3];
    for (i, row) in rotation.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = r[(i, j)];
        }
    }
    Ok(Alignment {
        rotation,
        scale,
        translation: t.into(),
        aligned,
        degenerate,
    })
}

fn identity() -> [[f64; 3]; 3] {
    [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
}

/// Sum of squared joint distances.
pub fn residual(a: &Pose3D, b: &Pose3D) -> f64 {
    a.0.iter()
        .zip(&b.0)
        .map(|(p, q)| (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2))
        .sum()
}

/// Whether errors are measured before or after similarity alignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    /// Both poses centred on the root joint, nothing else.
    RootRelative { root: usize },
    Procrustes,
}

/// Per-joint Euclidean errors of one frame, in the poses' units.
pub fn joint_errors(pred: &Pose3D, gt: &Pose3D, protocol: Protocol) -> Result<Vec<f64>> {
    if pred.num_joints() != gt.num_joints() {
        return Err(Error::Shape(format!(
            "prediction has {} joints, ground truth {}",
            pred.num_joints(),
            gt.num_joints()
        )));
    }
    let dist = |a: [f64; 3], b: [f64; 3]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt();
    Ok(match protocol {
        Protocol::Procrustes => {
            let al = procrustes_align(pred, gt)?;
            al.aligned.0.iter().zip(&gt.0).map(|(a, b)| dist(*a, *b)).collect()
        }
        Protocol::RootRelative { root } => {
            let (rp, rg) = (pred.0[root], gt.0[root]);
            pred.0
                .iter()
                .zip(&gt.0)
                .map(|(a, b)| dist([a[0] - rp[0], a[1] - rp[1], a[2] - rp[2]], [b[0] - rg[0], b[1] - rg[1], b[2] - rg[2]]))
                .collect()
        }
    })
}

/// Per-frame, per-joint errors in millimetres.
fn errors_mm(preds: &[Pose3D], gts: &[Pose3D], scales_mm: &[f64], protocol: Protocol) -> Result<Vec<Vec<f64>>> {
    if preds.len() != gts.len() || gts.len() != scales_mm.len() {
        return Err(Error::Shape(format!(
            "{} predictions, {} ground-truth frames, {} scales",
            preds.len(),
            gts.len(),
            scales_mm.len()
        )));
    }
    if preds.is_empty() {
        return Err(Error::Shape("no frames to evaluate".into()));
    }
    preds
        .iter()
        .zip(gts)
        .zip(scales_mm)
        .map(|((p, g), s)| Ok(joint_errors(p, g, protocol)?.into_iter().map(|e| e * s).collect()))
        .collect()
}

fn mean_error(errors: &[Vec<f64>]) -> f64 {
    errors.iter().map(|f| f.iter().sum::<f64>() / f.len() as f64).sum::<f64>() / errors.len() as f64
}

/// Mean aligned per-joint error in millimetres, for ground truth in
/// normalised units with one millimetre scale.
pub fn p_mpjpe(preds: &[Pose3D], gts: &[Pose3D], gt_scale_mm: f64) -> Result<f64> {
    let scales = vec![gt_scale_mm; gts.len()];
    Ok(mean_error(&errors_mm(preds, gts, &scales, Protocol::Procrustes)?))
}

/// Mean root-relative per-joint error in millimetres.
pub fn mpjpe(preds: &[Pose3D], gts: &[Pose3D], gt_scale_mm: f64, root: usize) -> Result<f64> {
    let scales = vec![gt_scale_mm; gts.len()];
    Ok(mean_error(&errors_mm(preds, gts, &scales, Protocol::RootRelative { root })?))
}

/// A joint is correct below the threshold; an exact hit counts at every
/// threshold, including zero.
fn is_correct(error: f64, threshold: f64) -> bool {
    error < threshold || error == 0.0
}

/// PCK in percent at `threshold_mm` and AUC over `grid` as a fraction.
pub fn pck_auc_from_errors(errors: &[Vec<f64>], threshold_mm: f64, grid: &[f64]) -> Result<(f64, f64)> {
    let all: Vec<f64> = errors.iter().flatten().copied().collect();
    if all.is_empty() || grid.is_empty() {
        return Err(Error::Shape("no joints to score".into()));
    }
    let pck = |t: f64| all.iter().filter(|&&e| is_correct(e, t)).count() as f64 / all.len() as f64;
    let auc = grid.iter().map(|&t| pck(t)).sum::<f64>() / grid.len() as f64;
    Ok((100.0 * pck(threshold_mm), auc))
}

pub fn pck_auc(
    preds: &[Pose3D],
    gts: &[Pose3D],
    gt_scale_mm: f64,
    protocol: Protocol,
    threshold_mm: f64,
    grid: &[f64],
) -> Result<(f64, f64)> {
    let scales = vec![gt_scale_mm; gts.len()];
    pck_auc_from_errors(&errors_mm(preds, gts, &scales, protocol)?, threshold_mm, grid)
}

/// PCK value in percent at every threshold of `grid`.
pub fn pck_curve(errors: &[Vec<f64>], grid: &[f64]) -> Vec<f64> {
    let all: Vec<f64> = errors.iter().flatten().copied().collect();
    grid.iter()
        .map(|&t| 100.0 * all.iter().filter(|&&e| is_correct(e, t)).count() as f64 / all.len() as f64)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub frames: usize,
    pub p_mpjpe_mm: f64,
    pub mpjpe_mm: f64,
    /// Percent of aligned joints within the PCK threshold.
    pub pck150: f64,
    pub auc: f64,
    /// Same two scores without alignment.
    pub pck150_abs: f64,
    pub auc_abs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    #[serde(flatten)]
    pub overall: Metrics,
    pub auc_grid_mm: Vec<f64>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty", default)]
    pub per_action: BTreeMap<String, Metrics>,
}

fn metrics(aligned: &[Vec<f64>], plain: &[Vec<f64>], grid: &[f64]) -> Result<Metrics> {
    let (pck150, auc) = pck_auc_from_errors(aligned, PCK_THRESHOLD_MM, grid)?;
    let (pck150_abs, auc_abs) = pck_auc_from_errors(plain, PCK_THRESHOLD_MM, grid)?;
    Ok(Metrics {
        frames: aligned.len(),
        p_mpjpe_mm: mean_error(aligned),
        mpjpe_mm: mean_error(plain),
        pck150,
        auc,
        pck150_abs,
        auc_abs,
    })
}

/// Full report for normalised predictions against normalised ground truth,
/// each frame with its own millimetre scale.
pub fn evaluate(
    preds: &[Pose3D],
    gts: &[Pose3D],
    scales_mm: &[f64],
    root: usize,
    actions: Option<&[String]>,
) -> Result<MetricReport> {
    let grid = auc_grid();
    let aligned = errors_mm(preds, gts, scales_mm, Protocol::Procrustes)?;
    let plain = errors_mm(preds, gts, scales_mm, Protocol::RootRelative { root })?;
    let overall = metrics(&aligned, &plain, &grid)?;
    let mut per_action = BTreeMap::new();
    if let Some(actions) = actions {
        if actions.len() != preds.len() {
            return Err(Error::Shape("one action label per frame required".into()));
        }
        let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, a) in actions.iter().enumerate() {
            groups.entry(a.as_str()).or_default().push(i);
        }
        for (a, idx) in groups {
            let pick = |e: &[Vec<f64>]| idx.iter().map(|&i| e[i].clone()).collect::<Vec<_>>();
            per_action.insert(a.to_string(), metrics(&pick(&aligned), &pick(&plain), &grid)?);
        }
    }
    Ok(MetricReport {
        overall,
        auc_grid_mm: grid,
        per_action,
    })
}

/// Lift every usable frame of a dataset in eval mode and score it against
/// the dataset's 3D ground truth.
pub fn evaluate_model(g: &Generator, dataset: &PoseDataset, d: f64, min_depth: f64) -> Result<MetricReport> {
    let frames3d = dataset
        .frames3d
        .as_ref()
        .ok_or_else(|| Error::Schema("dataset has no 3D ground truth".into()))?;
    let skel = &dataset.skeleton;
    let prepared = dataset.prepare_inputs(d);
    let mut keep = Vec::with_capacity(prepared.indices.len());
    let mut gts = Vec::with_capacity(prepared.indices.len());
    let mut scales = Vec::with_capacity(prepared.indices.len());
    for (k, &i) in prepared.indices.iter().enumerate() {
        if let Ok(gt) = preprocess_3d(&frames3d[i], skel) {
            keep.push(k);
            gts.push(gt);
            scales.push(pose_scale_3d(&frames3d[i], skel));
        }
    }
    if keep.is_empty() {
        return Err(Error::Schema("no frame has usable 2D and 3D data".into()));
    }
    let refs: Vec<&Pose2D> = keep.iter().map(|&k| &prepared.poses[k]).collect();
    let preds: Vec<Pose3D> = lift_batch(g, &stack_poses(&refs), d, min_depth)?.into_iter().map(|(p, _)| p).collect();
    let actions: Option<Vec<String>> = dataset
        .actions
        .as_ref()
        .map(|a| keep.iter().map(|&k| a[prepared.indices[k]].clone()).collect());
    evaluate(&preds, &gts, &scales, skel.root_index(), actions.as_deref())
}

impl MetricReport {
    pub fn summary_line(&self) -> String {
        let m = &self.overall;
        format!(
            "frames={} p_mpjpe_mm={:.3} mpjpe_mm={:.3} pck150={:.2} auc={:.4}",
            m.frames, m.p_mpjpe_mm, m.mpjpe_mm, m.pck150, m.auc
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{rotate_about_pivot, RotationY};
    use nalgebra::{Rotation3, UnitQuaternion};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_pose(rng: &mut ChaCha8Rng, n: usize) -> Pose3D {
        Pose3D((0..n).map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect())
    }

    fn transform(p: &Pose3D, r: &Rotation3<f64>, s: f64, t: [f64; 3]) -> Pose3D {
        p.map(|q| {
            let v = r * Vector3::from(q) * s;
            [v[0] + t[0], v[1] + t[1], v[2] + t[2]]
        })
    }

    #[test]
    fn identity_alignment() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = random_pose(&mut rng, 16);
        let a = procrustes_align(&p, &p).unwrap();
        assert!((a.scale - 1.0).abs() < 1e-12);
        for i in 0..3 {
            assert!(a.translation[i].abs() < 1e-12);
            for j in 0..3 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((a.rotation[i][j] - e).abs() < 1e-12);
            }
        }
        assert!(!a.degenerate);
    }

    #[test]
    fn known_transform_is_inverted() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let gt = random_pose(&mut rng, 16);
            let r = Rotation3::from_euler_angles(rng.random_range(-3.0..3.0), rng.random_range(-1.5..1.5), rng.random_range(-3.0..3.0));
            let s = rng.random_range(0.2..5.0);
            let pred = transform(&gt, &r, s, [0.3, -2.0, 7.0]);
            let a = procrustes_align(&pred, &gt).unwrap();
            assert!(residual(&a.aligned, &gt) < 1e-9);
            assert!((a.scale - 1.0 / s).abs() < 1e-9);
        }
    }

    fn random_rotation(rng: &mut ChaCha8Rng) -> Rotation3<f64> {
        // uniform on SO(3) from a normalised Gaussian quaternion
        let mut q = [0.0f64; 4];
        loop {
            for v in &mut q {
                *v = rng.random_range(-1.0..1.0);
            }
            let n = q.iter().map(|v| v * v).sum::<f64>();
            if n > 1e-6 && n <= 1.0 {
                break;
            }
        }
        UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(q[0], q[1], q[2], q[3])).to_rotation_matrix()
    }

    /// Best residual over sampled rotations, with the optimal scale and
    /// translation for each rotation in closed form.
    fn brute_force_residual(pred: &Pose3D, gt: &Pose3D, samples: usize, rng: &mut ChaCha8Rng) -> f64 {
        let (_, p) = centred(pred);
        let (_, g) = centred(gt);
        let pp: f64 = p.iter().map(|v| v.norm_squared()).sum();
        let gg: f64 = g.iter().map(|v| v.norm_squared()).sum();
        let mut best = gg; // scale zero
        for _ in 0..samples {
            let r = random_rotation(rng);
            let cross: f64 = p.iter().zip(&g).map(|(a, b)| (r * a).dot(b)).sum();
            let s = (cross / pp).max(0.0);
            let res = gg - 2.0 * s * cross + s * s * pp;
            best = best.min(res);
        }
        best
    }

    #[test]
    fn procrustes_beats_brute_force_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let pred = random_pose(&mut rng, 5);
            let gt = random_pose(&mut rng, 5);
            let a = procrustes_align(&pred, &gt).unwrap();
            let ours = residual(&a.aligned, &gt);
            let oracle = brute_force_residual(&pred, &gt, 10_000, &mut rng);
            assert!(ours <= oracle + 1e-12, "{ours} > {oracle}");
        }
    }

    #[test]
    fn degenerate_inputs() {
        let gt = Pose3D(vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]);
        let point = Pose3D(vec![[1.0, 1.0, 1.0]; 3]);
        let a = procrustes_align(&point, &gt).unwrap();
        assert!(a.degenerate);
        let line = Pose3D(vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]]);
        let a = procrustes_align(&line, &gt).unwrap();
        assert!(a.degenerate);
        assert!(residual(&a.aligned, &gt) <= residual(&line, &gt));
        assert!(matches!(procrustes_align(&gt, &point), Err(Error::DegeneratePose)));
    }

    #[test]
    fn p_mpjpe_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let gts: Vec<Pose3D> = (0..5).map(|_| random_pose(&mut rng, 16)).collect();
        assert_eq!(p_mpjpe(&gts, &gts, 1000.0).unwrap(), 0.0);
        let moved: Vec<Pose3D> = gts
            .iter()
            .map(|g| rotate_about_pivot(g, RotationY::new(1.1), 0.0).map(|q| [3.0 * q[0], 3.0 * q[1], 3.0 * q[2]]))
            .collect();
        assert!(p_mpjpe(&moved, &gts, 1000.0).unwrap() < 1e-9);
        assert!(p_mpjpe(&gts[..2], &gts, 1.0).is_err());
    }

    #[test]
    fn single_joint_displacement() {
        // 10 mm displacement of one joint: the unaligned error is exactly
        // 10/16; alignment minimises squared error, so the aligned mean is
        // only bounded by the root mean square 10/4
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let gt = random_pose(&mut rng, 16).map(|q| [q[0] * 500.0, q[1] * 500.0, q[2] * 500.0]);
        let mut pred = gt.clone();
        pred.0[7][1] += 10.0;
        let raw = mpjpe(std::slice::from_ref(&pred), std::slice::from_ref(&gt), 1.0, 0).unwrap();
        assert!((raw - 10.0 / 16.0).abs() < 1e-12);
        let aligned = p_mpjpe(std::slice::from_ref(&pred), std::slice::from_ref(&gt), 1.0).unwrap();
        assert!(aligned > 0.0 && aligned <= 2.5);
        // the same averaging applied to a post-alignment error vector
        let mut post = vec![0.0; 16];
        post[7] = 10.0;
        assert_eq!(mean_error(&[post]), 10.0 / 16.0);
    }

    #[test]
    fn pck_auc_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let gts: Vec<Pose3D> = (0..3).map(|_| random_pose(&mut rng, 16)).collect();
        let grid = auc_grid();
        let root = Protocol::RootRelative { root: 0 };
        assert_eq!(pck_auc(&gts, &gts, 1000.0, root, 150.0, &grid).unwrap(), (100.0, 1.0));

        let errors = vec![vec![151.0; 16]; 2];
        assert_eq!(pck_auc_from_errors(&errors, 150.0, &grid).unwrap().0, 0.0);

        let errors = vec![vec![75.0; 16]; 2];
        let (pck, auc) = pck_auc_from_errors(&errors, 150.0, &grid).unwrap();
        assert_eq!(pck, 100.0);
        assert_eq!(auc, 15.0 / 31.0);
        assert!(pck_auc_from_errors(&[], 150.0, &grid).is_err());
    }

    #[test]
    fn evaluate_reports_actions() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let gts: Vec<Pose3D> = (0..4).map(|_| random_pose(&mut rng, 16)).collect();
        let preds: Vec<Pose3D> = (0..4).map(|_| random_pose(&mut rng, 16)).collect();
        let actions: Vec<String> = ["walk", "sit", "walk", "walk"].iter().map(|s| s.to_string()).collect();
        let r = evaluate(&preds, &gts, &[100.0; 4], 0, Some(&actions)).unwrap();
        assert_eq!(r.overall.frames, 4);
        assert_eq!(r.per_action["walk"].frames, 3);
        assert_eq!(r.per_action["sit"].frames, 1);
        assert_eq!(r.auc_grid_mm.len(), AUC_POINTS);
        assert!(r.summary_line().starts_with("frames=4 "));
        let json = serde_json::to_string(&r).unwrap();
        let back: MetricReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
    }

    proptest! {
        #[test]
        fn alignment_never_worse_than_identity(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pred = random_pose(&mut rng, 8);
            let gt = random_pose(&mut rng, 8);
            let a = procrustes_align(&pred, &gt).unwrap();
            prop_assert!(residual(&a.aligned, &gt) <= residual(&pred, &gt) + 1e-12);
            let r = Matrix3::from_fn(|i, j| a.rotation[i][j]);
            prop_assert!((r * r.transpose() - Matrix3::identity()).abs().max() < 1e-9);
            prop_assert!((r.determinant() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn p_mpjpe_similarity_invariant(seed in 0u64..1000, s in 0.1f64..10.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pred = random_pose(&mut rng, 16);
            let gt = random_pose(&mut rng, 16);
            let r = random_rotation(&mut rng);
            let moved = transform(&pred, &r, s, [1.0, -4.0, 2.5]);
            let a = p_mpjpe(std::slice::from_ref(&pred), std::slice::from_ref(&gt), 1000.0).unwrap();
            let b = p_mpjpe(std::slice::from_ref(&moved), std::slice::from_ref(&gt), 1000.0).unwrap();
            prop_assert!((a - b).abs() < 1e-9);
        }

        #[test]
        fn pck_is_monotone(errs in prop::collection::vec(0.0f64..300.0, 1..60)) {
            let curve = pck_curve(&[errs], &auc_grid());
            prop_assert!(curve.windows(2).all(|w| w[0] <= w[1]));
        }
    }
}
