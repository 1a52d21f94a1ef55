//! Training objectives and their analytic gradients.
//!
//! Every per-sample loss comes in two flavours: a plain value function on
//! the pose types and a `*_grad` variant on joint slices that also returns
//! the gradient with respect to each input. Non-smooth points (zero
//! distances, the hinge of the orientation loss) take the zero subgradient.

use log::debug;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::CameraWP;
use crate::pose::{norm3, sub3, Pose2D, Pose3D};
use crate::skeleton::Skeleton;

/// Relative weights of the generator objective, plus the critic's
/// gradient-penalty weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda_angle: f64,
    pub lambda_cam: f64,
    pub lambda_sym: f64,
    pub lambda_3d: f64,
    pub lambda_svma: f64,
    pub lambda_gp: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda_angle: 1.0,
            lambda_cam: 1.0,
            lambda_sym: 0.01,
            lambda_3d: 0.1,
            lambda_svma: 10.0,
            lambda_gp: 10.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [
            ("lambda_angle", self.lambda_angle),
            ("lambda_cam", self.lambda_cam),
            ("lambda_sym", self.lambda_sym),
            ("lambda_3d", self.lambda_3d),
            ("lambda_svma", self.lambda_svma),
            ("lambda_gp", self.lambda_gp),
        ];
        for (name, v) in all {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be a nonnegative number, got {v}")));
            }
        }
        Ok(())
    }
}

/// Batch-averaged loss terms of one training step.
///
/// `cam` already contains `cam_eq`; `disc` and `gp` describe the last critic
/// update and do not enter `total`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub step: u64,
    pub adv: f64,
    pub angle: f64,
    pub cam: f64,
    pub cam_eq: f64,
    pub sym: f64,
    pub l3d: f64,
    pub svma: f64,
    pub disc: f64,
    pub gp: f64,
    pub total: f64,
}

/// Unweighted terms that make up the generator objective.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossTerms {
    pub adv: f64,
    pub angle: f64,
    pub cam: f64,
    pub sym: f64,
    pub l3d: f64,
    pub svma: f64,
}

/// `adv + sum of weighted terms`; the per-term values are kept in the report.
pub fn total_generator_loss(terms: &LossTerms, w: &LossWeights) -> f64 {
    terms.adv
        + w.lambda_angle * terms.angle
        + w.lambda_cam * terms.cam
        + w.lambda_sym * terms.sym
        + w.lambda_3d * terms.l3d
        + w.lambda_svma * terms.svma
}

impl LossReport {
    pub fn from_terms(step: u64, terms: &LossTerms, cam_eq: f64, w: &LossWeights) -> Self {
        LossReport {
            step,
            adv: terms.adv,
            angle: terms.angle,
            cam: terms.cam,
            cam_eq,
            sym: terms.sym,
            l3d: terms.l3d,
            svma: terms.svma,
            disc: 0.0,
            gp: 0.0,
            total: total_generator_loss(terms, w),
        }
    }

    /// Name of the first non-finite field, if any.
    pub fn non_finite_term(&self) -> Option<&'static str> {
        [
            ("adv", self.adv),
            ("angle", self.angle),
            ("cam", self.cam),
            ("cam_eq", self.cam_eq),
            ("sym", self.sym),
            ("l3d", self.l3d),
            ("svma", self.svma),
            ("disc", self.disc),
            ("gp", self.gp),
            ("total", self.total),
        ]
        .into_iter()
        .find(|(_, v)| !v.is_finite())
        .map(|(n, _)| n)
    }
}

fn check_same_len(a: usize, b: usize) {
    assert_eq!(a, b, "joint counts differ");
}

/// `(1/N) * ||a - b||_2` over the flattened coordinates.
pub fn loss_3d(a: &Pose3D, b: &Pose3D) -> f64 {
    loss_3d_grad(&a.0, &b.0).0
}

/// Value and gradient with respect to `a`; the gradient for `b` is its
/// negation.
pub fn loss_3d_grad(a: &[[f64; 3]], b: &[[f64; 3]]) -> (f64, Vec<[f64; 3]>) {
    check_same_len(a.len(), b.len());
    let n = a.len() as f64;
    let diff: Vec<[f64; 3]> = a.iter().zip(b).map(|(p, q)| sub3(*p, *q)).collect();
    let norm = diff.iter().map(|d| d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sum::<f64>().sqrt();
    let c = if norm > 0.0 { 1.0 / (n * norm) } else { 0.0 };
    let grad = diff.iter().map(|d| [d[0] * c, d[1] * c, d[2] * c]).collect();
    (norm / n, grad)
}

/// Mean absolute difference over the six camera entries.
pub fn loss_cam_eq(k1: &CameraWP, k2: &CameraWP) -> f64 {
    loss_cam_eq_grad(k1, k2).0
}

/// Value and gradient with respect to `k1` (row-major); `k2` gets the
/// negation.
pub fn loss_cam_eq_grad(k1: &CameraWP, k2: &CameraWP) -> (f64, [f64; 6]) {
    let a = k1.to_array();
    let b = k2.to_array();
    let mut grad = [0.0; 6];
    let mut sum = 0.0;
    for i in 0..6 {
        let d = a[i] - b[i];
        sum += d.abs();
        grad[i] = if d > 0.0 {
            1.0 / 6.0
        } else if d < 0.0 {
            -1.0 / 6.0
        } else {
            0.0
        };
    }
    (sum / 6.0, grad)
}

/// Pairwise spread of one set of 2D poses:
/// `sum over unordered pairs of ||P_i - P_j||_2 / (m N)`.
fn set_spread(set: &[&[[f64; 2]]]) -> (f64, Vec<Vec<[f64; 2]>>) {
    let m = set.len();
    let n = set[0].len();
    let c = 1.0 / (m * n) as f64;
    let mut grads = vec![vec![[0.0; 2]; n]; m];
    let mut total = 0.0;
    for i in 0..m {
        for j in i + 1..m {
            let diff: Vec<[f64; 2]> = set[i].iter().zip(set[j]).map(|(p, q)| [p[0] - q[0], p[1] - q[1]]).collect();
            let norm = diff.iter().map(|d| d[0] * d[0] + d[1] * d[1]).sum::<f64>().sqrt();
            total += c * norm;
            if norm > 0.0 {
                let s = c / norm;
                for (k, d) in diff.iter().enumerate() {
                    grads[i][k][0] += s * d[0];
                    grads[i][k][1] += s * d[1];
                    grads[j][k][0] -= s * d[0];
                    grads[j][k][1] -= s * d[1];
                }
            }
        }
    }
    (total, grads)
}

fn check_sets(sets: [&[&[[f64; 2]]]; 2]) -> Result<()> {
    for set in sets {
        if set.len() < 2 {
            return Err(Error::Config(format!("consistency sets need at least 2 poses, got {}", set.len())));
        }
        let n = set[0].len();
        if set.iter().any(|p| p.len() != n) {
            return Err(Error::Shape("consistency set members differ in joint count".into()));
        }
    }
    if sets[0][0].len() != sets[1][0].len() {
        return Err(Error::Shape("consistency sets differ in joint count".into()));
    }
    Ok(())
}

/// Multi-angle consistency: the spread of the first-angle set plus the
/// spread of the second-angle set.
pub fn loss_svma(angle1: &[Pose2D], angle2: &[Pose2D]) -> Result<f64> {
    let a: Vec<&[[f64; 2]]> = angle1.iter().map(|p| p.0.as_slice()).collect();
    let b: Vec<&[[f64; 2]]> = angle2.iter().map(|p| p.0.as_slice()).collect();
    Ok(loss_svma_grad(&a, &b)?.0)
}

/// Value and gradients with respect to every member of both sets.
#[allow(clippy::type_complexity)]
pub fn loss_svma_grad(angle1: &[&[[f64; 2]]], angle2: &[&[[f64; 2]]]) -> Result<(f64, [Vec<Vec<[f64; 2]>>; 2])> {
    check_sets([angle1, angle2])?;
    let (v1, g1) = set_spread(angle1);
    let (v2, g2) = set_spread(angle2);
    Ok((v1 + v2, [g1, g2]))
}

/// Critic and generator objectives of the Wasserstein game with gradient
/// penalty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdversarialLosses {
    pub gen: f64,
    pub disc: f64,
}

/// `gen = -mean(d_fake)`, `disc = mean(d_fake) - mean(d_real) + penalty`,
/// where `penalty` is the already weighted gradient penalty.
pub fn loss_adversarial(d_fake: &[f64], d_real: &[f64], penalty: f64) -> Result<AdversarialLosses> {
    if d_fake.len() != d_real.len() || d_fake.is_empty() {
        return Err(Error::Shape(format!(
            "critic batches must be nonempty and equal, got {} fake and {} real",
            d_fake.len(),
            d_real.len()
        )));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let f = mean(d_fake);
    Ok(AdversarialLosses {
        gen: -f,
        disc: f - mean(d_real) + penalty,
    })
}

/// `||(2 / tr G) G - I||_F` with `G = K K^T`.
pub fn loss_camera_gram(cam: &CameraWP) -> Result<f64> {
    Ok(loss_camera_gram_grad(cam)?.0)
}

/// Value and gradient with respect to K (row-major).
pub fn loss_camera_gram_grad(cam: &CameraWP) -> Result<(f64, [f64; 6])> {
    let g = cam.gram();
    let t = g[0][0] + g[1][1];
    if !(t > 0.0) {
        return Err(Error::Domain("camera loss of a zero camera"));
    }
    let a = [[2.0 * g[0][0] / t - 1.0, 2.0 * g[0][1] / t], [2.0 * g[1][0] / t, 2.0 * g[1][1] / t - 1.0]];
    let f = (a[0][0] * a[0][0] + a[0][1] * a[0][1] + a[1][0] * a[1][0] + a[1][1] * a[1][1]).sqrt();
    let mut grad = [0.0; 6];
    if f > 0.0 {
        // dF/dG = 2/(t f) * (A - <A,G>/t I); dF/dK = 2 (dF/dG) K
        let ag = a[0][0] * g[0][0] + a[0][1] * g[0][1] + a[1][0] * g[1][0] + a[1][1] * g[1][1];
        let c = 2.0 / (t * f);
        let m = [
            [c * (a[0][0] - ag / t), c * a[0][1]],
            [c * a[1][0], c * (a[1][1] - ag / t)],
        ];
        let k = &cam.k;
        for r in 0..2 {
            for col in 0..3 {
                grad[r * 3 + col] = 2.0 * (m[r][0] * k[0][col] + m[r][1] * k[1][col]);
            }
        }
    }
    Ok((f, grad))
}

/// Gram residual of `cam` plus the equality term against `cam2`.
pub fn loss_camera(cam: &CameraWP, cam2: &CameraWP) -> Result<f64> {
    Ok(loss_camera_gram(cam)? + loss_cam_eq(cam, cam2))
}

/// Mean squared length mismatch over the skeleton's symmetric bone pairs.
pub fn loss_symmetry(p: &Pose3D, skeleton: &Skeleton) -> f64 {
    loss_symmetry_grad(&p.0, skeleton).0
}

pub fn loss_symmetry_grad(p: &[[f64; 3]], skeleton: &Skeleton) -> (f64, Vec<[f64; 3]>) {
    let pairs = skeleton.symmetric_pairs();
    let edges = skeleton.bone_edges();
    let mut grad = vec![[0.0; 3]; p.len()];
    if pairs.is_empty() {
        return (0.0, grad);
    }
    let q = pairs.len() as f64;
    let bone = |e: usize| {
        let (a, b) = edges[e];
        let v = sub3(p[b], p[a]);
        (a, b, v, norm3(v))
    };
    let mut total = 0.0;
    for &(e1, e2) in pairs {
        let (a1, b1, v1, l1) = bone(e1);
        let (a2, b2, v2, l2) = bone(e2);
        let diff = l1 - l2;
        total += diff * diff;
        let c = 2.0 * diff / q;
        for (a, b, v, l, sign) in [(a1, b1, v1, l1, 1.0), (a2, b2, v2, l2, -1.0)] {
            if l > 0.0 {
                for k in 0..3 {
                    let g = sign * c * v[k] / l;
                    grad[b][k] += g;
                    grad[a][k] -= g;
                }
            }
        }
    }
    (total / q, grad)
}

/// Signed orientation sine `(v_x w_z - v_z w_x) / (|v| |w|)` with
/// `v = nose - neck` and `w = left shoulder - right shoulder`; `None` when
/// either vector has zero length.
pub fn orientation_sine(p: &[[f64; 3]], skeleton: &Skeleton) -> Option<f64> {
    let o = skeleton.orientation();
    let v = sub3(p[o.nose], p[o.neck]);
    let w = sub3(p[o.left_shoulder], p[o.right_shoulder]);
    let (nv, nw) = (norm3(v), norm3(w));
    (nv > 0.0 && nw > 0.0).then(|| (v[0] * w[2] - v[2] * w[0]) / (nv * nw))
}

/// `max(0, orientation sine)`.
pub fn loss_angle(p: &Pose3D, skeleton: &Skeleton) -> f64 {
    loss_angle_grad(&p.0, skeleton).value
}

#[derive(Debug, Clone)]
pub struct AngleLoss {
    pub value: f64,
    pub grad: Vec<[f64; 3]>,
    /// Nose/neck or shoulder vector had zero length.
    pub degenerate: bool,
}

pub fn loss_angle_grad(p: &[[f64; 3]], skeleton: &Skeleton) -> AngleLoss {
    let o = skeleton.orientation();
    let mut grad = vec![[0.0; 3]; p.len()];
    let v = sub3(p[o.nose], p[o.neck]);
    let w = sub3(p[o.left_shoulder], p[o.right_shoulder]);
    let (nv, nw) = (norm3(v), norm3(w));
    if !(nv > 0.0 && nw > 0.0) {
        debug!("degenerate orientation vectors; angle loss set to 0");
        return AngleLoss {
            value: 0.0,
            grad,
            degenerate: true,
        };
    }
    let cross = v[0] * w[2] - v[2] * w[0];
    let n = nv * nw;
    let s = cross / n;
    if s <= 0.0 {
        return AngleLoss {
            value: 0.0,
            grad,
            degenerate: false,
        };
    }
    let dc_dv = [w[2], 0.0, -w[0]];
    let dc_dw = [-v[2], 0.0, v[0]];
    for k in 0..3 {
        let gv = dc_dv[k] / n - s * v[k] / (nv * nv);
        let gw = dc_dw[k] / n - s * w[k] / (nw * nw);
        grad[o.nose][k] += gv;
        grad[o.neck][k] -= gv;
        grad[o.left_shoulder][k] += gw;
        grad[o.right_shoulder][k] -= gw;
    }
    AngleLoss {
        value: s,
        grad,
        degenerate: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skeleton::{L_ELBOW, L_SHOULDER, L_WRIST, R_ELBOW, R_SHOULDER, R_WRIST};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const STEP: f64 = 1e-3;

    /// Central difference of `f` at `x` along every coordinate.
    fn numeric_grad(x: &[f64], f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        (0..x.len())
            .map(|i| {
                let mut p = x.to_vec();
                p[i] += STEP;
                let mut m = x.to_vec();
                m[i] -= STEP;
                (f(&p) - f(&m)) / (2.0 * STEP)
            })
            .collect()
    }

    fn rel_err(fd: &[f64], an: &[f64]) -> f64 {
        let diff = fd.iter().zip(an).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale = an.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-8);
        diff / scale
    }

    fn to3(v: &[f64]) -> Vec<[f64; 3]> {
        v.chunks(3).map(|c| [c[0], c[1], c[2]]).collect()
    }

    fn to2(v: &[f64]) -> Vec<[f64; 2]> {
        v.chunks(2).map(|c| [c[0], c[1]]).collect()
    }

    fn flat3(v: &[[f64; 3]]) -> Vec<f64> {
        v.iter().flatten().copied().collect()
    }

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn symmetric_pose() -> Pose3D {
        let skel = Skeleton::canonical();
        // mirror image across x = 0 for left/right joints
        let mut p = vec![[0.0; 3]; skel.num_joints()];
        let spine: [(usize, [f64; 3]); 5] = [
            (0, [0.0, 0.0, 10.0]),
            (1, [0.0, 0.25, 10.0]),
            (2, [0.0, 0.5, 10.0]),
            (3, [0.0, 0.6, 9.9]),
            (4, [0.0, 0.75, 10.0]),
        ];
        for (j, q) in spine {
            p[j] = q;
        }
        let left = [(5, [-0.15, 0.5, 10.0]), (6, [-0.4, 0.3, 10.1]), (7, [-0.5, 0.1, 9.9])];
        let right = [8, 9, 10];
        for ((j, q), r) in left.iter().zip(right) {
            p[*j] = *q;
            p[r] = [-q[0], q[1], q[2]];
        }
        let lleg = [(11, [-0.1, 0.0, 10.0]), (12, [-0.12, -0.45, 10.05]), (13, [-0.1, -0.9, 10.0])];
        for ((j, q), r) in lleg.iter().zip([14, 15, 16]) {
            p[*j] = *q;
            p[r] = [-q[0], q[1], q[2]];
        }
        Pose3D(p)
    }

    #[test]
    fn loss_3d_examples() {
        let a = Pose3D(vec![[0.3, -0.2, 1.0]; 16]);
        assert_eq!(loss_3d(&a, &a), 0.0);
        let b = a.map(|q| [q[0] + 1.0, q[1], q[2]]);
        assert!((loss_3d(&a, &b) - 0.25).abs() < 1e-12);
        assert_eq!(loss_3d(&a, &b), loss_3d(&b, &a));
    }

    #[test]
    fn cam_eq_examples() {
        let k = CameraWP::from_slice(&[0.1, 0.2, 0.3, -0.4, 0.5, 0.6]);
        assert_eq!(loss_cam_eq(&k, &k), 0.0);
        let shifted = CameraWP::from_slice(&k.to_array().map(|v| v + 0.5));
        assert!((loss_cam_eq(&k, &shifted) - 0.5).abs() < 1e-15);
        // permuting corresponding entries of both cameras
        let perm = |c: &CameraWP| {
            let a = c.to_array();
            CameraWP::from_slice(&[a[5], a[3], a[1], a[0], a[4], a[2]])
        };
        assert_eq!(loss_cam_eq(&k, &shifted), loss_cam_eq(&perm(&k), &perm(&shifted)));
    }

    #[test]
    fn svma_examples() {
        let p = Pose2D(vec![[0.01, -0.02]; 16]);
        let set = vec![p.clone(), p.clone(), p.clone()];
        assert_eq!(loss_svma(&set, &set).unwrap(), 0.0);
        let mut q = p.clone();
        q.0[3][0] += 1.0;
        let v = loss_svma(&[p.clone(), q.clone()], &[p.clone(), p.clone()]).unwrap();
        assert!((v - 1.0 / 32.0).abs() < 1e-15);
        let r = Pose2D(vec![[0.5, 0.1]; 16]);
        let a = loss_svma(&[p.clone(), q.clone(), r.clone()], &[p.clone(), r.clone()]).unwrap();
        let b = loss_svma(&[r.clone(), p.clone(), q.clone()], &[r.clone(), p.clone()]).unwrap();
        assert!((a - b).abs() < 1e-15);
        assert!(matches!(loss_svma(&[p.clone()], &[p.clone(), p]), Err(Error::Config(_))));
    }

    #[test]
    fn adversarial_examples() {
        let s = [0.3, -1.2, 2.0];
        let l = loss_adversarial(&s, &s, 0.0).unwrap();
        assert_eq!(l.disc, 0.0);
        assert_eq!(l.gen, -(0.3 - 1.2 + 2.0) / 3.0);
        assert!(loss_adversarial(&s, &s[..2], 0.0).is_err());
    }

    #[test]
    fn camera_examples() {
        let k = CameraWP::from_slice(&[0.0, 3.0, 0.0, 0.0, 0.0, 3.0]);
        assert_eq!(loss_camera(&k, &k).unwrap(), 0.0);
        let rank1 = CameraWP::from_slice(&[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        assert!((loss_camera(&rank1, &rank1).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        let zero = CameraWP::from_slice(&[0.0; 6]);
        assert!(matches!(loss_camera(&zero, &zero), Err(Error::Domain(_))));
    }

    #[test]
    fn camera_gram_zero_iff_scaled_orthonormal_rows() {
        // oracle: the residual vanishes exactly when both singular values agree
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for i in 0..500 {
            let v = random_vec(&mut rng, 6);
            let cam = if i % 2 == 0 {
                CameraWP::from_slice(&v)
            } else {
                // rows of a random rotation scaled by a random factor
                let q = nalgebra::Rotation3::new(nalgebra::Vector3::new(v[0], v[1], v[2]) * 3.0);
                let s = 0.05 + v[3].abs();
                let m = q.matrix();
                CameraWP::from_slice(&[m[(0, 0)], m[(0, 1)], m[(0, 2)], m[(1, 0)], m[(1, 1)], m[(1, 2)]].map(|x| x * s))
            };
            let k = nalgebra::Matrix2x3::from_row_slice(&cam.to_array());
            let sv = k.singular_values();
            let (s1, s2) = (sv[0].max(sv[1]), sv[0].min(sv[1]));
            let l = loss_camera_gram(&cam).unwrap();
            // closed form in terms of singular values
            let expect = 2f64.sqrt() * (s1 * s1 - s2 * s2) / (s1 * s1 + s2 * s2);
            assert!((l - expect).abs() < 1e-9, "{l} vs {expect}");
            if i % 2 == 1 {
                assert!(l < 1e-9);
            } else {
                assert!(l > 1e-6);
            }
        }
    }

    #[test]
    fn symmetry_examples() {
        let skel = Skeleton::canonical();
        let p = symmetric_pose();
        assert!(loss_symmetry(&p, &skel) < 1e-30);
        // upper arms of length 2 (left) and 1 (right), forearms both 1
        let mut q = p.clone();
        let ls = q.0[L_SHOULDER];
        q.0[L_ELBOW] = [ls[0] - 2.0, ls[1], ls[2]];
        q.0[L_WRIST] = [ls[0] - 3.0, ls[1], ls[2]];
        let rs = q.0[R_SHOULDER];
        q.0[R_ELBOW] = [rs[0] + 1.0, rs[1], rs[2]];
        q.0[R_WRIST] = [rs[0] + 2.0, rs[1], rs[2]];
        assert!((loss_symmetry(&q, &skel) - 1.0 / 6.0).abs() < 1e-12);
        // invariant to global rotation
        let rot = crate::geometry::RotationY::new(0.7);
        let rotated = crate::geometry::rotate_about_pivot(&q, rot, 10.0);
        assert!((loss_symmetry(&rotated, &skel) - 1.0 / 6.0).abs() < 1e-12);
    }

    fn orientation_pose(v: [f64; 3], w: [f64; 3]) -> Vec<[f64; 3]> {
        let skel = Skeleton::canonical();
        let o = skel.orientation();
        let mut p = vec![[0.0, 0.0, 10.0]; skel.num_joints()];
        p[o.nose] = [v[0], v[1], 10.0 + v[2]];
        p[o.left_shoulder] = [w[0], w[1], 10.0 + w[2]];
        p
    }

    #[test]
    fn angle_examples() {
        let skel = Skeleton::canonical();
        let p = orientation_pose([0.0, 1.0, 0.0], [0.3, -0.2, 0.9]);
        assert_eq!(loss_angle_grad(&p, &skel).value, 0.0);
        let p = orientation_pose([1.0, 0.0, 0.0], [0.0, 0.0, 1.0]);
        assert_eq!(loss_angle_grad(&p, &skel).value, 1.0);
        let p = orientation_pose([1.0, 0.0, 0.0], [0.0, 0.0, -1.0]);
        assert_eq!(loss_angle_grad(&p, &skel).value, 0.0);
        let p = orientation_pose([0.0, 0.0, 0.0], [0.0, 0.0, -1.0]);
        let r = loss_angle_grad(&p, &skel);
        assert!(r.degenerate);
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn total_examples() {
        let w = LossWeights::default();
        let adv = -0.37;
        let zero = LossTerms { adv, ..Default::default() };
        assert_eq!(total_generator_loss(&zero, &w), adv);
        let unit = LossTerms {
            adv,
            angle: 1.0,
            cam: 1.0,
            sym: 1.0,
            l3d: 1.0,
            svma: 1.0,
        };
        assert!((total_generator_loss(&unit, &w) - (adv + 1.0 + 1.0 + 0.01 + 0.1 + 10.0)).abs() < 1e-12);
        let none = LossWeights {
            lambda_angle: 0.0,
            lambda_cam: 0.0,
            lambda_sym: 0.0,
            lambda_3d: 0.0,
            lambda_svma: 0.0,
            lambda_gp: 0.0,
        };
        assert_eq!(total_generator_loss(&unit, &none), adv);
        let report = LossReport::from_terms(3, &unit, 0.0, &w);
        let recomposed = report.adv
            + w.lambda_angle * report.angle
            + w.lambda_cam * report.cam
            + w.lambda_sym * report.sym
            + w.lambda_3d * report.l3d
            + w.lambda_svma * report.svma;
        assert!((report.total - recomposed).abs() < 1e-9);
        assert!(LossWeights { lambda_sym: -1.0, ..w }.validate().is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let skel = Skeleton::canonical();
        let n = skel.num_joints();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let a = random_vec(&mut rng, 3 * n);
            let b = random_vec(&mut rng, 3 * n);
            let (_, g) = loss_3d_grad(&to3(&a), &to3(&b));
            let fd = numeric_grad(&a, |x| loss_3d_grad(&to3(x), &to3(&b)).0);
            assert!(rel_err(&fd, &flat3(&g)) < 1e-4);

            let k1 = random_vec(&mut rng, 6);
            let mut k2 = random_vec(&mut rng, 6);
            // keep every entry clear of the absolute-value kink
            while k1.iter().zip(&k2).any(|(a, b)| (a - b).abs() < 10.0 * STEP) {
                k2 = random_vec(&mut rng, 6);
            }
            let (_, g) = loss_cam_eq_grad(&CameraWP::from_slice(&k1), &CameraWP::from_slice(&k2));
            let fd = numeric_grad(&k1, |x| loss_cam_eq(&CameraWP::from_slice(x), &CameraWP::from_slice(&k2)));
            assert!(rel_err(&fd, &g) < 1e-4);

            let (_, g) = loss_camera_gram_grad(&CameraWP::from_slice(&k1)).unwrap();
            let fd = numeric_grad(&k1, |x| loss_camera_gram(&CameraWP::from_slice(x)).unwrap());
            assert!(rel_err(&fd, &g) < 1e-4, "{fd:?} {g:?}");

            let (_, g) = loss_symmetry_grad(&to3(&a), &skel);
            let fd = numeric_grad(&a, |x| loss_symmetry_grad(&to3(x), &skel).0);
            assert!(rel_err(&fd, &flat3(&g)) < 1e-4);

            // pick a pose with positive orientation sine away from the hinge
            let mut p = a.clone();
            while orientation_sine(&to3(&p), &skel).unwrap() < 0.1 {
                p = random_vec(&mut rng, 3 * n);
            }
            let r = loss_angle_grad(&to3(&p), &skel);
            let fd = numeric_grad(&p, |x| loss_angle_grad(&to3(x), &skel).value);
            assert!(rel_err(&fd, &flat3(&r.grad)) < 1e-4);

            let sets: Vec<Vec<f64>> = (0..6).map(|_| random_vec(&mut rng, 2 * n)).collect();
            let eval = |s: &[Vec<f64>]| {
                let p: Vec<Vec<[f64; 2]>> = s.iter().map(|v| to2(v)).collect();
                let r: Vec<&[[f64; 2]]> = p.iter().map(|v| v.as_slice()).collect();
                loss_svma_grad(&r[..3], &r[3..]).unwrap()
            };
            let (_, grads) = eval(&sets);
            for member in 0..6 {
                let an: Vec<f64> = grads[member / 3][member % 3].iter().flatten().copied().collect();
                let fd = numeric_grad(&sets[member], |x| {
                    let mut s = sets.clone();
                    s[member] = x.to_vec();
                    eval(&s).0
                });
                assert!(rel_err(&fd, &an) < 1e-4);
            }
        }
    }

    proptest! {
        #[test]
        fn losses_are_nonnegative(v in prop::collection::vec(-5.0f64..5.0, 102)) {
            let skel = Skeleton::canonical();
            let a = to3(&v[..51]);
            let b = to3(&v[51..]);
            prop_assert!(loss_3d_grad(&a, &b).0 >= 0.0);
            prop_assert!(loss_symmetry_grad(&a, &skel).0 >= 0.0);
            prop_assert!(loss_angle_grad(&a, &skel).value >= 0.0);
            let k1 = CameraWP::from_slice(&v[..6]);
            let k2 = CameraWP::from_slice(&v[6..12]);
            prop_assert!(loss_cam_eq(&k1, &k2) >= 0.0);
            if let Ok(c) = loss_camera(&k1, &k2) {
                prop_assert!(c >= 0.0);
            }
        }

        #[test]
        fn camera_gram_is_scale_invariant(v in prop::collection::vec(-2.0f64..2.0, 6), c in 0.01f64..100.0) {
            let k = CameraWP::from_slice(&v);
            let scaled = CameraWP::from_slice(&v.iter().map(|x| x * c).collect::<Vec<_>>());
            if let (Ok(a), Ok(b)) = (loss_camera_gram(&k), loss_camera_gram(&scaled)) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }
}
