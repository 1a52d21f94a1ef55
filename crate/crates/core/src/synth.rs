//! Synthetic articulated poses for desk-scale experiments.
//!
//! Poses are built from a fixed-bone-length kinematic chain with joint angles
//! drawn inside rough anatomical limits. Body frame: +Y up, the person faces
//! -Z (toward the camera at azimuth 0) and their left side is at -X, which is
//! the handedness under which the face/shoulder orientation term is satisfied.
//! Coordinates are in millimetres; each pose is rotated by an azimuth from the
//! sweep and placed with its root on the optical axis at `d` times its own
//! mean root distance, so the normalised pose sits at depth `d`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{pose_scale_3d, PoseDataset};
use crate::error::{Error, Result};
use crate::geometry::{rotate_about_pivot, RotationY, DEFAULT_DEPTH};
use crate::pose::Pose3D;
use crate::skeleton::*;

/// Bone lengths in millimetres, indexed like the canonical bone edges.
pub const BONE_LENGTHS_MM: [f64; 16] = [
    230.0, 250.0, 110.0, 120.0, // spine, neck, nose, head
    150.0, 280.0, 250.0, // left clavicle, upper arm, forearm
    150.0, 280.0, 250.0, // right
    130.0, 450.0, 440.0, // left pelvis, thigh, shin
    130.0, 450.0, 440.0, // right
];

/// Minimum value of the orientation sine accepted by the rejection sampler.
const ORIENTATION_MARGIN: f64 = 0.05;

type V3 = [f64; 3];

fn add(a: V3, b: V3) -> V3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}
fn scale(a: V3, s: f64) -> V3 {
    [a[0] * s, a[1] * s, a[2] * s]
}
fn dot(a: V3, b: V3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}
fn normalize(a: V3) -> V3 {
    let n = dot(a, a).sqrt();
    scale(a, 1.0 / n)
}
/// `cos(t) a + sin(t) b` for orthonormal `a`, `b`.
fn blend(a: V3, b: V3, t: f64) -> V3 {
    add(scale(a, t.cos()), scale(b, t.sin()))
}

/// Orthonormal body frame.
#[derive(Clone, Copy)]
struct Frame {
    up: V3,
    fwd: V3,
    left: V3,
}

impl Frame {
    fn base() -> Self {
        Frame {
            up: [0.0, 1.0, 0.0],
            fwd: [0.0, 0.0, -1.0],
            left: [-1.0, 0.0, 0.0],
        }
    }
    /// Turn about `up`; positive angles turn the face toward the left side.
    fn yaw(self, t: f64) -> Self {
        Frame {
            up: self.up,
            fwd: blend(self.fwd, self.left, t),
            left: blend(self.left, scale(self.fwd, -1.0), t),
        }
    }
    /// Bend forward about `left`.
    fn pitch(self, t: f64) -> Self {
        Frame {
            up: blend(self.up, self.fwd, t),
            fwd: blend(self.fwd, scale(self.up, -1.0), t),
            left: self.left,
        }
    }
    /// Lean toward the left side about `fwd`.
    fn roll(self, t: f64) -> Self {
        Frame {
            up: blend(self.up, self.left, t),
            fwd: self.fwd,
            left: blend(self.left, scale(self.up, -1.0), t),
        }
    }
}

fn deg(a: f64) -> f64 {
    a * PI / 180.0
}

fn uniform(rng: &mut ChaCha8Rng, lo_deg: f64, hi_deg: f64) -> f64 {
    deg(rng.random_range(lo_deg..=hi_deg))
}

fn random_unit(rng: &mut ChaCha8Rng) -> V3 {
    loop {
        let v = [
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ];
        let n = dot(v, v);
        if n > 1e-4 && n <= 1.0 {
            return scale(v, 1.0 / n.sqrt());
        }
    }
}

/// Unit vector perpendicular to `t` in a random direction.
fn random_perpendicular(rng: &mut ChaCha8Rng, t: V3) -> V3 {
    loop {
        let r = random_unit(rng);
        let p = add(r, scale(t, -dot(r, t)));
        if dot(p, p) > 1e-4 {
            return normalize(p);
        }
    }
}

/// Two-segment limb: first segment direction plus a hinge bend.
fn limb(rng: &mut ChaCha8Rng, dir: V3, bend_axis_hint: Option<V3>, bend: f64) -> (V3, V3) {
    let perp = match bend_axis_hint {
        Some(h) => {
            let p = add(h, scale(dir, -dot(h, dir)));
            if dot(p, p) > 1e-6 {
                normalize(p)
            } else {
                random_perpendicular(rng, dir)
            }
        }
        None => random_perpendicular(rng, dir),
    };
    (dir, blend(dir, perp, bend))
}

/// One body-frame pose (root at the origin) in millimetres.
fn sample_body(rng: &mut ChaCha8Rng) -> Vec<V3> {
    let len = BONE_LENGTHS_MM;
    let mut j = vec![[0.0; 3]; 17];
    let pelvis = Frame::base().yaw(uniform(rng, -10.0, 10.0));
    j[L_HIP] = scale(pelvis.left, len[10]);
    j[R_HIP] = scale(pelvis.left, -len[13]);

    let torso = pelvis
        .yaw(uniform(rng, -30.0, 30.0))
        .pitch(uniform(rng, -10.0, 45.0))
        .roll(uniform(rng, -15.0, 15.0));
    j[SPINE] = scale(torso.up, len[0]);
    let chest = torso.pitch(uniform(rng, -5.0, 20.0));
    j[NECK] = add(j[SPINE], scale(chest.up, len[1]));

    let head = chest.yaw(uniform(rng, -50.0, 50.0)).pitch(uniform(rng, -30.0, 40.0));
    j[NOSE] = add(j[NECK], scale(normalize(add(head.up, scale(head.fwd, 0.6))), len[2]));
    j[HEAD_TOP] = add(j[NOSE], scale(normalize(add(head.up, scale(head.fwd, -0.3))), len[3]));

    for (sign, clav, upper, lower, sh, el, wr) in [
        (1.0, 4, 5, 6, L_SHOULDER, L_ELBOW, L_WRIST),
        (-1.0, 7, 8, 9, R_SHOULDER, R_ELBOW, R_WRIST),
    ] {
        let outward = scale(chest.left, sign);
        let droop = uniform(rng, 0.0, 15.0);
        j[sh] = add(j[NECK], scale(blend(outward, scale(chest.up, -1.0), droop), len[clav]));
        let down = scale(chest.up, -1.0);
        let flex_angle = uniform(rng, -40.0, 120.0);
        let flex = blend(down, chest.fwd, flex_angle);
        let dir = normalize(blend(flex, outward, uniform(rng, 0.0, 80.0)));
        // the forearm folds toward the front of the upper arm
        let front = blend(down, chest.fwd, flex_angle + PI / 2.0);
        let bend = uniform(rng, 0.0, 140.0);
        let (a, b) = limb(rng, dir, Some(front), bend);
        j[el] = add(j[sh], scale(a, len[upper]));
        j[wr] = add(j[el], scale(b, len[lower]));
    }

    for (sign, thigh, shin, hip, knee, ankle) in [
        (1.0, 11, 12, L_HIP, L_KNEE, L_ANKLE),
        (-1.0, 14, 15, R_HIP, R_KNEE, R_ANKLE),
    ] {
        let outward = scale(pelvis.left, sign);
        let down = scale(pelvis.up, -1.0);
        let flex = blend(down, pelvis.fwd, uniform(rng, -25.0, 110.0));
        let dir = normalize(blend(flex, outward, uniform(rng, -10.0, 40.0)));
        let back = scale(pelvis.fwd, -1.0);
        let bend = uniform(rng, 0.0, 140.0);
        let (a, b) = limb(rng, dir, Some(back), bend);
        j[knee] = add(j[hip], scale(a, len[thigh]));
        j[ankle] = add(j[knee], scale(b, len[shin]));
    }
    j
}

/// Signed sine of the face/shoulder angle on the z-x plane.
pub(crate) fn orientation_sine(p: &[V3], o: OrientationJoints) -> f64 {
    let v = add(p[o.nose], scale(p[o.neck], -1.0));
    let w = add(p[o.left_shoulder], scale(p[o.right_shoulder], -1.0));
    let num = v[2] * w[0] - v[0] * w[2];
    num / (dot(v, v).sqrt() * dot(w, w).sqrt())
}

/// Evenly spaced azimuths covering the full circle.
pub fn full_sweep(count: usize) -> Vec<f64> {
    (0..count).map(|i| 2.0 * PI * i as f64 / count as f64).collect()
}

/// Generate `count` camera-frame poses (mm) paired with their projections.
pub fn synthesize_poses(count: usize, seed: u64, skeleton: &Skeleton, camera_sweep: &[f64]) -> Result<PoseDataset> {
    synthesize_poses_at_depth(count, seed, skeleton, camera_sweep, DEFAULT_DEPTH)
}

pub fn synthesize_poses_at_depth(
    count: usize,
    seed: u64,
    skeleton: &Skeleton,
    camera_sweep: &[f64],
    d: f64,
) -> Result<PoseDataset> {
    if count == 0 {
        return Err(Error::Config("synthetic pose count must be positive".into()));
    }
    if camera_sweep.is_empty() {
        return Err(Error::Config("camera sweep must contain at least one azimuth".into()));
    }
    if *skeleton != Skeleton::canonical() {
        return Err(Error::Config("the synthetic generator only supports the canonical skeleton".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let orient = skeleton.orientation();
    let mut frames = Vec::with_capacity(count);
    while frames.len() < count {
        let body = sample_body(&mut rng);
        if orientation_sine(&body, orient) < ORIENTATION_MARGIN {
            continue;
        }
        let az = camera_sweep[rng.random_range(0..camera_sweep.len())];
        let pose = Pose3D(body);
        let scale_mm = pose_scale_3d(&pose, skeleton);
        let depth = d * scale_mm;
        let placed = pose.map(|q| [q[0], q[1], q[2] + depth]);
        frames.push(rotate_about_pivot(&placed, RotationY::new(az), depth));
    }
    PoseDataset::from_3d(skeleton.clone(), frames)
}
