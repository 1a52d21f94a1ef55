//! Projection and rotation math linking 2D observations, 3D poses and cameras.
//!
//! Conventions: the perspective camera sits at the origin with focal length 1
//! and looks down +Z. The skeleton root is nominally at depth `d`. Poses are
//! row vectors, so a rotation is applied as `p * M`.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pose::{Pose2D, Pose3D};

/// Default camera-to-skeleton distance.
pub const DEFAULT_DEPTH: f64 = 10.0;
/// Lower bound applied to lifted joint depths.
pub const DEFAULT_MIN_DEPTH: f64 = 1.0;

/// Weak-perspective camera, a 2x3 matrix applied to each 3D joint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraWP {
    pub k: [[f64; 3]; 2],
}

impl CameraWP {
    /// Reshape a 6-vector row-major into K.
    pub fn from_slice(v: &[f64]) -> Self {
        assert_eq!(v.len(), 6, "camera vector must have 6 entries");
        CameraWP {
            k: [[v[0], v[1], v[2]], [v[3], v[4], v[5]]],
        }
    }

    pub fn to_array(&self) -> [f64; 6] {
        let k = &self.k;
        [k[0][0], k[0][1], k[0][2], k[1][0], k[1][1], k[1][2]]
    }

    /// `s * [[1,0,0],[0,1,0]]`.
    pub fn scaled_identity(s: f64) -> Self {
        CameraWP {
            k: [[s, 0.0, 0.0], [0.0, s, 0.0]],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    /// `K * p` for a single joint.
    #[inline]
    pub fn apply(&self, p: [f64; 3]) -> [f64; 2] {
        let k = &self.k;
        [
            k[0][0] * p[0] + k[0][1] * p[1] + k[0][2] * p[2],
            k[1][0] * p[0] + k[1][1] * p[1] + k[1][2] * p[2],
        ]
    }

    /// The 2x2 Gram matrix `K K^T`.
    pub fn gram(&self) -> [[f64; 2]; 2] {
        let k = &self.k;
        let dot = |a: &[f64; 3], b: &[f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
        let g01 = dot(&k[0], &k[1]);
        [[dot(&k[0], &k[0]), g01], [g01, dot(&k[1], &k[1])]]
    }
}

/// Rotation about the vertical (y) axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationY {
    theta: f64,
}

impl RotationY {
    /// Angle is wrapped into `[0, 2pi)`.
    pub fn new(theta: f64) -> Self {
        let mut t = theta.rem_euclid(TAU);
        if t >= TAU {
            t = 0.0;
        }
        RotationY { theta: t }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Matrix in the row-vector convention: `[[c,0,-s],[0,1,0],[s,0,c]]`.
    pub fn matrix(&self) -> [[f64; 3]; 3] {
        let (s, c) = self.theta.sin_cos();
        [[c, 0.0, -s], [0.0, 1.0, 0.0], [s, 0.0, c]]
    }
}

/// Result of lifting: the pose plus the number of joints whose depth hit the clamp.
#[derive(Debug, Clone, PartialEq)]
pub struct Lifted {
    pub pose: Pose3D,
    pub clamped: usize,
}

/// `Z = max(d + D, min_depth)`, `X = x Z`, `Y = y Z`.
pub fn lift_from_depth(x2d: &Pose2D, depth_offsets: &[f64], d: f64, min_depth: f64) -> Lifted {
    assert_eq!(x2d.num_joints(), depth_offsets.len(), "one depth offset per joint");
    let mut clamped = 0;
    let coords = x2d
        .0
        .iter()
        .zip(depth_offsets)
        .map(|(p, &off)| {
            let mut z = d + off;
            if z < min_depth {
                z = min_depth;
                clamped += 1;
            }
            [p[0] * z, p[1] * z, z]
        })
        .collect();
    Lifted {
        pose: Pose3D(coords),
        clamped,
    }
}

/// Pinhole projection with unit focal length.
pub fn perspective_project(p: &Pose3D) -> Result<Pose2D> {
    let mut out = Vec::with_capacity(p.num_joints());
    for (joint, q) in p.0.iter().enumerate() {
        // also rejects NaN depth
        if !(q[2] > 0.0) {
            return Err(Error::NonPositiveDepth { joint, depth: q[2] });
        }
        out.push([q[0] / q[2], q[1] / q[2]]);
    }
    Ok(Pose2D(out))
}

#[inline]
pub(crate) fn rotate_point(p: [f64; 3], m: &[[f64; 3]; 3], d: f64) -> [f64; 3] {
    let r = [p[0], p[1], p[2] - d];
    [
        r[0] * m[0][0] + r[1] * m[1][0] + r[2] * m[2][0],
        r[0] * m[0][1] + r[1] * m[1][1] + r[2] * m[2][1],
        r[0] * m[0][2] + r[1] * m[1][2] + r[2] * m[2][2] + d,
    ]
}

/// Rotate about the vertical axis through the pivot `(0, 0, d)`.
pub fn rotate_about_pivot(p: &Pose3D, rot: RotationY, d: f64) -> Pose3D {
    let m = rot.matrix();
    p.map(|q| rotate_point(q, &m, d))
}

/// `x = K X` joint by joint, on the absolute (uncentred) pose.
pub fn weak_project(p: &Pose3D, cam: &CameraWP) -> Pose2D {
    Pose2D(p.0.iter().map(|&q| cam.apply(q)).collect())
}

/// `s = sqrt(trace(K K^T) / 2)`.
pub fn camera_scale(cam: &CameraWP) -> Result<f64> {
    let g = cam.gram();
    let tr = g[0][0] + g[1][1];
    if tr == 0.0 {
        return Err(Error::Domain("camera scale of a zero matrix"));
    }
    Ok((tr / 2.0).sqrt())
}
