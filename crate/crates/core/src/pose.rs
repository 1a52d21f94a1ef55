//! Per-frame joint coordinate containers in canonical joint order.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pose2D(pub Vec<[f64; 2]>);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pose3D(pub Vec<[f64; 3]>);

impl Pose2D {
    pub fn num_joints(&self) -> usize {
        self.0.len()
    }

    /// Interleaved `(x1, y1, x2, y2, ...)` layout used as network input.
    pub fn flatten(&self) -> Vec<f64> {
        self.0.iter().flat_map(|p| p.iter().copied()).collect()
    }

    pub fn from_flat(v: &[f64]) -> Self {
        debug_assert_eq!(v.len() % 2, 0);
        Pose2D(v.chunks_exact(2).map(|c| [c[0], c[1]]).collect())
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|p| p.iter().all(|v| v.is_finite()))
    }
}

impl Pose3D {
    pub fn num_joints(&self) -> usize {
        self.0.len()
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.0.iter().flat_map(|p| p.iter().copied()).collect()
    }

    pub fn from_flat(v: &[f64]) -> Self {
        debug_assert_eq!(v.len() % 3, 0);
        Pose3D(v.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect())
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|p| p.iter().all(|v| v.is_finite()))
    }

    pub fn map(&self, f: impl Fn([f64; 3]) -> [f64; 3]) -> Pose3D {
        Pose3D(self.0.iter().map(|&p| f(p)).collect())
    }
}

pub(crate) fn sub3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn norm3(a: [f64; 3]) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}
