//! Joint topology shared by data ingestion, losses and rendering.

use crate::error::{Error, Result};

/// Which side of the body a bone belongs to. Used for symmetric pairs and
/// for colouring rendered figures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
    Center,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Skeleton {
    joint_names: Vec<String>,
    root_index: usize,
    bone_edges: Vec<(usize, usize)>,
    symmetric_pairs: Vec<(usize, usize)>,
    orientation: OrientationJoints,
}

/// Joints that define the face and shoulder orientation vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OrientationJoints {
    pub nose: usize,
    pub neck: usize,
    pub left_shoulder: usize,
    pub right_shoulder: usize,
}

pub const HIP: usize = 0;
pub const SPINE: usize = 1;
pub const NECK: usize = 2;
pub const NOSE: usize = 3;
pub const HEAD_TOP: usize = 4;
pub const L_SHOULDER: usize = 5;
pub const L_ELBOW: usize = 6;
pub const L_WRIST: usize = 7;
pub const R_SHOULDER: usize = 8;
pub const R_ELBOW: usize = 9;
pub const R_WRIST: usize = 10;
pub const L_HIP: usize = 11;
pub const L_KNEE: usize = 12;
pub const L_ANKLE: usize = 13;
pub const R_HIP: usize = 14;
pub const R_KNEE: usize = 15;
pub const R_ANKLE: usize = 16;

const CANONICAL_NAMES: [&str; 17] = [
    "hip",
    "spine",
    "neck",
    "nose",
    "head_top",
    "l_shoulder",
    "l_elbow",
    "l_wrist",
    "r_shoulder",
    "r_elbow",
    "r_wrist",
    "l_hip",
    "l_knee",
    "l_ankle",
    "r_hip",
    "r_knee",
    "r_ankle",
];

const CANONICAL_BONES: [(usize, usize); 16] = [
    (HIP, SPINE),
    (SPINE, NECK),
    (NECK, NOSE),
    (NOSE, HEAD_TOP),
    (NECK, L_SHOULDER),
    (L_SHOULDER, L_ELBOW),
    (L_ELBOW, L_WRIST),
    (NECK, R_SHOULDER),
    (R_SHOULDER, R_ELBOW),
    (R_ELBOW, R_WRIST),
    (HIP, L_HIP),
    (L_HIP, L_KNEE),
    (L_KNEE, L_ANKLE),
    (HIP, R_HIP),
    (R_HIP, R_KNEE),
    (R_KNEE, R_ANKLE),
];

/// Pairs of bone-edge indices (left, right).
const CANONICAL_SYMMETRY: [(usize, usize); 6] = [(4, 7), (5, 8), (6, 9), (10, 13), (11, 14), (12, 15)];

impl Skeleton {
    pub fn new(
        joint_names: Vec<String>,
        root_index: usize,
        bone_edges: Vec<(usize, usize)>,
        symmetric_pairs: Vec<(usize, usize)>,
        orientation: OrientationJoints,
    ) -> Result<Self> {
        let n = joint_names.len();
        if n == 0 {
            return Err(Error::Schema("skeleton has no joints".into()));
        }
        for (i, name) in joint_names.iter().enumerate() {
            if joint_names[..i].contains(name) {
                return Err(Error::Schema(format!("duplicate joint name `{name}`")));
            }
        }
        if root_index >= n {
            return Err(Error::Schema(format!("root index {root_index} out of range")));
        }
        for &(a, b) in &bone_edges {
            if a >= n || b >= n || a == b {
                return Err(Error::Schema(format!("invalid bone edge ({a}, {b})")));
            }
        }
        for &(l, r) in &symmetric_pairs {
            if l >= bone_edges.len() || r >= bone_edges.len() || l == r {
                return Err(Error::Schema(format!("invalid symmetric pair ({l}, {r})")));
            }
        }
        let o = orientation;
        let ids = [o.nose, o.neck, o.left_shoulder, o.right_shoulder];
        for (i, &j) in ids.iter().enumerate() {
            if j >= n || ids[..i].contains(&j) {
                return Err(Error::Schema("orientation joints must be four distinct valid indices".into()));
            }
        }
        Ok(Skeleton {
            joint_names,
            root_index,
            bone_edges,
            symmetric_pairs,
            orientation,
        })
    }

    /// The 17-joint hip-rooted skeleton used throughout the crate.
    pub fn canonical() -> Self {
        Skeleton::new(
            CANONICAL_NAMES.iter().map(|s| s.to_string()).collect(),
            HIP,
            CANONICAL_BONES.to_vec(),
            CANONICAL_SYMMETRY.to_vec(),
            OrientationJoints {
                nose: NOSE,
                neck: NECK,
                left_shoulder: L_SHOULDER,
                right_shoulder: R_SHOULDER,
            },
        )
        .expect("canonical skeleton is valid")
    }

    pub fn num_joints(&self) -> usize {
        self.joint_names.len()
    }

    pub fn joint_names(&self) -> &[String] {
        &self.joint_names
    }

    pub fn joint_index(&self, name: &str) -> Option<usize> {
        self.joint_names.iter().position(|n| n == name)
    }

    pub fn root_index(&self) -> usize {
        self.root_index
    }

    pub fn bone_edges(&self) -> &[(usize, usize)] {
        &self.bone_edges
    }

    pub fn symmetric_pairs(&self) -> &[(usize, usize)] {
        &self.symmetric_pairs
    }

    pub fn orientation(&self) -> OrientationJoints {
        self.orientation
    }

    /// Side of a bone, derived from the symmetric pairs (first member is left).
    pub fn bone_side(&self, edge: usize) -> Side {
        for &(l, r) in &self.symmetric_pairs {
            if l == edge {
                return Side::Left;
            }
            if r == edge {
                return Side::Right;
            }
        }
        Side::Center
    }
}

impl Default for Skeleton {
    fn default() -> Self {
        Skeleton::canonical()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_is_consistent() {
        let s = Skeleton::canonical();
        assert_eq!(s.num_joints(), 17);
        assert_eq!(s.bone_edges().len(), 16);
        assert_eq!(s.symmetric_pairs().len(), 6);
        assert_eq!(s.joint_index("nose"), Some(NOSE));
        // every joint except the root has exactly one parent
        for j in 0..s.num_joints() {
            let parents = s.bone_edges().iter().filter(|e| e.1 == j).count();
            assert_eq!(parents, usize::from(j != s.root_index()));
        }
        assert_eq!(s.bone_side(4), Side::Left);
        assert_eq!(s.bone_side(7), Side::Right);
        assert_eq!(s.bone_side(0), Side::Center);
    }

    #[test]
    fn rejects_duplicates_and_bad_indices() {
        let o = OrientationJoints {
            nose: 0,
            neck: 1,
            left_shoulder: 2,
            right_shoulder: 3,
        };
        let names = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        assert!(Skeleton::new(names(&["a", "a", "b", "c"]), 0, vec![], vec![], o).is_err());
        assert!(Skeleton::new(names(&["a", "b", "c", "d"]), 4, vec![], vec![], o).is_err());
        assert!(Skeleton::new(names(&["a", "b", "c", "d"]), 0, vec![(0, 1)], vec![(0, 0)], o).is_err());
        let dup = OrientationJoints { neck: 0, ..o };
        assert!(Skeleton::new(names(&["a", "b", "c", "d"]), 0, vec![], vec![], dup).is_err());
        assert!(Skeleton::new(names(&["a", "b", "c", "d"]), 0, vec![(0, 1), (0, 2)], vec![(0, 1)], o).is_ok());
    }
}
