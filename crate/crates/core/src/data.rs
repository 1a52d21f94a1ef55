//! Pose normalisation, datasets and the delimited keypoint file format.
//!
//! Keypoint files are comma separated, one frame per line. The header names
//! each joint coordinate as `<joint>_x`, `<joint>_y` and optionally
//! `<joint>_z`; the optional `subject` and `action` columns carry labels.
//! Lines starting with `#` are comments. A file with `_z` columns holds
//! camera-frame 3D joints and its 2D frames are their perspective projection.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use log::warn;

use crate::error::{Error, Result};
use crate::geometry::perspective_project;
use crate::pose::{norm3, sub3, Pose2D, Pose3D};
use crate::skeleton::Skeleton;

fn mean_root_distance_2d(p: &Pose2D, root: usize) -> f64 {
    let r = p.0[root];
    let n = p.num_joints();
    let sum: f64 = p
        .0
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != root)
        .map(|(_, q)| ((q[0] - r[0]).powi(2) + (q[1] - r[1]).powi(2)).sqrt())
        .sum();
    sum / (n - 1) as f64
}

pub(crate) fn mean_root_distance_3d(p: &Pose3D, root: usize) -> f64 {
    let r = p.0[root];
    let n = p.num_joints();
    let sum: f64 = p
        .0
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != root)
        .map(|(_, &q)| norm3(sub3(q, r)))
        .sum();
    sum / (n - 1) as f64
}

fn check_joints(n: usize, skeleton: &Skeleton) -> Result<()> {
    if n != skeleton.num_joints() {
        return Err(Error::Shape(format!(
            "pose has {n} joints, skeleton has {}",
            skeleton.num_joints()
        )));
    }
    if n < 2 {
        return Err(Error::DegeneratePose);
    }
    Ok(())
}

/// Root-centre and scale so the mean non-root distance to the root is `1/d`.
pub fn preprocess_2d(raw: &Pose2D, skeleton: &Skeleton, d: f64) -> Result<Pose2D> {
    check_joints(raw.num_joints(), skeleton)?;
    let root = skeleton.root_index();
    let mean = mean_root_distance_2d(raw, root);
    if !(mean > 0.0) || !mean.is_finite() {
        return Err(Error::DegeneratePose);
    }
    let scale = 1.0 / (d * mean);
    let r = raw.0[root];
    Ok(Pose2D(
        raw.0
            .iter()
            .map(|q| [(q[0] - r[0]) * scale, (q[1] - r[1]) * scale])
            .collect(),
    ))
}

/// Root-centre and scale so the mean non-root distance to the root is 1.
pub fn preprocess_3d(raw: &Pose3D, skeleton: &Skeleton) -> Result<Pose3D> {
    check_joints(raw.num_joints(), skeleton)?;
    let root = skeleton.root_index();
    let mean = mean_root_distance_3d(raw, root);
    if !(mean > 0.0) || !mean.is_finite() {
        return Err(Error::DegeneratePose);
    }
    let r = raw.0[root];
    Ok(raw.map(|q| {
        let c = sub3(q, r);
        [c[0] / mean, c[1] / mean, c[2] / mean]
    }))
}

/// Mean non-root distance to the root of a raw 3D pose, i.e. the factor that
/// converts normalised units back to the pose's own units (millimetres for
/// the synthetic generator and Human3.6M-style files).
pub fn pose_scale_3d(raw: &Pose3D, skeleton: &Skeleton) -> f64 {
    mean_root_distance_3d(raw, skeleton.root_index())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoseDataset {
    pub skeleton: Skeleton,
    pub frames2d: Vec<Pose2D>,
    /// Camera-frame ground truth; evaluation only.
    pub frames3d: Option<Vec<Pose3D>>,
    pub subjects: Option<Vec<String>>,
    pub actions: Option<Vec<String>>,
    /// Rows dropped while loading.
    pub skipped: usize,
}

/// Preprocessed network inputs plus the dataset indices they came from.
#[derive(Debug, Clone)]
pub struct PreparedInputs {
    pub poses: Vec<Pose2D>,
    pub indices: Vec<usize>,
    pub dropped: usize,
}

impl PoseDataset {
    pub fn new_2d(skeleton: Skeleton, frames2d: Vec<Pose2D>) -> Self {
        PoseDataset {
            skeleton,
            frames2d,
            frames3d: None,
            subjects: None,
            actions: None,
            skipped: 0,
        }
    }

    /// 2D frames are the perspective projection of the given 3D frames.
    pub fn from_3d(skeleton: Skeleton, frames3d: Vec<Pose3D>) -> Result<Self> {
        let frames2d = frames3d.iter().map(perspective_project).collect::<Result<Vec<_>>>()?;
        Ok(PoseDataset {
            skeleton,
            frames2d,
            frames3d: Some(frames3d),
            subjects: None,
            actions: None,
            skipped: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.frames2d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames2d.is_empty()
    }

    pub fn has_3d(&self) -> bool {
        self.frames3d.is_some()
    }

    /// Normalise every 2D frame; frames that fail are dropped and counted.
    pub fn prepare_inputs(&self, d: f64) -> PreparedInputs {
        let mut poses = Vec::with_capacity(self.len());
        let mut indices = Vec::with_capacity(self.len());
        let mut dropped = 0;
        for (i, f) in self.frames2d.iter().enumerate() {
            match preprocess_2d(f, &self.skeleton, d) {
                Ok(p) => {
                    poses.push(p);
                    indices.push(i);
                }
                Err(_) => dropped += 1,
            }
        }
        if dropped > 0 {
            warn!("dropped {dropped} frames that could not be normalised");
        }
        PreparedInputs {
            poses,
            indices,
            dropped,
        }
    }

    /// Keep only frames whose subject label is in `subjects`.
    pub fn filter_subjects(&self, subjects: &[String]) -> Result<PoseDataset> {
        let labels = self
            .subjects
            .as_ref()
            .ok_or_else(|| Error::Schema("dataset has no subject column".into()))?;
        let keep: Vec<usize> = (0..self.len()).filter(|&i| subjects.contains(&labels[i])).collect();
        Ok(self.select(&keep))
    }

    pub fn select(&self, idx: &[usize]) -> PoseDataset {
        let pick = |v: &Vec<String>| idx.iter().map(|&i| v[i].clone()).collect();
        PoseDataset {
            skeleton: self.skeleton.clone(),
            frames2d: idx.iter().map(|&i| self.frames2d[i].clone()).collect(),
            frames3d: self.frames3d.as_ref().map(|f| idx.iter().map(|&i| f[i].clone()).collect()),
            subjects: self.subjects.as_ref().map(pick),
            actions: self.actions.as_ref().map(pick),
            skipped: self.skipped,
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Column {
    Coord { joint: usize, axis: usize },
    Subject,
    Action,
}

fn parse_header(header: &csv::StringRecord, skeleton: &Skeleton) -> Result<(Vec<Column>, bool)> {
    let n = skeleton.num_joints();
    let mut columns = Vec::with_capacity(header.len());
    let mut seen = vec![[false; 3]; n];
    for name in header.iter() {
        let name = name.trim();
        let col = match name {
            "subject" => Column::Subject,
            "action" => Column::Action,
            _ => {
                let (joint, axis) = name
                    .rsplit_once('_')
                    .ok_or_else(|| Error::Schema(format!("unrecognised column `{name}`")))?;
                let axis = match axis {
                    "x" => 0,
                    "y" => 1,
                    "z" => 2,
                    _ => return Err(Error::Schema(format!("unrecognised column `{name}`"))),
                };
                let joint = skeleton
                    .joint_index(joint)
                    .ok_or_else(|| Error::Schema(format!("unknown joint `{joint}`")))?;
                if seen[joint][axis] {
                    return Err(Error::Schema(format!("duplicate column `{name}`")));
                }
                seen[joint][axis] = true;
                Column::Coord { joint, axis }
            }
        };
        columns.push(col);
    }
    let with_xy = seen.iter().filter(|s| s[0] && s[1]).count();
    let with_z = seen.iter().filter(|s| s[2]).count();
    if with_xy != n {
        return Err(Error::Schema(format!(
            "header provides x/y for {with_xy} joints, skeleton has {n}"
        )));
    }
    if with_z != 0 && with_z != n {
        return Err(Error::Schema(format!(
            "header provides z for {with_z} joints, expected 0 or {n}"
        )));
    }
    Ok((columns, with_z == n))
}

/// Parse keypoint text. Rows with missing, unparsable or non-finite values
/// (or an invalid depth in 3D files) are skipped and counted.
pub fn read_keypoints<R: Read>(reader: R, skeleton: &Skeleton) -> Result<PoseDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    let (columns, is_3d) = parse_header(&header, skeleton)?;
    let has_subject = columns.iter().any(|c| matches!(c, Column::Subject));
    let has_action = columns.iter().any(|c| matches!(c, Column::Action));
    let n = skeleton.num_joints();

    let mut frames = Vec::new();
    let mut subjects = Vec::new();
    let mut actions = Vec::new();
    let mut skipped = 0;
    for record in rdr.records() {
        let record = match record {
            Ok(r) => r,
            Err(e) if e.is_io_error() => return Err(e.into()),
            Err(_) => {
                skipped += 1;
                continue;
            }
        };
        if record.len() != columns.len() {
            skipped += 1;
            continue;
        }
        let mut coords = vec![[f64::NAN; 3]; n];
        let mut subject = String::new();
        let mut action = String::new();
        let mut ok = true;
        for (field, col) in record.iter().zip(&columns) {
            match *col {
                Column::Subject => subject = field.to_string(),
                Column::Action => action = field.to_string(),
                Column::Coord { joint, axis } => match field.parse::<f64>() {
                    Ok(v) if v.is_finite() => coords[joint][axis] = v,
                    _ => {
                        ok = false;
                        break;
                    }
                },
            }
        }
        if !ok || (is_3d && coords.iter().any(|c| !(c[2] > 0.0))) {
            skipped += 1;
            continue;
        }
        frames.push(coords);
        subjects.push(subject);
        actions.push(action);
    }
    if skipped > 0 {
        warn!("skipped {skipped} malformed keypoint rows");
    }

    let (frames2d, frames3d) = if is_3d {
        let f3: Vec<Pose3D> = frames.into_iter().map(Pose3D).collect();
        let f2 = f3.iter().map(perspective_project).collect::<Result<Vec<_>>>()?;
        (f2, Some(f3))
    } else {
        let f2 = frames
            .into_iter()
            .map(|c| Pose2D(c.into_iter().map(|p| [p[0], p[1]]).collect()))
            .collect();
        (f2, None)
    };
    Ok(PoseDataset {
        skeleton: skeleton.clone(),
        frames2d,
        frames3d,
        subjects: has_subject.then_some(subjects),
        actions: has_action.then_some(actions),
        skipped,
    })
}

pub fn load_dataset(path: impl AsRef<Path>, skeleton: &Skeleton) -> Result<PoseDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_keypoints(file, skeleton)
}

/// Write a dataset in the keypoint format. 3D frames are written when
/// present, otherwise the 2D frames.
pub fn write_keypoints<W: Write>(writer: W, dataset: &PoseDataset) -> Result<()> {
    let mut w = writer;
    writeln!(w, "# svma keypoints, {} frames", dataset.len()).map_err(|e| Error::io("<writer>", e))?;
    let mut csv = csv::Writer::from_writer(w);
    let names = dataset.skeleton.joint_names();
    let axes: &[&str] = if dataset.has_3d() { &["x", "y", "z"] } else { &["x", "y"] };
    let mut header: Vec<String> = Vec::new();
    if dataset.subjects.is_some() {
        header.push("subject".into());
    }
    if dataset.actions.is_some() {
        header.push("action".into());
    }
    for name in names {
        for a in axes {
            header.push(format!("{name}_{a}"));
        }
    }
    csv.write_record(&header)?;
    for i in 0..dataset.len() {
        let mut row: Vec<String> = Vec::with_capacity(header.len());
        if let Some(s) = &dataset.subjects {
            row.push(s[i].clone());
        }
        if let Some(a) = &dataset.actions {
            row.push(a[i].clone());
        }
        match &dataset.frames3d {
            Some(f3) => row.extend(f3[i].0.iter().flat_map(|p| p.iter().map(|v| v.to_string()))),
            None => row.extend(dataset.frames2d[i].0.iter().flat_map(|p| p.iter().map(|v| v.to_string()))),
        }
        csv.write_record(&row)?;
    }
    csv.flush().map_err(|e| Error::io("<writer>", e))?;
    Ok(())
}

pub fn save_dataset(path: impl AsRef<Path>, dataset: &PoseDataset) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_keypoints(&mut w, dataset)?;
    w.flush().map_err(|e| Error::io(path, e))
}
