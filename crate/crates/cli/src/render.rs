//! Static stick-figure rendering. One row per frame, one column per azimuth.
//!
//! Poses are root-centred, turned about the vertical axis by the panel's
//! azimuth and drawn orthographically with +Y up. Bone colours by side:
//! left `#1f77b4` (blue), right `#d62728` (red), centre `#7f7f7f` (grey).

use std::fmt::Write as _;

use image::{Rgb, RgbImage};
use svma::geometry::RotationY;
use svma::pose::Pose3D;
use svma::skeleton::{Side, Skeleton};

pub const LEFT: [u8; 3] = [0x1f, 0x77, 0xb4];
pub const RIGHT: [u8; 3] = [0xd6, 0x27, 0x28];
pub const CENTER: [u8; 3] = [0x7f, 0x7f, 0x7f];
const JOINT: [u8; 3] = [0x22, 0x22, 0x22];
const BORDER: [u8; 3] = [0xdd, 0xdd, 0xdd];

pub fn side_color(side: Side) -> [u8; 3] {
    match side {
        Side::Left => LEFT,
        Side::Right => RIGHT,
        Side::Center => CENTER,
    }
}

#[derive(Debug, Clone)]
pub struct Panel {
    pub frame: usize,
    pub azimuth_deg: f64,
    /// Pixel-space bones: endpoints and colour.
    pub bones: Vec<([f64; 2], [f64; 2], [u8; 3])>,
    pub joints: Vec<[f64; 2]>,
    /// Top-left corner of the panel.
    pub origin: [f64; 2],
}

#[derive(Debug, Clone)]
pub struct Figure {
    pub width: u32,
    pub height: u32,
    pub cell: u32,
    pub panels: Vec<Panel>,
}

fn view(pose: &Pose3D, root: usize, azimuth_deg: f64) -> Vec<[f64; 2]> {
    let m = RotationY::new(azimuth_deg.to_radians()).matrix();
    let r = pose.0[root];
    pose.0
        .iter()
        .map(|q| {
            let c = [q[0] - r[0], q[1] - r[1], q[2] - r[2]];
            // row-vector convention, as in training
            let x = c[0] * m[0][0] + c[1] * m[1][0] + c[2] * m[2][0];
            let y = c[0] * m[0][1] + c[1] * m[1][1] + c[2] * m[2][1];
            [x, y]
        })
        .collect()
}

/// Lay out `frames` (indices into `poses`) against `azimuths`, with one
/// shared scale so panels are comparable.
pub fn layout(poses: &[(usize, &Pose3D)], skeleton: &Skeleton, azimuths: &[f64], cell: u32) -> Figure {
    let root = skeleton.root_index();
    let views: Vec<Vec<Vec<[f64; 2]>>> = poses
        .iter()
        .map(|(_, p)| azimuths.iter().map(|&a| view(p, root, a)).collect())
        .collect();
    let extent = views
        .iter()
        .flatten()
        .flatten()
        .map(|p| p[0].abs().max(p[1].abs()))
        .fold(0.0_f64, f64::max);
    let half = cell as f64 / 2.0;
    let scale = if extent > 0.0 { 0.85 * half / extent } else { 1.0 };
    let mut panels = Vec::new();
    for (row, ((frame, _), per_az)) in poses.iter().zip(&views).enumerate() {
        for (col, (pts, &az)) in per_az.iter().zip(azimuths).enumerate() {
            let origin = [col as f64 * cell as f64, row as f64 * cell as f64];
            let px: Vec<[f64; 2]> = pts
                .iter()
                .map(|p| [origin[0] + half + scale * p[0], origin[1] + half - scale * p[1]])
                .collect();
            let bones = skeleton
                .bone_edges()
                .iter()
                .enumerate()
                .map(|(e, &(a, b))| (px[a], px[b], side_color(skeleton.bone_side(e))))
                .collect();
            panels.push(Panel {
                frame: *frame,
                azimuth_deg: az,
                bones,
                joints: px,
                origin,
            });
        }
    }
    Figure {
        width: cell * azimuths.len() as u32,
        height: cell * poses.len() as u32,
        cell,
        panels,
    }
}

fn hex(c: [u8; 3]) -> String {
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

pub fn to_svg(fig: &Figure) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
        w = fig.width,
        h = fig.height
    );
    let _ = writeln!(s, r#"<rect width="{}" height="{}" fill="white"/>"#, fig.width, fig.height);
    for p in &fig.panels {
        let _ = writeln!(
            s,
            r#"<g class="panel" data-frame="{}" data-azimuth="{}">"#,
            p.frame, p.azimuth_deg
        );
        let _ = writeln!(
            s,
            r#"<rect x="{}" y="{}" width="{c}" height="{c}" fill="none" stroke="{}"/>"#,
            p.origin[0],
            p.origin[1],
            hex(BORDER),
            c = fig.cell
        );
        for (a, b, color) in &p.bones {
            let _ = writeln!(
                s,
                r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{}" stroke-width="3" stroke-linecap="round"/>"#,
                a[0],
                a[1],
                b[0],
                b[1],
                hex(*color)
            );
        }
        for j in &p.joints {
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{}"/>"#, j[0], j[1], hex(JOINT));
        }
        let _ = writeln!(
            s,
            r##"<text x="{}" y="{}" font-family="sans-serif" font-size="11" fill="#444">frame {} / {} deg</text>"##,
            p.origin[0] + 4.0,
            p.origin[1] + 13.0,
            p.frame,
            p.azimuth_deg
        );
        s.push_str("</g>\n");
    }
    s.push_str("</svg>\n");
    s
}

fn blend(img: &mut RgbImage, x: i64, y: i64, color: [u8; 3], alpha: f64) {
    if x < 0 || y < 0 || x >= img.width() as i64 || y >= img.height() as i64 || alpha <= 0.0 {
        return;
    }
    let px = img.get_pixel_mut(x as u32, y as u32);
    for k in 0..3 {
        let v = px.0[k] as f64 * (1.0 - alpha) + color[k] as f64 * alpha;
        px.0[k] = v.round().clamp(0.0, 255.0) as u8;
    }
}

fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 > 0.0 { ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0) } else { 0.0 };
    let d = [ap[0] - t * ab[0], ap[1] - t * ab[1]];
    (d[0] * d[0] + d[1] * d[1]).sqrt()
}

/// Antialiased capsule of half-width `hw`.
fn draw_segment(img: &mut RgbImage, a: [f64; 2], b: [f64; 2], hw: f64, color: [u8; 3]) {
    let x0 = (a[0].min(b[0]) - hw - 1.0).floor() as i64;
    let x1 = (a[0].max(b[0]) + hw + 1.0).ceil() as i64;
    let y0 = (a[1].min(b[1]) - hw - 1.0).floor() as i64;
    let y1 = (a[1].max(b[1]) + hw + 1.0).ceil() as i64;
    for y in y0..=y1 {
        for x in x0..=x1 {
            let d = segment_distance([x as f64 + 0.5, y as f64 + 0.5], a, b);
            blend(img, x, y, color, (hw + 0.5 - d).clamp(0.0, 1.0));
        }
    }
}

pub fn to_image(fig: &Figure) -> RgbImage {
    let mut img = RgbImage::from_pixel(fig.width.max(1), fig.height.max(1), Rgb([255, 255, 255]));
    for p in &fig.panels {
        let c = fig.cell as f64;
        let [ox, oy] = p.origin;
        for (a, b) in [
            ([ox, oy], [ox + c - 1.0, oy]),
            ([ox, oy + c - 1.0], [ox + c - 1.0, oy + c - 1.0]),
            ([ox, oy], [ox, oy + c - 1.0]),
            ([ox + c - 1.0, oy], [ox + c - 1.0, oy + c - 1.0]),
        ] {
            draw_segment(&mut img, a, b, 0.3, BORDER);
        }
        for (a, b, color) in &p.bones {
            draw_segment(&mut img, *a, *b, 1.5, *color);
        }
        for j in &p.joints {
            draw_segment(&mut img, *j, *j, 2.5, JOINT);
        }
    }
    img
}

#[cfg(test)]
mod tests {
    use super::*;
    use svma::synth::{full_sweep, synthesize_poses};

    #[test]
    fn sides_get_distinct_colors() {
        assert_ne!(LEFT, RIGHT);
        assert_ne!(LEFT, CENTER);
        assert_ne!(RIGHT, CENTER);
    }

    #[test]
    fn one_panel_per_frame_and_azimuth() {
        let skel = Skeleton::canonical();
        let ds = synthesize_poses(2, 1, &skel, &full_sweep(4)).unwrap();
        let f3 = ds.frames3d.unwrap();
        let poses: Vec<(usize, &Pose3D)> = f3.iter().enumerate().collect();
        let fig = layout(&poses, &skel, &[0.0, 90.0, 180.0], 100);
        assert_eq!(fig.panels.len(), 6);
        assert_eq!((fig.width, fig.height), (300, 200));
        // everything stays inside its own cell
        for p in &fig.panels {
            for j in &p.joints {
                assert!(j[0] > p.origin[0] && j[0] < p.origin[0] + 100.0);
                assert!(j[1] > p.origin[1] && j[1] < p.origin[1] + 100.0);
            }
        }
        let svg = to_svg(&fig);
        assert_eq!(svg.matches("class=\"panel\"").count(), 6);
        assert!(svg.contains("#1f77b4") && svg.contains("#d62728"));
    }

    #[test]
    fn quarter_turn_swaps_width_into_depth() {
        let skel = Skeleton::canonical();
        let mut p = vec![[0.0, 0.0, 10.0]; skel.num_joints()];
        p[1] = [1.0, 0.0, 10.0];
        let v = view(&Pose3D(p), 0, 90.0);
        assert!(v[1][0].abs() < 1e-12);
    }
}
