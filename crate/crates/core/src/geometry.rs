//! Exact rotated-rectangle geometry: corners, convex clipping, areas and IoU.

use nalgebra::Point2;

use crate::box_model::{RBox2D, RBox3D};

/// Points within this distance of a clip edge count as inside it.
pub const CLIP_TOL: f64 = 1e-12;

/// A convex polygon with counter-clockwise vertices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConvexPolygon {
    pub vertices: Vec<Point2<f64>>,
}

impl ConvexPolygon {
    pub fn new(vertices: Vec<Point2<f64>>) -> Self {
        ConvexPolygon { vertices }
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.len() < 3
    }

    /// Shoelace area; zero for fewer than three vertices.
    pub fn area(&self) -> f64 {
        let n = self.vertices.len();
        if n < 3 {
            return 0.0;
        }
        let mut twice = 0.0;
        for i in 0..n {
            let p = self.vertices[i];
            let q = self.vertices[(i + 1) % n];
            twice += p.x * q.y - q.x * p.y;
        }
        0.5 * twice.abs()
    }

    pub fn centroid(&self) -> Point2<f64> {
        let n = self.vertices.len().max(1) as f64;
        let s = self.vertices.iter().fold(nalgebra::Vector2::zeros(), |acc, p| acc + p.coords);
        Point2::from(s / n)
    }

    /// True when every turn is counter-clockwise (or straight).
    pub fn is_convex_ccw(&self) -> bool {
        let n = self.vertices.len();
        if n < 3 {
            return true;
        }
        (0..n).all(|i| {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let c = self.vertices[(i + 2) % n];
            cross(b - a, c - b) >= -1e-12
        })
    }
}

fn cross(u: nalgebra::Vector2<f64>, v: nalgebra::Vector2<f64>) -> f64 {
    u.x * v.y - u.y * v.x
}

/// Corners of a box, counter-clockwise, starting at the `(+w/2, +h/2)` corner.
pub fn box_vertices(b: &RBox2D) -> ConvexPolygon {
    let (s, c) = b.theta.sin_cos();
    let (hw, hh) = (b.w / 2.0, b.h / 2.0);
    let corners = [(hw, hh), (-hw, hh), (-hw, -hh), (hw, -hh)];
    ConvexPolygon::new(
        corners
            .iter()
            .map(|&(u, v)| Point2::new(b.x + c * u - s * v, b.y + s * u + c * v))
            .collect(),
    )
}

/// Intersection of two convex polygons by successive half-plane clipping.
///
/// Returns an empty polygon when the intersection has no area.
pub fn clip_convex(subject: &ConvexPolygon, clip: &ConvexPolygon) -> ConvexPolygon {
    let mut out = subject.vertices.clone();
    let n = clip.vertices.len();
    if n < 3 {
        return ConvexPolygon::default();
    }
    for i in 0..n {
        if out.is_empty() {
            break;
        }
        let a = clip.vertices[i];
        let b = clip.vertices[(i + 1) % n];
        let edge = b - a;
        let len = edge.norm();
        if len == 0.0 {
            continue;
        }
        let dist = |p: &Point2<f64>| cross(edge, p - a) / len;
        let input = std::mem::take(&mut out);
        let m = input.len();
        for j in 0..m {
            let cur = input[j];
            let prev = input[(j + m - 1) % m];
            let (dc, dp) = (dist(&cur), dist(&prev));
            let cur_in = dc >= -CLIP_TOL;
            let prev_in = dp >= -CLIP_TOL;
            if cur_in {
                if !prev_in {
                    out.push(prev + (cur - prev) * (dp / (dp - dc)));
                }
                out.push(cur);
            } else if prev_in {
                out.push(prev + (cur - prev) * (dp / (dp - dc)));
            }
        }
    }
    out.dedup_by(|a, b| (*a - *b).norm() <= CLIP_TOL);
    if out.len() > 1 && (out[0] - out[out.len() - 1]).norm() <= CLIP_TOL {
        out.pop();
    }
    if out.len() < 3 {
        return ConvexPolygon::default();
    }
    ConvexPolygon::new(out)
}

/// Overlap area of two rotated boxes.
pub fn intersection_area(a: &RBox2D, b: &RBox2D) -> f64 {
    clip_convex(&box_vertices(a), &box_vertices(b)).area()
}

/// Exact IoU of two rotated boxes.
pub fn skew_iou_2d(a: &RBox2D, b: &RBox2D) -> f64 {
    let inter = intersection_area(a, b);
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// IoU of two yaw-only cubes: footprint overlap times vertical overlap.
pub fn iou_3d_yaw(a: &RBox3D, b: &RBox3D) -> f64 {
    let top = (a.z + a.l / 2.0).min(b.z + b.l / 2.0);
    let bottom = (a.z - a.l / 2.0).max(b.z - b.l / 2.0);
    let dz = (top - bottom).max(0.0);
    let inter = intersection_area(&a.bev(), &b.bev()) * dz;
    let union = a.volume() + b.volume() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// Point-in-box test used by the center-inside filter of label assignment.
pub fn contains_point(b: &RBox2D, x: f64, y: f64) -> bool {
    let (s, c) = b.theta.sin_cos();
    let (dx, dy) = (x - b.x, y - b.y);
    let u = c * dx + s * dy;
    let v = -s * dx + c * dy;
    u.abs() <= b.w / 2.0 && v.abs() <= b.h / 2.0
}
