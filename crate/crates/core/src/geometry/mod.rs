//! Boxes, overlap measures and rotated patch sampling.

mod patch;
mod polygon;

pub use patch::{
    extract_patch, extract_patch_with, rotate_image, warp_similarity, BorderFill, Interpolation,
    PatchSampling,
};
pub use polygon::{convex_hull, min_area_rect, polygon_area, polygon_intersection};

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Wraps an angle into `(-π, π]`.
pub fn normalize_angle(theta: f64) -> f64 {
    let mut t = theta % (2.0 * PI);
    if t <= -PI {
        t += 2.0 * PI;
    } else if t > PI {
        t -= 2.0 * PI;
    }
    t
}

/// Axis-aligned box in center convention.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl AxisBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        if !(w > 0.0 && h > 0.0) || ![x, y, w, h].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidBox(format!("({x}, {y}, {w}, {h})")));
        }
        Ok(Self { x, y, w, h })
    }

    /// From the OTB `x,y,w,h` top-left convention.
    pub fn from_top_left(left: f64, top: f64, w: f64, h: f64) -> Result<Self> {
        Self::new(left + w / 2.0, top + h / 2.0, w, h)
    }

    /// `max(w/h, h/w)`
    pub fn aspect_ratio(&self) -> f64 {
        (self.w / self.h).max(self.h / self.w)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }
}

/// Object pose: center, size and in-plane rotation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientedBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
    pub theta: f64,
}

impl OrientedBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64, theta: f64) -> Result<Self> {
        AxisBox::new(x, y, w, h)?;
        if !theta.is_finite() {
            return Err(Error::InvalidBox(format!("non-finite angle {theta}")));
        }
        Ok(Self {
            x,
            y,
            w,
            h,
            theta: normalize_angle(theta),
        })
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x, self.y)
    }

    pub fn aspect_ratio(&self) -> f64 {
        (self.w / self.h).max(self.h / self.w)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// Size-only view, dropping the angle.
    pub fn axis(&self) -> AxisBox {
        AxisBox {
            x: self.x,
            y: self.y,
            w: self.w,
            h: self.h,
        }
    }

    /// Corners in counter-clockwise order (y axis pointing down, so the
    /// polygon has positive shoelace area).
    pub fn corners(&self) -> [(f64, f64); 4] {
        let (s, c) = self.theta.sin_cos();
        let hw = self.w / 2.0;
        let hh = self.h / 2.0;
        let local = [(-hw, -hh), (hw, -hh), (hw, hh), (-hw, hh)];
        local.map(|(u, v)| (self.x + c * u - s * v, self.y + s * u + c * v))
    }

    /// Whether a point lies inside the (closed) box.
    pub fn contains(&self, px: f64, py: f64) -> bool {
        let (s, c) = self.theta.sin_cos();
        let dx = px - self.x;
        let dy = py - self.y;
        let u = c * dx + s * dy;
        let v = -s * dx + c * dy;
        u.abs() <= self.w / 2.0 && v.abs() <= self.h / 2.0
    }
}

impl From<AxisBox> for OrientedBox {
    fn from(b: AxisBox) -> Self {
        OrientedBox {
            x: b.x,
            y: b.y,
            w: b.w,
            h: b.h,
            theta: 0.0,
        }
    }
}

/// Side of the square context crop around a box: `sqrt((w+p)(h+p))` with
/// `p = (w+h)/4`.
pub fn context_side(b: &AxisBox) -> f64 {
    let p = (b.w + b.h) / 4.0;
    ((b.w + p) * (b.h + p)).sqrt()
}

/// Intersection over union of two oriented rectangles, by convex clipping.
pub fn rotated_iou(a: &OrientedBox, b: &OrientedBox) -> f64 {
    let pa = a.corners();
    let pb = b.corners();
    let inter = polygon_area(&polygon_intersection(&pa, &pb));
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// Closed-form IoU of two axis-aligned boxes.
pub fn axis_iou(a: &AxisBox, b: &AxisBox) -> f64 {
    let ix = ((a.x + a.w / 2.0).min(b.x + b.w / 2.0) - (a.x - a.w / 2.0).max(b.x - b.w / 2.0))
        .max(0.0);
    let iy = ((a.y + a.h / 2.0).min(b.y + b.h / 2.0) - (a.y - a.h / 2.0).max(b.y - b.h / 2.0))
        .max(0.0);
    let inter = ix * iy;
    inter / (a.area() + b.area() - inter)
}

pub fn center_distance(a: &OrientedBox, b: &OrientedBox) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}
