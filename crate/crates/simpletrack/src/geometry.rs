//! Axis-aligned box geometry: IoU and the GIoU distance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned rectangle in pixel coordinates, stored as top-left corner
/// plus width/height (the MOTChallenge convention). Corner form is derived
/// on demand.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    /// Build a validated box; width and height must be positive and all
    /// fields finite.
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        let b = Self { x, y, w, h };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let finite =
            self.x.is_finite() && self.y.is_finite() && self.w.is_finite() && self.h.is_finite();
        if !finite || self.w <= 0.0 || self.h <= 0.0 {
            return Err(Error::InvalidBox {
                x: self.x,
                y: self.y,
                w: self.w,
                h: self.h,
            });
        }
        Ok(())
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// Center point (cx, cy).
    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    /// Corner form (x1, y1, x2, y2).
    pub fn corners(&self) -> (f64, f64, f64, f64) {
        (self.x, self.y, self.x + self.w, self.y + self.h)
    }

    /// Box with the same size centered at (cx, cy).
    pub fn from_center(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self> {
        Self::new(cx - w / 2.0, cy - h / 2.0, w, h)
    }
}

// All areas below are computed from corner coordinates so that identical
// boxes give bitwise-identical intersection, union, and enclosing areas;
// that keeps iou(a, a) == 1 and giou_distance(a, a) == 0 exact.
fn overlap_areas(a: &BoundingBox, b: &BoundingBox) -> (f64, f64, f64) {
    let (ax1, ay1, ax2, ay2) = a.corners();
    let (bx1, by1, bx2, by2) = b.corners();
    let iw = (ax2.min(bx2) - ax1.max(bx1)).max(0.0);
    let ih = (ay2.min(by2) - ay1.max(by1)).max(0.0);
    let inter = iw * ih;
    let area_a = (ax2 - ax1) * (ay2 - ay1);
    let area_b = (bx2 - bx1) * (by2 - by1);
    let union = area_a + area_b - inter;
    let enclosing = (ax2.max(bx2) - ax1.min(bx1)) * (ay2.max(by2) - ay1.min(by1));
    (inter, union, enclosing)
}

/// Intersection over union of two boxes, in [0, 1].
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> Result<f64> {
    a.validate()?;
    b.validate()?;
    let (inter, union, _) = overlap_areas(a, b);
    Ok(inter / union)
}

/// GIoU distance of two boxes: `1 - (IoU - |C \ (A u B)| / |C|)` where C is
/// the minimum enclosing rectangle. Zero iff the boxes are identical, and
/// strictly below 2 for any valid pair.
pub fn giou_distance(a: &BoundingBox, b: &BoundingBox) -> Result<f64> {
    a.validate()?;
    b.validate()?;
    let (inter, union, enclosing) = overlap_areas(a, b);
    let giou = inter / union - (enclosing - union) / enclosing;
    Ok(1.0 - giou)
}
