use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point or displacement in the plane.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

pub type Vec2 = Point;

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, o: Self) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the cross product.
    pub fn cross(self, o: Self) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    /// Counter-clockwise rotation by a quarter turn.
    pub fn perp(self) -> Self {
        Self::new(-self.y, self.x)
    }

    pub fn normalized(self) -> Self {
        let n = self.norm();
        Self::new(self.x / n, self.y / n)
    }

    pub fn dist(self, o: Self) -> f64 {
        (self - o).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Point {
    fn add_assign(&mut self, o: Self) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Point {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self::new(self.x * s, self.y * s)
    }
}

impl Neg for Point {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

/// Closed axis-aligned rectangle `[x_lo, x_hi] × [y_lo, y_hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisRect {
    pub x_lo: f64,
    pub x_hi: f64,
    pub y_lo: f64,
    pub y_hi: f64,
}

impl AxisRect {
    pub fn new(x_lo: f64, x_hi: f64, y_lo: f64, y_hi: f64) -> Result<Self> {
        let ok = [x_lo, x_hi, y_lo, y_hi].iter().all(|v| !v.is_nan()) && x_lo < x_hi && y_lo < y_hi;
        if !ok {
            return Err(Error::InvalidRect { x_lo, x_hi, y_lo, y_hi });
        }
        Ok(Self { x_lo, x_hi, y_lo, y_hi })
    }

    pub fn unit() -> Self {
        Self { x_lo: 0.0, x_hi: 1.0, y_lo: 0.0, y_hi: 1.0 }
    }

    pub fn width(&self) -> f64 {
        self.x_hi - self.x_lo
    }

    pub fn height(&self) -> f64 {
        self.y_hi - self.y_lo
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> Point {
        Point::new(0.5 * (self.x_lo + self.x_hi), 0.5 * (self.y_lo + self.y_hi))
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.x_lo && p.x <= self.x_hi && p.y >= self.y_lo && p.y <= self.y_hi
    }

    /// Distance from an interior point to the boundary (negative outside).
    pub fn inner_distance(&self, p: Point) -> f64 {
        (p.x - self.x_lo).min(self.x_hi - p.x).min(p.y - self.y_lo).min(self.y_hi - p.y)
    }

    /// Grows (or shrinks, for negative `m`) every side by `m`.
    pub fn expand(&self, m: f64) -> Result<Self> {
        Self::new(self.x_lo - m, self.x_hi + m, self.y_lo - m, self.y_hi + m)
    }

    pub fn intersects(&self, o: &Self) -> bool {
        self.x_lo <= o.x_hi && o.x_lo <= self.x_hi && self.y_lo <= o.y_hi && o.y_lo <= self.y_hi
    }

    pub fn corners(&self) -> [Point; 4] {
        [
            Point::new(self.x_lo, self.y_lo),
            Point::new(self.x_hi, self.y_lo),
            Point::new(self.x_hi, self.y_hi),
            Point::new(self.x_lo, self.y_hi),
        ]
    }

    /// Maps `(s, t) ∈ [0,1]²` into the rectangle.
    pub fn lerp(&self, s: f64, t: f64) -> Point {
        Point::new(self.x_lo + s * self.width(), self.y_lo + t * self.height())
    }
}

/// Halton point `i` in bases 2 and 3.
pub fn halton(i: u64) -> (f64, f64) {
    (radical_inverse(i, 2), radical_inverse(i, 3))
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

/// Area of a simple polygon, positive for counter-clockwise orientation.
pub fn signed_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    let mut s = 0.0;
    for i in 0..n {
        s += poly[i].cross(poly[(i + 1) % n]);
    }
    0.5 * s
}

/// Parameter range `(t0, t1)` of the part of segment `a`-`b` inside `rect`, if any.
pub fn clip_segment(a: Point, b: Point, rect: &AxisRect) -> Option<(f64, f64)> {
    let d = b - a;
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for (p, q) in [
        (-d.x, a.x - rect.x_lo),
        (d.x, rect.x_hi - a.x),
        (-d.y, a.y - rect.y_lo),
        (d.y, rect.y_hi - a.y),
    ] {
        if p == 0.0 {
            if q < 0.0 {
                return None;
            }
        } else {
            let r = q / p;
            if p < 0.0 {
                t0 = t0.max(r);
            } else {
                t1 = t1.min(r);
            }
        }
    }
    (t1 > t0).then_some((t0, t1))
}

/// Length of the part of segment `a`-`b` inside `rect`.
pub fn clipped_length(a: Point, b: Point, rect: &AxisRect) -> f64 {
    clip_segment(a, b, rect).map_or(0.0, |(t0, t1)| (t1 - t0) * (b - a).norm())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rect_validation() {
        assert!(AxisRect::new(0.0, 0.0, 0.0, 1.0).is_err());
        assert!(AxisRect::new(0.0, 1.0, f64::NAN, 1.0).is_err());
        let r = AxisRect::new(-1.0, 1.0, 0.0, 2.0).unwrap();
        assert_eq!(r.area(), 4.0);
        assert_eq!(r.center(), Point::new(0.0, 1.0));
        assert_eq!(r.inner_distance(Point::new(0.5, 1.0)), 0.5);
    }

    #[test]
    fn halton_first_points() {
        assert_eq!(halton(1), (0.5, 1.0 / 3.0));
        assert_eq!(halton(2), (0.25, 2.0 / 3.0));
        assert_eq!(halton(3).0, 0.75);
    }

    #[test]
    fn polygon_area_and_clipping() {
        let sq = AxisRect::unit().corners();
        assert_eq!(signed_area(&sq), 1.0);
        let r = AxisRect::unit();
        let l = clipped_length(Point::new(-1.0, 0.5), Point::new(2.0, 0.5), &r);
        assert!((l - 1.0).abs() < 1e-15);
        assert_eq!(clipped_length(Point::new(-1.0, 2.0), Point::new(2.0, 2.0), &r), 0.0);
        let d = clipped_length(Point::new(-1.0, -1.0), Point::new(2.0, 2.0), &r);
        assert!((d - 2f64.sqrt()).abs() < 1e-14);
    }
}
