//! Planar points, axis-aligned rectangles and the segment test used for
//! occlusion.

use serde::{Deserialize, Serialize};

use crate::num::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2<T = f64> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> Point2<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn dist_sq(&self, other: &Self) -> T {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn dist(&self, other: &Self) -> T {
        self.dist_sq(other).sqrt()
    }

    /// Arithmetic mean of a non-empty set of points.
    pub fn centroid(points: &[Self]) -> Option<Self> {
        if points.is_empty() {
            return None;
        }
        let (sx, sy) = points
            .iter()
            .fold((T::zero(), T::zero()), |(sx, sy), p| (sx + p.x, sy + p.y));
        let n = T::from_usize_lossy(points.len());
        Some(Self::new(sx / n, sy / n))
    }

    /// Orders by distance to `target`, ties broken by smaller x then smaller y.
    pub fn nearer_than(&self, other: &Self, target: &Self) -> bool {
        let a = self.dist_sq(target);
        let b = other.dist_sq(target);
        if a != b {
            return a < b;
        }
        if self.x != other.x {
            return self.x < other.x;
        }
        self.y < other.y
    }
}

/// Axis-aligned rectangle, `min <= max` on both axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect<T = f64> {
    pub x_min: T,
    pub y_min: T,
    pub x_max: T,
    pub y_max: T,
}

impl<T: Scalar> Rect<T> {
    pub fn new(x_min: T, y_min: T, x_max: T, y_max: T) -> Self {
        Self {
            x_min,
            y_min,
            x_max,
            y_max,
        }
    }

    pub fn width(&self) -> T {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> T {
        self.y_max - self.y_min
    }

    pub fn center(&self) -> Point2<T> {
        let two = T::one() + T::one();
        Point2::new(
            (self.x_min + self.x_max) / two,
            (self.y_min + self.y_max) / two,
        )
    }

    /// Closed containment, with a small tolerance on the boundary.
    pub fn contains(&self, p: &Point2<T>) -> bool {
        p.x >= self.x_min - T::EPS
            && p.x <= self.x_max + T::EPS
            && p.y >= self.y_min - T::EPS
            && p.y <= self.y_max + T::EPS
    }

    /// Open containment: boundary points are not inside.
    pub fn strictly_contains(&self, p: &Point2<T>) -> bool {
        p.x > self.x_min + T::EPS
            && p.x < self.x_max - T::EPS
            && p.y > self.y_min + T::EPS
            && p.y < self.y_max - T::EPS
    }

    pub fn contains_rect(&self, other: &Self) -> bool {
        self.contains(&Point2::new(other.x_min, other.y_min))
            && self.contains(&Point2::new(other.x_max, other.y_max))
    }

    /// Whether the segment `a -> b` passes through the open interior.
    ///
    /// Clips the segment against the closed rectangle (Liang-Barsky); the
    /// interior is hit iff the clipped chord has positive length and its
    /// midpoint lies strictly inside. A chord of a convex set with positive
    /// length lies in the boundary only when it runs along an edge.
    pub fn segment_hits_interior(&self, a: &Point2<T>, b: &Point2<T>) -> bool {
        let dx = b.x - a.x;
        let dy = b.y - a.y;
        let mut t0 = T::zero();
        let mut t1 = T::one();
        let checks = [
            (-dx, a.x - self.x_min),
            (dx, self.x_max - a.x),
            (-dy, a.y - self.y_min),
            (dy, self.y_max - a.y),
        ];
        for (p, q) in checks {
            if p == T::zero() {
                if q < T::zero() {
                    return false;
                }
                continue;
            }
            let r = q / p;
            if p < T::zero() {
                if r > t1 {
                    return false;
                }
                if r > t0 {
                    t0 = r;
                }
            } else {
                if r < t0 {
                    return false;
                }
                if r < t1 {
                    t1 = r;
                }
            }
        }
        if t1 - t0 <= T::EPS {
            return false;
        }
        let two = T::one() + T::one();
        let tm = (t0 + t1) / two;
        let mid = Point2::new(a.x + dx * tm, a.y + dy * tm);
        self.strictly_contains(&mid)
    }
}
