//! Local planar geometry. `x` is easting and `y` is northing, both in meters.
//! Bearings are compass bearings: 0° points north (+y), increasing clockwise.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Compass bearing from `self` towards `other`, in [0, 360).
    pub fn bearing_to(&self, other: &Point) -> f64 {
        let deg = (other.x - self.x).atan2(other.y - self.y).to_degrees();
        deg.rem_euclid(360.0)
    }

    /// Point reached by moving `distance` meters along compass `bearing_deg`.
    pub fn offset(&self, bearing_deg: f64, distance: f64) -> Point {
        let rad = bearing_deg.to_radians();
        Point::new(self.x + distance * rad.sin(), self.y + distance * rad.cos())
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Point {
        Point::new(self.x + dx, self.y + dy)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Area {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Area {
    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }

    pub fn area_m2(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn diagonal(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn contains_with_margin(&self, p: &Point, margin: f64) -> bool {
        p.x >= self.min_x - margin
            && p.x <= self.max_x + margin
            && p.y >= self.min_y - margin
            && p.y <= self.max_y + margin
    }
}

/// Signed angular difference `a - b` wrapped into [-180, 180].
pub fn wrap_angle_deg(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    if d > 180.0 {
        d - 360.0
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bearings_follow_compass_convention() {
        let o = Point::new(0.0, 0.0);
        assert!((o.bearing_to(&Point::new(0.0, 1.0)) - 0.0).abs() < 1e-12);
        assert!((o.bearing_to(&Point::new(1.0, 0.0)) - 90.0).abs() < 1e-12);
        assert!((o.bearing_to(&Point::new(0.0, -1.0)) - 180.0).abs() < 1e-12);
        assert!((o.bearing_to(&Point::new(-1.0, 0.0)) - 270.0).abs() < 1e-12);
    }

    #[test]
    fn offset_inverts_bearing() {
        let o = Point::new(10.0, -5.0);
        let p = o.offset(123.0, 50.0);
        assert!((o.distance(&p) - 50.0).abs() < 1e-9);
        assert!((o.bearing_to(&p) - 123.0).abs() < 1e-9);
    }

    #[test]
    fn wrap() {
        assert_eq!(wrap_angle_deg(350.0, 10.0), -20.0);
        assert_eq!(wrap_angle_deg(10.0, 350.0), 20.0);
        assert_eq!(wrap_angle_deg(180.0, 0.0), 180.0);
    }
}
