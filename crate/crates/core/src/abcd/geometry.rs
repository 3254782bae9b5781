//! Convex hull and minimum-area enclosing rectangle of a pixel mask.
//!
//! Pixels are unit squares: pixel (x, y) covers [x, x+1] × [y, y+1]. The hull
//! is taken over the corners of boundary pixels so that an `n`-pixel-wide
//! rectangle measures `n`, not `n − 1`. Angles are in image coordinates
//! (x right, y down), in degrees.

use crate::imaging::BinaryMask;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Andrew's monotone chain. Returns the hull counter-clockwise (in a y-up frame)
/// without repeating the first point; collinear points are dropped.
pub fn convex_hull(mut points: Vec<Point>) -> Vec<Point> {
    points.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    points.dedup();
    if points.len() < 3 {
        return points;
    }
    let mut hull: Vec<Point> = Vec::with_capacity(points.len() * 2);
    for &p in &points {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in points.iter().rev().skip(1) {
        while hull.len() >= lower_len && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

/// Corner points of every boundary pixel (foreground with a background 4-neighbor).
pub fn boundary_corners(mask: &BinaryMask) -> Vec<Point> {
    let mut pts = Vec::new();
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            if !mask.get(x, y) {
                continue;
            }
            let (xi, yi) = (x as i64, y as i64);
            let edge = !mask.get_signed(xi - 1, yi)
                || !mask.get_signed(xi + 1, yi)
                || !mask.get_signed(xi, yi - 1)
                || !mask.get_signed(xi, yi + 1);
            if edge {
                let (fx, fy) = (x as f64, y as f64);
                pts.extend([Point::new(fx, fy), Point::new(fx + 1.0, fy), Point::new(fx, fy + 1.0), Point::new(fx + 1.0, fy + 1.0)]);
            }
        }
    }
    pts
}

/// Rectangle with center, side lengths and orientation. `length` is measured
/// along the direction `angle_deg`, `breadth` perpendicular to it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedRect {
    pub center: Point,
    pub length: f64,
    pub breadth: f64,
    /// Orientation in (−45°, 45°].
    pub angle_deg: f64,
}

impl OrientedRect {
    pub fn area(&self) -> f64 {
        self.length * self.breadth
    }

    pub fn major(&self) -> f64 {
        self.length.max(self.breadth)
    }

    pub fn minor(&self) -> f64 {
        self.length.min(self.breadth)
    }

    pub fn corners(&self) -> [Point; 4] {
        let t = self.angle_deg.to_radians();
        let (u, v) = ((t.cos(), t.sin()), (-t.sin(), t.cos()));
        let (hl, hb) = (self.length / 2.0, self.breadth / 2.0);
        [(-hl, -hb), (hl, -hb), (hl, hb), (-hl, hb)]
            .map(|(a, b)| Point::new(self.center.x + a * u.0 + b * v.0, self.center.y + a * u.1 + b * v.1))
    }
}

/// Minimum-area enclosing rectangle of a convex polygon.
///
/// One side of the optimal rectangle is collinear with a hull edge, so every
/// edge direction is tried as a caliper orientation and the smallest box kept.
pub fn min_area_rect(hull: &[Point]) -> Option<OrientedRect> {
    match hull.len() {
        0 => return None,
        1 => return Some(OrientedRect { center: hull[0], length: 0.0, breadth: 0.0, angle_deg: 0.0 }),
        _ => {}
    }
    let mut best: Option<(f64, OrientedRect)> = None;
    for i in 0..hull.len() {
        let (a, b) = (hull[i], hull[(i + 1) % hull.len()]);
        let (dx, dy) = (b.x - a.x, b.y - a.y);
        let norm = (dx * dx + dy * dy).sqrt();
        if norm == 0.0 {
            continue;
        }
        let (ux, uy) = (dx / norm, dy / norm);
        let (vx, vy) = (-uy, ux);
        let (mut umin, mut umax, mut vmin, mut vmax) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for p in hull {
            let pu = p.x * ux + p.y * uy;
            let pv = p.x * vx + p.y * vy;
            umin = umin.min(pu);
            umax = umax.max(pu);
            vmin = vmin.min(pv);
            vmax = vmax.max(pv);
        }
        let (length, breadth) = (umax - umin, vmax - vmin);
        let area = length * breadth;
        if best.as_ref().is_some_and(|(a, _)| *a <= area + 1e-9) {
            continue;
        }
        let (cu, cv) = ((umin + umax) / 2.0, (vmin + vmax) / 2.0);
        let center = Point::new(cu * ux + cv * vx, cu * uy + cv * vy);
        best = Some((area, normalize(center, length, breadth, uy.atan2(ux).to_degrees())));
    }
    best.map(|(_, r)| r)
}

/// Fold the orientation into (−45°, 45°], swapping sides for quarter turns.
fn normalize(center: Point, mut length: f64, mut breadth: f64, mut angle: f64) -> OrientedRect {
    while angle > 45.0 {
        angle -= 90.0;
        std::mem::swap(&mut length, &mut breadth);
    }
    while angle <= -45.0 {
        angle += 90.0;
        std::mem::swap(&mut length, &mut breadth);
    }
    OrientedRect { center, length, breadth, angle_deg: angle }
}

pub fn mask_min_area_rect(mask: &BinaryMask) -> Option<OrientedRect> {
    min_area_rect(&convex_hull(boundary_corners(mask)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hull_of_square_with_interior_points() {
        let pts = vec![
            Point::new(0.0, 0.0),
            Point::new(2.0, 0.0),
            Point::new(2.0, 2.0),
            Point::new(0.0, 2.0),
            Point::new(1.0, 1.0),
            Point::new(1.0, 0.0),
        ];
        let hull = convex_hull(pts);
        assert_eq!(hull.len(), 4);
    }

    #[test]
    fn rect_of_axis_aligned_block() {
        let m = BinaryMask::from_fn(200, 200, |x, y| (40..160).contains(&x) && (60..140).contains(&y));
        let r = mask_min_area_rect(&m).unwrap();
        assert!(r.angle_deg.abs() < 1e-9);
        assert!((r.major() - 120.0).abs() < 1e-9 && (r.minor() - 80.0).abs() < 1e-9);
        assert!((r.center.x - 100.0).abs() < 1e-9 && (r.center.y - 100.0).abs() < 1e-9);
    }

    #[test]
    fn rotated_rect_recovers_angle() {
        for deg in [-30.0f64, 10.0, 30.0, 44.0] {
            let t = deg.to_radians();
            let m = BinaryMask::from_fn(300, 300, |x, y| {
                let (dx, dy) = (x as f64 + 0.5 - 150.0, y as f64 + 0.5 - 150.0);
                let u = dx * t.cos() + dy * t.sin();
                let v = -dx * t.sin() + dy * t.cos();
                u.abs() <= 80.0 && v.abs() <= 50.0
            });
            let r = mask_min_area_rect(&m).unwrap();
            assert!((r.angle_deg - deg).abs() < 0.5, "{deg}: {}", r.angle_deg);
            assert!((r.length - 160.0).abs() < 2.0 && (r.breadth - 100.0).abs() < 2.0, "{r:?}");
        }
    }

    #[test]
    fn corners_round_trip() {
        let r = OrientedRect { center: Point::new(5.0, 5.0), length: 4.0, breadth: 2.0, angle_deg: 30.0 };
        let back = min_area_rect(&convex_hull(r.corners().to_vec())).unwrap();
        assert!((back.area() - 8.0).abs() < 1e-9);
        assert!((back.angle_deg - 30.0).abs() < 1e-9);
    }
}
