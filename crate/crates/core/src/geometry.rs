//! Vector math, oriented boxes and line-of-sight queries.
//!
//! Vehicles and buildings are both modelled as boxes rotated about the
//! vertical axis. A segment that only touches a face (grazing contact) is
//! treated as intersecting the box.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mobility::VehicleState;

/// Absolute tolerance for geometric comparisons, in meters.
pub const GEOM_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn distance(self, o: Vec3) -> f64 {
        (self - o).norm()
    }

    /// Squared distance in the ground plane.
    pub fn distance_xy_sq(self, o: Vec3) -> f64 {
        let dx = self.x - o.x;
        let dy = self.y - o.y;
        dx * dx + dy * dy
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Rotates about the z axis by `angle` radians.
    pub fn rotate_z(self, angle: f64) -> Vec3 {
        let (s, c) = angle.sin_cos();
        Vec3::new(c * self.x - s * self.y, s * self.x + c * self.y, self.z)
    }

    fn component(self, axis: usize) -> f64 {
        match axis {
            0 => self.x,
            1 => self.y,
            _ => self.z,
        }
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, k: f64) -> Vec3 {
        Vec3::new(self.x * k, self.y * k, self.z * k)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: Vec3,
    pub end: Vec3,
}

impl Segment {
    pub fn new(start: Vec3, end: Vec3) -> Self {
        Segment { start, end }
    }

    pub fn direction(&self) -> Vec3 {
        self.end - self.start
    }

    pub fn length(&self) -> f64 {
        self.direction().norm()
    }

    pub fn point_at(&self, t: f64) -> Vec3 {
        self.start + self.direction() * t
    }

    pub fn reversed(&self) -> Segment {
        Segment::new(self.end, self.start)
    }
}

/// Wraps an angle into `[-pi, pi)`.
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let w = (a + PI).rem_euclid(TAU) - PI;
    if w >= PI {
        w - TAU
    } else {
        w
    }
}

/// A box rotated by `yaw` about the vertical axis through its center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientedBox {
    pub center: Vec3,
    pub half_extents: Vec3,
    pub yaw: f64,
}

impl OrientedBox {
    pub fn new(center: Vec3, half_extents: Vec3, yaw: f64) -> Result<Self> {
        let h = half_extents;
        if !(h.x > 0.0 && h.y > 0.0 && h.z > 0.0) || !h.is_finite() {
            return Err(Error::InvalidBox(h.x, h.y, h.z));
        }
        Ok(OrientedBox {
            center,
            half_extents,
            yaw: wrap_angle(yaw),
        })
    }

    /// Axis-aligned box spanning `min..max`.
    pub fn from_bounds(min: Vec3, max: Vec3) -> Result<Self> {
        OrientedBox::new((min + max) * 0.5, (max - min) * 0.5, 0.0)
    }

    pub fn to_local(&self, p: Vec3) -> Vec3 {
        (p - self.center).rotate_z(-self.yaw)
    }

    pub fn to_world(&self, local: Vec3) -> Vec3 {
        local.rotate_z(self.yaw) + self.center
    }

    pub fn contains(&self, p: Vec3) -> bool {
        let l = self.to_local(p);
        let h = self.half_extents;
        l.x.abs() <= h.x + GEOM_EPS && l.y.abs() <= h.y + GEOM_EPS && l.z.abs() <= h.z + GEOM_EPS
    }

    pub fn bounding_radius(&self) -> f64 {
        self.half_extents.norm()
    }
}

/// Distance from `p` to the infinite line through `seg`, and the normalized
/// projection parameter of `p` along `seg` (0 at start, 1 at end).
pub fn perpendicular_distance(seg: &Segment, p: Vec3) -> Result<(f64, f64)> {
    let d = seg.direction();
    let len_sq = d.norm_sq();
    if len_sq <= GEOM_EPS * GEOM_EPS {
        return Err(Error::DegenerateSegment);
    }
    let w = p - seg.start;
    let t = w.dot(d) / len_sq;
    let dist = w.cross(d).norm() / len_sq.sqrt();
    Ok((dist, t))
}

fn point_segment_distance_sq(seg: &Segment, p: Vec3) -> f64 {
    let d = seg.direction();
    let len_sq = d.norm_sq();
    let t = if len_sq > 0.0 {
        ((p - seg.start).dot(d) / len_sq).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (seg.point_at(t) - p).norm_sq()
}

/// Slab test in the box frame. Returns the parameter along `seg` at which it
/// first touches the box, or `None` when it misses.
pub fn segment_box_entry(seg: &Segment, bx: &OrientedBox) -> Option<f64> {
    let r = bx.bounding_radius() + GEOM_EPS;
    if point_segment_distance_sq(seg, bx.center) > r * r {
        return None;
    }
    let o = bx.to_local(seg.start);
    let d = bx.to_local(seg.end) - o;
    let (mut t0, mut t1) = (0.0_f64, 1.0_f64);
    for axis in 0..3 {
        let h = bx.half_extents.component(axis) + GEOM_EPS;
        let oa = o.component(axis);
        let da = d.component(axis);
        if da.abs() < 1e-15 {
            if oa.abs() > h {
                return None;
            }
            continue;
        }
        let mut ta = (-h - oa) / da;
        let mut tb = (h - oa) / da;
        if ta > tb {
            std::mem::swap(&mut ta, &mut tb);
        }
        t0 = t0.max(ta);
        t1 = t1.min(tb);
        if t0 > t1 {
            return None;
        }
    }
    Some(t0)
}

pub fn segment_intersects_box(seg: &Segment, bx: &OrientedBox) -> bool {
    segment_box_entry(seg, bx).is_some()
}

/// Box occupied by a vehicle: centered on its ground position, lifted by half
/// its height, yawed to its heading.
pub fn vehicle_box(state: &VehicleState) -> Result<OrientedBox> {
    let d = state.dims;
    if !(d.length > 0.0 && d.width > 0.0 && d.height > 0.0) {
        return Err(Error::InvalidDimensions(format!(
            "{} x {} x {}",
            d.length, d.width, d.height
        )));
    }
    OrientedBox::new(
        state.position + Vec3::new(0.0, 0.0, d.height / 2.0),
        Vec3::new(d.length / 2.0, d.width / 2.0, d.height / 2.0),
        state.heading,
    )
}

/// World positions of the four roof-corner antennas, ordered front-left,
/// front-right, rear-left, rear-right.
pub fn antenna_positions(state: &VehicleState) -> [Vec3; 4] {
    let hl = state.dims.length / 2.0;
    let hw = state.dims.width / 2.0;
    let z = state.dims.height;
    let base = state.position;
    [(hl, hw), (hl, -hw), (-hl, hw), (-hl, -hw)]
        .map(|(fx, fy)| base + Vec3::new(fx, fy, z).rotate_z(state.heading))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LosResult<I> {
    Clear,
    Blocked(I),
}

impl<I> LosResult<I> {
    pub fn is_clear(&self) -> bool {
        matches!(self, LosResult::Clear)
    }
}

/// Checks the segment `a -> b` against every obstacle not listed in
/// `exclude`. When several obstacles intersect, the one entered first
/// (closest to `a`) is reported; ties go to the earlier obstacle.
pub fn los_check<I: Copy + PartialEq>(
    a: Vec3,
    b: Vec3,
    obstacles: &[(I, OrientedBox)],
    exclude: &[I],
) -> LosResult<I> {
    let seg = Segment::new(a, b);
    let mut best: Option<(f64, I)> = None;
    for (id, bx) in obstacles {
        if exclude.contains(id) {
            continue;
        }
        if let Some(t) = segment_box_entry(&seg, bx) {
            if best.is_none_or(|(bt, _)| t < bt) {
                best = Some((t, *id));
            }
        }
    }
    match best {
        Some((_, id)) => LosResult::Blocked(id),
        None => LosResult::Clear,
    }
}

/// Returns true when any obstacle not excluded by `skip` intersects `seg`.
/// Stops at the first hit.
pub fn any_blocks<'a, I: 'a>(
    seg: &Segment,
    obstacles: impl IntoIterator<Item = &'a (I, OrientedBox)>,
    skip: impl Fn(&I) -> bool,
) -> bool {
    obstacles
        .into_iter()
        .any(|(id, bx)| !skip(id) && segment_intersects_box(seg, bx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mobility::{Dims, VehicleId};
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn close(a: Vec3, b: Vec3) -> bool {
        (a - b).norm() < 1e-9
    }

    fn state(pos: Vec3, heading: f64, dims: Dims) -> VehicleState {
        VehicleState {
            id: VehicleId(1),
            position: pos,
            heading,
            speed: 0.0,
            dims,
            connected: true,
        }
    }

    fn unit_box(center: Vec3, yaw: f64) -> OrientedBox {
        OrientedBox::new(center, Vec3::new(1.0, 1.0, 1.0), yaw).unwrap()
    }

    // Dense membership sampling along the segment.
    fn sampled_hit(seg: &Segment, bx: &OrientedBox, samples: usize) -> bool {
        (0..=samples).any(|i| bx.contains(seg.point_at(i as f64 / samples as f64)))
    }

    #[test]
    fn perpendicular_distance_examples() {
        let seg = Segment::new(Vec3::ZERO, Vec3::new(10.0, 0.0, 0.0));
        let (d, t) = perpendicular_distance(&seg, Vec3::new(5.0, 3.0, 0.0)).unwrap();
        assert!((d - 3.0).abs() < 1e-12 && (t - 0.5).abs() < 1e-12);
        let (d, t) = perpendicular_distance(&seg, Vec3::ZERO).unwrap();
        assert_eq!((d, t), (0.0, 0.0));
        let (d, t) = perpendicular_distance(&seg, Vec3::new(15.0, 4.0, 0.0)).unwrap();
        assert!((d - 4.0).abs() < 1e-12 && (t - 1.5).abs() < 1e-12);
    }

    #[test]
    fn perpendicular_distance_rejects_zero_length() {
        let seg = Segment::new(Vec3::new(1.0, 1.0, 1.0), Vec3::new(1.0, 1.0, 1.0));
        assert_eq!(
            perpendicular_distance(&seg, Vec3::ZERO),
            Err(Error::DegenerateSegment)
        );
    }

    #[test]
    fn segment_box_examples() {
        let seg = Segment::new(Vec3::ZERO, Vec3::new(10.0, 0.0, 0.0));
        assert!(segment_intersects_box(&seg, &unit_box(Vec3::new(5.0, 0.0, 0.0), 0.0)));
        let off = Segment::new(Vec3::new(0.0, 5.0, 0.0), Vec3::new(10.0, 5.0, 0.0));
        assert!(!segment_intersects_box(&off, &unit_box(Vec3::new(5.0, 0.0, 0.0), 0.0)));
        let rotated = unit_box(Vec3::new(5.0, 1.4, 0.0), FRAC_PI_4);
        assert!(sampled_hit(&seg, &rotated, 10_000));
        assert!(segment_intersects_box(&seg, &rotated));
    }

    #[test]
    fn grazing_counts_as_blocked() {
        let seg = Segment::new(Vec3::new(0.0, 1.0, 0.0), Vec3::new(10.0, 1.0, 0.0));
        assert!(segment_intersects_box(&seg, &unit_box(Vec3::new(5.0, 0.0, 0.0), 0.0)));
        let above = Segment::new(Vec3::new(0.0, 1.0 + 1e-6, 0.0), Vec3::new(10.0, 1.0 + 1e-6, 0.0));
        assert!(!segment_intersects_box(&above, &unit_box(Vec3::new(5.0, 0.0, 0.0), 0.0)));
    }

    #[test]
    fn segment_ending_before_box_misses() {
        let seg = Segment::new(Vec3::ZERO, Vec3::new(3.0, 0.0, 0.0));
        assert!(!segment_intersects_box(&seg, &unit_box(Vec3::new(5.0, 0.0, 0.0), 0.0)));
        let inside = Segment::new(Vec3::new(5.0, 0.0, 0.0), Vec3::new(5.5, 0.2, 0.0));
        assert!(segment_intersects_box(&inside, &unit_box(Vec3::new(5.0, 0.0, 0.0), 0.3)));
    }

    #[test]
    fn vehicle_box_examples() {
        let car = Dims::new(4.0, 2.0, 1.5);
        let b = vehicle_box(&state(Vec3::ZERO, 0.0, car)).unwrap();
        assert!(close(b.center, Vec3::new(0.0, 0.0, 0.75)));
        assert!(close(b.half_extents, Vec3::new(2.0, 1.0, 0.75)));
        let b = vehicle_box(&state(Vec3::ZERO, FRAC_PI_2, car)).unwrap();
        assert_eq!(b.yaw, FRAC_PI_2);
        let truck = Dims::new(12.0, 2.5, 3.0);
        let b = vehicle_box(&state(Vec3::new(10.0, 5.0, 0.0), 0.0, truck)).unwrap();
        assert!(close(b.center, Vec3::new(10.0, 5.0, 1.5)));
        assert!(close(b.half_extents, Vec3::new(6.0, 1.25, 1.5)));
        assert!(vehicle_box(&state(Vec3::ZERO, 0.0, Dims::new(0.0, 2.0, 1.5))).is_err());
    }

    #[test]
    fn antenna_corner_examples() {
        let car = Dims::new(4.0, 2.0, 1.5);
        let a = antenna_positions(&state(Vec3::ZERO, 0.0, car));
        let want = [(2.0, 1.0), (2.0, -1.0), (-2.0, 1.0), (-2.0, -1.0)];
        for (p, (x, y)) in a.iter().zip(want) {
            assert!(close(*p, Vec3::new(x, y, 1.5)));
        }
        let flipped = antenna_positions(&state(Vec3::ZERO, -PI, car));
        for (p, q) in a.iter().zip(flipped.iter()) {
            assert!((p.x + q.x).abs() < 1e-9 && (p.y + q.y).abs() < 1e-9);
        }
        let a = antenna_positions(&state(Vec3::ZERO, FRAC_PI_2, car));
        let want = [(-1.0, 2.0), (1.0, 2.0), (-1.0, -2.0), (1.0, -2.0)];
        for (p, (x, y)) in a.iter().zip(want) {
            assert!(close(*p, Vec3::new(x, y, 1.5)));
        }
    }

    #[test]
    fn los_examples() {
        let a = Vec3::new(0.0, 0.0, 5.0);
        let b = Vec3::new(20.0, 0.0, 1.5);
        assert_eq!(los_check::<u32>(a, b, &[], &[]), LosResult::Clear);

        let mid = (a + b) * 0.5;
        let obstacles = vec![(7u32, unit_box(mid, 0.3))];
        assert_eq!(los_check(a, b, &obstacles, &[]), LosResult::Blocked(7));
        assert_eq!(los_check(a, b, &obstacles, &[7]), LosResult::Clear);

        // Entry parameters along the segment: the box around x=15 is entered
        // at x=14 (t=0.7), the one around x=5 at x=4 (t=0.2).
        let seg = Segment::new(a, b);
        let far = (1u32, unit_box(seg.point_at(0.75), 0.0));
        let near = (2u32, unit_box(seg.point_at(0.25), 0.0));
        assert_eq!(los_check(a, b, &[far, near], &[]), LosResult::Blocked(2));
        assert_eq!(los_check(b, a, &[far, near], &[]), LosResult::Blocked(1));
    }

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(PI), -PI);
        assert!((wrap_angle(3.0 * PI / 2.0) + FRAC_PI_2).abs() < 1e-12);
        assert_eq!(wrap_angle(0.5), 0.5);
    }
}
