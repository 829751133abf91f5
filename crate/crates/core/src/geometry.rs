//! Camera and ground-plane geometry for gimbaled, downward-facing cameras.
//!
//! World frame is East-North-Up with the ground at `z = 0`. Yaw is measured
//! counterclockwise from East. The gimbal keeps both image axes parallel to
//! the ground, so pitch and roll never enter the projection.
//!
//! Pixel `(u, v)` maps to a camera-frame ground offset
//! `(z (u - c_x) / f_x, z (v - c_y) / f_y)` which is then rotated by the
//! platform yaw.

use std::f64::consts::PI;

use nalgebra::{Matrix6, Rotation2, Vector2, Vector3};

use crate::error::{Error, Result};

/// Wraps an angle to `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    // rem_euclid can return exactly 2pi for tiny negative inputs
    if r <= -PI {
        r += 2.0 * PI;
    }
    r
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub nx: u32,
    pub ny: u32,
    pub cx: f64,
    pub cy: f64,
}

impl CameraIntrinsics {
    /// Intrinsics with the principal point at the image center.
    pub fn new(fx: f64, fy: f64, nx: u32, ny: u32) -> Result<Self> {
        Self::with_principal_point(fx, fy, nx, ny, nx as f64 / 2.0, ny as f64 / 2.0)
    }

    pub fn with_principal_point(fx: f64, fy: f64, nx: u32, ny: u32, cx: f64, cy: f64) -> Result<Self> {
        let intr = CameraIntrinsics { fx, fy, nx, ny, cx, cy };
        intr.validate()?;
        Ok(intr)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) || !self.fx.is_finite() || !self.fy.is_finite() {
            return Err(Error::InvalidIntrinsics(format!(
                "focal lengths must be positive, got ({}, {})",
                self.fx, self.fy
            )));
        }
        if self.nx == 0 || self.ny == 0 {
            return Err(Error::InvalidIntrinsics("image must be at least 1x1".into()));
        }
        if !(0.0..=self.nx as f64).contains(&self.cx) || !(0.0..=self.ny as f64).contains(&self.cy) {
            return Err(Error::InvalidIntrinsics(format!(
                "principal point ({}, {}) outside {}x{} image",
                self.cx, self.cy, self.nx, self.ny
            )));
        }
        Ok(())
    }

    pub fn contains_pixel(&self, u: f64, v: f64) -> bool {
        (0.0..=self.nx as f64).contains(&u) && (0.0..=self.ny as f64).contains(&v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentPose {
    pub position: Vector3<f64>,
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
    /// Position + orientation covariance, ordered `[x, y, z, yaw, pitch, roll]`.
    pub covariance: Matrix6<f64>,
}

impl AgentPose {
    pub fn new(position: Vector3<f64>, yaw: f64) -> Self {
        AgentPose {
            position,
            yaw: wrap_angle(yaw),
            pitch: 0.0,
            roll: 0.0,
            covariance: Matrix6::identity() * 1e-4,
        }
    }

    /// The world origin with zero yaw.
    pub fn origin() -> Self {
        Self::new(Vector3::zeros(), 0.0)
    }

    pub fn altitude(&self) -> f64 {
        self.position.z
    }

    fn require_airborne(&self) -> Result<()> {
        if self.position.z > 0.0 && self.position.z.is_finite() {
            Ok(())
        } else {
            Err(Error::DegenerateGeometry(format!(
                "altitude must be positive, got {}",
                self.position.z
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FovFootprint {
    pub center: Vector2<f64>,
    pub half_extent_x: f64,
    pub half_extent_y: f64,
    pub yaw: f64,
}

impl FovFootprint {
    pub fn area(&self) -> f64 {
        4.0 * self.half_extent_x * self.half_extent_y
    }

    /// Point expressed in the footprint's own axes.
    fn to_local(&self, p: Vector2<f64>) -> Vector2<f64> {
        Rotation2::new(-self.yaw) * (p - self.center)
    }

    pub fn contains(&self, p: Vector2<f64>) -> bool {
        let l = self.to_local(p);
        l.x.abs() <= self.half_extent_x && l.y.abs() <= self.half_extent_y
    }

    /// Counterclockwise corners starting at local `(+x, +y)`.
    pub fn corners(&self) -> [Vector2<f64>; 4] {
        let r = Rotation2::new(self.yaw);
        let (hx, hy) = (self.half_extent_x, self.half_extent_y);
        [
            self.center + r * Vector2::new(hx, hy),
            self.center + r * Vector2::new(-hx, hy),
            self.center + r * Vector2::new(-hx, -hy),
            self.center + r * Vector2::new(hx, -hy),
        ]
    }

    /// Footprint with every edge pulled inward by `margin`; collapses to a
    /// point rather than inverting.
    pub fn shrunk(&self, margin: f64) -> FovFootprint {
        FovFootprint {
            half_extent_x: (self.half_extent_x - margin).max(0.0),
            half_extent_y: (self.half_extent_y - margin).max(0.0),
            ..*self
        }
    }
}

/// Oriented 3-D box. `l` runs along the heading `yaw`, `w` across it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Box3D {
    pub center: Vector3<f64>,
    pub h: f64,
    pub w: f64,
    pub l: f64,
    pub yaw: f64,
}

impl Box3D {
    pub fn new(center: Vector3<f64>, h: f64, w: f64, l: f64, yaw: f64) -> Result<Self> {
        if !(h > 0.0 && w > 0.0 && l > 0.0) {
            return Err(Error::Domain(format!("box sizes must be positive, got h={h} w={w} l={l}")));
        }
        Ok(Box3D {
            center,
            h,
            w,
            l,
            yaw: wrap_angle(yaw),
        })
    }

    /// Bird's-eye footprint corners, counterclockwise.
    pub fn bev_corners(&self) -> [Vector2<f64>; 4] {
        let r = Rotation2::new(self.yaw);
        let c = self.center.xy();
        let (hl, hw) = (self.l / 2.0, self.w / 2.0);
        [
            c + r * Vector2::new(hl, hw),
            c + r * Vector2::new(-hl, hw),
            c + r * Vector2::new(-hl, -hw),
            c + r * Vector2::new(hl, -hw),
        ]
    }
}

/// Oriented rectangle in pixel space. `length_px` runs along `angle`
/// (measured from +u toward +v), `width_px` across it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelBox {
    pub cu: f64,
    pub cv: f64,
    pub length_px: f64,
    pub width_px: f64,
    pub angle: f64,
}

impl PixelBox {
    fn axes(&self) -> (Vector2<f64>, Vector2<f64>) {
        let a = Vector2::new(self.angle.cos(), self.angle.sin());
        (a, Vector2::new(-a.y, a.x))
    }

    pub fn corners(&self) -> [Vector2<f64>; 4] {
        let c = Vector2::new(self.cu, self.cv);
        let (a, b) = self.axes();
        let (hl, hw) = (self.length_px / 2.0, self.width_px / 2.0);
        [c + a * hl + b * hw, c - a * hl + b * hw, c - a * hl - b * hw, c + a * hl - b * hw]
    }
}

/// Half-angles of the field of view, `(atan(n_x / 2f_x), atan(n_y / 2f_y))`.
pub fn camera_half_angles(intr: &CameraIntrinsics) -> (f64, f64) {
    (
        (intr.nx as f64 / (2.0 * intr.fx)).atan(),
        (intr.ny as f64 / (2.0 * intr.fy)).atan(),
    )
}

pub fn fov_footprint(pose: &AgentPose, intr: &CameraIntrinsics) -> Result<FovFootprint> {
    pose.require_airborne()?;
    let (dtheta, dphi) = camera_half_angles(intr);
    let z = pose.altitude();
    let center = pixel_offset_to_world(pose, intr, intr.nx as f64 / 2.0, intr.ny as f64 / 2.0);
    Ok(FovFootprint {
        center,
        half_extent_x: z * dtheta.tan(),
        half_extent_y: z * dphi.tan(),
        yaw: pose.yaw,
    })
}

fn pixel_offset_to_world(pose: &AgentPose, intr: &CameraIntrinsics, u: f64, v: f64) -> Vector2<f64> {
    let z = pose.altitude();
    let offset = Vector2::new(z * (u - intr.cx) / intr.fx, z * (v - intr.cy) / intr.fy);
    pose.position.xy() + Rotation2::new(pose.yaw) * offset
}

/// Intersects the ray through pixel `(u, v)` with the ground plane.
pub fn pixel_to_ground(pose: &AgentPose, intr: &CameraIntrinsics, u: f64, v: f64) -> Result<Vector3<f64>> {
    pose.require_airborne()?;
    if !intr.contains_pixel(u, v) {
        return Err(Error::Domain(format!(
            "pixel ({u}, {v}) outside {}x{} image",
            intr.nx, intr.ny
        )));
    }
    let g = pixel_offset_to_world(pose, intr, u, v);
    Ok(Vector3::new(g.x, g.y, 0.0))
}

/// Projects a ground point into the image. The result is not bounds-checked.
pub fn ground_to_pixel(pose: &AgentPose, intr: &CameraIntrinsics, p: &Vector3<f64>) -> Result<(f64, f64)> {
    pose.require_airborne()?;
    let z = pose.altitude();
    let local = Rotation2::new(-pose.yaw) * (p.xy() - pose.position.xy());
    Ok((intr.cx + intr.fx * local.x / z, intr.cy + intr.fy * local.y / z))
}

/// Lifts an oriented pixel box to a 3-D box resting on the ground.
pub fn upscale_box(pose: &AgentPose, intr: &CameraIntrinsics, bbox: &PixelBox, nominal_height: f64) -> Result<Box3D> {
    if !(bbox.length_px > 0.0 && bbox.width_px > 0.0) {
        return Err(Error::Domain(format!(
            "degenerate pixel box {}x{}",
            bbox.length_px, bbox.width_px
        )));
    }
    if let Some(c) = bbox.corners().iter().find(|c| !intr.contains_pixel(c.x, c.y)) {
        return Err(Error::Domain(format!("pixel box corner ({}, {}) outside image", c.x, c.y)));
    }
    let (a, b) = bbox.axes();
    let center = Vector2::new(bbox.cu, bbox.cv);
    let g = |p: Vector2<f64>| pixel_to_ground(pose, intr, p.x, p.y);
    let front = g(center + a * (bbox.length_px / 2.0))?;
    let back = g(center - a * (bbox.length_px / 2.0))?;
    let left = g(center + b * (bbox.width_px / 2.0))?;
    let right = g(center - b * (bbox.width_px / 2.0))?;
    let mid = g(center)?;
    let heading = front - back;
    Box3D::new(
        Vector3::new(mid.x, mid.y, nominal_height / 2.0),
        nominal_height,
        (left - right).norm(),
        heading.norm(),
        heading.y.atan2(heading.x),
    )
}

/// Renders a ground box into an oriented pixel box. Exact inverse of
/// [`upscale_box`] (up to height) when pixels are square (`f_x == f_y`).
pub fn render_box(pose: &AgentPose, intr: &CameraIntrinsics, b: &Box3D) -> Result<PixelBox> {
    let heading = Vector3::new(b.yaw.cos(), b.yaw.sin(), 0.0);
    let ground = Vector3::new(b.center.x, b.center.y, 0.0);
    let px = |p: Vector3<f64>| ground_to_pixel(pose, intr, &p).map(|(u, v)| Vector2::new(u, v));
    let c = px(ground)?;
    let front = px(ground + heading * (b.l / 2.0))?;
    let back = px(ground - heading * (b.l / 2.0))?;
    let across = Vector3::new(-heading.y, heading.x, 0.0);
    let left = px(ground + across * (b.w / 2.0))?;
    let right = px(ground - across * (b.w / 2.0))?;
    let d = front - back;
    Ok(PixelBox {
        cu: c.x,
        cv: c.y,
        length_px: d.norm(),
        width_px: (left - right).norm(),
        angle: d.y.atan2(d.x),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hd() -> CameraIntrinsics {
        CameraIntrinsics::new(960.0, 960.0, 1920, 1080).unwrap()
    }

    fn pose(x: f64, y: f64, z: f64, yaw: f64) -> AgentPose {
        AgentPose::new(Vector3::new(x, y, z), yaw)
    }

    #[test]
    fn half_angles_substitution() {
        let (dt, dp) = camera_half_angles(&hd());
        assert!((dt - PI / 4.0).abs() < 1e-15);
        assert!((dp - 0.5625f64.atan()).abs() < 1e-15);
        assert!((dp - 0.5124).abs() < 1e-4);
        let narrow = CameraIntrinsics::new(1e12, 1e12, 1, 1).unwrap();
        assert!(camera_half_angles(&narrow).0 < 1e-12);
    }

    #[test]
    fn invalid_intrinsics_rejected() {
        assert!(CameraIntrinsics::new(0.0, 1.0, 10, 10).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 0, 10).is_err());
        assert!(CameraIntrinsics::with_principal_point(1.0, 1.0, 10, 10, 11.0, 5.0).is_err());
    }

    #[test]
    fn footprint_scales_with_altitude() {
        let f100 = fov_footprint(&pose(0.0, 0.0, 100.0, 0.0), &hd()).unwrap();
        assert!((f100.half_extent_x - 100.0).abs() < 1e-9);
        let f50 = fov_footprint(&pose(0.0, 0.0, 50.0, 0.0), &hd()).unwrap();
        assert!((f50.half_extent_x * 2.0 - f100.half_extent_x).abs() < 1e-9);
        assert!((f50.half_extent_y * 2.0 - f100.half_extent_y).abs() < 1e-9);
        assert!((f100.area() / f50.area() - 4.0).abs() < 1e-9);
    }

    #[test]
    fn footprint_rotation_keeps_area() {
        let f0 = fov_footprint(&pose(3.0, 4.0, 80.0, 0.0), &hd()).unwrap();
        let f90 = fov_footprint(&pose(3.0, 4.0, 80.0, PI / 2.0), &hd()).unwrap();
        assert!((f0.area() - f90.area()).abs() < 1e-9);
        let r = Rotation2::new(PI / 2.0);
        for (a, b) in f0.corners().iter().zip(f90.corners()) {
            let rotated = f0.center + r * (a - f0.center);
            assert!((rotated - b).norm() < 1e-9);
        }
    }

    #[test]
    fn non_positive_altitude_is_degenerate() {
        assert!(matches!(
            fov_footprint(&pose(0.0, 0.0, 0.0, 0.0), &hd()),
            Err(Error::DegenerateGeometry(_))
        ));
        assert!(pixel_to_ground(&pose(0.0, 0.0, -1.0, 0.0), &hd(), 10.0, 10.0).is_err());
    }

    #[test]
    fn principal_point_maps_to_nadir() {
        let p = pose(12.0, -7.0, 100.0, 0.7);
        let g = pixel_to_ground(&p, &hd(), 960.0, 540.0).unwrap();
        assert!((g - Vector3::new(12.0, -7.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn unit_tangent_offset() {
        let p = pose(0.0, 0.0, 100.0, 0.0);
        let g = pixel_to_ground(&p, &hd(), 960.0 + 960.0, 540.0).unwrap();
        assert!((g.x - 100.0).abs() < 1e-12 && g.y.abs() < 1e-12);
    }

    #[test]
    fn pixel_out_of_bounds() {
        let p = pose(0.0, 0.0, 100.0, 0.0);
        assert!(matches!(pixel_to_ground(&p, &hd(), -1.0, 5.0), Err(Error::Domain(_))));
        assert!(pixel_to_ground(&p, &hd(), 5.0, 1081.0).is_err());
    }

    #[test]
    fn ground_pixel_round_trip() {
        let p = pose(40.0, -25.0, 120.0, -2.1);
        let intr = CameraIntrinsics::with_principal_point(900.0, 1010.0, 1920, 1080, 950.0, 530.0).unwrap();
        for i in 0..20 {
            for j in 0..20 {
                let u = i as f64 * 1920.0 / 19.0;
                let v = j as f64 * 1080.0 / 19.0;
                let g = pixel_to_ground(&p, &intr, u, v).unwrap();
                let (u2, v2) = ground_to_pixel(&p, &intr, &g).unwrap();
                let g2 = pixel_to_ground(&p, &intr, u2.clamp(0.0, 1920.0), v2.clamp(0.0, 1080.0)).unwrap();
                assert!((g - g2).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn footprint_matches_image_bounds_on_lattice() {
        let p = pose(10.0, 20.0, 90.0, 0.4);
        let intr = hd();
        let fp = fov_footprint(&p, &intr).unwrap();
        // lattice offset by an irrational-ish step so no point sits on an edge
        for i in 0..50 {
            for j in 0..50 {
                let g = Vector3::new(-190.0 + i as f64 * 8.013, -180.0 + j as f64 * 8.117, 0.0);
                let (u, v) = ground_to_pixel(&p, &intr, &g).unwrap();
                assert_eq!(fp.contains(g.xy()), intr.contains_pixel(u, v), "point {g:?}");
            }
        }
    }

    #[test]
    fn upscale_centered_box_lands_at_nadir() {
        let p = pose(5.0, 6.0, 100.0, 0.3);
        let bbox = PixelBox { cu: 960.0, cv: 540.0, length_px: 40.0, width_px: 20.0, angle: 0.0 };
        let b = upscale_box(&p, &hd(), &bbox, 1.8).unwrap();
        assert!((b.center.xy() - Vector2::new(5.0, 6.0)).norm() < 1e-9);
        assert!((b.yaw - 0.3).abs() < 1e-12);
        let b2 = upscale_box(&pose(5.0, 6.0, 200.0, 0.3), &hd(), &bbox, 1.8).unwrap();
        assert!((b2.l - 2.0 * b.l).abs() < 1e-9 && (b2.w - 2.0 * b.w).abs() < 1e-9);
    }

    #[test]
    fn upscale_rejects_degenerate_and_clipped_boxes() {
        let p = pose(0.0, 0.0, 100.0, 0.0);
        let flat = PixelBox { cu: 500.0, cv: 500.0, length_px: 0.0, width_px: 10.0, angle: 0.0 };
        assert!(upscale_box(&p, &hd(), &flat, 1.8).is_err());
        let edge = PixelBox { cu: 2.0, cv: 500.0, length_px: 10.0, width_px: 10.0, angle: 0.0 };
        assert!(upscale_box(&p, &hd(), &edge, 1.8).is_err());
    }

    #[test]
    fn render_then_upscale_recovers_box() {
        let p = pose(0.0, 0.0, 100.0, 0.9);
        let truth = Box3D::new(Vector3::new(1.0, -2.0, 0.9), 1.8, 2.0, 4.5, -0.4).unwrap();
        let px = render_box(&p, &hd(), &truth).unwrap();
        let b = upscale_box(&p, &hd(), &px, 1.8).unwrap();
        assert!((b.l - 4.5).abs() / 4.5 < 0.05);
        assert!((b.w - 2.0).abs() / 2.0 < 0.05);
        assert!((b.center - truth.center).norm() < 1e-9);
        assert!(wrap_angle(b.yaw - truth.yaw).abs() < 1e-9);
    }

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-15);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        for k in -20..20 {
            let a = wrap_angle(k as f64 * 0.77);
            assert!(a > -PI && a <= PI);
        }
    }
}
