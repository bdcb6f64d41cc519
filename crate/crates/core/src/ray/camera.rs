use crate::error::{HazeError, Result};
use crate::geom::Vec3;

/// Pinhole camera. Continuous pixel coordinates put the center of pixel
/// `(px, py)` at `(px + 0.5, py + 0.5)`, with `(0, 0)` the top-left corner.
#[derive(Clone, Debug, PartialEq)]
pub struct Camera {
    pub position: Vec3,
    pub right: Vec3,
    pub up: Vec3,
    pub forward: Vec3,
    /// Vertical field of view, radians.
    pub fov_y: f64,
    pub width: usize,
    pub height: usize,
}

impl Camera {
    pub fn new(
        position: Vec3,
        right: Vec3,
        up: Vec3,
        forward: Vec3,
        fov_y: f64,
        width: usize,
        height: usize,
    ) -> Result<Self> {
        let tol = 1e-9;
        let unit = |v: &Vec3| (v.norm() - 1.0).abs() <= tol;
        if !(unit(&right) && unit(&up) && unit(&forward)) {
            return Err(HazeError::Parameter("camera basis vectors must be unit length".into()));
        }
        if right.dot(&up).abs() > tol || right.dot(&forward).abs() > tol || up.dot(&forward).abs() > tol {
            return Err(HazeError::Parameter("camera basis must be orthogonal".into()));
        }
        if !(fov_y > 0.0 && fov_y < std::f64::consts::PI) {
            return Err(HazeError::Parameter(format!("field of view {fov_y} rad out of range")));
        }
        if !position.iter().all(|c| c.is_finite()) {
            return Err(HazeError::Parameter("camera position must be finite".into()));
        }
        Ok(Self {
            position,
            right,
            up,
            forward,
            fov_y,
            width,
            height,
        })
    }

    pub fn look_at(
        position: Vec3,
        target: Vec3,
        up_hint: Vec3,
        fov_y: f64,
        width: usize,
        height: usize,
    ) -> Result<Self> {
        let forward = (target - position)
            .try_normalize(1e-12)
            .ok_or_else(|| HazeError::Parameter("camera target coincides with position".into()))?;
        let right = forward
            .cross(&up_hint)
            .try_normalize(1e-12)
            .ok_or_else(|| HazeError::Parameter("camera up hint is parallel to view direction".into()))?;
        let up = right.cross(&forward);
        Self::new(position, right, up, forward, fov_y, width, height)
    }

    /// Focal length in pixels.
    pub fn focal_px(&self) -> f64 {
        0.5 * self.height as f64 / (0.5 * self.fov_y).tan()
    }

    /// Unit direction through continuous pixel coordinates `(u, v)`.
    pub fn direction(&self, u: f64, v: f64) -> Vec3 {
        let f = self.focal_px();
        let x = (u - 0.5 * self.width as f64) / f;
        let y = (0.5 * self.height as f64 - v) / f;
        (self.forward + self.right * x + self.up * y).normalize()
    }

    pub fn pixel_direction(&self, px: usize, py: usize) -> Vec3 {
        self.direction(px as f64 + 0.5, py as f64 + 0.5)
    }

    /// Pinhole projection; `None` behind the camera.
    pub fn project(&self, p: &Vec3) -> Option<(f64, f64)> {
        let d = p - self.position;
        let z = d.dot(&self.forward);
        if z <= 0.0 {
            return None;
        }
        let f = self.focal_px();
        Some((
            0.5 * self.width as f64 + f * d.dot(&self.right) / z,
            0.5 * self.height as f64 - f * d.dot(&self.up) / z,
        ))
    }

    /// Same camera translated by `offset`.
    pub fn translated(&self, offset: Vec3) -> Self {
        Self {
            position: self.position + offset,
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cam() -> Camera {
        Camera::look_at(Vec3::new(0.0, 0.0, -2.0), Vec3::zeros(), Vec3::y(), 0.8, 64, 48).unwrap()
    }

    #[test]
    fn center_pixel_looks_forward() {
        let c = cam();
        let d = c.direction(32.0, 24.0);
        assert!((d - Vec3::z()).norm() < 1e-15);
    }

    #[test]
    fn top_left_is_up_and_left() {
        let c = cam();
        let d = c.pixel_direction(0, 0);
        assert!(d.dot(&c.up) > 0.0 && d.dot(&c.right) < 0.0);
    }

    #[test]
    fn rejects_non_orthonormal_basis() {
        let r = Camera::new(
            Vec3::zeros(),
            Vec3::x(),
            Vec3::new(0.1, 1.0, 0.0).normalize(),
            Vec3::z(),
            1.0,
            4,
            4,
        );
        assert!(r.is_err());
    }

    proptest! {
        #[test]
        fn project_inverts_direction(u in 0.0f64..64.0, v in 0.0f64..48.0, t in 0.5f64..5.0) {
            let c = cam();
            let p = c.position + c.direction(u, v) * t;
            let (pu, pv) = c.project(&p).unwrap();
            prop_assert!((pu - u).abs() < 1e-9 && (pv - v).abs() < 1e-9);
        }
    }
}
