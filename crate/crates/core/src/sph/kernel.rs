use std::f64::consts::PI;

use crate::error::{HazeError, Result};
use crate::geom::Vec3;

/// Desbrun's spiky kernel in 3D, `W(r) = 15 / (pi h^6) (h - r)^3` on `[0, h]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpikyKernel {
    h: f64,
    value_norm: f64,
    grad_norm: f64,
}

impl SpikyKernel {
    pub fn new(h: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(HazeError::Parameter(format!(
                "smoothing radius must be positive and finite, got {h}"
            )));
        }
        let h6 = h.powi(6);
        Ok(Self {
            h,
            value_norm: 15.0 / (PI * h6),
            grad_norm: 45.0 / (PI * h6),
        })
    }

    #[inline]
    pub fn h(&self) -> f64 {
        self.h
    }

    #[inline]
    pub fn value(&self, r: f64) -> f64 {
        if r >= self.h {
            return 0.0;
        }
        let d = self.h - r.max(0.0);
        self.value_norm * d * d * d
    }

    /// Gradient with respect to the first particle, `r_vec = x_i - x_j`.
    /// Zero at `r = 0` and outside the support.
    #[inline]
    pub fn gradient(&self, r_vec: &Vec3) -> Vec3 {
        let r = r_vec.norm();
        if r == 0.0 || r >= self.h {
            return Vec3::zeros();
        }
        let d = self.h - r;
        r_vec * (-self.grad_norm * d * d / r)
    }

    /// `r_vec . grad W / |r_vec|^2` as a function of distance; always <= 0.
    #[inline]
    pub(crate) fn radial_factor(&self, r: f64) -> f64 {
        if r <= 0.0 || r >= self.h {
            return 0.0;
        }
        let d = self.h - r;
        -self.grad_norm * d * d / r
    }
}

pub fn kernel_spiky(distance: f64, h: f64) -> Result<f64> {
    if distance < 0.0 || distance.is_nan() {
        return Err(HazeError::Parameter(format!(
            "kernel distance must be non-negative, got {distance}"
        )));
    }
    Ok(SpikyKernel::new(h)?.value(distance))
}

pub fn kernel_spiky_gradient(r_vec: &Vec3, h: f64) -> Result<Vec3> {
    Ok(SpikyKernel::new(h)?.gradient(r_vec))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_at_support_boundary() {
        assert_eq!(kernel_spiky(0.1, 0.1).unwrap(), 0.0);
        assert_eq!(kernel_spiky(0.2, 0.1).unwrap(), 0.0);
    }

    #[test]
    fn value_at_origin() {
        let w = kernel_spiky(0.0, 1.0).unwrap();
        assert!((w - 15.0 / PI).abs() < 1e-12);
        assert!((w - 4.774_648_292_756_86).abs() < 1e-12);
    }

    #[test]
    fn value_at_half_support() {
        let expected = 15.0 / (PI * 1e-6) * 0.05f64.powi(3);
        let w = kernel_spiky(0.05, 0.1).unwrap();
        assert!((w - expected).abs() <= 1e-12 * expected);
        assert!((w - 596.831_036_594_608).abs() < 1e-6);
    }

    #[test]
    fn rejects_non_positive_radius() {
        assert!(matches!(kernel_spiky(0.0, 0.0), Err(HazeError::Parameter(_))));
        assert!(matches!(kernel_spiky(0.0, -1.0), Err(HazeError::Parameter(_))));
        assert!(kernel_spiky_gradient(&Vec3::x(), 0.0).is_err());
    }

    #[test]
    fn gradient_closed_form() {
        let g = kernel_spiky_gradient(&Vec3::new(0.05, 0.0, 0.0), 0.1).unwrap();
        let mag = 45.0 / (PI * 1e-6) * 0.05f64.powi(2);
        assert!((g.x + mag).abs() <= 1e-12 * mag);
        assert_eq!((g.y, g.z), (0.0, 0.0));
    }

    #[test]
    fn gradient_zero_at_origin_and_boundary() {
        assert_eq!(kernel_spiky_gradient(&Vec3::zeros(), 0.1).unwrap(), Vec3::zeros());
        assert_eq!(
            kernel_spiky_gradient(&Vec3::new(0.0, 0.1, 0.0), 0.1).unwrap(),
            Vec3::zeros()
        );
    }

    proptest! {
        #[test]
        fn kernel_non_negative_and_compact(r in 0.0f64..0.5, h in 0.01f64..0.3) {
            let w = kernel_spiky(r, h).unwrap();
            prop_assert!(w >= 0.0);
            if r >= h { prop_assert_eq!(w, 0.0); }
        }

        #[test]
        fn gradient_antisymmetric(x in -0.2f64..0.2, y in -0.2f64..0.2, z in -0.2f64..0.2) {
            let k = SpikyKernel::new(0.1).unwrap();
            let r = Vec3::new(x, y, z);
            prop_assert_eq!(k.gradient(&r), -k.gradient(&-r));
        }

        #[test]
        fn radial_factor_matches_gradient(x in -0.1f64..0.1, y in -0.1f64..0.1, z in -0.1f64..0.1) {
            let k = SpikyKernel::new(0.1).unwrap();
            let r = Vec3::new(x, y, z);
            let n2 = r.norm_squared();
            prop_assume!(n2 > 1e-8);
            let direct = r.dot(&k.gradient(&r)) / n2;
            let f = k.radial_factor(r.norm());
            prop_assert!((direct - f).abs() <= 1e-9 * f.abs().max(1.0));
        }
    }
}
