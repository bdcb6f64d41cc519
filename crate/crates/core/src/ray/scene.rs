use serde::{Deserialize, Serialize};

use crate::error::{HazeError, Result};
use crate::geom::Vec3;

/// Finite checkerboard rectangle. Local coordinates `(a, b)` are measured
/// from `center` along `axis_u` and `normal x axis_u`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkerboard {
    #[serde(rename = "center_m")]
    pub center: Vec3,
    pub normal: Vec3,
    pub axis_u: Vec3,
    #[serde(rename = "half_extent_m")]
    pub half_extent: [f64; 2],
    #[serde(rename = "square_m")]
    pub square: f64,
    pub color_a: [u8; 3],
    pub color_b: [u8; 3],
}

impl Checkerboard {
    /// Builds a board, orthonormalizing `axis_hint` against `normal`.
    pub fn new(
        center: Vec3,
        normal: Vec3,
        axis_hint: Vec3,
        half_extent: [f64; 2],
        square: f64,
        colors: ([u8; 3], [u8; 3]),
    ) -> Result<Self> {
        let normal = normal
            .try_normalize(1e-12)
            .ok_or_else(|| HazeError::Parameter("board normal is zero".into()))?;
        let axis_u = (axis_hint - normal * normal.dot(&axis_hint))
            .try_normalize(1e-12)
            .ok_or_else(|| HazeError::Parameter("board axis is parallel to its normal".into()))?;
        let board = Self {
            center,
            normal,
            axis_u,
            half_extent,
            square,
            color_a: colors.0,
            color_b: colors.1,
        };
        board.validate("board")?;
        Ok(board)
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        let tol = 1e-9;
        if (self.normal.norm() - 1.0).abs() > tol {
            return Err(HazeError::config(format!("{path}.normal"), "must be unit length"));
        }
        if (self.axis_u.norm() - 1.0).abs() > tol || self.axis_u.dot(&self.normal).abs() > tol {
            return Err(HazeError::config(
                format!("{path}.axis_u"),
                "must be unit length and perpendicular to the normal",
            ));
        }
        if !(self.square > 0.0 && self.half_extent.iter().all(|e| *e > 0.0)) {
            return Err(HazeError::config(format!("{path}.square_m"), "sizes must be positive"));
        }
        Ok(())
    }

    #[inline]
    pub fn axis_v(&self) -> Vec3 {
        self.normal.cross(&self.axis_u)
    }

    #[inline]
    pub fn local(&self, p: &Vec3) -> (f64, f64) {
        let d = p - self.center;
        (d.dot(&self.axis_u), d.dot(&self.axis_v()))
    }

    pub fn point(&self, a: f64, b: f64) -> Vec3 {
        self.center + self.axis_u * a + self.axis_v() * b
    }

    pub fn color_at(&self, p: &Vec3) -> [u8; 3] {
        let (a, b) = self.local(p);
        let parity = (a / self.square).floor() as i64 + (b / self.square).floor() as i64;
        if parity.rem_euclid(2) == 0 {
            self.color_a
        } else {
            self.color_b
        }
    }

    /// Ray parameter of the hit with the bounded board, if within `[t_min, t_max]`.
    #[inline]
    pub fn intersect(&self, origin: &Vec3, dir: &Vec3, t_min: f64, t_max: f64) -> Option<f64> {
        let denom = dir.dot(&self.normal);
        if denom == 0.0 {
            return None;
        }
        let t = (self.center - origin).dot(&self.normal) / denom;
        if !(t >= t_min && t <= t_max) {
            return None;
        }
        let (a, b) = self.local(&(origin + dir * t));
        (a.abs() <= self.half_extent[0] && b.abs() <= self.half_extent[1]).then_some(t)
    }

    /// Euclidean distance from `p` to the bounded rectangle.
    pub fn distance(&self, p: &Vec3) -> f64 {
        let d = p - self.center;
        let off = d.dot(&self.normal);
        let (a, b) = self.local(p);
        let da = (a.abs() - self.half_extent[0]).max(0.0);
        let db = (b.abs() - self.half_extent[1]).max(0.0);
        (off * off + da * da + db * db).sqrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hit {
    pub board: usize,
    pub t: f64,
    pub point: Vec3,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scene {
    #[serde(default)]
    pub boards: Vec<Checkerboard>,
    pub background: [u8; 3],
    /// Proximity band around the boards inside which exact intersection is
    /// attempted during curved marching.
    #[serde(rename = "shell_margin_m", default = "default_margin")]
    pub shell_margin: f64,
}

fn default_margin() -> f64 {
    0.05
}

impl Scene {
    pub fn new(boards: Vec<Checkerboard>, background: [u8; 3]) -> Self {
        Self {
            boards,
            background,
            shell_margin: default_margin(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (i, b) in self.boards.iter().enumerate() {
            b.validate(&format!("scene.boards[{i}]"))?;
        }
        if !(self.shell_margin >= 0.0 && self.shell_margin.is_finite()) {
            return Err(HazeError::config("scene.shell_margin_m", "must be non-negative"));
        }
        Ok(())
    }

    /// Nearest board hit along a straight segment; ties go to the lower index.
    pub fn nearest_hit(&self, origin: &Vec3, dir: &Vec3, t_min: f64, t_max: f64) -> Option<Hit> {
        let mut best: Option<Hit> = None;
        for (i, b) in self.boards.iter().enumerate() {
            if let Some(t) = b.intersect(origin, dir, t_min, t_max) {
                if best.is_none_or(|h| t < h.t) {
                    best = Some(Hit {
                        board: i,
                        t,
                        point: origin + dir * t,
                    });
                }
            }
        }
        best
    }

    pub fn color_of(&self, hit: Option<&Hit>) -> [u8; 3] {
        match hit {
            Some(h) => self.boards[h.board].color_at(&h.point),
            None => self.background,
        }
    }

    /// True when `p` lies within `margin` of some board.
    pub fn near(&self, p: &Vec3, margin: f64) -> bool {
        self.boards.iter().any(|b| b.distance(p) <= margin)
    }
}

/// Conservative proximity test against the scene's shell margin.
pub fn shell_test(position: &Vec3, scene: &Scene) -> bool {
    scene.near(position, scene.shell_margin)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const WHITE: [u8; 3] = [230, 230, 230];
    const BLACK: [u8; 3] = [20, 20, 20];

    fn board() -> Checkerboard {
        Checkerboard::new(
            Vec3::new(0.0, 0.0, 2.0),
            -Vec3::z(),
            Vec3::x(),
            [0.5, 0.4],
            0.1,
            (WHITE, BLACK),
        )
        .unwrap()
    }

    #[test]
    fn square_center_colors() {
        let b = board();
        assert_eq!(b.color_at(&b.point(0.05, 0.05)), WHITE);
        assert_eq!(b.color_at(&b.point(0.15, 0.05)), BLACK);
        assert_eq!(b.color_at(&b.point(-0.05, 0.05)), BLACK);
        assert_eq!(b.color_at(&b.point(-0.05, -0.05)), WHITE);
    }

    #[test]
    fn ray_hits_square_through_vacuum() {
        let s = Scene::new(vec![board()], [0, 0, 0]);
        let target = board().point(0.15, 0.25);
        let dir = target.normalize();
        let hit = s.nearest_hit(&Vec3::zeros(), &dir, 0.0, f64::INFINITY).unwrap();
        assert_eq!(s.color_of(Some(&hit)), BLACK);
        assert!(s.nearest_hit(&Vec3::zeros(), &Vec3::y(), 0.0, f64::INFINITY).is_none());
    }

    #[test]
    fn shell_far_and_on_plane() {
        let s = Scene::new(vec![board()], [0, 0, 0]);
        assert!(!shell_test(&Vec3::new(0.0, 0.0, 0.5), &s));
        assert!(shell_test(&board().point(0.3, -0.2), &s));
    }

    #[test]
    fn shell_has_no_false_negatives() {
        let b2 = Checkerboard::new(
            Vec3::new(0.3, 0.1, 1.0),
            Vec3::new(0.2, 0.1, -1.0),
            Vec3::y(),
            [0.3, 0.2],
            0.05,
            (WHITE, BLACK),
        )
        .unwrap();
        let s = Scene::new(vec![board(), b2], [0, 0, 0]);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        // brute-force distance: dense sampling of each rectangle
        let samples: Vec<Vec3> = s
            .boards
            .iter()
            .flat_map(|b| {
                let (hu, hv) = (b.half_extent[0], b.half_extent[1]);
                (0..=60).flat_map(move |i| {
                    (0..=60).map(move |j| b.point(-hu + 2.0 * hu * i as f64 / 60.0, -hv + 2.0 * hv * j as f64 / 60.0))
                })
            })
            .collect();
        for _ in 0..2000 {
            let p = Vec3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(0.0..3.0),
            );
            let brute = samples.iter().map(|q| (p - q).norm()).fold(f64::INFINITY, f64::min);
            if brute <= s.shell_margin {
                assert!(shell_test(&p, &s), "missed {p:?}");
            }
        }
    }
}
