use crate::error::{HazeError, Result};
use crate::geom::Vec3;
use crate::ray::{trace_to_plane, Camera, Scene, SteppingPolicy};
use crate::refract::RefractiveField;

/// Apparent image positions of one scene point seen by one camera.
#[derive(Clone, Debug, PartialEq)]
pub struct MarkerTrack {
    pub marker: usize,
    pub camera: usize,
    pub position: Vec3,
    /// Distance from the camera to the marker, m.
    pub depth: f64,
    /// One entry per frame; `None` where the marker was lost.
    pub samples: Vec<Option<[f64; 2]>>,
}

impl MarkerTrack {
    pub fn new(marker: usize, camera: usize, position: Vec3, depth: f64) -> Self {
        Self {
            marker,
            camera,
            position,
            depth,
            samples: Vec::new(),
        }
    }

    pub fn valid(&self) -> impl Iterator<Item = [f64; 2]> + '_ {
        self.samples.iter().flatten().copied()
    }

    pub fn lost(&self) -> usize {
        self.samples.iter().filter(|s| s.is_none()).count()
    }

    pub fn mean(&self) -> Option<[f64; 2]> {
        let n = self.valid().count();
        if n == 0 {
            return None;
        }
        let s = self.valid().fold([0.0, 0.0], |a, p| [a[0] + p[0], a[1] + p[1]]);
        Some([s[0] / n as f64, s[1] / n as f64])
    }

    /// Per-frame displacement from the track mean; lost frames stay `None`.
    pub fn fluctuations(&self) -> Vec<Option<[f64; 2]>> {
        let Some(m) = self.mean() else {
            return self.samples.clone();
        };
        self.samples
            .iter()
            .map(|s| s.map(|p| [p[0] - m[0], p[1] - m[1]]))
            .collect()
    }
}

/// Unbiased sample variance of the u and v series, px^2.
pub fn displacement_variance(track: &MarkerTrack) -> Result<(f64, f64)> {
    let n = track.valid().count();
    if n < 2 {
        return Err(HazeError::Parameter(format!(
            "marker {} has {n} valid frames, need at least 2",
            track.marker
        )));
    }
    let m = track.mean().expect("non-empty track");
    let (su, sv) = track.valid().fold((0.0, 0.0), |(su, sv), p| {
        (su + (p[0] - m[0]).powi(2), sv + (p[1] - m[1]).powi(2))
    });
    let d = (n - 1) as f64;
    Ok((su / d, sv / d))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares `y = slope x + intercept`. A perfect fit (including
/// constant `y`) has `r_squared = 1`.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(HazeError::Parameter(
            "line fit needs matching series of length >= 2".into(),
        ));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(HazeError::Parameter("line fit needs distinct x values".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - slope * x - intercept).powi(2))
        .sum();
    let r_squared = if ss_tot == 0.0 {
        if ss_res == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        1.0 - ss_res / ss_tot
    };
    Ok(LinearFit {
        slope,
        intercept,
        r_squared,
    })
}

/// Fits total displacement variance (u plus v) against marker depth.
pub fn depth_linearity(tracks: &[MarkerTrack]) -> Result<LinearFit> {
    let mut depths: Vec<f64> = tracks.iter().map(|t| t.depth).collect();
    depths.sort_by(f64::total_cmp);
    depths.dedup();
    if depths.len() < 3 {
        return Err(HazeError::Parameter(format!(
            "depth fit needs at least 3 distinct depths, got {}",
            depths.len()
        )));
    }
    let mut xs = Vec::with_capacity(tracks.len());
    let mut ys = Vec::with_capacity(tracks.len());
    for t in tracks {
        let (vu, vv) = displacement_variance(t)?;
        xs.push(t.depth);
        ys.push(vu + vv);
    }
    fit_line(&xs, &ys)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrackingOptions {
    /// Largest Chebyshev ring searched around the nominal projection, px.
    pub search_radius: usize,
    /// Largest accepted ray-marker approach distance, m. `None` uses half a
    /// checker square of the marker's board.
    pub tolerance: Option<f64>,
    /// Newton iterations of the sub-pixel refinement; zero keeps the best
    /// pixel center.
    pub refine_iterations: usize,
}

impl Default for TrackingOptions {
    fn default() -> Self {
        Self {
            search_radius: 32,
            tolerance: None,
            refine_iterations: 8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ApparentPosition {
    pub u: f64,
    pub v: f64,
    /// Best pixel of the integer search.
    pub pixel: (usize, usize),
    /// Distance between the marker and the ray through `(u, v)` where it
    /// crosses the marker's board plane, m.
    pub distance: f64,
}

struct Target<'a, F: ?Sized> {
    camera: &'a Camera,
    field: &'a F,
    policy: &'a SteppingPolicy,
    point: Vec3,
    normal: Vec3,
}

impl<F: RefractiveField + ?Sized> Target<'_, F> {
    /// Offset of the plane crossing from the marker.
    fn offset(&self, u: f64, v: f64) -> Result<Option<Vec3>> {
        let dir = self.camera.direction(u, v);
        let crossing = trace_to_plane(
            &self.camera.position,
            &dir,
            self.field,
            &self.point,
            &self.normal,
            self.policy,
        )?;
        Ok(crossing.map(|c| c - self.point))
    }

    fn distance(&self, u: f64, v: f64) -> Result<f64> {
        Ok(self.offset(u, v)?.map_or(f64::INFINITY, |o| o.norm()))
    }
}

/// Plane normal and default tolerance for a marker: taken from the board
/// nearest to it, or facing the camera when the scene has no boards.
fn marker_plane(camera: &Camera, scene: &Scene, point: &Vec3) -> (Vec3, f64) {
    scene
        .boards
        .iter()
        .min_by(|a, b| a.distance(point).total_cmp(&b.distance(point)))
        .map(|b| (b.normal, 0.5 * b.square))
        .unwrap_or((camera.forward, f64::INFINITY))
}

/// Distance between the marker and the ray through `(u, v)` at the board plane.
pub fn approach_distance<F: RefractiveField + ?Sized>(
    camera: &Camera,
    field: &F,
    scene: &Scene,
    marker: &Vec3,
    policy: &SteppingPolicy,
    u: f64,
    v: f64,
) -> Result<f64> {
    let (normal, _) = marker_plane(camera, scene, marker);
    Target {
        camera,
        field,
        policy,
        point: *marker,
        normal,
    }
    .distance(u, v)
}

pub fn apparent_position<F: RefractiveField + ?Sized>(
    camera: &Camera,
    field: &F,
    scene: &Scene,
    marker: &Vec3,
    policy: &SteppingPolicy,
) -> Result<ApparentPosition> {
    apparent_position_with(camera, field, scene, marker, policy, &TrackingOptions::default())
}

/// Continuous pixel position whose refracted ray passes nearest the marker.
///
/// Pixel centers are scanned ring by ring around the pinhole projection; the
/// scan stops two rings past the best pixel found so far. Ties go to the
/// smallest `(row, column)`. The best center is then refined by Newton
/// iterations on the in-plane offset, with a finite-difference Jacobian.
pub fn apparent_position_with<F: RefractiveField + ?Sized>(
    camera: &Camera,
    field: &F,
    scene: &Scene,
    marker: &Vec3,
    policy: &SteppingPolicy,
    options: &TrackingOptions,
) -> Result<ApparentPosition> {
    let (normal, board_tolerance) = marker_plane(camera, scene, marker);
    let tolerance = options.tolerance.unwrap_or(board_tolerance);
    let (u0, v0) = camera
        .project(marker)
        .filter(|&(u, v)| u >= 0.0 && v >= 0.0 && u < camera.width as f64 && v < camera.height as f64)
        .ok_or_else(|| HazeError::Parameter(format!("marker at {marker:?} projects outside the image")))?;
    let target = Target {
        camera,
        field,
        policy,
        point: *marker,
        normal,
    };

    let (cx, cy) = (u0.floor() as i64, v0.floor() as i64);
    let (w, h) = (camera.width as i64, camera.height as i64);
    let mut best: Option<(f64, i64, i64)> = None;
    let mut best_ring = 0;
    for ring in 0..=options.search_radius as i64 {
        if best.is_some() && ring > best_ring + 2 {
            break;
        }
        for py in (cy - ring)..=(cy + ring) {
            for px in (cx - ring)..=(cx + ring) {
                if (px - cx).abs().max((py - cy).abs()) != ring || px < 0 || py < 0 || px >= w || py >= h {
                    continue;
                }
                let d = target.distance(px as f64 + 0.5, py as f64 + 0.5)?;
                if !d.is_finite() {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((bd, bx, by)) => d < bd || (d == bd && (py, px) < (by, bx)),
                };
                if better {
                    best = Some((d, px, py));
                    best_ring = ring;
                }
            }
        }
    }
    let (d_px, bx, by) = best.ok_or(HazeError::MarkerLost {
        distance: f64::INFINITY,
        tolerance,
    })?;

    let (mut u, mut v) = (bx as f64 + 0.5, by as f64 + 0.5);
    let mut distance = d_px;
    let mut offset = target.offset(u, v)?.expect("finite distance implies a crossing");
    // in-plane frame for the 2x2 Newton system
    let e1 = normal
        .cross(&camera.up)
        .try_normalize(1e-9)
        .unwrap_or_else(|| normal.cross(&camera.right).normalize());
    let e2 = normal.cross(&e1);
    let step = 0.25;
    for _ in 0..options.refine_iterations {
        if distance == 0.0 {
            break;
        }
        let (Some(du), Some(dv)) = (target.offset(u + step, v)?, target.offset(u, v + step)?) else {
            break;
        };
        let j = [
            [(du - offset).dot(&e1) / step, (dv - offset).dot(&e1) / step],
            [(du - offset).dot(&e2) / step, (dv - offset).dot(&e2) / step],
        ];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det == 0.0 || !det.is_finite() {
            break;
        }
        let (r1, r2) = (offset.dot(&e1), offset.dot(&e2));
        let su = -(j[1][1] * r1 - j[0][1] * r2) / det;
        let sv = -(-j[1][0] * r1 + j[0][0] * r2) / det;
        // stay within the best pixel's neighborhood
        let nu = (u + su).clamp(bx as f64 - 0.5, bx as f64 + 1.5);
        let nv = (v + sv).clamp(by as f64 - 0.5, by as f64 + 1.5);
        let Some(o) = target.offset(nu, nv)? else {
            break;
        };
        if o.norm() >= distance {
            break;
        }
        let converged = (nu - u).abs().max((nv - v).abs()) < 1e-6;
        (u, v, offset, distance) = (nu, nv, o, o.norm());
        if converged {
            break;
        }
    }

    if distance > tolerance {
        return Err(HazeError::MarkerLost { distance, tolerance });
    }
    Ok(ApparentPosition {
        u,
        v,
        pixel: (bx as usize, by as usize),
        distance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Aabb;
    use crate::ray::Checkerboard;
    use crate::refract::{GridSpec, VoxelGrid};

    fn track(us: &[f64], vs: &[f64], depth: f64) -> MarkerTrack {
        let mut t = MarkerTrack::new(0, 0, Vec3::zeros(), depth);
        t.samples = us.iter().zip(vs).map(|(&u, &v)| Some([u, v])).collect();
        t
    }

    #[test]
    fn variance_examples() {
        assert_eq!(
            displacement_variance(&track(&[3.0; 4], &[1.0; 4], 1.0)).unwrap(),
            (0.0, 0.0)
        );
        assert_eq!(
            displacement_variance(&track(&[0.0, 2.0], &[1.0, 1.0], 1.0)).unwrap(),
            (2.0, 0.0)
        );
        assert!(displacement_variance(&track(&[1.0], &[1.0], 1.0)).is_err());
    }

    #[test]
    fn lost_frames_are_skipped() {
        let mut t = track(&[0.0, 2.0], &[1.0, 1.0], 1.0);
        t.samples.insert(1, None);
        assert_eq!(t.lost(), 1);
        assert_eq!(displacement_variance(&t).unwrap(), (2.0, 0.0));
        assert_eq!(t.fluctuations()[1], None);
    }

    #[test]
    fn depth_fit_on_proportional_and_constant_inputs() {
        // variance of {0, 2a} is 2a^2, so a = sqrt(c L / 2) gives total variance c L
        let c = 0.37;
        let tracks: Vec<MarkerTrack> = [1.0, 2.0, 3.5, 5.0]
            .iter()
            .map(|&l| {
                let a = (c * l / 2.0f64).sqrt();
                track(&[0.0, 2.0 * a], &[0.0, 0.0], l)
            })
            .collect();
        let fit = depth_linearity(&tracks).unwrap();
        assert!((fit.slope - c).abs() <= 1e-9 * c);
        assert!(fit.intercept.abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);

        let flat: Vec<MarkerTrack> = [1.0, 2.0, 3.0]
            .iter()
            .map(|&l| track(&[0.0, 1.0], &[0.0, 0.0], l))
            .collect();
        let fit = depth_linearity(&flat).unwrap();
        assert_eq!(fit.slope, 0.0);
        assert!(depth_linearity(&flat[..2]).is_err());
    }

    fn setup(gladstone_dale: f64, density: impl Fn(&Vec3) -> f64) -> (Camera, VoxelGrid, Scene) {
        let spec = GridSpec {
            resolution: [12, 12, 12],
            bounds: Aabb::new(Vec3::new(-0.5, -0.5, 0.5), Vec3::new(0.5, 0.5, 1.5)),
            gladstone_dale,
        };
        let mut values = vec![0.0; spec.voxel_count()];
        for k in 0..12 {
            for j in 0..12 {
                for i in 0..12 {
                    values[spec.index(i, j, k)] = density(&spec.voxel_center(i, j, k));
                }
            }
        }
        let grid = VoxelGrid::from_densities(spec, values).unwrap();
        let board = Checkerboard::new(
            Vec3::new(0.0, 0.0, 2.5),
            Vec3::new(0.0, 0.0, -1.0),
            Vec3::new(1.0, 0.0, 0.0),
            [1.0, 1.0],
            0.1,
            ([255, 255, 255], [0, 0, 0]),
        )
        .unwrap();
        let cam = Camera::look_at(
            Vec3::zeros(),
            Vec3::new(0.0, 0.0, 1.0),
            Vec3::new(0.0, 1.0, 0.0),
            0.5,
            64,
            64,
        )
        .unwrap();
        (cam, grid, Scene::new(vec![board], [0, 0, 0]))
    }

    #[test]
    fn vacuum_recovers_pinhole_projection() {
        let (cam, grid, scene) = setup(0.0, |_| 0.0);
        let p = SteppingPolicy::default();
        for marker in [
            Vec3::new(0.1, -0.2, 2.5),
            Vec3::new(-0.33, 0.05, 2.5),
            Vec3::new(0.0, 0.0, 2.5),
        ] {
            let (u, v) = cam.project(&marker).unwrap();
            let a = apparent_position(&cam, &grid, &scene, &marker, &p).unwrap();
            assert!((a.u - u).abs() < 0.01 && (a.v - v).abs() < 0.01, "{a:?} vs {u} {v}");
            assert!(a.distance < 1e-6);
        }
    }

    #[test]
    fn upward_index_gradient_moves_marker_down_the_image() {
        // rays bend toward higher index; to hit the same point they must leave
        // the camera aimed lower, so the marker appears lower (larger v)
        let (cam, grid, scene) = setup(1e-3, |x| 20.0 * (x.y + 0.5));
        let marker = Vec3::new(0.05, 0.1, 2.5);
        let (u, v) = cam.project(&marker).unwrap();
        let a = apparent_position(&cam, &grid, &scene, &marker, &SteppingPolicy::default()).unwrap();
        assert!(a.v > v + 0.1, "{} vs {v}", a.v);
        assert!((a.u - u).abs() < 0.05);
    }

    #[test]
    fn marker_behind_camera_is_rejected() {
        let (cam, grid, scene) = setup(0.0, |_| 0.0);
        let r = apparent_position(
            &cam,
            &grid,
            &scene,
            &Vec3::new(0.0, 0.0, -1.0),
            &SteppingPolicy::default(),
        );
        assert!(r.is_err());
    }

    #[test]
    fn lost_when_tolerance_is_tiny() {
        let (cam, grid, scene) = setup(1e-3, |x| 20.0 * (x.y + 0.5));
        let opts = TrackingOptions {
            tolerance: Some(1e-15),
            refine_iterations: 0,
            ..TrackingOptions::default()
        };
        let r = apparent_position_with(
            &cam,
            &grid,
            &scene,
            &Vec3::new(0.01, 0.02, 2.5),
            &SteppingPolicy::default(),
            &opts,
        );
        assert!(matches!(r, Err(HazeError::MarkerLost { .. })));
    }
}
