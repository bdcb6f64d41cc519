use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

use super::config::ScenarioConfig;
use crate::error::{HazeError, Result};
use crate::metrics::{
    apparent_position_with, depth_linearity, displacement_variance, kld, mean_vorticity, mse_curves, tke, Axis,
    DisplacementHistogram, LinearFit, MarkerTrack, TrackingOptions, HISTOGRAM_BINS, HISTOGRAM_FLOOR,
};
use crate::ray::{render, write_step_map, Camera, Image, SteppingPolicy};
use crate::refract::{splat_density, GridSpec, VoxelGrid};
use crate::sph::{lattice_particles, write_particles, Simulation, SpikyKernel};

/// Optional artifact directory; every writer is a no-op without one.
#[derive(Clone, Debug, Default)]
pub struct Output {
    dir: Option<PathBuf>,
}

impl Output {
    pub fn new(dir: Option<&Path>) -> Result<Self> {
        if let Some(d) = dir {
            fs::create_dir_all(d).map_err(|e| HazeError::io(d, e))?;
        }
        Ok(Self {
            dir: dir.map(Path::to_path_buf),
        })
    }

    pub fn none() -> Self {
        Self::default()
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    fn write_with(&self, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
        let Some(dir) = &self.dir else {
            return Ok(());
        };
        let path = dir.join(name);
        let file = File::create(&path).map_err(|e| HazeError::io(&path, e))?;
        let mut w = BufWriter::new(file);
        f(&mut w).and_then(|_| w.flush()).map_err(|e| HazeError::io(&path, e))
    }

    fn write_str(&self, name: &str, text: &str) -> Result<()> {
        self.write_with(name, |w| w.write_all(text.as_bytes()))
    }

    fn write_summary<T: Serialize>(&self, summary: &T) -> Result<()> {
        let text = toml::to_string(summary).map_err(|e| HazeError::Validation(format!("summary: {e}")))?;
        self.write_str("summary.toml", &text)
    }
}

/// Particle state plus the voxel grid it is rendered through.
pub struct Pipeline {
    sim: Simulation,
    spec: GridSpec,
    kernel: SpikyKernel,
    steps_per_frame: usize,
}

impl Pipeline {
    pub fn new(cfg: &ScenarioConfig) -> Result<Self> {
        let particles = lattice_particles(&cfg.particles.lattice(), &cfg.sim, cfg.sim.seed)?;
        let sim = Simulation::new(particles, cfg.sim.clone(), cfg.sources.clone())?;
        Ok(Self {
            kernel: cfg.sim.kernel()?,
            spec: cfg.grid_spec(),
            sim,
            steps_per_frame: cfg.schedule.steps_per_frame,
        })
    }

    /// Builds the pipeline and runs the warmup steps.
    pub fn warmed_up(cfg: &ScenarioConfig) -> Result<Self> {
        let mut p = Self::new(cfg)?;
        for _ in 0..cfg.schedule.warmup_steps {
            p.sim.step().map_err(|e| e.at_frame(0))?;
        }
        Ok(p)
    }

    /// Advances by one frame's worth of steps.
    pub fn advance(&mut self, frame: usize) -> Result<()> {
        for _ in 0..self.steps_per_frame {
            self.sim.step().map_err(|e| e.at_frame(frame))?;
        }
        Ok(())
    }

    pub fn simulation(&self) -> &Simulation {
        &self.sim
    }

    pub fn voxelize(&self) -> Result<VoxelGrid> {
        splat_density(self.sim.particles(), &self.kernel, &self.spec)
    }

    pub fn stats(&self, frame: usize) -> Result<FrameStats> {
        let ps = self.sim.particles();
        Ok(FrameStats {
            frame,
            step: self.sim.steps_taken(),
            tke: tke(ps)?,
            mean_vorticity: mean_vorticity(ps, self.sim.neighbors(), &self.kernel),
            max_speed: ps.iter().map(|p| p.velocity.norm()).fold(0.0, f64::max),
            mean_temperature: ps.iter().map(|p| p.temperature).sum::<f64>() / ps.len() as f64,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FrameStats {
    pub frame: usize,
    pub step: u64,
    pub tke: f64,
    pub mean_vorticity: f64,
    pub max_speed: f64,
    pub mean_temperature: f64,
}

fn write_stats_csv(out: &Output, name: &str, stats: &[FrameStats]) -> Result<()> {
    out.write_with(name, |w| {
        writeln!(
            w,
            "frame,step,tke_m2_s2,mean_vorticity_1_s,max_speed_m_s,mean_temperature"
        )?;
        for s in stats {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                s.frame, s.step, s.tke, s.mean_vorticity, s.max_speed, s.mean_temperature
            )?;
        }
        Ok(())
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SimulateReport {
    pub scenario: String,
    pub particles: usize,
    pub frames: Vec<FrameStats>,
}

/// Warmup, then one stats row (and optionally a particle dump) per frame.
pub fn run_simulate(cfg: &ScenarioConfig, out: &Output) -> Result<SimulateReport> {
    let mut pipe = Pipeline::warmed_up(cfg)?;
    let mut frames = Vec::with_capacity(cfg.schedule.frames);
    for f in 0..cfg.schedule.frames {
        pipe.advance(f)?;
        frames.push(pipe.stats(f)?);
        if cfg.schedule.dump_particles {
            out.write_with(&format!("particles_frame{f:04}.csv"), |w| {
                write_particles(w, f, pipe.simulation().particles())
            })?;
        }
    }
    write_stats_csv(out, "stats.csv", &frames)?;
    let report = SimulateReport {
        scenario: cfg.name.clone(),
        particles: pipe.simulation().particles().len(),
        frames,
    };
    out.write_summary(&SimulateSummary::from(&report))?;
    Ok(report)
}

#[derive(Serialize)]
struct SimulateSummary {
    scenario: String,
    particles: usize,
    frames: usize,
    final_tke: f64,
    peak_tke: f64,
    final_mean_vorticity: f64,
}

impl From<&SimulateReport> for SimulateSummary {
    fn from(r: &SimulateReport) -> Self {
        let last = r.frames.last();
        Self {
            scenario: r.scenario.clone(),
            particles: r.particles,
            frames: r.frames.len(),
            final_tke: last.map_or(0.0, |s| s.tke),
            peak_tke: r.frames.iter().map(|s| s.tke).fold(0.0, f64::max),
            final_mean_vorticity: last.map_or(0.0, |s| s.mean_vorticity),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RenderedFrame {
    pub frame: usize,
    pub camera: usize,
    pub total_steps: u64,
    pub truncated_rays: usize,
}

#[derive(Clone, Debug)]
pub struct RenderReport {
    pub frames: Vec<RenderedFrame>,
    /// Images indexed `[camera][frame]`.
    pub images: Vec<Vec<Image>>,
}

/// Renders every camera at every recorded frame.
pub fn run_render(cfg: &ScenarioConfig, out: &Output) -> Result<RenderReport> {
    let cameras = cfg.build_cameras()?;
    if cameras.is_empty() {
        return Err(HazeError::config("cameras", "rendering needs at least one camera"));
    }
    let mut pipe = Pipeline::warmed_up(cfg)?;
    let mut frames = Vec::new();
    let mut images = vec![Vec::new(); cameras.len()];
    for f in 0..cfg.schedule.frames {
        pipe.advance(f)?;
        let grid = pipe.voxelize().map_err(|e| e.at_frame(f))?;
        for (c, cam) in cameras.iter().enumerate() {
            let r =
                render(cam, &grid, &cfg.scene, &cfg.stepping, cfg.validation.supersample).map_err(|e| e.at_frame(f))?;
            out.write_with(&format!("cam{c}_frame{f}.ppm"), |w| r.image.write_ppm(w))?;
            if out.dir().is_some() && f == 0 {
                let mut buf = Vec::new();
                write_step_map(&mut buf, cam.width, cam.height, &r.step_counts)?;
                out.write_with(&format!("cam{c}_steps.pgm"), |w| w.write_all(&buf))?;
            }
            frames.push(RenderedFrame {
                frame: f,
                camera: c,
                total_steps: r.total_steps,
                truncated_rays: r.truncated_rays,
            });
            images[c].push(r.image);
        }
    }
    out.write_with("render_steps.csv", |w| {
        writeln!(w, "frame,camera,total_steps,truncated_rays")?;
        for r in &frames {
            writeln!(w, "{},{},{},{}", r.frame, r.camera, r.total_steps, r.truncated_rays)?;
        }
        Ok(())
    })?;
    #[derive(Serialize)]
    struct Summary<'a> {
        scenario: &'a str,
        cameras: usize,
        frames: usize,
        total_steps: u64,
    }
    out.write_summary(&Summary {
        scenario: &cfg.name,
        cameras: cameras.len(),
        frames: cfg.schedule.frames,
        total_steps: frames.iter().map(|r| r.total_steps).sum(),
    })?;
    Ok(RenderReport { frames, images })
}

/// Marker tracks for every camera, indexed `camera * markers + marker`.
fn new_tracks(cfg: &ScenarioConfig, cameras: &[Camera]) -> Vec<MarkerTrack> {
    let points = cfg.marker_points();
    let mut tracks = Vec::with_capacity(points.len() * cameras.len());
    for (c, cam) in cameras.iter().enumerate() {
        for (m, p) in points.iter().enumerate() {
            tracks.push(MarkerTrack::new(m, c, *p, (p - cam.position).norm()));
        }
    }
    tracks
}

fn tracking_options(cfg: &ScenarioConfig) -> TrackingOptions {
    TrackingOptions {
        search_radius: cfg.validation.search_radius_px,
        ..TrackingOptions::default()
    }
}

/// Appends one sample per track for the current volume. Lost markers
/// record `None`; other errors abort.
fn track_frame(
    cfg: &ScenarioConfig,
    cameras: &[Camera],
    grid: &VoxelGrid,
    policy: &SteppingPolicy,
    tracks: &mut [MarkerTrack],
) -> Result<()> {
    let opts = tracking_options(cfg);
    let samples: Vec<Option<[f64; 2]>> = tracks
        .par_iter()
        .map(
            |t| match apparent_position_with(&cameras[t.camera], grid, &cfg.scene, &t.position, policy, &opts) {
                Ok(a) => Ok(Some([a.u, a.v])),
                Err(HazeError::MarkerLost { .. }) => Ok(None),
                Err(e) => Err(e),
            },
        )
        .collect::<Result<_>>()?;
    for (t, s) in tracks.iter_mut().zip(samples) {
        t.samples.push(s);
    }
    Ok(())
}

/// Runs the frame schedule and tracks every marker in every camera.
fn track_run(cfg: &ScenarioConfig) -> Result<Vec<MarkerTrack>> {
    let cameras = cfg.build_cameras()?;
    if cfg.markers.is_empty() || cameras.is_empty() {
        return Err(HazeError::config("markers", "tracking needs markers and a camera"));
    }
    let mut tracks = new_tracks(cfg, &cameras);
    let mut pipe = Pipeline::warmed_up(cfg)?;
    for f in 0..cfg.schedule.frames {
        pipe.advance(f)?;
        let grid = pipe.voxelize().map_err(|e| e.at_frame(f))?;
        track_frame(cfg, &cameras, &grid, &cfg.stepping, &mut tracks).map_err(|e| e.at_frame(f))?;
    }
    Ok(tracks)
}

fn write_tracks_csv(out: &Output, name: &str, tracks: &[MarkerTrack]) -> Result<()> {
    let frames = tracks.first().map_or(0, |t| t.samples.len());
    out.write_with(name, |w| {
        writeln!(w, "frame,camera,marker,u_px,v_px,depth_m")?;
        for f in 0..frames {
            for t in tracks {
                match t.samples[f] {
                    Some([u, v]) => writeln!(w, "{f},{},{},{u},{v},{}", t.camera, t.marker, t.depth)?,
                    None => writeln!(w, "{f},{},{},lost,lost,{}", t.camera, t.marker, t.depth)?,
                }
            }
        }
        Ok(())
    })
}

fn loss_fraction(tracks: &[MarkerTrack]) -> f64 {
    let total: usize = tracks.iter().map(|t| t.samples.len()).sum();
    let lost: usize = tracks.iter().map(|t| t.lost()).sum();
    if total == 0 {
        0.0
    } else {
        lost as f64 / total as f64
    }
}

fn check_loss(cfg: &ScenarioConfig, tracks: &[MarkerTrack]) -> Result<()> {
    let loss = loss_fraction(tracks);
    if loss > 0.0 {
        warn!("{}: {:.1}% of marker samples lost", cfg.name, 100.0 * loss);
    }
    if loss > cfg.validation.max_marker_loss {
        return Err(HazeError::Validation(format!(
            "marker loss {:.1}% exceeds {:.1}%",
            100.0 * loss,
            100.0 * cfg.validation.max_marker_loss
        )));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DepthMode {
    Discrete,
    Continuous,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoardVariance {
    pub board: usize,
    pub mean_depth_m: f64,
    /// Mean over the board's markers of `var_u + var_v`, px^2.
    pub variance_px2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DepthReport {
    pub scenario: String,
    pub frames: usize,
    pub marker_loss: f64,
    /// Per-board pooled variance, nearest board first.
    pub boards: Vec<BoardVariance>,
    /// Farthest over nearest board variance.
    pub far_near_ratio: f64,
    pub fit: Option<DepthFit>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DepthFit {
    pub slope_px2_per_m: f64,
    pub intercept_px2: f64,
    pub r_squared: f64,
}

impl From<LinearFit> for DepthFit {
    fn from(f: LinearFit) -> Self {
        Self {
            slope_px2_per_m: f.slope,
            intercept_px2: f.intercept,
            r_squared: f.r_squared,
        }
    }
}

/// Displacement variance against marker depth as seen by the first camera.
pub fn run_validate_depth(cfg: &ScenarioConfig, mode: DepthMode, out: &Output) -> Result<DepthReport> {
    let mut tracks = track_run(cfg)?;
    tracks.retain(|t| t.camera == 0);
    write_tracks_csv(out, "markers.csv", &tracks)?;
    let marker_loss = loss_fraction(&tracks);

    let boards_of = cfg.marker_boards();
    let mut boards = Vec::new();
    for b in 0..cfg.scene.boards.len() {
        let on_board: Vec<&MarkerTrack> = tracks.iter().filter(|t| boards_of[t.marker] == b).collect();
        if on_board.is_empty() {
            continue;
        }
        let mut variance = 0.0;
        for t in &on_board {
            let (vu, vv) = displacement_variance(t)?;
            variance += vu + vv;
        }
        boards.push(BoardVariance {
            board: b,
            mean_depth_m: on_board.iter().map(|t| t.depth).sum::<f64>() / on_board.len() as f64,
            variance_px2: variance / on_board.len() as f64,
        });
    }
    boards.sort_by(|a, b| a.mean_depth_m.total_cmp(&b.mean_depth_m));
    let far_near_ratio = match (boards.first(), boards.last()) {
        (Some(n), Some(f)) if boards.len() > 1 => f.variance_px2 / n.variance_px2,
        _ => f64::NAN,
    };
    let fit = match mode {
        DepthMode::Continuous => Some(depth_linearity(&tracks)?.into()),
        DepthMode::Discrete => None,
    };
    let report = DepthReport {
        scenario: cfg.name.clone(),
        frames: cfg.schedule.frames,
        marker_loss,
        boards,
        far_near_ratio,
        fit,
    };
    out.write_summary(&report)?;
    check_loss(cfg, &tracks)?;
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CrossViewMetrics {
    pub kld_x: f64,
    pub kld_y: f64,
    pub mse_x: f64,
    pub mse_y: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MultiviewReport {
    pub scenario: String,
    pub frames: usize,
    pub samples: usize,
    pub cross_view: CrossViewMetrics,
    pub negative_control: CrossViewMetrics,
    /// True when every cross-view metric is below its negative control.
    pub pass: bool,
}

/// Paired fluctuation series of two tracks sets over (marker, frame)
/// samples valid in both.
fn paired_fluctuations(a: &[MarkerTrack], b: &[MarkerTrack]) -> [(Vec<f64>, Vec<f64>); 2] {
    let mut xs = (Vec::new(), Vec::new());
    let mut ys = (Vec::new(), Vec::new());
    for (ta, tb) in a.iter().zip(b) {
        for (sa, sb) in ta.fluctuations().into_iter().zip(tb.fluctuations()) {
            if let (Some(pa), Some(pb)) = (sa, sb) {
                xs.0.push(pa[0]);
                xs.1.push(pb[0]);
                ys.0.push(pa[1]);
                ys.1.push(pb[1]);
            }
        }
    }
    [xs, ys]
}

fn cross_metrics(a: &[MarkerTrack], b: &[MarkerTrack]) -> Result<(CrossViewMetrics, usize)> {
    let [x, y] = paired_fluctuations(a, b);
    let divergence = |axis: Axis, p: &[f64], q: &[f64]| -> Result<f64> {
        let edges = DisplacementHistogram::shared_edges(&[p, q], HISTOGRAM_BINS);
        let hp = DisplacementHistogram::from_values(axis, p, edges.clone(), HISTOGRAM_FLOOR)?;
        let hq = DisplacementHistogram::from_values(axis, q, edges, HISTOGRAM_FLOOR)?;
        kld(&hp, &hq)
    };
    Ok((
        CrossViewMetrics {
            kld_x: divergence(Axis::X, &x.0, &x.1)?,
            kld_y: divergence(Axis::Y, &y.0, &y.1)?,
            mse_x: mse_curves(&x.0, &x.1)?,
            mse_y: mse_curves(&y.0, &y.1)?,
        },
        x.0.len(),
    ))
}

/// Cross-view consistency of two cameras against a reseeded negative control
/// (first camera of this run versus second camera of an independent run).
pub fn run_validate_multiview(cfg: &ScenarioConfig, out: &Output) -> Result<MultiviewReport> {
    if cfg.cameras.len() != 2 {
        return Err(HazeError::config(
            "cameras",
            "multi-view validation needs exactly 2 cameras",
        ));
    }
    if cfg.particles.jitter_m == 0.0 {
        warn!("{}: zero jitter, the reseeded control run is identical", cfg.name);
    }
    let tracks = track_run(cfg)?;
    let mut reseeded = cfg.clone();
    reseeded.sim.seed = cfg.sim.seed.wrapping_add(1);
    let control = track_run(&reseeded)?;
    write_tracks_csv(out, "markers.csv", &tracks)?;
    write_tracks_csv(out, "markers_control.csv", &control)?;

    let cam =
        |ts: &[MarkerTrack], c: usize| -> Vec<MarkerTrack> { ts.iter().filter(|t| t.camera == c).cloned().collect() };
    let (a0, a1, b1) = (cam(&tracks, 0), cam(&tracks, 1), cam(&control, 1));
    let (cross_view, samples) = cross_metrics(&a0, &a1)?;
    let (negative_control, _) = cross_metrics(&a0, &b1)?;
    let pass = cross_view.kld_x < negative_control.kld_x
        && cross_view.kld_y < negative_control.kld_y
        && cross_view.mse_x < negative_control.mse_x
        && cross_view.mse_y < negative_control.mse_y;
    let report = MultiviewReport {
        scenario: cfg.name.clone(),
        frames: cfg.schedule.frames,
        samples,
        cross_view,
        negative_control,
        pass,
    };
    out.write_summary(&report)?;
    check_loss(cfg, &tracks)?;
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VariantResult {
    pub name: String,
    pub buoyancy_constant: f64,
    pub convection_multiplier: f64,
    /// Means over the recorded frames.
    pub mean_tke: f64,
    pub mean_vorticity: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AblationReport {
    pub scenario: String,
    pub tke_full_above_convection: bool,
    pub tke_convection_above_buoyancy: bool,
    pub vorticity_full_above_both: bool,
    pub variants: Vec<VariantResult>,
}

impl AblationReport {
    pub fn variant(&self, name: &str) -> Option<&VariantResult> {
        self.variants.iter().find(|v| v.name == name)
    }

    pub fn ordering_holds(&self) -> bool {
        self.tke_full_above_convection && self.tke_convection_above_buoyancy && self.vorticity_full_above_both
    }
}

/// Full model against buoyancy-only (`beta = 0`) and convection-only
/// (`K = 0`) variants with identical seeds and schedules.
pub fn run_ablation(cfg: &ScenarioConfig, out: &Output) -> Result<AblationReport> {
    let variants = [
        ("full", cfg.sim.buoyancy, cfg.sim.convection),
        ("convection-only", 0.0, cfg.sim.convection),
        ("buoyancy-only", cfg.sim.buoyancy, 0.0),
    ];
    let mut results = Vec::new();
    let mut rows = Vec::new();
    for (name, k, beta) in variants {
        let mut v = cfg.clone();
        v.sim.buoyancy = k;
        v.sim.convection = beta;
        let outcome = (|| -> Result<Vec<FrameStats>> {
            let mut pipe = Pipeline::warmed_up(&v)?;
            let mut stats = Vec::new();
            for f in 0..v.schedule.frames {
                pipe.advance(f)?;
                stats.push(pipe.stats(f)?);
            }
            Ok(stats)
        })();
        let (mean_tke, mean_vort, failure) = match outcome {
            Ok(stats) => {
                let n = stats.len() as f64;
                let t = stats.iter().map(|s| s.tke).sum::<f64>() / n;
                let w = stats.iter().map(|s| s.mean_vorticity).sum::<f64>() / n;
                rows.extend(stats.into_iter().map(|s| (name, s)));
                (t, w, None)
            }
            Err(e) => {
                warn!("ablation variant {name} failed: {e}");
                (f64::NAN, f64::NAN, Some(e.to_string()))
            }
        };
        results.push(VariantResult {
            name: name.into(),
            buoyancy_constant: k,
            convection_multiplier: beta,
            mean_tke,
            mean_vorticity: mean_vort,
            failure,
        });
    }
    out.write_with("ablation.csv", |w| {
        writeln!(w, "variant,frame,step,tke_m2_s2,mean_vorticity_1_s")?;
        for (name, s) in &rows {
            writeln!(w, "{name},{},{},{},{}", s.frame, s.step, s.tke, s.mean_vorticity)?;
        }
        Ok(())
    })?;
    let (full, conv, buoy) = (&results[0], &results[1], &results[2]);
    let report = AblationReport {
        scenario: cfg.name.clone(),
        tke_full_above_convection: full.mean_tke > conv.mean_tke,
        tke_convection_above_buoyancy: conv.mean_tke > buoy.mean_tke,
        vorticity_full_above_both: full.mean_vorticity > conv.mean_vorticity
            && full.mean_vorticity > buoy.mean_vorticity,
        variants: results,
    };
    out.write_summary(&report)?;
    if let Some(failed) = report.variants.iter().find(|v| v.failure.is_some()) {
        return Err(HazeError::Validation(format!(
            "ablation variant {} failed",
            failed.name
        )));
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRow {
    pub policy: String,
    pub theta_max_rad: f64,
    pub ds_m: f64,
    pub total_steps: u64,
    pub rmse_vs_reference: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchReport {
    pub scenario: String,
    pub reference_steps: u64,
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn row(&self, policy: &str) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.policy == policy)
    }
}

/// Renders the frame after warmup under the configured adaptive policy, the
/// static policy, and a `theta_max` sweep, each compared with a fine static
/// reference. Wall times go to `timing.log`, the only non-deterministic
/// artifact.
pub fn run_bench_stepping(cfg: &ScenarioConfig, out: &Output) -> Result<BenchReport> {
    let cameras = cfg.build_cameras()?;
    let cam = cameras
        .first()
        .ok_or_else(|| HazeError::config("cameras", "benchmark needs a camera"))?;
    let mut pipe = Pipeline::warmed_up(cfg)?;
    pipe.advance(0)?;
    let grid = pipe.voxelize()?;
    let ss = cfg.validation.supersample;
    let mut timing = String::new();

    let mut timed = |label: &str, policy: &SteppingPolicy| -> Result<crate::ray::Render> {
        let t0 = Instant::now();
        let r = render(cam, &grid, &cfg.scene, policy, ss)?;
        let secs = t0.elapsed().as_secs_f64();
        info!("bench {label}: {} steps in {secs:.3} s", r.total_steps);
        timing.push_str(&format!("{label} {secs:.6}\n"));
        Ok(r)
    };

    let reference = timed("reference", &SteppingPolicy::fixed(cfg.validation.reference_step_m))?;
    let mut rows = Vec::new();
    let mut add = |label: String, policy: &SteppingPolicy, r: &crate::ray::Render| -> Result<()> {
        rows.push(BenchRow {
            policy: label,
            theta_max_rad: policy.theta_max,
            ds_m: policy.ds_static,
            total_steps: r.total_steps,
            rmse_vs_reference: r.image.rmse(&reference.image)?,
        });
        Ok(())
    };
    let mut adaptive = cfg.stepping.clone();
    adaptive.mode = crate::ray::StepMode::Adaptive;
    let r = timed("adaptive", &adaptive)?;
    add("adaptive".into(), &adaptive, &r)?;
    let fixed = SteppingPolicy::fixed(cfg.stepping.ds_static);
    let r = timed("static", &fixed)?;
    add("static".into(), &fixed, &r)?;
    for &theta in &cfg.validation.theta_sweep_rad {
        let p = adaptive.clone().with_theta(theta);
        let label = format!("adaptive-theta-{theta}");
        let r = timed(&label, &p)?;
        add(label, &p, &r)?;
    }

    out.write_with("bench.csv", |w| {
        writeln!(w, "policy,theta_max_rad,ds_m,total_steps,rmse_vs_reference")?;
        for r in &rows {
            writeln!(
                w,
                "{},{},{},{},{}",
                r.policy, r.theta_max_rad, r.ds_m, r.total_steps, r.rmse_vs_reference
            )?;
        }
        Ok(())
    })?;
    out.write_str("timing.log", &timing)?;
    let report = BenchReport {
        scenario: cfg.name.clone(),
        reference_steps: reference.total_steps,
        rows,
    };
    out.write_summary(&report)?;
    Ok(report)
}
