//! Versioned text dump of particle state, one file per frame.

use std::io::{BufRead, Write};

use super::Particle;
use crate::error::{HazeError, Result};
use crate::geom::Vec3;

pub const SNAPSHOT_HEADER: &str = "# haze-particles v1";

const COLUMNS: &str = "index,mass,px,py,pz,vx,vy,vz,density,temperature";

pub fn write_particles<W: Write>(mut out: W, frame: usize, particles: &[Particle]) -> std::io::Result<()> {
    writeln!(out, "{SNAPSHOT_HEADER}")?;
    writeln!(out, "# frame={frame} count={}", particles.len())?;
    writeln!(out, "{COLUMNS}")?;
    for (i, p) in particles.iter().enumerate() {
        writeln!(
            out,
            "{i},{},{},{},{},{},{},{},{},{}",
            p.mass,
            p.position.x,
            p.position.y,
            p.position.z,
            p.velocity.x,
            p.velocity.y,
            p.velocity.z,
            p.density,
            p.temperature
        )?;
    }
    Ok(())
}

/// Parses a dump written by [`write_particles`]; returns the frame index and
/// particles.
pub fn read_particles<R: BufRead>(input: R) -> Result<(usize, Vec<Particle>)> {
    let bad = |msg: String| HazeError::Parameter(format!("particle dump: {msg}"));
    let mut lines = input.lines();
    let mut next = || -> Result<String> {
        lines
            .next()
            .ok_or_else(|| bad("unexpected end of file".into()))?
            .map_err(|e| bad(e.to_string()))
    };
    if next()? != SNAPSHOT_HEADER {
        return Err(bad("missing or unsupported version header".into()));
    }
    let meta = next()?;
    let mut frame = None;
    let mut count = None;
    for field in meta.trim_start_matches('#').split_whitespace() {
        match field.split_once('=') {
            Some(("frame", v)) => frame = v.parse().ok(),
            Some(("count", v)) => count = v.parse::<usize>().ok(),
            _ => {}
        }
    }
    let (frame, count) = frame
        .zip(count)
        .ok_or_else(|| bad(format!("bad metadata line `{meta}`")))?;
    if next()? != COLUMNS {
        return Err(bad("unexpected column header".into()));
    }
    let mut particles = Vec::with_capacity(count);
    for row in 0..count {
        let line = next()?;
        let values: Vec<f64> = line
            .split(',')
            .skip(1)
            .map(|v| v.parse::<f64>().map_err(|e| bad(format!("row {row}: {e}"))))
            .collect::<Result<_>>()?;
        if values.len() != 9 {
            return Err(bad(format!("row {row}: expected 10 columns")));
        }
        particles.push(Particle {
            mass: values[0],
            position: Vec3::new(values[1], values[2], values[3]),
            velocity: Vec3::new(values[4], values[5], values[6]),
            density: values[7],
            temperature: values[8],
        });
    }
    Ok((frame, particles))
}
