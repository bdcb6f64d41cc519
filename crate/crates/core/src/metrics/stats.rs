use serde::{Deserialize, Serialize};

use crate::error::{HazeError, Result};

pub const HISTOGRAM_BINS: usize = 41;
/// Smoothing floor that keeps every bin strictly positive.
pub const HISTOGRAM_FLOOR: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

/// Smoothed probability mass of displacements over uniform bins.
#[derive(Clone, Debug, PartialEq)]
pub struct DisplacementHistogram {
    pub axis: Axis,
    pub edges: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub floor: f64,
}

impl DisplacementHistogram {
    /// `bins` uniform bins over `[-5 sigma, 5 sigma]` of the pooled series,
    /// with `sigma` the pooled standard deviation about zero (displacements
    /// are fluctuations). A degenerate pool uses `sigma = 1`.
    pub fn shared_edges(pooled: &[&[f64]], bins: usize) -> Vec<f64> {
        let n: usize = pooled.iter().map(|s| s.len()).sum();
        let ss: f64 = pooled.iter().flat_map(|s| s.iter()).map(|x| x * x).sum();
        let mut sigma = if n > 0 { (ss / n as f64).sqrt() } else { 0.0 };
        if !(sigma > 0.0 && sigma.is_finite()) {
            sigma = 1.0;
        }
        let lo = -5.0 * sigma;
        let width = 10.0 * sigma / bins as f64;
        (0..=bins).map(|i| lo + width * i as f64).collect()
    }

    /// Bins `values` (out-of-range values go to the end bins) and applies
    /// `p = (1 - K eps) c / N + eps`.
    pub fn from_values(axis: Axis, values: &[f64], edges: Vec<f64>, floor: f64) -> Result<Self> {
        if edges.len() < 2 || edges.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(HazeError::Parameter("histogram edges must increase".into()));
        }
        let k = edges.len() - 1;
        if !(floor > 0.0 && floor * (k as f64) < 1.0) {
            return Err(HazeError::Parameter(format!(
                "smoothing floor {floor} invalid for {k} bins"
            )));
        }
        let mut counts = vec![0usize; k];
        for &x in values.iter().filter(|x| x.is_finite()) {
            let b = edges[1..k].partition_point(|&e| e <= x);
            counts[b] += 1;
        }
        let n = values.iter().filter(|x| x.is_finite()).count();
        let probabilities = if n == 0 {
            vec![1.0 / k as f64; k]
        } else {
            let scale = (1.0 - k as f64 * floor) / n as f64;
            counts.iter().map(|&c| c as f64 * scale + floor).collect()
        };
        Ok(Self {
            axis,
            edges,
            probabilities,
            floor,
        })
    }
}

/// Kullback-Leibler divergence `sum p ln(p / q)`.
pub fn kld(p: &DisplacementHistogram, q: &DisplacementHistogram) -> Result<f64> {
    if p.edges != q.edges {
        return Err(HazeError::Parameter("histograms use different bins".into()));
    }
    if p.probabilities.iter().chain(&q.probabilities).any(|&x| !(x > 0.0)) {
        return Err(HazeError::Parameter("histograms must be smoothed".into()));
    }
    Ok(p.probabilities
        .iter()
        .zip(&q.probabilities)
        .map(|(a, b)| a * (a / b).ln())
        .sum())
}

pub fn mse_curves(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(HazeError::Parameter(format!(
            "series lengths differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(HazeError::Parameter("empty series".into()));
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64)
}
