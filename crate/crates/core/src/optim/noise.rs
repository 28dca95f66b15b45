use serde::{Deserialize, Serialize};

use super::{axpy, Objective};
use crate::error::{Error, Result};

/// Comparison of the objective's repeat noise with the change produced by
/// the smallest search scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseFloor {
    /// Sample standard deviation of repeated evaluations at the probe point.
    pub sigma: f64,
    /// Mean `|f(x + s·v_j) − f̄|` over the search directions.
    pub delta_f: f64,
    /// `delta_f < 3·sigma`: the smallest scale is below the noise floor.
    pub warn: bool,
}

/// Estimates σ from `repeats` evaluations at `x`, then probes each direction
/// once at `scale`.
pub fn noise_floor(
    f: &mut dyn Objective,
    x: &[f64],
    scale: f64,
    directions: &[Vec<f64>],
    repeats: usize,
) -> Result<NoiseFloor> {
    if repeats < 2 {
        return Err(Error::InvalidArgument("noise estimate needs at least 2 repeats".into()));
    }
    let samples = (0..repeats).map(|_| f.evaluate(x)).collect::<Result<Vec<f64>>>()?;
    let mean = samples.iter().sum::<f64>() / repeats as f64;
    let sigma = (samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (repeats - 1) as f64).sqrt();
    let mut total = 0.0;
    for v in directions {
        total += (f.evaluate(&axpy(x, scale, v))? - mean).abs();
    }
    let delta_f = total / directions.len().max(1) as f64;
    let warn = delta_f < 3.0 * sigma;
    if warn {
        log::warn!(
            "smallest scale {scale} changes the objective by {delta_f:.3e}, below 3x its noise ({sigma:.3e})"
        );
    }
    Ok(NoiseFloor { sigma, delta_f, warn })
}
