use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{check_dims, dot, fill_unit_sphere, geodesic_frac, sigma, Vector};
use crate::rng::SeededRng;

/// `E <z, phi>^2 = ‖z‖^2 / d` for `phi` uniform on the sphere.
pub fn second_moment_exact(z: &[f64], d: usize) -> f64 {
    dot(z, z) / d as f64
}

/// `E <z, phi>^4 = 3 ‖z‖^4 / (d (d + 2))`.
pub fn fourth_moment_exact(z: &[f64], d: usize) -> f64 {
    let n2 = dot(z, z);
    3.0 * n2 * n2 / (d as f64 * (d as f64 + 2.0))
}

/// Probability that a uniform hyperplane separates `x` and `y`: `theta / pi`.
pub fn mismatch_prob_exact(x: &[f64], y: &[f64]) -> Result<f64> {
    geodesic_frac(x, y)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum MomentKind {
    Second(Vector),
    Fourth(Vector),
    Mismatch(Vector, Vector),
}

impl MomentKind {
    fn dim(&self) -> Result<usize> {
        match self {
            MomentKind::Second(z) | MomentKind::Fourth(z) => Ok(z.dim()),
            MomentKind::Mismatch(x, y) => {
                check_dims(x.dim(), y.dim())?;
                Ok(x.dim())
            }
        }
    }

    fn sample(&self, phi: &[f64]) -> f64 {
        match self {
            MomentKind::Second(z) => dot(z, phi).powi(2),
            MomentKind::Fourth(z) => dot(z, phi).powi(4),
            MomentKind::Mismatch(x, y) => {
                if sigma(dot(x, phi)) != sigma(dot(y, phi)) {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// The closed-form value this estimator targets.
    pub fn exact(&self) -> Result<f64> {
        match self {
            MomentKind::Second(z) => Ok(second_moment_exact(z, z.dim())),
            MomentKind::Fourth(z) => Ok(fourth_moment_exact(z, z.dim())),
            MomentKind::Mismatch(x, y) => mismatch_prob_exact(x, y),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub value: f64,
    pub n_samples: usize,
    pub std_error: f64,
}

/// Monte Carlo mean over fresh uniform-sphere draws, with the standard
/// error of the mean.
pub fn estimate_moment(
    kind: &MomentKind,
    n_samples: usize,
    rng: &mut SeededRng,
) -> Result<MomentEstimate> {
    if n_samples < 2 {
        return Err(Error::invalid("n_samples must be at least 2"));
    }
    let d = kind.dim()?;
    let mut phi = vec![0.0; d];
    // Welford
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for i in 0..n_samples {
        fill_unit_sphere(&mut phi, rng);
        let v = kind.sample(&phi);
        let delta = v - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (v - mean);
    }
    let var = m2 / (n_samples - 1) as f64;
    Ok(MomentEstimate {
        value: mean,
        n_samples,
        std_error: (var / n_samples as f64).sqrt(),
    })
}
