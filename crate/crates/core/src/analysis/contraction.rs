use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{check_dims, dot, fill_unit_sphere, sigma, sq_dist};
use crate::io::fmt_f64;
use crate::kaczmarz::phase_update;
use crate::measurements::MeasurementSystem;
use crate::rng::SeededRng;

/// `E_t ‖x − x_{k+1}‖^2` for one phase step from `x_k`, by enumerating all
/// `m` equally likely row choices.
pub fn expected_onestep_sq_error(
    system: &MeasurementSystem,
    x: &[f64],
    x_k: &[f64],
) -> Result<f64> {
    check_dims(system.dim(), x.len())?;
    check_dims(system.dim(), x_k.len())?;
    Ok(onestep_direct(system, x, x_k))
}

fn onestep_direct(system: &MeasurementSystem, x: &[f64], x_k: &[f64]) -> f64 {
    let mut next = vec![0.0; x_k.len()];
    let mut sum = 0.0;
    for phi in system.rows() {
        next.copy_from_slice(x_k);
        phase_update(&mut next, phi, dot(x, phi).abs());
        sum += sq_dist(x, &next);
    }
    sum / system.len() as f64
}

/// Same expectation reconstructed from the per-step decomposition
/// `‖z‖^2 − <z, phi>^2 + (sigma(<x, phi>) − sigma(<x_k, phi>))^2 <x, phi>^2`.
pub fn expected_onestep_via_identity(
    system: &MeasurementSystem,
    x: &[f64],
    x_k: &[f64],
) -> Result<f64> {
    check_dims(system.dim(), x.len())?;
    check_dims(system.dim(), x_k.len())?;
    let z: Vec<f64> = x.iter().zip(x_k).map(|(a, b)| a - b).collect();
    let z2 = dot(&z, &z);
    let sum: f64 = system
        .rows()
        .map(|phi| {
            let xp = dot(x, phi);
            let ds = sigma(xp) - sigma(dot(x_k, phi));
            z2 - dot(&z, phi).powi(2) + ds * ds * xp * xp
        })
        .sum();
    Ok(sum / system.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub radius: f64,
    pub max_ratio: f64,
    pub mean_ratio: f64,
    pub n_states: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub d: usize,
    pub m: usize,
    /// `1 − 1/(4d)`.
    pub rho: f64,
    /// How states were drawn: a uniform shell around `x`, not the solver's own law.
    pub state_law: String,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("radius,max_ratio,mean_ratio,n_states\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                fmt_f64(r.radius),
                fmt_f64(r.max_ratio),
                fmt_f64(r.mean_ratio),
                r.n_states
            );
        }
        out
    }
}

/// For each radius `r`, draws `n_states` states `x_k = x − r u` with `u`
/// uniform on the sphere and reports the max and mean of the exact one-step
/// ratio `E ‖z_{k+1}‖^2 / ‖z_k‖^2`.
pub fn contraction_sweep(
    system: &MeasurementSystem,
    x: &[f64],
    radii: &[f64],
    n_states: usize,
    rng: &mut SeededRng,
) -> Result<SweepTable> {
    let d = system.dim();
    check_dims(d, x.len())?;
    if n_states == 0 {
        return Err(Error::invalid("n_states must be at least 1"));
    }
    if let Some(r) = radii.iter().find(|r| !(**r > 0.0) || !r.is_finite()) {
        return Err(Error::invalid(format!("radii must be positive, got {r}")));
    }
    let mut rows = Vec::with_capacity(radii.len());
    for &radius in radii {
        let states: Vec<Vec<f64>> = (0..n_states)
            .map(|_| {
                let mut u = vec![0.0; d];
                fill_unit_sphere(&mut u, rng);
                x.iter().zip(&u).map(|(a, b)| a - radius * b).collect()
            })
            .collect();
        let ratios: Vec<f64> = states
            .par_iter()
            .map(|x_k| onestep_direct(system, x, x_k) / sq_dist(x, x_k))
            .collect();
        let max_ratio = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean_ratio = ratios.iter().sum::<f64>() / n_states as f64;
        rows.push(SweepRow {
            radius,
            max_ratio,
            mean_ratio,
            n_states,
        });
    }
    Ok(SweepTable {
        d,
        m: system.len(),
        rho: 1.0 - 1.0 / (4.0 * d as f64),
        state_law: "uniform shell: x_k = x - r u, u uniform on the unit sphere".into(),
        rows,
    })
}
