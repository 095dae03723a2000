use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{check_dims, fill_unit_sphere, norm, Vector};
use crate::io::fmt_f64;
use crate::kaczmarz::{first_exceedance, phase_error_path, HittingTime};
use crate::measurements::MeasurementSystem;
use crate::rng::SeededRng;

/// `x + abs_err * u` with `u` uniform on the sphere. Since `abs_err < ‖x‖`,
/// the result is strictly closer to `x` than to `−x`, so its error modulo
/// sign is exactly `abs_err` (up to rounding).
pub fn synthetic_init(x: &[f64], abs_err: f64, rng: &mut SeededRng) -> Result<Vector> {
    let nx = norm(x);
    if !(abs_err >= 0.0) || !abs_err.is_finite() {
        return Err(Error::invalid(format!(
            "abs_err must be nonnegative, got {abs_err}"
        )));
    }
    if abs_err >= nx {
        return Err(Error::invalid(format!(
            "abs_err {abs_err} must be below ‖x‖ = {nx} to keep the sign unambiguous"
        )));
    }
    let mut u = vec![0.0; x.len()];
    fill_unit_sphere(&mut u, rng);
    Vector::new(x.iter().zip(&u).map(|(a, b)| a + abs_err * b).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftConfig {
    /// Escape radius is `b = delta ‖x‖`.
    pub delta: f64,
    /// Initial error is `eps * b`.
    pub eps: f64,
    pub n_trials: usize,
    /// Steps per trial `K`. Escapes are detected within this horizon only.
    pub horizon: usize,
    pub base_seed: u64,
    /// Stride between recorded iterate indices; `0` and `K` are always recorded.
    pub record_every: usize,
}

impl DriftConfig {
    /// Horizon defaults to `400 d`.
    pub fn new(d: usize, delta: f64, eps: f64, n_trials: usize, base_seed: u64) -> Self {
        Self {
            delta,
            eps,
            n_trials,
            horizon: 400 * d,
            base_seed,
            record_every: 1,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return Err(Error::invalid("delta must be positive"));
        }
        if !(self.eps >= 0.0) || !(self.delta * self.eps < 1.0) {
            return Err(Error::invalid("need eps >= 0 and delta * eps < 1"));
        }
        if self.n_trials == 0 {
            return Err(Error::invalid("n_trials must be at least 1"));
        }
        if self.horizon == 0 {
            return Err(Error::invalid("horizon must be at least 1"));
        }
        if self.record_every == 0 {
            return Err(Error::invalid("record_every must be at least 1"));
        }
        Ok(())
    }

    fn recorded_steps(&self) -> Vec<usize> {
        let mut ks: Vec<usize> = (0..=self.horizon).step_by(self.record_every).collect();
        if ks.last() != Some(&self.horizon) {
            ks.push(self.horizon);
        }
        ks
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub d: usize,
    pub m: usize,
    pub delta: f64,
    pub eps: f64,
    /// Escape radius `b = delta ‖x‖`.
    pub delta_b: f64,
    /// `1 − 1/(4d)`.
    pub rho: f64,
    pub n_trials: usize,
    pub horizon: usize,
    pub base_seed: u64,
    /// Mean realized `‖z_0‖^2`, nominally `(eps b)^2`.
    pub initial_sq_error: f64,
    pub escape_count: usize,
    /// `rho (‖z_0‖ / b)^2`.
    pub escape_bound: f64,
    /// Recorded iterate indices `k`.
    pub steps: Vec<usize>,
    /// Mean of `dist^2(x, x_k)` over trials with no exceedance of `b` up to `k`.
    pub surviving_mean_sq_error: Vec<f64>,
    /// Standard error of that mean (0 with fewer than two survivors).
    pub surviving_std_error: Vec<f64>,
    pub n_surviving: Vec<usize>,
    /// `exp(−k / (4d)) ‖z_0‖^2`.
    pub theorem_bound: Vec<f64>,
}

impl DriftReport {
    pub fn escape_frequency(&self) -> f64 {
        self.escape_count as f64 / self.n_trials as f64
    }

    /// Recorded indices where the surviving mean exceeds the decay bound by
    /// more than `n_se` standard errors.
    pub fn decay_violations(&self, n_se: f64) -> Vec<usize> {
        (0..self.steps.len())
            .filter(|&i| {
                self.n_surviving[i] > 0
                    && self.surviving_mean_sq_error[i]
                        > self.theorem_bound[i] + n_se * self.surviving_std_error[i]
            })
            .map(|i| self.steps[i])
            .collect()
    }

    /// The surviving curve stays within 3 standard errors of the decay bound.
    pub fn decay_ok(&self) -> bool {
        self.decay_violations(3.0).is_empty()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,surviving_mean_sq_error,theorem_bound,n_surviving\n");
        for i in 0..self.steps.len() {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                self.steps[i],
                fmt_f64(self.surviving_mean_sq_error[i]),
                fmt_f64(self.theorem_bound[i]),
                self.n_surviving[i]
            );
        }
        out
    }
}

struct TrialOutcome {
    /// First iterate index with `dist(x, x_k) > b`, if any within the horizon.
    escape_at: Option<usize>,
    /// Squared errors at the recorded indices.
    recorded: Vec<f64>,
}

/// Runs `n_trials` independent phase solves from synthetic starts at error
/// `eps * b` and aggregates escape counts and the surviving error curve.
/// Errors come from [`phase_error_path`], so the curve stays resolvable far
/// below the floating-point spacing of `x`.
///
/// Trial `i` uses child stream `i` of `base_seed` (its own child 0 for the
/// start, child 1 for the row indices); results are reduced in trial order,
/// so the report does not depend on the thread count.
pub fn run_drift_experiment(
    system: &MeasurementSystem,
    x: &Vector,
    cfg: &DriftConfig,
) -> Result<DriftReport> {
    cfg.validate()?;
    let d = system.dim();
    check_dims(d, x.dim())?;
    let nx = x.norm();
    if nx == 0.0 {
        return Err(Error::ZeroVector);
    }
    let b = cfg.delta * nx;
    let abs_err = cfg.eps * b;
    let steps = cfg.recorded_steps();
    let base = SeededRng::new(cfg.base_seed);

    let outcomes: Vec<TrialOutcome> = (0..cfg.n_trials)
        .into_par_iter()
        .map(|i| {
            let trial = base.child(i as u64);
            let x0 = synthetic_init(x, abs_err, &mut trial.child(0))?;
            let path = phase_error_path(system, x, &x0, cfg.horizon, trial.child(1).seed())?;
            let escape_at = match first_exceedance(&path, b)? {
                HittingTime::At(j) => Some(j),
                HittingTime::NotHitWithinHorizon => None,
            };
            Ok(TrialOutcome {
                escape_at,
                recorded: steps.iter().map(|&k| path[k]).collect(),
            })
        })
        .collect::<Result<_>>()?;

    let escape_count = outcomes.iter().filter(|o| o.escape_at.is_some()).count();
    let mut surviving_mean_sq_error = Vec::with_capacity(steps.len());
    let mut surviving_std_error = Vec::with_capacity(steps.len());
    let mut n_surviving = Vec::with_capacity(steps.len());
    for (i, &k) in steps.iter().enumerate() {
        let vals: Vec<f64> = outcomes
            .iter()
            .filter(|o| o.escape_at.is_none_or(|j| j > k))
            .map(|o| o.recorded[i])
            .collect();
        let n = vals.len();
        let mean = if n > 0 {
            vals.iter().sum::<f64>() / n as f64
        } else {
            0.0
        };
        let se = if n > 1 {
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        surviving_mean_sq_error.push(mean);
        surviving_std_error.push(se);
        n_surviving.push(n);
    }
    // Mean of the realized ‖z_0‖^2; equals (eps b)^2 up to rounding.
    let initial_sq_error =
        outcomes.iter().map(|o| o.recorded[0]).sum::<f64>() / outcomes.len() as f64;
    let theorem_bound = steps
        .iter()
        .map(|&k| (-(k as f64) / (4.0 * d as f64)).exp() * initial_sq_error)
        .collect();
    let rho = 1.0 - 1.0 / (4.0 * d as f64);
    Ok(DriftReport {
        d,
        m: system.len(),
        delta: cfg.delta,
        eps: cfg.eps,
        delta_b: b,
        rho,
        n_trials: cfg.n_trials,
        horizon: cfg.horizon,
        base_seed: cfg.base_seed,
        initial_sq_error,
        escape_count,
        escape_bound: rho * cfg.eps * cfg.eps,
        steps,
        surviving_mean_sq_error,
        surviving_std_error,
        n_surviving,
        theorem_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{dist_up_to_sign, sample_unit_sphere};
    use crate::measurements::{generate_system, Distribution};

    #[test]
    fn synthetic_init_examples() {
        let mut rng = SeededRng::new(1);
        let x = Vector::new(vec![1.0, 0.0]).unwrap();
        assert_eq!(synthetic_init(&x, 0.0, &mut rng).unwrap(), x);
        let x0 = synthetic_init(&x, 0.1, &mut rng).unwrap();
        assert!((dist_up_to_sign(&x, &x0).unwrap() - 0.1).abs() < 1e-12);
        assert!(synthetic_init(&x, 0.999, &mut rng).is_ok());
        assert!(synthetic_init(&x, 1.0, &mut rng).is_err());
        assert!(synthetic_init(&x, -0.1, &mut rng).is_err());
    }

    fn small_setup() -> (MeasurementSystem, Vector) {
        let mut rng = SeededRng::new(2);
        let s = generate_system(6, 120, Distribution::UniformSphere, &mut rng).unwrap();
        let x = sample_unit_sphere(6, &mut rng).unwrap();
        (s, x)
    }

    #[test]
    fn zero_initial_error_never_escapes() {
        let (s, x) = small_setup();
        let mut cfg = DriftConfig::new(6, 0.1, 0.0, 20, 3);
        cfg.horizon = 300;
        let rep = run_drift_experiment(&s, &x, &cfg).unwrap();
        assert_eq!(rep.escape_count, 0);
        assert!(rep.surviving_mean_sq_error.iter().all(|v| *v == 0.0));
        assert_eq!(rep.steps.len(), 301);
        assert!(rep.decay_ok());
    }

    #[test]
    fn report_shapes_and_csv() {
        let (s, x) = small_setup();
        let mut cfg = DriftConfig::new(6, 0.2, 0.5, 30, 4);
        cfg.horizon = 250;
        cfg.record_every = 100;
        let rep = run_drift_experiment(&s, &x, &cfg).unwrap();
        assert_eq!(rep.steps, vec![0, 100, 200, 250]);
        assert_eq!(rep.n_surviving[0], 30);
        assert!((rep.surviving_mean_sq_error[0] - rep.initial_sq_error).abs() < 1e-12);
        assert!(rep.escape_count <= rep.n_trials);
        assert!(rep.rho > 0.0 && rep.rho < 1.0);
        let csv = rep.to_csv();
        assert!(csv.starts_with("k,surviving_mean_sq_error,theorem_bound,n_surviving\n0,"));
        assert_eq!(csv.lines().count(), 5);
    }

    #[test]
    fn config_validation() {
        let (s, x) = small_setup();
        let mut cfg = DriftConfig::new(6, 0.5, 2.0, 10, 0);
        assert!(run_drift_experiment(&s, &x, &cfg).is_err());
        cfg.eps = 0.5;
        cfg.n_trials = 0;
        assert!(run_drift_experiment(&s, &x, &cfg).is_err());
    }
}
