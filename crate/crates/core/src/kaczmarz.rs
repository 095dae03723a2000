//! Linear and phase-adapting randomized Kaczmarz iterations.
//!
//! Step `k` draws `t(k)` uniformly with replacement from `0..m` and projects
//! `x_k` onto the hyperplane `<u, phi_t> = target`. The linear solver targets
//! the signed measurement `y_t`; the phase solver targets
//! `sigma(<x_k, phi_t>) * |y_t|`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{check_dims, dot, norm, sigma, sq_dist, sq_dist_up_to_sign, Vector};
use crate::io::fmt_f64;
use crate::measurements::{MeasurementSystem, PhaselessObservation, SignedObservation};
use crate::rng::SeededRng;

/// Accepted deviation of `‖phi_t‖` from 1 in the checked step functions.
pub const STEP_UNIT_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Linear,
    Phase,
}

#[derive(Clone, Copy, Debug)]
pub enum Observations<'a> {
    Signed(&'a SignedObservation),
    Phaseless(&'a PhaselessObservation),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub max_steps: usize,
    pub seed: u64,
    /// Stop once `sq_error <= stop_tol`. Needs ground truth; off when `None`.
    pub stop_tol: Option<f64>,
    pub trace_every: usize,
}

impl SolveConfig {
    pub fn new(max_steps: usize, seed: u64) -> Self {
        Self {
            max_steps,
            seed,
            stop_tol: None,
            trace_every: 1,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.max_steps == 0 {
            return Err(Error::invalid("max_steps must be at least 1"));
        }
        if self.trace_every == 0 {
            return Err(Error::invalid("trace_every must be at least 1"));
        }
        if let Some(tol) = self.stop_tol {
            if !(tol >= 0.0) {
                return Err(Error::invalid("stop_tol must be nonnegative"));
            }
        }
        Ok(())
    }
}

/// One recorded step. Step `k` moves `x_k` to `x_{k+1}` using row `t`;
/// `sq_error` is the error of `x_{k+1}` and `mismatch` compares signs at `x_k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub k: usize,
    pub t: usize,
    pub sq_error: Option<f64>,
    pub mismatch: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub mode: Mode,
    pub steps: Vec<StepRecord>,
    pub final_iterate: Vector,
    /// Error of `x_0`, present with ground truth.
    pub initial_sq_error: Option<f64>,
    pub steps_taken: usize,
    pub stopped_early: bool,
    /// Sign `s` such that mismatch flags are computed against `s * x`: the
    /// sign of the truth closer to `x_0`. Always `+1` in linear mode.
    pub truth_sign: Option<i8>,
}

impl IterationTrace {
    /// `(iterate index, sq_error)` pairs: `(0, initial)` followed by `(k + 1, e)`
    /// for every recorded step.
    pub fn error_path(&self) -> Option<Vec<(usize, f64)>> {
        let mut out = Vec::with_capacity(self.steps.len() + 1);
        out.push((0, self.initial_sq_error?));
        for s in &self.steps {
            out.push((s.k + 1, s.sq_error?));
        }
        Some(out)
    }

    pub fn final_sq_error(&self) -> Option<f64> {
        match self.steps.last() {
            Some(s) => s.sq_error,
            None => self.initial_sq_error,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,t,sq_error,mismatch\n");
        for s in &self.steps {
            let err = s.sq_error.map(fmt_f64).unwrap_or_default();
            let mis = match s.mismatch {
                Some(true) => "1",
                Some(false) => "0",
                None => "",
            };
            let _ = writeln!(out, "{},{},{},{}", s.k, s.t, err, mis);
        }
        out
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        Ok(fs::write(path, self.to_csv())?)
    }
}

#[inline]
fn project(x_k: &mut [f64], phi: &[f64], target: f64) {
    let r = target - dot(x_k, phi);
    for (xi, pi) in x_k.iter_mut().zip(phi) {
        *xi += r * pi;
    }
}

/// In-place linear Kaczmarz update for a unit-norm row.
#[inline]
pub fn linear_update(x_k: &mut [f64], phi: &[f64], y: f64) {
    project(x_k, phi, y);
}

/// In-place phase-adapting update for a unit-norm row.
#[inline]
pub fn phase_update(x_k: &mut [f64], phi: &[f64], y_abs: f64) {
    let target = sigma(dot(x_k, phi)) * y_abs;
    project(x_k, phi, target);
}

fn check_step_args(x_k: &[f64], phi: &[f64]) -> Result<()> {
    check_dims(x_k.len(), phi.len())?;
    let n = norm(phi);
    if (n - 1.0).abs() > STEP_UNIT_TOL {
        return Err(Error::contract(format!("phi_t must be unit norm, got {n}")));
    }
    Ok(())
}

/// `x_k + (y_t − <x_k, phi_t>) phi_t`.
pub fn linear_rk_step(x_k: &[f64], phi: &[f64], y: f64) -> Result<Vector> {
    check_step_args(x_k, phi)?;
    if !y.is_finite() {
        return Err(Error::contract("measurement must be finite"));
    }
    let mut next = x_k.to_vec();
    linear_update(&mut next, phi, y);
    Vector::new(next)
}

/// `x_k + (sigma(<x_k, phi_t>) |y_t| − <x_k, phi_t>) phi_t`.
pub fn phase_rk_step(x_k: &[f64], phi: &[f64], y_abs: f64) -> Result<Vector> {
    check_step_args(x_k, phi)?;
    if !(y_abs >= 0.0) || !y_abs.is_finite() {
        return Err(Error::contract(format!(
            "intensity must be finite and nonnegative, got {y_abs}"
        )));
    }
    let mut next = x_k.to_vec();
    phase_update(&mut next, phi, y_abs);
    Vector::new(next)
}

/// Runs `cfg.max_steps` iterations (fewer if early stopping triggers).
///
/// With ground truth, phase mode reports `dist(x, x_k)^2` (error modulo sign)
/// and linear mode reports `‖x − x_k‖^2`, which is the quantity the linear
/// iteration decreases monotonically.
pub fn run(
    system: &MeasurementSystem,
    data: Observations<'_>,
    x0: &Vector,
    cfg: &SolveConfig,
    mode: Mode,
    truth: Option<&Vector>,
) -> Result<IterationTrace> {
    cfg.validate()?;
    let d = system.dim();
    let m = system.len();
    check_dims(d, x0.dim())?;
    if let Some(x) = truth {
        check_dims(d, x.dim())?;
    }
    let values: &[f64] = match (mode, data) {
        (Mode::Linear, Observations::Signed(obs)) => {
            obs.check_binding(system)?;
            obs.values()
        }
        (Mode::Phase, Observations::Phaseless(obs)) => {
            obs.check_binding(system)?;
            obs.intensities()
        }
        (Mode::Linear, Observations::Phaseless(_)) => {
            return Err(Error::contract("linear mode requires signed measurements"));
        }
        (Mode::Phase, Observations::Signed(_)) => {
            return Err(Error::contract("phase mode requires phaseless intensities"));
        }
    };
    if cfg.stop_tol.is_some() && truth.is_none() {
        return Err(Error::invalid("early stopping requires ground truth"));
    }

    // Mismatch flags are computed against the sign of x closer to x0.
    let truth_sign: Option<i8> = truth.map(|x| match mode {
        Mode::Linear => 1,
        Mode::Phase => {
            if sq_dist(x, x0) <= crate::geometry::sq_dist_flipped(x, x0) {
                1
            } else {
                -1
            }
        }
    });
    let aligned: Option<Vec<f64>> = truth
        .zip(truth_sign)
        .map(|(x, s)| x.iter().map(|c| f64::from(s) * c).collect());
    let error_of = |x_k: &[f64]| -> Option<f64> {
        truth.map(|x| match mode {
            Mode::Linear => sq_dist(x, x_k),
            Mode::Phase => sq_dist_up_to_sign(x, x_k),
        })
    };

    let mut rng = SeededRng::new(cfg.seed);
    let mut x_k = x0.as_slice().to_vec();
    let initial_sq_error = error_of(&x_k);
    let mut steps = Vec::with_capacity(cfg.max_steps / cfg.trace_every + 1);
    let mut stopped_early = false;
    let mut steps_taken = 0;

    for k in 0..cfg.max_steps {
        let t = rng.index(m);
        let phi = system.row(t);
        let mismatch = aligned
            .as_deref()
            .map(|xa| sigma(dot(xa, phi)) != sigma(dot(&x_k, phi)));
        match mode {
            Mode::Linear => linear_update(&mut x_k, phi, values[t]),
            Mode::Phase => phase_update(&mut x_k, phi, values[t]),
        }
        steps_taken = k + 1;
        let sq_error = error_of(&x_k);
        let stop = matches!((cfg.stop_tol, sq_error), (Some(tol), Some(e)) if e <= tol);
        let last = stop || k + 1 == cfg.max_steps;
        if (k + 1) % cfg.trace_every == 0 || last {
            steps.push(StepRecord {
                k,
                t,
                sq_error,
                mismatch,
            });
        }
        if stop {
            stopped_early = k + 1 < cfg.max_steps;
            break;
        }
    }

    if let Some(i) = x_k.iter().position(|c| !c.is_finite()) {
        return Err(Error::NonFinite { index: i });
    }
    Ok(IterationTrace {
        mode,
        steps,
        final_iterate: Vector::from_vec_unchecked(x_k),
        initial_sq_error,
        steps_taken,
        stopped_early,
        truth_sign,
    })
}

/// Squared errors `dist^2(x, x_k)`, `k = 0..=max_steps`, of the phase
/// iteration simulated in error coordinates `z_k = x − x_k`:
///
/// `z_{k+1} = z_k + (c − <z_k, phi> − sigma(c − <z_k, phi>) |c|) phi`, `c = <x, phi>`.
///
/// This is the same iteration as [`run`] in phase mode, driven by the same
/// row stream for the same seed. Carrying `z` directly keeps full relative
/// precision in the error, whereas the iterate form cannot resolve
/// `‖x − x_k‖` below the floating-point spacing of `x` (about `1e-16 ‖x‖`).
pub fn phase_error_path(
    system: &MeasurementSystem,
    x: &Vector,
    x0: &Vector,
    max_steps: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let d = system.dim();
    check_dims(d, x.dim())?;
    check_dims(d, x0.dim())?;
    let m = system.len();
    let signed: Vec<f64> = system.rows().map(|phi| dot(x, phi)).collect();
    let mut z: Vec<f64> = x.iter().zip(x0.iter()).map(|(a, b)| a - b).collect();
    let twice_x: Vec<f64> = x.iter().map(|c| 2.0 * c).collect();
    let sq_err = |z: &[f64]| sq_dist_flipped_from(&twice_x, z).min(dot(z, z));
    let mut rng = SeededRng::new(seed);
    let mut path = Vec::with_capacity(max_steps + 1);
    path.push(sq_err(&z));
    for _ in 0..max_steps {
        let t = rng.index(m);
        let phi = system.row(t);
        let c = signed[t];
        let p = dot(&z, phi);
        // Written so that `p` never cancels against `c`.
        let coef = if sigma(c - p) == sigma(c) {
            -p
        } else {
            2.0 * c - p
        };
        for (zi, pi) in z.iter_mut().zip(phi) {
            *zi += coef * pi;
        }
        path.push(sq_err(&z));
    }
    Ok(path)
}

/// `‖a − z‖^2`, used as `‖x + x_k‖^2 = ‖2x − z‖^2`.
fn sq_dist_flipped_from(a: &[f64], z: &[f64]) -> f64 {
    sq_dist(a, z)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum HittingTime {
    At(usize),
    NotHitWithinHorizon,
}

/// `min { j : sq_errors[j] > b^2 }` over an error sequence indexed from 0.
pub fn first_exceedance(sq_errors: &[f64], b: f64) -> Result<HittingTime> {
    if !(b > 0.0) {
        return Err(Error::invalid("threshold b must be positive"));
    }
    let b2 = b * b;
    Ok(sq_errors
        .iter()
        .position(|e| *e > b2)
        .map_or(HittingTime::NotHitWithinHorizon, HittingTime::At))
}

/// Hitting time `tau_b` of a traced run, as an iterate index. Strided traces
/// only see recorded iterates.
pub fn hitting_time(trace: &IterationTrace, b: f64) -> Result<HittingTime> {
    let path = trace
        .error_path()
        .ok_or_else(|| Error::contract("hitting time needs a trace with ground-truth errors"))?;
    let errors: Vec<f64> = path.iter().map(|(_, e)| *e).collect();
    Ok(match first_exceedance(&errors, b)? {
        HittingTime::At(i) => HittingTime::At(path[i].0),
        HittingTime::NotHitWithinHorizon => HittingTime::NotHitWithinHorizon,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::sample_unit_sphere;
    use crate::measurements::{generate_system, observe, observe_signed, Distribution, Provenance};

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn linear_step_examples() {
        let r = linear_rk_step(&[0.0, 0.0], &[0.0, 1.0], 1.0).unwrap();
        assert_eq!(r.as_slice(), &[0.0, 1.0]);

        let x_k = [0.3, -0.7];
        let phi = [0.6, 0.8];
        let y = dot(&x_k, &phi);
        assert!(close(&linear_rk_step(&x_k, &phi, y).unwrap(), &x_k, 1e-15));

        let r = linear_rk_step(&[0.0, 0.0], &[1.0, 0.0], 1.0).unwrap();
        assert_eq!(r.as_slice(), &[1.0, 0.0]);
        let x = [1.0, 1.0];
        assert!((sq_dist(&x, &[0.0, 0.0]).sqrt() - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(sq_dist(&x, &r).sqrt(), 1.0);

        assert!(matches!(
            linear_rk_step(&[0.0, 0.0], &[1.0, 1.0], 1.0),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn phase_step_examples() {
        // x = (1, 0), phi = e1, y_abs = 1, x_k = (-0.5, 0.2): the wrong sign is adopted.
        let r = phase_rk_step(&[-0.5, 0.2], &[1.0, 0.0], 1.0).unwrap();
        assert!(close(&r, &[-1.0, 0.2], 1e-15));
        let before = sq_dist(&[1.0, 0.0], &[-0.5, 0.2]);
        let after = sq_dist(&[1.0, 0.0], &r);
        assert!((before - (1.5f64 * 1.5 + 0.04)).abs() < 1e-15);
        assert!((after - (4.0 + 0.04)).abs() < 1e-15);

        // sigma(0) = +1.
        let r = phase_rk_step(&[0.0, 0.2], &[1.0, 0.0], 1.0).unwrap();
        assert_eq!(r.as_slice(), &[1.0, 0.2]);

        // Zero intensity projects onto phi's orthogonal complement.
        let phi = [0.6, 0.8];
        let r = phase_rk_step(&[0.4, -1.3], &phi, 0.0).unwrap();
        assert!(dot(&r, &phi).abs() < 1e-15);
        assert_eq!(r, linear_rk_step(&[0.4, -1.3], &phi, 0.0).unwrap());

        assert!(matches!(
            phase_rk_step(&[0.0, 0.0], &[1.0, 0.0], -1.0),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn step_postconditions() {
        let mut rng = SeededRng::new(3);
        for _ in 0..1000 {
            let d = 2 + rng.index(30);
            let phi = sample_unit_sphere(d, &mut rng).unwrap();
            let x_k = sample_unit_sphere(d, &mut rng).unwrap().scaled(3.0);
            let y = 2.0 * sample_unit_sphere(1, &mut rng).unwrap()[0];
            let r = linear_rk_step(&x_k, &phi, y).unwrap();
            assert!((dot(&r, &phi) - y).abs() < 1e-12);
            let r = phase_rk_step(&x_k, &phi, y.abs()).unwrap();
            assert!((dot(&r, &phi) - sigma(dot(&x_k, &phi)) * y.abs()).abs() < 1e-12);
        }
    }

    fn setup(d: usize, m: usize, seed: u64) -> (MeasurementSystem, Vector, SeededRng) {
        let mut rng = SeededRng::new(seed);
        let s = generate_system(d, m, Distribution::UniformSphere, &mut rng).unwrap();
        let x = sample_unit_sphere(d, &mut rng).unwrap();
        (s, x, rng)
    }

    #[test]
    fn phase_run_from_truth_is_fixed() {
        let (s, x, _) = setup(8, 50, 1);
        let obs = observe(&s, &x).unwrap();
        let tr = run(
            &s,
            Observations::Phaseless(&obs),
            &x,
            &SolveConfig::new(500, 9),
            Mode::Phase,
            Some(&x),
        )
        .unwrap();
        assert_eq!(tr.initial_sq_error, Some(0.0));
        assert!(tr.steps.iter().all(|r| r.sq_error == Some(0.0)));
        assert!(tr.steps.iter().all(|r| r.mismatch == Some(false)));
    }

    #[test]
    fn linear_run_is_monotone() {
        let (s, x, mut rng) = setup(20, 200, 2);
        let obs = observe_signed(&s, &x).unwrap();
        let x0 = sample_unit_sphere(20, &mut rng).unwrap().scaled(4.0);
        let tr = run(
            &s,
            Observations::Signed(&obs),
            &x0,
            &SolveConfig::new(2000, 4),
            Mode::Linear,
            Some(&x),
        )
        .unwrap();
        let path = tr.error_path().unwrap();
        // Each update rounds the iterate at the scale of its coordinates.
        let slack = 1e-14 * x0.norm().max(x.norm());
        for w in path.windows(2) {
            assert!(w[1].1.sqrt() <= w[0].1.sqrt() + slack, "{:?}", w);
        }
        assert!(tr.final_sq_error().unwrap() < 1e-20);
    }

    #[test]
    fn phase_run_converges_from_close_start() {
        let (s, x, mut rng) = setup(20, 400, 5);
        let obs = observe(&s, &x).unwrap();
        let mut ok = 0;
        for trial in 0..20u64 {
            let u = sample_unit_sphere(20, &mut rng).unwrap();
            let x0 =
                Vector::new(x.iter().zip(u.iter()).map(|(a, b)| a + 0.05 * b).collect()).unwrap();
            let tr = run(
                &s,
                Observations::Phaseless(&obs),
                &x0,
                &SolveConfig::new(4000, trial),
                Mode::Phase,
                Some(&x),
            )
            .unwrap();
            if tr.final_sq_error().unwrap() <= 1e-12 {
                ok += 1;
            }
        }
        assert!(ok >= 19, "{ok}/20");
    }

    #[test]
    fn sign_flip_equivariance() {
        let (s, x, mut rng) = setup(10, 80, 6);
        let obs = observe(&s, &x).unwrap();
        let u = sample_unit_sphere(10, &mut rng).unwrap();
        let x0 = Vector::new(x.iter().zip(u.iter()).map(|(a, b)| a + 0.3 * b).collect()).unwrap();
        let neg = x0.scaled(-1.0);
        let cfg = SolveConfig::new(300, 17);
        let a = run(
            &s,
            Observations::Phaseless(&obs),
            &x0,
            &cfg,
            Mode::Phase,
            Some(&x),
        )
        .unwrap();
        let b = run(
            &s,
            Observations::Phaseless(&obs),
            &neg,
            &cfg,
            Mode::Phase,
            Some(&x),
        )
        .unwrap();
        assert_eq!(a.final_iterate.scaled(-1.0), b.final_iterate);
        for (ra, rb) in a.steps.iter().zip(&b.steps) {
            assert_eq!(ra.t, rb.t);
            assert_eq!(ra.sq_error, rb.sq_error);
            assert_eq!(ra.mismatch, rb.mismatch);
        }
        assert_eq!(a.truth_sign, Some(1));
        assert_eq!(b.truth_sign, Some(-1));
    }

    #[test]
    fn no_mismatch_phase_equals_linear() {
        let (s, x, mut rng) = setup(12, 200, 7);
        let signed = observe_signed(&s, &x).unwrap();
        let phaseless = signed.to_phaseless();
        let u = sample_unit_sphere(12, &mut rng).unwrap();
        let x0 = Vector::new(x.iter().zip(u.iter()).map(|(a, b)| a + 0.01 * b).collect()).unwrap();
        let cfg = SolveConfig::new(1000, 3);
        let p = run(
            &s,
            Observations::Phaseless(&phaseless),
            &x0,
            &cfg,
            Mode::Phase,
            Some(&x),
        )
        .unwrap();
        assert!(p.steps.iter().all(|r| r.mismatch == Some(false)));
        let l = run(
            &s,
            Observations::Signed(&signed),
            &x0,
            &cfg,
            Mode::Linear,
            Some(&x),
        )
        .unwrap();
        let pb: Vec<u64> = p.final_iterate.iter().map(|c| c.to_bits()).collect();
        let lb: Vec<u64> = l.final_iterate.iter().map(|c| c.to_bits()).collect();
        assert_eq!(pb, lb);
        for (rp, rl) in p.steps.iter().zip(&l.steps) {
            assert_eq!(rp.t, rl.t);
            assert_eq!(
                rp.sq_error.unwrap().to_bits(),
                rl.sq_error.unwrap().to_bits()
            );
        }
    }

    #[test]
    fn run_rejects_bad_inputs() {
        let (s, x, mut rng) = setup(4, 10, 8);
        let other = generate_system(4, 10, Distribution::UniformSphere, &mut rng).unwrap();
        let obs = observe(&other, &x).unwrap();
        let cfg = SolveConfig::new(10, 0);
        assert!(matches!(
            run(
                &s,
                Observations::Phaseless(&obs),
                &x,
                &cfg,
                Mode::Phase,
                None
            ),
            Err(Error::DigestMismatch { .. })
        ));
        let obs = observe(&s, &x).unwrap();
        assert!(matches!(
            run(
                &s,
                Observations::Phaseless(&obs),
                &Vector::zeros(3),
                &cfg,
                Mode::Phase,
                None
            ),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(run(
            &s,
            Observations::Phaseless(&obs),
            &x,
            &cfg,
            Mode::Linear,
            None
        )
        .is_err());
        let mut bad = cfg.clone();
        bad.max_steps = 0;
        assert!(run(
            &s,
            Observations::Phaseless(&obs),
            &x,
            &bad,
            Mode::Phase,
            None
        )
        .is_err());
    }

    #[test]
    fn run_without_truth_has_empty_errors() {
        let (s, x, _) = setup(3, 5, 9);
        let obs = observe(&s, &x).unwrap();
        let tr = run(
            &s,
            Observations::Phaseless(&obs),
            &Vector::zeros(3),
            &SolveConfig::new(5, 1),
            Mode::Phase,
            None,
        )
        .unwrap();
        assert!(tr
            .steps
            .iter()
            .all(|r| r.sq_error.is_none() && r.mismatch.is_none()));
        assert!(tr.to_csv().lines().nth(1).unwrap().ends_with(",,"));
        assert!(hitting_time(&tr, 1.0).is_err());
    }

    #[test]
    fn stride_and_early_stop() {
        let (s, x, _) = setup(5, 40, 10);
        let obs = observe(&s, &x).unwrap();
        let x0 = x.scaled(1.1);
        let mut cfg = SolveConfig::new(103, 2);
        cfg.trace_every = 10;
        let tr = run(
            &s,
            Observations::Phaseless(&obs),
            &x0,
            &cfg,
            Mode::Phase,
            Some(&x),
        )
        .unwrap();
        let ks: Vec<usize> = tr.steps.iter().map(|r| r.k).collect();
        assert_eq!(ks, vec![9, 19, 29, 39, 49, 59, 69, 79, 89, 99, 102]);
        assert!(!tr.stopped_early);

        cfg.trace_every = 1;
        cfg.stop_tol = Some(1e-6);
        cfg.max_steps = 100_000;
        let tr = run(
            &s,
            Observations::Phaseless(&obs),
            &x0,
            &cfg,
            Mode::Phase,
            Some(&x),
        )
        .unwrap();
        assert!(tr.stopped_early);
        assert!(tr.final_sq_error().unwrap() <= 1e-6);
        assert_eq!(tr.steps_taken, tr.steps.last().unwrap().k + 1);
    }

    #[test]
    fn trace_csv_format() {
        let s = MeasurementSystem::from_rows(&[vec![1.0, 0.0]], Provenance::Loaded, None).unwrap();
        let x = Vector::new(vec![1.0, 0.0]).unwrap();
        let obs = observe(&s, &x).unwrap();
        let tr = run(
            &s,
            Observations::Phaseless(&obs),
            &x,
            &SolveConfig::new(2, 0),
            Mode::Phase,
            Some(&x),
        )
        .unwrap();
        assert_eq!(
            tr.to_csv(),
            "k,t,sq_error,mismatch\n0,0,0.0000000000000000e0,0\n1,0,0.0000000000000000e0,0\n"
        );
    }

    #[test]
    fn error_form_tracks_iterate_form() {
        let (s, x, mut rng) = setup(20, 800, 11);
        let obs = observe(&s, &x).unwrap();
        let u = sample_unit_sphere(20, &mut rng).unwrap();
        let x0 = Vector::new(x.iter().zip(u.iter()).map(|(a, b)| a + 0.03 * b).collect()).unwrap();
        let tr = run(
            &s,
            Observations::Phaseless(&obs),
            &x0,
            &SolveConfig::new(3000, 21),
            Mode::Phase,
            Some(&x),
        )
        .unwrap();
        let iterate_path = tr.error_path().unwrap();
        let error_path = phase_error_path(&s, &x, &x0, 3000, 21).unwrap();
        assert_eq!(error_path.len(), iterate_path.len());
        let mut compared = 0;
        for ((_, a), b) in iterate_path.iter().zip(&error_path) {
            if *a > 1e-14 {
                assert!((a - b).abs() <= 1e-6 * a, "{a} {b}");
                compared += 1;
            }
        }
        assert!(compared > 100);
        // The iterate form stalls at the f64 spacing of x; the error form keeps decaying.
        assert!(*iterate_path.last().map(|(_, e)| e).unwrap() > 1e-40);
        assert!(
            *error_path.last().unwrap() < 1e-50,
            "{}",
            error_path.last().unwrap()
        );
    }

    #[test]
    fn hitting_time_examples() {
        assert_eq!(
            first_exceedance(&[0.25, 0.64, 1.44], 1.0).unwrap(),
            HittingTime::At(2)
        );
        assert_eq!(
            first_exceedance(&[0.25, 0.64, 1.0], 1.0).unwrap(),
            HittingTime::NotHitWithinHorizon
        );
        assert_eq!(
            first_exceedance(&[4.0, 0.1], 1.0).unwrap(),
            HittingTime::At(0)
        );
        assert!(first_exceedance(&[1.0], 0.0).is_err());
    }

    #[test]
    fn hitting_time_maps_to_iterate_index() {
        let tr = IterationTrace {
            mode: Mode::Phase,
            steps: vec![
                StepRecord {
                    k: 0,
                    t: 0,
                    sq_error: Some(0.64),
                    mismatch: Some(false),
                },
                StepRecord {
                    k: 1,
                    t: 0,
                    sq_error: Some(1.44),
                    mismatch: Some(true),
                },
            ],
            final_iterate: Vector::zeros(1),
            initial_sq_error: Some(0.25),
            steps_taken: 2,
            stopped_early: false,
            truth_sign: Some(1),
        };
        assert_eq!(hitting_time(&tr, 1.0).unwrap(), HittingTime::At(2));
    }
}
