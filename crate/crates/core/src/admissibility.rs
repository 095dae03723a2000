//! Empirical certification of the four admissibility conditions of a
//! measurement system at level `delta`:
//!
//! 1. tessellation: the fraction of rows separating `x` and `y` stays within
//!    `delta` of their normalized geodesic distance;
//! 2. second moment: `(1/m) sum <z, phi>^2` lies in `[lo/d, hi/d]` for unit `z`;
//! 3. truncated fourth moment: `(1/m) sum <z, phi>^4 1{<z, phi>^2 <= 1/(delta d)} <= c4/d^2`;
//! 4. truncated tail: `(1/m) sum <z, phi>^2 1{<z, phi>^2 > 1/(delta d)} <= c2 delta/d`.
//!
//! Condition 2 is settled exactly by the extreme eigenvalues of the empirical
//! second-moment matrix. The others are suprema over the sphere (or pairs of
//! points) and are probed by sampling plus adversarial candidates, so a pass
//! is evidence and a fail comes with a witness that proves the violation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{check_dims, dot, fill_unit_sphere, geodesic_frac, norm, sigma, Vector};
use crate::linalg::{second_moment_matrix, symmetric_extremes};
use crate::measurements::MeasurementSystem;
use crate::rng::SeededRng;

/// Truncation surrogate used for the fourth-moment condition.
pub fn gamma1(s: f64, delta: f64) -> f64 {
    let inv = 1.0 / delta;
    if s <= inv {
        s * s
    } else if s <= 2.0 * inv {
        (2.0 * inv - s) * inv
    } else {
        0.0
    }
}

/// Truncation surrogate used for the tail condition.
pub fn gamma2(s: f64, delta: f64) -> f64 {
    if s <= 1.0 / delta {
        delta * s * s
    } else {
        s
    }
}

/// Constants of the bounds. Defaults are `1/2`, `3/2`, `4` and `4`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub second_lower: f64,
    pub second_upper: f64,
    pub trunc_fourth: f64,
    pub trunc_tail: f64,
}

impl Default for Constants {
    fn default() -> Self {
        Self {
            second_lower: 0.5,
            second_upper: 1.5,
            trunc_fourth: 4.0,
            trunc_tail: 4.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CheckMethod {
    ExactEigen,
    SampledSup,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionResult {
    pub passed: bool,
    /// Bound minus observed extreme; negative means violated.
    pub worst_margin: f64,
    /// The observed extreme value itself.
    pub observed: f64,
    pub method: CheckMethod,
    pub samples_used: usize,
    pub witness: Option<Vec<Vector>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    pub n_pairs: usize,
    pub n_dirs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub delta: f64,
    pub d: usize,
    pub m: usize,
    pub constants: Constants,
    pub cond_tessellation: ConditionResult,
    pub cond_second_moment: ConditionResult,
    pub cond_trunc_fourth: ConditionResult,
    pub cond_trunc_tail: ConditionResult,
    pub overall: bool,
    pub notes: Vec<String>,
}

impl AdmissibilityReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    Ok(())
}

/// Index of the largest value; the lowest index wins ties.
fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Fraction of rows whose hyperplane separates `x` and `y`, with `sigma(0) = +1`.
pub fn disagreement_fraction(system: &MeasurementSystem, x: &[f64], y: &[f64]) -> Result<f64> {
    check_dims(system.dim(), x.len())?;
    check_dims(system.dim(), y.len())?;
    let count = system
        .rows()
        .filter(|phi| sigma(dot(x, phi)) != sigma(dot(y, phi)))
        .count();
    Ok(count as f64 / system.len() as f64)
}

/// `|disagreement_fraction − geodesic_frac|` for one pair.
pub fn tessellation_deviation(system: &MeasurementSystem, x: &[f64], y: &[f64]) -> Result<f64> {
    Ok((disagreement_fraction(system, x, y)? - geodesic_frac(x, y)?).abs())
}

/// Truncated fourth moment at direction `z` (normalized internally).
pub fn trunc_fourth_value(system: &MeasurementSystem, z: &[f64], delta: f64) -> Result<f64> {
    check_dims(system.dim(), z.len())?;
    let unit = unit_direction(z)?;
    Ok(trunc_fourth_unit(
        system,
        &unit,
        threshold(system.dim(), delta),
    ))
}

/// Truncated tail second moment at direction `z` (normalized internally).
pub fn trunc_tail_value(system: &MeasurementSystem, z: &[f64], delta: f64) -> Result<f64> {
    check_dims(system.dim(), z.len())?;
    let unit = unit_direction(z)?;
    Ok(trunc_tail_unit(
        system,
        &unit,
        threshold(system.dim(), delta),
    ))
}

fn unit_direction(z: &[f64]) -> Result<Vec<f64>> {
    let n = norm(z);
    if n == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok(z.iter().map(|c| c / n).collect())
}

fn threshold(d: usize, delta: f64) -> f64 {
    1.0 / (delta * d as f64)
}

fn trunc_fourth_unit(system: &MeasurementSystem, z: &[f64], tau: f64) -> f64 {
    let sum: f64 = system
        .rows()
        .map(|phi| {
            let p2 = dot(z, phi).powi(2);
            if p2 <= tau {
                p2 * p2
            } else {
                0.0
            }
        })
        .sum();
    sum / system.len() as f64
}

fn trunc_tail_unit(system: &MeasurementSystem, z: &[f64], tau: f64) -> f64 {
    let sum: f64 = system
        .rows()
        .map(|phi| {
            let p2 = dot(z, phi).powi(2);
            if p2 > tau {
                p2
            } else {
                0.0
            }
        })
        .sum();
    sum / system.len() as f64
}

/// Samples pairs and reports the largest tessellation deviation. Even pairs
/// are independent uniform points; odd pairs are `y = normalize(x + r u)` with
/// `r` log-uniform on `[1e-4, 1]` to probe small angles.
pub fn check_tessellation(
    system: &MeasurementSystem,
    delta: f64,
    n_pairs: usize,
    rng: &mut SeededRng,
) -> Result<ConditionResult> {
    check_delta(delta)?;
    if n_pairs == 0 {
        return Err(Error::invalid("n_pairs must be at least 1"));
    }
    use rand::Rng;
    let d = system.dim();
    let mut pairs = Vec::with_capacity(n_pairs);
    let mut u = vec![0.0; d];
    for i in 0..n_pairs {
        let mut x = vec![0.0; d];
        fill_unit_sphere(&mut x, rng);
        let mut y = vec![0.0; d];
        if i % 2 == 0 {
            fill_unit_sphere(&mut y, rng);
        } else {
            fill_unit_sphere(&mut u, rng);
            let r = 10f64.powf(-4.0 + 4.0 * rng.random::<f64>());
            for j in 0..d {
                y[j] = x[j] + r * u[j];
            }
            let n = norm(&y);
            y.iter_mut().for_each(|c| *c /= n);
        }
        pairs.push((x, y));
    }
    let deviations: Vec<f64> = pairs
        .par_iter()
        .map(|(x, y)| tessellation_deviation(system, x, y))
        .collect::<Result<_>>()?;
    let best = argmax(&deviations);
    let observed = deviations[best];
    let (x, y) = &pairs[best];
    Ok(ConditionResult {
        passed: observed < delta,
        worst_margin: delta - observed,
        observed,
        method: CheckMethod::SampledSup,
        samples_used: n_pairs,
        witness: Some(vec![
            Vector::from_vec_unchecked(x.clone()),
            Vector::from_vec_unchecked(y.clone()),
        ]),
    })
}

/// Exact check through the extreme eigenvalues of `(1/m) sum phi phi^T`.
pub fn check_second_moment(system: &MeasurementSystem) -> Result<ConditionResult> {
    check_second_moment_with(system, &Constants::default())
}

pub fn check_second_moment_with(
    system: &MeasurementSystem,
    constants: &Constants,
) -> Result<ConditionResult> {
    let d = system.dim() as f64;
    let ext = symmetric_extremes(&second_moment_matrix(system))?;
    let lower_margin = ext.min_value - constants.second_lower / d;
    let upper_margin = constants.second_upper / d - ext.max_value;
    let (worst_margin, observed, witness) = if lower_margin <= upper_margin {
        (lower_margin, ext.min_value, ext.min_vector)
    } else {
        (upper_margin, ext.max_value, ext.max_vector)
    };
    Ok(ConditionResult {
        passed: lower_margin >= 0.0 && upper_margin >= 0.0,
        worst_margin,
        observed,
        method: CheckMethod::ExactEigen,
        samples_used: 0,
        witness: Some(vec![witness]),
    })
}

/// Candidate directions: every row of the system first, then `n_dirs`
/// uniform draws. With the same seed a larger budget extends the smaller one.
fn candidate_directions(
    system: &MeasurementSystem,
    n_dirs: usize,
    rng: &mut SeededRng,
) -> Vec<Vec<f64>> {
    let d = system.dim();
    let mut out: Vec<Vec<f64>> = system.rows().map(<[f64]>::to_vec).collect();
    out.reserve(n_dirs);
    for _ in 0..n_dirs {
        let mut z = vec![0.0; d];
        fill_unit_sphere(&mut z, rng);
        out.push(z);
    }
    out
}

fn sampled_sup(
    candidates: Vec<Vec<f64>>,
    bound: f64,
    eval: impl Fn(&[f64]) -> f64 + Sync,
) -> ConditionResult {
    let values: Vec<f64> = candidates.par_iter().map(|z| eval(z)).collect();
    let best = argmax(&values);
    let observed = values[best];
    let samples_used = candidates.len();
    let witness = candidates
        .into_iter()
        .nth(best)
        .map(|z| vec![Vector::from_vec_unchecked(z)]);
    ConditionResult {
        passed: observed <= bound,
        worst_margin: bound - observed,
        observed,
        method: CheckMethod::SampledSup,
        samples_used,
        witness,
    }
}

pub fn check_trunc_fourth(
    system: &MeasurementSystem,
    delta: f64,
    n_dirs: usize,
    rng: &mut SeededRng,
) -> Result<ConditionResult> {
    check_trunc_fourth_with(system, delta, n_dirs, rng, &Constants::default())
}

pub fn check_trunc_fourth_with(
    system: &MeasurementSystem,
    delta: f64,
    n_dirs: usize,
    rng: &mut SeededRng,
    constants: &Constants,
) -> Result<ConditionResult> {
    check_delta(delta)?;
    if n_dirs == 0 {
        return Err(Error::invalid("n_dirs must be at least 1"));
    }
    let d = system.dim() as f64;
    let tau = threshold(system.dim(), delta);
    let candidates = candidate_directions(system, n_dirs, rng);
    Ok(sampled_sup(
        candidates,
        constants.trunc_fourth / (d * d),
        |z| trunc_fourth_unit(system, z, tau),
    ))
}

pub fn check_trunc_tail(
    system: &MeasurementSystem,
    delta: f64,
    n_dirs: usize,
    rng: &mut SeededRng,
) -> Result<ConditionResult> {
    check_trunc_tail_with(system, delta, n_dirs, rng, &Constants::default())
}

pub fn check_trunc_tail_with(
    system: &MeasurementSystem,
    delta: f64,
    n_dirs: usize,
    rng: &mut SeededRng,
    constants: &Constants,
) -> Result<ConditionResult> {
    check_delta(delta)?;
    if n_dirs == 0 {
        return Err(Error::invalid("n_dirs must be at least 1"));
    }
    let d = system.dim() as f64;
    let tau = threshold(system.dim(), delta);
    let candidates = candidate_directions(system, n_dirs, rng);
    Ok(sampled_sup(
        candidates,
        constants.trunc_tail * delta / d,
        |z| trunc_tail_unit(system, z, tau),
    ))
}

/// Runs all four checks. Each sampled check draws from its own child stream
/// of `rng`, so the report depends only on the seed and the budget.
pub fn certify(
    system: &MeasurementSystem,
    delta: f64,
    budget: Budget,
    rng: &SeededRng,
) -> Result<AdmissibilityReport> {
    certify_with(system, delta, budget, rng, &Constants::default())
}

pub fn certify_with(
    system: &MeasurementSystem,
    delta: f64,
    budget: Budget,
    rng: &SeededRng,
    constants: &Constants,
) -> Result<AdmissibilityReport> {
    check_delta(delta)?;
    let cond_tessellation = check_tessellation(system, delta, budget.n_pairs, &mut rng.child(0))?;
    let cond_second_moment = check_second_moment_with(system, constants)?;
    let cond_trunc_fourth =
        check_trunc_fourth_with(system, delta, budget.n_dirs, &mut rng.child(1), constants)?;
    let cond_trunc_tail =
        check_trunc_tail_with(system, delta, budget.n_dirs, &mut rng.child(2), constants)?;
    let overall = cond_tessellation.passed
        && cond_second_moment.passed
        && cond_trunc_fourth.passed
        && cond_trunc_tail.passed;
    Ok(AdmissibilityReport {
        delta,
        d: system.dim(),
        m: system.len(),
        constants: *constants,
        cond_tessellation,
        cond_second_moment,
        cond_trunc_fourth,
        cond_trunc_tail,
        overall,
        notes: vec![
            "sign convention sigma(0) = +1 in the tessellation check".into(),
            "sampled suprema: a pass is evidence, a fail with witness is a proof of violation"
                .into(),
        ],
    })
}
