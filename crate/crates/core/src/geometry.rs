//! Sign convention, phase-invariant distance and sphere sampling.

use std::ops::Deref;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// A finite real vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::invalid("vector must have at least one coordinate"));
        }
        if let Some(index) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self(coords))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    /// Standard basis vector `e_i` in dimension `dim`.
    pub fn basis(dim: usize, i: usize) -> Self {
        let mut v = vec![0.0; dim];
        v[i] = 1.0;
        Self(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn norm_sq(&self) -> f64 {
        dot(&self.0, &self.0)
    }

    pub fn scaled(&self, a: f64) -> Vector {
        Vector(self.0.iter().map(|v| a * v).collect())
    }

    pub fn normalized(&self) -> Result<Vector> {
        let n = self.norm();
        if n == 0.0 {
            return Err(Error::ZeroVector);
        }
        Ok(Vector(self.0.iter().map(|v| v / n).collect()))
    }

    /// Internal constructor for coordinates already known to be finite.
    pub(crate) fn from_vec_unchecked(coords: Vec<f64>) -> Self {
        debug_assert!(coords.iter().all(|c| c.is_finite()));
        Self(coords)
    }
}

impl Deref for Vector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for Vector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Vector::new(v)
    }
}

impl From<Vector> for Vec<f64> {
    fn from(v: Vector) -> Vec<f64> {
        v.0
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub(crate) fn sq_dist_flipped(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x + y) * (x + y)).sum()
}

pub(crate) fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// Real sign with `sigma(0) = +1`, so that `w == sigma(w) * w.abs()`.
#[inline]
pub fn sigma(w: f64) -> f64 {
    if w >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// `min(‖u − v‖, ‖u + v‖)`: distance modulo a global sign.
pub fn dist_up_to_sign(u: &[f64], v: &[f64]) -> Result<f64> {
    check_dims(u.len(), v.len())?;
    Ok(sq_dist_up_to_sign(u, v).sqrt())
}

#[inline]
pub(crate) fn sq_dist_up_to_sign(u: &[f64], v: &[f64]) -> f64 {
    sq_dist(u, v).min(sq_dist_flipped(u, v))
}

/// Angle between `x` and `y` divided by π.
pub fn geodesic_frac(x: &[f64], y: &[f64]) -> Result<f64> {
    check_dims(x.len(), y.len())?;
    let nx = norm(x);
    let ny = norm(y);
    if nx == 0.0 || ny == 0.0 {
        return Err(Error::ZeroVector);
    }
    // Half-angle form: exact 0 for parallel inputs, well conditioned near 0 and pi.
    let (mut diff, mut sum) = (0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (u, v) = (a / nx, b / ny);
        diff += (u - v) * (u - v);
        sum += (u + v) * (u + v);
    }
    let theta = 2.0 * diff.sqrt().atan2(sum.sqrt());
    Ok(theta.clamp(0.0, std::f64::consts::PI) / std::f64::consts::PI)
}

/// Uniform draw from the unit sphere in `dim` dimensions, by normalizing a
/// standard Gaussian vector.
pub fn sample_unit_sphere(dim: usize, rng: &mut SeededRng) -> Result<Vector> {
    if dim == 0 {
        return Err(Error::invalid("dimension must be at least 1"));
    }
    let mut buf = vec![0.0; dim];
    fill_unit_sphere(&mut buf, rng);
    Ok(Vector(buf))
}

pub(crate) fn fill_unit_sphere(buf: &mut [f64], rng: &mut SeededRng) {
    loop {
        for v in buf.iter_mut() {
            *v = StandardNormal.sample(rng);
        }
        let n = norm(buf);
        // An all-zero draw has probability zero; redraw if it ever happens.
        if n > 0.0 {
            buf.iter_mut().for_each(|v| *v /= n);
            return;
        }
    }
}
