//! Measurement systems, phaseless observations and their file formats.
//!
//! System file: header `d,<d>,m,<m>,provenance,<tag>,seed,<seed-or-NA>`, then
//! `m` rows of `d` comma-separated numbers. Observation file: header
//! `m,<m>,digest,<hex>`, then `m` rows of one number. Numbers are written with
//! 17 significant digits and reload bit-exactly.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{check_dims, dot, fill_unit_sphere, norm, Vector};
use crate::io::{fmt_f64, numbered_lines, parse_f64, parse_header, parse_usize, read_text};
use crate::rng::SeededRng;

/// Maximum deviation from unit norm accepted for stored measurement vectors.
pub const UNIT_NORM_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Distribution {
    UniformSphere,
    GaussianNormalized,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    UniformSphere,
    GaussianNormalized,
    Loaded,
}

impl Provenance {
    fn tag(self) -> &'static str {
        match self {
            Provenance::UniformSphere => "uniform_sphere",
            Provenance::GaussianNormalized => "gaussian_normalized",
            Provenance::Loaded => "loaded",
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Provenance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform_sphere" => Ok(Provenance::UniformSphere),
            "gaussian_normalized" => Ok(Provenance::GaussianNormalized),
            "loaded" => Ok(Provenance::Loaded),
            other => Err(Error::parse(1, format!("unknown provenance tag {other:?}"))),
        }
    }
}

impl From<Distribution> for Provenance {
    fn from(d: Distribution) -> Self {
        match d {
            Distribution::UniformSphere => Provenance::UniformSphere,
            Distribution::GaussianNormalized => Provenance::GaussianNormalized,
        }
    }
}

/// `m` unit vectors in `R^d`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementSystem {
    dim: usize,
    data: Vec<f64>,
    provenance: Provenance,
    seed: Option<u64>,
}

impl MeasurementSystem {
    /// Builds a system from rows that are already unit norm.
    pub fn from_rows(rows: &[Vec<f64>], provenance: Provenance, seed: Option<u64>) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::invalid("a measurement system needs at least one vector"))?;
        let dim = first.len();
        if dim == 0 {
            return Err(Error::invalid(
                "measurement vectors must have dimension >= 1",
            ));
        }
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (i, row) in rows.iter().enumerate() {
            check_dims(dim, row.len())?;
            if let Some(j) = row.iter().position(|c| !c.is_finite()) {
                return Err(Error::NonFinite { index: i * dim + j });
            }
            let n = norm(row);
            if (n - 1.0).abs() > UNIT_NORM_TOL {
                return Err(Error::contract(format!(
                    "measurement vector {i} has norm {n}, expected 1"
                )));
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            dim,
            data,
            provenance,
            seed,
        })
    }

    /// Builds a system by normalizing arbitrary nonzero rows.
    pub fn from_raw_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let (normalized, _) = normalize_rows(rows)?;
        Self::from_rows(&normalized, Provenance::Loaded, None)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of measurement vectors `m`.
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    /// 64-bit FNV-1a over `d`, `m` (little-endian u64) and every coordinate's
    /// IEEE-754 bits in row order. Provenance does not enter the digest.
    pub fn digest(&self) -> u64 {
        let mut h = Fnv1a::new();
        h.write(&(self.dim as u64).to_le_bytes());
        h.write(&(self.len() as u64).to_le_bytes());
        for c in &self.data {
            h.write(&c.to_bits().to_le_bytes());
        }
        h.finish()
    }

    pub fn to_csv(&self) -> String {
        let seed = self
            .seed
            .map_or_else(|| "NA".to_string(), |s| s.to_string());
        let mut out = format!(
            "d,{},m,{},provenance,{},seed,{}\n",
            self.dim,
            self.len(),
            self.provenance,
            seed
        );
        for row in self.rows() {
            let line: Vec<String> = row.iter().map(|c| fmt_f64(*c)).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = numbered_lines(text);
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(1, "empty system file"))?;
        let h = parse_header(header, &["d", "m", "provenance", "seed"])?;
        let dim = parse_usize(h[0], 1, "dimension")?;
        let m = parse_usize(h[1], 1, "count")?;
        if dim == 0 || m == 0 {
            return Err(Error::parse(1, "d and m must be positive"));
        }
        let provenance: Provenance = h[2].parse()?;
        let seed = match h[3] {
            "NA" => None,
            s => Some(
                s.parse::<u64>()
                    .map_err(|_| Error::parse(1, format!("invalid seed {s:?}")))?,
            ),
        };
        let mut rows = Vec::with_capacity(m);
        for (line, row) in lines {
            let fields: Vec<&str> = row.split(',').collect();
            if fields.len() != dim {
                return Err(Error::parse(
                    line,
                    format!(
                        "row {} has {} entries, expected {dim}",
                        rows.len(),
                        fields.len()
                    ),
                ));
            }
            let coords = fields
                .iter()
                .map(|f| parse_f64(f, line))
                .collect::<Result<Vec<_>>>()?;
            if (norm(&coords) - 1.0).abs() > UNIT_NORM_TOL {
                return Err(Error::parse(
                    line,
                    format!("row {} is not unit norm", rows.len()),
                ));
            }
            rows.push(coords);
        }
        if rows.len() != m {
            return Err(Error::parse(
                1,
                format!("header declares m={m} but file has {} rows", rows.len()),
            ));
        }
        Self::from_rows(&rows, provenance, seed)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        Ok(fs::write(path, self.to_csv())?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_csv(&read_text(path)?)
    }
}

struct Fnv1a(u64);

impl Fnv1a {
    fn new() -> Self {
        Fnv1a(0xcbf2_9ce4_8422_2325)
    }

    fn write(&mut self, bytes: &[u8]) {
        for b in bytes {
            self.0 ^= u64::from(*b);
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }

    fn finish(&self) -> u64 {
        self.0
    }
}

/// Draws `m` independent measurement vectors.
///
/// Both distributions normalize a standard Gaussian draw, so the resulting
/// laws coincide; the label is kept for experiment bookkeeping.
pub fn generate_system(
    dim: usize,
    m: usize,
    distribution: Distribution,
    rng: &mut SeededRng,
) -> Result<MeasurementSystem> {
    if dim == 0 || m == 0 {
        return Err(Error::invalid("d and m must be positive"));
    }
    let mut data = vec![0.0; dim * m];
    for row in data.chunks_exact_mut(dim) {
        fill_unit_sphere(row, rng);
    }
    Ok(MeasurementSystem {
        dim,
        data,
        provenance: distribution.into(),
        seed: Some(rng.seed()),
    })
}

/// Intensities `|<x, phi_i>|` bound to a system by digest.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaselessObservation {
    intensities: Vec<f64>,
    system_digest: u64,
}

/// Signed measurements `<x, phi_i>`, used by the linear solver.
#[derive(Clone, Debug, PartialEq)]
pub struct SignedObservation {
    values: Vec<f64>,
    system_digest: u64,
}

impl PhaselessObservation {
    pub fn new(intensities: Vec<f64>, system_digest: u64) -> Result<Self> {
        if let Some(i) = intensities.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid(format!(
                "intensity {i} must be finite and nonnegative, got {}",
                intensities[i]
            )));
        }
        Ok(Self {
            intensities,
            system_digest,
        })
    }

    pub fn intensities(&self) -> &[f64] {
        &self.intensities
    }

    pub fn system_digest(&self) -> u64 {
        self.system_digest
    }

    pub fn len(&self) -> usize {
        self.intensities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intensities.is_empty()
    }

    pub fn check_binding(&self, system: &MeasurementSystem) -> Result<()> {
        check_binding(self.system_digest, self.len(), system)
    }

    pub fn to_csv(&self) -> String {
        values_to_csv(&self.intensities, self.system_digest)
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let (values, digest) = values_from_csv(text)?;
        if let Some(i) = values.iter().position(|v| *v < 0.0) {
            return Err(Error::parse(i + 2, "intensities must be nonnegative"));
        }
        Self::new(values, digest)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        Ok(fs::write(path, self.to_csv())?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_csv(&read_text(path)?)
    }
}

impl SignedObservation {
    pub fn new(values: Vec<f64>, system_digest: u64) -> Result<Self> {
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self {
            values,
            system_digest,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn system_digest(&self) -> u64 {
        self.system_digest
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn check_binding(&self, system: &MeasurementSystem) -> Result<()> {
        check_binding(self.system_digest, self.len(), system)
    }

    /// Drops the signs.
    pub fn to_phaseless(&self) -> PhaselessObservation {
        PhaselessObservation {
            intensities: self.values.iter().map(|v| v.abs()).collect(),
            system_digest: self.system_digest,
        }
    }

    pub fn to_csv(&self) -> String {
        values_to_csv(&self.values, self.system_digest)
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let (values, digest) = values_from_csv(text)?;
        Self::new(values, digest)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        Ok(fs::write(path, self.to_csv())?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_csv(&read_text(path)?)
    }
}

fn check_binding(digest: u64, len: usize, system: &MeasurementSystem) -> Result<()> {
    let expected = system.digest();
    if digest != expected {
        return Err(Error::DigestMismatch {
            expected,
            found: digest,
        });
    }
    check_dims(system.len(), len)
}

fn values_to_csv(values: &[f64], digest: u64) -> String {
    let mut out = format!("m,{},digest,{digest:016x}\n", values.len());
    for v in values {
        out.push_str(&fmt_f64(*v));
        out.push('\n');
    }
    out
}

fn values_from_csv(text: &str) -> Result<(Vec<f64>, u64)> {
    let mut lines = numbered_lines(text);
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(1, "empty observation file"))?;
    let h = parse_header(header, &["m", "digest"])?;
    let m = parse_usize(h[0], 1, "count")?;
    let digest = u64::from_str_radix(h[1], 16)
        .map_err(|_| Error::parse(1, format!("invalid digest {:?}", h[1])))?;
    let mut values = Vec::with_capacity(m);
    for (line, row) in lines {
        if row.contains(',') {
            return Err(Error::parse(line, "expected a single number per line"));
        }
        values.push(parse_f64(row, line)?);
    }
    if values.len() != m {
        return Err(Error::parse(
            1,
            format!("header declares m={m} but file has {} rows", values.len()),
        ));
    }
    Ok((values, digest))
}

fn normalize_rows(phi_raw: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let mut norms = Vec::with_capacity(phi_raw.len());
    let mut rows = Vec::with_capacity(phi_raw.len());
    for (index, row) in phi_raw.iter().enumerate() {
        if let Some(j) = row.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFinite { index: j });
        }
        let n = norm(row);
        if n == 0.0 {
            return Err(Error::ZeroMeasurement { index });
        }
        rows.push(row.iter().map(|c| c / n).collect());
        norms.push(n);
    }
    Ok((rows, norms))
}

/// Rescales raw measurement vectors to unit norm and divides each intensity
/// by the same factor, leaving the phaseless equations unchanged.
pub fn normalize_observation(
    phi_raw: &[Vec<f64>],
    y_abs_raw: &[f64],
) -> Result<(MeasurementSystem, PhaselessObservation)> {
    check_dims(phi_raw.len(), y_abs_raw.len())?;
    let (rows, norms) = normalize_rows(phi_raw)?;
    let system = MeasurementSystem::from_rows(&rows, Provenance::Loaded, None)?;
    let intensities = y_abs_raw.iter().zip(&norms).map(|(y, n)| y / n).collect();
    let obs = PhaselessObservation::new(intensities, system.digest())?;
    Ok((system, obs))
}

fn inner_products(system: &MeasurementSystem, x: &[f64]) -> Result<Vec<f64>> {
    check_dims(system.dim(), x.len())?;
    Ok(system.rows().map(|phi| dot(x, phi)).collect())
}

/// `|<x, phi_i>|` for every measurement vector.
pub fn observe(system: &MeasurementSystem, x: &Vector) -> Result<PhaselessObservation> {
    let values = inner_products(system, x)?;
    Ok(PhaselessObservation {
        intensities: values.into_iter().map(f64::abs).collect(),
        system_digest: system.digest(),
    })
}

/// `<x, phi_i>` for every measurement vector.
pub fn observe_signed(system: &MeasurementSystem, x: &Vector) -> Result<SignedObservation> {
    Ok(SignedObservation {
        values: inner_products(system, x)?,
        system_digest: system.digest(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::symmetric_extremes;

    fn e(dim: usize, i: usize) -> Vec<f64> {
        Vector::basis(dim, i).into_inner()
    }

    fn bits(s: &MeasurementSystem) -> Vec<u64> {
        s.rows().flatten().map(|c| c.to_bits()).collect()
    }

    #[test]
    fn generation_is_reproducible() {
        let a = generate_system(2, 3, Distribution::UniformSphere, &mut SeededRng::new(1)).unwrap();
        let b = generate_system(2, 3, Distribution::UniformSphere, &mut SeededRng::new(1)).unwrap();
        assert_eq!(bits(&a), bits(&b));
        assert_eq!(a.len(), 3);
        for row in a.rows() {
            assert!((norm(row) - 1.0).abs() < UNIT_NORM_TOL);
        }
        let c = generate_system(2, 3, Distribution::UniformSphere, &mut SeededRng::new(2)).unwrap();
        assert_ne!(bits(&a), bits(&c));
    }

    #[test]
    fn gaussian_provenance_is_kept() {
        let s = generate_system(
            4,
            5,
            Distribution::GaussianNormalized,
            &mut SeededRng::new(3),
        )
        .unwrap();
        assert_eq!(s.provenance(), Provenance::GaussianNormalized);
        assert_eq!(s.seed(), Some(3));
        for row in s.rows() {
            assert!((norm(row) - 1.0).abs() < UNIT_NORM_TOL);
        }
    }

    #[test]
    fn d1_entries_are_signs() {
        let s = generate_system(1, 5, Distribution::UniformSphere, &mut SeededRng::new(9)).unwrap();
        for row in s.rows() {
            assert!(row[0] == 1.0 || row[0] == -1.0);
        }
    }

    #[test]
    fn second_moment_eigenvalues_d16_m800() {
        let d = 16;
        let mut passes = 0;
        for seed in 0..20 {
            let s = generate_system(
                d,
                800,
                Distribution::UniformSphere,
                &mut SeededRng::new(seed),
            )
            .unwrap();
            let ext = symmetric_extremes(&crate::linalg::second_moment_matrix(&s)).unwrap();
            if ext.min_value > 0.5 / d as f64 && ext.max_value < 1.5 / d as f64 {
                passes += 1;
            }
        }
        assert!(passes >= 19, "{passes}/20");
    }

    #[test]
    fn normalize_examples() {
        let (s, o) = normalize_observation(&[vec![3.0, 4.0]], &[10.0]).unwrap();
        assert!((s.row(0)[0] - 0.6).abs() < 1e-15 && (s.row(0)[1] - 0.8).abs() < 1e-15);
        assert_eq!(o.intensities(), &[2.0]);
        assert_eq!(o.system_digest(), s.digest());

        let (s, o) = normalize_observation(&[e(2, 0)], &[0.0]).unwrap();
        assert_eq!(s.row(0), &[1.0, 0.0]);
        assert_eq!(o.intensities(), &[0.0]);

        assert!(matches!(
            normalize_observation(&[vec![0.0, 0.0]], &[1.0]),
            Err(Error::ZeroMeasurement { index: 0 })
        ));
        assert!(matches!(
            normalize_observation(&[e(2, 0), vec![0.0, 0.0]], &[1.0, 1.0]),
            Err(Error::ZeroMeasurement { index: 1 })
        ));
    }

    #[test]
    fn observe_examples() {
        let s =
            MeasurementSystem::from_rows(&[e(2, 0), e(2, 1)], Provenance::Loaded, None).unwrap();
        let x = Vector::new(vec![3.0, -4.0]).unwrap();
        assert_eq!(observe(&s, &x).unwrap().intensities(), &[3.0, 4.0]);
        assert_eq!(
            observe(&s, &Vector::zeros(2)).unwrap().intensities(),
            &[0.0, 0.0]
        );
        let s1 = MeasurementSystem::from_rows(&[e(2, 0)], Provenance::Loaded, None).unwrap();
        let x = Vector::new(vec![-2.0, 5.0]).unwrap();
        assert_eq!(observe(&s1, &x).unwrap().intensities(), &[2.0]);
        assert!(observe(&s1, &Vector::zeros(3)).is_err());
    }

    #[test]
    fn observe_is_sign_blind() {
        let mut rng = SeededRng::new(5);
        let s = generate_system(6, 40, Distribution::UniformSphere, &mut rng).unwrap();
        let x = crate::geometry::sample_unit_sphere(6, &mut rng)
            .unwrap()
            .scaled(2.5);
        assert_eq!(
            observe(&s, &x).unwrap(),
            observe(&s, &x.scaled(-1.0)).unwrap()
        );
    }

    #[test]
    fn mean_squared_intensity_is_one_over_d() {
        let d = 10;
        let mut rng = SeededRng::new(77);
        let s = generate_system(d, 100_000, Distribution::UniformSphere, &mut rng).unwrap();
        let x = crate::geometry::sample_unit_sphere(d, &mut rng).unwrap();
        let obs = observe(&s, &x).unwrap();
        let mean = obs.intensities().iter().map(|v| v * v).sum::<f64>() / obs.len() as f64;
        assert!((mean * d as f64 - 1.0).abs() < 0.02, "{mean}");
    }

    #[test]
    fn system_file_round_trip() {
        let s =
            generate_system(4, 10, Distribution::UniformSphere, &mut SeededRng::new(8)).unwrap();
        let back = MeasurementSystem::from_csv(&s.to_csv()).unwrap();
        assert_eq!(bits(&s), bits(&back));
        assert_eq!(back.provenance(), Provenance::UniformSphere);
        assert_eq!(back.seed(), Some(8));
        assert_eq!(back.digest(), s.digest());
        assert!(s
            .to_csv()
            .starts_with("d,4,m,10,provenance,uniform_sphere,seed,8\n"));
    }

    #[test]
    fn system_file_errors() {
        let bad_row = "d,2,m,2,provenance,loaded,seed,NA\n1,0\n1\n";
        match MeasurementSystem::from_csv(bad_row) {
            Err(Error::Parse { line, msg }) => {
                assert_eq!(line, 3);
                assert!(msg.contains("row 1"), "{msg}");
            }
            other => panic!("unexpected {other:?}"),
        }
        let nan = "d,2,m,1,provenance,loaded,seed,NA\nNaN,0\n";
        assert!(matches!(
            MeasurementSystem::from_csv(nan),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(MeasurementSystem::from_csv("d,2,m,1\n1,0\n").is_err());
        assert!(MeasurementSystem::from_csv("d,2,m,2,provenance,loaded,seed,NA\n1,0\n").is_err());
        assert!(MeasurementSystem::from_csv("d,2,m,1,provenance,loaded,seed,NA\n2,0\n").is_err());
    }

    #[test]
    fn observation_file_round_trip_and_binding() {
        let mut rng = SeededRng::new(4);
        let s = generate_system(3, 7, Distribution::UniformSphere, &mut rng).unwrap();
        let x = crate::geometry::sample_unit_sphere(3, &mut rng).unwrap();
        let o = observe(&s, &x).unwrap();
        let back = PhaselessObservation::from_csv(&o.to_csv()).unwrap();
        assert_eq!(back, o);
        back.check_binding(&s).unwrap();

        let other = generate_system(3, 7, Distribution::UniformSphere, &mut rng).unwrap();
        assert!(matches!(
            back.check_binding(&other),
            Err(Error::DigestMismatch { .. })
        ));

        let signed = observe_signed(&s, &x).unwrap();
        let back = SignedObservation::from_csv(&signed.to_csv()).unwrap();
        assert_eq!(back, signed);
        assert_eq!(back.to_phaseless(), o);
        assert!(PhaselessObservation::from_csv("m,1,digest,00\n-1\n").is_err());
    }
}
