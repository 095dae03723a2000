//! Shared pieces of the CSV file formats.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// 17 significant digits: enough for every f64 to survive a text round trip.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub(crate) fn parse_f64(field: &str, line: usize) -> Result<f64> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| Error::parse(line, format!("cannot parse {:?} as a number", field.trim())))?;
    if !v.is_finite() {
        return Err(Error::parse(
            line,
            format!("non-finite value {:?}", field.trim()),
        ));
    }
    Ok(v)
}

pub(crate) fn parse_usize(field: &str, line: usize, what: &str) -> Result<usize> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::parse(line, format!("invalid {what} {:?}", field.trim())))
}

/// Non-empty lines with their 1-based line numbers.
pub(crate) fn numbered_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty())
}

/// Splits a `key,value,key,value,...` header and checks the expected keys.
pub(crate) fn parse_header<'a>(line: &'a str, keys: &[&str]) -> Result<Vec<&'a str>> {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() != 2 * keys.len() {
        return Err(Error::parse(
            1,
            format!(
                "header must have {} fields, found {}",
                2 * keys.len(),
                fields.len()
            ),
        ));
    }
    let mut values = Vec::with_capacity(keys.len());
    for (i, key) in keys.iter().enumerate() {
        if fields[2 * i] != *key {
            return Err(Error::parse(
                1,
                format!("expected header key {key:?}, found {:?}", fields[2 * i]),
            ));
        }
        values.push(fields[2 * i + 1]);
    }
    Ok(values)
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    Ok(fs::read_to_string(path)?)
}

/// Reads a dense vector file: header `d,<d>` followed by `d` lines of one number each.
pub fn load_vector(path: &Path) -> Result<crate::Vector> {
    parse_vector(&read_text(path)?)
}

pub fn parse_vector(text: &str) -> Result<crate::Vector> {
    let mut lines = numbered_lines(text);
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(1, "empty vector file"))?;
    let d = parse_usize(parse_header(header, &["d"])?[0], 1, "dimension")?;
    let mut coords = Vec::with_capacity(d);
    for (line, row) in lines {
        if row.contains(',') {
            return Err(Error::parse(line, "expected a single number per line"));
        }
        coords.push(parse_f64(row, line)?);
    }
    if coords.len() != d {
        return Err(Error::parse(
            1,
            format!(
                "header declares d={d} but file has {} entries",
                coords.len()
            ),
        ));
    }
    crate::Vector::new(coords)
}

pub fn format_vector(v: &[f64]) -> String {
    let mut out = format!("d,{}\n", v.len());
    for c in v {
        out.push_str(&fmt_f64(*c));
        out.push('\n');
    }
    out
}

pub fn save_vector(path: &Path, v: &[f64]) -> Result<()> {
    Ok(fs::write(path, format_vector(v))?)
}
