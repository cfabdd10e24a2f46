//! Plain-text formats: I/Q sample files and model parameter files.
//!
//! A sample file holds one `re<TAB>im` pair per line. A parameter file holds
//! one `name = v0 v1 ...` line per filter, values interleaved as
//! `re0 im0 re1 im1 ...`. Blank lines and lines starting with `#` are
//! ignored in both.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::signal::{ComplexSeq, PaddingMode};
use crate::vae::{ComplexFilter, DecoderParams, VaeModel, CONV1_LEN, CONV2_LEN};

fn parse_error(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_real(line: usize, field: &str) -> Result<f64> {
    let v: f64 = field
        .parse()
        .map_err(|_| parse_error(line, format!("{field:?} is not a number")))?;
    if !v.is_finite() {
        return Err(parse_error(line, format!("{field:?} is not finite")));
    }
    Ok(v)
}

/// Parses a sample file. An input without samples is an error.
pub fn parse_samples(text: &str) -> Result<ComplexSeq> {
    let mut out = Vec::new();
    for (line, content) in content_lines(text) {
        let fields: Vec<&str> = content.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(parse_error(
                line,
                format!("expected two columns `re<TAB>im`, found {}", fields.len()),
            ));
        }
        out.push(Complex64::new(parse_real(line, fields[0])?, parse_real(line, fields[1])?));
    }
    if out.is_empty() {
        return Err(parse_error(0, "no samples"));
    }
    Ok(ComplexSeq::from_complex(out))
}

/// Shortest round-trip decimal form of every value.
pub fn format_samples(seq: &ComplexSeq) -> String {
    let mut s = String::with_capacity(seq.len() * 24);
    for z in seq.iter() {
        let _ = writeln!(s, "{}\t{}", z.re, z.im);
    }
    s
}

fn push_entry(s: &mut String, name: &str, values: &[Complex64]) {
    s.push_str(name);
    s.push_str(" =");
    for z in values {
        let _ = write!(s, " {} {}", z.re, z.im);
    }
    s.push('\n');
}

pub fn format_model(model: &VaeModel) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "padding = {}", model.padding_mode.name());
    for (name, f) in [("conv1", &model.decoder.conv1), ("conv2", &model.decoder.conv2)] {
        push_entry(&mut s, &format!("{name}.taps"), &f.taps.to_vec());
        push_entry(&mut s, &format!("{name}.bias"), &[f.bias]);
    }
    push_entry(&mut s, "hhat", &model.hhat.to_vec());
    s
}

pub fn parse_model(text: &str) -> Result<VaeModel> {
    let mut entries: BTreeMap<String, (usize, String)> = BTreeMap::new();
    for (line, content) in content_lines(text) {
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| parse_error(line, "expected `name = values`"))?;
        let key = key.trim().to_string();
        if entries.insert(key.clone(), (line, value.trim().to_string())).is_some() {
            return Err(parse_error(line, format!("duplicate entry {key:?}")));
        }
    }
    let take = |key: &str| {
        entries
            .get(key)
            .ok_or_else(|| parse_error(0, format!("missing entry {key:?}")))
    };
    let complex_values = |key: &str, count: Option<usize>| -> Result<Vec<Complex64>> {
        let (line, value) = take(key)?;
        let reals = value
            .split_whitespace()
            .map(|f| parse_real(*line, f))
            .collect::<Result<Vec<f64>>>()?;
        if reals.len() % 2 != 0 || reals.is_empty() {
            return Err(parse_error(*line, format!("{key:?} needs a non-empty list of I/Q pairs")));
        }
        let values: Vec<Complex64> = reals.chunks(2).map(|p| Complex64::new(p[0], p[1])).collect();
        if let Some(n) = count {
            if values.len() != n {
                return Err(parse_error(*line, format!("{key:?} needs {n} complex values, got {}", values.len())));
            }
        }
        Ok(values)
    };
    let filter = |name: &str, len: usize| -> Result<ComplexFilter> {
        Ok(ComplexFilter {
            taps: ComplexSeq::from_complex(complex_values(&format!("{name}.taps"), Some(len))?),
            bias: complex_values(&format!("{name}.bias"), Some(1))?[0],
        })
    };
    let (line, padding) = take("padding")?;
    let padding_mode: PaddingMode = padding.parse().map_err(|e: Error| parse_error(*line, e.to_string()))?;
    let hhat = ComplexSeq::from_complex(complex_values("hhat", None)?);
    let hhat_line = take("hhat")?.0;
    padding_mode
        .origin(hhat.len())
        .map_err(|e| parse_error(hhat_line, e.to_string()))?;
    if let Some(key) = entries
        .keys()
        .find(|k| !["padding", "conv1.taps", "conv1.bias", "conv2.taps", "conv2.bias", "hhat"].contains(&k.as_str()))
    {
        return Err(parse_error(entries[key].0, format!("unknown entry {key:?}")));
    }
    Ok(VaeModel {
        decoder: DecoderParams {
            conv1: filter("conv1", CONV1_LEN)?,
            conv2: filter("conv2", CONV2_LEN)?,
        },
        hhat,
        padding_mode,
    })
}
