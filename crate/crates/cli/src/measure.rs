//! Parser for measure specifications:
//!
//! * `mp:c=<c>,s2=<σ²>,shift=<s>` (`s2` defaults to 1, `shift` to 0)
//! * `atoms:δ<x>`, `atoms:<x>@<w>,<x>@<w>,...` or `atoms:@<file.csv>`
//! * `grid:@<file.csv>`

use std::fs::File;
use std::path::Path;

use fusionspec::freeprob::{Discrete, GridDensity, SpectralMeasure};

use crate::CliError;

fn bad(token: &str, why: &str) -> CliError {
    CliError::Usage(format!("bad measure spec token {token:?}: {why}"))
}

fn number(token: &str, text: &str) -> Result<f64, CliError> {
    text.trim()
        .parse::<f64>()
        .map_err(|_| bad(token, "not a number"))
}

fn open(token: &str, path: &str) -> Result<File, CliError> {
    if path.is_empty() {
        return Err(bad(token, "missing file name after '@'"));
    }
    File::open(Path::new(path)).map_err(CliError::Io)
}

fn parse_mp(body: &str) -> Result<SpectralMeasure, CliError> {
    let (mut c, mut s2, mut shift) = (None, 1.0, 0.0);
    for token in body.split(',') {
        let (key, value) = token.split_once('=').ok_or_else(|| bad(token, "expected key=value"))?;
        match key.trim() {
            "c" => c = Some(number(token, value)?),
            "s2" => s2 = number(token, value)?,
            "shift" => shift = number(token, value)?,
            _ => return Err(bad(token, "unknown key (expected c, s2 or shift)")),
        }
    }
    let c = c.ok_or_else(|| bad(body, "missing c="))?;
    SpectralMeasure::mp(c, s2, shift).map_err(|e| bad(body, &e.to_string()))
}

fn parse_atoms(body: &str) -> Result<SpectralMeasure, CliError> {
    if let Some(path) = body.strip_prefix('@') {
        return Ok(SpectralMeasure::Discrete(Discrete::read_csv(open(body, path)?)?));
    }
    if let Some(x) = body.strip_prefix('δ') {
        return SpectralMeasure::point(number(body, x)?).map_err(|e| bad(body, &e.to_string()));
    }
    let atoms = body
        .split(',')
        .map(|token| {
            let (x, w) = token.split_once('@').ok_or_else(|| bad(token, "expected value@weight"))?;
            Ok((number(token, x)?, number(token, w)?))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    SpectralMeasure::discrete(atoms).map_err(|e| bad(body, &e.to_string()))
}

pub fn parse_measure(spec: &str) -> Result<SpectralMeasure, CliError> {
    let (kind, body) = spec
        .split_once(':')
        .ok_or_else(|| bad(spec, "expected <kind>:<parameters>"))?;
    match kind {
        "mp" => parse_mp(body),
        "atoms" => parse_atoms(body),
        "grid" => {
            let path = body
                .strip_prefix('@')
                .ok_or_else(|| bad(body, "grid measures are read from @file.csv"))?;
            Ok(SpectralMeasure::Grid(GridDensity::read_csv(open(body, path)?)?))
        }
        _ => Err(bad(kind, "unknown measure kind (expected mp, atoms or grid)")),
    }
}

/// `a:b:k` → `k` equispaced points from `a` to `b`.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = spec.split(':').collect();
    let [a, b, k] = parts[..] else {
        return Err(bad(spec, "expected a:b:k"));
    };
    let (a, b) = (number(a, a)?, number(b, b)?);
    let k: usize = k.trim().parse().map_err(|_| bad(k, "not a count"))?;
    if k < 2 || !(a < b) {
        return Err(bad(spec, "need a < b and k >= 2"));
    }
    Ok((0..k).map(|i| a + (b - a) * i as f64 / (k - 1) as f64).collect())
}
