//! Discrete measures and piecewise-linear grid densities.

use std::io::{Read, Write};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::io::{fmt_f64, read_numeric_rows, write_table};

/// Finitely many atoms with positive weights summing to one, sorted by
/// location with duplicates merged.
#[derive(Debug, Clone, PartialEq)]
pub struct Discrete {
    atoms: Vec<(f64, f64)>,
}

impl Discrete {
    /// Weights must be positive and sum to 1 within 1e-9; they are then
    /// normalized exactly.
    pub fn new(mut atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidData("discrete measure needs atoms".into()));
        }
        for &(x, w) in &atoms {
            if !x.is_finite() || !(w > 0.0) || !w.is_finite() {
                return Err(Error::InvalidData(format!("bad atom {x} with weight {w}")));
            }
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidData(format!("atom weights sum to {total}, expected 1")));
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for (x, w) in atoms {
            match merged.last_mut() {
                Some(last) if last.0 == x => last.1 += w,
                _ => merged.push((x, w)),
            }
        }
        for a in &mut merged {
            a.1 /= total;
        }
        Ok(Self { atoms: merged })
    }

    pub fn point(x: f64) -> Result<Self> {
        Self::new(vec![(x, 1.0)])
    }

    /// Equal weights on the given values.
    pub fn uniform(values: &[f64]) -> Result<Self> {
        let w = 1.0 / values.len().max(1) as f64;
        Self::new(values.iter().map(|&x| (x, w)).collect())
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn m_dm(&self, z: Complex64) -> (Complex64, Complex64) {
        let mut m = Complex64::new(0.0, 0.0);
        let mut dm = Complex64::new(0.0, 0.0);
        for &(a, w) in &self.atoms {
            let r = 1.0 / (a - z);
            m += w * r;
            dm += w * r * r;
        }
        (m, dm)
    }

    pub fn tail_mass(&self, x: f64) -> f64 {
        self.atoms.iter().filter(|a| a.0 > x).map(|a| a.1).sum()
    }

    /// Reads `value,weight` rows; a single column gets equal weights.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let rows = read_numeric_rows(input)?;
        if rows.is_empty() {
            return Err(Error::Parse("atom file has no rows".into()));
        }
        match rows[0].len() {
            1 => Self::uniform(&rows.iter().map(|r| r[0]).collect::<Vec<_>>()),
            2 => Self::new(rows.iter().map(|r| (r[0], r[1])).collect()),
            k => Err(Error::Parse(format!("atom file needs 1 or 2 columns, got {k}"))),
        }
    }
}

/// Continuous density sampled on an increasing grid, linear between nodes,
/// plus optional atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    x: Vec<f64>,
    density: Vec<f64>,
    atoms: Vec<(f64, f64)>,
}

/// Tolerance on total mass for grid measures.
pub const GRID_MASS_TOL: f64 = 1e-6;

impl GridDensity {
    pub fn new(x: Vec<f64>, density: Vec<f64>, atoms: Vec<(f64, f64)>) -> Result<Self> {
        if x.len() < 2 || x.len() != density.len() {
            return Err(Error::InvalidData(format!(
                "grid needs at least 2 nodes and matching lengths ({} vs {})",
                x.len(),
                density.len()
            )));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("grid must be finite and strictly increasing".into()));
        }
        if density.iter().any(|d| !(*d >= 0.0) || !d.is_finite()) {
            return Err(Error::InvalidData("density must be finite and nonnegative".into()));
        }
        if atoms.iter().any(|&(a, w)| !a.is_finite() || !(w > 0.0)) {
            return Err(Error::InvalidData("atoms need finite locations and positive mass".into()));
        }
        let g = Self { x, density, atoms };
        let total = g.continuous_mass() + g.atom_mass();
        if (total - 1.0).abs() > GRID_MASS_TOL {
            return Err(Error::InvalidData(format!("grid measure has total mass {total}")));
        }
        Ok(g)
    }

    pub fn grid(&self) -> &[f64] {
        &self.x
    }

    pub fn values(&self) -> &[f64] {
        &self.density
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn atom_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum()
    }

    /// Trapezoid mass of the continuous part.
    pub fn continuous_mass(&self) -> f64 {
        trapezoid(&self.x, &self.density)
    }

    pub fn support(&self) -> (f64, f64) {
        let lo = self.atoms.iter().map(|a| a.0).fold(self.x[0], f64::min);
        let hi = self.atoms.iter().map(|a| a.0).fold(self.x[self.x.len() - 1], f64::max);
        (lo, hi)
    }

    pub fn density(&self, t: f64) -> f64 {
        let n = self.x.len();
        if t < self.x[0] || t > self.x[n - 1] {
            return 0.0;
        }
        let k = self.x.partition_point(|&v| v <= t).clamp(1, n - 1);
        let (x0, x1) = (self.x[k - 1], self.x[k]);
        let s = (t - x0) / (x1 - x0);
        self.density[k - 1] * (1.0 - s) + self.density[k] * s
    }

    /// Exact Stieltjes transform of the piecewise-linear density plus atoms,
    /// with its derivative.
    pub fn m_dm(&self, z: Complex64) -> (Complex64, Complex64) {
        let mut m = Complex64::new(0.0, 0.0);
        let mut dm = Complex64::new(0.0, 0.0);
        for k in 1..self.x.len() {
            let (x0, x1) = (self.x[k - 1], self.x[k]);
            let (r0, r1) = (self.density[k - 1], self.density[k]);
            if r0 == 0.0 && r1 == 0.0 {
                continue;
            }
            let s = (r1 - r0) / (x1 - x0);
            let coef = r0 + s * (z - x0);
            let log = ((x1 - z) / (x0 - z)).ln();
            m += coef * log + s * (x1 - x0);
            dm += s * log + coef * (1.0 / (x0 - z) - 1.0 / (x1 - z));
        }
        for &(a, w) in &self.atoms {
            let r = 1.0 / (a - z);
            m += w * r;
            dm += w * r * r;
        }
        (m, dm)
    }

    /// `μ((t, ∞))` integrating the linear pieces exactly.
    pub fn tail_mass(&self, t: f64) -> f64 {
        let atoms: f64 = self.atoms.iter().filter(|a| a.0 > t).map(|a| a.1).sum();
        let mut cont = 0.0;
        for k in (1..self.x.len()).rev() {
            let (x0, x1) = (self.x[k - 1], self.x[k]);
            if x1 <= t {
                break;
            }
            let (r0, r1) = (self.density[k - 1], self.density[k]);
            if x0 >= t {
                cont += 0.5 * (r0 + r1) * (x1 - x0);
            } else {
                let rt = r0 + (r1 - r0) * (t - x0) / (x1 - x0);
                cont += 0.5 * (rt + r1) * (x1 - t);
            }
        }
        atoms + cont
    }

    /// `x,density` CSV.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_table(
            out,
            &["x", "density"],
            self.x
                .iter()
                .zip(&self.density)
                .map(|(x, d)| [fmt_f64(*x), fmt_f64(*d)]),
        )
    }

    /// Reads `x,density` rows (an optional header line is skipped). Atoms are
    /// not part of the format.
    pub fn read_csv<R: Read>(mut input: R) -> Result<Self> {
        let mut text = String::new();
        input.read_to_string(&mut text)?;
        let body = match text.lines().next() {
            Some(first) if first.trim_start().starts_with(|c: char| c.is_alphabetic()) => {
                text.split_once('\n').map_or("", |(_, rest)| rest)
            }
            _ => &text,
        };
        let rows = read_numeric_rows(body.as_bytes())?;
        if rows.iter().any(|r| r.len() != 2) {
            return Err(Error::Parse("grid file needs exactly 2 columns (x,density)".into()));
        }
        Self::new(
            rows.iter().map(|r| r[0]).collect(),
            rows.iter().map(|r| r[1]).collect(),
            Vec::new(),
        )
    }
}

pub(crate) fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| 0.5 * (ys[0] + ys[1]) * (xs[1] - xs[0]))
        .sum()
}
