//! Density recovery `ρ(x) = Im m(x + iη)/π` for a convolution, on a fixed
//! grid, with Richardson extrapolation in `η`.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::grid::{trapezoid, GridDensity};
use super::subordination::ConvolutionSolver;
use crate::error::{Error, Result};

pub const GRID_POINTS: usize = 2048;
/// Density level that marks a support edge.
pub const DENSITY_FLOOR: f64 = 1e-6;

type Pair = (Complex64, Complex64);

#[derive(Debug, Clone)]
pub struct InvertedDensity {
    pub density: GridDensity,
    /// Outermost points where the density exceeds [`DENSITY_FLOOR`].
    pub edges: (f64, f64),
    /// Factor applied to the continuous part to restore its mass.
    pub renormalization: f64,
}

struct Marcher<'a, C: ?Sized> {
    conv: &'a C,
    atoms: Vec<(f64, f64)>,
    eta: f64,
    eta0: f64,
}

impl<C: ConvolutionSolver + ?Sized> Marcher<'_, C> {
    /// Continuous-part density at `x` and heights `η` and `η/2`, descending
    /// from `η₀` with warm starts. Returns the `η₀` solution for reuse.
    fn raw_pair(&self, x: f64, start: Option<Pair>) -> Result<((f64, f64), Pair)> {
        let top = self.conv.solve(Complex64::new(x, self.eta0), start)?;
        let anchor = (top.omega_a, top.omega_b);
        let mut guess = anchor;
        let mut h = self.eta0;
        while h > self.eta {
            h = (h / 4.0).max(self.eta);
            guess = self.step(x, h, guess)?.1;
        }
        let (rho1, g1) = self.step(x, self.eta, guess)?;
        let (rho2, _) = self.step(x, 0.5 * self.eta, g1)?;
        Ok(((rho1, rho2), anchor))
    }

    fn step(&self, x: f64, h: f64, guess: Pair) -> Result<(f64, Pair)> {
        let z = Complex64::new(x, h);
        let r = self.conv.solve(z, Some(guess))?;
        let atoms: f64 = self
            .atoms
            .iter()
            .map(|&(a, w)| w * (1.0 / (a - z)).im)
            .sum();
        Ok(((r.m_conv.im - atoms) / PI, (r.omega_a, r.omega_b)))
    }

    fn density(&self, x: f64, start: Option<Pair>) -> Result<(f64, Pair)> {
        let ((r1, r2), anchor) = self.raw_pair(x, start)?;
        Ok(((2.0 * r2 - r1).max(0.0), anchor))
    }
}

/// Evaluates the convolution density on a [`GRID_POINTS`]-point grid over
/// `bracket`, clips negatives, renormalizes the continuous part to
/// `1 − atom mass` and locates the support edges.
pub fn invert_to_density<C: ConvolutionSolver + ?Sized>(
    conv: &C,
    bracket: (f64, f64),
    eta: f64,
) -> Result<InvertedDensity> {
    let (lo, hi) = bracket;
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidData(format!("bad bracket [{lo}, {hi}]")));
    }
    if !(1e-7..=1e-3).contains(&eta) {
        return Err(Error::InvalidData(format!("eta must lie in [1e-7, 1e-3], got {eta}")));
    }
    let atoms = conv.atoms();
    let atom_mass: f64 = atoms.iter().map(|a| a.1).sum();
    let width = hi - lo;
    let marcher = Marcher {
        conv,
        atoms: atoms.clone(),
        eta,
        eta0: (1e-2 * width).max(eta),
    };
    let x: Vec<f64> = (0..GRID_POINTS)
        .map(|k| lo + width * k as f64 / (GRID_POINTS - 1) as f64)
        .collect();
    let mut rho = vec![0.0; GRID_POINTS];
    // march right to left so each η₀ solve starts next to a converged one
    let mut anchor = None;
    for k in (0..GRID_POINTS).rev() {
        let (r, a) = marcher.density(x[k], anchor)?;
        rho[k] = r;
        anchor = Some(a);
    }
    let target = 1.0 - atom_mass;
    if target <= 1e-12 {
        let density = GridDensity::new(x, vec![0.0; GRID_POINTS], atoms)?;
        let (a, b) = density.support();
        return Ok(InvertedDensity {
            density,
            edges: (a, b),
            renormalization: 1.0,
        });
    }
    let mass = trapezoid(&x, &rho);
    let factor = target / mass;
    log::info!("density inversion: continuous mass {mass:.8}, renormalization factor {factor:.8}");
    if !(0.99..=1.01).contains(&factor) {
        return Err(Error::InversionQuality { factor });
    }
    for r in &mut rho {
        *r *= factor;
    }
    let first = rho.iter().position(|&r| r > DENSITY_FLOOR);
    let last = rho.iter().rposition(|&r| r > DENSITY_FLOOR);
    let (Some(first), Some(last)) = (first, last) else {
        return Err(Error::InversionQuality { factor });
    };
    let refine = |inside: usize, outside: Option<usize>| -> Result<f64> {
        let Some(out) = outside else {
            return Ok(x[inside]);
        };
        let (mut a, mut b) = (x[out], x[inside]);
        for _ in 0..40 {
            let mid = 0.5 * (a + b);
            if marcher.density(mid, None)?.0 * factor > DENSITY_FLOOR {
                b = mid;
            } else {
                a = mid;
            }
        }
        Ok(b)
    };
    let lower = refine(first, first.checked_sub(1))?;
    let upper = refine(last, (last + 1 < GRID_POINTS).then_some(last + 1))?;
    let density = GridDensity::new(x, rho, atoms)?;
    Ok(InvertedDensity {
        density,
        edges: (lower, upper),
        renormalization: factor,
    })
}
