//! Typical locations (upper-tail quantiles) and quantile-based diagonals.

use serde::Serialize;

use super::SpectralMeasure;
use crate::error::{Error, Result};
use crate::spectra::EmpiricalMeasure;

/// `γ(j) = sup{x : μ((x, ∞)) ≥ (j − ½)/n}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TypicalLocation {
    pub value: f64,
    /// Set when `γ(j)` is the upper end of a region carrying no mass and is
    /// not an atom.
    pub in_gap: bool,
}

const MASS_TOL: f64 = 1e-10;

pub fn typical_location(mu: &SpectralMeasure, j: usize, n: usize) -> Result<TypicalLocation> {
    if n == 0 || j == 0 || j > n {
        return Err(Error::Dimension(format!("typical location needs 1 <= j <= n, got j={j}, n={n}")));
    }
    let target = (j as f64 - 0.5) / n as f64;
    let (a, b) = mu.hull();
    let pad = 1e-9 * (1.0 + a.abs().max(b.abs()));
    // invariant: tail(lo) ≥ target > tail(hi)
    let (mut lo, mut hi) = (a - pad, b + pad);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= 1e-15 * (1.0 + mid.abs()) {
            break;
        }
        if mu.tail_mass(mid) >= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let value = 0.5 * (lo + hi);
    let delta = 1e-8 * (1.0 + value.abs());
    let carried = mu.tail_mass(value - delta) - mu.tail_mass(value + delta);
    let in_gap = carried <= MASS_TOL && value > a + delta && mu.mass_at(value) == 0.0;
    Ok(TypicalLocation { value, in_gap })
}

/// `γ(1), …, γ(k)` for a given `n`.
pub fn typical_locations(mu: &SpectralMeasure, k: usize, n: usize) -> Result<Vec<f64>> {
    (1..=k)
        .map(|j| {
            let t = typical_location(mu, j, n)?;
            if t.in_gap {
                log::debug!("typical location {j}/{n} at {} sits on a gap edge", t.value);
            }
            Ok(t.value)
        })
        .collect()
}

fn sigma_diagonal(nu: &SpectralMeasure, n: usize, p: usize, varsigma: f64) -> Result<Vec<f64>> {
    let k = n.min(p);
    let mut diag = typical_locations(nu, k, n)?;
    diag.resize(n, varsigma);
    Ok(diag)
}

/// Diagonals of `Σ_x` and `Σ_y`: the first `min(n, p)` typical locations of
/// each law, padded with `ς` up to length `n`.
pub fn sigma_matrices(
    nu_x: &SpectralMeasure,
    nu_y: &SpectralMeasure,
    n: usize,
    p1: usize,
    p2: usize,
    varsigma: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    Ok((
        sigma_diagonal(nu_x, n, p1, varsigma)?,
        sigma_diagonal(nu_y, n, p2, varsigma)?,
    ))
}

/// `sup_x |F_emp(x) − F_μ(x)|`, checked on both sides of every atom.
pub fn kolmogorov_distance(emp: &EmpiricalMeasure, mu: &SpectralMeasure) -> f64 {
    let mut atoms = emp.atoms().to_vec();
    atoms.dedup();
    atoms
        .iter()
        .map(|&x| {
            let f = mu.cdf(x);
            let f_left = f - mu.mass_at(x);
            (emp.cdf(x) - f).abs().max((emp.cdf_left(x) - f_left).abs())
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::super::GridDensity;
    use super::*;
    use crate::kernelgraph::KernelFn;

    #[test]
    fn uniform_quantile() {
        let x: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        let mu = SpectralMeasure::Grid(GridDensity::new(x, vec![1.0; 11], Vec::new()).unwrap());
        let t = typical_location(&mu, 1, 10).unwrap();
        assert!((t.value - 0.95).abs() < 1e-10);
        assert!(!t.in_gap);
    }

    #[test]
    fn point_mass_quantile() {
        let mu = SpectralMeasure::point(2.5).unwrap();
        for j in [1, 3, 7] {
            assert!((typical_location(&mu, j, 7).unwrap().value - 2.5).abs() < 1e-12);
        }
        assert!(typical_location(&mu, 0, 7).is_err());
        assert!(typical_location(&mu, 8, 7).is_err());
    }

    #[test]
    fn gap_is_flagged() {
        // mass 1/2 on [0,1] and 1/2 on [2,3]; (j − ½)/n = ½ lands on the gap
        let x = vec![0.0, 1.0, 2.0, 3.0];
        let d = vec![1.0, 0.0, 0.0, 1.0];
        let mu = SpectralMeasure::Grid(GridDensity::new(x, d, Vec::new()).unwrap());
        let t = typical_location(&mu, 1, 1).unwrap();
        assert!(t.in_gap, "{t:?}");
        assert!((t.value - 2.0).abs() < 1e-6);
        assert!(!typical_location(&mu, 1, 4).unwrap().in_gap);
    }

    #[test]
    fn kernel_law_top_location() {
        let k = KernelFn::gaussian(1.0).unwrap();
        let nu = SpectralMeasure::kernel_law(&k, 500, 500).unwrap();
        let g = typical_location(&nu, 1, 500).unwrap().value;
        let edge = k.varsigma() + 4.0 * (-1.0f64).exp();
        // tail mass 1/1000 under the square-root edge sits 0.026 below it
        assert!(g < edge && g > edge - 0.03, "{g} vs {edge}");
        assert!((g - 1.7097953850372116).abs() < 1e-9, "{g}");
        let locs = typical_locations(&nu, 500, 500).unwrap();
        assert!(locs.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn sigma_padding() {
        let k = KernelFn::gaussian(1.0).unwrap();
        let nu = SpectralMeasure::kernel_law(&k, 40, 20).unwrap();
        let (sx, _) = sigma_matrices(&nu, &nu, 40, 20, 20, k.varsigma()).unwrap();
        assert_eq!(sx.len(), 40);
        assert!(sx[20..].iter().all(|&v| v == k.varsigma()));
        assert!(sx.iter().all(|&v| v >= k.varsigma() - 1e-10));
        let nu = SpectralMeasure::kernel_law(&k, 20, 40).unwrap();
        let (sx, _) = sigma_matrices(&nu, &nu, 20, 40, 40, k.varsigma()).unwrap();
        assert!(sx.windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn kolmogorov_of_exact_sample_is_small() {
        let mu = SpectralMeasure::mp(0.5, 1.0, 0.0).unwrap();
        let q = typical_locations(&mu, 400, 400).unwrap();
        let emp = EmpiricalMeasure::new(q).unwrap();
        let d = kolmogorov_distance(&emp, &mu);
        assert!(d <= 1.0 / 400.0 + 1e-9, "{d}");
    }
}
