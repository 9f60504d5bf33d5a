//! Spectral measures, their transforms, free convolutions by subordination,
//! Stieltjes inversion and typical locations.

mod grid;
mod inversion;
mod mp;
pub(crate) mod quad;
mod quantile;
mod subordination;
mod transforms;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::kernelgraph::KernelFn;

pub use grid::{Discrete, GridDensity, GRID_MASS_TOL};
pub use inversion::{invert_to_density, InvertedDensity, DENSITY_FLOOR, GRID_POINTS};
pub use mp::MpLaw;
pub use quantile::{
    kolmogorov_distance, sigma_matrices, typical_location, typical_locations, TypicalLocation,
};
pub use subordination::{
    free_add_convolve, free_mult_convolve, ConvolutionSolver, FreeAddConv, FreeMultConv,
    SolverOptions, SubordinationResult,
};
pub use transforms::{
    eta_transform, m_transform, r_transform, s_transform, transforms, StieltjesTransform,
    TransformRecord,
};

/// A probability measure on ℝ.
#[derive(Debug, Clone, PartialEq)]
pub enum SpectralMeasure {
    Mp(MpLaw),
    Discrete(Discrete),
    Grid(GridDensity),
}

impl SpectralMeasure {
    pub fn mp(c: f64, sigma2: f64, shift: f64) -> Result<Self> {
        Ok(Self::Mp(MpLaw::new(c, sigma2, shift)?))
    }

    pub fn point(x: f64) -> Result<Self> {
        Ok(Self::Discrete(Discrete::point(x)?))
    }

    pub fn discrete(atoms: Vec<(f64, f64)>) -> Result<Self> {
        Ok(Self::Discrete(Discrete::new(atoms)?))
    }

    /// `ν = T_ς MP(n/p, −2f′(2))`, the limiting law of the linearized kernel
    /// matrix `−2f′(2) XᵀX + ςI`.
    pub fn kernel_law(kernel: &KernelFn, n: usize, p: usize) -> Result<Self> {
        if n == 0 || p == 0 {
            return Err(Error::Dimension(format!("need positive n, p; got n={n}, p={p}")));
        }
        Self::mp(n as f64 / p as f64, kernel.gram_scale(), kernel.varsigma())
    }

    /// Smallest closed interval containing the support, atoms included.
    pub fn hull(&self) -> (f64, f64) {
        match self {
            Self::Mp(m) => {
                let (a, b) = m.edges();
                if m.atom_mass() > 0.0 {
                    (a.min(m.shift()), b)
                } else {
                    (a, b)
                }
            }
            Self::Discrete(d) => (d.atoms()[0].0, d.atoms()[d.atoms().len() - 1].0),
            Self::Grid(g) => g.support(),
        }
    }

    pub fn atoms(&self) -> Vec<(f64, f64)> {
        match self {
            Self::Mp(m) => m.atoms(),
            Self::Discrete(d) => d.atoms().to_vec(),
            Self::Grid(g) => g.atoms().to_vec(),
        }
    }

    pub fn mass_at(&self, x: f64) -> f64 {
        self.atoms().iter().filter(|a| a.0 == x).map(|a| a.1).sum()
    }

    /// `μ((x, ∞))`.
    pub fn tail_mass(&self, x: f64) -> f64 {
        match self {
            Self::Mp(m) => m.tail_mass(x),
            Self::Discrete(d) => d.tail_mass(x),
            Self::Grid(g) => g.tail_mass(x),
        }
    }

    /// `μ((−∞, x])`.
    pub fn cdf(&self, x: f64) -> f64 {
        (1.0 - self.tail_mass(x)).clamp(0.0, 1.0)
    }

    /// Density of the continuous part, zero for discrete measures.
    pub fn density(&self, x: f64) -> f64 {
        match self {
            Self::Mp(m) => m.density(x),
            Self::Discrete(_) => 0.0,
            Self::Grid(g) => g.density(x),
        }
    }

    /// True when `z` is real and lies where the transform has a cut or pole.
    pub fn on_support(&self, z: Complex64) -> bool {
        if z.im != 0.0 {
            return false;
        }
        match self {
            Self::Mp(m) => m.on_support(z),
            Self::Discrete(d) => d.atoms().iter().any(|a| a.0 == z.re),
            Self::Grid(g) => {
                let x = g.grid();
                (z.re >= x[0] && z.re <= x[x.len() - 1]) || g.atoms().iter().any(|a| a.0 == z.re)
            }
        }
    }

    /// `(m, m′)` without domain checks.
    pub(crate) fn m_dm_raw(&self, z: Complex64) -> (Complex64, Complex64) {
        match self {
            Self::Mp(m) => m.m_dm(z),
            Self::Discrete(d) => d.m_dm(z),
            Self::Grid(g) => g.m_dm(z),
        }
    }

    /// Stieltjes transform on the upper half-plane.
    pub fn stieltjes(&self, z: Complex64) -> Result<Complex64> {
        if !(z.im > 0.0) {
            return Err(Error::Domain(format!("Im z must be positive, got {z}")));
        }
        Ok(self.m_dm_raw(z).0)
    }

    /// Stieltjes transform and its derivative anywhere off the support,
    /// including the real line outside it.
    pub fn stieltjes_with_derivative(&self, z: Complex64) -> Result<(Complex64, Complex64)> {
        if !(z.re.is_finite() && z.im.is_finite()) || self.on_support(z) {
            return Err(Error::Domain(format!("{z} is on the support")));
        }
        Ok(self.m_dm_raw(z))
    }

    pub fn mean(&self) -> f64 {
        match self {
            Self::Mp(m) => m.mean(),
            Self::Discrete(d) => d.atoms().iter().map(|(x, w)| x * w).sum(),
            Self::Grid(g) => {
                let x = g.grid();
                let y = g.values();
                let cont: f64 = x
                    .windows(2)
                    .zip(y.windows(2))
                    .map(|(xs, ys)| {
                        let h = xs[1] - xs[0];
                        h / 6.0 * (ys[0] * (2.0 * xs[0] + xs[1]) + ys[1] * (xs[0] + 2.0 * xs[1]))
                    })
                    .sum();
                cont + g.atoms().iter().map(|(x, w)| x * w).sum::<f64>()
            }
        }
    }
}

impl StieltjesTransform for SpectralMeasure {
    fn m_off_support(&self, z: Complex64) -> Result<Complex64> {
        Ok(self.stieltjes_with_derivative(z)?.0)
    }

    fn hull(&self) -> (f64, f64) {
        SpectralMeasure::hull(self)
    }

    fn mass_at_zero(&self) -> f64 {
        self.mass_at(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn point_mass_stieltjes() {
        let d = SpectralMeasure::point(2.5).unwrap();
        let z = c(1.0, 0.5);
        assert!((d.stieltjes(z).unwrap() - 1.0 / (2.5 - z)).norm() < 1e-15);
        assert!(matches!(d.stieltjes(c(1.0, 0.0)), Err(Error::Domain(_))));
    }

    #[test]
    fn trivial_bound_and_half_plane() {
        let measures = [
            SpectralMeasure::mp(1.0, 1.0, 0.0).unwrap(),
            SpectralMeasure::mp(3.0, 0.5, 0.2).unwrap(),
            SpectralMeasure::discrete(vec![(0.0, 0.5), (1.0, 0.5)]).unwrap(),
        ];
        for mu in &measures {
            for eta in [1e-4, 0.1, 2.0] {
                for x in [-1.0, 0.0, 0.5, 2.0, 7.0] {
                    let m = mu.stieltjes(c(x, eta)).unwrap();
                    assert!(m.im > 0.0);
                    assert!(m.norm() <= (1.0 + 1e-12) / eta);
                }
            }
        }
    }

    #[test]
    fn shift_property() {
        let base = SpectralMeasure::mp(0.5, 2.0, 0.0).unwrap();
        let shifted = SpectralMeasure::mp(0.5, 2.0, 1.25).unwrap();
        let z = c(3.0, 0.3);
        let diff = shifted.stieltjes(z).unwrap() - base.stieltjes(z - 1.25).unwrap();
        assert!(diff.norm() < 1e-14);
    }

    #[test]
    fn kernel_law_edges() {
        let k = KernelFn::gaussian(1.0).unwrap();
        let nu = SpectralMeasure::kernel_law(&k, 500, 500).unwrap();
        let (lo, hi) = nu.hull();
        assert!((lo - k.varsigma()).abs() < 1e-15);
        assert!((hi - (k.varsigma() + 4.0 * (-1.0f64).exp())).abs() < 1e-15);
        assert!((hi - 1.7357589).abs() < 1e-7);
    }

    #[test]
    fn means() {
        let mu = SpectralMeasure::mp(0.4, 1.5, 0.1).unwrap();
        assert!((mu.mean() - 1.6).abs() < 1e-15);
        let g = SpectralMeasure::Grid(
            GridDensity::new(vec![0.0, 1.0, 2.0], vec![0.5, 0.5, 0.5], Vec::new()).unwrap(),
        );
        assert!((g.mean() - 1.0).abs() < 1e-15);
    }
}
