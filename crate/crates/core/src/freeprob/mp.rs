//! Marchenko–Pastur law with aspect ratio `c = n/p`, scale `σ²` and shift.
//!
//! The unit law (`σ² = 1`, no shift) has an atom of mass `(1 − 1/c)₊` at 0
//! and density `√((λ₊ − x)(x − λ₋)) / (2πcx)` on `[λ₋, λ₊]`,
//! `λ± = (1 ± √c)²`. Its Stieltjes transform solves
//! `c z m² + (z + c − 1) m + 1 = 0`.

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;

use super::quad::adaptive_simpson;
use crate::error::{Error, Result};

const TAIL_PANELS: usize = 256;

#[derive(Debug, Clone)]
pub struct MpLaw {
    c: f64,
    sigma2: f64,
    shift: f64,
    /// `tail[k]` = continuous unit-law mass over panels `k..` in θ.
    tail: OnceLock<Arc<Vec<f64>>>,
}

impl PartialEq for MpLaw {
    fn eq(&self, other: &Self) -> bool {
        self.c == other.c && self.sigma2 == other.sigma2 && self.shift == other.shift
    }
}

impl MpLaw {
    pub fn new(c: f64, sigma2: f64, shift: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidData(format!("MP aspect ratio must be positive, got {c}")));
        }
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::InvalidData(format!("MP scale must be positive, got {sigma2}")));
        }
        if !shift.is_finite() {
            return Err(Error::InvalidData(format!("MP shift must be finite, got {shift}")));
        }
        Ok(Self {
            c,
            sigma2,
            shift,
            tail: OnceLock::new(),
        })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    fn unit_edges(&self) -> (f64, f64) {
        let r = self.c.sqrt();
        ((1.0 - r).powi(2), (1.0 + r).powi(2))
    }

    /// Edges of the continuous part.
    pub fn edges(&self) -> (f64, f64) {
        let (a, b) = self.unit_edges();
        (self.shift + self.sigma2 * a, self.shift + self.sigma2 * b)
    }

    pub fn atom_mass(&self) -> f64 {
        (1.0 - 1.0 / self.c).max(0.0)
    }

    pub fn continuous_mass(&self) -> f64 {
        1.0 - self.atom_mass()
    }

    pub fn atoms(&self) -> Vec<(f64, f64)> {
        let w = self.atom_mass();
        if w > 0.0 {
            vec![(self.shift, w)]
        } else {
            Vec::new()
        }
    }

    pub fn mean(&self) -> f64 {
        self.shift + self.sigma2
    }

    pub fn density(&self, x: f64) -> f64 {
        let u = (x - self.shift) / self.sigma2;
        let (a, b) = self.unit_edges();
        if u <= a || u >= b || u <= 0.0 {
            return 0.0;
        }
        ((b - u) * (u - a)).sqrt() / (2.0 * PI * self.c * u) / self.sigma2
    }

    /// Unit-law Stieltjes transform, valid on ℂ minus the support.
    fn unit_m(&self, z: Complex64) -> Complex64 {
        let c = self.c;
        let (lm, lp) = self.unit_edges();
        let b = z + (c - 1.0);
        let r = (z - lp).sqrt() * (z - lm).sqrt();
        let plus = -b + r;
        let minus = -b - r;
        // The root with m ~ −1/z at infinity is `plus/(2cz)`; the product of
        // the roots is 1/(cz), which gives the cancellation-free `2/minus`.
        if plus.norm() >= minus.norm() {
            plus / (2.0 * c * z)
        } else {
            2.0 / minus
        }
    }

    fn unit_dm(&self, z: Complex64, m: Complex64) -> Complex64 {
        let c = self.c;
        -(c * m * m + m) / (2.0 * c * z * m + z + (c - 1.0))
    }

    /// True when `z` is real and inside the closed support.
    pub fn on_support(&self, z: Complex64) -> bool {
        if z.im != 0.0 {
            return false;
        }
        let (a, b) = self.edges();
        (z.re >= a && z.re <= b) || (self.atom_mass() > 0.0 && z.re == self.shift)
    }

    pub fn m(&self, z: Complex64) -> Complex64 {
        let u = (z - self.shift) / self.sigma2;
        self.unit_m(u) / self.sigma2
    }

    /// `(m, m′)` at `z`.
    pub fn m_dm(&self, z: Complex64) -> (Complex64, Complex64) {
        let u = (z - self.shift) / self.sigma2;
        let m1 = self.unit_m(u);
        let d1 = self.unit_dm(u, m1);
        (m1 / self.sigma2, d1 / (self.sigma2 * self.sigma2))
    }

    /// Residual of the self-consistent equation `m + 1/(z − 1 + c + zcm)`
    /// in unit coordinates.
    pub fn self_consistent_residual(&self, z: Complex64) -> f64 {
        let u = (z - self.shift) / self.sigma2;
        let m = self.unit_m(u);
        (m + 1.0 / (u - 1.0 + self.c + u * self.c * m)).norm()
    }

    fn theta_integrand(&self, theta: f64) -> f64 {
        let (a, b) = self.unit_edges();
        let (s, k) = (0.5 * theta).sin_cos();
        let s2 = s * s;
        let w = b - a;
        // (b−a)s² / x(θ); equals 1 identically when the lower edge is 0
        let ratio = if a == 0.0 { 1.0 } else { w * s2 / (a + w * s2) };
        w * k * k * ratio / (2.0 * PI * self.c)
    }

    fn tail_table(&self) -> &[f64] {
        self.tail.get_or_init(|| {
            let h = PI / TAIL_PANELS as f64;
            let mut tail = vec![0.0; TAIL_PANELS + 1];
            for k in (0..TAIL_PANELS).rev() {
                let lo = k as f64 * h;
                tail[k] = tail[k + 1]
                    + adaptive_simpson(|t| self.theta_integrand(t), lo, lo + h, 1e-16);
            }
            Arc::new(tail)
        })
    }

    /// `μ((x, ∞))`.
    pub fn tail_mass(&self, x: f64) -> f64 {
        let (a, b) = self.unit_edges();
        let u = (x - self.shift) / self.sigma2;
        let atom = if u < 0.0 { self.atom_mass() } else { 0.0 };
        if u >= b {
            return 0.0;
        }
        if u <= a {
            return atom + self.continuous_mass();
        }
        let s = ((u - a) / (b - a)).clamp(0.0, 1.0).sqrt();
        let theta = 2.0 * s.asin();
        let h = PI / TAIL_PANELS as f64;
        let k = ((theta / h) as usize).min(TAIL_PANELS - 1);
        let table = self.tail_table();
        let partial = adaptive_simpson(|t| self.theta_integrand(t), theta, (k + 1) as f64 * h, 1e-16);
        atom + (table[k + 1] + partial).min(self.continuous_mass())
    }
}
