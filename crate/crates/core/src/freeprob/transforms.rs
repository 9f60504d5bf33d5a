//! η-, M-, S- and R-transforms built on any Stieltjes transform.
//!
//! S and R are evaluated on real arguments only, by inverting η (resp. m) on
//! a real ray by bisection; no analytic continuation is attempted.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};

/// Something with a Stieltjes transform defined off its support.
pub trait StieltjesTransform: Sync {
    /// `m(z)` for `z` off the support, real `z` included.
    fn m_off_support(&self, z: Complex64) -> Result<Complex64>;

    /// Smallest interval containing the support.
    fn hull(&self) -> (f64, f64);

    fn mass_at_zero(&self) -> f64;
}

/// `η(z) = m(−1/z)/z = ∫ 1/(1 + zλ) dμ`.
pub fn eta_transform<T: StieltjesTransform + ?Sized>(mu: &T, z: Complex64) -> Result<Complex64> {
    if z == Complex64::new(0.0, 0.0) {
        return Ok(Complex64::new(1.0, 0.0));
    }
    Ok(mu.m_off_support(-1.0 / z)? / z)
}

/// `M(z) = z m(z) / (1 + z m(z))`.
pub fn m_transform<T: StieltjesTransform + ?Sized>(mu: &T, z: Complex64) -> Result<Complex64> {
    let zm = z * mu.m_off_support(z)?;
    Ok(zm / (1.0 + zm))
}

fn real_eta<T: StieltjesTransform + ?Sized>(mu: &T, t: f64) -> Result<f64> {
    Ok(eta_transform(mu, Complex64::new(t, 0.0))?.re)
}

/// Bisection on a monotone function of `log t` over `(0, ∞)`; `decreasing`
/// gives the direction. Returns `t` with `f(t) = target`.
fn invert_on_ray<F>(f: F, target: f64, decreasing: bool) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let above = |v: f64| if decreasing { v > target } else { v < target };
    let (mut lo, mut hi) = (0.0f64, 0.0f64);
    // expand a bracket [lo, hi] in log t with above(lo) and !above(hi)
    let mut found_lo = false;
    for k in 0..2100 {
        let s = -(k as f64) * 0.5;
        if above(f(s.exp())?) {
            lo = s;
            found_lo = true;
            break;
        }
    }
    let mut found_hi = false;
    for k in 0..2100 {
        let s = k as f64 * 0.5;
        if !above(f(s.exp())?) {
            hi = s;
            found_hi = true;
            break;
        }
    }
    if !found_lo || !found_hi {
        return Err(Error::TransformDomain(format!(
            "value {target} is not attained on the positive ray"
        )));
    }
    // lo ≤ hi by construction: both scans start at log t = 0
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if above(f(mid.exp())?) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

/// `S(u) = −(u + 1)/u · η⁻¹(u + 1)` for real `u ∈ (μ{0} − 1, 0)` and `μ`
/// supported on `[0, ∞)`.
pub fn s_transform<T: StieltjesTransform + ?Sized>(mu: &T, u: f64) -> Result<f64> {
    let (lo, _) = mu.hull();
    if lo < 0.0 {
        return Err(Error::TransformDomain(format!(
            "S-transform needs a measure on [0, inf), support starts at {lo}"
        )));
    }
    let floor = mu.mass_at_zero() - 1.0;
    if !(u > floor && u < 0.0) {
        return Err(Error::TransformDomain(format!(
            "S-transform argument {u} outside ({floor}, 0)"
        )));
    }
    let t = invert_on_ray(|t| real_eta(mu, t), 1.0 + u, true)?;
    Ok(-(u + 1.0) / u * t)
}

/// `R(z) = m⁻¹(−z) − 1/z` for real `z ≠ 0`, inverting `m` on the real ray to
/// the right of the support (`z > 0`) or to the left (`z < 0`).
pub fn r_transform<T: StieltjesTransform + ?Sized>(mu: &T, z: f64) -> Result<f64> {
    if z == 0.0 || !z.is_finite() {
        return Err(Error::TransformDomain(format!("R-transform needs real z != 0, got {z}")));
    }
    let (lo, hi) = mu.hull();
    let scale = 1.0 + lo.abs().max(hi.abs());
    let m_at = |w: f64| -> Result<f64> { Ok(mu.m_off_support(Complex64::new(w, 0.0))?.re) };
    let target = -z;
    let w = if z > 0.0 {
        // m(hi + d) is negative and increases to 0 as d grows
        let edge = hi + f64::EPSILON * scale;
        invert_on_ray(|d| m_at(edge + d * scale), target, false)
            .map(|d| edge + d * scale)
    } else {
        // m(lo − d) is positive and decreases to 0 as d grows
        let edge = lo - f64::EPSILON * scale;
        invert_on_ray(|d| m_at(edge - d * scale), target, true).map(|d| edge - d * scale)
    }?;
    Ok(w - 1.0 / z)
}

/// All transforms at one point. S and R are present only when `z` is real
/// and inside their domains.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TransformRecord {
    pub eta: Complex64,
    pub m: Complex64,
    pub s_at: Option<f64>,
    pub r_at: Option<f64>,
}

pub fn transforms<T: StieltjesTransform + ?Sized>(mu: &T, z: Complex64) -> Result<TransformRecord> {
    let eta = eta_transform(mu, z)?;
    let m = m_transform(mu, z)?;
    let (s_at, r_at) = if z.im == 0.0 {
        (s_transform(mu, z.re).ok(), r_transform(mu, z.re).ok())
    } else {
        (None, None)
    };
    Ok(TransformRecord { eta, m, s_at, r_at })
}

#[cfg(test)]
mod tests {
    use super::super::SpectralMeasure;
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn m_transform_of_point_mass() {
        let d = SpectralMeasure::point(3.0).unwrap();
        for z in [c(1.0, 1.0), c(-2.0, 0.0), c(0.5, -0.2)] {
            assert!((m_transform(&d, z).unwrap() - z / 3.0).norm() < 1e-14);
        }
    }

    #[test]
    fn eta_is_an_average() {
        let d = SpectralMeasure::discrete(vec![(1.0, 0.5), (3.0, 0.5)]).unwrap();
        let t = c(0.7, 0.0);
        let expect = 0.5 / (1.0 + 0.7) + 0.5 / (1.0 + 2.1);
        assert!((eta_transform(&d, t).unwrap().re - expect).abs() < 1e-15);
    }

    #[test]
    fn s_transform_of_mp() {
        for (cc, s2) in [(1.0, 1.0), (0.3, 1.0), (2.0, 1.0), (0.5, 2.5)] {
            let mu = SpectralMeasure::mp(cc, s2, 0.0).unwrap();
            for u in [-0.05, -0.3, -0.45] {
                if u <= mu.mass_at(0.0) - 1.0 {
                    continue;
                }
                let s = s_transform(&mu, u).unwrap();
                let expect = 1.0 / (s2 * (1.0 + cc * u));
                assert!((s - expect).abs() < 1e-10 * expect, "c={cc} u={u}: {s} vs {expect}");
            }
        }
    }

    #[test]
    fn s_transform_domain() {
        let mu = SpectralMeasure::mp(1.0, 1.0, -1.0).unwrap();
        assert!(matches!(s_transform(&mu, -0.5), Err(Error::TransformDomain(_))));
        let mu = SpectralMeasure::mp(1.0, 1.0, 0.0).unwrap();
        assert!(s_transform(&mu, 0.1).is_err());
        assert!(s_transform(&mu, -1.0).is_err());
    }

    #[test]
    fn r_transform_of_points() {
        let zero = SpectralMeasure::point(0.0).unwrap();
        let a = SpectralMeasure::point(2.0).unwrap();
        for z in [0.3, 1.0, -0.7] {
            assert!(r_transform(&zero, z).unwrap().abs() < 1e-12);
            assert!((r_transform(&a, z).unwrap() - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn r_transform_of_mp() {
        // R of the unit MP law is 1/(1 − cz) in this sign convention
        let mu = SpectralMeasure::mp(0.5, 1.0, 0.0).unwrap();
        for z in [0.2, -0.4] {
            let r = r_transform(&mu, z).unwrap();
            assert!((r - 1.0 / (1.0 - 0.5 * z)).abs() < 1e-10, "{z}: {r}");
        }
    }

    #[test]
    fn record_fills_real_point_only() {
        let mu = SpectralMeasure::mp(1.0, 1.0, 0.0).unwrap();
        let r = transforms(&mu, c(-0.2, 0.0)).unwrap();
        assert!(r.s_at.is_some());
        let r = transforms(&mu, c(-0.2, 0.1)).unwrap();
        assert!(r.s_at.is_none() && r.r_at.is_none());
    }
}
