//! The eigenvalue-ratio statistic `𝕋(L)`, its resampling calibration under
//! the null, the resulting test and power experiments.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::{fusion_from_clouds, FusionKind};
use crate::kernelgraph::KernelFn;
use crate::rngkit::{sample_alternative_pair, sample_gaussian_cloud, DataCloud, Purpose, SeedSpec};
use crate::spectra::Spectrum;

/// Two `θ(L)` values closer than this count as equal when picking `L*`.
pub const THETA_TIE_TOL: f64 = 1e-12;

/// Retries of replicate `b` use stream `RETRY_STREAM_BASE + b`, which no
/// first attempt ever touches.
pub const RETRY_STREAM_BASE: u64 = 1 << 63;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioStatistic {
    #[serde(rename = "L")]
    pub l: usize,
    pub value: f64,
    /// Which matrix the spectrum came from.
    pub source: String,
}

fn check_ratio_args(spec: &Spectrum, l: usize) -> Result<()> {
    if l < 3 {
        return Err(Error::InvalidData(format!("L must be at least 3, got {l}")));
    }
    if spec.len() < l + 1 {
        return Err(Error::Dimension(format!(
            "statistic at L={l} needs {} eigenvalues, spectrum has {}",
            l + 1,
            spec.len()
        )));
    }
    Ok(())
}

/// `|Re λᵢ / Re λᵢ₊₁|` for `i = 3..=l` (1-based), i.e. the ratio terms of
/// `𝕋(3), …, 𝕋(l)` before the running maximum.
fn ratio_terms(spec: &Spectrum, l: usize) -> Result<Vec<f64>> {
    check_ratio_args(spec, l)?;
    (3..=l)
        .map(|i| {
            let den = spec.eigenvalues[i].re;
            if den == 0.0 {
                return Err(Error::DegenerateSpectrum { index: i + 1 });
            }
            Ok((spec.eigenvalues[i - 1].re / den).abs())
        })
        .collect()
}

/// `𝕋(L) = max_{3≤i≤L} |Re λᵢ / Re λᵢ₊₁|` over the descending-real-part order.
pub fn ratio_statistic(spec: &Spectrum, l: usize, source: &str) -> Result<RatioStatistic> {
    let value = ratio_terms(spec, l)?.into_iter().fold(f64::NEG_INFINITY, f64::max);
    Ok(RatioStatistic {
        l,
        value,
        source: source.to_string(),
    })
}

/// `𝕋(3), …, 𝕋(l0)` in one pass.
pub fn ratio_profile(spec: &Spectrum, l0: usize) -> Result<Vec<f64>> {
    let mut run = f64::NEG_INFINITY;
    Ok(ratio_terms(spec, l0)?
        .into_iter()
        .map(|t| {
            run = run.max(t);
            run
        })
        .collect())
}

/// `|Im λᵢ| / |Re λᵢ|` for the first `k` eigenvalues; `∞` where `Re λᵢ = 0`.
pub fn imaginary_ratio_profile(spec: &Spectrum, k: usize) -> Result<Vec<f64>> {
    if k > spec.len() {
        return Err(Error::Dimension(format!(
            "asked for {k} ratios from a spectrum of length {}",
            spec.len()
        )));
    }
    Ok(spec.eigenvalues[..k]
        .iter()
        .map(|z| {
            if z.re == 0.0 {
                f64::INFINITY
            } else {
                z.im.abs() / z.re.abs()
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelInfo {
    pub name: String,
    pub sigma: Option<f64>,
}

impl KernelInfo {
    pub fn of(kernel: &KernelFn) -> Self {
        Self {
            name: kernel.name().to_string(),
            sigma: kernel.bandwidth(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaEntry {
    #[serde(rename = "L")]
    pub l: usize,
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTable {
    pub n: usize,
    pub p1: usize,
    pub p2: usize,
    pub alpha: f64,
    #[serde(rename = "L0")]
    pub l0: usize,
    #[serde(rename = "B")]
    pub b: usize,
    pub seed: u64,
    #[serde(rename = "theta_of_L")]
    pub theta_of_l: Vec<ThetaEntry>,
    pub theta_star: f64,
    #[serde(rename = "L_star")]
    pub l_star: usize,
    pub kernel: KernelInfo,
    pub statistic: FusionKind,
}

impl CalibrationTable {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn theta(&self, l: usize) -> Option<f64> {
        self.theta_of_l.iter().find(|e| e.l == l).map(|e| e.theta)
    }
}

/// Settings of one calibration run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationSpec {
    pub n: usize,
    pub p1: usize,
    pub p2: usize,
    pub alpha: f64,
    pub l0: usize,
    pub b: usize,
    pub statistic: FusionKind,
}

impl CalibrationSpec {
    pub fn new(n: usize, p1: usize, p2: usize, alpha: f64, l0: usize, b: usize) -> Self {
        Self {
            n,
            p1,
            p2,
            alpha,
            l0,
            b,
            statistic: FusionKind::Ncca,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.b < 100 {
            return Err(Error::InvalidData(format!("calibration needs B >= 100, got {}", self.b)));
        }
        if self.l0 < 3 {
            return Err(Error::InvalidData(format!("L0 must be at least 3, got {}", self.l0)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidData(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.n < self.l0 + 1 {
            return Err(Error::Dimension(format!(
                "n={} is too small for L0={}",
                self.n, self.l0
            )));
        }
        check_statistic(self.statistic)
    }
}

fn check_statistic(kind: FusionKind) -> Result<()> {
    match kind {
        FusionKind::Ncca | FusionKind::Ad => Ok(()),
        other => Err(Error::InvalidData(format!("{other} cannot serve as the test statistic"))),
    }
}

/// Which pair generator a replicate draws from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DrawModel {
    Null,
    Alternative,
}

/// Replicate `stream` of `model` at `(n, p1, p2)`.
pub fn draw_pair(
    model: DrawModel,
    n: usize,
    p1: usize,
    p2: usize,
    master: u64,
    stream: u64,
) -> Result<(DataCloud, DataCloud)> {
    match model {
        DrawModel::Null => Ok((
            sample_gaussian_cloud(n, p1, SeedSpec::new(master, stream, Purpose::XCloud))?,
            sample_gaussian_cloud(n, p2, SeedSpec::new(master, stream, Purpose::YCloud))?,
        )),
        DrawModel::Alternative => {
            sample_alternative_pair(n, p1, p2, SeedSpec::new(master, stream, Purpose::YCloud))
        }
    }
}

/// Spectrum of the unscaled fusion matrix; ratios do not see the `n²`.
pub fn statistic_spectrum(
    x: &DataCloud,
    y: &DataCloud,
    kernel: &KernelFn,
    kind: FusionKind,
) -> Result<Spectrum> {
    fusion_from_clouds(x, y, kernel, kind)?.spectrum()
}

/// Runs `f` on replicate `b`, retrying once on its reserved stream.
fn with_retry<T>(b: usize, f: impl Fn(u64) -> Result<T>) -> Result<T> {
    f(b as u64).or_else(|first| {
        log::warn!("replicate {b} failed ({first}); retrying on its reserved stream");
        f(RETRY_STREAM_BASE + b as u64)
    })
}

/// The `k`-th smallest value (1-based).
fn order_statistic(mut v: Vec<f64>, k: usize) -> f64 {
    v.sort_by(f64::total_cmp);
    v[k - 1]
}

/// Null replicates of `𝕋(3..=L0)`, indexed by replicate id.
pub fn null_profiles(spec: &CalibrationSpec, kernel: &KernelFn, seed: u64) -> Result<Vec<Vec<f64>>> {
    spec.validate()?;
    (0..spec.b)
        .into_par_iter()
        .map(|b| {
            with_retry(b, |stream| {
                let (x, y) = draw_pair(DrawModel::Null, spec.n, spec.p1, spec.p2, seed, stream)?;
                ratio_profile(&statistic_spectrum(&x, &y, kernel, spec.statistic)?, spec.l0)
            })
        })
        .collect()
}

/// Turns replicate profiles into `θ(L)`, `θ*` and `L*`.
pub fn table_from_profiles(
    spec: &CalibrationSpec,
    kernel: &KernelFn,
    seed: u64,
    profiles: &[Vec<f64>],
) -> Result<CalibrationTable> {
    spec.validate()?;
    if profiles.len() != spec.b || profiles.iter().any(|p| p.len() != spec.l0 - 2) {
        return Err(Error::Dimension("replicate profiles do not match the calibration settings".into()));
    }
    // smallest k with k ≥ αB, guarded against αB landing a hair above an integer
    let k = ((spec.alpha * spec.b as f64) - 1e-9).ceil().max(1.0) as usize;
    let theta_of_l: Vec<ThetaEntry> = (3..=spec.l0)
        .map(|l| ThetaEntry {
            l,
            theta: order_statistic(profiles.iter().map(|p| (p[l - 3] - 1.0).abs()).collect(), k),
        })
        .collect();
    let theta_star = theta_of_l.iter().map(|e| e.theta).fold(f64::NEG_INFINITY, f64::max);
    let l_star = theta_of_l
        .iter()
        .filter(|e| e.theta >= theta_star - THETA_TIE_TOL)
        .map(|e| e.l)
        .max()
        .expect("at least one L");
    Ok(CalibrationTable {
        n: spec.n,
        p1: spec.p1,
        p2: spec.p2,
        alpha: spec.alpha,
        l0: spec.l0,
        b: spec.b,
        seed,
        theta_of_l,
        theta_star,
        l_star,
        kernel: KernelInfo::of(kernel),
        statistic: spec.statistic,
    })
}

/// Monte-Carlo calibration of `(θ*, L*)` over `B` null replicates. Replicate
/// `b` uses stream `b` of `seed`, so the table does not depend on scheduling.
pub fn calibrate(spec: &CalibrationSpec, kernel: &KernelFn, seed: u64) -> Result<CalibrationTable> {
    let profiles = null_profiles(spec, kernel, seed)?;
    table_from_profiles(spec, kernel, seed, &profiles)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub statistic: RatioStatistic,
    pub reject: bool,
    pub theta_star: f64,
    #[serde(rename = "L_star")]
    pub l_star: usize,
    pub significance: f64,
}

fn check_calibration(x: &DataCloud, y: &DataCloud, kernel: &KernelFn, calib: &CalibrationTable) -> Result<()> {
    let got = (x.n(), x.p(), y.p());
    let want = (calib.n, calib.p1, calib.p2);
    if y.n() != x.n() || got != want {
        return Err(Error::CalibrationMismatch(format!(
            "data has (n, p1, p2) = {got:?} (y has n={}), calibration is for {want:?}",
            y.n()
        )));
    }
    if KernelInfo::of(kernel) != calib.kernel {
        return Err(Error::CalibrationMismatch(format!(
            "kernel {:?} differs from calibrated {:?}",
            KernelInfo::of(kernel),
            calib.kernel
        )));
    }
    Ok(())
}

/// Rejects independence iff `|𝕋(L*) − 1| > θ*`.
pub fn run_test(
    x: &DataCloud,
    y: &DataCloud,
    kernel: &KernelFn,
    calib: &CalibrationTable,
) -> Result<TestOutcome> {
    check_calibration(x, y, kernel, calib)?;
    let spec = statistic_spectrum(x, y, kernel, calib.statistic)?;
    let statistic = ratio_statistic(&spec, calib.l_star, calib.statistic.label())?;
    Ok(TestOutcome {
        reject: (statistic.value - 1.0).abs() > calib.theta_star,
        statistic,
        theta_star: calib.theta_star,
        l_star: calib.l_star,
        significance: 1.0 - calib.alpha,
    })
}

/// Rejection indicator of one replicate. A spectrum whose real parts vanish
/// where the statistic divides counts as a rejection: the null never
/// produces it.
fn replicate_rejects(
    model: DrawModel,
    calib: &CalibrationTable,
    kernel: &KernelFn,
    master: u64,
    stream: u64,
) -> Result<bool> {
    let (x, y) = draw_pair(model, calib.n, calib.p1, calib.p2, master, stream)?;
    match run_test(&x, &y, kernel, calib) {
        Ok(out) => Ok(out.reject),
        Err(Error::DegenerateSpectrum { .. }) => Ok(true),
        Err(e) => Err(e),
    }
}

/// Rejection count over `trials` fresh draws from `model`.
pub fn rejection_count(
    model: DrawModel,
    calib: &CalibrationTable,
    kernel: &KernelFn,
    trials: usize,
    master: u64,
) -> Result<usize> {
    let hits: Vec<bool> = (0..trials)
        .into_par_iter()
        .map(|b| with_retry(b, |stream| replicate_rejects(model, calib, kernel, master, stream)))
        .collect::<Result<_>>()?;
    Ok(hits.into_iter().filter(|&h| h).count())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerRow {
    pub n: usize,
    pub p1: usize,
    pub p2: usize,
    pub theta_star: f64,
    #[serde(rename = "L_star")]
    pub l_star: usize,
    pub rejections: usize,
    pub trials: usize,
    pub power: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerSpec {
    pub alpha: f64,
    pub l0: usize,
    pub b_calib: usize,
    pub b_power: usize,
    pub model: DrawModel,
    pub statistic: FusionKind,
}

/// For each `(n, p1, p2)`: calibrate on nulls, then count rejections over
/// `B_power` draws from `model`. Setting `k` calibrates with master seed
/// `derive(2k)` and measures with `derive(2k + 1)`.
pub fn power_curve(
    settings: &[(usize, usize, usize)],
    kernel: &KernelFn,
    spec: &PowerSpec,
    seed: SeedSpec,
) -> Result<Vec<PowerRow>> {
    if spec.b_power == 0 {
        return Err(Error::InvalidData("B_power must be positive".into()));
    }
    settings
        .iter()
        .enumerate()
        .map(|(k, &(n, p1, p2))| {
            if n == 0 || p1 == 0 || p2 == 0 {
                return Err(Error::Dimension(format!("setting {k} has a zero count")));
            }
            let mut cs = CalibrationSpec::new(n, p1, p2, spec.alpha, spec.l0, spec.b_calib);
            cs.statistic = spec.statistic;
            let calib_seed = seed.derive(2 * k as u64).master_seed;
            let calib = calibrate(&cs, kernel, calib_seed)?;
            let power_seed = seed.derive(2 * k as u64 + 1).master_seed;
            let rejections = rejection_count(spec.model, &calib, kernel, spec.b_power, power_seed)?;
            log::info!(
                "power at (n, p1, p2) = ({n}, {p1}, {p2}): {rejections}/{} (theta* = {:.4})",
                spec.b_power,
                calib.theta_star
            );
            Ok(PowerRow {
                n,
                p1,
                p2,
                theta_star: calib.theta_star,
                l_star: calib.l_star,
                rejections,
                trials: spec.b_power,
                power: rejections as f64 / spec.b_power as f64,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectra::spectrum_from_eigenvalues;
    use num_complex::Complex64;

    fn real_spectrum(re: &[f64]) -> Spectrum {
        let raw = re.iter().map(|&r| Complex64::new(r, 0.0)).collect();
        let t = re.iter().sum();
        let t2 = re.iter().map(|r| r * r).sum();
        spectrum_from_eigenvalues(raw, t, t2)
    }

    #[test]
    fn direct_evaluation() {
        let s = real_spectrum(&[5.0, 2.0, 2.0, 2.0, 1.0]);
        assert_eq!(ratio_statistic(&s, 4, "t").unwrap().value, 2.0);
        assert_eq!(ratio_profile(&s, 4).unwrap(), vec![1.0, 2.0]);
        let flat = real_spectrum(&[3.0; 8]);
        assert_eq!(ratio_statistic(&flat, 7, "t").unwrap().value, 1.0);
    }

    #[test]
    fn argument_contracts() {
        let s = real_spectrum(&[5.0, 2.0, 2.0, 2.0, 1.0]);
        assert!(ratio_statistic(&s, 2, "t").is_err());
        assert!(matches!(ratio_statistic(&s, 5, "t"), Err(Error::Dimension(_))));
        let z = real_spectrum(&[5.0, 2.0, 2.0, 0.0, -1.0]);
        assert!(matches!(
            ratio_statistic(&z, 3, "t"),
            Err(Error::DegenerateSpectrum { index: 4 })
        ));
    }

    #[test]
    fn imaginary_profile() {
        let s = real_spectrum(&[3.0, 2.0, 0.0]);
        assert_eq!(imaginary_ratio_profile(&s, 2).unwrap(), vec![0.0, 0.0]);
        assert_eq!(imaginary_ratio_profile(&s, 3).unwrap()[2], f64::INFINITY);
        let raw = vec![Complex64::new(2.0, 1.0), Complex64::new(2.0, -1.0)];
        let c = spectrum_from_eigenvalues(raw, 4.0, 6.0);
        assert_eq!(imaginary_ratio_profile(&c, 2).unwrap(), vec![0.5, 0.5]);
    }

    fn toy() -> (CalibrationSpec, KernelFn) {
        (CalibrationSpec::new(60, 30, 30, 0.9, 10, 100), KernelFn::gaussian(1.0).unwrap())
    }

    #[test]
    fn toy_table_is_well_formed() {
        let (spec, k) = toy();
        let t = calibrate(&spec, &k, 42).unwrap();
        assert_eq!(t.theta_of_l.len(), 8);
        let max = t.theta_of_l.iter().map(|e| e.theta).fold(0.0, f64::max);
        assert_eq!(t.theta_star, max);
        assert_eq!(t.theta(t.l_star), Some(t.theta_star));
        let back = CalibrationTable::from_json(&t.to_json().unwrap()).unwrap();
        assert_eq!(back, t);
        assert!(t.to_json().unwrap().contains("\"theta_of_L\""));
    }

    #[test]
    fn coverage_and_alpha_monotonicity() {
        let (spec, k) = toy();
        let profiles = null_profiles(&spec, &k, 7).unwrap();
        let lo = table_from_profiles(&CalibrationSpec { alpha: 0.8, ..spec }, &k, 7, &profiles).unwrap();
        let hi = table_from_profiles(&spec, &k, 7, &profiles).unwrap();
        for (a, b) in lo.theta_of_l.iter().zip(&hi.theta_of_l) {
            assert!(a.theta <= b.theta);
        }
        for e in &hi.theta_of_l {
            let covered = profiles.iter().filter(|p| (p[e.l - 3] - 1.0).abs() <= e.theta).count();
            assert!(covered >= 90, "L={} covers {covered}", e.l);
        }
    }

    #[test]
    fn invalid_specs() {
        let k = KernelFn::gaussian(1.0).unwrap();
        assert!(calibrate(&CalibrationSpec::new(60, 30, 30, 0.9, 10, 99), &k, 1).is_err());
        assert!(calibrate(&CalibrationSpec::new(60, 30, 30, 1.0, 10, 100), &k, 1).is_err());
        assert!(calibrate(&CalibrationSpec::new(60, 30, 30, 0.9, 2, 100), &k, 1).is_err());
        let mut s = CalibrationSpec::new(60, 30, 30, 0.9, 10, 100);
        s.statistic = FusionKind::S3;
        assert!(calibrate(&s, &k, 1).is_err());
    }

    #[test]
    fn test_checks_calibration_dimensions() {
        let (spec, k) = toy();
        let t = calibrate(&spec, &k, 3).unwrap();
        let (x, y) = draw_pair(DrawModel::Null, 60, 31, 30, 9, 0).unwrap();
        assert!(matches!(run_test(&x, &y, &k, &t), Err(Error::CalibrationMismatch(_))));
        let (x, y) = draw_pair(DrawModel::Null, 60, 30, 30, 9, 0).unwrap();
        let out = run_test(&x, &y, &k, &t).unwrap();
        assert_eq!(out.reject, (out.statistic.value - 1.0).abs() > t.theta_star);
        assert_eq!(out, run_test(&x, &y, &k, &t).unwrap());
        let other = KernelFn::gaussian(2.0).unwrap();
        assert!(matches!(run_test(&x, &y, &other, &t), Err(Error::CalibrationMismatch(_))));
    }
}
