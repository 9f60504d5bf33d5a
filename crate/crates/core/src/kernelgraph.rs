//! Kernel affinity matrices, degree normalization and the finite-rank shift
//! decomposition `W = W̃ + Sh₀ + Sh₁ + Sh₂`.

use std::fmt;
use std::sync::Arc;

use faer::Mat;

use crate::error::{Error, Result};
use crate::linalg;
use crate::rngkit::DataCloud;

/// A smooth decreasing kernel `f` applied to squared distances.
pub trait Kernel: Send + Sync {
    fn name(&self) -> &str;
    fn eval(&self, t: f64) -> f64;
    fn deriv1(&self, t: f64) -> f64;
    fn deriv2(&self, t: f64) -> f64;

    /// Bandwidth, when the kernel has one.
    fn bandwidth(&self) -> Option<f64> {
        None
    }

    /// `ς = f(0) + 2f′(2) − f(2)`.
    fn varsigma(&self) -> f64 {
        self.eval(0.0) + 2.0 * self.deriv1(2.0) - self.eval(2.0)
    }
}

/// `f(t) = exp(−t / (2σ²))`.
#[derive(Debug, Clone, Copy)]
pub struct Gaussian {
    pub sigma: f64,
}

impl Kernel for Gaussian {
    fn name(&self) -> &str {
        "gaussian"
    }

    fn eval(&self, t: f64) -> f64 {
        (-t / (2.0 * self.sigma * self.sigma)).exp()
    }

    fn deriv1(&self, t: f64) -> f64 {
        -self.eval(t) / (2.0 * self.sigma * self.sigma)
    }

    fn deriv2(&self, t: f64) -> f64 {
        self.eval(t) / (4.0 * self.sigma.powi(4))
    }

    fn bandwidth(&self) -> Option<f64> {
        Some(self.sigma)
    }

    fn varsigma(&self) -> f64 {
        // ς = 1 − e^{−u}(1 + u) with u = 1/σ²; the series avoids the
        // cancellation for wide kernels.
        let u = 1.0 / (self.sigma * self.sigma);
        if u < 1e-2 {
            let mut term = u * u / 2.0;
            let mut sum = 0.0;
            for k in 2..12u32 {
                sum += term;
                // next: (−1)^{k+1} k u^{k+1}/(k+1)!
                term *= -u * (k as f64) / ((k - 1) as f64 * (k + 1) as f64);
            }
            sum
        } else {
            -(-u).exp_m1() - u * (-u).exp()
        }
    }
}

/// Validated kernel handle. Cheap to clone.
#[derive(Clone)]
pub struct KernelFn {
    inner: Arc<dyn Kernel>,
    varsigma: f64,
}

impl fmt::Debug for KernelFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KernelFn")
            .field("name", &self.name())
            .field("bandwidth", &self.bandwidth())
            .field("varsigma", &self.varsigma)
            .finish()
    }
}

const MONOTONE_GRID_POINTS: usize = 64;

impl KernelFn {
    /// Wraps a kernel after checking `ς > 0`, `f(2) > 0` and monotonicity on
    /// a 64-point logarithmic grid over `[0, 10]`.
    pub fn new<K: Kernel + 'static>(kernel: K) -> Result<Self> {
        let varsigma = kernel.varsigma();
        let f2 = kernel.eval(2.0);
        if !(f2 > 0.0) {
            return Err(Error::KernelCondition(format!(
                "{}: f(2) = {f2:e} must be positive",
                kernel.name()
            )));
        }
        if !(varsigma > 0.0) {
            return Err(Error::KernelCondition(format!(
                "{}: varsigma = f(0) + 2f'(2) - f(2) = {varsigma:e} must be positive",
                kernel.name()
            )));
        }
        let grid = monotone_grid();
        for w in grid.windows(2) {
            let (a, b) = (kernel.eval(w[0]), kernel.eval(w[1]));
            if !(b <= a) {
                return Err(Error::KernelCondition(format!(
                    "{}: not decreasing, f({}) = {a} < f({}) = {b}",
                    kernel.name(),
                    w[0],
                    w[1]
                )));
            }
        }
        Ok(Self {
            inner: Arc::new(kernel),
            varsigma,
        })
    }

    pub fn gaussian(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::KernelCondition(format!(
                "gaussian bandwidth must be positive and finite, got {sigma}"
            )));
        }
        Self::new(Gaussian { sigma })
    }

    pub fn name(&self) -> &str {
        self.inner.name()
    }

    pub fn bandwidth(&self) -> Option<f64> {
        self.inner.bandwidth()
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.inner.eval(t)
    }

    pub fn deriv1(&self, t: f64) -> f64 {
        self.inner.deriv1(t)
    }

    pub fn deriv2(&self, t: f64) -> f64 {
        self.inner.deriv2(t)
    }

    pub fn varsigma(&self) -> f64 {
        self.varsigma
    }

    /// `f(2)`, the limit of the off-diagonal affinities.
    pub fn f2(&self) -> f64 {
        self.eval(2.0)
    }

    /// `−2f′(2)`, the scale of the Gram-matrix part of `W`.
    pub fn gram_scale(&self) -> f64 {
        -2.0 * self.deriv1(2.0)
    }
}

fn monotone_grid() -> Vec<f64> {
    let mut grid = Vec::with_capacity(MONOTONE_GRID_POINTS);
    grid.push(0.0);
    let (lo, hi) = (-3.0f64, 1.0f64);
    let steps = MONOTONE_GRID_POINTS - 2;
    for k in 0..=steps {
        grid.push(10f64.powf(lo + (hi - lo) * k as f64 / steps as f64));
    }
    grid
}

/// Affinity matrix with its degrees and row-stochastic normalization.
#[derive(Debug, Clone)]
pub struct AffinityBundle {
    pub w: Mat<f64>,
    pub degrees: Vec<f64>,
    pub a: Mat<f64>,
    pub kernel: KernelFn,
}

impl AffinityBundle {
    pub fn n(&self) -> usize {
        self.w.nrows()
    }
}

/// Squared pairwise distances via the Gram expansion, clamped at zero and
/// exactly symmetric with a zero diagonal.
fn squared_distances(cloud: &DataCloud) -> Mat<f64> {
    let g = linalg::gram(cloud.data().as_ref());
    let n = g.nrows();
    let mut d = Mat::<f64>::zeros(n, n);
    for j in 0..n {
        for i in (j + 1)..n {
            let v = (g[(i, i)] + g[(j, j)] - 2.0 * g[(i, j)]).max(0.0);
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    d
}

const DEGREE_FLOOR: f64 = 1e-300;

pub fn build_affinity(cloud: &DataCloud, kernel: &KernelFn) -> Result<AffinityBundle> {
    let n = cloud.n();
    if n < 2 {
        return Err(Error::Dimension(format!("affinity needs n >= 2, got {n}")));
    }
    let dist = squared_distances(cloud);
    let f0 = kernel.eval(0.0);
    let mut w = Mat::<f64>::zeros(n, n);
    for j in 0..n {
        w[(j, j)] = f0;
        for i in (j + 1)..n {
            let v = kernel.eval(dist[(i, j)]);
            w[(i, j)] = v;
            w[(j, i)] = v;
        }
    }
    let degrees: Vec<f64> = (0..n).map(|i| (0..n).map(|j| w[(i, j)]).sum()).collect();
    if let Some((row, &degree)) = degrees
        .iter()
        .enumerate()
        .find(|(_, d)| !(**d > DEGREE_FLOOR))
    {
        return Err(Error::DegenerateDegree { row, degree });
    }
    let mut a = w.clone();
    let inv: Vec<f64> = degrees.iter().map(|d| d.recip()).collect();
    linalg::scale_rows(&mut a, &inv);
    Ok(AffinityBundle {
        w,
        degrees,
        a,
        kernel: kernel.clone(),
    })
}

/// `W = W̃ + Sh₀ + Sh₁ + Sh₂` with `ψ(i) = ‖xᵢ‖² − 1`.
#[derive(Debug, Clone)]
pub struct ShiftDecomposition {
    pub sh0: Mat<f64>,
    pub sh1: Mat<f64>,
    pub sh2: Mat<f64>,
    pub psi: Vec<f64>,
    pub w_tilde: Mat<f64>,
}

pub fn shift_decomposition(bundle: &AffinityBundle, cloud: &DataCloud) -> Result<ShiftDecomposition> {
    let n = bundle.n();
    if cloud.n() != n {
        return Err(Error::Dimension(format!(
            "bundle has n={n} but cloud has n={}",
            cloud.n()
        )));
    }
    let k = &bundle.kernel;
    let (f2, d1, d2) = (k.eval(2.0), k.deriv1(2.0), k.deriv2(2.0));
    let psi: Vec<f64> = cloud.squared_norms().iter().map(|s| s - 1.0).collect();
    let sh0 = Mat::from_fn(n, n, |_, _| f2);
    let sh1 = Mat::from_fn(n, n, |i, j| d1 * (psi[j] + psi[i]));
    let sh2 = Mat::from_fn(n, n, |i, j| {
        0.5 * d2 * (psi[j] * psi[j] + psi[i] * psi[i] + 2.0 * psi[i] * psi[j])
    });
    let w_tilde = Mat::from_fn(n, n, |i, j| {
        bundle.w[(i, j)] - sh0[(i, j)] - sh1[(i, j)] - sh2[(i, j)]
    });
    Ok(ShiftDecomposition {
        sh0,
        sh1,
        sh2,
        psi,
        w_tilde,
    })
}

/// `maxᵢ |n / D(i) − 1 / f(2)|`.
pub fn degree_deviation(bundle: &AffinityBundle) -> f64 {
    let n = bundle.n() as f64;
    let target = bundle.kernel.f2().recip();
    bundle
        .degrees
        .iter()
        .map(|d| (n / d - target).abs())
        .fold(0.0, f64::max)
}

/// `K` (Taylor-linearized affinity) and `K̆ = −2f′(2) XᵀX + ςI`.
pub fn k_matrices(cloud: &DataCloud, kernel: &KernelFn) -> (Mat<f64>, Mat<f64>) {
    let g = linalg::gram(cloud.data().as_ref());
    let n = g.nrows();
    let (f0, f2, s) = (kernel.eval(0.0), kernel.f2(), kernel.gram_scale());
    let k = Mat::from_fn(n, n, |i, j| if i == j { f0 } else { f2 + s * g[(i, j)] });
    let vs = kernel.varsigma();
    let k_breve = Mat::from_fn(n, n, |i, j| {
        let base = s * g[(i, j)];
        if i == j {
            base + vs
        } else {
            base
        }
    });
    (k, k_breve)
}
