//! Runnable versions of the spectral guarantees: a Haar Monte-Carlo oracle
//! for `⊠`, rigidity and edge-cluster reports, and eigenvalue inequalities.

use std::sync::OnceLock;

use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::freeprob::{invert_to_density, typical_location, FreeMultConv, InvertedDensity, SpectralMeasure};
use crate::fusion::{fusion_from_clouds, FusionKind};
use crate::inference::imaginary_ratio_profile;
use crate::kernelgraph::{build_affinity, degree_deviation, shift_decomposition, KernelFn};
use crate::linalg;
use crate::rngkit::{sample_haar_orthogonal, DataCloud, SeedSpec};
use crate::spectra::{eigenvalues_general, eigenvalues_symmetric, EmpiricalMeasure};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyConstants {
    pub version: u32,
    pub pinned_seed: u64,
    pub rigidity_theta: f64,
    pub rigidity_epsilon: f64,
    pub rigidity_c1: f64,
    pub rigidity_c_edge: f64,
    pub rigidity_c_bulk: f64,
    pub rigidity_bulk_median_max: f64,
    pub degree_c: f64,
    pub trivial_c: f64,
    pub edge_cluster_c: f64,
    pub imag_ratio_max: f64,
    pub mc_kolmogorov_max: f64,
}

/// The frozen constants shipped with the crate.
pub fn constants() -> &'static VerifyConstants {
    static CONSTANTS: OnceLock<VerifyConstants> = OnceLock::new();
    CONSTANTS.get_or_init(|| {
        toml::from_str(include_str!("constants.toml")).expect("embedded constants parse")
    })
}

/// Pooled real parts of the eigenvalues of `Σ_x U Σ_y Uᵀ` over `trials`
/// Haar draws; trial `t` uses stream `t` of `seed`.
pub fn mc_free_conv_oracle(
    sigma_x: &[f64],
    sigma_y: &[f64],
    trials: usize,
    seed: SeedSpec,
) -> Result<EmpiricalMeasure> {
    let n = sigma_x.len();
    if trials == 0 {
        return Err(Error::InvalidData("oracle needs at least one trial".into()));
    }
    if sigma_y.len() != n || n == 0 {
        return Err(Error::Dimension(format!(
            "diagonals must share a positive length, got {} and {}",
            n,
            sigma_y.len()
        )));
    }
    let psd = sigma_x.iter().all(|&s| s >= 0.0);
    let parts: Vec<EmpiricalMeasure> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let u = sample_haar_orthogonal(n, seed.with_stream(t as u64))?;
            // U Σ_y Uᵀ
            let mut us = u.clone();
            linalg::scale_cols(&mut us, sigma_y);
            let b = linalg::mul(us.as_ref(), u.transpose());
            if psd {
                // similar to the symmetric Σ_x^{1/2} U Σ_y Uᵀ Σ_x^{1/2}
                let r: Vec<f64> = sigma_x.iter().map(|s| s.sqrt()).collect();
                let sym = Mat::from_fn(n, n, |i, j| {
                    if i <= j {
                        r[i] * b[(i, j)] * r[j]
                    } else {
                        r[j] * b[(j, i)] * r[i]
                    }
                });
                eigenvalues_symmetric(sym.as_ref())
            } else {
                let mut m = b;
                linalg::scale_rows(&mut m, sigma_x);
                EmpiricalMeasure::new(eigenvalues_general(m.as_ref())?.real_parts())
            }
        })
        .collect::<Result<_>>()?;
    EmpiricalMeasure::pooled(&parts)
}

/// `ν_x ⊠ ν_y` for the kernel laws at `(n, p1, p2)`, recovered on a grid.
pub fn kernel_product_density(
    kernel: &KernelFn,
    n: usize,
    p1: usize,
    p2: usize,
    eta: f64,
) -> Result<InvertedDensity> {
    let nu_x = SpectralMeasure::kernel_law(kernel, n, p1)?;
    let nu_y = SpectralMeasure::kernel_law(kernel, n, p2)?;
    product_density(nu_x, nu_y, eta)
}

/// `μ_a ⊠ μ_b` on a grid spanning the product of the hulls with 5% margins.
pub fn product_density(a: SpectralMeasure, b: SpectralMeasure, eta: f64) -> Result<InvertedDensity> {
    let (a0, a1) = a.hull();
    let (b0, b1) = b.hull();
    let (lo, hi) = (a0 * b0, a1 * b1);
    let pad = 0.05 * (hi - lo).max(1e-3);
    let conv = FreeMultConv::new(a, b)?;
    invert_to_density(&conv, (lo - pad, hi + pad), eta)
}

/// Step for the density behind every edge prediction; small enough for
/// the `1/√x` hard edge of a square kernel law.
pub const EDGE_ETA: f64 = 1e-6;

/// `f(2)⁻² γ_{ν_x ⊠ ν_y}(1)`, the predicted location of the non-trivial
/// outlying eigenvalues of `n²S_xy`.
pub fn edge_prediction(kernel: &KernelFn, n: usize, p1: usize, p2: usize) -> Result<f64> {
    let inv = kernel_product_density(kernel, n, p1, p2, EDGE_ETA)?;
    let gamma = typical_location(&SpectralMeasure::Grid(inv.density), 1, n)?.value;
    Ok(gamma / kernel.f2().powi(2))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RigidityReport {
    pub n: usize,
    /// `|λ_{i+1}(W_x) − γ_{ν_x}(i)|` for `i = 1..=n/2`.
    pub deviations: Vec<f64>,
    /// `|λ_i(W̃_x) − γ_{ν_x}(i)|` for `i = 1..=n/2`.
    pub deviations_w_tilde: Vec<f64>,
    /// The two-regime bound at each index.
    pub band: Vec<f64>,
    /// Fraction of `deviations` inside `band`.
    pub pass_fraction: f64,
    /// Median of `deviations` over `n/10 ≤ i ≤ n/2`.
    pub bulk_median: f64,
    pub degree_deviation: f64,
}

/// `C_edge n^{−1/9+2ϑ}` up to `i = C₁ n^{5/6+3ϑ/2}`, then
/// `C_bulk n^{1/12+ε} i^{−1/3}`.
pub fn rigidity_band(n: usize, i: usize, k: &VerifyConstants) -> f64 {
    let nf = n as f64;
    let split = k.rigidity_c1 * nf.powf(5.0 / 6.0 + 1.5 * k.rigidity_theta);
    if (i as f64) <= split {
        k.rigidity_c_edge * nf.powf(-1.0 / 9.0 + 2.0 * k.rigidity_theta)
    } else {
        k.rigidity_c_bulk * nf.powf(1.0 / 12.0 + k.rigidity_epsilon) * (i as f64).powf(-1.0 / 3.0)
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

pub fn check_rigidity(cloud: &DataCloud, kernel: &KernelFn) -> Result<RigidityReport> {
    let n = cloud.n();
    if n < 4 {
        return Err(Error::Dimension(format!("rigidity needs n >= 4, got {n}")));
    }
    let k = constants();
    let bundle = build_affinity(cloud, kernel)?;
    let w = eigenvalues_symmetric(bundle.w.as_ref())?;
    let wt = eigenvalues_symmetric(shift_decomposition(&bundle, cloud)?.w_tilde.as_ref())?;
    let nu = SpectralMeasure::kernel_law(kernel, n, cloud.p())?;
    let half = n / 2;
    let gamma: Vec<f64> = (1..=half)
        .map(|i| typical_location(&nu, i, n).map(|t| t.value))
        .collect::<Result<_>>()?;
    let deviations: Vec<f64> = (1..=half).map(|i| (w.atoms()[i] - gamma[i - 1]).abs()).collect();
    let deviations_w_tilde: Vec<f64> =
        (1..=half).map(|i| (wt.atoms()[i - 1] - gamma[i - 1]).abs()).collect();
    let band: Vec<f64> = (1..=half).map(|i| rigidity_band(n, i, k)).collect();
    let inside = deviations.iter().zip(&band).filter(|(d, b)| d <= b).count();
    let bulk: Vec<f64> = (n.div_ceil(10).max(1)..=half).map(|i| deviations[i - 1]).collect();
    Ok(RigidityReport {
        n,
        pass_fraction: inside as f64 / half as f64,
        bulk_median: median(bulk),
        degree_deviation: degree_deviation(&bundle),
        deviations,
        deviations_w_tilde,
        band,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeReport {
    #[serde(rename = "L")]
    pub l: usize,
    pub kind: FusionKind,
    /// `f(2)⁻² γ_{ν_xy}(1)`.
    pub prediction: f64,
    /// `|λ_i(n²M) − prediction|` for `3 ≤ i ≤ L`.
    pub gaps: Vec<f64>,
    /// `C n^{−1/9}`.
    pub bound: f64,
    /// `|λ₁(M) − 1|` for the unscaled matrix.
    pub trivial_gap: f64,
    /// `|Im λᵢ| / |Re λᵢ|` for `3 ≤ i ≤ min(50, n)`.
    pub imaginary_ratios: Vec<f64>,
}

impl EdgeReport {
    pub fn max_gap(&self) -> f64 {
        self.gaps.iter().copied().fold(0.0, f64::max)
    }
}

pub fn check_edge_cluster(
    cx: &DataCloud,
    cy: &DataCloud,
    kernel: &KernelFn,
    l: usize,
    kind: FusionKind,
) -> Result<EdgeReport> {
    let n = cx.n();
    if l < 3 || l > n {
        return Err(Error::InvalidData(format!("L must lie in [3, n], got {l}")));
    }
    let spec = fusion_from_clouds(cx, cy, kernel, kind)?.spectrum()?;
    let prediction = edge_prediction(kernel, n, cx.p(), cy.p())?;
    let n2 = (n as f64).powi(2);
    let gaps = (3..=l).map(|i| (spec.eigenvalues[i - 1] * n2 - prediction).norm()).collect();
    let top = 50.min(n);
    let imaginary_ratios = imaginary_ratio_profile(&spec, top)?[2..].to_vec();
    Ok(EdgeReport {
        l,
        kind,
        prediction,
        gaps,
        bound: constants().edge_cluster_c * (n as f64).powf(-1.0 / 9.0),
        trivial_gap: (spec.eigenvalues[0] - 1.0).norm(),
        imaginary_ratios,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityRecord {
    /// `Σᵢ (λᵢ(A) − λᵢ(B))²`.
    pub hw_lhs: f64,
    /// `tr((A − B)²)`.
    pub hw_rhs: f64,
    pub hw_ok: bool,
    /// Index pairs `(i, j)` checked for `λ_{i+j−1}(A+B) ≤ λᵢ(A) + λⱼ(B)`.
    pub weyl_checked: usize,
    pub weyl_violations: usize,
    pub weyl_ok: bool,
    pub levy_distance: f64,
    /// `‖A − B‖` in operator norm.
    pub operator_norm: f64,
    pub levy_bound_ok: bool,
}

/// Whether `G(x) ≤ F(x + ε) + ε` for all `x`. Between atoms of `F` the
/// right side is flat, so the left limit of `G` at each `a − ε` suffices.
fn levy_one_sided(f: &EmpiricalMeasure, g: &EmpiricalMeasure, eps: f64) -> bool {
    f.atoms()
        .iter()
        .all(|&a| g.cdf_left(a - eps) <= f.cdf_left(a) + eps + 1e-15)
}

/// Lévy distance between two empirical measures, by bisection to 1e-14.
pub fn levy_distance(f: &EmpiricalMeasure, g: &EmpiricalMeasure) -> f64 {
    let ok = |e: f64| levy_one_sided(f, g, e) && levy_one_sided(g, f, e);
    let mut hi = (f.max().max(g.max()) - f.min().min(g.min())).max(1.0);
    let mut lo = 0.0;
    if ok(lo) {
        return 0.0;
    }
    while hi - lo > 1e-14 * (1.0 + hi) {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Index pairs for the Weyl check: all of them up to `n = 64`, otherwise a
/// stride-`n/32` lattice that keeps the first and last index.
fn weyl_pairs(n: usize) -> Vec<(usize, usize)> {
    let idx: Vec<usize> = if n <= 64 {
        (1..=n).collect()
    } else {
        let step = n / 32;
        let mut v: Vec<usize> = (1..=n).step_by(step).collect();
        if *v.last().unwrap() != n {
            v.push(n);
        }
        v
    };
    idx.iter()
        .flat_map(|&i| idx.iter().map(move |&j| (i, j)))
        .filter(|&(i, j)| i + j - 1 <= n)
        .collect()
}

/// Hoffman–Wielandt, Weyl and Lévy-distance checks for symmetric `A`, `B`.
/// Comparisons allow rounding slack of `64 u ‖·‖`.
pub fn inequality_harness(a: &Mat<f64>, b: &Mat<f64>) -> Result<InequalityRecord> {
    let n = a.nrows();
    if (a.nrows(), a.ncols()) != (b.nrows(), b.ncols()) || a.ncols() != n {
        return Err(Error::Dimension("inequality harness needs two square matrices of one size".into()));
    }
    let ea = eigenvalues_symmetric(a.as_ref())?;
    let eb = eigenvalues_symmetric(b.as_ref())?;
    let sum = Mat::from_fn(n, n, |i, j| a[(i, j)] + b[(i, j)]);
    let diff = Mat::from_fn(n, n, |i, j| a[(i, j)] - b[(i, j)]);
    let es = eigenvalues_symmetric(sum.as_ref())?;
    let ed = eigenvalues_symmetric(diff.as_ref())?;
    let scale = ea.max().abs().max(ea.min().abs()) + eb.max().abs().max(eb.min().abs());
    let slack = 64.0 * f64::EPSILON * scale.max(f64::MIN_POSITIVE);

    let hw_lhs: f64 = ea.atoms().iter().zip(eb.atoms()).map(|(x, y)| (x - y).powi(2)).sum();
    let hw_rhs = linalg::trace_of_square(diff.as_ref());
    let hw_ok = hw_lhs <= hw_rhs + 2.0 * slack * (n as f64).sqrt() * (hw_rhs.sqrt() + slack);

    let pairs = weyl_pairs(n);
    let weyl_violations = pairs
        .iter()
        .filter(|&&(i, j)| es.atoms()[i + j - 2] > ea.atoms()[i - 1] + eb.atoms()[j - 1] + slack)
        .count();

    let levy = levy_distance(&ea, &eb);
    let operator_norm = ed.max().abs().max(ed.min().abs());
    Ok(InequalityRecord {
        hw_lhs,
        hw_rhs,
        hw_ok,
        weyl_checked: pairs.len(),
        weyl_violations,
        weyl_ok: weyl_violations == 0,
        levy_distance: levy,
        operator_norm,
        levy_bound_ok: levy <= operator_norm + slack + 1e-13,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::freeprob::{kolmogorov_distance, sigma_matrices};
    use crate::rngkit::{sample_gaussian_cloud, Purpose};

    #[test]
    fn constants_load() {
        let k = constants();
        assert_eq!(k.version, 1);
        assert_eq!((k.rigidity_theta, k.rigidity_epsilon), (0.02, 0.01));
    }

    #[test]
    fn oracle_trivial_cases() {
        let seed = SeedSpec::new(1, 0, Purpose::Haar);
        let ones = vec![1.0; 12];
        let m = mc_free_conv_oracle(&ones, &ones, 3, seed).unwrap();
        assert!(m.atoms().iter().all(|&v| (v - 1.0).abs() < 1e-12));
        let sy: Vec<f64> = (1..=12).map(|i| i as f64 / 4.0).collect();
        let m = mc_free_conv_oracle(&[2.5; 12], &sy, 2, seed).unwrap();
        let mut want: Vec<f64> = sy.iter().chain(&sy).map(|v| 2.5 * v).collect();
        want.sort_by(|a, b| b.total_cmp(a));
        for (g, w) in m.atoms().iter().zip(&want) {
            assert!((g - w).abs() < 1e-12, "{g} {w}");
        }
        assert!(mc_free_conv_oracle(&ones, &ones[1..], 1, seed).is_err());
    }

    #[test]
    fn oracle_matches_inverted_density() {
        let k = KernelFn::gaussian(1.0).unwrap();
        let n = 200;
        let nu = SpectralMeasure::kernel_law(&k, n, n).unwrap();
        let (sx, sy) = sigma_matrices(&nu, &nu, n, n, n, k.varsigma()).unwrap();
        let emp = mc_free_conv_oracle(&sx, &sy, 10, SeedSpec::new(4, 0, Purpose::Haar)).unwrap();
        let inv = kernel_product_density(&k, n, n, n, EDGE_ETA).unwrap();
        let d = kolmogorov_distance(&emp, &SpectralMeasure::Grid(inv.density));
        assert!(d <= constants().mc_kolmogorov_max, "{d}");
    }

    #[test]
    fn rigidity_is_permutation_invariant() {
        let k = KernelFn::gaussian(1.0).unwrap();
        let c = sample_gaussian_cloud(120, 100, SeedSpec::new(8, 0, Purpose::XCloud)).unwrap();
        let perm: Vec<usize> = (0..120).rev().collect();
        let a = check_rigidity(&c, &k).unwrap();
        let b = check_rigidity(&c.permute_samples(&perm).unwrap(), &k).unwrap();
        assert_eq!(a.deviations.len(), 60);
        for (x, y) in a.deviations.iter().zip(&b.deviations) {
            assert!((x - y).abs() < 1e-10);
        }
        assert!(a.deviations.iter().all(|&d| d >= 0.0));
    }

    #[test]
    fn harness_on_equal_and_diagonal_inputs() {
        let a = Mat::from_fn(5, 5, |i, j| ((i + 1) * (j + 1)) as f64 / 7.0 + if i == j { 1.0 } else { 0.0 });
        let r = inequality_harness(&a, &a).unwrap();
        assert!(r.hw_ok && r.weyl_ok && r.levy_bound_ok);
        assert!(r.hw_lhs.abs() < 1e-24 && r.hw_rhs == 0.0 && r.levy_distance == 0.0);
        let da = Mat::from_fn(4, 4, |i, j| if i == j { [3.0, -1.0, 2.0, 0.5][i] } else { 0.0 });
        let db = Mat::from_fn(4, 4, |i, j| if i == j { [0.0, 1.0, 2.5, -2.0][i] } else { 0.0 });
        let r = inequality_harness(&da, &db).unwrap();
        // sorted pairing: (3, 2.5), (2, 1), (0.5, 0), (−1, −2)
        assert!((r.hw_lhs - (0.25 + 1.0 + 0.25 + 1.0)).abs() < 1e-14);
        assert!((r.hw_rhs - (9.0 + 4.0 + 0.25 + 6.25)).abs() < 1e-14);
        let asym = Mat::from_fn(3, 3, |i, j| (i * 3 + j) as f64);
        assert!(matches!(inequality_harness(&asym, &asym), Err(Error::Contract(_))));
    }

    #[test]
    fn levy_of_shifted_measure() {
        let f = EmpiricalMeasure::new(vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let g = EmpiricalMeasure::new(vec![0.1, 1.1, 2.1, 3.1]).unwrap();
        assert!((levy_distance(&f, &g) - 0.1).abs() < 1e-12);
        let far = EmpiricalMeasure::new(vec![100.0]).unwrap();
        let one = EmpiricalMeasure::new(vec![0.0]).unwrap();
        assert!((levy_distance(&one, &far) - 1.0).abs() < 1e-12);
    }
}
