//! Dense eigenvalue computation, spectrum ordering and empirical measures.

use std::cmp::Ordering;
use std::io::Write;

use faer::diag::Diag;
use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::evd::{self, ComputeEigenvectors, EvdError};
use faer::{Mat, MatRef, Par};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::fmt_f64;
use crate::linalg;

/// Absolute tolerance on imaginary parts when matching conjugate pairs.
pub const PAIRING_TOL: f64 = 1e-8;

/// Eigenvalues of a real square matrix in descending real part, then
/// descending imaginary part, then original solver index.
#[derive(Debug, Clone, Serialize)]
pub struct Spectrum {
    pub eigenvalues: Vec<Complex64>,
    /// `|Σλ − tr M|`.
    pub trace_residual: f64,
    /// `|Σλ² − tr M²|`.
    pub trace2_residual: f64,
    pub trace: f64,
    pub trace2: f64,
    /// Positions (in sorted order) of eigenvalues without a conjugate partner.
    pub unpaired: Vec<usize>,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn real_parts(&self) -> Vec<f64> {
        self.eigenvalues.iter().map(|z| z.re).collect()
    }

    /// Multiplies every eigenvalue (and the trace diagnostics) by `s`.
    pub fn scaled(&self, s: f64) -> Spectrum {
        Spectrum {
            eigenvalues: self.eigenvalues.iter().map(|z| z * s).collect(),
            trace_residual: self.trace_residual * s.abs(),
            trace2_residual: self.trace2_residual * s * s,
            trace: self.trace * s,
            trace2: self.trace2 * s * s,
            unpaired: self.unpaired.clone(),
        }
    }

    pub fn traces_ok(&self) -> bool {
        self.trace_residual <= 1e-8 * (1.0 + self.trace.abs())
            && self.trace2_residual <= 1e-6 * (1.0 + self.trace2.abs())
    }

    /// CSV with columns `rank,re,im`, rank starting at 1.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        self.write_csv_labeled(out, "rank")
    }

    /// As [`Spectrum::write_csv`] with a different name for the first column.
    pub fn write_csv_labeled<W: Write>(&self, out: W, first: &str) -> Result<()> {
        crate::io::write_table(
            out,
            &[first, "re", "im"],
            self.eigenvalues
                .iter()
                .enumerate()
                .map(|(i, z)| [(i + 1).to_string(), fmt_f64(z.re), fmt_f64(z.im)]),
        )
    }
}

fn descending(a: &(Complex64, usize), b: &(Complex64, usize)) -> Ordering {
    b.0.re
        .total_cmp(&a.0.re)
        .then(b.0.im.total_cmp(&a.0.im))
        .then(a.1.cmp(&b.1))
}

/// Sorts solver output into the canonical order and fills diagnostics.
pub fn spectrum_from_eigenvalues(raw: Vec<Complex64>, trace: f64, trace2: f64) -> Spectrum {
    let mut tagged: Vec<(Complex64, usize)> = raw.into_iter().zip(0..).collect();
    tagged.sort_by(descending);
    let eigenvalues: Vec<Complex64> = tagged.into_iter().map(|(z, _)| z).collect();
    let sum: Complex64 = eigenvalues.iter().sum();
    let sum2: Complex64 = eigenvalues.iter().map(|z| z * z).sum();
    let unpaired = unpaired_positions(&eigenvalues);
    Spectrum {
        trace_residual: (sum - trace).norm(),
        trace2_residual: (sum2 - trace2).norm(),
        trace,
        trace2,
        unpaired,
        eigenvalues,
    }
}

fn unpaired_positions(eigs: &[Complex64]) -> Vec<usize> {
    let mut used = vec![false; eigs.len()];
    let mut unpaired = Vec::new();
    for i in 0..eigs.len() {
        if used[i] || eigs[i].im.abs() <= PAIRING_TOL {
            continue;
        }
        used[i] = true;
        let target = eigs[i].conj();
        let partner = (0..eigs.len())
            .filter(|&j| !used[j])
            .map(|j| (j, (eigs[j] - target).norm()))
            .filter(|&(_, d)| d <= PAIRING_TOL * (1.0 + target.norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        match partner {
            Some((j, _)) => used[j] = true,
            None => unpaired.push(i),
        }
    }
    unpaired
}

/// Diagonal similarity scaling by powers of two so that row and column
/// off-diagonal norms are comparable. Returns `D⁻¹ M D`.
fn balance(m: MatRef<'_, f64>) -> Mat<f64> {
    const RADIX: f64 = 2.0;
    let n = m.nrows();
    let mut b = m.to_owned();
    let mut converged = false;
    let mut sweeps = 0;
    while !converged && sweeps < 100 {
        converged = true;
        sweeps += 1;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += b[(j, i)].abs();
                    r += b[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let (mut cc, mut rr) = (c, r);
            while cc < rr / RADIX {
                cc *= RADIX;
                rr /= RADIX;
                f *= RADIX;
            }
            while cc >= rr * RADIX {
                cc /= RADIX;
                rr *= RADIX;
                f /= RADIX;
            }
            if (cc + rr) < 0.95 * s {
                converged = false;
                for j in 0..n {
                    b[(i, j)] /= f;
                    b[(j, i)] *= f;
                }
            }
        }
    }
    b
}

/// All eigenvalues of a real square matrix: balancing, Hessenberg reduction
/// and implicitly shifted QR (via `faer`), then canonical ordering.
pub fn eigenvalues_general(m: MatRef<'_, f64>) -> Result<Spectrum> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::Dimension(format!(
            "eigenvalues need a square matrix, got {}x{}",
            n,
            m.ncols()
        )));
    }
    if !linalg::all_finite(m) {
        return Err(Error::InvalidData("matrix has non-finite entries".into()));
    }
    let trace = linalg::trace(m);
    let trace2 = linalg::trace_of_square(m);
    if n == 0 {
        return Ok(spectrum_from_eigenvalues(Vec::new(), trace, trace2));
    }
    let b = balance(m);
    let mut s_re = Diag::<f64>::zeros(n);
    let mut s_im = Diag::<f64>::zeros(n);
    let par = Par::Seq;
    let mut mem = MemBuffer::new(evd::evd_scratch::<f64>(
        n,
        ComputeEigenvectors::No,
        ComputeEigenvectors::No,
        par,
        Default::default(),
    ));
    evd::evd_real(
        b.as_ref(),
        s_re.as_mut(),
        s_im.as_mut(),
        None,
        None,
        par,
        MemStack::new(&mut mem),
        Default::default(),
    )
    .map_err(|e| match e {
        // the backing solver does not expose partially converged values
        EvdError::NoConvergence => Error::Solver {
            dim: n,
            partial: None,
        },
    })?;
    let re = s_re.column_vector();
    let im = s_im.column_vector();
    let raw = (0..n).map(|i| Complex64::new(re[i], im[i])).collect();
    Ok(spectrum_from_eigenvalues(raw, trace, trace2))
}

/// Atoms of equal weight `1/len`, stored in descending order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalMeasure {
    atoms: Vec<f64>,
}

impl EmpiricalMeasure {
    /// Sorts the atoms descending; rejects empty or non-finite input.
    pub fn new(mut atoms: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidData("empirical measure needs atoms".into()));
        }
        if atoms.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidData("non-finite atom".into()));
        }
        atoms.sort_by(|a, b| b.total_cmp(a));
        Ok(Self { atoms })
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn weight(&self) -> f64 {
        1.0 / self.atoms.len() as f64
    }

    pub fn max(&self) -> f64 {
        self.atoms[0]
    }

    pub fn min(&self) -> f64 {
        self.atoms[self.atoms.len() - 1]
    }

    /// `μ((−∞, x])`.
    pub fn cdf(&self, x: f64) -> f64 {
        // atoms are descending: count those ≤ x from the tail
        let above = self.atoms.partition_point(|&a| a > x);
        (self.atoms.len() - above) as f64 / self.atoms.len() as f64
    }

    /// `μ((−∞, x))`.
    pub fn cdf_left(&self, x: f64) -> f64 {
        let at_least = self.atoms.partition_point(|&a| a >= x);
        (self.atoms.len() - at_least) as f64 / self.atoms.len() as f64
    }

    pub fn stieltjes(&self, z: Complex64) -> Complex64 {
        let w = self.weight();
        self.atoms.iter().map(|&a| w / (a - z)).sum()
    }

    /// Concatenates several measures with equal per-atom weight.
    pub fn pooled<'a>(parts: impl IntoIterator<Item = &'a EmpiricalMeasure>) -> Result<Self> {
        Self::new(parts.into_iter().flat_map(|m| m.atoms.iter().copied()).collect())
    }
}

/// Real eigenvalues of a symmetric matrix, descending.
pub fn eigenvalues_symmetric(m: MatRef<'_, f64>) -> Result<EmpiricalMeasure> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::Dimension(format!(
            "eigenvalues need a square matrix, got {}x{}",
            n,
            m.ncols()
        )));
    }
    if n == 0 {
        return Err(Error::Dimension("empty matrix".into()));
    }
    if !linalg::all_finite(m) {
        return Err(Error::InvalidData("matrix has non-finite entries".into()));
    }
    let asym = linalg::asymmetry(m);
    if asym > 1e-12 * linalg::max_abs(m) {
        return Err(Error::Contract(format!(
            "matrix is not symmetric (max |M - M^T| = {asym:e})"
        )));
    }
    let mut s = Diag::<f64>::zeros(n);
    let par = Par::Seq;
    let mut mem = MemBuffer::new(evd::self_adjoint_evd_scratch::<f64>(
        n,
        ComputeEigenvectors::No,
        par,
        Default::default(),
    ));
    evd::self_adjoint_evd(
        m,
        s.as_mut(),
        None,
        par,
        MemStack::new(&mut mem),
        Default::default(),
    )
    .map_err(|_| Error::Solver {
        dim: n,
        partial: None,
    })?;
    let col = s.column_vector();
    EmpiricalMeasure::new((0..n).map(|i| col[i]).collect())
}

/// `(1/n) Σ 1/(λᵢ − z)` for `Im z > 0`.
pub fn esd_stieltjes(m: &EmpiricalMeasure, z: Complex64) -> Result<Complex64> {
    if !(z.im > 0.0) {
        return Err(Error::Domain(format!("Im z must be positive, got {z}")));
    }
    Ok(m.stieltjes(z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn diagonal_is_sorted_descending() {
        let m = Mat::from_fn(3, 3, |i, j| if i == j { [3.0, 1.0, 2.0][i] } else { 0.0 });
        let s = eigenvalues_general(m.as_ref()).unwrap();
        let re: Vec<f64> = s.real_parts();
        assert_eq!(re, vec![3.0, 2.0, 1.0]);
        assert!(s.unpaired.is_empty());
    }

    #[test]
    fn rotation_orders_positive_imaginary_first() {
        let m = Mat::from_fn(2, 2, |i, j| [[0.0, -1.0], [1.0, 0.0]][i][j]);
        let s = eigenvalues_general(m.as_ref()).unwrap();
        assert!((s.eigenvalues[0] - c(0.0, 1.0)).norm() < 1e-14);
        assert!((s.eigenvalues[1] - c(0.0, -1.0)).norm() < 1e-14);
    }

    #[test]
    fn ties_fall_back_to_solver_index() {
        let s = spectrum_from_eigenvalues(vec![c(1.0, 0.0), c(2.0, 0.0), c(1.0, 0.0)], 4.0, 6.0);
        assert_eq!(s.real_parts(), vec![2.0, 1.0, 1.0]);
        assert_eq!(s.trace_residual, 0.0);
    }

    #[test]
    fn unpaired_values_are_flagged() {
        let s = spectrum_from_eigenvalues(vec![c(1.0, 0.5), c(1.0, -0.5), c(0.0, 0.3)], 2.0, 0.0);
        assert_eq!(s.unpaired, vec![2]);
    }

    #[test]
    fn random_matrix_trace_and_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = Mat::from_fn(50, 50, |_, _| rng.random::<f64>() - 0.5);
        let s = eigenvalues_general(m.as_ref()).unwrap();
        assert_eq!(s.len(), 50);
        assert!(s.traces_ok(), "{} {}", s.trace_residual, s.trace2_residual);
        assert!(s.unpaired.is_empty());
        for w in s.eigenvalues.windows(2) {
            assert!(w[0].re >= w[1].re);
        }
    }

    #[test]
    fn badly_scaled_matrix_benefits_from_balancing() {
        // similar to diag(1,2,3) through a wildly scaled diagonal
        let d = [1e-6, 1.0, 1e6];
        let base = Mat::from_fn(3, 3, |i, j| match (i, j) {
            (0, 0) => 1.0,
            (1, 1) => 2.0,
            (2, 2) => 3.0,
            (0, 1) | (1, 2) => 1.0,
            _ => 0.0,
        });
        let m = Mat::from_fn(3, 3, |i, j| base[(i, j)] * d[j] / d[i]);
        let s = eigenvalues_general(m.as_ref()).unwrap();
        for (got, want) in s.real_parts().iter().zip([3.0, 2.0, 1.0]) {
            assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        }
    }

    #[test]
    fn symmetric_identity_and_rank_one() {
        let id = Mat::<f64>::identity(5, 5);
        let e = eigenvalues_symmetric(id.as_ref()).unwrap();
        assert!(e.atoms().iter().all(|&a| (a - 1.0).abs() < 1e-14));
        let ones = Mat::from_fn(4, 4, |_, _| 1.0);
        let e = eigenvalues_symmetric(ones.as_ref()).unwrap();
        assert!((e.atoms()[0] - 4.0).abs() < 1e-13);
        assert!(e.atoms()[1..].iter().all(|a| a.abs() < 1e-13));
    }

    #[test]
    fn asymmetric_input_is_a_contract_error() {
        let m = Mat::from_fn(2, 2, |i, j| [[1.0, 2.0], [0.0, 1.0]][i][j]);
        assert!(matches!(
            eigenvalues_symmetric(m.as_ref()),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn stieltjes_of_point_mass_at_zero() {
        let m = EmpiricalMeasure::new(vec![0.0]).unwrap();
        let v = esd_stieltjes(&m, c(0.0, 1.0)).unwrap();
        assert!((v - c(0.0, 1.0)).norm() < 1e-15);
        assert!(esd_stieltjes(&m, c(1.0, 0.0)).is_err());
    }

    #[test]
    fn trivial_bound_holds() {
        let m = EmpiricalMeasure::new(vec![-1.0, 0.2, 0.2, 3.0]).unwrap();
        for eta in [1e-3, 0.1, 1.0, 10.0] {
            for x in [-2.0, 0.2, 1.0, 3.0] {
                let v = esd_stieltjes(&m, c(x, eta)).unwrap();
                assert!(v.norm() <= 1.0 / eta * (1.0 + 1e-12));
                assert!(v.im > 0.0);
            }
        }
    }

    #[test]
    fn cdf_counts_atoms() {
        let m = EmpiricalMeasure::new(vec![1.0, 2.0, 2.0, 3.0]).unwrap();
        assert_eq!(m.cdf(2.0), 0.75);
        assert_eq!(m.cdf_left(2.0), 0.25);
        assert_eq!(m.cdf(0.0), 0.0);
        assert_eq!(m.cdf(3.0), 1.0);
    }

    #[test]
    fn spectrum_csv_layout() {
        let s = spectrum_from_eigenvalues(vec![c(1.0, 0.0)], 1.0, 1.0);
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("rank,re,im\n1,1.0"));
    }
}
