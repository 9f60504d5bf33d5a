//! NCCA and alternating-diffusion fusion matrices, and the chain of
//! surrogates that connects `n²S_xy` to a free multiplicative model.

use std::fmt;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::freeprob::{sigma_matrices, SpectralMeasure};
use crate::kernelgraph::{build_affinity, k_matrices, shift_decomposition, AffinityBundle, KernelFn};
use crate::linalg;
use crate::rngkit::{sample_haar_orthogonal, DataCloud, SeedSpec};
use crate::spectra::{eigenvalues_general, Spectrum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionKind {
    Ncca,
    Ad,
    S1,
    S2,
    S3,
    Qxy,
}

impl FusionKind {
    pub fn label(self) -> &'static str {
        match self {
            FusionKind::Ncca => "ncca",
            FusionKind::Ad => "ad",
            FusionKind::S1 => "s1",
            FusionKind::S2 => "s2",
            FusionKind::S3 => "s3",
            FusionKind::Qxy => "qxy",
        }
    }
}

impl fmt::Display for FusionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone)]
pub struct FusionMatrix {
    pub matrix: Mat<f64>,
    pub kind: FusionKind,
    /// Whether the `n²` factor has been applied.
    pub scaled: bool,
}

impl FusionMatrix {
    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn spectrum(&self) -> Result<Spectrum> {
        eigenvalues_general(self.matrix.as_ref())
    }

    /// Multiplies the matrix by `n²`; a no-op when already scaled.
    pub fn into_scaled(mut self) -> Self {
        if !self.scaled {
            let s = (self.n() as f64).powi(2);
            for j in 0..self.n() {
                for i in 0..self.n() {
                    self.matrix[(i, j)] *= s;
                }
            }
            self.scaled = true;
        }
        self
    }
}

fn check_pair(bx: &AffinityBundle, by: &AffinityBundle) -> Result<()> {
    if bx.n() != by.n() {
        return Err(Error::Dimension(format!(
            "affinity bundles disagree on n: {} vs {}",
            bx.n(),
            by.n()
        )));
    }
    Ok(())
}

/// `S_xy = A_x A_yᵀ`.
pub fn ncca_matrix(bx: &AffinityBundle, by: &AffinityBundle) -> Result<FusionMatrix> {
    check_pair(bx, by)?;
    let s = linalg::mul(bx.a.as_ref(), by.a.transpose());
    debug_assert!({
        // tr(A_x A_yᵀ) = Σᵢⱼ A_x(i,j) A_y(i,j)
        let n = bx.n();
        let direct: f64 = (0..n)
            .flat_map(|j| (0..n).map(move |i| (i, j)))
            .map(|(i, j)| bx.a[(i, j)] * by.a[(i, j)])
            .sum();
        let t = linalg::trace(s.as_ref());
        (t - direct).abs() <= 1e-10 * t.abs().max(1e-300)
    });
    Ok(FusionMatrix {
        matrix: s,
        kind: FusionKind::Ncca,
        scaled: false,
    })
}

/// `A_xy = A_x A_y`, row-stochastic.
pub fn ad_matrix(bx: &AffinityBundle, by: &AffinityBundle) -> Result<FusionMatrix> {
    check_pair(bx, by)?;
    let m = linalg::mul(bx.a.as_ref(), by.a.as_ref());
    debug_assert!(max_row_sum_defect(&m) <= 1e-10);
    Ok(FusionMatrix {
        matrix: m,
        kind: FusionKind::Ad,
        scaled: false,
    })
}

/// `maxᵢ |Σⱼ Mᵢⱼ − 1|`.
pub fn max_row_sum_defect(m: &Mat<f64>) -> f64 {
    (0..m.nrows())
        .map(|i| ((0..m.ncols()).map(|j| m[(i, j)]).sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max)
}

/// Builds both affinities and the requested fusion matrix, unscaled.
pub fn fusion_from_clouds(
    cx: &DataCloud,
    cy: &DataCloud,
    kernel: &KernelFn,
    kind: FusionKind,
) -> Result<FusionMatrix> {
    let bx = build_affinity(cx, kernel)?;
    let by = build_affinity(cy, kernel)?;
    match kind {
        FusionKind::Ncca => ncca_matrix(&bx, &by),
        FusionKind::Ad => ad_matrix(&bx, &by),
        other => Err(Error::InvalidData(format!(
            "{other} is a reduction-chain matrix, not a fusion statistic"
        ))),
    }
}

/// `n²S_xy`, `S⁽¹⁾ = (D_x/n)⁻¹W̃_xW̃_y(D_y/n)⁻¹`, `S⁽²⁾ = f(2)⁻²W̃_xW̃_y`,
/// `S⁽³⁾ = f(2)⁻²K̆_xK̆_y` and `Q_xy = f(2)⁻² U Σ_x Uᵀ Σ_y`, in that order.
pub fn reduction_chain(
    cx: &DataCloud,
    cy: &DataCloud,
    kernel: &KernelFn,
    haar_seed: SeedSpec,
) -> Result<Vec<FusionMatrix>> {
    let n = cx.n();
    if cy.n() != n {
        return Err(Error::Dimension(format!(
            "clouds disagree on n: {} vs {}",
            n,
            cy.n()
        )));
    }
    let nf = n as f64;
    let inv_f2sq = kernel.f2().powi(-2);
    let bx = build_affinity(cx, kernel)?;
    let by = build_affinity(cy, kernel)?;
    let s_scaled = ncca_matrix(&bx, &by)?.into_scaled();

    let wx = shift_decomposition(&bx, cx)?.w_tilde;
    let wy = shift_decomposition(&by, cy)?.w_tilde;
    let ww = linalg::mul(wx.as_ref(), wy.as_ref());
    let mut s1 = ww.clone();
    let dx: Vec<f64> = bx.degrees.iter().map(|d| nf / d).collect();
    let dy: Vec<f64> = by.degrees.iter().map(|d| nf / d).collect();
    linalg::scale_rows(&mut s1, &dx);
    linalg::scale_cols(&mut s1, &dy);
    let s2 = Mat::from_fn(n, n, |i, j| inv_f2sq * ww[(i, j)]);

    let (_, kx) = k_matrices(cx, kernel);
    let (_, ky) = k_matrices(cy, kernel);
    let kk = linalg::mul(kx.as_ref(), ky.as_ref());
    let s3 = Mat::from_fn(n, n, |i, j| inv_f2sq * kk[(i, j)]);

    let nu_x = SpectralMeasure::kernel_law(kernel, n, cx.p())?;
    let nu_y = SpectralMeasure::kernel_law(kernel, n, cy.p())?;
    let (sx, sy) = sigma_matrices(&nu_x, &nu_y, n, cx.p(), cy.p(), kernel.varsigma())?;
    let u = sample_haar_orthogonal(n, haar_seed)?;
    // U Σ_x Uᵀ Σ_y
    let mut us = u.clone();
    linalg::scale_cols(&mut us, &sx);
    let mut q = linalg::mul(us.as_ref(), u.transpose());
    let sy_scaled: Vec<f64> = sy.iter().map(|v| v * inv_f2sq).collect();
    linalg::scale_cols(&mut q, &sy_scaled);

    let chain = [
        (s1, FusionKind::S1),
        (s2, FusionKind::S2),
        (s3, FusionKind::S3),
        (q, FusionKind::Qxy),
    ]
    .into_iter()
    .map(|(matrix, kind)| FusionMatrix {
        matrix,
        kind,
        scaled: true,
    });
    Ok(std::iter::once(s_scaled).chain(chain).collect())
}
