//! Deterministic sampling of Gaussian data clouds, Haar orthogonal matrices
//! and the rank-one alternative model.
//!
//! Every sampler is a pure function of a [`SeedSpec`]. The generator is
//! ChaCha8 keyed by `(master_seed, purpose)` with `stream_id` selecting the
//! ChaCha stream, so replicate `b` of a Monte-Carlo loop is addressable in
//! O(1) and independent of how replicates are scheduled across threads.

use std::io::{Read, Write};

use faer::Mat;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// What a random stream is used for. Distinct purposes never share a key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Purpose {
    XCloud,
    YCloud,
    Haar,
    Other,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::XCloud => 0x5843_4c4f_5544,
            Purpose::YCloud => 0x5943_4c4f_5544,
            Purpose::Haar => 0x4841_4152,
            Purpose::Other => 0x4f_5448_4552,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub stream_id: u64,
    pub purpose: Purpose,
}

impl SeedSpec {
    pub fn new(master_seed: u64, stream_id: u64, purpose: Purpose) -> Self {
        Self {
            master_seed,
            stream_id,
            purpose,
        }
    }

    pub fn with_stream(self, stream_id: u64) -> Self {
        Self { stream_id, ..self }
    }

    pub fn with_purpose(self, purpose: Purpose) -> Self {
        Self { purpose, ..self }
    }

    /// A new master seed for an independent experiment phase, e.g. the
    /// power draws of setting `k` as opposed to its calibration draws.
    pub fn derive(self, label: u64) -> Self {
        Self {
            master_seed: splitmix64(self.master_seed ^ splitmix64(label.wrapping_add(0x5eed))),
            ..self
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut state = self.master_seed ^ self.purpose.tag().rotate_left(17);
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            state = splitmix64(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(self.stream_id);
        rng
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// `n` samples in `ℝᵖ` stored column-wise in a `p x n` matrix.
#[derive(Debug, Clone)]
pub struct DataCloud {
    data: Mat<f64>,
}

impl DataCloud {
    pub fn new(data: Mat<f64>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::Dimension(format!(
                "data cloud must be non-empty, got {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        if !crate::linalg::all_finite(data.as_ref()) {
            return Err(Error::InvalidData("data cloud contains NaN or Inf".into()));
        }
        Ok(Self { data })
    }

    pub fn data(&self) -> &Mat<f64> {
        &self.data
    }

    pub fn into_inner(self) -> Mat<f64> {
        self.data
    }

    /// Ambient dimension.
    pub fn p(&self) -> usize {
        self.data.nrows()
    }

    /// Number of samples.
    pub fn n(&self) -> usize {
        self.data.ncols()
    }

    /// Aspect ratio `c = n / p`.
    pub fn aspect_ratio(&self) -> f64 {
        self.n() as f64 / self.p() as f64
    }

    pub fn squared_norms(&self) -> Vec<f64> {
        (0..self.n())
            .map(|j| (0..self.p()).map(|i| self.data[(i, j)].powi(2)).sum())
            .collect()
    }

    /// Reorders samples: column `k` of the result is column `perm[k]` of `self`.
    pub fn permute_samples(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n() {
            return Err(Error::Dimension("permutation length differs from n".into()));
        }
        Ok(Self {
            data: Mat::from_fn(self.p(), self.n(), |i, k| self.data[(i, perm[k])]),
        })
    }

    /// Writes the cloud as `# p=<p> n=<n>` followed by `p` rows of `n` values.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut out = out;
        writeln!(out, "# p={} n={}", self.p(), self.n())?;
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        for i in 0..self.p() {
            w.write_record((0..self.n()).map(|j| crate::io::fmt_f64(self.data[(i, j)])))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let rows = crate::io::read_numeric_rows(input)?;
        let mat = crate::io::rows_to_mat(&rows)?;
        Self::new(mat)
    }
}

fn check_dims(n: usize, p: usize) -> Result<()> {
    if n < 2 || p < 1 {
        return Err(Error::Dimension(format!(
            "need n >= 2 and p >= 1, got n={n}, p={p}"
        )));
    }
    Ok(())
}

/// `p x n` matrix of i.i.d. `N(0, 1/p)` entries, so `E‖xᵢ‖² = 1`.
pub fn sample_gaussian_cloud(n: usize, p: usize, seed: SeedSpec) -> Result<DataCloud> {
    check_dims(n, p)?;
    let mut rng = seed.rng();
    let scale = (p as f64).recip().sqrt();
    let mut data = Mat::<f64>::zeros(p, n);
    for j in 0..n {
        for i in 0..p {
            let z: f64 = StandardNormal.sample(&mut rng);
            data[(i, j)] = scale * z;
        }
    }
    Ok(DataCloud { data })
}

/// Haar-distributed `n x n` orthogonal matrix: QR of a Gaussian matrix with
/// the signs of `diag(R)` folded into `Q`.
pub fn sample_haar_orthogonal(n: usize, seed: SeedSpec) -> Result<Mat<f64>> {
    if n == 0 {
        return Err(Error::Dimension("Haar matrix needs n >= 1".into()));
    }
    let mut rng = seed.rng();
    let mut g = Mat::<f64>::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            g[(i, j)] = StandardNormal.sample(&mut rng);
        }
    }
    let qr = g.qr();
    let mut q = qr.compute_Q();
    let r = qr.R();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            for i in 0..n {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    Ok(q)
}

/// Symmetric `n x n` matrix `(G + Gᵀ)/√(2n)` with `G` standard Gaussian, so
/// the spectrum fills roughly `[−2, 2]`.
pub fn sample_goe(n: usize, seed: SeedSpec) -> Result<Mat<f64>> {
    if n == 0 {
        return Err(Error::Dimension("GOE matrix needs n >= 1".into()));
    }
    let mut rng = seed.rng();
    // off-diagonal variance 1/n, diagonal 2/n
    let off = (n as f64).sqrt().recip();
    let diag = std::f64::consts::SQRT_2 * off;
    let mut m = Mat::<f64>::zeros(n, n);
    for j in 0..n {
        for i in 0..=j {
            let g: f64 = StandardNormal.sample(&mut rng);
            let v = if i == j { diag * g } else { off * g };
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Ok(m)
}

/// Draws `(X, Y)` with `Y` a null cloud in `ℝ^{p2}` and `Xᵀ = A Yᵀ B′`, where
/// `A = 0.5 e₁e₁ᵀ` and `B′ = 0.5 𝟙_{p2} 𝟙_{p1}ᵀ / √(p1 p2)`.
///
/// The product collapses to `x₁ = 0.25 (𝟙ᵀy₁ / √(p1 p2)) 𝟙_{p1}` and
/// `xᵢ = 0` for `i ≥ 2`.
pub fn sample_alternative_pair(
    n: usize,
    p1: usize,
    p2: usize,
    seed: SeedSpec,
) -> Result<(DataCloud, DataCloud)> {
    check_dims(n, p1)?;
    check_dims(n, p2)?;
    let y = sample_gaussian_cloud(n, p2, seed.with_purpose(Purpose::YCloud))?;
    let b_scale = 0.5 / ((p1 as f64) * (p2 as f64)).sqrt();
    // Yᵀ B′ has identical columns; its first row is b_scale * 𝟙ᵀy₁.
    let y1_sum: f64 = (0..p2).map(|i| y.data[(i, 0)]).sum();
    let x1 = 0.5 * b_scale * y1_sum;
    let data = Mat::from_fn(p1, n, |_, j| if j == 0 { x1 } else { 0.0 });
    Ok((DataCloud { data }, y))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seed(s: u64) -> SeedSpec {
        SeedSpec::new(s, 0, Purpose::XCloud)
    }

    #[test]
    fn cloud_shape_and_determinism() {
        let a = sample_gaussian_cloud(4, 3, seed(7)).unwrap();
        assert_eq!((a.p(), a.n()), (3, 4));
        assert_eq!(a.aspect_ratio(), 4.0 / 3.0);
        let b = sample_gaussian_cloud(4, 3, seed(7)).unwrap();
        assert_eq!(a.data(), b.data());
        let c = sample_gaussian_cloud(4, 3, seed(7).with_stream(1)).unwrap();
        assert_ne!(a.data(), c.data());
        let d = sample_gaussian_cloud(4, 3, seed(7).with_purpose(Purpose::YCloud)).unwrap();
        assert_ne!(a.data(), d.data());
    }

    #[test]
    fn invalid_dimensions() {
        assert!(matches!(
            sample_gaussian_cloud(1, 3, seed(1)),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            sample_gaussian_cloud(5, 0, seed(1)),
            Err(Error::Dimension(_))
        ));
        assert!(sample_haar_orthogonal(0, seed(1)).is_err());
    }

    #[test]
    fn column_norms_concentrate() {
        let c = sample_gaussian_cloud(2000, 2000, seed(11)).unwrap();
        let mean = c.squared_norms().iter().sum::<f64>() / 2000.0;
        assert!((mean - 1.0).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn haar_n1_takes_both_signs() {
        let mut plus = 0;
        for s in 0..200 {
            let u = sample_haar_orthogonal(1, SeedSpec::new(3, s, Purpose::Haar)).unwrap();
            assert_eq!(u[(0, 0)].abs(), 1.0);
            if u[(0, 0)] > 0.0 {
                plus += 1;
            }
        }
        assert!((70..=130).contains(&plus), "plus = {plus}");
    }

    #[test]
    fn haar_is_orthogonal() {
        let u = sample_haar_orthogonal(50, SeedSpec::new(5, 0, Purpose::Haar)).unwrap();
        let utu = crate::linalg::mul(u.transpose(), u.as_ref());
        let err = crate::linalg::max_abs_diff(utu.as_ref(), Mat::<f64>::identity(50, 50).as_ref());
        assert!(err < 1e-12, "err {err}");
    }

    #[test]
    fn alternative_pair_structure() {
        let (x, y) = sample_alternative_pair(6, 4, 5, seed(9)).unwrap();
        assert_eq!((x.p(), x.n(), y.p(), y.n()), (4, 6, 5, 6));
        for j in 1..6 {
            for i in 0..4 {
                assert_eq!(x.data()[(i, j)], 0.0);
            }
        }
        let first = x.data()[(0, 0)];
        for i in 1..4 {
            assert_eq!(x.data()[(i, 0)], first);
        }
        let expect = 0.25 * (0..5).map(|i| y.data()[(i, 0)]).sum::<f64>() / (20f64).sqrt();
        assert!((first - expect).abs() < 1e-15);
    }

    #[test]
    fn csv_roundtrip_is_exact() {
        let c = sample_gaussian_cloud(5, 3, seed(2)).unwrap();
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# p=3 n=5\n"));
        let back = DataCloud::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.data(), c.data());
    }

    #[test]
    fn rejects_non_finite() {
        let mut m = Mat::<f64>::zeros(2, 2);
        m[(0, 1)] = f64::NAN;
        assert!(matches!(DataCloud::new(m), Err(Error::InvalidData(_))));
    }
}
