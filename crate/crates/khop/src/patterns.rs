//! Stored pattern sets: construction, synthetic sampling, idx image loading.

use crate::error::{Error, Result};
use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::path::Path;

/// Magic number of an idx3 unsigned-byte image file.
pub const IDX3_MAGIC: u32 = 0x0000_0803;

/// A set of memory patterns, stored as the columns of a `d x m` matrix.
#[derive(Debug, Clone)]
pub struct PatternSet {
    xi: Array2<f64>,
}

impl PatternSet {
    /// Wrap a `d x m` matrix whose columns are the patterns.
    ///
    /// Requires at least one pattern, a positive dimension, and finite
    /// entries.
    pub fn from_columns(xi: Array2<f64>) -> Result<Self> {
        let (d, m) = xi.dim();
        if d == 0 || m == 0 {
            return Err(Error::EmptySelection);
        }
        if xi.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { xi })
    }

    /// Build from a flat row-major buffer of `m` patterns of dimension `d`.
    pub fn from_flat(data: &[f64], d: usize, m: usize) -> Result<Self> {
        if data.len() != d * m {
            return Err(Error::DimensionMismatch {
                expected: d * m,
                got: data.len(),
            });
        }
        let mut xi = Array2::zeros((d, m));
        for mu in 0..m {
            for i in 0..d {
                xi[(i, mu)] = data[mu * d + i];
            }
        }
        Self::from_columns(xi)
    }

    /// Number of stored patterns.
    pub fn len(&self) -> usize {
        self.xi.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.xi.ncols() == 0
    }

    /// Pattern dimension.
    pub fn dim(&self) -> usize {
        self.xi.nrows()
    }

    /// The underlying `d x m` matrix.
    pub fn matrix(&self) -> &Array2<f64> {
        &self.xi
    }

    /// A single pattern column.
    pub fn column(&self, mu: usize) -> Result<ArrayView1<'_, f64>> {
        if mu >= self.len() {
            return Err(Error::IndexOutOfRange {
                index: mu,
                len: self.len(),
            });
        }
        Ok(self.xi.column(mu))
    }

    /// Rescale every column to unit Euclidean norm.
    ///
    /// Fails with [`Error::ZeroVector`] if any column has zero norm.
    pub fn normalize_columns(mut self) -> Result<Self> {
        for mu in 0..self.xi.ncols() {
            let norm = self.xi.column(mu).dot(&self.xi.column(mu)).sqrt();
            if norm == 0.0 {
                return Err(Error::ZeroVector { index: mu });
            }
            self.xi.column_mut(mu).mapv_inplace(|v| v / norm);
        }
        Ok(self)
    }

    /// Keep only the first `k` patterns.
    pub fn truncate(mut self, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::EmptySelection);
        }
        let k = k.min(self.len());
        self.xi = self.xi.slice(ndarray::s![.., ..k]).to_owned();
        Ok(self)
    }
}

/// Sample `m` unit-norm patterns of dimension `d` from seeded Gaussian noise.
///
/// The generator is ChaCha8 seeded with `seed`; entries are drawn from the
/// standard normal, column by column in index order, then every column is
/// normalized. The result is a pure function of `(m, d, seed)`.
pub fn generate_synthetic(m: usize, d: usize, seed: u64) -> Result<PatternSet> {
    if m == 0 || d == 0 {
        return Err(Error::EmptySelection);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xi = Array2::zeros((d, m));
    for mu in 0..m {
        for i in 0..d {
            xi[(i, mu)] = rng.sample::<f64, _>(StandardNormal);
        }
    }
    PatternSet::from_columns(xi)?.normalize_columns()
}

/// Sample a single unit-norm query vector (same stream layout as
/// [`generate_synthetic`] with `m = 1`).
pub fn generate_query(d: usize, seed: u64) -> Result<Array1<f64>> {
    let set = generate_synthetic(1, d, seed)?;
    Ok(set.matrix().column(0).to_owned())
}

fn read_u32_be(bytes: &[u8], offset: usize) -> Result<u32> {
    let end = offset + 4;
    if bytes.len() < end {
        return Err(Error::TruncatedFile {
            needed: end,
            got: bytes.len(),
        });
    }
    Ok(u32::from_be_bytes([
        bytes[offset],
        bytes[offset + 1],
        bytes[offset + 2],
        bytes[offset + 3],
    ]))
}

/// Load an idx3 unsigned-byte image file as unit-normalized pattern columns.
///
/// The header is big-endian: magic `0x00000803`, image count, rows, cols.
/// Pixels are scaled to `[0, 1]` by dividing by 255 and each flattened image
/// is then normalized to unit Euclidean norm. `limit` keeps only the first
/// `min(limit, count)` images; images that are entirely zero fail with
/// [`Error::ZeroImage`].
pub fn load_idx(path: &Path, limit: Option<usize>) -> Result<PatternSet> {
    let bytes = std::fs::read(path)?;
    parse_idx(&bytes, limit)
}

/// Parse idx3 bytes; see [`load_idx`].
pub fn parse_idx(bytes: &[u8], limit: Option<usize>) -> Result<PatternSet> {
    let magic = read_u32_be(bytes, 0)?;
    if magic != IDX3_MAGIC {
        return Err(Error::BadMagic {
            expected: IDX3_MAGIC,
            got: magic,
        });
    }
    let count = read_u32_be(bytes, 4)? as usize;
    let rows = read_u32_be(bytes, 8)? as usize;
    let cols = read_u32_be(bytes, 12)? as usize;
    let take = match limit {
        Some(0) => return Err(Error::EmptySelection),
        Some(k) => k.min(count),
        None => count,
    };
    if take == 0 {
        return Err(Error::EmptySelection);
    }
    let d = rows * cols;
    if d == 0 {
        return Err(Error::EmptySelection);
    }
    let needed = 16 + take * d;
    if bytes.len() < needed {
        return Err(Error::TruncatedFile {
            needed,
            got: bytes.len(),
        });
    }
    let mut xi = Array2::zeros((d, take));
    for img in 0..take {
        let base = 16 + img * d;
        let mut norm_sq = 0.0;
        for px in 0..d {
            let v = bytes[base + px] as f64 / 255.0;
            xi[(px, img)] = v;
            norm_sq += v * v;
        }
        if norm_sq == 0.0 {
            return Err(Error::ZeroImage { index: img });
        }
        let norm = norm_sq.sqrt();
        for px in 0..d {
            xi[(px, img)] /= norm;
        }
    }
    PatternSet::from_columns(xi)
}

/// Serialize byte images as an idx3 file body. Intended for writing
/// fixtures that the idx loader can round-trip.
pub fn to_idx_bytes(rows: usize, cols: usize, images: &[Vec<u8>]) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.len() * rows * cols);
    out.extend_from_slice(&IDX3_MAGIC.to_be_bytes());
    out.extend_from_slice(&(images.len() as u32).to_be_bytes());
    out.extend_from_slice(&(rows as u32).to_be_bytes());
    out.extend_from_slice(&(cols as u32).to_be_bytes());
    for img in images {
        debug_assert_eq!(img.len(), rows * cols);
        out.extend_from_slice(img);
    }
    out
}

/// Generate a seeded idx3 file of 28x28 uniform-random byte images. Used as
/// a stand-in when no image dataset is on disk, so the full load path is
/// still exercised.
pub fn idx_like_fixture_bytes(count: usize, seed: u64) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut images = Vec::with_capacity(count);
    for _ in 0..count {
        let mut img = vec![0u8; 28 * 28];
        rng.fill(&mut img[..]);
        if img.iter().all(|&b| b == 0) {
            img[0] = 1;
        }
        images.push(img);
    }
    to_idx_bytes(28, 28, &images)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn synthetic_columns_are_unit_norm_and_deterministic() {
        let a = generate_synthetic(7, 13, 42).unwrap();
        let b = generate_synthetic(7, 13, 42).unwrap();
        assert_eq!(a.matrix(), b.matrix());
        for mu in 0..7 {
            let n = a.matrix().column(mu).dot(&a.matrix().column(mu));
            assert_abs_diff_eq!(n, 1.0, epsilon = 1e-12);
        }
        let c = generate_synthetic(7, 13, 43).unwrap();
        assert_ne!(a.matrix(), c.matrix());
    }

    #[test]
    fn synthetic_inner_products_average_near_zero() {
        // Independent Monte-Carlo check on the same stream: random unit
        // vectors in moderate dimension are near-orthogonal on average.
        let set = generate_synthetic(1000, 50, 1).unwrap();
        let gram = set.matrix().t().dot(set.matrix());
        let m = set.len();
        let mut sum = 0.0;
        let mut count = 0usize;
        for i in 0..m {
            for j in (i + 1)..m {
                sum += gram[(i, j)];
                count += 1;
            }
        }
        let mean = sum / count as f64;
        assert!(mean.abs() < 0.02, "mean off-diagonal inner product {mean}");
    }

    #[test]
    fn from_flat_is_column_major_per_pattern() {
        let set = PatternSet::from_flat(&[1.0, 2.0, 3.0, 4.0], 2, 2).unwrap();
        assert_eq!(set.matrix()[(0, 0)], 1.0);
        assert_eq!(set.matrix()[(1, 0)], 2.0);
        assert_eq!(set.matrix()[(0, 1)], 3.0);
        assert_eq!(set.matrix()[(1, 1)], 4.0);
    }

    #[test]
    fn zero_column_fails_normalization() {
        let xi = Array2::from_shape_vec((2, 2), vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        // Column 1 is the zero vector.
        let err = PatternSet::from_columns(xi)
            .unwrap()
            .normalize_columns()
            .unwrap_err();
        assert!(matches!(err, Error::ZeroVector { index: 1 }));
    }

    #[test]
    fn rejects_non_finite_entries() {
        let xi = Array2::from_shape_vec((1, 2), vec![1.0, f64::NAN]).unwrap();
        assert!(matches!(
            PatternSet::from_columns(xi),
            Err(Error::NonFinite)
        ));
    }

    #[test]
    fn fixture_bytes_parse_and_are_deterministic() {
        let a = idx_like_fixture_bytes(5, 9);
        let b = idx_like_fixture_bytes(5, 9);
        assert_eq!(a, b);
        let set = parse_idx(&a, None).unwrap();
        assert_eq!(set.len(), 5);
        assert_eq!(set.dim(), 784);
        let sub = parse_idx(&a, Some(3)).unwrap();
        assert_eq!(sub.len(), 3);
    }

    #[test]
    fn idx_roundtrip_and_normalization() {
        let images = vec![vec![0u8, 255, 0, 0], vec![255u8, 255, 0, 0]];
        let bytes = to_idx_bytes(2, 2, &images);
        let set = parse_idx(&bytes, None).unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set.dim(), 4);
        // First image has a single nonzero pixel, so it normalizes to a
        // coordinate vector.
        assert_abs_diff_eq!(set.matrix()[(1, 0)], 1.0, epsilon = 1e-12);
        // Second image splits mass evenly between two pixels.
        assert_abs_diff_eq!(
            set.matrix()[(0, 1)],
            std::f64::consts::FRAC_1_SQRT_2,
            epsilon = 1e-12
        );
    }

    #[test]
    fn idx_limit_takes_a_prefix() {
        let images: Vec<Vec<u8>> = (1..=5u8).map(|v| vec![v, 0]).collect();
        let bytes = to_idx_bytes(1, 2, &images);
        let all = parse_idx(&bytes, None).unwrap();
        let first3 = parse_idx(&bytes, Some(3)).unwrap();
        assert_eq!(first3.len(), 3);
        for mu in 0..3 {
            assert_eq!(
                all.matrix().column(mu).to_vec(),
                first3.matrix().column(mu).to_vec()
            );
        }
        // Limits beyond the file just take everything.
        assert_eq!(parse_idx(&bytes, Some(99)).unwrap().len(), 5);
    }

    #[test]
    fn idx_error_cases() {
        let good = to_idx_bytes(1, 2, &[vec![1, 2], vec![3, 4]]);

        let mut bad_magic = good.clone();
        bad_magic[3] = 0x01;
        assert!(matches!(
            parse_idx(&bad_magic, None),
            Err(Error::BadMagic {
                got: 0x0000_0801,
                ..
            })
        ));

        let truncated = &good[..good.len() - 1];
        assert!(matches!(
            parse_idx(truncated, None),
            Err(Error::TruncatedFile { .. })
        ));

        assert!(matches!(
            parse_idx(&good, Some(0)),
            Err(Error::EmptySelection)
        ));

        let zero_img = to_idx_bytes(1, 2, &[vec![0, 0]]);
        assert!(matches!(
            parse_idx(&zero_img, None),
            Err(Error::ZeroImage { index: 0 })
        ));
    }
}
