//! Linear-feature kernels over pattern space.
//!
//! A feature map sends a pattern `x` to `W^T x` (optionally rescaled to the
//! unit sphere), and the induced kernel is the inner product of two mapped
//! points. Retrieval and separation learning only ever touch patterns through
//! this kernel.

use crate::error::{Error, Result};
use crate::patterns::PatternSet;
use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Linear feature map `x -> W^T x` with optional output normalization.
///
/// `w` has shape `d x d_phi`. With `normalize` set (the default for trained
/// maps), features are rescaled to unit norm, so every kernel value lies in
/// `[-1, 1]`. With `normalize` off and `w` the identity, the kernel reduces
/// to the raw dot product of the classical model.
#[derive(Debug, Clone)]
pub struct FeatureMap {
    w: Array2<f64>,
    normalize: bool,
}

/// Per-pattern separation of a pattern set under a feature map.
#[derive(Debug, Clone)]
pub struct SeparationStats {
    /// `delta[mu] = K(xi_mu, xi_mu) - max_{nu != mu} K(xi_nu, xi_mu)`.
    pub delta: Vec<f64>,
    /// Smallest per-pattern separation.
    pub delta_min: f64,
    /// Half the smallest pairwise feature distance,
    /// `r_phi = min_{mu != nu} ||phi(xi_mu) - phi(xi_nu)|| / 2`.
    pub r_phi: f64,
}

/// Singular-value summary of the map, for rank-deficiency diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct Conditioning {
    pub sigma_min: f64,
    pub sigma_max: f64,
    /// True when `sigma_min / sigma_max < 1e-10` (or `sigma_max = 0`), in
    /// which case the feature map collapses directions and separations can
    /// degenerate.
    pub rank_deficient: bool,
}

impl FeatureMap {
    /// Wrap an explicit `d x d_phi` weight matrix.
    pub fn new(w: Array2<f64>, normalize: bool) -> Result<Self> {
        let (d, d_phi) = w.dim();
        if d == 0 || d_phi == 0 {
            return Err(Error::EmptySelection);
        }
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { w, normalize })
    }

    /// Identity map on `R^d` with output normalization off, so that the
    /// induced kernel is exactly the raw dot product.
    pub fn identity(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::EmptySelection);
        }
        Ok(Self {
            w: Array2::eye(d),
            normalize: false,
        })
    }

    /// Seeded Gaussian map scaled to unit Frobenius norm, with output
    /// normalization on. This is the standard initialization for separation
    /// learning. Requires `d_phi >= 2` (one-dimensional feature spheres hold
    /// only two distinct points).
    pub fn random(d: usize, d_phi: usize, seed: u64) -> Result<Self> {
        if d == 0 {
            return Err(Error::EmptySelection);
        }
        if d_phi < 2 {
            return Err(Error::OutOfDomain {
                value: d_phi as f64,
                domain: "feature dimension >= 2",
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w = Array2::zeros((d, d_phi));
        for i in 0..d {
            for j in 0..d_phi {
                w[(i, j)] = rng.sample::<f64, _>(StandardNormal);
            }
        }
        let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::ZeroMatrix);
        }
        w.mapv_inplace(|v| v / norm);
        Ok(Self { w, normalize: true })
    }

    /// Same map with the output-normalization flag replaced.
    pub fn with_normalize(mut self, normalize: bool) -> Self {
        self.normalize = normalize;
        self
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.w
    }

    pub fn normalizes(&self) -> bool {
        self.normalize
    }

    /// Input dimension `d`.
    pub fn dim_in(&self) -> usize {
        self.w.nrows()
    }

    /// Feature dimension `d_phi`.
    pub fn dim_out(&self) -> usize {
        self.w.ncols()
    }

    /// Map one vector to feature space.
    pub fn phi(&self, x: &ArrayView1<f64>) -> Result<Array1<f64>> {
        if x.len() != self.dim_in() {
            return Err(Error::DimensionMismatch {
                expected: self.dim_in(),
                got: x.len(),
            });
        }
        let mut f = self.w.t().dot(x);
        if self.normalize {
            let norm = f.dot(&f).sqrt();
            if norm == 0.0 {
                return Err(Error::ZeroVector { index: 0 });
            }
            f.mapv_inplace(|v| v / norm);
        }
        Ok(f)
    }

    /// Map every pattern; returns the `d_phi x m` feature matrix.
    pub fn features(&self, patterns: &PatternSet) -> Result<Array2<f64>> {
        if patterns.dim() != self.dim_in() {
            return Err(Error::DimensionMismatch {
                expected: self.dim_in(),
                got: patterns.dim(),
            });
        }
        let mut f = self.w.t().dot(patterns.matrix());
        if self.normalize {
            for mu in 0..f.ncols() {
                let norm = f.column(mu).dot(&f.column(mu)).sqrt();
                if norm == 0.0 {
                    return Err(Error::ZeroVector { index: mu });
                }
                f.column_mut(mu).mapv_inplace(|v| v / norm);
            }
        }
        Ok(f)
    }

    /// Kernel value `K(a, b) = <phi(a), phi(b)>`.
    pub fn kernel(&self, a: &ArrayView1<f64>, b: &ArrayView1<f64>) -> Result<f64> {
        Ok(self.phi(a)?.dot(&self.phi(b)?))
    }

    /// Kernel values of one query against every stored pattern.
    pub fn kernel_scores(&self, patterns: &PatternSet, x: &ArrayView1<f64>) -> Result<Vec<f64>> {
        let feats = self.features(patterns)?;
        let fx = self.phi(x)?;
        Ok(feats.t().dot(&fx).to_vec())
    }

    /// The `m x m` kernel matrix of a pattern set.
    pub fn gram(&self, patterns: &PatternSet) -> Result<Array2<f64>> {
        let feats = self.features(patterns)?;
        Ok(feats.t().dot(&feats))
    }

    /// Separation statistics of a pattern set under this map.
    ///
    /// Needs at least two patterns. When output normalization is on, the two
    /// views are linked by `r_phi = sqrt(delta_min / 2)`.
    pub fn separation_stats(&self, patterns: &PatternSet) -> Result<SeparationStats> {
        let m = patterns.len();
        if m < 2 {
            return Err(Error::SinglePattern);
        }
        let gram = self.gram(patterns)?;
        let mut delta = Vec::with_capacity(m);
        for mu in 0..m {
            let own = gram[(mu, mu)];
            let mut worst = f64::NEG_INFINITY;
            for nu in 0..m {
                if nu != mu {
                    worst = worst.max(gram[(nu, mu)]);
                }
            }
            delta.push(own - worst);
        }
        let delta_min = delta.iter().cloned().fold(f64::INFINITY, f64::min);
        let mut min_dist_sq = f64::INFINITY;
        for mu in 0..m {
            for nu in (mu + 1)..m {
                let dist_sq = gram[(mu, mu)] + gram[(nu, nu)] - 2.0 * gram[(mu, nu)];
                min_dist_sq = min_dist_sq.min(dist_sq.max(0.0));
            }
        }
        let r_phi = 0.5 * min_dist_sq.sqrt();
        Ok(SeparationStats {
            delta,
            delta_min,
            r_phi,
        })
    }

    /// Singular-value range of `W`, computed from the eigenvalues of the
    /// small `d_phi x d_phi` Gram matrix `W^T W`.
    pub fn conditioning(&self) -> Conditioning {
        let gram = self.w.t().dot(&self.w);
        let eigs = jacobi_eigenvalues(&gram);
        let max = eigs.iter().cloned().fold(0.0f64, f64::max).max(0.0);
        let min = eigs.iter().cloned().fold(f64::INFINITY, f64::min).max(0.0);
        // If d < d_phi the map cannot have full column rank.
        let forced = self.w.nrows() < self.w.ncols();
        let sigma_max = max.sqrt();
        let sigma_min = if forced { 0.0 } else { min.sqrt() };
        let rank_deficient = sigma_max == 0.0 || sigma_min / sigma_max < 1e-10;
        Conditioning {
            sigma_min,
            sigma_max,
            rank_deficient,
        }
    }
}

/// Eigenvalues of a small symmetric matrix by the cyclic Jacobi method.
fn jacobi_eigenvalues(sym: &Array2<f64>) -> Vec<f64> {
    let n = sym.nrows();
    debug_assert_eq!(n, sym.ncols());
    let mut a = sym.clone();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[(i, j)] * a[(i, j)];
            }
        }
        if off.sqrt() < 1e-14 * (1.0 + a.diag().iter().map(|v| v.abs()).fold(0.0, f64::max)) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    1.0 / (theta - (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    a.diag().to_vec()
}
