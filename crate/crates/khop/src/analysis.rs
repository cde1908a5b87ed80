//! Metastable-state statistics, energy landscapes, and basins of attraction.

use crate::error::{Error, Result};
use crate::hopfield;
use crate::kernel::FeatureMap;
use crate::norms::{self, NormKind};
use crate::patterns::PatternSet;
use ndarray::Array1;
use rayon::prelude::*;

/// Number of states a converged weight vector effectively mixes.
///
/// For the sparse maps the support is exact: entries are counted when they
/// are strictly positive. For softmax every entry is positive, so entries
/// are counted when they reach `threshold`. The input must lie on the
/// probability simplex (entries `>= -1e-12`, sum within `1e-9` of one).
///
/// The count can be zero for softmax when the mass is spread below the
/// threshold over many patterns.
pub fn metastable_size(weights: &[f64], kind: NormKind, threshold: f64) -> Result<usize> {
    if weights.is_empty() {
        return Err(Error::EmptySelection);
    }
    if weights.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::OutOfDomain {
            value: threshold,
            domain: "0 < threshold < 1",
        });
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > 1e-9 || weights.iter().any(|&v| v < -1e-12) {
        return Err(Error::NotOnSimplex);
    }
    let count = if kind.is_sparse() {
        weights.iter().filter(|&&v| v > 0.0).count()
    } else {
        weights.iter().filter(|&&v| v >= threshold).count()
    };
    Ok(count)
}

/// Histogram of metastable support sizes over a batch of queries.
///
/// Sizes 1 through 9 get their own buckets; everything else (including the
/// degenerate softmax case of support zero) lands in the overflow bucket,
/// reported as `10+`.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportHistogram {
    /// `counts[k]` holds support size `k + 1` for `k < 9`; `counts[9]` is
    /// the overflow bucket.
    pub counts: [usize; 10],
    pub total: usize,
}

impl SupportHistogram {
    pub fn from_sizes(sizes: &[usize]) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::EmptySelection);
        }
        let mut counts = [0usize; 10];
        for &s in sizes {
            match s {
                1..=9 => counts[s - 1] += 1,
                _ => counts[9] += 1,
            }
        }
        Ok(Self {
            counts,
            total: sizes.len(),
        })
    }

    /// Percentage of queries in the bucket for support size `k` (1-based;
    /// `k = 10` addresses the overflow bucket).
    pub fn percent(&self, k: usize) -> f64 {
        let idx = k.clamp(1, 10) - 1;
        100.0 * self.counts[idx] as f64 / self.total as f64
    }

    /// `(label, percent)` rows in bucket order: "1" through "9", then "10+".
    pub fn rows(&self) -> Vec<(String, f64)> {
        (1..=10)
            .map(|k| {
                let label = if k == 10 {
                    "10+".to_string()
                } else {
                    k.to_string()
                };
                (label, self.percent(k))
            })
            .collect()
    }
}

/// Settings for the metastable-distribution protocol.
#[derive(Debug, Clone, Copy)]
pub struct MetaConfig {
    pub beta: f64,
    pub norm: NormKind,
    /// Fixed number of update steps per query (no early stopping).
    pub update_iters: usize,
    /// Softmax support threshold.
    pub threshold: f64,
}

/// Run every query for a fixed number of updates and histogram the support
/// sizes of the final weight vectors.
pub fn metastable_distribution(
    patterns: &PatternSet,
    phi: Option<&FeatureMap>,
    cfg: &MetaConfig,
    queries: &PatternSet,
) -> Result<SupportHistogram> {
    if cfg.update_iters == 0 {
        return Err(Error::OutOfDomain {
            value: 0.0,
            domain: "update_iters >= 1",
        });
    }
    if queries.dim() != patterns.dim() {
        return Err(Error::DimensionMismatch {
            expected: patterns.dim(),
            got: queries.dim(),
        });
    }
    // Features of the stored patterns are query-independent; computing them
    // once makes the batch linear in the number of queries.
    let feats = match phi {
        Some(map) => Some(map.features(patterns)?),
        None => None,
    };
    let sizes: Vec<Result<usize>> = (0..queries.len())
        .into_par_iter()
        .map(|q| {
            let mut x = queries.matrix().column(q).to_owned();
            let mut weights = Vec::new();
            for _ in 0..cfg.update_iters {
                let scores: Vec<f64> = match (phi, &feats) {
                    (Some(map), Some(f)) => {
                        let fx = map.phi(&x.view())?;
                        f.t().dot(&fx).to_vec()
                    }
                    _ => patterns.matrix().t().dot(&x).to_vec(),
                };
                let z: Vec<f64> = scores.into_iter().map(|s| cfg.beta * s).collect();
                let p = norms::apply(cfg.norm, &z)?;
                x = patterns.matrix().dot(&Array1::from_vec(p.clone()));
                weights = p;
            }
            metastable_size(&weights, cfg.norm, cfg.threshold)
        })
        .collect();
    let sizes = sizes.into_iter().collect::<Result<Vec<usize>>>()?;
    SupportHistogram::from_sizes(&sizes)
}

/// A rectangular grid over the plane, endpoints included.
#[derive(Debug, Clone, Copy)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub y_min: f64,
    pub y_max: f64,
    pub ny: usize,
}

impl GridSpec {
    /// A square grid over `[lo, hi]^2` with `n` points per side.
    pub fn square(lo: f64, hi: f64, n: usize) -> Self {
        Self {
            x_min: lo,
            x_max: hi,
            nx: n,
            y_min: lo,
            y_max: hi,
            ny: n,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.nx < 2 || self.ny < 2 {
            return Err(Error::OutOfDomain {
                value: self.nx.min(self.ny) as f64,
                domain: "grid resolution >= 2",
            });
        }
        if !(self.x_max > self.x_min && self.y_max > self.y_min) {
            return Err(Error::OutOfDomain {
                value: self.x_max - self.x_min,
                domain: "grid extent > 0",
            });
        }
        Ok(())
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + (self.x_max - self.x_min) * i as f64 / (self.nx - 1) as f64
    }

    pub fn y(&self, j: usize) -> f64 {
        self.y_min + (self.y_max - self.y_min) * j as f64 / (self.ny - 1) as f64
    }
}

/// Values sampled over a [`GridSpec`], stored row-major with `y` as the
/// outer (row) index.
#[derive(Debug, Clone)]
pub struct GridResult {
    pub grid: GridSpec,
    pub values: Vec<f64>,
}

impl GridResult {
    pub fn value(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.grid.nx + ix]
    }

    /// `(x, y, value)` triples in storage order.
    pub fn cells(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        (0..self.grid.ny).flat_map(move |iy| {
            (0..self.grid.nx).map(move |ix| (self.grid.x(ix), self.grid.y(iy), self.value(ix, iy)))
        })
    }
}

fn require_planar(patterns: &PatternSet) -> Result<()> {
    if patterns.dim() != 2 {
        return Err(Error::NotPlanar { d: patterns.dim() });
    }
    Ok(())
}

/// Energy of the (kernelized) model at every grid point. Only defined for
/// two-dimensional pattern spaces.
pub fn energy_landscape(
    patterns: &PatternSet,
    phi: Option<&FeatureMap>,
    beta: f64,
    grid: &GridSpec,
) -> Result<GridResult> {
    require_planar(patterns)?;
    grid.validate()?;
    let values: Vec<Result<f64>> = (0..grid.nx * grid.ny)
        .into_par_iter()
        .map(|idx| {
            let (iy, ix) = (idx / grid.nx, idx % grid.nx);
            let x = ndarray::array![grid.x(ix), grid.y(iy)];
            hopfield::energy(patterns, phi, beta, &x.view())
        })
        .collect();
    let values = values.into_iter().collect::<Result<Vec<f64>>>()?;
    Ok(GridResult {
        grid: *grid,
        values,
    })
}

/// Settings for basin-of-attraction maps.
#[derive(Debug, Clone, Copy)]
pub struct BasinConfig {
    pub beta: f64,
    pub norm: NormKind,
    pub update_iters: usize,
    /// A trajectory is attributed to a pattern when its endpoint lies within
    /// this distance of that pattern (and of no other).
    pub eps: f64,
}

/// Label every grid cell with the 1-based index of the pattern its
/// trajectory converges to, or `0` when the endpoint is not within `eps` of
/// exactly one pattern.
pub fn basins(
    patterns: &PatternSet,
    phi: Option<&FeatureMap>,
    cfg: &BasinConfig,
    grid: &GridSpec,
) -> Result<GridResult> {
    require_planar(patterns)?;
    grid.validate()?;
    if !(cfg.eps > 0.0 && cfg.eps.is_finite()) {
        return Err(Error::OutOfDomain {
            value: cfg.eps,
            domain: "eps > 0",
        });
    }
    if cfg.update_iters == 0 {
        return Err(Error::OutOfDomain {
            value: 0.0,
            domain: "update_iters >= 1",
        });
    }
    let values: Vec<Result<f64>> = (0..grid.nx * grid.ny)
        .into_par_iter()
        .map(|idx| {
            let (iy, ix) = (idx / grid.nx, idx % grid.nx);
            let mut x = ndarray::array![grid.x(ix), grid.y(iy)];
            for _ in 0..cfg.update_iters {
                let (next, _) =
                    hopfield::update_step(patterns, phi, cfg.beta, cfg.norm, &x.view())?;
                x = next;
            }
            let mut label = 0usize;
            let mut hits = 0usize;
            for mu in 0..patterns.len() {
                let dist = hopfield::retrieval_error(&x.view(), &patterns.matrix().column(mu))?;
                if dist <= cfg.eps {
                    hits += 1;
                    label = mu + 1;
                }
            }
            Ok(if hits == 1 { label as f64 } else { 0.0 })
        })
        .collect();
    let values = values.into_iter().collect::<Result<Vec<f64>>>()?;
    Ok(GridResult {
        grid: *grid,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patterns::generate_synthetic;
    use approx::assert_abs_diff_eq;
    use ndarray::Array2;

    #[test]
    fn support_counting_by_kind() {
        let sparse = [0.6, 0.4, 0.0];
        assert_eq!(
            metastable_size(&sparse, NormKind::Sparsemax, 0.01).unwrap(),
            2
        );
        let soft = [0.995, 0.005];
        assert_eq!(metastable_size(&soft, NormKind::Softmax, 0.01).unwrap(), 1);
        // Everything below the threshold: support 0 is possible for softmax.
        let spread = vec![1.0 / 200.0; 200];
        assert_eq!(
            metastable_size(&spread, NormKind::Softmax, 0.01).unwrap(),
            0
        );
        assert_eq!(
            metastable_size(&spread, NormKind::Sparsemax, 0.01).unwrap(),
            200
        );
    }

    #[test]
    fn support_rejects_non_simplex_input() {
        assert!(matches!(
            metastable_size(&[0.7, 0.7], NormKind::Softmax, 0.01),
            Err(Error::NotOnSimplex)
        ));
        assert!(matches!(
            metastable_size(&[1.5, -0.5], NormKind::Softmax, 0.01),
            Err(Error::NotOnSimplex)
        ));
        assert!(matches!(
            metastable_size(&[1.0], NormKind::Softmax, 0.0),
            Err(Error::OutOfDomain { .. })
        ));
    }

    #[test]
    fn histogram_buckets_and_percentages() {
        let sizes = vec![1, 1, 2, 9, 10, 37, 0];
        let h = SupportHistogram::from_sizes(&sizes).unwrap();
        assert_eq!(h.total, 7);
        assert_eq!(h.counts[0], 2);
        assert_eq!(h.counts[1], 1);
        assert_eq!(h.counts[8], 1);
        // 10, 37 and the degenerate 0 all overflow.
        assert_eq!(h.counts[9], 3);
        assert_abs_diff_eq!(h.percent(1), 200.0 / 7.0, epsilon = 1e-12);
        let total: f64 = h.rows().iter().map(|(_, p)| p).sum();
        assert_abs_diff_eq!(total, 100.0, epsilon = 1e-9);
        assert_eq!(h.rows()[9].0, "10+");
    }

    #[test]
    fn distribution_concentrates_at_high_beta() {
        // At very high beta with softmax, every query snaps to one pattern.
        let set = generate_synthetic(6, 4, 1).unwrap();
        let queries = generate_synthetic(50, 4, 2).unwrap();
        let cfg = MetaConfig {
            beta: 60.0,
            norm: NormKind::Softmax,
            update_iters: 10,
            threshold: 0.01,
        };
        let h = metastable_distribution(&set, None, &cfg, &queries).unwrap();
        assert_eq!(h.counts[0], 50, "histogram: {:?}", h.counts);
    }

    #[test]
    fn distribution_is_deterministic() {
        let set = generate_synthetic(5, 3, 3).unwrap();
        let queries = generate_synthetic(40, 3, 4).unwrap();
        let cfg = MetaConfig {
            beta: 2.0,
            norm: NormKind::Sparsemax,
            update_iters: 5,
            threshold: 0.01,
        };
        let a = metastable_distribution(&set, None, &cfg, &queries).unwrap();
        let b = metastable_distribution(&set, None, &cfg, &queries).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn landscape_needs_planar_patterns() {
        let set = generate_synthetic(3, 4, 0).unwrap();
        let grid = GridSpec::square(-1.0, 1.0, 5);
        assert!(matches!(
            energy_landscape(&set, None, 1.0, &grid),
            Err(Error::NotPlanar { d: 4 })
        ));
    }

    #[test]
    fn landscape_grid_layout_and_symmetry() {
        // Symmetric antipodal patterns give an energy field symmetric under
        // point reflection: E(x) = E(-x).
        let xi = Array2::from_shape_vec((2, 2), vec![1.0, -1.0, 0.0, 0.0]).unwrap();
        let set = PatternSet::from_columns(xi).unwrap();
        let grid = GridSpec::square(-1.0, 1.0, 9);
        let out = energy_landscape(&set, None, 2.0, &grid).unwrap();
        assert_eq!(out.values.len(), 81);
        for ix in 0..9 {
            for iy in 0..9 {
                let a = out.value(ix, iy);
                let b = out.value(8 - ix, 8 - iy);
                assert_abs_diff_eq!(a, b, epsilon = 1e-12);
            }
        }
        // Check one cell against the scalar energy function.
        let x = ndarray::array![grid.x(3), grid.y(7)];
        let direct = hopfield::mhm_energy(&set, 2.0, &x.view()).unwrap();
        assert_abs_diff_eq!(out.value(3, 7), direct, epsilon = 1e-15);
    }

    #[test]
    fn basins_partition_a_symmetric_instance() {
        let xi = Array2::from_shape_vec((2, 2), vec![1.0, -1.0, 0.0, 0.0]).unwrap();
        let set = PatternSet::from_columns(xi).unwrap();
        let grid = GridSpec::square(-1.2, 1.2, 13);
        let cfg = BasinConfig {
            beta: 30.0,
            norm: NormKind::Softmax,
            update_iters: 20,
            eps: 0.05,
        };
        let out = basins(&set, None, &cfg, &grid).unwrap();
        // Points with x > 0 flow to pattern 1, x < 0 to pattern 2.
        for iy in 0..13 {
            for ix in 0..13 {
                let x = grid.x(ix);
                let label = out.value(ix, iy);
                if x > 0.1 {
                    assert_eq!(label, 1.0, "at ({}, {})", x, grid.y(iy));
                } else if x < -0.1 {
                    assert_eq!(label, 2.0, "at ({}, {})", x, grid.y(iy));
                }
            }
        }
        // The separating line x = 0 maps to the unstable mixture, which is
        // not within eps of either pattern.
        assert_eq!(out.value(6, 6), 0.0);
    }
}
