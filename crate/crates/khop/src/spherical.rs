//! Spherical codes: analytic constructions and a brute-force optimizer.
//!
//! A code is a set of unit vectors; its quality is the largest pairwise
//! inner product (smaller is better). The optimizer descends a smoothed
//! maximum with a decreasing temperature schedule, which reliably lands on
//! the known optima for small instances.

use crate::error::{Error, Result};
use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Unit vectors stored as the columns of a `d x n` matrix.
#[derive(Debug, Clone)]
pub struct SphericalCode {
    points: Array2<f64>,
}

impl SphericalCode {
    /// Wrap a matrix of code points, normalizing every column.
    pub fn new(points: Array2<f64>) -> Result<Self> {
        let (d, n) = points.dim();
        if d == 0 || n == 0 {
            return Err(Error::EmptySelection);
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let mut points = points;
        for i in 0..n {
            let norm = points.column(i).dot(&points.column(i)).sqrt();
            if norm == 0.0 {
                return Err(Error::ZeroVector { index: i });
            }
            points.column_mut(i).mapv_inplace(|v| v / norm);
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &Array2<f64> {
        &self.points
    }

    /// Ambient dimension.
    pub fn dim(&self) -> usize {
        self.points.nrows()
    }

    /// Number of code points.
    pub fn len(&self) -> usize {
        self.points.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.points.ncols() == 0
    }

    /// Largest pairwise inner product (needs at least two points).
    pub fn max_cross_correlation(&self) -> Result<f64> {
        let n = self.len();
        if n < 2 {
            return Err(Error::SinglePoint);
        }
        let gram = self.points.t().dot(&self.points);
        let mut worst = f64::NEG_INFINITY;
        for i in 0..n {
            for j in (i + 1)..n {
                worst = worst.max(gram[(i, j)]);
            }
        }
        Ok(worst)
    }
}

/// The regular simplex code: `d + 1` unit vectors in `R^d` with all pairwise
/// inner products equal to `-1/d`.
///
/// Built from the centered standard basis of `R^(d+1)`, rotated into the
/// hyperplane orthogonal to the all-ones direction and projected down.
pub fn simplex_code(d: usize) -> Result<SphericalCode> {
    if d == 0 {
        return Err(Error::EmptySelection);
    }
    let n = d + 1;
    // Householder vector sending ones/sqrt(n) to e_n.
    let mut k: Vec<f64> = vec![1.0 / (n as f64).sqrt(); n];
    k[n - 1] -= 1.0;
    let k_sq: f64 = k.iter().map(|v| v * v).sum();
    let mut points = Array2::zeros((d, n));
    for i in 0..n {
        // v_i = e_i - ones/n, then reflected: v - 2 <k, v> k / <k, k>.
        let mut v: Vec<f64> = vec![-1.0 / n as f64; n];
        v[i] += 1.0;
        let dot: f64 = k.iter().zip(&v).map(|(a, b)| a * b).sum();
        for (vj, kj) in v.iter_mut().zip(&k) {
            *vj -= 2.0 * dot * kj / k_sq;
        }
        // The reflected vector lies in the span of the first d coordinates.
        for row in 0..d {
            points[(row, i)] = v[row];
        }
    }
    SphericalCode::new(points)
}

/// The cross-polytope code: the `2d` signed standard basis vectors of `R^d`.
/// Its largest inner product is `0` for `d >= 2` (and `-1` for `d = 1`).
pub fn cross_polytope_code(d: usize) -> Result<SphericalCode> {
    if d == 0 {
        return Err(Error::EmptySelection);
    }
    let n = 2 * d;
    let mut points = Array2::zeros((d, n));
    for i in 0..d {
        points[(i, 2 * i)] = 1.0;
        points[(i, 2 * i + 1)] = -1.0;
    }
    SphericalCode::new(points)
}

/// Settings for [`brute_force_optimal_code`].
#[derive(Debug, Clone, Copy)]
pub struct CodeSearchConfig {
    /// Independent seeded starts; the best final code wins.
    pub restarts: usize,
    /// Total gradient steps per start, split evenly across the temperature
    /// schedule.
    pub iters: usize,
    pub seed: u64,
}

impl Default for CodeSearchConfig {
    fn default() -> Self {
        Self {
            restarts: 20,
            iters: 400,
            seed: 0,
        }
    }
}

const TEMPERATURES: [f64; 4] = [0.3, 0.1, 0.03, 0.01];
/// Step size decays geometrically from `STEP_SIZE` to `STEP_FLOOR` over a
/// restart: large early moves escape bad starts, and the shrinking tail
/// stops the sharp low-temperature objective from oscillating between
/// near-worst pairs.
const STEP_SIZE: f64 = 0.8;
const STEP_FLOOR: f64 = 0.01;

/// Search for a code of `n` points in `R^d` minimizing the largest pairwise
/// inner product.
///
/// Each restart descends the smoothed maximum
/// `tau * log sum_{i<j} exp(<c_i, c_j> / tau)` with the temperature annealed
/// over [`TEMPERATURES`], renormalizing the points after every step. The
/// whole search is a pure function of the configuration (restart `r` uses
/// seed `seed + r`), and the best code by true max correlation is returned
/// together with that correlation.
pub fn brute_force_optimal_code(
    d: usize,
    n: usize,
    cfg: &CodeSearchConfig,
) -> Result<(SphericalCode, f64)> {
    if d == 0 {
        return Err(Error::EmptySelection);
    }
    if n < 2 {
        return Err(Error::SinglePoint);
    }
    if cfg.restarts == 0 || cfg.iters == 0 {
        return Err(Error::OutOfDomain {
            value: 0.0,
            domain: "restarts >= 1 and iters >= 1",
        });
    }
    let per_stage = (cfg.iters / TEMPERATURES.len()).max(1);
    let mut best: Option<(SphericalCode, f64)> = None;

    for r in 0..cfg.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(r as u64));
        let mut c = Array2::zeros((d, n));
        for j in 0..n {
            loop {
                for i in 0..d {
                    c[(i, j)] = rng.sample::<f64, _>(StandardNormal);
                }
                let norm = c.column(j).dot(&c.column(j)).sqrt();
                if norm > 0.0 {
                    c.column_mut(j).mapv_inplace(|v| v / norm);
                    break;
                }
            }
        }

        let total_steps = per_stage * TEMPERATURES.len();
        let mut step_index = 0usize;
        for &tau in &TEMPERATURES {
            for _ in 0..per_stage {
                let frac = step_index as f64 / (total_steps - 1).max(1) as f64;
                let eta = STEP_SIZE * (STEP_FLOOR / STEP_SIZE).powf(frac);
                step_index += 1;
                let gram = c.t().dot(&c);
                // Pair weights: softmax over the upper triangle of gram/tau.
                let mut max_s = f64::NEG_INFINITY;
                for i in 0..n {
                    for j in (i + 1)..n {
                        max_s = max_s.max(gram[(i, j)]);
                    }
                }
                let mut z = 0.0;
                let mut q = Array2::zeros((n, n));
                for i in 0..n {
                    for j in (i + 1)..n {
                        let e = ((gram[(i, j)] - max_s) / tau).exp();
                        q[(i, j)] = e;
                        q[(j, i)] = e;
                        z += e;
                    }
                }
                q.mapv_inplace(|v| v / z);
                // grad_i = sum_{j != i} q_ij c_j; move against it and
                // project back to the sphere.
                let grad = c.dot(&q);
                for j in 0..n {
                    let mut col = c.column(j).to_owned();
                    col.zip_mut_with(&grad.column(j), |a, g| *a -= eta * g);
                    let norm = col.dot(&col).sqrt();
                    if norm > 0.0 {
                        col.mapv_inplace(|v| v / norm);
                        c.column_mut(j).assign(&col);
                    }
                }
            }
        }

        let code = SphericalCode::new(c)?;
        let rho = code.max_cross_correlation()?;
        let better = match &best {
            None => true,
            Some((_, best_rho)) => rho < *best_rho,
        };
        if better {
            best = Some((code, rho));
        }
    }
    Ok(best.expect("at least one restart ran"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn simplex_has_constant_negative_correlation() {
        for d in 1..=8usize {
            let code = simplex_code(d).unwrap();
            assert_eq!(code.len(), d + 1);
            assert_eq!(code.dim(), d);
            let gram = code.points().t().dot(code.points());
            let want = -1.0 / d as f64;
            for i in 0..code.len() {
                assert_abs_diff_eq!(gram[(i, i)], 1.0, epsilon = 1e-12);
                for j in (i + 1)..code.len() {
                    assert_abs_diff_eq!(gram[(i, j)], want, epsilon = 1e-10);
                }
            }
        }
    }

    #[test]
    fn cross_polytope_correlations() {
        let code = cross_polytope_code(3).unwrap();
        assert_eq!(code.len(), 6);
        assert_abs_diff_eq!(code.max_cross_correlation().unwrap(), 0.0, epsilon = 1e-15);
        let line = cross_polytope_code(1).unwrap();
        assert_eq!(line.len(), 2);
        assert_abs_diff_eq!(line.max_cross_correlation().unwrap(), -1.0, epsilon = 1e-15);
    }

    #[test]
    fn single_point_has_no_correlation() {
        let code =
            SphericalCode::new(Array2::from_shape_vec((2, 1), vec![1.0, 0.0]).unwrap()).unwrap();
        assert!(matches!(
            code.max_cross_correlation(),
            Err(Error::SinglePoint)
        ));
    }

    #[test]
    fn search_is_deterministic_given_the_seed() {
        let cfg = CodeSearchConfig {
            restarts: 3,
            iters: 80,
            seed: 5,
        };
        let (a, rho_a) = brute_force_optimal_code(2, 3, &cfg).unwrap();
        let (b, rho_b) = brute_force_optimal_code(2, 3, &cfg).unwrap();
        assert_eq!(rho_a, rho_b);
        assert_eq!(a.points(), b.points());
    }

    #[test]
    fn search_finds_antipodal_pair() {
        let cfg = CodeSearchConfig {
            restarts: 5,
            iters: 200,
            seed: 0,
        };
        let (_, rho) = brute_force_optimal_code(2, 2, &cfg).unwrap();
        assert!((rho + 1.0).abs() < 1e-2, "rho = {rho}");
    }

    #[test]
    fn search_finds_triangle_in_the_plane() {
        // Three points on a circle: optimum is the equilateral triangle at
        // cos(120 deg) = -1/2.
        let cfg = CodeSearchConfig {
            restarts: 8,
            iters: 300,
            seed: 1,
        };
        let (_, rho) = brute_force_optimal_code(2, 3, &cfg).unwrap();
        assert!((rho + 0.5).abs() < 1e-2, "rho = {rho}");
    }
}
