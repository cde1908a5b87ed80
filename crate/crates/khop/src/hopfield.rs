//! Retrieval dynamics and energy functions.
//!
//! One update maps the state to a convex combination of the stored patterns,
//! weighted by the normalized (scaled) kernel scores:
//!
//! ```text
//! p = norm(beta * K(Xi, x)),    x' = Xi * p.
//! ```
//!
//! Without a feature map the kernel is the raw dot product and the energy is
//! the classical log-sum-exp form; with one, scores and energy go through the
//! kernel instead.

use crate::error::{Error, Result};
use crate::kernel::FeatureMap;
use crate::norms::{self, NormKind};
use crate::patterns::PatternSet;
use ndarray::{Array1, ArrayView1};

/// Log-sum-exp with max subtraction.
pub(crate) fn logsumexp(z: &[f64]) -> f64 {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    m + z.iter().map(|&v| (v - m).exp()).sum::<f64>().ln()
}

fn check_state(patterns: &PatternSet, beta: f64, x: &ArrayView1<f64>) -> Result<()> {
    if beta <= 0.0 || !beta.is_finite() {
        return Err(Error::OutOfDomain {
            value: beta,
            domain: "beta > 0",
        });
    }
    if x.len() != patterns.dim() {
        return Err(Error::DimensionMismatch {
            expected: patterns.dim(),
            got: x.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(())
}

/// Raw kernel scores of the state against every pattern: `K(xi_mu, x)`.
fn scores(
    patterns: &PatternSet,
    phi: Option<&FeatureMap>,
    x: &ArrayView1<f64>,
) -> Result<Vec<f64>> {
    match phi {
        None => Ok(patterns.matrix().t().dot(x).to_vec()),
        Some(map) => map.kernel_scores(patterns, x),
    }
}

/// One retrieval update. Returns the next state and the simplex weights that
/// produced it.
pub fn update_step(
    patterns: &PatternSet,
    phi: Option<&FeatureMap>,
    beta: f64,
    norm: NormKind,
    x: &ArrayView1<f64>,
) -> Result<(Array1<f64>, Vec<f64>)> {
    check_state(patterns, beta, x)?;
    let z: Vec<f64> = scores(patterns, phi, x)?
        .into_iter()
        .map(|s| beta * s)
        .collect();
    let p = norms::apply(norm, &z)?;
    let weights = Array1::from_vec(p.clone());
    let next = patterns.matrix().dot(&weights);
    Ok((next, p))
}

/// Energy of the classical model:
/// `E(x) = <x, x> / 2 - logsumexp(beta * Xi^T x) / beta`.
pub fn mhm_energy(patterns: &PatternSet, beta: f64, x: &ArrayView1<f64>) -> Result<f64> {
    check_state(patterns, beta, x)?;
    let z: Vec<f64> = patterns
        .matrix()
        .t()
        .dot(x)
        .iter()
        .map(|s| beta * s)
        .collect();
    Ok(0.5 * x.dot(x) - logsumexp(&z) / beta)
}

/// Energy of the kernelized model:
/// `E(x) = K(x, x) / 2 - logsumexp(beta * K(Xi, x)) / beta`.
pub fn khm_energy(
    patterns: &PatternSet,
    phi: &FeatureMap,
    beta: f64,
    x: &ArrayView1<f64>,
) -> Result<f64> {
    check_state(patterns, beta, x)?;
    let own = phi.kernel(x, x)?;
    let z: Vec<f64> = phi
        .kernel_scores(patterns, x)?
        .into_iter()
        .map(|s| beta * s)
        .collect();
    Ok(0.5 * own - logsumexp(&z) / beta)
}

/// Energy under an optional feature map (kernelized when present).
pub fn energy(
    patterns: &PatternSet,
    phi: Option<&FeatureMap>,
    beta: f64,
    x: &ArrayView1<f64>,
) -> Result<f64> {
    match phi {
        None => mhm_energy(patterns, beta, x),
        Some(map) => khm_energy(patterns, map, beta, x),
    }
}

/// Settings for iterated retrieval.
#[derive(Debug, Clone, Copy)]
pub struct RetrievalConfig {
    pub beta: f64,
    pub norm: NormKind,
    /// Maximum number of update steps (at least one).
    pub max_iters: usize,
    /// Convergence threshold on `||x_{t+1} - x_t||`.
    pub tol: f64,
}

impl RetrievalConfig {
    pub fn new(beta: f64) -> Self {
        Self {
            beta,
            norm: NormKind::Softmax,
            max_iters: 50,
            tol: 1e-8,
        }
    }

    pub fn norm(mut self, norm: NormKind) -> Self {
        self.norm = norm;
        self
    }

    pub fn max_iters(mut self, n: usize) -> Self {
        self.max_iters = n;
        self
    }

    pub fn tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }
}

/// Trajectory of an iterated retrieval.
#[derive(Debug, Clone)]
pub struct RetrievalResult {
    /// Visited states, starting with the initial query. Length `steps + 1`.
    pub iterates: Vec<Array1<f64>>,
    /// Energy at each iterate (same length as `iterates`).
    pub energies: Vec<f64>,
    /// Simplex weights of the final update.
    pub weights_final: Vec<f64>,
    /// True when the step size fell to `tol` before `max_iters` ran out.
    pub converged: bool,
    /// Number of update steps actually taken.
    pub steps: usize,
}

impl RetrievalResult {
    /// Final state of the trajectory.
    pub fn last(&self) -> &Array1<f64> {
        self.iterates.last().expect("trajectory is never empty")
    }
}

/// Iterate the retrieval update from `x0` until the step size drops to
/// `cfg.tol` or `cfg.max_iters` steps have been taken.
pub fn retrieve(
    patterns: &PatternSet,
    phi: Option<&FeatureMap>,
    cfg: &RetrievalConfig,
    x0: &ArrayView1<f64>,
) -> Result<RetrievalResult> {
    if cfg.max_iters == 0 {
        return Err(Error::OutOfDomain {
            value: 0.0,
            domain: "max_iters >= 1",
        });
    }
    check_state(patterns, cfg.beta, x0)?;
    let mut iterates = vec![x0.to_owned()];
    let mut energies = vec![energy(patterns, phi, cfg.beta, x0)?];
    let mut weights_final = Vec::new();
    let mut converged = false;
    for _ in 0..cfg.max_iters {
        let current = iterates.last().unwrap();
        let (next, p) = update_step(patterns, phi, cfg.beta, cfg.norm, &current.view())?;
        let diff = (&next - current).mapv(|v| v * v).sum().sqrt();
        energies.push(energy(patterns, phi, cfg.beta, &next.view())?);
        iterates.push(next);
        weights_final = p;
        if diff <= cfg.tol {
            converged = true;
            break;
        }
    }
    let steps = iterates.len() - 1;
    Ok(RetrievalResult {
        iterates,
        energies,
        weights_final,
        converged,
        steps,
    })
}

/// Euclidean distance between a retrieved state and its target pattern.
pub fn retrieval_error(x: &ArrayView1<f64>, target: &ArrayView1<f64>) -> Result<f64> {
    if x.len() != target.len() {
        return Err(Error::DimensionMismatch {
            expected: target.len(),
            got: x.len(),
        });
    }
    Ok(x.iter()
        .zip(target.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patterns::generate_synthetic;
    use approx::assert_abs_diff_eq;
    use ndarray::Array2;
    use proptest::prelude::*;

    fn orthonormal_pair() -> PatternSet {
        let xi = Array2::from_shape_vec((2, 2), vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        PatternSet::from_columns(xi).unwrap()
    }

    #[test]
    fn energy_of_a_stored_pattern() {
        // Two orthonormal memories, beta = 1, state on the first memory:
        // E = 1/2 - ln(e + 1).
        let set = orthonormal_pair();
        let x = ndarray::array![1.0, 0.0];
        let e = mhm_energy(&set, 1.0, &x.view()).unwrap();
        assert_abs_diff_eq!(e, -0.8132616875182228, epsilon = 1e-12);
    }

    #[test]
    fn logsumexp_is_stable_and_exact() {
        assert_abs_diff_eq!(
            logsumexp(&[0.0, 0.0]),
            std::f64::consts::LN_2,
            epsilon = 1e-15
        );
        let shifted = logsumexp(&[1000.0, 1000.0]);
        assert_abs_diff_eq!(shifted, 1000.0 + std::f64::consts::LN_2, epsilon = 1e-12);
    }

    #[test]
    fn identity_map_without_normalization_reduces_to_the_classical_model() {
        let set = generate_synthetic(5, 4, 2).unwrap();
        let phi = FeatureMap::identity(4).unwrap();
        let x = crate::patterns::generate_query(4, 77).unwrap();
        let (a, pa) = update_step(&set, None, 2.0, NormKind::Softmax, &x.view()).unwrap();
        let (b, pb) = update_step(&set, Some(&phi), 2.0, NormKind::Softmax, &x.view()).unwrap();
        for (u, v) in a.iter().zip(b.iter()) {
            assert_abs_diff_eq!(u, v, epsilon = 1e-12);
        }
        for (u, v) in pa.iter().zip(pb.iter()) {
            assert_abs_diff_eq!(u, v, epsilon = 1e-12);
        }
        let ea = mhm_energy(&set, 2.0, &x.view()).unwrap();
        let eb = khm_energy(&set, &phi, 2.0, &x.view()).unwrap();
        assert_abs_diff_eq!(ea, eb, epsilon = 1e-12);
    }

    #[test]
    fn high_beta_retrieval_recovers_the_pattern() {
        // Wide enough that random patterns are well separated; retrieval
        // from a stored pattern then contracts onto it.
        let set = generate_synthetic(4, 16, 5).unwrap();
        let cfg = RetrievalConfig::new(40.0).max_iters(30).tol(1e-10);
        let x0 = set.matrix().column(2).to_owned();
        let out = retrieve(&set, None, &cfg, &x0.view()).unwrap();
        assert!(out.converged);
        let err = retrieval_error(&out.last().view(), &set.matrix().column(2)).unwrap();
        assert!(err < 1e-3, "retrieval error {err}");
        assert_eq!(out.energies.len(), out.iterates.len());
    }

    #[test]
    fn retrieval_error_stays_below_the_separation_radius() {
        // Strongly separated instance: antipodal unit patterns at high beta
        // are well separated, and retrieval from a stored pattern must stay
        // within the separation radius of it.
        let xi = Array2::from_shape_vec((2, 2), vec![1.0, -1.0, 0.0, 0.0]).unwrap();
        let set = PatternSet::from_columns(xi).unwrap();
        let phi = FeatureMap::new(Array2::eye(2), true).unwrap();
        let stats = phi.separation_stats(&set).unwrap();
        let cfg = RetrievalConfig::new(10.0).max_iters(20);
        for mu in 0..2 {
            let x0 = set.matrix().column(mu).to_owned();
            let out = retrieve(&set, Some(&phi), &cfg, &x0.view()).unwrap();
            let err = retrieval_error(&out.last().view(), &set.matrix().column(mu)).unwrap();
            assert!(
                err <= stats.r_phi,
                "error {err} exceeds radius {}",
                stats.r_phi
            );
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let set = orthonormal_pair();
        let x = ndarray::array![1.0, 0.0];
        assert!(matches!(
            mhm_energy(&set, 0.0, &x.view()),
            Err(Error::OutOfDomain { .. })
        ));
        let short = ndarray::array![1.0];
        assert!(matches!(
            update_step(&set, None, 1.0, NormKind::Softmax, &short.view()),
            Err(Error::DimensionMismatch {
                expected: 2,
                got: 1
            })
        ));
        let nan = ndarray::array![f64::NAN, 0.0];
        assert!(matches!(
            update_step(&set, None, 1.0, NormKind::Softmax, &nan.view()),
            Err(Error::NonFinite)
        ));
        let cfg = RetrievalConfig::new(1.0).max_iters(0);
        assert!(retrieve(&set, None, &cfg, &x.view()).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn update_lands_in_the_convex_hull(seed in 0u64..500, m in 2usize..8, d in 2usize..6) {
            let set = generate_synthetic(m, d, seed).unwrap();
            let x = crate::patterns::generate_query(d, seed ^ 0xabcd).unwrap();
            let (next, p) = update_step(&set, None, 2.0, NormKind::Softmax, &x.view()).unwrap();
            let sum: f64 = p.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-10);
            // Any point of the hull of unit vectors has norm at most one.
            prop_assert!(next.dot(&next).sqrt() <= 1.0 + 1e-12);
            // And it reproduces Xi * p exactly.
            let recomputed = set.matrix().dot(&Array1::from_vec(p));
            for (a, b) in next.iter().zip(recomputed.iter()) {
                prop_assert!((a - b).abs() < 1e-14);
            }
        }

        #[test]
        fn softmax_energy_never_increases(seed in 0u64..300, m in 2usize..8, d in 2usize..6, beta in 0.5f64..8.0) {
            let set = generate_synthetic(m, d, seed).unwrap();
            let x0 = crate::patterns::generate_query(d, seed ^ 0x55aa).unwrap();
            let cfg = RetrievalConfig { beta, norm: NormKind::Softmax, max_iters: 15, tol: 0.0 };
            let out = retrieve(&set, None, &cfg, &x0.view()).unwrap();
            for w in out.energies.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-9, "energy rose: {} -> {}", w[0], w[1]);
            }
        }
    }
}
